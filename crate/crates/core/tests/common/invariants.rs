//! Property suites for every module's invariants. Each check runs a
//! proptest runner for the requested number of cases and reports the first
//! minimal failure.

use std::net::Ipv4Addr;

use packetscore::control::{
    compute_threshold, load_shed, should_discard, LoadShedInput, ScoreCdf, Threshold,
};
use packetscore::packet_model::{bucket_count, bucketize, bucketize_dim, AttributeKind, BucketConfig, GroundTruth, PacketRecord};
use packetscore::pipeline::{FilterSettings, PacketVerdict, PeriodMode, Pipeline, PipelineRunner, ShedSettings};
use packetscore::profiling::{build_nominal, MeasuredProfile, NominalProfile, RatioSource};
use packetscore::report::compute_metrics;
use packetscore::scoring::{build_scorebook, build_scorebook_with_prior, clp_direct, Score, Scorebook};
use packetscore::traffic::{generate, AttackKind, AttackModel, LegitModel, Pin, TraceReader, TraceWriter};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRunner};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Check = fn(u32) -> Result<(), String>;

fn run<S: Strategy>(
    cases: u32,
    strategy: S,
    test: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> Result<(), String> {
    let mut runner = TestRunner::new(Config { cases, failure_persistence: None, ..Config::default() });
    runner.run(&strategy, test).map_err(|e| e.to_string())
}

pub fn arb_label() -> impl Strategy<Value = GroundTruth> {
    prop_oneof![Just(GroundTruth::Legitimate), Just(GroundTruth::Attack), Just(GroundTruth::Unknown)]
}

pub fn arb_packet() -> impl Strategy<Value = PacketRecord> {
    (
        any::<u32>(),
        20u16..,
        any::<u8>(),
        prop_oneof![Just(6u8), Just(17u8), Just(1u8), any::<u8>()],
        any::<u8>(),
        any::<u16>(),
        0.0..1e6f64,
        arb_label(),
    )
        .prop_map(|(ip, size, ttl, proto, flags, port, ts, gt)| {
            let src = Ipv4Addr::from(ip);
            match proto {
                6 => PacketRecord::tcp(ts, src, size, ttl, flags, port),
                17 => PacketRecord::udp(ts, src, size, ttl, port),
                p => PacketRecord::other(ts, src, p, size, ttl),
            }
            .labeled(gt)
        })
}

pub fn arb_config() -> impl Strategy<Value = BucketConfig> {
    let pairs: Vec<Option<(AttributeKind, AttributeKind)>> = std::iter::once(None)
        .chain(AttributeKind::ALL.iter().enumerate().flat_map(|(i, &a)| {
            AttributeKind::ALL[i + 1..].iter().map(move |&b| Some((a, b)))
        }))
        .collect();
    (
        prop::collection::btree_set(21u32..2000, 0..8),
        1u32..=64,
        0u8..=12,
        prop::sample::select(pairs),
    )
        .prop_map(|(edges, ttl, prefix, joint)| BucketConfig {
            size_bucket_edges: edges.into_iter().collect(),
            ttl_bucket_width: ttl,
            src_prefix_len: prefix,
            joint_pair: joint,
        })
        .prop_filter("table too large", |c| c.validate().is_ok())
}

fn profile_of(id: u64, cfg: &BucketConfig, packets: &[PacketRecord]) -> MeasuredProfile {
    let mut p = MeasuredProfile::new(id, cfg).unwrap();
    packets.iter().for_each(|x| p.observe(x));
    p
}

/// Random training periods and a measured period drawn mostly from a shared
/// packet pool, so profiles overlap the way real traffic does.
pub fn random_profiles(
    cfg: &BucketConfig,
    pool: &[PacketRecord],
    seed: u64,
) -> (Vec<MeasuredProfile>, MeasuredProfile, ChaCha8Rng) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let periods = rng.random_range(1..=4);
    let training = (0..periods)
        .map(|i| {
            let n = rng.random_range(0..40);
            let pk: Vec<_> = (0..n).map(|_| pool.choose(&mut rng).unwrap().clone()).collect();
            let mut p = profile_of(i, cfg, &pk);
            p.duration_seconds = rng.random_range(0.5..2.0);
            p
        })
        .collect();
    let n = rng.random_range(0..60);
    let pk: Vec<_> = (0..n).map(|_| pool.choose(&mut rng).unwrap().clone()).collect();
    let mut measured = profile_of(99, cfg, &pk);
    measured.duration_seconds = rng.random_range(0.0..2.0);
    (training, measured, rng)
}

pub fn arb_pool() -> impl Strategy<Value = Vec<PacketRecord>> {
    prop::collection::vec(arb_packet(), 1..16)
}

// ---- packet_model ----

pub fn bucketize_is_total(cases: u32) -> Result<(), String> {
    run(cases, (arb_config(), arb_packet()), |(cfg, p)| {
        for kind in AttributeKind::ALL {
            prop_assert!(bucketize(&p, kind, &cfg) < bucket_count(kind, &cfg));
        }
        for dim in cfg.dimensions() {
            prop_assert!(bucketize_dim(&p, dim, &cfg) < cfg.dimension_len(dim));
        }
        Ok(())
    })
}

pub fn bucketize_preserves_order(cases: u32) -> Result<(), String> {
    run(cases, (arb_config(), 20u16.., 20u16.., any::<u8>(), any::<u8>()), |(cfg, s1, s2, t1, t2)| {
        let pk = |s, t| PacketRecord::other(0.0, Ipv4Addr::LOCALHOST, 1, s, t);
        let (a, b) = (pk(s1.min(s2), t1.min(t2)), pk(s1.max(s2), t1.max(t2)));
        prop_assert!(bucketize(&a, AttributeKind::PacketSize, &cfg) <= bucketize(&b, AttributeKind::PacketSize, &cfg));
        prop_assert!(bucketize(&a, AttributeKind::Ttl, &cfg) <= bucketize(&b, AttributeKind::Ttl, &cfg));
        Ok(())
    })
}

pub fn labels_never_reach_the_filter(cases: u32) -> Result<(), String> {
    let strategy = (prop::collection::vec(arb_packet(), 20..80), any::<u64>());
    run(cases, strategy, |(packets, seed)| {
        let cfg = BucketConfig { src_prefix_len: 4, ..BucketConfig::default() };
        let mut shuffled = packets.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut labels: Vec<_> = packets.iter().map(|p| p.ground_truth).collect();
        labels.shuffle(&mut rng);
        for (p, l) in shuffled.iter_mut().zip(labels) {
            p.ground_truth = if rng.random() { l } else { GroundTruth::Unknown };
        }
        for (a, b) in packets.iter().zip(&shuffled) {
            for kind in AttributeKind::ALL {
                prop_assert_eq!(bucketize(a, kind, &cfg), bucketize(b, kind, &cfg));
            }
        }
        let nominal: NominalProfile<f64> = build_nominal(&[profile_of(0, &cfg, &packets[..10])]).unwrap();
        let scores = |pk: &[PacketRecord]| -> Vec<(u64, bool)> {
            run_pipeline(&nominal, pk, 7).into_iter().map(|v| (v.score.to_bits(), v.discarded)).collect()
        };
        prop_assert_eq!(scores(&packets), scores(&shuffled));
        Ok(())
    })
}

// ---- profiling ----

pub fn measured_ratios_are_normalized(cases: u32) -> Result<(), String> {
    run(cases, (arb_config(), prop::collection::vec(arb_packet(), 1..200)), |(cfg, packets)| {
        let p = profile_of(0, &cfg, &packets);
        prop_assert!(p.histograms().all(|h| h.total == p.packet_count && h.counts.iter().sum::<u64>() == h.total));
        for dim in cfg.dimensions() {
            let sum: f64 = (0..cfg.dimension_len(dim)).map(|b| RatioSource::<f64>::ratio(&p, dim, b)).sum();
            prop_assert!((sum - 1.0).abs() <= 1e-12, "{} sums to {}", dim.name(), sum);
        }
        Ok(())
    })
}

fn training_set() -> impl Strategy<Value = (BucketConfig, Vec<Vec<PacketRecord>>)> {
    (arb_config(), prop::collection::vec(prop::collection::vec(arb_packet(), 0..30), 1..5))
}

fn periods(cfg: &BucketConfig, sets: &[Vec<PacketRecord>]) -> Vec<MeasuredProfile> {
    sets.iter()
        .enumerate()
        .map(|(i, s)| {
            let mut p = profile_of(i as u64, cfg, s);
            p.duration_seconds = 0.1 + s.len() as f64 / 7.0;
            p
        })
        .collect()
}

pub fn nominal_is_idempotent_and_order_free(cases: u32) -> Result<(), String> {
    run(cases, (training_set(), any::<u64>()), |((cfg, sets), seed)| {
        let ps = periods(&cfg, &sets);
        let base: NominalProfile<f64> = build_nominal(&ps).unwrap();
        let doubled: Vec<_> = ps.iter().chain(&ps).cloned().collect();
        let twice: NominalProfile<f64> = build_nominal(&doubled).unwrap();
        for dim in cfg.dimensions() {
            prop_assert_eq!(twice.ratios(dim), base.ratios(dim));
        }
        prop_assert!((twice.nominal_rate - base.nominal_rate).abs() <= 1e-12 * base.nominal_rate);
        prop_assert!((twice.mean_period_seconds - base.mean_period_seconds).abs() <= 1e-12 * base.mean_period_seconds);
        let mut shuffled = ps.clone();
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        prop_assert_eq!(&build_nominal::<f64>(&shuffled).unwrap(), &base);
        Ok(())
    })
}

pub fn nominal_dominates_and_grows(cases: u32) -> Result<(), String> {
    run(cases, (training_set(), prop::collection::vec(arb_packet(), 0..30)), |((cfg, sets), extra)| {
        let ps = periods(&cfg, &sets);
        let base: NominalProfile<f64> = build_nominal(&ps).unwrap();
        let mut more = ps.clone();
        more.push(profile_of(ps.len() as u64, &cfg, &extra));
        let grown: NominalProfile<f64> = build_nominal(&more).unwrap();
        for dim in cfg.dimensions() {
            for b in 0..cfg.dimension_len(dim) {
                let mean = ps.iter().map(|p| RatioSource::<f64>::ratio(p, dim, b)).sum::<f64>() / ps.len() as f64;
                prop_assert!(base.ratio(dim, b) >= mean - 1e-15);
                prop_assert!(grown.ratio(dim, b) >= base.ratio(dim, b));
            }
            if ps.iter().any(|p| p.packet_count > 0) {
                let sum: f64 = base.ratios(dim).iter().sum();
                prop_assert!(sum >= 1.0 - 1e-12);
            }
        }
        Ok(())
    })
}

pub fn nominal_json_round_trips(cases: u32) -> Result<(), String> {
    run(cases, training_set(), |(cfg, sets)| {
        let n: NominalProfile<f64> = build_nominal(&periods(&cfg, &sets)).unwrap();
        prop_assert_eq!(NominalProfile::<f64>::from_json(&n.to_json().unwrap()).unwrap(), n);
        Ok(())
    })
}

// ---- scoring ----

/// Relative oracle error `|score - ln clp| / (1 + |ln clp|)`.
pub fn oracle_error(book: &Scorebook<f64>, nominal: &NominalProfile<f64>, measured: &MeasuredProfile, p: &PacketRecord) -> f64 {
    let clp = clp_direct(p, nominal, measured, book.epsilon).unwrap();
    let s = book.score(p).value();
    (s - clp.ln()).abs() / (1.0 + clp.ln().abs())
}

pub fn score_matches_direct_clp(cases: u32) -> Result<(), String> {
    run(cases, (arb_config(), arb_pool(), any::<u64>(), arb_packet()), |(cfg, pool, seed, fresh)| {
        let (training, measured, mut rng) = random_profiles(&cfg, &pool, seed);
        let nominal: NominalProfile<f64> = build_nominal(&training).unwrap();
        let book = build_scorebook(&nominal, &measured, 1e-6).unwrap();
        let probe = if rng.random_bool(0.8) { pool.choose(&mut rng).unwrap().clone() } else { fresh };
        let err = oracle_error(&book, &nominal, &measured, &probe);
        prop_assert!(err <= 1e-9, "relative error {}", err);
        Ok(())
    })
}

pub fn single_precision_tracks_double(cases: u32) -> Result<(), String> {
    run(cases, (arb_config(), arb_pool(), any::<u64>()), |(cfg, pool, seed)| {
        let (training, measured, mut rng) = random_profiles(&cfg, &pool, seed);
        let n64: NominalProfile<f64> = build_nominal(&training).unwrap();
        let n32: NominalProfile<f32> = build_nominal(&training).unwrap();
        let b64 = build_scorebook(&n64, &measured, 1e-6).unwrap();
        let b32 = build_scorebook(&n32, &measured, 1e-6f32).unwrap();
        let p = pool.choose(&mut rng).unwrap();
        let (a, b) = (b64.score(p).value(), f64::from(b32.score(p).value()));
        prop_assert!((a - b).abs() <= 1e-4 * (1.0 + a.abs()), "{} vs {}", a, b);
        Ok(())
    })
}

pub fn scorebooks_are_deterministic(cases: u32) -> Result<(), String> {
    run(cases, (arb_config(), arb_pool(), any::<u64>()), |(cfg, pool, seed)| {
        let (training, measured, _) = random_profiles(&cfg, &pool, seed);
        let nominal: NominalProfile<f64> = build_nominal(&training).unwrap();
        let a = build_scorebook(&nominal, &measured, 1e-6).unwrap();
        let b = build_scorebook(&nominal, &measured, 1e-6).unwrap();
        prop_assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
        prop_assert_eq!(Scorebook::<f64>::from_json(&a.to_json().unwrap()).unwrap(), a);
        Ok(())
    })
}

pub fn scores_ignore_common_scaling(cases: u32) -> Result<(), String> {
    run(cases, (arb_pool(), any::<u64>(), 2usize..6, 1.0..5000.0f64), |(pool, seed, k, legit)| {
        let cfg = BucketConfig { src_prefix_len: 8, ..BucketConfig::default() };
        let (training, measured_once, mut rng) = random_profiles(&cfg, &pool, seed);
        let nominal: NominalProfile<f64> = build_nominal(&training).unwrap();
        // Same measured ratios with k times the packets.
        let packets: Vec<_> = (0..rng.random_range(1..30)).map(|_| pool.choose(&mut rng).unwrap().clone()).collect();
        let once = profile_of(1, &cfg, &packets);
        let repeated: Vec<_> = packets.iter().flat_map(|p| std::iter::repeat_n(p.clone(), k)).collect();
        let many = profile_of(1, &cfg, &repeated);
        let a = build_scorebook_with_prior(&nominal, &once, 1e-6, legit).unwrap();
        let b = build_scorebook_with_prior(&nominal, &many, 1e-6, legit * k as f64).unwrap();
        let _ = measured_once;
        for p in &pool {
            let (x, y) = (a.score(p).value(), b.score(p).value());
            prop_assert!((x - y).abs() <= 1e-12 * (1.0 + x.abs()), "{} vs {}", x, y);
        }
        Ok(())
    })
}

/// Attack packets pinning one TTL value that is over-represented in the
/// measured period score strictly lower on that table than any value whose
/// measured share fell below its nominal share.
pub fn attack_values_are_depressed(cases: u32) -> Result<(), String> {
    run(cases, (prop::collection::vec(arb_packet(), 20..80), any::<u8>(), 5usize..200), |(legit, ttl, n_attack)| {
        let cfg = BucketConfig { src_prefix_len: 8, ..BucketConfig::default() };
        let nominal: NominalProfile<f64> = build_nominal(&[profile_of(0, &cfg, &legit)]).unwrap();
        let attack = PacketRecord::udp(0.0, Ipv4Addr::new(203, 0, 113, 1), 64, ttl, 9);
        let mut mix = legit.clone();
        mix.extend(std::iter::repeat_n(attack.clone(), n_attack));
        let measured = profile_of(1, &cfg, &mix);
        let dim = packetscore::Dimension::Single(AttributeKind::Ttl);
        let v = bucketize(&attack, AttributeKind::Ttl, &cfg);
        let (pn, pm): (f64, f64) = (nominal.ratio(dim, v), RatioSource::<f64>::ratio(&measured, dim, v));
        prop_assume!(pm > pn);
        let book = build_scorebook(&nominal, &measured, 1e-6).unwrap();
        let entries = book.entries(dim).unwrap();
        prop_assert!(entries[v] < 0.0);
        for b in 0..entries.len() {
            let (pn_b, pm_b): (f64, f64) = (nominal.ratio(dim, b), RatioSource::<f64>::ratio(&measured, dim, b));
            if pm_b < pn_b {
                prop_assert!(entries[v] < entries[b]);
                prop_assert!(entries[b] > 0.0);
            }
        }
        Ok(())
    })
}

// ---- control ----

fn arb_scores() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(prop_oneof![-120.0..120.0f64, -5.0..5.0f64, Just(0.0)], 1..400)
}

fn filled_cdf(scores: &[f64], bins: usize) -> ScoreCdf<f64> {
    let mut cdf = ScoreCdf::for_scorebook(0, 6, 1e-6, bins).unwrap();
    scores.iter().for_each(|&s| cdf.insert(Score(s)));
    cdf
}

pub fn threshold_is_monotone_in_phi(cases: u32) -> Result<(), String> {
    run(cases, (arb_scores(), 0.0..=1.0f64, 0.0..=1.0f64, 1usize..2048), |(scores, a, b, bins)| {
        let cdf = filled_cdf(&scores, bins);
        let (lo, hi) = (a.min(b), a.max(b));
        let rank = |t: Threshold<f64>| match t {
            Threshold::None => f64::NEG_INFINITY,
            Threshold::Cutoff(x) => x,
            Threshold::All => f64::INFINITY,
        };
        let (t_lo, t_hi) = (compute_threshold(&cdf, lo).unwrap(), compute_threshold(&cdf, hi).unwrap());
        prop_assert!(rank(t_lo.thd) <= rank(t_hi.thd));
        Ok(())
    })
}

pub fn threshold_replay_is_accurate(cases: u32) -> Result<(), String> {
    run(cases, (arb_scores(), 0.0..=1.0f64, 1usize..2048), |(scores, phi, bins)| {
        let cdf = filled_cdf(&scores, bins);
        let state = compute_threshold(&cdf, phi).unwrap();
        let dropped = scores.iter().filter(|&&s| should_discard(&state, Score(s))).count() as f64 / scores.len() as f64;
        prop_assert!(dropped >= phi - 1e-12, "dropped {} < phi {}", dropped, phi);
        prop_assert!(dropped - phi <= cdf.max_bin_mass() + 1e-12, "dropped {} phi {}", dropped, phi);
        Ok(())
    })
}

pub fn load_shed_is_monotone(cases: u32) -> Result<(), String> {
    run(cases, (0.0..1e6f64, 0.0..1e6f64, 1.0..1e5f64, 1.0..1e5f64, 0.01..=1.0f64), |(r1, r2, c1, c2, u)| {
        let shed = |rate, cap| load_shed(&LoadShedInput { arrival_rate: rate, target_capacity: cap, current_utilization: 0.0, max_utilization: u });
        let (rl, rh) = (r1.min(r2), r1.max(r2));
        let (cl, ch) = (c1.min(c2), c1.max(c2));
        prop_assert!(shed(rl, c1) <= shed(rh, c1));
        prop_assert!(shed(r1, cl) >= shed(r1, ch));
        let phi = shed(r1, c1);
        prop_assert!((0.0..=1.0).contains(&phi));
        Ok(())
    })
}

pub fn empty_cdf_fails_open(cases: u32) -> Result<(), String> {
    run(cases, (0.0..1.0f64, 1usize..4096, -1e6..1e6f64), |(phi, bins, s)| {
        let cdf = ScoreCdf::<f64>::for_scorebook(3, 6, 1e-6, bins).unwrap();
        let state = compute_threshold(&cdf, phi).unwrap();
        prop_assert!(!should_discard(&state, Score(s)));
        Ok(())
    })
}

// ---- pipeline ----

/// Small nominal profile for pipeline properties.
pub fn small_nominal(seed: u64) -> NominalProfile<f64> {
    let cfg = BucketConfig { src_prefix_len: 8, ..BucketConfig::default() };
    let legit = LegitModel::typical(&cfg, 1000.0, seed).unwrap();
    let packets = generate(&legit, &[], 2.0).unwrap();
    let ps: Vec<_> = packets.chunks(400).enumerate().map(|(i, c)| profile_of(i as u64, &cfg, c)).collect();
    build_nominal(&ps).unwrap()
}

pub fn mixed_trace(seed: u64, seconds: f64) -> Vec<PacketRecord> {
    let cfg = BucketConfig { src_prefix_len: 8, ..BucketConfig::default() };
    let legit = LegitModel::typical(&cfg, 300.0, seed).unwrap();
    let attack = AttackModel {
        kind: AttackKind::FixedAttribute { pins: vec![Pin::new(AttributeKind::Ttl, 5).unwrap()] },
        rate_pps: 1200.0,
        start: 0.3,
        stop: seconds,
        seed: seed ^ 0xa5a5,
    };
    generate(&legit, &[attack], seconds).unwrap()
}

pub fn run_pipeline(nominal: &NominalProfile<f64>, packets: &[PacketRecord], period: u64) -> Vec<PacketVerdict<f64>> {
    let pl = Pipeline::new(nominal.clone(), FilterSettings::default()).unwrap();
    let shed = ShedSettings { target_capacity: 300.0, max_utilization: 1.0 };
    let mut runner = PipelineRunner::new(pl, PeriodMode::CountBased { packets: period }, shed).unwrap();
    packets.iter().map(|p| runner.push(p).unwrap()).collect()
}

/// Mutating one packet's attributes in period i leaves every other verdict
/// of periods <= i unchanged.
pub fn no_same_period_feedback(cases: u32) -> Result<(), String> {
    let nominal = small_nominal(11);
    let base = mixed_trace(12, 1.0);
    let reference = run_pipeline(&nominal, &base, 150);
    let n = base.len();
    run(cases, (0..n, arb_packet()), |(idx, replacement)| {
        let mut mutated = base.clone();
        let mut r = replacement;
        r.timestamp = base[idx].timestamp;
        mutated[idx] = r;
        let got = run_pipeline(&nominal, &mutated, 150);
        let period = reference[idx].period;
        for (a, b) in reference.iter().zip(&got).take_while(|(a, _)| a.period <= period) {
            prop_assert_eq!(a.period, b.period);
            if a.packet_id == idx as u64 {
                continue;
            }
            prop_assert_eq!(a.discarded, b.discarded, "packet {} in period {}", a.packet_id, a.period);
            prop_assert_eq!(a.score.to_bits(), b.score.to_bits());
        }
        Ok(())
    })
}

pub fn warm_up_discards_nothing(cases: u32) -> Result<(), String> {
    let nominal = small_nominal(5);
    run(cases, (prop::collection::vec(arb_packet(), 1..300), 1u64..400), |(mut packets, period)| {
        packets.sort_by(|a, b| a.timestamp.total_cmp(&b.timestamp));
        let verdicts = run_pipeline(&nominal, &packets, period);
        prop_assert!(verdicts.iter().filter(|v| v.period == 0).all(|v| !v.discarded && v.score == 0.0));
        Ok(())
    })
}

pub fn pipeline_is_deterministic(cases: u32) -> Result<(), String> {
    let nominal = small_nominal(8);
    run(cases, (any::<u64>(), 50u64..300), |(seed, period)| {
        let trace = mixed_trace(seed, 0.6);
        let a: Vec<_> = run_pipeline(&nominal, &trace, period);
        let b: Vec<_> = run_pipeline(&nominal, &trace, period);
        prop_assert_eq!(a, b);
        Ok(())
    })
}

// ---- traffic ----

pub fn trace_format_round_trips(cases: u32) -> Result<(), String> {
    run(cases, prop::collection::vec(arb_packet(), 0..60), |mut packets| {
        packets.sort_by(|a, b| a.timestamp.total_cmp(&b.timestamp));
        let mut w = TraceWriter::new(Vec::new()).unwrap();
        packets.iter().for_each(|p| w.write(p).unwrap());
        let bytes = w.finish().unwrap();
        let back: Vec<_> = TraceReader::new(bytes.as_slice()).collect::<Result<_, _>>().unwrap();
        prop_assert_eq!(back, packets);
        Ok(())
    })
}

pub fn generator_accounting(cases: u32) -> Result<(), String> {
    let strategy = (any::<u64>(), 50.0..400.0f64, 50.0..800.0f64, 0.0..0.5f64, 0.0..=1.0f64, 20usize..300);
    run(cases, strategy, |(seed, legit_rate, attack_rate, start, lambda, period)| {
        let cfg = BucketConfig::default();
        let legit = LegitModel::typical(&cfg, legit_rate, seed).unwrap();
        let attack = AttackModel {
            kind: AttackKind::MimicBlend { pins: vec![Pin::new(AttributeKind::Protocol, 17).unwrap()], lambda },
            rate_pps: attack_rate,
            start,
            stop: 0.9,
            seed: seed.wrapping_add(1),
        };
        let a = generate(&legit, std::slice::from_ref(&attack), 1.0).unwrap();
        let b = generate(&legit, &[attack], 1.0).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert!(a.windows(2).all(|w| w[0].timestamp <= w[1].timestamp));
        prop_assert!(a.iter().all(|p| p.check().is_ok()));
        for chunk in a.chunks(period) {
            let legit_n = chunk.iter().filter(|p| p.ground_truth == GroundTruth::Legitimate).count();
            let attack_n = chunk.iter().filter(|p| p.ground_truth == GroundTruth::Attack).count();
            prop_assert_eq!(chunk.len(), legit_n + attack_n);
        }
        Ok(())
    })
}

// ---- reporting ----

pub fn error_rates_are_complementary(cases: u32) -> Result<(), String> {
    let rows = prop::collection::vec((0u64..4, any::<bool>(), arb_label()), 1..300);
    run(cases, rows, |rows| {
        let verdicts = rows.iter().enumerate().map(|(i, &(period, discarded, label))| {
            (PacketVerdict { packet_id: i as u64, score: 0.0f64, discarded, period, book_period: None }, label)
        });
        let (periods, _) = compute_metrics(verdicts, &[]);
        for p in periods {
            prop_assert!((0.0..=1.0).contains(&p.realized_discard));
            prop_assert_eq!(p.discarded, p.legit_discarded + p.attack_discarded + {
                rows.iter().filter(|r| r.0 == p.period_id && r.1 && r.2 == GroundTruth::Unknown).count() as u64
            });
            if let Some(fpr) = p.false_positive_rate {
                let passed = (p.legitimate - p.legit_discarded) as f64 / p.legitimate as f64;
                prop_assert_eq!(p.legit_discarded + (p.legitimate - p.legit_discarded), p.legitimate);
                prop_assert!((fpr + passed - 1.0).abs() <= 1e-15);
            }
        }
        Ok(())
    })
}

/// Every invariant suite, by module.
pub const SUITES: &[(&str, &str, Check)] = &[
    ("packet_model", "bucketize total over every domain", bucketize_is_total),
    ("packet_model", "size/TTL bucketize order-preserving", bucketize_preserves_order),
    ("packet_model", "ground truth never affects bucketing or scoring", labels_never_reach_the_filter),
    ("profiling", "measured ratios sum to 1", measured_ratios_are_normalized),
    ("profiling", "nominal idempotent and permutation-invariant", nominal_is_idempotent_and_order_free),
    ("profiling", "nominal dominates mean and grows with periods", nominal_dominates_and_grows),
    ("profiling", "nominal JSON round trip", nominal_json_round_trips),
    ("scoring", "score equals ln(direct CLP)", score_matches_direct_clp),
    ("scoring", "f32 scores track f64", single_precision_tracks_double),
    ("scoring", "scorebook determinism and JSON round trip", scorebooks_are_deterministic),
    ("scoring", "scores invariant to common count scaling", scores_ignore_common_scaling),
    ("scoring", "over-represented values get depressed entries", attack_values_are_depressed),
    ("control", "threshold monotone in phi", threshold_is_monotone_in_phi),
    ("control", "replayed discard within one bin of phi", threshold_replay_is_accurate),
    ("control", "load shed monotone", load_shed_is_monotone),
    ("control", "empty CDF fails open", empty_cdf_fails_open),
    ("pipeline", "no same-period feedback", no_same_period_feedback),
    ("pipeline", "warm-up discards nothing", warm_up_discards_nothing),
    ("pipeline", "verdicts deterministic", pipeline_is_deterministic),
    ("traffic", "trace CSV round trip", trace_format_round_trips),
    ("traffic", "generator determinism, ordering, N_m = N_n + N_a", generator_accounting),
    ("report", "FPR + legit pass fraction = 1", error_rates_are_complementary),
];
