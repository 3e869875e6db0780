//! Batch commands behind the `packetscore` binary.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{info, warn};

use crate::config::{Precision, RunConfig};
use crate::error::{Error, Result};
use crate::packet_model::{GroundTruth, PacketRecord};
use crate::pipeline::{FilterSettings, PacketVerdict, PeriodClock, Pipeline, PipelineRunner};
use crate::profiling::{build_nominal, MeasuredProfile, NominalProfile};
use crate::report::{MetricsAccumulator, RunReport, VerdictWriter};
use crate::scalar::Real;
use crate::traffic::{generate, write_trace, LegitModel, TraceReader};

/// Splits a packet stream into periods and profiles each one.
///
/// Returns the profiles and the number of attack-labeled packets seen
/// (labels never influence the profiles).
pub fn profile_periods(
    packets: impl IntoIterator<Item = Result<PacketRecord>>,
    config: &RunConfig,
) -> Result<(Vec<MeasuredProfile>, u64)> {
    let mut clock = PeriodClock::new(config.period)?;
    let mut current = MeasuredProfile::new(0, &config.bucket)?;
    let mut done = Vec::new();
    let mut attack_labels = 0;
    for packet in packets {
        let packet = packet?;
        while clock.must_close(packet.timestamp) {
            let next = MeasuredProfile::new(clock.index() + 1, &config.bucket)?;
            let mut finished = std::mem::replace(&mut current, next);
            finished.duration_seconds = clock.close();
            done.push(finished);
        }
        attack_labels += u64::from(packet.ground_truth == GroundTruth::Attack);
        current.observe(&packet);
        clock.admit(packet.timestamp);
    }
    if clock.packets_in_period() > 0 {
        current.duration_seconds = clock.duration();
        done.push(current);
    }
    Ok((done, attack_labels))
}

pub fn learn_nominal<R: Real>(
    packets: impl IntoIterator<Item = Result<PacketRecord>>,
    config: &RunConfig,
) -> Result<NominalProfile<R>> {
    let (profiles, attack_labels) = profile_periods(packets, config)?;
    if attack_labels > 0 {
        warn!("training trace holds {attack_labels} attack-labeled packets; labels are ignored");
    }
    info!("learned nominal profile from {} periods", profiles.len());
    build_nominal(&profiles)
}

/// `profile`: learns a nominal profile from a trace and writes it as JSON.
pub fn cmd_profile(trace: &Path, config: &RunConfig, out: &Path) -> Result<()> {
    let packets = TraceReader::open(trace)?;
    match config.precision {
        Precision::F64 => learn_nominal::<f64>(packets, config)?.save(out),
        Precision::F32 => learn_nominal::<f32>(packets, config)?.save(out),
    }
}

/// Synthetic traffic described by the configuration's scenario keys.
pub fn scenario_packets(config: &RunConfig) -> Result<Vec<PacketRecord>> {
    let s = &config.scenario;
    let legit = LegitModel::typical(&config.bucket, s.legit_rate_pps, s.legit_seed)?;
    let mut packets = generate(&legit, &s.attacks, s.duration)?;
    if let Some(n) = s.max_packets {
        packets.truncate(n);
    }
    Ok(packets)
}

/// `generate`: writes the scenario's traffic as a trace CSV.
pub fn cmd_generate(config: &RunConfig, out: &Path) -> Result<usize> {
    let packets = scenario_packets(config)?;
    write_trace(out, &packets)?;
    Ok(packets.len())
}

pub fn filter_settings<R: Real>(config: &RunConfig) -> FilterSettings<R> {
    FilterSettings {
        epsilon: R::lit(config.epsilon),
        cdf_bins: config.cdf_bins,
        cdf_range: config.cdf_range.map(|(lo, hi)| (R::lit(lo), R::lit(hi))),
    }
}

/// Runs the filter over `packets`, calling `observe` with every verdict and
/// the packet it judged.
pub fn run_filter_with<R: Real>(
    nominal: NominalProfile<R>,
    config: &RunConfig,
    packets: impl IntoIterator<Item = Result<PacketRecord>>,
    mut observe: impl FnMut(&PacketVerdict<R>, &PacketRecord) -> Result<()>,
) -> Result<RunReport> {
    if config.bucket_explicit && nominal.config() != &config.bucket {
        return Err(Error::ProfileConfigMismatch(
            "configuration bucket keys differ from the profile's bucket configuration".into(),
        ));
    }
    let started = Instant::now();
    let pipeline = Pipeline::new(nominal, filter_settings(config))?;
    let mut runner = PipelineRunner::new(pipeline, config.period, config.shed)?;
    let mut metrics = MetricsAccumulator::new();
    for packet in packets {
        let packet = packet?;
        let verdict = runner.push(&packet)?;
        // Labels are only joined with verdicts here, after the filter decided.
        metrics.record(&verdict, packet.ground_truth);
        observe(&verdict, &packet)?;
    }
    let summaries = runner.finish()?;
    let (periods, totals) = metrics.finish(&summaries);
    Ok(RunReport {
        config: config.entries.clone(),
        seed: config.entries.contains_key("seed").then_some(config.seed),
        labeled: metrics.labeled(),
        totals,
        periods,
        wall_clock_seconds: started.elapsed().as_secs_f64(),
    })
}

pub fn run_filter<R: Real>(
    nominal: NominalProfile<R>,
    config: &RunConfig,
    packets: impl IntoIterator<Item = Result<PacketRecord>>,
) -> Result<RunReport> {
    run_filter_with(nominal, config, packets, |_, _| Ok(()))
}

/// Where a run writes its results.
#[derive(Clone, Debug)]
pub struct RunOutputs {
    pub report: PathBuf,
    pub verdicts: Option<PathBuf>,
}

impl RunOutputs {
    /// Time-series CSV next to the JSON report.
    pub fn series_path(&self) -> PathBuf {
        self.report.with_extension("csv")
    }
}

fn run_to_files<R: Real>(
    profile: &Path,
    config: &RunConfig,
    packets: impl IntoIterator<Item = Result<PacketRecord>>,
    outputs: &RunOutputs,
) -> Result<RunReport> {
    let nominal = NominalProfile::<R>::load(profile)?;
    let mut verdicts = outputs
        .verdicts
        .as_ref()
        .map(|p| VerdictWriter::new(BufWriter::new(File::create(p)?)))
        .transpose()?;
    let report = run_filter_with(nominal, config, packets, |v, p| match verdicts.as_mut() {
        Some(w) => w.write(v, p.ground_truth),
        None => Ok(()),
    })?;
    if let Some(w) = verdicts {
        w.finish()?;
    }
    std::fs::write(&outputs.report, report.to_json()?)?;
    let mut series = BufWriter::new(File::create(outputs.series_path())?);
    report.write_series(&mut series)?;
    series.flush()?;
    Ok(report)
}

fn dispatch(
    profile: &Path,
    config: &RunConfig,
    packets: impl IntoIterator<Item = Result<PacketRecord>>,
    outputs: &RunOutputs,
) -> Result<RunReport> {
    match config.precision {
        Precision::F64 => run_to_files::<f64>(profile, config, packets, outputs),
        Precision::F32 => run_to_files::<f32>(profile, config, packets, outputs),
    }
}

/// `simulate`: generates the scenario's traffic and filters it.
pub fn cmd_simulate(profile: &Path, config: &RunConfig, outputs: &RunOutputs) -> Result<RunReport> {
    if !profile.exists() {
        return Err(Error::InvalidProfile(format!("profile {} does not exist", profile.display())));
    }
    let packets = scenario_packets(config)?;
    dispatch(profile, config, packets.into_iter().map(Ok), outputs)
}

/// `replay`: filters a recorded trace.
pub fn cmd_replay(profile: &Path, trace: &Path, config: &RunConfig, outputs: &RunOutputs) -> Result<RunReport> {
    dispatch(profile, config, TraceReader::open(trace)?, outputs)
}
