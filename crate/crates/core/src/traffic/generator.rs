use std::net::Ipv4Addr;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::packet_model::{
    bucket_count, bucketize, prefix_network, AttributeKind, BucketConfig, GroundTruth, PacketRecord,
    MIN_PACKET_SIZE, PROTO_TCP, PROTO_UDP,
};

/// Categorical distribution over bucket indices.
#[derive(Clone, Debug)]
pub struct Categorical {
    buckets: Vec<usize>,
    probs: Vec<f64>,
    sampler: WeightedIndex<f64>,
}

impl Categorical {
    /// Builds from `(bucket, weight)` pairs; weights are normalized and
    /// repeated buckets merged.
    pub fn new(weights: impl IntoIterator<Item = (usize, f64)>) -> Result<Self> {
        let mut merged: Vec<(usize, f64)> = Vec::new();
        for (b, w) in weights {
            if !(w >= 0.0 && w.is_finite()) {
                return Err(Error::InvalidConfig(format!("weight {w} for bucket {b} is not a non-negative number")));
            }
            match merged.iter_mut().find(|(m, _)| *m == b) {
                Some((_, acc)) => *acc += w,
                None => merged.push((b, w)),
            }
        }
        merged.sort_by_key(|(b, _)| *b);
        let total: f64 = merged.iter().map(|(_, w)| w).sum();
        if !(total > 0.0) {
            return Err(Error::InvalidConfig("categorical distribution has no mass".into()));
        }
        let buckets = merged.iter().map(|(b, _)| *b).collect();
        let probs: Vec<f64> = merged.iter().map(|(_, w)| w / total).collect();
        let sampler = WeightedIndex::new(&probs).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        Ok(Self { buckets, probs, sampler })
    }

    pub fn prob(&self, bucket: usize) -> f64 {
        self.buckets.iter().position(|&b| b == bucket).map_or(0.0, |i| self.probs[i])
    }

    pub fn support(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.buckets.iter().copied().zip(self.probs.iter().copied())
    }

    pub fn sample<G: Rng + ?Sized>(&self, rng: &mut G) -> usize {
        self.buckets[self.sampler.sample(rng)]
    }
}

/// Legitimate traffic: independent per-attribute categorical distributions
/// and Poisson arrivals.
///
/// `tcp_flags` is the flag distribution of TCP packets and `server_port` the
/// port distribution of TCP/UDP packets; the NOT_APPLICABLE buckets follow
/// from `protocol`.
#[derive(Clone, Debug)]
pub struct LegitModel {
    pub config: BucketConfig,
    pub packet_size: Categorical,
    pub ttl: Categorical,
    pub protocol: Categorical,
    pub src_prefix: Categorical,
    pub tcp_flags: Categorical,
    pub server_port: Categorical,
    pub rate_pps: f64,
    pub seed: u64,
}

impl LegitModel {
    /// A plausible server-side mix: mostly web over TCP, some DNS/NTP over
    /// UDP, a little ICMP, sources from 256 networks with Zipf-like weights.
    pub fn typical(config: &BucketConfig, rate_pps: f64, seed: u64) -> Result<Self> {
        config.validate()?;
        let sizes = [(40u16, 0.30), (52, 0.05), (90, 0.07), (200, 0.08), (576, 0.12), (1200, 0.08), (1500, 0.30)];
        let ttls = [(46u8, 0.12), (52, 0.14), (57, 0.12), (61, 0.07), (108, 0.1), (116, 0.14), (122, 0.11), (241, 0.1), (249, 0.1)];
        let mut probe = PacketRecord::tcp(0.0, Ipv4Addr::UNSPECIFIED, 40, 64, 0x10, 80);
        let mut by = |kind: AttributeKind, set: &mut dyn FnMut(&mut PacketRecord)| {
            set(&mut probe);
            bucketize(&probe, kind, config)
        };
        let packet_size = Categorical::new(
            sizes.iter().map(|&(s, w)| (by(AttributeKind::PacketSize, &mut |p| p.packet_size = s), w)),
        )?;
        let ttl = Categorical::new(ttls.iter().map(|&(t, w)| (by(AttributeKind::Ttl, &mut |p| p.ttl = t), w)))?;
        let src_prefix = Categorical::new((0..256u32).map(|i| {
            let addr = Ipv4Addr::new(11 + ((i * 37) % 200) as u8, ((i * 91 + 7) % 256) as u8, (i % 251) as u8, 1);
            (by(AttributeKind::SrcPrefix, &mut |p| p.src_ip = addr), 1.0 / (i as f64 + 1.0))
        }))?;
        Self::new(
            config.clone(),
            packet_size,
            ttl,
            Categorical::new([(PROTO_TCP as usize, 0.85), (PROTO_UDP as usize, 0.12), (1, 0.03)])?,
            src_prefix,
            Categorical::new([(0x10, 0.55), (0x18, 0.25), (0x02, 0.08), (0x11, 0.07), (0x04, 0.05)])?,
            Categorical::new([(443, 0.45), (80, 0.33), (53, 0.08), (22, 0.04), (25, 0.03), (123, 0.02), (8080, 0.05)])?,
            rate_pps,
            seed,
        )
    }

    #[allow(clippy::too_many_arguments)]
    pub fn new(
        config: BucketConfig,
        packet_size: Categorical,
        ttl: Categorical,
        protocol: Categorical,
        src_prefix: Categorical,
        tcp_flags: Categorical,
        server_port: Categorical,
        rate_pps: f64,
        seed: u64,
    ) -> Result<Self> {
        config.validate()?;
        if !(rate_pps > 0.0 && rate_pps.is_finite()) {
            return Err(Error::InvalidConfig(format!("legitimate rate {rate_pps} must be positive")));
        }
        let model = Self { config, packet_size, ttl, protocol, src_prefix, tcp_flags, server_port, rate_pps, seed };
        for kind in AttributeKind::ALL {
            let limit = match kind {
                AttributeKind::TcpFlags => 256,
                AttributeKind::ServerPort => 65536,
                k => bucket_count(k, &model.config),
            };
            if let Some((b, _)) = model.dist(kind).support().find(|&(b, _)| b >= limit || !model.reachable(kind, b)) {
                return Err(Error::InvalidConfig(format!("bucket {b} of `{kind}` cannot be generated")));
            }
        }
        Ok(model)
    }

    pub fn dist(&self, kind: AttributeKind) -> &Categorical {
        match kind {
            AttributeKind::PacketSize => &self.packet_size,
            AttributeKind::Ttl => &self.ttl,
            AttributeKind::Protocol => &self.protocol,
            AttributeKind::SrcPrefix => &self.src_prefix,
            AttributeKind::TcpFlags => &self.tcp_flags,
            AttributeKind::ServerPort => &self.server_port,
        }
    }

    /// Marginal probability of `bucket` in generated traffic, including the
    /// NOT_APPLICABLE buckets implied by the protocol mix.
    pub fn expected_ratio(&self, kind: AttributeKind, bucket: usize) -> f64 {
        let tcp = self.protocol.prob(PROTO_TCP as usize);
        let ported = tcp + self.protocol.prob(PROTO_UDP as usize);
        match kind {
            AttributeKind::TcpFlags if bucket == 256 => 1.0 - tcp,
            AttributeKind::TcpFlags => tcp * self.tcp_flags.prob(bucket),
            AttributeKind::ServerPort if bucket == 65536 => 1.0 - ported,
            AttributeKind::ServerPort => ported * self.server_port.prob(bucket),
            k => self.dist(k).prob(bucket),
        }
    }

    fn size_range(&self, bucket: usize) -> (u16, u16) {
        let edges = &self.config.size_bucket_edges;
        let lo = if bucket == 0 { u32::from(MIN_PACKET_SIZE) } else { edges[bucket - 1].max(u32::from(MIN_PACKET_SIZE)) };
        let hi = edges.get(bucket).map_or(lo, |e| e.saturating_sub(1));
        (lo.min(65535) as u16, hi.min(65535) as u16)
    }

    fn reachable(&self, kind: AttributeKind, bucket: usize) -> bool {
        match kind {
            AttributeKind::PacketSize => {
                let (lo, hi) = self.size_range(bucket);
                lo <= hi && {
                    let p = PacketRecord::other(0.0, Ipv4Addr::UNSPECIFIED, 1, lo, 0);
                    bucketize(&p, kind, &self.config) == bucket
                }
            }
            _ => true,
        }
    }

    fn draw<G: Rng + ?Sized>(&self, rng: &mut G, timestamp: f64) -> PacketRecord {
        let (lo, hi) = self.size_range(self.packet_size.sample(rng));
        let packet_size = rng.random_range(lo..=hi);
        let w = self.config.ttl_bucket_width as usize;
        let t = self.ttl.sample(rng) * w;
        let ttl = rng.random_range(t..=(t + w - 1).min(255)) as u8;
        let len = self.config.src_prefix_len;
        let net = u32::from(prefix_network(self.src_prefix.sample(rng), len));
        let host_mask = if len == 0 { u32::MAX } else { u32::MAX >> len };
        let src_ip = Ipv4Addr::from(net | (rng.random::<u32>() & host_mask));
        let protocol = self.protocol.sample(rng) as u8;
        let mut p = PacketRecord::other(timestamp, src_ip, protocol, packet_size, ttl);
        self.fill_transport(rng, &mut p);
        p.labeled(GroundTruth::Legitimate)
    }

    /// Sets flags and port consistently with the packet's protocol.
    fn fill_transport<G: Rng + ?Sized>(&self, rng: &mut G, p: &mut PacketRecord) {
        p.tcp_flags = (p.protocol == PROTO_TCP).then(|| p.tcp_flags.unwrap_or_else(|| self.tcp_flags.sample(rng) as u8));
        p.dst_port = (p.protocol == PROTO_TCP || p.protocol == PROTO_UDP)
            .then(|| p.dst_port.unwrap_or_else(|| self.server_port.sample(rng) as u16));
    }
}

/// One attribute fixed to a raw header value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pin {
    pub kind: AttributeKind,
    /// Raw value: bytes, hops, protocol number, IPv4 address as u32, flag
    /// byte or port.
    pub value: u32,
}

impl Pin {
    pub fn new(kind: AttributeKind, value: u32) -> Result<Self> {
        let max = match kind {
            AttributeKind::PacketSize => 65535,
            AttributeKind::Ttl | AttributeKind::Protocol | AttributeKind::TcpFlags => 255,
            AttributeKind::SrcPrefix => u32::MAX,
            AttributeKind::ServerPort => 65535,
        };
        let min = if kind == AttributeKind::PacketSize { u32::from(MIN_PACKET_SIZE) } else { 0 };
        if !(min..=max).contains(&value) {
            return Err(Error::InvalidConfig(format!("pinned {kind} value {value} outside {min}..={max}")));
        }
        Ok(Self { kind, value })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackKind {
    /// Pinned attributes take their pinned values; the rest look legitimate.
    FixedAttribute { pins: Vec<Pin> },
    /// Listed attributes are uniform over their raw domain; the rest look
    /// legitimate.
    RandomSpoof { attributes: Vec<AttributeKind> },
    /// Each pinned attribute independently keeps its pinned value with
    /// probability `1 - lambda` and is drawn from the legitimate model
    /// otherwise. `lambda = 1` is indistinguishable from legitimate traffic.
    MimicBlend { pins: Vec<Pin>, lambda: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttackModel {
    pub kind: AttackKind,
    pub rate_pps: f64,
    pub start: f64,
    pub stop: f64,
    pub seed: u64,
}

impl AttackModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.rate_pps > 0.0 && self.rate_pps.is_finite()) {
            return Err(Error::InvalidConfig(format!("attack rate {} must be positive", self.rate_pps)));
        }
        if !(self.start >= 0.0 && self.start <= self.stop) {
            return Err(Error::InvalidConfig(format!("attack window [{}, {}) is invalid", self.start, self.stop)));
        }
        if let AttackKind::MimicBlend { lambda, .. } = self.kind {
            if !(0.0..=1.0).contains(&lambda) {
                return Err(Error::InvalidConfig(format!("mimicry lambda {lambda} outside [0, 1]")));
            }
        }
        Ok(())
    }

    fn draw<G: Rng + ?Sized>(&self, legit: &LegitModel, rng: &mut G, timestamp: f64) -> PacketRecord {
        let mut p = legit.draw(rng, timestamp);
        match &self.kind {
            AttackKind::FixedAttribute { pins } => pins.iter().for_each(|pin| apply_pin(&mut p, pin)),
            AttackKind::MimicBlend { pins, lambda } => {
                for pin in pins {
                    if rng.random::<f64>() >= *lambda {
                        apply_pin(&mut p, pin);
                    }
                }
            }
            AttackKind::RandomSpoof { attributes } => {
                for kind in attributes {
                    spoof(&mut p, *kind, rng);
                }
            }
        }
        // pins may have changed the protocol
        if p.protocol != PROTO_TCP {
            p.tcp_flags = None;
        }
        if p.protocol != PROTO_TCP && p.protocol != PROTO_UDP {
            p.dst_port = None;
        }
        legit.fill_transport(rng, &mut p);
        p.labeled(GroundTruth::Attack)
    }
}

/// Flag and port pins only apply to packets whose protocol carries them.
fn apply_pin(p: &mut PacketRecord, pin: &Pin) {
    let v = pin.value;
    match pin.kind {
        AttributeKind::PacketSize => p.packet_size = v as u16,
        AttributeKind::Ttl => p.ttl = v as u8,
        AttributeKind::Protocol => {
            p.protocol = v as u8;
            if p.protocol != PROTO_TCP {
                p.tcp_flags = None;
            }
        }
        AttributeKind::SrcPrefix => p.src_ip = Ipv4Addr::from(v),
        AttributeKind::TcpFlags if p.protocol == PROTO_TCP => p.tcp_flags = Some(v as u8),
        AttributeKind::ServerPort if p.protocol == PROTO_TCP || p.protocol == PROTO_UDP => {
            p.dst_port = Some(v as u16)
        }
        _ => {}
    }
}

fn spoof<G: Rng + ?Sized>(p: &mut PacketRecord, kind: AttributeKind, rng: &mut G) {
    match kind {
        AttributeKind::PacketSize => p.packet_size = rng.random_range(MIN_PACKET_SIZE..=1514),
        AttributeKind::Ttl => p.ttl = rng.random(),
        AttributeKind::Protocol => {
            p.protocol = rng.random();
            p.tcp_flags = None;
            p.dst_port = None;
        }
        AttributeKind::SrcPrefix => p.src_ip = Ipv4Addr::from(rng.random::<u32>()),
        AttributeKind::TcpFlags if p.protocol == PROTO_TCP => p.tcp_flags = Some(rng.random()),
        AttributeKind::ServerPort if p.protocol == PROTO_TCP || p.protocol == PROTO_UDP => {
            p.dst_port = Some(rng.random())
        }
        _ => {}
    }
}

fn poisson_times(rng: &mut ChaCha8Rng, rate: f64, start: f64, end: f64) -> impl Iterator<Item = f64> + '_ {
    let gaps = Exp::new(rate).expect("rate validated positive");
    let mut t = start;
    std::iter::from_fn(move || {
        t += gaps.sample(rng);
        (t < end).then_some(t)
    })
}

/// Generates `duration` seconds of labeled traffic starting at t = 0.
///
/// Each source draws from its own seeded stream; the merged output is
/// sorted by timestamp with ties kept in source order (legitimate first,
/// then attacks as listed).
pub fn generate(legit: &LegitModel, attacks: &[AttackModel], duration: f64) -> Result<Vec<PacketRecord>> {
    if !(duration > 0.0 && duration.is_finite()) {
        return Err(Error::InvalidConfig(format!("duration {duration} must be positive")));
    }
    attacks.iter().try_for_each(AttackModel::validate)?;

    let mut rng = ChaCha8Rng::seed_from_u64(legit.seed);
    let times: Vec<f64> = poisson_times(&mut rng, legit.rate_pps, 0.0, duration).collect();
    let mut packets: Vec<PacketRecord> = times.into_iter().map(|t| legit.draw(&mut rng, t)).collect();

    for attack in attacks {
        let mut rng = ChaCha8Rng::seed_from_u64(attack.seed);
        let end = attack.stop.min(duration);
        if attack.start >= end {
            continue;
        }
        let times: Vec<f64> = poisson_times(&mut rng, attack.rate_pps, attack.start, end).collect();
        packets.extend(times.into_iter().map(|t| attack.draw(legit, &mut rng, t)));
    }
    packets.sort_by(|a, b| a.timestamp.total_cmp(&b.timestamp));
    Ok(packets)
}
