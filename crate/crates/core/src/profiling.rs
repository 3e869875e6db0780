//! Per-period attribute histograms (measured profile) and the nominal
//! profile built from the per-bucket maximum over training periods.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::packet_model::{bucketize_dim, AttributeKind, BucketConfig, Dimension, PacketRecord};
use crate::scalar::Real;

/// Counts of one dimension's bucketed values over a period.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AttributeHistogram {
    pub dim: Dimension,
    pub counts: Vec<u64>,
    pub total: u64,
}

impl AttributeHistogram {
    pub fn new(dim: Dimension, cfg: &BucketConfig) -> Self {
        Self { dim, counts: vec![0; cfg.dimension_len(dim)], total: 0 }
    }

    #[inline]
    pub fn update(&mut self, packet: &PacketRecord, cfg: &BucketConfig) {
        self.counts[bucketize_dim(packet, self.dim, cfg)] += 1;
        self.total += 1;
    }

    /// `counts[bucket] / total`, or zero for an empty histogram.
    pub fn ratio<R: Real>(&self, bucket: usize) -> R {
        if self.total == 0 {
            R::zero()
        } else {
            R::count(self.counts[bucket]) / R::count(self.total)
        }
    }
}

/// Anything that yields a per-bucket attribute ratio.
pub trait RatioSource<R: Real> {
    fn config(&self) -> &BucketConfig;
    fn ratio(&self, dim: Dimension, bucket: usize) -> R;
}

/// Attribute distribution of all traffic observed during one period (P_m).
#[derive(Clone, Debug, PartialEq)]
pub struct MeasuredProfile {
    pub period_id: u64,
    config: BucketConfig,
    singles: Vec<AttributeHistogram>,
    joint: Option<AttributeHistogram>,
    pub packet_count: u64,
    /// Wall length of the period; set by whoever closes the period.
    pub duration_seconds: f64,
}

impl MeasuredProfile {
    pub fn new(period_id: u64, config: &BucketConfig) -> Result<Self> {
        config.validate()?;
        let singles = AttributeKind::ALL
            .into_iter()
            .map(|k| AttributeHistogram::new(Dimension::Single(k), config))
            .collect();
        let joint = config
            .joint_pair
            .map(|(a, b)| AttributeHistogram::new(Dimension::Joint(a, b), config));
        Ok(Self {
            period_id,
            config: config.clone(),
            singles,
            joint,
            packet_count: 0,
            duration_seconds: 0.0,
        })
    }

    pub fn config(&self) -> &BucketConfig {
        &self.config
    }

    /// Increments one bucket in every histogram.
    pub fn observe(&mut self, packet: &PacketRecord) {
        for h in &mut self.singles {
            h.update(packet, &self.config);
        }
        if let Some(h) = &mut self.joint {
            h.update(packet, &self.config);
        }
        self.packet_count += 1;
    }

    pub fn histogram(&self, dim: Dimension) -> &AttributeHistogram {
        match dim {
            Dimension::Single(k) => &self.singles[k.index()],
            Dimension::Joint(..) => self
                .joint
                .as_ref()
                .filter(|h| h.dim == dim)
                .unwrap_or_else(|| panic!("no histogram for {}", dim.name())),
        }
    }

    pub fn histograms(&self) -> impl Iterator<Item = &AttributeHistogram> {
        self.singles.iter().chain(self.joint.iter())
    }
}

impl<R: Real> RatioSource<R> for MeasuredProfile {
    fn config(&self) -> &BucketConfig {
        &self.config
    }

    fn ratio(&self, dim: Dimension, bucket: usize) -> R {
        self.histogram(dim).ratio(bucket)
    }
}

/// Safety-margin legitimate profile (P'_n).
///
/// Each ratio is the largest value that bucket reached over the training
/// periods, so per-attribute sums may exceed one.
#[derive(Clone, Debug, PartialEq)]
pub struct NominalProfile<R> {
    config: BucketConfig,
    /// Indexed by `AttributeKind::index`, then the joint table if configured.
    ratios: Vec<Vec<R>>,
    /// Expected legitimate packets per training period.
    pub nominal_rate: R,
    /// Mean training period length, used to rescale `nominal_rate`.
    pub mean_period_seconds: R,
    pub source_period_count: u64,
}

impl<R: Real> NominalProfile<R> {
    pub fn config(&self) -> &BucketConfig {
        &self.config
    }

    pub fn ratios(&self, dim: Dimension) -> &[R] {
        match dim {
            Dimension::Single(k) => &self.ratios[k.index()],
            Dimension::Joint(..) => {
                assert_eq!(self.config.joint_pair.map(|(a, b)| Dimension::Joint(a, b)), Some(dim));
                &self.ratios[AttributeKind::ALL.len()]
            }
        }
    }

    /// Expected legitimate packet count for a period of the given length.
    pub fn expected_legitimate(&self, period_seconds: f64) -> R {
        let secs = R::lit(period_seconds);
        if self.mean_period_seconds > R::zero() && secs > R::zero() {
            self.nominal_rate * secs / self.mean_period_seconds
        } else {
            self.nominal_rate
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_doc())?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_doc(serde_json::from_str(text)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    fn to_doc(&self) -> NominalProfileDoc<R> {
        let r = |k: AttributeKind| self.ratios[k.index()].clone();
        NominalProfileDoc {
            config: self.config.clone(),
            nominal_rate: self.nominal_rate,
            mean_period_seconds: self.mean_period_seconds,
            source_period_count: self.source_period_count,
            ratios: RatioTables {
                packet_size: r(AttributeKind::PacketSize),
                ttl: r(AttributeKind::Ttl),
                protocol: r(AttributeKind::Protocol),
                src_prefix: r(AttributeKind::SrcPrefix),
                tcp_flags: r(AttributeKind::TcpFlags),
                server_port: r(AttributeKind::ServerPort),
                joint: self.ratios.get(AttributeKind::ALL.len()).cloned(),
            },
        }
    }

    fn from_doc(doc: NominalProfileDoc<R>) -> Result<Self> {
        let bad = |m: String| Error::InvalidProfile(m);
        doc.config.validate()?;
        let t = doc.ratios;
        let mut ratios = vec![t.packet_size, t.ttl, t.protocol, t.src_prefix, t.tcp_flags, t.server_port];
        match (doc.config.joint_pair, t.joint) {
            (Some(_), Some(j)) => ratios.push(j),
            (None, None) => {}
            (Some(_), None) => return Err(bad("joint pair configured but joint ratios missing".into())),
            (None, Some(_)) => return Err(bad("joint ratios present without a joint pair".into())),
        }
        let dims = AttributeKind::ALL
            .into_iter()
            .map(Dimension::Single)
            .chain(doc.config.joint_pair.map(|(a, b)| Dimension::Joint(a, b)));
        for (dim, table) in dims.zip(&ratios) {
            let want = doc.config.dimension_len(dim);
            if table.len() != want {
                return Err(bad(format!("`{}` has {} ratios, expected {want}", dim.name(), table.len())));
            }
            if let Some(v) = table.iter().find(|v| !(**v >= R::zero() && **v <= R::one())) {
                return Err(bad(format!("`{}` holds ratio {v} outside [0, 1]", dim.name())));
            }
        }
        for (name, v) in [("nominal_rate", doc.nominal_rate), ("mean_period_seconds", doc.mean_period_seconds)] {
            if !(v.is_finite() && v >= R::zero()) {
                return Err(bad(format!("{name} = {v} is not a non-negative number")));
            }
        }
        Ok(Self {
            config: doc.config,
            ratios,
            nominal_rate: doc.nominal_rate,
            mean_period_seconds: doc.mean_period_seconds,
            source_period_count: doc.source_period_count,
        })
    }
}

impl<R: Real> RatioSource<R> for NominalProfile<R> {
    fn config(&self) -> &BucketConfig {
        &self.config
    }

    fn ratio(&self, dim: Dimension, bucket: usize) -> R {
        self.ratios(dim)[bucket]
    }
}

#[derive(Serialize, Deserialize)]
#[serde(bound = "R: Real")]
struct NominalProfileDoc<R> {
    config: BucketConfig,
    nominal_rate: R,
    mean_period_seconds: R,
    source_period_count: u64,
    ratios: RatioTables<R>,
}

#[derive(Serialize, Deserialize)]
#[serde(bound = "R: Real")]
struct RatioTables<R> {
    packet_size: Vec<R>,
    ttl: Vec<R>,
    protocol: Vec<R>,
    src_prefix: Vec<R>,
    tcp_flags: Vec<R>,
    server_port: Vec<R>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    joint: Option<Vec<R>>,
}

/// Builds the nominal profile: per bucket, the highest ratio seen in any
/// period. No renormalization is applied.
pub fn build_nominal<R: Real>(profiles: &[MeasuredProfile]) -> Result<NominalProfile<R>> {
    let first = profiles.first().ok_or(Error::EmptyTrainingSet)?;
    let config = first.config.clone();
    if let Some(p) = profiles.iter().find(|p| p.config != config) {
        return Err(Error::ProfileConfigMismatch(format!(
            "period {} was profiled with a different bucket configuration",
            p.period_id
        )));
    }

    let ratios = first
        .histograms()
        .map(|h| {
            (0..h.counts.len())
                .map(|bucket| {
                    profiles
                        .iter()
                        .map(|p| p.histogram(h.dim).ratio::<R>(bucket))
                        .fold(R::zero(), R::max)
                })
                .collect()
        })
        .collect();

    let n = R::count(profiles.len() as u64);
    let packets: u64 = profiles.iter().map(|p| p.packet_count).sum();
    // Sorted so the floating-point sum is independent of period order.
    let mut durations: Vec<f64> = profiles.iter().map(|p| p.duration_seconds).collect();
    durations.sort_by(f64::total_cmp);
    let seconds: f64 = durations.iter().sum();

    Ok(NominalProfile {
        config,
        ratios,
        nominal_rate: R::count(packets) / n,
        mean_period_seconds: R::lit(seconds) / n,
        source_period_count: profiles.len() as u64,
    })
}
