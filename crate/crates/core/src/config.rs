//! Flat `key = value` run configuration.
//!
//! Blank lines and lines starting with `#` are ignored. Unknown keys are
//! rejected so typos do not silently fall back to defaults. See
//! `configs/example.conf` for every key.

use std::collections::BTreeMap;
use std::net::Ipv4Addr;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::packet_model::{AttributeKind, BucketConfig};
use crate::pipeline::{PeriodMode, ShedSettings, DEFAULT_PERIOD_PACKETS};
use crate::scoring::DEFAULT_EPSILON;
use crate::control::DEFAULT_CDF_BINS;
use crate::traffic::{AttackKind, AttackModel, Pin};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Precision {
    F32,
    #[default]
    F64,
}

/// Legitimate traffic and attack schedule for `simulate` and `generate`.
#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioConfig {
    pub legit_rate_pps: f64,
    pub legit_seed: u64,
    pub duration: f64,
    pub max_packets: Option<usize>,
    pub attacks: Vec<AttackModel>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub bucket: BucketConfig,
    /// Whether any `bucket.*` key was given explicitly.
    pub bucket_explicit: bool,
    pub period: PeriodMode,
    pub epsilon: f64,
    pub precision: Precision,
    pub cdf_bins: usize,
    pub cdf_range: Option<(f64, f64)>,
    pub shed: ShedSettings,
    pub seed: u64,
    pub scenario: ScenarioConfig,
    /// Raw key/value pairs, echoed into reports.
    pub entries: BTreeMap<String, String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig::parse("").expect("empty configuration is valid")
    }
}

const TOP_KEYS: &[&str] = &[
    "bucket.size_edges",
    "bucket.ttl_width",
    "bucket.src_prefix_len",
    "bucket.joint",
    "period.mode",
    "period.length",
    "score.epsilon",
    "score.precision",
    "cdf.bins",
    "cdf.min",
    "cdf.max",
    "shed.capacity_pps",
    "shed.max_utilization",
    "seed",
    "traffic.duration",
    "traffic.max_packets",
    "legit.rate_pps",
    "legit.seed",
];

const ATTACK_KEYS: &[&str] = &["type", "rate_pps", "start", "stop", "seed", "lambda", "spoof"];

struct Entries<'a>(&'a BTreeMap<String, String>);

impl Entries<'_> {
    fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        self.0
            .get(key)
            .map(|v| v.parse::<T>().map_err(|_| Error::InvalidConfig(format!("`{key}`: cannot parse `{v}`"))))
            .transpose()
    }

    fn or<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        Ok(self.get(key)?.unwrap_or(default))
    }

    fn list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>> {
        self.0
            .get(key)
            .map(|v| {
                v.split(',')
                    .map(|s| {
                        s.trim()
                            .parse::<T>()
                            .map_err(|_| Error::InvalidConfig(format!("`{key}`: cannot parse `{}`", s.trim())))
                    })
                    .collect()
            })
            .transpose()
    }
}

fn parse_pin_value(kind: AttributeKind, raw: &str) -> Result<u32> {
    let bad = || Error::InvalidConfig(format!("pinned {kind}: cannot parse `{raw}`"));
    match kind {
        AttributeKind::SrcPrefix => raw.parse::<Ipv4Addr>().map(u32::from).map_err(|_| bad()),
        AttributeKind::TcpFlags => {
            let hex = raw.strip_prefix("0x").ok_or_else(bad)?;
            u32::from_str_radix(hex, 16).map_err(|_| bad())
        }
        _ => raw.parse().map_err(|_| bad()),
    }
}

impl RunConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidConfig(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::InvalidConfig(format!("line {}: expected `key = value`", n + 1)))?;
            let (k, v) = (k.trim().to_owned(), v.trim().to_owned());
            if entries.insert(k.clone(), v).is_some() {
                return Err(Error::InvalidConfig(format!("line {}: duplicate key `{k}`", n + 1)));
            }
        }
        Self::from_entries(entries)
    }

    /// Replaces the top-level seed; per-source seeds not given explicitly
    /// are re-derived from it.
    pub fn with_seed(mut self, seed: u64) -> Result<Self> {
        self.entries.insert("seed".into(), seed.to_string());
        Self::from_entries(self.entries)
    }

    fn from_entries(entries: BTreeMap<String, String>) -> Result<Self> {
        let mut attack_names: Vec<String> = Vec::new();
        for key in entries.keys() {
            if TOP_KEYS.contains(&key.as_str()) {
                continue;
            }
            let ok = key.strip_prefix("attack.").and_then(|rest| rest.split_once('.')).is_some_and(|(name, field)| {
                let known = ATTACK_KEYS.contains(&field)
                    || field.strip_prefix("pin.").is_some_and(|k| k.parse::<AttributeKind>().is_ok());
                if known && !attack_names.iter().any(|n| n == name) {
                    attack_names.push(name.to_owned());
                }
                known
            });
            if !ok {
                return Err(Error::InvalidConfig(format!("unknown key `{key}`")));
            }
        }

        let e = Entries(&entries);
        let defaults = BucketConfig::default();
        let joint = match e.list::<AttributeKind>("bucket.joint")? {
            None => None,
            Some(v) if v.len() == 2 => Some((v[0], v[1])),
            Some(_) => return Err(Error::InvalidConfig("`bucket.joint` needs exactly two attributes".into())),
        };
        let bucket = BucketConfig {
            size_bucket_edges: e.list("bucket.size_edges")?.unwrap_or(defaults.size_bucket_edges),
            ttl_bucket_width: e.or("bucket.ttl_width", defaults.ttl_bucket_width)?,
            src_prefix_len: e.or("bucket.src_prefix_len", defaults.src_prefix_len)?,
            joint_pair: joint,
        };
        bucket.validate()?;

        let period = match e.or("period.mode", "count".to_owned())?.as_str() {
            "count" => PeriodMode::CountBased { packets: e.or("period.length", DEFAULT_PERIOD_PACKETS)? },
            "time" => PeriodMode::TimeBased {
                seconds: e.get("period.length")?.ok_or_else(|| {
                    Error::InvalidConfig("time-based periods need `period.length` in seconds".into())
                })?,
            },
            other => return Err(Error::InvalidConfig(format!("`period.mode` must be count or time, got `{other}`"))),
        };
        period.validate()?;

        let precision = match e.or("score.precision", "f64".to_owned())?.as_str() {
            "f64" => Precision::F64,
            "f32" => Precision::F32,
            other => return Err(Error::InvalidConfig(format!("`score.precision` must be f32 or f64, got `{other}`"))),
        };
        let epsilon: f64 = e.or("score.epsilon", DEFAULT_EPSILON)?;
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(Error::InvalidConfig(format!("`score.epsilon` {epsilon} outside (0, 1)")));
        }
        let cdf_range = match (e.get::<f64>("cdf.min")?, e.get::<f64>("cdf.max")?) {
            (Some(lo), Some(hi)) => Some((lo, hi)),
            (None, None) => None,
            _ => return Err(Error::InvalidConfig("`cdf.min` and `cdf.max` must be given together".into())),
        };

        let shed = ShedSettings {
            target_capacity: e.or("shed.capacity_pps", 1000.0)?,
            max_utilization: e.or("shed.max_utilization", 1.0)?,
        };
        shed.validate()?;

        let seed: u64 = e.or("seed", 1)?;
        let duration: f64 = e.or("traffic.duration", 60.0)?;
        if !(duration > 0.0) {
            return Err(Error::InvalidConfig(format!("`traffic.duration` {duration} must be positive")));
        }

        attack_names.sort();
        let mut attacks = Vec::with_capacity(attack_names.len());
        for (i, name) in attack_names.iter().enumerate() {
            let key = |f: &str| format!("attack.{name}.{f}");
            let pins = AttributeKind::ALL
                .into_iter()
                .filter_map(|k| entries.get(&key(&format!("pin.{}", k.name()))).map(|raw| (k, raw)))
                .map(|(k, raw)| Pin::new(k, parse_pin_value(k, raw)?))
                .collect::<Result<Vec<_>>>()?;
            let kind = match e.get::<String>(&key("type"))?.as_deref() {
                Some("fixed") => AttackKind::FixedAttribute { pins },
                Some("mimic") => AttackKind::MimicBlend {
                    pins,
                    lambda: e.get(&key("lambda"))?.ok_or_else(|| {
                        Error::InvalidConfig(format!("`{}` is required for mimic attacks", key("lambda")))
                    })?,
                },
                Some("spoof") => AttackKind::RandomSpoof {
                    attributes: e.list(&key("spoof"))?.unwrap_or_else(|| AttributeKind::ALL.to_vec()),
                },
                Some(other) => {
                    return Err(Error::InvalidConfig(format!("`{}`: unknown attack type `{other}`", key("type"))))
                }
                None => return Err(Error::InvalidConfig(format!("`{}` is required", key("type")))),
            };
            let attack = AttackModel {
                kind,
                rate_pps: e.get(&key("rate_pps"))?
                    .ok_or_else(|| Error::InvalidConfig(format!("`{}` is required", key("rate_pps"))))?,
                start: e.or(&key("start"), 0.0)?,
                stop: e.or(&key("stop"), duration)?,
                seed: e.or(&key("seed"), seed.wrapping_add(1 + i as u64))?,
            };
            attack.validate()?;
            attacks.push(attack);
        }

        let scenario = ScenarioConfig {
            legit_rate_pps: e.or("legit.rate_pps", 500.0)?,
            legit_seed: e.or("legit.seed", seed)?,
            duration,
            max_packets: e.get("traffic.max_packets")?,
            attacks,
        };

        Ok(Self {
            bucket_explicit: entries.keys().any(|k| k.starts_with("bucket.")),
            bucket,
            period,
            epsilon,
            precision,
            cdf_bins: e.or("cdf.bins", DEFAULT_CDF_BINS)?,
            cdf_range,
            shed,
            seed,
            scenario,
            entries,
        })
    }
}
