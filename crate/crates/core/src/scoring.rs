//! Log-domain scorebooks. A packet's score is the log prior plus one table
//! lookup per scoring dimension, which equals the log of its conditional
//! legitimate probability (CLP).

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::packet_model::{bucketize_dim, BucketConfig, Dimension, PacketRecord};
use crate::profiling::{MeasuredProfile, NominalProfile, RatioSource};
use crate::scalar::Real;

pub const DEFAULT_EPSILON: f64 = 1e-6;

/// Log-domain CLP. Higher is more legitimate.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Score<R>(pub R);

impl<R: Real> Score<R> {
    pub fn value(self) -> R {
        self.0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scorebook<R> {
    /// Measured period the book was generated from; `None` for the identity book.
    pub period_id: Option<u64>,
    config: BucketConfig,
    dims: Vec<Dimension>,
    entries: Vec<Vec<R>>,
    pub log_prior: R,
    pub epsilon: R,
}

impl<R: Real> Scorebook<R> {
    /// All-zero book: every packet scores 0 (CLP = 1).
    pub fn identity(config: &BucketConfig) -> Result<Self> {
        config.validate()?;
        let dims = config.dimensions();
        let entries = dims.iter().map(|&d| vec![R::zero(); config.dimension_len(d)]).collect();
        Ok(Self {
            period_id: None,
            config: config.clone(),
            dims,
            entries,
            log_prior: R::zero(),
            epsilon: R::lit(DEFAULT_EPSILON),
        })
    }

    pub fn config(&self) -> &BucketConfig {
        &self.config
    }

    pub fn dimensions(&self) -> &[Dimension] {
        &self.dims
    }

    pub fn entries(&self, dim: Dimension) -> Option<&[R]> {
        self.dims.iter().position(|d| *d == dim).map(|i| self.entries[i].as_slice())
    }

    /// Sums the matching entries in canonical dimension order.
    #[inline]
    pub fn score(&self, packet: &PacketRecord) -> Score<R> {
        let mut total = self.log_prior;
        for (dim, table) in self.dims.iter().zip(&self.entries) {
            total = total + table[bucketize_dim(packet, *dim, &self.config)];
        }
        Score(total)
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = ScorebookDoc {
            period_id: self.period_id,
            epsilon: self.epsilon,
            log_prior: self.log_prior,
            config: self.config.clone(),
            entries: self.dims.iter().map(Dimension::name).zip(self.entries.iter().cloned()).collect(),
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let mut doc: ScorebookDoc<R> = serde_json::from_str(text)?;
        doc.config.validate()?;
        let dims = doc.config.dimensions();
        let mut entries = Vec::with_capacity(dims.len());
        for dim in &dims {
            let table = doc
                .entries
                .remove(&dim.name())
                .ok_or_else(|| Error::InvalidProfile(format!("scorebook lacks `{}` entries", dim.name())))?;
            if table.len() != doc.config.dimension_len(*dim) || table.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidProfile(format!("malformed `{}` entries", dim.name())));
            }
            entries.push(table);
        }
        if let Some(extra) = doc.entries.keys().next() {
            return Err(Error::InvalidProfile(format!("unexpected scorebook table `{extra}`")));
        }
        Ok(Self {
            period_id: doc.period_id,
            config: doc.config,
            dims,
            entries,
            log_prior: doc.log_prior,
            epsilon: doc.epsilon,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
#[serde(bound = "R: Real")]
struct ScorebookDoc<R> {
    period_id: Option<u64>,
    epsilon: R,
    log_prior: R,
    config: BucketConfig,
    entries: BTreeMap<String, Vec<R>>,
}

fn check_inputs<R: Real>(nominal: &NominalProfile<R>, measured: &MeasuredProfile, epsilon: R) -> Result<()> {
    if nominal.config() != measured.config() {
        return Err(Error::ProfileConfigMismatch(format!(
            "nominal profile and measured period {} use different bucket configurations",
            measured.period_id
        )));
    }
    if !(epsilon > R::zero() && epsilon.is_finite()) {
        return Err(Error::InvalidConfig(format!("probability floor {epsilon} must be positive")));
    }
    Ok(())
}

/// Generates the scorebook for the period after `measured`, estimating the
/// legitimate packet count from the nominal rate scaled to the period length.
pub fn build_scorebook<R: Real>(
    nominal: &NominalProfile<R>,
    measured: &MeasuredProfile,
    epsilon: R,
) -> Result<Scorebook<R>> {
    let legit = nominal.expected_legitimate(measured.duration_seconds);
    build_scorebook_with_prior(nominal, measured, epsilon, legit)
}

/// Same as [`build_scorebook`] with an explicit legitimate-count estimate.
pub fn build_scorebook_with_prior<R: Real>(
    nominal: &NominalProfile<R>,
    measured: &MeasuredProfile,
    epsilon: R,
    expected_legitimate: R,
) -> Result<Scorebook<R>> {
    check_inputs(nominal, measured, epsilon)?;
    let config = measured.config().clone();
    let dims = config.dimensions();
    let entries = dims
        .iter()
        .map(|&dim| {
            let legit = nominal.ratios(dim);
            let hist = measured.histogram(dim);
            (0..legit.len())
                .map(|b| (legit[b].max(epsilon) / hist.ratio::<R>(b).max(epsilon)).ln())
                .collect()
        })
        .collect();
    Ok(Scorebook {
        period_id: Some(measured.period_id),
        config,
        dims,
        entries,
        log_prior: log_prior(expected_legitimate, R::count(measured.packet_count)),
        epsilon,
    })
}

/// `ln(max(N_n, 1) / max(N_m, 1))`
pub fn log_prior<R: Real>(legitimate: R, measured: R) -> R {
    (legitimate.max(R::one()) / measured.max(R::one())).ln()
}

pub fn score_packet<R: Real>(book: &Scorebook<R>, packet: &PacketRecord) -> Score<R> {
    book.score(packet)
}

/// Product-form CLP, computed without scorebooks. Used as the oracle for
/// [`Scorebook::score`].
pub fn clp_direct<R: Real>(
    packet: &PacketRecord,
    nominal: &NominalProfile<R>,
    measured: &MeasuredProfile,
    epsilon: R,
) -> Result<R> {
    let legit = nominal.expected_legitimate(measured.duration_seconds);
    clp_direct_with_prior(packet, nominal, measured, epsilon, legit)
}

pub fn clp_direct_with_prior<R: Real>(
    packet: &PacketRecord,
    nominal: &NominalProfile<R>,
    measured: &MeasuredProfile,
    epsilon: R,
    expected_legitimate: R,
) -> Result<R> {
    check_inputs(nominal, measured, epsilon)?;
    let cfg = measured.config();
    let mut numerator = expected_legitimate.max(R::one());
    let mut denominator = R::count(measured.packet_count).max(R::one());
    for dim in cfg.dimensions() {
        let b = bucketize_dim(packet, dim, cfg);
        numerator = numerator * nominal.ratio(dim, b).max(epsilon);
        denominator = denominator * RatioSource::<R>::ratio(measured, dim, b).max(epsilon);
    }
    Ok(numerator / denominator)
}
