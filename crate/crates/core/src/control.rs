//! Overload control: the binned score CDF, the discard threshold derived
//! from it, and the proportional load shedder that chooses the discard
//! fraction.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::scoring::Score;

pub const DEFAULT_CDF_BINS: usize = 1024;

/// Fixed-bin histogram of the scores seen in one period.
///
/// Interior bin `k` (1-based) holds scores in `[edges[k-1], edges[k])`; bin 0
/// catches everything below `edges[0]` and bin `B+1` everything at or above
/// `edges[B]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoreCdf<R> {
    pub period_id: u64,
    edges: Vec<R>,
    counts: Vec<u64>,
    total: u64,
}

impl<R: Real> ScoreCdf<R> {
    pub fn new(period_id: u64, min: R, max: R, bins: usize) -> Result<Self> {
        if bins == 0 || !(min < max) || !min.is_finite() || !max.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "score CDF needs at least one bin over a finite range, got {bins} bins over [{min}, {max}]"
            )));
        }
        let width = (max - min) / R::count(bins as u64);
        let mut edges: Vec<R> = (0..=bins).map(|k| min + width * R::count(k as u64)).collect();
        edges[bins] = max;
        Ok(Self { period_id, edges, counts: vec![0; bins + 2], total: 0 })
    }

    /// Symmetric range `±(dimensions + 1)·|ln ε|`, which covers every score a
    /// book over `dimensions` tables can produce when the prior stays within
    /// one table's span.
    pub fn for_scorebook(period_id: u64, dimensions: usize, epsilon: R, bins: usize) -> Result<Self> {
        let half = R::count(dimensions as u64 + 1) * epsilon.ln().abs();
        Self::new(period_id, -half, half, bins)
    }

    /// Empty copy with the same bins.
    pub fn fresh(&self, period_id: u64) -> Self {
        Self { period_id, edges: self.edges.clone(), counts: vec![0; self.counts.len()], total: 0 }
    }

    pub fn bins(&self) -> usize {
        self.edges.len() - 1
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn edges(&self) -> &[R] {
        &self.edges
    }

    /// Bin holding `s`. NaN lands in the above-range bin.
    pub fn bin_index(&self, s: R) -> usize {
        let b = self.bins();
        if s < self.edges[0] {
            return 0;
        }
        if !(s < self.edges[b]) {
            return b + 1;
        }
        let width = (self.edges[b] - self.edges[0]) / R::count(b as u64);
        let guess = ((s - self.edges[0]) / width).floor().to_usize().unwrap_or(0);
        let mut k = (guess + 1).clamp(1, b);
        // the division can be off by one next to an edge
        while k > 1 && s < self.edges[k - 1] {
            k -= 1;
        }
        while k < b && !(s < self.edges[k]) {
            k += 1;
        }
        k
    }

    pub fn insert(&mut self, score: Score<R>) {
        let k = self.bin_index(score.0);
        self.counts[k] += 1;
        self.total += 1;
    }

    /// Exclusive upper edge of bin `k`.
    pub fn upper_edge(&self, k: usize) -> R {
        if k <= self.bins() {
            self.edges[k]
        } else {
            R::max_value()
        }
    }

    /// Fraction of scores in bins `0..=k`.
    pub fn cumulative_fraction(&self, k: usize) -> R {
        if self.total == 0 {
            return R::zero();
        }
        let below: u64 = self.counts[..=k.min(self.counts.len() - 1)].iter().sum();
        R::count(below) / R::count(self.total)
    }

    /// Largest share of the scores held by one bin.
    pub fn max_bin_mass(&self) -> R {
        if self.total == 0 {
            return R::zero();
        }
        R::count(self.counts.iter().copied().max().unwrap_or(0)) / R::count(self.total)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Threshold<R> {
    /// Discard nothing.
    None,
    /// Discard everything.
    All,
    /// Discard scores strictly below the cutoff.
    Cutoff(R),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdState<R> {
    pub thd: Threshold<R>,
    /// Requested discard fraction.
    pub phi: R,
    /// Period whose CDF produced the cutoff.
    pub source_period: Option<u64>,
}

impl<R: Real> ThresholdState<R> {
    pub fn pass_all() -> Self {
        Self { thd: Threshold::None, phi: R::zero(), source_period: None }
    }
}

/// Smallest bin upper edge whose cumulative fraction reaches `phi`.
///
/// An empty CDF yields `Threshold::None` for any `phi < 1`, so a cold start
/// never drops traffic.
pub fn compute_threshold<R: Real>(cdf: &ScoreCdf<R>, phi: R) -> Result<ThresholdState<R>> {
    if !(phi >= R::zero() && phi <= R::one()) {
        return Err(Error::InvalidFraction(phi.as_f64()));
    }
    let thd = if phi == R::zero() {
        Threshold::None
    } else if phi == R::one() {
        Threshold::All
    } else if cdf.total == 0 {
        Threshold::None
    } else {
        let target = phi * R::count(cdf.total);
        let mut below = 0u64;
        let mut hit = cdf.counts.len() - 1;
        for (k, &c) in cdf.counts.iter().enumerate() {
            below += c;
            if R::count(below) >= target {
                hit = k;
                break;
            }
        }
        Threshold::Cutoff(cdf.upper_edge(hit))
    };
    Ok(ThresholdState { thd, phi, source_period: Some(cdf.period_id) })
}

#[inline]
pub fn should_discard<R: Real>(state: &ThresholdState<R>, score: Score<R>) -> bool {
    match state.thd {
        Threshold::None => false,
        Threshold::All => true,
        Threshold::Cutoff(t) => score.0 < t,
    }
}

/// Inputs to the load shedder, all per second except the utilizations.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoadShedInput<R> {
    /// Aggregate arrival rate of suspicious traffic (ψ).
    pub arrival_rate: R,
    /// Packets per second the victim can absorb.
    pub target_capacity: R,
    /// Current victim load over capacity. Reported, not used by the
    /// proportional rule.
    pub current_utilization: R,
    /// Utilization ceiling in (0, 1].
    pub max_utilization: R,
}

/// Proportional one-shot shedder:
/// `Φ = clamp(1 − capacity·max_utilization / arrival_rate, 0, 1)`.
pub fn load_shed<R: Real>(input: &LoadShedInput<R>) -> R {
    if !(input.arrival_rate > R::zero()) {
        return R::zero();
    }
    let acceptable = input.target_capacity * input.max_utilization;
    (R::one() - acceptable / input.arrival_rate).max(R::zero()).min(R::one())
}
