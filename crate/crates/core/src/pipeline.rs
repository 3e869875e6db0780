//! The three pipelined stages (profiling, scoring, discarding) over fixed
//! periods. Scoring and discarding in period `i` only read snapshots frozen
//! at the end of period `i - 1`.

use serde::{Deserialize, Serialize};

use crate::control::{
    compute_threshold, load_shed, should_discard, LoadShedInput, ScoreCdf, Threshold, ThresholdState, DEFAULT_CDF_BINS,
};
use crate::error::{Error, Result};
use crate::packet_model::PacketRecord;
use crate::profiling::{MeasuredProfile, NominalProfile};
use crate::scalar::Real;
use crate::scoring::{build_scorebook, Scorebook, DEFAULT_EPSILON};

pub const DEFAULT_PERIOD_PACKETS: u64 = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PeriodMode {
    TimeBased { seconds: f64 },
    CountBased { packets: u64 },
}

impl Default for PeriodMode {
    fn default() -> Self {
        PeriodMode::CountBased { packets: DEFAULT_PERIOD_PACKETS }
    }
}

impl PeriodMode {
    pub fn validate(&self) -> Result<()> {
        match *self {
            PeriodMode::TimeBased { seconds } if !(seconds > 0.0 && seconds.is_finite()) => {
                Err(Error::InvalidConfig(format!("period length {seconds}s must be positive")))
            }
            PeriodMode::CountBased { packets: 0 } => Err(Error::InvalidConfig("period packet count must be positive".into())),
            _ => Ok(()),
        }
    }
}

/// Tracks period boundaries for a timestamp-ordered packet stream.
#[derive(Clone, Debug)]
pub struct PeriodClock {
    mode: PeriodMode,
    index: u64,
    in_period: u64,
    origin: Option<f64>,
    /// Last timestamp of the previous period, or the first timestamp seen.
    anchor: f64,
    last_ts: f64,
}

impl PeriodClock {
    pub fn new(mode: PeriodMode) -> Result<Self> {
        mode.validate()?;
        Ok(Self { mode, index: 0, in_period: 0, origin: None, anchor: 0.0, last_ts: 0.0 })
    }

    pub fn index(&self) -> u64 {
        self.index
    }

    pub fn packets_in_period(&self) -> u64 {
        self.in_period
    }

    /// Whether the current period has to be closed before admitting a
    /// packet stamped `ts`.
    pub fn must_close(&self, ts: f64) -> bool {
        match self.mode {
            PeriodMode::CountBased { packets } => self.in_period >= packets,
            PeriodMode::TimeBased { seconds } => match self.origin {
                Some(origin) => ts >= origin + (self.index + 1) as f64 * seconds,
                None => false,
            },
        }
    }

    /// Length of the current period as it stands.
    pub fn duration(&self) -> f64 {
        match self.mode {
            PeriodMode::TimeBased { seconds } => seconds,
            PeriodMode::CountBased { .. } => (self.last_ts - self.anchor).max(0.0),
        }
    }

    /// Closes the current period and returns its length in seconds.
    pub fn close(&mut self) -> f64 {
        let d = self.duration();
        self.index += 1;
        self.in_period = 0;
        self.anchor = self.last_ts;
        d
    }

    pub fn admit(&mut self, ts: f64) {
        if self.origin.is_none() {
            self.origin = Some(ts);
            self.anchor = ts;
        }
        self.last_ts = ts;
        self.in_period += 1;
    }
}

/// Scoring and threshold parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilterSettings<R> {
    pub epsilon: R,
    pub cdf_bins: usize,
    /// Explicit `(min, max)` score range for the CDF; derived from ε when absent.
    pub cdf_range: Option<(R, R)>,
}

impl<R: Real> Default for FilterSettings<R> {
    fn default() -> Self {
        Self { epsilon: R::lit(DEFAULT_EPSILON), cdf_bins: DEFAULT_CDF_BINS, cdf_range: None }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PacketVerdict<R> {
    pub packet_id: u64,
    pub score: R,
    pub discarded: bool,
    pub period: u64,
    /// Period the scoring book was built from; `None` during warm-up.
    pub book_period: Option<u64>,
}

/// What a rotation produced for the next period.
#[derive(Clone, Debug, PartialEq)]
pub struct Rotation<R> {
    pub finished_period: u64,
    pub packets: u64,
    pub phi: R,
    pub threshold: ThresholdState<R>,
}

/// Pipeline state: frozen snapshots for scoring plus the in-progress
/// profile and CDF of the current period.
#[derive(Clone, Debug)]
pub struct Pipeline<R> {
    settings: FilterSettings<R>,
    nominal: NominalProfile<R>,
    current_period: u64,
    active_book: Scorebook<R>,
    active_threshold: ThresholdState<R>,
    profile: MeasuredProfile,
    cdf: ScoreCdf<R>,
}

impl<R: Real> Pipeline<R> {
    /// Starts in warm-up: identity scorebook and no discarding.
    pub fn new(nominal: NominalProfile<R>, settings: FilterSettings<R>) -> Result<Self> {
        let cfg = nominal.config();
        let book = Scorebook::identity(cfg)?;
        let cdf = match settings.cdf_range {
            Some((lo, hi)) => ScoreCdf::new(0, lo, hi, settings.cdf_bins)?,
            None => ScoreCdf::for_scorebook(0, book.dimensions().len(), settings.epsilon, settings.cdf_bins)?,
        };
        if !(settings.epsilon > R::zero()) {
            return Err(Error::InvalidConfig(format!("probability floor {} must be positive", settings.epsilon)));
        }
        Ok(Self {
            profile: MeasuredProfile::new(0, cfg)?,
            settings,
            current_period: 0,
            active_book: book,
            active_threshold: ThresholdState::pass_all(),
            cdf,
            nominal,
        })
    }

    pub fn current_period(&self) -> u64 {
        self.current_period
    }

    pub fn active_scorebook(&self) -> &Scorebook<R> {
        &self.active_book
    }

    pub fn active_threshold(&self) -> &ThresholdState<R> {
        &self.active_threshold
    }

    pub fn in_progress_profile(&self) -> &MeasuredProfile {
        &self.profile
    }

    pub fn in_progress_cdf(&self) -> &ScoreCdf<R> {
        &self.cdf
    }

    pub fn nominal(&self) -> &NominalProfile<R> {
        &self.nominal
    }

    /// Profiles, scores and judges one packet against the frozen snapshots.
    pub fn process_packet(&mut self, packet_id: u64, packet: &PacketRecord) -> PacketVerdict<R> {
        self.profile.observe(packet);
        let score = self.active_book.score(packet);
        self.cdf.insert(score);
        PacketVerdict {
            packet_id,
            score: score.value(),
            discarded: should_discard(&self.active_threshold, score),
            period: self.current_period,
            book_period: self.active_book.period_id,
        }
    }

    /// Freezes the finished period into the next scorebook and threshold.
    pub fn rotate_period(&mut self, shed: &LoadShedInput<R>, period_seconds: f64) -> Result<Rotation<R>> {
        let next = self.current_period + 1;
        let mut finished = std::mem::replace(&mut self.profile, MeasuredProfile::new(next, self.nominal.config())?);
        finished.duration_seconds = period_seconds;
        let fresh = self.cdf.fresh(next);
        let finished_cdf = std::mem::replace(&mut self.cdf, fresh);

        let book = build_scorebook(&self.nominal, &finished, self.settings.epsilon)?;
        let phi = load_shed(shed);
        let threshold = compute_threshold(&finished_cdf, phi)?;

        self.active_book = book;
        self.active_threshold = threshold;
        self.current_period = next;
        Ok(Rotation { finished_period: finished.period_id, packets: finished.packet_count, phi, threshold })
    }
}

/// Victim-side parameters for the load shedder.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShedSettings {
    /// Packets per second the victim can absorb.
    pub target_capacity: f64,
    pub max_utilization: f64,
}

impl ShedSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.target_capacity > 0.0 && self.target_capacity.is_finite()) {
            return Err(Error::InvalidConfig(format!("target capacity {} must be positive", self.target_capacity)));
        }
        if !(self.max_utilization > 0.0 && self.max_utilization <= 1.0) {
            return Err(Error::InvalidConfig(format!("max utilization {} outside (0, 1]", self.max_utilization)));
        }
        Ok(())
    }
}

/// Per-period operating record produced by [`PipelineRunner`].
#[derive(Clone, Debug, PartialEq)]
pub struct PeriodSummary<R> {
    pub period_id: u64,
    pub packets: u64,
    pub discarded: u64,
    pub duration_seconds: f64,
    /// Threshold in force during the period.
    pub threshold: ThresholdState<R>,
    pub book_period: Option<u64>,
    /// Load-shedder input computed when the period closed.
    pub shed_input: LoadShedInput<R>,
}

impl<R: Real> PeriodSummary<R> {
    pub fn passed(&self) -> u64 {
        self.packets - self.discarded
    }
}

/// Drives a packet stream through a [`Pipeline`], closing periods per the
/// configured [`PeriodMode`] and feeding the load shedder.
pub struct PipelineRunner<R> {
    pipeline: Pipeline<R>,
    clock: PeriodClock,
    shed: ShedSettings,
    next_packet_id: u64,
    discarded: u64,
    summaries: Vec<PeriodSummary<R>>,
}

impl<R: Real> PipelineRunner<R> {
    pub fn new(pipeline: Pipeline<R>, mode: PeriodMode, shed: ShedSettings) -> Result<Self> {
        shed.validate()?;
        Ok(Self {
            pipeline,
            clock: PeriodClock::new(mode)?,
            shed,
            next_packet_id: 0,
            discarded: 0,
            summaries: Vec::new(),
        })
    }

    pub fn pipeline(&self) -> &Pipeline<R> {
        &self.pipeline
    }

    pub fn push(&mut self, packet: &PacketRecord) -> Result<PacketVerdict<R>> {
        while self.clock.must_close(packet.timestamp) {
            self.close_period(true)?;
        }
        let verdict = self.pipeline.process_packet(self.next_packet_id, packet);
        self.clock.admit(packet.timestamp);
        self.next_packet_id += 1;
        self.discarded += u64::from(verdict.discarded);
        Ok(verdict)
    }

    /// Closes the trailing period (without rotating) and returns every
    /// period's summary. Empty streams produce no periods.
    pub fn finish(mut self) -> Result<Vec<PeriodSummary<R>>> {
        if self.clock.packets_in_period() > 0 {
            self.close_period(false)?;
        }
        Ok(self.summaries)
    }

    fn close_period(&mut self, rotate: bool) -> Result<()> {
        let packets = self.clock.packets_in_period();
        let duration = self.clock.close();
        let per_second = |n: u64| if duration > 0.0 { n as f64 / duration } else { 0.0 };
        let passed = packets - self.discarded;
        let shed_input = LoadShedInput {
            arrival_rate: R::lit(per_second(packets)),
            target_capacity: R::lit(self.shed.target_capacity),
            current_utilization: R::lit(per_second(passed) / self.shed.target_capacity),
            max_utilization: R::lit(self.shed.max_utilization),
        };
        self.summaries.push(PeriodSummary {
            period_id: self.pipeline.current_period(),
            packets,
            discarded: self.discarded,
            duration_seconds: duration,
            threshold: *self.pipeline.active_threshold(),
            book_period: self.pipeline.active_scorebook().period_id,
            shed_input,
        });
        self.discarded = 0;
        if rotate {
            self.pipeline.rotate_period(&shed_input, duration)?;
        }
        Ok(())
    }
}

/// `true` when the threshold discards anything at all.
pub fn is_active<R: Real>(t: &ThresholdState<R>) -> bool {
    !matches!(t.thd, Threshold::None)
}
