//! Ground-truth metrics and run reports (JSON totals, CSV time series,
//! optional per-packet verdict CSV).

use std::collections::BTreeMap;
use std::io::Write;

use serde::Serialize;

use crate::control::Threshold;
use crate::error::Result;
use crate::packet_model::GroundTruth;
use crate::pipeline::{PacketVerdict, PeriodSummary};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
struct Counts {
    packets: u64,
    discarded: u64,
    legitimate: u64,
    legit_discarded: u64,
    attack: u64,
    attack_discarded: u64,
}

impl Counts {
    fn add(&mut self, discarded: bool, label: GroundTruth) {
        let d = u64::from(discarded);
        self.packets += 1;
        self.discarded += d;
        match label {
            GroundTruth::Legitimate => {
                self.legitimate += 1;
                self.legit_discarded += d;
            }
            GroundTruth::Attack => {
                self.attack += 1;
                self.attack_discarded += d;
            }
            GroundTruth::Unknown => {}
        }
    }

    fn merge(&mut self, o: &Counts) {
        self.packets += o.packets;
        self.discarded += o.discarded;
        self.legitimate += o.legitimate;
        self.legit_discarded += o.legit_discarded;
        self.attack += o.attack;
        self.attack_discarded += o.attack_discarded;
    }

    fn fpr(&self, labeled: bool) -> Option<f64> {
        (labeled && self.legitimate > 0).then(|| self.legit_discarded as f64 / self.legitimate as f64)
    }

    fn fnr(&self, labeled: bool) -> Option<f64> {
        (labeled && self.attack > 0).then(|| (self.attack - self.attack_discarded) as f64 / self.attack as f64)
    }

    fn realized(&self) -> f64 {
        if self.packets == 0 {
            0.0
        } else {
            self.discarded as f64 / self.packets as f64
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PeriodRecord {
    pub period_id: u64,
    /// N_m
    pub packets: u64,
    pub legitimate: u64,
    pub attack: u64,
    pub discarded: u64,
    pub legit_discarded: u64,
    pub attack_discarded: u64,
    /// Discard fraction in force during the period.
    pub phi: f64,
    pub thd: Threshold<f64>,
    pub realized_discard: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub false_positive_rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub false_negative_rate: Option<f64>,
    pub duration_seconds: f64,
    pub arrival_pps: f64,
    pub passed_pps: f64,
    pub book_period: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunTotals {
    pub periods: usize,
    pub packets: u64,
    pub legitimate: u64,
    pub attack: u64,
    pub discarded: u64,
    pub realized_discard: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub false_positive_rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub false_negative_rate: Option<f64>,
    pub passed_pps: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunReport {
    pub config: BTreeMap<String, String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub labeled: bool,
    pub totals: RunTotals,
    pub periods: Vec<PeriodRecord>,
    pub wall_clock_seconds: f64,
}

impl RunReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Plot-ready time series: one row per period.
    pub fn write_series<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["period", "packets", "phi", "thd", "realized_discard", "fpr", "fnr", "passed_pps"])?;
        let opt = |v: Option<f64>| v.map_or_else(String::new, |x| x.to_string());
        for p in &self.periods {
            let thd = match p.thd {
                Threshold::None => "none".to_owned(),
                Threshold::All => "all".to_owned(),
                Threshold::Cutoff(t) => t.to_string(),
            };
            w.write_record([
                p.period_id.to_string(),
                p.packets.to_string(),
                p.phi.to_string(),
                thd,
                p.realized_discard.to_string(),
                opt(p.false_positive_rate),
                opt(p.false_negative_rate),
                p.passed_pps.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Accumulates per-period ground-truth counts from a verdict stream.
#[derive(Clone, Debug, Default)]
pub struct MetricsAccumulator {
    periods: BTreeMap<u64, Counts>,
    labeled: bool,
}

impl MetricsAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record<R: Real>(&mut self, verdict: &PacketVerdict<R>, label: GroundTruth) {
        self.labeled |= label != GroundTruth::Unknown;
        self.periods.entry(verdict.period).or_default().add(verdict.discarded, label);
    }

    /// Joins the counts with the pipeline's period summaries.
    pub fn finish<R: Real>(&self, summaries: &[PeriodSummary<R>]) -> (Vec<PeriodRecord>, RunTotals) {
        let by_id: BTreeMap<u64, &PeriodSummary<R>> = summaries.iter().map(|s| (s.period_id, s)).collect();
        let mut ids: Vec<u64> = self.periods.keys().chain(by_id.keys()).copied().collect();
        ids.sort_unstable();
        ids.dedup();

        let mut total = Counts::default();
        let mut seconds = 0.0;
        let records: Vec<PeriodRecord> = ids
            .into_iter()
            .map(|id| {
                let c = self.periods.get(&id).copied().unwrap_or_default();
                total.merge(&c);
                let s = by_id.get(&id);
                let duration = s.map_or(0.0, |s| s.duration_seconds);
                seconds += duration;
                let per_second = |n: u64| if duration > 0.0 { n as f64 / duration } else { 0.0 };
                let thd = s.map_or(Threshold::None, |s| match s.threshold.thd {
                    Threshold::None => Threshold::None,
                    Threshold::All => Threshold::All,
                    Threshold::Cutoff(t) => Threshold::Cutoff(t.as_f64()),
                });
                PeriodRecord {
                    period_id: id,
                    packets: c.packets,
                    legitimate: c.legitimate,
                    attack: c.attack,
                    discarded: c.discarded,
                    legit_discarded: c.legit_discarded,
                    attack_discarded: c.attack_discarded,
                    phi: s.map_or(0.0, |s| s.threshold.phi.as_f64()),
                    thd,
                    realized_discard: c.realized(),
                    false_positive_rate: c.fpr(self.labeled),
                    false_negative_rate: c.fnr(self.labeled),
                    duration_seconds: duration,
                    arrival_pps: per_second(c.packets),
                    passed_pps: per_second(c.packets - c.discarded),
                    book_period: s.and_then(|s| s.book_period),
                }
            })
            .collect();

        let totals = RunTotals {
            periods: records.len(),
            packets: total.packets,
            legitimate: total.legitimate,
            attack: total.attack,
            discarded: total.discarded,
            realized_discard: total.realized(),
            false_positive_rate: total.fpr(self.labeled),
            false_negative_rate: total.fnr(self.labeled),
            passed_pps: if seconds > 0.0 { (total.packets - total.discarded) as f64 / seconds } else { 0.0 },
        };
        (records, totals)
    }

    pub fn labeled(&self) -> bool {
        self.labeled
    }
}

/// Computes per-period and total metrics from labeled verdicts.
pub fn compute_metrics<R: Real>(
    verdicts: impl IntoIterator<Item = (PacketVerdict<R>, GroundTruth)>,
    summaries: &[PeriodSummary<R>],
) -> (Vec<PeriodRecord>, RunTotals) {
    let mut acc = MetricsAccumulator::new();
    for (v, label) in verdicts {
        acc.record(&v, label);
    }
    acc.finish(summaries)
}

/// Per-packet verdict CSV.
pub struct VerdictWriter<W: Write> {
    out: csv::Writer<W>,
}

impl<W: Write> VerdictWriter<W> {
    pub fn new(out: W) -> Result<Self> {
        let mut out = csv::Writer::from_writer(out);
        out.write_record(["packet_id", "period", "score", "discarded", "ground_truth"])?;
        Ok(Self { out })
    }

    pub fn write<R: Real>(&mut self, v: &PacketVerdict<R>, label: GroundTruth) -> Result<()> {
        self.out.write_record([
            v.packet_id.to_string(),
            v.period.to_string(),
            v.score.to_string(),
            u8::from(v.discarded).to_string(),
            label.code().to_owned(),
        ])?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.out.flush()?;
        Ok(())
    }
}
