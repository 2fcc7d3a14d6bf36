//! Training time and cost: retrain-all versus train-once, merge-as-needed.
//!
//! Two ways to fill a comparison:
//!
//! * measured: the four numbers (combined/merged time and cost) are given
//!   and only the reductions are computed;
//! * predicted: merged wall-clock time is the LPT makespan of the
//!   per-language jobs on `parallel_slots` workers plus the merge step,
//!   merged cost bills every GPU-hour of every job, and combined cost is
//!   `combined_hours · rate · combined_gpus`.
//!
//! Measured cost pairs are never derived from times, because a single
//! hourly rate does not in general reproduce both columns of a real bill.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn one_slot() -> usize {
    1
}

fn one_gpu() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UpdateSpec {
    pub label: String,
    /// Hours to retrain the one adapter being refreshed or added.
    pub retrain_hours: f64,
    /// Hours to retrain the multilingual model on the updated combined data.
    pub combined_retrain_hours: f64,
}

/// Four observed numbers for one stage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Measurement {
    pub combined_hours: f64,
    pub merged_hours: f64,
    pub combined_cost: f64,
    pub merged_cost: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasuredRuns {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<Measurement>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub update: Option<Measurement>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostScenario {
    #[serde(default)]
    pub per_language_hours: BTreeMap<String, f64>,
    #[serde(default)]
    pub combined_hours: f64,
    #[serde(default = "one_slot")]
    pub parallel_slots: usize,
    #[serde(default)]
    pub rate_per_gpu_hour: f64,
    #[serde(default)]
    pub merge_overhead_hours: f64,
    /// GPUs billed per hour of the combined job.
    #[serde(default = "one_gpu")]
    pub combined_gpus: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub update: Option<UpdateSpec>,
    /// Observed values; a stage with a measurement is reported from it
    /// instead of being predicted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measured: Option<MeasuredRuns>,
}

impl Default for CostScenario {
    fn default() -> Self {
        Self {
            per_language_hours: BTreeMap::new(),
            combined_hours: 0.0,
            parallel_slots: 1,
            rate_per_gpu_hour: 0.0,
            merge_overhead_hours: 0.0,
            combined_gpus: 1.0,
            update: None,
            measured: None,
        }
    }
}

fn check_nonneg(what: &str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(Error::Parameter(format!("{what} must be a finite non-negative number, got {v}")))
    }
}

impl CostScenario {
    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Parameter(format!("bad cost scenario: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        for (label, &h) in &self.per_language_hours {
            check_nonneg(&format!("hours for `{label}`"), h)?;
        }
        check_nonneg("combined_hours", self.combined_hours)?;
        check_nonneg("rate_per_gpu_hour", self.rate_per_gpu_hour)?;
        check_nonneg("merge_overhead_hours", self.merge_overhead_hours)?;
        check_nonneg("combined_gpus", self.combined_gpus)?;
        if self.parallel_slots == 0 {
            return Err(Error::Parameter("parallel_slots must be at least 1".into()));
        }
        if let Some(u) = &self.update {
            check_nonneg("update.retrain_hours", u.retrain_hours)?;
            check_nonneg("update.combined_retrain_hours", u.combined_retrain_hours)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Initial,
    Update,
}

impl Stage {
    pub fn title(self) -> &'static str {
        match self {
            Stage::Initial => "Initial Setup",
            Stage::Update => "Update/Add Language",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Basis {
    Measured,
    Predicted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub stage: Stage,
    pub basis: Basis,
    pub combined_time_hours: f64,
    pub merged_time_hours: f64,
    pub combined_cost: f64,
    pub merged_cost: f64,
    pub time_reduction_pct: f64,
    pub cost_reduction_pct: f64,
}

impl ComparisonReport {
    fn build(stage: Stage, basis: Basis, m: Measurement) -> Result<Self> {
        Ok(Self {
            stage,
            basis,
            combined_time_hours: m.combined_hours,
            merged_time_hours: m.merged_hours,
            combined_cost: m.combined_cost,
            merged_cost: m.merged_cost,
            time_reduction_pct: reduction_pct(m.combined_hours, m.merged_hours)?,
            cost_reduction_pct: reduction_pct(m.combined_cost, m.merged_cost)?,
        })
    }
}

/// `100·(a − b)/a`. Zero when both are zero; undefined when only `a` is.
pub fn reduction_pct(baseline: f64, candidate: f64) -> Result<f64> {
    if baseline > 0.0 {
        Ok(100.0 * (baseline - candidate) / baseline)
    } else if baseline == 0.0 && candidate == 0.0 {
        Ok(0.0)
    } else {
        Err(Error::UndefinedReduction(format!(
            "baseline is {baseline} while the alternative is {candidate}"
        )))
    }
}

/// `"35.3% ↓"` for a reduction, `"4.0% ↑"` for an increase.
pub fn format_reduction(pct: f64) -> String {
    let arrow = if pct >= 0.0 { "↓" } else { "↑" };
    format!("{:.1}% {arrow}", pct.abs())
}

/// Longest-processing-time-first list schedule: jobs in non-increasing
/// length, each to the currently least-loaded slot (lowest index on ties).
/// Returns the per-slot loads.
pub fn lpt_loads(jobs: &[f64], slots: usize) -> Vec<f64> {
    assert!(slots >= 1, "at least one slot");
    let mut order: Vec<usize> = (0..jobs.len()).collect();
    order.sort_by(|&a, &b| jobs[b].total_cmp(&jobs[a]).then(a.cmp(&b)));
    let mut loads = vec![0.0f64; slots];
    for j in order {
        let (slot, _) = loads
            .iter()
            .enumerate()
            .min_by(|(i, x), (k, y)| x.total_cmp(y).then(i.cmp(k)))
            .expect("slots >= 1");
        loads[slot] += jobs[j];
    }
    loads
}

pub fn lpt_makespan(jobs: &[f64], slots: usize) -> f64 {
    lpt_loads(jobs, slots).into_iter().fold(0.0, f64::max)
}

pub fn measured(stage: Stage, m: Measurement) -> Result<ComparisonReport> {
    ComparisonReport::build(stage, Basis::Measured, m)
}

pub fn initial_setup(s: &CostScenario) -> Result<ComparisonReport> {
    s.validate()?;
    if s.per_language_hours.is_empty() {
        return Err(Error::Parameter("per_language_hours is empty".into()));
    }
    let jobs: Vec<f64> = s.per_language_hours.values().copied().collect();
    let merged_hours = lpt_makespan(&jobs, s.parallel_slots) + s.merge_overhead_hours;
    let gpu_hours: f64 = jobs.iter().sum::<f64>() + s.merge_overhead_hours;
    ComparisonReport::build(
        Stage::Initial,
        Basis::Predicted,
        Measurement {
            combined_hours: s.combined_hours,
            merged_hours,
            combined_cost: s.combined_hours * s.rate_per_gpu_hour * s.combined_gpus,
            merged_cost: gpu_hours * s.rate_per_gpu_hour,
        },
    )
}

pub fn update_language(s: &CostScenario) -> Result<ComparisonReport> {
    s.validate()?;
    let u = s
        .update
        .as_ref()
        .ok_or_else(|| Error::Parameter("scenario has no `update` section".into()))?;
    let merged_hours = u.retrain_hours + s.merge_overhead_hours;
    ComparisonReport::build(
        Stage::Update,
        Basis::Predicted,
        Measurement {
            combined_hours: u.combined_retrain_hours,
            merged_hours,
            combined_cost: u.combined_retrain_hours * s.rate_per_gpu_hour * s.combined_gpus,
            merged_cost: merged_hours * s.rate_per_gpu_hour,
        },
    )
}

/// Measured if the scenario carries a measurement for the stage, else predicted.
pub fn compare(s: &CostScenario, stage: Stage) -> Result<ComparisonReport> {
    let m = s.measured.as_ref().and_then(|m| match stage {
        Stage::Initial => m.initial,
        Stage::Update => m.update,
    });
    match (m, stage) {
        (Some(m), _) => measured(stage, m),
        (None, Stage::Initial) => initial_setup(s),
        (None, Stage::Update) => update_language(s),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub scenario: CostScenario,
    pub comparisons: Vec<ComparisonReport>,
}

/// Every stage the scenario can answer, or just `only`.
pub fn report(s: &CostScenario, only: Option<Stage>) -> Result<CostReport> {
    let comparisons = match only {
        Some(stage) => vec![compare(s, stage)?],
        None => {
            let mut v = Vec::new();
            let measured = s.measured.clone().unwrap_or_default();
            if measured.initial.is_some() || !s.per_language_hours.is_empty() {
                v.push(compare(s, Stage::Initial)?);
            }
            if measured.update.is_some() || s.update.is_some() {
                v.push(compare(s, Stage::Update)?);
            }
            if v.is_empty() {
                return Err(Error::Parameter(
                    "scenario has neither measurements nor per-language hours".into(),
                ));
            }
            v
        }
    };
    Ok(CostReport {
        scenario: s.clone(),
        comparisons,
    })
}

const PREDICTED_NOTE: &str = "* predicted: merged time = LPT makespan over parallel slots + merge step; \
merged cost = all job GPU-hours x rate; combined cost = combined hours x rate x combined GPUs";

/// Aligned text table: one time block and one cost block, a row per stage.
pub fn render_table(r: &CostReport) -> String {
    let headers = ["", "Retrain-all", "Train-once, merge-as-needed"];
    let mut rows: Vec<[String; 3]> = Vec::new();
    let mark = |c: &ComparisonReport| if c.basis == Basis::Predicted { "*" } else { "" };
    rows.push(["Training Time".into(), String::new(), String::new()]);
    for c in &r.comparisons {
        rows.push([
            format!("  {}{}", c.stage.title(), mark(c)),
            format!("{:.1}h", c.combined_time_hours),
            format!("{:.1}h ({})", c.merged_time_hours, format_reduction(c.time_reduction_pct)),
        ]);
    }
    rows.push(["Training Cost".into(), String::new(), String::new()]);
    for c in &r.comparisons {
        rows.push([
            format!("  {}{}", c.stage.title(), mark(c)),
            format!("${:.1}", c.combined_cost),
            format!("${:.1} ({})", c.merged_cost, format_reduction(c.cost_reduction_pct)),
        ]);
    }
    let width = |i: usize| {
        rows.iter()
            .map(|r| r[i].chars().count())
            .chain(std::iter::once(headers[i].chars().count()))
            .max()
            .unwrap_or(0)
    };
    let (w0, w1, w2) = (width(0), width(1), width(2));
    let mut out = String::new();
    let line = |out: &mut String, a: &str, b: &str, c: &str| {
        let pad = |s: &str, w: usize| " ".repeat(w.saturating_sub(s.chars().count()));
        let _ = writeln!(out, "{a}{}  {}{b}  {}{c}", pad(a, w0), pad(b, w1), pad(c, w2));
    };
    line(&mut out, headers[0], headers[1], headers[2]);
    let _ = writeln!(out, "{}", "-".repeat(w0 + w1 + w2 + 4));
    for r in &rows {
        line(&mut out, &r[0], &r[1], &r[2]);
    }
    if r.comparisons.iter().any(|c| c.basis == Basis::Predicted) {
        let _ = writeln!(out, "{PREDICTED_NOTE}");
    }
    out
}
