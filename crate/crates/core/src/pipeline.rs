//! Windows x lags experiment grid.
//!
//! Each window is sliced and preprocessed once; every lag then yields one
//! cell holding the drift/diffusion estimate, the potential and its well
//! structure, or the reason the cell was skipped.

use serde::{Deserialize, Serialize};

use crate::km::{self, DriftDiffusionEstimate, EstimatorConfig};
use crate::potential::{self, PotentialCurve, WellStructure};
use crate::timeseries::{self, PreprocessConfig, TimeSeries};
use crate::{Error, Execution, Result, YEAR_SECONDS};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Window {
    pub start: f64,
    pub end: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisPlan {
    pub windows: Vec<Window>,
    /// Target observation scales in seconds.
    pub lags: Vec<f64>,
    #[serde(default)]
    pub preprocess: PreprocessConfig,
    #[serde(default)]
    pub estimator: EstimatorConfig,
    #[serde(default = "default_prominence")]
    pub prominence_threshold: f64,
    #[serde(default = "default_year")]
    pub year_seconds: f64,
    /// Preprocess the whole series once before slicing windows.
    #[serde(default)]
    pub global_preprocess: bool,
}

fn default_prominence() -> f64 {
    potential::DEFAULT_PROMINENCE
}

fn default_year() -> f64 {
    YEAR_SECONDS
}

impl AnalysisPlan {
    pub fn new(windows: Vec<Window>, lags: Vec<f64>) -> Self {
        Self {
            windows,
            lags,
            preprocess: PreprocessConfig::default(),
            estimator: EstimatorConfig::default(),
            prominence_threshold: default_prominence(),
            year_seconds: default_year(),
            global_preprocess: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.windows.is_empty() {
            return Err(Error::Config("plan has no windows".into()));
        }
        if let Some(w) = self.windows.iter().find(|w| !(w.start < w.end)) {
            return Err(Error::Config(format!(
                "window start {} must be < end {}",
                w.start, w.end
            )));
        }
        if self.lags.is_empty() {
            return Err(Error::Config("plan has no lags".into()));
        }
        if let Some(l) = self.lags.iter().find(|&&l| !(l > 0.0 && l.is_finite())) {
            return Err(Error::Config(format!("lag must be > 0, got {l}")));
        }
        let mut sorted = self.lags.clone();
        sorted.sort_by(f64::total_cmp);
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Config("lags must be distinct".into()));
        }
        if !(self.prominence_threshold >= 0.0 && self.prominence_threshold < 1.0) {
            return Err(Error::Config(format!(
                "prominence_threshold must lie in [0, 1), got {}",
                self.prominence_threshold
            )));
        }
        if !(self.year_seconds > 0.0) {
            return Err(Error::Config("year_seconds must be > 0".into()));
        }
        self.preprocess.validate()?;
        self.estimator.validate()
    }
}

/// `round(target / median spacing)`, at least one step.
pub fn resolve_lag_steps(ts: &TimeSeries, target_seconds: f64) -> usize {
    let steps = (target_seconds / ts.median_spacing()).round();
    if steps >= 1.0 {
        steps as usize
    } else {
        1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellAnalysis {
    pub lag_steps: usize,
    pub mean_dt: f64,
    pub sample_count: usize,
    pub bandwidth: f64,
    pub valid_fraction: f64,
    pub estimate: DriftDiffusionEstimate,
    pub potential: PotentialCurve,
    pub wells: WellStructure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum CellOutcome {
    Computed(Box<CellAnalysis>),
    Skipped { reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub window_index: usize,
    pub lag_index: usize,
    pub window: Window,
    pub target_lag_seconds: f64,
    pub outcome: CellOutcome,
}

impl Cell {
    pub fn analysis(&self) -> Option<&CellAnalysis> {
        match &self.outcome {
            CellOutcome::Computed(a) => Some(a),
            CellOutcome::Skipped { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    /// Window-major, lag-minor, in plan order.
    pub cells: Vec<Cell>,
}

impl RunResult {
    pub fn computed(&self) -> impl Iterator<Item = (&Cell, &CellAnalysis)> {
        self.cells
            .iter()
            .filter_map(|c| c.analysis().map(|a| (c, a)))
    }

    pub fn cell(&self, window_index: usize, lag_index: usize) -> Option<&Cell> {
        self.cells
            .iter()
            .find(|c| c.window_index == window_index && c.lag_index == lag_index)
    }
}

/// Estimate, integrate and classify one preprocessed window at one lag.
pub fn analyze_cell(
    ts: &TimeSeries,
    target_lag_seconds: f64,
    plan: &AnalysisPlan,
    exec: Execution,
) -> Result<CellAnalysis> {
    let lag_steps = resolve_lag_steps(ts, target_lag_seconds);
    let sample = timeseries::make_increments(ts, lag_steps)?;
    if sample.len() < plan.estimator.grid_points {
        return Err(Error::InsufficientData(format!(
            "{} increment pairs < {} grid points",
            sample.len(),
            plan.estimator.grid_points
        )));
    }
    let est = km::estimate_km_with(&sample, &plan.estimator, exec)?;
    let est = km::annualize(est, plan.year_seconds);
    let potential = potential::integrate_potential(&est)?;
    let wells = potential::find_extrema(&potential, plan.prominence_threshold);
    Ok(CellAnalysis {
        lag_steps,
        mean_dt: sample.mean_dt,
        sample_count: sample.len(),
        bandwidth: est.bandwidth,
        valid_fraction: est.valid_fraction(),
        estimate: est,
        potential,
        wells,
    })
}

pub fn run_plan(ts: &TimeSeries, plan: &AnalysisPlan) -> Result<RunResult> {
    run_plan_with(ts, plan, Execution::default())
}

pub fn run_plan_with(ts: &TimeSeries, plan: &AnalysisPlan, exec: Execution) -> Result<RunResult> {
    plan.validate()?;
    let global = if plan.global_preprocess {
        Some(plan.preprocess.apply(ts)?)
    } else {
        None
    };
    let prepared: Vec<std::result::Result<TimeSeries, String>> =
        exec.map_range(plan.windows.len(), |w| {
            let win = plan.windows[w];
            let prepared = match &global {
                Some(g) => timeseries::slice_window(g, win.start, win.end),
                None => timeseries::slice_window(ts, win.start, win.end)
                    .and_then(|s| plan.preprocess.apply(&s)),
            };
            prepared.map_err(|e| e.to_string())
        });

    let n_lags = plan.lags.len();
    let cells = exec.map_range(plan.windows.len() * n_lags, |k| {
        let (w, l) = (k / n_lags, k % n_lags);
        let outcome = match &prepared[w] {
            Err(reason) => CellOutcome::Skipped {
                reason: reason.clone(),
            },
            Ok(series) => match analyze_cell(series, plan.lags[l], plan, exec) {
                Ok(a) => CellOutcome::Computed(Box::new(a)),
                Err(e) => CellOutcome::Skipped {
                    reason: e.to_string(),
                },
            },
        };
        Cell {
            window_index: w,
            lag_index: l,
            window: plan.windows[w],
            target_lag_seconds: plan.lags[l],
            outcome,
        }
    });
    if cells.iter().all(|c| c.analysis().is_none()) {
        let reasons: Vec<String> = cells
            .iter()
            .filter_map(|c| match &c.outcome {
                CellOutcome::Skipped { reason } => Some(format!(
                    "window {} lag {}: {reason}",
                    c.window_index, c.target_lag_seconds
                )),
                CellOutcome::Computed(_) => None,
            })
            .collect();
        return Err(Error::AllCellsSkipped(reasons.join("; ")));
    }
    Ok(RunResult { cells })
}
