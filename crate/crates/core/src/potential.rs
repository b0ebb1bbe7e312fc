//! Potential reconstruction from an estimated drift and classification of
//! its well structure.
//!
//! The potential satisfies `mu(x) = -dU/dx`; it is recovered by cumulative
//! trapezoid quadrature of `-mu` over the stretch of valid grid nodes that
//! holds the weight median, then shifted so its minimum is exactly zero.

use serde::{Deserialize, Serialize};

use crate::km::DriftDiffusionEstimate;
use crate::{Error, Result};

/// Minimum number of contiguous valid nodes required for integration.
pub const MIN_RUN: usize = 8;

/// Default prominence threshold, as a fraction of the potential range.
pub const DEFAULT_PROMINENCE: f64 = 0.05;

/// Relative floor below which a potential counts as flat.
pub const FLAT_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialCurve {
    pub grid: Vec<f64>,
    /// Potential in state^2 per second.
    pub u: Vec<f64>,
    pub normalized: bool,
    pub source_lag_steps: usize,
    pub source_mean_dt: f64,
    /// Index of `grid[0]` in the estimate grid the curve was cut from.
    pub offset: usize,
}

impl PotentialCurve {
    /// Integrates `-mu` over `grid` (no masking) and normalizes.
    pub fn from_drift(grid: &[f64], mu: &[f64]) -> Result<Self> {
        if grid.len() != mu.len() || grid.len() < 2 {
            return Err(Error::InsufficientData(format!(
                "need matching grid and drift of length >= 2, got {} and {}",
                grid.len(),
                mu.len()
            )));
        }
        let neg: Vec<f64> = mu.iter().map(|m| -m).collect();
        let mut pc = Self {
            grid: grid.to_vec(),
            u: cumulative_trapezoid(grid, &neg),
            normalized: false,
            source_lag_steps: 0,
            source_mean_dt: f64::NAN,
            offset: 0,
        };
        pc.normalize();
        Ok(pc)
    }

    /// Subtracts the minimum so that `min(u) == 0` exactly.
    pub fn normalize(&mut self) {
        let min = self.u.iter().copied().fold(f64::INFINITY, f64::min);
        for v in &mut self.u {
            *v -= min;
        }
        self.normalized = true;
    }

    pub fn range(&self) -> f64 {
        let (lo, hi) = min_max(&self.u);
        hi - lo
    }

    /// Potential in per-year units, `u * year_seconds`.
    pub fn annualized(&self, year_seconds: f64) -> Vec<f64> {
        self.u.iter().map(|v| v * year_seconds).collect()
    }

    /// Central-difference estimate of `-dU/dx` at interior nodes.
    pub fn central_drift(&self) -> Vec<f64> {
        self.grid
            .windows(3)
            .zip(self.u.windows(3))
            .map(|(g, u)| -(u[2] - u[0]) / (g[2] - g[0]))
            .collect()
    }
}

fn min_max(xs: &[f64]) -> (f64, f64) {
    xs.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
            (lo.min(x), hi.max(x))
        })
}

/// `out[0] = 0`, `out[k] = out[k-1] + (y[k-1] + y[k]) / 2 * (x[k] - x[k-1])`.
pub fn cumulative_trapezoid(x: &[f64], y: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(x.len());
    let mut acc = 0.0;
    out.push(acc);
    for k in 1..x.len() {
        acc += 0.5 * (y[k - 1] + y[k]) * (x[k] - x[k - 1]);
        out.push(acc);
    }
    out
}

/// Maximal runs `[start, end)` of valid nodes.
fn valid_runs(valid: &[bool]) -> Vec<(usize, usize)> {
    let mut runs = Vec::new();
    let mut start = None;
    for (i, &v) in valid.iter().enumerate() {
        match (v, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                runs.push((s, i));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        runs.push((s, valid.len()));
    }
    runs
}

/// First node at which the cumulative kernel weight reaches half the total.
fn weight_median(weight: &[f64]) -> usize {
    let total: f64 = weight.iter().sum();
    let mut acc = 0.0;
    for (i, w) in weight.iter().enumerate() {
        acc += w;
        if acc >= 0.5 * total {
            return i;
        }
    }
    weight.len() - 1
}

/// Valid run used for integration: the one containing the weight-median
/// node, or the longest run when that node is masked.
pub fn integration_run(est: &DriftDiffusionEstimate) -> Option<(usize, usize)> {
    let runs = valid_runs(&est.valid);
    let median = weight_median(&est.weight);
    runs.iter()
        .copied()
        .find(|&(s, e)| (s..e).contains(&median))
        .or_else(|| {
            // longest; earliest on ties
            runs.iter()
                .copied()
                .fold(None, |best: Option<(usize, usize)>, r| match best {
                    Some(b) if b.1 - b.0 >= r.1 - r.0 => Some(b),
                    _ => Some(r),
                })
        })
}

/// Cumulative trapezoid integral of `-mu_phys`, normalized to a zero minimum.
pub fn integrate_potential(est: &DriftDiffusionEstimate) -> Result<PotentialCurve> {
    let (start, end) = integration_run(est)
        .ok_or_else(|| Error::InsufficientData("no valid nodes to integrate".into()))?;
    if end - start < MIN_RUN {
        return Err(Error::InsufficientData(format!(
            "longest usable valid run has {} nodes, need {MIN_RUN}",
            end - start
        )));
    }
    let mut pc = PotentialCurve::from_drift(&est.grid[start..end], &est.mu_phys[start..end])?;
    pc.source_lag_steps = est.lag_steps;
    pc.source_mean_dt = est.mean_dt;
    pc.offset = start;
    Ok(pc)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WellClass {
    Flat,
    SingleWell,
    DoubleWell,
    MultiWell,
}

impl WellClass {
    pub fn as_str(self) -> &'static str {
        match self {
            WellClass::Flat => "flat",
            WellClass::SingleWell => "single_well",
            WellClass::DoubleWell => "double_well",
            WellClass::MultiWell => "multi_well",
        }
    }
}

impl std::fmt::Display for WellClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Extremum {
    /// Node index within the potential curve.
    pub index: usize,
    pub position: f64,
    /// `u` at the node; equals depth above the global minimum when the
    /// curve is normalized.
    pub value: f64,
    /// Topographic prominence (minima only).
    pub prominence: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WellStructure {
    /// Retained minima, by position.
    pub minima: Vec<Extremum>,
    /// Highest node between each pair of adjacent retained minima.
    pub maxima: Vec<Extremum>,
    pub classification: WellClass,
    /// `u(top) - u(shallower minimum)` for each adjacent pair.
    pub barriers: Vec<f64>,
    pub prominence_threshold: f64,
    pub range: f64,
}

/// Locates minima, filters them by prominence and classifies the curve.
pub fn find_extrema(pc: &PotentialCurve, prominence_threshold: f64) -> WellStructure {
    let u = &pc.u;
    let range = pc.range();
    let flat = WellStructure {
        minima: Vec::new(),
        maxima: Vec::new(),
        classification: WellClass::Flat,
        barriers: Vec::new(),
        prominence_threshold,
        range,
    };
    if u.len() < 2 || !range.is_finite() {
        return flat;
    }
    let span = pc.grid[pc.grid.len() - 1] - pc.grid[0];
    let max_slope = pc
        .grid
        .windows(2)
        .zip(u.windows(2))
        .map(|(g, w)| ((w[1] - w[0]) / (g[1] - g[0])).abs())
        .fold(0.0, f64::max);
    if !(range > 0.0) || range <= FLAT_EPS * span * max_slope {
        return flat;
    }

    let cutoff = prominence_threshold * range;
    let mut minima: Vec<Extremum> = local_minima(u)
        .into_iter()
        .map(|i| Extremum {
            index: i,
            position: pc.grid[i],
            value: u[i],
            prominence: Some(minimum_prominence(u, i)),
        })
        .filter(|m| m.prominence.unwrap() >= cutoff)
        .collect();
    minima.sort_by_key(|m| m.index);

    let mut maxima = Vec::new();
    let mut barriers = Vec::new();
    for pair in minima.windows(2) {
        let (a, b) = (pair[0].index, pair[1].index);
        let top = (a + 1..b).fold(a + 1, |best, i| if u[i] > u[best] { i } else { best });
        barriers.push(u[top] - u[a].max(u[b]));
        maxima.push(Extremum {
            index: top,
            position: pc.grid[top],
            value: u[top],
            prominence: None,
        });
    }

    let classification = match minima.len() {
        0 => WellClass::Flat,
        1 => WellClass::SingleWell,
        2 => WellClass::DoubleWell,
        _ => WellClass::MultiWell,
    };
    WellStructure {
        minima,
        maxima,
        classification,
        barriers,
        prominence_threshold,
        range,
    }
}

/// Strict interior local minima; a plateau counts once, at its leftmost
/// node. When the curve has no interior minimum the global minimum (which
/// then sits on an edge) is the only candidate.
fn local_minima(u: &[f64]) -> Vec<usize> {
    // plateaus as (start, end) with equal values
    let mut runs: Vec<(usize, usize)> = Vec::new();
    let mut s = 0;
    for i in 1..=u.len() {
        if i == u.len() || u[i] != u[s] {
            runs.push((s, i));
            s = i;
        }
    }
    if runs.len() < 2 {
        return Vec::new();
    }
    let interior: Vec<usize> = (1..runs.len() - 1)
        .filter(|&r| {
            let v = u[runs[r].0];
            u[runs[r - 1].0] > v && u[runs[r + 1].0] > v
        })
        .map(|r| runs[r].0)
        .collect();
    if !interior.is_empty() {
        return interior;
    }
    let global = (0..u.len()).fold(0, |best, i| if u[i] < u[best] { i } else { best });
    vec![global]
}

/// Height a minimum must climb before reaching strictly lower ground, taking
/// the easier side. A side that runs into the domain edge uses the highest
/// point up to the edge; a minimum sitting on an edge uses its one side.
fn minimum_prominence(u: &[f64], m: usize) -> f64 {
    let v = u[m];
    let climb = |iter: &mut dyn Iterator<Item = usize>| -> Option<f64> {
        let mut top: Option<f64> = None;
        for i in iter {
            if u[i] < v {
                break;
            }
            top = Some(top.map_or(u[i], |t: f64| t.max(u[i])));
        }
        top
    };
    let left = climb(&mut (0..m).rev());
    let right = climb(&mut (m + 1..u.len()));
    match (left, right) {
        (Some(l), Some(r)) => l.min(r) - v,
        (Some(x), None) | (None, Some(x)) => x - v,
        (None, None) => 0.0,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BarrierEntry {
    pub left: Extremum,
    pub top: Extremum,
    pub right: Extremum,
    pub from_left: f64,
    pub from_right: f64,
}

/// Barrier heights seen from each side of every adjacent minima pair.
pub fn barrier_report(ws: &WellStructure) -> Vec<BarrierEntry> {
    ws.minima
        .windows(2)
        .zip(&ws.maxima)
        .map(|(pair, top)| BarrierEntry {
            left: pair[0].clone(),
            top: top.clone(),
            right: pair[1].clone(),
            from_left: top.value - pair[0].value,
            from_right: top.value - pair[1].value,
        })
        .collect()
}
