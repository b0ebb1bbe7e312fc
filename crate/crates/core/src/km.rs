//! Kernel estimation of the first two Kramers-Moyal coefficients.
//!
//! For every node `g` of a uniform state grid the estimator forms the
//! Nadaraya-Watson averages
//!
//! ```text
//! K1(g) = sum_i w_i dx_i / sum_i w_i
//! K2(g) = sum_i w_i dx_i^2 / sum_i w_i        (optionally minus K1^2)
//! w_i   = K((x_i - g) / h)
//! ```
//!
//! and converts them to rates with the window-average time step `dt`:
//! `mu = K1 / dt` and `sigma^2 = K2 / dt`. Nodes whose kernel mass falls
//! below `min_effective_weight` are masked (rates are NaN).

use serde::{Deserialize, Serialize};

use crate::timeseries::IncrementSample;
use crate::{Error, Execution, Result, YEAR_SECONDS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Kernel {
    #[default]
    Epanechnikov,
    Gaussian,
}

impl Kernel {
    #[inline]
    pub fn eval(self, u: f64) -> f64 {
        match self {
            Kernel::Epanechnikov => {
                if u.abs() < 1.0 {
                    0.75 * (1.0 - u * u)
                } else {
                    0.0
                }
            }
            Kernel::Gaussian => (-0.5 * u * u).exp() / (2.0 * std::f64::consts::PI).sqrt(),
        }
    }
}

/// Kernel bandwidth in state units; `"auto"` in config files selects the
/// Silverman rule of thumb.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Bandwidth {
    #[default]
    Auto,
    Fixed(f64),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum BandwidthRepr {
    Fixed(f64),
    Keyword(String),
}

impl Serialize for Bandwidth {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match *self {
            Bandwidth::Auto => BandwidthRepr::Keyword("auto".into()),
            Bandwidth::Fixed(h) => BandwidthRepr::Fixed(h),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Bandwidth {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        match BandwidthRepr::deserialize(d)? {
            BandwidthRepr::Fixed(h) => Ok(Bandwidth::Fixed(h)),
            BandwidthRepr::Keyword(k) if k == "auto" => Ok(Bandwidth::Auto),
            BandwidthRepr::Keyword(k) => Err(serde::de::Error::custom(format!(
                "bandwidth must be a number or \"auto\", got {k:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimatorConfig {
    pub grid_points: usize,
    pub kernel: Kernel,
    pub bandwidth: Bandwidth,
    pub min_effective_weight: f64,
    pub grid_pad: f64,
    pub center_second_moment: bool,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            grid_points: 128,
            kernel: Kernel::Epanechnikov,
            bandwidth: Bandwidth::Auto,
            min_effective_weight: 10.0,
            grid_pad: 0.0,
            center_second_moment: false,
        }
    }
}

impl EstimatorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.grid_points < 8 {
            return Err(Error::Config(format!(
                "grid_points must be >= 8, got {}",
                self.grid_points
            )));
        }
        if let Bandwidth::Fixed(h) = self.bandwidth {
            if !(h > 0.0 && h.is_finite()) {
                return Err(Error::Config(format!("bandwidth must be > 0, got {h}")));
            }
        }
        if !(self.min_effective_weight > 0.0) {
            return Err(Error::Config("min_effective_weight must be > 0".into()));
        }
        if !(self.grid_pad >= 0.0 && self.grid_pad.is_finite()) {
            return Err(Error::Config("grid_pad must be >= 0".into()));
        }
        Ok(())
    }
}

/// Silverman rule of thumb `1.06 * std * n^(-1/5)` (sample std).
pub fn silverman_bandwidth(states: &[f64]) -> f64 {
    let n = states.len() as f64;
    if states.len() < 2 {
        return 0.0;
    }
    let mean = states.iter().sum::<f64>() / n;
    let var = states.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    1.06 * var.sqrt() * n.powf(-0.2)
}

/// Uniform grid over the state range, padded by `grid_pad * range` on each
/// side.
pub fn build_grid(sample: &IncrementSample, cfg: &EstimatorConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    if sample.is_empty() {
        return Err(Error::InsufficientData("empty increment sample".into()));
    }
    let (lo, hi) = sample
        .states
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
            (lo.min(x), hi.max(x))
        });
    let range = hi - lo;
    if !(range > 0.0) {
        return Err(Error::DegenerateSupport(format!("all states equal {lo}")));
    }
    Ok(uniform_grid(
        lo - cfg.grid_pad * range,
        hi + cfg.grid_pad * range,
        cfg.grid_points,
    ))
}

pub fn uniform_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let step = (hi - lo) / (n - 1) as f64;
    (0..n)
        .map(|i| if i + 1 == n { hi } else { lo + i as f64 * step })
        .collect()
}

/// Gridded Kramers-Moyal coefficients and the rates derived from them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftDiffusionEstimate {
    pub grid: Vec<f64>,
    #[serde(with = "crate::serde_util")]
    pub k1: Vec<f64>,
    #[serde(with = "crate::serde_util")]
    pub k2: Vec<f64>,
    /// Drift per second.
    #[serde(with = "crate::serde_util")]
    pub mu_phys: Vec<f64>,
    /// Volatility per square-root second.
    #[serde(with = "crate::serde_util")]
    pub sigma_phys: Vec<f64>,
    #[serde(with = "crate::serde_util")]
    pub mu_ann: Vec<f64>,
    #[serde(with = "crate::serde_util")]
    pub sigma_ann: Vec<f64>,
    /// Kernel mass `sum_i w_i` per node.
    pub weight: Vec<f64>,
    /// Kish effective count `(sum w)^2 / sum w^2` per node.
    pub eff_count: Vec<f64>,
    pub valid: Vec<bool>,
    pub mean_dt: f64,
    pub lag_steps: usize,
    pub year_seconds: f64,
    pub bandwidth: f64,
    pub sample_count: usize,
    /// Whether `k2` had `k1^2` subtracted.
    pub centered: bool,
}

impl DriftDiffusionEstimate {
    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }

    pub fn valid_fraction(&self) -> f64 {
        self.valid_count() as f64 / self.len() as f64
    }

    pub fn spacing(&self) -> f64 {
        self.grid[1] - self.grid[0]
    }

    /// Standard error of the annualized drift at node `i`.
    ///
    /// Uses the conditional increment variance over the effective count;
    /// the count is divided by `lag_steps` because overlapping increments
    /// at stride `L` share all but one of their `L` elementary steps with
    /// neighbours.
    pub fn drift_std_error_ann(&self, i: usize) -> f64 {
        if !self.valid[i] {
            return f64::NAN;
        }
        let var = if self.centered {
            self.k2[i]
        } else {
            (self.k2[i] - self.k1[i] * self.k1[i]).max(0.0)
        };
        let n = self.eff_count[i] / self.lag_steps as f64;
        (var / n).sqrt() / self.mean_dt * self.year_seconds
    }

    /// Indices of the central `fraction` of valid nodes (by rank among the
    /// valid nodes).
    pub fn central_valid_nodes(&self, fraction: f64) -> Vec<usize> {
        let valid: Vec<usize> = (0..self.len()).filter(|&i| self.valid[i]).collect();
        let drop = ((1.0 - fraction) / 2.0 * valid.len() as f64).floor() as usize;
        valid[drop..valid.len() - drop].to_vec()
    }
}

/// Conditional moments of increments at every grid node.
pub fn estimate_km(
    sample: &IncrementSample,
    cfg: &EstimatorConfig,
) -> Result<DriftDiffusionEstimate> {
    estimate_km_with(sample, cfg, Execution::default())
}

pub fn estimate_km_with(
    sample: &IncrementSample,
    cfg: &EstimatorConfig,
    exec: Execution,
) -> Result<DriftDiffusionEstimate> {
    if !(sample.mean_dt > 0.0) {
        return Err(Error::InsufficientData(format!(
            "mean time step must be positive, got {}",
            sample.mean_dt
        )));
    }
    let grid = build_grid(sample, cfg)?;
    let h = match cfg.bandwidth {
        Bandwidth::Fixed(h) => h,
        Bandwidth::Auto => silverman_bandwidth(&sample.states),
    };
    if !(h > 0.0) {
        return Err(Error::DegenerateSupport(format!(
            "bandwidth resolved to {h}"
        )));
    }
    let kernel = cfg.kernel;
    let inv_h = 1.0 / h;
    let moments = exec.map_range(grid.len(), |k| {
        let g = grid[k];
        let (mut w0, mut w2, mut s1, mut s2) = (0.0, 0.0, 0.0, 0.0);
        for (&x, &dx) in sample.states.iter().zip(&sample.increments) {
            let w = kernel.eval((x - g) * inv_h);
            if w == 0.0 {
                continue;
            }
            w0 += w;
            w2 += w * w;
            s1 += w * dx;
            s2 += w * dx * dx;
        }
        NodeMoments { w0, w2, s1, s2 }
    });

    let n = grid.len();
    let mut est = DriftDiffusionEstimate {
        grid,
        k1: vec![f64::NAN; n],
        k2: vec![f64::NAN; n],
        mu_phys: vec![f64::NAN; n],
        sigma_phys: vec![f64::NAN; n],
        mu_ann: vec![f64::NAN; n],
        sigma_ann: vec![f64::NAN; n],
        weight: vec![0.0; n],
        eff_count: vec![0.0; n],
        valid: vec![false; n],
        mean_dt: sample.mean_dt,
        lag_steps: sample.lag_steps,
        year_seconds: YEAR_SECONDS,
        bandwidth: h,
        sample_count: sample.len(),
        centered: cfg.center_second_moment,
    };
    for (k, m) in moments.iter().enumerate() {
        est.weight[k] = m.w0;
        if m.w0 > 0.0 {
            est.eff_count[k] = m.w0 * m.w0 / m.w2;
            let k1 = m.s1 / m.w0;
            let mut k2 = m.s2 / m.w0;
            if cfg.center_second_moment {
                k2 = (k2 - k1 * k1).max(0.0);
            }
            est.k1[k] = k1;
            est.k2[k] = k2;
        }
        if m.w0 >= cfg.min_effective_weight {
            est.valid[k] = true;
            est.mu_phys[k] = est.k1[k] / est.mean_dt;
            est.sigma_phys[k] = (est.k2[k] / est.mean_dt).sqrt();
        }
    }
    if est.valid_count() == 0 {
        let max_weight = est.weight.iter().copied().fold(0.0, f64::max);
        return Err(Error::NoValidNodes {
            bandwidth: h,
            max_weight,
        });
    }
    Ok(annualize(est, YEAR_SECONDS))
}

struct NodeMoments {
    w0: f64,
    w2: f64,
    s1: f64,
    s2: f64,
}

/// Fills `mu_ann = mu_phys * year` and `sigma_ann = sigma_phys * sqrt(year)`.
///
/// # Panics
///
/// If `year_seconds` is not strictly positive.
pub fn annualize(mut est: DriftDiffusionEstimate, year_seconds: f64) -> DriftDiffusionEstimate {
    assert!(year_seconds > 0.0, "year_seconds must be > 0");
    let root = year_seconds.sqrt();
    est.year_seconds = year_seconds;
    est.mu_ann = est.mu_phys.iter().map(|m| m * year_seconds).collect();
    est.sigma_ann = est.sigma_phys.iter().map(|s| s * root).collect();
    est
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(states: Vec<f64>, increments: Vec<f64>, dt: f64) -> IncrementSample {
        let n = states.len();
        IncrementSample {
            states,
            increments,
            elapsed: vec![dt; n],
            mean_dt: dt,
            lag_steps: 1,
        }
    }

    #[test]
    fn grid_spacing_and_padding() {
        let s = sample(vec![0.0, 0.3, 1.0], vec![0.0; 3], 1.0);
        let g = build_grid(&s, &EstimatorConfig::default()).unwrap();
        assert_eq!(g.len(), 128);
        assert_eq!(g[0], 0.0);
        assert_eq!(g[127], 1.0);
        assert!((g[1] - 1.0 / 127.0).abs() < 1e-15);

        let cfg = EstimatorConfig {
            grid_pad: 0.05,
            ..Default::default()
        };
        let g = build_grid(&s, &cfg).unwrap();
        assert!((g[0] + 0.05).abs() < 1e-15);
        assert!((g[127] - 1.05).abs() < 1e-15);
    }

    #[test]
    fn constant_states_are_degenerate() {
        let s = sample(vec![2.0; 50], vec![0.1; 50], 1.0);
        assert!(matches!(
            build_grid(&s, &EstimatorConfig::default()),
            Err(Error::DegenerateSupport(_))
        ));
    }

    #[test]
    fn config_validation() {
        let bad = [
            EstimatorConfig {
                grid_points: 7,
                ..Default::default()
            },
            EstimatorConfig {
                bandwidth: Bandwidth::Fixed(0.0),
                ..Default::default()
            },
            EstimatorConfig {
                min_effective_weight: 0.0,
                ..Default::default()
            },
        ];
        for cfg in bad {
            assert!(cfg.validate().is_err());
        }
    }

    #[test]
    fn zero_increments_give_zero_rates() {
        let states: Vec<f64> = (0..2000).map(|i| (i as f64 * 0.37).sin()).collect();
        let s = sample(states, vec![0.0; 2000], 100.0);
        let est = estimate_km(&s, &EstimatorConfig::default()).unwrap();
        assert!(est.valid_count() > 0);
        for i in (0..est.len()).filter(|&i| est.valid[i]) {
            assert_eq!(est.k1[i], 0.0);
            assert_eq!(est.k2[i], 0.0);
            assert_eq!(est.mu_ann[i], 0.0);
            assert_eq!(est.sigma_ann[i], 0.0);
        }
    }

    #[test]
    fn tiny_bandwidth_leaves_no_valid_nodes() {
        let states: Vec<f64> = (0..100).map(|i| i as f64).collect();
        let s = sample(states, vec![1.0; 100], 1.0);
        let cfg = EstimatorConfig {
            bandwidth: Bandwidth::Fixed(1e-6),
            ..Default::default()
        };
        assert!(matches!(
            estimate_km(&s, &cfg),
            Err(Error::NoValidNodes { .. })
        ));
    }

    #[test]
    fn centering_removes_squared_drift() {
        let states: Vec<f64> = (0..4000).map(|i| (i as f64 * 0.011).sin()).collect();
        let s = sample(states, vec![0.5; 4000], 2.0);
        let raw = estimate_km(&s, &EstimatorConfig::default()).unwrap();
        let centered = estimate_km(
            &s,
            &EstimatorConfig {
                center_second_moment: true,
                ..Default::default()
            },
        )
        .unwrap();
        for i in (0..raw.len()).filter(|&i| raw.valid[i]) {
            assert!((raw.k2[i] - 0.25).abs() < 1e-12);
            assert!(centered.k2[i].abs() < 1e-12);
        }
    }

    #[test]
    fn annualize_arithmetic() {
        let mut est = estimate_km(
            &sample((0..500).map(f64::from).collect(), vec![0.0; 500], 1.0),
            &EstimatorConfig::default(),
        )
        .unwrap();
        est.mu_phys = vec![1e-8; est.len()];
        est.sigma_phys = vec![1e-4; est.len()];
        let a = annualize(est, YEAR_SECONDS);
        // sqrt(31_557_600) = 5617.6152...
        assert!((a.sigma_ann[0] - 0.561_761_5).abs() < 1e-6);
        assert!((a.mu_ann[0] - 0.315_576).abs() < 1e-12);
        let again = annualize(a.clone(), YEAR_SECONDS);
        assert_eq!(again, a);
    }

    #[test]
    fn bandwidth_serde_forms() {
        let cfg: EstimatorConfig = toml::from_str("bandwidth = \"auto\"").unwrap();
        assert_eq!(cfg.bandwidth, Bandwidth::Auto);
        let cfg: EstimatorConfig = toml::from_str("bandwidth = 0.02").unwrap();
        assert_eq!(cfg.bandwidth, Bandwidth::Fixed(0.02));
        assert!(toml::from_str::<EstimatorConfig>("bandwidth = \"wide\"").is_err());
        assert!(toml::from_str::<EstimatorConfig>("bandwith = 0.1").is_err());
        let cfg: EstimatorConfig = toml::from_str("kernel = \"gaussian\"").unwrap();
        assert_eq!(cfg.kernel, Kernel::Gaussian);
    }

    #[test]
    fn silverman_matches_formula() {
        let xs = [1.0, 2.0, 3.0, 4.0, 5.0];
        // sample std = sqrt(2.5)
        let expected = 1.06 * 2.5f64.sqrt() * 5f64.powf(-0.2);
        assert!((silverman_bandwidth(&xs) - expected).abs() < 1e-15);
    }
}
