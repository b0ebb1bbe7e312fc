//! Euler-Maruyama simulation of `dx = mu(x) dt + sigma(x) dW` with
//! polynomial drift and diffusion, plus mean first-passage times.
//!
//! Rates are per year; timestamps are seconds, so simulated paths feed the
//! estimation pipeline directly. Noise comes from ChaCha8 seeded with the
//! spec seed, which reproduces across platforms.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::timeseries::TimeSeries;
use crate::{Error, Execution, Result, YEAR_SECONDS};

/// Generator identity recorded in path provenance.
pub const GENERATOR: &str = "ChaCha8Rng/StandardNormal(ziggurat)";

/// `sum_k c[k] x^k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(transparent)]
pub struct Polynomial(pub Vec<f64>);

impl Polynomial {
    pub fn eval(&self, x: f64) -> f64 {
        self.0.iter().rev().fold(0.0, |acc, c| acc * x + c)
    }

    pub fn derivative(&self) -> Polynomial {
        Polynomial(
            self.0
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, c)| k as f64 * c)
                .collect(),
        )
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&c| c == 0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SDESpec {
    /// Drift coefficients, per year.
    pub drift: Polynomial,
    /// Diffusion coefficients, per square-root year.
    pub diffusion: Polynomial,
    pub x0: f64,
    #[serde(default)]
    pub seed: u64,
}

pub fn make_ou(theta: f64, sigma: f64, x0: f64, seed: u64) -> Result<SDESpec> {
    if !(theta > 0.0) || !(sigma >= 0.0) {
        return Err(Error::Config(format!(
            "OU needs theta > 0 and sigma >= 0, got {theta}, {sigma}"
        )));
    }
    Ok(SDESpec {
        drift: Polynomial(vec![0.0, -theta]),
        diffusion: Polynomial(vec![sigma]),
        x0,
        seed,
    })
}

/// Drift of `U(x) = a (x^2 - c^2)^2`: `mu(x) = 4 a c^2 x - 4 a x^3`.
pub fn make_double_well(a: f64, c: f64, sigma: f64, x0: f64, seed: u64) -> Result<SDESpec> {
    if !(a > 0.0) || !(c > 0.0) || !(sigma >= 0.0) {
        return Err(Error::Config(format!(
            "double well needs a > 0, c > 0, sigma >= 0, got {a}, {c}, {sigma}"
        )));
    }
    Ok(SDESpec {
        drift: Polynomial(vec![0.0, 4.0 * a * c * c, 0.0, -4.0 * a]),
        diffusion: Polynomial(vec![sigma]),
        x0,
        seed,
    })
}

/// Barrier `a c^4` of the double-well potential.
pub fn double_well_barrier(a: f64, c: f64) -> f64 {
    a * c.powi(4)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimPath {
    pub timestamps: Vec<f64>,
    pub values: Vec<f64>,
    pub spec: SDESpec,
    pub dt: f64,
    pub generator: &'static str,
}

impl SimPath {
    pub fn to_time_series(&self, label: &str) -> Result<TimeSeries> {
        TimeSeries::new(self.timestamps.clone(), self.values.clone(), label)
    }
}

struct Stepper<'a> {
    spec: &'a SDESpec,
    dt_y: f64,
    sqrt_dt_y: f64,
    rng: ChaCha8Rng,
    noiseless: bool,
}

impl<'a> Stepper<'a> {
    fn new(spec: &'a SDESpec, dt: f64, seed: u64) -> Self {
        let dt_y = dt / YEAR_SECONDS;
        Self {
            spec,
            dt_y,
            sqrt_dt_y: dt_y.sqrt(),
            rng: ChaCha8Rng::seed_from_u64(seed),
            noiseless: spec.diffusion.is_zero(),
        }
    }

    #[inline]
    fn step(&mut self, x: f64, k: usize) -> Result<f64> {
        let sigma = self.spec.diffusion.eval(x);
        if sigma < 0.0 {
            return Err(Error::NegativeDiffusion {
                step: k,
                state: x,
                sigma,
            });
        }
        let z: f64 = if self.noiseless {
            0.0
        } else {
            StandardNormal.sample(&mut self.rng)
        };
        let next = x + self.spec.drift.eval(x) * self.dt_y + sigma * self.sqrt_dt_y * z;
        if !next.is_finite() {
            return Err(Error::Diverged { step: k + 1 });
        }
        Ok(next)
    }
}

fn check_dt(dt: f64) -> Result<()> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Config(format!("dt must be > 0, got {dt}")));
    }
    Ok(())
}

/// `n_steps` Euler-Maruyama steps of `dt` seconds from `spec.x0`; the path
/// holds `n_steps + 1` records starting at `t = 0`.
pub fn simulate(spec: &SDESpec, dt: f64, n_steps: usize) -> Result<SimPath> {
    check_dt(dt)?;
    if n_steps == 0 {
        return Err(Error::Config("n_steps must be >= 1".into()));
    }
    let stiffness = spec.drift.derivative().eval(spec.x0).abs() * dt / YEAR_SECONDS;
    if stiffness >= 0.5 {
        log::warn!("|mu'(x0)| * dt = {stiffness:.3} >= 0.5; Euler-Maruyama may be unstable");
    }
    let mut stepper = Stepper::new(spec, dt, spec.seed);
    let mut values = Vec::with_capacity(n_steps + 1);
    let mut x = spec.x0;
    values.push(x);
    for k in 0..n_steps {
        x = stepper.step(x, k)?;
        values.push(x);
    }
    Ok(SimPath {
        timestamps: (0..=n_steps).map(|k| k as f64 * dt).collect(),
        values,
        spec: spec.clone(),
        dt,
        generator: GENERATOR,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MfptResult {
    pub mean_seconds: f64,
    pub std_error: f64,
    pub censored: usize,
    /// First-passage times of uncensored paths, in path order.
    pub times: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MfptConfig {
    pub start: f64,
    pub absorb: f64,
    pub n_paths: usize,
    pub dt: f64,
    pub max_steps: usize,
}

pub fn mean_first_passage_time(spec: &SDESpec, cfg: &MfptConfig) -> Result<MfptResult> {
    mean_first_passage_time_with(spec, cfg, Execution::default())
}

/// First time each path started at `cfg.start` reaches or crosses
/// `cfg.absorb`. Path `j` draws noise from seed `spec.seed + j`.
pub fn mean_first_passage_time_with(
    spec: &SDESpec,
    cfg: &MfptConfig,
    exec: Execution,
) -> Result<MfptResult> {
    check_dt(cfg.dt)?;
    if cfg.n_paths == 0 {
        return Err(Error::Config("n_paths must be >= 1".into()));
    }
    if cfg.start == cfg.absorb {
        return Ok(MfptResult {
            mean_seconds: 0.0,
            std_error: 0.0,
            censored: 0,
            times: vec![0.0; cfg.n_paths],
        });
    }
    let side = (cfg.start - cfg.absorb).signum();
    let outcomes = exec.map_range(cfg.n_paths, |j| -> Result<Option<f64>> {
        let mut stepper = Stepper::new(spec, cfg.dt, spec.seed.wrapping_add(j as u64));
        let mut x = cfg.start;
        for k in 0..cfg.max_steps {
            x = stepper.step(x, k)?;
            if (x - cfg.absorb) * side <= 0.0 {
                return Ok(Some((k + 1) as f64 * cfg.dt));
            }
        }
        Ok(None)
    });
    let mut times = Vec::with_capacity(cfg.n_paths);
    let mut censored = 0;
    for o in outcomes {
        match o? {
            Some(t) => times.push(t),
            None => censored += 1,
        }
    }
    if times.is_empty() {
        return Err(Error::AllCensored {
            n_paths: cfg.n_paths,
            max_steps: cfg.max_steps,
        });
    }
    let n = times.len() as f64;
    let mean = times.iter().sum::<f64>() / n;
    let std_error = if times.len() > 1 {
        let var = times.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (var / n).sqrt()
    } else {
        0.0
    };
    Ok(MfptResult {
        mean_seconds: mean,
        std_error,
        censored,
        times,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_eval_and_derivative() {
        let p = Polynomial(vec![1.0, -2.0, 0.0, 3.0]);
        assert_eq!(p.eval(2.0), 1.0 - 4.0 + 24.0);
        assert_eq!(p.derivative(), Polynomial(vec![-2.0, 0.0, 9.0]));
        assert_eq!(Polynomial(vec![]).eval(5.0), 0.0);
    }

    #[test]
    fn ou_spec() {
        let s = make_ou(3.0, 0.4, 0.0, 1).unwrap();
        assert_eq!(s.drift.eval(1.0), -3.0);
        assert_eq!(s.diffusion.eval(123.0), 0.4);
        // stationary variance sigma^2 / (2 theta) for theta = 2, sigma = 0.5
        let (theta, sigma) = (2.0, 0.5);
        assert!((sigma * sigma / (2.0 * theta) - 0.0625f64).abs() < 1e-15);
        assert!(make_ou(0.0, 0.1, 0.0, 0).is_err());
        assert!(make_ou(1.0, -0.1, 0.0, 0).is_err());
    }

    #[test]
    fn ou_potential_is_quadratic() {
        // U(x) = 1.5 x^2 for theta = 3: finite difference of U equals -mu
        let s = make_ou(3.0, 0.0, 0.0, 0).unwrap();
        let u = |x: f64| 1.5 * x * x;
        for x in [-0.7, -0.1, 0.3, 1.2] {
            let h = 1e-5;
            let fd = (u(x + h) - u(x - h)) / (2.0 * h);
            assert!((fd + s.drift.eval(x)).abs() < 1e-8);
        }
    }

    #[test]
    fn double_well_spec() {
        let s = make_double_well(16.0, 0.5, 0.8, -0.5, 0).unwrap();
        assert_eq!(double_well_barrier(16.0, 0.5), 1.0);
        for x in [-0.5, 0.0, 0.5] {
            assert_eq!(s.drift.eval(x), 0.0);
        }
        assert!((s.drift.eval(0.25) - 3.0).abs() < 1e-12);
        let u = |x: f64| 16.0 * (x * x - 0.25f64).powi(2);
        for x in [-0.9, -0.3, 0.25, 0.6] {
            let h = 1e-5;
            let fd = (u(x + h) - u(x - h)) / (2.0 * h);
            assert!((fd + s.drift.eval(x)).abs() < 1e-7);
            assert_eq!(s.drift.eval(-x), -s.drift.eval(x));
        }
        assert!(make_double_well(16.0, 0.0, 0.8, 0.0, 0).is_err());
    }

    #[test]
    fn noise_free_decay_matches_recursion() {
        let theta = 3.0;
        let spec = make_ou(theta, 0.0, 1.0, 9).unwrap();
        let dt = 3600.0;
        let n = 500;
        let path = simulate(&spec, dt, n).unwrap();
        let dt_y = dt / YEAR_SECONDS;
        let expected = (1.0 - theta * dt_y).powi(n as i32);
        assert!((path.values[n] - expected).abs() < 1e-12);
        assert_eq!(path.values.len(), n + 1);
        assert_eq!(path.timestamps[n], n as f64 * dt);
    }

    #[test]
    fn zero_noise_error_is_first_order() {
        let theta = 3.0;
        let horizon = 0.5 * YEAR_SECONDS;
        let err = |steps: usize| {
            let spec = make_ou(theta, 0.0, 1.0, 0).unwrap();
            let p = simulate(&spec, horizon / steps as f64, steps).unwrap();
            let exact = (-theta * 0.5f64).exp();
            (p.values[steps] - exact).abs() / exact
        };
        let (e1, e2) = (err(200), err(400));
        assert!(e2 < e1);
        assert!((e1 / e2 - 2.0).abs() < 0.1, "ratio {}", e1 / e2);
    }

    #[test]
    fn simulation_is_deterministic() {
        let spec = make_double_well(16.0, 0.5, 0.8, 0.0, 42).unwrap();
        let a = simulate(&spec, 100.0, 10_000).unwrap();
        let b = simulate(&spec, 100.0, 10_000).unwrap();
        assert!(a
            .values
            .iter()
            .zip(&b.values)
            .all(|(x, y)| x.to_bits() == y.to_bits()));
        let c = simulate(&SDESpec { seed: 43, ..spec }, 100.0, 10_000).unwrap();
        assert_ne!(a.values, c.values);
    }

    #[test]
    fn brownian_increment_variance() {
        let sigma = 0.5;
        let spec = SDESpec {
            drift: Polynomial(vec![0.0]),
            diffusion: Polynomial(vec![sigma]),
            x0: 0.0,
            seed: 11,
        };
        let n = 100_000;
        let dt = 100.0;
        let p = simulate(&spec, dt, n).unwrap();
        let inc: Vec<f64> = p.values.windows(2).map(|w| w[1] - w[0]).collect();
        let mean = inc.iter().sum::<f64>() / n as f64;
        let var = inc.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let expected = sigma * sigma * dt / YEAR_SECONDS;
        // chi-square relative sd sqrt(2/n) = 0.45%
        assert!((var / expected - 1.0).abs() < 0.05);
    }

    #[test]
    fn negative_diffusion_and_explosion_are_errors() {
        let spec = SDESpec {
            drift: Polynomial(vec![0.0]),
            diffusion: Polynomial(vec![-0.1]),
            x0: 0.0,
            seed: 0,
        };
        assert!(matches!(
            simulate(&spec, 100.0, 10),
            Err(Error::NegativeDiffusion { step: 0, .. })
        ));
        let spec = SDESpec {
            drift: Polynomial(vec![0.0, 0.0, 1e300]),
            diffusion: Polynomial(vec![0.0]),
            x0: 1e3,
            seed: 0,
        };
        assert!(matches!(
            simulate(&spec, YEAR_SECONDS, 10),
            Err(Error::Diverged { .. })
        ));
    }

    #[test]
    fn mfpt_trivial_cases() {
        let spec = make_double_well(16.0, 0.5, 0.8, 0.0, 5).unwrap();
        let cfg = MfptConfig {
            start: -0.5,
            absorb: -0.5,
            n_paths: 4,
            dt: 3600.0,
            max_steps: 10,
        };
        let r = mean_first_passage_time(&spec, &cfg).unwrap();
        assert_eq!(r.mean_seconds, 0.0);

        // deterministic drift away from the absorbing level never arrives
        let still = make_ou(3.0, 0.0, 0.0, 0).unwrap();
        let cfg = MfptConfig {
            start: 0.1,
            absorb: 0.5,
            n_paths: 3,
            dt: 3600.0,
            max_steps: 1000,
        };
        assert!(matches!(
            mean_first_passage_time(&still, &cfg),
            Err(Error::AllCensored { n_paths: 3, .. })
        ));
    }

    #[test]
    fn mfpt_shrinks_with_noise() {
        let cfg = MfptConfig {
            start: -0.5,
            absorb: 0.0,
            n_paths: 200,
            dt: 3600.0,
            max_steps: 20_000_000,
        };
        let hot = make_double_well(16.0, 0.5, 0.8, 0.0, 100).unwrap();
        let cold = make_double_well(16.0, 0.5, 0.6, 0.0, 100).unwrap();
        let t_hot = mean_first_passage_time(&hot, &cfg).unwrap();
        let t_cold = mean_first_passage_time(&cold, &cfg).unwrap();
        assert_eq!(t_hot.censored + t_cold.censored, 0);
        assert!(t_hot.mean_seconds < t_cold.mean_seconds);
    }

    #[test]
    fn mfpt_sequential_matches_parallel() {
        let spec = make_double_well(16.0, 0.5, 1.2, 0.0, 3).unwrap();
        let cfg = MfptConfig {
            start: -0.5,
            absorb: 0.0,
            n_paths: 16,
            dt: 3600.0,
            max_steps: 1_000_000,
        };
        let a = mean_first_passage_time_with(&spec, &cfg, Execution::Sequential).unwrap();
        let b = mean_first_passage_time_with(&spec, &cfg, Execution::Parallel).unwrap();
        assert_eq!(a, b);
    }
}
