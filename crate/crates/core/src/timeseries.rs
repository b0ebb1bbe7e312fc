//! Time-series container and preprocessing: block averaging, quantile
//! trimming, window slicing and lagged increment extraction.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Timestamped observations (seconds since epoch, log-price values).
///
/// Timestamps are strictly increasing, values finite, and the series has at
/// least two records.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    timestamps: Vec<f64>,
    values: Vec<f64>,
    label: String,
}

impl TimeSeries {
    pub fn new(timestamps: Vec<f64>, values: Vec<f64>, label: impl Into<String>) -> Result<Self> {
        if timestamps.len() != values.len() {
            return Err(Error::InvalidSeries(format!(
                "{} timestamps but {} values",
                timestamps.len(),
                values.len()
            )));
        }
        if timestamps.len() < 2 {
            return Err(Error::InvalidSeries(format!(
                "length {} < 2",
                timestamps.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidSeries(format!(
                "non-finite value at index {i}"
            )));
        }
        if let Some(i) = timestamps.iter().position(|t| !t.is_finite()) {
            return Err(Error::InvalidSeries(format!(
                "non-finite timestamp at index {i}"
            )));
        }
        if let Some(i) = timestamps.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::InvalidSeries(format!(
                "timestamps not strictly increasing at index {}",
                i + 1
            )));
        }
        Ok(Self {
            timestamps,
            values,
            label: label.into(),
        })
    }

    pub fn timestamps(&self) -> &[f64] {
        &self.timestamps
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn start(&self) -> f64 {
        self.timestamps[0]
    }

    pub fn end(&self) -> f64 {
        self.timestamps[self.timestamps.len() - 1]
    }

    /// Keeps every `stride`-th record starting at the first.
    pub fn stride(&self, stride: usize) -> Result<Self> {
        if stride == 0 {
            return Err(Error::Config("stride must be >= 1".into()));
        }
        let timestamps = self.timestamps.iter().copied().step_by(stride).collect();
        let values = self.values.iter().copied().step_by(stride).collect();
        Self::new(timestamps, values, self.label.clone())
    }

    /// Median of consecutive timestamp differences.
    pub fn median_spacing(&self) -> f64 {
        let mut deltas: Vec<f64> = self.timestamps.windows(2).map(|w| w[1] - w[0]).collect();
        deltas.sort_by(f64::total_cmp);
        let n = deltas.len();
        if n % 2 == 1 {
            deltas[n / 2]
        } else {
            0.5 * (deltas[n / 2 - 1] + deltas[n / 2])
        }
    }

    /// Rebuilds a series from filtered parts; callers guarantee ordering.
    fn derive_series(&self, timestamps: Vec<f64>, values: Vec<f64>, what: &str) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InsufficientData(format!("{what}: no records left")));
        }
        if values.len() < 2 {
            return Err(Error::InsufficientData(format!(
                "{what}: only one record left"
            )));
        }
        Ok(Self {
            timestamps,
            values,
            label: self.label.clone(),
        })
    }
}

/// Preprocessing parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PreprocessConfig {
    pub block_size: usize,
    pub trim_lower_q: f64,
    pub trim_upper_q: f64,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            block_size: 15,
            trim_lower_q: 0.005,
            trim_upper_q: 0.005,
        }
    }
}

impl PreprocessConfig {
    pub fn validate(&self) -> Result<()> {
        if self.block_size == 0 {
            return Err(Error::Config("block_size must be >= 1".into()));
        }
        validate_trim(self.trim_lower_q, self.trim_upper_q)
    }

    /// Block averaging followed by quantile trimming.
    pub fn apply(&self, ts: &TimeSeries) -> Result<TimeSeries> {
        self.validate()?;
        let averaged = block_average(ts, self.block_size)?;
        trim_quantiles(&averaged, self.trim_lower_q, self.trim_upper_q)
    }
}

fn validate_trim(lower_q: f64, upper_q: f64) -> Result<()> {
    let ok = |q: f64| (0.0..0.5).contains(&q);
    if !ok(lower_q) || !ok(upper_q) {
        return Err(Error::Config(format!(
            "trim quantiles must lie in [0, 0.5), got {lower_q} and {upper_q}"
        )));
    }
    if lower_q + upper_q >= 1.0 {
        return Err(Error::Config(
            "trim_lower_q + trim_upper_q must be < 1".into(),
        ));
    }
    Ok(())
}

/// Means of non-overlapping `block_size` chunks of paired slices; a
/// trailing partial chunk is dropped.
pub fn block_means(timestamps: &[f64], values: &[f64], block_size: usize) -> (Vec<f64>, Vec<f64>) {
    let mean = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len() as f64;
    (
        timestamps.chunks_exact(block_size).map(mean).collect(),
        values.chunks_exact(block_size).map(mean).collect(),
    )
}

/// Averages non-overlapping blocks of `block_size` records; a trailing
/// partial block is dropped.
pub fn block_average(ts: &TimeSeries, block_size: usize) -> Result<TimeSeries> {
    if block_size == 0 {
        return Err(Error::Config("block_size must be >= 1".into()));
    }
    if block_size == 1 {
        return Ok(ts.clone());
    }
    if ts.len() < block_size {
        return Err(Error::InsufficientData(format!(
            "{} records cannot fill a block of {block_size}",
            ts.len()
        )));
    }
    let (timestamps, values) = block_means(&ts.timestamps, &ts.values, block_size);
    ts.derive_series(timestamps, values, "block_average")
}

/// Empirical quantile with linear interpolation between order statistics
/// (`sorted` must be ascending and non-empty).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    let frac = h - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Value bounds produced by quantile trimming.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrimBounds {
    pub lower: f64,
    pub upper: f64,
}

impl TrimBounds {
    pub fn from_quantiles(ts: &TimeSeries, lower_q: f64, upper_q: f64) -> Result<Self> {
        validate_trim(lower_q, upper_q)?;
        let mut sorted = ts.values.clone();
        sorted.sort_by(f64::total_cmp);
        Ok(Self {
            lower: quantile_sorted(&sorted, lower_q),
            upper: quantile_sorted(&sorted, 1.0 - upper_q),
        })
    }

    /// Drops records strictly outside `[lower, upper]`, keeping order.
    pub fn apply(&self, ts: &TimeSeries) -> Result<TimeSeries> {
        let (timestamps, values): (Vec<f64>, Vec<f64>) = ts
            .timestamps
            .iter()
            .zip(&ts.values)
            .filter(|(_, &v)| v >= self.lower && v <= self.upper)
            .map(|(&t, &v)| (t, v))
            .unzip();
        ts.derive_series(timestamps, values, "trim_quantiles")
    }
}

/// Removes records whose value lies strictly below the `lower_q` quantile
/// or strictly above the `1 - upper_q` quantile.
pub fn trim_quantiles(ts: &TimeSeries, lower_q: f64, upper_q: f64) -> Result<TimeSeries> {
    if lower_q == 0.0 && upper_q == 0.0 {
        return Ok(ts.clone());
    }
    TrimBounds::from_quantiles(ts, lower_q, upper_q)?.apply(ts)
}

/// Records with `start <= t < end`.
pub fn slice_window(ts: &TimeSeries, start: f64, end: f64) -> Result<TimeSeries> {
    if !(start < end) {
        return Err(Error::Config(format!(
            "window start {start} must be < end {end}"
        )));
    }
    let lo = ts.timestamps.partition_point(|&t| t < start);
    let hi = ts.timestamps.partition_point(|&t| t < end);
    if lo >= hi {
        return Err(Error::InsufficientData(format!(
            "window [{start}, {end}) contains no records"
        )));
    }
    ts.derive_series(
        ts.timestamps[lo..hi].to_vec(),
        ts.values[lo..hi].to_vec(),
        "slice_window",
    )
}

/// Paired (state, increment, elapsed) records at a fixed index stride.
#[derive(Debug, Clone, PartialEq)]
pub struct IncrementSample {
    pub states: Vec<f64>,
    pub increments: Vec<f64>,
    pub elapsed: Vec<f64>,
    pub mean_dt: f64,
    pub lag_steps: usize,
}

impl IncrementSample {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

/// Overlapping increments `v[i + lag] - v[i]` for every origin index.
pub fn make_increments(ts: &TimeSeries, lag_steps: usize) -> Result<IncrementSample> {
    if lag_steps == 0 {
        return Err(Error::Config("lag_steps must be >= 1".into()));
    }
    let n = ts.len();
    if n <= lag_steps {
        return Err(Error::InsufficientData(format!(
            "series of length {n} too short for lag {lag_steps}"
        )));
    }
    let m = n - lag_steps;
    let states = ts.values[..m].to_vec();
    let increments: Vec<f64> = (0..m)
        .map(|i| ts.values[i + lag_steps] - ts.values[i])
        .collect();
    let elapsed: Vec<f64> = (0..m)
        .map(|i| ts.timestamps[i + lag_steps] - ts.timestamps[i])
        .collect();
    let mean_dt = elapsed.iter().sum::<f64>() / m as f64;
    Ok(IncrementSample {
        states,
        increments,
        elapsed,
        mean_dt,
        lag_steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn series(values: Vec<f64>) -> TimeSeries {
        let ts = (0..values.len()).map(|i| i as f64 * 100.0).collect();
        TimeSeries::new(ts, values, "t").unwrap()
    }

    #[test]
    fn rejects_bad_series() {
        assert!(TimeSeries::new(vec![0.0], vec![1.0], "").is_err());
        assert!(TimeSeries::new(vec![0.0, 0.0], vec![1.0, 2.0], "").is_err());
        assert!(TimeSeries::new(vec![0.0, 1.0], vec![1.0, f64::NAN], "").is_err());
        assert!(TimeSeries::new(vec![0.0, 1.0], vec![1.0], "").is_err());
    }

    #[test]
    fn block_average_identity_and_mean() {
        let ts = series(vec![1.0, 5.0, 2.0]);
        assert_eq!(block_average(&ts, 1).unwrap(), ts);

        let ts = TimeSeries::new(
            vec![0.0, 10.0, 20.0, 30.0, 40.0, 50.0],
            vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0],
            "",
        )
        .unwrap();
        let out = block_average(&ts, 3).unwrap();
        assert_eq!(out.timestamps(), &[10.0, 40.0]);
        assert_eq!(out.values(), &[2.0, 5.0]);
    }

    #[test]
    fn block_average_single_block() {
        let (t, v) = block_means(&[0.0, 10.0, 20.0], &[1.0, 2.0, 3.0], 3);
        assert_eq!((t, v), (vec![10.0], vec![2.0]));
        // a one-record result is below the series minimum length
        let ts = TimeSeries::new(vec![0.0, 10.0, 20.0], vec![1.0, 2.0, 3.0], "").unwrap();
        match block_average(&ts, 3) {
            Err(Error::InsufficientData(msg)) => assert!(msg.contains("one record")),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            block_average(&ts, 4),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn trim_uniform_thousand() {
        let ts = series((1..=1000).map(f64::from).collect());
        let bounds = TrimBounds::from_quantiles(&ts, 0.005, 0.005).unwrap();
        // brute force: h = 999 * q, interpolate between order statistics
        assert!((bounds.lower - 5.995).abs() < 1e-9);
        assert!((bounds.upper - 995.005).abs() < 1e-9);
        let out = trim_quantiles(&ts, 0.005, 0.005).unwrap();
        assert_eq!(out.len(), 990);
        assert_eq!(out.values()[0], 6.0);
        assert_eq!(*out.values().last().unwrap(), 995.0);
    }

    #[test]
    fn trim_noop_and_constant() {
        let ts = series(vec![3.0, 1.0, 2.0, 9.0]);
        assert_eq!(trim_quantiles(&ts, 0.0, 0.0).unwrap(), ts);
        let c = series(vec![2.5; 50]);
        assert_eq!(trim_quantiles(&c, 0.2, 0.3).unwrap(), c);
        assert!(trim_quantiles(&ts, 0.5, 0.1).is_err());
    }

    #[test]
    fn slice_window_cases() {
        let ts = series((0..10).map(f64::from).collect());
        assert_eq!(slice_window(&ts, 0.0, 1e9).unwrap(), ts);
        assert!(matches!(
            slice_window(&ts, 5000.0, 6000.0),
            Err(Error::InsufficientData(_))
        ));
        assert!(slice_window(&ts, 5.0, 5.0).is_err());
        let w = slice_window(&ts, 200.0, 500.0).unwrap();
        assert_eq!(w.timestamps(), &[200.0, 300.0, 400.0]);
    }

    #[test]
    fn windows_partition_the_series() {
        // twelve "months" of 30 days at 100 s spacing, six 2-month windows
        let month = 30.0 * 86_400.0;
        let n = (12.0 * month / 100.0) as usize;
        let ts = TimeSeries::new(
            (0..n).map(|i| i as f64 * 100.0).collect(),
            (0..n).map(|i| (i as f64 * 1e-3).sin()).collect(),
            "",
        )
        .unwrap();
        let total: usize = (0..6)
            .map(|k| {
                slice_window(&ts, 2.0 * month * k as f64, 2.0 * month * (k + 1) as f64)
                    .unwrap()
                    .len()
            })
            .sum();
        assert_eq!(total, n);
    }

    #[test]
    fn increments_direct_arithmetic() {
        let ts = TimeSeries::new(vec![0.0, 100.0, 200.0], vec![0.0, 1.0, 3.0], "").unwrap();
        let s = make_increments(&ts, 1).unwrap();
        assert_eq!(s.states, vec![0.0, 1.0]);
        assert_eq!(s.increments, vec![1.0, 2.0]);
        assert_eq!(s.mean_dt, 100.0);
        assert!(make_increments(&ts, 3).is_err());
        assert!(make_increments(&ts, 0).is_err());

        let c = series(vec![4.0; 20]);
        assert!(make_increments(&c, 5)
            .unwrap()
            .increments
            .iter()
            .all(|&d| d == 0.0));
    }

    #[test]
    fn hundred_second_records_at_lag_six_give_ten_minutes() {
        let n = 5000;
        let t: Vec<f64> = (0..n)
            .map(|i| i as f64 * 100.0 + if i % 2 == 0 { 0.0 } else { 7.0 })
            .collect();
        let ts = TimeSeries::new(t, vec![0.0; n], "").unwrap();
        let s = make_increments(&ts, 6).unwrap();
        assert!((s.mean_dt - 600.0).abs() < 1.0);
    }

    #[test]
    fn median_spacing_even_and_odd() {
        let ts = TimeSeries::new(vec![0.0, 1.0, 3.0, 6.0], vec![0.0; 4], "").unwrap();
        assert_eq!(ts.median_spacing(), 2.0);
        let ts = TimeSeries::new(vec![0.0, 1.0, 3.0], vec![0.0; 3], "").unwrap();
        assert_eq!(ts.median_spacing(), 1.5);
    }

    fn arb_series() -> impl Strategy<Value = TimeSeries> {
        prop::collection::vec((0.1f64..50.0, -5.0f64..5.0), 2..300).prop_map(|pairs| {
            let mut t = 0.0;
            let (ts, vs): (Vec<f64>, Vec<f64>) = pairs
                .into_iter()
                .map(|(dt, v)| {
                    t += dt;
                    (t, v)
                })
                .unzip();
            TimeSeries::new(ts, vs, "p").unwrap()
        })
    }

    proptest! {
        #[test]
        fn block_average_length(ts in arb_series(), block in 1usize..20) {
            let expected = ts.len() / block;
            match block_average(&ts, block) {
                Ok(out) => {
                    prop_assert_eq!(out.len(), expected);
                    prop_assert!(out.timestamps().windows(2).all(|w| w[1] > w[0]));
                }
                Err(_) => prop_assert!(expected < 2),
            }
        }

        #[test]
        fn same_bounds_reapplied_change_nothing(ts in arb_series(), q in 0.0f64..0.2) {
            let bounds = TrimBounds::from_quantiles(&ts, q, q).unwrap();
            if let Ok(once) = bounds.apply(&ts) {
                prop_assert_eq!(bounds.apply(&once).unwrap(), once.clone());
                prop_assert!(once.timestamps().windows(2).all(|w| w[1] > w[0]));
            }
        }

        #[test]
        fn increment_lag_composes_with_stride(ts in arb_series(), a in 1usize..4, b in 1usize..4) {
            let strided = ts.stride(b);
            prop_assume!(strided.is_ok());
            let strided = strided.unwrap();
            prop_assume!(strided.len() > a);
            let lhs = make_increments(&strided, a).unwrap();
            let rhs = make_increments(&ts, a * b).unwrap();
            // origins of the strided sample are every b-th origin of the full one
            for (k, (&s, &d)) in lhs.states.iter().zip(&lhs.increments).enumerate() {
                prop_assert_eq!(s, rhs.states[k * b]);
                prop_assert_eq!(d, rhs.increments[k * b]);
                prop_assert_eq!(lhs.elapsed[k], rhs.elapsed[k * b]);
            }
        }
    }
}
