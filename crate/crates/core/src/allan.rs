//! Allan-deviation stability analysis of sampled rate parameters.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Regularly sampled parameter: one value per interval of `tau_s` seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub values: Vec<f64>,
    /// Base sampling interval, s.
    pub tau_s: f64,
}

impl TimeSeries {
    pub fn new(values: Vec<f64>, tau_s: f64) -> Result<Self> {
        if tau_s <= 0.0 {
            return Err(Error::Domain(format!("tau {tau_s} s must be positive")));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("time series contains non-finite values".into()));
        }
        Ok(Self { values, tau_s })
    }

    pub fn duration_s(&self) -> f64 {
        self.values.len() as f64 * self.tau_s
    }
}

/// One Allan-deviation point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AllanPoint {
    pub averaging_time_s: f64,
    pub sigma: f64,
    /// Number of overlapping difference terms averaged.
    pub n_samples: usize,
}

/// Allan deviation versus averaging time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllanCurve {
    pub points: Vec<AllanPoint>,
}

impl AllanCurve {
    pub const CSV_HEADER: &'static str = "averaging_time_s,sigma,n_samples";

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for p in &self.points {
            out.push_str(&format!("{},{},{}\n", p.averaging_time_s, p.sigma, p.n_samples));
        }
        out
    }
}

/// Overlapping block-average two-sample deviation at averaging times N*tau:
/// sigma^2(N tau) = < (mean_{j+N..j+2N} - mean_{j..j+N})^2 > / 2 over all
/// overlapping start indices j.
pub fn allan_deviation(series: &TimeSeries, block_sizes: &[usize]) -> Result<AllanCurve> {
    if block_sizes.is_empty() {
        return Err(Error::Domain("empty block-size list".into()));
    }
    let m = series.values.len();
    let mut points = Vec::with_capacity(block_sizes.len());

    // prefix sums make each block mean O(1); differencing against the first
    // value keeps the sums well conditioned (a constant series is exactly 0)
    let baseline = series.values.first().copied().unwrap_or(0.0);
    let mut prefix = Vec::with_capacity(m + 1);
    prefix.push(0.0);
    for &v in &series.values {
        prefix.push(prefix.last().unwrap() + (v - baseline));
    }
    let block_mean = |start: usize, n: usize| (prefix[start + n] - prefix[start]) / n as f64;

    for &n in block_sizes {
        if n == 0 {
            return Err(Error::Domain("block size 0".into()));
        }
        if 2 * n > m {
            return Err(Error::Domain(format!(
                "block size {n} needs at least {} samples, series has {m}",
                2 * n
            )));
        }
        let terms = m - 2 * n + 1;
        let mut acc = 0.0;
        for j in 0..terms {
            let d = block_mean(j + n, n) - block_mean(j, n);
            acc += d * d;
        }
        points.push(AllanPoint {
            averaging_time_s: n as f64 * series.tau_s,
            sigma: (acc / (2.0 * terms as f64)).sqrt(),
            n_samples: terms,
        });
    }
    Ok(AllanCurve { points })
}

/// Default block-size ladder: powers of two up to a quarter of the series.
pub fn default_block_sizes(series_len: usize) -> Vec<usize> {
    let mut sizes = Vec::new();
    let mut n = 1;
    while 2 * n <= series_len && n <= series_len / 4 {
        sizes.push(n);
        n *= 2;
    }
    if sizes.is_empty() && series_len >= 2 {
        sizes.push(1);
    }
    sizes
}

/// Ordinary least-squares slope of log10(sigma) vs log10(T); points with
/// sigma <= 0 are excluded.
pub fn loglog_slope(curve: &AllanCurve) -> Result<f64> {
    let pts: Vec<(f64, f64)> = curve
        .points
        .iter()
        .filter(|p| p.sigma > 0.0 && p.averaging_time_s > 0.0)
        .map(|p| (p.averaging_time_s.log10(), p.sigma.log10()))
        .collect();
    if pts.len() < 2 {
        return Err(Error::FitFailure(format!(
            "log-log slope needs at least 2 positive points, got {}",
            pts.len()
        )));
    }
    let n = pts.len() as f64;
    let mean_x: f64 = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y: f64 = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mean_x).powi(2)).sum();
    if sxx < 1e-30 {
        return Err(Error::FitFailure("all averaging times equal".into()));
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mean_x) * (p.1 - mean_y)).sum();
    Ok(sxy / sxx)
}
