//! Seasonal-trend decomposition by loess.
//!
//! Inner loop: detrend, smooth each cycle-subseries (extended by one period
//! at both ends), low-pass filter the result, remove it from the seasonal
//! estimate, then smooth the deseasonalized series for the trend. Outer
//! passes recompute bisquare robustness weights from the remainder.
//!
//! All local regressions are degree 1 with tricube weights.

use std::io::Write;

use crate::demand::csv_io;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub trend: Vec<f64>,
    pub seasonal: Vec<f64>,
    pub residual: Vec<f64>,
    pub period: usize,
}

/// Window lengths and iteration counts. All windows are odd.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StlParams {
    pub period: usize,
    pub seasonal_window: usize,
    pub trend_window: usize,
    pub low_pass_window: usize,
    pub inner_iters: usize,
    pub robustness_iters: usize,
}

fn next_odd(x: f64) -> usize {
    let n = x.ceil().max(1.0) as usize;
    if n.is_multiple_of(2) {
        n + 1
    } else {
        n
    }
}

impl StlParams {
    pub fn new(period: usize, robustness_iters: usize) -> Self {
        let seasonal_window = 7;
        Self {
            period,
            seasonal_window,
            trend_window: next_odd(1.5 * period as f64 / (1.0 - 1.5 / seasonal_window as f64)),
            low_pass_window: next_odd(period as f64),
            inner_iters: 2,
            robustness_iters,
        }
    }
}

/// Decomposes `y` with the default windows for `period`.
pub fn decompose(y: &[f64], period: usize, robustness_iters: usize) -> Result<Decomposition> {
    decompose_with(y, &StlParams::new(period, robustness_iters))
}

pub fn decompose_with(y: &[f64], params: &StlParams) -> Result<Decomposition> {
    let np = params.period;
    let n = y.len();
    if np < 2 {
        return Err(Error::domain(format!("period must be >= 2, got {np}")));
    }
    if n < 2 * np {
        return Err(Error::domain(format!("series of length {n} is shorter than two periods of {np}")));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::domain("series contains non-finite values"));
    }
    for w in [params.seasonal_window, params.trend_window, params.low_pass_window] {
        if w < 3 || w % 2 == 0 {
            return Err(Error::domain(format!("loess windows must be odd and >= 3, got {w}")));
        }
    }

    let mut trend = vec![0.0; n];
    let mut seasonal = vec![0.0; n];
    let mut weights: Option<Vec<f64>> = None;

    for pass in 0..=params.robustness_iters {
        for _ in 0..params.inner_iters {
            inner_step(y, params, weights.as_deref(), &mut trend, &mut seasonal);
        }
        if pass < params.robustness_iters {
            weights = Some(robustness_weights(y, &trend, &seasonal));
        }
    }

    let residual = y.iter().zip(&trend).zip(&seasonal).map(|((y, t), s)| y - t - s).collect();
    Ok(Decomposition { trend, seasonal, residual, period: np })
}

fn inner_step(y: &[f64], p: &StlParams, rw: Option<&[f64]>, trend: &mut [f64], seasonal: &mut [f64]) {
    let n = y.len();
    let np = p.period;
    let detrended: Vec<f64> = y.iter().zip(trend.iter()).map(|(y, t)| y - t).collect();

    // cycle-subseries, extended by one point on each side: index k of
    // `cycle` is time k - np
    let mut cycle = vec![0.0; n + 2 * np];
    for j in 0..np {
        let sub: Vec<f64> = detrended.iter().skip(j).step_by(np).copied().collect();
        let sub_w: Option<Vec<f64>> = rw.map(|w| w.iter().skip(j).step_by(np).copied().collect());
        let m = sub.len();
        for k in 0..m + 2 {
            let at = k as f64 - 1.0;
            let v = loess_at(&sub, sub_w.as_deref(), p.seasonal_window, at)
                .unwrap_or_else(|| sub[(k.saturating_sub(1)).min(m - 1)]);
            cycle[j + k * np] = v;
        }
    }

    let low = moving_average(&moving_average(&moving_average(&cycle, np), np), 3);
    debug_assert_eq!(low.len(), n);
    let low: Vec<f64> = (0..n).map(|t| loess_at(&low, None, p.low_pass_window, t as f64).unwrap_or(low[t])).collect();

    for t in 0..n {
        seasonal[t] = cycle[t + np] - low[t];
    }
    let deseasonal: Vec<f64> = y.iter().zip(seasonal.iter()).map(|(y, s)| y - s).collect();
    for t in 0..n {
        trend[t] = loess_at(&deseasonal, rw, p.trend_window, t as f64).unwrap_or(deseasonal[t]);
    }
}

fn robustness_weights(y: &[f64], trend: &[f64], seasonal: &[f64]) -> Vec<f64> {
    let abs_r: Vec<f64> = (0..y.len()).map(|t| (y[t] - trend[t] - seasonal[t]).abs()).collect();
    let mut sorted = abs_r.clone();
    sorted.sort_by(f64::total_cmp);
    let m = sorted.len();
    let median = if m % 2 == 1 { sorted[m / 2] } else { 0.5 * (sorted[m / 2 - 1] + sorted[m / 2]) };
    let h = 6.0 * median;
    if h <= 0.0 {
        return vec![1.0; m];
    }
    abs_r
        .into_iter()
        .map(|r| {
            let u = r / h;
            if u < 1.0 {
                (1.0 - u * u).powi(2)
            } else {
                0.0
            }
        })
        .collect()
}

fn moving_average(x: &[f64], len: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(x.len() + 1 - len);
    let mut sum: f64 = x[..len].iter().sum();
    out.push(sum / len as f64);
    for i in len..x.len() {
        sum += x[i] - x[i - len];
        out.push(sum / len as f64);
    }
    out
}

/// Local linear fit of `y` (observed at 0, 1, ..) evaluated at `at`, using
/// the `window` nearest points with tricube weights. `None` when every
/// weight vanishes.
fn loess_at(y: &[f64], rw: Option<&[f64]>, window: usize, at: f64) -> Option<f64> {
    let n = y.len();
    let (left, right) = if window >= n {
        (0, n - 1)
    } else {
        let l = (at - (window as f64 - 1.0) / 2.0).round().clamp(0.0, (n - window) as f64) as usize;
        (l, l + window - 1)
    };
    let mut h = (at - left as f64).max(right as f64 - at);
    if window > n {
        h += ((window - n) / 2) as f64;
    }

    let mut sw = 0.0;
    let mut sx = 0.0;
    let mut sy = 0.0;
    let mut w = Vec::with_capacity(right - left + 1);
    for j in left..=right {
        let d = (j as f64 - at).abs();
        let mut wj = if h <= 0.0 || d <= 0.001 * h {
            1.0
        } else if d <= 0.999 * h {
            (1.0 - (d / h).powi(3)).powi(3)
        } else {
            0.0
        };
        if let Some(rw) = rw {
            wj *= rw[j];
        }
        sw += wj;
        sx += wj * j as f64;
        sy += wj * y[j];
        w.push(wj);
    }
    if sw <= 0.0 {
        return None;
    }
    let xbar = sx / sw;
    let ybar = sy / sw;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (k, j) in (left..=right).enumerate() {
        let dx = j as f64 - xbar;
        sxx += w[k] * dx * dx;
        sxy += w[k] * dx * (y[j] - ybar);
    }
    let range = (right - left) as f64;
    if sxx.sqrt() > 0.001 * range * sw.sqrt() && sxx > 0.0 {
        Some(ybar + sxy / sxx * (at - xbar))
    } else {
        Some(ybar)
    }
}

/// Writes `day,observed,trend,seasonal,residual`.
pub fn write_decomposition_csv<W: Write>(observed: &[f64], d: &Decomposition, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["day", "observed", "trend", "seasonal", "residual"]).map_err(csv_io)?;
    for (t, y) in observed.iter().enumerate() {
        w.write_record([
            t.to_string(),
            y.to_string(),
            d.trend[t].to_string(),
            d.seasonal[t].to_string(),
            d.residual[t].to_string(),
        ])
        .map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}
