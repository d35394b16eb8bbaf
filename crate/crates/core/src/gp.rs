//! Gaussian process regression with half-integer Matérn kernels.
//!
//! Inputs are min-max normalized per dimension and outputs standardized
//! before fitting; kernel hyperparameters live in that normalized space.
//! The posterior mean is the prior mean plus a data-driven correction
//! `k(x, X) (K + s I)^-1 (y - m)`, scaled by `conditioning_scale`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Nu {
    #[serde(rename = "0.5")]
    Half,
    #[serde(rename = "1.5")]
    ThreeHalves,
    #[default]
    #[serde(rename = "2.5")]
    FiveHalves,
}

impl Nu {
    pub fn value(self) -> f64 {
        match self {
            Nu::Half => 0.5,
            Nu::ThreeHalves => 1.5,
            Nu::FiveHalves => 2.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelConfig {
    pub nu: Nu,
    pub length_scale: f64,
    pub signal_variance: f64,
    pub noise_variance: f64,
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self { nu: Nu::FiveHalves, length_scale: 0.2, signal_variance: 1.0, noise_variance: 1e-6 }
    }
}

impl KernelConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.length_scale > 0.0) || !(self.signal_variance > 0.0) || !(self.noise_variance >= 0.0) {
            return Err(Error::domain(format!("invalid kernel hyperparameters {self:?}")));
        }
        Ok(())
    }

    fn eval_distance(&self, d: f64) -> f64 {
        let r = d / self.length_scale;
        let s2 = self.signal_variance;
        match self.nu {
            Nu::Half => s2 * (-r).exp(),
            Nu::ThreeHalves => {
                let a = 3f64.sqrt() * r;
                s2 * (1.0 + a) * (-a).exp()
            }
            Nu::FiveHalves => {
                let a = 5f64.sqrt() * r;
                s2 * (1.0 + a + 5.0 * r * r / 3.0) * (-a).exp()
            }
        }
    }
}

/// Hyperparameter choice for [`fit`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelChoice {
    Fixed(KernelConfig),
    /// Length scale and noise picked by maximizing the log marginal
    /// likelihood; signal variance stays 1 in standardized units.
    Auto(Nu),
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

pub fn matern(x1: &[f64], x2: &[f64], cfg: &KernelConfig) -> Result<f64> {
    if x1.len() != x2.len() {
        return Err(Error::domain(format!("dimension mismatch: {} vs {}", x1.len(), x2.len())));
    }
    Ok(cfg.eval_distance(euclidean(x1, x2)))
}

/// In-place lower Cholesky factor of the row-major `n x n` matrix `a`.
fn cholesky(a: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if !(s > 0.0) {
                    return None;
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    Some(l)
}

fn forward_solve(l: &[f64], n: usize, b: &[f64]) -> Vec<f64> {
    let mut x = b.to_vec();
    for i in 0..n {
        let mut s = x[i];
        for k in 0..i {
            s -= l[i * n + k] * x[k];
        }
        x[i] = s / l[i * n + i];
    }
    x
}

fn backward_solve(l: &[f64], n: usize, b: &[f64]) -> Vec<f64> {
    let mut x = b.to_vec();
    for i in (0..n).rev() {
        let mut s = x[i];
        for k in i + 1..n {
            s -= l[k * n + i] * x[k];
        }
        x[i] = s / l[i * n + i];
    }
    x
}

const JITTER_START: f64 = 1e-8;
const JITTER_MAX: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GpModel {
    /// Normalized training inputs.
    pub train_x: Vec<Vec<f64>>,
    /// Standardized training outputs.
    pub train_y: Vec<f64>,
    pub kernel: KernelConfig,
    /// Constant prior mean in standardized units.
    pub prior_mean: f64,
    pub conditioning_scale: f64,
    /// Jitter added to the diagonal on top of the noise variance.
    pub jitter: f64,
    x_min: Vec<f64>,
    x_range: Vec<f64>,
    y_mean: f64,
    y_scale: f64,
    #[serde(skip)]
    chol: Vec<f64>,
    #[serde(skip)]
    alpha: Vec<f64>,
}

struct Prepared {
    x: Vec<Vec<f64>>,
    y: Vec<f64>,
    x_min: Vec<f64>,
    x_range: Vec<f64>,
    y_mean: f64,
    y_scale: f64,
}

fn prepare(points: &[(Vec<f64>, f64)]) -> Result<Prepared> {
    let Some((first, _)) = points.first() else {
        return Err(Error::validation("GP fit needs at least one point"));
    };
    let d = first.len();
    if d == 0 {
        return Err(Error::validation("GP inputs must have at least one dimension"));
    }
    for (x, y) in points {
        if x.len() != d {
            return Err(Error::validation("GP inputs have inconsistent dimensions"));
        }
        if !y.is_finite() || x.iter().any(|v| !v.is_finite()) {
            return Err(Error::validation("GP training data must be finite"));
        }
    }
    let x_min: Vec<f64> = (0..d).map(|j| points.iter().map(|p| p.0[j]).fold(f64::INFINITY, f64::min)).collect();
    let x_range: Vec<f64> = (0..d)
        .map(|j| {
            let max = points.iter().map(|p| p.0[j]).fold(f64::NEG_INFINITY, f64::max);
            let r = max - x_min[j];
            if r > 0.0 {
                r
            } else {
                1.0
            }
        })
        .collect();
    let x: Vec<Vec<f64>> =
        points.iter().map(|(x, _)| x.iter().enumerate().map(|(j, v)| (v - x_min[j]) / x_range[j]).collect()).collect();
    for i in 0..x.len() {
        for j in 0..i {
            if euclidean(&x[i], &x[j]) < 1e-12 {
                return Err(Error::validation(format!("duplicate GP inputs at positions {j} and {i}")));
            }
        }
    }

    let n = points.len() as f64;
    let y_mean = points.iter().map(|p| p.1).sum::<f64>() / n;
    let var = points.iter().map(|p| (p.1 - y_mean).powi(2)).sum::<f64>() / n;
    let y_scale = if var.sqrt() > 1e-12 * y_mean.abs().max(1.0) { var.sqrt() } else { 1.0 };
    let y = points.iter().map(|p| (p.1 - y_mean) / y_scale).collect();
    Ok(Prepared { x, y, x_min, x_range, y_mean, y_scale })
}

fn covariance(x: &[Vec<f64>], cfg: &KernelConfig) -> Vec<f64> {
    let n = x.len();
    let mut k = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let v = cfg.eval_distance(euclidean(&x[i], &x[j]));
            k[i * n + j] = v;
            k[j * n + i] = v;
        }
        k[i * n + i] += cfg.noise_variance;
    }
    k
}

/// Factorizes `k`, escalating diagonal jitter by decades until it succeeds.
fn factorize(k: &[f64], n: usize) -> Result<(Vec<f64>, f64)> {
    if let Some(l) = cholesky(k, n) {
        return Ok((l, 0.0));
    }
    let mut jitter = JITTER_START;
    while jitter <= JITTER_MAX * (1.0 + 1e-9) {
        let mut kj = k.to_vec();
        for i in 0..n {
            kj[i * n + i] += jitter;
        }
        if let Some(l) = cholesky(&kj, n) {
            return Ok((l, jitter));
        }
        jitter *= 10.0;
    }
    Err(Error::Numerical(format!("covariance not positive definite even with jitter {JITTER_MAX}")))
}

struct Factored {
    chol: Vec<f64>,
    alpha: Vec<f64>,
    jitter: f64,
    lml: f64,
}

fn factor_and_solve(x: &[Vec<f64>], y: &[f64], prior_mean: f64, cfg: &KernelConfig) -> Result<Factored> {
    let n = x.len();
    let (chol, jitter) = factorize(&covariance(x, cfg), n)?;
    let centered: Vec<f64> = y.iter().map(|v| v - prior_mean).collect();
    let z = forward_solve(&chol, n, &centered);
    let alpha = backward_solve(&chol, n, &z);
    let log_det: f64 = (0..n).map(|i| chol[i * n + i].ln()).sum();
    let lml =
        -0.5 * z.iter().map(|v| v * v).sum::<f64>() - log_det - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln();
    Ok(Factored { chol, alpha, jitter, lml })
}

/// Log marginal likelihood of the (normalized, standardized) data under
/// `cfg` with a zero prior mean.
pub fn log_marginal_likelihood(points: &[(Vec<f64>, f64)], cfg: &KernelConfig) -> Result<f64> {
    cfg.validate()?;
    let p = prepare(points)?;
    Ok(factor_and_solve(&p.x, &p.y, 0.0, cfg)?.lml)
}

const LOG_LENGTH_BOUNDS: (f64, f64) = (-3.0, 2.0);
const LOG_NOISE_BOUNDS: (f64, f64) = (-10.0, 1.0);

/// The log-spaced (length scale, noise variance) grid scanned by
/// [`KernelChoice::Auto`] before local refinement.
pub fn auto_search_grid() -> Vec<(f64, f64)> {
    let lengths = (0..=12).map(|i| 10f64.powf(-2.0 + 0.25 * f64::from(i)));
    lengths.flat_map(|l| (0..=8).map(move |j| (l, 10f64.powi(-8 + j)))).collect()
}

fn select_hyperparameters(p: &Prepared, nu: Nu) -> KernelConfig {
    let make = |log_l: f64, log_n: f64| KernelConfig {
        nu,
        length_scale: 10f64.powf(log_l),
        signal_variance: 1.0,
        noise_variance: 10f64.powf(log_n),
    };
    let score = |cfg: &KernelConfig| factor_and_solve(&p.x, &p.y, 0.0, cfg).map_or(f64::NEG_INFINITY, |f| f.lml);

    let mut scored: Vec<(f64, f64, f64)> = auto_search_grid()
        .into_iter()
        .map(|(l, n)| {
            let cfg = KernelConfig { nu, length_scale: l, signal_variance: 1.0, noise_variance: n };
            (l.log10(), n.log10(), score(&cfg))
        })
        .collect();
    scored.sort_by(|a, b| b.2.total_cmp(&a.2));

    let mut best = scored[0];
    for &(mut ll, mut ln, mut s) in scored.iter().take(3) {
        let mut step = 0.125;
        while step >= 1.0 / 64.0 {
            let mut moved = false;
            for (dl, dn) in [(step, 0.0), (-step, 0.0), (0.0, step), (0.0, -step)] {
                let cl = (ll + dl).clamp(LOG_LENGTH_BOUNDS.0, LOG_LENGTH_BOUNDS.1);
                let cn = (ln + dn).clamp(LOG_NOISE_BOUNDS.0, LOG_NOISE_BOUNDS.1);
                let cs = score(&make(cl, cn));
                if cs > s {
                    (ll, ln, s) = (cl, cn, cs);
                    moved = true;
                }
            }
            if !moved {
                step /= 2.0;
            }
        }
        if s > best.2 {
            best = (ll, ln, s);
        }
    }
    make(best.0, best.1)
}

pub fn fit(points: &[(Vec<f64>, f64)], choice: KernelChoice) -> Result<GpModel> {
    let p = prepare(points)?;
    let kernel = match choice {
        KernelChoice::Fixed(cfg) => {
            cfg.validate()?;
            cfg
        }
        KernelChoice::Auto(nu) => select_hyperparameters(&p, nu),
    };
    let prior_mean = 0.0;
    let f = factor_and_solve(&p.x, &p.y, prior_mean, &kernel)?;
    Ok(GpModel {
        train_x: p.x,
        train_y: p.y,
        kernel,
        prior_mean,
        conditioning_scale: 1.0,
        jitter: f.jitter,
        x_min: p.x_min,
        x_range: p.x_range,
        y_mean: p.y_mean,
        y_scale: p.y_scale,
        chol: f.chol,
        alpha: f.alpha,
    })
}

impl GpModel {
    pub fn len(&self) -> usize {
        self.train_y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.train_y.is_empty()
    }

    pub fn with_conditioning_scale(mut self, scale: f64) -> Self {
        self.conditioning_scale = scale;
        self
    }

    /// Prior mean in original output units.
    pub fn prior_mean_original(&self) -> f64 {
        self.y_mean + self.prior_mean * self.y_scale
    }

    /// Output scale used to standardize the training targets.
    pub fn output_scale(&self) -> f64 {
        self.y_scale
    }

    pub fn normalize(&self, x: &[f64]) -> Vec<f64> {
        x.iter().enumerate().map(|(j, v)| (v - self.x_min[j]) / self.x_range[j]).collect()
    }

    pub fn log_marginal_likelihood(&self) -> f64 {
        let n = self.len();
        let centered: Vec<f64> = self.train_y.iter().map(|v| v - self.prior_mean).collect();
        let fit: f64 = centered.iter().zip(&self.alpha).map(|(a, b)| a * b).sum();
        let log_det: f64 = (0..n).map(|i| self.chol[i * n + i].ln()).sum();
        -0.5 * fit - log_det - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln()
    }

    /// Largest absolute entry of `L L^T - (K + (noise + jitter) I)`.
    pub fn factorization_residual(&self) -> f64 {
        let n = self.len();
        let mut k = covariance(&self.train_x, &self.kernel);
        for i in 0..n {
            k[i * n + i] += self.jitter;
        }
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let llt: f64 = (0..n).map(|m| self.chol[i * n + m] * self.chol[j * n + m]).sum();
                worst = worst.max((llt - k[i * n + j]).abs());
            }
        }
        worst
    }

    /// Predictive mean and standard deviation at `x` (original units),
    /// plus the variance before clamping at zero, in standardized units.
    pub fn predict_raw(&self, x: &[f64]) -> (f64, f64, f64) {
        let xn = self.normalize(x);
        let n = self.len();
        let kx: Vec<f64> = self.train_x.iter().map(|xi| self.kernel.eval_distance(euclidean(&xn, xi))).collect();
        let correction: f64 = kx.iter().zip(&self.alpha).map(|(a, b)| a * b).sum();
        let mean = self.prior_mean + self.conditioning_scale * correction;
        let v = forward_solve(&self.chol, n, &kx);
        let var = self.kernel.signal_variance - v.iter().map(|t| t * t).sum::<f64>();
        (self.y_mean + mean * self.y_scale, var.max(0.0).sqrt() * self.y_scale, var)
    }

    pub fn predict(&self, x: &[f64]) -> (f64, f64) {
        let (m, s, _) = self.predict_raw(x);
        (m, s)
    }

    /// Diagnostic JSON dump (training data and kernel).
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixed(nu: Nu, l: f64, noise: f64) -> KernelChoice {
        KernelChoice::Fixed(KernelConfig { nu, length_scale: l, signal_variance: 1.0, noise_variance: noise })
    }

    #[test]
    fn kernel_at_zero_distance_is_signal_variance() {
        for nu in [Nu::Half, Nu::ThreeHalves, Nu::FiveHalves] {
            let cfg = KernelConfig { nu, length_scale: 0.7, signal_variance: 2.5, noise_variance: 0.0 };
            assert_eq!(matern(&[0.3, 1.0], &[0.3, 1.0], &cfg).unwrap(), 2.5);
        }
    }

    #[test]
    fn exponential_kernel_at_one_length_scale() {
        let cfg = KernelConfig { nu: Nu::Half, length_scale: 2.0, signal_variance: 1.0, noise_variance: 0.0 };
        let k = matern(&[0.0], &[2.0], &cfg).unwrap();
        assert!((k - 0.367_879_441_171_442_3).abs() < 1e-12);
    }

    #[test]
    fn kernel_dimension_mismatch() {
        assert!(matches!(matern(&[0.0], &[0.0, 1.0], &KernelConfig::default()), Err(Error::Domain(_))));
    }

    #[test]
    fn single_point_interpolates() {
        let m = fit(&[(vec![3.0], 7.5)], fixed(Nu::FiveHalves, 0.3, 0.0)).unwrap();
        let (mean, std) = m.predict(&[3.0]);
        assert!((mean - 7.5).abs() < 1e-8);
        assert!(std < 1e-8);
    }

    #[test]
    fn constant_targets() {
        let pts: Vec<_> = (0..6).map(|i| (vec![f64::from(i)], 4.0)).collect();
        let m = fit(&pts, KernelChoice::Auto(Nu::FiveHalves)).unwrap();
        for x in [-3.0, 0.5, 2.2, 9.0] {
            assert!((m.predict(&[x]).0 - 4.0).abs() < 1e-6);
        }
    }

    #[test]
    fn duplicates_rejected() {
        let pts = vec![(vec![1.0], 1.0), (vec![1.0], 2.0)];
        assert!(matches!(fit(&pts, fixed(Nu::Half, 0.1, 0.0)), Err(Error::Validation(_))));
    }

    #[test]
    fn reverts_to_prior_far_away() {
        let pts = vec![(vec![0.0], 1.0), (vec![1.0], 3.0), (vec![2.0], 2.0)];
        let m = fit(&pts, fixed(Nu::FiveHalves, 0.1, 1e-8)).unwrap();
        let (mean, std) = m.predict(&[1e4]);
        assert!((mean - 2.0).abs() < 1e-9);
        assert!((std - m.output_scale()).abs() < 1e-9);
    }

    #[test]
    fn symmetric_midpoint() {
        let pts = vec![(vec![-1.0], -1.0), (vec![1.0], 1.0)];
        let m = fit(&pts, fixed(Nu::ThreeHalves, 0.5, 1e-6)).unwrap();
        assert!(m.predict(&[0.0]).0.abs() < 1e-6);
    }

    #[test]
    fn factorization_residual_small() {
        let pts: Vec<_> = (0..8).map(|i| (vec![f64::from(i) * 0.37], f64::from(i).sin())).collect();
        let m = fit(&pts, KernelChoice::Auto(Nu::FiveHalves)).unwrap();
        assert!(m.factorization_residual() < 1e-6);
    }

    #[test]
    fn jitter_rescues_near_singular_covariance() {
        // nearly coincident inputs with a very long length scale
        let pts: Vec<_> = (0..6).map(|i| (vec![f64::from(i) * 1e-3], f64::from(i))).collect();
        let m = fit(&pts, fixed(Nu::FiveHalves, 1e3, 0.0)).unwrap();
        assert!(m.jitter > 0.0 && m.jitter <= 1e-4);
    }

    #[test]
    fn json_dump_has_training_data() {
        let m = fit(&[(vec![0.0], 1.0), (vec![1.0], 2.0)], fixed(Nu::Half, 0.3, 0.01)).unwrap();
        let v: serde_json::Value = serde_json::from_str(&m.to_json()).unwrap();
        assert_eq!(v["train_x"].as_array().unwrap().len(), 2);
        assert_eq!(v["kernel"]["nu"], "0.5");
    }
}
