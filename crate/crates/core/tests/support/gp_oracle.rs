// Dense-solve reference for GP regression: normalizes and standardizes the
// data itself, builds the covariance with nalgebra, and solves with LU.

use nalgebra::{DMatrix, DVector};

fn kernel(nu: f64, l: f64, sf2: f64, d: f64) -> f64 {
    let r = d / l;
    if nu == 0.5 {
        sf2 * (-r).exp()
    } else if nu == 1.5 {
        let s = 3f64.sqrt() * r;
        sf2 * (1.0 + s) * (-s).exp()
    } else {
        let s = 5f64.sqrt() * r;
        sf2 * (1.0 + s + 5.0 * r * r / 3.0) * (-s).exp()
    }
}

pub struct Oracle {
    x: Vec<Vec<f64>>,
    lo: Vec<f64>,
    span: Vec<f64>,
    y_mean: f64,
    y_sd: f64,
    weights: DVector<f64>,
    gram: DMatrix<f64>,
    nu: f64,
    l: f64,
    sf2: f64,
}

impl Oracle {
    pub fn new(points: &[(Vec<f64>, f64)], nu: f64, l: f64, sf2: f64, noise: f64) -> Self {
        let n = points.len();
        let d = points[0].0.len();
        let lo: Vec<f64> = (0..d).map(|j| points.iter().map(|p| p.0[j]).fold(f64::MAX, f64::min)).collect();
        let span: Vec<f64> = (0..d)
            .map(|j| {
                let hi = points.iter().map(|p| p.0[j]).fold(f64::MIN, f64::max);
                if hi > lo[j] {
                    hi - lo[j]
                } else {
                    1.0
                }
            })
            .collect();
        let x: Vec<Vec<f64>> = points.iter().map(|p| (0..d).map(|j| (p.0[j] - lo[j]) / span[j]).collect()).collect();
        let y_mean = points.iter().map(|p| p.1).sum::<f64>() / n as f64;
        let sd = (points.iter().map(|p| (p.1 - y_mean).powi(2)).sum::<f64>() / n as f64).sqrt();
        let y_sd = if sd > 1e-12 * y_mean.abs().max(1.0) { sd } else { 1.0 };
        let gram =
            DMatrix::from_fn(n, n, |i, j| kernel(nu, l, sf2, dist(&x[i], &x[j])) + if i == j { noise } else { 0.0 });
        let y = DVector::from_iterator(n, points.iter().map(|p| (p.1 - y_mean) / y_sd));
        let weights = gram.clone().lu().solve(&y).expect("nonsingular");
        Oracle { x, lo, span, y_mean, y_sd, weights, gram, nu, l, sf2 }
    }

    /// Posterior mean and variance in original units.
    pub fn predict(&self, q: &[f64]) -> (f64, f64) {
        let qn: Vec<f64> = q.iter().enumerate().map(|(j, v)| (v - self.lo[j]) / self.span[j]).collect();
        let k = DVector::from_iterator(
            self.x.len(),
            self.x.iter().map(|xi| kernel(self.nu, self.l, self.sf2, dist(&qn, xi))),
        );
        let mean = k.dot(&self.weights);
        let v = self.gram.clone().lu().solve(&k).expect("nonsingular");
        let var = self.sf2 - k.dot(&v);
        (self.y_mean + mean * self.y_sd, var * self.y_sd * self.y_sd)
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}
