//! Reference implementations shared by the integration tests. They are written
//! directly from the closed forms and do not call into the library's math.

#![allow(dead_code)]

use fdgr::{Dataset, Objective, ParamVector, Result};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut ChaCha20Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.sample(StandardNormal)).collect()
}

pub fn gaussian_data(rng: &mut ChaCha20Rng, n: usize, d: usize) -> Dataset {
    let x = DMatrix::from_vec(n, d, gaussian(rng, n * d));
    let y = DVector::from_vec(gaussian(rng, n));
    Dataset::new(x, y).unwrap()
}

pub fn pv(v: Vec<f64>) -> ParamVector {
    ParamVector::new(v).unwrap()
}

pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let scale: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

/// `½(θ − c)ᵀA(θ − c)` with positive definite `A`.
pub struct Quadratic {
    pub a: DMatrix<f64>,
    pub c: DVector<f64>,
}

impl Quadratic {
    pub fn random(rng: &mut ChaCha20Rng, d: usize) -> Self {
        let m = DMatrix::from_vec(d, d, gaussian(rng, d * d));
        let a = m.transpose() * &m / d as f64 + DMatrix::identity(d, d) * 0.5;
        Self { a, c: DVector::from_vec(gaussian(rng, d)) }
    }
}

impl Objective for Quadratic {
    fn dim(&self) -> usize {
        self.c.len()
    }

    fn loss(&self, theta: &ParamVector) -> Result<f64> {
        let e = theta.as_dvector() - &self.c;
        Ok(0.5 * e.dot(&(&self.a * &e)))
    }

    fn gradient(&self, theta: &ParamVector) -> Result<ParamVector> {
        ParamVector::from_dvector(&self.a * (theta.as_dvector() - &self.c))
    }

    fn hvp(&self, _theta: &ParamVector, v: &ParamVector) -> Result<ParamVector> {
        ParamVector::from_dvector(&self.a * v.as_dvector())
    }
}

/// DLN pieces computed elementwise from `β = w₊² − w₋²`, `L = ‖Xβ − y‖²/4n`.
pub struct DlnOracle<'a> {
    pub x: &'a DMatrix<f64>,
    pub y: &'a DVector<f64>,
}

impl DlnOracle<'_> {
    fn split(&self, w: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let d = self.x.ncols();
        (w[..d].to_vec(), w[d..].to_vec())
    }

    pub fn residual(&self, w: &[f64]) -> Vec<f64> {
        let (p, m) = self.split(w);
        (0..self.x.nrows())
            .map(|j| (0..self.x.ncols()).map(|i| self.x[(j, i)] * (p[i] * p[i] - m[i] * m[i])).sum::<f64>() - self.y[j])
            .collect()
    }

    pub fn loss(&self, w: &[f64]) -> f64 {
        let r = self.residual(w);
        r.iter().map(|v| v * v).sum::<f64>() / (4.0 * self.x.nrows() as f64)
    }

    /// `Xᵀr`
    pub fn b(&self, w: &[f64]) -> Vec<f64> {
        let r = self.residual(w);
        (0..self.x.ncols()).map(|i| (0..self.x.nrows()).map(|j| self.x[(j, i)] * r[j]).sum()).collect()
    }

    pub fn gradient(&self, w: &[f64]) -> Vec<f64> {
        let n = self.x.nrows() as f64;
        let d = self.x.ncols();
        let b = self.b(w);
        (0..2 * d).map(|k| if k < d { b[k] * w[k] / n } else { -b[k - d] * w[k] / n }).collect()
    }

    /// `(1/n)(diag(X̃ᵀr) + 2 diag(w) X̃ᵀX̃ diag(w))` with `X̃ = [X, −X]`.
    pub fn hessian(&self, w: &[f64]) -> DMatrix<f64> {
        let n = self.x.nrows();
        let d = self.x.ncols();
        let b = self.b(w);
        let xt = |j: usize, k: usize| if k < d { self.x[(j, k)] } else { -self.x[(j, k - d)] };
        DMatrix::from_fn(2 * d, 2 * d, |k, l| {
            let gram: f64 = (0..n).map(|j| xt(j, k) * xt(j, l)).sum();
            let diag = if k == l { if k < d { b[k] } else { -b[k - d] } } else { 0.0 };
            (diag + 2.0 * w[k] * w[l] * gram) / n as f64
        })
    }
}

pub fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let m = s.len() / 2;
    if s.len() % 2 == 1 {
        s[m]
    } else {
        0.5 * (s[m - 1] + s[m])
    }
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}
