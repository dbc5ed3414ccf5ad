//! Closed-form pieces of the DLN implicit-bias theory.
//!
//! Gradient flow on a DLN started at `w₊ = w₋ = α` converges to the
//! interpolator minimizing the hyperbolic-entropy potential
//! `φ_α(β) = Σᵢ αᵢ² q(βᵢ/αᵢ²)`. GR changes the effective scale to
//! `α_GR = α₀ ∘ exp(−γΨ/n²)`; the helpers here estimate `α_GR` from trained
//! weights, predict it from trajectory integrals, and solve the constrained
//! minimization directly.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::objective::{Dataset, DlnObjective, Objective, ParamVector};
use crate::train::TrajectoryAccumulators;

/// Strictly positive, finite per-coordinate scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct AlphaVector(Vec<f64>);

impl AlphaVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().all(|a| a.is_finite() && *a > 0.0) {
            Ok(Self(values))
        } else {
            Err(Error::InvalidParameter("scale vector entries must be positive and finite".into()))
        }
    }

    pub fn uniform(d: usize, a: f64) -> Result<Self> {
        Self::new(vec![a; d])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn max(&self) -> f64 {
        self.0.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

impl TryFrom<Vec<f64>> for AlphaVector {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<AlphaVector> for Vec<f64> {
    fn from(a: AlphaVector) -> Vec<f64> {
        a.0
    }
}

/// `q(z) = 2 − √(4 + z²) + z·arcsinh(z/2)`.
pub fn q_potential(z: f64) -> f64 {
    let s = 2.0f64.hypot(z);
    // 2 − √(4+z²) cancels for small z
    let head = if z.abs() < 1.0 { -z * z / (2.0 + s) } else { 2.0 - s };
    head + z * (z / 2.0).asinh()
}

/// `φ_α(β) = Σᵢ αᵢ² q(βᵢ/αᵢ²)`.
pub fn phi_alpha(beta: &[f64], alpha: &AlphaVector) -> Result<f64> {
    check_dim(alpha.len(), beta.len())?;
    Ok(beta
        .iter()
        .zip(alpha.as_slice())
        .map(|(b, a)| {
            let a2 = a * a;
            a2 * q_potential(b / a2)
        })
        .sum())
}

/// Minimizer of `φ_α` on `{β : Xβ = y}` together with its multiplier.
#[derive(Debug, Clone, PartialEq)]
pub struct InterpolationSolution {
    pub beta: DVector<f64>,
    /// Lagrange multiplier `ν` with `β = 2α² ∘ sinh(Xᵀν)`.
    pub nu: DVector<f64>,
    pub iterations: usize,
    /// `‖Xβ − y‖∞`
    pub constraint_residual: f64,
    /// `‖arcsinh(β/2α²) − Xᵀν‖∞`
    pub kkt_residual: f64,
}

const NEWTON_MAX_ITERS: usize = 200;
const NEWTON_TOL: f64 = 1e-10;
const KKT_TOL: f64 = 1e-8;
/// `sinh`/`cosh` arguments beyond this would overflow near `f64::MAX`.
const EXP_ARG_LIMIT: f64 = 700.0;

/// Solves `X(2α² ∘ sinh(Xᵀν)) = y` for `ν` by damped Newton iteration from `ν = 0`.
///
/// The Jacobian `2X diag(α² ∘ cosh(Xᵀν)) Xᵀ` is positive definite when `X`
/// has full row rank; steps are halved until `‖F‖₂` decreases. Trial points
/// that would need `|Xᵀν| > 700` are rejected rather than saturated.
pub fn solve_interpolation(data: &Dataset, alpha: &AlphaVector) -> Result<InterpolationSolution> {
    let (x, y) = (data.x(), data.y());
    let (n, d) = (data.n(), data.d());
    check_dim(d, alpha.len())?;
    let rank = x.rank(1e-12 * x.norm().max(1.0));
    if n > d || rank < n {
        return Err(Error::RankDeficient { rank, rows: n });
    }
    let alpha_sq = DVector::from_iterator(d, alpha.as_slice().iter().map(|a| a * a));

    let eval = |nu: &DVector<f64>| -> Option<(DVector<f64>, DVector<f64>, DVector<f64>)> {
        let u = x.tr_mul(nu);
        if u.iter().any(|v| v.abs() > EXP_ARG_LIMIT) {
            return None;
        }
        let beta = DVector::from_fn(d, |i, _| 2.0 * alpha_sq[i] * u[i].sinh());
        let f = x * &beta - y;
        Some((u, beta, f))
    };

    let mut nu = DVector::zeros(n);
    let (mut u, mut beta, mut f) = eval(&nu).ok_or(Error::NonFinite("Newton residual"))?;
    for iter in 0..NEWTON_MAX_ITERS {
        let res_inf = f.amax();
        if res_inf <= NEWTON_TOL {
            let kkt = (0..d)
                .map(|i| ((beta[i] / (2.0 * alpha_sq[i])).asinh() - u[i]).abs())
                .fold(0.0, f64::max);
            if kkt > KKT_TOL {
                return Err(Error::NewtonDidNotConverge { iterations: iter, residual: kkt });
            }
            return Ok(InterpolationSolution {
                beta,
                nu,
                iterations: iter,
                constraint_residual: res_inf,
                kkt_residual: kkt,
            });
        }

        let weights = DVector::from_fn(d, |i, _| 2.0 * alpha_sq[i] * u[i].cosh());
        let xw = DMatrix::from_fn(n, d, |r, c| x[(r, c)] * weights[c]);
        let jac = &xw * x.transpose();
        let step = match jac.clone().cholesky() {
            Some(ch) => ch.solve(&(-&f)),
            None => jac.lu().solve(&(-&f)).ok_or(Error::RankDeficient { rank, rows: n })?,
        };

        let f_norm = f.norm();
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..80 {
            let trial = &nu + &step * t;
            if let Some((tu, tb, tf)) = eval(&trial) {
                if tf.norm() < f_norm {
                    accepted = Some((trial, tu, tb, tf));
                    break;
                }
            }
            t *= 0.5;
        }
        match accepted {
            Some((a, b, c, e)) => {
                nu = a;
                u = b;
                beta = c;
                f = e;
            }
            None => return Err(Error::NewtonDidNotConverge { iterations: iter, residual: res_inf }),
        }
    }
    Err(Error::NewtonDidNotConverge { iterations: NEWTON_MAX_ITERS, residual: f.amax() })
}

/// `α_GR = √(w₊ ∘ w₋)`, valid while every product stays positive.
pub fn alpha_gr_from_weights(w: &ParamVector) -> Result<AlphaVector> {
    let (plus, minus) = w.halves()?;
    let mut out = Vec::with_capacity(plus.len());
    for (i, (p, m)) in plus.iter().zip(minus).enumerate() {
        let prod = p * m;
        if !(prod > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "w₊ ∘ w₋ must be positive to estimate α_GR; coordinate {i} has {prod}"
            )));
        }
        out.push(prod.sqrt());
    }
    AlphaVector::new(out)
}

/// `α₀ ∘ exp(−γΨ/n²)`.
pub fn predicted_alpha_gr(
    alpha0: &AlphaVector,
    gamma: f64,
    acc: &TrajectoryAccumulators,
    n: usize,
) -> Result<AlphaVector> {
    check_dim(alpha0.len(), acc.len())?;
    let scale = gamma / (n as f64 * n as f64);
    AlphaVector::new(
        alpha0
            .as_slice()
            .iter()
            .zip(&acc.psi)
            .map(|(a, p)| a * (-scale * p).exp())
            .collect(),
    )
}

/// `c₁ = (Xᵀ(Xβ₀ − y))² / 2n²`.
pub fn c1_exponent(data: &Dataset, beta0: &[f64]) -> Result<Vec<f64>> {
    check_dim(data.d(), beta0.len())?;
    let r = data.residual(&DVector::from_column_slice(beta0))?;
    let b = data.x().tr_mul(&r);
    let n2 = (data.n() * data.n()) as f64;
    Ok(b.iter().map(|v| v * v / (2.0 * n2)).collect())
}

/// Exponents of `α_GR = α₀ ∘ exp(−γ(c₀ + εc₁ + ε²c₂))` estimated from a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentReport {
    /// `Ψ̂₀/n²`
    pub c0_hat: Vec<f64>,
    /// `b(0)²/2n²`
    pub c1: Vec<f64>,
    /// `Ψ̂₂/n⁴`
    pub c2_hat: Vec<f64>,
    pub psi1_hat: Vec<f64>,
    pub b0_squared: Vec<f64>,
}

impl ExponentReport {
    pub fn from_accumulators(acc: &TrajectoryAccumulators, n: usize) -> Self {
        let n2 = (n * n) as f64;
        Self {
            c0_hat: acc.psi0.iter().map(|p| p / n2).collect(),
            c1: acc.b0_squared.iter().map(|b| b / (2.0 * n2)).collect(),
            c2_hat: acc.psi2.iter().map(|p| p / (n2 * n2)).collect(),
            psi1_hat: acc.psi1.clone(),
            b0_squared: acc.b0_squared.clone(),
        }
    }

    /// `ĉ₀ + εc₁ + ε²ĉ₂` per coordinate.
    pub fn total_exponent(&self, eps: f64) -> Vec<f64> {
        (0..self.c1.len())
            .map(|i| self.c0_hat[i] + eps * self.c1[i] + eps * eps * self.c2_hat[i])
            .collect()
    }

    /// Per-coordinate `|Ψ̂₁ − n b(0)²/2| / (n b(0)²/2)`, skipping coordinates with `b(0) = 0`.
    pub fn psi1_rel_dev(&self, n: usize) -> Vec<f64> {
        self.psi1_hat
            .iter()
            .zip(&self.b0_squared)
            .filter(|(_, b)| **b > 0.0)
            .map(|(p, b)| {
                let limit = n as f64 * b / 2.0;
                (p - limit).abs() / limit
            })
            .collect()
    }
}

/// Settings for [`dln_hessian_top_eig`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerIterConfig {
    pub tol: f64,
    pub max_iters: usize,
    pub restarts: usize,
    pub seed: u64,
}

impl Default for PowerIterConfig {
    fn default() -> Self {
        Self { tol: 1e-12, max_iters: 20_000, restarts: 10, seed: 0x5eed }
    }
}

/// Largest (algebraic) Hessian eigenvalue of the DLN loss at `w`.
///
/// Runs power iteration on the general Hessian-vector product. Away from an
/// interpolator the Hessian is indefinite, so when the dominant eigenvalue is
/// negative the iteration is repeated on `H + sI` with `s` the spectral-radius
/// estimate. The maximum over `restarts` random unit starts is returned.
pub fn dln_hessian_top_eig(obj: &DlnObjective, w: &ParamVector, tol: f64, max_iters: usize) -> Result<f64> {
    let cfg = PowerIterConfig { tol, max_iters, ..PowerIterConfig::default() };
    top_eigenvalue(obj, w, &cfg)
}

pub fn top_eigenvalue(obj: &dyn Objective, w: &ParamVector, cfg: &PowerIterConfig) -> Result<f64> {
    if !(cfg.tol > 0.0) {
        return Err(Error::InvalidParameter("power iteration tolerance must be positive".into()));
    }
    check_dim(obj.dim(), w.len())?;
    let dim = w.len();
    let apply = |v: &DVector<f64>| -> Result<DVector<f64>> {
        Ok(obj.hvp(w, &ParamVector::from_dvector(v.clone())?)?.into_dvector())
    };
    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
    let mut best = f64::NEG_INFINITY;
    for _ in 0..cfg.restarts.max(1) {
        let start = random_unit(&mut rng, dim);
        best = best.max(top_from_start(&apply, start, cfg)?);
    }
    Ok(best)
}

fn random_unit(rng: &mut ChaCha20Rng, dim: usize) -> DVector<f64> {
    loop {
        let v = DVector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal));
        let norm = v.norm();
        if norm > 0.0 {
            return v / norm;
        }
    }
}

fn top_from_start(
    apply: &dyn Fn(&DVector<f64>) -> Result<DVector<f64>>,
    start: DVector<f64>,
    cfg: &PowerIterConfig,
) -> Result<f64> {
    // Dominant |λ|: ‖Hv‖ converges even when ±ρ are both eigenvalues.
    let mut v = start.clone();
    let mut radius = 0.0;
    let mut rq = 0.0;
    let mut converged = false;
    for _ in 0..cfg.max_iters {
        let hv = apply(&v)?;
        let norm = hv.norm();
        if norm == 0.0 {
            return Ok(0.0);
        }
        rq = v.dot(&hv);
        let done = (norm - radius).abs() <= cfg.tol * norm;
        radius = norm;
        v = hv / norm;
        if done {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::PowerIterationDidNotConverge { iterations: cfg.max_iters, estimate: rq });
    }
    if (rq - radius).abs() <= cfg.tol.sqrt() * radius {
        return Ok(rq);
    }

    // Dominant eigenvalue is negative (or ±ρ tie): shift to make the spectrum nonnegative.
    let shift = 1.01 * radius;
    let mut v = start;
    let mut prev = f64::NAN;
    for _ in 0..cfg.max_iters {
        let hv = apply(&v)? + &v * shift;
        let q = v.dot(&hv);
        let norm = hv.norm();
        if norm == 0.0 {
            return Ok(-shift);
        }
        v = hv / norm;
        if (q - prev).abs() <= cfg.tol * q.abs() {
            return Ok(q - shift);
        }
        prev = q;
    }
    Err(Error::PowerIterationDidNotConverge { iterations: cfg.max_iters, estimate: prev - shift })
}

/// Largest `n` for which [`assumption_s_min_eig`] assembles `X diag(a) Xᵀ`.
pub const DENSE_GRAM_MAX_N: usize = 512;

/// Smallest eigenvalue of `S = X diag(w₊² + w₋²) Xᵀ`.
pub fn assumption_s_min_eig(data: &Dataset, w: &ParamVector) -> Result<f64> {
    let n = data.n();
    if n > DENSE_GRAM_MAX_N {
        return Err(Error::TooLargeForDense { what: "sample Gram matrix", size: n, limit: DENSE_GRAM_MAX_N });
    }
    check_dim(2 * data.d(), w.len())?;
    let (plus, minus) = w.halves()?;
    let x = data.x();
    let xa = DMatrix::from_fn(n, data.d(), |r, c| x[(r, c)] * (plus[c] * plus[c] + minus[c] * minus[c]));
    let s = &xa * x.transpose();
    let eig = SymmetricEigen::new(s);
    Ok(eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min))
}

/// Outcome of comparing a run's `α_GR` against the F-GR upper bound
/// `α_GR,i ≤ α₀,i exp(−γεc₁,i/2)` (or, for B-GR, the raw ratios).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundDiagnostic {
    /// Fraction of coordinates with `c₁,i > 0` satisfying the upper bound; F-GR only.
    pub satisfied_fraction: Option<f64>,
    /// `α_GR,i / α₀,i`
    pub ratios: Vec<f64>,
    pub median_ratio: f64,
}

/// `eps` is the signed ascent step: positive checks the upper bound,
/// nonpositive only reports the ratios.
pub fn alpha_bound_diagnostic(
    alpha0: &AlphaVector,
    alpha_gr: &AlphaVector,
    c1: &[f64],
    gamma: f64,
    eps: f64,
) -> Result<BoundDiagnostic> {
    check_dim(alpha0.len(), alpha_gr.len())?;
    check_dim(alpha0.len(), c1.len())?;
    let ratios: Vec<f64> = alpha_gr.as_slice().iter().zip(alpha0.as_slice()).map(|(g, a)| g / a).collect();
    let satisfied_fraction = (eps > 0.0).then(|| {
        let (mut ok, mut total) = (0usize, 0usize);
        for (i, &c) in c1.iter().enumerate() {
            if c > 0.0 {
                total += 1;
                let bound = (-gamma * eps * c / 2.0).exp();
                if ratios[i] <= bound * (1.0 + 1e-12) {
                    ok += 1;
                }
            }
        }
        if total == 0 {
            1.0
        } else {
            ok as f64 / total as f64
        }
    });
    Ok(BoundDiagnostic { satisfied_fraction, median_ratio: median(&ratios), ratios })
}

/// Median of a slice (NaN for an empty slice).
pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}
