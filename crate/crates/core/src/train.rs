//! Full-batch training loops: gradient descent with GR, SAM and flooding.
//!
//! For DLN objectives [`gd_train`] also integrates the trajectory quantities
//! that determine the effective initialization scale after training:
//!
//! ```text
//! Ψ  = ∫ (Xᵀr*) ∘ (Xᵀr) dt          r* = residual at w + ε∇L(w)
//! Ψ₀ = ∫ (Xᵀr)² dt
//! Ψ₁ = ∫ 2b ∘ Z(b ∘ a) dt            b = Xᵀr, a = w₊² + w₋², Z = XᵀX
//! Ψ₂ = ∫ b ∘ Z(b² ∘ β) dt
//! ```
//!
//! with `Ψ = Ψ₀ + (ε/n)Ψ₁ + (ε²/n²)Ψ₂` holding exactly at every step. Integrals
//! are left-endpoint Riemann sums with weight `η`.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::gr::{regularized_direction, GrConfig};
use crate::objective::{DlnObjective, DlnState, Objective, ParamVector};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub eta: f64,
    pub gr: GrConfig,
    pub max_steps: usize,
    pub loss_tol: f64,
    pub explode_threshold: f64,
}

pub const DEFAULT_EXPLODE_THRESHOLD: f64 = 1e6;

impl TrainConfig {
    pub fn new(eta: f64, gr: GrConfig, max_steps: usize, loss_tol: f64) -> Result<Self> {
        let cfg = Self { eta, gr, max_steps, loss_tol, explode_threshold: DEFAULT_EXPLODE_THRESHOLD };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.gr.validate()?;
        if !(self.eta.is_finite() && self.eta > 0.0) {
            return Err(Error::InvalidParameter(format!("learning rate must be positive, got {}", self.eta)));
        }
        if self.max_steps == 0 {
            return Err(Error::InvalidParameter("max_steps must be positive".into()));
        }
        if !(self.loss_tol > 0.0 && self.loss_tol < self.explode_threshold) {
            return Err(Error::InvalidParameter(format!(
                "need 0 < loss_tol < explode_threshold, got {} and {}",
                self.loss_tol, self.explode_threshold
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum TrainStatus {
    Converged { steps: usize },
    MaxSteps,
    Exploded { step: usize },
}

impl TrainStatus {
    pub fn label(&self) -> &'static str {
        match self {
            Self::Converged { .. } => "converged",
            Self::MaxSteps => "max_steps",
            Self::Exploded { .. } => "exploded",
        }
    }

    pub fn is_exploded(&self) -> bool {
        matches!(self, Self::Exploded { .. })
    }
}

/// Instantaneous integrands at one point of a DLN trajectory, each of length `d`.
#[derive(Debug, Clone, PartialEq)]
pub struct StepIntegrands {
    /// `b²`
    pub b_sq: DVector<f64>,
    /// `2b ∘ Z(b ∘ a)`
    pub z: DVector<f64>,
    /// `b ∘ Z(b² ∘ β)`
    pub z_h: DVector<f64>,
    /// `(Xᵀr*) ∘ b`
    pub psi: DVector<f64>,
}

/// Running Riemann sums of the DLN trajectory integrals.
///
/// Empty (all vectors of length zero) for non-DLN objectives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryAccumulators {
    pub psi: Vec<f64>,
    pub psi0: Vec<f64>,
    pub psi1: Vec<f64>,
    pub psi2: Vec<f64>,
    /// `(Xᵀr(0))²`
    pub b0_squared: Vec<f64>,
    /// Signed ascent step the integrands were evaluated with.
    pub eps: f64,
}

impl TrajectoryAccumulators {
    pub fn zeros(d: usize, eps: f64) -> Self {
        Self {
            psi: vec![0.0; d],
            psi0: vec![0.0; d],
            psi1: vec![0.0; d],
            psi2: vec![0.0; d],
            b0_squared: vec![0.0; d],
            eps,
        }
    }

    pub fn empty() -> Self {
        Self::zeros(0, 0.0)
    }

    pub fn is_empty(&self) -> bool {
        self.psi.is_empty()
    }

    pub fn len(&self) -> usize {
        self.psi.len()
    }

    fn add(&mut self, weight: f64, it: &StepIntegrands) {
        let sums = [&mut self.psi, &mut self.psi0, &mut self.psi1, &mut self.psi2];
        let terms = [&it.psi, &it.b_sq, &it.z, &it.z_h];
        for (sum, term) in sums.into_iter().zip(terms) {
            for (s, t) in sum.iter_mut().zip(term.iter()) {
                *s += weight * t;
            }
        }
    }

    /// `Ψ₀ + (ε/n)Ψ₁ + (ε²/n²)Ψ₂`, which should reproduce `Ψ`.
    pub fn recomposed_psi(&self, n: usize) -> Vec<f64> {
        let e = self.eps / n as f64;
        (0..self.len())
            .map(|i| self.psi0[i] + e * self.psi1[i] + e * e * self.psi2[i])
            .collect()
    }

    /// Largest entrywise relative gap between `Ψ` and its decomposition,
    /// skipping entries with `|Ψ| ≤ 1e−10`.
    pub fn decomposition_rel_err(&self, n: usize) -> f64 {
        self.recomposed_psi(n)
            .iter()
            .zip(&self.psi)
            .filter(|(_, p)| p.abs() > 1e-10)
            .map(|(r, p)| (r - p).abs() / p.abs())
            .fold(0.0, f64::max)
    }
}

/// The four integrands `(b², z, z_h, ψ)` at `w` for ascent step `eps`.
pub fn step_integrands(obj: &DlnObjective, w: &ParamVector, eps: f64) -> Result<StepIntegrands> {
    let st = obj.state(w)?;
    integrands_from_state(obj, w, &st, eps)
}

fn integrands_from_state(obj: &DlnObjective, w: &ParamVector, st: &DlnState, eps: f64) -> Result<StepIntegrands> {
    let x = obj.data().x();
    let d = obj.d();
    let (plus, minus) = w.halves()?;
    let b = &st.b;
    let ba = DVector::from_fn(d, |i, _| b[i] * (plus[i] * plus[i] + minus[i] * minus[i]));
    let z_ba = x.tr_mul(&(x * ba));
    let bsq_beta = DVector::from_fn(d, |i, _| b[i] * b[i] * st.beta[i]);
    let z_bb = x.tr_mul(&(x * bsq_beta));

    // r* at w* = w + ε∇L(w); componentwise w*₊ = w₊(1 + εb/n), w*₋ = w₋(1 − εb/n)
    let psi = if eps == 0.0 {
        b.component_mul(b)
    } else {
        let e = eps / obj.n() as f64;
        let beta_star = DVector::from_fn(d, |i, _| {
            let p = plus[i] * (1.0 + e * b[i]);
            let m = minus[i] * (1.0 - e * b[i]);
            p * p - m * m
        });
        let b_star = x.tr_mul(&obj.data().residual(&beta_star)?);
        b_star.component_mul(b)
    };

    Ok(StepIntegrands {
        b_sq: b.component_mul(b),
        z: DVector::from_fn(d, |i, _| 2.0 * b[i] * z_ba[i]),
        z_h: DVector::from_fn(d, |i, _| b[i] * z_bb[i]),
        psi,
    })
}

/// Result of a [`gd_train`] run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub w: ParamVector,
    pub status: TrainStatus,
    pub accumulators: TrajectoryAccumulators,
    /// Number of update steps applied.
    pub steps: usize,
    /// Loss at the returned parameters (non-finite or huge if exploded).
    pub final_loss: f64,
}

/// Gradient descent `θ ← θ − η(∇L + γΔR)` until `L < loss_tol`, `max_steps`, or explosion.
pub fn gd_train(obj: &dyn Objective, w0: &ParamVector, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    check_dim(obj.dim(), w0.len())?;
    let initial_loss = obj.loss(w0)?;
    if !initial_loss.is_finite() {
        return Err(Error::NonFinite("initial loss"));
    }

    let dln = obj.as_dln();
    let eps = cfg.gr.method.signed_epsilon();
    let mut acc = match dln {
        Some(o) => TrajectoryAccumulators::zeros(o.d(), eps),
        None => TrajectoryAccumulators::empty(),
    };

    let mut w = w0.clone();
    let mut last_loss = initial_loss;
    for step in 0..cfg.max_steps {
        let evaluated = match dln {
            Some(o) => {
                let st = o.state(&w)?;
                if step == 0 {
                    acc.b0_squared = st.b.iter().map(|b| b * b).collect();
                }
                let loss = st.residual.norm_squared() / (4.0 * o.n() as f64);
                o.gradient_from_state(&w, &st).map(|g| (loss, g, Some(st)))
            }
            None => obj.loss_and_gradient(&w).map(|(l, g)| (l, g, None)),
        };
        let (loss, grad, state) = match evaluated {
            Ok(v) => v,
            Err(Error::NonFinite(_)) => return Ok(finish(w, TrainStatus::Exploded { step }, acc, step, f64::NAN)),
            Err(e) => return Err(e),
        };
        if !loss.is_finite() || loss > cfg.explode_threshold {
            return Ok(finish(w, TrainStatus::Exploded { step }, acc, step, loss));
        }
        if loss < cfg.loss_tol {
            return Ok(finish(w, TrainStatus::Converged { steps: step }, acc, step, loss));
        }
        if let (Some(o), Some(st)) = (dln, state.as_ref()) {
            acc.add(cfg.eta, &integrands_from_state(o, &w, st, eps)?);
        }
        last_loss = loss;

        let next = regularized_direction(obj, &w, &grad, &cfg.gr).and_then(|dir| w.add_scaled(-cfg.eta, &dir));
        match next {
            Ok(v) => w = v,
            Err(Error::NonFinite(_)) => return Ok(finish(w, TrainStatus::Exploded { step }, acc, step, loss)),
            Err(e) => return Err(e),
        }
    }

    let loss = obj.loss(&w).unwrap_or(last_loss);
    let status = if !loss.is_finite() || loss > cfg.explode_threshold {
        TrainStatus::Exploded { step: cfg.max_steps }
    } else if loss < cfg.loss_tol {
        TrainStatus::Converged { steps: cfg.max_steps }
    } else {
        TrainStatus::MaxSteps
    };
    Ok(finish(w, status, acc, cfg.max_steps, loss))
}

fn finish(
    w: ParamVector,
    status: TrainStatus,
    accumulators: TrajectoryAccumulators,
    steps: usize,
    final_loss: f64,
) -> TrainOutcome {
    TrainOutcome { w, status, accumulators, steps, final_loss }
}

/// SAM ascent radius. `rho = 0` with `normalized = false` degenerates to plain GD.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamConfig {
    pub rho: f64,
    pub normalized: bool,
}

impl SamConfig {
    pub fn new(rho: f64, normalized: bool) -> Result<Self> {
        if !(rho.is_finite() && rho >= 0.0) {
            return Err(Error::InvalidParameter(format!("SAM radius must be nonnegative, got {rho}")));
        }
        Ok(Self { rho, normalized })
    }
}

/// `θ − η∇L(θ + ε_t∇L(θ))` with `ε_t = ρ/‖∇L(θ)‖` (normalized) or `ε_t = ρ`.
pub fn sam_step(obj: &dyn Objective, theta: &ParamVector, cfg: &SamConfig, eta: f64) -> Result<ParamVector> {
    let g = obj.gradient(theta)?;
    let eps = if cfg.normalized {
        let norm = g.norm();
        if norm == 0.0 {
            return Err(Error::InvalidParameter("normalized SAM step at a stationary point".into()));
        }
        cfg.rho / norm
    } else {
        cfg.rho
    };
    let ascended = obj.gradient(&theta.add_scaled(eps, &g)?)?;
    theta.add_scaled(-eta, &ascended)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FloodConfig {
    pub flood_level: f64,
    pub eta: f64,
    pub max_steps: usize,
}

impl FloodConfig {
    pub fn new(flood_level: f64, eta: f64, max_steps: usize) -> Result<Self> {
        let cfg = Self { flood_level, eta, max_steps };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.flood_level.is_finite() && self.flood_level > 0.0) {
            return Err(Error::InvalidParameter(format!("flood level must be positive, got {}", self.flood_level)));
        }
        if !(self.eta.is_finite() && self.eta > 0.0) {
            return Err(Error::InvalidParameter(format!("learning rate must be positive, got {}", self.eta)));
        }
        if self.max_steps == 0 {
            return Err(Error::InvalidParameter("max_steps must be positive".into()));
        }
        Ok(())
    }
}

/// `Sign(L − b)` with `Sign(0) = +1`.
fn flood_sign(loss: f64, level: f64) -> f64 {
    if loss >= level {
        1.0
    } else {
        -1.0
    }
}

/// One flooding update `θ − η Sign(L(θ) − b) ∇L(θ)`.
pub fn flooding_step(obj: &dyn Objective, theta: &ParamVector, cfg: &FloodConfig) -> Result<ParamVector> {
    let (loss, g) = obj.loss_and_gradient(theta)?;
    theta.add_scaled(-cfg.eta * flood_sign(loss, cfg.flood_level), &g)
}

/// Per-step record of a flooding run, one entry per step taken.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FloodTrace {
    pub loss: Vec<f64>,
    pub grad_norm_sq: Vec<f64>,
    /// Cumulative fraction of steps whose direction differs from the previous step.
    pub flip_rate: Vec<f64>,
    /// Cumulative fraction of steps taken with the loss below the flood level.
    pub below_rate: Vec<f64>,
}

pub fn flooding_train(obj: &dyn Objective, theta0: &ParamVector, cfg: &FloodConfig) -> Result<(ParamVector, FloodTrace)> {
    cfg.validate()?;
    let mut theta = theta0.clone();
    let mut trace = FloodTrace::default();
    let (mut flips, mut below) = (0usize, 0usize);
    let mut prev_sign = None;
    for t in 0..cfg.max_steps {
        let (loss, g) = obj.loss_and_gradient(&theta)?;
        let sign = flood_sign(loss, cfg.flood_level);
        if prev_sign.is_some_and(|p| p != sign) {
            flips += 1;
        }
        if sign < 0.0 {
            below += 1;
        }
        prev_sign = Some(sign);
        trace.loss.push(loss);
        trace.grad_norm_sq.push(g.norm() * g.norm());
        trace.flip_rate.push(if t == 0 { 0.0 } else { flips as f64 / t as f64 });
        trace.below_rate.push(below as f64 / (t + 1) as f64);
        theta = theta.add_scaled(-cfg.eta * sign, &g)?;
    }
    Ok((theta, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gr::{delta_r_forward, GrMethod};
    use crate::objective::{Dataset, LinearMseObjective};

    fn half_square() -> LinearMseObjective {
        LinearMseObjective::new(Dataset::from_rows(&[vec![1.0]], vec![0.0]).unwrap())
    }

    fn pv(v: &[f64]) -> ParamVector {
        ParamVector::new(v.to_vec()).unwrap()
    }

    fn small_dln() -> DlnObjective {
        DlnObjective::new(
            Dataset::from_rows(
                &[vec![1.0, -0.5, 0.8, 0.1], vec![0.2, 1.3, -0.4, 0.9]],
                vec![0.7, -0.3],
            )
            .unwrap(),
        )
    }

    #[test]
    fn converged_at_start_leaves_weights() {
        let obj = DlnObjective::new(Dataset::from_rows(&[vec![1.0]], vec![0.0]).unwrap());
        let w0 = pv(&[0.3, 0.3]);
        let cfg = TrainConfig::new(1e-3, GrConfig::plain(), 100, 1e-8).unwrap();
        let out = gd_train(&obj, &w0, &cfg).unwrap();
        assert_eq!(out.status, TrainStatus::Converged { steps: 0 });
        assert_eq!(out.w, w0);
        assert!(out.accumulators.psi.iter().all(|&p| p == 0.0));
    }

    #[test]
    fn quadratic_explodes_with_large_step() {
        let cfg = TrainConfig::new(3.0, GrConfig::plain(), 1000, 1e-8).unwrap();
        let out = gd_train(&half_square(), &pv(&[1.0]), &cfg).unwrap();
        assert!(out.status.is_exploded());
        assert!(out.accumulators.is_empty());
    }

    #[test]
    fn quadratic_converges() {
        let cfg = TrainConfig::new(0.5, GrConfig::plain(), 1000, 1e-12).unwrap();
        let out = gd_train(&half_square(), &pv(&[1.0]), &cfg).unwrap();
        assert!(matches!(out.status, TrainStatus::Converged { .. }));
        assert!(out.final_loss < 1e-12);
    }

    #[test]
    fn max_steps_status() {
        let cfg = TrainConfig::new(1e-3, GrConfig::plain(), 5, 1e-12).unwrap();
        let out = gd_train(&half_square(), &pv(&[1.0]), &cfg).unwrap();
        assert_eq!(out.status, TrainStatus::MaxSteps);
        assert_eq!(out.steps, 5);
    }

    #[test]
    fn non_finite_start_is_error() {
        let obj = LinearMseObjective::new(Dataset::from_rows(&[vec![1e200]], vec![0.0]).unwrap());
        let cfg = TrainConfig::new(1e-3, GrConfig::plain(), 5, 1e-12).unwrap();
        assert!(gd_train(&obj, &pv(&[1e200]), &cfg).is_err());
    }

    #[test]
    fn train_config_validation() {
        assert!(TrainConfig::new(0.0, GrConfig::plain(), 10, 1e-8).is_err());
        assert!(TrainConfig::new(0.1, GrConfig::plain(), 0, 1e-8).is_err());
        assert!(TrainConfig::new(0.1, GrConfig::plain(), 10, 1e7).is_err());
    }

    #[test]
    fn integrands_vanish_at_interpolation() {
        let obj = DlnObjective::new(Dataset::from_rows(&[vec![1.0, 2.0]], vec![3.0]).unwrap());
        let it = step_integrands(&obj, &pv(&[1.0, 1.0, 0.0, 0.0]), 0.05).unwrap();
        for v in [&it.b_sq, &it.z, &it.z_h, &it.psi] {
            assert!(v.iter().all(|&x| x == 0.0));
        }
    }

    #[test]
    fn integrands_hand_example() {
        let obj = DlnObjective::new(Dataset::from_rows(&[vec![1.0]], vec![1.0]).unwrap());
        let it = step_integrands(&obj, &pv(&[1.0, 1.0]), 0.0).unwrap();
        assert_eq!(it.b_sq[0], 1.0);
        assert_eq!(it.z[0], 4.0);
        assert_eq!(it.z_h[0], 0.0);
        assert_eq!(it.psi[0], 1.0);
    }

    #[test]
    fn z_matches_tilde_form() {
        let obj = small_dln();
        let w = pv(&[0.6, 0.4, -0.5, 0.3, 0.7, 0.2, 0.1, -0.9]);
        let it = step_integrands(&obj, &w, 0.1).unwrap();
        // 2(XᵀX̃((X̃ᵀr) ∘ w²)) ∘ (Xᵀr) with X̃ = [X, −X]
        let x = obj.data().x();
        let st = obj.state(&w).unwrap();
        let d = obj.d();
        let bt = DVector::from_fn(2 * d, |k, _| if k < d { st.b[k] } else { -st.b[k - d] });
        let u = DVector::from_fn(2 * d, |k, _| bt[k] * w[k] * w[k]);
        let xt_u = x * u.rows(0, d).into_owned() - x * u.rows(d, d).into_owned();
        let tilde = x.tr_mul(&xt_u);
        for i in 0..d {
            let z_alt = 2.0 * tilde[i] * st.b[i];
            assert!((z_alt - it.z[i]).abs() <= 1e-12 * it.z[i].abs().max(1e-300));
        }
    }

    #[test]
    fn psi_decomposes_exactly_per_step() {
        let obj = small_dln();
        let w = pv(&[0.6, 0.4, -0.5, 0.3, 0.7, 0.2, 0.1, -0.9]);
        for eps in [0.3, -0.2, 0.05] {
            let it = step_integrands(&obj, &w, eps).unwrap();
            let e = eps / obj.n() as f64;
            for i in 0..obj.d() {
                let recomposed = it.b_sq[i] + e * it.z[i] + e * e * it.z_h[i];
                assert!((recomposed - it.psi[i]).abs() <= 1e-12 * it.psi[i].abs().max(1.0));
            }
        }
    }

    #[test]
    fn sam_hand_example() {
        let cfg = SamConfig::new(0.1, false).unwrap();
        let next = sam_step(&half_square(), &pv(&[1.0]), &cfg, 0.1).unwrap();
        assert!((next[0] - 0.89).abs() < 1e-15);
    }

    #[test]
    fn sam_zero_radius_is_gd() {
        let obj = small_dln();
        let w = pv(&[0.6, 0.4, -0.5, 0.3, 0.7, 0.2, 0.1, -0.9]);
        let cfg = SamConfig::new(0.0, false).unwrap();
        let g = obj.gradient(&w).unwrap();
        assert_eq!(sam_step(&obj, &w, &cfg, 0.05).unwrap(), w.add_scaled(-0.05, &g).unwrap());
    }

    #[test]
    fn sam_matches_fgr_with_gamma_eps() {
        let obj = small_dln();
        let w = pv(&[0.6, 0.4, -0.5, 0.3, 0.7, 0.2, 0.1, -0.9]);
        let rho = 0.07;
        let sam = sam_step(&obj, &w, &SamConfig::new(rho, false).unwrap(), 0.01).unwrap();
        let gr = GrConfig::new(GrMethod::ForwardFd(rho), rho).unwrap();
        let dir = crate::gr::regularized_gradient(&obj, &w, &gr).unwrap();
        assert_eq!(sam, w.add_scaled(-0.01, &dir).unwrap());
    }

    #[test]
    fn normalized_sam_needs_gradient() {
        let cfg = SamConfig::new(0.1, true).unwrap();
        assert!(sam_step(&half_square(), &pv(&[0.0]), &cfg, 0.1).is_err());
        let step = sam_step(&half_square(), &pv(&[2.0]), &cfg, 0.1).unwrap();
        // ε_t = 0.1/2, θ' = 2.1
        assert!((step[0] - (2.0 - 0.1 * 2.1)).abs() < 1e-15);
    }

    #[test]
    fn flooding_hand_examples() {
        let obj = half_square();
        let cfg = FloodConfig::new(0.01, 0.1, 2).unwrap();
        let up = flooding_step(&obj, &pv(&[0.14]), &cfg).unwrap();
        assert!((up[0] - 0.154).abs() < 1e-15);
        let down = flooding_step(&obj, &up, &cfg).unwrap();
        assert!((down[0] - 0.1386).abs() < 1e-15);
        let fd = delta_r_forward(&obj, &pv(&[0.14]), 0.1).unwrap();
        assert!((down[0] - (0.14 - 0.01 * fd[0])).abs() < 1e-15);

        // above the flood level flooding is a GD step
        let gd = flooding_step(&obj, &pv(&[1.0]), &cfg).unwrap();
        assert!((gd[0] - 0.9).abs() < 1e-15);
    }

    #[test]
    fn flood_sign_at_level_descends() {
        assert_eq!(flood_sign(0.5, 0.5), 1.0);
        assert_eq!(flood_sign(0.4, 0.5), -1.0);
    }

    #[test]
    fn flooding_oscillates_around_level() {
        let obj = half_square();
        let cfg = FloodConfig::new(0.5, 0.01, 4000).unwrap();
        let (_, trace) = flooding_train(&obj, &pv(&[0.1]), &cfg).unwrap();
        // pure ascent until L exceeds b: |θ| grows by 1.01 per step from 0.1 to 1
        let first_above = trace.loss.iter().position(|&l| l >= 0.5).unwrap();
        assert!(trace.loss[..first_above].windows(2).all(|p| p[1] > p[0]));
        assert!((225..=240).contains(&first_above));
        let tail = 3000;
        let below_in_tail = trace.loss[tail..].iter().filter(|&&l| l < 0.5).count() as f64;
        let frac = below_in_tail / (trace.loss.len() - tail) as f64;
        assert!((0.4..=0.6).contains(&frac), "below fraction {frac}");
        assert!(*trace.flip_rate.last().unwrap() > 0.8);
        assert!(trace.loss[tail..].iter().all(|l| (l - 0.5).abs() < 0.02));
    }

    #[test]
    fn flooding_with_tiny_level_is_gd() {
        let obj = half_square();
        let cfg = FloodConfig::new(1e-300, 0.1, 50).unwrap();
        let (theta, trace) = flooding_train(&obj, &pv(&[1.0]), &cfg).unwrap();
        assert!((theta[0] - 0.9f64.powi(50)).abs() < 1e-15);
        assert!(trace.flip_rate.iter().all(|&f| f == 0.0));
    }
}
