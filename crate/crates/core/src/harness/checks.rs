//! Randomized suites for the exact identities: ε-independence of the forward
//! difference on linear least squares, flooding sign flips as finite-difference
//! GR, and unnormalized SAM as F-GR with `γ = ε = ρ`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::gr::{delta_r_db, delta_r_forward, regularized_direction, GrConfig, GrMethod};
use crate::harness::data::{stream_rng, uniform};
use crate::objective::{Dataset, DlnObjective, LinearMseObjective, Objective, ParamVector};
use crate::train::{flooding_step, sam_step, FloodConfig, SamConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub name: String,
    pub cases: usize,
    pub max_rel_err: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl CheckReport {
    fn new(name: &str, errors: &[f64], tolerance: f64) -> Self {
        let max_rel_err = errors.iter().copied().fold(0.0, f64::max);
        let passed = errors.iter().all(|e| *e <= tolerance);
        Self { name: name.to_string(), cases: errors.len(), max_rel_err, tolerance, passed }
    }
}

const CHECK_STREAM: u64 = 7;

fn gaussian_vec(rng: &mut ChaCha20Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.sample(StandardNormal)).collect()
}

fn gaussian_dataset(rng: &mut ChaCha20Rng, n: usize, d: usize) -> Result<Dataset> {
    let x = DMatrix::from_vec(n, d, gaussian_vec(rng, n * d));
    let y = DVector::from_vec(gaussian_vec(rng, n));
    Dataset::new(x, y)
}

fn rel_err(a: &ParamVector, b: &ParamVector) -> f64 {
    let diff = (a.as_dvector() - b.as_dvector()).norm();
    let scale = b.norm();
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

pub const LINEAR_EPSILONS: [f64; 4] = [1e-3, 1e-2, 0.1, 1.0];

/// For random `n, d ≤ 10` least-squares problems: `‖ΔR_F(ε) − H∇L‖/‖H∇L‖ ≤ 10⁻⁶`
/// over [`LINEAR_EPSILONS`], and `H∇L` equal to `XᵀXXᵀ(Xθ − y)` within `10⁻¹²`.
pub fn linear_invariance(trials: usize, seed: u64) -> Result<Vec<CheckReport>> {
    let mut rng = stream_rng(seed, CHECK_STREAM);
    let (mut fd_errs, mut closed_errs) = (Vec::new(), Vec::new());
    for _ in 0..trials {
        let n = rng.random_range(1..=10);
        let d = rng.random_range(1..=10);
        let data = gaussian_dataset(&mut rng, n, d)?;
        let theta = ParamVector::new(gaussian_vec(&mut rng, d))?;
        let x = data.x().clone();
        let closed = (x.transpose() * &x) * (x.transpose() * (&x * theta.as_dvector() - data.y()));
        let closed = ParamVector::from_dvector(closed)?;
        let obj = LinearMseObjective::new(data);
        let db = delta_r_db(&obj, &theta)?;
        closed_errs.push(rel_err(&db, &closed));
        let worst = LINEAR_EPSILONS
            .iter()
            .map(|&eps| delta_r_forward(&obj, &theta, eps).map(|fd| rel_err(&fd, &db)))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .fold(0.0, f64::max);
        fd_errs.push(worst);
    }
    Ok(vec![
        CheckReport::new("forward difference vs double backprop", &fd_errs, 1e-6),
        CheckReport::new("double backprop vs closed form", &closed_errs, 1e-12),
    ])
}

/// A random objective from the mix used by the identity suites.
fn random_objective(rng: &mut ChaCha20Rng, case: usize) -> Result<(Box<dyn Objective>, ParamVector)> {
    Ok(match case % 3 {
        0 => {
            let data = gaussian_dataset(rng, 1, 1)?;
            let theta = ParamVector::new(gaussian_vec(rng, 1))?;
            (Box::new(LinearMseObjective::new(data)), theta)
        }
        1 => {
            let n = rng.random_range(1..=10);
            let data = gaussian_dataset(rng, n, 10)?;
            let theta = ParamVector::new(gaussian_vec(rng, 10))?;
            (Box::new(LinearMseObjective::new(data)), theta)
        }
        _ => {
            let n = rng.random_range(1..=6);
            let d = rng.random_range(1..=8);
            let data = gaussian_dataset(rng, n, d)?;
            let w = ParamVector::new(gaussian_vec(rng, 2 * d))?;
            (Box::new(DlnObjective::new(data)), w)
        }
    })
}

/// Two flooding steps across a sign flip against the finite-difference form
/// `θ − η(∇L(θ + η∇L) − ∇L)` (loss starts below the flood level) or
/// `θ + η(∇L(θ − η∇L) − ∇L)` (loss starts above it).
pub fn flooding_identity(cases: usize, seed: u64) -> Result<CheckReport> {
    let mut rng = stream_rng(seed, CHECK_STREAM + 1);
    let mut errs = Vec::new();
    let mut case = 0;
    while errs.len() < cases {
        let (obj, theta) = random_objective(&mut rng, case)?;
        case += 1;
        let (loss, g) = obj.loss_and_gradient(&theta)?;
        if g.norm() == 0.0 {
            continue;
        }
        let eta = uniform(&mut rng, 1e-3, 1e-2) / (1.0 + g.norm());
        let starts_below = errs.len() % 2 == 0;
        let sign = if starts_below { 1.0 } else { -1.0 };
        let moved = theta.add_scaled(sign * eta, &g)?;
        let moved_loss = obj.loss(&moved)?;
        // the first step must cross the level for the pair to flip
        if starts_below != (moved_loss > loss) {
            continue;
        }
        let level = 0.5 * (loss + moved_loss);
        if !(level > 0.0) || !(level > loss.min(moved_loss) && level < loss.max(moved_loss)) {
            continue;
        }
        let cfg = FloodConfig::new(level, eta, 2)?;
        let two = flooding_step(obj.as_ref(), &flooding_step(obj.as_ref(), &theta, &cfg)?, &cfg)?;
        let g_moved = obj.gradient(&moved)?;
        let diff = g_moved.as_dvector() - g.as_dvector();
        let expected = ParamVector::from_dvector(theta.as_dvector() - diff * (sign * eta))?;
        errs.push(rel_err(&two, &expected));
    }
    Ok(CheckReport::new("flooding sign flip vs finite-difference GR", &errs, 1e-12))
}

/// Unnormalized SAM against GD on the F-GR objective with `γ = ε = ρ`.
pub fn sam_identity(cases: usize, seed: u64) -> Result<CheckReport> {
    let mut rng = stream_rng(seed, CHECK_STREAM + 2);
    let mut errs = Vec::with_capacity(cases);
    for case in 0..cases {
        let (obj, theta) = random_objective(&mut rng, case)?;
        let rho = uniform(&mut rng, 1e-3, 0.5);
        let eta = uniform(&mut rng, 1e-3, 0.1);
        let sam = sam_step(obj.as_ref(), &theta, &SamConfig::new(rho, false)?, eta)?;
        let gr = GrConfig::new(GrMethod::forward(rho)?, rho)?;
        let g = obj.gradient(&theta)?;
        let dir = regularized_direction(obj.as_ref(), &theta, &g, &gr)?;
        let gd = theta.add_scaled(-eta, &dir)?;
        errs.push(rel_err(&sam, &gd));
    }
    Ok(CheckReport::new("unnormalized SAM vs GD with F-GR at gamma = epsilon", &errs, 1e-15))
}
