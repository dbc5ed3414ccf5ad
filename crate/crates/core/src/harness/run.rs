//! Single runs, sweeps, and their CSV/JSON serialization.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::config::{ExperimentConfig, GridEntry};
use crate::harness::data::{generate_sparse_regression, init_dln_weights, test_loss};
use crate::objective::{beta_from_w, DlnObjective, Objective};
use crate::theory::{
    alpha_bound_diagnostic, alpha_gr_from_weights, median, predicted_alpha_gr, top_eigenvalue, BoundDiagnostic,
    ExponentReport, PowerIterConfig,
};
use crate::train::{flooding_train, gd_train, FloodTrace, TrainStatus};

/// Outputs of one training run. Quantities that need a finite final point are
/// NaN (or `None`) when the run exploded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub method: String,
    pub epsilon: f64,
    pub gamma: f64,
    pub seed: u64,
    pub status: TrainStatus,
    pub steps: usize,
    pub final_train_loss: f64,
    pub test_loss: f64,
    pub l1_norm: f64,
    pub max_alpha_gr: f64,
    pub c0_hat_mean: f64,
    pub c1_mean: f64,
    pub c2_hat_mean: f64,
    /// Median over coordinates of `|Ψ̂₁ − n b(0)²/2| / (n b(0)²/2)`.
    pub psi1_rel_err: f64,
    pub lambda_max: f64,
    pub beta: Vec<f64>,
    pub alpha0: Vec<f64>,
    /// `√(w₊ ∘ w₋)` at the final point.
    pub alpha_gr: Option<Vec<f64>>,
    /// `α₀ ∘ exp(−γΨ̂/n²)`.
    pub alpha_gr_predicted: Option<Vec<f64>>,
    pub exponents: ExponentReport,
}

impl RunRecord {
    /// Signed ascent step: negative for B-GR, zero for DB and plain GD.
    pub fn signed_epsilon(&self) -> f64 {
        match self.method.as_str() {
            "fgr" => self.epsilon,
            "bgr" => -self.epsilon,
            _ => 0.0,
        }
    }

    /// Median over coordinates of `|α_GR − α̂_GR| / α̂_GR` with `α̂_GR = α₀ ∘ exp(−γΨ̂/n²)`.
    pub fn prediction_median_rel_err(&self) -> Option<f64> {
        let (got, pred) = (self.alpha_gr.as_ref()?, self.alpha_gr_predicted.as_ref()?);
        let errs: Vec<f64> = got.iter().zip(pred).map(|(g, p)| (g - p).abs() / p).collect();
        Some(median(&errs))
    }

    /// Median over coordinates of the relative gap between `log(α₀/α_GR)/γ`
    /// and `ĉ₀ + εc₁ + ε²ĉ₂`. Undefined for `γ = 0`.
    pub fn exponent_median_rel_err(&self) -> Option<f64> {
        if self.gamma <= 0.0 {
            return None;
        }
        let got = self.alpha_gr.as_ref()?;
        let model = self.exponents.total_exponent(self.signed_epsilon());
        let errs: Vec<f64> = got
            .iter()
            .zip(&self.alpha0)
            .zip(&model)
            .map(|((g, a0), m)| ((a0 / g).ln() / self.gamma - m).abs() / m.abs())
            .collect();
        Some(median(&errs))
    }

    pub fn bound_check(&self) -> Result<BoundDiagnostic> {
        let alpha_gr = self
            .alpha_gr
            .as_ref()
            .ok_or_else(|| Error::InvalidParameter("run has no α_GR estimate".into()))?;
        alpha_bound_diagnostic(
            &crate::theory::AlphaVector::new(self.alpha0.clone())?,
            &crate::theory::AlphaVector::new(alpha_gr.clone())?,
            &self.exponents.c1,
            self.gamma,
            self.signed_epsilon(),
        )
    }
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        f64::NAN
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// Generates data for `seed`, trains a DLN with the given GR setting, and
/// collects the diagnostics of the final point.
pub fn run_experiment(cfg: &ExperimentConfig, entry: &GridEntry, seed: u64) -> Result<RunRecord> {
    cfg.validate()?;
    let gr = entry.gr_config()?;
    let train_cfg = cfg.train.train_config(gr)?;
    let (train, test, _) = generate_sparse_regression(cfg, seed)?;
    let (w0, alpha0) = init_dln_weights(cfg.d, cfg.alpha0_std, seed)?;
    let obj = DlnObjective::new(train);
    let out = gd_train(&obj, &w0, &train_cfg)?;

    let n = cfg.n;
    let exponents = ExponentReport::from_accumulators(&out.accumulators, n);
    let exploded = out.status.is_exploded();
    let beta = beta_from_w(&out.w)?.as_slice().to_vec();
    let alpha_gr = if exploded { None } else { alpha_gr_from_weights(&out.w).ok() };
    let alpha_gr_predicted = if exploded {
        None
    } else {
        predicted_alpha_gr(&alpha0, gr.gamma, &out.accumulators, n).ok()
    };
    let (test_l, l1) = if exploded {
        (f64::NAN, f64::NAN)
    } else {
        (test_loss(&beta, &test)?, beta.iter().map(|b| b.abs()).sum())
    };
    let lambda_max = if exploded || !cfg.lambda_max {
        f64::NAN
    } else {
        let pcfg = PowerIterConfig { tol: 1e-10, ..PowerIterConfig::default() };
        top_eigenvalue(&obj, &out.w, &pcfg)?
    };

    Ok(RunRecord {
        method: gr.method.tag().to_string(),
        epsilon: gr.method.signed_epsilon().abs(),
        gamma: gr.gamma,
        seed,
        status: out.status,
        steps: out.steps,
        final_train_loss: out.final_loss,
        test_loss: test_l,
        l1_norm: l1,
        max_alpha_gr: alpha_gr.as_ref().map_or(f64::NAN, |a| a.max()),
        c0_hat_mean: mean(&exponents.c0_hat),
        c1_mean: mean(&exponents.c1),
        c2_hat_mean: mean(&exponents.c2_hat),
        psi1_rel_err: median(&exponents.psi1_rel_dev(n)),
        lambda_max,
        beta,
        alpha0: alpha0.as_slice().to_vec(),
        alpha_gr: alpha_gr.map(Vec::from),
        alpha_gr_predicted: alpha_gr_predicted.map(Vec::from),
        exponents,
    })
}

/// One record per `(grid entry, seed)`, in grid-major order. Runs execute in parallel.
pub fn sweep(cfg: &ExperimentConfig, grid: &[GridEntry], seeds: &[u64]) -> Result<Vec<RunRecord>> {
    if grid.is_empty() {
        return Err(Error::Empty("sweep grid"));
    }
    if seeds.is_empty() {
        return Err(Error::Empty("seed list"));
    }
    let jobs: Vec<(GridEntry, u64)> = grid.iter().flat_map(|e| seeds.iter().map(move |s| (*e, *s))).collect();
    jobs.par_iter().map(|(e, s)| run_experiment(cfg, e, *s)).collect()
}

pub const CSV_COLUMNS: [&str; 15] = [
    "method",
    "epsilon",
    "gamma",
    "seed",
    "status",
    "steps",
    "final_train_loss",
    "test_loss",
    "l1_norm",
    "max_alpha_gr",
    "c0_hat_mean",
    "c1_mean",
    "c2_hat_mean",
    "psi1_rel_err",
    "lambda_max",
];

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_csv<W: Write>(records: &[RunRecord], mut out: W) -> Result<()> {
    writeln!(out, "{}", CSV_COLUMNS.join(","))?;
    for r in records {
        let floats = [
            r.final_train_loss,
            r.test_loss,
            r.l1_norm,
            r.max_alpha_gr,
            r.c0_hat_mean,
            r.c1_mean,
            r.c2_hat_mean,
            r.psi1_rel_err,
            r.lambda_max,
        ];
        let tail: Vec<String> = floats.iter().map(|x| fmt_f64(*x)).collect();
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.method,
            fmt_f64(r.epsilon),
            fmt_f64(r.gamma),
            r.seed,
            r.status.label(),
            r.steps,
            tail.join(",")
        )?;
    }
    Ok(())
}

pub fn write_json<W: Write>(records: &[RunRecord], out: W) -> Result<()> {
    serde_json::to_writer_pretty(out, records)?;
    Ok(())
}

/// Flooding on the DLN built from `cfg` and `seed`, started from the usual
/// symmetric initialization.
pub fn flooding_demo(cfg: &ExperimentConfig, seed: u64) -> Result<FloodTrace> {
    cfg.validate()?;
    let flood = cfg
        .flood
        .ok_or_else(|| Error::InvalidParameter("config has no `flood` section".into()))?;
    let (train, _, _) = generate_sparse_regression(cfg, seed)?;
    let (w0, _) = init_dln_weights(cfg.d, cfg.alpha0_std, seed)?;
    let obj = DlnObjective::new(train);
    debug_assert_eq!(obj.dim(), w0.len());
    Ok(flooding_train(&obj, &w0, &flood)?.1)
}

pub fn write_flood_csv<W: Write>(trace: &FloodTrace, mut out: W) -> Result<()> {
    writeln!(out, "step,loss,grad_norm_sq,flip_rate,below_rate")?;
    for t in 0..trace.loss.len() {
        writeln!(
            out,
            "{t},{},{},{},{}",
            fmt_f64(trace.loss[t]),
            fmt_f64(trace.grad_norm_sq[t]),
            fmt_f64(trace.flip_rate[t]),
            fmt_f64(trace.below_rate[t])
        )?;
    }
    Ok(())
}
