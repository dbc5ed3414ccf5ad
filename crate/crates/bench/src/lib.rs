//! Fixtures shared by the benchmarks.

use fdgr::harness::data::{generate_sparse_regression, init_dln_weights};
use fdgr::harness::ExperimentConfig;
use fdgr::{DlnObjective, Objective, ParamVector};

/// DLN objective and a point a few hundred plain-GD steps into training,
/// on the default synthetic setting (`d = 100, n = 50`).
pub fn dln_fixture(seed: u64) -> (DlnObjective, ParamVector) {
    let cfg = ExperimentConfig::default();
    let (train, _, _) = generate_sparse_regression(&cfg, seed).expect("default config is valid");
    let (mut w, _) = init_dln_weights(cfg.d, cfg.alpha0_std, seed).expect("default config is valid");
    let obj = DlnObjective::new(train);
    for _ in 0..200 {
        let g = obj.gradient(&w).expect("finite gradient");
        w = w.add_scaled(-cfg.train.eta, &g).expect("finite step");
    }
    (obj, w)
}
