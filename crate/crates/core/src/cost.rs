//! Matrix-multiplication counts for one regularized-gradient evaluation of an
//! `L`-layer fully connected network without biases.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostMethod {
    PlainGrad,
    Fgr,
    Bgr,
    Db,
}

impl CostMethod {
    pub const ALL: [CostMethod; 4] = [CostMethod::PlainGrad, CostMethod::Fgr, CostMethod::Bgr, CostMethod::Db];
}

pub fn matmul_count(depth: u64, method: CostMethod) -> Result<u64> {
    if depth < 1 {
        return Err(Error::InvalidParameter("network depth must be at least 1".into()));
    }
    let l = depth;
    Ok(match method {
        CostMethod::PlainGrad => 3 * l - 1,
        CostMethod::Fgr | CostMethod::Bgr => 6 * l - 2,
        CostMethod::Db => 9 * l - 5,
    })
}

impl CostMethod {
    pub fn name(self) -> &'static str {
        match self {
            CostMethod::PlainGrad => "plain_grad",
            CostMethod::Fgr => "fgr",
            CostMethod::Bgr => "bgr",
            CostMethod::Db => "db",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub depth: u64,
    /// Keyed by [`CostMethod::name`].
    pub counts: BTreeMap<String, u64>,
    /// DB count over F-GR count.
    pub db_over_fgr: f64,
}

pub fn cost_report(depths: &[u64]) -> Result<Vec<CostReport>> {
    if depths.is_empty() {
        return Err(Error::Empty("depth list"));
    }
    depths
        .iter()
        .map(|&depth| {
            let mut counts = BTreeMap::new();
            for m in CostMethod::ALL {
                counts.insert(m.name().to_string(), matmul_count(depth, m)?);
            }
            let db_over_fgr = counts["db"] as f64 / counts["fgr"] as f64;
            Ok(CostReport { depth, counts, db_over_fgr })
        })
        .collect()
}
