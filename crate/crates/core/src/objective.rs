//! Differentiable objectives with analytic gradients and Hessian-vector products.
//!
//! Two models are provided:
//!
//! - [`LinearMseObjective`]: `L(θ) = ‖Xθ − y‖² / 2` (no `1/n` factor).
//! - [`DlnObjective`]: the diagonal linear network `β = w₊² − w₋²` with
//!   `L(w) = (1/4n) Σⱼ (⟨β, x⁽ʲ⁾⟩ − y⁽ʲ⁾)²`.
//!
//! Each model keeps its own loss normalization; there is no global flag.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

/// Dense, finite parameter vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ParamVector(DVector<f64>);

impl ParamVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        Self::from_dvector(DVector::from_vec(values))
    }

    pub fn from_dvector(values: DVector<f64>) -> Result<Self> {
        if values.iter().all(|v| v.is_finite()) {
            Ok(Self(values))
        } else {
            Err(Error::NonFinite("parameter vector"))
        }
    }

    pub fn zeros(len: usize) -> Self {
        Self(DVector::zeros(len))
    }

    /// Stacks `(plus, minus)` into the DLN layout `w = (w₊, w₋)`.
    pub fn stacked(plus: &[f64], minus: &[f64]) -> Result<Self> {
        check_dim(plus.len(), minus.len())?;
        let mut v = Vec::with_capacity(plus.len() * 2);
        v.extend_from_slice(plus);
        v.extend_from_slice(minus);
        Self::new(v)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        self.0.as_slice()
    }

    pub fn as_dvector(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn into_dvector(self) -> DVector<f64> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn dot(&self, other: &ParamVector) -> Result<f64> {
        check_dim(self.len(), other.len())?;
        Ok(self.0.dot(&other.0))
    }

    /// `self + scale · dir`, failing if the result is not finite.
    pub fn add_scaled(&self, scale: f64, dir: &ParamVector) -> Result<ParamVector> {
        check_dim(self.len(), dir.len())?;
        Self::from_dvector(&self.0 + &dir.0 * scale)
    }

    /// `(other − self) / denom`.
    pub fn diff_quotient(&self, other: &ParamVector, denom: f64) -> Result<ParamVector> {
        check_dim(self.len(), other.len())?;
        Self::from_dvector((&other.0 - &self.0) / denom)
    }

    pub fn scaled(&self, s: f64) -> Result<ParamVector> {
        Self::from_dvector(&self.0 * s)
    }

    /// Splits a DLN parameter vector into `(w₊, w₋)`.
    pub fn halves(&self) -> Result<(&[f64], &[f64])> {
        if !self.len().is_multiple_of(2) {
            return Err(Error::InvalidParameter(format!(
                "DLN parameter vector must have even length, got {}",
                self.len()
            )));
        }
        Ok(self.as_slice().split_at(self.len() / 2))
    }
}

impl TryFrom<Vec<f64>> for ParamVector {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<ParamVector> for Vec<f64> {
    fn from(p: ParamVector) -> Vec<f64> {
        p.0.data.into()
    }
}

impl std::ops::Index<usize> for ParamVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Training or test data: `X` is `n × d` with samples as rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    x: DMatrix<f64>,
    y: DVector<f64>,
}

impl Dataset {
    pub fn new(x: DMatrix<f64>, y: DVector<f64>) -> Result<Self> {
        check_dim(x.nrows(), y.len())?;
        if !x.iter().chain(y.iter()).all(|v| v.is_finite()) {
            return Err(Error::NonFinite("dataset"));
        }
        Ok(Self { x, y })
    }

    /// Builds a dataset from row-major samples.
    pub fn from_rows(rows: &[Vec<f64>], y: Vec<f64>) -> Result<Self> {
        let n = rows.len();
        let d = rows.first().map_or(0, Vec::len);
        for r in rows {
            check_dim(d, r.len())?;
        }
        let x = DMatrix::from_fn(n, d, |i, j| rows[i][j]);
        Self::new(x, DVector::from_vec(y))
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    /// Number of samples.
    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    /// Input dimension.
    pub fn d(&self) -> usize {
        self.x.ncols()
    }

    /// `Xβ − y`.
    pub fn residual(&self, beta: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim(self.d(), beta.len())?;
        Ok(&self.x * beta - &self.y)
    }
}

/// Loss, gradient and Hessian-vector product of a twice-differentiable objective.
///
/// All methods are pure: the same inputs always give the same outputs.
pub trait Objective: Send + Sync {
    /// Length of the parameter vector.
    fn dim(&self) -> usize;

    fn loss(&self, theta: &ParamVector) -> Result<f64>;

    fn gradient(&self, theta: &ParamVector) -> Result<ParamVector>;

    fn hvp(&self, theta: &ParamVector, v: &ParamVector) -> Result<ParamVector>;

    fn loss_and_gradient(&self, theta: &ParamVector) -> Result<(f64, ParamVector)> {
        Ok((self.loss(theta)?, self.gradient(theta)?))
    }

    /// Downcast hook used by trainers that track DLN trajectory integrals.
    fn as_dln(&self) -> Option<&DlnObjective> {
        None
    }
}

/// `L(θ) = ‖Xθ − y‖² / 2`.
#[derive(Debug, Clone)]
pub struct LinearMseObjective {
    data: Dataset,
}

impl LinearMseObjective {
    pub fn new(data: Dataset) -> Self {
        Self { data }
    }

    pub fn data(&self) -> &Dataset {
        &self.data
    }

    fn residual(&self, theta: &ParamVector) -> Result<DVector<f64>> {
        self.data.residual(theta.as_dvector())
    }
}

impl Objective for LinearMseObjective {
    fn dim(&self) -> usize {
        self.data.d()
    }

    fn loss(&self, theta: &ParamVector) -> Result<f64> {
        Ok(self.residual(theta)?.norm_squared() / 2.0)
    }

    fn gradient(&self, theta: &ParamVector) -> Result<ParamVector> {
        let r = self.residual(theta)?;
        ParamVector::from_dvector(self.data.x.tr_mul(&r))
    }

    fn hvp(&self, theta: &ParamVector, v: &ParamVector) -> Result<ParamVector> {
        check_dim(self.dim(), theta.len())?;
        check_dim(self.dim(), v.len())?;
        let xv = &self.data.x * v.as_dvector();
        ParamVector::from_dvector(self.data.x.tr_mul(&xv))
    }

    fn loss_and_gradient(&self, theta: &ParamVector) -> Result<(f64, ParamVector)> {
        let r = self.residual(theta)?;
        let g = ParamVector::from_dvector(self.data.x.tr_mul(&r))?;
        Ok((r.norm_squared() / 2.0, g))
    }
}

/// Largest `d` for which [`DlnObjective::dense_hessian`] will assemble the matrix.
pub const DENSE_HESSIAN_MAX_D: usize = 64;

/// Diagonal linear network `⟨w₊² − w₋², x⟩` trained on squared error with `1/4n` scaling.
///
/// Parameters are laid out as `w = (w₊, w₋)` of length `2d`. With `X̃ = [X, −X]`
/// and `r = X̃w² − y`, the gradient is `(1/n)(X̃ᵀr) ∘ w` and the Hessian is
/// `(1/n)(diag(X̃ᵀr) + 2 diag(w) X̃ᵀX̃ diag(w))`.
#[derive(Debug, Clone)]
pub struct DlnObjective {
    data: Dataset,
}

/// Quantities shared by the DLN loss, gradient and trajectory integrands.
#[derive(Debug, Clone)]
pub struct DlnState {
    pub beta: DVector<f64>,
    /// `r = Xβ − y`
    pub residual: DVector<f64>,
    /// `b = Xᵀr`
    pub b: DVector<f64>,
}

impl DlnObjective {
    pub fn new(data: Dataset) -> Self {
        Self { data }
    }

    pub fn data(&self) -> &Dataset {
        &self.data
    }

    pub fn d(&self) -> usize {
        self.data.d()
    }

    pub fn n(&self) -> usize {
        self.data.n()
    }

    pub fn state(&self, w: &ParamVector) -> Result<DlnState> {
        check_dim(2 * self.d(), w.len())?;
        let beta = beta_from_w(w)?.into_dvector();
        let residual = self.data.residual(&beta)?;
        let b = self.data.x.tr_mul(&residual);
        Ok(DlnState { beta, residual, b })
    }

    fn loss_from_residual(&self, r: &DVector<f64>) -> f64 {
        r.norm_squared() / (4.0 * self.n() as f64)
    }

    pub(crate) fn gradient_from_state(&self, w: &ParamVector, st: &DlnState) -> Result<ParamVector> {
        let d = self.d();
        let inv_n = 1.0 / self.n() as f64;
        let ws = w.as_slice();
        let g = DVector::from_fn(2 * d, |k, _| {
            if k < d {
                inv_n * st.b[k] * ws[k]
            } else {
                -inv_n * st.b[k - d] * ws[k]
            }
        });
        ParamVector::from_dvector(g)
    }

    /// Dense `2d × 2d` Hessian; only for small `d` (oracle use).
    pub fn dense_hessian(&self, w: &ParamVector) -> Result<DMatrix<f64>> {
        let d = self.d();
        if d > DENSE_HESSIAN_MAX_D {
            return Err(Error::TooLargeForDense {
                what: "DLN Hessian",
                size: d,
                limit: DENSE_HESSIAN_MAX_D,
            });
        }
        let st = self.state(w)?;
        let n = self.n() as f64;
        let x = &self.data.x;
        let xt = DMatrix::from_fn(self.n(), 2 * d, |i, k| if k < d { x[(i, k)] } else { -x[(i, k - d)] });
        let bt = xt.tr_mul(&st.residual);
        let gram = xt.tr_mul(&xt);
        let ws = w.as_slice();
        Ok(DMatrix::from_fn(2 * d, 2 * d, |i, j| {
            let diag = if i == j { bt[i] } else { 0.0 };
            (diag + 2.0 * ws[i] * gram[(i, j)] * ws[j]) / n
        }))
    }
}

impl Objective for DlnObjective {
    fn dim(&self) -> usize {
        2 * self.d()
    }

    fn loss(&self, w: &ParamVector) -> Result<f64> {
        check_dim(2 * self.d(), w.len())?;
        let beta = beta_from_w(w)?.into_dvector();
        Ok(self.loss_from_residual(&self.data.residual(&beta)?))
    }

    fn gradient(&self, w: &ParamVector) -> Result<ParamVector> {
        let st = self.state(w)?;
        self.gradient_from_state(w, &st)
    }

    fn hvp(&self, w: &ParamVector, v: &ParamVector) -> Result<ParamVector> {
        let d = self.d();
        check_dim(2 * d, v.len())?;
        let st = self.state(w)?;
        let (ws, vs) = (w.as_slice(), v.as_slice());
        // X̃(w ∘ v) = X((w∘v)₊ − (w∘v)₋)
        let u = DVector::from_fn(d, |i, _| ws[i] * vs[i] - ws[i + d] * vs[i + d]);
        let s = self.data.x.tr_mul(&(&self.data.x * u));
        let inv_n = 1.0 / self.n() as f64;
        let out = DVector::from_fn(2 * d, |k, _| {
            let (bk, sk) = if k < d { (st.b[k], s[k]) } else { (-st.b[k - d], -s[k - d]) };
            inv_n * (bk * vs[k] + 2.0 * ws[k] * sk)
        });
        ParamVector::from_dvector(out)
    }

    fn loss_and_gradient(&self, w: &ParamVector) -> Result<(f64, ParamVector)> {
        let st = self.state(w)?;
        Ok((self.loss_from_residual(&st.residual), self.gradient_from_state(w, &st)?))
    }

    fn as_dln(&self) -> Option<&DlnObjective> {
        Some(self)
    }
}

/// `β = w₊² − w₋²` elementwise.
pub fn beta_from_w(w: &ParamVector) -> Result<ParamVector> {
    let (plus, minus) = w.halves()?;
    ParamVector::new(plus.iter().zip(minus).map(|(p, m)| p * p - m * m).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag_data() -> Dataset {
        Dataset::from_rows(&[vec![1.0, 0.0], vec![0.0, 2.0]], vec![1.0, 1.0]).unwrap()
    }

    fn one_d(x: f64, y: f64) -> DlnObjective {
        DlnObjective::new(Dataset::from_rows(&[vec![x]], vec![y]).unwrap())
    }

    fn pv(v: &[f64]) -> ParamVector {
        ParamVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn param_vector_rejects_non_finite() {
        assert!(ParamVector::new(vec![1.0, f64::NAN]).is_err());
        assert!(ParamVector::new(vec![f64::INFINITY]).is_err());
    }

    #[test]
    fn dataset_rejects_row_mismatch() {
        let err = Dataset::new(DMatrix::zeros(3, 2), DVector::zeros(2)).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { expected: 3, got: 2 }));
    }

    #[test]
    fn linear_grad_examples() {
        let obj = LinearMseObjective::new(diag_data());
        assert_eq!(obj.gradient(&pv(&[0.0, 0.0])).unwrap().as_slice(), &[-1.0, -2.0]);
        // Xθ = y
        assert_eq!(obj.gradient(&pv(&[1.0, 0.5])).unwrap().as_slice(), &[0.0, 0.0]);

        let id = LinearMseObjective::new(Dataset::from_rows(&[vec![1.0]], vec![0.0]).unwrap());
        assert_eq!(id.gradient(&pv(&[3.0])).unwrap().as_slice(), &[3.0]);
        assert_eq!(id.loss(&pv(&[3.0])).unwrap(), 4.5);
    }

    #[test]
    fn linear_dimension_mismatch() {
        let obj = LinearMseObjective::new(diag_data());
        assert!(matches!(
            obj.gradient(&pv(&[0.0])),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn dln_loss_examples() {
        for alpha in [0.1, 1.0, -3.0] {
            let obj = one_d(1.0, 2.0);
            assert_eq!(obj.loss(&pv(&[alpha, alpha])).unwrap(), 1.0);
        }
        assert_eq!(one_d(1.0, 1.0).loss(&pv(&[1.0, 1.0])).unwrap(), 0.25);
        // β = 4 − 1 = 3 = y / x
        assert_eq!(one_d(2.0, 6.0).loss(&pv(&[2.0, 1.0])).unwrap(), 0.0);
        assert!(one_d(1.0, 1.0).loss(&pv(&[1.0])).is_err());
    }

    #[test]
    fn dln_grad_examples() {
        let obj = one_d(1.0, 1.0);
        assert_eq!(obj.gradient(&pv(&[1.0, 0.0])).unwrap().as_slice(), &[0.0, 0.0]);
        assert_eq!(obj.gradient(&pv(&[1.0, 1.0])).unwrap().as_slice(), &[-1.0, 1.0]);

        let obj = DlnObjective::new(
            Dataset::from_rows(&[vec![1.0, -2.0, 0.5], vec![0.3, 1.0, 2.0]], vec![1.0, -1.0]).unwrap(),
        );
        let w = ParamVector::stacked(&[0.3, -0.7, 1.2], &[0.3, -0.7, 1.2]).unwrap();
        let g = obj.gradient(&w).unwrap();
        for i in 0..3 {
            assert_eq!(g[i], -g[i + 3]);
        }
    }

    #[test]
    fn dln_hvp_examples() {
        let obj = one_d(1.0, 1.0);
        let hv = obj.hvp(&pv(&[1.0, 0.0]), &pv(&[1.0, 0.0])).unwrap();
        assert_eq!(hv.as_slice(), &[2.0, 0.0]);
        let zero = obj.hvp(&pv(&[0.4, -0.2]), &pv(&[0.0, 0.0])).unwrap();
        assert_eq!(zero.as_slice(), &[0.0, 0.0]);
    }

    #[test]
    fn dln_hvp_at_interpolation_drops_residual_term() {
        // X = [[1, 2]], y = 3, w₊ = (1, 1), w₋ = 0 → β = (1, 1), r = 0.
        let obj = DlnObjective::new(Dataset::from_rows(&[vec![1.0, 2.0]], vec![3.0]).unwrap());
        let w = pv(&[1.0, 1.0, 0.0, 0.0]);
        let v = pv(&[0.5, -1.0, 2.0, 3.0]);
        let hv = obj.hvp(&w, &v).unwrap();
        // (2/n) diag(w) X̃ᵀX̃ diag(w) v with X̃ = [1, 2, −1, −2]
        let xt = [1.0, 2.0, -1.0, -2.0];
        let s: f64 = (0..4).map(|k| xt[k] * w[k] * v[k]).sum();
        for k in 0..4 {
            assert!((hv[k] - 2.0 * w[k] * xt[k] * s).abs() < 1e-14);
        }
    }

    #[test]
    fn dense_hessian_matches_hvp() {
        let obj = DlnObjective::new(
            Dataset::from_rows(&[vec![1.0, -2.0], vec![0.3, 1.0], vec![2.0, 0.1]], vec![1.0, -1.0, 0.5]).unwrap(),
        );
        let w = pv(&[0.3, -0.7, 1.1, 0.2]);
        let h = obj.dense_hessian(&w).unwrap();
        for k in 0..4 {
            let mut e = vec![0.0; 4];
            e[k] = 1.0;
            let col = obj.hvp(&w, &pv(&e)).unwrap();
            for i in 0..4 {
                assert!((h[(i, k)] - col[i]).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn dense_hessian_refuses_large_d() {
        let d = DENSE_HESSIAN_MAX_D + 1;
        let obj = DlnObjective::new(Dataset::new(DMatrix::zeros(1, d), DVector::zeros(1)).unwrap());
        assert!(matches!(
            obj.dense_hessian(&ParamVector::zeros(2 * d)),
            Err(Error::TooLargeForDense { .. })
        ));
    }

    #[test]
    fn beta_from_w_examples() {
        assert_eq!(beta_from_w(&pv(&[0.3, -2.0, 0.3, -2.0])).unwrap().as_slice(), &[0.0, 0.0]);
        assert_eq!(beta_from_w(&pv(&[2.0, 1.0])).unwrap().as_slice(), &[3.0]);
        assert_eq!(beta_from_w(&pv(&[0.0, 1.0, 1.0, 0.0])).unwrap().as_slice(), &[-1.0, 1.0]);
        assert!(beta_from_w(&pv(&[1.0, 2.0, 3.0])).is_err());
    }

    #[test]
    fn param_vector_serde_validates() {
        let p: ParamVector = serde_json::from_str("[1.0, 2.5]").unwrap();
        assert_eq!(p.as_slice(), &[1.0, 2.5]);
        assert_eq!(serde_json::to_string(&p).unwrap(), "[1.0,2.5]");
    }
}
