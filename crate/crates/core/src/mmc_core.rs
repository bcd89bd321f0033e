//! Maximum margin criterion: projections maximizing `w^T (S_b - gamma S_w) w`
//! over orthonormal `w`.
//!
//! Two solution paths are offered. The direct path decomposes the `d x d`
//! difference matrix. The kernel path never forms a `d x d` matrix: it builds
//! an orthonormal basis of the sample span from the `n x n` sample kernel
//! `K = X^T X`, compresses `X L X^T` onto that basis using `K L K`, and maps
//! the leading Ritz vectors back to feature space. [`fit`] chooses between
//! them with the dimensional threshold `theta`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::numerics::{self, canonicalize_signs, orthonormalize, serde_matrix, symmetrize, top_eigenpairs};
use crate::scatter::{class_stats, laplacians, scatters};

/// Eigenvalues at or below `EPS_POS * max(1, lambda_max)` count as nonpositive.
pub const EPS_POS: f64 = 1e-10;

/// Relative cutoff for the numerical rank of an anchor Gram matrix.
pub const GRAM_RANK_TOL: f64 = 1e-10;

pub const DEFAULT_GAMMA: f64 = 1.0;
pub const DEFAULT_THETA: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    /// Eigendecomposition of the `d x d` scatter difference.
    Direct,
    /// Kernel path over all samples.
    Kernel,
    /// Kernel path over a random subset of anchor samples.
    Sampled,
    /// Principal components (harness baseline).
    Pca,
}

impl std::fmt::Display for Branch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Branch::Direct => "direct",
            Branch::Kernel => "kernel",
            Branch::Sampled => "sampled",
            Branch::Pca => "pca",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MmcParams {
    /// Target dimension.
    pub r: usize,
    pub gamma: f64,
    /// Dimensional threshold: the direct path runs when `d < theta`.
    pub theta: usize,
    #[serde(default)]
    pub branch_override: Option<Branch>,
}

impl Default for MmcParams {
    fn default() -> Self {
        Self {
            r: 1,
            gamma: DEFAULT_GAMMA,
            theta: DEFAULT_THETA,
            branch_override: None,
        }
    }
}

impl MmcParams {
    pub fn new(r: usize) -> Self {
        Self {
            r,
            ..Self::default()
        }
    }

    pub fn with_gamma(self, gamma: f64) -> Self {
        Self { gamma, ..self }
    }

    pub fn with_branch(self, branch: Branch) -> Self {
        Self {
            branch_override: Some(branch),
            ..self
        }
    }

    pub(crate) fn validate(&self, d: usize, n: usize) -> Result<()> {
        if !(self.gamma >= 0.0) || !self.gamma.is_finite() {
            return Err(Error::NegativeGamma(self.gamma));
        }
        if self.theta < 1 {
            return Err(Error::InvalidParam("theta must be at least 1".into()));
        }
        if self.r < 1 || self.r > d.min(n) {
            return Err(Error::InvalidParam(format!(
                "target dimension r = {} must lie in 1..={}",
                self.r,
                d.min(n)
            )));
        }
        Ok(())
    }

    /// True when the threshold rule (or an override) selects the direct path.
    pub fn use_direct(&self, d: usize) -> bool {
        match self.branch_override {
            Some(Branch::Direct) => true,
            Some(_) => false,
            None => d < self.theta,
        }
    }
}

/// A `d x r` projection with orthonormal columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "LinearModelRecord", try_from = "LinearModelRecord")]
pub struct LinearModel {
    pub w: DMatrix<f64>,
    pub params: MmcParams,
    /// `w_i^T (S_b - gamma S_w) w_i` for each column.
    pub objective: DVector<f64>,
    pub branch: Branch,
}

#[derive(Serialize, Deserialize)]
struct LinearModelRecord {
    d: usize,
    r: usize,
    gamma: f64,
    theta: usize,
    branch: Branch,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    branch_override: Option<Branch>,
    #[serde(with = "serde_matrix")]
    w: DMatrix<f64>,
    objective: Vec<f64>,
}

impl From<LinearModel> for LinearModelRecord {
    fn from(m: LinearModel) -> Self {
        Self {
            d: m.w.nrows(),
            r: m.w.ncols(),
            gamma: m.params.gamma,
            theta: m.params.theta,
            branch: m.branch,
            branch_override: m.params.branch_override,
            w: m.w,
            objective: m.objective.as_slice().to_vec(),
        }
    }
}

impl TryFrom<LinearModelRecord> for LinearModel {
    type Error = String;

    fn try_from(rec: LinearModelRecord) -> Result<Self, String> {
        if rec.w.shape() != (rec.d, rec.r) || rec.objective.len() != rec.r {
            return Err(format!("record shape does not match d = {}, r = {}", rec.d, rec.r));
        }
        Ok(Self {
            w: rec.w,
            params: MmcParams {
                r: rec.r,
                gamma: rec.gamma,
                theta: rec.theta,
                branch_override: rec.branch_override,
            },
            objective: DVector::from_vec(rec.objective),
            branch: rec.branch,
        })
    }
}

impl LinearModel {
    pub fn input_dim(&self) -> usize {
        self.w.nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.w.ncols()
    }

    /// Projects the columns of `x`: `W^T x`.
    pub fn transform(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        transform(self, x)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

pub fn transform(model: &LinearModel, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if x.nrows() != model.w.nrows() {
        return Err(Error::ShapeMismatch(format!(
            "model expects {} features, input has {}",
            model.w.nrows(),
            x.nrows()
        )));
    }
    Ok(model.w.tr_mul(x))
}

/// Top-`r` eigenvectors of `S_b - gamma S_w`.
pub fn fit_direct(ds: &LabeledDataset, params: &MmcParams) -> Result<LinearModel> {
    params.validate(ds.dim(), ds.len())?;
    let stats = class_stats(ds)?;
    let diff = scatters(ds, &stats).difference(params.gamma);
    let (w, objective) = top_eigenpairs(&diff, params.r)?;
    if objective.iter().any(|v| !v.is_finite()) {
        return Err(Error::RankDeficient {
            requested: params.r,
            available: objective.iter().filter(|v| v.is_finite()).count(),
        });
    }
    Ok(LinearModel {
        w,
        params: *params,
        objective,
        branch: Branch::Direct,
    })
}

/// Kernel path with every sample as an anchor.
pub fn fit_kernel(ds: &LabeledDataset, params: &MmcParams) -> Result<LinearModel> {
    params.validate(ds.dim(), ds.len())?;
    if ds.num_classes() < 2 {
        return Err(Error::SingleClass);
    }
    let lap = laplacians(ds.labels(), params.gamma)?;
    let x = ds.x();
    let kernel = x.tr_mul(x);
    let w = anchored_directions(x, &kernel, &lap.l, params.r)?;
    let objective = laplacian_objective(&w, x, &lap.l);
    Ok(LinearModel {
        w,
        params: *params,
        objective,
        branch: Branch::Kernel,
    })
}

/// Direct path when `d < theta`, kernel path otherwise.
pub fn fit(ds: &LabeledDataset, params: &MmcParams) -> Result<LinearModel> {
    if params.use_direct(ds.dim()) {
        fit_direct(ds, params)
    } else {
        fit_kernel(ds, params)
    }
}

/// `w_i^T X L X^T w_i` per column, without forming any `d x d` matrix.
pub(crate) fn laplacian_objective(w: &DMatrix<f64>, x: &DMatrix<f64>, l: &DMatrix<f64>) -> DVector<f64> {
    let y = w.tr_mul(x);
    let yl = &y * l;
    DVector::from_iterator(y.nrows(), (0..y.nrows()).map(|i| yl.row(i).dot(&y.row(i))))
}

/// Orthonormal basis of the anchor span, derived from the anchor Gram matrix.
pub(crate) struct AnchorBasis {
    /// `d x rho` orthonormal columns `A E Lambda^{-1/2}`.
    pub q: DMatrix<f64>,
    /// `t x rho` coefficients `E Lambda^{-1/2}`, so that `q = A * coeffs`.
    pub coeffs: DMatrix<f64>,
}

pub(crate) fn anchor_basis(anchors: &DMatrix<f64>) -> Result<AnchorBasis> {
    let gram = symmetrize(&anchors.tr_mul(anchors));
    let eig = numerics::sym_eig(&gram)?;
    let top = eig.values.iter().cloned().fold(0.0, f64::max);
    let rank = eig.values.iter().filter(|&&v| v > GRAM_RANK_TOL * top && v > 0.0).count();
    let mut coeffs = eig.vectors.columns(0, rank).into_owned();
    for (k, mut col) in coeffs.column_iter_mut().enumerate() {
        col.unscale_mut(eig.values[k].sqrt());
    }
    let q = anchors * &coeffs;
    Ok(AnchorBasis { q, coeffs })
}

/// Leading `r` Ritz vectors of a compressed scatter `reduced = Q^T S Q`,
/// mapped back through `q` and orthonormalized. Fails unless `r` of them carry
/// a positive margin.
pub(crate) fn ritz_directions(q: &DMatrix<f64>, reduced: &DMatrix<f64>, r: usize) -> Result<DMatrix<f64>> {
    let eig = numerics::sym_eig(&symmetrize(reduced))?;
    let top = eig.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let cutoff = EPS_POS * top.max(1.0);
    let positive = eig.values.iter().filter(|&&v| v > cutoff).count();
    if positive < r {
        return Err(Error::InsufficientPositiveSpectrum {
            requested: r,
            available: positive,
        });
    }
    let f = q * eig.vectors.columns(0, r);
    let mut w = orthonormalize(&f)?;
    canonicalize_signs(&mut w);
    Ok(w)
}

/// Solves the margin problem restricted to the span of `anchors`.
///
/// `m` is the sample kernel `A^T X` (`t x n`) and `l` the MMC Laplacian, so the
/// discriminant scatter seen by the anchors is `M L M^T`.
pub(crate) fn anchored_directions(
    anchors: &DMatrix<f64>,
    m: &DMatrix<f64>,
    l: &DMatrix<f64>,
    r: usize,
) -> Result<DMatrix<f64>> {
    let basis = anchor_basis(anchors)?;
    if basis.q.ncols() < r {
        return Err(Error::InsufficientPositiveSpectrum {
            requested: r,
            available: basis.q.ncols(),
        });
    }
    // Q^T X L X^T Q = C^T (M L M^T) C with C = E Lambda^{-1/2}
    let y = basis.coeffs.tr_mul(m);
    let reduced = &y * l * y.transpose();
    ritz_directions(&basis.q, &reduced, r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::max_principal_angle;

    fn toy() -> LabeledDataset {
        LabeledDataset::new(DMatrix::from_row_slice(1, 4, &[0.0, 2.0, 4.0, 6.0]), vec![0, 0, 1, 1])
            .unwrap()
    }

    #[test]
    fn direct_toy() {
        let m = fit_direct(&toy(), &MmcParams::new(1)).unwrap();
        assert_eq!(m.w[(0, 0)], 1.0);
        assert!((m.objective[0] - 12.0).abs() < 1e-12);
        assert_eq!(m.branch, Branch::Direct);
    }

    #[test]
    fn kernel_toy() {
        let params = MmcParams::new(1).with_branch(Branch::Kernel);
        let m = fit(&toy(), &params).unwrap();
        assert_eq!(m.branch, Branch::Kernel);
        assert!((m.w[(0, 0)] - 1.0).abs() < 1e-12);
        assert!((m.objective[0] - 12.0).abs() < 1e-9);
    }

    fn two_tight_classes() -> LabeledDataset {
        let pts = [
            (1.0, 0.1),
            (1.0, -0.1),
            (1.1, 0.0),
            (-1.0, 0.1),
            (-1.0, -0.1),
            (-1.1, 0.0),
        ];
        let x = DMatrix::from_fn(2, 6, |i, j| if i == 0 { pts[j].0 } else { pts[j].1 });
        LabeledDataset::new(x, vec![0, 0, 0, 1, 1, 1]).unwrap()
    }

    #[test]
    fn separating_direction_is_first_axis() {
        let ds = two_tight_classes();
        let m = fit_direct(&ds, &MmcParams::new(1)).unwrap();
        // hand oracle: S_b = diag(6.4067, 0), S_w = diag(0.0133, 0.04), S_b - S_w is diagonal
        assert!((m.w[(0, 0)] - 1.0).abs() < 1e-12 && m.w[(1, 0)].abs() < 1e-12);
        let k = fit_kernel(&ds, &MmcParams::new(1)).unwrap();
        assert!(max_principal_angle(&m.w, &k.w).unwrap() < 1e-10);
    }

    #[test]
    fn large_gamma_makes_every_margin_negative() {
        let ds = two_tight_classes();
        let m = fit_direct(&ds, &MmcParams::new(2).with_gamma(1e4)).unwrap();
        assert!(m.objective.iter().all(|&v| v < 0.0));
        assert!(matches!(
            fit_kernel(&ds, &MmcParams::new(1).with_gamma(1e4)),
            Err(Error::InsufficientPositiveSpectrum { .. })
        ));
    }

    #[test]
    fn one_sample_per_class_ignores_gamma() {
        let x = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 2.0, 0.5, 1.0, 0.0, 0.0, 3.0, 1.0]);
        let ds = LabeledDataset::new(x, vec![0, 1, 2]).unwrap();
        let base = MmcParams::new(2).with_branch(Branch::Kernel);
        let a = fit(&ds, &base.with_gamma(0.0)).unwrap();
        let b = fit(&ds, &base.with_gamma(7.0)).unwrap();
        assert_eq!(a.w, b.w);
    }

    #[test]
    fn dispatch_rule() {
        let p = MmcParams::new(1);
        assert!(p.use_direct(1));
        assert!(!p.use_direct(2000));
        assert!(!p.with_branch(Branch::Kernel).use_direct(1));
        assert!(p.with_branch(Branch::Direct).use_direct(5000));
    }

    #[test]
    fn parameter_validation() {
        let ds = toy();
        assert!(matches!(fit(&ds, &MmcParams::new(2)), Err(Error::InvalidParam(_))));
        assert!(matches!(fit(&ds, &MmcParams::new(0)), Err(Error::InvalidParam(_))));
        assert!(matches!(
            fit(&ds, &MmcParams::new(1).with_gamma(-1.0)),
            Err(Error::NegativeGamma(_))
        ));
    }

    #[test]
    fn transform_contract() {
        let model = LinearModel {
            w: DMatrix::from_column_slice(2, 1, &[1.0, 0.0]),
            params: MmcParams::new(1),
            objective: DVector::from_element(1, 0.0),
            branch: Branch::Direct,
        };
        let y = model.transform(&DMatrix::from_column_slice(2, 1, &[3.0, 4.0])).unwrap();
        assert_eq!(y[(0, 0)], 3.0);
        assert!(model.transform(&DMatrix::zeros(2, 3)).unwrap().iter().all(|&v| v == 0.0));
        assert!(matches!(
            model.transform(&DMatrix::zeros(3, 1)),
            Err(Error::ShapeMismatch(_))
        ));
        let fitted = fit(&toy(), &MmcParams::new(1)).unwrap();
        assert_eq!(fitted.transform(toy().x()).unwrap().shape(), (1, 4));
    }

    #[test]
    fn json_round_trip_is_bit_exact() {
        let ds = two_tight_classes();
        let m = fit_kernel(&ds, &MmcParams::new(1).with_gamma(0.3)).unwrap();
        let back = LinearModel::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(back.w, m.w);
        assert_eq!(back.objective, m.objective);
        assert_eq!(back.branch, Branch::Kernel);
        assert_eq!(back.params.gamma, 0.3);
    }
}
