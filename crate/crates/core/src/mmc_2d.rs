//! Two-directional MMC for matrix-valued samples: a left projection `P`
//! (`d1 x l`) and a right projection `Q` (`d2 x r`) applied as `y = P^T x Q`.
//!
//! Each side is solved once and independently from the original directional
//! scatters. A side whose length reaches `theta` is solved economically: the
//! deviation matrices of that side are stacked into one wide data matrix, a
//! seeded set of its columns becomes the anchor set, and the side's scatter is
//! compressed onto the anchor span exactly as in random MMC.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::data::Dataset2D;
use crate::error::{Error, Result};
use crate::mmc_core::{anchor_basis, DEFAULT_GAMMA, DEFAULT_THETA};
use crate::numerics::{self, canonicalize_signs, orthonormalize, serde_matrix, symmetrize, top_eigenpairs};
use crate::scatter::{scatters_2d, stats_2d, Stats2D};
use crate::seed;

const LEFT_STREAM: u64 = 1;
const RIGHT_STREAM: u64 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mmc2dParams {
    /// Left (height) target dimension.
    pub l: usize,
    /// Right (width) target dimension.
    pub r: usize,
    pub gamma: f64,
    pub theta: usize,
    /// Drives anchor selection and random expansions only.
    pub seed: u64,
}

impl Mmc2dParams {
    pub fn new(l: usize, r: usize) -> Self {
        Self {
            l,
            r,
            gamma: DEFAULT_GAMMA,
            theta: DEFAULT_THETA,
            seed: 0,
        }
    }

    fn validate(&self, d1: usize, d2: usize) -> Result<()> {
        if !(self.gamma >= 0.0) || !self.gamma.is_finite() {
            return Err(Error::NegativeGamma(self.gamma));
        }
        if self.theta < 1 {
            return Err(Error::InvalidParam("theta must be at least 1".into()));
        }
        if self.l < 1 || self.l > d1 {
            return Err(Error::InvalidParam(format!("l = {} must lie in 1..={d1}", self.l)));
        }
        if self.r < 1 || self.r > d2 {
            return Err(Error::InvalidParam(format!("r = {} must lie in 1..={d2}", self.r)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct L2d2Params {
    pub base: Mmc2dParams,
    /// Expanded height.
    pub h1: usize,
    /// Expanded width.
    pub h2: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BilinearModel {
    pub d1: usize,
    pub d2: usize,
    pub l: usize,
    pub r: usize,
    pub gamma: f64,
    #[serde(with = "serde_matrix")]
    pub p: DMatrix<f64>,
    #[serde(with = "serde_matrix")]
    pub q: DMatrix<f64>,
    /// `p_i^T (S_bl - gamma S_wl) p_i`.
    pub left_objective: Vec<f64>,
    /// `q_j^T (S_br - gamma S_wr) q_j`.
    pub right_objective: Vec<f64>,
}

impl BilinearModel {
    pub fn transform(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        transform_2d(self, x)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// `P^T x Q`.
pub fn transform_2d(model: &BilinearModel, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if x.shape() != (model.d1, model.d2) {
        return Err(Error::ShapeMismatch(format!(
            "model expects {}x{} samples, got {}x{}",
            model.d1,
            model.d2,
            x.nrows(),
            x.ncols()
        )));
    }
    Ok(model.p.tr_mul(x) * &model.q)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Side {
    Left,
    Right,
}

impl Side {
    fn orient(self, m: &DMatrix<f64>) -> DMatrix<f64> {
        match self {
            Side::Left => m.clone(),
            Side::Right => m.transpose(),
        }
    }
}

/// Deviation blocks of one side, stacked side by side in canonical order so
/// that `S_b = between * between^T` and `S_w = within * within^T`.
struct SideBlocks {
    between: DMatrix<f64>,
    within: DMatrix<f64>,
    /// Deviations from the global mean, the anchor pool.
    total: DMatrix<f64>,
}

fn hstack(blocks: &[DMatrix<f64>]) -> DMatrix<f64> {
    let rows = blocks.first().map_or(0, |b| b.nrows());
    let cols = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let mut at = 0;
    for b in blocks {
        out.columns_mut(at, b.ncols()).copy_from(b);
        at += b.ncols();
    }
    out
}

fn side_blocks(ds: &Dataset2D, stats: &Stats2D, side: Side) -> SideBlocks {
    let between: Vec<_> = stats
        .means
        .iter()
        .zip(&stats.counts)
        .map(|(m, &k)| side.orient(&((m - &stats.global) * (k as f64).sqrt())))
        .collect();
    let within: Vec<_> = stats
        .order
        .iter()
        .map(|&i| side.orient(&(&ds.samples()[i] - &stats.means[ds.labels()[i]])))
        .collect();
    let total: Vec<_> = stats
        .order
        .iter()
        .map(|&i| side.orient(&(&ds.samples()[i] - &stats.global)))
        .collect();
    SideBlocks {
        between: hstack(&between),
        within: hstack(&within),
        total: hstack(&total),
    }
}

/// `diag(P^T (S_b - gamma S_w) P)` from the stacked blocks.
fn side_objective(p: &DMatrix<f64>, blocks: &SideBlocks, gamma: f64) -> Vec<f64> {
    let b = p.tr_mul(&blocks.between);
    let w = p.tr_mul(&blocks.within);
    (0..p.ncols())
        .map(|i| b.row(i).norm_squared() - gamma * w.row(i).norm_squared())
        .collect()
}

/// Leading Ritz vectors of the side scatter on the span of `anchors`.
fn economical_side(blocks: &SideBlocks, anchors: &DMatrix<f64>, k: usize, gamma: f64) -> Result<DMatrix<f64>> {
    let basis = anchor_basis(anchors)?;
    if basis.q.ncols() < k {
        return Err(Error::RankDeficient {
            requested: k,
            available: basis.q.ncols(),
        });
    }
    let yb = basis.coeffs.tr_mul(&anchors.tr_mul(&blocks.between));
    let yw = basis.coeffs.tr_mul(&anchors.tr_mul(&blocks.within));
    let reduced = symmetrize(&(&yb * yb.transpose() - &yw * yw.transpose() * gamma));
    if reduced.iter().all(|&v| v == 0.0) {
        let mut p = basis.q.columns(0, k).into_owned();
        canonicalize_signs(&mut p);
        return Ok(p);
    }
    let eig = numerics::sym_eig(&reduced)?;
    let mut p = orthonormalize(&(&basis.q * eig.vectors.columns(0, k)))?;
    canonicalize_signs(&mut p);
    Ok(p)
}

fn pool_anchors(pool: &DMatrix<f64>, k: usize, seed: u64) -> DMatrix<f64> {
    let t = (2 * k).min(pool.ncols());
    pool.select_columns(&seed::sample_indices(pool.ncols(), t, seed))
}

struct SideFit {
    p: DMatrix<f64>,
    objective: Vec<f64>,
}

fn fit_side(
    ds: &Dataset2D,
    stats: &Stats2D,
    direct_diff: impl FnOnce() -> DMatrix<f64>,
    side: Side,
    k: usize,
    params: &Mmc2dParams,
    stream: u64,
) -> Result<SideFit> {
    let len = match side {
        Side::Left => ds.d1(),
        Side::Right => ds.d2(),
    };
    if len < params.theta {
        let (p, values) = top_eigenpairs(&direct_diff(), k)?;
        return Ok(SideFit {
            p,
            objective: values.as_slice().to_vec(),
        });
    }
    let blocks = side_blocks(ds, stats, side);
    let anchors = pool_anchors(&blocks.total, k, seed::derive_seed(params.seed, stream));
    let p = economical_side(&blocks, &anchors, k, params.gamma)?;
    let objective = side_objective(&p, &blocks, params.gamma);
    Ok(SideFit { p, objective })
}

/// Bi-directional MMC: `P` from `S_bl - gamma S_wl`, `Q` from `S_br - gamma S_wr`.
pub fn fit_2d2(ds: &Dataset2D, params: &Mmc2dParams) -> Result<BilinearModel> {
    params.validate(ds.d1(), ds.d2())?;
    let stats = stats_2d(ds)?;
    let scatter = if ds.d1() < params.theta || ds.d2() < params.theta {
        Some(scatters_2d(ds)?)
    } else {
        None
    };
    let left = fit_side(
        ds,
        &stats,
        || scatter.as_ref().map(|s| &s.s_bl - &s.s_wl * params.gamma).unwrap_or_default(),
        Side::Left,
        params.l,
        params,
        LEFT_STREAM,
    )?;
    let right = fit_side(
        ds,
        &stats,
        || scatter.as_ref().map(|s| &s.s_br - &s.s_wr * params.gamma).unwrap_or_default(),
        Side::Right,
        params.r,
        params,
        RIGHT_STREAM,
    )?;
    Ok(BilinearModel {
        d1: ds.d1(),
        d2: ds.d2(),
        l: params.l,
        r: params.r,
        gamma: params.gamma,
        p: left.p,
        q: right.p,
        left_objective: left.objective,
        right_objective: right.objective,
    })
}

/// Single-layer layered 2D MMC with random Gaussian expansions
/// `P_rand` (`h1 x d1`) and `Q_rand` (`h2 x d2`).
pub fn fit_l2d2(ds: &Dataset2D, params: &L2d2Params) -> Result<BilinearModel> {
    if params.h1 < 1 || params.h2 < 1 {
        return Err(Error::InvalidParam("expanded dimensions must be at least 1".into()));
    }
    let p_rand = seed::gaussian_matrix(params.h1, ds.d1(), seed::derive_seed(params.base.seed, 11));
    let q_rand = seed::gaussian_matrix(params.h2, ds.d2(), seed::derive_seed(params.base.seed, 12));
    fit_l2d2_with(ds, params, &p_rand, &q_rand)
}

/// [`fit_l2d2`] with explicit expansion matrices.
///
/// Samples are expanded to `P_rand x Q_rand^T`; each side is solved on the
/// expanded scatters (economically, from one seeded sample's columns or rows,
/// once the expanded length reaches `theta`) and mapped back as
/// `P_rand^T p`, then re-orthonormalized.
pub fn fit_l2d2_with(
    ds: &Dataset2D,
    params: &L2d2Params,
    p_rand: &DMatrix<f64>,
    q_rand: &DMatrix<f64>,
) -> Result<BilinearModel> {
    let base = &params.base;
    base.validate(ds.d1(), ds.d2())?;
    if p_rand.shape() != (params.h1, ds.d1()) || q_rand.shape() != (params.h2, ds.d2()) {
        return Err(Error::ShapeMismatch(format!(
            "expansions must be {}x{} and {}x{}",
            params.h1,
            ds.d1(),
            params.h2,
            ds.d2()
        )));
    }
    if base.l > params.h1 || base.r > params.h2 {
        return Err(Error::InvalidParam(format!(
            "targets {}x{} exceed expanded size {}x{}",
            base.l, base.r, params.h1, params.h2
        )));
    }
    let expanded: Vec<_> = ds
        .samples()
        .iter()
        .map(|x| p_rand * x * q_rand.transpose())
        .collect();
    let wide = Dataset2D::with_class_names(expanded, ds.labels().to_vec(), ds.class_names().to_vec())?;
    let stats = stats_2d(&wide)?;
    let orig_stats = stats_2d(ds)?;

    let solve = |side: Side, k: usize, len: usize, stream: u64, back: &DMatrix<f64>| -> Result<(DMatrix<f64>, Vec<f64>)> {
        let blocks = side_blocks(&wide, &stats, side);
        let expanded_dirs = if len < base.theta {
            let diff = symmetrize(
                &(&blocks.between * blocks.between.transpose()
                    - &blocks.within * blocks.within.transpose() * base.gamma),
            );
            top_eigenpairs(&diff, k)?.0
        } else {
            // one seeded sample supplies the anchor columns (rows for the right side)
            let pick = seed::sample_indices(wide.len(), 1, seed::derive_seed(base.seed, stream))[0];
            let sample = side.orient(&(&wide.samples()[pick] - &stats.global));
            let anchors = pool_anchors(&sample, k, seed::derive_seed(base.seed, stream + 100));
            economical_side(&blocks, &anchors, k, base.gamma)?
        };
        let mut p = orthonormalize(&back.tr_mul(&expanded_dirs))?;
        canonicalize_signs(&mut p);
        let objective = side_objective(&p, &side_blocks(ds, &orig_stats, side), base.gamma);
        Ok((p, objective))
    };
    let (p, left_objective) = solve(Side::Left, base.l, params.h1, LEFT_STREAM, p_rand)?;
    let (q, right_objective) = solve(Side::Right, base.r, params.h2, RIGHT_STREAM, q_rand)?;
    Ok(BilinearModel {
        d1: ds.d1(),
        d2: ds.d2(),
        l: base.l,
        r: base.r,
        gamma: base.gamma,
        p,
        q,
        left_objective,
        right_objective,
    })
}
