//! Random MMC (anchors drawn from a random subset of `t` samples) and layered
//! MMC (a random expansion `h(x) = P P^T x` followed by random MMC), with
//! multi-layer stacking.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::mmc_core::{self, anchored_directions, laplacian_objective, Branch, LinearModel, MmcParams};
use crate::numerics::serde_matrix;
use crate::scatter::laplacians;
use crate::seed;

/// Seed stream for the expansion matrix of a layer; anchors use the layer seed itself.
const PROJECTION_STREAM: u64 = 0x5052_4f4a;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RmmcParams {
    pub base: MmcParams,
    /// Number of anchor samples; `None` means `2 r`.
    pub t: Option<usize>,
    pub seed: u64,
}

impl RmmcParams {
    pub fn new(base: MmcParams, seed: u64) -> Self {
        Self {
            base,
            t: None,
            seed,
        }
    }

    pub fn with_t(self, t: usize) -> Self {
        Self { t: Some(t), ..self }
    }

    /// Anchor count after applying the `2 r` default.
    pub fn resolved_t(&self) -> usize {
        self.t.unwrap_or(2 * self.base.r)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LmmcParams {
    pub rmmc: RmmcParams,
    /// Columns of the random expansion matrix `P` (`d x g`).
    pub g: usize,
    pub layers: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerRecord {
    /// Expansion matrix `P`; the layer applies `B = P P^T` as `P (P^T x)`.
    #[serde(with = "serde_matrix")]
    pub p: DMatrix<f64>,
    pub model: LinearModel,
    pub seed: u64,
}

impl LayerRecord {
    fn expand(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        expand(&self.p, x)
    }

    /// `W^T P P^T x`.
    pub fn apply(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if x.nrows() != self.p.nrows() {
            return Err(Error::ShapeMismatch(format!(
                "layer expects {} features, input has {}",
                self.p.nrows(),
                x.nrows()
            )));
        }
        self.model.transform(&self.expand(x))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayeredModel {
    pub params: LmmcParams,
    pub input_dim: usize,
    /// Layers in application order.
    pub layers: Vec<LayerRecord>,
}

impl LayeredModel {
    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(self.input_dim, |l| l.model.output_dim())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

fn expand(p: &DMatrix<f64>, x: &DMatrix<f64>) -> DMatrix<f64> {
    p * p.tr_mul(x)
}

/// Anchor indices used by [`fit_rmmc`] for `n` samples.
pub fn select_anchors(n: usize, t: usize, seed: u64) -> Result<Vec<usize>> {
    if t == 0 {
        return Err(Error::InvalidParam("t must be at least 1".into()));
    }
    if t > n {
        return Err(Error::TTooLarge { t, n });
    }
    Ok(seed::sample_indices(n, t, seed))
}

/// Per-layer seed: an injective mix of the master seed and the layer index.
pub fn layer_seed(master: u64, layer: usize) -> u64 {
    seed::derive_seed(master, layer as u64)
}

/// Margin problem on `data` restricted to the span of `anchors`.
fn sampled_model(
    data: &DMatrix<f64>,
    anchors: &DMatrix<f64>,
    labels: &[usize],
    params: &MmcParams,
) -> Result<LinearModel> {
    let lap = laplacians(labels, params.gamma)?;
    let m = anchors.tr_mul(data);
    let w = anchored_directions(anchors, &m, &lap.l, params.r)?;
    let objective = laplacian_objective(&w, data, &lap.l);
    Ok(LinearModel {
        w,
        params: *params,
        objective,
        branch: Branch::Sampled,
    })
}

fn check_rmmc(ds: &LabeledDataset, params: &RmmcParams) -> Result<usize> {
    params.base.validate(ds.dim(), ds.len())?;
    if ds.num_classes() < 2 {
        return Err(Error::SingleClass);
    }
    let t = params.resolved_t();
    if t == 0 {
        return Err(Error::InvalidParam("t must be at least 1".into()));
    }
    if t > ds.len() {
        return Err(Error::TTooLarge { t, n: ds.len() });
    }
    if params.base.r > t {
        return Err(Error::RTooLarge { r: params.base.r, t });
    }
    Ok(t)
}

/// Random MMC. The direct path runs when `d < theta` (or when overridden);
/// otherwise `t` seeded anchor samples `A` span the candidate subspace and the
/// discriminant scatter is compressed through `M = A^T X`.
pub fn fit_rmmc(ds: &LabeledDataset, params: &RmmcParams) -> Result<LinearModel> {
    let t = check_rmmc(ds, params)?;
    if params.base.use_direct(ds.dim()) {
        return mmc_core::fit_direct(ds, &params.base);
    }
    let idx = select_anchors(ds.len(), t, params.seed)?;
    let anchors = ds.x().select_columns(&idx);
    sampled_model(ds.x(), &anchors, ds.labels(), &params.base)
}

/// One layered-MMC layer with an explicit expansion matrix `p` (`d x g`).
///
/// The expanded data is `B X` with `B = P P^T`; anchors are the seeded sample
/// selection `A`, so the sample kernel is `M = A^T B X`. Returns the layer and
/// the transformed dataset `W^T B X`.
pub fn fit_lmmc_layer_with_projection(
    ds: &LabeledDataset,
    params: &LmmcParams,
    p: DMatrix<f64>,
    seed: u64,
) -> Result<(LayerRecord, LabeledDataset)> {
    if p.nrows() != ds.dim() {
        return Err(Error::ShapeMismatch(format!(
            "expansion matrix has {} rows, data has {} features",
            p.nrows(),
            ds.dim()
        )));
    }
    let rmmc = RmmcParams { seed, ..params.rmmc };
    let t = check_rmmc(ds, &rmmc)?;
    let expanded = ds.with_features(expand(&p, ds.x()))?;
    let model = if rmmc.base.use_direct(ds.dim()) {
        mmc_core::fit_direct(&expanded, &rmmc.base)?
    } else {
        let idx = select_anchors(ds.len(), t, seed)?;
        let anchors = ds.x().select_columns(&idx);
        sampled_model(expanded.x(), &anchors, ds.labels(), &rmmc.base)?
    };
    let features = model.transform(expanded.x())?;
    let out = ds.with_features(features)?;
    Ok((LayerRecord { p, model, seed }, out))
}

/// One layered-MMC layer with a seeded Gaussian expansion matrix.
pub fn fit_lmmc_layer(
    ds: &LabeledDataset,
    params: &LmmcParams,
    seed: u64,
) -> Result<(LayerRecord, LabeledDataset)> {
    if params.g < 1 {
        return Err(Error::InvalidParam("expanded dimension g must be at least 1".into()));
    }
    let p = seed::gaussian_matrix(ds.dim(), params.g, seed::derive_seed(seed, PROJECTION_STREAM));
    fit_lmmc_layer_with_projection(ds, params, p, seed)
}

/// Stacks `params.layers` layers, each consuming the previous layer's output.
/// Returns the model and the training features produced by the last layer.
pub fn fit_lmmc_with_features(
    ds: &LabeledDataset,
    params: &LmmcParams,
) -> Result<(LayeredModel, LabeledDataset)> {
    if params.layers < 1 {
        return Err(Error::InvalidParam("layers must be at least 1".into()));
    }
    let mut current = ds.clone();
    let mut layers = Vec::with_capacity(params.layers);
    for layer in 0..params.layers {
        if params.rmmc.base.r > current.dim() {
            return Err(Error::DimensionCollapse {
                layer,
                r: params.rmmc.base.r,
                d: current.dim(),
            });
        }
        let (record, next) = fit_lmmc_layer(&current, params, layer_seed(params.rmmc.seed, layer))?;
        layers.push(record);
        current = next;
    }
    let model = LayeredModel {
        params: *params,
        input_dim: ds.dim(),
        layers,
    };
    Ok((model, current))
}

pub fn fit_lmmc(ds: &LabeledDataset, params: &LmmcParams) -> Result<LayeredModel> {
    fit_lmmc_with_features(ds, params).map(|(model, _)| model)
}

/// Applies every layer in order.
pub fn transform_layered(model: &LayeredModel, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if x.nrows() != model.input_dim {
        return Err(Error::ShapeMismatch(format!(
            "model expects {} features, input has {}",
            model.input_dim,
            x.nrows()
        )));
    }
    model
        .layers
        .iter()
        .try_fold(x.clone(), |acc, layer| layer.apply(&acc))
}
