//! Cascaded MMC filter banks over image patches, followed by binary hashing
//! and block histograms.
//!
//! Maps are `m x n` matrices. Patches are taken around every pixel with zero
//! padding, vectorized column-major and have their own mean removed. A kernel
//! of even size is anchored at index `k / 2`, one past the geometric center.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset2D;
use crate::error::{Error, Result};
use crate::mmc_core::DEFAULT_GAMMA;
use crate::numerics::{ensure_finite, serde_matrix, symmetrize, top_eigenpairs};

/// Hash codes must fit in a `u32`.
pub const MAX_HASH_BITS: usize = 30;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetParams {
    pub k1: usize,
    pub k2: usize,
    /// Filters per stage; its length is the number of stages.
    pub filters: Vec<usize>,
    pub gamma: f64,
    pub block_h: usize,
    pub block_w: usize,
    /// Fraction of a block shared with its neighbour, in `[0, 1)`.
    pub block_overlap: f64,
    /// Recorded for provenance; fitting is deterministic.
    pub seed: u64,
}

impl Default for NetParams {
    fn default() -> Self {
        Self {
            k1: 3,
            k2: 3,
            filters: vec![8, 8, 8],
            gamma: DEFAULT_GAMMA,
            block_h: 7,
            block_w: 7,
            block_overlap: 0.5,
            seed: 0,
        }
    }
}

impl NetParams {
    pub fn num_stages(&self) -> usize {
        self.filters.len()
    }

    pub fn validate(&self) -> Result<()> {
        check_kernel(self.k1, self.k2)?;
        if self.filters.is_empty() {
            return Err(Error::InvalidParam("at least one stage is required".into()));
        }
        if self.filters.contains(&0) {
            return Err(Error::InvalidParam("every stage needs at least one filter".into()));
        }
        let last = *self.filters.last().expect("nonempty");
        if last > MAX_HASH_BITS {
            return Err(Error::InvalidParam(format!(
                "last stage has {last} filters, hashing supports at most {MAX_HASH_BITS}"
            )));
        }
        if !(self.gamma >= 0.0) || !self.gamma.is_finite() {
            return Err(Error::NegativeGamma(self.gamma));
        }
        if self.block_h == 0 || self.block_w == 0 {
            return Err(Error::InvalidParam("blocks must be at least 1x1".into()));
        }
        if !(0.0..1.0).contains(&self.block_overlap) {
            return Err(Error::InvalidParam(format!(
                "block overlap {} must lie in [0, 1)",
                self.block_overlap
            )));
        }
        Ok(())
    }

    /// Number of hash groups: one per map of the second-to-last stage.
    pub fn hash_groups(&self) -> usize {
        self.filters[..self.filters.len() - 1].iter().product()
    }

    /// Feature length for `m x n` images.
    pub fn feature_length(&self, m: usize, n: usize) -> usize {
        let bins = 1usize << self.filters.last().copied().unwrap_or(0);
        self.hash_groups() * num_blocks(m, n, self.block_h, self.block_w, self.block_overlap) * bins
    }
}

fn check_kernel(k1: usize, k2: usize) -> Result<()> {
    if k1 == 0 || k2 == 0 {
        return Err(Error::EmptyKernel { k1, k2 });
    }
    Ok(())
}

/// Vectorized, mean-removed patches of one image, one column per pixel in
/// column-major pixel order.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchMatrix {
    pub k1: usize,
    pub k2: usize,
    pub matrix: DMatrix<f64>,
}

pub fn extract_patches(image: &DMatrix<f64>, k1: usize, k2: usize) -> Result<PatchMatrix> {
    check_kernel(k1, k2)?;
    ensure_finite(image)?;
    let (m, n) = image.shape();
    let (a1, a2) = ((k1 / 2) as isize, (k2 / 2) as isize);
    let mut out = DMatrix::zeros(k1 * k2, m * n);
    for j in 0..n {
        for i in 0..m {
            let mut col = out.column_mut(i + j * m);
            for v in 0..k2 {
                for u in 0..k1 {
                    let (ii, jj) = (i as isize + u as isize - a1, j as isize + v as isize - a2);
                    if ii >= 0 && jj >= 0 && (ii as usize) < m && (jj as usize) < n {
                        col[u + v * k1] = image[(ii as usize, jj as usize)];
                    }
                }
            }
            let mean = col.mean();
            col.add_scalar_mut(-mean);
        }
    }
    Ok(PatchMatrix { k1, k2, matrix: out })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatchScatters {
    /// Between-class patch scatter.
    pub s_psi: DMatrix<f64>,
    /// Within-class patch scatter, summed over classes.
    pub s_phi: DMatrix<f64>,
    /// Class mean patch matrices, indexed by label; empty for absent labels.
    pub class_means: Vec<DMatrix<f64>>,
    /// Mean of the class means.
    pub grand_mean: DMatrix<f64>,
}

fn all_patches(images: &[DMatrix<f64>], k1: usize, k2: usize) -> Result<Vec<DMatrix<f64>>> {
    images
        .par_iter()
        .map(|img| extract_patches(img, k1, k2).map(|p| p.matrix))
        .collect()
}

fn check_same_shape(images: &[DMatrix<f64>]) -> Result<(usize, usize)> {
    let first = images.first().ok_or(Error::EmptyDataset)?.shape();
    if let Some(bad) = images.iter().find(|im| im.shape() != first) {
        return Err(Error::ShapeMismatch(format!(
            "expected {}x{} images, found {}x{}",
            first.0,
            first.1,
            bad.nrows(),
            bad.ncols()
        )));
    }
    Ok(first)
}

pub fn patch_scatters(images: &[DMatrix<f64>], labels: &[usize], k1: usize, k2: usize) -> Result<PatchScatters> {
    check_kernel(k1, k2)?;
    if images.len() != labels.len() {
        return Err(Error::LengthMismatch {
            left: images.len(),
            right: labels.len(),
        });
    }
    check_same_shape(images)?;
    let num_labels = labels.iter().max().map_or(0, |&l| l + 1);
    let mut counts = vec![0usize; num_labels];
    for &l in labels {
        counts[l] += 1;
    }
    let present: Vec<usize> = (0..num_labels).filter(|&k| counts[k] > 0).collect();
    if present.len() < 2 {
        return Err(Error::SingleClass);
    }

    let patches = all_patches(images, k1, k2)?;
    let (dim, cols) = patches[0].shape();
    let mut class_means = vec![DMatrix::zeros(0, 0); num_labels];
    for &k in &present {
        class_means[k] = DMatrix::zeros(dim, cols);
    }
    for (p, &l) in patches.iter().zip(labels) {
        class_means[l] += p;
    }
    for &k in &present {
        class_means[k].unscale_mut(counts[k] as f64);
    }

    let per_image: Vec<DMatrix<f64>> = patches
        .par_iter()
        .zip(labels.par_iter())
        .map(|(p, &l)| {
            let dev = p - &class_means[l];
            (&dev * dev.transpose()).unscale(counts[l] as f64)
        })
        .collect();
    let mut s_phi = DMatrix::zeros(dim, dim);
    for s in &per_image {
        s_phi += s;
    }

    let c = present.len() as f64;
    let mut grand_mean = DMatrix::zeros(dim, cols);
    for &k in &present {
        grand_mean += &class_means[k];
    }
    grand_mean.unscale_mut(c);
    let mut s_psi = DMatrix::zeros(dim, dim);
    for &k in &present {
        let dev = &class_means[k] - &grand_mean;
        s_psi += &dev * dev.transpose();
    }
    s_psi.unscale_mut(c);

    Ok(PatchScatters {
        s_psi: symmetrize(&s_psi),
        s_phi: symmetrize(&s_phi),
        class_means,
        grand_mean,
    })
}

/// Filter bank of one stage with the objective value of each filter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageBank {
    #[serde(with = "serde_matrix")]
    pub w: DMatrix<f64>,
    pub objective: Vec<f64>,
}

/// Top `filters` eigenvectors of `S_psi - gamma S_phi`.
pub fn learn_stage_filters(scatters: &PatchScatters, filters: usize, gamma: f64) -> Result<StageBank> {
    let dim = scatters.s_psi.nrows();
    if filters > dim {
        return Err(Error::TooManyFilters {
            requested: filters,
            available: dim,
        });
    }
    if !(gamma >= 0.0) || !gamma.is_finite() {
        return Err(Error::NegativeGamma(gamma));
    }
    let diff = &scatters.s_psi - &scatters.s_phi * gamma;
    let (w, values) = top_eigenpairs(&diff, filters)?;
    Ok(StageBank {
        w,
        objective: values.as_slice().to_vec(),
    })
}

fn forward_one(image: &DMatrix<f64>, w: &DMatrix<f64>, k1: usize, k2: usize) -> Result<Vec<DMatrix<f64>>> {
    let (m, n) = image.shape();
    let responses = w.tr_mul(&extract_patches(image, k1, k2)?.matrix);
    Ok(responses
        .row_iter()
        .map(|row| DMatrix::from_iterator(m, n, row.iter().copied()))
        .collect())
}

/// Applies every filter to every image. Output is image-major: the maps of
/// image `i` occupy `i * L .. (i + 1) * L`.
pub fn stage_forward(images: &[DMatrix<f64>], w: &DMatrix<f64>, k1: usize, k2: usize) -> Result<Vec<DMatrix<f64>>> {
    check_kernel(k1, k2)?;
    if w.nrows() != k1 * k2 {
        return Err(Error::ShapeMismatch(format!(
            "filter bank has {} rows, patches have {}",
            w.nrows(),
            k1 * k2
        )));
    }
    let nested: Vec<Vec<DMatrix<f64>>> = images
        .par_iter()
        .map(|img| forward_one(img, w, k1, k2))
        .collect::<Result<_>>()?;
    Ok(nested.into_iter().flatten().collect())
}

/// Per pixel, `sum_l 2^(L - l) [map_l > 0]` with `l` counted from 1; the first
/// map supplies the most significant bit.
pub fn binary_hash(maps: &[DMatrix<f64>]) -> Result<DMatrix<u32>> {
    if maps.is_empty() || maps.len() > MAX_HASH_BITS {
        return Err(Error::InvalidParam(format!(
            "hashing needs 1..={MAX_HASH_BITS} maps, got {}",
            maps.len()
        )));
    }
    let shape = maps[0].shape();
    if maps.iter().any(|m| m.shape() != shape) {
        return Err(Error::ShapeMismatch("hashed maps differ in shape".into()));
    }
    let mut out = DMatrix::<u32>::zeros(shape.0, shape.1);
    for map in maps {
        for (h, &v) in out.iter_mut().zip(map.iter()) {
            *h = (*h << 1) | u32::from(v > 0.0);
        }
    }
    Ok(out)
}

fn block_stride(block: usize, overlap: f64) -> usize {
    ((block as f64 * (1.0 - overlap)).floor() as usize).max(1)
}

fn blocks_along(len: usize, block: usize, overlap: f64) -> usize {
    1 + len.saturating_sub(block).div_ceil(block_stride(block, overlap))
}

/// Number of histogram blocks on an `m x n` map, edge blocks included.
pub fn num_blocks(m: usize, n: usize, block_h: usize, block_w: usize, overlap: f64) -> usize {
    blocks_along(m, block_h, overlap) * blocks_along(n, block_w, overlap)
}

/// Concatenated `2^bits`-bin histograms of every block, blocks in row-major
/// order. Edge blocks are clipped to the map.
pub fn block_histogram(
    hash: &DMatrix<u32>,
    bits: usize,
    block_h: usize,
    block_w: usize,
    overlap: f64,
) -> Result<Vec<f64>> {
    let (m, n) = hash.shape();
    if block_h == 0 || block_w == 0 || block_h > m || block_w > n {
        return Err(Error::BlockTooLarge {
            block_h,
            block_w,
            map_h: m,
            map_w: n,
        });
    }
    if bits > MAX_HASH_BITS {
        return Err(Error::InvalidParam(format!("{bits} hash bits exceed {MAX_HASH_BITS}")));
    }
    let bins = 1usize << bits;
    let (sh, sw) = (block_stride(block_h, overlap), block_stride(block_w, overlap));
    let (bh, bw) = (blocks_along(m, block_h, overlap), blocks_along(n, block_w, overlap));
    let mut out = vec![0.0; bh * bw * bins];
    for bi in 0..bh {
        for bj in 0..bw {
            let hist = &mut out[(bi * bw + bj) * bins..][..bins];
            let (r0, c0) = (bi * sh, bj * sw);
            for j in c0..(c0 + block_w).min(n) {
                for i in r0..(r0 + block_h).min(m) {
                    let code = hash[(i, j)] as usize;
                    if code >= bins {
                        return Err(Error::InvalidParam(format!("hash {code} exceeds {bits} bits")));
                    }
                    hist[code] += 1.0;
                }
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MmcNetModel {
    pub params: NetParams,
    pub image_h: usize,
    pub image_w: usize,
    pub stages: Vec<StageBank>,
    pub output_length: usize,
}

impl MmcNetModel {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

pub fn fit_net(ds: &Dataset2D, params: &NetParams) -> Result<MmcNetModel> {
    params.validate()?;
    if ds.num_classes() < 2 {
        return Err(Error::SingleClass);
    }
    let (m, n) = (ds.d1(), ds.d2());
    if params.block_h > m || params.block_w > n {
        return Err(Error::BlockTooLarge {
            block_h: params.block_h,
            block_w: params.block_w,
            map_h: m,
            map_w: n,
        });
    }
    let mut images = ds.samples().to_vec();
    let mut labels = ds.labels().to_vec();
    let mut stages = Vec::with_capacity(params.num_stages());
    for (s, &filters) in params.filters.iter().enumerate() {
        let scatters = patch_scatters(&images, &labels, params.k1, params.k2)?;
        let bank = learn_stage_filters(&scatters, filters, params.gamma)?;
        if s + 1 < params.num_stages() {
            images = stage_forward(&images, &bank.w, params.k1, params.k2)?;
            labels = labels.iter().flat_map(|&l| std::iter::repeat_n(l, filters)).collect();
        }
        stages.push(bank);
    }
    Ok(MmcNetModel {
        params: params.clone(),
        image_h: m,
        image_w: n,
        stages,
        output_length: params.feature_length(m, n),
    })
}

fn features_one(model: &MmcNetModel, image: &DMatrix<f64>) -> Result<Vec<f64>> {
    let p = &model.params;
    let mut maps = vec![image.clone()];
    for bank in &model.stages {
        maps = maps
            .iter()
            .map(|im| forward_one(im, &bank.w, p.k1, p.k2))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .flatten()
            .collect();
    }
    let bits = model.stages.last().map_or(0, |b| b.w.ncols());
    let mut out = Vec::with_capacity(model.output_length);
    for group in maps.chunks(bits) {
        let hash = binary_hash(group)?;
        out.extend(block_histogram(&hash, bits, p.block_h, p.block_w, p.block_overlap)?);
    }
    Ok(out)
}

/// Feature matrix with one column per image, in input order.
pub fn transform_net(model: &MmcNetModel, images: &[DMatrix<f64>]) -> Result<DMatrix<f64>> {
    if let Some(bad) = images.iter().find(|im| im.shape() != (model.image_h, model.image_w)) {
        return Err(Error::ShapeMismatch(format!(
            "model expects {}x{} images, got {}x{}",
            model.image_h,
            model.image_w,
            bad.nrows(),
            bad.ncols()
        )));
    }
    let columns: Vec<Vec<f64>> = images
        .par_iter()
        .map(|im| features_one(model, im))
        .collect::<Result<_>>()?;
    let mut out = DMatrix::zeros(model.output_length, images.len());
    for (j, col) in columns.iter().enumerate() {
        if col.len() != model.output_length {
            return Err(Error::ShapeMismatch(format!(
                "feature length {} differs from recorded {}",
                col.len(),
                model.output_length
            )));
        }
        out.column_mut(j).copy_from_slice(col);
    }
    Ok(out)
}
