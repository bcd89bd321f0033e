//! Nearest-neighbour scoring and a PCA baseline.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::mmc_core::{Branch, LinearModel, MmcParams};
use crate::numerics::{canonicalize_signs, svd};

/// k-NN labels for each column of `test`.
///
/// Neighbours are ordered by Euclidean distance, then label. The vote goes to
/// the most frequent label; ties go to the smaller summed neighbour distance,
/// then to the smaller label.
pub fn knn_predict(
    train: &DMatrix<f64>,
    train_labels: &[usize],
    test: &DMatrix<f64>,
    k: usize,
) -> Result<Vec<usize>> {
    if train.ncols() != train_labels.len() {
        return Err(Error::LengthMismatch {
            left: train.ncols(),
            right: train_labels.len(),
        });
    }
    if train.nrows() != test.nrows() {
        return Err(Error::ShapeMismatch(format!(
            "train features have {} dimensions, test features {}",
            train.nrows(),
            test.nrows()
        )));
    }
    if k == 0 {
        return Err(Error::InvalidParam("k must be at least 1".into()));
    }
    if k > train.ncols() {
        return Err(Error::KTooLarge { k, n: train.ncols() });
    }
    let predict = |j: usize| {
        let q = test.column(j);
        let mut dist: Vec<(f64, usize)> = train
            .column_iter()
            .zip(train_labels)
            .map(|(x, &l)| ((x - q).norm(), l))
            .collect();
        dist.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut votes: BTreeMap<usize, (usize, f64)> = BTreeMap::new();
        for &(d, l) in &dist[..k] {
            let e = votes.entry(l).or_insert((0, 0.0));
            e.0 += 1;
            e.1 += d;
        }
        votes
            .into_iter()
            .min_by(|(la, (ca, da)), (lb, (cb, db))| {
                cb.cmp(ca)
                    .then(da.total_cmp(db))
                    .then(la.cmp(lb))
            })
            .map(|(l, _)| l)
            .expect("k >= 1")
    };
    Ok((0..test.ncols()).into_par_iter().map(predict).collect())
}

pub fn accuracy(pred: &[usize], truth: &[usize]) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(Error::LengthMismatch {
            left: pred.len(),
            right: truth.len(),
        });
    }
    if pred.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let hits = pred.iter().zip(truth).filter(|(a, b)| a == b).count();
    Ok(hits as f64 / pred.len() as f64)
}

/// Top-`r` principal directions of the centered data. The objective holds the
/// covariance eigenvalues `s_i^2 / n`.
pub fn fit_pca_baseline(ds: &LabeledDataset, r: usize) -> Result<LinearModel> {
    let params = MmcParams::new(r).with_branch(Branch::Pca);
    let (d, n) = (ds.dim(), ds.len());
    if r < 1 || r > d.min(n) {
        return Err(Error::InvalidParam(format!("target dimension r = {r} must lie in 1..={}", d.min(n))));
    }
    let x = ds.x();
    let mean = x.column_mean();
    let centered = DMatrix::from_fn(d, n, |i, j| x[(i, j)] - mean[i]);
    let dec = svd(&centered)?;
    let mut w = DMatrix::zeros(d, r);
    let available = dec.u.ncols().min(r);
    w.columns_mut(0, available).copy_from(&dec.u.columns(0, available));
    // rank below r: pad with canonical directions orthogonal to the rest
    for k in available..r {
        let mut e = DVector::zeros(d);
        for candidate in 0..d {
            e.fill(0.0);
            e[candidate] = 1.0;
            let proj = &e - w.columns(0, k) * w.columns(0, k).tr_mul(&e);
            if proj.norm() > 0.5 {
                e = proj.normalize();
                break;
            }
        }
        w.set_column(k, &e);
    }
    canonicalize_signs(&mut w);
    let objective = DVector::from_fn(r, |k, _| {
        dec.s.get(k).map_or(0.0, |s| s * s / n as f64)
    });
    Ok(LinearModel {
        w,
        params,
        objective,
        branch: Branch::Pca,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimPoint {
    pub r: usize,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub method: String,
    /// Every parameter of the run, defaults filled in.
    pub params: serde_json::Value,
    pub seed: u64,
    /// Accuracy at the last (largest) sweep point.
    pub accuracy: f64,
    pub branch: Option<String>,
    pub per_dim: Vec<DimPoint>,
    /// Wall-clock seconds per phase.
    pub timing: BTreeMap<String, f64>,
}

impl EvalReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub const CSV_HEADER: &'static str = "method,seed,accuracy,branch,dims";

    /// One flat CSV row matching [`Self::CSV_HEADER`]; sweep dimensions are
    /// joined with `;`.
    pub fn csv_row(&self) -> String {
        let dims: Vec<String> = self.per_dim.iter().map(|p| p.r.to_string()).collect();
        format!(
            "{},{},{},{},{}",
            self.method,
            self.seed,
            self.accuracy,
            self.branch.as_deref().unwrap_or(""),
            dims.join(";")
        )
    }
}
