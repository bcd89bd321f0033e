//! Class statistics, between/within scatter matrices, their graph-Laplacian
//! factorization, and the four directional scatters of matrix-valued samples.
//!
//! All scatters are unnormalized sums:
//!
//! ```text
//! S_b = sum_i n_i (m_i - m)(m_i - m)^T
//! S_w = sum_i sum_j (x_ij - m_i)(x_ij - m_i)^T
//! ```

use std::cmp::Ordering;

use nalgebra::{DMatrix, DVector};

use crate::data::{Dataset2D, LabeledDataset};
use crate::error::{Error, Result};
use crate::numerics::symmetrize;

#[derive(Debug, Clone, PartialEq)]
pub struct ClassStats {
    /// Column `i` is the mean of class `i`.
    pub means: DMatrix<f64>,
    pub global_mean: DVector<f64>,
    pub counts: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScatterPair {
    pub s_b: DMatrix<f64>,
    pub s_w: DMatrix<f64>,
}

impl ScatterPair {
    /// `S_b - gamma * S_w`.
    pub fn difference(&self, gamma: f64) -> DMatrix<f64> {
        &self.s_b - &self.s_w * gamma
    }
}

/// Graph Laplacians with `X L_b X^T = S_b`, `X L_w X^T = S_w` and
/// `L = L_b - gamma L_w`.
#[derive(Debug, Clone, PartialEq)]
pub struct Laplacians {
    pub l_b: DMatrix<f64>,
    pub l_w: DMatrix<f64>,
    pub gamma: f64,
    pub l: DMatrix<f64>,
}

/// Left (`d1 x d1`) and right (`d2 x d2`) scatters of 2D samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Scatter2D {
    pub s_bl: DMatrix<f64>,
    pub s_wl: DMatrix<f64>,
    pub s_br: DMatrix<f64>,
    pub s_wr: DMatrix<f64>,
}

pub fn class_stats(ds: &LabeledDataset) -> Result<ClassStats> {
    if ds.num_classes() < 2 {
        return Err(Error::SingleClass);
    }
    let (d, n, c) = (ds.dim(), ds.len(), ds.num_classes());
    let mut means = DMatrix::zeros(d, c);
    for (j, &l) in ds.labels().iter().enumerate() {
        let mut col = means.column_mut(l);
        col += ds.x().column(j);
    }
    for (i, &count) in ds.class_counts().iter().enumerate() {
        means.column_mut(i).unscale_mut(count as f64);
    }
    let global_mean = ds.x().column_sum() / n as f64;
    Ok(ClassStats {
        means,
        global_mean,
        counts: ds.class_counts().to_vec(),
    })
}

/// `S_b` and `S_w` exactly as the unnormalized sums above.
pub fn scatters(ds: &LabeledDataset, stats: &ClassStats) -> ScatterPair {
    let mut between = stats.means.clone();
    for (i, mut col) in between.column_iter_mut().enumerate() {
        col -= &stats.global_mean;
        col *= (stats.counts[i] as f64).sqrt();
    }
    let mut within = ds.x().clone();
    for (j, mut col) in within.column_iter_mut().enumerate() {
        col -= stats.means.column(ds.labels()[j]);
    }
    ScatterPair {
        s_b: symmetrize(&(&between * between.transpose())),
        s_w: symmetrize(&(&within * within.transpose())),
    }
}

/// `sum_j (x_j - m)(x_j - m)^T`.
pub fn total_scatter(x: &DMatrix<f64>) -> DMatrix<f64> {
    let mean = x.column_mean();
    let mut centered = x.clone();
    for mut col in centered.column_iter_mut() {
        col -= &mean;
    }
    symmetrize(&(&centered * centered.transpose()))
}

/// Builds `L_w = I - W` and `L_b = W - 11^T / n` where `W_jk = 1/n_c` when
/// samples `j` and `k` share class `c`.
pub fn laplacians(labels: &[usize], gamma: f64) -> Result<Laplacians> {
    if !(gamma >= 0.0) || !gamma.is_finite() {
        return Err(Error::NegativeGamma(gamma));
    }
    let n = labels.len();
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    let c = labels.iter().max().map_or(0, |&m| m + 1);
    let mut counts = vec![0usize; c];
    for &l in labels {
        counts[l] += 1;
    }
    let affinity = DMatrix::from_fn(n, n, |j, k| {
        if labels[j] == labels[k] {
            1.0 / counts[labels[j]] as f64
        } else {
            0.0
        }
    });
    let l_w = DMatrix::identity(n, n) - &affinity;
    let l_b = affinity.add_scalar(-1.0 / n as f64);
    let l = &l_b - &l_w * gamma;
    Ok(Laplacians { l_b, l_w, gamma, l })
}

/// Class means, the global mean, and a canonical visiting order for 2D
/// samples. The order (class, then lexicographic sample bits) makes every sum
/// independent of how the input was permuted.
pub(crate) struct Stats2D {
    pub means: Vec<DMatrix<f64>>,
    pub global: DMatrix<f64>,
    pub counts: Vec<usize>,
    pub order: Vec<usize>,
}

fn compare_bits(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Ordering {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

pub(crate) fn stats_2d(ds: &Dataset2D) -> Result<Stats2D> {
    if ds.num_classes() < 2 {
        return Err(Error::SingleClass);
    }
    let samples = ds.samples();
    let labels = ds.labels();
    let mut order: Vec<usize> = (0..ds.len()).collect();
    order.sort_by(|&a, &b| {
        labels[a]
            .cmp(&labels[b])
            .then_with(|| compare_bits(&samples[a], &samples[b]))
    });

    let zero = DMatrix::zeros(ds.d1(), ds.d2());
    let mut means = vec![zero.clone(); ds.num_classes()];
    let mut global = zero;
    for &i in &order {
        means[labels[i]] += &samples[i];
        global += &samples[i];
    }
    for (m, &count) in means.iter_mut().zip(ds.class_counts()) {
        m.unscale_mut(count as f64);
    }
    global.unscale_mut(ds.len() as f64);
    Ok(Stats2D {
        means,
        global,
        counts: ds.class_counts().to_vec(),
        order,
    })
}

/// The four directional scatters: left scatters accumulate `A A^T` and right
/// scatters `A^T A` over the `d1 x d2` deviations `A`.
pub fn scatters_2d(ds: &Dataset2D) -> Result<Scatter2D> {
    let stats = stats_2d(ds)?;
    let (d1, d2) = (ds.d1(), ds.d2());
    let mut s_bl = DMatrix::zeros(d1, d1);
    let mut s_br = DMatrix::zeros(d2, d2);
    for (mean, &count) in stats.means.iter().zip(&stats.counts) {
        let dev = mean - &stats.global;
        let w = count as f64;
        s_bl += &dev * dev.transpose() * w;
        s_br += dev.transpose() * &dev * w;
    }
    let mut s_wl = DMatrix::zeros(d1, d1);
    let mut s_wr = DMatrix::zeros(d2, d2);
    for &i in &stats.order {
        let dev = &ds.samples()[i] - &stats.means[ds.labels()[i]];
        s_wl += &dev * dev.transpose();
        s_wr += dev.transpose() * &dev;
    }
    Ok(Scatter2D {
        s_bl: symmetrize(&s_bl),
        s_wl: symmetrize(&s_wl),
        s_br: symmetrize(&s_br),
        s_wr: symmetrize(&s_wr),
    })
}
