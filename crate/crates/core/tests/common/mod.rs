//! Reference implementations used as test oracles. Nothing here calls the
//! crate's numerics; eigenvalues come from a plain cyclic Jacobi sweep.
#![allow(dead_code)]

use mmc::data::{Dataset2D, LabeledDataset};
use mmc::seed;
use mmc::synthetic;
use nalgebra::DMatrix;
use rand::Rng;

/// Eigenvalues (descending) and eigenvectors (columns) of a symmetric matrix
/// by cyclic Jacobi rotations.
pub fn jacobi_eig(a: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let mut m: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| 0.5 * (a[(i, j)] + a[(j, i)])).collect()).collect();
    let mut v: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
    let scale = m.iter().flatten().fold(0.0f64, |acc, x| acc.max(x.abs())).max(f64::MIN_POSITIVE);
    for _sweep in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[i][j] * m[i][j])
            .sum();
        if off.sqrt() <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if m[p][q].abs() <= 1e-300 {
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (2.0 * m[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[k][p], m[k][q]);
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[p][k], m[q][k]);
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
                for row in v.iter_mut() {
                    let (vp, vq) = (row[p], row[q]);
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| m[b][b].total_cmp(&m[a][a]));
    let values = order.iter().map(|&i| m[i][i]).collect();
    let vectors = DMatrix::from_fn(n, n, |i, j| v[i][order[j]]);
    (values, vectors)
}

pub fn top_sum(values: &[f64], k: usize) -> f64 {
    values[..k].iter().sum()
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

/// Largest principal angle between two column spaces, from the singular
/// values of `Qa^T Qb` after Gram-Schmidt.
pub fn principal_angle(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let qa = gram_schmidt(a);
    let qb = gram_schmidt(b);
    if qa.ncols() != qb.ncols() {
        return std::f64::consts::FRAC_PI_2;
    }
    // residual of projecting qb onto span(qa)
    let resid = &qb - &qa * qa.tr_mul(&qb);
    let (vals, _) = jacobi_eig(&resid.tr_mul(&resid));
    vals[0].max(0.0).sqrt().min(1.0).asin()
}

pub fn gram_schmidt(a: &DMatrix<f64>) -> DMatrix<f64> {
    let mut cols: Vec<nalgebra::DVector<f64>> = Vec::new();
    for j in 0..a.ncols() {
        let mut v = a.column(j).into_owned();
        for _ in 0..2 {
            for q in &cols {
                let proj = q.dot(&v);
                v -= q * proj;
            }
        }
        let norm = v.norm();
        if norm > 1e-12 * a.column(j).norm().max(1e-300) {
            cols.push(v / norm);
        }
    }
    DMatrix::from_columns(&cols)
}

/// Nested-loop `S_b`, `S_w` with explicit means.
pub fn loop_scatters(ds: &LabeledDataset) -> (DMatrix<f64>, DMatrix<f64>) {
    let (d, n, c) = (ds.dim(), ds.len(), ds.num_classes());
    let x = ds.x();
    let labels = ds.labels();
    let mut means = vec![vec![0.0; d]; c];
    let mut counts = vec![0usize; c];
    let mut global = vec![0.0; d];
    for j in 0..n {
        counts[labels[j]] += 1;
        for i in 0..d {
            means[labels[j]][i] += x[(i, j)];
            global[i] += x[(i, j)];
        }
    }
    for k in 0..c {
        for i in 0..d {
            means[k][i] /= counts[k] as f64;
        }
    }
    for g in global.iter_mut() {
        *g /= n as f64;
    }
    let mut sb = DMatrix::zeros(d, d);
    let mut sw = DMatrix::zeros(d, d);
    for a in 0..d {
        for b in 0..d {
            for k in 0..c {
                sb[(a, b)] += counts[k] as f64 * (means[k][a] - global[a]) * (means[k][b] - global[b]);
            }
            for j in 0..n {
                let l = labels[j];
                sw[(a, b)] += (x[(a, j)] - means[l][a]) * (x[(b, j)] - means[l][b]);
            }
        }
    }
    (sb, sw)
}

/// One dataset of the randomized suite: `d <= 20`, `n <= 50`, `c in 2..=5`.
pub struct SuiteCase {
    pub ds: LabeledDataset,
    pub r: usize,
    pub seed: u64,
}

pub fn dataset_suite(count: usize, master: u64) -> Vec<SuiteCase> {
    (0..count as u64)
        .map(|i| {
            let s = seed::derive_seed(master, i);
            let mut rng = seed::rng(s);
            let c = rng.random_range(2..=5usize);
            let d = rng.random_range(2..=20usize);
            let n = rng.random_range((2 * c).max(6)..=50usize);
            let separation = rng.random_range(0.5..3.0);
            let r = rng.random_range(1..=(c - 1).min(d));
            SuiteCase {
                ds: synthetic::random_labeled(d, n, c, separation, s),
                r,
                seed: s,
            }
        })
        .collect()
}

/// Nested-loop directional scatters `[S_bl, S_wl, S_br, S_wr]`.
pub fn loop_scatters_2d(ds: &Dataset2D) -> [DMatrix<f64>; 4] {
    let (d1, d2) = (ds.d1(), ds.d2());
    let c = ds.num_classes();
    let n = ds.len();
    let mut means = vec![DMatrix::<f64>::zeros(d1, d2); c];
    let mut global = DMatrix::<f64>::zeros(d1, d2);
    for (x, &l) in ds.samples().iter().zip(ds.labels()) {
        for i in 0..d1 {
            for j in 0..d2 {
                means[l][(i, j)] += x[(i, j)] / ds.class_counts()[l] as f64;
                global[(i, j)] += x[(i, j)] / n as f64;
            }
        }
    }
    let mut out = [
        DMatrix::zeros(d1, d1),
        DMatrix::zeros(d1, d1),
        DMatrix::zeros(d2, d2),
        DMatrix::zeros(d2, d2),
    ];
    for a in 0..d1 {
        for b in 0..d1 {
            for k in 0..c {
                for j in 0..d2 {
                    out[0][(a, b)] += ds.class_counts()[k] as f64
                        * (means[k][(a, j)] - global[(a, j)])
                        * (means[k][(b, j)] - global[(b, j)]);
                }
            }
            for (x, &l) in ds.samples().iter().zip(ds.labels()) {
                for j in 0..d2 {
                    out[1][(a, b)] += (x[(a, j)] - means[l][(a, j)]) * (x[(b, j)] - means[l][(b, j)]);
                }
            }
        }
    }
    for a in 0..d2 {
        for b in 0..d2 {
            for k in 0..c {
                for i in 0..d1 {
                    out[2][(a, b)] += ds.class_counts()[k] as f64
                        * (means[k][(i, a)] - global[(i, a)])
                        * (means[k][(i, b)] - global[(i, b)]);
                }
            }
            for (x, &l) in ds.samples().iter().zip(ds.labels()) {
                for i in 0..d1 {
                    out[3][(a, b)] += (x[(i, a)] - means[l][(i, a)]) * (x[(i, b)] - means[l][(i, b)]);
                }
            }
        }
    }
    out
}

/// Nested-loop patch scatters `(S_psi, S_phi)` for a square `k x k` kernel.
pub fn loop_patch_scatters(images: &[DMatrix<f64>], labels: &[usize], k: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    // patches by explicit indexing, zero padded, mean removed
    let (m, n) = images[0].shape();
    let half = (k / 2) as isize;
    let patch = |img: &DMatrix<f64>, i: usize, j: usize| -> Vec<f64> {
        let mut v = Vec::with_capacity(k * k);
        for dv in 0..k as isize {
            for du in 0..k as isize {
                let (a, b) = (i as isize + du - half, j as isize + dv - half);
                let inside = a >= 0 && b >= 0 && (a as usize) < m && (b as usize) < n;
                v.push(if inside { img[(a as usize, b as usize)] } else { 0.0 });
            }
        }
        let mean: f64 = v.iter().sum::<f64>() / v.len() as f64;
        v.into_iter().map(|x| x - mean).collect()
    };
    let dim = k * k;
    let pixels: Vec<(usize, usize)> = (0..n).flat_map(|j| (0..m).map(move |i| (i, j))).collect();
    let c = labels.iter().max().unwrap() + 1;
    let mut count = vec![0.0; c];
    for &l in labels {
        count[l] += 1.0;
    }
    // class means m_k[p][a]
    let mut mk = vec![vec![vec![0.0; dim]; pixels.len()]; c];
    for (img, &l) in images.iter().zip(labels) {
        for (p, &(i, j)) in pixels.iter().enumerate() {
            for (a, v) in patch(img, i, j).into_iter().enumerate() {
                mk[l][p][a] += v / count[l];
            }
        }
    }
    let mut grand = vec![vec![0.0; dim]; pixels.len()];
    for class in &mk {
        for p in 0..pixels.len() {
            for a in 0..dim {
                grand[p][a] += class[p][a] / c as f64;
            }
        }
    }
    let mut phi = DMatrix::zeros(dim, dim);
    let mut psi = DMatrix::zeros(dim, dim);
    for (img, &l) in images.iter().zip(labels) {
        for (p, &(i, j)) in pixels.iter().enumerate() {
            let v = patch(img, i, j);
            for a in 0..dim {
                for b in 0..dim {
                    phi[(a, b)] += (v[a] - mk[l][p][a]) * (v[b] - mk[l][p][b]) / count[l];
                }
            }
        }
    }
    for class in &mk {
        for p in 0..pixels.len() {
            for a in 0..dim {
                for b in 0..dim {
                    psi[(a, b)] += (class[p][a] - grand[p][a]) * (class[p][b] - grand[p][b]) / c as f64;
                }
            }
        }
    }
    (psi, phi)
}
