//! Dense symmetric eigendecomposition and SVD with fixed ordering and sign
//! conventions.
//!
//! Every decomposition returned here is sorted by descending eigenvalue or
//! singular value, and each eigenvector (left singular vector) has its entry of
//! largest magnitude positive, ties going to the lowest index. This pins the
//! `±` ambiguity so that two runs over the same bytes give the same bytes, and
//! so tests can compare matrices directly instead of subspaces.

use nalgebra::{DMatrix, DVector, SymmetricEigen, SVD};

use crate::error::{Error, Result};

/// Relative asymmetry tolerated by [`sym_eig`].
pub const SYMMETRY_TOL: f64 = 1e-10;

/// Eigenpairs of a real symmetric matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SymEig {
    /// Eigenvalues, descending.
    pub values: DVector<f64>,
    /// Column `j` is the unit eigenvector for `values[j]`.
    pub vectors: DMatrix<f64>,
}

/// Thin singular value decomposition `m = u * diag(s) * v^T`.
#[derive(Debug, Clone, PartialEq)]
pub struct Svd {
    pub u: DMatrix<f64>,
    /// Singular values, descending.
    pub s: DVector<f64>,
    pub v: DMatrix<f64>,
}

pub(crate) fn ensure_finite(m: &DMatrix<f64>) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite)
    }
}

/// Returns `(a + a^T) / 2`, which is exactly symmetric.
pub fn symmetrize(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let mut out = a.clone();
    for j in 0..n {
        for i in (j + 1)..n {
            let v = 0.5 * (a[(i, j)] + a[(j, i)]);
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    out
}

/// Flips columns so that the entry of largest magnitude is positive. Returns
/// the flip applied to each column (`true` when negated).
pub fn canonicalize_signs(m: &mut DMatrix<f64>) -> Vec<bool> {
    let mut flips = Vec::with_capacity(m.ncols());
    for mut col in m.column_iter_mut() {
        let mut best = 0usize;
        let mut best_abs = f64::NEG_INFINITY;
        for (i, v) in col.iter().enumerate() {
            if v.abs() > best_abs {
                best_abs = v.abs();
                best = i;
            }
        }
        let flip = !col.is_empty() && col[best] < 0.0;
        if flip {
            col.neg_mut();
        }
        flips.push(flip);
    }
    flips
}

fn descending_order(values: &DVector<f64>) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[j].total_cmp(&values[i]).then(i.cmp(&j)));
    order
}

/// Full eigendecomposition of a symmetric matrix.
pub fn sym_eig(a: &DMatrix<f64>) -> Result<SymEig> {
    if !a.is_square() {
        return Err(Error::ShapeMismatch(format!(
            "sym_eig needs a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    ensure_finite(a)?;
    let n = a.nrows();
    if n == 0 {
        return Ok(SymEig {
            values: DVector::zeros(0),
            vectors: DMatrix::zeros(0, 0),
        });
    }

    let tolerance = SYMMETRY_TOL * a.amax();
    let mut asymmetry = 0.0f64;
    for j in 0..n {
        for i in (j + 1)..n {
            asymmetry = asymmetry.max((a[(i, j)] - a[(j, i)]).abs());
        }
    }
    if asymmetry > tolerance {
        return Err(Error::NonSymmetric {
            asymmetry,
            tolerance,
        });
    }

    let eig = SymmetricEigen::new(symmetrize(a));
    let order = descending_order(&eig.eigenvalues);
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = eig.eigenvectors.select_columns(&order);
    canonicalize_signs(&mut vectors);
    Ok(SymEig { values, vectors })
}

/// Thin SVD with `min(rows, cols)` singular triplets.
pub fn svd(m: &DMatrix<f64>) -> Result<Svd> {
    ensure_finite(m)?;
    let (rows, cols) = m.shape();
    let k = rows.min(cols);
    if k == 0 {
        return Ok(Svd {
            u: DMatrix::zeros(rows, 0),
            s: DVector::zeros(0),
            v: DMatrix::zeros(cols, 0),
        });
    }
    let dec = SVD::new(m.clone(), true, true);
    let u = dec.u.expect("left singular vectors requested");
    let v = dec.v_t.expect("right singular vectors requested").transpose();
    let order = descending_order(&dec.singular_values);
    let s = DVector::from_iterator(k, order.iter().map(|&i| dec.singular_values[i]));
    let mut u = u.select_columns(&order);
    let mut v = v.select_columns(&order);
    for (j, flip) in canonicalize_signs(&mut u).into_iter().enumerate() {
        if flip {
            v.column_mut(j).neg_mut();
        }
    }
    Ok(Svd { u, s, v })
}

/// Nearest matrix with orthonormal columns (the polar factor `U V^T`).
///
/// For input that is already close to orthonormal this only removes round-off,
/// so column order and span are preserved.
pub fn orthonormalize(f: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let dec = svd(f)?;
    Ok(&dec.u * dec.v.transpose())
}

/// Orthonormal basis for the column span of `a`, dropping directions whose
/// singular value is below `rel_tol * s_max`.
pub fn column_basis(a: &DMatrix<f64>, rel_tol: f64) -> Result<DMatrix<f64>> {
    let dec = svd(a)?;
    let smax = if dec.s.is_empty() { 0.0 } else { dec.s[0] };
    let keep = dec.s.iter().filter(|&&s| s > rel_tol * smax && s > 0.0).count();
    Ok(dec.u.columns(0, keep).into_owned())
}

/// Largest principal angle (radians) between the column spans of `a` and `b`.
///
/// Spans of different dimension are reported as `pi/2` apart.
pub fn max_principal_angle(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64> {
    if a.nrows() != b.nrows() {
        return Err(Error::ShapeMismatch(format!(
            "subspaces live in R^{} and R^{}",
            a.nrows(),
            b.nrows()
        )));
    }
    let qa = column_basis(a, 1e-12)?;
    let qb = column_basis(b, 1e-12)?;
    if qa.ncols() != qb.ncols() {
        return Ok(std::f64::consts::FRAC_PI_2);
    }
    if qa.ncols() == 0 {
        return Ok(0.0);
    }
    // sin of the largest angle is the spectral norm of the residual of qb
    let residual = &qb - &qa * (qa.transpose() * &qb);
    let sigma = svd(&residual)?.s.iter().cloned().fold(0.0, f64::max);
    Ok(sigma.min(1.0).asin())
}

/// Top-`k` eigenvectors and eigenvalues of a symmetric matrix. An all-zero
/// matrix yields the leading canonical basis vectors with zero values.
pub(crate) fn top_eigenpairs(a: &DMatrix<f64>, k: usize) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let n = a.nrows();
    if k > n {
        return Err(Error::RankDeficient {
            requested: k,
            available: n,
        });
    }
    if a.iter().all(|&v| v == 0.0) {
        return Ok((DMatrix::identity(n, k), DVector::zeros(k)));
    }
    let eig = sym_eig(a)?;
    Ok((
        eig.vectors.columns(0, k).into_owned(),
        eig.values.rows(0, k).into_owned(),
    ))
}

/// Row-major serde representation of dense matrices.
pub mod serde_matrix {
    use nalgebra::DMatrix;
    use serde::{de::Error as _, Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Record {
        rows: usize,
        cols: usize,
        data: Vec<f64>,
    }

    pub fn serialize<S: Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
        let data = m.transpose().as_slice().to_vec();
        Record {
            rows: m.nrows(),
            cols: m.ncols(),
            data,
        }
        .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DMatrix<f64>, D::Error> {
        let rec = Record::deserialize(d)?;
        if rec.rows * rec.cols != rec.data.len() {
            return Err(D::Error::custom(format!(
                "matrix {}x{} with {} entries",
                rec.rows,
                rec.cols,
                rec.data.len()
            )));
        }
        Ok(DMatrix::from_row_slice(rec.rows, rec.cols, &rec.data))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn assert_close(a: &DMatrix<f64>, b: &DMatrix<f64>, tol: f64) {
        assert_eq!(a.shape(), b.shape());
        let diff = (a - b).amax();
        assert!(diff <= tol, "max difference {diff:e} > {tol:e}\n{a}\n{b}");
    }

    #[test]
    fn diagonal_input() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 1.0]);
        let eig = sym_eig(&a).unwrap();
        assert_eq!(eig.values.as_slice(), &[2.0, 1.0]);
        assert_close(&eig.vectors, &DMatrix::identity(2, 2), 1e-15);
    }

    #[test]
    fn zero_matrix() {
        let eig = sym_eig(&DMatrix::zeros(2, 2)).unwrap();
        assert_eq!(eig.values.as_slice(), &[0.0, 0.0]);
        assert_close(&(eig.vectors.transpose() * &eig.vectors), &DMatrix::identity(2, 2), 1e-12);
    }

    #[test]
    fn two_by_two_characteristic_polynomial() {
        // (1-x)^2 - 4 = 0 gives x = 3 and x = -1
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        let eig = sym_eig(&a).unwrap();
        assert!((eig.values[0] - 3.0).abs() < 1e-12);
        assert!((eig.values[1] + 1.0).abs() < 1e-12);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let v0 = eig.vectors.column(0);
        assert!((v0[0] - h).abs() < 1e-12 && (v0[1] - h).abs() < 1e-12);
        let v1 = eig.vectors.column(1);
        assert!((v1[0].abs() - h).abs() < 1e-12 && (v1[0] + v1[1]).abs() < 1e-12);
        for j in 0..2 {
            let col = eig.vectors.column(j).into_owned();
            let resid = &a * &col - &col * eig.values[j];
            assert!(resid.amax() < 1e-12);
        }
    }

    #[test]
    fn rejects_asymmetric_and_nonfinite() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.1, 1.0]);
        assert!(matches!(sym_eig(&a), Err(Error::NonSymmetric { .. })));
        let b = DMatrix::from_row_slice(2, 2, &[1.0, f64::NAN, f64::NAN, 1.0]);
        assert!(matches!(sym_eig(&b), Err(Error::NonFinite)));
        let c = DMatrix::from_row_slice(1, 2, &[1.0, f64::INFINITY]);
        assert!(matches!(svd(&c), Err(Error::NonFinite)));
        assert!(matches!(sym_eig(&DMatrix::zeros(2, 3)), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn svd_identity() {
        let dec = svd(&DMatrix::identity(3, 3)).unwrap();
        assert_eq!(dec.s.as_slice(), &[1.0, 1.0, 1.0]);
        assert_close(&dec.u, &DMatrix::identity(3, 3), 1e-15);
        assert_close(&dec.v, &DMatrix::identity(3, 3), 1e-15);
    }

    #[test]
    fn svd_column_vector() {
        let dec = svd(&DMatrix::from_column_slice(2, 1, &[3.0, 4.0])).unwrap();
        assert!((dec.s[0] - 5.0).abs() < 1e-12);
        assert!((dec.u[(0, 0)] - 0.6).abs() < 1e-12);
        assert!((dec.u[(1, 0)] - 0.8).abs() < 1e-12);
        assert!((dec.v[(0, 0)] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn svd_zero_matrix() {
        let dec = svd(&DMatrix::zeros(3, 2)).unwrap();
        assert!(dec.s.iter().all(|&s| s == 0.0));
    }

    #[test]
    fn principal_angle_of_rotated_line() {
        let a = DMatrix::from_column_slice(2, 1, &[1.0, 0.0]);
        let b = DMatrix::from_column_slice(2, 1, &[0.3f64.cos(), 0.3f64.sin()]);
        assert!((max_principal_angle(&a, &b).unwrap() - 0.3).abs() < 1e-12);
        let c = DMatrix::from_column_slice(2, 1, &[-2.0, 0.0]);
        assert!(max_principal_angle(&a, &c).unwrap() < 1e-15);
    }

    #[test]
    fn serde_matrix_is_row_major() {
        #[derive(serde::Serialize, serde::Deserialize)]
        struct Wrap(#[serde(with = "serde_matrix")] DMatrix<f64>);
        let m = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let json = serde_json::to_string(&Wrap(m.clone())).unwrap();
        assert_eq!(json, r#"{"rows":2,"cols":3,"data":[1.0,2.0,3.0,4.0,5.0,6.0]}"#);
        let back: Wrap = serde_json::from_str(&json).unwrap();
        assert_eq!(back.0, m);
    }

    fn symmetric_matrix() -> impl Strategy<Value = DMatrix<f64>> {
        (1usize..=30).prop_flat_map(|n| {
            proptest::collection::vec(-10.0f64..10.0, n * n).prop_map(move |v| {
                let m = DMatrix::from_vec(n, n, v);
                symmetrize(&(&m + m.transpose()))
            })
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(120))]

        #[test]
        fn eig_reconstructs_and_preserves_trace(a in symmetric_matrix()) {
            let eig = sym_eig(&a).unwrap();
            let n = a.nrows();
            let recon = &eig.vectors * DMatrix::from_diagonal(&eig.values) * eig.vectors.transpose();
            let scale = a.norm().max(1.0);
            prop_assert!((&recon - &a).norm() <= 1e-8 * scale);
            prop_assert!((eig.values.sum() - a.trace()).abs() <= 1e-8 * scale);
            let gram = eig.vectors.transpose() * &eig.vectors;
            prop_assert!((gram - DMatrix::<f64>::identity(n, n)).amax() <= 1e-10);
            for w in eig.values.as_slice().windows(2) {
                prop_assert!(w[0] >= w[1]);
            }
            let again = sym_eig(&a).unwrap();
            prop_assert_eq!(&again, &eig);
        }

        #[test]
        fn svd_reconstructs(rows in 1usize..12, cols in 1usize..12, seed in any::<u64>()) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let m = DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-5.0..5.0));
            let dec = svd(&m).unwrap();
            let recon = &dec.u * DMatrix::from_diagonal(&dec.s) * dec.v.transpose();
            prop_assert!((&recon - &m).norm() <= 1e-8 * m.norm().max(1e-300));
            prop_assert!(dec.s.iter().all(|&s| s >= 0.0));
            for w in dec.s.as_slice().windows(2) {
                prop_assert!(w[0] >= w[1]);
            }
        }
    }
}
