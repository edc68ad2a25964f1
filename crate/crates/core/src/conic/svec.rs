//! Scaled symmetric vectorization.
//!
//! A symmetric `s x s` matrix is stored as its lower triangle, column by
//! column, with every off-diagonal entry multiplied by `sqrt(2)`. Under this
//! map the Euclidean inner product of two vectors equals the trace inner
//! product of the matrices they encode.

use nalgebra::DMatrix;
use thiserror::Error;

/// Symmetry tolerance accepted by [`svec`].
pub const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DimensionError {
    #[error("matrix is {rows}x{cols}, expected a square matrix")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is not symmetric: |M[{i},{j}] - M[{j},{i}]| = {diff:e}")]
    NotSymmetric { i: usize, j: usize, diff: f64 },
    #[error("vector length {0} is not a triangular number")]
    NotTriangular(usize),
}

/// Number of svec slots for a matrix of side `side`.
#[inline]
pub fn tri_len(side: usize) -> usize {
    side * (side + 1) / 2
}

/// Recovers the matrix side from a triangular vector length.
pub fn side_from_len(len: usize) -> Option<usize> {
    let side = ((((8 * len + 1) as f64).sqrt() - 1.0) / 2.0).round() as usize;
    (tri_len(side) == len).then_some(side)
}

/// Slot of entry `(i, j)` (either order) in the svec of a side-`side` matrix.
#[inline]
pub fn svec_index(side: usize, i: usize, j: usize) -> usize {
    let (r, c) = if i >= j { (i, j) } else { (j, i) };
    // columns 0..c contribute side + (side-1) + ... + (side-c+1) slots
    c * side - c * (c.saturating_sub(1)) / 2 + (r - c)
}

/// Scaled vectorization of a symmetric matrix.
pub fn svec(m: &DMatrix<f64>) -> Result<Vec<f64>, DimensionError> {
    let (rows, cols) = m.shape();
    if rows != cols {
        return Err(DimensionError::NotSquare { rows, cols });
    }
    for j in 0..cols {
        for i in (j + 1)..rows {
            let diff = (m[(i, j)] - m[(j, i)]).abs();
            if diff > SYMMETRY_TOL {
                return Err(DimensionError::NotSymmetric { i, j, diff });
            }
        }
    }
    let mut out = vec![0.0; tri_len(rows)];
    svec_into(m, &mut out);
    Ok(out)
}

/// Unchecked svec of the lower triangle of `m` into `out`.
pub(crate) fn svec_into(m: &DMatrix<f64>, out: &mut [f64]) {
    let side = m.nrows();
    let mut k = 0;
    for j in 0..side {
        out[k] = m[(j, j)];
        k += 1;
        for i in (j + 1)..side {
            out[k] = m[(i, j)] * std::f64::consts::SQRT_2;
            k += 1;
        }
    }
}

/// Inverse of [`svec`].
pub fn smat(v: &[f64]) -> Result<DMatrix<f64>, DimensionError> {
    let side = side_from_len(v.len()).ok_or(DimensionError::NotTriangular(v.len()))?;
    Ok(smat_side(v, side))
}

pub(crate) fn smat_side(v: &[f64], side: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(side, side);
    let mut k = 0;
    for j in 0..side {
        m[(j, j)] = v[k];
        k += 1;
        for i in (j + 1)..side {
            let x = v[k] * std::f64::consts::FRAC_1_SQRT_2;
            m[(i, j)] = x;
            m[(j, i)] = x;
            k += 1;
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn identity_two_by_two() {
        let v = svec(&DMatrix::identity(2, 2)).unwrap();
        assert_eq!(v, vec![1.0, 0.0, 1.0]);
    }

    #[test]
    fn all_ones_two_by_two() {
        let m = DMatrix::from_element(2, 2, 1.0);
        let v = svec(&m).unwrap();
        assert_eq!(v, vec![1.0, std::f64::consts::SQRT_2, 1.0]);
        let dot: f64 = v.iter().map(|x| x * x).sum();
        assert!((dot - 4.0).abs() < 1e-15);
        assert!((dot - (&m * &m).trace()).abs() < 1e-15);
    }

    #[test]
    fn index_matches_layout() {
        for side in 1..7 {
            let mut seen = vec![false; tri_len(side)];
            let mut k = 0;
            for j in 0..side {
                for i in j..side {
                    assert_eq!(svec_index(side, i, j), k);
                    assert_eq!(svec_index(side, j, i), k);
                    seen[k] = true;
                    k += 1;
                }
            }
            assert!(seen.into_iter().all(|s| s));
        }
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(matches!(
            svec(&DMatrix::zeros(2, 3)),
            Err(DimensionError::NotSquare { .. })
        ));
        let mut m = DMatrix::identity(3, 3);
        m[(2, 0)] = 1.0;
        assert!(matches!(svec(&m), Err(DimensionError::NotSymmetric { .. })));
        assert_eq!(smat(&[1.0, 2.0]), Err(DimensionError::NotTriangular(2)));
    }

    fn sym(side: usize, vals: &[f64]) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(side, side);
        let mut k = 0;
        for j in 0..side {
            for i in j..side {
                m[(i, j)] = vals[k];
                m[(j, i)] = vals[k];
                k += 1;
            }
        }
        m
    }

    proptest! {
        #[test]
        fn round_trip_and_inner_product(
            a in proptest::collection::vec(-10.0f64..10.0, 15),
            b in proptest::collection::vec(-10.0f64..10.0, 15),
        ) {
            let ma = sym(5, &a);
            let mb = sym(5, &b);
            let va = svec(&ma).unwrap();
            let vb = svec(&mb).unwrap();
            let back = smat(&va).unwrap();
            for (x, y) in back.iter().zip(ma.iter()) {
                prop_assert!((x - y).abs() <= 1e-12 * (1.0 + y.abs()));
            }
            let dot: f64 = va.iter().zip(&vb).map(|(x, y)| x * y).sum();
            let tr = (&ma * &mb).trace();
            prop_assert!((dot - tr).abs() <= 1e-12 * (1.0 + tr.abs()));
        }
    }
}
