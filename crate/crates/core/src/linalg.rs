//! Small dense linear algebra: a one-sided Jacobi SVD with a deterministic sign
//! convention, explicit inversion, and a few helpers for diagonal scalings.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

const JACOBI_TOL: f64 = 1e-15;
const MAX_SWEEPS: usize = 100;
/// Two magnitudes closer than this count as tied in the sign convention.
const SIGN_TIE_TOL: f64 = 1e-12;

/// Singular value decomposition `A = U diag(s) V^T`.
///
/// For an `m x n` input with `k = min(m, n)`, `singular_values` has length `k`
/// in descending order, `left_vectors` is `m x k` with orthonormal columns and
/// `right_vectors` is a full orthogonal `n x n` basis whose trailing `n - k`
/// columns span the null space.
#[derive(Debug, Clone, PartialEq)]
pub struct Svd {
    pub singular_values: Vec<f64>,
    pub left_vectors: DMatrix<f64>,
    pub right_vectors: DMatrix<f64>,
}

impl Svd {
    pub fn right(&self, i: usize) -> DVector<f64> {
        self.right_vectors.column(i).into_owned()
    }

    pub fn left(&self, i: usize) -> DVector<f64> {
        self.left_vectors.column(i).into_owned()
    }

    pub fn max(&self) -> f64 {
        self.singular_values.first().copied().unwrap_or(0.0)
    }

    pub fn min(&self) -> f64 {
        self.singular_values.last().copied().unwrap_or(0.0)
    }

    pub fn reconstruct(&self) -> DMatrix<f64> {
        let k = self.singular_values.len();
        let v = self.right_vectors.columns(0, k);
        let s = DMatrix::from_diagonal(&DVector::from_column_slice(&self.singular_values));
        &self.left_vectors * s * v.transpose()
    }
}

/// Index of the entry with the largest magnitude; near-ties go to the lowest index.
pub fn dominant_index(v: &DVector<f64>) -> usize {
    let peak = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    v.iter()
        .position(|x| x.abs() >= peak - SIGN_TIE_TOL)
        .unwrap_or(0)
}

/// Flips `v` so that its largest-magnitude entry is positive. Returns whether it flipped.
pub fn canonical_sign(v: &mut DVector<f64>) -> bool {
    let i = dominant_index(v);
    if v[i] < 0.0 {
        v.neg_mut();
        true
    } else {
        false
    }
}

pub fn svd(a: &DMatrix<f64>) -> Result<Svd> {
    if a.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("svd input"));
    }
    let (m, n) = a.shape();
    let mut work = a.clone();
    let mut v = DMatrix::<f64>::identity(n, n);

    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let alpha = work.column(p).norm_squared();
                let beta = work.column(q).norm_squared();
                let gamma = work.column(p).dot(&work.column(q));
                if gamma == 0.0 || gamma.abs() <= JACOBI_TOL * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate_columns(&mut work, p, q, c, s);
                rotate_columns(&mut v, p, q, c, s);
            }
        }
        if !rotated {
            break;
        }
    }

    let norms: Vec<f64> = (0..n).map(|j| work.column(j).norm()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    // Stable sort keeps the lower index first among equal singular values.
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]));

    let k = m.min(n);
    let scale = norms.iter().copied().fold(0.0, f64::max);
    let mut singular_values = Vec::with_capacity(k);
    let mut left = DMatrix::<f64>::zeros(m, k);
    let mut right = DMatrix::<f64>::zeros(n, n);
    let mut missing_left = Vec::new();

    for (slot, &j) in order.iter().enumerate() {
        let mut rv = v.column(j).into_owned();
        let flipped = canonical_sign(&mut rv);
        right.set_column(slot, &rv);
        if slot >= k {
            continue;
        }
        let sigma = norms[j];
        singular_values.push(sigma);
        if sigma > scale * 1e-14 && sigma > 0.0 {
            let mut lv = work.column(j) / sigma;
            if flipped {
                lv.neg_mut();
            }
            left.set_column(slot, &lv);
        } else {
            missing_left.push(slot);
        }
    }
    complete_basis(&mut left, &missing_left);

    Ok(Svd {
        singular_values,
        left_vectors: left,
        right_vectors: right,
    })
}

fn rotate_columns(m: &mut DMatrix<f64>, p: usize, q: usize, c: f64, s: f64) {
    for i in 0..m.nrows() {
        let mp = m[(i, p)];
        let mq = m[(i, q)];
        m[(i, p)] = c * mp - s * mq;
        m[(i, q)] = s * mp + c * mq;
    }
}

/// Fills the listed columns with unit vectors orthogonal to all other columns.
fn complete_basis(basis: &mut DMatrix<f64>, missing: &[usize]) {
    let m = basis.nrows();
    let mut candidate = 0;
    for &slot in missing {
        while candidate < m {
            let mut e = DVector::<f64>::zeros(m);
            e[candidate] = 1.0;
            candidate += 1;
            for j in 0..basis.ncols() {
                if j == slot {
                    continue;
                }
                let col = basis.column(j).into_owned();
                let d = col.dot(&e);
                e -= col * d;
            }
            let norm = e.norm();
            if norm > 1e-8 {
                basis.set_column(slot, &(e / norm));
                break;
            }
        }
    }
}

/// Orthonormal basis (as columns) of the complement of the unit vector `anchor`.
///
/// Built by Gram-Schmidt over the standard basis, so the result is deterministic.
pub fn orthogonal_complement(anchor: &DVector<f64>) -> DMatrix<f64> {
    let n = anchor.len();
    let unit = anchor.normalize();
    let mut kept: Vec<DVector<f64>> = vec![unit];
    for i in 0..n {
        if kept.len() == n {
            break;
        }
        let mut e = DVector::<f64>::zeros(n);
        e[i] = 1.0;
        // Two passes of classical Gram-Schmidt for numerical orthogonality.
        for _ in 0..2 {
            for b in &kept {
                let d = b.dot(&e);
                e -= b * d;
            }
        }
        let norm = e.norm();
        if norm > 1e-6 {
            kept.push(e / norm);
        }
    }
    DMatrix::from_columns(&kept[1..])
}

/// Explicit inverse via LU with partial pivoting.
pub fn inverse(a: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    a.clone().lu().try_inverse()
}

pub fn diag(v: &DVector<f64>) -> DMatrix<f64> {
    DMatrix::from_diagonal(v)
}

pub fn diag_map(v: &[f64], f: impl Fn(f64) -> f64) -> DMatrix<f64> {
    DMatrix::from_diagonal(&DVector::from_iterator(v.len(), v.iter().map(|&x| f(x))))
}

pub fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

pub fn from_rows(rows: &[Vec<f64>]) -> Option<DMatrix<f64>> {
    let nrows = rows.len();
    let ncols = rows.first()?.len();
    if rows.iter().any(|r| r.len() != ncols) {
        return None;
    }
    Some(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}
