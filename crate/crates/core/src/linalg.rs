//! Small dense helpers for per-node metric algebra (row-major `m × m` slices).

use nalgebra::DMatrix;

fn to_matrix(a: &[f64], m: usize) -> DMatrix<f64> {
    DMatrix::from_row_slice(m, m, a)
}

/// Inverse and determinant of a symmetric positive definite matrix.
pub fn spd_inverse(a: &[f64], m: usize) -> Option<(Vec<f64>, f64)> {
    match m {
        1 => {
            let d = a[0];
            (d > 0.0).then(|| (vec![1.0 / d], d))
        }
        2 => {
            let det = a[0] * a[3] - a[1] * a[2];
            if !(a[0] > 0.0 && det > 0.0) {
                return None;
            }
            Some((vec![a[3] / det, -a[1] / det, -a[2] / det, a[0] / det], det))
        }
        _ => {
            let chol = to_matrix(a, m).cholesky()?;
            let l = chol.l();
            let det = l.diagonal().iter().map(|d| d * d).product();
            let inv = chol.inverse();
            Some((row_major(&inv), det))
        }
    }
}

/// Lower Cholesky factor of an SPD matrix.
pub fn cholesky_lower(a: &[f64], m: usize) -> Option<Vec<f64>> {
    let chol = to_matrix(a, m).cholesky()?;
    Some(row_major(&chol.l()))
}

/// Inverse of a lower-triangular matrix.
pub fn lower_inverse(l: &[f64], m: usize) -> Vec<f64> {
    let mut inv = vec![0.0; m * m];
    for col in 0..m {
        for row in col..m {
            let mut s = if row == col { 1.0 } else { 0.0 };
            for k in col..row {
                s -= l[row * m + k] * inv[k * m + col];
            }
            inv[row * m + col] = s / l[row * m + row];
        }
    }
    inv
}

pub fn min_eigenvalue(a: &[f64], m: usize) -> f64 {
    match m {
        1 => a[0],
        2 => {
            let tr = a[0] + a[3];
            let det = a[0] * a[3] - a[1] * a[2];
            let disc = (0.25 * tr * tr - det).max(0.0).sqrt();
            0.5 * tr - disc
        }
        _ => to_matrix(a, m)
            .symmetric_eigenvalues()
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min),
    }
}

pub fn is_spd(a: &[f64], m: usize) -> bool {
    spd_inverse(a, m).is_some() && min_eigenvalue(a, m) > 0.0
}

fn row_major(mat: &DMatrix<f64>) -> Vec<f64> {
    let (r, c) = mat.shape();
    let mut out = Vec::with_capacity(r * c);
    for i in 0..r {
        for j in 0..c {
            out.push(mat[(i, j)]);
        }
    }
    out
}

/// Determinant of a general square matrix (row-major).
pub fn determinant(a: &[f64], m: usize) -> f64 {
    match m {
        1 => a[0],
        2 => a[0] * a[3] - a[1] * a[2],
        _ => to_matrix(a, m).determinant(),
    }
}

/// Modified Gram–Schmidt: orthonormalize `candidate` against `basis` (each of length `n`).
/// Returns `None` when the remainder is shorter than `tol`.
pub fn gram_schmidt_step(basis: &[Vec<f64>], candidate: &[f64], tol: f64) -> Option<Vec<f64>> {
    let mut v = candidate.to_vec();
    for _ in 0..2 {
        for e in basis {
            let p: f64 = v.iter().zip(e).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(e).for_each(|(x, y)| *x -= p * y);
        }
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    (norm > tol).then(|| v.into_iter().map(|x| x / norm).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_matches_identity_product() {
        let a = [4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0];
        let (inv, det) = spd_inverse(&a, 3).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let s: f64 = (0..3).map(|k| a[i * 3 + k] * inv[k * 3 + j]).sum();
                assert!((s - if i == j { 1.0 } else { 0.0 }).abs() < 1e-14);
            }
        }
        assert!((det - determinant(&a, 3)).abs() < 1e-12);
    }

    #[test]
    fn rejects_indefinite() {
        assert!(spd_inverse(&[1.0, 2.0, 2.0, 1.0], 2).is_none());
        assert!(!is_spd(&[1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, 1.0], 3));
    }

    #[test]
    fn lower_inverse_roundtrip() {
        let a = [4.0, 1.0, 1.0, 3.0];
        let l = cholesky_lower(&a, 2).unwrap();
        let li = lower_inverse(&l, 2);
        for i in 0..2 {
            for j in 0..2 {
                let s: f64 = (0..2).map(|k| li[i * 2 + k] * l[k * 2 + j]).sum();
                assert!((s - if i == j { 1.0 } else { 0.0 }).abs() < 1e-15);
            }
        }
    }
}
