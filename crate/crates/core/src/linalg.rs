//! Small dense symmetric linear algebra.
//!
//! Matrices are square, row-major `Vec<f64>` buffers. Everything here is
//! sized for the desk-scale parameter spaces of this crate (side ≤ 64).

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
///
/// Iterates until the off-diagonal Frobenius mass drops below
/// `1e-12 · ‖A‖_F` or 100 sweeps have run.
pub fn symmetric_eigenvalues(a: &[f64], side: usize) -> Vec<f64> {
    let (vals, _) = jacobi(a, side, false);
    vals
}

/// Eigenvalues (ascending) and eigenvectors (columns of a row-major matrix).
pub fn symmetric_eigen(a: &[f64], side: usize) -> (Vec<f64>, Vec<f64>) {
    let (vals, vecs) = jacobi(a, side, true);
    (vals, vecs.expect("eigenvectors requested"))
}

fn jacobi(a: &[f64], side: usize, want_vectors: bool) -> (Vec<f64>, Option<Vec<f64>>) {
    assert_eq!(a.len(), side * side, "matrix buffer does not match side");
    let mut m = a.to_vec();
    let mut v = want_vectors.then(|| identity(side));
    let scale: f64 = m.iter().map(|x| x * x).sum::<f64>().sqrt();
    if side > 1 && scale > 0.0 {
        let tol = 1e-12 * scale;
        for _sweep in 0..100 {
            let off: f64 = (0..side)
                .flat_map(|i| (0..side).filter(move |&j| j != i).map(move |j| (i, j)))
                .map(|(i, j)| m[i * side + j] * m[i * side + j])
                .sum::<f64>()
                .sqrt();
            if off <= tol {
                break;
            }
            for p in 0..side {
                for q in (p + 1)..side {
                    let apq = m[p * side + q];
                    if apq == 0.0 {
                        continue;
                    }
                    let app = m[p * side + p];
                    let aqq = m[q * side + q];
                    let theta = (aqq - app) / (2.0 * apq);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let t = if theta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..side {
                        let akp = m[k * side + p];
                        let akq = m[k * side + q];
                        m[k * side + p] = c * akp - s * akq;
                        m[k * side + q] = s * akp + c * akq;
                    }
                    for k in 0..side {
                        let apk = m[p * side + k];
                        let aqk = m[q * side + k];
                        m[p * side + k] = c * apk - s * aqk;
                        m[q * side + k] = s * apk + c * aqk;
                    }
                    if let Some(v) = v.as_mut() {
                        for k in 0..side {
                            let vkp = v[k * side + p];
                            let vkq = v[k * side + q];
                            v[k * side + p] = c * vkp - s * vkq;
                            v[k * side + q] = s * vkp + c * vkq;
                        }
                    }
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..side).collect();
    order.sort_by(|&i, &j| m[i * side + i].total_cmp(&m[j * side + j]));
    let vals = order.iter().map(|&i| m[i * side + i]).collect();
    let vecs = v.map(|v| {
        let mut out = vec![0.0; side * side];
        for (new_col, &old_col) in order.iter().enumerate() {
            for row in 0..side {
                out[row * side + new_col] = v[row * side + old_col];
            }
        }
        out
    });
    (vals, vecs)
}

pub fn identity(side: usize) -> Vec<f64> {
    let mut out = vec![0.0; side * side];
    for i in 0..side {
        out[i * side + i] = 1.0;
    }
    out
}

pub fn matmul(a: &[f64], b: &[f64], side: usize) -> Vec<f64> {
    let mut out = vec![0.0; side * side];
    for i in 0..side {
        for k in 0..side {
            let aik = a[i * side + k];
            if aik == 0.0 {
                continue;
            }
            for j in 0..side {
                out[i * side + j] += aik * b[k * side + j];
            }
        }
    }
    out
}

pub fn matvec(a: &[f64], x: &[f64]) -> Vec<f64> {
    let side = x.len();
    (0..side)
        .map(|i| (0..side).map(|j| a[i * side + j] * x[j]).sum())
        .collect()
}

pub fn trace(a: &[f64], side: usize) -> f64 {
    (0..side).map(|i| a[i * side + i]).sum()
}

/// Solves `A x = b` for symmetric positive definite `A` by Cholesky.
/// Returns `None` when `A` is not numerically positive definite.
pub fn spd_solve(a: &[f64], b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[i * n + j];
            for k in 0..j {
                sum -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if sum <= 0.0 || !sum.is_finite() {
                    return None;
                }
                l[i * n + i] = sum.sqrt();
            } else {
                l[i * n + j] = sum / l[j * n + j];
            }
        }
    }
    let mut y = vec![0.0; n];
    for i in 0..n {
        let s: f64 = (0..i).map(|k| l[i * n + k] * y[k]).sum();
        y[i] = (b[i] - s) / l[i * n + i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = ((i + 1)..n).map(|k| l[k * n + i] * x[k]).sum();
        x[i] = (y[i] - s) / l[i * n + i];
    }
    Some(x)
}
