//! Small dense linear-algebra kernels: a cyclic Jacobi eigensolver for
//! symmetric matrices and the spectral-norm computation built on it.

use ndarray::Array2;
use num_complex::Complex64;

use crate::fft::Fft;

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.
///
/// Converges quadratically; the sweep loop stops once the off-diagonal
/// Frobenius norm falls below 1e-14 of the matrix scale.
pub(crate) fn symmetric_eigenvalues(a: &Array2<f64>) -> Vec<f64> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "symmetric_eigenvalues needs a square matrix");
    if n == 0 {
        return Vec::new();
    }
    let mut m = a.clone();
    let scale = m.iter().map(|v| v.abs()).fold(0.0_f64, f64::max).max(1e-300);
    let tol = 1e-14 * scale;

    for _sweep in 0..100 {
        let mut off = 0.0_f64;
        for p in 0..n {
            for q in (p + 1)..n {
                off = off.max(m[[p, q]].abs());
            }
        }
        if off <= tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[[p, q]];
                if apq.abs() <= tol * 1e-2 {
                    continue;
                }
                let app = m[[p, p]];
                let aqq = m[[q, q]];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[[k, p]];
                    let mkq = m[[k, q]];
                    m[[k, p]] = c * mkp - s * mkq;
                    m[[k, q]] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[[p, k]];
                    let mqk = m[[q, k]];
                    m[[p, k]] = c * mpk - s * mqk;
                    m[[q, k]] = s * mpk + c * mqk;
                }
            }
        }
    }
    let mut eigs: Vec<f64> = (0..n).map(|i| m[[i, i]]).collect();
    eigs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    eigs
}

/// Spectral norm (largest singular value) via the eigenvalues of A^T A.
pub(crate) fn spectral_norm(a: &Array2<f64>) -> f64 {
    if a.nrows() == 0 {
        return 0.0;
    }
    let gram = a.t().dot(a);
    let eigs = symmetric_eigenvalues(&gram);
    eigs.last().copied().unwrap_or(0.0).max(0.0).sqrt()
}

/// Eigenvalues of the circulant matrix generated by `first_row`,
/// lambda_k = sum_m row[m] e^{+2 i pi m k / n}.
pub(crate) fn circulant_eigenvalues(first_row: &[f64]) -> Vec<Complex64> {
    let n = first_row.len();
    let fft = Fft::new(n);
    let mut buf: Vec<Complex64> = first_row.iter().map(|&c| Complex64::new(c, 0.0)).collect();
    fft.inverse_unscaled(&mut buf);
    buf
}

pub(crate) fn is_symmetric(a: &Array2<f64>, rel_tol: f64) -> bool {
    let n = a.nrows();
    if n != a.ncols() {
        return false;
    }
    let scale = a.iter().map(|v| v.abs()).fold(0.0_f64, f64::max).max(1e-300);
    for i in 0..n {
        for j in (i + 1)..n {
            if (a[[i, j]] - a[[j, i]]).abs() > rel_tol * scale {
                return false;
            }
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn jacobi_diagonal_matrix() {
        let a = array![[3.0, 0.0], [0.0, -1.0]];
        let eigs = symmetric_eigenvalues(&a);
        assert!((eigs[0] + 1.0).abs() < 1e-13);
        assert!((eigs[1] - 3.0).abs() < 1e-13);
    }

    #[test]
    fn jacobi_known_2x2() {
        // eigenvalues of [[2,1],[1,2]] are 1 and 3
        let a = array![[2.0, 1.0], [1.0, 2.0]];
        let eigs = symmetric_eigenvalues(&a);
        assert!((eigs[0] - 1.0).abs() < 1e-12);
        assert!((eigs[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn spectral_norm_rank_one() {
        // a = u v^T with u = (2, 1), v = (1, 2): ||a|| = |u| |v| = 5
        let a = array![[2.0, 4.0], [1.0, 2.0]];
        let want = 5.0;
        assert!((spectral_norm(&a) - want).abs() < 1e-10 * want);
    }

    #[test]
    fn circulant_eigenvalues_laplacian() {
        // ring Laplacian row (-2, 1, 0, ..., 0, 1) has eigenvalues -2 + 2cos(2 pi k / n)
        let n = 8;
        let mut row = vec![0.0; n];
        row[0] = -2.0;
        row[1] = 1.0;
        row[n - 1] = 1.0;
        let eigs = circulant_eigenvalues(&row);
        for (k, e) in eigs.iter().enumerate() {
            let want = -2.0 + 2.0 * (2.0 * std::f64::consts::PI * k as f64 / n as f64).cos();
            assert!((e.re - want).abs() < 1e-12);
            assert!(e.im.abs() < 1e-12);
        }
    }
}
