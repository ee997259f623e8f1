//! Small dense Hermitian linear algebra: Cholesky factorization, triangular
//! solves, and a cyclic Jacobi eigensolver. Matrices here are microphone-count
//! sized (M <= 8 or so), so simple O(M^3) routines are the right tool.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use num_complex::Complex64;

type C64 = Complex64;

/// Lower-triangular Cholesky factor of a Hermitian positive definite matrix.
#[derive(Debug, Clone)]
pub struct Cholesky {
    lower: Array2<C64>,
}

impl Cholesky {
    /// Factor `a` as `L L^H`. Returns `None` if a pivot is not strictly
    /// positive, i.e. the matrix is not numerically positive definite.
    pub fn new(a: &ArrayView2<C64>) -> Option<Self> {
        let n = a.nrows();
        debug_assert_eq!(n, a.ncols());
        let mut l = Array2::<C64>::zeros((n, n));
        for i in 0..n {
            for j in 0..=i {
                let mut s = a[[i, j]];
                for k in 0..j {
                    s -= l[[i, k]] * l[[j, k]].conj();
                }
                if i == j {
                    // The diagonal of a Hermitian matrix is real up to rounding.
                    let d = s.re;
                    if !(d > 0.0) || !d.is_finite() {
                        return None;
                    }
                    l[[i, i]] = C64::new(d.sqrt(), 0.0);
                } else {
                    l[[i, j]] = s / l[[j, j]];
                }
            }
        }
        Some(Self { lower: l })
    }

    pub fn dim(&self) -> usize {
        self.lower.nrows()
    }

    #[cfg(test)]
    pub fn lower(&self) -> &Array2<C64> {
        &self.lower
    }

    /// log det(A) = 2 * sum(log L_ii).
    pub fn log_det(&self) -> f64 {
        (0..self.dim()).map(|i| 2.0 * self.lower[[i, i]].re.ln()).sum()
    }

    /// Solve `L y = b` (forward substitution).
    pub fn solve_lower(&self, b: &ArrayView1<C64>) -> Array1<C64> {
        let n = self.dim();
        let mut y = Array1::<C64>::zeros(n);
        for i in 0..n {
            let mut s = b[i];
            for k in 0..i {
                s -= self.lower[[i, k]] * y[k];
            }
            y[i] = s / self.lower[[i, i]];
        }
        y
    }

    /// Solve `A x = b` with `A = L L^H`.
    pub fn solve(&self, b: &ArrayView1<C64>) -> Array1<C64> {
        let n = self.dim();
        let mut x = self.solve_lower(b);
        // back substitution with L^H
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in (i + 1)..n {
                s -= self.lower[[k, i]].conj() * x[k];
            }
            x[i] = s / self.lower[[i, i]];
        }
        x
    }

    /// Solve `A X = B` column by column.
    pub fn solve_matrix(&self, b: &ArrayView2<C64>) -> Array2<C64> {
        let n = self.dim();
        let cols = b.ncols();
        let mut x = Array2::<C64>::zeros((n, cols));
        for j in 0..cols {
            let col = self.solve(&b.column(j));
            x.column_mut(j).assign(&col);
        }
        x
    }

    /// z^H A^{-1} z through one forward solve: ||L^{-1} z||^2.
    pub fn quadratic_form_inv(&self, z: &ArrayView1<C64>) -> f64 {
        let y = self.solve_lower(z);
        y.iter().map(|v| v.norm_sqr()).sum()
    }
}

/// (A + A^H) / 2.
pub fn hermitize(a: &Array2<C64>) -> Array2<C64> {
    let n = a.nrows();
    let mut out = Array2::<C64>::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            out[[i, j]] = (a[[i, j]] + a[[j, i]].conj()) * 0.5;
        }
    }
    out
}

pub fn trace(a: &ArrayView2<C64>) -> C64 {
    (0..a.nrows()).map(|i| a[[i, i]]).sum()
}

pub fn identity(n: usize) -> Array2<C64> {
    Array2::<C64>::eye(n)
}

/// Eigendecomposition of a Hermitian matrix by cyclic Jacobi rotations.
/// Returns (eigenvalues, eigenvectors as columns); eigenvalues unsorted.
pub fn eigh(a: &ArrayView2<C64>) -> (Array1<f64>, Array2<C64>) {
    let n = a.nrows();
    let mut m = a.to_owned();
    let mut v = Array2::<C64>::eye(n);
    let off = |m: &Array2<C64>| -> f64 {
        let mut s = 0.0;
        for p in 0..n {
            for q in 0..n {
                if p != q {
                    s += m[[p, q]].norm_sqr();
                }
            }
        }
        s
    };
    let scale: f64 = (0..n).map(|i| m[[i, i]].norm()).sum::<f64>().max(1e-300);
    for _sweep in 0..60 {
        if off(&m).sqrt() <= 1e-14 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[[p, q]];
                let mag = apq.norm();
                if mag <= 1e-300 {
                    continue;
                }
                let app = m[[p, p]].re;
                let aqq = m[[q, q]].re;
                let phase = apq / mag; // e^{i arg(apq)}
                let tau = (aqq - app) / (2.0 * mag);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c * phase; // complex sine
                // Apply J^H M J with J = [[c, s], [-conj(s), c]] in the (p,q) plane.
                for k in 0..n {
                    let mkp = m[[k, p]];
                    let mkq = m[[k, q]];
                    m[[k, p]] = mkp * c - mkq * s.conj();
                    m[[k, q]] = mkp * s + mkq * c;
                }
                for k in 0..n {
                    let mpk = m[[p, k]];
                    let mqk = m[[q, k]];
                    m[[p, k]] = mpk * c - mqk * s;
                    m[[q, k]] = mpk * s.conj() + mqk * c;
                }
                for k in 0..n {
                    let vkp = v[[k, p]];
                    let vkq = v[[k, q]];
                    v[[k, p]] = vkp * c - vkq * s.conj();
                    v[[k, q]] = vkp * s + vkq * c;
                }
            }
        }
    }
    let vals = Array1::from_iter((0..n).map(|i| m[[i, i]].re));
    (vals, v)
}

/// Smallest eigenvalue of a Hermitian matrix.
#[cfg(test)]
pub fn min_eigenvalue(a: &ArrayView2<C64>) -> f64 {
    let (vals, _) = eigh(a);
    vals.iter().cloned().fold(f64::INFINITY, f64::min)
}

/// Moore-Penrose pseudo-inverse of a Hermitian matrix via eigendecomposition.
/// Eigenvalues below `rel_tol * max|lambda|` are treated as zero.
pub fn pinv_hermitian(a: &ArrayView2<C64>, rel_tol: f64) -> Array2<C64> {
    let n = a.nrows();
    let (vals, vecs) = eigh(a);
    let max_abs = vals.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
    let mut out = Array2::<C64>::zeros((n, n));
    if max_abs == 0.0 {
        return out;
    }
    for k in 0..n {
        let lam = vals[k];
        if lam.abs() <= rel_tol * max_abs {
            continue;
        }
        let inv = 1.0 / lam;
        for i in 0..n {
            for j in 0..n {
                out[[i, j]] += vecs[[i, k]] * vecs[[j, k]].conj() * inv;
            }
        }
    }
    out
}
