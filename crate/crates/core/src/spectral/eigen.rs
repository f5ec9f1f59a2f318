//! Dense Hermitian eigensolvers.
//!
//! [`hermitian_eigen`] is a cyclic complex Jacobi method that returns
//! eigenvectors. [`Tridiagonal`] reduces by Householder reflections and counts
//! eigenvalues with Sturm sequences; it is the eigenvalue-only route for the
//! larger oracle matrices.

use crate::error::{Error, Result};
use crate::linalg::{DenseMatrix, C64, ONE, ZERO};

const OFF_DIAGONAL_TOL: f64 = 1e-13;
const MAX_SWEEPS: usize = 40;
const HERMITIAN_TOL: f64 = 1e-10;

/// Ascending eigenvalues with the eigenvectors as matching columns.
#[derive(Debug, Clone)]
pub struct Eigen {
    pub values: Vec<f64>,
    pub vectors: DenseMatrix,
}

impl Eigen {
    pub fn vector(&self, i: usize) -> Vec<C64> {
        self.vectors.column(i)
    }
}

fn check_hermitian(m: &DenseMatrix) -> Result<()> {
    if !m.is_square() {
        return Err(Error::InvalidParameter(format!(
            "eigensolver needs a square matrix, got {}x{}",
            m.rows(),
            m.cols()
        )));
    }
    let deviation = m.hermitian_deviation();
    if deviation > HERMITIAN_TOL * m.frobenius_norm().max(1.0) {
        return Err(Error::NotHermitian { deviation });
    }
    Ok(())
}

fn symmetrized(m: &DenseMatrix) -> DenseMatrix {
    let n = m.rows();
    let mut a = m.clone();
    for i in 0..n {
        a[(i, i)] = C64::new(m[(i, i)].re, 0.0);
        for j in i + 1..n {
            let avg = (m[(i, j)] + m[(j, i)].conj()) * 0.5;
            a[(i, j)] = avg;
            a[(j, i)] = avg.conj();
        }
    }
    a
}

fn off_diagonal_norm(a: &DenseMatrix) -> f64 {
    let n = a.rows();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += a[(i, j)].norm_sqr();
            }
        }
    }
    s.sqrt()
}

/// Cyclic Jacobi diagonalization of a Hermitian matrix.
pub fn hermitian_eigen(m: &DenseMatrix) -> Result<Eigen> {
    check_hermitian(m)?;
    let n = m.rows();
    let mut a = symmetrized(m);
    let mut v = DenseMatrix::identity(n);
    let scale = a.frobenius_norm().max(f64::MIN_POSITIVE);

    let mut converged = n <= 1;
    for _ in 0..MAX_SWEEPS {
        if off_diagonal_norm(&a) <= OFF_DIAGONAL_TOL * scale {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let z = a[(p, q)];
                let r = z.norm();
                if r <= f64::MIN_POSITIVE {
                    continue;
                }
                let phase = z / r;
                let tau = (a[(q, q)].re - a[(p, p)].re) / (2.0 * r);
                let t = if tau == 0.0 {
                    1.0
                } else {
                    tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // U = [[c, s e^{i theta}], [-s e^{-i theta}, c]] on (p, q).
                let upp = C64::new(c, 0.0);
                let upq = phase * s;
                let uqp = -phase.conj() * s;
                let uqq = C64::new(c, 0.0);
                for k in 0..n {
                    let (akp, akq) = (a[(k, p)], a[(k, q)]);
                    a[(k, p)] = akp * upp + akq * uqp;
                    a[(k, q)] = akp * upq + akq * uqq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[(p, k)], a[(q, k)]);
                    a[(p, k)] = upp.conj() * apk + uqp.conj() * aqk;
                    a[(q, k)] = upq.conj() * apk + uqq.conj() * aqk;
                }
                a[(p, q)] = ZERO;
                a[(q, p)] = ZERO;
                a[(p, p)].im = 0.0;
                a[(q, q)].im = 0.0;
                for k in 0..n {
                    let (vkp, vkq) = (v[(k, p)], v[(k, q)]);
                    v[(k, p)] = vkp * upp + vkq * uqp;
                    v[(k, q)] = vkp * upq + vkq * uqq;
                }
            }
        }
    }
    if !converged && off_diagonal_norm(&a) > OFF_DIAGONAL_TOL * scale {
        return Err(Error::NotConverged { sweeps: MAX_SWEEPS });
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].re.total_cmp(&a[(j, j)].re));
    let values = order.iter().map(|&i| a[(i, i)].re).collect();
    let mut vectors = DenseMatrix::zeros(n, n);
    for (col, &src) in order.iter().enumerate() {
        for k in 0..n {
            vectors[(k, col)] = v[(k, src)];
        }
    }
    Ok(Eigen { values, vectors })
}

/// Real symmetric tridiagonal form `(diag, offdiag)` of a Hermitian matrix.
#[derive(Debug, Clone)]
pub struct Tridiagonal {
    diag: Vec<f64>,
    off: Vec<f64>,
}

impl Tridiagonal {
    /// Householder reduction; the complex off-diagonal is replaced by its
    /// modulus, which is a diagonal unitary similarity.
    pub fn from_hermitian(m: &DenseMatrix) -> Result<Self> {
        check_hermitian(m)?;
        let n = m.rows();
        let mut a = symmetrized(m);
        let mut v = vec![ZERO; n];
        let mut p = vec![ZERO; n];
        for k in 0..n.saturating_sub(2) {
            let len = n - k - 1;
            let xnorm = (k + 1..n).map(|i| a[(i, k)].norm_sqr()).sum::<f64>().sqrt();
            if xnorm == 0.0 {
                continue;
            }
            let x0 = a[(k + 1, k)];
            let phase = if x0.norm() > 0.0 { x0 / x0.norm() } else { ONE };
            let alpha = -phase * xnorm;
            for (t, i) in (k + 1..n).enumerate() {
                v[t] = a[(i, k)];
            }
            v[0] -= alpha;
            let vnorm2: f64 = v[..len].iter().map(|x| x.norm_sqr()).sum();
            if vnorm2 == 0.0 {
                continue;
            }
            let tau = 2.0 / vnorm2;
            for (t, i) in (k + 1..n).enumerate() {
                let row = &a.row(i)[k + 1..];
                p[t] = row.iter().zip(&v[..len]).map(|(x, y)| x * y).sum::<C64>() * tau;
            }
            let kappa = 0.5
                * tau
                * v[..len]
                    .iter()
                    .zip(&p[..len])
                    .map(|(x, y)| x.conj() * y)
                    .sum::<C64>()
                    .re;
            for t in 0..len {
                p[t] -= v[t] * kappa;
            }
            for (s, i) in (k + 1..n).enumerate() {
                for (t, j) in (k + 1..n).enumerate() {
                    let upd = p[s] * v[t].conj() + v[s] * p[t].conj();
                    a[(i, j)] -= upd;
                }
            }
            a[(k + 1, k)] = alpha;
            a[(k, k + 1)] = alpha.conj();
            for i in k + 2..n {
                a[(i, k)] = ZERO;
                a[(k, i)] = ZERO;
            }
        }
        let diag = (0..n).map(|i| a[(i, i)].re).collect();
        let off = (0..n.saturating_sub(1))
            .map(|i| a[(i + 1, i)].norm())
            .collect();
        Ok(Tridiagonal { diag, off })
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    /// Number of eigenvalues strictly below `x` (Sturm sequence count).
    pub fn count_below(&self, x: f64) -> usize {
        let mut count = 0;
        let mut q = 1.0;
        for i in 0..self.diag.len() {
            let coupling = if i == 0 {
                0.0
            } else {
                self.off[i - 1] * self.off[i - 1]
            };
            let denom = if q == 0.0 {
                f64::EPSILON * (1.0 + x.abs())
            } else {
                q
            };
            q = self.diag[i] - x - coupling / denom;
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    pub fn count_in(&self, lo: f64, hi: f64) -> usize {
        self.count_below(hi).saturating_sub(self.count_below(lo))
    }

    fn gershgorin(&self) -> (f64, f64) {
        let n = self.diag.len();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let r = if i > 0 { self.off[i - 1] } else { 0.0 }
                + if i + 1 < n { self.off[i] } else { 0.0 };
            lo = lo.min(self.diag[i] - r);
            hi = hi.max(self.diag[i] + r);
        }
        (lo - 1.0, hi + 1.0)
    }

    /// All eigenvalues in ascending order by bisection.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let (lo, hi) = self.gershgorin();
        (0..self.dim())
            .map(|k| {
                let (mut a, mut b) = (lo, hi);
                for _ in 0..200 {
                    let mid = 0.5 * (a + b);
                    if b - a <= 2.0 * f64::EPSILON * mid.abs().max(1.0) {
                        break;
                    }
                    if self.count_below(mid) > k {
                        b = mid;
                    } else {
                        a = mid;
                    }
                }
                0.5 * (a + b)
            })
            .collect()
    }
}

/// Eigenvalues only, ascending.
pub fn hermitian_eigenvalues(m: &DenseMatrix) -> Result<Vec<f64>> {
    Ok(Tridiagonal::from_hermitian(m)?.eigenvalues())
}

/// Number of eigenvalues in `[lo, hi)`.
pub fn count_eigenvalues_in(m: &DenseMatrix, lo: f64, hi: f64) -> Result<usize> {
    Ok(Tridiagonal::from_hermitian(m)?.count_in(lo, hi))
}
