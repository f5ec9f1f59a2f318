//! Small dense complex linear algebra used by the oracles and the 2x2
//! defect algebra.

use std::ops::{Index, IndexMut};

use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

/// Row-major dense complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix {
            rows,
            cols,
            data: vec![ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn from_rows(rows: &[&[C64]]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        let data = rows.iter().flat_map(|row| row.iter().copied()).collect();
        DenseMatrix {
            rows: r,
            cols: c,
            data,
        }
    }

    pub fn from_real(rows: &[&[f64]]) -> Self {
        let owned: Vec<Vec<C64>> = rows
            .iter()
            .map(|r| r.iter().map(|&x| C64::new(x, 0.0)).collect())
            .collect();
        let refs: Vec<&[C64]> = owned.iter().map(|r| r.as_slice()).collect();
        Self::from_rows(&refs)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn row(&self, i: usize) -> &[C64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<C64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn adjoint(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(j, i)] = self[(i, j)].conj();
            }
        }
        out
    }

    pub fn mul_vec(&self, x: &[C64]) -> Vec<C64> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn matmul(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.cols, other.rows);
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == ZERO {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += a * other.data[k * other.cols + j];
                }
            }
        }
        out
    }

    pub fn scale(&self, s: C64) -> Self {
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|x| x * s).collect(),
        }
    }

    pub fn add(&self, other: &DenseMatrix) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a + b)
            .collect();
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data,
        }
    }

    pub fn sub(&self, other: &DenseMatrix) -> Self {
        self.add(&other.scale(-ONE))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Largest `|A_ij - conj(A_ji)|`.
    pub fn hermitian_deviation(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let mut dev = 0.0f64;
        for i in 0..self.rows {
            for j in i..self.cols {
                dev = dev.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        dev
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    /// Largest absolute row sum; bounds the spectral radius.
    pub fn max_row_sum(&self) -> f64 {
        (0..self.rows)
            .map(|i| self.row(i).iter().map(|x| x.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn shifted(&self, shift: f64) -> Self {
        let mut out = self.clone();
        for i in 0..self.rows.min(self.cols) {
            out[(i, i)] += shift;
        }
        out
    }

    pub fn lu(&self) -> Result<Lu> {
        Lu::factor(self)
    }

    pub fn solve(&self, b: &[C64]) -> Result<Vec<C64>> {
        Ok(self.lu()?.solve(b))
    }

    pub fn determinant(&self) -> Result<C64> {
        match self.lu() {
            Ok(lu) => Ok(lu.determinant()),
            Err(Error::Singular) => Ok(ZERO),
            Err(e) => Err(e),
        }
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.cols + j]
    }
}

/// LU factorization with partial pivoting.
#[derive(Debug, Clone)]
pub struct Lu {
    factors: DenseMatrix,
    perm: Vec<usize>,
    swaps: usize,
}

impl Lu {
    pub fn factor(m: &DenseMatrix) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::InvalidParameter("LU needs a square matrix".into()));
        }
        let n = m.rows;
        let mut a = m.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut swaps = 0;
        let scale = m
            .data
            .iter()
            .map(|x| x.norm())
            .fold(0.0, f64::max)
            .max(f64::MIN_POSITIVE);
        for k in 0..n {
            let p = (k..n)
                .max_by(|&i, &j| a[(i, k)].norm().total_cmp(&a[(j, k)].norm()))
                .unwrap_or(k);
            if a[(p, k)].norm() <= 1e-300 * scale {
                return Err(Error::Singular);
            }
            if p != k {
                for j in 0..n {
                    a.data.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
                swaps += 1;
            }
            let pivot = a[(k, k)];
            for i in k + 1..n {
                let factor = a[(i, k)] / pivot;
                a[(i, k)] = factor;
                if factor == ZERO {
                    continue;
                }
                let (upper, lower) = a.data.split_at_mut(i * n);
                let src = &upper[k * n + k + 1..k * n + n];
                for (dst, s) in lower[k + 1..n].iter_mut().zip(src) {
                    *dst -= factor * s;
                }
            }
        }
        Ok(Lu {
            factors: a,
            perm,
            swaps,
        })
    }

    pub fn solve(&self, b: &[C64]) -> Vec<C64> {
        let n = self.factors.rows;
        assert_eq!(b.len(), n);
        let mut x: Vec<C64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let row = self.factors.row(i);
            let s: C64 = row[..i].iter().zip(&x[..i]).map(|(l, y)| l * y).sum();
            x[i] -= s;
        }
        for i in (0..n).rev() {
            let row = self.factors.row(i);
            let s: C64 = row[i + 1..]
                .iter()
                .zip(&x[i + 1..])
                .map(|(u, y)| u * y)
                .sum();
            x[i] = (x[i] - s) / row[i];
        }
        x
    }

    pub fn determinant(&self) -> C64 {
        let n = self.factors.rows;
        let d: C64 = (0..n).map(|i| self.factors[(i, i)]).product();
        if self.swaps % 2 == 1 {
            -d
        } else {
            d
        }
    }
}

pub fn dot(x: &[C64], y: &[C64]) -> C64 {
    x.iter().zip(y).map(|(a, b)| a.conj() * b).sum()
}

pub fn norm(x: &[C64]) -> f64 {
    x.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
}

/// 2x2 complex matrices for the defect and interlayer algebra.
pub type Mat2 = [[C64; 2]; 2];

pub fn mat2_mul(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut out = [[ZERO; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

pub fn mat2_vec(a: &Mat2, x: [C64; 2]) -> [C64; 2] {
    [
        a[0][0] * x[0] + a[0][1] * x[1],
        a[1][0] * x[0] + a[1][1] * x[1],
    ]
}

pub fn mat2_det(a: &Mat2) -> C64 {
    a[0][0] * a[1][1] - a[0][1] * a[1][0]
}

pub fn mat2_adjoint(a: &Mat2) -> Mat2 {
    [
        [a[0][0].conj(), a[1][0].conj()],
        [a[0][1].conj(), a[1][1].conj()],
    ]
}

pub fn mat2_scale(a: &Mat2, s: C64) -> Mat2 {
    [[a[0][0] * s, a[0][1] * s], [a[1][0] * s, a[1][1] * s]]
}

pub fn mat2_frobenius(a: &Mat2) -> f64 {
    a.iter().flatten().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

pub fn mat2_hermitian_deviation(a: &Mat2) -> f64 {
    (a[0][1] - a[1][0].conj())
        .norm()
        .max(a[0][0].im.abs())
        .max(a[1][1].im.abs())
}

pub fn mat2_to_dense(a: &Mat2) -> DenseMatrix {
    DenseMatrix::from_rows(&[&a[0], &a[1]])
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn random_matrix(n: usize, seed: u64) -> DenseMatrix {
        let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
        let mut m = DenseMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            }
        }
        m
    }

    #[test]
    fn lu_solves_random_systems() {
        for seed in 0..5 {
            let a = random_matrix(12, seed);
            let x: Vec<C64> = (0..12)
                .map(|i| C64::new(i as f64, 1.0 - i as f64))
                .collect();
            let b = a.mul_vec(&x);
            let y = a.solve(&b).unwrap();
            for (p, q) in x.iter().zip(&y) {
                assert!((p - q).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn determinant_of_permutation_and_triangular() {
        let p = DenseMatrix::from_real(&[&[0.0, 1.0], &[1.0, 0.0]]);
        assert!((p.determinant().unwrap() + ONE).norm() < 1e-15);
        let t = DenseMatrix::from_real(&[&[2.0, 5.0, 1.0], &[0.0, 3.0, 7.0], &[0.0, 0.0, 0.5]]);
        assert!((t.determinant().unwrap() - C64::new(3.0, 0.0)).norm() < 1e-14);
        let s = DenseMatrix::from_real(&[&[1.0, 2.0], &[2.0, 4.0]]);
        assert_eq!(s.determinant().unwrap(), ZERO);
    }

    #[test]
    fn mat2_helpers_agree_with_dense() {
        let a: Mat2 = [
            [C64::new(1.0, 2.0), C64::new(0.5, -1.0)],
            [C64::new(3.0, 0.0), C64::new(-2.0, 0.25)],
        ];
        let d = mat2_to_dense(&a);
        assert!((mat2_det(&a) - d.determinant().unwrap()).norm() < 1e-13);
        let sq = mat2_mul(&a, &a);
        let dsq = d.matmul(&d);
        for i in 0..2 {
            for j in 0..2 {
                assert!((sq[i][j] - dsq[(i, j)]).norm() < 1e-13);
            }
        }
        assert_eq!(mat2_to_dense(&mat2_adjoint(&a)), d.adjoint());
    }
}
