//! Magnetic Bloch bands at rational flux and the Hofstadter butterfly.
//!
//! At `phi = 2 pi p / q` the Landau-gauge Hamiltonian commutes with the
//! translations by `(q, 0)` and `(0, 1)`. The magnetic unit cell holds the
//! cells `n1 = 0..q` at `n2 = 0`, giving a `2q x 2q` Bloch matrix with basis
//! order `A_0, B_0, A_1, B_1, ...`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hamiltonian::Flux;
use crate::lattice::{neighbors, Site, Sublattice};
use crate::linalg::{DenseMatrix, C64};
use crate::spectral::hermitian_eigen;

fn require_rational(flux: Flux) -> Result<(i64, i64)> {
    flux.as_rational()
        .ok_or_else(|| Error::InvalidParameter("band computations need a rational flux".into()))
}

fn cell_index(j: i64, sub: Sublattice) -> usize {
    2 * j as usize + usize::from(sub == Sublattice::B)
}

/// Bloch matrix over the `q`-cell magnetic unit cell; `k1` is the
/// quasi-momentum across the magnetic cell, `k2` along `e2`.
pub fn bloch_matrix(flux: Flux, k1: f64, k2: f64) -> Result<DenseMatrix> {
    let (_, q) = require_rational(flux)?;
    let dim = 2 * q as usize;
    let mut h = DenseMatrix::zeros(dim, dim);
    for j in 0..q {
        for sub in [Sublattice::A, Sublattice::B] {
            let row = cell_index(j, sub);
            for b in neighbors(Site { n1: j, n2: 0, sub }) {
                let cell = b.site.n1.div_euclid(q);
                let rep = b.site.n1.rem_euclid(q);
                let bloch = C64::from_polar(1.0, k1 * cell as f64 + k2 * b.site.n2 as f64);
                h[(row, cell_index(rep, b.site.sub))] += flux.phase(b.phase) * bloch;
            }
        }
    }
    Ok(h)
}

/// Zero-field bands `-|f|, +|f|` with `f = 1 + e^{ik1} + e^{ik2}`.
pub fn zero_field_dispersion(k1: f64, k2: f64) -> (f64, f64) {
    let f = C64::new(1.0, 0.0) + C64::from_polar(1.0, k1) + C64::from_polar(1.0, k2);
    (-f.norm(), f.norm())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandInterval {
    pub emin: f64,
    pub emax: f64,
}

impl BandInterval {
    pub fn contains(&self, e: f64, fatten: f64) -> bool {
        e >= self.emin - fatten && e <= self.emax + fatten
    }
}

/// Bloch band intervals for one rational flux on a uniform k-grid.
#[derive(Debug, Clone, PartialEq)]
pub struct BandData {
    pub p: i64,
    pub q: i64,
    pub m1: usize,
    pub m2: usize,
    pub bands: Vec<BandInterval>,
    /// `samples[b][k]`: the `b`-th eigenvalue at grid point `k = i1 * m2 + i2`.
    pub samples: Vec<Vec<f64>>,
}

impl BandData {
    pub fn alpha(&self) -> f64 {
        self.p as f64 / self.q as f64
    }

    pub fn flux(&self) -> Flux {
        Flux::Rational {
            p: self.p,
            q: self.q,
        }
    }

    /// Whether `e` lies in some band interval widened by `fatten`.
    pub fn contains(&self, e: f64, fatten: f64) -> bool {
        self.bands.iter().any(|b| b.contains(e, fatten))
    }

    /// Distance from `e` to the nearest band edge.
    pub fn edge_distance(&self, e: f64) -> f64 {
        self.bands
            .iter()
            .flat_map(|b| [b.emin, b.emax])
            .map(|x| (x - e).abs())
            .fold(f64::INFINITY, f64::min)
    }

    pub fn min_energy(&self) -> f64 {
        self.bands
            .iter()
            .map(|b| b.emin)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn max_energy(&self) -> f64 {
        self.bands
            .iter()
            .map(|b| b.emax)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Diagonalizes the Bloch matrix on the grid `k = 2 pi (i1/m1, i2/m2)`, which
/// always contains `k = (0, 0)`.
pub fn band_structure(flux: Flux, m1: usize, m2: usize) -> Result<BandData> {
    let (p, q) = require_rational(flux)?;
    if m1 < 4 || m2 < 4 {
        return Err(Error::InvalidParameter(format!(
            "k-grid must be at least 4x4, got {m1}x{m2}"
        )));
    }
    let tau = std::f64::consts::TAU;
    let spectra: Vec<Vec<f64>> = (0..m1 * m2)
        .into_par_iter()
        .map(|k| {
            let (i1, i2) = (k / m2, k % m2);
            let h = bloch_matrix(
                flux,
                tau * i1 as f64 / m1 as f64,
                tau * i2 as f64 / m2 as f64,
            )?;
            Ok(hermitian_eigen(&h)?.values)
        })
        .collect::<Result<_>>()?;
    let nb = 2 * q as usize;
    let samples: Vec<Vec<f64>> = (0..nb)
        .map(|b| spectra.iter().map(|ev| ev[b]).collect())
        .collect();
    let bands = samples
        .iter()
        .map(|s| BandInterval {
            emin: s.iter().copied().fold(f64::INFINITY, f64::min),
            emax: s.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        })
        .collect();
    Ok(BandData {
        p,
        q,
        m1,
        m2,
        bands,
        samples,
    })
}

/// Reduced fractions `p/q` in `[0, 1]` with `q <= qmax`, ascending.
pub fn farey(qmax: i64) -> Vec<(i64, i64)> {
    if qmax < 1 {
        return Vec::new();
    }
    // Standard next-term recurrence of the Farey sequence.
    let mut out = vec![(0, 1)];
    let (mut a, mut b, mut c, mut d) = (0, 1, 1, qmax);
    while c <= d {
        out.push((c, d));
        let k = (qmax + b) / d;
        (a, b, c, d) = (c, d, k * c - a, k * d - b);
    }
    out
}

/// Nearest Farey fraction of order `qmax` to `alpha` reduced into `[0, 1)`.
pub fn nearest_farey(alpha: f64, qmax: i64) -> (i64, i64) {
    let a = alpha.rem_euclid(1.0);
    farey(qmax)
        .into_iter()
        .min_by(|x, y| {
            let dx = (a - x.0 as f64 / x.1 as f64).abs();
            let dy = (a - y.0 as f64 / y.1 as f64).abs();
            dx.total_cmp(&dy)
        })
        .unwrap_or((0, 1))
}

/// Band data for every Farey flux of order `qmax`, ascending in `p/q`.
pub fn butterfly(qmax: i64, m1: usize, m2: usize) -> Result<Vec<BandData>> {
    if qmax < 1 {
        return Err(Error::InvalidParameter(format!(
            "qmax must be >= 1, got {qmax}"
        )));
    }
    farey(qmax)
        .into_par_iter()
        .map(|(p, q)| band_structure(Flux::Rational { p, q }, m1, m2))
        .collect()
}
