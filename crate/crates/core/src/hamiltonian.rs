//! The single-layer magnetic tight-binding Hamiltonian `H_phi`.
//!
//! `(H u)_A(n) = u_B(n) + u_B(n+e1) + exp(-i n1 phi) u_B(n+e2)` and the adjoint
//! rows on B. On a finite [`Region`] bonds that leave the region are dropped
//! (open truncation). Phases are carried as integer exponents until the
//! operator is built, so large `|n1|` does not accumulate rounding.

use std::io::{self, Write};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::io::fmt_f64;
use crate::lattice::{neighbors, Region, Site, Sublattice};
use crate::linalg::{DenseMatrix, C64, ZERO};

/// Default cap on the number of sites for dense assembly.
pub const DENSE_SITE_CAP: usize = 20_000;

/// Magnetic flux per hexagonal face.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Flux {
    /// `phi` in radians.
    Real(f64),
    /// `phi = 2 pi p / q`, kept in lowest terms with `q >= 1`.
    Rational { p: i64, q: i64 },
}

fn gcd(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

impl Flux {
    pub fn rational(p: i64, q: i64) -> Result<Self> {
        if q == 0 {
            return Err(Error::InvalidParameter(
                "flux denominator must be nonzero".into(),
            ));
        }
        let g = gcd(p, q).max(1);
        let sign = if q < 0 { -1 } else { 1 };
        Ok(Flux::Rational {
            p: sign * p / g,
            q: sign * q / g,
        })
    }

    pub fn real(phi: f64) -> Self {
        Flux::Real(phi)
    }

    pub fn angle(&self) -> f64 {
        match *self {
            Flux::Real(phi) => phi,
            Flux::Rational { p, q } => std::f64::consts::TAU * p as f64 / q as f64,
        }
    }

    /// `alpha = phi / 2 pi`.
    pub fn alpha(&self) -> f64 {
        self.angle() / std::f64::consts::TAU
    }

    pub fn as_rational(&self) -> Option<(i64, i64)> {
        match *self {
            Flux::Rational { p, q } => Some((p, q)),
            Flux::Real(_) => None,
        }
    }

    /// Hop amplitude `exp(i m phi)`. Rational fluxes reduce `m p mod q` in
    /// exact arithmetic, so `p/q` and `(p + q)/q` give identical bits.
    pub fn phase(&self, m: i64) -> C64 {
        match *self {
            Flux::Real(phi) => C64::from_polar(1.0, m as f64 * phi),
            Flux::Rational { p, q } => {
                let r = (m.rem_euclid(q) * p.rem_euclid(q)).rem_euclid(q);
                if r == 0 {
                    C64::new(1.0, 0.0)
                } else {
                    C64::from_polar(1.0, std::f64::consts::TAU * r as f64 / q as f64)
                }
            }
        }
    }

    /// True when both fluxes produce the same hop amplitudes.
    pub fn equivalent(&self, other: &Flux) -> bool {
        (0..8).all(|m| (self.phase(m) - other.phase(m)).norm() < 1e-12)
    }
}

/// Complex amplitudes on the sites of a region.
#[derive(Debug, Clone)]
pub struct LatticeState {
    region: Arc<Region>,
    amps: Vec<C64>,
}

impl PartialEq for LatticeState {
    fn eq(&self, other: &Self) -> bool {
        self.amps == other.amps
            && (Arc::ptr_eq(&self.region, &other.region)
                || self.region.sites() == other.region.sites())
    }
}

impl LatticeState {
    pub fn zeros(region: Arc<Region>) -> Self {
        let n = region.len();
        LatticeState {
            region,
            amps: vec![ZERO; n],
        }
    }

    pub fn from_amplitudes(region: Arc<Region>, amps: Vec<C64>) -> Result<Self> {
        if amps.len() != region.len() {
            return Err(Error::InvalidParameter(format!(
                "{} amplitudes for a region of {} sites",
                amps.len(),
                region.len()
            )));
        }
        Ok(LatticeState { region, amps })
    }

    pub fn delta(region: Arc<Region>, site: Site) -> Result<Self> {
        let i = region
            .lookup(site)
            .ok_or_else(|| Error::SiteNotInRegion(site.to_string()))?;
        let mut s = Self::zeros(region);
        s.amps[i] = C64::new(1.0, 0.0);
        Ok(s)
    }

    pub fn region(&self) -> &Arc<Region> {
        &self.region
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn amplitudes_mut(&mut self) -> &mut [C64] {
        &mut self.amps
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amps
    }

    pub fn at(&self, site: Site) -> Option<C64> {
        self.region.lookup(site).map(|i| self.amps[i])
    }

    pub fn norm(&self) -> f64 {
        crate::linalg::norm(&self.amps)
    }

    pub fn scaled(&self, s: C64) -> Self {
        LatticeState {
            region: self.region.clone(),
            amps: self.amps.iter().map(|a| a * s).collect(),
        }
    }
}

/// Row-list sparse matrix; the matrix-free representation of an operator.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseOperator {
    dim: usize,
    rows: Vec<Vec<(usize, C64)>>,
}

impl SparseOperator {
    pub fn from_rows(dim: usize, mut rows: Vec<Vec<(usize, C64)>>) -> Self {
        assert_eq!(rows.len(), dim);
        for row in &mut rows {
            row.sort_by_key(|&(j, _)| j);
        }
        SparseOperator { dim, rows }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[(usize, C64)] {
        &self.rows[i]
    }

    pub fn apply_into(&self, x: &[C64], out: &mut [C64]) {
        for (o, row) in out.iter_mut().zip(&self.rows) {
            *o = row.iter().map(|&(j, a)| a * x[j]).sum();
        }
    }

    pub fn apply(&self, x: &[C64]) -> Vec<C64> {
        let mut out = vec![ZERO; self.dim];
        self.apply_into(x, &mut out);
        out
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.rows[i]
            .iter()
            .find(|&&(c, _)| c == j)
            .map_or(ZERO, |&(_, a)| a)
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut m = DenseMatrix::zeros(self.dim, self.dim);
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, a) in row {
                m[(i, j)] += a;
            }
        }
        m
    }

    pub fn hermitian_deviation(&self) -> f64 {
        let mut dev = 0.0f64;
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, a) in row {
                dev = dev.max((a - self.get(j, i).conj()).norm());
            }
        }
        dev
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        self.rows
            .iter()
            .enumerate()
            .flat_map(|(i, row)| row.iter().map(move |&(j, a)| (i, j, a)))
    }
}

/// A Hermitian operator in either dense or matrix-free form.
#[derive(Debug, Clone, PartialEq)]
pub enum HermitianOperator {
    Dense(DenseMatrix),
    Sparse(SparseOperator),
}

impl HermitianOperator {
    pub fn dim(&self) -> usize {
        match self {
            HermitianOperator::Dense(m) => m.rows(),
            HermitianOperator::Sparse(s) => s.dim(),
        }
    }

    pub fn apply(&self, x: &[C64]) -> Vec<C64> {
        match self {
            HermitianOperator::Dense(m) => m.mul_vec(x),
            HermitianOperator::Sparse(s) => s.apply(x),
        }
    }

    pub fn to_dense(&self) -> DenseMatrix {
        match self {
            HermitianOperator::Dense(m) => m.clone(),
            HermitianOperator::Sparse(s) => s.to_dense(),
        }
    }

    pub fn hermitian_deviation(&self) -> f64 {
        match self {
            HermitianOperator::Dense(m) => m.hermitian_deviation(),
            HermitianOperator::Sparse(s) => s.hermitian_deviation(),
        }
    }

    pub fn dense(&self) -> Option<&DenseMatrix> {
        match self {
            HermitianOperator::Dense(m) => Some(m),
            HermitianOperator::Sparse(_) => None,
        }
    }

    /// Sorted `(row, col, value)` for all stored nonzeros.
    pub fn triplets(&self) -> Vec<(usize, usize, C64)> {
        match self {
            HermitianOperator::Dense(m) => {
                let n = m.rows();
                (0..n)
                    .flat_map(|i| (0..n).map(move |j| (i, j)))
                    .filter(|&(i, j)| m[(i, j)] != ZERO)
                    .map(|(i, j)| (i, j, m[(i, j)]))
                    .collect()
            }
            HermitianOperator::Sparse(s) => s.triplets().filter(|t| t.2 != ZERO).collect(),
        }
    }

    /// Writes `row col re im` lines (0-based, 17 significant digits).
    pub fn write_triplets<W: Write>(&self, mut out: W) -> io::Result<()> {
        for (i, j, a) in self.triplets() {
            writeln!(out, "{i} {j} {} {}", fmt_f64(a.re), fmt_f64(a.im))?;
        }
        Ok(())
    }
}

/// `H_phi` restricted to a region with open truncation.
#[derive(Debug, Clone)]
pub struct MagneticHamiltonian {
    flux: Flux,
    region: Arc<Region>,
    op: SparseOperator,
}

impl MagneticHamiltonian {
    pub fn new(flux: Flux, region: Arc<Region>) -> Self {
        let rows = region
            .sites()
            .iter()
            .map(|&s| {
                neighbors(s)
                    .iter()
                    .filter_map(|b| region.lookup(b.site).map(|j| (j, flux.phase(b.phase))))
                    .collect()
            })
            .collect();
        let op = SparseOperator::from_rows(region.len(), rows);
        MagneticHamiltonian { flux, region, op }
    }

    pub fn flux(&self) -> Flux {
        self.flux
    }

    pub fn region(&self) -> &Arc<Region> {
        &self.region
    }

    pub fn operator(&self) -> &SparseOperator {
        &self.op
    }

    pub fn apply_into(&self, x: &[C64], out: &mut [C64]) {
        self.op.apply_into(x, out);
    }

    pub fn apply(&self, state: &LatticeState) -> LatticeState {
        debug_assert!(
            Arc::ptr_eq(state.region(), &self.region) || state.region().len() == self.region.len()
        );
        LatticeState {
            region: self.region.clone(),
            amps: self.op.apply(state.amplitudes()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Boundary {
    #[default]
    Open,
}

/// Applies `H_phi` to a state, dropping hops that leave its region.
pub fn apply_h(flux: Flux, state: &LatticeState, boundary: Boundary) -> LatticeState {
    match boundary {
        Boundary::Open => MagneticHamiltonian::new(flux, state.region().clone()).apply(state),
    }
}

pub fn assemble_dense(flux: Flux, region: &Arc<Region>) -> Result<HermitianOperator> {
    assemble_dense_capped(flux, region, DENSE_SITE_CAP)
}

pub fn assemble_dense_capped(
    flux: Flux,
    region: &Arc<Region>,
    cap: usize,
) -> Result<HermitianOperator> {
    if region.len() > cap {
        return Err(Error::CapExceeded {
            sites: region.len(),
            cap,
        });
    }
    let h = MagneticHamiltonian::new(flux, region.clone());
    Ok(HermitianOperator::Dense(h.operator().to_dense()))
}

/// Conjugation by `diag(exp(i angle))`: entry `(x, y)` picks up
/// `exp(i (angle_x - angle_y))`.
pub fn gauge_transform(op: &HermitianOperator, angles: &[f64]) -> Result<HermitianOperator> {
    if angles.len() != op.dim() {
        return Err(Error::InvalidParameter(format!(
            "{} gauge angles for an operator of dimension {}",
            angles.len(),
            op.dim()
        )));
    }
    let g = |i: usize, j: usize| C64::from_polar(1.0, angles[i] - angles[j]);
    Ok(match op {
        HermitianOperator::Dense(m) => {
            let n = m.rows();
            let mut out = m.clone();
            for i in 0..n {
                for j in 0..n {
                    out[(i, j)] = m[(i, j)] * g(i, j);
                }
            }
            HermitianOperator::Dense(out)
        }
        HermitianOperator::Sparse(s) => {
            let rows = (0..s.dim())
                .map(|i| s.row(i).iter().map(|&(j, a)| (j, a * g(i, j))).collect())
                .collect();
            HermitianOperator::Sparse(SparseOperator::from_rows(s.dim(), rows))
        }
    })
}

/// Linear index of a torus site: cells row-major in `(n1, n2)`, A before B.
pub fn torus_index(l2: usize, n1: usize, n2: usize, sub: Sublattice) -> usize {
    2 * (n1 * l2 + n2) + usize::from(sub == Sublattice::B)
}

/// `H_phi` on the `L1 x L2` torus at rational flux; requires `q | L1` so the
/// Landau-gauge phase is single-valued across the seam.
pub fn torus_hamiltonian(l1: usize, l2: usize, flux: Flux) -> Result<HermitianOperator> {
    let (_, q) = flux
        .as_rational()
        .ok_or_else(|| Error::InvalidParameter("torus needs a rational flux".into()))?;
    if l1 < 2 || l2 < 2 {
        return Err(Error::InvalidParameter(format!(
            "torus sides must be >= 2, got {l1}x{l2}"
        )));
    }
    if l1 as i64 % q != 0 {
        return Err(Error::InvalidParameter(format!(
            "flux denominator {q} does not divide L1 = {l1}"
        )));
    }
    let dim = 2 * l1 * l2;
    let mut m = DenseMatrix::zeros(dim, dim);
    for n1 in 0..l1 {
        for n2 in 0..l2 {
            for sub in [Sublattice::A, Sublattice::B] {
                let site = Site {
                    n1: n1 as i64,
                    n2: n2 as i64,
                    sub,
                };
                let i = torus_index(l2, n1, n2, sub);
                for b in neighbors(site) {
                    let m1 = b.site.n1.rem_euclid(l1 as i64) as usize;
                    let m2 = b.site.n2.rem_euclid(l2 as i64) as usize;
                    m[(i, torus_index(l2, m1, m2, b.site.sub))] += flux.phase(b.phase);
                }
            }
        }
    }
    Ok(HermitianOperator::Dense(m))
}

/// Open-truncation radius for which `r^-N < tol` with `r = (|E| - 1) / 2`,
/// plus a margin of 5 shells.
pub fn recommended_radius(energy: f64, tol: f64) -> Result<usize> {
    let r = (energy.abs() - 1.0) / 2.0;
    if r <= 1.0 {
        return Err(Error::OutsideConvergenceRegion { energy });
    }
    if !(tol > 0.0 && tol < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "tolerance {tol} must lie in (0, 1)"
        )));
    }
    Ok(((1.0 / tol).ln() / r.ln()).ceil() as usize + 5)
}
