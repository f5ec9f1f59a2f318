//! Two-site defects that bind a state at a prescribed energy.
//!
//! Given `E0` outside `[-3, 3]`, the response `u = (H - E0)^-1 delta_v` is
//! an exponentially decaying solution of `(H - E0) u = f` with `f = delta_v`.
//! A Hermitian `Vt` on `{v, w}` with `Vt [u(v), u(w)] = [-1, 0]` turns it into
//! an eigenvector: `(H + V - E0) u = f - f = 0`.
//!
//! Eigenvalues of `H + V` outside the band are the zeros of the secular
//! function `det(I + Vt G(E))`, with `G` the Green block on `{v, w}`.

use crate::error::{Error, Result};
use crate::hamiltonian::{LatticeState, MagneticHamiltonian};
use crate::lattice::{are_adjacent, neighbors, Region, Site, Sublattice};
use crate::linalg::{mat2_hermitian_deviation, mat2_scale, DenseMatrix, Mat2, C64, ONE, ZERO};
use crate::resolvent::{
    decay_fit, green_block, neumann_solve, shifted_apply, DecayFit, GreenBlock, SolverConfig,
};
use crate::spectral::hermitian_eigen;

/// Imaginary parts of quantities that are real in exact arithmetic.
pub const REALNESS_TOL: f64 = 1e-10;
/// Largest `|secular(E)|` accepted by [`bound_state`].
pub const SECULAR_TOL: f64 = 1e-8;
/// Both singular values of `I + Vt G` below this: the kernel is ambiguous.
pub const KERNEL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DefectSpec {
    pub v: Site,
    pub w: Site,
    pub vtilde: Mat2,
}

impl DefectSpec {
    pub fn new(v: Site, w: Site, vtilde: Mat2) -> Result<Self> {
        if v.sub != Sublattice::A {
            return Err(Error::InvalidParameter(format!(
                "defect vertex {v} must be on sublattice A"
            )));
        }
        if !are_adjacent(v, w) {
            return Err(Error::NotAdjacent(v.to_string(), w.to_string()));
        }
        let deviation = mat2_hermitian_deviation(&vtilde);
        if deviation > 1e-12 {
            return Err(Error::NotHermitian { deviation });
        }
        Ok(DefectSpec { v, w, vtilde })
    }

    /// The same defect with `Vt` multiplied by `s`.
    pub fn scaled(&self, s: f64) -> Self {
        DefectSpec {
            vtilde: mat2_scale(&self.vtilde, C64::new(s, 0.0)),
            ..*self
        }
    }

    pub fn norm(&self) -> f64 {
        crate::linalg::mat2_frobenius(&self.vtilde)
    }

    fn indices(&self, region: &Region) -> Result<[usize; 2]> {
        let find = |s: Site| {
            region
                .lookup(s)
                .ok_or_else(|| Error::SiteNotInRegion(s.to_string()))
        };
        Ok([find(self.v)?, find(self.w)?])
    }

    /// `out += V x`.
    pub fn apply_add(&self, region: &Region, x: &[C64], out: &mut [C64]) -> Result<()> {
        let idx = self.indices(region)?;
        for (r, &i) in idx.iter().enumerate() {
            for (c, &j) in idx.iter().enumerate() {
                out[i] += self.vtilde[r][c] * x[j];
            }
        }
        Ok(())
    }

    pub fn add_to_dense(&self, region: &Region, m: &mut DenseMatrix) -> Result<()> {
        let idx = self.indices(region)?;
        for (r, &i) in idx.iter().enumerate() {
            for (c, &j) in idx.iter().enumerate() {
                m[(i, j)] += self.vtilde[r][c];
            }
        }
        Ok(())
    }
}

/// `(H - E0)^-1 delta_v`.
pub fn response(
    h: &MagneticHamiltonian,
    e0: f64,
    v: Site,
    cfg: &SolverConfig,
) -> Result<LatticeState> {
    let f = LatticeState::delta(h.region().clone(), v)?;
    let u = neumann_solve(h, e0, &f, cfg)?.state;
    let imag = u.at(v).map_or(0.0, |x| x.im.abs());
    if imag > REALNESS_TOL {
        return Err(Error::NonRealConstraint { imag });
    }
    Ok(u)
}

/// Minimal-norm Hermitian `Vt` with `Vt [u(v), u(w)] = [-1, 0]`.
pub fn build_defect(u: &LatticeState, v: Site, w: Site) -> Result<DefectSpec> {
    if !are_adjacent(v, w) {
        return Err(Error::NotAdjacent(v.to_string(), w.to_string()));
    }
    let get = |s: Site| u.at(s).ok_or_else(|| Error::SiteNotInRegion(s.to_string()));
    let (uv, uw) = (get(v)?, get(w)?);
    if uv.im.abs() > 1e-8 {
        return Err(Error::NonRealConstraint { imag: uv.im.abs() });
    }
    // a^dagger b must be real; u(v) is real up to rounding.
    let a = [C64::new(uv.re, 0.0), uw];
    let b = [C64::new(-1.0, 0.0), ZERO];
    let nsq = a[0].norm_sqr() + a[1].norm_sqr();
    if nsq == 0.0 {
        return Err(Error::ZeroBoundaryValues);
    }
    let adb = a[0].conj() * b[0] + a[1].conj() * b[1];
    let mut vt = [[ZERO; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            vt[i][j] = (b[i] * a[j].conj() + a[i] * b[j].conj()) / nsq
                - adb * a[i] * a[j].conj() / (nsq * nsq);
        }
    }
    DefectSpec::new(v, w, vt)
}

/// `det(I + Vt G)`, real for a Hermitian `Vt` and `G`.
pub fn secular_from_block(vtilde: &Mat2, g: &Mat2) -> Result<f64> {
    let n = identity_plus_product(vtilde, g);
    let det = crate::linalg::mat2_det(&n);
    if det.im.abs() > REALNESS_TOL {
        return Err(Error::ComplexDeterminant { imag: det.im.abs() });
    }
    Ok(det.re)
}

pub fn secular(
    h: &MagneticHamiltonian,
    energy: f64,
    spec: &DefectSpec,
    cfg: &SolverConfig,
) -> Result<f64> {
    let g = green_block(h, energy, spec.v, spec.w, cfg)?;
    secular_from_block(&spec.vtilde, &g.entries)
}

fn identity_plus_product(vtilde: &Mat2, g: &Mat2) -> Mat2 {
    let mut n = crate::linalg::mat2_mul(vtilde, g);
    n[0][0] += ONE;
    n[1][1] += ONE;
    n
}

#[derive(Debug, Clone)]
pub struct BoundState {
    pub energy: f64,
    /// Unit norm; global phase fixed so the amplitude at `v` (or `w` if that
    /// vanishes) is real and positive.
    pub state: LatticeState,
    /// `||(H + V - E) u|| / ||u||`.
    pub residual: f64,
    pub decay: DecayFit,
    pub secular: f64,
}

pub fn bound_state(
    h: &MagneticHamiltonian,
    spec: &DefectSpec,
    energy: f64,
    cfg: &SolverConfig,
) -> Result<BoundState> {
    let g = green_block(h, energy, spec.v, spec.w, cfg)?;
    bound_state_from_block(h, spec, &g)
}

/// Bound state from an already computed Green block at the root.
pub fn bound_state_from_block(
    h: &MagneticHamiltonian,
    spec: &DefectSpec,
    g: &GreenBlock,
) -> Result<BoundState> {
    let energy = g.energy;
    let value = secular_from_block(&spec.vtilde, &g.entries)?;
    if value.abs() > SECULAR_TOL {
        return Err(Error::SecularNotZero { energy, value });
    }
    // The kernel vector of I + Vt G is the forcing f = -V u on {v, w}.
    let n = identity_plus_product(&spec.vtilde, &g.entries);
    let nn = crate::linalg::mat2_mul(&crate::linalg::mat2_adjoint(&n), &n);
    let eig = hermitian_eigen(&crate::linalg::mat2_to_dense(&nn))?;
    let s_min = eig.values[0].max(0.0).sqrt();
    let s_max = eig.values[1].max(0.0).sqrt();
    if s_max < KERNEL_TOL {
        return Err(Error::DegenerateKernel { s_min, s_max });
    }
    let f = eig.vector(0);

    let [cv, cw] = &g.columns;
    let mut amps: Vec<C64> = cv
        .amplitudes()
        .iter()
        .zip(cw.amplitudes())
        .map(|(a, b)| f[0] * a + f[1] * b)
        .collect();
    let region = h.region();
    let anchor = [spec.v, spec.w]
        .into_iter()
        .filter_map(|s| region.lookup(s))
        .map(|i| amps[i])
        .find(|a| a.norm() > 1e-8)
        .unwrap_or(ONE);
    let scale = anchor.conj() / (anchor.norm() * crate::linalg::norm(&amps));
    for a in amps.iter_mut() {
        *a *= scale;
    }

    let mut r = shifted_apply(h, energy, &amps);
    spec.apply_add(region, &amps, &mut r)?;
    let residual = crate::linalg::norm(&r);
    let state = LatticeState::from_amplitudes(region.clone(), amps)?;
    let decay = decay_fit(&state, spec.v)?;
    Ok(BoundState {
        energy,
        state,
        residual,
        decay,
        secular: value,
    })
}

/// Output of the full construction at one `(phi, E0)`.
#[derive(Debug, Clone)]
pub struct DefectConstruction {
    pub response: LatticeState,
    pub spec: DefectSpec,
    pub bound: BoundState,
}

/// Response, defect matrix and verified bound state at `e0`.
pub fn construct_defect(
    h: &MagneticHamiltonian,
    e0: f64,
    v: Site,
    w: Site,
    cfg: &SolverConfig,
) -> Result<DefectConstruction> {
    let g = green_block(h, e0, v, w, cfg)?;
    let response = g.columns[0].clone();
    let imag = response.at(v).map_or(0.0, |x| x.im.abs());
    if imag > REALNESS_TOL {
        return Err(Error::NonRealConstraint { imag });
    }
    let spec = build_defect(&response, v, w)?;
    let bound = bound_state_from_block(h, &spec, &g)?;
    Ok(DefectConstruction {
        response,
        spec,
        bound,
    })
}

/// `|u|` on the three neighbours of `v`, in `neighbors` order.
pub fn neighbor_moduli(u: &LatticeState, v: Site) -> Result<[f64; 3]> {
    let nb = neighbors(v);
    let mut out = [0.0; 3];
    for (o, b) in out.iter_mut().zip(nb) {
        *o = u
            .at(b.site)
            .ok_or_else(|| Error::SiteNotInRegion(b.site.to_string()))?
            .norm();
    }
    Ok(out)
}

/// Spread of `|u|` over the neighbour orbit of `v`; zero for a rotation-symmetric response.
pub fn rotation_asymmetry(u: &LatticeState, v: Site) -> Result<f64> {
    let m = neighbor_moduli(u, v)?;
    let (lo, hi) = m.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &x| {
        (lo.min(x), hi.max(x))
    });
    Ok(hi - lo)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::{assemble_dense, Flux};
    use crate::lattice::rotate_about;
    use crate::spectral::count_eigenvalues_in;
    use std::sync::Arc;

    fn ham(phi: f64, region: Region) -> MagneticHamiltonian {
        MagneticHamiltonian::new(Flux::Real(phi), Arc::new(region))
    }

    fn close(a: &Mat2, b: &Mat2, tol: f64) -> bool {
        (0..2).all(|i| (0..2).all(|j| (a[i][j] - b[i][j]).norm() <= tol))
    }

    #[test]
    fn defect_for_a_one_sided_constraint() {
        let v = Site::a(0, 0);
        let w = Site::b(0, 0);
        let region = Arc::new(Region::ball(v, 2).unwrap());
        let mut u = LatticeState::zeros(region.clone());
        u.amplitudes_mut()[region.lookup(v).unwrap()] = C64::new(-0.4, 0.0);
        let spec = build_defect(&u, v, w).unwrap();
        let expected = [[C64::new(2.5, 0.0), ZERO], [ZERO, ZERO]];
        assert!(close(&spec.vtilde, &expected, 1e-15));
    }

    #[test]
    fn build_defect_errors() {
        let v = Site::a(0, 0);
        let region = Arc::new(Region::ball(v, 2).unwrap());
        let mut u = LatticeState::zeros(region.clone());
        assert_eq!(
            build_defect(&u, v, Site::b(0, 0)).unwrap_err(),
            Error::ZeroBoundaryValues
        );
        u.amplitudes_mut()[region.lookup(v).unwrap()] = C64::new(1.0, 0.1);
        assert!(matches!(
            build_defect(&u, v, Site::b(0, 0)),
            Err(Error::NonRealConstraint { .. })
        ));
        assert!(matches!(
            build_defect(&u, v, Site::a(1, 0)),
            Err(Error::NotAdjacent(..))
        ));
    }

    /// Every Hermitian solution of `X a = b` is `Vt + t P`, with `P` the
    /// projector onto the orthogonal complement of `a`.
    #[test]
    fn defect_is_the_minimal_norm_hermitian_solution() {
        let v = Site::a(0, 0);
        let w = Site::b(0, 1);
        let region = Arc::new(Region::ball(v, 1).unwrap());
        let mut u = LatticeState::zeros(region.clone());
        let a = [C64::new(0.7, 0.0), C64::new(-0.2, 0.5)];
        u.amplitudes_mut()[region.lookup(v).unwrap()] = a[0];
        u.amplitudes_mut()[region.lookup(w).unwrap()] = a[1];
        let spec = build_defect(&u, v, w).unwrap();
        let va = crate::linalg::mat2_vec(&spec.vtilde, a);
        assert!((va[0] + 1.0).norm() < 1e-12 && va[1].norm() < 1e-12);
        let perp = [-a[1].conj(), a[0].conj()];
        let pn = perp[0].norm_sqr() + perp[1].norm_sqr();
        let base = spec.norm();
        for t in [-2.0, -0.3, 0.01, 0.5, 4.0] {
            let mut x = spec.vtilde;
            for i in 0..2 {
                for j in 0..2 {
                    x[i][j] += perp[i] * perp[j].conj() * (t / pn);
                }
            }
            let xa = crate::linalg::mat2_vec(&x, a);
            assert!((xa[0] + 1.0).norm() < 1e-12 && xa[1].norm() < 1e-12);
            assert!(crate::linalg::mat2_frobenius(&x) > base);
        }
    }

    #[test]
    fn scaling_covariance() {
        let v = Site::a(0, 0);
        let w = Site::b(1, 0);
        let h = ham(0.7, Region::ball(v, 40).unwrap());
        let u = response(&h, 3.5, v, &SolverConfig::default()).unwrap();
        let spec = build_defect(&u, v, w).unwrap();
        for c in [2.0, -0.5, 13.0] {
            let scaled = build_defect(&u.scaled(C64::new(c, 0.0)), v, w).unwrap();
            assert!(close(&scaled.vtilde, &spec.scaled(1.0 / c).vtilde, 1e-12));
        }
    }

    #[test]
    fn large_energy_response() {
        let v = Site::a(0, 0);
        let h = ham(0.7, Region::ball(v, 5).unwrap());
        let u = response(&h, 1000.0, v, &SolverConfig::default()).unwrap();
        let mut expected = LatticeState::delta(h.region().clone(), v).unwrap();
        expected = expected.scaled(C64::new(-1e-3, 0.0));
        let diff: Vec<C64> = u
            .amplitudes()
            .iter()
            .zip(expected.amplitudes())
            .map(|(a, b)| a - b)
            .collect();
        assert!(crate::linalg::norm(&diff) < 1e-5);
    }

    #[test]
    fn construction_pipeline() {
        let v = Site::a(0, 0);
        let w = Site::b(0, 0);
        let h = ham(0.7, Region::ball(v, 40).unwrap());
        let cfg = SolverConfig::default();
        let c = construct_defect(&h, 3.5, v, w, &cfg).unwrap();
        let uv = c.response.at(v).unwrap();
        let uw = c.response.at(w).unwrap();
        let va = crate::linalg::mat2_vec(&c.spec.vtilde, [uv, uw]);
        assert!((va[0] + 1.0).norm() <= 1e-12 && va[1].norm() <= 1e-12);
        assert!(c.bound.residual <= 1e-8, "residual {}", c.bound.residual);
        assert!(c.bound.decay.gamma >= crate::resolvent::decay_threshold(3.5));
        assert!(secular(&h, 3.5, &c.spec, &cfg).unwrap().abs() <= 1e-9);
        assert!(rotation_asymmetry(&c.response, v).unwrap() <= 1e-8);
        // The kernel route reproduces the normalised response.
        let overlap =
            crate::linalg::dot(c.bound.state.amplitudes(), c.response.amplitudes()).norm();
        assert!((overlap - c.response.norm()).abs() <= 1e-8 * c.response.norm());
    }

    #[test]
    fn secular_is_real_and_tends_to_one() {
        let v = Site::a(0, 0);
        let w = Site::b(0, 1);
        let h = ham(1.3, Region::ball(v, 40).unwrap());
        let cfg = SolverConfig::default();
        let spec = construct_defect(&h, 4.0, v, w, &cfg).unwrap().spec;
        for e in [3.5, 4.0, 6.0, 10.0, -3.7] {
            assert!(secular(&h, e, &spec, &cfg).is_ok());
        }
        let zero = DefectSpec::new(v, w, [[ZERO; 2]; 2]).unwrap();
        assert_eq!(secular(&h, 5.0, &zero, &cfg).unwrap(), 1.0);
        assert!((secular(&h, 100.0, &spec, &cfg).unwrap() - 1.0).abs() <= 0.05 * spec.norm());
    }

    #[test]
    fn bound_state_rejects_non_roots_and_degenerate_defects() {
        let v = Site::a(0, 0);
        let w = Site::b(0, 0);
        let h = ham(0.7, Region::ball(v, 40).unwrap());
        let cfg = SolverConfig::default();
        let spec = construct_defect(&h, 3.5, v, w, &cfg).unwrap().spec;
        assert!(matches!(
            bound_state(&h, &spec, 4.0, &cfg),
            Err(Error::SecularNotZero { .. })
        ));
        assert!(DefectSpec::new(Site::b(0, 0), v, spec.vtilde).is_err());
    }

    #[test]
    fn isolated_eigenvalue_of_the_dense_perturbed_operator() {
        let v = Site::a(0, 0);
        let w = Site::b(0, 0);
        let spec = construct_defect(
            &ham(0.7, Region::ball(v, 40).unwrap()),
            3.5,
            v,
            w,
            &SolverConfig::default(),
        )
        .unwrap()
        .spec;
        let region = Arc::new(Region::cube(10).unwrap());
        let mut m = assemble_dense(Flux::Real(0.7), &region).unwrap().to_dense();
        spec.add_to_dense(&region, &mut m).unwrap();
        assert_eq!(count_eigenvalues_in(&m, 3.45, 3.55).unwrap(), 1);
    }

    #[test]
    fn neighbor_orbit_is_rotation_symmetric() {
        for (phi, e0) in [(0.0, 3.3), (0.7, 3.5), (2.1, -4.0), (4.0, 5.0)] {
            let v = Site::a(3, -2);
            let h = ham(phi, Region::ball(v, 30).unwrap());
            let u = response(&h, e0, v, &SolverConfig::default()).unwrap();
            assert!(
                rotation_asymmetry(&u, v).unwrap() <= 1e-8,
                "phi={phi} E={e0}"
            );
        }
    }

    /// On a rotation-invariant ball, `R H R^-1` differs from `H` by a
    /// diagonal gauge: solve for the phases along a spanning tree and check
    /// every edge.
    #[test]
    fn rotation_is_a_gauge_change() {
        let c = Site::a(1, 2);
        let region = Arc::new(Region::ball(c, 7).unwrap());
        let h = assemble_dense(Flux::Real(0.9), &region).unwrap().to_dense();
        let n = region.len();
        let perm: Vec<usize> = region
            .sites()
            .iter()
            .map(|&s| region.lookup(rotate_about(c, s).unwrap()).unwrap())
            .collect();
        // (R H R^-1)[R x, R y] = H[x, y].
        let mut rotated = DenseMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                rotated[(perm[i], perm[j])] = h[(i, j)];
            }
        }
        let dist = region.hop_distances(c).unwrap();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by_key(|&i| dist[i]);
        let mut theta = vec![f64::NAN; n];
        theta[order[0]] = 0.0;
        for &i in &order[1..] {
            let j = (0..n)
                .find(|&j| !theta[j].is_nan() && h[(i, j)].norm() > 0.5)
                .unwrap();
            theta[i] = theta[j] + (rotated[(i, j)] / h[(i, j)]).arg();
        }
        for i in 0..n {
            for j in 0..n {
                let g = h[(i, j)] * C64::from_polar(1.0, theta[i] - theta[j]);
                assert!((g - rotated[(i, j)]).norm() <= 1e-12);
            }
        }
    }
}
