//! Resolvent of `H_phi` outside `[-3, 3]`.
//!
//! `(H - E) u = f` is solved by the lattice-side Neumann series
//! `u = -E^-1 sum_l (H / E)^l f`, which converges geometrically with ratio at
//! most `3 / |E|`. After `N` terms the residual is exactly the next term,
//! `(H - E) u_N - f = -(H / E)^N f`.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::hamiltonian::{LatticeState, MagneticHamiltonian};
use crate::lattice::{are_adjacent, Region, Site};
use crate::linalg::{Mat2, C64, ZERO};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    /// Stop once the next term is below `tol * ||u||`.
    pub tol: f64,
    pub max_terms: usize,
    /// Largest admissible truncation estimate `r^-d` for Green blocks, with
    /// `r = (|E| - 1) / 2` and `d` the hop distance to the region exterior.
    pub truncation_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tol: 1e-12,
            max_terms: 1_000_000,
            truncation_tol: 1e-3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct NeumannSolution {
    pub state: LatticeState,
    pub iterations: usize,
    /// Largest observed `||t_{l+1}|| / ||t_l||`.
    pub max_term_ratio: f64,
    /// `||(H - E) u - f||`.
    pub residual: f64,
}

/// Sums the Neumann series for `(H - E) u = f`.
pub fn neumann_solve(
    h: &MagneticHamiltonian,
    energy: f64,
    f: &LatticeState,
    cfg: &SolverConfig,
) -> Result<NeumannSolution> {
    if energy.abs() <= 3.0 || !energy.is_finite() {
        return Err(Error::OutsideConvergenceRegion { energy });
    }
    if f.region().len() != h.region().len() {
        return Err(Error::InvalidParameter(
            "forcing lives on a different region".into(),
        ));
    }
    let n = f.amplitudes().len();
    let inv_e = 1.0 / energy;
    let mut term = f.amplitudes().to_vec();
    let mut next = vec![ZERO; n];
    let mut sum = term.clone();
    let mut term_norm = crate::linalg::norm(&term);
    let mut max_ratio = 0.0f64;
    let mut iterations = 0;

    if term_norm > 0.0 {
        loop {
            if iterations >= cfg.max_terms {
                return Err(Error::IterationCapExceeded { cap: cfg.max_terms });
            }
            h.apply_into(&term, &mut next);
            for x in next.iter_mut() {
                *x *= inv_e;
            }
            std::mem::swap(&mut term, &mut next);
            iterations += 1;
            let new_norm = crate::linalg::norm(&term);
            max_ratio = max_ratio.max(new_norm / term_norm);
            term_norm = new_norm;
            if term_norm < cfg.tol * crate::linalg::norm(&sum) {
                break;
            }
            for (s, t) in sum.iter_mut().zip(&term) {
                *s += t;
            }
        }
    }
    let amps = sum.into_iter().map(|s| -s * inv_e).collect();
    Ok(NeumannSolution {
        state: LatticeState::from_amplitudes(f.region().clone(), amps)?,
        iterations,
        max_term_ratio: max_ratio,
        residual: term_norm,
    })
}

/// The 2x2 resolvent block on an adjacent pair `(v, w)`, together with the
/// full responses to unit sources at `v` and `w`.
#[derive(Debug, Clone)]
pub struct GreenBlock {
    pub v: Site,
    pub w: Site,
    pub energy: f64,
    /// `entries[x][y] = <delta_x, (H - E)^-1 delta_y>` with `x, y` in `(v, w)`.
    pub entries: Mat2,
    pub columns: [LatticeState; 2],
}

impl GreenBlock {
    pub fn hermitian_deviation(&self) -> f64 {
        crate::linalg::mat2_hermitian_deviation(&self.entries)
    }
}

/// `r^-d` for the truncation of a solve at `energy` around `sites`.
pub fn truncation_estimate(region: &Region, energy: f64, sites: &[Site]) -> Result<(f64, usize)> {
    let r = (energy.abs() - 1.0) / 2.0;
    let mut d = usize::MAX;
    for &s in sites {
        d = d.min(region.distance_to_exterior(s)?);
    }
    Ok((r.powi(-(d as i32)).min(1.0), d))
}

pub fn green_block(
    h: &MagneticHamiltonian,
    energy: f64,
    v: Site,
    w: Site,
    cfg: &SolverConfig,
) -> Result<GreenBlock> {
    if energy.abs() <= 3.0 {
        return Err(Error::OutsideConvergenceRegion { energy });
    }
    if !are_adjacent(v, w) {
        return Err(Error::NotAdjacent(v.to_string(), w.to_string()));
    }
    let region: &Arc<Region> = h.region();
    let (estimate, distance) = truncation_estimate(region, energy, &[v, w])?;
    if estimate > cfg.truncation_tol {
        return Err(Error::RegionTooSmall {
            estimate,
            tol: cfg.truncation_tol,
            distance,
        });
    }
    let dv = LatticeState::delta(region.clone(), v)?;
    let dw = LatticeState::delta(region.clone(), w)?;
    let (cv, cw) = rayon::join(
        || neumann_solve(h, energy, &dv, cfg),
        || neumann_solve(h, energy, &dw, cfg),
    );
    let (cv, cw) = (cv?.state, cw?.state);
    let at = |s: &LatticeState, x: Site| s.at(x).unwrap_or(ZERO);
    let entries = [[at(&cv, v), at(&cw, v)], [at(&cv, w), at(&cw, w)]];
    Ok(GreenBlock {
        v,
        w,
        energy,
        entries,
        columns: [cv, cw],
    })
}

/// Exponential fit `max_{d(n) = k} |u(n)| ~ C e^{-gamma k}` over hop shells.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayFit {
    pub gamma: f64,
    pub prefactor: f64,
    /// Root-mean-square residual of the log-linear fit.
    pub residual: f64,
    pub shells: usize,
}

pub const DECAY_FLOOR: f64 = 1e-14;

/// Least-squares fit of log shell maxima against hop distance from `center`.
pub fn decay_fit(u: &LatticeState, center: Site) -> Result<DecayFit> {
    let dist = u.region().hop_distances(center)?;
    let max_d = dist.iter().flatten().copied().max().unwrap_or(0);
    let mut shell_max = vec![0.0f64; max_d + 1];
    for (d, a) in dist.iter().zip(u.amplitudes()) {
        if let Some(d) = d {
            shell_max[*d] = shell_max[*d].max(a.norm());
        }
    }
    if shell_max.iter().all(|&m| m == 0.0) {
        return Err(Error::InvalidParameter("decay fit of a zero state".into()));
    }
    let points: Vec<(f64, f64)> = shell_max
        .iter()
        .enumerate()
        .filter(|(_, &m)| m > DECAY_FLOOR)
        .map(|(d, &m)| (d as f64, m.ln()))
        .collect();
    if points.len() < 3 {
        return Err(Error::InvalidParameter(format!(
            "decay fit needs 3 shells above {DECAY_FLOOR:e}, found {}",
            points.len()
        )));
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = (points
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    Ok(DecayFit {
        gamma: -slope,
        prefactor: intercept.exp(),
        residual,
        shells: points.len(),
    })
}

/// Lower bound on the decay rate implied by `|E| > 1 + 2r`, shrunk by `0.9`.
pub fn decay_threshold(energy: f64) -> f64 {
    0.9 * ((energy.abs() - 1.0) / 2.0).ln()
}

/// `(H - E) u` for a state, used for residual checks.
pub fn shifted_apply(h: &MagneticHamiltonian, energy: f64, u: &[C64]) -> Vec<C64> {
    let mut out = vec![ZERO; u.len()];
    h.apply_into(u, &mut out);
    for (o, x) in out.iter_mut().zip(u) {
        *o -= x * energy;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::{assemble_dense, Flux};
    use crate::linalg::norm;
    use rand::{Rng, SeedableRng};

    fn setup(flux: Flux, region: Region) -> MagneticHamiltonian {
        MagneticHamiltonian::new(flux, Arc::new(region))
    }

    fn local_forcing(region: &Arc<Region>, rng: &mut impl Rng, radius: i64) -> LatticeState {
        let mut f = LatticeState::zeros(region.clone());
        for (i, s) in region.sites().iter().enumerate() {
            if s.n1.abs() <= radius && s.n2.abs() <= radius {
                f.amplitudes_mut()[i] =
                    C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            }
        }
        f
    }

    #[test]
    fn large_energy_is_asymptotic_to_minus_inverse() {
        let v = Site::a(0, 0);
        let h = setup(Flux::Real(0.7), Region::ball(v, 6).unwrap());
        let f = LatticeState::delta(h.region().clone(), v).unwrap();
        let sol = neumann_solve(&h, 1000.0, &f, &SolverConfig::default()).unwrap();
        assert!((sol.state.at(v).unwrap() - C64::new(-1e-3, 0.0)).norm() < 1e-5);
    }

    #[test]
    fn rejects_energies_inside_the_norm_bound() {
        let h = setup(Flux::Real(0.0), Region::cube(2).unwrap());
        let f = LatticeState::zeros(h.region().clone());
        for e in [2.5, -3.0, 0.0] {
            assert!(matches!(
                neumann_solve(&h, e, &f, &SolverConfig::default()),
                Err(Error::OutsideConvergenceRegion { .. })
            ));
        }
    }

    #[test]
    fn iteration_cap() {
        let h = setup(Flux::Real(0.0), Region::cube(4).unwrap());
        let f = LatticeState::delta(h.region().clone(), Site::a(0, 0)).unwrap();
        let cfg = SolverConfig {
            max_terms: 3,
            ..SolverConfig::default()
        };
        assert_eq!(
            neumann_solve(&h, 3.1, &f, &cfg).unwrap_err(),
            Error::IterationCapExceeded { cap: 3 }
        );
    }

    #[test]
    fn matches_dense_solve_and_residual_bound() {
        let h = setup(Flux::Real(1.1), Region::cube(8).unwrap());
        let dense = assemble_dense(h.flux(), h.region()).unwrap().to_dense();
        let mut rng = rand::rngs::StdRng::seed_from_u64(2);
        let cfg = SolverConfig::default();
        for e in [4.0, -3.6] {
            let lu = dense.shifted(-e).lu().unwrap();
            for _ in 0..3 {
                let f = local_forcing(h.region(), &mut rng, 2);
                let sol = neumann_solve(&h, e, &f, &cfg).unwrap();
                let exact = lu.solve(f.amplitudes());
                let diff: Vec<C64> = exact
                    .iter()
                    .zip(sol.state.amplitudes())
                    .map(|(a, b)| a - b)
                    .collect();
                assert!(norm(&diff) <= 1e-9 * norm(&exact));
                assert!(sol.max_term_ratio <= 3.0 / e.abs() + 1e-12);
                let r = shifted_apply(&h, e, sol.state.amplitudes());
                let res: Vec<C64> = r.iter().zip(f.amplitudes()).map(|(a, b)| a - b).collect();
                let bound = 3.0 * cfg.tol * f.norm() / (1.0 - 3.0 / e.abs());
                assert!(norm(&res) <= bound + 1e-14, "{} > {bound}", norm(&res));
                assert!((norm(&res) - sol.residual).abs() <= 1e-13);
            }
        }
    }

    #[test]
    fn green_block_is_hermitian_with_real_diagonal() {
        let v = Site::a(0, 0);
        let w = Site::b(0, 1);
        let h = setup(Flux::Real(0.9), Region::ball(v, 25).unwrap());
        for e in [3.8, 5.0, -4.5, 10.0] {
            let g = green_block(&h, e, v, w, &SolverConfig::default()).unwrap();
            assert!(g.hermitian_deviation() <= 1e-10);
            assert!(g.entries[0][0].im.abs() <= 1e-10 && g.entries[1][1].im.abs() <= 1e-10);
        }
    }

    #[test]
    fn green_block_matches_dense_inverse() {
        let v = Site::a(0, 0);
        let w = Site::b(0, 0);
        let h = setup(Flux::Real(0.0), Region::ball(v, 30).unwrap());
        let g = green_block(&h, 10.0, v, w, &SolverConfig::default()).unwrap();
        let dense = assemble_dense(h.flux(), h.region()).unwrap().to_dense();
        let idx = h.region().lookup(v).unwrap();
        let mut e = vec![ZERO; dense.rows()];
        e[idx] = C64::new(1.0, 0.0);
        let col = dense.shifted(-10.0).solve(&e).unwrap();
        assert!((col[idx] - g.entries[0][0]).norm() <= 1e-9);
    }

    #[test]
    fn green_block_preconditions() {
        let v = Site::a(0, 0);
        let h = setup(Flux::Real(0.0), Region::ball(v, 5).unwrap());
        let cfg = SolverConfig::default();
        assert!(matches!(
            green_block(&h, 10.0, v, Site::b(2, 2), &cfg),
            Err(Error::NotAdjacent(..))
        ));
        assert!(matches!(
            green_block(&h, 3.5, v, Site::b(0, 0), &cfg),
            Err(Error::RegionTooSmall { .. })
        ));
        assert!(matches!(
            green_block(&h, 2.0, v, Site::b(0, 0), &cfg),
            Err(Error::OutsideConvergenceRegion { .. })
        ));
    }

    #[test]
    fn green_block_is_stable_under_enlargement() {
        let v = Site::a(0, 0);
        let w = Site::b(1, 0);
        let cfg = SolverConfig {
            truncation_tol: 1e-8,
            ..SolverConfig::default()
        };
        let e = 6.0;
        let n = crate::hamiltonian::recommended_radius(e, cfg.truncation_tol).unwrap();
        let small = green_block(
            &setup(Flux::Real(0.4), Region::ball(v, n).unwrap()),
            e,
            v,
            w,
            &cfg,
        )
        .unwrap();
        let large = green_block(
            &setup(Flux::Real(0.4), Region::ball(v, n + 5).unwrap()),
            e,
            v,
            w,
            &cfg,
        )
        .unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert!((small.entries[i][j] - large.entries[i][j]).norm() <= 1e-8);
            }
        }
    }

    /// `d/dE <v, (H - E)^-1 v> = ||(H - E)^-1 v||^2 > 0`.
    #[test]
    fn diagonal_green_function_increases_above_the_band() {
        let v = Site::a(0, 0);
        let h = setup(Flux::Real(1.7), Region::ball(v, 40).unwrap());
        let cfg = SolverConfig::default();
        let mut prev = f64::NEG_INFINITY;
        for k in 0..12 {
            let e = 3.6 + 0.5 * k as f64;
            let g = green_block(&h, e, v, Site::b(0, 0), &cfg).unwrap().entries[0][0].re;
            assert!(g > prev, "G_vv({e}) = {g} not above {prev}");
            prev = g;
        }
    }

    #[test]
    fn decay_fit_on_synthetic_states() {
        let c = Site::a(0, 0);
        let region = Arc::new(Region::ball(c, 12).unwrap());
        let dist = region.hop_distances(c).unwrap();
        let exp: Vec<C64> = dist
            .iter()
            .map(|d| C64::new((-(d.unwrap() as f64)).exp(), 0.0))
            .collect();
        let fit = decay_fit(
            &LatticeState::from_amplitudes(region.clone(), exp).unwrap(),
            c,
        )
        .unwrap();
        assert!((fit.gamma - 1.0).abs() < 1e-6 && (fit.prefactor - 1.0).abs() < 1e-6);
        let flat = vec![C64::new(0.3, 0.4); region.len()];
        let fit = decay_fit(
            &LatticeState::from_amplitudes(region.clone(), flat).unwrap(),
            c,
        )
        .unwrap();
        assert!(fit.gamma.abs() < 1e-6);
        let delta = LatticeState::delta(region.clone(), c).unwrap();
        assert!(decay_fit(&delta, c).is_err());
        assert!(decay_fit(&LatticeState::zeros(region), c).is_err());
    }

    #[test]
    fn response_decays_at_least_at_the_annulus_rate() {
        let v = Site::a(0, 0);
        let h = setup(Flux::Real(0.3), Region::ball(v, 40).unwrap());
        for e in [3.5, 4.0, -5.0] {
            let f = LatticeState::delta(h.region().clone(), v).unwrap();
            let u = neumann_solve(&h, e, &f, &SolverConfig::default())
                .unwrap()
                .state;
            let fit = decay_fit(&u, v).unwrap();
            assert!(
                fit.gamma >= decay_threshold(e),
                "E={e}: gamma {}",
                fit.gamma
            );
        }
    }
}
