//! A fast self-check of the core invariants, run by `magnon verify`.

use std::sync::Arc;

use crate::bilayer::{apply_bilayer, hybridize, reference_coupling, BilayerState};
use crate::curve::{track_curve, TrackSettings};
use crate::defect::{construct_defect, rotation_asymmetry, DefectSpec};
use crate::error::Result;
use crate::hamiltonian::{
    assemble_dense, gauge_transform, torus_hamiltonian, Flux, LatticeState, MagneticHamiltonian,
};
use crate::lattice::{bond_phase, Region, Site};
use crate::linalg::{norm, C64};
use crate::resolvent::{decay_threshold, neumann_solve, SolverConfig};
use crate::spectral::{band_structure, hermitian_eigenvalues};

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

type CheckFn = fn() -> Result<(bool, String)>;

const CHECKS: [(&str, CheckFn); 9] = [
    ("face flux", face_flux),
    ("hermiticity", hermiticity),
    ("bloch vs torus", bloch_vs_torus),
    ("chiral symmetry", chiral_symmetry),
    ("gauge invariance", gauge_invariance),
    ("neumann vs dense", neumann_vs_dense),
    ("defect construction", defect_construction),
    ("hybrid invariance", hybrid_invariance),
    ("curve continuation", curve_continuation),
];

pub fn run_all() -> Vec<Check> {
    CHECKS
        .iter()
        .map(|(name, f)| match f() {
            Ok((passed, detail)) => Check {
                name,
                passed,
                detail,
            },
            Err(e) => Check {
                name,
                passed: false,
                detail: e.to_string(),
            },
        })
        .collect()
}

fn face_flux() -> Result<(bool, String)> {
    let mut worst = 0i64;
    for n1 in -3..=3 {
        for n2 in -3..=3 {
            let face = [
                Site::a(n1, n2),
                Site::b(n1 + 1, n2),
                Site::a(n1 + 1, n2),
                Site::b(n1 + 1, n2 + 1),
                Site::a(n1, n2 + 1),
                Site::b(n1, n2 + 1),
            ];
            let sum: i64 = (0..6)
                .map(|i| bond_phase(face[i], face[(i + 1) % 6]).unwrap_or(i64::MAX / 8))
                .sum();
            worst = worst.max((sum + 1).abs());
        }
    }
    Ok((worst == 0, format!("max |sum + 1| = {worst}")))
}

fn hermiticity() -> Result<(bool, String)> {
    let region = Arc::new(Region::ball(Site::a(2, -1), 8)?);
    let d = assemble_dense(Flux::Real(1.234), &region)?.hermitian_deviation();
    Ok((d <= 1e-14, format!("deviation {d:.3e}")))
}

fn bloch_vs_torus() -> Result<(bool, String)> {
    let flux = Flux::rational(2, 5)?;
    let bands = band_structure(flux, 12, 12)?;
    let torus = hermitian_eigenvalues(&torus_hamiltonian(15, 6, flux)?.to_dense())?;
    let outside = torus.iter().filter(|&&e| !bands.contains(e, 1e-8)).count();
    Ok((
        outside == 0,
        format!("{outside} torus eigenvalues outside the 2/5 bands"),
    ))
}

fn chiral_symmetry() -> Result<(bool, String)> {
    let bands = band_structure(Flux::rational(1, 3)?, 12, 12)?;
    let n = bands.bands.len();
    let worst = (0..n)
        .map(|b| (bands.bands[b].emin + bands.bands[n - 1 - b].emax).abs())
        .fold(0.0, f64::max);
    Ok((worst <= 1e-10, format!("max asymmetry {worst:.3e}")))
}

fn gauge_invariance() -> Result<(bool, String)> {
    let h = torus_hamiltonian(6, 4, Flux::rational(1, 3)?)?;
    let angles: Vec<f64> = (0..h.dim()).map(|i| (i as f64 * 0.7).sin() * 3.0).collect();
    let a = hermitian_eigenvalues(&h.to_dense())?;
    let b = hermitian_eigenvalues(&gauge_transform(&h, &angles)?.to_dense())?;
    let worst = a
        .iter()
        .zip(&b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    Ok((worst <= 1e-10, format!("max eigenvalue shift {worst:.3e}")))
}

fn neumann_vs_dense() -> Result<(bool, String)> {
    let region = Arc::new(Region::cube(6)?);
    let h = MagneticHamiltonian::new(Flux::Real(0.9), region.clone());
    let mut f = LatticeState::zeros(region.clone());
    for (i, a) in f.amplitudes_mut().iter_mut().enumerate().take(40) {
        *a = C64::new((i as f64).cos(), (i as f64 * 0.3).sin());
    }
    let sol = neumann_solve(&h, 4.0, &f, &SolverConfig::default())?;
    let exact = assemble_dense(h.flux(), &region)?
        .to_dense()
        .shifted(-4.0)
        .solve(f.amplitudes())?;
    let diff: Vec<C64> = exact
        .iter()
        .zip(sol.state.amplitudes())
        .map(|(a, b)| a - b)
        .collect();
    let rel = norm(&diff) / norm(&exact);
    let ok = rel <= 1e-9 && sol.max_term_ratio <= 0.75 + 1e-12;
    Ok((
        ok,
        format!(
            "relative error {rel:.3e}, term ratio {:.4}",
            sol.max_term_ratio
        ),
    ))
}

fn defect_construction() -> Result<(bool, String)> {
    let v = Site::a(0, 0);
    let h = MagneticHamiltonian::new(Flux::Real(0.7), Arc::new(Region::ball(v, 40)?));
    let c = construct_defect(&h, 3.5, v, Site::b(0, 0), &SolverConfig::default())?;
    let asym = rotation_asymmetry(&c.response, v)?;
    let ok =
        c.bound.residual <= 1e-8 && c.bound.decay.gamma >= decay_threshold(3.5) && asym <= 1e-8;
    Ok((
        ok,
        format!(
            "residual {:.3e}, gamma {:.4}, orbit spread {asym:.3e}",
            c.bound.residual, c.bound.decay.gamma
        ),
    ))
}

fn hybrid_invariance() -> Result<(bool, String)> {
    let (k, m) = reference_coupling();
    let pair = hybridize(k, m)?;
    let v = Site::a(0, 0);
    let region = Arc::new(Region::ball(v, 6)?);
    let h = MagneticHamiltonian::new(Flux::Real(2.0), region.clone());
    let spec = DefectSpec::new(
        v,
        Site::b(0, 0),
        [
            [C64::new(0.3, 0.0), C64::new(0.1, 0.2)],
            [C64::new(0.1, -0.2), C64::new(-1.0, 0.0)],
        ],
    )?;
    let amps = (0..region.len())
        .map(|i| C64::new((i as f64 * 1.3).sin(), (i as f64 * 0.4).cos()))
        .collect();
    let u = LatticeState::from_amplitudes(region, amps)?;
    let out = apply_bilayer(
        &h,
        &k,
        &m,
        Some(&spec),
        &BilayerState::from_hybrid(pair.xi[0], &u),
    )?;
    let leak = out.project(pair.xi[1]).norm() / u.norm();
    Ok((leak <= 1e-12, format!("relative hybrid-2 leak {leak:.3e}")))
}

fn curve_continuation() -> Result<(bool, String)> {
    let v = Site::a(0, 0);
    let region = Arc::new(Region::ball(v, 40)?);
    let cfg = SolverConfig::default();
    let h = MagneticHamiltonian::new(Flux::Real(0.0), region.clone());
    let spec = construct_defect(&h, 3.5, v, Site::b(0, 0), &cfg)?.spec;
    let curve = track_curve(
        &spec,
        0.0,
        1.0,
        (0.0, 0.5),
        5,
        3.5,
        region,
        &cfg,
        &TrackSettings::default(),
    )?;
    let ok = curve.max_state_residual() <= 1e-8 && curve.decay_margin() >= 0.0;
    let end = curve.samples.last().map_or(f64::NAN, |s| s.energy);
    Ok((
        ok,
        format!(
            "E(0.5) = {end:.10}, max residual {:.3e}",
            curve.max_state_residual()
        ),
    ))
}
