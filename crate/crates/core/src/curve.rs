//! Continuation of the defect energy `E_phi` in the flux.
//!
//! For a fixed defect, the eigenvalue of `H_phi + kappa_1 + mu_1 V` outside
//! the shifted band is a real-analytic function of `phi`. It is tracked as
//! the zero of `E -> det(I + mu_1 Vt G_phi(E - kappa_1))` nearest the
//! previous value, bracketed by a sign change and refined with Brent's method.

use std::collections::HashMap;
use std::sync::Arc;

use crate::defect::{bound_state_from_block, secular_from_block, DefectSpec};
use crate::error::{Error, Result};
use crate::hamiltonian::{Flux, MagneticHamiltonian};
use crate::lattice::Region;
use crate::resolvent::{decay_threshold, green_block, GreenBlock, SolverConfig};
use crate::spectral::{nearest_farey, BandData};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackSettings {
    /// Half-width of the bracketing window around the previous energy.
    pub window: f64,
    pub max_halvings: u32,
    /// Required distance from the channel-1 band edge `kappa_1 +- 3`.
    pub margin: f64,
    pub root_tol: f64,
    pub seed_tol: f64,
}

impl Default for TrackSettings {
    fn default() -> Self {
        TrackSettings {
            window: 0.2,
            max_halvings: 10,
            margin: 0.1,
            root_tol: 1e-12,
            seed_tol: 1e-9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveSample {
    pub phi: f64,
    pub energy: f64,
    pub secular_residual: f64,
    pub state_residual: f64,
    pub gamma: f64,
    /// Set by [`flag_embedded`].
    pub embedded: bool,
}

#[derive(Debug, Clone)]
pub struct EnergyCurve {
    pub spec: DefectSpec,
    pub kappa1: f64,
    pub mu1: f64,
    pub region: Arc<Region>,
    pub samples: Vec<CurveSample>,
}

impl EnergyCurve {
    /// Smallest `gamma - 0.9 ln((|E - kappa_1| - 1) / 2)` over the samples.
    pub fn decay_margin(&self) -> f64 {
        self.samples
            .iter()
            .map(|s| s.gamma - decay_threshold(s.energy - self.kappa1))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn max_state_residual(&self) -> f64 {
        self.samples
            .iter()
            .map(|s| s.state_residual)
            .fold(0.0, f64::max)
    }

    pub fn max_secular_residual(&self) -> f64 {
        self.samples
            .iter()
            .map(|s| s.secular_residual)
            .fold(0.0, f64::max)
    }
}

/// Channel-1 secular function at one flux.
struct Channel<'a> {
    h: MagneticHamiltonian,
    spec: DefectSpec,
    kappa1: f64,
    cfg: &'a SolverConfig,
    blocks: Vec<GreenBlock>,
}

impl<'a> Channel<'a> {
    fn new(
        phi: f64,
        region: &Arc<Region>,
        spec: DefectSpec,
        kappa1: f64,
        cfg: &'a SolverConfig,
    ) -> Self {
        Channel {
            h: MagneticHamiltonian::new(Flux::Real(phi), region.clone()),
            spec,
            kappa1,
            cfg,
            blocks: Vec::new(),
        }
    }

    fn eval(&mut self, energy: f64) -> Result<f64> {
        let g = green_block(
            &self.h,
            energy - self.kappa1,
            self.spec.v,
            self.spec.w,
            self.cfg,
        )?;
        let value = secular_from_block(&self.spec.vtilde, &g.entries)?;
        self.blocks.push(g);
        Ok(value)
    }

    fn block_at(&self, energy: f64) -> Option<&GreenBlock> {
        self.blocks
            .iter()
            .rev()
            .find(|g| g.energy == energy - self.kappa1)
    }

    fn sample(&mut self, phi: f64, energy: f64) -> Result<CurveSample> {
        if self.block_at(energy).is_none() {
            self.eval(energy)?;
        }
        let g = self.block_at(energy).expect("evaluated");
        let bound = bound_state_from_block(&self.h, &self.spec, g)?;
        Ok(CurveSample {
            phi,
            energy,
            secular_residual: bound.secular.abs(),
            state_residual: bound.residual,
            gamma: bound.decay.gamma,
            embedded: false,
        })
    }
}

/// Brent's method on a bracket `[a, b]` with `f(a) f(b) <= 0`.
pub fn brent<F: FnMut(f64) -> Result<f64>>(
    mut f: F,
    mut a: f64,
    mut b: f64,
    mut fa: f64,
    mut fb: f64,
    tol: f64,
) -> Result<f64> {
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::InvalidParameter(
            "brent: endpoints do not bracket a root".into(),
        ));
    }
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    for _ in 0..200 {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = 2.0 * f64::EPSILON * b.abs() + 0.5 * tol;
        let xm = 0.5 * (c - b);
        if xm.abs() <= tol1 || fb == 0.0 {
            return Ok(b);
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                let qa = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * xm * qa * (qa - r) - (b - a) * (r - 1.0));
                q = (qa - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            if 2.0 * p < (3.0 * xm * q - (tol1 * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol1 { d } else { tol1.copysign(xm) };
        fb = f(b)?;
    }
    Ok(b)
}

enum StepFailure {
    NoBracket { clipped: bool },
    Error(Error),
}

/// Root of the channel secular function near `predicted`, inside the
/// window around `previous` and outside the margin band.
fn find_root(
    ch: &mut Channel,
    previous: f64,
    predicted: f64,
    s: &TrackSettings,
) -> std::result::Result<f64, StepFailure> {
    let edge = 3.0 + s.margin;
    let (mut lo, mut hi) = (previous - s.window, previous + s.window);
    let mut clipped = false;
    if previous > ch.kappa1 && lo < ch.kappa1 + edge {
        lo = ch.kappa1 + edge;
        clipped = true;
    }
    if previous < ch.kappa1 && hi > ch.kappa1 - edge {
        hi = ch.kappa1 - edge;
        clipped = true;
    }
    if lo >= hi {
        return Err(StepFailure::NoBracket { clipped });
    }
    let x0 = predicted.clamp(lo, hi);
    let mut eval = |x: f64| ch.eval(x).map_err(StepFailure::Error);
    let f0 = eval(x0)?;
    if f0 == 0.0 {
        return Ok(x0);
    }
    // Expand geometrically on both sides of the predictor.
    let (mut left, mut right) = ((x0, f0), (x0, f0));
    let mut delta = 1e-3;
    loop {
        let mut moved = false;
        for side in [1.0, -1.0] {
            let last = if side > 0.0 { right } else { left };
            let x = (x0 + side * delta).clamp(lo, hi);
            if x == last.0 {
                continue;
            }
            moved = true;
            let fx = eval(x)?;
            if fx.signum() != last.1.signum() || fx == 0.0 {
                let (a, fa, b, fb) = if side > 0.0 {
                    (last.0, last.1, x, fx)
                } else {
                    (x, fx, last.0, last.1)
                };
                return brent(|e| ch.eval(e), a, b, fa, fb, s.root_tol).map_err(StepFailure::Error);
            }
            if side > 0.0 {
                right = (x, fx);
            } else {
                left = (x, fx);
            }
        }
        if !moved {
            return Err(StepFailure::NoBracket { clipped });
        }
        delta *= 2.0;
    }
}

/// Tracks the root of `E -> secular(phi, E - kappa_1, mu_1 spec)` from
/// `(phi_a, e_seed)` to `phi_b`, recording `steps + 1` uniform samples.
#[allow(clippy::too_many_arguments)]
pub fn track_curve(
    spec: &DefectSpec,
    kappa1: f64,
    mu1: f64,
    phi_range: (f64, f64),
    steps: usize,
    e_seed: f64,
    region: Arc<Region>,
    cfg: &SolverConfig,
    settings: &TrackSettings,
) -> Result<EnergyCurve> {
    if steps == 0 {
        return Err(Error::InvalidParameter(
            "curve needs at least one step".into(),
        ));
    }
    if (e_seed - kappa1).abs() <= 3.0 + settings.margin {
        return Err(Error::CurveAtBandEdge {
            phi: phi_range.0,
            energy: e_seed,
        });
    }
    let scaled = spec.scaled(mu1);
    let (phi_a, phi_b) = phi_range;
    let dphi = (phi_b - phi_a) / steps as f64;

    let mut ch = Channel::new(phi_a, &region, scaled, kappa1, cfg);
    let value = ch.eval(e_seed)?;
    if value.abs() > settings.seed_tol {
        return Err(Error::SecularNotZero {
            energy: e_seed,
            value,
        });
    }
    let mut samples = vec![ch.sample(phi_a, e_seed)?];

    let (mut phi, mut energy) = (phi_a, e_seed);
    let mut slope = 0.0;
    for i in 1..=steps {
        let target = phi_a + dphi * i as f64;
        let mut h = dphi;
        let mut halvings = 0;
        loop {
            let last = (phi_b - phi).abs() <= h.abs() * (1.0 + 1e-9)
                || (target - phi).abs() <= h.abs() * (1.0 + 1e-9);
            let next = if last { target } else { phi + h };
            let mut trial = Channel::new(next, &region, scaled, kappa1, cfg);
            match find_root(&mut trial, energy, energy + slope * (next - phi), settings) {
                Ok(root) => {
                    slope = (root - energy) / (next - phi);
                    phi = next;
                    energy = root;
                    ch = trial;
                    if phi == target {
                        break;
                    }
                }
                Err(StepFailure::Error(e)) => return Err(e),
                Err(StepFailure::NoBracket { clipped }) => {
                    if halvings == settings.max_halvings {
                        return Err(if clipped {
                            Error::CurveAtBandEdge { phi, energy }
                        } else {
                            Error::CurveLost { phi, energy }
                        });
                    }
                    halvings += 1;
                    h *= 0.5;
                }
            }
        }
        samples.push(ch.sample(target, energy)?);
    }
    Ok(EnergyCurve {
        spec: *spec,
        kappa1,
        mu1,
        region,
        samples,
    })
}

/// Marks samples whose `E - kappa_2` lies in a band (fattened by `fatten`)
/// at the Farey fraction nearest `phi / 2 pi`. Returns the flagged count.
pub fn flag_embedded(
    curve: &mut EnergyCurve,
    kappa2: f64,
    butterfly: &[BandData],
    qmax: i64,
    fatten: f64,
) -> Result<usize> {
    let index: HashMap<(i64, i64), &BandData> = butterfly.iter().map(|b| ((b.p, b.q), b)).collect();
    let mut count = 0;
    for s in curve.samples.iter_mut() {
        let alpha = (s.phi / std::f64::consts::TAU).rem_euclid(1.0);
        let (p, q) = nearest_farey(alpha, qmax);
        let bands = index
            .get(&(p, q))
            .ok_or_else(|| Error::InvalidParameter(format!("no band data for flux {p}/{q}")))?;
        s.embedded = bands.contains(s.energy - kappa2, fatten);
        count += s.embedded as usize;
    }
    Ok(count)
}

#[derive(Debug, Clone)]
pub struct Fig5Report {
    pub pair: crate::bilayer::InterlayerPair,
    pub curve: EnergyCurve,
    pub butterfly: Vec<BandData>,
    pub qmax: i64,
    pub embedded_count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fig5Settings {
    pub qmax: i64,
    pub kgrid: usize,
    pub fatten: f64,
}

impl Default for Fig5Settings {
    fn default() -> Self {
        Fig5Settings {
            qmax: 12,
            kgrid: 16,
            fatten: 0.0,
        }
    }
}

/// Tracks the channel-1 curve of `spec` (built for the single layer, so the
/// bilayer defect is `spec / mu_1`) and flags its overlap with the
/// channel-2 butterfly.
#[allow(clippy::too_many_arguments)]
pub fn curve_to_fig5(
    pair: &crate::bilayer::InterlayerPair,
    spec: &DefectSpec,
    phi_range: (f64, f64),
    steps: usize,
    e_seed: f64,
    region: Arc<Region>,
    cfg: &SolverConfig,
    track: &TrackSettings,
    fig: &Fig5Settings,
) -> Result<Fig5Report> {
    let butterfly = crate::spectral::butterfly(fig.qmax, fig.kgrid, fig.kgrid)?;
    let bilayer_spec = spec.scaled(1.0 / pair.mu[0]);
    let mut curve = track_curve(
        &bilayer_spec,
        pair.kappa[0],
        pair.mu[0],
        phi_range,
        steps,
        e_seed,
        region,
        cfg,
        track,
    )?;
    let embedded_count =
        flag_embedded(&mut curve, pair.kappa[1], &butterfly, fig.qmax, fig.fatten)?;
    Ok(Fig5Report {
        pair: *pair,
        curve,
        butterfly,
        qmax: fig.qmax,
        embedded_count,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::defect::construct_defect;
    use crate::lattice::Site;
    use crate::spectral::butterfly;

    #[test]
    fn brent_finds_simple_roots() {
        let r = brent(|x| Ok(x * x - 2.0), 0.0, 2.0, -2.0, 2.0, 1e-14).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-13);
        let r = brent(|x| Ok(x.cos() - x), 0.0, 1.0, 1.0, 1f64.cos() - 1.0, 1e-14).unwrap();
        assert!((r.cos() - r).abs() < 1e-13);
        assert!(brent(Ok, 1.0, 2.0, 1.0, 2.0, 1e-12).is_err());
    }

    fn short_curve() -> EnergyCurve {
        let v = Site::a(0, 0);
        let w = Site::b(0, 0);
        let region = Arc::new(Region::ball(v, 40).unwrap());
        let cfg = SolverConfig::default();
        let h = MagneticHamiltonian::new(Flux::Real(0.0), region.clone());
        let spec = construct_defect(&h, 3.5, v, w, &cfg).unwrap().spec;
        track_curve(
            &spec,
            0.0,
            1.0,
            (0.0, 0.2),
            4,
            3.5,
            region,
            &cfg,
            &TrackSettings::default(),
        )
        .unwrap()
    }

    #[test]
    fn short_track_from_the_construction_point() {
        let c = short_curve();
        assert_eq!(c.samples.len(), 5);
        assert!((c.samples[0].energy - 3.5).abs() <= 1e-10);
        assert!(c.samples.windows(2).all(|w| w[1].phi > w[0].phi));
        assert!(c.max_secular_residual() <= 1e-9);
        assert!(c.max_state_residual() <= 1e-8);
        assert!(c.decay_margin() >= 0.0);
    }

    #[test]
    fn seed_must_be_a_root() {
        let v = Site::a(0, 0);
        let region = Arc::new(Region::ball(v, 40).unwrap());
        let cfg = SolverConfig::default();
        let h = MagneticHamiltonian::new(Flux::Real(0.0), region.clone());
        let spec = construct_defect(&h, 3.5, v, Site::b(0, 0), &cfg)
            .unwrap()
            .spec;
        let err = track_curve(
            &spec,
            0.0,
            1.0,
            (0.0, 0.1),
            2,
            3.6,
            region.clone(),
            &cfg,
            &TrackSettings::default(),
        );
        assert!(matches!(err, Err(Error::SecularNotZero { .. })));
        let err = track_curve(
            &spec,
            0.0,
            1.0,
            (0.0, 0.1),
            2,
            3.05,
            region,
            &cfg,
            &TrackSettings::default(),
        );
        assert!(matches!(err, Err(Error::CurveAtBandEdge { .. })));
    }

    #[test]
    fn flags_grow_with_fattening_and_vanish_for_large_shifts() {
        let bf = butterfly(6, 8, 8).unwrap();
        let mut c = short_curve();
        let base = flag_embedded(&mut c, 0.65, &bf, 6, 0.0).unwrap();
        assert!(base > 0);
        let before: Vec<bool> = c.samples.iter().map(|s| s.embedded).collect();
        for eps in [1e-3, 0.1, 1.0] {
            flag_embedded(&mut c, 0.65, &bf, 6, eps).unwrap();
            assert!(before.iter().zip(&c.samples).all(|(b, s)| !b || s.embedded));
        }
        assert_eq!(flag_embedded(&mut c, 100.0, &bf, 6, 0.0).unwrap(), 0);
    }
}
