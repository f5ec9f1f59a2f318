//! AA-stacked bilayer: `H^b = I (x) H + K (x) I` with the compatible defect
//! `D = M (x) V` on the four vertices above and below `{v, w}`.
//!
//! When `K` and `M` commute, each joint eigenvector `xi_i` spans an invariant
//! hybrid space `xi_i (x) l2`, on which the operator reduces to
//! `H + kappa_i + mu_i V`. A bound state built in channel 1 at `E` with
//! `E - kappa_2` inside the band of `H` is an eigenvalue embedded in the
//! continuum of channel 2.

use std::sync::Arc;

use crate::defect::{construct_defect, DefectSpec};
use crate::error::{Error, Result};
use crate::hamiltonian::{torus_hamiltonian, Flux, LatticeState, MagneticHamiltonian};
use crate::lattice::{Region, Site};
use crate::linalg::{mat2_hermitian_deviation, mat2_mul, DenseMatrix, Mat2, C64, ZERO};
use crate::resolvent::{neumann_solve, DecayFit, SolverConfig};
use crate::spectral::{hermitian_eigen, BandData};

/// Commuting Hermitian `K`, `M` with joint eigendata, ordered by
/// ascending `kappa`, ties by ascending `mu`. Each `xi` has a real,
/// non-negative first component (second, if the first vanishes).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterlayerPair {
    pub k: Mat2,
    pub m: Mat2,
    pub kappa: [f64; 2],
    pub mu: [f64; 2],
    pub xi: [[C64; 2]; 2],
}

const COMMUTATOR_TOL: f64 = 1e-12;

pub fn hybridize(k: Mat2, m: Mat2) -> Result<InterlayerPair> {
    for a in [&k, &m] {
        let deviation = mat2_hermitian_deviation(a);
        if deviation > 1e-12 {
            return Err(Error::NotHermitian { deviation });
        }
    }
    let km = mat2_mul(&k, &m);
    let mk = mat2_mul(&m, &k);
    let norm = (0..2)
        .flat_map(|i| (0..2).map(move |j| (i, j)))
        .map(|(i, j)| (km[i][j] - mk[i][j]).norm_sqr())
        .sum::<f64>()
        .sqrt();
    if norm > COMMUTATOR_TOL {
        return Err(Error::IncompatibleDefect { norm });
    }
    // Diagonalise whichever of K, M is not a multiple of the identity.
    let split = |a: &Mat2| (a[0][0] - a[1][1]).norm() + 2.0 * a[0][1].norm();
    let basis = if split(&k) >= split(&m) { &k } else { &m };
    let eig = hermitian_eigen(&crate::linalg::mat2_to_dense(basis))?;
    let mut xi = [0, 1].map(|i| {
        let v = eig.vector(i);
        let anchor = if v[0].norm() > 1e-12 { v[0] } else { v[1] };
        let phase = anchor.conj() / anchor.norm();
        [v[0] * phase, v[1] * phase]
    });
    let expect = |a: &Mat2, x: &[C64; 2]| {
        let ax = crate::linalg::mat2_vec(a, *x);
        (x[0].conj() * ax[0] + x[1].conj() * ax[1]).re
    };
    let mut kappa = [expect(&k, &xi[0]), expect(&k, &xi[1])];
    let mut mu = [expect(&m, &xi[0]), expect(&m, &xi[1])];
    let swap = if (kappa[0] - kappa[1]).abs() > COMMUTATOR_TOL {
        kappa[0] > kappa[1]
    } else {
        mu[0] > mu[1]
    };
    if swap {
        xi.swap(0, 1);
        kappa.swap(0, 1);
        mu.swap(0, 1);
    }
    Ok(InterlayerPair {
        k,
        m,
        kappa,
        mu,
        xi,
    })
}

/// `K = 0.325 (I - sigma_1)`, `M = 0.75 I + 0.25 sigma_1`: `kappa = (0, 0.65)`,
/// `mu = (1, 0.5)`, `xi_1 ~ (1, 1)`, `xi_2 ~ (1, -1)`.
pub fn reference_coupling() -> (Mat2, Mat2) {
    let r = |x: f64| C64::new(x, 0.0);
    (
        [[r(0.325), r(-0.325)], [r(-0.325), r(0.325)]],
        [[r(0.75), r(0.25)], [r(0.25), r(0.75)]],
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct BilayerState {
    pub layers: [LatticeState; 2],
}

impl BilayerState {
    pub fn zeros(region: Arc<Region>) -> Self {
        BilayerState {
            layers: [
                LatticeState::zeros(region.clone()),
                LatticeState::zeros(region),
            ],
        }
    }

    pub fn new(layer1: LatticeState, layer2: LatticeState) -> Result<Self> {
        if !Arc::ptr_eq(layer1.region(), layer2.region())
            && layer1.region().sites() != layer2.region().sites()
        {
            return Err(Error::InvalidParameter(
                "bilayer layers must share a region".into(),
            ));
        }
        Ok(BilayerState {
            layers: [layer1, layer2],
        })
    }

    /// `xi (x) u`.
    pub fn from_hybrid(xi: [C64; 2], u: &LatticeState) -> Self {
        BilayerState {
            layers: [u.scaled(xi[0]), u.scaled(xi[1])],
        }
    }

    /// `(xi^dagger (x) I) self`.
    pub fn project(&self, xi: [C64; 2]) -> LatticeState {
        let amps = self.layers[0]
            .amplitudes()
            .iter()
            .zip(self.layers[1].amplitudes())
            .map(|(a, b)| xi[0].conj() * a + xi[1].conj() * b)
            .collect();
        LatticeState::from_amplitudes(self.region().clone(), amps).expect("same region")
    }

    pub fn region(&self) -> &Arc<Region> {
        self.layers[0].region()
    }

    pub fn norm(&self) -> f64 {
        self.layers
            .iter()
            .map(|l| l.norm().powi(2))
            .sum::<f64>()
            .sqrt()
    }

    pub fn inner(&self, other: &BilayerState) -> C64 {
        (0..2)
            .map(|l| crate::linalg::dot(self.layers[l].amplitudes(), other.layers[l].amplitudes()))
            .sum()
    }

    pub fn sub(&self, other: &BilayerState) -> BilayerState {
        let layer = |l: usize| {
            let amps = self.layers[l]
                .amplitudes()
                .iter()
                .zip(other.layers[l].amplitudes())
                .map(|(a, b)| a - b)
                .collect();
            LatticeState::from_amplitudes(self.region().clone(), amps).expect("same region")
        };
        BilayerState {
            layers: [layer(0), layer(1)],
        }
    }

    /// Decay fit of the per-site modulus `sqrt(|u_1|^2 + |u_2|^2)`.
    pub fn decay_fit(&self, center: Site) -> Result<DecayFit> {
        let amps = self.layers[0]
            .amplitudes()
            .iter()
            .zip(self.layers[1].amplitudes())
            .map(|(a, b)| C64::new((a.norm_sqr() + b.norm_sqr()).sqrt(), 0.0))
            .collect();
        crate::resolvent::decay_fit(
            &LatticeState::from_amplitudes(self.region().clone(), amps)?,
            center,
        )
    }
}

/// `(I (x) H + K (x) I + M (x) V) state`; the defect term is dropped when `defect` is `None`.
pub fn apply_bilayer(
    h: &MagneticHamiltonian,
    k: &Mat2,
    m: &Mat2,
    defect: Option<&DefectSpec>,
    state: &BilayerState,
) -> Result<BilayerState> {
    let region = h.region();
    let n = region.len();
    if state.region().len() != n {
        return Err(Error::InvalidParameter(
            "state lives on a different region".into(),
        ));
    }
    let mut out = [vec![ZERO; n], vec![ZERO; n]];
    for l in 0..2 {
        h.apply_into(state.layers[l].amplitudes(), &mut out[l]);
        for (&c, src) in k[l].iter().zip(&state.layers) {
            if c != ZERO {
                for (o, x) in out[l].iter_mut().zip(src.amplitudes()) {
                    *o += c * x;
                }
            }
        }
    }
    if let Some(spec) = defect {
        for (j, src) in state.layers.iter().enumerate() {
            let mut vx = vec![ZERO; n];
            spec.apply_add(region, src.amplitudes(), &mut vx)?;
            for (l, layer) in out.iter_mut().enumerate() {
                let c = m[l][j];
                for (o, x) in layer.iter_mut().zip(&vx) {
                    *o += c * x;
                }
            }
        }
    }
    let [a, b] = out;
    Ok(BilayerState {
        layers: [
            LatticeState::from_amplitudes(region.clone(), a)?,
            LatticeState::from_amplitudes(region.clone(), b)?,
        ],
    })
}

#[derive(Debug, Clone)]
pub struct EmbeddedState {
    pub energy: f64,
    /// Single-layer defect `W` built at `E - kappa_1`.
    pub single_layer: DefectSpec,
    /// `V = W / mu_1`, the defect entering `M (x) V`.
    pub spec: DefectSpec,
    /// `xi_1 (x) u`, unit norm.
    pub state: BilayerState,
    /// `||(H^b + D - E) u|| / ||u||`.
    pub residual: f64,
    pub decay: DecayFit,
}

/// Builds the defect in hybrid channel 1 so that `energy` is an eigenvalue of `H^b + D`.
pub fn embedded_state(
    pair: &InterlayerPair,
    h: &MagneticHamiltonian,
    energy: f64,
    v: Site,
    w: Site,
    margin: f64,
    cfg: &SolverConfig,
) -> Result<EmbeddedState> {
    let mu1 = pair.mu[0];
    if mu1.abs() <= 1e-12 {
        return Err(Error::InvalidParameter("mu_1 must be nonzero".into()));
    }
    let shifted = energy - pair.kappa[0];
    if shifted.abs() <= 3.0 + margin {
        return Err(Error::OutsideConvergenceRegion { energy: shifted });
    }
    let c = construct_defect(h, shifted, v, w, cfg)?;
    let spec = c.spec.scaled(1.0 / mu1);
    let state = BilayerState::from_hybrid(pair.xi[0], &c.bound.state);
    let applied = apply_bilayer(h, &pair.k, &pair.m, Some(&spec), &state)?;
    let residual = applied.sub(&scaled(&state, energy)).norm() / state.norm();
    let decay = state.decay_fit(v)?;
    Ok(EmbeddedState {
        energy,
        single_layer: c.spec,
        spec,
        state,
        residual,
        decay,
    })
}

fn scaled(s: &BilayerState, c: f64) -> BilayerState {
    let c = C64::new(c, 0.0);
    BilayerState {
        layers: [s.layers[0].scaled(c), s.layers[1].scaled(c)],
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelMembership {
    pub kappa: f64,
    /// `E - kappa`, compared against the single-layer bands.
    pub shifted: f64,
    pub inside: bool,
    pub edge_distance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmbeddingReport {
    pub energy: f64,
    pub alpha: f64,
    pub channels: [ChannelMembership; 2],
}

impl EmbeddingReport {
    /// Inside the continuum of channel 2 while channel 1 stays gapped.
    pub fn embedded(&self) -> bool {
        self.channels[1].inside && !self.channels[0].inside
    }
}

/// Band membership of `E - kappa_i` for both hybrid channels.
pub fn embedding_check(
    energy: f64,
    bands: &BandData,
    kappa: [f64; 2],
    fatten: f64,
) -> EmbeddingReport {
    let channels = kappa.map(|kappa| {
        let shifted = energy - kappa;
        ChannelMembership {
            kappa,
            shifted,
            inside: bands.contains(shifted, fatten),
            edge_distance: bands.edge_distance(shifted),
        }
    });
    EmbeddingReport {
        energy,
        alpha: bands.alpha(),
        channels,
    }
}

/// Response to a channel-1 forcing `f = xi_1 (x) g`: `xi_1 (x) (H - (E - kappa_1))^-1 g`.
pub fn forced_response(
    pair: &InterlayerPair,
    h: &MagneticHamiltonian,
    energy: f64,
    f: &BilayerState,
    cfg: &SolverConfig,
) -> Result<BilayerState> {
    let leak = f.project(pair.xi[1]).norm();
    if leak > 1e-12 * f.norm().max(1.0) {
        return Err(Error::HybridLeak { norm: leak });
    }
    let g = f.project(pair.xi[0]);
    let u = neumann_solve(h, energy - pair.kappa[0], &g, cfg)?.state;
    Ok(BilayerState::from_hybrid(pair.xi[0], &u))
}

/// Dense `I (x) H_torus + K (x) I`; index `layer * n + i`.
pub fn bilayer_torus(l1: usize, l2: usize, flux: Flux, k: &Mat2) -> Result<DenseMatrix> {
    let single = torus_hamiltonian(l1, l2, flux)?.to_dense();
    let n = single.rows();
    let mut out = DenseMatrix::zeros(2 * n, 2 * n);
    for l in 0..2 {
        for i in 0..n {
            for j in 0..n {
                out[(l * n + i, l * n + j)] = single[(i, j)];
            }
            for m in 0..2 {
                out[(l * n + i, m * n + i)] += k[l][m];
            }
        }
    }
    Ok(out)
}
