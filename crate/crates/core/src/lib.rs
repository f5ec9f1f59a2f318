//! Magnetic tight-binding graphene.
//!
//! Builds the Landau-gauge Harper Hamiltonian on the honeycomb lattice,
//! computes magnetic Bloch bands and the Hofstadter butterfly, constructs
//! two-site defects that bind a state at a prescribed energy outside the
//! spectrum, and lifts the construction to AA-stacked bilayers where the
//! bound state sits inside the continuum of the other hybrid channel. The
//! defect energy is tracked across the flux by continuation.

pub mod bilayer;
pub mod curve;
pub mod defect;
pub mod error;
pub mod hamiltonian;
pub mod io;
pub mod lattice;
pub mod linalg;
pub mod resolvent;
pub mod spectral;
pub mod svg;
pub mod verify;

pub use bilayer::{BilayerState, InterlayerPair};
pub use curve::{CurveSample, EnergyCurve};
pub use defect::DefectSpec;
pub use error::{Error, Result};
pub use hamiltonian::{Flux, HermitianOperator, LatticeState, MagneticHamiltonian};
pub use lattice::{Region, RegionKind, Site, Sublattice};
pub use linalg::{DenseMatrix, Mat2, C64};
pub use resolvent::{DecayFit, GreenBlock, SolverConfig};
pub use spectral::{BandData, BandInterval};
