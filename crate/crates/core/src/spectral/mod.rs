//! Dense eigensolvers, magnetic Bloch bands and the Hofstadter butterfly.

mod bands;
mod eigen;

pub use bands::{
    band_structure, bloch_matrix, butterfly, farey, nearest_farey, zero_field_dispersion, BandData,
    BandInterval,
};
pub use eigen::{count_eigenvalues_in, hermitian_eigen, hermitian_eigenvalues, Eigen, Tridiagonal};
