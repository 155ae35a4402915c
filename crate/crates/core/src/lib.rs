//! Numerics for multipartite classical correlations of small qubit registers.
//!
//! - [`qmat`]: dense density matrices, partial traces, spectra, entropies.
//! - [`states`]: the classical GHZ, even-parity, W and Kaszlikowski families.
//! - [`covariance`]: n-party covariance, exhaustive Pauli scans, continuous maximization.
//! - [`correlations`]: bipartite cuts, mutual information, product tests, closed forms.
//! - [`measurement`]: product measurements, the Henderson-Vedral quantity, IC tomography.
//! - [`postulate`]: ancilla extensions and the postulate check for correlation measures.

pub mod correlations;
pub mod covariance;
pub mod error;
pub mod measurement;
pub mod optimize;
pub mod postulate;
pub mod qmat;
pub mod states;

pub use error::{Error, Result};
pub use qmat::{binary_entropy, DensityMatrix, Pauli, QubitSet, Spectrum};
