//! Stochastic reduced-order modeling via random principal subspaces.
//!
//! The library builds Galerkin reduced-order models for linear static and
//! second-order dynamic systems, then quantifies the error those models
//! commit by replacing the deterministic projection basis with random draws
//! concentrated around it. Two samplers are provided: resampling the
//! snapshot columns with replacement (bootstrap) and an isotropic Gaussian
//! model on the snapshot covariance. Ensembles of reduced solutions yield
//! empirical prediction bands whose sharpness is tuned by a concentration
//! parameter fitted on the training data.
//!
//! All numerical kernels are generic over the working scalar through
//! [`scalar::Scalar`]; `f64` aliases for the common types live at the crate
//! root.

pub mod ensemble;
pub mod error;
pub mod io;
pub mod linalg;
pub mod metrics;
pub mod rom;
pub mod sampling;
pub mod scalar;
pub mod solvers;
pub mod system;
pub mod training;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Dynamically sized matrix over the working scalar.
pub type Matrix<T> = nalgebra::DMatrix<T>;
/// Dynamically sized column vector over the working scalar.
pub type Vector<T> = nalgebra::DVector<T>;

/// Double-precision matrix.
pub type Matrix64 = Matrix<f64>;
/// Double-precision vector.
pub type Vector64 = Vector<f64>;
/// Single-precision matrix.
pub type Matrix32 = Matrix<f32>;
/// Single-precision vector.
pub type Vector32 = Vector<f32>;

/// Double-precision snapshot matrix.
pub type SnapshotMatrix64 = linalg::SnapshotMatrix<f64>;
/// Double-precision compact SVD.
pub type CompactSvd64 = linalg::CompactSvd<f64>;
/// Double-precision subspace basis.
pub type SubspaceBasis64 = linalg::SubspaceBasis<f64>;
