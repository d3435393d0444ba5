//! Finite-dimensional operator-algebra toolkit for trace-norm perturbations.
//!
//! Given a complex square matrix `T` and a budget `ε`, the [`perturb`] module
//! builds a perturbation `K` with Schatten-1 norm strictly below `ε` such that
//! `T + K` is irreducible (its commutant is the scalars). The constructions
//! rest on the *-algebra machinery in [`algebra`]: generated algebras,
//! commutants, centers, Wedderburn block decompositions, atomic and central
//! supports, cyclic and separating vectors. The [`verify`] module re-derives
//! every guarantee through an independent computational route.
//!
//! ```
//! use tracepert::{matrix::ComplexMatrix, perturb::{irreducible_pipeline, PerturbationRequest}};
//!
//! let t = ComplexMatrix::from_real_diagonal(&[1.0, 2.0, 2.0]).unwrap();
//! let req = PerturbationRequest::new(0.1).unwrap();
//! let out = irreducible_pipeline(&t, &req).unwrap();
//! assert!(out.trace_norm < 0.1);
//! assert!(out.certificate.irreducible);
//! ```

pub mod algebra;
pub mod ensemble;
mod error;
pub mod json;
pub mod matrix;
pub mod perturb;
pub mod verify;

pub use error::{Error, Result};
pub use matrix::{ComplexMatrix, ComplexVector, HermitianMatrix, Projection, Tolerances};
