//! Representational (dis)similarity measures between neural activation
//! matrices, plus numerical verification of the identities and bounds
//! relating them.
//!
//! Two activation matrices over the same stimuli can be compared either by
//! aligning their neuron axes (angular, Riemannian shape, and Procrustes
//! distances) or through stimulus-by-stimulus kernel matrices (CKA, the
//! normalized Bures similarity, Bures distance, fidelity). The two views
//! coincide for centered linear kernels: the Bures distance between kernels
//! equals the Procrustes distance between the matrices, and NBS equals the
//! cosine of the Riemannian shape distance. The [`duality`] module checks
//! those identities and the CKA/NBS envelope bounds numerically; the
//! [`experiments`] module reproduces scatter and convergence behavior on
//! seeded random ensembles.

pub mod cli;
pub mod duality;
pub mod error;
pub mod experiments;
pub mod linalg;
pub mod measures;

pub use error::{Error, Result};
pub use linalg::{DataMatrix, PsdMatrix, Tolerances};
