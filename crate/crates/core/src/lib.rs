//! Discontinuous Galerkin solver for coupled 3D-1D diffusion problems.
//!
//! A 3D domain exchanges mass with embedded 1D vessel centerlines through a
//! lateral-average coupling on unfitted meshes. Single vessels and directed
//! vessel networks (with hybridized bifurcation conditions) are supported,
//! together with backward-Euler time stepping and manufactured-solution
//! convergence studies.

pub mod assembly1d;
pub mod assembly3d;
pub mod coupling;
pub mod geometry;
pub mod io;
pub mod linalg;
pub mod mesh3d;
pub mod network1d;
pub mod spaces;
pub mod timestepping;
pub mod verify;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("mesh invalid: {0}")]
    MeshInvalid(String),
    #[error("point out of domain: ({0}, {1}, {2})")]
    OutOfDomain(f64, f64, f64),
    #[error("geometry error: {0}")]
    Geometry(String),
    #[error("matrix is not symmetric positive definite: {0}")]
    NotSpd(String),
    #[error("solver did not converge: {iterations} iterations, relative residual {residual:.3e}")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("nonsymmetric variant: use external solver (epsilon != -1)")]
    NonsymmetricVariant,
    #[error("network file error at {path}: {message}")]
    Schema { path: String, message: String },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("internal error: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;
