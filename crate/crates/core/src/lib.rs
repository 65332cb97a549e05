//! Multilayer perceptrons on functional inputs.
//!
//! Curves living in L2([0, 1]) are projected onto a finite orthonormal
//! basis (Fourier or orthonormalized B-splines); the coordinate vectors
//! feed a single-hidden-layer perceptron whose output weights satisfy an
//! l1 budget. The crate covers the whole pipeline: bases and quadrature,
//! projections, the constrained network and its training loop, synthetic
//! data generation, CSV/JSON interchange, and the experiment harness that
//! sweeps projection dimension, network width and sample size.

pub mod basis;
pub mod datagen;
pub mod error;
pub mod harness;
pub mod ingest;
pub mod mlp;
pub mod projection;
pub mod rng;

pub use basis::{BasisFamily, BasisSpec, BasisSystem, QuadratureRule};
pub use error::{Error, Result};
pub use projection::{
    project_exact, project_sampled, reconstruct, residual_norm, CoordinateVector,
    EvaluableFunction, Projector, SampledFunction,
};
