//! Streaming network embedding with space-invariant projection.
//!
//! The crate fits matrix-factorization node embeddings (Laplacian eigenmaps,
//! AROPE polynomial proximity, GraRep transition powers, NetMF) on an initial
//! graph, decides via a perturbation-theoretic budget whether newly arrived
//! nodes have drifted the embedding space, and while they have not, produces
//! their embeddings by projecting target-matrix rows onto the frozen basis in
//! time linear in the graph size.
//!
//! All numerical kernels are generic over the scalar type through [`Real`]
//! (`f32` or `f64`); concrete `f64` aliases live at the crate root.

pub mod drift;
pub mod error;
pub mod eval;
pub mod graph;
pub mod num;
pub mod project;
pub mod spectral;
pub mod synth;
pub mod target;

pub use error::{Error, Result};
pub use num::Real;

/// Default 64-bit instantiations used by the CLI and most callers.
pub type Graph64 = graph::Graph<f64>;
pub type StreamBatch64 = graph::StreamBatch<f64>;
pub type StreamScenario64 = graph::StreamScenario<f64>;
pub type TargetSpec64 = target::TargetSpec<f64>;
pub type EigenPairs64 = spectral::EigenPairs<f64>;
pub type SvdTriplet64 = spectral::SvdTriplet<f64>;
pub type DriftVerdict64 = drift::DriftVerdict<f64>;
pub type MethodBasis64 = project::MethodBasis<f64>;
pub type EmbeddingMatrix64 = project::EmbeddingMatrix<f64>;
pub type EvalReport64 = eval::EvalReport<f64>;
