//! f-modularity of networks.
//!
//! A network is read as a noisy sample of a joint distribution over its two
//! vertex sides. Its community structure is scored by the variational (dual)
//! form of an f-mutual information between the frequency matrix `F` and a
//! null-model matrix `J`, with the distinguisher restricted to low rank.
//!
//! Modules:
//! - [`fdiv`]: divergence families, f-divergence, f-mutual information, channels.
//! - [`netcore`]: multigraphs, frequency matrices, null models.
//! - [`lowrank`]: truncated SVD, NMF, residual ratios, rank selection.
//! - [`modularity`]: the dual objective, the estimator, and the TVD/Newman cases.
//! - [`synth`]: stochastic block models, sampling, community contraction.
//! - [`bench`]: the experiment harness and result export.
//! - [`io`]: CSV matrices and TSV edge lists.

#![forbid(unsafe_code)]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod error;
pub mod fdiv;
pub mod io;
pub mod lowrank;
pub mod modularity;
pub mod netcore;
mod numeric;
pub mod synth;

pub use error::{Error, Result};
pub use fdiv::{DistributionMatrix, DivergenceFamily, StochasticChannel};
pub use lowrank::{LowRankFactors, NmfParams};
pub use modularity::{EstimatorConfig, Method, ModularityReport, Partition};
pub use netcore::{BipartiteMultigraph, FrequencyMatrix, NullModelMatrix, NullVariant};

/// Dense row-by-column matrix used throughout the crate.
pub type Matrix = nalgebra::DMatrix<f64>;
