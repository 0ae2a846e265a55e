//! Community detection on weighted multiplex networks driven by communicability.
//!
//! The pipeline has two stages:
//!
//! 1. pick the inter-layer intensity `omega*` that minimizes the multiplex
//!    total communicability distance `Delta_M(omega)` ([`omega`]);
//! 2. on every layer, threshold the communicability distances of `G(omega*)`
//!    and keep the threshold whose connected components maximize the cohesion
//!    quality `Q` ([`community`]).
//!
//! [`ingest`] turns per-entity time series into correlation layers, and
//! [`metrics`] compares the resulting partitions.

pub mod communicability;
pub mod community;
pub mod dsu;
pub mod error;
pub mod export;
pub mod golden;
pub mod ingest;
pub mod metrics;
pub mod model;
pub mod omega;
pub mod synth;

pub use communicability::{
    cohesion, communicability, distance_matrix, layer_communicability, multiplex_communicability,
    strength_normalize, CohesionScope, CommunicabilityResult, DistanceSummary, Normalization,
};
pub use community::{detect_layer, detect_layers, detect_single_layer, Partition, ThresholdSweep};
pub use error::{Error, Result};
pub use metrics::nmi;
pub use model::{assemble_supra, LayerNetwork, MultiplexNetwork, NodeIndex, SupraMatrix};
pub use omega::{delta_m_of_omega, find_omega_star, OmegaSearch, OmegaSearchResult};
