//! Bearing-only network localization under a randomized pairwise gossip
//! protocol.
//!
//! * [`geometry`]: bearings, projection weights, bearing rigidity.
//! * [`network`]: proximity graphs, selection probabilities, scenarios.
//! * [`spectral`]: expected Laplacian, step-size bounds, spectral radii.
//! * [`gossip`]: the slot-by-slot state machine and run traces.
//! * [`metrics`]: error functionals, rate fits, epsilon-time estimation.
//! * [`io`]: scenario documents and CSV/JSON emitters.

pub mod benchmarks;
pub mod error;
pub mod geometry;
pub mod gossip;
pub mod io;
pub mod linalg;
pub mod metrics;
pub mod network;
pub mod spectral;

pub use error::{Error, Result};
