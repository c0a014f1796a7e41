//! Segment multivariate game traces into recurring moves by clustering
//! echo-state-network reservoir states, and replay game dynamics with
//! conceptor-constrained autonomous reservoir runs.
//!
//! The stages, in pipeline order:
//!
//! 1. [`ingest`] parses canonical CSV traces and normalizes positions into `(-1, 1)`.
//! 2. [`esn`] drives a fixed random reservoir, trains the readout and loads the reservoir.
//! 3. [`clustering`] finds groups of similar reservoir states with X-means.
//! 4. [`moves`] cuts the label sequence into moves and computes per-cluster conceptors.
//! 5. [`replay`] runs the loaded reservoir without input under a conceptor.
//!
//! [`pipeline`] wires the stages together and writes the artifact set.

pub mod artifacts;
pub mod clustering;
pub mod conceptor;
pub mod config;
pub mod error;
pub mod esn;
pub mod ingest;
pub mod linalg;
pub mod moves;
pub mod pipeline;
pub mod plot;
pub mod replay;
pub mod synthetic;

pub use clustering::{ClusterModel, XMeansParams};
pub use conceptor::Conceptor;
pub use config::PipelineConfig;
pub use error::{Error, ErrorKind, Result};
pub use esn::{Reservoir, ReservoirConfig, StateSeries};
pub use ingest::{FieldSpec, GameTrace, ObjectId, WorldState};
pub use linalg::Matrix;
pub use moves::Move;
pub use replay::ReplayRun;
