//! Benchmark-campaign orchestration for mapping (SLAM) runs.
//!
//! The crate is organized by pipeline stage:
//!
//! * [`config`] – algorithms, datasets, mapping configurations and sweep expansion
//! * [`dataprep`] – frame-rate and resolution reduction of sequence logs
//! * [`executor`] – sandboxed execution with CPU/RAM profiling
//! * [`trajeval`] – trajectory association, alignment, ATE/RPE statistics
//! * [`store`] – persistence, ingest, evaluation and search
//! * [`analysis`] – selection algebra and the analysis modes
//! * [`scheduler`] – cluster/cloud planning and campaign simulation
//! * [`service`] – deployment modes and the request surface used by the HTTP API and CLI

pub mod analysis;
pub mod config;
pub mod dataprep;
pub mod executor;
pub mod ids;
pub mod layout;
pub mod mock;
pub mod scheduler;
pub mod service;
pub mod store;
pub mod synthetic;
pub mod trajeval;

pub use ids::{AlgorithmId, CombId, ConfigId, DatasetId, NodeId, RunId, TaskId};
pub use layout::Layout;
pub use trajeval::{MetricStats, Pose, SimilarityTransform, Trajectory};
