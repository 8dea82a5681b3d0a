//! Toolkit for generating annotated synthetic cell time-lapses.
//!
//! The crate covers everything around a conditioned image generator except
//! the generator itself:
//!
//! * [`stats`] estimates area, displacement and division statistics from
//!   annotated real videos;
//! * [`motion`] simulates a 2D population of disks that move, divide and
//!   repel each other;
//! * [`render`] turns population states into position and movement
//!   conditioning maps and builds training pairs from real videos;
//! * [`pseudo_gt`] reconciles externally produced segmentation masks with
//!   simulated detections;
//! * [`tra`] scores tracking results with the AOGM / TRA measure;
//! * [`plan`] and [`pipeline`] orchestrate whole datasets.
//!
//! All stochastic code takes an explicit [`RandomSource`]; there is no
//! global generator.

pub mod config;
pub mod error;
pub mod exec;
pub mod io;
pub mod model;
pub mod motion;
pub mod pipeline;
pub mod plan;
pub mod pseudo_gt;
pub mod raster;
pub mod render;
pub mod rng;
pub mod special;
pub mod stats;
pub mod tra;

pub use error::{Error, ErrorKind, Result};
pub use exec::Execution;
pub use model::{
    Cell, DatasetStatistics, Difficulty, ImageSize, Point, PopulationState, SimulationConfig,
    TimeLapseTrajectory, TrackRecord,
};
pub use raster::{GrayImage, LabelImage, Raster, RgbImage};
pub use rng::{derive_child_seed, RandomSource};
