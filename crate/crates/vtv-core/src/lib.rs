//! Deterministic data pipeline for masked visuo-tactile video pretraining.
//!
//! The crate covers the stage-1 data path of a visuo-tactile video model:
//! dense optical flow with a pluggable provider, Gaussian-mixture keyframe
//! masks warped to every frame through composed flows, tubelet-level token
//! masks with a tube-masking baseline and a leakage metric, the numeric
//! pieces of the tokenizer/projector/loss stack, cubic-spline upsampling of
//! Tac3D force fields, a templated QA dataset factory, and a synthetic
//! sequence generator with analytic ground-truth flow for testing.

pub mod flow;
pub mod grid;
pub mod keyframe;
pub mod model;
pub mod neural;
pub mod propagate;
pub mod qa;
pub mod synth;
pub mod tacforce;
pub mod tensorfile;

pub use grid::Grid;
pub use model::{
    Frame, InteractionKind, Manifest, ManifestEntry, SensorKind, TactileAnnotation, VideoSequence,
};
