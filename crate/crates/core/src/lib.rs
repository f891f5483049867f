//! BoT-SORT multi-object tracking: Kalman motion model, camera motion
//! compensation, two-stage association with optional appearance fusion,
//! offline interpolation, and CLEAR/identity evaluation.

pub mod association;
pub mod cli;
pub mod error;
pub mod geometry;
pub mod gmc;
pub mod io;
pub mod kalman;
pub mod lap;
pub mod metrics;
pub mod postprocess;
pub mod tracker;

pub use error::{Error, Result};
pub use geometry::{iou, BBox};
pub use gmc::{AffineWarp, WarpTable};
pub use tracker::{Detection, TrackOutput, Tracker, TrackerConfig};
