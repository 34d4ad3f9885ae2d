//! Viewpoint recommendation for lasso labeling of point clouds.
//!
//! A viewpoint is scored by the Fitts'-law difficulty of drawing one lasso
//! that encloses a target instance and nothing else in the projected
//! scatter; a grid search over orbit angles picks the easiest view.

pub mod cluster;
pub mod error;
pub mod fitts;
pub mod geometry;
pub mod hull;
pub mod io;
pub mod lasso;
pub mod metrics;
pub mod optimizer;
pub mod pipeline;
pub mod session;
pub mod spatial;
pub mod synth;

pub use error::{Error, Result};
pub use geometry::{PointCloud, ProjectedScene, Vec2, Vec3, Viewpoint, Viewport};
pub use lasso::{Difficulty, Infeasibility, LassoCostEstimate};
