//! Weather corruption and evaluation toolkit for RGB-LiDAR depth completion.
//!
//! The crate turns clean driving samples (image, point cloud, dense depth,
//! calibration) into weather-corrupted ones with matched severity across both
//! sensors, projects point clouds to sparse depth maps, and provides the
//! affine alignment / distillation loss kernels and depth metrics used to
//! train and score depth completion models on such data.

// `!(x >= lo)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod align;
pub mod error;
pub mod grid;
pub mod io;
pub mod lidar;
pub mod metrics;
pub mod model;
pub mod pipeline;
pub mod projection;
pub mod rgb;
pub mod rng;

pub use nalgebra;

pub use error::{Error, Result};
pub use grid::{DepthGrid, Grid, ImageBuffer};
pub use model::{
    inverse_depth, make_weather_spec, CameraCalibration, Frame, Lens, Point, PointCloud, SampleAnnotation, TimeOfDay,
    Weather, WeatherSpec, DEFAULT_INVERSE_DEPTH_FLOOR, DEFAULT_MAX_DEPTH,
};
pub use rng::{Modality, RngStream};
