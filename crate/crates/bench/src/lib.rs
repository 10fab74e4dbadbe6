//! Fixtures for the criterion benches: 1242x375 frames built from a fixed
//! seed so runs are comparable.

use rand::Rng;
use wxdepth::nalgebra::{Matrix3, Matrix3x4};
use wxdepth::{CameraCalibration, DepthGrid, Frame, Grid, ImageBuffer, Modality, Point, PointCloud, RngStream};

pub const WIDTH: usize = 1242;
pub const HEIGHT: usize = 375;

fn stream() -> RngStream {
    RngStream::new(0, "bench", Modality::Lidar)
}

/// A 64-beam-like cloud of `n` points in front of and around the sensor.
pub fn cloud(n: usize) -> PointCloud {
    let mut r = stream().at(0);
    let points = (0..n)
        .map(|_| {
            let range: f64 = r.random_range(1.0..80.0);
            let az: f64 = r.random_range(-std::f64::consts::PI..std::f64::consts::PI);
            let el: f64 = r.random_range(-0.43..0.03);
            Point::new(
                range * el.cos() * az.cos(),
                range * el.cos() * az.sin(),
                range * el.sin(),
                r.random_range(0.0..=1.0),
            )
        })
        .collect();
    PointCloud::new(points, Frame::Sensor).expect("valid points")
}

pub fn calibration() -> CameraCalibration {
    // LiDAR axes to camera axes with a small mounting offset
    let extrinsic = Matrix3x4::new(0.0, -1.0, 0.0, 0.0, 0.0, 0.0, -1.0, -0.08, 1.0, 0.0, 0.0, -0.27);
    CameraCalibration::new(
        721.5,
        721.5,
        609.6,
        172.9,
        Matrix3::identity(),
        extrinsic,
        WIDTH,
        HEIGHT,
    )
    .expect("valid calibration")
}

pub fn image() -> ImageBuffer {
    let mut r = stream().at(1);
    let data = (0..WIDTH * HEIGHT * 3).map(|_| r.random::<f64>()).collect();
    ImageBuffer::new(WIDTH, HEIGHT, data).expect("values in range")
}

/// Dense-ish ground truth: invalid sky band and 30% holes below it.
pub fn depth() -> DepthGrid {
    let mut r = stream().at(2);
    let grid = Grid::from_fn(WIDTH, HEIGHT, |row, _| {
        if row < HEIGHT / 4 || r.random::<f64>() < 0.3 {
            0.0
        } else {
            r.random_range(2.0..80.0)
        }
    });
    DepthGrid::from_grid(grid).expect("non-negative")
}

pub fn grid(seed: u64, width: usize, height: usize) -> Grid {
    let mut r = stream().at(seed + 10);
    Grid::from_fn(width, height, |_, _| r.random_range(0.5..50.0))
}
