//! Synthetic input trees and random fixtures shared by integration tests.
#![allow(dead_code)]

use std::path::Path;

use nalgebra::{Matrix3, Matrix3x4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wxdepth::io;
use wxdepth::{CameraCalibration, DepthGrid, Frame, Grid, ImageBuffer, Point, PointCloud};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// LiDAR axes (x forward, y left, z up) to camera axes (x right, y down, z forward).
pub fn lidar_to_camera() -> Matrix3x4<f64> {
    Matrix3x4::new(0.0, -1.0, 0.0, 0.0, 0.0, 0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0)
}

pub fn calibration(width: usize, height: usize) -> CameraCalibration {
    let f = width as f64 * 0.8;
    CameraCalibration::new(
        f,
        f,
        width as f64 / 2.0,
        height as f64 / 2.0,
        Matrix3::identity(),
        lidar_to_camera(),
        width,
        height,
    )
    .unwrap()
}

pub fn random_image(r: &mut impl Rng, width: usize, height: usize) -> ImageBuffer {
    let data = (0..width * height * 3).map(|_| r.random::<f64>()).collect();
    ImageBuffer::new(width, height, data).unwrap()
}

/// Smooth image, so PNG output stays small and deterministic tests are cheap.
pub fn gradient_image(width: usize, height: usize, phase: f64) -> ImageBuffer {
    let mut img = ImageBuffer::filled(width, height, [0.0; 3]);
    for row in 0..height {
        for col in 0..width {
            let a = col as f64 / width as f64;
            let b = row as f64 / height as f64;
            img.set_pixel(row, col, [a, b, (0.5 + 0.5 * (phase + a * 3.0).sin()) * 0.9]);
        }
    }
    img
}

/// Depth increasing toward the bottom of the image with invalid top rows and
/// scattered holes.
pub fn random_depth(r: &mut impl Rng, width: usize, height: usize, hole_fraction: f64) -> DepthGrid {
    let sky_rows = height / 5;
    let grid = Grid::from_fn(width, height, |row, _| {
        if row < sky_rows || r.random::<f64>() < hole_fraction {
            0.0
        } else {
            r.random_range(2.0..80.0)
        }
    });
    DepthGrid::from_grid(grid).unwrap()
}

/// Points in front of the sensor, inside a wide horizontal wedge.
pub fn random_cloud(r: &mut impl Rng, n: usize) -> PointCloud {
    let points = (0..n)
        .map(|_| {
            let x: f64 = r.random_range(2.0..70.0);
            let y = r.random_range(-0.6..0.6) * x;
            let z = r.random_range(-0.3..0.1) * x;
            Point::new(x, y, z, r.random_range(0.05..1.0))
        })
        .collect();
    PointCloud::new(points, Frame::Sensor).unwrap()
}

/// Cloud with f32-representable coordinates, so the binary codec is exact.
pub fn f32_cloud(r: &mut impl Rng, n: usize) -> PointCloud {
    let mut c = random_cloud(r, n).into_points();
    for p in &mut c {
        p.x = p.x as f32 as f64;
        p.y = p.y as f32 as f64;
        p.z = p.z as f32 as f64;
        p.intensity = p.intensity as f32 as f64;
    }
    PointCloud::new(c, Frame::Sensor).unwrap()
}

pub fn disc_mask(size: usize) -> Grid {
    let c = (size as f64 - 1.0) / 2.0;
    Grid::from_fn(size, size, |r, col| {
        let d = ((r as f64 - c).powi(2) + (col as f64 - c).powi(2)).sqrt();
        (1.0 - d / (c + 0.5)).clamp(0.0, 1.0)
    })
}

/// Writes a complete input tree with `frames` frames of `width x height`.
pub fn write_input_tree(root: &Path, frames: usize, width: usize, height: usize, seed: u64) {
    let mut r = rng(seed);
    let calib = calibration(width, height);
    io::write_file(&root.join("calib.txt"), io::format_calibration(&calib).as_bytes()).unwrap();
    for i in 0..frames {
        let id = format!("{i:06}");
        let image = gradient_image(width, height, i as f64);
        let gt = random_depth(&mut r, width, height, 0.1);
        let cloud = f32_cloud(&mut r, 1500);
        io::write_file(
            &root.join("image").join(format!("{id}.png")),
            &io::encode_rgb_png(&image).unwrap(),
        )
        .unwrap();
        io::write_file(
            &root.join("groundtruth").join(format!("{id}.png")),
            &io::encode_depth_png(&gt).unwrap().bytes,
        )
        .unwrap();
        io::write_file(
            &root.join("velodyne").join(format!("{id}.bin")),
            &io::encode_cloud(&cloud),
        )
        .unwrap();
    }
    let mask = io::encode_gray_png(&disc_mask(24)).unwrap();
    io::write_file(&root.join("masks").join("rd_000.png"), &mask).unwrap();
    io::write_file(&root.join("masks").join("sf_000.png"), &mask).unwrap();
}

/// Relative path and contents of every file under `root`, sorted.
pub fn snapshot_tree(root: &Path) -> Vec<(String, Vec<u8>)> {
    fn walk(base: &Path, dir: &Path, out: &mut Vec<(String, Vec<u8>)>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(base, &path, out);
            } else {
                let rel = path.strip_prefix(base).unwrap().to_string_lossy().into_owned();
                out.push((rel, std::fs::read(&path).unwrap()));
            }
        }
    }
    let mut out = Vec::new();
    walk(root, root, &mut out);
    out.sort();
    out
}
