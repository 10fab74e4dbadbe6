//! LiDAR-to-image projection: rigid transform into the rectified camera
//! frame, pinhole projection with field-of-view filtering, and z-buffer
//! rasterization into a sparse depth map.

use nalgebra::Vector3;
use rayon::prelude::*;

use crate::grid::{DepthGrid, Grid};
use crate::model::{CameraCalibration, Frame, Point, PointCloud, DEFAULT_MAX_DEPTH};

/// Points closer than this to the image plane are discarded.
pub const DEFAULT_MIN_CAMERA_DEPTH: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PixelSample {
    pub u: usize,
    pub v: usize,
    pub depth: f64,
    pub source_index: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectionParams {
    pub min_camera_depth: f64,
    /// Samples deeper than this are not rasterized.
    pub max_depth: f64,
}

impl Default for ProjectionParams {
    fn default() -> Self {
        ProjectionParams {
            min_camera_depth: DEFAULT_MIN_CAMERA_DEPTH,
            max_depth: DEFAULT_MAX_DEPTH,
        }
    }
}

/// Maps a sensor-frame cloud into the rectified camera frame and removes
/// points with camera depth at or below `min_camera_depth`.
pub fn to_camera_frame(cloud: &PointCloud, calib: &CameraCalibration, min_camera_depth: f64) -> PointCloud {
    let points = cloud
        .points()
        .iter()
        .filter_map(|p| {
            let c = calib.sensor_to_camera(Vector3::new(p.x, p.y, p.z));
            (c.z > min_camera_depth).then(|| Point::new(c.x, c.y, c.z, p.intensity))
        })
        .collect();
    PointCloud::from_valid(points, Frame::CameraRectified)
}

/// Pinhole projection. Source indices refer to positions in `cam_cloud`.
pub fn project_points(cam_cloud: &PointCloud, calib: &CameraCalibration) -> Vec<PixelSample> {
    let (w, h) = (calib.image_width as f64, calib.image_height as f64);
    cam_cloud
        .points()
        .iter()
        .enumerate()
        .filter_map(|(i, p)| {
            if p.z <= 0.0 {
                return None;
            }
            // f64::round is half away from zero
            let u = (calib.fx * p.x / p.z + calib.cx).round();
            let v = (calib.fy * p.y / p.z + calib.cy).round();
            (u >= 0.0 && u < w && v >= 0.0 && v < h).then_some(PixelSample {
                u: u as usize,
                v: v as usize,
                depth: p.z,
                source_index: i,
            })
        })
        .collect()
}

/// Nearest-depth z-buffer. Exact depth ties go to the smaller source index,
/// so the result does not depend on sample order.
pub fn rasterize(samples: &[PixelSample], width: usize, height: usize, max_depth: f64) -> DepthGrid {
    let mut kept: Vec<(usize, f64, usize)> = samples
        .iter()
        .filter(|s| s.u < width && s.v < height && s.depth > 0.0 && s.depth <= max_depth)
        .map(|s| (s.v * width + s.u, s.depth, s.source_index))
        .collect();
    kept.par_sort_unstable_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)).then(a.2.cmp(&b.2)));
    kept.dedup_by_key(|k| k.0);
    let mut values = vec![0.0; width * height];
    for (pixel, depth, _) in kept {
        values[pixel] = depth;
    }
    DepthGrid::from_grid(Grid::new(width, height, values).expect("sized above"))
        .expect("depths are positive and finite")
}

/// Full projection: transform, project, rasterize.
pub fn project_cloud(cloud: &PointCloud, calib: &CameraCalibration, params: &ProjectionParams) -> DepthGrid {
    let cam = match cloud.frame() {
        Frame::Sensor => to_camera_frame(cloud, calib, params.min_camera_depth),
        Frame::CameraRectified => cloud.clone(),
    };
    let samples = project_points(&cam, calib);
    rasterize(&samples, calib.image_width, calib.image_height, params.max_depth)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{Matrix3, Matrix3x4};

    fn calib() -> CameraCalibration {
        CameraCalibration::pinhole(700.0, 700.0, 600.0, 180.0, 1242, 375).unwrap()
    }

    fn sensor(points: &[(f64, f64, f64)]) -> PointCloud {
        PointCloud::new(
            points.iter().map(|&(x, y, z)| Point::new(x, y, z, 0.5)).collect(),
            Frame::Sensor,
        )
        .unwrap()
    }

    #[test]
    fn identity_transform() {
        let out = to_camera_frame(&sensor(&[(1.0, 2.0, 3.0)]), &calib(), 0.1);
        assert_eq!(out.frame(), Frame::CameraRectified);
        assert_eq!(out.points()[0], Point::new(1.0, 2.0, 3.0, 0.5));
    }

    #[test]
    fn behind_camera_removed() {
        let out = to_camera_frame(&sensor(&[(1.0, 2.0, -5.0), (0.0, 0.0, 0.1)]), &calib(), 0.1);
        assert!(out.is_empty());
    }

    #[test]
    fn translation_extrinsic() {
        let mut ext = Matrix3x4::identity();
        ext[(2, 3)] = 2.0;
        let c = CameraCalibration::new(700.0, 700.0, 600.0, 180.0, Matrix3::identity(), ext, 1242, 375).unwrap();
        let out = to_camera_frame(&sensor(&[(0.0, 0.0, 3.0)]), &c, 0.1);
        assert_eq!(out.points()[0], Point::new(0.0, 0.0, 5.0, 0.5));
    }

    #[test]
    fn pinhole_examples() {
        let cam = PointCloud::new(
            vec![
                Point::new(0.0, 0.0, 10.0, 0.5),
                Point::new(1.4, 0.36, 10.0, 0.5),
                Point::new(-8.61, 0.0, 10.0, 0.5),
            ],
            Frame::CameraRectified,
        )
        .unwrap();
        let s = project_points(&cam, &calib());
        assert_eq!(s.len(), 2);
        assert_eq!((s[0].u, s[0].v, s[0].depth), (600, 180, 10.0));
        assert_eq!((s[1].u, s[1].v, s[1].depth), (698, 205, 10.0));
    }

    #[test]
    fn zbuffer_keeps_nearest() {
        let samples = [
            PixelSample {
                u: 5,
                v: 5,
                depth: 12.0,
                source_index: 0,
            },
            PixelSample {
                u: 5,
                v: 5,
                depth: 7.5,
                source_index: 1,
            },
        ];
        let g = rasterize(&samples, 10, 10, 120.0);
        assert_eq!(g.get(5, 5), 7.5);
        assert_eq!(g.valid_count(), 1);
    }

    #[test]
    fn empty_and_single() {
        assert_eq!(rasterize(&[], 4, 3, 120.0).valid_count(), 0);
        let g = rasterize(
            &[PixelSample {
                u: 1,
                v: 2,
                depth: 3.25,
                source_index: 0,
            }],
            4,
            3,
            120.0,
        );
        assert_eq!(g.valid_count(), 1);
        assert_eq!(g.get(2, 1), 3.25);
    }

    #[test]
    fn beyond_max_depth_skipped() {
        let g = rasterize(
            &[PixelSample {
                u: 0,
                v: 0,
                depth: 130.0,
                source_index: 0,
            }],
            2,
            2,
            120.0,
        );
        assert_eq!(g.valid_count(), 0);
    }
}
