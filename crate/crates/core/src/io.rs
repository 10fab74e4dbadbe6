//! File codecs: 16-bit depth PNG, 8-bit RGB PNG, flat float32 point clouds,
//! calibration text, occluder mask libraries, teacher prediction grids and
//! annotation JSON.

use std::fs;
use std::io::{BufReader, Cursor, Read};
use std::path::{Path, PathBuf};

use nalgebra::{Matrix3, Matrix3x4, Vector3};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::grid::{DepthGrid, Grid, ImageBuffer};
use crate::model::{CameraCalibration, Frame, Point, PointCloud, SampleAnnotation};
use crate::rgb::{OccluderKind, OccluderMask};

/// Depth PNG quantization: stored value = round(depth * 256).
pub const DEPTH_PNG_SCALE: f64 = 256.0;

fn codec(msg: impl std::fmt::Display) -> Error {
    Error::Codec(msg.to_string())
}

pub fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

/// Writes `bytes`, creating parent directories.
pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn encode_png(
    width: usize,
    height: usize,
    color: png::ColorType,
    depth: png::BitDepth,
    data: &[u8],
) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, width as u32, height as u32);
        enc.set_color(color);
        enc.set_depth(depth);
        let mut writer = enc.write_header().map_err(codec)?;
        writer.write_image_data(data).map_err(codec)?;
    }
    Ok(out)
}

struct DecodedPng {
    width: usize,
    height: usize,
    color: png::ColorType,
    depth: png::BitDepth,
    data: Vec<u8>,
}

fn decode_png(bytes: &[u8], transformations: png::Transformations) -> Result<DecodedPng> {
    let mut decoder = png::Decoder::new(Cursor::new(bytes));
    decoder.set_transformations(transformations);
    let mut reader = decoder.read_info().map_err(codec)?;
    let mut data = vec![0; reader.output_buffer_size()];
    let info = reader.next_frame(&mut data).map_err(codec)?;
    data.truncate(info.buffer_size());
    Ok(DecodedPng {
        width: info.width as usize,
        height: info.height as usize,
        color: info.color_type,
        depth: info.bit_depth,
        data,
    })
}

/// Encoded depth map plus the number of pixels clamped to 65535.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedDepth {
    pub bytes: Vec<u8>,
    pub clamped: usize,
}

pub fn encode_depth_png(depth: &DepthGrid) -> Result<EncodedDepth> {
    let mut clamped = 0;
    let mut data = Vec::with_capacity(depth.values().len() * 2);
    for &d in depth.values() {
        let q = (d * DEPTH_PNG_SCALE).round();
        let v = if q > f64::from(u16::MAX) {
            clamped += 1;
            u16::MAX
        } else {
            q as u16
        };
        data.extend_from_slice(&v.to_be_bytes());
    }
    let bytes = encode_png(
        depth.width(),
        depth.height(),
        png::ColorType::Grayscale,
        png::BitDepth::Sixteen,
        &data,
    )?;
    Ok(EncodedDepth { bytes, clamped })
}

pub fn decode_depth_png(bytes: &[u8]) -> Result<DepthGrid> {
    let png = decode_png(bytes, png::Transformations::IDENTITY)?;
    if png.color != png::ColorType::Grayscale || png.depth != png::BitDepth::Sixteen {
        return Err(codec(format!(
            "depth PNG must be 16-bit grayscale, found {:?} {:?}",
            png.color, png.depth
        )));
    }
    let values = png
        .data
        .chunks_exact(2)
        .map(|b| f64::from(u16::from_be_bytes([b[0], b[1]])) / DEPTH_PNG_SCALE)
        .collect();
    DepthGrid::new(png.width, png.height, values)
}

pub fn encode_rgb_png(image: &ImageBuffer) -> Result<Vec<u8>> {
    let data: Vec<u8> = image.values().iter().map(|&v| (v * 255.0).round() as u8).collect();
    encode_png(
        image.width(),
        image.height(),
        png::ColorType::Rgb,
        png::BitDepth::Eight,
        &data,
    )
}

/// Decodes 8-bit gray, gray-alpha, RGB or RGBA (alpha ignored).
pub fn decode_rgb_png(bytes: &[u8]) -> Result<ImageBuffer> {
    let png = decode_png(bytes, png::Transformations::EXPAND | png::Transformations::STRIP_16)?;
    let channels = match png.color {
        png::ColorType::Grayscale => 1,
        png::ColorType::GrayscaleAlpha => 2,
        png::ColorType::Rgb => 3,
        png::ColorType::Rgba => 4,
        other => return Err(codec(format!("unsupported color type {other:?}"))),
    };
    let data = png
        .data
        .chunks_exact(channels)
        .flat_map(|px| {
            let rgb = if channels < 3 {
                [px[0]; 3]
            } else {
                [px[0], px[1], px[2]]
            };
            rgb.map(|v| f64::from(v) / 255.0)
        })
        .collect();
    ImageBuffer::new(png.width, png.height, data)
}

pub fn decode_gray_png(bytes: &[u8]) -> Result<Grid> {
    let png = decode_png(bytes, png::Transformations::EXPAND | png::Transformations::STRIP_16)?;
    let step = match png.color {
        png::ColorType::Grayscale => 1,
        png::ColorType::GrayscaleAlpha => 2,
        other => return Err(codec(format!("mask must be single-channel, found {other:?}"))),
    };
    let values = png.data.iter().step_by(step).map(|&v| f64::from(v) / 255.0).collect();
    Grid::new(png.width, png.height, values)
}

pub fn encode_gray_png(grid: &Grid) -> Result<Vec<u8>> {
    let data: Vec<u8> = grid
        .values()
        .iter()
        .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect();
    encode_png(
        grid.width(),
        grid.height(),
        png::ColorType::Grayscale,
        png::BitDepth::Eight,
        &data,
    )
}

/// Flat little-endian float32 `(x, y, z, intensity)` records.
pub fn encode_cloud(cloud: &PointCloud) -> Vec<u8> {
    let mut out = Vec::with_capacity(cloud.len() * 16);
    for p in cloud.points() {
        for v in [p.x, p.y, p.z, p.intensity] {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    out
}

pub fn decode_cloud(bytes: &[u8]) -> Result<PointCloud> {
    if !bytes.len().is_multiple_of(16) {
        return Err(codec(format!(
            "point cloud size {} is not a multiple of 16",
            bytes.len()
        )));
    }
    let points = bytes
        .chunks_exact(16)
        .map(|rec| {
            let f = |i: usize| f64::from(f32::from_le_bytes(rec[i * 4..i * 4 + 4].try_into().expect("4 bytes")));
            Point::new(f(0), f(1), f(2), f(3))
        })
        .collect();
    PointCloud::new(points, Frame::Sensor).map_err(|e| codec(format!("invalid point cloud: {e}")))
}

fn parse_floats<const N: usize>(key: &str, rest: &str) -> Result<[f64; N]> {
    let values: Vec<f64> = rest
        .split_whitespace()
        .map(|t| t.parse::<f64>().map_err(|_| codec(format!("{key}: bad number `{t}`"))))
        .collect::<Result<_>>()?;
    values
        .try_into()
        .map_err(|v: Vec<f64>| codec(format!("{key}: expected {N} values, found {}", v.len())))
}

/// Nearest rotation in the Frobenius sense (polar factor).
fn orthonormalize(m: Matrix3<f64>) -> Matrix3<f64> {
    if (m.transpose() * m - Matrix3::identity()).amax() < 1e-15 {
        return m;
    }
    let svd = m.svd(true, true);
    let (u, v_t) = (svd.u.expect("requested"), svd.v_t.expect("requested"));
    u * v_t
}

/// Parses calibration text with `P_rect`, `R_rect` and
/// `Tr_velo_cam` lines. Other keys are ignored.
///
/// The translation column of `P_rect` (stereo baseline) is folded into the
/// extrinsic so the pinhole model stays `u = fx x / z + cx`. `R_rect` is
/// snapped to the nearest rotation because published values carry only a few
/// significant digits.
pub fn parse_calibration(text: &str, image_width: usize, image_height: usize) -> Result<CameraCalibration> {
    let (mut p_rect, mut r_rect, mut tr) = (None, None, None);
    for line in text.lines() {
        let Some((key, rest)) = line.split_once(':') else {
            continue;
        };
        match key.trim() {
            "P_rect" => p_rect = Some(parse_floats::<12>("P_rect", rest)?),
            "R_rect" => r_rect = Some(parse_floats::<9>("R_rect", rest)?),
            "Tr_velo_cam" => tr = Some(parse_floats::<12>("Tr_velo_cam", rest)?),
            _ => {}
        }
    }
    let p = p_rect.ok_or_else(|| codec("missing P_rect"))?;
    let r = r_rect.ok_or_else(|| codec("missing R_rect"))?;
    let t = tr.ok_or_else(|| codec("missing Tr_velo_cam"))?;

    let (fx, fy, cx, cy) = (p[0], p[5], p[2], p[6]);
    if !(fx > 0.0 && fy > 0.0) {
        return Err(codec("P_rect focal lengths must be positive"));
    }
    let rect = orthonormalize(Matrix3::from_row_slice(&r));
    let mut extrinsic = Matrix3x4::from_row_slice(&t);
    // P = K [I | k], so the camera-frame offset is K^-1 (p03, p13, p23).
    let tz = p[11];
    let offset = Vector3::new((p[3] - cx * tz) / fx, (p[7] - cy * tz) / fy, tz);
    let shift = rect.transpose() * offset;
    for i in 0..3 {
        extrinsic[(i, 3)] += shift[i];
    }
    CameraCalibration::new(fx, fy, cx, cy, rect, extrinsic, image_width, image_height)
}

/// Writes calibration text that [`parse_calibration`] reads back exactly.
pub fn format_calibration(calib: &CameraCalibration) -> String {
    let join = |v: &[f64]| v.iter().map(|x| format!("{x:e}")).collect::<Vec<_>>().join(" ");
    let p = [
        calib.fx, 0.0, calib.cx, 0.0, 0.0, calib.fy, calib.cy, 0.0, 0.0, 0.0, 1.0, 0.0,
    ];
    let r: Vec<f64> = (0..3)
        .flat_map(|i| (0..3).map(move |j| (i, j)))
        .map(|ij| calib.rect[ij])
        .collect();
    let t: Vec<f64> = (0..3)
        .flat_map(|i| (0..4).map(move |j| (i, j)))
        .map(|ij| calib.extrinsic[ij])
        .collect();
    format!(
        "P_rect: {}\nR_rect: {}\nTr_velo_cam: {}\n",
        join(&p),
        join(&r),
        join(&t)
    )
}

/// Loads `rd_*.png` (raindrop) and `sf_*.png` (snowflake) masks, sorted by
/// file name. A missing directory yields an empty library.
pub fn load_mask_library(dir: &Path) -> Result<Vec<(String, OccluderMask)>> {
    if !dir.is_dir() {
        return Ok(Vec::new());
    }
    let mut entries: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("png")))
        .collect();
    entries.sort();
    let mut out = Vec::new();
    for path in entries {
        let name = path
            .file_name()
            .and_then(|n| n.to_str())
            .unwrap_or_default()
            .to_string();
        let kind = if name.starts_with("rd_") {
            OccluderKind::Raindrop
        } else if name.starts_with("sf_") {
            OccluderKind::Snowflake
        } else {
            continue;
        };
        let grid = decode_gray_png(&read_file(&path)?)?;
        let mask = OccluderMask::new(grid, kind).map_err(|e| codec(format!("{name}: {e}")))?;
        out.push((name, mask));
    }
    Ok(out)
}

/// Semantics of a teacher prediction grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TeacherKind {
    Disparity,
    Metric,
}

impl TeacherKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TeacherKind::Disparity => "disparity",
            TeacherKind::Metric => "metric",
        }
    }
}

impl std::str::FromStr for TeacherKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "disparity" => Ok(TeacherKind::Disparity),
            "metric" => Ok(TeacherKind::Metric),
            other => Err(Error::InvalidInput(format!("unknown teacher kind `{other}`"))),
        }
    }
}

const TEACHER_MAGIC: &str = "WXTEACHER";

/// Teacher grid: ASCII header `WXTEACHER <kind> <width> <height>\n` followed
/// by little-endian float32 values, row-major.
pub fn encode_teacher(grid: &Grid, kind: TeacherKind) -> Vec<u8> {
    let mut out = format!("{TEACHER_MAGIC} {} {} {}\n", kind.as_str(), grid.width(), grid.height()).into_bytes();
    for &v in grid.values() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}

pub fn decode_teacher(bytes: &[u8]) -> Result<(Grid, TeacherKind)> {
    let newline = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| codec("teacher file has no header"))?;
    let header = std::str::from_utf8(&bytes[..newline]).map_err(|_| codec("teacher header is not UTF-8"))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    let [magic, kind, w, h] = fields[..] else {
        return Err(codec("teacher header needs 4 fields"));
    };
    if magic != TEACHER_MAGIC {
        return Err(codec("not a teacher file"));
    }
    let kind: TeacherKind = kind.parse().map_err(codec)?;
    let parse = |s: &str| s.parse::<usize>().map_err(|_| codec(format!("bad dimension `{s}`")));
    let (w, h) = (parse(w)?, parse(h)?);
    let payload = &bytes[newline + 1..];
    if payload.len() != w * h * 4 {
        return Err(codec(format!(
            "teacher payload is {} bytes, expected {}",
            payload.len(),
            w * h * 4
        )));
    }
    let values: Vec<f64> = payload
        .chunks_exact(4)
        .map(|b| f64::from(f32::from_le_bytes(b.try_into().expect("4 bytes"))))
        .collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(codec("teacher grid contains non-finite values"));
    }
    Ok((Grid::new(w, h, values)?, kind))
}

/// Annotation JSON; key order follows the struct, so output is byte-stable.
pub fn encode_annotation(annotation: &SampleAnnotation) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(annotation).expect("annotation serializes");
    out.push(b'\n');
    out
}

pub fn decode_annotation(bytes: &[u8]) -> Result<SampleAnnotation> {
    serde_json::from_slice(bytes).map_err(codec)
}

pub fn read_text(path: &Path) -> Result<String> {
    let mut s = String::new();
    BufReader::new(fs::File::open(path).map_err(|e| Error::io(path, e))?)
        .read_to_string(&mut s)
        .map_err(|e| Error::io(path, e))?;
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{make_weather_spec, Lens, TimeOfDay, Weather};

    #[test]
    fn depth_png_exact_quarter_values() {
        let d = DepthGrid::new(3, 1, vec![10.0, 0.0, 1.0 / 256.0]).unwrap();
        let enc = encode_depth_png(&d).unwrap();
        assert_eq!(enc.clamped, 0);
        assert_eq!(decode_depth_png(&enc.bytes).unwrap(), d);
    }

    #[test]
    fn depth_png_stores_scaled_u16() {
        let d = DepthGrid::new(1, 1, vec![10.0]).unwrap();
        let enc = encode_depth_png(&d).unwrap();
        let raw = decode_png(&enc.bytes, png::Transformations::IDENTITY).unwrap();
        assert_eq!(u16::from_be_bytes([raw.data[0], raw.data[1]]), 2560);
    }

    #[test]
    fn depth_png_clamps() {
        let d = DepthGrid::new(2, 1, vec![300.0, 5.0]).unwrap();
        let enc = encode_depth_png(&d).unwrap();
        assert_eq!(enc.clamped, 1);
        let back = decode_depth_png(&enc.bytes).unwrap();
        assert_eq!(back.values()[0], 65535.0 / 256.0);
    }

    #[test]
    fn depth_png_rejects_rgb() {
        let img = ImageBuffer::filled(2, 2, [0.5; 3]);
        assert!(matches!(
            decode_depth_png(&encode_rgb_png(&img).unwrap()),
            Err(Error::Codec(_))
        ));
        assert!(decode_depth_png(b"not a png").is_err());
    }

    #[test]
    fn cloud_size_and_errors() {
        let c = PointCloud::new(
            (1..=5).map(|i| Point::new(i as f64, 0.5, -1.0, 0.25)).collect(),
            Frame::Sensor,
        )
        .unwrap();
        let bytes = encode_cloud(&c);
        assert_eq!(bytes.len(), 16 * 5);
        assert_eq!(decode_cloud(&bytes).unwrap(), c);
        assert!(decode_cloud(&bytes[..15]).is_err());
        assert!(decode_cloud(&[0u8; 16]).is_err());
    }

    #[test]
    fn rgb_png_round_trip_on_8bit_values() {
        let data: Vec<f64> = (0..4 * 3 * 3).map(|i| (i * 7 % 256) as f64 / 255.0).collect();
        let img = ImageBuffer::new(4, 3, data).unwrap();
        assert_eq!(decode_rgb_png(&encode_rgb_png(&img).unwrap()).unwrap(), img);
    }

    #[test]
    fn calibration_round_trip() {
        let mut ext = Matrix3x4::identity();
        ext[(0, 3)] = -0.27;
        ext[(2, 3)] = 0.5;
        let calib = CameraCalibration::new(721.5, 721.5, 609.6, 172.9, Matrix3::identity(), ext, 1242, 375).unwrap();
        let back = parse_calibration(&format_calibration(&calib), 1242, 375).unwrap();
        assert_eq!(back, calib);
    }

    #[test]
    fn calibration_folds_baseline() {
        let text = "P_rect: 700 0 600 -70 0 700 180 0 0 0 1 0\n\
                    R_rect: 1 0 0 0 1 0 0 0 1\n\
                    Tr_velo_cam: 1 0 0 0 0 1 0 0 0 0 1 0\n";
        let calib = parse_calibration(text, 1242, 375).unwrap();
        assert!((calib.extrinsic[(0, 3)] + 0.1).abs() < 1e-12);
        assert!(parse_calibration("R_rect: 1 0 0 0 1 0 0 0 1\n", 10, 10).is_err());
        assert!(parse_calibration("P_rect: 1 2 3\n", 10, 10).is_err());
    }

    #[test]
    fn calibration_snaps_rounded_rotation() {
        // realistic R_rect with 7 significant digits
        let text = "P_rect: 7.215377e+02 0 6.095593e+02 4.485728e+01 0 7.215377e+02 1.728540e+02 2.163791e-01 0 0 1 2.745884e-03\n\
                    R_rect: 9.999239e-01 9.837760e-03 -7.445048e-03 -9.869795e-03 9.999421e-01 -4.278459e-03 7.402527e-03 4.351614e-03 9.999631e-01\n\
                    Tr_velo_cam: 7.533745e-03 -9.999714e-01 -6.166020e-04 -4.069766e-03 1.480249e-02 7.280733e-04 -9.998902e-01 -7.631618e-02 9.998621e-01 7.523790e-03 1.480755e-02 -2.717806e-01\n";
        let calib = parse_calibration(text, 1242, 375).unwrap();
        assert!((calib.rect.transpose() * calib.rect - Matrix3::identity()).amax() < 1e-12);
    }

    #[test]
    fn teacher_round_trip_and_errors() {
        let g = Grid::new(3, 2, vec![0.5, 1.0, 2.0, 0.25, 8.0, 16.0]).unwrap();
        let bytes = encode_teacher(&g, TeacherKind::Disparity);
        assert_eq!(decode_teacher(&bytes).unwrap(), (g, TeacherKind::Disparity));
        assert!(decode_teacher(b"WXTEACHER metric 2 2\n").is_err());
        assert!(decode_teacher(b"NOPE metric 0 0\n").is_err());
    }

    #[test]
    fn annotation_is_byte_stable() {
        let spec = make_weather_spec(Weather::Fog, 3, TimeOfDay::Day, Lens::None, 1).unwrap();
        let a = SampleAnnotation::new(&spec, "highway");
        let bytes = encode_annotation(&a);
        assert_eq!(bytes, encode_annotation(&a.clone()));
        let text = String::from_utf8(bytes.clone()).unwrap();
        let keys = [
            "weather",
            "severity_level",
            "severity_value",
            "unit",
            "time_of_day",
            "lens",
            "scene",
            "prompt",
        ];
        let positions: Vec<usize> = keys.iter().map(|k| text.find(&format!("\"{k}\"")).unwrap()).collect();
        assert!(positions.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(decode_annotation(&bytes).unwrap(), a);
    }

    #[test]
    fn mask_library_filters_prefixes() {
        let dir = tempfile::tempdir().unwrap();
        let g = Grid::from_fn(4, 4, |r, c| if r == c { 1.0 } else { 0.0 });
        let png = encode_gray_png(&g).unwrap();
        write_file(&dir.path().join("rd_a.png"), &png).unwrap();
        write_file(&dir.path().join("sf_b.png"), &png).unwrap();
        write_file(&dir.path().join("other.png"), &png).unwrap();
        let lib = load_mask_library(dir.path()).unwrap();
        assert_eq!(lib.len(), 2);
        assert_eq!(lib[0].1.kind(), OccluderKind::Raindrop);
        assert_eq!(lib[1].1.kind(), OccluderKind::Snowflake);
        assert!(load_mask_library(&dir.path().join("missing")).unwrap().is_empty());
    }
}
