//! Shared domain types: point clouds, weather specifications, calibration and
//! per-sample annotations.

use std::fmt;

use nalgebra::{Matrix3, Matrix3x4, Vector3, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Depth cap applied to every produced depth value, in meters.
pub const DEFAULT_MAX_DEPTH: f64 = 120.0;

/// Smallest depth used when converting to inverse depth, in meters.
pub const DEFAULT_INVERSE_DEPTH_FLOOR: f64 = 1e-3;

/// Inverse depth in 1/km: `1000 / max(depth, floor)`.
pub fn inverse_depth(depth_m: f64, floor_m: f64) -> f64 {
    1000.0 / depth_m.max(floor_m)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Weather {
    Clear,
    Fog,
    Rain,
    Snow,
}

impl Weather {
    pub const ALL: [Weather; 4] = [Weather::Clear, Weather::Fog, Weather::Rain, Weather::Snow];

    pub fn as_str(self) -> &'static str {
        match self {
            Weather::Clear => "clear",
            Weather::Fog => "fog",
            Weather::Rain => "rain",
            Weather::Snow => "snow",
        }
    }

    /// Physical severity ladder for levels 1..=3.
    pub fn severity_ladder(self) -> Option<[f64; 3]> {
        match self {
            Weather::Clear => None,
            // attenuation coefficient, m^-1
            Weather::Fog => Some([0.01, 0.1, 0.2]),
            // rain rate, mm/hr
            Weather::Rain => Some([10.0, 100.0, 200.0]),
            // snow rate, mm/hr
            Weather::Snow => Some([0.5, 1.5, 2.5]),
        }
    }

    pub fn unit(self) -> &'static str {
        match self {
            Weather::Clear => "",
            Weather::Fog => "m^-1",
            Weather::Rain | Weather::Snow => "mm/hr",
        }
    }
}

impl fmt::Display for Weather {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Weather {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "clear" => Ok(Weather::Clear),
            "fog" => Ok(Weather::Fog),
            "rain" => Ok(Weather::Rain),
            "snow" => Ok(Weather::Snow),
            other => Err(Error::InvalidInput(format!("unknown weather `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TimeOfDay {
    Day,
    Night,
}

impl TimeOfDay {
    pub fn as_str(self) -> &'static str {
        match self {
            TimeOfDay::Day => "day",
            TimeOfDay::Night => "night",
        }
    }
}

impl fmt::Display for TimeOfDay {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for TimeOfDay {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "day" => Ok(TimeOfDay::Day),
            "night" => Ok(TimeOfDay::Night),
            other => Err(Error::InvalidInput(format!("unknown time of day `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Lens {
    None,
    Raindrop,
    Snowflake,
}

impl Lens {
    pub fn as_str(self) -> &'static str {
        match self {
            Lens::None => "none",
            Lens::Raindrop => "raindrop",
            Lens::Snowflake => "snowflake",
        }
    }
}

impl fmt::Display for Lens {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Lens {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Lens::None),
            "raindrop" => Ok(Lens::Raindrop),
            "snowflake" => Ok(Lens::Snowflake),
            other => Err(Error::InvalidInput(format!("unknown lens condition `{other}`"))),
        }
    }
}

/// The corruption parameter bundle applied identically to both sensors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeatherSpec {
    pub weather: Weather,
    pub severity_level: u8,
    /// Physical severity in the unit given by [`Weather::unit`]; 0 for clear.
    pub severity_value: f64,
    pub time_of_day: TimeOfDay,
    pub lens: Lens,
    pub seed: u64,
}

impl WeatherSpec {
    pub fn unit(&self) -> &'static str {
        self.weather.unit()
    }

    pub fn is_clean(&self) -> bool {
        self.weather == Weather::Clear && self.time_of_day == TimeOfDay::Day && self.lens == Lens::None
    }

    /// Short filesystem-safe tag such as `fog_l2_day_none`.
    pub fn condition_tag(&self) -> String {
        format!(
            "{}_l{}_{}_{}",
            self.weather, self.severity_level, self.time_of_day, self.lens
        )
    }
}

/// Builds a validated [`WeatherSpec`], looking up the physical severity for
/// `(weather, severity_level)`.
pub fn make_weather_spec(
    weather: Weather,
    severity_level: u8,
    time_of_day: TimeOfDay,
    lens: Lens,
    seed: u64,
) -> Result<WeatherSpec> {
    let severity_value = match (weather.severity_ladder(), severity_level) {
        (None, 0) => 0.0,
        (Some(ladder), 1..=3) => ladder[usize::from(severity_level) - 1],
        _ => {
            return Err(Error::InvalidSeverity {
                weather,
                level: severity_level,
            })
        }
    };
    Ok(WeatherSpec {
        weather,
        severity_level,
        severity_value,
        time_of_day,
        lens,
        seed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Frame {
    Sensor,
    CameraRectified,
}

/// A single LiDAR return. Coordinates in meters, intensity in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub intensity: f64,
}

impl Point {
    pub fn new(x: f64, y: f64, z: f64, intensity: f64) -> Self {
        Point { x, y, z, intensity }
    }

    pub fn range(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    /// Same ray, new range.
    pub fn at_range(&self, range: f64, intensity: f64) -> Point {
        let s = range / self.range();
        Point::new(self.x * s, self.y * s, self.z * s, intensity)
    }

    fn validate(&self) -> Result<()> {
        if !(self.x.is_finite() && self.y.is_finite() && self.z.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite point {self:?}")));
        }
        if !(0.0..=1.0).contains(&self.intensity) {
            return Err(Error::InvalidInput(format!(
                "intensity {} outside [0, 1]",
                self.intensity
            )));
        }
        if self.range() <= 0.0 {
            return Err(Error::InvalidInput("point at zero range".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    points: Vec<Point>,
    frame: Frame,
}

impl PointCloud {
    pub fn new(points: Vec<Point>, frame: Frame) -> Result<Self> {
        for p in &points {
            p.validate()?;
        }
        Ok(PointCloud { points, frame })
    }

    pub fn empty(frame: Frame) -> Self {
        PointCloud {
            points: Vec::new(),
            frame,
        }
    }

    /// Caller guarantees every point already satisfies the cloud invariants.
    pub(crate) fn from_valid(points: Vec<Point>, frame: Frame) -> Self {
        debug_assert!(points.iter().all(|p| p.validate().is_ok()));
        PointCloud { points, frame }
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn frame(&self) -> Frame {
        self.frame
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn into_points(self) -> Vec<Point> {
        self.points
    }
}

/// Pinhole intrinsics, rectifying rotation and LiDAR-to-camera extrinsics.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraCalibration {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub rect: Matrix3<f64>,
    pub extrinsic: Matrix3x4<f64>,
    pub image_width: usize,
    pub image_height: usize,
}

impl CameraCalibration {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        rect: Matrix3<f64>,
        extrinsic: Matrix3x4<f64>,
        image_width: usize,
        image_height: usize,
    ) -> Result<Self> {
        if !(fx > 0.0 && fy > 0.0) {
            return Err(Error::InvalidInput(format!(
                "focal lengths must be positive (fx={fx}, fy={fy})"
            )));
        }
        let err = (rect.transpose() * rect - Matrix3::identity()).amax();
        if !(err <= 1e-9) {
            return Err(Error::InvalidInput(format!(
                "rectification is not orthonormal (max |R^T R - I| = {err:e})"
            )));
        }
        if image_width == 0 || image_height == 0 {
            return Err(Error::InvalidInput("empty image size".into()));
        }
        Ok(CameraCalibration {
            fx,
            fy,
            cx,
            cy,
            rect,
            extrinsic,
            image_width,
            image_height,
        })
    }

    /// Identity rectification and extrinsics.
    pub fn pinhole(fx: f64, fy: f64, cx: f64, cy: f64, width: usize, height: usize) -> Result<Self> {
        Self::new(
            fx,
            fy,
            cx,
            cy,
            Matrix3::identity(),
            Matrix3x4::identity(),
            width,
            height,
        )
    }

    /// LiDAR frame to rectified camera frame.
    pub fn sensor_to_camera(&self, p: Vector3<f64>) -> Vector3<f64> {
        self.rect * (self.extrinsic * Vector4::new(p.x, p.y, p.z, 1.0))
    }

    /// Inverse of [`CameraCalibration::sensor_to_camera`].
    pub fn camera_to_sensor(&self, p: Vector3<f64>) -> Vector3<f64> {
        let rot = self.extrinsic.fixed_view::<3, 3>(0, 0).into_owned();
        let t = self.extrinsic.column(3).into_owned();
        let q = self.rect.transpose() * p - t;
        rot.try_inverse().unwrap_or_else(Matrix3::identity) * q
    }
}

/// Structured text description of a generated sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleAnnotation {
    pub weather: Weather,
    pub severity_level: u8,
    pub severity_value: f64,
    pub unit: String,
    pub time_of_day: TimeOfDay,
    pub lens: Lens,
    pub scene: String,
    pub prompt: String,
}

impl SampleAnnotation {
    pub fn new(spec: &WeatherSpec, scene: &str) -> Self {
        SampleAnnotation {
            weather: spec.weather,
            severity_level: spec.severity_level,
            severity_value: spec.severity_value,
            unit: spec.unit().to_string(),
            time_of_day: spec.time_of_day,
            lens: spec.lens,
            scene: scene.to_string(),
            prompt: render_prompt(spec, scene),
        }
    }
}

fn render_prompt(spec: &WeatherSpec, scene: &str) -> String {
    let when = match spec.time_of_day {
        TimeOfDay::Day => "daytime",
        TimeOfDay::Night => "nighttime",
    };
    let intensity = match spec.severity_level {
        1 => "light",
        2 => "moderate",
        _ => "heavy",
    };
    let mut prompt = match spec.weather {
        Weather::Clear => format!("A {when} {scene} in clear weather."),
        Weather::Fog => format!(
            "A {when} {scene} in {intensity} fog (attenuation {} m^-1).",
            spec.severity_value
        ),
        Weather::Rain => format!("A {when} {scene} in {intensity} rain ({} mm/hr).", spec.severity_value),
        Weather::Snow => format!(
            "A {when} {scene} in {intensity} snowfall ({} mm/hr).",
            spec.severity_value
        ),
    };
    match spec.lens {
        Lens::None => {}
        Lens::Raindrop => prompt.push_str(" Raindrops adhere to the camera lens."),
        Lens::Snowflake => prompt.push_str(" Snowflakes adhere to the camera lens."),
    }
    prompt
}
