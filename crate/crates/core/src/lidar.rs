//! Fog, rain and snow corruption of raw LiDAR point clouds.
//!
//! Every model splits the received signal into a hard-target echo attenuated
//! by two-way transmittance `exp(-2 alpha R)` and a particle response (fog
//! backscatter, rain droplet returns, snowflake occlusion). A return is
//! reported when it clears the detector noise floor. All randomness comes from
//! per-point keyed streams, so the output is independent of scheduling.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{Frame, Point, PointCloud};
use crate::rng::RngStream;

/// Response-model constants. Extinction for precipitation follows
/// `alpha = c1 * rate^c2` (m^-1, rate in mm/hr).
#[derive(Debug, Clone, PartialEq)]
pub struct LidarWeatherParams {
    pub noise_floor: f64,
    pub fog_backscatter_gain: f64,
    pub fog_scatter_range: (f64, f64),
    pub rain_extinction_coeffs: (f64, f64),
    pub rain_scatter_gain: f64,
    pub rain_range_jitter_base: f64,
    pub snow_extinction_coeffs: (f64, f64),
    pub snow_clutter_range: (f64, f64),
    pub snow_occlusion_gain: f64,
}

impl Default for LidarWeatherParams {
    fn default() -> Self {
        LidarWeatherParams {
            noise_floor: 0.005,
            fog_backscatter_gain: 0.5,
            fog_scatter_range: (1.5, 25.0),
            rain_extinction_coeffs: (2.0e-3, 0.6),
            rain_scatter_gain: 0.3,
            rain_range_jitter_base: 0.02,
            snow_extinction_coeffs: (1.5e-2, 0.7),
            snow_clutter_range: (0.5, 12.0),
            snow_occlusion_gain: 0.6,
        }
    }
}

impl LidarWeatherParams {
    pub fn validate(&self) -> Result<()> {
        let gains = [
            self.fog_backscatter_gain,
            self.rain_scatter_gain,
            self.rain_range_jitter_base,
            self.snow_occlusion_gain,
            self.rain_extinction_coeffs.0,
            self.rain_extinction_coeffs.1,
            self.snow_extinction_coeffs.0,
            self.snow_extinction_coeffs.1,
        ];
        if gains.iter().any(|g| !(*g >= 0.0 && g.is_finite())) {
            return Err(Error::InvalidInput("LiDAR gains must be finite and >= 0".into()));
        }
        for (name, (lo, hi)) in [
            ("fog_scatter_range", self.fog_scatter_range),
            ("snow_clutter_range", self.snow_clutter_range),
        ] {
            if !(lo >= 0.0 && lo < hi) {
                return Err(Error::InvalidInput(format!("{name} must satisfy 0 <= min < max")));
            }
        }
        if !(self.noise_floor > 0.0 && self.noise_floor < 1.0) {
            return Err(Error::InvalidInput("noise_floor must lie in (0, 1)".into()));
        }
        Ok(())
    }

    pub fn rain_extinction(&self, rain_rate: f64) -> f64 {
        let (c1, c2) = self.rain_extinction_coeffs;
        c1 * rain_rate.powf(c2)
    }

    pub fn snow_extinction(&self, snow_rate: f64) -> f64 {
        let (s1, s2) = self.snow_extinction_coeffs;
        s1 * snow_rate.powf(s2)
    }
}

/// Origin of an output return.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReturnKind {
    /// Hard-target echo of the source point (possibly jittered in range).
    Original,
    /// Fog backscatter that replaced the hard-target echo on the same ray.
    Relocated,
    /// Extra rain droplet return emitted alongside the source point.
    Spurious,
    /// Snowflake return that occluded the source point.
    Clutter,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TracedReturn {
    pub point: Point,
    pub source_index: usize,
    pub kind: ReturnKind,
}

/// Single-beam fog decision for a given scatter draw.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FogOutcome {
    Dropped,
    Relocated { range: f64, intensity: f64 },
    Kept { intensity: f64 },
}

/// `scatter_range` is the backscatter candidate range, `None` when the
/// scatter window does not intersect `(0, range)`.
pub fn fog_response(
    range: f64,
    intensity: f64,
    alpha: f64,
    scatter_range: Option<f64>,
    params: &LidarWeatherParams,
) -> FogOutcome {
    let hard = intensity * (-2.0 * alpha * range).exp();
    let soft = scatter_range
        .map(|rf| params.fog_backscatter_gain * alpha * (-2.0 * alpha * rf).exp())
        .unwrap_or(0.0);
    if hard < params.noise_floor && soft < params.noise_floor {
        FogOutcome::Dropped
    } else if soft > hard {
        FogOutcome::Relocated {
            // soft > 0 implies a candidate exists
            range: scatter_range.unwrap_or(range),
            intensity: soft.min(1.0),
        }
    } else {
        FogOutcome::Kept { intensity: hard }
    }
}

/// Uniform draw in `(lo, min(hi, limit))`, or `None` when empty. Always
/// consumes one draw.
fn window_draw(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64), limit: f64) -> Option<f64> {
    let u: f64 = rng.random();
    let hi = hi.min(limit);
    (hi > lo).then_some(lo + u * (hi - lo))
}

fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    lo + rng.random::<f64>() * (hi - lo)
}

fn traced(
    cloud: &PointCloud,
    per_point: impl Fn(usize, &Point, &mut ChaCha8Rng) -> [Option<TracedReturn>; 2] + Sync,
    rng: &RngStream,
) -> Vec<TracedReturn> {
    cloud
        .points()
        .par_iter()
        .enumerate()
        .map(|(i, p)| per_point(i, p, &mut rng.at(i as u64)))
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .flatten()
        .collect()
}

fn into_cloud(returns: Vec<TracedReturn>) -> PointCloud {
    PointCloud::from_valid(returns.into_iter().map(|r| r.point).collect(), Frame::Sensor)
}

fn check_sensor_frame(cloud: &PointCloud) -> Result<()> {
    if cloud.frame() != Frame::Sensor {
        return Err(Error::InvalidInput(
            "weather corruption expects a sensor-frame cloud".into(),
        ));
    }
    Ok(())
}

fn check_severity(value: f64, name: &str) -> Result<()> {
    if !(value >= 0.0 && value.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "{name} must be finite and >= 0, got {value}"
        )));
    }
    Ok(())
}

/// Fog corruption with per-return provenance.
pub fn corrupt_fog_traced(
    cloud: &PointCloud,
    alpha: f64,
    params: &LidarWeatherParams,
    rng: &RngStream,
) -> Vec<TracedReturn> {
    traced(
        cloud,
        |i, p, rng| {
            let range = p.range();
            let rf = window_draw(rng, params.fog_scatter_range, range);
            let ret = match fog_response(range, p.intensity, alpha, rf, params) {
                FogOutcome::Dropped => None,
                FogOutcome::Relocated { range, intensity } => Some(TracedReturn {
                    point: p.at_range(range, intensity),
                    source_index: i,
                    kind: ReturnKind::Relocated,
                }),
                FogOutcome::Kept { intensity } => Some(TracedReturn {
                    point: Point { intensity, ..*p },
                    source_index: i,
                    kind: ReturnKind::Original,
                }),
            };
            [ret, None]
        },
        rng,
    )
}

pub fn corrupt_fog(cloud: &PointCloud, alpha: f64, params: &LidarWeatherParams, rng: &RngStream) -> Result<PointCloud> {
    check_sensor_frame(cloud)?;
    check_severity(alpha, "fog attenuation")?;
    params.validate()?;
    if alpha == 0.0 {
        return Ok(cloud.clone());
    }
    Ok(into_cloud(corrupt_fog_traced(cloud, alpha, params, rng)))
}

/// Rain corruption with per-return provenance.
pub fn corrupt_rain_traced(
    cloud: &PointCloud,
    rain_rate: f64,
    params: &LidarWeatherParams,
    rng: &RngStream,
) -> Vec<TracedReturn> {
    let alpha = params.rain_extinction(rain_rate);
    let sigma = params.rain_range_jitter_base * (1.0 + rain_rate / 100.0);
    let scatter_prob_gain = params.rain_scatter_gain;
    let floor = params.noise_floor;
    traced(
        cloud,
        |i, p, rng| {
            let range = p.range();
            let jitter: f64 = StandardNormal.sample(rng);
            let scatter_u: f64 = rng.random();
            let spurious_range = window_draw(rng, (0.5, f64::INFINITY), range);
            let spurious_intensity = uniform(rng, floor, 2.0 * floor).min(1.0);

            let hard = p.intensity * (-2.0 * alpha * range).exp();
            let kept = (hard >= floor).then(|| {
                let jittered = if alpha > 0.0 {
                    (range + sigma * jitter).max(1e-3)
                } else {
                    range
                };
                TracedReturn {
                    point: p.at_range(jittered, hard),
                    source_index: i,
                    kind: ReturnKind::Original,
                }
            });
            let prob = (scatter_prob_gain * (1.0 - (-alpha * range).exp())).min(1.0);
            let spurious = spurious_range.filter(|_| scatter_u < prob).map(|r| TracedReturn {
                point: p.at_range(r, spurious_intensity),
                source_index: i,
                kind: ReturnKind::Spurious,
            });
            [kept, spurious]
        },
        rng,
    )
}

pub fn corrupt_rain(
    cloud: &PointCloud,
    rain_rate: f64,
    params: &LidarWeatherParams,
    rng: &RngStream,
) -> Result<PointCloud> {
    check_sensor_frame(cloud)?;
    check_severity(rain_rate, "rain rate")?;
    params.validate()?;
    if rain_rate == 0.0 {
        return Ok(cloud.clone());
    }
    Ok(into_cloud(corrupt_rain_traced(cloud, rain_rate, params, rng)))
}

/// Snow corruption with per-return provenance.
pub fn corrupt_snow_traced(
    cloud: &PointCloud,
    snow_rate: f64,
    params: &LidarWeatherParams,
    rng: &RngStream,
) -> Vec<TracedReturn> {
    let alpha = params.snow_extinction(snow_rate);
    let floor = params.noise_floor;
    traced(
        cloud,
        |i, p, rng| {
            let range = p.range();
            let occlusion_u: f64 = rng.random();
            let clutter_range = window_draw(rng, params.snow_clutter_range, range);
            let clutter_intensity = uniform(rng, floor, 3.0 * floor).min(1.0);

            let prob = (params.snow_occlusion_gain * (1.0 - (-alpha * range).exp())).min(1.0);
            if let Some(r) = clutter_range.filter(|_| occlusion_u < prob) {
                let ret = TracedReturn {
                    point: p.at_range(r, clutter_intensity),
                    source_index: i,
                    kind: ReturnKind::Clutter,
                };
                return [Some(ret), None];
            }
            let hard = p.intensity * (-2.0 * alpha * range).exp();
            let kept = (hard >= floor).then_some(TracedReturn {
                point: Point { intensity: hard, ..*p },
                source_index: i,
                kind: ReturnKind::Original,
            });
            [kept, None]
        },
        rng,
    )
}

pub fn corrupt_snow(
    cloud: &PointCloud,
    snow_rate: f64,
    params: &LidarWeatherParams,
    rng: &RngStream,
) -> Result<PointCloud> {
    check_sensor_frame(cloud)?;
    check_severity(snow_rate, "snow rate")?;
    params.validate()?;
    if snow_rate == 0.0 {
        return Ok(cloud.clone());
    }
    Ok(into_cloud(corrupt_snow_traced(cloud, snow_rate, params, rng)))
}
