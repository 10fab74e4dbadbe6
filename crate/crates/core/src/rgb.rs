//! Camera-side weather: fog from the atmospheric scattering model, in-air
//! particle overlays, and lens-attached occluder compositing.

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{DepthGrid, Grid, ImageBuffer};
use crate::rng::RngStream;

#[derive(Debug, Clone, PartialEq)]
pub struct FogImageParams {
    pub airlight: [f64; 3],
    /// Distance assigned to holes above the highest measurement of a column.
    pub sky_depth: f64,
}

impl Default for FogImageParams {
    fn default() -> Self {
        FogImageParams {
            airlight: [0.8, 0.8, 0.8],
            sky_depth: 1000.0,
        }
    }
}

/// Fills every invalid pixel: pixels above the top-most valid pixel of their
/// column get `sky_depth`, all others copy the nearest valid pixel (Euclidean
/// pixel distance, ties to the smaller row then column).
pub fn fill_depth_holes(depth: &DepthGrid, sky_depth: f64) -> Result<DepthGrid> {
    if !(sky_depth > 0.0 && sky_depth.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "sky depth must be positive, got {sky_depth}"
        )));
    }
    if depth.valid_count() == 0 {
        return Err(Error::EmptyDepth);
    }
    let (w, h) = depth.dims();
    let top_valid: Vec<Option<usize>> = (0..w).map(|col| (0..h).find(|&row| depth.is_valid(row, col))).collect();

    let rows: Vec<Vec<f64>> = (0..h)
        .into_par_iter()
        .map(|row| {
            (0..w)
                .map(|col| {
                    if depth.is_valid(row, col) {
                        depth.get(row, col)
                    } else if top_valid[col].is_some_and(|top| row < top) {
                        sky_depth
                    } else {
                        let (r, c) = nearest_valid(depth, row, col);
                        depth.get(r, c)
                    }
                })
                .collect()
        })
        .collect();
    DepthGrid::new(w, h, rows.concat())
}

/// Ring search outward from `(row, col)`; stops once the ring's minimum
/// possible distance exceeds the best found.
fn nearest_valid(depth: &DepthGrid, row: usize, col: usize) -> (usize, usize) {
    let (w, h) = depth.dims();
    let (row, col) = (row as i64, col as i64);
    let mut best: Option<(i64, usize, usize)> = None;
    let max_ring = w.max(h) as i64;
    for ring in 1..=max_ring {
        if let Some((d2, _, _)) = best {
            if ring * ring > d2 {
                break;
            }
        }
        let mut visit = |r: i64, c: i64| {
            if r < 0 || c < 0 || r >= h as i64 || c >= w as i64 {
                return;
            }
            let (ru, cu) = (r as usize, c as usize);
            if !depth.is_valid(ru, cu) {
                return;
            }
            let d2 = (r - row).pow(2) + (c - col).pow(2);
            let cand = (d2, ru, cu);
            if best.is_none_or(|b| cand < b) {
                best = Some(cand);
            }
        };
        for c in (col - ring)..=(col + ring) {
            visit(row - ring, c);
            visit(row + ring, c);
        }
        for r in (row - ring + 1)..=(row + ring - 1) {
            visit(r, col - ring);
            visit(r, col + ring);
        }
    }
    let (_, r, c) = best.expect("grid has a valid pixel");
    (r, c)
}

/// Homogeneous fog: `out = clean * t + A * (1 - t)` with `t = exp(-beta d)`.
pub fn synthesize_fog_image(
    clean: &ImageBuffer,
    depth: &DepthGrid,
    beta: f64,
    params: &FogImageParams,
) -> Result<ImageBuffer> {
    if clean.dims() != depth.dims() {
        return Err(Error::DimensionMismatch {
            expected: clean.dims(),
            found: depth.dims(),
        });
    }
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(Error::InvalidInput(format!("attenuation must be >= 0, got {beta}")));
    }
    if depth.valid_count() != depth.values().len() {
        return Err(Error::InvalidInput(
            "fog synthesis needs a fully valid depth map".into(),
        ));
    }
    let airlight = params.airlight;
    let data = clean
        .values()
        .par_chunks_exact(3)
        .zip(depth.values().par_iter())
        .flat_map_iter(|(px, &d)| {
            let t = (-beta * d).exp();
            (0..3).map(move |c| (px[c] * t + airlight[c] * (1.0 - t)).clamp(0.0, 1.0))
        })
        .collect();
    ImageBuffer::new(clean.width(), clean.height(), data)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParticleKind {
    RainStreak,
    Snowflake,
}

/// One rendered in-air particle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Particle {
    /// Anti-aliased segment from `(x0, y0)` to `(x1, y1)`, blended additively.
    Streak {
        x0: f64,
        y0: f64,
        x1: f64,
        y1: f64,
        weight: f64,
    },
    /// Soft disc blended toward white.
    Disc { x: f64, y: f64, radius: f64, alpha: f64 },
}

impl Particle {
    /// Pixel-center coverage in `[0, 1]`.
    pub fn coverage(&self, px: f64, py: f64) -> f64 {
        match *self {
            Particle::Streak { x0, y0, x1, y1, .. } => {
                let (dx, dy) = (x1 - x0, y1 - y0);
                let len2 = dx * dx + dy * dy;
                let t = if len2 > 0.0 {
                    (((px - x0) * dx + (py - y0) * dy) / len2).clamp(0.0, 1.0)
                } else {
                    0.0
                };
                let (qx, qy) = (x0 + t * dx, y0 + t * dy);
                let dist = ((px - qx).powi(2) + (py - qy).powi(2)).sqrt();
                (1.0 - dist).max(0.0)
            }
            Particle::Disc { x, y, radius, .. } => {
                let dist = ((px - x).powi(2) + (py - y).powi(2)).sqrt();
                (radius + 0.5 - dist).clamp(0.0, 1.0)
            }
        }
    }

    /// Pixel bounding box `(row0, row1, col0, col1)` inclusive, clipped.
    fn bounds(&self, width: usize, height: usize) -> Option<(usize, usize, usize, usize)> {
        let (xmin, xmax, ymin, ymax) = match *self {
            Particle::Streak { x0, y0, x1, y1, .. } => {
                (x0.min(x1) - 1.0, x0.max(x1) + 1.0, y0.min(y1) - 1.0, y0.max(y1) + 1.0)
            }
            Particle::Disc { x, y, radius, .. } => {
                let r = radius + 0.5;
                (x - r, x + r, y - r, y + r)
            }
        };
        let clip = |lo: f64, hi: f64, n: usize| -> Option<(usize, usize)> {
            let lo = lo.floor().max(0.0);
            let hi = hi.ceil().min(n as f64 - 1.0);
            (lo <= hi).then_some((lo as usize, hi as usize))
        };
        let (c0, c1) = clip(xmin, xmax, width)?;
        let (r0, r1) = clip(ymin, ymax, height)?;
        Some((r0, r1, c0, c1))
    }
}

pub fn particle_count(density_per_megapixel: f64, width: usize, height: usize) -> usize {
    (density_per_megapixel * (width * height) as f64 / 1e6).round() as usize
}

/// Draws particle geometry; particle `i` uses stream index `i`.
pub fn sample_particles(
    kind: ParticleKind,
    count: usize,
    width: usize,
    height: usize,
    rng: &RngStream,
) -> Vec<Particle> {
    (0..count)
        .map(|i| {
            let mut r = rng.at(i as u64);
            let x = r.random::<f64>() * width as f64;
            let y = r.random::<f64>() * height as f64;
            match kind {
                ParticleKind::RainStreak => {
                    let length = r.random_range(8.0..=30.0);
                    let tilt = r.random_range(-15.0f64..=15.0).to_radians();
                    let weight = r.random_range(0.15..=0.4);
                    let (dx, dy) = (0.5 * length * tilt.sin(), 0.5 * length * tilt.cos());
                    Particle::Streak {
                        x0: x - dx,
                        y0: y - dy,
                        x1: x + dx,
                        y1: y + dy,
                        weight,
                    }
                }
                ParticleKind::Snowflake => Particle::Disc {
                    x,
                    y,
                    radius: r.random_range(1.0..=4.0),
                    alpha: r.random_range(0.3..=0.8),
                },
            }
        })
        .collect()
}

pub fn render_particles(image: &ImageBuffer, particles: &[Particle]) -> ImageBuffer {
    let mut out = image.clone();
    let (w, h) = image.dims();
    for p in particles {
        let Some((r0, r1, c0, c1)) = p.bounds(w, h) else {
            continue;
        };
        for row in r0..=r1 {
            for col in c0..=c1 {
                let cov = p.coverage(col as f64 + 0.5, row as f64 + 0.5);
                if cov <= 0.0 {
                    continue;
                }
                let px = out.pixel(row, col);
                let blended = match *p {
                    Particle::Streak { weight, .. } => px.map(|v| v + weight * cov),
                    Particle::Disc { alpha, .. } => {
                        let a = alpha * cov;
                        px.map(|v| v * (1.0 - a) + a)
                    }
                };
                out.set_pixel(row, col, blended);
            }
        }
    }
    out
}

/// Parametric rain-streak or snowflake overlay at `density_per_megapixel`.
pub fn overlay_particles(
    image: &ImageBuffer,
    kind: ParticleKind,
    density_per_megapixel: f64,
    rng: &RngStream,
) -> Result<ImageBuffer> {
    if !(density_per_megapixel >= 0.0 && density_per_megapixel.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "particle density must be >= 0, got {density_per_megapixel}"
        )));
    }
    let (w, h) = image.dims();
    let n = particle_count(density_per_megapixel, w, h);
    if n == 0 {
        return Ok(image.clone());
    }
    Ok(render_particles(image, &sample_particles(kind, n, w, h, rng)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OccluderKind {
    Raindrop,
    Snowflake,
}

impl OccluderKind {
    pub fn as_str(self) -> &'static str {
        match self {
            OccluderKind::Raindrop => "raindrop",
            OccluderKind::Snowflake => "snowflake",
        }
    }
}

/// Soft occluder silhouette.
#[derive(Debug, Clone, PartialEq)]
pub struct OccluderMask {
    alpha: Grid,
    kind: OccluderKind,
}

impl OccluderMask {
    pub fn new(alpha: Grid, kind: OccluderKind) -> Result<Self> {
        if alpha.values().iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidInput("occluder alpha outside [0, 1]".into()));
        }
        if alpha.values().iter().all(|&v| v == 0.0) {
            return Err(Error::InvalidInput("occluder mask has empty support".into()));
        }
        Ok(OccluderMask { alpha, kind })
    }

    pub fn alpha(&self) -> &Grid {
        &self.alpha
    }

    pub fn kind(&self) -> OccluderKind {
        self.kind
    }

    /// Bilinear resample to `width x height`.
    fn resized(&self, width: usize, height: usize) -> Grid {
        let (sw, sh) = self.alpha.dims();
        Grid::from_fn(width, height, |row, col| {
            let sx = ((col as f64 + 0.5) * sw as f64 / width as f64 - 0.5).clamp(0.0, (sw - 1) as f64);
            let sy = ((row as f64 + 0.5) * sh as f64 / height as f64 - 0.5).clamp(0.0, (sh - 1) as f64);
            let (x0, y0) = (sx.floor() as usize, sy.floor() as usize);
            let (x1, y1) = ((x0 + 1).min(sw - 1), (y0 + 1).min(sh - 1));
            let (fx, fy) = (sx - x0 as f64, sy - y0 as f64);
            let a = &self.alpha;
            let top = a.get(y0, x0) * (1.0 - fx) + a.get(y0, x1) * fx;
            let bottom = a.get(y1, x0) * (1.0 - fx) + a.get(y1, x1) * fx;
            (top * (1.0 - fy) + bottom * fy).clamp(0.0, 1.0)
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LensOcclusionParams {
    /// Inclusive occluder count range.
    pub count_range: (usize, usize),
    /// Occluder width as a fraction of image width.
    pub scale_range: (f64, f64),
    pub blur_sigma_range: (f64, f64),
    pub opacity_range: (f64, f64),
    pub snow_tint: [f64; 3],
    /// Probability that a snowflake is placed in the border band.
    pub boundary_bias: f64,
}

impl Default for LensOcclusionParams {
    fn default() -> Self {
        LensOcclusionParams {
            count_range: (2, 6),
            scale_range: (0.03, 0.15),
            blur_sigma_range: (2.0, 8.0),
            opacity_range: (0.4, 0.95),
            snow_tint: [0.85, 0.88, 0.95],
            boundary_bias: 0.7,
        }
    }
}

impl LensOcclusionParams {
    pub fn validate(&self) -> Result<()> {
        let ordered = |(lo, hi): (f64, f64)| lo <= hi && lo.is_finite() && hi.is_finite();
        if self.count_range.0 > self.count_range.1
            || !ordered(self.scale_range)
            || self.scale_range.0 <= 0.0
            || !ordered(self.blur_sigma_range)
            || self.blur_sigma_range.0 < 0.0
            || !ordered(self.opacity_range)
            || self.opacity_range.0 < 0.0
            || self.opacity_range.1 > 1.0
            || !(0.0..=1.0).contains(&self.boundary_bias)
        {
            return Err(Error::InvalidInput("invalid lens occlusion parameters".into()));
        }
        Ok(())
    }
}

/// Fraction of the image width/height treated as the border band.
const BORDER_BAND: f64 = 0.15;

/// A sampled occluder, in the order it is composited.
#[derive(Debug, Clone, PartialEq)]
pub struct PlacedOccluder {
    pub mask_index: usize,
    /// Top-left corner, may be negative (partially off-image).
    pub row: i64,
    pub col: i64,
    pub width: usize,
    pub height: usize,
    pub sigma: f64,
    pub opacity: f64,
}

/// Samples the occluder layout for a `width x height` image. Occluder `i`
/// draws from stream index `i + 1`; the count uses index 0.
pub fn sample_occluders(
    masks: &[OccluderMask],
    width: usize,
    height: usize,
    params: &LensOcclusionParams,
    rng: &RngStream,
) -> Result<Vec<PlacedOccluder>> {
    params.validate()?;
    let count = rng.at(0).random_range(params.count_range.0..=params.count_range.1);
    if count == 0 {
        return Ok(Vec::new());
    }
    if masks.is_empty() {
        return Err(Error::NoMasks("occluder".into()));
    }
    let (wf, hf) = (width as f64, height as f64);
    Ok((0..count)
        .map(|i| {
            let mut r = rng.at(i as u64 + 1);
            let mask_index = r.random_range(0..masks.len());
            let mask = &masks[mask_index];
            let scale = r.random_range(params.scale_range.0..=params.scale_range.1);
            let sigma = r.random_range(params.blur_sigma_range.0..=params.blur_sigma_range.1);
            let opacity = r.random_range(params.opacity_range.0..=params.opacity_range.1);
            let near_border = r.random::<f64>() < params.boundary_bias;
            let (u, v): (f64, f64) = (r.random(), r.random());
            let side: u8 = r.random_range(0..4);

            let (mw, mh) = mask.alpha.dims();
            let ow = (scale * wf).round().max(1.0) as usize;
            let oh = ((ow as f64) * mh as f64 / mw as f64).round().max(1.0) as usize;

            let (cx, cy) = if mask.kind == OccluderKind::Snowflake && near_border {
                let (bx, by) = (BORDER_BAND * wf, BORDER_BAND * hf);
                match side {
                    0 => (u * wf, v * by),
                    1 => (u * wf, hf - v * by),
                    2 => (u * bx, v * hf),
                    _ => (wf - u * bx, v * hf),
                }
            } else {
                (u * wf, v * hf)
            };
            PlacedOccluder {
                mask_index,
                row: (cy - oh as f64 / 2.0).round() as i64,
                col: (cx - ow as f64 / 2.0).round() as i64,
                width: ow,
                height: oh,
                sigma,
                opacity,
            }
        })
        .collect())
}

fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    if sigma <= 0.0 {
        return vec![1.0];
    }
    let radius = (3.0 * sigma).ceil() as i64;
    let weights: Vec<f64> = (-radius..=radius)
        .map(|k| (-(k * k) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = weights.iter().sum();
    weights.into_iter().map(|w| w / total).collect()
}

/// Gaussian blur of `image` restricted to rows `r0..r1`, cols `c0..c1`
/// (exclusive ends), reading neighbors clamped to the image.
fn blur_region(image: &ImageBuffer, sigma: f64, (r0, r1, c0, c1): (usize, usize, usize, usize)) -> Vec<[f64; 3]> {
    let kernel = gaussian_kernel(sigma);
    let radius = (kernel.len() / 2) as i64;
    let (w, h) = image.dims();
    let clamp = |v: i64, n: usize| v.clamp(0, n as i64 - 1) as usize;

    // horizontal pass over the rows the vertical pass will read
    let pr0 = (r0 as i64 - radius).max(0) as usize;
    let pr1 = ((r1 as i64 + radius) as usize).min(h);
    let rw = c1 - c0;
    let mut horiz = vec![[0.0; 3]; (pr1 - pr0) * rw];
    for row in pr0..pr1 {
        for col in c0..c1 {
            let mut acc = [0.0; 3];
            for (k, wk) in kernel.iter().enumerate() {
                let px = image.pixel(row, clamp(col as i64 + k as i64 - radius, w));
                for c in 0..3 {
                    acc[c] += wk * px[c];
                }
            }
            horiz[(row - pr0) * rw + (col - c0)] = acc;
        }
    }
    let mut out = Vec::with_capacity((r1 - r0) * rw);
    for row in r0..r1 {
        for col in c0..c1 {
            let mut acc = [0.0; 3];
            for (k, wk) in kernel.iter().enumerate() {
                let src = clamp(row as i64 + k as i64 - radius, h).clamp(pr0, pr1 - 1);
                let px = horiz[(src - pr0) * rw + (col - c0)];
                for c in 0..3 {
                    acc[c] += wk * px[c];
                }
            }
            out.push(acc);
        }
    }
    out
}

/// Composites pre-sampled occluders in order.
pub fn apply_occluders(
    image: &ImageBuffer,
    masks: &[OccluderMask],
    occluders: &[PlacedOccluder],
    params: &LensOcclusionParams,
) -> ImageBuffer {
    let mut current = image.clone();
    let (w, h) = image.dims();
    for occ in occluders {
        let mask = &masks[occ.mask_index];
        let alpha = mask.resized(occ.width, occ.height);
        let tint = match mask.kind {
            OccluderKind::Snowflake => params.snow_tint,
            OccluderKind::Raindrop => [1.0; 3],
        };
        let r0 = occ.row.max(0) as usize;
        let c0 = occ.col.max(0) as usize;
        let r1 = ((occ.row + occ.height as i64).max(0) as usize).min(h);
        let c1 = ((occ.col + occ.width as i64).max(0) as usize).min(w);
        if r0 >= r1 || c0 >= c1 || occ.opacity == 0.0 {
            continue;
        }
        let blurred = blur_region(&current, occ.sigma, (r0, r1, c0, c1));
        let rw = c1 - c0;
        for row in r0..r1 {
            for col in c0..c1 {
                let m = alpha.get((row as i64 - occ.row) as usize, (col as i64 - occ.col) as usize);
                let a = occ.opacity * m;
                if a == 0.0 {
                    continue;
                }
                let b = blurred[(row - r0) * rw + (col - c0)];
                let px = current.pixel(row, col);
                let mut out = [0.0; 3];
                for c in 0..3 {
                    out[c] = (1.0 - a) * px[c] + a * tint[c] * b[c];
                }
                current.set_pixel(row, col, out);
            }
        }
    }
    current
}

/// Randomized lens occlusion: sample a layout and composite it.
pub fn composite_lens_occlusion(
    image: &ImageBuffer,
    masks: &[OccluderMask],
    params: &LensOcclusionParams,
    rng: &RngStream,
) -> Result<ImageBuffer> {
    let (w, h) = image.dims();
    let occluders = sample_occluders(masks, w, h, params, rng)?;
    Ok(apply_occluders(image, masks, &occluders, params))
}
