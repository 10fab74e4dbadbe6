//! Dataset generation: walks a clean input tree, applies one weather
//! specification to both sensors of every selected frame, and writes images,
//! clouds, sparse depth maps, annotations, a manifest and statistics.
//!
//! Input layout (one file per frame id):
//!
//! ```text
//! <input>/image/<id>.png         clean RGB
//! <input>/velodyne/<id>.bin      clean point cloud
//! <input>/groundtruth/<id>.png   dense depth (16-bit PNG)
//! <input>/calib/<id>.txt         or a shared <input>/calib.txt
//! <input>/masks/{rd_,sf_}*.png   occluder library (optional)
//! <input>/night/<id>.png         pre-translated night image (optional)
//! <input>/wet_road/<id>.png      pre-translated wet road image (optional)
//! <input>/snow_road/<id>.png     pre-translated snow road image (optional)
//! <input>/scene/<id>.txt         free-text scene description (optional)
//! ```
//!
//! Output layout: `<output>/groundtruth/<id>.png` once per frame, then
//! `<output>/<condition>/{image,velodyne,sparse,annotation}/<id>.*`, plus
//! `manifest.json` and `stats.json`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{DepthGrid, ImageBuffer};
use crate::io;
use crate::lidar::{corrupt_fog, corrupt_rain, corrupt_snow, LidarWeatherParams};
use crate::metrics::{compare_weather_trend, default_range_edges, range_histogram, RangeHistogram, TrendReport};
use crate::model::{
    make_weather_spec, CameraCalibration, Lens, PointCloud, SampleAnnotation, TimeOfDay, Weather, WeatherSpec,
};
use crate::projection::{project_cloud, ProjectionParams};
use crate::rgb::{
    composite_lens_occlusion, fill_depth_holes, overlay_particles, synthesize_fog_image, FogImageParams,
    LensOcclusionParams, OccluderKind, OccluderMask, ParticleKind,
};
use crate::rng::{derive_key, hash_str, Modality, RngStream};

/// Tunables shared by every sample of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineParams {
    pub lidar: LidarWeatherParams,
    pub fog: FogImageParams,
    pub lens: LensOcclusionParams,
    pub projection: ProjectionParams,
    /// Rain streaks per megapixel per mm/hr.
    pub rain_particles_per_mm_hr: f64,
    /// Snowflakes per megapixel per mm/hr.
    pub snow_particles_per_mm_hr: f64,
    pub default_scene: String,
    pub histogram_edges: Vec<f64>,
}

impl Default for PipelineParams {
    fn default() -> Self {
        PipelineParams {
            lidar: LidarWeatherParams::default(),
            fog: FogImageParams::default(),
            lens: LensOcclusionParams::default(),
            projection: ProjectionParams::default(),
            rain_particles_per_mm_hr: 20.0,
            snow_particles_per_mm_hr: 1000.0,
            default_scene: "driving scene".to_string(),
            histogram_edges: default_range_edges(),
        }
    }
}

/// A clean input sample.
#[derive(Debug, Clone, PartialEq)]
pub struct CleanSample {
    pub image: ImageBuffer,
    pub cloud: PointCloud,
    pub gt: DepthGrid,
    pub calib: CameraCalibration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedSample {
    pub image: ImageBuffer,
    pub cloud: PointCloud,
    pub sparse: DepthGrid,
    pub gt: DepthGrid,
    pub annotation: SampleAnnotation,
}

fn occluder_kind(lens: Lens) -> Option<OccluderKind> {
    match lens {
        Lens::None => None,
        Lens::Raindrop => Some(OccluderKind::Raindrop),
        Lens::Snowflake => Some(OccluderKind::Snowflake),
    }
}

/// LiDAR half of the corruption.
pub fn corrupt_cloud(
    cloud: &PointCloud,
    spec: &WeatherSpec,
    frame_id: &str,
    params: &PipelineParams,
) -> Result<PointCloud> {
    let rng = RngStream::for_condition(spec.seed, frame_id, spec.weather, spec.severity_level, Modality::Lidar);
    match spec.weather {
        Weather::Clear => Ok(cloud.clone()),
        Weather::Fog => corrupt_fog(cloud, spec.severity_value, &params.lidar, &rng),
        Weather::Rain => corrupt_rain(cloud, spec.severity_value, &params.lidar, &rng),
        Weather::Snow => corrupt_snow(cloud, spec.severity_value, &params.lidar, &rng),
    }
}

/// Camera half of the corruption. `masks` is the full library; only masks
/// matching the lens condition are used.
pub fn corrupt_image(
    image: &ImageBuffer,
    gt: &DepthGrid,
    spec: &WeatherSpec,
    frame_id: &str,
    masks: &[OccluderMask],
    params: &PipelineParams,
) -> Result<ImageBuffer> {
    let particle_rng = || {
        RngStream::for_condition(
            spec.seed,
            frame_id,
            spec.weather,
            spec.severity_level,
            Modality::RgbParticles,
        )
    };
    let mut out = match spec.weather {
        Weather::Clear => image.clone(),
        Weather::Fog => {
            let dense = fill_depth_holes(gt, params.fog.sky_depth)?;
            synthesize_fog_image(image, &dense, spec.severity_value, &params.fog)?
        }
        Weather::Rain => overlay_particles(
            image,
            ParticleKind::RainStreak,
            params.rain_particles_per_mm_hr * spec.severity_value,
            &particle_rng(),
        )?,
        Weather::Snow => overlay_particles(
            image,
            ParticleKind::Snowflake,
            params.snow_particles_per_mm_hr * spec.severity_value,
            &particle_rng(),
        )?,
    };
    if let Some(kind) = occluder_kind(spec.lens) {
        let selected: Vec<OccluderMask> = masks.iter().filter(|m| m.kind() == kind).cloned().collect();
        if selected.is_empty() && params.lens.count_range.1 > 0 {
            return Err(Error::NoMasks(kind.as_str().to_string()));
        }
        let rng = RngStream::for_condition(
            spec.seed,
            frame_id,
            spec.weather,
            spec.severity_level,
            Modality::RgbLens,
        );
        out = composite_lens_occlusion(&out, &selected, &params.lens, &rng)?;
    }
    Ok(out)
}

/// Applies `spec` to both sensors and projects the corrupted cloud.
pub fn generate_sample(
    clean: &CleanSample,
    spec: &WeatherSpec,
    frame_id: &str,
    scene: &str,
    masks: &[OccluderMask],
    params: &PipelineParams,
) -> Result<GeneratedSample> {
    if clean.image.dims() != clean.gt.dims() {
        return Err(Error::DimensionMismatch {
            expected: clean.image.dims(),
            found: clean.gt.dims(),
        });
    }
    let image = corrupt_image(&clean.image, &clean.gt, spec, frame_id, masks, params)?;
    let cloud = corrupt_cloud(&clean.cloud, spec, frame_id, params)?;
    let sparse = project_cloud(&cloud, &clean.calib, &params.projection);
    Ok(GeneratedSample {
        image,
        cloud,
        sparse,
        gt: clean.gt.clone(),
        annotation: SampleAnnotation::new(spec, scene),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum FrameSelection {
    All,
    List(Vec<String>),
    /// Deterministic hash-based subset of roughly this fraction.
    Fraction(f64),
}

impl std::str::FromStr for FrameSelection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "all" {
            return Ok(FrameSelection::All);
        }
        if let Ok(f) = s.parse::<f64>() {
            if (0.0..=1.0).contains(&f) && s.contains('.') {
                return Ok(FrameSelection::Fraction(f));
            }
        }
        let ids: Vec<String> = s
            .split(',')
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .map(String::from)
            .collect();
        Ok(FrameSelection::List(ids))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerationConfig {
    pub input_root: PathBuf,
    pub output_root: PathBuf,
    pub weathers: Vec<Weather>,
    pub levels: Vec<u8>,
    pub times: Vec<TimeOfDay>,
    pub lenses: Vec<Lens>,
    pub global_seed: u64,
    pub frames: FrameSelection,
    pub emit_paired_clean: bool,
    pub jobs: usize,
    pub params: PipelineParams,
}

impl GenerationConfig {
    pub fn new(input_root: impl Into<PathBuf>, output_root: impl Into<PathBuf>) -> Self {
        GenerationConfig {
            input_root: input_root.into(),
            output_root: output_root.into(),
            weathers: vec![Weather::Fog, Weather::Rain, Weather::Snow],
            levels: vec![1, 2, 3],
            times: vec![TimeOfDay::Day],
            lenses: vec![Lens::None],
            global_seed: 0,
            frames: FrameSelection::All,
            emit_paired_clean: true,
            jobs: 1,
            params: PipelineParams::default(),
        }
    }

    /// The condition grid in output order. The clean reference is included
    /// when paired output is requested.
    pub fn conditions(&self) -> Result<Vec<WeatherSpec>> {
        let mut specs = BTreeMap::new();
        let mut add = |spec: WeatherSpec| {
            specs.insert((spec.weather, spec.severity_level, spec.time_of_day, spec.lens), spec);
        };
        for &weather in &self.weathers {
            let levels: &[u8] = if weather == Weather::Clear { &[0] } else { &self.levels };
            for &level in levels {
                for &time in &self.times {
                    for &lens in &self.lenses {
                        add(make_weather_spec(weather, level, time, lens, self.global_seed)?);
                    }
                }
            }
        }
        if self.emit_paired_clean {
            add(make_weather_spec(
                Weather::Clear,
                0,
                TimeOfDay::Day,
                Lens::None,
                self.global_seed,
            )?);
        }
        Ok(specs.into_values().collect())
    }

    fn validate(&self) -> Result<()> {
        let same = match (self.input_root.canonicalize(), self.output_root.canonicalize()) {
            (Ok(a), Ok(b)) => a == b,
            _ => self.input_root == self.output_root,
        };
        if same {
            return Err(Error::InvalidInput("output root must differ from input root".into()));
        }
        if let FrameSelection::Fraction(f) = self.frames {
            if !(0.0..=1.0).contains(&f) {
                return Err(Error::InvalidInput(format!("frame fraction {f} outside [0, 1]")));
            }
        }
        self.params.lidar.validate()?;
        self.params.lens.validate()?;
        self.conditions().map(|_| ())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub frame_id: String,
    pub condition: String,
    pub spec: WeatherSpec,
    pub clean_reference: bool,
    pub rgb: String,
    pub sparse_depth: String,
    pub gt_depth: String,
    pub cloud: String,
    pub annotation: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub clean_rgb: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub clean_sparse_depth: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub clean_cloud: Option<String>,
    /// SHA-256 of every file written for this record, keyed by relative path.
    pub digests: BTreeMap<String, String>,
    /// Sparse depth pixels clamped by the 16-bit encoding.
    pub depth_clamped: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FrameFailure {
    pub frame_id: String,
    pub condition: Option<String>,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct Manifest {
    pub records: Vec<ManifestRecord>,
    pub failures: Vec<FrameFailure>,
}

impl Manifest {
    /// Checks that every listed file exists and matches its digest.
    pub fn verify(&self, output_root: &Path) -> Result<()> {
        for record in &self.records {
            for (rel, digest) in &record.digests {
                let bytes = io::read_file(&output_root.join(rel))?;
                if &io::sha256_hex(&bytes) != digest {
                    return Err(Error::Codec(format!("digest mismatch for {rel}")));
                }
            }
            for rel in [
                &record.rgb,
                &record.sparse_depth,
                &record.gt_depth,
                &record.cloud,
                &record.annotation,
            ] {
                if !output_root.join(rel).is_file() {
                    return Err(Error::Codec(format!("missing {rel}")));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct StatsReport {
    pub frames_processed: usize,
    pub frames_failed: usize,
    pub total_records: usize,
    pub clean_references: usize,
    pub records_per_condition: BTreeMap<String, usize>,
    pub records_per_weather: BTreeMap<String, usize>,
    /// Range histograms of the corrupted clouds, by weather then level
    /// (level 0 is the clean cloud).
    pub range_histograms: BTreeMap<String, BTreeMap<u8, RangeHistogram>>,
    pub range_trends: BTreeMap<String, TrendReport>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub manifest: Manifest,
    pub stats: StatsReport,
}

impl RunSummary {
    pub fn has_failures(&self) -> bool {
        !self.manifest.failures.is_empty()
    }
}

const REQUIRED_DIRS: [&str; 3] = ["image", "velodyne", "groundtruth"];

fn discover_frames(root: &Path) -> Result<Vec<String>> {
    for dir in REQUIRED_DIRS {
        if !root.join(dir).is_dir() {
            return Err(Error::Layout(format!("missing `{dir}/` under {}", root.display())));
        }
    }
    if !root.join("calib").is_dir() && !root.join("calib.txt").is_file() {
        return Err(Error::Layout(format!(
            "missing `calib/` or `calib.txt` under {}",
            root.display()
        )));
    }
    let dir = root.join("velodyne");
    let mut ids: Vec<String> = std::fs::read_dir(&dir)
        .map_err(|e| Error::io(&dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "bin"))
        .filter_map(|p| p.file_stem().and_then(|s| s.to_str()).map(String::from))
        .collect();
    ids.sort();
    Ok(ids)
}

fn select_frames(all: Vec<String>, selection: &FrameSelection, seed: u64) -> Vec<String> {
    match selection {
        FrameSelection::All => all,
        FrameSelection::List(ids) => {
            let mut ids = ids.clone();
            ids.sort();
            ids.dedup();
            ids
        }
        FrameSelection::Fraction(f) => all
            .into_iter()
            .filter(|id| {
                let h = derive_key(&[seed, hash_str(id), 0x005E_1EC7]);
                (h as f64 / u64::MAX as f64) < *f
            })
            .collect(),
    }
}

struct FrameInputs {
    clean: CleanSample,
    scene: String,
    gt_png: Vec<u8>,
}

fn load_frame(root: &Path, id: &str, params: &PipelineParams) -> Result<FrameInputs> {
    let image = io::decode_rgb_png(&io::read_file(&root.join("image").join(format!("{id}.png")))?)?;
    let cloud = io::decode_cloud(&io::read_file(&root.join("velodyne").join(format!("{id}.bin")))?)?;
    let gt_png = io::read_file(&root.join("groundtruth").join(format!("{id}.png")))?;
    let gt = io::decode_depth_png(&gt_png)?;
    let per_frame = root.join("calib").join(format!("{id}.txt"));
    let calib_path = if per_frame.is_file() {
        per_frame
    } else {
        root.join("calib.txt")
    };
    let calib = io::parse_calibration(&io::read_text(&calib_path)?, image.width(), image.height())?;
    let scene_path = root.join("scene").join(format!("{id}.txt"));
    let scene = if scene_path.is_file() {
        io::read_text(&scene_path)?.trim().to_string()
    } else {
        params.default_scene.clone()
    };
    Ok(FrameInputs {
        clean: CleanSample {
            image,
            cloud,
            gt,
            calib,
        },
        scene,
        gt_png,
    })
}

/// Base image for a condition: night and road-surface variants come from
/// drop-in directories. Night requires its drop-in; road variants fall back
/// to the clean image.
fn base_image(root: &Path, id: &str, spec: &WeatherSpec, clean: &ImageBuffer) -> Result<ImageBuffer> {
    let road = match spec.weather {
        Weather::Rain => Some("wet_road"),
        Weather::Snow => Some("snow_road"),
        _ => None,
    };
    let mut candidates = Vec::new();
    if spec.time_of_day == TimeOfDay::Night {
        if let Some(road) = road {
            candidates.push(format!("night_{road}"));
        }
        candidates.push("night".to_string());
    } else if let Some(road) = road {
        candidates.push(road.to_string());
    }
    for dir in &candidates {
        let path = root.join(dir).join(format!("{id}.png"));
        if path.is_file() {
            let img = io::decode_rgb_png(&io::read_file(&path)?)?;
            if img.dims() != clean.dims() {
                return Err(Error::DimensionMismatch {
                    expected: clean.dims(),
                    found: img.dims(),
                });
            }
            return Ok(img);
        }
    }
    if spec.time_of_day == TimeOfDay::Night {
        return Err(Error::Layout(format!("night condition needs night/{id}.png")));
    }
    Ok(clean.clone())
}

struct Written {
    rel: String,
    digest: String,
}

fn write_rel(out_root: &Path, rel: String, bytes: &[u8]) -> Result<Written> {
    io::write_file(&out_root.join(&rel), bytes)?;
    Ok(Written {
        digest: io::sha256_hex(bytes),
        rel,
    })
}

struct FrameOutcome {
    records: Vec<ManifestRecord>,
    failures: Vec<FrameFailure>,
    histograms: BTreeMap<(Weather, u8), RangeHistogram>,
    processed: bool,
}

fn process_frame(config: &GenerationConfig, specs: &[WeatherSpec], masks: &[OccluderMask], id: &str) -> FrameOutcome {
    let mut outcome = FrameOutcome {
        records: Vec::new(),
        failures: Vec::new(),
        histograms: BTreeMap::new(),
        processed: false,
    };
    let params = &config.params;
    let inputs = match load_frame(&config.input_root, id, params) {
        Ok(i) => i,
        Err(e) => {
            log::warn!("frame {id}: {e}");
            outcome.failures.push(FrameFailure {
                frame_id: id.to_string(),
                condition: None,
                error: e.to_string(),
            });
            return outcome;
        }
    };
    let out_root = &config.output_root;
    let gt = match write_rel(out_root, format!("groundtruth/{id}.png"), &inputs.gt_png) {
        Ok(w) => w,
        Err(e) => {
            outcome.failures.push(FrameFailure {
                frame_id: id.to_string(),
                condition: None,
                error: e.to_string(),
            });
            return outcome;
        }
    };
    outcome.processed = true;

    let edges = &params.histogram_edges;
    if let Ok(h) = range_histogram(&inputs.clean.cloud, edges) {
        for &weather in &config.weathers {
            outcome.histograms.insert((weather, 0), h.clone());
        }
    }

    let clean_tag = WeatherSpec {
        weather: Weather::Clear,
        severity_level: 0,
        severity_value: 0.0,
        time_of_day: TimeOfDay::Day,
        lens: Lens::None,
        seed: config.global_seed,
    }
    .condition_tag();

    // corrupted clouds only depend on (weather, level)
    let mut clouds: BTreeMap<(Weather, u8), PointCloud> = BTreeMap::new();

    for spec in specs {
        let tag = spec.condition_tag();
        let result = (|| -> Result<ManifestRecord> {
            let key = (spec.weather, spec.severity_level);
            let cloud = match clouds.get(&key) {
                Some(c) => c.clone(),
                None => {
                    let c = corrupt_cloud(&inputs.clean.cloud, spec, id, params)?;
                    clouds.insert(key, c.clone());
                    c
                }
            };
            let base = base_image(&config.input_root, id, spec, &inputs.clean.image)?;
            let image = corrupt_image(&base, &inputs.clean.gt, spec, id, masks, params)?;
            let sparse = project_cloud(&cloud, &inputs.clean.calib, &params.projection);
            let annotation = SampleAnnotation::new(spec, &inputs.scene);

            let depth = io::encode_depth_png(&sparse)?;
            let files = [
                write_rel(out_root, format!("{tag}/image/{id}.png"), &io::encode_rgb_png(&image)?)?,
                write_rel(out_root, format!("{tag}/sparse/{id}.png"), &depth.bytes)?,
                write_rel(out_root, format!("{tag}/velodyne/{id}.bin"), &io::encode_cloud(&cloud))?,
                write_rel(
                    out_root,
                    format!("{tag}/annotation/{id}.json"),
                    &io::encode_annotation(&annotation),
                )?,
            ];
            let mut digests: BTreeMap<String, String> =
                files.iter().map(|w| (w.rel.clone(), w.digest.clone())).collect();
            digests.insert(gt.rel.clone(), gt.digest.clone());
            let [rgb, sparse_rel, cloud_rel, annotation_rel] = files.map(|w| w.rel);

            let is_clean = spec.is_clean();
            let paired = config.emit_paired_clean && !is_clean;
            let clean_path = |kind: &str, ext: &str| paired.then(|| format!("{clean_tag}/{kind}/{id}.{ext}"));
            Ok(ManifestRecord {
                frame_id: id.to_string(),
                condition: tag.clone(),
                spec: *spec,
                clean_reference: is_clean,
                rgb,
                sparse_depth: sparse_rel,
                gt_depth: gt.rel.clone(),
                cloud: cloud_rel,
                annotation: annotation_rel,
                clean_rgb: clean_path("image", "png"),
                clean_sparse_depth: clean_path("sparse", "png"),
                clean_cloud: clean_path("velodyne", "bin"),
                digests,
                depth_clamped: depth.clamped,
            })
        })();
        match result {
            Ok(record) => {
                if spec.weather != Weather::Clear && spec.severity_level > 0 {
                    let key = (spec.weather, spec.severity_level);
                    if let std::collections::btree_map::Entry::Vacant(e) = outcome.histograms.entry(key) {
                        if let Ok(h) = range_histogram(&clouds[&key], edges) {
                            e.insert(h);
                        }
                    }
                }
                outcome.records.push(record);
            }
            Err(e) => {
                log::warn!("frame {id} [{tag}]: {e}");
                outcome.failures.push(FrameFailure {
                    frame_id: id.to_string(),
                    condition: Some(tag),
                    error: e.to_string(),
                });
            }
        }
    }
    outcome
}

fn build_stats(
    outcomes: &[FrameOutcome],
    records: &[ManifestRecord],
    failures: &[FrameFailure],
) -> Result<StatsReport> {
    let mut stats = StatsReport {
        frames_processed: outcomes.iter().filter(|o| o.processed).count(),
        frames_failed: {
            let mut ids: Vec<&str> = failures.iter().map(|f| f.frame_id.as_str()).collect();
            ids.sort();
            ids.dedup();
            ids.len()
        },
        total_records: records.len(),
        clean_references: records.iter().filter(|r| r.clean_reference).count(),
        ..Default::default()
    };
    for r in records {
        *stats.records_per_condition.entry(r.condition.clone()).or_default() += 1;
        *stats.records_per_weather.entry(r.spec.weather.to_string()).or_default() += 1;
    }
    for outcome in outcomes {
        for ((weather, level), h) in &outcome.histograms {
            let by_level = stats.range_histograms.entry(weather.to_string()).or_default();
            match by_level.get_mut(level) {
                Some(acc) => acc.merge(h)?,
                None => {
                    by_level.insert(*level, h.clone());
                }
            }
        }
    }
    stats.range_histograms.remove(Weather::Clear.as_str());
    stats.range_trends = stats
        .range_histograms
        .iter()
        .map(|(w, hists)| (w.clone(), compare_weather_trend(hists)))
        .collect();
    Ok(stats)
}

fn to_json(value: &impl Serialize) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(value).expect("report serializes");
    out.push(b'\n');
    out
}

/// Runs the full generation. Configuration and layout problems are errors;
/// per-frame problems are recorded in the manifest and the run continues.
pub fn run_dataset(config: &GenerationConfig) -> Result<RunSummary> {
    config.validate()?;
    let specs = config.conditions()?;
    let all = discover_frames(&config.input_root)?;
    let frames = select_frames(all, &config.frames, config.global_seed);
    let masks: Vec<OccluderMask> = io::load_mask_library(&config.input_root.join("masks"))?
        .into_iter()
        .map(|(_, m)| m)
        .collect();
    std::fs::create_dir_all(&config.output_root).map_err(|e| Error::io(&config.output_root, e))?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.jobs.max(1))
        .build()
        .map_err(|e| Error::InvalidInput(format!("cannot start worker pool: {e}")))?;
    let outcomes: Vec<FrameOutcome> = pool.install(|| {
        frames
            .par_iter()
            .map(|id| process_frame(config, &specs, &masks, id))
            .collect()
    });

    let mut records: Vec<ManifestRecord> = outcomes.iter().flat_map(|o| o.records.iter().cloned()).collect();
    records.sort_by(|a, b| (&a.frame_id, &a.condition).cmp(&(&b.frame_id, &b.condition)));
    let mut failures: Vec<FrameFailure> = outcomes.iter().flat_map(|o| o.failures.iter().cloned()).collect();
    failures.sort();

    let stats = build_stats(&outcomes, &records, &failures)?;
    let manifest = Manifest { records, failures };
    io::write_file(&config.output_root.join("manifest.json"), &to_json(&manifest))?;
    io::write_file(&config.output_root.join("stats.json"), &to_json(&stats))?;
    Ok(RunSummary { manifest, stats })
}
