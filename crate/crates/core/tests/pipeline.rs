mod common;

use wxdepth::io;
use wxdepth::pipeline::{run_dataset, GenerationConfig};
use wxdepth::{Error, Lens, TimeOfDay, Weather};

fn config(input: &std::path::Path, output: &std::path::Path) -> GenerationConfig {
    let mut cfg = GenerationConfig::new(input, output);
    cfg.weathers = vec![Weather::Fog];
    cfg.global_seed = 7;
    cfg
}

#[test]
fn paired_clean_records_and_stats() {
    let tmp = tempfile::tempdir().unwrap();
    let input = tmp.path().join("in");
    common::write_input_tree(&input, 2, 48, 32, 1);
    let out = tmp.path().join("out");
    let summary = run_dataset(&config(&input, &out)).unwrap();

    let m = &summary.manifest;
    assert!(m.failures.is_empty());
    assert_eq!(m.records.len(), 8);
    assert_eq!(m.records.iter().filter(|r| r.clean_reference).count(), 2);
    for r in m.records.iter().filter(|r| !r.clean_reference) {
        let clean = r.clean_rgb.as_deref().unwrap();
        assert!(out.join(clean).is_file(), "{clean}");
        assert!(out.join(r.clean_sparse_depth.as_deref().unwrap()).is_file());
    }
    m.verify(&out).unwrap();

    let s = &summary.stats;
    assert_eq!(s.frames_processed, 2);
    assert_eq!(s.records_per_weather["fog"], 6);
    assert_eq!(s.range_histograms["fog"].len(), 4);
    assert!(s.range_trends["fog"].monotone_degradation);

    let ann = io::decode_annotation(&std::fs::read(out.join(&m.records[1].annotation)).unwrap()).unwrap();
    assert_eq!(ann.weather, m.records[1].spec.weather);
    assert!(out.join("manifest.json").is_file() && out.join("stats.json").is_file());
}

#[test]
fn output_is_independent_of_output_root() {
    let tmp = tempfile::tempdir().unwrap();
    let input = tmp.path().join("in");
    common::write_input_tree(&input, 2, 40, 24, 2);
    run_dataset(&config(&input, &tmp.path().join("x"))).unwrap();
    run_dataset(&config(&input, &tmp.path().join("nested/y"))).unwrap();
    assert_eq!(
        common::snapshot_tree(&tmp.path().join("x")),
        common::snapshot_tree(&tmp.path().join("nested/y"))
    );
}

#[test]
fn seed_changes_output() {
    let tmp = tempfile::tempdir().unwrap();
    let input = tmp.path().join("in");
    common::write_input_tree(&input, 1, 40, 24, 3);
    let a = run_dataset(&config(&input, &tmp.path().join("a"))).unwrap();
    let mut cfg = config(&input, &tmp.path().join("b"));
    cfg.global_seed = 8;
    let b = run_dataset(&cfg).unwrap();
    let cloud = |s: &wxdepth::pipeline::RunSummary| {
        s.manifest
            .records
            .iter()
            .find(|r| r.spec.severity_level == 2)
            .unwrap()
            .digests
            .clone()
    };
    assert_ne!(cloud(&a), cloud(&b));
}

#[test]
fn missing_directory_is_a_layout_error() {
    let tmp = tempfile::tempdir().unwrap();
    let input = tmp.path().join("in");
    common::write_input_tree(&input, 1, 16, 16, 4);
    std::fs::remove_dir_all(input.join("groundtruth")).unwrap();
    let err = run_dataset(&config(&input, &tmp.path().join("out"))).unwrap_err();
    assert!(matches!(err, Error::Layout(_)), "{err}");
}

#[test]
fn same_input_and_output_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    common::write_input_tree(tmp.path(), 1, 16, 16, 4);
    assert!(matches!(
        run_dataset(&config(tmp.path(), tmp.path())),
        Err(Error::InvalidInput(_))
    ));
}

#[test]
fn broken_frame_is_recorded_and_run_continues() {
    let tmp = tempfile::tempdir().unwrap();
    let input = tmp.path().join("in");
    common::write_input_tree(&input, 3, 32, 20, 5);
    std::fs::write(input.join("velodyne/000001.bin"), [1u8, 2, 3]).unwrap();
    let summary = run_dataset(&config(&input, &tmp.path().join("out"))).unwrap();
    assert!(summary.has_failures());
    assert_eq!(summary.manifest.failures.len(), 1);
    assert_eq!(summary.manifest.failures[0].frame_id, "000001");
    assert_eq!(summary.manifest.records.len(), 8);
    assert_eq!(summary.stats.frames_failed, 1);
}

#[test]
fn night_needs_drop_in_image() {
    let tmp = tempfile::tempdir().unwrap();
    let input = tmp.path().join("in");
    common::write_input_tree(&input, 2, 32, 20, 6);
    let night = common::gradient_image(32, 20, 9.0);
    io::write_file(&input.join("night/000000.png"), &io::encode_rgb_png(&night).unwrap()).unwrap();
    let mut cfg = config(&input, &tmp.path().join("out"));
    cfg.levels = vec![1];
    cfg.times = vec![TimeOfDay::Night];
    cfg.emit_paired_clean = false;
    let summary = run_dataset(&cfg).unwrap();
    assert_eq!(summary.manifest.records.len(), 1);
    assert_eq!(summary.manifest.records[0].frame_id, "000000");
    assert_eq!(summary.manifest.failures.len(), 1);
    assert_eq!(summary.manifest.records[0].clean_rgb, None);
}

#[test]
fn lens_without_masks_fails_that_condition_only() {
    let tmp = tempfile::tempdir().unwrap();
    let input = tmp.path().join("in");
    common::write_input_tree(&input, 1, 32, 20, 7);
    std::fs::remove_file(input.join("masks/sf_000.png")).unwrap();
    let mut cfg = config(&input, &tmp.path().join("out"));
    cfg.weathers = vec![Weather::Snow];
    cfg.levels = vec![2];
    cfg.lenses = vec![Lens::Raindrop, Lens::Snowflake];
    let summary = run_dataset(&cfg).unwrap();
    assert_eq!(summary.manifest.records.len(), 2);
    let failure = &summary.manifest.failures[0];
    assert_eq!(failure.condition.as_deref(), Some("snow_l2_day_snowflake"));
}

fn clean_sample(seed: u64) -> wxdepth::pipeline::CleanSample {
    let mut r = common::rng(seed);
    wxdepth::pipeline::CleanSample {
        image: common::random_image(&mut r, 48, 32),
        cloud: common::random_cloud(&mut r, 2000),
        gt: common::random_depth(&mut r, 48, 32, 0.1),
        calib: common::calibration(48, 32),
    }
}

#[test]
fn clear_sample_passes_through() {
    use wxdepth::pipeline::{generate_sample, PipelineParams};
    use wxdepth::projection::project_cloud;
    let clean = clean_sample(20);
    let params = PipelineParams::default();
    let spec = wxdepth::make_weather_spec(Weather::Clear, 0, TimeOfDay::Day, Lens::None, 42).unwrap();
    let out = generate_sample(&clean, &spec, "f", "road", &[], &params).unwrap();
    assert_eq!(out.image, clean.image);
    assert_eq!(out.cloud, clean.cloud);
    assert_eq!(
        out.sparse,
        project_cloud(&clean.cloud, &clean.calib, &params.projection)
    );
}

#[test]
fn heavy_rain_with_raindrops_touches_both_sensors() {
    use wxdepth::pipeline::{generate_sample, PipelineParams};
    use wxdepth::rgb::{OccluderKind, OccluderMask};
    let clean = clean_sample(21);
    let params = PipelineParams::default();
    let masks = [OccluderMask::new(common::disc_mask(12), OccluderKind::Raindrop).unwrap()];
    let spec = wxdepth::make_weather_spec(Weather::Rain, 3, TimeOfDay::Day, Lens::Raindrop, 42).unwrap();
    assert_eq!(spec.severity_value, 200.0);
    let a = generate_sample(&clean, &spec, "f", "road", &masks, &params).unwrap();
    let b = generate_sample(&clean, &spec, "f", "road", &masks, &params).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.image, clean.image);
    assert_ne!(a.cloud, clean.cloud);
    assert_eq!(a.annotation.severity_value, 200.0);
    assert_eq!(a.annotation.lens, Lens::Raindrop);
}

#[test]
fn empty_selection_gives_empty_manifest() {
    use wxdepth::pipeline::FrameSelection;
    let tmp = tempfile::tempdir().unwrap();
    let input = tmp.path().join("in");
    common::write_input_tree(&input, 2, 16, 16, 8);
    let mut cfg = config(&input, &tmp.path().join("out"));
    cfg.frames = FrameSelection::List(Vec::new());
    let summary = run_dataset(&cfg).unwrap();
    assert!(summary.manifest.records.is_empty());
    assert_eq!(summary.stats.total_records, 0);
    let stats: serde_json::Value =
        serde_json::from_slice(&std::fs::read(tmp.path().join("out/stats.json")).unwrap()).unwrap();
    assert_eq!(stats["frames_processed"], 0);
}
