//! End-to-end checks of the command surface: exit codes, artifacts, report
//! formats and the atomic-write contract.

use std::path::{Path, PathBuf};

use lumiparam::io::{self, HdrFormat};
use lumiparam::synth::{constant_depth, disc_panorama, Disc};
use lumiparam::types::{Direction, Light, LightSet, Rgb};
use lumiparam_cli::run;

fn run_cmd(args: &[&str]) -> lumiparam_cli::CommandResult {
    let mut argv = vec!["lumiparam".to_string()];
    argv.extend(args.iter().map(|s| s.to_string()));
    run(argv)
}

fn two_disc_fixture(dir: &Path) -> PathBuf {
    let discs = [
        Disc {
            center: Direction::new(0.0, 0.1, 1.0).unwrap(),
            angular_radius: 0.22,
            color: Rgb::new(60.0, 50.0, 40.0),
        },
        Disc {
            center: Direction::new(0.9, 0.2, -0.3).unwrap(),
            angular_radius: 0.18,
            color: Rgb::new(40.0, 45.0, 55.0),
        },
    ];
    let map = disc_panorama(128, 64, &discs, Rgb::splat(0.002));
    let path = dir.join("fixture.hdr");
    io::save_envmap(&map, &path, HdrFormat::Rgbe).unwrap();
    path
}

#[test]
fn extract_writes_parseable_lightset() {
    let dir = tempfile::tempdir().unwrap();
    let pano = two_disc_fixture(dir.path());
    let out = dir.path().join("lights.txt");
    let result = run_cmd(&["extract", pano.to_str().unwrap(), "-o", out.to_str().unwrap()]);
    assert_eq!(result.exit_code, 0);
    assert_eq!(result.artifacts, vec![out.clone()]);
    let set = io::load_lightset(&out).unwrap();
    assert_eq!(set.len(), 2);
}

#[test]
fn project_then_extract_recovers_direction() {
    let dir = tempfile::tempdir().unwrap();
    let truth_dir = Direction::new(0.3, 0.2, 0.9).unwrap();
    let set = LightSet::new(
        vec![Light::new(truth_dir, 2.5, 0.25, Rgb::new(30.0, 25.0, 20.0)).unwrap()],
        Rgb::BLACK,
    )
    .unwrap();
    let lights = dir.path().join("lights.txt");
    io::save_lightset(&set, &lights).unwrap();

    let env = dir.path().join("env.hdr");
    let result = run_cmd(&[
        "project",
        lights.to_str().unwrap(),
        "--size",
        "256x128",
        "-o",
        env.to_str().unwrap(),
    ]);
    assert_eq!(result.exit_code, 0);

    let out = dir.path().join("recovered.txt");
    let result = run_cmd(&["extract", env.to_str().unwrap(), "-o", out.to_str().unwrap()]);
    assert_eq!(result.exit_code, 0);
    let recovered = io::load_lightset(&out).unwrap();
    assert!(!recovered.is_empty());
    let angle = recovered.lights[0].direction.angle_to(truth_dir).to_degrees();
    assert!(angle < 2.0, "direction off by {angle} degrees");
}

#[test]
fn fit_missing_input_is_data_error_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("fit.txt");
    let result = run_cmd(&[
        "fit",
        dir.path().join("missing.hdr").to_str().unwrap(),
        "--n",
        "3",
        "-o",
        out.to_str().unwrap(),
    ]);
    assert_eq!(result.exit_code, 2);
    assert!(result.artifacts.is_empty());
    assert!(!out.exists(), "no artifact may be written on failure");
}

#[test]
fn unknown_flag_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let pano = two_disc_fixture(dir.path());
    let result =
        run_cmd(&["extract", pano.to_str().unwrap(), "--bogus", "-o", "x.txt"]);
    assert_eq!(result.exit_code, 1);
    assert!(result.artifacts.is_empty());
}

#[test]
fn unknown_subcommand_is_usage_error() {
    assert_eq!(run_cmd(&["frobnicate"]).exit_code, 1);
}

#[test]
fn relocate_round_trip_via_files() {
    let dir = tempfile::tempdir().unwrap();
    let set = LightSet::new(
        vec![Light::new(
            Direction::new(0.0, 0.0, 1.0).unwrap(),
            2.0,
            0.1,
            Rgb::splat(5.0),
        )
        .unwrap()],
        Rgb::splat(0.1),
    )
    .unwrap();
    let lights = dir.path().join("lights.txt");
    io::save_lightset(&set, &lights).unwrap();
    let out = dir.path().join("moved.txt");
    let result = run_cmd(&[
        "relocate",
        lights.to_str().unwrap(),
        "--t",
        "0,0,1",
        "-o",
        out.to_str().unwrap(),
    ]);
    assert_eq!(result.exit_code, 0);
    let moved = io::load_lightset(&out).unwrap();
    assert!((moved.lights[0].distance - 1.0).abs() < 1e-12);
    assert!((moved.lights[0].solid_angle - 0.4).abs() < 1e-12);
}

#[test]
fn warp_and_crop_write_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let pano = two_disc_fixture(dir.path());
    let depth = dir.path().join("depth.pfm");
    io::save_depthmap(&constant_depth(128, 64, 3.0), &depth).unwrap();

    let warped = dir.path().join("warped.hdr");
    let result = run_cmd(&[
        "warp",
        pano.to_str().unwrap(),
        "--depth",
        depth.to_str().unwrap(),
        "--t",
        "-1,0,0",
        "-o",
        warped.to_str().unwrap(),
    ]);
    assert_eq!(result.exit_code, 0);
    assert!(io::load_envmap(&warped).is_ok());

    let crop = dir.path().join("crop.hdr");
    let result = run_cmd(&[
        "crop",
        pano.to_str().unwrap(),
        "--az",
        "45",
        "--el",
        "0",
        "--fov",
        "90",
        "--size",
        "64x48",
        "-o",
        crop.to_str().unwrap(),
    ]);
    assert_eq!(result.exit_code, 0);
    assert!(crop.exists());
}

#[test]
fn render_from_lights_and_map_with_png() {
    let dir = tempfile::tempdir().unwrap();
    let set = LightSet::new(
        vec![Light::new(
            Direction::new(0.0, 0.5, 1.0).unwrap(),
            3.0,
            0.4,
            Rgb::new(4.0, 3.0, 2.0),
        )
        .unwrap()],
        Rgb::splat(0.05),
    )
    .unwrap();
    let lights = dir.path().join("lights.txt");
    io::save_lightset(&set, &lights).unwrap();
    let probe = dir.path().join("probe.hdr");
    let png = dir.path().join("probe.png");
    let result = run_cmd(&[
        "render",
        lights.to_str().unwrap(),
        "--res",
        "32",
        "-o",
        probe.to_str().unwrap(),
        "--png",
        png.to_str().unwrap(),
        "--exposure",
        "2.0",
    ]);
    assert_eq!(result.exit_code, 0);
    assert_eq!(result.artifacts.len(), 2);
    assert!(probe.exists() && png.exists());

    let pano = two_disc_fixture(dir.path());
    let probe2 = dir.path().join("probe2.hdr");
    let result = run_cmd(&[
        "render",
        pano.to_str().unwrap(),
        "--res",
        "32",
        "-o",
        probe2.to_str().unwrap(),
    ]);
    assert_eq!(result.exit_code, 0);
}

#[test]
fn render_failure_leaves_no_partial_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let set = LightSet::new(vec![], Rgb::splat(0.2)).unwrap();
    let lights = dir.path().join("lights.txt");
    io::save_lightset(&set, &lights).unwrap();
    let probe = dir.path().join("probe.hdr");
    // The PNG path points into a directory that does not exist, so staging
    // it fails after the probe artifact was already prepared.
    let result = run_cmd(&[
        "render",
        lights.to_str().unwrap(),
        "--res",
        "32",
        "-o",
        probe.to_str().unwrap(),
        "--png",
        dir.path().join("no-such-dir/probe.png").to_str().unwrap(),
    ]);
    assert_eq!(result.exit_code, 2);
    assert!(result.artifacts.is_empty());
    assert!(!probe.exists(), "probe must not be committed when the command fails");
}

#[test]
fn evaluate_writes_csv_report() {
    let dir = tempfile::tempdir().unwrap();
    let pano = two_disc_fixture(dir.path());
    let depth = dir.path().join("depth.pfm");
    io::save_depthmap(&constant_depth(128, 64, 3.0), &depth).unwrap();
    let lights = dir.path().join("lights.txt");
    let result = run_cmd(&["extract", pano.to_str().unwrap(), "-o", lights.to_str().unwrap()]);
    assert_eq!(result.exit_code, 0);

    let report = dir.path().join("report.csv");
    let result = run_cmd(&[
        "evaluate",
        lights.to_str().unwrap(),
        pano.to_str().unwrap(),
        "--depth",
        depth.to_str().unwrap(),
        "-o",
        report.to_str().unwrap(),
    ]);
    assert_eq!(result.exit_code, 0);
    let contents = std::fs::read_to_string(&report).unwrap();
    let mut lines = contents.lines();
    assert_eq!(lines.next(), Some("offset_x,offset_y,offset_z,rmse,si_rmse"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 3, "default offsets are center and +/-1m");
    assert!(rows[1].starts_with("-1,0,0,"));
    for row in rows {
        assert_eq!(row.split(',').count(), 5);
        let fields: Vec<f64> =
            row.split(',').map(|f| f.parse().unwrap()).collect();
        assert!(fields[4] <= fields[3] + 1e-12, "si_rmse must not exceed rmse");
    }
}

#[test]
fn fit_writes_trace_csv() {
    let dir = tempfile::tempdir().unwrap();
    let pano = two_disc_fixture(dir.path());
    let out = dir.path().join("fit.txt");
    let trace = dir.path().join("trace.csv");
    let result = run_cmd(&[
        "fit",
        pano.to_str().unwrap(),
        "--n",
        "2",
        "--iters",
        "40",
        "--lr",
        "0.01",
        "--seed",
        "3",
        "-o",
        out.to_str().unwrap(),
        "--trace",
        trace.to_str().unwrap(),
    ]);
    assert_eq!(result.exit_code, 0);
    assert_eq!(result.artifacts.len(), 2);
    let contents = std::fs::read_to_string(&trace).unwrap();
    let mut lines = contents.lines();
    assert_eq!(lines.next(), Some("iteration,loss"));
    assert_eq!(lines.count(), 41, "one row per iteration plus the final loss");
    assert!(io::load_lightset(&out).unwrap().len() == 2);
}

#[test]
fn fit_is_deterministic_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let pano = two_disc_fixture(dir.path());
    let out_a = dir.path().join("a.txt");
    let out_b = dir.path().join("b.txt");
    for out in [&out_a, &out_b] {
        let result = run_cmd(&[
            "fit",
            pano.to_str().unwrap(),
            "--n",
            "2",
            "--iters",
            "30",
            "--seed",
            "5",
            "-o",
            out.to_str().unwrap(),
        ]);
        assert_eq!(result.exit_code, 0);
    }
    assert_eq!(
        std::fs::read_to_string(&out_a).unwrap(),
        std::fs::read_to_string(&out_b).unwrap()
    );
}

#[test]
fn refine_requires_matching_light_count() {
    let dir = tempfile::tempdir().unwrap();
    let pano = two_disc_fixture(dir.path());
    let set = LightSet::new(
        vec![Light::new(
            Direction::new(0.0, 0.1, 1.0).unwrap(),
            3.0,
            0.2,
            Rgb::splat(10.0),
        )
        .unwrap()],
        Rgb::BLACK,
    )
    .unwrap();
    let lights = dir.path().join("one.txt");
    io::save_lightset(&set, &lights).unwrap();
    let out = dir.path().join("refined.txt");
    let result = run_cmd(&[
        "refine",
        lights.to_str().unwrap(),
        pano.to_str().unwrap(),
        "-o",
        out.to_str().unwrap(),
    ]);
    assert_eq!(result.exit_code, 2, "two sources vs one light must fail");
    assert!(!out.exists());
}

#[test]
fn refine_smoke_on_matching_extraction() {
    let dir = tempfile::tempdir().unwrap();
    let pano = two_disc_fixture(dir.path());
    let lights = dir.path().join("lights.txt");
    assert_eq!(
        run_cmd(&["extract", pano.to_str().unwrap(), "-o", lights.to_str().unwrap()]).exit_code,
        0
    );
    let out = dir.path().join("refined.txt");
    let result = run_cmd(&[
        "refine",
        lights.to_str().unwrap(),
        pano.to_str().unwrap(),
        "-o",
        out.to_str().unwrap(),
    ]);
    assert_eq!(result.exit_code, 0);
    let refined = io::load_lightset(&out).unwrap();
    assert_eq!(refined.len(), 2);
    assert!(refined.lights.iter().all(|l| l.color.is_non_negative()));
}
