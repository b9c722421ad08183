//! End-to-end checks of the command-line interface: argument handling,
//! config precedence, output layout, stats emission, and failure cleanup.

mod common;

use common::*;

use patchblend::io::{save_frame, save_sequence};
use patchblend::{Frame, Role};

fn stats_json(out_dir: &std::path::Path) -> serde_json::Value {
    let raw = read_bytes(&out_dir.join("stats.json"));
    serde_json::from_slice(&raw).expect("stats.json should be valid JSON")
}

#[test]
fn blend_fast_writes_all_frames_and_stats() {
    let tmp = tempfile::tempdir().unwrap();
    let (guide, style) = write_pair(tmp.path(), 8, 24, 24, 11);
    let out = tmp.path().join("out");

    let res = run(&[
        "blend",
        "--guide",
        guide.to_str().unwrap(),
        "--style",
        style.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--window",
        "3",
        "--emit-stats",
    ]);
    assert!(res.status.success(), "stderr: {}", String::from_utf8_lossy(&res.stderr));

    let names = png_names(&out);
    let expected: Vec<String> = (1..=8).map(|i| format!("{i:04}.png")).collect();
    assert_eq!(names, expected);

    let stats = stats_json(&out);
    assert_eq!(stats["schema"], 1);
    assert!(stats["nnf_count"].as_u64().unwrap() > 0);
    assert!(stats["peak_frames_resident"].as_u64().unwrap() >= 16);
    for phase in ["load", "process", "save"] {
        assert!(stats["phase_times_ms"][phase].is_u64(), "missing phase {phase}");
    }
    let cfg = &stats["effective_config"];
    assert_eq!(cfg["subcommand"], "blend");
    assert_eq!(cfg["mode"], "fast");
    assert_eq!(cfg["window"], 3);
    assert_eq!(cfg["tracking"], false);
}

#[test]
fn window_zero_round_trips_the_style_frames() {
    let tmp = tempfile::tempdir().unwrap();
    let (guide, style) = write_pair(tmp.path(), 4, 16, 16, 23);
    let out = tmp.path().join("out");

    let res = run(&[
        "blend",
        "--guide",
        guide.to_str().unwrap(),
        "--style",
        style.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--window",
        "0",
    ]);
    assert!(res.status.success(), "stderr: {}", String::from_utf8_lossy(&res.stderr));

    for i in 1..=4 {
        let name = format!("{i:04}.png");
        assert_eq!(
            read_bytes(&out.join(&name)),
            read_bytes(&style.join(&name)),
            "frame {name} should pass through untouched"
        );
    }
}

#[test]
fn identical_runs_agree_across_worker_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let (guide, style) = write_pair(tmp.path(), 6, 20, 20, 37);

    let run_once = |label: &str, workers: &str| -> (Vec<Vec<u8>>, u64) {
        let out = tmp.path().join(label);
        let res = run(&[
            "blend",
            "--guide",
            guide.to_str().unwrap(),
            "--style",
            style.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--window",
            "2",
            "--seed",
            "42",
            "--workers",
            workers,
            "--emit-stats",
        ]);
        assert!(res.status.success(), "stderr: {}", String::from_utf8_lossy(&res.stderr));
        let frames = (1..=6)
            .map(|i| read_bytes(&out.join(format!("{i:04}.png"))))
            .collect();
        let count = stats_json(&out)["nnf_count"].as_u64().unwrap();
        (frames, count)
    };

    let (a, count_a) = run_once("a", "1");
    let (b, count_b) = run_once("b", "4");
    let (c, count_c) = run_once("c", "4");
    assert_eq!(a, b, "worker count must not change the output bytes");
    assert_eq!(b, c, "repeat runs must be byte-identical");
    assert_eq!(count_a, count_b);
    assert_eq!(count_b, count_c);
}

#[test]
fn interpolate_single_keyframe_covers_the_video() {
    let tmp = tempfile::tempdir().unwrap();
    let guide = tmp.path().join("guide");
    save_sequence(&texture_video(10, 16, 16, 51, Role::Guide), &guide).unwrap();

    // Recolor frame 0 by a channel swap; values stay on the 8-bit grid.
    let g0 = patchblend::io::load_frame(&guide.join("0001.png")).unwrap();
    let key = Frame::from_fn(16, 16, |x, y| {
        let [r, g, b] = g0.px(x, y);
        [g, b, r]
    })
    .unwrap();
    let key_path = tmp.path().join("key.png");
    save_frame(&key, &key_path).unwrap();

    let out = tmp.path().join("out");
    let res = run(&[
        "interpolate",
        "--guide",
        guide.to_str().unwrap(),
        "--keyframe",
        &format!("0:{}", key_path.display()),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(res.status.success(), "stderr: {}", String::from_utf8_lossy(&res.stderr));

    let names = png_names(&out);
    assert_eq!(names.len(), 10);
    assert_eq!(
        read_bytes(&out.join("0001.png")),
        read_bytes(&key_path),
        "the keyframe itself must survive byte for byte"
    );
}

#[test]
fn interpolate_endpoint_keyframes_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let guide = tmp.path().join("guide");
    save_sequence(&texture_video(6, 16, 16, 63, Role::Guide), &guide).unwrap();

    let mut key_paths = Vec::new();
    for (slot, index) in [(0usize, 0usize), (1, 5)] {
        let src = patchblend::io::load_frame(&guide.join(format!("{:04}.png", index + 1))).unwrap();
        let key = Frame::from_fn(16, 16, |x, y| {
            let [r, g, b] = src.px(x, y);
            [b, r, g]
        })
        .unwrap();
        let path = tmp.path().join(format!("key{slot}.png"));
        save_frame(&key, &path).unwrap();
        key_paths.push((index, path));
    }

    let out = tmp.path().join("out");
    let res = run(&[
        "interpolate",
        "--guide",
        guide.to_str().unwrap(),
        "--keyframe",
        &format!("0:{}", key_paths[0].1.display()),
        "--keyframe",
        &format!("5:{}", key_paths[1].1.display()),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(res.status.success(), "stderr: {}", String::from_utf8_lossy(&res.stderr));

    assert_eq!(png_names(&out).len(), 6);
    assert_eq!(read_bytes(&out.join("0001.png")), read_bytes(&key_paths[0].1));
    assert_eq!(read_bytes(&out.join("0006.png")), read_bytes(&key_paths[1].1));
}

#[test]
fn out_of_range_keyframe_is_rejected_before_any_work() {
    let tmp = tempfile::tempdir().unwrap();
    let guide = tmp.path().join("guide");
    save_sequence(&texture_video(4, 16, 16, 71, Role::Guide), &guide).unwrap();

    let valid_key = tmp.path().join("key.png");
    save_frame(&texture(16, 16, 72), &valid_key).unwrap();

    // The in-range spec points at a file that does not exist: if range
    // validation runs first, the reported failure is the range, not the
    // missing file.
    let out = tmp.path().join("out");
    let res = run(&[
        "interpolate",
        "--guide",
        guide.to_str().unwrap(),
        "--keyframe",
        &format!("1:{}", tmp.path().join("missing.png").display()),
        "--keyframe",
        &format!("4:{}", valid_key.display()),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(!res.status.success());
    let stderr = String::from_utf8_lossy(&res.stderr);
    assert!(stderr.contains("out of range"), "stderr: {stderr}");
    assert!(png_names(&out).is_empty(), "no frames may be written");
}

#[test]
fn unknown_config_keys_are_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let (guide, style) = write_pair(tmp.path(), 2, 16, 16, 83);
    let cfg_path = tmp.path().join("cfg.json");
    std::fs::write(&cfg_path, br#"{"widnow": 3}"#).unwrap();

    let res = run(&[
        "blend",
        "--guide",
        guide.to_str().unwrap(),
        "--style",
        style.to_str().unwrap(),
        "--out",
        tmp.path().join("out").to_str().unwrap(),
        "--config",
        cfg_path.to_str().unwrap(),
    ]);
    assert!(!res.status.success());
    let stderr = String::from_utf8_lossy(&res.stderr);
    assert!(stderr.contains("widnow"), "stderr: {stderr}");
}

#[test]
fn flags_override_the_config_file() {
    let tmp = tempfile::tempdir().unwrap();
    let (guide, style) = write_pair(tmp.path(), 4, 16, 16, 91);
    let cfg_path = tmp.path().join("cfg.json");
    std::fs::write(&cfg_path, br#"{"window": 9, "alpha": 9.0, "seed": 7}"#).unwrap();

    let out = tmp.path().join("out");
    let res = run(&[
        "blend",
        "--guide",
        guide.to_str().unwrap(),
        "--style",
        style.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--config",
        cfg_path.to_str().unwrap(),
        "--window",
        "1",
        "--emit-stats",
    ]);
    assert!(res.status.success(), "stderr: {}", String::from_utf8_lossy(&res.stderr));

    let cfg = stats_json(&out)["effective_config"].clone();
    assert_eq!(cfg["window"], 1, "flag beats file");
    assert_eq!(cfg["alpha"], 9.0, "file beats default");
    assert_eq!(cfg["seed"], 7, "file beats default");
    assert_eq!(cfg["iterations"], 10, "default fills the rest");
}

#[test]
fn tracking_is_rejected_for_fast_mode() {
    let tmp = tempfile::tempdir().unwrap();
    let (guide, style) = write_pair(tmp.path(), 2, 16, 16, 97);

    let res = run(&[
        "blend",
        "--guide",
        guide.to_str().unwrap(),
        "--style",
        style.to_str().unwrap(),
        "--out",
        tmp.path().join("out").to_str().unwrap(),
        "--tracking",
        "on",
    ]);
    assert!(!res.status.success());
    let stderr = String::from_utf8_lossy(&res.stderr);
    assert!(stderr.contains("tracking"), "stderr: {stderr}");
}

#[test]
fn selftest_reports_every_property() {
    let res = run(&["selftest"]);
    assert!(res.status.success(), "stderr: {}", String::from_utf8_lossy(&res.stderr));
    let stdout = String::from_utf8_lossy(&res.stdout);
    assert!(!stdout.contains("FAIL"), "stdout: {stdout}");
    assert!(stdout.lines().filter(|l| l.starts_with("pass: ")).count() >= 7);
    assert!(stdout.contains("selftest properties passed"), "stdout: {stdout}");
}

#[test]
fn failed_runs_leave_no_partial_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let (guide, style) = write_pair(tmp.path(), 8, 16, 16, 103);
    // Corrupt a late style frame; streaming mode only notices it after
    // earlier outputs have already been written.
    std::fs::write(style.join("0006.png"), b"not a png").unwrap();

    let out = tmp.path().join("out");
    let res = run(&[
        "blend",
        "--guide",
        guide.to_str().unwrap(),
        "--style",
        style.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--mode",
        "accurate",
        "--window",
        "1",
        "--emit-stats",
    ]);
    assert!(!res.status.success());
    let stderr = String::from_utf8_lossy(&res.stderr);
    assert!(stderr.contains("0006"), "stderr: {stderr}");
    assert!(png_names(&out).is_empty(), "partial outputs must be rolled back");
    assert!(!out.join("stats.json").exists());
}
