use std::path::Path;
use std::process::{Command, Output};

use dsnprint::frame_io::{save_frame, Frame};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dsnprint"))
        .args(args)
        .output()
        .unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn write_frame(path: &Path, w: usize, h: usize, seed: u16) {
    let data = (0..w * h)
        .map(|i| ((i as u16).wrapping_mul(37) ^ seed) % 1024)
        .collect();
    save_frame(&Frame::new(w, h, 10, data).unwrap(), path).unwrap();
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let out = run(&["fit", "x.csv", "--no-such-flag"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bad_sat_threshold_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("a.pgm");
    write_frame(&f, 8, 8, 1);
    let out = run(&[
        "fingerprint",
        p(&f),
        "--out",
        p(&dir.path().join("o.dsnf")),
        "--temperature",
        "30",
        "--sat-threshold",
        "1.5",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_input_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["fit", p(&dir.path().join("absent.csv"))]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("absent.csv"));
}

#[test]
fn mismatched_dimensions_name_both_files() {
    let dir = tempfile::tempdir().unwrap();
    let frames: Vec<_> = (0..3)
        .map(|i| {
            let f = dir.path().join(format!("d{i}.pgm"));
            write_frame(&f, 16, 16, i);
            f
        })
        .collect();
    let pattern = dir.path().join("pat.dsnf");
    let mut args = vec!["fingerprint"];
    args.extend(frames.iter().map(|f| p(f)));
    args.extend(["--out", p(&pattern), "--temperature", "30"]);
    assert!(run(&args).status.success());

    let query = dir.path().join("query_small.pgm");
    write_frame(&query, 8, 16, 5);
    let out = run(&["correlate", p(&query), "--pattern", p(&pattern)]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(
        err.contains("query_small.pgm") && err.contains("pat.dsnf"),
        "{err}"
    );
}

#[test]
fn correlate_emits_header_and_one_row_per_pair() {
    let dir = tempfile::tempdir().unwrap();
    let mut patterns = Vec::new();
    for t in [20, 30] {
        let frames: Vec<_> = (0..2)
            .map(|i| {
                let f = dir.path().join(format!("d{t}_{i}.pgm"));
                write_frame(&f, 16, 16, (t + i) as u16);
                f
            })
            .collect();
        let out = dir.path().join(format!("p{t}.dsnf"));
        let mut args = vec!["fingerprint".to_string()];
        args.extend(frames.iter().map(|f| p(f).to_string()));
        args.extend([
            "--out".into(),
            p(&out).into(),
            "--temperature".into(),
            t.to_string(),
        ]);
        assert!(run(&args.iter().map(String::as_str).collect::<Vec<_>>())
            .status
            .success());
        patterns.push(out);
    }
    let query = dir.path().join("q.pgm");
    write_frame(&query, 16, 16, 99);
    let out = run(&[
        "correlate",
        p(&query),
        "--pattern",
        p(&patterns[0]),
        "--pattern",
        p(&patterns[1]),
    ]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "camera_id,lens_id,pattern_temp_c,rho,n_pixels");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("unknown,,20"));
    assert!(lines[2].starts_with("unknown,,30"));
}

#[test]
fn benchmark_reports_both_filters() {
    let dir = tempfile::tempdir().unwrap();
    for i in 0..3 {
        write_frame(&dir.path().join(format!("f{i}.pgm")), 8, 8, i);
    }
    let out = run(&["benchmark", p(dir.path()), "--repetitions", "2"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "filter,frames,total_s,delta_s,delta_pct");
    assert!(lines[1].starts_with("wavelet,6,"));
    assert!(lines[1].ends_with(",0.0,0.0"));
    assert!(lines[2].starts_with("dct,6,"));
}

#[test]
fn fit_and_estimate_read_the_correlation_table() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("rho.csv");
    let mut text = String::from("camera_id,lens_id,pattern_temp_c,rho,n_pixels\n");
    for t in (10..=50).step_by(5) {
        let rho = 0.01 * (0.05 * f64::from(t.min(30))).exp();
        text.push_str(&format!(
            "cam,,{t},{rho},100\ncam,,{t},{rho},100\nother,,{t},0.5,100\n"
        ));
    }
    std::fs::write(&csv, text).unwrap();

    let fit = run(&["fit", p(&csv), "--camera", "cam"]);
    assert!(fit.status.success());
    let v: serde_json::Value = serde_json::from_slice(&fit.stdout).unwrap();
    assert_eq!(v["series"].as_array().unwrap().len(), 9);

    let est = run(&["estimate-temp", p(&csv), "--camera", "cam"]);
    assert!(
        est.status.success(),
        "{}",
        String::from_utf8_lossy(&est.stderr)
    );
    let v: serde_json::Value = serde_json::from_slice(&est.stdout).unwrap();
    let t = v["t_star_c"].as_f64().unwrap();
    assert!((t - 30.0).abs() <= 0.05, "t* {t}");
    let range = v["forensic_range_c"].as_array().unwrap();
    assert!((range[0].as_f64().unwrap() - (t - 4.5)).abs() < 1e-9);
    assert!((v["b"].as_f64().unwrap() - 0.05).abs() < 1e-6);
}

#[test]
fn negative_temperatures_are_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "simulate",
        "--out",
        p(dir.path()),
        "--width",
        "8",
        "--height",
        "8",
        "--temps",
        "-10,0",
        "--frames",
        "1",
        "--queries",
        "1",
        "--query-temp",
        "-5",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}
