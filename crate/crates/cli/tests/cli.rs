use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use pcscale::io::read_scale_report;
use tempfile::TempDir;

fn pcscale(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pcscale"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn field<'a>(text: &'a str, key: &str) -> &'a str {
    text.lines()
        .find_map(|l| l.strip_prefix(key).and_then(|r| r.strip_prefix('=')))
        .unwrap_or_else(|| panic!("no {key}= in output:\n{text}"))
}

fn oracle(path: &Path) -> Vec<(String, f64, f64)> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (
                f[0].to_string(),
                f[1].parse().unwrap(),
                f[2].parse().unwrap(),
            )
        })
        .collect()
}

fn synth(dir: &Path, extra: &[&str]) {
    let mut args = vec!["synth", "--out-dir", "s"];
    args.extend_from_slice(extra);
    let o = pcscale(&args, dir);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(field(&stdout(&o), "cameras"), "9");
}

#[test]
fn synthetic_plane_scales_match_oracle() {
    let tmp = TempDir::new().unwrap();
    synth(tmp.path(), &[]);
    let o = pcscale(&["--config", "s/run.conf", "scale"], tmp.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));

    let rows = read_scale_report(fs::File::open(tmp.path().join("s/scales.csv")).unwrap()).unwrap();
    let expected = oracle(&tmp.path().join("s/oracle.csv"));
    assert_eq!(rows.len(), expected.len());
    for (row, (id, top, bottom)) in rows.iter().zip(&expected) {
        assert_eq!(&row.image_id, id);
        assert!(!row.fallback_used);
        assert!(
            (row.top_scale / top - 1.0).abs() < 1e-6,
            "{id}: {} vs {top}",
            row.top_scale
        );
        assert!((row.bottom_scale / bottom - 1.0).abs() < 1e-6);
        assert!(row.bottom_scale > row.top_scale);
    }
}

#[test]
fn scale_output_is_deterministic_and_linear_agrees() {
    let tmp = TempDir::new().unwrap();
    synth(tmp.path(), &["--surface", "sinusoid", "--seed", "4"]);
    let run = |extra: &[&str], out: &str| {
        let mut args = vec!["--config", "s/run.conf", "scale", "--output", out];
        args.extend_from_slice(extra);
        let o = pcscale(&args, tmp.path());
        assert!(o.status.success(), "{}", stderr(&o));
        fs::read(tmp.path().join(out)).unwrap()
    };
    let a = run(&[], "a.csv");
    let b = run(&[], "b.csv");
    let linear = run(&["--linear"], "c.csv");
    assert_eq!(a, b);
    assert_eq!(a, linear);
}

#[test]
fn synth_is_reproducible_for_a_seed() {
    let tmp = TempDir::new().unwrap();
    for out in ["x", "y"] {
        let o = pcscale(
            &["synth", "--out-dir", out, "--seed", "11", "--density", "12"],
            tmp.path(),
        );
        assert!(o.status.success());
    }
    for file in ["cloud.ply", "poses.csv", "oracle.csv"] {
        assert_eq!(
            fs::read(tmp.path().join("x").join(file)).unwrap(),
            fs::read(tmp.path().join("y").join(file)).unwrap(),
            "{file}"
        );
    }
}

#[test]
fn ground_plane_scale_ignores_cloud() {
    let tmp = TempDir::new().unwrap();
    synth(tmp.path(), &["--plane-a", "0", "--plane-b", "0"]);
    let o = pcscale(
        &[
            "--config",
            "s/run.conf",
            "groundplane-scale",
            "--output",
            "g.csv",
        ],
        tmp.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = read_scale_report(fs::File::open(tmp.path().join("g.csv")).unwrap()).unwrap();
    for (row, (_, top, bottom)) in rows.iter().zip(oracle(&tmp.path().join("s/oracle.csv"))) {
        assert!((row.top_scale / top - 1.0).abs() < 1e-8);
        assert!((row.bottom_scale / bottom - 1.0).abs() < 1e-8);
    }
}

#[test]
fn mesh_reports_statistics_and_dumps() {
    let tmp = TempDir::new().unwrap();
    synth(tmp.path(), &["--density", "10", "--ascii"]);
    let o = pcscale(
        &[
            "mesh",
            "--cloud",
            "s/cloud.ply",
            "--dump",
            "m.ply",
            "--ascii",
        ],
        tmp.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert_eq!(field(&out, "input_points"), "100");
    assert_eq!(field(&out, "triangles"), "162");
    assert_eq!(field(&out, "merged_duplicates"), "0");
    let area: f64 = field(&out, "projected_area").parse().unwrap();
    assert!((area - 4.0).abs() < 1e-9);
    assert!(fs::read_to_string(tmp.path().join("m.ply"))
        .unwrap()
        .contains("element face 162"));
}

#[test]
fn fit_recovers_curve() {
    let tmp = TempDir::new().unwrap();
    let (x_max, x_50, b) = (120.0f64, 40.0f64, 1.8f64);
    let mut csv = String::from("size_mm,percent_passing\n");
    for x in [2.0, 5.0, 10.0, 20.0, 40.0, 60.0, 90.0, 110.0] {
        let p = 100.0 / (1.0 + ((x_max / x).ln() / (x_max / x_50).ln()).powf(b));
        csv.push_str(&format!("{x},{p:?}\n"));
    }
    fs::write(tmp.path().join("sieve.csv"), csv).unwrap();
    let o = pcscale(&["fit", "--sieve", "sieve.csv"], tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    let got = |k: &str| field(&out, k).parse::<f64>().unwrap();
    assert!((got("x_max_mm") / x_max - 1.0).abs() < 1e-6);
    assert!((got("x_50_mm") / x_50 - 1.0).abs() < 1e-6);
    assert!((got("b") / b - 1.0).abs() < 1e-6);
    assert_eq!(
        out.lines()
            .skip_while(|l| !l.starts_with("size_mm"))
            .count(),
        9
    );
}

fn write_groups(dir: &Path, ss_factor: f64, ss_residual: f64) {
    // Ten groups of three: means 50 +/- c, deviations -d, 0, +d.
    let c = (ss_factor / 30.0).sqrt();
    let d = (ss_residual / 20.0).sqrt();
    let mut csv = String::from("group_id,value\n");
    for g in 0..10 {
        let mean = if g % 2 == 0 { 50.0 + c } else { 50.0 - c };
        for dev in [-d, 0.0, d] {
            csv.push_str(&format!("trial{g},{:?}\n", mean + dev));
        }
    }
    fs::write(dir.join("groups.csv"), csv).unwrap();
}

#[test]
fn anova_ten_trials_of_three() {
    let tmp = TempDir::new().unwrap();
    write_groups(tmp.path(), 1.9, 1255.3);
    let o = pcscale(&["anova", "--groups", "groups.csv"], tmp.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    let factor: Vec<&str> = out.lines().nth(1).unwrap().split(',').collect();
    let residual: Vec<&str> = out.lines().nth(2).unwrap().split(',').collect();
    let num = |s: &str| s.parse::<f64>().unwrap();
    assert_eq!(factor[1], "9");
    assert_eq!(residual[1], "20");
    assert!((num(factor[2]) - 1.9).abs() < 1e-6);
    assert!((num(residual[2]) - 1255.3).abs() < 1e-6);
    assert_eq!(format!("{:.2}", num(factor[3])), "0.21");
    assert_eq!(format!("{:.3}", num(factor[4])), "0.003");
    assert_eq!(format!("{:.2}", num(factor[5])), "2.39");
    assert_eq!(field(&out, "reject"), "false");
}

#[test]
fn anova_rejection_exits_three() {
    let tmp = TempDir::new().unwrap();
    write_groups(tmp.path(), 900.0, 20.0);
    let o = pcscale(
        &["anova", "--groups", "groups.csv", "--alpha", "0.01"],
        tmp.path(),
    );
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(field(&stdout(&o), "reject"), "true");
}

#[test]
fn missing_pose_file_is_a_data_error() {
    let tmp = TempDir::new().unwrap();
    synth(tmp.path(), &["--density", "8"]);
    let o = pcscale(
        &["--config", "s/run.conf", "scale", "--poses", "nowhere.csv"],
        tmp.path(),
    );
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.starts_with("error[data]"), "{err}");
    assert!(err.contains("nowhere.csv"), "{err}");
}

#[test]
fn usage_errors_exit_two() {
    let tmp = TempDir::new().unwrap();
    let unknown = pcscale(&["scale", "--no-such-flag"], tmp.path());
    assert_eq!(unknown.status.code(), Some(2));
    let missing = pcscale(&["fit"], tmp.path());
    assert_eq!(missing.status.code(), Some(2));
    assert!(
        stderr(&missing).contains("error[usage]"),
        "{}",
        stderr(&missing)
    );
    let bad_region = pcscale(
        &["synth", "--out-dir", "s", "--region", "1,1,0,0"],
        tmp.path(),
    );
    assert_eq!(bad_region.status.code(), Some(2));
}
