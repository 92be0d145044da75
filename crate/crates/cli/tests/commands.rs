use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn wulffflow(args: &[&str], threads: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_wulffflow"));
    cmd.args(args);
    match threads {
        Some(t) => cmd.env("WULFFFLOW_THREADS", t),
        None => cmd.env_remove("WULFFFLOW_THREADS"),
    };
    cmd.output().unwrap()
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("run.ini");
    fs::write(&path, format!("{body}\n[output]\ndirectory = {}\n", dir.join("out").display())).unwrap();
    path.display().to_string()
}

#[test]
fn simulate_sphere_area_grows_like_exp_t() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "[grid]\nresolution = 16\n[flow]\nt_max = 0.3\nrecord_interval = 0.1\nsnapshot_times = 0, 0.3",
    );
    let out = wulffflow(&["simulate", "--config", &cfg], None);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(tmp.path().join("out/timeseries.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "t,area_F,H_func,P_min,P_max,P_integral,u_hat_min,gauge_min,gauge_max,umb_deficit,dt"
    );
    let mut rows = 0;
    for line in lines {
        let v: Vec<f64> = line.split(',').map(|s| s.parse().unwrap()).collect();
        assert_eq!(v.len(), 11);
        let expect = 4.0 * std::f64::consts::PI * v[0].exp();
        assert!((v[1] / expect - 1.0).abs() < 1e-4, "{line}");
        rows += 1;
    }
    assert_eq!(rows, 4);
    assert!(tmp.path().join("out/limit_report.txt").exists());
    let obj = fs::read_to_string(tmp.path().join("out/snapshot_0.000000.obj")).unwrap();
    assert_eq!(obj.lines().filter(|l| l.starts_with("v ")).count(), 16 * 32 + 2);
    assert!(tmp.path().join("out/snapshot_0.300000.obj").exists());
}

#[test]
fn csv_is_identical_across_thread_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "[grid]\nresolution = 16\n[norm]\nfamily = ellipsoid\naxes = 1, 1.3, 1.7\n\
         [initial]\nshape = harmonic\nterms = 2:0:0.2, 3:2:0.05\n[flow]\nt_max = 0.2\nrecord_interval = 0.05",
    );
    let a = wulffflow(&["simulate", "--config", &cfg], Some("1"));
    assert!(a.status.success());
    let first = fs::read(tmp.path().join("out/timeseries.csv")).unwrap();
    let b = wulffflow(&["simulate", "--config", &cfg], Some("3"));
    assert!(b.status.success());
    let second = fs::read(tmp.path().join("out/timeseries.csv")).unwrap();
    assert_eq!(first, second);
}

#[test]
fn unknown_key_exits_with_config_status() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "[flow]\ndtmax = 0.1");
    let out = wulffflow(&["simulate", "--config", &cfg], None);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("dtmax") && err.contains("line 2"), "{err}");
}

#[test]
fn missing_config_is_an_io_error() {
    let out = wulffflow(&["simulate", "--config", "/nonexistent/run.ini"], None);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn breakdown_exits_3_without_partial_output() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "[grid]\nresolution = 16\n[initial]\nshape = harmonic\nterms = 1:0:1.9");
    let out = wulffflow(&["simulate", "--config", &cfg], None);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("node"));
    assert!(!tmp.path().join("out").exists());
}

#[test]
fn inequality_on_wulff_shape_is_near_equality() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "[grid]\nresolution = 32\n[norm]\nfamily = ellipsoid\naxes = 1, 1.3, 1.7\n[initial]\nshape = wulff\nscale = 2",
    );
    let out = wulffflow(&["inequality", "--config", &cfg], None);
    assert!(out.status.success());
    let report = fs::read_to_string(tmp.path().join("out/inequality_report.txt")).unwrap();
    assert!(report.contains("near_equality=true"), "{report}");
}

#[test]
fn norm_and_variation_checks() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "[grid]\nresolution = 24\n[norm]\nfamily = ellipsoid\naxes = 1, 1.3, 1.7\n[check]\nsamples = 100",
    );
    let out = wulffflow(&["norm-check", "--config", &cfg], None);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let report = fs::read_to_string(tmp.path().join("out/norm_check.txt")).unwrap();
    assert!(report.contains("valid=true") && report.contains("duality_ok=true"), "{report}");

    let out = wulffflow(&["variation-check", "--config", &cfg, "--override", "check.epsilons=1e-3,5e-4,2.5e-4"], None);
    assert!(out.status.success());
    let csv = fs::read_to_string(tmp.path().join("out/variation_check.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
    assert!(String::from_utf8_lossy(&out.stdout).contains("observed order"));
}

#[test]
fn invalid_norm_fails_norm_check_config() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "[norm]\nfamily = ellipsoid\nmatrix = 1,2,0, 2,1,0, 0,0,1");
    let out = wulffflow(&["norm-check", "--config", &cfg], None);
    assert_eq!(out.status.code(), Some(2));
}
