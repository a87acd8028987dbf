use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const PLANAR: &str = r#"{"medium": {"kappa1": 1.0, "kappa2": 2.0}, "solver": {"level": "planar"}, "quadrature": {"tol": 1e-10}}"#;

const HOMOGENEOUS: &str = r#"{
    "medium": {"kappa1": 1.3, "kappa2": 1.3},
    "solver": {"level": "planar"},
    "sources": [{"x1": -1.0, "x2": 1.0}, {"x1": 1.0, "x2": 1.0}],
    "receivers": {"b": 0.5, "a": 1.0, "count": 3}
}"#;

const ROUGH: &str = r#"{
    "medium": {"kappa1": 1.0, "kappa2": 1.5},
    "interface": {"bumps": [{"center": 0.2, "halfwidth": 0.4, "height": 0.25}]},
    "obstacle": {"kind": "neumann", "curve": {"kind": "kite", "center": {"x1": 0.0, "x2": -2.6}, "scale": 0.3}, "nodes": 16},
    "mesh": {"cell_size": 0.2, "subsample": 2},
    "sources": [{"x1": -0.5, "x2": 0.8}, {"x1": 0.5, "x2": 0.9, "kind": "dipole-2"}],
    "receivers": {"b": 0.7, "a": 1.0, "count": 4}
}"#;

const BLOWUP: &str = r#"{
    "medium": {"kappa1": 1.0, "kappa2": 2.0},
    "interface": {"bumps": [{"center": 0.0, "halfwidth": 0.5, "height": 0.3}]},
    "experiment": {"blowup": {"z_star_x1": 0.2, "delta0": 0.05, "eps0": 0.1, "n_max": 24, "radial": 120, "angular": 128}}
}"#;

struct Work {
    dir: TempDir,
}

impl Work {
    fn new() -> Work {
        Work { dir: tempfile::tempdir().unwrap() }
    }

    fn file(&self, name: &str, contents: &str) -> PathBuf {
        let p = self.dir.path().join(name);
        std::fs::write(&p, contents).unwrap();
        p
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_layered-scatter"))
        .args(args)
        .env_remove("LAYERED_SCATTER_THREADS")
        .output()
        .unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn parse_pair(line: &str) -> (f64, f64) {
    let (a, b) = line.split_once(',').unwrap();
    (a.parse().unwrap(), b.parse().unwrap())
}

#[test]
fn green_same_side_scattered_vanishes_without_contrast() {
    let w = Work::new();
    let cfg = w.file("c.json", &HOMOGENEOUS.replace("1.3", "1.7"));
    let out = run(&["green", "--config", s(&cfg), "--x", "0.3,0.9", "--xs=-0.4,0.5", "--part", "scattered"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let (re, im) = parse_pair(String::from_utf8(out.stdout).unwrap().trim());
    assert!(re.abs() <= 1e-8 && im.abs() <= 1e-8, "{re} {im}");
}

#[test]
fn green_prints_fifteen_significant_digits_and_is_repeatable() {
    let w = Work::new();
    let cfg = w.file("c.json", PLANAR);
    let args = ["green", "--config", s(&cfg), "--x", "0.3,0.8", "--x=-0.5,0.4", "--xs", "0.1,0.6", "--kind", "dipole-1"];
    let a = run(&args);
    let b = run(&args);
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    for part in lines[0].split(',') {
        let mantissa = part.trim_start_matches('-').split('e').next().unwrap();
        assert_eq!(mantissa.replace('.', "").len(), 15, "{part}");
    }
}

#[test]
fn green_cross_side_matches_oracle() {
    // Transmitted monopole field for κ₁ = 1, κ₂ = 2, x = (0.3, 0.8), y = (−0.2, −0.6),
    // from an independent 30-digit tanh-sinh evaluation of the Fourier integral.
    let (re0, im0) = (-0.12178475338314853, 0.031506969350703618);
    let w = Work::new();
    let cfg = w.file("c.json", PLANAR);
    let out = run(&["green", "--config", s(&cfg), "--x", "0.3,0.8", "--xs=-0.2,-0.6"]);
    assert_eq!(code(&out), 0);
    let (re, im) = parse_pair(String::from_utf8(out.stdout).unwrap().trim());
    assert!((re - re0).abs() < 1e-9 && (im - im0).abs() < 1e-9, "{re} {im}");
}

#[test]
fn green_at_the_source_is_a_numerical_failure() {
    let w = Work::new();
    let cfg = w.file("c.json", PLANAR);
    let out = run(&["green", "--config", s(&cfg), "--x", "0.3,0.8", "--xs", "0.3,0.8"]);
    assert_eq!(code(&out), 3);
}

#[test]
fn forward_writes_source_major_rows() {
    let w = Work::new();
    let cfg = w.file("c.json", &HOMOGENEOUS.replace("\"kappa2\": 1.3", "\"kappa2\": 2.0"));
    let csv = w.path("nearfield.csv");
    let out = run(&["forward", "--config", s(&cfg), "--out", s(&csv)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(!text.contains('\r'));
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "source_index,xs1,xs2,x1,x2,re_us,im_us");
    assert_eq!(lines.len(), 7);
    let idx: Vec<&str> = lines[1..].iter().map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(idx, ["0", "0", "0", "1", "1", "1"]);
    let receivers: Vec<&str> = lines[1..4].iter().map(|l| l.split(',').nth(3).unwrap()).collect();
    assert_eq!(receivers, ["-1", "0", "1"]);
    // shortest round-trip formatting
    for l in &lines[1..] {
        for f in l.split(',').skip(5) {
            assert_eq!(f.parse::<f64>().unwrap().to_string(), f);
        }
    }
}

#[test]
fn forward_without_scatterers_is_zero() {
    let w = Work::new();
    let cfg = w.file("c.json", HOMOGENEOUS);
    let csv = w.path("nf.csv");
    assert_eq!(code(&run(&["forward", "--config", s(&cfg), "--out", s(&csv)])), 0);
    for l in std::fs::read_to_string(&csv).unwrap().lines().skip(1) {
        for f in l.split(',').skip(5) {
            assert!(f.parse::<f64>().unwrap().abs() <= 1e-7, "{l}");
        }
    }
}

#[test]
fn forward_output_is_byte_identical_across_runs_and_thread_counts() {
    let w = Work::new();
    let cfg = w.file("c.json", ROUGH);
    let (a, b) = (w.path("a.csv"), w.path("b.csv"));
    assert_eq!(code(&run(&["--threads", "1", "forward", "--config", s(&cfg), "--out", s(&a)])), 0);
    let out = Command::new(env!("CARGO_BIN_EXE_layered-scatter"))
        .args(["forward", "--config", s(&cfg), "--out", s(&b)])
        .env("LAYERED_SCATTER_THREADS", "3")
        .output()
        .unwrap();
    assert_eq!(code(&out), 0);
    let (ta, tb) = (std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(ta, tb);
    assert_eq!(String::from_utf8(ta).unwrap().lines().count(), 9);
}

#[test]
fn forward_needs_sources_and_receivers() {
    let w = Work::new();
    let cfg = w.file("c.json", PLANAR);
    let out = run(&["forward", "--config", s(&cfg), "--out", s(&w.path("x.csv"))]);
    assert_eq!(code(&out), 2);
    assert!(!w.path("x.csv").exists());
}

#[test]
fn demo_uniqueness_table_and_footer() {
    let w = Work::new();
    let cfg = w.file("c.json", BLOWUP);
    let (a, b) = (w.path("a.csv"), w.path("b.csv"));
    assert_eq!(code(&run(&["demo-uniqueness", "--config", s(&cfg), "--out", s(&a)])), 0);
    assert_eq!(code(&run(&["demo-uniqueness", "--config", s(&cfg), "--out", s(&b)])), 0);
    let text = std::fs::read_to_string(&a).unwrap();
    assert_eq!(text.as_bytes(), std::fs::read(&b).unwrap());
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "n,N_n");
    let rows: Vec<(usize, f64)> = lines[1..lines.len() - 1]
        .iter()
        .map(|l| {
            let (n, v) = l.split_once(',').unwrap();
            (n.parse().unwrap(), v.parse().unwrap())
        })
        .collect();
    assert_eq!(rows.iter().map(|r| r.0).collect::<Vec<_>>(), (1..=24).collect::<Vec<_>>());
    assert!(rows[7..].windows(2).all(|p| p[1].1 > p[0].1));
    let footer: serde_json::Value = serde_json::from_str(lines.last().unwrap().strip_prefix("# ").unwrap()).unwrap();
    assert!(footer["exponent"].as_f64().unwrap() > 0.0);
    assert!(footer["ratio"].as_f64().unwrap() > 1.0);
    assert!(footer["increasing_from"].as_u64().unwrap() <= 8);
}

#[test]
fn verify_default_config_passes() {
    let cfg = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/default.json");
    let out = run(&["verify", "--config", s(&cfg)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let checks = report.as_array().unwrap();
    assert!(checks.len() >= 10);
    for c in checks {
        assert_eq!(c["pass"], true, "{c}");
        assert!(c["check"].is_string() && c["tolerance"].is_number());
    }
}

#[test]
fn verify_flipped_branch_fails() {
    let w = Work::new();
    let cfg = w.file("c.json", PLANAR);
    let report = w.path("r.json");
    let out = run(&["verify", "--config", s(&cfg), "--debug-flip-branch", "--out", s(&report)]);
    assert_eq!(code(&out), 1);
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    let beta = report.as_array().unwrap().iter().find(|c| c["check"] == "beta_branch_identity").unwrap();
    assert_eq!(beta["pass"], false);
}

#[test]
fn configuration_errors_exit_with_two() {
    let w = Work::new();
    let cases = [
        ("empty", ""),
        ("object", "{}"),
        ("malformed", "{\"medium\": "),
        ("unknown", r#"{"medium": {"kappa1": 1.0, "kappa2": 2.0}, "colour": "red"}"#),
        ("negative", r#"{"medium": {"kappa1": 1.0, "kappa2": -2.0}}"#),
        ("receivers", r#"{"medium": {"kappa1": 1.0, "kappa2": 2.0}, "interface": {"bumps": [{"center": 0.0, "halfwidth": 0.5, "height": 0.3}]}, "receivers": {"b": 0.1, "a": 1.0, "count": 3}}"#),
    ];
    for (name, text) in cases {
        let cfg = w.file(&format!("{name}.json"), text);
        assert_eq!(code(&run(&["verify", "--config", s(&cfg)])), 2, "{name}");
    }
    assert_eq!(code(&run(&["verify", "--config", s(&w.path("missing.json"))])), 2);
    let cfg = w.file("ok.json", PLANAR);
    assert_eq!(code(&run(&["--threads", "0", "verify", "--config", s(&cfg)])), 2);
    assert_eq!(code(&run(&["frobnicate"])), 2);
}
