use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const CALIBRATION: &str = include_str!("../../../configs/calibration.toml");

/// The calibration configuration with whole lines replaced by key.
fn config(dir: &Path, name: &str, edits: &[(&str, &str)]) -> PathBuf {
    let mut text = String::new();
    let mut remaining: Vec<_> = edits.to_vec();
    for line in CALIBRATION.lines() {
        let key = line.split('=').next().unwrap_or("").trim();
        match remaining
            .iter()
            .position(|(k, _)| *k == key || line.starts_with(k))
        {
            Some(k) => {
                text.push_str(remaining.remove(k).1);
            }
            None => text.push_str(line),
        }
        text.push('\n');
    }
    assert!(remaining.is_empty(), "unmatched edits {remaining:?}");
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

/// Short run with raised collection efficiencies.
fn quick(dir: &Path) -> PathBuf {
    config(
        dir,
        "quick.toml",
        &[
            ("pulses", "pulses = 100_000_000"),
            ("eta_off = 2.81e-3", "eta_off = 0.05"),
            ("eta_off = 3.97e-4", "eta_off = 0.02"),
        ],
    )
}

fn herald(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_herald"));
    cmd.args(args).arg("-q").env_remove("HERALD_WORKERS");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().unwrap()
}

fn ok(args: &[&str]) {
    let out = herald(args, &[]);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn json(p: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

fn csv(p: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let text = fs::read_to_string(p).unwrap();
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header = lines
        .next()
        .unwrap()
        .split(',')
        .map(str::to_owned)
        .collect();
    let rows = lines
        .map(|l| {
            l.split(',')
                .map(|v| match v {
                    "true" => 1.0,
                    "false" => 0.0,
                    _ => v.parse().unwrap_or(f64::NAN),
                })
                .collect()
        })
        .collect();
    (header, rows)
}

fn column(header: &[String], name: &str) -> usize {
    header
        .iter()
        .position(|h| h == name)
        .unwrap_or_else(|| panic!("no column {name}"))
}

#[test]
fn simulate_is_reproducible_and_seeded() {
    let dir = TempDir::new().unwrap();
    let cfg = quick(dir.path());
    let runs = ["a", "b", "c"].map(|n| dir.path().join(n));
    ok(&["simulate", s(&cfg), "-o", s(&runs[0])]);
    ok(&["simulate", s(&cfg), "-o", s(&runs[1])]);
    ok(&["simulate", s(&cfg), "-o", s(&runs[2]), "--seed", "7"]);
    for f in ["tags.csv", "counts.json"] {
        assert_eq!(
            fs::read(runs[0].join(f)).unwrap(),
            fs::read(runs[1].join(f)).unwrap(),
            "{f}"
        );
        assert_ne!(
            fs::read(runs[0].join(f)).unwrap(),
            fs::read(runs[2].join(f)).unwrap(),
            "{f}"
        );
    }
    let meta = &json(&runs[2].join("counts.json"))["meta"];
    assert_eq!(meta["seed"], 7);
    assert_eq!(meta["command"], "simulate");
    assert_eq!(meta["config_sha256"].as_str().unwrap().len(), 64);
    let tags = fs::read_to_string(runs[0].join("tags.csv")).unwrap();
    assert!(tags.starts_with("# "));
}

#[test]
fn worker_count_does_not_change_results() {
    let dir = TempDir::new().unwrap();
    let cfg = config(
        dir.path(),
        "bin.toml",
        &[
            ("pulses", "pulses = 50_000_000"),
            ("tag_format", "tag_format = \"binary\""),
        ],
    );
    let mut outputs = Vec::new();
    for workers in ["1", "4"] {
        let out = dir.path().join(workers);
        let r = herald(
            &["simulate", s(&cfg), "-o", s(&out)],
            &[("HERALD_WORKERS", workers)],
        );
        assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
        outputs.push(out);
    }
    for f in ["tags.bin", "counts.json"] {
        assert_eq!(
            fs::read(outputs[0].join(f)).unwrap(),
            fs::read(outputs[1].join(f)).unwrap(),
            "{f}"
        );
    }
    assert!(outputs[0].join("tags.bin.json").exists());
    let bad = herald(
        &["simulate", s(&cfg), "-o", s(&outputs[0])],
        &[("HERALD_WORKERS", "zero")],
    );
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn no_pairs_gives_darks_only() {
    let dir = TempDir::new().unwrap();
    let cfg = config(
        dir.path(),
        "dark.toml",
        &[
            ("xi = 0.72", "xi = 0.0"),
            ("pulses", "pulses = 100_000_000"),
            ("[hbt]", ""),
            ("t2", ""),
            ("r2", ""),
            ("eta_bs", ""),
        ],
    );
    let out = dir.path().join("out");
    ok(&["simulate", s(&cfg), "-o", s(&out)]);
    let c = json(&out.join("counts.json"));
    assert_eq!(c["mu"], 0.0);
    let p_i = c["measured"]["p_i"].as_f64().unwrap();
    let expected = 620.0 / 80e6;
    assert!(
        (p_i - expected).abs() < 5.0 * (expected / 1e8).sqrt(),
        "{p_i}"
    );
    let p_si = c["measured"]["p_si_net"].as_f64().unwrap();
    assert!(p_si.abs() < 1e-7, "{p_si}");
    assert_eq!(c["tags"]["sig2"], 0);
}

#[test]
fn configuration_errors_exit_with_code_two() {
    let dir = TempDir::new().unwrap();
    let cfg = config(
        dir.path(),
        "bad.toml",
        &[("rep_rate = 80e6", "rep_rat = 80e6")],
    );
    let out = herald(&["curves", s(&cfg)], &[]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("rep_rat") && err.contains("line"), "{err}");

    let cfg = config(dir.path(), "neg.toml", &[("xi = 0.72", "xi = -1.0")]);
    assert_eq!(herald(&["curves", s(&cfg)], &[]).status.code(), Some(2));
}

#[test]
fn missing_files_exit_with_code_four() {
    let dir = TempDir::new().unwrap();
    let out = herald(&["curves", s(&dir.path().join("absent.toml"))], &[]);
    assert_eq!(out.status.code(), Some(4));
    let cfg = quick(dir.path());
    let out = herald(
        &["analyze", s(&dir.path().join("absent.csv")), s(&cfg)],
        &[],
    );
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn analyze_reports_car_per_window() {
    let dir = TempDir::new().unwrap();
    let cfg = quick(dir.path());
    let sim = dir.path().join("sim");
    let an = dir.path().join("an");
    ok(&["simulate", s(&cfg), "-o", s(&sim)]);
    ok(&["analyze", s(&sim.join("tags.csv")), s(&cfg), "-o", s(&an)]);
    let car = |label: &str| {
        let v = json(&an.join(format!("car_{label}.json")));
        assert_eq!(v["meta"]["command"], "analyze");
        assert!(v["meta"]["input_sha256"].is_string());
        v["channels"][0]["result"]["car"]["value"].as_f64().unwrap()
    };
    let (narrow, wide) = (car("1100ps"), car("2000ps"));
    assert!(narrow > wide, "{narrow} vs {wide}");
    let (header, rows) = csv(&an.join("histogram_idler_sig1.csv"));
    let counts = column(&header, "counts");
    let total: f64 = rows.iter().map(|r| r[counts]).sum();
    assert!(total > 0.0);
    assert!(an.join("g2h.json").exists());
}

#[test]
fn analytic_sweep_recovers_the_configured_source() {
    let dir = TempDir::new().unwrap();
    let cfg = config(
        dir.path(),
        "clean.toml",
        &[
            ("dark_rate = 620.0", "dark_rate = 0.0"),
            ("dark_rate = 2150.0", "dark_rate = 0.0"),
        ],
    );
    let out = dir.path().join("sweep");
    ok(&["sweep", s(&cfg), "-o", s(&out)]);
    let fit = json(&out.join("fit.json"));
    let xi = fit["fit"]["xi"]["value"].as_f64().unwrap();
    assert!((xi - 0.72).abs() < 1e-9, "{xi}");
    let eta_i = fit["fit"]["eta_i_off"]["value"].as_f64().unwrap();
    assert!((eta_i - 2.81e-3).abs() < 1e-12);
    let excluded: Vec<f64> = fit["excluded_powers"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .collect();
    assert_eq!(excluded, [0.5, 0.6, 0.8, 1.0, 1.08]);

    let (header, rows) = csv(&out.join("sweep.csv"));
    assert_eq!(rows.len(), 16);
    let included = column(&header, "included");
    assert_eq!(rows.iter().filter(|r| r[included] == 1.0).count(), 11);
}

#[test]
fn curves_bound_and_limit_correctly() {
    let dir = TempDir::new().unwrap();
    let cfg = quick(dir.path());
    let out = dir.path().join("curves");
    ok(&["curves", s(&cfg), "-o", s(&out)]);
    let (header, rows) = csv(&out.join("g2h.csv"));
    let (p, t) = (
        column(&header, "g2h_poisson"),
        column(&header, "g2h_thermal"),
    );
    assert!(rows.iter().all(|r| r[t] >= r[p] && r[p] > 0.0));
    let maxima = json(&out.join("curves.json"));
    assert_eq!(maxima["car_max"].as_array().unwrap().len(), 2);

    let cfg = config(
        dir.path(),
        "nodark.toml",
        &[
            ("dark_rate = 620.0", "dark_rate = 0.0"),
            ("dark_rate = 2150.0", "dark_rate = 0.0"),
            ("dark_rate = 1160.0", "dark_rate = 0.0"),
        ],
    );
    let out = dir.path().join("nodark");
    ok(&["curves", s(&cfg), "-o", s(&out)]);
    let (header, rows) = csv(&out.join("car.csv"));
    let inv = column(&header, "inv_mu");
    let car = column(&header, "car_1100ps");
    for r in &rows {
        assert!(
            (r[car] / r[inv] - 1.0).abs() < 1e-9,
            "{} vs {}",
            r[car],
            r[inv]
        );
    }
}
