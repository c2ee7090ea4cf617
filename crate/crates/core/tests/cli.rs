use std::path::Path;
use std::process::{Command, Output};

use adhesion_lab::plot::render_bars;

const BIN: &str = env!("CARGO_BIN_EXE_adhesion-lab");

fn cli(args: &[&str], cwd: &Path) -> Output {
    Command::new(BIN)
        .args(args)
        .current_dir(cwd)
        .env_remove("ADHESION_LAB_OUT")
        .output()
        .expect("spawn cli")
}

fn short_config(dir: &Path, extra: &str) -> String {
    let p = dir.join("s.toml");
    let text = format!(
        "strategy = \"flc\"\npreset = \"simulation\"\n{extra}\n[timeline]\nevents = [{{ time = 1.0, action = \"torque_on\" }}, {{ time = 4.0, action = \"end\" }}]\n"
    );
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn run_writes_trace_and_plots() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = short_config(dir.path(), "");
    let out = dir.path().join("o");
    let o = cli(
        &["run", "--config", &cfg, "--out", out.to_str().unwrap(), "--plots"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(out.join("simulation_flc.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4002);
    assert!(out.join("simulation_flc_time.svg").exists());
    assert!(out.join("simulation_flc_trajectory.svg").exists());
}

#[test]
fn output_directory_defaults_to_env() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = short_config(dir.path(), "");
    let env_out = dir.path().join("from_env");
    let o = Command::new(BIN)
        .args(["run", "--config", &cfg, "--strategy", "po"])
        .current_dir(dir.path())
        .env("ADHESION_LAB_OUT", &env_out)
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(env_out.join("simulation_po.csv").exists());
}

#[test]
fn exit_codes_distinguish_failures() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let bad_syntax = d.join("a.toml");
    std::fs::write(&bad_syntax, "strategy = = 1\n").unwrap();
    let invalid = d.join("b.toml");
    std::fs::write(&invalid, "strategy = \"pso\"\n[strategies.pso]\nnp = 0\n").unwrap();
    let code = |args: &[&str]| cli(args, d).status.code().unwrap();
    assert_eq!(code(&["run", "--config", bad_syntax.to_str().unwrap()]), 1);
    assert_eq!(code(&["run", "--config", invalid.to_str().unwrap()]), 2);
    assert_eq!(code(&["run", "--config", d.join("missing.toml").to_str().unwrap()]), 4);
    assert_eq!(code(&["oracle", "--profile", "ice"]), 2);
    let blocked = d.join("file");
    std::fs::write(&blocked, "x").unwrap();
    let cfg = short_config(d, "");
    assert_eq!(
        code(&["run", "--config", &cfg, "--out", blocked.join("sub").to_str().unwrap()]),
        4
    );
}

#[test]
fn numeric_failure_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = short_config(dir.path(), "[profiles.bad]\nc1 = 1e308\nc2 = 1e308\nc3 = 0.0\n[schedule]\nsegments = [{ start = 0.0, profile = \"bad\" }]");
    let o = cli(&["run", "--config", &cfg, "--out", "o"], dir.path());
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn oracle_prints_peak() {
    let dir = tempfile::tempdir().unwrap();
    let o = cli(&["oracle", "--profile", "P3"], dir.path());
    assert!(o.status.success());
    let s = String::from_utf8_lossy(&o.stdout);
    assert!(s.contains("v_peak=0.4500"), "{s}");
    assert!(s.contains("mu_peak=0.2000"), "{s}");
}

#[test]
fn compare_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = short_config(dir.path(), "seed = 5");
    let run = |name: &str| {
        let out = dir.path().join(name);
        let o = cli(
            &["compare", "--config", &cfg, "--strategies", "po,sg,flc,pso", "--out", out.to_str().unwrap(), "--plots"],
            dir.path(),
        );
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        out
    };
    let (a, b) = (run("a"), run("b"));
    for f in ["simulation_po.csv", "simulation_pso.csv", "metrics.csv", "ratios.csv"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    assert!(a.join("ripple_P1.svg").exists());
    assert!(a.join("search_time_P1.svg").exists());
}

fn attr(tag: &str, name: &str) -> f64 {
    let key = format!("{name}=\"");
    let start = tag.find(&key).unwrap() + key.len();
    let end = start + tag[start..].find('"').unwrap();
    tag[start..end].parse().unwrap()
}

#[test]
fn bar_heights_match_values() {
    let items = vec![
        ("po".to_string(), 9.572),
        ("sg".to_string(), 10.516),
        ("flc".to_string(), 0.034),
        ("pso".to_string(), f64::INFINITY),
    ];
    let svg = render_bars("search time", "s", &items).unwrap();
    let group = svg.lines().find(|l| l.contains("data-scale")).unwrap();
    let scale = attr(group, "data-scale");
    let base = attr(group, "data-base");
    let bars: Vec<&str> = svg.lines().filter(|l| l.starts_with("<rect") && l.contains("data-value")).collect();
    assert_eq!(bars.len(), 3);
    for (bar, (_, v)) in bars.iter().zip(&items) {
        let h = attr(bar, "height");
        let y = attr(bar, "y");
        assert!((h / scale - v).abs() < 1e-9 * v.max(1.0));
        assert!((y + h - base).abs() < 1e-9);
    }
    assert!(svg.contains(">n/c<"));
}
