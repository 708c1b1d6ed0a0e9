use std::path::Path;
use std::process::{Command, Output};

fn ppcsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ppcsim"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn simulate_prints_three_dips_at_8mm() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s.csv");
    let o = ppcsim(&["simulate", "--config", "preset:paper-fig4", "--l", "8", "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap().split_whitespace().collect::<Vec<_>>(), ["L_mm", "freq_GHz", "depth", "width_GHz"]);
    assert_eq!(lines.count(), 3);
    let csv = std::fs::read_to_string(&out).unwrap();
    assert_eq!(csv.lines().count(), 1 + 2001);
}

#[test]
fn missing_config_and_out_of_domain_size_are_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s.csv");
    let missing = dir.path().join("nope.toml");
    let o = ppcsim(&["simulate", "--config", p(&missing), "--l", "8", "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(2));
    let o = ppcsim(&["simulate", "--config", "preset:paper-fig4", "--l", "99", "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());
    let o = ppcsim(&["simulate", "--config", "preset:no-such-preset", "--l", "8", "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn sweep_then_classify_finds_both_regimes() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("sweep.csv");
    let tracks = dir.path().join("tracks.csv");
    let o = ppcsim(&["sweep", "--config", "preset:paper-fig4", "--out", p(&data), "--tracks", p(&tracks)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(std::fs::read_to_string(&tracks).unwrap().starts_with("branch,L_mm,freq_GHz,depth,width_GHz"));

    let report = dir.path().join("report.toml");
    let o = ppcsim(&["classify", "--in", p(&data), "--region", "6:9", "--config", "preset:paper-fig4", "--report", p(&report)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("classification = \"repulsion\""), "{}", stdout(&o));
    assert_eq!(std::fs::read_to_string(&report).unwrap(), stdout(&o));

    let o = ppcsim(&["classify", "--in", p(&data), "--region", "13:16", "--config", "preset:paper-fig4"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("classification = \"attraction\""), "{}", stdout(&o));

    for bad in ["9:6", "six:nine", "7"] {
        let o = ppcsim(&["classify", "--in", p(&data), "--region", bad]);
        assert_eq!(o.status.code(), Some(2), "region {bad}");
    }
}

#[test]
fn noisy_sweeps_depend_only_on_the_seed() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, seed: &str| {
        let out = dir.path().join(name);
        let o = ppcsim(&["sweep", "--config", "preset:paper-fig5b", "--out", p(&out), "--noise", "0.01", "--seed", seed]);
        assert_eq!(o.status.code(), Some(0));
        std::fs::read(out).unwrap()
    };
    let a = run("a.csv", "3");
    let b = run("b.csv", "3");
    let c = run("c.csv", "4");
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn fit_recovers_its_own_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data.csv");
    let o = ppcsim(&["sweep", "--config", "preset:paper-fig5a", "--out", p(&data)]);
    assert_eq!(o.status.code(), Some(0));

    let report = dir.path().join("fit.toml");
    let o = ppcsim(&["fit", "--config", "preset:paper-fig5a", "--data", p(&data), "--out", p(&report)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let rms: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("rms = "))
        .unwrap()
        .parse()
        .unwrap();
    assert!(rms < 1e-8, "{text}");
    let coherent: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("coherent.A.B = "))
        .and_then(|v| v.split_whitespace().next())
        .unwrap()
        .parse()
        .unwrap();
    assert!((coherent - 0.2).abs() < 1e-6, "{text}");
    assert!(report.exists());
    assert!(report.with_extension("overlay.csv").exists());
}

#[test]
fn fit_on_a_single_branch_window_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    // a grid that only sees the upper hybrid near 6.7 GHz
    let base = stdout(&ppcsim(&["presets", "--show", "paper-fig5a"]));
    let narrow = base.replace("start = 4.0\nstop = 7.5\npoints = 701", "start = 6.3\nstop = 7.0\npoints = 141");
    assert_ne!(base, narrow);
    let config = dir.path().join("narrow.toml");
    std::fs::write(&config, narrow).unwrap();

    let data = dir.path().join("data.csv");
    let o = ppcsim(&["sweep", "--config", p(&config), "--out", p(&data)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let o = ppcsim(&["fit", "--config", p(&config), "--data", p(&data), "--out", p(&dir.path().join("fit.toml"))]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn presets_are_listed_and_printable() {
    let o = ppcsim(&["presets"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).lines().collect::<Vec<_>>(), ["paper-fig4", "paper-fig5a", "paper-fig5b"]);
    let o = ppcsim(&["presets", "--show", "paper-fig4"]);
    assert!(stdout(&o).contains("preset = \"paper-fig4\""));
    assert_eq!(ppcsim(&["presets", "--show", "nope"]).status.code(), Some(2));
}
