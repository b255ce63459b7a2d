use std::path::Path;
use std::process::{Command, Output};

use ymhd_cli::output::read_columns;
use ymhd_cli::presets::PRESETS;
use ymhd_cli::RunConfig;

const SMALL: &str = r#"
[grid]
n = 8

[background]
profile = "de_sitter"
tau_end_fraction = 0.1

[gauge]
model = "su2_electroweak"

[initial]
amplitude = 1e-3
cutoff = 1

[numerics]
report_every = 2

[output]
plots = true
"#;

fn ymhd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ymhd")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn run_small(dir: &Path, text: &str, out: &str) -> Output {
    let cfg = write_config(dir, &format!("{out}.toml"), text);
    let out_dir = dir.join(out);
    ymhd(&["run", &cfg, "--out", out_dir.to_str().unwrap()])
}

#[test]
fn zero_amplitude_gives_zero_fields() {
    let tmp = tempfile::tempdir().unwrap();
    let text = SMALL.replace("amplitude = 1e-3", "amplitude = 0.0");
    let out = run_small(tmp.path(), &text, "zero");
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let cols = read_columns(&tmp.path().join("zero/energy.csv")).unwrap();
    for (name, values) in &cols {
        if ["tau", "t", "s"].contains(&name.as_str()) {
            continue;
        }
        assert!(values.iter().all(|v| *v == 0.0), "{name} not zero");
    }
    let constraints = read_columns(&tmp.path().join("zero/constraints.csv")).unwrap();
    assert!(constraints.iter().filter(|(n, _)| *n != "tau").all(|(_, v)| v.iter().all(|x| *x == 0.0)));
}

#[test]
fn runs_are_bit_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    assert!(run_small(tmp.path(), SMALL, "a").status.success());
    assert!(run_small(tmp.path(), SMALL, "b").status.success());
    for file in ["energy.csv", "constraints.csv", "decay.json"] {
        let a = std::fs::read(tmp.path().join("a").join(file)).unwrap();
        let b = std::fs::read(tmp.path().join("b").join(file)).unwrap();
        assert_eq!(a, b, "{file} differs");
    }
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("a/metadata.json")).unwrap()).unwrap();
    assert!(meta["config_toml"].as_str().unwrap().contains("su2_electroweak"));
    assert!(meta["fits"]["energy_growth_rate"].is_number());
    let round_trip = RunConfig::from_toml_str(meta["config_toml"].as_str().unwrap()).unwrap();
    assert_eq!(round_trip.gauge.yukawa, 0.8);
}

#[test]
fn validate_reports_every_violation() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = SMALL.replace("tau_end_fraction = 0.1", "tau_end_fraction = 1.5\ncolour = 3").replace("cutoff = 1", "cutoff = 9");
    let cfg = write_config(tmp.path(), "bad.toml", &format!("{bad}\n[extra]\nx = 1\n"));
    let out = ymhd(&["validate", &cfg]);
    assert!(!out.status.success());
    let report: serde_json::Value = serde_json::from_slice(&out.stderr).expect("error JSON on stderr");
    assert_eq!(report["error"]["kind"], "config");
    let violations: Vec<String> =
        report["error"]["violations"].as_array().unwrap().iter().map(|v| v.as_str().unwrap().to_string()).collect();
    let joined = violations.join("\n");
    assert!(joined.contains("extra"), "{joined}");
    assert!(joined.contains("colour"), "{joined}");
    assert!(joined.contains("tau_end_fraction"), "{joined}");
    assert!(joined.contains("cutoff"), "{joined}");

    let ok = ymhd(&["validate", "desitter_u1_small"]);
    assert!(ok.status.success());
    assert!(String::from_utf8_lossy(&ok.stdout).contains("valid"));
}

#[test]
fn stage_failure_writes_error_json() {
    let tmp = tempfile::tempdir().unwrap();
    let table = tmp.path().join("missing.csv");
    let text = SMALL.replace("profile = \"de_sitter\"", &format!("profile = \"table\"\nprofile_table = \"{}\"", table.display()));
    let out = run_small(tmp.path(), &text, "fail");
    assert!(!out.status.success());
    let stderr: serde_json::Value = serde_json::from_slice(&out.stderr).expect("error JSON on stderr");
    assert!(stderr["error"].to_string().contains("missing.csv"), "{stderr}");

    let blow_up = SMALL
        .replace("amplitude = 1e-3", "amplitude = 1e4\nnormalization = \"seed\"")
        .replace("[numerics]", "[numerics]\ncfl = 1.0");
    let out = run_small(tmp.path(), &blow_up, "blow");
    assert!(!out.status.success());
    let written: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("blow/error.json")).unwrap()).unwrap();
    assert_eq!(written["error"]["stage"], "evolution");
}

#[test]
fn replot_regenerates_svgs() {
    let tmp = tempfile::tempdir().unwrap();
    assert!(run_small(tmp.path(), SMALL, "p").status.success());
    let dir = tmp.path().join("p");
    for f in ["energy.svg", "decay.svg", "constraints.svg"] {
        std::fs::remove_file(dir.join(f)).unwrap();
    }
    let out = ymhd(&["replot", dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["energy.svg", "decay.svg", "constraints.svg"] {
        let svg = std::fs::read_to_string(dir.join(f)).unwrap();
        assert!(svg.starts_with("<svg") && svg.contains("<polyline"), "{f}");
    }
    assert!(!ymhd(&["replot", tmp.path().to_str().unwrap()]).status.success());
}

#[test]
fn presets_are_listed_and_written() {
    let tmp = tempfile::tempdir().unwrap();
    let out = ymhd(&["presets", "--write", tmp.path().to_str().unwrap()]);
    assert!(out.status.success());
    let listing = String::from_utf8_lossy(&out.stdout);
    for p in &PRESETS {
        assert!(listing.contains(p.name));
        let written = tmp.path().join(format!("{}.toml", p.name));
        assert!(RunConfig::from_path(&written).is_ok(), "{}", p.name);
    }
}

#[test]
fn readme_config_example_is_valid() {
    let readme = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/../../README.md")).unwrap();
    let start = readme.find("```toml").expect("toml block") + "```toml".len();
    let end = start + readme[start..].find("```").unwrap();
    let cfg = RunConfig::from_toml_str(&readme[start..end]).unwrap();
    cfg.validate().unwrap();
}
