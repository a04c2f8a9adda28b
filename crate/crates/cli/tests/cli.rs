use std::path::Path;
use std::process::{Command, Output};
use std::sync::Arc;

use nanorod::energy::Deformation;
use nanorod::io::write_deformation;
use nanorod::lattice::{CrossSection, RodLattice};

const MODEL: &str = r#"
[model.cell]
kind = "pair"
nn = { kind = "trunc_harmonic", stiffness = 1.0, plateau_plus = 0.3, plateau_minus = 0.3 }
nnn = { kind = "trunc_harmonic", stiffness = 1.0, plateau_plus = 0.3, plateau_minus = 0.3 }
"#;

fn nanorod(dir: &Path, config: &str, args: &[&str]) -> Output {
    let path = dir.join("run.toml");
    std::fs::write(&path, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_nanorod"))
        .args(args)
        .arg("--config")
        .arg(&path)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn converge_writes_the_study_table() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = format!(
        "{MODEL}\n[frame]\nlength = 2.0\nsegments = [{{ kind = \"arc\", curvature = 0.2 }}]\n\n[study]\nk = [8, 16]\n"
    );
    let o = nanorod(dir.path(), &cfg, &["converge", "--seed", "4", "--threads", "1"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "k,kE,E_lim_elastic,E_lim_crack,rel_err,broken_slices,wall_ms");
    assert_eq!(lines.len(), 3);

    let out = dir.path().join("rows.json");
    let o = nanorod(dir.path(), &cfg, &["converge", "--format", "json", "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let rows: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out).unwrap()).unwrap();
    assert_eq!(rows.as_array().unwrap().len(), 2);
    assert_eq!(rows[0]["k"], 8);
}

#[test]
fn limit_reports_the_crack_energy() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = format!(
        "{MODEL}\n[frame]\nlength = 2.0\nsegments = [{{ kind = \"straight\" }}, {{ kind = \"straight\" }}]\njumps = [{{ position = 1.0, translation = [0.5, 0.0, 0.0] }}]\n"
    );
    let o = nanorod(dir.path(), &cfg, &["limit", "--format", "json"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!((v["total"].as_f64().unwrap() - 3.6).abs() < 1e-12);
    assert_eq!(v["jumps"][0]["method"], "explicit");
}

#[test]
fn energy_reads_a_deformation_file() {
    let dir = tempfile::tempdir().unwrap();
    let lat = Arc::new(RodLattice::new(CrossSection::unit_square(), 1.0, 4).unwrap());
    let def = Deformation::from_fn(lat, |x| 2.0 * x).unwrap();
    write_deformation(&dir.path().join("stretched.txt"), &def).unwrap();
    let cfg = format!("{MODEL}\n[energy]\ndeformation = \"stretched.txt\"\n");
    let o = nanorod(dir.path(), &cfg, &["energy", "--format", "csv"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[0], "4");
    // every bond sits on its plateau
    assert!(row[2].parse::<f64>().unwrap() > 0.0);
}

#[test]
fn qrel_and_check_produce_tables() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = format!("{MODEL}\n[qrel]\ngenerators = [[0.0, 0.2, 0.0]]\n\n[check]\nk = [4, 8]\nsamples = 50\n");
    let o = nanorod(dir.path(), &cfg, &["qrel"]);
    assert!(o.status.success());
    let v: f64 = stdout(&o).lines().nth(1).unwrap().rsplit(',').next().unwrap().parse().unwrap();
    assert!((v - 0.2 * 0.2 * 7.0 / 3.0).abs() < 1e-10, "{v}");
    let o = nanorod(dir.path(), &cfg, &["check", "--format", "json"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(!v["checks"].as_array().unwrap().is_empty());
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = nanorod(dir.path(), &format!("{MODEL}\nunknown_key = 1\n"), &["limit"]);
    assert_eq!(o.status.code(), Some(2));
    let o = nanorod(dir.path(), &format!("cross_section = [[0, 0], [3, 0]]\n{MODEL}"), &["qrel"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("cross_section"));
    let o = nanorod(dir.path(), MODEL, &["converge"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn numerical_failures_exit_with_three() {
    let dir = tempfile::tempdir().unwrap();
    // jumps 0.1 apart cannot both host a splice window
    let cfg = format!(
        "{MODEL}\n[frame]\nlength = 2.0\nsegments = [{{ kind = \"straight\" }}, {{ kind = \"straight\" }}, {{ kind = \"straight\" }}]\njumps = [{{ position = 1.0, translation = [0.5, 0.0, 0.0] }}, {{ position = 1.1, translation = [0.5, 0.0, 0.0] }}]\n\n[study]\nk = [16]\n"
    );
    let o = nanorod(dir.path(), &cfg, &["converge"]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}
