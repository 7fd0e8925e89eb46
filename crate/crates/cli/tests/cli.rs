use std::process::{Command, Output};

use blockade_core::correlations::SeriesEvaluator;
use blockade_core::SystemParams;

fn lab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_blockade-lab"))
        .args(args)
        .env_remove("BLOCKADE_LAB_WORKERS")
        .env("RUST_LOG", "error")
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

/// Column names and numeric rows of a CSV document, error column dropped.
fn table(csv: &str) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut lines = csv.lines().filter(|l| !l.starts_with('#'));
    let header: Vec<String> = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines
        .map(|l| {
            let cells: Vec<&str> = l.split(',').collect();
            cells[..header.len() - 1].iter().map(|c| c.parse().unwrap()).collect()
        })
        .collect();
    (header, rows)
}

fn column(header: &[String], name: &str) -> usize {
    header.iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"))
}

#[test]
fn identical_runs_are_byte_identical() {
    let args = ["g2", "--g0", "0.5w", "--kappa", "0.15w", "--sweep", "delta0:-1:1:9", "--no-timestamp"];
    let a = lab(&args);
    let b = lab(&[&args[..], &["--workers", "3"]].concat());
    assert!(a.status.success());
    let strip = |s: String| s.lines().filter(|l| !l.starts_with("# config")).collect::<Vec<_>>().join("\n");
    assert_eq!(strip(stdout(&a)), strip(stdout(&b)));
    assert_eq!(stdout(&a), stdout(&lab(&args)));
}

#[test]
fn timestamp_only_when_asked() {
    let with = stdout(&lab(&["g2", "--g0", "0", "--kappa", "0.1"]));
    assert!(with.lines().any(|l| l.starts_with("# generated")));
    let without = stdout(&lab(&["g2", "--g0", "0", "--kappa", "0.1", "--no-timestamp"]));
    assert!(!without.lines().any(|l| l.starts_with("# generated")));
}

#[test]
fn empty_cavity_spectrum_is_lorentzian() {
    let out = lab(&["spectrum", "--g0", "0", "--kappa", "0.2", "--Q", "100", "--sweep", "delta0:-1:1:11", "--no-timestamp"]);
    assert!(out.status.success());
    let (header, rows) = table(&stdout(&out));
    let (d, s, q) = (column(&header, "delta0/omega_m"), column(&header, "S_series"), column(&header, "S_integral"));
    for row in rows {
        let lorentz = 0.04 / (0.04 + row[d] * row[d]);
        assert!((row[s] - lorentz).abs() < 1e-12, "{row:?}");
        assert!((row[q] - lorentz).abs() < 1e-9, "{row:?}");
    }
}

#[test]
fn uncoupled_g2_is_one() {
    let out = lab(&["g2", "--g0", "0", "--kappa", "0.1", "--sweep", "delta0:-2:2:21", "--no-timestamp"]);
    assert!(out.status.success());
    let (header, rows) = table(&stdout(&out));
    for row in rows {
        for name in ["g2_series", "g2_approx"] {
            assert!((row[column(&header, name)] - 1.0).abs() < 1e-12);
        }
    }
}

#[test]
fn single_point_matches_library() {
    let p = SystemParams::dimensionless(0.5, 0.15);
    let expected = SeriesEvaluator::new(&p).unwrap().eval(-p.delta_g()).g2;
    let out = lab(&["g2", "--g0", "0.5", "--kappa", "0.15", "--method", "series", "--no-timestamp"]);
    let (header, rows) = table(&stdout(&out));
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0][column(&header, "delta0/omega_m")], -0.25);
    assert_eq!(rows[0][column(&header, "g2_series")], expected);
}

#[test]
fn frequencies_with_units_are_reported_in_mechanical_units() {
    let a = lab(&["g2", "--g0", "0.5", "--kappa", "0.15", "--method", "series", "--no-timestamp"]);
    let b = lab(&[
        "g2", "--omega-m", "10 MHz", "--g0", "5MHz", "--kappa", "0.15w", "--method", "series", "--no-timestamp",
    ]);
    let (ha, ra) = table(&stdout(&a));
    let (_, rb) = table(&stdout(&b));
    let g = column(&ha, "g2_series");
    assert!((ra[0][g] - rb[0][g]).abs() < 1e-12 * ra[0][g]);
    assert!((rb[0][0] + 0.25).abs() < 1e-15);
}

#[test]
fn g2_map_separates_quantum_and_classical_rows() {
    let out = lab(&["g2-map", "--sweep", "g0:0.5:1:2", "--sweep", "kappa:0.1:2:2", "--no-timestamp"]);
    assert!(out.status.success());
    let (header, rows) = table(&stdout(&out));
    assert_eq!(&header[..4], ["g0/omega_m", "kappa/omega_m", "min_g2", "delta0_opt/omega_m"]);
    assert_eq!(rows.len(), 4);
    // (g0, kappa) = (0.5, 0.1), then (0.5, 2).
    assert_eq!((rows[0][0], rows[0][1]), (0.5, 0.1));
    assert!(rows[0][2] < 1.0);
    assert_eq!((rows[1][0], rows[1][1]), (0.5, 2.0));
    assert!((rows[1][2] - 1.0).abs() < 0.05);
}

#[test]
fn oracle_compare_on_an_empty_cavity() {
    let out = lab(&["oracle-compare", "--g0", "0", "--kappa", "0.15", "--Q", "100", "--sweep", "delta0:-0.3:0.3:3", "--no-timestamp"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let (header, rows) = table(&text);
    for row in rows {
        assert!(row[column(&header, "S_rel_dev")] < 1e-8);
        assert!(row[column(&header, "g2_rel_dev")] < 1e-8);
    }
    assert!(text.contains("truncation failures: 0"));
}

#[test]
fn truncation_failure_exits_with_four() {
    let config = tempfile::NamedTempFile::new().unwrap();
    std::fs::write(
        config.path(),
        r#"{"g0": 1.0, "kappa": 0.15, "Q": 1000, "delta0": -1.0, "truncation": {"n_photon_max": 3, "n_phonon_max": 4}}"#,
    )
    .unwrap();
    let out = lab(&["oracle-compare", "--config", config.path().to_str().unwrap(), "--no-timestamp"]);
    assert_eq!(out.status.code(), Some(4));
    let text = stdout(&out);
    assert!(text.contains("truncation failures: 1"));
    assert!(text.contains("leakage"));
}

#[test]
fn usage_errors_exit_with_two() {
    for args in [
        &["g2", "--kappa", "0.1"][..],
        &["g2", "--g0", "0.5", "--kappa", "-1"],
        &["g2", "--g0", "0.5", "--kappa", "3 parsecs"],
        &["g2", "--g0", "0.5", "--kappa", "0.1", "--sweep", "omega_m:1:2:3"],
        &["g2", "--g0", "0.5", "--kappa", "0.1", "--sweep", "delta0:0:1:1"],
        &["g2-map", "--sweep", "g0:0.1:1:3"],
        &["spectrum", "--g0", "0", "--kappa", "0.1", "--method", "approx"],
        &["spectrum", "--g0", "0", "--kappa", "0.1", "--method", "fancy"],
    ] {
        let out = lab(args);
        assert_eq!(out.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn failed_cells_are_nan_with_an_error() {
    let out = lab(&["spectrum", "--g0", "0", "--kappa", "0.1", "--method", "approx", "--no-timestamp"]);
    let text = stdout(&out);
    let row = text.lines().find(|l| !l.starts_with('#') && !l.starts_with("delta0")).unwrap();
    assert!(row.contains("NaN"));
    assert!(row.ends_with("needs g0 > 0\""));
}

#[test]
fn echoed_config_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first.csv");
    let out = lab(&[
        "spectrum", "--g0", "0.25w", "--kappa", "0.1", "--Q", "150", "--T", "0.2nbar", "--sweep", "delta0:-0.5:1.5:5",
        "--method", "series", "--no-timestamp", "--out", first.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert!(stdout(&out).starts_with("rows: 5"));
    let csv = std::fs::read_to_string(&first).unwrap();
    let echoed = csv.lines().find_map(|l| l.strip_prefix("# config: ")).unwrap();

    let config = dir.path().join("config.json");
    std::fs::write(&config, echoed).unwrap();
    let replay = lab(&["spectrum", "--config", config.to_str().unwrap()]);
    assert!(replay.status.success());
    assert_eq!(std::fs::read_to_string(&first).unwrap(), csv);
}

#[test]
fn flags_override_the_config_file() {
    let config = tempfile::NamedTempFile::new().unwrap();
    std::fs::write(config.path(), r#"{"g0": 0.5, "kappa": 0.15, "sweep": ["delta0:-1:1:3"], "method": "approx"}"#).unwrap();
    let path = config.path().to_str().unwrap();
    let out = lab(&["g2", "--config", path, "--kappa", "0.3", "--no-timestamp"]);
    let text = stdout(&out);
    assert!(text.contains(r#""kappa":0.3"#));
    let (header, rows) = table(&text);
    assert_eq!(header, ["delta0/omega_m", "g2_approx", "error"]);
    assert_eq!(rows.len(), 3);
    // A config written for another mode is refused.
    assert_eq!(lab(&["spectrum", "--config", path]).status.code(), Some(0));
    std::fs::write(config.path(), r#"{"mode": "g2-map", "g0": 0.5, "kappa": 0.15}"#).unwrap();
    assert_eq!(lab(&["g2", "--config", path]).status.code(), Some(2));
}
