use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn quasispec(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_quasispec"))
        .arg("--out")
        .arg(out)
        .args(args)
        .env_remove("QUASISPEC_THREADS")
        .output()
        .expect("spawn quasispec")
}

fn success(out: &Path, args: &[&str]) {
    let o = quasispec(out, args);
    assert!(
        o.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&o.stderr)
    );
}

fn rows(path: &Path) -> (String, Vec<Vec<f64>>) {
    let text = fs::read_to_string(path).unwrap();
    assert!(!text.contains('\r'));
    let mut lines = text.lines();
    let header = lines.next().unwrap().to_string();
    let data = lines
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect();
    (header, data)
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn single_site_dos_has_two_atoms() {
    let dir = TempDir::new().unwrap();
    success(
        dir.path(),
        &["dos", "--coupling", "0.5", "--half-width", "0"],
    );
    let (header, data) = rows(&dir.path().join("dos.csv"));
    assert_eq!(header, "position,weight");
    let alpha = (5f64.sqrt() - 1.0) / 2.0;
    assert_eq!(data.len(), 2);
    assert_eq!(data[0][0], 0.0);
    assert!((data[0][1] - (1.0 - alpha)).abs() < 1e-12);
    assert_eq!(data[1][0], 0.5);
    assert!((data[1][1] - alpha).abs() < 1e-12);
    let summary = json(&dir.path().join("dos_summary.json"));
    assert_eq!(summary["interval_count"], 2);
}

#[test]
fn free_dos_has_one_atom_per_level() {
    let dir = TempDir::new().unwrap();
    success(
        dir.path(),
        &[
            "--format",
            "json",
            "dos",
            "--coupling",
            "0",
            "--half-width",
            "10",
        ],
    );
    let dos = json(&dir.path().join("dos.json"));
    let atoms = dos["atoms"].as_array().unwrap();
    assert_eq!(atoms.len(), 21);
    let mass: f64 = atoms.iter().map(|a| a["weight"].as_f64().unwrap()).sum();
    assert!((mass - 1.0).abs() < 1e-10);
    assert_eq!(
        json(&dir.path().join("dos_summary.json"))["distinct_operators"],
        1
    );
}

#[test]
fn convolution_power_is_written() {
    let dir = TempDir::new().unwrap();
    success(
        dir.path(),
        &["dos", "--half-width", "3", "--power", "2", "--exact"],
    );
    let (header, data) = rows(&dir.path().join("dos_power2.csv"));
    assert_eq!(header, "position,weight");
    let mass: f64 = data.iter().map(|r| r[1]).sum();
    assert!((mass - 1.0).abs() < 1e-12);
    assert_eq!(
        json(&dir.path().join("dos_summary.json"))["power"]["mode"],
        "exact"
    );
}

#[test]
fn missing_output_directory_is_an_io_error() {
    let dir = TempDir::new().unwrap();
    let o = quasispec(&dir.path().join("absent"), &["dos", "--half-width", "0"]);
    assert_eq!(o.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("quasispec:"));
}

#[test]
fn invalid_configuration_exits_with_two() {
    let dir = TempDir::new().unwrap();
    let short = quasispec(
        dir.path(),
        &["decay", "--half-width", "5", "--xi-points", "1"],
    );
    assert_eq!(short.status.code(), Some(2));
    let negative = quasispec(dir.path(), &["dos", "--coupling=-1"]);
    assert_eq!(negative.status.code(), Some(2));
    let zero_threads = quasispec(dir.path(), &["--threads", "0", "dos", "--half-width", "0"]);
    assert_eq!(zero_threads.status.code(), Some(2));
}

#[test]
fn decay_writes_trace_and_fit() {
    let dir = TempDir::new().unwrap();
    success(
        dir.path(),
        &[
            "decay",
            "--coupling",
            "0",
            "--half-width",
            "300",
            "--xi-max",
            "100",
            "--xi-points",
            "2001",
        ],
    );
    let (header, data) = rows(&dir.path().join("decay_trace.csv"));
    assert_eq!(header, "xi,re,im,abs");
    assert_eq!(data.len(), 2001);
    assert_eq!(data[0][..2], [0.0, 1.0]);
    let fit = json(&dir.path().join("decay_fit.json"));
    assert_eq!(fit["route"], "moments");
    let eps = fit["fit"]["epsilon"].as_f64().unwrap();
    assert!((eps - 0.5).abs() < 0.05, "epsilon {eps}");
}

#[test]
fn average_starts_at_the_overlap() {
    let dir = TempDir::new().unwrap();
    success(
        dir.path(),
        &[
            "average",
            "--half-width",
            "80",
            "--t-max",
            "10",
            "--t-points",
            "11",
            "--psi",
            "0:1,1:0.5i",
            "--phi",
            "1:2",
        ],
    );
    let (header, data) = rows(&dir.path().join("amplitudes.csv"));
    assert_eq!(header, "t,re,im,abs");
    assert_eq!(data.len(), 11);
    // <ψ, φ> = 0.5i · conj(2)
    assert!(data[0][1].abs() < 1e-12 && (data[0][2] - 1.0).abs() < 1e-12);
}

#[test]
fn free_average_is_j0() {
    let dir = TempDir::new().unwrap();
    success(
        dir.path(),
        &[
            "average",
            "--coupling",
            "0",
            "--t-max",
            "20",
            "--t-points",
            "5",
        ],
    );
    let (_, data) = rows(&dir.path().join("amplitudes.csv"));
    // J0(0), J0(10), J0(20), J0(30), J0(40)
    let expected = [
        1.0,
        -0.245_935_764_451_348_3,
        0.167_024_664_340_583,
        -0.086_367_983_581_040_31,
        0.007_366_890_584_236_951,
    ];
    for (row, e) in data.iter().zip(expected) {
        assert!(
            (row[1] - e).abs() < 1e-10,
            "t={} got {} want {e}",
            row[0],
            row[1]
        );
    }
}

#[test]
fn light_cone_violation_is_numerical() {
    let dir = TempDir::new().unwrap();
    let o = quasispec(
        dir.path(),
        &["average", "--half-width", "60", "--t-max", "10"],
    );
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("light-cone"));
}

#[test]
fn tensor_check_reports() {
    let dir = TempDir::new().unwrap();
    success(dir.path(), &["tensor-check"]);
    let pair = json(&dir.path().join("tensor_check.json"));
    assert!(pair["max_discrepancy"].as_f64().unwrap() <= 1e-10);
    assert_eq!(pair["pass"], true);

    success(
        dir.path(),
        &[
            "tensor-check",
            "--factors",
            "1",
            "--kind",
            "random",
            "--factor-dim",
            "6",
        ],
    );
    let single = json(&dir.path().join("tensor_check.json"));
    assert!(single["max_discrepancy"].as_f64().unwrap() < 1e-12);

    let o = quasispec(
        dir.path(),
        &[
            "tensor-check",
            "--factors",
            "3",
            "--factor-dim",
            "20",
            "--cap",
            "4096",
        ],
    );
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn report_csv_writes_every_section() {
    let dir = TempDir::new().unwrap();
    success(
        dir.path(),
        &[
            "report",
            "--coupling",
            "0",
            "--half-width",
            "300",
            "--xi-max",
            "100",
            "--xi-points",
            "2001",
        ],
    );
    for (name, header) in [
        ("report_summary.csv", "key,value"),
        ("report_envelope.csv", "center,left,right,value"),
        ("report_escape.csv", "center,left,right,value"),
    ] {
        let text = fs::read_to_string(dir.path().join(name)).unwrap();
        assert_eq!(text.lines().next(), Some(header), "{name}");
        assert!(text.lines().count() > 1, "{name}");
    }
    let l2 = fs::read_to_string(dir.path().join("report_l2.csv")).unwrap();
    assert!(l2.lines().count() > 1);

    success(
        dir.path(),
        &[
            "--format",
            "json",
            "report",
            "--coupling",
            "0",
            "--half-width",
            "300",
            "--xi-max",
            "100",
            "--xi-points",
            "2001",
        ],
    );
    let r = json(&dir.path().join("report.json"));
    assert_eq!(r["min_power_for_l2"], 2);
    assert_eq!(r["escape"]["t_max"], 125.0);
}

#[test]
fn outputs_are_reproducible_across_thread_counts() {
    let args = [
        "decay",
        "--half-width",
        "120",
        "--xi-max",
        "200",
        "--xi-points",
        "801",
    ];
    let mut outputs = Vec::new();
    for threads in ["1", "3", "1"] {
        let dir = TempDir::new().unwrap();
        let mut full = vec!["--threads", threads];
        full.extend(args);
        success(dir.path(), &full);
        outputs.push((
            fs::read(dir.path().join("decay_trace.csv")).unwrap(),
            fs::read(dir.path().join("decay_fit.json")).unwrap(),
        ));
    }
    assert!(outputs.windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn seeded_runs_are_reproducible() {
    let run = |seed: &str| {
        let dir = TempDir::new().unwrap();
        success(
            dir.path(),
            &[
                "--seed",
                seed,
                "tensor-check",
                "--kind",
                "fibonacci",
                "--factor-dim",
                "5",
            ],
        );
        fs::read(dir.path().join("tensor_check.json")).unwrap()
    };
    assert_eq!(run("7"), run("7"));
}
