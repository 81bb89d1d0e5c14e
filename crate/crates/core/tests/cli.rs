//! End-to-end tests of the `mixedgain` binary: the exit-code contract
//! (0 pass / 1 check-fail / 2 domain-error / 3 usage-error), byte-identical
//! report determinism across repeated invocations, JSON report shapes, and
//! the simulation campaign's on-disk outputs.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

use mixedgain::supply::Trajectory;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mixedgain"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout must parse as JSON ({e}):\n{}",
            String::from_utf8_lossy(&out.stdout)
        )
    })
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("process not killed by signal")
}

/// G(s) = 3/((s+1)(s+2)) as an on-disk descriptor.
fn write_demo_plant(dir: &Path) -> PathBuf {
    let path = dir.join("demo.json");
    fs::write(
        &path,
        r#"{"kind": "lti", "name": "demo", "a": [0.0, 1.0, -2.0, -3.0],
            "b": [0.0, 1.0], "c": [3.0, 0.0], "d": 0.0}"#,
    )
    .unwrap();
    path
}

/// Saturating-plant supply pair (slope `alpha`, coupling `delta`).
fn write_pwl_spec(dir: &Path, name: &str, alpha: f64, delta: f64) -> PathBuf {
    let path = dir.join(name);
    let spec = serde_json::json!({
        "theta": [[alpha, delta / 2.0], [delta / 2.0, -1.0]],
        "pi": [[1.0, 0.0], [0.0, -1.0]],
        "epsilon": 0.0,
    });
    fs::write(&path, spec.to_string()).unwrap();
    path
}

/// Partner supply pair for the demo plant.
fn write_partner_spec(dir: &Path, epsilon: f64) -> PathBuf {
    let path = dir.join("partner.json");
    let spec = serde_json::json!({
        "theta": [[0.49, 0.0], [0.0, -1.0]],
        "pi": [[2.2801, 0.0], [0.0, -1.0]],
        "epsilon": epsilon,
    });
    fs::write(&path, spec.to_string()).unwrap();
    path
}

#[test]
fn help_and_version_exit_zero() {
    for args in [&["--help"][..], &["certify", "--help"][..], &["--version"][..]] {
        let out = run(args);
        assert_eq!(code(&out), 0, "{args:?} must exit 0");
        assert!(!out.stdout.is_empty(), "{args:?} must print to stdout");
    }
}

#[test]
fn certify_report_shape_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let plant = write_demo_plant(dir.path());
    let args = [
        "certify",
        "--system",
        plant.to_str().unwrap(),
        "--omega-bar",
        "1.4",
        "--margin",
        "0.005",
        "--method",
        "both",
    ];
    let out = run(&args);
    assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));

    let report = stdout_json(&out);
    assert_eq!(report["command"], "certify");
    assert!(report["tool_version"].is_string());
    let digest = report["inputs_digest"].as_str().unwrap();
    assert_eq!(digest.len(), 64, "SHA-256 hex digest");
    assert!(digest.chars().all(|c| c.is_ascii_hexdigit()));
    assert!(report.get("wall_time_ms").is_none(), "wall time must stay out of the JSON");

    let r = &report["results"]["report"];
    assert!((r["mu"].as_f64().unwrap() - 0.7192533225792704).abs() < 1e-12);
    assert!((r["gamma"].as_f64().unwrap() - 1.505).abs() < 1e-12);
    assert!(r["epsilon"].as_f64().unwrap() < 0.0);
    for quantity in ["mu", "gamma", "epsilon"] {
        assert_eq!(report["results"]["report"]["method"][quantity], "both");
    }
    let tol = &report["results"]["tolerances"];
    assert!(tol["hurwitz_margin"].is_number());
    assert!(tol["solver_max_iterations"].is_number());
    assert!(tol["solver_initial_sigma"].is_number());
    assert!(
        String::from_utf8_lossy(&out.stderr).contains("wall time"),
        "wall time goes to stderr"
    );

    let again = run(&args);
    assert_eq!(code(&again), 0);
    assert_eq!(out.stdout, again.stdout, "identical invocations must match byte for byte");
}

#[test]
fn certify_domain_and_usage_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let plant = write_demo_plant(dir.path());
    let plant_arg = plant.to_str().unwrap();

    // Above the realness crossover the low band is no longer strictly
    // passive: a domain error, not a usage error.
    let out = run(&["certify", "--system", plant_arg, "--omega-bar", "1.5"]);
    assert_eq!(code(&out), 2);
    assert!(
        String::from_utf8_lossy(&out.stderr).contains("not strictly passive"),
        "diagnostic names the failure: {}",
        String::from_utf8_lossy(&out.stderr)
    );

    // Unknown flag: usage error via the argument parser.
    let out = run(&["certify", "--system", plant_arg, "--omega-bar", "1.4", "--bogus"]);
    assert_eq!(code(&out), 3);

    // Unreadable input file: usage error.
    let missing = dir.path().join("nope.json");
    let out = run(&["certify", "--system", missing.to_str().unwrap(), "--omega-bar", "1.4"]);
    assert_eq!(code(&out), 3);

    // Malformed JSON: usage error.
    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{not json").unwrap();
    let out = run(&["certify", "--system", bad.to_str().unwrap(), "--omega-bar", "1.4"]);
    assert_eq!(code(&out), 3);
}

#[test]
fn interconnect_stable_pair_with_gain_bound() {
    let dir = tempfile::tempdir().unwrap();
    let s1 = write_pwl_spec(dir.path(), "sat.json", 0.3, 0.05);
    let s2 = write_partner_spec(dir.path(), -0.001);
    let args = [
        "interconnect",
        "--spec1",
        s1.to_str().unwrap(),
        "--spec2",
        s2.to_str().unwrap(),
        "--gain-bound",
        "101",
    ];
    let out = run(&args);
    assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));

    let report = stdout_json(&out);
    assert_eq!(report["command"], "interconnect");
    let verdict = &report["results"]["verdict"];
    assert_eq!(verdict["stable"], true);
    assert_eq!(verdict["hypotheses_ok"], true);
    let intervals = verdict["intervals"].as_array().unwrap();
    assert_eq!(intervals.len(), 3);
    for iv in intervals {
        assert_eq!(iv["empty"], false, "reference pair has three nonempty intervals");
    }
    assert_eq!(verdict["witnesses"].as_array().unwrap().len(), 3);

    let gamma_cl = report["results"]["homotopy"]["gamma_cl"].as_f64().unwrap();
    assert!(
        (gamma_cl - 9377.67220565364).abs() <= 1e-6 * gamma_cl,
        "certified bound drifted: {gamma_cl}"
    );
    assert_eq!(verdict["gain_bound"], report["results"]["homotopy"]["gamma_cl"]);
    assert_eq!(
        report["results"]["homotopy"]["branches"].as_array().unwrap().len(),
        4
    );

    let again = run(&args);
    assert_eq!(out.stdout, again.stdout, "identical invocations must match byte for byte");
}

#[test]
fn interconnect_unstable_and_hypothesis_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let s2 = write_partner_spec(dir.path(), -0.001);
    let s2_arg = s2.to_str().unwrap();

    // Past the slope threshold: clean run, failing verdict, exit 1.
    let steep = write_pwl_spec(dir.path(), "steep.json", 0.5, 0.05);
    let out = run(&["interconnect", "--spec1", steep.to_str().unwrap(), "--spec2", s2_arg]);
    assert_eq!(code(&out), 1);
    let verdict = &stdout_json(&out)["results"]["verdict"];
    assert_eq!(verdict["stable"], false);
    assert_eq!(verdict["intervals"][0]["empty"], true, "the binding pencil empties first");
    assert!(verdict["witnesses"].is_null());

    // Zero shift on the partner violates the hypotheses: exit 2 with the
    // failed hypothesis named on stderr.
    let flat = write_partner_spec(dir.path(), 0.0);
    let s1 = write_pwl_spec(dir.path(), "sat.json", 0.3, 0.05);
    let out = run(&[
        "interconnect",
        "--spec1",
        s1.to_str().unwrap(),
        "--spec2",
        flat.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 2);
    assert!(
        String::from_utf8_lossy(&out.stderr).contains("epsilon2 < 0"),
        "stderr names the failed hypothesis: {}",
        String::from_utf8_lossy(&out.stderr)
    );

    // A gain-bound grid below the homotopy minimum is a usage error.
    let out = run(&[
        "interconnect",
        "--spec1",
        s1.to_str().unwrap(),
        "--spec2",
        s2_arg,
        "--gain-bound",
        "3",
    ]);
    assert_eq!(code(&out), 3);
}

#[test]
fn simulate_open_loop_campaign_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("campaign.json");
    fs::write(
        &config,
        serde_json::json!({
            "name": "saturating plant smoke",
            "system": {"kind": "pwl", "name": "sat03", "alpha": 0.3},
            "suite": {"base_seed": 21, "count": 6, "horizon": 40.0},
            "step": 0.001,
            "checks": ["classify", "storage", "dichotomy", "gain"],
            "spec": {
                "theta": [[0.3, 0.0], [0.0, -1.0]],
                "pi": [[1.0, 0.0], [0.0, -1.0]],
                "epsilon": 0.0,
            },
            "storage": {"eps_s1": 0.5, "delta": 0.0},
            "write_trajectories": true,
        })
        .to_string(),
    )
    .unwrap();

    let out_a = dir.path().join("a");
    let args = ["simulate", "--config", config.to_str().unwrap(), "--out"];
    let run_a = run(&[&args[..], &[out_a.to_str().unwrap()]].concat());
    assert_eq!(code(&run_a), 0, "stderr: {}", String::from_utf8_lossy(&run_a.stderr));

    // stdout and summary.json carry the same report.
    let summary_text = fs::read_to_string(out_a.join("summary.json")).unwrap();
    let stdout_text = String::from_utf8(run_a.stdout.clone()).unwrap();
    assert_eq!(stdout_text.trim_end(), summary_text.trim_end());

    let summary = stdout_json(&run_a);
    assert_eq!(summary["results"]["runs_failed"], 0);
    let runs = summary["results"]["runs"].as_array().unwrap();
    assert_eq!(runs.len(), 6);
    for rec in runs {
        assert_ne!(rec["classification"]["verdict"], "neither");
        assert_eq!(rec["storage_worst_rel"].as_array().unwrap().len(), 3);
        assert_eq!(rec["dichotomy"]["dichotomy_ok"], true);
        assert!(rec["gain"]["input_energy"].as_f64().unwrap() > 0.0);
        assert!(rec["failures"].as_array().unwrap().is_empty());
    }
    assert!(summary["results"]["empirical_gain"].as_f64().unwrap() > 0.0);
    let seeds = summary["seeds"].as_array().unwrap();
    assert!(!seeds.is_empty(), "seed registry must be embedded");

    // Trajectory CSVs: present for every run and stable under a
    // parse/print round trip.
    for i in 0..6 {
        let csv_path = out_a.join(format!("run_{i:03}.csv"));
        assert!(csv_path.exists(), "missing {csv_path:?}");
    }
    let csv_text = fs::read_to_string(out_a.join("run_000.csv")).unwrap();
    let traj = Trajectory::from_csv(&csv_text).unwrap();
    assert_eq!(traj.state_dim, 1);
    assert_eq!(traj.len(), 40_001);
    assert_eq!(traj.to_csv(), csv_text, "CSV must round-trip bit for bit");

    // The whole campaign is deterministic: same stdout, same CSV bytes.
    let out_b = dir.path().join("b");
    let run_b = run(&[&args[..], &[out_b.to_str().unwrap()]].concat());
    assert_eq!(code(&run_b), 0);
    assert_eq!(run_a.stdout, run_b.stdout);
    assert_eq!(
        fs::read(out_a.join("run_000.csv")).unwrap(),
        fs::read(out_b.join("run_000.csv")).unwrap()
    );
}

#[test]
fn simulate_feedback_campaign_writes_partner_trajectories() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("loop.json");
    fs::write(
        &config,
        serde_json::json!({
            "name": "loop smoke",
            "system": {"kind": "pwl", "name": "sat03", "alpha": 0.3},
            "feedback_with": {
                "kind": "lti", "name": "demo",
                "a": [0.0, 1.0, -2.0, -3.0], "b": [0.0, 1.0], "c": [3.0, 0.0], "d": 0.0,
            },
            "suite": {"base_seed": 33, "count": 3, "horizon": 40.0},
            "step": 0.001,
            "checks": ["gain"],
            "write_trajectories": true,
        })
        .to_string(),
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let out = run(&[
        "simulate",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let summary = stdout_json(&out);
    assert_eq!(summary["results"]["runs_failed"], 0);
    for rec in summary["results"]["runs"].as_array().unwrap() {
        assert!(rec["partner_input"].is_object(), "feedback runs record the partner input");
        assert!(rec["gain"]["input_energy"].as_f64().unwrap() > 0.0);
    }
    for i in 0..3 {
        assert!(out_dir.join(format!("run_{i:03}.csv")).exists());
        assert!(out_dir.join(format!("run_{i:03}_partner.csv")).exists());
    }
}

#[test]
fn simulate_config_errors_are_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("empty.json");
    fs::write(
        &config,
        serde_json::json!({
            "name": "empty",
            "system": {"kind": "pwl", "name": "sat03", "alpha": 0.3},
            "suite": {"base_seed": 1, "count": 0, "horizon": 40.0},
            "step": 0.001,
            "checks": ["gain"],
        })
        .to_string(),
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let out = run(&[
        "simulate",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 3);
    assert!(
        String::from_utf8_lossy(&out.stderr).contains("input suite is empty"),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn reproduce_writes_report_when_asked() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["reproduce", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("11 of 11 rows passed"), "summary line:\n{stdout}");

    let report: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("reproduce.json")).unwrap())
            .unwrap();
    assert_eq!(report["command"], "reproduce");
    let rows = report["results"]["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 11);
    for row in rows {
        assert_eq!(row["pass"], true, "row failed: {row}");
    }
}
