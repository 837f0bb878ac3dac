use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

use surfwave::spectral::{read_snapshot, write_snapshot, AmplitudeState, SpectralGrid};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_surfwave"));
    c.env_remove("SURFWAVE_THREADS");
    c
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, format!("schema_version = 1\n{body}")).unwrap();
    p
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn ndjson(path: &Path) -> Vec<Value> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

const FIELD_DOMINATED: &str = "[physical]\nv1 = 0.0\nb1 = 3.0\nh1 = 1.0\nnu = 1.0\n";
const SMALL_VERIFY: &str = "[verify]\nsamples = 2000\nrandom_states = 5\ninterpolation_states = 10\nn_modes = 32\n";

#[test]
fn roots_without_real_roots() {
    let d = TempDir::new().unwrap();
    let cfg = write_config(d.path(), "c.toml", FIELD_DOMINATED);
    let o = run(&["roots", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let s = stdout(&o);
    assert!(s.contains("# regime\tno_root"), "{s}");
    assert_eq!(s.lines().filter(|l| !l.starts_with('#')).count(), 1, "header only: {s}");
}

#[test]
fn roots_two_symmetric() {
    // v = 0, B = 1/2, H = ν = 1: λ² - 1/4 = sqrt(1 - λ²) gives λ² = 3/4
    let o = run(&["roots"]);
    assert_eq!(code(&o), 0);
    let s = stdout(&o);
    let rows: Vec<Vec<&str>> = s
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("index"))
        .map(|l| l.split('\t').collect())
        .collect();
    assert_eq!(rows.len(), 2, "{s}");
    for r in &rows {
        let lambda: f64 = r[1].parse().unwrap();
        assert!((lambda.abs() - 0.75f64.sqrt()).abs() < 1e-12);
        assert_eq!(r[4], "two_roots");
        assert_eq!(r[6], "true");
    }
}

#[test]
fn malformed_config_exits_2() {
    let d = TempDir::new().unwrap();
    for (i, body) in ["[grid\nn_modes = 3", "[grid]\nn_modes = 100", "bogus = 1"].iter().enumerate() {
        let cfg = write_config(d.path(), &format!("bad{i}.toml"), body);
        assert_eq!(code(&run(&["roots", "--config", cfg.to_str().unwrap()])), 2, "{body}");
    }
    let missing = d.path().join("missing.toml");
    assert_eq!(code(&run(&["roots", "--config", missing.to_str().unwrap()])), 2);
    assert_eq!(code(&run(&["no-such-command"])), 2);
}

#[test]
fn bad_thread_count_exits_2() {
    let o = bin().args(["roots"]).env("SURFWAVE_THREADS", "zero").output().unwrap();
    assert_eq!(code(&o), 2);
    let o = bin().args(["roots"]).env("SURFWAVE_THREADS", "2").output().unwrap();
    assert_eq!(code(&o), 0);
}

#[test]
fn cosine_runs_to_gradient_blowup() {
    let d = TempDir::new().unwrap();
    let out = d.path().join("run");
    let o = run(&["simulate", "--t-end", "2", "--snapshot-every", "500", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));

    let manifest: Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    let hash = manifest["config_hash"].as_str().unwrap().to_string();
    let lines = ndjson(&out.join("diagnostics.ndjson"));
    assert!(lines.iter().all(|l| l["config_hash"] == hash.as_str()));
    let stop = lines.last().unwrap();
    assert_eq!(stop["kind"], "stop");
    assert_eq!(stop["reason"], "blowup_gradient");
    let tau = stop["tau"].as_f64().unwrap();
    assert!(tau > 0.3 && tau < 1.5, "tau = {tau}");
    assert!(stop["max_drift"].as_f64().unwrap() < 1e-8);

    let snaps: Vec<_> = fs::read_dir(out.join("snapshots")).unwrap().collect();
    assert!(snaps.len() >= 2);
    for f in ["initial.bin", "final.bin"] {
        let s = read_snapshot(&mut fs::File::open(out.join(f)).unwrap()).unwrap();
        assert_eq!(hex::encode(s.manifest_hash), hash);
        assert_eq!(s.grid.n_modes, 256);
    }
    let csv = fs::read_to_string(out.join("final.csv")).unwrap();
    assert!(csv.starts_with(&format!("# config_hash={hash}")));

    // offline analysis of the written snapshots
    let files: Vec<String> = fs::read_dir(out.join("snapshots"))
        .unwrap()
        .map(|e| e.unwrap().path().display().to_string())
        .collect();
    let mut args = vec!["analyze"];
    args.extend(files.iter().map(String::as_str));
    let o = run(&args);
    assert_eq!(code(&o), 0);
    let rows: Vec<Value> = stdout(&o).lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(rows.len(), files.len());
    let taus: Vec<f64> = rows.iter().map(|r| r["tau"].as_f64().unwrap()).collect();
    assert!(taus.windows(2).all(|w| w[0] <= w[1]));
    let psi0 = rows[0]["psi_l2"].as_f64().unwrap();
    assert!(rows.iter().all(|r| (r["psi_l2"].as_f64().unwrap() - psi0).abs() < 1e-8 * psi0));
    assert!(rows.iter().all(|r| r["interpolation"].as_array().unwrap().iter().all(|c| c["pass"] == true)));
}

#[test]
fn zero_t_end_writes_initial_only() {
    let d = TempDir::new().unwrap();
    let out = d.path().join("run");
    let o = run(&["simulate", "--t-end", "0", "--n-modes", "64", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert!(out.join("initial.bin").exists());
    assert!(!out.join("final.bin").exists());
    assert_eq!(fs::read_dir(out.join("snapshots")).unwrap().count(), 0);
    let lines = ndjson(&out.join("diagnostics.ndjson"));
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[1]["steps"], 0);
    assert_eq!(lines[1]["reason"], "t_end");
}

#[test]
fn unusable_root_exits_3() {
    let d = TempDir::new().unwrap();
    let none = write_config(d.path(), "none.toml", FIELD_DOMINATED);
    // |B| = |v| + 1/ν: roots only on the light cone
    let edge = write_config(d.path(), "edge.toml", "[physical]\nv1 = 0.5\nb1 = 1.5\nh1 = 1.0\nnu = 1.0\n");
    for cfg in [none, edge] {
        let out = d.path().join("out");
        let o = run(&["simulate", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
    }
}

#[test]
fn identical_manifests_give_identical_streams() {
    let d = TempDir::new().unwrap();
    let cfg = write_config(
        d.path(),
        "r.toml",
        "seed = 42\n[grid]\nn_modes = 64\n[solver]\nt_end = 0.05\ndiagnostics_every = 7\n[initial]\nprofile = \"random-bandlimited\"\namplitude = 0.2\nband = 6\n",
    );
    let mut streams = Vec::new();
    for i in 0..2 {
        let out = d.path().join(format!("run{i}"));
        let o = run(&["simulate", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert_eq!(code(&o), 0);
        streams.push(fs::read(out.join("diagnostics.ndjson")).unwrap());
    }
    assert_eq!(streams[0], streams[1]);

    let out = d.path().join("other-seed");
    let o = run(&["simulate", "--config", cfg.to_str().unwrap(), "--seed", "43", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert_ne!(fs::read(out.join("diagnostics.ndjson")).unwrap(), streams[0]);
}

fn write_state(path: &Path, state: &AmplitudeState, grid: &SpectralGrid) {
    let mut f = fs::File::create(path).unwrap();
    write_snapshot(&mut f, state, grid, &[0u8; 32]).unwrap();
}

#[test]
fn fields_from_snapshots() {
    let d = TempDir::new().unwrap();
    let cfg = write_config(d.path(), "f.toml", "[grid]\nn_modes = 32\n[fields]\nrows = 9\n");
    let grid = SpectralGrid::new(32, 2.0 * std::f64::consts::PI).unwrap();

    let zero = d.path().join("zero.bin");
    write_state(&zero, &AmplitudeState::zeros(&grid), &grid);
    let out = d.path().join("zero");
    let o = run(&["fields", "--config", cfg.to_str().unwrap(), "--snapshot", zero.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for name in ["v1", "v2", "b1", "b2", "q", "h1", "h2", "e"] {
        let text = fs::read_to_string(out.join(format!("field_{name}.csv"))).unwrap();
        let values: Vec<f64> = text
            .lines()
            .skip(2)
            .map(|l| l.rsplit(',').next().unwrap().parse().unwrap())
            .collect();
        assert!(!values.is_empty());
        assert!(values.iter().all(|v| *v == 0.0), "{name}");
    }

    let single = d.path().join("single.bin");
    write_state(&single, &AmplitudeState::cosine(&grid, 1.0, 2).unwrap(), &grid);
    let out = d.path().join("single");
    let o = run(&["fields", "--config", cfg.to_str().unwrap(), "--snapshot", single.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    let report: Value = serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["pass"], true);
    assert_eq!(report["envelope_ok"], true);
    assert_eq!(report["decay"]["pass"], true);
    assert!((report["decay"]["plasma_rate"].as_f64().unwrap() - 2.0).abs() < 0.02);
    assert!(out.join("fields.bin").exists());

    let mismatched = write_config(d.path(), "m.toml", "[grid]\nn_modes = 64\n");
    let o = run(&["fields", "--config", mismatched.to_str().unwrap(), "--snapshot", single.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 4);

    let garbage = d.path().join("garbage.bin");
    fs::write(&garbage, b"not a snapshot").unwrap();
    let o = run(&["fields", "--config", cfg.to_str().unwrap(), "--snapshot", garbage.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 4);
}

#[test]
fn verify_suites_pass_and_alias_works() {
    let d = TempDir::new().unwrap();
    let cfg = write_config(d.path(), "v.toml", SMALL_VERIFY);
    for cmd in ["verify-kernels", "verify"] {
        let o = run(&[cmd, "--config", cfg.to_str().unwrap()]);
        assert_eq!(code(&o), 0, "{}", stdout(&o));
        let s = stdout(&o);
        for suite in ["kernel-identities", "symmetrisation", "cross-formulation", "conservation", "interpolation"] {
            assert!(s.contains(&format!("# {suite}\tpass")), "{suite}: {s}");
        }
    }
}

#[test]
fn verify_rejects_sigma_outside_unit_interval() {
    let d = TempDir::new().unwrap();
    let cfg = write_config(d.path(), "v.toml", "[verify]\nsigmas = [0.5, 1.2]\n");
    assert_eq!(code(&run(&["verify", "--config", cfg.to_str().unwrap()])), 2);
}

#[test]
fn bench_single_size() {
    let d = TempDir::new().unwrap();
    let cfg = write_config(d.path(), "b.toml", "[bench]\nsizes = [64]\nbudget = 0.0\n");
    let out = d.path().join("bench");
    let o = run(&["bench", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let s = stdout(&o);
    let rows: Vec<&str> = s.lines().filter(|l| !l.starts_with('#') && !l.starts_with("path")).collect();
    assert_eq!(rows.len(), 2, "{s}");
    assert!(!s.contains("# exponent"));
    assert!(out.join("bench.json").exists());
}
