//! Subcommand implementations.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use serde::Serialize;
use serde_json::{json, Value};

use surfwave::analysis::{
    existence_time_scale, homogeneous_norm, inhomogeneous_norm, interpolation_check, l1_moment,
    BlowupIntegral,
};
use surfwave::bench::{bench, BenchOptions};
use surfwave::dispersion::{critical_field, find_roots, regime_of, DispersionRoot, ParameterCase};
use surfwave::fields::{
    decay_report, divergence_residuals, jump_residuals, render_snapshot, write_field_binary,
    write_field_csv,
};
use surfwave::kernels::identities::{KernelSet, SuiteOptions, SymmetrisationOptions};
use surfwave::solver::{run, to_noncanonical, DiagnosticsSink, StepDiagnostics};
use surfwave::spectral::{
    read_snapshot, write_coefficients_csv, write_snapshot, AmplitudeState, Snapshot, SpectralGrid,
};
use surfwave::verify::{run_all, VerifyOptions, INTERPOLATION_PAIRS};

use crate::config::Config;
use crate::exit::{self, Failure};

type CmdResult = Result<u8, Failure>;

const PLASMA_NAMES: [&str; 5] = ["v1", "v2", "b1", "b2", "q"];
const VACUUM_NAMES: [&str; 3] = ["h1", "h2", "e"];

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    let f = File::create(path)
        .with_context(|| format!("creating {}", path.display()))
        .map_err(Failure::other)?;
    Ok(BufWriter::new(f))
}

fn ensure_dir(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir)
        .with_context(|| format!("creating {}", dir.display()))
        .map_err(Failure::other)
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), Failure> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

/// The root selected by the configuration, if it is usable.
fn chosen_root(cfg: &Config) -> Result<DispersionRoot, Failure> {
    let roots = find_roots(&cfg.physical)?;
    let regime = regime_of(&roots);
    let root = roots.get(cfg.root.index).copied().ok_or_else(|| {
        if roots.is_empty() {
            Failure::physics(anyhow!("no dispersion root (regime {})", regime.as_str()))
        } else {
            Failure::config(anyhow!(
                "root.index = {} but only {} root(s) exist",
                cfg.root.index,
                roots.len()
            ))
        }
    })?;
    if !root.is_usable() {
        return Err(Failure::physics(anyhow!(
            "root {} (lambda = {}) is not usable (regime {})",
            cfg.root.index,
            root.lambda,
            root.regime.as_str()
        )));
    }
    Ok(root)
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(|| "-".into(), |v| format!("{v:.12e}"))
}

pub fn roots(cfg: &Config) -> CmdResult {
    let roots = find_roots(&cfg.physical)?;
    let case = cfg.physical.parameter_case();
    let case_name = serde_json::to_value(case)?;
    println!("# case\t{}", case_name.as_str().unwrap_or("?"));
    println!("# regime\t{}", regime_of(&roots).as_str());
    if case == ParameterCase::FlowDominated {
        println!("# critical_field\t{}", fmt_opt(critical_field(&cfg.physical)?));
    }
    println!("index\tlambda\tsigma\td\tregime\trescale\tusable");
    for (i, r) in roots.iter().enumerate() {
        println!(
            "{i}\t{:.15e}\t{:.15e}\t{:.15e}\t{}\t{}\t{}",
            r.lambda,
            r.sigma,
            r.d,
            r.regime.as_str(),
            fmt_opt(r.rescale),
            r.is_usable()
        );
    }
    Ok(exit::OK)
}

/// Streams diagnostics as NDJSON and periodic snapshots as binary files.
struct RunSink {
    ndjson: BufWriter<File>,
    snapshots: PathBuf,
    grid: SpectralGrid,
    hash: [u8; 32],
    hash_hex: String,
}

impl RunSink {
    fn line(&mut self, kind: &str, payload: Value) -> surfwave::Result<()> {
        let mut obj = serde_json::Map::new();
        obj.insert("kind".into(), kind.into());
        obj.insert("config_hash".into(), self.hash_hex.clone().into());
        if let Value::Object(m) = payload {
            obj.extend(m);
        }
        serde_json::to_writer(&mut self.ndjson, &obj).map_err(std::io::Error::from)?;
        self.ndjson.write_all(b"\n")?;
        Ok(())
    }
}

impl DiagnosticsSink for RunSink {
    fn record(&mut self, diag: &StepDiagnostics) -> surfwave::Result<()> {
        let v = serde_json::to_value(diag).map_err(std::io::Error::from)?;
        self.line("diagnostics", v)
    }

    fn snapshot(&mut self, step: u64, state: &AmplitudeState) -> surfwave::Result<()> {
        let path = self.snapshots.join(format!("step_{step:010}.bin"));
        let mut w = BufWriter::new(File::create(path)?);
        write_snapshot(&mut w, state, &self.grid, &self.hash)?;
        w.flush()?;
        Ok(())
    }
}

fn save_state(dir: &Path, stem: &str, state: &AmplitudeState, grid: &SpectralGrid, hash: &[u8; 32]) -> Result<(), Failure> {
    let mut w = create(&dir.join(format!("{stem}.bin")))?;
    write_snapshot(&mut w, state, grid, hash)?;
    w.flush()?;
    let mut w = create(&dir.join(format!("{stem}.csv")))?;
    writeln!(w, "# config_hash={} tau={:.17e}", hex::encode(hash), state.tau)?;
    write_coefficients_csv(&mut w, state, grid)?;
    w.flush()?;
    Ok(())
}

pub fn simulate(cfg: &Config, out: &Path) -> CmdResult {
    let root = chosen_root(cfg)?;
    let grid = cfg.spectral_grid()?;
    let initial = cfg.initial.build(&grid, cfg.seed)?;
    let manifest = cfg.manifest();
    let hash = manifest.hash_bytes();

    ensure_dir(out)?;
    let snapshots = out.join("snapshots");
    ensure_dir(&snapshots)?;
    write_json(&out.join("manifest.json"), &manifest)?;
    save_state(out, "initial", &initial, &grid, &hash)?;

    let mut sink = RunSink {
        ndjson: create(&out.join("diagnostics.ndjson"))?,
        snapshots,
        grid: grid.clone(),
        hash,
        hash_hex: manifest.config_hash.clone(),
    };
    let rec = run(&initial, &cfg.solver, &grid, &mut sink)?;
    let tau = rec.final_state.tau;
    sink.line(
        "stop",
        json!({
            "reason": rec.stop_reason.as_str(),
            "steps": rec.steps,
            "tau": tau,
            // slow time of the physical problem, τ = τ_canonical / c
            "tau_physical": root.rescale.map(|c| tau / c),
            "root_lambda": root.lambda,
            "root_sigma": root.sigma,
            "initial_psi_l2": rec.initial_psi_l2,
            "initial_sup_phi_x": rec.initial_sup_phi_x,
            "scaling_q": rec.scaling_q,
            "max_drift": rec.max_drift,
        }),
    )?;
    sink.ndjson.flush()?;
    if rec.steps > 0 {
        save_state(out, "final", &rec.final_state, &grid, &hash)?;
    }
    println!(
        "stop\t{}\tsteps\t{}\ttau\t{:.6}\tconfig_hash\t{}",
        rec.stop_reason.as_str(),
        rec.steps,
        tau,
        manifest.config_hash
    );
    Ok(exit::OK)
}

fn verify_options(cfg: &Config) -> VerifyOptions {
    let v = &cfg.verify;
    VerifyOptions {
        kernel: SuiteOptions {
            samples: v.samples,
            sigmas: v.sigmas.clone(),
            ..Default::default()
        },
        symmetrisation: SymmetrisationOptions::default(),
        n_modes: v.n_modes,
        random_states: v.random_states,
        interpolation_states: v.interpolation_states,
        seed: VerifyOptions::default().seed ^ cfg.seed,
    }
}

/// Runs every suite with the given kernels; prints one TSV line per check
/// and a pass/fail line per suite.
pub fn verify_with(cfg: &Config, set: &KernelSet) -> CmdResult {
    let suites = run_all(set, &verify_options(cfg))?;
    println!("suite\tcheck\tsamples\tmax_err\tstatus");
    let mut all = true;
    for s in &suites {
        for d in &s.details {
            println!("{}\t{d}", s.name);
        }
    }
    for s in &suites {
        all &= s.pass;
        println!("# {}\t{}\t{:.2}s", s.name, if s.pass { "pass" } else { "FAIL" }, s.seconds);
    }
    Ok(if all { exit::OK } else { exit::FAILED })
}

pub fn verify(cfg: &Config) -> CmdResult {
    verify_with(cfg, &KernelSet::default())
}

fn load_snapshot(path: &Path) -> Result<Snapshot, Failure> {
    let f = File::open(path)
        .with_context(|| format!("opening {}", path.display()))
        .map_err(Failure::artifact)?;
    read_snapshot(&mut std::io::BufReader::new(f))
        .with_context(|| format!("reading {}", path.display()))
        .map_err(Failure::artifact)
}

pub fn fields(cfg: &Config, snapshot: &Path, out: &Path) -> CmdResult {
    let snap = load_snapshot(snapshot)?;
    if snap.grid.n_modes != cfg.grid.n_modes || snap.grid.length != cfg.grid.length {
        return Err(Failure::artifact(anyhow!(
            "snapshot grid (N = {}, L = {}) does not match the configuration (N = {}, L = {})",
            snap.grid.n_modes,
            snap.grid.length,
            cfg.grid.n_modes,
            cfg.grid.length
        )));
    }
    let root = chosen_root(cfg)?;
    let grid = cfg.spectral_grid()?;
    let phi = AmplitudeState::from_coeffs(&grid, snap.state.coeffs.clone(), snap.state.tau)?;
    let manifest = cfg.manifest();
    let hash = manifest.hash_bytes();
    let fc = &cfg.fields;

    let theta = grid.theta();
    let field = render_snapshot(&phi, &grid, &root, &cfg.physical, &theta, &fc.eta(), fc.epsilon)?;
    ensure_dir(out)?;
    for name in PLASMA_NAMES.iter().chain(&VACUUM_NAMES) {
        let mut w = create(&out.join(format!("field_{name}.csv")))?;
        writeln!(w, "# config_hash={} tau={:.17e}", manifest.config_hash, phi.tau)?;
        write_field_csv(&mut w, &field, name)?;
        w.flush()?;
    }
    let mut w = create(&out.join("interface.csv"))?;
    writeln!(w, "# config_hash={} tau={:.17e}", manifest.config_hash, phi.tau)?;
    writeln!(w, "theta,x2")?;
    for (t, x) in field.theta.iter().zip(&field.interface) {
        writeln!(w, "{t:.17e},{x:.17e}")?;
    }
    w.flush()?;
    let mut w = create(&out.join("fields.bin"))?;
    write_field_binary(&mut w, &field, &hash)?;
    w.flush()?;

    let jumps = jump_residuals(&phi, &grid, &root, &cfg.physical)?;
    let depth = fc.decay_depths.iter().fold(0.0f64, |m, d| m.max(d.abs()));
    let divergence = divergence_residuals(&phi, &grid, &root, &cfg.physical, depth, -depth)?;
    let constant = phi.coeffs.iter().skip(1).all(|c| c.norm() == 0.0);
    let decay = if constant {
        None
    } else {
        Some(decay_report(&phi, &grid, &root, &cfg.physical, &fc.decay_depths)?)
    };
    let jump_ok = jumps.iter().all(|r| *r <= 1e-10);
    let pass = jump_ok && field.decay_ok && decay.is_none_or(|d| d.pass);
    let report = json!({
        "config_hash": manifest.config_hash,
        "snapshot": snapshot.display().to_string(),
        "snapshot_hash": hex::encode(snap.manifest_hash),
        "tau": phi.tau,
        "root": root,
        "jump_residuals": jumps,
        "divergence_residuals": divergence,
        "decay": decay,
        "envelope_ok": field.decay_ok,
        "max_imag": field.max_imag,
        "pass": pass,
    });
    write_json(&out.join("report.json"), &report)?;
    println!(
        "fields\tjump_max\t{:.3e}\tenvelope\t{}\tdecay\t{}\t{}",
        jumps.iter().fold(0.0f64, |m, r| m.max(*r)),
        if field.decay_ok { "pass" } else { "FAIL" },
        decay.map_or("n/a", |d| if d.pass { "pass" } else { "FAIL" }),
        if pass { "pass" } else { "FAIL" }
    );
    Ok(if pass { exit::OK } else { exit::FAILED })
}

pub fn analyze(cfg: &Config, snapshots: &[PathBuf], out: Option<&Path>) -> CmdResult {
    if snapshots.is_empty() {
        return Err(Failure::config(anyhow!("analyze needs at least one snapshot file")));
    }
    let mut loaded = Vec::new();
    for p in snapshots {
        loaded.push((p.clone(), load_snapshot(p)?));
    }
    let spec = loaded[0].1.grid;
    if let Some((p, _)) = loaded.iter().find(|(_, s)| s.grid != spec) {
        return Err(Failure::artifact(anyhow!("{} is on a different grid", p.display())));
    }
    loaded.sort_by(|a, b| a.1.state.tau.total_cmp(&b.1.state.tau));
    let grid = SpectralGrid::from_spec(spec)?;
    let ladder = &cfg.norms;
    let mut integral = BlowupIntegral::new(ladder.s_prime)?;
    let mut prev_tau = None;

    let mut lines = Vec::new();
    for (path, snap) in &loaded {
        let phi = AmplitudeState::from_coeffs(&grid, snap.state.coeffs.clone(), snap.state.tau)?;
        let psi = to_noncanonical(&phi, &grid);
        let d_tau = prev_tau.map_or(0.0, |t| phi.tau - t);
        integral.update(&psi, &grid, d_tau);
        prev_tau = Some(phi.tau);
        let homogeneous: serde_json::Map<String, Value> = ladder
            .s_values
            .iter()
            .map(|&s| (format!("{s}"), homogeneous_norm(&psi, &grid, s).into()))
            .collect();
        let inhomogeneous: serde_json::Map<String, Value> = ladder
            .s_values
            .iter()
            .map(|&s| (format!("{s}"), inhomogeneous_norm(&psi, &grid, s).into()))
            .collect();
        let mut interp = Vec::new();
        for (p, q) in INTERPOLATION_PAIRS {
            let r = interpolation_check(&psi, &grid, p, q)?;
            interp.push(json!({"p": p, "q": q, "lhs": r.lhs, "rhs": r.rhs, "pass": r.pass}));
        }
        lines.push(json!({
            "kind": "snapshot",
            "file": path.display().to_string(),
            "snapshot_hash": hex::encode(snap.manifest_hash),
            "tau": phi.tau,
            "psi_l2": homogeneous_norm(&psi, &grid, 0.0),
            "homogeneous_norms": homogeneous,
            "inhomogeneous_norms": inhomogeneous,
            "l1_moment": l1_moment(&psi, &grid),
            "blowup_integrand": integral.integrand(&psi, &grid),
            "blowup_integral": integral.value,
            "existence_time_scale": existence_time_scale(&psi, &grid, ladder.s_prime)?,
            "interpolation": interp,
        }));
    }
    let mut sink: Box<dyn Write> = match out {
        Some(dir) => {
            ensure_dir(dir)?;
            Box::new(create(&dir.join("analysis.ndjson"))?)
        }
        None => Box::new(std::io::stdout().lock()),
    };
    for l in &lines {
        serde_json::to_writer(&mut sink, l)?;
        writeln!(sink)?;
    }
    sink.flush()?;
    Ok(exit::OK)
}

pub fn bench_cmd(cfg: &Config, out: Option<&Path>) -> CmdResult {
    let b = &cfg.bench;
    let report = bench(&BenchOptions {
        sizes: b.sizes.clone(),
        budget: b.budget,
        min_repetitions: b.min_repetitions.max(1),
        seed: cfg.seed,
        threads: b.threads,
    })?;
    println!("path\tn_modes\treps\tmin_ns_per_step\tmean_ns_per_step\tcold_ns\trel_spread");
    for r in &report.rows {
        println!(
            "{}\t{}\t{}\t{:.0}\t{:.0}\t{:.0}\t{:.3}",
            r.path, r.n_modes, r.repetitions, r.min_ns, r.mean_ns, r.cold_ns, r.rel_spread
        );
    }
    for (p, e) in &report.exponents {
        println!("# exponent\t{p}\t{e:.3}");
    }
    if let Some(dir) = out {
        ensure_dir(dir)?;
        write_json(&dir.join("bench.json"), &report)?;
    }
    Ok(exit::OK)
}
