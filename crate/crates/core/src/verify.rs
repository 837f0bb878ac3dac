//! Self-check suites shared by the command-line `verify` command and the
//! test-suite.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::analysis::{interpolation_check, interpolation_constant, interpolation_constant_numeric};
use crate::kernels::identities::{
    branch_identities, canonical_identities, symmetric_form_identities, symmetrisation_check,
    IdentityReport, KernelSet, SuiteOptions, SymmetrisationOptions,
};
use crate::solver::{cyclic_sum, rhs_canonical, run, to_noncanonical, Formulation, NullSink, SolverConfig};
use crate::spectral::{random_bandlimited, AmplitudeState, SpectralGrid};
use crate::Result;

/// Outcome of one suite, with one TSV detail line per check.
#[derive(Debug, Clone, Serialize)]
pub struct SuiteResult {
    pub name: String,
    pub pass: bool,
    pub details: Vec<String>,
    pub seconds: f64,
}

impl SuiteResult {
    fn from_reports(name: &str, reports: &[IdentityReport], started: Instant) -> Self {
        Self {
            name: name.into(),
            pass: reports.iter().all(|r| r.pass),
            details: reports.iter().map(IdentityReport::tsv).collect(),
            seconds: started.elapsed().as_secs_f64(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct VerifyOptions {
    pub kernel: SuiteOptions,
    pub symmetrisation: SymmetrisationOptions,
    /// Grid size of the cross-formulation and conservation checks.
    pub n_modes: usize,
    pub random_states: usize,
    pub interpolation_states: usize,
    pub seed: u64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            kernel: SuiteOptions::default(),
            symmetrisation: SymmetrisationOptions::default(),
            n_modes: 64,
            random_states: 50,
            interpolation_states: 100,
            seed: 0x5eed_0003,
        }
    }
}

/// Symmetry, reality, homogeneity, Hamiltonian and bound checks of `Λ` and
/// `S`, and the agreement of the three forms of the symmetrised kernel.
pub fn kernel_identity_suite(set: &KernelSet, opts: &VerifyOptions) -> SuiteResult {
    let t = Instant::now();
    let mut r = canonical_identities(set, &opts.kernel);
    r.extend(symmetric_form_identities(set, &opts.kernel));
    SuiteResult::from_reports("kernel-identities", &r, t)
}

/// Branch kernels against the symmetrised kernel: decomposition,
/// factorisations and the integral symmetrisation, the latter at each of
/// the kernel suite's `σ` values.
pub fn symmetrisation_suite(set: &KernelSet, opts: &VerifyOptions) -> SuiteResult {
    let t = Instant::now();
    let mut r = branch_identities(set, &opts.kernel);
    for &sigma in &opts.kernel.sigmas {
        let o = SymmetrisationOptions { sigma, ..opts.symmetrisation.clone() };
        r.extend(symmetrisation_check(set, &o).into_iter().map(|mut x| {
            x.name = format!("{}[sigma={sigma}]", x.name);
            x
        }));
    }
    SuiteResult::from_reports("symmetrisation", &r, t)
}

fn relative_max_diff(a: &AmplitudeState, b: &AmplitudeState) -> f64 {
    let scale = b.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        a.max_diff(b)
    } else {
        a.max_diff(b) / scale
    }
}

/// All four right-hand sides agree on random states occupying a third of
/// the resolved band.
pub fn cross_formulation_suite(opts: &VerifyOptions) -> Result<SuiteResult> {
    let t = Instant::now();
    let grid = SpectralGrid::new(opts.n_modes, 2.0 * std::f64::consts::PI)?;
    let tol = 1e-10;
    let mut worst = [0.0f64; 4];
    for i in 0..opts.random_states {
        let s = random_bandlimited(&grid, opts.n_modes / 3, opts.seed.wrapping_add(i as u64))?;
        let reference = rhs_canonical(Formulation::SpectralConvolution, &s, &grid);
        for (w, f) in worst.iter_mut().zip(Formulation::ALL) {
            *w = w.max(relative_max_diff(&rhs_canonical(f, &s, &grid), &reference));
        }
    }
    let details = Formulation::ALL
        .iter()
        .zip(worst)
        .map(|(f, w)| {
            IdentityReport {
                name: format!("rhs.{f}"),
                samples: opts.random_states,
                max_abs_err: w,
                tolerance: tol,
                pass: w <= tol,
            }
            .tsv()
        })
        .collect();
    Ok(SuiteResult {
        name: "cross-formulation".into(),
        pass: worst.iter().all(|w| *w <= tol),
        details,
        seconds: t.elapsed().as_secs_f64(),
    })
}

/// Cyclic cancellation of the discrete cubic sum on random states, and
/// conservation of `‖ψ‖₀` along a short run.
pub fn conservation_suite(opts: &VerifyOptions) -> Result<SuiteResult> {
    let t = Instant::now();
    let grid = SpectralGrid::new(opts.n_modes, 2.0 * std::f64::consts::PI)?;
    let mut cyclic = 0.0f64;
    for i in 0..opts.random_states {
        let s = random_bandlimited(&grid, opts.n_modes / 2 - 1, opts.seed.wrapping_add(1000 + i as u64))?;
        let (v, mag) = cyclic_sum(&to_noncanonical(&s, &grid), &grid);
        cyclic = cyclic.max(v.norm() / mag);
    }
    let cfg = SolverConfig {
        t_end: 0.2,
        ..Default::default()
    };
    let rec = run(&AmplitudeState::cosine(&grid, 1.0, 1)?, &cfg, &grid, &mut NullSink)?;
    let reports = [
        IdentityReport {
            name: "cyclic_sum".into(),
            samples: opts.random_states,
            max_abs_err: cyclic,
            tolerance: 1e-10,
            pass: cyclic <= 1e-10,
        },
        IdentityReport {
            name: "psi_l2_drift".into(),
            samples: rec.steps as usize,
            max_abs_err: rec.max_drift,
            tolerance: 1e-8,
            pass: rec.max_drift <= 1e-8,
        },
    ];
    Ok(SuiteResult::from_reports("conservation", &reports, t))
}

/// Interpolation pairs exercised by [`interpolation_suite`].
pub const INTERPOLATION_PAIRS: [(f64, f64); 3] = [(1.0, -1.5), (2.0, 0.0), (0.75, 0.25)];

/// The `L¹` interpolation inequality on random states, plus the agreement
/// of its closed-form constant with a numerical minimisation.
pub fn interpolation_suite(opts: &VerifyOptions) -> Result<SuiteResult> {
    let states = opts.interpolation_states;
    let t = Instant::now();
    let grid = SpectralGrid::new(opts.n_modes.max(64), 2.0 * std::f64::consts::PI)?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0xabcd);
    let mut reports = Vec::new();
    for (p, q) in INTERPOLATION_PAIRS {
        let c = interpolation_constant(p, q)?;
        let mut const_err = 0.0f64;
        for _ in 0..8 {
            let a = 10f64.powf(rng.gen_range(-3.0..3.0));
            let b = 10f64.powf(rng.gen_range(-3.0..3.0));
            let n = interpolation_constant_numeric(p, q, a, b)?;
            const_err = const_err.max((n - c).abs() / c);
        }
        reports.push(IdentityReport {
            name: format!("interpolation.constant[p={p},q={q}]"),
            samples: 8,
            max_abs_err: const_err,
            tolerance: 1e-8,
            pass: const_err <= 1e-8,
        });
        let mut worst_ratio = 0.0f64;
        let mut all = true;
        for i in 0..states {
            let band = rng.gen_range(1..grid.n_modes() / 2);
            let s = random_bandlimited(&grid, band, opts.seed.wrapping_add(5000 + i as u64))?;
            let psi = to_noncanonical(&s, &grid);
            let r = interpolation_check(&psi, &grid, p, q)?;
            all &= r.pass;
            if r.rhs > 0.0 {
                worst_ratio = worst_ratio.max(r.lhs / r.rhs);
            }
        }
        reports.push(IdentityReport {
            name: format!("interpolation.inequality[p={p},q={q}]"),
            samples: states,
            // reported as the worst lhs/rhs ratio; passing needs ≤ 1
            max_abs_err: worst_ratio,
            tolerance: 1.0 + 1e-10,
            pass: all,
        });
    }
    Ok(SuiteResult::from_reports("interpolation", &reports, t))
}

/// Every suite, in reporting order.
pub fn run_all(set: &KernelSet, opts: &VerifyOptions) -> Result<Vec<SuiteResult>> {
    Ok(vec![
        kernel_identity_suite(set, opts),
        symmetrisation_suite(set, opts),
        cross_formulation_suite(opts)?,
        conservation_suite(opts)?,
        interpolation_suite(opts)?,
    ])
}
