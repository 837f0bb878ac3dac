//! Timing of the direct-sum and pseudospectral right-hand sides.

use std::time::Instant;

use serde::Serialize;

use crate::solver::{Formulation, Stepper};
use crate::spectral::{random_bandlimited, SpectralGrid};
use crate::{Error, Result};

/// The two paths compared by [`bench`].
pub const BENCH_PATHS: [Formulation; 2] = [Formulation::SpectralConvolution, Formulation::SpatialHilbert];

#[derive(Debug, Clone, Serialize)]
pub struct BenchRow {
    pub path: Formulation,
    pub n_modes: usize,
    pub repetitions: usize,
    /// First (cold) step, nanoseconds.
    pub cold_ns: f64,
    /// Fastest warm step, nanoseconds.
    pub min_ns: f64,
    pub mean_ns: f64,
    /// Relative standard deviation of the warm steps.
    pub rel_spread: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    /// Fitted `log t / log N` slope per path, when more than one size ran.
    pub exponents: Vec<(Formulation, f64)>,
}

#[derive(Debug, Clone)]
pub struct BenchOptions {
    pub sizes: Vec<usize>,
    /// Wall-clock budget per (path, size) cell, seconds.
    pub budget: f64,
    pub min_repetitions: usize,
    pub seed: u64,
    /// Worker threads for the timed steps. One keeps the fitted exponents
    /// free of parallel-efficiency effects.
    pub threads: usize,
}

impl Default for BenchOptions {
    fn default() -> Self {
        Self {
            sizes: vec![256, 1024, 4096],
            budget: 0.5,
            min_repetitions: 3,
            seed: 11,
            threads: 1,
        }
    }
}

/// Times full RK4 steps of each path on a random band-limited state.
pub fn bench(opts: &BenchOptions) -> Result<BenchReport> {
    if opts.sizes.is_empty() {
        return Err(Error::InvalidConfig("no bench sizes".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.threads.max(1))
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    pool.install(|| bench_in_pool(opts))
}

fn bench_in_pool(opts: &BenchOptions) -> Result<BenchReport> {
    let mut rows = Vec::new();
    for &n in &opts.sizes {
        let grid = SpectralGrid::new(n, 2.0 * std::f64::consts::PI)?;
        let init = random_bandlimited(&grid, n / 3, opts.seed)?.scaled(1e-3);
        for path in BENCH_PATHS {
            let mut st = Stepper::new(&grid, path);
            let mut y = st.evolved(&init);
            let dt = 1e-9;
            let t0 = Instant::now();
            st.rk4(&mut y, dt);
            let cold_ns = t0.elapsed().as_nanos() as f64;
            let mut samples = Vec::new();
            let start = Instant::now();
            while samples.len() < opts.min_repetitions || start.elapsed().as_secs_f64() < opts.budget {
                let t = Instant::now();
                st.rk4(&mut y, dt);
                samples.push(t.elapsed().as_nanos() as f64);
            }
            let mean = samples.iter().sum::<f64>() / samples.len() as f64;
            let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / samples.len() as f64;
            rows.push(BenchRow {
                path,
                n_modes: n,
                repetitions: samples.len(),
                cold_ns,
                min_ns: samples.iter().copied().fold(f64::INFINITY, f64::min),
                mean_ns: mean,
                rel_spread: var.sqrt() / mean,
            });
        }
    }
    let exponents = if opts.sizes.len() > 1 {
        BENCH_PATHS
            .iter()
            .map(|&p| {
                let pts: Vec<(f64, f64)> = rows
                    .iter()
                    .filter(|r| r.path == p)
                    .map(|r| (r.n_modes as f64, r.min_ns))
                    .collect();
                (p, fit_exponent(&pts))
            })
            .collect()
    } else {
        Vec::new()
    };
    Ok(BenchReport { rows, exponents })
}

/// Least-squares slope of `ln t` against `ln N`.
pub fn fit_exponent(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}
