//! Time integration of the amplitude equation.
//!
//! In coefficient form (see [`crate::spectral`] for the normalisation) the
//! canonical equation reads
//!
//! ```text
//! dc_k/dτ = -i sgn(k) Σ_ℓ Λ(k-ℓ, ℓ) c_{k-ℓ} c_ℓ
//! ```
//!
//! with the sum over the resolved modes. The same dynamics are assembled in
//! four ways: the direct `O(N²)` sum, two pseudospectral spatial forms
//!
//! ```text
//! φ_τ = ½ ℍ[Φ²]_θθ + Φ φ_θθ
//! φ_τ = ℍ[Φ Φ_θθ] - Φ ℍ[Φ_θθ] + ℍ[Φ_θ²]          Φ = ℍ[φ]
//! ```
//!
//! and the `O(N²)` sum for `p_k = |k|^{1/2} c_k`, `dp_k/dτ = -i k Σ S p p`.
//! The spatial forms are written for the multiplier `ℍ ↦ -i sgn(k)`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{existence_time_scale, homogeneous_norm, l1_moment, BlowupIntegral, NormLadder};
use crate::kernels::{lambda_canonical, s_kernel};
use crate::spectral::{symmetrize_coeffs, AmplitudeState, SpectralGrid};
use crate::{sgn, Error, Result};

/// Added to the stiffness scale when choosing `dt`.
pub const DT_FLOOR: f64 = 1e-12;
/// Steps shorter than this abort the run.
pub const DT_UNDERFLOW: f64 = 1e-14;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Formulation {
    SpectralConvolution,
    #[default]
    SpatialHilbert,
    SpatialCommutator,
    Noncanonical,
}

impl Formulation {
    pub const ALL: [Formulation; 4] = [
        Formulation::SpectralConvolution,
        Formulation::SpatialHilbert,
        Formulation::SpatialCommutator,
        Formulation::Noncanonical,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Formulation::SpectralConvolution => "spectral_convolution",
            Formulation::SpatialHilbert => "spatial_hilbert",
            Formulation::SpatialCommutator => "spatial_commutator",
            Formulation::Noncanonical => "noncanonical",
        }
    }
}

impl fmt::Display for Formulation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Formulation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace('-', "_");
        Formulation::ALL
            .into_iter()
            .find(|f| f.as_str() == norm)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown formulation '{s}'")))
    }
}

/// The two spatial assemblies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpatialVariant {
    HilbertSquare,
    Commutator,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub formulation: Formulation,
    pub dt_safety: f64,
    pub t_end: f64,
    pub max_steps: u64,
    pub stop_on_blowup: bool,
    /// Stop once `sup|φ_θ|` exceeds this multiple of its initial value.
    pub gradient_factor: f64,
    /// Stop once `‖ψ‖₀` has drifted by this relative amount.
    pub drift_limit: f64,
    /// Emit diagnostics every this many steps (the first and last are
    /// always emitted).
    pub diagnostics_every: u64,
    /// Hand a snapshot to the sink every this many steps; 0 disables.
    pub snapshot_every: u64,
    pub norms: NormLadder,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            formulation: Formulation::default(),
            dt_safety: 0.5,
            t_end: 1.0,
            max_steps: 10_000_000,
            stop_on_blowup: true,
            gradient_factor: 10.0,
            drift_limit: 1e-4,
            diagnostics_every: 100,
            snapshot_every: 0,
            norms: NormLadder::default(),
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if !(self.dt_safety > 0.0 && self.dt_safety <= 1.0) {
            return bad(format!("dt_safety must lie in (0, 1], got {}", self.dt_safety));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return bad(format!("t_end must be finite and non-negative, got {}", self.t_end));
        }
        if !(self.gradient_factor > 1.0) {
            return bad(format!("gradient_factor must exceed 1, got {}", self.gradient_factor));
        }
        if !(self.drift_limit > 0.0) {
            return bad(format!("drift_limit must be positive, got {}", self.drift_limit));
        }
        if self.diagnostics_every == 0 {
            return bad("diagnostics_every must be at least 1".into());
        }
        self.norms.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    TEnd,
    MaxSteps,
    BlowupDt,
    BlowupGradient,
    Drift,
}

impl StopReason {
    pub fn as_str(self) -> &'static str {
        match self {
            StopReason::TEnd => "t_end",
            StopReason::MaxSteps => "max_steps",
            StopReason::BlowupDt => "blowup_dt",
            StopReason::BlowupGradient => "blowup_gradient",
            StopReason::Drift => "drift",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepDiagnostics {
    pub step: u64,
    pub tau: f64,
    pub dt: f64,
    pub psi_l2: f64,
    pub sup_phi_x: f64,
    /// `max φ - min φ` on the grid.
    pub osc: f64,
    pub hs_norms: BTreeMap<String, f64>,
    pub blowup_integral: f64,
    pub l1_moment: f64,
    /// `|‖ψ(τ)‖₀ - ‖ψ(0)‖₀| / ‖ψ(0)‖₀`.
    pub drift: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationRecord {
    pub formulation: Formulation,
    pub diagnostics: Vec<StepDiagnostics>,
    pub final_state: AmplitudeState,
    pub stop_reason: StopReason,
    pub steps: u64,
    pub initial_psi_l2: f64,
    pub initial_sup_phi_x: f64,
    /// `‖ψ₀‖_{L²}^{1-2/s'} ‖ψ₀‖_{H^{s'}}^{2/s'}`.
    pub scaling_q: f64,
    pub max_drift: f64,
}

/// Receives the diagnostics stream and snapshots of a run.
pub trait DiagnosticsSink {
    fn record(&mut self, diag: &StepDiagnostics) -> Result<()>;

    fn snapshot(&mut self, _step: u64, _state: &AmplitudeState) -> Result<()> {
        Ok(())
    }
}

/// Discards everything.
pub struct NullSink;

impl DiagnosticsSink for NullSink {
    fn record(&mut self, _: &StepDiagnostics) -> Result<()> {
        Ok(())
    }
}

impl DiagnosticsSink for Vec<StepDiagnostics> {
    fn record(&mut self, diag: &StepDiagnostics) -> Result<()> {
        self.push(diag.clone());
        Ok(())
    }
}

// --- variable changes ------------------------------------------------------

/// `p_k = |k|^{1/2} c_k`; the mean is dropped.
pub fn to_noncanonical(phi: &AmplitudeState, grid: &SpectralGrid) -> AmplitudeState {
    let mut s = phi.map_multiplier(grid, |k| Complex64::new(k.abs().sqrt(), 0.0));
    s.coeffs[grid.nyquist_index()] = ZERO;
    s
}

/// Inverse of [`to_noncanonical`], restoring the given mean.
pub fn from_noncanonical(psi: &AmplitudeState, grid: &SpectralGrid, mean: f64) -> AmplitudeState {
    let mut s = psi.map_multiplier(grid, |k| {
        Complex64::new(if k == 0.0 { 0.0 } else { 1.0 / k.abs().sqrt() }, 0.0)
    });
    s.coeffs[0] = Complex64::new(mean, 0.0);
    s.coeffs[grid.nyquist_index()] = ZERO;
    s
}

// --- right-hand sides ------------------------------------------------------

#[inline]
fn slot(m: i64, n: usize) -> usize {
    if m >= 0 {
        m as usize
    } else {
        (n as i64 + m) as usize
    }
}

/// `out_j = factor(j) Σ_ℓ w(j-ℓ, ℓ) y_{j-ℓ} y_ℓ` over resolved modes, for
/// `0 < j < N/2`, completed by Hermitian symmetry.
fn convolution_sum(
    y: &[Complex64],
    out: &mut [Complex64],
    weight: impl Fn(f64, f64) -> f64 + Sync,
    factor: impl Fn(i64) -> Complex64 + Sync,
) {
    let n = y.len();
    let h = (n / 2) as i64;
    let half: Vec<Complex64> = (1..h)
        .into_par_iter()
        .map(|j| {
            let lo = (-h + 1).max(j - h + 1);
            let hi = (h - 1).min(j + h - 1);
            let mut acc = ZERO;
            for l in lo..=hi {
                let m = j - l;
                let w = weight(m as f64, l as f64);
                if w != 0.0 {
                    acc += w * y[slot(m, n)] * y[slot(l, n)];
                }
            }
            factor(j) * acc
        })
        .collect();
    out[0] = ZERO;
    out[n / 2] = ZERO;
    for (j, v) in half.into_iter().enumerate() {
        out[j + 1] = v;
        out[n - j - 1] = v.conj();
    }
}

fn spectral_convolution_into(grid: &SpectralGrid, y: &[Complex64], out: &mut [Complex64]) {
    // Λ is homogeneous of degree 2: evaluate on integer modes and rescale
    let dk = grid.dk();
    let f = -I * dk * dk;
    convolution_sum(y, out, lambda_canonical, |_| f);
}

fn noncanonical_into(grid: &SpectralGrid, y: &[Complex64], out: &mut [Complex64]) {
    // S is homogeneous of degree 1/2
    let dk = grid.dk();
    let f = -I * dk * dk.sqrt();
    convolution_sum(y, out, s_kernel, |j| f * j as f64);
}

/// Scratch buffers for the pseudospectral assemblies.
#[derive(Debug, Default)]
struct Scratch {
    spec_a: Vec<Complex64>,
    spec_b: Vec<Complex64>,
    pad_a: Vec<Complex64>,
    pad_b: Vec<Complex64>,
    fft: Vec<Complex64>,
}

/// Splits the transform of `x + i y` (both real) into the transforms of `x`
/// and `y` at mode index `j`.
#[inline]
fn unpack(z: &[Complex64], j: usize) -> (Complex64, Complex64) {
    let n = z.len();
    let zm = z[(n - j) % n].conj();
    (0.5 * (z[j] + zm), -0.5 * I * (z[j] - zm))
}

fn spatial_into(
    grid: &SpectralGrid,
    variant: SpatialVariant,
    y: &[Complex64],
    out: &mut [Complex64],
    sc: &mut Scratch,
) {
    let n = y.len();
    let h = n / 2;
    let ks = grid.wavenumbers();
    sc.spec_a.resize(n, ZERO);
    sc.spec_b.resize(n, ZERO);
    match variant {
        SpatialVariant::HilbertSquare => {
            // Φ + i φ_θθ
            for j in 0..n {
                let k = ks[j];
                let phi_h = -I * sgn(k) * y[j];
                let phi_xx = -k * k * y[j];
                sc.spec_a[j] = phi_h + I * phi_xx;
            }
            sc.spec_a[h] = ZERO;
            grid.pad_inverse(&sc.spec_a, &mut sc.pad_a, &mut sc.fft);
            for z in sc.pad_a.iter_mut() {
                *z = Complex64::new(z.re * z.re, z.re * z.im);
            }
            grid.pad_forward(&mut sc.pad_a, &mut sc.spec_b, &mut sc.fft);
            out[0] = ZERO;
            out[h] = ZERO;
            for j in 1..h {
                let k = ks[j];
                let (sq, mixed) = unpack(&sc.spec_b, j);
                let v = 0.5 * I * k * k * sq + mixed;
                out[j] = v;
                out[n - j] = v.conj();
            }
        }
        SpatialVariant::Commutator => {
            // Φ + i Φ_θθ and ℍ[Φ_θθ] + i Φ_θ
            for j in 0..n {
                let k = ks[j];
                let hil = -I * sgn(k);
                let phi_h = hil * y[j];
                let phi_h_xx = -k * k * phi_h;
                sc.spec_a[j] = phi_h + I * phi_h_xx;
                sc.spec_b[j] = hil * phi_h_xx + I * (I * k * phi_h);
            }
            sc.spec_a[h] = ZERO;
            sc.spec_b[h] = ZERO;
            grid.pad_inverse(&sc.spec_a, &mut sc.pad_a, &mut sc.fft);
            grid.pad_inverse(&sc.spec_b, &mut sc.pad_b, &mut sc.fft);
            for (a, b) in sc.pad_a.iter_mut().zip(sc.pad_b.iter_mut()) {
                let (phi_h, phi_h_xx, h_phi_h_xx, phi_h_x) = (a.re, a.im, b.re, b.im);
                *a = Complex64::new(phi_h * phi_h_xx, phi_h * h_phi_h_xx);
                *b = Complex64::new(phi_h_x * phi_h_x, 0.0);
            }
            grid.pad_forward(&mut sc.pad_a, &mut sc.spec_a, &mut sc.fft);
            grid.pad_forward(&mut sc.pad_b, &mut sc.spec_b, &mut sc.fft);
            out[0] = ZERO;
            out[h] = ZERO;
            for j in 1..h {
                let hil = -I * sgn(ks[j]);
                let (x, yy) = unpack(&sc.spec_a, j);
                let (w, _) = unpack(&sc.spec_b, j);
                let v = hil * x - yy + hil * w;
                out[j] = v;
                out[n - j] = v.conj();
            }
        }
    }
}

fn check_grid(state: &AmplitudeState, grid: &SpectralGrid) {
    assert_eq!(
        state.coeffs.len(),
        grid.n_modes(),
        "state and grid disagree on the number of modes"
    );
}

/// `dc/dτ` by the direct sum over interacting pairs.
pub fn rhs_spectral_convolution(state: &AmplitudeState, grid: &SpectralGrid) -> AmplitudeState {
    check_grid(state, grid);
    let mut out = AmplitudeState::zeros(grid);
    out.tau = state.tau;
    spectral_convolution_into(grid, &state.coeffs, &mut out.coeffs);
    out
}

/// `dc/dτ` from one of the spatial forms, with dealiased products.
pub fn rhs_spatial(state: &AmplitudeState, grid: &SpectralGrid, variant: SpatialVariant) -> AmplitudeState {
    check_grid(state, grid);
    let mut out = AmplitudeState::zeros(grid);
    out.tau = state.tau;
    spatial_into(grid, variant, &state.coeffs, &mut out.coeffs, &mut Scratch::default());
    out
}

/// `dp/dτ` for the noncanonical variable.
pub fn rhs_noncanonical(psi: &AmplitudeState, grid: &SpectralGrid) -> AmplitudeState {
    check_grid(psi, grid);
    let mut out = AmplitudeState::zeros(grid);
    out.tau = psi.tau;
    noncanonical_into(grid, &psi.coeffs, &mut out.coeffs);
    out
}

/// `dc/dτ` for any formulation, expressed in the canonical variable.
pub fn rhs_canonical(formulation: Formulation, state: &AmplitudeState, grid: &SpectralGrid) -> AmplitudeState {
    match formulation {
        Formulation::SpectralConvolution => rhs_spectral_convolution(state, grid),
        Formulation::SpatialHilbert => rhs_spatial(state, grid, SpatialVariant::HilbertSquare),
        Formulation::SpatialCommutator => rhs_spatial(state, grid, SpatialVariant::Commutator),
        Formulation::Noncanonical => {
            let dp = rhs_noncanonical(&to_noncanonical(state, grid), grid);
            from_noncanonical(&dp, grid, 0.0)
        }
    }
}

/// The discrete triple sum `Σ_k Σ_ℓ k S(k-ℓ, ℓ) p_{k-ℓ} p_ℓ p_{-k}` and the
/// sum of the magnitudes of its terms.
pub fn cyclic_sum(psi: &AmplitudeState, grid: &SpectralGrid) -> (Complex64, f64) {
    check_grid(psi, grid);
    let n = grid.n_modes();
    let h = (n / 2) as i64;
    let p = &psi.coeffs;
    (-h + 1..h)
        .into_par_iter()
        .map(|k| {
            let mut acc = ZERO;
            let mut mag = 0.0;
            for l in (-h + 1).max(k - h + 1)..=(h - 1).min(k + h - 1) {
                let m = k - l;
                let t = k as f64 * s_kernel(m as f64, l as f64) * p[slot(m, n)] * p[slot(l, n)] * p[slot(-k, n)];
                acc += t;
                mag += t.norm();
            }
            (acc, mag)
        })
        .reduce(|| (ZERO, 0.0), |a, b| (a.0 + b.0, a.1 + b.1))
}

// --- time stepping ---------------------------------------------------------

/// Pointwise statistics of a profile on the collocation grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileStats {
    pub sup_phi_x: f64,
    pub osc: f64,
    /// `max |ℍφ|`, the stiffness scale of the equation.
    pub sup_hilbert: f64,
}

/// RK4 integrator with reusable buffers.
pub struct Stepper<'g> {
    grid: &'g SpectralGrid,
    formulation: Formulation,
    scratch: Scratch,
    k: [Vec<Complex64>; 4],
    stage: Vec<Complex64>,
    phys: Vec<Complex64>,
}

impl<'g> Stepper<'g> {
    pub fn new(grid: &'g SpectralGrid, formulation: Formulation) -> Self {
        let n = grid.n_modes();
        Self {
            grid,
            formulation,
            scratch: Scratch::default(),
            k: std::array::from_fn(|_| vec![ZERO; n]),
            stage: vec![ZERO; n],
            phys: vec![ZERO; n],
        }
    }

    /// The evolved variable for a canonical state.
    pub fn evolved(&self, phi: &AmplitudeState) -> AmplitudeState {
        match self.formulation {
            Formulation::Noncanonical => to_noncanonical(phi, self.grid),
            _ => phi.clone(),
        }
    }

    /// The canonical state for an evolved variable.
    pub fn canonical(&self, y: &AmplitudeState, mean: f64) -> AmplitudeState {
        match self.formulation {
            Formulation::Noncanonical => from_noncanonical(y, self.grid, mean),
            _ => y.clone(),
        }
    }

    fn rhs(&mut self, y: &[Complex64], which: usize) {
        let out = &mut self.k[which];
        match self.formulation {
            Formulation::SpectralConvolution => spectral_convolution_into(self.grid, y, out),
            Formulation::SpatialHilbert => {
                spatial_into(self.grid, SpatialVariant::HilbertSquare, y, out, &mut self.scratch)
            }
            Formulation::SpatialCommutator => {
                spatial_into(self.grid, SpatialVariant::Commutator, y, out, &mut self.scratch)
            }
            Formulation::Noncanonical => noncanonical_into(self.grid, y, out),
        }
    }

    /// One classical RK4 step of the evolved variable; stages are projected
    /// back onto Hermitian coefficients with the mean untouched.
    pub fn rk4(&mut self, y: &mut AmplitudeState, dt: f64) {
        let n = y.coeffs.len();
        let mut stage = std::mem::take(&mut self.stage);
        stage.resize(n, ZERO);

        self.rhs(&y.coeffs, 0);
        for (i, b) in [(1usize, 0.5), (2, 0.5), (3, 1.0)] {
            let prev = &self.k[i - 1];
            for j in 0..n {
                stage[j] = y.coeffs[j] + (b * dt) * prev[j];
            }
            symmetrize_coeffs(&mut stage);
            self.rhs(&stage, i);
        }
        self.stage = stage;
        let [k1, k2, k3, k4] = &self.k;
        for j in 0..n {
            y.coeffs[j] += (dt / 6.0) * (k1[j] + 2.0 * (k2[j] + k3[j]) + k4[j]);
        }
        symmetrize_coeffs(&mut y.coeffs);
        y.tau += dt;
    }

    /// Grid statistics of a canonical state.
    pub fn stats(&mut self, phi: &AmplitudeState) -> ProfileStats {
        let n = phi.coeffs.len();
        let ks = self.grid.wavenumbers();
        // φ + i φ_θ in one transform, then ℍφ
        self.phys.resize(n, ZERO);
        for ((z, c), k) in self.phys.iter_mut().zip(&phi.coeffs).zip(ks) {
            *z = c * (1.0 - k);
        }
        self.phys[n / 2] = phi.coeffs[n / 2];
        self.grid.fft_inverse(&mut self.phys);
        let (mut lo, mut hi, mut grad) = (f64::INFINITY, f64::NEG_INFINITY, 0.0f64);
        for z in &self.phys {
            lo = lo.min(z.re);
            hi = hi.max(z.re);
            grad = grad.max(z.im.abs());
        }
        for ((z, c), k) in self.phys.iter_mut().zip(&phi.coeffs).zip(ks) {
            *z = -I * sgn(*k) * c;
        }
        self.phys[n / 2] = ZERO;
        self.grid.fft_inverse(&mut self.phys);
        let sup_hilbert = self.phys.iter().fold(0.0f64, |m, z| m.max(z.re.abs()));
        ProfileStats {
            sup_phi_x: grad,
            osc: hi - lo,
            sup_hilbert,
        }
    }

    /// `dt_safety / (max|ℍφ| k_max² + floor)`.
    pub fn stable_dt(&self, stats: &ProfileStats, dt_safety: f64) -> f64 {
        let km = self.grid.k_max();
        dt_safety / (stats.sup_hilbert * km * km + DT_FLOOR)
    }
}

#[allow(clippy::too_many_arguments)]
fn diagnostics(
    step: u64,
    dt: f64,
    phi: &AmplitudeState,
    psi: &AmplitudeState,
    grid: &SpectralGrid,
    stats: &ProfileStats,
    ladder: &NormLadder,
    integral: &BlowupIntegral,
    norm0: f64,
) -> StepDiagnostics {
    let psi_l2 = homogeneous_norm(psi, grid, 0.0);
    let hs_norms = ladder
        .s_values
        .iter()
        .map(|&s| (format!("{s}"), homogeneous_norm(psi, grid, s)))
        .collect();
    StepDiagnostics {
        step,
        tau: phi.tau,
        dt,
        psi_l2,
        sup_phi_x: stats.sup_phi_x,
        osc: stats.osc,
        hs_norms,
        blowup_integral: integral.value,
        l1_moment: l1_moment(psi, grid),
        drift: relative_drift(psi_l2, norm0),
    }
}

fn relative_drift(now: f64, start: f64) -> f64 {
    if start == 0.0 {
        now
    } else {
        (now - start).abs() / start
    }
}

/// A single adaptive step from `state`, with diagnostics of the result.
pub fn step(
    state: &AmplitudeState,
    cfg: &SolverConfig,
    grid: &SpectralGrid,
) -> Result<(AmplitudeState, StepDiagnostics)> {
    cfg.validate()?;
    let mut st = Stepper::new(grid, cfg.formulation);
    let stats = st.stats(state);
    let dt = st.stable_dt(&stats, cfg.dt_safety);
    if !(dt >= DT_UNDERFLOW) {
        return Err(Error::StepUnderflow { tau: state.tau, dt });
    }
    let psi0 = to_noncanonical(state, grid);
    let mut integral = BlowupIntegral::new(cfg.norms.s_prime)?;
    integral.update(&psi0, grid, 0.0);
    let mut y = st.evolved(state);
    st.rk4(&mut y, dt);
    let next = st.canonical(&y, state.mean());
    let psi = to_noncanonical(&next, grid);
    integral.update(&psi, grid, dt);
    let stats = st.stats(&next);
    let d = diagnostics(
        1,
        dt,
        &next,
        &psi,
        grid,
        &stats,
        &cfg.norms,
        &integral,
        homogeneous_norm(&psi0, grid, 0.0),
    );
    Ok((next, d))
}

/// Integrates from `initial` until `t_end`, blow-up or the step limit.
pub fn run(
    initial: &AmplitudeState,
    cfg: &SolverConfig,
    grid: &SpectralGrid,
    sink: &mut dyn DiagnosticsSink,
) -> Result<SimulationRecord> {
    cfg.validate()?;
    if initial.coeffs.len() != grid.n_modes() {
        return Err(Error::GridMismatch(format!(
            "initial state has {} coefficients, grid has {} modes",
            initial.coeffs.len(),
            grid.n_modes()
        )));
    }
    let mut initial = initial.clone();
    initial.symmetrize();
    let mean = initial.mean();

    let mut st = Stepper::new(grid, cfg.formulation);
    let psi0 = to_noncanonical(&initial, grid);
    let norm0 = homogeneous_norm(&psi0, grid, 0.0);
    let mut integral = BlowupIntegral::new(cfg.norms.s_prime)?;
    integral.update(&psi0, grid, 0.0);
    let scaling_q = existence_time_scale(&psi0, grid, cfg.norms.s_prime)?;

    let mut stats = st.stats(&initial);
    let grad0 = stats.sup_phi_x;
    let mut record = SimulationRecord {
        formulation: cfg.formulation,
        diagnostics: Vec::new(),
        final_state: initial.clone(),
        stop_reason: StopReason::TEnd,
        steps: 0,
        initial_psi_l2: norm0,
        initial_sup_phi_x: grad0,
        scaling_q,
        max_drift: 0.0,
    };
    let first = diagnostics(0, 0.0, &initial, &psi0, grid, &stats, &cfg.norms, &integral, norm0);
    sink.record(&first)?;
    record.diagnostics.push(first);
    if cfg.snapshot_every > 0 {
        sink.snapshot(0, &initial)?;
    }

    let mut y = st.evolved(&initial);
    let mut phi = initial;
    let mut step = 0u64;
    let mut last_dt = 0.0;
    let t_end = cfg.t_end;
    let eps = 1e-14 * t_end.max(1.0);
    let stop = loop {
        if phi.tau >= t_end - eps {
            break StopReason::TEnd;
        }
        if step >= cfg.max_steps {
            break StopReason::MaxSteps;
        }
        let dt = st.stable_dt(&stats, cfg.dt_safety);
        if !(dt >= DT_UNDERFLOW) {
            break StopReason::BlowupDt;
        }
        let dt = dt.min(t_end - phi.tau);
        st.rk4(&mut y, dt);
        step += 1;
        last_dt = dt;
        phi = st.canonical(&y, mean);
        let psi = match cfg.formulation {
            Formulation::Noncanonical => y.clone(),
            _ => to_noncanonical(&phi, grid),
        };
        integral.update(&psi, grid, dt);
        stats = st.stats(&phi);
        let psi_l2 = homogeneous_norm(&psi, grid, 0.0);
        let drift = relative_drift(psi_l2, norm0);
        if drift.is_finite() {
            record.max_drift = record.max_drift.max(drift);
        }

        let finite = psi_l2.is_finite() && stats.sup_hilbert.is_finite();
        let reason = if !finite {
            Some(StopReason::BlowupDt)
        } else if cfg.stop_on_blowup && grad0 > 0.0 && stats.sup_phi_x > cfg.gradient_factor * grad0 {
            Some(StopReason::BlowupGradient)
        } else if cfg.stop_on_blowup && drift > cfg.drift_limit {
            Some(StopReason::Drift)
        } else {
            None
        };
        if step.is_multiple_of(cfg.diagnostics_every) && reason.is_none() {
            let d = diagnostics(step, dt, &phi, &psi, grid, &stats, &cfg.norms, &integral, norm0);
            sink.record(&d)?;
            record.diagnostics.push(d);
        }
        if cfg.snapshot_every > 0 && step.is_multiple_of(cfg.snapshot_every) {
            sink.snapshot(step, &phi)?;
        }
        if let Some(r) = reason {
            break r;
        }
    };

    if record.diagnostics.last().map(|d| d.step) != Some(step) {
        let psi = to_noncanonical(&phi, grid);
        let d = diagnostics(step, last_dt, &phi, &psi, grid, &stats, &cfg.norms, &integral, norm0);
        sink.record(&d)?;
        record.diagnostics.push(d);
    }
    record.final_state = phi;
    record.stop_reason = stop;
    record.steps = step;
    Ok(record)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{random_bandlimited, to_physical};
    use std::f64::consts::PI;

    fn rel_diff(a: &AmplitudeState, b: &AmplitudeState) -> f64 {
        let scale = b.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
        a.max_diff(b) / scale
    }

    #[test]
    fn zero_state_has_zero_rhs() {
        let g = SpectralGrid::new(32, 2.0 * PI).unwrap();
        let z = AmplitudeState::zeros(&g);
        for f in Formulation::ALL {
            assert!(rhs_canonical(f, &z, &g).coeffs.iter().all(|c| c.norm() == 0.0));
        }
    }

    #[test]
    fn single_pair_hand_sum() {
        let g = SpectralGrid::new(32, 3.0).unwrap();
        let k0 = 3i64;
        let c = Complex64::new(0.4, -0.7);
        let mut s = AmplitudeState::zeros(&g);
        s.coeffs[g.index_of(k0).unwrap()] = c;
        s.coeffs[g.index_of(-k0).unwrap()] = c.conj();
        let r = rhs_spectral_convolution(&s, &g);
        // Λ(1, 1) = 1 and Λ has degree 2, so Λ(k₀, k₀) = k₀²
        let kk = k0 as f64 * g.dk();
        let lam = lambda_canonical(kk, kk);
        assert!((lam - kk * kk).abs() < 1e-12);
        let expect = -I * lam * c * c;
        assert!((r.coeffs[g.index_of(2 * k0).unwrap()] - expect).norm() < 1e-13);
        for j in 0..g.n_modes() {
            let m = g.mode_of(j).abs();
            if m != 2 * k0 {
                assert!(r.coeffs[j].norm() < 1e-15, "mode {m}");
            }
        }
        // the noncanonical form gives the same through S(k₀, k₀) = k₀^{1/2}/√2
        let p = to_noncanonical(&s, &g);
        let rp = rhs_noncanonical(&p, &g);
        let pk = p.coeffs[g.index_of(k0).unwrap()];
        let expect_p = -I * (2.0 * kk) * s_kernel(kk, kk) * pk * pk;
        assert!((s_kernel(kk, kk) - kk.sqrt() / 2f64.sqrt()).abs() < 1e-14);
        assert!((rp.coeffs[g.index_of(2 * k0).unwrap()] - expect_p).norm() < 1e-13);
    }

    #[test]
    fn formulations_agree_on_band_limited_states() {
        for (n, len, seed) in [(64, 2.0 * PI, 1), (128, 5.0, 2), (256, 1.3, 3)] {
            let g = SpectralGrid::new(n, len).unwrap();
            let s = random_bandlimited(&g, n / 3, seed).unwrap();
            let reference = rhs_spectral_convolution(&s, &g);
            for f in Formulation::ALL {
                let r = rhs_canonical(f, &s, &g);
                assert!(rel_diff(&r, &reference) < 1e-10, "{f}: {}", rel_diff(&r, &reference));
            }
        }
    }

    #[test]
    fn formulations_agree_on_full_band_states() {
        // the truncated sums coincide for every resolved mode, not only N/3
        let g = SpectralGrid::new(64, 2.0 * PI).unwrap();
        let s = random_bandlimited(&g, 31, 9).unwrap();
        let reference = rhs_spectral_convolution(&s, &g);
        for f in Formulation::ALL {
            assert!(rel_diff(&rhs_canonical(f, &s, &g), &reference) < 1e-10, "{f}");
        }
    }

    #[test]
    fn cyclic_sum_cancels() {
        let g = SpectralGrid::new(64, 2.0 * PI).unwrap();
        for seed in 0..5 {
            let p = to_noncanonical(&random_bandlimited(&g, 31, seed).unwrap(), &g);
            let (v, mag) = cyclic_sum(&p, &g);
            assert!(v.norm() < 1e-12 * mag);
        }
    }

    #[test]
    fn noncanonical_round_trip() {
        let g = SpectralGrid::new(32, 2.0 * PI).unwrap();
        let mut s = random_bandlimited(&g, 10, 4).unwrap();
        s.coeffs[0] = Complex64::new(0.3, 0.0);
        let back = from_noncanonical(&to_noncanonical(&s, &g), &g, 0.3);
        assert!(back.max_diff(&s) < 1e-15);
    }

    #[test]
    fn formulation_names() {
        for f in Formulation::ALL {
            assert_eq!(f.as_str().parse::<Formulation>().unwrap(), f);
        }
        assert_eq!("spatial-hilbert".parse::<Formulation>().unwrap(), Formulation::SpatialHilbert);
        assert!("bogus".parse::<Formulation>().is_err());
    }

    #[test]
    fn zero_state_is_stationary() {
        let g = SpectralGrid::new(32, 2.0 * PI).unwrap();
        let cfg = SolverConfig {
            t_end: 0.1,
            max_steps: 5,
            ..Default::default()
        };
        let (s, d) = step(&AmplitudeState::zeros(&g), &cfg, &g).unwrap();
        assert!(s.coeffs.iter().all(|c| c.norm() == 0.0));
        assert_eq!(d.psi_l2, 0.0);
    }

    #[test]
    fn t_end_zero_gives_initial_record_only() {
        let g = SpectralGrid::new(32, 2.0 * PI).unwrap();
        let s = AmplitudeState::cosine(&g, 0.1, 1).unwrap();
        let cfg = SolverConfig {
            t_end: 0.0,
            ..Default::default()
        };
        let mut sink = Vec::new();
        let rec = run(&s, &cfg, &g, &mut sink).unwrap();
        assert_eq!(rec.steps, 0);
        assert_eq!(rec.stop_reason, StopReason::TEnd);
        assert_eq!(sink.len(), 1);
        assert_eq!(rec.final_state, s);
    }

    #[test]
    fn small_cosine_conserves_per_step() {
        let g = SpectralGrid::new(64, 2.0 * PI).unwrap();
        let s = AmplitudeState::cosine(&g, 1e-3, 1).unwrap();
        for f in Formulation::ALL {
            let cfg = SolverConfig {
                formulation: f,
                ..Default::default()
            };
            let (_, d) = step(&s, &cfg, &g).unwrap();
            assert!(d.drift < 1e-12, "{f}: {}", d.drift);
        }
    }

    #[test]
    fn short_runs_agree_across_formulations() {
        let g = SpectralGrid::new(64, 2.0 * PI).unwrap();
        let s = AmplitudeState::cosine(&g, 1.0, 1).unwrap();
        let finals: Vec<_> = Formulation::ALL
            .iter()
            .map(|&f| {
                let cfg = SolverConfig {
                    formulation: f,
                    t_end: 0.05,
                    ..Default::default()
                };
                let rec = run(&s, &cfg, &g, &mut NullSink).unwrap();
                assert_eq!(rec.stop_reason, StopReason::TEnd);
                to_physical(&rec.final_state, &g).unwrap()
            })
            .collect();
        for f in &finals[1..] {
            let d = f.iter().zip(&finals[0]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(d < 1e-10, "{d}");
        }
    }

    #[test]
    fn config_validation() {
        let bad = [
            SolverConfig { dt_safety: 0.0, ..Default::default() },
            SolverConfig { dt_safety: 1.5, ..Default::default() },
            SolverConfig { t_end: -1.0, ..Default::default() },
            SolverConfig { gradient_factor: 1.0, ..Default::default() },
            SolverConfig { diagnostics_every: 0, ..Default::default() },
        ];
        for c in bad {
            assert!(c.validate().is_err());
        }
        assert!(SolverConfig::default().validate().is_ok());
    }
}
