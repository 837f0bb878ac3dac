//! First-order plasma and vacuum fields generated by an interface profile.
//!
//! For a usable phase velocity `λ` the plasma perturbation
//! `(v₁, v₂, B₁, B₂, q)` and the vacuum perturbation `(H₁, H₂, E)` are, mode
//! by mode,
//!
//! ```text
//! Û(k, η) = -|k| φ̂ e^{-|k|η} R            (conj R for k < 0),  η > 0
//! V̂(k, η) =  H φ̂ e^{σ|k|η} (-σ|k|, ik, -iνλk),                η < 0
//! R = (λ-v, i(λ-v), -B, -iB, d)
//! ```

use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dispersion::{DispersionRoot, PhysicalConfig};
use crate::spectral::{AmplitudeState, SpectralGrid};
use crate::{Error, Result};

/// Eigenvector residuals above this are an internal inconsistency.
pub const EIGENVECTOR_TOLERANCE: f64 = 1e-10;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

pub const PLASMA_COMPONENTS: [&str; 5] = ["v1", "v2", "b1", "b2", "q"];
pub const VACUUM_COMPONENTS: [&str; 3] = ["h1", "h2", "e"];

/// Null vector of the first-order plasma symbol, components
/// `(v₁, v₂, B₁, B₂, q)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlasmaEigenvector {
    pub r: [Complex64; 5],
}

/// The real symmetric matrices `(𝒜, ℬ)` of the plasma system in the frame
/// moving with speed `λ`.
pub fn system_matrices(root: &DispersionRoot, cfg: &PhysicalConfig) -> ([[f64; 5]; 5], [[f64; 5]; 5]) {
    let w = root.lambda - cfg.v1;
    let b = cfg.b1;
    let a = [
        [w, 0.0, b, 0.0, -1.0],
        [0.0, w, 0.0, b, 0.0],
        [b, 0.0, w, 0.0, 0.0],
        [0.0, b, 0.0, w, 0.0],
        [-1.0, 0.0, 0.0, 0.0, 0.0],
    ];
    let mut bm = [[0.0; 5]; 5];
    bm[1][4] = -1.0;
    bm[4][1] = -1.0;
    (a, bm)
}

/// `‖(i𝒜 - ℬ) r‖₂`.
pub fn eigenvector_residual(r: &[Complex64; 5], root: &DispersionRoot, cfg: &PhysicalConfig) -> f64 {
    let (a, b) = system_matrices(root, cfg);
    (0..5)
        .map(|i| {
            (0..5)
                .map(|j| (I * a[i][j] - b[i][j]) * r[j])
                .sum::<Complex64>()
                .norm_sqr()
        })
        .sum::<f64>()
        .sqrt()
}

fn require_usable(root: &DispersionRoot) -> Result<()> {
    if !root.is_usable() {
        return Err(Error::Domain(format!(
            "root lambda = {} ({}) is not usable",
            root.lambda,
            root.regime.as_str()
        )));
    }
    Ok(())
}

pub fn build_eigenvector(root: &DispersionRoot, cfg: &PhysicalConfig) -> Result<PlasmaEigenvector> {
    require_usable(root)?;
    let w = root.lambda - cfg.v1;
    let b = cfg.b1;
    let r = [
        Complex64::new(w, 0.0),
        Complex64::new(0.0, w),
        Complex64::new(-b, 0.0),
        Complex64::new(0.0, -b),
        Complex64::new(root.d, 0.0),
    ];
    let res = eigenvector_residual(&r, root, cfg);
    let scale = 1.0 + w.abs() + b.abs() + root.d.abs();
    if res > EIGENVECTOR_TOLERANCE * scale {
        return Err(Error::Consistency(format!(
            "eigenvector residual {res:.3e} exceeds tolerance"
        )));
    }
    Ok(PlasmaEigenvector { r })
}

/// Plasma coefficients `(v₁, v₂, B₁, B₂, q)` at one depth, FFT order.
#[derive(Debug, Clone, PartialEq)]
pub struct PlasmaRow {
    pub eta: f64,
    pub components: [Vec<Complex64>; 5],
}

/// Vacuum coefficients `(H₁, H₂, E)` at one depth, FFT order.
#[derive(Debug, Clone, PartialEq)]
pub struct VacuumRow {
    pub eta: f64,
    pub components: [Vec<Complex64>; 3],
}

/// Plasma fields at depth `η ≥ 0` (`η = 0` gives the interface trace).
pub fn plasma_first_order(
    phi: &AmplitudeState,
    grid: &SpectralGrid,
    root: &DispersionRoot,
    cfg: &PhysicalConfig,
    eta: f64,
) -> Result<PlasmaRow> {
    if !(eta >= 0.0) {
        return Err(Error::Domain(format!("plasma rows need eta >= 0, got {eta}")));
    }
    let ev = build_eigenvector(root, cfg)?;
    let n = grid.n_modes();
    let mut components: [Vec<Complex64>; 5] = std::array::from_fn(|_| vec![ZERO; n]);
    for (j, &k) in grid.wavenumbers().iter().enumerate() {
        if k == 0.0 || j == grid.nyquist_index() {
            continue;
        }
        let amp = -k.abs() * phi.coeffs[j] * (-k.abs() * eta).exp();
        for (c, r) in components.iter_mut().zip(ev.r) {
            c[j] = amp * if k > 0.0 { r } else { r.conj() };
        }
    }
    Ok(PlasmaRow { eta, components })
}

/// Vacuum fields at depth `η ≤ 0`.
pub fn vacuum_first_order(
    phi: &AmplitudeState,
    grid: &SpectralGrid,
    root: &DispersionRoot,
    cfg: &PhysicalConfig,
    eta: f64,
) -> Result<VacuumRow> {
    if !(eta <= 0.0) {
        return Err(Error::Domain(format!("vacuum rows need eta <= 0, got {eta}")));
    }
    require_usable(root)?;
    let n = grid.n_modes();
    let (s, h) = (root.sigma, cfg.h1);
    let mut components: [Vec<Complex64>; 3] = std::array::from_fn(|_| vec![ZERO; n]);
    for (j, &k) in grid.wavenumbers().iter().enumerate() {
        if k == 0.0 || j == grid.nyquist_index() {
            continue;
        }
        let amp = h * phi.coeffs[j] * (s * k.abs() * eta).exp();
        components[0][j] = amp * -s * k.abs();
        components[1][j] = amp * I * k;
        components[2][j] = amp * -I * cfg.nu * root.lambda * k;
    }
    Ok(VacuumRow { eta, components })
}

/// Largest modal residual of each linearised interface condition:
///
/// 1. `(λ-v) ik φ + v₂`
/// 2. `ik B φ - B₂`
/// 3. `ik H φ - H₂`
/// 4. `q - H H₁`
/// 5. `E + νλ ik H φ`
pub fn jump_residuals(
    phi: &AmplitudeState,
    grid: &SpectralGrid,
    root: &DispersionRoot,
    cfg: &PhysicalConfig,
) -> Result<[f64; 5]> {
    let p = plasma_first_order(phi, grid, root, cfg, 0.0)?;
    let v = vacuum_first_order(phi, grid, root, cfg, 0.0)?;
    let (w, b, h) = (root.lambda - cfg.v1, cfg.b1, cfg.h1);
    let mut out = [0.0f64; 5];
    for (j, &k) in grid.wavenumbers().iter().enumerate() {
        let f = phi.coeffs[j];
        if k == 0.0 || j == grid.nyquist_index() {
            continue;
        }
        let ik = I * k;
        let r = [
            w * ik * f + p.components[1][j],
            ik * b * f - p.components[3][j],
            ik * h * f - v.components[1][j],
            p.components[4][j] - h * v.components[0][j],
            v.components[2][j] + cfg.nu * root.lambda * ik * h * f,
        ];
        for (o, x) in out.iter_mut().zip(r) {
            *o = o.max(x.norm());
        }
    }
    Ok(out)
}

/// Largest modal residual of `ik v₁ + ∂_η v₂`, `ik B₁ + ∂_η B₂` (plasma) and
/// `ik H₁ + ∂_η H₂` (vacuum), with exact `η`-derivatives of the envelopes.
pub fn divergence_residuals(
    phi: &AmplitudeState,
    grid: &SpectralGrid,
    root: &DispersionRoot,
    cfg: &PhysicalConfig,
    eta_plasma: f64,
    eta_vacuum: f64,
) -> Result<[f64; 3]> {
    let p = plasma_first_order(phi, grid, root, cfg, eta_plasma)?;
    let v = vacuum_first_order(phi, grid, root, cfg, eta_vacuum)?;
    let mut out = [0.0f64; 3];
    for (j, &k) in grid.wavenumbers().iter().enumerate() {
        let ik = I * k;
        let dp = -k.abs();
        let dv = root.sigma * k.abs();
        let r = [
            ik * p.components[0][j] + dp * p.components[1][j],
            ik * p.components[2][j] + dp * p.components[3][j],
            ik * v.components[0][j] + dv * v.components[1][j],
        ];
        for (o, x) in out.iter_mut().zip(r) {
            *o = o.max(x.norm());
        }
    }
    Ok(out)
}

/// Least-squares slope of `-ln(amplitude)` against `|η|`.
pub fn fit_decay_rate(eta: &[f64], amplitude: &[f64]) -> Result<f64> {
    let pts: Vec<(f64, f64)> = eta
        .iter()
        .zip(amplitude)
        .filter(|(_, a)| **a > 0.0)
        .map(|(e, a)| (e.abs(), a.ln()))
        .collect();
    if pts.len() < 2 {
        return Err(Error::Domain("decay fit needs two positive samples".into()));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(Error::Domain("decay fit needs distinct depths".into()));
    }
    Ok(-sxy / sxx)
}

/// Measured versus predicted decay rates for a profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
    pub plasma_rate: f64,
    pub plasma_expected: f64,
    pub vacuum_rate: f64,
    pub vacuum_expected: f64,
    pub pass: bool,
}

/// Fits `ln max_θ |v₁|` and `ln max_θ |H₁|` over the given depths. For a
/// single-mode profile at `|k|` the rates are `|k|` and `σ|k|`; the lowest
/// active wavenumber is used as the prediction otherwise.
pub fn decay_report(
    phi: &AmplitudeState,
    grid: &SpectralGrid,
    root: &DispersionRoot,
    cfg: &PhysicalConfig,
    depths: &[f64],
) -> Result<DecayReport> {
    let k_min = lowest_active_wavenumber(phi, grid)
        .ok_or_else(|| Error::Domain("decay rates need a non-constant profile".into()))?;
    let theta = grid.theta();
    let mut plasma = Vec::with_capacity(depths.len());
    let mut vacuum = Vec::with_capacity(depths.len());
    for &d in depths {
        let p = plasma_first_order(phi, grid, root, cfg, d.abs())?;
        let v = vacuum_first_order(phi, grid, root, cfg, -d.abs())?;
        plasma.push(sup_on(&p.components[0], grid, &theta).0);
        vacuum.push(sup_on(&v.components[0], grid, &theta).0);
    }
    let plasma_rate = fit_decay_rate(depths, &plasma)?;
    let vacuum_rate = if cfg.h1 == 0.0 {
        root.sigma * k_min
    } else {
        fit_decay_rate(depths, &vacuum)?
    };
    let plasma_expected = k_min;
    let vacuum_expected = root.sigma * k_min;
    let pass = (plasma_rate - plasma_expected).abs() <= 0.01 * plasma_expected
        && (vacuum_rate - vacuum_expected).abs() <= 0.01 * vacuum_expected;
    Ok(DecayReport {
        plasma_rate,
        plasma_expected,
        vacuum_rate,
        vacuum_expected,
        pass,
    })
}

fn lowest_active_wavenumber(phi: &AmplitudeState, grid: &SpectralGrid) -> Option<f64> {
    phi.coeffs
        .iter()
        .zip(grid.wavenumbers())
        .filter(|(c, k)| **k != 0.0 && c.norm() > 0.0)
        .map(|(_, k)| k.abs())
        .fold(None, |m: Option<f64>, k| Some(m.map_or(k, |m| m.min(k))))
}

/// Values of a coefficient row at arbitrary `θ` by direct summation.
/// Returns the real parts and the largest imaginary part seen.
fn evaluate_row(row: &[Complex64], grid: &SpectralGrid, theta: &[f64]) -> (Vec<f64>, f64) {
    let ks = grid.wavenumbers();
    let mut worst = 0.0f64;
    let vals = theta
        .iter()
        .map(|&t| {
            let z: Complex64 = row
                .iter()
                .zip(ks)
                .filter(|(c, _)| c.norm_sqr() > 0.0)
                .map(|(c, &k)| c * Complex64::from_polar(1.0, k * t))
                .sum();
            worst = worst.max(z.im.abs());
            z.re
        })
        .collect();
    (vals, worst)
}

fn sup_on(row: &[Complex64], grid: &SpectralGrid, theta: &[f64]) -> (f64, f64) {
    let (v, im) = evaluate_row(row, grid, theta);
    (v.iter().fold(0.0f64, |m, x| m.max(x.abs())), im)
}

/// Physical-space fields on a `(θ, η)` lattice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldSnapshot {
    pub theta: Vec<f64>,
    /// Depths `η ≥ 0` of the plasma rows.
    pub eta_plasma: Vec<f64>,
    /// Depths `η < 0` of the vacuum rows.
    pub eta_vacuum: Vec<f64>,
    /// `plasma[c][row][i]`: component `c` at `eta_plasma[row]`, `theta[i]`.
    pub plasma: Vec<Vec<Vec<f64>>>,
    /// `vacuum[c][row][i]`, as for the plasma.
    pub vacuum: Vec<Vec<Vec<f64>>>,
    /// Interface position `x₂ = ε φ(θ)`.
    pub interface: Vec<f64>,
    pub epsilon: f64,
    /// Largest imaginary part met while summing the Fourier series.
    pub max_imag: f64,
    /// Each field at the deepest row stays below `e^{-rate |η|}` times the
    /// absolute coefficient sum of its interface trace.
    pub decay_ok: bool,
}

/// Evaluates all first-order fields on the given lattice; `η ≥ 0` rows are
/// plasma and `η < 0` rows vacuum.
pub fn render_snapshot(
    phi: &AmplitudeState,
    grid: &SpectralGrid,
    root: &DispersionRoot,
    cfg: &PhysicalConfig,
    theta: &[f64],
    eta: &[f64],
    epsilon: f64,
) -> Result<FieldSnapshot> {
    require_usable(root)?;
    let eta_plasma: Vec<f64> = eta.iter().copied().filter(|e| *e >= 0.0).collect();
    let eta_vacuum: Vec<f64> = eta.iter().copied().filter(|e| *e < 0.0).collect();

    let plasma_rows: Vec<(Vec<Vec<f64>>, f64)> = eta_plasma
        .par_iter()
        .map(|&e| {
            let row = plasma_first_order(phi, grid, root, cfg, e)?;
            Ok(render_components(&row.components, grid, theta))
        })
        .collect::<Result<_>>()?;
    let vacuum_rows: Vec<(Vec<Vec<f64>>, f64)> = eta_vacuum
        .par_iter()
        .map(|&e| {
            let row = vacuum_first_order(phi, grid, root, cfg, e)?;
            Ok(render_components(&row.components, grid, theta))
        })
        .collect::<Result<_>>()?;

    let mut max_imag = 0.0f64;
    let mut plasma: Vec<Vec<Vec<f64>>> = (0..5).map(|_| Vec::with_capacity(eta_plasma.len())).collect();
    for (comps, im) in plasma_rows {
        max_imag = max_imag.max(im);
        for (c, v) in comps.into_iter().enumerate() {
            plasma[c].push(v);
        }
    }
    let mut vacuum: Vec<Vec<Vec<f64>>> = (0..3).map(|_| Vec::with_capacity(eta_vacuum.len())).collect();
    for (comps, im) in vacuum_rows {
        max_imag = max_imag.max(im);
        for (c, v) in comps.into_iter().enumerate() {
            vacuum[c].push(v);
        }
    }

    let (interface, im) = evaluate_row(&phi.coeffs, grid, theta);
    max_imag = max_imag.max(im);
    let interface = interface.into_iter().map(|x| epsilon * x).collect();

    let decay_ok = check_decay(phi, grid, root, cfg, &eta_plasma, &eta_vacuum, &plasma, &vacuum)?;
    Ok(FieldSnapshot {
        theta: theta.to_vec(),
        eta_plasma,
        eta_vacuum,
        plasma,
        vacuum,
        interface,
        epsilon,
        max_imag,
        decay_ok,
    })
}

fn render_components(rows: &[Vec<Complex64>], grid: &SpectralGrid, theta: &[f64]) -> (Vec<Vec<f64>>, f64) {
    let mut worst = 0.0f64;
    let vals = rows
        .iter()
        .map(|r| {
            let (v, im) = evaluate_row(r, grid, theta);
            worst = worst.max(im);
            v
        })
        .collect();
    (vals, worst)
}

#[allow(clippy::too_many_arguments)]
fn check_decay(
    phi: &AmplitudeState,
    grid: &SpectralGrid,
    root: &DispersionRoot,
    cfg: &PhysicalConfig,
    eta_plasma: &[f64],
    eta_vacuum: &[f64],
    plasma: &[Vec<Vec<f64>>],
    vacuum: &[Vec<Vec<f64>>],
) -> Result<bool> {
    let Some(k_min) = lowest_active_wavenumber(phi, grid) else {
        return Ok(true);
    };
    let l1 = |row: &[Complex64]| row.iter().map(|c| c.norm()).sum::<f64>();
    let sup = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let mut ok = true;
    if let Some((i, &e)) = eta_plasma
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
    {
        let trace = plasma_first_order(phi, grid, root, cfg, 0.0)?;
        for (field, tr) in plasma.iter().zip(&trace.components) {
            let bound = (-k_min * e).exp() * l1(tr) * 1.01;
            ok &= sup(&field[i]) <= bound + 1e-300;
        }
    }
    if let Some((i, &e)) = eta_vacuum
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
    {
        let trace = vacuum_first_order(phi, grid, root, cfg, 0.0)?;
        for (field, tr) in vacuum.iter().zip(&trace.components) {
            let bound = (root.sigma * k_min * e).exp() * l1(tr) * 1.01;
            ok &= sup(&field[i]) <= bound + 1e-300;
        }
    }
    Ok(ok)
}

/// CSV with columns `theta,eta,value` for one named component.
pub fn write_field_csv(w: &mut impl Write, snap: &FieldSnapshot, component: &str) -> Result<()> {
    let (rows, etas) = component_rows(snap, component)?;
    writeln!(w, "theta,eta,value")?;
    for (row, eta) in rows.iter().zip(etas) {
        for (t, v) in snap.theta.iter().zip(row) {
            writeln!(w, "{t:.17e},{eta:.17e},{v:.17e}")?;
        }
    }
    Ok(())
}

fn component_rows<'a>(snap: &'a FieldSnapshot, component: &str) -> Result<(&'a [Vec<f64>], &'a [f64])> {
    if let Some(c) = PLASMA_COMPONENTS.iter().position(|n| *n == component) {
        Ok((&snap.plasma[c], &snap.eta_plasma))
    } else if let Some(c) = VACUUM_COMPONENTS.iter().position(|n| *n == component) {
        Ok((&snap.vacuum[c], &snap.eta_vacuum))
    } else {
        Err(Error::InvalidConfig(format!("unknown field component '{component}'")))
    }
}

pub const FIELD_MAGIC: [u8; 8] = *b"SWFLD\0\0\0";
pub const FIELD_VERSION: u32 = 1;

/// Binary layout (little endian): magic, version `u32`, counts of `θ`,
/// plasma rows and vacuum rows (`u32` each), `ε` `f64`, 32-byte manifest
/// hash, the `θ`, plasma `η` and vacuum `η` axes, the interface curve, then
/// the five plasma and three vacuum components row by row, all `f64`.
pub fn write_field_binary(w: &mut impl Write, snap: &FieldSnapshot, manifest_hash: &[u8; 32]) -> Result<()> {
    let put = |w: &mut dyn Write, xs: &[f64]| -> std::io::Result<()> {
        for x in xs {
            w.write_all(&x.to_le_bytes())?;
        }
        Ok(())
    };
    w.write_all(&FIELD_MAGIC)?;
    w.write_all(&FIELD_VERSION.to_le_bytes())?;
    for n in [snap.theta.len(), snap.eta_plasma.len(), snap.eta_vacuum.len()] {
        w.write_all(&(n as u32).to_le_bytes())?;
    }
    w.write_all(&snap.epsilon.to_le_bytes())?;
    w.write_all(manifest_hash)?;
    put(w, &snap.theta)?;
    put(w, &snap.eta_plasma)?;
    put(w, &snap.eta_vacuum)?;
    put(w, &snap.interface)?;
    for comp in snap.plasma.iter().chain(&snap.vacuum) {
        for row in comp {
            put(w, row)?;
        }
    }
    Ok(())
}
