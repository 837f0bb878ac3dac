//! Periodic pseudospectral discretisation.
//!
//! Coefficients are stored in FFT order (`j = 0, 1, …, N/2, -N/2+1, …, -1`)
//! and normalised so that `φ(θ) = Σ c_j e^{i k_j θ}`; the forward transform
//! carries the `1/N`. The continuum transform is recovered as `φ̂ ≈ c / Δk`.

use std::fmt;
use std::io::{Read, Write};
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::{sgn, Error, Result};

/// Tolerance on `|c_{-j} - conj(c_j)|` accepted by [`to_physical`].
pub const HERMITIAN_TOLERANCE: f64 = 1e-10;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Uniform periodic grid of `N` points on `[0, L)`.
#[derive(Clone)]
pub struct SpectralGrid {
    n: usize,
    length: f64,
    wavenumbers: Vec<f64>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    fwd_pad: Arc<dyn Fft<f64>>,
    inv_pad: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for SpectralGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpectralGrid")
            .field("n_modes", &self.n)
            .field("length", &self.length)
            .finish()
    }
}

impl PartialEq for SpectralGrid {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.length == other.length
    }
}

/// Serializable description of a grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n_modes: usize,
    pub length: f64,
}

impl SpectralGrid {
    pub fn new(n_modes: usize, length: f64) -> Result<Self> {
        if n_modes < 16 || !n_modes.is_power_of_two() {
            return Err(Error::InvalidConfig(format!(
                "n_modes must be a power of two >= 16, got {n_modes}"
            )));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "length must be positive and finite, got {length}"
            )));
        }
        let dk = 2.0 * std::f64::consts::PI / length;
        let wavenumbers = (0..n_modes)
            .map(|i| mode_of(i, n_modes) as f64 * dk)
            .collect();
        let mut planner = FftPlanner::new();
        let m = 3 * n_modes / 2;
        Ok(Self {
            n: n_modes,
            length,
            wavenumbers,
            fwd: planner.plan_fft_forward(n_modes),
            inv: planner.plan_fft_inverse(n_modes),
            fwd_pad: planner.plan_fft_forward(m),
            inv_pad: planner.plan_fft_inverse(m),
        })
    }

    pub fn from_spec(spec: GridSpec) -> Result<Self> {
        Self::new(spec.n_modes, spec.length)
    }

    pub fn spec(&self) -> GridSpec {
        GridSpec {
            n_modes: self.n,
            length: self.length,
        }
    }

    pub fn n_modes(&self) -> usize {
        self.n
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    /// Wavenumber spacing `Δk = 2π/L`.
    pub fn dk(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.length
    }

    /// Largest resolved wavenumber, `(N/2) Δk`.
    pub fn k_max(&self) -> f64 {
        (self.n / 2) as f64 * self.dk()
    }

    /// Wavenumbers in FFT order; the Nyquist slot holds `+(N/2) Δk`.
    pub fn wavenumbers(&self) -> &[f64] {
        &self.wavenumbers
    }

    /// Collocation points `θ_m = m L / N`.
    pub fn theta(&self) -> Vec<f64> {
        (0..self.n)
            .map(|m| m as f64 * self.length / self.n as f64)
            .collect()
    }

    /// Storage index of integer mode `j`, if it is resolved.
    pub fn index_of(&self, j: i64) -> Option<usize> {
        let h = (self.n / 2) as i64;
        if j > h || j <= -h {
            None
        } else if j >= 0 {
            Some(j as usize)
        } else {
            Some((self.n as i64 + j) as usize)
        }
    }

    /// Integer mode number stored at index `i`.
    pub fn mode_of(&self, i: usize) -> i64 {
        mode_of(i, self.n)
    }

    pub fn nyquist_index(&self) -> usize {
        self.n / 2
    }

    /// Size of the zero-padded product grid.
    pub fn padded_len(&self) -> usize {
        3 * self.n / 2
    }

    pub(crate) fn fft_inverse(&self, buf: &mut [Complex64]) {
        self.inv.process(buf);
    }

    pub(crate) fn fft_forward(&self, buf: &mut [Complex64]) {
        self.fwd.process(buf);
    }

    /// Scatter coefficients into a padded buffer and transform to the
    /// padded physical grid.
    pub(crate) fn pad_inverse(&self, coeffs: &[Complex64], buf: &mut Vec<Complex64>, scratch: &mut Vec<Complex64>) {
        let m = self.padded_len();
        let h = self.n / 2;
        buf.clear();
        buf.resize(m, ZERO);
        buf[..h].copy_from_slice(&coeffs[..h]);
        buf[m - h + 1..].copy_from_slice(&coeffs[h + 1..]);
        scratch.resize(self.inv_pad.get_inplace_scratch_len(), ZERO);
        self.inv_pad.process_with_scratch(buf, scratch);
    }

    /// Transform a padded physical buffer back and truncate to the resolved
    /// modes, Nyquist zeroed.
    pub(crate) fn pad_forward(&self, buf: &mut [Complex64], out: &mut [Complex64], scratch: &mut Vec<Complex64>) {
        let m = self.padded_len();
        let h = self.n / 2;
        scratch.resize(self.fwd_pad.get_inplace_scratch_len(), ZERO);
        self.fwd_pad.process_with_scratch(buf, scratch);
        let scale = 1.0 / m as f64;
        for (o, b) in out[..h].iter_mut().zip(&buf[..h]) {
            *o = b * scale;
        }
        out[h] = ZERO;
        for (o, b) in out[h + 1..].iter_mut().zip(&buf[m - h + 1..]) {
            *o = b * scale;
        }
    }
}

/// Hermitian projection of raw FFT-ordered coefficients; see
/// [`AmplitudeState::symmetrize`].
pub fn symmetrize_coeffs(c: &mut [Complex64]) {
    let n = c.len();
    c[0].im = 0.0;
    c[n / 2] = ZERO;
    for j in 1..n / 2 {
        let avg = 0.5 * (c[j] + c[n - j].conj());
        c[j] = avg;
        c[n - j] = avg.conj();
    }
}

fn mode_of(i: usize, n: usize) -> i64 {
    if i <= n / 2 {
        i as i64
    } else {
        i as i64 - n as i64
    }
}

/// Fourier coefficients of the real interface profile at slow time `tau`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmplitudeState {
    pub coeffs: Vec<Complex64>,
    pub tau: f64,
}

impl AmplitudeState {
    pub fn zeros(grid: &SpectralGrid) -> Self {
        Self {
            coeffs: vec![ZERO; grid.n_modes()],
            tau: 0.0,
        }
    }

    /// Wraps raw coefficients, checking the length and enforcing the
    /// Hermitian/Nyquist invariants.
    pub fn from_coeffs(grid: &SpectralGrid, coeffs: Vec<Complex64>, tau: f64) -> Result<Self> {
        if coeffs.len() != grid.n_modes() {
            return Err(Error::GridMismatch(format!(
                "{} coefficients for a grid of {} modes",
                coeffs.len(),
                grid.n_modes()
            )));
        }
        let mut s = Self { coeffs, tau };
        let mismatch = s.hermitian_mismatch();
        if mismatch > HERMITIAN_TOLERANCE {
            return Err(Error::NotHermitian {
                max_mismatch: mismatch,
            });
        }
        s.symmetrize();
        Ok(s)
    }

    /// `amplitude · cos(mode · 2πθ/L)`.
    pub fn cosine(grid: &SpectralGrid, amplitude: f64, mode: i64) -> Result<Self> {
        Self::single_mode(grid, Complex64::new(0.5 * amplitude, 0.0), mode)
    }

    /// `amplitude · sin(mode · 2πθ/L)`.
    pub fn sine(grid: &SpectralGrid, amplitude: f64, mode: i64) -> Result<Self> {
        Self::single_mode(grid, Complex64::new(0.0, -0.5 * amplitude), mode)
    }

    fn single_mode(grid: &SpectralGrid, c: Complex64, mode: i64) -> Result<Self> {
        let h = (grid.n_modes() / 2) as i64;
        if mode <= 0 || mode >= h {
            return Err(Error::InvalidConfig(format!(
                "mode {mode} outside 1..{h}"
            )));
        }
        let mut s = Self::zeros(grid);
        s.coeffs[grid.index_of(mode).unwrap()] = c;
        s.coeffs[grid.index_of(-mode).unwrap()] = c.conj();
        Ok(s)
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// The mean of the physical profile.
    pub fn mean(&self) -> f64 {
        self.coeffs[0].re
    }

    /// Largest violation of `c_{-j} = conj(c_j)`, including `Im c_0` and
    /// `Im c_{N/2}`.
    pub fn hermitian_mismatch(&self) -> f64 {
        let n = self.coeffs.len();
        let mut worst = self.coeffs[0].im.abs().max(self.coeffs[n / 2].im.abs());
        for j in 1..n / 2 {
            worst = worst.max((self.coeffs[n - j] - self.coeffs[j].conj()).norm());
        }
        worst
    }

    /// Projects onto Hermitian coefficients with a real mean and a zero
    /// Nyquist mode.
    pub fn symmetrize(&mut self) {
        symmetrize_coeffs(&mut self.coeffs);
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        Self {
            coeffs: self.coeffs.iter().map(|c| c * alpha).collect(),
            tau: self.tau,
        }
    }

    /// Largest coefficient difference.
    pub fn max_diff(&self, other: &Self) -> f64 {
        self.coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Coefficients multiplied by `m(k_j)`.
    pub fn map_multiplier(&self, grid: &SpectralGrid, m: impl Fn(f64) -> Complex64) -> Self {
        Self {
            coeffs: self
                .coeffs
                .iter()
                .zip(grid.wavenumbers())
                .map(|(c, &k)| c * m(k))
                .collect(),
            tau: self.tau,
        }
    }

    /// Translates the profile by `shift` in `θ`: `φ(θ) ↦ φ(θ - shift)`.
    pub fn translated(&self, grid: &SpectralGrid, shift: f64) -> Self {
        let mut s = self.map_multiplier(grid, |k| Complex64::from_polar(1.0, -k * shift));
        s.symmetrize();
        s
    }
}

/// Zero-mean state with modes `1..=band` drawn uniformly from the unit
/// square (and their conjugates).
pub fn random_bandlimited(grid: &SpectralGrid, band: usize, seed: u64) -> Result<AmplitudeState> {
    if band == 0 || band >= grid.n_modes() / 2 {
        return Err(Error::InvalidConfig(format!(
            "band {band} outside 1..{}",
            grid.n_modes() / 2
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = AmplitudeState::zeros(grid);
    for j in 1..=band as i64 {
        let c = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        s.coeffs[grid.index_of(j).unwrap()] = c;
        s.coeffs[grid.index_of(-j).unwrap()] = c.conj();
    }
    Ok(s)
}

/// Values of the profile at the collocation points.
pub fn to_physical(state: &AmplitudeState, grid: &SpectralGrid) -> Result<Vec<f64>> {
    check_len(state, grid)?;
    let mismatch = state.hermitian_mismatch();
    if mismatch > HERMITIAN_TOLERANCE {
        return Err(Error::NotHermitian {
            max_mismatch: mismatch,
        });
    }
    let mut buf = state.coeffs.clone();
    grid.fft_inverse(&mut buf);
    Ok(buf.into_iter().map(|z| z.re).collect())
}

/// Coefficients of real samples at the collocation points. The Nyquist mode
/// is discarded.
pub fn to_spectral(values: &[f64], grid: &SpectralGrid) -> Result<AmplitudeState> {
    if values.len() != grid.n_modes() {
        return Err(Error::GridMismatch(format!(
            "{} samples for a grid of {} modes",
            values.len(),
            grid.n_modes()
        )));
    }
    let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    grid.fft_forward(&mut buf);
    let scale = 1.0 / grid.n_modes() as f64;
    buf.iter_mut().for_each(|c| *c *= scale);
    let mut s = AmplitudeState {
        coeffs: buf,
        tau: 0.0,
    };
    s.symmetrize();
    Ok(s)
}

/// Hilbert transform, multiplier `-i sgn(k)`.
pub fn hilbert(state: &AmplitudeState, grid: &SpectralGrid) -> AmplitudeState {
    let mut s = state.map_multiplier(grid, |k| Complex64::new(0.0, -sgn(k)));
    s.coeffs[grid.nyquist_index()] = ZERO;
    s
}

/// Spectral derivative of order 1 or 2, multiplier `(ik)^order`.
pub fn derivative(state: &AmplitudeState, grid: &SpectralGrid, order: u32) -> Result<AmplitudeState> {
    let mut s = match order {
        1 => state.map_multiplier(grid, |k| Complex64::new(0.0, k)),
        2 => state.map_multiplier(grid, |k| Complex64::new(-k * k, 0.0)),
        _ => {
            return Err(Error::InvalidConfig(format!(
                "derivative order must be 1 or 2, got {order}"
            )))
        }
    };
    if order % 2 == 1 {
        s.coeffs[grid.nyquist_index()] = ZERO;
    }
    Ok(s)
}

/// Product of two profiles, computed on a 3N/2 grid so that every retained
/// mode `|j| < N/2` is alias-free.
pub fn dealiased_product(
    a: &AmplitudeState,
    b: &AmplitudeState,
    grid: &SpectralGrid,
) -> Result<AmplitudeState> {
    check_len(a, grid)?;
    check_len(b, grid)?;
    // pack both real signals into one complex transform
    let packed: Vec<Complex64> = a
        .coeffs
        .iter()
        .zip(&b.coeffs)
        .map(|(x, y)| x + Complex64::i() * y)
        .collect();
    let mut buf = Vec::new();
    let mut scratch = Vec::new();
    grid.pad_inverse(&packed, &mut buf, &mut scratch);
    for z in buf.iter_mut() {
        *z = Complex64::new(z.re * z.im, 0.0);
    }
    let mut out = vec![ZERO; grid.n_modes()];
    grid.pad_forward(&mut buf, &mut out, &mut scratch);
    let mut s = AmplitudeState {
        coeffs: out,
        tau: a.tau,
    };
    s.symmetrize();
    Ok(s)
}

fn check_len(state: &AmplitudeState, grid: &SpectralGrid) -> Result<()> {
    if state.coeffs.len() != grid.n_modes() {
        Err(Error::GridMismatch(format!(
            "state has {} coefficients, grid has {} modes",
            state.coeffs.len(),
            grid.n_modes()
        )))
    } else {
        Ok(())
    }
}

// --- snapshots -------------------------------------------------------------

pub const SNAPSHOT_MAGIC: [u8; 8] = *b"SWSNAP\0\0";
pub const SNAPSHOT_VERSION: u32 = 1;

/// A decoded snapshot file.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub grid: GridSpec,
    pub state: AmplitudeState,
    /// Hash of the run manifest that produced the snapshot (zeros if none).
    pub manifest_hash: [u8; 32],
}

/// Binary layout (little endian): magic, version `u32`, `N` `u32`, `L` `f64`,
/// `tau` `f64`, 32-byte manifest hash, then `N` `(re, im)` pairs in FFT order.
pub fn write_snapshot(
    w: &mut impl Write,
    state: &AmplitudeState,
    grid: &SpectralGrid,
    manifest_hash: &[u8; 32],
) -> Result<()> {
    check_len(state, grid)?;
    w.write_all(&SNAPSHOT_MAGIC)?;
    w.write_all(&SNAPSHOT_VERSION.to_le_bytes())?;
    w.write_all(&(grid.n_modes() as u32).to_le_bytes())?;
    w.write_all(&grid.length().to_le_bytes())?;
    w.write_all(&state.tau.to_le_bytes())?;
    w.write_all(manifest_hash)?;
    for c in &state.coeffs {
        w.write_all(&c.re.to_le_bytes())?;
        w.write_all(&c.im.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_snapshot(r: &mut impl Read) -> Result<Snapshot> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if magic != SNAPSHOT_MAGIC {
        return Err(Error::Format("not a snapshot file".into()));
    }
    let version = read_u32(r)?;
    if version != SNAPSHOT_VERSION {
        return Err(Error::Format(format!("unsupported snapshot version {version}")));
    }
    let n = read_u32(r)? as usize;
    let length = read_f64(r)?;
    let tau = read_f64(r)?;
    let mut manifest_hash = [0u8; 32];
    r.read_exact(&mut manifest_hash)?;
    if n == 0 || n > (1 << 26) {
        return Err(Error::Format(format!("implausible mode count {n}")));
    }
    let mut coeffs = Vec::with_capacity(n);
    for _ in 0..n {
        let re = read_f64(r)?;
        let im = read_f64(r)?;
        coeffs.push(Complex64::new(re, im));
    }
    Ok(Snapshot {
        grid: GridSpec {
            n_modes: n,
            length,
        },
        state: AmplitudeState { coeffs, tau },
        manifest_hash,
    })
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64(r: &mut impl Read) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

/// CSV with columns `j,k_j,re,im`, modes in ascending order.
pub fn write_coefficients_csv(
    w: &mut impl Write,
    state: &AmplitudeState,
    grid: &SpectralGrid,
) -> Result<()> {
    check_len(state, grid)?;
    writeln!(w, "j,k_j,re,im")?;
    let h = (grid.n_modes() / 2) as i64;
    for j in (-h + 1)..=h {
        let i = grid.index_of(j).unwrap();
        let c = state.coeffs[i];
        writeln!(w, "{},{:.17e},{:.17e},{:.17e}", j, grid.wavenumbers()[i], c.re, c.im)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn random_state(grid: &SpectralGrid, band: usize, seed: u64) -> AmplitudeState {
        let mut s = random_bandlimited(grid, band, seed).unwrap();
        s.coeffs[0] = Complex64::new(ChaCha8Rng::seed_from_u64(!seed).gen_range(-1.0..1.0), 0.0);
        s
    }

    #[test]
    fn grid_validation() {
        assert!(SpectralGrid::new(8, 1.0).is_err());
        assert!(SpectralGrid::new(48, 1.0).is_err());
        assert!(SpectralGrid::new(16, 0.0).is_err());
        let g = SpectralGrid::new(16, 2.0 * PI).unwrap();
        assert_eq!(g.index_of(8), Some(8));
        assert_eq!(g.index_of(-8), None);
        assert_eq!(g.index_of(-1), Some(15));
        assert_eq!(g.mode_of(9), -7);
        assert_abs_diff_eq!(g.dk(), 1.0);
    }

    #[test]
    fn unit_cosine_to_physical() {
        let g = SpectralGrid::new(32, 4.0).unwrap();
        let mut s = AmplitudeState::zeros(&g);
        s.coeffs[1] = Complex64::new(1.0, 0.0);
        s.coeffs[31] = Complex64::new(1.0, 0.0);
        let v = to_physical(&s, &g).unwrap();
        for (x, t) in v.iter().zip(g.theta()) {
            assert_abs_diff_eq!(*x, 2.0 * (2.0 * PI * t / 4.0).cos(), epsilon = 1e-14);
        }
        let z = to_physical(&AmplitudeState::zeros(&g), &g).unwrap();
        assert!(z.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn round_trip() {
        let g = SpectralGrid::new(256, 3.0).unwrap();
        let s = random_state(&g, 127, 1);
        let back = to_spectral(&to_physical(&s, &g).unwrap(), &g).unwrap();
        let scale = s.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
        assert!(s.max_diff(&back) < 1e-13 * scale);
    }

    #[test]
    fn rejects_non_hermitian() {
        let g = SpectralGrid::new(16, 1.0).unwrap();
        let mut s = AmplitudeState::zeros(&g);
        s.coeffs[2] = Complex64::new(1.0, 0.0);
        assert!(matches!(to_physical(&s, &g), Err(Error::NotHermitian { .. })));
    }

    #[test]
    fn parseval() {
        let g = SpectralGrid::new(128, 5.0).unwrap();
        let s = random_state(&g, 60, 2);
        let v = to_physical(&s, &g).unwrap();
        let phys = v.iter().map(|x| x * x).sum::<f64>() / g.n_modes() as f64;
        let spec: f64 = s.coeffs.iter().map(|c| c.norm_sqr()).sum();
        assert!((phys - spec).abs() < 1e-12 * spec);
    }

    #[test]
    fn hilbert_pairs() {
        let g = SpectralGrid::new(64, 2.0 * PI).unwrap();
        let c = AmplitudeState::cosine(&g, 1.0, 1).unwrap();
        let s = AmplitudeState::sine(&g, 1.0, 1).unwrap();
        assert!(hilbert(&c, &g).max_diff(&s) < 1e-15);
        let mut k = AmplitudeState::zeros(&g);
        k.coeffs[0] = Complex64::new(3.0, 0.0);
        assert!(hilbert(&k, &g).coeffs.iter().all(|c| c.norm() == 0.0));

        let r = random_state(&g, 31, 3);
        let hh = hilbert(&hilbert(&r, &g), &g);
        let mut expect = r.scaled(-1.0);
        expect.coeffs[0] = ZERO;
        assert!(hh.max_diff(&expect) < 1e-13);
    }

    #[test]
    fn derivatives() {
        let g = SpectralGrid::new(64, 2.0 * PI).unwrap();
        let s = AmplitudeState::sine(&g, 1.0, 1).unwrap();
        let c = AmplitudeState::cosine(&g, 1.0, 1).unwrap();
        assert!(derivative(&s, &g, 1).unwrap().max_diff(&c) < 1e-15);
        let m = AmplitudeState::cosine(&g, 1.0, 5).unwrap();
        assert!(derivative(&m, &g, 2).unwrap().max_diff(&m.scaled(-25.0)) < 1e-13);
        assert!(derivative(&m, &g, 3).is_err());
    }

    #[test]
    fn derivative_matches_finite_differences() {
        let g = SpectralGrid::new(4096, 2.0 * PI).unwrap();
        let s = random_state(&g, 8, 4);
        let v = to_physical(&s, &g).unwrap();
        let d = to_physical(&derivative(&s, &g, 1).unwrap(), &g).unwrap();
        let h = g.length() / g.n_modes() as f64;
        let n = v.len();
        let scale = d.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        for i in 0..n {
            // fourth-order centered stencil
            let at = |o: isize| v[((i as isize + o).rem_euclid(n as isize)) as usize];
            let fd = (8.0 * (at(1) - at(-1)) - (at(2) - at(-2))) / (12.0 * h);
            assert!((fd - d[i]).abs() < 1e-6 * scale, "i={i}");
        }
    }

    fn direct_product(a: &AmplitudeState, b: &AmplitudeState, g: &SpectralGrid) -> AmplitudeState {
        let h = (g.n_modes() / 2) as i64;
        let mut out = AmplitudeState::zeros(g);
        for k in (-h + 1)..h {
            let mut acc = ZERO;
            for l in (-h + 1)..h {
                if let (Some(i), Some(j)) = (g.index_of(k - l), g.index_of(l)) {
                    if (k - l).abs() < h {
                        acc += a.coeffs[i] * b.coeffs[j];
                    }
                }
            }
            out.coeffs[g.index_of(k).unwrap()] = acc;
        }
        out
    }

    #[test]
    fn product_of_cosines() {
        let g = SpectralGrid::new(16, 2.0 * PI).unwrap();
        let c = AmplitudeState::cosine(&g, 1.0, 1).unwrap();
        let p = dealiased_product(&c, &c, &g).unwrap();
        let mut expect = AmplitudeState::cosine(&g, 0.5, 2).unwrap();
        expect.coeffs[0] = Complex64::new(0.5, 0.0);
        assert!(p.max_diff(&expect) < 1e-15);
        let z = dealiased_product(&c, &AmplitudeState::zeros(&g), &g).unwrap();
        assert!(z.coeffs.iter().all(|c| c.norm() < 1e-15));
    }

    #[test]
    fn product_matches_direct_convolution() {
        let g = SpectralGrid::new(64, 1.7).unwrap();
        let a = random_state(&g, 31, 5);
        let b = random_state(&g, 31, 6);
        let p = dealiased_product(&a, &b, &g).unwrap();
        assert!(p.max_diff(&direct_product(&a, &b, &g)) < 1e-12);
    }

    #[test]
    fn snapshot_round_trip() {
        let g = SpectralGrid::new(32, 3.5).unwrap();
        let mut s = random_state(&g, 15, 7);
        s.tau = 0.25;
        let hash = [7u8; 32];
        let mut buf = Vec::new();
        write_snapshot(&mut buf, &s, &g, &hash).unwrap();
        assert_eq!(buf.len(), 8 + 4 + 4 + 8 + 8 + 32 + 32 * 16);
        let back = read_snapshot(&mut buf.as_slice()).unwrap();
        assert_eq!(back.state, s);
        assert_eq!(back.grid, g.spec());
        assert_eq!(back.manifest_hash, hash);
        assert!(read_snapshot(&mut &b"garbage!garbage!"[..]).is_err());
    }

    #[test]
    fn csv_export() {
        let g = SpectralGrid::new(16, 2.0 * PI).unwrap();
        let s = AmplitudeState::cosine(&g, 2.0, 1).unwrap();
        let mut buf = Vec::new();
        write_coefficients_csv(&mut buf, &s, &g).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "j,k_j,re,im");
        assert_eq!(lines.len(), 17);
        assert!(lines[9].starts_with("1,"));
    }

    #[test]
    fn translation_by_full_period_is_identity() {
        let g = SpectralGrid::new(32, 2.0).unwrap();
        let s = random_state(&g, 15, 8);
        assert!(s.translated(&g, 2.0).max_diff(&s) < 1e-13);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(32))]

            #[test]
            fn product_commutes(sa in 0u64..1000, sb in 0u64..1000) {
                let g = SpectralGrid::new(32, 2.0 * PI).unwrap();
                let a = random_state(&g, 15, sa);
                let b = random_state(&g, 15, sb);
                let ab = dealiased_product(&a, &b, &g).unwrap();
                let ba = dealiased_product(&b, &a, &g).unwrap();
                prop_assert!(ab.max_diff(&ba) < 1e-14);
            }

            #[test]
            fn product_is_bilinear(sa in 0u64..1000, sb in 0u64..1000, sc in 0u64..1000,
                                   alpha in -3.0f64..3.0) {
                let g = SpectralGrid::new(32, 1.0).unwrap();
                let a = random_state(&g, 15, sa);
                let b = random_state(&g, 15, sb);
                let c = random_state(&g, 15, sc);
                let mut lhs_in = a.clone();
                for (x, y) in lhs_in.coeffs.iter_mut().zip(&b.coeffs) {
                    *x = *x * alpha + y;
                }
                let lhs = dealiased_product(&lhs_in, &c, &g).unwrap();
                let ac = dealiased_product(&a, &c, &g).unwrap();
                let bc = dealiased_product(&b, &c, &g).unwrap();
                let mut rhs = ac.scaled(alpha);
                for (x, y) in rhs.coeffs.iter_mut().zip(&bc.coeffs) {
                    *x += y;
                }
                prop_assert!(lhs.max_diff(&rhs) < 1e-13);
            }
        }
    }
}
