//! Sobolev-scale diagnostics of the noncanonical variable `ψ = |∂|^{1/2} φ`.
//!
//! All functions take `ψ` coefficients (see [`crate::solver::to_noncanonical`])
//! and use Riemann-sum weights in `k`, so with `ψ̂ ≈ p/Δk`:
//!
//! ```text
//! ‖ψ‖_s² = Σ |k|^{2s} |p_k|² / Δk        ‖|k|^{3/2} ψ̂‖_{L¹} = Σ |k|^{3/2} |p_k|
//! ```

use serde::{Deserialize, Serialize};

use crate::dispersion::golden_min;
use crate::spectral::{AmplitudeState, SpectralGrid};
use crate::{Error, Result};

/// Which Sobolev exponents to track, and the exponent of the blow-up
/// criterion integral.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormLadder {
    pub s_values: Vec<f64>,
    pub s_prime: f64,
}

impl Default for NormLadder {
    fn default() -> Self {
        Self {
            s_values: vec![0.0, 2.5, 3.0],
            s_prime: 2.5,
        }
    }
}

impl NormLadder {
    pub fn validate(&self) -> Result<()> {
        if !(self.s_prime > 2.0 && self.s_prime.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "s_prime must exceed 2, got {}",
                self.s_prime
            )));
        }
        if let Some(s) = self.s_values.iter().find(|s| !(**s >= 0.0 && s.is_finite())) {
            return Err(Error::InvalidConfig(format!("negative Sobolev exponent {s}")));
        }
        Ok(())
    }
}

/// `‖ψ‖_s`, the mean mode excluded.
pub fn homogeneous_norm(psi: &AmplitudeState, grid: &SpectralGrid, s: f64) -> f64 {
    weighted_sum(psi, grid, |k| k.powf(2.0 * s)).sqrt()
}

/// `‖ψ‖_{H^s}` with weight `1 + |k|^{2s}`.
pub fn inhomogeneous_norm(psi: &AmplitudeState, grid: &SpectralGrid, s: f64) -> f64 {
    let dk = grid.dk();
    let mean = psi.coeffs[0].norm_sqr() / dk;
    (mean + weighted_sum(psi, grid, |k| 1.0 + k.powf(2.0 * s))).sqrt()
}

fn weighted_sum(psi: &AmplitudeState, grid: &SpectralGrid, w: impl Fn(f64) -> f64) -> f64 {
    let dk = grid.dk();
    psi.coeffs
        .iter()
        .zip(grid.wavenumbers())
        .skip(1)
        .map(|(c, &k)| w(k.abs()) * c.norm_sqr())
        .sum::<f64>()
        / dk
}

/// `‖|k|^{3/2} ψ̂‖_{L¹}`.
pub fn l1_moment(psi: &AmplitudeState, grid: &SpectralGrid) -> f64 {
    psi.coeffs
        .iter()
        .zip(grid.wavenumbers())
        .skip(1)
        .map(|(c, &k)| k.abs().powf(1.5) * c.norm())
        .sum()
}

/// The constant-free existence-time scale `Q = ‖ψ₀‖_{L²}^{1-2/s} ‖ψ₀‖_{H^s}^{2/s}`;
/// the existence time is `1/(K_s Q)` for an unknown `K_s`.
pub fn existence_time_scale(psi0: &AmplitudeState, grid: &SpectralGrid, s: f64) -> Result<f64> {
    if !(s > 2.0) {
        return Err(Error::Domain(format!("existence time needs s > 2, got {s}")));
    }
    let l2 = homogeneous_norm(psi0, grid, 0.0);
    let hs = inhomogeneous_norm(psi0, grid, s);
    Ok(scale_product(l2, hs, s))
}

fn scale_product(l2: f64, hs: f64, s: f64) -> f64 {
    if l2 == 0.0 || hs == 0.0 {
        return 0.0;
    }
    l2.powf(1.0 - 2.0 / s) * hs.powf(2.0 / s)
}

/// Gronwall envelope for `‖ψ(τ)‖_{H^s}` given the initial `L²` and `H^s`
/// norms and a user-supplied constant `C·C_s`.
pub fn apriori_envelope(l2_norm0: f64, hs_norm0: f64, s: f64, c_const: f64, tau: f64) -> Result<f64> {
    if !(s > 2.0) {
        return Err(Error::Domain(format!("envelope needs s > 2, got {s}")));
    }
    let q = scale_product(l2_norm0, hs_norm0, s);
    let base = 1.0 - 2.0 * c_const / s * q * tau.abs();
    if base <= 0.0 {
        return Err(Error::Domain(format!(
            "envelope has blown up by |tau| = {}",
            tau.abs()
        )));
    }
    Ok(hs_norm0 * base.powf(-s / 2.0))
}

/// Running trapezoid rule for `∫ ‖ψ‖_{s'}^{2/s'} dτ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlowupIntegral {
    pub s_prime: f64,
    pub value: f64,
    last_integrand: Option<f64>,
}

impl BlowupIntegral {
    pub fn new(s_prime: f64) -> Result<Self> {
        if !(s_prime > 2.0) {
            return Err(Error::Domain(format!("s' must exceed 2, got {s_prime}")));
        }
        Ok(Self {
            s_prime,
            value: 0.0,
            last_integrand: None,
        })
    }

    pub fn integrand(&self, psi: &AmplitudeState, grid: &SpectralGrid) -> f64 {
        homogeneous_norm(psi, grid, self.s_prime).powf(2.0 / self.s_prime)
    }

    /// Adds the panel ending at `psi`, `d_tau` after the previous sample.
    /// The first call only records the starting integrand.
    pub fn update(&mut self, psi: &AmplitudeState, grid: &SpectralGrid, d_tau: f64) -> f64 {
        let f = self.integrand(psi, grid);
        self.push(f, d_tau)
    }

    pub fn push(&mut self, integrand: f64, d_tau: f64) -> f64 {
        if let Some(prev) = self.last_integrand {
            self.value += 0.5 * d_tau.abs() * (prev + integrand);
        }
        self.last_integrand = Some(integrand);
        self.value
    }

    pub fn last_integrand(&self) -> Option<f64> {
        self.last_integrand
    }
}

fn check_pq(p: f64, q: f64) -> Result<()> {
    if !(q < 0.5 && p > 0.5 && p.is_finite() && q.is_finite()) {
        return Err(Error::Domain(format!(
            "interpolation needs q < 1/2 < p, got p = {p}, q = {q}"
        )));
    }
    Ok(())
}

fn split_constants(p: f64, q: f64) -> (f64, f64) {
    ((2.0 / (1.0 - 2.0 * q)).sqrt(), (2.0 / (2.0 * p - 1.0)).sqrt())
}

/// Exponents `(a, b)` of `‖ψ‖_{q+3/2}` and `‖ψ‖_{p+3/2}` in the bound.
pub fn interpolation_exponents(p: f64, q: f64) -> (f64, f64) {
    ((p - 0.5) / (p - q), (0.5 - q) / (p - q))
}

/// `C_{p,q}` in `‖|k|^{3/2}ψ̂‖_{L¹} ≤ C_{p,q} ‖ψ‖_{q+3/2}^a ‖ψ‖_{p+3/2}^b`.
///
/// Splitting the integral at `|k| = L` and applying Cauchy–Schwarz on each
/// side gives the bound `C_q L^{1/2-q} A + C_p L^{1/2-p} B`; taking `L` where
/// the two terms are equal yields `2 C_q^a C_p^b A^a B^b`.
pub fn interpolation_constant(p: f64, q: f64) -> Result<f64> {
    check_pq(p, q)?;
    let (cq, cp) = split_constants(p, q);
    let (a, b) = interpolation_exponents(p, q);
    Ok(2.0 * cq.powf(a) * cp.powf(b))
}

/// The constant recovered by numerically minimising `2 max(C_q L^{1/2-q} A,
/// C_p L^{1/2-p} B)` over `L` for the given norms, divided by `A^a B^b`.
pub fn interpolation_constant_numeric(p: f64, q: f64, a_norm: f64, b_norm: f64) -> Result<f64> {
    check_pq(p, q)?;
    if !(a_norm > 0.0 && b_norm > 0.0) {
        return Err(Error::Domain("norms must be positive".into()));
    }
    let (cq, cp) = split_constants(p, q);
    let (a, b) = interpolation_exponents(p, q);
    // work in x = ln L, around the analytic crossing so the bracket is sane
    let centre = (cp * b_norm / (cq * a_norm)).ln() / (p - q);
    let f = |x: f64| {
        let low = (cq * a_norm).ln() + (0.5 - q) * x;
        let high = (cp * b_norm).ln() + (0.5 - p) * x;
        low.max(high)
    };
    let (_, fmin) = golden_min(&f, centre - 30.0, centre + 30.0);
    Ok(2.0 * (fmin - a * a_norm.ln() - b * b_norm.ln()).exp())
}

/// Both sides of the interpolation inequality for a given state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterpolationCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

pub fn interpolation_check(
    psi: &AmplitudeState,
    grid: &SpectralGrid,
    p: f64,
    q: f64,
) -> Result<InterpolationCheck> {
    let c = interpolation_constant(p, q)?;
    let (a, b) = interpolation_exponents(p, q);
    let lhs = l1_moment(psi, grid);
    let na = homogeneous_norm(psi, grid, q + 1.5);
    let nb = homogeneous_norm(psi, grid, p + 1.5);
    let rhs = if na == 0.0 || nb == 0.0 {
        assert!(
            lhs == 0.0,
            "a vanishing Sobolev norm forces a vanishing L1 moment"
        );
        0.0
    } else {
        c * na.powf(a) * nb.powf(b)
    };
    Ok(InterpolationCheck {
        lhs,
        rhs,
        pass: lhs <= rhs * (1.0 + 1e-10),
    })
}
