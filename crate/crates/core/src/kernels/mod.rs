//! Interaction kernels of the amplitude equation.
//!
//! The solvability conditions produce the branch kernels `Λ₊` (for `k > 0`)
//! and `Λ₋` (for `k < 0`). They split as `Λ₀ = Λ₀₁ + Λ₀₂`, each piece factors
//! as `sgn(k) Λ̃₀ⱼ(k - ℓ, ℓ)`, and the symmetrised `Λ̃` collapses to
//! `-(1 + σ) Λ` with the canonical kernel
//!
//! ```text
//! Λ(k, ℓ) = 2 |k+ℓ| |k| |ℓ| / (|k+ℓ| + |k| + |ℓ|).
//! ```
//!
//! In the noncanonical variable `ψ = |∂|^{1/2} φ` the kernel becomes
//! `S(k, ℓ) = Λ(k, ℓ) / |k ℓ (k+ℓ)|^{1/2}`.
//!
//! All kernels return exactly `0` at their removable singularities and use
//! `sgn(0) = 0`.

pub mod identities;

use crate::{sgn, Error, Result};

/// Vacuum decay factor `σ(λ)` of the chosen root.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelContext {
    sigma: f64,
}

impl KernelContext {
    pub fn new(sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "kernel sigma must lie in (0, 1], got {sigma}"
            )));
        }
        Ok(Self { sigma })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }
}

/// Branch kernel of the `k > 0` solvability condition.
pub fn lambda_plus(k: f64, l: f64, ctx: &KernelContext) -> f64 {
    if k == 0.0 && l == 0.0 {
        return 0.0;
    }
    let s = ctx.sigma;
    let km = k - l;
    let (ak, al, akm) = (k.abs(), l.abs(), km.abs());
    l * (akm * (akm - al) + km * al - akm * l) / (akm + ak + al)
        + km * al * (al - l) / (ak + al)
        - km * al
        + s * (-k * al + 0.5 * ((k + l) * l - akm * al))
}

/// Branch kernel of the `k < 0` solvability condition.
pub fn lambda_minus(k: f64, l: f64, ctx: &KernelContext) -> f64 {
    if k == 0.0 && l == 0.0 {
        return 0.0;
    }
    let s = ctx.sigma;
    let km = k - l;
    let (ak, al, akm) = (k.abs(), l.abs(), km.abs());
    l * (akm * (akm - al) - km * al + akm * l) / (akm + ak + al)
        + km * al * (al + l) / (ak + al)
        - km * al
        + s * (-k * al - 0.5 * ((k + l) * l - akm * al))
}

pub fn lambda01(k: f64, l: f64, ctx: &KernelContext) -> f64 {
    if k == 0.0 && l == 0.0 {
        return 0.0;
    }
    let s = ctx.sigma;
    let km = k - l;
    let (ak, al, akm) = (k.abs(), l.abs(), km.abs());
    sgn(k)
        * (l * (km * al - akm * l) / (akm + ak + al) - km * al * l / (ak + al)
            + 0.5 * s * ((k + l) * l - akm * al))
}

pub fn lambda02(k: f64, l: f64, ctx: &KernelContext) -> f64 {
    if k == 0.0 && l == 0.0 {
        return 0.0;
    }
    let s = ctx.sigma;
    let km = k - l;
    let (ak, al, akm) = (k.abs(), l.abs(), km.abs());
    l * akm * (akm - al) / (akm + ak + al) + km * l * l / (ak + al) - km * al - s * k * al
}

/// `Λ₀ = Λ₀₁ + Λ₀₂`, which is `Λ₊` for `k > 0` and `Λ₋` for `k < 0`.
pub fn lambda0(k: f64, l: f64, ctx: &KernelContext) -> f64 {
    lambda01(k, l, ctx) + lambda02(k, l, ctx)
}

/// `Λ̃₀₁` with `Λ₀₁(k, ℓ) = sgn(k) Λ̃₀₁(k - ℓ, ℓ)`.
pub fn tilde_lambda01(k: f64, l: f64, ctx: &KernelContext) -> f64 {
    if k == 0.0 && l == 0.0 {
        return 0.0;
    }
    let s = ctx.sigma;
    let (ak, al, akl) = (k.abs(), l.abs(), (k + l).abs());
    l * (k * al - ak * l) / (ak + akl + al) - k * l * al / (akl + al)
        + 0.5 * s * ((k + 2.0 * l) * l - (k * l).abs())
}

/// `Λ̃₀₂` with `Λ₀₂(k, ℓ) = sgn(k) Λ̃₀₂(k - ℓ, ℓ)`.
pub fn tilde_lambda02(k: f64, l: f64, ctx: &KernelContext) -> f64 {
    if k == 0.0 && l == 0.0 {
        return 0.0;
    }
    let s = ctx.sigma;
    let (ak, al, akl) = (k.abs(), l.abs(), (k + l).abs());
    sgn(k + l)
        * (ak * l * (ak - al) / (akl + ak + al) + k * l * l / (akl + al)
            - k * al
            - s * (k + l) * al)
}

/// Symmetrised kernel `½(Λ̃₀₁(k,ℓ) + Λ̃₀₁(ℓ,k) + Λ̃₀₂(k,ℓ) + Λ̃₀₂(ℓ,k))`,
/// evaluated through its explicit closed form.
pub fn tilde_lambda_sym(k: f64, l: f64, ctx: &KernelContext) -> f64 {
    if k == 0.0 && l == 0.0 {
        return 0.0;
    }
    let s = ctx.sigma;
    let (ak, al, akl) = (k.abs(), l.abs(), (k + l).abs());
    let full = akl + ak + al;
    let cross = ak * l - k * al;
    let even = (k - l) * cross / full - k * l * al / (akl + al) - ak * k * l / (akl + ak)
        + s * (k * k + l * l + k * l - (k * l).abs());
    let odd = (ak - al) * cross / full + k * l * l / (akl + al) + k * k * l / (akl + ak)
        - k * al
        - ak * l
        - s * (k + l) * (ak + al);
    0.5 * even + 0.5 * sgn(k + l) * odd
}

/// The two-branch simplified form of `Λ̃`, extended to the whole plane by
/// symmetry and reality.
pub fn tilde_lambda_piecewise(k: f64, l: f64, ctx: &KernelContext) -> f64 {
    let factor = 1.0 + ctx.sigma;
    let (k, l) = if k + l < 0.0 { (-k, -l) } else { (k, l) };
    if k + l == 0.0 {
        0.0
    } else if k >= 0.0 && l >= 0.0 {
        -factor * k * l
    } else if l < 0.0 {
        factor * l * (k + l)
    } else {
        factor * k * (k + l)
    }
}

/// `-(1 + σ) · 2|k+ℓ||k||ℓ| / (|k+ℓ| + |k| + |ℓ|)`.
pub fn lambda_alternate(k: f64, l: f64, ctx: &KernelContext) -> f64 {
    -(1.0 + ctx.sigma) * lambda_canonical(k, l)
}

/// Canonical kernel `Λ(k, ℓ)`.
#[inline]
pub fn lambda_canonical(k: f64, l: f64) -> f64 {
    let (ak, al, akl) = (k.abs(), l.abs(), (k + l).abs());
    let num = akl * ak * al;
    if num == 0.0 {
        return 0.0;
    }
    2.0 * num / (akl + ak + al)
}

/// Noncanonical kernel `S(k, ℓ) = Λ(k, ℓ) / |k ℓ (k+ℓ)|^{1/2}`.
#[inline]
pub fn s_kernel(k: f64, l: f64) -> f64 {
    let (ak, al, akl) = (k.abs(), l.abs(), (k + l).abs());
    let prod = ak * al * akl;
    if prod == 0.0 {
        return 0.0;
    }
    2.0 * prod.sqrt() / (akl + ak + al)
}
