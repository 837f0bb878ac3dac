//! Linear surface waves: the dispersion relation and its real roots.
//!
//! A surface wave with phase velocity `λ` exists when
//!
//! ```text
//! (λ - v)² - B² = H² σ(λ),      σ(λ) = sqrt(1 - ν² λ²),
//! ```
//!
//! with `ν|λ| < 1` so that the vacuum field decays away from the interface.
//! The left side is a parabola in `λ` and the right side is a half-ellipse,
//! so the residual `f(λ) = (λ - v)² - B² - H² σ(λ)` is convex on
//! `[-1/ν, 1/ν]` and has at most two roots.

use serde::{Deserialize, Serialize};

use crate::{sgn, Error, Result};

/// Samples used by the bracketing scan.
pub const SCAN_SAMPLES: usize = 4096;

/// Absolute tolerance used when testing `|B| = |v| ± 1/ν`.
pub const CASE_TOLERANCE: f64 = 1e-12;

/// Background state of the flat interface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalConfig {
    /// Tangential plasma velocity.
    pub v1: f64,
    /// Plasma magnetic field (Alfvén units).
    pub b1: f64,
    /// Vacuum magnetic field.
    pub h1: f64,
    /// Ratio of the reference velocity to the speed of light.
    pub nu: f64,
}

/// Which of the four parameter cases of the real-root classification holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParameterCase {
    /// `|B| > |v| + 1/ν`: no real root.
    FieldDominated,
    /// `|B| = |v| + 1/ν`: roots only at the light-cone boundary `|λ| = 1/ν`.
    Boundary,
    /// `|v| - 1/ν ≤ |B| < |v| + 1/ν`: one or two roots for every `H ≠ 0`.
    Intermediate,
    /// `|B| < |v| - 1/ν`: two roots iff `|H|` exceeds a critical value.
    FlowDominated,
}

/// Root-count tag attached to every root and to the empty result.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    NoRoot,
    BoundaryRoot,
    OneRoot,
    TwoRoots,
    DoubleRoot,
}

impl Regime {
    pub fn as_str(self) -> &'static str {
        match self {
            Regime::NoRoot => "no_root",
            Regime::BoundaryRoot => "boundary_root",
            Regime::OneRoot => "one_root",
            Regime::TwoRoots => "two_roots",
            Regime::DoubleRoot => "double_root",
        }
    }
}

/// A phase velocity together with the constants derived from it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DispersionRoot {
    pub lambda: f64,
    pub sigma: f64,
    /// `(λ - v)² - B²`; equals `H² σ` at a root.
    pub d: f64,
    pub regime: Regime,
    /// Factor `c` with `τ_canonical = c τ`; `None` when the prefactor degenerates.
    pub rescale: Option<f64>,
}

impl PhysicalConfig {
    pub fn new(v1: f64, b1: f64, h1: f64, nu: f64) -> Result<Self> {
        let cfg = Self { v1, b1, h1, nu };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.v1.is_finite() && self.b1.is_finite() && self.h1.is_finite()) {
            return Err(Error::InvalidConfig("v1, b1 and h1 must be finite".into()));
        }
        if !(self.nu.is_finite() && self.nu > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "nu must be positive and finite, got {}",
                self.nu
            )));
        }
        Ok(())
    }

    pub fn parameter_case(&self) -> ParameterCase {
        let b = self.b1.abs();
        let v = self.v1.abs();
        let upper = v + 1.0 / self.nu;
        let lower = v - 1.0 / self.nu;
        if (b - upper).abs() <= CASE_TOLERANCE {
            ParameterCase::Boundary
        } else if b > upper {
            ParameterCase::FieldDominated
        } else if b >= lower - CASE_TOLERANCE {
            ParameterCase::Intermediate
        } else {
            ParameterCase::FlowDominated
        }
    }
}

impl DispersionRoot {
    /// Evaluates the derived constants at `lambda` without checking that it
    /// is a root. Useful for sensitivity studies with perturbed phase speeds.
    pub fn at(lambda: f64, cfg: &PhysicalConfig, regime: Regime) -> Result<Self> {
        let sigma = sigma_of(lambda, cfg.nu)?;
        let d = (lambda - cfg.v1).powi(2) - cfg.b1 * cfg.b1;
        let mut root = Self {
            lambda,
            sigma,
            d,
            regime,
            rescale: None,
        };
        root.rescale = time_rescale_factor(&root, cfg).ok();
        Ok(root)
    }

    /// Usable roots are strictly subluminal and have `d ≠ 0`.
    pub fn is_usable(&self) -> bool {
        !matches!(self.regime, Regime::BoundaryRoot | Regime::NoRoot)
            && self.sigma > 0.0
            && self.d != 0.0
    }
}

/// `σ(λ) = sqrt(1 - ν²λ²)`, zero on the light cone `ν|λ| = 1`.
pub fn sigma_of(lambda: f64, nu: f64) -> Result<f64> {
    let x = nu * lambda.abs();
    if !x.is_finite() || x > 1.0 + 4.0 * f64::EPSILON {
        return Err(Error::Domain(format!(
            "sigma undefined for nu*|lambda| = {x} > 1"
        )));
    }
    Ok((1.0 - x * x).max(0.0).sqrt())
}

/// `(λ - v)² - B² - H² σ(λ)`.
pub fn dispersion_residual(lambda: f64, cfg: &PhysicalConfig) -> Result<f64> {
    let sigma = sigma_of(lambda, cfg.nu)?;
    Ok((lambda - cfg.v1).powi(2) - cfg.b1 * cfg.b1 - cfg.h1 * cfg.h1 * sigma)
}

// Residual without the domain check; callers stay inside the light cone.
fn residual_unchecked(lambda: f64, cfg: &PhysicalConfig) -> f64 {
    let x = cfg.nu * lambda;
    let sigma = (1.0 - x * x).max(0.0).sqrt();
    (lambda - cfg.v1).powi(2) - cfg.b1 * cfg.b1 - cfg.h1 * cfg.h1 * sigma
}

/// All real roots with `ν|λ| < 1`, each tagged with the regime of the set.
///
/// In the boundary case the light-cone roots are returned tagged
/// [`Regime::BoundaryRoot`] and are not usable for simulation. An empty
/// vector means [`Regime::NoRoot`].
pub fn find_roots(cfg: &PhysicalConfig) -> Result<Vec<DispersionRoot>> {
    cfg.validate()?;
    match cfg.parameter_case() {
        ParameterCase::FieldDominated => return Ok(Vec::new()),
        ParameterCase::Boundary => {
            let edge = 1.0 / cfg.nu;
            let lambdas = if cfg.v1 == 0.0 {
                vec![-edge, edge]
            } else {
                vec![-sgn(cfg.v1) * edge]
            };
            return lambdas
                .into_iter()
                .map(|l| DispersionRoot::at(l, cfg, Regime::BoundaryRoot))
                .collect();
        }
        ParameterCase::Intermediate | ParameterCase::FlowDominated => {}
    }

    let f = |l: f64| residual_unchecked(l, cfg);
    let edge = 1.0 / cfg.nu;
    let delta = 1e-12 / cfg.nu;
    let lo = -edge + delta;
    let hi = edge - delta;
    let step = (hi - lo) / (SCAN_SAMPLES - 1) as f64;
    let xs: Vec<f64> = (0..SCAN_SAMPLES).map(|i| lo + step * i as f64).collect();
    let fs: Vec<f64> = xs.iter().map(|&x| f(x)).collect();

    let mut lambdas = Vec::new();
    for i in 0..SCAN_SAMPLES - 1 {
        if fs[i] == 0.0 {
            lambdas.push(xs[i]);
        } else if fs[i] * fs[i + 1] < 0.0 {
            lambdas.push(refine_bracket(&f, xs[i], xs[i + 1], fs[i], fs[i + 1]));
        }
    }
    if fs[SCAN_SAMPLES - 1] == 0.0 {
        lambdas.push(xs[SCAN_SAMPLES - 1]);
    }

    let regime;
    if lambdas.is_empty() {
        if fs.iter().all(|&v| v < 0.0) {
            return Ok(Vec::new());
        }
        // Convexity: a pair of roots closer than the scan spacing, or a
        // tangency, hides in the cell around the sampled minimum.
        let imin = argmin(&fs);
        let a = xs[imin.saturating_sub(1)];
        let b = xs[(imin + 1).min(SCAN_SAMPLES - 1)];
        let (xm, fm) = golden_min(&f, a, b);
        if fm < 0.0 {
            lambdas.push(refine_bracket(&f, a, xm, f(a), fm));
            lambdas.push(refine_bracket(&f, xm, b, fm, f(b)));
            regime = Regime::TwoRoots;
        } else if fm <= 1e-8 * cfg.h1 * cfg.h1 {
            lambdas.push(xm);
            regime = Regime::DoubleRoot;
        } else {
            return Ok(Vec::new());
        }
    } else if lambdas.len() == 1 {
        regime = Regime::OneRoot;
    } else {
        regime = Regime::TwoRoots;
    }

    lambdas
        .into_iter()
        .map(|l| DispersionRoot::at(l, cfg, regime))
        .collect()
}

/// Regime of a root list as returned by [`find_roots`].
pub fn regime_of(roots: &[DispersionRoot]) -> Regime {
    roots.first().map_or(Regime::NoRoot, |r| r.regime)
}

/// Critical vacuum field `H*` of the flow-dominated case: the value of `|H|`
/// at which the residual minimum touches zero. `None` outside that case.
pub fn critical_field(cfg: &PhysicalConfig) -> Result<Option<f64>> {
    cfg.validate()?;
    if cfg.parameter_case() != ParameterCase::FlowDominated {
        return Ok(None);
    }
    let edge = 1.0 / cfg.nu;
    let min_residual = |h: f64| {
        let c = PhysicalConfig { h1: h, ..*cfg };
        golden_min(&|l| residual_unchecked(l, &c), -edge, edge).1
    };
    let mut lo = 0.0;
    let mut hi = 1.0;
    while min_residual(hi) > 0.0 {
        lo = hi;
        hi *= 2.0;
        if hi > 1e150 {
            return Err(Error::Consistency("critical field search diverged".into()));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if min_residual(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Some(0.5 * (lo + hi)))
}

/// Factor `c` converting the slow time to the canonical one, `τ_c = c τ`.
///
/// With `A = 2(λ - v)/d + ν²λ/σ²` the amplitude equation reads
/// `A φ_τ - i(1+σ) sgn(k) ∫ Λ φ φ = 0`; matching it to the canonical
/// `φ_τc + i sgn(k) ∫ Λ φ φ = 0` gives `c = -(1+σ)/A`.
pub fn time_rescale_factor(root: &DispersionRoot, cfg: &PhysicalConfig) -> Result<f64> {
    if root.d == 0.0 || root.sigma <= 0.0 {
        return Err(Error::Domain(
            "time rescaling needs d != 0 and sigma > 0".into(),
        ));
    }
    let flow = 2.0 * (root.lambda - cfg.v1) / root.d;
    let vac = cfg.nu * cfg.nu * root.lambda / (root.sigma * root.sigma);
    let a = flow + vac;
    let scale = flow.abs() + vac.abs();
    if !a.is_finite() || a.abs() <= 1e-12 * scale || scale == 0.0 {
        return Err(Error::DegeneratePrefactor { value: a });
    }
    Ok(-(1.0 + root.sigma) / a)
}

fn argmin(v: &[f64]) -> usize {
    v.iter()
        .enumerate()
        .fold((0, f64::INFINITY), |(bi, bv), (i, &x)| {
            if x < bv {
                (i, x)
            } else {
                (bi, bv)
            }
        })
        .0
}

/// Hybrid secant/bisection on a sign-changing bracket.
fn refine_bracket(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64, mut fa: f64, mut fb: f64) -> f64 {
    if fa == 0.0 {
        return a;
    }
    if fb == 0.0 {
        return b;
    }
    for _ in 0..200 {
        let width = b - a;
        if width <= 4.0 * f64::EPSILON * a.abs().max(b.abs()).max(1e-300) {
            break;
        }
        let secant = b - fb * (b - a) / (fb - fa);
        let mid = 0.5 * (a + b);
        // fall back to bisection when the secant leaves the bracket
        let x = if secant > a && secant < b { secant } else { mid };
        let fx = f(x);
        if fx == 0.0 {
            return x;
        }
        if fa * fx < 0.0 {
            b = x;
            fb = fx;
        } else {
            a = x;
            fa = fx;
        }
        // secant steps can stall on one side; force a bisection then
        if b - a > 0.5 * width {
            let m = 0.5 * (a + b);
            let fm = f(m);
            if fm == 0.0 {
                return m;
            }
            if fa * fm < 0.0 {
                b = m;
                fb = fm;
            } else {
                a = m;
                fa = fm;
            }
        }
    }
    if fa.abs() < fb.abs() {
        a
    } else {
        b
    }
}

/// Golden-section minimisation of a unimodal function on `[a, b]`.
pub(crate) fn golden_min(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..200 {
        if (b - a).abs() <= 2.0 * f64::EPSILON * (a.abs() + b.abs()).max(1e-300) {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    let candidates = [(a, f(a)), (b, f(b)), (c, fc), (d, fd)];
    candidates
        .into_iter()
        .fold((a, f64::INFINITY), |best, cand| if cand.1 < best.1 { cand } else { best })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn cfg(v: f64, b: f64, h: f64, nu: f64) -> PhysicalConfig {
        PhysicalConfig::new(v, b, h, nu).unwrap()
    }

    /// Plain bisection on a bracket, independent of the production refiner.
    fn bisect(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
        let mut fa = f(a);
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            let fm = f(m);
            if fa * fm <= 0.0 {
                b = m;
            } else {
                a = m;
                fa = fm;
            }
        }
        0.5 * (a + b)
    }

    #[test]
    fn sigma_examples() {
        assert_eq!(sigma_of(0.0, 0.1).unwrap(), 1.0);
        assert_eq!(sigma_of(10.0, 0.1).unwrap(), 0.0);
        assert!(sigma_of(10.5, 0.1).is_err());
        let lam = bisect(|l| l * l - (1.0 - 0.25 * l * l).sqrt(), 0.0, 2.0);
        assert_abs_diff_eq!(lam, 0.9396, epsilon = 1e-4);
        let s = sigma_of(lam, 0.5).unwrap();
        assert_abs_diff_eq!(s, (1.0 - 0.25 * lam * lam).sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(s, 0.8827, epsilon = 1e-4);
    }

    #[test]
    fn residual_examples() {
        assert_eq!(dispersion_residual(0.0, &cfg(0.0, 0.0, 0.0, 0.1)).unwrap(), 0.0);
        assert_eq!(dispersion_residual(0.0, &cfg(0.0, 1.0, 1.0, 0.1)).unwrap(), -2.0);
        let c = cfg(0.0, 0.0, 1.0, 0.5);
        let lam = bisect(|l| dispersion_residual(l, &c).unwrap(), 0.0, 1.9);
        assert!(dispersion_residual(lam, &c).unwrap().abs() < 1e-6);
        assert!(dispersion_residual(3.0, &c).is_err());
    }

    #[test]
    fn field_dominated_has_no_roots() {
        let c = cfg(0.0, 3.0, 1.0, 0.5);
        assert_eq!(c.parameter_case(), ParameterCase::FieldDominated);
        assert!(find_roots(&c).unwrap().is_empty());
    }

    #[test]
    fn symmetric_pair_of_roots() {
        let c = cfg(0.0, 0.0, 1.0, 0.5);
        assert_eq!(c.parameter_case(), ParameterCase::Intermediate);
        let roots = find_roots(&c).unwrap();
        assert_eq!(roots.len(), 2);
        let oracle = bisect(|l| dispersion_residual(l, &c).unwrap(), 0.0, 1.9);
        assert_abs_diff_eq!(roots[0].lambda, -oracle, epsilon = 1e-12);
        assert_abs_diff_eq!(roots[1].lambda, oracle, epsilon = 1e-12);
        for r in &roots {
            assert_eq!(r.regime, Regime::TwoRoots);
            assert!(r.is_usable());
            assert_abs_diff_eq!(r.d, r.sigma, epsilon = 1e-12);
        }
    }

    #[test]
    fn flow_dominated_below_threshold_matches_sign_scan() {
        let c = cfg(3.0, 0.5, 1.0, 0.5);
        assert_eq!(c.parameter_case(), ParameterCase::FlowDominated);
        let n = 1_000_000;
        let mut changes = 0;
        let mut prev = dispersion_residual(-2.0 + 1e-9, &c).unwrap();
        for i in 1..n {
            let l = -2.0 + 4.0 * i as f64 / n as f64;
            let cur = dispersion_residual(l, &c).unwrap();
            if prev * cur < 0.0 {
                changes += 1;
            }
            prev = cur;
        }
        assert_eq!(find_roots(&c).unwrap().len(), changes);
        assert_eq!(changes, 0);
    }

    #[test]
    fn critical_field_separates_regimes() {
        let base = cfg(3.0, 0.5, 1.0, 0.5);
        let hstar = critical_field(&base).unwrap().unwrap();
        let above = PhysicalConfig { h1: hstar * 1.01, ..base };
        let below = PhysicalConfig { h1: hstar * 0.99, ..base };
        assert_eq!(find_roots(&above).unwrap().len(), 2);
        assert!(find_roots(&below).unwrap().is_empty());
        let at = PhysicalConfig { h1: hstar, ..base };
        let roots = find_roots(&at).unwrap();
        assert!(!roots.is_empty());
        assert!(matches!(
            roots[0].regime,
            Regime::DoubleRoot | Regime::TwoRoots
        ));
        assert!(critical_field(&cfg(0.0, 0.0, 1.0, 0.5)).unwrap().is_none());
    }

    #[test]
    fn boundary_case_roots_sit_on_light_cone() {
        let c = cfg(0.7, 0.7 + 2.0, 1.0, 0.5);
        assert_eq!(c.parameter_case(), ParameterCase::Boundary);
        let roots = find_roots(&c).unwrap();
        assert_eq!(roots.len(), 1);
        assert_abs_diff_eq!(roots[0].lambda, -2.0, epsilon = 1e-12);
        assert!(!roots[0].is_usable());

        let c = cfg(0.0, 2.0, 1.0, 0.5);
        let roots = find_roots(&c).unwrap();
        assert_eq!(roots.len(), 2);
        assert!(roots.iter().all(|r| r.regime == Regime::BoundaryRoot));
    }

    #[test]
    fn rescale_factor_example() {
        let c = cfg(0.0, 0.0, 1.0, 0.5);
        let roots = find_roots(&c).unwrap();
        let pos = roots[1];
        let a = 2.0 / pos.lambda + 0.25 * pos.lambda / (pos.sigma * pos.sigma);
        assert_abs_diff_eq!(a, 2.4299, epsilon = 1e-3);
        let factor = time_rescale_factor(&pos, &c).unwrap();
        assert_abs_diff_eq!(factor, -(1.0 + pos.sigma) / a, epsilon = 1e-14);
        assert_abs_diff_eq!(factor, -0.7748, epsilon = 1e-3);
        let neg = time_rescale_factor(&roots[0], &c).unwrap();
        assert_abs_diff_eq!(neg, -factor, epsilon = 1e-12);
    }

    #[test]
    fn degenerate_prefactor_is_an_error() {
        // λ = 0 root of a config with v = 0 would make A = 0; build it directly.
        let c = cfg(0.0, 1.0, 1.0, 0.5);
        let root = DispersionRoot {
            lambda: 0.0,
            sigma: 1.0,
            d: -1.0,
            regime: Regime::OneRoot,
            rescale: None,
        };
        assert!(matches!(
            time_rescale_factor(&root, &c),
            Err(Error::DegeneratePrefactor { .. })
        ));
    }

    #[test]
    fn invalid_nu_rejected() {
        assert!(PhysicalConfig::new(0.0, 0.0, 1.0, 0.0).is_err());
        assert!(PhysicalConfig::new(0.0, 0.0, 1.0, f64::INFINITY).is_err());
        assert!(PhysicalConfig::new(f64::NAN, 0.0, 1.0, 0.5).is_err());
    }
}
