//! Sampled checks of the algebra connecting the kernels.
//!
//! Every check reports the largest deviation it saw over its sample set. The
//! kernels are passed through a [`KernelSet`] table so that a deliberately
//! broken kernel can be swapped in and the failure localised.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;

/// Outcome of a single identity check.
#[derive(Debug, Clone, PartialEq)]
pub struct IdentityReport {
    pub name: String,
    pub samples: usize,
    pub max_abs_err: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl IdentityReport {
    fn new(name: impl Into<String>, samples: usize, max_abs_err: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            samples,
            max_abs_err,
            tolerance,
            pass: max_abs_err.is_finite() && max_abs_err <= tolerance,
        }
    }

    /// `name<TAB>samples<TAB>max_abs_err<TAB>pass`
    pub fn tsv(&self) -> String {
        format!(
            "{}\t{}\t{:.3e}\t{}",
            self.name,
            self.samples,
            self.max_abs_err,
            if self.pass { "pass" } else { "FAIL" }
        )
    }
}

type ContextKernel = fn(f64, f64, &KernelContext) -> f64;
type PlainKernel = fn(f64, f64) -> f64;

/// Table of kernel implementations under test.
#[derive(Clone, Copy)]
pub struct KernelSet {
    pub lambda_plus: ContextKernel,
    pub lambda_minus: ContextKernel,
    pub lambda01: ContextKernel,
    pub lambda02: ContextKernel,
    pub tilde_lambda01: ContextKernel,
    pub tilde_lambda02: ContextKernel,
    pub tilde_lambda_sym: ContextKernel,
    pub tilde_lambda_piecewise: ContextKernel,
    pub lambda_alternate: ContextKernel,
    pub lambda_canonical: PlainKernel,
    pub s_kernel: PlainKernel,
}

impl Default for KernelSet {
    fn default() -> Self {
        Self {
            lambda_plus,
            lambda_minus,
            lambda01,
            lambda02,
            tilde_lambda01,
            tilde_lambda02,
            tilde_lambda_sym,
            tilde_lambda_piecewise,
            lambda_alternate,
            lambda_canonical,
            s_kernel,
        }
    }
}

/// Sampling parameters shared by the point-wise checks.
#[derive(Debug, Clone)]
pub struct SuiteOptions {
    pub samples: usize,
    pub seed: u64,
    pub sigmas: Vec<f64>,
    pub scales: Vec<f64>,
    pub tolerance: f64,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        Self {
            samples: 100_000,
            seed: 0x5eed_0001,
            sigmas: vec![0.1, 0.5, 1.0],
            scales: vec![0.5, 2.0, 10.0],
            tolerance: 1e-12,
        }
    }
}

/// Random points on the diamond `|k| + |ℓ| = 1`, plus the degenerate lines
/// `k = 0`, `ℓ = 0` and `k + ℓ = 0`.
pub fn sample_points(n: usize, seed: u64) -> Vec<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pts = vec![
        (0.0, 1.0),
        (1.0, 0.0),
        (0.0, -1.0),
        (-1.0, 0.0),
        (0.5, -0.5),
        (-0.5, 0.5),
        (0.5, 0.5),
        (-0.5, -0.5),
    ];
    while pts.len() < n {
        let k: f64 = rng.gen_range(-1.0..1.0);
        let l: f64 = rng.gen_range(-1.0..1.0);
        let norm = k.abs() + l.abs();
        if norm > 1e-3 {
            pts.push((k / norm, l / norm));
        }
    }
    pts.truncate(n);
    pts
}

fn max_err(pts: &[(f64, f64)], f: impl Fn(f64, f64) -> f64) -> f64 {
    pts.iter().map(|&(k, l)| f(k, l)).fold(0.0, f64::max)
}

/// Symmetry, reality, homogeneity and the Hamiltonian condition for `Λ` and
/// `S`, plus the kernel bound on `S`.
pub fn canonical_identities(set: &KernelSet, opts: &SuiteOptions) -> Vec<IdentityReport> {
    let pts = sample_points(opts.samples, opts.seed);
    let n = pts.len();
    let tol = opts.tolerance;
    let lam = set.lambda_canonical;
    let s = set.s_kernel;
    let mut out = Vec::new();

    out.push(IdentityReport::new(
        "lambda.symmetry",
        n,
        max_err(&pts, |k, l| (lam(k, l) - lam(l, k)).abs()),
        tol,
    ));
    out.push(IdentityReport::new(
        "lambda.reality",
        n,
        max_err(&pts, |k, l| (lam(k, l) - lam(-k, -l)).abs()),
        tol,
    ));
    for &a in &opts.scales {
        out.push(IdentityReport::new(
            format!("lambda.homogeneity[alpha={a}]"),
            n,
            max_err(&pts, |k, l| (lam(a * k, a * l) / (a * a) - lam(k, l)).abs()),
            tol,
        ));
    }
    out.push(IdentityReport::new(
        "lambda.hamiltonian",
        n,
        max_err(&pts, |k, l| (lam(k + l, -l) - lam(k, l)).abs()),
        tol,
    ));

    out.push(IdentityReport::new(
        "s.symmetry",
        n,
        max_err(&pts, |k, l| (s(k, l) - s(l, k)).abs()),
        tol,
    ));
    out.push(IdentityReport::new(
        "s.reality",
        n,
        max_err(&pts, |k, l| (s(k, l) - s(-k, -l)).abs()),
        tol,
    ));
    for &a in &opts.scales {
        out.push(IdentityReport::new(
            format!("s.homogeneity[alpha={a}]"),
            n,
            max_err(&pts, |k, l| (s(a * k, a * l) / a.sqrt() - s(k, l)).abs()),
            tol,
        ));
    }
    out.push(IdentityReport::new(
        "s.hamiltonian",
        n,
        max_err(&pts, |k, l| (s(k + l, -l) - s(k, l)).abs()),
        tol,
    ));
    out.push(IdentityReport::new(
        "s.definition",
        n,
        max_err(&pts, |k, l| {
            (s(k, l) * (k * l * (k + l)).abs().sqrt() - lam(k, l)).abs()
        }),
        tol,
    ));
    // |S(k-ℓ, ℓ)| ≤ min(|k|, |k-ℓ|, |ℓ|)^{1/2}; error is the excess over the bound
    out.push(IdentityReport::new(
        "s.bound",
        n,
        max_err(&pts, |k, l| {
            let bound = k.abs().min((k - l).abs()).min(l.abs()).sqrt();
            (s(k - l, l).abs() - bound).max(0.0)
        }),
        tol,
    ));
    out
}

/// Agreement of the closed form, the simplified piecewise form and the
/// alternate form of the symmetrised kernel, plus its own symmetry,
/// reality and homogeneity, for each `σ` in the options.
pub fn symmetric_form_identities(set: &KernelSet, opts: &SuiteOptions) -> Vec<IdentityReport> {
    let pts = sample_points(opts.samples, opts.seed ^ 0x00f0);
    let n = pts.len();
    let tol = opts.tolerance;
    let mut out = Vec::new();
    for &sigma in &opts.sigmas {
        let Ok(ctx) = KernelContext::new(sigma) else {
            continue;
        };
        let sym = |k, l| (set.tilde_lambda_sym)(k, l, &ctx);
        let pw = |k, l| (set.tilde_lambda_piecewise)(k, l, &ctx);
        let alt = |k, l| (set.lambda_alternate)(k, l, &ctx);
        let from_parts = |k: f64, l: f64| {
            0.5 * ((set.tilde_lambda01)(k, l, &ctx)
                + (set.tilde_lambda01)(l, k, &ctx)
                + (set.tilde_lambda02)(k, l, &ctx)
                + (set.tilde_lambda02)(l, k, &ctx))
        };
        let tag = format!("[sigma={sigma}]");
        out.push(IdentityReport::new(
            format!("forms.closed_vs_piecewise{tag}"),
            n,
            max_err(&pts, |k, l| (sym(k, l) - pw(k, l)).abs()),
            tol,
        ));
        out.push(IdentityReport::new(
            format!("forms.closed_vs_alternate{tag}"),
            n,
            max_err(&pts, |k, l| (sym(k, l) - alt(k, l)).abs()),
            tol,
        ));
        out.push(IdentityReport::new(
            format!("forms.piecewise_vs_alternate{tag}"),
            n,
            max_err(&pts, |k, l| (pw(k, l) - alt(k, l)).abs()),
            tol,
        ));
        out.push(IdentityReport::new(
            format!("forms.closed_vs_symmetrised_parts{tag}"),
            n,
            max_err(&pts, |k, l| (sym(k, l) - from_parts(k, l)).abs()),
            tol,
        ));
        out.push(IdentityReport::new(
            format!("tilde.symmetry{tag}"),
            n,
            max_err(&pts, |k, l| (sym(k, l) - sym(l, k)).abs()),
            tol,
        ));
        out.push(IdentityReport::new(
            format!("tilde.reality{tag}"),
            n,
            max_err(&pts, |k, l| (sym(k, l) - sym(-k, -l)).abs()),
            tol,
        ));
        for &a in &opts.scales {
            out.push(IdentityReport::new(
                format!("tilde.homogeneity[alpha={a}]{tag}"),
                n,
                max_err(&pts, |k, l| (sym(a * k, a * l) / (a * a) - sym(k, l)).abs()),
                tol,
            ));
        }
    }
    out
}

/// Identities linking the branch kernels `Λ±` to the symmetrised kernel:
/// the `Λ₀₁ + Λ₀₂` decomposition and the `sgn(k) Λ̃₀ⱼ(k-ℓ, ℓ)` factorisations.
pub fn branch_identities(set: &KernelSet, opts: &SuiteOptions) -> Vec<IdentityReport> {
    let pts = sample_points(opts.samples, opts.seed ^ 0x0f00);
    let n = pts.len();
    let tol = opts.tolerance;
    let mut out = Vec::new();
    for &sigma in &opts.sigmas {
        let Ok(ctx) = KernelContext::new(sigma) else {
            continue;
        };
        let tag = format!("[sigma={sigma}]");
        let l01 = |k, l| (set.lambda01)(k, l, &ctx);
        let l02 = |k, l| (set.lambda02)(k, l, &ctx);
        out.push(IdentityReport::new(
            format!("branch.plus_decomposition{tag}"),
            n,
            max_err(&pts, |k, l| {
                let k = k.abs();
                (l01(k, l) + l02(k, l) - (set.lambda_plus)(k, l, &ctx)).abs()
            }),
            tol,
        ));
        out.push(IdentityReport::new(
            format!("branch.minus_decomposition{tag}"),
            n,
            max_err(&pts, |k, l| {
                let k = -k.abs();
                (l01(k, l) + l02(k, l) - (set.lambda_minus)(k, l, &ctx)).abs()
            }),
            tol,
        ));
        out.push(IdentityReport::new(
            format!("branch.factor01{tag}"),
            n,
            max_err(&pts, |k, l| {
                (l01(k, l) - sgn(k) * (set.tilde_lambda01)(k - l, l, &ctx)).abs()
            }),
            tol,
        ));
        out.push(IdentityReport::new(
            format!("branch.factor02{tag}"),
            n,
            max_err(&pts, |k, l| {
                (l02(k, l) - sgn(k) * (set.tilde_lambda02)(k - l, l, &ctx)).abs()
            }),
            tol,
        ));
    }
    out
}

/// A smooth, compactly supported, Hermitian spectral profile on `[-K, K]`:
/// `(1 - (ℓ/K)²)² (P(ℓ) + i Q(ℓ))` with `P` even and `Q` odd.
#[derive(Debug, Clone, Copy)]
pub struct BandProfile {
    pub support: f64,
    pub even: [f64; 3],
    pub odd: [f64; 2],
}

impl BandProfile {
    pub fn random(rng: &mut impl Rng, support: f64) -> Self {
        let mut c = || rng.gen_range(-1.0..1.0);
        Self {
            support,
            even: [c(), c(), c()],
            odd: [c(), c()],
        }
    }

    pub fn eval(&self, l: f64) -> Complex64 {
        let x = l / self.support;
        if x.abs() >= 1.0 {
            return Complex64::new(0.0, 0.0);
        }
        let w = (1.0 - x * x).powi(2);
        let x2 = x * x;
        let p = self.even[0] + self.even[1] * x2 + self.even[2] * x2 * x2;
        let q = x * (self.odd[0] + self.odd[1] * x2);
        Complex64::new(w * p, w * q)
    }
}

/// Composite trapezoid of `g(ℓ)` over the support of `φ(k-ℓ)φ(ℓ)`, with panel
/// breaks at the kinks `ℓ ∈ {0, k}`. The node set is mirror-symmetric under
/// `ℓ ↦ k - ℓ`.
pub fn convolution_quadrature(
    k: f64,
    support: f64,
    intervals: usize,
    g: impl Fn(f64) -> Complex64,
) -> Complex64 {
    let lo = k - support;
    let hi = support;
    if hi <= lo {
        return Complex64::new(0.0, 0.0);
    }
    let mut breaks = vec![lo];
    let (a, b) = if k >= 0.0 { (0.0, k) } else { (k, 0.0) };
    if a > lo && a < hi {
        breaks.push(a);
    }
    if b > lo && b < hi && b != a {
        breaks.push(b);
    }
    breaks.push(hi);
    let total = hi - lo;
    let panels: Vec<(f64, f64)> = breaks.windows(2).map(|w| (w[0], w[1])).collect();
    let counts: Vec<usize> = if panels.len() == 3 {
        // equal counts on the mirrored outer panels
        let outer = (((panels[0].1 - panels[0].0) / total) * intervals as f64).round() as usize;
        let outer = outer.max(1);
        let middle = intervals.saturating_sub(2 * outer).max(1);
        vec![outer, middle, outer]
    } else {
        panels
            .iter()
            .map(|p| ((((p.1 - p.0) / total) * intervals as f64).round() as usize).max(1))
            .collect()
    };
    let mut sum = Complex64::new(0.0, 0.0);
    for (&(a, b), &m) in panels.iter().zip(&counts) {
        let h = (b - a) / m as f64;
        let mut panel = 0.5 * (g(a) + g(b));
        for i in 1..m {
            panel += g(a + h * i as f64);
        }
        sum += panel * h;
    }
    sum
}

/// Options for the integral symmetrisation check.
#[derive(Debug, Clone)]
pub struct SymmetrisationOptions {
    pub profiles: usize,
    pub wavenumbers: usize,
    pub intervals: usize,
    pub support: f64,
    pub sigma: f64,
    pub seed: u64,
    pub tolerance: f64,
}

impl Default for SymmetrisationOptions {
    fn default() -> Self {
        Self {
            profiles: 20,
            wavenumbers: 64,
            intervals: 1 << 14,
            support: 2.0,
            sigma: 0.7,
            seed: 0x5eed_0002,
            tolerance: 1e-8,
        }
    }
}

/// Checks that replacing the branch kernel by the symmetrised kernel does
/// not change the convolution integral: for `k > 0` (and mirrored `k < 0`),
///
/// ```text
/// ∫ Λ±(k, ℓ) φ(k-ℓ) φ(ℓ) dℓ  =  -(1+σ) sgn(k) ∫ Λ(k-ℓ, ℓ) φ(k-ℓ) φ(ℓ) dℓ.
/// ```
///
/// Reports the worst relative error for each branch.
pub fn symmetrisation_check(set: &KernelSet, opts: &SymmetrisationOptions) -> Vec<IdentityReport> {
    let Ok(ctx) = KernelContext::new(opts.sigma) else {
        return vec![IdentityReport::new("symmetrisation", 0, f64::NAN, opts.tolerance)];
    };
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let profiles: Vec<BandProfile> = (0..opts.profiles)
        .map(|_| BandProfile::random(&mut rng, opts.support))
        .collect();
    let ks: Vec<f64> = (0..opts.wavenumbers)
        .map(|i| 2.0 * opts.support * (i as f64 + 0.5) / opts.wavenumbers as f64)
        .collect();
    let factor = -(1.0 + ctx.sigma());

    let mut out = Vec::new();
    for (name, sign, branch) in [
        ("symmetrisation.plus", 1.0, set.lambda_plus),
        ("symmetrisation.minus", -1.0, set.lambda_minus),
    ] {
        let mut worst = 0.0f64;
        let mut count = 0;
        for p in &profiles {
            for &k0 in &ks {
                let k = sign * k0;
                let lhs = convolution_quadrature(k, opts.support, opts.intervals, |l| {
                    branch(k, l, &ctx) * p.eval(k - l) * p.eval(l)
                });
                let rhs = convolution_quadrature(k, opts.support, opts.intervals, |l| {
                    factor * sgn(k) * (set.lambda_canonical)(k - l, l) * p.eval(k - l) * p.eval(l)
                });
                let scale = lhs.norm().max(rhs.norm());
                let err = if scale > 0.0 {
                    (lhs - rhs).norm() / scale
                } else {
                    0.0
                };
                worst = worst.max(if err.is_nan() { f64::INFINITY } else { err });
                count += 1;
            }
        }
        out.push(IdentityReport::new(name, count, worst, opts.tolerance));
    }
    out
}

/// Every kernel check with default options, in reporting order.
pub fn full_suite(set: &KernelSet) -> Vec<IdentityReport> {
    let opts = SuiteOptions::default();
    let mut all = canonical_identities(set, &opts);
    all.extend(symmetric_form_identities(set, &opts));
    all.extend(branch_identities(set, &opts));
    all.extend(symmetrisation_check(set, &SymmetrisationOptions::default()));
    all
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SuiteOptions {
        SuiteOptions {
            samples: 2_000,
            ..SuiteOptions::default()
        }
    }

    #[test]
    fn all_small_checks_pass() {
        let set = KernelSet::default();
        let opts = small();
        for r in canonical_identities(&set, &opts)
            .into_iter()
            .chain(symmetric_form_identities(&set, &opts))
            .chain(branch_identities(&set, &opts))
        {
            assert!(r.pass, "{}", r.tsv());
        }
    }

    #[test]
    fn quadrature_nodes_are_mirror_symmetric() {
        // an antisymmetric integrand under ℓ ↦ k - ℓ integrates to zero
        for k in [0.3, 1.7, 2.5, -0.9] {
            let v = convolution_quadrature(k, 2.0, 1000, |l| {
                Complex64::new(l - (k - l), 0.0) * (1.0 + l * (k - l))
            });
            assert!(v.norm() < 1e-12, "k={k}: {v}");
        }
    }

    #[test]
    fn quadrature_integrates_polynomial() {
        // ∫_{-1}^{2} ℓ² dℓ = 3 for k = 1, support 2; kinked panels keep it exact to O(h²)
        let v = convolution_quadrature(1.0, 2.0, 1 << 12, |l| Complex64::new(l * l, 0.0));
        assert!((v.re - 3.0).abs() < 1e-5);
    }

    #[test]
    fn symmetrisation_small() {
        let opts = SymmetrisationOptions {
            profiles: 3,
            wavenumbers: 8,
            intervals: 1 << 10,
            ..Default::default()
        };
        for r in symmetrisation_check(&KernelSet::default(), &opts) {
            assert!(r.pass, "{}", r.tsv());
        }
    }

    fn flipped_plus(k: f64, l: f64, ctx: &KernelContext) -> f64 {
        -lambda_plus(k, l, ctx)
    }

    #[test]
    fn flipped_branch_kernel_fails_only_branch_checks() {
        let set = KernelSet {
            lambda_plus: flipped_plus,
            ..KernelSet::default()
        };
        let opts = small();
        assert!(canonical_identities(&set, &opts).iter().all(|r| r.pass));
        assert!(symmetric_form_identities(&set, &opts).iter().all(|r| r.pass));
        let branch = branch_identities(&set, &opts);
        assert!(branch
            .iter()
            .any(|r| !r.pass && r.name.starts_with("branch.plus")));
        let sym = symmetrisation_check(
            &set,
            &SymmetrisationOptions {
                profiles: 2,
                wavenumbers: 4,
                intervals: 1 << 9,
                ..Default::default()
            },
        );
        assert!(!sym[0].pass);
        assert!(sym[1].pass);
    }

    #[test]
    fn profile_is_hermitian() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = BandProfile::random(&mut rng, 1.5);
        for l in [0.1, 0.7, 1.2] {
            assert!((p.eval(-l) - p.eval(l).conj()).norm() < 1e-15);
        }
        assert_eq!(p.eval(1.5), Complex64::new(0.0, 0.0));
    }
}
