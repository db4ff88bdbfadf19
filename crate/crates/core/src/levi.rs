//! Levi polynomial, cutoff χ, smoothed Hessian τ^ε, the support functions
//! g and g_ε, and the sampled modulus of continuity of the second derivatives.

use num_complex::Complex;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domain::DomainSpec;
use crate::error::{Error, Result};
use crate::linalg::{creal, norm_sqr, pair, sub, CMat, CVec};
use crate::scalar::Real;

/// Smooth transition used for χ(|z − w|²).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChiProfile {
    /// 1 − h(x), h(x) = e^{−1/x} / (e^{−1/x} + e^{−1/(1−x)}) on x ∈ (0, 1).
    #[default]
    ExpBump,
}

impl ChiProfile {
    /// Value and derivative of the transition at x ∈ ℝ (1 for x ≤ 0, 0 for x ≥ 1).
    pub fn eval<T: Real>(self, x: T) -> (T, T) {
        if x <= T::zero() {
            return (T::one(), T::zero());
        }
        if x >= T::one() {
            return (T::zero(), T::zero());
        }
        let one = T::one();
        let a = (-one / x).exp();
        let b = (-one / (one - x)).exp();
        let h = a / (a + b);
        // h' = (a' b − a b') / (a + b)², a' = a/x², b' = −b/(1−x)²
        let da = a / (x * x);
        let db = -b / ((one - x) * (one - x));
        let dh = (da * b - a * db) / ((a + b) * (a + b));
        (one - h, -dh)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TauPolicy {
    /// τ = ∂²ρ/∂w∂w exactly.
    Exact,
    /// Gaussian mollification of the holomorphic Hessian at the given scale.
    Mollified { scale: f64 },
}

/// Constants of the lower bound on 2 Re g, found by a seeded scan.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub mu: f64,
    pub c: f64,
    pub lambda0: f64,
    pub c_levi: f64,
    /// The bound holds with χ ≡ 1 on all sampled pairs.
    pub global_ok: bool,
    pub samples: usize,
    pub seed: u64,
}

/// Frozen parameters from which g_ε, η_ε and the kernels are evaluated.
#[derive(Clone, Debug)]
pub struct KernelContext<T: Real> {
    pub domain: DomainSpec<T>,
    pub epsilon: T,
    pub mu: T,
    pub c_bound: T,
    pub chi_profile: ChiProfile,
    pub tau_policy: TauPolicy,
    pub global_holomorphic_mode: bool,
}

/// Options for [`KernelContext::new`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContextOptions {
    pub epsilon: f64,
    pub mu_override: Option<f64>,
    pub chi_profile: ChiProfile,
    /// `None` picks the mollification scale by bisection (or exact when ε = 0).
    pub tau_policy: Option<TauPolicy>,
    pub global_holomorphic_mode: bool,
}

impl Default for ContextOptions {
    fn default() -> Self {
        Self {
            epsilon: 0.0,
            mu_override: None,
            chi_profile: ChiProfile::ExpBump,
            tau_policy: None,
            global_holomorphic_mode: false,
        }
    }
}

impl<T: Real> KernelContext<T> {
    pub fn new(domain: DomainSpec<T>, cal: &CalibrationResult, opts: &ContextOptions) -> Result<Self> {
        if !(opts.epsilon >= 0.0) {
            return Err(Error::InvalidParameter(format!("epsilon must be >= 0, got {}", opts.epsilon)));
        }
        if opts.global_holomorphic_mode && !cal.global_ok {
            return Err(Error::InvalidParameter(format!(
                "global holomorphic mode needs the bound with chi = 1 on all of {}",
                domain.name()
            )));
        }
        let mu = match opts.mu_override {
            Some(m) if m > 0.0 => m,
            Some(m) => return Err(Error::InvalidParameter(format!("mu_override must be > 0, got {m}"))),
            None => cal.mu,
        };
        let tau_policy = match opts.tau_policy {
            Some(p) => p,
            None if opts.epsilon == 0.0 || domain.has_constant_hessian() => TauPolicy::Exact,
            None => TauPolicy::Mollified {
                scale: mollification_scale(&domain, T::lit(opts.epsilon)).as_f64(),
            },
        };
        Ok(Self {
            domain,
            epsilon: T::lit(opts.epsilon),
            mu: T::lit(mu),
            c_bound: T::lit(cal.c),
            chi_profile: opts.chi_profile,
            tau_policy,
            global_holomorphic_mode: opts.global_holomorphic_mode,
        })
    }

    /// χ ≡ 1 context for domains where the bound holds globally (ball, ellipsoid).
    pub fn global(domain: DomainSpec<T>) -> Result<Self> {
        let cal = calibrate_constants(&domain, 2000, 0)?;
        let opts = ContextOptions { global_holomorphic_mode: true, ..Default::default() };
        Self::new(domain, &cal, &opts)
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    /// χ(|z − w|²) and dχ/ds at s = |z − w|².
    pub fn chi(&self, s: T) -> (T, T) {
        if self.global_holomorphic_mode {
            return (T::one(), T::zero());
        }
        let mu2 = self.mu * self.mu;
        let lo = mu2 * T::lit(0.25);
        let width = mu2 - lo;
        let (v, dv) = self.chi_profile.eval((s - lo) / width);
        (v, dv / width)
    }

    /// τ^ε(w) and its ∂/∂w̄_k derivatives.
    pub fn tau(&self, w: &[Complex<T>]) -> (CMat<T>, Vec<CMat<T>>) {
        match self.tau_policy {
            TauPolicy::Exact => (self.domain.hess_holo(w), self.domain.hess_holo_dbar(w)),
            TauPolicy::Mollified { scale } => self.domain.mollified_hess_holo(w, T::lit(scale)),
        }
    }
}

/// Largest Gaussian scale s with sup_grid |∂²ρ/∂w∂w − τ_s| ≤ ε, by bisection.
pub fn mollification_scale<T: Real>(domain: &DomainSpec<T>, epsilon: T) -> T {
    let grid = domain.calibration_grid();
    let sup_err = |s: T| {
        grid.iter()
            .map(|p| domain.hess_holo(p).max_abs_diff(&domain.mollified_hess_holo(p, s).0))
            .fold(T::zero(), T::max)
    };
    let mut hi = domain.diameter();
    if sup_err(hi) <= epsilon {
        return hi;
    }
    let mut lo = T::zero();
    for _ in 0..60 {
        let mid = (lo + hi) * T::lit(0.5);
        if sup_err(mid) <= epsilon {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// sup over the calibration grid of |∂²ρ/∂w∂w − τ^ε| (entrywise max).
pub fn tau_sup_error<T: Real>(ctx: &KernelContext<T>) -> T {
    ctx.domain
        .calibration_grid()
        .iter()
        .map(|p| ctx.domain.hess_holo(p).max_abs_diff(&ctx.tau(p).0))
        .fold(T::zero(), T::max)
}

fn quadratic_part<T: Real>(first: &[Complex<T>], second: &CMat<T>, w: &[Complex<T>], z: &[Complex<T>]) -> Complex<T> {
    let dz = sub(z, w);
    pair(first, &dz) + second.quad(&dz) * T::lit(0.5)
}

/// P_w(z) = Σ ∂ρ(w)/∂w_j (z_j − w_j) + ½ Σ ∂²ρ(w)/∂w_j∂w_k (z_j − w_j)(z_k − w_k).
pub fn levi_polynomial<T: Real>(ctx: &KernelContext<T>, w: &[Complex<T>], z: &[Complex<T>]) -> Complex<T> {
    quadratic_part(&ctx.domain.d_rho(w), &ctx.domain.hess_holo(w), w, z)
}

/// P^ε_w(z): the Levi polynomial with τ^ε(w) in place of the holomorphic Hessian.
pub fn levi_polynomial_eps<T: Real>(ctx: &KernelContext<T>, w: &[Complex<T>], z: &[Complex<T>]) -> Complex<T> {
    quadratic_part(&ctx.domain.d_rho(w), &ctx.tau(w).0, w, z)
}

fn patch<T: Real>(ctx: &KernelContext<T>, p: Complex<T>, w: &[Complex<T>], z: &[Complex<T>]) -> Complex<T> {
    let s = norm_sqr(&sub(z, w));
    let (chi, _) = ctx.chi(s);
    -p * chi + creal(s * (T::one() - chi) - ctx.domain.rho(w))
}

/// g(w, z) = −P_w(z) χ + |z − w|² (1 − χ) − ρ(w).
pub fn g<T: Real>(ctx: &KernelContext<T>, w: &[Complex<T>], z: &[Complex<T>]) -> Complex<T> {
    patch(ctx, levi_polynomial(ctx, w, z), w, z)
}

/// g_ε(w, z), as g with P^ε.
pub fn g_eps<T: Real>(ctx: &KernelContext<T>, w: &[Complex<T>], z: &[Complex<T>]) -> Complex<T> {
    patch(ctx, levi_polynomial_eps(ctx, w, z), w, z)
}

/// |ρ(w)| + |ρ(z)| + |Im ⟨∂ρ(w), w − z⟩| + |w − z|².
pub fn size_proxy<T: Real>(ctx: &KernelContext<T>, w: &[Complex<T>], z: &[Complex<T>]) -> T {
    let d = sub(w, z);
    ctx.domain.rho(w).abs()
        + ctx.domain.rho(z).abs()
        + pair(&ctx.domain.d_rho(w), &d).im.abs()
        + norm_sqr(&d)
}

/// Sampled ω(δ) = Σ_{j,k} sup_{|z−w| ≤ δ} (|Δ ∂²ρ/∂w_j∂w_k| + |Δ ∂²ρ/∂w_j∂w̄_k|).
///
/// Sampled suprema are lower bounds of the true ones.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModulusOfContinuity {
    pub deltas: Vec<f64>,
    pub omegas: Vec<f64>,
    /// Row-major n×n table of per-entry suprema for each δ.
    pub per_entry: Option<Vec<Vec<f64>>>,
    pub samples: usize,
    pub seed: u64,
}

pub fn modulus_of_continuity<T: Real>(
    domain: &DomainSpec<T>,
    deltas: &[f64],
    samples: usize,
    seed: u64,
) -> Result<ModulusOfContinuity> {
    check_increasing(deltas)?;
    let n = domain.dim();
    let field = |p: &[Complex<T>]| (domain.hess_holo(p), domain.hess_mixed(p));
    let mut running = vec![0.0; n * n];
    let mut omegas = Vec::with_capacity(deltas.len());
    let mut per_entry = Vec::with_capacity(deltas.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for &delta in deltas {
        for _ in 0..samples {
            let w = domain.sample_point(&mut rng, 0.3);
            let z = domain.sample_near(&mut rng, &w, T::lit(delta));
            let (hw, lw) = field(&w);
            let (hz, lz) = field(&z);
            for j in 0..n {
                for k in 0..n {
                    let v = ((hw[(j, k)] - hz[(j, k)]).norm() + (lw[(j, k)] - lz[(j, k)]).norm()).as_f64();
                    let slot = &mut running[j * n + k];
                    *slot = f64::max(*slot, v);
                }
            }
        }
        omegas.push(running.iter().sum());
        per_entry.push(running.clone());
    }
    Ok(ModulusOfContinuity {
        deltas: deltas.to_vec(),
        omegas,
        per_entry: Some(per_entry),
        samples,
        seed,
    })
}

/// Sampled modulus of continuity of an arbitrary scalar field on D̄.
pub fn scalar_modulus<T: Real>(
    domain: &DomainSpec<T>,
    field: impl Fn(&[Complex<T>]) -> f64,
    deltas: &[f64],
    samples: usize,
    seed: u64,
) -> Result<ModulusOfContinuity> {
    check_increasing(deltas)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut running = 0.0f64;
    let mut omegas = Vec::with_capacity(deltas.len());
    for &delta in deltas {
        for _ in 0..samples {
            let w = domain.sample_point(&mut rng, 0.3);
            let z = domain.sample_near(&mut rng, &w, T::lit(delta));
            running = running.max((field(&w) - field(&z)).abs());
        }
        omegas.push(running);
    }
    Ok(ModulusOfContinuity { deltas: deltas.to_vec(), omegas, per_entry: None, samples, seed })
}

fn check_increasing(deltas: &[f64]) -> Result<()> {
    if deltas.is_empty() || deltas[0] <= 0.0 || deltas.windows(2).any(|p| p[1] <= p[0]) {
        return Err(Error::InvalidParameter("deltas must be positive and increasing".into()));
    }
    Ok(())
}

/// Largest sampled δ with ω(δ) ≤ ε.
pub fn delta_for_epsilon(modulus: &ModulusOfContinuity, epsilon: f64) -> Result<f64> {
    modulus
        .deltas
        .iter()
        .zip(&modulus.omegas)
        .filter(|(_, &o)| o <= epsilon)
        .map(|(&d, _)| d)
        .last()
        .ok_or(Error::NoAdmissibleDelta {
            epsilon,
            smallest: modulus.omegas.first().copied().unwrap_or(f64::NAN),
        })
}

/// Geometric grid of δ values from `lo` to `hi` inclusive.
pub fn geometric_deltas(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let ratio = (hi / lo).powf(1.0 / (count.max(2) - 1) as f64);
    (0..count).map(|i| lo * ratio.powi(i as i32)).collect()
}

/// Seeded scan for μ and c in 2 Re g ≥ −ρ(w) − ρ(z) + c|w − z|² (|w − z| ≤ μ),
/// 2 Re g ≥ c (|w − z| ≥ μ).
///
/// The χ ≡ 1 configuration is accepted when it keeps c at the sampled Levi
/// minimum (reported as μ = diameter); otherwise μ descends the grid
/// diam/2, diam/4, … and the first μ with c ≥ c_levi/2 is returned.
pub fn calibrate_constants<T: Real>(domain: &DomainSpec<T>, samples: usize, seed: u64) -> Result<CalibrationResult> {
    if samples < 1000 {
        return Err(Error::InvalidParameter(format!("calibration needs >= 1000 samples, got {samples}")));
    }
    let grid = domain.calibration_grid();
    let mut c_levi = f64::INFINITY;
    for p in grid.iter().chain(domain.sample_points(samples, seed ^ 0x5eed, 0.3).iter()) {
        c_levi = c_levi.min(domain.hess_mixed(p).hermitian_eigenvalues()[0].as_f64());
    }
    if !(c_levi > 0.0) {
        return Err(Error::CalibrationFailed(format!(
            "Levi form not positive definite on {} (min eigenvalue {c_levi})",
            domain.name()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs: Vec<(CVec<T>, CVec<T>)> = Vec::with_capacity(samples);
    for i in 0..samples {
        let w = domain.sample_point(&mut rng, 0.4);
        let z = if i % 2 == 0 {
            domain.sample_point(&mut rng, 0.4)
        } else {
            let r = domain.diameter() * T::lit(0.1);
            domain.sample_near(&mut rng, &w, r)
        };
        pairs.push((w, z));
    }
    let diam = domain.diameter().as_f64();
    let c_for = |ctx: &KernelContext<T>| -> f64 {
        let mut c = f64::INFINITY;
        for (w, z) in &pairs {
            let d2 = norm_sqr(&sub(w, z)).as_f64();
            if d2 == 0.0 {
                continue;
            }
            let re2 = 2.0 * g(ctx, w, z).re.as_f64();
            let near = ctx.global_holomorphic_mode || d2.sqrt() <= ctx.mu.as_f64();
            let ci = if near {
                (re2 + domain.rho(w).as_f64() + domain.rho(z).as_f64()) / d2
            } else {
                re2
            };
            c = c.min(ci);
        }
        c
    };
    let trial = |mu: f64, global: bool| KernelContext {
        domain: domain.clone(),
        epsilon: T::zero(),
        mu: T::lit(mu),
        c_bound: T::zero(),
        chi_profile: ChiProfile::ExpBump,
        tau_policy: TauPolicy::Exact,
        global_holomorphic_mode: global,
    };
    let c_global = c_for(&trial(diam, true));
    // Sampled ratios carry rounding of order √ε_mach in low precision.
    let slack = 1e-9f64.max(T::epsilon().sqrt().as_f64());
    if c_global >= c_levi * (1.0 - slack) {
        return Ok(CalibrationResult {
            mu: diam,
            c: c_global.min(c_levi),
            lambda0: c_global.min(c_levi) * diam * diam / 8.0,
            c_levi,
            global_ok: true,
            samples,
            seed,
        });
    }
    let mut mu = diam / 2.0;
    for _ in 0..20 {
        let c = c_for(&trial(mu, false));
        if c >= 0.5 * c_levi {
            return Ok(CalibrationResult {
                mu,
                c,
                lambda0: c * mu * mu / 8.0,
                c_levi,
                global_ok: false,
                samples,
                seed,
            });
        }
        mu /= 2.0;
    }
    Err(Error::CalibrationFailed(format!("no mu down to {mu:e} keeps c >= c_levi/2 on {}", domain.name())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{make_ball, make_c2_perturbed_ball, make_ellipsoid};
    use crate::linalg::hdot;
    use num_complex::Complex64;

    fn pt(c: &[(f64, f64)]) -> CVec<f64> {
        c.iter().map(|&(a, b)| Complex64::new(a, b)).collect()
    }

    #[test]
    fn chi_profile_plateaus_and_derivative() {
        let p = ChiProfile::ExpBump;
        assert_eq!(p.eval(-0.1f64), (1.0, 0.0));
        assert_eq!(p.eval(1.5f64), (0.0, 0.0));
        for i in 1..100 {
            let x = i as f64 / 100.0;
            let (v, dv) = p.eval(x);
            assert!((0.0..=1.0).contains(&v));
            let h = 1e-6;
            let fd = (p.eval(x + h).0 - p.eval(x - h).0) / (2.0 * h);
            assert!((fd - dv).abs() < 1e-6, "{x}: {fd} vs {dv}");
        }
    }

    #[test]
    fn ball_support_function_closed_form() {
        let ctx = KernelContext::global(make_ball::<f64>(2).unwrap()).unwrap();
        let d = &ctx.domain;
        for (k, w) in d.sample_points(200, 1, 0.3).iter().enumerate() {
            let z = &d.sample_points(1, 100 + k as u64, 0.3)[0];
            let want = Complex64::new(1.0, 0.0) - hdot(z, w);
            assert!((g(&ctx, w, z) - want).norm() < 1e-14);
            let p = levi_polynomial(&ctx, w, z);
            let want_p = hdot(&sub(z, w), w);
            assert!((p - want_p).norm() < 1e-14);
        }
        let o = pt(&[(0.0, 0.0)]);
        let disc = KernelContext::global(make_ball::<f64>(1).unwrap()).unwrap();
        assert_eq!(levi_polynomial(&disc, &o, &pt(&[(0.4, -0.7)])), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn g_on_diagonal_and_far_branch() {
        let d = make_c2_perturbed_ball(2, -0.1).unwrap();
        let cal = calibrate_constants(&d, 2000, 4).unwrap();
        let opts = ContextOptions { epsilon: 0.05, mu_override: Some(0.8), ..Default::default() };
        let ctx = KernelContext::new(d, &cal, &opts).unwrap();
        for w in ctx.domain.sample_points(50, 2, 0.3) {
            assert_eq!(levi_polynomial(&ctx, &w, &w), Complex64::new(0.0, 0.0));
            assert!((g(&ctx, &w, &w).re + ctx.domain.rho(&w)).abs() < 1e-15);
            assert_eq!(g(&ctx, &w, &w).im, 0.0);
        }
        let w = pt(&[(0.0, 0.9), (0.0, 0.0)]);
        let z = pt(&[(0.0, -0.9), (0.0, 0.0)]);
        assert!(1.8 >= ctx.mu);
        let gv = g(&ctx, &w, &z);
        assert!((gv.re - (1.8f64 * 1.8 - ctx.domain.rho(&w))).abs() < 1e-12 && gv.im == 0.0);
        assert!(gv.re >= cal.c);
    }

    #[test]
    fn calibration_examples() {
        for n in [1, 2] {
            let cal = calibrate_constants(&make_ball::<f64>(n).unwrap(), 2000, 7).unwrap();
            assert!(cal.global_ok);
            assert!(cal.mu >= 2.0);
            assert!((cal.c - 1.0).abs() < 1e-9, "{cal:?}");
            assert!((cal.c_levi - 1.0).abs() < 1e-12);
        }
        let e = calibrate_constants(&make_ellipsoid(&[1.0, 2.0]).unwrap(), 2000, 7).unwrap();
        assert!(e.global_ok && (e.c_levi - 0.25).abs() < 1e-12);
        let p = calibrate_constants(&make_c2_perturbed_ball(2, -0.1).unwrap(), 2000, 7).unwrap();
        // the cubic term keeps the quadratic bound valid with χ ≡ 1
        assert!(p.global_ok && p.c > 0.8 && p.c <= p.c_levi, "{p:?}");
        assert!((p.lambda0 - p.c * p.mu * p.mu / 8.0).abs() < 1e-15);
        assert!(calibrate_constants(&make_ball::<f64>(1).unwrap(), 10, 0).is_err());
    }

    #[test]
    fn eps_polynomial_matches_exact_when_smooth() {
        let ctx0 = KernelContext::global(make_ball::<f64>(2).unwrap()).unwrap();
        let mut ctx = ctx0.clone();
        ctx.tau_policy = TauPolicy::Mollified { scale: 0.3 };
        let pts = ctx.domain.sample_points(200, 5, 0.2);
        for pair in pts.chunks(2) {
            assert_eq!(levi_polynomial_eps(&ctx, &pair[0], &pair[1]), levi_polynomial(&ctx0, &pair[0], &pair[1]));
        }
    }

    #[test]
    fn tau_sup_error_within_epsilon() {
        let d = make_c2_perturbed_ball(2, 0.1).unwrap();
        let cal = calibrate_constants(&d, 2000, 1).unwrap();
        let ctx = KernelContext::new(d, &cal, &ContextOptions { epsilon: 0.1, ..Default::default() }).unwrap();
        let err = tau_sup_error(&ctx);
        assert!(err <= 0.1 + 1e-12 && err > 0.09, "{err}");
        let zero = KernelContext::new(ctx.domain.clone(), &cal, &ContextOptions::default()).unwrap();
        assert_eq!(zero.tau_policy, TauPolicy::Exact);
        for p in zero.domain.sample_points(300, 3, 0.2).chunks(2) {
            assert_eq!(levi_polynomial_eps(&zero, &p[0], &p[1]), levi_polynomial(&zero, &p[0], &p[1]));
        }
    }

    #[test]
    fn modulus_examples() {
        let deltas = geometric_deltas(1e-4, 0.5, 8);
        for d in [make_ball::<f64>(2).unwrap(), make_ellipsoid(&[1.0, 2.0]).unwrap()] {
            let m = modulus_of_continuity(&d, &deltas, 200, 3).unwrap();
            assert!(m.omegas.iter().all(|&o| o == 0.0));
            assert!((delta_for_epsilon(&m, 1e-3).unwrap() - 0.5).abs() < 1e-12);
        }
        // ω(δ) = 2 · 1.5 δ_p · sup ||x_z| − |x_w|| = 0.3 δ for δ_p = 0.1
        let p = make_c2_perturbed_ball(1, 0.1).unwrap();
        let deltas = [0.01, 0.02, 0.05, 0.1, 0.2];
        let m = modulus_of_continuity(&p, &deltas, 4000, 3).unwrap();
        for (d, o) in m.deltas.iter().zip(&m.omegas) {
            assert!(*o <= 0.3 * d + 1e-12 && *o >= 0.25 * d, "{d}: {o}");
        }
        assert!(m.omegas.windows(2).all(|w| w[1] >= w[0]));
        let de = delta_for_epsilon(&m, 0.06).unwrap();
        assert!((de - 0.2).abs() < 1e-12);
        assert!(matches!(delta_for_epsilon(&m, 0.0), Err(Error::NoAdmissibleDelta { .. })));
        assert!(modulus_of_continuity(&p, &[0.2, 0.1], 10, 0).is_err());
    }

    #[test]
    fn size_proxy_hand_values() {
        let ctx = KernelContext::global(make_ball::<f64>(1).unwrap()).unwrap();
        let w = pt(&[(0.9, 0.0)]);
        let z = pt(&[(0.0, 0.9)]);
        // 0.19 + 0.19 + |Im 0.9(0.9 − 0.9i)| + |0.9 − 0.9i|² = 0.38 + 0.81 + 1.62
        assert!((size_proxy(&ctx, &w, &z) - 2.81).abs() < 1e-14);
        let inner = pt(&[(0.2, 0.1)]);
        assert!((size_proxy(&ctx, &inner, &inner) - 2.0 * 0.95).abs() < 1e-14);
    }
}
