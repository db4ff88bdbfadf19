//! Estimate campaigns. Each turns one claim about g, b¹_ε or the derived
//! operators into a seeded numerical experiment and returns a
//! [`ValidationReport`] with the measured constants, sample counts, seeds,
//! pass/fail checks against [`Thresholds`] and a table of raw rows.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use statrs::function::beta::beta;

use crate::domain::{make_ball, random_direction, DomainSpec, ModelKind};
use crate::error::{Error, Result};
use crate::kernel::{k0_leading, kernel_b1, kernel_b1_hat};
use crate::levi::{
    delta_for_epsilon, g, g_eps, geometric_deltas, mollification_scale, modulus_of_continuity, size_proxy,
    KernelContext, TauPolicy,
};
use crate::linalg::{norm_sqr, sub};
use crate::operators::{
    abs_operator, apply_b1_streaming, assemble, defect_sparse, estimate_norm, gamma_operator, interior_targets,
    lp_norm, rescaled_model_integral, schur_integrals, select_radius, staggered_rule, RadiusChoice, SchurSlot,
    Targets, TruncationProfile,
};
use crate::oracle::{ball_kernel, build_basis, Sigma};
use crate::quadrature::{
    band_rule, monte_carlo_rule, pairwise_sum, surface_rule, tensor_rule, volume_rule_with, BandOptions,
    GradedOptions, Point, QuadratureRule, VolumeOptions,
};

type Context = KernelContext<f64>;
type Domain = DomainSpec<f64>;

pub const THRESHOLDS_VERSION: u32 = 1;

/// Pass/fail limits of every campaign, in one versioned place. Any field can
/// be overridden from a run configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    pub version: u32,
    /// Relative error of b¹ against the closed-form ball kernel.
    pub ball_exactness: f64,
    /// Reproduction of holomorphic polynomials on a deterministic grid.
    pub reproducing_grid: f64,
    /// Reproduction with a Monte Carlo rule.
    pub reproducing_monte_carlo: f64,
    /// Boundary Cauchy–Fantappié integral on the sphere.
    pub boundary_formula: f64,
    /// Fitted intercept of |b¹ g^{n+1} − K₀| against |w − z|.
    pub k0_intercept: f64,
    /// Relative change of smooth constants when the sample count doubles.
    pub smooth_stability: f64,
    /// Relative change of singular-integral quantities under refinement.
    pub singular_stability: f64,
    /// Relative spread of C′ across ε.
    pub eps_variation: f64,
    /// Admissible factor by which an O(ε) quantity drops per ε-halving.
    pub halving_factor: [f64; 2],
    /// Relative spread of schur_integral·|ρ(z)|^α along a normal ray.
    pub schur_band: f64,
    pub schur_closed_form: f64,
    /// Agreement of the two rescaled-model pipelines.
    pub model_agreement: f64,
    /// Relative spread of the Γ_ε norm estimates across ε.
    pub gamma_uniformity: f64,
    /// Defect norm on domains with a Hermitian kernel.
    pub defect_baseline: f64,
    /// Largest max/min ratio of ‖A_ε‖/ε across ε.
    pub defect_kappa_spread: f64,
    /// Relative change of |B| norm estimates under grid refinement.
    pub abs_stability: f64,
    /// Final density error over first density error.
    pub density_final_ratio: f64,
    pub oracle_tolerance: f64,
    pub oracle_kernel: f64,
    /// Relative deviation of the fitted per-degree decay from log(|w||z|).
    pub oracle_slope: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            version: THRESHOLDS_VERSION,
            ball_exactness: 1e-10,
            reproducing_grid: 1e-4,
            reproducing_monte_carlo: 1e-2,
            boundary_formula: 1e-3,
            k0_intercept: 1e-8,
            smooth_stability: 0.10,
            singular_stability: 0.30,
            eps_variation: 0.10,
            halving_factor: [1.5, 3.0],
            schur_band: 0.30,
            schur_closed_form: 0.01,
            model_agreement: 0.01,
            gamma_uniformity: 0.15,
            defect_baseline: 1e-10,
            defect_kappa_spread: 2.0,
            abs_stability: 0.15,
            density_final_ratio: 0.25,
            oracle_tolerance: 1e-8,
            oracle_kernel: 1e-6,
            oracle_slope: 0.20,
        }
    }
}

/// One pass/fail comparison.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub limit: String,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValidationReport {
    pub id: String,
    pub domain: String,
    pub parameters: BTreeMap<String, Value>,
    pub samples: usize,
    pub seed: u64,
    pub constants: BTreeMap<String, f64>,
    pub checks: Vec<Check>,
    pub notes: Vec<String>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub passed: bool,
}

impl ValidationReport {
    pub fn new(id: &str, domain: &str, samples: usize, seed: u64, columns: &[&str]) -> Self {
        Self {
            id: id.to_string(),
            domain: domain.to_string(),
            parameters: BTreeMap::new(),
            samples,
            seed,
            constants: BTreeMap::new(),
            checks: Vec::new(),
            notes: Vec::new(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
            passed: true,
        }
    }

    pub fn param(&mut self, key: &str, value: Value) {
        self.parameters.insert(key.to_string(), value);
    }

    pub fn constant(&mut self, key: &str, value: f64) {
        self.constants.insert(key.to_string(), value);
    }

    pub fn note(&mut self, text: impl Into<String>) {
        self.notes.push(text.into());
    }

    pub fn row(&mut self, values: Vec<f64>) {
        debug_assert_eq!(values.len(), self.columns.len());
        self.rows.push(values);
    }

    fn push(&mut self, name: String, value: f64, limit: String, passed: bool) {
        self.passed &= passed;
        self.checks.push(Check { name, value, limit, passed });
    }

    /// value ≤ limit (NaN fails).
    pub fn check_le(&mut self, name: impl Into<String>, value: f64, limit: f64) {
        self.push(name.into(), value, format!("<= {limit:e}"), value <= limit);
    }

    /// value ∈ [lo, hi].
    pub fn check_in(&mut self, name: impl Into<String>, value: f64, lo: f64, hi: f64) {
        self.push(name.into(), value, format!("in [{lo}, {hi}]"), value >= lo && value <= hi);
    }

    pub fn check_finite(&mut self, name: impl Into<String>, value: f64) {
        self.push(name.into(), value, "finite".into(), value.is_finite());
    }

    /// Fold another report's checks into this one, prefixing their names.
    pub fn absorb(&mut self, other: &ValidationReport) {
        for c in &other.checks {
            self.push(format!("{}/{}", other.id, c.name), c.value, c.limit.clone(), c.passed);
        }
    }

    /// Append another report with the same columns: rows, constants and checks.
    pub fn merge(&mut self, other: &ValidationReport) {
        debug_assert_eq!(self.columns, other.columns);
        self.rows.extend(other.rows.iter().cloned());
        self.constants.extend(other.constants.iter().map(|(k, v)| (k.clone(), *v)));
        self.samples += other.samples;
        for c in &other.checks {
            self.push(c.name.clone(), c.value, c.limit.clone(), c.passed);
        }
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut wtr = csv::Writer::from_path(path)?;
        wtr.write_record(&self.columns)?;
        for r in &self.rows {
            wtr.write_record(r.iter().map(|v| format!("{v:e}")))?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// One line per check.
    pub fn summary(&self) -> String {
        let mut out = format!("[{}] {} on {}\n", if self.passed { "PASS" } else { "FAIL" }, self.id, self.domain);
        for c in &self.checks {
            out.push_str(&format!(
                "    {} {} = {:.6e} ({})\n",
                if c.passed { "ok  " } else { "FAIL" },
                c.name,
                c.value,
                c.limit
            ));
        }
        for n in &self.notes {
            out.push_str(&format!("    note: {n}\n"));
        }
        out
    }
}

fn describe_ctx(report: &mut ValidationReport, ctx: &Context) {
    report.param("epsilon", json!(ctx.epsilon));
    report.param("mu", json!(ctx.mu));
    report.param("c_bound", json!(ctx.c_bound));
    report.param("tau_policy", serde_json::to_value(ctx.tau_policy).unwrap_or(Value::Null));
    report.param("global_holomorphic_mode", json!(ctx.global_holomorphic_mode));
}

/// The context with a different ε; τ^ε is re-chosen by the mollification rule.
pub fn with_epsilon(ctx: &Context, epsilon: f64) -> Context {
    let mut c = ctx.clone();
    c.epsilon = epsilon;
    c.tau_policy = if epsilon == 0.0 || ctx.domain.has_constant_hessian() {
        TauPolicy::Exact
    } else {
        TauPolicy::Mollified { scale: mollification_scale(&ctx.domain, epsilon) }
    };
    c
}

/// max/min − 1 of a list of positive numbers.
pub fn relative_spread(values: &[f64]) -> f64 {
    let (lo, hi) = values.iter().fold((f64::INFINITY, 0.0f64), |(a, b), v| (a.min(*v), b.max(*v)));
    hi / lo - 1.0
}

fn two_sided(ratio: f64) -> f64 {
    if ratio >= 1.0 {
        ratio
    } else {
        1.0 / ratio
    }
}

/// Least-squares slope of y against x.
pub fn fit_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// b¹ against (n!/πⁿ)(1 − ⟨z, w̄⟩)^{−(n+1)} on the ball in global mode.
pub fn validate_ball_exactness(dims: &[usize], pairs: usize, seed: u64, th: &Thresholds) -> Result<ValidationReport> {
    let mut report = ValidationReport::new("ball_exactness", "ball", pairs, seed, &["dim", "pair", "relative_error"]);
    report.param("dims", json!(dims));
    for &n in dims {
        let ctx = KernelContext::global(make_ball::<f64>(n)?)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ n as u64);
        let mut worst = 0.0f64;
        for i in 0..pairs {
            let w = ctx.domain.sample_point(&mut rng, 0.3);
            let z = ctx.domain.sample_point(&mut rng, 0.3);
            let want = ball_kernel(n, &w, &z);
            let got = kernel_b1(&ctx, &w, &z)?.value;
            let rel = (got - want).norm() / want.norm();
            worst = worst.max(rel);
            report.row(vec![n as f64, i as f64, rel]);
        }
        report.constant(&format!("max_relative_error_n{n}"), worst);
        report.check_le(format!("n={n} max relative error"), worst, th.ball_exactness);
    }
    Ok(report)
}

fn sample_pairs(domain: &Domain, count: usize, rng: &mut ChaCha8Rng) -> Vec<(Point, Point)> {
    let diam = domain.diameter();
    (0..count)
        .map(|i| {
            let w = domain.sample_point(rng, 0.5);
            let z = match i % 3 {
                0 => domain.sample_point(rng, 0.5),
                1 => domain.sample_near(rng, &w, 0.1 * diam),
                _ => domain.sample_near(rng, &w, 0.01 * diam),
            };
            (w, z)
        })
        .collect()
}

/// Two-sided constants of |g| ≈ size proxy (C), |g_ε| ≈ |g| (C′ per ε) and
/// |g(w, z)| ≈ |g(z, w)| (C″), each measured on N and 2N seeded pairs.
pub fn validate_size_estimate(
    ctx: &Context,
    eps_list: &[f64],
    samples: usize,
    seed: u64,
    th: &Thresholds,
) -> Result<ValidationReport> {
    let mut report = ValidationReport::new(
        "size_estimate",
        ctx.domain.name(),
        2 * samples,
        seed,
        &["pair", "size_ratio", "symmetry_ratio", "distance"],
    );
    describe_ctx(&mut report, ctx);
    report.param("eps_list", json!(eps_list));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pairs = sample_pairs(&ctx.domain, 2 * samples, &mut rng);
    let mut c = [1.0f64; 2];
    let mut c2 = [1.0f64; 2];
    for (i, (w, z)) in pairs.iter().enumerate() {
        let proxy = size_proxy(ctx, w, z);
        if !(proxy > 0.0) {
            continue;
        }
        let gwz = g(ctx, w, z).norm();
        let gzw = g(ctx, z, w).norm();
        let size = gwz / proxy;
        let sym = gwz / gzw;
        if i < samples {
            c[0] = c[0].max(two_sided(size));
            c2[0] = c2[0].max(two_sided(sym));
        }
        c[1] = c[1].max(two_sided(size));
        c2[1] = c2[1].max(two_sided(sym));
        report.row(vec![i as f64, size, sym, norm_sqr(&sub(w, z)).sqrt()]);
    }
    report.constant("C", c[1]);
    report.constant("C_half", c[0]);
    report.constant("C2", c2[1]);
    report.constant("C2_half", c2[0]);
    report.check_finite("C", c[1]);
    report.check_le("C change under sample doubling", c[1] / c[0] - 1.0, th.smooth_stability);
    report.check_finite("C''", c2[1]);
    report.check_le("C'' change under sample doubling", c2[1] / c2[0] - 1.0, th.smooth_stability);
    let mut cprimes = Vec::new();
    for &eps in eps_list {
        let ce = with_epsilon(ctx, eps);
        let mut cp = [1.0f64; 2];
        for (i, (w, z)) in pairs.iter().enumerate() {
            let ge = g_eps(&ce, w, z).norm();
            let g0 = g(&ce, w, z).norm();
            if g0 == 0.0 {
                continue;
            }
            let r = two_sided(ge / g0);
            if i < samples {
                cp[0] = cp[0].max(r);
            }
            cp[1] = cp[1].max(r);
        }
        report.constant(&format!("C'_eps{eps}"), cp[1]);
        report.check_le(format!("C' change under sample doubling (eps={eps})"), cp[1] / cp[0] - 1.0, th.smooth_stability);
        cprimes.push(cp[1]);
    }
    if !cprimes.is_empty() {
        report.check_le("C' spread across eps", relative_spread(&cprimes), th.eps_variation);
    }
    Ok(report)
}

/// Sup over pairs with |z − w| < δ_ε of |g_ε(w, z) − conj g_ε(z, w)|/|z − w|²,
/// for each ε; on a C²-only domain it should drop linearly with ε.
pub fn validate_conjugate_symmetry(
    ctx: &Context,
    eps_list: &[f64],
    samples: usize,
    seed: u64,
    th: &Thresholds,
) -> Result<ValidationReport> {
    let mut report = ValidationReport::new(
        "conjugate_symmetry",
        ctx.domain.name(),
        samples,
        seed,
        &["epsilon", "delta_eps", "sup_ratio"],
    );
    describe_ctx(&mut report, ctx);
    report.param("eps_list", json!(eps_list));
    let deltas = geometric_deltas(1e-3, 1.0, 120);
    let modulus = modulus_of_continuity(&ctx.domain, &deltas, 400, seed ^ 0x0d0d)?;
    let mut sups = Vec::new();
    for &eps in eps_list {
        let ce = with_epsilon(ctx, eps);
        let delta = delta_for_epsilon(&modulus, eps)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut sup = 0.0f64;
        for _ in 0..samples {
            let w = ctx.domain.sample_point(&mut rng, 0.5);
            let z = ctx.domain.sample_near(&mut rng, &w, 0.999 * delta);
            let d2 = norm_sqr(&sub(w.as_slice(), &z));
            if d2 == 0.0 {
                continue;
            }
            let defect = (g_eps(&ce, &w, &z) - g_eps(&ce, &z, &w).conj()).norm();
            sup = sup.max(defect / d2);
        }
        report.constant(&format!("sup_ratio_eps{eps}"), sup);
        report.constant(&format!("delta_eps{eps}"), delta);
        report.row(vec![eps, delta, sup]);
        sups.push(sup);
    }
    if sups.iter().all(|s| *s < 1e-12) {
        report.note("g_eps is conjugate-symmetric to rounding on this domain; no decay to measure");
        report.check_le("max sup ratio", sups.iter().cloned().fold(0.0, f64::max), 1e-12);
    } else {
        for (k, pair) in sups.windows(2).enumerate() {
            report.check_in(
                format!("factor eps={} -> {}", eps_list[k], eps_list[k + 1]),
                pair[0] / pair[1],
                th.halving_factor[0],
                th.halving_factor[1],
            );
        }
    }
    Ok(report)
}

/// Leading-term law: for w ∈ bD and z → w along an inward direction,
/// b¹ g^{n+1} − K₀(w) = O(|w − z|). Reports the fitted intercept (should be 0)
/// and the slope constant C_ε.
pub fn validate_k0_law(ctx: &Context, base_points: usize, seed: u64, th: &Thresholds) -> Result<ValidationReport> {
    const STEPS: usize = 8;
    let mut report = ValidationReport::new(
        "k0_law",
        ctx.domain.name(),
        base_points * STEPS,
        seed,
        &["base", "distance", "remainder"],
    );
    describe_ctx(&mut report, ctx);
    let n = ctx.dim();
    let results: Vec<Result<(f64, f64, Vec<(f64, f64)>)>> = (0..base_points)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(b as u64));
            let zeta = random_direction::<f64>(&mut rng, n);
            let r = ctx.domain.radial_extent(&zeta);
            let w: Point = zeta.iter().map(|x| x * r).collect();
            // inward: −normal plus a random tangential part
            let grad = ctx.domain.grad_rho(&w);
            let gn = grad.iter().map(|x| x * x).sum::<f64>().sqrt();
            let mut v: Vec<f64> = grad.iter().map(|x| -x / gn).collect();
            let t = random_direction::<f64>(&mut rng, n);
            for (k, c) in t.iter().enumerate() {
                v[2 * k] += 0.7 * c.re;
                v[2 * k + 1] += 0.7 * c.im;
            }
            let vn = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            let dir: Vec<Complex64> = v.chunks(2).map(|c| Complex64::new(c[0] / vn, c[1] / vn)).collect();
            let k0 = k0_leading(ctx, &w);
            let mut samples = Vec::with_capacity(STEPS);
            for s in 0..STEPS {
                let t = 1e-2 * 0.5f64.powi(s as i32);
                let z: Point = w.iter().zip(&dir).map(|(a, d)| a + d * t).collect();
                let kv = kernel_b1(ctx, &w, &z)?;
                samples.push((t, (kv.numerator - k0).norm()));
            }
            // intercept by Richardson on the three smallest distances:
            // R(t) = a + b t + c t² ⇒ a = (8R(t/4) − 6R(t/2) + R(t))/3
            let m = samples.len();
            let (r1, r2, r3) = (samples[m - 3].1, samples[m - 2].1, samples[m - 1].1);
            let intercept = (8.0 * r3 - 6.0 * r2 + r1) / 3.0;
            let slope = samples.iter().map(|(t, r)| r / t).fold(0.0, f64::max);
            Ok((intercept, slope, samples))
        })
        .collect();
    let mut worst = 0.0f64;
    let mut c_eps = 0.0f64;
    for (b, res) in results.into_iter().enumerate() {
        let (intercept, slope, samples) = res?;
        worst = worst.max(intercept.abs());
        c_eps = c_eps.max(slope);
        for (t, r) in samples {
            report.row(vec![b as f64, t, r]);
        }
    }
    report.constant("C_eps", c_eps);
    report.constant("max_abs_intercept", worst);
    report.check_finite("C_eps", c_eps);
    report.check_le("max |fitted intercept|", worst, th.k0_intercept);
    Ok(report)
}

/// Closed form of ∫_B |ρ(w)|^{−α} dV for the unit ball (g(w, 0) = 1).
pub fn ball_schur_at_origin(n: usize, alpha: f64) -> f64 {
    PI.powi(n as i32) / statrs::function::gamma::gamma(n as f64) * beta(n as f64, 1.0 - alpha)
}

/// ∫_D |1 − z w̄|^{−2}(1 − |w|²)^{−α} dA(w) on the unit disc with |z|² = x:
/// π Σ_k x^k B(k + 1, 1 − α). The product with (1 − x)^α tends to
/// π²/sin(πα), with a correction of relative order (1 − x)^α.
pub fn disc_schur_exact(alpha: f64, x: f64) -> f64 {
    let mut term = beta(1.0, 1.0 - alpha);
    let mut sum = 0.0;
    let mut k = 0.0;
    while term > 1e-17 * sum || k < 10.0 {
        sum += term;
        term *= x * (k + 1.0) / (k + 2.0 - alpha);
        k += 1.0;
    }
    PI * sum
}

/// Schur integrals ∫ |g(w, z)|^{−n−1}|ρ(w)|^{−α} dV(w) along the ray z = (1 − d)R(e₁)e₁:
/// the product with |ρ(z)|^α must stay bounded; w- and z-slot integrals must
/// agree within the sampled symmetry constant.
pub fn validate_schur(
    ctx: &Context,
    alphas: &[f64],
    ray_depths: &[f64],
    opts: &GradedOptions,
    th: &Thresholds,
) -> Result<ValidationReport> {
    let n = ctx.dim();
    let mut report = ValidationReport::new(
        "schur",
        ctx.domain.name(),
        ray_depths.len(),
        0,
        &["alpha", "depth", "rho_z", "integral_w", "integral_z", "product"],
    );
    describe_ctx(&mut report, ctx);
    report.param("alphas", json!(alphas));
    report.param("ray_depths", json!(ray_depths));
    report.param("graded", serde_json::to_value(opts)?);
    let mut e1: Point = (0..n).map(|_| Complex64::new(0.0, 0.0)).collect();
    e1[0] = Complex64::new(1.0, 0.0);
    let r = ctx.domain.radial_extent(&e1);
    // C″ sampled near the ray
    let mut rng = ChaCha8Rng::seed_from_u64(0x5c);
    let mut c2 = 1.0f64;
    for _ in 0..4000 {
        let w = ctx.domain.sample_point(&mut rng, 0.5);
        let z = ctx.domain.sample_point(&mut rng, 0.5);
        let (a, b) = (g(ctx, &w, &z).norm(), g(ctx, &z, &w).norm());
        if a > 0.0 && b > 0.0 {
            c2 = c2.max(two_sided(a / b));
        }
    }
    report.constant("C2_sampled", c2);
    let mut products: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    let mut worst_transfer = 1.0f64;
    for &d in ray_depths {
        let z: Point = e1.iter().map(|x| x * (r * (1.0 - d))).collect();
        let vw = schur_integrals(ctx, opts, &z, alphas, SchurSlot::W)?;
        let vz = schur_integrals(ctx, opts, &z, alphas, SchurSlot::Z)?;
        for (k, (a, b)) in vw.iter().zip(&vz).enumerate() {
            let product = a.value * a.rho_z.abs().powf(a.alpha);
            products.entry(k).or_default().push(product);
            worst_transfer = worst_transfer.max(two_sided(a.value / b.value));
            report.row(vec![a.alpha, d, a.rho_z, a.value, b.value, product]);
        }
    }
    for (k, p) in &products {
        let alpha = alphas[*k];
        report.constant(&format!("max_product_alpha{alpha}"), p.iter().cloned().fold(0.0, f64::max));
        report.check_le(format!("product spread alpha={alpha}"), relative_spread(p), th.schur_band);
    }
    if matches!(ctx.domain.kind(), ModelKind::Ball) && n == 1 && ctx.global_holomorphic_mode {
        for &alpha in alphas {
            report.constant(&format!("limit_alpha{alpha}"), PI * PI / (PI * alpha).sin());
        }
        let mut worst = 0.0f64;
        for row in &report.rows {
            let exact = disc_schur_exact(row[0], (1.0 - row[1]) * (1.0 - row[1]));
            worst = worst.max((row[3] - exact).abs() / exact);
        }
        report.check_le("disc series agreement along the ray", worst, th.schur_closed_form);
    }
    report.constant("slot_ratio", worst_transfer);
    report.check_le("w/z slot ratio over C''^(n+1)", worst_transfer / c2.powi(n as i32 + 1), 1.0 + 1e-6);
    if matches!(ctx.domain.kind(), ModelKind::Ball) && ctx.global_holomorphic_mode {
        let origin: Point = (0..n).map(|_| Complex64::new(0.0, 0.0)).collect();
        for v in schur_integrals(ctx, opts, &origin, alphas, SchurSlot::W)? {
            let exact = ball_schur_at_origin(n, v.alpha);
            report.constant(&format!("origin_alpha{}", v.alpha), v.value);
            report.check_le(format!("origin closed form alpha={}", v.alpha), (v.value - exact).abs() / exact, th.schur_closed_form);
        }
    }
    Ok(report)
}

/// Direct quadrature against the Beta-function reduction of the rescaled model integral.
pub fn validate_model_integral(dims: &[usize], alphas: &[f64], cutoff: f64, th: &Thresholds) -> Result<ValidationReport> {
    let mut report = ValidationReport::new(
        "model_integral",
        "model",
        dims.len() * alphas.len(),
        0,
        &["n", "alpha", "direct", "reduced", "c_alpha", "relative_difference"],
    );
    report.param("cutoff", json!(cutoff));
    for &n in dims {
        for &alpha in alphas {
            let m = rescaled_model_integral(n, alpha, cutoff)?;
            report.row(vec![n as f64, alpha, m.direct, m.reduced, m.c_alpha, m.relative_difference]);
            report.check_le(format!("n={n} alpha={alpha} pipelines"), m.relative_difference, th.model_agreement);
        }
    }
    Ok(report)
}

/// f(w) = Π w_j^{α_j}.
pub fn monomial(alpha: &[u32], w: &[Complex64]) -> Complex64 {
    alpha.iter().zip(w).fold(Complex64::new(1.0, 0.0), |acc, (&a, x)| acc * x.powu(a))
}

/// Which integral represents B¹ in a reproduction test.
#[derive(Clone, Debug)]
pub enum ReproducingRule {
    /// Dense deterministic volume rule (all targets at once).
    Grid(QuadratureRule),
    /// Large rule applied target by target without storing the matrix.
    Streaming(QuadratureRule),
}

/// B¹(f)(z) = f(z) for holomorphic monomials f at interior targets.
pub fn validate_reproducing(
    ctx: &Context,
    monomials: &[Vec<u32>],
    rule: &ReproducingRule,
    targets: &[Point],
    tolerance: f64,
) -> Result<ValidationReport> {
    let (q, label) = match rule {
        ReproducingRule::Grid(r) => (r, "grid"),
        ReproducingRule::Streaming(r) => (r, "streaming"),
    };
    let mut report = ValidationReport::new(
        "reproducing",
        ctx.domain.name(),
        q.len(),
        q.meta.seed,
        &["monomial", "target", "abs_z", "relative_error"],
    );
    describe_ctx(&mut report, ctx);
    report.param("rule", json!(q.meta.label));
    report.param("mode", json!(label));
    report.param("targets", json!(targets.len()));
    report.param("monomials", json!(monomials));
    let outputs: Vec<Vec<Complex64>> = match rule {
        ReproducingRule::Grid(r) => {
            let op = crate::operators::b1_operator(ctx, r, &Targets::from_points(&ctx.domain, targets.to_vec()))?;
            monomials
                .iter()
                .map(|a| op.apply(&r.nodes.iter().map(|w| monomial(a, w)).collect::<Vec<_>>()))
                .collect()
        }
        ReproducingRule::Streaming(r) => monomials
            .iter()
            .map(|a| apply_b1_streaming(ctx, r, targets, |w| monomial(a, w)))
            .collect::<Result<_>>()?,
    };
    let mut worst = 0.0f64;
    for (m, (a, out)) in monomials.iter().zip(&outputs).enumerate() {
        let mut worst_m = 0.0f64;
        for (t, (z, o)) in targets.iter().zip(out).enumerate() {
            let want = monomial(a, z);
            let rel = (o - want).norm() / want.norm();
            worst_m = worst_m.max(rel);
            report.row(vec![m as f64, t as f64, norm_sqr(z).sqrt(), rel]);
        }
        report.constant(&format!("max_relative_error_{a:?}"), worst_m);
        worst = worst.max(worst_m);
    }
    report.constant("max_relative_error", worst);
    report.check_le("max relative error", worst, tolerance);
    Ok(report)
}

/// Boundary Cauchy–Fantappié formula: ∫_{bD} f · density = f(z).
pub fn validate_boundary_formula(
    ctx: &Context,
    monomials: &[Vec<u32>],
    surface: &QuadratureRule,
    targets: &[Point],
    tolerance: f64,
) -> Result<ValidationReport> {
    let mut report = ValidationReport::new(
        "boundary_formula",
        ctx.domain.name(),
        surface.len(),
        0,
        &["monomial", "target", "abs_error"],
    );
    describe_ctx(&mut report, ctx);
    report.param("rule", json!(surface.meta.label));
    let mut worst = 0.0f64;
    for z in targets.iter() {
        let dens: Vec<Complex64> = surface
            .nodes
            .iter()
            .zip(&surface.normals)
            .zip(&surface.weights)
            .map(|((w, nrm), wt)| Ok(kernel_b1_hat(ctx, w, z, nrm)?.density * *wt))
            .collect::<Result<_>>()?;
        for (m, a) in monomials.iter().enumerate() {
            let terms: Vec<Complex64> = surface.nodes.iter().zip(&dens).map(|(w, d)| monomial(a, w) * d).collect();
            let err = (pairwise_sum(&terms) - monomial(a, z)).norm();
            worst = worst.max(err);
            report.row(vec![m as f64, report.rows.len() as f64, err]);
        }
    }
    report.constant("max_abs_error", worst);
    report.check_le("max error", worst, tolerance);
    Ok(report)
}

/// p = 2 norm estimates of Γ_ε on a fixed grid for several ε.
pub fn validate_gamma_uniformity(
    ctx: &Context,
    eps_list: &[f64],
    opts: &VolumeOptions,
    th: &Thresholds,
) -> Result<ValidationReport> {
    let rule = volume_rule_with(&ctx.domain, opts)?;
    let targets = Targets::from_rule(&staggered_rule(&ctx.domain, opts)?);
    let mut report =
        ValidationReport::new("gamma_uniformity", ctx.domain.name(), rule.len(), 0, &["epsilon", "norm", "iterations"]);
    describe_ctx(&mut report, ctx);
    report.param("rule", json!(rule.meta.label));
    let mut norms = Vec::new();
    for &eps in eps_list {
        let ce = with_epsilon(ctx, eps);
        let op = gamma_operator(&ce, &rule, &targets, true)?;
        let e = estimate_norm(&op, 2.0, 1, 0)?;
        report.row(vec![eps, e.value, e.iterations as f64]);
        report.constant(&format!("norm_eps{eps}"), e.value);
        norms.push(e.value);
    }
    if ctx.domain.has_constant_hessian() {
        report.note("constant Hessian: g_eps = g, so the estimates coincide for every eps");
    }
    report.check_le("spread across eps", relative_spread(&norms), th.gamma_uniformity);
    Ok(report)
}

/// Layout of the defect-decay experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DefectOptions {
    /// Angular nodes per unit of 2π/r, so that the grid resolves the cutoff scale.
    pub nodes_per_radius: f64,
    pub shells: usize,
    pub shell_order: usize,
    pub modulus_samples: usize,
    pub seed: u64,
}

impl Default for DefectOptions {
    fn default() -> Self {
        Self { nodes_per_radius: 4.0, shells: 8, shell_order: 4, modulus_samples: 400, seed: 11 }
    }
}

/// Cutoff radius r = min(δ_ε, δ′_ε, ε/A_ε) for each ε, from one sampled
/// modulus of continuity.
pub fn cutoff_radii(ctx: &Context, eps_list: &[f64], samples: usize, seed: u64) -> Result<Vec<RadiusChoice>> {
    let deltas = geometric_deltas(1e-3, 1.0, 120);
    let modulus = modulus_of_continuity(&ctx.domain, &deltas, samples, seed)?;
    eps_list
        .iter()
        .map(|&eps| {
            let delta = delta_for_epsilon(&modulus, eps)?;
            select_radius(&with_epsilon(ctx, eps), delta, &deltas, samples, seed)
        })
        .collect()
}

/// ‖A_ε‖₂ with A_ε = D^r − (D^r)* and r = min(δ_ε, δ′_ε, ε/A_ε). A_ε is
/// supported in the boundary band of width ~r, so it is assembled on a band
/// rule whose angular spacing is proportional to r.
pub fn validate_defect_decay(
    ctx: &Context,
    eps_list: &[f64],
    opts: &DefectOptions,
    th: &Thresholds,
) -> Result<ValidationReport> {
    let mut report = ValidationReport::new(
        "defect_decay",
        ctx.domain.name(),
        opts.modulus_samples,
        opts.seed,
        &["epsilon", "r", "delta_eps", "delta_prime_eps", "a_eps", "nodes", "nnz", "norm", "kappa"],
    );
    describe_ctx(&mut report, ctx);
    report.param("eps_list", json!(eps_list));
    report.param("options", serde_json::to_value(opts)?);
    let radii = cutoff_radii(ctx, eps_list, opts.modulus_samples, opts.seed)?;
    let hermitian = ctx.domain.has_constant_hessian();
    let mut norms = Vec::new();
    let mut kappas = Vec::new();
    for (&eps, choice) in eps_list.iter().zip(&radii) {
        let ce = with_epsilon(ctx, eps);
        let r = choice.r.min(1.0);
        let band = BandOptions {
            gap_max: (0.6 * r).min(0.9),
            shells: opts.shells,
            shell_order: opts.shell_order,
            q: 0.5,
            angular: ((opts.nodes_per_radius * 2.0 * PI / r).ceil() as usize).max(8),
            angular_offset: 0.0,
        };
        let rule = band_rule(&ctx.domain, &band)?;
        let a = defect_sparse(&ce, &rule, &TruncationProfile::new(r)?)?;
        let norm = a.norm2(opts.seed).value;
        let kappa = norm / eps;
        report.row(vec![
            eps,
            r,
            choice.delta_eps,
            choice.delta_prime_eps,
            choice.a_eps,
            rule.len() as f64,
            a.nnz() as f64,
            norm,
            kappa,
        ]);
        report.constant(&format!("norm_eps{eps}"), norm);
        report.constant(&format!("r_eps{eps}"), r);
        norms.push(norm);
        kappas.push(kappa);
    }
    if hermitian {
        report.note("Hermitian kernel: the defect is rounding only");
        for (eps, n) in eps_list.iter().zip(&norms) {
            report.check_le(format!("baseline eps={eps}"), *n, th.defect_baseline);
        }
    } else {
        for (k, pair) in norms.windows(2).enumerate() {
            report.check_in(
                format!("factor eps={} -> {}", eps_list[k], eps_list[k + 1]),
                pair[0] / pair[1],
                th.halving_factor[0],
                th.halving_factor[1],
            );
        }
        report.constant("kappa_max", kappas.iter().cloned().fold(0.0, f64::max));
        report.check_le("kappa max/min", relative_spread(&kappas) + 1.0, th.defect_kappa_spread);
    }
    Ok(report)
}

/// L^p norm estimates of the operator with kernel |B| (closed-form ball
/// kernel) on successively refined grids.
pub fn validate_abs_bergman(
    dim: usize,
    resolutions: &[usize],
    shells: usize,
    p_list: &[f64],
    seed: u64,
    th: &Thresholds,
) -> Result<ValidationReport> {
    let domain = make_ball::<f64>(dim)?;
    let mut report = ValidationReport::new(
        "abs_bergman",
        domain.name(),
        resolutions.len(),
        seed,
        &["resolution", "nodes", "p", "estimate", "lower_bound"],
    );
    report.param("resolutions", json!(resolutions));
    report.param("p_list", json!(p_list));
    let mut by_p: Vec<Vec<f64>> = vec![Vec::new(); p_list.len()];
    for &res in resolutions {
        let opts = VolumeOptions { shells, ..VolumeOptions::with_resolution(res) };
        let rule = volume_rule_with(&domain, &opts)?;
        let targets = Targets::from_rule(&staggered_rule(&domain, &opts)?);
        let op = assemble("bergman", &rule, &targets, false, |w, z| Ok(ball_kernel(dim, w, z)))?;
        let abs = abs_operator(&op);
        for (k, &p) in p_list.iter().enumerate() {
            let e = estimate_norm(&abs, p, 4, seed)?;
            report.row(vec![res as f64, rule.len() as f64, p, e.value, f64::from(u8::from(e.lower_bound))]);
            by_p[k].push(e.value);
        }
    }
    if dim == 1 {
        report.note("disc reference: the |B| norm on L^p is pi/sin(pi/p); grid estimates are lower bounds");
    }
    for (k, &p) in p_list.iter().enumerate() {
        let v = &by_p[k];
        report.constant(&format!("estimate_p{p:.4}"), *v.last().unwrap_or(&f64::NAN));
        for (j, pair) in v.windows(2).enumerate() {
            report.check_le(
                format!("p={p:.4} change {}->{}", resolutions[j], resolutions[j + 1]),
                (pair[1] / pair[0] - 1.0).abs(),
                th.abs_stability,
            );
        }
        report.check_finite(format!("p={p:.4} estimate"), *v.last().unwrap_or(&f64::NAN));
    }
    Ok(report)
}

/// Functions for the density experiment.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DensityFunction {
    Constant,
    /// (1 − z₁)^{−β}, singular at the boundary point e₁.
    BoundaryPower { beta: f64 },
}

impl DensityFunction {
    pub fn eval(&self, z: &[Complex64]) -> Complex64 {
        match *self {
            DensityFunction::Constant => Complex64::new(1.0, 0.0),
            DensityFunction::BoundaryPower { beta } => (Complex64::new(1.0, 0.0) - z[0]).powf(-beta),
        }
    }

    /// ∫_D |f|^p < ∞ on the unit ball of Cⁿ: |1 − z₁|^{−βp} is integrable iff βp < n + 1.
    pub fn check_lp(&self, n: usize, p: f64) -> Result<()> {
        if let DensityFunction::BoundaryPower { beta } = *self {
            if beta * p >= (n + 1) as f64 {
                return Err(Error::NotInLp(format!("(1 - z1)^(-{beta}) with p = {p}: beta*p >= {}", n + 1)));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DensityOptions {
    pub target_resolution: usize,
    /// Source angular nodes per unit of n (the truncation depth 1/n sets the scale).
    pub source_nodes_per_n: usize,
    pub min_source_resolution: usize,
    /// Interior radial panels of the source rule (the boundary shells carry the refinement).
    pub radial_panels: usize,
    pub shells: usize,
}

impl Default for DensityOptions {
    fn default() -> Self {
        Self { target_resolution: 32, source_nodes_per_n: 12, min_source_resolution: 64, radial_panels: 4, shells: 10 }
    }
}

/// F_n = B¹(f·𝟙_{D_{1/n}}) with D_{1/n} = {ρ < −1/n}; reports ‖F_n − f‖_p.
/// On the unit ball D_{1/n} is the ball of radius √(1 − 1/n), so the sources
/// are an exact rule for it.
pub fn density_experiment(
    ctx: &Context,
    f: DensityFunction,
    n_list: &[usize],
    p: f64,
    opts: &DensityOptions,
    th: &Thresholds,
) -> Result<ValidationReport> {
    if !ctx.global_holomorphic_mode {
        return Err(Error::InvalidParameter("density experiment needs global holomorphic mode".into()));
    }
    if !matches!(ctx.domain.kind(), ModelKind::Ball) || ctx.dim() > 2 {
        return Err(Error::UnsupportedDomain(format!("density experiment on {}", ctx.domain.name())));
    }
    if !(p >= 1.0) {
        return Err(Error::InvalidParameter(format!("p must be >= 1, got {p}")));
    }
    f.check_lp(ctx.dim(), p)?;
    let dim = ctx.dim();
    let mut report =
        ValidationReport::new("density", ctx.domain.name(), 0, 0, &["n", "source_nodes", "target_nodes", "error"]);
    describe_ctx(&mut report, ctx);
    report.param("function", serde_json::to_value(f)?);
    report.param("p", json!(p));
    report.param("options", serde_json::to_value(opts)?);
    let t_opts = VolumeOptions {
        shells: opts.shells,
        radial_panels: opts.radial_panels,
        angular_offset: 0.5,
        ..VolumeOptions::with_resolution(opts.target_resolution)
    };
    let targets = volume_rule_with(&ctx.domain, &t_opts)?;
    let f_t: Vec<Complex64> = targets.nodes.iter().map(|z| f.eval(z)).collect();
    let f_norm = lp_norm(&targets.weights, &f_t, p);
    report.constant("f_norm", f_norm);
    let mut errors = Vec::new();
    for &n in n_list {
        let scale = (1.0 - 1.0 / n as f64).sqrt();
        let res = (opts.source_nodes_per_n * n).max(opts.min_source_resolution);
        let base = volume_rule_with(
            &ctx.domain,
            &VolumeOptions { shells: opts.shells, radial_panels: opts.radial_panels, ..VolumeOptions::with_resolution(res) },
        )?;
        let jac = scale.powi(2 * dim as i32);
        let mut src = base.clone();
        src.nodes = base.nodes.iter().map(|w| w.iter().map(|x| x * scale).collect()).collect();
        src.weights = base.weights.iter().map(|w| w * jac).collect();
        let fn_t = apply_b1_streaming(ctx, &src, &targets.nodes, |w| f.eval(w))?;
        let diff: Vec<Complex64> = fn_t.iter().zip(&f_t).map(|(a, b)| a - b).collect();
        let err = lp_norm(&targets.weights, &diff, p);
        report.row(vec![n as f64, src.len() as f64, targets.len() as f64, err]);
        report.constant(&format!("error_n{n}"), err);
        errors.push(err);
    }
    report.samples = targets.len();
    for (k, pair) in errors.windows(2).enumerate() {
        report.check_le(format!("decrease n={}->{}", n_list[k], n_list[k + 1]), pair[1] / pair[0], 1.0);
    }
    if let (Some(first), Some(last)) = (errors.first(), errors.last()) {
        report.check_le("final/first", last / first, th.density_final_ratio);
    }
    Ok(report)
}

/// Orthonormal-expansion oracle: Gram identity on a finer rule, idempotence,
/// self-adjointness, agreement with the closed form and the geometric
/// convergence rate |w||z| per added degree.
pub fn validate_oracle(
    dim: usize,
    degree_cap: usize,
    slope_caps: (usize, usize),
    point_modulus: f64,
    seed: u64,
    th: &Thresholds,
) -> Result<ValidationReport> {
    let domain = make_ball::<f64>(dim)?;
    let (angular, radial) = (2 * degree_cap + 2, degree_cap + 4);
    let rule = tensor_rule(&domain, angular, radial)?;
    let finer = tensor_rule(&domain, angular + 4, radial + 2)?;
    let basis = build_basis(&rule, degree_cap, Sigma::default())?;
    let mut report =
        ValidationReport::new("oracle", domain.name(), rule.len(), seed, &["degree", "kernel_error"]);
    report.param("degree_cap", json!(degree_cap));
    report.param("rule", json!(rule.meta.label));
    report.param("check_rule", json!(finer.meta.label));
    report.constant("gram_condition", basis.condition);
    report.check_le("gram defect on finer rule", basis.gram_defect(&finer), th.oracle_tolerance);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rand_vec = || -> Vec<Complex64> {
        (0..rule.len()).map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)).collect()
    };
    let (f, h) = (rand_vec(), rand_vec());
    let bf = basis.apply(&rule, &f)?;
    let bbf = basis.apply(&rule, &bf)?;
    let scale = bf.iter().map(|x| x.norm()).fold(0.0, f64::max);
    let idem = bf.iter().zip(&bbf).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max) / scale;
    report.check_le("idempotence", idem, th.oracle_tolerance);
    let bh = basis.apply(&rule, &h)?;
    let lhs = crate::operators::inner(&rule.weights, &bf, &h);
    let rhs = crate::operators::inner(&rule.weights, &f, &bh);
    report.check_le("self-adjointness", (lhs - rhs).norm() / lhs.norm().max(rhs.norm()), th.oracle_tolerance);
    // closed-form agreement where the degree-cap truncation (|w||z|)^(cap+1) is below 1e-9
    let radius = 0.7f64.min(10f64.powf(-9.0 / (2 * degree_cap + 2) as f64));
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let mut w = random_direction::<f64>(&mut rng, dim);
        let mut z = random_direction::<f64>(&mut rng, dim);
        let (sw, sz) = (radius * rng.gen::<f64>(), radius * rng.gen::<f64>());
        w.iter_mut().for_each(|x| *x *= sw);
        z.iter_mut().for_each(|x| *x *= sz);
        let want = ball_kernel(dim, &w, &z);
        worst = worst.max((basis.kernel(&w, &z) - want).norm() / want.norm());
    }
    report.constant("kernel_relative_error", worst);
    report.check_le(format!("kernel vs closed form (|w|,|z| <= {radius:.3})"), worst, th.oracle_kernel);
    // convergence rate at w = z = point_modulus·e₁
    let mut w: Point = (0..dim).map(|_| Complex64::new(0.0, 0.0)).collect();
    w[0] = Complex64::new(point_modulus, 0.0);
    let exact = ball_kernel(dim, &w, &w);
    let (lo, hi) = slope_caps;
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for cap in lo..=hi.min(degree_cap) {
        let err = (basis.kernel_to_degree(&w, &w, cap) - exact).norm() / exact.norm();
        report.row(vec![cap as f64, err]);
        xs.push(cap as f64);
        ys.push(err.ln());
    }
    let slope = fit_slope(&xs, &ys);
    let target = (point_modulus * point_modulus).ln();
    report.constant("decay_slope", slope);
    report.constant("log_wz", target);
    report.check_le("decay slope vs log(|w||z|)", ((slope - target) / target).abs(), th.oracle_slope);
    Ok(report)
}

/// Disc and ball grids used by the reproduction criterion.
pub fn disc_reproducing_setup(seed: u64) -> Result<(Context, QuadratureRule, Vec<Point>)> {
    let ctx = KernelContext::global(make_ball::<f64>(1)?)?;
    let rule = crate::quadrature::volume_rule(&ctx.domain, 100, 0.5, seed)?;
    let targets = interior_targets(&ctx.domain, 25, 0.7, seed ^ 0x77);
    Ok((ctx, rule, targets))
}

/// Ball n = 2 Monte Carlo setup: `count` jittered nodes and targets with
/// |z| ∈ [lo, hi]. Each |z_j|² stays within [¼, ¾] of |z|², so monomials
/// in both variables are bounded away from zero at every target and the
/// pointwise relative error is well conditioned.
pub fn ball2_monte_carlo_setup(
    count: usize,
    targets: usize,
    lo: f64,
    hi: f64,
    seed: u64,
) -> Result<(Context, QuadratureRule, Vec<Point>)> {
    let ctx = KernelContext::global(make_ball::<f64>(2)?)?;
    let rule = monte_carlo_rule(&ctx.domain, count, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x99);
    let pts = (0..targets)
        .map(|_| {
            let r = lo + (hi - lo) * rng.gen::<f64>();
            let u = 0.25 + 0.5 * rng.gen::<f64>();
            let (t1, t2) = (2.0 * PI * rng.gen::<f64>(), 2.0 * PI * rng.gen::<f64>());
            vec![Complex64::from_polar(r * u.sqrt(), t1), Complex64::from_polar(r * (1.0 - u).sqrt(), t2)]
                .into_iter()
                .collect()
        })
        .collect();
    Ok((ctx, rule, pts))
}

/// Sphere surface rule and interior targets for the boundary formula.
pub fn sphere_boundary_setup(resolution: usize, targets: usize, seed: u64) -> Result<(Context, QuadratureRule, Vec<Point>)> {
    let ctx = KernelContext::global(make_ball::<f64>(2)?)?;
    let rule = surface_rule(&ctx.domain, resolution)?;
    Ok((ctx.clone(), rule, interior_targets(&ctx.domain, targets, 0.6, seed)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::make_c2_perturbed_ball;
    use crate::levi::{calibrate_constants, ContextOptions};

    fn perturbed_ctx(dim: usize, delta: f64) -> Context {
        let d = make_c2_perturbed_ball(dim, delta).unwrap();
        let cal = calibrate_constants(&d, 1000, 0).unwrap();
        KernelContext::new(d, &cal, &ContextOptions { mu_override: Some(0.8), ..Default::default() }).unwrap()
    }

    #[test]
    fn report_checks_and_serialization() {
        let mut r = ValidationReport::new("x", "ball1", 3, 7, &["a", "b"]);
        r.check_le("small", 0.5, 1.0);
        assert!(r.passed);
        r.check_in("band", 4.0, 1.5, 3.0);
        r.check_le("nan", f64::NAN, 1.0);
        assert!(!r.passed);
        assert_eq!(r.checks.iter().filter(|c| c.passed).count(), 1);
        r.row(vec![1.0, 2.0]);
        let dir = std::env::temp_dir().join(format!("cfk-report-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("r.csv");
        r.write_csv(&path).unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "a,b\n1e0,2e0\n");
        assert!(r.to_json().unwrap().contains("\"passed\": false"));
        assert!(r.summary().starts_with("[FAIL] x"));
        std::fs::remove_dir_all(dir).unwrap();
    }

    #[test]
    fn thresholds_round_trip_with_overrides() {
        let t: Thresholds = serde_json::from_str("{\"schur_band\": 0.5}").unwrap();
        assert_eq!(t.schur_band, 0.5);
        assert_eq!(t.version, THRESHOLDS_VERSION);
        assert!(serde_json::from_str::<Thresholds>("{\"nope\": 1}").is_err());
    }

    #[test]
    fn slope_and_spread_helpers() {
        assert!((fit_slope(&[0.0, 1.0, 2.0], &[1.0, 3.0, 5.0]) - 2.0).abs() < 1e-14);
        assert!((relative_spread(&[2.0, 3.0]) - 0.5).abs() < 1e-15);
        assert!((ball_schur_at_origin(1, 0.5) - 2.0 * PI).abs() < 1e-12);
        assert!((disc_schur_exact(0.5, 0.0) - 2.0 * PI).abs() < 1e-12);
        // exact values along the ray |z| = 1 − d, frozen from the hypergeometric closed form
        let product = |a: f64, d: f64| {
            let x = (1.0 - d) * (1.0 - d);
            disc_schur_exact(a, x) * (1.0 - x).powf(a)
        };
        assert!((product(0.25, 1e-1) - 6.5313502477876035).abs() < 1e-9);
        assert!((product(0.25, 1e-3) - 11.317302754489239).abs() < 1e-9);
        assert!((product(0.75, 1e-2) - 13.803547668056892).abs() < 1e-9);
    }

    #[test]
    fn ball_size_estimate_is_exact_and_stable() {
        let ctx = KernelContext::global(make_ball::<f64>(2).unwrap()).unwrap();
        let r = validate_size_estimate(&ctx, &[0.1, 0.05], 500, 3, &Thresholds::default()).unwrap();
        assert!(r.passed, "{}", r.summary());
        assert!(r.constants["C2"] - 1.0 < 1e-12);
        assert!(r.constants["C'_eps0.1"] - 1.0 < 1e-12);
        let again = validate_size_estimate(&ctx, &[0.1, 0.05], 500, 3, &Thresholds::default()).unwrap();
        assert_eq!(again, r);
    }

    #[test]
    fn ball_symmetry_and_defect_baselines() {
        let ctx = KernelContext::global(make_ball::<f64>(1).unwrap()).unwrap();
        let r = validate_conjugate_symmetry(&ctx, &[0.1, 0.05], 200, 1, &Thresholds::default()).unwrap();
        assert!(r.passed, "{}", r.summary());
        let opts = DefectOptions { modulus_samples: 100, ..Default::default() };
        let d = validate_defect_decay(&ctx, &[0.1, 0.05], &opts, &Thresholds::default()).unwrap();
        assert!(d.passed, "{}", d.summary());
    }

    #[test]
    fn density_rejects_bad_inputs() {
        let ctx = KernelContext::global(make_ball::<f64>(1).unwrap()).unwrap();
        let th = Thresholds::default();
        let f = DensityFunction::BoundaryPower { beta: 1.0 };
        assert!(matches!(
            density_experiment(&ctx, f, &[4], 2.0, &DensityOptions::default(), &th),
            Err(Error::NotInLp(_))
        ));
        let local = perturbed_ctx(1, 0.2);
        assert!(density_experiment(&local, DensityFunction::Constant, &[4], 2.0, &DensityOptions::default(), &th).is_err());
    }

    #[test]
    fn density_of_constant_converges() {
        let ctx = KernelContext::global(make_ball::<f64>(1).unwrap()).unwrap();
        let opts = DensityOptions { target_resolution: 16, source_nodes_per_n: 8, min_source_resolution: 64, radial_panels: 2, shells: 6 };
        let r = density_experiment(&ctx, DensityFunction::Constant, &[2, 4], 2.0, &opts, &Thresholds::default()).unwrap();
        // B¹(𝟙_{D_{1/n}}) ≡ 1 − 1/n, so the error is ‖1‖₂/n on the target rule
        // (up to angular aliasing of order (|z|√(1 − 1/n))^64)
        let unit = r.constants["f_norm"];
        assert!((unit - PI.sqrt()).abs() < 1e-2);
        for (n, e) in [(2.0, r.constants["error_n2"]), (4.0, r.constants["error_n4"])] {
            assert!((e * n / unit - 1.0).abs() < 1e-3, "{e} {unit} {n}");
        }
    }

    #[test]
    fn k0_law_on_ellipsoid_is_exact() {
        let ctx = KernelContext::global(crate::domain::make_ellipsoid::<f64>(&[1.0, 2.0]).unwrap()).unwrap();
        let r = validate_k0_law(&ctx, 20, 5, &Thresholds::default()).unwrap();
        assert!(r.passed, "{}", r.summary());
        assert!(r.constants["C_eps"] < 1e-8);
    }

    #[test]
    fn k0_law_on_perturbed_ball() {
        let ctx = perturbed_ctx(2, 0.2);
        let r = validate_k0_law(&ctx, 50, 5, &Thresholds::default()).unwrap();
        assert!(r.passed, "{}", r.summary());
        assert!(r.constants["C_eps"] > 1e-4);
    }
}
