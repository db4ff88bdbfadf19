//! Integral operators discretized on quadrature grids: Γ and Γ_ε, B¹_ε, the
//! near/far truncation D^r + E^r, the defect A_ε = D^r − (D^r)*, and norm
//! estimators. Also the Schur-test integrals and the rescaled model integral.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::beta::beta;
use statrs::function::gamma::gamma;

use crate::domain::{standard_normal, DomainSpec};
use crate::error::{Error, Result};
use crate::kernel::{k0_leading, kernel_b1, kernel_parts};
use crate::levi::{g, g_eps, scalar_modulus, KernelContext};
use crate::linalg::{norm_sqr, sub};
use crate::quadrature::{
    gauss_legendre, graded_weighted_integrals, pairwise_sum, volume_rule_with, GradedOptions, Point, QuadratureRule,
    VolumeOptions,
};

type Context = KernelContext<f64>;
type Domain = DomainSpec<f64>;

/// Output points of an operator, with optional quadrature weights defining
/// the L^p norm on the target side.
#[derive(Clone, Debug)]
pub struct Targets {
    pub points: Vec<Point>,
    pub rho: Vec<f64>,
    pub weights: Option<Vec<f64>>,
}

impl Targets {
    pub fn from_rule(rule: &QuadratureRule) -> Self {
        Self { points: rule.nodes.clone(), rho: rule.rho.clone(), weights: Some(rule.weights.clone()) }
    }

    pub fn from_points(domain: &Domain, points: Vec<Point>) -> Self {
        let rho = points.iter().map(|p| domain.rho(p)).collect();
        Self { points, rho, weights: None }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Volume rule with the same layout as `opts` but angles shifted by half a
/// step, so that no target coincides with a source node.
pub fn staggered_rule(domain: &Domain, opts: &VolumeOptions) -> Result<QuadratureRule> {
    volume_rule_with(domain, &VolumeOptions { angular_offset: opts.angular_offset + 0.5, ..opts.clone() })
}

/// Seeded interior points t·R(ζ)·ζ with t ≤ `max_fraction`.
pub fn interior_targets(domain: &Domain, count: usize, max_fraction: f64, seed: u64) -> Vec<Point> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let zeta = crate::domain::random_direction::<f64>(&mut rng, domain.dim());
            let t = max_fraction * rng.gen::<f64>().powf(1.0 / (2 * domain.dim()) as f64);
            let r = domain.radial_extent(&zeta);
            zeta.iter().map(|x| x * (t * r)).collect()
        })
        .collect()
}

/// Dense targets × nodes matrix of kernel values with source weights folded in:
/// (T f)(z_i) ≈ Σ_j M_ij f(w_j).
#[derive(Clone, Debug)]
pub struct DiscreteOperator {
    pub label: String,
    pub rows: usize,
    pub cols: usize,
    pub matrix: Vec<Complex64>,
    pub targets: Targets,
    pub sources: Vec<Point>,
    pub source_rho: Vec<f64>,
    pub source_weights: Vec<f64>,
}

impl DiscreteOperator {
    /// Operator from an explicit matrix (weights already folded in).
    pub fn from_matrix(
        label: &str,
        rows: usize,
        cols: usize,
        matrix: Vec<Complex64>,
        target_weights: Option<Vec<f64>>,
        source_weights: Vec<f64>,
    ) -> Result<Self> {
        if matrix.len() != rows * cols || source_weights.len() != cols {
            return Err(Error::InvalidParameter("matrix shape does not match weights".into()));
        }
        if let Some(tw) = &target_weights {
            if tw.len() != rows {
                return Err(Error::InvalidParameter("target weights do not match rows".into()));
            }
        }
        Ok(Self {
            label: label.to_string(),
            rows,
            cols,
            matrix,
            targets: Targets { points: Vec::new(), rho: vec![0.0; rows], weights: target_weights },
            sources: Vec::new(),
            source_rho: vec![0.0; cols],
            source_weights,
        })
    }

    pub fn entry(&self, i: usize, j: usize) -> Complex64 {
        self.matrix[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[Complex64] {
        &self.matrix[i * self.cols..(i + 1) * self.cols]
    }

    pub fn apply(&self, f: &[Complex64]) -> Vec<Complex64> {
        (0..self.rows)
            .into_par_iter()
            .map(|i| {
                let terms: Vec<Complex64> = self.row(i).iter().zip(f).map(|(m, x)| m * x).collect();
                pairwise_sum(&terms)
            })
            .collect()
    }

    /// Kernel values K(w_j, z_i) without the source weight.
    pub fn kernel_value(&self, i: usize, j: usize) -> Complex64 {
        self.entry(i, j) / self.source_weights[j]
    }

    fn target_weights(&self) -> Result<&[f64]> {
        self.targets
            .weights
            .as_deref()
            .ok_or_else(|| Error::InvalidParameter(format!("operator {} has no target weights", self.label)))
    }

    /// Adjoint for the weighted pairings Σ v f ḡ (targets) and Σ w f ḡ (sources):
    /// T*_{ji} = conj(M_ij) v_i / w_j.
    pub fn adjoint(&self) -> Result<DiscreteOperator> {
        let v = self.target_weights()?.to_vec();
        let mut m = vec![Complex64::new(0.0, 0.0); self.rows * self.cols];
        for i in 0..self.rows {
            for j in 0..self.cols {
                m[j * self.rows + i] = self.entry(i, j).conj() * v[i] / self.source_weights[j];
            }
        }
        Ok(DiscreteOperator {
            label: format!("{}*", self.label),
            rows: self.cols,
            cols: self.rows,
            matrix: m,
            targets: Targets {
                points: self.sources.clone(),
                rho: self.source_rho.clone(),
                weights: Some(self.source_weights.clone()),
            },
            sources: self.targets.points.clone(),
            source_rho: self.targets.rho.clone(),
            source_weights: v,
        })
    }

    fn map_entries(&self, label: String, f: impl Fn(usize, usize, Complex64) -> Complex64) -> DiscreteOperator {
        let mut out = self.clone();
        out.label = label;
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.matrix[i * self.cols + j] = f(i, j, self.entry(i, j));
            }
        }
        out
    }

    pub fn minus(&self, other: &DiscreteOperator) -> Result<DiscreteOperator> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::InvalidParameter("operator shapes differ".into()));
        }
        Ok(self.map_entries(format!("{}-{}", self.label, other.label), |i, j, m| m - other.entry(i, j)))
    }

    pub fn max_abs(&self) -> f64 {
        self.matrix.iter().map(|x| x.norm()).fold(0.0, f64::max)
    }
}

/// Weighted inner product Σ w f ḡ.
pub fn inner(weights: &[f64], f: &[Complex64], g: &[Complex64]) -> Complex64 {
    let terms: Vec<Complex64> = weights.iter().zip(f).zip(g).map(|((w, a), b)| a * b.conj() * *w).collect();
    pairwise_sum(&terms)
}

/// Weighted L^p norm (Σ w |f|^p)^{1/p}.
pub fn lp_norm(weights: &[f64], f: &[Complex64], p: f64) -> f64 {
    let terms: Vec<f64> = weights.iter().zip(f).map(|(w, x)| w * x.norm().powf(p)).collect();
    crate::quadrature::pairwise_sum_real(&terms).powf(1.0 / p)
}

/// Assemble M_ij = K(w_j, z_i)·wt_j. With `drop_diagonal`, a square grid
/// (targets = nodes) gets M_ii = 0.
pub fn assemble<K>(label: &str, rule: &QuadratureRule, targets: &Targets, drop_diagonal: bool, kernel: K) -> Result<DiscreteOperator>
where
    K: Fn(&[Complex64], &[Complex64]) -> Result<Complex64> + Sync,
{
    let (rows, cols) = (targets.len(), rule.len());
    if drop_diagonal && rows != cols {
        return Err(Error::InvalidParameter("diagonal removal needs targets = nodes".into()));
    }
    let row_results: Vec<Result<Vec<Complex64>>> = (0..rows)
        .into_par_iter()
        .map(|i| {
            let z = &targets.points[i];
            (0..cols)
                .map(|j| {
                    if drop_diagonal && i == j {
                        return Ok(Complex64::new(0.0, 0.0));
                    }
                    kernel(&rule.nodes[j], z)
                        .map(|k| k * rule.weights[j])
                        .map_err(|e| Error::AtNode { node: j, source: Box::new(e) })
                })
                .collect()
        })
        .collect();
    let mut matrix = Vec::with_capacity(rows * cols);
    for r in row_results {
        matrix.extend(r?);
    }
    Ok(DiscreteOperator {
        label: label.to_string(),
        rows,
        cols,
        matrix,
        targets: targets.clone(),
        sources: rule.nodes.clone(),
        source_rho: rule.rho.clone(),
        source_weights: rule.weights.clone(),
    })
}

/// Γ (or Γ_ε) with kernel |g(w, z)|^{−n−1}.
pub fn gamma_operator(ctx: &Context, rule: &QuadratureRule, targets: &Targets, use_eps: bool) -> Result<DiscreteOperator> {
    let n1 = ctx.dim() as i32 + 1;
    let label = if use_eps { "gamma_eps" } else { "gamma" };
    assemble(label, rule, targets, false, |w, z| {
        let gv = if use_eps { g_eps(ctx, w, z) } else { g(ctx, w, z) };
        let m = gv.norm();
        if !(m > 0.0) {
            return Err(Error::SingularKernel { magnitude: m });
        }
        Ok(Complex64::new(m.powi(-n1), 0.0))
    })
}

/// B¹_ε with kernel b¹_ε(w, z).
pub fn b1_operator(ctx: &Context, rule: &QuadratureRule, targets: &Targets) -> Result<DiscreteOperator> {
    assemble("b1", rule, targets, false, |w, z| Ok(kernel_b1(ctx, w, z)?.value))
}

/// B¹_ε on a square grid (targets = nodes, diagonal removed).
pub fn b1_square(ctx: &Context, rule: &QuadratureRule) -> Result<DiscreteOperator> {
    assemble("b1", rule, &Targets::from_rule(rule), true, |w, z| Ok(kernel_b1(ctx, w, z)?.value))
}

/// (B¹_ε f)(z_i) for a large rule without materializing the matrix.
pub fn apply_b1_streaming<F>(ctx: &Context, rule: &QuadratureRule, targets: &[Point], f: F) -> Result<Vec<Complex64>>
where
    F: Fn(&[Complex64]) -> Complex64 + Sync,
{
    let fv: Vec<Complex64> = rule.nodes.par_iter().map(|w| f(w)).collect();
    targets
        .iter()
        .map(|z| {
            let terms: Vec<Result<Complex64>> = (0..rule.len())
                .into_par_iter()
                .map(|j| Ok(kernel_b1(ctx, &rule.nodes[j], z)?.value * fv[j] * rule.weights[j]))
                .collect();
            let mut vals = Vec::with_capacity(terms.len());
            for (node, t) in terms.into_iter().enumerate() {
                vals.push(t.map_err(|e| Error::AtNode { node, source: Box::new(e) })?);
            }
            Ok(pairwise_sum(&vals))
        })
        .collect()
}

/// Entrywise modulus of the kernel, weights preserved.
pub fn abs_operator(op: &DiscreteOperator) -> DiscreteOperator {
    op.map_entries(format!("|{}|", op.label), |_, _, m| Complex64::new(m.norm(), 0.0))
}

/// Near-diagonal cutoff φ_r(w, z) = φ((|ρ(z)| + |ρ(w)| + |z − w|)/r) with the
/// piecewise-linear profile φ = 1 on [0, ½], 2(1 − t) on [½, 1], 0 beyond.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruncationProfile {
    pub r: f64,
}

impl TruncationProfile {
    pub fn new(r: f64) -> Result<Self> {
        if !(r > 0.0) {
            return Err(Error::InvalidParameter(format!("truncation radius must be > 0, got {r}")));
        }
        Ok(Self { r })
    }

    pub fn phi(t: f64) -> f64 {
        if t <= 0.5 {
            1.0
        } else if t >= 1.0 {
            0.0
        } else {
            2.0 * (1.0 - t)
        }
    }

    pub fn weight(&self, w: &[Complex64], rho_w: f64, z: &[Complex64], rho_z: f64) -> f64 {
        let dist = norm_sqr(&sub(w, z)).sqrt();
        Self::phi((rho_z.abs() + rho_w.abs() + dist) / self.r)
    }
}

/// Split an assembled operator into D^r = φ_r·T and E^r = T − D^r.
pub fn truncate(op: &DiscreteOperator, profile: &TruncationProfile) -> Result<(DiscreteOperator, DiscreteOperator)> {
    if op.sources.len() != op.cols || op.targets.points.len() != op.rows {
        return Err(Error::InvalidParameter("truncation needs an operator with point data".into()));
    }
    let d = op.map_entries(format!("D_r({})", op.label), |i, j, m| {
        m * profile.weight(&op.sources[j], op.source_rho[j], &op.targets.points[i], op.targets.rho[i])
    });
    let e = op.map_entries(format!("E_r({})", op.label), |i, j, m| m - d.entry(i, j));
    Ok((d, e))
}

/// A = D^r − (D^r)* on a square grid.
pub fn defect_a_eps(op: &DiscreteOperator, profile: &TruncationProfile) -> Result<DiscreteOperator> {
    if op.rows != op.cols {
        return Err(Error::InvalidParameter("defect needs a square grid".into()));
    }
    let (d, _) = truncate(op, profile)?;
    let mut a = d.minus(&d.adjoint()?)?;
    a.label = format!("A({})", op.label);
    Ok(a)
}

/// Measured ingredients of r = min(δ_ε, δ′_ε, ε/A_ε).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RadiusChoice {
    pub r: f64,
    pub delta_eps: f64,
    pub delta_prime_eps: f64,
    /// Empirical slope of |b¹_ε g_ε^{n+1} − K₀| against |w − z|.
    pub a_eps: f64,
    pub samples: usize,
    pub seed: u64,
}

/// Sampled slope of the remainder N_ε − K₀ near the diagonal.
pub fn remainder_slope(ctx: &Context, samples: usize, radius: f64, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut slope = 0.0f64;
    for _ in 0..samples {
        let w = ctx.domain.sample_point(&mut rng, 0.5);
        let z = ctx.domain.sample_near(&mut rng, &w, radius);
        if !ctx.domain.contains(&z) {
            continue;
        }
        match kernel_parts(ctx, &w, &z) {
            Ok(p) if p.distance > 0.0 => {
                // the −ρ(w)·det L part of N(w, w) is not a distance term
                let levi = ctx.domain.hess_mixed(&w).det().re * crate::scalar::ball_constant::<f64>(ctx.dim());
                let excess = (p.remainder - ctx.domain.rho(&w).abs() * levi.abs()).max(0.0);
                slope = slope.max(excess / p.distance);
            }
            Ok(_) | Err(Error::SingularKernel { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(slope)
}

/// r = min(δ_ε, δ′_ε, ε/A_ε) with δ′_ε from the sampled modulus of K₀.
pub fn select_radius(ctx: &Context, delta_eps: f64, deltas: &[f64], samples: usize, seed: u64) -> Result<RadiusChoice> {
    let eps = ctx.epsilon;
    if !(eps > 0.0) {
        return Err(Error::InvalidParameter("radius selection needs epsilon > 0".into()));
    }
    let k0 = scalar_modulus(&ctx.domain, |w| k0_leading(ctx, w), deltas, samples, seed)?;
    let delta_prime = crate::levi::delta_for_epsilon(&k0, eps)?;
    let a_eps = remainder_slope(ctx, samples, delta_eps.min(0.5), seed ^ 0x5bd1_e995)?;
    let by_slope = if a_eps > 0.0 { eps / a_eps } else { f64::INFINITY };
    Ok(RadiusChoice { r: delta_eps.min(delta_prime).min(by_slope), delta_eps, delta_prime_eps: delta_prime, a_eps, samples, seed })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NormEstimate {
    pub p: f64,
    pub value: f64,
    /// True when the value is a best-found ratio rather than a converged estimate.
    pub lower_bound: bool,
    pub iterations: usize,
    pub method: String,
}

fn random_vector(rng: &mut ChaCha8Rng, n: usize) -> Vec<Complex64> {
    (0..n).map(|_| Complex64::new(standard_normal(rng), standard_normal(rng))).collect()
}

/// Power iteration on T*T for the L²(w) → L²(v) norm: at most 20 steps, or
/// until the estimate stagnates to a relative 10⁻⁶.
fn power_iteration(
    apply: impl Fn(&[Complex64]) -> Vec<Complex64>,
    adjoint: impl Fn(&[Complex64]) -> Vec<Complex64>,
    w: &[f64],
    v: &[f64],
    mut x: Vec<Complex64>,
) -> NormEstimate {
    let mut est = 0.0;
    let mut iterations = 0;
    for it in 0..20 {
        let nx = lp_norm(w, &x, 2.0);
        if nx == 0.0 {
            break;
        }
        x.iter_mut().for_each(|e| *e /= nx);
        let y = apply(&x);
        let next = lp_norm(v, &y, 2.0);
        iterations = it + 1;
        let done = (next - est).abs() <= 1e-6 * next;
        est = next;
        if done {
            break;
        }
        x = adjoint(&y);
    }
    NormEstimate { p: 2.0, value: est, lower_bound: false, iterations, method: "power_iteration".into() }
}

/// Operator-norm estimate on L^p. For p = 2: power iteration on T*T (at most
/// 20 steps or 10⁻⁶ stagnation). Otherwise the best ratio ‖Tf‖_p/‖f‖_p over
/// random, rough, oscillatory and localized test vectors refined by a
/// dual-map power method; always a lower bound.
pub fn estimate_norm(op: &DiscreteOperator, p: f64, trials: usize, seed: u64) -> Result<NormEstimate> {
    if !(p > 1.0 && p.is_finite()) || trials == 0 {
        return Err(Error::InvalidParameter(format!("norm estimate needs p in (1, inf) and trials >= 1 (p = {p})")));
    }
    let v = op.target_weights()?.to_vec();
    let w = op.source_weights.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    if (p - 2.0).abs() < 1e-12 {
        let adj = op.adjoint()?;
        let x = random_vector(&mut rng, op.cols);
        return Ok(power_iteration(|x| op.apply(x), |y| adj.apply(y), &w, &v, x));
    }
    let q = p / (p - 1.0);
    let ratio = |x: &[Complex64]| -> f64 {
        let nx = lp_norm(&w, x, p);
        if nx == 0.0 {
            0.0
        } else {
            lp_norm(&v, &op.apply(x), p) / nx
        }
    };
    let mut candidates: Vec<Vec<Complex64>> = vec![vec![Complex64::new(1.0, 0.0); op.cols]];
    for t in 0..trials {
        candidates.push(random_vector(&mut rng, op.cols));
        candidates.push((0..op.cols).map(|_| Complex64::new(if rng.gen::<bool>() { 1.0 } else { -1.0 }, 0.0)).collect());
        let freq = (t + 1) as f64;
        candidates.push((0..op.cols).map(|j| Complex64::from_polar(1.0, freq * j as f64 * 0.618_034 * 2.0 * PI)).collect());
        // localized near the boundary: the nodes with smallest |ρ|
        let mut idx: Vec<usize> = (0..op.cols).collect();
        idx.sort_by(|&a, &b| op.source_rho[a].abs().total_cmp(&op.source_rho[b].abs()));
        let keep = (op.cols >> (t % 6 + 1)).max(1);
        let mut loc = vec![Complex64::new(0.0, 0.0); op.cols];
        for &j in idx.iter().take(keep) {
            loc[j] = Complex64::new(1.0, 0.0);
        }
        candidates.push(loc);
    }
    let mut best = (0.0, candidates[0].clone());
    for c in candidates {
        let r = ratio(&c);
        if r > best.0 {
            best = (r, c);
        }
    }
    // dual-map power method in the weight-scaled ℓ^p picture
    let adj_plain = |y: &[Complex64]| -> Vec<Complex64> {
        (0..op.cols)
            .map(|j| {
                let terms: Vec<Complex64> = (0..op.rows).map(|i| op.entry(i, j).conj() * y[i]).collect();
                pairwise_sum(&terms)
            })
            .collect()
    };
    let mut x = best.1.clone();
    let mut iterations = 0;
    for it in 0..30 {
        let y = op.apply(&x);
        // dual of Tx in L^p(v): v |y|^{p−2} y
        let dual: Vec<Complex64> = y
            .iter()
            .zip(&v)
            .map(|(yi, vi)| if yi.norm() == 0.0 { *yi } else { yi * (vi * yi.norm().powf(p - 2.0)) })
            .collect();
        let z = adj_plain(&dual);
        // L^q(w)-dual back to L^p(w): x ∝ |z/w|^{q−2} z/w
        let next: Vec<Complex64> = z
            .iter()
            .zip(&w)
            .map(|(zj, wj)| {
                let s = zj / *wj;
                if s.norm() == 0.0 {
                    s
                } else {
                    s * s.norm().powf(q - 2.0)
                }
            })
            .collect();
        iterations = it + 1;
        let r = ratio(&next);
        if r > best.0 * (1.0 + 1e-9) {
            best = (r, next.clone());
            x = next;
        } else {
            break;
        }
    }
    Ok(NormEstimate { p, value: best.0, lower_bound: true, iterations, method: "test_vectors+dual_power".into() })
}

/// Operator on a square grid stored in compressed rows; used for operators
/// supported near the diagonal, where dense storage would not fit.
#[derive(Clone, Debug)]
pub struct SparseOperator {
    pub label: String,
    pub size: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<u32>,
    pub values: Vec<Complex64>,
    pub weights: Vec<f64>,
}

impl SparseOperator {
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn apply(&self, f: &[Complex64]) -> Vec<Complex64> {
        (0..self.size)
            .into_par_iter()
            .map(|i| {
                let range = self.row_ptr[i]..self.row_ptr[i + 1];
                let terms: Vec<Complex64> =
                    range.map(|k| self.values[k] * f[self.col_idx[k] as usize]).collect();
                pairwise_sum(&terms)
            })
            .collect()
    }

    /// Adjoint in L²(weights): (T*g)_j = Σ_i conj(T_ij) w_i g_i / w_j.
    pub fn apply_adjoint(&self, g: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); self.size];
        for i in 0..self.size {
            let gi = g[i] * self.weights[i];
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                out[self.col_idx[k] as usize] += self.values[k].conj() * gi;
            }
        }
        out.iter_mut().zip(&self.weights).for_each(|(o, w)| *o /= *w);
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|x| x.norm()).fold(0.0, f64::max)
    }

    /// Power-iteration L² norm estimate.
    pub fn norm2(&self, seed: u64) -> NormEstimate {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random_vector(&mut rng, self.size);
        power_iteration(|x| self.apply(x), |y| self.apply_adjoint(y), &self.weights, &self.weights, x)
    }
}

/// For each node i, the nodes j ≠ i with |ρ_i| + |ρ_j| + |x_i − x_j| < r
/// (the support of the cutoff φ_r), found through a uniform cell hash.
pub fn cutoff_neighbors(points: &[Point], rho: &[f64], r: f64) -> Vec<Vec<u32>> {
    use std::collections::HashMap;
    let key = |p: &Point| -> Vec<i64> {
        p.iter().flat_map(|c| [(c.re / r).floor() as i64, (c.im / r).floor() as i64]).collect()
    };
    let mut cells: HashMap<Vec<i64>, Vec<u32>> = HashMap::new();
    for (i, p) in points.iter().enumerate() {
        if rho[i].abs() < r {
            cells.entry(key(p)).or_default().push(i as u32);
        }
    }
    let dims = points.first().map_or(0, |p| 2 * p.len());
    let offsets: Vec<Vec<i64>> = (0..3usize.pow(dims as u32))
        .map(|mut code| {
            (0..dims)
                .map(|_| {
                    let o = (code % 3) as i64 - 1;
                    code /= 3;
                    o
                })
                .collect()
        })
        .collect();
    points
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            if rho[i].abs() >= r {
                return Vec::new();
            }
            let base = key(p);
            let mut out = Vec::new();
            for off in &offsets {
                let cell: Vec<i64> = base.iter().zip(off).map(|(b, o)| b + o).collect();
                if let Some(members) = cells.get(&cell) {
                    for &j in members {
                        let j_us = j as usize;
                        if j_us == i {
                            continue;
                        }
                        let dist = norm_sqr(&sub(&points[j_us], p)).sqrt();
                        if rho[i].abs() + rho[j_us].abs() + dist < r {
                            out.push(j);
                        }
                    }
                }
            }
            out.sort_unstable();
            out
        })
        .collect()
}

/// A = D^r − (D^r)* for B¹_ε, assembled only on the support of φ_r:
/// A_ij = wt_j φ_ij (b¹(x_j, x_i) − conj b¹(x_i, x_j)).
pub fn defect_sparse(ctx: &Context, rule: &QuadratureRule, profile: &TruncationProfile) -> Result<SparseOperator> {
    let neighbors = cutoff_neighbors(&rule.nodes, &rule.rho, profile.r);
    let n = rule.len();
    // each unordered pair once: d_ij = b¹(x_j, x_i) − conj b¹(x_i, x_j) for i < j
    let upper: Vec<Result<Vec<(u32, Complex64)>>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let xi = &rule.nodes[i];
            neighbors[i]
                .iter()
                .filter(|&&j| j as usize > i)
                .map(|&j| {
                    let xj = &rule.nodes[j as usize];
                    let phi = profile.weight(xj, rule.rho[j as usize], xi, rule.rho[i]);
                    let fwd = kernel_b1(ctx, xj, xi)?.value;
                    let back = kernel_b1(ctx, xi, xj)?.value;
                    Ok((j, (fwd - back.conj()) * phi))
                })
                .collect::<Result<Vec<_>>>()
                .map_err(|e| Error::AtNode { node: i, source: Box::new(e) })
        })
        .collect();
    let mut rows: Vec<Vec<(u32, Complex64)>> = vec![Vec::new(); n];
    for (i, r) in upper.into_iter().enumerate() {
        for (j, d) in r? {
            rows[i].push((j, d * rule.weights[j as usize]));
            rows[j as usize].push((i as u32, -d.conj() * rule.weights[i]));
        }
    }
    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut col_idx = Vec::new();
    let mut values = Vec::new();
    row_ptr.push(0);
    for mut row in rows {
        row.sort_unstable_by_key(|e| e.0);
        for (j, v) in row {
            col_idx.push(j);
            values.push(v);
        }
        row_ptr.push(col_idx.len());
    }
    Ok(SparseOperator { label: "A(b1)".into(), size: n, row_ptr, col_idx, values, weights: rule.weights.clone() })
}

/// ∫_D |g(w, z)|^{−n−1} |ρ(w)|^{−α} dV(w) for several α at once.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SchurValue {
    pub alpha: f64,
    pub value: f64,
    /// The same integral with Gauss order reduced by two.
    pub coarse: f64,
    pub rho_z: f64,
}

/// Which argument of g carries the integration variable.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchurSlot {
    /// ∫ |g(w, z)|^{−n−1} … dV(w)
    W,
    /// ∫ |g(z, w)|^{−n−1} … dV(w)
    Z,
}

pub fn schur_integrals(ctx: &Context, opts: &GradedOptions, z: &[Complex64], alphas: &[f64], slot: SchurSlot) -> Result<Vec<SchurValue>> {
    if let Some(a) = alphas.iter().find(|a| !(**a > 0.0 && **a < 1.0)) {
        return Err(Error::InvalidParameter(format!("Schur exponent must satisfy 0 < alpha < 1, got {a}")));
    }
    if !ctx.domain.contains(z) {
        return Err(Error::InvalidParameter("Schur target must lie in D".into()));
    }
    let n1 = ctx.dim() as i32 + 1;
    let f = |w: &[Complex64]| {
        let gv = match slot {
            SchurSlot::W => g(ctx, w, z),
            SchurSlot::Z => g(ctx, z, w),
        };
        gv.norm().powi(-n1)
    };
    let fine = graded_weighted_integrals(&ctx.domain, z, alphas, opts, f)?;
    let coarse_opts = GradedOptions { order: opts.order.saturating_sub(2).max(2), ..opts.clone() };
    let coarse = graded_weighted_integrals(&ctx.domain, z, alphas, &coarse_opts, f)?;
    let rho_z = ctx.domain.rho(z);
    let mut out = Vec::with_capacity(alphas.len());
    for ((&alpha, &v), &c) in alphas.iter().zip(&fine).zip(&coarse) {
        if !v.is_finite() || (v - c).abs() > 0.05 * v.abs() {
            return Err(Error::NonIntegrable(format!("alpha = {alpha}: fine {v:e} vs coarse {c:e}")));
        }
        out.push(SchurValue { alpha, value: v, coarse: c, rho_z });
    }
    Ok(out)
}

pub fn schur_integral(ctx: &Context, opts: &GradedOptions, z: &[Complex64], alpha: f64) -> Result<SchurValue> {
    Ok(schur_integrals(ctx, opts, z, &[alpha], SchurSlot::W)?.remove(0))
}

/// Two evaluations of ∫ s^{−α}(1 + s + |u| + |x′|²)^{−(n+1)} over ℝ⁺ × ℝ × ℂ^{n−1}.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ModelIntegral {
    pub n: usize,
    pub alpha: f64,
    /// Direct quadrature over growing boxes, extrapolated in the cutoff.
    pub direct: f64,
    /// c_α times the remaining (u, x′) integral.
    pub reduced: f64,
    pub c_alpha: f64,
    /// The remaining (u, x′) integral, by quadrature.
    pub remaining: f64,
    pub relative_difference: f64,
    /// c_α is at (or numerically indistinguishable from) the Beta pole.
    pub divergent: bool,
}

/// Nodes for ∫₀^L with panels [0,1], [1,2], [2,4], …; `singular` absorbs x^{−a} on [0,1].
fn half_line_nodes(cutoff: f64, order: usize, singular: Option<f64>) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    match singular {
        Some(a) => {
            let pw = 1.0 / (1.0 - a);
            for (y, wy) in gauss_legendre(order, 0.0, 1.0) {
                // x = y^{1/(1−a)}: x^{−a} dx = dy/(1−a); return weight so that Σ w f(x) x^{−a}
                let x = y.powf(pw);
                out.push((x, wy / (1.0 - a) * x.powf(a)));
            }
        }
        None => out.extend(gauss_legendre(order, 0.0, 1.0)),
    }
    let mut lo = 1.0;
    while lo < cutoff {
        let hi = (2.0 * lo).min(cutoff);
        out.extend(gauss_legendre(order, lo, hi));
        lo = hi;
    }
    out
}

fn direct_box(n: usize, alpha: f64, cutoff: f64, order: usize) -> f64 {
    let s_nodes = half_line_nodes(cutoff, order, Some(alpha));
    let u_nodes = half_line_nodes(cutoff, order, None);
    let k = (n + 1) as i32;
    let per_s: Vec<f64> = s_nodes
        .par_iter()
        .map(|&(s, ws)| {
            let base = ws * s.powf(-alpha);
            let mut acc = 0.0;
            for &(u, wu) in &u_nodes {
                if n == 1 {
                    acc += 2.0 * wu * (1.0 + s + u).powi(-k);
                } else {
                    // x′ ∈ ℂ^{n−1} in polar form: dV = π^{m}/Γ(m) t^{m−1} dt with t = |x′|²
                    let m = (n - 1) as i32;
                    let c = PI.powi(m) / gamma(m as f64);
                    for &(t, wt) in &u_nodes {
                        acc += 2.0 * wu * wt * c * t.powi(m - 1) * (1.0 + s + u + t).powi(-k);
                    }
                }
            }
            base * acc
        })
        .collect();
    crate::quadrature::pairwise_sum_real(&per_s)
}

/// Cross-checked evaluation of the rescaled model integral.
pub fn rescaled_model_integral(n: usize, alpha: f64, cutoff: f64) -> Result<ModelIntegral> {
    if n == 0 || !(cutoff > 1.0) {
        return Err(Error::InvalidParameter(format!("model integral needs n >= 1 and cutoff > 1 (n = {n}, cutoff = {cutoff})")));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Ok(ModelIntegral {
            n,
            alpha,
            direct: f64::INFINITY,
            reduced: f64::INFINITY,
            c_alpha: f64::INFINITY,
            remaining: f64::INFINITY,
            relative_difference: f64::NAN,
            divergent: true,
        });
    }
    let order = 12;
    // tails of the truncated box decay like L^{−α} with O(L^{−1−α}) corrections
    let i1 = direct_box(n, alpha, cutoff, order);
    let i2 = direct_box(n, alpha, 2.0 * cutoff, order);
    let f = 2f64.powf(alpha);
    let direct = (f * i2 - i1) / (f - 1.0);

    let c_alpha = beta(1.0 - alpha, n as f64 + alpha);
    // remaining ∫_ℝ ∫_{ℂ^{n−1}} (1 + |u| + |x′|²)^{−n−α}, the x′ part in closed
    // polar form and the u integral on the half line mapped to [0, 1)
    let m = (n - 1) as f64;
    let xprime = |y: f64| -> f64 {
        if n == 1 {
            y.powf(-(n as f64) - alpha)
        } else {
            PI.powf(m) * gamma(1.0 + alpha) / gamma(n as f64 + alpha) * y.powf(-1.0 - alpha)
        }
    };
    // u = v^{−1/α} − 1 sends (1+u)^{−1−α} du to dv/α on v ∈ (0, 1]
    let remaining: f64 = gauss_legendre(40, 0.0, 1.0)
        .into_iter()
        .map(|(v, wv)| {
            let y = v.powf(-1.0 / alpha);
            2.0 * wv / alpha * xprime(y) * y.powf(1.0 + alpha)
        })
        .sum();
    let reduced = c_alpha * remaining;
    let divergent = !c_alpha.is_finite() || c_alpha > 1e6;
    Ok(ModelIntegral {
        n,
        alpha,
        direct,
        reduced,
        c_alpha,
        remaining,
        relative_difference: (direct - reduced).abs() / reduced.abs(),
        divergent,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::make_ball;
    use crate::quadrature::volume_rule_with;
    use proptest::prelude::*;

    fn disc_ctx() -> Context {
        KernelContext::global(make_ball(1).unwrap()).unwrap()
    }

    fn small_rule(res: usize) -> QuadratureRule {
        volume_rule_with(&make_ball(1).unwrap(), &VolumeOptions { shells: 6, ..VolumeOptions::with_resolution(res) }).unwrap()
    }

    #[test]
    fn identity_and_rank_one_norms() {
        let n = 6;
        let mut id = vec![Complex64::new(0.0, 0.0); n * n];
        for i in 0..n {
            id[i * n + i] = Complex64::new(1.0, 0.0);
        }
        let w = vec![1.0; n];
        let op = DiscreteOperator::from_matrix("I", n, n, id, Some(w.clone()), w.clone()).unwrap();
        for p in [4.0 / 3.0, 2.0, 4.0] {
            assert!((estimate_norm(&op, p, 3, 1).unwrap().value - 1.0).abs() < 1e-9, "p={p}");
        }
        let u: Vec<f64> = (0..n).map(|i| i as f64 + 1.0).collect();
        let un = u.iter().map(|x| x * x).sum::<f64>().sqrt();
        let v: Vec<f64> = (0..n).map(|i| (i * 7 % 5) as f64 - 2.0).collect();
        let vn = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let m: Vec<Complex64> = (0..n * n).map(|k| Complex64::new(u[k / n] * v[k % n] / (un * vn), 0.0)).collect();
        let r1 = DiscreteOperator::from_matrix("uv*", n, n, m, Some(w.clone()), w).unwrap();
        assert!((estimate_norm(&r1, 2.0, 1, 4).unwrap().value - 1.0).abs() < 1e-6);
        assert!(estimate_norm(&r1, 1.0, 1, 4).is_err());
    }

    #[test]
    fn adjoint_matches_weighted_pairing() {
        let ctx = disc_ctx();
        let rule = small_rule(8);
        let targets = Targets::from_rule(&staggered_rule(&ctx.domain, &VolumeOptions { shells: 6, ..VolumeOptions::with_resolution(8) }).unwrap());
        let op = b1_operator(&ctx, &rule, &targets).unwrap();
        let adj = op.adjoint().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let f = random_vector(&mut rng, op.cols);
        let gv = random_vector(&mut rng, op.rows);
        let lhs = inner(targets.weights.as_ref().unwrap(), &op.apply(&f), &gv);
        let rhs = inner(&rule.weights, &f, &adj.apply(&gv));
        assert!((lhs - rhs).norm() <= 1e-12 * lhs.norm().max(1.0));
        // apply(1) is the row integral of the kernel
        let ones = vec![Complex64::new(1.0, 0.0); op.cols];
        let row0: Complex64 = (0..op.cols).map(|j| op.kernel_value(0, j) * rule.weights[j]).sum();
        assert!((op.apply(&ones)[0] - row0).norm() < 1e-10 * row0.norm());
    }

    #[test]
    fn gamma_at_origin_is_area() {
        let ctx = disc_ctx();
        let rule = small_rule(32);
        let t = Targets::from_points(&ctx.domain, vec![[Complex64::new(0.0, 0.0)].into_iter().collect()]);
        let op = gamma_operator(&ctx, &rule, &t, false).unwrap();
        let v = op.apply(&vec![Complex64::new(1.0, 0.0); op.cols])[0];
        assert!((v.re - PI).abs() < 1e-12);
        let abs = abs_operator(&op);
        assert_eq!(abs.matrix, op.matrix);
    }

    #[test]
    fn b1_reproduces_monomials_on_disc() {
        let ctx = disc_ctx();
        let rule = crate::quadrature::volume_rule(&ctx.domain, 100, 0.5, 0).unwrap();
        let targets = Targets::from_points(&ctx.domain, interior_targets(&ctx.domain, 25, 0.7, 3));
        let op = b1_operator(&ctx, &rule, &targets).unwrap();
        for k in 0..=6 {
            let f: Vec<Complex64> = rule.nodes.iter().map(|w| w[0].powu(k)).collect();
            let out = op.apply(&f);
            for (z, o) in targets.points.iter().zip(&out) {
                let want = z[0].powu(k);
                assert!((o - want).norm() <= 1e-4 * want.norm().max(1e-300) + 1e-13, "k={k}");
            }
        }
    }

    #[test]
    fn truncation_partition_and_saturation() {
        let ctx = disc_ctx();
        let rule = small_rule(8);
        let op = b1_square(&ctx, &rule).unwrap();
        let (d, e) = truncate(&op, &TruncationProfile::new(0.3).unwrap()).unwrap();
        for k in 0..op.matrix.len() {
            let s = d.matrix[k] + e.matrix[k];
            assert!((s - op.matrix[k]).norm() <= 1e-15 * op.matrix[k].norm().max(1e-300));
        }
        // r ≥ 2(2 sup|ρ| + diam) saturates the profile
        let (d, e) = truncate(&op, &TruncationProfile::new(2.0 * (2.0 + 2.0)).unwrap()).unwrap();
        assert_eq!(d.matrix, op.matrix);
        assert!(e.max_abs() == 0.0);
        let (d, _) = truncate(&op, &TruncationProfile::new(1e-12).unwrap()).unwrap();
        assert_eq!(d.max_abs(), 0.0);
        assert!(TruncationProfile::new(0.0).is_err());
    }

    #[test]
    fn far_part_shrinks_as_r_grows() {
        let ctx = disc_ctx();
        let rule = small_rule(12);
        let op = b1_square(&ctx, &rule).unwrap();
        let mut prev = f64::INFINITY;
        for r in [0.05, 0.2, 0.8, 3.2] {
            let (_, e) = truncate(&op, &TruncationProfile::new(r).unwrap()).unwrap();
            let m = (0..e.rows)
                .flat_map(|i| (0..e.cols).map(move |j| (i, j)))
                .map(|(i, j)| e.kernel_value(i, j).norm())
                .fold(0.0, f64::max);
            assert!(m.is_finite() && m <= prev);
            prev = m;
        }
    }

    #[test]
    fn ball_defect_vanishes() {
        let ctx = disc_ctx();
        let op = b1_square(&ctx, &small_rule(12)).unwrap();
        let a = defect_a_eps(&op, &TruncationProfile::new(0.2).unwrap()).unwrap();
        assert!(estimate_norm(&a, 2.0, 1, 0).unwrap().value <= 1e-10);
    }

    #[test]
    fn abs_dominates_pointwise() {
        let ctx = disc_ctx();
        let rule = small_rule(8);
        let op = b1_square(&ctx, &rule).unwrap();
        let abs = abs_operator(&op);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let f: Vec<Complex64> = (0..op.cols).map(|_| Complex64::new(rand::Rng::gen::<f64>(&mut rng), 0.0)).collect();
        let (a, b) = (abs.apply(&f), op.apply(&f));
        assert!(a.iter().zip(&b).all(|(x, y)| x.re + 1e-12 >= y.norm()));
    }

    #[test]
    fn schur_closed_form_at_origin() {
        let ctx = disc_ctx();
        let o: Point = [Complex64::new(0.0, 0.0)].into_iter().collect();
        let v = schur_integral(&ctx, &GradedOptions::default(), &o, 0.5).unwrap();
        assert!((v.value - 2.0 * PI).abs() / (2.0 * PI) < 1e-6);
        assert!(schur_integral(&ctx, &GradedOptions::default(), &o, 1.0).is_err());
        let big = schur_integral(&ctx, &GradedOptions::default(), &o, 0.99).unwrap();
        assert!((big.value - 100.0 * PI).abs() / (100.0 * PI) < 1e-3);
    }

    #[test]
    fn schur_bounded_along_ray() {
        let ctx = disc_ctx();
        let mut products = Vec::new();
        for d in [1e-1, 1e-2, 1e-3] {
            let z: Point = [Complex64::new(1.0 - d, 0.0)].into_iter().collect();
            let v = schur_integral(&ctx, &GradedOptions::default(), &z, 0.5).unwrap();
            products.push(v.value * v.rho_z.abs().sqrt());
        }
        let (lo, hi) = products.iter().fold((f64::INFINITY, 0.0f64), |(a, b), x| (a.min(*x), b.max(*x)));
        assert!(hi / lo < 1.3, "{products:?}");
    }

    #[test]
    fn model_integral_pipelines_agree() {
        let m = rescaled_model_integral(1, 0.5, 1e4).unwrap();
        assert!((m.c_alpha - PI / 2.0).abs() < 1e-12);
        assert!((m.remaining - 4.0).abs() < 1e-8);
        assert!(m.relative_difference < 1e-2, "{m:?}");
        let m2 = rescaled_model_integral(2, 0.25, 1e3).unwrap();
        assert!((m2.remaining - 2.0 * PI / (0.25 * 1.25)).abs() < 1e-6);
        assert!(m2.relative_difference < 1e-2, "{m2:?}");
        assert!(rescaled_model_integral(1, 0.999_999_9, 1e3).unwrap().divergent);
        assert!(rescaled_model_integral(1, 1.0, 1e3).unwrap().divergent);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn phi_is_symmetric_and_bounded(re in -0.7f64..0.7, im in -0.7f64..0.7, re2 in -0.7f64..0.7, im2 in -0.7f64..0.7, r in 0.01f64..3.0) {
            let d = make_ball::<f64>(1).unwrap();
            let w: Point = [Complex64::new(re, im)].into_iter().collect();
            let z: Point = [Complex64::new(re2, im2)].into_iter().collect();
            let p = TruncationProfile::new(r).unwrap();
            let a = p.weight(&w, d.rho(&w), &z, d.rho(&z));
            let b = p.weight(&z, d.rho(&z), &w, d.rho(&w));
            prop_assert_eq!(a, b);
            prop_assert!((0.0..=1.0).contains(&a));
        }
    }

    #[test]
    fn sparse_defect_matches_dense() {
        let d = crate::domain::make_c2_perturbed_ball(1, 0.3).unwrap();
        let cal = crate::levi::calibrate_constants(&d, 1000, 0).unwrap();
        let ctx = KernelContext::new(d.clone(), &cal, &crate::levi::ContextOptions { epsilon: 0.05, ..Default::default() }).unwrap();
        let rule = volume_rule_with(&d, &VolumeOptions { shells: 4, ..VolumeOptions::with_resolution(10) }).unwrap();
        let profile = TruncationProfile::new(0.5).unwrap();
        let dense = defect_a_eps(&b1_square(&ctx, &rule).unwrap(), &profile).unwrap();
        let sparse = defect_sparse(&ctx, &rule, &profile).unwrap();
        let scale = dense.max_abs();
        for i in 0..rule.len() {
            let mut row = vec![Complex64::new(0.0, 0.0); rule.len()];
            for k in sparse.row_ptr[i]..sparse.row_ptr[i + 1] {
                row[sparse.col_idx[k] as usize] = sparse.values[k];
            }
            for (j, v) in row.iter().enumerate() {
                assert!((v - dense.entry(i, j)).norm() <= 1e-12 * scale, "({i},{j})");
            }
        }
        let a = sparse.norm2(3).value;
        let b = estimate_norm(&dense, 2.0, 1, 3).unwrap().value;
        assert!((a - b).abs() <= 1e-9 * b && a > 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let f = random_vector(&mut rng, rule.len());
        let adj = dense.adjoint().unwrap().apply(&f);
        let sadj = sparse.apply_adjoint(&f);
        assert!(adj.iter().zip(&sadj).all(|(x, y)| (x - y).norm() <= 1e-9 * scale));
    }

    #[test]
    fn ball_sparse_defect_is_roundoff() {
        let d = make_ball(1).unwrap();
        let ctx = disc_ctx();
        let opts = crate::quadrature::BandOptions { gap_max: 0.05, shells: 6, shell_order: 3, q: 0.5, angular: 200, angular_offset: 0.0 };
        let rule = crate::quadrature::band_rule(&d, &opts).unwrap();
        let a = defect_sparse(&ctx, &rule, &TruncationProfile::new(0.1).unwrap()).unwrap();
        assert!(a.nnz() > 0);
        assert!(a.norm2(0).value <= 1e-10);
    }
}
