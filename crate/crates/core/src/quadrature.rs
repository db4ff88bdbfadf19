//! Volume and surface quadrature over the star-shaped model domains.
//!
//! Every model domain is written as w = t·R(ζ)·ζ with ζ on the unit sphere
//! S^{2n−1} and t ∈ [0, 1], so dV = R^{2n} t^{2n−1} dt dσ(ζ). Radial nodes are
//! laid out in the boundary-gap variable 1 − t: a few interior panels followed
//! by geometric shells [r₀q^{k+1}, r₀q^k] that resolve boundary-concentrated
//! integrands. Sphere coordinates are
//!
//! * n = 1: ζ = e^{iθ}, dσ = dθ;
//! * n = 2: ζ = (√u e^{iθ₁}, √(1−u) e^{iθ₂}), dσ = ½ du dθ₁ dθ₂;
//! * n = 3: ζ_j = √u_j e^{iθ_j} with (u₁, u₂, u₃) on the simplex,
//!   dσ = ¼ (1 − a) da db dθ₁dθ₂dθ₃ for u₁ = a, u₂ = (1 − a) b.
//!
//! Surface areas are therefore 2π, 2π² and π³ for the unit spheres.

use std::f64::consts::PI;
use std::num::NonZeroUsize;
use std::path::Path;

use gauss_quad::GaussLegendre;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{DomainSpec, ModelKind};
use crate::error::{Error, Result};
use crate::linalg::CVec;

pub type Point = CVec<f64>;
type Domain = DomainSpec<f64>;

/// Gauss–Legendre nodes and weights on [a, b].
pub fn gauss_legendre(order: usize, a: f64, b: f64) -> Vec<(f64, f64)> {
    map_panel(&reference_rule(order), a, b)
}

fn reference_rule(order: usize) -> Vec<(f64, f64)> {
    let rule = GaussLegendre::new(NonZeroUsize::new(order.max(1)).expect("order >= 1"));
    let mut pairs = rule.as_node_weight_pairs().to_vec();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs
}

fn map_panel(reference: &[(f64, f64)], a: f64, b: f64) -> Vec<(f64, f64)> {
    let (mid, half) = ((a + b) * 0.5, (b - a) * 0.5);
    reference.iter().map(|&(x, w)| (mid + half * x, half * w)).collect()
}

/// Pairwise summation in a fixed order, independent of thread scheduling.
pub fn pairwise_sum(values: &[Complex64]) -> Complex64 {
    if values.len() <= 32 {
        values.iter().sum()
    } else {
        let (l, r) = values.split_at(values.len() / 2);
        pairwise_sum(l) + pairwise_sum(r)
    }
}

pub fn pairwise_sum_real(values: &[f64]) -> f64 {
    if values.len() <= 32 {
        values.iter().sum()
    } else {
        let (l, r) = values.split_at(values.len() / 2);
        pairwise_sum_real(l) + pairwise_sum_real(r)
    }
}

/// Area of the unit sphere S^{2n−1} ⊂ ℂⁿ.
pub fn sphere_area(dim: usize) -> f64 {
    2.0 * PI.powi(dim as i32) / crate::scalar::factorial::<f64>(dim - 1)
}

/// Volume of the unit ball of ℂⁿ.
pub fn ball_volume(dim: usize) -> f64 {
    PI.powi(dim as i32) / crate::scalar::factorial::<f64>(dim)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleKind {
    Volume,
    Surface,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct RuleMeta {
    /// Boundary-gap values separating radial panels, descending.
    pub strata: Vec<f64>,
    pub seed: u64,
    /// Largest Gauss–Legendre order used.
    pub order: usize,
    pub resolution: usize,
    pub label: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VolumeOptions {
    /// Trapezoid points per angle; Gauss order in the modulus coordinates is half of it.
    pub angular: usize,
    /// Equal panels covering the interior gap range [r₀, 1].
    pub radial_panels: usize,
    pub radial_order: usize,
    /// Number of geometric boundary shells.
    pub shells: usize,
    pub shell_order: usize,
    pub r0: f64,
    pub q: f64,
    /// Fraction of an angular step by which all angles are shifted (staggering).
    pub angular_offset: f64,
    pub seed: u64,
}

impl Default for VolumeOptions {
    fn default() -> Self {
        Self::with_resolution(64)
    }
}

impl VolumeOptions {
    pub fn with_resolution(resolution: usize) -> Self {
        Self {
            angular: resolution,
            radial_panels: (resolution / 25).max(1),
            radial_order: 8,
            shells: 17,
            shell_order: 4,
            r0: 0.1,
            q: 0.5,
            angular_offset: 0.0,
            seed: 0,
        }
    }

    fn validate(&self, dim: usize) -> Result<()> {
        let min_angular = if dim == 1 { 3 } else { 2 };
        if self.angular < min_angular {
            return Err(Error::InvalidParameter(format!(
                "angular resolution {} below minimum {min_angular}",
                self.angular
            )));
        }
        if self.radial_panels == 0 || self.radial_order == 0 || self.shell_order == 0 {
            return Err(Error::InvalidParameter("radial panels and orders must be positive".into()));
        }
        if !(self.r0 > 0.0 && self.r0 < 1.0) || !(self.q > 0.0 && self.q < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "stratification needs 0 < r0, q < 1 (r0 = {}, q = {})",
                self.r0, self.q
            )));
        }
        Ok(())
    }

    fn coarsened(&self) -> Self {
        Self {
            angular: (self.angular / 2).max(if self.angular > 3 { 3 } else { self.angular }),
            radial_panels: (self.radial_panels / 2).max(1),
            radial_order: (self.radial_order / 2).max(1),
            shell_order: (self.shell_order / 2).max(1),
            ..self.clone()
        }
    }
}

#[derive(Clone, Debug)]
enum Recipe {
    Volume(Domain, VolumeOptions),
    Surface(Domain, usize),
    MonteCarlo(Domain, usize, u64),
    Tensor(Domain, usize, usize),
    Band(Domain, BandOptions),
}

#[derive(Clone, Debug)]
pub struct QuadratureRule {
    pub kind: RuleKind,
    pub dim: usize,
    pub nodes: Vec<Point>,
    pub weights: Vec<f64>,
    /// ρ at each node, evaluated along the ray for full relative accuracy.
    pub rho: Vec<f64>,
    /// Outward unit normals (real coordinates) for surface rules; empty otherwise.
    pub normals: Vec<Vec<f64>>,
    pub meta: RuleMeta,
    recipe: Recipe,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        pairwise_sum_real(&self.weights)
    }

    /// The same construction at roughly half the resolution.
    pub fn coarsened(&self) -> Result<QuadratureRule> {
        match &self.recipe {
            Recipe::Volume(d, o) => volume_rule_with(d, &o.coarsened()),
            Recipe::Surface(d, r) => surface_rule(d, (r / 2).max(3)),
            Recipe::MonteCarlo(d, c, s) => monte_carlo_rule(d, (c / 2).max(1), *s),
            Recipe::Tensor(d, a, o) => tensor_rule(d, (a / 2).max(2), (o / 2).max(1)),
            Recipe::Band(d, o) => band_rule(d, &BandOptions { angular: (o.angular / 2).max(3), ..o.clone() }),
        }
    }

    /// Write nodes, weights and ρ values as CSV.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut wtr = csv::Writer::from_path(path)?;
        let mut header = vec!["index".to_string(), "weight".into(), "rho".into()];
        for j in 1..=self.dim {
            header.push(format!("x{j}"));
            header.push(format!("y{j}"));
        }
        wtr.write_record(&header)?;
        for (i, node) in self.nodes.iter().enumerate() {
            let mut rec = vec![i.to_string(), format!("{:e}", self.weights[i]), format!("{:e}", self.rho[i])];
            for c in node {
                rec.push(format!("{:e}", c.re));
                rec.push(format!("{:e}", c.im));
            }
            wtr.write_record(&rec)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

#[derive(Clone, Debug)]
struct Direction {
    zeta: Point,
    weight: f64,
}

fn polar(modulus_sq: f64, angle: f64) -> Complex64 {
    Complex64::from_polar(modulus_sq.max(0.0).sqrt(), angle)
}

fn tensor_directions(dim: usize, angular: usize, offset: f64) -> Result<Vec<Direction>> {
    let step = 2.0 * PI / angular as f64;
    let angles: Vec<f64> = (0..angular).map(|j| (j as f64 + offset) * step).collect();
    let modulus = gauss_legendre((angular / 2).max(1), 0.0, 1.0);
    let mut out = Vec::new();
    match dim {
        1 => {
            for &t in &angles {
                out.push(Direction { zeta: [Complex64::from_polar(1.0, t)].into_iter().collect(), weight: step });
            }
        }
        2 => {
            for &(u, wu) in &modulus {
                for &t1 in &angles {
                    for &t2 in &angles {
                        out.push(Direction {
                            zeta: [polar(u, t1), polar(1.0 - u, t2)].into_iter().collect(),
                            weight: 0.5 * wu * step * step,
                        });
                    }
                }
            }
        }
        3 => {
            for &(a, wa) in &modulus {
                for &(b, wb) in &modulus {
                    let (u1, u2) = (a, (1.0 - a) * b);
                    let u3 = (1.0 - a) * (1.0 - b);
                    for &t1 in &angles {
                        for &t2 in &angles {
                            for &t3 in &angles {
                                out.push(Direction {
                                    zeta: [polar(u1, t1), polar(u2, t2), polar(u3, t3)].into_iter().collect(),
                                    weight: 0.25 * (1.0 - a) * wa * wb * step.powi(3),
                                });
                            }
                        }
                    }
                }
            }
        }
        n => return Err(Error::UnsupportedDomain(format!("sphere rule in dimension {n}"))),
    }
    Ok(out)
}

/// Uniformly distributed directions on S⁵, stratified in the first angle.
fn sampled_directions(dim: usize, count: usize, seed: u64) -> Result<Vec<Direction>> {
    if dim != 3 {
        return Err(Error::UnsupportedDomain(format!("sampled sphere rule in dimension {dim}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let weight = sphere_area(3) / count as f64;
    Ok((0..count)
        .map(|i| {
            let (mut s1, mut s2): (f64, f64) = (rng.gen(), rng.gen());
            if s1 > s2 {
                std::mem::swap(&mut s1, &mut s2);
            }
            let t1 = 2.0 * PI * (i as f64 + rng.gen::<f64>()) / count as f64;
            let t2 = 2.0 * PI * rng.gen::<f64>();
            let t3 = 2.0 * PI * rng.gen::<f64>();
            Direction {
                zeta: [polar(s1, t1), polar(s2 - s1, t2), polar(1.0 - s2, t3)].into_iter().collect(),
                weight,
            }
        })
        .collect())
}

/// Radial nodes in the gap variable 1 − t with weights for d(1 − t).
fn radial_nodes(o: &VolumeOptions) -> (Vec<(f64, f64)>, Vec<f64>) {
    let mut nodes = Vec::new();
    let mut strata = vec![1.0];
    let interior = reference_rule(o.radial_order);
    let width = (1.0 - o.r0) / o.radial_panels as f64;
    for p in 0..o.radial_panels {
        let hi = 1.0 - p as f64 * width;
        let lo = if p + 1 == o.radial_panels { o.r0 } else { hi - width };
        nodes.extend(map_panel(&interior, lo, hi));
        strata.push(lo);
    }
    let shell = reference_rule(o.shell_order);
    let mut hi = o.r0;
    for _ in 0..o.shells {
        let lo = hi * o.q;
        nodes.extend(map_panel(&shell, lo, hi));
        strata.push(lo);
        hi = lo;
    }
    nodes.extend(map_panel(&shell, 0.0, hi));
    strata.push(0.0);
    (nodes, strata)
}

fn assemble_volume(domain: &Domain, dirs: &[Direction], radial: &[(f64, f64)]) -> (Vec<Point>, Vec<f64>, Vec<f64>) {
    let n = domain.dim() as i32;
    let per_dir: Vec<(Vec<Point>, Vec<f64>, Vec<f64>)> = dirs
        .par_iter()
        .map(|d| {
            let r = domain.radial_extent(&d.zeta);
            let scale = d.weight * r.powi(2 * n);
            let mut pts = Vec::with_capacity(radial.len());
            let mut wts = Vec::with_capacity(radial.len());
            let mut rhos = Vec::with_capacity(radial.len());
            for &(gap, wg) in radial {
                let t = 1.0 - gap;
                pts.push(d.zeta.iter().map(|x| x * (t * r)).collect());
                wts.push(scale * t.powi(2 * n - 1) * wg);
                rhos.push(domain.rho_on_ray(&d.zeta, r, gap));
            }
            (pts, wts, rhos)
        })
        .collect();
    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    let mut rho = Vec::new();
    for (p, w, r) in per_dir {
        nodes.extend(p);
        weights.extend(w);
        rho.extend(r);
    }
    (nodes, weights, rho)
}

/// Boundary-stratified volume rule at a given resolution and shell ratio.
pub fn volume_rule(domain: &Domain, resolution: usize, ratio: f64, seed: u64) -> Result<QuadratureRule> {
    let opts = VolumeOptions { q: ratio, seed, ..VolumeOptions::with_resolution(resolution) };
    volume_rule_with(domain, &opts)
}

pub fn volume_rule_with(domain: &Domain, opts: &VolumeOptions) -> Result<QuadratureRule> {
    let n = domain.dim();
    opts.validate(n)?;
    let dirs = match n {
        1 | 2 => tensor_directions(n, opts.angular, opts.angular_offset)?,
        3 => sampled_directions(3, opts.angular.pow(3), opts.seed)?,
        _ => return Err(Error::UnsupportedDomain(format!("volume rule for {}", domain.name()))),
    };
    let (radial, strata) = radial_nodes(opts);
    let (nodes, weights, rho) = assemble_volume(domain, &dirs, &radial);
    if let Some(i) = rho.iter().position(|r| !(*r < 0.0)) {
        return Err(Error::InvalidParameter(format!("volume node {i} not interior (rho = {:e})", rho[i])));
    }
    Ok(QuadratureRule {
        kind: RuleKind::Volume,
        dim: n,
        nodes,
        weights,
        rho,
        normals: Vec::new(),
        meta: RuleMeta {
            strata,
            seed: opts.seed,
            order: opts.radial_order.max(opts.shell_order).max(opts.angular / 2),
            resolution: opts.angular,
            label: format!("volume:{}:{}", domain.name(), opts.angular),
        },
        recipe: Recipe::Volume(domain.clone(), opts.clone()),
    })
}

/// Layout of a rule restricted to the boundary band 0 < 1 − t ≤ `gap_max`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BandOptions {
    pub gap_max: f64,
    /// Geometric shells [gap_max q^{k+1}, gap_max q^k]; a final panel covers [0, gap_max q^shells].
    pub shells: usize,
    pub shell_order: usize,
    pub q: f64,
    pub angular: usize,
    pub angular_offset: f64,
}

/// Volume rule for the band {w : 1 − gap_max < |w|/R(w/|w|) < 1}, used for
/// operators supported near bD. Its resolution is independent of the interior.
pub fn band_rule(domain: &Domain, opts: &BandOptions) -> Result<QuadratureRule> {
    let n = domain.dim();
    if !(opts.gap_max > 0.0 && opts.gap_max < 1.0) || !(opts.q > 0.0 && opts.q < 1.0) || opts.shell_order == 0 {
        return Err(Error::InvalidParameter(format!(
            "band rule needs 0 < gap_max, q < 1 and a positive order (gap_max = {}, q = {})",
            opts.gap_max, opts.q
        )));
    }
    if opts.angular < 3 {
        return Err(Error::InvalidParameter(format!("angular resolution {} below minimum 3", opts.angular)));
    }
    let dirs = match n {
        1 | 2 => tensor_directions(n, opts.angular, opts.angular_offset)?,
        _ => return Err(Error::UnsupportedDomain(format!("band rule for {}", domain.name()))),
    };
    let shell = reference_rule(opts.shell_order);
    let mut radial = Vec::new();
    let mut strata = vec![opts.gap_max];
    let mut hi = opts.gap_max;
    for _ in 0..opts.shells {
        let lo = hi * opts.q;
        radial.extend(map_panel(&shell, lo, hi));
        strata.push(lo);
        hi = lo;
    }
    radial.extend(map_panel(&shell, 0.0, hi));
    strata.push(0.0);
    let (nodes, weights, rho) = assemble_volume(domain, &dirs, &radial);
    Ok(QuadratureRule {
        kind: RuleKind::Volume,
        dim: n,
        nodes,
        weights,
        rho,
        normals: Vec::new(),
        meta: RuleMeta {
            strata,
            seed: 0,
            order: opts.shell_order,
            resolution: opts.angular,
            label: format!("band:{}:{}:{:e}", domain.name(), opts.angular, opts.gap_max),
        },
        recipe: Recipe::Band(domain.clone(), opts.clone()),
    })
}

/// Single-panel tensor rule, exact for polynomials in (w, w̄) of degree below
/// the angular resolution and 2·radial_order − 2n. Ball and ellipsoid only.
pub fn tensor_rule(domain: &Domain, angular: usize, radial_order: usize) -> Result<QuadratureRule> {
    let n = domain.dim();
    let axes: Vec<f64> = match domain.kind() {
        ModelKind::Ball => vec![1.0; n],
        ModelKind::Ellipsoid { axes } => axes.clone(),
        ModelKind::PerturbedBall { .. } => {
            return Err(Error::UnsupportedDomain(format!("exact tensor rule for {}", domain.name())))
        }
    };
    let dirs = tensor_directions(n, angular, 0.0)?;
    let radial = gauss_legendre(radial_order, 0.0, 1.0);
    let jac: f64 = axes.iter().map(|a| a * a).product();
    let mut nodes = Vec::with_capacity(dirs.len() * radial.len());
    let mut weights = Vec::with_capacity(nodes.capacity());
    let mut rho = Vec::with_capacity(nodes.capacity());
    for d in &dirs {
        for &(t, wt) in &radial {
            nodes.push(d.zeta.iter().zip(&axes).map(|(x, a)| x * (t * a)).collect());
            weights.push(jac * d.weight * t.powi(2 * n as i32 - 1) * wt);
            rho.push(-(1.0 - t) * (1.0 + t));
        }
    }
    Ok(QuadratureRule {
        kind: RuleKind::Volume,
        dim: n,
        nodes,
        weights,
        rho,
        normals: Vec::new(),
        meta: RuleMeta {
            strata: vec![1.0, 0.0],
            seed: 0,
            order: radial_order,
            resolution: angular,
            label: format!("tensor:{}:{angular}x{radial_order}", domain.name()),
        },
        recipe: Recipe::Tensor(domain.clone(), angular, radial_order),
    })
}

/// Jittered-stratified Monte Carlo volume rule with equal-volume cells in
/// (t^{2n}, angles). The actual node count is rounded to a full cell grid.
pub fn monte_carlo_rule(domain: &Domain, count: usize, seed: u64) -> Result<QuadratureRule> {
    let n = domain.dim();
    if count == 0 {
        return Err(Error::InvalidParameter("Monte Carlo rule needs at least one node".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples: Vec<(Point, f64)> = Vec::new();
    let jitter = |k: usize, m: usize, rng: &mut ChaCha8Rng| (k as f64 + rng.gen::<f64>()) / m as f64;
    match n {
        1 => {
            let m = (count as f64).sqrt().round().max(1.0) as usize;
            for a in 0..m {
                for b in 0..m {
                    let s = jitter(a, m, &mut rng);
                    let th = 2.0 * PI * jitter(b, m, &mut rng);
                    samples.push(([Complex64::from_polar(1.0, th)].into_iter().collect(), s));
                }
            }
        }
        2 => {
            let m = (count as f64).powf(0.25).round().max(1.0) as usize;
            for a in 0..m {
                for b in 0..m {
                    for c in 0..m {
                        for d in 0..m {
                            let s = jitter(a, m, &mut rng);
                            let u = jitter(b, m, &mut rng);
                            let t1 = 2.0 * PI * jitter(c, m, &mut rng);
                            let t2 = 2.0 * PI * jitter(d, m, &mut rng);
                            samples.push(([polar(u, t1), polar(1.0 - u, t2)].into_iter().collect(), s));
                        }
                    }
                }
            }
        }
        3 => {
            let dirs = sampled_directions(3, count, seed ^ 0x9e37_79b9_7f4a_7c15)?;
            for (i, d) in dirs.into_iter().enumerate() {
                samples.push((d.zeta, jitter(i, count, &mut rng)));
            }
            // decorrelate radius from the stratified angle
            let len = samples.len();
            for i in (1..len).rev() {
                let j = rng.gen_range(0..=i);
                let s = samples[i].1;
                samples[i].1 = samples[j].1;
                samples[j].1 = s;
            }
        }
        _ => return Err(Error::UnsupportedDomain(format!("Monte Carlo rule for {}", domain.name()))),
    }
    let total = samples.len();
    let base = ball_volume(n) / total as f64;
    let mut nodes = Vec::with_capacity(total);
    let mut weights = Vec::with_capacity(total);
    let mut rho = Vec::with_capacity(total);
    for (zeta, s) in samples {
        let r = domain.radial_extent(&zeta);
        let t = s.powf(1.0 / (2 * n) as f64);
        nodes.push(zeta.iter().map(|x| x * (t * r)).collect());
        weights.push(base * r.powi(2 * n as i32));
        rho.push(domain.rho_on_ray(&zeta, r, 1.0 - t));
    }
    Ok(QuadratureRule {
        kind: RuleKind::Volume,
        dim: n,
        nodes,
        weights,
        rho,
        normals: Vec::new(),
        meta: RuleMeta {
            strata: Vec::new(),
            seed,
            order: 0,
            resolution: total,
            label: format!("monte_carlo:{}:{total}", domain.name()),
        },
        recipe: Recipe::MonteCarlo(domain.clone(), count, seed),
    })
}

/// Surface rule on bD with weights for (2n − 1)-dimensional measure.
pub fn surface_rule(domain: &Domain, resolution: usize) -> Result<QuadratureRule> {
    let n = domain.dim();
    if resolution < 3 {
        return Err(Error::InvalidParameter(format!("surface resolution {resolution} below 3")));
    }
    let dirs = tensor_directions(n, resolution, 0.0)?;
    let mut nodes = Vec::with_capacity(dirs.len());
    let mut weights = Vec::with_capacity(dirs.len());
    let mut rho = Vec::with_capacity(dirs.len());
    let mut normals = Vec::with_capacity(dirs.len());
    for d in &dirs {
        let r = domain.radial_extent(&d.zeta);
        let w: Point = d.zeta.iter().map(|x| x * r).collect();
        let grad = domain.grad_rho(&w);
        let gn = grad.iter().map(|x| x * x).sum::<f64>().sqrt();
        let normal: Vec<f64> = grad.iter().map(|x| x / gn).collect();
        let cos = d
            .zeta
            .iter()
            .zip(normal.chunks(2))
            .map(|(z, nn)| z.re * nn[0] + z.im * nn[1])
            .sum::<f64>();
        weights.push(d.weight * r.powi(2 * n as i32 - 1) / cos);
        rho.push(domain.rho(&w));
        nodes.push(w);
        normals.push(normal);
    }
    Ok(QuadratureRule {
        kind: RuleKind::Surface,
        dim: n,
        nodes,
        weights,
        rho,
        normals,
        meta: RuleMeta {
            strata: Vec::new(),
            seed: 0,
            order: resolution / 2,
            resolution,
            label: format!("surface:{}:{resolution}", domain.name()),
        },
        recipe: Recipe::Surface(domain.clone(), resolution),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Integral {
    pub value: Complex64,
    /// |I(rule) − I(half-resolution rule)|.
    pub error: f64,
    pub nodes: usize,
}

/// Σ weight·f(node, ρ(node)) with deterministic pairwise summation.
pub fn weighted_sum<F>(rule: &QuadratureRule, f: F) -> Result<Complex64>
where
    F: Fn(&[Complex64], f64) -> Result<Complex64> + Sync,
{
    let values: Vec<Result<Complex64>> = (0..rule.len())
        .into_par_iter()
        .map(|i| f(&rule.nodes[i], rule.rho[i]).map(|v| v * rule.weights[i]))
        .collect();
    let mut terms = Vec::with_capacity(values.len());
    for (node, v) in values.into_iter().enumerate() {
        match v {
            Ok(x) => terms.push(x),
            Err(e) => return Err(Error::AtNode { node, source: Box::new(e) }),
        }
    }
    Ok(pairwise_sum(&terms))
}

/// Integral with a refinement-based error estimate.
pub fn integrate<F>(rule: &QuadratureRule, f: F) -> Result<Integral>
where
    F: Fn(&[Complex64], f64) -> Result<Complex64> + Sync,
{
    let value = weighted_sum(rule, &f)?;
    let coarse = weighted_sum(&rule.coarsened()?, &f)?;
    Ok(Integral { value, error: (value - coarse).norm(), nodes: rule.len() })
}

/// Settings for the target-adapted graded rule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GradedOptions {
    /// Gauss order per panel.
    pub order: usize,
    /// Geometric ratio between consecutive panels.
    pub ratio: f64,
    /// Smallest panel scale relative to the target's boundary gap.
    pub depth: f64,
    /// Trapezoid points in the free azimuth (n = 2).
    pub azimuth: usize,
}

impl Default for GradedOptions {
    fn default() -> Self {
        Self { order: 6, ratio: 0.5, depth: 1e-2, azimuth: 8 }
    }
}

/// Panels on [0, top] refined geometrically toward 0 down to `floor`,
/// followed by the innermost panel [0, floor].
fn graded_panels(top: f64, floor: f64, ratio: f64) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    let mut hi = top;
    while hi * ratio > floor {
        out.push((hi * ratio, hi));
        hi *= ratio;
    }
    out.push((0.0, hi));
    out
}

/// Unitary frame whose first column is the unit vector `e`.
pub fn unitary_frame(e: &[Complex64]) -> Vec<Point> {
    let n = e.len();
    let mut cols: Vec<Point> = vec![e.iter().copied().collect()];
    for k in 0..n {
        if cols.len() == n {
            break;
        }
        let mut v: Point = crate::linalg::zeros(n);
        v[k] = Complex64::new(1.0, 0.0);
        for _ in 0..2 {
            for c in &cols {
                let proj = crate::linalg::hdot(&v, c);
                for (vi, ci) in v.iter_mut().zip(c) {
                    *vi -= proj * ci;
                }
            }
        }
        let norm = crate::linalg::norm_sqr(&v).sqrt();
        if norm > 1e-3 {
            cols.push(v.iter().map(|x| x / norm).collect());
        }
    }
    cols
}

/// ∫_D f(w) |ρ(w)|^{−α} dV(w) for each α in `alphas`, on a rule graded toward
/// the target z in every coordinate where |g(·, z)| is small. The innermost
/// boundary panel absorbs the gap^{−α} factor through the substitution
/// gap = h·y^{1/(1−α)}.
pub fn graded_weighted_integrals<F>(
    domain: &Domain,
    z: &[Complex64],
    alphas: &[f64],
    opts: &GradedOptions,
    f: F,
) -> Result<Vec<f64>>
where
    F: Fn(&[Complex64]) -> f64 + Sync,
{
    let n = domain.dim();
    if n > 2 {
        return Err(Error::UnsupportedDomain(format!("graded rule for {}", domain.name())));
    }
    if let Some(a) = alphas.iter().find(|a| !(**a >= 0.0 && **a < 1.0)) {
        return Err(Error::InvalidParameter(format!("weight exponent must lie in [0, 1), got {a}")));
    }
    let zn = crate::linalg::norm_sqr(z).sqrt();
    let zeta_z: Point = if zn > 0.0 {
        z.iter().map(|x| x / zn).collect()
    } else {
        let mut e = crate::linalg::zeros(n);
        e[0] = Complex64::new(1.0, 0.0);
        e
    };
    let gap_z = (1.0 - zn / domain.radial_extent(&zeta_z)).clamp(0.0, 1.0);
    let floor = (gap_z * opts.depth).max(1e-13);
    let reference = reference_rule(opts.order);
    let graded = |top: f64| -> Vec<(f64, f64)> {
        graded_panels(top, floor, opts.ratio)
            .into_iter()
            .flat_map(|(a, b)| map_panel(&reference, a, b))
            .collect()
    };
    // angle measured from the target direction, both sides
    let half_angles = graded(PI);
    let angles: Vec<(f64, f64)> = half_angles.iter().flat_map(|&(t, w)| [(t, w), (-t, w)]).collect();
    let frame = unitary_frame(&zeta_z);
    let mut dirs: Vec<Direction> = Vec::new();
    match n {
        1 => {
            for &(t, w) in &angles {
                dirs.push(Direction { zeta: [zeta_z[0] * Complex64::from_polar(1.0, t)].into_iter().collect(), weight: w });
            }
        }
        _ => {
            let step = 2.0 * PI / opts.azimuth as f64;
            for &(v, wv) in &graded(1.0) {
                for &(t1, w1) in &angles {
                    for k in 0..opts.azimuth {
                        let t2 = k as f64 * step;
                        let a = polar(1.0 - v, t1);
                        let b = polar(v, t2);
                        let zeta: Point = (0..2).map(|j| frame[0][j] * a + frame[1][j] * b).collect();
                        dirs.push(Direction { zeta, weight: 0.5 * wv * w1 * step });
                    }
                }
            }
        }
    }
    // radial nodes in the gap variable; the panel [0, floor] is handled per α
    let panels = graded_panels(1.0, floor, opts.ratio);
    let inner = panels.last().map(|p| p.1).unwrap_or(floor);
    let main: Vec<(f64, f64)> = panels[..panels.len() - 1]
        .iter()
        .flat_map(|&(a, b)| map_panel(&reference, a, b))
        .collect();
    let tails: Vec<Vec<(f64, f64, f64)>> = alphas
        .iter()
        .map(|&alpha| {
            let p = 1.0 / (1.0 - alpha);
            let c = inner.powf(1.0 - alpha) / (1.0 - alpha);
            map_panel(&reference, 0.0, 1.0)
                .into_iter()
                .map(|(y, wy)| (inner * y.powf(p), c * wy, alpha))
                .collect()
        })
        .collect();
    let two_n = 2 * n as i32;
    let partials: Vec<Vec<f64>> = dirs
        .par_iter()
        .map(|d| {
            let r = domain.radial_extent(&d.zeta);
            let scale = d.weight * r.powi(two_n);
            let point = |gap: f64| -> (Point, f64, f64) {
                let t = 1.0 - gap;
                let w: Point = d.zeta.iter().map(|x| x * (t * r)).collect();
                (w, t.powi(two_n - 1), domain.rho_on_ray(&d.zeta, r, gap).abs())
            };
            let mut acc = vec![0.0; alphas.len()];
            for &(gap, wg) in &main {
                let (w, jac, rho) = point(gap);
                let fv = f(&w) * jac * wg * scale;
                for (a, &alpha) in acc.iter_mut().zip(alphas) {
                    *a += fv * rho.powf(-alpha);
                }
            }
            for (a, tail) in acc.iter_mut().zip(&tails) {
                for &(gap, wy, alpha) in tail {
                    if gap <= 0.0 {
                        continue;
                    }
                    let (w, jac, rho) = point(gap);
                    *a += f(&w) * jac * wy * scale * (gap / rho).powf(alpha);
                }
            }
            acc
        })
        .collect();
    Ok((0..alphas.len())
        .map(|k| pairwise_sum_real(&partials.iter().map(|p| p[k]).collect::<Vec<_>>()))
        .collect())
}

/// Number of evaluations `graded_weighted_integrals` performs per α-free sweep.
pub fn graded_node_count(domain: &Domain, z: &[Complex64], opts: &GradedOptions) -> usize {
    let zn = crate::linalg::norm_sqr(z).sqrt();
    let gap = if zn > 0.0 {
        let zeta: Point = z.iter().map(|x| x / zn).collect();
        1.0 - zn / domain.radial_extent(&zeta)
    } else {
        1.0
    };
    let floor = (gap * opts.depth).max(1e-13);
    let per = |top: f64| graded_panels(top, floor, opts.ratio).len() * opts.order;
    let dirs = if domain.dim() == 1 { 2 * per(PI) } else { per(1.0) * 2 * per(PI) * opts.azimuth };
    dirs * per(1.0)
}
