//! Model domains given by C² defining functions with analytic derivatives.
//!
//! Every shipped domain is star-shaped about the origin, which the quadrature
//! and sampling code rely on through [`DomainSpec::radial_extent`].

use num_complex::Complex;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{creal, CMat, CVec};
use crate::scalar::{compensated_dot, erf, Real};

/// Levi eigenvalues of a perturbed ball must stay inside this band around the
/// ball's identity Levi form.
pub const PERTURBATION_LEVI_BAND: (f64, f64) = (0.5, 2.0);

#[derive(Clone, Debug, PartialEq)]
pub enum ModelKind<T: Real> {
    /// ρ(w) = |w|² − 1.
    Ball,
    /// ρ(w) = Σ |w_j|²/a_j² − 1.
    Ellipsoid { axes: Vec<T> },
    /// ρ(w) = |w|² − 1 + δ |Re w₁|³, C² but not C³ across Re w₁ = 0.
    PerturbedBall { delta: T },
}

/// Axis-aligned box in ℝ^{2n}, coordinates ordered (x₁, y₁, x₂, y₂, …).
#[derive(Clone, Debug, PartialEq)]
pub struct BoundingBox<T> {
    pub lo: Vec<T>,
    pub hi: Vec<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DomainSpec<T: Real> {
    dim: usize,
    kind: ModelKind<T>,
    name: String,
    bounding_box: BoundingBox<T>,
}

/// The Levi matrix ∂²ρ/∂w_j∂w̄_k at a point.
#[derive(Clone, Debug)]
pub struct LeviForm<T: Real> {
    pub matrix: CMat<T>,
    pub point: CVec<T>,
}

impl<T: Real> LeviForm<T> {
    /// L_w(v) = v* L v, real for Hermitian L.
    pub fn eval(&self, v: &[Complex<T>]) -> T {
        self.matrix.hquad(v).re
    }
}

pub fn make_ball<T: Real>(dim: usize) -> Result<DomainSpec<T>> {
    if dim == 0 {
        return Err(Error::InvalidParameter("dim must be >= 1".into()));
    }
    Ok(DomainSpec {
        dim,
        kind: ModelKind::Ball,
        name: format!("ball{dim}"),
        bounding_box: cube(dim, T::one()),
    })
}

pub fn make_ellipsoid<T: Real>(semi_axes: &[T]) -> Result<DomainSpec<T>> {
    if semi_axes.is_empty() {
        return Err(Error::InvalidParameter("ellipsoid needs at least one axis".into()));
    }
    if let Some(a) = semi_axes.iter().find(|a| !(**a > T::zero()) || !a.is_finite()) {
        return Err(Error::InvalidParameter(format!("semi-axis must be positive, got {a}")));
    }
    let dim = semi_axes.len();
    let mut lo = Vec::with_capacity(2 * dim);
    let mut hi = Vec::with_capacity(2 * dim);
    for &a in semi_axes {
        lo.extend([-a, -a]);
        hi.extend([a, a]);
    }
    let axes: Vec<String> = semi_axes.iter().map(|a| format!("{a}")).collect();
    Ok(DomainSpec {
        dim,
        kind: ModelKind::Ellipsoid { axes: semi_axes.to_vec() },
        name: format!("ellipsoid({})", axes.join(",")),
        bounding_box: BoundingBox { lo, hi },
    })
}

/// Ball perturbed by δ|Re w₁|³. Rejects δ whose Levi eigenvalues leave
/// [`PERTURBATION_LEVI_BAND`] on the calibration grid.
pub fn make_c2_perturbed_ball<T: Real>(dim: usize, delta: T) -> Result<DomainSpec<T>> {
    if dim == 0 {
        return Err(Error::InvalidParameter("dim must be >= 1".into()));
    }
    if !delta.is_finite() {
        return Err(Error::InvalidParameter("delta must be finite".into()));
    }
    if delta == T::zero() {
        return make_ball(dim);
    }
    let extent = if delta > T::zero() { T::one() } else { T::lit(2.0) };
    let domain = DomainSpec {
        dim,
        kind: ModelKind::PerturbedBall { delta },
        name: format!("perturbed_ball{dim}(delta={delta})"),
        bounding_box: cube(dim, extent),
    };
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for p in domain.calibration_grid() {
        let ev = domain.hess_mixed(&p).hermitian_eigenvalues();
        lo = lo.min(ev[0].as_f64());
        hi = hi.max(ev[ev.len() - 1].as_f64());
    }
    let (band_lo, band_hi) = PERTURBATION_LEVI_BAND;
    if lo < band_lo || hi > band_hi || !lo.is_finite() {
        return Err(Error::PerturbationTooLarge {
            delta: delta.as_f64(),
            min_eig: lo,
            max_eig: hi,
            lo: band_lo,
            hi: band_hi,
        });
    }
    Ok(domain)
}

fn cube<T: Real>(dim: usize, r: T) -> BoundingBox<T> {
    BoundingBox {
        lo: vec![-r; 2 * dim],
        hi: vec![r; 2 * dim],
    }
}

impl<T: Real> DomainSpec<T> {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> &ModelKind<T> {
        &self.kind
    }

    pub fn bounding_box(&self) -> &BoundingBox<T> {
        &self.bounding_box
    }

    /// True when the second derivatives of ρ are constant (ball, ellipsoid).
    pub fn has_constant_hessian(&self) -> bool {
        !matches!(self.kind, ModelKind::PerturbedBall { .. })
    }

    pub fn rho(&self, w: &[Complex<T>]) -> T {
        // compensated: near bD the quadratic part cancels against the −1
        let quadratic = match &self.kind {
            ModelKind::Ellipsoid { axes } => compensated_dot(
                w.iter().zip(axes).flat_map(|(x, a)| {
                    let (re, im) = (x.re / *a, x.im / *a);
                    [(re, re), (im, im)]
                }),
                -T::one(),
            ),
            _ => compensated_dot(w.iter().flat_map(|x| [(x.re, x.re), (x.im, x.im)]), -T::one()),
        };
        quadratic + self.cubic_term(w)
    }

    fn cubic_term(&self, w: &[Complex<T>]) -> T {
        match self.kind {
            ModelKind::PerturbedBall { delta } => {
                let x = w[0].re.abs();
                delta * x * x * x
            }
            _ => T::zero(),
        }
    }

    /// Inverse squared semi-axes (all ones except for the ellipsoid).
    fn weights(&self) -> Vec<T> {
        match &self.kind {
            ModelKind::Ellipsoid { axes } => axes.iter().map(|a| T::one() / (*a * *a)).collect(),
            _ => vec![T::one(); self.dim],
        }
    }

    /// Real gradient in ℝ^{2n}, coordinates (x₁, y₁, x₂, y₂, …).
    pub fn grad_rho(&self, w: &[Complex<T>]) -> Vec<T> {
        let two = T::lit(2.0);
        let mut g: Vec<T> = w
            .iter()
            .zip(self.weights())
            .flat_map(|(x, c)| [two * c * x.re, two * c * x.im])
            .collect();
        if let ModelKind::PerturbedBall { delta } = self.kind {
            let x = w[0].re;
            g[0] += T::lit(3.0) * delta * x.abs() * x;
        }
        g
    }

    /// ∂ρ/∂w_j.
    pub fn d_rho(&self, w: &[Complex<T>]) -> CVec<T> {
        let mut d: CVec<T> = w.iter().zip(self.weights()).map(|(x, c)| x.conj() * c).collect();
        if let ModelKind::PerturbedBall { delta } = self.kind {
            let x = w[0].re;
            d[0] += creal(T::lit(1.5) * delta * x.abs() * x);
        }
        d
    }

    /// ∂²ρ/∂w_j∂w_k.
    pub fn hess_holo(&self, w: &[Complex<T>]) -> CMat<T> {
        let mut h = CMat::zeros(self.dim);
        if let ModelKind::PerturbedBall { delta } = self.kind {
            h[(0, 0)] = creal(T::lit(1.5) * delta * w[0].re.abs());
        }
        h
    }

    /// ∂²ρ/∂w_j∂w̄_k, the Levi matrix.
    pub fn hess_mixed(&self, w: &[Complex<T>]) -> CMat<T> {
        let mut l = CMat::diag(&self.weights());
        if let ModelKind::PerturbedBall { delta } = self.kind {
            l[(0, 0)] += creal(T::lit(1.5) * delta * w[0].re.abs());
        }
        l
    }

    pub fn levi_form(&self, w: &[Complex<T>]) -> LeviForm<T> {
        LeviForm {
            matrix: self.hess_mixed(w),
            point: w.iter().copied().collect(),
        }
    }

    /// ∂/∂w̄_k of the holomorphic Hessian, entry k of the result.
    ///
    /// Defined almost everywhere; on the perturbed ball it jumps across the
    /// kink set Re w₁ = 0 (value 0 is returned there).
    pub fn hess_holo_dbar(&self, w: &[Complex<T>]) -> Vec<CMat<T>> {
        let mut out = vec![CMat::zeros(self.dim); self.dim];
        if let ModelKind::PerturbedBall { delta } = self.kind {
            let x = w[0].re;
            let sign = if x > T::zero() {
                T::one()
            } else if x < T::zero() {
                -T::one()
            } else {
                T::zero()
            };
            out[0][(0, 0)] = creal(T::lit(0.75) * delta * sign);
        }
        out
    }

    /// Holomorphic Hessian convolved with an isotropic Gaussian of standard
    /// deviation `scale` in ℝ^{2n}, together with its ∂/∂w̄_k derivatives.
    /// `scale == 0` returns the exact Hessian.
    pub fn mollified_hess_holo(&self, w: &[Complex<T>], scale: T) -> (CMat<T>, Vec<CMat<T>>) {
        match self.kind {
            ModelKind::PerturbedBall { delta } if scale > T::zero() => {
                // E|x + sZ| = x erf(x/(s√2)) + s√(2/π) exp(−x²/2s²)
                let x = w[0].re;
                let u = x / (scale * T::SQRT_2());
                let e = erf(u);
                let m = x * e + scale * (T::lit(2.0) / T::PI()).sqrt() * (-u * u).exp();
                let mut h = CMat::zeros(self.dim);
                h[(0, 0)] = creal(T::lit(1.5) * delta * m);
                let mut dh = vec![CMat::zeros(self.dim); self.dim];
                dh[0][(0, 0)] = creal(T::lit(0.75) * delta * e);
                (h, dh)
            }
            _ => (self.hess_holo(w), self.hess_holo_dbar(w)),
        }
    }

    /// Second directional derivative of ρ along the real direction `v`
    /// (given as a complex vector).
    pub fn second_directional(&self, w: &[Complex<T>], v: &[Complex<T>]) -> T {
        let two = T::lit(2.0);
        two * self.hess_holo(w).quad(v).re + two * self.hess_mixed(w).hquad(v).re
    }

    /// R(ζ) with ρ(R ζ) = 0 for a unit direction ζ.
    pub fn radial_extent(&self, zeta: &[Complex<T>]) -> T {
        match &self.kind {
            ModelKind::Ball => T::one(),
            ModelKind::Ellipsoid { axes } => {
                let q = zeta
                    .iter()
                    .zip(axes)
                    .fold(T::zero(), |acc, (x, a)| acc + x.norm_sqr() / (*a * *a));
                T::one() / q.sqrt()
            }
            ModelKind::PerturbedBall { delta } => {
                // R² (1 + δ c³ R) = 1 with c = |Re ζ₁|.
                let c = zeta[0].re.abs();
                let k = *delta * c * c * c;
                let f = |r: T| r * r + k * r * r * r - T::one();
                let df = |r: T| T::lit(2.0) * r + T::lit(3.0) * k * r * r;
                let (mut lo, mut hi) = (T::zero(), T::lit(4.0));
                let mut r = T::one();
                for _ in 0..100 {
                    let fr = f(r);
                    if fr > T::zero() {
                        hi = r;
                    } else {
                        lo = r;
                    }
                    let step = fr / df(r);
                    let mut next = r - step;
                    if !(next > lo && next < hi) {
                        next = (lo + hi) * T::lit(0.5);
                    }
                    if (next - r).abs() <= T::epsilon() * T::lit(4.0) {
                        r = next;
                        break;
                    }
                    r = next;
                }
                r
            }
        }
    }

    /// ρ at t·R(ζ)·ζ written in terms of the boundary distance parameter
    /// `gap = 1 − t`. Uses a second-order expansion about the boundary point
    /// when `gap` is tiny so that |ρ| keeps full relative precision.
    pub fn rho_on_ray(&self, zeta: &[Complex<T>], radius: T, gap: T) -> T {
        let t = T::one() - gap;
        if gap > T::lit(1e-4) {
            let w: CVec<T> = zeta.iter().map(|x| x * (t * radius)).collect();
            return self.rho(&w);
        }
        let wb: CVec<T> = zeta.iter().map(|x| x * radius).collect();
        let dir: CVec<T> = zeta.iter().map(|x| x * radius).collect();
        let slope = T::lit(2.0) * crate::linalg::pair(&self.d_rho(&wb), &dir).re;
        let curv = self.second_directional(&wb, &dir);
        -gap * slope + T::lit(0.5) * gap * gap * curv
    }

    pub fn diameter(&self) -> T {
        match &self.kind {
            ModelKind::Ball => T::lit(2.0),
            ModelKind::Ellipsoid { axes } => {
                T::lit(2.0) * axes.iter().copied().fold(T::zero(), T::max)
            }
            ModelKind::PerturbedBall { delta } => {
                if *delta >= T::zero() {
                    T::lit(2.0)
                } else {
                    let mut e1 = crate::linalg::zeros::<T>(self.dim);
                    e1[0] = creal(T::one());
                    T::lit(2.0) * self.radial_extent(&e1)
                }
            }
        }
    }

    /// Width of the band |ρ| < band in which ∇ρ must not vanish.
    pub fn boundary_band(&self) -> T {
        T::lit(0.1) * self.diameter()
    }

    pub fn contains(&self, w: &[Complex<T>]) -> bool {
        self.rho(w) < T::zero()
    }

    /// Regular grid of the bounding box restricted to D̄, plus the radial
    /// projections of those points onto bD. Odd counts per axis so the grid
    /// contains every coordinate hyperplane.
    pub fn calibration_grid(&self) -> Vec<CVec<T>> {
        let per_axis = match self.dim {
            1 => 41,
            2 => 11,
            _ => 5,
        };
        let m = 2 * self.dim;
        let total = (per_axis as usize).pow(m as u32);
        let mut out = Vec::new();
        for idx in 0..total {
            let mut rem = idx;
            let mut coords = Vec::with_capacity(m);
            for a in 0..m {
                let i = rem % per_axis;
                rem /= per_axis;
                let frac = T::lit(i as f64 / (per_axis - 1) as f64);
                let lo = self.bounding_box.lo[a];
                let hi = self.bounding_box.hi[a];
                coords.push(lo + (hi - lo) * frac);
            }
            let w: CVec<T> = coords.chunks(2).map(|c| Complex::new(c[0], c[1])).collect();
            if self.rho(&w) <= T::zero() {
                let r2 = crate::linalg::norm_sqr(&w);
                if r2 > T::zero() {
                    let r = r2.sqrt();
                    let zeta: CVec<T> = w.iter().map(|x| x / r).collect();
                    let rb = self.radial_extent(&zeta);
                    out.push(zeta.iter().map(|x| x * rb).collect());
                }
                out.push(w);
            }
        }
        out
    }

    /// Seeded points of D̄. A fraction `boundary_fraction` lies in the band of
    /// relative depth ≤ 0.05 (a quarter of those exactly on bD).
    pub fn sample_points(&self, count: usize, seed: u64, boundary_fraction: f64) -> Vec<CVec<T>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count)
            .map(|_| self.sample_point(&mut rng, boundary_fraction))
            .collect()
    }

    pub fn sample_point(&self, rng: &mut ChaCha8Rng, boundary_fraction: f64) -> CVec<T> {
        let zeta = random_direction::<T>(rng, self.dim);
        let r = self.radial_extent(&zeta);
        let t = if rng.gen::<f64>() < boundary_fraction {
            if rng.gen::<f64>() < 0.25 {
                1.0
            } else {
                1.0 - 0.05 * rng.gen::<f64>().powi(2)
            }
        } else {
            rng.gen::<f64>().powf(1.0 / (2 * self.dim) as f64)
        };
        zeta.iter().map(|x| x * (r * T::lit(t))).collect()
    }

    /// A point z ∈ D̄ with |z − w| ≤ radius, uniform in the ball about w
    /// (rejection against D̄; falls back to shrinking toward w).
    pub fn sample_near(&self, rng: &mut ChaCha8Rng, w: &[Complex<T>], radius: T) -> CVec<T> {
        for _ in 0..64 {
            let dir = random_direction::<T>(rng, self.dim);
            let len = radius * T::lit(rng.gen::<f64>().powf(1.0 / (2 * self.dim) as f64));
            let z: CVec<T> = w.iter().zip(&dir).map(|(a, d)| a + d * len).collect();
            if self.rho(&z) <= T::zero() {
                return z;
            }
        }
        // toward the origin, which lies inside every shipped domain
        let len = radius.min(crate::linalg::norm_sqr(w).sqrt()) * T::lit(rng.gen::<f64>());
        let norm = crate::linalg::norm_sqr(w).sqrt().max(T::tiny());
        w.iter().map(|a| a - a * (len / norm)).collect()
    }
}

/// Uniform direction on the unit sphere of ℂⁿ = ℝ^{2n}.
pub fn random_direction<T: Real>(rng: &mut ChaCha8Rng, n: usize) -> CVec<T> {
    loop {
        let v: Vec<f64> = (0..2 * n).map(|_| standard_normal(rng)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v
                .chunks(2)
                .map(|c| Complex::new(T::lit(c[0] / norm), T::lit(c[1] / norm)))
                .collect();
        }
    }
}

pub fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller keeps the stream independent of rand_distr versions.
    let u1: f64 = rng.gen::<f64>().max(1e-300);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Serializable domain selection, `{"kind": "ball", "dim": 2}` and friends.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    pub kind: DomainKindName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub axes: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainKindName {
    Ball,
    Ellipsoid,
    PerturbedBall,
}

impl DomainConfig {
    pub fn ball(dim: usize) -> Self {
        Self { kind: DomainKindName::Ball, dim: Some(dim), axes: None, delta: None }
    }

    pub fn ellipsoid(axes: &[f64]) -> Self {
        Self { kind: DomainKindName::Ellipsoid, dim: None, axes: Some(axes.to_vec()), delta: None }
    }

    pub fn perturbed_ball(dim: usize, delta: f64) -> Self {
        Self { kind: DomainKindName::PerturbedBall, dim: Some(dim), axes: None, delta: Some(delta) }
    }

    pub fn build<T: Real>(&self) -> Result<DomainSpec<T>> {
        match self.kind {
            DomainKindName::Ball => make_ball(self.dim.ok_or_else(|| missing("dim"))?),
            DomainKindName::Ellipsoid => {
                let axes = self.axes.as_ref().ok_or_else(|| missing("axes"))?;
                if let Some(d) = self.dim {
                    if d != axes.len() {
                        return Err(Error::InvalidParameter(format!(
                            "domain.dim = {d} but domain.axes has {} entries",
                            axes.len()
                        )));
                    }
                }
                let axes: Vec<T> = axes.iter().map(|&a| T::lit(a)).collect();
                make_ellipsoid(&axes)
            }
            DomainKindName::PerturbedBall => make_c2_perturbed_ball(
                self.dim.ok_or_else(|| missing("dim"))?,
                T::lit(self.delta.ok_or_else(|| missing("delta"))?),
            ),
        }
    }
}

fn missing(key: &str) -> Error {
    Error::InvalidParameter(format!("domain.{key} is required"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    fn pt(c: &[(f64, f64)]) -> CVec<f64> {
        c.iter().map(|&(a, b)| Complex64::new(a, b)).collect()
    }

    #[test]
    fn ball_closed_forms() {
        let d1 = make_ball::<f64>(1).unwrap();
        let o = pt(&[(0.0, 0.0)]);
        assert_eq!(d1.rho(&o), -1.0);
        assert_eq!(d1.d_rho(&o)[0], Complex64::new(0.0, 0.0));
        assert_eq!(d1.hess_mixed(&o)[(0, 0)], Complex64::new(1.0, 0.0));

        let d2 = make_ball::<f64>(2).unwrap();
        let w = pt(&[(1.0, 0.0), (0.0, 0.0)]);
        assert_eq!(d2.rho(&w), 0.0);
        assert_eq!(d2.d_rho(&w).to_vec(), pt(&[(1.0, 0.0), (0.0, 0.0)]).to_vec());
        let g2: f64 = d2.grad_rho(&w).iter().map(|x| x * x).sum();
        assert_eq!(g2, 4.0);
        let any = pt(&[(0.3, -0.2), (0.1, 0.5)]);
        assert_eq!(d2.hess_holo(&any).max_abs(), 0.0);
    }

    #[test]
    fn ellipsoid_levi() {
        let unit = make_ellipsoid(&[1.0, 1.0]).unwrap();
        let ball = make_ball::<f64>(2).unwrap();
        for p in ball.sample_points(50, 3, 0.3) {
            assert_eq!(unit.rho(&p), ball.rho(&p));
            assert_eq!(unit.d_rho(&p), ball.d_rho(&p));
        }
        let e = make_ellipsoid(&[1.0, 2.0]).unwrap();
        let l = e.hess_mixed(&pt(&[(0.0, 0.0), (0.0, 0.0)]));
        assert_eq!(l[(0, 0)].re, 1.0);
        assert_eq!(l[(1, 1)].re, 0.25);
        let min = e
            .calibration_grid()
            .iter()
            .map(|p| e.hess_mixed(p).hermitian_eigenvalues()[0])
            .fold(f64::INFINITY, f64::min);
        assert!((min - 0.25).abs() < 1e-12);
        assert!(make_ellipsoid(&[1.0, 0.0]).is_err());
        assert!(make_ellipsoid(&[-1.0f64]).is_err());
    }

    #[test]
    fn perturbed_ball_construction() {
        let b = make_ball::<f64>(2).unwrap();
        let p0 = make_c2_perturbed_ball(2, 0.0).unwrap();
        assert_eq!(p0, b);
        assert!(make_c2_perturbed_ball(2, 0.05f64).is_ok());
        assert!(matches!(
            make_c2_perturbed_ball(2, 10.0f64),
            Err(Error::PerturbationTooLarge { .. })
        ));
        assert!(make_c2_perturbed_ball(2, -10.0f64).is_err());
        // Levi matrix is continuous across the kink set, its w̄-derivative jumps.
        let d = make_c2_perturbed_ball(1, 0.1f64).unwrap();
        let left = d.hess_mixed(&pt(&[(-1e-9, 0.3)]))[(0, 0)];
        let right = d.hess_mixed(&pt(&[(1e-9, 0.3)]))[(0, 0)];
        assert!((left - right).norm() < 1e-9);
        let jl = d.hess_holo_dbar(&pt(&[(-1e-9, 0.3)]))[0][(0, 0)];
        let jr = d.hess_holo_dbar(&pt(&[(1e-9, 0.3)]))[0][(0, 0)];
        assert!((jr - jl).norm() > 0.1);
    }

    #[test]
    fn radial_extent_is_on_boundary() {
        for d in [
            make_ball::<f64>(2).unwrap(),
            make_ellipsoid(&[1.0, 2.0]).unwrap(),
            make_c2_perturbed_ball(2, 0.3).unwrap(),
        ] {
            let mut rng = ChaCha8Rng::seed_from_u64(9);
            for _ in 0..100 {
                let z = random_direction::<f64>(&mut rng, 2);
                let r = d.radial_extent(&z);
                let w: CVec<f64> = z.iter().map(|x| x * r).collect();
                assert!(d.rho(&w).abs() < 1e-12, "{}", d.name());
                // expansion near the boundary agrees with direct evaluation
                let gap = 5e-5;
                let direct = d.rho(&z.iter().map(|x| x * (r * (1.0 - gap))).collect::<CVec<f64>>());
                assert!((d.rho_on_ray(&z, r, gap) - direct).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn config_parses() {
        let c: DomainConfig = serde_json::from_str(r#"{"kind":"perturbed_ball","dim":2,"delta":0.1}"#).unwrap();
        assert_eq!(c, DomainConfig::perturbed_ball(2, 0.1));
        assert!(c.build::<f64>().is_ok());
        assert!(serde_json::from_str::<DomainConfig>(r#"{"kind":"ball","dimm":2}"#).is_err());
        assert!(DomainConfig { kind: DomainKindName::Ball, dim: None, axes: None, delta: None }
            .build::<f64>()
            .is_err());
    }
}
