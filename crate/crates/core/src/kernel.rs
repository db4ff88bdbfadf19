//! Cauchy–Fantappié data η_ε, G_ε = η_ε / g_ε and the scalar kernel of B¹_ε.
//!
//! The top-degree form (∂̄_w G_ε)ⁿ is reduced to n!·det A dw̄∧dw with
//! A_jk = ∂/∂w̄_k (η_ε,j / g_ε). Against the Euclidean volume element and the
//! 1/(2πi)ⁿ prefactor this leaves the density (n!/πⁿ) det A. Orientation and
//! sign are pinned by requiring the disc to reproduce 1/(π(1 − z w̄)²).

use num_complex::Complex;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::levi::KernelContext;
use crate::linalg::{creal, czero, norm_sqr, pair, sub, CMat, CVec};
use crate::scalar::{ball_constant, Real};

/// Coefficients of a (1,0)-form Σ a_j dw_j at base point w, with parameter z.
#[derive(Clone, Debug)]
pub struct CfForm<T: Real> {
    pub coeffs: CVec<T>,
    pub w: CVec<T>,
    pub z: CVec<T>,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct KernelValue<T: Real> {
    pub value: Complex<T>,
    /// value · g_ε^{n+1}.
    pub numerator: Complex<T>,
    /// g_ε^{n+1}.
    pub denominator: Complex<T>,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct KernelParts<T: Real> {
    /// Leading coefficient K₀(w)/(2πi)ⁿ.
    pub k0: T,
    /// |b¹_ε g_ε^{n+1} − K₀/(2πi)ⁿ| at (w, z).
    pub remainder: T,
    pub distance: T,
}

#[derive(Clone, Debug)]
pub struct BoundaryKernel<T: Real> {
    /// Ĝ_ε = η_ε / ⟨η_ε, w − z⟩.
    pub generating: CVec<T>,
    /// Density of (2πi)^{−n} Ĝ ∧ (∂̄_w Ĝ)^{n−1} against surface measure.
    pub density: Complex<T>,
}

/// Everything the kernel needs at one (w, z) pair.
pub(crate) struct Local<T: Real> {
    pub g: Complex<T>,
    pub eta: CVec<T>,
    /// ∂η_j/∂w̄_k.
    pub deta: CMat<T>,
    /// ∂g/∂w̄_k.
    pub dg: CVec<T>,
}

pub(crate) fn local<T: Real>(ctx: &KernelContext<T>, w: &[Complex<T>], z: &[Complex<T>]) -> Local<T> {
    let n = ctx.dim();
    let dom = &ctx.domain;
    let d = sub(w, z);
    let s = norm_sqr(&d);
    let (chi, dchi) = ctx.chi(s);
    let half = T::lit(0.5);
    let one = T::one();
    let drho = dom.d_rho(w);
    let levi = dom.hess_mixed(w);
    let (tau, dtau) = ctx.tau(w);

    // a_j = ∂_jρ − ½ Σ_l τ_jl d_l
    let td = tau.mul_vec(&d);
    let a: CVec<T> = drho.iter().zip(&td).map(|(r, t)| r - t * half).collect();
    let eta: CVec<T> = a
        .iter()
        .zip(&d)
        .map(|(aj, dj)| aj * chi + dj.conj() * (one - chi))
        .collect();

    // P^ε_w(z) with z − w = −d
    let p = -pair(&drho, &d) + tau.quad(&d) * half;
    let g = -p * chi + creal(s * (one - chi) - dom.rho(w));

    let dtau_d: Vec<CVec<T>> = dtau.iter().map(|m| m.mul_vec(&d)).collect();
    let mut deta = CMat::zeros(n);
    let mut dg: CVec<T> = crate::linalg::zeros(n);
    for k in 0..n {
        let dchi_k = d[k] * dchi;
        // ∂_k̄ P = −Σ_j L_jk d_j + ½ Σ (∂_k̄ τ)_jl d_j d_l
        let dp = (0..n).fold(czero::<T>(), |acc, j| acc - levi[(j, k)] * d[j]) + pair(&d, &dtau_d[k]) * half;
        dg[k] = -dchi_k * p - dp * chi + d[k] * (one - chi) - dchi_k * s - drho[k].conj();
        for j in 0..n {
            let da = levi[(j, k)] - dtau_d[k][j] * half;
            let delta = if j == k { one - chi } else { T::zero() };
            deta[(j, k)] = dchi_k * (a[j] - d[j].conj()) + da * chi + creal(delta);
        }
    }
    Local { g, eta, deta, dg }
}

fn guard<T: Real>(n: usize) -> T {
    T::min_positive_value().powf(T::one() / T::lit(n as f64 + 2.0))
}

/// η_ε(w, z) = χ (∂ρ(w) − ½ τ^ε(w)(w − z)) + (1 − χ) conj(w − z).
pub fn eta_eps<T: Real>(ctx: &KernelContext<T>, w: &[Complex<T>], z: &[Complex<T>]) -> CfForm<T> {
    let l = local(ctx, w, z);
    CfForm {
        coeffs: l.eta,
        w: w.iter().copied().collect(),
        z: z.iter().copied().collect(),
    }
}

/// A_jk = ∂/∂w̄_k (η_ε,j / g_ε).
pub fn antiholomorphic_jacobian<T: Real>(ctx: &KernelContext<T>, w: &[Complex<T>], z: &[Complex<T>]) -> Result<CMat<T>> {
    let l = local(ctx, w, z);
    jacobian_from(&l, ctx.dim())
}

fn jacobian_from<T: Real>(l: &Local<T>, n: usize) -> Result<CMat<T>> {
    if !(l.g.norm() > guard::<T>(n)) {
        return Err(Error::SingularKernel { magnitude: l.g.norm().as_f64() });
    }
    let inv = l.g.inv();
    let inv2 = inv * inv;
    Ok(CMat::from_fn(n, |j, k| l.deta[(j, k)] * inv - l.eta[j] * l.dg[k] * inv2))
}

/// Scalar kernel b¹_ε(w, z) of B¹_ε against the volume element dV(w).
pub fn kernel_b1<T: Real>(ctx: &KernelContext<T>, w: &[Complex<T>], z: &[Complex<T>]) -> Result<KernelValue<T>> {
    let n = ctx.dim();
    let l = local(ctx, w, z);
    let a = jacobian_from(&l, n)?;
    let value = a.det() * ball_constant::<T>(n);
    let denominator = l.g.powi(n as i32 + 1);
    Ok(KernelValue { value, numerator: value * denominator, denominator })
}

/// Leading coefficient of b¹_ε g_ε^{n+1} at w:
/// (n!/πⁿ) Σ_jk conj(∂_kρ) adj(L)_kj ∂_jρ, i.e. minus the bordered Levi
/// determinant. Equals (n!/πⁿ)|∂ρ|² det L whenever ∂ρ is an eigenvector of L.
pub fn k0_leading<T: Real>(ctx: &KernelContext<T>, w: &[Complex<T>]) -> T {
    let dom = &ctx.domain;
    let drho = dom.d_rho(w);
    let adj = dom.hess_mixed(w).adjugate();
    let v = adj.mul_vec(&drho);
    let conj: CVec<T> = drho.iter().map(|x| x.conj()).collect();
    (pair(&conj, &v) * ball_constant::<T>(ctx.dim())).re
}

/// K₀(w)/(2πi)ⁿ together with the measured remainder at (w, z).
pub fn kernel_parts<T: Real>(ctx: &KernelContext<T>, w: &[Complex<T>], z: &[Complex<T>]) -> Result<KernelParts<T>> {
    let k0 = k0_leading(ctx, w);
    let distance = norm_sqr(&sub(w, z)).sqrt();
    let remainder = if distance == T::zero() {
        // N_ε(w, w) = g det L − bᵀ adj(L) η collapses to −ρ(w) det L + K₀
        let l = ctx.domain.hess_mixed(w).det().re * ball_constant::<T>(ctx.dim());
        (-ctx.domain.rho(w) * l).abs()
    } else {
        let kv = kernel_b1(ctx, w, z)?;
        (kv.numerator - creal(k0)).norm()
    };
    Ok(KernelParts { k0, remainder, distance })
}

/// Oriented orthonormal frame of the tangent space to bD at a point with
/// outward unit normal `normal` (real coordinates), as complex vectors.
pub fn tangent_frame<T: Real>(normal: &[T]) -> Vec<CVec<T>> {
    let m = normal.len();
    let mut basis: Vec<Vec<T>> = vec![normal.to_vec()];
    for e in 0..m {
        if basis.len() == m {
            break;
        }
        let mut v = vec![T::zero(); m];
        v[e] = T::one();
        for _ in 0..2 {
            for b in &basis {
                let dot = v.iter().zip(b).fold(T::zero(), |acc, (x, y)| acc + *x * *y);
                for (vi, bi) in v.iter_mut().zip(b) {
                    *vi -= dot * *bi;
                }
            }
        }
        let norm = v.iter().fold(T::zero(), |acc, x| acc + *x * *x).sqrt();
        if norm > T::lit(1e-3) {
            basis.push(v.into_iter().map(|x| x / norm).collect());
        }
    }
    let flat: Vec<f64> = (0..m).flat_map(|r| basis.iter().map(move |b| b[r])).map(|x| x.as_f64()).collect::<Vec<_>>();
    if crate::linalg::real_det(&flat, m) < 0.0 {
        for x in basis[1].iter_mut() {
            *x = -*x;
        }
    }
    basis[1..]
        .iter()
        .map(|v| v.chunks(2).map(|c| Complex::new(c[0], c[1])).collect())
        .collect()
}

/// Value of η ∧ (∂̄η)^{n−1} on the given 2n − 1 tangent vectors, where
/// ∂̄η = Σ_jk (∂η_j/∂w̄_k) dw̄_k ∧ dw_j.
fn evaluate_cf_form<T: Real>(eta: &[Complex<T>], deta: &CMat<T>, frame: &[CVec<T>]) -> Complex<T> {
    let n = eta.len();
    let deg = 2 * n - 1;
    // A one-form is (index, conjugated?).
    let mut total = czero();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|j| (0..n).map(move |k| (j, k))).collect();
    let count = pairs.len().pow((n - 1) as u32);
    for l in 0..n {
        for combo in 0..count {
            let mut forms: Vec<(usize, bool)> = Vec::with_capacity(deg);
            forms.push((l, false));
            let mut coeff = eta[l];
            let mut rem = combo;
            for _ in 0..n - 1 {
                let (j, k) = pairs[rem % pairs.len()];
                rem /= pairs.len();
                coeff *= deta[(j, k)];
                forms.push((k, true));
                forms.push((j, false));
            }
            if coeff == czero() {
                continue;
            }
            let m = CMat::from_fn(deg, |a, b| {
                let (idx, bar) = forms[a];
                let v = frame[b][idx];
                if bar {
                    v.conj()
                } else {
                    v
                }
            });
            total += coeff * m.det();
        }
    }
    total
}

/// Boundary Cauchy–Fantappié data for w ∈ bD (|ρ(w)| ≤ 10⁻¹⁰), z ∈ D.
pub fn kernel_b1_hat<T: Real>(
    ctx: &KernelContext<T>,
    w: &[Complex<T>],
    z: &[Complex<T>],
    normal: &[T],
) -> Result<BoundaryKernel<T>> {
    let n = ctx.dim();
    if ctx.domain.rho(w).abs() > T::lit(1e-10).max(T::epsilon() * T::lit(64.0)) {
        return Err(Error::InvalidParameter(format!(
            "boundary kernel needs w on bD, rho(w) = {:e}",
            ctx.domain.rho(w).as_f64()
        )));
    }
    let l = local(ctx, w, z);
    let q = pair(&l.eta, &sub(w, z));
    if !(q.norm() > guard::<T>(n)) {
        return Err(Error::DegenerateGeneratingForm { magnitude: q.norm().as_f64() });
    }
    let frame = tangent_frame(normal);
    let omega = evaluate_cf_form(&l.eta, &l.deta, &frame);
    let two_pi_i = Complex::new(T::zero(), T::lit(2.0) * T::PI());
    let density = omega / (q.powi(n as i32) * two_pi_i.powi(n as i32));
    let generating = l.eta.iter().map(|e| e / q).collect();
    Ok(BoundaryKernel { generating, density })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{make_ball, make_c2_perturbed_ball, make_ellipsoid};
    use crate::levi::{calibrate_constants, g_eps, ContextOptions};
    use crate::linalg::hdot;
    use num_complex::Complex64;

    fn pt(c: &[(f64, f64)]) -> CVec<f64> {
        c.iter().map(|&(a, b)| Complex64::new(a, b)).collect()
    }

    fn perturbed_ctx(eps: f64) -> KernelContext<f64> {
        let d = make_c2_perturbed_ball(2, 0.2).unwrap();
        let cal = calibrate_constants(&d, 2000, 11).unwrap();
        let opts = ContextOptions { epsilon: eps, mu_override: Some(0.8), ..Default::default() };
        KernelContext::new(d, &cal, &opts).unwrap()
    }

    #[test]
    fn disc_kernel_is_bergman() {
        let ctx = KernelContext::global(make_ball::<f64>(1).unwrap()).unwrap();
        let o = pt(&[(0.0, 0.0)]);
        let v = kernel_b1(&ctx, &o, &o).unwrap().value;
        assert!((v - Complex64::new(1.0 / std::f64::consts::PI, 0.0)).norm() < 1e-15);
        let w = pt(&[(0.3, -0.4)]);
        let z = pt(&[(-0.2, 0.6)]);
        let gz = Complex64::new(1.0, 0.0) - z[0] * w[0].conj();
        let want = 1.0 / (std::f64::consts::PI * gz * gz);
        assert!((kernel_b1(&ctx, &w, &z).unwrap().value - want).norm() < 1e-14);
    }

    #[test]
    fn eta_branches_and_pairing() {
        let ball = KernelContext::global(make_ball::<f64>(2).unwrap()).unwrap();
        let w = pt(&[(0.3, 0.1), (-0.2, 0.5)]);
        let z = pt(&[(0.0, -0.4), (0.6, 0.1)]);
        let e = eta_eps(&ball, &w, &z);
        for j in 0..2 {
            assert!((e.coeffs[j] - w[j].conj()).norm() < 1e-15);
        }
        let ctx = perturbed_ctx(0.05);
        let far_w = pt(&[(0.0, 0.9), (0.0, 0.0)]);
        let far_z = pt(&[(0.0, -0.9), (0.0, 0.0)]);
        let e = eta_eps(&ctx, &far_w, &far_z);
        for j in 0..2 {
            assert!((e.coeffs[j] - (far_w[j] - far_z[j]).conj()).norm() < 1e-15);
        }
        let pts = ctx.domain.sample_points(2000, 8, 0.3);
        for p in pts.chunks(2) {
            let e = eta_eps(&ctx, &p[0], &p[1]);
            let lhs = pair(&e.coeffs, &sub(&p[0], &p[1])) - creal(ctx.domain.rho(&p[0]));
            assert!((lhs - g_eps(&ctx, &p[0], &p[1])).norm() < 1e-12);
        }
    }

    #[test]
    fn ball_n2_kernel_closed_form_and_leading_term() {
        let ctx = KernelContext::global(make_ball::<f64>(2).unwrap()).unwrap();
        let w = pt(&[(0.3, 0.1), (-0.2, 0.5)]);
        let z = pt(&[(0.0, -0.4), (0.6, 0.1)]);
        let gz = Complex64::new(1.0, 0.0) - hdot(&z, &w);
        let want = 2.0 / std::f64::consts::PI.powi(2) / gz.powi(3);
        let got = kernel_b1(&ctx, &w, &z).unwrap().value;
        assert!((got - want).norm() / want.norm() < 1e-13);

        let unit1 = KernelContext::global(make_ball::<f64>(1).unwrap()).unwrap();
        let b = pt(&[(0.6, 0.8)]);
        assert!((k0_leading(&unit1, &b) - 1.0 / std::f64::consts::PI).abs() < 1e-15);
        let b2 = pt(&[(0.6, 0.0), (0.0, 0.8)]);
        assert!((k0_leading(&ctx, &b2) - 2.0 / std::f64::consts::PI.powi(2)).abs() < 1e-15);
        let parts = kernel_parts(&ctx, &b2, &b2).unwrap();
        assert!(parts.remainder < 1e-16);
    }

    #[test]
    fn quadratic_domains_have_constant_numerator() {
        let ctx = KernelContext::global(make_ellipsoid(&[1.0, 2.0]).unwrap()).unwrap();
        let zeta = pt(&[(0.6, 0.0), (0.0, 0.8)]);
        let r = ctx.domain.radial_extent(&zeta);
        let w: CVec<f64> = zeta.iter().map(|x| x * r).collect();
        let mut z = w.clone();
        let tilt = pt(&[(0.1, 0.3), (-0.2, 0.1)]);
        let mut ratios = Vec::new();
        for k in 1..6 {
            let t = 10f64.powi(-k);
            for j in 0..2 {
                z[j] = w[j] * (1.0 - t) + tilt[j] * t;
            }
            let p = kernel_parts(&ctx, &w, &z).unwrap();
            ratios.push(p.remainder / p.distance);
        }
        // with a constant Levi form and τ = 0 the numerator is exactly K₀
        assert!(ratios.iter().all(|r| *r < 1e-6), "{ratios:?}");
        let perturbed = perturbed_ctx(0.0);
        let wb: CVec<f64> = zeta.iter().map(|x| x * perturbed.domain.radial_extent(&zeta)).collect();
        let mut prev = f64::INFINITY;
        for k in 2..6 {
            let t = 10f64.powi(-k);
            let zz: CVec<f64> = (0..2).map(|j| wb[j] * (1.0 - t) + tilt[j] * t).collect();
            let p = kernel_parts(&perturbed, &wb, &zz).unwrap();
            assert!(p.remainder < prev && p.remainder / p.distance < 10.0);
            prev = p.remainder;
        }
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let ctx = perturbed_ctx(0.05);
        let h = 1e-6;
        let pts = ctx.domain.sample_points(60, 21, 0.0);
        for p in pts.chunks(2) {
            let (w, z) = (&p[0], &p[1]);
            let a = antiholomorphic_jacobian(&ctx, w, z).unwrap();
            let n = 2;
            for k in 0..n {
                let shift = |dx: f64, dy: f64| {
                    let mut ww = w.clone();
                    ww[k] += Complex64::new(dx, dy);
                    let l = local(&ctx, &ww, z);
                    l.eta.iter().map(|e| e / l.g).collect::<CVec<f64>>()
                };
                let (xp, xm, yp, ym) = (shift(h, 0.0), shift(-h, 0.0), shift(0.0, h), shift(0.0, -h));
                for j in 0..n {
                    let dx = (xp[j] - xm[j]) / (2.0 * h);
                    let dy = (yp[j] - ym[j]) / (2.0 * h);
                    let fd = (dx + Complex64::i() * dy) * 0.5;
                    let scale = a.max_abs().max(1.0);
                    assert!((fd - a[(j, k)]).norm() / scale < 1e-6, "{j}{k}: {fd} vs {}", a[(j, k)]);
                }
            }
        }
    }

    #[test]
    fn tangent_frame_is_oriented() {
        let normal = [0.6, 0.0, 0.0, 0.8];
        let frame = tangent_frame(&normal);
        assert_eq!(frame.len(), 3);
        let mut rows = normal.to_vec();
        for v in &frame {
            rows.extend(v.iter().flat_map(|c| [c.re, c.im]));
        }
        // columns = vectors
        let m: Vec<f64> = (0..4).flat_map(|r| (0..4).map(move |c| (r, c))).map(|(r, c)| rows[c * 4 + r]).collect();
        assert!((crate::linalg::real_det(&m, 4) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn circle_boundary_density_is_szego() {
        let ctx = KernelContext::global(make_ball::<f64>(1).unwrap()).unwrap();
        let theta: f64 = 0.7;
        let w = pt(&[(theta.cos(), theta.sin())]);
        let z = pt(&[(0.2, -0.5)]);
        let bk = kernel_b1_hat(&ctx, &w, &z, &[theta.cos(), theta.sin()]).unwrap();
        let want = 1.0 / (2.0 * std::f64::consts::PI * (Complex64::new(1.0, 0.0) - z[0] * w[0].conj()));
        assert!((bk.density - want).norm() < 1e-14);
        assert!((pair(&bk.generating, &sub(&w, &z)) - Complex64::new(1.0, 0.0)).norm() < 1e-14);
        assert!(kernel_b1_hat(&ctx, &z, &w, &[1.0, 0.0]).is_err());
    }

    #[test]
    fn sphere_boundary_formula_reproduces_holomorphic_data() {
        let ctx = KernelContext::global(make_ball::<f64>(2).unwrap()).unwrap();
        let rule = crate::quadrature::surface_rule(&ctx.domain, 24).unwrap();
        let z = pt(&[(0.2, 0.1), (0.0, -0.3)]);
        let mut acc = [Complex64::new(0.0, 0.0); 2];
        for ((w, wt), nrm) in rule.nodes.iter().zip(&rule.weights).zip(&rule.normals) {
            let bk = kernel_b1_hat(&ctx, w, &z, nrm).unwrap();
            acc[0] += bk.density * *wt;
            acc[1] += bk.density * w[0] * *wt;
        }
        assert!((acc[0] - 1.0).norm() < 1e-3, "{:?}", acc[0]);
        assert!((acc[1] - z[0]).norm() < 1e-3, "{:?}", acc[1]);
    }

    #[test]
    fn f32_kernel_tracks_f64() {
        let c64 = KernelContext::global(make_ball::<f64>(2).unwrap()).unwrap();
        let c32 = KernelContext::global(make_ball::<f32>(2).unwrap()).unwrap();
        let w = [Complex::new(0.3f32, 0.1), Complex::new(-0.2, 0.5)];
        let z = [Complex::new(0.0f32, -0.4), Complex::new(0.6, 0.1)];
        let w64: Vec<_> = w.iter().map(|c| Complex64::new(c.re as f64, c.im as f64)).collect();
        let z64: Vec<_> = z.iter().map(|c| Complex64::new(c.re as f64, c.im as f64)).collect();
        let a = kernel_b1(&c32, &w, &z).unwrap().value;
        let b = kernel_b1(&c64, &w64, &z64).unwrap().value;
        assert!(((a.re as f64 - b.re).hypot(a.im as f64 - b.im)) / b.norm() < 1e-5);
    }
}
