//! Reference Bergman kernels: the closed form on the unit ball and truncated
//! orthonormal expansions of holomorphic monomials in L²(D, σ dV).

use std::f64::consts::PI;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{pairwise_sum, Point, QuadratureRule};
use crate::scalar::ball_constant;

/// Closed-form Bergman kernel of the unit ball in Cⁿ,
/// (n!/πⁿ)(1 − Σ z_j w̄_j)^{−(n+1)}.
pub fn ball_kernel(n: usize, w: &[Complex64], z: &[Complex64]) -> Complex64 {
    let s: Complex64 = z.iter().zip(w).map(|(a, b)| a * b.conj()).sum();
    let base = Complex64::new(1.0, 0.0) - s;
    ball_constant::<f64>(n) * base.powi(-(n as i32 + 1))
}

/// Continuous, strictly positive weight σ on D̄.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Sigma {
    Constant { value: f64 },
    /// σ(w) = exp(rate · Re w₁)
    Exponential { rate: f64 },
}

impl Default for Sigma {
    fn default() -> Self {
        Sigma::Constant { value: 1.0 }
    }
}

impl Sigma {
    pub fn eval(&self, w: &[Complex64]) -> f64 {
        match *self {
            Sigma::Constant { value } => value,
            Sigma::Exponential { rate } => (rate * w[0].re).exp(),
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Sigma::Constant { value } if !(value > 0.0 && value.is_finite()) => {
                Err(Error::InvalidParameter(format!("weight must be strictly positive, got {value}")))
            }
            Sigma::Exponential { rate } if !rate.is_finite() => {
                Err(Error::InvalidParameter("weight rate must be finite".into()))
            }
            _ => Ok(()),
        }
    }
}

/// Largest accepted condition estimate of the monomial Gram matrix.
pub const GRAM_CONDITION_LIMIT: f64 = 1e10;

/// Orthonormal family φ_k = Σ_{j ≤ k} F_kj m_j, where m_j are the monomials
/// in `indices` (stored in pivot order) and F is lower triangular.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrthonormalBasis {
    pub dim: usize,
    pub degree_cap: usize,
    pub indices: Vec<Vec<u32>>,
    /// Row-major lower-triangular factor, len × len.
    pub factor: Vec<Complex64>,
    pub sigma: Sigma,
    pub condition: f64,
    pub rule_label: String,
}

/// All multi-indices of total degree ≤ cap in graded order.
pub fn multi_indices(dim: usize, cap: usize) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    for deg in 0..=cap {
        let mut current = vec![0u32; dim];
        fill(&mut current, 0, deg as u32, &mut out);
    }
    out
}

fn fill(current: &mut Vec<u32>, pos: usize, left: u32, out: &mut Vec<Vec<u32>>) {
    if pos + 1 == current.len() {
        current[pos] = left;
        out.push(current.clone());
        return;
    }
    for k in (0..=left).rev() {
        current[pos] = k;
        fill(current, pos + 1, left - k, out);
    }
}

fn monomial(alpha: &[u32], z: &[Complex64]) -> Complex64 {
    alpha.iter().zip(z).fold(Complex64::new(1.0, 0.0), |acc, (&a, x)| acc * x.powu(a))
}

fn monomial_table(indices: &[Vec<u32>], nodes: &[Point]) -> Vec<Complex64> {
    let mut table = Vec::with_capacity(nodes.len() * indices.len());
    for z in nodes {
        table.extend(indices.iter().map(|a| monomial(a, z)));
    }
    table
}

/// Hermitian Gram matrix ⟨m_j, m_i⟩_σ = Σ_nodes wt σ m_j conj(m_i).
fn gram(indices: &[Vec<u32>], rule: &QuadratureRule, sigma: &Sigma) -> Vec<Complex64> {
    let k = indices.len();
    let table = monomial_table(indices, &rule.nodes);
    let ws: Vec<f64> = rule.nodes.iter().zip(&rule.weights).map(|(z, w)| w * sigma.eval(z)).collect();
    let mut g = vec![Complex64::new(0.0, 0.0); k * k];
    for i in 0..k {
        for j in 0..=i {
            let terms: Vec<Complex64> =
                (0..rule.len()).map(|q| table[q * k + j] * table[q * k + i].conj() * ws[q]).collect();
            let v = pairwise_sum(&terms);
            g[i * k + j] = v;
            g[j * k + i] = v.conj();
        }
    }
    g
}

fn degree(alpha: &[u32]) -> u32 {
    alpha.iter().sum()
}

/// Build the orthonormal family by a pivoted Cholesky factorization P G Pᵀ = L Lᴴ
/// of the monomial Gram matrix (pivots chosen inside each degree block) and
/// F = L⁻¹.
pub fn build_basis(rule: &QuadratureRule, degree_cap: usize, sigma: Sigma) -> Result<OrthonormalBasis> {
    sigma.validate()?;
    let dim = rule.dim;
    let mut indices = multi_indices(dim, degree_cap);
    let k = indices.len();
    let mut a = gram(&indices, rule, &sigma);
    let mut perm: Vec<usize> = (0..k).collect();
    let mut l = vec![Complex64::new(0.0, 0.0); k * k];
    let mut pivots = Vec::with_capacity(k);
    for c in 0..k {
        // largest remaining diagonal within the lowest remaining degree, so
        // that the family stays graded and truncates cleanly by degree
        let deg = degree(&indices[perm[c]]);
        let (p, _) = (c..k)
            .filter(|&i| degree(&indices[perm[i]]) == deg)
            .map(|i| (i, a[i * k + i].re))
            .fold((c, f64::NEG_INFINITY), |best, x| if x.1 > best.1 { x } else { best });
        if p != c {
            perm.swap(p, c);
            for col in 0..k {
                a.swap(p * k + col, c * k + col);
            }
            for row in 0..k {
                a.swap(row * k + p, row * k + c);
            }
            for col in 0..c {
                l.swap(p * k + col, c * k + col);
            }
        }
        let d = a[c * k + c].re;
        if !(d > 0.0) {
            return Err(Error::IllConditionedGram { cond: f64::INFINITY });
        }
        let s = d.sqrt();
        pivots.push(s);
        l[c * k + c] = Complex64::new(s, 0.0);
        for i in c + 1..k {
            l[i * k + c] = a[i * k + c] / s;
        }
        for i in c + 1..k {
            for j in c + 1..=i {
                let v = l[i * k + c] * l[j * k + c].conj();
                a[i * k + j] -= v;
                if i != j {
                    a[j * k + i] = a[i * k + j].conj();
                } else {
                    a[i * k + i].im = 0.0;
                }
            }
        }
    }
    let (lo, hi) = pivots.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &p| (lo.min(p), hi.max(p)));
    let condition = (hi / lo).powi(2);
    if !(condition <= GRAM_CONDITION_LIMIT) {
        return Err(Error::IllConditionedGram { cond: condition });
    }
    // forward substitution: F = L⁻¹ (lower triangular)
    let mut f = vec![Complex64::new(0.0, 0.0); k * k];
    for col in 0..k {
        f[col * k + col] = Complex64::new(1.0, 0.0) / l[col * k + col];
        for i in col + 1..k {
            let s: Complex64 = (col..i).map(|m| l[i * k + m] * f[m * k + col]).sum();
            f[i * k + col] = -s / l[i * k + i];
        }
    }
    indices = perm.iter().map(|&p| indices[p].clone()).collect();
    Ok(OrthonormalBasis { dim, degree_cap, indices, factor: f, sigma, condition, rule_label: rule.meta.label.clone() })
}

impl OrthonormalBasis {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Values φ_k(z) for all k.
    pub fn eval(&self, z: &[Complex64]) -> Vec<Complex64> {
        let k = self.len();
        let m: Vec<Complex64> = self.indices.iter().map(|a| monomial(a, z)).collect();
        (0..k).map(|i| (0..=i).map(|j| self.factor[i * k + j] * m[j]).sum()).collect()
    }

    /// Truncated kernel Σ_k φ_k(z) conj(φ_k(w)).
    pub fn kernel(&self, w: &[Complex64], z: &[Complex64]) -> Complex64 {
        self.kernel_to_degree(w, z, self.degree_cap)
    }

    /// The kernel of the subspace of polynomials of degree ≤ `cap`; the
    /// family is graded, so this is a prefix sum.
    pub fn kernel_to_degree(&self, w: &[Complex64], z: &[Complex64], cap: usize) -> Complex64 {
        let (a, b) = (self.eval(z), self.eval(w));
        self.indices
            .iter()
            .zip(a.iter().zip(&b))
            .filter(|(alpha, _)| degree(alpha) as usize <= cap)
            .map(|(_, (x, y))| x * y.conj())
            .sum()
    }

    /// Coefficients ⟨f, φ_k⟩_σ from samples of f at the rule nodes.
    pub fn project(&self, rule: &QuadratureRule, samples: &[Complex64]) -> Result<Vec<Complex64>> {
        if samples.len() != rule.len() || rule.dim != self.dim {
            return Err(Error::InvalidParameter("samples do not match the rule".into()));
        }
        let k = self.len();
        let mut terms: Vec<Vec<Complex64>> = vec![Vec::with_capacity(rule.len()); k];
        for ((z, w), f) in rule.nodes.iter().zip(&rule.weights).zip(samples) {
            let s = *w * self.sigma.eval(z);
            for (t, phi) in terms.iter_mut().zip(self.eval(z)) {
                t.push(f * phi.conj() * s);
            }
        }
        Ok(terms.iter().map(|t| pairwise_sum(t)).collect())
    }

    /// Σ c_k φ_k(z).
    pub fn synthesize(&self, coeffs: &[Complex64], z: &[Complex64]) -> Complex64 {
        self.eval(z).iter().zip(coeffs).map(|(p, c)| p * c).sum()
    }

    /// B^σ f sampled at the rule nodes.
    pub fn apply(&self, rule: &QuadratureRule, samples: &[Complex64]) -> Result<Vec<Complex64>> {
        let c = self.project(rule, samples)?;
        Ok(rule.nodes.iter().map(|z| self.synthesize(&c, z)).collect())
    }

    /// max |⟨φ_i, φ_j⟩_σ − δ_ij| on a (typically independent) rule.
    pub fn gram_defect(&self, rule: &QuadratureRule) -> f64 {
        let mut worst = 0.0f64;
        let values: Vec<Vec<Complex64>> = rule.nodes.iter().map(|z| self.eval(z)).collect();
        let k = self.len();
        for i in 0..k {
            for j in 0..=i {
                let terms: Vec<Complex64> = values
                    .iter()
                    .zip(&rule.nodes)
                    .zip(&rule.weights)
                    .map(|((v, z), w)| v[i] * v[j].conj() * (*w * self.sigma.eval(z)))
                    .collect();
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((pairwise_sum(&terms) - target).norm());
            }
        }
        worst
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let b: Self = serde_json::from_str(text)?;
        let k = b.indices.len();
        if b.factor.len() != k * k || b.indices.iter().any(|a| a.len() != b.dim) {
            return Err(Error::InvalidParameter("basis JSON has inconsistent shapes".into()));
        }
        Ok(b)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Squared L² norm of z^α on the unit ball: πⁿ α! / (n + |α|)!.
pub fn ball_monomial_norm_sqr(alpha: &[u32]) -> f64 {
    let n = alpha.len();
    let deg: u32 = alpha.iter().sum();
    let num: f64 = alpha.iter().map(|&a| (1..=a).map(f64::from).product::<f64>()).product();
    let den: f64 = (1..=(n as u32 + deg)).map(f64::from).product();
    PI.powi(n as i32) * num / den
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::make_ball;
    use crate::quadrature::tensor_rule;
    use proptest::prelude::*;
    use rand::SeedableRng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn ball_kernel_examples() {
        let o = [c(0.0, 0.0)];
        assert!((ball_kernel(1, &o, &o).re - 1.0 / PI).abs() < 1e-15);
        let h = [c(0.5, 0.0)];
        // Σ (k+1)/π x^k at x = 1/4
        let series: f64 = (0..200).map(|k| (k as f64 + 1.0) / PI * 0.25f64.powi(k)).sum();
        assert!((ball_kernel(1, &h, &h).re - series).abs() < 1e-14);
        assert!((series - 16.0 / (9.0 * PI)).abs() < 1e-14);
    }

    #[test]
    fn multi_index_counts() {
        assert_eq!(multi_indices(1, 40).len(), 41);
        assert_eq!(multi_indices(2, 12).len(), 91);
        assert_eq!(multi_indices(3, 2).len(), 10);
        assert_eq!(multi_indices(2, 1), vec![vec![0, 0], vec![1, 0], vec![0, 1]]);
    }

    #[test]
    fn disc_basis_matches_analytic_normalization() {
        let d = make_ball(1).unwrap();
        let rule = tensor_rule(&d, 84, 44).unwrap();
        let b = build_basis(&rule, 40, Sigma::default()).unwrap();
        // the diagonal of the triangular factor is the normalization of z^k;
        // off-diagonal entries are pure roundoff on a circular domain
        let k = b.len();
        for (pos, alpha) in b.indices.iter().enumerate() {
            let want = ((alpha[0] as f64 + 1.0) / PI).sqrt();
            assert!((b.factor[pos * k + pos].norm() - want).abs() <= 1e-6 * want, "{alpha:?}");
            for j in 0..pos {
                assert!(b.factor[pos * k + j].norm() <= 1e-10 * want);
            }
        }
        let finer = tensor_rule(&d, 96, 50).unwrap();
        assert!(b.gram_defect(&finer) < 1e-8);
    }

    #[test]
    fn disc_kernel_expansion_and_projection() {
        let d = make_ball(1).unwrap();
        let rule = tensor_rule(&d, 84, 44).unwrap();
        let b = build_basis(&rule, 40, Sigma::default()).unwrap();
        for (w, z) in [(c(0.7, 0.0), c(0.0, 0.7)), (c(0.5, 0.1), c(-0.3, 0.6)), (c(0.0, 0.0), c(0.2, 0.2))] {
            let want = ball_kernel(1, &[w], &[z]);
            assert!((b.kernel(&[w], &[z]) - want).norm() <= 1e-6 * want.norm());
        }
        // fixes holomorphic polynomials, kills conj(z)
        let f: Vec<Complex64> = rule.nodes.iter().map(|z| c(1.0, 2.0) * z[0].powu(3) - z[0] + 0.5).collect();
        let out = b.apply(&rule, &f).unwrap();
        assert!(out.iter().zip(&f).all(|(a, b)| (a - b).norm() < 1e-8));
        let anti: Vec<Complex64> = rule.nodes.iter().map(|z| z[0].conj()).collect();
        assert!(b.project(&rule, &anti).unwrap().iter().all(|x| x.norm() < 1e-10));
    }

    #[test]
    fn ball2_basis_norms_and_scaling() {
        let d = make_ball(2).unwrap();
        let rule = tensor_rule(&d, 14, 8).unwrap();
        let b = build_basis(&rule, 6, Sigma::default()).unwrap();
        let pos = b.indices.iter().position(|a| a == &vec![1, 0]).unwrap();
        let m = ball_monomial_norm_sqr(&[1, 0]);
        assert!((m - PI * PI / 6.0).abs() < 1e-14);
        let z = [c(0.3, 0.1), c(-0.2, 0.4)];
        let phi = b.eval(&z)[pos];
        assert!((phi.norm() - z[0].norm() / m.sqrt()).abs() < 1e-4 * phi.norm());
        let b2 = build_basis(&rule, 6, Sigma::Constant { value: 2.0 }).unwrap();
        for (x, y) in b.eval(&z).iter().zip(b2.eval(&z)) {
            assert!((x / 2f64.sqrt() - y).norm() < 1e-10);
        }
    }

    #[test]
    fn weighted_basis_is_orthonormal_and_self_adjoint() {
        let d = make_ball(2).unwrap();
        let rule = tensor_rule(&d, 14, 8).unwrap();
        let sigma = Sigma::Exponential { rate: 0.7 };
        let b = build_basis(&rule, 4, sigma).unwrap();
        assert!(b.gram_defect(&rule) < 1e-10);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let f: Vec<Complex64> =
            (0..rule.len()).map(|_| c(crate::domain::standard_normal(&mut rng), crate::domain::standard_normal(&mut rng))).collect();
        let g: Vec<Complex64> = f.iter().rev().map(|x| x * c(0.0, 1.0)).collect();
        let ws: Vec<f64> = rule.nodes.iter().zip(&rule.weights).map(|(z, w)| w * sigma.eval(z)).collect();
        let (bf, bg) = (b.apply(&rule, &f).unwrap(), b.apply(&rule, &g).unwrap());
        let lhs = crate::operators::inner(&ws, &bf, &g);
        let rhs = crate::operators::inner(&ws, &f, &bg);
        assert!((lhs - rhs).norm() < 1e-8 * lhs.norm().max(1.0));
        let bbf = b.apply(&rule, &bf).unwrap();
        assert!(bbf.iter().zip(&bf).all(|(x, y)| (x - y).norm() < 1e-8 * y.norm().max(1.0)));
    }

    #[test]
    fn json_round_trip_and_gates() {
        let d = make_ball(1).unwrap();
        let rule = tensor_rule(&d, 12, 6).unwrap();
        let b = build_basis(&rule, 4, Sigma::default()).unwrap();
        let back = OrthonormalBasis::from_json(&b.to_json().unwrap()).unwrap();
        assert_eq!(back, b);
        assert!(OrthonormalBasis::from_json("{\"dim\":1}").is_err());
        assert!(build_basis(&rule, 4, Sigma::Constant { value: 0.0 }).is_err());
        // fewer nodes than monomials: rank deficient
        let tiny = tensor_rule(&d, 4, 2).unwrap();
        assert!(matches!(build_basis(&tiny, 12, Sigma::default()), Err(Error::IllConditionedGram { .. })));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn ball_kernel_is_hermitian(a in -0.6f64..0.6, b in -0.6f64..0.6, c2 in -0.6f64..0.6, d in -0.6f64..0.6) {
            let w = [c(a, b), c(d, a * 0.5)];
            let z = [c(c2, d), c(b * 0.5, -a * 0.3)];
            let k1 = ball_kernel(2, &w, &z);
            let k2 = ball_kernel(2, &z, &w).conj();
            prop_assert!((k1 - k2).norm() <= 1e-13 * k1.norm());
        }
    }

    #[test]
    fn graded_truncation_matches_lower_cap() {
        let d = make_ball(2).unwrap();
        let rule = tensor_rule(&d, 14, 8).unwrap();
        let full = build_basis(&rule, 6, Sigma::Exponential { rate: 0.5 }).unwrap();
        let low = build_basis(&rule, 3, Sigma::Exponential { rate: 0.5 }).unwrap();
        let (w, z) = ([c(0.2, 0.1), c(-0.3, 0.2)], [c(0.1, -0.4), c(0.3, 0.3)]);
        let a = full.kernel_to_degree(&w, &z, 3);
        assert!((a - low.kernel(&w, &z)).norm() < 1e-10 * a.norm());
    }
}
