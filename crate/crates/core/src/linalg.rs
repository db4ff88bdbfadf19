//! Small dense complex vectors and matrices (n ≤ 4 stays on the stack).

use std::ops::{Index, IndexMut};

use num_complex::Complex;
use smallvec::SmallVec;

use crate::scalar::Real;

/// A point of ℂⁿ, or the coefficients of a (1,0)-form at a point.
pub type CVec<T> = SmallVec<[Complex<T>; 4]>;

pub fn czero<T: Real>() -> Complex<T> {
    Complex::new(T::zero(), T::zero())
}

pub fn creal<T: Real>(x: T) -> Complex<T> {
    Complex::new(x, T::zero())
}

pub fn zeros<T: Real>(n: usize) -> CVec<T> {
    smallvec::smallvec![czero(); n]
}

/// Bilinear pairing Σ aⱼ bⱼ (no conjugation), the ⟨η, w − z⟩ of the kernel formulas.
pub fn pair<T: Real>(a: &[Complex<T>], b: &[Complex<T>]) -> Complex<T> {
    a.iter().zip(b).fold(czero(), |acc, (x, y)| acc + x * y)
}

/// Hermitian product Σ aⱼ conj(bⱼ).
pub fn hdot<T: Real>(a: &[Complex<T>], b: &[Complex<T>]) -> Complex<T> {
    a.iter().zip(b).fold(czero(), |acc, (x, y)| acc + x * y.conj())
}

pub fn norm_sqr<T: Real>(a: &[Complex<T>]) -> T {
    a.iter().fold(T::zero(), |acc, x| acc + x.norm_sqr())
}

pub fn sub<T: Real>(a: &[Complex<T>], b: &[Complex<T>]) -> CVec<T> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn add<T: Real>(a: &[Complex<T>], b: &[Complex<T>]) -> CVec<T> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn scale<T: Real>(a: &[Complex<T>], s: Complex<T>) -> CVec<T> {
    a.iter().map(|x| x * s).collect()
}

/// Row-major square complex matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct CMat<T: Real> {
    n: usize,
    data: SmallVec<[Complex<T>; 16]>,
}

impl<T: Real> CMat<T> {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: smallvec::smallvec![czero(); n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = creal(T::one());
        }
        m
    }

    pub fn diag(d: &[T]) -> Self {
        let mut m = Self::zeros(d.len());
        for (i, &x) in d.iter().enumerate() {
            m[(i, i)] = creal(x);
        }
        m
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> Complex<T>) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn conj_transpose(&self) -> Self {
        Self::from_fn(self.n, |i, j| self[(j, i)].conj())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.n, |i, j| self[(j, i)])
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.data
            .iter()
            .zip(&other.data)
            .fold(T::zero(), |acc, (a, b)| acc.max((a - b).norm()))
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |acc, a| acc.max(a.norm()))
    }

    pub fn mul_vec(&self, v: &[Complex<T>]) -> CVec<T> {
        (0..self.n)
            .map(|i| (0..self.n).fold(czero(), |acc, j| acc + self[(i, j)] * v[j]))
            .collect()
    }

    /// vᵀ M v with no conjugation.
    pub fn quad(&self, v: &[Complex<T>]) -> Complex<T> {
        pair(v, &self.mul_vec(v))
    }

    /// v* M v.
    pub fn hquad(&self, v: &[Complex<T>]) -> Complex<T> {
        let mv = self.mul_vec(v);
        v.iter().zip(&mv).fold(czero(), |acc, (a, b)| acc + a.conj() * b)
    }

    pub fn scaled(&self, s: Complex<T>) -> Self {
        Self {
            n: self.n,
            data: self.data.iter().map(|x| x * s).collect(),
        }
    }

    pub fn plus(&self, other: &Self) -> Self {
        Self {
            n: self.n,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        }
    }

    /// Determinant by Gaussian elimination with partial pivoting.
    pub fn det(&self) -> Complex<T> {
        let n = self.n;
        let mut a = self.data.clone();
        let mut det = creal(T::one());
        for col in 0..n {
            let (piv, best) = (col..n)
                .map(|r| (r, a[r * n + col].norm()))
                .fold((col, -T::one()), |acc, x| if x.1 > acc.1 { x } else { acc });
            if best == T::zero() {
                return czero();
            }
            if piv != col {
                for k in 0..n {
                    a.swap(col * n + k, piv * n + k);
                }
                det = -det;
            }
            let p = a[col * n + col];
            det *= p;
            for r in col + 1..n {
                let f = a[r * n + col] / p;
                if f != czero() {
                    for k in col..n {
                        let v = a[col * n + k];
                        a[r * n + k] -= f * v;
                    }
                }
            }
        }
        det
    }

    fn minor(&self, skip_r: usize, skip_c: usize) -> Self {
        let n = self.n - 1;
        let mut m = Self::zeros(n);
        let mut ri = 0;
        for r in 0..self.n {
            if r == skip_r {
                continue;
            }
            let mut ci = 0;
            for c in 0..self.n {
                if c == skip_c {
                    continue;
                }
                m[(ri, ci)] = self[(r, c)];
                ci += 1;
            }
            ri += 1;
        }
        m
    }

    /// Classical adjugate, adj(M) M = det(M) I. Well defined for singular M.
    pub fn adjugate(&self) -> Self {
        if self.n == 1 {
            return Self::identity(1);
        }
        Self::from_fn(self.n, |i, j| {
            let sign = if (i + j) % 2 == 0 { T::one() } else { -T::one() };
            self.minor(j, i).det() * sign
        })
    }

    /// ‖M − M*‖_max.
    pub fn hermitian_defect(&self) -> T {
        self.max_abs_diff(&self.conj_transpose())
    }

    /// Eigenvalues of the Hermitian part, ascending.
    ///
    /// Uses the real symmetric embedding [[A, −B], [B, A]] of A + iB and cyclic
    /// Jacobi rotations; each eigenvalue of the embedding appears twice.
    pub fn hermitian_eigenvalues(&self) -> Vec<T> {
        let n = self.n;
        let m = 2 * n;
        let mut s = vec![T::zero(); m * m];
        let half = T::lit(0.5);
        for i in 0..n {
            for j in 0..n {
                let h = (self[(i, j)] + self[(j, i)].conj()) * half;
                s[i * m + j] = h.re;
                s[(i + n) * m + j + n] = h.re;
                s[i * m + j + n] = -h.im;
                s[(i + n) * m + j] = h.im;
            }
        }
        jacobi_symmetric(&mut s, m);
        let mut ev: Vec<T> = (0..m).map(|i| s[i * m + i]).collect();
        ev.sort_by(|a, b| a.partial_cmp(b).expect("finite eigenvalue"));
        ev.into_iter().step_by(2).collect()
    }
}

fn jacobi_symmetric<T: Real>(a: &mut [T], m: usize) {
    for _sweep in 0..64 {
        let mut off = T::zero();
        let mut diag = T::zero();
        for i in 0..m {
            for j in 0..m {
                if i != j {
                    off += a[i * m + j] * a[i * m + j];
                } else {
                    diag += a[i * m + j] * a[i * m + j];
                }
            }
        }
        if off <= T::epsilon() * T::epsilon() * diag.max(T::min_positive_value()) {
            return;
        }
        for p in 0..m {
            for q in p + 1..m {
                let apq = a[p * m + q];
                if apq == T::zero() {
                    continue;
                }
                let app = a[p * m + p];
                let aqq = a[q * m + q];
                let theta = (aqq - app) / (T::lit(2.0) * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..m {
                    let akp = a[k * m + p];
                    let akq = a[k * m + q];
                    a[k * m + p] = c * akp - s * akq;
                    a[k * m + q] = s * akp + c * akq;
                }
                for k in 0..m {
                    let apk = a[p * m + k];
                    let aqk = a[q * m + k];
                    a[p * m + k] = c * apk - s * aqk;
                    a[q * m + k] = s * apk + c * aqk;
                }
            }
        }
    }
}

impl<T: Real> Index<(usize, usize)> for CMat<T> {
    type Output = Complex<T>;
    fn index(&self, (i, j): (usize, usize)) -> &Complex<T> {
        &self.data[i * self.n + j]
    }
}

impl<T: Real> IndexMut<(usize, usize)> for CMat<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex<T> {
        &mut self.data[i * self.n + j]
    }
}

/// Determinant of a general real matrix (row-major, m×m).
pub fn real_det(a: &[f64], m: usize) -> f64 {
    let mut a = a.to_vec();
    let mut det = 1.0;
    for col in 0..m {
        let piv = (col..m)
            .max_by(|&x, &y| a[x * m + col].abs().total_cmp(&a[y * m + col].abs()))
            .expect("nonempty");
        if a[piv * m + col] == 0.0 {
            return 0.0;
        }
        if piv != col {
            for k in 0..m {
                a.swap(col * m + k, piv * m + k);
            }
            det = -det;
        }
        let p = a[col * m + col];
        det *= p;
        for r in col + 1..m {
            let f = a[r * m + col] / p;
            for k in col..m {
                a[r * m + k] -= f * a[col * m + k];
            }
        }
    }
    det
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    #[test]
    fn det_and_adjugate() {
        let m = CMat::from_fn(3, |i, j| c((i * 3 + j) as f64 + 1.0, (i as f64) - (j as f64) * 0.5));
        let adj = m.adjugate();
        let det = m.det();
        for i in 0..3 {
            for j in 0..3 {
                let s = (0..3).fold(czero::<f64>(), |acc, k| acc + adj[(i, k)] * m[(k, j)]);
                let want = if i == j { det } else { czero() };
                assert!((s - want).norm() < 1e-10, "{i}{j}");
            }
        }
        let two = CMat::from_fn(2, |i, j| [[c(1.0, 0.0), c(2.0, 1.0)], [c(0.0, 3.0), c(4.0, 0.0)]][i][j]);
        assert!((two.det() - (c(4.0, 0.0) - c(2.0, 1.0) * c(0.0, 3.0))).norm() < 1e-14);
    }

    #[test]
    fn hermitian_eigenvalues_match_closed_form() {
        // [[2, i], [-i, 2]] has eigenvalues 1 and 3.
        let h = CMat::from_fn(2, |i, j| match (i, j) {
            (0, 1) => c(0.0, 1.0),
            (1, 0) => c(0.0, -1.0),
            _ => c(2.0, 0.0),
        });
        let ev = h.hermitian_eigenvalues();
        assert!((ev[0] - 1.0).abs() < 1e-12 && (ev[1] - 3.0).abs() < 1e-12, "{ev:?}");
        let ev32 = CMat::<f32>::diag(&[0.25, 1.0]).hermitian_eigenvalues();
        assert!((ev32[0] - 0.25).abs() < 1e-6);
    }

    #[test]
    fn real_det_permutation() {
        assert!((real_det(&[0.0, 1.0, 1.0, 0.0], 2) + 1.0).abs() < 1e-15);
    }
}
