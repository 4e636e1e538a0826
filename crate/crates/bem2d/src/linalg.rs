//! Dense linear algebra kernels.
//!
//! Row-major storage throughout. Problem sizes stay in the low thousands,
//! so plain dense kernels are the right tool: partial-pivot LU for the
//! complex coarse solves, Cholesky for the real positive definite norm
//! matrices, and a cyclic Jacobi eigensolver for the symmetric pencils of
//! the spectral studies.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::{Error, Result};

/// Dense complex matrix, row-major.
///
/// Galerkin matrices of the Helmholtz single layer operator are complex
/// symmetric (`V^t = V`, not Hermitian) because the kernel depends on
/// `|x - y|` only.
#[derive(Debug, Clone)]
pub struct ComplexDenseMatrix {
    n: usize,
    data: Vec<Complex64>,
}

impl ComplexDenseMatrix {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![Complex64::new(0.0, 0.0); n * n] }
    }

    pub fn from_real(m: &RealSymmetricMatrix) -> Self {
        let data = m.data.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        Self { n: m.n, data }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        self.data[i * self.n + j] = v;
    }

    pub fn row(&self, i: usize) -> &[Complex64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn rows_mut(&mut self) -> rayon::slice::ChunksMut<'_, Complex64> {
        self.data.par_chunks_mut(self.n)
    }

    pub fn matvec(&self, x: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(x.len(), self.n, "matvec dimension mismatch");
        self.data
            .par_chunks(self.n)
            .map(|row| row.iter().zip(x).map(|(&a, &b)| a * b).sum())
            .collect()
    }

    /// `A^H x` (conjugate transpose), used by norm estimators.
    pub fn matvec_adjoint(&self, x: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(x.len(), self.n, "matvec dimension mismatch");
        let mut out = vec![Complex64::new(0.0, 0.0); self.n];
        for (i, row) in self.data.chunks(self.n).enumerate() {
            let xi = x[i];
            for (o, &a) in out.iter_mut().zip(row) {
                *o += a.conj() * xi;
            }
        }
        out
    }

    /// Largest relative deviation from `A^t = A`.
    pub fn asymmetry(&self) -> f64 {
        let scale = self.data.iter().map(|z| z.norm()).fold(0.0_f64, f64::max).max(1e-300);
        let mut worst = 0.0_f64;
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                worst = worst.max((self.get(i, j) - self.get(j, i)).norm());
            }
        }
        worst / scale
    }

    pub fn scale(&mut self, factor: Complex64) {
        for v in &mut self.data {
            *v *= factor;
        }
    }

    pub fn lu(&self) -> Result<LuFactors> {
        LuFactors::new(self)
    }
}

/// Dense real symmetric matrix, row-major full storage.
#[derive(Debug, Clone)]
pub struct RealSymmetricMatrix {
    n: usize,
    data: Vec<f64>,
}

impl RealSymmetricMatrix {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![0.0; n * n] }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    pub fn rows_mut(&mut self) -> rayon::slice::ChunksMut<'_, f64> {
        self.data.par_chunks_mut(self.n)
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n, "matvec dimension mismatch");
        self.data
            .par_chunks(self.n)
            .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Real matrix applied to a complex vector, component-wise.
    pub fn matvec_complex(&self, x: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(x.len(), self.n, "matvec dimension mismatch");
        self.data
            .par_chunks(self.n)
            .map(|row| row.iter().zip(x).map(|(&a, &b)| b * a).sum())
            .collect()
    }

    /// Largest relative deviation from symmetry.
    pub fn asymmetry(&self) -> f64 {
        let scale = self.data.iter().map(|v| v.abs()).fold(0.0_f64, f64::max).max(1e-300);
        let mut worst = 0.0_f64;
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst / scale
    }

    pub fn scale(&mut self, factor: f64) {
        for v in &mut self.data {
            *v *= factor;
        }
    }

    pub fn cholesky(&self) -> Result<Cholesky> {
        Cholesky::new(self)
    }

    /// Full symmetric eigendecomposition by cyclic Jacobi sweeps.
    ///
    /// Returns eigenvalues in ascending order with matching eigenvectors as
    /// columns of the returned matrix (`vectors[i * n + j]` is component `i`
    /// of eigenvector `j`).
    pub fn symmetric_eigen(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        let n = self.n;
        let mut a = self.data.clone();
        let mut v = vec![0.0; n * n];
        for i in 0..n {
            v[i * n + i] = 1.0;
        }
        let off = |a: &[f64]| -> f64 {
            let mut s = 0.0;
            for i in 0..n {
                for j in (i + 1)..n {
                    s += a[i * n + j] * a[i * n + j];
                }
            }
            s.sqrt()
        };
        let fro = (self.data.iter().map(|x| x * x).sum::<f64>()).sqrt().max(1e-300);
        let mut converged = false;
        for _sweep in 0..40 {
            if off(&a) <= 1e-14 * fro {
                converged = true;
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    let apq = a[p * n + q];
                    if apq.abs() <= 1e-300 {
                        continue;
                    }
                    let app = a[p * n + p];
                    let aqq = a[q * n + q];
                    let theta = (aqq - app) / (2.0 * apq);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let akp = a[k * n + p];
                        let akq = a[k * n + q];
                        a[k * n + p] = c * akp - s * akq;
                        a[k * n + q] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let apk = a[p * n + k];
                        let aqk = a[q * n + k];
                        a[p * n + k] = c * apk - s * aqk;
                        a[q * n + k] = s * apk + c * aqk;
                    }
                    for k in 0..n {
                        let vkp = v[k * n + p];
                        let vkq = v[k * n + q];
                        v[k * n + p] = c * vkp - s * vkq;
                        v[k * n + q] = s * vkp + c * vkq;
                    }
                }
            }
        }
        if !converged && off(&a) > 1e-10 * fro {
            return Err(Error::EigenFailure(format!(
                "Jacobi sweeps stalled, off-norm {:.3e}",
                off(&a) / fro
            )));
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| a[i * n + i].partial_cmp(&a[j * n + j]).unwrap());
        let values: Vec<f64> = order.iter().map(|&i| a[i * n + i]).collect();
        let mut vectors = vec![0.0; n * n];
        for (jnew, &jold) in order.iter().enumerate() {
            for i in 0..n {
                vectors[i * n + jnew] = v[i * n + jold];
            }
        }
        Ok((values, vectors))
    }
}

/// LU factorization with partial pivoting of a complex dense matrix.
#[derive(Debug, Clone)]
pub struct LuFactors {
    n: usize,
    lu: Vec<Complex64>,
    pivots: Vec<usize>,
}

impl LuFactors {
    pub fn new(a: &ComplexDenseMatrix) -> Result<Self> {
        let n = a.n;
        let mut lu = a.data.clone();
        let mut pivots = vec![0usize; n];
        for k in 0..n {
            let mut pivot = k;
            let mut best = lu[k * n + k].norm();
            for i in (k + 1)..n {
                let mag = lu[i * n + k].norm();
                if mag > best {
                    best = mag;
                    pivot = i;
                }
            }
            if best == 0.0 {
                return Err(Error::SingularSystem);
            }
            pivots[k] = pivot;
            if pivot != k {
                for j in 0..n {
                    lu.swap(k * n + j, pivot * n + j);
                }
            }
            let diag = lu[k * n + k];
            for i in (k + 1)..n {
                let factor = lu[i * n + k] / diag;
                lu[i * n + k] = factor;
                for j in (k + 1)..n {
                    let ukj = lu[k * n + j];
                    lu[i * n + j] -= factor * ukj;
                }
            }
        }
        Ok(Self { n, lu, pivots })
    }

    pub fn solve(&self, b: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(b.len(), self.n, "solve dimension mismatch");
        let n = self.n;
        let mut x = b.to_vec();
        // the stored factors are in the final row order, so the whole swap
        // sequence must hit the right-hand side before the L solve
        for k in 0..n {
            x.swap(k, self.pivots[k]);
        }
        for k in 0..n {
            let xk = x[k];
            if xk != Complex64::new(0.0, 0.0) {
                for i in (k + 1)..n {
                    let l = self.lu[i * n + k];
                    x[i] -= l * xk;
                }
            }
        }
        for k in (0..n).rev() {
            let mut s = x[k];
            for j in (k + 1)..n {
                s -= self.lu[k * n + j] * x[j];
            }
            x[k] = s / self.lu[k * n + k];
        }
        x
    }

    /// Cheap condition proxy: ratio of extreme `|U_ii|`. Used only to warn
    /// about a coarse wave number sitting near an interior eigenvalue.
    pub fn condition_proxy(&self) -> f64 {
        let mut lo = f64::INFINITY;
        let mut hi = 0.0_f64;
        for k in 0..self.n {
            let d = self.lu[k * self.n + k].norm();
            lo = lo.min(d);
            hi = hi.max(d);
        }
        if lo == 0.0 {
            f64::INFINITY
        } else {
            hi / lo
        }
    }
}

/// Cholesky factorization `A = L L^t` of a real SPD matrix.
#[derive(Debug, Clone)]
pub struct Cholesky {
    n: usize,
    l: Vec<f64>,
}

impl Cholesky {
    pub fn new(a: &RealSymmetricMatrix) -> Result<Self> {
        let n = a.n;
        let mut l = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let mut s = a.get(i, j);
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k];
                }
                if i == j {
                    if s <= 0.0 {
                        return Err(Error::SingularSystem);
                    }
                    l[i * n + i] = s.sqrt();
                } else {
                    l[i * n + j] = s / l[j * n + j];
                }
            }
        }
        Ok(Self { n, l })
    }

    pub fn solve_complex(&self, b: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(b.len(), self.n, "solve dimension mismatch");
        let n = self.n;
        let mut x = b.to_vec();
        for i in 0..n {
            let mut s = x[i];
            for k in 0..i {
                s -= x[k] * self.l[i * n + k];
            }
            x[i] = s / self.l[i * n + i];
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in (i + 1)..n {
                s -= x[k] * self.l[k * n + i];
            }
            x[i] = s / self.l[i * n + i];
        }
        x
    }

    /// Solve `L x = b` (forward substitution).
    pub fn solve_l(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x = b.to_vec();
        for i in 0..n {
            let mut s = x[i];
            for k in 0..i {
                s -= x[k] * self.l[i * n + k];
            }
            x[i] = s / self.l[i * n + i];
        }
        x
    }

    /// Multiply by `L` (lower factor), `y = L x`.
    pub fn apply_l(&self, x: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut y = vec![0.0; n];
        for i in 0..n {
            let mut s = 0.0;
            for k in 0..=i {
                s += self.l[i * n + k] * x[k];
            }
            y[i] = s;
        }
        y
    }

    /// Solve `L^t x = b`.
    pub fn solve_lt(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x = b.to_vec();
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in (i + 1)..n {
                s -= x[k] * self.l[k * n + i];
            }
            x[i] = s / self.l[i * n + i];
        }
        x
    }
}

pub fn norm2(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn norm2_real(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Conjugated inner product `<a, b> = sum conj(a_i) b_i`.
pub fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn axpy(alpha: Complex64, x: &[Complex64], y: &mut [Complex64]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_complex_matrix(n: usize, seed: u64) -> ComplexDenseMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut a = ComplexDenseMatrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                a.set(i, j, Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
            }
            // diagonal dominance keeps the test system comfortably regular
            let d = a.get(i, i) + Complex64::new(4.0, 1.0);
            a.set(i, i, d);
        }
        a
    }

    #[test]
    fn lu_solves_random_system() {
        let a = random_complex_matrix(40, 7);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x_true: Vec<Complex64> = (0..40)
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let b = a.matvec(&x_true);
        let lu = a.lu().unwrap();
        let x = lu.solve(&b);
        let err: f64 = x.iter().zip(&x_true).map(|(u, v)| (u - v).norm()).sum();
        assert!(err < 1e-10, "LU solve error {err}");
    }

    #[test]
    fn cholesky_roundtrip() {
        let n = 25;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut m = RealSymmetricMatrix::zeros(n);
        for i in 0..n {
            for j in 0..=i {
                let v = rng.gen_range(-0.3..0.3);
                m.set(i, j, v);
                m.set(j, i, v);
            }
            m.set(i, i, m.get(i, i) + 5.0);
        }
        let ch = m.cholesky().unwrap();
        let b: Vec<Complex64> =
            (0..n).map(|i| Complex64::new(i as f64, -(i as f64) * 0.5)).collect();
        let x = ch.solve_complex(&b);
        let back = m.matvec_complex(&x);
        let err: f64 = back.iter().zip(&b).map(|(u, v)| (u - v).norm()).sum();
        assert!(err < 1e-9, "Cholesky solve error {err}");
    }

    #[test]
    fn jacobi_recovers_known_spectrum() {
        // diag(1, 2, 3) rotated by an orthogonal similarity
        let n = 3;
        let q = [
            [2.0 / 3.0, -2.0 / 3.0, 1.0 / 3.0],
            [2.0 / 3.0, 1.0 / 3.0, -2.0 / 3.0],
            [1.0 / 3.0, 2.0 / 3.0, 2.0 / 3.0],
        ];
        let d = [1.0, 2.0, 3.0];
        let mut m = RealSymmetricMatrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                let mut s = 0.0;
                for k in 0..n {
                    s += q[i][k] * d[k] * q[j][k];
                }
                m.set(i, j, s);
            }
        }
        let (values, vectors) = m.symmetric_eigen().unwrap();
        for (k, &expect) in d.iter().enumerate() {
            assert!((values[k] - expect).abs() < 1e-12);
            // residual ||A v - lambda v||
            let v: Vec<f64> = (0..n).map(|i| vectors[i * n + k]).collect();
            let av = m.matvec(&v);
            let res: f64 =
                av.iter().zip(&v).map(|(a, b)| (a - values[k] * b).powi(2)).sum::<f64>().sqrt();
            assert!(res < 1e-12);
        }
    }
}
