//! Complex GMRES without restart, optionally left-preconditioned by the
//! multigrid map `B_J`.
//!
//! Arnoldi with modified Gram-Schmidt and a second orthogonalization pass
//! when cancellation eats the new direction; the least-squares problem is
//! updated by Givens rotations. Convergence is always checked on the true
//! residual `||b - V x||_2 / ||b||_2`, not on the preconditioned Arnoldi
//! estimate, so reported iteration counts mean the same thing with and
//! without preconditioning.

use num_complex::Complex64;

use crate::linalg::{axpy, dot, norm2};
use crate::multigrid::SolveReport;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct KrylovOptions {
    /// Relative true-residual tolerance.
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for KrylovOptions {
    fn default() -> Self {
        Self { tol: 1e-9, max_iters: 400 }
    }
}

/// Solve `V x = b` by GMRES. `apply_v` is the operator, `apply_b` an
/// optional left preconditioner turning the system into `B(V x) = B b`.
///
/// Hitting the iteration budget reports `converged = false`; a genuine
/// Arnoldi breakdown with the residual still above tolerance is
/// [`Error::Stagnation`].
pub fn gmres<V, B>(
    apply_v: &V,
    apply_b: Option<&B>,
    b: &[Complex64],
    options: &KrylovOptions,
) -> Result<(Vec<Complex64>, SolveReport)>
where
    V: Fn(&[Complex64]) -> Result<Vec<Complex64>> + ?Sized,
    B: Fn(&[Complex64]) -> Result<Vec<Complex64>> + ?Sized,
{
    assert!(options.tol > 0.0 && options.max_iters >= 1, "invalid Krylov options");
    let n = b.len();
    let b_norm = norm2(b);
    if b_norm == 0.0 {
        let report = SolveReport {
            iterations: 0,
            residual_history: vec![0.0],
            converged: true,
            final_residual: 0.0,
        };
        return Ok((vec![Complex64::new(0.0, 0.0); n], report));
    }
    let precondition = |v: &[Complex64]| -> Result<Vec<Complex64>> {
        match apply_b {
            Some(p) => p(v),
            None => Ok(v.to_vec()),
        }
    };

    let r0 = precondition(b)?;
    let beta = norm2(&r0);
    if beta == 0.0 {
        return Err(Error::Stagnation { iteration: 0, residual: 1.0 });
    }
    let mut basis: Vec<Vec<Complex64>> = vec![r0.iter().map(|v| v / beta).collect()];
    // Hessenberg columns after their Givens updates, plus the rotations
    let mut h_cols: Vec<Vec<Complex64>> = Vec::new();
    let mut givens: Vec<(Complex64, f64)> = Vec::new();
    let mut g = vec![Complex64::new(0.0, 0.0); options.max_iters + 1];
    g[0] = Complex64::new(beta, 0.0);

    let mut history = vec![1.0];
    let mut best_x = vec![Complex64::new(0.0, 0.0); n];
    let mut best_rel = 1.0;

    for k in 0..options.max_iters {
        let mut w = precondition(&apply_v(&basis[k])?)?;
        let w_norm_before = norm2(&w);
        let mut h = vec![Complex64::new(0.0, 0.0); k + 2];
        for (j, v) in basis.iter().enumerate() {
            let c = dot(v, &w);
            h[j] = c;
            axpy(-c, v, &mut w);
        }
        // one reorthogonalization pass when cancellation was severe
        if norm2(&w) < 0.7 * w_norm_before {
            for (j, v) in basis.iter().enumerate() {
                let c = dot(v, &w);
                h[j] += c;
                axpy(-c, v, &mut w);
            }
        }
        let w_norm = norm2(&w);
        h[k + 1] = Complex64::new(w_norm, 0.0);

        // the accumulated rotations, then a new one zeroing h[k+1]
        for (j, &(c, s)) in givens.iter().enumerate() {
            let t1 = h[j];
            let t2 = h[j + 1];
            h[j] = c.conj() * t1 + t2 * s;
            h[j + 1] = t1 * (-s) + c * t2;
        }
        let (c, s) = make_givens(h[k], h[k + 1].re);
        let t1 = h[k];
        let t2 = h[k + 1];
        h[k] = c.conj() * t1 + t2 * s;
        h[k + 1] = t1 * (-s) + c * t2;
        givens.push((c, s));
        let gk = g[k];
        g[k] = c.conj() * gk;
        g[k + 1] = gk * (-s);
        h_cols.push(h);

        // solve the small triangular system and form the current iterate
        let y = back_substitute(&h_cols, &g, k + 1)?;
        let mut x = vec![Complex64::new(0.0, 0.0); n];
        for (j, yj) in y.iter().enumerate() {
            axpy(*yj, &basis[j], &mut x);
        }
        let vx = apply_v(&x)?;
        let r: Vec<Complex64> = b.iter().zip(&vx).map(|(bi, vi)| bi - vi).collect();
        let rel = norm2(&r) / b_norm;
        history.push(rel);
        if rel < best_rel {
            best_rel = rel;
            best_x = x;
        }
        if rel <= options.tol {
            let report = SolveReport {
                iterations: k + 1,
                residual_history: history,
                converged: true,
                final_residual: rel,
            };
            return Ok((best_x, report));
        }
        if w_norm <= 1e-14 * w_norm_before.max(1e-300) {
            // invariant subspace found but the residual is still large
            return Err(Error::Stagnation { iteration: k + 1, residual: rel });
        }
        basis.push(w.iter().map(|v| v / w_norm).collect());
    }
    let report = SolveReport {
        iterations: options.max_iters,
        residual_history: history,
        converged: false,
        final_residual: best_rel,
    };
    Ok((best_x, report))
}

/// Unitary rotation `[[conj(c), s], [-s, c]]` with real `s` sending
/// `(a, b)` to `(r, 0)` for real `b >= 0`.
fn make_givens(a: Complex64, b: f64) -> (Complex64, f64) {
    if b == 0.0 {
        let an = a.norm();
        if an == 0.0 {
            return (Complex64::new(1.0, 0.0), 0.0);
        }
        return (a / an, 0.0);
    }
    let rho = (a.norm_sqr() + b * b).sqrt();
    (a / rho, b / rho)
}

fn back_substitute(
    h_cols: &[Vec<Complex64>],
    g: &[Complex64],
    size: usize,
) -> Result<Vec<Complex64>> {
    let mut y = vec![Complex64::new(0.0, 0.0); size];
    for i in (0..size).rev() {
        let mut s = g[i];
        for j in (i + 1)..size {
            s -= h_cols[j][i] * y[j];
        }
        let d = h_cols[i][i];
        if d.norm() == 0.0 {
            return Err(Error::SingularSystem);
        }
        y[i] = s / d;
    }
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::ComplexDenseMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    type NoPrec = fn(&[Complex64]) -> Result<Vec<Complex64>>;

    fn random_regular_matrix(n: usize, seed: u64, shift: Complex64) -> ComplexDenseMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut a = ComplexDenseMatrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                a.set(i, j, Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
            }
            a.set(i, i, a.get(i, i) + shift);
        }
        a
    }

    #[test]
    fn identity_converges_in_one_iteration() {
        let b: Vec<Complex64> = (0..12).map(|i| Complex64::new(i as f64, -1.0)).collect();
        let apply = |v: &[Complex64]| Ok(v.to_vec());
        let (x, report) =
            gmres::<_, NoPrec>(&apply, None, &b, &KrylovOptions { tol: 1e-12, max_iters: 10 })
                .unwrap();
        assert_eq!(report.iterations, 1);
        assert!(report.converged);
        let err: f64 = x.iter().zip(&b).map(|(a, c)| (a - c).norm()).sum();
        assert!(err < 1e-12);
    }

    #[test]
    fn solves_random_dense_system() {
        let n = 30;
        let a = random_regular_matrix(n, 9, Complex64::new(5.0, 2.0));
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let x_true: Vec<Complex64> = (0..n)
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let b = a.matvec(&x_true);
        let apply = |v: &[Complex64]| Ok(a.matvec(v));
        let (x, report) =
            gmres::<_, NoPrec>(&apply, None, &b, &KrylovOptions { tol: 1e-10, max_iters: 60 })
                .unwrap();
        assert!(report.converged, "no convergence: {:?}", report.final_residual);
        let err: f64 = x.iter().zip(&x_true).map(|(u, v)| (u - v).norm()).sum();
        assert!(err < 1e-7, "GMRES error {err}");
    }

    #[test]
    fn unpreconditioned_history_is_nonincreasing() {
        // without preconditioning the Arnoldi and true residuals coincide,
        // and GMRES residual norms never increase
        let n = 24;
        let a = random_regular_matrix(n, 10, Complex64::new(3.0, 0.5));
        let b: Vec<Complex64> =
            (0..n).map(|i| Complex64::new(1.0 / (i + 1) as f64, 0.3)).collect();
        let apply = |v: &[Complex64]| Ok(a.matvec(v));
        let (_, report) =
            gmres::<_, NoPrec>(&apply, None, &b, &KrylovOptions { tol: 1e-11, max_iters: 40 })
                .unwrap();
        for w in report.residual_history.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-9), "residual grew: {} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn zero_rhs_short_circuits() {
        let b = vec![Complex64::new(0.0, 0.0); 5];
        let apply = |v: &[Complex64]| Ok(v.to_vec());
        let (x, report) =
            gmres::<_, NoPrec>(&apply, None, &b, &KrylovOptions::default()).unwrap();
        assert_eq!(report.iterations, 0);
        assert!(report.converged && x.iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn jacobi_preconditioning_reduces_iterations() {
        // strongly row-scaled system: plain GMRES crawls, a diagonal
        // preconditioner snaps it back
        let n = 40;
        let mut a = random_regular_matrix(n, 11, Complex64::new(6.0, 0.0));
        for i in 0..n {
            let scale = Complex64::new(1.0 + 50.0 * (i as f64 / n as f64), 0.0);
            for j in 0..n {
                a.set(i, j, a.get(i, j) * scale);
            }
        }
        let b: Vec<Complex64> = (0..n).map(|i| Complex64::new(1.0, i as f64 * 0.1)).collect();
        let apply = |v: &[Complex64]| Ok(a.matvec(v));
        let opts = KrylovOptions { tol: 1e-9, max_iters: 120 };
        let (_, plain) = gmres::<_, NoPrec>(&apply, None, &b, &opts).unwrap();
        let diag: Vec<Complex64> = (0..n).map(|i| a.get(i, i)).collect();
        let prec = move |v: &[Complex64]| -> Result<Vec<Complex64>> {
            Ok(v.iter().zip(&diag).map(|(x, d)| x / d).collect())
        };
        let (_, pre) = gmres(&apply, Some(&prec), &b, &opts).unwrap();
        assert!(pre.converged && plain.converged);
        assert!(
            pre.iterations <= plain.iterations,
            "preconditioning should not hurt here: {} vs {}",
            pre.iterations,
            plain.iterations
        );
    }
}
