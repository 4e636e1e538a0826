//! Multigrid for the single layer equation, smoothed through the weak
//! inner product.
//!
//! The V-cycle is the matrix recursion
//!
//! ```text
//! Mg_1(s, b) = V_1^{-1} b
//! s_1        = s + lam_k^{-1} H_k^{-1} A_k^t (b - V_k s)
//! Mg_k(s, b) = s_1 + C_{k-1}^t Mg_{k-1}(0, C_{k-1}(b - V_k s_1))
//! ```
//!
//! with one Richardson pre-smoothing step damped by an upper bound `lam_k`
//! for the largest generalized eigenvalue of `Lambda A y = lambda H y`; an
//! optional post-smoothing step repeats the identical update. Iterating
//! `s <- Mg_J(s, b)` is the linear solver, and `B_J b = Mg_J(0, b)` the
//! preconditioner handed to GMRES. Solves never invert `A_k`: only
//! products with `A_k^t` appear.

use std::sync::Arc;

use num_complex::Complex64;

use crate::assembly::{assemble_helmholtz_with, laplace_matrix, AssemblyOptions};
use crate::geometry::{MeshHierarchy, MeshLevel, RestrictionMatrix};
use crate::linalg::{norm2, ComplexDenseMatrix, LuFactors, RealSymmetricMatrix};
use crate::weak_product::{build_weak_operator, WeakProductOperator};
use crate::{Error, Result};

/// How the smoother obtains its damping.
#[derive(Debug, Clone, Copy)]
pub enum LambdaStrategy {
    /// Power-method estimate of the largest generalized eigenvalue times a
    /// 1.05 safety factor (the default).
    PowerMethod { tol: f64, max_iters: usize },
    /// Replace `lam_k^{-1} H_k^{-1}` by a user constant; sensible on
    /// uniform meshes where both factors scale like `h_k`, and bypasses
    /// the eigenvalue computation in the smoothing path.
    UniformConstant { value: f64 },
}

impl Default for LambdaStrategy {
    fn default() -> Self {
        LambdaStrategy::PowerMethod { tol: 1e-6, max_iters: 200 }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct MgOptions {
    pub pre_smooth_steps: usize,
    pub post_smooth: bool,
    pub lambda_strategy: LambdaStrategy,
}

impl Default for MgOptions {
    fn default() -> Self {
        Self { pre_smooth_steps: 1, post_smooth: false, lambda_strategy: LambdaStrategy::default() }
    }
}

/// Everything one level contributes to the cycle.
#[derive(Debug)]
pub struct LevelOperators {
    pub mesh: MeshLevel,
    /// System matrix: Helmholtz `V_k`, or the complexified Laplace matrix
    /// for the positive definite problem.
    pub system: ComplexDenseMatrix,
    /// Laplace matrix `Lambda_k`; the smoothing eigenvalue always comes
    /// from the definite form, never from `V_k`.
    pub laplace: RealSymmetricMatrix,
    pub weak: WeakProductOperator,
    /// Upper bound for the largest generalized eigenvalue (after the
    /// safety factor).
    pub smoothing_bound: f64,
    /// `C_{k-1}` linking this level to the next coarser one; absent on the
    /// coarsest level of the hierarchy.
    pub restriction: Option<RestrictionMatrix>,
}

impl LevelOperators {
    pub fn dim(&self) -> usize {
        self.system.dim()
    }

    /// Assemble every operator of one level. `kappa = None` builds the
    /// positive definite Laplace problem.
    pub fn assemble(
        mesh: &MeshLevel,
        kappa: Option<f64>,
        restriction: Option<RestrictionMatrix>,
        assembly: AssemblyOptions,
        lambda: LambdaStrategy,
    ) -> Result<Self> {
        let laplace = match &mesh.curve {
            crate::geometry::CurveKind::Polygonal { .. } => {
                crate::assembly::assemble_laplace_with(mesh, assembly)?
            }
            crate::geometry::CurveKind::Circular { .. } => laplace_matrix(mesh)?,
        };
        let system = match kappa {
            Some(k) => assemble_helmholtz_with(mesh, k, assembly)?,
            None => ComplexDenseMatrix::from_real(&laplace),
        };
        let weak = build_weak_operator(mesh)?;
        let smoothing_bound = match lambda {
            LambdaStrategy::PowerMethod { tol, max_iters } => {
                estimate_lambda(&laplace, &weak, tol, max_iters)
            }
            // still estimated (cheap next to assembly) so studies can
            // report the lambda scaling even under the constant shortcut
            LambdaStrategy::UniformConstant { .. } => estimate_lambda(&laplace, &weak, 1e-6, 200),
        };
        Ok(Self { mesh: mesh.clone(), system, laplace, weak, smoothing_bound, restriction })
    }
}

/// Largest generalized eigenvalue of `Lambda A y = lambda H y`, estimated
/// by power iteration on `H^{-1} Lambda A` with the Rayleigh quotient
/// `(y* A* Lambda A y) / (y* A* H y)`, then multiplied by a 1.05 safety
/// factor so the smoother damping stays above the true eigenvalue.
///
/// Stops when the quotient moves by less than `tol` relatively; hitting
/// `max_iters` logs a warning and returns the last estimate.
pub fn estimate_lambda(
    laplace: &RealSymmetricMatrix,
    weak: &WeakProductOperator,
    tol: f64,
    max_iters: usize,
) -> f64 {
    use rand::{Rng, SeedableRng};
    let n = laplace.dim();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x5eed);
    let mut y: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let lengths = weak.lengths();
    let mut rho_prev = 0.0;
    let mut rho = 0.0;
    let mut converged = false;
    for _ in 0..max_iters {
        let w = weak.apply_real(&y); // A y
        let z = laplace.matvec(&w); // Lambda A y
        let num: f64 = w.iter().zip(&z).map(|(a, b)| a * b).sum();
        let den: f64 = w.iter().zip(lengths).zip(&y).map(|((a, &l), b)| a * l * b).sum();
        rho = num / den;
        if rho_prev > 0.0 && (rho - rho_prev).abs() <= tol * rho.abs() {
            converged = true;
            break;
        }
        rho_prev = rho;
        // next iterate: H^{-1} Lambda A y, normalized
        let mut next: Vec<f64> = z.iter().zip(lengths).map(|(v, &l)| v / l).collect();
        let scale = next.iter().map(|v| v.abs()).fold(0.0_f64, f64::max).max(1e-300);
        for v in &mut next {
            *v /= scale;
        }
        y = next;
    }
    if !converged {
        log::warn!("lambda power iteration hit its iteration budget; using last estimate {rho}");
    }
    1.05 * rho
}

/// One Richardson smoothing step
/// `s_1 = s + lam^{-1} H^{-1} A^t (b - V s)`.
pub fn smooth(
    level: &LevelOperators,
    options: &MgOptions,
    s: &[Complex64],
    b: &[Complex64],
) -> Result<Vec<Complex64>> {
    let n = level.dim();
    if s.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: s.len() });
    }
    if b.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: b.len() });
    }
    let vs = level.system.matvec(s);
    let residual: Vec<Complex64> = b.iter().zip(&vs).map(|(bi, vi)| bi - vi).collect();
    let t = level.weak.apply_transpose(&residual)?;
    let out = match options.lambda_strategy {
        LambdaStrategy::PowerMethod { .. } => {
            let lam = level.smoothing_bound;
            let lengths = level.weak.lengths();
            s.iter().zip(&t).zip(lengths).map(|((si, ti), &li)| si + ti / (lam * li)).collect()
        }
        LambdaStrategy::UniformConstant { value } => {
            s.iter().zip(&t).map(|(si, ti)| si + ti * value).collect()
        }
    };
    Ok(out)
}

/// The assembled multilevel scheme over a contiguous run of levels.
pub struct MultigridSetup {
    levels: Vec<Arc<LevelOperators>>,
    coarse_lu: LuFactors,
    pub options: MgOptions,
}

impl MultigridSetup {
    /// Wire existing level operators into a scheme; index 0 is the
    /// coarsest level and its system matrix is factored for the direct
    /// solve.
    pub fn from_levels(levels: Vec<Arc<LevelOperators>>, options: MgOptions) -> Result<Self> {
        assert!(!levels.is_empty(), "need at least one level");
        for pair in levels.windows(2) {
            let r = pair[1]
                .restriction
                .as_ref()
                .ok_or(Error::DimensionMismatch { expected: pair[0].dim(), got: 0 })?;
            if r.n_coarse() != pair[0].dim() || r.n_fine() != pair[1].dim() {
                return Err(Error::DimensionMismatch {
                    expected: pair[1].dim(),
                    got: r.n_fine(),
                });
            }
        }
        let coarse_lu = levels[0].system.lu().map_err(|_| Error::CoarseSolveFailure)?;
        let cond = coarse_lu.condition_proxy();
        if cond > 1e8 {
            log::warn!(
                "coarse system condition proxy {cond:.2e}: kappa^2 may sit near an interior eigenvalue"
            );
        }
        Ok(Self { levels, coarse_lu, options })
    }

    /// Assemble all levels of a hierarchy. `kappa = None` builds the
    /// positive definite Laplace problem.
    pub fn assemble(
        hierarchy: &MeshHierarchy,
        kappa: Option<f64>,
        options: MgOptions,
        assembly: AssemblyOptions,
    ) -> Result<Self> {
        let mut levels = Vec::with_capacity(hierarchy.level_count());
        for (k, mesh) in hierarchy.levels.iter().enumerate() {
            let restriction =
                if k == 0 { None } else { Some(hierarchy.restrictions[k - 1].clone()) };
            levels.push(Arc::new(LevelOperators::assemble(
                mesh,
                kappa,
                restriction,
                assembly,
                options.lambda_strategy,
            )?));
        }
        Self::from_levels(levels, options)
    }

    /// Scheme over the level window `lo..=hi`, sharing the operators.
    pub fn window(&self, lo: usize, hi: usize, options: MgOptions) -> Result<Self> {
        Self::from_levels(self.levels[lo..=hi].to_vec(), options)
    }

    pub fn levels(&self) -> &[Arc<LevelOperators>] {
        &self.levels
    }

    pub fn level_count(&self) -> usize {
        self.levels.len()
    }

    pub fn finest(&self) -> &LevelOperators {
        self.levels.last().expect("nonempty")
    }

    pub fn dim(&self) -> usize {
        self.finest().dim()
    }

    /// `Mg_k(s, b)` at level index `k` (0 = coarsest in this setup).
    pub fn vcycle(&self, k: usize, s: &[Complex64], b: &[Complex64]) -> Result<Vec<Complex64>> {
        if k == 0 {
            // direct coarse solve; the input iterate does not enter
            return Ok(self.coarse_lu.solve(b));
        }
        let level = &self.levels[k];
        let mut s1 = s.to_vec();
        for _ in 0..self.options.pre_smooth_steps.max(1) {
            s1 = smooth(level, &self.options, &s1, b)?;
        }
        let vs1 = level.system.matvec(&s1);
        let residual: Vec<Complex64> = b.iter().zip(&vs1).map(|(bi, vi)| bi - vi).collect();
        let restriction = level.restriction.as_ref().expect("validated in from_levels");
        let coarse_b = restriction.restrict(&residual);
        let zero = vec![Complex64::new(0.0, 0.0); coarse_b.len()];
        let correction = self.vcycle(k - 1, &zero, &coarse_b)?;
        let prolonged = restriction.prolong(&correction);
        for (si, pi) in s1.iter_mut().zip(&prolonged) {
            *si += pi;
        }
        if self.options.post_smooth {
            s1 = smooth(level, &self.options, &s1, b)?;
        }
        Ok(s1)
    }

    /// The preconditioner map `B_J b = Mg_J(0, b)`; linear in `b`.
    pub fn apply_preconditioner(&self, b: &[Complex64]) -> Result<Vec<Complex64>> {
        let zero = vec![Complex64::new(0.0, 0.0); b.len()];
        self.vcycle(self.level_count() - 1, &zero, b)
    }
}

/// Outcome of an iterative solve.
#[derive(Debug, Clone)]
pub struct SolveReport {
    pub iterations: usize,
    /// Relative Euclidean residual norms, starting with the initial 1.0.
    pub residual_history: Vec<f64>,
    pub converged: bool,
    pub final_residual: f64,
}

/// Residual growth factor treated as divergence.
const DIVERGENCE_FACTOR: f64 = 1e3;

/// Linear multigrid iteration `sigma_{i+1} = Mg_J(sigma_i, b)` from the
/// zero initial guess, stopping on `||b - V sigma||_2 / ||b||_2 <= tol`.
///
/// Divergence (residual growing beyond 1e3 times the initial one) is not
/// an error: the report comes back with `converged = false`, which is the
/// expected outcome for under-resolved coarse grids at high wave numbers.
pub fn mg_solve(
    setup: &MultigridSetup,
    b: &[Complex64],
    tol: f64,
    max_iters: usize,
) -> Result<(Vec<Complex64>, SolveReport)> {
    let n = setup.dim();
    if b.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: b.len() });
    }
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
    let top = setup.level_count() - 1;
    let system = &setup.finest().system;
    let mut x = vec![Complex64::new(0.0, 0.0); n];
    let mut history = vec![1.0];
    let mut converged = false;
    let mut rel = 1.0;
    let mut iterations = 0;
    for it in 1..=max_iters {
        x = setup.vcycle(top, &x, b)?;
        let vx = system.matvec(&x);
        let r: Vec<Complex64> = b.iter().zip(&vx).map(|(bi, vi)| bi - vi).collect();
        rel = norm2(&r) / b_norm;
        history.push(rel);
        iterations = it;
        if rel <= tol {
            converged = true;
            break;
        }
        if !rel.is_finite() || rel > DIVERGENCE_FACTOR {
            break;
        }
    }
    let report =
        SolveReport { iterations, residual_history: history, converged, final_residual: rel };
    Ok((x, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_hierarchy, build_polygon, Boundary, Point2};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn square_setup(kappa: Option<f64>, levels: usize, options: MgOptions) -> MultigridSetup {
        let p = build_polygon(&[
            Point2::new(0.0, 0.0),
            Point2::new(0.5, 0.0),
            Point2::new(0.5, 0.5),
            Point2::new(0.0, 0.5),
        ])
        .unwrap();
        let h = build_hierarchy(&Boundary::Polygon(p), &[2, 2, 2, 2], levels).unwrap();
        MultigridSetup::assemble(&h, kappa, options, AssemblyOptions::default()).unwrap()
    }

    fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<Complex64> {
        (0..n)
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect()
    }

    #[test]
    fn smoother_fixed_point_and_zero_start() {
        let setup = square_setup(Some(2.1), 2, MgOptions::default());
        let level = setup.finest();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = random_vec(&mut rng, level.dim());
        let b = level.system.matvec(&s);
        // zero residual leaves the iterate untouched
        let s1 = smooth(level, &setup.options, &s, &b).unwrap();
        assert_eq!(s1, s);
        // from zero the update is lam^{-1} H^{-1} A^t b
        let zero = vec![Complex64::new(0.0, 0.0); level.dim()];
        let s2 = smooth(level, &setup.options, &zero, &b).unwrap();
        let t = level.weak.apply_transpose(&b).unwrap();
        for ((v, ti), &li) in s2.iter().zip(&t).zip(level.weak.lengths()) {
            let expect = ti / (level.smoothing_bound * li);
            assert!((v - expect).norm() < 1e-14);
        }
    }

    #[test]
    fn vcycle_consistency_at_every_level() {
        let setup = square_setup(Some(2.1), 3, MgOptions::default());
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for k in 0..setup.level_count() {
            let n = setup.levels()[k].dim();
            let s = random_vec(&mut rng, n);
            let b = setup.levels()[k].system.matvec(&s);
            let out = setup.vcycle(k, &s, &b).unwrap();
            let err: f64 = out.iter().zip(&s).map(|(a, c)| (a - c).norm()).sum();
            let scale: f64 = s.iter().map(|v| v.norm()).sum();
            assert!(err <= 1e-12 * scale, "consistency broken at level {k}: {err}");
        }
    }

    #[test]
    fn vcycle_is_linear() {
        let setup = square_setup(Some(2.1), 3, MgOptions::default());
        let top = setup.level_count() - 1;
        let n = setup.dim();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (s, t) = (random_vec(&mut rng, n), random_vec(&mut rng, n));
        let (b, c) = (random_vec(&mut rng, n), random_vec(&mut rng, n));
        let alpha = Complex64::new(0.7, -0.2);
        let beta = Complex64::new(-1.3, 0.4);
        let lhs_in: Vec<Complex64> =
            s.iter().zip(&t).map(|(si, ti)| alpha * si + beta * ti).collect();
        let rhs_in: Vec<Complex64> =
            b.iter().zip(&c).map(|(bi, ci)| alpha * bi + beta * ci).collect();
        let combined = setup.vcycle(top, &lhs_in, &rhs_in).unwrap();
        let first = setup.vcycle(top, &s, &b).unwrap();
        let second = setup.vcycle(top, &t, &c).unwrap();
        let mut err = 0.0_f64;
        let mut scale = 0.0_f64;
        for i in 0..n {
            err = err.max((combined[i] - (alpha * first[i] + beta * second[i])).norm());
            scale = scale.max(combined[i].norm());
        }
        assert!(err <= 1e-12 * scale.max(1.0), "linearity violated: {err}");
    }

    #[test]
    fn coarsest_level_is_a_direct_solve() {
        let setup = square_setup(Some(2.1), 2, MgOptions::default());
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n0 = setup.levels()[0].dim();
        let b = random_vec(&mut rng, n0);
        let junk = random_vec(&mut rng, n0);
        let x1 = setup.vcycle(0, &junk, &b).unwrap();
        let back = setup.levels()[0].system.matvec(&x1);
        let err: f64 = back.iter().zip(&b).map(|(a, c)| (a - c).norm()).sum();
        assert!(err < 1e-10, "coarse solve residual {err}");
    }

    #[test]
    fn preconditioner_is_linear_and_zero_preserving() {
        let setup = square_setup(Some(2.1), 3, MgOptions::default());
        let n = setup.dim();
        let zero = vec![Complex64::new(0.0, 0.0); n];
        let out = setup.apply_preconditioner(&zero).unwrap();
        assert!(norm2(&out) == 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let b = random_vec(&mut rng, n);
        let c = random_vec(&mut rng, n);
        let alpha = Complex64::new(0.3, 1.1);
        let mixed: Vec<Complex64> = b.iter().zip(&c).map(|(x, y)| x + alpha * y).collect();
        let lhs = setup.apply_preconditioner(&mixed).unwrap();
        let rb = setup.apply_preconditioner(&b).unwrap();
        let rc = setup.apply_preconditioner(&c).unwrap();
        let mut err = 0.0_f64;
        for i in 0..n {
            err = err.max((lhs[i] - (rb[i] + alpha * rc[i])).norm());
        }
        assert!(err < 1e-11, "preconditioner linearity {err}");
    }

    #[test]
    fn zero_rhs_converges_immediately() {
        let setup = square_setup(Some(2.1), 2, MgOptions::default());
        let b = vec![Complex64::new(0.0, 0.0); setup.dim()];
        let (x, report) = mg_solve(&setup, &b, 1e-6, 50).unwrap();
        assert_eq!(report.iterations, 0);
        assert!(report.converged);
        assert!(norm2(&x) == 0.0);
        assert!(!report.residual_history.is_empty());
    }

    #[test]
    fn galerkin_nesting_links_the_levels() {
        // C V_fine C^t recovers V_coarse up to quadrature differences; this
        // exercises the coefficient and moment identities behind the
        // matrix form of the cycle
        let setup = square_setup(Some(2.1), 2, MgOptions::default());
        let coarse = &setup.levels()[0];
        let fine = &setup.levels()[1];
        let r = fine.restriction.as_ref().unwrap();
        let nc = coarse.dim();
        let mut worst = 0.0_f64;
        for j in 0..nc {
            let mut ej = vec![Complex64::new(0.0, 0.0); nc];
            ej[j] = Complex64::new(1.0, 0.0);
            let fine_col = fine.system.matvec(&r.prolong(&ej));
            let reduced = r.restrict(&fine_col);
            for i in 0..nc {
                worst = worst.max((reduced[i] - coarse.system.get(i, j)).norm());
            }
        }
        // agreement is limited by the coarse-level panel quadrature
        assert!(worst < 1e-7, "Galerkin nesting violated: {worst}");
    }

    #[test]
    fn lambda_scales_with_the_operator() {
        let setup = square_setup(None, 2, MgOptions::default());
        let level = setup.finest();
        let lam = estimate_lambda(&level.laplace, &level.weak, 1e-8, 500);
        let mut scaled = level.laplace.clone();
        scaled.scale(4.0);
        let lam4 = estimate_lambda(&scaled, &level.weak, 1e-8, 500);
        assert!((lam4 / lam - 4.0).abs() < 1e-4, "homogeneity: {}", lam4 / lam);
    }

    #[test]
    fn definite_problem_smoother_contracts() {
        // The error propagation of one smoothing step on the definite
        // problem is I - lam^{-1} H^{-1} A^t Lambda; its spectrum is real
        // (similar to a symmetric matrix), so power iteration on the dense
        // matrix is a valid spectral radius oracle.
        let setup = square_setup(None, 2, MgOptions::default()); // N = 16
        let level = setup.finest();
        let n = level.dim();
        let lengths = level.weak.lengths().to_vec();
        let mut e = vec![0.0; n * n];
        for j in 0..n {
            let mut ej = vec![0.0; n];
            ej[j] = 1.0;
            let lj = level.laplace.matvec(&ej);
            let tj = level.weak.apply_transpose_real(&lj);
            for i in 0..n {
                let ident = if i == j { 1.0 } else { 0.0 };
                e[i * n + j] = ident - tj[i] / (level.smoothing_bound * lengths[i]);
            }
        }
        let mut y: Vec<f64> = (0..n).map(|i| (0.7 * i as f64).sin() + 0.2).collect();
        let mut radius = 0.0;
        for _ in 0..3000 {
            let z: Vec<f64> =
                (0..n).map(|i| (0..n).map(|k| e[i * n + k] * y[k]).sum()).collect();
            let ny = y.iter().map(|v| v * v).sum::<f64>().sqrt();
            let nz = z.iter().map(|v| v * v).sum::<f64>().sqrt();
            radius = nz / ny;
            y = z.iter().map(|v| v / nz).collect();
        }
        assert!(radius < 1.0, "smoother spectral radius {radius}");
        assert!(radius > 0.3, "suspiciously strong single-step smoother: {radius}");
    }
}
