//! Spectral studies and empirical verification of the theory.
//!
//! Discretized single layer operators pair small eigenvalues with highly
//! oscillatory eigenfunctions; the weak inner product reverses that
//! ordering, which is what makes the multigrid smoother work. The studies
//! here quantify the reversal (sign-change counts of extreme
//! eigenvectors), measure the equivalence between the weak product and a
//! reference `H^{-1}` inner product across levels, and estimate the
//! energy-norm contraction factor of the V-cycle.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geometry::MeshHierarchy;
use crate::linalg::{Cholesky, ComplexDenseMatrix, RealSymmetricMatrix};
use crate::multigrid::{mg_solve, MultigridSetup};
use crate::weak_product::{build_weak_operator, hminus1_oracle, WeakProductOperator};
use crate::{Error, Result};

/// Which eigenvalue problem a spectrum study solves.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectrumKind {
    /// `Lambda y = lambda H y`: the raw stiffness spectrum, weighted by
    /// panel lengths.
    Plain,
    /// `Lambda A y = lambda H y`: the generalized problem behind the
    /// smoother, solved through the Hermitian pencil
    /// `A^t Lambda A y = lambda A^t H y`.
    Generalized,
}

/// One extreme eigenpair with its oscillation count.
#[derive(Debug, Clone)]
pub struct EigenPair {
    pub value: f64,
    /// Panel coefficient vector `e(theta)`, L2-normalized via `e^* H e = 1`.
    pub coefficients: Vec<f64>,
    pub sign_changes: usize,
}

#[derive(Debug, Clone)]
pub struct SpectrumReport {
    pub kind: SpectrumKind,
    /// All eigenvalues, ascending.
    pub eigenvalues: Vec<f64>,
    /// The `how_many` smallest eigenpairs, ascending.
    pub smallest: Vec<EigenPair>,
    /// The `how_many` largest eigenpairs, ascending.
    pub largest: Vec<EigenPair>,
}

/// Count cyclic adjacent sign flips of a real vector, skipping entries
/// below `1e-12 * ||v||_inf`. On a closed curve the count is even.
pub fn count_sign_changes(v: &[f64], cyclic: bool) -> usize {
    let scale = v.iter().map(|x| x.abs()).fold(0.0_f64, f64::max);
    if scale == 0.0 {
        return 0;
    }
    let kept: Vec<f64> = v.iter().copied().filter(|x| x.abs() >= 1e-12 * scale).collect();
    if kept.len() < 2 {
        return 0;
    }
    let mut count = 0;
    let pairs = if cyclic { kept.len() } else { kept.len() - 1 };
    for i in 0..pairs {
        let a = kept[i];
        let b = kept[(i + 1) % kept.len()];
        if a.signum() * b.signum() < 0.0 {
            count += 1;
        }
    }
    count
}

/// Dense symmetric-pencil eigensolve of the plain or generalized problem.
///
/// Both pencils reduce to a standard symmetric problem: the plain one by
/// the diagonal `H^{1/2}` similarity, the generalized one by the Cholesky
/// factor of the symmetric positive definite `A^t H = H A`. Eigenvalues
/// are therefore real, and positive whenever `Lambda` is definite. For the
/// generalized kind the eigenfunction coefficients are `e(theta) = A y`.
pub fn spectrum_study(
    laplace: &RealSymmetricMatrix,
    weak: &WeakProductOperator,
    kind: SpectrumKind,
    how_many: usize,
) -> Result<SpectrumReport> {
    let n = laplace.dim();
    if weak.dim() != n {
        return Err(Error::DimensionMismatch { expected: n, got: weak.dim() });
    }
    let lengths = weak.lengths().to_vec();

    // eigen-coordinates y per kind, mapped back to coefficients e(theta)
    let (values, coefficient_of): (Vec<f64>, Vec<Vec<f64>>) = match kind {
        SpectrumKind::Plain => {
            let mut s = RealSymmetricMatrix::zeros(n);
            for i in 0..n {
                for j in 0..n {
                    s.set(i, j, laplace.get(i, j) / (lengths[i] * lengths[j]).sqrt());
                }
            }
            let (values, vectors) = s.symmetric_eigen().map_err(eig_fail)?;
            let coeffs = (0..n)
                .map(|k| {
                    (0..n).map(|i| vectors[i * n + k] / lengths[i].sqrt()).collect::<Vec<f64>>()
                })
                .collect();
            (values, coeffs)
        }
        SpectrumKind::Generalized => {
            // dense A^t Lambda A and A^t H through the cyclic stencils
            let mut a_la = RealSymmetricMatrix::zeros(n);
            let mut a_h = RealSymmetricMatrix::zeros(n);
            for j in 0..n {
                let mut ej = vec![0.0; n];
                ej[j] = 1.0;
                let aj = weak.apply_real(&ej); // A e_j
                let laj = laplace.matvec(&aj);
                let col_l = weak.apply_transpose_real(&laj);
                let haj: Vec<f64> = aj.iter().zip(&lengths).map(|(v, &l)| v * l).collect();
                // A^t H A e_j; A^t H is itself symmetric but reducing the
                // fully symmetrized pencil keeps Cholesky applicable
                let col_h = weak.apply_transpose_real(&haj);
                for i in 0..n {
                    a_la.set(i, j, col_l[i]);
                    a_h.set(i, j, col_h[i]);
                }
            }
            symmetrize(&mut a_la);
            symmetrize(&mut a_h);
            let ch = a_h.cholesky().map_err(|_| {
                Error::EigenFailure("A^t H A is not positive definite".into())
            })?;
            // reduced = L^{-1} (A^t Lambda A) L^{-t}
            let mut reduced = RealSymmetricMatrix::zeros(n);
            for j in 0..n {
                let mut ej = vec![0.0; n];
                ej[j] = 1.0;
                let w = ch.solve_lt(&ej); // L^{-t} e_j
                let lw = a_la.matvec(&w);
                let col = ch.solve_l(&lw); // L^{-1} (...)
                for i in 0..n {
                    reduced.set(i, j, col[i]);
                }
            }
            symmetrize(&mut reduced);
            let (values, vectors) = reduced.symmetric_eigen().map_err(eig_fail)?;
            let coeffs = (0..n)
                .map(|k| {
                    let q: Vec<f64> = (0..n).map(|i| vectors[i * n + k]).collect();
                    let y = ch.solve_lt(&q);
                    weak.apply_real(&y) // e(theta) = A y
                })
                .collect();
            (values, coeffs)
        }
    };

    let normalize = |mut e: Vec<f64>| -> Vec<f64> {
        let norm2: f64 = e.iter().zip(&lengths).map(|(v, &l)| v * v * l).sum();
        let scale = norm2.sqrt();
        for v in &mut e {
            *v /= scale;
        }
        e
    };
    let take = how_many.min(n);
    let pair = |k: usize| -> EigenPair {
        let e = normalize(coefficient_of[k].clone());
        let sign_changes = count_sign_changes(&e, true);
        EigenPair { value: values[k], coefficients: e, sign_changes }
    };
    let smallest: Vec<EigenPair> = (0..take).map(pair).collect();
    let largest: Vec<EigenPair> = ((n - take)..n).map(pair).collect();
    Ok(SpectrumReport { kind, eigenvalues: values, smallest, largest })
}

fn eig_fail(e: Error) -> Error {
    match e {
        Error::EigenFailure(m) => Error::EigenFailure(m),
        other => Error::EigenFailure(other.to_string()),
    }
}

fn symmetrize(m: &mut RealSymmetricMatrix) {
    let n = m.dim();
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (m.get(i, j) + m.get(j, i));
            m.set(i, j, avg);
            m.set(j, i, avg);
        }
    }
}

/// Per-level spread of the ratio `[sigma, sigma]_k / (sigma, sigma)_{-1}`.
#[derive(Debug, Clone)]
pub struct RatioBracket {
    pub level: usize,
    pub min_ratio: f64,
    pub max_ratio: f64,
}

/// Ratio statistics of the weak product against the `H^{-1}` oracle over
/// fixed-seed random panel data, one bracket per hierarchy level.
///
/// Norm equivalence predicts brackets whose width does not grow with the
/// level.
pub fn norm_equivalence_study(
    hierarchy: &MeshHierarchy,
    samples: usize,
) -> Result<Vec<RatioBracket>> {
    let mut out = Vec::with_capacity(hierarchy.level_count());
    let mut rng = ChaCha8Rng::seed_from_u64(0xd1ce);
    for mesh in &hierarchy.levels {
        let weak = build_weak_operator(mesh)?;
        let n = mesh.panel_count();
        let mut min_ratio = f64::INFINITY;
        let mut max_ratio = 0.0_f64;
        for _ in 0..samples {
            let sigma: Vec<Complex64> =
                (0..n).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), 0.0)).collect();
            let weak_val = weak.product(&sigma, &sigma)?.re;
            let oracle = hminus1_oracle(mesh, &sigma, &sigma, 8)?.re;
            let ratio = weak_val / oracle;
            min_ratio = min_ratio.min(ratio);
            max_ratio = max_ratio.max(ratio);
        }
        out.push(RatioBracket { level: mesh.level, min_ratio, max_ratio });
    }
    Ok(out)
}

/// Measure the energy-norm contraction factor `||E||_Lambda` of the error
/// propagation map `E = I - B_J V_J`.
///
/// The map is materialized densely (columns are `e_i - B_J V_J e_i`) and
/// its Lambda-norm comes from power iteration on `Lambda^{-1} E^H Lambda E`
/// with the Rayleigh quotient `||E z||_Lambda^2 / ||z||_Lambda^2`; the
/// converged quotient square root is returned, maximized over `probes`
/// random starts.
pub fn contraction_factor(setup: &MultigridSetup, probes: usize) -> Result<f64> {
    let n = setup.dim();
    let system = &setup.finest().system;
    let laplace = &setup.finest().laplace;
    let cholesky = laplace
        .cholesky()
        .map_err(|_| Error::EigenFailure("Lambda norm needs a definite Laplace matrix".into()))?;

    // columns of E = I - B V
    let mut e = ComplexDenseMatrix::zeros(n);
    for j in 0..n {
        let mut ej = vec![Complex64::new(0.0, 0.0); n];
        ej[j] = Complex64::new(1.0, 0.0);
        let vej = system.matvec(&ej);
        let bvej = setup.apply_preconditioner(&vej)?;
        for i in 0..n {
            let ident = if i == j { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) };
            e.set(i, j, ident - bvej[i]);
        }
    }

    let lambda_norm_sq = |v: &[Complex64]| -> f64 {
        let lv = laplace.matvec_complex(v);
        v.iter().zip(&lv).map(|(a, b)| (a.conj() * b).re).sum()
    };

    let mut rng = ChaCha8Rng::seed_from_u64(0xc0ffee);
    let mut best = 0.0_f64;
    for _ in 0..probes.max(1) {
        let mut z: Vec<Complex64> = (0..n)
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let mut rho_prev = -1.0;
        let mut rho = 0.0;
        for _ in 0..200 {
            let ez = e.matvec(&z);
            let denom = lambda_norm_sq(&z);
            rho = lambda_norm_sq(&ez) / denom;
            if (rho - rho_prev).abs() <= 1e-5 * rho.abs().max(1e-30) {
                break;
            }
            rho_prev = rho;
            // z <- Lambda^{-1} E^H Lambda E z, normalized
            let lez = laplace.matvec_complex(&ez);
            let ehl = e.matvec_adjoint(&lez);
            let mut next = cholesky.solve_complex(&ehl);
            let scale = next.iter().map(|v| v.norm()).fold(0.0_f64, f64::max).max(1e-300);
            for v in &mut next {
                *v /= scale;
            }
            z = next;
        }
        best = best.max(rho.max(0.0).sqrt());
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::AssemblyOptions;
    use crate::geometry::{build_hierarchy, build_polygon, Boundary, CircleBoundary, Point2};
    use crate::multigrid::MgOptions;

    #[test]
    fn sign_change_basics() {
        assert_eq!(count_sign_changes(&[3.0, 3.0, 3.0, 3.0], true), 0);
        let alternating: Vec<f64> = (0..8).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        assert_eq!(count_sign_changes(&alternating, true), 8);
        assert_eq!(count_sign_changes(&[1.0, 1.0, -1.0, -1.0], true), 2);
        // tiny entries are skipped
        assert_eq!(count_sign_changes(&[1.0, 1e-15, -1.0, -1.0], true), 2);
        assert_eq!(count_sign_changes(&[], true), 0);
        assert_eq!(count_sign_changes(&[1.0, -1.0, 1.0], false), 2);
    }

    fn circle_operators(n: usize) -> (RealSymmetricMatrix, WeakProductOperator) {
        let c = CircleBoundary::new(Point2::new(0.0, 0.0), 0.3).unwrap();
        let h = build_hierarchy(&Boundary::Circle(c), &[n], 1).unwrap();
        let lam = crate::assembly::assemble_circle_laplace(&h.levels[0]).unwrap();
        let weak = build_weak_operator(&h.levels[0]).unwrap();
        (lam, weak)
    }

    #[test]
    fn circle_spectra_reverse_oscillation_order() {
        let (lam, weak) = circle_operators(32);
        let plain = spectrum_study(&lam, &weak, SpectrumKind::Plain, 1).unwrap();
        let gen = spectrum_study(&lam, &weak, SpectrumKind::Generalized, 1).unwrap();
        assert!(plain.eigenvalues.iter().all(|&v| v > 0.0));
        assert!(gen.eigenvalues.iter().all(|&v| v > 0.0));
        // plain problem: smallest eigenvalue belongs to the most
        // oscillatory mode; generalized problem: to the smoothest
        assert!(plain.smallest[0].sign_changes >= 30, "{}", plain.smallest[0].sign_changes);
        assert!(gen.smallest[0].sign_changes <= 4, "{}", gen.smallest[0].sign_changes);
        assert!(gen.largest[0].sign_changes >= 30, "{}", gen.largest[0].sign_changes);
        assert!(gen.smallest[0].sign_changes < gen.largest[0].sign_changes);
    }

    #[test]
    fn generalized_top_matches_power_method() {
        let (lam, weak) = circle_operators(16);
        let report = spectrum_study(&lam, &weak, SpectrumKind::Generalized, 1).unwrap();
        let dense_top = *report.eigenvalues.last().unwrap();
        let power = crate::multigrid::estimate_lambda(&lam, &weak, 1e-10, 2000) / 1.05;
        assert!(
            (power - dense_top).abs() < 0.01 * dense_top,
            "power {power} vs dense {dense_top}"
        );
    }

    #[test]
    fn eigenvectors_are_l2_normalized() {
        let (lam, weak) = circle_operators(16);
        let report = spectrum_study(&lam, &weak, SpectrumKind::Generalized, 2).unwrap();
        for pair in report.smallest.iter().chain(&report.largest) {
            let norm: f64 = pair
                .coefficients
                .iter()
                .zip(weak.lengths())
                .map(|(v, &l)| v * v * l)
                .sum();
            assert!((norm - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn constant_data_gives_unit_ratio() {
        // [1,1]_k and (1,1)_{-1} both equal the curve length
        let p = build_polygon(&[
            Point2::new(0.0, 0.0),
            Point2::new(0.5, 0.0),
            Point2::new(0.5, 0.5),
            Point2::new(0.0, 0.5),
        ])
        .unwrap();
        let h = build_hierarchy(&Boundary::Polygon(p), &[2, 2, 2, 2], 2).unwrap();
        for mesh in &h.levels {
            let weak = build_weak_operator(mesh).unwrap();
            let ones = vec![Complex64::new(1.0, 0.0); mesh.panel_count()];
            let w = weak.product(&ones, &ones).unwrap().re;
            let o = hminus1_oracle(mesh, &ones, &ones, 8).unwrap().re;
            assert!(((w / o) - 1.0).abs() < 1e-10, "ratio {}", w / o);
        }
    }

    #[test]
    fn single_level_contraction_is_zero() {
        let p = build_polygon(&[
            Point2::new(0.0, 0.0),
            Point2::new(0.5, 0.0),
            Point2::new(0.5, 0.5),
            Point2::new(0.0, 0.5),
        ])
        .unwrap();
        let h = build_hierarchy(&Boundary::Polygon(p), &[2, 2, 2, 2], 1).unwrap();
        let setup = MultigridSetup::assemble(
            &h,
            None,
            MgOptions::default(),
            AssemblyOptions::default(),
        )
        .unwrap();
        let factor = contraction_factor(&setup, 2).unwrap();
        assert!(factor < 1e-10, "direct solve must not propagate error: {factor}");
    }
}
