//! The computable weak inner product on panel spaces.
//!
//! Negative-order operators pair small eigenvalues with oscillatory
//! eigenfunctions, which breaks plain multigrid smoothing. The fix is to
//! damp residuals in a surrogate of the `H^{-1}(Gamma)` inner product: a
//! periodic finite-difference discretization of `-u'' + u` along the curve
//! yields a cyclic tridiagonal operator `A_k` whose inverse plays the role
//! of the solution operator, giving the computable product
//! `[phi, psi]_k = (A_k^{-1} phi, psi)_Gamma`.
//!
//! `A_k` is not symmetric on nonuniform meshes, but `H_k A_k` is, where
//! `H_k` is the diagonal of panel lengths. The multigrid smoother only ever
//! multiplies by `A_k^t`; the inverse is needed solely when the product
//! itself is evaluated, and then through an O(N) cyclic solve.

use num_complex::Complex64;

use crate::geometry::MeshLevel;
use crate::{Error, Result};

/// Cyclic tridiagonal operator `A_k` together with the panel-length
/// diagonal `H_k`.
///
/// Row `i` holds `-(l_i l_{i-})^{-1}` at `i-`, `1 + l_i^{-2} + (l_i l_{i-})^{-1}`
/// on the diagonal and `-l_i^{-2}` at `i+`, indices cyclic. Constants are in
/// its kernel complement: `A_k 1 = 1` holds exactly because the operator is
/// applied in difference form.
#[derive(Debug, Clone)]
pub struct WeakProductOperator {
    level: usize,
    lengths: Vec<f64>,
    sub: Vec<f64>,
    diag: Vec<f64>,
    sup: Vec<f64>,
}

pub fn build_weak_operator(mesh: &MeshLevel) -> Result<WeakProductOperator> {
    let n = mesh.panel_count();
    if n < 4 {
        return Err(Error::TooCoarse(n));
    }
    let lengths = mesh.lengths.clone();
    let mut sub = vec![0.0; n];
    let mut diag = vec![0.0; n];
    let mut sup = vec![0.0; n];
    for i in 0..n {
        let l_i = lengths[i];
        let l_im = lengths[(i + n - 1) % n];
        sub[i] = -1.0 / (l_i * l_im);
        diag[i] = 1.0 + 1.0 / (l_i * l_i) + 1.0 / (l_i * l_im);
        sup[i] = -1.0 / (l_i * l_i);
    }
    Ok(WeakProductOperator { level: mesh.level, lengths, sub, diag, sup })
}

impl WeakProductOperator {
    pub fn dim(&self) -> usize {
        self.lengths.len()
    }

    pub fn level(&self) -> usize {
        self.level
    }

    /// Panel lengths, the diagonal of `H_k`.
    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }

    /// Stencil `(A[i][i-], A[i][i], A[i][i+])` of row `i`.
    pub fn stencil(&self, i: usize) -> (f64, f64, f64) {
        (self.sub[i], self.diag[i], self.sup[i])
    }

    fn check_dim(&self, v: &[Complex64]) -> Result<()> {
        if v.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: v.len() });
        }
        Ok(())
    }

    /// `A_k v`, in difference form so that constants map to themselves
    /// exactly.
    pub fn apply(&self, v: &[Complex64]) -> Result<Vec<Complex64>> {
        self.check_dim(v)?;
        let n = self.dim();
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let ip = (i + 1) % n;
            let im = (i + n - 1) % n;
            let l_i = self.lengths[i];
            let l_im = self.lengths[im];
            out.push(v[i] - (v[ip] - v[i]) / (l_i * l_i) + (v[i] - v[im]) / (l_i * l_im));
        }
        Ok(out)
    }

    pub fn apply_real(&self, v: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let ip = (i + 1) % n;
            let im = (i + n - 1) % n;
            let l_i = self.lengths[i];
            let l_im = self.lengths[im];
            out.push(v[i] - (v[ip] - v[i]) / (l_i * l_i) + (v[i] - v[im]) / (l_i * l_im));
        }
        out
    }

    /// `A_k^t v` in O(N); the only `A_k` product the multigrid smoother needs.
    pub fn apply_transpose(&self, v: &[Complex64]) -> Result<Vec<Complex64>> {
        self.check_dim(v)?;
        let n = self.dim();
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let ip = (i + 1) % n;
            let im = (i + n - 1) % n;
            out.push(v[i] * self.diag[i] + v[ip] * self.sub[ip] + v[im] * self.sup[im]);
        }
        Ok(out)
    }

    pub fn apply_transpose_real(&self, v: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let ip = (i + 1) % n;
            let im = (i + n - 1) % n;
            out.push(v[i] * self.diag[i] + v[ip] * self.sub[ip] + v[im] * self.sup[im]);
        }
        out
    }

    /// Solve `A_k x = rhs` by cyclic tridiagonal elimination.
    pub fn solve(&self, rhs: &[Complex64]) -> Result<Vec<Complex64>> {
        self.check_dim(rhs)?;
        solve_cyclic_tridiagonal(&self.sub, &self.diag, &self.sup, rhs)
    }

    /// The weak inner product `[phi, psi]_k = (A_k^{-1} phi, psi)_Gamma`.
    pub fn product(&self, phi: &[Complex64], psi: &[Complex64]) -> Result<Complex64> {
        self.check_dim(phi)?;
        self.check_dim(psi)?;
        let x = self.solve(phi)?;
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..self.dim() {
            acc += psi[i].conj() * self.lengths[i] * x[i];
        }
        Ok(acc)
    }
}

/// Free-function form of [`WeakProductOperator::product`].
pub fn weak_product(
    op: &WeakProductOperator,
    phi: &[Complex64],
    psi: &[Complex64],
) -> Result<Complex64> {
    op.product(phi, psi)
}

/// Sherman-Morrison cyclic Thomas solve for a cyclic tridiagonal system
/// with real coefficients and complex right-hand side.
///
/// `sub[i]`, `diag[i]`, `sup[i]` are the entries of row `i` at columns
/// `i-1`, `i`, `i+1` (cyclic: `sub[0]` sits at column `n-1` and `sup[n-1]`
/// at column `0`).
pub(crate) fn solve_cyclic_tridiagonal(
    sub: &[f64],
    diag: &[f64],
    sup: &[f64],
    rhs: &[Complex64],
) -> Result<Vec<Complex64>> {
    let n = diag.len();
    assert!(n >= 3, "cyclic solve needs n >= 3");
    let alpha = sup[n - 1]; // corner (n-1, 0)
    let beta = sub[0]; // corner (0, n-1)
    let gamma = -diag[0];

    // T = A - u v^t with u = (gamma, 0, .., alpha), v = (1, 0, .., beta/gamma)
    let mut d = diag.to_vec();
    d[0] -= gamma;
    d[n - 1] -= alpha * beta / gamma;

    let thomas = |r: &[Complex64], d: &[f64]| -> Result<Vec<Complex64>> {
        let mut x = vec![Complex64::new(0.0, 0.0); n];
        let mut scratch = vec![0.0; n];
        let mut bet = d[0];
        if bet == 0.0 {
            return Err(Error::SingularSystem);
        }
        x[0] = r[0] / bet;
        for j in 1..n {
            scratch[j] = sup[j - 1] / bet;
            bet = d[j] - sub[j] * scratch[j];
            if bet == 0.0 {
                return Err(Error::SingularSystem);
            }
            x[j] = (r[j] - x[j - 1] * sub[j]) / bet;
        }
        for j in (0..n - 1).rev() {
            let corr = x[j + 1] * scratch[j + 1];
            x[j] -= corr;
        }
        Ok(x)
    };

    let y = thomas(rhs, &d)?;
    let mut u = vec![Complex64::new(0.0, 0.0); n];
    u[0] = Complex64::new(gamma, 0.0);
    u[n - 1] = Complex64::new(alpha, 0.0);
    let q = thomas(&u, &d)?;

    let vy = y[0] + y[n - 1] * (beta / gamma);
    let vq = q[0] + q[n - 1] * (beta / gamma);
    let denom = Complex64::new(1.0, 0.0) + vq;
    if denom.norm() == 0.0 {
        return Err(Error::SingularSystem);
    }
    let factor = vy / denom;
    Ok(y.iter().zip(&q).map(|(yi, qi)| yi - qi * factor).collect())
}

/// Reference value of the `H^{-1}(Gamma)` inner product `(v, w)_{-1}`.
///
/// Solves `-u'' + u = v` with periodic boundary conditions by second-order
/// central finite differences on an arclength grid `refinement_factor`
/// times finer than the panel mesh (collocation at cell midpoints, so the
/// piecewise constant data stays unambiguous), then returns `(u, w)_Gamma`
/// by exact integration of the piecewise data. This is a test oracle for
/// the weak product, not a production path.
pub fn hminus1_oracle(
    mesh: &MeshLevel,
    v: &[Complex64],
    w: &[Complex64],
    refinement_factor: usize,
) -> Result<Complex64> {
    assert!(refinement_factor >= 8, "oracle needs refinement_factor >= 8");
    let n = mesh.panel_count();
    if v.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: v.len() });
    }
    if w.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: w.len() });
    }
    let f = refinement_factor;
    let m = n * f;
    let mut centers = Vec::with_capacity(m);
    let mut cell_len = Vec::with_capacity(m);
    let mut panel_of = Vec::with_capacity(m);
    for i in 0..n {
        let step = mesh.lengths[i] / f as f64;
        for c in 0..f {
            centers.push(mesh.arclength[i] + (c as f64 + 0.5) * step);
            cell_len.push(step);
            panel_of.push(i);
        }
    }
    let total = mesh.total_length;
    let spacing = |j: usize| -> f64 {
        let next = (j + 1) % m;
        let d = centers[next] - centers[j];
        if d > 0.0 {
            d
        } else {
            d + total
        }
    };
    // flux (finite volume) form of -u'' + u = v over each cell: this keeps
    // the discrete solution operator exactly self-adjoint in the
    // length-weighted product, matching the continuous T
    let mut sub = vec![0.0; m];
    let mut diag = vec![0.0; m];
    let mut sup = vec![0.0; m];
    for j in 0..m {
        let dj = spacing(j);
        let djm = spacing((j + m - 1) % m);
        sub[j] = -1.0 / djm;
        sup[j] = -1.0 / dj;
        diag[j] = cell_len[j] + 1.0 / djm + 1.0 / dj;
    }
    let rhs: Vec<Complex64> =
        (0..m).map(|j| v[panel_of[j]] * cell_len[j]).collect();
    let u = solve_cyclic_tridiagonal(&sub, &diag, &sup, &rhs)?;
    let mut acc = Complex64::new(0.0, 0.0);
    for j in 0..m {
        acc += u[j] * w[panel_of[j]].conj() * cell_len[j];
    }
    Ok(acc)
}
