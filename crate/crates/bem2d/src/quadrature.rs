//! Gauss rules and weakly singular panel-pair integration.
//!
//! Three kinds of panel pairs appear in single layer assembly:
//! - collinear pairs (same panel, neighbors on one edge, or separated on one
//!   line), where the double integral of `ln|x-y|` has a closed form;
//! - pairs sharing a corner, where geometric grading toward the shared
//!   vertex resolves the logarithmic singularity;
//! - everything else, where tensor Gauss rules converge geometrically.

use num_complex::Complex64;

use crate::geometry::Point2;
use crate::{Error, Result};

/// Gauss-Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussRule {
    pub order: usize,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussRule {
    /// Integrate `f` over `[a, b]`.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let mid = 0.5 * (a + b);
        let half = 0.5 * (b - a);
        let mut sum = 0.0;
        for (&x, &w) in self.nodes.iter().zip(&self.weights) {
            sum += w * f(mid + half * x);
        }
        sum * half
    }

    /// Nodes and weights mapped to the segment `[a, b]` in the plane.
    pub fn points_on_segment(&self, a: Point2, b: Point2) -> Vec<(Point2, f64)> {
        let mid = a.midpoint(b);
        let half = (b - a) * 0.5;
        let jac = 0.5 * a.distance(b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| (mid + half * x, w * jac))
            .collect()
    }
}

/// Gauss-Legendre nodes and weights by Newton iteration on the Legendre
/// recurrence; nodes accurate to ~1e-15.
pub fn gauss_rule(n: usize) -> Result<GaussRule> {
    if n == 0 || n > 32 {
        return Err(Error::UnsupportedOrder(n));
    }
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        // Chebyshev-based initial guess
        let mut x = (core::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // evaluate P_n and P_n' at x via the three-term recurrence
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 1 { x } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * p - pm) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[n - 1 - i] = x;
        weights[n - 1 - i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    // enforce exact symmetry of the computed rule
    for i in 0..n / 2 {
        let avg = 0.5 * (nodes[i] - nodes[n - 1 - i]);
        nodes[i] = avg;
        nodes[n - 1 - i] = -avg;
        let w = 0.5 * (weights[i] + weights[n - 1 - i]);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    Ok(GaussRule { order: n, nodes, weights })
}

/// Antiderivative pieces of the collinear log integral:
/// `Psi''(t) = ln|t|`, `Psi(t) = t^2/2 (ln|t| - 3/2)`, `Psi(0) = 0`.
fn psi(t: f64) -> f64 {
    if t == 0.0 {
        0.0
    } else {
        0.5 * t * t * (t.abs().ln() - 1.5)
    }
}

/// Exact `int_a int_b ln|x - y| ds ds` for collinear segments.
///
/// The segments may coincide, touch, or be disjoint on their common line.
/// For a single panel of length `l` the value is `l^2 (ln l - 3/2)`.
pub fn log_double_integral(a: (Point2, Point2), b: (Point2, Point2)) -> Result<f64> {
    let dir = a.1 - a.0;
    let len = dir.norm();
    if len == 0.0 {
        return Err(Error::NotCollinear);
    }
    let u = dir * (1.0 / len);
    let scale = len.max((b.1 - b.0).norm());
    let eps = 1e-10 * scale;
    // collinearity: both endpoints of b on the line of a
    let off0 = (b.0 - a.0).cross(u).abs();
    let off1 = (b.1 - a.0).cross(u).abs();
    if off0 > eps || off1 > eps {
        return Err(Error::NotCollinear);
    }
    // 1D coordinates along the common line
    let (pa, pb) = (0.0, len);
    let qa = (b.0 - a.0).dot(u);
    let qb = (b.1 - a.0).dot(u);
    let (qa, qb) = if qa <= qb { (qa, qb) } else { (qb, qa) };
    Ok(psi(qb - pa) + psi(qa - pb) - psi(qb - pb) - psi(qa - pa))
}

/// Default grading depth for corner pairs.
pub const DEFAULT_CORNER_DEPTH: usize = 12;

/// Integrate `kernel(x, y)` over two panels sharing exactly one vertex.
///
/// Each panel is split geometrically toward the shared vertex with ratio
/// 1/2 and `depth` levels, and every sub-rectangle is integrated by tensor
/// Gauss. The corner-most cell pair, the only one touching the
/// singularity, is refined further down to a fixed tail depth where its
/// remaining contribution for log-type kernels is below 1e-20 relative and
/// can be dropped; doubling `depth` then moves the value by less than 1e-9
/// relative.
pub fn corner_pair_integral<K>(
    a: (Point2, Point2),
    b: (Point2, Point2),
    kernel: &K,
    depth: usize,
) -> Result<Complex64>
where
    K: Fn(Point2, Point2) -> Complex64 + ?Sized,
{
    let tol = 1e-12 * (a.0.distance(a.1)).max(b.0.distance(b.1));
    // orient both panels to start at the shared vertex
    let mut shared = None;
    for (pa, rest_a) in [(a.0, a.1), (a.1, a.0)] {
        for (pb, rest_b) in [(b.0, b.1), (b.1, b.0)] {
            if pa.distance(pb) <= tol {
                if shared.is_some() {
                    return Err(Error::NoSharedVertex);
                }
                shared = Some((pa, rest_a, rest_b));
            }
        }
    }
    let Some((vertex, end_a, end_b)) = shared else {
        return Err(Error::NoSharedVertex);
    };
    let da = end_a - vertex;
    let db = end_b - vertex;
    if da.cross(db).abs() <= tol * (da.norm() + db.norm()) {
        return Err(Error::NotCollinear);
    }

    let base = gauss_rule(8)?;
    let diag = gauss_rule(12)?;
    // graded breakpoints on [0, 1]: 0, 2^-depth, ..., 1/2, 1
    let mut brk = Vec::with_capacity(depth + 2);
    brk.push(0.0);
    for j in 0..=depth {
        brk.push(0.5_f64.powi((depth - j) as i32));
    }
    let cell = |j: usize| (brk[j], brk[j + 1]);

    let gauss_cell = |sa: (f64, f64), sb: (f64, f64), rule: &GaussRule| -> Complex64 {
        let mut sum = Complex64::new(0.0, 0.0);
        for (&xa, &wa) in rule.nodes.iter().zip(&rule.weights) {
            let ta = 0.5 * (sa.0 + sa.1) + 0.5 * (sa.1 - sa.0) * xa;
            let x = vertex + da * ta;
            let ja = 0.5 * (sa.1 - sa.0);
            for (&xb, &wb) in rule.nodes.iter().zip(&rule.weights) {
                let tb = 0.5 * (sb.0 + sb.1) + 0.5 * (sb.1 - sb.0) * xb;
                let y = vertex + db * tb;
                let jb = 0.5 * (sb.1 - sb.0);
                sum += kernel(x, y) * (wa * ja * wb * jb);
            }
        }
        sum * (da.norm() * db.norm())
    };

    let mut total = Complex64::new(0.0, 0.0);
    for j in 0..=depth {
        for k in 0..=depth {
            if j == 0 && k == 0 {
                continue;
            }
            let rule = if j.abs_diff(k) <= 1 { &diag } else { &base };
            total += gauss_cell(cell(j), cell(k), rule);
        }
    }
    // corner tail: keep halving the singular cell pair; the omitted final
    // cell scales like eps^2 ln(eps) and is negligible at the tail depth
    let mut eps = brk[1];
    let mut guard = 0;
    while eps > 0.5_f64.powi(40) && guard < 64 {
        let half = 0.5 * eps;
        total += gauss_cell((0.0, half), (half, eps), &diag);
        total += gauss_cell((half, eps), (0.0, half), &diag);
        total += gauss_cell((half, eps), (half, eps), &diag);
        eps = half;
        guard += 1;
    }
    Ok(total)
}

/// Split `log(1 - cos t)` into `f_s(t) = log(t^2)` plus the analytic
/// remainder `f_a(t) = -log 2 + log(2 (1 - cos t) / t^2)`.
///
/// The remainder is evaluated through its even power series for
/// `|t| < 0.5`, where the direct expression loses all digits, and directly
/// otherwise. `f_s + f_a` reproduces `log(1 - cos t)` to 1e-12.
pub fn split_log_singularity(t: f64) -> Result<(f64, f64)> {
    if t == 0.0 || !(t.abs() < core::f64::consts::PI) {
        return Err(Error::DomainError { function: "split_log_singularity", argument: t });
    }
    let f_s = (t * t).ln();
    let f_a = if t.abs() < 0.5 {
        // g(t) = 2 (1 - cos t) / t^2 = 1 - 2 t^2/4! + 2 t^4/6! - ...
        let t2 = t * t;
        let mut term = 1.0; // 2 t^(2m-2) / (2m)! starting at m = 1
        let mut g = 1.0;
        for m in 2..=12 {
            term *= -t2 / ((2 * m) as f64 * (2 * m - 1) as f64);
            g += term;
            if term.abs() < 1e-18 {
                break;
            }
        }
        -(2.0_f64.ln()) + g.ln()
    } else {
        (1.0 - t.cos()).ln() - f_s
    };
    Ok((f_s, f_a))
}
