//! Dense Galerkin matrices for the boundary integral operators.
//!
//! Entries are double integrals of weakly singular kernels over panel
//! pairs. Pairs are classified by geometry:
//! - pairs on one straight line (same panel, neighbors, or separated on a
//!   common edge): the `ln|x-y|` part integrates exactly, the smooth
//!   Helmholtz remainder by tensor Gauss;
//! - pairs sharing a corner: graded quadrature toward the shared vertex;
//! - everything else: tensor Gauss with the order stepped up as panels get
//!   closer, and recursive bisection for the nearly touching pairs thin
//!   wedges produce.
//!
//! Assembly is O(N^2) by design; matrix compression is out of scope. Entry
//! computation parallelizes over rows and each entry sums its quadrature
//! contributions in a fixed order, so results are deterministic.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::geometry::{segment_distance, CurveKind, MeshLevel, Point2};
use crate::linalg::{ComplexDenseMatrix, RealSymmetricMatrix};
use crate::quadrature::{
    corner_pair_integral, gauss_rule, log_double_integral, split_log_singularity, GaussRule,
    DEFAULT_CORNER_DEPTH,
};
use crate::specfun::{hankel0_unchecked, hankel1_unchecked, EULER_GAMMA};
use crate::{Error, Result};

const FRAC_1_2PI: f64 = 1.0 / (2.0 * core::f64::consts::PI);

/// Quadrature configuration for matrix assembly.
#[derive(Debug, Clone, Copy)]
pub struct AssemblyOptions {
    /// Tensor Gauss order for well separated pairs.
    pub far_order: usize,
    /// Order for moderately separated pairs (within ~2.5 panel lengths).
    pub mid_order: usize,
    /// Order for close pairs (separation below one panel length).
    pub near_order: usize,
    /// Order for the smooth remainder over collinear pairs.
    pub self_order: usize,
    /// Grading depth for corner pairs.
    pub corner_depth: usize,
    /// Mirror the upper triangle instead of recomputing `(j, i)`.
    pub exploit_symmetry: bool,
}

impl Default for AssemblyOptions {
    fn default() -> Self {
        Self {
            far_order: 8,
            mid_order: 12,
            near_order: 16,
            self_order: 16,
            corner_depth: DEFAULT_CORNER_DEPTH,
            exploit_symmetry: true,
        }
    }
}

/// Kind tag of a dumped matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixKind {
    Helmholtz = 1,
    Laplace = 2,
    DoubleLayer = 3,
    SmoothRemainder = 4,
}

impl MatrixKind {
    fn from_u8(v: u8) -> Result<Self> {
        Ok(match v {
            1 => MatrixKind::Helmholtz,
            2 => MatrixKind::Laplace,
            3 => MatrixKind::DoubleLayer,
            4 => MatrixKind::SmoothRemainder,
            _ => return Err(Error::AssemblyFailure(format!("unknown matrix kind {v}"))),
        })
    }
}

/// Fundamental-solution kernel of the Helmholtz single layer operator,
/// `(i/4) H_0^(1)(kappa |x - y|)`.
#[inline]
pub(crate) fn helmholtz_kernel(kappa: f64, x: Point2, y: Point2) -> Complex64 {
    Complex64::new(0.0, 0.25) * hankel0_unchecked(kappa * x.distance(y))
}

/// Double layer kernel with the outward normal `n_y` at `y`,
/// `-(i kappa / 4) H_1^(1)(kappa r) ((x - y) . n_y) / r`.
#[inline]
pub(crate) fn double_layer_kernel(kappa: f64, x: Point2, y: Point2, n_y: Point2) -> Complex64 {
    let d = x - y;
    let r = d.norm();
    Complex64::new(0.0, -0.25 * kappa) * hankel1_unchecked(kappa * r) * (d.dot(n_y) / r)
}

/// Smooth remainder of the Helmholtz kernel after peeling off the Laplace
/// logarithm: `m(r) = (i/4) H_0^(1)(kappa r) + ln(r) / (2 pi)`, continued
/// to `m(0) = i/4 - (ln(kappa/2) + gamma) / (2 pi)` below `r_floor`.
#[inline]
pub(crate) fn smooth_remainder_kernel(kappa: f64, r: f64, r_floor: f64) -> Complex64 {
    if r < r_floor {
        Complex64::new(-FRAC_1_2PI * ((0.5 * kappa).ln() + EULER_GAMMA), 0.25)
    } else {
        Complex64::new(0.0, 0.25) * hankel0_unchecked(kappa * r)
            + Complex64::new(FRAC_1_2PI * r.ln(), 0.0)
    }
}

/// Outward unit normals per panel of a counterclockwise polygon mesh.
pub(crate) fn panel_normals(mesh: &MeshLevel) -> Vec<Point2> {
    (0..mesh.panel_count())
        .map(|i| {
            let (a, b) = mesh.panel(i);
            let t = b - a;
            let len = t.norm();
            Point2::new(t.y / len, -t.x / len)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum PairClass {
    SelfPanel,
    Collinear,
    Corner,
    Smooth { order: usize, subdivide: bool },
}

struct PanelContext<'a> {
    mesh: &'a MeshLevel,
    edge_of_panel: &'a [usize],
    opts: AssemblyOptions,
}

impl PanelContext<'_> {
    fn classify(&self, i: usize, j: usize) -> PairClass {
        if i == j {
            return PairClass::SelfPanel;
        }
        let mesh = self.mesh;
        let (a0, a1) = mesh.panel(i);
        let (b0, b1) = mesh.panel(j);
        if self.edge_of_panel[i] == self.edge_of_panel[j] {
            return PairClass::Collinear;
        }
        // collinear across edge boundaries (straight continuation)
        let ua = a1 - a0;
        let la = ua.norm();
        let eps = 1e-12 * mesh.h_max;
        if (b0 - a0).cross(ua).abs() <= eps * la && (b1 - a0).cross(ua).abs() <= eps * la {
            return PairClass::Collinear;
        }
        let tol = 1e-12 * mesh.h_max;
        let shares_vertex = a0.distance(b0) <= tol
            || a0.distance(b1) <= tol
            || a1.distance(b0) <= tol
            || a1.distance(b1) <= tol;
        if shares_vertex {
            return PairClass::Corner;
        }
        let scale = mesh.lengths[i].max(mesh.lengths[j]);
        // cheap center-distance bound first, exact distance only when close
        let ci = a0.midpoint(a1);
        let cj = b0.midpoint(b1);
        let lower = ci.distance(cj) - 0.5 * (mesh.lengths[i] + mesh.lengths[j]);
        let rho = if lower > 2.5 * scale {
            lower / scale
        } else {
            segment_distance(a0, a1, b0, b1) / scale
        };
        if rho >= 2.5 {
            PairClass::Smooth { order: self.opts.far_order, subdivide: false }
        } else if rho >= 1.0 {
            PairClass::Smooth { order: self.opts.mid_order, subdivide: false }
        } else {
            PairClass::Smooth { order: self.opts.near_order, subdivide: rho < 0.35 }
        }
    }
}

fn tensor_gauss<K>(pts_a: &[(Point2, f64)], pts_b: &[(Point2, f64)], kernel: &K) -> Complex64
where
    K: Fn(Point2, Point2) -> Complex64 + ?Sized,
{
    let mut sum = Complex64::new(0.0, 0.0);
    for &(x, wx) in pts_a {
        for &(y, wy) in pts_b {
            sum += kernel(x, y) * (wx * wy);
        }
    }
    sum
}

/// Tensor Gauss with recursive bisection of the longer panel, for smooth
/// pairs whose separation is small against the panel length (thin wedges).
fn subdivided_gauss<K>(
    a: (Point2, Point2),
    b: (Point2, Point2),
    rule: &GaussRule,
    kernel: &K,
    depth: usize,
) -> Complex64
where
    K: Fn(Point2, Point2) -> Complex64 + ?Sized,
{
    let la = a.0.distance(a.1);
    let lb = b.0.distance(b.1);
    let dist = segment_distance(a.0, a.1, b.0, b.1);
    if depth == 0 || dist >= la.max(lb) {
        return tensor_gauss(
            &rule.points_on_segment(a.0, a.1),
            &rule.points_on_segment(b.0, b.1),
            kernel,
        );
    }
    if la >= lb {
        let mid = a.0.midpoint(a.1);
        subdivided_gauss((a.0, mid), b, rule, kernel, depth - 1)
            + subdivided_gauss((mid, a.1), b, rule, kernel, depth - 1)
    } else {
        let mid = b.0.midpoint(b.1);
        subdivided_gauss(a, (b.0, mid), rule, kernel, depth - 1)
            + subdivided_gauss(a, (mid, b.1), rule, kernel, depth - 1)
    }
}

fn polygon_context<'a>(
    mesh: &'a MeshLevel,
    opts: AssemblyOptions,
    what: &str,
) -> Result<PanelContext<'a>> {
    match &mesh.curve {
        CurveKind::Polygonal { edge_of_panel } => Ok(PanelContext { mesh, edge_of_panel, opts }),
        CurveKind::Circular { .. } => Err(Error::AssemblyFailure(format!(
            "{what} requires a polygonal mesh; use assemble_circle_laplace for circles"
        ))),
    }
}

type NodeCache = Vec<Vec<(Point2, f64)>>;

fn cache_nodes(mesh: &MeshLevel, order: usize) -> Result<NodeCache> {
    let rule = gauss_rule(order)?;
    Ok((0..mesh.panel_count())
        .map(|i| {
            let (a, b) = mesh.panel(i);
            rule.points_on_segment(a, b)
        })
        .collect())
}

fn smooth_pair<K>(
    mesh: &MeshLevel,
    cache: &NodeCache,
    far_order: usize,
    i: usize,
    j: usize,
    order: usize,
    subdivide: bool,
    kernel: &K,
) -> Complex64
where
    K: Fn(Point2, Point2) -> Complex64 + ?Sized,
{
    if subdivide {
        let rule = gauss_rule(order).expect("order validated with the options");
        return subdivided_gauss(mesh.panel(i), mesh.panel(j), &rule, kernel, 6);
    }
    if order == far_order {
        return tensor_gauss(&cache[i], &cache[j], kernel);
    }
    let rule = gauss_rule(order).expect("order validated with the options");
    let (a, b) = (mesh.panel(i), mesh.panel(j));
    tensor_gauss(&rule.points_on_segment(a.0, a.1), &rule.points_on_segment(b.0, b.1), kernel)
}

/// Shared skeleton for the symmetric kernel matrices (V, Lambda, remainder).
fn assemble_symmetric_kernel<FSelfCol, FCorner, FSmooth>(
    ctx: &PanelContext<'_>,
    self_collinear: FSelfCol,
    corner: FCorner,
    smooth: FSmooth,
) -> Result<Vec<Complex64>>
where
    FSelfCol: Fn(usize, usize) -> Result<Complex64> + Sync,
    FCorner: Fn(usize, usize) -> Result<Complex64> + Sync,
    FSmooth: Fn(usize, usize, usize, bool) -> Complex64 + Sync,
{
    let n = ctx.mesh.panel_count();
    let mirror = ctx.opts.exploit_symmetry;
    let rows: Vec<Result<Vec<(usize, Complex64)>>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let start = if mirror { i } else { 0 };
            let mut row = Vec::with_capacity(n - start);
            for j in start..n {
                let v = match ctx.classify(i, j) {
                    PairClass::SelfPanel | PairClass::Collinear => self_collinear(i, j)?,
                    PairClass::Corner => corner(i, j)?,
                    PairClass::Smooth { order, subdivide } => smooth(i, j, order, subdivide),
                };
                row.push((j, v));
            }
            Ok(row)
        })
        .collect();
    let mut data = vec![Complex64::new(0.0, 0.0); n * n];
    for (i, row) in rows.into_iter().enumerate() {
        for (j, v) in row? {
            data[i * n + j] = v;
            if mirror {
                data[j * n + i] = v;
            }
        }
    }
    Ok(data)
}

fn matrix_from_data(data: Vec<Complex64>) -> ComplexDenseMatrix {
    let n = (data.len() as f64).sqrt().round() as usize;
    let mut m = ComplexDenseMatrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            m.set(i, j, data[i * n + j]);
        }
    }
    m
}

/// Galerkin matrix of the Helmholtz single layer operator
/// `V sigma(x) = (i/4) int H_0^(1)(kappa |x-y|) sigma(y) ds_y`.
pub fn assemble_helmholtz_with(
    mesh: &MeshLevel,
    kappa: f64,
    opts: AssemblyOptions,
) -> Result<ComplexDenseMatrix> {
    if !(kappa > 0.0) {
        return Err(Error::AssemblyFailure(format!("wave number must be positive, got {kappa}")));
    }
    let ctx = polygon_context(mesh, opts, "Helmholtz assembly")?;
    let r_floor = 1e-6 * mesh.h_max;
    let self_rule = gauss_rule(opts.self_order)?;
    let full = |x: Point2, y: Point2| helmholtz_kernel(kappa, x, y);
    let remainder =
        move |x: Point2, y: Point2| smooth_remainder_kernel(kappa, x.distance(y), r_floor);

    let node_cache = cache_nodes(mesh, opts.far_order)?;
    let data = assemble_symmetric_kernel(
        &ctx,
        |i, j| {
            // exact logarithm plus smooth remainder on the common line
            let log_part = log_double_integral(mesh.panel(i), mesh.panel(j))?;
            let (a, b) = (mesh.panel(i), mesh.panel(j));
            let rem = tensor_gauss(
                &self_rule.points_on_segment(a.0, a.1),
                &self_rule.points_on_segment(b.0, b.1),
                &remainder,
            );
            Ok(Complex64::new(-FRAC_1_2PI * log_part, 0.0) + rem)
        },
        |i, j| corner_pair_integral(mesh.panel(i), mesh.panel(j), &full, opts.corner_depth),
        |i, j, order, subdivide| {
            smooth_pair(mesh, &node_cache, opts.far_order, i, j, order, subdivide, &full)
        },
    )?;
    Ok(matrix_from_data(data))
}

pub fn assemble_helmholtz(mesh: &MeshLevel, kappa: f64) -> Result<ComplexDenseMatrix> {
    assemble_helmholtz_with(mesh, kappa, AssemblyOptions::default())
}

/// Matrix of the smooth remainder kernel `m(|x-y|)` alone; together with
/// the Laplace matrix it reconstructs the Helmholtz matrix (split
/// consistency check).
pub fn assemble_smooth_remainder_with(
    mesh: &MeshLevel,
    kappa: f64,
    opts: AssemblyOptions,
) -> Result<ComplexDenseMatrix> {
    let ctx = polygon_context(mesh, opts, "remainder assembly")?;
    let r_floor = 1e-6 * mesh.h_max;
    let self_rule = gauss_rule(opts.self_order)?;
    let remainder =
        move |x: Point2, y: Point2| smooth_remainder_kernel(kappa, x.distance(y), r_floor);
    let node_cache = cache_nodes(mesh, opts.far_order)?;
    let data = assemble_symmetric_kernel(
        &ctx,
        |i, j| {
            let (a, b) = (mesh.panel(i), mesh.panel(j));
            Ok(tensor_gauss(
                &self_rule.points_on_segment(a.0, a.1),
                &self_rule.points_on_segment(b.0, b.1),
                &remainder,
            ))
        },
        |i, j| corner_pair_integral(mesh.panel(i), mesh.panel(j), &remainder, opts.corner_depth),
        |i, j, order, subdivide| {
            smooth_pair(mesh, &node_cache, opts.far_order, i, j, order, subdivide, &remainder)
        },
    )?;
    Ok(matrix_from_data(data))
}

pub fn assemble_smooth_remainder(mesh: &MeshLevel, kappa: f64) -> Result<ComplexDenseMatrix> {
    assemble_smooth_remainder_with(mesh, kappa, AssemblyOptions::default())
}

/// Galerkin matrix of the Laplace single layer operator
/// `Lambda sigma(x) = -(1/2pi) int ln|x-y| sigma(y) ds_y` on a polygon mesh.
///
/// Positive definite when the boundary diameter is below one; a larger
/// diameter only logs a warning since the matrix itself is still valid.
pub fn assemble_laplace_with(
    mesh: &MeshLevel,
    opts: AssemblyOptions,
) -> Result<RealSymmetricMatrix> {
    let ctx = polygon_context(mesh, opts, "Laplace assembly")?;
    if mesh.diameter >= 1.0 {
        log::warn!(
            "boundary diameter {:.3} >= 1: Laplace single layer form may be indefinite",
            mesh.diameter
        );
    }
    let kernel = |x: Point2, y: Point2| Complex64::new(-FRAC_1_2PI * x.distance(y).ln(), 0.0);
    let node_cache = cache_nodes(mesh, opts.far_order)?;
    let data = assemble_symmetric_kernel(
        &ctx,
        |i, j| {
            let log_part = log_double_integral(mesh.panel(i), mesh.panel(j))?;
            Ok(Complex64::new(-FRAC_1_2PI * log_part, 0.0))
        },
        |i, j| corner_pair_integral(mesh.panel(i), mesh.panel(j), &kernel, opts.corner_depth),
        |i, j, order, subdivide| {
            smooth_pair(mesh, &node_cache, opts.far_order, i, j, order, subdivide, &kernel)
        },
    )?;
    let n = mesh.panel_count();
    let mut m = RealSymmetricMatrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            m.set(i, j, data[i * n + j].re);
        }
    }
    Ok(m)
}

pub fn assemble_laplace(mesh: &MeshLevel) -> Result<RealSymmetricMatrix> {
    assemble_laplace_with(mesh, AssemblyOptions::default())
}

/// Laplace single layer matrix for any mesh kind: the Toeplitz fast path on
/// circles, panel-pair quadrature on polygons.
pub fn laplace_matrix(mesh: &MeshLevel) -> Result<RealSymmetricMatrix> {
    match &mesh.curve {
        CurveKind::Polygonal { .. } => assemble_laplace(mesh),
        CurveKind::Circular { .. } => assemble_circle_laplace(mesh),
    }
}

/// Laplace single layer matrix on a circle of radius `R < 1/2` with `N`
/// equal-angle arcs.
///
/// By rotational symmetry the matrix is symmetric Toeplitz and only the
/// first row is computed:
/// `[Lambda]_{ij} = -(R^2/4pi) { ln(2 R^2) (2pi/N)^2 + I_{|i-j|} }` with
/// `I_m` the angular double integral of `ln(1 - cos t)`. For `m <= 1` the
/// singular `ln(t^2)` part is integrated exactly and only the analytic
/// remainder of the splitting goes through Gauss quadrature.
pub fn assemble_circle_laplace(mesh: &MeshLevel) -> Result<RealSymmetricMatrix> {
    let CurveKind::Circular { radius, .. } = &mesh.curve else {
        return Err(Error::AssemblyFailure(
            "circle Laplace assembly requires a circular mesh".into(),
        ));
    };
    let radius = *radius;
    if radius >= 0.5 {
        return Err(Error::RadiusTooLarge(radius));
    }
    let n = mesh.panel_count();
    let w = 2.0 * core::f64::consts::PI / n as f64;
    let rule = gauss_rule(12)?;

    // Psi''(t) = ln|t|, so 2 Psi differences integrate the ln(t^2) part
    let psi = |t: f64| if t == 0.0 { 0.0 } else { 0.5 * t * t * (t.abs().ln() - 1.5) };
    let f_a = |t: f64| -> f64 {
        if t == 0.0 {
            -(2.0_f64.ln())
        } else {
            split_log_singularity(t).expect("|t| < pi inside arc integrals").1
        }
    };

    let mut first_row = vec![0.0; n];
    for m in 0..=(n / 2) {
        let i_m = if m <= 1 {
            let log_part = if m == 0 {
                // int int over [0,w]^2 of ln((t1 - t2)^2)
                4.0 * psi(w)
            } else {
                // arcs touching at one endpoint
                2.0 * (psi(2.0 * w) - 2.0 * psi(w))
            };
            let lo = m as f64 * w;
            let smooth_part =
                rule.integrate(0.0, w, |t1| rule.integrate(lo, lo + w, |t2| f_a(t1 - t2)));
            log_part + smooth_part
        } else {
            let lo = m as f64 * w;
            rule.integrate(0.0, w, |t1| {
                rule.integrate(lo, lo + w, |t2| (1.0 - (t1 - t2).cos()).ln())
            })
        };
        let entry = -(radius * radius / (4.0 * core::f64::consts::PI))
            * ((2.0 * radius * radius).ln() * w * w + i_m);
        first_row[m] = entry;
        if m > 0 {
            first_row[n - m] = entry;
        }
    }

    let mut out = RealSymmetricMatrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            out.set(i, j, first_row[(j + n - i) % n]);
        }
    }
    Ok(out)
}

/// Galerkin matrix of the double layer operator `K` on a polygon mesh.
///
/// Pairs on one straight line contribute exactly zero since `(x - y)` is
/// orthogonal to the normal there.
pub fn assemble_double_layer_with(
    mesh: &MeshLevel,
    kappa: f64,
    opts: AssemblyOptions,
) -> Result<ComplexDenseMatrix> {
    let ctx = polygon_context(mesh, opts, "double layer assembly")?;
    let normals = panel_normals(mesh);
    let n = mesh.panel_count();
    let node_cache = cache_nodes(mesh, opts.far_order)?;

    let rows: Vec<Result<Vec<Complex64>>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut row = Vec::with_capacity(n);
            for j in 0..n {
                let n_y = normals[j];
                let kernel = move |x: Point2, y: Point2| double_layer_kernel(kappa, x, y, n_y);
                let v = match ctx.classify(i, j) {
                    PairClass::SelfPanel | PairClass::Collinear => Complex64::new(0.0, 0.0),
                    PairClass::Corner => corner_pair_integral(
                        mesh.panel(i),
                        mesh.panel(j),
                        &kernel,
                        opts.corner_depth,
                    )?,
                    PairClass::Smooth { order, subdivide } => smooth_pair(
                        mesh,
                        &node_cache,
                        opts.far_order,
                        i,
                        j,
                        order,
                        subdivide,
                        &kernel,
                    ),
                };
                row.push(v);
            }
            Ok(row)
        })
        .collect();

    let mut m = ComplexDenseMatrix::zeros(n);
    for (i, row) in rows.into_iter().enumerate() {
        for (j, v) in row?.into_iter().enumerate() {
            m.set(i, j, v);
        }
    }
    Ok(m)
}

pub fn assemble_double_layer(mesh: &MeshLevel, kappa: f64) -> Result<ComplexDenseMatrix> {
    assemble_double_layer_with(mesh, kappa, AssemblyOptions::default())
}

/// Which boundary integral formulation produces the right-hand side.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Formulation {
    /// `b_i = int_panel [(1/2) g + K g] ds`: the trace of the representation
    /// formula; `g` enters `K` through its panel-wise L2 projection, which
    /// keeps the right-hand side assembly O(N^2).
    Direct,
    /// `b_i = int_panel g ds`: the single layer ansatz.
    Indirect,
}

/// Panel moments `int_panel g ds` by per-panel Gauss quadrature.
pub fn panel_moments<G>(mesh: &MeshLevel, g: &G, order: usize) -> Result<Vec<Complex64>>
where
    G: Fn(Point2) -> Complex64 + ?Sized,
{
    let rule = gauss_rule(order)?;
    let n = mesh.panel_count();
    let mut out = Vec::with_capacity(n);
    match &mesh.curve {
        CurveKind::Polygonal { .. } => {
            for i in 0..n {
                let (a, b) = mesh.panel(i);
                let mut acc = Complex64::new(0.0, 0.0);
                for (x, wx) in rule.points_on_segment(a, b) {
                    acc += g(x) * wx;
                }
                out.push(acc);
            }
        }
        CurveKind::Circular { center, radius, angles } => {
            let step = 2.0 * core::f64::consts::PI / n as f64;
            for i in 0..n {
                let t0 = angles[i];
                let mut acc = Complex64::new(0.0, 0.0);
                for (&xi, &wi) in rule.nodes.iter().zip(&rule.weights) {
                    let t = t0 + 0.5 * step * (xi + 1.0);
                    let p = *center + Point2::new(t.cos(), t.sin()) * *radius;
                    acc += g(p) * (wi * 0.5 * step * radius);
                }
                out.push(acc);
            }
        }
    }
    Ok(out)
}

/// Right-hand side vector `b_i = <f, phi_i>` for the chosen formulation.
pub fn assemble_rhs<G>(
    mesh: &MeshLevel,
    g: &G,
    formulation: Formulation,
    kappa: f64,
) -> Result<Vec<Complex64>>
where
    G: Fn(Point2) -> Complex64 + ?Sized,
{
    let moments = panel_moments(mesh, g, 16)?;
    match formulation {
        Formulation::Indirect => Ok(moments),
        Formulation::Direct => {
            let dl = assemble_double_layer(mesh, kappa)?;
            let averages: Vec<Complex64> =
                moments.iter().zip(&mesh.lengths).map(|(m, &l)| m / l).collect();
            let kg = dl.matvec(&averages);
            Ok(moments.iter().zip(&kg).map(|(m, k)| 0.5 * m + k).collect())
        }
    }
}

/// Write a matrix dump: magic `BEMM`, little-endian `u32` dimension, `u8`
/// kind, then `N^2` row-major `(re, im)` pairs of little-endian `f64`.
pub fn write_matrix_dump<P: AsRef<Path>>(
    path: P,
    kind: MatrixKind,
    matrix: &ComplexDenseMatrix,
) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(b"BEMM")?;
    w.write_all(&(matrix.dim() as u32).to_le_bytes())?;
    w.write_all(&[kind as u8])?;
    for i in 0..matrix.dim() {
        for j in 0..matrix.dim() {
            let v = matrix.get(i, j);
            w.write_all(&v.re.to_le_bytes())?;
            w.write_all(&v.im.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Real matrices go out in the same complex-pair layout.
pub fn write_real_matrix_dump<P: AsRef<Path>>(
    path: P,
    kind: MatrixKind,
    matrix: &RealSymmetricMatrix,
) -> Result<()> {
    write_matrix_dump(path, kind, &ComplexDenseMatrix::from_real(matrix))
}

pub fn read_matrix_dump<P: AsRef<Path>>(path: P) -> Result<(MatrixKind, ComplexDenseMatrix)> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != b"BEMM" {
        return Err(Error::AssemblyFailure("bad magic in matrix dump".into()));
    }
    let mut nb = [0u8; 4];
    r.read_exact(&mut nb)?;
    let n = u32::from_le_bytes(nb) as usize;
    let mut kb = [0u8; 1];
    r.read_exact(&mut kb)?;
    let kind = MatrixKind::from_u8(kb[0])?;
    let mut m = ComplexDenseMatrix::zeros(n);
    let mut buf = [0u8; 16];
    for i in 0..n {
        for j in 0..n {
            r.read_exact(&mut buf)?;
            let re = f64::from_le_bytes(buf[0..8].try_into().unwrap());
            let im = f64::from_le_bytes(buf[8..16].try_into().unwrap());
            m.set(i, j, Complex64::new(re, im));
        }
    }
    Ok((kind, m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_hierarchy, build_polygon, Boundary, CircleBoundary};

    pub(crate) fn square_mesh(divisions: usize, levels: usize) -> MeshLevel {
        let p = build_polygon(&[
            Point2::new(0.0, 0.0),
            Point2::new(0.5, 0.0),
            Point2::new(0.5, 0.5),
            Point2::new(0.0, 0.5),
        ])
        .unwrap();
        let d = [divisions; 4];
        build_hierarchy(&Boundary::Polygon(p), &d, levels).unwrap().levels.pop().unwrap()
    }

    #[test]
    fn laplace_is_symmetric_and_definite_on_coarse_square() {
        let mesh = square_mesh(2, 2); // N = 16
        let m = assemble_laplace(&mesh).unwrap();
        assert!(m.asymmetry() < 1e-13);
        let (values, _) = m.symmetric_eigen().unwrap();
        assert!(values[0] > 0.0, "smallest eigenvalue {}", values[0]);
    }

    #[test]
    fn helmholtz_symmetry_without_mirroring() {
        let mesh = square_mesh(2, 2);
        let opts = AssemblyOptions { exploit_symmetry: false, ..AssemblyOptions::default() };
        let v = assemble_helmholtz_with(&mesh, 2.1, opts).unwrap();
        assert!(v.asymmetry() < 1e-12, "asymmetry {}", v.asymmetry());
        // and the mirrored version matches
        let vm = assemble_helmholtz(&mesh, 2.1).unwrap();
        let mut worst = 0.0_f64;
        for i in 0..v.dim() {
            for j in 0..v.dim() {
                worst = worst.max((v.get(i, j) - vm.get(i, j)).norm());
            }
        }
        assert!(worst < 1e-12);
    }

    #[test]
    fn split_consistency_v_equals_lambda_plus_remainder() {
        let mesh = square_mesh(2, 2);
        let kappa = 2.1;
        let v = assemble_helmholtz(&mesh, kappa).unwrap();
        let lam = assemble_laplace(&mesh).unwrap();
        let m = assemble_smooth_remainder(&mesh, kappa).unwrap();
        let mut worst = 0.0_f64;
        for i in 0..v.dim() {
            for j in 0..v.dim() {
                let recon = Complex64::new(lam.get(i, j), 0.0) + m.get(i, j);
                worst = worst.max((v.get(i, j) - recon).norm());
            }
        }
        assert!(worst < 1e-8, "split inconsistency {worst}");
    }

    #[test]
    fn small_kappa_real_part_reduces_to_laplace_plus_gram() {
        // Re(V) ~ Lambda + (ln(2/kappa) - gamma)/(2 pi) * G for kappa -> 0
        let mesh = square_mesh(1, 2); // N = 8
        let kappa = 1e-3;
        let v = assemble_helmholtz(&mesh, kappa).unwrap();
        let lam = assemble_laplace(&mesh).unwrap();
        let shift = FRAC_1_2PI * ((2.0 / kappa).ln() - EULER_GAMMA);
        let mut worst = 0.0_f64;
        for i in 0..v.dim() {
            for j in 0..v.dim() {
                let gram = mesh.lengths[i] * mesh.lengths[j];
                let expect = lam.get(i, j) + shift * gram;
                worst = worst.max((v.get(i, j).re - expect).abs());
            }
        }
        // remainder of the small-argument expansion is O(kappa^2 log kappa)
        assert!(worst < 1e-5, "small-kappa mismatch {worst}");
    }

    #[test]
    fn circle_laplace_is_toeplitz_definite_with_exact_row_sums() {
        let c = CircleBoundary::new(Point2::new(0.0, 0.0), 0.3).unwrap();
        let h = build_hierarchy(&Boundary::Circle(c), &[60], 1).unwrap();
        let m = assemble_circle_laplace(&h.levels[0]).unwrap();
        let n = m.dim();
        // Toeplitz: entries depend only on (i - j) mod N
        let mut worst = 0.0_f64;
        for i in 0..n {
            for j in 0..n {
                worst = worst.max((m.get(i, j) - m.get(0, (j + n - i) % n)).abs());
            }
        }
        assert!(worst < 1e-15);
        // single layer potential of the unit density on a circle is -R ln R
        let r = 0.3_f64;
        let expect = -r * r.ln() * (2.0 * core::f64::consts::PI * r / n as f64);
        for i in 0..n {
            let sum: f64 = (0..n).map(|j| m.get(i, j)).sum();
            assert!((sum - expect).abs() < 1e-8, "row {i}: {sum} vs {expect}");
        }
        let (values, _) = m.symmetric_eigen().unwrap();
        assert!(values[0] > 0.0);
    }

    #[test]
    fn double_layer_straight_edge_pairs_vanish() {
        let mesh = square_mesh(4, 1); // 4 panels per edge
        let k = assemble_double_layer(&mesh, 2.1).unwrap();
        let CurveKind::Polygonal { edge_of_panel } = &mesh.curve else { unreachable!() };
        for i in 0..mesh.panel_count() {
            for j in 0..mesh.panel_count() {
                if edge_of_panel[i] == edge_of_panel[j] {
                    assert_eq!(k.get(i, j), Complex64::new(0.0, 0.0));
                }
            }
        }
    }

    #[test]
    fn rhs_indirect_of_ones_gives_panel_lengths() {
        let mesh = square_mesh(3, 2);
        let one = |_: Point2| Complex64::new(1.0, 0.0);
        let b = assemble_rhs(&mesh, &one, Formulation::Indirect, 2.1).unwrap();
        for (bi, &li) in b.iter().zip(&mesh.lengths) {
            assert!((bi.re - li).abs() < 1e-14 && bi.im.abs() < 1e-16);
        }
    }

    #[test]
    fn direct_and_indirect_rhs_differ() {
        let mesh = square_mesh(2, 2);
        let g = |p: Point2| Complex64::new(p.x + 0.3, p.y - 0.1);
        let bi = assemble_rhs(&mesh, &g, Formulation::Indirect, 2.1).unwrap();
        let bd = assemble_rhs(&mesh, &g, Formulation::Direct, 2.1).unwrap();
        let diff: f64 = bi.iter().zip(&bd).map(|(a, b)| (a - b).norm()).sum();
        assert!(diff > 1e-3, "K != I/2, the formulations must differ");
    }

    #[test]
    fn matrix_dump_roundtrip() {
        let mesh = square_mesh(1, 1);
        let v = assemble_helmholtz(&mesh, 2.1).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.bemm");
        write_matrix_dump(&path, MatrixKind::Helmholtz, &v).unwrap();
        let (kind, back) = read_matrix_dump(&path).unwrap();
        assert_eq!(kind, MatrixKind::Helmholtz);
        assert_eq!(back.dim(), v.dim());
        for i in 0..v.dim() {
            for j in 0..v.dim() {
                assert_eq!(back.get(i, j), v.get(i, j));
            }
        }
    }

    #[test]
    fn helmholtz_rejects_circles_and_bad_kappa() {
        let c = CircleBoundary::new(Point2::new(0.0, 0.0), 0.2).unwrap();
        let h = build_hierarchy(&Boundary::Circle(c), &[8], 1).unwrap();
        assert!(matches!(
            assemble_helmholtz(&h.levels[0], 2.0),
            Err(Error::AssemblyFailure(_))
        ));
        let mesh = square_mesh(1, 1);
        assert!(assemble_helmholtz(&mesh, -1.0).is_err());
    }
}
