//! Boundary curves and nested panel meshes.
//!
//! A boundary is either a simple closed polygon (counterclockwise) or a
//! circle of radius `R < 1/2`. Meshes are cyclic lists of panels: straight
//! segments on polygons, equal-angle arcs on circles. Refinement always
//! halves every panel at its midpoint, so level `k+1` has exactly twice the
//! panels of level `k` and every coarse panel is the union of its two
//! children. That nesting is what the 0/1 restriction matrices encode.

use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dot(self, other: Point2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the cross product.
    pub fn cross(self, other: Point2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, other: Point2) -> f64 {
        (self - other).norm()
    }

    pub fn midpoint(self, other: Point2) -> Point2 {
        Point2::new(0.5 * (self.x + other.x), 0.5 * (self.y + other.y))
    }
}

impl Add for Point2 {
    type Output = Point2;
    fn add(self, rhs: Point2) -> Point2 {
        Point2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Point2 {
    type Output = Point2;
    fn sub(self, rhs: Point2) -> Point2 {
        Point2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Point2 {
    type Output = Point2;
    fn mul(self, rhs: f64) -> Point2 {
        Point2::new(self.x * rhs, self.y * rhs)
    }
}

/// Distance from `p` to the segment `[a, b]`.
pub fn point_segment_distance(p: Point2, a: Point2, b: Point2) -> f64 {
    let ab = b - a;
    let len2 = ab.dot(ab);
    if len2 == 0.0 {
        return p.distance(a);
    }
    let t = ((p - a).dot(ab) / len2).clamp(0.0, 1.0);
    p.distance(a + ab * t)
}

/// Minimal distance between two segments.
pub fn segment_distance(a1: Point2, a2: Point2, b1: Point2, b2: Point2) -> f64 {
    if segments_intersect(a1, a2, b1, b2, 0.0) {
        return 0.0;
    }
    point_segment_distance(a1, b1, b2)
        .min(point_segment_distance(a2, b1, b2))
        .min(point_segment_distance(b1, a1, a2))
        .min(point_segment_distance(b2, a1, a2))
}

fn orient(a: Point2, b: Point2, c: Point2) -> f64 {
    (b - a).cross(c - a)
}

/// Segment intersection test including touching endpoints, with a tolerance
/// on the orientation predicates.
fn segments_intersect(a1: Point2, a2: Point2, b1: Point2, b2: Point2, eps: f64) -> bool {
    let d1 = orient(b1, b2, a1);
    let d2 = orient(b1, b2, a2);
    let d3 = orient(a1, a2, b1);
    let d4 = orient(a1, a2, b2);
    if ((d1 > eps && d2 < -eps) || (d1 < -eps && d2 > eps))
        && ((d3 > eps && d4 < -eps) || (d3 < -eps && d4 > eps))
    {
        return true;
    }
    let on_segment = |p: Point2, q1: Point2, q2: Point2, d: f64| -> bool {
        d.abs() <= eps
            && p.x <= q1.x.max(q2.x) + eps
            && p.x >= q1.x.min(q2.x) - eps
            && p.y <= q1.y.max(q2.y) + eps
            && p.y >= q1.y.min(q2.y) - eps
    };
    on_segment(a1, b1, b2, d1)
        || on_segment(a2, b1, b2, d2)
        || on_segment(b1, a1, a2, d3)
        || on_segment(b2, a1, a2, d4)
}

/// Simple closed polygon with counterclockwise orientation.
#[derive(Debug, Clone)]
pub struct PolygonBoundary {
    vertices: Vec<Point2>,
    edge_lengths: Vec<f64>,
    total_length: f64,
    diameter: f64,
}

impl PolygonBoundary {
    pub fn vertices(&self) -> &[Point2] {
        &self.vertices
    }

    pub fn edge_count(&self) -> usize {
        self.vertices.len()
    }

    /// Edge `j` runs from vertex `j` to vertex `j+1` (cyclic).
    pub fn edge(&self, j: usize) -> (Point2, Point2) {
        let n = self.vertices.len();
        (self.vertices[j], self.vertices[(j + 1) % n])
    }

    pub fn edge_lengths(&self) -> &[f64] {
        &self.edge_lengths
    }

    pub fn total_length(&self) -> f64 {
        self.total_length
    }

    pub fn diameter(&self) -> f64 {
        self.diameter
    }

    pub fn signed_area(&self) -> f64 {
        signed_area(&self.vertices)
    }

    pub fn centroid(&self) -> Point2 {
        // area centroid of the polygon
        let n = self.vertices.len();
        let mut a = 0.0;
        let mut cx = 0.0;
        let mut cy = 0.0;
        for i in 0..n {
            let p = self.vertices[i];
            let q = self.vertices[(i + 1) % n];
            let w = p.cross(q);
            a += w;
            cx += (p.x + q.x) * w;
            cy += (p.y + q.y) * w;
        }
        Point2::new(cx / (3.0 * a), cy / (3.0 * a))
    }

    /// Even-odd crossing test; points on the boundary count as outside.
    pub fn contains(&self, p: Point2) -> bool {
        let n = self.vertices.len();
        let mut inside = false;
        for i in 0..n {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            if (a.y > p.y) != (b.y > p.y) {
                let t = (p.y - a.y) / (b.y - a.y);
                if p.x < a.x + t * (b.x - a.x) {
                    inside = !inside;
                }
            }
        }
        inside
    }

    pub fn distance_to(&self, p: Point2) -> f64 {
        let n = self.vertices.len();
        (0..n)
            .map(|i| point_segment_distance(p, self.vertices[i], self.vertices[(i + 1) % n]))
            .fold(f64::INFINITY, f64::min)
    }
}

fn signed_area(vertices: &[Point2]) -> f64 {
    let n = vertices.len();
    let mut a = 0.0;
    for i in 0..n {
        a += vertices[i].cross(vertices[(i + 1) % n]);
    }
    0.5 * a
}

/// Build a [`PolygonBoundary`] from a vertex list.
///
/// Clockwise input is reversed to counterclockwise. Repeated consecutive
/// points and intersecting or touching non-adjacent edges are rejected.
pub fn build_polygon(vertices: &[Point2]) -> Result<PolygonBoundary> {
    if vertices.len() < 3 {
        return Err(Error::TooFewVertices(vertices.len()));
    }
    let scale = vertices
        .iter()
        .map(|v| v.x.abs().max(v.y.abs()))
        .fold(0.0_f64, f64::max)
        .max(1e-30);
    let eps = 1e-12 * scale;

    let n = vertices.len();
    for i in 0..n {
        if vertices[i].distance(vertices[(i + 1) % n]) <= eps {
            return Err(Error::DegenerateEdge(i));
        }
    }

    let mut verts = vertices.to_vec();
    let area = signed_area(&verts);
    if area.abs() <= eps * eps {
        return Err(Error::SelfIntersection(0, n - 1));
    }
    if area < 0.0 {
        verts.reverse();
    }

    // pairwise simplicity: non-adjacent edges may not intersect or touch
    let area_eps = eps * scale;
    for i in 0..n {
        let (a1, a2) = (verts[i], verts[(i + 1) % n]);
        for j in (i + 1)..n {
            let adjacent = j == i + 1 || (i == 0 && j == n - 1);
            if adjacent {
                continue;
            }
            let (b1, b2) = (verts[j], verts[(j + 1) % n]);
            if segments_intersect(a1, a2, b1, b2, area_eps) {
                return Err(Error::SelfIntersection(i, j));
            }
        }
    }
    // adjacent edges may share only their common vertex: reject U-turns
    for i in 0..n {
        let prev = verts[i];
        let mid = verts[(i + 1) % n];
        let next = verts[(i + 2) % n];
        let d1 = mid - prev;
        let d2 = next - mid;
        if d1.cross(d2).abs() <= area_eps && d1.dot(d2) < 0.0 {
            return Err(Error::SelfIntersection(i, (i + 1) % n));
        }
    }

    let edge_lengths: Vec<f64> =
        (0..n).map(|i| verts[i].distance(verts[(i + 1) % n])).collect();
    let total_length = edge_lengths.iter().sum();
    let mut diameter = 0.0_f64;
    for i in 0..n {
        for j in (i + 1)..n {
            diameter = diameter.max(verts[i].distance(verts[j]));
        }
    }
    Ok(PolygonBoundary { vertices: verts, edge_lengths, total_length, diameter })
}

/// Circle boundary; `R < 1/2` keeps the Laplace single layer operator
/// positive definite.
#[derive(Debug, Clone, Copy)]
pub struct CircleBoundary {
    pub center: Point2,
    pub radius: f64,
}

impl CircleBoundary {
    pub fn new(center: Point2, radius: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::DomainError { function: "circle radius", argument: radius });
        }
        if radius >= 0.5 {
            return Err(Error::RadiusTooLarge(radius));
        }
        Ok(Self { center, radius })
    }

    pub fn total_length(&self) -> f64 {
        2.0 * core::f64::consts::PI * self.radius
    }
}

#[derive(Debug, Clone)]
pub enum Boundary {
    Polygon(PolygonBoundary),
    Circle(CircleBoundary),
}

impl Boundary {
    pub fn total_length(&self) -> f64 {
        match self {
            Boundary::Polygon(p) => p.total_length(),
            Boundary::Circle(c) => c.total_length(),
        }
    }

    pub fn diameter(&self) -> f64 {
        match self {
            Boundary::Polygon(p) => p.diameter(),
            Boundary::Circle(c) => 2.0 * c.radius,
        }
    }
}

/// Geometry of the panels in one mesh level.
#[derive(Debug, Clone)]
pub enum CurveKind {
    /// Straight panels; `edge_of_panel[i]` is the polygon edge carrying panel `i`.
    Polygonal { edge_of_panel: Vec<usize> },
    /// Equal-angle arcs; panel `i` spans `angles[i]..angles[i+1 mod N]`.
    Circular { center: Point2, radius: f64, angles: Vec<f64> },
}

/// One level of the nested panel hierarchy.
///
/// Nodes are a counterclockwise cyclic enumeration; panel `i` is
/// `conv(x_i, x_{i+1})` with `x_{N} = x_0`, and carries the characteristic
/// basis function of the piecewise constant space.
#[derive(Debug, Clone)]
pub struct MeshLevel {
    pub level: usize,
    pub nodes: Vec<Point2>,
    pub lengths: Vec<f64>,
    /// Arclength of each panel start; `arclength[0] = 0`.
    pub arclength: Vec<f64>,
    pub total_length: f64,
    pub h_max: f64,
    pub diameter: f64,
    pub curve: CurveKind,
}

impl MeshLevel {
    pub fn panel_count(&self) -> usize {
        self.nodes.len()
    }

    /// Panel endpoints `(x_i, x_{i+1})`.
    pub fn panel(&self, i: usize) -> (Point2, Point2) {
        let n = self.nodes.len();
        (self.nodes[i], self.nodes[(i + 1) % n])
    }

    /// On-curve midpoint of panel `i` (arc midpoint for circles).
    pub fn panel_midpoint(&self, i: usize) -> Point2 {
        match &self.curve {
            CurveKind::Polygonal { .. } => {
                let (a, b) = self.panel(i);
                a.midpoint(b)
            }
            CurveKind::Circular { center, radius, angles } => {
                let n = angles.len();
                let a0 = angles[i];
                let step = 2.0 * core::f64::consts::PI / n as f64;
                let t = a0 + 0.5 * step;
                *center + Point2::new(t.cos(), t.sin()) * *radius
            }
        }
    }

    /// Arclength midpoint of panel `i` (plot abscissa).
    pub fn arclength_midpoint(&self, i: usize) -> f64 {
        self.arclength[i] + 0.5 * self.lengths[i]
    }

    pub fn is_polygonal(&self) -> bool {
        matches!(self.curve, CurveKind::Polygonal { .. })
    }

    pub fn distance_to(&self, p: Point2) -> f64 {
        match &self.curve {
            CurveKind::Polygonal { .. } => {
                let n = self.panel_count();
                (0..n)
                    .map(|i| {
                        let (a, b) = self.panel(i);
                        point_segment_distance(p, a, b)
                    })
                    .fold(f64::INFINITY, f64::min)
            }
            CurveKind::Circular { center, radius, .. } => (p.distance(*center) - radius).abs(),
        }
    }
}

/// 0/1 restriction matrix `C_k` between consecutive levels.
///
/// Row `i` holds ones at the two fine panels whose union is coarse panel
/// `i`; applied to moment vectors it restricts, its transpose embeds coarse
/// coefficient vectors into the fine space.
#[derive(Debug, Clone)]
pub struct RestrictionMatrix {
    n_coarse: usize,
    n_fine: usize,
    children: Vec<[usize; 2]>,
}

impl RestrictionMatrix {
    fn midpoint_refinement(n_coarse: usize) -> Self {
        let children = (0..n_coarse).map(|i| [2 * i, 2 * i + 1]).collect();
        Self { n_coarse, n_fine: 2 * n_coarse, children }
    }

    pub fn n_coarse(&self) -> usize {
        self.n_coarse
    }

    pub fn n_fine(&self) -> usize {
        self.n_fine
    }

    pub fn children(&self, i: usize) -> [usize; 2] {
        self.children[i]
    }

    pub fn entry(&self, i: usize, l: usize) -> f64 {
        let [a, b] = self.children[i];
        if l == a || l == b {
            1.0
        } else {
            0.0
        }
    }

    /// `C v`: sum fine values over the children of each coarse panel.
    pub fn restrict(&self, fine: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(fine.len(), self.n_fine);
        self.children.iter().map(|&[a, b]| fine[a] + fine[b]).collect()
    }

    /// `C^t v`: copy each coarse value onto its two children.
    pub fn prolong(&self, coarse: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(coarse.len(), self.n_coarse);
        let mut fine = vec![Complex64::new(0.0, 0.0); self.n_fine];
        for (i, &[a, b]) in self.children.iter().enumerate() {
            fine[a] = coarse[i];
            fine[b] = coarse[i];
        }
        fine
    }

    pub fn prolong_real(&self, coarse: &[f64]) -> Vec<f64> {
        assert_eq!(coarse.len(), self.n_coarse);
        let mut fine = vec![0.0; self.n_fine];
        for (i, &[a, b]) in self.children.iter().enumerate() {
            fine[a] = coarse[i];
            fine[b] = coarse[i];
        }
        fine
    }
}

/// Nested cyclic panel meshes `M_1 subset ... subset M_J`.
#[derive(Debug, Clone)]
pub struct MeshHierarchy {
    pub boundary: Boundary,
    pub levels: Vec<MeshLevel>,
    /// `restrictions[k]` connects `levels[k]` (coarse) and `levels[k+1]`.
    pub restrictions: Vec<RestrictionMatrix>,
}

impl MeshHierarchy {
    pub fn level_count(&self) -> usize {
        self.levels.len()
    }

    pub fn finest(&self) -> &MeshLevel {
        self.levels.last().expect("hierarchy has at least one level")
    }
}

/// Build `levels` nested meshes over `boundary`.
///
/// For polygons, `divisions[j]` is the number of equal coarse panels on
/// edge `j`, so corners are always mesh nodes. For circles a single entry
/// gives the number of equal-angle coarse arcs. Refinement halves every
/// panel at its midpoint (angle midpoint for arcs).
pub fn build_hierarchy(
    boundary: &Boundary,
    divisions: &[usize],
    levels: usize,
) -> Result<MeshHierarchy> {
    assert!(levels >= 1, "need at least one level");
    let coarse = match boundary {
        Boundary::Polygon(p) => {
            if divisions.len() != p.edge_count() {
                return Err(Error::DimensionMismatch {
                    expected: p.edge_count(),
                    got: divisions.len(),
                });
            }
            let n1: usize = divisions.iter().sum();
            if divisions.iter().any(|&d| d == 0) || n1 < 4 {
                return Err(Error::TooCoarse(n1));
            }
            let mut nodes = Vec::with_capacity(n1);
            let mut edge_of_panel = Vec::with_capacity(n1);
            for (j, &d) in divisions.iter().enumerate() {
                let (a, b) = p.edge(j);
                for t in 0..d {
                    let s = t as f64 / d as f64;
                    nodes.push(a + (b - a) * s);
                    edge_of_panel.push(j);
                }
            }
            polygon_level(1, nodes, edge_of_panel, p.diameter())
        }
        Boundary::Circle(c) => {
            if divisions.len() != 1 {
                return Err(Error::DimensionMismatch { expected: 1, got: divisions.len() });
            }
            let n1 = divisions[0];
            if n1 < 4 {
                return Err(Error::TooCoarse(n1));
            }
            circle_level(1, c.center, c.radius, n1)
        }
    };

    let mut mesh_levels = vec![coarse];
    let mut restrictions = Vec::new();
    for k in 1..levels {
        let prev = &mesh_levels[k - 1];
        let next = refine(prev, k + 1);
        restrictions.push(RestrictionMatrix::midpoint_refinement(prev.panel_count()));
        mesh_levels.push(next);
    }
    Ok(MeshHierarchy { boundary: boundary.clone(), levels: mesh_levels, restrictions })
}

fn polygon_level(
    level: usize,
    nodes: Vec<Point2>,
    edge_of_panel: Vec<usize>,
    diameter: f64,
) -> MeshLevel {
    let n = nodes.len();
    let lengths: Vec<f64> = (0..n).map(|i| nodes[i].distance(nodes[(i + 1) % n])).collect();
    finish_level(level, nodes, lengths, diameter, CurveKind::Polygonal { edge_of_panel })
}

fn circle_level(level: usize, center: Point2, radius: f64, n: usize) -> MeshLevel {
    let step = 2.0 * core::f64::consts::PI / n as f64;
    let angles: Vec<f64> = (0..n).map(|i| i as f64 * step).collect();
    let nodes: Vec<Point2> =
        angles.iter().map(|&t| center + Point2::new(t.cos(), t.sin()) * radius).collect();
    let lengths = vec![radius * step; n];
    finish_level(level, nodes, lengths, 2.0 * radius, CurveKind::Circular {
        center,
        radius,
        angles,
    })
}

fn finish_level(
    level: usize,
    nodes: Vec<Point2>,
    lengths: Vec<f64>,
    diameter: f64,
    curve: CurveKind,
) -> MeshLevel {
    let mut arclength = Vec::with_capacity(lengths.len());
    let mut s = 0.0;
    for &l in &lengths {
        arclength.push(s);
        s += l;
    }
    let h_max = lengths.iter().copied().fold(0.0_f64, f64::max);
    MeshLevel { level, nodes, lengths, arclength, total_length: s, h_max, diameter, curve }
}

fn refine(mesh: &MeshLevel, new_level: usize) -> MeshLevel {
    let n = mesh.panel_count();
    match &mesh.curve {
        CurveKind::Polygonal { edge_of_panel } => {
            let mut nodes = Vec::with_capacity(2 * n);
            let mut edges = Vec::with_capacity(2 * n);
            for i in 0..n {
                let (a, b) = mesh.panel(i);
                nodes.push(a);
                nodes.push(a.midpoint(b));
                edges.push(edge_of_panel[i]);
                edges.push(edge_of_panel[i]);
            }
            polygon_level(new_level, nodes, edges, mesh.diameter)
        }
        CurveKind::Circular { center, radius, angles } => {
            // keep angles exact: regenerate the uniform grid at 2N
            let _ = angles;
            circle_level(new_level, *center, *radius, 2 * n)
        }
    }
}

/// The coefficient map `e_k`: for piecewise constants the basis coefficients
/// are the panel values themselves, so this validates the dimension and
/// passes the data through.
pub fn coefficient_map(mesh: &MeshLevel, panel_values: &[Complex64]) -> Result<Vec<Complex64>> {
    if panel_values.len() != mesh.panel_count() {
        return Err(Error::LevelMismatch {
            expected: mesh.panel_count(),
            got: panel_values.len(),
        });
    }
    Ok(panel_values.to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn unit_half_square() -> PolygonBoundary {
        build_polygon(&[
            Point2::new(0.0, 0.0),
            Point2::new(0.5, 0.0),
            Point2::new(0.5, 0.5),
            Point2::new(0.0, 0.5),
        ])
        .unwrap()
    }

    #[test]
    fn half_square_measures() {
        let p = unit_half_square();
        assert!((p.total_length() - 2.0).abs() < 1e-15);
        assert!((p.diameter() - 0.5 * 2.0_f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn clockwise_input_is_reversed() {
        let ccw = unit_half_square();
        let cw = build_polygon(&[
            Point2::new(0.0, 0.0),
            Point2::new(0.0, 0.5),
            Point2::new(0.5, 0.5),
            Point2::new(0.5, 0.0),
        ])
        .unwrap();
        assert!(cw.signed_area() > 0.0);
        assert!((cw.signed_area() - ccw.signed_area()).abs() < 1e-15);
    }

    #[test]
    fn repeated_point_is_degenerate() {
        let err = build_polygon(&[
            Point2::new(0.0, 0.0),
            Point2::new(0.5, 0.0),
            Point2::new(0.5, 0.0),
            Point2::new(0.0, 0.5),
        ])
        .unwrap_err();
        assert!(matches!(err, Error::DegenerateEdge(_)));
    }

    #[test]
    fn bowtie_is_rejected() {
        let err = build_polygon(&[
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 1.0),
            Point2::new(1.0, 0.0),
            Point2::new(0.0, 1.0),
        ])
        .unwrap_err();
        assert!(matches!(err, Error::SelfIntersection(_, _)));
        assert!(matches!(
            build_polygon(&[Point2::new(0.0, 0.0), Point2::new(1.0, 0.0)]).unwrap_err(),
            Error::TooFewVertices(2)
        ));
    }

    #[test]
    fn square_hierarchy_panel_counts_and_lengths() {
        let b = Boundary::Polygon(unit_half_square());
        let h = build_hierarchy(&b, &[2, 2, 2, 2], 3).unwrap();
        let expect = [(8usize, 0.25), (16, 0.125), (32, 0.0625)];
        for (k, &(n, l)) in expect.iter().enumerate() {
            assert_eq!(h.levels[k].panel_count(), n);
            for &len in &h.levels[k].lengths {
                assert!((len - l).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn circle_hierarchy_equal_arcs() {
        let c = CircleBoundary::new(Point2::new(0.0, 0.0), 0.3).unwrap();
        let h = build_hierarchy(&Boundary::Circle(c), &[10], 2).unwrap();
        let expect = 2.0 * core::f64::consts::PI * 0.3 / 20.0;
        assert_eq!(h.levels[1].panel_count(), 20);
        for &l in &h.levels[1].lengths {
            assert!((l - expect).abs() < 1e-14);
        }
    }

    #[test]
    fn restriction_row_sums_are_two() {
        let b = Boundary::Polygon(unit_half_square());
        let h = build_hierarchy(&b, &[3, 2, 3, 2], 3).unwrap();
        for r in &h.restrictions {
            let ones = vec![Complex64::new(1.0, 0.0); r.n_fine()];
            for v in r.restrict(&ones) {
                assert_eq!(v, Complex64::new(2.0, 0.0));
            }
            // column sums are one: every fine panel has exactly one parent
            let mut seen = vec![0usize; r.n_fine()];
            for i in 0..r.n_coarse() {
                for c in r.children(i) {
                    seen[c] += 1;
                }
            }
            assert!(seen.iter().all(|&s| s == 1));
        }
    }

    #[test]
    fn level_lengths_sum_to_boundary_length() {
        let b = Boundary::Polygon(
            build_polygon(&[
                Point2::new(0.0, 0.0),
                Point2::new(0.4, 0.1),
                Point2::new(0.3, 0.45),
                Point2::new(-0.1, 0.3),
            ])
            .unwrap(),
        );
        let h = build_hierarchy(&b, &[2, 3, 1, 2], 5).unwrap();
        let total = b.total_length();
        for level in &h.levels {
            let sum: f64 = level.lengths.iter().sum();
            assert!((sum - total).abs() <= 1e-12 * total, "level {}", level.level);
        }
    }

    #[test]
    fn children_cover_parent_panels() {
        let b = Boundary::Polygon(unit_half_square());
        let h = build_hierarchy(&b, &[2, 1, 2, 1], 4).unwrap();
        for k in 0..h.levels.len() - 1 {
            let coarse = &h.levels[k];
            let fine = &h.levels[k + 1];
            let r = &h.restrictions[k];
            for i in 0..coarse.panel_count() {
                let (a, b) = coarse.panel(i);
                let [c0, c1] = r.children(i);
                let (f0a, f0b) = fine.panel(c0);
                let (f1a, f1b) = fine.panel(c1);
                assert!(f0a.distance(a) < 1e-14);
                assert!(f0b.distance(f1a) < 1e-14);
                assert!(f1b.distance(b) < 1e-14);
            }
        }
    }

    #[test]
    fn too_coarse_is_rejected() {
        let tri = build_polygon(&[
            Point2::new(0.0, 0.0),
            Point2::new(0.25, 0.0),
            Point2::new(0.125, 0.2),
        ])
        .unwrap();
        let err = build_hierarchy(&Boundary::Polygon(tri), &[1, 1, 1], 2).unwrap_err();
        assert!(matches!(err, Error::TooCoarse(3)));
    }

    #[test]
    fn coefficient_map_is_identity_on_panel_values() {
        let b = Boundary::Polygon(unit_half_square());
        let h = build_hierarchy(&b, &[2, 2, 2, 2], 2).unwrap();
        let mesh = &h.levels[0];
        let ones = vec![Complex64::new(1.0, 0.0); 8];
        assert_eq!(coefficient_map(mesh, &ones).unwrap(), ones);
        let mut indicator = vec![Complex64::new(0.0, 0.0); 8];
        indicator[2] = Complex64::new(1.0, 0.0);
        assert_eq!(coefficient_map(mesh, &indicator).unwrap(), indicator);
        assert!(matches!(
            coefficient_map(mesh, &ones[..5]).unwrap_err(),
            Error::LevelMismatch { expected: 8, got: 5 }
        ));
    }

    #[test]
    fn coarse_embedding_via_prolongation() {
        // e_k(g) = C_{k-1}^t e_{k-1}(g) for coarse panel functions g
        let b = Boundary::Polygon(unit_half_square());
        let h = build_hierarchy(&b, &[2, 2, 2, 2], 2).unwrap();
        let coarse_values: Vec<Complex64> =
            (0..8).map(|i| Complex64::new(i as f64, -(i as f64))).collect();
        let fine = h.restrictions[0].prolong(&coarse_values);
        // the embedded function takes the parent value on both children
        for i in 0..8 {
            assert_eq!(fine[2 * i], coarse_values[i]);
            assert_eq!(fine[2 * i + 1], coarse_values[i]);
        }
    }

    #[test]
    fn contains_and_distance() {
        let p = unit_half_square();
        assert!(p.contains(Point2::new(0.25, 0.25)));
        assert!(!p.contains(Point2::new(0.75, 0.25)));
        assert!((p.distance_to(Point2::new(0.25, 0.25)) - 0.25).abs() < 1e-15);
        let c = p.centroid();
        assert!((c.x - 0.25).abs() < 1e-15 && (c.y - 0.25).abs() < 1e-15);
    }
}
