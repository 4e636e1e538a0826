//! Boundary element solvers for the 2D acoustic single layer equation
//! `V sigma = f` on closed polygonal and circular curves.
//!
//! The discretization is a Galerkin method with piecewise constant panel
//! functions. Because the single layer operator has order minus one, plain
//! Richardson/Jacobi smoothing is useless for multigrid: small eigenvalues
//! belong to highly oscillatory eigenfunctions. The multigrid scheme here
//! damps the residual through a computable surrogate of the `H^{-1}(Gamma)`
//! inner product built from a periodic finite-difference discretization of
//! `-u'' + u` along the curve, which restores the spectral ordering that
//! geometric multigrid needs.
//!
//! Module map:
//! - [`geometry`]: boundary curves, nested panel hierarchies, intergrid transfers
//! - [`specfun`]: Bessel/Hankel functions for the Helmholtz kernel
//! - [`quadrature`]: Gauss rules and weakly singular panel-pair integration
//! - [`assembly`]: dense Galerkin matrices for `V`, `Lambda`, `K` and right-hand sides
//! - [`weak_product`]: the cyclic tridiagonal operator realizing the weak inner product
//! - [`multigrid`]: smoother, V-cycle, linear iteration, preconditioner
//! - [`krylov`]: complex GMRES without restart
//! - [`analysis`]: spectral studies, norm equivalence and contraction measurements
//! - [`problems`]: test problems, field evaluation, experiment sweeps

pub mod analysis;
pub mod assembly;
pub mod geometry;
pub mod krylov;
pub mod linalg;
pub mod multigrid;
pub mod problems;
pub mod quadrature;
pub mod specfun;
pub mod weak_product;

use std::fmt;

/// Errors shared across the solver stack.
///
/// Non-convergence of an iterative solve is not an error: it is reported
/// through [`multigrid::SolveReport::converged`], since diverging cells are
/// expected data in the high-frequency sweeps.
#[derive(Debug)]
pub enum Error {
    /// A polygon needs at least three vertices.
    TooFewVertices(usize),
    /// Edge of (numerically) zero length at the given vertex index.
    DegenerateEdge(usize),
    /// Two non-adjacent edges intersect or touch.
    SelfIntersection(usize, usize),
    /// Circle radius must satisfy `R < 1/2` for a positive definite
    /// Laplace single layer operator.
    RadiusTooLarge(f64),
    /// Coarsest mesh has too few panels for the cyclic stencil.
    TooCoarse(usize),
    /// Panel data does not belong to the expected mesh level.
    LevelMismatch { expected: usize, got: usize },
    /// Argument outside the domain of a special function.
    DomainError { function: &'static str, argument: f64 },
    /// Gauss rule order outside the supported range 1..=32.
    UnsupportedOrder(usize),
    /// The panels handed to the analytic log integral are not collinear.
    NotCollinear,
    /// Corner-pair quadrature needs panels sharing exactly one vertex.
    NoSharedVertex,
    /// Vector length does not match the operator dimension.
    DimensionMismatch { expected: usize, got: usize },
    /// A linear system pivot vanished.
    SingularSystem,
    /// Matrix assembly failed (unsupported mesh kind or invalid input).
    AssemblyFailure(String),
    /// The coarse-level system matrix is singular.
    CoarseSolveFailure,
    /// An iterative estimate failed to settle within its iteration budget.
    NoConvergence(&'static str),
    /// Arnoldi breakdown with a residual still above tolerance.
    Stagnation { iteration: usize, residual: f64 },
    /// Dense eigensolver did not converge.
    EigenFailure(String),
    /// Point source must lie strictly inside the scatterer.
    SourceOutside,
    /// Point source too close to the boundary curve.
    SourceOnBoundary,
    /// Field evaluation point lies inside the scatterer.
    PointInside(usize),
    /// Field evaluation point closer to the boundary than one mesh width.
    PointTooClose(usize),
    /// Boundary data could not be evaluated.
    EvaluationFailure(String),
    /// File I/O while reading or writing matrix dumps.
    Io(std::io::Error),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::TooFewVertices(n) => write!(f, "polygon needs >= 3 vertices, got {n}"),
            Error::DegenerateEdge(i) => write!(f, "zero-length edge at vertex {i}"),
            Error::SelfIntersection(i, j) => write!(f, "edges {i} and {j} intersect"),
            Error::RadiusTooLarge(r) => write!(f, "circle radius {r} must be < 1/2"),
            Error::TooCoarse(n) => write!(f, "coarsest mesh has {n} panels, need >= 4"),
            Error::LevelMismatch { expected, got } => {
                write!(f, "panel vector of length {got} on a level with {expected} panels")
            }
            Error::DomainError { function, argument } => {
                write!(f, "{function} undefined at argument {argument}")
            }
            Error::UnsupportedOrder(n) => write!(f, "Gauss order {n} outside 1..=32"),
            Error::NotCollinear => write!(f, "panels are not collinear"),
            Error::NoSharedVertex => write!(f, "panels do not share exactly one vertex"),
            Error::DimensionMismatch { expected, got } => {
                write!(f, "dimension mismatch: expected {expected}, got {got}")
            }
            Error::SingularSystem => write!(f, "singular cyclic tridiagonal system"),
            Error::AssemblyFailure(msg) => write!(f, "assembly failed: {msg}"),
            Error::CoarseSolveFailure => write!(f, "coarse system matrix is singular"),
            Error::NoConvergence(what) => write!(f, "{what} did not converge"),
            Error::Stagnation { iteration, residual } => {
                write!(f, "GMRES stagnated at iteration {iteration}, residual {residual:.3e}")
            }
            Error::EigenFailure(msg) => write!(f, "eigensolver failed: {msg}"),
            Error::SourceOutside => write!(f, "point source lies outside the scatterer"),
            Error::SourceOnBoundary => write!(f, "point source lies on the boundary"),
            Error::PointInside(i) => write!(f, "evaluation point {i} lies inside the scatterer"),
            Error::PointTooClose(i) => write!(f, "evaluation point {i} too close to the boundary"),
            Error::EvaluationFailure(msg) => write!(f, "evaluation failed: {msg}"),
            Error::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io(e) => Some(e),
            _ => None,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e)
    }
}

pub type Result<T> = std::result::Result<T, Error>;
