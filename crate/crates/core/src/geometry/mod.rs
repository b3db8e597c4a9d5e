//! Implicit geometry queries.
//!
//! Every geometry provider (analytic shapes, triangle soups, neural implicit
//! networks) answers the same four questions about a point: its signed
//! distance, the gradient of that distance, whether it lies inside, and the
//! vector to the closest point on the boundary.
//!
//! Sign convention is fixed crate-wide: `f < 0` inside, `f > 0` outside,
//! `f = 0` on the boundary. Points exactly on the boundary are outside.

mod analytic;
mod bvh;
mod icosphere;
mod mesh_io;
mod soup;

pub use analytic::{AnalyticShape, Annulus2d, BoxShape, Gyroid, HalfSpace, Sphere};
pub use bvh::Bvh;
pub use icosphere::icosphere;
pub use mesh_io::{load_soup, parse_obj, parse_stl, write_obj, MeshIoError};
pub use soup::{
    closest_point_on_triangle, rescale_soup, DomainTransform, SoupQuery, TriangleSoup,
    RAY_DIRECTION,
};

use nalgebra::Vector3;
use thiserror::Error;

/// Spatial point. Two-dimensional geometries ignore the `z` component.
pub type Point = Vector3<f64>;

/// Default central-difference step in canonical domain units.
pub const DEFAULT_FD_STEP: f64 = 5e-4;

/// Gradients shorter than this are treated as degenerate.
pub const DEGENERATE_GRADIENT_NORM: f64 = 1e-8;

/// Accepted gradient-norm window for finite-difference providers.
pub const FD_GRADIENT_NORM_RANGE: (f64, f64) = (0.5, 2.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignConvention {
    NegativeInside,
    PositiveInside,
}

impl SignConvention {
    /// Factor that converts a value in this convention to negative-inside.
    pub fn to_runtime_factor(self) -> f64 {
        match self {
            SignConvention::NegativeInside => 1.0,
            SignConvention::PositiveInside => -1.0,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("degenerate gradient (norm {norm:e}) at {point:?}")]
    DegenerateGradient { point: [f64; 3], norm: f64 },
    #[error("finite-difference gradient norm {norm} outside [0.5, 2.0] at {point:?}")]
    GradientOutOfRange { point: [f64; 3], norm: f64 },
    #[error("ray parity ambiguous after {retries} perturbed retries at {point:?}")]
    AmbiguousSign { point: [f64; 3], retries: usize },
    #[error("bounding box has zero extent along axis {axis}")]
    DegenerateBounds { axis: usize },
    #[error("empty triangle soup")]
    EmptySoup,
    #[error("invalid shape parameters: {0}")]
    InvalidShape(String),
    #[error("point dimension {got} does not match geometry dimension {expected}")]
    DimensionMismatch { expected: usize, got: usize },
}

pub(crate) fn as_array(p: &Point) -> [f64; 3] {
    [p.x, p.y, p.z]
}

/// Uniform query contract over every geometry provider.
pub trait ImplicitGeometry: Send + Sync {
    /// Spatial dimension, 2 or 3.
    fn dim(&self) -> usize;

    fn signed_distance(&self, x: &Point) -> f64;

    /// Gradient of the signed distance. The default is central differences
    /// with [`DEFAULT_FD_STEP`].
    fn gradient(&self, x: &Point) -> Result<Point, GeometryError> {
        central_difference_gradient(self, x, DEFAULT_FD_STEP)
    }

    fn inside(&self, x: &Point) -> bool {
        self.signed_distance(x) < 0.0
    }

    /// `d = -f(x) * grad f / |grad f|`; zero on the boundary.
    fn distance_vector(&self, x: &Point) -> Result<Point, GeometryError> {
        let f = self.signed_distance(x);
        if f == 0.0 {
            return Ok(Point::zeros());
        }
        let g = self.gradient(x)?;
        Ok(distance_vector_from(f, &g))
    }

    /// True when `|f|` is the exact Euclidean distance to the boundary.
    fn is_exact(&self) -> bool;
}

impl<G: ImplicitGeometry + ?Sized> ImplicitGeometry for &G {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn signed_distance(&self, x: &Point) -> f64 {
        (**self).signed_distance(x)
    }
    fn gradient(&self, x: &Point) -> Result<Point, GeometryError> {
        (**self).gradient(x)
    }
    fn inside(&self, x: &Point) -> bool {
        (**self).inside(x)
    }
    fn distance_vector(&self, x: &Point) -> Result<Point, GeometryError> {
        (**self).distance_vector(x)
    }
    fn is_exact(&self) -> bool {
        (**self).is_exact()
    }
}

impl<G: ImplicitGeometry + ?Sized> ImplicitGeometry for Box<G> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn signed_distance(&self, x: &Point) -> f64 {
        (**self).signed_distance(x)
    }
    fn gradient(&self, x: &Point) -> Result<Point, GeometryError> {
        (**self).gradient(x)
    }
    fn inside(&self, x: &Point) -> bool {
        (**self).inside(x)
    }
    fn distance_vector(&self, x: &Point) -> Result<Point, GeometryError> {
        (**self).distance_vector(x)
    }
    fn is_exact(&self) -> bool {
        (**self).is_exact()
    }
}

impl<G: ImplicitGeometry + ?Sized> ImplicitGeometry for std::sync::Arc<G> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn signed_distance(&self, x: &Point) -> f64 {
        (**self).signed_distance(x)
    }
    fn gradient(&self, x: &Point) -> Result<Point, GeometryError> {
        (**self).gradient(x)
    }
    fn inside(&self, x: &Point) -> bool {
        (**self).inside(x)
    }
    fn distance_vector(&self, x: &Point) -> Result<Point, GeometryError> {
        (**self).distance_vector(x)
    }
    fn is_exact(&self) -> bool {
        (**self).is_exact()
    }
}

/// `-f * g / |g|`, the closest-point offset for a signed distance value and
/// its (not necessarily unit) gradient.
pub fn distance_vector_from(f: f64, gradient: &Point) -> Point {
    let norm = gradient.norm();
    if f == 0.0 || norm == 0.0 {
        return Point::zeros();
    }
    gradient * (-f / norm)
}

/// Central differences, two stencil points per axis. Rejects degenerate
/// gradients and norms outside [`FD_GRADIENT_NORM_RANGE`].
pub fn central_difference_gradient<G: ImplicitGeometry + ?Sized>(
    geom: &G,
    x: &Point,
    step: f64,
) -> Result<Point, GeometryError> {
    let mut g = Point::zeros();
    for k in 0..geom.dim() {
        let mut plus = *x;
        let mut minus = *x;
        plus[k] += step;
        minus[k] -= step;
        g[k] = (geom.signed_distance(&plus) - geom.signed_distance(&minus)) / (2.0 * step);
    }
    check_fd_gradient(x, g)
}

pub(crate) fn check_fd_gradient(x: &Point, g: Point) -> Result<Point, GeometryError> {
    let norm = g.norm();
    if norm < DEGENERATE_GRADIENT_NORM {
        return Err(GeometryError::DegenerateGradient {
            point: as_array(x),
            norm,
        });
    }
    let (lo, hi) = FD_GRADIENT_NORM_RANGE;
    if !(lo..=hi).contains(&norm) {
        return Err(GeometryError::GradientOutOfRange {
            point: as_array(x),
            norm,
        });
    }
    Ok(g)
}

/// Wraps a provider and forces finite-difference gradients, regardless of
/// whether it has an analytic one.
pub struct FdGradient<G> {
    pub inner: G,
    pub step: f64,
}

impl<G: ImplicitGeometry> FdGradient<G> {
    pub fn new(inner: G) -> Self {
        Self {
            inner,
            step: DEFAULT_FD_STEP,
        }
    }

    pub fn with_step(inner: G, step: f64) -> Self {
        Self { inner, step }
    }
}

impl<G: ImplicitGeometry> ImplicitGeometry for FdGradient<G> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn signed_distance(&self, x: &Point) -> f64 {
        self.inner.signed_distance(x)
    }
    fn gradient(&self, x: &Point) -> Result<Point, GeometryError> {
        central_difference_gradient(&self.inner, x, self.step)
    }
    fn is_exact(&self) -> bool {
        self.inner.is_exact()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn distance_vector_zero_on_boundary() {
        let s = Sphere::new(Point::zeros(), 1.0).unwrap();
        let d = s.distance_vector(&Point::new(1.0, 0.0, 0.0)).unwrap();
        assert_eq!(d, Point::zeros());
    }

    #[test]
    fn sign_factor() {
        assert_eq!(SignConvention::NegativeInside.to_runtime_factor(), 1.0);
        assert_eq!(SignConvention::PositiveInside.to_runtime_factor(), -1.0);
    }

    #[test]
    fn fd_gradient_on_sphere_is_second_order() {
        let s = Sphere::new(Point::zeros(), 1.0).unwrap();
        let fd = FdGradient::new(s.clone());
        let x = Point::new(0.3, -0.7, 0.2);
        let exact = s.gradient(&x).unwrap();
        let approx = fd.gradient(&x).unwrap();
        let h = DEFAULT_FD_STEP;
        assert!((exact - approx).norm() <= 10.0 * h * h);
    }

    #[test]
    fn fd_rejects_flat_field() {
        struct Flat;
        impl ImplicitGeometry for Flat {
            fn dim(&self) -> usize {
                3
            }
            fn signed_distance(&self, _x: &Point) -> f64 {
                0.25
            }
            fn is_exact(&self) -> bool {
                false
            }
        }
        let err = Flat.gradient(&Point::zeros()).unwrap_err();
        assert!(matches!(err, GeometryError::DegenerateGradient { .. }));
    }
}
