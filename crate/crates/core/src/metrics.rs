//! Accuracy metrics for geometry providers and solved fields.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::fem::{field::evaluate, VectorField};
use crate::geometry::{ImplicitGeometry, Point, TriangleSoup};
use crate::octree::{SurrogateFace, SurrogateMesh};
use crate::quadrature::box_rule;

/// Side of the canonical cube, used to normalize the band error.
pub const CHARACTERISTIC_DIMENSION: f64 = 2.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("no grid point has |s| < {delta} on a {grid}-point grid")]
    NoPointsInBand { delta: f64, grid: usize },
    #[error("invalid metric parameter: {0}")]
    InvalidParameter(String),
}

/// Uniform grid over `[-1, 1]^dim` with `n` points per axis, x fastest.
pub fn canonical_grid(n: usize, dim: usize) -> impl IndexedParallelIterator<Item = Point> {
    let total = n.pow(dim as u32);
    let step = if n > 1 { 2.0 / (n - 1) as f64 } else { 0.0 };
    (0..total).into_par_iter().map(move |i| {
        let mut p = Point::zeros();
        let mut rem = i;
        for k in 0..dim {
            p[k] = -1.0 + step * (rem % n) as f64;
            rem /= n;
        }
        p
    })
}

/// Mean squared difference between `model` and `oracle` over the grid points
/// with `|oracle| < delta`, divided by [`CHARACTERISTIC_DIMENSION`].
pub fn nmse_delta<A, B>(model: &A, oracle: &B, delta: f64, grid: usize) -> Result<f64, MetricError>
where
    A: ImplicitGeometry + ?Sized,
    B: ImplicitGeometry + ?Sized,
{
    if !(delta > 0.0) || grid < 2 {
        return Err(MetricError::InvalidParameter(format!(
            "need delta > 0 and grid >= 2, got {delta} and {grid}"
        )));
    }
    nmse_from_pairs(
        canonical_grid(grid, oracle.dim())
            .filter_map(|p| {
                let s = oracle.signed_distance(&p);
                (s.abs() < delta).then(|| (s, model.signed_distance(&p)))
            })
            .collect(),
        delta,
        grid,
    )
}

/// `(oracle, model)` pairs already restricted to the band.
pub fn nmse_from_pairs(pairs: Vec<(f64, f64)>, delta: f64, grid: usize) -> Result<f64, MetricError> {
    if pairs.is_empty() {
        return Err(MetricError::NoPointsInBand { delta, grid });
    }
    let sum: f64 = pairs.iter().map(|(s, f)| (s - f) * (s - f)).sum();
    Ok(sum / pairs.len() as f64 / CHARACTERISTIC_DIMENSION)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DirectionReport {
    pub mean: f64,
    /// Population standard deviation.
    pub sd: f64,
    pub count: usize,
    /// Gauss points where either vector had zero length.
    pub skipped: usize,
    /// Per Gauss point, in face order: `log10 |f − s|` (−16 when equal).
    pub log_magnitude_error: Vec<f64>,
}

/// Cosine similarity between the attached distance vectors and the oracle's
/// closest-point vectors. `oracle(x)` returns `(signed distance, closest point)`.
pub fn gauss_point_direction_error(
    faces: &[SurrogateFace],
    oracle: impl Fn(&Point) -> (f64, Point) + Sync,
) -> DirectionReport {
    let per_point: Vec<(Option<f64>, f64)> = faces
        .par_iter()
        .flat_map_iter(|f| f.gauss.iter())
        .map(|gp| {
            let (s, cp) = oracle(&gp.x);
            let truth = cp - gp.x;
            let mag = (gp.sdf - s).abs();
            let log = if mag > 0.0 { mag.log10() } else { -16.0 };
            let cos = match gp.d {
                Some(d) if d.norm() > 0.0 && truth.norm() > 0.0 => {
                    Some((d.dot(&truth) / (d.norm() * truth.norm())).clamp(-1.0, 1.0))
                }
                _ => None,
            };
            (cos, log)
        })
        .collect();
    let cos: Vec<f64> = per_point.iter().filter_map(|p| p.0).collect();
    let count = cos.len();
    let (mean, sd) = if count == 0 {
        (f64::NAN, f64::NAN)
    } else {
        let mean = cos.iter().sum::<f64>() / count as f64;
        let var = cos.iter().map(|c| (c - mean) * (c - mean)).sum::<f64>() / count as f64;
        (mean, var.sqrt())
    };
    DirectionReport {
        mean,
        sd,
        count,
        skipped: per_point.len() - count,
        log_magnitude_error: per_point.iter().map(|p| p.1).collect(),
    }
}

/// Closest-point oracle backed by a triangle soup.
pub fn soup_oracle(soup: &TriangleSoup) -> impl Fn(&Point) -> (f64, Point) + Sync + '_ {
    move |x| {
        let q = soup.signed_query_or_fallback(x);
        (q.signed_distance, q.closest_point)
    }
}

/// Closest-point oracle from any provider's distance vector; exact for
/// true signed distance functions.
pub fn geometry_oracle<G: ImplicitGeometry + ?Sized>(geom: &G) -> impl Fn(&Point) -> (f64, Point) + Sync + '_ {
    move |x| {
        let s = geom.signed_distance(x);
        let d = geom.distance_vector(x).unwrap_or_else(|_| Point::zeros());
        (s, x + d)
    }
}

/// `sqrt(Σ w |u_h − u*|²)` over the volume Gauss points of active leaves that
/// lie inside the true domain.
pub fn l2_field_error<F, G>(mesh: &SurrogateMesh, values: &[f64], exact: &F, geom: &G, order: usize) -> f64
where
    F: VectorField + ?Sized + Sync,
    G: ImplicitGeometry + ?Sized,
{
    let dim = mesh.dim();
    let leaves: Vec<usize> = mesh.active_leaves().collect();
    let partial: Vec<f64> = leaves
        .par_iter()
        .map(|&leaf| {
            let h = mesh.octree.cell_size(leaf);
            let min = mesh.octree.cell_min(leaf);
            box_rule(order, dim, &min, h)
                .iter()
                .filter(|(x, _)| geom.inside(x))
                .map(|(x, w)| {
                    let (u, _) = evaluate(mesh, leaf, x, values);
                    w * (u - exact.value(x)).norm_squared()
                })
                .sum::<f64>()
        })
        .collect();
    partial.iter().sum::<f64>().sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SurfaceErrorReport {
    pub integral: f64,
    pub points: usize,
    /// Quadrature points outside every active leaf, evaluated by
    /// extrapolating the nearest active leaf's field.
    pub extrapolated: usize,
}

fn box_distance_sq(min: &Point, h: f64, dim: usize, x: &Point) -> f64 {
    (0..dim)
        .map(|k| {
            let v = (min[k] - x[k]).max(x[k] - (min[k] + h)).max(0.0);
            v * v
        })
        .sum()
}

/// Active leaf containing `x`, or the nearest one (lowest index on ties).
pub fn host_leaf(mesh: &SurrogateMesh, x: &Point) -> (usize, bool) {
    if let Some(l) = mesh.element_containing(x) {
        return (l, false);
    }
    let dim = mesh.dim();
    let best = mesh
        .active_leaves()
        .map(|l| (box_distance_sq(&mesh.octree.cell_min(l), mesh.octree.cell_size(l), dim, x), l))
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
        .expect("surrogate mesh has active leaves");
    (best.1, true)
}

/// `∫_Γ |u_h − u_ref| dΓ` over the soup triangles with the three-point
/// edge-midpoint rule.
pub fn surface_error_integral(
    mesh: &SurrogateMesh,
    values: &[f64],
    soup: &TriangleSoup,
    reference: impl Fn(&Point) -> Point + Sync,
) -> SurfaceErrorReport {
    let per_tri: Vec<(f64, usize)> = (0..soup.triangle_count())
        .into_par_iter()
        .map(|t| {
            let (a, b, c) = soup.corners(t);
            let area = soup.area(t);
            let mut sum = 0.0;
            let mut extrapolated = 0;
            for x in [(a + b) * 0.5, (b + c) * 0.5, (c + a) * 0.5] {
                let (leaf, outside) = host_leaf(mesh, &x);
                extrapolated += usize::from(outside);
                let (u, _) = evaluate(mesh, leaf, &x, values);
                sum += (u - reference(&x)).norm();
            }
            (sum * area / 3.0, extrapolated)
        })
        .collect();
    SurfaceErrorReport {
        integral: per_tri.iter().map(|p| p.0).sum(),
        points: 3 * soup.triangle_count(),
        extrapolated: per_tri.iter().map(|p| p.1).sum(),
    }
}
