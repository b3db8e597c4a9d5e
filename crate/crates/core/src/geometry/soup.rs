//! Triangle soups: exact closest-point distance with ray-parity sign.

use std::sync::atomic::{AtomicU64, Ordering};

use super::{as_array, Bvh, GeometryError, ImplicitGeometry, Point};

/// Fixed ray direction for parity tests, `(1, 0.5^3, 0.25^3)` before
/// normalization; chosen so axis-aligned faces are never grazed.
pub const RAY_DIRECTION: [f64; 3] = [1.0, 0.125, 0.015625];

const MAX_RAY_RETRIES: usize = 8;
const BARY_EPS: f64 = 1e-9;

/// Closest point on triangle `(a, b, c)` to `p`.
pub fn closest_point_on_triangle(p: &Point, a: &Point, b: &Point, c: &Point) -> Point {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return *a;
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return *b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return a + ab * v;
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return *c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return a + ac * w;
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return b + (c - b) * w;
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    a + ab * v + ac * w
}

/// Result of a soup distance query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SoupQuery {
    /// Negative inside.
    pub signed_distance: f64,
    pub closest_point: Point,
    pub triangle: usize,
}

/// Uniform scale plus translation into the canonical cube:
/// `canonical = (raw - center) * scale`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DomainTransform {
    pub center: Point,
    pub scale: f64,
}

impl Default for DomainTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl DomainTransform {
    pub fn identity() -> Self {
        Self {
            center: Point::zeros(),
            scale: 1.0,
        }
    }

    pub fn apply(&self, raw: &Point) -> Point {
        (raw - self.center) * self.scale
    }

    pub fn inverse(&self, canonical: &Point) -> Point {
        canonical / self.scale + self.center
    }
}

enum RayOutcome {
    Parity(bool),
    Ambiguous,
}

pub struct TriangleSoup {
    vertices: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    /// Non-degenerate triangles, the only closest-point and ray candidates.
    active: Vec<usize>,
    normals: Vec<Point>,
    bvh: Bvh,
    distance_visits: AtomicU64,
    ray_visits: AtomicU64,
}

impl std::fmt::Debug for TriangleSoup {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TriangleSoup")
            .field("vertices", &self.vertices.len())
            .field("triangles", &self.triangles.len())
            .finish()
    }
}

impl Clone for TriangleSoup {
    fn clone(&self) -> Self {
        Self::new(self.vertices.clone(), self.triangles.clone()).expect("already validated")
    }
}

impl TriangleSoup {
    pub fn new(vertices: Vec<Point>, triangles: Vec<[usize; 3]>) -> Result<Self, GeometryError> {
        if triangles.is_empty() {
            return Err(GeometryError::EmptySoup);
        }
        if vertices.iter().any(|v| !v.iter().all(|c| c.is_finite())) {
            return Err(GeometryError::InvalidShape("non-finite vertex coordinate".into()));
        }
        for (i, t) in triangles.iter().enumerate() {
            if t.iter().any(|&v| v >= vertices.len()) {
                return Err(GeometryError::InvalidShape(format!(
                    "triangle {i} references a vertex beyond {}",
                    vertices.len()
                )));
            }
        }
        let normals: Vec<Point> = triangles
            .iter()
            .map(|t| {
                let n = (vertices[t[1]] - vertices[t[0]]).cross(&(vertices[t[2]] - vertices[t[0]]));
                n.try_normalize(0.0).unwrap_or_else(Point::zeros)
            })
            .collect();
        let active: Vec<usize> = (0..triangles.len())
            .filter(|&i| normals[i] != Point::zeros())
            .collect();
        if active.is_empty() {
            return Err(GeometryError::EmptySoup);
        }
        let bvh = Bvh::build(&active, |i| {
            let t = triangles[i];
            let (a, b, c) = (vertices[t[0]], vertices[t[1]], vertices[t[2]]);
            (a.inf(&b).inf(&c), a.sup(&b).sup(&c))
        });
        Ok(Self {
            vertices,
            triangles,
            active,
            normals,
            bvh,
            distance_visits: AtomicU64::new(0),
            ray_visits: AtomicU64::new(0),
        })
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    pub fn corners(&self, t: usize) -> (Point, Point, Point) {
        let [a, b, c] = self.triangles[t];
        (self.vertices[a], self.vertices[b], self.vertices[c])
    }

    pub fn area(&self, t: usize) -> f64 {
        let (a, b, c) = self.corners(t);
        0.5 * (b - a).cross(&(c - a)).norm()
    }

    pub fn bounds(&self) -> (Point, Point) {
        let mut min = Point::repeat(f64::INFINITY);
        let mut max = Point::repeat(f64::NEG_INFINITY);
        for v in &self.vertices {
            min = min.inf(v);
            max = max.sup(v);
        }
        (min, max)
    }

    /// Number of triangle tests performed so far (distance and ray).
    pub fn triangle_visits(&self) -> u64 {
        self.distance_visits.load(Ordering::Relaxed) + self.ray_visits.load(Ordering::Relaxed)
    }

    pub fn reset_counters(&self) {
        self.distance_visits.store(0, Ordering::Relaxed);
        self.ray_visits.store(0, Ordering::Relaxed);
    }

    fn dist_sq_to(&self, t: usize, x: &Point) -> f64 {
        let (a, b, c) = self.corners(t);
        (closest_point_on_triangle(x, &a, &b, &c) - x).norm_squared()
    }

    /// Unsigned closest point via the BVH.
    pub fn closest(&self, x: &Point) -> (usize, Point, f64) {
        let mut visits = 0u64;
        let (t, d2) = self
            .bvh
            .nearest(x, |t| {
                visits += 1;
                self.dist_sq_to(t, x)
            })
            .expect("soup has at least one active triangle");
        self.distance_visits.fetch_add(visits, Ordering::Relaxed);
        let (a, b, c) = self.corners(t);
        (t, closest_point_on_triangle(x, &a, &b, &c), d2.sqrt())
    }

    /// Unsigned closest point by scanning every triangle.
    pub fn closest_brute_force(&self, x: &Point) -> (usize, Point, f64) {
        let mut best = (usize::MAX, f64::INFINITY);
        for &t in &self.active {
            let d = self.dist_sq_to(t, x);
            if d < best.1 {
                best = (t, d);
            }
        }
        self.distance_visits
            .fetch_add(self.active.len() as u64, Ordering::Relaxed);
        let (a, b, c) = self.corners(best.0);
        (best.0, closest_point_on_triangle(x, &a, &b, &c), best.1.sqrt())
    }

    fn ray_direction(attempt: usize) -> Point {
        let base = Point::from(RAY_DIRECTION);
        if attempt == 0 {
            return base.normalize();
        }
        // deterministic quasi-random perturbation per retry
        let a = attempt as f64;
        let jitter = Point::new(
            (a * 0.618_033_988_7).fract() - 0.5,
            (a * 0.754_877_666_2).fract() - 0.5,
            (a * 0.569_840_290_9).fract() - 0.5,
        );
        (base.normalize() + jitter * 0.2).normalize()
    }

    fn cast(&self, x: &Point, dir: &Point) -> RayOutcome {
        let mut hits = 0usize;
        let mut ambiguous = false;
        let mut visits = 0u64;
        self.bvh.ray_candidates(x, dir, |t| {
            if ambiguous {
                return;
            }
            visits += 1;
            let (a, b, c) = self.corners(t);
            let e1 = b - a;
            let e2 = c - a;
            let pv = dir.cross(&e2);
            let det = e1.dot(&pv);
            let scale = e1.norm() * e2.norm();
            if det.abs() <= 1e-12 * scale {
                // ray parallel to the triangle plane; ambiguous only if coplanar
                if (x - a).dot(&self.normals[t]).abs() <= 1e-12 {
                    ambiguous = true;
                }
                return;
            }
            let inv = 1.0 / det;
            let tv = x - a;
            let u = tv.dot(&pv) * inv;
            let qv = tv.cross(&e1);
            let v = dir.dot(&qv) * inv;
            let dist = e2.dot(&qv) * inv;
            if u < -BARY_EPS || v < -BARY_EPS || u + v > 1.0 + BARY_EPS || dist < -BARY_EPS {
                return;
            }
            if u <= BARY_EPS || v <= BARY_EPS || u + v >= 1.0 - BARY_EPS || dist <= BARY_EPS {
                ambiguous = true;
                return;
            }
            hits += 1;
        });
        self.ray_visits.fetch_add(visits, Ordering::Relaxed);
        if ambiguous {
            RayOutcome::Ambiguous
        } else {
            RayOutcome::Parity(hits % 2 == 1)
        }
    }

    /// Inside test by ray parity with perturbed retries.
    pub fn ray_parity_inside(&self, x: &Point) -> Result<bool, GeometryError> {
        for attempt in 0..=MAX_RAY_RETRIES {
            if let RayOutcome::Parity(inside) = self.cast(x, &Self::ray_direction(attempt)) {
                return Ok(inside);
            }
        }
        Err(GeometryError::AmbiguousSign {
            point: as_array(x),
            retries: MAX_RAY_RETRIES,
        })
    }

    /// Signed distance and closest point. Fails with `AmbiguousSign` when ray
    /// parity cannot be resolved.
    pub fn signed_query(&self, x: &Point) -> Result<SoupQuery, GeometryError> {
        let (t, cp, dist) = self.closest(x);
        let inside = self.ray_parity_inside(x)?;
        Ok(SoupQuery {
            signed_distance: if inside { -dist } else { dist },
            closest_point: cp,
            triangle: t,
        })
    }

    /// Like [`signed_query`](Self::signed_query) but falls back to the face
    /// normal of the closest triangle when parity is ambiguous.
    pub fn signed_query_or_fallback(&self, x: &Point) -> SoupQuery {
        let (t, cp, dist) = self.closest(x);
        let inside = match self.ray_parity_inside(x) {
            Ok(inside) => inside,
            Err(_) => (x - cp).dot(&self.normals[t]) < 0.0,
        };
        SoupQuery {
            signed_distance: if inside && dist > 0.0 { -dist } else { dist },
            closest_point: cp,
            triangle: t,
        }
    }

    pub fn face_normal(&self, t: usize) -> Point {
        self.normals[t]
    }

    pub fn transformed(&self, transform: &DomainTransform) -> Self {
        let verts = self.vertices.iter().map(|v| transform.apply(v)).collect();
        Self::new(verts, self.triangles.clone()).expect("transform preserves validity")
    }
}

impl ImplicitGeometry for TriangleSoup {
    fn dim(&self) -> usize {
        3
    }

    fn signed_distance(&self, x: &Point) -> f64 {
        self.signed_query_or_fallback(x).signed_distance
    }

    fn inside(&self, x: &Point) -> bool {
        self.signed_distance(x) < 0.0
    }

    fn gradient(&self, x: &Point) -> Result<Point, GeometryError> {
        let q = self.signed_query_or_fallback(x);
        let offset = x - q.closest_point;
        let len = offset.norm();
        if len > 1e-12 {
            let sign = if q.signed_distance < 0.0 { -1.0 } else { 1.0 };
            Ok(offset * (sign / len))
        } else {
            Ok(self.normals[q.triangle])
        }
    }

    fn distance_vector(&self, x: &Point) -> Result<Point, GeometryError> {
        let (_, cp, _) = self.closest(x);
        Ok(cp - x)
    }

    fn is_exact(&self) -> bool {
        true
    }
}

/// Uniformly scales and translates the soup so its bounding box is centered
/// in `[-1, 1]^3` with `margin` clearance on the longest axis.
pub fn rescale_soup(
    soup: &TriangleSoup,
    margin: f64,
) -> Result<(TriangleSoup, DomainTransform), GeometryError> {
    if !(margin > 0.0 && margin < 0.5) {
        return Err(GeometryError::InvalidShape(format!(
            "margin must lie in (0, 0.5), got {margin}"
        )));
    }
    let (min, max) = soup.bounds();
    let extent = max - min;
    for axis in 0..3 {
        if !(extent[axis] > 0.0) {
            return Err(GeometryError::DegenerateBounds { axis });
        }
    }
    let half = 0.5 * extent.max();
    let transform = DomainTransform {
        center: (min + max) * 0.5,
        scale: (1.0 - margin) / half,
    };
    Ok((soup.transformed(&transform), transform))
}
