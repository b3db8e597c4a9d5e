use super::{as_array, GeometryError, ImplicitGeometry, Point};

/// Sphere (3D) or disk (2D).
#[derive(Debug, Clone, PartialEq)]
pub struct Sphere {
    pub center: Point,
    pub radius: f64,
    dim: usize,
}

impl Sphere {
    pub fn new(center: Point, radius: f64) -> Result<Self, GeometryError> {
        Self::with_dim(center, radius, 3)
    }

    pub fn disk(center: Point, radius: f64) -> Result<Self, GeometryError> {
        Self::with_dim(Point::new(center.x, center.y, 0.0), radius, 2)
    }

    fn with_dim(center: Point, radius: f64, dim: usize) -> Result<Self, GeometryError> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(GeometryError::InvalidShape(format!(
                "sphere radius must be positive, got {radius}"
            )));
        }
        Ok(Self {
            center,
            radius,
            dim,
        })
    }

    fn offset(&self, x: &Point) -> Point {
        let mut v = x - self.center;
        if self.dim == 2 {
            v.z = 0.0;
        }
        v
    }
}

impl ImplicitGeometry for Sphere {
    fn dim(&self) -> usize {
        self.dim
    }

    fn signed_distance(&self, x: &Point) -> f64 {
        self.offset(x).norm() - self.radius
    }

    fn gradient(&self, x: &Point) -> Result<Point, GeometryError> {
        let v = self.offset(x);
        let r = v.norm();
        if r < super::DEGENERATE_GRADIENT_NORM {
            return Err(GeometryError::DegenerateGradient {
                point: as_array(x),
                norm: 0.0,
            });
        }
        Ok(v / r)
    }

    fn is_exact(&self) -> bool {
        true
    }
}

/// Planar ring between two concentric circles.
#[derive(Debug, Clone, PartialEq)]
pub struct Annulus2d {
    pub center: Point,
    pub r_inner: f64,
    pub r_outer: f64,
}

impl Annulus2d {
    pub fn new(center: Point, r_inner: f64, r_outer: f64) -> Result<Self, GeometryError> {
        if !(r_inner > 0.0 && r_inner < r_outer && r_outer.is_finite()) {
            return Err(GeometryError::InvalidShape(format!(
                "annulus requires 0 < r_inner < r_outer, got {r_inner}, {r_outer}"
            )));
        }
        Ok(Self {
            center: Point::new(center.x, center.y, 0.0),
            r_inner,
            r_outer,
        })
    }

    pub fn radius(&self, x: &Point) -> f64 {
        ((x.x - self.center.x).powi(2) + (x.y - self.center.y).powi(2)).sqrt()
    }
}

impl ImplicitGeometry for Annulus2d {
    fn dim(&self) -> usize {
        2
    }

    fn signed_distance(&self, x: &Point) -> f64 {
        let r = self.radius(x);
        (self.r_inner - r).max(r - self.r_outer)
    }

    fn gradient(&self, x: &Point) -> Result<Point, GeometryError> {
        let r = self.radius(x);
        if r < super::DEGENERATE_GRADIENT_NORM {
            return Err(GeometryError::DegenerateGradient {
                point: as_array(x),
                norm: 0.0,
            });
        }
        let radial = Point::new(x.x - self.center.x, x.y - self.center.y, 0.0) / r;
        if self.r_inner - r > r - self.r_outer {
            Ok(-radial)
        } else {
            Ok(radial)
        }
    }

    fn is_exact(&self) -> bool {
        true
    }
}

/// Axis-aligned box.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxShape {
    pub min: Point,
    pub max: Point,
    dim: usize,
}

impl BoxShape {
    pub fn new(min: Point, max: Point) -> Result<Self, GeometryError> {
        Self::with_dim(min, max, 3)
    }

    pub fn rect(min: Point, max: Point) -> Result<Self, GeometryError> {
        Self::with_dim(
            Point::new(min.x, min.y, 0.0),
            Point::new(max.x, max.y, 0.0),
            2,
        )
    }

    fn with_dim(min: Point, max: Point, dim: usize) -> Result<Self, GeometryError> {
        for k in 0..dim {
            if !(min[k] < max[k]) {
                return Err(GeometryError::InvalidShape(format!(
                    "box min must be below max on axis {k}"
                )));
            }
        }
        Ok(Self { min, max, dim })
    }

    fn excess(&self, x: &Point) -> Point {
        let mut q = Point::zeros();
        for k in 0..self.dim {
            let c = 0.5 * (self.min[k] + self.max[k]);
            let half = 0.5 * (self.max[k] - self.min[k]);
            q[k] = (x[k] - c).abs() - half;
        }
        q
    }
}

impl ImplicitGeometry for BoxShape {
    fn dim(&self) -> usize {
        self.dim
    }

    fn signed_distance(&self, x: &Point) -> f64 {
        let q = self.excess(x);
        let mut outside = 0.0;
        let mut inner = f64::NEG_INFINITY;
        for k in 0..self.dim {
            outside += q[k].max(0.0).powi(2);
            inner = inner.max(q[k]);
        }
        outside.sqrt() + inner.min(0.0)
    }

    fn gradient(&self, x: &Point) -> Result<Point, GeometryError> {
        let q = self.excess(x);
        let mut g = Point::zeros();
        let side = |k: usize| {
            if x[k] >= 0.5 * (self.min[k] + self.max[k]) {
                1.0
            } else {
                -1.0
            }
        };
        let outside: f64 = (0..self.dim).map(|k| q[k].max(0.0).powi(2)).sum::<f64>().sqrt();
        if outside > 0.0 {
            for k in 0..self.dim {
                g[k] = side(k) * q[k].max(0.0) / outside;
            }
        } else {
            let k = (0..self.dim)
                .max_by(|&a, &b| q[a].total_cmp(&q[b]))
                .unwrap_or(0);
            g[k] = side(k);
        }
        Ok(g)
    }

    fn is_exact(&self) -> bool {
        true
    }
}

/// `f(x) = n . x - offset`, with `n` normalized.
#[derive(Debug, Clone, PartialEq)]
pub struct HalfSpace {
    pub normal: Point,
    pub offset: f64,
    dim: usize,
}

impl HalfSpace {
    pub fn new(normal: Point, offset: f64, dim: usize) -> Result<Self, GeometryError> {
        let n = normal.norm();
        if !(n > 0.0) {
            return Err(GeometryError::InvalidShape("zero half-space normal".into()));
        }
        Ok(Self {
            normal: normal / n,
            offset: offset / n,
            dim,
        })
    }
}

impl ImplicitGeometry for HalfSpace {
    fn dim(&self) -> usize {
        self.dim
    }
    fn signed_distance(&self, x: &Point) -> f64 {
        self.normal.dot(x) - self.offset
    }
    fn gradient(&self, _x: &Point) -> Result<Point, GeometryError> {
        Ok(self.normal)
    }
    fn is_exact(&self) -> bool {
        true
    }
}

/// Solid gyroid network clipped to a box.
///
/// The level set `sin(kx)cos(ky) + sin(ky)cos(kz) + sin(kz)cos(kx) = iso`
/// is divided by its gradient norm, giving a first-order distance estimate.
/// Not an exact SDF; gradients come from central differences.
#[derive(Debug, Clone, PartialEq)]
pub struct Gyroid {
    pub period: f64,
    pub iso_level: f64,
    pub clip: BoxShape,
}

impl Gyroid {
    pub fn new(period: f64, iso_level: f64, clip: BoxShape) -> Result<Self, GeometryError> {
        if !(period > 0.0) {
            return Err(GeometryError::InvalidShape("gyroid period must be positive".into()));
        }
        Ok(Self {
            period,
            iso_level,
            clip,
        })
    }

    fn wave(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.period
    }

    fn level_set(&self, x: &Point) -> (f64, Point) {
        let k = self.wave();
        let (sx, cx) = (k * x.x).sin_cos();
        let (sy, cy) = (k * x.y).sin_cos();
        let (sz, cz) = (k * x.z).sin_cos();
        let g = sx * cy + sy * cz + sz * cx;
        let grad = Point::new(
            k * (cx * cy - sz * sx),
            k * (-sx * sy + cy * cz),
            k * (-sy * sz + cz * cx),
        );
        (g - self.iso_level, grad)
    }
}

impl ImplicitGeometry for Gyroid {
    fn dim(&self) -> usize {
        3
    }

    fn signed_distance(&self, x: &Point) -> f64 {
        let (g, grad) = self.level_set(x);
        let norm = grad.norm().max(0.1 * self.wave());
        (g / norm).max(self.clip.signed_distance(x))
    }

    fn is_exact(&self) -> bool {
        false
    }
}

/// Closed set of analytic shapes, convenient for configuration files.
#[derive(Debug, Clone, PartialEq)]
pub enum AnalyticShape {
    Sphere(Sphere),
    Annulus2d(Annulus2d),
    Box(BoxShape),
    Gyroid(Gyroid),
}

impl AnalyticShape {
    fn inner(&self) -> &dyn ImplicitGeometry {
        match self {
            AnalyticShape::Sphere(s) => s,
            AnalyticShape::Annulus2d(a) => a,
            AnalyticShape::Box(b) => b,
            AnalyticShape::Gyroid(g) => g,
        }
    }
}

impl ImplicitGeometry for AnalyticShape {
    fn dim(&self) -> usize {
        self.inner().dim()
    }
    fn signed_distance(&self, x: &Point) -> f64 {
        self.inner().signed_distance(x)
    }
    fn gradient(&self, x: &Point) -> Result<Point, GeometryError> {
        self.inner().gradient(x)
    }
    fn is_exact(&self) -> bool {
        self.inner().is_exact()
    }
}
