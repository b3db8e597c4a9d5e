//! Closed-form displacement fields with exact derivatives.

use std::f64::consts::PI;

use nalgebra::Matrix3;

use crate::geometry::Point;

use super::Material;

/// Displacement field with its first and second derivatives.
pub trait VectorField: Send + Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &Point) -> Point;
    /// `g[(i, j)] = ∂u_i/∂x_j`.
    fn gradient(&self, x: &Point) -> Matrix3<f64>;
    /// `h[i][(j, k)] = ∂²u_i/∂x_j∂x_k`.
    fn hessian(&self, x: &Point) -> [Matrix3<f64>; 3];
}

/// `f = −∇·σ(u)` with `σ = λ tr(ε) I + 2με`, summing over the field's dimensions.
pub fn body_force<F: VectorField + ?Sized>(field: &F, material: &Material, x: &Point) -> Point {
    let dim = field.dim();
    let h = field.hessian(x);
    let mut f = Point::zeros();
    for i in 0..dim {
        let mut lap = 0.0;
        let mut grad_div = 0.0;
        for j in 0..dim {
            lap += h[i][(j, j)];
            grad_div += h[j][(i, j)];
        }
        f[i] = -(material.mu * lap + (material.lambda + material.mu) * grad_div);
    }
    f
}

/// Cauchy stress from a displacement gradient.
pub fn stress(grad: &Matrix3<f64>, material: &Material, dim: usize) -> Matrix3<f64> {
    let mut g = *grad;
    if dim == 2 {
        for k in 0..3 {
            g[(2, k)] = 0.0;
            g[(k, 2)] = 0.0;
        }
    }
    let eps = (g + g.transpose()) * 0.5;
    let mut s = eps * (2.0 * material.mu);
    let tr = eps.trace();
    for k in 0..dim {
        s[(k, k)] += material.lambda * tr;
    }
    if dim == 2 {
        // out-of-plane stress under plane strain
        s[(2, 2)] = material.lambda * tr;
    }
    s
}

pub fn von_mises(s: &Matrix3<f64>) -> f64 {
    let d = (s[(0, 0)] - s[(1, 1)]).powi(2) + (s[(1, 1)] - s[(2, 2)]).powi(2) + (s[(2, 2)] - s[(0, 0)]).powi(2);
    let sh = s[(0, 1)].powi(2) + s[(1, 2)].powi(2) + s[(2, 0)].powi(2);
    (0.5 * d + 3.0 * sh).sqrt()
}

/// `S u = u + (∇u)·d`.
pub fn shift_displacement(u: &Point, grad_u: &Matrix3<f64>, d: &Point) -> Point {
    u + grad_u * d
}

/// `u = A x + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearField {
    pub dim: usize,
    pub a: Matrix3<f64>,
    pub b: Point,
}

impl LinearField {
    /// A fixed, fully populated linear field for patch tests.
    pub fn patch(dim: usize) -> Self {
        let mut a = Matrix3::new(0.01, -0.02, 0.015, 0.03, 0.005, -0.01, -0.02, 0.01, 0.025);
        let mut b = Point::new(0.001, -0.002, 0.003);
        if dim == 2 {
            for k in 0..3 {
                a[(2, k)] = 0.0;
                a[(k, 2)] = 0.0;
            }
            b.z = 0.0;
        }
        LinearField { dim, a, b }
    }
}

impl VectorField for LinearField {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, x: &Point) -> Point {
        self.a * x + self.b
    }
    fn gradient(&self, _x: &Point) -> Matrix3<f64> {
        self.a
    }
    fn hessian(&self, _x: &Point) -> [Matrix3<f64>; 3] {
        [Matrix3::zeros(); 3]
    }
}

/// Radial expansion of a ring centered at `center`:
/// `u = −(x − c) ln r / (2 ln 2)`, i.e. radial displacement `−r ln r / (2 ln 2)`,
/// vanishing on `r = 1` and equal to `0.25` on `r = 0.25`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RingSolution {
    pub center: Point,
}

impl RingSolution {
    fn coeff() -> f64 {
        -1.0 / (2.0 * 2f64.ln())
    }
}

impl VectorField for RingSolution {
    fn dim(&self) -> usize {
        2
    }
    fn value(&self, x: &Point) -> Point {
        let mut y = x - self.center;
        y.z = 0.0;
        let r = y.norm();
        y * (Self::coeff() * r.ln())
    }
    fn gradient(&self, x: &Point) -> Matrix3<f64> {
        let mut y = x - self.center;
        y.z = 0.0;
        let r2 = y.norm_squared();
        let c = Self::coeff();
        let mut g = Matrix3::zeros();
        for i in 0..2 {
            for j in 0..2 {
                g[(i, j)] = c * (if i == j { 0.5 * r2.ln() } else { 0.0 } + y[i] * y[j] / r2);
            }
        }
        g
    }
    fn hessian(&self, x: &Point) -> [Matrix3<f64>; 3] {
        let mut y = x - self.center;
        y.z = 0.0;
        let r2 = y.norm_squared();
        let c = Self::coeff();
        let delta = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
        let mut h = [Matrix3::zeros(); 3];
        for (i, hi) in h.iter_mut().enumerate().take(2) {
            for j in 0..2 {
                for k in 0..2 {
                    hi[(j, k)] = c * (delta(i, j) * y[k] + delta(i, k) * y[j] + delta(j, k) * y[i]) / r2
                        - 2.0 * c * y[i] * y[j] * y[k] / (r2 * r2);
                }
            }
        }
        h
    }
}

/// One-dimensional factor of a separable term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Factor {
    One,
    SinPi,
    CosPi,
    /// `exp(−t²)`
    Gaussian,
}

impl Factor {
    /// Value, first and second derivative.
    fn eval(self, t: f64) -> [f64; 3] {
        match self {
            Factor::One => [1.0, 0.0, 0.0],
            Factor::SinPi => {
                let (s, c) = (PI * t).sin_cos();
                [s, PI * c, -PI * PI * s]
            }
            Factor::CosPi => {
                let (s, c) = (PI * t).sin_cos();
                [c, -PI * s, -PI * PI * c]
            }
            Factor::Gaussian => {
                let e = (-t * t).exp();
                [e, -2.0 * t * e, (4.0 * t * t - 2.0) * e]
            }
        }
    }
}

/// Each component is a sum of `coeff · φ_x(x) φ_y(y) φ_z(z)` terms.
#[derive(Debug, Clone, PartialEq)]
pub struct SeparableField {
    pub dim: usize,
    pub components: [Vec<(f64, [Factor; 3])>; 3],
}

impl SeparableField {
    /// `(sin πx sin πy sin πz, cos πx cos πy sin πz, cos πx sin πy cos πz) / 10`.
    pub fn sinusoidal() -> Self {
        use Factor::*;
        SeparableField {
            dim: 3,
            components: [
                vec![(0.1, [SinPi, SinPi, SinPi])],
                vec![(0.1, [CosPi, CosPi, SinPi])],
                vec![(0.1, [CosPi, SinPi, CosPi])],
            ],
        }
    }

    /// `(sin πx cos πy / 50, cos πx sin πz / 50, e^{−y²} sin πz / 100)`.
    pub fn trigonometric() -> Self {
        use Factor::*;
        SeparableField {
            dim: 3,
            components: [
                vec![(0.02, [SinPi, CosPi, One])],
                vec![(0.02, [CosPi, One, SinPi])],
                vec![(0.01, [One, Gaussian, SinPi])],
            ],
        }
    }

    /// `(0.1 sin πx cos πy, 0.05 sin πy sin πz, 0)`.
    pub fn tower() -> Self {
        use Factor::*;
        SeparableField {
            dim: 3,
            components: [
                vec![(0.1, [SinPi, CosPi, One])],
                vec![(0.05, [One, SinPi, SinPi])],
                vec![],
            ],
        }
    }

    fn factors(&self, x: &Point, f: &[Factor; 3]) -> [[f64; 3]; 3] {
        [f[0].eval(x.x), f[1].eval(x.y), f[2].eval(x.z)]
    }
}

impl VectorField for SeparableField {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, x: &Point) -> Point {
        let mut u = Point::zeros();
        for (i, terms) in self.components.iter().enumerate() {
            for (c, f) in terms {
                let v = self.factors(x, f);
                u[i] += c * v[0][0] * v[1][0] * v[2][0];
            }
        }
        u
    }
    fn gradient(&self, x: &Point) -> Matrix3<f64> {
        let mut g = Matrix3::zeros();
        for (i, terms) in self.components.iter().enumerate() {
            for (c, f) in terms {
                let v = self.factors(x, f);
                for j in 0..3 {
                    let mut p = *c;
                    for (k, vk) in v.iter().enumerate() {
                        p *= if k == j { vk[1] } else { vk[0] };
                    }
                    g[(i, j)] += p;
                }
            }
        }
        g
    }
    fn hessian(&self, x: &Point) -> [Matrix3<f64>; 3] {
        let mut h = [Matrix3::zeros(); 3];
        for (i, terms) in self.components.iter().enumerate() {
            for (c, f) in terms {
                let v = self.factors(x, f);
                for j in 0..3 {
                    for k in 0..3 {
                        let mut p = *c;
                        for (m, vm) in v.iter().enumerate() {
                            let order = (m == j) as usize + (m == k) as usize;
                            p *= vm[order];
                        }
                        h[i][(j, k)] += p;
                    }
                }
            }
        }
        h
    }
}

/// `u = 0.01 R (x, y) / (R + 1e-6)`, `u_z = 0`, with `R = |x|`.
///
/// Directional factors `x/R` are taken as zero at the origin, which keeps
/// every derivative finite there.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialField {
    pub amplitude: f64,
    pub regularizer: f64,
}

impl Default for RadialField {
    fn default() -> Self {
        RadialField {
            amplitude: 0.01,
            regularizer: 1e-6,
        }
    }
}

impl RadialField {
    /// `s = R/(R+ε)`, `q = s'/R`, `q'`.
    fn radial(&self, r: f64) -> (f64, f64, f64) {
        let e = self.regularizer;
        let s = r / (r + e);
        if r == 0.0 {
            return (0.0, 0.0, 0.0);
        }
        let q = e / (r * (r + e).powi(2));
        let dq = -e / (r * r * (r + e).powi(2)) - 2.0 * e / (r * (r + e).powi(3));
        (s, q, dq)
    }
}

impl VectorField for RadialField {
    fn dim(&self) -> usize {
        3
    }
    fn value(&self, x: &Point) -> Point {
        let (s, _, _) = self.radial(x.norm());
        Point::new(self.amplitude * s * x.x, self.amplitude * s * x.y, 0.0)
    }
    fn gradient(&self, x: &Point) -> Matrix3<f64> {
        let (s, q, _) = self.radial(x.norm());
        let mut g = Matrix3::zeros();
        for i in 0..2 {
            for j in 0..3 {
                g[(i, j)] = self.amplitude * (if i == j { s } else { 0.0 } + x[i] * x[j] * q);
            }
        }
        g
    }
    fn hessian(&self, x: &Point) -> [Matrix3<f64>; 3] {
        let r = x.norm();
        let mut h = [Matrix3::zeros(); 3];
        if r == 0.0 {
            return h;
        }
        let (_, q, dq) = self.radial(r);
        // s'(R) x_k / R = q x_k
        for (i, hi) in h.iter_mut().enumerate().take(2) {
            for j in 0..3 {
                for k in 0..3 {
                    let mut v = if i == j { q * x[k] } else { 0.0 };
                    if i == k {
                        v += x[j] * q;
                    }
                    if j == k {
                        v += x[i] * q;
                    }
                    v += x[i] * x[j] * x[k] * dq / r;
                    hi[(j, k)] = self.amplitude * v;
                }
            }
        }
        h
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_gradient<F: VectorField>(f: &F, x: &Point) -> Matrix3<f64> {
        let h = 1e-6;
        let mut g = Matrix3::zeros();
        for j in 0..3 {
            let mut p = *x;
            let mut m = *x;
            p[j] += h;
            m[j] -= h;
            let d = (f.value(&p) - f.value(&m)) / (2.0 * h);
            for i in 0..3 {
                g[(i, j)] = d[i];
            }
        }
        g
    }

    fn fd_hessian<F: VectorField>(f: &F, x: &Point) -> [Matrix3<f64>; 3] {
        let h = 1e-5;
        let mut out = [Matrix3::zeros(); 3];
        for k in 0..3 {
            let mut p = *x;
            let mut m = *x;
            p[k] += h;
            m[k] -= h;
            let d = (f.gradient(&p) - f.gradient(&m)) / (2.0 * h);
            for (i, oi) in out.iter_mut().enumerate() {
                for j in 0..3 {
                    oi[(j, k)] = d[(i, j)];
                }
            }
        }
        out
    }

    fn check<F: VectorField>(f: &F, x: &Point) {
        let g = f.gradient(x);
        let scale = 1.0 + g.norm();
        assert!((g - fd_gradient(f, x)).norm() / scale < 1e-7, "gradient at {x:?}");
        let h = f.hessian(x);
        let hf = fd_hessian(f, x);
        for i in 0..3 {
            let s = 1.0 + h[i].norm();
            assert!((h[i] - hf[i]).norm() / s < 1e-6, "hessian {i} at {x:?}");
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let pts = [Point::new(0.3, -0.2, 0.45), Point::new(-0.7, 0.1, 0.05)];
        for x in &pts {
            check(&SeparableField::sinusoidal(), x);
            check(&SeparableField::trigonometric(), x);
            check(&SeparableField::tower(), x);
            check(&RadialField::default(), x);
            check(&LinearField::patch(3), x);
        }
        let ring = RingSolution {
            center: Point::new(1.0, 1.0, 0.0),
        };
        check(&ring, &Point::new(1.4, 0.7, 0.0));
        check(&ring, &Point::new(0.5, 1.6, 0.0));
    }

    #[test]
    fn ring_body_force_is_radial() {
        let m = Material::from_engineering(1.0, 0.0, ElasticityMode::PlaneStrain).unwrap();
        let ring = RingSolution {
            center: Point::new(1.0, 1.0, 0.0),
        };
        let x = Point::new(1.3, 1.4, 0.0);
        let y = x - ring.center;
        let r = y.norm();
        let expect = y / r * (m.p_wave_modulus() / (r * 2f64.ln()));
        assert!((body_force(&ring, &m, &x) - expect).norm() < 1e-12);
        assert!(ring.value(&Point::new(2.0, 1.0, 0.0)).norm() < 1e-15);
        assert!((ring.value(&Point::new(1.25, 1.0, 0.0)).x - 0.25).abs() < 1e-15);
    }

    use super::super::ElasticityMode;

    #[test]
    fn linear_field_has_no_body_force() {
        let m = Material::from_lame(1.0, 0.5, ElasticityMode::Full3d).unwrap();
        assert_eq!(body_force(&LinearField::patch(3), &m, &Point::new(0.2, 0.1, 0.3)), Point::zeros());
    }

    #[test]
    fn radial_field_bounded_at_center() {
        let m = Material::from_engineering(7e10, 0.3, ElasticityMode::Full3d).unwrap();
        let f = RadialField::default();
        for x in [Point::zeros(), Point::new(1e-9, 0.0, 0.0), Point::new(1e-7, 2e-7, -1e-7)] {
            let b = body_force(&f, &m, &x);
            assert!(b.iter().all(|v| v.is_finite()));
            assert!(f.value(&x).norm() < 1e-8);
        }
    }

    #[test]
    fn shift_of_linear_field_is_exact() {
        let f = LinearField::patch(3);
        let x = Point::new(0.1, 0.2, -0.3);
        let d = Point::new(0.05, -0.02, 0.01);
        let s = shift_displacement(&f.value(&x), &f.gradient(&x), &d);
        assert!((s - f.value(&(x + d))).norm() < 1e-16);
        let mut g = Matrix3::zeros();
        g[(0, 0)] = 2.0;
        let s = shift_displacement(&Point::new(1.0, 0.0, 0.0), &g, &Point::new(0.1, 0.0, 0.0));
        assert!((s - Point::new(1.2, 0.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn von_mises_of_uniaxial_stress() {
        let mut s = Matrix3::zeros();
        s[(0, 0)] = 3.0;
        assert!((von_mises(&s) - 3.0).abs() < 1e-15);
    }
}
