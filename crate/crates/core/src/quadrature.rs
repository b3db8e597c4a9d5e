//! Tensor-product Gauss–Legendre rules.

use crate::geometry::Point;

/// Nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    match order {
        1 => (vec![0.0], vec![2.0]),
        2 => {
            let a = 1.0 / 3f64.sqrt();
            (vec![-a, a], vec![1.0, 1.0])
        }
        3 => {
            let a = (3.0f64 / 5.0).sqrt();
            (vec![-a, 0.0, a], vec![5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0])
        }
        4 => {
            let s = (6.0f64 / 5.0).sqrt() * 2.0 / 7.0;
            let a = (3.0 / 7.0 - s).sqrt();
            let b = (3.0 / 7.0 + s).sqrt();
            let wa = (18.0 + 30f64.sqrt()) / 36.0;
            let wb = (18.0 - 30f64.sqrt()) / 36.0;
            (vec![-b, -a, a, b], vec![wb, wa, wa, wb])
        }
        n => golub_welsch(n),
    }
}

/// Newton iteration on Legendre polynomials for orders without a table.
fn golub_welsch(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "quadrature order must be at least 1");
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        x[n - 1 - i] = z;
        w[n - 1 - i] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
    (x, w)
}

/// Points in unit-cube coordinates `[0,1]^dim` (unused axes zero) with
/// weights summing to 1.
pub fn unit_cube_rule(order: usize, dim: usize) -> Vec<(Point, f64)> {
    let (x, w) = gauss_legendre(order);
    let n = x.len();
    let total = n.pow(dim as u32);
    let mut out = Vec::with_capacity(total);
    for idx in 0..total {
        let mut p = Point::zeros();
        let mut wt = 1.0;
        let mut rem = idx;
        for k in 0..dim {
            let i = rem % n;
            rem /= n;
            p[k] = 0.5 * (x[i] + 1.0);
            wt *= 0.5 * w[i];
        }
        out.push((p, wt));
    }
    out
}

/// Rule on the box `[min, min + h]^dim`.
pub fn box_rule(order: usize, dim: usize, min: &Point, h: f64) -> Vec<(Point, f64)> {
    let scale = h.powi(dim as i32);
    unit_cube_rule(order, dim)
        .into_iter()
        .map(|(p, w)| (min + p * h, w * scale))
        .collect()
}
