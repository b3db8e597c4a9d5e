//! Multilinear (Q1) shape functions on axis-aligned boxes.

use crate::geometry::Point;

/// Values and physical gradients of the `2^dim` corner functions at local
/// coordinates `t ∈ [0,1]^dim` on a box of edge `h`. Corner `c` sits on the
/// upper side of axis `k` when bit `k` of `c` is set.
#[derive(Debug, Clone, Copy)]
pub struct ShapeEval {
    pub n: [f64; 8],
    pub grad: [Point; 8],
}

pub fn shape(dim: usize, t: &Point, h: f64) -> ShapeEval {
    let mut out = ShapeEval {
        n: [0.0; 8],
        grad: [Point::zeros(); 8],
    };
    for c in 0..1usize << dim {
        let mut f = [1.0; 3];
        let mut df = [0.0; 3];
        for k in 0..dim {
            let upper = c >> k & 1 == 1;
            f[k] = if upper { t[k] } else { 1.0 - t[k] };
            df[k] = if upper { 1.0 / h } else { -1.0 / h };
        }
        out.n[c] = f[0] * f[1] * f[2];
        for j in 0..dim {
            let mut g = df[j];
            for (k, fk) in f.iter().enumerate() {
                if k != j {
                    g *= fk;
                }
            }
            out.grad[c][j] = g;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partition_of_unity_and_gradients() {
        for dim in [2, 3] {
            let t = Point::new(0.3, 0.8, if dim == 3 { 0.45 } else { 0.0 });
            let h = 0.25;
            let s = shape(dim, &t, h);
            let nc = 1 << dim;
            let sum: f64 = s.n[..nc].iter().sum();
            assert!((sum - 1.0).abs() < 1e-15);
            let gsum: Point = s.grad[..nc].iter().sum();
            assert!(gsum.norm() < 1e-13);
            // finite-difference check of each gradient
            for c in 0..nc {
                for k in 0..dim {
                    let mut tp = t;
                    let mut tm = t;
                    tp[k] += 1e-6;
                    tm[k] -= 1e-6;
                    let fd = (shape(dim, &tp, h).n[c] - shape(dim, &tm, h).n[c]) / (2e-6 * h);
                    assert!((fd - s.grad[c][k]).abs() < 1e-7);
                }
            }
            // reproduces linear functions: Σ N_c x_c = x
            let mut x = Point::zeros();
            for c in 0..nc {
                for k in 0..dim {
                    if c >> k & 1 == 1 {
                        x[k] += s.n[c];
                    }
                }
            }
            assert!((x - t).norm() < 1e-15);
        }
    }
}
