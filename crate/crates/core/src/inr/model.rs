use std::sync::atomic::{AtomicU64, Ordering};

use crate::geometry::{
    check_fd_gradient, DomainTransform, GeometryError, ImplicitGeometry, Point, SignConvention,
    DEFAULT_FD_STEP,
};

use super::{GradientCache, InrError};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Activation {
    /// `ln(1 + exp(beta * z)) / beta`
    Softplus { beta: f64 },
    Relu,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Softplus { beta } => {
                let t = beta * z;
                if t > 30.0 {
                    z
                } else {
                    t.exp().ln_1p() / beta
                }
            }
            Activation::Relu => z.max(0.0),
        }
    }
}

/// One affine layer, weights row-major `out x in`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub in_dim: usize,
    pub out_dim: usize,
    /// Input is `[previous output, raw point]`.
    pub skip_input: bool,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpParameters {
    pub in_dim: usize,
    pub activation: Activation,
    pub layers: Vec<Layer>,
}

impl MlpParameters {
    pub fn validate(&self) -> Result<(), InrError> {
        let dim_err = |m: String| Err(InrError::DimensionMismatch(m));
        if !(self.in_dim == 2 || self.in_dim == 3) {
            return dim_err(format!("in_dim must be 2 or 3, got {}", self.in_dim));
        }
        if self.layers.is_empty() {
            return dim_err("network has no layers".into());
        }
        let mut prev: Option<usize> = None;
        for (k, layer) in self.layers.iter().enumerate() {
            let expected = match (prev, layer.skip_input) {
                (None, false) => self.in_dim,
                (None, true) => {
                    return dim_err("layer 0 cannot be a skip layer".into());
                }
                (Some(p), false) => p,
                (Some(p), true) => p + self.in_dim,
            };
            if layer.in_dim != expected {
                return dim_err(format!(
                    "layer {k}: in_dim {} but expected {expected}",
                    layer.in_dim
                ));
            }
            if layer.weights.len() != layer.in_dim * layer.out_dim {
                return dim_err(format!(
                    "layer {k}: {} weights for a {}x{} matrix",
                    layer.weights.len(),
                    layer.out_dim,
                    layer.in_dim
                ));
            }
            if layer.bias.len() != layer.out_dim {
                return dim_err(format!(
                    "layer {k}: {} biases for out_dim {}",
                    layer.bias.len(),
                    layer.out_dim
                ));
            }
            prev = Some(layer.out_dim);
        }
        if prev != Some(1) {
            return dim_err(format!("last layer out_dim {:?}, expected 1", prev));
        }
        if let Activation::Softplus { beta } = self.activation {
            if !(beta > 0.0) {
                return Err(InrError::Format(format!("softplus beta must be positive, got {beta}")));
            }
        }
        Ok(())
    }

    fn widest(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.in_dim.max(l.out_dim))
            .max()
            .unwrap_or(1)
    }

    /// Forward pass on a canonical-space input of length `in_dim`.
    pub fn eval(&self, input: &[f64]) -> f64 {
        let width = self.widest();
        let mut cur = Vec::with_capacity(width);
        let mut next = Vec::with_capacity(width);
        cur.extend_from_slice(input);
        let last = self.layers.len() - 1;
        for (k, layer) in self.layers.iter().enumerate() {
            if layer.skip_input {
                cur.extend_from_slice(input);
            }
            next.clear();
            for row in 0..layer.out_dim {
                let w = &layer.weights[row * layer.in_dim..(row + 1) * layer.in_dim];
                let mut z = layer.bias[row];
                for (wi, xi) in w.iter().zip(cur.iter()) {
                    z += wi * xi;
                }
                next.push(if k == last { z } else { self.activation.apply(z) });
            }
            std::mem::swap(&mut cur, &mut next);
        }
        cur[0]
    }
}

/// Neural implicit geometry: an MLP plus the frame and sign it was trained in.
#[derive(Debug)]
pub struct InrModel {
    pub params: MlpParameters,
    pub transform: DomainTransform,
    pub sign: SignConvention,
    /// Central-difference step in canonical units.
    pub fd_step: f64,
    evaluations: AtomicU64,
}

impl Clone for InrModel {
    fn clone(&self) -> Self {
        Self {
            params: self.params.clone(),
            transform: self.transform,
            sign: self.sign,
            fd_step: self.fd_step,
            evaluations: AtomicU64::new(0),
        }
    }
}

impl InrModel {
    pub fn new(
        params: MlpParameters,
        transform: DomainTransform,
        sign: SignConvention,
    ) -> Result<Self, InrError> {
        params.validate()?;
        if !(transform.scale > 0.0) {
            return Err(InrError::Format("transform scale must be positive".into()));
        }
        Ok(Self {
            params,
            transform,
            sign,
            fd_step: DEFAULT_FD_STEP,
            evaluations: AtomicU64::new(0),
        })
    }

    pub fn in_dim(&self) -> usize {
        self.params.in_dim
    }

    /// Network evaluations performed since construction or the last reset.
    pub fn evaluations(&self) -> u64 {
        self.evaluations.load(Ordering::Relaxed)
    }

    pub fn reset_evaluations(&self) {
        self.evaluations.store(0, Ordering::Relaxed);
    }

    fn canonical_input(&self, x: &Point) -> [f64; 3] {
        let c = self.transform.apply(x);
        [c.x, c.y, c.z]
    }

    /// Sign-normalized network output (negative inside) in canonical units.
    pub fn forward(&self, x: &Point) -> f64 {
        let input = self.canonical_input(x);
        self.evaluations.fetch_add(1, Ordering::Relaxed);
        self.sign.to_runtime_factor() * self.params.eval(&input[..self.in_dim()])
    }

    /// Forward on an explicit coordinate slice; rejects wrong dimensionality.
    pub fn forward_slice(&self, coords: &[f64]) -> Result<f64, InrError> {
        if coords.len() != self.in_dim() {
            return Err(InrError::DimensionMismatch(format!(
                "query point has {} components, model expects {}",
                coords.len(),
                self.in_dim()
            )));
        }
        let mut p = Point::zeros();
        for (k, c) in coords.iter().enumerate() {
            p[k] = *c;
        }
        Ok(self.forward(&p))
    }

    /// Same per-row arithmetic as [`forward`](Self::forward), so results are
    /// bitwise identical.
    pub fn forward_batch(&self, points: &[Point]) -> Vec<f64> {
        use rayon::prelude::*;
        points.par_iter().map(|p| self.forward(p)).collect()
    }

    /// Central-difference gradient in canonical units, memoized in `cache`.
    /// A hit performs no network evaluations.
    pub fn gradient_fd(&self, x: &Point, cache: &GradientCache) -> Result<Point, GeometryError> {
        cache
            .get_or_compute(x, || {
                let value = self.signed_distance(x);
                let g = self.fd_gradient_uncached(x)?;
                Ok((g, value))
            })
            .map(|(g, _)| g)
    }

    fn fd_gradient_uncached(&self, x: &Point) -> Result<Point, GeometryError> {
        let step = self.fd_step / self.transform.scale;
        let mut g = Point::zeros();
        for k in 0..self.in_dim() {
            let mut plus = *x;
            let mut minus = *x;
            plus[k] += step;
            minus[k] -= step;
            g[k] = (self.signed_distance(&plus) - self.signed_distance(&minus)) / (2.0 * step);
        }
        check_fd_gradient(x, g)
    }
}

impl ImplicitGeometry for InrModel {
    fn dim(&self) -> usize {
        self.in_dim()
    }

    /// Distance in raw units: the canonical output divided by the scale.
    fn signed_distance(&self, x: &Point) -> f64 {
        self.forward(x) / self.transform.scale
    }

    fn gradient(&self, x: &Point) -> Result<Point, GeometryError> {
        self.fd_gradient_uncached(x)
    }

    fn is_exact(&self) -> bool {
        false
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn plane_model() -> InrModel {
        let params = MlpParameters {
            in_dim: 3,
            activation: Activation::Softplus { beta: 100.0 },
            layers: vec![Layer {
                in_dim: 3,
                out_dim: 1,
                skip_input: false,
                weights: vec![1.0, 0.0, 0.0],
                bias: vec![-0.5],
            }],
        };
        InrModel::new(params, DomainTransform::identity(), SignConvention::NegativeInside).unwrap()
    }

    fn constant_model(bias: f64) -> InrModel {
        let params = MlpParameters {
            in_dim: 3,
            activation: Activation::Relu,
            layers: vec![
                Layer {
                    in_dim: 3,
                    out_dim: 4,
                    skip_input: false,
                    weights: vec![0.0; 12],
                    bias: vec![0.0; 4],
                },
                Layer {
                    in_dim: 4,
                    out_dim: 1,
                    skip_input: false,
                    weights: vec![0.0; 4],
                    bias: vec![bias],
                },
            ],
        };
        InrModel::new(params, DomainTransform::identity(), SignConvention::NegativeInside).unwrap()
    }

    #[test]
    fn zero_weights_give_constant_output() {
        let m = constant_model(0.3);
        for x in [Point::zeros(), Point::new(0.4, -0.9, 0.1)] {
            assert_eq!(m.forward(&x), 0.3);
        }
    }

    #[test]
    fn plane_network() {
        let m = plane_model();
        assert!((m.forward(&Point::new(0.8, 0.3, -0.2)) - 0.3).abs() < 1e-15);
        let cache = GradientCache::new();
        let g = m.gradient_fd(&Point::new(0.1, 0.2, 0.3), &cache).unwrap();
        assert!((g - Point::new(1.0, 0.0, 0.0)).norm() < 1e-10);
    }

    #[test]
    fn cache_hit_costs_no_evaluations() {
        let m = plane_model();
        let cache = GradientCache::new();
        let x = Point::new(0.25, -0.5, 0.125);
        let first = m.gradient_fd(&x, &cache).unwrap();
        let after_first = m.evaluations();
        assert_eq!(after_first, 7);
        let second = m.gradient_fd(&x, &cache).unwrap();
        assert_eq!(m.evaluations(), after_first);
        assert_eq!(first, second);
        assert_eq!(cache.hits(), 1);
    }

    #[test]
    fn positive_inside_files_are_flipped() {
        let mut m = plane_model();
        m.sign = SignConvention::PositiveInside;
        assert!((m.forward(&Point::new(0.8, 0.0, 0.0)) + 0.3).abs() < 1e-15);
    }

    #[test]
    fn transform_is_applied_first() {
        let mut m = plane_model();
        m.transform = DomainTransform {
            center: Point::new(10.0, 0.0, 0.0),
            scale: 2.0,
        };
        // canonical x = (10.5 - 10) * 2 = 1.0, output 0.5, raw distance 0.25
        let x = Point::new(10.5, 0.0, 0.0);
        assert!((m.forward(&x) - 0.5).abs() < 1e-15);
        assert!((m.signed_distance(&x) - 0.25).abs() < 1e-15);
        let g = m.gradient(&x).unwrap();
        assert!((g - Point::new(1.0, 0.0, 0.0)).norm() < 1e-9);
    }

    #[test]
    fn wrong_query_dimension() {
        let m = plane_model();
        assert!(matches!(
            m.forward_slice(&[0.1, 0.2]),
            Err(InrError::DimensionMismatch(_))
        ));
        assert!(m.forward_slice(&[0.1, 0.2, 0.3]).is_ok());
    }

    #[test]
    fn skip_layer_dimension_rules() {
        let mut p = MlpParameters {
            in_dim: 2,
            activation: Activation::Relu,
            layers: vec![
                Layer {
                    in_dim: 2,
                    out_dim: 3,
                    skip_input: false,
                    weights: vec![0.1; 6],
                    bias: vec![0.0; 3],
                },
                Layer {
                    in_dim: 5,
                    out_dim: 1,
                    skip_input: true,
                    weights: vec![0.2; 5],
                    bias: vec![0.0],
                },
            ],
        };
        assert!(p.validate().is_ok());
        // relu(0.1x + 0.1y) three times, then skip concat [h, x, y]
        let v = p.eval(&[1.0, 1.0]);
        assert!((v - (0.2 * 3.0 * 0.2 + 0.2 * 2.0)).abs() < 1e-15);
        p.layers[1].skip_input = false;
        assert!(matches!(p.validate(), Err(InrError::DimensionMismatch(_))));
    }

    #[test]
    fn batch_equals_pointwise() {
        let m = plane_model();
        assert!(m.forward_batch(&[]).is_empty());
        let pts: Vec<Point> = (0..4096)
            .map(|i| {
                let t = i as f64 * 0.001;
                Point::new(t.sin(), (2.0 * t).cos(), t - 2.0)
            })
            .collect();
        let batch = m.forward_batch(&pts);
        for (p, b) in pts.iter().zip(&batch) {
            assert_eq!(m.forward(p).to_bits(), b.to_bits());
        }
    }
}
