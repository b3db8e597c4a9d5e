use serde::{Deserialize, Serialize};

use super::FemError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ElasticityMode {
    PlaneStrain,
    Full3d,
}

impl ElasticityMode {
    pub fn for_dim(dim: usize) -> Self {
        if dim == 2 {
            ElasticityMode::PlaneStrain
        } else {
            ElasticityMode::Full3d
        }
    }
}

/// Isotropic linear-elastic material in Lamé form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Material {
    pub lambda: f64,
    pub mu: f64,
    pub mode: ElasticityMode,
}

impl Material {
    /// Plane strain and full 3D share `λ = Eν/((1+ν)(1−2ν))`, `μ = E/(2(1+ν))`.
    pub fn from_engineering(
        youngs_modulus: f64,
        poisson_ratio: f64,
        mode: ElasticityMode,
    ) -> Result<Self, FemError> {
        if !(youngs_modulus > 0.0) || !youngs_modulus.is_finite() {
            return Err(FemError::InvalidMaterial(format!(
                "Young's modulus must be positive, got {youngs_modulus}"
            )));
        }
        if !(poisson_ratio > -1.0 && poisson_ratio < 0.5) {
            return Err(FemError::InvalidMaterial(format!(
                "Poisson ratio must lie in (-1, 0.5), got {poisson_ratio}"
            )));
        }
        let (e, nu) = (youngs_modulus, poisson_ratio);
        Ok(Material {
            lambda: e * nu / ((1.0 + nu) * (1.0 - 2.0 * nu)),
            mu: e / (2.0 * (1.0 + nu)),
            mode,
        })
    }

    pub fn from_lame(lambda: f64, mu: f64, mode: ElasticityMode) -> Result<Self, FemError> {
        if !(mu > 0.0) || !lambda.is_finite() || !mu.is_finite() {
            return Err(FemError::InvalidMaterial(format!("shear modulus must be positive, got {mu}")));
        }
        if lambda + mu <= 0.0 {
            return Err(FemError::InvalidMaterial(format!(
                "lambda {lambda} with mu {mu} is not strongly elliptic"
            )));
        }
        Ok(Material { lambda, mu, mode })
    }

    /// `λ + 2μ`.
    pub fn p_wave_modulus(&self) -> f64 {
        self.lambda + 2.0 * self.mu
    }

    /// Nitsche penalty used when none is configured.
    pub fn default_gamma(&self) -> f64 {
        40.0 * self.p_wave_modulus()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn engineering_constants() {
        let m = Material::from_engineering(1.0, 0.0, ElasticityMode::PlaneStrain).unwrap();
        assert_eq!((m.lambda, m.mu), (0.0, 0.5));
        let al = Material::from_engineering(7e10, 0.33, ElasticityMode::Full3d).unwrap();
        assert!((al.mu - 7e10 / 2.66).abs() / al.mu < 1e-15);
        assert!((al.mu - 2.6316e10).abs() / al.mu < 1e-4);
        let expect_lambda = 7e10 * 0.33 / (1.33 * 0.34);
        assert!((al.lambda - expect_lambda).abs() / expect_lambda < 1e-15);
    }

    #[test]
    fn rejects_out_of_range() {
        assert!(Material::from_engineering(0.0, 0.2, ElasticityMode::Full3d).is_err());
        assert!(Material::from_engineering(1.0, 0.5, ElasticityMode::Full3d).is_err());
        assert!(Material::from_engineering(1.0, -1.0, ElasticityMode::Full3d).is_err());
        assert!(Material::from_lame(1.0, 0.5, ElasticityMode::Full3d).is_ok());
        assert!(Material::from_lame(1.0, 0.0, ElasticityMode::Full3d).is_err());
    }
}
