//! Named analysis cases: material, Dirichlet data, body force and default
//! mesh resolution for each benchmark geometry.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::fem::{
    body_force, dofs_on_leaves, DirichletSpec, ElasticityMode, FemError, LinearField, Material,
    RadialField, RingSolution, SeparableField, VectorField,
};
use crate::geometry::{icosphere, Annulus2d, BoxShape, Gyroid, Point};
use crate::octree::{Domain, MeshConfig, SurrogateMesh};
use crate::pipeline::GeometrySource;

/// Steel-like self weight `ρ g` (N/m³) used by the tower case.
pub const SELF_WEIGHT: f64 = 7850.0 * 9.81;

/// Radius separating the ring's inner (shifted) and outer (strong) boundaries.
pub const RING_SPLIT_RADIUS: f64 = 0.625;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CaseId {
    Ring2d,
    Icosphere,
    Bunny,
    Eiffel,
    Gyroid,
    LinearPatch,
}

impl CaseId {
    pub const ALL: [CaseId; 6] = [
        CaseId::Ring2d,
        CaseId::Icosphere,
        CaseId::Bunny,
        CaseId::Eiffel,
        CaseId::Gyroid,
        CaseId::LinearPatch,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CaseId::Ring2d => "ring2d",
            CaseId::Icosphere => "icosphere",
            CaseId::Bunny => "bunny",
            CaseId::Eiffel => "eiffel",
            CaseId::Gyroid => "gyroid",
            CaseId::LinearPatch => "linear-patch",
        }
    }
}

impl fmt::Display for CaseId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CaseId {
    type Err = FemError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        CaseId::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| FemError::UnknownCase(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BodyForce {
    Zero,
    /// Residual of the momentum balance for the case's exact field.
    Manufactured,
    Constant(Point),
}

#[derive(Clone)]
pub struct Case {
    pub id: CaseId,
    pub material: Material,
    /// Dirichlet data; also the exact solution when the body force is
    /// manufactured.
    pub field: Arc<dyn VectorField>,
    pub body_force: BodyForce,
    pub mesh: MeshConfig,
}

impl fmt::Debug for Case {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Case")
            .field("id", &self.id)
            .field("material", &self.material)
            .field("body_force", &self.body_force)
            .field("mesh", &self.mesh)
            .finish()
    }
}

pub fn ring_geometry() -> Annulus2d {
    Annulus2d::new(Point::new(1.0, 1.0, 0.0), 0.25, 1.0).expect("valid ring")
}

pub fn ring_domain() -> Domain {
    Domain::new(2, Point::zeros(), 2.0)
}

/// Level-2 icosphere of radius 0.75 centered in the canonical cube.
pub fn icosphere_soup() -> crate::geometry::TriangleSoup {
    icosphere(2, 0.75)
}

pub fn gyroid_geometry() -> Gyroid {
    let clip = BoxShape::new(Point::repeat(-0.8), Point::repeat(0.8)).expect("valid clip box");
    Gyroid::new(1.0, 0.0, clip).expect("valid gyroid")
}

impl Case {
    pub fn new(id: CaseId, dim: usize) -> Result<Case, FemError> {
        let mode = ElasticityMode::for_dim(dim);
        let need_3d = |c: CaseId| {
            if dim == 3 {
                Ok(())
            } else {
                Err(FemError::InvalidOption(format!("case {c} is three-dimensional")))
            }
        };
        let case = match id {
            CaseId::Ring2d => {
                if dim != 2 {
                    return Err(FemError::InvalidOption("ring2d is two-dimensional".into()));
                }
                Case {
                    id,
                    material: Material::from_engineering(1.0, 0.0, mode)?,
                    field: Arc::new(RingSolution {
                        center: Point::new(1.0, 1.0, 0.0),
                    }),
                    body_force: BodyForce::Manufactured,
                    mesh: MeshConfig::new(5, 7),
                }
            }
            CaseId::Icosphere => {
                need_3d(id)?;
                Case {
                    id,
                    material: Material::from_lame(1.0, 0.5, mode)?,
                    field: Arc::new(SeparableField::sinusoidal()),
                    body_force: BodyForce::Manufactured,
                    mesh: MeshConfig::new(4, 6),
                }
            }
            CaseId::Bunny => {
                need_3d(id)?;
                Case {
                    id,
                    material: Material::from_engineering(7e10, 0.33, mode)?,
                    field: Arc::new(SeparableField::trigonometric()),
                    body_force: BodyForce::Manufactured,
                    mesh: MeshConfig::new(4, 6),
                }
            }
            CaseId::Eiffel => {
                need_3d(id)?;
                Case {
                    id,
                    material: Material::from_engineering(1e11, 0.33, mode)?,
                    field: Arc::new(SeparableField::tower()),
                    body_force: BodyForce::Constant(Point::new(0.0, 0.0, -SELF_WEIGHT)),
                    mesh: MeshConfig::new(4, 6),
                }
            }
            CaseId::Gyroid => {
                need_3d(id)?;
                Case {
                    id,
                    material: Material::from_engineering(7e10, 0.3, mode)?,
                    field: Arc::new(RadialField::default()),
                    body_force: BodyForce::Manufactured,
                    mesh: MeshConfig::new(4, 6),
                }
            }
            CaseId::LinearPatch => Case {
                id,
                material: Material::from_lame(1.0, 0.5, mode)?,
                field: Arc::new(LinearField::patch(dim)),
                body_force: BodyForce::Zero,
                mesh: MeshConfig::new(4, 5),
            },
        };
        Ok(case)
    }

    /// Built-in geometry, where the case has one. Bunny and tower need a
    /// user-supplied soup or network.
    pub fn default_source(&self) -> Option<GeometrySource> {
        match self.id {
            CaseId::Ring2d => Some(GeometrySource::Ring),
            CaseId::Icosphere => Some(GeometrySource::Icosphere),
            CaseId::Gyroid => Some(GeometrySource::Gyroid),
            CaseId::LinearPatch => Some(GeometrySource::Sphere),
            CaseId::Bunny | CaseId::Eiffel => None,
        }
    }

    /// Whether the case's exact field solves the problem (so errors against
    /// it are meaningful).
    pub fn has_exact_solution(&self) -> bool {
        matches!(self.body_force, BodyForce::Manufactured | BodyForce::Zero)
    }

    pub fn body_force_fn(&self) -> Option<Box<dyn Fn(&Point) -> Point + Send + Sync>> {
        match self.body_force {
            BodyForce::Zero => None,
            BodyForce::Constant(f) => Some(Box::new(move |_| f)),
            BodyForce::Manufactured => {
                let field = self.field.clone();
                let mat = self.material;
                Some(Box::new(move |x| body_force(field.as_ref(), &mat, x)))
            }
        }
    }

    /// Shifted Dirichlet data. The ring applies it only on the inner circle.
    pub fn dirichlet(&self) -> DirichletSpec {
        let field = self.field.clone();
        let mut spec = DirichletSpec::everywhere(move |x| field.value(x));
        if self.id == CaseId::Ring2d {
            spec.filter = Some(Box::new(|_, gp| ring_radius(&gp.x) < RING_SPLIT_RADIUS));
        }
        spec
    }

    /// Strongly prescribed DOFs: for the ring, every node of a leaf that
    /// reaches the outer circle or owns an outer surrogate face.
    pub fn strong_dofs(&self, mesh: &SurrogateMesh) -> Vec<(usize, f64)> {
        if self.id != CaseId::Ring2d {
            return Vec::new();
        }
        let mut band: Vec<usize> = mesh
            .active_leaves()
            .filter(|&l| {
                mesh.nodes
                    .corners(l)
                    .iter()
                    .any(|&n| ring_radius(&mesh.nodes.positions[n]) >= 1.0)
            })
            .collect();
        band.extend(
            mesh.faces
                .iter()
                .filter(|f| f.gauss.iter().any(|gp| ring_radius(&gp.x) >= RING_SPLIT_RADIUS))
                .map(|f| f.owner),
        );
        band.sort_unstable();
        band.dedup();
        let field = self.field.clone();
        dofs_on_leaves(mesh, band, move |x| field.value(x))
    }
}

fn ring_radius(x: &Point) -> f64 {
    ((x.x - 1.0).powi(2) + (x.y - 1.0).powi(2)).sqrt()
}
