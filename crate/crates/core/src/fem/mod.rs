//! Linear elasticity on the surrogate domain with shifted-boundary
//! Dirichlet conditions.

mod assembly;
pub mod basis;
pub mod field;
mod manufactured;
mod material;

pub use assembly::{
    assemble, AssemblyOptions, DirichletSpec, FaceFilter, GlobalSystem, NitscheVariant, VectorFn,
};
pub use manufactured::{
    body_force, shift_displacement, stress, von_mises, Factor, LinearField, RadialField,
    RingSolution, SeparableField, VectorField,
};
pub use material::{ElasticityMode, Material};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FemError {
    #[error("invalid material: {0}")]
    InvalidMaterial(String),
    #[error("surrogate face {face} has no distance vector")]
    MissingDistanceVector { face: usize },
    #[error("invalid assembly option: {0}")]
    InvalidOption(String),
    #[error("unknown case {0:?}")]
    UnknownCase(String),
}

/// Free DOFs of every node touching the given leaves, each set to `value`
/// at its node position. Hanging corners contribute their masters.
pub fn dofs_on_leaves(
    mesh: &crate::octree::SurrogateMesh,
    leaves: impl IntoIterator<Item = usize>,
    value: impl Fn(&crate::geometry::Point) -> crate::geometry::Point,
) -> Vec<(usize, f64)> {
    let dim = mesh.dim();
    let mut free: Vec<usize> = leaves
        .into_iter()
        .flat_map(|l| mesh.nodes.corners(l).to_vec())
        .flat_map(|n| mesh.nodes.expansion[n].iter().map(|e| e.0).collect::<Vec<_>>())
        .collect();
    free.sort_unstable();
    free.dedup();
    let mut out = Vec::with_capacity(free.len() * dim);
    for f in free {
        let u = value(&mesh.nodes.positions[mesh.nodes.free_nodes[f]]);
        for k in 0..dim {
            out.push((f * dim + k, u[k]));
        }
    }
    out
}
