//! Incomplete, 2:1-balanced quadtrees/octrees carved out of an implicit
//! geometry, with element classification, surrogate-boundary extraction
//! and hanging-node bookkeeping.

mod classify;
mod faces;
mod key;
mod nodes;
mod tree;

pub use classify::{classify_elements, inside_fraction, ElementMarker};
pub use faces::{attach_distance_vectors, extract_surrogate_boundary, FaceGaussPoint, SurrogateFace};
pub use key::{max_level, morton, Domain, LeafKey, MAX_LEVEL_2D, MAX_LEVEL_3D};
pub use nodes::NodeTable;
pub use tree::{build_octree, IncompleteOctree, Location};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{GeometryError, ImplicitGeometry, Point};
use crate::inr::GradientCache;

#[derive(Debug, Error)]
pub enum OctreeError {
    #[error("invalid mesh configuration: {0}")]
    InvalidConfig(String),
    #[error("no leaf intersects the geometry; is it inside the domain?")]
    EmptyDomain,
    #[error("distance vector failed on surrogate face {face} at {point:?}: {source}")]
    DistanceVector {
        face: usize,
        point: [f64; 3],
        #[source]
        source: GeometryError,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MeshConfig {
    pub base_level: u8,
    pub boundary_level: u8,
    /// Inside-fraction threshold separating true from false intercepted leaves.
    pub lambda_criteria: f64,
    /// Gauss points per axis used for classification.
    pub classify_order: usize,
    /// Gauss points per axis sampled (in addition to corners) during refinement.
    pub sample_order: usize,
    /// Gauss points per axis on surrogate faces.
    pub face_order: usize,
}

impl Default for MeshConfig {
    fn default() -> Self {
        MeshConfig {
            base_level: 4,
            boundary_level: 6,
            lambda_criteria: 1.0,
            classify_order: 2,
            sample_order: 2,
            face_order: 2,
        }
    }
}

impl MeshConfig {
    pub fn new(base_level: u8, boundary_level: u8) -> Self {
        MeshConfig {
            base_level,
            boundary_level,
            ..Default::default()
        }
    }

    pub fn validate(&self, dim: usize) -> Result<(), OctreeError> {
        let bad = |m: String| Err(OctreeError::InvalidConfig(m));
        if dim != 2 && dim != 3 {
            return bad(format!("dimension must be 2 or 3, got {dim}"));
        }
        if self.base_level > self.boundary_level {
            return bad(format!(
                "base level {} exceeds boundary level {}",
                self.base_level, self.boundary_level
            ));
        }
        if self.boundary_level > max_level(dim) {
            return bad(format!(
                "boundary level {} exceeds the {dim}D maximum {}",
                self.boundary_level,
                max_level(dim)
            ));
        }
        if !(self.lambda_criteria > 0.0 && self.lambda_criteria <= 1.0) {
            return bad(format!("lambda_criteria {} outside (0, 1]", self.lambda_criteria));
        }
        if self.classify_order == 0 || self.sample_order == 0 || self.face_order == 0 {
            return bad("quadrature orders must be at least 1".into());
        }
        Ok(())
    }
}

/// Everything the assembly needs from meshing.
#[derive(Debug, Clone)]
pub struct SurrogateMesh {
    pub octree: IncompleteOctree,
    pub markers: Vec<ElementMarker>,
    pub faces: Vec<SurrogateFace>,
    pub nodes: NodeTable,
    /// Faces whose distance vector failed the landing check.
    pub flagged_faces: usize,
}

impl SurrogateMesh {
    pub fn dim(&self) -> usize {
        self.octree.dim()
    }

    pub fn active(&self) -> Vec<bool> {
        self.markers.iter().map(|m| m.is_active()).collect()
    }

    pub fn active_leaves(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.markers.len()).filter(|&i| self.markers[i].is_active())
    }

    /// Active leaf containing `p`.
    pub fn element_containing(&self, p: &Point) -> Option<usize> {
        self.octree
            .leaf_containing(p)
            .filter(|&i| self.markers[i].is_active())
    }

    pub fn dump(&self) -> String {
        self.octree.dump(|i| self.markers[i].to_string())
    }
}

/// Build, classify, extract the surrogate boundary, attach distance
/// vectors and number the nodes.
pub fn mesh_geometry<G: ImplicitGeometry + ?Sized>(
    geom: &G,
    domain: Domain,
    cfg: &MeshConfig,
    cache: &GradientCache,
) -> Result<SurrogateMesh, OctreeError> {
    let octree = build_octree(geom, domain, cfg)?;
    let markers = classify_elements(&octree, geom, cfg.lambda_criteria, cfg.classify_order);
    let active: Vec<bool> = markers.iter().map(|m| m.is_active()).collect();
    if !active.iter().any(|&a| a) {
        return Err(OctreeError::EmptyDomain);
    }
    let mut faces = extract_surrogate_boundary(&octree, &active, cfg.face_order);
    let flagged_faces = attach_distance_vectors(&mut faces, geom, cache)?;
    let nodes = NodeTable::build(&octree, &active);
    Ok(SurrogateMesh {
        octree,
        markers,
        faces,
        nodes,
        flagged_faces,
    })
}
