use crate::geometry::{as_array, distance_vector_from, ImplicitGeometry, Point};
use crate::inr::GradientCache;
use crate::quadrature::unit_cube_rule;

use super::{IncompleteOctree, LeafKey, Location, OctreeError};

#[derive(Debug, Clone, PartialEq)]
pub struct FaceGaussPoint {
    pub x: Point,
    pub weight: f64,
    /// Vector to the closest true-boundary point; set by
    /// [`attach_distance_vectors`].
    pub d: Option<Point>,
    /// Signed distance at `x`.
    pub sdf: f64,
}

/// A grid-aligned piece of the surrogate boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateFace {
    /// Leaf index of the surrogate-domain element owning the face.
    pub owner: usize,
    pub axis: usize,
    pub positive: bool,
    /// Outward unit normal, `±e_axis`.
    pub normal: Point,
    /// Edge length of the face itself (smaller than the owner's when the
    /// neighbor is finer).
    pub size: f64,
    /// Edge length of the owner leaf.
    pub owner_size: f64,
    pub gauss: Vec<FaceGaussPoint>,
    pub flagged: bool,
}

impl SurrogateFace {
    pub fn area(&self, dim: usize) -> f64 {
        self.size.powi(dim as i32 - 1)
    }
}

fn make_face(
    octree: &IncompleteOctree,
    owner: usize,
    axis: usize,
    positive: bool,
    extent: &LeafKey,
    order: usize,
) -> SurrogateFace {
    let dim = octree.dim();
    let dom = &octree.domain;
    let owner_key = octree.leaves()[owner];
    let owner_size = dom.cell_size(owner_key.level);
    let size = dom.cell_size(extent.level);
    let mut origin = dom.cell_min(extent);
    origin[axis] = dom.cell_min(&owner_key)[axis] + if positive { owner_size } else { 0.0 };
    let tangents: Vec<usize> = (0..dim).filter(|&k| k != axis).collect();
    let area = size.powi(dim as i32 - 1);
    let gauss = unit_cube_rule(order, dim - 1)
        .into_iter()
        .map(|(t, w)| {
            let mut x = origin;
            for (j, &k) in tangents.iter().enumerate() {
                x[k] += t[j] * size;
            }
            FaceGaussPoint {
                x,
                weight: w * area,
                d: None,
                sdf: f64::NAN,
            }
        })
        .collect();
    let mut normal = Point::zeros();
    normal[axis] = if positive { 1.0 } else { -1.0 };
    SurrogateFace {
        owner,
        axis,
        positive,
        normal,
        size,
        owner_size,
        gauss,
        flagged: false,
    }
}

fn collect_faces(
    octree: &IncompleteOctree,
    active: &[bool],
    owner: usize,
    axis: usize,
    positive: bool,
    region: LeafKey,
    order: usize,
    out: &mut Vec<SurrogateFace>,
) {
    match octree.locate(&region) {
        Location::Leaf(j) => {
            if !active[j] {
                out.push(make_face(octree, owner, axis, positive, &region, order));
            }
        }
        Location::Absent => out.push(make_face(octree, owner, axis, positive, &region, order)),
        Location::Internal => {
            let m = octree.max_level();
            for child in region.children(octree.dim(), m) {
                // only the children touching the owner's face
                let upper = child.anchor[axis] != region.anchor[axis];
                if upper != positive {
                    collect_faces(octree, active, owner, axis, positive, child, order, out);
                }
            }
        }
    }
}

/// Faces between active leaves and inactive or missing neighbors, grouped by
/// owner in leaf order, then axis, then side.
pub fn extract_surrogate_boundary(
    octree: &IncompleteOctree,
    active: &[bool],
    order: usize,
) -> Vec<SurrogateFace> {
    use rayon::prelude::*;
    let m = octree.max_level();
    let per_leaf: Vec<Vec<SurrogateFace>> = (0..octree.len())
        .into_par_iter()
        .map(|i| {
            let mut out = Vec::new();
            if !active[i] {
                return out;
            }
            let key = octree.leaves()[i];
            for axis in 0..octree.dim() {
                for positive in [false, true] {
                    match key.neighbor(axis, positive, m) {
                        None => out.push(make_face(octree, i, axis, positive, &key, order)),
                        Some(n) => collect_faces(octree, active, i, axis, positive, n, order, &mut out),
                    }
                }
            }
            out
        })
        .collect();
    per_leaf.into_iter().flatten().collect()
}

/// Fills `d` and `sdf` on every face Gauss point through the shared cache.
/// Returns the number of faces whose shifted point misses the surface by
/// more than a quarter of the owner's size (those faces are flagged).
pub fn attach_distance_vectors<G: ImplicitGeometry + ?Sized>(
    faces: &mut [SurrogateFace],
    geom: &G,
    cache: &GradientCache,
) -> Result<usize, OctreeError> {
    use rayon::prelude::*;
    let results: Vec<Result<(), OctreeError>> = faces
        .par_iter_mut()
        .enumerate()
        .map(|(fi, face)| {
            let tol = 0.25 * face.owner_size;
            face.flagged = false;
            for gp in &mut face.gauss {
                let x = gp.x;
                let (g, f) = cache
                    .get_or_compute(&x, || {
                        let f = geom.signed_distance(&x);
                        Ok((geom.gradient(&x)?, f))
                    })
                    .map_err(|source| OctreeError::DistanceVector {
                        face: fi,
                        point: as_array(&x),
                        source,
                    })?;
                let d = distance_vector_from(f, &g);
                gp.d = Some(d);
                gp.sdf = f;
                if d != Point::zeros() && geom.signed_distance(&(x + d)).abs() >= tol {
                    face.flagged = true;
                }
            }
            Ok(())
        })
        .collect();
    results.into_iter().collect::<Result<Vec<_>, _>>()?;
    let flagged = faces.iter().filter(|f| f.flagged).count();
    if flagged > 0 {
        log::warn!("{flagged} surrogate faces failed the distance-vector landing check");
    }
    Ok(flagged)
}
