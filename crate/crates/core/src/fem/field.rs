//! Evaluation of discrete displacement fields.

use nalgebra::Matrix3;

use crate::geometry::Point;
use crate::octree::SurrogateMesh;

use super::basis::shape;
use super::manufactured::{stress, von_mises, VectorField};
use super::Material;

fn nodal(mesh: &SurrogateMesh, node: usize, values: &[f64]) -> Point {
    let dim = mesh.dim();
    let mut u = Point::zeros();
    for k in 0..dim {
        u[k] = mesh.nodes.node_value(node, values, dim, k);
    }
    u
}

/// Displacement at every node (hanging nodes included), in node order.
pub fn nodal_displacements(mesh: &SurrogateMesh, values: &[f64]) -> Vec<Point> {
    (0..mesh.nodes.len()).map(|n| nodal(mesh, n, values)).collect()
}

/// Free-node DOF vector sampling `field` at node positions.
pub fn interpolate<F: VectorField + ?Sized>(mesh: &SurrogateMesh, field: &F) -> Vec<f64> {
    let dim = mesh.dim();
    let mut out = vec![0.0; mesh.nodes.free_count() * dim];
    for (i, &n) in mesh.nodes.free_nodes.iter().enumerate() {
        let u = field.value(&mesh.nodes.positions[n]);
        for k in 0..dim {
            out[i * dim + k] = u[k];
        }
    }
    out
}

/// Value and gradient (`g[(i, j)] = ∂u_i/∂x_j`) of the FE field inside `leaf`.
pub fn evaluate(mesh: &SurrogateMesh, leaf: usize, x: &Point, values: &[f64]) -> (Point, Matrix3<f64>) {
    let dim = mesh.dim();
    let h = mesh.octree.cell_size(leaf);
    let t = (x - mesh.octree.cell_min(leaf)) / h;
    let s = shape(dim, &t, h);
    let mut u = Point::zeros();
    let mut g = Matrix3::zeros();
    for (a, &n) in mesh.nodes.corners(leaf).iter().enumerate() {
        let ua = nodal(mesh, n, values);
        u += ua * s.n[a];
        g += ua * s.grad[a].transpose();
    }
    (u, g)
}

/// Von Mises stress averaged over the Gauss points of each active leaf;
/// zero for inactive leaves.
pub fn element_von_mises(mesh: &SurrogateMesh, material: &Material, values: &[f64]) -> Vec<f64> {
    let dim = mesh.dim();
    let rule = crate::quadrature::unit_cube_rule(2, dim);
    (0..mesh.octree.len())
        .map(|leaf| {
            if !mesh.markers[leaf].is_active() {
                return 0.0;
            }
            let h = mesh.octree.cell_size(leaf);
            let min = mesh.octree.cell_min(leaf);
            let mut avg = Matrix3::zeros();
            for (t, w) in &rule {
                let (_, g) = evaluate(mesh, leaf, &(min + t * h), values);
                avg += stress(&g, material, dim) * *w;
            }
            von_mises(&avg)
        })
        .collect()
}
