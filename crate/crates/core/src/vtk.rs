//! Legacy ASCII VTK output of the surrogate mesh and solution.

use std::fmt::Write as _;
use std::path::Path;

use crate::fem::field::nodal_displacements;
use crate::octree::SurrogateMesh;

const VTK_QUAD: u8 = 9;
const VTK_HEXAHEDRON: u8 = 12;

/// Lexicographic leaf corners (x fastest) to VTK's counter-clockwise order.
const QUAD_ORDER: [usize; 4] = [0, 1, 3, 2];
const HEX_ORDER: [usize; 8] = [0, 1, 3, 2, 4, 5, 7, 6];

/// Unstructured grid over the active leaves. Points are the node table in
/// its own order; `values` is the free-DOF solution, `von_mises` one value
/// per octree leaf. Missing fields are written as zeros.
pub fn vtk_string(mesh: &SurrogateMesh, values: Option<&[f64]>, von_mises: Option<&[f64]>) -> String {
    let dim = mesh.dim();
    let nodes = &mesh.nodes;
    let cells: Vec<usize> = mesh.active_leaves().collect();
    let per_cell = 1 << dim;
    let mut s = String::new();
    s.push_str("# vtk DataFile Version 3.0\n");
    s.push_str("shifted boundary surrogate mesh\nASCII\nDATASET UNSTRUCTURED_GRID\n");
    writeln!(s, "POINTS {} double", nodes.len()).unwrap();
    for p in &nodes.positions {
        writeln!(s, "{} {} {}", p.x, p.y, p.z).unwrap();
    }
    writeln!(s, "CELLS {} {}", cells.len(), cells.len() * (per_cell + 1)).unwrap();
    let order: &[usize] = if dim == 2 { &QUAD_ORDER } else { &HEX_ORDER };
    for &leaf in &cells {
        let c = nodes.corners(leaf);
        s.push_str(&per_cell.to_string());
        for &k in order {
            write!(s, " {}", c[k]).unwrap();
        }
        s.push('\n');
    }
    writeln!(s, "CELL_TYPES {}", cells.len()).unwrap();
    let ty = if dim == 2 { VTK_QUAD } else { VTK_HEXAHEDRON };
    for _ in &cells {
        writeln!(s, "{ty}").unwrap();
    }

    writeln!(s, "POINT_DATA {}", nodes.len()).unwrap();
    s.push_str("VECTORS displacement double\n");
    match values {
        Some(v) => {
            for u in nodal_displacements(mesh, v) {
                writeln!(s, "{} {} {}", u.x, u.y, u.z).unwrap();
            }
        }
        None => {
            for _ in 0..nodes.len() {
                s.push_str("0 0 0\n");
            }
        }
    }

    writeln!(s, "CELL_DATA {}", cells.len()).unwrap();
    s.push_str("SCALARS marker int 1\nLOOKUP_TABLE default\n");
    for &leaf in &cells {
        writeln!(s, "{}", mesh.markers[leaf].code()).unwrap();
    }
    s.push_str("SCALARS von_mises double 1\nLOOKUP_TABLE default\n");
    for &leaf in &cells {
        writeln!(s, "{}", von_mises.map_or(0.0, |vm| vm[leaf])).unwrap();
    }
    s
}

pub fn write_vtk(
    path: &Path,
    mesh: &SurrogateMesh,
    values: Option<&[f64]>,
    von_mises: Option<&[f64]>,
) -> std::io::Result<()> {
    std::fs::write(path, vtk_string(mesh, values, von_mises))
}
