use nalgebra::DMatrix;

use crate::geometry::Point;
use crate::octree::{FaceGaussPoint, SurrogateFace, SurrogateMesh};
use crate::quadrature::unit_cube_rule;
use crate::sparse::CsrMatrix;

use super::basis::{shape, ShapeEval};
use super::{FemError, Material};

/// Work items are evaluated in parallel in chunks of this size and then
/// scattered sequentially, so sums are independent of the worker count.
const CHUNK: usize = 2048;

pub type VectorFn = dyn Fn(&Point) -> Point + Send + Sync;
pub type FaceFilter = dyn Fn(&SurrogateFace, &FaceGaussPoint) -> bool + Send + Sync;

/// Dirichlet data `g`, evaluated at the mapped true-boundary point `x̃ + d`,
/// optionally restricted to a subset of surrogate Gauss points.
pub struct DirichletSpec {
    pub g: Box<VectorFn>,
    pub filter: Option<Box<FaceFilter>>,
}

impl DirichletSpec {
    pub fn everywhere(g: impl Fn(&Point) -> Point + Send + Sync + 'static) -> Self {
        DirichletSpec {
            g: Box::new(g),
            filter: None,
        }
    }

    pub fn applies(&self, face: &SurrogateFace, gp: &FaceGaussPoint) -> bool {
        self.filter.as_ref().map_or(true, |f| f(face, gp))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NitscheVariant {
    /// Test functions unshifted in every face term; non-symmetric.
    #[default]
    AsPrinted,
    /// Adjoint term with the opposite sign and a shifted test function in
    /// the penalty.
    Symmetrized,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssemblyOptions {
    pub gamma: f64,
    pub variant: NitscheVariant,
    /// Gauss points per axis for the body-force load.
    pub load_order: usize,
}

impl AssemblyOptions {
    pub fn for_material(material: &Material) -> Self {
        AssemblyOptions {
            gamma: material.default_gamma(),
            variant: NitscheVariant::AsPrinted,
            load_order: 2,
        }
    }
}

/// Sparse system over the free-node displacement DOFs (`free * dim + comp`).
#[derive(Debug, Clone, PartialEq)]
pub struct GlobalSystem {
    pub dim: usize,
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
}

/// Per-element contribution in free-node space.
struct Local {
    nodes: Vec<usize>,
    k: DMatrix<f64>,
    f: Vec<f64>,
}

/// Expands a contribution on the element's corners into free-node space,
/// folding in hanging-node constraints.
fn condense(mesh: &SurrogateMesh, leaf: usize, k: &DMatrix<f64>, f: &[f64]) -> Local {
    let dim = mesh.dim();
    let corners = mesh.nodes.corners(leaf);
    let mut nodes: Vec<usize> = corners
        .iter()
        .flat_map(|&n| mesh.nodes.expansion[n].iter().map(|e| e.0))
        .collect();
    nodes.sort_unstable();
    nodes.dedup();
    let nl = nodes.len();
    // t[(a, i)]: weight of free node i in corner a
    let mut t = DMatrix::<f64>::zeros(corners.len(), nl);
    for (a, &n) in corners.iter().enumerate() {
        for &(fi, w) in &mesh.nodes.expansion[n] {
            let i = nodes.binary_search(&fi).unwrap();
            t[(a, i)] += w;
        }
    }
    // element touches only free nodes, already in corner order
    let identity = nl == corners.len()
        && corners.iter().enumerate().all(|(a, &c)| mesh.nodes.free_index[c] == Some(nodes[a]));
    if identity {
        return Local {
            nodes,
            k: k.clone(),
            f: f.to_vec(),
        };
    }
    // block expansion: (T ⊗ I_dim)
    let nc = corners.len();
    let mut tb = DMatrix::<f64>::zeros(nc * dim, nl * dim);
    for a in 0..nc {
        for i in 0..nl {
            let w = t[(a, i)];
            if w != 0.0 {
                for p in 0..dim {
                    tb[(a * dim + p, i * dim + p)] = w;
                }
            }
        }
    }
    let kf = tb.transpose() * k * &tb;
    let ff = tb.transpose() * nalgebra::DVector::from_column_slice(f);
    Local {
        nodes,
        k: kf,
        f: ff.as_slice().to_vec(),
    }
}

/// Stiffness of a unit cell; an edge-`h` cell scales it by `h^(dim−2)`.
fn reference_stiffness(dim: usize, material: &Material) -> DMatrix<f64> {
    let nc = 1usize << dim;
    let n = nc * dim;
    let mut k = DMatrix::<f64>::zeros(n, n);
    for (t, w) in unit_cube_rule(2, dim) {
        let s = shape(dim, &t, 1.0);
        for a in 0..nc {
            for b in 0..nc {
                let ga = &s.grad[a];
                let gb = &s.grad[b];
                let dot = ga.dot(gb);
                for p in 0..dim {
                    for q in 0..dim {
                        let mut v = material.lambda * ga[p] * gb[q] + material.mu * ga[q] * gb[p];
                        if p == q {
                            v += material.mu * dot;
                        }
                        k[(a * dim + p, b * dim + q)] += w * v;
                    }
                }
            }
        }
    }
    k
}

/// Traction component `p` of `σ(N e_q)·n`.
#[inline]
fn traction(material: &Material, grad: &Point, n: &Point, p: usize, q: usize) -> f64 {
    let mut v = material.lambda * n[p] * grad[q] + material.mu * n[q] * grad[p];
    if p == q {
        v += material.mu * grad.dot(n);
    }
    v
}

impl GlobalSystem {
    /// Zero system with the block sparsity of the mesh's element couplings.
    pub fn with_pattern(mesh: &SurrogateMesh) -> Self {
        let dim = mesh.dim();
        let nf = mesh.nodes.free_count();
        let mut adjacency: Vec<Vec<usize>> = vec![Vec::new(); nf];
        for leaf in mesh.active_leaves() {
            let mut free: Vec<usize> = mesh
                .nodes
                .corners(leaf)
                .iter()
                .flat_map(|&n| mesh.nodes.expansion[n].iter().map(|e| e.0))
                .collect();
            free.sort_unstable();
            free.dedup();
            for &i in &free {
                adjacency[i].extend_from_slice(&free);
            }
        }
        let mut rows = Vec::with_capacity(nf * dim);
        for adj in &mut adjacency {
            adj.sort_unstable();
            adj.dedup();
            let cols: Vec<usize> = adj.iter().flat_map(|&j| (0..dim).map(move |q| j * dim + q)).collect();
            for _ in 0..dim {
                rows.push(cols.clone());
            }
        }
        GlobalSystem {
            dim,
            matrix: CsrMatrix::from_pattern(nf * dim, rows),
            rhs: vec![0.0; nf * dim],
        }
    }

    pub fn size(&self) -> usize {
        self.rhs.len()
    }

    fn scatter(&mut self, local: &Local) {
        let dim = self.dim;
        for (i, &ni) in local.nodes.iter().enumerate() {
            for p in 0..dim {
                let row = ni * dim + p;
                self.rhs[row] += local.f[i * dim + p];
                for (j, &nj) in local.nodes.iter().enumerate() {
                    let start = self
                        .matrix
                        .position(row, nj * dim)
                        .expect("coupling missing from sparsity pattern");
                    for q in 0..dim {
                        self.matrix.values[start + q] += local.k[(i * dim + p, j * dim + q)];
                    }
                }
            }
        }
    }

    fn accumulate<T: Sync>(&mut self, items: &[T], compute: impl Fn(&T) -> Result<Option<Local>, FemError> + Sync) -> Result<(), FemError> {
        use rayon::prelude::*;
        for chunk in items.chunks(CHUNK) {
            let locals: Vec<Result<Option<Local>, FemError>> = chunk.par_iter().map(&compute).collect();
            for l in locals {
                if let Some(l) = l? {
                    self.scatter(&l);
                }
            }
        }
        Ok(())
    }

    /// Adds `(∇w, σ(u))` over every active leaf and the load `(w, f)`.
    pub fn add_volume(
        &mut self,
        mesh: &SurrogateMesh,
        material: &Material,
        body_force: Option<&(dyn Fn(&Point) -> Point + Send + Sync)>,
        load_order: usize,
    ) -> Result<(), FemError> {
        let dim = mesh.dim();
        let nc = 1usize << dim;
        let kref = reference_stiffness(dim, material);
        let rule = unit_cube_rule(load_order, dim);
        let leaves: Vec<usize> = mesh.active_leaves().collect();
        self.accumulate(&leaves, |&leaf| {
            let h = mesh.octree.cell_size(leaf);
            let k = &kref * h.powi(dim as i32 - 2);
            let mut f = vec![0.0; nc * dim];
            if let Some(bf) = body_force {
                let min = mesh.octree.cell_min(leaf);
                let vol = h.powi(dim as i32);
                for (t, w) in &rule {
                    let s = shape(dim, t, h);
                    let fx = bf(&(min + t * h));
                    for a in 0..nc {
                        for p in 0..dim {
                            f[a * dim + p] += w * vol * s.n[a] * fx[p];
                        }
                    }
                }
            }
            Ok(Some(condense(mesh, leaf, &k, &f)))
        })
    }

    /// Adds the shifted Nitsche terms on surrogate faces selected by `dirichlet`.
    pub fn add_sbm_faces(
        &mut self,
        mesh: &SurrogateMesh,
        material: &Material,
        dirichlet: &DirichletSpec,
        opts: &AssemblyOptions,
    ) -> Result<(), FemError> {
        if !(opts.gamma > 0.0) {
            return Err(FemError::InvalidOption(format!("penalty gamma must be positive, got {}", opts.gamma)));
        }
        let dim = mesh.dim();
        let nc = 1usize << dim;
        let indices: Vec<usize> = (0..mesh.faces.len()).collect();
        self.accumulate(&indices, |&fi| {
            let face = &mesh.faces[fi];
            let leaf = face.owner;
            let h = face.owner_size;
            let min = mesh.octree.cell_min(leaf);
            let pen = opts.gamma / h;
            let n = face.normal;
            let mut k = DMatrix::<f64>::zeros(nc * dim, nc * dim);
            let mut f = vec![0.0; nc * dim];
            let mut any = false;
            for gp in &face.gauss {
                if !dirichlet.applies(face, gp) {
                    continue;
                }
                any = true;
                let d = gp.d.ok_or(FemError::MissingDistanceVector { face: fi })?;
                let t = (gp.x - min) / h;
                let s: ShapeEval = shape(dim, &t, h);
                let shifted: Vec<f64> = (0..nc).map(|b| s.n[b] + s.grad[b].dot(&d)).collect();
                let g = (dirichlet.g)(&(gp.x + d));
                let w = gp.weight;
                for a in 0..nc {
                    let test_pen = match opts.variant {
                        NitscheVariant::AsPrinted => s.n[a],
                        NitscheVariant::Symmetrized => shifted[a],
                    };
                    let adj_sign = match opts.variant {
                        NitscheVariant::AsPrinted => 1.0,
                        NitscheVariant::Symmetrized => -1.0,
                    };
                    for p in 0..dim {
                        let row = a * dim + p;
                        for b in 0..nc {
                            for q in 0..dim {
                                let mut v = -s.n[a] * traction(material, &s.grad[b], &n, p, q);
                                v += adj_sign * traction(material, &s.grad[a], &n, q, p) * shifted[b];
                                if p == q {
                                    v += pen * test_pen * shifted[b];
                                }
                                k[(row, b * dim + q)] += w * v;
                            }
                        }
                        let mut r = pen * test_pen * g[p];
                        for i in 0..dim {
                            r += adj_sign * traction(material, &s.grad[a], &n, i, p) * g[i];
                        }
                        f[row] += w * r;
                    }
                }
            }
            Ok(any.then(|| condense(mesh, leaf, &k, &f)))
        })
    }

    /// Eliminates prescribed DOFs: their columns move to the right-hand side
    /// and their rows become identity rows. Structural zeros are dropped.
    pub fn apply_strong_dirichlet(&self, prescribed: &[(usize, f64)]) -> GlobalSystem {
        let n = self.size();
        let mut fixed: Vec<Option<f64>> = vec![None; n];
        for &(dof, v) in prescribed {
            fixed[dof] = Some(v);
        }
        let mut rhs = self.rhs.clone();
        let mut rows: Vec<Vec<usize>> = Vec::with_capacity(n);
        let mut vals: Vec<f64> = Vec::with_capacity(self.matrix.nnz());
        for (i, fi) in fixed.iter().enumerate() {
            if let Some(v) = fi {
                rows.push(vec![i]);
                vals.push(1.0);
                rhs[i] = *v;
                continue;
            }
            let (cols, values) = self.matrix.row(i);
            let mut keep = Vec::with_capacity(cols.len());
            for (&c, &a) in cols.iter().zip(values) {
                match fixed[c] {
                    Some(v) => rhs[i] -= a * v,
                    None if a != 0.0 || c == i => {
                        keep.push(c);
                        vals.push(a);
                    }
                    None => {}
                }
            }
            rows.push(keep);
        }
        let mut matrix = CsrMatrix::from_pattern(n, rows);
        matrix.values = vals;
        GlobalSystem {
            dim: self.dim,
            matrix,
            rhs,
        }
    }
}

/// Volume terms plus SBM faces in one call.
pub fn assemble(
    mesh: &SurrogateMesh,
    material: &Material,
    body_force: Option<&(dyn Fn(&Point) -> Point + Send + Sync)>,
    dirichlet: Option<&DirichletSpec>,
    opts: &AssemblyOptions,
) -> Result<GlobalSystem, FemError> {
    let mut sys = GlobalSystem::with_pattern(mesh);
    sys.add_volume(mesh, material, body_force, opts.load_order)?;
    if let Some(d) = dirichlet {
        sys.add_sbm_faces(mesh, material, d, opts)?;
    }
    Ok(sys)
}
