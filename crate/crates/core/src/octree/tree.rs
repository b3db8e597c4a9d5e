use std::collections::{HashMap, HashSet};

use crate::geometry::{ImplicitGeometry, Point};
use crate::quadrature::unit_cube_rule;

use super::{Domain, LeafKey, MeshConfig, OctreeError};

/// Where a same-level region sits relative to the leaf set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Location {
    /// The region is (or lies inside) leaf `idx`.
    Leaf(usize),
    /// The region was refined; finer leaves or gaps live below it.
    Internal,
    /// The region was pruned.
    Absent,
}

/// Adaptive leaf set over a [`Domain`], Morton sorted.
#[derive(Debug, Clone)]
pub struct IncompleteOctree {
    pub domain: Domain,
    pub base_level: u8,
    pub boundary_level: u8,
    leaves: Vec<LeafKey>,
    index: HashMap<LeafKey, usize>,
    internal: HashSet<LeafKey>,
}

impl IncompleteOctree {
    /// Assembles a tree from an arbitrary disjoint leaf set; internal nodes
    /// are every proper ancestor of a leaf.
    pub fn from_leaves(
        domain: Domain,
        base_level: u8,
        boundary_level: u8,
        mut leaves: Vec<LeafKey>,
    ) -> Self {
        let m = domain.max_level();
        leaves.sort();
        leaves.dedup();
        let mut internal = HashSet::new();
        for leaf in &leaves {
            let mut k = *leaf;
            while let Some(p) = k.parent(m) {
                if !internal.insert(p) {
                    break;
                }
                k = p;
            }
        }
        let index = leaves.iter().enumerate().map(|(i, k)| (*k, i)).collect();
        IncompleteOctree {
            domain,
            base_level,
            boundary_level,
            leaves,
            index,
            internal,
        }
    }

    pub fn dim(&self) -> usize {
        self.domain.dim
    }

    pub fn max_level(&self) -> u8 {
        self.domain.max_level()
    }

    pub fn leaves(&self) -> &[LeafKey] {
        &self.leaves
    }

    pub fn len(&self) -> usize {
        self.leaves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.leaves.is_empty()
    }

    pub fn leaf_index(&self, key: &LeafKey) -> Option<usize> {
        self.index.get(key).copied()
    }

    pub fn is_internal(&self, key: &LeafKey) -> bool {
        self.internal.contains(key)
    }

    pub fn locate(&self, key: &LeafKey) -> Location {
        if let Some(i) = self.leaf_index(key) {
            return Location::Leaf(i);
        }
        if self.internal.contains(key) {
            return Location::Internal;
        }
        let m = self.max_level();
        let mut k = *key;
        while let Some(p) = k.parent(m) {
            if let Some(i) = self.leaf_index(&p) {
                return Location::Leaf(i);
            }
            k = p;
        }
        Location::Absent
    }

    /// Leaf containing the finest-grid cell at `grid`, if any.
    pub fn leaf_at(&self, grid: [u32; 3]) -> Option<usize> {
        let m = self.max_level();
        let finest = LeafKey {
            level: m,
            anchor: grid,
        };
        (0..=self.boundary_level.max(self.base_level))
            .rev()
            .find_map(|l| self.leaf_index(&finest.ancestor(l, m)))
    }

    pub fn leaf_containing(&self, p: &Point) -> Option<usize> {
        self.leaf_at(self.domain.locate_point(p))
    }

    pub fn cell_size(&self, leaf: usize) -> f64 {
        self.domain.cell_size(self.leaves[leaf].level)
    }

    pub fn cell_min(&self, leaf: usize) -> Point {
        self.domain.cell_min(&self.leaves[leaf])
    }

    pub fn volume(&self, leaf: usize) -> f64 {
        self.cell_size(leaf).powi(self.dim() as i32)
    }

    /// One line per leaf, `level ax ay [az] tag`.
    pub fn dump(&self, tag: impl Fn(usize) -> String) -> String {
        let mut out = String::new();
        for (i, k) in self.leaves.iter().enumerate() {
            out.push_str(&k.level.to_string());
            for a in &k.anchor[..self.dim()] {
                out.push(' ');
                out.push_str(&a.to_string());
            }
            out.push(' ');
            out.push_str(&tag(i));
            out.push('\n');
        }
        out
    }

    /// Splits leaves until face-adjacent leaves differ by at most one level.
    /// Children of a split leaf are all kept.
    pub fn balance_2to1(&self) -> IncompleteOctree {
        let dim = self.dim();
        let m = self.max_level();
        let mut leaves: HashSet<LeafKey> = self.leaves.iter().copied().collect();
        let mut internal = self.internal.clone();
        let mut work: Vec<LeafKey> = self.leaves.clone();
        // finest first so each split can only cascade toward coarser leaves
        work.sort_by(|a, b| a.level.cmp(&b.level).then(a.cmp(b)));
        while let Some(key) = work.pop() {
            if !leaves.contains(&key) || key.level < 2 {
                continue;
            }
            for axis in 0..dim {
                for positive in [false, true] {
                    let Some(n) = key.neighbor(axis, positive, m) else {
                        continue;
                    };
                    // coarsest leaf allowed next to `key` sits at level - 1
                    let probe = n.ancestor(key.level - 1, m);
                    let mut k = probe;
                    let mut coarse = None;
                    while let Some(p) = k.parent(m) {
                        if leaves.contains(&p) {
                            coarse = Some(p);
                            break;
                        }
                        // ancestors of an internal node are internal too
                        if internal.contains(&p) {
                            break;
                        }
                        k = p;
                    }
                    let Some(mut c) = coarse else { continue };
                    // refine the coarse leaf down to `probe`'s level along the path
                    while c.level < probe.level {
                        leaves.remove(&c);
                        internal.insert(c);
                        let next = probe.ancestor(c.level + 1, m);
                        for child in c.children(dim, m) {
                            leaves.insert(child);
                            if child != next {
                                work.push(child);
                            }
                        }
                        c = next;
                    }
                    work.push(c);
                }
            }
        }
        let mut out = IncompleteOctree::from_leaves(
            self.domain,
            self.base_level,
            self.boundary_level,
            leaves.into_iter().collect(),
        );
        out.internal.extend(internal);
        out
    }

    /// Exhaustive check used by tests and debug assertions.
    pub fn is_balanced(&self) -> bool {
        let m = self.max_level();
        self.leaves.iter().all(|k| {
            (0..self.dim()).all(|axis| {
                [false, true].iter().all(|&pos| match k.neighbor(axis, pos, m) {
                    None => true,
                    Some(n) => match self.locate(&n) {
                        Location::Leaf(j) => k.level <= self.leaves[j].level + 1,
                        _ => true,
                    },
                })
            })
        })
    }
}

struct CellSamples {
    inside_any: bool,
    outside_any: bool,
    near: bool,
}

fn sample_cell<G: ImplicitGeometry + ?Sized>(
    geom: &G,
    domain: &Domain,
    key: &LeafKey,
    rule: &[(Point, f64)],
) -> CellSamples {
    let dim = domain.dim;
    let m = domain.max_level();
    let h = domain.cell_size(key.level);
    let diag = domain.cell_diagonal(key.level);
    let min = domain.cell_min(key);
    let mut s = CellSamples {
        inside_any: false,
        outside_any: false,
        near: false,
    };
    let mut visit = |f: f64| {
        if f < 0.0 {
            s.inside_any = true;
        } else {
            s.outside_any = true;
        }
        if f.abs() < diag {
            s.near = true;
        }
    };
    for c in 0..1usize << dim {
        visit(geom.signed_distance(&domain.point(key.corner(c, dim, m))));
    }
    for (p, _) in rule {
        visit(geom.signed_distance(&(min + p * h)));
    }
    s
}

enum Decision {
    Prune,
    Keep,
    Split,
}

fn decide(s: &CellSamples, level: u8, cfg: &MeshConfig) -> Decision {
    if !s.inside_any && !s.near {
        return Decision::Prune;
    }
    if level < cfg.base_level {
        return Decision::Split;
    }
    if level < cfg.boundary_level {
        if (s.inside_any && s.outside_any) || s.near {
            Decision::Split
        } else {
            Decision::Keep
        }
    } else if s.inside_any {
        Decision::Keep
    } else {
        Decision::Prune
    }
}

/// Top-down construction followed by 2:1 balancing.
///
/// A cell whose samples (corners plus the per-axis Gauss points) are all
/// outside and farther than one cell diagonal from the surface is pruned;
/// otherwise it is split below the base level, split on a sign change or
/// surface proximity below the boundary level, and kept at the boundary
/// level only when some sample is inside.
pub fn build_octree<G: ImplicitGeometry + ?Sized>(
    geom: &G,
    domain: Domain,
    cfg: &MeshConfig,
) -> Result<IncompleteOctree, OctreeError> {
    use rayon::prelude::*;
    cfg.validate(domain.dim)?;
    if geom.dim() != domain.dim {
        return Err(OctreeError::InvalidConfig(format!(
            "geometry is {}D but the domain is {}D",
            geom.dim(),
            domain.dim
        )));
    }
    let dim = domain.dim;
    let m = domain.max_level();
    let rule = unit_cube_rule(cfg.sample_order, dim);
    let mut frontier = vec![LeafKey::root()];
    let mut leaves = Vec::new();
    while !frontier.is_empty() {
        let decisions: Vec<Decision> = frontier
            .par_iter()
            .map(|k| decide(&sample_cell(geom, &domain, k, &rule), k.level, cfg))
            .collect();
        let mut next = Vec::new();
        for (k, d) in frontier.iter().zip(decisions) {
            match d {
                Decision::Prune => {}
                Decision::Keep => leaves.push(*k),
                Decision::Split => next.extend(k.children(dim, m)),
            }
        }
        frontier = next;
    }
    if leaves.is_empty() {
        return Err(OctreeError::EmptyDomain);
    }
    let tree = IncompleteOctree::from_leaves(domain, cfg.base_level, cfg.boundary_level, leaves);
    Ok(tree.balance_2to1())
}
