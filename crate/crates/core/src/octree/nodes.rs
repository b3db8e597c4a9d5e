use std::collections::HashMap;

use crate::geometry::Point;

use super::{IncompleteOctree, LeafKey};

/// Corner vertices of the active leaves, with hanging nodes expressed
/// through the free nodes of coarser neighbors.
#[derive(Debug, Clone)]
pub struct NodeTable {
    pub dim: usize,
    /// Finest-grid coordinates, sorted by (z, y, x).
    pub grid: Vec<[u32; 3]>,
    pub positions: Vec<Point>,
    /// Index into the free-node numbering, `None` for hanging nodes.
    pub free_index: Vec<Option<usize>>,
    /// Node ids of the free nodes in numbering order.
    pub free_nodes: Vec<usize>,
    /// Per node: `(free index, weight)` pairs reproducing its value.
    pub expansion: Vec<Vec<(usize, f64)>>,
    /// Per leaf: node ids of its `2^dim` corners, `None` for inactive leaves.
    pub leaf_nodes: Vec<Option<[usize; 8]>>,
}

impl NodeTable {
    pub fn build(octree: &IncompleteOctree, active: &[bool]) -> NodeTable {
        let dim = octree.dim();
        let m = octree.max_level();
        let nc = 1usize << dim;
        let mut grid: Vec<[u32; 3]> = Vec::new();
        for (i, key) in octree.leaves().iter().enumerate() {
            if active[i] {
                grid.extend((0..nc).map(|c| key.corner(c, dim, m)));
            }
        }
        grid.sort_by_key(|p| (p[2], p[1], p[0]));
        grid.dedup();
        let id: HashMap<[u32; 3], usize> = grid.iter().enumerate().map(|(i, p)| (*p, i)).collect();

        let leaf_nodes: Vec<Option<[usize; 8]>> = octree
            .leaves()
            .iter()
            .enumerate()
            .map(|(i, key)| {
                active[i].then(|| {
                    let mut ids = [usize::MAX; 8];
                    for (c, slot) in ids.iter_mut().enumerate().take(nc) {
                        *slot = id[&key.corner(c, dim, m)];
                    }
                    ids
                })
            })
            .collect();

        // direct masters: (node id, weight) on the coarsest active leaf touching the node
        let limit = 1u64 << m;
        let direct: Vec<Option<Vec<(usize, f64)>>> = grid
            .iter()
            .map(|p| {
                let mut coarsest: Option<LeafKey> = None;
                for orthant in 0..nc {
                    let mut q = *p;
                    let mut inside = true;
                    for k in 0..dim {
                        if orthant >> k & 1 == 0 {
                            if q[k] == 0 {
                                inside = false;
                            } else {
                                q[k] -= 1;
                            }
                        } else if q[k] as u64 >= limit {
                            inside = false;
                        }
                    }
                    if !inside {
                        continue;
                    }
                    if let Some(j) = octree.leaf_at(q).filter(|&j| active[j]) {
                        let key = octree.leaves()[j];
                        if coarsest.map_or(true, |c| key.level < c.level) {
                            coarsest = Some(key);
                        }
                    }
                }
                let key = coarsest.expect("every node touches an active leaf");
                let span = key.span(m) as f64;
                let t: Vec<f64> = (0..dim)
                    .map(|k| (p[k] - key.anchor[k]) as f64 / span)
                    .collect();
                if t.iter().all(|&t| t == 0.0 || t == 1.0) {
                    return None;
                }
                let masters = (0..nc)
                    .filter_map(|c| {
                        let w: f64 = (0..dim)
                            .map(|k| if c >> k & 1 == 1 { t[k] } else { 1.0 - t[k] })
                            .product();
                        (w != 0.0).then(|| (id[&key.corner(c, dim, m)], w))
                    })
                    .collect();
                Some(masters)
            })
            .collect();

        let mut free_index = vec![None; grid.len()];
        let mut free_nodes = Vec::new();
        for (n, d) in direct.iter().enumerate() {
            if d.is_none() {
                free_index[n] = Some(free_nodes.len());
                free_nodes.push(n);
            }
        }

        let mut expansion: Vec<Option<Vec<(usize, f64)>>> = vec![None; grid.len()];
        for n in 0..grid.len() {
            resolve(n, &direct, &free_index, &mut expansion);
        }
        let expansion = expansion.into_iter().map(|e| e.unwrap()).collect();
        let positions = grid.iter().map(|g| octree.domain.point(*g)).collect();
        NodeTable {
            dim,
            grid,
            positions,
            free_index,
            free_nodes,
            expansion,
            leaf_nodes,
        }
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn free_count(&self) -> usize {
        self.free_nodes.len()
    }

    pub fn hanging_count(&self) -> usize {
        self.len() - self.free_count()
    }

    pub fn is_hanging(&self, node: usize) -> bool {
        self.free_index[node].is_none()
    }

    pub fn corners(&self, leaf: usize) -> &[usize] {
        let nc = 1usize << self.dim;
        &self.leaf_nodes[leaf]
            .as_ref()
            .expect("leaf is not part of the surrogate domain")[..nc]
    }

    /// Node value from free-node values (`values[free * stride + comp]`).
    pub fn node_value(&self, node: usize, values: &[f64], stride: usize, comp: usize) -> f64 {
        self.expansion[node]
            .iter()
            .map(|&(f, w)| w * values[f * stride + comp])
            .sum()
    }
}

fn resolve(
    n: usize,
    direct: &[Option<Vec<(usize, f64)>>],
    free_index: &[Option<usize>],
    memo: &mut Vec<Option<Vec<(usize, f64)>>>,
) {
    if memo[n].is_some() {
        return;
    }
    let out = match &direct[n] {
        None => vec![(free_index[n].unwrap(), 1.0)],
        Some(masters) => {
            let mut acc: Vec<(usize, f64)> = Vec::new();
            for &(mn, w) in masters {
                resolve(mn, direct, free_index, memo);
                for &(f, v) in memo[mn].as_ref().unwrap() {
                    acc.push((f, w * v));
                }
            }
            acc.sort_by_key(|e| e.0);
            let mut merged: Vec<(usize, f64)> = Vec::with_capacity(acc.len());
            for (f, v) in acc {
                match merged.last_mut() {
                    Some(last) if last.0 == f => last.1 += v,
                    _ => merged.push((f, v)),
                }
            }
            merged
        }
    };
    memo[n] = Some(out);
}
