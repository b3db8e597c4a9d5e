//! Brute-force oracles shared by the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use sbm_core::geometry::{ImplicitGeometry, Point};
use sbm_core::octree::{Domain, ElementMarker, IncompleteOctree, LeafKey};
use sbm_core::quadrature::unit_cube_rule;

/// Uniform-grid reference for a single-level mesh: which cells survive, how
/// they are marked, and which of their faces border the outside.
pub struct DenseGrid {
    pub n: usize,
    pub dim: usize,
    pub retained: BTreeSet<Vec<usize>>,
    pub markers: BTreeMap<Vec<usize>, ElementMarker>,
    /// (cell, axis, positive)
    pub faces: BTreeSet<(Vec<usize>, usize, bool)>,
}

fn cells(n: usize, dim: usize) -> Vec<Vec<usize>> {
    let total = n.pow(dim as u32);
    (0..total)
        .map(|mut i| {
            let mut c = Vec::with_capacity(dim);
            for _ in 0..dim {
                c.push(i % n);
                i /= n;
            }
            c
        })
        .collect()
}

pub fn dense_grid<G: ImplicitGeometry>(geom: &G, domain: &Domain, level: u8) -> DenseGrid {
    let dim = domain.dim;
    let n = 1usize << level;
    let h = domain.cell_size(level);
    let gauss = unit_cube_rule(2, dim);
    let mut retained = BTreeSet::new();
    let mut markers = BTreeMap::new();
    for c in cells(n, dim) {
        let mut min = domain.origin;
        for k in 0..dim {
            min[k] += c[k] as f64 * h;
        }
        let mut any_inside = false;
        for corner in 0..1usize << dim {
            let mut p = min;
            for k in 0..dim {
                if corner >> k & 1 == 1 {
                    p[k] += h;
                }
            }
            any_inside |= geom.signed_distance(&p) < 0.0;
        }
        let count = gauss
            .iter()
            .filter(|(t, _)| geom.signed_distance(&(min + t * h)) < 0.0)
            .count();
        if any_inside || count > 0 {
            retained.insert(c.clone());
            let m = if count == 0 {
                ElementMarker::Exterior
            } else if count == gauss.len() {
                ElementMarker::Interior
            } else {
                ElementMarker::TrueIntercepted
            };
            markers.insert(c, m);
        }
    }
    let active = |c: &Vec<usize>| markers.get(c).map_or(false, |m| m.is_active());
    let mut faces = BTreeSet::new();
    for c in markers.keys().filter(|c| active(c)) {
        for axis in 0..dim {
            for positive in [false, true] {
                let mut nb = c.clone();
                let outside = if positive {
                    nb[axis] += 1;
                    nb[axis] == n
                } else if nb[axis] == 0 {
                    true
                } else {
                    nb[axis] -= 1;
                    false
                };
                if outside || !active(&nb) {
                    faces.insert((c.clone(), axis, positive));
                }
            }
        }
    }
    DenseGrid {
        n,
        dim,
        retained,
        markers,
        faces,
    }
}

pub fn cell_index(octree: &IncompleteOctree, key: &LeafKey) -> Vec<usize> {
    let span = key.span(octree.max_level());
    (0..octree.dim()).map(|k| (key.anchor[k] / span) as usize).collect()
}

/// Face adjacency checked geometrically over all leaf pairs.
pub fn balance_violations(octree: &IncompleteOctree) -> Vec<(usize, usize)> {
    let dim = octree.dim();
    let m = octree.max_level();
    let leaves = octree.leaves();
    let mut bad = Vec::new();
    for i in 0..leaves.len() {
        for j in i + 1..leaves.len() {
            let (a, b) = (&leaves[i], &leaves[j]);
            let (sa, sb) = (a.span(m) as i64, b.span(m) as i64);
            let mut touching_axes = 0;
            let mut overlapping = 0;
            for k in 0..dim {
                let (a0, a1) = (a.anchor[k] as i64, a.anchor[k] as i64 + sa);
                let (b0, b1) = (b.anchor[k] as i64, b.anchor[k] as i64 + sb);
                if a1 == b0 || b1 == a0 {
                    touching_axes += 1;
                } else if a0 < b1 && b0 < a1 {
                    overlapping += 1;
                }
            }
            if touching_axes == 1 && overlapping == dim - 1 && (a.level as i32 - b.level as i32).abs() > 1 {
                bad.push((i, j));
            }
        }
    }
    bad
}

pub fn leaves_disjoint(octree: &IncompleteOctree) -> bool {
    let m = octree.max_level();
    let leaves = octree.leaves();
    for i in 0..leaves.len() {
        for j in i + 1..leaves.len() {
            if leaves[i].contains_key(&leaves[j], m) || leaves[j].contains_key(&leaves[i], m) {
                return false;
            }
        }
    }
    true
}

pub fn random_points(seed: u64, n: usize, lo: &Point, hi: &Point, dim: usize) -> Vec<Point> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let mut p = Point::zeros();
            for k in 0..dim {
                p[k] = rng.gen_range(lo[k]..hi[k]);
            }
            p
        })
        .collect()
}
