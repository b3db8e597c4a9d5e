mod common;

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sbm_core::geometry::{Annulus2d, ImplicitGeometry, Point, Sphere};
use sbm_core::inr::GradientCache;
use sbm_core::octree::{
    build_octree, classify_elements, extract_surrogate_boundary, mesh_geometry, Domain,
    ElementMarker, IncompleteOctree, LeafKey, MeshConfig, NodeTable, OctreeError, MAX_LEVEL_2D,
};

use common::{balance_violations, cell_index, dense_grid, leaves_disjoint, random_points};

fn ring() -> (Annulus2d, Domain) {
    (
        Annulus2d::new(Point::new(1.0, 1.0, 0.0), 0.25, 1.0).unwrap(),
        Domain::new(2, Point::zeros(), 2.0),
    )
}

#[test]
fn uniform_sphere_retention_matches_point_sampling() {
    let sphere = Sphere::new(Point::zeros(), 0.6).unwrap();
    let dom = Domain::canonical(3);
    let tree = build_octree(&sphere, dom, &MeshConfig::new(2, 2)).unwrap();
    let oracle = dense_grid(&sphere, &dom, 2);
    let got: BTreeSet<Vec<usize>> = tree.leaves().iter().map(|k| cell_index(&tree, k)).collect();
    assert_eq!(got, oracle.retained);
    assert!(tree.leaves().iter().all(|k| k.level == 2));
    assert!(tree.is_balanced());
}

#[test]
fn disk_level4_matches_dense_grid() {
    let disk = Sphere::disk(Point::new(0.05, -0.1, 0.0), 0.63).unwrap();
    let dom = Domain::canonical(2);
    let tree = build_octree(&disk, dom, &MeshConfig::new(4, 4)).unwrap();
    let markers = classify_elements(&tree, &disk, 1.0, 2);
    let active: Vec<bool> = markers.iter().map(|m| m.is_active()).collect();
    let faces = extract_surrogate_boundary(&tree, &active, 2);
    let oracle = dense_grid(&disk, &dom, 4);

    let got: BTreeSet<Vec<usize>> = tree.leaves().iter().map(|k| cell_index(&tree, k)).collect();
    assert_eq!(got, oracle.retained);
    for (i, k) in tree.leaves().iter().enumerate() {
        assert_eq!(markers[i], oracle.markers[&cell_index(&tree, k)]);
    }
    let got_faces: BTreeSet<_> = faces
        .iter()
        .map(|f| (cell_index(&tree, &tree.leaves()[f.owner]), f.axis, f.positive))
        .collect();
    assert_eq!(got_faces.len(), faces.len());
    assert_eq!(got_faces, oracle.faces);
}

#[test]
fn annulus_refines_both_circles() {
    let (ring, dom) = ring();
    let tree = build_octree(&ring, dom, &MeshConfig::new(5, 7)).unwrap();
    assert!(leaves_disjoint(&tree));
    assert!(tree.is_balanced());
    let diag5 = dom.cell_diagonal(5);
    let mut bulk = 0;
    for (i, k) in tree.leaves().iter().enumerate() {
        assert!((5..=7).contains(&k.level));
        let h = tree.cell_size(i);
        let f = ring.signed_distance(&dom.cell_center(k));
        if f.abs() < 0.5 * h {
            assert_eq!(k.level, 7, "leaf {k:?} crosses a circle");
        }
        if f < -3.0 * diag5 {
            assert_eq!(k.level, 5, "bulk leaf {k:?} over-refined");
            bulk += 1;
        }
    }
    assert!(bulk > 100);
}

#[test]
fn base_equals_boundary_gives_single_level() {
    let (ring, dom) = ring();
    let tree = build_octree(&ring, dom, &MeshConfig::new(4, 4)).unwrap();
    assert!(tree.leaves().iter().all(|k| k.level == 4));
}

#[test]
fn geometry_outside_domain_is_empty() {
    let far = Sphere::disk(Point::new(5.0, 5.0, 0.0), 0.5).unwrap();
    let err = build_octree(&far, Domain::canonical(2), &MeshConfig::new(2, 3)).unwrap_err();
    assert!(matches!(err, OctreeError::EmptyDomain));
}

#[test]
fn config_rejects_bad_levels() {
    assert!(MeshConfig::new(5, 4).validate(2).is_err());
    assert!(MeshConfig::new(2, 15).validate(3).is_err());
    assert!(MeshConfig::new(2, 15).validate(2).is_ok());
    let mut cfg = MeshConfig::new(2, 3);
    cfg.lambda_criteria = 0.0;
    assert!(cfg.validate(2).is_err());
}

fn random_tree(seed: u64, dim: usize, depth: u8) -> IncompleteOctree {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dom = Domain::canonical(dim);
    let m = dom.max_level();
    let mut leaves = vec![LeafKey::root()];
    for _ in 0..40 {
        let i = rng.gen_range(0..leaves.len());
        if leaves[i].level < depth {
            let k = leaves.swap_remove(i);
            leaves.extend(k.children(dim, m));
        }
    }
    IncompleteOctree::from_leaves(dom, 0, depth, leaves)
}

#[test]
fn balance_random_patterns() {
    for seed in 0..12 {
        let dim = if seed % 2 == 0 { 2 } else { 3 };
        let raw = random_tree(seed, dim, 6);
        let balanced = raw.balance_2to1();
        assert!(balance_violations(&balanced).is_empty(), "seed {seed}");
        assert!(leaves_disjoint(&balanced));
        // refinement only: every original leaf is covered by balanced leaves
        let m = raw.max_level();
        for k in raw.leaves() {
            assert!(balanced.leaves().iter().any(|b| k.contains_key(b, m) || b == k));
        }
        let vol = |t: &IncompleteOctree| (0..t.len()).map(|i| t.volume(i)).sum::<f64>();
        assert!((vol(&raw) - vol(&balanced)).abs() < 1e-12);
        let again = balanced.balance_2to1();
        assert_eq!(again.leaves(), balanced.leaves(), "idempotent");
    }
}

#[test]
fn balance_splits_coarse_neighbor_once_per_level() {
    let dom = Domain::canonical(2);
    let m = MAX_LEVEL_2D;
    // a level-3 leaf next to a level-5 leaf along +x
    let coarse = LeafKey {
        level: 3,
        anchor: [0, 0, 0],
    };
    let mut leaves = vec![coarse];
    let right = coarse.neighbor(0, true, m).unwrap();
    let mut fine_parent = right;
    while fine_parent.level < 4 {
        fine_parent = fine_parent.children(2, m)[0];
    }
    leaves.extend(fine_parent.children(2, m));
    let tree = IncompleteOctree::from_leaves(dom, 3, 5, leaves).balance_2to1();
    assert!(balance_violations(&tree).is_empty());
    assert!(tree.leaf_index(&coarse).is_none());
    let touching: Vec<&LeafKey> = tree
        .leaves()
        .iter()
        .filter(|k| coarse.contains_key(k, m) && k.anchor[0] + k.span(m) == right.anchor[0] && k.anchor[1] == 0)
        .collect();
    assert_eq!(touching.len(), 1);
    assert_eq!(touching[0].level, 4);
    let already = tree.balance_2to1();
    assert_eq!(already.leaves(), tree.leaves());
}

#[test]
fn surrogate_boundary_is_watertight() {
    let cache = GradientCache::new();
    let sphere = Sphere::new(Point::new(0.02, -0.03, 0.01), 0.61).unwrap();
    let mesh = mesh_geometry(&sphere, Domain::canonical(3), &MeshConfig::new(2, 4), &cache).unwrap();
    let (ring, dom) = ring();
    let mesh2 = mesh_geometry(&ring, dom, &MeshConfig::new(3, 6), &cache).unwrap();
    for m in [&mesh, &mesh2] {
        let dim = m.dim();
        let total: Point = m.faces.iter().map(|f| f.normal * f.area(dim)).sum();
        assert!(total.norm() < 1e-12, "{total:?}");
        for f in &m.faces {
            let wsum: f64 = f.gauss.iter().map(|g| g.weight).sum();
            assert!((wsum - f.area(dim)).abs() < 1e-14);
            assert!(m.markers[f.owner].is_active());
        }
        assert!(m.octree.is_balanced());
        assert!(balance_violations(&m.octree).is_empty());
    }
}

#[test]
fn single_leaf_has_all_faces() {
    let dom = Domain::canonical(3);
    let key = LeafKey {
        level: 3,
        anchor: [3 << 11, 2 << 11, 5 << 11],
    };
    let tree = IncompleteOctree::from_leaves(dom, 3, 3, vec![key]);
    let faces = extract_surrogate_boundary(&tree, &[true], 2);
    assert_eq!(faces.len(), 6);
    let normals: BTreeSet<(usize, bool)> = faces.iter().map(|f| (f.axis, f.positive)).collect();
    assert_eq!(normals.len(), 6);
    for f in &faces {
        assert_eq!(f.normal.norm(), 1.0);
        assert_eq!(f.gauss.len(), 4);
    }
}

#[test]
fn lambda_one_never_marks_false_intercepted() {
    let cache = GradientCache::new();
    let (ring, dom) = ring();
    let mesh = mesh_geometry(&ring, dom, &MeshConfig::new(3, 5), &cache).unwrap();
    assert!(!mesh.markers.contains(&ElementMarker::FalseIntercepted));
    assert!(mesh.markers.contains(&ElementMarker::TrueIntercepted));
    let mut cfg = MeshConfig::new(3, 5);
    cfg.lambda_criteria = 0.5;
    let relaxed = mesh_geometry(&ring, dom, &cfg, &cache).unwrap();
    assert!(relaxed.markers.contains(&ElementMarker::FalseIntercepted));
    assert_eq!(relaxed.octree.leaves(), mesh.octree.leaves());
}

#[test]
fn raising_boundary_level_keeps_interior() {
    let cache = GradientCache::new();
    let (ring, dom) = ring();
    let mut prev_volume = None;
    for top in 4..=6u8 {
        let coarse = mesh_geometry(&ring, dom, &MeshConfig::new(3, top), &cache).unwrap();
        let fine = mesh_geometry(&ring, dom, &MeshConfig::new(3, top + 1), &cache).unwrap();
        for i in 0..coarse.octree.len() {
            if coarse.markers[i] == ElementMarker::Interior {
                let k = coarse.octree.leaves()[i];
                let h = coarse.octree.cell_size(i);
                let min = coarse.octree.cell_min(i);
                for t in [0.1, 0.5, 0.9] {
                    for s in [0.1, 0.5, 0.9] {
                        let p = min + Point::new(t * h, s * h, 0.0);
                        assert!(fine.element_containing(&p).is_some(), "lost {k:?} at level {top}");
                    }
                }
            }
        }
        let vol = |m: &sbm_core::octree::SurrogateMesh| {
            m.active_leaves().map(|i| m.octree.volume(i)).sum::<f64>()
        };
        // the change is bounded by a one-cell shell around both circles
        let shell = 2.0 * std::f64::consts::PI * 1.25 * 2.0 * dom.cell_size(top);
        assert!((vol(&coarse) - vol(&fine)).abs() < shell);
        prev_volume = Some(vol(&fine));
    }
    assert!(prev_volume.unwrap() > 0.0);
}

/// Bilinear/trilinear interpolation of per-node values inside one leaf.
fn eval_in_leaf(mesh: &sbm_core::octree::SurrogateMesh, leaf: usize, values: &[f64], p: &Point) -> f64 {
    let dim = mesh.dim();
    let min = mesh.octree.cell_min(leaf);
    let h = mesh.octree.cell_size(leaf);
    let corners = mesh.nodes.corners(leaf);
    let mut total = 0.0;
    for (c, &n) in corners.iter().enumerate() {
        let mut w = 1.0;
        for k in 0..dim {
            let t = (p[k] - min[k]) / h;
            w *= if c >> k & 1 == 1 { t } else { 1.0 - t };
        }
        total += w * mesh.nodes.node_value(n, values, 1, 0);
    }
    total
}

fn interface_jumps(mesh: &sbm_core::octree::SurrogateMesh, values: &[f64], samples: usize, seed: u64) -> (usize, f64) {
    let dim = mesh.dim();
    let m = mesh.octree.max_level();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    let transitions: Vec<(usize, usize, bool)> = mesh
        .active_leaves()
        .flat_map(|i| (0..dim).flat_map(move |a| [(i, a, false), (i, a, true)]))
        .filter(|&(i, a, pos)| {
            let k = mesh.octree.leaves()[i];
            k.neighbor(a, pos, m).map_or(false, |n| {
                matches!(mesh.octree.locate(&n), sbm_core::octree::Location::Leaf(j)
                    if mesh.markers[j].is_active() && mesh.octree.leaves()[j].level < k.level)
            })
        })
        .collect();
    assert!(!transitions.is_empty());
    while checked < samples {
        let (i, axis, pos) = transitions[rng.gen_range(0..transitions.len())];
        let h = mesh.octree.cell_size(i);
        let mut p = mesh.octree.cell_min(i);
        for k in 0..dim {
            p[k] += if k == axis {
                if pos { h } else { 0.0 }
            } else {
                rng.gen_range(0.0..1.0) * h
            };
        }
        let mut q = p;
        q[axis] += if pos { 1e-3 * h } else { -1e-3 * h };
        let j = mesh.element_containing(&q).unwrap();
        let jump = (eval_in_leaf(mesh, i, values, &p) - eval_in_leaf(mesh, j, values, &p)).abs();
        worst = worst.max(jump);
        checked += 1;
    }
    (checked, worst)
}

#[test]
fn hanging_constraints_keep_fields_continuous() {
    let cache = GradientCache::new();
    let (ring, dom) = ring();
    let mesh2 = mesh_geometry(&ring, dom, &MeshConfig::new(3, 6), &cache).unwrap();
    let sphere = Sphere::new(Point::zeros(), 0.8).unwrap();
    let mesh3 = mesh_geometry(&sphere, Domain::canonical(3), &MeshConfig::new(2, 5), &cache).unwrap();
    for mesh in [&mesh2, &mesh3] {
        let nodes: &NodeTable = &mesh.nodes;
        assert!(nodes.hanging_count() > 0);
        // hanging nodes sit mid-edge/mid-face: weights are 1/2 or 1/4 and sum to one
        for n in 0..nodes.len() {
            let s: f64 = nodes.expansion[n].iter().map(|e| e.1).sum();
            assert!((s - 1.0).abs() < 1e-14);
        }
        let linear: Vec<f64> = nodes
            .free_nodes
            .iter()
            .map(|&n| {
                let p = nodes.positions[n];
                0.3 + 1.7 * p.x - 0.4 * p.y + 0.9 * p.z
            })
            .collect();
        let (count, jump) = interface_jumps(mesh, &linear, 100, 1);
        assert_eq!(count, 100);
        assert!(jump <= 1e-12, "linear jump {jump}");
        for n in 0..nodes.len() {
            let p = nodes.positions[n];
            let v = nodes.node_value(n, &linear, 1, 0);
            assert!((v - (0.3 + 1.7 * p.x - 0.4 * p.y + 0.9 * p.z)).abs() < 1e-12);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let noise: Vec<f64> = (0..nodes.free_count()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (_, jump) = interface_jumps(mesh, &noise, 100, 2);
        assert!(jump <= 1e-12, "arbitrary-field jump {jump}");
    }
}

#[test]
fn distance_vectors_on_sphere_faces() {
    let cache = GradientCache::new();
    let sphere = Sphere::new(Point::zeros(), 0.6).unwrap();
    let mesh = mesh_geometry(&sphere, Domain::canonical(3), &MeshConfig::new(3, 4), &cache).unwrap();
    assert_eq!(mesh.flagged_faces, 0);
    for f in &mesh.faces {
        for g in &f.gauss {
            let d = g.d.unwrap();
            let r = g.x.norm();
            let exact = -g.x * (r - 0.6) / r;
            assert!((d - exact).norm() < 1e-12);
            assert!(d.norm() <= 3f64.sqrt() * f.owner_size * 2.0);
        }
    }
    let cached = cache.len();
    let again = mesh_geometry(&sphere, Domain::canonical(3), &MeshConfig::new(3, 4), &cache).unwrap();
    assert_eq!(cache.len(), cached);
    assert!(cache.hits() >= again.faces.iter().map(|f| f.gauss.len() as u64).sum());
}

#[test]
fn dump_lists_leaves_in_morton_order() {
    let cache = GradientCache::new();
    let disk = Sphere::disk(Point::zeros(), 0.5).unwrap();
    let mesh = mesh_geometry(&disk, Domain::canonical(2), &MeshConfig::new(2, 3), &cache).unwrap();
    let text = mesh.dump();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), mesh.octree.len());
    let mut prev: Option<LeafKey> = None;
    for line in lines {
        let parts: Vec<&str> = line.split_whitespace().collect();
        assert_eq!(parts.len(), 4);
        let key = LeafKey {
            level: parts[0].parse().unwrap(),
            anchor: [parts[1].parse().unwrap(), parts[2].parse().unwrap(), 0],
        };
        assert!(["interior", "exterior", "true_intercepted", "false_intercepted"].contains(&parts[3]));
        if let Some(p) = prev {
            assert!(p < key);
        }
        prev = Some(key);
    }
    let pts = random_points(3, 50, &Point::new(-0.4, -0.4, 0.0), &Point::new(0.4, 0.4, 0.0), 2);
    for p in pts {
        if disk.signed_distance(&p) < -0.2 {
            assert!(mesh.element_containing(&p).is_some());
        }
    }
}

