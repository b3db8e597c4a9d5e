use std::fmt;

use crate::geometry::ImplicitGeometry;
use crate::quadrature::unit_cube_rule;

use super::IncompleteOctree;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ElementMarker {
    Interior,
    Exterior,
    TrueIntercepted,
    FalseIntercepted,
}

impl ElementMarker {
    /// Part of the surrogate domain.
    pub fn is_active(self) -> bool {
        self != ElementMarker::Exterior
    }

    pub fn code(self) -> u8 {
        match self {
            ElementMarker::Interior => 0,
            ElementMarker::Exterior => 1,
            ElementMarker::TrueIntercepted => 2,
            ElementMarker::FalseIntercepted => 3,
        }
    }

    pub fn from_count(count: usize, total: usize, lambda_criteria: f64) -> Self {
        if count == 0 {
            ElementMarker::Exterior
        } else if count == total {
            ElementMarker::Interior
        } else if count as f64 / total as f64 >= lambda_criteria {
            ElementMarker::FalseIntercepted
        } else {
            ElementMarker::TrueIntercepted
        }
    }
}

impl fmt::Display for ElementMarker {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ElementMarker::Interior => "interior",
            ElementMarker::Exterior => "exterior",
            ElementMarker::TrueIntercepted => "true_intercepted",
            ElementMarker::FalseIntercepted => "false_intercepted",
        })
    }
}

/// Fraction of a leaf's Gauss points with `f < 0`.
pub fn inside_fraction<G: ImplicitGeometry + ?Sized>(
    octree: &IncompleteOctree,
    geom: &G,
    leaf: usize,
    order: usize,
) -> (usize, usize) {
    let rule = unit_cube_rule(order, octree.dim());
    let min = octree.cell_min(leaf);
    let h = octree.cell_size(leaf);
    let count = rule
        .iter()
        .filter(|(p, _)| geom.signed_distance(&(min + p * h)) < 0.0)
        .count();
    (count, rule.len())
}

pub fn classify_elements<G: ImplicitGeometry + ?Sized>(
    octree: &IncompleteOctree,
    geom: &G,
    lambda_criteria: f64,
    order: usize,
) -> Vec<ElementMarker> {
    use rayon::prelude::*;
    (0..octree.len())
        .into_par_iter()
        .map(|i| {
            let (count, total) = inside_fraction(octree, geom, i, order);
            ElementMarker::from_count(count, total, lambda_criteria)
        })
        .collect()
}
