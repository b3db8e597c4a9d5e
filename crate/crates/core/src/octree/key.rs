use std::cmp::Ordering;

use crate::geometry::Point;

/// Deepest level usable in each dimension while keeping integer anchors
/// comfortably inside 64-bit Morton codes.
pub const MAX_LEVEL_2D: u8 = 21;
pub const MAX_LEVEL_3D: u8 = 14;

pub fn max_level(dim: usize) -> u8 {
    if dim == 2 {
        MAX_LEVEL_2D
    } else {
        MAX_LEVEL_3D
    }
}

/// A cell of the octree, anchored on the finest (`max_level`) integer grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LeafKey {
    pub level: u8,
    /// Minimum corner; `anchor[2] == 0` in 2D.
    pub anchor: [u32; 3],
}

fn spread3(v: u32) -> u64 {
    let mut x = v as u64 & 0x1f_ffff;
    x = (x | x << 32) & 0x1f_0000_0000_ffff;
    x = (x | x << 16) & 0x1f_0000_ff00_00ff;
    x = (x | x << 8) & 0x100f_00f0_0f00_f00f;
    x = (x | x << 4) & 0x10c3_0c30_c30c_30c3;
    x = (x | x << 2) & 0x1249_2492_4924_9249;
    x
}

/// Z-order code of a grid point; 2D points (z = 0) sort consistently.
pub fn morton(p: [u32; 3]) -> u64 {
    spread3(p[0]) | spread3(p[1]) << 1 | spread3(p[2]) << 2
}

impl LeafKey {
    pub fn root() -> Self {
        LeafKey {
            level: 0,
            anchor: [0; 3],
        }
    }

    /// Edge length in finest-grid units.
    pub fn span(&self, max_level: u8) -> u32 {
        1 << (max_level - self.level)
    }

    pub fn morton(&self) -> u64 {
        morton(self.anchor)
    }

    pub fn children(&self, dim: usize, max_level: u8) -> Vec<LeafKey> {
        let half = self.span(max_level) / 2;
        (0..1usize << dim)
            .map(|c| {
                let mut a = self.anchor;
                for (k, slot) in a.iter_mut().enumerate().take(dim) {
                    if c >> k & 1 == 1 {
                        *slot += half;
                    }
                }
                LeafKey {
                    level: self.level + 1,
                    anchor: a,
                }
            })
            .collect()
    }

    pub fn parent(&self, max_level: u8) -> Option<LeafKey> {
        if self.level == 0 {
            return None;
        }
        Some(self.ancestor(self.level - 1, max_level))
    }

    pub fn ancestor(&self, level: u8, max_level: u8) -> LeafKey {
        debug_assert!(level <= self.level);
        let mask = !((1u32 << (max_level - level)) - 1);
        LeafKey {
            level,
            anchor: [self.anchor[0] & mask, self.anchor[1] & mask, self.anchor[2] & mask],
        }
    }

    /// Same-level face neighbor across `axis` on side `positive`, if inside the domain.
    pub fn neighbor(&self, axis: usize, positive: bool, max_level: u8) -> Option<LeafKey> {
        let span = self.span(max_level) as i64;
        let a = self.anchor[axis] as i64 + if positive { span } else { -span };
        if a < 0 || a >= 1i64 << max_level {
            return None;
        }
        let mut anchor = self.anchor;
        anchor[axis] = a as u32;
        Some(LeafKey {
            level: self.level,
            anchor,
        })
    }

    /// Grid coordinates of corner `c`; bit `k` of `c` selects the upper side on axis `k`.
    pub fn corner(&self, c: usize, dim: usize, max_level: u8) -> [u32; 3] {
        let span = self.span(max_level);
        let mut p = self.anchor;
        for (k, slot) in p.iter_mut().enumerate().take(dim) {
            if c >> k & 1 == 1 {
                *slot += span;
            }
        }
        p
    }

    pub fn contains_key(&self, other: &LeafKey, max_level: u8) -> bool {
        other.level >= self.level && other.ancestor(self.level, max_level) == *self
    }
}

impl Ord for LeafKey {
    fn cmp(&self, other: &Self) -> Ordering {
        self.morton()
            .cmp(&other.morton())
            .then(self.level.cmp(&other.level))
    }
}

impl PartialOrd for LeafKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Axis-aligned square/cube mapped onto the integer grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Domain {
    pub dim: usize,
    pub origin: Point,
    pub side: f64,
}

impl Domain {
    /// `[-1, 1]^dim`.
    pub fn canonical(dim: usize) -> Self {
        let mut origin = Point::repeat(-1.0);
        if dim == 2 {
            origin.z = 0.0;
        }
        Domain { dim, origin, side: 2.0 }
    }

    pub fn new(dim: usize, origin: Point, side: f64) -> Self {
        Domain { dim, origin, side }
    }

    pub fn max_level(&self) -> u8 {
        max_level(self.dim)
    }

    pub fn cell_size(&self, level: u8) -> f64 {
        self.side / (1u64 << level) as f64
    }

    /// Physical position of a finest-grid point.
    pub fn point(&self, grid: [u32; 3]) -> Point {
        let unit = self.side / (1u64 << self.max_level()) as f64;
        let mut p = self.origin;
        for k in 0..self.dim {
            p[k] += grid[k] as f64 * unit;
        }
        p
    }

    pub fn cell_min(&self, key: &LeafKey) -> Point {
        self.point(key.anchor)
    }

    pub fn cell_center(&self, key: &LeafKey) -> Point {
        let h = self.cell_size(key.level);
        let mut c = self.cell_min(key);
        for k in 0..self.dim {
            c[k] += 0.5 * h;
        }
        c
    }

    pub fn cell_diagonal(&self, level: u8) -> f64 {
        self.cell_size(level) * (self.dim as f64).sqrt()
    }

    /// Finest-grid cell containing `p`, clamped into the domain.
    pub fn locate_point(&self, p: &Point) -> [u32; 3] {
        let m = self.max_level();
        let n = (1u64 << m) as f64;
        let mut g = [0u32; 3];
        for k in 0..self.dim {
            let t = ((p[k] - self.origin[k]) / self.side * n).floor();
            g[k] = t.clamp(0.0, n - 1.0) as u32;
        }
        g
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn morton_interleaves_bits() {
        assert_eq!(morton([1, 0, 0]), 1);
        assert_eq!(morton([0, 1, 0]), 2);
        assert_eq!(morton([0, 0, 1]), 4);
        assert_eq!(morton([3, 3, 3]), 63);
        let big = (1u32 << 21) - 1;
        assert_eq!(morton([big, big, big]), (1u64 << 63) - 1);
    }

    #[test]
    fn children_of_root_sort_in_z_order() {
        let m = MAX_LEVEL_2D;
        let mut kids = LeafKey::root().children(2, m);
        let expect = kids.clone();
        kids.sort();
        assert_eq!(kids, expect);
        for k in &kids {
            assert_eq!(k.parent(m), Some(LeafKey::root()));
            assert!(LeafKey::root().contains_key(k, m));
        }
    }

    #[test]
    fn neighbors_stop_at_domain_edge() {
        let m = MAX_LEVEL_3D;
        let k = LeafKey::root().children(3, m)[0];
        assert!(k.neighbor(0, false, m).is_none());
        let n = k.neighbor(0, true, m).unwrap();
        assert_eq!(n.anchor, [1 << (m - 1), 0, 0]);
        assert!(n.neighbor(0, true, m).is_none());
    }

    #[test]
    fn domain_geometry() {
        let d = Domain::new(2, Point::zeros(), 2.0);
        let key = LeafKey {
            level: 2,
            anchor: [3 << 19, 1 << 19, 0],
        };
        assert_eq!(d.cell_min(&key), Point::new(1.5, 0.5, 0.0));
        assert_eq!(d.cell_size(2), 0.5);
        assert_eq!(d.point(key.corner(3, 2, MAX_LEVEL_2D)), Point::new(2.0, 1.0, 0.0));
        let g = d.locate_point(&Point::new(1.99, 0.0, 0.0));
        assert_eq!(g[1], 0);
        assert_eq!(d.locate_point(&Point::new(2.0, 2.0, 0.0))[0], (1 << 21) - 1);
    }
}
