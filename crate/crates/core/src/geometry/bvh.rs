//! Bounding-volume hierarchy over triangles.

use super::Point;

const LEAF_SIZE: usize = 4;

#[derive(Debug, Clone)]
struct Node {
    min: Point,
    max: Point,
    /// Leaf: `count > 0`, triangles `order[start..start + count]`.
    /// Interior: children at `start` and `start + 1`... stored as indices.
    start: usize,
    count: usize,
    left: usize,
    right: usize,
}

#[derive(Debug, Clone, Default)]
pub struct Bvh {
    nodes: Vec<Node>,
    /// Triangle indices, permuted so every leaf owns a contiguous range.
    order: Vec<usize>,
}

fn box_distance_sq(min: &Point, max: &Point, x: &Point) -> f64 {
    let mut d = 0.0;
    for k in 0..3 {
        let v = if x[k] < min[k] {
            min[k] - x[k]
        } else if x[k] > max[k] {
            x[k] - max[k]
        } else {
            0.0
        };
        d += v * v;
    }
    d
}

fn ray_hits_box(min: &Point, max: &Point, origin: &Point, inv_dir: &Point) -> bool {
    let mut t0 = 0.0f64;
    let mut t1 = f64::INFINITY;
    for k in 0..3 {
        let a = (min[k] - origin[k]) * inv_dir[k];
        let b = (max[k] - origin[k]) * inv_dir[k];
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        t0 = t0.max(lo);
        t1 = t1.min(hi);
        if t0 > t1 * (1.0 + 1e-12) + 1e-12 {
            return false;
        }
    }
    true
}

impl Bvh {
    /// Builds over the listed triangles; `bounds(i)` returns the box of triangle `i`.
    pub fn build(triangles: &[usize], bounds: impl Fn(usize) -> (Point, Point)) -> Self {
        let boxes: Vec<(Point, Point)> = triangles.iter().map(|&t| bounds(t)).collect();
        let mut items: Vec<usize> = (0..triangles.len()).collect();
        let mut bvh = Bvh::default();
        if items.is_empty() {
            return bvh;
        }
        let n = items.len();
        bvh.build_range(&mut items, 0, n, &boxes);
        bvh.order = items.iter().map(|&i| triangles[i]).collect();
        bvh
    }

    fn build_range(
        &mut self,
        items: &mut [usize],
        start: usize,
        end: usize,
        boxes: &[(Point, Point)],
    ) -> usize {
        let mut min = Point::repeat(f64::INFINITY);
        let mut max = Point::repeat(f64::NEG_INFINITY);
        for &i in &items[start..end] {
            min = min.inf(&boxes[i].0);
            max = max.sup(&boxes[i].1);
        }
        let id = self.nodes.len();
        self.nodes.push(Node {
            min,
            max,
            start,
            count: 0,
            left: 0,
            right: 0,
        });
        if end - start <= LEAF_SIZE {
            self.nodes[id].count = end - start;
            return id;
        }
        let mut cmin = Point::repeat(f64::INFINITY);
        let mut cmax = Point::repeat(f64::NEG_INFINITY);
        for &i in &items[start..end] {
            let c = (boxes[i].0 + boxes[i].1) * 0.5;
            cmin = cmin.inf(&c);
            cmax = cmax.sup(&c);
        }
        let ext = cmax - cmin;
        let axis = if ext.x >= ext.y && ext.x >= ext.z {
            0
        } else if ext.y >= ext.z {
            1
        } else {
            2
        };
        let mid = start + (end - start) / 2;
        items[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            let ca = boxes[a].0[axis] + boxes[a].1[axis];
            let cb = boxes[b].0[axis] + boxes[b].1[axis];
            ca.total_cmp(&cb).then(a.cmp(&b))
        });
        let left = self.build_range(items, start, mid, boxes);
        let right = self.build_range(items, mid, end, boxes);
        self.nodes[id].left = left;
        self.nodes[id].right = right;
        id
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nearest-first search. `dist_sq(t)` returns the squared distance to
    /// triangle `t`; the minimizing `(triangle, dist_sq)` is returned.
    /// Ties resolve to the lower triangle index.
    pub fn nearest(&self, x: &Point, mut dist_sq: impl FnMut(usize) -> f64) -> Option<(usize, f64)> {
        if self.nodes.is_empty() {
            return None;
        }
        let mut best: Option<(usize, f64)> = None;
        let mut stack = vec![(0usize, box_distance_sq(&self.nodes[0].min, &self.nodes[0].max, x))];
        while let Some((id, bound)) = stack.pop() {
            if let Some((_, b)) = best {
                if bound > b {
                    continue;
                }
            }
            let node = &self.nodes[id];
            if node.count > 0 {
                for &t in &self.order[node.start..node.start + node.count] {
                    let d = dist_sq(t);
                    match best {
                        Some((bt, bd)) if d > bd || (d == bd && t > bt) => {}
                        _ => best = Some((t, d)),
                    }
                }
                continue;
            }
            let l = node.left;
            let r = node.right;
            let dl = box_distance_sq(&self.nodes[l].min, &self.nodes[l].max, x);
            let dr = box_distance_sq(&self.nodes[r].min, &self.nodes[r].max, x);
            // push the farther child first so the nearer one is searched first
            if dl <= dr {
                stack.push((r, dr));
                stack.push((l, dl));
            } else {
                stack.push((l, dl));
                stack.push((r, dr));
            }
        }
        best
    }

    /// Calls `visit(t)` for every triangle whose box the ray may cross.
    pub fn ray_candidates(&self, origin: &Point, dir: &Point, mut visit: impl FnMut(usize)) {
        if self.nodes.is_empty() {
            return;
        }
        let inv = Point::new(1.0 / dir.x, 1.0 / dir.y, 1.0 / dir.z);
        let mut stack = vec![0usize];
        while let Some(id) = stack.pop() {
            let node = &self.nodes[id];
            if !ray_hits_box(&node.min, &node.max, origin, &inv) {
                continue;
            }
            if node.count > 0 {
                for &t in &self.order[node.start..node.start + node.count] {
                    visit(t);
                }
            } else {
                stack.push(node.right);
                stack.push(node.left);
            }
        }
    }
}
