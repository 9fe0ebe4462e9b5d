//! Exact kD-tree over tagged points of runtime dimension (up to [`MAX_DIM`]).
//!
//! Points carry a `u32` tag; several points may share one. Nearest queries return
//! the lexicographically smallest `(squared distance, tag)` so results are
//! reproducible by a plain linear scan. Squared distances are computed with
//! [`crate::metric::squared_distance`].

use crate::metric::squared_distance;

pub const MAX_DIM: usize = 12;
pub const LEAF_SIZE: usize = 32;

// Pruning bounds are accumulated incrementally; this slack keeps rounding in
// them from discarding a point a linear scan would report.
const PRUNE_SLACK: f64 = 1e-10;

#[derive(Clone, Debug)]
enum Node {
    Leaf {
        start: u32,
        end: u32,
    },
    Split {
        axis: u32,
        value: f64,
        left: u32,
        right: u32,
    },
}

#[derive(Clone, Debug)]
pub struct KdTree {
    dim: usize,
    coords: Vec<f64>,
    tags: Vec<u32>,
    nodes: Vec<Node>,
}

impl KdTree {
    /// Builds a tree from flat coordinates (`tags.len() * dim` values).
    pub fn build(dim: usize, coords: &[f64], tags: &[u32]) -> Self {
        assert!((1..=MAX_DIM).contains(&dim), "unsupported dimension {dim}");
        assert_eq!(coords.len(), tags.len() * dim);
        let mut order: Vec<u32> = (0..tags.len() as u32).collect();
        let mut nodes = Vec::new();
        if !order.is_empty() {
            build_node(dim, coords, &mut order, 0, &mut nodes);
        }
        let mut sorted = Vec::with_capacity(coords.len());
        let mut sorted_tags = Vec::with_capacity(tags.len());
        for &i in &order {
            let i = i as usize;
            sorted.extend_from_slice(&coords[i * dim..(i + 1) * dim]);
            sorted_tags.push(tags[i]);
        }
        Self {
            dim,
            coords: sorted,
            tags: sorted_tags,
            nodes,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.tags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tags.is_empty()
    }

    fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    /// Smallest `(squared distance, tag)` over all points, or `None` when empty.
    pub fn nearest(&self, query: &[f64]) -> Option<(u32, f64)> {
        assert_eq!(query.len(), self.dim);
        if self.nodes.is_empty() {
            return None;
        }
        let mut best = (u32::MAX, f64::INFINITY);
        let mut offsets = [0.0; MAX_DIM];
        self.nearest_in(0, query, &mut offsets, 0.0, &mut best);
        Some(best)
    }

    fn nearest_in(
        &self,
        node: usize,
        q: &[f64],
        offsets: &mut [f64; MAX_DIM],
        bound: f64,
        best: &mut (u32, f64),
    ) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for i in start as usize..end as usize {
                    let d = squared_distance(self.point(i), q);
                    let tag = self.tags[i];
                    if d < best.1 || (d == best.1 && tag < best.0) {
                        *best = (tag, d);
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let axis = axis as usize;
                let diff = q[axis] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.nearest_in(near as usize, q, offsets, bound, best);
                let old = offsets[axis];
                let far_bound = bound - old * old + diff * diff;
                if far_bound <= best.1 * (1.0 + PRUNE_SLACK) {
                    offsets[axis] = diff;
                    self.nearest_in(far as usize, q, offsets, far_bound, best);
                    offsets[axis] = old;
                }
            }
        }
    }

    /// Every point whose squared distance is at most `max_sq`, as `(index, tag, d²)`.
    pub fn within(&self, query: &[f64], max_sq: f64, mut visit: impl FnMut(u32, f64)) {
        assert_eq!(query.len(), self.dim);
        if self.nodes.is_empty() {
            return;
        }
        let mut offsets = [0.0; MAX_DIM];
        self.within_in(0, query, max_sq, &mut offsets, 0.0, &mut visit);
    }

    fn within_in(
        &self,
        node: usize,
        q: &[f64],
        max_sq: f64,
        offsets: &mut [f64; MAX_DIM],
        bound: f64,
        visit: &mut impl FnMut(u32, f64),
    ) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for i in start as usize..end as usize {
                    let d = squared_distance(self.point(i), q);
                    if d <= max_sq {
                        visit(self.tags[i], d);
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let axis = axis as usize;
                let diff = q[axis] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.within_in(near as usize, q, max_sq, offsets, bound, visit);
                let old = offsets[axis];
                let far_bound = bound - old * old + diff * diff;
                if far_bound <= max_sq * (1.0 + PRUNE_SLACK) {
                    offsets[axis] = diff;
                    self.within_in(far as usize, q, max_sq, offsets, far_bound, visit);
                    offsets[axis] = old;
                }
            }
        }
    }
}

fn build_node(dim: usize, coords: &[f64], order: &mut [u32], offset: usize, nodes: &mut Vec<Node>) -> u32 {
    let id = nodes.len() as u32;
    let leaf = Node::Leaf {
        start: offset as u32,
        end: (offset + order.len()) as u32,
    };
    if order.len() <= LEAF_SIZE {
        nodes.push(leaf);
        return id;
    }
    let coord = |i: u32, k: usize| coords[i as usize * dim + k];
    let (mut axis, mut spread) = (0, -1.0);
    for k in 0..dim {
        let (lo, hi) = order.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
            let c = coord(i, k);
            (lo.min(c), hi.max(c))
        });
        if hi - lo > spread {
            spread = hi - lo;
            axis = k;
        }
    }
    if !(spread > 0.0) {
        nodes.push(leaf);
        return id;
    }
    let mid = order.len() / 2;
    order.select_nth_unstable_by(mid, |&a, &b| coord(a, axis).total_cmp(&coord(b, axis)));
    let value = coord(order[mid], axis);

    nodes.push(leaf); // placeholder, replaced below
    let (lo, hi) = order.split_at_mut(mid);
    let left = build_node(dim, coords, lo, offset, nodes);
    let right = build_node(dim, coords, hi, offset + mid, nodes);
    nodes[id as usize] = Node::Split {
        axis: axis as u32,
        value,
        left,
        right,
    };
    id
}
