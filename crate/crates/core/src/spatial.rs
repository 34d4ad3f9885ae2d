//! Static 3D kd-tree for exact nearest-neighbour and radius queries.

use crate::geometry::Vec3;

const LEAF_SIZE: usize = 16;

#[derive(Debug)]
enum Node {
    Leaf { start: usize, end: usize },
    Split { axis: usize, value: f64, left: usize, right: usize },
}

/// Balanced kd-tree over borrowed points; query results are point indices.
#[derive(Debug)]
pub struct KdTree<'a> {
    points: &'a [Vec3],
    order: Vec<usize>,
    nodes: Vec<Node>,
}

#[inline]
pub(crate) fn dist2(a: &Vec3, b: &Vec3) -> f64 {
    let dx = a.x - b.x;
    let dy = a.y - b.y;
    let dz = a.z - b.z;
    dx * dx + dy * dy + dz * dz
}

impl<'a> KdTree<'a> {
    pub fn new(points: &'a [Vec3]) -> Self {
        Self::with_indices(points, (0..points.len()).collect())
    }

    /// Tree over the subset `indices` of `points`.
    pub fn with_indices(points: &'a [Vec3], indices: Vec<usize>) -> Self {
        let mut tree = KdTree {
            points,
            order: indices,
            nodes: Vec::new(),
        };
        if !tree.order.is_empty() {
            tree.build(0, tree.order.len());
        }
        tree
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    fn build(&mut self, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        // Split on the axis of widest spread.
        let slice = &self.order[start..end];
        let mut lo = Vec3::repeat(f64::INFINITY);
        let mut hi = Vec3::repeat(f64::NEG_INFINITY);
        for &i in slice {
            lo = lo.inf(&self.points[i]);
            hi = hi.sup(&self.points[i]);
        }
        let axis = (hi - lo).imax();
        if hi[axis] == lo[axis] {
            // All coincident: nothing to split.
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let mid = start + (end - start) / 2;
        let points = self.points;
        self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            points[a][axis].total_cmp(&points[b][axis])
        });
        let value = points[self.order[mid]][axis];
        self.nodes.push(Node::Leaf { start: 0, end: 0 });
        let left = self.build(start, mid);
        let right = self.build(mid, end);
        self.nodes[id] = Node::Split { axis, value, left, right };
        id
    }

    /// All indexed points `q` with `|q − center|² ≤ radius²`.
    pub fn within(&self, center: &Vec3, radius: f64, out: &mut Vec<usize>) {
        out.clear();
        if self.nodes.is_empty() || radius < 0.0 {
            return;
        }
        let r2 = radius * radius;
        let mut stack = vec![0usize];
        while let Some(n) = stack.pop() {
            match self.nodes[n] {
                Node::Leaf { start, end } => {
                    out.extend(
                        self.order[start..end]
                            .iter()
                            .copied()
                            .filter(|&i| dist2(&self.points[i], center) <= r2),
                    );
                }
                Node::Split { axis, value, left, right } => {
                    let delta = center[axis] - value;
                    // Left holds values <= split, right holds values >= split.
                    if delta <= radius {
                        stack.push(left);
                    }
                    if delta >= -radius {
                        stack.push(right);
                    }
                }
            }
        }
    }

    /// Number of indexed points within `radius` of `center`.
    pub fn count_within(&self, center: &Vec3, radius: f64) -> usize {
        let mut buf = Vec::new();
        self.within(center, radius, &mut buf);
        buf.len()
    }

    /// Nearest indexed point to `center` other than `exclude`, with its
    /// squared distance. Ties resolve to the smaller index.
    pub fn nearest_excluding(&self, center: &Vec3, exclude: Option<usize>) -> Option<(usize, f64)> {
        if self.nodes.is_empty() {
            return None;
        }
        let mut best: Option<(usize, f64)> = None;
        self.nearest_rec(0, center, exclude, &mut best);
        best
    }

    fn nearest_rec(&self, n: usize, center: &Vec3, exclude: Option<usize>, best: &mut Option<(usize, f64)>) {
        match self.nodes[n] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    if Some(i) == exclude {
                        continue;
                    }
                    let d = dist2(&self.points[i], center);
                    let better = match *best {
                        None => true,
                        Some((bi, bd)) => d < bd || (d == bd && i < bi),
                    };
                    if better {
                        *best = Some((i, d));
                    }
                }
            }
            Node::Split { axis, value, left, right } => {
                let delta = center[axis] - value;
                let (near, far) = if delta <= 0.0 { (left, right) } else { (right, left) };
                self.nearest_rec(near, center, exclude, best);
                if best.is_none_or(|(_, bd)| delta * delta <= bd) {
                    self.nearest_rec(far, center, exclude, best);
                }
            }
        }
    }
}
