//! 2D convex hulls and point containment tests.

use crate::geometry::Vec2;

/// Distance (px) below which a point counts as lying on a hull edge.
pub const ON_EDGE_TOLERANCE: f64 = 1e-9;

/// Turn angle (radians) below which three hull points count as collinear.
/// Lattice edges projected through a camera are only collinear up to
/// rounding; without this the vertex count would depend on noise.
pub const COLLINEAR_TOLERANCE: f64 = 1e-9;

#[inline]
fn cross(o: Vec2, a: Vec2, b: Vec2) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

#[inline]
fn left_turn(o: Vec2, a: Vec2, b: Vec2) -> bool {
    cross(o, a, b) > COLLINEAR_TOLERANCE * (a - o).norm() * (b - a).norm()
}

/// Convex hull by Andrew's monotone chain.
///
/// Returns indices into `points` of the hull vertices in counter-clockwise
/// order (y up), without nearly collinear or duplicate vertices. Degenerate
/// inputs give one vertex (all coincident) or two (all collinear).
pub fn convex_hull(points: &[Vec2]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..points.len()).collect();
    idx.sort_unstable_by(|&a, &b| {
        points[a]
            .x
            .total_cmp(&points[b].x)
            .then(points[a].y.total_cmp(&points[b].y))
            .then(a.cmp(&b))
    });
    idx.dedup_by(|a, b| points[*a] == points[*b]);
    if idx.len() <= 2 {
        return idx;
    }

    let mut hull: Vec<usize> = Vec::with_capacity(2 * idx.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &usize>> = if pass == 0 {
            Box::new(idx.iter())
        } else {
            Box::new(idx.iter().rev())
        };
        for &i in iter {
            while hull.len() >= start + 2
                && !left_turn(points[hull[hull.len() - 2]], points[hull[hull.len() - 1]], points[i])
            {
                hull.pop();
            }
            hull.push(i);
        }
        hull.pop();
    }
    if hull.len() < 2 {
        // All points collinear collapse to the two extremes.
        return vec![idx[0], idx[idx.len() - 1]];
    }
    if hull.len() == 2 && points[hull[0]] == points[hull[1]] {
        hull.truncate(1);
    }
    hull
}

/// A convex loop ready for containment queries.
#[derive(Debug, Clone)]
pub struct ConvexLoop {
    vertices: Vec<Vec2>,
    min: Vec2,
    max: Vec2,
}

impl ConvexLoop {
    /// `vertices` must be convex in counter-clockwise order, as produced by
    /// [`convex_hull`].
    pub fn new(vertices: Vec<Vec2>) -> Self {
        let mut min = Vec2::repeat(f64::INFINITY);
        let mut max = Vec2::repeat(f64::NEG_INFINITY);
        for v in &vertices {
            min = min.inf(v);
            max = max.sup(v);
        }
        Self { vertices, min, max }
    }

    pub fn vertices(&self) -> &[Vec2] {
        &self.vertices
    }

    /// Inside or on the boundary (within [`ON_EDGE_TOLERANCE`]).
    pub fn contains(&self, p: Vec2) -> bool {
        let tol = ON_EDGE_TOLERANCE;
        if p.x < self.min.x - tol || p.x > self.max.x + tol || p.y < self.min.y - tol || p.y > self.max.y + tol {
            return false;
        }
        match self.vertices.len() {
            0 => false,
            1 => (p - self.vertices[0]).norm() <= tol,
            2 => segment_distance(p, self.vertices[0], self.vertices[1]) <= tol,
            n => (0..n).all(|i| {
                let a = self.vertices[i];
                let b = self.vertices[(i + 1) % n];
                cross(a, b, p) >= -tol * (b - a).norm()
            }),
        }
    }
}

/// Euclidean distance from `p` to the segment `ab`.
pub fn segment_distance(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    if len2 == 0.0 {
        return (p - a).norm();
    }
    let t = ((p - a).dot(&ab) / len2).clamp(0.0, 1.0);
    (p - (a + ab * t)).norm()
}

/// Even-odd containment for an arbitrary closed polygon; points on an edge
/// count as inside.
pub fn polygon_contains(polygon: &[Vec2], p: Vec2) -> bool {
    let n = polygon.len();
    if n == 0 {
        return false;
    }
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let a = polygon[i];
        let b = polygon[j];
        if segment_distance(p, a, b) <= ON_EDGE_TOLERANCE {
            return true;
        }
        if (a.y > p.y) != (b.y > p.y) && p.x < (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x {
            inside = !inside;
        }
        j = i;
    }
    inside
}
