//! Lasso selection difficulty of a projected target instance.
//!
//! The lasso is modelled as a closed dotted tunnel around the target: the
//! inner wall runs through the convex hull vertices of the positive points
//! (each a rendered dot of radius `r`), the outer wall is formed by the
//! nearest negative points. Every hull vertex contributes a curved-tunnel
//! term with its clearance `W_i`; every hull edge contributes a weighted
//! goal-passing term `m·log2(d_e/(W_e + 2r) + 1)` for crossing the gap
//! between consecutive dots.
//!
//! Cost is `O(h·n)` for `n` visible points and `h` hull vertices plus the
//! `O(n log n)` hull, which stays inside the `O(n²)` budget.

use std::cmp::Ordering;
use std::f64::consts::LN_2;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::fitts::curved_tunnel_unchecked;
use crate::geometry::{ProjectedScene, Vec2};
use crate::hull::{convex_hull, segment_distance, ConvexLoop};

/// Why no error-free single lasso exists for a scene.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Infeasibility {
    /// A positive dot touches or overlaps a negative dot.
    Overlap,
    /// A negative point projects inside the positive hull.
    InteriorNegative,
    /// Part of the target lies behind the camera.
    BehindCamera,
    /// No positive points at all.
    Degenerate,
}

impl Infeasibility {
    pub fn as_str(&self) -> &'static str {
        match self {
            Infeasibility::Overlap => "overlap",
            Infeasibility::InteriorNegative => "interior-negative",
            Infeasibility::BehindCamera => "behind-camera",
            Infeasibility::Degenerate => "degenerate",
        }
    }
}

impl fmt::Display for Infeasibility {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Lasso difficulty; `Infeasible` orders after every finite value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Difficulty {
    Finite(f64),
    Infeasible(Infeasibility),
}

impl Difficulty {
    pub fn value(&self) -> Option<f64> {
        match self {
            Difficulty::Finite(v) => Some(*v),
            Difficulty::Infeasible(_) => None,
        }
    }

    pub fn is_feasible(&self) -> bool {
        matches!(self, Difficulty::Finite(_))
    }

    /// Total order: finite values ascending, then all infeasible values as
    /// equals.
    pub fn total_cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Difficulty::Finite(a), Difficulty::Finite(b)) => a.total_cmp(b),
            (Difficulty::Finite(_), Difficulty::Infeasible(_)) => Ordering::Less,
            (Difficulty::Infeasible(_), Difficulty::Finite(_)) => Ordering::Greater,
            (Difficulty::Infeasible(_), Difficulty::Infeasible(_)) => Ordering::Equal,
        }
    }
}

impl PartialOrd for Difficulty {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.total_cmp(other))
    }
}

impl fmt::Display for Difficulty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Difficulty::Finite(v) => write!(f, "{v}"),
            Difficulty::Infeasible(r) => write!(f, "infeasible: {r}"),
        }
    }
}

/// A hull vertex of the target with its clearance to the nearest negative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TunnelDot {
    pub point: usize,
    pub position: Vec2,
    /// Clear gap between dot boundaries, `dist − 2r`; `+∞` without negatives.
    pub margin: f64,
}

/// The gap between dot `from` and dot `to` along the loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TunnelGap {
    pub from: usize,
    pub to: usize,
    /// Edge length minus the two dot radii, clamped at zero.
    pub length: f64,
    pub clearance: f64,
}

/// Dotted-tunnel decomposition of the lasso path around a target.
#[derive(Debug, Clone, PartialEq)]
pub struct TunnelModel {
    dots: Vec<TunnelDot>,
    gaps: Vec<TunnelGap>,
    dot_radius: f64,
}

impl TunnelModel {
    pub fn dots(&self) -> &[TunnelDot] {
        &self.dots
    }

    pub fn gaps(&self) -> &[TunnelGap] {
        &self.gaps
    }

    pub fn dot_radius(&self) -> f64 {
        self.dot_radius
    }
}

/// Infeasible scene: the reason plus how many negatives fall inside the
/// positive hull (`usize::MAX` when the hull is unknown).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TunnelFailure {
    pub reason: Infeasibility,
    pub interior_negatives: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComponentKind {
    Dot,
    Gap,
}

/// One summand of the lasso ID.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostComponent {
    pub kind: ComponentKind,
    pub index: usize,
    pub id: f64,
}

/// Estimated lasso difficulty of one projected scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LassoCostEstimate {
    pub difficulty: Difficulty,
    pub components: Vec<CostComponent>,
    /// Negatives inside or on the positive hull.
    pub interior_negatives: usize,
}

impl LassoCostEstimate {
    fn infeasible(failure: TunnelFailure) -> Self {
        Self {
            difficulty: Difficulty::Infeasible(failure.reason),
            components: Vec::new(),
            interior_negatives: failure.interior_negatives,
        }
    }
}

/// Builds the dotted tunnel around the positive points of `scene`.
pub fn build_tunnel(scene: &ProjectedScene) -> Result<TunnelModel, TunnelFailure> {
    let r = scene.dot_radius_px();
    let positive = scene.positive();
    let behind = scene.behind_camera();

    if !positive.iter().any(|&p| p) {
        return Err(TunnelFailure {
            reason: Infeasibility::Degenerate,
            interior_negatives: usize::MAX,
        });
    }
    if positive.iter().zip(behind).any(|(&p, &b)| p && b) {
        return Err(TunnelFailure {
            reason: Infeasibility::BehindCamera,
            interior_negatives: usize::MAX,
        });
    }

    let (pos_idx, pos_pts): (Vec<usize>, Vec<Vec2>) = scene.visible_positives().unzip();
    let hull: Vec<usize> = convex_hull(&pos_pts).into_iter().map(|h| pos_idx[h]).collect();
    let positions = scene.positions();
    let shape = ConvexLoop::new(hull.iter().map(|&i| positions[i]).collect());

    // One pass over the negatives: containment, nearest distance per hull
    // vertex and per hull edge.
    let n_dots = hull.len();
    let n_gaps = if n_dots >= 2 { n_dots } else { 0 };
    let verts = shape.vertices();
    let mut vertex_dist = vec![f64::INFINITY; n_dots];
    let mut edge_dist = vec![f64::INFINITY; n_gaps];
    let mut interior = 0usize;
    let (lo, hi) = verts.iter().fold(
        (Vec2::repeat(f64::INFINITY), Vec2::repeat(f64::NEG_INFINITY)),
        |(lo, hi), v| (lo.inf(v), hi.sup(v)),
    );
    // Largest current best distance; a negative farther than this from the
    // hull's bounding box cannot improve any vertex or edge.
    let mut worst = f64::INFINITY;
    for (_, q) in scene.visible_negatives() {
        let outside = Vec2::new((lo.x - q.x).max(q.x - hi.x).max(0.0), (lo.y - q.y).max(q.y - hi.y).max(0.0));
        if outside.norm() > worst {
            continue;
        }
        if shape.contains(q) {
            interior += 1;
        }
        for (d, v) in vertex_dist.iter_mut().zip(verts) {
            *d = d.min((q - v).norm());
        }
        for (e, d) in edge_dist.iter_mut().enumerate() {
            *d = d.min(segment_distance(q, verts[e], verts[(e + 1) % n_dots]));
        }
        worst = vertex_dist.iter().chain(&edge_dist).fold(0.0, |a: f64, &b| a.max(b));
    }
    if interior > 0 {
        return Err(TunnelFailure {
            reason: Infeasibility::InteriorNegative,
            interior_negatives: interior,
        });
    }

    let dots: Vec<TunnelDot> = hull
        .iter()
        .zip(verts)
        .zip(&vertex_dist)
        .map(|((&point, &position), &dist)| TunnelDot {
            point,
            position,
            margin: dist - 2.0 * r,
        })
        .collect();
    let gaps: Vec<TunnelGap> = (0..n_gaps)
        .map(|e| {
            let to = (e + 1) % n_dots;
            let clearance = dots[e].margin.min(dots[to].margin).min(edge_dist[e] - 2.0 * r);
            TunnelGap {
                from: e,
                to,
                length: ((verts[to] - verts[e]).norm() - 2.0 * r).max(0.0),
                clearance,
            }
        })
        .collect();

    if dots.iter().any(|d| !(d.margin > 0.0)) || gaps.iter().any(|g| !(g.clearance > 0.0)) {
        return Err(TunnelFailure {
            reason: Infeasibility::Overlap,
            interior_negatives: 0,
        });
    }

    Ok(TunnelModel {
        dots,
        gaps,
        dot_radius: r,
    })
}

/// ID of steering around every dot plus `m` times the ID of crossing every
/// gap; the finite difficulty is the sum of the returned components.
pub fn estimate_lasso_id(scene: &ProjectedScene, weight: f64) -> LassoCostEstimate {
    match build_tunnel(scene) {
        Ok(model) => tunnel_cost(&model, weight),
        Err(failure) => LassoCostEstimate::infeasible(failure),
    }
}

/// Sums the ID components of an already built tunnel.
pub fn tunnel_cost(model: &TunnelModel, weight: f64) -> LassoCostEstimate {
    let r = model.dot_radius;
    let mut components = Vec::with_capacity(model.dots.len() + model.gaps.len());
    components.extend(model.dots.iter().enumerate().map(|(index, d)| CostComponent {
        kind: ComponentKind::Dot,
        index,
        id: curved_tunnel_unchecked(r, d.margin),
    }));
    components.extend(model.gaps.iter().enumerate().map(|(index, g)| CostComponent {
        kind: ComponentKind::Gap,
        index,
        id: weight * (g.length / (g.clearance + 2.0 * r)).ln_1p() / LN_2,
    }));
    let total = components.iter().map(|c| c.id).sum();
    LassoCostEstimate {
        difficulty: Difficulty::Finite(total),
        components,
        interior_negatives: 0,
    }
}
