//! Point clouds, the arc-rotate camera and perspective projection to screen
//! space.
//!
//! World frame is right-handed with z up. A [`Viewpoint`] orbits its target:
//! `alpha` is the longitude measured from the +x axis towards +y, `beta` the
//! polar angle from +z (0 looks straight down, π straight up). Pixel
//! coordinates have their origin at the top-left corner of the viewport with
//! y growing downwards.

use std::f64::consts::PI;

use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec2 = Vector2<f64>;
pub type Vec3 = Vector3<f64>;

/// Positions with optional per-point semantic and instance labels.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    points: Vec<Vec3>,
    semantic_labels: Option<Vec<u32>>,
    instance_labels: Option<Vec<u32>>,
}

impl PointCloud {
    pub fn new(points: Vec<Vec3>) -> Result<Self> {
        if let Some(i) = points.iter().position(|p| !p.iter().all(|c| c.is_finite())) {
            return Err(Error::Domain(format!("point {i} has a non-finite coordinate")));
        }
        Ok(Self {
            points,
            semantic_labels: None,
            instance_labels: None,
        })
    }

    pub fn with_semantic_labels(mut self, labels: Vec<u32>) -> Result<Self> {
        self.check_len("semantic", labels.len())?;
        self.semantic_labels = Some(labels);
        Ok(self)
    }

    pub fn with_instance_labels(mut self, labels: Vec<u32>) -> Result<Self> {
        self.check_len("instance", labels.len())?;
        self.instance_labels = Some(labels);
        Ok(self)
    }

    fn check_len(&self, what: &str, len: usize) -> Result<()> {
        if len != self.points.len() {
            return Err(Error::InvalidInput(format!(
                "{len} {what} labels for {} points",
                self.points.len()
            )));
        }
        Ok(())
    }

    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    pub fn semantic_labels(&self) -> Option<&[u32]> {
        self.semantic_labels.as_deref()
    }

    pub fn instance_labels(&self) -> Option<&[u32]> {
        self.instance_labels.as_deref()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Keeps the points at `indices` (in the given order) with their labels.
    pub fn subset(&self, indices: &[usize]) -> PointCloud {
        let pick = |v: &Vec<u32>| indices.iter().map(|&i| v[i]).collect::<Vec<_>>();
        PointCloud {
            points: indices.iter().map(|&i| self.points[i]).collect(),
            semantic_labels: self.semantic_labels.as_ref().map(pick),
            instance_labels: self.instance_labels.as_ref().map(pick),
        }
    }

    /// Axis-aligned bounding box, `None` for an empty cloud.
    pub fn bounds(&self) -> Option<Aabb> {
        Aabb::from_points(self.points.iter().copied())
    }
}

/// Axis-aligned bounding cuboid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn from_points(points: impl IntoIterator<Item = Vec3>) -> Option<Aabb> {
        let mut it = points.into_iter();
        let first = it.next()?;
        Some(it.fold(Aabb { min: first, max: first }, |b, p| Aabb {
            min: b.min.inf(&p),
            max: b.max.sup(&p),
        }))
    }

    pub fn center(&self) -> Vec3 {
        (self.min + self.max) * 0.5
    }

    pub fn diagonal(&self) -> f64 {
        (self.max - self.min).norm()
    }
}

/// Arc-rotate camera: orbit around `target` at longitude `alpha`, polar
/// angle `beta` and `distance`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawViewpoint", into = "RawViewpoint")]
pub struct Viewpoint {
    target: Vec3,
    alpha: f64,
    beta: f64,
    distance: f64,
}

#[derive(Serialize, Deserialize)]
struct RawViewpoint {
    target: [f64; 3],
    alpha: f64,
    beta: f64,
    distance: f64,
}

impl TryFrom<RawViewpoint> for Viewpoint {
    type Error = Error;

    fn try_from(raw: RawViewpoint) -> Result<Self> {
        Viewpoint::new(Vec3::from(raw.target), raw.alpha, raw.beta, raw.distance)
    }
}

impl From<Viewpoint> for RawViewpoint {
    fn from(vp: Viewpoint) -> Self {
        RawViewpoint {
            target: vp.target.into(),
            alpha: vp.alpha,
            beta: vp.beta,
            distance: vp.distance,
        }
    }
}

/// Wraps an angle into (−π, π]. In-range values are returned untouched so
/// grid candidates stay bit-identical.
pub fn normalize_alpha(alpha: f64) -> f64 {
    if alpha > -PI && alpha <= PI {
        return alpha;
    }
    let wrapped = alpha.rem_euclid(2.0 * PI);
    if wrapped > PI {
        wrapped - 2.0 * PI
    } else {
        wrapped
    }
}

impl Viewpoint {
    /// Normalizes `alpha` into (−π, π] and clamps `beta` into [0, π].
    pub fn new(target: Vec3, alpha: f64, beta: f64, distance: f64) -> Result<Self> {
        if !target.iter().all(|c| c.is_finite()) || !alpha.is_finite() || !beta.is_finite() {
            return Err(Error::Domain("viewpoint parameters must be finite".into()));
        }
        if !(distance > 0.0 && distance.is_finite()) {
            return Err(Error::Domain(format!(
                "camera distance must be positive, got {distance}"
            )));
        }
        Ok(Self {
            target,
            alpha: normalize_alpha(alpha),
            beta: beta.clamp(0.0, PI),
            distance,
        })
    }

    /// Recovers the orbit parameters of a camera at `camera` looking at
    /// `target`.
    pub fn from_camera_position(target: Vec3, camera: Vec3) -> Result<Self> {
        let offset = camera - target;
        let distance = offset.norm();
        if distance == 0.0 {
            return Err(Error::Domain("camera coincides with its target".into()));
        }
        let beta = (offset.z / distance).clamp(-1.0, 1.0).acos();
        let alpha = if offset.x == 0.0 && offset.y == 0.0 {
            0.0
        } else {
            offset.y.atan2(offset.x)
        };
        Viewpoint::new(target, alpha, beta, distance)
    }

    pub fn target(&self) -> Vec3 {
        self.target
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn distance(&self) -> f64 {
        self.distance
    }

    /// Unit vector from the target towards the camera.
    pub fn direction(&self) -> Vec3 {
        let (sb, cb) = self.beta.sin_cos();
        let (sa, ca) = self.alpha.sin_cos();
        Vec3::new(sb * ca, sb * sa, cb)
    }

    pub fn camera_position(&self) -> Vec3 {
        self.target + self.direction() * self.distance
    }
}

/// Camera position `target + l·(sin β cos α, sin β sin α, cos β)`.
pub fn camera_position(vp: &Viewpoint) -> Vec3 {
    vp.camera_position()
}

/// Screen configuration for projection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Viewport {
    pub width_px: f64,
    pub height_px: f64,
    pub vertical_fov: f64,
    pub dot_radius_px: f64,
}

impl Default for Viewport {
    fn default() -> Self {
        Self {
            width_px: 1920.0,
            height_px: 1080.0,
            vertical_fov: PI / 4.0,
            dot_radius_px: 2.0,
        }
    }
}

impl Viewport {
    pub fn new(width_px: f64, height_px: f64, vertical_fov: f64, dot_radius_px: f64) -> Result<Self> {
        let vp = Self {
            width_px,
            height_px,
            vertical_fov,
            dot_radius_px,
        };
        vp.validate()?;
        Ok(vp)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !positive(self.width_px) || !positive(self.height_px) {
            return Err(Error::Domain(format!(
                "viewport must be positive, got {}x{}",
                self.width_px, self.height_px
            )));
        }
        if !(self.vertical_fov > 0.0 && self.vertical_fov < PI) {
            return Err(Error::Domain(format!(
                "vertical fov must lie in (0, π), got {}",
                self.vertical_fov
            )));
        }
        if !positive(self.dot_radius_px)
            || self.dot_radius_px >= self.width_px.min(self.height_px) / 4.0
        {
            return Err(Error::Domain(format!(
                "dot radius {} px must be positive and below a quarter of the viewport",
                self.dot_radius_px
            )));
        }
        Ok(())
    }

    /// Focal length in pixels.
    pub fn focal_px(&self) -> f64 {
        self.height_px * 0.5 / (self.vertical_fov * 0.5).tan()
    }

    pub fn center(&self) -> Vec2 {
        Vec2::new(self.width_px * 0.5, self.height_px * 0.5)
    }
}

/// A pinhole camera ready to project points.
#[derive(Debug, Clone, Copy)]
pub struct Camera {
    eye: Vec3,
    forward: Vec3,
    right: Vec3,
    up: Vec3,
    focal: f64,
    center: Vec2,
}

impl Camera {
    pub fn new(vp: &Viewpoint, viewport: &Viewport) -> Self {
        let forward = -vp.direction();
        // World z projected orthogonal to the view axis; world x at the poles.
        let up = if vp.beta.sin() < 1e-9 {
            Vec3::x()
        } else {
            (Vec3::z() - forward * forward.z).normalize()
        };
        let right = forward.cross(&up);
        Self {
            eye: vp.camera_position(),
            forward,
            right,
            up,
            focal: viewport.focal_px(),
            center: viewport.center(),
        }
    }

    pub fn eye(&self) -> Vec3 {
        self.eye
    }

    pub fn up(&self) -> Vec3 {
        self.up
    }

    pub fn right(&self) -> Vec3 {
        self.right
    }

    /// Pixel position of `p`, or `None` when it is not in front of the camera.
    #[inline]
    pub fn project(&self, p: &Vec3) -> Option<Vec2> {
        let v = p - self.eye;
        let depth = v.dot(&self.forward);
        if depth <= 0.0 {
            return None;
        }
        let s = self.focal / depth;
        Some(Vec2::new(
            self.center.x + v.dot(&self.right) * s,
            self.center.y - v.dot(&self.up) * s,
        ))
    }
}

/// A point cloud seen through one viewpoint, split into the target instance
/// (positive) and everything else (negative).
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectedScene {
    positions: Vec<Vec2>,
    positive: Vec<bool>,
    behind_camera: Vec<bool>,
    dot_radius_px: f64,
}

impl ProjectedScene {
    /// Assembles a scene from already projected data. Behind-camera points
    /// must carry some placeholder position; it is never read.
    pub fn from_parts(
        positions: Vec<Vec2>,
        positive: Vec<bool>,
        behind_camera: Vec<bool>,
        dot_radius_px: f64,
    ) -> Result<Self> {
        if positions.len() != positive.len() || positions.len() != behind_camera.len() {
            return Err(Error::InvalidInput(format!(
                "scene arrays differ in length: {} positions, {} labels, {} flags",
                positions.len(),
                positive.len(),
                behind_camera.len()
            )));
        }
        if !(dot_radius_px > 0.0 && dot_radius_px.is_finite()) {
            return Err(Error::Domain(format!("dot radius must be positive, got {dot_radius_px}")));
        }
        Ok(Self {
            positions,
            positive,
            behind_camera,
            dot_radius_px,
        })
    }

    /// A flat 2D scene with nothing behind the camera.
    pub fn planar(positives: &[Vec2], negatives: &[Vec2], dot_radius_px: f64) -> Result<Self> {
        let positions: Vec<Vec2> = positives.iter().chain(negatives).copied().collect();
        let positive = (0..positions.len()).map(|i| i < positives.len()).collect();
        let behind = vec![false; positions.len()];
        Self::from_parts(positions, positive, behind, dot_radius_px)
    }

    pub fn positions(&self) -> &[Vec2] {
        &self.positions
    }

    pub fn positive(&self) -> &[bool] {
        &self.positive
    }

    pub fn behind_camera(&self) -> &[bool] {
        &self.behind_camera
    }

    pub fn dot_radius_px(&self) -> f64 {
        self.dot_radius_px
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Visible positive points as `(point index, position)`.
    pub fn visible_positives(&self) -> impl Iterator<Item = (usize, Vec2)> + '_ {
        self.visible().filter(|(i, _)| self.positive[*i])
    }

    /// Visible negative points as `(point index, position)`.
    pub fn visible_negatives(&self) -> impl Iterator<Item = (usize, Vec2)> + '_ {
        self.visible().filter(|(i, _)| !self.positive[*i])
    }

    fn visible(&self) -> impl Iterator<Item = (usize, Vec2)> + '_ {
        self.positions
            .iter()
            .enumerate()
            .filter(|(i, _)| !self.behind_camera[*i])
            .map(|(i, p)| (i, *p))
    }

    /// Uniformly scales positions and dot radius.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            positions: self.positions.iter().map(|p| p * factor).collect(),
            dot_radius_px: self.dot_radius_px * factor,
            ..self.clone()
        }
    }
}

/// Projects every point of `points`; `mask[i]` marks the positive set.
pub fn project_masked(points: &[Vec3], vp: &Viewpoint, viewport: &Viewport, mask: &[bool]) -> ProjectedScene {
    debug_assert_eq!(points.len(), mask.len());
    let camera = Camera::new(vp, viewport);
    let mut positions = Vec::with_capacity(points.len());
    let mut behind = Vec::with_capacity(points.len());
    for p in points {
        match camera.project(p) {
            Some(px) => {
                positions.push(px);
                behind.push(false);
            }
            None => {
                positions.push(Vec2::new(f64::NAN, f64::NAN));
                behind.push(true);
            }
        }
    }
    ProjectedScene {
        positions,
        positive: mask.to_vec(),
        behind_camera: behind,
        dot_radius_px: viewport.dot_radius_px,
    }
}

/// Perspective projection of `cloud`; `positive` lists the target instance.
pub fn project(
    cloud: &PointCloud,
    vp: &Viewpoint,
    viewport: &Viewport,
    positive: &[usize],
) -> Result<ProjectedScene> {
    let mut mask = vec![false; cloud.len()];
    for &i in positive {
        *mask.get_mut(i).ok_or_else(|| {
            Error::InvalidInput(format!("positive index {i} out of range for {} points", cloud.len()))
        })? = true;
    }
    Ok(project_masked(cloud.points(), vp, viewport, &mask))
}
