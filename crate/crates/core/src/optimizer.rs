//! Grid search over orbit angles for the view with the easiest lasso.

use std::collections::BTreeSet;
use std::f64::consts::PI;

use nalgebra::{Matrix3, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::cluster::{Instance, InstanceSet};
use crate::error::{Error, Result};
use crate::geometry::{project_masked, Aabb, PointCloud, Vec3, Viewpoint, Viewport};
use crate::lasso::{estimate_lasso_id, Difficulty, LassoCostEstimate};

pub const DEFAULT_STRIDE: f64 = PI / 12.0;
pub const DEFAULT_WEIGHT: f64 = 1.0;
pub const DEFAULT_MIN_DISTANCE: f64 = 1.0;
/// Camera distance as a multiple of the instance's bounding-box diagonal.
pub const DISTANCE_FACTOR: f64 = 1.5;

/// Orbit grid: `alpha` over (−π, π] and `beta` over [0, π], both sampled at
/// multiples of `stride`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub alpha_stride: f64,
    pub beta_stride: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self::uniform(DEFAULT_STRIDE)
    }
}

fn steps(domain: f64, stride: f64) -> Result<usize> {
    if !(stride > 0.0 && stride.is_finite()) {
        return Err(Error::Domain(format!("grid stride must be positive, got {stride}")));
    }
    let n = (domain / stride).round();
    if n < 1.0 || ((n * stride - domain) / domain).abs() > 1e-9 {
        return Err(Error::Domain(format!("grid stride {stride} does not divide {domain}")));
    }
    Ok(n as usize)
}

impl GridSpec {
    pub fn uniform(stride: f64) -> Self {
        Self {
            alpha_stride: stride,
            beta_stride: stride,
        }
    }

    pub fn validate(&self) -> Result<()> {
        steps(2.0 * PI, self.alpha_stride)?;
        steps(PI, self.beta_stride)?;
        Ok(())
    }

    /// `−π + j·stride` for `j = 1..=n`; the last value is exactly π.
    pub fn alphas(&self) -> Result<Vec<f64>> {
        let n = steps(2.0 * PI, self.alpha_stride)?;
        Ok((1..=n)
            .map(|j| if j == n { PI } else { -PI + j as f64 * self.alpha_stride })
            .collect())
    }

    /// `i·stride` for `i = 0..=n`; the last value is exactly π.
    pub fn betas(&self) -> Result<Vec<f64>> {
        let n = steps(PI, self.beta_stride)?;
        Ok((0..=n)
            .map(|i| if i == n { PI } else { i as f64 * self.beta_stride })
            .collect())
    }

    /// All `(alpha, beta)` pairs, beta-major with alpha ascending.
    pub fn candidates(&self) -> Result<Vec<(f64, f64)>> {
        let alphas = self.alphas()?;
        Ok(self
            .betas()?
            .into_iter()
            .flat_map(|b| alphas.iter().map(move |&a| (a, b)))
            .collect())
    }

    pub fn len(&self) -> Result<usize> {
        Ok(steps(2.0 * PI, self.alpha_stride)? * (steps(PI, self.beta_stride)? + 1))
    }
}

/// Mean of `points`.
pub fn gravity_center(points: &[Vec3]) -> Result<Vec3> {
    if points.is_empty() {
        return Err(Error::InvalidInput("gravity center of an empty point set".into()));
    }
    Ok(points.iter().sum::<Vec3>() / points.len() as f64)
}

/// `1.5 ×` the bounding-box diagonal, or `min_distance` when that is larger.
pub fn camera_distance(points: &[Vec3], min_distance: f64) -> Result<f64> {
    let diag = Aabb::from_points(points.iter().copied())
        .ok_or_else(|| Error::InvalidInput("camera distance of an empty point set".into()))?
        .diagonal();
    Ok((DISTANCE_FACTOR * diag).max(min_distance))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub grid: GridSpec,
    pub viewport: Viewport,
    /// Weight `m` of the gap terms.
    pub weight: f64,
    pub min_distance: f64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            grid: GridSpec::default(),
            viewport: Viewport::default(),
            weight: DEFAULT_WEIGHT,
            min_distance: DEFAULT_MIN_DISTANCE,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        self.viewport.validate()?;
        if !(self.weight > 0.0 && self.weight.is_finite()) {
            return Err(Error::Domain(format!("gap weight must be positive, got {}", self.weight)));
        }
        if !(self.min_distance > 0.0 && self.min_distance.is_finite()) {
            return Err(Error::Domain(format!(
                "minimum camera distance must be positive, got {}",
                self.min_distance
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateScore {
    pub viewpoint: Viewpoint,
    pub estimate: LassoCostEstimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub viewpoint: Viewpoint,
    pub difficulty: Difficulty,
    /// Negatives inside the positive hull at the chosen view.
    pub interior_negatives: usize,
    pub feasible: bool,
    pub candidates: usize,
}

/// Target and distance used for every candidate of one instance.
pub fn orbit_frame(cloud: &PointCloud, positive: &[usize], min_distance: f64) -> Result<(Vec3, f64)> {
    if positive.is_empty() {
        return Err(Error::InvalidInput("target instance has no points".into()));
    }
    let mut pts = Vec::with_capacity(positive.len());
    for &i in positive {
        pts.push(*cloud.points().get(i).ok_or_else(|| {
            Error::InvalidInput(format!("positive index {i} out of range for {} points", cloud.len()))
        })?);
    }
    Ok((gravity_center(&pts)?, camera_distance(&pts, min_distance)?))
}

/// Scores every grid candidate, in [`GridSpec::candidates`] order.
pub fn evaluate_grid(cloud: &PointCloud, positive: &[usize], config: &SearchConfig) -> Result<Vec<CandidateScore>> {
    config.validate()?;
    let (target, distance) = orbit_frame(cloud, positive, config.min_distance)?;
    let mut mask = vec![false; cloud.len()];
    for &i in positive {
        mask[i] = true;
    }
    let viewpoints = config
        .grid
        .candidates()?
        .into_iter()
        .map(|(a, b)| Viewpoint::new(target, a, b, distance))
        .collect::<Result<Vec<_>>>()?;
    let score = |vp: &Viewpoint| CandidateScore {
        viewpoint: *vp,
        estimate: estimate_lasso_id(&project_masked(cloud.points(), vp, &config.viewport, &mask), config.weight),
    };

    #[cfg(feature = "parallel")]
    let scores = {
        use rayon::prelude::*;
        viewpoints.par_iter().map(score).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let scores = viewpoints.iter().map(score).collect();
    Ok(scores)
}

/// Relative difference under which two difficulties count as tied.
pub const TIE_REL_TOL: f64 = 1e-9;

/// Index of the best candidate: the earliest one whose finite difficulty is
/// within [`TIE_REL_TOL`] of the minimum. When nothing is feasible, the
/// fewest negatives inside the positive hull wins.
pub fn select_best(scores: &[CandidateScore]) -> Option<usize> {
    let min = scores
        .iter()
        .filter_map(|s| s.estimate.difficulty.value())
        .min_by(f64::total_cmp);
    if let Some(min) = min {
        let limit = min + TIE_REL_TOL * min.abs();
        return scores
            .iter()
            .position(|s| s.estimate.difficulty.value().is_some_and(|v| v <= limit));
    }
    scores
        .iter()
        .enumerate()
        .min_by_key(|(i, s)| (s.estimate.interior_negatives, *i))
        .map(|(i, _)| i)
}

/// The easiest grid viewpoint for lassoing `positive` out of `cloud`.
pub fn grid_search_viewpoint(cloud: &PointCloud, positive: &[usize], config: &SearchConfig) -> Result<SearchResult> {
    let scores = evaluate_grid(cloud, positive, config)?;
    let best = select_best(&scores).ok_or_else(|| Error::Domain("empty viewpoint grid".into()))?;
    let s = &scores[best];
    Ok(SearchResult {
        viewpoint: s.viewpoint,
        difficulty: s.estimate.difficulty,
        interior_negatives: s.estimate.interior_negatives,
        feasible: s.estimate.difficulty.is_feasible(),
        candidates: scores.len(),
    })
}

/// Which instances receive a recommendation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecommendPolicy {
    /// Instances holding more than this fraction of all points are skipped.
    pub size_cutoff: f64,
    pub excluded_categories: BTreeSet<u32>,
}

impl Default for RecommendPolicy {
    fn default() -> Self {
        Self {
            size_cutoff: 0.2,
            excluded_categories: BTreeSet::new(),
        }
    }
}

impl RecommendPolicy {
    pub fn admits(&self, instance: &Instance, total_points: usize) -> bool {
        !self.excluded_categories.contains(&instance.category)
            && !instance.points.is_empty()
            && (instance.points.len() as f64) <= self.size_cutoff * total_points as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewpointRecommendation {
    pub instance_id: u32,
    pub category: u32,
    pub points: usize,
    pub viewpoint: Viewpoint,
    pub difficulty: Difficulty,
    pub interior_negatives: usize,
    /// Position in the suggested labeling order, from 1.
    pub rank: usize,
    pub checked: bool,
}

/// Recommends one viewpoint per admitted instance, ordered easiest first
/// with infeasible instances last.
pub fn recommend_all(
    cloud: &PointCloud,
    instances: &InstanceSet,
    config: &SearchConfig,
    policy: &RecommendPolicy,
) -> Result<Vec<ViewpointRecommendation>> {
    config.validate()?;
    let mut recs = Vec::new();
    for inst in instances.instances.iter().filter(|i| policy.admits(i, cloud.len())) {
        let res = grid_search_viewpoint(cloud, &inst.points, config)?;
        log::debug!("instance {} -> {}", inst.id, res.difficulty);
        recs.push(ViewpointRecommendation {
            instance_id: inst.id,
            category: inst.category,
            points: inst.points.len(),
            viewpoint: res.viewpoint,
            difficulty: res.difficulty,
            interior_negatives: res.interior_negatives,
            rank: 0,
            checked: false,
        });
    }
    recs.sort_by(|a, b| a.difficulty.total_cmp(&b.difficulty).then(a.instance_id.cmp(&b.instance_id)));
    for (i, r) in recs.iter_mut().enumerate() {
        r.rank = i + 1;
    }
    Ok(recs)
}

/// Unit direction of least variance of `points`, signed so that its first
/// nonzero component is positive.
pub fn pca_third_component(points: &[Vec3]) -> Result<Vec3> {
    if points.len() < 3 {
        return Err(Error::InvalidInput(format!("PCA needs at least 3 points, got {}", points.len())));
    }
    let c = gravity_center(points)?;
    let cov = points.iter().fold(Matrix3::zeros(), |acc, p| {
        let d = p - c;
        acc + d * d.transpose()
    }) / points.len() as f64;
    let eig = SymmetricEigen::new(cov);
    let k = eig.eigenvalues.imin();
    let mut v: Vec3 = eig.eigenvectors.column(k).into_owned();
    let lead = [v.x, v.y, v.z].into_iter().find(|c| c.abs() > 1e-12).unwrap_or(1.0);
    if lead < 0.0 {
        v = -v;
    }
    Ok(v)
}

/// Camera looking along the third principal axis, at the usual distance.
pub fn pca_viewpoint(points: &[Vec3], min_distance: f64) -> Result<Viewpoint> {
    let axis = pca_third_component(points)?;
    let target = gravity_center(points)?;
    let distance = camera_distance(points, min_distance)?;
    Viewpoint::from_camera_position(target, target + axis * distance)
}
