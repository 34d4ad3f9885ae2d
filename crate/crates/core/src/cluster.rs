//! Instance extraction from semantic labels with range-adaptive DBSCAN.
//!
//! LiDAR point density falls off with range, so the neighbourhood radius of
//! a point grows with its distance from the sensor origin:
//! `eps(p) = eps_factor · |p| · θ`, where `θ` is the angular resolution of
//! the scanner. When `θ` is unknown it is estimated as the median, over all
//! points, of the nearest-neighbour chord angle `|p − q| / |p|`.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{PointCloud, Vec3};
use crate::spatial::KdTree;

/// Category id reserved for points without a label.
pub const UNLABELED: u32 = 0;

pub const DEFAULT_MIN_PTS: usize = 10;
pub const DEFAULT_EPS_FACTOR: f64 = 100.0;

#[derive(Debug, Clone, PartialEq)]
pub struct AngularResolution {
    pub theta: f64,
    /// Per-point chord angles, in point order over the usable points.
    pub per_point_theta: Option<Vec<f64>>,
}

/// Median nearest-neighbour chord angle; points at the origin are skipped
/// and even counts take the lower median.
pub fn estimate_angular_resolution(cloud: &PointCloud) -> Result<AngularResolution> {
    let usable: Vec<usize> = (0..cloud.len()).filter(|&i| cloud.points()[i] != Vec3::zeros()).collect();
    if usable.len() < 2 {
        return Err(Error::Domain(format!(
            "angular resolution needs at least 2 points off the origin, got {}",
            usable.len()
        )));
    }
    let points = cloud.points();
    let tree = KdTree::with_indices(points, usable.clone());
    let per_point: Vec<f64> = usable
        .iter()
        .map(|&i| {
            let (_, d2) = tree.nearest_excluding(&points[i], Some(i)).expect("at least two points");
            d2.sqrt() / points[i].norm()
        })
        .collect();
    let mut sorted = per_point.clone();
    sorted.sort_unstable_by(f64::total_cmp);
    let theta = sorted[(sorted.len() - 1) / 2];
    if !(theta > 0.0 && theta.is_finite()) {
        return Err(Error::Domain(format!(
            "estimated angular resolution {theta} is not positive (duplicate points?)"
        )));
    }
    Ok(AngularResolution {
        theta,
        per_point_theta: Some(per_point),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DbscanParams {
    pub theta: f64,
    pub min_pts: usize,
    pub eps_factor: f64,
}

impl DbscanParams {
    pub fn new(theta: f64) -> Self {
        Self {
            theta,
            min_pts: DEFAULT_MIN_PTS,
            eps_factor: DEFAULT_EPS_FACTOR,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.theta > 0.0 && self.theta.is_finite()) {
            return Err(Error::Domain(format!("theta must be positive, got {}", self.theta)));
        }
        if self.min_pts == 0 {
            return Err(Error::Domain("min_pts must be at least 1".into()));
        }
        if !(self.eps_factor > 0.0 && self.eps_factor.is_finite()) {
            return Err(Error::Domain(format!("eps factor must be positive, got {}", self.eps_factor)));
        }
        Ok(())
    }

    /// Neighbourhood radius of a point.
    #[inline]
    pub fn eps(&self, p: &Vec3) -> f64 {
        self.eps_factor * p.norm() * self.theta
    }
}

/// DBSCAN where each query point uses its own radius [`DbscanParams::eps`].
///
/// A point is core when its neighbourhood (itself included) holds at least
/// `min_pts` points. Clusters are seeded in ascending point order, so the
/// result is deterministic. Returns a cluster id per point, `None` for noise.
pub fn adaptive_dbscan(points: &[Vec3], params: &DbscanParams) -> Result<Vec<Option<usize>>> {
    params.validate()?;
    let tree = KdTree::new(points);
    let core: Vec<bool> = points
        .iter()
        .map(|p| tree.count_within(p, params.eps(p)) >= params.min_pts)
        .collect();

    let mut labels: Vec<Option<usize>> = vec![None; points.len()];
    let mut next = 0;
    let mut queue = Vec::new();
    let mut neighbours = Vec::new();
    for seed in 0..points.len() {
        if labels[seed].is_some() || !core[seed] {
            continue;
        }
        let cluster = next;
        next += 1;
        labels[seed] = Some(cluster);
        queue.push(seed);
        while let Some(q) = queue.pop() {
            tree.within(&points[q], params.eps(&points[q]), &mut neighbours);
            neighbours.sort_unstable();
            for &x in &neighbours {
                if labels[x].is_none() {
                    labels[x] = Some(cluster);
                    if core[x] {
                        queue.push(x);
                    }
                }
            }
        }
    }
    Ok(labels)
}

/// A labelled group of points: the unit a lasso selects.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Instance {
    pub category: u32,
    /// Unique across the whole cloud, starting at 1.
    pub id: u32,
    pub points: Vec<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceSet {
    pub instances: Vec<Instance>,
    pub noise: Vec<usize>,
}

impl InstanceSet {
    /// Per-point instance ids, 0 for noise or unclustered points.
    pub fn point_ids(&self, n: usize) -> Vec<u32> {
        let mut ids = vec![0; n];
        for inst in &self.instances {
            for &p in &inst.points {
                ids[p] = inst.id;
            }
        }
        ids
    }

    pub fn get(&self, id: u32) -> Option<&Instance> {
        self.instances.iter().find(|i| i.id == id)
    }

    /// Groups points by `(semantic label, instance label)`. Instance label 0
    /// marks noise; unlabeled points are skipped. Instance ids are taken
    /// from the file as long as they are unique across categories.
    pub fn from_labels(semantic: &[u32], instance: &[u32]) -> Result<Self> {
        if semantic.len() != instance.len() {
            return Err(Error::InvalidInput(format!(
                "{} semantic labels but {} instance labels",
                semantic.len(),
                instance.len()
            )));
        }
        let mut groups: BTreeMap<u32, (u32, Vec<usize>)> = BTreeMap::new();
        let mut noise = Vec::new();
        for (i, (&cat, &inst)) in semantic.iter().zip(instance).enumerate() {
            if cat == UNLABELED {
                continue;
            }
            if inst == 0 {
                noise.push(i);
                continue;
            }
            let entry = groups.entry(inst).or_insert((cat, Vec::new()));
            if entry.0 != cat {
                return Err(Error::InvalidInput(format!(
                    "instance {inst} mixes categories {} and {cat}",
                    entry.0
                )));
            }
            entry.1.push(i);
        }
        Ok(Self {
            instances: groups
                .into_iter()
                .map(|(id, (category, points))| Instance { category, id, points })
                .collect(),
            noise,
        })
    }
}

/// Clusters each semantic category on its own. Background categories become
/// a single instance each; unlabeled points are left out entirely.
pub fn split_instances(
    cloud: &PointCloud,
    params: &DbscanParams,
    background: &BTreeSet<u32>,
) -> Result<InstanceSet> {
    params.validate()?;
    let labels = cloud
        .semantic_labels()
        .ok_or_else(|| Error::InvalidInput("instance splitting needs semantic labels".into()))?;
    let mut by_category: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for (i, &c) in labels.iter().enumerate() {
        if c != UNLABELED {
            by_category.entry(c).or_default().push(i);
        }
    }

    let job = |(&category, members): (&u32, &Vec<usize>)| -> Result<(u32, Vec<Vec<usize>>, Vec<usize>)> {
        if background.contains(&category) {
            return Ok((category, vec![members.clone()], Vec::new()));
        }
        let pts: Vec<Vec3> = members.iter().map(|&i| cloud.points()[i]).collect();
        let ids = adaptive_dbscan(&pts, params)?;
        let n_clusters = ids.iter().flatten().max().map_or(0, |m| m + 1);
        let mut clusters = vec![Vec::new(); n_clusters];
        let mut noise = Vec::new();
        for (local, id) in ids.into_iter().enumerate() {
            match id {
                Some(c) => clusters[c].push(members[local]),
                None => noise.push(members[local]),
            }
        }
        Ok((category, clusters, noise))
    };

    #[cfg(feature = "parallel")]
    let results: Vec<_> = {
        use rayon::prelude::*;
        let jobs: Vec<_> = by_category.iter().collect();
        jobs.into_par_iter().map(job).collect::<Result<_>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let results: Vec<_> = by_category.iter().map(job).collect::<Result<_>>()?;

    let mut set = InstanceSet::default();
    let mut next_id = 1u32;
    for (category, clusters, noise) in results {
        for points in clusters {
            set.instances.push(Instance {
                category,
                id: next_id,
                points,
            });
            next_id += 1;
        }
        set.noise.extend(noise);
    }
    set.noise.sort_unstable();
    Ok(set)
}
