//! End-to-end settings and the load → instances → recommendations chain
//! shared by the command line and the labeling service.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::cluster::{
    estimate_angular_resolution, split_instances, DbscanParams, InstanceSet, DEFAULT_EPS_FACTOR, DEFAULT_MIN_PTS,
};
use crate::error::{Error, Result};
use crate::geometry::Viewport;
use crate::io::{downsample, Dataset, DatasetManifest};
use crate::optimizer::{
    recommend_all, GridSpec, RecommendPolicy, SearchConfig, ViewpointRecommendation, DEFAULT_MIN_DISTANCE,
    DEFAULT_WEIGHT,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Gap weight `m`.
    pub m: f64,
    pub alpha_stride: f64,
    pub beta_stride: f64,
    pub viewport: Viewport,
    pub min_pts: usize,
    pub eps_factor: f64,
    pub size_cutoff: f64,
    /// Categories never recommended. `None` falls back to the manifest's
    /// background categories.
    pub excluded_categories: Option<BTreeSet<u32>>,
    pub min_distance: f64,
    pub seed: u64,
    /// Downsample clouds above this many points before anything else.
    pub max_points: Option<usize>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let grid = GridSpec::default();
        Self {
            m: DEFAULT_WEIGHT,
            alpha_stride: grid.alpha_stride,
            beta_stride: grid.beta_stride,
            viewport: Viewport::default(),
            min_pts: DEFAULT_MIN_PTS,
            eps_factor: DEFAULT_EPS_FACTOR,
            size_cutoff: 0.2,
            excluded_categories: None,
            min_distance: DEFAULT_MIN_DISTANCE,
            seed: 0,
            max_points: None,
        }
    }
}

/// Where the DBSCAN angular resolution came from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThetaSource {
    Manifest,
    Estimated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreparedInstances {
    pub instances: InstanceSet,
    /// `None` when the instances were read from an instance label file.
    pub theta: Option<(f64, ThetaSource)>,
}

impl PipelineConfig {
    pub fn search_config(&self) -> SearchConfig {
        SearchConfig {
            grid: GridSpec {
                alpha_stride: self.alpha_stride,
                beta_stride: self.beta_stride,
            },
            viewport: self.viewport,
            weight: self.m,
            min_distance: self.min_distance,
        }
    }

    pub fn policy(&self, manifest: &DatasetManifest) -> RecommendPolicy {
        RecommendPolicy {
            size_cutoff: self.size_cutoff,
            excluded_categories: self.excluded_categories.clone().unwrap_or_else(|| manifest.background()),
        }
    }

    /// Checks every setting before any work starts.
    pub fn validate(&self) -> Result<()> {
        self.search_config().validate()?;
        DbscanParams {
            theta: 1.0,
            min_pts: self.min_pts,
            eps_factor: self.eps_factor,
        }
        .validate()?;
        if !(self.size_cutoff > 0.0 && self.size_cutoff <= 1.0) {
            return Err(Error::Domain(format!("size cutoff must lie in (0, 1], got {}", self.size_cutoff)));
        }
        if self.max_points == Some(0) {
            return Err(Error::Domain("max points must be at least 1".into()));
        }
        Ok(())
    }

    /// Applies `max_points` downsampling to a freshly loaded dataset.
    pub fn reduce(&self, mut dataset: Dataset) -> Result<Dataset> {
        if let Some(n) = self.max_points {
            if dataset.cloud.len() > n {
                let (cloud, idx) = downsample(&dataset.cloud, n, self.seed)?;
                log::info!("downsampled {} to {} points", dataset.cloud.len(), cloud.len());
                dataset.ground_truth = dataset.ground_truth.map(|gt| idx.iter().map(|&i| gt[i]).collect());
                dataset.cloud = cloud;
            }
        }
        Ok(dataset)
    }
}

/// Instances from the instance label file if there is one, otherwise by
/// clustering the semantic labels.
pub fn prepare_instances(dataset: &Dataset, config: &PipelineConfig) -> Result<PreparedInstances> {
    let cloud = &dataset.cloud;
    if let (Some(sem), Some(inst)) = (cloud.semantic_labels(), cloud.instance_labels()) {
        return Ok(PreparedInstances {
            instances: InstanceSet::from_labels(sem, inst)?,
            theta: None,
        });
    }
    cluster_dataset(dataset, config)
}

/// Clusters the semantic labels, ignoring any instance label file.
pub fn cluster_dataset(dataset: &Dataset, config: &PipelineConfig) -> Result<PreparedInstances> {
    let cloud = &dataset.cloud;
    if cloud.semantic_labels().is_none() {
        return Err(Error::InvalidInput(format!(
            "dataset {} has no semantic labels",
            dataset.manifest.name
        )));
    }
    let (theta, source) = match dataset.manifest.angular_resolution {
        Some(t) => {
            log::info!("angular resolution {t} taken from the manifest, estimation skipped");
            (t, ThetaSource::Manifest)
        }
        None => {
            let t = estimate_angular_resolution(cloud)?.theta;
            log::info!("estimated angular resolution {t}");
            (t, ThetaSource::Estimated)
        }
    };
    let params = DbscanParams {
        theta,
        min_pts: config.min_pts,
        eps_factor: config.eps_factor,
    };
    Ok(PreparedInstances {
        instances: split_instances(cloud, &params, &dataset.manifest.background())?,
        theta: Some((theta, source)),
    })
}

pub fn recommend_dataset(
    dataset: &Dataset,
    instances: &InstanceSet,
    config: &PipelineConfig,
) -> Result<Vec<ViewpointRecommendation>> {
    recommend_all(
        &dataset.cloud,
        instances,
        &config.search_config(),
        &config.policy(&dataset.manifest),
    )
}
