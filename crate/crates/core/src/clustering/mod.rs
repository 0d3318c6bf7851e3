//! k-means over load-profile feature vectors.
//!
//! Fitting runs several seeded Lloyd restarts and keeps the one with the
//! lowest within-cluster sum of squares (WCSS). Each restart alternates
//!
//! 1. assign every profile to its Euclidean-nearest centroid (ties go to the
//!    lowest index),
//! 2. reseed any empty cluster at the point farthest from its centroid,
//! 3. move every centroid to the mean of its members,
//!
//! until no centroid moves more than `tolerance` or `max_iterations` is hit.

mod lloyd;
mod metrics;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::profiles::{FeatureVector, Layout, Normalization};

pub use lloyd::{fit_points, lloyd_run, nearest, squared_distance, wcss_points, PointFit};
pub use metrics::{
    adjusted_rand_index, mann_whitney_auc, roc_auc_vs_labels, silhouette, silhouette_points, ClusterAuc, RocReport,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ClusterError {
    #[error("invalid k-means configuration: {0}")]
    InvalidConfig(String),
    #[error("need at least k={k} profiles, got {n}")]
    TooFewPoints { n: usize, k: usize },
    #[error("profiles do not share one layout, normalization and length")]
    MixedLayouts,
    #[error("profile contains a non-finite value")]
    NonFiniteInput,
    #[error("profile layout does not match the model")]
    LayoutMismatch,
    #[error("expected {expected} entries, got {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("fewer than two distinct clusters are present")]
    SingleCluster,
    #[error("{profiles} profiles but {labels} labels")]
    LabelCountMismatch { profiles: usize, labels: usize },
    #[error("cluster {cluster} maps to a label with no positives or no negatives")]
    DegenerateClass { cluster: usize },
}

impl ClusterError {
    pub fn kind(&self) -> &'static str {
        match self {
            Self::InvalidConfig(_) => "InvalidConfig",
            Self::TooFewPoints { .. } => "TooFewPoints",
            Self::MixedLayouts => "MixedLayouts",
            Self::NonFiniteInput => "NonFiniteInput",
            Self::LayoutMismatch => "LayoutMismatch",
            Self::LengthMismatch { .. } => "LengthMismatch",
            Self::SingleCluster => "SingleCluster",
            Self::LabelCountMismatch { .. } => "LabelCountMismatch",
            Self::DegenerateClass { .. } => "DegenerateClass",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Init {
    /// k distinct input points drawn uniformly.
    #[serde(rename = "RANDOM_POINTS")]
    RandomPoints,
    #[default]
    #[serde(rename = "KMEANSPP")]
    KMeansPlusPlus,
}

impl std::str::FromStr for Init {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "RANDOM_POINTS" => Ok(Self::RandomPoints),
            "KMEANSPP" => Ok(Self::KMeansPlusPlus),
            other => Err(format!("unknown init `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMeansConfig {
    pub k: usize,
    pub init: Init,
    /// Largest L2 centroid displacement still counted as converged.
    pub tolerance: f64,
    pub max_iterations: usize,
    pub restarts: usize,
    pub seed: u64,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        Self { k: 3, init: Init::KMeansPlusPlus, tolerance: 1e-6, max_iterations: 300, restarts: 10, seed: 0 }
    }
}

impl KMeansConfig {
    pub fn validate(&self) -> Result<(), ClusterError> {
        if self.k == 0 {
            return Err(ClusterError::InvalidConfig("k must be at least 1".into()));
        }
        if !(self.tolerance >= 0.0) {
            return Err(ClusterError::InvalidConfig("tolerance must be non-negative".into()));
        }
        if self.max_iterations == 0 {
            return Err(ClusterError::InvalidConfig("max_iterations must be at least 1".into()));
        }
        if self.restarts == 0 {
            return Err(ClusterError::InvalidConfig("restarts must be at least 1".into()));
        }
        Ok(())
    }
}

/// A fitted model. Field order is the persisted JSON order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterModel {
    pub k: usize,
    pub layout: Layout,
    pub normalization: Normalization,
    pub tolerance: f64,
    pub seed_used: u64,
    pub wcss: f64,
    pub iterations_run: usize,
    pub converged: bool,
    pub centroids: Vec<Vec<f64>>,
}

impl ClusterModel {
    pub fn dim(&self) -> usize {
        self.centroids.first().map_or(0, Vec::len)
    }

    /// Checks the invariants a deserialized model must satisfy.
    pub fn validate(&self) -> Result<(), ClusterError> {
        if self.centroids.len() != self.k || self.k == 0 {
            return Err(ClusterError::LengthMismatch { expected: self.k, found: self.centroids.len() });
        }
        let dim = self.dim();
        if self.centroids.iter().any(|c| c.len() != dim) {
            return Err(ClusterError::MixedLayouts);
        }
        if self.centroids.iter().flatten().any(|v| !v.is_finite()) || !(self.wcss >= 0.0) {
            return Err(ClusterError::NonFiniteInput);
        }
        Ok(())
    }

    fn check_profile(&self, profile: &FeatureVector) -> Result<(), ClusterError> {
        if profile.layout != self.layout
            || profile.normalization != self.normalization
            || profile.values.len() != self.dim()
        {
            return Err(ClusterError::LayoutMismatch);
        }
        if profile.values.iter().any(|v| !v.is_finite()) {
            return Err(ClusterError::NonFiniteInput);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    #[serde(rename = "index")]
    pub cluster_index: usize,
    /// Euclidean distance to the assigned centroid.
    pub distance: f64,
}

pub fn kmeans_fit(profiles: &[FeatureVector], config: &KMeansConfig) -> Result<ClusterModel, ClusterError> {
    config.validate()?;
    let first = profiles.first().ok_or(ClusterError::TooFewPoints { n: 0, k: config.k })?;
    if profiles.iter().any(|p| {
        p.layout != first.layout || p.normalization != first.normalization || p.values.len() != first.values.len()
    }) {
        return Err(ClusterError::MixedLayouts);
    }
    let points: Vec<Vec<f64>> = profiles.iter().map(|p| p.values.clone()).collect();
    let fit = fit_points(&points, config)?;
    Ok(ClusterModel {
        k: config.k,
        layout: first.layout,
        normalization: first.normalization,
        tolerance: config.tolerance,
        seed_used: fit.seed_used,
        wcss: fit.wcss,
        iterations_run: fit.iterations_run,
        converged: fit.converged,
        centroids: fit.centroids,
    })
}

pub fn assign(model: &ClusterModel, profile: &FeatureVector) -> Result<Assignment, ClusterError> {
    model.check_profile(profile)?;
    let (cluster_index, d2) = nearest(&model.centroids, &profile.values);
    Ok(Assignment { cluster_index, distance: d2.sqrt() })
}

pub fn wcss(model: &ClusterModel, profiles: &[FeatureVector]) -> Result<f64, ClusterError> {
    profiles.iter().try_fold(0.0, |acc, p| {
        model.check_profile(p)?;
        Ok(acc + nearest(&model.centroids, &p.values).1)
    })
}
