//! Admission scoring: which cluster a candidate falls into, and how much
//! shared energy the community gains by admitting it.
//!
//! A candidate's readings are aligned to the community horizon (tiled when
//! shorter, truncated when longer, always starting at hour 0 of a day), added
//! to the pooled load, and the community is simulated with and without it.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clustering::{assign, Assignment, ClusterError, ClusterModel};
use crate::community::{simulate, CommunityError, CommunityState, Member, SharingSummary};
use crate::profiles::{build_feature_vector, ConsumerDataset, ProfileError, DEFAULT_MIN_COVERAGE};

/// Calendar anchor for members whose series carries no date.
const FALLBACK_START: (i32, u32, u32) = (2024, 1, 1);

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RecommendError {
    #[error(transparent)]
    Profile(#[from] ProfileError),
    #[error(transparent)]
    Cluster(#[from] ClusterError),
    #[error(transparent)]
    Community(#[from] CommunityError),
    #[error("candidate spans {span_hours} hours, need at least 24")]
    HorizonAlignment { span_hours: usize },
    #[error("invalid admission policy: {0}")]
    InvalidPolicy(String),
    #[error("no candidates to rank")]
    NoCandidates,
    #[error("every candidate failed to score")]
    AllCandidatesFailed(Vec<CandidateFailure>),
}

impl RecommendError {
    /// Name of the underlying error variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Self::Profile(e) => e.kind(),
            Self::Cluster(e) => e.kind(),
            Self::Community(e) => e.kind(),
            Self::HorizonAlignment { .. } => "HorizonAlignment",
            Self::InvalidPolicy(_) => "InvalidPolicy",
            Self::NoCandidates => "NoCandidates",
            Self::AllCandidatesFailed(_) => "AllCandidatesFailed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdmissionPolicy {
    /// kWh over the community horizon.
    pub min_marginal_shared: f64,
    /// Required change in self-consumption ratio; `None` disables the check.
    pub min_marginal_scr: Option<f64>,
    /// Desired member count per cluster index.
    pub target_mix: Option<BTreeMap<usize, usize>>,
    /// Relative band around `min_marginal_shared` that yields REVIEW.
    pub review_band: f64,
}

impl Default for AdmissionPolicy {
    fn default() -> Self {
        Self { min_marginal_shared: 0.0, min_marginal_scr: None, target_mix: None, review_band: 0.05 }
    }
}

impl AdmissionPolicy {
    pub fn validate(&self) -> Result<(), RecommendError> {
        if !self.min_marginal_shared.is_finite() {
            return Err(RecommendError::InvalidPolicy("min_marginal_shared must be finite".into()));
        }
        if self.min_marginal_scr.is_some_and(f64::is_nan) {
            return Err(RecommendError::InvalidPolicy("min_marginal_scr must be a number".into()));
        }
        if !(self.review_band >= 0.0 && self.review_band.is_finite()) {
            return Err(RecommendError::InvalidPolicy("review_band must be finite and non-negative".into()));
        }
        Ok(())
    }

    /// `(lower, upper)` shared-energy thresholds: REJECT below `lower`,
    /// ADMIT-eligible at or above `upper`.
    fn shared_band(&self) -> (f64, f64) {
        let a = self.min_marginal_shared * (1.0 - self.review_band);
        let b = self.min_marginal_shared * (1.0 + self.review_band);
        (a.min(b), a.max(b))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Decision {
    Admit,
    Reject,
    Review,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub candidate_id: String,
    pub cluster: Assignment,
    #[serde(rename = "marginal_shared_kwh")]
    pub marginal_shared: f64,
    pub marginal_scr: f64,
    /// 1 when the candidate's cluster is under its target count, 0 when at
    /// or over it, 0.5 without a target mix.
    pub mix_fit: f64,
    pub decision: Decision,
    pub baseline: SharingSummary,
    pub with_candidate: SharingSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateFailure {
    pub candidate_id: String,
    pub error: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ranking {
    pub ranked: Vec<Recommendation>,
    pub failures: Vec<CandidateFailure>,
}

/// Candidate readings laid out over `horizon` hours from hour 0 of its first day.
pub fn align_to_horizon(candidate: &ConsumerDataset, horizon: usize) -> Result<Vec<f64>, RecommendError> {
    let span_hours = candidate.span_hours();
    if span_hours < 24 {
        return Err(RecommendError::HorizonAlignment { span_hours });
    }
    let own = candidate.day_aligned_series();
    Ok(own.iter().copied().cycle().take(horizon).collect())
}

/// Copy of `state` with one more member.
pub fn with_member(state: &CommunityState, member: Member) -> CommunityState {
    let mut next = state.clone();
    next.members.push(member);
    next
}

/// Baseline work shared by every candidate scored against one community.
pub struct Scorer<'a> {
    state: &'a CommunityState,
    model: &'a ClusterModel,
    policy: &'a AdmissionPolicy,
    baseline: SharingSummary,
    cluster_counts: BTreeMap<usize, usize>,
}

impl<'a> Scorer<'a> {
    pub fn new(
        state: &'a CommunityState,
        model: &'a ClusterModel,
        policy: &'a AdmissionPolicy,
    ) -> Result<Self, RecommendError> {
        policy.validate()?;
        model.validate()?;
        let baseline = simulate(state)?.summary();
        let cluster_counts = if policy.target_mix.is_some() { member_clusters(state, model) } else { BTreeMap::new() };
        Ok(Self { state, model, policy, baseline, cluster_counts })
    }

    pub fn baseline(&self) -> &SharingSummary {
        &self.baseline
    }

    /// The member a candidate would become, with its cluster recorded.
    pub fn candidate_member(&self, candidate: &ConsumerDataset) -> Result<(Member, Assignment), RecommendError> {
        let profile =
            build_feature_vector(candidate, self.model.layout, self.model.normalization, DEFAULT_MIN_COVERAGE)?;
        let cluster = assign(self.model, &profile)?;
        let series = align_to_horizon(candidate, self.state.horizon_hours)?;
        let member = Member { consumer_id: candidate.consumer_id.clone(), series, cluster: Some(cluster.cluster_index) };
        Ok((member, cluster))
    }

    pub fn score(&self, candidate: &ConsumerDataset) -> Result<Recommendation, RecommendError> {
        let (member, cluster) = self.candidate_member(candidate)?;
        let with_candidate = simulate(&with_member(self.state, member))?.summary();
        let marginal_shared = with_candidate.shared_energy - self.baseline.shared_energy;
        let marginal_scr = with_candidate.self_consumption_ratio - self.baseline.self_consumption_ratio;

        let under_target = self.policy.target_mix.as_ref().map(|mix| {
            let target = mix.get(&cluster.cluster_index).copied().unwrap_or(0);
            self.cluster_counts.get(&cluster.cluster_index).copied().unwrap_or(0) < target
        });
        let mix_fit = match under_target {
            None => 0.5,
            Some(true) => 1.0,
            Some(false) => 0.0,
        };

        let decision = decide(self.policy, marginal_shared, marginal_scr, under_target);

        Ok(Recommendation {
            candidate_id: candidate.consumer_id.clone(),
            cluster,
            marginal_shared,
            marginal_scr,
            mix_fit,
            decision,
            baseline: self.baseline,
            with_candidate,
        })
    }
}

/// Applies the policy thresholds. `under_target` is `None` without a target mix.
pub fn decide(policy: &AdmissionPolicy, marginal_shared: f64, marginal_scr: f64, under_target: Option<bool>) -> Decision {
    let (lower, upper) = policy.shared_band();
    let scr_ok = policy.min_marginal_scr.is_none_or(|min| marginal_scr >= min);
    if marginal_shared < lower || under_target == Some(false) {
        Decision::Reject
    } else if marginal_shared >= upper && scr_ok && under_target != Some(false) {
        Decision::Admit
    } else {
        Decision::Review
    }
}

/// Members per cluster. Members admitted without a recorded cluster are
/// classified from their series; ones that cannot be profiled are not counted.
fn member_clusters(state: &CommunityState, model: &ClusterModel) -> BTreeMap<usize, usize> {
    let (y, m, d) = FALLBACK_START;
    let start = state.start_date.unwrap_or_else(|| NaiveDate::from_ymd_opt(y, m, d).expect("valid date"));
    let mut counts = BTreeMap::new();
    for member in &state.members {
        let cluster = member.cluster.or_else(|| {
            let ds = ConsumerDataset::from_series(member.consumer_id.clone(), start, &member.series).ok()?;
            let fv = build_feature_vector(&ds, model.layout, model.normalization, 0.0).ok()?;
            assign(model, &fv).ok().map(|a| a.cluster_index)
        });
        if let Some(c) = cluster {
            *counts.entry(c).or_default() += 1;
        }
    }
    counts
}

pub fn score_candidate(
    state: &CommunityState,
    model: &ClusterModel,
    candidate: &ConsumerDataset,
    policy: &AdmissionPolicy,
) -> Result<Recommendation, RecommendError> {
    Scorer::new(state, model, policy)?.score(candidate)
}

/// Ranking order: marginal shared energy descending, then mix fit
/// descending, then candidate id ascending.
pub fn compare_recommendations(a: &Recommendation, b: &Recommendation) -> Ordering {
    b.marginal_shared
        .total_cmp(&a.marginal_shared)
        .then_with(|| b.mix_fit.total_cmp(&a.mix_fit))
        .then_with(|| a.candidate_id.cmp(&b.candidate_id))
}

/// Scores every candidate against the same baseline and sorts them.
///
/// A candidate that fails to score is reported in `failures`; the call only
/// fails when all of them do.
pub fn rank_candidates(
    state: &CommunityState,
    model: &ClusterModel,
    candidates: &[ConsumerDataset],
    policy: &AdmissionPolicy,
) -> Result<Ranking, RecommendError> {
    if candidates.is_empty() {
        return Err(RecommendError::NoCandidates);
    }
    let scorer = Scorer::new(state, model, policy)?;
    let results: Vec<Result<Recommendation, RecommendError>> = candidates.par_iter().map(|c| scorer.score(c)).collect();

    let mut ranked = Vec::new();
    let mut failures = Vec::new();
    for (candidate, result) in candidates.iter().zip(results) {
        match result {
            Ok(r) => ranked.push(r),
            Err(e) => failures.push(CandidateFailure {
                candidate_id: candidate.consumer_id.clone(),
                error: e.kind().to_string(),
                message: e.to_string(),
            }),
        }
    }
    if ranked.is_empty() {
        return Err(RecommendError::AllCandidatesFailed(failures));
    }
    ranked.sort_by(compare_recommendations);
    Ok(Ranking { ranked, failures })
}
