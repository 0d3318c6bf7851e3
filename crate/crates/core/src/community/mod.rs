//! Producers, members and the hourly shared-energy simulation.
//!
//! Shared energy is community production consumed inside the community in
//! the same hour, either directly or after passing through storage. All
//! members are pooled into one load and all producers' batteries into one
//! store.

mod dispatch;
mod report;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

pub use dispatch::{dispatch_step, Storage, StepOutcome};
pub use report::{write_trace_csv, AverageDay, HourTrace, SharingReport, SharingSummary, TRACE_CSV_HEADER};

pub const DEFAULT_STORAGE_EFFICIENCY: f64 = 0.9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CommunityError {
    #[error("state of charge {soc} outside [0, {capacity}]")]
    SocOutOfRange { soc: f64, capacity: f64 },
    #[error("energy inputs must be finite and non-negative")]
    InvalidEnergy,
    #[error("member `{consumer_id}` has {found} hours, horizon is {expected}")]
    HorizonMismatch { consumer_id: String, expected: usize, found: usize },
    #[error("producer `{producer_id}`: {reason}")]
    InvalidProducer { producer_id: String, reason: String },
    #[error("member `{0}` has a negative or non-finite reading")]
    InvalidSeries(String),
    #[error("horizon must be at least one hour")]
    EmptyHorizon,
    #[error("month-aware production profile needs a start date")]
    MissingStartDate,
}

impl CommunityError {
    pub fn kind(&self) -> &'static str {
        match self {
            Self::SocOutOfRange { .. } => "SocOutOfRange",
            Self::InvalidEnergy => "InvalidEnergy",
            Self::HorizonMismatch { .. } => "HorizonMismatch",
            Self::InvalidProducer { .. } => "InvalidProducer",
            Self::InvalidSeries(_) => "InvalidSeries",
            Self::EmptyHorizon => "EmptyHorizon",
            Self::MissingStartDate => "MissingStartDate",
        }
    }
}

// JSON has no infinity; an unlimited power limit is written as `null`.
fn ser_limit<S: Serializer>(value: &f64, s: S) -> Result<S::Ok, S::Error> {
    if value.is_finite() { s.serialize_f64(*value) } else { s.serialize_none() }
}

fn de_limit<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
}

/// A solar producer with optional storage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProducerSpec {
    pub producer_id: String,
    /// Peak power, kW.
    pub p_max: f64,
    /// Mean production per hour of day (24 values), or per (month, hour) (288 values), kWh.
    pub avg_profile: Vec<f64>,
    pub storage_capacity: f64,
    /// Round-trip, in (0, 1].
    pub storage_efficiency: f64,
    #[serde(serialize_with = "ser_limit", deserialize_with = "de_limit")]
    pub storage_power_limit: f64,
}

impl ProducerSpec {
    /// Producer with default storage: 90% round-trip, power limit half the capacity per hour.
    pub fn new(
        producer_id: impl Into<String>,
        p_max: f64,
        avg_profile: Vec<f64>,
        storage_capacity: f64,
    ) -> Result<Self, CommunityError> {
        let spec = Self {
            producer_id: producer_id.into(),
            p_max,
            avg_profile,
            storage_capacity,
            storage_efficiency: DEFAULT_STORAGE_EFFICIENCY,
            storage_power_limit: storage_capacity / 2.0,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), CommunityError> {
        let bad = |reason: &str| CommunityError::InvalidProducer {
            producer_id: self.producer_id.clone(),
            reason: reason.to_string(),
        };
        if !(self.p_max >= 0.0 && self.p_max.is_finite()) {
            return Err(bad("p_max must be finite and non-negative"));
        }
        if self.avg_profile.len() != 24 && self.avg_profile.len() != 288 {
            return Err(bad("avg_profile must have 24 or 288 values"));
        }
        // one hour at peak power bounds hourly production
        if self.avg_profile.iter().any(|&v| !(v >= 0.0 && v <= self.p_max)) {
            return Err(bad("avg_profile values must lie in [0, p_max]"));
        }
        if !(self.storage_capacity >= 0.0 && self.storage_capacity.is_finite()) {
            return Err(bad("storage_capacity must be finite and non-negative"));
        }
        if !(self.storage_efficiency > 0.0 && self.storage_efficiency <= 1.0) {
            return Err(bad("storage_efficiency must lie in (0, 1]"));
        }
        if !(self.storage_power_limit >= 0.0) {
            return Err(bad("storage_power_limit must be non-negative"));
        }
        Ok(())
    }

    fn production_at(&self, t: usize, start: Option<NaiveDate>) -> Result<f64, CommunityError> {
        if self.avg_profile.len() == 24 {
            return Ok(self.avg_profile[t % 24]);
        }
        let start = start.ok_or(CommunityError::MissingStartDate)?;
        let date = start + chrono::Days::new((t / 24) as u64);
        Ok(self.avg_profile[(date.month0() as usize) * 24 + t % 24])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Member {
    pub consumer_id: String,
    /// Hourly consumption, kWh, one value per horizon hour.
    pub series: Vec<f64>,
    /// Cluster assigned when the member was admitted, if known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cluster: Option<usize>,
}

impl Member {
    pub fn new(consumer_id: impl Into<String>, series: Vec<f64>) -> Self {
        Self { consumer_id: consumer_id.into(), series, cluster: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommunityState {
    pub members: Vec<Member>,
    pub producers: Vec<ProducerSpec>,
    pub horizon_hours: usize,
    #[serde(default)]
    pub initial_soc: f64,
    /// Calendar date of hour 0; required only for month-aware profiles.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start_date: Option<NaiveDate>,
}

impl CommunityState {
    pub fn new(members: Vec<Member>, producers: Vec<ProducerSpec>, horizon_hours: usize) -> Self {
        Self { members, producers, horizon_hours, initial_soc: 0.0, start_date: None }
    }

    /// All producers' batteries as one store: capacities and power limits add,
    /// efficiency is the capacity-weighted mean.
    pub fn pooled_storage(&self) -> Storage {
        let capacity: f64 = self.producers.iter().map(|p| p.storage_capacity).sum();
        if capacity <= 0.0 {
            return Storage::none();
        }
        let efficiency =
            self.producers.iter().map(|p| p.storage_capacity * p.storage_efficiency).sum::<f64>() / capacity;
        let power_limit = self.producers.iter().map(|p| p.storage_power_limit).sum();
        Storage { capacity, efficiency: efficiency.min(1.0), power_limit }
    }

    /// Pooled member load per hour.
    pub fn aggregate_consumption(&self) -> Vec<f64> {
        let mut load = vec![0.0; self.horizon_hours];
        for m in &self.members {
            for (l, v) in load.iter_mut().zip(&m.series) {
                *l += v;
            }
        }
        load
    }

    pub fn validate(&self) -> Result<(), CommunityError> {
        if self.horizon_hours == 0 {
            return Err(CommunityError::EmptyHorizon);
        }
        for p in &self.producers {
            p.validate()?;
        }
        for m in &self.members {
            if m.series.len() != self.horizon_hours {
                return Err(CommunityError::HorizonMismatch {
                    consumer_id: m.consumer_id.clone(),
                    expected: self.horizon_hours,
                    found: m.series.len(),
                });
            }
            if m.series.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(CommunityError::InvalidSeries(m.consumer_id.clone()));
            }
        }
        let capacity = self.pooled_storage().capacity;
        if !(self.initial_soc >= 0.0 && self.initial_soc <= capacity) {
            return Err(CommunityError::SocOutOfRange { soc: self.initial_soc, capacity });
        }
        Ok(())
    }
}

/// Community production per hour: each producer's average profile tiled over the horizon.
pub fn expand_production(
    producers: &[ProducerSpec],
    horizon_hours: usize,
    start: Option<NaiveDate>,
) -> Result<Vec<f64>, CommunityError> {
    if horizon_hours == 0 {
        return Err(CommunityError::EmptyHorizon);
    }
    let mut series = vec![0.0; horizon_hours];
    for p in producers {
        for (t, v) in series.iter_mut().enumerate() {
            *v += p.production_at(t, start)?;
        }
    }
    Ok(series)
}

/// Runs greedy dispatch over the horizon and totals the energy flows.
pub fn simulate(state: &CommunityState) -> Result<SharingReport, CommunityError> {
    state.validate()?;
    let production = expand_production(&state.producers, state.horizon_hours, state.start_date)?;
    let consumption = state.aggregate_consumption();
    let storage = state.pooled_storage();

    let mut soc = state.initial_soc;
    let mut trace = Vec::with_capacity(state.horizon_hours);
    for (t, (&p, &c)) in production.iter().zip(&consumption).enumerate() {
        let step = dispatch_step(&storage, soc, p, c)?;
        soc = step.soc_next;
        trace.push(HourTrace::from_step(t, p, c, &step));
    }
    Ok(SharingReport::from_trace(trace))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat_producer(profile: Vec<f64>, capacity: f64) -> ProducerSpec {
        let mut p = ProducerSpec::new("p", 10.0, profile, capacity).unwrap();
        p.storage_efficiency = 1.0;
        p.storage_power_limit = f64::INFINITY;
        p
    }

    #[test]
    fn expand_no_sun() {
        let p = flat_producer(vec![0.0; 24], 0.0);
        assert_eq!(expand_production(&[p], 30, None).unwrap(), vec![0.0; 30]);
    }

    #[test]
    fn expand_is_linear_and_periodic() {
        let mut profile = vec![0.0; 24];
        profile[12] = 3.0;
        let p = flat_producer(profile, 0.0);
        let one = expand_production(std::slice::from_ref(&p), 48, None).unwrap();
        for (t, v) in one.iter().enumerate() {
            assert_eq!(*v, if t == 12 || t == 36 { 3.0 } else { 0.0 });
        }
        let two = expand_production(&[p.clone(), p], 48, None).unwrap();
        assert!(two.iter().zip(&one).all(|(a, b)| *a == 2.0 * b));
    }

    #[test]
    fn expand_month_aware() {
        let mut profile = vec![0.0; 288];
        profile[12] = 1.0; // January noon
        profile[24 + 12] = 2.0; // February noon
        let p = ProducerSpec { avg_profile: profile, ..flat_producer(vec![0.0; 24], 0.0) };
        assert_eq!(expand_production(std::slice::from_ref(&p), 48, None), Err(CommunityError::MissingStartDate));
        let start = NaiveDate::from_ymd_opt(2023, 1, 31);
        let series = expand_production(&[p], 48, start).unwrap();
        assert_eq!((series[12], series[36]), (1.0, 2.0));
    }

    #[test]
    fn three_hour_golden() {
        let mut profile = vec![0.0; 24];
        profile[0] = 2.0;
        let state = CommunityState::new(vec![Member::new("m", vec![1.0, 1.0, 1.0])], vec![flat_producer(profile, 2.0)], 3);
        let r = simulate(&state).unwrap();
        assert_eq!(r.shared_energy, 2.0);
        assert_eq!(r.self_sufficiency, 2.0 / 3.0);
        let t = &r.hourly_trace;
        assert_eq!((t[0].direct_use, t[0].charge, t[0].soc_end), (1.0, 1.0, 1.0));
        assert_eq!((t[1].discharge, t[1].soc_end, t[1].shared), (1.0, 0.0, 1.0));
        assert_eq!((t[2].imported, t[2].shared), (1.0, 0.0));
    }

    #[test]
    fn zero_producers() {
        let state = CommunityState::new(vec![Member::new("m", vec![1.0, 2.0])], vec![], 2);
        let r = simulate(&state).unwrap();
        assert_eq!((r.shared_energy, r.imported, r.self_consumption_ratio), (0.0, 3.0, 0.0));
    }

    #[test]
    fn perfect_match_without_storage() {
        let profile: Vec<f64> = (0..24).map(|h| (h % 5) as f64).collect();
        let state = CommunityState::new(vec![Member::new("m", profile.clone())], vec![flat_producer(profile, 0.0)], 24);
        let r = simulate(&state).unwrap();
        assert_eq!(r.shared_energy, r.total_production);
        assert_eq!((r.exported, r.imported), (0.0, 0.0));
        assert_eq!(r.self_consumption_ratio, 1.0);
    }

    #[test]
    fn validation_errors() {
        let state = CommunityState::new(vec![Member::new("m", vec![1.0])], vec![], 2);
        assert!(matches!(simulate(&state), Err(CommunityError::HorizonMismatch { expected: 2, found: 1, .. })));
        let state = CommunityState::new(vec![Member::new("m", vec![-1.0])], vec![], 1);
        assert_eq!(simulate(&state), Err(CommunityError::InvalidSeries("m".into())));
        let mut state = CommunityState::new(vec![], vec![flat_producer(vec![0.0; 24], 1.0)], 1);
        state.initial_soc = 2.0;
        assert!(matches!(simulate(&state), Err(CommunityError::SocOutOfRange { .. })));
        assert!(matches!(
            ProducerSpec::new("x", 1.0, vec![2.0; 24], 0.0),
            Err(CommunityError::InvalidProducer { .. })
        ));
        assert!(matches!(ProducerSpec::new("x", 1.0, vec![0.0; 5], 0.0), Err(CommunityError::InvalidProducer { .. })));
    }

    #[test]
    fn pooled_storage_weights_efficiency() {
        let mut a = ProducerSpec::new("a", 1.0, vec![0.0; 24], 1.0).unwrap();
        a.storage_efficiency = 1.0;
        let mut b = ProducerSpec::new("b", 1.0, vec![0.0; 24], 3.0).unwrap();
        b.storage_efficiency = 0.8;
        let s = CommunityState::new(vec![], vec![a, b], 1).pooled_storage();
        assert_eq!(s.capacity, 4.0);
        assert!((s.efficiency - 0.85).abs() < 1e-12);
        assert_eq!(s.power_limit, 2.0);
    }

    #[test]
    fn infinite_power_limit_survives_json() {
        let p = flat_producer(vec![0.0; 24], 1.0);
        let text = crate::json::to_canonical_string(&p).unwrap();
        assert!(text.contains("\"storage_power_limit\": null"));
        let back: ProducerSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(back, p);
    }
}
