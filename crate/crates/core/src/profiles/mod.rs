//! Hourly meter readings and the feature vectors built from them.

mod csv_io;
mod features;

use chrono::{Datelike, NaiveDate, Weekday};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use csv_io::{parse_consumption_csv, write_consumption_csv, CSV_HEADER};
pub use features::{build_feature_vector, FeatureVector, Layout, Normalization};

/// Datasets covering less than this fraction of their span are rejected by default.
pub const DEFAULT_MIN_COVERAGE: f64 = 0.8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProfileError {
    #[error("expected header `year,month,day,hour,kwh`, found `{found}`")]
    BadHeader { found: String },
    #[error("malformed row at line {0}")]
    MalformedRow(usize),
    #[error("invalid timestamp at line {0}")]
    InvalidTimestamp(usize),
    #[error("negative or non-finite energy at line {0}")]
    InvalidEnergy(usize),
    #[error("duplicate timestamp at line {0}")]
    DuplicateTimestamp(usize),
    #[error("input contains no data rows")]
    EmptyInput,
    #[error("invalid record at index {0}")]
    InvalidRecord(usize),
    #[error("duplicate timestamp for record at index {0}")]
    DuplicateRecord(usize),
    #[error("coverage {actual:.4} is below the required {required:.4}")]
    InsufficientCoverage { actual: f64, required: f64 },
    #[error("total consumption is zero")]
    ZeroConsumption,
    #[error("dataset has no records")]
    EmptyDataset,
    #[error("profile is constant and cannot be z-scored")]
    ConstantProfile,
    #[error("i/o error: {0}")]
    Io(String),
}

impl ProfileError {
    /// Variant name, used as the machine-readable error code in API bodies.
    pub fn kind(&self) -> &'static str {
        match self {
            Self::BadHeader { .. } => "BadHeader",
            Self::MalformedRow(_) => "MalformedRow",
            Self::InvalidTimestamp(_) => "InvalidTimestamp",
            Self::InvalidEnergy(_) => "InvalidEnergy",
            Self::DuplicateTimestamp(_) => "DuplicateTimestamp",
            Self::EmptyInput => "EmptyInput",
            Self::InvalidRecord(_) => "InvalidRecord",
            Self::DuplicateRecord(_) => "DuplicateRecord",
            Self::InsufficientCoverage { .. } => "InsufficientCoverage",
            Self::ZeroConsumption => "ZeroConsumption",
            Self::EmptyDataset => "EmptyDataset",
            Self::ConstantProfile => "ConstantProfile",
            Self::Io(_) => "Io",
        }
    }

    /// True for errors that stem from unreadable input rather than from a
    /// well-formed dataset that fails a domain precondition.
    pub fn is_parse_error(&self) -> bool {
        matches!(
            self,
            Self::BadHeader { .. }
                | Self::MalformedRow(_)
                | Self::InvalidTimestamp(_)
                | Self::InvalidEnergy(_)
                | Self::DuplicateTimestamp(_)
                | Self::EmptyInput
                | Self::Io(_)
        )
    }
}

/// One hourly meter reading. `kwh` is the energy consumed during `hour`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConsumptionRecord {
    pub year: i32,
    pub month: u32,
    pub day: u32,
    pub hour: u32,
    pub kwh: f64,
}

impl ConsumptionRecord {
    pub fn new(year: i32, month: u32, day: u32, hour: u32, kwh: f64) -> Self {
        Self { year, month, day, hour, kwh }
    }

    pub fn date(&self) -> Option<NaiveDate> {
        NaiveDate::from_ymd_opt(self.year, self.month, self.day)
    }

    pub fn is_valid_timestamp(&self) -> bool {
        self.hour <= 23 && self.date().is_some()
    }

    pub fn is_valid_energy(&self) -> bool {
        self.kwh.is_finite() && self.kwh >= 0.0
    }

    /// Absolute hour count since the proleptic Gregorian epoch.
    ///
    /// Panics if the date is invalid; callers validate first.
    pub fn hour_index(&self) -> i64 {
        let date = self.date().expect("validated date");
        i64::from(date.num_days_from_ce()) * 24 + i64::from(self.hour)
    }

    pub fn is_weekend(&self) -> bool {
        matches!(self.date().map(|d| d.weekday()), Some(Weekday::Sat | Weekday::Sun))
    }

    fn sort_key(&self) -> (i32, u32, u32, u32) {
        (self.year, self.month, self.day, self.hour)
    }
}

/// All readings of one consumer, sorted by timestamp.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConsumerDataset {
    pub consumer_id: String,
    records: Vec<ConsumptionRecord>,
    coverage: f64,
}

impl ConsumerDataset {
    /// Validates, sorts and wraps `records`.
    pub fn new(consumer_id: impl Into<String>, records: Vec<ConsumptionRecord>) -> Result<Self, ProfileError> {
        let mut indexed: Vec<(usize, ConsumptionRecord)> = records.into_iter().enumerate().collect();
        for &(i, r) in &indexed {
            if !r.is_valid_timestamp() || !r.is_valid_energy() {
                return Err(ProfileError::InvalidRecord(i));
            }
        }
        indexed.sort_by_key(|(i, r)| (r.sort_key(), *i));
        for pair in indexed.windows(2) {
            if pair[0].1.sort_key() == pair[1].1.sort_key() {
                return Err(ProfileError::DuplicateRecord(pair[1].0));
            }
        }
        Ok(Self::from_sorted(consumer_id.into(), indexed.into_iter().map(|(_, r)| r).collect()))
    }

    /// Builds a dataset from a contiguous hourly series starting at hour 0 of `start`.
    pub fn from_series(consumer_id: impl Into<String>, start: NaiveDate, series: &[f64]) -> Result<Self, ProfileError> {
        let records = series
            .iter()
            .enumerate()
            .map(|(t, &kwh)| {
                let date = start + chrono::Days::new((t / 24) as u64);
                ConsumptionRecord::new(date.year(), date.month(), date.day(), (t % 24) as u32, kwh)
            })
            .collect();
        Self::new(consumer_id, records)
    }

    /// `records` must already be valid, sorted and duplicate-free.
    pub(crate) fn from_sorted(consumer_id: String, records: Vec<ConsumptionRecord>) -> Self {
        let coverage = match (records.first(), records.last()) {
            (Some(first), Some(last)) => {
                let span = last.hour_index() - first.hour_index() + 1;
                records.len() as f64 / span as f64
            }
            _ => 0.0,
        };
        Self { consumer_id, records, coverage }
    }

    pub fn records(&self) -> &[ConsumptionRecord] {
        &self.records
    }

    /// Fraction of hours in `[first, last]` that carry a reading.
    pub fn coverage(&self) -> f64 {
        self.coverage
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn total_kwh(&self) -> f64 {
        self.records.iter().map(|r| r.kwh).sum()
    }

    /// Hours from the first to the last reading, inclusive.
    pub fn span_hours(&self) -> usize {
        match (self.records.first(), self.records.last()) {
            (Some(first), Some(last)) => (last.hour_index() - first.hour_index() + 1) as usize,
            _ => 0,
        }
    }

    /// Contiguous hourly series from hour 0 of the first day to hour 23 of
    /// the last day. Hours without a reading take the mean of that
    /// hour-of-day over the dataset.
    pub fn day_aligned_series(&self) -> Vec<f64> {
        let (Some(first), Some(last)) = (self.records.first(), self.records.last()) else {
            return Vec::new();
        };
        let hourly = features::hourly_means(&self.records);
        let origin = first.hour_index() - i64::from(first.hour);
        let end = last.hour_index() - i64::from(last.hour) + 24;
        let mut series: Vec<f64> = (0..(end - origin) as usize).map(|t| hourly[t % 24]).collect();
        for r in &self.records {
            series[(r.hour_index() - origin) as usize] = r.kwh;
        }
        series
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn new_sorts_and_rejects_duplicates() {
        let ds = ConsumerDataset::new(
            "c",
            vec![ConsumptionRecord::new(2023, 1, 1, 5, 1.0), ConsumptionRecord::new(2023, 1, 1, 3, 2.0)],
        )
        .unwrap();
        assert_eq!(ds.records()[0].hour, 3);
        assert!((ds.coverage() - 2.0 / 3.0).abs() < 1e-15);

        let err = ConsumerDataset::new(
            "c",
            vec![ConsumptionRecord::new(2023, 1, 1, 3, 1.0), ConsumptionRecord::new(2023, 1, 1, 3, 2.0)],
        )
        .unwrap_err();
        assert_eq!(err, ProfileError::DuplicateRecord(1));
    }

    #[test]
    fn new_rejects_bad_records() {
        let err = ConsumerDataset::new("c", vec![ConsumptionRecord::new(2023, 2, 29, 0, 1.0)]).unwrap_err();
        assert_eq!(err, ProfileError::InvalidRecord(0));
        let err = ConsumerDataset::new("c", vec![ConsumptionRecord::new(2024, 2, 29, 0, -1.0)]).unwrap_err();
        assert_eq!(err, ProfileError::InvalidRecord(0));
    }

    #[test]
    fn coverage_spans_day_boundaries() {
        let ds = ConsumerDataset::new(
            "c",
            vec![ConsumptionRecord::new(2023, 12, 31, 23, 1.0), ConsumptionRecord::new(2024, 1, 1, 0, 1.0)],
        )
        .unwrap();
        assert_eq!(ds.span_hours(), 2);
        assert_eq!(ds.coverage(), 1.0);
    }

    #[test]
    fn day_aligned_series_fills_gaps_with_hour_means() {
        let ds = ConsumerDataset::new(
            "c",
            vec![
                ConsumptionRecord::new(2023, 1, 1, 2, 4.0),
                ConsumptionRecord::new(2023, 1, 2, 2, 2.0),
                ConsumptionRecord::new(2023, 1, 2, 5, 1.0),
            ],
        )
        .unwrap();
        let series = ds.day_aligned_series();
        assert_eq!(series.len(), 48);
        assert_eq!(series[2], 4.0);
        assert_eq!(series[26], 2.0);
        assert_eq!(series[29], 1.0);
        // hour 5 on day one imputed by the hour-5 mean
        assert_eq!(series[5], 1.0);
    }

    #[test]
    fn from_series_round_trips() {
        let start = NaiveDate::from_ymd_opt(2023, 3, 1).unwrap();
        let series: Vec<f64> = (0..72).map(|t| t as f64 * 0.5).collect();
        let ds = ConsumerDataset::from_series("s", start, &series).unwrap();
        assert_eq!(ds.len(), 72);
        assert_eq!(ds.day_aligned_series(), series);
    }
}
