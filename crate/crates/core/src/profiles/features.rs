use serde::{Deserialize, Serialize};

use super::{ConsumerDataset, ConsumptionRecord, ProfileError};

/// How hourly readings are folded into a fixed-length vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum Layout {
    /// Mean per hour of day.
    #[serde(rename = "HOURLY_24")]
    Hourly24,
    /// Weekday hour means in slots 0..24, weekend hour means in 24..48.
    #[default]
    #[serde(rename = "WEEKPART_48")]
    Weekpart48,
    /// Mean per (month, hour) at `(month - 1) * 24 + hour`.
    #[serde(rename = "MONTH_HOUR_288")]
    MonthHour288,
}

impl Layout {
    pub fn len(self) -> usize {
        match self {
            Self::Hourly24 => 24,
            Self::Weekpart48 => 48,
            Self::MonthHour288 => 288,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Hourly24 => "HOURLY_24",
            Self::Weekpart48 => "WEEKPART_48",
            Self::MonthHour288 => "MONTH_HOUR_288",
        }
    }
}

impl std::str::FromStr for Layout {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "HOURLY_24" => Ok(Self::Hourly24),
            "WEEKPART_48" => Ok(Self::Weekpart48),
            "MONTH_HOUR_288" => Ok(Self::MonthHour288),
            other => Err(format!("unknown layout `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum Normalization {
    #[serde(rename = "NONE")]
    None,
    /// Scale so the vector sums to one; clusters then group by shape.
    #[default]
    #[serde(rename = "UNIT_TOTAL")]
    UnitTotal,
    /// Zero mean, unit population standard deviation.
    #[serde(rename = "ZSCORE")]
    Zscore,
}

impl Normalization {
    pub fn name(self) -> &'static str {
        match self {
            Self::None => "NONE",
            Self::UnitTotal => "UNIT_TOTAL",
            Self::Zscore => "ZSCORE",
        }
    }
}

impl std::str::FromStr for Normalization {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "NONE" => Ok(Self::None),
            "UNIT_TOTAL" => Ok(Self::UnitTotal),
            "ZSCORE" => Ok(Self::Zscore),
            other => Err(format!("unknown normalization `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub consumer_id: String,
    pub values: Vec<f64>,
    pub layout: Layout,
    pub normalization: Normalization,
}

impl FeatureVector {
    /// Wraps raw values.
    ///
    /// The length is not checked against `layout`; clustering checks that all
    /// vectors agree with each other.
    pub fn new(consumer_id: impl Into<String>, values: Vec<f64>, layout: Layout, normalization: Normalization) -> Self {
        Self { consumer_id: consumer_id.into(), values, layout, normalization }
    }
}

/// Per-hour mean over all records; hours never observed take the overall mean.
pub(crate) fn hourly_means(records: &[ConsumptionRecord]) -> [f64; 24] {
    let mut sums = [0.0; 24];
    let mut counts = [0usize; 24];
    for r in records {
        sums[r.hour as usize] += r.kwh;
        counts[r.hour as usize] += 1;
    }
    let overall = if records.is_empty() {
        0.0
    } else {
        records.iter().map(|r| r.kwh).sum::<f64>() / records.len() as f64
    };
    let mut means = [0.0; 24];
    for h in 0..24 {
        means[h] = if counts[h] > 0 { sums[h] / counts[h] as f64 } else { overall };
    }
    means
}

fn slot_means<F>(records: &[ConsumptionRecord], len: usize, hourly: &[f64; 24], slot: F) -> Vec<f64>
where
    F: Fn(&ConsumptionRecord) -> usize,
{
    let mut sums = vec![0.0; len];
    let mut counts = vec![0usize; len];
    for r in records {
        let s = slot(r);
        sums[s] += r.kwh;
        counts[s] += 1;
    }
    (0..len)
        .map(|s| if counts[s] > 0 { sums[s] / counts[s] as f64 } else { hourly[s % 24] })
        .collect()
}

/// Folds a dataset into a feature vector.
///
/// Empty slots (no reading for that weekday/weekend hour or month/hour cell)
/// are filled with the dataset's mean for the same hour of day.
pub fn build_feature_vector(
    dataset: &ConsumerDataset,
    layout: Layout,
    normalization: Normalization,
    min_coverage: f64,
) -> Result<FeatureVector, ProfileError> {
    let records = dataset.records();
    if records.is_empty() {
        return Err(ProfileError::EmptyDataset);
    }
    if dataset.coverage() < min_coverage {
        return Err(ProfileError::InsufficientCoverage { actual: dataset.coverage(), required: min_coverage });
    }
    if dataset.total_kwh() <= 0.0 {
        return Err(ProfileError::ZeroConsumption);
    }

    let hourly = hourly_means(records);
    let raw = match layout {
        Layout::Hourly24 => hourly.to_vec(),
        Layout::Weekpart48 => slot_means(records, 48, &hourly, |r| {
            r.hour as usize + if r.is_weekend() { 24 } else { 0 }
        }),
        Layout::MonthHour288 => slot_means(records, 288, &hourly, |r| (r.month as usize - 1) * 24 + r.hour as usize),
    };
    let values = normalize(raw, normalization)?;
    Ok(FeatureVector::new(dataset.consumer_id.clone(), values, layout, normalization))
}

fn normalize(mut values: Vec<f64>, normalization: Normalization) -> Result<Vec<f64>, ProfileError> {
    match normalization {
        Normalization::None => {}
        Normalization::UnitTotal => {
            let total: f64 = values.iter().sum();
            if total <= 0.0 {
                return Err(ProfileError::ZeroConsumption);
            }
            values.iter_mut().for_each(|v| *v /= total);
        }
        Normalization::Zscore => {
            let n = values.len() as f64;
            let mean = values.iter().sum::<f64>() / n;
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            let std = var.sqrt();
            if std <= f64::EPSILON * mean.abs().max(1.0) {
                return Err(ProfileError::ConstantProfile);
            }
            values.iter_mut().for_each(|v| *v = (*v - mean) / std);
        }
    }
    Ok(values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profiles::ConsumptionRecord;
    use chrono::{Datelike, NaiveDate};
    use proptest::prelude::*;

    fn dataset_from_fn(days: u32, start: NaiveDate, f: impl Fn(u32, u32) -> f64) -> ConsumerDataset {
        let mut records = Vec::new();
        for d in 0..days {
            let date = start + chrono::Days::new(u64::from(d));
            for h in 0..24 {
                records.push(ConsumptionRecord::new(date.year(), date.month(), date.day(), h, f(d, h)));
            }
        }
        ConsumerDataset::new("t", records).unwrap()
    }

    fn jan2() -> NaiveDate {
        NaiveDate::from_ymd_opt(2023, 1, 2).unwrap()
    }

    #[test]
    fn constant_week_hourly_none() {
        let ds = dataset_from_fn(7, jan2(), |_, _| 1.0);
        let fv = build_feature_vector(&ds, Layout::Hourly24, Normalization::None, 0.8).unwrap();
        assert_eq!(fv.values, vec![1.0; 24]);
    }

    #[test]
    fn constant_unit_total() {
        let ds = dataset_from_fn(7, jan2(), |_, _| 1.0);
        let fv = build_feature_vector(&ds, Layout::Hourly24, Normalization::UnitTotal, 0.8).unwrap();
        for v in &fv.values {
            assert!((v - 1.0 / 24.0).abs() < 1e-15);
        }
    }

    #[test]
    fn two_day_hand_mean() {
        let ds = dataset_from_fn(2, jan2(), |d, h| match (d, h) {
            (0, 0) => 2.0,
            (1, 0) => 4.0,
            _ => 1.0,
        });
        let fv = build_feature_vector(&ds, Layout::Hourly24, Normalization::None, 0.8).unwrap();
        assert_eq!(fv.values[0], 3.0);
        assert!(fv.values[1..].iter().all(|&v| v == 1.0));
    }

    #[test]
    fn weekpart_splits_weekend() {
        // 2023-01-02 is a Monday; 14 days cover two weekends
        let ds = dataset_from_fn(14, jan2(), |d, h| {
            let weekend = d % 7 >= 5;
            if weekend { 2.0 } else { 1.0 + f64::from(h) }
        });
        let fv = build_feature_vector(&ds, Layout::Weekpart48, Normalization::None, 0.8).unwrap();
        assert_eq!(fv.values.len(), 48);
        for h in 0..24 {
            assert_eq!(fv.values[h], 1.0 + h as f64);
            assert_eq!(fv.values[24 + h], 2.0);
        }
    }

    #[test]
    fn weekpart_weekday_only_imputes_weekend() {
        let ds = dataset_from_fn(1, jan2(), |_, h| f64::from(h) + 1.0);
        let fv = build_feature_vector(&ds, Layout::Weekpart48, Normalization::None, 0.8).unwrap();
        assert_eq!(&fv.values[..24], &fv.values[24..]);
    }

    #[test]
    fn month_hour_imputes_missing_cells() {
        let start = NaiveDate::from_ymd_opt(2023, 1, 31).unwrap();
        let ds = dataset_from_fn(2, start, |d, h| if d == 0 { f64::from(h) } else { 10.0 + f64::from(h) });
        let fv = build_feature_vector(&ds, Layout::MonthHour288, Normalization::None, 0.8).unwrap();
        assert_eq!(fv.values.len(), 288);
        assert_eq!(fv.values[5], 5.0);
        assert_eq!(fv.values[24 + 5], 15.0);
        // March hour 5 never observed: falls back to the hour-5 mean
        assert_eq!(fv.values[48 + 5], 10.0);
    }

    #[test]
    fn error_paths() {
        let zero = dataset_from_fn(1, jan2(), |_, _| 0.0);
        assert_eq!(
            build_feature_vector(&zero, Layout::Hourly24, Normalization::None, 0.8),
            Err(ProfileError::ZeroConsumption)
        );
        let empty = ConsumerDataset::new("e", vec![]).unwrap();
        assert_eq!(
            build_feature_vector(&empty, Layout::Hourly24, Normalization::None, 0.8),
            Err(ProfileError::EmptyDataset)
        );
        let sparse = ConsumerDataset::new(
            "s",
            vec![ConsumptionRecord::new(2023, 1, 1, 0, 1.0), ConsumptionRecord::new(2023, 1, 1, 9, 1.0)],
        )
        .unwrap();
        assert!(matches!(
            build_feature_vector(&sparse, Layout::Hourly24, Normalization::None, 0.8),
            Err(ProfileError::InsufficientCoverage { required, .. }) if required == 0.8
        ));
        let flat = dataset_from_fn(1, jan2(), |_, _| 1.0);
        assert_eq!(
            build_feature_vector(&flat, Layout::Hourly24, Normalization::Zscore, 0.8),
            Err(ProfileError::ConstantProfile)
        );
    }

    fn arb_dataset() -> impl Strategy<Value = ConsumerDataset> {
        (1u32..20, proptest::collection::vec(0.01f64..10.0, 24 * 20)).prop_map(|(days, kwh)| {
            dataset_from_fn(days, NaiveDate::from_ymd_opt(2023, 5, 29).unwrap(), |d, h| kwh[(d * 24 + h) as usize])
        })
    }

    proptest! {
        #[test]
        fn hourly_sum_times_days_is_total(ds in arb_dataset()) {
            let days = ds.len() as f64 / 24.0;
            let fv = build_feature_vector(&ds, Layout::Hourly24, Normalization::None, 0.8).unwrap();
            let total = ds.total_kwh();
            prop_assert!((fv.values.iter().sum::<f64>() * days - total).abs() <= 1e-6 * total);
        }

        #[test]
        fn unit_total_sums_to_one(ds in arb_dataset(), layout in prop_oneof![
            Just(Layout::Hourly24), Just(Layout::Weekpart48), Just(Layout::MonthHour288)
        ]) {
            let fv = build_feature_vector(&ds, layout, Normalization::UnitTotal, 0.8).unwrap();
            prop_assert_eq!(fv.values.len(), layout.len());
            prop_assert!((fv.values.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        }

        #[test]
        fn zscore_is_standardized(ds in arb_dataset()) {
            let fv = build_feature_vector(&ds, Layout::Weekpart48, Normalization::Zscore, 0.8).unwrap();
            let n = fv.values.len() as f64;
            let mean = fv.values.iter().sum::<f64>() / n;
            let std = (fv.values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
            prop_assert!(mean.abs() <= 1e-9);
            prop_assert!((std - 1.0).abs() <= 1e-9);
        }

        #[test]
        fn deterministic(ds in arb_dataset()) {
            let a = build_feature_vector(&ds, Layout::Weekpart48, Normalization::UnitTotal, 0.8).unwrap();
            let b = build_feature_vector(&ds.clone(), Layout::Weekpart48, Normalization::UnitTotal, 0.8).unwrap();
            let bits = |v: &FeatureVector| v.values.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
            prop_assert_eq!(bits(&a), bits(&b));
        }
    }
}
