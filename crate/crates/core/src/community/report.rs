use std::io::Write;

use serde::{Deserialize, Serialize};

use super::StepOutcome;
use crate::json::format_f64;

pub const TRACE_CSV_HEADER: &str = "t,production,consumption,direct_use,charge,discharge,soc_end,shared,exported,imported";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HourTrace {
    pub t: usize,
    pub production: f64,
    pub consumption: f64,
    pub direct_use: f64,
    pub charge: f64,
    pub discharge: f64,
    pub soc_end: f64,
    pub shared: f64,
    pub exported: f64,
    pub imported: f64,
}

impl HourTrace {
    pub(crate) fn from_step(t: usize, production: f64, consumption: f64, step: &StepOutcome) -> Self {
        Self {
            t,
            production,
            consumption,
            direct_use: step.direct_use,
            charge: step.charge,
            discharge: step.discharge,
            soc_end: step.soc_next,
            shared: step.shared,
            exported: step.exported,
            imported: step.imported,
        }
    }
}

/// Horizon totals, without the hourly trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SharingSummary {
    pub total_production: f64,
    pub total_consumption: f64,
    pub shared_energy: f64,
    pub exported: f64,
    pub imported: f64,
    /// shared / production, 0 when nothing is produced.
    pub self_consumption_ratio: f64,
    /// shared / consumption, 0 when nothing is consumed.
    pub self_sufficiency: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SharingReport {
    pub total_production: f64,
    pub total_consumption: f64,
    pub shared_energy: f64,
    pub exported: f64,
    pub imported: f64,
    pub self_consumption_ratio: f64,
    pub self_sufficiency: f64,
    pub hourly_trace: Vec<HourTrace>,
}

fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 { num / den } else { 0.0 }
}

impl SharingReport {
    pub(crate) fn from_trace(hourly_trace: Vec<HourTrace>) -> Self {
        let sum = |f: fn(&HourTrace) -> f64| hourly_trace.iter().map(f).sum::<f64>();
        let total_production = sum(|h| h.production);
        let total_consumption = sum(|h| h.consumption);
        let shared_energy = sum(|h| h.shared);
        Self {
            total_production,
            total_consumption,
            shared_energy,
            exported: sum(|h| h.exported),
            imported: sum(|h| h.imported),
            self_consumption_ratio: ratio(shared_energy, total_production),
            self_sufficiency: ratio(shared_energy, total_consumption),
            hourly_trace,
        }
    }

    pub fn summary(&self) -> SharingSummary {
        SharingSummary {
            total_production: self.total_production,
            total_consumption: self.total_consumption,
            shared_energy: self.shared_energy,
            exported: self.exported,
            imported: self.imported,
            self_consumption_ratio: self.self_consumption_ratio,
            self_sufficiency: self.self_sufficiency,
        }
    }

    /// Mean production, consumption and shared energy per hour of day.
    pub fn average_day(&self) -> AverageDay {
        let mut day = AverageDay { production: [0.0; 24], consumption: [0.0; 24], shared: [0.0; 24] };
        let mut counts = [0usize; 24];
        for h in &self.hourly_trace {
            let i = h.t % 24;
            counts[i] += 1;
            day.production[i] += h.production;
            day.consumption[i] += h.consumption;
            day.shared[i] += h.shared;
        }
        for i in 0..24 {
            if counts[i] > 0 {
                let n = counts[i] as f64;
                day.production[i] /= n;
                day.consumption[i] /= n;
                day.shared[i] /= n;
            }
        }
        day
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AverageDay {
    pub production: [f64; 24],
    pub consumption: [f64; 24],
    pub shared: [f64; 24],
}

/// Writes the hourly trace as CSV with 17-digit floats.
pub fn write_trace_csv<W: Write>(report: &SharingReport, mut out: W) -> std::io::Result<()> {
    writeln!(out, "{TRACE_CSV_HEADER}")?;
    for h in &report.hourly_trace {
        let values = [
            h.production,
            h.consumption,
            h.direct_use,
            h.charge,
            h.discharge,
            h.soc_end,
            h.shared,
            h.exported,
            h.imported,
        ];
        write!(out, "{}", h.t)?;
        for v in values {
            write!(out, ",{}", format_f64(v))?;
        }
        writeln!(out)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trace_csv_layout() {
        let step = StepOutcome {
            direct_use: 1.0,
            charge: 0.5,
            discharge: 0.0,
            exported: 0.0,
            imported: 0.0,
            soc_next: 0.5,
            shared: 1.0,
        };
        let report = SharingReport::from_trace(vec![HourTrace::from_step(0, 1.5, 1.0, &step)]);
        let mut buf = Vec::new();
        write_trace_csv(&report, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, format!("{TRACE_CSV_HEADER}\n0,1.5,1.0,1.0,0.5,0.0,0.5,1.0,0.0,0.0\n"));
    }

    #[test]
    fn ratios_zero_on_empty_denominators() {
        let report = SharingReport::from_trace(vec![]);
        assert_eq!((report.self_consumption_ratio, report.self_sufficiency), (0.0, 0.0));
    }
}
