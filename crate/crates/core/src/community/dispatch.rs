use serde::{Deserialize, Serialize};

use super::CommunityError;

/// Pooled battery parameters. `efficiency` is round-trip; each leg loses `sqrt(efficiency)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Storage {
    pub capacity: f64,
    pub efficiency: f64,
    /// Maximum energy moved in or out per hour, measured on the community side.
    pub power_limit: f64,
}

impl Storage {
    pub fn none() -> Self {
        Self { capacity: 0.0, efficiency: 1.0, power_limit: 0.0 }
    }
}

/// Energy flows of one hour, all in kWh.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub direct_use: f64,
    /// Surplus sent into storage (before conversion loss).
    pub charge: f64,
    /// Energy delivered from storage to the load (after conversion loss).
    pub discharge: f64,
    pub exported: f64,
    pub imported: f64,
    pub soc_next: f64,
    pub shared: f64,
}

/// Greedy self-consumption dispatch for one hour.
///
/// Production serves the load first. Surplus charges storage, limited by the
/// power limit and by headroom (`(capacity - soc) / sqrt(eff)`); the rest is
/// exported. Deficit is served from storage, limited by the power limit and
/// by `soc * sqrt(eff)`; the rest is imported.
pub fn dispatch_step(
    storage: &Storage,
    soc: f64,
    production: f64,
    consumption: f64,
) -> Result<StepOutcome, CommunityError> {
    if !(soc >= 0.0 && soc <= storage.capacity) {
        return Err(CommunityError::SocOutOfRange { soc, capacity: storage.capacity });
    }
    if !(production >= 0.0 && production.is_finite() && consumption >= 0.0 && consumption.is_finite()) {
        return Err(CommunityError::InvalidEnergy);
    }
    let leg = storage.efficiency.sqrt();
    let direct_use = production.min(consumption);
    let surplus = production - direct_use;
    let deficit = consumption - direct_use;

    let mut soc_next = soc;
    let mut charge = 0.0;
    let mut discharge = 0.0;
    if surplus > 0.0 {
        charge = surplus.min(storage.power_limit).min((storage.capacity - soc) / leg);
        soc_next = (soc + charge * leg).min(storage.capacity);
    } else if deficit > 0.0 {
        discharge = deficit.min(storage.power_limit).min(soc * leg);
        soc_next = (soc - discharge / leg).max(0.0);
    }

    Ok(StepOutcome {
        direct_use,
        charge,
        discharge,
        exported: surplus - charge,
        imported: deficit - discharge,
        soc_next,
        shared: direct_use + discharge,
    })
}
