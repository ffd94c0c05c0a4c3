//! Daytime population and density per tract.
//!
//! Daytime population is residents plus inbound commuters minus outbound
//! commuters; density divides by the tract's land area in km². Counts stay
//! in integers until the final division.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::census::TractRecord;
use crate::flows::FlowSummary;
use crate::geoid::TractId;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("flow summary for {flows} joined against tract {tract}")]
pub struct GeoidMismatch {
    pub tract: TractId,
    pub flows: TractId,
}

/// Per-tract population and density figures.
///
/// `excluded` marks zero-land-area tracts: their counts still participate in
/// regional totals, but both densities are undefined and the record is left
/// out of density statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityRecord {
    pub geoid: TractId,
    /// Resident (nighttime) population.
    pub population: u64,
    pub inbound: u64,
    pub outbound: u64,
    /// population + inbound - outbound; may be negative in edge tracts.
    pub daytime_pop: i64,
    pub land_area_km2: f64,
    pub daytime_density: Option<f64>,
    pub nighttime_density: Option<f64>,
    pub excluded: bool,
}

impl DensityRecord {
    pub fn net_flow(&self) -> i64 {
        self.inbound as i64 - self.outbound as i64
    }

    /// Outbound commuting exceeded residents plus inbound; kept, but worth
    /// surfacing in reports.
    pub fn has_negative_daytime(&self) -> bool {
        self.daytime_pop < 0
    }
}

/// Join one tract with its flow marginals (absent means no recorded flows)
/// and evaluate the density figures.
pub fn compute_density(
    tract: &TractRecord,
    flows: Option<&FlowSummary>,
) -> Result<DensityRecord, GeoidMismatch> {
    let (inbound, outbound) = match flows {
        Some(summary) => {
            if summary.tract != tract.geoid {
                return Err(GeoidMismatch {
                    tract: tract.geoid,
                    flows: summary.tract,
                });
            }
            (summary.inbound, summary.outbound)
        }
        None => (0, 0),
    };
    let daytime_pop = tract.population as i64 + inbound as i64 - outbound as i64;
    let excluded = tract.has_zero_area();
    let land_area_km2 = tract.land_area_km2();
    let (daytime_density, nighttime_density) = if excluded {
        (None, None)
    } else {
        (
            Some(daytime_pop as f64 / land_area_km2),
            Some(tract.population as f64 / land_area_km2),
        )
    };
    Ok(DensityRecord {
        geoid: tract.geoid,
        population: tract.population,
        inbound,
        outbound,
        daytime_pop,
        land_area_km2,
        daytime_density,
        nighttime_density,
        excluded,
    })
}

/// Daytime population over resident population, undefined for zero residents.
pub fn swell_factor(record: &DensityRecord) -> Option<f64> {
    if record.population > 0 {
        Some(record.daytime_pop as f64 / record.population as f64)
    } else {
        None
    }
}
