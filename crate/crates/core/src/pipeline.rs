//! Pure computation steps between ingestion and file output: joining tracts
//! with flow marginals, classifying densities, and trimming geometries.

use std::collections::HashMap;

use geo_types::MultiPolygon;
use thiserror::Error;

use crate::census::TractRecord;
use crate::clip::{area_fraction, clip_to_state, ClipError, PreparedBoundary};
use crate::density::{compute_density, DensityRecord, GeoidMismatch};
use crate::emit::ClassifiedFeature;
use crate::flows::FlowTotals;
use crate::geoid::TractId;
use crate::stats::{quantile_classify, Classification, StatsError};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Join(#[from] GeoidMismatch),
    #[error(transparent)]
    Clip(#[from] ClipError),
    #[error(transparent)]
    Stats(#[from] StatsError),
}

/// Join each tract with its flow marginals (tracts without flows get zero
/// commuters) and evaluate the density figures, preserving order.
pub fn build_density_records(
    tracts: &[TractRecord],
    totals: &FlowTotals,
) -> Result<Vec<DensityRecord>, GeoidMismatch> {
    tracts
        .iter()
        .map(|tract| {
            let flows = totals.get(tract.geoid);
            compute_density(tract, flows.as_ref())
        })
        .collect()
}

/// Classify non-excluded records into `k` density quantiles and index the
/// class of each tract by geoid.
pub fn classify_records(
    records: &[DensityRecord],
    k: usize,
) -> Result<(Classification, HashMap<TractId, usize>), StatsError> {
    let mut geoids = Vec::new();
    let mut densities = Vec::new();
    for record in records {
        if let Some(density) = record.daytime_density {
            geoids.push(record.geoid);
            densities.push(density);
        }
    }
    let classification = quantile_classify(&densities, k)?;
    let by_geoid = geoids
        .iter()
        .copied()
        .zip(classification.classes.iter().copied())
        .collect();
    Ok((classification, by_geoid))
}

/// Clip every tract geometry to the state outline, preserving order.
/// `None` entries are tracts that fell entirely outside.
pub fn clip_tracts_sequential(
    tracts: &[TractRecord],
    boundary: &PreparedBoundary,
) -> Result<Vec<Option<MultiPolygon<f64>>>, ClipError> {
    tracts
        .iter()
        .map(|tract| clip_to_state(&tract.geometry, boundary))
        .collect()
}

#[cfg(feature = "parallel")]
pub fn clip_tracts_parallel(
    tracts: &[TractRecord],
    boundary: &PreparedBoundary,
) -> Result<Vec<Option<MultiPolygon<f64>>>, ClipError> {
    use rayon::prelude::*;
    tracts
        .par_iter()
        .map(|tract| clip_to_state(&tract.geometry, boundary))
        .collect()
}

/// Clip with the parallel path when built in.
pub fn clip_tracts(
    tracts: &[TractRecord],
    boundary: &PreparedBoundary,
) -> Result<Vec<Option<MultiPolygon<f64>>>, ClipError> {
    #[cfg(feature = "parallel")]
    {
        clip_tracts_parallel(tracts, boundary)
    }
    #[cfg(not(feature = "parallel"))]
    {
        clip_tracts_sequential(tracts, boundary)
    }
}

/// Zip records, class assignments, and clipped geometries into map features.
/// Tracts clipped to nothing are dropped (logged); zero-area tracts keep a
/// `None` class.
pub fn assemble_features(
    tracts: &[TractRecord],
    records: &[DensityRecord],
    class_by_geoid: &HashMap<TractId, usize>,
    clipped: Vec<Option<MultiPolygon<f64>>>,
) -> Vec<ClassifiedFeature> {
    debug_assert_eq!(tracts.len(), records.len());
    debug_assert_eq!(tracts.len(), clipped.len());
    let mut features = Vec::with_capacity(tracts.len());
    for ((tract, record), clip) in tracts.iter().zip(records).zip(clipped) {
        let Some(clipped_geometry) = clip else {
            log::info!("tract {} clipped to nothing; dropped from map", tract.geoid);
            continue;
        };
        let clipped_fraction = area_fraction(&clipped_geometry, &tract.geometry);
        features.push(ClassifiedFeature {
            record: record.clone(),
            density_class: class_by_geoid.get(&record.geoid).copied(),
            clipped_geometry,
            clipped_fraction,
        });
    }
    features
}
