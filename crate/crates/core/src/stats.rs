//! Summary statistics over tract densities: median, equal-count quantile
//! classification, per-class dispersion contrast, Gini inequality, and the
//! top-N density table.

use serde::Serialize;
use thiserror::Error;

use crate::density::DensityRecord;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("empty input")]
    EmptyInput,
    #[error("all values are zero")]
    AllZero,
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("class count must be at least 2, got {0}")]
    BadClassCount(usize),
}

/// Midpoint of the sorted values; the mean of the two central elements for
/// even counts.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let n = sorted.len();
    if n % 2 == 1 {
        Some(sorted[n / 2])
    } else {
        Some((sorted[n / 2 - 1] + sorted[n / 2]) / 2.0)
    }
}

/// Gini coefficient of `values`, by the sorted O(n log n) formulation.
///
/// Equals the pairwise mean absolute difference over twice the mean. For
/// non-negative inputs the result lies in [0, 1); 0 means perfectly even.
pub fn gini(values: &[f64]) -> Result<f64, StatsError> {
    if values.is_empty() {
        return Err(StatsError::EmptyInput);
    }
    let mut sorted = values.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let sum: f64 = sorted.iter().sum();
    if sum <= 0.0 {
        return Err(StatsError::AllZero);
    }
    let weighted: f64 = sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| (2.0 * (i as f64 + 1.0) - n - 1.0) * x)
        .sum();
    Ok(weighted / (n * sum))
}

/// Flags raised when equal-count classes cannot be kept fully apart.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DegenerateNotice {
    pub distinct_values: usize,
    /// Classes remaining once tied boundaries are merged.
    pub effective_classes: usize,
}

/// An equal-count (quantile) classification of a value list.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Classification {
    pub class_count: usize,
    /// Upper boundary value of each class except the last (k-1 entries,
    /// nondecreasing).
    pub breaks: Vec<f64>,
    /// Class index in `[0, class_count)` per input value, parallel to the
    /// input order.
    pub classes: Vec<usize>,
    pub degenerate: Option<DegenerateNotice>,
}

impl Classification {
    /// Class membership recomputed from the break values alone: the first
    /// class whose upper boundary is at or above `value`. Agrees with
    /// `classes` whenever no tie straddles a boundary.
    pub fn class_of(&self, value: f64) -> usize {
        self.breaks
            .iter()
            .position(|&b| value <= b)
            .unwrap_or(self.class_count - 1)
    }
}

/// Assign `values` to `k` classes of equal count (sizes differ by at most
/// one). Ties are ordered by their position in the sorted sequence; a tie
/// that crosses a class boundary collapses the classes and is reported via
/// `degenerate`, not as an error.
pub fn quantile_classify(values: &[f64], k: usize) -> Result<Classification, StatsError> {
    if values.is_empty() {
        return Err(StatsError::EmptyInput);
    }
    if k < 2 {
        return Err(StatsError::BadClassCount(k));
    }
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_unstable_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));

    let mut classes = vec![0usize; n];
    for (rank, &index) in order.iter().enumerate() {
        classes[index] = rank * k / n;
    }

    // Upper boundary of class i sits at the last rank assigned to it.
    let mut breaks = Vec::with_capacity(k - 1);
    let mut boundary_ties = 0usize;
    for class in 0..k - 1 {
        let last_rank = (((class + 1) * n).div_ceil(k) - 1).min(n - 1);
        let boundary = values[order[last_rank]];
        if last_rank + 1 < n && boundary == values[order[last_rank + 1]] {
            boundary_ties += 1;
        }
        breaks.push(boundary);
    }

    let mut distinct = 1;
    for w in order.windows(2) {
        if values[w[0]] != values[w[1]] {
            distinct += 1;
        }
    }
    // Classes remaining once identical boundary ranges merge.
    let mut effective = 1;
    let mut prev = breaks.first().copied().unwrap_or(values[order[n - 1]]);
    for &b in breaks.iter().skip(1).chain([values[order[n - 1]]].iter()) {
        if b != prev {
            effective += 1;
            prev = b;
        }
    }
    let degenerate = if distinct < k || boundary_ties > 0 || effective < k {
        Some(DegenerateNotice {
            distinct_values: distinct,
            effective_classes: effective,
        })
    } else {
        None
    };

    Ok(Classification {
        class_count: k,
        breaks,
        classes,
        degenerate,
    })
}

/// Per-class population standard deviations and the top-versus-rest
/// contrast.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SigmaContrast {
    /// Population standard deviation per class, lowest class first.
    pub per_class: Vec<f64>,
    /// Standard deviation of the highest class.
    pub top: f64,
    /// Arithmetic mean of the other classes' standard deviations.
    pub mean_other: f64,
    /// Classes with a single member (sigma taken as 0 by convention).
    pub singleton_classes: Vec<usize>,
}

impl SigmaContrast {
    /// top / mean_other; undefined when the rest have zero spread.
    pub fn ratio(&self) -> Option<f64> {
        (self.mean_other > 0.0).then(|| self.top / self.mean_other)
    }
}

fn population_sigma(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    var.sqrt()
}

/// Contrast the dispersion of the top class against the mean dispersion of
/// the rest. Requires every class to be populated.
pub fn sigma_contrast(
    values: &[f64],
    classification: &Classification,
) -> Result<SigmaContrast, StatsError> {
    let k = classification.class_count;
    if k < 2 {
        return Err(StatsError::BadClassCount(k));
    }
    if values.len() != classification.classes.len() {
        return Err(StatsError::DegenerateInput(
            "classification does not match value list".to_string(),
        ));
    }
    let mut groups: Vec<Vec<f64>> = vec![Vec::new(); k];
    for (&value, &class) in values.iter().zip(&classification.classes) {
        groups[class].push(value);
    }
    if let Some(empty) = groups.iter().position(Vec::is_empty) {
        return Err(StatsError::DegenerateInput(format!(
            "class {empty} is empty (more classes than values?)"
        )));
    }
    let mut singleton_classes = Vec::new();
    let per_class: Vec<f64> = groups
        .iter()
        .enumerate()
        .map(|(i, group)| {
            if group.len() == 1 {
                singleton_classes.push(i);
                0.0
            } else {
                population_sigma(group)
            }
        })
        .collect();
    let top = per_class[k - 1];
    let mean_other = per_class[..k - 1].iter().sum::<f64>() / (k - 1) as f64;
    Ok(SigmaContrast {
        per_class,
        top,
        mean_other,
        singleton_classes,
    })
}

/// The `n` records with the highest daytime density, ties broken by
/// ascending geoid. Zero-area records are skipped; `n` larger than the
/// collection returns everything.
pub fn top_n_table(records: &[DensityRecord], n: usize) -> Vec<DensityRecord> {
    let mut ranked: Vec<&DensityRecord> = records
        .iter()
        .filter(|r| !r.excluded && r.daytime_density.is_some())
        .collect();
    ranked.sort_by(|a, b| {
        b.daytime_density
            .unwrap()
            .total_cmp(&a.daytime_density.unwrap())
            .then(a.geoid.cmp(&b.geoid))
    });
    ranked.into_iter().take(n).cloned().collect()
}

/// Everything the run report carries about the density distribution.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatsReport {
    pub tract_count: usize,
    /// Tracts entering density statistics (land area > 0).
    pub density_tract_count: usize,
    pub excluded_count: usize,
    pub negative_daytime_count: usize,
    pub median_daytime_density: f64,
    pub quantile_k: usize,
    pub quantile_breaks: Vec<f64>,
    pub quantile_degenerate: Option<DegenerateNotice>,
    pub per_quantile_sigma: Vec<f64>,
    pub top_quantile_sigma: f64,
    pub mean_other_sigma: f64,
    pub sigma_ratio: Option<f64>,
    /// Gini over tract daytime population counts (excluded tracts included).
    pub gini_daytime: f64,
    /// Gini over tract resident population counts.
    pub gini_nighttime: f64,
    pub top_n: Vec<DensityRecord>,
}

/// Compute the full report over a region's density records.
///
/// Density statistics (median, quantiles, sigma) run over non-excluded
/// tracts; the Gini pair runs over population counts of every tract.
pub fn build_stats(
    records: &[DensityRecord],
    quantile_k: usize,
    top_n: usize,
) -> Result<StatsReport, StatsError> {
    let densities: Vec<f64> = records
        .iter()
        .filter_map(|r| r.daytime_density)
        .collect();
    if densities.is_empty() {
        return Err(StatsError::EmptyInput);
    }
    let median_daytime_density = median(&densities).expect("nonempty");
    let classification = quantile_classify(&densities, quantile_k)?;
    let contrast = sigma_contrast(&densities, &classification)?;

    let daytime_counts: Vec<f64> = records.iter().map(|r| r.daytime_pop as f64).collect();
    let nighttime_counts: Vec<f64> = records.iter().map(|r| r.population as f64).collect();

    Ok(StatsReport {
        tract_count: records.len(),
        density_tract_count: densities.len(),
        excluded_count: records.iter().filter(|r| r.excluded).count(),
        negative_daytime_count: records.iter().filter(|r| r.has_negative_daytime()).count(),
        median_daytime_density,
        quantile_k,
        quantile_breaks: classification.breaks.clone(),
        quantile_degenerate: classification.degenerate.clone(),
        per_quantile_sigma: contrast.per_class.clone(),
        top_quantile_sigma: contrast.top,
        mean_other_sigma: contrast.mean_other,
        sigma_ratio: contrast.ratio(),
        gini_daytime: gini(&daytime_counts)?,
        gini_nighttime: gini(&nighttime_counts)?,
        top_n: top_n_table(records, top_n),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geoid::TractId;

    /// Independent O(n²) oracle: mean absolute difference over twice the mean.
    pub(crate) fn gini_pairwise(values: &[f64]) -> f64 {
        let n = values.len() as f64;
        let sum: f64 = values.iter().sum();
        let mut abs_diff = 0.0;
        for &a in values {
            for &b in values {
                abs_diff += (a - b).abs();
            }
        }
        abs_diff / (2.0 * n * n * (sum / n))
    }

    #[test]
    fn median_cases() {
        assert_eq!(median(&[1.0, 2.0, 3.0]), Some(2.0));
        assert_eq!(median(&[1.0, 2.0, 3.0, 4.0]), Some(2.5));
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&[]), None);
    }

    #[test]
    fn gini_equal_values_is_zero() {
        assert!(gini(&[5.0, 5.0, 5.0, 5.0]).unwrap().abs() < 1e-15);
    }

    #[test]
    fn gini_concentrated_quadruple() {
        // Brute force: sum |xi-xj| = 600, 2 n^2 mean = 800.
        let values = [0.0, 0.0, 0.0, 100.0];
        assert!((gini_pairwise(&values) - 0.75).abs() < 1e-12);
        assert!((gini(&values).unwrap() - 0.75).abs() < 1e-12);
    }

    #[test]
    fn gini_rejects_empty_and_zero() {
        assert_eq!(gini(&[]), Err(StatsError::EmptyInput));
        assert_eq!(gini(&[0.0, 0.0]), Err(StatsError::AllZero));
    }

    #[test]
    fn quantiles_one_to_ten() {
        let values: Vec<f64> = (1..=10).map(f64::from).collect();
        let c = quantile_classify(&values, 5).unwrap();
        assert_eq!(c.breaks, vec![2.0, 4.0, 6.0, 8.0]);
        assert_eq!(c.classes, vec![0, 0, 1, 1, 2, 2, 3, 3, 4, 4]);
        assert!(c.degenerate.is_none());
        for (i, &v) in values.iter().enumerate() {
            assert_eq!(c.class_of(v), c.classes[i]);
        }
    }

    #[test]
    fn all_equal_collapses_to_one_class() {
        let c = quantile_classify(&[7.0; 9], 4).unwrap();
        let notice = c.degenerate.unwrap();
        assert_eq!(notice.distinct_values, 1);
        assert_eq!(notice.effective_classes, 1);
        assert!(c.breaks.iter().all(|&b| b == 7.0));
    }

    #[test]
    fn more_classes_than_values_is_degenerate_not_fatal() {
        let c = quantile_classify(&[1.0, 2.0], 4).unwrap();
        let notice = c.degenerate.unwrap();
        assert!(notice.effective_classes < 4);
        assert_eq!(c.breaks.len(), 3);
    }

    #[test]
    fn sigma_contrast_hand_computation() {
        // Classes {1,1,1} and {10,20,30}: sigma 0 and sqrt(200/3).
        let values = [1.0, 1.0, 1.0, 10.0, 20.0, 30.0];
        let classification = Classification {
            class_count: 2,
            breaks: vec![1.0],
            classes: vec![0, 0, 0, 1, 1, 1],
            degenerate: None,
        };
        let contrast = sigma_contrast(&values, &classification).unwrap();
        assert_eq!(contrast.per_class[0], 0.0);
        assert!((contrast.per_class[1] - (200.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert!((contrast.per_class[1] - 8.164_965_809_277_26).abs() < 1e-9);
        assert_eq!(contrast.mean_other, 0.0);
        assert_eq!(contrast.ratio(), None);
    }

    #[test]
    fn singleton_class_gets_zero_sigma_and_flag() {
        let values = [1.0, 2.0, 9.0];
        let c = quantile_classify(&values, 2).unwrap();
        let contrast = sigma_contrast(&values, &c).unwrap();
        assert_eq!(contrast.top, 0.0);
        assert_eq!(contrast.singleton_classes, vec![1]);
    }

    fn record(geoid: &str, density: f64) -> DensityRecord {
        DensityRecord {
            geoid: TractId::parse(geoid).unwrap(),
            population: 100,
            inbound: 0,
            outbound: 0,
            land_area_km2: 1.0,
            daytime_pop: density as i64,
            daytime_density: Some(density),
            nighttime_density: Some(100.0),
            excluded: false,
        }
    }

    #[test]
    fn top_n_orders_by_density_then_geoid() {
        let records = vec![
            record("06001000100", 503.0),
            record("06001000200", 1554.0),
            record("06075000100", 1268.0),
        ];
        let top = top_n_table(&records, 10);
        let geoids: Vec<String> = top.iter().map(|r| r.geoid.to_string()).collect();
        assert_eq!(geoids, ["06001000200", "06075000100", "06001000100"]);
        assert!(top_n_table(&records, 0).is_empty());
        assert_eq!(top_n_table(&records, 2).len(), 2);

        let mut tied = records.clone();
        tied[0].daytime_density = Some(1554.0);
        let top = top_n_table(&tied, 2);
        assert_eq!(top[0].geoid.to_string(), "06001000100");
        assert_eq!(top[1].geoid.to_string(), "06001000200");
    }

    #[test]
    fn excluded_records_never_rank() {
        let mut records = vec![record("06001000100", 503.0)];
        let mut excluded = record("06001000200", 0.0);
        excluded.excluded = true;
        excluded.daytime_density = None;
        records.push(excluded);
        assert_eq!(top_n_table(&records, 10).len(), 1);
    }

    #[test]
    fn build_stats_counts_and_excludes() {
        let mut records = vec![
            record("06001000100", 503.0),
            record("06001000200", 1554.0),
            record("06075000100", 1268.0),
        ];
        let mut zero_area = record("06095000100", 0.0);
        zero_area.excluded = true;
        zero_area.daytime_density = None;
        zero_area.nighttime_density = None;
        records.push(zero_area);
        let mut negative = record("06097000100", -15.0);
        negative.daytime_pop = -15;
        records.push(negative);

        let report = build_stats(&records, 2, 10).unwrap();
        assert_eq!(report.tract_count, 5);
        assert_eq!(report.density_tract_count, 4);
        assert_eq!(report.excluded_count, 1);
        assert_eq!(report.negative_daytime_count, 1);
        // Densities [503, 1554, 1268, -15] -> median (503 + 1268) / 2.
        assert_eq!(report.median_daytime_density, 885.5);
        assert_eq!(report.top_n.len(), 4);
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn gini_matches_pairwise_oracle(
                values in proptest::collection::vec(0.0f64..1e6, 2..30),
                positive_slot in 0usize..30,
            ) {
                let mut values = values;
                let slot = positive_slot % values.len();
                values[slot] += 1.0; // keep the sum positive
                let fast = gini(&values).unwrap();
                let oracle = gini_pairwise(&values);
                prop_assert!((fast - oracle).abs() <= 1e-10 * oracle.abs().max(1.0));
            }

            #[test]
            fn gini_is_scale_invariant(
                values in proptest::collection::vec(0.1f64..1e6, 2..30),
                scale in 1e-3f64..1e3,
            ) {
                let base = gini(&values).unwrap();
                let scaled: Vec<f64> = values.iter().map(|v| v * scale).collect();
                prop_assert!((gini(&scaled).unwrap() - base).abs() < 1e-12);
            }

            #[test]
            fn quantile_classes_stay_balanced(
                values in proptest::collection::vec(-1e6f64..1e6, 2..120),
                k in 2usize..9,
            ) {
                let c = quantile_classify(&values, k).unwrap();
                let mut sizes = vec![0usize; k];
                for &class in &c.classes {
                    sizes[class] += 1;
                }
                let nonzero: Vec<usize> = sizes.iter().copied().filter(|&s| s > 0).collect();
                let max = nonzero.iter().max().unwrap();
                let min = sizes.iter().min().unwrap();
                if k <= values.len() {
                    prop_assert!(max - min <= 1, "sizes {sizes:?}");
                }
                prop_assert_eq!(c.classes.len(), values.len());
                for w in c.breaks.windows(2) {
                    prop_assert!(w[0] <= w[1]);
                }
            }

            #[test]
            fn break_lookup_agrees_without_boundary_ties(
                raw in proptest::collection::hash_set(-1_000_000i64..1_000_000, 2..80),
                k in 2usize..9,
            ) {
                // Distinct integers: no ties at all, so the break lookup must
                // reproduce the rank-based assignment exactly.
                let values: Vec<f64> = raw.into_iter().map(|v| v as f64).collect();
                let c = quantile_classify(&values, k).unwrap();
                for (i, &v) in values.iter().enumerate() {
                    prop_assert_eq!(c.class_of(v), c.classes[i]);
                }
            }
        }
    }
}
