//! Human-readable rendering of a stats report.

use std::fmt::Write as _;

use crate::density::{swell_factor, DensityRecord};
use crate::stats::{quantile_classify, sigma_contrast, SigmaContrast, StatsReport};

/// Swell factor at two significant figures, `—` when undefined.
pub fn format_swell(swell: Option<f64>) -> String {
    match swell {
        None => "—".to_string(),
        Some(v) => {
            let rounded = round_significant(v, 2);
            if rounded.abs() >= 10.0 {
                format!("×{rounded:.0}")
            } else if rounded.abs() >= 1.0 {
                format!("×{rounded:.1}")
            } else {
                format!("×{rounded:.2}")
            }
        }
    }
}

fn round_significant(v: f64, figures: i32) -> f64 {
    if v == 0.0 || !v.is_finite() {
        return v;
    }
    let magnitude = v.abs().log10().floor() as i32;
    let factor = 10f64.powi(figures - 1 - magnitude);
    (v * factor).round() / factor
}

/// The dispersion contrast recomputed at several class counts, for
/// comparison when the choropleth class count is a free choice.
pub fn sigma_contrast_by_k(densities: &[f64], ks: &[usize]) -> Vec<(usize, Option<SigmaContrast>)> {
    ks.iter()
        .map(|&k| {
            let contrast = quantile_classify(densities, k)
                .and_then(|c| sigma_contrast(densities, &c))
                .ok();
            (k, contrast)
        })
        .collect()
}

fn push_table(out: &mut String, top_n: &[DensityRecord]) {
    let _ = writeln!(
        out,
        "{:<12} {:>11} {:>12} {:>15} {:>16} {:>9} {:>6}",
        "Tract", "Population", "Daytime Pop", "Land Area (km²)", "Daytime Density", "Net Flow", "Swell"
    );
    for record in top_n {
        let density = record
            .daytime_density
            .map_or_else(|| "—".to_string(), |d| format!("{d:.0}"));
        let _ = writeln!(
            out,
            "{:<12} {:>11} {:>12} {:>15.3} {:>16} {:>9} {:>6}",
            record.geoid,
            record.population,
            record.daytime_pop,
            record.land_area_km2,
            density,
            record.net_flow(),
            format_swell(swell_factor(record)),
        );
    }
}

fn format_list(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| format!("{v:.1}"))
        .collect::<Vec<_>>()
        .join(", ")
}

/// Render the report block written to `report.txt`.
pub fn render_stats_text(report: &StatsReport, densities: &[f64]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "Tracts: {} ({} in density statistics, {} zero-area excluded, {} negative daytime)",
        report.tract_count,
        report.density_tract_count,
        report.excluded_count,
        report.negative_daytime_count,
    );
    let _ = writeln!(
        out,
        "Median daytime density: {:.1} persons/km²",
        report.median_daytime_density
    );
    let ratio = report.gini_daytime / report.gini_nighttime;
    let _ = writeln!(
        out,
        "Gini coefficient, daytime vs nighttime population: {:.4} vs {:.4} (ratio {:.2})",
        report.gini_daytime, report.gini_nighttime, ratio
    );
    let _ = writeln!(
        out,
        "Quantile classes: k={} with breaks [{}]",
        report.quantile_k,
        format_list(&report.quantile_breaks)
    );
    if let Some(notice) = &report.quantile_degenerate {
        let _ = writeln!(
            out,
            "  note: classes collapse ({} distinct values, {} effective classes)",
            notice.distinct_values, notice.effective_classes
        );
    }
    let _ = writeln!(
        out,
        "Sigma per class: [{}]",
        format_list(&report.per_quantile_sigma)
    );
    let _ = write!(
        out,
        "Top-class sigma {:.1} vs mean of others {:.1}",
        report.top_quantile_sigma, report.mean_other_sigma
    );
    match report.sigma_ratio {
        Some(ratio) => {
            let _ = writeln!(out, " (ratio {ratio:.1})");
        }
        None => {
            let _ = writeln!(out, " (ratio undefined)");
        }
    }
    let by_k = sigma_contrast_by_k(densities, &[5, 6, 7, 8]);
    let _ = writeln!(out, "Sigma contrast at other class counts:");
    for (k, contrast) in by_k {
        match contrast {
            Some(c) => {
                let ratio = c
                    .ratio()
                    .map_or_else(|| "undefined".to_string(), |r| format!("{r:.1}"));
                let _ = writeln!(
                    out,
                    "  k={k}: top {:.1} vs mean other {:.1} (ratio {ratio})",
                    c.top, c.mean_other
                );
            }
            None => {
                let _ = writeln!(out, "  k={k}: not enough data");
            }
        }
    }
    let _ = writeln!(out, "Top {} tracts by daytime density:", report.top_n.len());
    push_table(&mut out, &report.top_n);
    out
}
