//! Orchestration of the full run: resolve inputs, ingest, aggregate, join,
//! compute statistics, and write the output files.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use daypop::census;
use daypop::clip::PreparedBoundary;
use daypop::density::DensityRecord;
use daypop::emit;
use daypop::flows::{self, AggregateOptions};
use daypop::lodes::{self, OdSource, ParseCounters, ParseOptions};
use daypop::pipeline as compute;
use daypop::report::{render_stats_text, sigma_contrast_by_k};
use daypop::stats::{build_stats, StatsReport};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::fetch::{resolve_input, ResolvedInput};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Class counts the report compares sigma contrast across.
const SIGMA_COMPARISON_KS: [usize; 4] = [5, 6, 7, 8];

pub struct RunOutcome {
    pub report: StatsReport,
    pub counters: ParseCounters,
    pub outputs: Vec<PathBuf>,
}

struct Inputs {
    tracts: ResolvedInput,
    states: ResolvedInput,
    lodes: ResolvedInput,
}

fn resolve_inputs(config: &RunConfig) -> Result<Inputs, CliError> {
    let resolve = |spec: &str| {
        resolve_input(spec, &config.cache_dir, config.pinned_checksum(spec))
    };
    Ok(Inputs {
        tracts: resolve(&config.tracts).map_err(|e| e.context("tracts input"))?,
        states: resolve(&config.states).map_err(|e| e.context("states input"))?,
        lodes: resolve(&config.lodes).map_err(|e| e.context("lodes input"))?,
    })
}

/// Download any URL inputs into the cache and report where they landed.
pub fn fetch_inputs(config: &RunConfig) -> Result<(), CliError> {
    config.validate()?;
    let inputs = resolve_inputs(config)?;
    for input in [&inputs.tracts, &inputs.states, &inputs.lodes] {
        println!("{}  {}", input.sha256, input.path.display());
    }
    Ok(())
}

/// Ingest-only checks: parse all three inputs, enforce the data invariants,
/// and print what was found.
pub fn validate_inputs(config: &RunConfig) -> Result<(), CliError> {
    config.validate()?;
    let inputs = resolve_inputs(config)?;
    let state_fips = config.state_fips_u64();

    let tracts = census::parse_tracts(&inputs.tracts.path).map_err(|e| {
        CliError::from(e).context("tract bundle")
    })?;
    let statewide = census::filter_state(tracts.clone(), state_fips);
    let region = census::filter_region(statewide.clone(), &config.county_set());
    println!(
        "tracts: {} total, {} in state {}, {} in region ({})",
        tracts.len(),
        statewide.len(),
        config.state_fips,
        region.len(),
        inputs.tracts.sha256,
    );

    let boundary = census::parse_state_boundary(&inputs.states.path, state_fips)
        .map_err(|e| CliError::from(e).context("states bundle"))?;
    println!(
        "state boundary: fips {} with {} polygon(s) ({})",
        config.state_fips,
        boundary.geometry.0.len(),
        inputs.states.sha256,
    );

    let mut reader = lodes::parse_od_path(
        &inputs.lodes.path,
        ParseOptions {
            lenient: config.lenient,
        },
    )?;
    let mut jobs: u64 = 0;
    while let Some(flow) = reader.next() {
        let flow = flow?;
        if !lodes::validate_state(&flow, state_fips) {
            return Err(CliError::ingest(format!(
                "od row at line {} is outside state {}",
                reader.current_line(),
                config.state_fips
            )));
        }
        jobs += flow.jobs;
    }
    let counters = reader.counters();
    println!(
        "od flows: {} rows, {} skipped, {} jobs ({})",
        counters.rows_parsed, counters.rows_skipped, jobs, inputs.lodes.sha256,
    );
    Ok(())
}

/// The full pipeline. Outputs land in `config.out_dir`; on failure nothing
/// partial is left behind.
pub fn run(config: &RunConfig) -> Result<RunOutcome, CliError> {
    config.validate()?;
    let inputs = resolve_inputs(config)?;
    let state_fips = config.state_fips_u64();

    let all_tracts = census::parse_tracts(&inputs.tracts.path)
        .map_err(|e| CliError::from(e).context("tract bundle"))?;
    let statewide = census::filter_state(all_tracts, state_fips);
    if statewide.is_empty() {
        return Err(CliError::ingest(format!(
            "tract file has no tracts in state {}",
            config.state_fips
        )));
    }
    let mut region = census::filter_region(statewide, &config.county_set());
    if region.is_empty() {
        return Err(CliError::ingest(
            "no tracts match the configured counties".to_string(),
        ));
    }
    region.sort_by_key(|t| t.geoid);

    let boundary = census::parse_state_boundary(&inputs.states.path, state_fips)
        .map_err(|e| CliError::from(e).context("states bundle"))?;

    // Statewide aggregation first; a region tract's commuters may live
    // anywhere in the state.
    let source = OdSource::open(&inputs.lodes.path).map_err(CliError::from)?;
    let (totals, counters) = flows::aggregate_source(
        source,
        AggregateOptions {
            parse: ParseOptions {
                lenient: config.lenient,
            },
            expected_state: Some(state_fips),
        },
    )
    .map_err(|e| CliError::from(e).context("od aggregation"))?;

    let records = compute::build_density_records(&region, &totals)?;
    let report = build_stats(&records, config.quantile_k, config.top_n)?;
    let (_classification, class_by_geoid) =
        compute::classify_records(&records, config.quantile_k)?;

    let prepared = PreparedBoundary::new(&boundary)?;
    let clipped = compute::clip_tracts(&region, &prepared)?;
    let features = compute::assemble_features(&region, &records, &class_by_geoid, clipped);

    let outputs = write_outputs(
        config, &inputs, &report, &records, &features, &totals, counters,
    )?;
    Ok(RunOutcome {
        report,
        counters,
        outputs,
    })
}

/// Recompute the report files from a previously written density CSV.
pub fn stats_from_csv(config: &RunConfig, csv_path: &Path) -> Result<RunOutcome, CliError> {
    if config.quantile_k < 2 {
        return Err(CliError::validation(format!(
            "quantile_k must be at least 2, got {}",
            config.quantile_k
        )));
    }
    let file = fs::File::open(csv_path)
        .map_err(|e| CliError::ingest(format!("{}: {e}", csv_path.display())))?;
    let records = emit::read_density_csv(file)
        .map_err(|e| CliError::ingest(format!("{}: {e}", csv_path.display())))?;
    let report = build_stats(&records, config.quantile_k, config.top_n)?;

    let provenance = vec![ProvenanceEntry {
        role: "density_csv",
        source: csv_path.display().to_string(),
        sha256: crate::fetch::sha256_file(csv_path)?,
    }];
    fs::create_dir_all(&config.out_dir)?;
    let mut guard = OutputGuard::default();
    let report_txt = config.out_dir.join("report.txt");
    write_atomic(&report_txt, &mut guard, |w| {
        render_report_text(w, config, &report, &records, &provenance, None)
    })?;
    let report_json = config.out_dir.join("report.json");
    write_atomic(&report_json, &mut guard, |w| {
        render_report_json(w, config, &report, &records, &provenance, None)
    })?;
    let outputs = guard.commit();
    Ok(RunOutcome {
        report,
        counters: ParseCounters::default(),
        outputs,
    })
}

#[derive(Serialize)]
struct ProvenanceEntry {
    role: &'static str,
    source: String,
    sha256: String,
}

fn provenance_entries(inputs: &Inputs) -> Vec<ProvenanceEntry> {
    [
        ("tracts", &inputs.tracts),
        ("states", &inputs.states),
        ("lodes", &inputs.lodes),
    ]
    .into_iter()
    .map(|(role, input)| ProvenanceEntry {
        role,
        source: input.source.clone(),
        sha256: input.sha256.clone(),
    })
    .collect()
}

fn write_outputs(
    config: &RunConfig,
    inputs: &Inputs,
    report: &StatsReport,
    records: &[DensityRecord],
    features: &[emit::ClassifiedFeature],
    totals: &flows::FlowTotals,
    counters: ParseCounters,
) -> Result<Vec<PathBuf>, CliError> {
    fs::create_dir_all(&config.out_dir)?;
    let mut guard = OutputGuard::default();
    let provenance = provenance_entries(inputs);

    write_atomic(&config.out_dir.join("density.csv"), &mut guard, |w| {
        emit::emit_csv(w, records).map_err(CliError::from)
    })?;
    write_atomic(&config.out_dir.join("tracts.geojson"), &mut guard, |w| {
        emit::emit_geojson(w, features).map_err(CliError::from)
    })?;
    write_atomic(&config.out_dir.join("style.json"), &mut guard, |w| {
        let palette = emit::default_palette(config.quantile_k);
        emit::emit_style(w, &report.quantile_breaks, &palette).map_err(CliError::from)
    })?;
    if config.dump_marginals {
        write_atomic(&config.out_dir.join("od_marginals.csv"), &mut guard, |w| {
            flows::write_marginals_csv(w, totals).map_err(CliError::from)
        })?;
    }
    write_atomic(&config.out_dir.join("report.txt"), &mut guard, |w| {
        render_report_text(w, config, report, records, &provenance, Some(counters))
    })?;
    write_atomic(&config.out_dir.join("report.json"), &mut guard, |w| {
        render_report_json(w, config, report, records, &provenance, Some(counters))
    })?;
    Ok(guard.commit())
}

/// Removes everything written during an aborted run.
#[derive(Default)]
struct OutputGuard {
    written: Vec<PathBuf>,
    committed: bool,
}

impl OutputGuard {
    fn commit(mut self) -> Vec<PathBuf> {
        self.committed = true;
        std::mem::take(&mut self.written)
    }
}

impl Drop for OutputGuard {
    fn drop(&mut self) {
        if !self.committed {
            for path in &self.written {
                let _ = fs::remove_file(path);
            }
        }
    }
}

/// Write through a `.tmp` sibling and rename into place.
fn write_atomic<F>(path: &Path, guard: &mut OutputGuard, write: F) -> Result<(), CliError>
where
    F: FnOnce(&mut dyn Write) -> Result<(), CliError>,
{
    let mut tmp = path.as_os_str().to_os_string();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    let result = (|| {
        let mut file = std::io::BufWriter::new(fs::File::create(&tmp)?);
        write(&mut file)?;
        file.flush()?;
        Ok(())
    })();
    if let Err(e) = result {
        let _ = fs::remove_file(&tmp);
        return Err(e);
    }
    fs::rename(&tmp, path)?;
    guard.written.push(path.to_path_buf());
    Ok(())
}

fn non_excluded_densities(records: &[DensityRecord]) -> Vec<f64> {
    records.iter().filter_map(|r| r.daytime_density).collect()
}

fn render_report_text(
    w: &mut dyn Write,
    config: &RunConfig,
    report: &StatsReport,
    records: &[DensityRecord],
    provenance: &[ProvenanceEntry],
    counters: Option<ParseCounters>,
) -> Result<(), CliError> {
    let densities = non_excluded_densities(records);
    w.write_all(render_stats_text(report, &densities).as_bytes())?;
    if let Some(counters) = counters {
        writeln!(
            w,
            "OD rows parsed: {} (skipped: {})",
            counters.rows_parsed, counters.rows_skipped
        )?;
    }
    writeln!(w, "--- provenance ---")?;
    writeln!(w, "daypop {VERSION}")?;
    writeln!(
        w,
        "config: state={} counties=[{}] k={} top_n={} lenient={}",
        config.state_fips,
        config.county_fips.join(","),
        config.quantile_k,
        config.top_n,
        config.lenient,
    )?;
    for entry in provenance {
        writeln!(w, "input {}: sha256={} {}", entry.role, entry.sha256, entry.source)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct SigmaAtK {
    k: usize,
    top: Option<f64>,
    mean_other: Option<f64>,
    ratio: Option<f64>,
}

#[derive(Serialize)]
struct ConfigEcho<'a> {
    state_fips: &'a str,
    county_fips: &'a [String],
    quantile_k: usize,
    top_n: usize,
    lenient: bool,
}

#[derive(Serialize)]
struct JsonReport<'a> {
    version: &'static str,
    config: ConfigEcho<'a>,
    inputs: &'a [ProvenanceEntry],
    rows_parsed: Option<u64>,
    rows_skipped: Option<u64>,
    stats: &'a StatsReport,
    sigma_by_k: Vec<SigmaAtK>,
}

fn render_report_json(
    w: &mut dyn Write,
    config: &RunConfig,
    report: &StatsReport,
    records: &[DensityRecord],
    provenance: &[ProvenanceEntry],
    counters: Option<ParseCounters>,
) -> Result<(), CliError> {
    let densities = non_excluded_densities(records);
    let sigma_by_k = sigma_contrast_by_k(&densities, &SIGMA_COMPARISON_KS)
        .into_iter()
        .map(|(k, contrast)| SigmaAtK {
            k,
            top: contrast.as_ref().map(|c| c.top),
            mean_other: contrast.as_ref().map(|c| c.mean_other),
            ratio: contrast.as_ref().and_then(|c| c.ratio()),
        })
        .collect();
    let doc = JsonReport {
        version: VERSION,
        config: ConfigEcho {
            state_fips: &config.state_fips,
            county_fips: &config.county_fips,
            quantile_k: config.quantile_k,
            top_n: config.top_n,
            lenient: config.lenient,
        },
        inputs: provenance,
        rows_parsed: counters.map(|c| c.rows_parsed),
        rows_skipped: counters.map(|c| c.rows_skipped),
        stats: report,
        sigma_by_k,
    };
    serde_json::to_writer_pretty(&mut *w, &doc)
        .map_err(|e| CliError::Io(e.into()))?;
    w.write_all(b"\n")?;
    Ok(())
}
