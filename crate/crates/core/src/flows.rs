//! Tract-level aggregation of block-level origin-destination flows.
//!
//! Aggregation is a commutative-monoid fold: each flow adds its job count to
//! the work tract's inbound total and the home tract's outbound total (both,
//! plus `intra`, when they coincide). Partial maps built over independent
//! chunks merge by per-key addition, so the result is identical for any
//! input order, partition, or parallel schedule.

use std::collections::HashMap;
use std::io::{self, Write};

use thiserror::Error;

use crate::geoid::{BadGeoid, BlockId, TractId};
use crate::lodes::{self, IngestError, ODFlow, OdSource, ParseCounters, ParseOptions};

/// Truncate a 15-digit block geocode to its 11-digit tract.
pub fn block_to_tract(block_geoid: &str) -> Result<TractId, BadGeoid> {
    BlockId::parse(block_geoid).map(BlockId::tract)
}

/// Per-tract commuter marginals.
///
/// `intra` jobs (home and work in the same tract) are included in both
/// `inbound` and `outbound`, which keeps the statewide conservation identity
/// exact: summed over all tracts, inbound = outbound = total jobs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FlowSummary {
    pub tract: TractId,
    pub inbound: u64,
    pub outbound: u64,
    pub intra: u64,
}

impl FlowSummary {
    /// Inbound minus outbound commuters; negative means a net outflow.
    pub fn net_flow(&self) -> i64 {
        self.inbound as i64 - self.outbound as i64
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
struct Counts {
    inbound: u64,
    outbound: u64,
    intra: u64,
}

/// Aggregated marginals for every tract appearing as a work or home side.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FlowTotals {
    by_tract: HashMap<TractId, Counts>,
    total_jobs: u64,
}

impl FlowTotals {
    pub fn add_flow(&mut self, flow: &ODFlow) {
        let work = flow.work_block.tract();
        let home = flow.home_block.tract();
        self.total_jobs += flow.jobs;
        self.by_tract.entry(work).or_default().inbound += flow.jobs;
        let home_counts = self.by_tract.entry(home).or_default();
        home_counts.outbound += flow.jobs;
        if work == home {
            home_counts.intra += flow.jobs;
        }
    }

    /// Per-key addition; the monoid merge used by parallel aggregation.
    pub fn merge(&mut self, other: FlowTotals) {
        self.total_jobs += other.total_jobs;
        for (tract, counts) in other.by_tract {
            let entry = self.by_tract.entry(tract).or_default();
            entry.inbound += counts.inbound;
            entry.outbound += counts.outbound;
            entry.intra += counts.intra;
        }
    }

    pub fn get(&self, tract: TractId) -> Option<FlowSummary> {
        self.by_tract.get(&tract).map(|c| FlowSummary {
            tract,
            inbound: c.inbound,
            outbound: c.outbound,
            intra: c.intra,
        })
    }

    pub fn len(&self) -> usize {
        self.by_tract.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_tract.is_empty()
    }

    /// Total jobs over all ingested flows.
    pub fn total_jobs(&self) -> u64 {
        self.total_jobs
    }

    /// Summaries in ascending tract order.
    pub fn to_sorted_vec(&self) -> Vec<FlowSummary> {
        let mut keys: Vec<TractId> = self.by_tract.keys().copied().collect();
        keys.sort_unstable();
        keys.into_iter().map(|t| self.get(t).unwrap()).collect()
    }
}

/// Aggregate an in-memory or already-validated flow sequence.
pub fn aggregate<I: IntoIterator<Item = ODFlow>>(flows: I) -> FlowTotals {
    let mut totals = FlowTotals::default();
    for flow in flows {
        totals.add_flow(&flow);
    }
    totals
}

#[derive(Debug, Error)]
pub enum AggregateError {
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error("row at line {line} is outside state {state:02}: work {work}, home {home}")]
    StateMismatch {
        line: u64,
        state: u64,
        work: BlockId,
        home: BlockId,
    },
}

#[cfg(feature = "parallel")]
impl AggregateError {
    /// File position used to pick the winning error deterministically when
    /// parallel workers fail independently. Stream-level failures sort last:
    /// a sequential reader would have surfaced any earlier row error first.
    fn line(&self) -> u64 {
        match self {
            AggregateError::Ingest(IngestError::MalformedRow { line, .. }) => *line,
            AggregateError::StateMismatch { line, .. } => *line,
            _ => u64::MAX,
        }
    }

    fn min_by_line(self, other: AggregateError) -> AggregateError {
        if other.line() < self.line() {
            other
        } else {
            self
        }
    }
}

/// Options for the fused parse-and-aggregate drivers.
#[derive(Debug, Clone, Copy, Default)]
pub struct AggregateOptions {
    pub parse: ParseOptions,
    /// When set, every geocode must carry this state FIPS prefix.
    pub expected_state: Option<u64>,
}

fn check_state(
    flow: &ODFlow,
    expected: Option<u64>,
    line: u64,
) -> Result<(), AggregateError> {
    match expected {
        Some(state) if !flow.is_within_state(state) => Err(AggregateError::StateMismatch {
            line,
            state,
            work: flow.work_block,
            home: flow.home_block,
        }),
        _ => Ok(()),
    }
}

/// Single-pass sequential parse and aggregation.
pub fn aggregate_source_sequential(
    source: OdSource,
    options: AggregateOptions,
) -> Result<(FlowTotals, ParseCounters), AggregateError> {
    let mut reader = lodes::OdReader::new(source, options.parse)?;
    let mut totals = FlowTotals::default();
    while let Some(item) = reader.next() {
        let flow = item?;
        check_state(&flow, options.expected_state, reader.current_line())?;
        totals.add_flow(&flow);
    }
    Ok((totals, reader.counters()))
}

#[cfg(feature = "parallel")]
mod parallel {
    use super::*;
    use crate::lodes::Chunk;
    use rayon::prelude::*;

    /// Decompressed bytes handed to each worker.
    const CHUNK_SIZE: usize = 4 << 20;

    fn process_chunk(
        chunk: Chunk,
        cols: &lodes::ColumnMap,
        options: AggregateOptions,
    ) -> Result<(FlowTotals, ParseCounters), AggregateError> {
        let mut totals = FlowTotals::default();
        let mut counters = ParseCounters::default();
        for (offset, raw) in chunk.data.split(|&b| b == b'\n').enumerate() {
            if raw.is_empty() {
                continue;
            }
            let line = chunk.first_line + offset as u64;
            match lodes::parse_row(raw, cols) {
                Ok(flow) => {
                    check_state(&flow, options.expected_state, line)?;
                    counters.rows_parsed += 1;
                    totals.add_flow(&flow);
                }
                Err(_) if options.parse.lenient => counters.rows_skipped += 1,
                Err(reason) => {
                    return Err(IngestError::MalformedRow { line, reason }.into());
                }
            }
        }
        Ok((totals, counters))
    }

    /// Parse and aggregate with worker-per-chunk parallelism.
    ///
    /// Decompression stays sequential (gzip is a serial format); chunk
    /// parsing and partial aggregation fan out. Integer merges make the
    /// result bit-identical to the sequential path for any schedule.
    pub fn aggregate_source_parallel(
        source: OdSource,
        options: AggregateOptions,
    ) -> Result<(FlowTotals, ParseCounters), AggregateError> {
        let (cols, chunks) = lodes::into_chunks(source, CHUNK_SIZE)?;
        chunks
            .par_bridge()
            .map(|chunk| process_chunk(chunk?, &cols, options))
            .reduce(
                || Ok((FlowTotals::default(), ParseCounters::default())),
                |left, right| match (left, right) {
                    (Ok((mut lt, mut lc)), Ok((rt, rc))) => {
                        lt.merge(rt);
                        lc.merge(rc);
                        Ok((lt, lc))
                    }
                    (Err(l), Err(r)) => Err(l.min_by_line(r)),
                    (Err(e), Ok(_)) | (Ok(_), Err(e)) => Err(e),
                },
            )
    }
}

#[cfg(feature = "parallel")]
pub use parallel::aggregate_source_parallel;

/// Parse and aggregate an OD source, using the parallel path when built in.
pub fn aggregate_source(
    source: OdSource,
    options: AggregateOptions,
) -> Result<(FlowTotals, ParseCounters), AggregateError> {
    #[cfg(feature = "parallel")]
    {
        aggregate_source_parallel(source, options)
    }
    #[cfg(not(feature = "parallel"))]
    {
        aggregate_source_sequential(source, options)
    }
}

/// Debug dump of the tract-level marginals as `geoid,inbound,outbound,intra`.
pub fn write_marginals_csv<W: Write>(mut writer: W, totals: &FlowTotals) -> io::Result<()> {
    writeln!(writer, "geoid,inbound,outbound,intra")?;
    for summary in totals.to_sorted_vec() {
        writeln!(
            writer,
            "{},{},{},{}",
            summary.tract, summary.inbound, summary.outbound, summary.intra
        )?;
    }
    Ok(())
}
