//! Tract-level daytime population density from census and payroll data.
//!
//! The pipeline ingests three public data products — a census tract
//! shapefile with demographic-profile attributes, a states outline
//! shapefile, and a LODES origin-destination employment file — aggregates
//! block-level commute flows up to tracts, and evaluates each tract's
//! daytime population (residents + inbound commuters − outbound commuters)
//! and its density over census land area. On top of the per-tract table it
//! computes the distribution statistics (median, quantile classification,
//! per-class dispersion, Gini inequality of day vs night population) and
//! emits map-ready GeoJSON, a choropleth style descriptor, and CSV.
//!
//! With the default `parallel` feature, flow aggregation and geometry
//! clipping fan out across threads; results are identical to the sequential
//! fallback built with `--no-default-features`.

pub mod census;
pub mod clip;
pub mod density;
pub mod emit;
pub mod flows;
pub mod geoid;
pub mod lodes;
pub mod pipeline;
pub mod report;
pub mod stats;

pub use census::{parse_state_boundary, parse_tracts, StateBoundary, TractRecord};
pub use density::{compute_density, swell_factor, DensityRecord};
pub use flows::{aggregate, block_to_tract, FlowSummary, FlowTotals};
pub use geoid::{BlockId, TractId};
pub use lodes::{parse_od_path, parse_od_stream, validate_state, ODFlow, ParseOptions};
pub use stats::{build_stats, gini, median, quantile_classify, top_n_table, StatsReport};
