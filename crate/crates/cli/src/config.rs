//! Run configuration: defaults, optional TOML file, command-line overrides.
//!
//! Defaults reproduce the reference run: the 2010 census inputs for
//! California and the nine-county San Francisco Bay Area.

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const DEFAULT_TRACTS_URL: &str =
    "http://www2.census.gov/geo/tiger/TIGER2010DP1/Tract_2010Census_DP1.zip";
pub const DEFAULT_STATES_URL: &str =
    "http://www2.census.gov/geo/tiger/GENZ2010/gz_2010_us_040_00_500k.zip";
pub const DEFAULT_LODES_URL: &str =
    "https://lehd.ces.census.gov/data/lodes/LODES7/ca/od/ca_od_main_JT00_2010.csv.gz";

/// Alameda, Contra Costa, Marin, Napa, San Francisco, San Mateo,
/// Santa Clara, Solano, Sonoma.
pub const BAY_AREA_COUNTIES: [&str; 9] = [
    "06001", "06013", "06041", "06055", "06075", "06081", "06085", "06095", "06097",
];

/// Environment variable overriding the cache directory.
pub const CACHE_DIR_ENV: &str = "DAYPOP_CACHE_DIR";

#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub state_fips: String,
    pub county_fips: Vec<String>,
    pub quantile_k: usize,
    pub top_n: usize,
    /// Local path or URL for each input.
    pub tracts: String,
    pub states: String,
    pub lodes: String,
    pub out_dir: PathBuf,
    pub cache_dir: PathBuf,
    pub lenient: bool,
    pub threads: Option<usize>,
    /// Also write the tract-level OD marginals next to the other outputs.
    pub dump_marginals: bool,
    /// Pinned sha256 per input URL or path; verified when present.
    pub checksums: BTreeMap<String, String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let cache_dir = std::env::var_os(CACHE_DIR_ENV)
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from(".daypop-cache"));
        RunConfig {
            state_fips: "06".to_string(),
            county_fips: BAY_AREA_COUNTIES.iter().map(|&c| c.to_string()).collect(),
            quantile_k: 7,
            top_n: 10,
            tracts: DEFAULT_TRACTS_URL.to_string(),
            states: DEFAULT_STATES_URL.to_string(),
            lodes: DEFAULT_LODES_URL.to_string(),
            out_dir: PathBuf::from("out"),
            cache_dir,
            lenient: false,
            threads: None,
            dump_marginals: false,
            checksums: BTreeMap::new(),
        }
    }
}

/// The subset of `RunConfig` a TOML file may set.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub state_fips: Option<String>,
    pub county_fips: Option<Vec<String>>,
    pub quantile_k: Option<usize>,
    pub top_n: Option<usize>,
    pub tracts: Option<String>,
    pub states: Option<String>,
    pub lodes: Option<String>,
    pub out_dir: Option<PathBuf>,
    pub cache_dir: Option<PathBuf>,
    pub lenient: Option<bool>,
    pub threads: Option<usize>,
    pub dump_marginals: Option<bool>,
    pub checksums: Option<BTreeMap<String, String>>,
}

impl RunConfig {
    pub fn apply_file(&mut self, file: FileConfig) {
        macro_rules! take {
            ($($field:ident),*) => {
                $(if let Some(value) = file.$field { self.$field = value; })*
            };
        }
        take!(
            state_fips,
            county_fips,
            quantile_k,
            top_n,
            tracts,
            states,
            lodes,
            out_dir,
            cache_dir,
            lenient,
            dump_marginals,
            checksums
        );
        if file.threads.is_some() {
            self.threads = file.threads;
        }
    }

    /// Check the invariants before touching any input.
    pub fn validate(&self) -> Result<(), CliError> {
        daypop::geoid::parse_state_fips(&self.state_fips)
            .map_err(|e| CliError::validation(format!("state_fips: {e}")))?;
        if self.county_fips.is_empty() {
            return Err(CliError::validation("county_fips must not be empty"));
        }
        for county in &self.county_fips {
            daypop::geoid::parse_county_fips(county)
                .map_err(|e| CliError::validation(format!("county_fips: {e}")))?;
            if !county.starts_with(&self.state_fips) {
                return Err(CliError::validation(format!(
                    "county {county} is outside state {}",
                    self.state_fips
                )));
            }
        }
        if self.quantile_k < 2 {
            return Err(CliError::validation(format!(
                "quantile_k must be at least 2, got {}",
                self.quantile_k
            )));
        }
        if self.threads == Some(0) {
            return Err(CliError::validation("threads must be at least 1"));
        }
        Ok(())
    }

    pub fn state_fips_u64(&self) -> u64 {
        daypop::geoid::parse_state_fips(&self.state_fips).expect("validated")
    }

    pub fn county_set(&self) -> std::collections::HashSet<u64> {
        self.county_fips
            .iter()
            .map(|c| daypop::geoid::parse_county_fips(c).expect("validated"))
            .collect()
    }

    pub fn pinned_checksum(&self, input: &str) -> Option<&str> {
        self.checksums.get(input).map(String::as_str)
    }
}

pub fn load_file(path: &std::path::Path) -> Result<FileConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::validation(format!("config {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| CliError::validation(format!("config {}: {e}", path.display())))
}
