//! Decoding of census shapefile bundles: the tract file with demographic-
//! profile attributes, and the cartographic states file.
//!
//! A bundle is the usual `.shp`/`.shx`/`.dbf` triplet, addressed by any of:
//! the `.shp` path, a directory containing exactly one `.shp`, or a zip
//! archive (extracted next to itself on first use). Land area is taken from
//! the `ALAND10` attribute (square meters) and never recomputed from
//! geometry.

use std::collections::HashSet;
use std::fs::{self, File};
use std::io;
use std::path::{Path, PathBuf};

use geo::orient::{Direction, Orient};
use geo_types::{Coord, LineString, MultiPolygon, Polygon};
use shapefile::dbase::{FieldValue, Record};
use thiserror::Error;

use crate::geoid::TractId;

/// Attribute names for the 2010 tract demographic-profile file.
const GEOID_FIELDS: &[&str] = &["GEOID10", "GEOID"];
const POPULATION_FIELDS: &[&str] = &["DP0010001"];
const LAND_AREA_FIELDS: &[&str] = &["ALAND10", "ALAND"];
/// Attribute names carrying the state FIPS code in states files.
const STATE_FIPS_FIELDS: &[&str] = &["STATE", "STATEFP", "STATEFP10", "STATE_FIPS", "FIPS"];

/// One census tract: identity, resident population, land area, geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct TractRecord {
    pub geoid: TractId,
    /// Resident (nighttime) population.
    pub population: u64,
    /// Land area in square meters, exactly as stored in the attribute table.
    pub land_area_m2: u64,
    pub geometry: MultiPolygon<f64>,
}

impl TractRecord {
    /// Land area in km². `land_area_km2() * 1e6`, rounded, recovers the
    /// stored integer exactly.
    pub fn land_area_km2(&self) -> f64 {
        self.land_area_m2 as f64 / 1e6
    }

    pub fn has_zero_area(&self) -> bool {
        self.land_area_m2 == 0
    }
}

/// A state outline used for cosmetic clipping.
#[derive(Debug, Clone, PartialEq)]
pub struct StateBoundary {
    pub fips: u64,
    pub geometry: MultiPolygon<f64>,
}

#[derive(Debug, Error)]
pub enum CensusError {
    #[error("attribute table record {record} lacks a usable {field} field")]
    MissingField { record: usize, field: &'static str },
    #[error("record {record}: {message}")]
    GeometryDecode { record: usize, message: String },
    #[error("duplicate tract geoid {0}")]
    DuplicateGeoid(TractId),
    #[error("no state with FIPS {0:?} in states file")]
    StateNotFound(String),
    #[error("record {record}: bad value in {field}: {message}")]
    BadField {
        record: usize,
        field: &'static str,
        message: String,
    },
    #[error("no .shp file in {0}")]
    NoShapefile(PathBuf),
    #[error("multiple .shp files in {0}; pass the .shp path directly")]
    AmbiguousBundle(PathBuf),
    #[error("shapefile error: {0}")]
    Shapefile(#[from] shapefile::Error),
    #[error("zip error: {0}")]
    Zip(#[from] zip::result::ZipError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Resolve a bundle path (shp file, directory, or zip archive) to the
/// `.shp` member path.
pub fn resolve_bundle(path: &Path) -> Result<PathBuf, CensusError> {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase);
    match ext.as_deref() {
        Some("shp") => Ok(path.to_path_buf()),
        Some("zip") => {
            let dir = extract_zip_bundle(path)?;
            find_single_shp(&dir)
        }
        _ if path.is_dir() => find_single_shp(path),
        _ => Err(CensusError::NoShapefile(path.to_path_buf())),
    }
}

fn find_single_shp(dir: &Path) -> Result<PathBuf, CensusError> {
    let mut candidates: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension()
                .and_then(|e| e.to_str())
                .is_some_and(|e| e.eq_ignore_ascii_case("shp"))
        })
        .collect();
    candidates.sort();
    match candidates.len() {
        0 => Err(CensusError::NoShapefile(dir.to_path_buf())),
        1 => Ok(candidates.remove(0)),
        _ => Err(CensusError::AmbiguousBundle(dir.to_path_buf())),
    }
}

/// Extract the shapefile members of a zip archive into `<stem>_shp/` next to
/// it, skipping work when the extracted files are already present.
fn extract_zip_bundle(path: &Path) -> Result<PathBuf, CensusError> {
    let stem = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("bundle");
    let dir = path.with_file_name(format!("{stem}_shp"));
    let mut archive = zip::ZipArchive::new(File::open(path)?)?;
    fs::create_dir_all(&dir)?;
    for i in 0..archive.len() {
        let mut entry = archive.by_index(i)?;
        let name = entry.name().to_string();
        let ext = Path::new(&name)
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase);
        if !matches!(ext.as_deref(), Some("shp" | "shx" | "dbf" | "prj" | "cpg")) {
            continue;
        }
        let file_name = match Path::new(&name).file_name() {
            Some(n) => n.to_owned(),
            None => continue,
        };
        let target = dir.join(file_name);
        if target.is_file() && target.metadata()?.len() == entry.size() {
            continue;
        }
        let mut out = File::create(&target)?;
        io::copy(&mut entry, &mut out)?;
    }
    Ok(dir)
}

fn get_string(record: &Record, fields: &[&'static str]) -> Option<(&'static str, String)> {
    for &field in fields {
        match record.get(field) {
            Some(FieldValue::Character(Some(s))) => return Some((field, s.trim().to_string())),
            Some(FieldValue::Numeric(Some(n))) => return Some((field, format!("{n}"))),
            _ => {}
        }
    }
    None
}

fn get_u64(record: &Record, fields: &[&'static str]) -> Option<(&'static str, Result<u64, String>)> {
    for &field in fields {
        let parsed = match record.get(field) {
            Some(FieldValue::Numeric(Some(n))) => Some(float_to_u64(*n)),
            Some(FieldValue::Double(n)) => Some(float_to_u64(*n)),
            Some(FieldValue::Integer(n)) => Some(if *n < 0 {
                Err(format!("negative value {n}"))
            } else {
                Ok(*n as u64)
            }),
            Some(FieldValue::Character(Some(s))) => Some(
                s.trim()
                    .parse::<u64>()
                    .map_err(|e| format!("{:?}: {e}", s.trim())),
            ),
            _ => None,
        };
        if let Some(result) = parsed {
            return Some((field, result));
        }
    }
    None
}

fn float_to_u64(n: f64) -> Result<u64, String> {
    if !n.is_finite() || n < 0.0 || n > 2f64.powi(53) {
        return Err(format!("value {n} out of range"));
    }
    Ok(n.round() as u64)
}

/// Normalize decoded rings: drop consecutive duplicate vertices, close open
/// rings, discard degenerate rings, and orient exteriors counterclockwise.
fn repair_multipolygon(
    geometry: MultiPolygon<f64>,
    record: usize,
) -> Result<MultiPolygon<f64>, CensusError> {
    fn clean_ring(ring: &LineString<f64>) -> Option<LineString<f64>> {
        let mut coords: Vec<Coord<f64>> = Vec::with_capacity(ring.0.len());
        for &c in &ring.0 {
            if coords.last() != Some(&c) {
                coords.push(c);
            }
        }
        if coords.first() == coords.last() {
            // already closed; the dedupe above never removes the closing vertex
        } else if let Some(&first) = coords.first() {
            coords.push(first);
        }
        if coords.len() < 4 {
            return None;
        }
        Some(LineString(coords))
    }

    let mut polygons = Vec::with_capacity(geometry.0.len());
    for polygon in geometry {
        let Some(exterior) = clean_ring(polygon.exterior()) else {
            continue;
        };
        let interiors: Vec<LineString<f64>> =
            polygon.interiors().iter().filter_map(clean_ring).collect();
        polygons.push(Polygon::new(exterior, interiors));
    }
    if polygons.is_empty() {
        return Err(CensusError::GeometryDecode {
            record,
            message: "no valid rings after repair".to_string(),
        });
    }
    Ok(MultiPolygon(polygons).orient(Direction::Default))
}

fn shape_to_multipolygon(
    shape: shapefile::Shape,
    record: usize,
) -> Result<MultiPolygon<f64>, CensusError> {
    match shape {
        shapefile::Shape::Polygon(p) => {
            let mp: MultiPolygon<f64> =
                p.try_into().map_err(|e| CensusError::GeometryDecode {
                    record,
                    message: format!("{e:?}"),
                })?;
            repair_multipolygon(mp, record)
        }
        other => Err(CensusError::GeometryDecode {
            record,
            message: format!("expected polygon, found {}", other.shapetype()),
        }),
    }
}

/// Decode a tract bundle into records, one per shape.
pub fn parse_tracts(bundle: &Path) -> Result<Vec<TractRecord>, CensusError> {
    let shp = resolve_bundle(bundle)?;
    let mut reader = shapefile::Reader::from_path(&shp)?;
    let mut tracts = Vec::new();
    let mut seen = HashSet::new();
    for (index, pair) in reader.iter_shapes_and_records().enumerate() {
        let (shape, record) = pair?;
        let (field, geoid_text) = get_string(&record, GEOID_FIELDS).ok_or(
            CensusError::MissingField {
                record: index,
                field: GEOID_FIELDS[0],
            },
        )?;
        let geoid = TractId::parse(&geoid_text).map_err(|e| CensusError::BadField {
            record: index,
            field,
            message: e.to_string(),
        })?;
        if !seen.insert(geoid) {
            return Err(CensusError::DuplicateGeoid(geoid));
        }
        let population = require_u64(&record, POPULATION_FIELDS, index)?;
        let land_area_m2 = require_u64(&record, LAND_AREA_FIELDS, index)?;
        if land_area_m2 == 0 {
            log::warn!("tract {geoid} has zero land area; retained but flagged");
        }
        let geometry = shape_to_multipolygon(shape, index)?;
        tracts.push(TractRecord {
            geoid,
            population,
            land_area_m2,
            geometry,
        });
    }
    Ok(tracts)
}

fn require_u64(
    record: &Record,
    fields: &[&'static str],
    index: usize,
) -> Result<u64, CensusError> {
    let (field, value) = get_u64(record, fields).ok_or(CensusError::MissingField {
        record: index,
        field: fields[0],
    })?;
    value.map_err(|message| CensusError::BadField {
        record: index,
        field,
        message,
    })
}

/// Keep only tracts in the given state.
pub fn filter_state(tracts: Vec<TractRecord>, state_fips: u64) -> Vec<TractRecord> {
    tracts
        .into_iter()
        .filter(|t| t.geoid.state_fips() == state_fips)
        .collect()
}

/// Keep only tracts whose 5-digit county prefix is in `county_fips`,
/// preserving input order.
pub fn filter_region(
    tracts: Vec<TractRecord>,
    county_fips: &HashSet<u64>,
) -> Vec<TractRecord> {
    tracts
        .into_iter()
        .filter(|t| county_fips.contains(&t.geoid.county_fips()))
        .collect()
}

/// Find one state's outline in a states bundle.
pub fn parse_state_boundary(bundle: &Path, fips: u64) -> Result<StateBoundary, CensusError> {
    let shp = resolve_bundle(bundle)?;
    let mut reader = shapefile::Reader::from_path(&shp)?;
    let mut parts: Vec<Polygon<f64>> = Vec::new();
    let mut saw_fips_field = false;
    for (index, pair) in reader.iter_shapes_and_records().enumerate() {
        let (shape, record) = pair?;
        let Some((_, text)) = get_string(&record, STATE_FIPS_FIELDS) else {
            continue;
        };
        saw_fips_field = true;
        if text.parse::<u64>().ok() != Some(fips) {
            continue;
        }
        parts.extend(shape_to_multipolygon(shape, index)?.0);
    }
    if parts.is_empty() {
        if saw_fips_field {
            return Err(CensusError::StateNotFound(format!("{fips:02}")));
        }
        return Err(CensusError::MissingField {
            record: 0,
            field: STATE_FIPS_FIELDS[0],
        });
    }
    Ok(StateBoundary {
        fips,
        geometry: MultiPolygon(parts),
    })
}
