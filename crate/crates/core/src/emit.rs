//! Map-ready output files: a GeoJSON feature collection, a choropleth style
//! descriptor, and the per-tract density CSV.

use std::io::{self, Read, Write};

use geo::orient::{Direction, Orient};
use geo_types::{LineString, MultiPolygon};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::density::DensityRecord;
use crate::geoid::TractId;

/// Coordinates are written with this many decimal places (about 0.1 m at
/// the equator), matching the precision of the source shapefiles.
pub const COORD_DECIMALS: i32 = 6;

#[derive(Debug, Error)]
pub enum EmitError {
    #[error("palette has {colors} colors for {classes} classes")]
    PaletteMismatch { classes: usize, colors: usize },
    #[error("invalid {0}")]
    InvalidDocument(String),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// A tract ready for the map: density record, class, trimmed geometry.
#[derive(Debug, Clone)]
pub struct ClassifiedFeature {
    pub record: DensityRecord,
    /// Quantile class in `[0, k)`; `None` for zero-area tracts, which carry
    /// no density.
    pub density_class: Option<usize>,
    pub clipped_geometry: MultiPolygon<f64>,
    /// Planar share of the original footprint that survived clipping.
    pub clipped_fraction: f64,
}

fn round_coord(v: f64) -> f64 {
    let factor = 10f64.powi(COORD_DECIMALS);
    (v * factor).round() / factor
}

fn ring_coordinates(ring: &LineString<f64>) -> Value {
    Value::Array(
        ring.0
            .iter()
            .map(|c| json!([round_coord(c.x), round_coord(c.y)]))
            .collect(),
    )
}

fn multipolygon_coordinates(geometry: &MultiPolygon<f64>) -> Value {
    // Exterior rings counterclockwise, holes clockwise, per RFC 7946.
    let oriented = geometry.orient(Direction::Default);
    Value::Array(
        oriented
            .0
            .iter()
            .map(|polygon| {
                let mut rings = vec![ring_coordinates(polygon.exterior())];
                rings.extend(polygon.interiors().iter().map(ring_coordinates));
                Value::Array(rings)
            })
            .collect(),
    )
}

fn feature_value(feature: &ClassifiedFeature) -> Value {
    let record = &feature.record;
    json!({
        "type": "Feature",
        "properties": {
            "geoid": record.geoid.to_string(),
            "population": record.population,
            "inbound": record.inbound,
            "outbound": record.outbound,
            "daytime_pop": record.daytime_pop,
            "land_area_km2": record.land_area_km2,
            "daytime_density": record.daytime_density,
            "nighttime_density": record.nighttime_density,
            "density_class": feature.density_class,
            "net_flow": record.net_flow(),
            "excluded": record.excluded,
            "clipped_fraction": feature.clipped_fraction,
        },
        "geometry": {
            "type": "MultiPolygon",
            "coordinates": multipolygon_coordinates(&feature.clipped_geometry),
        },
    })
}

/// Write an RFC 7946 FeatureCollection, one feature per tract, in ascending
/// geoid order. Callers drop empty-geometry tracts before this point.
pub fn emit_geojson<W: Write>(
    mut writer: W,
    features: &[ClassifiedFeature],
) -> Result<(), EmitError> {
    let mut ordered: Vec<&ClassifiedFeature> = features.iter().collect();
    ordered.sort_by_key(|f| f.record.geoid);
    let doc = json!({
        "type": "FeatureCollection",
        "features": ordered.iter().map(|f| feature_value(f)).collect::<Vec<_>>(),
    });
    serde_json::to_writer(&mut writer, &doc)?;
    writer.write_all(b"\n")?;
    Ok(())
}

/// A feature read back from an emitted GeoJSON document.
#[derive(Debug, Clone)]
pub struct ParsedFeature {
    pub geoid: TractId,
    pub density_class: Option<usize>,
    pub properties: Value,
    pub geometry: MultiPolygon<f64>,
}

/// Parse a FeatureCollection produced by [`emit_geojson`].
pub fn parse_geojson<R: Read>(reader: R) -> Result<Vec<ParsedFeature>, EmitError> {
    let doc: Value = serde_json::from_reader(reader)?;
    let features = doc
        .get("features")
        .and_then(Value::as_array)
        .ok_or_else(|| EmitError::InvalidDocument("FeatureCollection".to_string()))?;
    features.iter().map(parse_feature).collect()
}

fn parse_feature(feature: &Value) -> Result<ParsedFeature, EmitError> {
    let bad = |what: &str| EmitError::InvalidDocument(what.to_string());
    let properties = feature.get("properties").cloned().unwrap_or(Value::Null);
    let geoid = properties
        .get("geoid")
        .and_then(Value::as_str)
        .and_then(|s| TractId::parse(s).ok())
        .ok_or_else(|| bad("feature geoid"))?;
    let density_class = properties
        .get("density_class")
        .and_then(Value::as_u64)
        .map(|c| c as usize);
    let coords = feature
        .pointer("/geometry/coordinates")
        .and_then(Value::as_array)
        .ok_or_else(|| bad("MultiPolygon coordinates"))?;
    let mut polygons = Vec::new();
    for polygon in coords {
        let rings = polygon.as_array().ok_or_else(|| bad("polygon rings"))?;
        let mut parsed_rings = Vec::with_capacity(rings.len());
        for ring in rings {
            let points = ring.as_array().ok_or_else(|| bad("ring"))?;
            let coords: Option<Vec<(f64, f64)>> = points
                .iter()
                .map(|p| {
                    let pair = p.as_array()?;
                    Some((pair.first()?.as_f64()?, pair.get(1)?.as_f64()?))
                })
                .collect();
            parsed_rings.push(LineString::from(coords.ok_or_else(|| bad("position"))?));
        }
        let mut rings = parsed_rings.into_iter();
        let exterior = rings.next().ok_or_else(|| bad("exterior ring"))?;
        polygons.push(geo_types::Polygon::new(exterior, rings.collect()));
    }
    Ok(ParsedFeature {
        geoid,
        density_class,
        properties,
        geometry: MultiPolygon(polygons),
    })
}

/// One legend entry of the choropleth style.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StyleClass {
    pub class: usize,
    pub color: String,
    /// Lower density bound; `None` for the first class.
    pub min: Option<f64>,
    /// Upper density bound; `None` (open-ended) for the top class.
    pub max: Option<f64>,
    pub label: String,
}

/// Map `density_class` to fill colors with a legend of density ranges.
///
/// `breaks` are the k-1 class boundaries; `palette` must supply one color
/// per class.
pub fn emit_style<W: Write>(
    mut writer: W,
    breaks: &[f64],
    palette: &[String],
) -> Result<(), EmitError> {
    let classes = breaks.len() + 1;
    if palette.len() != classes {
        return Err(EmitError::PaletteMismatch {
            classes,
            colors: palette.len(),
        });
    }
    let entries: Vec<StyleClass> = (0..classes)
        .map(|class| {
            let min = (class > 0).then(|| breaks[class - 1]);
            let max = (class < classes - 1).then(|| breaks[class]);
            let label = match (min, max) {
                (None, Some(hi)) => format!("≤ {hi:.0} persons/km²"),
                (Some(lo), Some(hi)) => format!("{lo:.0} – {hi:.0} persons/km²"),
                (Some(lo), None) => format!("≥ {lo:.0} persons/km²"),
                (None, None) => "all densities".to_string(),
            };
            StyleClass {
                class,
                color: palette[class].clone(),
                min,
                max,
                label,
            }
        })
        .collect();
    let doc = json!({
        "attribute": "density_class",
        "classes": entries,
    });
    serde_json::to_writer_pretty(&mut writer, &doc)?;
    writer.write_all(b"\n")?;
    Ok(())
}

/// A sequential multi-hue ramp (light yellow to dark red), resampled to any
/// class count.
pub fn default_palette(classes: usize) -> Vec<String> {
    const ANCHORS: [(u8, u8, u8); 7] = [
        (255, 255, 178),
        (254, 217, 118),
        (254, 178, 76),
        (253, 141, 60),
        (252, 78, 42),
        (227, 26, 28),
        (177, 0, 38),
    ];
    let lerp = |a: u8, b: u8, t: f64| -> u8 { (a as f64 + (b as f64 - a as f64) * t).round() as u8 };
    (0..classes)
        .map(|i| {
            let t = if classes == 1 {
                1.0
            } else {
                i as f64 / (classes - 1) as f64
            } * (ANCHORS.len() - 1) as f64;
            let low = (t.floor() as usize).min(ANCHORS.len() - 2);
            let frac = t - low as f64;
            let (r, g, b) = (
                lerp(ANCHORS[low].0, ANCHORS[low + 1].0, frac),
                lerp(ANCHORS[low].1, ANCHORS[low + 1].1, frac),
                lerp(ANCHORS[low].2, ANCHORS[low + 1].2, frac),
            );
            format!("#{r:02x}{g:02x}{b:02x}")
        })
        .collect()
}

const CSV_HEADER: [&str; 9] = [
    "geoid",
    "population",
    "inbound",
    "outbound",
    "daytime_pop",
    "land_area_km2",
    "daytime_density",
    "nighttime_density",
    "excluded",
];

/// Write the per-tract density table, all tracts including excluded ones,
/// in ascending geoid order. An empty collection still gets the header.
pub fn emit_csv<W: Write>(writer: W, records: &[DensityRecord]) -> Result<(), EmitError> {
    let mut ordered: Vec<&DensityRecord> = records.iter().collect();
    ordered.sort_by_key(|r| r.geoid);
    let mut csv_writer = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(writer);
    csv_writer.write_record(CSV_HEADER)?;
    for record in ordered {
        csv_writer.serialize(record)?;
    }
    csv_writer.flush()?;
    Ok(())
}

/// Read a density table written by [`emit_csv`].
pub fn read_density_csv<R: Read>(reader: R) -> Result<Vec<DensityRecord>, EmitError> {
    let mut csv_reader = csv::Reader::from_reader(reader);
    let mut records = Vec::new();
    for row in csv_reader.deserialize() {
        records.push(row?);
    }
    Ok(records)
}
