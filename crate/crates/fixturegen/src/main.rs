//! Writes the synthetic three-tract fixture bundle used by the test suites:
//! a tract shapefile, a states shapefile, and a six-row OD file.
//!
//! The numbers are chosen so every pipeline figure can be enumerated by
//! hand; the expected values live next to the tests that assert them.
//! Usage: `cargo run -p daypop-fixturegen -- [output-dir]` (default
//! `fixtures/`).

use std::fs::{self, File};
use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use flate2::{write::GzEncoder, Compression};
use geo_types::{LineString, Polygon};
use shapefile::dbase::{FieldName, FieldValue, Record, TableWriterBuilder};

fn square(x0: f64, y0: f64, x1: f64, y1: f64) -> Polygon<f64> {
    Polygon::new(
        LineString::from(vec![(x0, y0), (x1, y0), (x1, y1), (x0, y1), (x0, y0)]),
        vec![],
    )
}

/// geoid, population, ALAND (m²), footprint.
/// Tract B (06001000200) straddles the east edge of the state square, so
/// clipping halves it; A and C are fully inland.
fn tracts() -> Vec<(&'static str, u64, u64, Polygon<f64>)> {
    vec![
        ("06001000100", 1000, 2_000_000, square(1.0, 1.0, 3.0, 3.0)),
        ("06001000200", 800, 500_000, square(9.0, 4.0, 11.0, 6.0)),
        ("06075000100", 300, 250_000, square(5.0, 5.0, 6.0, 6.0)),
    ]
}

/// work block, home block, jobs. Tract totals: A in 16 / out 10 / intra 6,
/// B in 7 / out 30, C in 25 / out 8 / intra 5; 48 jobs conserved.
const OD_ROWS: [(&str, &str, u64); 6] = [
    ("060010001001001", "060010002001001", 10),
    ("060010002001001", "060010001001001", 4),
    ("060010001001002", "060010001001001", 6),
    ("060750001001001", "060010002001002", 20),
    ("060010002001001", "060750001001001", 3),
    ("060750001001001", "060750001001002", 5),
];

fn write_tracts(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let table = TableWriterBuilder::new()
        .add_character_field(FieldName::try_from("GEOID10").unwrap(), 11)
        .add_numeric_field(FieldName::try_from("DP0010001").unwrap(), 9, 0)
        .add_numeric_field(FieldName::try_from("ALAND10").unwrap(), 14, 0);
    let mut writer = shapefile::Writer::from_path(dir.join("fixture_tracts.shp"), table)?;
    for (geoid, population, aland, polygon) in tracts() {
        let shape: shapefile::Polygon = polygon.into();
        let mut record = Record::default();
        record.insert(
            "GEOID10".to_string(),
            FieldValue::Character(Some(geoid.to_string())),
        );
        record.insert(
            "DP0010001".to_string(),
            FieldValue::Numeric(Some(population as f64)),
        );
        record.insert(
            "ALAND10".to_string(),
            FieldValue::Numeric(Some(aland as f64)),
        );
        writer.write_shape_and_record(&shape, &record)?;
    }
    Ok(())
}

fn write_states(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let table = TableWriterBuilder::new()
        .add_character_field(FieldName::try_from("STATE").unwrap(), 2)
        .add_character_field(FieldName::try_from("NAME").unwrap(), 24);
    let mut writer = shapefile::Writer::from_path(dir.join("fixture_states.shp"), table)?;
    let rows = [
        ("06", "Fixture State", square(0.0, 0.0, 10.0, 10.0)),
        ("32", "Neighbor State", square(10.0, 0.0, 20.0, 10.0)),
    ];
    for (fips, name, polygon) in rows {
        let shape: shapefile::Polygon = polygon.into();
        let mut record = Record::default();
        record.insert(
            "STATE".to_string(),
            FieldValue::Character(Some(fips.to_string())),
        );
        record.insert(
            "NAME".to_string(),
            FieldValue::Character(Some(name.to_string())),
        );
        writer.write_shape_and_record(&shape, &record)?;
    }
    Ok(())
}

fn od_csv() -> String {
    let mut out = String::from(
        "w_geocode,h_geocode,S000,SA01,SA02,SA03,SE01,SE02,SE03,SI01,SI02,SI03,createdate\n",
    );
    for (work, home, jobs) in OD_ROWS {
        out.push_str(&format!(
            "{work},{home},{jobs},0,0,0,0,0,0,0,0,0,20130311\n"
        ));
    }
    out
}

fn write_od(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let csv = od_csv();
    fs::write(dir.join("fixture_od.csv"), &csv)?;
    let file = File::create(dir.join("fixture_od.csv.gz"))?;
    let mut encoder = GzEncoder::new(file, Compression::default());
    encoder.write_all(csv.as_bytes())?;
    encoder.finish()?;
    Ok(())
}

fn main() -> Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "fixtures".to_string());
    let out = Path::new(&out);
    write_tracts(&out.join("tracts")).context("tract bundle")?;
    write_states(&out.join("states")).context("states bundle")?;
    write_od(&out.join("od")).context("od file")?;
    println!("fixtures written under {}", out.display());
    Ok(())
}
