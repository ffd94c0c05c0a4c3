//! Parallel vs sequential throughput for the two data-parallel stages:
//! OD parse+aggregate and tract clipping.

use std::io::Cursor;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use geo_types::{LineString, MultiPolygon, Polygon};

use daypop::census::TractRecord;
use daypop::clip::PreparedBoundary;
use daypop::flows::{
    aggregate_source_parallel, aggregate_source_sequential, AggregateOptions,
};
use daypop::lodes::OdSource;
use daypop::pipeline::{clip_tracts_parallel, clip_tracts_sequential};
use daypop::TractId;

fn synthetic_od_csv(rows: usize) -> Vec<u8> {
    let mut out = String::with_capacity(rows * 48);
    out.push_str("w_geocode,h_geocode,S000,SA01,SA02,SA03,SE01,SE02,SE03,SI01,SI02,SI03,createdate\n");
    let mut state = 0x9e3779b97f4a7c15u64;
    for _ in 0..rows {
        state = state
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        let work_tract = state % 8000;
        let home_tract = (state >> 17) % 8000;
        let jobs = (state >> 43) % 40 + 1;
        out.push_str(&format!(
            "06{:03}{:06}1{:03},06{:03}{:06}1{:03},{},0,0,0,0,0,0,0,0,0,20130311\n",
            work_tract % 58,
            work_tract,
            work_tract % 997,
            home_tract % 58,
            home_tract,
            home_tract % 997,
            jobs,
        ));
    }
    out.into_bytes()
}

fn bench_aggregate(c: &mut Criterion) {
    let rows = 400_000;
    let data = synthetic_od_csv(rows);
    let mut group = c.benchmark_group("od_aggregate");
    group.throughput(Throughput::Elements(rows as u64));
    group.sample_size(10);
    group.bench_with_input(BenchmarkId::new("sequential", rows), &data, |b, data| {
        b.iter(|| {
            let source = OdSource::new(Cursor::new(data.clone())).unwrap();
            aggregate_source_sequential(source, AggregateOptions::default()).unwrap()
        })
    });
    group.bench_with_input(BenchmarkId::new("parallel", rows), &data, |b, data| {
        b.iter(|| {
            let source = OdSource::new(Cursor::new(data.clone())).unwrap();
            aggregate_source_parallel(source, AggregateOptions::default()).unwrap()
        })
    });
    group.finish();
}

fn grid_tracts(side: usize) -> Vec<TractRecord> {
    let mut tracts = Vec::with_capacity(side * side);
    for row in 0..side {
        for col in 0..side {
            let (x0, y0) = (col as f64, row as f64);
            tracts.push(TractRecord {
                geoid: TractId::parse(&format!("06001{:06}", row * side + col)).unwrap(),
                population: 100,
                land_area_m2: 1_000_000,
                geometry: MultiPolygon(vec![Polygon::new(
                    LineString::from(vec![
                        (x0, y0),
                        (x0 + 1.0, y0),
                        (x0 + 1.0, y0 + 1.0),
                        (x0, y0 + 1.0),
                        (x0, y0),
                    ]),
                    vec![],
                )]),
            });
        }
    }
    tracts
}

fn jagged_boundary(side: usize) -> PreparedBoundary {
    // A saw-toothed outline so a band of tracts needs real intersection.
    let extent = side as f64;
    let mut coords = vec![(0.0, 0.0), (extent, 0.0)];
    let teeth = 64;
    for i in 0..=teeth {
        let x = extent - extent * i as f64 / teeth as f64;
        let y = extent * 0.75 + if i % 2 == 0 { 0.2 } else { -0.2 } * extent / 10.0;
        coords.push((x, y));
    }
    coords.push((0.0, 0.0));
    PreparedBoundary::from_geometry(MultiPolygon(vec![Polygon::new(
        LineString::from(coords),
        vec![],
    )]))
    .unwrap()
}

fn bench_clip(c: &mut Criterion) {
    let side = 40;
    let tracts = grid_tracts(side);
    let boundary = jagged_boundary(side);
    let mut group = c.benchmark_group("clip_tracts");
    group.throughput(Throughput::Elements((side * side) as u64));
    group.sample_size(10);
    group.bench_function("sequential", |b| {
        b.iter(|| clip_tracts_sequential(&tracts, &boundary).unwrap())
    });
    group.bench_function("parallel", |b| {
        b.iter(|| clip_tracts_parallel(&tracts, &boundary).unwrap())
    });
    group.finish();
}

criterion_group!(benches, bench_aggregate, bench_clip);
criterion_main!(benches);
