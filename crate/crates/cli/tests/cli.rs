//! Command-line surface tests: subcommands, exit codes, and output files,
//! all against the committed fixture bundle.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(path: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(path)
        .to_str()
        .unwrap()
        .to_string()
}

fn daypop(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_daypop"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_on_fixture(out_dir: &Path, extra: &[&str]) -> Output {
    let tracts = fixture("tracts");
    let states = fixture("states");
    let lodes = fixture("od/fixture_od.csv.gz");
    let out = out_dir.to_str().unwrap().to_string();
    let mut args = vec![
        "run",
        "--tracts",
        &tracts,
        "--states",
        &states,
        "--lodes",
        &lodes,
        "--state-fips",
        "06",
        "--county",
        "06001,06075",
        "--quantile-k",
        "2",
        "--out",
        &out,
    ];
    args.extend_from_slice(extra);
    daypop(&args)
}

#[test]
fn run_writes_all_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let output = run_on_fixture(dir.path(), &["--dump-marginals"]);
    assert!(output.status.success(), "{output:?}");
    for name in [
        "density.csv",
        "tracts.geojson",
        "style.json",
        "report.txt",
        "report.json",
        "od_marginals.csv",
    ] {
        assert!(dir.path().join(name).is_file(), "missing {name}");
    }
    let stdout = String::from_utf8(output.stdout).unwrap();
    assert!(stdout.contains("od rows parsed: 6"), "{stdout}");
}

#[test]
fn rerun_regenerates_deleted_outputs_identically() {
    let dir = tempfile::tempdir().unwrap();
    assert!(run_on_fixture(dir.path(), &[]).status.success());
    let csv = dir.path().join("density.csv");
    let geojson = dir.path().join("tracts.geojson");
    let first_csv = fs::read(&csv).unwrap();
    let first_geojson = fs::read(&geojson).unwrap();

    fs::remove_file(&csv).unwrap();
    assert!(run_on_fixture(dir.path(), &[]).status.success());
    assert_eq!(fs::read(&csv).unwrap(), first_csv);
    assert_eq!(fs::read(&geojson).unwrap(), first_geojson);
}

#[test]
fn empty_county_list_exits_1_before_ingestion() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("config.toml");
    // Point at inputs that do not exist: validation must fire first.
    fs::write(&config, "county_fips = []\ntracts = \"missing\"\n").unwrap();
    let output = daypop(&["run", "--config", config.to_str().unwrap()]);
    assert_eq!(output.status.code(), Some(1));
    let stderr = String::from_utf8(output.stderr).unwrap();
    assert!(stderr.contains("county_fips"), "{stderr}");
}

#[test]
fn missing_input_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let tracts = fixture("tracts");
    let states = fixture("states");
    let output = daypop(&[
        "run",
        "--tracts",
        &tracts,
        "--states",
        &states,
        "--lodes",
        "no/such/file.csv.gz",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn unwritable_out_dir_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("blocker");
    fs::write(&blocker, b"file, not dir").unwrap();
    let out = blocker.join("nested");
    let output = run_on_fixture(&out, &[]);
    assert_eq!(output.status.code(), Some(3));
}

#[test]
fn malformed_od_row_is_fatal_unless_lenient() {
    let dir = tempfile::tempdir().unwrap();
    let od = dir.path().join("od.csv");
    let good = fs::read_to_string(fixture("od/fixture_od.csv")).unwrap();
    fs::write(&od, format!("{good}garbage,row,0,0,0,0,0,0,0,0,0,0,x\n")).unwrap();

    let tracts = fixture("tracts");
    let states = fixture("states");
    let base = [
        "run",
        "--tracts",
        tracts.as_str(),
        "--states",
        states.as_str(),
        "--lodes",
        od.to_str().unwrap(),
        "--state-fips",
        "06",
        "--county",
        "06001,06075",
        "--quantile-k",
        "2",
    ];

    let strict_out = dir.path().join("strict");
    let mut args = base.to_vec();
    args.extend_from_slice(&["--out", strict_out.to_str().unwrap()]);
    let strict = daypop(&args);
    assert_eq!(strict.status.code(), Some(2));
    let stderr = String::from_utf8(strict.stderr).unwrap();
    assert!(stderr.contains("line 8"), "{stderr}");

    let lenient_out = dir.path().join("lenient");
    let mut args = base.to_vec();
    args.extend_from_slice(&["--lenient", "--out", lenient_out.to_str().unwrap()]);
    let lenient = daypop(&args);
    assert_eq!(lenient.status.code(), Some(0), "{lenient:?}");
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(lenient_out.join("report.json")).unwrap())
            .unwrap();
    assert_eq!(report["rows_parsed"], serde_json::json!(6));
    assert_eq!(report["rows_skipped"], serde_json::json!(1));
}

#[test]
fn flags_win_over_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("config.toml");
    let body = format!(
        "tracts = {:?}\nstates = {:?}\nlodes = {:?}\nstate_fips = \"06\"\ncounty_fips = [\"06001\", \"06075\"]\nquantile_k = 3\n",
        fixture("tracts"),
        fixture("states"),
        fixture("od/fixture_od.csv.gz"),
    );
    fs::write(&config, body).unwrap();
    let out = dir.path().join("out");
    let output = daypop(&[
        "run",
        "--config",
        config.to_str().unwrap(),
        "--quantile-k",
        "2",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(output.status.success(), "{output:?}");
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["stats"]["quantile_k"], serde_json::json!(2));
}

#[test]
fn validate_accepts_fixture_and_rejects_state_mixups() {
    let tracts = fixture("tracts");
    let states = fixture("states");
    let lodes = fixture("od/fixture_od.csv");
    let ok = daypop(&[
        "validate",
        "--tracts",
        &tracts,
        "--states",
        &states,
        "--lodes",
        &lodes,
        "--state-fips",
        "06",
        "--county",
        "06001,06075",
    ]);
    assert!(ok.status.success(), "{ok:?}");
    let stdout = String::from_utf8(ok.stdout).unwrap();
    assert!(stdout.contains("48 jobs"), "{stdout}");

    let dir = tempfile::tempdir().unwrap();
    let mixed = dir.path().join("od.csv");
    let good = fs::read_to_string(fixture("od/fixture_od.csv")).unwrap();
    fs::write(
        &mixed,
        format!("{good}320010001001001,060010001001001,5,0,0,0,0,0,0,0,0,0,20130311\n"),
    )
    .unwrap();
    let bad = daypop(&[
        "validate",
        "--tracts",
        &tracts,
        "--states",
        &states,
        "--lodes",
        mixed.to_str().unwrap(),
        "--state-fips",
        "06",
        "--county",
        "06001,06075",
    ]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn stats_subcommand_reproduces_the_report() {
    let dir = tempfile::tempdir().unwrap();
    assert!(run_on_fixture(dir.path(), &[]).status.success());
    let rerun = dir.path().join("rerun");
    let csv = dir.path().join("density.csv");
    let output = daypop(&[
        "stats",
        "--csv",
        csv.to_str().unwrap(),
        "--quantile-k",
        "2",
        "--out",
        rerun.to_str().unwrap(),
    ]);
    assert!(output.status.success(), "{output:?}");

    let full: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("report.json")).unwrap())
            .unwrap();
    let redone: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(rerun.join("report.json")).unwrap()).unwrap();
    assert_eq!(full["stats"], redone["stats"]);
}

#[test]
fn cache_env_var_is_honored() {
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().join("cache-from-env");
    let out: PathBuf = dir.path().join("out");
    // All inputs are local; the run must succeed without touching the cache,
    // and the configured directory must come from the environment.
    let output = Command::new(env!("CARGO_BIN_EXE_daypop"))
        .env("DAYPOP_CACHE_DIR", &cache)
        .args([
            "run",
            "--tracts",
            &fixture("tracts"),
            "--states",
            &fixture("states"),
            "--lodes",
            &fixture("od/fixture_od.csv.gz"),
            "--state-fips",
            "06",
            "--county",
            "06001,06075",
            "--quantile-k",
            "2",
            "--out",
            out.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(output.status.success(), "{output:?}");
    assert!(!cache.exists(), "local inputs must not populate the cache");
}
