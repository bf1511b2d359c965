mod common;

use std::path::Path;
use std::process::Command;

use cci_cli::{emit_geojson, run_pipeline, run_score, Stage};
use cci_core::geokpi::MunicipalityBoundary;
use cci_core::model::{AreaId, IndexConfig};
use cci_core::report::ValidationReport;
use common::{files_under, fixture_config, fixture_dir, golden_dir};

fn cci_bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cci"))
}

/// Set `CCI_BLESS=1` to rewrite the golden files from the current output.
#[test]
fn fixture_matches_golden_files() {
    let tmp = tempfile::tempdir().unwrap();
    let summary = run_pipeline(&fixture_config(tmp.path())).unwrap();
    assert_eq!(summary.exit_code(), 0, "{}", summary.report.render());
    if std::env::var_os("CCI_BLESS").is_some() {
        let golden = golden_dir();
        let _ = std::fs::remove_dir_all(&golden);
        for f in files_under(tmp.path()) {
            let dest = golden.join(&f);
            std::fs::create_dir_all(dest.parent().unwrap()).unwrap();
            std::fs::copy(tmp.path().join(&f), dest).unwrap();
        }
    }
    let produced = files_under(tmp.path());
    assert_eq!(produced, files_under(&golden_dir()));
    for f in &produced {
        let got = std::fs::read(tmp.path().join(f)).unwrap();
        let want = std::fs::read(golden_dir().join(f)).unwrap();
        assert!(got == want, "{f} differs from its golden copy");
    }
}

#[test]
fn repeated_runs_are_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let sa = run_pipeline(&fixture_config(a.path())).unwrap();
    let sb = run_pipeline(&fixture_config(b.path())).unwrap();
    assert_eq!(sa, sb);
    assert_eq!(sa.render(), sb.render());
    for f in files_under(a.path()) {
        assert_eq!(
            std::fs::read(a.path().join(&f)).unwrap(),
            std::fs::read(b.path().join(&f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn scores_recompose_when_reparsed() {
    let tmp = tempfile::tempdir().unwrap();
    run_pipeline(&fixture_config(tmp.path())).unwrap();
    let cfg = IndexConfig::bundled();
    let mut reader = csv::Reader::from_path(tmp.path().join("scores.csv")).unwrap();
    let headers = reader.headers().unwrap().clone();
    let col = |name: &str| headers.iter().position(|h| h == name).unwrap();
    let mut rows = 0;
    for rec in reader.records() {
        let rec = rec.unwrap();
        let get = |name: &str| rec[col(name)].parse::<f64>().unwrap();
        let subs = [get("d_score"), get("ecr_score"), get("m_score"), get("w_score")];
        let recomposed: f64 = 100.0
            * AreaId::ALL
                .iter()
                .zip(subs)
                .map(|(a, s)| cfg.weights.area_weight(*a) * s)
                .sum::<f64>();
        // six printed decimals on each sub-score bound the error
        assert!(
            (recomposed - get("cci")).abs() <= 1e-4,
            "{}: {recomposed} vs {}",
            &rec[0],
            get("cci")
        );
        rows += 1;
    }
    assert_eq!(rows, 12);
}

#[test]
fn geojson_layer_has_one_feature_per_municipality() {
    let tmp = tempfile::tempdir().unwrap();
    run_pipeline(&fixture_config(tmp.path())).unwrap();
    let text = std::fs::read_to_string(tmp.path().join("cci.geojson")).unwrap();
    let layer: serde_json::Value = serde_json::from_str(&text).unwrap();
    let features = layer["features"].as_array().unwrap();
    assert_eq!(features.len(), 12);
    for f in features {
        let p = &f["properties"];
        for key in ["cci", "likert", "d_score", "ecr_score", "m_score", "w_score"] {
            assert!(p[key].is_number(), "{key} in {p}");
        }
        assert_eq!(f["geometry"]["type"], "Polygon");
    }
}

#[test]
fn missing_boundary_is_skipped_with_a_warning() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = fixture_config(tmp.path());
    let inputs = cci_cli::load_inputs(&cfg, true).unwrap();
    let mut report = ValidationReport::new();
    let scored = cci_cli::score_and_classify(&inputs, 5, &mut report).unwrap();
    let boundaries: Vec<MunicipalityBoundary> = inputs
        .boundaries
        .unwrap()
        .into_iter()
        .filter(|b| b.id != "C07")
        .collect();
    let layer = emit_geojson(&scored.results, &boundaries, &mut report);
    let v: serde_json::Value = serde_json::from_str(&layer).unwrap();
    assert_eq!(v["features"].as_array().unwrap().len(), 11);
    assert!(report.warnings().any(|w| w.scope == "C07"));
}

#[test]
fn ideal_municipality_scores_one_hundred_in_the_layer() {
    let cfg = IndexConfig::bundled();
    let result = cci_core::Index {
        id: "X".into(),
        kpi_scores: cfg.registry.codes().map(|c| (c.to_string(), 1.0)).collect(),
        area_subscores: AreaId::ALL.iter().map(|a| (*a, 1.0)).collect(),
        cci: 100.0,
        likert_level: Some(5),
        missing_kpis: vec![],
    };
    let square = geo::MultiPolygon::new(vec![geo::Polygon::new(
        geo::LineString::from(vec![(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0), (0.0, 0.0)]),
        vec![],
    )]);
    let mut report = ValidationReport::new();
    let layer = emit_geojson(&[result], &[MunicipalityBoundary::new("X", square)], &mut report);
    let v: serde_json::Value = serde_json::from_str(&layer).unwrap();
    assert_eq!(v["features"][0]["properties"]["cci"], 100.0);
}

#[test]
fn score_verb_skips_geometry() {
    let tmp = tempfile::tempdir().unwrap();
    let s = run_score(&fixture_config(tmp.path())).unwrap();
    assert_eq!(s.outputs, vec!["scores.csv", "validation.txt"]);
    let text = std::fs::read_to_string(tmp.path().join("scores.csv")).unwrap();
    // no mobility inputs: every row lists M1..M4 as missing
    assert!(text.lines().skip(1).all(|l| l.contains("M1;M2;M3;M4")));
}

#[test]
fn unreadable_manifest_exits_2_naming_ingest() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = fixture_config(tmp.path());
    cfg.manifest = tmp.path().join("nope.csv");
    let err = run_pipeline(&cfg).unwrap_err();
    assert_eq!(err.stage, Stage::Ingest);

    let out = cci_bin()
        .args(["run", "--manifest"])
        .arg(tmp.path().join("nope.csv"))
        .arg("--roster")
        .arg(fixture_dir().join("roster.csv"))
        .arg("--out")
        .arg(tmp.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("ingest"));
}

/// Copies the fixture so a test can alter it.
fn fixture_copy(dir: &Path) {
    for f in files_under(&fixture_dir()) {
        let dest = dir.join(&f);
        std::fs::create_dir_all(dest.parent().unwrap()).unwrap();
        std::fs::copy(fixture_dir().join(&f), dest).unwrap();
    }
}

#[test]
fn out_of_range_value_gives_exit_code_1() {
    let tmp = tempfile::tempdir().unwrap();
    fixture_copy(tmp.path());
    let d1 = tmp.path().join("kpi/D1.csv");
    let text = std::fs::read_to_string(&d1).unwrap().replace("C04,0", "C04,2");
    std::fs::write(&d1, text).unwrap();
    let out = cci_bin()
        .args(["score", "--manifest"])
        .arg(tmp.path().join("manifest.csv"))
        .arg("--roster")
        .arg(tmp.path().join("roster.csv"))
        .arg("--out")
        .arg(tmp.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let validation = std::fs::read_to_string(tmp.path().join("out/validation.txt")).unwrap();
    assert!(
        validation.starts_with("error\tC04\tD1: value 2.0 rejected"),
        "{validation}"
    );
}

#[test]
fn geographic_boundaries_are_refused() {
    let tmp = tempfile::tempdir().unwrap();
    fixture_copy(tmp.path());
    let b = tmp.path().join("boundaries.geojson");
    let text = std::fs::read_to_string(&b)
        .unwrap()
        .replace("EPSG::32632", "EPSG::4326");
    std::fs::write(&b, text).unwrap();
    let out = cci_bin()
        .args(["geo", "--roster"])
        .arg(tmp.path().join("roster.csv"))
        .arg("--features")
        .arg(tmp.path().join("features.geojson"))
        .arg("--boundaries")
        .arg(&b)
        .arg("--out")
        .arg(tmp.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("geo") && err.contains("metres"), "{err}");
}

#[test]
fn geo_verb_writes_mobility_table() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = fixture_dir();
    let out = cci_bin()
        .args(["geo", "--roster"])
        .arg(dir.join("roster.csv"))
        .arg("--features")
        .arg(dir.join("features.geojson"))
        .arg("--boundaries")
        .arg(dir.join("boundaries.geojson"))
        .arg("--out")
        .arg(tmp.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let got = std::fs::read(tmp.path().join("mobility.csv")).unwrap();
    assert_eq!(got, std::fs::read(golden_dir().join("mobility.csv")).unwrap());
}

#[test]
fn sweep_verb_honours_the_grid_flag() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = fixture_dir();
    let out = cci_bin()
        .args(["sweep", "--sweep-grid", "0.1,0.4", "--manifest"])
        .arg(dir.join("manifest.csv"))
        .arg("--roster")
        .arg(dir.join("roster.csv"))
        .arg("--out")
        .arg(tmp.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let grid = std::fs::read_to_string(tmp.path().join("sweep/M_grid.csv")).unwrap();
    let weights: Vec<&str> = grid.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(weights, vec!["0.100000", "0.400000"]);

    let bad = cci_bin()
        .args(["sweep", "--sweep-grid", "0.9", "--manifest"])
        .arg(dir.join("manifest.csv"))
        .arg("--roster")
        .arg(dir.join("roster.csv"))
        .arg("--out")
        .arg(tmp.path())
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn classify_verb_reads_a_scores_file() {
    let tmp = tempfile::tempdir().unwrap();
    let out = cci_bin()
        .args(["classify", "--likert-k", "3", "--scores"])
        .arg(golden_dir().join("scores.csv"))
        .arg("--out")
        .arg(tmp.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let breaks = std::fs::read_to_string(tmp.path().join("breaks.csv")).unwrap();
    assert_eq!(breaks.lines().count(), 5);
    let classes = std::fs::read_to_string(tmp.path().join("classes.csv")).unwrap();
    assert_eq!(classes.lines().count(), 13);
    assert!(classes.contains("C01,97.700000,3"));
}

#[test]
fn validate_verb_reports_without_scoring() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = fixture_dir();
    let out = cci_bin()
        .args(["validate", "--manifest"])
        .arg(dir.join("manifest.csv"))
        .arg("--roster")
        .arg(dir.join("roster.csv"))
        .arg("--out")
        .arg(tmp.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(files_under(tmp.path()), vec!["validation.txt"]);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.starts_with("municipalities\t12\nerrors\t0\n"), "{stdout}");

    let broken = tmp.path().join("weights.toml");
    std::fs::write(&broken, IndexConfig::bundled_text().replace("W = 0.3", "W = 0.4")).unwrap();
    let out = cci_bin()
        .args(["validate", "--weights"])
        .arg(&broken)
        .arg("--manifest")
        .arg(dir.join("manifest.csv"))
        .arg("--roster")
        .arg(dir.join("roster.csv"))
        .arg("--out")
        .arg(tmp.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let v = std::fs::read_to_string(tmp.path().join("validation.txt")).unwrap();
    assert!(v.contains("area weights sum"), "{v}");
}

#[test]
fn manifest_mobility_table_overrides_geometry() {
    let tmp = tempfile::tempdir().unwrap();
    fixture_copy(tmp.path());
    let ids = (1..=12).map(|i| format!("C{i:02},7\n")).collect::<String>();
    std::fs::write(tmp.path().join("kpi/M2.csv"), format!("id,value\n{ids}")).unwrap();
    let mut manifest = std::fs::read_to_string(tmp.path().join("manifest.csv")).unwrap();
    manifest.push_str("M2,kpi/M2.csv\n");
    std::fs::write(tmp.path().join("manifest.csv"), manifest).unwrap();

    let dir = tmp.path();
    let mut cfg = cci_cli::RunConfig::new(dir.join("manifest.csv"), dir.join("roster.csv"), dir.join("out"));
    cfg.features = Some(dir.join("features.geojson"));
    cfg.boundaries = Some(dir.join("boundaries.geojson"));
    let inputs = cci_cli::load_inputs(&cfg, true).unwrap();
    assert!(inputs.dataset.records().iter().all(|r| r.value("M2") == Some(7.0)));
    assert!(inputs
        .report
        .warnings()
        .any(|w| w.message.starts_with("M2: manifest table used")));
}
