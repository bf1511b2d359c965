//! Batch pipeline behind the `cci` binary: ingest, mobility geometry,
//! scoring, aggregation, classification and analysis, with every output
//! written in fixed six-decimal notation so repeated runs are byte-stable.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use cci_core::aggregate::{compute_cci, DEFAULT_HOUSEHOLD_KW};
use cci_core::analysis::{
    correlation_matrix, default_grid, descriptive_stats, sweep_area_weight, write_correlations_csv, write_stats_csv,
    DescriptiveStats, SweepResult,
};
use cci_core::classify::{assign_likert, jenks_breaks};
use cci_core::geokpi::io::{read_boundaries, read_features};
use cci_core::geokpi::{mobility_from_features, mobility_tables, MobilityKpis, MunicipalityBoundary};
use cci_core::ingest::{
    derive_self_sufficiency, join_municipalities, load_manifest, load_manifest_tables, load_roster, load_value_table,
    RosterEntry, CAPACITY_KEY, SELF_SUFFICIENCY_KPI,
};
use cci_core::model::{AreaId, IndexConfig, MunicipalityDataset, ValueType};
use cci_core::report::{fixed6, fixed6_opt, ValidationReport, GLOBAL_SCOPE};
use cci_core::scoring::score_dataset;
use cci_core::{Classification, Index, Scores};

/// Pipeline stage named in error messages.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Config,
    Ingest,
    Geo,
    Score,
    Aggregate,
    Classify,
    Analysis,
    Output,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Config => "config",
            Stage::Ingest => "ingest",
            Stage::Geo => "geo",
            Stage::Score => "score",
            Stage::Aggregate => "aggregate",
            Stage::Classify => "classify",
            Stage::Analysis => "analysis",
            Stage::Output => "output",
        })
    }
}

#[derive(Debug, thiserror::Error)]
#[error("{stage}: {message}")]
pub struct PipelineError {
    pub stage: Stage,
    pub message: String,
}

fn at<E: fmt::Display>(stage: Stage) -> impl Fn(E) -> PipelineError {
    move |e| PipelineError {
        stage,
        message: e.to_string(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub manifest: PathBuf,
    pub roster: PathBuf,
    pub features: Option<PathBuf>,
    pub boundaries: Option<PathBuf>,
    /// Registry and weights TOML; the bundled configuration when `None`.
    pub weights: Option<PathBuf>,
    pub out: PathBuf,
    pub sweep_grid: Option<Vec<f64>>,
    pub likert_k: usize,
    pub household_kw: f64,
    /// Reserved; the pipeline is deterministic.
    pub seed: Option<u64>,
}

impl RunConfig {
    pub fn new(manifest: impl Into<PathBuf>, roster: impl Into<PathBuf>, out: impl Into<PathBuf>) -> Self {
        Self {
            manifest: manifest.into(),
            roster: roster.into(),
            features: None,
            boundaries: None,
            weights: None,
            out: out.into(),
            sweep_grid: None,
            likert_k: 5,
            household_kw: DEFAULT_HOUSEHOLD_KW,
            seed: None,
        }
    }
}

/// What a run produced. `exit_code` is 0 iff the report has no errors.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub municipalities: usize,
    pub report: ValidationReport,
    pub cci_mean: Option<f64>,
    /// Paths relative to the output directory, in write order.
    pub outputs: Vec<String>,
}

impl RunSummary {
    pub fn exit_code(&self) -> i32 {
        i32::from(self.report.has_errors())
    }

    pub fn render(&self) -> String {
        let mut s = format!(
            "municipalities\t{}\nerrors\t{}\nwarnings\t{}\n",
            self.municipalities,
            self.report.errors().count(),
            self.report.warnings().count()
        );
        if let Some(m) = self.cci_mean {
            s.push_str(&format!("cci_mean\t{}\n", fixed6(m)));
        }
        for o in &self.outputs {
            s.push_str(&format!("output\t{o}\n"));
        }
        s
    }
}

/// Loads the registry and weights. Failed checks are returned in the
/// report, not raised.
pub fn load_index_config(path: Option<&Path>) -> Result<(IndexConfig, ValidationReport), PipelineError> {
    match path {
        Some(p) => IndexConfig::load_unchecked(p).map_err(at(Stage::Config)),
        None => Ok((IndexConfig::bundled(), ValidationReport::new())),
    }
}

/// Everything read from disk, joined into one dataset.
#[derive(Debug, Clone)]
pub struct Inputs {
    pub config: IndexConfig,
    pub roster: Vec<RosterEntry>,
    pub dataset: MunicipalityDataset,
    pub report: ValidationReport,
    pub mobility: Option<BTreeMap<String, MobilityKpis>>,
    pub boundaries: Option<Vec<MunicipalityBoundary>>,
}

/// Mobility KPIs from the geometry inputs.
pub fn compute_mobility(
    features: &Path,
    boundaries: &[MunicipalityBoundary],
    roster: &[RosterEntry],
) -> Result<BTreeMap<String, MobilityKpis>, PipelineError> {
    let features = read_features(features).map_err(at(Stage::Geo))?;
    log::info!("geo: {} features, {} boundaries", features.len(), boundaries.len());
    mobility_from_features(&features, boundaries, roster).map_err(at(Stage::Geo))
}

pub fn load_inputs(cfg: &RunConfig, with_geo: bool) -> Result<Inputs, PipelineError> {
    let (config, mut report) = load_index_config(cfg.weights.as_deref())?;
    if report.has_errors() {
        return Err(PipelineError {
            stage: Stage::Config,
            message: format!("invalid configuration:\n{}", report.render()),
        });
    }
    let ingest = at(Stage::Ingest);
    let roster = load_roster(&cfg.roster).map_err(&ingest)?;
    let manifest = load_manifest(&cfg.manifest).map_err(&ingest)?;
    let mut tables = load_manifest_tables(&manifest, &config.registry).map_err(&ingest)?;
    if let Some(path) = manifest.entries.get(CAPACITY_KEY) {
        if manifest.entries.contains_key(SELF_SUFFICIENCY_KPI) {
            report.warning(
                GLOBAL_SCOPE,
                format!("{SELF_SUFFICIENCY_KPI} table given; capacity table ignored"),
            );
        } else {
            let capacity = load_value_table(path, CAPACITY_KEY).map_err(&ingest)?;
            tables.push(derive_self_sufficiency(&capacity, &roster, cfg.household_kw));
        }
    }
    let (mut mobility, mut boundaries) = (None, None);
    if with_geo {
        if let Some(bpath) = &cfg.boundaries {
            boundaries = Some(read_boundaries(bpath).map_err(at(Stage::Geo))?);
        }
        if let (Some(fpath), Some(b)) = (&cfg.features, &boundaries) {
            let kpis = compute_mobility(fpath, b, &roster)?;
            for t in mobility_tables(&kpis) {
                // a table listed in the manifest wins over the geometry
                if manifest.entries.contains_key(&t.kpi_code) {
                    report.warning(
                        GLOBAL_SCOPE,
                        format!("{}: manifest table used, geometry value ignored", t.kpi_code),
                    );
                } else {
                    tables.push(t);
                }
            }
            mobility = Some(kpis);
        }
    }
    let (dataset, joined) = join_municipalities(&roster, &tables, &config.registry).map_err(&ingest)?;
    report.merge(joined);
    log::info!("ingest: {} municipalities, {} KPI tables", roster.len(), tables.len());
    Ok(Inputs {
        config,
        roster,
        dataset,
        report,
        mobility,
        boundaries,
    })
}

#[derive(Debug, Clone)]
pub struct Scored {
    pub table: Scores,
    pub results: Vec<Index>,
    pub classification: Option<Classification>,
}

/// Scores, composes and assigns Likert levels by natural breaks on the index.
pub fn score_and_classify(
    inputs: &Inputs,
    likert_k: usize,
    report: &mut ValidationReport,
) -> Result<Scored, PipelineError> {
    let registry = &inputs.config.registry;
    let table: Scores = score_dataset(&inputs.dataset, registry).map_err(at(Stage::Score))?;
    let mut results = compute_cci(&table, &inputs.config.weights, registry).map_err(at(Stage::Aggregate))?;
    let values: Vec<f64> = results.iter().map(|r| r.cci).collect();
    let mut distinct = values.clone();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    let k = likert_k.min(distinct.len());
    if k < likert_k {
        report.warning(
            "classify",
            format!("only {} distinct index values; using {k} classes", distinct.len()),
        );
    }
    let classification = if k == 0 {
        None
    } else {
        let c = jenks_breaks(&values, k).map_err(at(Stage::Classify))?;
        let levels = assign_likert(&values, &c).map_err(at(Stage::Classify))?;
        for w in levels.warnings {
            report.warning("classify", w);
        }
        for (r, l) in results.iter_mut().zip(levels.levels) {
            r.likert_level = Some(l);
        }
        Some(c)
    };
    Ok(Scored {
        table,
        results,
        classification,
    })
}

pub const SUBSCORE_COLUMNS: [&str; 4] = ["d_score", "ecr_score", "m_score", "w_score"];

fn subscore_column(a: AreaId) -> &'static str {
    SUBSCORE_COLUMNS[AreaId::ALL.iter().position(|x| *x == a).expect("known area")]
}

fn csv_bytes(f: impl FnOnce(&mut csv::Writer<&mut Vec<u8>>) -> csv::Result<()>) -> Vec<u8> {
    let mut buf = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        f(&mut w).expect("in-memory csv");
        w.flush().expect("in-memory csv");
    }
    buf
}

/// `id`, one score per KPI (registry order), the four sub-scores, `cci`,
/// `likert` and the `;`-joined codes of missing KPIs.
pub fn scores_csv(results: &[Index], config: &IndexConfig) -> Vec<u8> {
    csv_bytes(|w| {
        let mut header = vec!["id".to_string()];
        header.extend(config.registry.codes().map(str::to_string));
        header.extend(SUBSCORE_COLUMNS.iter().map(|s| s.to_string()));
        header.extend(["cci", "likert", "missing"].map(String::from));
        w.write_record(&header)?;
        for r in results {
            let mut rec = vec![r.id.clone()];
            rec.extend(
                config
                    .registry
                    .codes()
                    .map(|c| fixed6_opt(r.kpi_scores.get(c).copied())),
            );
            rec.extend(AreaId::ALL.iter().map(|a| fixed6(r.area_subscore(*a))));
            rec.push(fixed6(r.cci));
            rec.push(r.likert_level.map(|l| l.to_string()).unwrap_or_default());
            rec.push(r.missing_kpis.join(";"));
            w.write_record(&rec)?;
        }
        Ok(())
    })
}

/// Statistics of the numeric and percentage KPIs plus the index.
pub fn stats_columns(dataset: &MunicipalityDataset, results: &[Index]) -> Vec<(String, Option<DescriptiveStats>)> {
    let mut cols: Vec<(String, Option<DescriptiveStats>)> = dataset
        .registry()
        .kpis()
        .iter()
        .filter(|k| matches!(k.value_type, ValueType::Percentage | ValueType::Number))
        .map(|k| {
            let values: Vec<f64> = dataset.records().iter().filter_map(|r| r.value(&k.code)).collect();
            (k.code.clone(), descriptive_stats(&values).ok())
        })
        .collect();
    let cci: Vec<f64> = results.iter().map(|r| r.cci).collect();
    cols.push(("CCI".into(), descriptive_stats(&cci).ok()));
    cols
}

/// Index, sub-scores and log population, one row per municipality.
pub fn correlation_columns(dataset: &MunicipalityDataset, results: &[Index]) -> Vec<(String, Vec<Option<f64>>)> {
    let mut cols = vec![("cci".to_string(), results.iter().map(|r| Some(r.cci)).collect())];
    for a in AreaId::ALL {
        cols.push((
            subscore_column(a).to_string(),
            results.iter().map(|r| Some(r.area_subscore(a))).collect(),
        ));
    }
    let log_pop = results
        .iter()
        .map(|r| {
            dataset
                .get(&r.id)
                .filter(|m| m.population > 0)
                .map(|m| (m.population as f64).ln())
        })
        .collect();
    cols.push(("log_population".to_string(), log_pop));
    cols
}

pub fn mobility_csv(kpis: &BTreeMap<String, MobilityKpis>) -> Vec<u8> {
    csv_bytes(|w| {
        w.write_record(["id", "M1", "M2", "M3", "M4"])?;
        for (id, k) in kpis {
            w.write_record([
                id.clone(),
                fixed6_opt(k.m1),
                fixed6_opt(k.m2),
                fixed6_opt(k.m3),
                fixed6_opt(k.m4),
            ])?;
        }
        Ok(())
    })
}

/// Fixed-point value for GeoJSON properties.
fn json_number(v: f64) -> serde_json::Value {
    let rounded: f64 = fixed6(v).parse().expect("formatted number");
    serde_json::Value::from(rounded)
}

/// One feature per result that has a boundary; results without one are
/// skipped with a warning. Geometry is passed through as read.
pub fn emit_geojson(results: &[Index], boundaries: &[MunicipalityBoundary], report: &mut ValidationReport) -> String {
    let by_id: BTreeMap<&str, &MunicipalityBoundary> = boundaries.iter().map(|b| (b.id.as_str(), b)).collect();
    let mut features = Vec::new();
    for r in results {
        let Some(b) = by_id.get(r.id.as_str()) else {
            report.warning(r.id.as_str(), "no boundary; left out of the GeoJSON layer");
            continue;
        };
        let geometry = b
            .source_geometry
            .clone()
            .unwrap_or_else(|| geojson::Geometry::new(geojson::GeometryValue::from(&b.shape)));
        let mut props = serde_json::Map::new();
        props.insert("id".into(), r.id.clone().into());
        props.insert("cci".into(), json_number(r.cci));
        props.insert(
            "likert".into(),
            r.likert_level.map(serde_json::Value::from).unwrap_or_default(),
        );
        for a in AreaId::ALL {
            props.insert(subscore_column(a).into(), json_number(r.area_subscore(a)));
        }
        features.push(geojson::Feature {
            bbox: None,
            geometry: Some(geometry),
            id: None,
            properties: Some(props),
            foreign_members: None,
        });
    }
    let fc = geojson::FeatureCollection {
        bbox: None,
        features,
        foreign_members: None,
    };
    let mut s = serde_json::to_string_pretty(&fc).expect("collection serialises");
    s.push('\n');
    s
}

struct OutputDir {
    root: PathBuf,
    written: Vec<String>,
}

impl OutputDir {
    fn new(root: &Path) -> Result<Self, PipelineError> {
        std::fs::create_dir_all(root).map_err(|e| PipelineError {
            stage: Stage::Output,
            message: format!("{}: {e}", root.display()),
        })?;
        Ok(Self {
            root: root.to_path_buf(),
            written: Vec::new(),
        })
    }

    fn write(&mut self, rel: &str, bytes: &[u8]) -> Result<(), PipelineError> {
        let path = self.root.join(rel);
        let fail = |e: std::io::Error| PipelineError {
            stage: Stage::Output,
            message: format!("{}: {e}", path.display()),
        };
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(fail)?;
        }
        std::fs::write(&path, bytes).map_err(fail)?;
        self.written.push(rel.to_string());
        Ok(())
    }
}

fn sweep_grid(cfg: &RunConfig) -> Vec<f64> {
    cfg.sweep_grid.clone().unwrap_or_else(default_grid)
}

fn analysis_bytes(
    f: impl FnOnce(&mut Vec<u8>) -> Result<(), cci_core::analysis::AnalysisError>,
) -> Result<Vec<u8>, PipelineError> {
    let mut buf = Vec::new();
    f(&mut buf).map_err(at(Stage::Analysis))?;
    Ok(buf)
}

/// Sweeps every area and writes `sweep/<AREA>_{grid,cci,hist}.csv`,
/// `sweep/<AREA>.json` and `sweep/summary.csv`.
fn write_sweeps(out: &mut OutputDir, inputs: &Inputs, table: &Scores, grid: &[f64]) -> Result<(), PipelineError> {
    let cfg = &inputs.config;
    let mut sweeps: Vec<SweepResult<f64>> = Vec::new();
    for area in AreaId::ALL {
        let s = sweep_area_weight(table, &cfg.weights, &cfg.registry, area, grid).map_err(at(Stage::Analysis))?;
        out.write(
            &format!("sweep/{area}_grid.csv"),
            &analysis_bytes(|b| s.write_grid_csv(b))?,
        )?;
        out.write(
            &format!("sweep/{area}_cci.csv"),
            &analysis_bytes(|b| s.write_cci_csv(b))?,
        )?;
        out.write(
            &format!("sweep/{area}_hist.csv"),
            &analysis_bytes(|b| s.write_histogram_csv(b))?,
        )?;
        out.write(&format!("sweep/{area}.json"), format!("{}\n", s.to_json()).as_bytes())?;
        sweeps.push(s);
    }
    let summary = csv_bytes(|w| {
        w.write_record(["area", "base_weight", "delta_mean", "delta_max", "absolute_count"])?;
        for s in &sweeps {
            let relative = s.max_delta.values().filter(|m| !m.absolute).map(|m| m.delta);
            w.write_record([
                s.area.to_string(),
                fixed6(cfg.weights.area_weight(s.area)),
                fixed6(s.delta_mean),
                fixed6(relative.fold(0.0, f64::max)),
                s.max_delta.values().filter(|m| m.absolute).count().to_string(),
            ])?;
        }
        Ok(())
    });
    out.write("sweep/summary.csv", &summary)
}

fn finish(out: OutputDir, report: ValidationReport, municipalities: usize, results: &[Index]) -> RunSummary {
    let cci_mean = (!results.is_empty()).then(|| results.iter().map(|r| r.cci).sum::<f64>() / results.len() as f64);
    RunSummary {
        municipalities,
        report,
        cci_mean,
        outputs: out.written,
    }
}

/// Full run: every stage and every output.
pub fn run_pipeline(cfg: &RunConfig) -> Result<RunSummary, PipelineError> {
    let inputs = load_inputs(cfg, true)?;
    let mut report = inputs.report.clone();
    let scored = score_and_classify(&inputs, cfg.likert_k, &mut report)?;
    let mut out = OutputDir::new(&cfg.out)?;
    out.write("scores.csv", &scores_csv(&scored.results, &inputs.config))?;
    if let Some(k) = &inputs.mobility {
        out.write("mobility.csv", &mobility_csv(k))?;
    }

    let stats = stats_columns(&inputs.dataset, &scored.results);
    out.write("stats.csv", &analysis_bytes(|b| write_stats_csv(b, &stats))?)?;
    match correlation_matrix(&correlation_columns(&inputs.dataset, &scored.results)) {
        Ok(m) => {
            for w in &m.warnings {
                report.warning("analysis", w.clone());
            }
            out.write("correlations.csv", &analysis_bytes(|b| write_correlations_csv(b, &m))?)?;
        }
        Err(e) => report.warning("analysis", format!("correlations skipped: {e}")),
    }
    write_sweeps(&mut out, &inputs, &scored.table, &sweep_grid(cfg))?;

    if let Some(b) = &inputs.boundaries {
        let layer = emit_geojson(&scored.results, b, &mut report);
        out.write("cci.geojson", layer.as_bytes())?;
    }
    out.write("validation.txt", report.render().as_bytes())?;
    Ok(finish(out, report, inputs.roster.len(), &scored.results))
}

/// Ingest, score, aggregate and classify; no geometry or analysis.
pub fn run_score(cfg: &RunConfig) -> Result<RunSummary, PipelineError> {
    let inputs = load_inputs(cfg, false)?;
    let mut report = inputs.report.clone();
    let scored = score_and_classify(&inputs, cfg.likert_k, &mut report)?;
    let mut out = OutputDir::new(&cfg.out)?;
    out.write("scores.csv", &scores_csv(&scored.results, &inputs.config))?;
    out.write("validation.txt", report.render().as_bytes())?;
    Ok(finish(out, report, inputs.roster.len(), &scored.results))
}

/// Mobility KPIs only; needs roster, features and boundaries.
pub fn run_geo(cfg: &RunConfig) -> Result<RunSummary, PipelineError> {
    let missing = |what: &str| PipelineError {
        stage: Stage::Geo,
        message: format!("--{what} is required"),
    };
    let features = cfg.features.as_ref().ok_or_else(|| missing("features"))?;
    let bpath = cfg.boundaries.as_ref().ok_or_else(|| missing("boundaries"))?;
    let roster = load_roster(&cfg.roster).map_err(at(Stage::Ingest))?;
    let boundaries = read_boundaries(bpath).map_err(at(Stage::Geo))?;
    let kpis = compute_mobility(features, &boundaries, &roster)?;
    let mut report = ValidationReport::new();
    for (id, k) in &kpis {
        for (code, v) in [("M1", k.m1), ("M2", k.m2), ("M4", k.m4)] {
            if v.is_none() {
                report.warning(id.as_str(), format!("{code}: population is 0, value undefined"));
            }
        }
    }
    let mut out = OutputDir::new(&cfg.out)?;
    out.write("mobility.csv", &mobility_csv(&kpis))?;
    out.write("validation.txt", report.render().as_bytes())?;
    Ok(finish(out, report, roster.len(), &[]))
}

/// Scores the inputs and writes the weight sweeps.
pub fn run_sweep(cfg: &RunConfig) -> Result<RunSummary, PipelineError> {
    let inputs = load_inputs(cfg, true)?;
    let report = inputs.report.clone();
    let table: Scores = score_dataset(&inputs.dataset, &inputs.config.registry).map_err(at(Stage::Score))?;
    let mut out = OutputDir::new(&cfg.out)?;
    write_sweeps(&mut out, &inputs, &table, &sweep_grid(cfg))?;
    out.write("validation.txt", report.render().as_bytes())?;
    let results = compute_cci(&table, &inputs.config.weights, &inputs.config.registry).map_err(at(Stage::Aggregate))?;
    Ok(finish(out, report, inputs.roster.len(), &results))
}

/// Configuration and input checks only. Configuration problems are
/// reported rather than raised.
pub fn run_validate(cfg: &RunConfig) -> Result<RunSummary, PipelineError> {
    let (_, config_report) = load_index_config(cfg.weights.as_deref())?;
    if config_report.has_errors() {
        let mut out = OutputDir::new(&cfg.out)?;
        out.write("validation.txt", config_report.render().as_bytes())?;
        return Ok(RunSummary {
            municipalities: 0,
            report: config_report,
            cci_mean: None,
            outputs: out.written,
        });
    }
    let inputs = load_inputs(cfg, true)?;
    let mut out = OutputDir::new(&cfg.out)?;
    out.write("validation.txt", inputs.report.render().as_bytes())?;
    Ok(finish(out, inputs.report, inputs.roster.len(), &[]))
}

/// Natural breaks on one numeric column of a CSV (by default `cci` of a
/// `scores.csv`). Writes `breaks.csv` and `classes.csv`.
pub fn run_classify(scores: &Path, column: &str, k: usize, out_dir: &Path) -> Result<RunSummary, PipelineError> {
    let ingest = at(Stage::Ingest);
    let mut reader = csv::Reader::from_path(scores).map_err(|e| PipelineError {
        stage: Stage::Ingest,
        message: format!("{}: {e}", scores.display()),
    })?;
    let headers = reader.headers().map_err(&ingest)?.clone();
    let col = headers.iter().position(|h| h == column).ok_or_else(|| PipelineError {
        stage: Stage::Ingest,
        message: format!("{}: no column {column:?}", scores.display()),
    })?;
    let id_col = headers.iter().position(|h| h == "id");
    let mut ids = Vec::new();
    let mut values = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(&ingest)?;
        let cell = rec.get(col).unwrap_or("");
        let v: f64 = cell.trim().parse().map_err(|_| PipelineError {
            stage: Stage::Ingest,
            message: format!(
                "{}: row {}: {column} = {cell:?} is not a number",
                scores.display(),
                i + 1
            ),
        })?;
        ids.push(
            id_col
                .and_then(|c| rec.get(c))
                .map(str::to_string)
                .unwrap_or_else(|| (i + 1).to_string()),
        );
        values.push(v);
    }
    let c = jenks_breaks(&values, k).map_err(at(Stage::Classify))?;
    let levels = assign_likert(&values, &c).map_err(at(Stage::Classify))?;
    let mut report = ValidationReport::new();
    for w in levels.warnings {
        report.warning("classify", w);
    }
    let breaks = csv_bytes(|w| {
        w.write_record(["level", "upper_break", "count"])?;
        for (i, (b, n)) in c.breaks.iter().zip(&c.class_sizes).enumerate() {
            w.write_record([(i + 1).to_string(), fixed6(*b), n.to_string()])?;
        }
        w.write_record(["gvf".to_string(), fixed6(c.gvf), String::new()])?;
        Ok(())
    });
    let classes = csv_bytes(|w| {
        w.write_record(["id", column, "level"])?;
        for ((id, v), l) in ids.iter().zip(&values).zip(&levels.levels) {
            w.write_record([id.clone(), fixed6(*v), l.to_string()])?;
        }
        Ok(())
    });
    let mut out = OutputDir::new(out_dir)?;
    out.write("breaks.csv", &breaks)?;
    out.write("classes.csv", &classes)?;
    Ok(RunSummary {
        municipalities: values.len(),
        report,
        cci_mean: None,
        outputs: out.written,
    })
}
