//! CSV ingestion: municipality roster, per-KPI value tables and the
//! manifest that ties KPI codes to files.
//!
//! File formats (UTF-8, header row required, extra columns ignored):
//!
//! * roster: `id,name,region,population,land_area_km2,households`
//!   (`households` may be empty)
//! * KPI table: `id,value`; an empty value or text such as `n/a` is
//!   recorded as missing with a warning; a decimal comma is accepted
//!   (`"0,65"`), in which case dots are read as thousands separators
//! * manifest: `kpi,path`, paths relative to the manifest's directory; the
//!   key [`CAPACITY_KEY`] names a table of installed renewable capacity
//!   (kW) from which ECR3 is derived when no ECR3 table is given

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aggregate::{compute_self_sufficiency, EnergyCapacityRecord};
use crate::model::{DatasetError, KpiDefinition, KpiRegistry, MunicipalityDataset, MunicipalityRecord, ValueType};
use crate::report::ValidationReport;

/// Manifest key for the renewable capacity table.
pub const CAPACITY_KEY: &str = "renewable_capacity_kw";
/// KPI code of the self-sufficiency ratio.
pub const SELF_SUFFICIENCY_KPI: &str = "ECR3";

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("file not found: {0}")]
    NotFound(String),
    #[error("cannot read {path}: {message}")]
    Read { path: String, message: String },
    #[error("{path}: header is missing column {column:?}")]
    HeaderMismatch { path: String, column: String },
    #[error("{path}, line {line}: {message}")]
    Row { path: String, line: u64, message: String },
    #[error("{path}: municipality {id} appears twice")]
    DuplicateRow { path: String, id: String },
    #[error("roster is empty")]
    EmptyRoster,
    #[error("duplicate municipality id {0} in roster")]
    DuplicateMunicipality(String),
    #[error("table for KPI {0} is not in the registry")]
    UnknownKpi(String),
    #[error("more than one table given for KPI {0}")]
    DuplicateTable(String),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RosterEntry {
    pub id: String,
    pub name: String,
    pub region: String,
    pub population: u64,
    pub land_area_km2: f64,
    pub households: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawRow {
    pub id: String,
    /// Cell text as read.
    pub raw: String,
    pub value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawKpiTable {
    pub kpi_code: String,
    pub source: String,
    pub rows: Vec<RawRow>,
    /// Warnings raised while parsing.
    pub report: ValidationReport,
}

impl RawKpiTable {
    pub fn missing_count(&self) -> usize {
        self.rows.iter().filter(|r| r.value.is_none()).count()
    }

    /// Builds a table from already-computed values (geo pipeline, derived KPIs).
    pub fn from_values(
        kpi_code: impl Into<String>,
        source: impl Into<String>,
        values: impl IntoIterator<Item = (String, Option<f64>)>,
    ) -> Self {
        let rows = values
            .into_iter()
            .map(|(id, value)| RawRow {
                raw: value.map(|v| format!("{v:?}")).unwrap_or_default(),
                id,
                value,
            })
            .collect();
        Self {
            kpi_code: kpi_code.into(),
            source: source.into(),
            rows,
            report: ValidationReport::new(),
        }
    }
}

/// Parses a numeric cell; `None` for empty or non-numeric text.
pub fn parse_number(text: &str) -> Option<f64> {
    let t = text.trim();
    if t.is_empty() {
        return None;
    }
    let normalized = if t.contains(',') {
        t.replace('.', "").replace(',', ".")
    } else {
        t.to_string()
    };
    normalized.parse::<f64>().ok().filter(|v| v.is_finite())
}

fn open_csv(path: &Path) -> Result<csv::Reader<std::fs::File>, IngestError> {
    if !path.exists() {
        return Err(IngestError::NotFound(path.display().to_string()));
    }
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| IngestError::Read {
            path: path.display().to_string(),
            message: e.to_string(),
        })
}

fn columns(
    reader: &mut csv::Reader<std::fs::File>,
    path: &Path,
    wanted: &[&str],
) -> Result<Vec<Option<usize>>, IngestError> {
    let headers = reader.headers().map_err(|e| IngestError::Read {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    Ok(wanted
        .iter()
        .map(|w| headers.iter().position(|h| h.trim_start_matches('\u{feff}') == *w))
        .collect())
}

fn require(path: &Path, name: &str, idx: Option<usize>) -> Result<usize, IngestError> {
    idx.ok_or_else(|| IngestError::HeaderMismatch {
        path: path.display().to_string(),
        column: name.to_string(),
    })
}

fn records<'a>(
    reader: &'a mut csv::Reader<std::fs::File>,
    path: &Path,
) -> impl Iterator<Item = Result<(u64, csv::StringRecord), IngestError>> + 'a {
    let p = path.display().to_string();
    reader.records().map(move |r| {
        r.map(|rec| (rec.position().map(|p| p.line()).unwrap_or(0), rec))
            .map_err(|e| IngestError::Row {
                path: p.clone(),
                line: e.position().map(|p| p.line()).unwrap_or(0),
                message: e.to_string(),
            })
    })
}

/// Reads an `id,value` table for an arbitrary code.
pub fn load_value_table(path: &Path, code: &str) -> Result<RawKpiTable, IngestError> {
    let mut reader = open_csv(path)?;
    let cols = columns(&mut reader, path, &["id", "value"])?;
    let id_col = require(path, "id", cols[0])?;
    let value_col = require(path, "value", cols[1])?;
    let mut report = ValidationReport::new();
    let mut rows = Vec::new();
    let mut seen = BTreeSet::new();
    for rec in records(&mut reader, path) {
        let (line, rec) = rec?;
        let id = rec.get(id_col).unwrap_or("").to_string();
        if id.is_empty() {
            report.warning(code, format!("line {line}: row without municipality id skipped"));
            continue;
        }
        if !seen.insert(id.clone()) {
            return Err(IngestError::DuplicateRow {
                path: path.display().to_string(),
                id,
            });
        }
        let raw = rec.get(value_col).unwrap_or("").to_string();
        let value = parse_number(&raw);
        if value.is_none() && raw.trim().is_empty() {
            report.warning(id.as_str(), format!("{code}: empty cell treated as missing"));
        } else if value.is_none() {
            report.warning(
                id.as_str(),
                format!("{code}: unparseable value {raw:?} treated as missing"),
            );
        }
        rows.push(RawRow { id, raw, value });
    }
    Ok(RawKpiTable {
        kpi_code: code.to_string(),
        source: path.display().to_string(),
        rows,
        report,
    })
}

pub fn load_kpi_table(path: &Path, kpi: &KpiDefinition) -> Result<RawKpiTable, IngestError> {
    load_value_table(path, &kpi.code)
}

pub fn load_roster(path: &Path) -> Result<Vec<RosterEntry>, IngestError> {
    let names = ["id", "name", "region", "population", "land_area_km2", "households"];
    let mut reader = open_csv(path)?;
    let cols = columns(&mut reader, path, &names)?;
    let idx: Vec<usize> = names[..5]
        .iter()
        .zip(&cols)
        .map(|(n, c)| require(path, n, *c))
        .collect::<Result<_, _>>()?;
    let households_col = cols[5];
    let p = path.display().to_string();
    let mut out = Vec::new();
    for rec in records(&mut reader, path) {
        let (line, rec) = rec?;
        let bad = |message: String| IngestError::Row {
            path: p.clone(),
            line,
            message,
        };
        let field = |i: usize| rec.get(i).unwrap_or("").to_string();
        let population = field(idx[3])
            .parse::<u64>()
            .map_err(|_| bad(format!("population {:?} is not a nonnegative integer", field(idx[3]))))?;
        let land_area_km2 = parse_number(&field(idx[4]))
            .filter(|a| *a > 0.0)
            .ok_or_else(|| bad(format!("land area {:?} is not a positive number", field(idx[4]))))?;
        let households = match households_col.map(field).filter(|h| !h.is_empty()) {
            None => None,
            Some(h) => Some(
                h.parse::<u64>()
                    .map_err(|_| bad(format!("households {h:?} is not a nonnegative integer")))?,
            ),
        };
        let id = field(idx[0]);
        if id.is_empty() {
            return Err(bad("empty municipality id".into()));
        }
        out.push(RosterEntry {
            id,
            name: field(idx[1]),
            region: field(idx[2]),
            population,
            land_area_km2,
            households,
        });
    }
    Ok(out)
}

/// KPI code (or [`CAPACITY_KEY`]) to resolved file path.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Manifest {
    pub entries: BTreeMap<String, PathBuf>,
}

pub fn load_manifest(path: &Path) -> Result<Manifest, IngestError> {
    let mut reader = open_csv(path)?;
    let cols = columns(&mut reader, path, &["kpi", "path"])?;
    let kpi_col = require(path, "kpi", cols[0])?;
    let path_col = require(path, "path", cols[1])?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let mut entries = BTreeMap::new();
    for rec in records(&mut reader, path) {
        let (line, rec) = rec?;
        let code = rec.get(kpi_col).unwrap_or("").to_string();
        let file = rec.get(path_col).unwrap_or("");
        if code.is_empty() || file.is_empty() {
            return Err(IngestError::Row {
                path: path.display().to_string(),
                line,
                message: "manifest rows need both kpi and path".into(),
            });
        }
        if entries.insert(code.clone(), base.join(file)).is_some() {
            return Err(IngestError::DuplicateTable(code));
        }
    }
    Ok(Manifest { entries })
}

/// Loads every registry KPI listed in the manifest. Unknown codes are errors.
pub fn load_manifest_tables(manifest: &Manifest, registry: &KpiRegistry) -> Result<Vec<RawKpiTable>, IngestError> {
    let mut tables = Vec::new();
    for (code, path) in &manifest.entries {
        if code == CAPACITY_KEY {
            continue;
        }
        let def = registry
            .get(code)
            .ok_or_else(|| IngestError::UnknownKpi(code.clone()))?;
        tables.push(load_kpi_table(path, def)?);
    }
    Ok(tables)
}

/// ECR3 values from a capacity table and the roster's household counts.
/// Municipalities without households get a missing value and a warning.
pub fn derive_self_sufficiency(capacity: &RawKpiTable, roster: &[RosterEntry], per_household_kw: f64) -> RawKpiTable {
    let households: BTreeMap<&str, Option<u64>> = roster.iter().map(|r| (r.id.as_str(), r.households)).collect();
    let mut report = capacity.report.clone();
    let mut values = Vec::new();
    for row in &capacity.rows {
        let value = match (row.value, households.get(row.id.as_str()).copied().flatten()) {
            (Some(cap), Some(n)) => {
                let rec = EnergyCapacityRecord {
                    municipality_id: row.id.clone(),
                    renewable_capacity_kw: cap,
                    households: n,
                    per_household_kw,
                };
                match compute_self_sufficiency(&rec) {
                    Ok(v) => Some(v),
                    Err(e) => {
                        report.warning(row.id.as_str(), format!("{SELF_SUFFICIENCY_KPI}: {e}"));
                        None
                    }
                }
            }
            (Some(_), None) => {
                report.warning(
                    row.id.as_str(),
                    format!("{SELF_SUFFICIENCY_KPI}: household count unknown"),
                );
                None
            }
            (None, _) => None,
        };
        values.push((row.id.clone(), value));
    }
    let mut table = RawKpiTable::from_values(SELF_SUFFICIENCY_KPI, capacity.source.clone(), values);
    table.report = report;
    table
}

fn range_problem(def: &KpiDefinition, v: f64) -> Option<String> {
    let ok = match def.value_type {
        ValueType::Binary => v == 0.0 || v == 1.0,
        ValueType::Percentage => v >= 0.0 && (def.allow_surplus || v <= 1.0),
        ValueType::Levels => {
            let max = f64::from(def.max_level.unwrap_or(0));
            v >= 0.0 && v <= max && v.fract() == 0.0
        }
        ValueType::Number => v >= 0.0,
    };
    (!ok).then(|| {
        let expected = match def.value_type {
            ValueType::Binary => "0 or 1".to_string(),
            ValueType::Percentage if def.allow_surplus => "a nonnegative fraction".to_string(),
            ValueType::Percentage => "a fraction in [0, 1]".to_string(),
            ValueType::Levels => format!("an integer level in 0..={}", def.max_level.unwrap_or(0)),
            ValueType::Number => "a nonnegative number".to_string(),
        };
        format!("{}: value {v:?} rejected, expected {expected}", def.code)
    })
}

/// One record per roster entry (roster order). KPI values absent from
/// every table are missing; out-of-range values become missing with an
/// error entry. The report's `coverage` counts non-missing values per KPI.
pub fn join_municipalities(
    roster: &[RosterEntry],
    tables: &[RawKpiTable],
    registry: &KpiRegistry,
) -> Result<(MunicipalityDataset, ValidationReport), IngestError> {
    if roster.is_empty() {
        return Err(IngestError::EmptyRoster);
    }
    let mut index = BTreeMap::new();
    for (i, r) in roster.iter().enumerate() {
        if index.insert(r.id.as_str(), i).is_some() {
            return Err(IngestError::DuplicateMunicipality(r.id.clone()));
        }
    }
    let mut seen = BTreeSet::new();
    for t in tables {
        if registry.get(&t.kpi_code).is_none() {
            return Err(IngestError::UnknownKpi(t.kpi_code.clone()));
        }
        if !seen.insert(t.kpi_code.as_str()) {
            return Err(IngestError::DuplicateTable(t.kpi_code.clone()));
        }
    }

    let mut report = ValidationReport::new();
    let mut values: Vec<BTreeMap<String, Option<f64>>> = roster
        .iter()
        .map(|_| registry.codes().map(|c| (c.to_string(), None)).collect())
        .collect();
    for t in tables {
        let def = registry.get(&t.kpi_code).expect("checked above");
        report.merge(t.report.clone());
        for row in &t.rows {
            let Some(&i) = index.get(row.id.as_str()) else {
                report.warning(
                    row.id.as_str(),
                    format!("{}: municipality not in roster, row ignored", def.code),
                );
                continue;
            };
            let Some(v) = row.value else { continue };
            match range_problem(def, v) {
                Some(msg) => report.error(row.id.as_str(), msg),
                None => {
                    values[i].insert(def.code.clone(), Some(v));
                }
            }
        }
    }
    for def in registry.kpis() {
        let n = values
            .iter()
            .filter(|m| m.get(&def.code).copied().flatten().is_some())
            .count();
        report.coverage.insert(def.code.clone(), n);
    }
    let records = roster
        .iter()
        .zip(values)
        .map(|(r, kpi_values)| MunicipalityRecord {
            id: r.id.clone(),
            name: r.name.clone(),
            region: r.region.clone(),
            population: r.population,
            land_area_km2: r.land_area_km2,
            households: r.households,
            kpi_values,
        })
        .collect();
    let dataset = MunicipalityDataset::new(records, registry.clone())?;
    Ok((dataset, report))
}
