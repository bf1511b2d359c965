//! Domain types shared by every stage, plus the registry/weights
//! configuration and its integrity checks.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::report::{ValidationReport, GLOBAL_SCOPE};
use crate::scalar::{sum, Scalar};

/// Tolerance for the sum-to-one checks on weights.
pub const WEIGHT_SUM_TOLERANCE: f64 = 1e-9;

const DEFAULT_REGISTRY: &str = include_str!("../config/default_registry.toml");

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read configuration {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed configuration: {0}")]
    Parse(String),
    #[error("invalid configuration:\n{0}")]
    Invalid(String),
}

#[derive(Debug, Error, PartialEq)]
pub enum DatasetError {
    #[error("duplicate municipality id {0}")]
    DuplicateMunicipality(String),
    #[error("municipality {id} has a value for KPI {code}, which is not in the registry")]
    UnknownKpi { id: String, code: String },
    #[error("municipality {id}: land area must be positive, got {value}")]
    LandArea { id: String, value: f64 },
}

/// The four thematic areas of the index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum AreaId {
    #[serde(rename = "D")]
    Digitalization,
    #[serde(rename = "ECR")]
    EnergyClimateResources,
    #[serde(rename = "M")]
    Mobility,
    #[serde(rename = "W")]
    Waste,
}

impl AreaId {
    pub const ALL: [AreaId; 4] = [
        AreaId::Digitalization,
        AreaId::EnergyClimateResources,
        AreaId::Mobility,
        AreaId::Waste,
    ];

    pub fn code(self) -> &'static str {
        match self {
            AreaId::Digitalization => "D",
            AreaId::EnergyClimateResources => "ECR",
            AreaId::Mobility => "M",
            AreaId::Waste => "W",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            AreaId::Digitalization => "Digitalization",
            AreaId::EnergyClimateResources => "Energy, Climate and Resources",
            AreaId::Mobility => "Mobility",
            AreaId::Waste => "Waste",
        }
    }
}

impl fmt::Display for AreaId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for AreaId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "D" | "DIGITALIZATION" => Ok(AreaId::Digitalization),
            "ECR" | "ENERGYCLIMATERESOURCES" => Ok(AreaId::EnergyClimateResources),
            "M" | "MOBILITY" => Ok(AreaId::Mobility),
            "W" | "WASTE" => Ok(AreaId::Waste),
            other => Err(format!("unknown area {other:?} (expected D, ECR, M or W)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueType {
    Binary,
    Percentage,
    Levels,
    Number,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoringFunction {
    Binary,
    Percentage,
    ThresholdDown,
    ThresholdUp,
    QuartileDown,
    LevelsLinear,
}

impl ScoringFunction {
    pub fn needs_benchmark(self) -> bool {
        matches!(
            self,
            ScoringFunction::Percentage | ScoringFunction::ThresholdDown | ScoringFunction::ThresholdUp
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    HigherIsBetter,
    LowerIsBetter,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KpiDefinition {
    pub code: String,
    pub area: AreaId,
    pub weight: f64,
    #[serde(rename = "type")]
    pub value_type: ValueType,
    #[serde(rename = "function")]
    pub scoring_function: ScoringFunction,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub benchmark: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_level: Option<u32>,
    pub orientation: Orientation,
    /// Percentage KPIs whose raw ratio may legitimately exceed 1.
    #[serde(default)]
    pub allow_surplus: bool,
    #[serde(default)]
    pub ideal: String,
    #[serde(default)]
    pub description: String,
    #[serde(default, rename = "source")]
    pub source_note: String,
}

impl KpiDefinition {
    /// Checks the per-definition invariants and appends violations to `report`.
    pub fn check(&self, report: &mut ValidationReport) {
        let scope = self.code.as_str();
        if !(0.0..=1.0).contains(&self.weight) {
            report.error(scope, format!("KPI weight {} outside [0, 1]", self.weight));
        }
        if self.scoring_function.needs_benchmark() && self.benchmark.is_none() {
            report.error(scope, "scoring function requires a benchmark");
        }
        if let Some(b) = self.benchmark {
            if !b.is_finite() || b < 0.0 {
                report.error(scope, format!("benchmark {b} must be a nonnegative number"));
            }
            let positive_needed = matches!(
                self.scoring_function,
                ScoringFunction::ThresholdDown | ScoringFunction::ThresholdUp
            );
            if positive_needed && b <= 0.0 {
                report.error(scope, "threshold benchmarks must be positive");
            }
        }
        let is_levels = self.scoring_function == ScoringFunction::LevelsLinear;
        match (is_levels, self.max_level) {
            (true, None) => report.error(scope, "levels_linear requires max_level"),
            (true, Some(0)) => report.error(scope, "max_level must be positive"),
            (false, Some(_)) => report.error(scope, "max_level is only allowed with levels_linear"),
            _ => {}
        }
        let compatible = match self.scoring_function {
            ScoringFunction::Binary => self.value_type == ValueType::Binary,
            ScoringFunction::Percentage => self.value_type == ValueType::Percentage,
            ScoringFunction::LevelsLinear => self.value_type == ValueType::Levels,
            ScoringFunction::ThresholdDown | ScoringFunction::ThresholdUp | ScoringFunction::QuartileDown => {
                matches!(self.value_type, ValueType::Number | ValueType::Percentage)
            }
        };
        if !compatible {
            report.error(
                scope,
                format!(
                    "value type {:?} cannot be scored with {:?}",
                    self.value_type, self.scoring_function
                ),
            );
        }
        match (self.scoring_function, self.orientation) {
            (ScoringFunction::ThresholdDown | ScoringFunction::QuartileDown, Orientation::HigherIsBetter) => {
                report.error(scope, "threshold_down/quartile_down require lower_is_better")
            }
            (ScoringFunction::ThresholdUp, Orientation::LowerIsBetter) => {
                report.error(scope, "threshold_up requires higher_is_better")
            }
            _ => {}
        }
        if self.allow_surplus && self.value_type != ValueType::Percentage {
            report.error(scope, "allow_surplus only applies to percentage KPIs");
        }
    }
}

/// The ordered set of KPI definitions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KpiRegistry {
    kpis: Vec<KpiDefinition>,
}

impl KpiRegistry {
    pub fn new(kpis: Vec<KpiDefinition>) -> Self {
        Self { kpis }
    }

    pub fn kpis(&self) -> &[KpiDefinition] {
        &self.kpis
    }

    pub fn len(&self) -> usize {
        self.kpis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kpis.is_empty()
    }

    pub fn get(&self, code: &str) -> Option<&KpiDefinition> {
        self.kpis.iter().find(|k| k.code == code)
    }

    pub fn codes(&self) -> impl Iterator<Item = &str> {
        self.kpis.iter().map(|k| k.code.as_str())
    }

    pub fn in_area(&self, area: AreaId) -> impl Iterator<Item = &KpiDefinition> {
        self.kpis.iter().filter(move |k| k.area == area)
    }

    pub fn check(&self) -> ValidationReport {
        let mut report = ValidationReport::new();
        if self.kpis.is_empty() {
            report.error(GLOBAL_SCOPE, "registry is empty");
        }
        let mut seen = BTreeSet::new();
        for k in &self.kpis {
            if !seen.insert(k.code.as_str()) {
                report.error(k.code.as_str(), "duplicate KPI code");
            }
            k.check(&mut report);
        }
        for area in AreaId::ALL {
            if self.in_area(area).next().is_none() {
                report.error(area.code(), "area has no KPIs");
            }
        }
        report
    }
}

/// Area weights and per-KPI weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightConfig<T = f64> {
    pub area_weights: BTreeMap<AreaId, T>,
    pub kpi_weights: BTreeMap<String, T>,
}

impl<T: Scalar> WeightConfig<T> {
    pub fn area_weight(&self, area: AreaId) -> T {
        self.area_weights.get(&area).cloned().unwrap_or_else(T::zero)
    }

    /// Same KPI weights, all four area weights set to 1/4.
    pub fn with_equal_area_weights(&self) -> Self {
        let quarter = T::ratio(1, 4);
        Self {
            area_weights: AreaId::ALL.iter().map(|a| (*a, quarter.clone())).collect(),
            kpi_weights: self.kpi_weights.clone(),
        }
    }

    pub fn map_scalar<U: Scalar>(&self, f: impl Fn(&T) -> U) -> WeightConfig<U> {
        WeightConfig {
            area_weights: self.area_weights.iter().map(|(a, w)| (*a, f(w))).collect(),
            kpi_weights: self.kpi_weights.iter().map(|(k, w)| (k.clone(), f(w))).collect(),
        }
    }
}

impl WeightConfig<f64> {
    pub fn from_registry(area_weights: BTreeMap<AreaId, f64>, registry: &KpiRegistry) -> Self {
        Self {
            area_weights,
            kpi_weights: registry.kpis().iter().map(|k| (k.code.clone(), k.weight)).collect(),
        }
    }

    /// Exact rationals read from each weight's shortest decimal form.
    pub fn to_exact(&self) -> WeightConfig<crate::Exact> {
        self.map_scalar(|w| crate::scalar::decimal_rational(*w))
    }
}

fn within_tolerance<T: Scalar>(total: &T) -> bool {
    let tol = T::from_real(WEIGHT_SUM_TOLERANCE);
    (total.clone() - T::one()).abs() <= tol
}

fn show<T: Scalar>(v: &T) -> String {
    format!("{:?}", v.to_real())
}

/// Lists every violated sum or bound constraint; an empty report means valid.
pub fn validate_weight_config<T: Scalar>(cfg: &WeightConfig<T>, registry: &KpiRegistry) -> ValidationReport {
    let mut report = ValidationReport::new();
    if registry.is_empty() {
        report.error(GLOBAL_SCOPE, "registry is empty");
        return report;
    }
    for area in AreaId::ALL {
        match cfg.area_weights.get(&area) {
            None => report.error(area.code(), "missing area weight"),
            Some(w) if *w < T::zero() || *w > T::one() => {
                report.error(area.code(), format!("area weight {} outside [0, 1]", show(w)))
            }
            _ => {}
        }
    }
    let area_total = sum(cfg.area_weights.values());
    if !within_tolerance(&area_total) {
        report.error(GLOBAL_SCOPE, format!("area weights sum {} ≠ 1", show(&area_total)));
    }
    for code in cfg.kpi_weights.keys() {
        if registry.get(code).is_none() {
            report.error(code.as_str(), "weight given for a KPI that is not in the registry");
        }
    }
    for area in AreaId::ALL {
        let mut total = T::zero();
        let mut any = false;
        for k in registry.in_area(area) {
            any = true;
            match cfg.kpi_weights.get(&k.code) {
                None => report.error(k.code.as_str(), "missing KPI weight"),
                Some(w) => {
                    if *w < T::zero() || *w > T::one() {
                        report.error(k.code.as_str(), format!("KPI weight {} outside [0, 1]", show(w)));
                    }
                    total = total + w.clone();
                }
            }
        }
        if any && !within_tolerance(&total) {
            report.error(
                area.code(),
                format!("KPI weights of area {} sum {} ≠ 1", area.code(), show(&total)),
            );
        }
    }
    report
}

/// Registry plus weights, as loaded from a configuration file.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexConfig {
    pub registry: KpiRegistry,
    pub weights: WeightConfig,
}

#[derive(Deserialize)]
struct ConfigFile {
    areas: BTreeMap<String, f64>,
    kpi: Vec<KpiDefinition>,
}

impl IndexConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let (config, report) = Self::parse_unchecked(text)?;
        if report.has_errors() {
            return Err(ConfigError::Invalid(report.render()));
        }
        Ok(config)
    }

    /// Parses without rejecting invalid weights; the checks come back as a report.
    pub fn parse_unchecked(text: &str) -> Result<(Self, ValidationReport), ConfigError> {
        let file: ConfigFile = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        let mut area_weights = BTreeMap::new();
        for (name, w) in file.areas {
            let area = AreaId::from_str(&name).map_err(ConfigError::Parse)?;
            area_weights.insert(area, w);
        }
        let registry = KpiRegistry::new(file.kpi);
        let weights = WeightConfig::from_registry(area_weights, &registry);
        let config = IndexConfig { registry, weights };
        let mut report = config.registry.check();
        report.merge(validate_weight_config(&config.weights, &config.registry));
        Ok((config, report))
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        Self::parse(&Self::read(path)?)
    }

    pub fn load_unchecked(path: &Path) -> Result<(Self, ValidationReport), ConfigError> {
        Self::parse_unchecked(&Self::read(path)?)
    }

    fn read(path: &Path) -> Result<String, ConfigError> {
        std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    /// The bundled 17-KPI configuration.
    pub fn bundled() -> Self {
        Self::parse(DEFAULT_REGISTRY).expect("bundled registry is valid")
    }

    pub fn bundled_text() -> &'static str {
        DEFAULT_REGISTRY
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MunicipalityRecord {
    pub id: String,
    pub name: String,
    pub region: String,
    pub population: u64,
    pub land_area_km2: f64,
    pub households: Option<u64>,
    /// Raw values in each KPI's native units; `None` marks a missing value.
    pub kpi_values: BTreeMap<String, Option<f64>>,
}

impl MunicipalityRecord {
    pub fn value(&self, code: &str) -> Option<f64> {
        self.kpi_values.get(code).copied().flatten()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MunicipalityDataset {
    records: Vec<MunicipalityRecord>,
    registry: KpiRegistry,
}

impl MunicipalityDataset {
    pub fn new(records: Vec<MunicipalityRecord>, registry: KpiRegistry) -> Result<Self, DatasetError> {
        let mut ids = BTreeSet::new();
        for r in &records {
            if !ids.insert(r.id.as_str()) {
                return Err(DatasetError::DuplicateMunicipality(r.id.clone()));
            }
            if !(r.land_area_km2 > 0.0) {
                return Err(DatasetError::LandArea {
                    id: r.id.clone(),
                    value: r.land_area_km2,
                });
            }
            if let Some(code) = r.kpi_values.keys().find(|c| registry.get(c).is_none()) {
                return Err(DatasetError::UnknownKpi {
                    id: r.id.clone(),
                    code: code.clone(),
                });
            }
        }
        Ok(Self { records, registry })
    }

    pub fn records(&self) -> &[MunicipalityRecord] {
        &self.records
    }

    pub fn registry(&self) -> &KpiRegistry {
        &self.registry
    }

    pub fn get(&self, id: &str) -> Option<&MunicipalityRecord> {
        self.records.iter().find(|r| r.id == id)
    }
}

/// Per-municipality outcome of the index computation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexResult<T = f64> {
    pub id: String,
    pub kpi_scores: BTreeMap<String, T>,
    pub area_subscores: BTreeMap<AreaId, T>,
    /// On the 0–100 scale.
    pub cci: T,
    pub likert_level: Option<u8>,
    pub missing_kpis: Vec<String>,
}

impl<T: Scalar> IndexResult<T> {
    pub fn area_subscore(&self, area: AreaId) -> T {
        self.area_subscores.get(&area).cloned().unwrap_or_else(T::zero)
    }

    /// `cci - 100 · Σ W_A · subscore_A`, recomputed from the stored sub-scores.
    pub fn recomposition_residual(&self, weights: &WeightConfig<T>) -> T {
        let hundred = T::from_count(100);
        let total = AreaId::ALL.iter().fold(T::zero(), |acc, a| {
            acc + weights.area_weight(*a) * self.area_subscore(*a)
        });
        self.cci.clone() - hundred * total
    }
}
