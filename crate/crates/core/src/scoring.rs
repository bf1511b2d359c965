//! Benchmark scoring: raw KPI values to scores in `[0, 1]`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{KpiDefinition, KpiRegistry, MunicipalityDataset, Orientation, ScoringFunction};
use crate::scalar::{cmp_scalar, Scalar};

#[derive(Debug, Error, PartialEq)]
pub enum ScoringError {
    #[error("{function}: value {value} outside the function's domain")]
    OutOfDomain { function: &'static str, value: f64 },
    #[error("{function}: benchmark {value} not allowed")]
    Benchmark { function: &'static str, value: f64 },
    #[error("percentage with benchmark 0 needs cohort statistics")]
    MissingCohort,
    #[error("KPI {0} has no benchmark")]
    MissingBenchmark(String),
    #[error("KPI {0} has no max_level")]
    MissingMaxLevel(String),
    #[error("municipality {id} carries KPI {code}, which the registry does not define")]
    RegistryMismatch { id: String, code: String },
    #[error("municipality {id}, KPI {code}: {source}")]
    Cell {
        id: String,
        code: String,
        #[source]
        source: Box<ScoringError>,
    },
}

fn domain<T: Scalar>(function: &'static str, value: &T) -> ScoringError {
    ScoringError::OutOfDomain {
        function,
        value: value.to_real(),
    }
}

/// Order statistics of one KPI over the municipalities that report it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortStats<T = f64> {
    pub kpi_code: String,
    pub count: usize,
    pub min: T,
    pub max: T,
    pub q1: T,
    pub q2: T,
    pub q3: T,
}

/// Inclusive linear-interpolation quantile at `num/den` of an ascending slice.
pub fn quantile_sorted<T: Scalar>(sorted: &[T], num: usize, den: usize) -> T {
    assert!(!sorted.is_empty() && den > 0 && num <= den);
    let scaled = (sorted.len() - 1) * num;
    let lo = scaled / den;
    let rem = scaled % den;
    if rem == 0 {
        return sorted[lo].clone();
    }
    let frac = T::from_count(rem) / T::from_count(den);
    let a = sorted[lo].clone();
    let b = sorted[lo + 1].clone();
    a.clone() + (b - a) * frac
}

impl<T: Scalar> CohortStats<T> {
    /// `None` for an empty cohort.
    pub fn from_values(kpi_code: impl Into<String>, values: &[T]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(cmp_scalar);
        Some(Self {
            kpi_code: kpi_code.into(),
            count: sorted.len(),
            min: sorted[0].clone(),
            max: sorted[sorted.len() - 1].clone(),
            q1: quantile_sorted(&sorted, 1, 4),
            q2: quantile_sorted(&sorted, 2, 4),
            q3: quantile_sorted(&sorted, 3, 4),
        })
    }
}

/// Identity on `{0, 1}`.
pub fn score_binary<T: Scalar>(value: &T) -> Result<T, ScoringError> {
    if value.is_zero() || value.is_one() {
        Ok(value.clone())
    } else {
        Err(domain("binary", value))
    }
}

/// `min(value / bench, 1)` for a positive benchmark. A zero benchmark
/// falls back to min–max normalisation over the cohort, inverted for
/// lower-is-better KPIs; a degenerate cohort scores 1.
pub fn score_percentage<T: Scalar>(
    value: &T,
    bench: &T,
    orientation: Orientation,
    stats: Option<&CohortStats<T>>,
) -> Result<T, ScoringError> {
    if !value.is_finite_value() || *value < T::zero() {
        return Err(domain("percentage", value));
    }
    if !bench.is_finite_value() || *bench < T::zero() {
        return Err(ScoringError::Benchmark {
            function: "percentage",
            value: bench.to_real(),
        });
    }
    if *bench > T::zero() {
        return Ok((value.clone() / bench.clone()).unit_clamp());
    }
    let stats = stats.ok_or(ScoringError::MissingCohort)?;
    let span = stats.max.clone() - stats.min.clone();
    if span <= T::zero() {
        return Ok(T::one());
    }
    let s = ((value.clone() - stats.min.clone()) / span).unit_clamp();
    Ok(match orientation {
        Orientation::HigherIsBetter => s,
        Orientation::LowerIsBetter => T::one() - s,
    })
}

/// Five half-open bands of width `bench/2` scored 4,3,2,1,0, divided by 4.
pub fn score_threshold_down<T: Scalar>(value: &T, bench: &T) -> Result<T, ScoringError> {
    if !value.is_finite_value() || *value < T::zero() {
        return Err(domain("threshold_down", value));
    }
    if !(*bench > T::zero()) {
        return Err(ScoringError::Benchmark {
            function: "threshold_down",
            value: bench.to_real(),
        });
    }
    // compare 2·value against multiples of bench to avoid dividing
    let twice = value.clone() + value.clone();
    let raw = if twice <= bench.clone() {
        4
    } else if twice <= bench.clone() * T::from_count(2) {
        3
    } else if twice <= bench.clone() * T::from_count(3) {
        2
    } else if twice <= bench.clone() * T::from_count(4) {
        1
    } else {
        0
    };
    Ok(T::ratio(raw, 4))
}

/// `min(value / bench, 1)`.
pub fn score_threshold_up<T: Scalar>(value: &T, bench: &T) -> Result<T, ScoringError> {
    if !value.is_finite_value() || *value < T::zero() {
        return Err(domain("threshold_up", value));
    }
    if !(*bench > T::zero()) {
        return Err(ScoringError::Benchmark {
            function: "threshold_up",
            value: bench.to_real(),
        });
    }
    Ok((value.clone() / bench.clone()).unit_clamp())
}

/// Cohort quartile bands scored 4,3,1,0, divided by 4. A value on a
/// quartile boundary belongs to the lower (better) band.
pub fn score_quartile_down<T: Scalar>(value: &T, stats: &CohortStats<T>) -> T {
    let raw = if *value <= stats.q1 {
        4
    } else if *value <= stats.q2 {
        3
    } else if *value <= stats.q3 {
        1
    } else {
        0
    };
    T::ratio(raw, 4)
}

/// `level / max_level` for an integer level in `0..=max_level`.
pub fn score_levels<T: Scalar>(value: &T, max_level: u32) -> Result<T, ScoringError> {
    if max_level == 0 {
        return Err(ScoringError::Benchmark {
            function: "levels_linear",
            value: 0.0,
        });
    }
    let level = value.to_u64().filter(|l| *l <= u64::from(max_level));
    match level {
        Some(l) if T::from_u64(l).as_ref() == Some(value) => {
            Ok(T::from_u64(l).expect("level") / T::from_u64(u64::from(max_level)).expect("max"))
        }
        _ => Err(domain("levels_linear", value)),
    }
}

/// Dispatches on the definition's scoring function.
pub fn score_value<T: Scalar>(
    def: &KpiDefinition,
    value: &T,
    stats: Option<&CohortStats<T>>,
) -> Result<T, ScoringError> {
    let bench = || {
        def.benchmark
            .map(T::from_real)
            .ok_or_else(|| ScoringError::MissingBenchmark(def.code.clone()))
    };
    match def.scoring_function {
        ScoringFunction::Binary => score_binary(value),
        ScoringFunction::Percentage => score_percentage(value, &bench()?, def.orientation, stats),
        ScoringFunction::ThresholdDown => score_threshold_down(value, &bench()?),
        ScoringFunction::ThresholdUp => score_threshold_up(value, &bench()?),
        ScoringFunction::QuartileDown => {
            let stats = stats.ok_or(ScoringError::MissingCohort)?;
            Ok(score_quartile_down(value, stats))
        }
        ScoringFunction::LevelsLinear => {
            let max = def
                .max_level
                .ok_or_else(|| ScoringError::MissingMaxLevel(def.code.clone()))?;
            score_levels(value, max)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MunicipalityScores<T = f64> {
    pub scores: BTreeMap<String, T>,
    /// KPIs without a value; they score 0.
    pub missing: Vec<String>,
}

/// Scores per municipality (keyed and ordered by id) and the cohorts used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreTable<T = f64> {
    pub rows: BTreeMap<String, MunicipalityScores<T>>,
    pub cohorts: BTreeMap<String, CohortStats<T>>,
}

impl<T: Scalar> ScoreTable<T> {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn map_scalar<U: Scalar>(&self, f: impl Fn(&T) -> U) -> ScoreTable<U> {
        let cohort = |c: &CohortStats<T>| CohortStats {
            kpi_code: c.kpi_code.clone(),
            count: c.count,
            min: f(&c.min),
            max: f(&c.max),
            q1: f(&c.q1),
            q2: f(&c.q2),
            q3: f(&c.q3),
        };
        ScoreTable {
            rows: self
                .rows
                .iter()
                .map(|(id, row)| {
                    let scores = row.scores.iter().map(|(k, v)| (k.clone(), f(v))).collect();
                    (
                        id.clone(),
                        MunicipalityScores {
                            scores,
                            missing: row.missing.clone(),
                        },
                    )
                })
                .collect(),
            cohorts: self.cohorts.iter().map(|(k, c)| (k.clone(), cohort(c))).collect(),
        }
    }
}

impl ScoreTable<f64> {
    pub fn to_exact(&self) -> ScoreTable<crate::Exact> {
        self.map_scalar(|v| crate::Exact::from_real(*v))
    }
}

/// Builds per-KPI cohorts from the non-missing values, then scores every
/// cell. Missing values score 0 and are listed in `missing`.
pub fn score_dataset<T: Scalar>(
    ds: &MunicipalityDataset,
    registry: &KpiRegistry,
) -> Result<ScoreTable<T>, ScoringError> {
    for rec in ds.records() {
        if let Some(code) = rec.kpi_values.keys().find(|c| registry.get(c).is_none()) {
            return Err(ScoringError::RegistryMismatch {
                id: rec.id.clone(),
                code: code.clone(),
            });
        }
    }
    let mut cohorts = BTreeMap::new();
    for def in registry.kpis() {
        let values: Vec<T> = ds
            .records()
            .iter()
            .filter_map(|r| r.value(&def.code))
            .map(T::from_real)
            .collect();
        if let Some(stats) = CohortStats::from_values(def.code.clone(), &values) {
            cohorts.insert(def.code.clone(), stats);
        }
    }
    let mut rows = BTreeMap::new();
    for rec in ds.records() {
        let mut scores = BTreeMap::new();
        let mut missing = Vec::new();
        for def in registry.kpis() {
            let score = match rec.value(&def.code) {
                None => {
                    missing.push(def.code.clone());
                    T::zero()
                }
                Some(v) => {
                    score_value(def, &T::from_real(v), cohorts.get(&def.code)).map_err(|e| ScoringError::Cell {
                        id: rec.id.clone(),
                        code: def.code.clone(),
                        source: Box::new(e),
                    })?
                }
            };
            scores.insert(def.code.clone(), score);
        }
        rows.insert(rec.id.clone(), MunicipalityScores { scores, missing });
    }
    Ok(ScoreTable { rows, cohorts })
}
