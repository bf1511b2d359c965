//! Weighted composition of KPI scores into area sub-scores and the index,
//! plus the renewable self-sufficiency ratio fed into ECR3.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{validate_weight_config, AreaId, IndexResult, KpiRegistry, WeightConfig};
use crate::scalar::{sum, Scalar};
use crate::scoring::ScoreTable;

/// Average household capacity demand in kW.
pub const DEFAULT_HOUSEHOLD_KW: f64 = 3.3;

#[derive(Debug, Error, PartialEq)]
pub enum AggregateError {
    #[error("municipality {0}: no households, self-sufficiency undefined")]
    UndefinedDemand(String),
    #[error("municipality {id}: {what} must be nonnegative and finite")]
    Capacity { id: String, what: &'static str },
    #[error("weights and scores cover different KPIs: {0}")]
    KeyMismatch(String),
    #[error("weight configuration rejected:\n{0}")]
    InvalidWeights(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyCapacityRecord<T = f64> {
    pub municipality_id: String,
    /// Installed photovoltaic plus wind capacity, kW.
    pub renewable_capacity_kw: T,
    pub households: u64,
    pub per_household_kw: T,
}

impl EnergyCapacityRecord<f64> {
    pub fn new(municipality_id: impl Into<String>, renewable_capacity_kw: f64, households: u64) -> Self {
        Self {
            municipality_id: municipality_id.into(),
            renewable_capacity_kw,
            households,
            per_household_kw: DEFAULT_HOUSEHOLD_KW,
        }
    }
}

/// Installed renewable capacity over estimated household demand. Not
/// clamped: surplus (> 1) is preserved and clamped when scored.
pub fn compute_self_sufficiency<T: Scalar>(rec: &EnergyCapacityRecord<T>) -> Result<T, AggregateError> {
    let id = || rec.municipality_id.clone();
    if !rec.renewable_capacity_kw.is_finite_value() || rec.renewable_capacity_kw < T::zero() {
        return Err(AggregateError::Capacity {
            id: id(),
            what: "renewable capacity",
        });
    }
    if !rec.per_household_kw.is_finite_value() || !(rec.per_household_kw > T::zero()) {
        return Err(AggregateError::Capacity {
            id: id(),
            what: "per-household demand",
        });
    }
    if rec.households == 0 {
        return Err(AggregateError::UndefinedDemand(id()));
    }
    let demand = T::from_u64(rec.households).expect("household count") * rec.per_household_kw.clone();
    Ok(rec.renewable_capacity_kw.clone() / demand)
}

/// Weighted mean of the scores, `Σ W_k·S_k / Σ W_k`, which equals
/// `Σ W_k·S_k` for weights that sum to one. The division keeps an
/// all-ones input at exactly 1 in floating point.
pub fn area_subscore<T: Scalar>(
    scores: &BTreeMap<String, T>,
    weights: &BTreeMap<String, T>,
) -> Result<T, AggregateError> {
    if scores.len() != weights.len() || scores.keys().any(|k| !weights.contains_key(k)) {
        let s: Vec<&str> = scores.keys().map(String::as_str).collect();
        let w: Vec<&str> = weights.keys().map(String::as_str).collect();
        return Err(AggregateError::KeyMismatch(format!("scores {s:?}, weights {w:?}")));
    }
    weighted_mean(scores.iter().map(|(k, s)| (weights[k].clone(), s.clone())))
}

fn weighted_mean<T: Scalar>(pairs: impl Iterator<Item = (T, T)>) -> Result<T, AggregateError> {
    let mut num = T::zero();
    let mut den = T::zero();
    for (w, s) in pairs {
        num = num + w.clone() * s;
        den = den + w;
    }
    if den.is_zero() {
        return Ok(T::zero());
    }
    Ok(num / den)
}

/// `100 · Σ_A W_A · subscore_A`, normalised by `Σ_A W_A` like [`area_subscore`].
pub fn compose_cci<T: Scalar>(area_subscores: &BTreeMap<AreaId, T>, weights: &WeightConfig<T>) -> T {
    let total = weighted_mean(AreaId::ALL.iter().map(|a| {
        (
            weights.area_weight(*a),
            area_subscores.get(a).cloned().unwrap_or_else(T::zero),
        )
    }))
    .expect("weighted mean never fails");
    T::from_count(100) * total
}

/// Area sub-scores of one municipality.
pub fn area_subscores<T: Scalar>(
    scores: &BTreeMap<String, T>,
    weights: &WeightConfig<T>,
    registry: &KpiRegistry,
) -> Result<BTreeMap<AreaId, T>, AggregateError> {
    let mut out = BTreeMap::new();
    for area in AreaId::ALL {
        let mut s = BTreeMap::new();
        let mut w = BTreeMap::new();
        for def in registry.in_area(area) {
            let weight = weights
                .kpi_weights
                .get(&def.code)
                .ok_or_else(|| AggregateError::KeyMismatch(format!("no weight for {}", def.code)))?;
            let score = scores
                .get(&def.code)
                .ok_or_else(|| AggregateError::KeyMismatch(format!("no score for {}", def.code)))?;
            s.insert(def.code.clone(), score.clone());
            w.insert(def.code.clone(), weight.clone());
        }
        out.insert(area, area_subscore(&s, &w)?);
    }
    Ok(out)
}

/// One [`IndexResult`] per row of the table, ordered by municipality id.
/// Likert levels are left unset.
pub fn compute_cci<T: Scalar>(
    table: &ScoreTable<T>,
    cfg: &WeightConfig<T>,
    registry: &KpiRegistry,
) -> Result<Vec<IndexResult<T>>, AggregateError> {
    let report = validate_weight_config(cfg, registry);
    if report.has_errors() {
        return Err(AggregateError::InvalidWeights(report.render()));
    }
    table
        .rows
        .iter()
        .map(|(id, row)| {
            let subs = area_subscores(&row.scores, cfg, registry)?;
            let cci = compose_cci(&subs, cfg);
            Ok(IndexResult {
                id: id.clone(),
                kpi_scores: row.scores.clone(),
                area_subscores: subs,
                cci,
                likert_level: None,
                missing_kpis: row.missing.clone(),
            })
        })
        .collect()
}

/// Arithmetic mean of the four area sub-scores on the 0–100 scale.
pub fn mean_area_cci<T: Scalar>(subs: &BTreeMap<AreaId, T>) -> T {
    T::from_count(25) * sum(subs.values())
}
