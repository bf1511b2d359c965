//! Descriptive statistics, correlations, the equal-weight baseline and the
//! single-area weight sweep.

use std::collections::BTreeMap;
use std::io::Write;

use serde::Serialize;
use thiserror::Error;

use crate::aggregate::{compute_cci, AggregateError};
use crate::model::{validate_weight_config, AreaId, IndexResult, KpiRegistry, WeightConfig};
use crate::report::{fixed6, fixed6_opt};
use crate::scalar::Scalar;
use crate::scoring::{quantile_sorted, ScoreTable};

/// Bounds of the sweep interval for a single area weight.
pub const SWEEP_MIN: f64 = 0.05;
pub const SWEEP_MAX: f64 = 0.5;
/// Width of the Δ histogram bins, in percent.
pub const DELTA_BIN_WIDTH: f64 = 10.0;

#[derive(Debug, Error, PartialEq)]
pub enum AnalysisError {
    #[error("no values")]
    Empty,
    #[error("non-finite value at position {0}")]
    NonFinite(usize),
    #[error("need at least two observations, got {0}")]
    TooFewObservations(usize),
    #[error("column {name} has {got} rows, expected {expected}")]
    LengthMismatch { name: String, expected: usize, got: usize },
    #[error("weight {0} outside [{SWEEP_MIN}, {SWEEP_MAX}]")]
    WeightOutOfRange(f64),
    #[error("cannot rescale around {0}: {1}")]
    DegenerateBase(AreaId, String),
    #[error("rescaled weights for {area} = {weight} are invalid:\n{report}")]
    InvalidRescale { area: AreaId, weight: f64, report: String },
    #[error("bad sweep grid {0:?}")]
    Grid(String),
    #[error(transparent)]
    Aggregate(#[from] AggregateError),
    #[error("write failed: {0}")]
    Write(String),
}

fn write_err(e: impl std::fmt::Display) -> AnalysisError {
    AnalysisError::Write(e.to_string())
}

pub const STAT_NAMES: [&str; 8] = ["count", "mean", "std", "min", "25%", "50%", "75%", "max"];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DescriptiveStats {
    pub count: usize,
    pub mean: f64,
    /// Sample standard deviation (n − 1 denominator).
    pub std: f64,
    pub min: f64,
    pub p25: f64,
    pub p50: f64,
    pub p75: f64,
    pub max: f64,
    #[serde(skip)]
    pub warning: Option<String>,
}

impl DescriptiveStats {
    /// Values in [`STAT_NAMES`] order.
    pub fn row(&self) -> [f64; 8] {
        [
            self.count as f64,
            self.mean,
            self.std,
            self.min,
            self.p25,
            self.p50,
            self.p75,
            self.max,
        ]
    }
}

pub fn descriptive_stats(values: &[f64]) -> Result<DescriptiveStats, AnalysisError> {
    if values.is_empty() {
        return Err(AnalysisError::Empty);
    }
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(AnalysisError::NonFinite(i));
    }
    let n = values.len();
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mean = values.iter().sum::<f64>() / n as f64;
    let (std, warning) = if n < 2 {
        (
            0.0,
            Some("single observation: standard deviation undefined, reported as 0".to_string()),
        )
    } else {
        let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
        ((ss / (n - 1) as f64).sqrt(), None)
    };
    Ok(DescriptiveStats {
        count: n,
        mean,
        std,
        min: sorted[0],
        p25: quantile_sorted(&sorted, 1, 4),
        p50: quantile_sorted(&sorted, 2, 4),
        p75: quantile_sorted(&sorted, 3, 4),
        max: sorted[n - 1],
        warning,
    })
}

/// Statistics by row, variables by column; `None` columns print empty.
pub fn write_stats_csv<W: Write>(out: W, columns: &[(String, Option<DescriptiveStats>)]) -> Result<(), AnalysisError> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["stat".to_string()];
    header.extend(columns.iter().map(|(n, _)| n.clone()));
    w.write_record(&header).map_err(write_err)?;
    for (i, name) in STAT_NAMES.iter().enumerate() {
        let mut rec = vec![name.to_string()];
        for (_, s) in columns {
            rec.push(match s {
                None => String::new(),
                Some(s) if i == 0 => s.count.to_string(),
                Some(s) => fixed6(s.row()[i]),
            });
        }
        w.write_record(&rec).map_err(write_err)?;
    }
    w.flush().map_err(write_err)
}

/// Pearson r, or `None` with fewer than two points or zero variance.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len();
    if n < 2 || y.len() != n {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationMatrix {
    pub names: Vec<String>,
    pub r: Vec<Vec<f64>>,
    /// Complete pairs behind each entry.
    pub pairs: Vec<Vec<usize>>,
    pub warnings: Vec<String>,
}

/// Pairwise Pearson correlations. Rows missing either entry are dropped
/// per pair; undefined coefficients are reported as 0 with a warning.
pub fn correlation_matrix(columns: &[(String, Vec<Option<f64>>)]) -> Result<CorrelationMatrix, AnalysisError> {
    let Some((_, first)) = columns.first() else {
        return Err(AnalysisError::Empty);
    };
    let rows = first.len();
    for (name, c) in columns {
        if c.len() != rows {
            return Err(AnalysisError::LengthMismatch {
                name: name.clone(),
                expected: rows,
                got: c.len(),
            });
        }
    }
    if rows < 2 {
        return Err(AnalysisError::TooFewObservations(rows));
    }
    let k = columns.len();
    let mut r = vec![vec![0.0; k]; k];
    let mut pairs = vec![vec![0; k]; k];
    let mut warnings = Vec::new();
    for i in 0..k {
        r[i][i] = 1.0;
        pairs[i][i] = columns[i].1.iter().filter(|v| v.is_some_and(f64::is_finite)).count();
        for j in i + 1..k {
            let (x, y): (Vec<f64>, Vec<f64>) = columns[i]
                .1
                .iter()
                .zip(&columns[j].1)
                .filter_map(|(a, b)| match (a, b) {
                    (Some(a), Some(b)) if a.is_finite() && b.is_finite() => Some((*a, *b)),
                    _ => None,
                })
                .unzip();
            let v = pearson(&x, &y).unwrap_or_else(|| {
                warnings.push(format!(
                    "r({}, {}) undefined over {} pairs, reported as 0",
                    columns[i].0,
                    columns[j].0,
                    x.len()
                ));
                0.0
            });
            r[i][j] = v;
            r[j][i] = v;
            pairs[i][j] = x.len();
            pairs[j][i] = x.len();
        }
    }
    Ok(CorrelationMatrix {
        names: columns.iter().map(|(n, _)| n.clone()).collect(),
        r,
        pairs,
        warnings,
    })
}

pub fn write_correlations_csv<W: Write>(out: W, m: &CorrelationMatrix) -> Result<(), AnalysisError> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["variable".to_string()];
    header.extend(m.names.iter().cloned());
    w.write_record(&header).map_err(write_err)?;
    for (name, row) in m.names.iter().zip(&m.r) {
        let mut rec = vec![name.clone()];
        rec.extend(row.iter().map(|v| fixed6(*v)));
        w.write_record(&rec).map_err(write_err)?;
    }
    w.flush().map_err(write_err)
}

/// Sets `area` to `new_weight` and scales the other three area weights by
/// `(1 − new_weight) / (1 − base[area])`, keeping their ratios.
pub fn rescale_weights<T: Scalar>(
    base: &WeightConfig<T>,
    area: AreaId,
    new_weight: &T,
) -> Result<WeightConfig<T>, AnalysisError> {
    let (lo, hi) = (T::ratio(1, 20), T::ratio(1, 2));
    if !new_weight.is_finite_value() || *new_weight < lo || *new_weight > hi {
        return Err(AnalysisError::WeightOutOfRange(new_weight.to_real()));
    }
    let rest = T::one() - base.area_weight(area);
    if !(rest > T::zero()) {
        return Err(AnalysisError::DegenerateBase(
            area,
            "its weight leaves nothing to share".into(),
        ));
    }
    for other in AreaId::ALL.into_iter().filter(|a| *a != area) {
        if !(base.area_weight(other) > T::zero()) {
            return Err(AnalysisError::DegenerateBase(area, format!("{other} has no weight")));
        }
    }
    let factor = (T::one() - new_weight.clone()) / rest;
    let area_weights = AreaId::ALL
        .into_iter()
        .map(|a| {
            let w = if a == area {
                new_weight.clone()
            } else {
                base.area_weight(a) * factor.clone()
            };
            (a, w)
        })
        .collect();
    Ok(WeightConfig {
        area_weights,
        kpi_weights: base.kpi_weights.clone(),
    })
}

/// Ten evenly spaced points, 0.05 to 0.5.
pub fn default_grid<T: Scalar>() -> Vec<T> {
    (1..=10).map(|i| T::ratio(i, 20)).collect()
}

/// `"0.05,0.2,0.5"` or `"start:stop:count"` (evenly spaced, inclusive).
pub fn parse_grid(spec: &str) -> Result<Vec<f64>, AnalysisError> {
    let bad = || AnalysisError::Grid(spec.to_string());
    let parts: Vec<&str> = spec.split(':').map(str::trim).collect();
    let grid = match parts.as_slice() {
        [start, stop, count] => {
            let (a, b): (f64, f64) = (start.parse().map_err(|_| bad())?, stop.parse().map_err(|_| bad())?);
            let n: usize = count.parse().map_err(|_| bad())?;
            match n {
                0 => return Err(bad()),
                1 => vec![a],
                // grid points are decimals; drop interpolation noise
                _ => (0..n)
                    .map(|i| ((a + (b - a) * i as f64 / (n - 1) as f64) * 1e12).round() / 1e12)
                    .collect(),
            }
        }
        [list] => list
            .split(',')
            .map(|s| s.trim().parse::<f64>().map_err(|_| bad()))
            .collect::<Result<Vec<_>, _>>()?,
        _ => return Err(bad()),
    };
    if grid.is_empty() {
        return Err(bad());
    }
    if let Some(w) = grid.iter().find(|w| !(SWEEP_MIN..=SWEEP_MAX).contains(*w)) {
        return Err(AnalysisError::WeightOutOfRange(*w));
    }
    Ok(grid)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint<T> {
    pub weight: T,
    pub weights: WeightConfig<T>,
    pub cci: BTreeMap<String, T>,
    pub summary: DescriptiveStats,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MaxDelta<T> {
    pub baseline: T,
    /// Percent of the baseline; absolute index points when `absolute`.
    pub delta: T,
    /// Set when the baseline is 0 and a relative change is undefined.
    pub absolute: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HistogramBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult<T> {
    pub area: AreaId,
    pub grid: Vec<T>,
    pub points: Vec<SweepPoint<T>>,
    pub max_delta: BTreeMap<String, MaxDelta<T>>,
    /// Mean of the percent deltas (flagged absolute ones excluded).
    pub delta_mean: T,
    pub histogram: Vec<HistogramBin>,
}

fn cci_map<T: Scalar>(results: Vec<IndexResult<T>>) -> BTreeMap<String, T> {
    results.into_iter().map(|r| (r.id, r.cci)).collect()
}

fn delta_of<T: Scalar>(baseline: &T, value: &T) -> T {
    let diff = (value.clone() - baseline.clone()).abs();
    if baseline.is_zero() {
        diff
    } else {
        T::from_count(100) * diff / baseline.abs()
    }
}

/// Fixed-width bins from 0 covering the largest delta; the last bin is
/// closed on the right.
pub fn delta_histogram(deltas: &[f64], width: f64) -> Vec<HistogramBin> {
    let max = deltas.iter().copied().fold(0.0, f64::max);
    let bins = ((max / width).ceil() as usize).max(1);
    let mut out: Vec<HistogramBin> = (0..bins)
        .map(|i| HistogramBin {
            lo: i as f64 * width,
            hi: (i + 1) as f64 * width,
            count: 0,
        })
        .collect();
    for d in deltas {
        let i = ((d / width).floor() as usize).min(bins - 1);
        out[i].count += 1;
    }
    out
}

/// Recomputes the index for each grid weight of `area` and tracks each
/// municipality's largest deviation from the `base` index.
pub fn sweep_area_weight<T: Scalar>(
    table: &ScoreTable<T>,
    base: &WeightConfig<T>,
    registry: &KpiRegistry,
    area: AreaId,
    grid: &[T],
) -> Result<SweepResult<T>, AnalysisError> {
    if table.is_empty() || grid.is_empty() {
        return Err(AnalysisError::Empty);
    }
    let baseline = cci_map(compute_cci(table, base, registry)?);
    let mut max_delta: BTreeMap<String, MaxDelta<T>> = baseline
        .iter()
        .map(|(id, b)| {
            (
                id.clone(),
                MaxDelta {
                    baseline: b.clone(),
                    delta: T::zero(),
                    absolute: b.is_zero(),
                },
            )
        })
        .collect();
    let mut points = Vec::with_capacity(grid.len());
    for g in grid {
        let weights = rescale_weights(base, area, g)?;
        let report = validate_weight_config(&weights, registry);
        if report.has_errors() {
            return Err(AnalysisError::InvalidRescale {
                area,
                weight: g.to_real(),
                report: report.render(),
            });
        }
        let cci = cci_map(compute_cci(table, &weights, registry)?);
        for (id, v) in &cci {
            let m = max_delta.get_mut(id).expect("same rows as the baseline");
            let d = delta_of(&m.baseline, v);
            if d > m.delta {
                m.delta = d;
            }
        }
        let reals: Vec<f64> = cci.values().map(Scalar::to_real).collect();
        let summary = descriptive_stats(&reals)?;
        points.push(SweepPoint {
            weight: g.clone(),
            weights,
            cci,
            summary,
        });
    }
    let relative: Vec<&T> = max_delta.values().filter(|m| !m.absolute).map(|m| &m.delta).collect();
    let delta_mean = if relative.is_empty() {
        T::zero()
    } else {
        relative.iter().fold(T::zero(), |acc, d| acc + (*d).clone()) / T::from_count(relative.len())
    };
    let histogram = delta_histogram(
        &relative.iter().map(|d| d.to_real()).collect::<Vec<_>>(),
        DELTA_BIN_WIDTH,
    );
    Ok(SweepResult {
        area,
        grid: grid.to_vec(),
        points,
        max_delta,
        delta_mean,
        histogram,
    })
}

impl<T: Scalar> SweepResult<T> {
    pub fn to_real(&self) -> SweepResult<f64> {
        let w = |c: &WeightConfig<T>| c.map_scalar(|v| v.to_real());
        SweepResult {
            area: self.area,
            grid: self.grid.iter().map(Scalar::to_real).collect(),
            points: self
                .points
                .iter()
                .map(|p| SweepPoint {
                    weight: p.weight.to_real(),
                    weights: w(&p.weights),
                    cci: p.cci.iter().map(|(k, v)| (k.clone(), v.to_real())).collect(),
                    summary: p.summary.clone(),
                })
                .collect(),
            max_delta: self
                .max_delta
                .iter()
                .map(|(k, m)| {
                    (
                        k.clone(),
                        MaxDelta {
                            baseline: m.baseline.to_real(),
                            delta: m.delta.to_real(),
                            absolute: m.absolute,
                        },
                    )
                })
                .collect(),
            delta_mean: self.delta_mean.to_real(),
            histogram: self.histogram.clone(),
        }
    }
}

impl SweepResult<f64> {
    /// One row per grid point: the four area weights and the index summary.
    pub fn write_grid_csv<W: Write>(&self, out: W) -> Result<(), AnalysisError> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["weight".to_string()];
        header.extend(AreaId::ALL.iter().map(|a| format!("w_{a}")));
        header.extend(STAT_NAMES.iter().map(|s| format!("cci_{s}")));
        w.write_record(&header).map_err(write_err)?;
        for p in &self.points {
            let mut rec = vec![fixed6(p.weight)];
            rec.extend(AreaId::ALL.iter().map(|a| fixed6(p.weights.area_weight(*a))));
            let row = p.summary.row();
            rec.push(p.summary.count.to_string());
            rec.extend(row[1..].iter().map(|v| fixed6(*v)));
            w.write_record(&rec).map_err(write_err)?;
        }
        w.flush().map_err(write_err)
    }

    /// One row per municipality: baseline, index at every grid point, max Δ.
    pub fn write_cci_csv<W: Write>(&self, out: W) -> Result<(), AnalysisError> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["id".to_string(), "baseline".to_string()];
        header.extend(self.grid.iter().map(|g| format!("w={}", fixed6(*g))));
        header.extend(["max_delta".to_string(), "delta_absolute".to_string()]);
        w.write_record(&header).map_err(write_err)?;
        for (id, m) in &self.max_delta {
            let mut rec = vec![id.clone(), fixed6(m.baseline)];
            rec.extend(self.points.iter().map(|p| fixed6_opt(p.cci.get(id).copied())));
            rec.push(fixed6(m.delta));
            rec.push(u8::from(m.absolute).to_string());
            w.write_record(&rec).map_err(write_err)?;
        }
        w.flush().map_err(write_err)
    }

    pub fn write_histogram_csv<W: Write>(&self, out: W) -> Result<(), AnalysisError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["bin_lo", "bin_hi", "count"]).map_err(write_err)?;
        for b in &self.histogram {
            w.write_record([fixed6(b.lo), fixed6(b.hi), b.count.to_string()])
                .map_err(write_err)?;
        }
        w.flush().map_err(write_err)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("sweep result serialises")
    }
}

/// The index with every area weight at 1/4 and the KPI weights of `base`.
pub fn equal_weight_baseline<T: Scalar>(
    table: &ScoreTable<T>,
    base: &WeightConfig<T>,
    registry: &KpiRegistry,
) -> Result<Vec<IndexResult<T>>, AnalysisError> {
    Ok(compute_cci(table, &base.with_equal_area_weights(), registry)?)
}
