//! Mobility KPIs (M1–M4) from topic-tagged geometries and municipality
//! boundaries.
//!
//! Steps: same-topic polygons are dissolved so overlaps count once; the
//! dissolved polygons and polylines are cut along municipality
//! boundaries; point-like topics (bus stops, charging stations) are
//! attributed through a representative point. Coordinates are planar,
//! in metres.

pub mod io;
pub mod kernel;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use geo::{BooleanOps, BoundingRect, LineString, MultiLineString, MultiPolygon, Orient, Point, Polygon, Rect};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{RawKpiTable, RosterEntry};
use kernel::{
    contains_even_odd, line_length, line_midpoint, polygon_area, polygon_interior_point, polygon_problem, snap_polygon,
};

#[derive(Debug, Error, PartialEq)]
pub enum GeoError {
    #[error("feature {index}: invalid geometry: {reason}")]
    InvalidGeometry { index: usize, reason: String },
    #[error("pieces reference municipality {0}, which is not in the roster")]
    UnknownMunicipality(String),
    #[error("{0}")]
    Format(String),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("coordinates look geographic ({0}); expected a projected system in metres")]
    Geographic(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Topic {
    Pedestrian,
    Cycleway,
    BusStop,
    ChargingStation,
}

impl Topic {
    pub const ALL: [Topic; 4] = [
        Topic::Pedestrian,
        Topic::Cycleway,
        Topic::BusStop,
        Topic::ChargingStation,
    ];

    /// Topics measured by counting features rather than area or length.
    pub fn is_counted(self) -> bool {
        matches!(self, Topic::BusStop | Topic::ChargingStation)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Topic::Pedestrian => "pedestrian",
            Topic::Cycleway => "cycleway",
            Topic::BusStop => "bus_stop",
            Topic::ChargingStation => "charging_station",
        }
    }
}

impl fmt::Display for Topic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Topic {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Topic::ALL
            .into_iter()
            .find(|t| t.as_str() == s.trim())
            .ok_or_else(|| format!("unknown topic {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FeatureGeometry {
    Polygon(Polygon<f64>),
    Polyline(LineString<f64>),
    Point(Point<f64>),
}

impl FeatureGeometry {
    fn translate(&self, dx: f64, dy: f64) -> Self {
        use geo::Translate;
        match self {
            FeatureGeometry::Polygon(p) => FeatureGeometry::Polygon(p.translate(dx, dy)),
            FeatureGeometry::Polyline(l) => FeatureGeometry::Polyline(l.translate(dx, dy)),
            FeatureGeometry::Point(p) => FeatureGeometry::Point(p.translate(dx, dy)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeoFeature {
    pub geometry: FeatureGeometry,
    pub topic: Topic,
    pub tags: BTreeMap<String, String>,
}

impl GeoFeature {
    pub fn new(geometry: FeatureGeometry, topic: Topic) -> Self {
        Self {
            geometry,
            topic,
            tags: BTreeMap::new(),
        }
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Self {
        Self {
            geometry: self.geometry.translate(dx, dy),
            topic: self.topic,
            tags: self.tags.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MunicipalityBoundary {
    pub id: String,
    pub shape: MultiPolygon<f64>,
    pub population: Option<u64>,
    /// Geometry exactly as read, for pass-through on output.
    pub source_geometry: Option<geojson::Geometry>,
}

impl MunicipalityBoundary {
    pub fn new(id: impl Into<String>, shape: MultiPolygon<f64>) -> Self {
        Self {
            id: id.into(),
            shape,
            population: None,
            source_geometry: None,
        }
    }

    pub fn area_km2(&self) -> f64 {
        self.shape.0.iter().map(polygon_area).sum::<f64>() / 1e6
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Self {
        use geo::Translate;
        Self {
            id: self.id.clone(),
            shape: self.shape.translate(dx, dy),
            population: self.population,
            source_geometry: None,
        }
    }
}

/// Result of dissolving one topic.
#[derive(Debug, Clone, PartialEq)]
pub struct DissolvedSet {
    pub topic: Topic,
    pub polygons: Vec<Polygon<f64>>,
    pub polylines: Vec<LineString<f64>>,
    pub points: Vec<Point<f64>>,
}

impl DissolvedSet {
    pub fn total_area(&self) -> f64 {
        self.polygons.iter().map(polygon_area).sum()
    }

    pub fn total_length(&self) -> f64 {
        self.polylines.iter().map(line_length).sum()
    }
}

/// Unions overlapping polygons of `topic`; polylines and points of the
/// topic pass through unchanged. Features of other topics are ignored.
/// `index` in errors refers to the position in `features`.
pub fn dissolve_topic(features: &[GeoFeature], topic: Topic) -> Result<DissolvedSet, GeoError> {
    let mut polygons = Vec::new();
    let mut polylines = Vec::new();
    let mut points = Vec::new();
    for (index, f) in features.iter().enumerate().filter(|(_, f)| f.topic == topic) {
        match &f.geometry {
            FeatureGeometry::Polygon(p) => {
                let snapped = snap_polygon(p);
                if let Some(reason) = polygon_problem(&snapped) {
                    return Err(GeoError::InvalidGeometry { index, reason });
                }
                polygons.push(snapped.orient(geo::orient::Direction::Default));
            }
            FeatureGeometry::Polyline(l) => {
                if l.0.len() < 2 || l.0.iter().any(|c| !c.x.is_finite() || !c.y.is_finite()) {
                    return Err(GeoError::InvalidGeometry {
                        index,
                        reason: "polyline needs at least two finite vertices".into(),
                    });
                }
                polylines.push(l.clone());
            }
            FeatureGeometry::Point(p) => {
                if !p.x().is_finite() || !p.y().is_finite() {
                    return Err(GeoError::InvalidGeometry {
                        index,
                        reason: "non-finite point".into(),
                    });
                }
                points.push(*p);
            }
        }
    }
    let polygons = if polygons.is_empty() {
        polygons
    } else {
        geo::unary_union(&polygons)
            .0
            .into_iter()
            .map(|p| snap_polygon(&p))
            .collect()
    };
    Ok(DissolvedSet {
        topic,
        polygons,
        polylines,
        points,
    })
}

/// Where a piece of geometry ended up.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Assignment {
    Municipality(String),
    Unassigned,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PieceSet {
    pub polygons: Vec<Polygon<f64>>,
    pub polylines: Vec<LineString<f64>>,
    /// Features counted through their representative point.
    pub count: usize,
}

impl PieceSet {
    pub fn area(&self) -> f64 {
        self.polygons.iter().map(polygon_area).sum()
    }

    pub fn length(&self) -> f64 {
        self.polylines.iter().map(line_length).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClippedPieces {
    pub topic: Topic,
    pub pieces: BTreeMap<Assignment, PieceSet>,
}

impl ClippedPieces {
    pub fn get(&self, id: &str) -> Option<&PieceSet> {
        self.pieces.get(&Assignment::Municipality(id.to_string()))
    }

    pub fn unassigned(&self) -> Option<&PieceSet> {
        self.pieces.get(&Assignment::Unassigned)
    }

    pub fn total_area(&self) -> f64 {
        self.pieces.values().map(PieceSet::area).sum()
    }

    pub fn total_length(&self) -> f64 {
        self.pieces.values().map(PieceSet::length).sum()
    }
}

fn rects_overlap(a: &Rect<f64>, b: &Rect<f64>) -> bool {
    a.min().x <= b.max().x && b.min().x <= a.max().x && a.min().y <= b.max().y && b.min().y <= a.max().y
}

fn nonempty_polygons(mp: MultiPolygon<f64>) -> impl Iterator<Item = Polygon<f64>> {
    mp.0.into_iter().filter(|p| polygon_area(p) > 0.0)
}

fn nonempty_lines(ml: MultiLineString<f64>) -> impl Iterator<Item = LineString<f64>> {
    ml.0.into_iter().filter(|l| l.0.len() >= 2 && line_length(l) > 0.0)
}

/// Which boundary contains `pt`, by even-odd test.
pub fn locate_point(pt: Point<f64>, boundaries: &[MunicipalityBoundary]) -> Assignment {
    boundaries
        .iter()
        .find(|b| contains_even_odd(&b.shape, pt))
        .map(|b| Assignment::Municipality(b.id.clone()))
        .unwrap_or(Assignment::Unassigned)
}

pub fn representative_point(geometry: &FeatureGeometry) -> Point<f64> {
    match geometry {
        FeatureGeometry::Point(p) => *p,
        FeatureGeometry::Polygon(p) => polygon_interior_point(p),
        FeatureGeometry::Polyline(l) => line_midpoint(l),
    }
}

pub fn assign_by_representative_point(feature: &GeoFeature, boundaries: &[MunicipalityBoundary]) -> Assignment {
    locate_point(representative_point(&feature.geometry), boundaries)
}

/// Cuts polygons and polylines along the boundaries; whatever lies
/// outside every boundary goes to [`Assignment::Unassigned`]. For counted
/// topics every dissolved geometry adds one to the count of the
/// municipality holding its representative point.
pub fn clip_to_municipalities(set: &DissolvedSet, boundaries: &[MunicipalityBoundary]) -> ClippedPieces {
    let mut pieces: BTreeMap<Assignment, PieceSet> = BTreeMap::new();
    let count_at = |g: FeatureGeometry, pieces: &mut BTreeMap<Assignment, PieceSet>| {
        let at = locate_point(representative_point(&g), boundaries);
        pieces.entry(at).or_default().count += 1;
    };
    for p in &set.points {
        count_at(FeatureGeometry::Point(*p), &mut pieces);
    }
    if set.topic.is_counted() {
        for p in &set.polygons {
            count_at(FeatureGeometry::Polygon(p.clone()), &mut pieces);
        }
        for l in &set.polylines {
            count_at(FeatureGeometry::Polyline(l.clone()), &mut pieces);
        }
        return ClippedPieces {
            topic: set.topic,
            pieces,
        };
    }

    let shapes: Vec<(&MunicipalityBoundary, Option<Rect<f64>>)> =
        boundaries.iter().map(|b| (b, b.shape.bounding_rect())).collect();
    let coverage = if boundaries.is_empty() {
        MultiPolygon::new(vec![])
    } else {
        geo::unary_union(boundaries.iter().map(|b| &b.shape))
    };
    for poly in &set.polygons {
        let bbox = poly.bounding_rect();
        for (b, rect) in &shapes {
            if let (Some(r), Some(bb)) = (rect, bbox) {
                if !rects_overlap(r, &bb) {
                    continue;
                }
            }
            let cut: Vec<_> = nonempty_polygons(poly.intersection(&b.shape)).collect();
            if !cut.is_empty() {
                pieces
                    .entry(Assignment::Municipality(b.id.clone()))
                    .or_default()
                    .polygons
                    .extend(cut);
            }
        }
        let outside: Vec<_> = nonempty_polygons(poly.difference(&coverage)).collect();
        if !outside.is_empty() {
            pieces
                .entry(Assignment::Unassigned)
                .or_default()
                .polygons
                .extend(outside);
        }
    }
    for line in &set.polylines {
        let ml = MultiLineString::new(vec![line.clone()]);
        let bbox = line.bounding_rect();
        for (b, rect) in &shapes {
            if let (Some(r), Some(bb)) = (rect, bbox) {
                if !rects_overlap(r, &bb) {
                    continue;
                }
            }
            let cut: Vec<_> = nonempty_lines(b.shape.clip(&ml, false)).collect();
            if !cut.is_empty() {
                pieces
                    .entry(Assignment::Municipality(b.id.clone()))
                    .or_default()
                    .polylines
                    .extend(cut);
            }
        }
        let outside: Vec<_> = nonempty_lines(coverage.clip(&ml, true)).collect();
        if !outside.is_empty() {
            pieces
                .entry(Assignment::Unassigned)
                .or_default()
                .polylines
                .extend(outside);
        }
    }
    ClippedPieces {
        topic: set.topic,
        pieces,
    }
}

/// Raw mobility KPIs of one municipality; `None` where undefined.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MobilityKpis {
    /// Pedestrian area, m² per 100 inhabitants.
    pub m1: Option<f64>,
    /// Charging points per 1,000 inhabitants.
    pub m2: Option<f64>,
    /// Cycleway km per 100 km².
    pub m3: Option<f64>,
    /// Bus stops per 100 inhabitants.
    pub m4: Option<f64>,
}

/// Normalises the clipped pieces by the roster's population and land area.
pub fn compute_mobility_kpis(
    pieces: &[ClippedPieces],
    roster: &[RosterEntry],
) -> Result<BTreeMap<String, MobilityKpis>, GeoError> {
    for set in pieces {
        for key in set.pieces.keys() {
            if let Assignment::Municipality(id) = key {
                if !roster.iter().any(|r| &r.id == id) {
                    return Err(GeoError::UnknownMunicipality(id.clone()));
                }
            }
        }
    }
    let total = |topic: Topic, id: &str, f: &dyn Fn(&PieceSet) -> f64| -> f64 {
        pieces
            .iter()
            .filter(|p| p.topic == topic)
            .filter_map(|p| p.get(id))
            .map(f)
            .sum()
    };
    let mut out = BTreeMap::new();
    for r in roster {
        let pedestrian_m2 = total(Topic::Pedestrian, &r.id, &PieceSet::area);
        let cycleway_m = total(Topic::Cycleway, &r.id, &PieceSet::length);
        let stops = total(Topic::BusStop, &r.id, &|p| p.count as f64);
        let chargers = total(Topic::ChargingStation, &r.id, &|p| p.count as f64);
        let pop = r.population as f64;
        let per = |x: f64, scale: f64| (r.population > 0).then(|| x * scale / pop);
        out.insert(
            r.id.clone(),
            MobilityKpis {
                m1: per(pedestrian_m2, 100.0),
                m2: per(chargers, 1000.0),
                m3: Some(cycleway_m / (10.0 * r.land_area_km2)),
                m4: per(stops, 100.0),
            },
        );
    }
    Ok(out)
}

/// Full chain for every topic: dissolve, clip, normalise.
pub fn mobility_from_features(
    features: &[GeoFeature],
    boundaries: &[MunicipalityBoundary],
    roster: &[RosterEntry],
) -> Result<BTreeMap<String, MobilityKpis>, GeoError> {
    let mut clipped = Vec::new();
    for topic in Topic::ALL {
        let set = dissolve_topic(features, topic)?;
        clipped.push(clip_to_municipalities(&set, boundaries));
    }
    compute_mobility_kpis(&clipped, roster)
}

/// The four KPI tables, ready to be joined.
pub fn mobility_tables(kpis: &BTreeMap<String, MobilityKpis>) -> Vec<RawKpiTable> {
    let column = |code: &str, f: fn(&MobilityKpis) -> Option<f64>| {
        RawKpiTable::from_values(code, "geo", kpis.iter().map(|(id, k)| (id.clone(), f(k))))
    };
    vec![
        column("M1", |k| k.m1),
        column("M2", |k| k.m2),
        column("M3", |k| k.m3),
        column("M4", |k| k.m4),
    ]
}
