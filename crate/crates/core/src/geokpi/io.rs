//! GeoJSON input for features and municipality boundaries.

use std::collections::BTreeMap;
use std::path::Path;

use geo::{Coord, LineString, MultiPolygon, Point, Polygon};
use geojson::{feature::Id, FeatureCollection, GeoJson, GeometryValue, Position};

use super::{FeatureGeometry, GeoError, GeoFeature, MunicipalityBoundary, Topic};

const GEOGRAPHIC_CRS: [&str; 4] = ["4326", "CRS84", "4258", "4269"];

fn read_collection(path: &Path) -> Result<FeatureCollection, GeoError> {
    let text = std::fs::read_to_string(path).map_err(|e| GeoError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_collection(&text)
}

fn parse_collection(text: &str) -> Result<FeatureCollection, GeoError> {
    let gj: GeoJson = text
        .parse()
        .map_err(|e: geojson::Error| GeoError::Format(e.to_string()))?;
    let fc = match gj {
        GeoJson::FeatureCollection(fc) => fc,
        GeoJson::Feature(f) => FeatureCollection {
            bbox: None,
            features: vec![f],
            foreign_members: None,
        },
        GeoJson::Geometry(_) => return Err(GeoError::Format("expected a Feature or FeatureCollection".into())),
    };
    check_crs(&fc)?;
    Ok(fc)
}

/// Rejects a declared geographic CRS; areas in degrees are meaningless.
fn check_crs(fc: &FeatureCollection) -> Result<(), GeoError> {
    let Some(crs) = fc.foreign_members.as_ref().and_then(|m| m.get("crs")) else {
        return Ok(());
    };
    let name = crs
        .pointer("/properties/name")
        .and_then(|v| v.as_str())
        .map(str::to_string)
        .unwrap_or_else(|| crs.to_string());
    if GEOGRAPHIC_CRS.iter().any(|g| name.ends_with(g)) {
        return Err(GeoError::Geographic(name));
    }
    Ok(())
}

fn coord(p: &Position) -> Result<Coord<f64>, GeoError> {
    match p.as_slice() {
        [x, y, ..] if x.is_finite() && y.is_finite() => Ok(Coord { x: *x, y: *y }),
        _ => Err(GeoError::Format("position needs two finite numbers".into())),
    }
}

fn line(ps: &[Position]) -> Result<LineString<f64>, GeoError> {
    Ok(LineString::new(ps.iter().map(coord).collect::<Result<_, _>>()?))
}

fn polygon(rings: &[Vec<Position>]) -> Result<Polygon<f64>, GeoError> {
    let (outer, holes) = rings
        .split_first()
        .ok_or_else(|| GeoError::Format("polygon without rings".into()))?;
    Ok(Polygon::new(
        line(outer)?,
        holes.iter().map(|h| line(h)).collect::<Result<_, _>>()?,
    ))
}

/// Multi-part geometries become one feature per part.
fn geometries(value: &GeometryValue) -> Result<Vec<FeatureGeometry>, GeoError> {
    Ok(match value {
        GeometryValue::Point { coordinates } => vec![FeatureGeometry::Point(Point(coord(coordinates)?))],
        GeometryValue::MultiPoint { coordinates } => coordinates
            .iter()
            .map(|c| coord(c).map(|c| FeatureGeometry::Point(Point(c))))
            .collect::<Result<_, _>>()?,
        GeometryValue::LineString { coordinates } => vec![FeatureGeometry::Polyline(line(coordinates)?)],
        GeometryValue::MultiLineString { coordinates } => coordinates
            .iter()
            .map(|l| line(l).map(FeatureGeometry::Polyline))
            .collect::<Result<_, _>>()?,
        GeometryValue::Polygon { coordinates } => vec![FeatureGeometry::Polygon(polygon(coordinates)?)],
        GeometryValue::MultiPolygon { coordinates } => coordinates
            .iter()
            .map(|p| polygon(p).map(FeatureGeometry::Polygon))
            .collect::<Result<_, _>>()?,
        GeometryValue::GeometryCollection { geometries: gs } => {
            let mut out = Vec::new();
            for g in gs {
                out.extend(geometries(&g.value)?);
            }
            out
        }
    })
}

fn string_property(v: &serde_json::Value) -> Option<String> {
    match v {
        serde_json::Value::String(s) => Some(s.clone()),
        serde_json::Value::Number(n) => Some(n.to_string()),
        serde_json::Value::Bool(b) => Some(b.to_string()),
        _ => None,
    }
}

pub fn parse_features(text: &str) -> Result<Vec<GeoFeature>, GeoError> {
    let fc = parse_collection(text)?;
    let mut out = Vec::new();
    for (i, f) in fc.features.iter().enumerate() {
        let topic = f
            .property("topic")
            .and_then(|v| v.as_str())
            .ok_or_else(|| GeoError::Format(format!("feature {i}: missing string property \"topic\"")))?
            .parse::<Topic>()
            .map_err(|e| GeoError::Format(format!("feature {i}: {e}")))?;
        let tags: BTreeMap<String, String> = f
            .properties_iter()
            .filter(|(k, _)| k.as_str() != "topic")
            .filter_map(|(k, v)| string_property(v).map(|s| (k.clone(), s)))
            .collect();
        let Some(g) = &f.geometry else { continue };
        for geometry in geometries(&g.value).map_err(|e| GeoError::Format(format!("feature {i}: {e}")))? {
            out.push(GeoFeature {
                geometry,
                topic,
                tags: tags.clone(),
            });
        }
    }
    Ok(out)
}

pub fn read_features(path: &Path) -> Result<Vec<GeoFeature>, GeoError> {
    let fc = read_collection(path)?;
    parse_features(&serde_json::to_string(&fc).expect("collection serialises"))
}

pub fn parse_boundaries(text: &str) -> Result<Vec<MunicipalityBoundary>, GeoError> {
    let fc = parse_collection(text)?;
    let mut out: Vec<MunicipalityBoundary> = Vec::new();
    for (i, f) in fc.features.iter().enumerate() {
        let id = f
            .property("id")
            .and_then(string_property)
            .or_else(|| match &f.id {
                Some(Id::String(s)) => Some(s.clone()),
                Some(Id::Number(n)) => Some(n.to_string()),
                None => None,
            })
            .ok_or_else(|| GeoError::Format(format!("boundary {i}: no id")))?;
        if out.iter().any(|b| b.id == id) {
            return Err(GeoError::Format(format!("boundary {i}: duplicate id {id}")));
        }
        let g = f
            .geometry
            .as_ref()
            .ok_or_else(|| GeoError::Format(format!("boundary {id}: no geometry")))?;
        let mut parts = Vec::new();
        for part in geometries(&g.value).map_err(|e| GeoError::Format(format!("boundary {id}: {e}")))? {
            match part {
                FeatureGeometry::Polygon(p) => {
                    if let Some(reason) = super::kernel::polygon_problem(&p) {
                        return Err(GeoError::Format(format!("boundary {id}: {reason}")));
                    }
                    parts.push(p);
                }
                _ => return Err(GeoError::Format(format!("boundary {id}: expected polygonal geometry"))),
            }
        }
        let population =
            match f.property("population") {
                None | Some(serde_json::Value::Null) => None,
                Some(v) => Some(v.as_u64().ok_or_else(|| {
                    GeoError::Format(format!("boundary {id}: population must be a nonnegative integer"))
                })?),
            };
        out.push(MunicipalityBoundary {
            id,
            shape: MultiPolygon::new(parts),
            population,
            source_geometry: Some(g.clone()),
        });
    }
    Ok(out)
}

pub fn read_boundaries(path: &Path) -> Result<Vec<MunicipalityBoundary>, GeoError> {
    let text = std::fs::read_to_string(path).map_err(|e| GeoError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_boundaries(&text)
}
