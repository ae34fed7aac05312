//! District polygons read from GeoJSON.

use std::collections::HashSet;

use serde_json::{json, Map, Value};

use super::GeoError;
use crate::matching::normalize_name;

/// Closed ring of `[lon, lat]` vertices; the first vertex is repeated at the end.
pub type Ring = Vec<[f64; 2]>;

/// Outer ring followed by zero or more holes.
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon {
    pub rings: Vec<Ring>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct District {
    pub name: String,
    pub state: String,
    pub polygons: Vec<Polygon>,
}

impl District {
    pub fn rings(&self) -> impl Iterator<Item = &Ring> {
        self.polygons.iter().flat_map(|p| p.rings.iter())
    }

    pub fn contains(&self, lon: f64, lat: f64) -> bool {
        point_in_polygon((lon, lat), self.rings())
    }

    pub fn bbox(&self) -> Option<((f64, f64), (f64, f64))> {
        let mut it = self.rings().flatten();
        let first = it.next()?;
        let mut min = (first[0], first[1]);
        let mut max = min;
        for v in it {
            min.0 = min.0.min(v[0]);
            min.1 = min.1.min(v[1]);
            max.0 = max.0.max(v[0]);
            max.1 = max.1.max(v[1]);
        }
        Some((min, max))
    }
}

/// Property names that carry the district and state labels.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct NameKeys {
    pub district: String,
    pub state: String,
}

impl Default for NameKeys {
    fn default() -> Self {
        Self { district: "NAME_2".into(), state: "NAME_1".into() }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DistrictSet {
    pub districts: Vec<District>,
}

impl DistrictSet {
    pub fn new(districts: Vec<District>) -> Result<Self, GeoError> {
        let mut seen = HashSet::new();
        for (i, d) in districts.iter().enumerate() {
            for ring in d.rings() {
                check_ring(ring, i)?;
            }
            if !seen.insert((normalize_name(&d.state), normalize_name(&d.name))) {
                return Err(GeoError::DuplicateDistrict { state: d.state.clone(), district: d.name.clone() });
            }
        }
        Ok(Self { districts })
    }

    pub fn len(&self) -> usize {
        self.districts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.districts.is_empty()
    }

    pub fn parse_geojson(text: &str, keys: &NameKeys) -> Result<Self, GeoError> {
        let root: Value = serde_json::from_str(text).map_err(|e| GeoError::GeoJson(e.to_string()))?;
        if root.get("type").and_then(Value::as_str) != Some("FeatureCollection") {
            return Err(GeoError::GeoJson("top-level object is not a FeatureCollection".into()));
        }
        let features = root
            .get("features")
            .and_then(Value::as_array)
            .ok_or_else(|| GeoError::GeoJson("FeatureCollection has no features array".into()))?;

        let mut districts = Vec::with_capacity(features.len());
        for (i, feature) in features.iter().enumerate() {
            let props = feature.get("properties").and_then(Value::as_object);
            let name_of = |key: &str| -> Result<String, GeoError> {
                props
                    .and_then(|p| p.get(key))
                    .and_then(Value::as_str)
                    .map(str::to_owned)
                    .ok_or_else(|| GeoError::MissingProperty { feature: i, key: key.to_owned() })
            };
            let name = name_of(&keys.district)?;
            let state = name_of(&keys.state)?;
            let geometry = feature
                .get("geometry")
                .ok_or_else(|| GeoError::GeoJson(format!("feature {i} has no geometry")))?;
            let kind = geometry.get("type").and_then(Value::as_str).unwrap_or("null");
            let coords = geometry.get("coordinates");
            let polygons = match (kind, coords) {
                ("Polygon", Some(c)) => vec![parse_polygon(c, i)?],
                ("MultiPolygon", Some(Value::Array(parts))) => {
                    parts.iter().map(|p| parse_polygon(p, i)).collect::<Result<_, _>>()?
                }
                ("Polygon" | "MultiPolygon", _) => {
                    return Err(GeoError::GeoJson(format!("feature {i} has malformed coordinates")))
                }
                (other, _) => return Err(GeoError::UnsupportedGeometry { feature: i, kind: other.to_owned() }),
            };
            districts.push(District { name, state, polygons });
        }
        Self::new(districts)
    }

    /// FeatureCollection with one feature per district. Single polygons are
    /// written as `Polygon`, several as `MultiPolygon`.
    pub fn to_geojson(&self, keys: &NameKeys) -> Value {
        let features: Vec<Value> = self
            .districts
            .iter()
            .map(|d| {
                let mut props = Map::new();
                props.insert(keys.district.clone(), Value::String(d.name.clone()));
                props.insert(keys.state.clone(), Value::String(d.state.clone()));
                json!({
                    "type": "Feature",
                    "properties": props,
                    "geometry": district_geometry(d),
                })
            })
            .collect();
        json!({ "type": "FeatureCollection", "features": features })
    }
}

pub(crate) fn district_geometry(d: &District) -> Value {
    let poly = |p: &Polygon| -> Value {
        Value::Array(
            p.rings
                .iter()
                .map(|r| Value::Array(r.iter().map(|v| json!([v[0], v[1]])).collect()))
                .collect(),
        )
    };
    if d.polygons.len() == 1 {
        json!({ "type": "Polygon", "coordinates": poly(&d.polygons[0]) })
    } else {
        json!({ "type": "MultiPolygon", "coordinates": d.polygons.iter().map(poly).collect::<Vec<_>>() })
    }
}

fn parse_polygon(value: &Value, feature: usize) -> Result<Polygon, GeoError> {
    let malformed = || GeoError::GeoJson(format!("feature {feature} has malformed polygon coordinates"));
    let rings = value.as_array().ok_or_else(malformed)?;
    if rings.is_empty() {
        return Err(malformed());
    }
    let mut out = Vec::with_capacity(rings.len());
    for ring in rings {
        let verts = ring.as_array().ok_or_else(malformed)?;
        let mut parsed = Vec::with_capacity(verts.len());
        for v in verts {
            let pair = v.as_array().ok_or_else(malformed)?;
            let lon = pair.first().and_then(Value::as_f64).ok_or_else(malformed)?;
            let lat = pair.get(1).and_then(Value::as_f64).ok_or_else(malformed)?;
            parsed.push([lon, lat]);
        }
        check_ring(&parsed, feature)?;
        out.push(parsed);
    }
    Ok(Polygon { rings: out })
}

fn check_ring(ring: &Ring, feature: usize) -> Result<(), GeoError> {
    if ring.len() < 4 || ring.first() != ring.last() {
        return Err(GeoError::UnclosedRing { feature });
    }
    Ok(())
}

/// Even-odd membership over all rings of a district (holes included).
///
/// The test ray points in the +lon direction. An edge takes part when the
/// point's latitude lies in `[min(y1, y2), max(y1, y2))`, and counts as a
/// crossing when the intersection lies strictly east of the point.
pub fn point_in_polygon<'a>(pt: (f64, f64), rings: impl IntoIterator<Item = &'a Ring>) -> bool {
    let (px, py) = pt;
    let mut inside = false;
    for ring in rings {
        for edge in ring.windows(2) {
            let [x1, y1] = edge[0];
            let [x2, y2] = edge[1];
            if (y1 > py) != (y2 > py) {
                let x_cross = x1 + (py - y1) * (x2 - x1) / (y2 - y1);
                if px < x_cross {
                    inside = !inside;
                }
            }
        }
    }
    inside
}

/// Axis-aligned rectangle as a closed counter-clockwise ring.
pub fn rect_ring(min_lon: f64, min_lat: f64, max_lon: f64, max_lat: f64) -> Ring {
    vec![
        [min_lon, min_lat],
        [max_lon, min_lat],
        [max_lon, max_lat],
        [min_lon, max_lat],
        [min_lon, min_lat],
    ]
}
