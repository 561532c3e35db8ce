//! World boundary geometry keyed by alpha-3 code.
//!
//! The bundled asset is a 1:110m country boundary set with coordinates
//! rounded to two decimals and rings wound per RFC 7946.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::CountryCode;

const BUNDLED_WORLD: &str = include_str!("../../assets/world_110m.geojson");

pub type Ring = Vec<[f64; 2]>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "coordinates")]
pub enum Geometry {
    Polygon(Vec<Ring>),
    MultiPolygon(Vec<Vec<Ring>>),
}

impl Geometry {
    pub fn rings(&self) -> Box<dyn Iterator<Item = &Ring> + '_> {
        match self {
            Geometry::Polygon(rings) => Box::new(rings.iter()),
            Geometry::MultiPolygon(polys) => Box::new(polys.iter().flatten()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CountryShape {
    pub code: CountryCode,
    pub name: String,
    pub geometry: Geometry,
}

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("geometry json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("feature {index} has no usable alpha-3 key")]
    MissingKey { index: usize },
    #[error("feature key {0} appears twice")]
    DuplicateKey(CountryCode),
}

#[derive(Deserialize)]
struct FeatureCollectionIn {
    features: Vec<FeatureIn>,
}

#[derive(Deserialize)]
struct FeatureIn {
    #[serde(default)]
    id: Option<serde_json::Value>,
    #[serde(default)]
    properties: PropertiesIn,
    geometry: Geometry,
}

#[derive(Deserialize, Default)]
struct PropertiesIn {
    #[serde(default)]
    iso_a3: Option<String>,
    #[serde(default)]
    name: Option<String>,
}

/// Country shapes sorted by code.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldGeometry {
    shapes: Vec<CountryShape>,
}

impl WorldGeometry {
    pub fn bundled() -> &'static WorldGeometry {
        static WORLD: OnceLock<WorldGeometry> = OnceLock::new();
        WORLD.get_or_init(|| WorldGeometry::from_geojson(BUNDLED_WORLD).expect("bundled geometry is valid"))
    }

    /// Reads a FeatureCollection whose features carry `properties.iso_a3`
    /// or a string `id` with the alpha-3 code.
    pub fn from_geojson(text: &str) -> Result<Self, GeometryError> {
        let fc: FeatureCollectionIn = serde_json::from_str(text)?;
        let mut shapes = Vec::with_capacity(fc.features.len());
        for (index, f) in fc.features.into_iter().enumerate() {
            let key = f
                .properties
                .iso_a3
                .clone()
                .or_else(|| f.id.as_ref().and_then(|v| v.as_str().map(String::from)));
            let code = key
                .and_then(|k| CountryCode::new(&k).ok())
                .ok_or(GeometryError::MissingKey { index })?;
            shapes.push(CountryShape {
                code,
                name: f.properties.name.unwrap_or_else(|| code.to_string()),
                geometry: f.geometry,
            });
        }
        shapes.sort_by_key(|s| s.code);
        if let Some(w) = shapes.windows(2).find(|w| w[0].code == w[1].code) {
            return Err(GeometryError::DuplicateKey(w[0].code));
        }
        Ok(Self { shapes })
    }

    pub fn shapes(&self) -> &[CountryShape] {
        &self.shapes
    }

    pub fn contains(&self, code: CountryCode) -> bool {
        self.shapes.binary_search_by_key(&code, |s| s.code).is_ok()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_geometry_loads() {
        let world = WorldGeometry::bundled();
        assert!(world.shapes().len() > 150);
        for code in ["USA", "GBR", "NGA", "MEX", "ITA", "CAN", "RUS", "ZAF", "RWA", "BRA"] {
            assert!(world.contains(CountryCode::new(code).unwrap()), "{code}");
        }
    }

    #[test]
    fn bundled_rings_follow_right_hand_rule() {
        fn signed_area(ring: &Ring) -> f64 {
            ring.iter()
                .zip(ring.iter().cycle().skip(1))
                .map(|(a, b)| a[0] * b[1] - b[0] * a[1])
                .sum::<f64>()
                / 2.0
        }
        for shape in WorldGeometry::bundled().shapes() {
            let polys: Vec<&Vec<Ring>> = match &shape.geometry {
                Geometry::Polygon(p) => vec![p],
                Geometry::MultiPolygon(ps) => ps.iter().collect(),
            };
            for poly in polys {
                assert!(signed_area(&poly[0]) > 0.0, "{} exterior", shape.code);
                for hole in &poly[1..] {
                    assert!(signed_area(hole) < 0.0, "{} hole", shape.code);
                }
            }
        }
    }

    #[test]
    fn duplicate_or_missing_keys() {
        let dup = r#"{"type":"FeatureCollection","features":[
            {"type":"Feature","id":"AAA","properties":{},"geometry":{"type":"Polygon","coordinates":[]}},
            {"type":"Feature","properties":{"iso_a3":"AAA"},"geometry":{"type":"Polygon","coordinates":[]}}]}"#;
        assert!(matches!(
            WorldGeometry::from_geojson(dup),
            Err(GeometryError::DuplicateKey(_))
        ));
        let missing = r#"{"type":"FeatureCollection","features":[
            {"type":"Feature","properties":{},"geometry":{"type":"Polygon","coordinates":[]}}]}"#;
        assert!(matches!(
            WorldGeometry::from_geojson(missing),
            Err(GeometryError::MissingKey { index: 0 })
        ));
    }
}
