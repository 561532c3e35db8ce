//! Choropleth of scaled frequency as GeoJSON and SVG.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::geometry::{Geometry, WorldGeometry};
use crate::classify::Breakdown;
use crate::model::{CountryCode, CountryMetrics};

pub const RAMP_LOW: [u8; 3] = [0xc6, 0xdb, 0xef];
pub const RAMP_HIGH: [u8; 3] = [0x3f, 0x00, 0x7d];
pub const MISSING_FILL: &str = "#d0d0d0";

pub const SVG_WIDTH: f64 = 960.0;
pub const SVG_HEIGHT: f64 = 480.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColorTransform {
    Linear,
    /// `log10(1 + v)`, so zero-frequency countries sit at the bottom of the
    /// ramp and every positive value lands strictly above them.
    #[default]
    Log10,
}

impl fmt::Display for ColorTransform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ColorTransform::Linear => "linear",
            ColorTransform::Log10 => "log10",
        })
    }
}

impl FromStr for ColorTransform {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "linear" => Ok(ColorTransform::Linear),
            "log10" | "log" => Ok(ColorTransform::Log10),
            other => Err(format!("unknown color transform {other:?} (expected linear or log10)")),
        }
    }
}

impl ColorTransform {
    fn apply(self, v: f64) -> f64 {
        match self {
            ColorTransform::Linear => v,
            ColorTransform::Log10 => (1.0 + v.max(0.0)).log10(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChoroplethEntry {
    pub scaled_frequency: f64,
    pub event_frequency: u64,
    pub direct_count: u64,
    pub indirect_count: u64,
}

/// Per-country values to shade, one entry per metrics country.
#[derive(Debug, Clone, PartialEq)]
pub struct ChoroplethDocument {
    pub entries: BTreeMap<CountryCode, ChoroplethEntry>,
    pub transform: ColorTransform,
}

impl ChoroplethDocument {
    pub fn new(metrics: &[CountryMetrics], breakdown: &Breakdown, transform: ColorTransform) -> Self {
        let entries = metrics
            .iter()
            .map(|m| {
                let (direct_count, indirect_count) = breakdown
                    .get(m.country)
                    .map(|b| (b.direct_count, b.indirect_count))
                    .unwrap_or((0, 0));
                (
                    m.country,
                    ChoroplethEntry {
                        scaled_frequency: m.scaled_frequency,
                        event_frequency: m.event_frequency,
                        direct_count,
                        indirect_count,
                    },
                )
            })
            .collect();
        Self { entries, transform }
    }

    /// Normalized intensity in `[0, 1]` for every entry. A single distinct
    /// value maps to 1.
    pub fn intensities(&self) -> BTreeMap<CountryCode, f64> {
        let transformed: Vec<(CountryCode, f64)> = self
            .entries
            .iter()
            .map(|(&c, e)| (c, self.transform.apply(e.scaled_frequency)))
            .collect();
        let lo = transformed.iter().map(|t| t.1).fold(f64::INFINITY, f64::min);
        let hi = transformed.iter().map(|t| t.1).fold(f64::NEG_INFINITY, f64::max);
        transformed
            .into_iter()
            .map(|(c, t)| {
                let i = if hi > lo { (t - lo) / (hi - lo) } else { 1.0 };
                (c, i.clamp(0.0, 1.0))
            })
            .collect()
    }
}

/// Linear blend between the ramp endpoints, as `#rrggbb`.
pub fn ramp_color(intensity: f64) -> String {
    let t = intensity.clamp(0.0, 1.0);
    let mut out = String::from("#");
    for k in 0..3 {
        let a = f64::from(RAMP_LOW[k]);
        let b = f64::from(RAMP_HIGH[k]);
        let v = (a + (b - a) * t).round() as u8;
        write!(out, "{v:02x}").unwrap();
    }
    out
}

/// A metrics country with no shape in the geometry asset.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GeometryKeyMismatch {
    pub country: CountryCode,
}

impl fmt::Display for GeometryKeyMismatch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} has metrics but no boundary in the geometry asset", self.country)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RenderedChoropleth {
    pub geojson: String,
    pub svg: String,
    /// Metrics countries drawn with a color.
    pub rendered: Vec<CountryCode>,
    /// Geometry countries drawn gray.
    pub gray: Vec<CountryCode>,
    pub mismatches: Vec<GeometryKeyMismatch>,
}

pub fn render_choropleth(doc: &ChoroplethDocument, world: &WorldGeometry) -> RenderedChoropleth {
    let intensities = doc.intensities();
    let mut out = RenderedChoropleth {
        mismatches: doc
            .entries
            .keys()
            .filter(|&&c| !world.contains(c))
            .map(|&country| GeometryKeyMismatch { country })
            .collect(),
        ..Default::default()
    };

    let mut features = Vec::with_capacity(world.shapes().len());
    let mut svg_paths = String::new();
    for shape in world.shapes() {
        let entry = doc.entries.get(&shape.code);
        let intensity = intensities.get(&shape.code).copied();
        let fill = intensity.map(ramp_color).unwrap_or_else(|| MISSING_FILL.to_string());
        match entry {
            Some(_) => out.rendered.push(shape.code),
            None => out.gray.push(shape.code),
        }
        let properties = match entry {
            Some(e) => json!({
                "iso_a3": shape.code.as_str(),
                "name": shape.name,
                "has_data": true,
                "scaled_frequency": e.scaled_frequency,
                "event_frequency": e.event_frequency,
                "direct": e.direct_count,
                "indirect": e.indirect_count,
                "intensity": intensity,
                "fill": fill,
            }),
            None => json!({
                "iso_a3": shape.code.as_str(),
                "name": shape.name,
                "has_data": false,
                "scaled_frequency": Value::Null,
                "event_frequency": Value::Null,
                "direct": Value::Null,
                "indirect": Value::Null,
                "intensity": Value::Null,
                "fill": fill,
            }),
        };
        features.push(json!({
            "type": "Feature",
            "id": shape.code.as_str(),
            "properties": properties,
            "geometry": serde_json::to_value(&shape.geometry).expect("geometry serializes"),
        }));

        let title = match entry {
            Some(e) => format!(
                "{} ({}): {:.2}",
                xml_escape(&shape.name),
                shape.code,
                e.scaled_frequency
            ),
            None => format!("{} ({}): no data", xml_escape(&shape.name), shape.code),
        };
        writeln!(
            svg_paths,
            "<path id=\"{}\" fill=\"{fill}\" d=\"{}\"><title>{title}</title></path>",
            shape.code,
            svg_path_data(&shape.geometry)
        )
        .unwrap();
    }

    let collection = json!({
        "type": "FeatureCollection",
        "features": features,
    });
    out.geojson = serde_json::to_string(&collection).expect("geojson serializes");
    out.geojson.push('\n');
    out.svg = svg_document(&svg_paths, doc);
    out
}

fn project(lon: f64, lat: f64) -> (f64, f64) {
    ((lon + 180.0) / 360.0 * SVG_WIDTH, (90.0 - lat) / 180.0 * SVG_HEIGHT)
}

fn svg_path_data(geometry: &Geometry) -> String {
    let mut d = String::new();
    for ring in geometry.rings() {
        for (i, p) in ring.iter().enumerate() {
            let (x, y) = project(p[0], p[1]);
            let cmd = if i == 0 { 'M' } else { 'L' };
            if !d.is_empty() && i == 0 {
                d.push(' ');
            }
            write!(d, "{cmd}{x:.2},{y:.2}").unwrap();
        }
        d.push('Z');
    }
    d
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn svg_document(paths: &str, doc: &ChoroplethDocument) -> String {
    let lo = doc
        .entries
        .values()
        .map(|e| e.scaled_frequency)
        .fold(f64::INFINITY, f64::min);
    let hi = doc
        .entries
        .values()
        .map(|e| e.scaled_frequency)
        .fold(f64::NEG_INFINITY, f64::max);
    let low_hex = ramp_color(0.0);
    let high_hex = ramp_color(1.0);
    let legend_y = SVG_HEIGHT + 20.0;
    let mut s = String::new();
    s.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">",
        w = SVG_WIDTH,
        h = SVG_HEIGHT + 60.0
    )
    .unwrap();
    writeln!(
        s,
        "<defs><linearGradient id=\"ramp\" x1=\"0\" x2=\"1\" y1=\"0\" y2=\"0\">\
         <stop offset=\"0\" stop-color=\"{low_hex}\"/><stop offset=\"1\" stop-color=\"{high_hex}\"/>\
         </linearGradient></defs>"
    )
    .unwrap();
    writeln!(
        s,
        "<rect width=\"{SVG_WIDTH}\" height=\"{SVG_HEIGHT}\" fill=\"#ffffff\"/>"
    )
    .unwrap();
    writeln!(s, "<g stroke=\"#ffffff\" stroke-width=\"0.3\" fill-rule=\"evenodd\">").unwrap();
    s.push_str(paths);
    s.push_str("</g>\n");
    writeln!(s, "<g font-family=\"sans-serif\" font-size=\"11\">").unwrap();
    writeln!(
        s,
        "<rect x=\"20\" y=\"{legend_y}\" width=\"200\" height=\"12\" fill=\"url(#ramp)\"/>"
    )
    .unwrap();
    if doc.entries.is_empty() {
        writeln!(s, "<text x=\"20\" y=\"{}\">no data</text>", legend_y + 26.0).unwrap();
    } else {
        writeln!(s, "<text x=\"20\" y=\"{}\">{lo:.2}</text>", legend_y + 26.0).unwrap();
        writeln!(
            s,
            "<text x=\"220\" y=\"{}\" text-anchor=\"end\">{hi:.2}</text>",
            legend_y + 26.0
        )
        .unwrap();
    }
    writeln!(
        s,
        "<text x=\"230\" y=\"{}\">scaled frequency ({})</text>",
        legend_y + 10.0,
        doc.transform
    )
    .unwrap();
    writeln!(
        s,
        "<rect x=\"420\" y=\"{legend_y}\" width=\"12\" height=\"12\" fill=\"{MISSING_FILL}\"/>"
    )
    .unwrap();
    writeln!(s, "<text x=\"438\" y=\"{}\">no data</text>", legend_y + 10.0).unwrap();
    s.push_str("</g>\n</svg>\n");
    s
}
