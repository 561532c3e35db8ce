//! Map and table output.

pub mod choropleth;
pub mod geometry;
pub mod table;

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

pub use choropleth::{
    ramp_color, render_choropleth, ChoroplethDocument, ChoroplethEntry, ColorTransform, GeometryKeyMismatch,
    RenderedChoropleth,
};
pub use geometry::{CountryShape, Geometry, GeometryError, WorldGeometry};
pub use table::{render_table, TableFormat, TableRows};

pub const GEOJSON_FILE: &str = "choropleth.geojson";
pub const SVG_FILE: &str = "choropleth.svg";

#[derive(Debug, Error)]
pub enum RenderError {
    #[error("writing {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

fn write_file(path: &Path, contents: &str) -> Result<(), RenderError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|source| RenderError::Io {
            path: parent.to_path_buf(),
            source,
        })?;
    }
    fs::write(path, contents).map_err(|source| RenderError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes `choropleth.geojson` and `choropleth.svg` under `out_dir`.
pub fn emit_choropleth(
    doc: &ChoroplethDocument,
    world: &WorldGeometry,
    out_dir: &Path,
) -> Result<RenderedChoropleth, RenderError> {
    let rendered = render_choropleth(doc, world);
    for m in &rendered.mismatches {
        log::warn!("{m}");
    }
    write_file(&out_dir.join(GEOJSON_FILE), &rendered.geojson)?;
    write_file(&out_dir.join(SVG_FILE), &rendered.svg)?;
    Ok(rendered)
}

pub fn emit_table(rows: &TableRows<'_>, format: TableFormat, path: &Path) -> Result<(), RenderError> {
    write_file(path, &render_table(rows, format))
}
