//! Ranked metrics and Direct/Indirect tables as CSV or Markdown.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::classify::CountryBreakdown;
use crate::model::CountryMetrics;

pub const METRICS_CSV_HEADER: &str = "CC,F,RP,TP,RT,ScaledFrequency";
pub const BREAKDOWN_CSV_HEADER: &str = "CC,Indirect,Direct,Total";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TableFormat {
    #[default]
    Csv,
    Markdown,
}

impl fmt::Display for TableFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TableFormat::Csv => "csv",
            TableFormat::Markdown => "markdown",
        })
    }
}

impl FromStr for TableFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(TableFormat::Csv),
            "markdown" | "md" => Ok(TableFormat::Markdown),
            other => Err(format!("unknown table format {other:?}")),
        }
    }
}

impl TableFormat {
    pub fn extension(self) -> &'static str {
        match self {
            TableFormat::Csv => "csv",
            TableFormat::Markdown => "md",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TableRows<'a> {
    Metrics(&'a [CountryMetrics]),
    Breakdown(&'a [CountryBreakdown]),
}

pub fn format_ratio(rt: f64) -> String {
    format!("{rt:.4}")
}

pub fn format_scaled(sf: f64) -> String {
    format!("{sf:.2}")
}

/// `1234567` → `1,234,567`.
pub fn thousands(n: u64) -> String {
    let digits = n.to_string();
    let mut out = String::with_capacity(digits.len() + digits.len() / 3);
    for (i, ch) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i).is_multiple_of(3) {
            out.push(',');
        }
        out.push(ch);
    }
    out
}

pub fn render_table(rows: &TableRows<'_>, format: TableFormat) -> String {
    let mut s = String::new();
    match (rows, format) {
        (TableRows::Metrics(rows), TableFormat::Csv) => {
            s.push_str(METRICS_CSV_HEADER);
            s.push('\n');
            for m in *rows {
                writeln!(
                    s,
                    "{},{},{},{},{},{}",
                    m.country,
                    m.event_frequency,
                    m.refugee_population,
                    m.total_population,
                    format_ratio(m.refugee_ratio),
                    format_scaled(m.scaled_frequency)
                )
                .unwrap();
            }
        }
        (TableRows::Metrics(rows), TableFormat::Markdown) => {
            s.push_str("| CC | F | RP | TP | RT | Scaled Frequency |\n");
            s.push_str("|:--:|--:|--:|--:|--:|--:|\n");
            for m in *rows {
                writeln!(
                    s,
                    "| {} | {} | {} | {} | {} | {} |",
                    m.country,
                    thousands(m.event_frequency),
                    thousands(m.refugee_population),
                    thousands(m.total_population),
                    format_ratio(m.refugee_ratio),
                    format_scaled(m.scaled_frequency)
                )
                .unwrap();
            }
        }
        (TableRows::Breakdown(rows), TableFormat::Csv) => {
            s.push_str(BREAKDOWN_CSV_HEADER);
            s.push('\n');
            for b in *rows {
                writeln!(s, "{},{},{},{}", b.country, b.indirect_count, b.direct_count, b.total).unwrap();
            }
        }
        (TableRows::Breakdown(rows), TableFormat::Markdown) => {
            s.push_str("| Country Code | Indirect | Direct | Total |\n");
            s.push_str("|:--:|--:|--:|--:|\n");
            for b in *rows {
                writeln!(
                    s,
                    "| {} | {} ({}%) | {} ({}%) | {} |",
                    b.country,
                    thousands(b.indirect_count),
                    b.indirect_pct,
                    thousands(b.direct_count),
                    b.direct_pct,
                    thousands(b.total)
                )
                .unwrap();
            }
        }
    }
    s
}
