//! SVG radar plot of one image's centered projections.
//!
//! Axis `j` sits at `-90° + 360° * j / l`, i.e. the first phrase at twelve
//! o'clock and the rest clockwise. Positive values are drawn as a blue
//! polygon and negative values as a red one, both scaled by the largest
//! absolute centered value in the whole table so plots are comparable.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::ProjectionTable;
use crate::error::{Error, Result};

pub const RADAR_SIZE: f64 = 512.0;
const CENTER: f64 = RADAR_SIZE / 2.0;
const RADIUS: f64 = 180.0;
const LABEL_RADIUS: f64 = 200.0;
const POSITIVE: &str = "#1f77b4";
const NEGATIVE: &str = "#d62728";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RadarAxis {
    pub label: String,
    pub value: f64,
    pub raw: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RadarPlot {
    pub image_id: String,
    pub axes: Vec<RadarAxis>,
    #[serde(skip)]
    pub svg: String,
}

impl RadarPlot {
    pub fn json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Fixed two-decimal formatting without negative zero.
fn num(v: f64) -> String {
    let r = (v * 100.0).round() / 100.0;
    format!("{:.2}", if r == 0.0 { 0.0 } else { r })
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn point(j: usize, l: usize, r: f64) -> (f64, f64) {
    let theta = -PI / 2.0 + 2.0 * PI * j as f64 / l as f64;
    (CENTER + r * theta.cos(), CENTER + r * theta.sin())
}

fn polygon(values: &[f64], scale: f64) -> String {
    let l = values.len();
    let mut d = String::new();
    for (j, v) in values.iter().enumerate() {
        let (x, y) = point(j, l, RADIUS * v / scale);
        let _ = write!(d, "{}{} {}", if j == 0 { "M" } else { " L" }, num(x), num(y));
    }
    d.push_str(" Z");
    d
}

pub fn radar_export(table: &ProjectionTable, image_id: &str) -> Result<RadarPlot> {
    let row = table
        .row_of(image_id)
        .ok_or_else(|| Error::InvalidArgument(format!("unknown image id `{image_id}`")))?;
    let centered = table.centered_row(row);
    let l = centered.len();
    let scale = (0..table.len())
        .flat_map(|i| table.centered_row(i))
        .fold(0.0f64, |m, v| m.max(v.abs()));

    let mut svg = String::new();
    svg.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"512\" height=\"512\" viewBox=\"0 0 512 512\">"
    );
    let _ = writeln!(svg, "<title>{}</title>", escape(image_id));
    svg.push_str("<rect width=\"512\" height=\"512\" fill=\"#ffffff\"/>\n");
    for ring in 1..=4 {
        let _ = writeln!(
            svg,
            "<circle class=\"grid\" cx=\"256.00\" cy=\"256.00\" r=\"{}\" fill=\"none\" stroke=\"#cccccc\"/>",
            num(RADIUS * ring as f64 / 4.0)
        );
    }
    for (j, label) in table.labels.iter().enumerate() {
        let (x, y) = point(j, l, RADIUS);
        let _ = writeln!(
            svg,
            "<line class=\"axis\" x1=\"256.00\" y1=\"256.00\" x2=\"{}\" y2=\"{}\" stroke=\"#888888\"/>",
            num(x),
            num(y)
        );
        let (lx, ly) = point(j, l, LABEL_RADIUS);
        let anchor = if (lx - CENTER).abs() < 1.0 {
            "middle"
        } else if lx > CENTER {
            "start"
        } else {
            "end"
        };
        let _ = writeln!(
            svg,
            "<text x=\"{}\" y=\"{}\" text-anchor=\"{anchor}\" font-family=\"sans-serif\" font-size=\"14\">{}</text>",
            num(lx),
            num(ly),
            escape(label)
        );
    }

    let has_pos = centered.iter().any(|&v| v > 0.0);
    let has_neg = centered.iter().any(|&v| v < 0.0);
    if scale == 0.0 || !(has_pos || has_neg) {
        svg.push_str("<circle class=\"origin\" cx=\"256.00\" cy=\"256.00\" r=\"3.00\" fill=\"#444444\"/>\n");
    } else {
        for (class, color, present, values) in [
            ("positive", POSITIVE, has_pos, centered.iter().map(|v| v.max(0.0)).collect::<Vec<_>>()),
            ("negative", NEGATIVE, has_neg, centered.iter().map(|v| (-v).max(0.0)).collect()),
        ] {
            if present {
                let _ = writeln!(
                    svg,
                    "<path class=\"{class}\" d=\"{}\" fill=\"{color}\" fill-opacity=\"0.35\" stroke=\"{color}\" stroke-width=\"2\"/>",
                    polygon(&values, scale)
                );
            }
        }
    }
    svg.push_str("</svg>\n");

    let axes = table
        .labels
        .iter()
        .zip(centered.iter().zip(&table.raw[row]))
        .map(|(label, (&value, &raw))| RadarAxis {
            label: label.clone(),
            value,
            raw,
        })
        .collect();
    Ok(RadarPlot {
        image_id: image_id.to_string(),
        axes,
        svg,
    })
}

/// Writes `radar_<id>.svg` and `radar_<id>.json` into `dir`.
pub fn write_radar(table: &ProjectionTable, image_id: &str, dir: &Path) -> Result<(PathBuf, PathBuf)> {
    let plot = radar_export(table, image_id)?;
    let stem: String = image_id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect();
    let svg_path = dir.join(format!("radar_{stem}.svg"));
    let json_path = dir.join(format!("radar_{stem}.json"));
    fs::write(&svg_path, &plot.svg).map_err(|e| Error::io(&svg_path, e))?;
    fs::write(&json_path, plot.json()?).map_err(|e| Error::io(&json_path, e))?;
    Ok((svg_path, json_path))
}
