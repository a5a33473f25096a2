//! Static third-party exclusion curves for overlay output, and the CSV
//! format shared with computed curves.
//!
//! The bundled curves are approximate reconstructions of published bounds,
//! shipped for plotting context only. Nothing in this crate computes them.

use std::fmt::Write as _;

use super::{CurvePoint, ExclusionCurve};
use crate::error::{Error, Result};

pub const CSV_HEADER: &str = "r_c_m,lambda_upper_per_s,source";

const BUNDLED: &str = include_str!("../../data/reference_curves.csv");

/// Raw text of the bundled reference file, comments included.
pub fn bundled_csv() -> &'static str {
    BUNDLED
}

/// Parses the bundled reference curves, one [`ExclusionCurve`] per source.
///
/// Confidence levels are not uniform across the literature and are set to
/// NaN.
pub fn reference_curves() -> Vec<ExclusionCurve<f64>> {
    parse_curves_csv(BUNDLED).expect("bundled reference data is well formed")
}

/// Parses `r_c_m,lambda_upper_per_s,source` rows; `#` lines are comments.
/// Rows are grouped by source in order of first appearance.
pub fn parse_curves_csv(text: &str) -> Result<Vec<ExclusionCurve<f64>>> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'));
    match lines.next() {
        Some((_, h)) if h.trim() == CSV_HEADER => {}
        Some((n, h)) => {
            return Err(Error::Parse(format!(
                "line {}: expected header `{CSV_HEADER}`, found `{h}`",
                n + 1
            )))
        }
        None => return Err(Error::Parse("empty curve file".into())),
    }
    let mut groups: Vec<(String, Vec<CurvePoint<f64>>)> = Vec::new();
    for (n, line) in lines {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 3 {
            return Err(Error::Parse(format!("line {}: expected 3 fields", n + 1)));
        }
        let parse = |s: &str| {
            s.parse::<f64>()
                .map_err(|e| Error::Parse(format!("line {}: `{s}`: {e}", n + 1)))
        };
        let point = CurvePoint {
            r_c: parse(fields[0])?,
            lambda_upper: parse(fields[1])?,
        };
        match groups.iter_mut().find(|(s, _)| s == fields[2]) {
            Some((_, pts)) => pts.push(point),
            None => groups.push((fields[2].to_string(), vec![point])),
        }
    }
    groups
        .into_iter()
        .map(|(source, points)| ExclusionCurve::new(points, f64::NAN, source))
        .collect()
}

/// Serializes curves in the reference CSV layout, preceded by `comments`
/// rendered as `#` lines.
pub fn curves_to_csv(curves: &[&ExclusionCurve<f64>], comments: &[String]) -> String {
    let mut out = String::new();
    for c in comments {
        let _ = writeln!(out, "# {c}");
    }
    let _ = writeln!(out, "{CSV_HEADER}");
    for curve in curves {
        for p in &curve.points {
            let _ = writeln!(out, "{:e},{:e},{}", p.r_c, p.lambda_upper, curve.source);
        }
    }
    out
}
