//! Persistence: CSV tables, JSON reports, gnuplot data and SVG line plots.
//! Number formatting is Rust's shortest round-trip form, so output bytes are
//! a function of the values alone.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

fn io_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Io(std::io::Error::other(format!("{}: {e}", path.display())))
}

pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_err(path, e))?;
    w.write_record(header).map_err(|e| io_err(path, e))?;
    for row in rows {
        if row.len() != header.len() {
            return Err(Error::Dimension(format!("row of {} values under {} columns", row.len(), header.len())));
        }
        w.write_record(row.iter().map(|v| v.to_string())).map_err(|e| io_err(path, e))?;
    }
    w.flush()?;
    Ok(())
}

/// Header and numeric rows of a CSV file.
pub fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut r = csv::Reader::from_path(path).map_err(|e| io_err(path, e))?;
    let header = r.headers().map_err(|e| io_err(path, e))?.iter().map(String::from).collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| io_err(path, e))?;
        let row = rec
            .iter()
            .map(|t| t.parse::<f64>().map_err(|e| io_err(path, format!("'{t}': {e}"))))
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok((header, rows))
}

/// Rows with mixed text and numbers.
pub fn write_csv_text(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_err(path, e))?;
    w.write_record(header).map_err(|e| io_err(path, e))?;
    for row in rows {
        w.write_record(row).map_err(|e| io_err(path, e))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

/// Whitespace-separated columns with a `#` header line.
pub fn gnuplot_data(header: &[&str], rows: &[Vec<f64>]) -> String {
    let mut s = format!("# {}\n", header.join(" "));
    for row in rows {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        s += &line.join(" ");
        s.push('\n');
    }
    s
}

pub fn write_gnuplot(path: &Path, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    fs::write(path, gnuplot_data(header, rows))?;
    Ok(())
}

#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 60.0;
const COLORS: [&str; 4] = ["#1f5fa8", "#c0392b", "#2e8b57", "#7d3c98"];

fn extent(vals: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo <= 1e-300 {
        let pad = if lo == 0.0 { 1.0 } else { 0.5 * lo.abs() };
        return (lo - pad, hi + pad);
    }
    (lo, hi)
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Self-contained SVG line plot. Non-finite points are dropped.
pub fn svg_line_plot(title: &str, xlabel: &str, ylabel: &str, series: &[Series]) -> String {
    let finite = |p: &&(f64, f64)| p.0.is_finite() && p.1.is_finite();
    let (x0, x1) = extent(series.iter().flat_map(|s| s.points.iter().filter(finite).map(|p| p.0)));
    let (y0, y1) = extent(series.iter().flat_map(|s| s.points.iter().filter(finite).map(|p| p.1)));
    let px = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
    let py = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="24" text-anchor="middle" font-family="sans-serif" font-size="15">{}</text>"#,
        WIDTH / 2.0,
        esc(title)
    );
    let (bl, br, bt, bb) = (MARGIN, WIDTH - MARGIN, MARGIN, HEIGHT - MARGIN);
    let _ = writeln!(s, r#"<path d="M {bl:.2} {bt:.2} L {bl:.2} {bb:.2} L {br:.2} {bb:.2}" stroke="black" fill="none"/>"#);
    for k in 0..=4 {
        let t = k as f64 / 4.0;
        let (xv, yv) = (x0 + t * (x1 - x0), y0 + t * (y1 - y0));
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-family="sans-serif" font-size="11">{}</text>"#,
            px(xv),
            bb + 16.0,
            fmt_tick(xv)
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end" font-family="sans-serif" font-size="11">{}</text>"#,
            bl - 6.0,
            py(yv) + 4.0,
            fmt_tick(yv)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-family="sans-serif" font-size="13">{}</text>"#,
        WIDTH / 2.0,
        HEIGHT - 18.0,
        esc(xlabel)
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.2}" text-anchor="middle" font-family="sans-serif" font-size="13" transform="rotate(-90 16 {:.2})">{}</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        esc(ylabel)
    );
    for (k, ser) in series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let mut d = String::new();
        for (i, p) in ser.points.iter().filter(finite).enumerate() {
            let _ = write!(d, "{}{:.3} {:.3} ", if i == 0 { "M " } else { "L " }, px(p.0), py(p.1));
        }
        let _ = writeln!(s, r#"<path d="{}" stroke="{color}" stroke-width="1.6" fill="none"/>"#, d.trim_end());
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="12" fill="{color}">{}</text>"#,
            br - 120.0,
            bt + 16.0 * (k + 1) as f64,
            esc(&ser.label)
        );
    }
    s += "</svg>\n";
    s
}

fn fmt_tick(v: f64) -> String {
    if v != 0.0 && (v.abs() < 1e-2 || v.abs() >= 1e4) {
        format!("{v:.2e}")
    } else {
        format!("{v:.3}")
    }
}

/// Minimal structural check: one `<svg>` root, closed, and every numeric
/// attribute and path coordinate finite.
pub fn check_svg(text: &str) -> Result<()> {
    let body = text.trim();
    let bad = |m: &str| Err(Error::Precondition(format!("svg: {m}")));
    if !body.starts_with("<svg") || !body.ends_with("</svg>") {
        return bad("document is not a single <svg> element");
    }
    if body.matches("<svg").count() != 1 || body.matches("</svg>").count() != 1 {
        return bad("more than one root element");
    }
    for tag in body.split('<').skip(1) {
        for attr in ["x", "y", "width", "height"] {
            let key = format!(" {attr}=\"");
            if let Some(pos) = tag.find(&key) {
                let rest = &tag[pos + key.len()..];
                let val = &rest[..rest.find('"').unwrap_or(0)];
                if !val.parse::<f64>().is_ok_and(f64::is_finite) {
                    return bad(&format!("attribute {attr}=\"{val}\""));
                }
            }
        }
        if let Some(pos) = tag.find(" d=\"") {
            let rest = &tag[pos + 4..];
            let d = &rest[..rest.find('"').unwrap_or(0)];
            for tok in d.split_whitespace().filter(|t| *t != "M" && *t != "L") {
                if !tok.parse::<f64>().is_ok_and(f64::is_finite) {
                    return bad(&format!("path coordinate '{tok}'"));
                }
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn svg_is_deterministic_and_well_formed() {
        let ser = Series { label: "u".into(), points: (0..20).map(|i| (i as f64, (i as f64).sqrt())).collect() };
        let a = svg_line_plot("t", "x", "y", std::slice::from_ref(&ser));
        let b = svg_line_plot("t", "x", "y", &[ser]);
        assert_eq!(a, b);
        check_svg(&a).unwrap();
        assert!(check_svg("<svg></svg><svg></svg>").is_err());
        assert!(check_svg("<svg><path d=\"M NaN 1\"/></svg>").is_err());
    }

    #[test]
    fn constant_series_still_plots() {
        let ser = Series { label: "xi".into(), points: vec![(0.0, 0.0), (1.0, 0.0)] };
        check_svg(&svg_line_plot("front", "r", "xi", &[ser])).unwrap();
    }

    #[test]
    fn gnuplot_rows() {
        let s = gnuplot_data(&["x", "y"], &[vec![1.0, 0.5], vec![2.0, -0.25]]);
        assert_eq!(s, "# x y\n1 0.5\n2 -0.25\n");
    }
}
