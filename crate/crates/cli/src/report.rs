//! CSV tables and the SVG line plots derived from them.

use crate::error::CliError;
use std::fmt::Write as _;
use std::path::Path;

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Int(i64),
    Num(f64),
    Text(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Num(v) if v.is_finite() => format!("{v:.10e}"),
            Cell::Num(v) => format!("{v}").to_lowercase(),
            Cell::Text(s) => s.replace([',', '\n', '\r'], " "),
        }
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<i64> for Cell {
    fn from(v: i64) -> Self {
        Cell::Int(v)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Int(v as i64)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(header: &[&'static str]) -> Self {
        Self { header: header.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.header.len(), "row width must match the header");
        self.rows.push(row);
    }

    /// Header row, comma separated, '.' decimal, LF line endings.
    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Cell::render).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

pub fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    let io = |source| CliError::Io { path: path.to_path_buf(), source };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io)?;
    }
    std::fs::write(path, text).map_err(io)
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

/// Line plot of every numeric column after the first against the row index.
pub fn svg_from_csv(csv: &str) -> String {
    let (w, h, m) = (640.0, 400.0, 56.0);
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap_or("").split(',').collect();
    let rows: Vec<Vec<&str>> = lines.filter(|l| !l.is_empty()).map(|l| l.split(',').collect()).collect();
    let series: Vec<(&str, Vec<f64>)> = (1..header.len())
        .filter_map(|c| {
            let v: Option<Vec<f64>> = rows.iter().map(|r| r.get(c).and_then(|s| s.parse::<f64>().ok())).collect();
            v.map(|v| (header[c], v))
        })
        .collect();
    let finite = series.iter().flat_map(|s| s.1.iter().copied()).filter(|v| v.is_finite());
    let (mut lo, mut hi) = finite.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !(lo < hi) {
        let c = if lo.is_finite() { lo } else { 0.0 };
        (lo, hi) = (c - 1.0, c + 1.0);
    }
    let span = rows.len().saturating_sub(1).max(1) as f64;
    let px = |i: usize| m + (w - 2.0 * m) * i as f64 / span;
    let py = |v: f64| h - m - (h - 2.0 * m) * (v - lo) / (hi - lo);
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#);
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(s, r#"<path d="M{m} {m} V{:.2} H{:.2}" stroke="black" fill="none"/>"#, h - m, w - m);
    let _ = writeln!(s, r#"<text x="{m}" y="{:.2}" font-size="11">{lo:.3e}</text>"#, h - m + 14.0);
    let _ = writeln!(s, r#"<text x="{m}" y="{:.2}" font-size="11">{hi:.3e}</text>"#, m - 6.0);
    for (k, (name, v)) in series.iter().enumerate() {
        let colour = PALETTE[k % PALETTE.len()];
        let pts: Vec<String> =
            v.iter().enumerate().filter(|(_, y)| y.is_finite()).map(|(i, &y)| format!("{:.2},{:.2}", px(i), py(y))).collect();
        let _ = writeln!(s, r#"<polyline points="{}" stroke="{colour}" fill="none"/>"#, pts.join(" "));
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" font-size="11" fill="{colour}">{name}</text>"#, w - m + 4.0, m + 14.0 * k as f64);
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_table_is_header_only() {
        assert_eq!(Table::new(&["grid_n", "defect"]).to_csv(), "grid_n,defect\n");
    }

    #[test]
    fn cells_render_deterministically() {
        let mut t = Table::new(&["n", "v", "s"]);
        t.push(vec![Cell::from(3usize), Cell::from(0.125), Cell::from("a,b")]);
        t.push(vec![Cell::from(-1i64), Cell::from(f64::NAN), Cell::from(true)]);
        assert_eq!(t.to_csv(), "n,v,s\n3,1.2500000000e-1,a b\n-1,nan,1\n");
    }

    #[test]
    fn one_polyline_per_metric() {
        let csv = "grid_n,defect,rank,label\n128,0.5,16,a\n256,0.25,32,b\n";
        let svg = svg_from_csv(csv);
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert_eq!(svg, svg_from_csv(csv));
        assert_eq!(svg_from_csv("grid_n,defect\n").matches("<polyline").count(), 1);
    }
}
