//! Deterministic output formats: RFC-4180-style CSV, flat sorted
//! key/value reports, and a minimal SVG line plot.
//!
//! Every writer is a pure function of its input data, so re-running a
//! scenario with the same configuration reproduces its output files byte
//! for byte. Floats are rendered with Rust's shortest round-trip
//! formatting; line endings are LF everywhere.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io;
use std::path::Path;

/// One table or report cell.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Text(String),
    Bool(bool),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Float(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Bool(b) => b.to_string(),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<i64> for Cell {
    fn from(v: i64) -> Self {
        Cell::Int(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

fn csv_field(raw: &str) -> String {
    if raw.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", raw.replace('"', "\"\""))
    } else {
        raw.to_string()
    }
}

/// Renders a CSV document: header row plus one line per data row, LF
/// separated. Rows must match the header width.
pub fn csv_string(header: &[&str], rows: &[Vec<Cell>]) -> String {
    let mut out = String::new();
    out.push_str(&header.iter().map(|h| csv_field(h)).collect::<Vec<_>>().join(","));
    out.push('\n');
    for row in rows {
        assert_eq!(row.len(), header.len(), "row width must match the header");
        let line: Vec<String> = row.iter().map(|c| csv_field(&c.render())).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<Cell>]) -> io::Result<()> {
    std::fs::write(path, csv_string(header, rows))
}

/// Flat key/value report with sorted keys, rendered as one JSON object.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KvReport {
    entries: BTreeMap<String, Cell>,
}

impl KvReport {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, key: &str, value: impl Into<Cell>) -> &mut Self {
        self.entries.insert(key.to_string(), value.into());
        self
    }

    pub fn get(&self, key: &str) -> Option<&Cell> {
        self.entries.get(key)
    }

    /// JSON text, one `"key": value` per line, keys sorted. Non-finite
    /// floats are quoted, since bare JSON has no token for them.
    pub fn to_json(&self) -> String {
        let mut out = String::from("{\n");
        let mut first = true;
        for (k, v) in &self.entries {
            if !first {
                out.push_str(",\n");
            }
            first = false;
            let rendered = match v {
                Cell::Float(x) if !x.is_finite() => format!("\"{x}\""),
                Cell::Text(s) => format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\"")),
                other => other.render(),
            };
            let _ = write!(out, "  \"{}\": {}", k.replace('\\', "\\\\").replace('"', "\\\""), rendered);
        }
        out.push_str("\n}\n");
        out
    }

    pub fn write(&self, path: &Path) -> io::Result<()> {
        std::fs::write(path, self.to_json())
    }
}

/// Fixed palette of the line plot; cycles when a plot has more series.
const PALETTE: [&str; 5] = ["#1b6ca8", "#c44536", "#3a7d44", "#8e5ba6", "#b8860b"];

/// Renders a minimal line plot: axes, min/max tick labels, one polyline
/// per series and a small legend. Coordinates are rounded to 1/100 px, so
/// the output is deterministic.
pub fn svg_line_plot(title: &str, series: &[(&str, &[(f64, f64)])]) -> String {
    let (w, h) = (640.0, 400.0);
    let (ml, mr, mt, mb) = (60.0, 20.0, 34.0, 42.0);
    let mut xmin = f64::INFINITY;
    let mut xmax = f64::NEG_INFINITY;
    let mut ymin = f64::INFINITY;
    let mut ymax = f64::NEG_INFINITY;
    for (_, pts) in series {
        for &(x, y) in *pts {
            if x.is_finite() && y.is_finite() {
                xmin = xmin.min(x);
                xmax = xmax.max(x);
                ymin = ymin.min(y);
                ymax = ymax.max(y);
            }
        }
    }
    if !(xmin.is_finite() && ymin.is_finite()) {
        xmin = 0.0;
        xmax = 1.0;
        ymin = 0.0;
        ymax = 1.0;
    }
    if xmax <= xmin {
        xmax = xmin + 1.0;
    }
    if ymax <= ymin {
        ymax = ymin + 1.0;
    }
    let px = |x: f64| ml + (x - xmin) / (xmax - xmin) * (w - ml - mr);
    let py = |y: f64| h - mb - (y - ymin) / (ymax - ymin) * (h - mt - mb);
    let r2 = |v: f64| (v * 100.0).round() / 100.0;

    let mut out = String::new();
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" \
         viewBox=\"0 0 {w} {h}\" font-family=\"sans-serif\" font-size=\"12\">"
    );
    let _ = writeln!(out, "<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>");
    let _ = writeln!(
        out,
        "<text x=\"{}\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">{}</text>",
        r2(w / 2.0),
        xml_escape(title)
    );
    // Axes with min/max tick labels.
    let _ = writeln!(
        out,
        "<line x1=\"{ml}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>",
        r2(h - mb),
        r2(w - mr),
        r2(h - mb)
    );
    let _ = writeln!(
        out,
        "<line x1=\"{ml}\" y1=\"{mt}\" x2=\"{ml}\" y2=\"{}\" stroke=\"black\"/>",
        r2(h - mb)
    );
    let _ = writeln!(
        out,
        "<text x=\"{ml}\" y=\"{}\" text-anchor=\"middle\">{}</text>",
        r2(h - mb + 16.0),
        xmin
    );
    let _ = writeln!(
        out,
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>",
        r2(w - mr),
        r2(h - mb + 16.0),
        xmax
    );
    let _ = writeln!(
        out,
        "<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{}</text>",
        r2(ml - 6.0),
        r2(h - mb + 4.0),
        ymin
    );
    let _ = writeln!(
        out,
        "<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{}</text>",
        r2(ml - 6.0),
        r2(mt + 4.0),
        ymax
    );
    for (si, (label, pts)) in series.iter().enumerate() {
        let color = PALETTE[si % PALETTE.len()];
        let path: Vec<String> = pts
            .iter()
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .map(|&(x, y)| format!("{},{}", r2(px(x)), r2(py(y))))
            .collect();
        if !path.is_empty() {
            let _ = writeln!(
                out,
                "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>",
                path.join(" ")
            );
        }
        let ly = mt + 14.0 * si as f64;
        let _ = writeln!(
            out,
            "<text x=\"{}\" y=\"{}\" fill=\"{color}\">{}</text>",
            r2(w - mr - 150.0),
            r2(ly),
            xml_escape(label)
        );
    }
    out.push_str("</svg>\n");
    out
}

pub fn write_svg(path: &Path, title: &str, series: &[(&str, &[(f64, f64)])]) -> io::Result<()> {
    std::fs::write(path, svg_line_plot(title, series))
}

fn xml_escape(raw: &str) -> String {
    raw.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_renders_header_rows_and_roundtrip_floats() {
        let rows = vec![
            vec![Cell::Int(1), Cell::Float(0.1), Cell::Text("plain".into())],
            vec![Cell::Int(-2), Cell::Float(2.0861612696304874), Cell::Text("a,b".into())],
        ];
        let text = csv_string(&["k", "value", "note"], &rows);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "k,value,note");
        assert_eq!(lines[1], "1,0.1,plain");
        assert_eq!(lines[2], "-2,2.0861612696304874,\"a,b\"");
        assert!(!text.contains('\r'));
        assert!(text.ends_with('\n'));
    }

    #[test]
    fn csv_escapes_quotes_and_newlines() {
        let rows = vec![vec![Cell::Text("say \"hi\"".into()), Cell::Text("two\nlines".into())]];
        let text = csv_string(&["a", "b"], &rows);
        assert!(text.contains("\"say \"\"hi\"\"\""));
        assert!(text.contains("\"two\nlines\""));
    }

    #[test]
    #[should_panic(expected = "row width")]
    fn csv_rejects_ragged_rows() {
        csv_string(&["a", "b"], &[vec![Cell::Int(1)]]);
    }

    #[test]
    fn kv_report_sorts_keys_and_quotes_nonfinite() {
        let mut rep = KvReport::new();
        rep.set("zeta", 1.5).set("alpha", f64::NAN).set("mid", true).set("name", "front");
        let json = rep.to_json();
        let alpha = json.find("alpha").unwrap();
        let mid = json.find("mid").unwrap();
        let zeta = json.find("zeta").unwrap();
        assert!(alpha < mid && mid < zeta);
        assert!(json.contains("\"alpha\": \"NaN\""));
        assert!(json.contains("\"mid\": true"));
        assert!(json.contains("\"name\": \"front\""));
        assert!(json.contains("\"zeta\": 1.5"));
    }

    #[test]
    fn svg_plot_contains_polyline_axes_and_title() {
        let pts = [(0.0, 0.0), (1.0, 2.0), (2.0, 1.0)];
        let svg = svg_line_plot("speed <check>", &[("flank", &pts)]);
        assert!(svg.starts_with("<svg"));
        assert!(svg.ends_with("</svg>\n"));
        assert_eq!(svg.matches("<polyline").count(), 1);
        assert!(svg.matches("<line").count() >= 2);
        assert!(svg.contains("speed &lt;check&gt;"));
    }

    #[test]
    fn writers_are_byte_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let rows = vec![vec![Cell::Float(1.0 / 3.0), Cell::Bool(false)]];
        let p1 = dir.path().join("a.csv");
        let p2 = dir.path().join("b.csv");
        write_csv(&p1, &["x", "ok"], &rows).unwrap();
        write_csv(&p2, &["x", "ok"], &rows).unwrap();
        assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());

        let pts = [(0.0, 1.0), (0.5, 0.25)];
        let s1 = dir.path().join("a.svg");
        let s2 = dir.path().join("b.svg");
        write_svg(&s1, "t", &[("s", &pts)]).unwrap();
        write_svg(&s2, "t", &[("s", &pts)]).unwrap();
        assert_eq!(std::fs::read(&s1).unwrap(), std::fs::read(&s2).unwrap());
    }

    proptest::proptest! {
        #[test]
        fn float_cells_roundtrip_exactly(bits in proptest::prelude::any::<u64>()) {
            let x = f64::from_bits(bits);
            proptest::prop_assume!(x.is_finite());
            let rendered = Cell::Float(x).render();
            proptest::prop_assert_eq!(rendered.parse::<f64>().unwrap(), x);
        }
    }
}
