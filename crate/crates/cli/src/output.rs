//! Matrix files and CSV tables.
//!
//! Matrix file layout (dense, row-major, one labeled row per line):
//!
//! ```text
//! # gasnet state-space model
//! states 4 p[0].r p[1].r q[0].l q[1].l
//! inputs 2 p[0].l q[1].r
//! outputs 2 p[1].r q[0].l
//! A 4 4
//! p[0].r 0.0000000000000000e0 ...
//! B 4 2
//! ...
//! C 2 4
//! ...
//! ```
//!
//! Numbers carry 17 significant digits, so reading a file back reproduces
//! every entry bit for bit.

use std::fmt::Write as _;

use gasnet_core::{LabeledStateSpaceModel, Variable};
use nalgebra::DMatrix;

const MAGIC: &str = "# gasnet state-space model";

/// Locale-independent, round-trip exact.
pub fn number(v: f64) -> String {
    format!("{v:.16e}")
}

fn label_line(out: &mut String, key: &str, labels: &[Variable]) {
    write!(out, "{key} {}", labels.len()).unwrap();
    for v in labels {
        write!(out, " {v}").unwrap();
    }
    out.push('\n');
}

fn matrix_block(out: &mut String, name: &str, m: &DMatrix<f64>, rows: &[Variable]) {
    writeln!(out, "{name} {} {}", m.nrows(), m.ncols()).unwrap();
    for (i, label) in rows.iter().enumerate() {
        out.push_str(&label.to_string());
        for j in 0..m.ncols() {
            out.push(' ');
            out.push_str(&number(m[(i, j)]));
        }
        out.push('\n');
    }
}

pub fn write_matrix_file(model: &LabeledStateSpaceModel) -> String {
    let mut out = String::new();
    writeln!(out, "{MAGIC}").unwrap();
    label_line(&mut out, "states", model.states());
    label_line(&mut out, "inputs", model.inputs());
    label_line(&mut out, "outputs", model.outputs());
    matrix_block(&mut out, "A", model.a(), model.states());
    matrix_block(&mut out, "B", model.b(), model.states());
    matrix_block(&mut out, "C", model.c(), model.outputs());
    out
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    fn next(&mut self, what: &str) -> Result<(usize, &'a str), String> {
        self.inner
            .by_ref()
            .map(|(i, l)| (i + 1, l.trim()))
            .find(|(_, l)| !l.is_empty())
            .ok_or_else(|| format!("unexpected end of file, expected {what}"))
    }
}

fn parse_labels(lines: &mut Lines, key: &str) -> Result<Vec<Variable>, String> {
    let (no, line) = lines.next(key)?;
    let mut parts = line.split_whitespace();
    if parts.next() != Some(key) {
        return Err(format!("line {no}: expected `{key}`"));
    }
    let n: usize = parts
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| format!("line {no}: missing {key} count"))?;
    let labels = parts
        .map(|s| s.parse::<Variable>().map_err(|e| format!("line {no}: {e}")))
        .collect::<Result<Vec<_>, _>>()?;
    if labels.len() != n {
        return Err(format!(
            "line {no}: {key} count {n} but {} labels",
            labels.len()
        ));
    }
    Ok(labels)
}

fn parse_block(
    lines: &mut Lines,
    name: &str,
    rows: &[Variable],
    cols: usize,
) -> Result<DMatrix<f64>, String> {
    let (no, line) = lines.next(name)?;
    let header: Vec<&str> = line.split_whitespace().collect();
    let expected = [name.to_string(), rows.len().to_string(), cols.to_string()];
    if header != expected.iter().map(String::as_str).collect::<Vec<_>>() {
        return Err(format!("line {no}: expected `{}`", expected.join(" ")));
    }
    let mut m = DMatrix::zeros(rows.len(), cols);
    for (i, label) in rows.iter().enumerate() {
        let (no, line) = lines.next(&format!("row {label} of {name}"))?;
        let mut parts = line.split_whitespace();
        if parts.next() != Some(label.to_string().as_str()) {
            return Err(format!("line {no}: expected row label {label}"));
        }
        let values = parts
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|e| format!("line {no}: {s:?}: {e}"))
            })
            .collect::<Result<Vec<_>, _>>()?;
        if values.len() != cols {
            return Err(format!(
                "line {no}: expected {cols} values, found {}",
                values.len()
            ));
        }
        for (j, v) in values.into_iter().enumerate() {
            m[(i, j)] = v;
        }
    }
    Ok(m)
}

pub fn read_matrix_file(text: &str) -> Result<LabeledStateSpaceModel, String> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
    };
    let (no, first) = lines.next("header")?;
    if first != MAGIC {
        return Err(format!("line {no}: not a gasnet matrix file"));
    }
    let states = parse_labels(&mut lines, "states")?;
    let inputs = parse_labels(&mut lines, "inputs")?;
    let outputs = parse_labels(&mut lines, "outputs")?;
    let a = parse_block(&mut lines, "A", &states, states.len())?;
    let b = parse_block(&mut lines, "B", &states, inputs.len())?;
    let c = parse_block(&mut lines, "C", &outputs, states.len())?;
    LabeledStateSpaceModel::new(a, b, c, states, inputs, outputs).map_err(|e| e.to_string())
}

/// Long-form CSV of the three matrices: `matrix,row,column,value`.
pub fn matrices_csv(model: &LabeledStateSpaceModel) -> String {
    let mut table = Csv::new(
        ["matrix", "row", "column", "value"]
            .map(String::from)
            .to_vec(),
    );
    let blocks = [
        ("A", model.a(), model.states(), model.states()),
        ("B", model.b(), model.states(), model.inputs()),
        ("C", model.c(), model.outputs(), model.states()),
    ];
    for (name, m, rows, cols) in blocks {
        for (i, r) in rows.iter().enumerate() {
            for (j, c) in cols.iter().enumerate() {
                table.push_text(vec![
                    name.to_string(),
                    r.to_string(),
                    c.to_string(),
                    number(m[(i, j)]),
                ]);
            }
        }
    }
    table.render()
}

/// Header row plus data rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Csv {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Csv {
    pub fn new(header: Vec<String>) -> Self {
        Self {
            header,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, values: &[f64]) {
        assert_eq!(values.len(), self.header.len(), "CSV row width");
        self.rows.push(values.iter().map(|v| number(*v)).collect());
    }

    fn push_text(&mut self, values: Vec<String>) {
        self.rows.push(values);
    }

    pub fn render(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_keep_seventeen_significant_digits() {
        assert_eq!(number(0.1), "1.0000000000000001e-1");
        assert_eq!(number(-2.0), "-2.0000000000000000e0");
        for v in [std::f64::consts::PI, 1e-300, -7.25e18, 5e-324] {
            assert_eq!(number(v).parse::<f64>().unwrap().to_bits(), v.to_bits());
        }
    }

    #[test]
    fn malformed_files_are_rejected() {
        assert!(read_matrix_file("").is_err());
        assert!(read_matrix_file("hello").is_err());
        let text = format!(
            "{MAGIC}\nstates 1 p[0].r\ninputs 1 p[0].l\noutputs 1 p[0].r\nA 1 1\np[0].r 1 2\n"
        );
        assert!(read_matrix_file(&text)
            .unwrap_err()
            .contains("expected 1 values"));
    }

    #[test]
    fn csv_has_a_header_row() {
        let mut t = Csv::new(vec!["a".into(), "b".into()]);
        t.push(&[1.0, 0.5]);
        assert_eq!(
            t.render(),
            "a,b\n1.0000000000000000e0,5.0000000000000000e-1\n"
        );
    }
}
