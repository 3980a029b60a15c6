//! File formats: headerless CSV matrices and TSV edge lists.
//!
//! Matrices are written with Rust's shortest round-trip float formatting,
//! so writing and reading back reproduces every entry bit for bit.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::netcore::{BipartiteMultigraph, Edge};
use crate::Matrix;

pub fn parse_matrix_csv(text: &str, origin: &Path) -> Result<Matrix> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Parse {
            path: origin.to_path_buf(),
            line: e.position().map_or(i + 1, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(i + 1, |p| p.line() as usize);
        if record.iter().all(str::is_empty) {
            continue;
        }
        let row = record
            .iter()
            .map(|field| {
                field.parse::<f64>().map_err(|_| Error::Parse {
                    path: origin.to_path_buf(),
                    line,
                    message: format!("'{field}' is not a number"),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.is_empty() || ncols == 0 {
        return Err(Error::Parse {
            path: origin.to_path_buf(),
            line: 1,
            message: "matrix is empty".into(),
        });
    }
    Ok(Matrix::from_row_iterator(
        rows.len(),
        ncols,
        rows.into_iter().flatten(),
    ))
}

pub fn read_matrix_csv(path: impl AsRef<Path>) -> Result<Matrix> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_matrix_csv(&text, path)
}

pub fn format_matrix_csv(m: &Matrix) -> String {
    let mut out = String::new();
    for row in m.row_iter() {
        let mut first = true;
        for x in row.iter() {
            if !first {
                out.push(',');
            }
            first = false;
            write!(out, "{x}").expect("writing to a String cannot fail");
        }
        out.push('\n');
    }
    out
}

pub fn write_matrix_csv(path: impl AsRef<Path>, m: &Matrix) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, format_matrix_csv(m)).map_err(|e| Error::io(path, e))
}

/// Integer view of a matrix whose entries are all whole numbers.
pub fn to_integer_matrix(m: &Matrix) -> Result<DMatrix<i64>> {
    if let Some(bad) = m.iter().find(|x| x.fract() != 0.0 || !x.is_finite()) {
        return Err(Error::invalid(format!(
            "expected integer entries, found {bad}"
        )));
    }
    Ok(m.map(|x| x as i64))
}

/// A graph read from an edge list with the labels of each side in
/// first-appearance order (`u_labels[i]` names vertex `i` of `U`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledGraph {
    pub graph: BipartiteMultigraph,
    pub u_labels: Vec<String>,
    pub v_labels: Vec<String>,
}

fn intern(labels: &mut Vec<String>, index: &mut HashMap<String, usize>, label: &str) -> usize {
    if let Some(&i) = index.get(label) {
        return i;
    }
    labels.push(label.to_owned());
    index.insert(label.to_owned(), labels.len() - 1);
    labels.len() - 1
}

/// `u<TAB>v[<TAB>count]` per line; blank lines and lines starting with `#`
/// are skipped.
pub fn parse_edge_list(text: &str, origin: &Path) -> Result<LabeledGraph> {
    let (mut u_labels, mut v_labels) = (Vec::new(), Vec::new());
    let (mut u_index, mut v_index) = (HashMap::new(), HashMap::new());
    let mut edges = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |message: String| Error::Parse {
            path: origin.to_path_buf(),
            line: i + 1,
            message,
        };
        let fields: Vec<&str> = line.split('\t').collect();
        if !(2..=3).contains(&fields.len()) {
            return Err(err(format!(
                "expected 2 or 3 tab-separated fields, got {}",
                fields.len()
            )));
        }
        let count = match fields.get(2) {
            Some(c) => c
                .trim()
                .parse::<u64>()
                .ok()
                .filter(|c| *c > 0)
                .ok_or_else(|| err(format!("count '{c}' is not a positive integer")))?,
            None => 1,
        };
        let u = intern(&mut u_labels, &mut u_index, fields[0]);
        let v = intern(&mut v_labels, &mut v_index, fields[1]);
        edges.push(Edge { u, v, count });
    }
    if edges.is_empty() {
        return Err(Error::Parse {
            path: origin.to_path_buf(),
            line: 0,
            message: "edge list has no edges".into(),
        });
    }
    let graph = BipartiteMultigraph::new(u_labels.len(), v_labels.len(), edges)?;
    Ok(LabeledGraph {
        graph,
        u_labels,
        v_labels,
    })
}

pub fn read_edge_list(path: impl AsRef<Path>) -> Result<LabeledGraph> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_edge_list(&text, path)
}

/// Writes edges as `u<i>\tv<j>\tcount`.
pub fn format_edge_list(g: &BipartiteMultigraph) -> String {
    let mut out = String::new();
    for e in g.edges() {
        writeln!(out, "u{}\tv{}\t{}", e.u, e.v, e.count).expect("writing to a String cannot fail");
    }
    out
}

/// One community label per non-empty line.
pub fn read_partition_labels(path: impl AsRef<Path>) -> Result<Vec<String>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_owned)
        .collect())
}
