//! Readers and writers for the on-disk formats: Matrix Market coordinate
//! files, whitespace edge lists, point CSVs and one-label-per-line files.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::graph::SparseGraph;
use crate::similarity::PointCloud;

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write(path: &Path, contents: &str) -> Result<()> {
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(contents.as_bytes()).map_err(|e| Error::io(path, e))
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        msg: msg.into(),
    }
}

/// Loads a graph, choosing the format by extension (`.mtx` is Matrix
/// Market, anything else an edge list).
pub fn read_graph(path: &Path) -> Result<SparseGraph> {
    match path.extension().and_then(|e| e.to_str()) {
        Some(ext) if ext.eq_ignore_ascii_case("mtx") => read_matrix_market(path),
        _ => read_edge_list(path),
    }
}

/// Matrix Market coordinate reader for `real`, `integer` and `pattern`
/// fields with `symmetric` or `general` symmetry. Pattern entries get unit
/// weight, explicit zeros are skipped. A `general` file must list both
/// orientations of every edge with equal weights.
pub fn read_matrix_market(path: &Path) -> Result<SparseGraph> {
    let text = read(path)?;
    parse_matrix_market(&text, path)
}

fn parse_matrix_market(text: &str, path: &Path) -> Result<SparseGraph> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| parse_err(path, 1, "empty file"))?;
    let tokens: Vec<String> = header.split_whitespace().map(|t| t.to_ascii_lowercase()).collect();
    if tokens.len() != 5 || tokens[0] != "%%matrixmarket" || tokens[1] != "matrix" {
        return Err(parse_err(path, 1, "missing %%MatrixMarket matrix header"));
    }
    if tokens[2] != "coordinate" {
        return Err(parse_err(path, 1, "only coordinate format is supported"));
    }
    let pattern = match tokens[3].as_str() {
        "pattern" => true,
        "real" | "integer" | "double" => false,
        other => return Err(parse_err(path, 1, format!("unsupported field `{other}`"))),
    };
    let symmetric = match tokens[4].as_str() {
        "symmetric" => true,
        "general" => false,
        other => return Err(parse_err(path, 1, format!("unsupported symmetry `{other}`"))),
    };

    let mut size: Option<(usize, usize)> = None;
    let mut entries: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for (idx, line) in lines {
        let lineno = idx + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('%') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let Some((n, _)) = size else {
            if fields.len() != 3 {
                return Err(parse_err(path, lineno, "expected `rows cols nnz`"));
            }
            let parse = |s: &str| {
                s.parse::<usize>()
                    .map_err(|_| parse_err(path, lineno, format!("bad integer `{s}`")))
            };
            let (rows, cols) = (parse(fields[0])?, parse(fields[1])?);
            if rows != cols {
                return Err(parse_err(path, lineno, "adjacency matrix must be square"));
            }
            size = Some((rows, parse(fields[2])?));
            continue;
        };
        let want = if pattern { 2 } else { 3 };
        if fields.len() < want {
            return Err(parse_err(path, lineno, format!("expected {want} fields")));
        }
        let index = |s: &str| -> Result<usize> {
            let v: usize = s
                .parse()
                .map_err(|_| parse_err(path, lineno, format!("bad index `{s}`")))?;
            if v == 0 || v > n {
                return Err(parse_err(path, lineno, format!("index {v} outside 1..={n}")));
            }
            Ok(v - 1)
        };
        let (i, j) = (index(fields[0])?, index(fields[1])?);
        let w = if pattern {
            1.0
        } else {
            fields[2]
                .parse::<f64>()
                .map_err(|_| parse_err(path, lineno, format!("bad value `{}`", fields[2])))?
        };
        if w == 0.0 {
            continue;
        }
        if i == j {
            return Err(parse_err(path, lineno, format!("self loop at node {i}")));
        }
        if entries.insert((i, j), w).is_some() {
            return Err(parse_err(
                path,
                lineno,
                format!("duplicate entry ({}, {})", i + 1, j + 1),
            ));
        }
    }
    let (n, _) = size.ok_or_else(|| parse_err(path, 1, "missing size line"))?;

    let mut edges = Vec::with_capacity(entries.len());
    if symmetric {
        for (&(i, j), &w) in &entries {
            edges.push((i, j, w));
        }
    } else {
        for (&(i, j), &w) in &entries {
            match entries.get(&(j, i)) {
                Some(&back) if back == w => {
                    if i < j {
                        edges.push((i, j, w));
                    }
                }
                _ => {
                    return Err(parse_err(
                        path,
                        0,
                        format!("matrix is not symmetric at ({}, {})", i + 1, j + 1),
                    ))
                }
            }
        }
    }
    SparseGraph::from_edges(n, &edges)
}

/// Writes the lower triangle as a `real symmetric` coordinate file.
pub fn write_matrix_market(path: &Path, g: &SparseGraph) -> Result<()> {
    let mut out = String::from("%%MatrixMarket matrix coordinate real symmetric\n");
    out.push_str(&format!("{} {} {}\n", g.n(), g.n(), g.num_edges()));
    for &(i, j, w) in g.edges() {
        out.push_str(&format!("{} {} {}\n", j + 1, i + 1, w));
    }
    write(path, &out)
}

/// Plain `i j w` edge list with 0-based indices and `#` comments. The node
/// count is one past the largest index seen.
pub fn read_edge_list(path: &Path) -> Result<SparseGraph> {
    let text = read(path)?;
    let mut edges = Vec::new();
    let mut n = 0;
    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(parse_err(path, lineno, "expected `i j w`"));
        }
        let i: usize = fields[0]
            .parse()
            .map_err(|_| parse_err(path, lineno, format!("bad index `{}`", fields[0])))?;
        let j: usize = fields[1]
            .parse()
            .map_err(|_| parse_err(path, lineno, format!("bad index `{}`", fields[1])))?;
        let w: f64 = fields[2]
            .parse()
            .map_err(|_| parse_err(path, lineno, format!("bad weight `{}`", fields[2])))?;
        n = n.max(i + 1).max(j + 1);
        edges.push((i, j, w));
    }
    SparseGraph::from_edges(n, &edges)
}

/// Reads one point per row. With `label_column`, the final field of each
/// row is parsed as an integer ground-truth label.
pub fn read_points_csv(path: &Path, label_column: bool) -> Result<(PointCloud, Option<Vec<i64>>)> {
    let text = read(path)?;
    let mut coords = Vec::new();
    let mut labels = Vec::new();
    let mut dim = None;
    let mut rows = 0;
    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if label_column {
            let last = fields
                .pop()
                .ok_or_else(|| parse_err(path, lineno, "missing label column"))?;
            labels.push(
                last.parse::<i64>()
                    .map_err(|_| parse_err(path, lineno, format!("bad label `{last}`")))?,
            );
        }
        if *dim.get_or_insert(fields.len()) != fields.len() {
            return Err(parse_err(path, lineno, "inconsistent column count"));
        }
        for f in fields {
            coords.push(
                f.parse::<f64>()
                    .map_err(|_| parse_err(path, lineno, format!("bad number `{f}`")))?,
            );
        }
        rows += 1;
    }
    let d = dim.unwrap_or(0);
    let pc = PointCloud::new(coords, rows, d)?;
    Ok((pc, label_column.then_some(labels)))
}

pub fn write_points_csv(path: &Path, pc: &PointCloud) -> Result<()> {
    let mut out = String::new();
    for i in 0..pc.n() {
        let row: Vec<String> = pc.point(i).iter().map(|x| format!("{x}")).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    write(path, &out)
}

pub fn read_labels(path: &Path) -> Result<Vec<i64>> {
    let text = read(path)?;
    let mut labels = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        labels.push(
            line.parse()
                .map_err(|_| parse_err(path, idx + 1, format!("bad label `{line}`")))?,
        );
    }
    Ok(labels)
}

pub fn write_labels<T: std::fmt::Display>(path: &Path, labels: &[T]) -> Result<()> {
    let mut out = String::with_capacity(labels.len() * 3);
    for l in labels {
        out.push_str(&l.to_string());
        out.push('\n');
    }
    write(path, &out)
}

/// Writes an `n × k` matrix as CSV, one row per node.
pub fn write_matrix_csv(path: &Path, m: &nalgebra::DMatrix<f64>) -> Result<()> {
    let mut out = String::new();
    for r in 0..m.nrows() {
        let row: Vec<String> = m.row(r).iter().map(|x| format!("{x:e}")).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    write(path, &out)
}
