//! Graph file formats.
//!
//! Adjacency: a `#nodes N` header followed by whitespace-separated edge lines
//! `u v [w]` (0-indexed, weight defaults to 1). A line sets the directed entry
//! (u,v); on load, each unordered pair is averaged over the directions that
//! were explicitly given, so a single line yields a symmetric edge and
//! conflicting directed entries are reconciled by their mean.
//!
//! Features: CSV, one row per node. Labels: one integer per line. Marginal:
//! one float per line, validated to sum to 1 within 1e-6 and renormalized.

use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};

use crate::error::{GdaError, Result};
use crate::graph::{normalize_marginal, uniform_marginal, Graph};

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> GdaError {
    GdaError::Parse {
        path: path.display().to_string(),
        line,
        msg: msg.into(),
    }
}

pub fn read_adjacency(path: &Path) -> Result<Array2<f64>> {
    let text = fs::read_to_string(path)?;
    let mut n: Option<usize> = None;
    let mut raw: Option<Array2<f64>> = None;
    let mut seen: Option<Array2<bool>> = None;
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix("#nodes") {
            let count: usize = rest
                .trim()
                .parse()
                .map_err(|_| parse_err(path, lineno, "bad node count"))?;
            if count == 0 {
                return Err(parse_err(path, lineno, "node count must be positive"));
            }
            n = Some(count);
            raw = Some(Array2::zeros((count, count)));
            seen = Some(Array2::from_elem((count, count), false));
            continue;
        }
        if line.starts_with('#') {
            continue;
        }
        let n = n.ok_or_else(|| parse_err(path, lineno, "edge before #nodes header"))?;
        let raw = raw.as_mut().unwrap();
        let seen = seen.as_mut().unwrap();
        let mut parts = line.split_whitespace();
        let u: usize = parts
            .next()
            .ok_or_else(|| parse_err(path, lineno, "missing source"))?
            .parse()
            .map_err(|_| parse_err(path, lineno, "bad source index"))?;
        let v: usize = parts
            .next()
            .ok_or_else(|| parse_err(path, lineno, "missing target"))?
            .parse()
            .map_err(|_| parse_err(path, lineno, "bad target index"))?;
        let w: f64 = match parts.next() {
            Some(tok) => tok
                .parse()
                .map_err(|_| parse_err(path, lineno, "bad weight"))?,
            None => 1.0,
        };
        if parts.next().is_some() {
            return Err(parse_err(path, lineno, "trailing tokens"));
        }
        if u >= n || v >= n {
            return Err(parse_err(path, lineno, format!("node id out of range 0..{n}")));
        }
        if !w.is_finite() || w < 0.0 {
            return Err(parse_err(path, lineno, "weight must be finite and >= 0"));
        }
        raw[[u, v]] = w;
        seen[[u, v]] = true;
    }
    let n = n.ok_or_else(|| parse_err(path, 0, "missing #nodes header"))?;
    let raw = raw.unwrap();
    let seen = seen.unwrap();
    let mut adj = Array2::zeros((n, n));
    for i in 0..n {
        for j in i..n {
            let (a, sa) = (raw[[i, j]], seen[[i, j]]);
            let (b, sb) = (raw[[j, i]], seen[[j, i]]);
            let w = match (sa, sb) {
                (true, true) => 0.5 * (a + b),
                (true, false) => a,
                (false, true) => b,
                (false, false) => 0.0,
            };
            adj[[i, j]] = w;
            adj[[j, i]] = w;
        }
    }
    Ok(adj)
}

pub fn write_adjacency(path: &Path, adj: &Array2<f64>) -> Result<()> {
    let n = adj.nrows();
    let mut out = format!("#nodes {n}\n");
    for i in 0..n {
        for j in i..n {
            let w = adj[[i, j]];
            if w != 0.0 {
                out.push_str(&format!("{i} {j} {w}\n"));
            }
        }
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_features(path: &Path) -> Result<Array2<f64>> {
    let text = fs::read_to_string(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row: Vec<f64> = line
            .split(',')
            .map(|tok| {
                tok.trim()
                    .parse::<f64>()
                    .map_err(|_| parse_err(path, idx + 1, format!("bad float {tok:?}")))
            })
            .collect::<Result<_>>()?;
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(parse_err(path, idx + 1, "ragged row"));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(parse_err(path, 0, "no feature rows"));
    }
    let d = rows[0].len();
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    Array2::from_shape_vec((rows.len(), d), flat)
        .map_err(|e| GdaError::Invalid(e.to_string()))
}

pub fn write_features(path: &Path, feats: &Array2<f64>) -> Result<()> {
    let mut out = String::new();
    for row in feats.rows() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_labels(path: &Path) -> Result<Vec<usize>> {
    let text = fs::read_to_string(path)?;
    let mut labels = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let lab: usize = line
            .parse()
            .map_err(|_| parse_err(path, idx + 1, format!("bad label {line:?}")))?;
        labels.push(lab);
    }
    Ok(labels)
}

pub fn write_labels(path: &Path, labels: &[usize]) -> Result<()> {
    let mut out = String::new();
    for l in labels {
        out.push_str(&format!("{l}\n"));
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_marginal(path: &Path) -> Result<Array1<f64>> {
    let text = fs::read_to_string(path)?;
    let mut vals = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let v: f64 = line
            .parse()
            .map_err(|_| parse_err(path, idx + 1, format!("bad float {line:?}")))?;
        vals.push(v);
    }
    normalize_marginal(Array1::from_vec(vals), 1e-6)
}

pub fn write_marginal(path: &Path, mu: &Array1<f64>) -> Result<()> {
    let mut out = String::new();
    for v in mu {
        out.push_str(&format!("{v}\n"));
    }
    fs::write(path, out)?;
    Ok(())
}

/// Loads the graph file triple; marginal defaults to uniform.
pub fn load_graph(
    adjacency_path: &Path,
    features_path: &Path,
    labels_path: Option<&Path>,
    marginal_path: Option<&Path>,
) -> Result<Graph> {
    let adjacency = read_adjacency(adjacency_path)?;
    let features = read_features(features_path)?;
    let n = adjacency.nrows();
    if features.nrows() != n {
        return Err(GdaError::Dimension(format!(
            "{} feature rows for {} nodes",
            features.nrows(),
            n
        )));
    }
    let labels = match labels_path {
        Some(p) => {
            let lab = read_labels(p)?;
            if lab.len() != n {
                return Err(GdaError::Dimension(format!(
                    "{} labels for {} nodes",
                    lab.len(),
                    n
                )));
            }
            Some(lab)
        }
        None => None,
    };
    let marginal = match marginal_path {
        Some(p) => {
            let mu = read_marginal(p)?;
            if mu.len() != n {
                return Err(GdaError::Dimension(format!(
                    "marginal length {} for {} nodes",
                    mu.len(),
                    n
                )));
            }
            mu
        }
        None => uniform_marginal(n)?,
    };
    Graph::new(adjacency, features, marginal, labels)
}

/// Writes the file triple (plus marginal) for a graph into a directory using
/// fixed member names: adjacency.txt, features.csv, labels.txt, marginal.txt.
pub fn save_graph(dir: &Path, g: &Graph) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_adjacency(&dir.join("adjacency.txt"), &g.adjacency)?;
    write_features(&dir.join("features.csv"), &g.features)?;
    if let Some(ref lab) = g.labels {
        write_labels(&dir.join("labels.txt"), lab)?;
    }
    write_marginal(&dir.join("marginal.txt"), &g.marginal)?;
    Ok(())
}

/// Loads a graph saved by `save_graph`.
pub fn load_graph_dir(dir: &Path) -> Result<Graph> {
    let labels = dir.join("labels.txt");
    let marginal = dir.join("marginal.txt");
    load_graph(
        &dir.join("adjacency.txt"),
        &dir.join("features.csv"),
        labels.exists().then_some(labels.as_path()),
        marginal.exists().then_some(marginal.as_path()),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn tmp(name: &str, content: &str) -> std::path::PathBuf {
        let p = std::env::temp_dir().join(format!("gda_io_{}_{name}", std::process::id()));
        fs::write(&p, content).unwrap();
        p
    }

    #[test]
    fn single_edge_is_symmetric() {
        let p = tmp("single.txt", "#nodes 2\n0 1\n");
        let a = read_adjacency(&p).unwrap();
        assert_eq!(a, array![[0.0, 1.0], [1.0, 0.0]]);
    }

    #[test]
    fn empty_edge_list() {
        let p = tmp("empty.txt", "#nodes 3\n");
        let a = read_adjacency(&p).unwrap();
        assert_eq!(a, Array2::<f64>::zeros((3, 3)));
    }

    #[test]
    fn conflicting_directions_average() {
        let p = tmp("conflict.txt", "#nodes 2\n0 1 2\n1 0 0\n");
        let a = read_adjacency(&p).unwrap();
        assert_eq!(a, array![[0.0, 1.0], [1.0, 0.0]]);
    }

    #[test]
    fn rejects_out_of_range_and_negative() {
        let p = tmp("range.txt", "#nodes 2\n0 5\n");
        assert!(read_adjacency(&p).is_err());
        let p = tmp("negw.txt", "#nodes 2\n0 1 -3\n");
        assert!(read_adjacency(&p).is_err());
        let p = tmp("nohdr.txt", "0 1\n");
        assert!(read_adjacency(&p).is_err());
    }

    #[test]
    fn adjacency_round_trip() {
        let adj = array![[0.0, 0.25, 0.0], [0.25, 0.5, 1.5], [0.0, 1.5, 0.0]];
        let p = std::env::temp_dir().join(format!("gda_io_rt_{}", std::process::id()));
        write_adjacency(&p, &adj).unwrap();
        assert_eq!(read_adjacency(&p).unwrap(), adj);
    }

    #[test]
    fn features_and_labels_round_trip() {
        let x = array![[1.0, -2.5], [0.125, 3.0]];
        let p = std::env::temp_dir().join(format!("gda_io_feat_{}", std::process::id()));
        write_features(&p, &x).unwrap();
        assert_eq!(read_features(&p).unwrap(), x);

        let lp = std::env::temp_dir().join(format!("gda_io_lab_{}", std::process::id()));
        write_labels(&lp, &[0, 1, 1]).unwrap();
        assert_eq!(read_labels(&lp).unwrap(), vec![0, 1, 1]);
    }

    #[test]
    fn marginal_renormalizes_within_tolerance() {
        let p = tmp("marg.txt", "0.5000001\n0.4999996\n");
        let mu = read_marginal(&p).unwrap();
        assert!((mu.sum() - 1.0).abs() < 1e-15);
        let p = tmp("margbad.txt", "0.6\n0.6\n");
        assert!(read_marginal(&p).is_err());
    }
}
