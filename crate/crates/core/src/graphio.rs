//! Ingestion and preprocessing of network data: edge lists, covariate tables,
//! missing-data filtering, largest connected component, and degree
//! regularization.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::sparse::{CsrMatrix, RankOneShifted, SymOp};

/// One named discrete covariate column with nullable cells.
#[derive(Debug, Clone, PartialEq)]
pub struct CovariateColumn {
    /// Column name.
    pub name: String,
    /// Per-node value; `None` marks a missing cell.
    pub values: Vec<Option<u8>>,
}

/// Undirected simple graph with a node covariate table.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    /// Node count.
    pub n: usize,
    /// Unordered distinct edges (a < b), endpoints in 0..n.
    pub edges: Vec<(u32, u32)>,
    /// Covariate columns (all of length n).
    pub covariates: Vec<CovariateColumn>,
    /// Original external identifier of each node.
    pub node_ids: Vec<u64>,
}

impl Graph {
    /// Builds a graph from already-canonical edges (no covariates).
    pub fn from_edges(n: usize, edges: Vec<(u32, u32)>) -> Result<Self> {
        for &(a, b) in &edges {
            if a as usize >= n || b as usize >= n {
                return Err(Error::InvalidInput(format!(
                    "edge ({}, {}) out of range for n = {}",
                    a, b, n
                )));
            }
            if a == b {
                return Err(Error::InvalidInput(format!("self-loop at node {}", a)));
            }
        }
        Ok(Graph {
            n,
            edges,
            covariates: Vec::new(),
            node_ids: (0..n as u64).collect(),
        })
    }

    /// Attaches a fully observed binary covariate column.
    pub fn with_covariate(mut self, name: &str, values: Vec<u8>) -> Result<Self> {
        if values.len() != self.n {
            return Err(Error::InvalidInput(format!(
                "covariate '{}' has {} values for {} nodes",
                name,
                values.len(),
                self.n
            )));
        }
        self.covariates.push(CovariateColumn {
            name: name.to_string(),
            values: values.into_iter().map(Some).collect(),
        });
        Ok(self)
    }

    /// Fully observed values of covariate column `idx`; errors on any missing
    /// cell.
    pub fn covariate_values(&self, idx: usize) -> Result<Vec<u8>> {
        let col = self.covariates.get(idx).ok_or_else(|| {
            Error::InvalidInput(format!("covariate index {} out of range", idx))
        })?;
        col.values
            .iter()
            .enumerate()
            .map(|(i, v)| {
                v.ok_or_else(|| {
                    Error::InvalidInput(format!(
                        "covariate '{}' missing at node {}",
                        col.name, i
                    ))
                })
            })
            .collect()
    }

    /// Sparse symmetric 0/1 adjacency matrix.
    pub fn adjacency(&self) -> Result<CsrMatrix> {
        CsrMatrix::adjacency(self.n, &self.edges)
    }

    /// Dense adjacency matrix (for small n or dense pipelines).
    pub fn adjacency_dense(&self) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(self.n, self.n);
        for &(i, j) in &self.edges {
            a[(i as usize, j as usize)] = 1.0;
            a[(j as usize, i as usize)] = 1.0;
        }
        a
    }

    /// Mean degree 2|E|/n.
    pub fn mean_degree(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            2.0 * self.edges.len() as f64 / self.n as f64
        }
    }

    /// Writes the edge list using original node identifiers.
    pub fn write_edge_list<W: Write>(&self, mut w: W) -> Result<()> {
        for &(a, b) in &self.edges {
            writeln!(w, "{} {}", self.node_ids[a as usize], self.node_ids[b as usize])
                .map_err(|e| Error::InvalidInput(format!("write failed: {}", e)))?;
        }
        Ok(())
    }
}

/// Counts of records dropped or deduplicated during edge-list parsing.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParseWarnings {
    /// Duplicate edges dropped.
    pub duplicates: usize,
    /// Self-loops dropped.
    pub self_loops: usize,
}

/// Reads a whitespace-separated edge list (two integer node IDs per line,
/// `#` comments and blank lines allowed). Arbitrary IDs are remapped to
/// 0..n−1 in order of first appearance; the original IDs are retained.
pub fn read_edge_list<P: AsRef<Path>>(path: P) -> Result<(Graph, ParseWarnings)> {
    let file = std::fs::File::open(&path).map_err(|e| {
        Error::ParseError(format!("cannot open {}: {}", path.as_ref().display(), e))
    })?;
    parse_edge_list(BufReader::new(file))
}

/// See [`read_edge_list`]; parses from any buffered reader.
pub fn parse_edge_list<R: BufRead>(reader: R) -> Result<(Graph, ParseWarnings)> {
    let mut id_map: HashMap<u64, u32> = HashMap::new();
    let mut node_ids: Vec<u64> = Vec::new();
    let mut seen: std::collections::HashSet<(u32, u32)> = std::collections::HashSet::new();
    let mut edges: Vec<(u32, u32)> = Vec::new();
    let mut warnings = ParseWarnings::default();

    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| {
            Error::ParseError(format!("read failed at line {}: {}", lineno + 1, e))
        })?;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut parts = content.split_whitespace();
        let parse_id = |tok: Option<&str>| -> Result<u64> {
            tok.ok_or_else(|| {
                Error::ParseError(format!("line {}: expected two node IDs", lineno + 1))
            })?
            .parse::<u64>()
            .map_err(|_| {
                Error::ParseError(format!(
                    "line {}: malformed node ID in '{}'",
                    lineno + 1,
                    content
                ))
            })
        };
        let a = parse_id(parts.next())?;
        let b = parse_id(parts.next())?;
        if parts.next().is_some() {
            return Err(Error::ParseError(format!(
                "line {}: expected exactly two fields, got '{}'",
                lineno + 1,
                content
            )));
        }
        let mut intern = |id: u64| -> u32 {
            *id_map.entry(id).or_insert_with(|| {
                node_ids.push(id);
                (node_ids.len() - 1) as u32
            })
        };
        let (ia, ib) = (intern(a), intern(b));
        if ia == ib {
            warnings.self_loops += 1;
            continue;
        }
        let key = (ia.min(ib), ia.max(ib));
        if seen.insert(key) {
            edges.push(key);
        } else {
            warnings.duplicates += 1;
        }
    }
    let n = node_ids.len();
    Ok((
        Graph {
            n,
            edges,
            covariates: Vec::new(),
            node_ids,
        },
        warnings,
    ))
}

/// A binarization rule for one raw covariate column: the cell becomes 1 when
/// the raw value equals `one_value`, 0 when it equals any other non-missing
/// value, and missing when it equals `missing_value` (if declared) or is
/// empty/NA.
#[derive(Debug, Clone, PartialEq)]
pub struct BinarizeRule {
    /// Source column name in the file header.
    pub column: String,
    /// Raw value mapped to 1.
    pub one_value: String,
    /// Raw value treated as missing, if any.
    pub missing_value: Option<String>,
}

/// Reads a delimited covariate table (comma or tab, header row with a node-ID
/// column named `id_column`) and attaches the selected binarized columns to
/// the graph. Rows for unknown node IDs are ignored; nodes without a row get
/// missing cells.
pub fn read_covariates<P: AsRef<Path>>(
    graph: &mut Graph,
    path: P,
    id_column: &str,
    rules: &[BinarizeRule],
) -> Result<()> {
    let file = std::fs::File::open(&path).map_err(|e| {
        Error::ParseError(format!("cannot open {}: {}", path.as_ref().display(), e))
    })?;
    parse_covariates(graph, BufReader::new(file), id_column, rules)
}

/// See [`read_covariates`]; parses from any buffered reader.
pub fn parse_covariates<R: BufRead>(
    graph: &mut Graph,
    reader: R,
    id_column: &str,
    rules: &[BinarizeRule],
) -> Result<()> {
    let mut lines = reader.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::ParseError("covariate file is empty".into()))?
        .map_err(|e| Error::ParseError(format!("read failed: {}", e)))?;
    let delim = if header.contains('\t') { '\t' } else { ',' };
    let cols: Vec<String> = header.split(delim).map(|s| s.trim().to_string()).collect();
    let id_idx = cols.iter().position(|c| c == id_column).ok_or_else(|| {
        Error::ConfigError(format!("node-ID column '{}' not in header", id_column))
    })?;
    let rule_idx: Vec<usize> = rules
        .iter()
        .map(|r| {
            cols.iter().position(|c| c == &r.column).ok_or_else(|| {
                Error::ConfigError(format!("unknown covariate column '{}'", r.column))
            })
        })
        .collect::<Result<_>>()?;

    let id_map: HashMap<u64, usize> = graph
        .node_ids
        .iter()
        .enumerate()
        .map(|(i, &id)| (id, i))
        .collect();
    let mut values: Vec<Vec<Option<u8>>> = vec![vec![None; graph.n]; rules.len()];

    for (lineno, line) in lines.enumerate() {
        let line = line.map_err(|e| {
            Error::ParseError(format!("read failed at line {}: {}", lineno + 2, e))
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(delim).map(|s| s.trim()).collect();
        if fields.len() != cols.len() {
            return Err(Error::ParseError(format!(
                "line {}: {} fields, header has {}",
                lineno + 2,
                fields.len(),
                cols.len()
            )));
        }
        let id: u64 = fields[id_idx].parse().map_err(|_| {
            Error::ParseError(format!(
                "line {}: malformed node ID '{}'",
                lineno + 2,
                fields[id_idx]
            ))
        })?;
        let Some(&node) = id_map.get(&id) else {
            continue;
        };
        for (r, rule) in rules.iter().enumerate() {
            let raw = fields[rule_idx[r]];
            let missing = raw.is_empty()
                || raw.eq_ignore_ascii_case("na")
                || rule.missing_value.as_deref() == Some(raw);
            values[r][node] = if missing {
                None
            } else if raw == rule.one_value {
                Some(1)
            } else {
                Some(0)
            };
        }
    }
    for (r, rule) in rules.iter().enumerate() {
        graph.covariates.push(CovariateColumn {
            name: rule.column.clone(),
            values: std::mem::take(&mut values[r]),
        });
    }
    Ok(())
}

/// Removes nodes with a missing cell in any of the listed covariate columns,
/// then returns the largest connected component of what remains (ties broken
/// by lowest contained original ID).
pub fn drop_missing_and_lcc(g: &Graph, required_columns: &[&str]) -> Result<Graph> {
    let mut keep = vec![true; g.n];
    for &name in required_columns {
        let col = g
            .covariates
            .iter()
            .find(|c| c.name == name)
            .ok_or_else(|| Error::ConfigError(format!("unknown required column '{}'", name)))?;
        for (i, v) in col.values.iter().enumerate() {
            if v.is_none() {
                keep[i] = false;
            }
        }
    }
    // Union-find over the surviving nodes.
    let mut parent: Vec<usize> = (0..g.n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for &(a, b) in &g.edges {
        let (a, b) = (a as usize, b as usize);
        if keep[a] && keep[b] {
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            if ra != rb {
                parent[ra] = rb;
            }
        }
    }
    // Component sizes and minimum original ID per component.
    let mut size: HashMap<usize, usize> = HashMap::new();
    let mut min_id: HashMap<usize, u64> = HashMap::new();
    for i in 0..g.n {
        if keep[i] {
            let r = find(&mut parent, i);
            *size.entry(r).or_insert(0) += 1;
            let e = min_id.entry(r).or_insert(u64::MAX);
            *e = (*e).min(g.node_ids[i]);
        }
    }
    let best = size
        .iter()
        .max_by(|(ra, sa), (rb, sb)| sa.cmp(sb).then_with(|| min_id[rb].cmp(&min_id[ra])))
        .map(|(&r, _)| r)
        .ok_or_else(|| Error::EmptyGraph("no nodes survive the missing-data filter".into()))?;

    let mut new_index = vec![u32::MAX; g.n];
    let mut node_ids = Vec::new();
    for i in 0..g.n {
        if keep[i] && find(&mut parent, i) == best {
            new_index[i] = node_ids.len() as u32;
            node_ids.push(g.node_ids[i]);
        }
    }
    let edges: Vec<(u32, u32)> = g
        .edges
        .iter()
        .filter_map(|&(a, b)| {
            let (na, nb) = (new_index[a as usize], new_index[b as usize]);
            (na != u32::MAX && nb != u32::MAX).then(|| (na.min(nb), na.max(nb)))
        })
        .collect();
    let covariates = g
        .covariates
        .iter()
        .map(|c| CovariateColumn {
            name: c.name.clone(),
            values: (0..g.n)
                .filter(|&i| new_index[i] != u32::MAX)
                .map(|i| c.values[i])
                .collect(),
        })
        .collect();
    Ok(Graph {
        n: node_ids.len(),
        edges,
        covariates,
        node_ids,
    })
}

/// Degree regularization: the operator A + (γ·d̄/n)·J with d̄ the mean degree
/// and J the all-ones matrix, applied implicitly (J never materialized).
pub fn regularize_degrees<'a>(a: &'a CsrMatrix, gamma: f64) -> RankOneShifted<'a, CsrMatrix> {
    let n = a.dim();
    let mean_degree = if n == 0 {
        0.0
    } else {
        a.row_sums().sum() / n as f64
    };
    RankOneShifted {
        base: a,
        shift: gamma * mean_degree / n as f64,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    #[test]
    fn edge_list_parsing_and_dedup() {
        let (g, w) = parse_edge_list(Cursor::new("0 1\n1 2\n")).unwrap();
        assert_eq!((g.n, g.edges.len()), (3, 2));
        assert_eq!(w, ParseWarnings::default());

        let (g, w) = parse_edge_list(Cursor::new("0 1\n1 0\n")).unwrap();
        assert_eq!(g.edges.len(), 1);
        assert_eq!(w.duplicates, 1);

        let (g, _) = parse_edge_list(Cursor::new("10 20\n20 30\n")).unwrap();
        assert_eq!(g.node_ids, vec![10, 20, 30]);
    }

    #[test]
    fn lcc_keeps_largest_component() {
        // components {0..4} (path) and {5..7} (path)
        let g = Graph::from_edges(
            8,
            vec![(0, 1), (1, 2), (2, 3), (3, 4), (5, 6), (6, 7)],
        )
        .unwrap();
        let lcc = drop_missing_and_lcc(&g, &[]).unwrap();
        assert_eq!(lcc.n, 5);
        assert_eq!(lcc.node_ids, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn regularization_shift_arithmetic() {
        let g = Graph::from_edges(2, vec![(0, 1)]).unwrap();
        let a = g.adjacency().unwrap();
        let op = regularize_degrees(&a, 1.0);
        // mean degree 1, n = 2 → shift 0.5 per entry
        let d = op.to_dense();
        assert!((d[(0, 0)] - 0.5).abs() < 1e-15 && (d[(0, 1)] - 1.5).abs() < 1e-15);
    }
}
