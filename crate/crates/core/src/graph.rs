//! Weighted directed graphs in sparse form.
//!
//! Undirected inputs are stored as two arcs of equal weight (a self-loop is
//! stored once), parallel arcs are merged by summing their weights and
//! zero-weight arcs are dropped. Node ids are arbitrary strings mapped to dense
//! indices in first-seen order.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Link {
    pub source: usize,
    pub target: usize,
    pub weight: f64,
}

#[derive(Debug, Clone)]
pub struct Graph {
    directed: bool,
    node_ids: Vec<String>,
    index: HashMap<String, usize>,
    adjacency: CsrMatrix,
    total_weight: f64,
}

impl Graph {
    /// Builds a graph over `n` nodes labelled `"0".."n-1"`.
    pub fn from_links<I>(n: usize, directed: bool, links: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        let ids = (0..n).map(|i| i.to_string()).collect();
        Self::from_indexed(ids, directed, links)
    }

    /// Builds a graph whose dense index `i` carries external id `ids[i]`.
    pub fn from_indexed<I>(ids: Vec<String>, directed: bool, links: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        let n = ids.len();
        let mut triplets = Vec::new();
        for (u, v, w) in links {
            if u >= n || v >= n {
                return Err(Error::InvalidConfig(format!(
                    "link ({u},{v}) outside node range 0..{n}"
                )));
            }
            if !w.is_finite() {
                return Err(Error::NonFinite(format!("weight of link ({u},{v})")));
            }
            if w < 0.0 {
                return Err(Error::InvalidConfig(format!(
                    "negative weight {w} on link ({u},{v})"
                )));
            }
            if w == 0.0 {
                continue;
            }
            triplets.push((u, v, w));
            if !directed && u != v {
                triplets.push((v, u, w));
            }
        }
        let adjacency = CsrMatrix::from_triplets(n, n, &triplets);
        let total_weight = adjacency.sum();
        if n == 0 || adjacency.nnz() == 0 || total_weight <= 0.0 {
            return Err(Error::EmptyGraph);
        }
        let mut index = HashMap::with_capacity(n);
        for (i, id) in ids.iter().enumerate() {
            if index.insert(id.clone(), i).is_some() {
                return Err(Error::InvalidConfig(format!("duplicate node id `{id}`")));
            }
        }
        Ok(Self {
            directed,
            node_ids: ids,
            index,
            adjacency,
            total_weight,
        })
    }

    pub fn n(&self) -> usize {
        self.node_ids.len()
    }

    pub fn is_directed(&self) -> bool {
        self.directed
    }

    pub fn node_ids(&self) -> &[String] {
        &self.node_ids
    }

    pub fn node_index(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    /// The weighted adjacency matrix `A` with `A[u][v] = w_uv`.
    pub fn adjacency(&self) -> &CsrMatrix {
        &self.adjacency
    }

    /// All stored arcs in `(source, target)` order.
    pub fn links(&self) -> impl Iterator<Item = Link> + '_ {
        self.adjacency.iter().map(|(source, target, weight)| Link {
            source,
            target,
            weight,
        })
    }

    pub fn arc_count(&self) -> usize {
        self.adjacency.nnz()
    }

    /// `w_tot`, the sum over all stored arcs.
    pub fn total_weight(&self) -> f64 {
        self.total_weight
    }

    pub fn out_strength(&self) -> Vec<f64> {
        self.adjacency.row_sums()
    }

    pub fn in_strength(&self) -> Vec<f64> {
        self.adjacency.col_sums()
    }

    /// Writes the graph in the edge-list format read by [`load_edge_list`].
    /// Undirected graphs emit each edge once.
    pub fn write_edge_list<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for link in self.links() {
            if !self.directed && link.source > link.target {
                continue;
            }
            writeln!(
                out,
                "{} {} {}",
                self.node_ids[link.source], self.node_ids[link.target], link.weight
            )?;
        }
        Ok(())
    }
}

/// Reads a whitespace-separated `src dst [weight]` edge list. `#` starts a
/// comment line. With `weighted == false` any weight column is ignored.
pub fn load_edge_list(path: impl AsRef<Path>, directed: bool, weighted: bool) -> Result<Graph> {
    let path = path.as_ref();
    let file = File::open(path)?;
    parse_edge_list(BufReader::new(file), path, directed, weighted)
}

pub fn parse_edge_list<R: BufRead>(
    reader: R,
    path: &Path,
    directed: bool,
    weighted: bool,
) -> Result<Graph> {
    let mut ids: Vec<String> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut links = Vec::new();
    let mut intern = |id: &str| -> usize {
        if let Some(&i) = index.get(id) {
            return i;
        }
        ids.push(id.to_string());
        index.insert(id.to_string(), ids.len() - 1);
        ids.len() - 1
    };
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let line_number = lineno + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        let parse_err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: line_number,
            message,
        };
        if fields.len() < 2 || fields.len() > 3 {
            return Err(parse_err(format!(
                "expected `src dst [weight]`, found {} fields",
                fields.len()
            )));
        }
        let weight = match (weighted, fields.get(2)) {
            (true, Some(raw)) => {
                let w: f64 = raw
                    .parse()
                    .map_err(|_| parse_err(format!("invalid weight `{raw}`")))?;
                if !w.is_finite() {
                    return Err(parse_err(format!("non-finite weight `{raw}`")));
                }
                if w < 0.0 {
                    return Err(Error::NegativeWeight {
                        path: path.to_path_buf(),
                        line: line_number,
                        weight: w,
                    });
                }
                w
            }
            _ => 1.0,
        };
        let u = intern(fields[0]);
        let v = intern(fields[1]);
        links.push((u, v, weight));
    }
    Graph::from_indexed(ids, directed, links)
}

/// Weak-connectivity labelling; returns `(labels, component_count)` with
/// components numbered in order of their smallest node.
pub fn connected_components(graph: &Graph) -> (Vec<usize>, usize) {
    let n = graph.n();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for link in graph.links() {
        let a = find(&mut parent, link.source);
        let b = find(&mut parent, link.target);
        if a != b {
            parent[a.max(b)] = a.min(b);
        }
    }
    let mut labels = vec![usize::MAX; n];
    let mut root_label: HashMap<usize, usize> = HashMap::new();
    for (u, label) in labels.iter_mut().enumerate() {
        let root = find(&mut parent, u);
        let next = root_label.len();
        *label = *root_label.entry(root).or_insert(next);
    }
    let count = root_label.len();
    (labels, count)
}

/// Checks connectivity: a warning when `strict` is false, an error otherwise.
/// Returns the component count.
pub fn check_connected(graph: &Graph, strict: bool) -> Result<usize> {
    let (_, count) = connected_components(graph);
    if count > 1 {
        if strict {
            return Err(Error::Disconnected { components: count });
        }
        log::warn!("graph has {count} weakly connected components; clustering them jointly");
    }
    Ok(count)
}

/// Dense copy of the adjacency matrix.
pub fn dense_adjacency(graph: &Graph) -> Tensor {
    graph.adjacency().to_dense()
}
