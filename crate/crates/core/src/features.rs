//! Node feature matrices aligned to a graph's dense node indices.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    values: Tensor,
}

impl FeatureMatrix {
    pub fn new(graph: &Graph, values: Tensor) -> Result<Self> {
        if values.rows() != graph.n() {
            return Err(Error::DimensionMismatch(format!(
                "{} feature rows for {} nodes",
                values.rows(),
                graph.n()
            )));
        }
        if values.cols() == 0 {
            return Err(Error::NoFeatures);
        }
        if !values.is_finite() {
            return Err(Error::NonFinite("feature matrix".into()));
        }
        Ok(Self { values })
    }

    pub fn rows(&self) -> usize {
        self.values.rows()
    }

    pub fn cols(&self) -> usize {
        self.values.cols()
    }

    pub fn values(&self) -> &Tensor {
        &self.values
    }
}

/// Uses the adjacency matrix itself as node features, `X = A`.
pub fn identity_features(graph: &Graph) -> FeatureMatrix {
    FeatureMatrix {
        values: graph.adjacency().to_dense(),
    }
}

/// Loads features either as CSV with an `id,f0,f1,...` header (every node must
/// have exactly one row) or as `id col value` triplets (absent entries are 0).
pub fn load_features(path: impl AsRef<Path>, graph: &Graph) -> Result<FeatureMatrix> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    parse_features(&text, path, graph)
}

pub fn parse_features(text: &str, path: &Path, graph: &Graph) -> Result<FeatureMatrix> {
    let first = text
        .lines()
        .map(str::trim)
        .find(|l| !l.is_empty() && !l.starts_with('#'));
    match first {
        None => Err(Error::NoFeatures),
        Some(line) if line.starts_with("id,") || line == "id" => parse_csv(text, graph),
        Some(_) => parse_triplets(text, path, graph),
    }
}

fn parse_csv(text: &str, graph: &Graph) -> Result<FeatureMatrix> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let width = reader.headers()?.len().saturating_sub(1);
    if width == 0 {
        return Err(Error::NoFeatures);
    }
    let n = graph.n();
    let mut values = Tensor::zeros(n, width);
    let mut seen = vec![false; n];
    let mut count = 0;
    for record in reader.records() {
        let record = record?;
        let id = &record[0];
        let row = graph
            .node_index(id)
            .ok_or_else(|| Error::UnknownNode(id.to_string()))?;
        if record.len() - 1 != width {
            return Err(Error::DimensionMismatch(format!(
                "row for `{id}` has {} values, header declares {width}",
                record.len() - 1
            )));
        }
        if seen[row] {
            return Err(Error::InvalidConfig(format!("duplicate feature row for `{id}`")));
        }
        seen[row] = true;
        count += 1;
        for (j, raw) in record.iter().skip(1).enumerate() {
            let v: f64 = raw
                .parse()
                .map_err(|_| Error::InvalidConfig(format!("invalid feature value `{raw}`")))?;
            if !v.is_finite() {
                return Err(Error::NonFinite(format!("feature of `{id}`")));
            }
            values[(row, j)] = v;
        }
    }
    if count == 0 {
        return Err(Error::NoFeatures);
    }
    if count != n {
        return Err(Error::DimensionMismatch(format!("{count} feature rows for {n} nodes")));
    }
    FeatureMatrix::new(graph, values)
}

fn parse_triplets(text: &str, path: &Path, graph: &Graph) -> Result<FeatureMatrix> {
    let mut entries = Vec::new();
    let mut width = 0;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let parse_err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: lineno + 1,
            message,
        };
        if fields.len() != 3 {
            return Err(parse_err("expected `id col value`".into()));
        }
        let row = graph
            .node_index(fields[0])
            .ok_or_else(|| Error::UnknownNode(fields[0].to_string()))?;
        let col: usize = fields[1]
            .parse()
            .map_err(|_| parse_err(format!("invalid column `{}`", fields[1])))?;
        let value: f64 = fields[2]
            .parse()
            .map_err(|_| parse_err(format!("invalid value `{}`", fields[2])))?;
        if !value.is_finite() {
            return Err(Error::NonFinite(format!("feature of `{}`", fields[0])));
        }
        width = width.max(col + 1);
        entries.push((row, col, value));
    }
    if entries.is_empty() {
        return Err(Error::NoFeatures);
    }
    let mut values = Tensor::zeros(graph.n(), width);
    for (r, c, v) in entries {
        values[(r, c)] += v;
    }
    FeatureMatrix::new(graph, values)
}
