use std::collections::HashMap;
use std::fs::File;
use std::hash::Hash;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;

/// Hard assignment of every node to one module, labels dense in
/// `0..module_count`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Partition {
    labels: Vec<usize>,
    module_count: usize,
}

impl Partition {
    /// Validates that `labels` are dense: every id below the maximum is used.
    pub fn new(labels: Vec<usize>) -> Result<Self> {
        let module_count = labels.iter().max().map_or(0, |&m| m + 1);
        let mut used = vec![false; module_count];
        for &l in &labels {
            used[l] = true;
        }
        if let Some(missing) = used.iter().position(|&u| !u) {
            return Err(Error::InvalidPartition(format!(
                "labels are not dense, module {missing} is empty"
            )));
        }
        Ok(Self {
            labels,
            module_count,
        })
    }

    /// Densifies arbitrary labels in first-seen order.
    pub fn from_labels<T: Eq + Hash + Clone>(labels: &[T]) -> Self {
        let mut map: HashMap<T, usize> = HashMap::new();
        let dense = labels
            .iter()
            .map(|l| {
                let next = map.len();
                *map.entry(l.clone()).or_insert(next)
            })
            .collect();
        Self {
            labels: dense,
            module_count: map.len(),
        }
    }

    pub fn one_module(n: usize) -> Self {
        Self {
            labels: vec![0; n],
            module_count: usize::from(n > 0),
        }
    }

    pub fn singletons(n: usize) -> Self {
        Self {
            labels: (0..n).collect(),
            module_count: n,
        }
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn module_count(&self) -> usize {
        self.module_count
    }

    pub fn label(&self, node: usize) -> usize {
        self.labels[node]
    }

    /// Node indices of module `m`, ascending.
    pub fn members(&self, m: usize) -> Vec<usize> {
        (0..self.n()).filter(|&u| self.labels[u] == m).collect()
    }

    /// Applies a module permutation: node `u` moves to `perm[label(u)]`.
    pub fn relabel(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.module_count {
            return Err(Error::InvalidPartition("permutation length".into()));
        }
        Self::new(self.labels.iter().map(|&l| perm[l]).collect())
    }

    pub(crate) fn check_len(&self, n: usize) -> Result<()> {
        if self.n() != n {
            return Err(Error::InvalidPartition(format!(
                "partition covers {} nodes, flow model has {n}",
                self.n()
            )));
        }
        Ok(())
    }
}

impl TryFrom<Vec<usize>> for Partition {
    type Error = Error;

    fn try_from(labels: Vec<usize>) -> Result<Self> {
        Self::new(labels)
    }
}

impl From<Partition> for Vec<usize> {
    fn from(p: Partition) -> Self {
        p.labels
    }
}

/// Reads `id label` lines, in file order.
pub fn read_labels(path: impl AsRef<Path>) -> Result<Vec<(String, String)>> {
    let path = path.as_ref();
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        if fields.len() != 2 {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: lineno + 1,
                message: "expected `id label`".into(),
            });
        }
        out.push((fields[0].to_string(), fields[1].to_string()));
    }
    Ok(out)
}

/// Loads a partition file aligned to `graph`'s node order. Every node must be
/// labelled exactly once.
pub fn load_partition(path: impl AsRef<Path>, graph: &Graph) -> Result<Partition> {
    let entries = read_labels(path)?;
    let mut labels: Vec<Option<String>> = vec![None; graph.n()];
    for (id, label) in entries {
        let u = graph
            .node_index(&id)
            .ok_or_else(|| Error::UnknownNode(id.clone()))?;
        if labels[u].replace(label).is_some() {
            return Err(Error::InvalidPartition(format!("node `{id}` labelled twice")));
        }
    }
    let labels = labels
        .into_iter()
        .enumerate()
        .map(|(u, l)| {
            l.ok_or_else(|| {
                Error::InvalidPartition(format!("node `{}` has no label", graph.node_ids()[u]))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Partition::from_labels(&labels))
}

pub fn write_partition<W: Write>(graph: &Graph, partition: &Partition, mut out: W) -> Result<()> {
    partition.check_len(graph.n())?;
    for (id, label) in graph.node_ids().iter().zip(partition.labels()) {
        writeln!(out, "{id} {label}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dense_validation() {
        assert!(Partition::new(vec![0, 1, 1, 0]).is_ok());
        assert!(Partition::new(vec![0, 2, 2]).is_err());
        assert_eq!(Partition::new(vec![]).unwrap().module_count(), 0);
    }

    #[test]
    fn first_seen_densification() {
        let p = Partition::from_labels(&["b", "a", "b", "c"]);
        assert_eq!(p.labels(), &[0, 1, 0, 2]);
        assert_eq!(p.module_count(), 3);
    }

    #[test]
    fn relabel_and_members() {
        let p = Partition::new(vec![0, 1, 1, 2]).unwrap();
        let q = p.relabel(&[2, 0, 1]).unwrap();
        assert_eq!(q.labels(), &[2, 0, 0, 1]);
        assert_eq!(q.members(0), vec![1, 2]);
    }

    #[test]
    fn serde_round_trip_validates() {
        let p = Partition::new(vec![0, 1, 0]).unwrap();
        let json = serde_json::to_string(&p).unwrap();
        assert_eq!(json, "[0,1,0]");
        assert_eq!(serde_json::from_str::<Partition>(&json).unwrap(), p);
        assert!(serde_json::from_str::<Partition>("[0,2]").is_err());
    }

    #[test]
    fn partition_files() {
        let g = Graph::from_indexed(
            vec!["x".into(), "y".into(), "z".into()],
            false,
            [(0, 1, 1.0), (1, 2, 1.0)],
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("part.txt");
        std::fs::write(&path, "z 7\nx 3\ny 3\n").unwrap();
        let p = load_partition(&path, &g).unwrap();
        assert_eq!(p.labels(), &[0, 0, 1]);

        std::fs::write(&path, "z 7\nx 3\n").unwrap();
        assert!(load_partition(&path, &g).is_err());
        std::fs::write(&path, "z 7\nx 3\nq 1\n").unwrap();
        assert!(matches!(load_partition(&path, &g), Err(Error::UnknownNode(_))));

        let mut buf = Vec::new();
        write_partition(&g, &Partition::new(vec![0, 0, 1]).unwrap(), &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "x 0\ny 0\nz 1\n");
    }
}
