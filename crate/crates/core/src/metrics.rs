//! Partition comparison and summary statistics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::mapeq::{Partition, SoftAssignment};

/// Cross-tabulation of two labelings over the same nodes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContingencyTable {
    rows: usize,
    cols: usize,
    counts: Vec<u64>,
    row_marginals: Vec<u64>,
    col_marginals: Vec<u64>,
    n: u64,
}

impl ContingencyTable {
    pub fn new(a: &Partition, b: &Partition) -> Result<Self> {
        if a.n() != b.n() {
            return Err(Error::InvalidPartition(format!(
                "cannot compare partitions of {} and {} nodes",
                a.n(),
                b.n()
            )));
        }
        let (rows, cols) = (a.module_count(), b.module_count());
        let mut counts = vec![0u64; rows * cols];
        let mut row_marginals = vec![0u64; rows];
        let mut col_marginals = vec![0u64; cols];
        for (&i, &j) in a.labels().iter().zip(b.labels()) {
            counts[i * cols + j] += 1;
            row_marginals[i] += 1;
            col_marginals[j] += 1;
        }
        Ok(Self {
            rows,
            cols,
            counts,
            row_marginals,
            col_marginals,
            n: a.n() as u64,
        })
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn count(&self, i: usize, j: usize) -> u64 {
        self.counts[i * self.cols + j]
    }

    pub fn row_marginals(&self) -> &[u64] {
        &self.row_marginals
    }

    pub fn col_marginals(&self) -> &[u64] {
        &self.col_marginals
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    /// True when every row and every column holds exactly one nonzero cell,
    /// i.e. the labelings agree up to renaming.
    pub fn is_permutation(&self) -> bool {
        self.rows == self.cols
            && (0..self.rows).all(|i| (0..self.cols).filter(|&j| self.count(i, j) > 0).count() == 1)
            && (0..self.cols).all(|j| (0..self.rows).filter(|&i| self.count(i, j) > 0).count() == 1)
    }

    /// Mutual information in nats.
    pub fn mutual_information(&self) -> f64 {
        let n = self.n as f64;
        let mut mi = 0.0;
        for i in 0..self.rows {
            for j in 0..self.cols {
                let c = self.count(i, j);
                if c > 0 {
                    let c = c as f64;
                    let outer = self.row_marginals[i] as f64 * self.col_marginals[j] as f64;
                    mi += c / n * (n * c / outer).ln();
                }
            }
        }
        mi.max(0.0)
    }

    /// Expected mutual information under the hypergeometric model of random
    /// labelings with these marginals, in nats.
    pub fn expected_mutual_information(&self) -> f64 {
        let n = self.n;
        let nf = n as f64;
        let lnf = ln_factorials(n as usize);
        let lf = |k: u64| lnf[k as usize];
        let mut emi = 0.0;
        for &a in &self.row_marginals {
            for &b in &self.col_marginals {
                let lo = (a + b).saturating_sub(n).max(1);
                let hi = a.min(b);
                let fixed = lf(a) + lf(b) + lf(n - a) + lf(n - b) - lf(n);
                for k in lo..=hi {
                    let kf = k as f64;
                    let log_p = fixed - lf(k) - lf(a - k) - lf(b - k) - lf(n + k - a - b);
                    emi += kf / nf * (nf * kf / (a as f64 * b as f64)).ln() * log_p.exp();
                }
            }
        }
        emi
    }
}

fn ln_factorials(n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    let mut acc = 0.0;
    out.push(0.0);
    for k in 1..=n {
        acc += (k as f64).ln();
        out.push(acc);
    }
    out
}

/// Entropy in nats of a labeling given its cluster sizes.
pub fn entropy(sizes: &[u64]) -> f64 {
    let n: u64 = sizes.iter().sum();
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    -sizes
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            p * p.ln()
        })
        .sum::<f64>()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AmiNormalization {
    #[default]
    Arithmetic,
    Max,
}

/// Adjusted mutual information with arithmetic-mean normalisation.
pub fn ami(pred: &Partition, truth: &Partition) -> Result<f64> {
    ami_with(pred, truth, AmiNormalization::Arithmetic)
}

pub fn ami_with(pred: &Partition, truth: &Partition, norm: AmiNormalization) -> Result<f64> {
    let table = ContingencyTable::new(pred, truth)?;
    if table.is_permutation() {
        return Ok(1.0);
    }
    let mi = table.mutual_information();
    let emi = table.expected_mutual_information();
    let (h1, h2) = (entropy(table.row_marginals()), entropy(table.col_marginals()));
    let normalizer = match norm {
        AmiNormalization::Arithmetic => 0.5 * (h1 + h2),
        AmiNormalization::Max => h1.max(h2),
    };
    let mut denom = normalizer - emi;
    denom = if denom < 0.0 {
        denom.min(-f64::EPSILON)
    } else {
        denom.max(f64::EPSILON)
    };
    Ok((mi - emi) / denom)
}

pub fn count_modules(partition: &Partition) -> usize {
    partition.module_count()
}

/// Columns whose largest membership reaches `threshold`, or, without a
/// threshold, columns that are some node's argmax.
pub fn count_modules_soft(s: &SoftAssignment, threshold: Option<f64>) -> usize {
    let t = s.tensor();
    match threshold {
        Some(th) => (0..t.cols())
            .filter(|&k| (0..t.rows()).any(|i| t[(i, k)] >= th))
            .count(),
        None => {
            let mut used = vec![false; t.cols()];
            for i in 0..t.rows() {
                used[t.row_argmax(i)] = true;
            }
            used.iter().filter(|&&u| u).count()
        }
    }
}

/// Fraction of link weight running between modules.
pub fn mixing(graph: &Graph, partition: &Partition) -> Result<f64> {
    if partition.n() != graph.n() {
        return Err(Error::InvalidPartition(format!(
            "partition covers {} nodes, graph has {}",
            partition.n(),
            graph.n()
        )));
    }
    let between: f64 = graph
        .adjacency()
        .iter()
        .filter(|&(u, v, _)| partition.label(u) != partition.label(v))
        .map(|(_, _, w)| w)
        .sum();
    Ok(between / graph.total_weight())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators;
    use crate::tensor::Tensor;

    fn part(labels: &[usize]) -> Partition {
        Partition::from_labels(labels)
    }

    #[test]
    fn identical_and_relabelled() {
        let a = part(&[0, 0, 1, 1, 2, 2, 2]);
        assert_eq!(ami(&a, &a).unwrap(), 1.0);
        let b = part(&[5, 5, 3, 3, 9, 9, 9]);
        assert_eq!(ami(&a, &b).unwrap(), 1.0);
    }

    #[test]
    fn single_cluster_scores_zero() {
        let one = part(&[0; 6]);
        let truth = part(&[0, 0, 0, 1, 1, 1]);
        assert_eq!(ami(&one, &truth).unwrap(), 0.0);
        assert_eq!(ami(&truth, &one).unwrap(), 0.0);
    }

    #[test]
    fn reference_value() {
        // Only the two cells of size 2 carry information: MI = 2 · (1/3) ln 2.
        let a = part(&[0, 0, 0, 1, 1, 1]);
        let b = part(&[0, 0, 1, 1, 2, 2]);
        let t = ContingencyTable::new(&a, &b).unwrap();
        let mi = 2.0 / 3.0 * 2f64.ln();
        assert!((t.mutual_information() - mi).abs() < 1e-15);
        let v = ami(&a, &b).unwrap();
        assert!((v - ami(&b, &a).unwrap()).abs() < 1e-12);
        assert!(v > 0.0 && v < 1.0);
    }

    #[test]
    fn length_mismatch() {
        assert!(ami(&part(&[0, 1]), &part(&[0, 1, 1])).is_err());
    }

    #[test]
    fn module_counts() {
        assert_eq!(count_modules(&part(&[0, 0, 1, 1])), 2);
        let s = SoftAssignment::new(Tensor::from_rows(&[
            vec![1.0, 0.0, 0.0, 0.0],
            vec![0.0, 0.0, 1.0, 0.0],
            vec![0.0, 0.0, 0.0, 1.0],
        ]))
        .unwrap();
        assert_eq!(count_modules_soft(&s, None), 3);
        let uniform = SoftAssignment::new(Tensor::filled(4, 3, 1.0 / 3.0)).unwrap();
        assert_eq!(count_modules_soft(&uniform, None), 1);
        assert_eq!(count_modules_soft(&uniform, Some(0.3)), 3);
    }

    #[test]
    fn mixing_values() {
        let (g, truth) = generators::barbell();
        assert!((mixing(&g, &truth).unwrap() - 1.0 / 7.0).abs() < 1e-15);
        assert_eq!(mixing(&g, &Partition::one_module(6)).unwrap(), 0.0);
        assert_eq!(mixing(&g, &Partition::singletons(6)).unwrap(), 1.0);
    }
}
