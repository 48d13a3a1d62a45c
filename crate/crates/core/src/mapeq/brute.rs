use crate::error::{Error, Result};
use crate::flow::FlowModel;

use super::hard::expanded_total;
use super::{codelength_expanded_form, plogp, Codelength, Partition};

/// Largest graph the exhaustive search accepts by default (Bell(10) = 115975).
pub const DEFAULT_MAX_N: usize = 10;

const TIE_TOLERANCE: f64 = 1e-12;

/// Set partitions of `0..n` as restricted growth strings, in lexicographic
/// order: `a[0] = 0` and `a[i] ≤ 1 + max(a[..i])`.
#[derive(Debug, Clone)]
pub struct RestrictedGrowth {
    labels: Vec<usize>,
    /// `prefix_max[i] = max(a[..=i])`.
    prefix_max: Vec<usize>,
    started: bool,
    done: bool,
}

impl RestrictedGrowth {
    pub fn new(n: usize) -> Self {
        Self {
            labels: vec![0; n],
            prefix_max: vec![0; n],
            started: false,
            done: n == 0,
        }
    }

    fn advance(&mut self) -> bool {
        let n = self.labels.len();
        for i in (1..n).rev() {
            if self.labels[i] <= self.prefix_max[i - 1] {
                self.labels[i] += 1;
                self.prefix_max[i] = self.prefix_max[i - 1].max(self.labels[i]);
                for j in i + 1..n {
                    self.labels[j] = 0;
                    self.prefix_max[j] = self.prefix_max[i];
                }
                return true;
            }
        }
        false
    }

    /// Current string and its module count, without allocating.
    pub fn next_ref(&mut self) -> Option<(&[usize], usize)> {
        if self.done {
            return None;
        }
        if self.started && !self.advance() {
            self.done = true;
            return None;
        }
        self.started = true;
        let modules = self.prefix_max.last().map_or(0, |&m| m + 1);
        Some((&self.labels, modules))
    }
}

impl Iterator for RestrictedGrowth {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        self.next_ref().map(|(l, _)| l.to_vec())
    }
}

/// Exhaustive minimum of the expanded-form codelength over all set
/// partitions. Ties within `1e-12` bits go to fewer modules, then to the
/// lexicographically smaller label string.
pub fn brute_force_optimum(flow: &FlowModel, max_n: usize) -> Result<(Partition, Codelength)> {
    let n = flow.n();
    if n > max_n {
        return Err(Error::TooLarge { n, max: max_n });
    }
    let node_term = -flow.visit_rates().iter().map(|&p| plogp(p)).sum::<f64>();
    let mut best: Option<(f64, usize, Vec<usize>)> = None;
    let mut strings = RestrictedGrowth::new(n);
    while let Some((labels, modules)) = strings.next_ref() {
        let value = expanded_total(flow, labels, modules, node_term);
        let better = match &best {
            None => true,
            Some((b, m, _)) => {
                value < b - TIE_TOLERANCE || ((value - b).abs() <= TIE_TOLERANCE && modules < *m)
            }
        };
        if better {
            best = Some((value, modules, labels.to_vec()));
        }
    }
    let (_, _, labels) = best.ok_or(Error::EmptyGraph)?;
    let partition = Partition::new(labels)?;
    let codelength = codelength_expanded_form(flow, &partition)?;
    Ok((partition, codelength))
}
