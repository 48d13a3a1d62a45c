//! Small deterministic graphs with known structure.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::{connected_components, Graph};
use crate::mapeq::Partition;

/// Attempts before [`generate_planted`] gives up on connectivity.
pub const MAX_GENERATION_ATTEMPTS: usize = 100;

fn unit(n: usize, directed: bool, edges: &[(usize, usize)]) -> Graph {
    Graph::from_links(n, directed, edges.iter().map(|&(u, v)| (u, v, 1.0)))
        .expect("static edge list is valid")
}

/// Two triangles `{0,1,2}` and `{3,4,5}` joined by the edge `(2, 3)`, with the
/// two-triangle partition.
pub fn barbell() -> (Graph, Partition) {
    let g = unit(6, false, &[(0, 1), (0, 2), (1, 2), (3, 4), (3, 5), (4, 5), (2, 3)]);
    let truth = Partition::new(vec![0, 0, 0, 1, 1, 1]).expect("dense labels");
    (g, truth)
}

/// Undirected complete graph without self-loops.
pub fn complete(n: usize) -> Graph {
    let edges: Vec<_> = (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v))).collect();
    unit(n, false, &edges)
}

pub fn path(n: usize) -> Graph {
    let edges: Vec<_> = (1..n).map(|v| (v - 1, v)).collect();
    unit(n, false, &edges)
}

pub fn cycle(n: usize) -> Graph {
    let edges: Vec<_> = (0..n).map(|v| (v, (v + 1) % n)).collect();
    unit(n, false, &edges)
}

/// Triangles `{0,1,2}` and `{4,5,6}` with a bridge node 3 linked to 1, 2, 4
/// and 5; the bridge belongs equally to both groups.
pub fn overlapping_triangles() -> Graph {
    unit(
        7,
        false,
        &[
            (0, 1),
            (0, 2),
            (1, 2),
            (4, 5),
            (4, 6),
            (5, 6),
            (1, 3),
            (2, 3),
            (3, 4),
            (3, 5),
        ],
    )
}

/// Random graph where every ordered (directed) or unordered pair is linked
/// with probability `density`, weights uniform in `[0.1, 2)` when `weighted`.
/// Isolated nodes may occur. At least one link is always present.
pub fn random_graph(n: usize, density: f64, directed: bool, weighted: bool, rng: &mut impl Rng) -> Graph {
    let mut links = Vec::new();
    for u in 0..n {
        for v in 0..n {
            if u == v || (!directed && v < u) {
                continue;
            }
            if rng.random_bool(density) {
                let w = if weighted { rng.random_range(0.1..2.0) } else { 1.0 };
                links.push((u, v, w));
            }
        }
    }
    if links.is_empty() {
        links.push((0, 1 % n.max(1), 1.0));
    }
    Graph::from_links(n, directed, links).expect("generated links are valid")
}

/// Planted-partition graph: `blocks` groups of `size` nodes, each pair linked
/// with probability `p_in` inside a group and `p_out` across. Resamples from
/// the same stream until connected.
pub fn generate_planted(
    blocks: usize,
    size: usize,
    p_in: f64,
    p_out: f64,
    seed: u64,
) -> Result<(Graph, Partition)> {
    for (name, p) in [("p_in", p_in), ("p_out", p_out)] {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidConfig(format!("{name} = {p} is not a probability")));
        }
    }
    if blocks == 0 || size == 0 {
        return Err(Error::InvalidConfig("planted partition needs nodes".into()));
    }
    let n = blocks * size;
    let truth = Partition::new((0..n).map(|u| u / size).collect())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..MAX_GENERATION_ATTEMPTS {
        let mut links = Vec::new();
        for u in 0..n {
            for v in u + 1..n {
                let p = if u / size == v / size { p_in } else { p_out };
                if rng.random_bool(p) {
                    links.push((u, v, 1.0));
                }
            }
        }
        let Ok(g) = Graph::from_links(n, false, links) else {
            continue;
        };
        if connected_components(&g).1 == 1 {
            return Ok((g, truth));
        }
    }
    Err(Error::GenerationFailed(MAX_GENERATION_ATTEMPTS))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::mixing;

    #[test]
    fn planted_is_deterministic() {
        let (a, ta) = generate_planted(2, 30, 0.3, 0.01, 42).unwrap();
        let (b, tb) = generate_planted(2, 30, 0.3, 0.01, 42).unwrap();
        assert_eq!(a.links().collect::<Vec<_>>(), b.links().collect::<Vec<_>>());
        assert_eq!(ta, tb);
        let (c, _) = generate_planted(2, 30, 0.3, 0.01, 43).unwrap();
        assert_ne!(a.links().collect::<Vec<_>>(), c.links().collect::<Vec<_>>());
    }

    #[test]
    fn disconnected_blocks_are_rejected() {
        assert!(matches!(
            generate_planted(2, 5, 1.0, 0.0, 1),
            Err(Error::GenerationFailed(100))
        ));
        assert!(generate_planted(2, 5, 1.5, 0.0, 1).is_err());
    }

    #[test]
    fn full_probabilities_give_complete_graph() {
        let (g, truth) = generate_planted(2, 3, 1.0, 1.0, 0).unwrap();
        assert_eq!(g.arc_count(), 30);
        // 9 of the 15 edges run between the blocks.
        assert!((mixing(&g, &truth).unwrap() - 9.0 / 15.0).abs() < 1e-15);
    }

    #[test]
    fn fixed_graphs() {
        let (g, t) = barbell();
        assert_eq!((g.n(), g.arc_count(), t.module_count()), (6, 14, 2));
        assert_eq!(complete(4).arc_count(), 12);
        assert_eq!(overlapping_triangles().arc_count(), 20);
        assert_eq!(connected_components(&path(5)).1, 1);
        assert_eq!(cycle(4).arc_count(), 8);
    }
}
