//! Global PageRank over the undirected co-occurrence graph.
//!
//! Power iteration on the row-normalised (optionally weighted) adjacency
//! with uniform teleportation; dangling vertices spread their mass uniformly.
//! The score vector stays a probability distribution at every step.

use log::warn;

use crate::cooccur::CooccurrenceBag;
use crate::error::{Error, Result};
use crate::types::{sort_by_score_then_name, NameId, RankedList, Scored};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PRConfig {
    pub damping: f64,
    /// L1 change between iterates below which iteration stops.
    pub epsilon: f64,
    pub max_iter: usize,
    /// Use multiplicities as edge weights; otherwise every edge weighs 1.
    pub weighted: bool,
}

impl Default for PRConfig {
    fn default() -> Self {
        PRConfig {
            damping: 0.85,
            epsilon: 1e-10,
            max_iter: 200,
            weighted: true,
        }
    }
}

impl PRConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.damping > 0.0 && self.damping < 1.0) {
            return Err(Error::config(format!("damping {} is outside (0, 1)", self.damping)));
        }
        if self.epsilon.is_nan() || self.epsilon <= 0.0 {
            return Err(Error::config("epsilon must be positive"));
        }
        Ok(())
    }
}

/// Undirected weighted graph with vertices in ascending name order.
#[derive(Clone, Debug, PartialEq)]
pub struct Graph {
    vertices: Vec<NameId>,
    /// `adjacency[v]` lists `(neighbour index, weight)`, sorted by index.
    adjacency: Vec<Vec<(usize, f64)>>,
}

impl Graph {
    /// Builds a graph from undirected edges. Vertex order and adjacency order
    /// are canonical, so the result does not depend on edge order.
    pub fn from_edges(edges: impl IntoIterator<Item = (NameId, NameId, f64)>) -> Self {
        let edges: Vec<(NameId, NameId, f64)> = edges.into_iter().filter(|(a, b, _)| a != b).collect();
        let mut vertices: Vec<NameId> = edges.iter().flat_map(|&(a, b, _)| [a, b]).collect();
        vertices.sort_unstable();
        vertices.dedup();
        let index = |n: NameId| vertices.binary_search(&n).expect("vertex collected above");
        let mut adjacency = vec![Vec::new(); vertices.len()];
        for &(a, b, w) in &edges {
            let (ia, ib) = (index(a), index(b));
            adjacency[ia].push((ib, w));
            adjacency[ib].push((ia, w));
        }
        for list in &mut adjacency {
            list.sort_by(|x, y| x.0.cmp(&y.0).then(x.1.total_cmp(&y.1)));
        }
        Graph { vertices, adjacency }
    }

    /// Vertices are the names of the bag; edge weights are multiplicities.
    pub fn from_bag(bag: &CooccurrenceBag) -> Self {
        Graph::from_edges(bag.pairs().into_iter().map(|(i, j, m)| (i, j, f64::from(m))))
    }

    pub fn vertices(&self) -> &[NameId] {
        &self.vertices
    }

    pub fn neighbours(&self, v: usize) -> &[(usize, f64)] {
        &self.adjacency[v]
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PageRankResult {
    /// Scores aligned with [`Graph::vertices`].
    pub scores: Vec<f64>,
    pub ranking: RankedList,
    pub iterations: usize,
    pub converged: bool,
}

pub fn pagerank(model: &str, graph: &Graph, config: &PRConfig) -> Result<PageRankResult> {
    config.validate()?;
    if graph.is_empty() {
        return Err(Error::EmptyGraph);
    }
    let n = graph.len();
    let d = config.damping;
    let out_weight: Vec<f64> = (0..n)
        .map(|v| {
            graph
                .neighbours(v)
                .iter()
                .map(|&(_, w)| if config.weighted { w } else { 1.0 })
                .sum()
        })
        .collect();

    let mut x = vec![1.0 / n as f64; n];
    let mut next = vec![0.0; n];
    let mut iterations = 0;
    let mut converged = false;
    while iterations < config.max_iter {
        iterations += 1;
        let dangling: f64 = (0..n).filter(|&v| out_weight[v] == 0.0).map(|v| x[v]).sum();
        let base = (1.0 - d) / n as f64 + d * dangling / n as f64;
        next.fill(base);
        for v in 0..n {
            if out_weight[v] == 0.0 {
                continue;
            }
            let share = d * x[v] / out_weight[v];
            for &(u, w) in graph.neighbours(v) {
                next[u] += share * if config.weighted { w } else { 1.0 };
            }
        }
        // Renormalise so rounding cannot drift the total away from 1.
        let total: f64 = next.iter().sum();
        next.iter_mut().for_each(|s| *s /= total);
        let delta: f64 = x.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
        std::mem::swap(&mut x, &mut next);
        if delta < config.epsilon {
            converged = true;
            break;
        }
    }
    if !converged {
        warn!("PageRank did not converge within {} iterations", config.max_iter);
    }

    let mut items: Vec<Scored> = graph
        .vertices()
        .iter()
        .zip(&x)
        .map(|(&name, &score)| Scored { name, score })
        .collect();
    sort_by_score_then_name(&mut items, usize::MAX);
    Ok(PageRankResult {
        scores: x,
        ranking: RankedList::new(model, items),
        iterations,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_nodes_split_evenly() {
        let g = Graph::from_edges([(NameId(0), NameId(1), 2.0)]);
        let r = pagerank("m8", &g, &PRConfig::default()).unwrap();
        assert!((r.scores[0] - 0.5).abs() < 1e-12);
        assert!((r.scores[1] - 0.5).abs() < 1e-12);
        assert!(r.converged);
    }

    #[test]
    fn empty_graph_is_an_error() {
        let g = Graph::from_edges([]);
        assert!(matches!(
            pagerank("m8", &g, &PRConfig::default()),
            Err(Error::EmptyGraph)
        ));
    }

    #[test]
    fn single_edge_bag_graph() {
        let g = Graph::from_edges([(NameId(3), NameId(1), 2.0)]);
        assert_eq!(g.vertices(), &[NameId(1), NameId(3)]);
        assert_eq!(g.neighbours(0), &[(1, 2.0)]);
    }

    #[test]
    fn star_centre_ranks_first() {
        let g = Graph::from_edges((1..5).map(|i| (NameId(0), NameId(i), 1.0)));
        let r = pagerank("m8", &g, &PRConfig::default()).unwrap();
        assert_eq!(r.ranking.items[0].name, NameId(0));
        // Leaves tie and come out in name order.
        let rest: Vec<NameId> = r.ranking.names().skip(1).collect();
        assert_eq!(rest, (1..5).map(NameId).collect::<Vec<_>>());
    }

    #[test]
    fn non_convergence_is_flagged() {
        let g = Graph::from_edges([(NameId(0), NameId(1), 1.0), (NameId(1), NameId(2), 1.0)]);
        let config = PRConfig {
            max_iter: 1,
            epsilon: 1e-300,
            ..PRConfig::default()
        };
        let r = pagerank("m8", &g, &config).unwrap();
        assert!(!r.converged);
        assert!((r.scores.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bad_damping_is_rejected() {
        let g = Graph::from_edges([(NameId(0), NameId(1), 1.0)]);
        let config = PRConfig {
            damping: 1.0,
            ..PRConfig::default()
        };
        assert!(pagerank("m8", &g, &config).is_err());
    }
}
