use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::classify::PredictionList;
use crate::error::{Error, Result};

/// Node probabilities for one layer, keyed by candidate key.
pub type NodeProbabilities = BTreeMap<char, f64>;
/// Likelihood of the digram `(u, v)` across one layer transition.
pub type DigramLikelihoods = BTreeMap<(char, char), f64>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    /// Node index in the source layer.
    pub from: usize,
    /// Node index in the target layer.
    pub to: usize,
    pub weight: f64,
}

/// One layer of candidate keys per password position, with a virtual start
/// before the first layer and a virtual end after the last.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayeredGraph {
    layers: Vec<Vec<char>>,
    start_weights: Vec<f64>,
    /// `edges[k]` joins layer `k` to layer `k + 1`.
    edges: Vec<Vec<Edge>>,
    end_weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Path {
    pub keys: String,
    pub weight: f64,
}

/// Edge `u@k → v@k+1` weighs `p(v at k+1) + L(uv at k)`; start edges weigh
/// `p(v at 0)` and end edges 0. Missing probabilities count as 0.
pub fn build_graph(
    candidates: &[Vec<char>],
    node_probabilities: &[NodeProbabilities],
    digram_likelihoods: &[DigramLikelihoods],
) -> Result<LayeredGraph> {
    let n = candidates.len();
    if n == 0 {
        return Err(Error::invalid("graph needs at least one layer"));
    }
    if node_probabilities.len() != n {
        return Err(Error::invalid(format!(
            "{} probability tables for {n} layers",
            node_probabilities.len()
        )));
    }
    if digram_likelihoods.len() > n - 1 {
        return Err(Error::invalid(format!(
            "{} digram tables for {} transitions",
            digram_likelihoods.len(),
            n - 1
        )));
    }
    let layers: Vec<Vec<char>> = candidates
        .iter()
        .map(|layer| {
            let mut keys = layer.clone();
            keys.sort_unstable();
            keys.dedup();
            keys
        })
        .collect();
    if let Some(k) = layers.iter().position(Vec::is_empty) {
        return Err(Error::invalid(format!("layer {k} has no candidates")));
    }
    let finite = node_probabilities
        .iter()
        .flat_map(|t| t.values())
        .chain(digram_likelihoods.iter().flat_map(|t| t.values()))
        .all(|w| w.is_finite());
    if !finite {
        return Err(Error::invalid("weights must be finite"));
    }

    let prob = |layer: usize, key: char| node_probabilities[layer].get(&key).copied().unwrap_or(0.0);
    let start_weights = layers[0].iter().map(|&v| prob(0, v)).collect();
    let edges = (0..n - 1)
        .map(|k| {
            let mut out = Vec::with_capacity(layers[k].len() * layers[k + 1].len());
            for (from, &u) in layers[k].iter().enumerate() {
                for (to, &v) in layers[k + 1].iter().enumerate() {
                    let likelihood = digram_likelihoods
                        .get(k)
                        .and_then(|t| t.get(&(u, v)))
                        .copied()
                        .unwrap_or(0.0);
                    out.push(Edge {
                        from,
                        to,
                        weight: prob(k + 1, v) + likelihood,
                    });
                }
            }
            out
        })
        .collect();
    let end_weights = vec![0.0; layers[n - 1].len()];
    Ok(LayeredGraph {
        layers,
        start_weights,
        edges,
        end_weights,
    })
}

/// Node probabilities taken from classifier output, one table per keystroke.
pub fn node_probabilities(predictions: &[PredictionList]) -> Vec<NodeProbabilities> {
    predictions
        .iter()
        .map(|list| list.entries().iter().map(|e| (e.key, e.probability)).collect())
        .collect()
}

impl LayeredGraph {
    pub fn layers(&self) -> &[Vec<char>] {
        &self.layers
    }

    pub fn start_weights(&self) -> &[f64] {
        &self.start_weights
    }

    pub fn edges(&self, transition: usize) -> &[Edge] {
        &self.edges[transition]
    }

    pub fn end_weights(&self) -> &[f64] {
        &self.end_weights
    }

    /// Weight of the edge `u@k → v@k+1`, if present.
    pub fn edge_weight(&self, k: usize, u: char, v: char) -> Option<f64> {
        let from = self.layers[k].binary_search(&u).ok()?;
        let to = self.layers[k + 1].binary_search(&v).ok()?;
        self.edges[k]
            .iter()
            .find(|e| e.from == from && e.to == to)
            .map(|e| e.weight)
    }
}

// Higher weight first, then lexicographically smaller.
fn path_order(a: &Path, b: &Path) -> Ordering {
    b.weight.total_cmp(&a.weight).then_with(|| a.keys.cmp(&b.keys))
}

/// The `k` heaviest start-to-end paths.
///
/// Layered dynamic programming: each node keeps its best `k` prefixes, since
/// any path in the global top `k` has a prefix in its node's top `k`.
pub fn k_best_paths(graph: &LayeredGraph, k: usize) -> Result<Vec<Path>> {
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    let mut best: Vec<Vec<Path>> = graph.layers[0]
        .iter()
        .zip(&graph.start_weights)
        .map(|(&v, &w)| {
            vec![Path {
                keys: v.to_string(),
                weight: w,
            }]
        })
        .collect();
    for (t, edges) in graph.edges.iter().enumerate() {
        let target = &graph.layers[t + 1];
        let mut next: Vec<Vec<Path>> = vec![Vec::new(); target.len()];
        for e in edges {
            let v = target[e.to];
            for p in &best[e.from] {
                let mut keys = p.keys.clone();
                keys.push(v);
                next[e.to].push(Path {
                    keys,
                    weight: p.weight + e.weight,
                });
            }
        }
        for paths in &mut next {
            paths.sort_by(path_order);
            paths.truncate(k);
        }
        best = next;
    }
    let mut done: Vec<Path> = best
        .into_iter()
        .zip(&graph.end_weights)
        .flat_map(|(paths, &w)| {
            paths.into_iter().map(move |p| Path {
                weight: p.weight + w,
                keys: p.keys,
            })
        })
        .collect();
    done.sort_by(path_order);
    done.truncate(k);
    Ok(done)
}

/// Drops `u → u` edges across transitions whose observed gap exceeds
/// `threshold`; a repeated key is typed faster than that. Transitions without
/// a timing are left alone.
pub fn prune_repeat_edges(graph: &LayeredGraph, timings: &[f64], threshold: f64) -> LayeredGraph {
    let mut pruned = graph.clone();
    for (k, edges) in pruned.edges.iter_mut().enumerate() {
        let Some(&dt) = timings.get(k) else { continue };
        if dt <= threshold {
            continue;
        }
        let (from, to) = (&graph.layers[k], &graph.layers[k + 1]);
        edges.retain(|e| from[e.from] != to[e.to]);
    }
    pruned
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn table(pairs: &[(char, f64)]) -> NodeProbabilities {
        pairs.iter().copied().collect()
    }

    // Three keystrokes over {a, b, c} with the digram likelihoods of the
    // worked example.
    fn example() -> LayeredGraph {
        let layers = vec![vec!['a', 'b', 'c']; 3];
        let probs = vec![
            table(&[('a', 0.7), ('b', 0.2), ('c', 0.1)]),
            table(&[('a', 0.4), ('b', 0.5), ('c', 0.1)]),
            table(&[('a', 0.8), ('b', 0.1), ('c', 0.1)]),
        ];
        let digrams = vec![
            [(('a', 'b'), 0.8), (('b', 'a'), 0.1)].into_iter().collect(),
            [(('a', 'b'), 0.2), (('b', 'a'), 0.7)].into_iter().collect(),
        ];
        build_graph(&layers, &probs, &digrams).unwrap()
    }

    // Oracle: walk every path, summing in the same order as the DP.
    fn all_paths(graph: &LayeredGraph) -> Vec<Path> {
        fn walk(g: &LayeredGraph, layer: usize, node: usize, keys: String, weight: f64, out: &mut Vec<Path>) {
            if layer + 1 == g.layers.len() {
                out.push(Path {
                    keys,
                    weight: weight + g.end_weights[node],
                });
                return;
            }
            for e in g.edges[layer].iter().filter(|e| e.from == node) {
                let mut next = keys.clone();
                next.push(g.layers[layer + 1][e.to]);
                walk(g, layer + 1, e.to, next, weight + e.weight, out);
            }
        }
        let mut out = Vec::new();
        for (i, &v) in graph.layers[0].iter().enumerate() {
            walk(graph, 0, i, v.to_string(), graph.start_weights[i], &mut out);
        }
        out.sort_by(path_order);
        out
    }

    #[test]
    fn example_edge_labels() {
        let g = example();
        assert!((g.edge_weight(0, 'a', 'b').unwrap() - 1.3).abs() < 1e-12);
        assert!((g.edge_weight(1, 'b', 'a').unwrap() - 1.5).abs() < 1e-12);
        assert_eq!(g.start_weights(), &[0.7, 0.2, 0.1]);
        assert!(g.end_weights().iter().all(|&w| w == 0.0));
    }

    #[test]
    fn example_best_path() {
        let best = k_best_paths(&example(), 1).unwrap();
        assert_eq!(best[0].keys, "aba");
        assert!((best[0].weight - 3.5).abs() < 1e-9);
    }

    #[test]
    fn k_beyond_path_count_returns_all() {
        let g = example();
        let all = k_best_paths(&g, 100).unwrap();
        assert_eq!(all.len(), 27);
        assert_eq!(all, all_paths(&g));
        assert!(k_best_paths(&g, 0).is_err());
    }

    #[test]
    fn zero_likelihoods_leave_node_probabilities() {
        let layers = vec![vec!['x', 'y']; 2];
        let probs = vec![table(&[('x', 0.6), ('y', 0.4)]), table(&[('x', 0.3)])];
        let g = build_graph(&layers, &probs, &[]).unwrap();
        assert_eq!(g.edge_weight(0, 'y', 'x'), Some(0.3));
        assert_eq!(g.edge_weight(0, 'x', 'y'), Some(0.0));
    }

    #[test]
    fn single_layer() {
        let g = build_graph(&[vec!['q', 'p']], &[table(&[('p', 0.25), ('q', 0.75)])], &[]).unwrap();
        let paths = k_best_paths(&g, 5).unwrap();
        assert_eq!(paths.len(), 2);
        assert_eq!((paths[0].keys.as_str(), paths[0].weight), ("q", 0.75));
        assert_eq!((paths[1].keys.as_str(), paths[1].weight), ("p", 0.25));
    }

    #[test]
    fn construction_errors() {
        assert!(build_graph(&[], &[], &[]).is_err());
        assert!(build_graph(&[vec!['a'], vec![]], &[table(&[]), table(&[])], &[]).is_err());
        assert!(build_graph(&[vec!['a']], &[], &[]).is_err());
        assert!(build_graph(&[vec!['a']], &[table(&[('a', f64::NAN)])], &[]).is_err());
    }

    #[test]
    fn pruning_by_gap() {
        let g = example();
        let slow = prune_repeat_edges(&g, &[0.4, 0.1], 0.15);
        for key in ['a', 'b', 'c'] {
            assert_eq!(slow.edge_weight(0, key, key), None);
            assert!(slow.edge_weight(1, key, key).is_some());
        }
        assert_eq!(slow.edges(0).len(), 6);
        assert_eq!(slow.edge_weight(0, 'a', 'b'), g.edge_weight(0, 'a', 'b'));
        assert_eq!(prune_repeat_edges(&g, &[0.1, 0.1], 0.15), g);
    }

    fn random_graph() -> impl Strategy<Value = LayeredGraph> {
        (1usize..=5, 1usize..=4).prop_flat_map(|(n, m)| {
            let keys: Vec<char> = "abcd".chars().take(m).collect();
            let layer = prop::sample::subsequence(keys.clone(), 1..=m);
            (
                prop::collection::vec(layer, n),
                prop::collection::vec(prop::collection::vec(0.0f64..1.0, m), n),
                prop::collection::vec(prop::collection::vec(0.0f64..1.0, m * m), n.saturating_sub(1)),
            )
                .prop_map(move |(layers, probs, digrams)| {
                    let probs: Vec<NodeProbabilities> =
                        probs.iter().map(|p| keys.iter().copied().zip(p.iter().copied()).collect()).collect();
                    let digrams: Vec<DigramLikelihoods> = digrams
                        .iter()
                        .map(|d| {
                            keys.iter()
                                .flat_map(|&u| keys.iter().map(move |&v| (u, v)))
                                .zip(d.iter().copied())
                                .collect()
                        })
                        .collect();
                    build_graph(&layers, &probs, &digrams).unwrap()
                })
        })
    }

    proptest! {
        #[test]
        fn matches_exhaustive_enumeration(g in random_graph(), k in 1usize..=20) {
            let mut oracle = all_paths(&g);
            oracle.truncate(k);
            prop_assert_eq!(k_best_paths(&g, k).unwrap(), oracle);
        }

        #[test]
        fn pruning_never_raises_the_best(g in random_graph(), gaps in prop::collection::vec(0.0f64..0.4, 4)) {
            let before = k_best_paths(&g, 1).unwrap()[0].weight;
            let pruned = prune_repeat_edges(&g, &gaps, 0.15);
            if let Some(best) = k_best_paths(&pruned, 1).unwrap().first() {
                prop_assert!(best.weight <= before);
            }
        }
    }
}
