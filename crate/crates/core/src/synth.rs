//! Deterministic generator for labeled benchmark graphs: a connected
//! degree-heterogeneous community graph (hub-heavy like protein and social
//! networks), plus optional disconnected fragments so giant-component
//! filtering has something to do.

use std::collections::HashSet;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::graph::{Graph, LabelTable};
use crate::num::Real;

#[derive(Clone, Debug)]
pub struct SynthConfig {
    /// Size of the connected core (the giant component).
    pub nodes: usize,
    /// Count of disconnected 3-cliques appended after the core.
    pub extra_triangles: usize,
    pub communities: usize,
    pub mean_degree: f64,
    /// Probability that an extra edge ignores community structure.
    pub mixing: f64,
    /// Pareto tail exponent for degree propensities (smaller = heavier hubs).
    pub hub_exponent: f64,
    /// Propensity cap, as a multiple of the minimum propensity.
    pub hub_cap: f64,
    /// Probability of a second (adjacent-community) label per node.
    pub second_label_prob: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            nodes: 2591,
            extra_triangles: 40,
            communities: 50,
            mean_degree: 14.0,
            mixing: 0.35,
            hub_exponent: 2.0,
            hub_cap: 60.0,
            second_label_prob: 0.3,
            seed: 42,
        }
    }
}

impl SynthConfig {
    /// Protein-interaction-scale profile: a 2591-node giant component with
    /// heavy hubs (clear leading eigen-gap), 50 overlapping community labels,
    /// and a few disconnected fragments for the component filter to drop.
    pub fn ppi_like() -> Self {
        SynthConfig {
            nodes: 2591,
            extra_triangles: 40,
            communities: 50,
            mean_degree: 14.0,
            mixing: 0.45,
            hub_exponent: 1.35,
            hub_cap: 180.0,
            second_label_prob: 0.3,
            seed: 42,
        }
    }
}

/// Cumulative-weight sampler over a fixed index set.
struct WeightedPicker {
    cum: Vec<f64>,
    ids: Vec<usize>,
}

impl WeightedPicker {
    fn new(ids: Vec<usize>, weights: &[f64]) -> Self {
        let mut cum = Vec::with_capacity(ids.len());
        let mut acc = 0.0;
        for &i in &ids {
            acc += weights[i];
            cum.push(acc);
        }
        WeightedPicker { cum, ids }
    }

    fn pick(&self, rng: &mut ChaCha20Rng) -> usize {
        let total = *self.cum.last().expect("nonempty picker");
        let u = rng.random_range(0.0..total);
        let pos = self.cum.partition_point(|&c| c <= u);
        self.ids[pos.min(self.ids.len() - 1)]
    }
}

/// Generate the labeled graph and its node tokens. The core is connected by
/// construction (propensity-weighted attachment tree plus community-biased
/// extra edges); labels follow communities with occasional second labels.
pub fn synth_labeled_graph<F: Real>(cfg: &SynthConfig) -> (Graph<F>, LabelTable, Vec<String>) {
    let n = cfg.nodes;
    assert!(n >= 2, "need at least two core nodes");
    assert!(cfg.communities >= 1);
    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);

    // Degree propensities: capped Pareto tail.
    let theta: Vec<f64> = (0..n)
        .map(|_| {
            let u: f64 = rng.random_range(0.0f64..1.0);
            let t = (1.0 - u).powf(-1.0 / cfg.hub_exponent);
            t.min(cfg.hub_cap)
        })
        .collect();
    let community: Vec<usize> = (0..n).map(|_| rng.random_range(0..cfg.communities)).collect();

    let mut edges: HashSet<(usize, usize)> = HashSet::new();
    let add = |edges: &mut HashSet<(usize, usize)>, a: usize, b: usize| -> bool {
        if a == b {
            return false;
        }
        edges.insert((a.min(b), a.max(b)))
    };

    // Connectivity backbone: node k attaches to a propensity-weighted
    // earlier node.
    let mut order: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        order.swap(i, j);
    }
    let mut cum: Vec<f64> = Vec::with_capacity(n);
    cum.push(theta[order[0]]);
    for k in 1..n {
        let total = cum[k - 1];
        let u = rng.random_range(0.0..total);
        let pos = cum[..k].partition_point(|&c| c <= u).min(k - 1);
        add(&mut edges, order[k], order[pos]);
        cum.push(total + theta[order[k]]);
    }

    // Community-biased extra edges up to the target mean degree.
    let global = WeightedPicker::new((0..n).collect(), &theta);
    let per_comm: Vec<WeightedPicker> = (0..cfg.communities)
        .map(|c| {
            let ids: Vec<usize> = (0..n).filter(|&i| community[i] == c).collect();
            WeightedPicker::new(ids, &theta)
        })
        .collect();
    let target = ((n as f64) * cfg.mean_degree / 2.0) as usize;
    let mut guard = 0usize;
    while edges.len() < target && guard < 50 * target {
        guard += 1;
        let i = global.pick(&mut rng);
        let use_global = rng.random_range(0.0f64..1.0) < cfg.mixing;
        let picker = if use_global || per_comm[community[i]].ids.len() < 2 {
            &global
        } else {
            &per_comm[community[i]]
        };
        let j = picker.pick(&mut rng);
        add(&mut edges, i, j);
    }

    // Labels: community id, sometimes a neighbor community as well.
    let mut assignments: Vec<Vec<usize>> = Vec::with_capacity(n);
    for i in 0..n {
        let mut set = vec![community[i]];
        if cfg.communities > 1 && rng.random_range(0.0f64..1.0) < cfg.second_label_prob {
            set.push((community[i] + 1 + rng.random_range(0..cfg.communities - 1)) % cfg.communities);
        }
        assignments.push(set);
    }

    // Disconnected fragments after the core, unlabeled.
    let mut triples: Vec<(usize, usize, F)> = edges
        .iter()
        .map(|&(a, b)| (a, b, F::one()))
        .collect();
    triples.sort_by_key(|&(a, b, _)| (a, b));
    let total_nodes = n + 3 * cfg.extra_triangles;
    for t in 0..cfg.extra_triangles {
        let base = n + 3 * t;
        triples.push((base, base + 1, F::one()));
        triples.push((base + 1, base + 2, F::one()));
        triples.push((base, base + 2, F::one()));
        assignments.push(Vec::new());
        assignments.push(Vec::new());
        assignments.push(Vec::new());
    }
    let graph = Graph::from_undirected_triples(total_nodes, &triples, false)
        .expect("generator produces valid triples");
    let labels = LabelTable::new(assignments, cfg.communities).expect("labels in range");
    let tokens: Vec<String> = (0..total_nodes).map(|i| format!("n{}", i)).collect();
    (graph, labels, tokens)
}
