//! Undirected weighted graphs in CSR form, node labels, and arrival streams.

use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::error::{Error, Result};
use crate::num::Real;

/// Sparse symmetric adjacency in compressed sparse row layout.
///
/// Invariants: `(i, j, w)` is stored iff `(j, i, w)` is, weights are
/// non-negative and nonzero, column indices are strictly increasing within a
/// row, and self-loops only appear when the graph was built with
/// `allow_self_loops`.
#[derive(Clone, Debug, PartialEq)]
pub struct Graph<F> {
    n: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    weights: Vec<F>,
    allow_self_loops: bool,
}

impl<F: Real> Graph<F> {
    pub fn empty() -> Self {
        Graph {
            n: 0,
            row_offsets: vec![0],
            col_indices: Vec::new(),
            weights: Vec::new(),
            allow_self_loops: false,
        }
    }

    /// Build from undirected edge triples `(i, j, w)`. Each undirected edge is
    /// listed once in any orientation; duplicates collapse by weight sum.
    pub fn from_undirected_triples(
        n: usize,
        triples: &[(usize, usize, F)],
        allow_self_loops: bool,
    ) -> Result<Self> {
        let mut merged: BTreeMap<(usize, usize), F> = BTreeMap::new();
        for &(i, j, w) in triples {
            if i >= n {
                return Err(Error::IndexOutOfRange {
                    what: "node",
                    got: i,
                    limit: n,
                });
            }
            if j >= n {
                return Err(Error::IndexOutOfRange {
                    what: "node",
                    got: j,
                    limit: n,
                });
            }
            if w < F::zero() || !w.is_finite() {
                return Err(Error::NonFinite("edge weight"));
            }
            if i == j && !allow_self_loops {
                return Err(Error::SelfLoop {
                    line: 0,
                    token: i.to_string(),
                });
            }
            let key = (i.min(j), i.max(j));
            *merged.entry(key).or_insert_with(F::zero) += w;
        }
        merged.retain(|_, w| *w > F::zero());
        Ok(Self::from_merged_upper(n, &merged, allow_self_loops))
    }

    fn from_merged_upper(
        n: usize,
        upper: &BTreeMap<(usize, usize), F>,
        allow_self_loops: bool,
    ) -> Self {
        let mut counts = vec![0usize; n + 1];
        for &(i, j) in upper.keys() {
            counts[i + 1] += 1;
            if i != j {
                counts[j + 1] += 1;
            }
        }
        for k in 0..n {
            counts[k + 1] += counts[k];
        }
        let nnz = counts[n];
        let mut cols = vec![0usize; nnz];
        let mut vals = vec![F::zero(); nnz];
        let mut cursor = counts.clone();
        // BTreeMap iteration is (i, j)-sorted, so per-row columns come out
        // sorted for the upper half; the mirrored half needs a second pass.
        for (&(i, j), &w) in upper {
            let p = cursor[i];
            cols[p] = j;
            vals[p] = w;
            cursor[i] += 1;
            if i != j {
                let q = cursor[j];
                cols[q] = i;
                vals[q] = w;
                cursor[j] += 1;
            }
        }
        let g = Graph {
            n,
            row_offsets: counts,
            col_indices: cols,
            weights: vals,
            allow_self_loops,
        };
        g.sorted_rows()
    }

    fn sorted_rows(mut self) -> Self {
        for i in 0..self.n {
            let (s, e) = (self.row_offsets[i], self.row_offsets[i + 1]);
            let mut idx: Vec<usize> = (s..e).collect();
            idx.sort_by_key(|&p| self.col_indices[p]);
            let cols: Vec<usize> = idx.iter().map(|&p| self.col_indices[p]).collect();
            let vals: Vec<F> = idx.iter().map(|&p| self.weights[p]).collect();
            self.col_indices[s..e].copy_from_slice(&cols);
            self.weights[s..e].copy_from_slice(&vals);
        }
        self
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of stored (directed) entries.
    pub fn nnz(&self) -> usize {
        self.col_indices.len()
    }

    pub fn allows_self_loops(&self) -> bool {
        self.allow_self_loops
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn weights(&self) -> &[F] {
        &self.weights
    }

    pub fn neighbors(&self, i: usize) -> (&[usize], &[F]) {
        let (s, e) = (self.row_offsets[i], self.row_offsets[i + 1]);
        (&self.col_indices[s..e], &self.weights[s..e])
    }

    pub fn weight(&self, i: usize, j: usize) -> Option<F> {
        let (cols, vals) = self.neighbors(i);
        cols.binary_search(&j).ok().map(|p| vals[p])
    }

    /// Weighted degree (row sum).
    pub fn degree(&self, i: usize) -> F {
        self.neighbors(i).1.iter().copied().sum()
    }

    pub fn degrees(&self) -> Vec<F> {
        (0..self.n).map(|i| self.degree(i)).collect()
    }

    /// Graph volume: sum over all entries of the adjacency matrix.
    pub fn volume(&self) -> F {
        self.weights.iter().copied().sum()
    }

    /// Undirected edge iterator over the upper triangle (including self-loops).
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, F)> + '_ {
        (0..self.n).flat_map(move |i| {
            let (cols, vals) = self.neighbors(i);
            cols.iter()
                .zip(vals)
                .filter(move |(&j, _)| j >= i)
                .map(move |(&j, &w)| (i, j, w))
        })
    }

    /// y = A x
    pub fn spmv_into(&self, x: &[F], y: &mut [F]) {
        debug_assert_eq!(x.len(), self.n);
        debug_assert_eq!(y.len(), self.n);
        for i in 0..self.n {
            let (cols, vals) = self.neighbors(i);
            let mut acc = F::zero();
            for (&j, &w) in cols.iter().zip(vals) {
                acc += w * x[j];
            }
            y[i] = acc;
        }
    }

    pub fn spmv(&self, x: &[F]) -> Vec<F> {
        let mut y = vec![F::zero(); self.n];
        self.spmv_into(x, &mut y);
        y
    }

    pub fn is_symmetric(&self) -> bool {
        self.edges()
            .all(|(i, j, w)| self.weight(j, i) == Some(w))
    }

    /// Induced subgraph on `keep` (ids reindexed to positions in `keep`).
    pub fn induced_subgraph(&self, keep: &[usize]) -> Result<Self> {
        let mut pos = vec![usize::MAX; self.n];
        for (p, &id) in keep.iter().enumerate() {
            if id >= self.n {
                return Err(Error::IndexOutOfRange {
                    what: "node",
                    got: id,
                    limit: self.n,
                });
            }
            pos[id] = p;
        }
        let mut triples = Vec::new();
        for (p, &id) in keep.iter().enumerate() {
            let (cols, vals) = self.neighbors(id);
            for (&j, &w) in cols.iter().zip(vals) {
                let q = pos[j];
                if q != usize::MAX && (q > p || (q == p && j == id)) {
                    triples.push((p, q, w));
                }
            }
        }
        Graph::from_undirected_triples(keep.len(), &triples, self.allow_self_loops)
    }

    /// Connected components as sorted id lists, largest first; ties broken by
    /// the lowest contained id.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let mut seen = vec![false; self.n];
        let mut comps = Vec::new();
        for start in 0..self.n {
            if seen[start] {
                continue;
            }
            let mut stack = vec![start];
            let mut comp = Vec::new();
            seen[start] = true;
            while let Some(u) = stack.pop() {
                comp.push(u);
                for &v in self.neighbors(u).0 {
                    if !seen[v] {
                        seen[v] = true;
                        stack.push(v);
                    }
                }
            }
            comp.sort_unstable();
            comps.push(comp);
        }
        comps.sort_by(|a, b| b.len().cmp(&a.len()).then(a[0].cmp(&b[0])));
        comps
    }

    /// Largest connected component; ties broken by lowest minimum original id.
    /// Returns the induced subgraph and the retained original ids in order
    /// (so relative order of retained ids survives the remap).
    pub fn giant_component(&self) -> (Self, Vec<usize>) {
        if self.n == 0 {
            return (Graph::empty(), Vec::new());
        }
        let comps = self.components();
        let keep = comps.into_iter().next().unwrap_or_default();
        let sub = self
            .induced_subgraph(&keep)
            .expect("component ids are in range");
        (sub, keep)
    }

    /// Serialize as a TSV edge list, one undirected edge per line. `tokens`
    /// maps node ids to output names (defaults to the decimal id); the weight
    /// column is optional.
    pub fn write_edge_list<W: Write>(
        &self,
        out: &mut W,
        tokens: Option<&[String]>,
        include_weights: bool,
    ) -> Result<()> {
        for (i, j, w) in self.edges() {
            let (a, b);
            match tokens {
                Some(t) => {
                    a = t[i].as_str();
                    b = t[j].as_str();
                    if include_weights {
                        writeln!(out, "{}\t{}\t{}", a, b, w)?;
                    } else {
                        writeln!(out, "{}\t{}", a, b)?;
                    }
                }
                None => {
                    if include_weights {
                        writeln!(out, "{}\t{}\t{}", i, j, w)?;
                    } else {
                        writeln!(out, "{}\t{}", i, j)?;
                    }
                }
            }
        }
        Ok(())
    }
}

/// Options for [`load_edge_list`].
#[derive(Clone, Copy, Debug, Default)]
pub struct LoadOptions {
    /// Accept a third weight column (absent weight defaults to 1.0). When
    /// false, a third column is a format error.
    pub weighted: bool,
    pub allow_self_loops: bool,
}


/// Parse a TSV/whitespace edge list: `src dst [weight]`, `#` comment lines.
/// Node tokens are arbitrary strings remapped to dense ids in first-appearance
/// order; the token table is returned alongside. Duplicate edges collapse by
/// weight sum.
pub fn load_edge_list<F: Real, R: BufRead>(
    reader: R,
    opts: LoadOptions,
) -> Result<(Graph<F>, Vec<String>)> {
    let mut ids: HashMap<String, usize> = HashMap::new();
    let mut tokens: Vec<String> = Vec::new();
    let mut triples: Vec<(usize, usize, F)> = Vec::new();
    let intern = |tok: &str, tokens: &mut Vec<String>, ids: &mut HashMap<String, usize>| {
        if let Some(&id) = ids.get(tok) {
            id
        } else {
            let id = tokens.len();
            tokens.push(tok.to_string());
            ids.insert(tok.to_string(), id);
            id
        }
    };
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = lineno + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        let (src, dst, w) = match (fields.len(), opts.weighted) {
            (2, _) => (fields[0], fields[1], F::one()),
            (3, true) => {
                let w: f64 = fields[2].parse().map_err(|_| Error::MalformedLine {
                    line: lineno,
                    reason: format!("bad weight {:?}", fields[2]),
                })?;
                if !w.is_finite() {
                    return Err(Error::MalformedLine {
                        line: lineno,
                        reason: format!("non-finite weight {}", w),
                    });
                }
                if w < 0.0 {
                    return Err(Error::NegativeWeight { line: lineno, weight: w });
                }
                (fields[0], fields[1], F::of(w))
            }
            (3, false) => {
                return Err(Error::MalformedLine {
                    line: lineno,
                    reason: "weight column present but input declared unweighted".into(),
                })
            }
            _ => {
                return Err(Error::MalformedLine {
                    line: lineno,
                    reason: format!("expected 2 or 3 fields, found {}", fields.len()),
                })
            }
        };
        if src == dst && !opts.allow_self_loops {
            return Err(Error::SelfLoop {
                line: lineno,
                token: src.to_string(),
            });
        }
        let i = intern(src, &mut tokens, &mut ids);
        let j = intern(dst, &mut tokens, &mut ids);
        triples.push((i, j, w));
    }
    let g = Graph::from_undirected_triples(tokens.len(), &triples, opts.allow_self_loops)?;
    Ok((g, tokens))
}

/// One step of a node-arrival stream.
///
/// `cross_edges` connect new nodes (local ids `< m`) to nodes already present
/// (`< base_n`); `intra_edges` connect new nodes to each other;
/// `delta_old_edges` carry signed weight changes among old nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct StreamBatch<F> {
    pub base_n: usize,
    pub m: usize,
    pub cross_edges: Vec<(usize, usize, F)>,
    pub intra_edges: Vec<(usize, usize, F)>,
    pub delta_old_edges: Vec<(usize, usize, F)>,
}

impl<F: Real> StreamBatch<F> {
    pub fn empty(base_n: usize) -> Self {
        StreamBatch {
            base_n,
            m: 0,
            cross_edges: Vec::new(),
            intra_edges: Vec::new(),
            delta_old_edges: Vec::new(),
        }
    }
}

/// Apply an arrival batch, producing the grown symmetric graph.
///
/// Negative `delta_old_edges` weights remove mass; the result clamps at zero
/// (the edge disappears). A delta on a nonexistent edge with negative weight
/// is an error.
pub fn apply_batch<F: Real>(g: &Graph<F>, b: &StreamBatch<F>) -> Result<Graph<F>> {
    if b.base_n != g.n() {
        return Err(Error::BatchBaseMismatch {
            batch: b.base_n,
            graph: g.n(),
        });
    }
    let n0 = g.n();
    let n1 = n0 + b.m;
    let mut merged: BTreeMap<(usize, usize), F> = BTreeMap::new();
    for (i, j, w) in g.edges() {
        merged.insert((i, j), w);
    }
    for &(i, j, dw) in &b.delta_old_edges {
        if i >= n0 || j >= n0 {
            return Err(Error::IndexOutOfRange {
                what: "delta edge node",
                got: i.max(j),
                limit: n0,
            });
        }
        if i == j && !g.allow_self_loops {
            return Err(Error::SelfLoop {
                line: 0,
                token: i.to_string(),
            });
        }
        let key = (i.min(j), i.max(j));
        match merged.get_mut(&key) {
            Some(w) => {
                *w += dw;
                if *w <= F::zero() {
                    merged.remove(&key);
                }
            }
            None if dw > F::zero() => {
                merged.insert(key, dw);
            }
            None => {
                return Err(Error::MissingEdge { i: key.0, j: key.1 });
            }
        }
    }
    for &(local, old, w) in &b.cross_edges {
        if local >= b.m {
            return Err(Error::IndexOutOfRange {
                what: "cross edge new node",
                got: local,
                limit: b.m,
            });
        }
        if old >= n0 {
            return Err(Error::IndexOutOfRange {
                what: "cross edge old node",
                got: old,
                limit: n0,
            });
        }
        if w < F::zero() {
            return Err(Error::NonFinite("negative cross edge weight"));
        }
        let key = (old, n0 + local);
        *merged.entry(key).or_insert_with(F::zero) += w;
    }
    for &(a, c, w) in &b.intra_edges {
        if a >= b.m || c >= b.m {
            return Err(Error::IndexOutOfRange {
                what: "intra edge node",
                got: a.max(c),
                limit: b.m,
            });
        }
        if a == c && !g.allow_self_loops {
            return Err(Error::SelfLoop {
                line: 0,
                token: (n0 + a).to_string(),
            });
        }
        if w < F::zero() {
            return Err(Error::NonFinite("negative intra edge weight"));
        }
        let key = (n0 + a.min(c), n0 + a.max(c));
        *merged.entry(key).or_insert_with(F::zero) += w;
    }
    merged.retain(|_, w| *w > F::zero());
    Ok(Graph::from_merged_upper(n1, &merged, g.allow_self_loops))
}

/// Node labels: per-node sorted label-id sets with a dense label universe.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LabelTable {
    assignments: Vec<Vec<usize>>,
    label_count: usize,
}

impl LabelTable {
    pub fn new(assignments: Vec<Vec<usize>>, label_count: usize) -> Result<Self> {
        for labels in &assignments {
            for &l in labels {
                if l >= label_count {
                    return Err(Error::IndexOutOfRange {
                        what: "label",
                        got: l,
                        limit: label_count,
                    });
                }
            }
        }
        let mut assignments = assignments;
        for labels in &mut assignments {
            labels.sort_unstable();
            labels.dedup();
        }
        Ok(LabelTable {
            assignments,
            label_count,
        })
    }

    pub fn node_count(&self) -> usize {
        self.assignments.len()
    }

    pub fn label_count(&self) -> usize {
        self.label_count
    }

    pub fn labels_of(&self, node: usize) -> &[usize] {
        &self.assignments[node]
    }

    pub fn is_labeled(&self, node: usize) -> bool {
        !self.assignments[node].is_empty()
    }

    /// Reindex to a node subset given in its new order.
    pub fn select(&self, keep: &[usize]) -> LabelTable {
        LabelTable {
            assignments: keep.iter().map(|&i| self.assignments[i].clone()).collect(),
            label_count: self.label_count,
        }
    }
}

/// Parse a label file: `node<TAB>label` per line, multi-label supported.
/// Node tokens must resolve through the edge-list token table; label tokens
/// are remapped densely in first-appearance order.
pub fn load_labels<R: BufRead>(reader: R, node_tokens: &[String]) -> Result<(LabelTable, Vec<String>)> {
    let ids: HashMap<&str, usize> = node_tokens
        .iter()
        .enumerate()
        .map(|(i, t)| (t.as_str(), i))
        .collect();
    let mut label_ids: HashMap<String, usize> = HashMap::new();
    let mut label_tokens: Vec<String> = Vec::new();
    let mut assignments = vec![Vec::new(); node_tokens.len()];
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = lineno + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        if fields.len() != 2 {
            return Err(Error::MalformedLine {
                line: lineno,
                reason: format!("expected 2 fields, found {}", fields.len()),
            });
        }
        let node = *ids.get(fields[0]).ok_or_else(|| Error::UnknownToken {
            token: fields[0].to_string(),
            line: lineno,
        })?;
        let label = match label_ids.get(fields[1]) {
            Some(&l) => l,
            None => {
                let l = label_tokens.len();
                label_tokens.push(fields[1].to_string());
                label_ids.insert(fields[1].to_string(), l);
                l
            }
        };
        assignments[node].push(label);
    }
    let table = LabelTable::new(assignments, label_tokens.len())?;
    Ok((table, label_tokens))
}

/// How arrival order is derived from a source graph.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ArrivalOrder {
    /// Keep source ids (file order).
    FileOrder,
    /// Seeded Fisher-Yates shuffle of the source ids.
    Shuffled { seed: u64 },
    /// Seeded random order constrained so every prefix is connected within
    /// each component: each arrival touches an already-present node when one
    /// exists. Keeps degree-normalized targets well defined on every prefix.
    ConnectedRandom { seed: u64 },
}

/// A full replayable experiment input: initial graph, ordered arrival
/// batches, and labels over the whole (reordered) node set.
#[derive(Clone, Debug)]
pub struct StreamScenario<F> {
    pub initial: Graph<F>,
    pub batches: Vec<StreamBatch<F>>,
    pub labels: LabelTable,
    /// Scenario position -> source graph id.
    pub arrival: Vec<usize>,
}

impl<F: Real> StreamScenario<F> {
    pub fn total_nodes(&self) -> usize {
        self.arrival.len()
    }

    /// Replay every batch, returning the final graph.
    pub fn replay_all(&self) -> Result<Graph<F>> {
        let mut g = self.initial.clone();
        for b in &self.batches {
            g = apply_batch(&g, b)?;
        }
        Ok(g)
    }

    /// Replay until the graph holds `initial.n + extra` nodes. `extra` may
    /// split a batch; cross/intra edges are re-sliced accordingly.
    pub fn replay_prefix(&self, extra: usize) -> Result<Graph<F>> {
        let mut g = self.initial.clone();
        let mut remaining = extra;
        for step in self.single_node_steps() {
            if remaining == 0 {
                break;
            }
            g = apply_batch(&g, &step)?;
            remaining -= 1;
        }
        if remaining > 0 {
            return Err(Error::PrefixTooLarge {
                n: self.initial.n() + extra,
                max: self.total_nodes(),
            });
        }
        Ok(g)
    }

    /// Re-slice the batches into single-node arrival steps. Intra-batch edges
    /// become cross edges of the later endpoint; old-edge deltas attach to the
    /// first step of their originating batch.
    pub fn single_node_steps(&self) -> Vec<StreamBatch<F>> {
        let mut steps = Vec::new();
        for batch in &self.batches {
            let start = batch.base_n;
            for local in 0..batch.m {
                let mut step = StreamBatch::empty(start + local);
                step.m = 1;
                if local == 0 {
                    step.delta_old_edges = batch.delta_old_edges.clone();
                }
                for &(l, old, w) in &batch.cross_edges {
                    if l == local {
                        step.cross_edges.push((0, old, w));
                    }
                }
                for &(a, c, w) in &batch.intra_edges {
                    let (lo, hi) = (a.min(c), a.max(c));
                    if hi == local {
                        step.cross_edges.push((0, start + lo, w));
                    }
                }
                steps.push(step);
            }
        }
        steps
    }
}

/// Source-id permutation realizing an arrival order over a graph.
pub fn arrival_order<F: Real>(g: &Graph<F>, order: ArrivalOrder) -> Vec<usize> {
    let n = g.n();
    match order {
        ArrivalOrder::FileOrder => (0..n).collect(),
        ArrivalOrder::Shuffled { seed } => {
            let mut arrival: Vec<usize> = (0..n).collect();
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            arrival.shuffle(&mut rng);
            arrival
        }
        ArrivalOrder::ConnectedRandom { seed } => {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            let mut arrival = Vec::with_capacity(n);
            let mut visited = vec![false; n];
            let mut queued = vec![false; n];
            let mut frontier: Vec<usize> = Vec::new();
            let mut remaining: Vec<usize> = (0..n).collect();
            remaining.shuffle(&mut rng);
            while arrival.len() < n {
                let next = if frontier.is_empty() {
                    // New component: a random unvisited node.
                    loop {
                        let cand = remaining.pop().expect("unvisited node exists");
                        if !visited[cand] {
                            break cand;
                        }
                    }
                } else {
                    let idx = rng.random_range(0..frontier.len());
                    frontier.swap_remove(idx)
                };
                visited[next] = true;
                arrival.push(next);
                for &nb in g.neighbors(next).0 {
                    if !visited[nb] && !queued[nb] {
                        queued[nb] = true;
                        frontier.push(nb);
                    }
                }
            }
            arrival
        }
    }
}

/// Build a stream scenario: the first `n` nodes of the arrival order form the
/// initial graph, and the rest arrive in batches of `batch_size`. Every
/// arriving node carries its edges into already-present nodes; an edge whose
/// endpoints both lie in the future is attached to the later-arriving node's
/// batch.
pub fn make_scenario<F: Real>(
    g: &Graph<F>,
    labels: &LabelTable,
    n: usize,
    order: ArrivalOrder,
    batch_size: usize,
) -> Result<StreamScenario<F>> {
    if n > g.n() {
        return Err(Error::PrefixTooLarge { n, max: g.n() });
    }
    if batch_size == 0 {
        return Err(Error::invalid("batch_size", "must be positive"));
    }
    let total = g.n();
    let arrival = arrival_order(g, order);
    let mut pos = vec![0usize; total];
    for (p, &src) in arrival.iter().enumerate() {
        pos[src] = p;
    }

    let initial = g.induced_subgraph(&arrival[..n])?;
    let mut batches = Vec::new();
    let mut batch_start = n;
    while batch_start < total {
        let m = batch_size.min(total - batch_start);
        let mut batch = StreamBatch::empty(batch_start);
        batch.m = m;
        for local in 0..m {
            let p = batch_start + local;
            let src = arrival[p];
            let (cols, vals) = g.neighbors(src);
            for (&dst, &w) in cols.iter().zip(vals) {
                let q = pos[dst];
                if q < batch_start {
                    batch.cross_edges.push((local, q, w));
                } else if q > p && q < batch_start + m {
                    batch.intra_edges.push((local, q - batch_start, w));
                }
                // q in the same batch but earlier, or in a later batch:
                // recorded by the other endpoint.
            }
        }
        batches.push(batch);
        batch_start += m;
    }
    let labels = labels.select(&arrival);
    Ok(StreamScenario {
        initial,
        batches,
        labels,
        arrival,
    })
}
