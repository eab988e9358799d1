//! Shared input preparation: load the edge list (and labels), optionally
//! keep only the giant component, then relabel nodes by arrival order so
//! "the first n nodes" is always a prefix.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use ndarray::Array2;

use sip_core::graph::{
    load_edge_list, load_labels, ArrivalOrder, Graph, LabelTable, LoadOptions, StreamBatch,
};

#[derive(Clone, Debug)]
pub struct PrepareOptions {
    pub weighted: bool,
    pub allow_self_loops: bool,
    pub giant: bool,
    pub order: ArrivalOrder,
}

pub struct Prepared {
    /// Full graph, nodes relabeled to arrival order.
    pub graph: Graph<f64>,
    pub labels: Option<LabelTable>,
    /// Tokens in arrival order (index = node id of `graph`).
    pub tokens: Vec<String>,
    pub label_tokens: Vec<String>,
}

pub fn prepare(input: &Path, labels: Option<&Path>, opts: &PrepareOptions) -> Result<Prepared> {
    let file = File::open(input)
        .with_context(|| format!("cannot open edge list {}", input.display()))?;
    let (graph, tokens) = load_edge_list::<f64, _>(
        BufReader::new(file),
        LoadOptions {
            weighted: opts.weighted,
            allow_self_loops: opts.allow_self_loops,
        },
    )?;
    let (mut labels_table, label_tokens) = match labels {
        Some(path) => {
            let file = File::open(path)
                .with_context(|| format!("cannot open label file {}", path.display()))?;
            let (table, ltokens) = load_labels(BufReader::new(file), &tokens)?;
            (Some(table), ltokens)
        }
        None => (None, Vec::new()),
    };
    let (mut graph, mut tokens) = if opts.giant {
        let (sub, keep) = graph.giant_component();
        let kept_tokens: Vec<String> = keep.iter().map(|&i| tokens[i].clone()).collect();
        if let Some(t) = labels_table.take() {
            labels_table = Some(t.select(&keep));
        }
        (sub, kept_tokens)
    } else {
        (graph, tokens)
    };
    if opts.order != ArrivalOrder::FileOrder {
        let arrival = sip_core::graph::arrival_order(&graph, opts.order);
        graph = graph.induced_subgraph(&arrival)?;
        tokens = arrival.iter().map(|&i| tokens[i].clone()).collect();
        if let Some(t) = labels_table.take() {
            labels_table = Some(t.select(&arrival));
        }
    }
    Ok(Prepared {
        graph,
        labels: labels_table,
        tokens,
        label_tokens,
    })
}

/// Parse an arrival batch file against a base token table. Lines are
/// `src dst [weight]`; unknown tokens become new nodes (ids assigned in
/// first-appearance order). Edges between two old tokens are signed weight
/// deltas; negative weights are rejected elsewhere.
pub fn parse_batch_file<R: BufRead>(
    reader: R,
    base_tokens: &[String],
    weighted: bool,
) -> Result<(StreamBatch<f64>, Vec<String>)> {
    use std::collections::HashMap;
    let base_n = base_tokens.len();
    let base: HashMap<&str, usize> = base_tokens
        .iter()
        .enumerate()
        .map(|(i, t)| (t.as_str(), i))
        .collect();
    let mut new_ids: HashMap<String, usize> = HashMap::new();
    let mut new_tokens: Vec<String> = Vec::new();
    let mut batch = StreamBatch::empty(base_n);
    enum Id {
        Old(usize),
        New(usize),
    }
    let mut resolve = |tok: &str, new_tokens: &mut Vec<String>| -> Id {
        if let Some(&i) = base.get(tok) {
            Id::Old(i)
        } else if let Some(&i) = new_ids.get(tok) {
            Id::New(i)
        } else {
            let i = new_tokens.len();
            new_tokens.push(tok.to_string());
            new_ids.insert(tok.to_string(), i);
            Id::New(i)
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
        let (a, b, w) = match (fields.len(), weighted) {
            (2, _) => (fields[0], fields[1], 1.0f64),
            (3, true) => {
                let w: f64 = fields[2]
                    .parse()
                    .with_context(|| format!("line {}: bad weight {:?}", lineno, fields[2]))?;
                (fields[0], fields[1], w)
            }
            _ => bail!(
                "line {}: expected 2 or 3 fields, found {}",
                lineno,
                fields.len()
            ),
        };
        let ia = resolve(a, &mut new_tokens);
        let ib = resolve(b, &mut new_tokens);
        match (ia, ib) {
            (Id::Old(i), Id::Old(j)) => batch.delta_old_edges.push((i, j, w)),
            (Id::Old(i), Id::New(l)) | (Id::New(l), Id::Old(i)) => {
                if w < 0.0 {
                    bail!("line {}: negative weight on a new-node edge", lineno);
                }
                batch.cross_edges.push((l, i, w));
            }
            (Id::New(l1), Id::New(l2)) => {
                if w < 0.0 {
                    bail!("line {}: negative weight on a new-node edge", lineno);
                }
                batch.intra_edges.push((l1, l2, w));
            }
        }
    }
    batch.m = new_tokens.len();
    Ok((batch, new_tokens))
}

/// Write an embedding CSV: header `node_id,e_1..e_d`, shortest round-trip
/// float formatting.
pub fn write_embedding_csv(
    path: &Path,
    tokens: &[String],
    data: &Array2<f64>,
) -> Result<()> {
    if tokens.len() != data.nrows() {
        bail!(
            "token count {} does not match embedding rows {}",
            tokens.len(),
            data.nrows()
        );
    }
    let file = File::create(path)
        .with_context(|| format!("cannot create {}", path.display()))?;
    let mut out = BufWriter::new(file);
    write!(out, "node_id")?;
    for j in 1..=data.ncols() {
        write!(out, ",e_{}", j)?;
    }
    writeln!(out)?;
    for (i, tok) in tokens.iter().enumerate() {
        write!(out, "{}", tok)?;
        for j in 0..data.ncols() {
            write!(out, ",{}", data[(i, j)])?;
        }
        writeln!(out)?;
    }
    out.flush()?;
    Ok(())
}

pub fn parse_order(s: &str, seed: u64) -> Result<ArrivalOrder> {
    match s {
        "file" => Ok(ArrivalOrder::FileOrder),
        "shuffle" => Ok(ArrivalOrder::Shuffled { seed }),
        "connected" => Ok(ArrivalOrder::ConnectedRandom { seed }),
        other => bail!("unknown order {:?} (expected file|shuffle|connected)", other),
    }
}

/// `a:b:s` inclusive-start, inclusive-end sweep.
pub fn parse_range(s: &str) -> Result<Vec<usize>> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        bail!("range must be start:stop:step, got {:?}", s);
    }
    let a: usize = parts[0].parse().context("bad range start")?;
    let b: usize = parts[1].parse().context("bad range stop")?;
    let step: usize = parts[2].parse().context("bad range step")?;
    if step == 0 || b < a {
        bail!("invalid range {:?}", s);
    }
    Ok((a..=b).step_by(step).collect())
}
