//! The fit / generate / threshold / heatmap / synth workflows.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use ndarray::Array2;
use serde_json::{json, Map, Value};

use sip_core::drift::{restart_threshold, ThresholdConfig};
use sip_core::graph::{apply_batch, make_scenario, ArrivalOrder, Graph, LabelTable};
use sip_core::project::{fit, generate, GenerateConfig, MethodBasis};
use sip_core::spectral::{
    lanczos_eig, prefix_correlation, truncated_svd, OrderMode, SolverConfig,
};
use sip_core::synth::{synth_labeled_graph, SynthConfig};
use sip_core::target::{drift_target, Method, TargetRep, TargetSpec};

use crate::args::{FitArgs, GenerateArgs, HeatmapArgs, SynthArgs, ThresholdArgs};
use crate::pipeline::{
    parse_batch_file, parse_order, prepare, write_embedding_csv, PrepareOptions,
};
use crate::state::{ArrayDesc, PipelineInfo, StateFile};

pub fn build_spec(
    method: Method,
    dim: usize,
    arope_weights: &str,
    grarep_k: usize,
    grarep_beta: Option<f64>,
    netmf_h: usize,
    netmf_t: usize,
    netmf_b: f64,
) -> Result<TargetSpec<f64>> {
    let mut spec = TargetSpec::<f64>::new(method, dim);
    spec.arope_weights = arope_weights
        .split(',')
        .map(|t| t.trim().parse::<f64>().context("bad AROPE weight"))
        .collect::<Result<Vec<f64>>>()?;
    spec.grarep_order = grarep_k;
    spec.grarep_beta = grarep_beta;
    spec.netmf_rank = netmf_h;
    spec.netmf_window = netmf_t;
    spec.netmf_negatives = netmf_b;
    spec.validate()?;
    Ok(spec)
}

fn prefix_graph(g: &Graph<f64>, n: usize) -> Result<Graph<f64>> {
    let keep: Vec<usize> = (0..n).collect();
    Ok(g.induced_subgraph(&keep)?)
}

/// Edge triples of the fitted subgraph, stored so later commands are
/// self-contained (ids and weights are exact in f64).
fn graph_edges_array(g: &Graph<f64>) -> (ArrayDesc, Vec<f64>) {
    let edges: Vec<(usize, usize, f64)> = g.edges().collect();
    let mut data = Vec::with_capacity(edges.len() * 3);
    for (i, j, w) in &edges {
        data.push(*i as f64);
        data.push(*j as f64);
        data.push(*w);
    }
    (
        ArrayDesc {
            name: "graph_edges".into(),
            rows: edges.len(),
            cols: 3,
        },
        data,
    )
}

fn graph_from_edges_array(n: usize, desc: &ArrayDesc, data: &[f64], allow_self_loops: bool) -> Result<Graph<f64>> {
    if desc.cols != 3 {
        bail!("graph_edges array must have 3 columns");
    }
    let triples: Vec<(usize, usize, f64)> = data
        .chunks_exact(3)
        .map(|c| (c[0] as usize, c[1] as usize, c[2]))
        .collect();
    Ok(Graph::from_undirected_triples(n, &triples, allow_self_loops)?)
}

pub fn cmd_fit(args: &FitArgs) -> Result<()> {
    let order = parse_order(&args.common.order, args.common.seed)?;
    let opts = PrepareOptions {
        weighted: args.common.weighted,
        allow_self_loops: args.common.allow_self_loops,
        giant: !args.common.no_giant,
        order,
    };
    let prepared = prepare(&args.common.input, None, &opts)?;
    let total = prepared.graph.n();
    let n = args.n.unwrap_or(total);
    if n > total {
        bail!("--n {} exceeds graph size {}", n, total);
    }
    let g0 = prefix_graph(&prepared.graph, n)?;
    let spec = build_spec(
        args.common.method,
        args.common.dim,
        &args.common.arope_weights,
        args.common.grarep_k,
        args.common.grarep_beta,
        args.common.netmf_h,
        args.common.netmf_t,
        args.common.netmf_b,
    )?;
    let solver = SolverConfig::with_seed(args.common.seed);
    let (embedding, basis) = fit(&g0, &spec, &solver)?;
    let tokens = &prepared.tokens[..n];
    let pipeline = PipelineInfo {
        order: args.common.order.clone(),
        seed: args.common.seed,
        giant: !args.common.no_giant,
        weighted: args.common.weighted,
        allow_self_loops: args.common.allow_self_loops,
    };
    let mut state = StateFile::from_basis(&basis, pipeline, tokens);
    let (edesc, edata) = graph_edges_array(&g0);
    state.header.arrays.push(edesc);
    state.arrays.push(edata);
    state.save(&args.state)?;
    write_embedding_csv(&args.out, tokens, &embedding.data)?;
    eprintln!(
        "fit: method={} n={} d={} sigma1={} sigma2={} state={} out={}",
        spec.method.name(),
        n,
        spec.dim,
        basis.drift_sigma.0,
        basis.drift_sigma.1,
        args.state.display(),
        args.out.display()
    );
    Ok(())
}

fn load_state_and_basis(state_path: &Path) -> Result<(StateFile, MethodBasis<f64>)> {
    let state = StateFile::load(state_path)?;
    let idx = state
        .header
        .arrays
        .iter()
        .position(|a| a.name == "graph_edges")
        .context("state file lacks the fitted graph")?;
    let g0 = graph_from_edges_array(
        state.header.n,
        &state.header.arrays[idx],
        &state.arrays[idx],
        state.header.pipeline.allow_self_loops,
    )?;
    let basis = state.into_basis(g0)?;
    Ok((state, basis))
}

pub fn cmd_generate(args: &GenerateArgs) -> Result<()> {
    let (state, mut basis) = load_state_and_basis(&args.state)?;
    let file = File::open(&args.batch)
        .with_context(|| format!("cannot open batch file {}", args.batch.display()))?;
    let (batch, new_tokens) = parse_batch_file(
        BufReader::new(file),
        &state.header.tokens,
        state.header.pipeline.weighted,
    )?;
    let g1 = apply_batch(&basis.fit_graph, &batch)?;
    let cfg = GenerateConfig {
        solver: SolverConfig::with_seed(args.seed),
        check: Default::default(),
    };
    let out = generate(&mut basis, &g1, args.check, &cfg)?;
    write_embedding_csv(&args.out, &new_tokens, &out.embedding.data)?;
    if let Some(verdict_path) = &args.verdict {
        let v = match &out.verdict {
            Some(v) => {
                let mut obj = v.to_json();
                if let Value::Object(map) = &mut obj {
                    map.insert("retrained".into(), Value::Bool(out.retrained));
                    map.insert("checked".into(), Value::Bool(true));
                    map.insert("m".into(), json!(batch.m));
                }
                obj
            }
            None => {
                let mut map = Map::new();
                map.insert("checked".into(), Value::Bool(false));
                map.insert("ok".into(), Value::Bool(true));
                map.insert("retrained".into(), Value::Bool(false));
                map.insert("m".into(), json!(batch.m));
                Value::Object(map)
            }
        };
        let mut f = BufWriter::new(File::create(verdict_path)?);
        serde_json::to_writer_pretty(&mut f, &v)?;
        f.write_all(b"\n")?;
        f.flush()?;
    }
    if out.retrained {
        // The basis now describes the grown graph; persist it with the
        // extended token table so later generates stay consistent.
        let mut tokens = state.header.tokens.clone();
        tokens.extend(new_tokens.iter().cloned());
        let mut new_state = StateFile::from_basis(&basis, state.header.pipeline.clone(), &tokens);
        let (edesc, edata) = graph_edges_array(&basis.fit_graph);
        new_state.header.arrays.push(edesc);
        new_state.arrays.push(edata);
        new_state.save(&args.state)?;
    }
    eprintln!(
        "generate: m={} retrained={} checked={} out={}",
        new_tokens.len(),
        out.retrained,
        args.check,
        args.out.display()
    );
    Ok(())
}

fn dummy_labels(n: usize) -> LabelTable {
    LabelTable::new(vec![Vec::new(); n], 0).expect("empty labels")
}

pub fn cmd_threshold(args: &ThresholdArgs) -> Result<()> {
    let order = parse_order(&args.common.order, args.common.seed)?;
    let opts = PrepareOptions {
        weighted: args.common.weighted,
        allow_self_loops: args.common.allow_self_loops,
        giant: !args.common.no_giant,
        order,
    };
    let prepared = prepare(&args.common.input, None, &opts)?;
    let n = args.n;
    if n >= prepared.graph.n() {
        bail!(
            "--n {} leaves no arrivals (graph has {} nodes)",
            n,
            prepared.graph.n()
        );
    }
    let spec = build_spec(
        args.common.method,
        args.common.dim,
        &args.common.arope_weights,
        args.common.grarep_k,
        args.common.grarep_beta,
        args.common.netmf_h,
        args.common.netmf_t,
        args.common.netmf_b,
    )?;
    let labels = dummy_labels(prepared.graph.n());
    let scenario = make_scenario(&prepared.graph, &labels, n, ArrivalOrder::FileOrder, 1)?;
    let cfg = ThresholdConfig {
        m_max: args.m_max,
        solver: SolverConfig::with_seed(args.common.seed),
        check: Default::default(),
    };
    let report = restart_threshold(&scenario, &spec, &cfg)?;
    let mut trace = Vec::new();
    for step in &report.trace {
        let mut row = step.verdict.to_json();
        if let Value::Object(map) = &mut row {
            map.insert("m".into(), json!(step.m));
        }
        trace.push(row);
    }
    let out = json!({
        "method": spec.method.name(),
        "n": n,
        "m_max": args.m_max,
        "m0": report.m0,
        "capped": report.capped,
        "sigma1": format!("{}", report.sigma1),
        "sigma2": format!("{}", report.sigma2),
        "seed": args.common.seed,
        "trace": trace,
    });
    let mut f = BufWriter::new(File::create(&args.out)?);
    serde_json::to_writer_pretty(&mut f, &out)?;
    f.write_all(b"\n")?;
    f.flush()?;
    eprintln!("threshold: n={} m0={} capped={}", n, report.m0, report.capped);
    Ok(())
}

/// Leading spectral directions of the drift matrix: eigenvectors for
/// symmetric targets, left singular vectors otherwise.
fn drift_vectors(
    rep: &TargetRep<'_, f64>,
    count: usize,
    solver: &SolverConfig,
) -> Result<Array2<f64>> {
    if rep.is_symmetric() {
        Ok(lanczos_eig(rep, count, OrderMode::DescendingAlgebraic, solver)?.vectors)
    } else {
        Ok(truncated_svd(rep, count, solver)?.u)
    }
}

pub fn cmd_heatmap(args: &HeatmapArgs) -> Result<()> {
    let order = parse_order(&args.common.order, args.common.seed)?;
    let opts = PrepareOptions {
        weighted: args.common.weighted,
        allow_self_loops: args.common.allow_self_loops,
        giant: !args.common.no_giant,
        order,
    };
    let prepared = prepare(&args.common.input, None, &opts)?;
    let n = args.n;
    let total = prepared.graph.n();
    if n >= total {
        bail!("--n {} leaves no arrivals (graph has {} nodes)", n, total);
    }
    let spec = build_spec(
        args.common.method,
        args.common.dim,
        &args.common.arope_weights,
        args.common.grarep_k,
        args.common.grarep_beta,
        args.common.netmf_h,
        args.common.netmf_t,
        args.common.netmf_b,
    )?;
    let labels = dummy_labels(total);
    let scenario = make_scenario(&prepared.graph, &labels, n, ArrivalOrder::FileOrder, 1)?;
    let solver = SolverConfig::with_seed(args.common.seed);
    let tcfg = ThresholdConfig {
        m_max: args.m_max,
        solver,
        check: Default::default(),
    };
    let report = restart_threshold(&scenario, &spec, &tcfg)?;
    let m0 = report.m0;
    let grid: Vec<usize> = if args.m_grid == "auto" {
        let mut g = vec![0, m0, 5 * m0];
        g.retain(|&m| n + m <= total);
        g.dedup();
        g
    } else {
        let mut g = args
            .m_grid
            .split(',')
            .map(|t| t.trim().parse::<usize>().context("bad m grid entry"))
            .collect::<Result<Vec<usize>>>()?;
        g.retain(|&m| n + m <= total);
        g
    };
    let count = args.eig_count.min(n);

    let base_rep = drift_target(&scenario.initial, &spec, &solver)?;
    let base_vecs = drift_vectors(&base_rep, count, &solver)?;

    let file = File::create(&args.out)?;
    let mut out = BufWriter::new(file);
    writeln!(out, "# m0 = {}", m0)?;
    writeln!(out, "m,eig_index,abs_correlation")?;
    for &m in &grid {
        if m == 0 {
            for j in 0..count {
                writeln!(out, "0,{},1", j)?;
            }
            continue;
        }
        let g_m = scenario.replay_prefix(m)?;
        let refit = drift_target(&g_m, &spec, &solver)
            .map_err(anyhow::Error::from)
            .and_then(|rep| drift_vectors(&rep, count, &solver));
        match refit {
            Ok(vecs) => {
                let corr = prefix_correlation(base_vecs.view(), vecs.view())?;
                for (j, v) in corr.values.iter().enumerate() {
                    writeln!(out, "{},{},{}", m, j, v)?;
                }
            }
            Err(e) => {
                writeln!(out, "# refit_failed m={} error={}", m, e)?;
            }
        }
    }
    out.flush()?;
    eprintln!(
        "heatmap: n={} m0={} grid={:?} eig_count={} out={}",
        n,
        m0,
        grid,
        count,
        args.out.display()
    );
    Ok(())
}

pub fn cmd_synth(args: &SynthArgs) -> Result<()> {
    let cfg = SynthConfig {
        nodes: args.nodes,
        extra_triangles: args.extra_triangles,
        communities: args.communities,
        mean_degree: args.mean_degree,
        mixing: args.mixing,
        hub_exponent: args.hub_exponent,
        hub_cap: args.hub_cap,
        second_label_prob: args.second_label_prob,
        seed: args.seed,
    };
    let (graph, labels, tokens) = synth_labeled_graph::<f64>(&cfg);
    let mut out = BufWriter::new(File::create(&args.out_edges)?);
    graph.write_edge_list(&mut out, Some(&tokens), false)?;
    out.flush()?;
    let mut out = BufWriter::new(File::create(&args.out_labels)?);
    for i in 0..graph.n() {
        for &l in labels.labels_of(i) {
            writeln!(out, "{}\tc{}", tokens[i], l)?;
        }
    }
    out.flush()?;
    eprintln!(
        "synth: nodes={} edges={} labels={} -> {} / {}",
        graph.n(),
        graph.nnz() / 2,
        labels.label_count(),
        args.out_edges.display(),
        args.out_labels.display()
    );
    Ok(())
}
