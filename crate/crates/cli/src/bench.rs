//! The sweep benchmark: per-n three-mode reports, aggregate table, and
//! ratio rows.

use std::fs::File;
use std::io::{BufWriter, Write};

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use serde_json::json;

use sip_core::drift::ThresholdConfig;
use sip_core::eval::{run_modes, EvalMode, ModesConfig, ModesOutcome};
use sip_core::graph::{make_scenario, ArrivalOrder};
use sip_core::spectral::SolverConfig;

use crate::args::BenchArgs;
use crate::commands::build_spec;
use crate::pipeline::{parse_order, parse_range, prepare, PrepareOptions};

pub struct SweepPoint {
    pub n: usize,
    pub outcome: ModesOutcome<f64>,
}

fn mean_std_stderr(values: &[f64]) -> (f64, f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    let std = var.sqrt();
    (mean, std, std / n.sqrt())
}

pub fn run_sweep(args: &BenchArgs) -> Result<Vec<SweepPoint>> {
    let order = parse_order(&args.common.order, args.common.seed)?;
    let opts = PrepareOptions {
        weighted: args.common.weighted,
        allow_self_loops: args.common.allow_self_loops,
        giant: !args.common.no_giant,
        order,
    };
    let labels_path = args
        .labels
        .as_ref()
        .context("bench requires --labels")?;
    let prepared = prepare(&args.common.input, Some(labels_path), &opts)?;
    let labels = prepared.labels.clone().context("labels failed to load")?;
    let ns: Vec<usize> = match (&args.n_range, args.n) {
        (Some(range), _) => parse_range(range)?,
        (None, Some(n)) => vec![n],
        (None, None) => bail!("bench requires --n or --n-range"),
    };
    for &n in &ns {
        if n >= prepared.graph.n() {
            bail!(
                "sweep point n={} leaves no arrivals (graph has {})",
                n,
                prepared.graph.n()
            );
        }
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
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.jobs)
        .build()
        .context("thread pool")?;
    let graph = &prepared.graph;
    let labels_ref = &labels;
    let spec_ref = &spec;
    let results: Result<Vec<SweepPoint>> = pool.install(|| {
        ns.par_iter()
            .map(|&n| {
                let scenario =
                    make_scenario(graph, labels_ref, n, ArrivalOrder::FileOrder, 1)?;
                let mut cfg = ModesConfig::default();
                cfg.threshold = ThresholdConfig {
                    m_max: args.m_max,
                    solver: SolverConfig::with_seed(args.common.seed),
                    check: Default::default(),
                };
                cfg.generate.solver = SolverConfig::with_seed(args.common.seed);
                cfg.train.seed = args.common.seed;
                let outcome = run_modes(&scenario, spec_ref, &cfg)?;
                eprintln!(
                    "bench: n={} m0={}{}",
                    n,
                    outcome.m0,
                    if outcome.skipped { " (skipped)" } else { "" }
                );
                Ok(SweepPoint { n, outcome })
            })
            .collect()
    });
    results
}

pub fn cmd_bench(args: &BenchArgs) -> Result<()> {
    let points = run_sweep(args)?;
    let method = args.common.method;

    // Per-run rows.
    let runs_path = args.out.with_extension("runs.csv");
    let mut out = BufWriter::new(File::create(&runs_path)?);
    writeln!(out, "method,n,m0,mode,micro_f1,macro_f1,embed_time_s,skipped")?;
    for p in &points {
        if p.outcome.skipped {
            writeln!(
                out,
                "{},{},0,,,,,true",
                method.name(),
                p.n
            )?;
            continue;
        }
        for r in &p.outcome.reports {
            writeln!(
                out,
                "{},{},{},{},{},{},{},false",
                method.name(),
                p.n,
                p.outcome.m0,
                r.mode.name(),
                r.micro_f1,
                r.macro_f1,
                r.embed_time_s
            )?;
        }
    }
    out.flush()?;

    // Aggregate table mirroring the three-mode layout plus a ratio row.
    let mode_rows = [
        (EvalMode::SipKeepModel, "sip"),
        (EvalMode::RetrainEmbedKeepModel, "keepmodel"),
        (EvalMode::RetrainBoth, "changemodel"),
    ];
    let collect = |mode: EvalMode, f: &dyn Fn(&sip_core::EvalReport64) -> f64| -> Vec<f64> {
        points
            .iter()
            .filter(|p| !p.outcome.skipped)
            .flat_map(|p| p.outcome.reports.iter().filter(|r| r.mode == mode).map(f))
            .collect()
    };
    let table_path = args.out.with_extension("table.csv");
    let mut out = BufWriter::new(File::create(&table_path)?);
    writeln!(
        out,
        "method,row,micro_mean,micro_std,micro_stderr,macro_mean,macro_std,macro_stderr,time_mean_s"
    )?;
    let mut stats = Vec::new();
    for (mode, label) in mode_rows {
        let micro = collect(mode, &|r| r.micro_f1);
        let mac = collect(mode, &|r| r.macro_f1);
        let time = collect(mode, &|r| r.embed_time_s);
        let (mm, ms, me) = mean_std_stderr(&micro);
        let (am, as_, ae) = mean_std_stderr(&mac);
        let (tm, _, _) = mean_std_stderr(&time);
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            method.name(),
            label,
            mm,
            ms,
            me,
            am,
            as_,
            ae,
            tm
        )?;
        stats.push((label, mm, am, tm));
    }
    let ratio = |a: f64, b: f64| if b > 0.0 { a / b } else { f64::NAN };
    let micro_ratio = ratio(stats[0].1, stats[2].1);
    let macro_ratio = ratio(stats[0].2, stats[2].2);
    let time_ratio = ratio(stats[0].3, stats[2].3);
    writeln!(
        out,
        "{},ratio,{},,,{},,,{}",
        method.name(),
        micro_ratio,
        macro_ratio,
        time_ratio
    )?;
    out.flush()?;

    // Full JSON dump.
    let json_points: Vec<_> = points
        .iter()
        .map(|p| {
            json!({
                "n": p.n,
                "m0": p.outcome.m0,
                "skipped": p.outcome.skipped,
                "reports": p.outcome.reports,
                "ratios": p.outcome.ratios.as_ref().map(|r| json!({
                    "micro": r.micro,
                    "macro": r.macro_f1,
                    "time": r.time,
                })),
            })
        })
        .collect();
    let doc = json!({
        "method": method.name(),
        "dim": args.common.dim,
        "seed": args.common.seed,
        "order": args.common.order,
        "m_max": args.m_max,
        "aggregate": {
            "micro_ratio": micro_ratio,
            "macro_ratio": macro_ratio,
            "time_ratio": time_ratio,
            "points_used": points.iter().filter(|p| !p.outcome.skipped).count(),
            "points_total": points.len(),
        },
        "points": json_points,
    });
    let json_path = args.out.with_extension("json");
    let mut out = BufWriter::new(File::create(&json_path)?);
    serde_json::to_writer_pretty(&mut out, &doc)?;
    out.write_all(b"\n")?;
    out.flush()?;
    eprintln!(
        "bench: {} points -> {} {} {}",
        points.len(),
        runs_path.display(),
        table_path.display(),
        json_path.display()
    );
    Ok(())
}
