//! Scale probe for the benchmark stand-in graph: thresholds, correlation
//! drops, and rough timings per method. Not part of the test suite.

use std::time::Instant;

use sip_core::drift::{restart_threshold, ThresholdConfig};
use sip_core::graph::{make_scenario, ArrivalOrder};
use sip_core::spectral::{lanczos_eig, prefix_correlation, truncated_svd, OrderMode, SolverConfig};
use sip_core::synth::{synth_labeled_graph, SynthConfig};
use sip_core::target::{drift_spectrum, drift_target, Method, TargetRep, TargetSpec};

fn drift_vectors(rep: &TargetRep<'_, f64>, count: usize, solver: &SolverConfig) -> ndarray::Array2<f64> {
    if rep.is_symmetric() {
        lanczos_eig(rep, count, OrderMode::DescendingAlgebraic, solver)
            .expect("eig")
            .vectors
    } else {
        truncated_svd(rep, count, solver).expect("svd").u
    }
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let hub_exponent: f64 = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(1.35);
    let hub_cap: f64 = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(180.0);
    let mixing: f64 = args.get(3).map(|s| s.parse().unwrap()).unwrap_or(0.45);
    let n: usize = args.get(4).map(|s| s.parse().unwrap()).unwrap_or(1000);
    let cfg = SynthConfig {
        nodes: 2591,
        extra_triangles: 40,
        communities: 50,
        mean_degree: 14.0,
        mixing,
        hub_exponent,
        hub_cap,
        second_label_prob: 0.3,
        seed: 42,
    };
    let t = Instant::now();
    let (g_raw, labels, _) = synth_labeled_graph::<f64>(&cfg);
    let (g, keep) = g_raw.giant_component();
    let labels = labels.select(&keep);
    println!(
        "graph: raw={} giant={} edges={} gen={:.2}s",
        g_raw.n(),
        g.n(),
        g.nnz() / 2,
        t.elapsed().as_secs_f64()
    );
    let scenario = make_scenario(&g, &labels, n, ArrivalOrder::ConnectedRandom { seed: 42 }, 1).unwrap();
    let solver = SolverConfig::with_seed(42);

    for method in [Method::Arope, Method::Grarep, Method::Netmf] {
        let mut spec = TargetSpec::<f64>::new(method, 128);
        spec.grarep_order = 4;
        let t = Instant::now();
        let rep = drift_target(&scenario.initial, &spec, &solver).unwrap();
        let (s1, s2) = drift_spectrum(&rep, &solver).unwrap();
        let build_t = t.elapsed().as_secs_f64();
        let m_cap = match method {
            Method::Netmf => 48,
            Method::Grarep => 256,
            _ => 400,
        };
        let t = Instant::now();
        let report = restart_threshold(
            &scenario,
            &spec,
            &ThresholdConfig {
                m_max: m_cap,
                solver,
                check: Default::default(),
            },
        )
        .unwrap();
        let scan_t = t.elapsed().as_secs_f64();
        println!(
            "{:?}: s1={:.3} s2={:.3} gap={:.3} m0={}{} build={:.2}s scan={:.2}s ({:.3}s/step)",
            method,
            s1,
            s2,
            s1 - s2,
            report.m0,
            if report.capped { " (capped)" } else { "" },
            build_t,
            scan_t,
            scan_t / report.trace.len().max(1) as f64
        );

        // Correlation drop for the heatmap criterion (AROPE / GraRep only).
        if matches!(method, Method::Arope | Method::Grarep) && report.m0 > 0 {
            let m0 = report.m0;
            let count = 128.min(n);
            let base = drift_vectors(&rep, count, &solver);
            let mut means = Vec::new();
            for m in [m0, (5 * m0).min(g.n() - n)] {
                let t = Instant::now();
                let g_m = scenario.replay_prefix(m).unwrap();
                let rep_m = drift_target(&g_m, &spec, &solver).unwrap();
                let vecs = drift_vectors(&rep_m, count, &solver);
                let corr = prefix_correlation(base.view(), vecs.view()).unwrap();
                let mean = corr.values.iter().sum::<f64>() / corr.values.len() as f64;
                means.push((m, mean, t.elapsed().as_secs_f64()));
            }
            for (m, mean, secs) in &means {
                println!("  corr m={}: mean={:.4} ({:.2}s)", m, mean, secs);
            }
            if means.len() == 2 {
                println!("  drop = {:.4}", means[0].1 - means[1].1);
            }
        }
    }
}
