//! Library-level tour: fit a basis, scan the drift budget, and embed an
//! arriving batch by projection.

use sip_core::drift::{restart_threshold, ThresholdConfig};
use sip_core::graph::{apply_batch, make_scenario, ArrivalOrder};
use sip_core::project::{fit, generate, GenerateConfig};
use sip_core::spectral::SolverConfig;
use sip_core::synth::{synth_labeled_graph, SynthConfig};
use sip_core::target::{Method, TargetSpec};

fn main() -> sip_core::Result<()> {
    let cfg = SynthConfig {
        nodes: 600,
        extra_triangles: 0,
        communities: 8,
        hub_exponent: 1.35,
        hub_cap: 180.0,
        mixing: 0.45,
        ..Default::default()
    };
    let (graph, labels, _) = synth_labeled_graph::<f64>(&cfg);
    let n = 500;
    let scenario = make_scenario(&graph, &labels, n, ArrivalOrder::ConnectedRandom { seed: 42 }, 1)?;

    let spec = TargetSpec::<f64>::new(Method::Arope, 32);
    let solver = SolverConfig::with_seed(42);
    let (embedding, mut basis) = fit(&scenario.initial, &spec, &solver)?;
    println!(
        "fitted {} nodes at dim {}; drift spectrum ({:.3}, {:.3})",
        embedding.rows(),
        embedding.dim(),
        basis.drift_sigma.0,
        basis.drift_sigma.1
    );

    let report = restart_threshold(&scenario, &spec, &ThresholdConfig::default())?;
    println!("budget admits m0 = {} arrivals", report.m0);

    // Embed the first admitted arrivals by projection, with the gate on.
    let mut g1 = scenario.initial.clone();
    for step in scenario.single_node_steps().iter().take(report.m0.min(10)) {
        g1 = apply_batch(&g1, step)?;
    }
    let out = generate(&mut basis, &g1, true, &GenerateConfig::default())?;
    println!(
        "generated {} embeddings, retrained = {}, budget ok = {}",
        out.embedding.rows(),
        out.retrained,
        out.verdict.map(|v| v.ok).unwrap_or(true)
    );
    Ok(())
}
