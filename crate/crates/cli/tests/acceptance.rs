//! Acceptance suite: one test per release criterion, each printing a
//! `ACCEPTANCE Cn ... PASS` line with the measured quantities.
//!
//! Criteria 4 and 5 run on a protein-interaction-scale benchmark graph. If
//! `SIP_PPI_EDGES` / `SIP_PPI_LABELS` point at a real edge/label file pair it
//! is used (after giant-component filtering); otherwise a deterministic
//! synthetic stand-in with the same scale (2591-node giant component,
//! hub-heavy degrees, 50 overlapping labels) is generated in place.

use std::sync::{Mutex, OnceLock};
use std::time::Instant;

use nalgebra::DMatrix;
use ndarray::Array2;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use sip_core::drift::{
    drift_check_ops, restart_threshold, BlockOps, DriftCheckConfig, ThresholdConfig,
};
use sip_core::eval::{run_modes, ModesConfig};
use sip_core::graph::{
    apply_batch, make_scenario, ArrivalOrder, Graph, LabelTable, StreamBatch, StreamScenario,
};
use sip_core::project::{fit, generate, project_row, BasisState, GenerateConfig};
use sip_core::spectral::{
    lanczos_eig, orthonormality_defect, prefix_correlation, spectral_norm, truncated_svd, DenseOp,
    NormConfig, OrderMode, SolverConfig, SparseMatrix,
};
use sip_core::synth::{synth_labeled_graph, SynthConfig};
use sip_core::target::{
    drift_target, grarep_plp, netmf_log_matrix, normalized_laplacian, AropePoly, Method,
    TargetRep, TargetSpec,
};

/// Serializes the wall-clock-sensitive criteria so they do not contend.
static TIMING_LOCK: Mutex<()> = Mutex::new(());

struct BenchData {
    graph: Graph<f64>,
    labels: LabelTable,
    source: &'static str,
}

static BENCH_DATA: OnceLock<BenchData> = OnceLock::new();

fn bench_data() -> &'static BenchData {
    BENCH_DATA.get_or_init(|| {
        if let (Ok(edges), Ok(labels)) = (
            std::env::var("SIP_PPI_EDGES"),
            std::env::var("SIP_PPI_LABELS"),
        ) {
            let file = std::fs::File::open(&edges).expect("SIP_PPI_EDGES unreadable");
            let (g, tokens) = sip_core::graph::load_edge_list::<f64, _>(
                std::io::BufReader::new(file),
                sip_core::graph::LoadOptions::default(),
            )
            .expect("parse PPI edges");
            let file = std::fs::File::open(&labels).expect("SIP_PPI_LABELS unreadable");
            let (table, _) =
                sip_core::graph::load_labels(std::io::BufReader::new(file), &tokens)
                    .expect("parse PPI labels");
            let (giant, keep) = g.giant_component();
            let table = table.select(&keep);
            eprintln!(
                "ACCEPTANCE data: real PPI files, giant component {} nodes",
                giant.n()
            );
            BenchData {
                graph: giant,
                labels: table,
                source: "real",
            }
        } else {
            let cfg = SynthConfig::ppi_like();
            let (g, labels, _) = synth_labeled_graph::<f64>(&cfg);
            let (giant, keep) = g.giant_component();
            let labels = labels.select(&keep);
            assert_eq!(giant.n(), 2591, "stand-in giant component size");
            BenchData {
                graph: giant,
                labels,
                source: "synthetic stand-in",
            }
        }
    })
}

fn bench_scenario(n: usize) -> StreamScenario<f64> {
    let data = bench_data();
    make_scenario(
        &data.graph,
        &data.labels,
        n,
        ArrivalOrder::ConnectedRandom { seed: 42 },
        1,
    )
    .expect("scenario")
}

/// Random connected weighted graph: path backbone plus extra edges.
fn random_graph(n: usize, extra: usize, rng: &mut ChaCha20Rng) -> Graph<f64> {
    let mut triples: Vec<(usize, usize, f64)> = (0..n - 1)
        .map(|i| (i, i + 1, rng.random_range(0.2..1.5)))
        .collect();
    for _ in 0..extra {
        let i = rng.random_range(0..n);
        let j = rng.random_range(0..n);
        if i != j {
            triples.push((i, j, rng.random_range(0.2..1.5)));
        }
    }
    Graph::from_undirected_triples(n, &triples, false).unwrap()
}

fn to_nalgebra(m: &Array2<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

fn rep_to_dense(rep: &TargetRep<'_, f64>) -> DMatrix<f64> {
    let n = rep.dim();
    let mut out = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        let row = rep.row_dense(i);
        for j in 0..n {
            out[(i, j)] = row[j];
        }
    }
    out
}

fn sigma_max(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .fold(0.0f64, |a, &b| a.max(b))
}

/// Criterion 1: projecting an existing node's target row reproduces its
/// fitted embedding row to <= 1e-8 relative error, across >= 50 random
/// graphs and all four methods (LE restricted to unclamped coordinates).
#[test]
fn criterion_1_row_reproduction() {
    let t0 = Instant::now();
    let mut rng = ChaCha20Rng::seed_from_u64(0xC1);
    let mut checked_rows = 0usize;
    let mut graphs = 0usize;
    let mut worst: f64 = 0.0;
    while graphs < 52 {
        let n = rng.random_range(24..300);
        let g = random_graph(n, 3 * n, &mut rng);
        let method = match graphs % 4 {
            0 => Method::Arope,
            1 => Method::Grarep,
            2 => Method::Netmf,
            _ => Method::Le,
        };
        let mut spec = TargetSpec::<f64>::new(method, 16);
        match method {
            Method::Grarep => {
                spec.grarep_order = 4;
                spec.dim = 32;
            }
            Method::Netmf => {
                spec.netmf_rank = 48.min(n);
                spec.netmf_window = 5;
            }
            _ => {}
        }
        let cfg = SolverConfig {
            tol: 1e-12,
            max_kdim: n,
            seed: graphs as u64,
        };
        let (emb, basis) = match fit(&g, &spec, &cfg) {
            Ok(x) => x,
            Err(_) => {
                // Rank-deficient draw (zero singular values within dim);
                // redraw without counting.
                continue;
            }
        };
        graphs += 1;
        let factors = basis.projection_factors();
        let rows: Vec<usize> = (0..4).map(|_| rng.random_range(0..n)).collect();
        for &i in &rows {
            // Build the method-stage target row of node i.
            let blocks: Vec<Vec<f64>> = match &basis.state {
                BasisState::Le { .. } => {
                    let l = normalized_laplacian(&g).unwrap();
                    vec![l.row_dense(i)]
                }
                BasisState::Arope { .. } => {
                    let op = AropePoly::new(&g, &spec.arope_weights);
                    vec![op.row_dense(i)]
                }
                BasisState::Grarep { beta, .. } => (1..=spec.grarep_order)
                    .map(|ord| {
                        let x = grarep_plp(&g, ord, *beta).unwrap();
                        (0..n).map(|j| x[(i, j)]).collect()
                    })
                    .collect(),
                BasisState::Netmf { .. } => {
                    let parts =
                        netmf_log_matrix(&g, spec.netmf_rank, spec.netmf_window, 1.0, &cfg)
                            .unwrap();
                    vec![(0..n).map(|j| parts.log_m[(i, j)]).collect()]
                }
            };
            let clamp_mask: Option<Vec<bool>> = match &basis.state {
                BasisState::Le { sigma, .. } => Some(sigma.iter().map(|&s| s < 0.1).collect()),
                _ => None,
            };
            let mut col_base = 0usize;
            for (block, (factor, scale)) in blocks.iter().zip(factors.iter()) {
                let b = project_row(block, *factor, scale).unwrap();
                for (jj, &v) in b.iter().enumerate() {
                    let col = col_base + jj;
                    if let Some(mask) = &clamp_mask {
                        if mask[col] {
                            continue;
                        }
                    }
                    let expect = emb.data[(i, col)];
                    let rel = (v - expect).abs() / expect.abs().max(1.0);
                    worst = worst.max(rel);
                    assert!(
                        rel <= 1e-8,
                        "method {:?} graph {} node {} col {}: rel err {:.3e}",
                        method,
                        graphs,
                        i,
                        col,
                        rel
                    );
                    checked_rows += 1;
                }
                col_base += b.len();
            }
        }
    }
    eprintln!(
        "ACCEPTANCE C1 row-reproduction: PASS — {} graphs, {} coordinates, worst rel err {:.3e}, {:.1}s",
        graphs,
        checked_rows,
        worst,
        t0.elapsed().as_secs_f64()
    );
    assert!(t0.elapsed().as_secs_f64() < 60.0, "C1 runtime budget");
}

/// Criterion 2: iterative solvers match dense decompositions to 1e-8
/// (values) and principal angle < 1e-6 (subspaces) on n <= 300.
#[test]
fn criterion_2_oracle_equivalence() {
    let t0 = Instant::now();
    let mut rng = ChaCha20Rng::seed_from_u64(0xC2);
    let mut worst_val: f64 = 0.0;
    let mut worst_angle: f64 = 0.0;

    // Symmetric eigen pairs.
    for case in 0..3 {
        let n = 300;
        let d = 32;
        let mut triples = Vec::new();
        for _ in 0..n * 8 {
            let i = rng.random_range(0..n);
            let j = rng.random_range(0..n);
            if i != j {
                let w = rng.random_range(-1.0..1.0);
                triples.push((i, j, w));
                triples.push((j, i, w));
            }
        }
        let m = SparseMatrix::from_triples(n, n, &triples);
        let cfg = SolverConfig {
            tol: 1e-10,
            max_kdim: n,
            seed: case,
        };
        let pairs = lanczos_eig(&m, d, OrderMode::DescendingAlgebraic, &cfg).unwrap();
        let dense = to_nalgebra(&m.to_dense());
        let eig = dense.symmetric_eigen();
        let mut vals: Vec<(f64, usize)> = eig
            .eigenvalues
            .iter()
            .copied()
            .enumerate()
            .map(|(i, v)| (v, i))
            .collect();
        vals.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
        let scale = vals[0].0.abs().max(1.0);
        for j in 0..d {
            let err = (pairs.values[j] - vals[j].0).abs() / scale;
            worst_val = worst_val.max(err);
            assert!(err <= 1e-8, "eigenvalue {}: err {:.3e}", j, err);
        }
        let mut dense_sub = Array2::<f64>::zeros((n, d));
        for (col, &(_, src)) in vals.iter().take(d).enumerate() {
            for row in 0..n {
                dense_sub[(row, col)] = eig.eigenvectors[(row, src)];
            }
        }
        let prod = to_nalgebra(&pairs.vectors).transpose() * to_nalgebra(&dense_sub);
        let min_cos = prod
            .svd(false, false)
            .singular_values
            .iter()
            .fold(f64::INFINITY, |a, &b| a.min(b));
        let angle = min_cos.min(1.0).acos();
        worst_angle = worst_angle.max(angle);
        assert!(angle < 1e-6, "principal angle {:.3e}", angle);
        assert!(orthonormality_defect(pairs.vectors.view()) <= 1e-8);
    }

    // Singular triplets of nonsymmetric matrices.
    for case in 0..2 {
        let (r, c) = if case == 0 { (220, 300) } else { (300, 260) };
        let m = Array2::from_shape_fn((r, c), |_| rng.random_range(-1.0f64..1.0));
        let d = 24;
        let cfg = SolverConfig {
            tol: 1e-10,
            max_kdim: r.min(c),
            seed: 7 + case as u64,
        };
        let svd = truncated_svd(&DenseOp(m.view()), d, &cfg).unwrap();
        let dense_svd = to_nalgebra(&m).svd(true, true);
        let mut s: Vec<f64> = dense_svd.singular_values.iter().copied().collect();
        s.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let scale = s[0].max(1.0);
        for j in 0..d {
            let err = (svd.sigma[j] - s[j]).abs() / scale;
            worst_val = worst_val.max(err);
            assert!(err <= 1e-8, "sigma {}: err {:.3e}", j, err);
        }
        assert!(orthonormality_defect(svd.u.view()) <= 1e-8);
        assert!(orthonormality_defect(svd.v.view()) <= 1e-8);
    }

    // Spectral norms.
    for case in 0..4 {
        let (r, c) = [(120, 80), (200, 200), (64, 256), (300, 10)][case];
        let m = Array2::from_shape_fn((r, c), |_| rng.random_range(-1.0f64..1.0));
        let est = spectral_norm(
            &DenseOp(m.view()),
            &NormConfig {
                tol: 1e-9,
                max_iter: 4000,
                seed: case as u64,
                warm_start: None,
            },
        );
        let truth = sigma_max(&to_nalgebra(&m));
        let err = (est.value - truth).abs() / truth;
        worst_val = worst_val.max(err);
        assert!(err <= 1e-8, "norm case {}: err {:.3e}", case, err);
    }
    eprintln!(
        "ACCEPTANCE C2 oracle-equivalence: PASS — worst value err {:.3e}, worst angle {:.3e}, {:.1}s",
        worst_val,
        worst_angle,
        t0.elapsed().as_secs_f64()
    );
    assert!(t0.elapsed().as_secs_f64() < 120.0, "C2 runtime budget");
}

fn random_batch(n: usize, m: usize, rng: &mut ChaCha20Rng) -> StreamBatch<f64> {
    let mut b = StreamBatch::empty(n);
    b.m = m;
    for local in 0..m {
        let deg = rng.random_range(1..4);
        for _ in 0..deg {
            b.cross_edges
                .push((local, rng.random_range(0..n), rng.random_range(0.2..1.2)));
        }
    }
    for _ in 0..m / 2 {
        let a = rng.random_range(0..m);
        let c = rng.random_range(0..m);
        if a != c {
            b.intra_edges.push((a, c, rng.random_range(0.2..1.2)));
        }
    }
    b
}

/// Criterion 3: budget agreement with dense SVD on >= 100 random
/// (graph, batch) pairs, and threshold scans matching an exhaustive dense
/// per-arrival scan with first-failure semantics.
#[test]
fn criterion_3_budget_brute_force() {
    let t0 = Instant::now();
    let mut rng = ChaCha20Rng::seed_from_u64(0xC3);
    let solver = SolverConfig::default();
    let mut worst_rel: f64 = 0.0;
    let pairs = 104;
    for case in 0..pairs {
        let n = rng.random_range(8..200);
        let m = rng.random_range(1..8);
        let g0 = random_graph(n, 2 * n, &mut rng);
        let g1 = apply_batch(&g0, &random_batch(n, m, &mut rng)).unwrap();
        let method = match case % 4 {
            0 => Method::Le,
            1 => Method::Arope,
            2 => Method::Netmf,
            _ => Method::Grarep,
        };
        let mut spec = TargetSpec::<f64>::new(method, 2);
        match method {
            Method::Netmf => {
                spec.netmf_rank = n.min(8);
                spec.netmf_window = 3;
            }
            Method::Grarep => {
                spec.grarep_order = 2;
            }
            _ => {}
        }
        let rep0 = drift_target(&g0, &spec, &solver).unwrap();
        let rep1 = drift_target(&g1, &spec, &solver).unwrap();
        let d0 = rep_to_dense(&rep0);
        let d1 = rep_to_dense(&rep1);
        let delta = (d1.view((0, 0), (n, n)) - &d0).into_owned();
        let e1 = d1.view((0, n), (n, m)).into_owned();
        let e2 = d1.view((n, n), (m, m)).into_owned();
        let dense_lhs = sigma_max(&delta) + 2.0 * sigma_max(&e1) + sigma_max(&e2);
        // sigma pair from the dense spectrum of the pre-arrival target.
        let (s1, s2) = if rep0.is_symmetric() {
            let eig = d0.clone().symmetric_eigen();
            let mut v: Vec<f64> = eig.eigenvalues.iter().copied().collect();
            v.sort_by(|a, b| b.partial_cmp(a).unwrap());
            (v[0], v[1])
        } else {
            let svd = d0.clone().svd(false, false);
            let mut v: Vec<f64> = svd.singular_values.iter().copied().collect();
            v.sort_by(|a, b| b.partial_cmp(a).unwrap());
            (v[0], v[1])
        };
        let ops = BlockOps::new(&rep0, &rep1, n).unwrap();
        let (verdict, _) = drift_check_ops(
            &ops.delta_op(),
            &ops.e1_op(),
            &ops.e2_op(),
            s1,
            s2,
            &DriftCheckConfig::default(),
        );
        let rel = (verdict.lhs - dense_lhs).abs() / dense_lhs.max(1e-9);
        worst_rel = worst_rel.max(rel);
        assert!(
            rel < 1e-6,
            "case {} ({:?}): lhs {} vs dense {} (rel {:.3e})",
            case,
            method,
            verdict.lhs,
            dense_lhs,
            rel
        );
        let dense_ok = dense_lhs < s1 - s2;
        assert_eq!(verdict.ok, dense_ok, "case {} verdict mismatch", case);
    }

    // Threshold scans against the exhaustive dense scan.
    let mut scans = 0;
    for case in 0..8 {
        let total = rng.random_range(20..30);
        let n = rng.random_range(8..12);
        let g = random_graph(total, 2 * total, &mut rng);
        let labels = LabelTable::new(vec![Vec::new(); total], 0).unwrap();
        let scenario = make_scenario(&g, &labels, n, ArrivalOrder::FileOrder, 3).unwrap();
        let method = if case % 2 == 0 { Method::Arope } else { Method::Le };
        let spec = TargetSpec::<f64>::new(method, 2);
        let report = restart_threshold(
            &scenario,
            &spec,
            &ThresholdConfig {
                m_max: 16,
                ..Default::default()
            },
        )
        .unwrap();
        // Dense first-failure scan.
        let rep0 = drift_target(&scenario.initial, &spec, &solver).unwrap();
        let d0 = rep_to_dense(&rep0);
        let eig = d0.clone().symmetric_eigen();
        let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        vals.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let gap = vals[0] - vals[1];
        let steps = scenario.single_node_steps();
        let mut g_run = scenario.initial.clone();
        let mut dense_m0 = 16.min(steps.len());
        for (idx, step) in steps.iter().take(16).enumerate() {
            let m = idx + 1;
            g_run = apply_batch(&g_run, step).unwrap();
            let rep1 = drift_target(&g_run, &spec, &solver).unwrap();
            let dm = rep_to_dense(&rep1);
            let delta = (dm.view((0, 0), (n, n)) - &d0).into_owned();
            let e1 = dm.view((0, n), (n, m)).into_owned();
            let e2 = dm.view((n, n), (m, m)).into_owned();
            let lhs = sigma_max(&delta) + 2.0 * sigma_max(&e1) + sigma_max(&e2);
            if !(lhs < gap) {
                dense_m0 = m - 1;
                break;
            }
        }
        assert_eq!(report.m0, dense_m0, "scan case {}", case);
        scans += 1;
    }
    eprintln!(
        "ACCEPTANCE C3 budget-brute-force: PASS — {} pairs (worst rel {:.3e}), {} scans, {:.1}s",
        pairs,
        worst_rel,
        scans,
        t0.elapsed().as_secs_f64()
    );
    assert!(t0.elapsed().as_secs_f64() < 300.0, "C3 runtime budget");
}

fn drift_vectors(
    rep: &TargetRep<'_, f64>,
    count: usize,
    solver: &SolverConfig,
) -> Array2<f64> {
    if rep.is_symmetric() {
        lanczos_eig(rep, count, OrderMode::DescendingAlgebraic, solver)
            .expect("eig")
            .vectors
    } else {
        truncated_svd(rep, count, solver).expect("svd").u
    }
}

/// Criterion 4: at n = 1000 on the benchmark graph, the mean absolute
/// prefix-correlation of the first 128 spectral directions at m = m0 exceeds
/// the mean at m = 5 m0 by at least 0.1, for the AROPE and GraRep targets.
#[test]
fn criterion_4_correlation_drop() {
    let _guard = TIMING_LOCK.lock().unwrap();
    let t0 = Instant::now();
    let data = bench_data();
    let n = 1000;
    let scenario = bench_scenario(n);
    let solver = SolverConfig::with_seed(42);
    for method in [Method::Arope, Method::Grarep] {
        let mut spec = TargetSpec::<f64>::new(method, 128);
        spec.grarep_order = 4;
        let m_cap = if method == Method::Grarep { 192 } else { 400 };
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
        let m0 = report.m0;
        assert!(m0 > 0, "{:?}: m0 = 0 leaves nothing to compare", method);
        let avail = data.graph.n() - n;
        let m_far = (5 * m0).min(avail);
        let count = 128;
        let base = drift_vectors(
            &drift_target(&scenario.initial, &spec, &solver).unwrap(),
            count,
            &solver,
        );
        let mean_at = |m: usize| -> f64 {
            let g_m = scenario.replay_prefix(m).unwrap();
            let rep = drift_target(&g_m, &spec, &solver).unwrap();
            let vecs = drift_vectors(&rep, count, &solver);
            let corr = prefix_correlation(base.view(), vecs.view()).unwrap();
            corr.values.iter().sum::<f64>() / corr.values.len() as f64
        };
        let near = mean_at(m0);
        let far = mean_at(m_far);
        let drop = near - far;
        eprintln!(
            "ACCEPTANCE C4 {:?} ({}): m0={} corr(m0)={:.4} corr({})={:.4} drop={:.4}",
            method, data.source, m0, near, m_far, far, drop
        );
        assert!(
            drop >= 0.1,
            "{:?}: correlation drop {:.4} below 0.1",
            method,
            drop
        );
    }
    eprintln!(
        "ACCEPTANCE C4 correlation-drop: PASS — {:.1}s",
        t0.elapsed().as_secs_f64()
    );
    assert!(t0.elapsed().as_secs_f64() < 1800.0, "C4 runtime budget");
}

/// Criterion 5: sweep ratio bands on the benchmark graph. Micro-F1 ratio of
/// projection vs retrain-both aggregated over the sweep: AROPE >= 0.85,
/// GraRep >= 0.70, NetMF >= 0.70 (NetMF sweep starts at n = 1000), and the
/// projection embedding time is at most 25% of the retrain time for AROPE
/// and NetMF.
#[test]
fn criterion_5_sweep_ratio_bands() {
    let _guard = TIMING_LOCK.lock().unwrap();
    let t0 = Instant::now();
    let data = bench_data();
    struct Band {
        method: Method,
        ns: Vec<usize>,
        micro_floor: f64,
        time_ceiling: Option<f64>,
        m_max: usize,
    }
    let bands = [
        Band {
            method: Method::Arope,
            ns: (500..=2500).step_by(100).collect(),
            micro_floor: 0.85,
            time_ceiling: Some(0.25),
            m_max: 1024,
        },
        Band {
            method: Method::Grarep,
            ns: (500..=2500).step_by(100).collect(),
            micro_floor: 0.70,
            time_ceiling: None,
            m_max: 192,
        },
        Band {
            method: Method::Netmf,
            ns: (1000..=2500).step_by(100).collect(),
            micro_floor: 0.70,
            time_ceiling: Some(0.25),
            m_max: 48,
        },
    ];
    for band in &bands {
        let mut spec = TargetSpec::<f64>::new(band.method, 128);
        spec.grarep_order = 4;
        let outcomes: Vec<(usize, sip_core::eval::ModesOutcome<f64>)> = {
            use rayon::prelude::*;
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(2)
                .build()
                .unwrap();
            pool.install(|| {
                band.ns
                    .par_iter()
                    .map(|&n| {
                        let scenario = bench_scenario(n);
                        let mut cfg = ModesConfig::<f64>::default();
                        cfg.threshold = ThresholdConfig {
                            m_max: band.m_max,
                            solver: SolverConfig::with_seed(42),
                            check: Default::default(),
                        };
                        let outcome = run_modes(&scenario, &spec, &cfg).expect("run_modes");
                        (n, outcome)
                    })
                    .collect()
            })
        };
        let used: Vec<&(usize, sip_core::eval::ModesOutcome<f64>)> =
            outcomes.iter().filter(|(_, o)| !o.skipped).collect();
        assert!(
            used.len() * 2 >= band.ns.len(),
            "{:?}: too many skipped sweep points ({} of {})",
            band.method,
            band.ns.len() - used.len(),
            band.ns.len()
        );
        let mean = |f: &dyn Fn(&sip_core::EvalReport64) -> f64, mode: usize| -> f64 {
            let vals: Vec<f64> = used.iter().map(|(_, o)| f(&o.reports[mode])).collect();
            vals.iter().sum::<f64>() / vals.len() as f64
        };
        let micro_ratio = mean(&|r| r.micro_f1, 0) / mean(&|r| r.micro_f1, 2);
        let time_ratio = mean(&|r| r.embed_time_s, 0) / mean(&|r| r.embed_time_s, 2);
        eprintln!(
            "ACCEPTANCE C5 {:?} ({}): {} of {} points, micro ratio {:.4} (floor {}), time ratio {:.4}{}",
            band.method,
            data.source,
            used.len(),
            band.ns.len(),
            micro_ratio,
            band.micro_floor,
            time_ratio,
            band.time_ceiling
                .map(|c| format!(" (ceiling {})", c))
                .unwrap_or_default()
        );
        assert!(
            micro_ratio >= band.micro_floor,
            "{:?}: micro ratio {:.4} under {}",
            band.method,
            micro_ratio,
            band.micro_floor
        );
        if let Some(ceiling) = band.time_ceiling {
            assert!(
                time_ratio <= ceiling,
                "{:?}: time ratio {:.4} over {}",
                band.method,
                time_ratio,
                ceiling
            );
        }
    }
    eprintln!(
        "ACCEPTANCE C5 sweep-ratio-bands: PASS — {:.1}s",
        t0.elapsed().as_secs_f64()
    );
    assert!(t0.elapsed().as_secs_f64() < 7200.0, "C5 runtime budget");
}

/// Criterion 6: single-node generation time scales linearly in n
/// (log-log slope in [0.8, 1.3]) on synthetic graphs of fixed mean degree.
#[test]
fn criterion_6_linear_time_generation() {
    let _guard = TIMING_LOCK.lock().unwrap();
    let t0 = Instant::now();
    let mut points = Vec::new();
    for p in 10..=15 {
        let n: usize = 1 << p;
        let cfg = SynthConfig {
            nodes: n,
            extra_triangles: 0,
            communities: 16,
            mean_degree: 8.0,
            mixing: 0.5,
            hub_exponent: 1.6,
            hub_cap: 64.0,
            second_label_prob: 0.0,
            seed: 9 + p as u64,
        };
        let (g, _, _) = synth_labeled_graph::<f64>(&cfg);
        let spec = TargetSpec::<f64>::new(Method::Arope, 16);
        let solver = SolverConfig::with_seed(7);
        let (_, basis) = fit(&g, &spec, &solver).expect("fit");
        // One arriving node with four hub-ish attachments.
        let mut b = StreamBatch::empty(n);
        b.m = 1;
        for j in 0..4 {
            b.cross_edges.push((0, (j * 37) % n, 1.0));
        }
        let g1 = apply_batch(&g, &b).unwrap();
        let gen_cfg = GenerateConfig::default();
        // Warm up, then repeat until the measured block is long enough for
        // the clock.
        let mut basis_local = basis;
        let _ = generate(&mut basis_local, &g1, false, &gen_cfg).unwrap();
        let mut reps = 1usize;
        loop {
            let t = Instant::now();
            for _ in 0..reps {
                let out = generate(&mut basis_local, &g1, false, &gen_cfg).unwrap();
                std::hint::black_box(out.embedding.data[(0, 0)]);
            }
            if t.elapsed().as_secs_f64() > 0.05 || reps >= 1 << 16 {
                break;
            }
            reps *= 2;
        }
        // Median of three measured blocks.
        let mut samples = Vec::with_capacity(3);
        for _ in 0..3 {
            let t = Instant::now();
            for _ in 0..reps {
                let out = generate(&mut basis_local, &g1, false, &gen_cfg).unwrap();
                std::hint::black_box(out.embedding.data[(0, 0)]);
            }
            samples.push(t.elapsed().as_secs_f64() / reps as f64);
        }
        samples.sort_by(|a, b| a.partial_cmp(b).unwrap());
        points.push((n as f64, samples[1]));
    }
    // Least-squares slope in log-log space.
    let logs: Vec<(f64, f64)> = points.iter().map(|&(n, t)| (n.ln(), t.ln())).collect();
    let k = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / k;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / k;
    let slope = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>()
        / logs.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum::<f64>();
    for (n, t) in &points {
        eprintln!("ACCEPTANCE C6 point: n={} t={:.2e}s", *n as usize, t);
    }
    eprintln!(
        "ACCEPTANCE C6 linear-time-generation: slope {:.3} (band [0.8, 1.3]), {:.1}s",
        slope,
        t0.elapsed().as_secs_f64()
    );
    assert!(
        (0.8..=1.3).contains(&slope),
        "log-log slope {:.3} outside [0.8, 1.3]",
        slope
    );
    eprintln!("ACCEPTANCE C6 linear-time-generation: PASS");
    assert!(t0.elapsed().as_secs_f64() < 600.0, "C6 runtime budget");
}

/// Criterion 7: fixed-seed end-to-end CLI runs produce byte-identical state
/// files and CSVs; state round-trip is bit-exact.
#[test]
fn criterion_7_cli_determinism_and_roundtrip() {
    let t0 = Instant::now();
    let bin = env!("CARGO_BIN_EXE_sip");
    let run_all = |dir: &std::path::Path| {
        let edges = dir.join("edges.tsv");
        let labels = dir.join("labels.tsv");
        let run = |args: &[&str]| {
            let out = std::process::Command::new(bin)
                .args(args)
                .current_dir(dir)
                .output()
                .expect("spawn sip");
            assert!(
                out.status.success(),
                "sip {:?} failed: {}",
                args,
                String::from_utf8_lossy(&out.stderr)
            );
        };
        run(&[
            "synth",
            "--out-edges",
            edges.to_str().unwrap(),
            "--out-labels",
            labels.to_str().unwrap(),
            "--nodes",
            "300",
            "--communities",
            "6",
            "--mean-degree",
            "10",
            "--hub-exponent",
            "1.3",
            "--hub-cap",
            "200",
            "--mixing",
            "0.5",
            "--extra-triangles",
            "2",
            "--seed",
            "5",
        ]);
        run(&[
            "fit",
            "--input",
            edges.to_str().unwrap(),
            "--method",
            "arope",
            "--dim",
            "16",
            "--n",
            "250",
            "--order",
            "connected",
            "--seed",
            "11",
            "--state",
            "arope.state",
            "--out",
            "emb.csv",
        ]);
        // Batch: two new nodes linked to fitted tokens (read back from the
        // embedding CSV, since connected order reorders the prefix).
        let emb = std::fs::read_to_string(dir.join("emb.csv")).unwrap();
        let fitted: Vec<&str> = emb
            .lines()
            .skip(1)
            .map(|l| l.split(',').next().unwrap())
            .collect();
        std::fs::write(
            dir.join("batch.tsv"),
            format!(
                "newA\t{}\nnewA\t{}\nnewB\tnewA\nnewB\t{}\n",
                fitted[0], fitted[1], fitted[2]
            ),
        )
        .unwrap();
        run(&[
            "generate",
            "--state",
            "arope.state",
            "--batch",
            "batch.tsv",
            "--check",
            "--out",
            "newemb.csv",
            "--verdict",
            "verdict.json",
        ]);
        run(&[
            "threshold",
            "--input",
            edges.to_str().unwrap(),
            "--method",
            "arope",
            "--dim",
            "16",
            "--n",
            "250",
            "--order",
            "connected",
            "--seed",
            "11",
            "--m-max",
            "20",
            "--out",
            "thr.json",
        ]);
        run(&[
            "heatmap",
            "--input",
            edges.to_str().unwrap(),
            "--method",
            "arope",
            "--dim",
            "16",
            "--n",
            "250",
            "--order",
            "connected",
            "--seed",
            "11",
            "--m-grid",
            "0,10",
            "--eig-count",
            "12",
            "--m-max",
            "20",
            "--out",
            "heat.csv",
        ]);
    };
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    run_all(dir_a.path());
    run_all(dir_b.path());
    for name in [
        "edges.tsv",
        "labels.tsv",
        "arope.state",
        "emb.csv",
        "newemb.csv",
        "verdict.json",
        "thr.json",
        "heat.csv",
    ] {
        let a = std::fs::read(dir_a.path().join(name)).unwrap();
        let b = std::fs::read(dir_b.path().join(name)).unwrap();
        assert_eq!(a, b, "{} differs between identical runs", name);
    }
    // State round-trip is bit-exact.
    let state_path = dir_a.path().join("arope.state");
    let state = sip_cli::state::StateFile::load(&state_path).unwrap();
    let copy_path = dir_a.path().join("copy.state");
    state.save(&copy_path).unwrap();
    let original = std::fs::read(&state_path).unwrap();
    let copied = std::fs::read(&copy_path).unwrap();
    assert_eq!(original, copied, "state round-trip not bit-exact");
    eprintln!(
        "ACCEPTANCE C7 determinism-and-roundtrip: PASS — {:.1}s",
        t0.elapsed().as_secs_f64()
    );
}
