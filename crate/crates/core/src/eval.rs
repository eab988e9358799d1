//! Node-classification protocol: one-vs-rest logistic models on the initial
//! embeddings, new-node evaluation under three verification modes, and
//! micro/macro-F1 with per-mode timings and ratios.

use std::time::Instant;

use ndarray::{Array2, ArrayView2};
use serde::Serialize;

use crate::drift::{restart_threshold, ThresholdConfig};
use crate::error::{Error, Result};
use crate::graph::{LabelTable, StreamScenario};
use crate::num::Real;
use crate::project::{fit, generate, EmbeddingMatrix, GenerateConfig};
use crate::spectral::{spectral_norm, LinOp, NormConfig};
use crate::target::TargetSpec;

#[derive(Clone, Debug)]
pub struct TrainConfig<F> {
    /// L2 penalty strength on non-bias weights (sum-loss objective).
    pub l2: F,
    pub max_iter: usize,
    /// Stop when the gradient sup-norm falls below this.
    pub tol: F,
    pub seed: u64,
}

impl<F: Real> Default for TrainConfig<F> {
    fn default() -> Self {
        TrainConfig {
            l2: F::one(),
            max_iter: 1000,
            tol: F::of(1e-6),
            seed: 42,
        }
    }
}

/// One-vs-rest logistic classifier; weights are (d+1) x L with the bias in
/// the last row. Bias is unregularized.
#[derive(Clone, Debug)]
pub struct OvRClassifier<F> {
    pub weights: Array2<F>,
    pub label_count: usize,
    /// Labels with zero positive examples, pinned to all-negative output.
    pub zero_positive_labels: Vec<usize>,
}

struct FeaturesOp<'a, F>(&'a Array2<F>);

impl<F: Real> LinOp<F> for FeaturesOp<'_, F> {
    fn rows(&self) -> usize {
        self.0.nrows()
    }
    fn cols(&self) -> usize {
        self.0.ncols()
    }
    fn apply_into(&self, x: &[F], y: &mut [F]) {
        for (i, row) in self.0.rows().into_iter().enumerate() {
            let mut acc = F::zero();
            for (a, &b) in row.iter().zip(x.iter()) {
                acc += *a * b;
            }
            y[i] = acc;
        }
    }
    fn apply_t_into(&self, x: &[F], y: &mut [F]) {
        for v in y.iter_mut() {
            *v = F::zero();
        }
        for (i, row) in self.0.rows().into_iter().enumerate() {
            let xi = x[i];
            for (a, yv) in row.iter().zip(y.iter_mut()) {
                *yv += *a * xi;
            }
        }
    }
}

fn sigmoid<F: Real>(z: F) -> F {
    if z >= F::zero() {
        F::one() / (F::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (F::one() + e)
    }
}

/// Train L independent binary logistic models by Nesterov-accelerated
/// full-batch gradient descent. Deterministic: zero initialization, seeded
/// Lipschitz estimation, fixed iteration order.
pub fn train_ovr<F: Real>(
    x: ArrayView2<'_, F>,
    labels: &LabelTable,
    cfg: &TrainConfig<F>,
) -> Result<OvRClassifier<F>> {
    let n = x.nrows();
    if labels.node_count() != n {
        return Err(Error::DimMismatch {
            what: "training labels",
            left: labels.node_count(),
            right: n,
        });
    }
    if n == 0 {
        return Err(Error::invalid("X", "no training rows"));
    }
    let d = x.ncols();
    let l_count = labels.label_count();
    // Features with the bias column appended.
    let mut xb = Array2::<F>::zeros((n, d + 1));
    for i in 0..n {
        for j in 0..d {
            xb[(i, j)] = x[(i, j)];
        }
        xb[(i, d)] = F::one();
    }
    // 0/1 targets per label.
    let mut y = Array2::<F>::zeros((n, l_count));
    let mut positives = vec![0usize; l_count];
    for i in 0..n {
        for &l in labels.labels_of(i) {
            y[(i, l)] = F::one();
            positives[l] += 1;
        }
    }
    let zero_positive_labels: Vec<usize> = (0..l_count).filter(|&l| positives[l] == 0).collect();

    let mut weights = Array2::<F>::zeros((d + 1, l_count));
    if l_count > 0 {
        // Lipschitz constant of the summed logistic loss gradient:
        // 0.25 ||Xb||_2^2 plus the ridge term.
        let norm_est = spectral_norm(
            &FeaturesOp(&xb),
            &NormConfig {
                tol: 1e-4,
                max_iter: 200,
                seed: cfg.seed,
                warm_start: None,
            },
        );
        let lip = F::of(0.25) * norm_est.value * norm_est.value + cfg.l2;
        let step = F::one() / lip;
        let kappa = (lip / cfg.l2.max(F::of(1e-12))).max(F::one());
        let sk = kappa.sqrt();
        let momentum = (sk - F::one()) / (sk + F::one());

        let mut w = weights.clone();
        let mut w_prev = weights.clone();
        let mut look = weights.clone();
        for _ in 0..cfg.max_iter {
            // Gradient at the lookahead point: Xb^T (sigma(Xb W) - Y) + l2 W.
            let z = xb.dot(&look);
            let mut p = z;
            p.mapv_inplace(sigmoid);
            let resid = &p - &y;
            let mut grad = xb.t().dot(&resid);
            for j in 0..l_count {
                for r in 0..d {
                    grad[(r, j)] += cfg.l2 * look[(r, j)];
                }
            }
            let grad_inf = grad.iter().fold(F::zero(), |acc, g| acc.max(g.abs()));
            w_prev.assign(&w);
            w = &look - &(&grad * step);
            if grad_inf <= cfg.tol {
                break;
            }
            look = &w + &((&w - &w_prev) * momentum);
        }
        weights = w;
        // Pin zero-positive labels to a strongly negative constant score.
        for &l in &zero_positive_labels {
            for r in 0..d {
                weights[(r, l)] = F::zero();
            }
            weights[(d, l)] = F::of(-50.0);
        }
    }
    Ok(OvRClassifier {
        weights,
        label_count: l_count,
        zero_positive_labels,
    })
}

impl<F: Real> OvRClassifier<F> {
    pub fn feature_dim(&self) -> usize {
        self.weights.nrows() - 1
    }

    /// Raw scores (n x L).
    pub fn scores(&self, x: ArrayView2<'_, F>) -> Result<Array2<F>> {
        let d = self.feature_dim();
        if x.ncols() != d {
            return Err(Error::DimMismatch {
                what: "prediction features",
                left: x.ncols(),
                right: d,
            });
        }
        let n = x.nrows();
        let mut out = Array2::<F>::zeros((n, self.label_count));
        for i in 0..n {
            for l in 0..self.label_count {
                let mut acc = self.weights[(d, l)];
                for j in 0..d {
                    acc += x[(i, j)] * self.weights[(j, l)];
                }
                out[(i, l)] = acc;
            }
        }
        Ok(out)
    }
}

/// Known-label-count multi-label prediction: node i receives its
/// `k_per_node[i]` highest-scoring labels; ties break toward the lower label
/// id.
pub fn predict_multilabel<F: Real>(
    clf: &OvRClassifier<F>,
    x: ArrayView2<'_, F>,
    k_per_node: &[usize],
) -> Result<LabelTable> {
    let scores = clf.scores(x)?;
    let n = scores.nrows();
    if k_per_node.len() != n {
        return Err(Error::DimMismatch {
            what: "k_per_node",
            left: k_per_node.len(),
            right: n,
        });
    }
    let mut assignments = Vec::with_capacity(n);
    for i in 0..n {
        let k = k_per_node[i];
        if k > clf.label_count {
            return Err(Error::IndexOutOfRange {
                what: "k",
                got: k,
                limit: clf.label_count,
            });
        }
        let mut idx: Vec<usize> = (0..clf.label_count).collect();
        idx.sort_by(|&a, &b| {
            scores[(i, b)]
                .partial_cmp(&scores[(i, a)])
                .expect("finite scores")
                .then(a.cmp(&b))
        });
        idx.truncate(k);
        assignments.push(idx);
    }
    LabelTable::new(assignments, clf.label_count)
}

/// Pooled micro-F1 and unweighted macro-F1 over the label universe; labels
/// with zero support and zero predictions contribute 0 to the macro mean.
pub fn f1_scores<F: Real>(pred: &LabelTable, truth: &LabelTable) -> Result<(F, F)> {
    if pred.node_count() != truth.node_count() {
        return Err(Error::DimMismatch {
            what: "f1 node sets",
            left: pred.node_count(),
            right: truth.node_count(),
        });
    }
    let l_count = pred.label_count().max(truth.label_count());
    let mut tp = vec![0usize; l_count];
    let mut fp = vec![0usize; l_count];
    let mut fneg = vec![0usize; l_count];
    for i in 0..pred.node_count() {
        let p = pred.labels_of(i);
        let t = truth.labels_of(i);
        for &l in p {
            if t.binary_search(&l).is_ok() {
                tp[l] += 1;
            } else {
                fp[l] += 1;
            }
        }
        for &l in t {
            if p.binary_search(&l).is_err() {
                fneg[l] += 1;
            }
        }
    }
    let (tp_all, fp_all, fn_all) = (
        tp.iter().sum::<usize>(),
        fp.iter().sum::<usize>(),
        fneg.iter().sum::<usize>(),
    );
    let f1 = |tp: usize, fp: usize, fneg: usize| -> F {
        let denom = 2 * tp + fp + fneg;
        if denom == 0 {
            F::zero()
        } else {
            F::from_usize_lossy(2 * tp) / F::from_usize_lossy(denom)
        }
    };
    let micro = f1(tp_all, fp_all, fn_all);
    let macro_sum: F = (0..l_count).map(|l| f1(tp[l], fp[l], fneg[l])).sum();
    let macro_f1 = if l_count == 0 {
        F::zero()
    } else {
        macro_sum / F::from_usize_lossy(l_count)
    };
    Ok((micro, macro_f1))
}

/// The three verification modes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalMode {
    /// Projection embeddings, classifier kept.
    SipKeepModel,
    /// Retrained embeddings, classifier kept.
    RetrainEmbedKeepModel,
    /// Retrained embeddings and classifier: the ground-truth reference.
    RetrainBoth,
}

impl EvalMode {
    pub fn name(self) -> &'static str {
        match self {
            EvalMode::SipKeepModel => "sip_keep_model",
            EvalMode::RetrainEmbedKeepModel => "retrain_embed_keep_model",
            EvalMode::RetrainBoth => "retrain_both",
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct EvalReport<F> {
    pub mode: EvalMode,
    pub method: String,
    pub n: usize,
    pub m: usize,
    pub micro_f1: F,
    pub macro_f1: F,
    /// Wall time of embedding acquisition only (model training excluded).
    pub embed_time_s: f64,
    /// Fingerprint of the evaluated embedding rows.
    pub embedding_hash: u64,
}

#[derive(Clone, Debug, Serialize)]
pub struct RatioRow<F> {
    pub micro: Option<F>,
    pub macro_f1: Option<F>,
    pub time: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct ModesOutcome<F> {
    pub m0: usize,
    /// Set when m0 = 0: no reports, no error.
    pub skipped: bool,
    pub reports: Vec<EvalReport<F>>,
    pub ratios: Option<RatioRow<F>>,
}

#[derive(Clone, Debug)]
pub struct ModesConfig<F> {
    pub train: TrainConfig<F>,
    pub generate: GenerateConfig<F>,
    pub threshold: ThresholdConfig<F>,
}

impl<F: Real> Default for ModesConfig<F> {
    fn default() -> Self {
        ModesConfig {
            train: TrainConfig::default(),
            generate: GenerateConfig::default(),
            threshold: ThresholdConfig::default(),
        }
    }
}

fn labeled_rows<F: Real>(
    emb: ArrayView2<'_, F>,
    labels: &LabelTable,
    offset: usize,
) -> (Array2<F>, LabelTable, Vec<usize>) {
    let rows: Vec<usize> = (0..emb.nrows())
        .filter(|&i| labels.is_labeled(offset + i))
        .collect();
    let mut x = Array2::<F>::zeros((rows.len(), emb.ncols()));
    for (out, &i) in rows.iter().enumerate() {
        for j in 0..emb.ncols() {
            x[(out, j)] = emb[(i, j)];
        }
    }
    let idx: Vec<usize> = rows.iter().map(|&i| offset + i).collect();
    let table = labels.select(&idx);
    (x, table, rows)
}

/// Run the full three-mode protocol for one scenario at its threshold m0:
/// fit on the initial n nodes, train the downstream model there, then score
/// the m0 new nodes under projection / retrain-embedding / retrain-both.
pub fn run_modes<F: Real>(
    scenario: &StreamScenario<F>,
    spec: &TargetSpec<F>,
    cfg: &ModesConfig<F>,
) -> Result<ModesOutcome<F>> {
    let n = scenario.initial.n();
    let threshold = restart_threshold(scenario, spec, &cfg.threshold)?;
    let m0 = threshold.m0;
    if m0 == 0 {
        return Ok(ModesOutcome {
            m0,
            skipped: true,
            reports: Vec::new(),
            ratios: None,
        });
    }
    let g1 = scenario.replay_prefix(m0)?;

    // Shared prerequisite: the initial fit and the downstream model.
    let (emb0, mut basis) = fit(&scenario.initial, spec, &cfg.generate.solver)?;
    let (x0, y0, _) = labeled_rows(emb0.data.view(), &scenario.labels, 0);
    let clf0 = train_ovr(x0.view(), &y0, &cfg.train)?;

    // Mode 1: projection, model kept.
    let t = Instant::now();
    let generated = generate(&mut basis, &g1, false, &cfg.generate)?;
    let t1 = t.elapsed().as_secs_f64();
    debug_assert!(!generated.retrained);

    // Modes 2 and 3 share one retrained embedding.
    let t = Instant::now();
    let (emb_full, _basis_full) = fit(&g1, spec, &cfg.generate.solver)?;
    let t23 = t.elapsed().as_secs_f64();
    let tail = emb_full.data.slice(ndarray::s![n.., ..]).to_owned();
    let tail_emb = EmbeddingMatrix {
        method: spec.method,
        data: tail,
    };

    // Evaluation set: labeled new nodes with known label counts.
    let new_labels = scenario.labels.select(&(n..n + m0).collect::<Vec<_>>());
    let eval_rows: Vec<usize> = (0..m0).filter(|&i| new_labels.is_labeled(i)).collect();
    if eval_rows.is_empty() {
        return Err(Error::invalid("labels", "no labeled nodes among arrivals"));
    }
    let truth = new_labels.select(&eval_rows);
    let k_per_node: Vec<usize> = (0..truth.node_count())
        .map(|i| truth.labels_of(i).len())
        .collect();
    let pick = |emb: &EmbeddingMatrix<F>| -> Array2<F> {
        let mut x = Array2::<F>::zeros((eval_rows.len(), emb.dim()));
        for (out, &i) in eval_rows.iter().enumerate() {
            for j in 0..emb.dim() {
                x[(out, j)] = emb.data[(i, j)];
            }
        }
        x
    };

    let x_sip = pick(&generated.embedding);
    let x_retrain = pick(&tail_emb);

    // Mode 3 classifier: retrained on the first n rows of the new embedding.
    let head = emb_full.data.slice(ndarray::s![..n, ..]).to_owned();
    let (x0r, y0r, _) = labeled_rows(head.view(), &scenario.labels, 0);
    let clf3 = train_ovr(x0r.view(), &y0r, &cfg.train)?;

    let mut reports = Vec::with_capacity(3);
    for (mode, x, clf, time, hash) in [
        (
            EvalMode::SipKeepModel,
            &x_sip,
            &clf0,
            t1,
            generated.embedding.content_hash(),
        ),
        (
            EvalMode::RetrainEmbedKeepModel,
            &x_retrain,
            &clf0,
            t23,
            tail_emb.content_hash(),
        ),
        (
            EvalMode::RetrainBoth,
            &x_retrain,
            &clf3,
            t23,
            tail_emb.content_hash(),
        ),
    ] {
        let pred = predict_multilabel(clf, x.view(), &k_per_node)?;
        let (micro, macro_f1) = f1_scores(&pred, &truth)?;
        reports.push(EvalReport {
            mode,
            method: spec.method.name().to_string(),
            n,
            m: m0,
            micro_f1: micro,
            macro_f1,
            embed_time_s: time,
            embedding_hash: hash,
        });
    }
    let ground = &reports[2];
    let ratio = |a: F, b: F| if b > F::zero() { Some(a / b) } else { None };
    let ratios = Some(RatioRow {
        micro: ratio(reports[0].micro_f1, ground.micro_f1),
        macro_f1: ratio(reports[0].macro_f1, ground.macro_f1),
        time: if ground.embed_time_s > 0.0 {
            Some(reports[0].embed_time_s / ground.embed_time_s)
        } else {
            None
        },
    });
    Ok(ModesOutcome {
        m0,
        skipped: false,
        reports,
        ratios,
    })
}
