//! The space-drift judgement: perturbation block split, the spectral budget
//! `rho_dM + 2 rho_E1 + rho_E2 < sigma_1 - sigma_2`, the subspace-rotation
//! norm bound, and the restart-threshold scan.

use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::graph::{apply_batch, StreamScenario};
use crate::num::Real;
use crate::spectral::{spectral_norm, LinOp, NormConfig, NormEstimate, SolverConfig, SparseMatrix};
use crate::target::{drift_spectrum, drift_target, TargetRep, TargetSpec};

/// Materialized perturbation blocks: `delta_m` is the old-old change,
/// `e1` the old-new cross block, `e2` the new-new block.
#[derive(Clone, Debug)]
pub struct PerturbationSplit<F> {
    pub n: usize,
    pub m: usize,
    pub delta_m: SparseMatrix<F>,
    pub e1: SparseMatrix<F>,
    pub e2: SparseMatrix<F>,
}

/// Materialize the three perturbation blocks from row extractors over the
/// old (`n`-dim) and new (`n+m`-dim) target matrices.
pub fn split_perturbation<F, R0, R1>(
    m0_row: R0,
    m1_row: R1,
    n: usize,
    m: usize,
) -> Result<PerturbationSplit<F>>
where
    F: Real,
    R0: Fn(usize) -> Vec<F>,
    R1: Fn(usize) -> Vec<F>,
{
    let n1 = n + m;
    let mut delta = Vec::new();
    let mut e1 = Vec::new();
    let mut e2 = Vec::new();
    for i in 0..n {
        let new_row = m1_row(i);
        let old_row = m0_row(i);
        if new_row.len() != n1 || old_row.len() != n {
            return Err(Error::DimMismatch {
                what: "split row",
                left: new_row.len(),
                right: n1,
            });
        }
        for j in 0..n {
            let v = new_row[j] - old_row[j];
            if v != F::zero() {
                delta.push((i, j, v));
            }
        }
        for j in n..n1 {
            let v = new_row[j];
            if v != F::zero() {
                e1.push((i, j - n, v));
            }
        }
    }
    for i in n..n1 {
        let new_row = m1_row(i);
        if new_row.len() != n1 {
            return Err(Error::DimMismatch {
                what: "split row",
                left: new_row.len(),
                right: n1,
            });
        }
        for j in n..n1 {
            let v = new_row[j];
            if v != F::zero() {
                e2.push((i - n, j - n, v));
            }
        }
    }
    Ok(PerturbationSplit {
        n,
        m,
        delta_m: SparseMatrix::from_triples(n, n, &delta),
        e1: SparseMatrix::from_triples(n, m, &e1),
        e2: SparseMatrix::from_triples(m, m, &e2),
    })
}

/// The judged budget and its pieces.
#[derive(Clone, Debug)]
pub struct DriftVerdict<F> {
    pub rho_dm: F,
    pub rho_e1: F,
    pub rho_e2: F,
    /// `rho_dm + 2 rho_e1 + rho_e2`.
    pub lhs: F,
    pub sigma1: F,
    pub sigma2: F,
    /// `sigma1 - sigma2`.
    pub gap: F,
    /// Budget holds: `lhs < gap`.
    pub ok: bool,
    /// gamma = rho_e1 (the off-diagonal coupling norm).
    pub gamma: F,
    /// delta = gap - rho_dm - rho_e2.
    pub delta: F,
    /// `2 gamma / delta` when the rotation exists (delta > 2 gamma);
    /// bounds the tangent of the largest canonical angle between the
    /// original and perturbed embedding subspaces.
    pub p_bound: Option<F>,
    /// `ok` recomputed with every norm inflated by its estimator error.
    pub conservative_ok: bool,
    /// Any norm estimator stopped before reaching its tolerance.
    pub norm_warning: bool,
}

impl<F: Real> DriftVerdict<F> {
    /// JSON with finite reals rendered as decimal strings.
    pub fn to_json(&self) -> Value {
        fn num<F: Real>(v: F) -> Value {
            Value::String(format!("{}", v))
        }
        let mut map = Map::new();
        map.insert("rho_dm".into(), num(self.rho_dm));
        map.insert("rho_e1".into(), num(self.rho_e1));
        map.insert("rho_e2".into(), num(self.rho_e2));
        map.insert("lhs".into(), num(self.lhs));
        map.insert("sigma1".into(), num(self.sigma1));
        map.insert("sigma2".into(), num(self.sigma2));
        map.insert("gap".into(), num(self.gap));
        map.insert("ok".into(), Value::Bool(self.ok));
        map.insert("gamma".into(), num(self.gamma));
        map.insert("delta".into(), num(self.delta));
        map.insert(
            "p_bound".into(),
            match self.p_bound {
                Some(b) => num(b),
                None => Value::Null,
            },
        );
        map.insert("conservative_ok".into(), Value::Bool(self.conservative_ok));
        map.insert("norm_warning".into(), Value::Bool(self.norm_warning));
        Value::Object(map)
    }
}

/// Optional warm-start vectors threaded through a scan.
#[derive(Clone, Debug, Default)]
pub struct WarmStarts<F> {
    pub delta: Option<Vec<F>>,
    pub e1: Option<Vec<F>>,
    pub e2: Option<Vec<F>>,
}

#[derive(Clone, Debug)]
pub struct DriftCheckConfig<F> {
    pub norm_tol: f64,
    pub norm_max_iter: usize,
    pub seed: u64,
    pub warm: WarmStarts<F>,
}

impl<F> Default for DriftCheckConfig<F> {
    fn default() -> Self {
        DriftCheckConfig {
            norm_tol: 1e-6,
            norm_max_iter: 600,
            seed: 42,
            warm: WarmStarts {
                delta: None,
                e1: None,
                e2: None,
            },
        }
    }
}

fn estimate<F: Real>(
    op: &dyn LinOp<F>,
    cfg: &DriftCheckConfig<F>,
    warm: &Option<Vec<F>>,
    salt: u64,
) -> NormEstimate<F> {
    spectral_norm(
        op,
        &NormConfig {
            tol: cfg.norm_tol,
            max_iter: cfg.norm_max_iter,
            seed: cfg.seed ^ salt,
            warm_start: warm.clone(),
        },
    )
}

/// Judge the budget from three block operators and the top-two spectrum of
/// the pre-arrival target. Returns the verdict and the final norm vectors
/// for warm-starting the next step of a scan.
pub fn drift_check_ops<F: Real>(
    delta_op: &dyn LinOp<F>,
    e1_op: &dyn LinOp<F>,
    e2_op: &dyn LinOp<F>,
    sigma1: F,
    sigma2: F,
    cfg: &DriftCheckConfig<F>,
) -> (DriftVerdict<F>, WarmStarts<F>) {
    let est_dm = estimate(delta_op, cfg, &cfg.warm.delta, 0x0d);
    let est_e1 = estimate(e1_op, cfg, &cfg.warm.e1, 0xe1);
    let est_e2 = estimate(e2_op, cfg, &cfg.warm.e2, 0xe2);
    let two = F::of(2.0);
    let lhs = est_dm.value + two * est_e1.value + est_e2.value;
    let gap = sigma1 - sigma2;
    let gamma = est_e1.value;
    let delta = gap - est_dm.value - est_e2.value;
    let ok = lhs < gap;
    let p_bound = if delta > two * gamma {
        Some(two * gamma / delta)
    } else {
        None
    };
    // Conservative reading: inflate each norm by a few multiples of the
    // estimator's own error indicator before re-judging.
    let inflate = |e: &NormEstimate<F>| {
        let slack = e.rel_err.max(F::of(cfg.norm_tol)) * F::of(4.0);
        e.value * (F::one() + slack)
    };
    let cons_lhs = inflate(&est_dm) + two * inflate(&est_e1) + inflate(&est_e2);
    let verdict = DriftVerdict {
        rho_dm: est_dm.value,
        rho_e1: est_e1.value,
        rho_e2: est_e2.value,
        lhs,
        sigma1,
        sigma2,
        gap,
        ok,
        gamma,
        delta,
        p_bound,
        conservative_ok: cons_lhs < gap,
        norm_warning: !(est_dm.converged && est_e1.converged && est_e2.converged),
    };
    let warm = WarmStarts {
        delta: Some(est_dm.vector),
        e1: Some(est_e1.vector),
        e2: Some(est_e2.vector),
    };
    (verdict, warm)
}

/// Judge the budget from materialized blocks.
pub fn drift_check<F: Real>(
    split: &PerturbationSplit<F>,
    sigma1: F,
    sigma2: F,
    cfg: &DriftCheckConfig<F>,
) -> DriftVerdict<F> {
    drift_check_ops(&split.delta_m, &split.e1, &split.e2, sigma1, sigma2, cfg).0
}

/// `2 gamma / delta` when the rotation matrix exists.
pub fn p_bound<F: Real>(verdict: &DriftVerdict<F>) -> Option<F> {
    verdict.p_bound
}

/// Block operators over a pair of target representations, avoiding any
/// materialization. `delta = M1[0:n,0:n] - M0`, `e1 = M1[0:n, n:]`,
/// `e2 = M1[n:, n:]`.
pub struct BlockOps<'a, 'g, F: Real> {
    m0: &'a TargetRep<'g, F>,
    m1: &'a TargetRep<'g, F>,
    n: usize,
}

impl<'a, 'g, F: Real> BlockOps<'a, 'g, F> {
    pub fn new(m0: &'a TargetRep<'g, F>, m1: &'a TargetRep<'g, F>, n: usize) -> Result<Self> {
        if m0.dim() != n {
            return Err(Error::DimMismatch {
                what: "old target",
                left: m0.dim(),
                right: n,
            });
        }
        if m1.dim() < n {
            return Err(Error::DimMismatch {
                what: "new target",
                left: m1.dim(),
                right: n,
            });
        }
        Ok(BlockOps { m0, m1, n })
    }

    pub fn m(&self) -> usize {
        self.m1.dim() - self.n
    }

    pub fn delta_op(&self) -> DeltaBlock<'_, 'g, F> {
        DeltaBlock { ops: self }
    }

    pub fn e1_op(&self) -> CrossBlock<'_, 'g, F> {
        CrossBlock { ops: self }
    }

    pub fn e2_op(&self) -> TailBlock<'_, 'g, F> {
        TailBlock { ops: self }
    }
}

pub struct DeltaBlock<'a, 'g, F: Real> {
    ops: &'a BlockOps<'a, 'g, F>,
}

impl<F: Real> LinOp<F> for DeltaBlock<'_, '_, F> {
    fn rows(&self) -> usize {
        self.ops.n
    }

    fn cols(&self) -> usize {
        self.ops.n
    }

    fn apply_into(&self, x: &[F], y: &mut [F]) {
        let n = self.ops.n;
        let n1 = self.ops.m1.dim();
        let mut pad = vec![F::zero(); n1];
        pad[..n].copy_from_slice(x);
        let full = self.ops.m1.apply(&pad);
        let old = self.ops.m0.apply(x);
        for i in 0..n {
            y[i] = full[i] - old[i];
        }
    }

    fn apply_t_into(&self, x: &[F], y: &mut [F]) {
        let n = self.ops.n;
        let n1 = self.ops.m1.dim();
        let mut pad = vec![F::zero(); n1];
        pad[..n].copy_from_slice(x);
        let full = self.ops.m1.apply_t(&pad);
        let old = self.ops.m0.apply_t(x);
        for i in 0..n {
            y[i] = full[i] - old[i];
        }
    }
}

pub struct CrossBlock<'a, 'g, F: Real> {
    ops: &'a BlockOps<'a, 'g, F>,
}

impl<F: Real> LinOp<F> for CrossBlock<'_, '_, F> {
    fn rows(&self) -> usize {
        self.ops.n
    }

    fn cols(&self) -> usize {
        self.ops.m()
    }

    fn apply_into(&self, x: &[F], y: &mut [F]) {
        let n = self.ops.n;
        let n1 = self.ops.m1.dim();
        let mut pad = vec![F::zero(); n1];
        pad[n..].copy_from_slice(x);
        let full = self.ops.m1.apply(&pad);
        y.copy_from_slice(&full[..n]);
    }

    fn apply_t_into(&self, x: &[F], y: &mut [F]) {
        let n = self.ops.n;
        let n1 = self.ops.m1.dim();
        let mut pad = vec![F::zero(); n1];
        pad[..n].copy_from_slice(x);
        let full = self.ops.m1.apply_t(&pad);
        y.copy_from_slice(&full[n..]);
    }
}

pub struct TailBlock<'a, 'g, F: Real> {
    ops: &'a BlockOps<'a, 'g, F>,
}

impl<F: Real> LinOp<F> for TailBlock<'_, '_, F> {
    fn rows(&self) -> usize {
        self.ops.m()
    }

    fn cols(&self) -> usize {
        self.ops.m()
    }

    fn apply_into(&self, x: &[F], y: &mut [F]) {
        let n = self.ops.n;
        let n1 = self.ops.m1.dim();
        let mut pad = vec![F::zero(); n1];
        pad[n..].copy_from_slice(x);
        let full = self.ops.m1.apply(&pad);
        y.copy_from_slice(&full[n..]);
    }

    fn apply_t_into(&self, x: &[F], y: &mut [F]) {
        let n = self.ops.n;
        let n1 = self.ops.m1.dim();
        let mut pad = vec![F::zero(); n1];
        pad[n..].copy_from_slice(x);
        let full = self.ops.m1.apply_t(&pad);
        y.copy_from_slice(&full[n..]);
    }
}

/// One row of a threshold-scan trace.
#[derive(Clone, Debug)]
pub struct ThresholdStep<F> {
    pub m: usize,
    pub verdict: DriftVerdict<F>,
}

#[derive(Clone, Debug)]
pub struct ThresholdReport<F> {
    /// Largest contiguous arrival count for which the budget held at every
    /// prefix (first-failure semantics). 0 when the first arrival fails.
    pub m0: usize,
    /// The scan ran out of `m_max` (or stream) before any failure.
    pub capped: bool,
    pub sigma1: F,
    pub sigma2: F,
    pub trace: Vec<ThresholdStep<F>>,
}

#[derive(Clone, Debug)]
pub struct ThresholdConfig<F> {
    pub m_max: usize,
    pub solver: SolverConfig,
    pub check: DriftCheckConfig<F>,
}

impl<F> Default for ThresholdConfig<F> {
    fn default() -> Self {
        ThresholdConfig {
            m_max: 1024,
            solver: SolverConfig::default(),
            check: DriftCheckConfig::default(),
        }
    }
}

/// Extend a warm-start vector by one entry when the block gains a column,
/// keeping the scan deterministic.
fn grow_warm<F: Real>(v: Option<Vec<F>>, len: usize) -> Option<Vec<F>> {
    v.map(|mut v| {
        let fill = if v.is_empty() {
            F::one()
        } else {
            let norm = crate::num::norm2(&v);
            (norm / F::from_usize_lossy(v.len())).max(F::of(1e-6))
        };
        while v.len() < len {
            v.push(fill);
        }
        v.truncate(len);
        v
    })
}

/// Scan arrivals one node at a time against the fixed pre-arrival target,
/// recomputing the block split at every step, and report the largest prefix
/// where the budget holds. The scan is capped at `m_max` steps.
pub fn restart_threshold<F: Real>(
    scenario: &StreamScenario<F>,
    spec: &TargetSpec<F>,
    cfg: &ThresholdConfig<F>,
) -> Result<ThresholdReport<F>> {
    let steps = scenario.single_node_steps();
    if steps.is_empty() {
        return Err(Error::EmptyStream);
    }
    let n = scenario.initial.n();
    let g0 = &scenario.initial;
    let m0_rep = drift_target(g0, spec, &cfg.solver)?;
    let (sigma1, sigma2) = drift_spectrum(&m0_rep, &cfg.solver)?;

    let mut g = scenario.initial.clone();
    let mut trace = Vec::new();
    let mut warm = cfg.check.warm.clone();
    let limit = cfg.m_max.min(steps.len());
    for (idx, step) in steps.iter().take(limit).enumerate() {
        let m = idx + 1;
        g = apply_batch(&g, step)?;
        let m1_rep = drift_target(&g, spec, &cfg.solver)?;
        let ops = BlockOps::new(&m0_rep, &m1_rep, n)?;
        let mut check_cfg = cfg.check.clone();
        check_cfg.warm = WarmStarts {
            delta: warm.delta.take(),
            e1: grow_warm(warm.e1.take(), m),
            e2: grow_warm(warm.e2.take(), m),
        };
        let (verdict, new_warm) =
            drift_check_ops(&ops.delta_op(), &ops.e1_op(), &ops.e2_op(), sigma1, sigma2, &check_cfg);
        let ok = verdict.ok;
        trace.push(ThresholdStep { m, verdict });
        if !ok {
            return Ok(ThresholdReport {
                m0: m - 1,
                capped: false,
                sigma1,
                sigma2,
                trace,
            });
        }
        warm = new_warm;
    }
    Ok(ThresholdReport {
        m0: limit,
        capped: limit < steps.len(),
        sigma1,
        sigma2,
        trace,
    })
}
