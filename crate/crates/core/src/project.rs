//! Fitting the four factorization embeddings and generating embeddings for
//! newly arrived nodes by projecting their target rows onto the frozen basis,
//! with the drift judgement gating project-vs-retrain.

use ndarray::{Array2, ArrayView2};

use crate::drift::{drift_check_ops, BlockOps, DriftCheckConfig, DriftVerdict};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::num::Real;
use crate::spectral::{lanczos_eig, truncated_svd, DenseOp, OrderMode, SolverConfig};
use crate::target::{
    deepwalk_filter_over_lambda, drift_spectrum, drift_target, grarep_new_rows, grarep_plp,
    netmf_log_matrix, normalized_laplacian, AropePoly, Method, TargetSpec,
};

/// Row-major node embeddings with their method tag.
#[derive(Clone, Debug)]
pub struct EmbeddingMatrix<F> {
    pub method: Method,
    pub data: Array2<F>,
}

impl<F: Real> EmbeddingMatrix<F> {
    pub fn rows(&self) -> usize {
        self.data.nrows()
    }

    pub fn dim(&self) -> usize {
        self.data.ncols()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// FNV-1a over the bit patterns, for cheap equality fingerprints.
    pub fn content_hash(&self) -> u64 {
        let mut h: u64 = 0xcbf29ce484222325;
        for v in self.data.iter() {
            let bits = v.to_f64_lossy().to_bits();
            for b in bits.to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x100000001b3);
            }
        }
        h
    }
}

#[derive(Clone, Debug)]
pub struct GrarepOrderBasis<F> {
    pub v: Array2<F>,
    pub sigma: Vec<F>,
}

/// Per-method immutable projection state.
#[derive(Clone, Debug)]
pub enum BasisState<F> {
    Le {
        u_d: Array2<F>,
        sigma: Vec<F>,
        /// Eigenvalues below 0.1 replaced by 1 before inversion; the raw
        /// spectrum above stays untouched.
        sigma_clamped: Vec<F>,
    },
    Arope {
        v_d: Array2<F>,
        sigma_d: Vec<F>,
    },
    Grarep {
        orders: Vec<GrarepOrderBasis<F>>,
        beta: F,
    },
    Netmf {
        u_h: Array2<F>,
        lambda_h: Vec<F>,
        v_d: Array2<F>,
        sigma_d: Vec<F>,
        vol: F,
        degrees0: Vec<F>,
    },
}

/// Projection basis plus the context the drift gate needs.
#[derive(Clone, Debug)]
pub struct MethodBasis<F> {
    pub spec: TargetSpec<F>,
    pub n: usize,
    /// Top-two drift spectrum (sigma_1, sigma_2) of the fit-time target.
    pub drift_sigma: (F, F),
    /// Snapshot of the graph the basis was fitted on.
    pub fit_graph: Graph<F>,
    pub state: BasisState<F>,
}

impl<F: Real> MethodBasis<F> {
    pub fn method(&self) -> Method {
        self.spec.method
    }

    /// `(factor, column scale)` pairs such that a target row projects to
    /// `(row . factor) * scale`, one pair per GraRep order, a single pair
    /// otherwise.
    pub fn projection_factors(&self) -> Vec<(ArrayView2<'_, F>, Vec<F>)> {
        match &self.state {
            BasisState::Le {
                u_d, sigma_clamped, ..
            } => vec![(
                u_d.view(),
                sigma_clamped.iter().map(|&s| F::one() / s).collect(),
            )],
            BasisState::Arope { v_d, sigma_d } => vec![(
                v_d.view(),
                sigma_d.iter().map(|&s| F::one() / s.sqrt()).collect(),
            )],
            BasisState::Grarep { orders, .. } => orders
                .iter()
                .map(|o| {
                    (
                        o.v.view(),
                        o.sigma.iter().map(|&s| F::one() / s.sqrt()).collect(),
                    )
                })
                .collect(),
            BasisState::Netmf { v_d, sigma_d, .. } => vec![(
                v_d.view(),
                sigma_d.iter().map(|&s| F::one() / s.sqrt()).collect(),
            )],
        }
    }
}

/// Project one target row onto a basis factor: `(row . factor) * scale`,
/// two thin products and never an inverse.
pub fn project_row<F: Real>(
    row: &[F],
    factor: ArrayView2<'_, F>,
    col_scale: &[F],
) -> Result<Vec<F>> {
    if row.len() != factor.nrows() {
        return Err(Error::DimMismatch {
            what: "projection row",
            left: row.len(),
            right: factor.nrows(),
        });
    }
    if row.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("projection input row"));
    }
    let d = factor.ncols();
    let mut out = vec![F::zero(); d];
    for (i, &r) in row.iter().enumerate() {
        if r != F::zero() {
            for (j, o) in out.iter_mut().enumerate() {
                *o += r * factor[(i, j)];
            }
        }
    }
    for (o, &s) in out.iter_mut().zip(col_scale) {
        *o *= s;
    }
    Ok(out)
}

/// `rows . factor` with per-column scaling, GEMM-backed.
fn project_rows<F: Real>(rows: &Array2<F>, factor: ArrayView2<'_, F>, col_scale: &[F]) -> Array2<F> {
    let mut out = rows.dot(&factor);
    for (j, mut col) in out.columns_mut().into_iter().enumerate() {
        let s = col_scale[j];
        for v in col.iter_mut() {
            *v *= s;
        }
    }
    out
}

fn check_positive_sigma<F: Real>(sigma: &[F], what: &'static str) -> Result<()> {
    if sigma.iter().any(|&s| !(s > F::zero())) {
        return Err(Error::invalid(
            "dim",
            format!("{} target has fewer nonzero singular values than dim", what),
        ));
    }
    Ok(())
}

/// Fit an embedding on `g`, returning the node embeddings and the immutable
/// projection basis (with the drift spectrum of the fit-time target).
pub fn fit<F: Real>(
    g: &Graph<F>,
    spec: &TargetSpec<F>,
    cfg: &SolverConfig,
) -> Result<(EmbeddingMatrix<F>, MethodBasis<F>)> {
    spec.validate()?;
    let n = g.n();
    let d = spec.dim;
    if d > n {
        return Err(Error::RankTooLarge { d, n });
    }
    let (data, state, sigma_pair) = match spec.method {
        Method::Le => {
            let l = normalized_laplacian(g)?;
            let eig = lanczos_eig(&l, d, OrderMode::AscendingMagnitude, cfg)?;
            let sigma_clamped: Vec<F> = eig
                .values
                .iter()
                .map(|&v| if v < F::of(0.1) { F::one() } else { v })
                .collect();
            let rep = drift_target(g, spec, cfg)?;
            let sigma_pair = drift_spectrum(&rep, cfg)?;
            (
                eig.vectors.clone(),
                BasisState::Le {
                    u_d: eig.vectors,
                    sigma: eig.values,
                    sigma_clamped,
                },
                sigma_pair,
            )
        }
        Method::Arope => {
            let op = AropePoly::new(g, &spec.arope_weights);
            let eig = lanczos_eig(&op, d, OrderMode::DescendingMagnitude, cfg)?;
            let sigma_d: Vec<F> = eig.values.iter().map(|&l| l.abs()).collect();
            check_positive_sigma(&sigma_d, "AROPE")?;
            // sigma = |lambda| with the sign absorbed into V's columns.
            let u_d = eig.vectors;
            let mut v_d = u_d.clone();
            for (j, &lam) in eig.values.iter().enumerate() {
                if lam < F::zero() {
                    for i in 0..n {
                        v_d[(i, j)] = -v_d[(i, j)];
                    }
                }
            }
            let mut emb = u_d;
            for (j, &s) in sigma_d.iter().enumerate() {
                let r = s.sqrt();
                for i in 0..n {
                    emb[(i, j)] *= r;
                }
            }
            let top = lanczos_eig(&op, 2, OrderMode::DescendingAlgebraic, cfg)?;
            (
                emb,
                BasisState::Arope { v_d, sigma_d },
                (top.values[0], top.values[1]),
            )
        }
        Method::Grarep => {
            let k = spec.grarep_order;
            let dk = d / k;
            let beta = spec.grarep_beta_for(n);
            let mut emb = Array2::<F>::zeros((n, d));
            let mut orders = Vec::with_capacity(k);
            let mut sigma_pair = (F::zero(), F::zero());
            for i in 1..=k {
                let x = grarep_plp(g, i, beta)?;
                let svd = truncated_svd(&DenseOp(x.view()), dk, cfg)?;
                check_positive_sigma(&svd.sigma, "GraRep")?;
                for (j, &s) in svd.sigma.iter().enumerate() {
                    let r = s.sqrt();
                    for row in 0..n {
                        emb[(row, (i - 1) * dk + j)] = svd.u[(row, j)] * r;
                    }
                }
                if i == k {
                    sigma_pair = if dk >= 2 {
                        (svd.sigma[0], svd.sigma[1])
                    } else {
                        let pair = truncated_svd(&DenseOp(x.view()), 2, cfg)?;
                        (pair.sigma[0], pair.sigma[1])
                    };
                }
                orders.push(GrarepOrderBasis {
                    v: svd.v,
                    sigma: svd.sigma,
                });
            }
            (emb, BasisState::Grarep { orders, beta }, sigma_pair)
        }
        Method::Netmf => {
            let parts = netmf_log_matrix(
                g,
                spec.netmf_rank,
                spec.netmf_window,
                spec.netmf_negatives,
                cfg,
            )?;
            let op = DenseOp(parts.log_m.view());
            let eig = lanczos_eig(&op, d, OrderMode::DescendingMagnitude, cfg)?;
            let sigma_d: Vec<F> = eig.values.iter().map(|&l| l.abs()).collect();
            check_positive_sigma(&sigma_d, "NetMF")?;
            let u_d = eig.vectors;
            let mut v_d = u_d.clone();
            for (j, &lam) in eig.values.iter().enumerate() {
                if lam < F::zero() {
                    for i in 0..n {
                        v_d[(i, j)] = -v_d[(i, j)];
                    }
                }
            }
            let mut emb = u_d;
            for (j, &s) in sigma_d.iter().enumerate() {
                let r = s.sqrt();
                for i in 0..n {
                    emb[(i, j)] *= r;
                }
            }
            let top = lanczos_eig(&op, 2, OrderMode::DescendingAlgebraic, cfg)?;
            (
                emb,
                BasisState::Netmf {
                    u_h: parts.u_h,
                    lambda_h: parts.lambda_h,
                    v_d,
                    sigma_d,
                    vol: parts.vol,
                    degrees0: parts.degrees,
                },
                (top.values[0], top.values[1]),
            )
        }
    };
    let embedding = EmbeddingMatrix {
        method: spec.method,
        data,
    };
    if !embedding.is_finite() {
        return Err(Error::NonFinite("fitted embedding"));
    }
    let basis = MethodBasis {
        spec: spec.clone(),
        n,
        drift_sigma: sigma_pair,
        fit_graph: g.clone(),
        state,
    };
    Ok((embedding, basis))
}

#[derive(Clone, Debug)]
pub struct GenerateConfig<F> {
    pub solver: SolverConfig,
    pub check: DriftCheckConfig<F>,
}

impl<F> Default for GenerateConfig<F> {
    fn default() -> Self {
        GenerateConfig {
            solver: SolverConfig::default(),
            check: DriftCheckConfig::default(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Generated<F> {
    /// Embeddings of the `m` new nodes (rows n..n+m of the grown graph).
    pub embedding: EmbeddingMatrix<F>,
    pub verdict: Option<DriftVerdict<F>>,
    pub retrained: bool,
}

/// Target rows of the new nodes restricted to old columns, per method stage.
fn new_node_rows<F: Real>(
    basis: &MethodBasis<F>,
    g1: &Graph<F>,
    n: usize,
    m: usize,
) -> Result<Vec<Array2<F>>> {
    let spec = &basis.spec;
    match &basis.state {
        BasisState::Le { .. } => {
            let l1 = normalized_laplacian(g1)?;
            let mut rows = Array2::<F>::zeros((m, n));
            for local in 0..m {
                let (cols, vals) = l1.row(n + local);
                for (&j, &v) in cols.iter().zip(vals) {
                    if j < n {
                        rows[(local, j)] = v;
                    }
                }
            }
            Ok(vec![rows])
        }
        BasisState::Arope { .. } => {
            let op = AropePoly::new(g1, &spec.arope_weights);
            let mut rows = Array2::<F>::zeros((m, n));
            for local in 0..m {
                let full = op.row_dense(n + local);
                for j in 0..n {
                    rows[(local, j)] = full[j];
                }
            }
            Ok(vec![rows])
        }
        BasisState::Grarep { orders, beta } => {
            let mut out = Vec::with_capacity(orders.len());
            for i in 1..=orders.len() {
                out.push(grarep_new_rows(g1, n, i, *beta)?);
            }
            Ok(out)
        }
        BasisState::Netmf {
            u_h,
            lambda_h,
            vol,
            degrees0,
            ..
        } => {
            let h = u_h.ncols();
            // W = D0^{-1/2} U_h over the old nodes.
            let mut w = u_h.clone();
            for (i, mut row) in w.rows_mut().into_iter().enumerate() {
                let s = F::one() / degrees0[i].sqrt();
                for v in row.iter_mut() {
                    *v *= s;
                }
            }
            // Cross block rows of the grown adjacency, old columns only.
            let mut t1 = Array2::<F>::zeros((m, h));
            let mut cross_deg = vec![F::zero(); m];
            for local in 0..m {
                let (cols, vals) = g1.neighbors(n + local);
                for (&j, &a) in cols.iter().zip(vals) {
                    if j < n {
                        cross_deg[local] += a;
                        for c in 0..h {
                            t1[(local, c)] += a * w[(j, c)];
                        }
                    }
                }
            }
            // Lambda^{-1} (1/T) sum_r Lambda^r, finite at lambda = 0.
            for (c, &lam) in lambda_h.iter().enumerate() {
                let f = deepwalk_filter_over_lambda(lam, spec.netmf_window);
                for r in 0..m {
                    t1[(r, c)] *= f;
                }
            }
            let mut rows = t1.dot(&w.t());
            let scale = *vol / spec.netmf_negatives;
            for (local, mut row) in rows.rows_mut().into_iter().enumerate() {
                // Zero cross degree keeps the whole row at zero (the
                // reciprocal is defined as 0), which the log clamp preserves.
                let rs = if cross_deg[local] > F::zero() {
                    scale / cross_deg[local]
                } else {
                    F::zero()
                };
                for v in row.iter_mut() {
                    let scaled = *v * rs;
                    *v = if scaled > F::one() {
                        scaled.ln()
                    } else {
                        F::zero()
                    };
                }
            }
            Ok(vec![rows])
        }
    }
}

/// Generate embeddings for the new nodes of `g1` against a fitted basis.
///
/// With `check` on, the drift budget is judged first; on failure the whole
/// embedding is refitted on `g1`, the basis (including its drift spectrum) is
/// replaced, and the new nodes' rows of the refit are returned with
/// `retrained = true`.
pub fn generate<F: Real>(
    basis: &mut MethodBasis<F>,
    g1: &Graph<F>,
    check: bool,
    cfg: &GenerateConfig<F>,
) -> Result<Generated<F>> {
    let n = basis.n;
    if g1.n() < n {
        return Err(Error::DimMismatch {
            what: "grown graph",
            left: g1.n(),
            right: n,
        });
    }
    let m = g1.n() - n;
    let mut verdict = None;
    if check {
        let m0_rep = drift_target(&basis.fit_graph, &basis.spec, &cfg.solver)?;
        let m1_rep = drift_target(g1, &basis.spec, &cfg.solver)?;
        let ops = BlockOps::new(&m0_rep, &m1_rep, n)?;
        let (v, _) = drift_check_ops(
            &ops.delta_op(),
            &ops.e1_op(),
            &ops.e2_op(),
            basis.drift_sigma.0,
            basis.drift_sigma.1,
            &cfg.check,
        );
        let ok = v.ok;
        verdict = Some(v);
        if !ok {
            let (emb_full, new_basis) = fit(g1, &basis.spec, &cfg.solver)?;
            let tail = emb_full.data.slice(ndarray::s![n.., ..]).to_owned();
            *basis = new_basis;
            return Ok(Generated {
                embedding: EmbeddingMatrix {
                    method: basis.spec.method,
                    data: tail,
                },
                verdict,
                retrained: true,
            });
        }
    }
    let blocks = new_node_rows(basis, g1, n, m)?;
    let factors = basis.projection_factors();
    debug_assert_eq!(blocks.len(), factors.len());
    let d = basis.spec.dim;
    let mut data = Array2::<F>::zeros((m, d));
    let mut col_base = 0;
    for (rows, (factor, scale)) in blocks.iter().zip(factors.iter()) {
        let block = project_rows(rows, *factor, scale);
        let width = block.ncols();
        for r in 0..m {
            for c in 0..width {
                data[(r, col_base + c)] = block[(r, c)];
            }
        }
        col_base += width;
    }
    debug_assert_eq!(col_base, d);
    let embedding = EmbeddingMatrix {
        method: basis.spec.method,
        data,
    };
    if !embedding.is_finite() {
        return Err(Error::NonFinite("generated embedding"));
    }
    Ok(Generated {
        embedding,
        verdict,
        retrained: false,
    })
}
