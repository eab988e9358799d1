//! Target-matrix construction for the four factorization methods, both as
//! whole-matrix representations (for fitting and drift scans) and as row
//! extractors for newly arrived nodes.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::num::Real;
use crate::spectral::{
    lanczos_eig, truncated_svd, DenseOp, LinOp, OrderMode, SolverConfig, SparseMatrix,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Le,
    Arope,
    Grarep,
    Netmf,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Le => "le",
            Method::Arope => "arope",
            Method::Grarep => "grarep",
            Method::Netmf => "netmf",
        }
    }

    pub fn parse(s: &str) -> Option<Method> {
        match s.to_ascii_lowercase().as_str() {
            "le" => Some(Method::Le),
            "arope" => Some(Method::Arope),
            "grarep" => Some(Method::Grarep),
            "netmf" => Some(Method::Netmf),
            _ => None,
        }
    }
}

/// Which matrix feeds the space-drift judgement.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DriftMatrixKind {
    /// The raw adjacency. Used for LE, whose normalized target has singular
    /// values too small for the budget to be meaningful.
    Adjacency,
    /// The method's own target matrix.
    MethodTarget,
}

/// Method choice plus every tunable the four builders need.
#[derive(Clone, Debug, PartialEq)]
pub struct TargetSpec<F> {
    pub method: Method,
    /// Embedding dimension.
    pub dim: usize,
    /// AROPE polynomial weights w_1..w_q.
    pub arope_weights: Vec<F>,
    /// GraRep maximum order k.
    pub grarep_order: usize,
    /// GraRep shift; `None` resolves to 1/n at fit time.
    pub grarep_beta: Option<F>,
    /// NetMF first-stage rank h.
    pub netmf_rank: usize,
    /// NetMF context window T.
    pub netmf_window: usize,
    /// NetMF negative-sample count b.
    pub netmf_negatives: F,
}

impl<F: Real> TargetSpec<F> {
    pub fn new(method: Method, dim: usize) -> Self {
        TargetSpec {
            method,
            dim,
            arope_weights: vec![F::one(), F::of(0.01), F::of(0.0001)],
            grarep_order: 4,
            grarep_beta: None,
            netmf_rank: 256,
            netmf_window: 10,
            netmf_negatives: F::one(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::invalid("dim", "must be at least 1"));
        }
        match self.method {
            Method::Arope => {
                if self.arope_weights.is_empty() {
                    return Err(Error::invalid("arope_weights", "need q >= 1 weights"));
                }
                if self.arope_weights.iter().any(|w| !w.is_finite()) {
                    return Err(Error::invalid("arope_weights", "weights must be finite"));
                }
            }
            Method::Grarep => {
                if self.grarep_order == 0 {
                    return Err(Error::invalid("grarep_order", "must be at least 1"));
                }
                if let Some(beta) = self.grarep_beta {
                    if !(beta > F::zero()) {
                        return Err(Error::invalid("grarep_beta", "must be positive"));
                    }
                }
                if self.dim % self.grarep_order != 0 {
                    return Err(Error::DimNotDivisible {
                        d: self.dim,
                        k: self.grarep_order,
                    });
                }
            }
            Method::Netmf => {
                if self.netmf_rank < self.dim {
                    return Err(Error::invalid("netmf_rank", "h must be at least dim"));
                }
                if self.netmf_window == 0 {
                    return Err(Error::invalid("netmf_window", "T must be at least 1"));
                }
                if !(self.netmf_negatives >= F::one()) {
                    return Err(Error::invalid("netmf_negatives", "b must be at least 1"));
                }
            }
            Method::Le => {}
        }
        Ok(())
    }

    pub fn drift_kind(&self) -> DriftMatrixKind {
        match self.method {
            Method::Le => DriftMatrixKind::Adjacency,
            _ => DriftMatrixKind::MethodTarget,
        }
    }

    pub fn grarep_beta_for(&self, n: usize) -> F {
        self.grarep_beta
            .unwrap_or_else(|| F::one() / F::from_usize_lossy(n))
    }
}

/// Adjacency as an explicit sparse matrix.
pub fn adjacency_matrix<F: Real>(g: &Graph<F>) -> SparseMatrix<F> {
    let mut triples = Vec::with_capacity(g.nnz());
    for i in 0..g.n() {
        let (cols, vals) = g.neighbors(i);
        for (&j, &w) in cols.iter().zip(vals) {
            triples.push((i, j, w));
        }
    }
    SparseMatrix::from_triples(g.n(), g.n(), &triples)
}

/// Symmetric normalized Laplacian `I - D^{-1/2} A D^{-1/2}`.
/// Rejects zero-degree nodes.
pub fn normalized_laplacian<F: Real>(g: &Graph<F>) -> Result<SparseMatrix<F>> {
    let n = g.n();
    let degrees = g.degrees();
    for (i, &d) in degrees.iter().enumerate() {
        if !(d > F::zero()) {
            return Err(Error::ZeroDegree { node: i });
        }
    }
    let inv_sqrt: Vec<F> = degrees.iter().map(|&d| F::one() / d.sqrt()).collect();
    let mut triples = Vec::with_capacity(g.nnz() + n);
    for i in 0..n {
        let (cols, vals) = g.neighbors(i);
        let mut diag = F::one();
        for (&j, &w) in cols.iter().zip(vals) {
            if j == i {
                diag -= w * inv_sqrt[i] * inv_sqrt[i];
            } else {
                triples.push((i, j, -w * inv_sqrt[i] * inv_sqrt[j]));
            }
        }
        triples.push((i, i, diag));
    }
    Ok(SparseMatrix::from_triples(n, n, &triples))
}

/// The AROPE proximity polynomial `S = w_1 A + w_2 A^2 + ... + w_q A^q`,
/// applied through chained sparse matvecs; `A^i` is never materialized.
pub struct AropePoly<'g, F> {
    graph: &'g Graph<F>,
    weights: Vec<F>,
}

impl<'g, F: Real> AropePoly<'g, F> {
    pub fn new(graph: &'g Graph<F>, weights: &[F]) -> Self {
        AropePoly {
            graph,
            weights: weights.to_vec(),
        }
    }

    /// Row `i` of S as a dense vector, by the same chaining.
    pub fn row_dense(&self, i: usize) -> Vec<F> {
        let n = self.graph.n();
        let mut e = vec![F::zero(); n];
        e[i] = F::one();
        self.apply(&e)
    }
}

impl<F: Real> LinOp<F> for AropePoly<'_, F> {
    fn rows(&self) -> usize {
        self.graph.n()
    }

    fn cols(&self) -> usize {
        self.graph.n()
    }

    fn apply_into(&self, x: &[F], y: &mut [F]) {
        let n = self.graph.n();
        let mut cur = x.to_vec();
        let mut next = vec![F::zero(); n];
        for v in y.iter_mut() {
            *v = F::zero();
        }
        for &w in &self.weights {
            self.graph.spmv_into(&cur, &mut next);
            std::mem::swap(&mut cur, &mut next);
            for (yv, &cv) in y.iter_mut().zip(cur.iter()) {
                *yv += w * cv;
            }
        }
    }

    fn apply_t_into(&self, x: &[F], y: &mut [F]) {
        self.apply_into(x, y);
    }
}

/// Row-stochastic transition matrix `P = D^{-1} A` of a graph.
fn transition_matrix<F: Real>(g: &Graph<F>) -> Result<SparseMatrix<F>> {
    let n = g.n();
    let mut triples = Vec::with_capacity(g.nnz());
    for i in 0..n {
        let d = g.degree(i);
        if !(d > F::zero()) {
            return Err(Error::ZeroDegree { node: i });
        }
        let (cols, vals) = g.neighbors(i);
        for (&j, &w) in cols.iter().zip(vals) {
            triples.push((i, j, w / d));
        }
    }
    Ok(SparseMatrix::from_triples(n, n, &triples))
}

/// `out = P * m` for sparse `P`, dense `m`.
fn sparse_dense_mul<F: Real>(p: &SparseMatrix<F>, m: &Array2<F>) -> Array2<F> {
    let rows = p.rows();
    let cols = m.ncols();
    let mut out = Array2::<F>::zeros((rows, cols));
    for i in 0..rows {
        let (idx, vals) = p.row(i);
        let mut out_row = out.row_mut(i);
        for (&j, &w) in idx.iter().zip(vals) {
            let src = m.row(j);
            for (o, &s) in out_row.iter_mut().zip(src.iter()) {
                *o += w * s;
            }
        }
    }
    out
}

/// Dense power `S^order` of the transition matrix.
fn transition_power_dense<F: Real>(g: &Graph<F>, order: usize) -> Result<Array2<F>> {
    let p = transition_matrix(g)?;
    let mut s = p.to_dense();
    for _ in 1..order {
        s = sparse_dense_mul(&p, &s);
    }
    Ok(s)
}

/// Column sums `tau_j` of `S^order`, computed as `(P^T)^order 1` without
/// materializing the power.
pub fn grarep_tau<F: Real>(g: &Graph<F>, order: usize) -> Result<Vec<F>> {
    let p = transition_matrix(g)?;
    let mut v = vec![F::one(); g.n()];
    let mut buf = vec![F::zero(); g.n()];
    for _ in 0..order {
        p.apply_t_into(&v, &mut buf);
        std::mem::swap(&mut v, &mut buf);
    }
    Ok(v)
}

fn plp_entry<F: Real>(s: F, tau: F, log_beta: F) -> F {
    if s > F::zero() {
        let v = (s / tau).ln() - log_beta;
        if v > F::zero() {
            v
        } else {
            F::zero()
        }
    } else {
        F::zero()
    }
}

/// The order-`i` positive log-probability matrix
/// `X^i[p, j] = max(0, log(S^i[p,j] / tau_j) - log beta)`, with zero
/// transition entries skipping the logarithm entirely.
pub fn grarep_plp<F: Real>(g: &Graph<F>, order: usize, beta: F) -> Result<Array2<F>> {
    if order == 0 {
        return Err(Error::invalid("order", "must be at least 1"));
    }
    if !(beta > F::zero()) {
        return Err(Error::invalid("beta", "must be positive"));
    }
    let mut s = transition_power_dense(g, order)?;
    let n = g.n();
    let mut tau = vec![F::zero(); n];
    for row in s.rows() {
        for (j, &v) in row.iter().enumerate() {
            tau[j] += v;
        }
    }
    for (j, &t) in tau.iter().enumerate() {
        if !(t > F::zero()) {
            return Err(Error::ZeroDegree { node: j });
        }
    }
    let log_beta = beta.ln();
    for mut row in s.rows_mut() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = plp_entry(*v, tau[j], log_beta);
        }
    }
    Ok(s)
}

/// Rows `n_old..n_old+m` of the grown graph's `X^i`, restricted to the first
/// `n_old` columns. Column sums are taken over the whole grown graph; each
/// row costs `order` sparse matvecs.
pub fn grarep_new_rows<F: Real>(
    g1: &Graph<F>,
    n_old: usize,
    order: usize,
    beta: F,
) -> Result<Array2<F>> {
    let n1 = g1.n();
    if n_old > n1 {
        return Err(Error::DimMismatch {
            what: "grarep new rows",
            left: n_old,
            right: n1,
        });
    }
    let m = n1 - n_old;
    let p = transition_matrix(g1)?;
    let tau = grarep_tau(g1, order)?;
    for (j, &t) in tau.iter().enumerate().take(n_old) {
        if !(t > F::zero()) {
            return Err(Error::ZeroDegree { node: j });
        }
    }
    let log_beta = beta.ln();
    let mut out = Array2::<F>::zeros((m, n_old));
    let mut row = vec![F::zero(); n1];
    let mut buf = vec![F::zero(); n1];
    for local in 0..m {
        for v in row.iter_mut() {
            *v = F::zero();
        }
        row[n_old + local] = F::one();
        for _ in 0..order {
            p.apply_t_into(&row, &mut buf);
            std::mem::swap(&mut row, &mut buf);
        }
        // row now holds (S^order)[n_old+local, :].
        for j in 0..n_old {
            out[(local, j)] = plp_entry(row[j], tau[j], log_beta);
        }
    }
    Ok(out)
}

/// Everything the NetMF pipeline produces: the log-clamped target plus the
/// intermediates projection needs later.
#[derive(Clone, Debug)]
pub struct NetmfParts<F> {
    /// `log(max(M_hat, 1))`, exactly symmetric.
    pub log_m: Array2<F>,
    pub u_h: Array2<F>,
    pub lambda_h: Vec<F>,
    pub vol: F,
    pub degrees: Vec<F>,
}

/// NetMF large-window target: eigendecompose `D^{-1/2} A D^{-1/2}` at rank
/// `h`, form `M_hat = (vol/b) D^{-1/2} U_h ((1/T) sum_r Lambda^r) U_h^T
/// D^{-1/2}`, clamp at 1, and take the elementwise log.
pub fn netmf_log_matrix<F: Real>(
    g: &Graph<F>,
    h: usize,
    window: usize,
    negatives: F,
    cfg: &SolverConfig,
) -> Result<NetmfParts<F>> {
    let n = g.n();
    if h > n {
        return Err(Error::RankTooLarge { d: h, n });
    }
    let degrees = g.degrees();
    for (i, &d) in degrees.iter().enumerate() {
        if !(d > F::zero()) {
            return Err(Error::ZeroDegree { node: i });
        }
    }
    let inv_sqrt: Vec<F> = degrees.iter().map(|&d| F::one() / d.sqrt()).collect();
    let mut triples = Vec::with_capacity(g.nnz());
    for i in 0..n {
        let (cols, vals) = g.neighbors(i);
        for (&j, &w) in cols.iter().zip(vals) {
            triples.push((i, j, w * inv_sqrt[i] * inv_sqrt[j]));
        }
    }
    let normalized = SparseMatrix::from_triples(n, n, &triples);
    let eig = lanczos_eig(&normalized, h, OrderMode::DescendingAlgebraic, cfg)?;
    let vol = g.volume();
    let filter: Vec<F> = eig
        .values
        .iter()
        .map(|&l| deepwalk_filter(l, window))
        .collect();
    // W = D^{-1/2} U_h; the filtered copy carries the per-column eigenvalue
    // weight so M_hat = scale * WF W^T comes from a single GEMM.
    let mut w = eig.vectors.clone();
    for (i, mut row) in w.rows_mut().into_iter().enumerate() {
        for v in row.iter_mut() {
            *v *= inv_sqrt[i];
        }
    }
    let mut wf = w.clone();
    for (j, mut col) in wf.columns_mut().into_iter().enumerate() {
        for v in col.iter_mut() {
            *v *= filter[j];
        }
    }
    let scale = vol / negatives;
    let mut m_hat = wf.dot(&w.t());
    m_hat.mapv_inplace(|v| v * scale);
    // Enforce exact symmetry: mirror the upper triangle.
    for i in 0..n {
        for j in (i + 1)..n {
            let v = m_hat[(i, j)];
            m_hat[(j, i)] = v;
        }
    }
    m_hat.mapv_inplace(|v| if v > F::one() { v.ln() } else { F::zero() });
    Ok(NetmfParts {
        log_m: m_hat,
        u_h: eig.vectors,
        lambda_h: eig.values,
        vol,
        degrees,
    })
}

/// `(1/T) sum_{r=1..T} lambda^r`.
pub fn deepwalk_filter<F: Real>(lambda: F, window: usize) -> F {
    let mut acc = F::zero();
    let mut pow = F::one();
    for _ in 0..window {
        pow *= lambda;
        acc += pow;
    }
    acc / F::from_usize_lossy(window)
}

/// `(1/T) sum_{r=1..T} lambda^{r-1}`: the filter divided by lambda, evaluated
/// without forming `1/lambda` so it stays finite at lambda = 0.
pub fn deepwalk_filter_over_lambda<F: Real>(lambda: F, window: usize) -> F {
    let mut acc = F::zero();
    let mut pow = F::one();
    for _ in 0..window {
        acc += pow;
        pow *= lambda;
    }
    acc / F::from_usize_lossy(window)
}

/// A constructed target matrix in whichever representation suits the method.
pub enum TargetRep<'g, F: Real> {
    Sparse(SparseMatrix<F>),
    Dense { matrix: Array2<F>, symmetric: bool },
    Poly(AropePoly<'g, F>),
}

impl<'g, F: Real> TargetRep<'g, F> {
    pub fn dim(&self) -> usize {
        match self {
            TargetRep::Sparse(m) => m.rows(),
            TargetRep::Dense { matrix, .. } => matrix.nrows(),
            TargetRep::Poly(p) => p.rows(),
        }
    }

    pub fn is_symmetric(&self) -> bool {
        match self {
            TargetRep::Sparse(_) => true,
            TargetRep::Dense { symmetric, .. } => *symmetric,
            TargetRep::Poly(_) => true,
        }
    }

    pub fn row_dense(&self, i: usize) -> Vec<F> {
        match self {
            TargetRep::Sparse(m) => m.row_dense(i),
            TargetRep::Dense { matrix, .. } => matrix.row(i).to_vec(),
            TargetRep::Poly(p) => p.row_dense(i),
        }
    }
}

impl<F: Real> LinOp<F> for TargetRep<'_, F> {
    fn rows(&self) -> usize {
        self.dim()
    }

    fn cols(&self) -> usize {
        self.dim()
    }

    fn apply_into(&self, x: &[F], y: &mut [F]) {
        match self {
            TargetRep::Sparse(m) => m.apply_into(x, y),
            TargetRep::Dense { matrix, .. } => DenseOp(matrix.view()).apply_into(x, y),
            TargetRep::Poly(p) => p.apply_into(x, y),
        }
    }

    fn apply_t_into(&self, x: &[F], y: &mut [F]) {
        match self {
            TargetRep::Sparse(m) => m.apply_t_into(x, y),
            TargetRep::Dense { matrix, .. } => DenseOp(matrix.view()).apply_t_into(x, y),
            TargetRep::Poly(p) => p.apply_t_into(x, y),
        }
    }
}

/// Build the drift-judgement matrix for a graph under a spec.
pub fn drift_target<'g, F: Real>(
    g: &'g Graph<F>,
    spec: &TargetSpec<F>,
    cfg: &SolverConfig,
) -> Result<TargetRep<'g, F>> {
    if spec.drift_kind() == DriftMatrixKind::Adjacency {
        return Ok(TargetRep::Sparse(adjacency_matrix(g)));
    }
    match spec.method {
        Method::Arope => Ok(TargetRep::Poly(AropePoly::new(g, &spec.arope_weights))),
        Method::Grarep => {
            let beta = spec.grarep_beta_for(g.n());
            Ok(TargetRep::Dense {
                matrix: grarep_plp(g, spec.grarep_order, beta)?,
                symmetric: false,
            })
        }
        Method::Netmf => {
            let parts = netmf_log_matrix(
                g,
                spec.netmf_rank,
                spec.netmf_window,
                spec.netmf_negatives,
                cfg,
            )?;
            Ok(TargetRep::Dense {
                matrix: parts.log_m,
                symmetric: true,
            })
        }
        Method::Le => unreachable!("LE drift matrix is the adjacency"),
    }
}

/// Top-two values of the drift spectrum: algebraically largest eigenvalues
/// for symmetric targets, leading singular values for asymmetric ones
/// (GraRep's column normalization breaks symmetry, and only the singular
/// spectrum is well defined there).
pub fn drift_spectrum<F: Real>(rep: &TargetRep<'_, F>, cfg: &SolverConfig) -> Result<(F, F)> {
    if rep.dim() < 2 {
        return Err(Error::invalid("n", "drift spectrum needs at least 2 nodes"));
    }
    if rep.is_symmetric() {
        let eig = lanczos_eig(rep, 2, OrderMode::DescendingAlgebraic, cfg)?;
        Ok((eig.values[0], eig.values[1]))
    } else {
        let svd = truncated_svd(rep, 2, cfg)?;
        Ok((svd.sigma[0], svd.sigma[1]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{load_edge_list, LoadOptions};
    use std::io::Cursor;

    fn graph(text: &str) -> Graph<f64> {
        load_edge_list(Cursor::new(text), LoadOptions::default())
            .unwrap()
            .0
    }

    #[test]
    fn laplacian_k2() {
        let g = graph("0 1");
        let l = normalized_laplacian(&g).unwrap().to_dense();
        assert_eq!(l[(0, 0)], 1.0);
        assert_eq!(l[(1, 1)], 1.0);
        assert_eq!(l[(0, 1)], -1.0);
        assert_eq!(l[(1, 0)], -1.0);
    }

    #[test]
    fn laplacian_k3() {
        let g = graph("0 1\n1 2\n0 2");
        let l = normalized_laplacian(&g).unwrap().to_dense();
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { 1.0 } else { -0.5 };
                assert!((l[(i, j)] - expect).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn laplacian_rejects_isolated_node() {
        let g = Graph::<f64>::from_undirected_triples(3, &[(0, 1, 1.0)], false).unwrap();
        assert!(matches!(
            normalized_laplacian(&g),
            Err(Error::ZeroDegree { node: 2 })
        ));
    }

    #[test]
    fn arope_single_term_is_adjacency() {
        let g = graph("0 1\n1 2\n0 2");
        let op = AropePoly::new(&g, &[1.0]);
        for i in 0..3 {
            let row = op.row_dense(i);
            let adj = adjacency_matrix(&g).row_dense(i);
            assert_eq!(row, adj);
        }
    }

    #[test]
    fn arope_k2_two_terms() {
        // A^2 = I for K2, so S = A + 0.01 I.
        let g = graph("0 1");
        let op = AropePoly::new(&g, &[1.0, 0.01]);
        let r0 = op.row_dense(0);
        let r1 = op.row_dense(1);
        assert!((r0[0] - 0.01).abs() < 1e-15);
        assert!((r0[1] - 1.0).abs() < 1e-15);
        assert!((r1[0] - 1.0).abs() < 1e-15);
        assert!((r1[1] - 0.01).abs() < 1e-15);
    }

    #[test]
    fn arope_default_weights_match_dense_polynomial() {
        let g = graph("0 1\n1 2");
        let a = adjacency_matrix(&g).to_dense();
        let a2 = a.dot(&a);
        let a3 = a2.dot(&a);
        let expected = &a * 1.0 + &a2 * 0.01 + &a3 * 0.0001;
        let op = AropePoly::new(&g, &[1.0, 0.01, 0.0001]);
        for i in 0..3 {
            let row = op.row_dense(i);
            for j in 0..3 {
                assert!((row[j] - expected[(i, j)]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn grarep_k2_hand_value() {
        let g = graph("0 1");
        let x = grarep_plp(&g, 1, 0.5).unwrap();
        let l2 = 2.0f64.ln();
        assert_eq!(x[(0, 0)], 0.0);
        assert_eq!(x[(1, 1)], 0.0);
        assert!((x[(0, 1)] - l2).abs() < 1e-15);
        assert!((x[(1, 0)] - l2).abs() < 1e-15);
    }

    #[test]
    fn grarep_large_beta_clamps_to_zero() {
        let g = graph("0 1\n1 2\n0 2");
        let x = grarep_plp(&g, 2, 100.0).unwrap();
        assert!(x.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn grarep_order2_matches_brute_force() {
        let g = graph("0 1\n1 2");
        let beta = 1.0 / 3.0;
        // Dense brute force: P = D^{-1} A, S = P^2.
        let a = adjacency_matrix(&g).to_dense();
        let deg = g.degrees();
        let mut p = a.clone();
        for (i, mut row) in p.rows_mut().into_iter().enumerate() {
            for v in row.iter_mut() {
                *v /= deg[i];
            }
        }
        let s = p.dot(&p);
        let tau: Vec<f64> = (0..3).map(|j| (0..3).map(|i| s[(i, j)]).sum()).collect();
        let x = grarep_plp(&g, 2, beta).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let expect = if s[(i, j)] > 0.0 {
                    ((s[(i, j)] / tau[j]).ln() - beta.ln()).max(0.0)
                } else {
                    0.0
                };
                assert!((x[(i, j)] - expect).abs() < 1e-14);
            }
        }
        assert!(x.iter().all(|v| v.is_finite() && *v >= 0.0));
    }

    #[test]
    fn grarep_new_rows_match_full_matrix() {
        let g = graph("0 1\n1 2\n2 3\n3 0\n0 2");
        let beta = 0.25;
        for order in 1..=3 {
            let full = grarep_plp(&g, order, beta).unwrap();
            let rows = grarep_new_rows(&g, 3, order, beta).unwrap();
            assert_eq!(rows.nrows(), 1);
            for j in 0..3 {
                assert!((rows[(0, j)] - full[(3, j)]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn netmf_k2_hand_value() {
        let g = graph("0 1");
        let parts = netmf_log_matrix(&g, 2, 1, 1.0, &SolverConfig::default()).unwrap();
        let l2 = 2.0f64.ln();
        assert_eq!(parts.vol, 2.0);
        assert_eq!(parts.log_m[(0, 0)], 0.0);
        assert_eq!(parts.log_m[(1, 1)], 0.0);
        assert!((parts.log_m[(0, 1)] - l2).abs() < 1e-12);
        assert!((parts.log_m[(1, 0)] - l2).abs() < 1e-12);
    }

    #[test]
    fn netmf_small_entries_clamp_to_zero_matrix() {
        // A large negative-sample count scales every M_hat entry below 1
        // (edge-weight scaling alone cancels inside the normalization).
        let g = graph("0 1");
        let parts = netmf_log_matrix(&g, 2, 1, 100.0, &SolverConfig::default()).unwrap();
        assert!(parts.log_m.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn netmf_target_exactly_symmetric() {
        let g = graph("0 1\n1 2\n2 3\n3 0\n0 2\n1 3");
        let parts = netmf_log_matrix(&g, 3, 5, 1.0, &SolverConfig::default()).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(parts.log_m[(i, j)], parts.log_m[(j, i)]);
            }
        }
    }

    #[test]
    fn deepwalk_filter_handles_unit_and_zero() {
        assert!((deepwalk_filter(1.0f64, 10) - 1.0).abs() < 1e-15);
        assert_eq!(deepwalk_filter(0.0f64, 10), 0.0);
        assert!((deepwalk_filter_over_lambda(0.0f64, 10) - 0.1).abs() < 1e-15);
        // filter / lambda == filter_over_lambda away from zero:
        let l = 0.37f64;
        assert!((deepwalk_filter(l, 7) / l - deepwalk_filter_over_lambda(l, 7)).abs() < 1e-14);
    }

    #[test]
    fn spec_validation() {
        let mut spec = TargetSpec::<f64>::new(Method::Grarep, 10);
        spec.grarep_order = 4;
        assert!(matches!(
            spec.validate(),
            Err(Error::DimNotDivisible { d: 10, k: 4 })
        ));
        spec.grarep_order = 5;
        assert!(spec.validate().is_ok());

        let mut spec = TargetSpec::<f64>::new(Method::Netmf, 16);
        spec.netmf_rank = 8;
        assert!(spec.validate().is_err());
    }

    #[test]
    fn row_extractors_match_operator_application() {
        let g = graph("0 1\n1 2\n2 3\n3 4\n4 0\n1 3");
        let spec = TargetSpec::<f64>::new(Method::Arope, 4);
        let rep = drift_target(&g, &spec, &SolverConfig::default()).unwrap();
        let n = g.n();
        let mut dense = Array2::<f64>::zeros((n, n));
        for i in 0..n {
            let row = rep.row_dense(i);
            for j in 0..n {
                dense[(i, j)] = row[j];
            }
        }
        let x: Vec<f64> = (0..n).map(|i| (i as f64) - 1.5).collect();
        let via_op = rep.apply(&x);
        let via_dense = DenseOp(dense.view()).apply(&x);
        for (a, b) in via_op.iter().zip(&via_dense) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
