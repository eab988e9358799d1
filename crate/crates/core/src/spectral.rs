//! Truncated symmetric eigensolver, truncated SVD, spectral-norm estimation,
//! and the eigenvector prefix-correlation diagnostic.
//!
//! Everything here is deterministic given a seed: start vectors come from a
//! seeded ChaCha stream and no computation is threaded.

use ndarray::{Array2, ArrayView2};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::num::{axpy, dot, norm2, scale_in_place, Real};

/// A real linear operator. `apply_into` computes `y = A x`;
/// `apply_t_into` computes `y = Aᵀ x`.
pub trait LinOp<F: Real> {
    fn rows(&self) -> usize;
    fn cols(&self) -> usize;
    fn apply_into(&self, x: &[F], y: &mut [F]);
    fn apply_t_into(&self, x: &[F], y: &mut [F]);

    fn apply(&self, x: &[F]) -> Vec<F> {
        let mut y = vec![F::zero(); self.rows()];
        self.apply_into(x, &mut y);
        y
    }

    fn apply_t(&self, x: &[F]) -> Vec<F> {
        let mut y = vec![F::zero(); self.cols()];
        self.apply_t_into(x, &mut y);
        y
    }
}

/// General sparse matrix in CSR form (not necessarily symmetric).
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix<F> {
    rows: usize,
    cols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<F>,
}

impl<F: Real> SparseMatrix<F> {
    /// Build from triples; duplicates are summed, zeros dropped.
    pub fn from_triples(rows: usize, cols: usize, triples: &[(usize, usize, F)]) -> Self {
        let mut per_row: Vec<Vec<(usize, F)>> = vec![Vec::new(); rows];
        for &(i, j, v) in triples {
            assert!(i < rows && j < cols, "triple out of range");
            per_row[i].push((j, v));
        }
        let mut row_offsets = Vec::with_capacity(rows + 1);
        let mut col_indices = Vec::new();
        let mut values = Vec::new();
        row_offsets.push(0);
        for row in &mut per_row {
            row.sort_by_key(|&(j, _)| j);
            let mut k = 0;
            while k < row.len() {
                let j = row[k].0;
                let mut v = F::zero();
                while k < row.len() && row[k].0 == j {
                    v += row[k].1;
                    k += 1;
                }
                if v != F::zero() {
                    col_indices.push(j);
                    values.push(v);
                }
            }
            row_offsets.push(col_indices.len());
        }
        SparseMatrix {
            rows,
            cols,
            row_offsets,
            col_indices,
            values,
        }
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> (&[usize], &[F]) {
        let (s, e) = (self.row_offsets[i], self.row_offsets[i + 1]);
        (&self.col_indices[s..e], &self.values[s..e])
    }

    pub fn row_dense(&self, i: usize) -> Vec<F> {
        let mut out = vec![F::zero(); self.cols];
        let (cols, vals) = self.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            out[j] = v;
        }
        out
    }

    pub fn to_dense(&self) -> Array2<F> {
        let mut out = Array2::zeros((self.rows, self.cols));
        for i in 0..self.rows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                out[(i, j)] = v;
            }
        }
        out
    }

    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, F)> + '_ {
        (0..self.rows).flat_map(move |i| {
            let (cols, vals) = self.row(i);
            cols.iter().zip(vals).map(move |(&j, &v)| (i, j, v))
        })
    }
}

impl<F: Real> LinOp<F> for SparseMatrix<F> {
    fn rows(&self) -> usize {
        self.rows
    }

    fn cols(&self) -> usize {
        self.cols
    }

    fn apply_into(&self, x: &[F], y: &mut [F]) {
        debug_assert_eq!(x.len(), self.cols);
        for i in 0..self.rows {
            let (cols, vals) = self.row(i);
            let mut acc = F::zero();
            for (&j, &v) in cols.iter().zip(vals) {
                acc += v * x[j];
            }
            y[i] = acc;
        }
    }

    fn apply_t_into(&self, x: &[F], y: &mut [F]) {
        debug_assert_eq!(x.len(), self.rows);
        for v in y.iter_mut() {
            *v = F::zero();
        }
        for i in 0..self.rows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                y[j] += v * x[i];
            }
        }
    }
}

/// Adjacency of a graph as a symmetric operator.
impl<F: Real> LinOp<F> for Graph<F> {
    fn rows(&self) -> usize {
        self.n()
    }

    fn cols(&self) -> usize {
        self.n()
    }

    fn apply_into(&self, x: &[F], y: &mut [F]) {
        self.spmv_into(x, y);
    }

    fn apply_t_into(&self, x: &[F], y: &mut [F]) {
        self.spmv_into(x, y);
    }
}

/// Dense operator view over an `Array2`.
pub struct DenseOp<'a, F>(pub ArrayView2<'a, F>);

impl<F: Real> LinOp<F> for DenseOp<'_, F> {
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

/// Requested ordering of returned eigenvalues.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OrderMode {
    DescendingAlgebraic,
    DescendingMagnitude,
    AscendingMagnitude,
}

#[derive(Clone, Debug)]
pub struct EigenPairs<F> {
    pub values: Vec<F>,
    /// n x d, column-orthonormal.
    pub vectors: Array2<F>,
    pub order: OrderMode,
    pub residuals: Vec<F>,
}

#[derive(Clone, Debug)]
pub struct SvdTriplet<F> {
    pub u: Array2<F>,
    pub sigma: Vec<F>,
    pub v: Array2<F>,
    pub residuals: Vec<F>,
}

/// Solver knobs shared by the iterative routines.
#[derive(Clone, Copy, Debug)]
pub struct SolverConfig {
    pub tol: f64,
    /// Hard cap on the Krylov dimension; 0 selects `max(10 d, 2 d + 80)`
    /// clamped to the operator size. Operators smaller than the cap are
    /// solved exactly.
    pub max_kdim: usize,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tol: 1e-8,
            max_kdim: 0,
            seed: 42,
        }
    }
}

impl SolverConfig {
    pub fn with_seed(seed: u64) -> Self {
        SolverConfig {
            seed,
            ..Default::default()
        }
    }

    fn kdim_cap(&self, d: usize, n: usize) -> usize {
        let cap = if self.max_kdim == 0 {
            (10 * d).max(4 * d + 160)
        } else {
            self.max_kdim
        };
        cap.min(n)
    }
}

fn random_unit<F: Real>(n: usize, rng: &mut ChaCha20Rng) -> Vec<F> {
    loop {
        let mut v: Vec<F> = (0..n)
            .map(|_| {
                let x: f64 = StandardNormal.sample(rng);
                F::of(x)
            })
            .collect();
        let nv = norm2(&v);
        if nv > F::of(1e-30) {
            scale_in_place(&mut v, F::one() / nv);
            return v;
        }
    }
}

/// Classical Gram-Schmidt of `w` against the columns in `basis`, with a
/// second pass only when the first one shrank the vector substantially
/// (the DGKS criterion).
fn reorthogonalize<F: Real>(w: &mut [F], basis: &[Vec<F>]) {
    let before = norm2(w);
    for v in basis {
        let c = dot(w, v);
        if c != F::zero() {
            axpy(w, -c, v);
        }
    }
    let after = norm2(w);
    if after < F::of(0.7) * before {
        for v in basis {
            let c = dot(w, v);
            if c != F::zero() {
                axpy(w, -c, v);
            }
        }
    }
}

/// Eigenvalues of a symmetric tridiagonal matrix (ascending), implicit-shift
/// QL without eigenvector accumulation: O(k^2).
pub fn tridiagonal_values<F: Real>(diag: &[F], offdiag: &[F]) -> Result<Vec<F>> {
    let k = diag.len();
    assert_eq!(offdiag.len(), k.saturating_sub(1));
    let mut d = diag.to_vec();
    let mut e = vec![F::zero(); k];
    e[..k.saturating_sub(1)].copy_from_slice(offdiag);
    if k == 0 {
        return Ok(d);
    }
    let eps = F::epsilon();
    for l in 0..k {
        let mut iter = 0usize;
        loop {
            let mut m = l;
            while m + 1 < k {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= eps * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 50 {
                return Err(Error::NoConvergence {
                    steps: iter,
                    residual: e[l].to_f64_lossy().abs(),
                });
            }
            let two = F::of(2.0);
            let mut g = (d[l + 1] - d[l]) / (two * e[l]);
            let mut r = g.hypot(F::one());
            let sign_r = if g >= F::zero() { r.abs() } else { -r.abs() };
            g = d[m] - d[l] + e[l] / (g + sign_r);
            let mut s = F::one();
            let mut c = F::one();
            let mut p = F::zero();
            for i in (l..m).rev() {
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == F::zero() {
                    d[i + 1] -= p;
                    e[m] = F::zero();
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + two * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if r == F::zero() && m > l + 1 {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = F::zero();
        }
    }
    d.sort_by(|a, b| a.partial_cmp(b).expect("finite eigenvalues"));
    Ok(d)
}

/// Solve `(T - theta I) x = b` for symmetric tridiagonal `T` by LU with
/// partial pivoting; near-singular pivots are floored, which is exactly what
/// inverse iteration wants.
fn tridiagonal_shifted_solve<F: Real>(diag: &[F], offdiag: &[F], theta: F, b: &[F]) -> Vec<F> {
    let k = diag.len();
    let mut d0: Vec<F> = diag.iter().map(|&v| v - theta).collect();
    let mut d1: Vec<F> = offdiag.to_vec();
    let mut d2 = vec![F::zero(); k.saturating_sub(2)];
    let mut x = b.to_vec();
    let scale = diag
        .iter()
        .chain(offdiag.iter())
        .fold(F::one(), |acc, v| acc.max(v.abs()));
    let tiny = F::epsilon() * scale * F::of(1e-3) + F::min_positive_value();
    for i in 0..k.saturating_sub(1) {
        let sub = offdiag[i];
        if d0[i].abs() >= sub.abs() {
            if d0[i].abs() < tiny {
                d0[i] = if d0[i] >= F::zero() { tiny } else { -tiny };
            }
            let fact = sub / d0[i];
            d0[i + 1] -= fact * d1[i];
            let xi = x[i];
            x[i + 1] -= fact * xi;
            if i + 2 < k {
                d2[i] = F::zero();
            }
        } else {
            // Swap rows i and i+1.
            let fact = d0[i] / sub;
            d0[i] = sub;
            let tmp = d0[i + 1];
            d0[i + 1] = d1[i] - fact * tmp;
            if i + 2 < k {
                d2[i] = d1[i + 1];
                d1[i + 1] = -fact * d1[i + 1];
            }
            d1[i] = tmp;
            x.swap(i, i + 1);
            let xi = x[i];
            x[i + 1] -= fact * xi;
        }
    }
    if k > 0 {
        if d0[k - 1].abs() < tiny {
            d0[k - 1] = if d0[k - 1] >= F::zero() { tiny } else { -tiny };
        }
        x[k - 1] /= d0[k - 1];
    }
    if k > 1 {
        x[k - 2] = (x[k - 2] - d1[k - 2] * x[k - 1]) / d0[k - 2];
    }
    for i in (0..k.saturating_sub(2)).rev() {
        x[i] = (x[i] - d1[i] * x[i + 1] - d2[i] * x[i + 2]) / d0[i];
    }
    x
}

/// Tridiagonal eigenvector for an accurate eigenvalue `theta` by inverse
/// iteration, orthogonalized against previously accepted vectors of the same
/// eigenvalue cluster.
fn tridiagonal_eigvec<F: Real>(
    diag: &[F],
    offdiag: &[F],
    theta: F,
    cluster: &[Vec<F>],
) -> Vec<F> {
    let k = diag.len();
    // Deterministic start with no special symmetry.
    let mut x: Vec<F> = (0..k)
        .map(|i| {
            let t = F::from_usize_lossy(i + 1);
            (t * F::of(0.7390851332151607)).sin() + F::of(0.25)
        })
        .collect();
    for _ in 0..3 {
        for c in cluster {
            let coef = dot(&x, c);
            if coef != F::zero() {
                axpy(&mut x, -coef, c);
            }
        }
        let nx = norm2(&x);
        if nx > F::zero() {
            scale_in_place(&mut x, F::one() / nx);
        }
        x = tridiagonal_shifted_solve(diag, offdiag, theta, &x);
        let nx = norm2(&x);
        if nx > F::zero() {
            scale_in_place(&mut x, F::one() / nx);
        }
    }
    for c in cluster {
        let coef = dot(&x, c);
        if coef != F::zero() {
            axpy(&mut x, -coef, c);
        }
    }
    let nx = norm2(&x);
    if nx > F::zero() {
        scale_in_place(&mut x, F::one() / nx);
    }
    x
}

/// Eigenvalues and eigenvectors of a symmetric tridiagonal matrix by the
/// implicit-shift QL algorithm (EISPACK tql2). Returns values ascending with
/// the eigenvector matrix `z` (k x k, columns aligned with values).
pub fn tridiagonal_eigen<F: Real>(diag: &[F], offdiag: &[F]) -> Result<(Vec<F>, Array2<F>)> {
    let k = diag.len();
    assert_eq!(offdiag.len(), k.saturating_sub(1));
    let mut d = diag.to_vec();
    // e is shifted one left, e[k-1] unused.
    let mut e = vec![F::zero(); k];
    e[..k.saturating_sub(1)].copy_from_slice(offdiag);
    let mut z = Array2::<F>::eye(k);
    if k == 0 {
        return Ok((d, z));
    }
    let eps = F::epsilon();
    for l in 0..k {
        let mut iter = 0usize;
        loop {
            // Find a small off-diagonal element to split at.
            let mut m = l;
            while m + 1 < k {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= eps * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 50 {
                return Err(Error::NoConvergence {
                    steps: iter,
                    residual: e[l].to_f64_lossy().abs(),
                });
            }
            let two = F::of(2.0);
            let mut g = (d[l + 1] - d[l]) / (two * e[l]);
            let mut r = g.hypot(F::one());
            let sign_r = if g >= F::zero() { r.abs() } else { -r.abs() };
            g = d[m] - d[l] + e[l] / (g + sign_r);
            let mut s = F::one();
            let mut c = F::one();
            let mut p = F::zero();
            for i in (l..m).rev() {
                let mut f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == F::zero() {
                    d[i + 1] -= p;
                    e[m] = F::zero();
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + two * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                for row in 0..k {
                    f = z[(row, i + 1)];
                    z[(row, i + 1)] = s * z[(row, i)] + c * f;
                    z[(row, i)] = c * z[(row, i)] - s * f;
                }
            }
            if r == F::zero() && m > l + 1 {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = F::zero();
        }
    }
    // Sort ascending, reordering columns.
    let mut idx: Vec<usize> = (0..k).collect();
    idx.sort_by(|&a, &b| d[a].partial_cmp(&d[b]).expect("finite eigenvalues"));
    let sorted_d: Vec<F> = idx.iter().map(|&i| d[i]).collect();
    let mut sorted_z = Array2::<F>::zeros((k, k));
    for (new, &old) in idx.iter().enumerate() {
        for row in 0..k {
            sorted_z[(row, new)] = z[(row, old)];
        }
    }
    Ok((sorted_d, sorted_z))
}

/// Pick `d` indices out of ascending Ritz values according to the order mode,
/// returning them in output order.
fn select_ordered<F: Real>(theta: &[F], d: usize, order: OrderMode) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..theta.len()).collect();
    match order {
        OrderMode::DescendingAlgebraic => {
            idx.sort_by(|&a, &b| theta[b].partial_cmp(&theta[a]).unwrap().then(a.cmp(&b)));
        }
        OrderMode::DescendingMagnitude => {
            idx.sort_by(|&a, &b| {
                theta[b]
                    .abs()
                    .partial_cmp(&theta[a].abs())
                    .unwrap()
                    .then(theta[b].partial_cmp(&theta[a]).unwrap())
                    .then(a.cmp(&b))
            });
        }
        OrderMode::AscendingMagnitude => {
            idx.sort_by(|&a, &b| {
                theta[a]
                    .abs()
                    .partial_cmp(&theta[b].abs())
                    .unwrap()
                    .then(theta[a].partial_cmp(&theta[b]).unwrap())
                    .then(a.cmp(&b))
            });
        }
    }
    idx.truncate(d);
    idx
}

/// Force the largest-magnitude entry of each column positive (ties: lowest
/// index wins), so repeated runs and correlation diagnostics are stable.
pub fn canonicalize_signs<F: Real>(m: &mut Array2<F>) -> Vec<bool> {
    let mut flipped = Vec::with_capacity(m.ncols());
    for mut col in m.columns_mut() {
        let mut best = 0usize;
        let mut best_abs = F::zero();
        for (i, &v) in col.iter().enumerate() {
            if v.abs() > best_abs {
                best_abs = v.abs();
                best = i;
            }
        }
        let flip = col[best] < F::zero();
        if flip {
            for v in col.iter_mut() {
                *v = -*v;
            }
        }
        flipped.push(flip);
    }
    flipped
}

/// Truncated symmetric eigendecomposition by Lanczos with full
/// reorthogonalization. The Krylov space grows until the `d` requested pairs
/// satisfy `residual <= tol * max(1, |lambda|_max)`; lucky breakdowns restart
/// with a fresh orthogonal direction, so reducible operators (and the zero
/// matrix) are handled. Deterministic for a fixed seed.
pub fn lanczos_eig<F: Real>(
    op: &dyn LinOp<F>,
    d: usize,
    order: OrderMode,
    cfg: &SolverConfig,
) -> Result<EigenPairs<F>> {
    let (pairs, converged, steps) = lanczos_core(op, d, order, cfg, None)?;
    if converged {
        Ok(pairs)
    } else {
        Err(Error::NoConvergence {
            steps,
            residual: pairs
                .residuals
                .iter()
                .fold(F::zero(), |acc, &r| acc.max(r))
                .to_f64_lossy(),
        })
    }
}

/// Shared Lanczos driver. `start` seeds the first basis vector (normalized).
/// Returns the pairs, whether they converged, and the Krylov steps taken,
/// letting callers accept a best-effort answer instead of an error.
fn lanczos_core<F: Real>(
    op: &dyn LinOp<F>,
    d: usize,
    order: OrderMode,
    cfg: &SolverConfig,
    start: Option<&[F]>,
) -> Result<(EigenPairs<F>, bool, usize)> {
    let n = op.rows();
    if op.cols() != n {
        return Err(Error::DimMismatch {
            what: "lanczos operator",
            left: n,
            right: op.cols(),
        });
    }
    if d > n {
        return Err(Error::RankTooLarge { d, n });
    }
    if d == 0 {
        return Ok((
            EigenPairs {
                values: Vec::new(),
                vectors: Array2::zeros((n, 0)),
                order,
                residuals: Vec::new(),
            },
            true,
            0,
        ));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
    let kcap = cfg.kdim_cap(d, n);
    let tol = F::of(cfg.tol);

    let mut basis: Vec<Vec<F>> = Vec::with_capacity(kcap);
    let mut alpha: Vec<F> = Vec::with_capacity(kcap);
    let mut beta: Vec<F> = Vec::with_capacity(kcap);
    let first = match start {
        Some(v) if v.len() == n && norm2(v) > F::of(1e-30) => {
            let mut x = v.to_vec();
            let nx = norm2(&x);
            scale_in_place(&mut x, F::one() / nx);
            x
        }
        _ => random_unit(n, &mut rng),
    };
    basis.push(first);
    let mut scale_est = F::one();
    let mut next_check = d.max(8).min(kcap);
    let mut best: Option<EigenPairs<F>> = None;

    loop {
        let k = alpha.len();
        let v = basis[k].clone();
        let mut w = op.apply(&v);
        let a = dot(&w, &v);
        axpy(&mut w, -a, &v);
        if k > 0 {
            let b_prev = beta[k - 1];
            axpy(&mut w, -b_prev, &basis[k - 1]);
        }
        reorthogonalize(&mut w, &basis);
        alpha.push(a);
        scale_est = scale_est.max(a.abs());
        let b = norm2(&w);
        scale_est = scale_est.max(b);
        let breakdown = F::of(1e3) * F::epsilon() * scale_est.max(F::one());
        let k_now = alpha.len();

        let exhausted_dim = k_now >= n;
        let mut space_exhausted = false;
        if b <= breakdown && !exhausted_dim && k_now < kcap {
            // Invariant subspace found; continue in a fresh direction.
            let mut tries = 0;
            loop {
                let mut r = random_unit(n, &mut rng);
                reorthogonalize(&mut r, &basis);
                let nr = norm2(&r);
                if nr > F::of(1e-8) {
                    scale_in_place(&mut r, F::one() / nr);
                    w = r;
                    break;
                }
                tries += 1;
                if tries > 16 {
                    // No orthogonal direction left numerically; solve with
                    // what we have.
                    space_exhausted = true;
                    break;
                }
            }
            if !space_exhausted {
                beta.push(F::zero());
                basis.push(w);
                if k_now < next_check && k_now < kcap {
                    continue;
                }
            }
        } else if !exhausted_dim && k_now < kcap {
            beta.push(b);
            let mut vnext = w;
            scale_in_place(&mut vnext, F::one() / b);
            basis.push(vnext);
        }

        let at_cap = k_now >= kcap || exhausted_dim || space_exhausted;
        if k_now >= next_check || at_cap {
            if k_now >= d {
                let off = &beta[..k_now - 1];
                let theta = tridiagonal_values(&alpha, off)?;
                let sel = select_ordered(&theta, d, order);
                // The residual needs the remainder norm of the last step; at
                // the cap it was computed but never pushed.
                let beta_last = if exhausted_dim || space_exhausted {
                    F::zero()
                } else if beta.len() >= k_now {
                    beta[k_now - 1]
                } else {
                    b
                };
                let theta_scale = theta
                    .iter()
                    .fold(F::zero(), |acc, t| acc.max(t.abs()))
                    .max(F::one());
                // T-eigenvectors for the selected values only (inverse
                // iteration), orthogonalized within eigenvalue clusters.
                let cluster_tol = F::of(1e-8) * theta_scale;
                let mut tvecs: Vec<Vec<F>> = Vec::with_capacity(d);
                let mut residuals = Vec::with_capacity(d);
                for (pos, &j) in sel.iter().enumerate() {
                    let cluster: Vec<Vec<F>> = sel[..pos]
                        .iter()
                        .zip(tvecs.iter())
                        .filter(|(&jj, _)| (theta[jj] - theta[j]).abs() <= cluster_tol)
                        .map(|(_, v)| v.clone())
                        .collect();
                    let y = tridiagonal_eigvec(&alpha, off, theta[j], &cluster);
                    residuals.push((beta_last * y[k_now - 1]).abs());
                    tvecs.push(y);
                }
                let worst = residuals.iter().fold(F::zero(), |acc, &r| acc.max(r));
                let converged = worst <= tol * theta_scale;
                if converged || at_cap {
                    let values: Vec<F> = sel.iter().map(|&j| theta[j]).collect();
                    // Ritz vectors in one GEMM: V (n x k) times Y (k x d).
                    let mut v_mat = Array2::<F>::zeros((n, k_now));
                    for (col, bvec) in basis.iter().take(k_now).enumerate() {
                        for (row, &val) in bvec.iter().enumerate() {
                            v_mat[(row, col)] = val;
                        }
                    }
                    let mut y_mat = Array2::<F>::zeros((k_now, d));
                    for (col, y) in tvecs.iter().enumerate() {
                        for (row, &val) in y.iter().enumerate() {
                            y_mat[(row, col)] = val;
                        }
                    }
                    let mut vectors = v_mat.dot(&y_mat);
                    canonicalize_signs(&mut vectors);
                    let pairs = EigenPairs {
                        values,
                        vectors,
                        order,
                        residuals: residuals.clone(),
                    };
                    if converged {
                        return Ok((pairs, true, k_now));
                    }
                    best = Some(pairs);
                    break;
                }
            }
            next_check = ((k_now as f64 * 1.4).ceil() as usize).max(k_now + 8).min(kcap);
        }
        if at_cap {
            break;
        }
    }

    let steps = alpha.len();
    match best {
        Some(pairs) => Ok((pairs, false, steps)),
        None => Err(Error::NoConvergence {
            steps,
            residual: f64::NAN,
        }),
    }
}

struct GramOp<'a, F: Real> {
    op: &'a dyn LinOp<F>,
    /// true: AᵀA (cols side), false: AAᵀ (rows side).
    col_side: bool,
    buf: std::cell::RefCell<Vec<F>>,
}

impl<F: Real> LinOp<F> for GramOp<'_, F> {
    fn rows(&self) -> usize {
        if self.col_side {
            self.op.cols()
        } else {
            self.op.rows()
        }
    }

    fn cols(&self) -> usize {
        self.rows()
    }

    fn apply_into(&self, x: &[F], y: &mut [F]) {
        let mut buf = self.buf.borrow_mut();
        if self.col_side {
            buf.resize(self.op.rows(), F::zero());
            self.op.apply_into(x, &mut buf);
            self.op.apply_t_into(&buf, y);
        } else {
            buf.resize(self.op.cols(), F::zero());
            self.op.apply_t_into(x, &mut buf);
            self.op.apply_into(&buf, y);
        }
    }

    fn apply_t_into(&self, x: &[F], y: &mut [F]) {
        self.apply_into(x, y);
    }
}

/// Top-`d` singular triplets via Lanczos on the Gram operator of the smaller
/// side. Singular values are non-negative and descending; zero singular
/// values get deterministic orthonormal filler factors.
pub fn truncated_svd<F: Real>(
    op: &dyn LinOp<F>,
    d: usize,
    cfg: &SolverConfig,
) -> Result<SvdTriplet<F>> {
    let (rows, cols) = (op.rows(), op.cols());
    let small = rows.min(cols);
    if d > small {
        return Err(Error::RankTooLarge { d, n: small });
    }
    if d == 0 {
        return Ok(SvdTriplet {
            u: Array2::zeros((rows, 0)),
            sigma: Vec::new(),
            v: Array2::zeros((cols, 0)),
            residuals: Vec::new(),
        });
    }
    let col_side = cols <= rows;
    let gram = GramOp {
        op,
        col_side,
        buf: std::cell::RefCell::new(Vec::new()),
    };
    // The Gram operator squares the spectrum, so tighten its tolerance to
    // keep singular-value accuracy near the requested one.
    let gram_cfg = SolverConfig {
        tol: (cfg.tol * cfg.tol).max(1e-15),
        max_kdim: cfg.max_kdim,
        seed: cfg.seed,
    };
    let eig = lanczos_eig(&gram, d, OrderMode::DescendingAlgebraic, &gram_cfg)?;
    let sigma: Vec<F> = eig
        .values
        .iter()
        .map(|&t| t.max(F::zero()).sqrt())
        .collect();
    let sigma_max = sigma.first().copied().unwrap_or(F::zero());
    let floor = sigma_max.max(F::one()) * F::of(1e-12);

    let (mut u, mut v);
    if col_side {
        v = eig.vectors;
        u = Array2::<F>::zeros((rows, d));
    } else {
        u = eig.vectors;
        v = Array2::<F>::zeros((cols, d));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed ^ 0x5117_f111);
    let mut derived_cols: Vec<Vec<F>> = Vec::with_capacity(d);
    {
        let (src, dst, dst_len) = if col_side {
            (&v, &mut u, rows)
        } else {
            (&u, &mut v, cols)
        };
        for j in 0..d {
            let x: Vec<F> = src.column(j).to_vec();
            let mut y = if col_side {
                if sigma[j] > floor {
                    op.apply(&x)
                } else {
                    vec![F::zero(); dst_len]
                }
            } else if sigma[j] > floor {
                op.apply_t(&x)
            } else {
                vec![F::zero(); dst_len]
            };
            if sigma[j] > floor {
                scale_in_place(&mut y, F::one() / sigma[j]);
            }
            // Orthonormalize against earlier derived columns; degenerate
            // columns get a deterministic random orthogonal filler.
            reorthogonalize(&mut y, &derived_cols);
            let mut ny = norm2(&y);
            let mut guard = 0;
            while ny <= F::of(1e-6) {
                y = random_unit(dst_len, &mut rng);
                reorthogonalize(&mut y, &derived_cols);
                ny = norm2(&y);
                guard += 1;
                if guard > 32 {
                    return Err(Error::NoConvergence {
                        steps: guard,
                        residual: ny.to_f64_lossy(),
                    });
                }
            }
            scale_in_place(&mut y, F::one() / ny);
            for (row, &val) in y.iter().enumerate() {
                dst[(row, j)] = val;
            }
            derived_cols.push(y);
        }
    }
    // Couple the sign convention: largest-|entry| of each u column positive,
    // with the matching v column flipped alongside.
    let flips = canonicalize_signs(&mut u);
    for (j, flip) in flips.into_iter().enumerate() {
        if flip {
            for row in 0..v.nrows() {
                v[(row, j)] = -v[(row, j)];
            }
        }
    }
    let mut residuals = Vec::with_capacity(d);
    for j in 0..d {
        let vj: Vec<F> = v.column(j).to_vec();
        let mut r = op.apply(&vj);
        let uj: Vec<F> = u.column(j).to_vec();
        axpy(&mut r, -sigma[j], &uj);
        residuals.push(norm2(&r));
    }
    Ok(SvdTriplet {
        u,
        sigma,
        v,
        residuals,
    })
}

/// Spectral norm estimate.
#[derive(Clone, Debug)]
pub struct NormEstimate<F> {
    pub value: F,
    pub converged: bool,
    pub iters: usize,
    /// Last relative change of the estimate; a crude error indicator.
    pub rel_err: F,
    /// Final right vector, reusable as a warm start.
    pub vector: Vec<F>,
}

#[derive(Clone, Debug)]
pub struct NormConfig<F> {
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
    pub warm_start: Option<Vec<F>>,
}

impl<F> Default for NormConfig<F> {
    fn default() -> Self {
        NormConfig {
            tol: 1e-6,
            max_iter: 600,
            seed: 42,
            warm_start: None,
        }
    }
}

/// Largest singular value via Lanczos on the Gram operator `AᵀA` (seeded,
/// optional warm start). Lanczos handles clustered spectra where plain power
/// iteration stalls; the Hermitian residual bounds the eigenvalue error, so
/// `tol` is a genuine relative accuracy for the returned value. Returns 0
/// for the zero operator; non-convergence is reported through the flag while
/// still returning the best estimate.
pub fn spectral_norm<F: Real>(op: &dyn LinOp<F>, cfg: &NormConfig<F>) -> NormEstimate<F> {
    let cols = op.cols();
    let rows = op.rows();
    if cols == 0 || rows == 0 {
        return NormEstimate {
            value: F::zero(),
            converged: true,
            iters: 0,
            rel_err: F::zero(),
            vector: Vec::new(),
        };
    }
    let gram = GramOp {
        op,
        col_side: true,
        buf: std::cell::RefCell::new(Vec::new()),
    };
    let solver = SolverConfig {
        tol: cfg.tol,
        max_kdim: cfg.max_iter.max(8).min(cols),
        seed: cfg.seed,
    };
    let start = cfg.warm_start.as_deref();
    match lanczos_core(&gram, 1, OrderMode::DescendingAlgebraic, &solver, start) {
        Ok((pairs, converged, steps)) => {
            let theta = pairs.values[0].max(F::zero());
            let value = theta.sqrt();
            // |theta - lambda| <= residual for symmetric operators, so the
            // singular-value error is about residual / (2 value).
            let rel_err = if theta > F::zero() {
                (pairs.residuals[0] / theta).max(F::epsilon())
            } else {
                F::zero()
            };
            NormEstimate {
                value,
                converged,
                iters: steps,
                rel_err,
                vector: pairs.vectors.column(0).to_vec(),
            }
        }
        Err(_) => NormEstimate {
            value: F::zero(),
            converged: false,
            iters: 0,
            rel_err: F::one(),
            vector: vec![F::zero(); cols],
        },
    }
}

/// Per-column absolute Pearson correlation between `e_old` and the first
/// `n_old` rows of `e_new`. Constant columns yield 0 with a flag.
#[derive(Clone, Debug)]
pub struct PrefixCorrelation<F> {
    pub values: Vec<F>,
    pub constant: Vec<bool>,
}

pub fn prefix_correlation<F: Real>(
    e_old: ArrayView2<F>,
    e_new: ArrayView2<F>,
) -> Result<PrefixCorrelation<F>> {
    let n = e_old.nrows();
    let d = e_old.ncols();
    if n < 2 {
        return Err(Error::invalid("n", "need at least two rows for correlation"));
    }
    if e_new.ncols() != d {
        return Err(Error::DimMismatch {
            what: "correlation columns",
            left: d,
            right: e_new.ncols(),
        });
    }
    if e_new.nrows() < n {
        return Err(Error::DimMismatch {
            what: "correlation rows",
            left: n,
            right: e_new.nrows(),
        });
    }
    let nf = F::from_usize_lossy(n);
    let mut values = Vec::with_capacity(d);
    let mut constant = Vec::with_capacity(d);
    for j in 0..d {
        let a = e_old.column(j);
        let b = e_new.column(j);
        let mean_a = a.iter().copied().sum::<F>() / nf;
        let mean_b = b.iter().take(n).copied().sum::<F>() / nf;
        let mut cov = F::zero();
        let mut var_a = F::zero();
        let mut var_b = F::zero();
        let mut scale_a = F::zero();
        let mut scale_b = F::zero();
        for i in 0..n {
            let da = a[i] - mean_a;
            let db = b[i] - mean_b;
            cov += da * db;
            var_a += da * da;
            var_b += db * db;
            scale_a = scale_a.max(a[i].abs());
            scale_b = scale_b.max(b[i].abs());
        }
        let tiny_a = var_a <= F::epsilon() * nf * scale_a * scale_a;
        let tiny_b = var_b <= F::epsilon() * nf * scale_b * scale_b;
        if tiny_a || tiny_b || var_a == F::zero() || var_b == F::zero() {
            values.push(F::zero());
            constant.push(true);
        } else {
            values.push((cov / (var_a.sqrt() * var_b.sqrt())).abs());
            constant.push(false);
        }
    }
    Ok(PrefixCorrelation { values, constant })
}

/// Max-norm departure from column orthonormality, `max |VᵀV - I|`.
pub fn orthonormality_defect<F: Real>(m: ArrayView2<F>) -> F {
    let d = m.ncols();
    let mut worst = F::zero();
    for i in 0..d {
        for j in i..d {
            let mut acc = F::zero();
            for r in 0..m.nrows() {
                acc += m[(r, i)] * m[(r, j)];
            }
            let target = if i == j { F::one() } else { F::zero() };
            worst = worst.max((acc - target).abs());
        }
    }
    worst
}
