//! Linear solve of the monolithic system: sparse direct LU by default, with
//! a restarted GMRES + ILU(0) backend behind the same contract.
//!
//! Factorization runs in `f64` regardless of the field scalar; the direct
//! path adds iterative refinement until the relative residual meets
//! [`RESIDUAL_TOL`]. A factorization can be reused across steps whenever
//! the caller knows the matrix did not change (static mesh, no solid).

use crate::assembly::SparseSystem;
use crate::real::Real;
use faer::prelude::Solve;
use faer::sparse::{SparseColMat, Triplet};
use std::fmt;

/// Accepted relative residual of a solve.
pub const RESIDUAL_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SolverBackend {
    /// Sparse direct LU of the full monolithic matrix.
    Direct,
    /// Restarted GMRES with ILU(0) preconditioning.
    Gmres {
        restart: usize,
        max_outer: usize,
        tol: f64,
    },
}

impl Default for SolverBackend {
    fn default() -> Self {
        SolverBackend::Direct
    }
}

impl SolverBackend {
    pub fn default_gmres() -> Self {
        SolverBackend::Gmres {
            restart: 80,
            max_outer: 60,
            tol: 1e-10,
        }
    }
}

#[derive(Debug)]
pub enum SolverError {
    Factorization(String),
    NotConverged { residual: f64 },
}

impl fmt::Display for SolverError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SolverError::Factorization(msg) => write!(f, "factorization failed: {msg}"),
            SolverError::NotConverged { residual } => {
                write!(f, "linear solver did not converge (residual {residual:.3e})")
            }
        }
    }
}

impl std::error::Error for SolverError {}

#[derive(Debug, Clone, Copy)]
pub struct SolveStats {
    /// Relative residual of the returned solution.
    pub residual: f64,
    /// Krylov iterations (0 for the direct path).
    pub iterations: usize,
}

struct Csr {
    n: usize,
    row_ptr: Vec<usize>,
    col: Vec<usize>,
    val: Vec<f64>,
}

impl Csr {
    fn from_triplets(n: usize, triplets: &[(u32, u32, f64)]) -> Self {
        let mut sorted: Vec<(u32, u32, f64)> = triplets.to_vec();
        sorted.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; n + 1];
        let mut col = Vec::with_capacity(sorted.len());
        let mut val: Vec<f64> = Vec::with_capacity(sorted.len());
        // Merge duplicates while building.
        let mut i = 0;
        while i < sorted.len() {
            let (r, c, mut v) = sorted[i];
            let mut j = i + 1;
            while j < sorted.len() && sorted[j].0 == r && sorted[j].1 == c {
                v += sorted[j].2;
                j += 1;
            }
            col.push(c as usize);
            val.push(v);
            row_ptr[r as usize + 1] += 1;
            i = j;
        }
        for r in 0..n {
            row_ptr[r + 1] += row_ptr[r];
        }
        Csr {
            n,
            row_ptr,
            col,
            val,
        }
    }

    fn matvec(&self, x: &[f64], y: &mut [f64]) {
        for r in 0..self.n {
            let mut s = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                s += self.val[k] * x[self.col[k]];
            }
            y[r] = s;
        }
    }
}

/// ILU(0): incomplete LU on the sparsity pattern of A.
struct Ilu0 {
    csr: Csr,
    diag_idx: Vec<usize>,
}

impl Ilu0 {
    fn new(mut csr: Csr) -> Result<Self, SolverError> {
        let n = csr.n;
        let mut diag_idx = vec![usize::MAX; n];
        for r in 0..n {
            for k in csr.row_ptr[r]..csr.row_ptr[r + 1] {
                if csr.col[k] == r {
                    diag_idx[r] = k;
                }
            }
            if diag_idx[r] == usize::MAX {
                return Err(SolverError::Factorization(format!(
                    "row {r} has no diagonal entry"
                )));
            }
        }
        // Standard IKJ-ordered in-place ILU(0).
        let mut colmap = vec![usize::MAX; n];
        for i in 0..n {
            for k in csr.row_ptr[i]..csr.row_ptr[i + 1] {
                colmap[csr.col[k]] = k;
            }
            let (start, end) = (csr.row_ptr[i], csr.row_ptr[i + 1]);
            for kk in start..end {
                let k = csr.col[kk];
                if k >= i {
                    break;
                }
                let pivot = csr.val[diag_idx[k]];
                if pivot.abs() < 1e-300 {
                    return Err(SolverError::Factorization(format!(
                        "zero ILU pivot at row {k}"
                    )));
                }
                let factor = csr.val[kk] / pivot;
                csr.val[kk] = factor;
                for jj in diag_idx[k] + 1..csr.row_ptr[k + 1] {
                    let j = csr.col[jj];
                    let pos = colmap[j];
                    if pos != usize::MAX && pos >= start && pos < end {
                        csr.val[pos] -= factor * csr.val[jj];
                    }
                }
            }
            for k in start..end {
                colmap[csr.col[k]] = usize::MAX;
            }
        }
        Ok(Self { csr, diag_idx })
    }

    /// Solves `LU z = r`.
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        let n = self.csr.n;
        // Forward: L has unit diagonal.
        for i in 0..n {
            let mut s = r[i];
            for k in self.csr.row_ptr[i]..self.csr.row_ptr[i + 1] {
                let j = self.csr.col[k];
                if j >= i {
                    break;
                }
                s -= self.csr.val[k] * z[j];
            }
            z[i] = s;
        }
        // Backward.
        for i in (0..n).rev() {
            let mut s = z[i];
            for k in self.diag_idx[i] + 1..self.csr.row_ptr[i + 1] {
                s -= self.csr.val[k] * z[self.csr.col[k]];
            }
            z[i] = s / self.csr.val[self.diag_idx[i]];
        }
    }
}

/// Stateful linear solver; owns the cached factorization, if any.
pub struct LinearSolver {
    backend: SolverBackend,
    cached: Option<CachedLu>,
}

struct CachedLu {
    n: usize,
    /// Fingerprint of the sparsity pattern the symbolic analysis was
    /// computed for.
    pattern_hash: u64,
    symbolic: faer::sparse::linalg::solvers::SymbolicLu<usize>,
    lu: Option<faer::sparse::linalg::solvers::Lu<usize, f64>>,
    scatter: ScatterMap,
}

fn pattern_hash(col_ptr: &[usize], row_idx: &[usize]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let mut mix = |x: u64| {
        h ^= x;
        h = h.wrapping_mul(0x1000_0000_01b3);
    };
    for &p in col_ptr {
        mix(p as u64);
    }
    for &i in row_idx {
        mix(i as u64);
    }
    h
}

/// Precomputed triplet-to-CSC scatter. Element assembly emits triplets in a
/// deterministic order while the connectivity is fixed, so the map can fill
/// the numeric values without re-sorting every step.
struct ScatterMap {
    n_triplets: usize,
    structure: faer::sparse::SymbolicSparseColMat<usize>,
    position: Vec<usize>,
}

impl ScatterMap {
    fn build(n: usize, triplets: &[(u32, u32, f64)]) -> Self {
        let mut order: Vec<usize> = (0..triplets.len()).collect();
        order.sort_unstable_by_key(|&k| (triplets[k].1, triplets[k].0));
        let mut col_ptr = vec![0usize; n + 1];
        let mut row_idx = Vec::with_capacity(triplets.len());
        let mut position = vec![0usize; triplets.len()];
        let mut prev: Option<(u32, u32)> = None;
        for &k in &order {
            let (r, c, _) = triplets[k];
            if prev != Some((c, r)) {
                row_idx.push(r as usize);
                col_ptr[c as usize + 1] += 1;
                prev = Some((c, r));
            }
            position[k] = row_idx.len() - 1;
        }
        for c in 0..n {
            col_ptr[c + 1] += col_ptr[c];
        }
        let structure = faer::sparse::SymbolicSparseColMat::new_checked(n, n, col_ptr, None, row_idx);
        Self {
            n_triplets: triplets.len(),
            structure,
            position,
        }
    }

    fn fill(&self, triplets: &[(u32, u32, f64)]) -> SparseColMat<usize, f64> {
        let mut values = vec![0.0f64; self.structure.row_idx().len()];
        for (k, &(_, _, v)) in triplets.iter().enumerate() {
            values[self.position[k]] += v;
        }
        SparseColMat::new(self.structure.clone(), values)
    }
}

impl LinearSolver {
    pub fn new(backend: SolverBackend) -> Self {
        Self {
            backend,
            cached: None,
        }
    }

    pub fn backend(&self) -> SolverBackend {
        self.backend
    }

    pub fn invalidate_cache(&mut self) {
        self.cached = None;
    }

    /// Solves the system; `matrix_unchanged` permits reuse of the previous
    /// factorization (the right-hand side is always fresh).
    pub fn solve<R: Real>(
        &mut self,
        system: &SparseSystem<R>,
        matrix_unchanged: bool,
    ) -> Result<(Vec<R>, SolveStats), SolverError> {
        let n = system.n;
        let triplets: Vec<(u32, u32, f64)> = system
            .triplets
            .iter()
            .map(|&(r, c, v)| (r, c, v.to_f64()))
            .collect();
        let b: Vec<f64> = system.rhs.iter().map(|&v| v.to_f64()).collect();

        let (x, stats) = match self.backend {
            SolverBackend::Direct => self.solve_direct(n, &triplets, &b, matrix_unchanged)?,
            SolverBackend::Gmres {
                restart,
                max_outer,
                tol,
            } => {
                let csr = Csr::from_triplets(n, &triplets);
                gmres_ilu(&csr, &b, restart, max_outer, tol)?
            }
        };
        Ok((x.into_iter().map(R::of).collect(), stats))
    }

    fn solve_direct(
        &mut self,
        n: usize,
        triplets: &[(u32, u32, f64)],
        b: &[f64],
        matrix_unchanged: bool,
    ) -> Result<(Vec<f64>, SolveStats), SolverError> {
        use faer::sparse::linalg::solvers::{Lu, SymbolicLu};

        let reuse_numeric = matrix_unchanged
            && self
                .cached
                .as_ref()
                .is_some_and(|c| c.n == n && c.lu.is_some());

        if !reuse_numeric {
            // The scatter map and symbolic analysis only depend on the
            // sparsity pattern, which is fixed while the connectivity is;
            // rebuild them only when the pattern changes.
            let reuse_pattern = self
                .cached
                .as_ref()
                .is_some_and(|c| c.n == n && c.scatter.n_triplets == triplets.len());
            let mat = if reuse_pattern {
                self.cached.as_ref().unwrap().scatter.fill(triplets)
            } else {
                let scatter = ScatterMap::build(n, triplets);
                let mat = scatter.fill(triplets);
                let hash = pattern_hash(mat.col_ptr(), mat.row_idx());
                let keep_symbolic = self
                    .cached
                    .as_ref()
                    .is_some_and(|c| c.n == n && c.pattern_hash == hash);
                if keep_symbolic {
                    let c = self.cached.as_mut().unwrap();
                    c.scatter = scatter;
                } else {
                    let symbolic = SymbolicLu::try_new(mat.symbolic())
                        .map_err(|e| SolverError::Factorization(format!("{e:?}")))?;
                    self.cached = Some(CachedLu {
                        n,
                        pattern_hash: hash,
                        symbolic,
                        lu: None,
                        scatter,
                    });
                }
                mat
            };
            let cache = self.cached.as_mut().expect("cache present");
            let lu = Lu::try_new_with_symbolic(cache.symbolic.clone(), mat.as_ref())
                .map_err(|e| SolverError::Factorization(format!("{e:?}")))?;
            cache.lu = Some(lu);
        }
        let lu = self
            .cached
            .as_ref()
            .and_then(|c| c.lu.as_ref())
            .expect("factorization present");

        let rhs = faer::Mat::<f64>::from_fn(n, 1, |i, _| b[i]);
        let sol = lu.solve(&rhs);
        let mut x: Vec<f64> = (0..n).map(|i| sol[(i, 0)]).collect();

        // Iterative refinement against the unfactored matrix (triplet
        // matvec; the triplet list may contain duplicates, which sum).
        let norm_b = norm2(b).max(f64::MIN_POSITIVE);
        let mut residual = f64::INFINITY;
        for _ in 0..3 {
            let mut r = b.to_vec();
            for &(row, col, v) in triplets {
                r[row as usize] -= v * x[col as usize];
            }
            residual = norm2(&r) / norm_b;
            if residual <= RESIDUAL_TOL {
                break;
            }
            let rm = faer::Mat::<f64>::from_fn(n, 1, |i, _| r[i]);
            let dx = lu.solve(&rm);
            for i in 0..n {
                x[i] += dx[(i, 0)];
            }
        }
        if residual > RESIDUAL_TOL {
            return Err(SolverError::NotConverged { residual });
        }
        Ok((
            x,
            SolveStats {
                residual,
                iterations: 0,
            },
        ))
    }
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|&x| x * x).sum::<f64>().sqrt()
}

/// Right-preconditioned restarted GMRES.
fn gmres_ilu(
    a: &Csr,
    b: &[f64],
    restart: usize,
    max_outer: usize,
    tol: f64,
) -> Result<(Vec<f64>, SolveStats), SolverError> {
    let n = a.n;
    let ilu = Ilu0::new(Csr {
        n,
        row_ptr: a.row_ptr.clone(),
        col: a.col.clone(),
        val: a.val.clone(),
    })?;

    let norm_b = norm2(b).max(f64::MIN_POSITIVE);
    let mut x = vec![0.0; n];
    let mut total_iters = 0usize;
    let m = restart.max(1);

    let mut scratch = vec![0.0; n];
    for _outer in 0..max_outer {
        // r = b - A x
        a.matvec(&x, &mut scratch);
        let mut r: Vec<f64> = (0..n).map(|i| b[i] - scratch[i]).collect();
        let beta = norm2(&r);
        if beta / norm_b <= tol {
            return Ok((
                x,
                SolveStats {
                    residual: beta / norm_b,
                    iterations: total_iters,
                },
            ));
        }
        for v in r.iter_mut() {
            *v /= beta;
        }

        let mut basis: Vec<Vec<f64>> = vec![r];
        let mut h = vec![vec![0.0f64; m]; m + 1];
        let mut cs = vec![0.0f64; m];
        let mut sn = vec![0.0f64; m];
        let mut g = vec![0.0f64; m + 1];
        g[0] = beta;
        let mut k_used = 0;

        for k in 0..m {
            total_iters += 1;
            // w = A M^-1 v_k
            let mut z = vec![0.0; n];
            ilu.apply(&basis[k], &mut z);
            let mut w = vec![0.0; n];
            a.matvec(&z, &mut w);

            for i in 0..=k {
                let hik: f64 = w.iter().zip(&basis[i]).map(|(a, b)| a * b).sum();
                h[i][k] = hik;
                for (wj, vj) in w.iter_mut().zip(&basis[i]) {
                    *wj -= hik * vj;
                }
            }
            let hkk = norm2(&w);
            h[k + 1][k] = hkk;

            // Givens rotations.
            for i in 0..k {
                let tmp = cs[i] * h[i][k] + sn[i] * h[i + 1][k];
                h[i + 1][k] = -sn[i] * h[i][k] + cs[i] * h[i + 1][k];
                h[i][k] = tmp;
            }
            let denom = (h[k][k] * h[k][k] + h[k + 1][k] * h[k + 1][k]).sqrt();
            if denom < 1e-300 {
                k_used = k;
                break;
            }
            cs[k] = h[k][k] / denom;
            sn[k] = h[k + 1][k] / denom;
            h[k][k] = denom;
            h[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            k_used = k + 1;

            if hkk > 1e-300 {
                let vk: Vec<f64> = w.iter().map(|&v| v / hkk).collect();
                basis.push(vk);
            } else {
                break;
            }
            if (g[k + 1].abs() / norm_b) <= tol {
                break;
            }
        }

        // Back-substitute y from the triangular H and update x.
        let k = k_used;
        if k == 0 {
            break;
        }
        let mut y = vec![0.0f64; k];
        for i in (0..k).rev() {
            let mut s = g[i];
            for j in i + 1..k {
                s -= h[i][j] * y[j];
            }
            y[i] = s / h[i][i];
        }
        let mut update = vec![0.0; n];
        for (j, &yj) in y.iter().enumerate() {
            for i in 0..n {
                update[i] += yj * basis[j][i];
            }
        }
        let mut z = vec![0.0; n];
        ilu.apply(&update, &mut z);
        for i in 0..n {
            x[i] += z[i];
        }
    }

    a.matvec(&x, &mut scratch);
    let r: Vec<f64> = (0..n).map(|i| b[i] - scratch[i]).collect();
    let residual = norm2(&r) / norm_b;
    if residual <= tol.max(RESIDUAL_TOL) {
        Ok((
            x,
            SolveStats {
                residual,
                iterations: total_iters,
            },
        ))
    } else {
        Err(SolverError::NotConverged { residual })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::BlockRanges;
    use crate::fespace::build_spaces;
    use crate::mesh::generate_rect_mesh;

    fn laplace_system(n: usize) -> SparseSystem<f64> {
        // 1D Dirichlet Laplacian, solution x_i = i (i.e. u = linear).
        let mut triplets = Vec::new();
        let mut rhs = vec![0.0; n];
        for i in 0..n {
            triplets.push((i as u32, i as u32, 2.0));
            if i > 0 {
                triplets.push((i as u32, (i - 1) as u32, -1.0));
            }
            if i + 1 < n {
                triplets.push((i as u32, (i + 1) as u32, -1.0));
            }
        }
        rhs[n - 1] = n as f64;
        let mesh = generate_rect_mesh::<f64>(1.0, 1.0, 1, 1).unwrap();
        let dofs = build_spaces(&mesh).unwrap();
        SparseSystem {
            n,
            triplets,
            rhs,
            blocks: BlockRanges::new(&dofs),
            dirichlet: vec![None; n],
        }
    }

    #[test]
    fn direct_solves_laplacian() {
        let sys = laplace_system(50);
        let mut solver = LinearSolver::new(SolverBackend::Direct);
        let (x, stats) = solver.solve(&sys, false).unwrap();
        assert!(stats.residual <= RESIDUAL_TOL);
        // Exact solution of the tridiagonal system: x_i = c (i + 1) with
        // c = n / (n + 1).
        let c = sys.n as f64 / (sys.n + 1) as f64;
        for (i, &xi) in x.iter().enumerate() {
            assert!((xi - c * (i + 1) as f64).abs() < 1e-9);
        }
    }

    #[test]
    fn direct_cache_reuse_matches_fresh_solve() {
        let sys = laplace_system(40);
        let mut solver = LinearSolver::new(SolverBackend::Direct);
        let (x1, _) = solver.solve(&sys, false).unwrap();
        let mut sys2 = sys.clone();
        for v in sys2.rhs.iter_mut() {
            *v *= 2.0;
        }
        let (x2, _) = solver.solve(&sys2, true).unwrap();
        for i in 0..sys.n {
            assert!((x2[i] - 2.0 * x1[i]).abs() < 1e-8);
        }
    }

    #[test]
    fn gmres_matches_direct_on_nonsymmetric_system() {
        let mut sys = laplace_system(60);
        // Break symmetry.
        for (r, c, v) in sys.triplets.iter_mut() {
            if *c == *r + 1 {
                *v = -1.3;
            }
        }
        let mut direct = LinearSolver::new(SolverBackend::Direct);
        let (xd, _) = direct.solve(&sys, false).unwrap();
        let mut gmres = LinearSolver::new(SolverBackend::default_gmres());
        let (xg, stats) = gmres.solve(&sys, false).unwrap();
        assert!(stats.residual <= 1e-9);
        for i in 0..sys.n {
            assert!((xd[i] - xg[i]).abs() < 1e-6 * (1.0 + xd[i].abs()));
        }
    }
}
