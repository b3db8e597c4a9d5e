//! Preconditioned Krylov solvers for the assembled systems, plus a sparse
//! direct fallback for small, badly conditioned ones.

use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sparse::{CsrMatrix, SparseError};

/// Reduction block size; partial sums are combined in block order so dot
/// products do not depend on how rayon schedules the blocks.
const BLOCK: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preconditioner {
    Jacobi,
    /// Zero-fill incomplete LU; sequential, but far fewer iterations on
    /// large systems.
    Ilu0,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverMethod {
    BiCgStab,
    /// Only valid for symmetric positive definite systems.
    Cg,
    /// Sparse LU with partial pivoting and iterative refinement. Memory grows
    /// quickly with size in 3D; meant for systems up to ~10⁵ unknowns.
    Direct,
    /// `Direct` up to [`AUTO_DIRECT_MAX`] unknowns, `BiCgStab` above.
    Auto,
}

/// Largest system `SolverMethod::Auto` factorizes directly.
pub const AUTO_DIRECT_MAX: usize = 60_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Relative residual target `‖b − Ax‖ / ‖b‖`.
    pub tol: f64,
    /// `None` means `20·√N`.
    pub max_iter: Option<usize>,
    pub preconditioner: Preconditioner,
    pub method: SolverMethod,
    /// Stabilizing polynomial degree ℓ of BiCGStab(ℓ). Degree 1 stalls on
    /// the non-symmetric Nitsche systems whose spectra are strongly complex.
    pub degree: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tol: 1e-10,
            max_iter: None,
            preconditioner: Preconditioner::Jacobi,
            method: SolverMethod::BiCgStab,
            degree: 4,
        }
    }
}

impl SolverConfig {
    pub fn iteration_limit(&self, n: usize) -> usize {
        self.max_iter
            .unwrap_or_else(|| ((20.0 * (n as f64).sqrt()).ceil() as usize).max(1))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    /// Recomputed from scratch after the iteration stops.
    pub relative_residual: f64,
    pub converged: bool,
    pub wall_time: Duration,
}

#[derive(Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("Krylov breakdown at iteration {iteration} (zero inner product)")]
    Breakdown { iteration: usize, report: SolveReport },
    #[error("not converged after {} iterations (relative residual {:e})", report.iterations, report.relative_residual)]
    NotConverged { report: SolveReport, solution: Vec<f64> },
    #[error("zero diagonal or pivot in row {row}; the preconditioner cannot be built")]
    ZeroDiagonal { row: usize },
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error("sparse LU failed: {0}")]
    Factorization(String),
    #[error(transparent)]
    Dimension(#[from] SparseError),
}

impl std::fmt::Debug for SolverError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SolverError::Breakdown { iteration, report } => f
                .debug_struct("Breakdown")
                .field("iteration", iteration)
                .field("report", report)
                .finish(),
            // the best iterate can be large; show only its length
            SolverError::NotConverged { report, solution } => f
                .debug_struct("NotConverged")
                .field("report", report)
                .field("solution_len", &solution.len())
                .finish(),
            SolverError::ZeroDiagonal { row } => f.debug_struct("ZeroDiagonal").field("row", row).finish(),
            SolverError::InvalidConfig(m) => f.debug_tuple("InvalidConfig").field(m).finish(),
            SolverError::Factorization(m) => f.debug_tuple("Factorization").field(m).finish(),
            SolverError::Dimension(e) => f.debug_tuple("Dimension").field(e).finish(),
        }
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    let partial: Vec<f64> = a
        .par_chunks(BLOCK)
        .zip(b.par_chunks(BLOCK))
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>())
        .collect();
    partial.iter().sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `y += alpha * x`
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    y.par_iter_mut().zip(x.par_iter()).for_each(|(yi, xi)| *yi += alpha * xi);
}

enum Precond {
    Identity,
    Jacobi(Vec<f64>),
    Ilu(Ilu0),
}

fn apply_precond(m: &Precond, x: &[f64], out: &mut [f64]) {
    match m {
        Precond::Jacobi(d) => out
            .par_iter_mut()
            .zip(x.par_iter().zip(d.par_iter()))
            .for_each(|(o, (xi, di))| *o = xi * di),
        Precond::Identity => out.copy_from_slice(x),
        Precond::Ilu(f) => f.solve(x, out),
    }
}

/// Incomplete LU factorization restricted to the matrix pattern. `L` has a
/// unit diagonal and shares storage with `U`.
struct Ilu0 {
    lu: CsrMatrix,
    diag: Vec<usize>,
}

impl Ilu0 {
    fn factor(a: &CsrMatrix) -> Result<Ilu0, SolverError> {
        let n = a.nrows;
        let mut lu = a.clone();
        let mut diag = Vec::with_capacity(n);
        for i in 0..n {
            diag.push(lu.position(i, i).ok_or(SolverError::ZeroDiagonal { row: i })?);
        }
        // scatter map from column to storage index for the current row
        let mut slot = vec![usize::MAX; n];
        for i in 0..n {
            let (start, end) = (lu.row_ptr[i], lu.row_ptr[i + 1]);
            for k in start..end {
                slot[lu.col_idx[k]] = k;
            }
            for k in start..end {
                let col = lu.col_idx[k];
                if col >= i {
                    break;
                }
                let pivot = lu.values[diag[col]];
                let factor = lu.values[k] / pivot;
                lu.values[k] = factor;
                for m in diag[col] + 1..lu.row_ptr[col + 1] {
                    let s = slot[lu.col_idx[m]];
                    if s != usize::MAX {
                        lu.values[s] -= factor * lu.values[m];
                    }
                }
            }
            for k in start..end {
                slot[lu.col_idx[k]] = usize::MAX;
            }
            let d = lu.values[diag[i]];
            if d == 0.0 || !d.is_finite() {
                return Err(SolverError::ZeroDiagonal { row: i });
            }
        }
        Ok(Ilu0 { lu, diag })
    }

    fn solve(&self, x: &[f64], out: &mut [f64]) {
        let a = &self.lu;
        for i in 0..a.nrows {
            let mut v = x[i];
            for k in a.row_ptr[i]..self.diag[i] {
                v -= a.values[k] * out[a.col_idx[k]];
            }
            out[i] = v;
        }
        for i in (0..a.nrows).rev() {
            let mut v = out[i];
            for k in self.diag[i] + 1..a.row_ptr[i + 1] {
                v -= a.values[k] * out[a.col_idx[k]];
            }
            out[i] = v / a.values[self.diag[i]];
        }
    }
}

pub fn residual(a: &CsrMatrix, x: &[f64], b: &[f64]) -> Result<Vec<f64>, SparseError> {
    let mut r = a.matvec(x)?;
    r.par_iter_mut().zip(b.par_iter()).for_each(|(ri, bi)| *ri = bi - *ri);
    Ok(r)
}

pub fn relative_residual(a: &CsrMatrix, x: &[f64], b: &[f64]) -> Result<f64, SparseError> {
    let bn = norm(b);
    let rn = norm(&residual(a, x, b)?);
    Ok(if bn == 0.0 { rn } else { rn / bn })
}

/// Solves `A x = b` from a zero initial guess.
pub fn solve(a: &CsrMatrix, b: &[f64], cfg: &SolverConfig) -> Result<(Vec<f64>, SolveReport), SolverError> {
    if !(cfg.tol > 0.0 && cfg.tol < 1.0) {
        return Err(SolverError::InvalidConfig(format!("tolerance {} outside (0, 1)", cfg.tol)));
    }
    if cfg.max_iter == Some(0) {
        return Err(SolverError::InvalidConfig("max_iter must be at least 1".into()));
    }
    if !(1..=8).contains(&cfg.degree) {
        return Err(SolverError::InvalidConfig(format!("BiCGStab degree {} outside 1..=8", cfg.degree)));
    }
    if a.nrows != a.ncols || b.len() != a.nrows {
        return Err(SparseError::DimensionMismatch {
            rows: a.nrows,
            cols: a.ncols,
            len: b.len(),
        }
        .into());
    }
    let method = match cfg.method {
        SolverMethod::Auto if b.len() <= AUTO_DIRECT_MAX => SolverMethod::Direct,
        SolverMethod::Auto => SolverMethod::BiCgStab,
        m => m,
    };
    if method == SolverMethod::Direct {
        return direct(a, b, cfg.tol);
    }
    let inv_diag = match cfg.preconditioner {
        Preconditioner::None => Precond::Identity,
        Preconditioner::Jacobi => {
            let d = a.diagonal();
            if let Some(row) = d.iter().position(|&v| v == 0.0) {
                return Err(SolverError::ZeroDiagonal { row });
            }
            Precond::Jacobi(d.iter().map(|v| 1.0 / v).collect())
        }
        Preconditioner::Ilu0 => Precond::Ilu(Ilu0::factor(a)?),
    };
    let start = Instant::now();
    let n = b.len();
    if norm(b) == 0.0 {
        return Ok((
            vec![0.0; n],
            SolveReport {
                iterations: 0,
                relative_residual: 0.0,
                converged: true,
                wall_time: start.elapsed(),
            },
        ));
    }
    let limit = cfg.iteration_limit(n);
    let mut x = vec![0.0; n];
    let mut used = 0;
    let mut prev_rel = 1.0;
    // restart from the true residual if the recursive one drifted or the
    // shadow residual broke down after some progress
    for _ in 0..8 {
        let outcome = match method {
            SolverMethod::BiCgStab => bicgstab(a, b, &mut x, &inv_diag, cfg.tol, limit.saturating_sub(used), cfg.degree),
            SolverMethod::Cg => cg(a, b, &mut x, &inv_diag, cfg.tol, limit.saturating_sub(used)),
            SolverMethod::Direct | SolverMethod::Auto => unreachable!("resolved before the Krylov loop"),
        };
        let true_rel = relative_residual(a, &x, b)?;
        log::debug!("krylov pass ended after {used} iterations, true residual {true_rel:e}");
        let report = |iterations: usize, converged: bool| SolveReport {
            iterations,
            relative_residual: true_rel,
            converged,
            wall_time: start.elapsed(),
        };
        match outcome {
            Inner::Done(it) => {
                used += it;
                if true_rel <= cfg.tol {
                    return Ok((x, report(used, true)));
                }
                if used >= limit {
                    return Err(SolverError::NotConverged {
                        report: report(used, false),
                        solution: x,
                    });
                }
                prev_rel = true_rel;
            }
            Inner::Exhausted(it) => {
                used += it;
                if true_rel <= cfg.tol {
                    return Ok((x, report(used, true)));
                }
                return Err(SolverError::NotConverged {
                    report: report(used, false),
                    solution: x,
                });
            }
            Inner::Breakdown(it) => {
                used += it;
                if true_rel <= cfg.tol {
                    return Ok((x, report(used, true)));
                }
                if true_rel < prev_rel && used < limit {
                    prev_rel = true_rel;
                    continue;
                }
                return Err(SolverError::Breakdown {
                    iteration: used,
                    report: report(used, false),
                });
            }
        }
    }
    let true_rel = relative_residual(a, &x, b)?;
    Err(SolverError::NotConverged {
        report: SolveReport {
            iterations: used,
            relative_residual: true_rel,
            converged: false,
            wall_time: start.elapsed(),
        },
        solution: x,
    })
}

/// Refinement sweeps after the first LU solve.
const REFINEMENT_STEPS: usize = 3;

fn direct(a: &CsrMatrix, b: &[f64], tol: f64) -> Result<(Vec<f64>, SolveReport), SolverError> {
    use faer::linalg::solvers::Solve;
    use faer::sparse::{SparseColMat, Triplet};

    let start = Instant::now();
    let n = b.len();
    let triplets: Vec<Triplet<usize, usize, f64>> = (0..n)
        .flat_map(|i| (a.row_ptr[i]..a.row_ptr[i + 1]).map(move |k| (i, k)))
        .map(|(i, k)| Triplet::new(i, a.col_idx[k], a.values[k]))
        .collect();
    let mat = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &triplets)
        .map_err(|e| SolverError::Factorization(format!("{e:?}")))?;
    let lu = mat.sp_lu().map_err(|e| SolverError::Factorization(format!("{e:?}")))?;
    let lu_solve = |r: &[f64]| {
        let x = lu.solve(faer::Col::<f64>::from_fn(n, |i| r[i]));
        (0..n).map(|i| x[i]).collect::<Vec<f64>>()
    };
    let mut x = lu_solve(b);
    let mut solves = 1;
    let mut rel = relative_residual(a, &x, b)?;
    while rel > tol && solves <= REFINEMENT_STEPS {
        let dx = lu_solve(&residual(a, &x, b)?);
        x.iter_mut().zip(&dx).for_each(|(xi, d)| *xi += d);
        solves += 1;
        rel = relative_residual(a, &x, b)?;
    }
    if !rel.is_finite() {
        return Err(SolverError::Factorization("singular matrix".into()));
    }
    let report = SolveReport {
        iterations: solves,
        relative_residual: rel,
        converged: rel <= tol,
        wall_time: start.elapsed(),
    };
    if report.converged {
        Ok((x, report))
    } else {
        Err(SolverError::NotConverged { report, solution: x })
    }
}

enum Inner {
    /// Recursive residual reached the tolerance after this many iterations.
    Done(usize),
    Exhausted(usize),
    Breakdown(usize),
}

/// Right-preconditioned BiCGStab(ℓ); `degree == 1` is the classic method.
/// One cycle costs `2ℓ` products and counts as `ℓ` iterations. The best
/// iterate seen at a cycle boundary is left in `x`.
fn bicgstab(
    a: &CsrMatrix,
    b: &[f64],
    x: &mut [f64],
    m: &Precond,
    tol: f64,
    limit: usize,
    degree: usize,
) -> Inner {
    let n = b.len();
    let l = degree;
    let bn = norm(b);
    let x0 = x.to_vec();
    let mut r: Vec<Vec<f64>> = vec![vec![0.0; n]; l + 1];
    let mut u: Vec<Vec<f64>> = vec![vec![0.0; n]; l + 1];
    r[0] = residual(a, x, b).unwrap();
    let r_hat = r[0].clone();
    let mut best_res = norm(&r[0]) / bn;
    if best_res <= tol {
        return Inner::Done(0);
    }
    // iterate in the preconditioned variable: x = x0 + M w
    let mut w = vec![0.0; n];
    let mut best_w = w.clone();
    let mut tmp = vec![0.0; n];
    let op = |v: &[f64], tmp: &mut [f64], out: &mut [f64]| {
        apply_precond(m, v, tmp);
        a.matvec_into(tmp, out).unwrap();
    };
    let finish = |x: &mut [f64], best_w: &[f64], it: usize, kind: fn(usize) -> Inner| {
        let mut mw = vec![0.0; n];
        apply_precond(m, best_w, &mut mw);
        x.iter_mut()
            .zip(x0.iter().zip(&mw))
            .for_each(|(xi, (a0, d))| *xi = a0 + d);
        kind(it)
    };
    let (mut rho0, mut alpha, mut omega) = (1.0f64, 0.0f64, 1.0f64);
    let mut tau = vec![vec![0.0; l + 1]; l + 1];
    let mut sigma = vec![0.0; l + 1];
    let mut gp = vec![0.0; l + 1];
    let mut g = vec![0.0; l + 1];
    let mut gpp = vec![0.0; l + 1];
    let mut it = 0;
    while it < limit {
        let cycle_start = it;
        it += l;
        rho0 *= -omega;
        for j in 0..l {
            let rho1 = dot(&r_hat, &r[j]);
            if rho0 == 0.0 || !rho1.is_finite() {
                return finish(x, &best_w, it, Inner::Breakdown);
            }
            let beta = alpha * rho1 / rho0;
            rho0 = rho1;
            for i in 0..=j {
                let (ui, ri) = (&mut u[i], &r[i]);
                ui.par_iter_mut().zip(ri.par_iter()).for_each(|(a, b)| *a = b - beta * *a);
            }
            let (lo, hi) = u.split_at_mut(j + 1);
            op(&lo[j], &mut tmp, &mut hi[0]);
            let sig = dot(&r_hat, &u[j + 1]);
            if sig == 0.0 || !sig.is_finite() {
                return finish(x, &best_w, it, Inner::Breakdown);
            }
            alpha = rho0 / sig;
            for i in 0..=j {
                axpy(-alpha, &u[i + 1], &mut r[i]);
            }
            let (lo, hi) = r.split_at_mut(j + 1);
            op(&lo[j], &mut tmp, &mut hi[0]);
            axpy(alpha, &u[0], &mut w);
            // r[0] is the residual of the current w; stop mid-cycle when done
            let rn = norm(&r[0]) / bn;
            if rn <= tol {
                return finish(x, &w, cycle_start + j + 1, Inner::Done);
            }
        }
        // minimal-residual polynomial over r[1..=l] (modified Gram-Schmidt)
        for j in 1..=l {
            for i in 1..j {
                tau[i][j] = dot(&r[j], &r[i]) / sigma[i];
                let (lo, hi) = r.split_at_mut(j);
                axpy(-tau[i][j], &lo[i], &mut hi[0]);
            }
            sigma[j] = dot(&r[j], &r[j]);
            if sigma[j] == 0.0 || !sigma[j].is_finite() {
                return finish(x, &best_w, it, Inner::Breakdown);
            }
            gp[j] = dot(&r[0], &r[j]) / sigma[j];
        }
        g[l] = gp[l];
        omega = g[l];
        for j in (1..l).rev() {
            g[j] = gp[j] - ((j + 1)..=l).map(|i| tau[j][i] * g[i]).sum::<f64>();
        }
        for j in 1..l {
            gpp[j] = g[j + 1] + ((j + 1)..l).map(|i| tau[j][i] * g[i + 1]).sum::<f64>();
        }
        axpy(g[1], &r[0], &mut w);
        {
            let (lo, hi) = r.split_at_mut(1);
            axpy(-gp[l], &hi[l - 1], &mut lo[0]);
            let (ulo, uhi) = u.split_at_mut(1);
            axpy(-g[l], &uhi[l - 1], &mut ulo[0]);
            for j in 1..l {
                axpy(-g[j], &uhi[j - 1], &mut ulo[0]);
                axpy(gpp[j], &hi[j - 1], &mut w);
                axpy(-gp[j], &hi[j - 1], &mut lo[0]);
            }
        }
        let rn = norm(&r[0]) / bn;
        if !rn.is_finite() {
            return finish(x, &best_w, it, Inner::Breakdown);
        }
        if rn < best_res {
            best_res = rn;
            best_w.copy_from_slice(&w);
        }
        if rn <= tol {
            return finish(x, &best_w, it, Inner::Done);
        }
        if omega == 0.0 {
            return finish(x, &best_w, it, Inner::Breakdown);
        }
    }
    finish(x, &best_w, it, Inner::Exhausted)
}

fn cg(a: &CsrMatrix, b: &[f64], x: &mut [f64], m: &Precond, tol: f64, limit: usize) -> Inner {
    let n = b.len();
    let bn = norm(b);
    let mut r = residual(a, x, b).unwrap();
    if norm(&r) / bn <= tol {
        return Inner::Done(0);
    }
    let mut z = vec![0.0; n];
    apply_precond(m, &r, &mut z);
    let mut p = z.clone();
    let mut q = vec![0.0; n];
    let mut rz = dot(&r, &z);
    for it in 1..=limit {
        a.matvec_into(&p, &mut q).unwrap();
        let pq = dot(&p, &q);
        if pq == 0.0 || !pq.is_finite() {
            return Inner::Breakdown(it);
        }
        let alpha = rz / pq;
        axpy(alpha, &p, x);
        axpy(-alpha, &q, &mut r);
        if norm(&r) / bn <= tol {
            return Inner::Done(it);
        }
        apply_precond(m, &r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        p.par_iter_mut().zip(z.par_iter()).for_each(|(pi, zi)| *pi = zi + beta * *pi);
    }
    Inner::Exhausted(limit)
}
