//! Sparse CSR storage, a Jacobi-preconditioned conjugate gradient solver,
//! and block composition of assembled operators.

use crate::{Error, Result};

/// Compressed sparse row matrix. Column indices are sorted within each row
/// and contain no duplicates.
#[derive(Debug, Clone)]
pub struct SparseMatrix {
    pub nrows: usize,
    pub ncols: usize,
    pub row_offsets: Vec<usize>,
    pub col_indices: Vec<usize>,
    pub values: Vec<f64>,
}

/// Coordinate-list accumulator; duplicates are summed on `build`.
#[derive(Debug, Clone)]
pub struct CooBuilder {
    nrows: usize,
    ncols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl CooBuilder {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        CooBuilder {
            nrows,
            ncols,
            entries: Vec::new(),
        }
    }

    pub fn push(&mut self, row: usize, col: usize, value: f64) {
        debug_assert!(row < self.nrows && col < self.ncols);
        if value != 0.0 {
            self.entries.push((row, col, value));
        }
    }

    pub fn build(mut self) -> SparseMatrix {
        self.entries
            .sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_counts = vec![0usize; self.nrows];
        let mut col_indices = Vec::new();
        let mut values = Vec::new();
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in self.entries {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_indices.push(c);
                values.push(v);
                row_counts[r] += 1;
                last = Some((r, c));
            }
        }
        let mut row_offsets = vec![0usize; self.nrows + 1];
        for i in 0..self.nrows {
            row_offsets[i + 1] = row_offsets[i] + row_counts[i];
        }
        SparseMatrix {
            nrows: self.nrows,
            ncols: self.ncols,
            row_offsets,
            col_indices,
            values,
        }
    }
}

impl SparseMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        SparseMatrix {
            nrows,
            ncols,
            row_offsets: vec![0; nrows + 1],
            col_indices: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        SparseMatrix {
            nrows: n,
            ncols: n,
            row_offsets: (0..=n).collect(),
            col_indices: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let lo = self.row_offsets[r];
        let hi = self.row_offsets[r + 1];
        (&self.col_indices[lo..hi], &self.values[lo..hi])
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let (cols, vals) = self.row(r);
        match cols.binary_search(&c) {
            Ok(k) => vals[k],
            Err(_) => 0.0,
        }
    }

    pub fn spmv(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols, "spmv dimension mismatch");
        let mut y = vec![0.0; self.nrows];
        for r in 0..self.nrows {
            let (cols, vals) = self.row(r);
            let mut acc = 0.0;
            for (c, v) in cols.iter().zip(vals) {
                acc += v * x[*c];
            }
            y[r] = acc;
        }
        y
    }

    pub fn transpose(&self) -> SparseMatrix {
        let mut coo = CooBuilder::new(self.ncols, self.nrows);
        for r in 0..self.nrows {
            let (cols, vals) = self.row(r);
            for (c, v) in cols.iter().zip(vals) {
                coo.push(*c, r, *v);
            }
        }
        coo.build()
    }

    pub fn scaled(&self, s: f64) -> SparseMatrix {
        let mut m = self.clone();
        for v in &mut m.values {
            *v *= s;
        }
        m
    }

    /// Maximum absolute deviation |A_ij - A_ji| over the sparsity pattern.
    pub fn max_asymmetry(&self) -> f64 {
        assert_eq!(self.nrows, self.ncols);
        let mut worst: f64 = 0.0;
        for r in 0..self.nrows {
            let (cols, vals) = self.row(r);
            for (c, v) in cols.iter().zip(vals) {
                worst = worst.max((v - self.get(*c, r)).abs());
            }
        }
        worst
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

/// Place scaled sub-matrices into a global sparse matrix. Each entry is
/// `(row_offset, col_offset, matrix, scale)`.
pub fn block_compose(
    nrows: usize,
    ncols: usize,
    blocks: &[(usize, usize, &SparseMatrix, f64)],
) -> Result<SparseMatrix> {
    let mut coo = CooBuilder::new(nrows, ncols);
    for &(r0, c0, m, scale) in blocks {
        if r0 + m.nrows > nrows || c0 + m.ncols > ncols {
            return Err(Error::InvalidArgument(format!(
                "block of size {}x{} at offset ({}, {}) exceeds {}x{}",
                m.nrows, m.ncols, r0, c0, nrows, ncols
            )));
        }
        for r in 0..m.nrows {
            let (cols, vals) = m.row(r);
            for (c, v) in cols.iter().zip(vals) {
                coo.push(r0 + r, c0 + c, scale * v);
            }
        }
    }
    Ok(coo.build())
}

#[derive(Debug, Clone)]
pub struct SolverReport {
    pub iterations: usize,
    /// True relative residual ||b - Ax|| / ||b|| recomputed at exit.
    pub relative_residual: f64,
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Conjugate gradient with optional Jacobi preconditioning.
///
/// Fails with `NotSpd` if a search direction has non-positive curvature and
/// with `NoConvergence` if `maxit` is exceeded.
pub fn cg_solve(
    a: &SparseMatrix,
    b: &[f64],
    tol: f64,
    maxit: usize,
    jacobi_precondition: bool,
) -> Result<(Vec<f64>, SolverReport)> {
    if a.nrows != a.ncols {
        return Err(Error::InvalidArgument(format!(
            "cg_solve needs a square matrix, got {}x{}",
            a.nrows, a.ncols
        )));
    }
    if b.len() != a.nrows {
        return Err(Error::InvalidArgument(
            "cg_solve rhs length mismatch".into(),
        ));
    }
    if b.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("cg_solve rhs is not finite".into()));
    }
    // Spot-check symmetry on a sample of entries.
    let n = a.nrows;
    let sample = n.min(50);
    for r in (0..n).step_by((n / sample).max(1)) {
        let (cols, vals) = a.row(r);
        for (c, v) in cols.iter().zip(vals).take(8) {
            let scale = a.max_abs().max(1.0);
            if (v - a.get(*c, r)).abs() > 1e-12 * scale {
                return Err(Error::NotSpd(format!(
                    "asymmetric entry at ({r}, {c}): {v} vs {}",
                    a.get(*c, r)
                )));
            }
        }
    }

    let bnorm = norm2(b);
    if bnorm == 0.0 {
        return Ok((
            vec![0.0; n],
            SolverReport {
                iterations: 0,
                relative_residual: 0.0,
                converged: true,
            },
        ));
    }

    let inv_diag: Vec<f64> = if jacobi_precondition {
        (0..n)
            .map(|i| {
                let d = a.get(i, i);
                if d > 0.0 {
                    1.0 / d
                } else {
                    1.0
                }
            })
            .collect()
    } else {
        vec![1.0; n]
    };

    let mut x = vec![0.0; n];
    let mut r: Vec<f64> = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(ri, di)| ri * di).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);

    // The recurrence residual drifts from the true residual on badly
    // conditioned systems; whenever the recurrence claims convergence we
    // verify against b - Ax and restart from the current iterate if the
    // true residual is still above tolerance.
    let mut iterations = 0;
    let mut relative_residual = 1.0;
    let mut last_restart_residual = f64::INFINITY;
    while iterations < maxit {
        let mut recurrence_ok = false;
        while iterations < maxit {
            iterations += 1;
            let ap = a.spmv(&p);
            let pap = dot(&p, &ap);
            if pap <= 0.0 {
                return Err(Error::NotSpd(format!(
                    "non-positive curvature p^T A p = {pap:.3e} at iteration {iterations}"
                )));
            }
            let alpha = rz / pap;
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            if norm2(&r) / bnorm <= tol {
                recurrence_ok = true;
                break;
            }
            for i in 0..n {
                z[i] = r[i] * inv_diag[i];
            }
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
        }
        // Recompute the true residual rather than trusting the recurrence.
        let ax = a.spmv(&x);
        let true_res: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        relative_residual = norm2(&true_res) / bnorm;
        let stalled = relative_residual >= 0.99 * last_restart_residual;
        if relative_residual <= tol || !recurrence_ok || stalled {
            break;
        }
        last_restart_residual = relative_residual;
        r = true_res;
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        p.copy_from_slice(&z);
        rz = dot(&r, &z);
    }
    let converged = relative_residual <= tol;
    let report = SolverReport {
        iterations,
        relative_residual,
        converged,
    };
    if !converged {
        return Err(Error::NoConvergence {
            iterations: report.iterations,
            residual: report.relative_residual,
        });
    }
    Ok((x, report))
}
