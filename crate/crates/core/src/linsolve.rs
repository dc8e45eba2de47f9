//! Symmetric positive definite solvers: envelope (skyline) Cholesky for
//! moderate sizes, Jacobi-preconditioned conjugate gradients above.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::sparse::CsrMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinearSolverSettings {
    /// Systems up to this many unknowns are factorized directly.
    pub direct_max_dofs: usize,
    /// Upper bound on stored envelope entries for the direct solver.
    pub max_envelope: usize,
    /// Relative residual target for conjugate gradients.
    pub cg_tol: f64,
    /// Iteration cap for conjugate gradients; 0 means `10 n`.
    pub cg_max_iter: usize,
}

impl Default for LinearSolverSettings {
    fn default() -> Self {
        LinearSolverSettings { direct_max_dofs: 200_000, max_envelope: 60_000_000, cg_tol: 1e-13, cg_max_iter: 0 }
    }
}

impl LinearSolverSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.cg_tol > 0.0 && self.cg_tol < 1.0) {
            return Err(Error::invalid(format!("cg_tol must lie in (0, 1), got {}", self.cg_tol)));
        }
        Ok(())
    }
}

/// Lower-triangular envelope factor `A = L L^T`.
#[derive(Debug, Clone)]
pub struct Skyline {
    first: Vec<usize>,
    /// Start of row `i` in `vals`; row `i` stores columns `first[i]..=i`.
    start: Vec<usize>,
    vals: Vec<f64>,
}

impl Skyline {
    pub fn envelope_size(a: &CsrMatrix) -> usize {
        let p = a.pattern();
        (0..p.n)
            .map(|i| {
                let f = p.col_idx[p.row_ptr[i]..p.row_ptr[i + 1]].first().copied().unwrap_or(i).min(i);
                i - f + 1
            })
            .sum()
    }

    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        let p = a.pattern();
        let n = p.n;
        let mut first = Vec::with_capacity(n);
        let mut start = Vec::with_capacity(n + 1);
        start.push(0);
        for i in 0..n {
            let f = p.col_idx[p.row_ptr[i]..p.row_ptr[i + 1]].first().copied().unwrap_or(i).min(i);
            first.push(f);
            start.push(start[i] + i - f + 1);
        }
        let mut vals = vec![0.0; start[n]];
        for i in 0..n {
            for k in p.row_ptr[i]..p.row_ptr[i + 1] {
                let j = p.col_idx[k];
                if j <= i {
                    vals[start[i] + j - first[i]] = a.values()[k];
                }
            }
        }
        for i in 0..n {
            let fi = first[i];
            for j in fi..=i {
                let fj = first[j];
                let lo = fi.max(fj);
                let mut s = vals[start[i] + j - fi];
                let ri = &vals[start[i] + lo - fi..start[i] + j - fi];
                let rj = &vals[start[j] + lo - fj..start[j] + j - fj];
                s -= ri.iter().zip(rj).map(|(x, y)| x * y).sum::<f64>();
                if j == i {
                    if !(s > 0.0) {
                        return Err(Error::LinearSolver {
                            reason: format!("matrix not positive definite at row {i} (pivot {s:.3e})"),
                            residual_history: Vec::new(),
                        });
                    }
                    vals[start[i] + i - fi] = s.sqrt();
                } else {
                    vals[start[i] + j - fi] = s / vals[start[j] + j - fj];
                }
            }
        }
        Ok(Skyline { first, start, vals })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.first.len();
        let mut y = b.to_vec();
        for i in 0..n {
            let fi = self.first[i];
            let row = &self.vals[self.start[i]..self.start[i + 1]];
            let s: f64 = row[..i - fi].iter().zip(&y[fi..i]).map(|(l, v)| l * v).sum();
            y[i] = (y[i] - s) / row[i - fi];
        }
        for i in (0..n).rev() {
            let fi = self.first[i];
            let row = &self.vals[self.start[i]..self.start[i + 1]];
            y[i] /= row[i - fi];
            let yi = y[i];
            for (l, yj) in row[..i - fi].iter().zip(&mut y[fi..i]) {
                *yj -= l * yi;
            }
        }
        y
    }
}

/// A prepared solver for one matrix.
#[derive(Debug, Clone)]
pub enum SpdSolver {
    Direct(Skyline),
    Iterative { matrix: CsrMatrix, inv_diag: Vec<f64>, settings: LinearSolverSettings },
}

impl SpdSolver {
    pub fn new(a: &CsrMatrix, settings: &LinearSolverSettings) -> Result<Self> {
        if a.n() <= settings.direct_max_dofs && Skyline::envelope_size(a) <= settings.max_envelope {
            return Ok(SpdSolver::Direct(Skyline::factor(a)?));
        }
        let inv_diag = a
            .diagonal()
            .iter()
            .map(|&d| {
                if d > 0.0 {
                    Ok(1.0 / d)
                } else {
                    Err(Error::LinearSolver {
                        reason: format!("nonpositive diagonal entry {d:.3e}"),
                        residual_history: Vec::new(),
                    })
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(SpdSolver::Iterative { matrix: a.clone(), inv_diag, settings: *settings })
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        match self {
            SpdSolver::Direct(s) => Ok(s.solve(b)),
            SpdSolver::Iterative { matrix, inv_diag, settings } => pcg(matrix, inv_diag, b, settings),
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn pcg(a: &CsrMatrix, inv_diag: &[f64], b: &[f64], s: &LinearSolverSettings) -> Result<Vec<f64>> {
    let n = b.len();
    let max_iter = if s.cg_max_iter == 0 { 10 * n.max(1) } else { s.cg_max_iter };
    let bnorm = dot(b, b).sqrt();
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok(x);
    }
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(inv_diag).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    let mut history = Vec::new();
    for _ in 0..max_iter {
        a.matvec_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::LinearSolver {
                reason: format!("conjugate gradients broke down (p.Ap = {pap:.3e})"),
                residual_history: history,
            });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rel = dot(&r, &r).sqrt() / bnorm;
        history.push(rel);
        if rel <= s.cg_tol {
            return Ok(x);
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
    Err(Error::LinearSolver {
        reason: format!("conjugate gradients reached {max_iter} iterations"),
        residual_history: history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{assemble_mass, assemble_scalar_laplace, build_grid};

    #[test]
    fn direct_and_iterative_agree() {
        let g = build_grid(2, &[1.0, 2.0], &[5, 7]).unwrap();
        let a = assemble_scalar_laplace(&g).linear_combination(1.0, &assemble_mass(&g), 1.0);
        let b: Vec<f64> = (0..g.n_nodes()).map(|i| (i as f64 * 0.37).sin()).collect();
        let direct = SpdSolver::new(&a, &LinearSolverSettings::default()).unwrap();
        assert!(matches!(direct, SpdSolver::Direct(_)));
        let x1 = direct.solve(&b).unwrap();
        let it = LinearSolverSettings { direct_max_dofs: 0, ..Default::default() };
        let x2 = SpdSolver::new(&a, &it).unwrap().solve(&b).unwrap();
        let res: Vec<f64> = a.matvec(&x1).iter().zip(&b).map(|(x, y)| x - y).collect();
        assert!(dot(&res, &res).sqrt() < 1e-12);
        for (u, v) in x1.iter().zip(&x2) {
            assert!((u - v).abs() < 1e-10);
        }
    }

    #[test]
    fn indefinite_rejected() {
        let g = build_grid(1, &[1.0], &[3]).unwrap();
        let a = assemble_scalar_laplace(&g).scaled(-1.0);
        assert!(SpdSolver::new(&a, &LinearSolverSettings::default()).is_err());
    }
}
