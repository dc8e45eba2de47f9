//! Damage step: minimization of the incremental functional by semismooth
//! Newton with an Armijo line search, falling back to preconditioned gradient
//! descent when Newton stalls.
//!
//! Nonlinear coefficients are evaluated at the nodes: `f` and the penalty are
//! lumped with the row-sum mass `m_i`, and the strain energy density enters
//! through the nodal loads `w_i = int phi_i C eps(u) : eps(u)`. The discrete
//! functional reads
//!
//! ```text
//! F(chi) = 1/2 chi.A chi + sum_i [ 1/2 c1(chi_i) w_i + 1/2 c2'(p_i) chi_i w_i
//!          + m_i f(chi_i) + tau m_i I(r_i) ] + tau/2 r.(M + A) r,
//! r = (chi - p) / tau,
//! ```
//!
//! with `p` the previous damage level, `M` the consistent mass and `A` the
//! Neumann Laplacian.

use super::{Discretization, StepConfig};
use crate::error::{Error, Result};
use crate::grid::sparse::CsrMatrix;
use crate::linsolve::SpdSolver;
use crate::material::MaterialLaw;

#[derive(Debug, Clone)]
pub struct DamageOutcome {
    pub chi: Vec<f64>,
    /// `xi_beta((chi - chi_prev) / tau)` at the nodes.
    pub xi: Vec<f64>,
    pub iterations: usize,
    pub gradient_steps: usize,
    /// Residual in the dual norm of `M + A`.
    pub residual: f64,
    pub functional_before: f64,
    pub functional_after: f64,
}

/// The incremental functional for one step, with everything except `chi`
/// frozen.
pub struct DamageFunctional<'a> {
    pub disc: &'a Discretization,
    pub material: &'a MaterialLaw,
    pub cfg: &'a StepConfig,
    pub chi_prev: &'a [f64],
    pub w: &'a [f64],
}

impl DamageFunctional<'_> {
    fn rate(&self, chi: &[f64]) -> Vec<f64> {
        let tau = self.cfg.tau;
        chi.iter().zip(self.chi_prev).map(|(c, p)| (c - p) / tau).collect()
    }

    pub fn value(&self, chi: &[f64]) -> f64 {
        let d = self.disc;
        let m = self.material;
        let pen = &self.cfg.penalty;
        let tau = self.cfg.tau;
        let r = self.rate(chi);
        let mut s = 0.5 * d.laplace.inner(chi, chi) + 0.5 * tau * d.mass_laplace.inner(&r, &r);
        for i in 0..chi.len() {
            let (x, p, w, mi) = (chi[i], self.chi_prev[i], self.w[i], d.lumped[i]);
            s += 0.5 * m.c1(x) * w + 0.5 * m.c2_prime(p) * x * w + mi * m.f(x) + tau * mi * pen.value(r[i]);
        }
        s
    }

    /// Gradient of [`value`](Self::value), i.e. the discrete Euler-Lagrange
    /// residual.
    pub fn gradient(&self, chi: &[f64]) -> Vec<f64> {
        let d = self.disc;
        let m = self.material;
        let pen = &self.cfg.penalty;
        let r = self.rate(chi);
        let mut g = d.laplace.matvec(chi);
        let mr = d.mass_laplace.matvec(&r);
        for i in 0..chi.len() {
            let (x, p, w, mi) = (chi[i], self.chi_prev[i], self.w[i], d.lumped[i]);
            g[i] += mr[i] + mi * (pen.slope(r[i]) + m.f_prime(x)) + 0.5 * (m.c1_prime(x) + m.c2_prime(p)) * w;
        }
        g
    }

    /// Generalized Hessian (right derivative of the penalty at the kink).
    pub fn hessian(&self, chi: &[f64]) -> CsrMatrix {
        let d = self.disc;
        let m = self.material;
        let pen = &self.cfg.penalty;
        let tau = self.cfg.tau;
        let r = self.rate(chi);
        let mut h = d.laplace.linear_combination(1.0, &d.mass_laplace, 1.0 / tau);
        let diag: Vec<f64> = (0..chi.len())
            .map(|i| {
                let mi = d.lumped[i];
                mi * (pen.curvature(r[i]) / tau + m.f_second(chi[i])) + 0.5 * m.c1_second(chi[i]) * self.w[i]
            })
            .collect();
        h.add_diagonal(&diag);
        h
    }

    fn dual_norm(&self, g: &[f64]) -> Result<f64> {
        let y = self.disc.mass_laplace_solver.solve(g)?;
        Ok(dot(g, &y).max(0.0).sqrt())
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

const ARMIJO: f64 = 1e-4;
const GRADIENT_FALLBACK_STEPS: usize = 50;

/// Backtracking search along `dir`; returns the accepted point and value.
fn line_search(fun: &DamageFunctional, chi: &[f64], f0: f64, slope: f64, dir: &[f64]) -> Option<(Vec<f64>, f64)> {
    let mut alpha = 1.0;
    let roundoff = 1e-13 * (1.0 + f0.abs());
    for _ in 0..40 {
        let trial: Vec<f64> = chi.iter().zip(dir).map(|(c, d)| c + alpha * d).collect();
        let ft = fun.value(&trial);
        if ft <= f0 + ARMIJO * alpha * slope {
            return Some((trial, ft));
        }
        // near the minimizer the decrease drowns in roundoff; accept a full
        // step whose value is indistinguishable from the current one
        if alpha == 1.0 && (ft - f0).abs() <= roundoff {
            return Some((trial, ft));
        }
        alpha *= 0.5;
    }
    None
}

pub fn damage_step(
    disc: &Discretization,
    material: &MaterialLaw,
    cfg: &StepConfig,
    chi_prev: &[f64],
    w: &[f64],
) -> Result<DamageOutcome> {
    let n = disc.grid.n_nodes();
    if chi_prev.len() != n || w.len() != n {
        return Err(Error::DimensionMismatch {
            what: "damage step fields",
            expected: n,
            got: chi_prev.len().min(w.len()),
        });
    }
    let fun = DamageFunctional { disc, material, cfg, chi_prev, w };
    let mut chi = chi_prev.to_vec();
    let functional_before = fun.value(&chi);
    let mut fval = functional_before;
    let mut grad = fun.gradient(&chi);
    let mut res = fun.dual_norm(&grad)?;
    let mut iterations = 0;
    let mut gradient_steps = 0;

    while res > cfg.newton_tol {
        if iterations >= cfg.newton_max_iter {
            return Err(Error::NewtonDivergence { iterations, residual: res });
        }
        iterations += 1;
        let newton = SpdSolver::new(&fun.hessian(&chi), &cfg.linear)
            .and_then(|s| s.solve(&grad))
            .ok()
            .map(|d| d.iter().map(|v| -v).collect::<Vec<f64>>());
        let accepted = newton.and_then(|dir| {
            let slope = dot(&grad, &dir);
            if slope < 0.0 {
                line_search(&fun, &chi, fval, slope, &dir)
            } else {
                None
            }
        });
        match accepted {
            Some((next, fnext)) => {
                chi = next;
                fval = fnext;
            }
            None => {
                // stalled Newton: descend along the (M + A)-preconditioned gradient
                let mut moved = false;
                for _ in 0..GRADIENT_FALLBACK_STEPS {
                    let dir: Vec<f64> = disc.mass_laplace_solver.solve(&grad)?.iter().map(|v| -v).collect();
                    let slope = dot(&grad, &dir);
                    match line_search(&fun, &chi, fval, slope, &dir) {
                        Some((next, fnext)) => {
                            chi = next;
                            fval = fnext;
                            grad = fun.gradient(&chi);
                            gradient_steps += 1;
                            moved = true;
                        }
                        None => break,
                    }
                }
                if !moved {
                    return Err(Error::NewtonDivergence { iterations, residual: res });
                }
            }
        }
        grad = fun.gradient(&chi);
        res = fun.dual_norm(&grad)?;
        if !res.is_finite() {
            return Err(Error::NewtonDivergence { iterations, residual: res });
        }
    }

    let pen = &cfg.penalty;
    let xi = chi.iter().zip(chi_prev).map(|(c, p)| pen.slope((c - p) / cfg.tau)).collect();
    Ok(DamageOutcome { chi, xi, iterations, gradient_steps, residual: res, functional_before, functional_after: fval })
}
