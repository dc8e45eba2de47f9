//! Elasticity step: the linear system
//!
//! ```text
//! [tau^2 K(c(chi)) + tau K(mu d(chi)) + M] u
//!     = M (2 u1 - u2) + tau K(mu d(chi)) u1 + tau^2 (M l + B)
//! ```
//!
//! obtained by multiplying the momentum balance by `tau^2`; `u1`, `u2` are the
//! two previous displacement levels and `B` the boundary load. The traction
//! boundary condition for the combined stress carries the same `tau^2` factor.

use super::{Discretization, StepConfig};
use crate::error::{Error, Result};
use crate::grid::sparse::CsrMatrix;
use crate::grid::{assemble_boundary_load, BoundaryTraction};
use crate::linsolve::SpdSolver;
use crate::material::MaterialLaw;

#[derive(Debug, Clone)]
pub struct ElasticOutcome {
    pub u: Vec<f64>,
    /// `K(c(chi))`.
    pub k_c: CsrMatrix,
    /// `K(mu d(chi))`.
    pub k_d: CsrMatrix,
    /// `M l + B`, the load paired with test functions.
    pub load: Vec<f64>,
}

pub(crate) struct Operators {
    pub k_c: CsrMatrix,
    pub k_d: CsrMatrix,
    pub system: CsrMatrix,
    pub rhs: Vec<f64>,
    pub load: Vec<f64>,
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn operators(
    disc: &Discretization,
    material: &MaterialLaw,
    tau: f64,
    chi: &[f64],
    u1: &[f64],
    u2: &[f64],
    body: Option<&[f64]>,
    traction: &BoundaryTraction,
) -> Result<Operators> {
    let n = disc.grid.n_vector_dofs();
    if u1.len() != n || u2.len() != n {
        return Err(Error::DimensionMismatch { what: "displacement levels", expected: n, got: u1.len().min(u2.len()) });
    }
    let cw: Vec<f64> = chi.iter().map(|&x| material.c(x)).collect();
    let dw: Vec<f64> = chi.iter().map(|&x| material.mu() * material.d(x)).collect();
    let k_c = disc.kernel.assemble(&disc.grid, &cw)?;
    let k_d = disc.kernel.assemble(&disc.grid, &dw)?;
    let system = k_c.linear_combination(tau * tau, &k_d, tau).linear_combination(1.0, &disc.vector_mass, 1.0);

    let mut load = assemble_boundary_load(&disc.grid, traction);
    if let Some(l) = body {
        if l.len() != n {
            return Err(Error::DimensionMismatch { what: "body force", expected: n, got: l.len() });
        }
        for (a, b) in load.iter_mut().zip(disc.vector_mass.matvec(l)) {
            *a += b;
        }
    }
    let extrap: Vec<f64> = u1.iter().zip(u2).map(|(a, b)| 2.0 * a - b).collect();
    let mut rhs = disc.vector_mass.matvec(&extrap);
    let visc = k_d.matvec(u1);
    for i in 0..n {
        rhs[i] += tau * visc[i] + tau * tau * load[i];
    }
    Ok(Operators { k_c, k_d, system, rhs, load })
}

#[allow(clippy::too_many_arguments)]
pub fn elasticity_step(
    disc: &Discretization,
    material: &MaterialLaw,
    cfg: &StepConfig,
    chi: &[f64],
    u1: &[f64],
    u2: &[f64],
    body: Option<&[f64]>,
    traction: &BoundaryTraction,
) -> Result<ElasticOutcome> {
    let ops = operators(disc, material, cfg.tau, chi, u1, u2, body, traction)?;
    let u = SpdSolver::new(&ops.system, &cfg.linear)?.solve(&ops.rhs)?;
    Ok(ElasticOutcome { u, k_c: ops.k_c, k_d: ops.k_d, load: ops.load })
}

/// Residual `S(chi) u - rhs(chi)` of the elasticity system for a given
/// displacement.
#[allow(clippy::too_many_arguments)]
pub fn elasticity_residual(
    disc: &Discretization,
    material: &MaterialLaw,
    tau: f64,
    chi: &[f64],
    u: &[f64],
    u1: &[f64],
    u2: &[f64],
    body: Option<&[f64]>,
    traction: &BoundaryTraction,
) -> Result<Vec<f64>> {
    let ops = operators(disc, material, tau, chi, u1, u2, body, traction)?;
    let mut r = ops.system.matvec(u);
    for (a, b) in r.iter_mut().zip(&ops.rhs) {
        *a -= b;
    }
    Ok(r)
}
