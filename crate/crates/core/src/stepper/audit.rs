//! Post-run checks: the discrete energy inequality and the truncation
//! argument `chi -> max(chi, 0)`.

use super::{elasticity_residual, DamageFunctional, Discretization, StepConfig, Trajectory};
use crate::error::{Error, Result};
use crate::forcing::Loading;
use crate::material::MaterialLaw;

/// Relative tolerance for a negative slack to count as a violation.
pub const VIOLATION_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuditStep {
    pub k: usize,
    pub slack: f64,
    pub relative_slack: f64,
    pub violated: bool,
    /// Per-step decrease of the damage functional held (up to roundoff).
    pub functional_decreased: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuditReport {
    pub steps: Vec<AuditStep>,
    pub violations: usize,
    pub min_relative_slack: f64,
    /// Total energy never increased (meaningful without external work).
    pub energy_nonincreasing: bool,
    pub functional_increases: usize,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.violations == 0 && self.functional_increases == 0
    }
}

/// Check `E_k - E_{k-1} + D_k <= W_k + allowance_k` at every step, where the
/// slack additionally absorbs the convex-concave gap and the numerical
/// dissipation of the implicit Euler differences.
pub fn energy_audit(traj: &Trajectory) -> AuditReport {
    let mut steps = Vec::new();
    let mut violations = 0;
    let mut functional_increases = 0;
    let mut min_rel = f64::INFINITY;
    let mut nonincreasing = true;
    for w in traj.records.windows(2) {
        let (prev, rec) = (&w[0], &w[1]);
        let rel = rec.slack / rec.slack_scale;
        let violated = rel < -VIOLATION_TOLERANCE;
        let fd = rec.functional_after <= rec.functional_before + 1e-12 * (1.0 + rec.functional_before.abs());
        violations += usize::from(violated);
        functional_increases += usize::from(!fd);
        min_rel = min_rel.min(rel);
        if rec.total() > prev.total() + 1e-12 * (1.0 + prev.total().abs()) {
            nonincreasing = false;
        }
        steps.push(AuditStep { k: rec.k, slack: rec.slack, relative_slack: rel, violated, functional_decreased: fd });
    }
    AuditReport {
        steps,
        violations,
        min_relative_slack: if min_rel.is_finite() { min_rel } else { 0.0 },
        energy_nonincreasing: nonincreasing,
        functional_increases,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TruncationReport {
    /// `max(chi, 0)` per level.
    pub chi_plus: Vec<Vec<f64>>,
    /// Number of nodal values that were negative.
    pub negative_values: usize,
    /// Largest `|R_el(u, chi+) - R_el(u, chi)|` over stored levels.
    pub elasticity_delta: f64,
    /// Largest damage-residual change at nodes whose whole stencil has
    /// `chi > 0` at both levels of the step.
    pub damage_delta_interior: f64,
    /// Largest damage-residual change over all nodes with `chi > 0`. The
    /// gradient terms couple neighbours, so this can be nonzero next to the
    /// truncated set.
    pub damage_delta_positive: f64,
}

/// Replace `chi` by `max(chi, 0)` and compare the residuals of both discrete
/// equations. Requires `c` and `d` constant on `(-inf, 0]` and every
/// displacement level stored.
pub fn truncate_chi(
    disc: &Discretization,
    material: &MaterialLaw,
    cfg: &StepConfig,
    traj: &Trajectory,
    loading: &dyn Loading,
) -> Result<TruncationReport> {
    if !material.constant_below_zero() {
        return Err(Error::TheoremPrecondition("truncation needs c and d constant on (-inf, 0]".into()));
    }
    let chi0 = &traj.chi[0];
    if chi0.iter().any(|&x| !(0.0..=1.0).contains(&x)) {
        return Err(Error::TheoremPrecondition("initial damage must lie in [0, 1]".into()));
    }
    let chi_plus: Vec<Vec<f64>> = traj.chi.iter().map(|c| c.iter().map(|&x| x.max(0.0)).collect()).collect();
    let negative_values = traj.chi.iter().flatten().filter(|&&x| x < 0.0).count();
    let grid = &disc.grid;
    let pattern = grid.scalar_pattern();

    let mut el_delta = 0.0f64;
    let mut dmg_interior = 0.0f64;
    let mut dmg_positive = 0.0f64;
    for k in 1..traj.chi.len() {
        let t = traj.time(k);
        // elasticity residual of the stored displacement
        if let (Ok(u), Ok(u1)) = (traj.u_level(k), traj.u_level(k - 1)) {
            let u2 = if k >= 2 { traj.u_level(k - 2).ok().map(<[f64]>::to_vec) } else { Some(traj.u_minus1.clone()) };
            if let Some(u2) = u2 {
                let traction = loading.traction(grid, k, t);
                let body = loading.body(grid, k, t);
                let r =
                    elasticity_residual(disc, material, cfg.tau, &traj.chi[k], u, u1, &u2, body.as_deref(), &traction)?;
                let rp =
                    elasticity_residual(disc, material, cfg.tau, &chi_plus[k], u, u1, &u2, body.as_deref(), &traction)?;
                for (a, b) in r.iter().zip(&rp) {
                    el_delta = el_delta.max((a - b).abs());
                }
            }
        }
        // damage residual with the strain of level k-1
        if let Ok(u1) = traj.u_level(k - 1) {
            let w = disc.kernel.strain_energy_loads(grid, u1);
            let f = DamageFunctional { disc, material, cfg, chi_prev: &traj.chi[k - 1], w: &w };
            let fp = DamageFunctional { disc, material, cfg, chi_prev: &chi_plus[k - 1], w: &w };
            let g = f.gradient(&traj.chi[k]);
            let gp = fp.gradient(&chi_plus[k]);
            for i in 0..g.len() {
                if traj.chi[k][i] <= 0.0 {
                    continue;
                }
                let d = (g[i] - gp[i]).abs();
                dmg_positive = dmg_positive.max(d);
                let stencil = &pattern.col_idx[pattern.row_ptr[i]..pattern.row_ptr[i + 1]];
                if stencil.iter().all(|&j| traj.chi[k][j] > 0.0 && traj.chi[k - 1][j] > 0.0) {
                    dmg_interior = dmg_interior.max(d);
                }
            }
        }
    }
    Ok(TruncationReport {
        chi_plus,
        negative_values,
        elasticity_delta: el_delta,
        damage_delta_interior: dmg_interior,
        damage_delta_positive: dmg_positive,
    })
}
