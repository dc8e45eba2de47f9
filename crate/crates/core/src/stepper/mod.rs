//! Semi-implicit time stepping of the regularized system: per step a damage
//! minimization driven by the previous displacement, then a linear
//! elasticity solve with the new damage.

mod audit;
mod damage;
mod elasticity;
mod trajectory;

use std::sync::Arc;

pub use audit::{energy_audit, truncate_chi, AuditReport, AuditStep, TruncationReport, VIOLATION_TOLERANCE};
pub use damage::{damage_step, DamageFunctional, DamageOutcome};
pub use elasticity::{elasticity_residual, elasticity_step, ElasticOutcome};
pub use trajectory::{Interpolation, Trajectory};

use crate::error::{Error, Result};
use crate::forcing::Loading;
use crate::grid::sparse::CsrMatrix;
use crate::grid::{assemble_mass, assemble_scalar_laplace, assemble_vector_mass, lumped_mass, ElasticityKernel, Grid};
use crate::linsolve::{LinearSolverSettings, SpdSolver};
use crate::material::{MaterialLaw, Penalty, StiffnessTensor};

/// Grid-level operators shared by every step (and every run on the grid).
#[derive(Debug, Clone)]
pub struct Discretization {
    pub grid: Grid,
    pub kernel: ElasticityKernel,
    pub mass: CsrMatrix,
    pub laplace: CsrMatrix,
    pub mass_laplace: CsrMatrix,
    pub lumped: Vec<f64>,
    pub vector_mass: CsrMatrix,
    pub mass_laplace_solver: Arc<SpdSolver>,
}

impl Discretization {
    pub fn new(grid: Grid, stiffness: &StiffnessTensor, linear: &LinearSolverSettings) -> Result<Self> {
        let kernel = ElasticityKernel::new(&grid, stiffness)?;
        let mass = assemble_mass(&grid);
        let laplace = assemble_scalar_laplace(&grid);
        let mass_laplace = mass.linear_combination(1.0, &laplace, 1.0);
        let mass_laplace_solver = Arc::new(SpdSolver::new(&mass_laplace, linear)?);
        Ok(Discretization {
            lumped: lumped_mass(&grid),
            vector_mass: assemble_vector_mass(&grid),
            kernel,
            mass,
            laplace,
            mass_laplace,
            mass_laplace_solver,
            grid,
        })
    }

    /// `sqrt(x.M x)`.
    pub fn l2_norm(&self, x: &[f64]) -> f64 {
        self.mass.inner(x, x).max(0.0).sqrt()
    }

    /// `sqrt(x.(M + A) x)`.
    pub fn h1_norm(&self, x: &[f64]) -> f64 {
        self.mass_laplace.inner(x, x).max(0.0).sqrt()
    }

    /// L2 norm of a vector field.
    pub fn l2_norm_vector(&self, x: &[f64]) -> f64 {
        self.vector_mass.inner(x, x).max(0.0).sqrt()
    }

    /// H1 norm of a vector field (componentwise gradient).
    pub fn h1_norm_vector(&self, x: &[f64]) -> f64 {
        let dim = self.grid.dim();
        let mut s = self.vector_mass.inner(x, x);
        for c in 0..dim {
            let comp: Vec<f64> = x.iter().skip(c).step_by(dim).copied().collect();
            s += self.laplace.inner(&comp, &comp);
        }
        s.max(0.0).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepConfig {
    pub tau: f64,
    pub t_end: f64,
    pub penalty: Penalty,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    pub linear: LinearSolverSettings,
    /// Store the displacement every `snapshot_every` steps (the last level is
    /// always kept).
    pub snapshot_every: usize,
}

impl StepConfig {
    pub fn new(tau: f64, t_end: f64, penalty: Penalty) -> Result<Self> {
        let cfg = StepConfig {
            tau,
            t_end,
            penalty,
            newton_tol: 1e-10,
            newton_max_iter: 50,
            linear: LinearSolverSettings::default(),
            snapshot_every: 1,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0) || !(self.t_end > 0.0) || self.tau > self.t_end * (1.0 + 1e-12) {
            return Err(Error::invalid(format!(
                "time step must satisfy 0 < tau <= T (tau = {}, T = {})",
                self.tau, self.t_end
            )));
        }
        if !(self.newton_tol > 0.0) || self.newton_max_iter == 0 {
            return Err(Error::invalid("Newton tolerance and iteration cap must be positive"));
        }
        if self.snapshot_every == 0 {
            return Err(Error::invalid("snapshot_every must be at least 1"));
        }
        self.linear.validate()?;
        self.n_steps().map(|_| ())
    }

    /// `T / tau`, required to be an integer up to rounding.
    pub fn n_steps(&self) -> Result<usize> {
        let m = self.t_end / self.tau;
        let r = m.round();
        if r < 1.0 || (m - r).abs() > 1e-9 * m.max(1.0) {
            return Err(Error::invalid(format!("T / tau = {m} is not an integer number of steps")));
        }
        Ok(r as usize)
    }

    pub fn with_tau(&self, tau: f64) -> Result<Self> {
        let c = StepConfig { tau, ..self.clone() };
        c.validate()?;
        Ok(c)
    }

    pub fn with_penalty(&self, penalty: Penalty) -> Self {
        StepConfig { penalty, ..self.clone() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitialData {
    pub u0: Vec<f64>,
    pub v0: Vec<f64>,
    pub chi0: Vec<f64>,
}

impl InitialData {
    /// Validate lengths, finiteness and the homogeneous Neumann condition of
    /// `chi0` (second-order one-sided normal differences at most
    /// `10 h^2 (1 + max |chi0|)`).
    pub fn new(grid: &Grid, u0: Vec<f64>, v0: Vec<f64>, chi0: Vec<f64>) -> Result<Self> {
        let h = grid.h_min();
        let scale = chi0.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        Self::with_neumann_tolerance(grid, u0, v0, chi0, 10.0 * h * h * (1.0 + scale))
    }

    pub fn with_neumann_tolerance(grid: &Grid, u0: Vec<f64>, v0: Vec<f64>, chi0: Vec<f64>, tol: f64) -> Result<Self> {
        let nv = grid.n_vector_dofs();
        let checks = [
            ("initial displacement", u0.len(), nv),
            ("initial velocity", v0.len(), nv),
            ("initial damage", chi0.len(), grid.n_nodes()),
        ];
        for (what, got, expected) in checks {
            if got != expected {
                return Err(Error::DimensionMismatch { what, expected, got });
            }
        }
        if u0.iter().chain(&v0).chain(&chi0).any(|v| !v.is_finite()) {
            return Err(Error::invalid("initial data must be finite"));
        }
        let dn = grid.max_normal_derivative(&chi0);
        if dn > tol {
            return Err(Error::invalid(format!(
                "initial damage violates the homogeneous Neumann condition (normal difference {dn:.3e} > {tol:.3e})"
            )));
        }
        Ok(InitialData { u0, v0, chi0 })
    }

    /// Zero displacement and velocity with constant damage.
    pub fn at_rest(grid: &Grid, chi: f64) -> Self {
        InitialData {
            u0: vec![0.0; grid.n_vector_dofs()],
            v0: vec![0.0; grid.n_vector_dofs()],
            chi0: vec![chi; grid.n_nodes()],
        }
    }
}

/// Discrete fields at one time level.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub k: usize,
    pub t: f64,
    pub tau: f64,
    pub u: Vec<f64>,
    pub u_prev: Vec<f64>,
    pub chi: Vec<f64>,
    pub chi_prev: Vec<f64>,
    pub xi: Vec<f64>,
}

impl State {
    /// Level 0 with `u^{-1} = u^0 - tau v^0`.
    pub fn initial(data: &InitialData, tau: f64) -> Self {
        let u_prev = data.u0.iter().zip(&data.v0).map(|(u, v)| u - tau * v).collect();
        State {
            k: 0,
            t: 0.0,
            tau,
            u: data.u0.clone(),
            u_prev,
            chi: data.chi0.clone(),
            chi_prev: data.chi0.clone(),
            xi: vec![0.0; data.chi0.len()],
        }
    }

    /// `v^k = (u^k - u^{k-1}) / tau`.
    pub fn v(&self) -> Vec<f64> {
        self.u.iter().zip(&self.u_prev).map(|(a, b)| (a - b) / self.tau).collect()
    }

    /// `(chi^k - chi^{k-1}) / tau`.
    pub fn chi_rate(&self) -> Vec<f64> {
        self.chi.iter().zip(&self.chi_prev).map(|(a, b)| (a - b) / self.tau).collect()
    }
}

/// Energy bookkeeping for one level; increments refer to the step `k-1 -> k`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EnergyRecord {
    pub k: usize,
    pub t: f64,
    pub kinetic: f64,
    pub elastic: f64,
    pub gradient: f64,
    pub potential: f64,
    /// Viscous plus rate dissipation of the step.
    pub dissipation_increment: f64,
    /// `int I_beta(chi_t)`.
    pub penalty_mass: f64,
    pub free_energy: f64,
    /// Work of body force and traction over the step.
    pub work: f64,
    /// Nonnegative gap of the convex-concave estimate.
    pub convex_split_slack: f64,
    /// `kappa/2 |chi^k - chi^{k-1}|^2` allowance for nonconvex `f`.
    pub nonconvex_allowance: f64,
    /// `work + allowance - (E_k - E_{k-1}) - dissipation`.
    pub slack: f64,
    /// Magnitude the slack is compared against.
    pub slack_scale: f64,
    pub functional_before: f64,
    pub functional_after: f64,
    pub newton_iterations: usize,
    pub damage_residual: f64,
    /// Largest nodal complementarity residual of the step.
    pub complementarity: f64,
    /// Largest `|chi_t|` of the step.
    pub max_rate: f64,
    /// Largest positive part of `chi_t`.
    pub max_positive_rate: f64,
}

impl EnergyRecord {
    pub fn total(&self) -> f64 {
        self.kinetic + self.free_energy
    }
}

struct Levels {
    kinetic: f64,
    elastic: f64,
    gradient: f64,
    potential: f64,
}

fn level_energies(disc: &Discretization, material: &MaterialLaw, v: &[f64], chi: &[f64], w: &[f64]) -> Levels {
    Levels {
        kinetic: 0.5 * disc.vector_mass.inner(v, v),
        elastic: 0.5 * chi.iter().zip(w).map(|(&x, wi)| material.c(x) * wi).sum::<f64>(),
        gradient: 0.5 * disc.laplace.inner(chi, chi),
        potential: chi.iter().zip(&disc.lumped).map(|(&x, m)| m * material.f(x)).sum(),
    }
}

/// Energy record of level 0.
pub fn initial_record(disc: &Discretization, material: &MaterialLaw, state: &State) -> EnergyRecord {
    let w = disc.kernel.strain_energy_loads(&disc.grid, &state.u);
    let e = level_energies(disc, material, &state.v(), &state.chi, &w);
    EnergyRecord {
        k: 0,
        t: state.t,
        kinetic: e.kinetic,
        elastic: e.elastic,
        gradient: e.gradient,
        potential: e.potential,
        free_energy: e.elastic + e.gradient + e.potential,
        ..Default::default()
    }
}

/// One full step: damage from `(chi^{k-1}, u^{k-1})`, then displacement from
/// `(u^{k-1}, u^{k-2}, chi^k)` and the step-`k` loads.
pub fn advance(
    disc: &Discretization,
    material: &MaterialLaw,
    cfg: &StepConfig,
    state: &State,
    loading: &dyn Loading,
) -> Result<(State, EnergyRecord)> {
    let tau = cfg.tau;
    let k = state.k + 1;
    let t = k as f64 * tau;
    let w_prev = disc.kernel.strain_energy_loads(&disc.grid, &state.u);
    let before = level_energies(disc, material, &state.v(), &state.chi, &w_prev);

    let dmg = damage_step(disc, material, cfg, &state.chi, &w_prev)?;
    let traction = loading.traction(&disc.grid, k, t);
    let body = loading.body(&disc.grid, k, t);
    let el = elasticity_step(disc, material, cfg, &dmg.chi, &state.u, &state.u_prev, body.as_deref(), &traction)?;

    let next =
        State { k, t, tau, u: el.u, u_prev: state.u.clone(), chi: dmg.chi, chi_prev: state.chi.clone(), xi: dmg.xi };
    let v = next.v();
    let r = next.chi_rate();
    let w = disc.kernel.strain_energy_loads(&disc.grid, &next.u);
    let after = level_energies(disc, material, &v, &next.chi, &w);

    let pen = &cfg.penalty;
    let mut penalty_mass = 0.0;
    let mut rate_dissipation = 0.0;
    let mut css = 0.0;
    let mut dchi2 = 0.0;
    let mut complementarity = 0.0f64;
    let mut max_rate = 0.0f64;
    let mut max_pos = 0.0f64;
    for i in 0..r.len() {
        let m = disc.lumped[i];
        let (x, p) = (next.chi[i], next.chi_prev[i]);
        let dx = x - p;
        penalty_mass += m * pen.value(r[i]);
        rate_dissipation += tau * m * next.xi[i] * r[i];
        css += 0.5 * ((material.c1_prime(x) + material.c2_prime(p)) * dx - (material.c(x) - material.c(p))) * w_prev[i];
        dchi2 += m * dx * dx;
        complementarity = complementarity.max(crate::material::subgradient_residual(r[i], next.xi[i]));
        max_rate = max_rate.max(r[i].abs());
        max_pos = max_pos.max(r[i].max(0.0));
    }
    let dissipation = tau * el.k_d.inner(&v, &v) + tau * disc.mass_laplace.inner(&r, &r) + rate_dissipation;
    let work = tau * el.load.iter().zip(&v).map(|(a, b)| a * b).sum::<f64>();
    let allowance = 0.5 * material.f_concavity() * dchi2;
    let e_before = before.kinetic + before.elastic + before.gradient + before.potential;
    let e_after = after.kinetic + after.elastic + after.gradient + after.potential;
    let slack = work + allowance - (e_after - e_before) - dissipation;
    let record = EnergyRecord {
        k,
        t,
        kinetic: after.kinetic,
        elastic: after.elastic,
        gradient: after.gradient,
        potential: after.potential,
        dissipation_increment: dissipation,
        penalty_mass,
        free_energy: after.elastic + after.gradient + after.potential,
        work,
        convex_split_slack: css,
        nonconvex_allowance: allowance,
        slack,
        slack_scale: 1.0 + e_before.abs() + e_after.abs() + work.abs() + dissipation.abs(),
        functional_before: dmg.functional_before,
        functional_after: dmg.functional_after,
        newton_iterations: dmg.iterations,
        damage_residual: dmg.residual,
        complementarity,
        max_rate,
        max_positive_rate: max_pos,
    };
    Ok((next, record))
}

/// Run from `initial` to `cfg.t_end`. On failure the error carries the
/// trajectory computed so far.
pub fn run(
    disc: &Discretization,
    material: &MaterialLaw,
    cfg: &StepConfig,
    initial: &InitialData,
    loading: &dyn Loading,
) -> Result<Trajectory> {
    cfg.validate()?;
    let n = disc.grid.n_nodes();
    if initial.chi0.len() != n || initial.u0.len() != disc.grid.n_vector_dofs() {
        return Err(Error::DimensionMismatch { what: "initial data vs grid", expected: n, got: initial.chi0.len() });
    }
    let steps = cfg.n_steps()?;
    let mut state = State::initial(initial, cfg.tau);
    let mut traj = Trajectory::start(&state, initial_record(disc, material, &state), cfg.snapshot_every, steps);
    for _ in 0..steps {
        match advance(disc, material, cfg, &state, loading) {
            Ok((next, rec)) => {
                traj.push(&next, rec, steps);
                state = next;
            }
            Err(e) => {
                let step = state.k + 1;
                traj.mark_failed(format!("{e}"));
                return Err(Error::Run { step, source: Box::new(e), partial: Box::new(traj) });
            }
        }
    }
    traj.finish(state);
    Ok(traj)
}
