//! Executable checks of the analysis: a brute-force scalar oracle for the
//! damage step, continuous dependence on the data, and self-convergence
//! sweeps in the penalty parameter and the time step.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forcing::{BodyTerm, Forcing, Loading, TractionTerm};
use crate::grid::{BoundaryTraction, Grid};
use crate::material::{MaterialLaw, Penalty, PenaltyKind};
use crate::par::{self, Execution};
use crate::problem::Problem;
use crate::stepper::{run, Discretization, InitialData, StepConfig, Trajectory};

/// Spatially homogeneous instance of one damage step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarStep {
    pub chi_prev: f64,
    /// `C eps : eps`, constant in space.
    pub strain_energy: f64,
    pub tau: f64,
}

/// Left side of the scalar stationarity equation
/// `r + xi_beta(r) + f'(chi) + (c1'(chi) + c2'(chi_prev)) W / 2 = 0`.
pub fn scalar_residual(material: &MaterialLaw, penalty: &Penalty, step: &ScalarStep, chi: f64) -> f64 {
    let r = (chi - step.chi_prev) / step.tau;
    r + penalty.slope(r)
        + material.f_prime(chi)
        + 0.5 * (material.c1_prime(chi) + material.c2_prime(step.chi_prev)) * step.strain_energy
}

/// Solve the homogeneous damage step by bisection on
/// `[chi_prev - 10, chi_prev + 10]` to `1e-12`.
pub fn scalar_oracle(material: &MaterialLaw, penalty: &Penalty, step: &ScalarStep) -> Result<f64> {
    if !(step.tau > 0.0) || !step.chi_prev.is_finite() || !(step.strain_energy >= 0.0) {
        return Err(Error::Oracle(format!("malformed scalar step {step:?}")));
    }
    let g = |x: f64| scalar_residual(material, penalty, step, x);
    let (mut lo, mut hi) = (step.chi_prev - 10.0, step.chi_prev + 10.0);
    let (glo, ghi) = (g(lo), g(hi));
    if glo == 0.0 {
        return Ok(lo);
    }
    if ghi == 0.0 {
        return Ok(hi);
    }
    if glo.signum() == ghi.signum() {
        return Err(Error::Oracle(format!("no sign change on [{lo}, {hi}] ({glo:.3e}, {ghi:.3e})")));
    }
    let increasing = ghi > 0.0;
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        let gm = g(mid);
        if gm == 0.0 {
            return Ok(mid);
        }
        if (gm > 0.0) == increasing {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Direction in data space along which the second run is perturbed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Perturbation {
    Traction { term: TractionTerm },
    Body { term: BodyTerm },
    Displacement { values: Vec<f64> },
    Velocity { values: Vec<f64> },
    Damage { values: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationSpec {
    pub direction: Perturbation,
    /// Strictly increasing, positive.
    pub magnitudes: Vec<f64>,
}

impl PerturbationSpec {
    pub fn validate(&self) -> Result<()> {
        if self.magnitudes.is_empty() || self.magnitudes.iter().any(|&d| !(d > 0.0) || !d.is_finite()) {
            return Err(Error::invalid("perturbation magnitudes must be positive and finite"));
        }
        if self.magnitudes.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("perturbation magnitudes must be sorted increasing"));
        }
        Ok(())
    }
}

/// Base loading plus `scale` times an extra forcing.
struct PerturbedLoading<'a> {
    base: &'a dyn Loading,
    extra: &'a Forcing,
    scale: f64,
}

impl Loading for PerturbedLoading<'_> {
    fn traction(&self, grid: &Grid, k: usize, t: f64) -> BoundaryTraction {
        let mut b = self.base.traction(grid, k, t);
        if !self.extra.traction.is_empty() {
            b.axpy(self.scale, &self.extra.traction_at(grid, t));
        }
        b
    }

    fn body(&self, grid: &Grid, k: usize, t: f64) -> Option<Vec<f64>> {
        let base = self.base.body(grid, k, t);
        let Some(extra) = self.extra.body_at(grid, t) else { return base };
        let mut out = base.unwrap_or_else(|| vec![0.0; extra.len()]);
        for (a, b) in out.iter_mut().zip(extra) {
            *a += self.scale * b;
        }
        Some(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DependenceRow {
    pub delta: f64,
    /// Solution distance in the discrete norms of the stability estimate.
    pub lhs: f64,
    /// Data distance.
    pub rhs: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DependenceReport {
    pub rows: Vec<DependenceRow>,
    /// Distance between two runs with identical data.
    pub identical_lhs: f64,
    /// `max ratio / min ratio`.
    pub ratio_spread: f64,
    /// `lhs` strictly increases with `delta`.
    pub lhs_monotone: bool,
}

impl DependenceReport {
    pub fn passed(&self) -> bool {
        self.identical_lhs == 0.0 && self.ratio_spread <= 10.0 && self.lhs_monotone
    }
}

/// Discrete left side of the stability estimate:
/// `max_k |du^k|_L2 + max_k |dv^k|_L2 + (tau sum_k |du^k|_H1^2 + |dv^k|_H1^2)^(1/2)
///  + (tau sum_k |dchi^k|_H1^2 + |dchi_t^k|_H1^2)^(1/2)`.
pub fn solution_distance(disc: &Discretization, a: &Trajectory, b: &Trajectory) -> Result<f64> {
    let m = a.completed_steps();
    if b.completed_steps() != m || (a.tau - b.tau).abs() > 1e-15 * a.tau {
        return Err(Error::invalid("trajectories live on different time grids"));
    }
    let tau = a.tau;
    let diff = |x: &[f64], y: &[f64]| -> Vec<f64> { x.iter().zip(y).map(|(p, q)| p - q).collect() };
    let (mut u_max, mut v_max, mut u_int, mut chi_int) = (0.0f64, 0.0f64, 0.0, 0.0);
    for k in 0..=m {
        let du = diff(a.u_level(k)?, b.u_level(k)?);
        let dv = diff(&a.v_level(k)?, &b.v_level(k)?);
        u_max = u_max.max(disc.l2_norm_vector(&du));
        v_max = v_max.max(disc.l2_norm_vector(&dv));
        if k >= 1 {
            u_int += tau * (disc.h1_norm_vector(&du).powi(2) + disc.h1_norm_vector(&dv).powi(2));
            let dchi = diff(&a.chi[k], &b.chi[k]);
            let drate = diff(&a.chi_rate(k), &b.chi_rate(k));
            chi_int += tau * (disc.h1_norm(&dchi).powi(2) + disc.h1_norm(&drate).powi(2));
        }
    }
    Ok(u_max + v_max + u_int.sqrt() + chi_int.sqrt())
}

fn data_distance(
    disc: &Discretization,
    step: &StepConfig,
    a: &InitialData,
    b: &InitialData,
    extra: &Forcing,
    scale: f64,
) -> Result<f64> {
    let grid = &disc.grid;
    let diff = |x: &[f64], y: &[f64]| -> Vec<f64> { x.iter().zip(y).map(|(p, q)| p - q).collect() };
    let mut s = disc.h1_norm_vector(&diff(&a.u0, &b.u0))
        + disc.l2_norm_vector(&diff(&a.v0, &b.v0))
        + disc.h1_norm(&diff(&a.chi0, &b.chi0));
    let (mut bsum, mut lsum) = (0.0, 0.0);
    for k in 1..=step.n_steps()? {
        let t = k as f64 * step.tau;
        if !extra.traction.is_empty() {
            let db = extra.traction_at(grid, t).scaled(scale);
            bsum += step.tau * db.inner(grid, &db);
        }
        if let Some(l) = extra.body_at(grid, t) {
            let dl: Vec<f64> = l.iter().map(|x| scale * x).collect();
            lsum += step.tau * disc.vector_mass.inner(&dl, &dl);
        }
    }
    s += bsum.sqrt() + lsum.sqrt();
    Ok(s)
}

fn perturbed_run(
    problem: &Problem,
    step: &StepConfig,
    dir: &Perturbation,
    delta: f64,
) -> Result<(InitialData, Forcing, Trajectory)> {
    let mut init = problem.initial.clone();
    let mut extra = Forcing::none();
    let nudge = |target: &mut Vec<f64>, values: &[f64], what: &'static str| -> Result<()> {
        if values.len() != target.len() {
            return Err(Error::DimensionMismatch { what, expected: target.len(), got: values.len() });
        }
        for (a, b) in target.iter_mut().zip(values) {
            *a += delta * b;
        }
        Ok(())
    };
    match dir {
        Perturbation::Traction { term } => extra.traction.push(term.clone()),
        Perturbation::Body { term } => extra.body.push(term.clone()),
        Perturbation::Displacement { values } => nudge(&mut init.u0, values, "displacement perturbation")?,
        Perturbation::Velocity { values } => nudge(&mut init.v0, values, "velocity perturbation")?,
        Perturbation::Damage { values } => nudge(&mut init.chi0, values, "damage perturbation")?,
    }
    let loading = PerturbedLoading { base: &problem.forcing, extra: &extra, scale: delta };
    let traj = run(&problem.disc, &problem.material, step, &init, &loading)?;
    Ok((init, extra, traj))
}

/// Run the base problem against perturbations of size `delta` along one
/// direction and tabulate solution distance over data distance.
pub fn continuous_dependence_test(
    problem: &Problem,
    spec: &PerturbationSpec,
    exec: Execution,
) -> Result<DependenceReport> {
    if !problem.material.d_is_one() {
        return Err(Error::TheoremPrecondition("continuous dependence requires d = 1".into()));
    }
    spec.validate()?;
    let step = StepConfig { snapshot_every: 1, ..problem.step.clone() };
    let base = problem.run_with(&step, &problem.forcing)?;
    let twin = problem.run_with(&step, &problem.forcing)?;
    let identical_lhs = solution_distance(&problem.disc, &base, &twin)?;

    let rows = par::map(exec, &spec.magnitudes, |&delta| -> Result<DependenceRow> {
        let (init, extra, traj) = perturbed_run(problem, &step, &spec.direction, delta)?;
        let lhs = solution_distance(&problem.disc, &base, &traj)?;
        let rhs = data_distance(&problem.disc, &step, &problem.initial, &init, &extra, delta)?;
        Ok(DependenceRow { delta, lhs, rhs, ratio: lhs / rhs })
    });
    let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
    let (lo, hi) = rows.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), r| (lo.min(r.ratio), hi.max(r.ratio)));
    let lhs_monotone = rows.windows(2).all(|w| w[1].lhs > w[0].lhs);
    Ok(DependenceReport { rows, identical_lhs, ratio_spread: hi / lo, lhs_monotone })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    Beta,
    Tau,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub value: f64,
    /// `max_k |(chi^k - chi^{k-1})^+ / tau|_inf`.
    pub max_positive_rate: f64,
    pub max_rate: f64,
    /// Largest nodal complementarity residual over all steps.
    pub max_complementarity: f64,
    pub final_energy: f64,
    pub energy_violations: usize,
    /// Beta sweep: distance to the previous point. Tau sweep: error against
    /// the reference.
    pub distance: Option<f64>,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub parameter: SweepParameter,
    pub points: Vec<SweepPoint>,
    /// Tau sweeps: reference step.
    pub reference: Option<f64>,
    /// Tau sweeps: least-squares slope of `log error` against `log tau`.
    pub fitted_rate: Option<f64>,
    pub passed: bool,
}

impl SweepReport {
    /// Consecutive error ratios `e_i / e_{i+1}` of a tau sweep.
    pub fn error_ratios(&self) -> Vec<f64> {
        let e: Vec<f64> = self.points.iter().filter_map(|p| p.distance).collect();
        e.windows(2).map(|w| w[0] / w[1]).collect()
    }
}

fn summarize(value: f64, traj: &Trajectory) -> SweepPoint {
    let audit = crate::stepper::energy_audit(traj);
    let recs = &traj.records[1..];
    let fold = |f: fn(&crate::stepper::EnergyRecord) -> f64| recs.iter().map(f).fold(0.0, f64::max);
    SweepPoint {
        value,
        max_positive_rate: fold(|r| r.max_positive_rate),
        max_rate: fold(|r| r.max_rate),
        max_complementarity: fold(|r| r.complementarity),
        final_energy: traj.records.last().map_or(0.0, |r| r.total()),
        energy_violations: audit.violations,
        distance: None,
        failure: traj.failure.clone(),
    }
}

fn failed_point(value: f64, e: &Error) -> SweepPoint {
    SweepPoint {
        value,
        max_positive_rate: f64::NAN,
        max_rate: f64::NAN,
        max_complementarity: f64::NAN,
        final_energy: f64::NAN,
        energy_violations: 0,
        distance: None,
        failure: Some(e.to_string()),
    }
}

/// `max_k |u_a^k - u_b^k|_L2 + max_k |chi_a^k - chi_b^k|_L2` on a shared grid.
pub fn trajectory_distance(disc: &Discretization, a: &Trajectory, b: &Trajectory) -> Result<f64> {
    let m = a.completed_steps().min(b.completed_steps());
    let (mut du, mut dc) = (0.0f64, 0.0f64);
    for k in 0..=m {
        let d: Vec<f64> = a.u_level(k)?.iter().zip(b.u_level(k)?).map(|(x, y)| x - y).collect();
        du = du.max(disc.l2_norm_vector(&d));
        let d: Vec<f64> = a.chi[k].iter().zip(&b.chi[k]).map(|(x, y)| x - y).collect();
        dc = dc.max(disc.l2_norm(&d));
    }
    Ok(du + dc)
}

/// Run the problem for every penalty parameter in `betas` (strictly
/// decreasing). Passes when `|(chi_t)^+|_inf` does not increase and the
/// distances between consecutive levels decrease. Failed runs are reported
/// in place.
pub fn beta_sweep(problem: &Problem, betas: &[f64], exec: Execution) -> Result<SweepReport> {
    if betas.is_empty() || betas.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::invalid("beta list must be nonempty and strictly decreasing"));
    }
    let step = StepConfig { snapshot_every: 1, ..problem.step.clone() };
    let runs = par::map(exec, betas, |&beta| -> Result<Trajectory> {
        let penalty = Penalty::new(beta, step.penalty.kind())?;
        problem.run_with(&step.with_penalty(penalty), &problem.forcing)
    });
    let mut points = Vec::with_capacity(betas.len());
    for (i, r) in runs.iter().enumerate() {
        let mut point = match r {
            Ok(t) => summarize(betas[i], t),
            Err(e) => failed_point(betas[i], e),
        };
        if i > 0 {
            if let (Ok(a), Ok(b)) = (&runs[i - 1], r) {
                point.distance = Some(trajectory_distance(&problem.disc, a, b)?);
            }
        }
        points.push(point);
    }
    let all_ok = points.iter().all(|p| p.failure.is_none());
    let rates_ok = points.windows(2).all(|w| w[1].max_positive_rate <= w[0].max_positive_rate);
    let d: Vec<f64> = points.iter().filter_map(|p| p.distance).collect();
    let cauchy = d.windows(2).all(|w| w[1] < w[0]);
    Ok(SweepReport {
        parameter: SweepParameter::Beta,
        points,
        reference: None,
        fitted_rate: None,
        passed: all_ok && rates_ok && cauchy,
    })
}

/// Accepted range of `e(tau) / e(tau / 2)` for a first-order scheme.
pub const TAU_RATIO_BAND: [f64; 2] = [1.6, 2.6];

impl SweepReport {
    fn with_ratio_check(mut self, runs_ok: bool) -> Self {
        let ratios = self.error_ratios();
        self.passed = runs_ok
            && !ratios.is_empty()
            && ratios.len() + 1 == self.points.len()
            && ratios.iter().all(|r| (TAU_RATIO_BAND[0]..=TAU_RATIO_BAND[1]).contains(r));
        self
    }
}

/// Self-convergence in the time step. Each `tau` in `taus` (strictly
/// decreasing, each an integer multiple of `reference`) is compared with the
/// reference run at the coarse grid times in
/// `max_k (|u^k - u_ref|_H1 + |chi^k - chi_ref|_H1)`. Passes when every
/// error ratio between consecutive halvings lies in [`TAU_RATIO_BAND`].
pub fn tau_sweep(problem: &Problem, taus: &[f64], reference: f64, exec: Execution) -> Result<SweepReport> {
    if taus.is_empty() || taus.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::invalid("tau list must be nonempty and strictly decreasing"));
    }
    let ratios = taus
        .iter()
        .map(|&t| {
            let q = t / reference;
            if q < 1.0 || (q - q.round()).abs() > 1e-9 * q {
                Err(Error::invalid(format!("tau {t} is not a multiple of the reference {reference}")))
            } else {
                Ok(q.round() as usize)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let mut all = taus.to_vec();
    all.push(reference);
    let runs = par::map(exec, &all, |&tau| -> Result<Trajectory> {
        let step = StepConfig { snapshot_every: 1, ..problem.step.with_tau(tau)? };
        problem.run_with(&step, &problem.forcing)
    });
    let disc = &problem.disc;
    let mut points = Vec::new();
    let reference_run = runs.last().expect("reference run").as_ref();
    for (i, &tau) in taus.iter().enumerate() {
        let mut point = match &runs[i] {
            Ok(t) => summarize(tau, t),
            Err(e) => failed_point(tau, e),
        };
        if let (Ok(coarse), Ok(fine)) = (&runs[i], reference_run) {
            let mut err = 0.0f64;
            for k in 0..=coarse.completed_steps() {
                let kf = k * ratios[i];
                if kf > fine.completed_steps() {
                    break;
                }
                let du: Vec<f64> = coarse.u_level(k)?.iter().zip(fine.u_level(kf)?).map(|(a, b)| a - b).collect();
                let dc: Vec<f64> = coarse.chi[k].iter().zip(&fine.chi[kf]).map(|(a, b)| a - b).collect();
                err = err.max(disc.h1_norm_vector(&du) + disc.h1_norm(&dc));
            }
            point.distance = Some(err);
        }
        points.push(point);
    }
    let xy: Vec<(f64, f64)> =
        points.iter().filter_map(|p| p.distance.filter(|&e| e > 0.0).map(|e| (p.value.ln(), e.ln()))).collect();
    let fitted_rate = (xy.len() >= 2).then(|| {
        let n = xy.len() as f64;
        let mx = xy.iter().map(|p| p.0).sum::<f64>() / n;
        let my = xy.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = xy.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = xy.iter().map(|p| (p.0 - mx).powi(2)).sum();
        sxy / sxx
    });
    let all_ok = points.iter().all(|p| p.failure.is_none()) && reference_run.is_ok();
    Ok(SweepReport { parameter: SweepParameter::Tau, points, reference: Some(reference), fitted_rate, passed: false }
        .with_ratio_check(all_ok))
}

/// One random homogeneous instance: the full solver against the scalar
/// oracle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleCase {
    pub step: ScalarStep,
    pub beta: f64,
    pub solver: f64,
    pub oracle: f64,
}

impl OracleCase {
    pub fn error(&self) -> f64 {
        (self.solver - self.oracle).abs()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport {
    pub cases: Vec<OracleCase>,
    pub max_error: f64,
    /// Largest `|g - g_fd|_inf / max(|g|_inf, 1)` over the gradient probes.
    pub max_gradient_error: f64,
}

impl OracleReport {
    pub fn passed(&self, tol: f64, gradient_tol: f64) -> bool {
        self.max_error <= tol && self.max_gradient_error <= gradient_tol
    }
}

/// Compare [`damage_step`](crate::stepper::damage_step) on spatially constant
/// data with [`scalar_oracle`] for `samples` random instances
/// (`chi_prev` in `[0, 1]`, `W` in `[0, 5]`, `tau` in `[1e-3, 1e-1]`, `beta`
/// log-uniform in `[1e-4, 1e-1]`), and probe the functional's gradient
/// against central differences at random nonuniform states of a `3 x 3`
/// grid whose rates stay away from 0. `material` must be two-dimensional.
pub fn oracle_comparison(material: &MaterialLaw, kind: PenaltyKind, samples: usize, seed: u64) -> Result<OracleReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid = Grid::new(2, &[1.0, 1.0], &[3, 3])?;
    let base = StepConfig::new(0.01, 1.0, Penalty::new(0.1, kind)?)?;
    let disc = Discretization::new(grid, material.stiffness(), &base.linear)?;
    let n = disc.grid.n_nodes();
    let mut cases = Vec::with_capacity(samples);
    let mut max_gradient_error = 0.0f64;
    for _ in 0..samples {
        let step = ScalarStep {
            chi_prev: rng.random_range(0.0..1.0),
            strain_energy: rng.random_range(0.0..5.0),
            tau: rng.random_range(1e-3..1e-1),
        };
        let beta = 10f64.powf(rng.random_range(-4.0..-1.0));
        let penalty = Penalty::new(beta, kind)?;
        let cfg = StepConfig { tau: step.tau, t_end: step.tau, penalty, ..base.clone() };
        let chi_prev = vec![step.chi_prev; n];
        let w: Vec<f64> = disc.lumped.iter().map(|m| m * step.strain_energy).collect();
        let out = crate::stepper::damage_step(&disc, material, &cfg, &chi_prev, &w)?;
        let oracle = scalar_oracle(material, &penalty, &step)?;
        // report the node farthest from the oracle
        let solver =
            out.chi
                .iter()
                .copied()
                .fold(out.chi[0], |m, c| if (c - oracle).abs() > (m - oracle).abs() { c } else { m });
        cases.push(OracleCase { step, beta, solver, oracle });

        let fun = crate::stepper::DamageFunctional { disc: &disc, material, cfg: &cfg, chi_prev: &chi_prev, w: &w };
        // keep every rate away from the penalty kink at 0
        let chi: Vec<f64> = (0..n)
            .map(|_| {
                let d = rng.random_range(0.01..0.05);
                step.chi_prev + if rng.random_bool(0.5) { d } else { -d }
            })
            .collect();
        let g = fun.gradient(&chi);
        let scale = g.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        for i in 0..n {
            let h = 1e-6 * (1.0 + chi[i].abs());
            let mut plus = chi.clone();
            let mut minus = chi.clone();
            plus[i] += h;
            minus[i] -= h;
            let fd = (fun.value(&plus) - fun.value(&minus)) / (2.0 * h);
            max_gradient_error = max_gradient_error.max((fd - g[i]).abs() / scale);
        }
    }
    let max_error = cases.iter().map(OracleCase::error).fold(0.0, f64::max);
    Ok(OracleReport { cases, max_error, max_gradient_error })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::material::{extend_coefficient, quadratic_c_tilde, quadratic_well, StiffnessTensor};
    use crate::piecewise::PiecewisePoly;

    fn linear_c_material(f: PiecewisePoly) -> MaterialLaw {
        let split = extend_coefficient(&quadratic_c_tilde(), 1.0).unwrap();
        MaterialLaw::from_split(
            &split,
            PiecewisePoly::constant(1.0),
            f,
            StiffnessTensor::isotropic(1, 1.0, 1.0).unwrap(),
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn zero_drive_keeps_level() {
        let m = linear_c_material(quadratic_well(0.0, 0.0));
        let p = Penalty::moreau_yosida(0.1).unwrap();
        let x = scalar_oracle(&m, &p, &ScalarStep { chi_prev: 0.7, strain_energy: 0.0, tau: 0.1 }).unwrap();
        assert!((x - 0.7).abs() < 1e-12);
    }

    #[test]
    fn healing_rate_closed_form() {
        // r (1 + 1/beta) = 1 - chi with chi = 0.5 + tau r
        let m = linear_c_material(quadratic_well(1.0, 1.0));
        let p = Penalty::moreau_yosida(0.01).unwrap();
        let step = ScalarStep { chi_prev: 0.5, strain_energy: 0.0, tau: 0.1 };
        let x = scalar_oracle(&m, &p, &step).unwrap();
        let r = (x - 0.5) / 0.1;
        let exact = 0.5 / (1.0 + 1.0 / 0.01 + 0.1);
        assert!((r - exact).abs() < 1e-9, "{r} vs {exact}");
    }

    #[test]
    fn magnitudes_must_increase() {
        let spec =
            PerturbationSpec { direction: Perturbation::Damage { values: vec![] }, magnitudes: vec![1e-2, 1e-3] };
        assert!(spec.validate().is_err());
    }
}
