//! Boundary control of the damage evolution: tracking cost, admissible
//! controls in a finite basis, derivative-free and gradient solvers for the
//! regularized and the adapted problem, and continuation in `beta`.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forcing::{side_coordinate, Loading, SpatialShape};
use crate::grid::{BoundaryTraction, Grid, Side};
use crate::material::Penalty;
use crate::par::{self, Execution};
use crate::problem::Problem;
use crate::stepper::{StepConfig, Trajectory};

/// Spatial traction pattern `shape(s) * direction` on one side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlMode {
    pub side: Side,
    pub direction: [f64; 2],
    #[serde(default = "uniform")]
    pub shape: SpatialShape,
}

fn uniform() -> SpatialShape {
    SpatialShape::Uniform
}

/// Tensor basis: spatial modes times piecewise linear hats on time knots.
/// Coefficient `s * n_knots + j` multiplies mode `s` and hat `j`.
#[derive(Debug, Clone)]
pub struct ControlBasis {
    modes: Vec<ControlMode>,
    knots: Vec<f64>,
    tau: f64,
    n_steps: usize,
    traces: Vec<BoundaryTraction>,
    /// `int_Gamma g_s . g_r`.
    spatial_gram: Vec<Vec<f64>>,
    /// `tau sum_k h_i(t_k) h_j(t_k)`, `k = 1..M`.
    time_gram: Vec<Vec<f64>>,
    /// `tau sum_k dh_i dh_j / tau^2`, the time-difference form.
    time_stiffness: Vec<Vec<f64>>,
}

impl ControlBasis {
    /// `knots` must start at 0, end at `T`, increase strictly and lie on the
    /// time grid of `step`. The single knot `[0]` gives controls constant in
    /// time.
    pub fn new(grid: &Grid, step: &StepConfig, modes: Vec<ControlMode>, knots: Vec<f64>) -> Result<Self> {
        let n_steps = step.n_steps()?;
        let tau = step.tau;
        if modes.is_empty() {
            return Err(Error::invalid("control basis needs at least one spatial mode"));
        }
        if knots.is_empty() || knots.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("control knots must be nonempty and strictly increasing"));
        }
        let t_end = n_steps as f64 * tau;
        let spans = knots.len() == 1 || (knots[knots.len() - 1] - t_end).abs() <= 1e-9 * t_end.max(1.0);
        if knots[0].abs() > 1e-12 || !spans {
            return Err(Error::invalid(format!("control knots must span [0, {t_end}]")));
        }
        for &k in &knots {
            let s = k / tau;
            if (s - s.round()).abs() > 1e-9 * s.max(1.0) {
                return Err(Error::invalid(format!("control knot {k} is off the time grid")));
            }
        }
        for m in &modes {
            if grid.dim() == 1 && !matches!(m.side, Side::Left | Side::Right) {
                return Err(Error::invalid("1D control modes act on the left or right end only"));
            }
        }
        let traces: Vec<BoundaryTraction> = modes
            .iter()
            .map(|m| {
                BoundaryTraction::from_fn(grid, |side, p| {
                    if side != m.side {
                        return [0.0; 2];
                    }
                    let a = m.shape.eval(side_coordinate(grid, side, p));
                    [a * m.direction[0], a * m.direction[1]]
                })
            })
            .collect();
        let spatial_gram = traces.iter().map(|a| traces.iter().map(|b| a.inner(grid, b)).collect()).collect();
        let mut basis = ControlBasis {
            modes,
            knots,
            tau,
            n_steps,
            traces,
            spatial_gram,
            time_gram: Vec::new(),
            time_stiffness: Vec::new(),
        };
        let nk = basis.knots.len();
        let mut tg = vec![vec![0.0; nk]; nk];
        let mut ts = vec![vec![0.0; nk]; nk];
        for k in 1..=n_steps {
            let h: Vec<f64> = (0..nk).map(|j| basis.hat(j, k as f64 * tau)).collect();
            let hp: Vec<f64> = (0..nk).map(|j| basis.hat(j, (k - 1) as f64 * tau)).collect();
            for i in 0..nk {
                for j in 0..nk {
                    tg[i][j] += tau * h[i] * h[j];
                    ts[i][j] += (h[i] - hp[i]) * (h[j] - hp[j]) / tau;
                }
            }
        }
        basis.time_gram = tg;
        basis.time_stiffness = ts;
        Ok(basis)
    }

    pub fn len(&self) -> usize {
        self.modes.len() * self.knots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn modes(&self) -> &[ControlMode] {
        &self.modes
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    /// Nodal hat `j` on the knots.
    pub fn hat(&self, j: usize, t: f64) -> f64 {
        let k = &self.knots;
        if k.len() == 1 {
            return 1.0;
        }
        let left = if j > 0 { k[j - 1] } else { k[0] };
        let right = if j + 1 < k.len() { k[j + 1] } else { k[j] };
        if t < left || t > right {
            return 0.0;
        }
        if t <= k[j] {
            if j == 0 {
                1.0
            } else {
                (t - left) / (k[j] - left)
            }
        } else if j + 1 == k.len() {
            1.0
        } else {
            (right - t) / (right - k[j])
        }
    }

    /// Traction at time `t` for coefficients `c`.
    pub fn traction(&self, c: &[f64], t: f64) -> BoundaryTraction {
        let nk = self.knots.len();
        let mut out = self.traces[0].scaled(0.0);
        for (s, trace) in self.traces.iter().enumerate() {
            let a: f64 = (0..nk).map(|j| c[s * nk + j] * self.hat(j, t)).sum();
            if a != 0.0 {
                out.axpy(a, trace);
            }
        }
        out
    }

    fn quadratic(&self, time: &[Vec<f64>], a: &[f64], b: &[f64]) -> f64 {
        let nk = self.knots.len();
        let mut s = 0.0;
        for (r, gr) in self.spatial_gram.iter().enumerate() {
            for (q, &g) in gr.iter().enumerate() {
                for i in 0..nk {
                    for j in 0..nk {
                        s += g * time[i][j] * a[r * nk + i] * b[q * nk + j];
                    }
                }
            }
        }
        s
    }

    /// Discrete `|b|^2_{L2(Sigma)} = tau sum_{k=1}^M |b(t_k)|^2_{L2(Gamma)}`.
    pub fn l2_sigma_sq(&self, c: &[f64]) -> f64 {
        self.quadratic(&self.time_gram, c, c).max(0.0)
    }

    /// Norm surrogate: L2(Sigma) plus the time-difference seminorm.
    pub fn control_norm(&self, c: &[f64]) -> f64 {
        (self.l2_sigma_sq(c) + self.quadratic(&self.time_stiffness, c, c).max(0.0)).sqrt()
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }
}

/// Coefficients with their admissible set: a box per coefficient and a cap
/// on the norm surrogate.
#[derive(Debug, Clone)]
pub struct ControlVector {
    pub basis: Arc<ControlBasis>,
    pub coeffs: Vec<f64>,
    pub bounds: Vec<[f64; 2]>,
    pub norm_cap: f64,
}

impl ControlVector {
    pub fn new(basis: Arc<ControlBasis>, coeffs: Vec<f64>, bounds: Vec<[f64; 2]>, norm_cap: f64) -> Result<Self> {
        let n = basis.len();
        if coeffs.len() != n {
            return Err(Error::DimensionMismatch { what: "control coefficients", expected: n, got: coeffs.len() });
        }
        if bounds.len() != n {
            return Err(Error::DimensionMismatch { what: "control bounds", expected: n, got: bounds.len() });
        }
        // scaling toward the origin must keep the box, so it has to contain 0
        if bounds.iter().any(|b| !(b[0] <= 0.0 && 0.0 <= b[1])) {
            return Err(Error::invalid("every coefficient box must contain 0"));
        }
        if !(norm_cap > 0.0) {
            return Err(Error::invalid("norm cap must be positive"));
        }
        Ok(ControlVector { basis, coeffs, bounds, norm_cap })
    }

    pub fn with_coeffs(&self, coeffs: Vec<f64>) -> Self {
        ControlVector { coeffs, ..self.clone() }
    }

    pub fn norm(&self) -> f64 {
        self.basis.control_norm(&self.coeffs)
    }

    pub fn is_admissible(&self) -> bool {
        self.coeffs.iter().zip(&self.bounds).all(|(c, b)| b[0] <= *c && *c <= b[1])
            && self.norm() <= self.norm_cap * (1.0 + 1e-12)
    }
}

/// Clip to the box, then scale toward 0 if the norm surrogate exceeds the
/// cap. Admissible input comes back unchanged.
pub fn project_admissible(b: &ControlVector) -> ControlVector {
    if b.is_admissible() {
        return b.clone();
    }
    let mut c: Vec<f64> = b.coeffs.iter().zip(&b.bounds).map(|(x, bd)| x.clamp(bd[0], bd[1])).collect();
    let n = b.basis.control_norm(&c);
    if n > b.norm_cap {
        let s = b.norm_cap / n;
        c.iter_mut().for_each(|x| *x *= s);
    }
    b.with_coeffs(c)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrackingNorm {
    /// Maxima over nodes and steps.
    #[default]
    Sup,
    /// Squared discrete L2 norms.
    L2,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerMethod {
    #[default]
    PatternSearch,
    ProjectedGradient,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerSettings {
    pub method: OptimizerMethod,
    pub max_evals: usize,
    pub initial_step: f64,
    /// Stop once the poll step falls below this.
    pub step_tolerance: f64,
    /// Extra seeded random starts (in addition to the given guess).
    pub restarts: usize,
    pub seed: u64,
    /// Central-difference step of the gradient method.
    pub fd_step: f64,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        OptimizerSettings {
            method: OptimizerMethod::PatternSearch,
            max_evals: 2000,
            initial_step: 0.2,
            step_tolerance: 1e-3,
            restarts: 5,
            seed: 0,
            fd_step: 1e-6,
        }
    }
}

impl OptimizerSettings {
    pub fn validate(&self) -> Result<()> {
        if self.max_evals == 0 || !(self.initial_step > 0.0) || !(self.step_tolerance > 0.0) || !(self.fd_step > 0.0) {
            return Err(Error::invalid("optimizer budget, steps and tolerances must be positive"));
        }
        Ok(())
    }
}

/// Weights and targets of the tracking cost.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlConfig {
    pub lambda_q: f64,
    pub lambda_omega: f64,
    pub lambda_sigma: f64,
    /// Space-time target: one nodal field (constant in time) or one per
    /// time level `0..=M`.
    pub chi_q: Vec<Vec<f64>>,
    /// Terminal target, nodal.
    pub chi_t: Vec<f64>,
    pub tracking: TrackingNorm,
    pub beta_schedule: Vec<f64>,
    pub optimizer: OptimizerSettings,
    /// Anchor of the adapted problem.
    pub anchor: Option<Vec<f64>>,
    /// Weight of `1/2 |b - anchor|^2` in the adapted cost.
    pub proximal_weight: f64,
}

impl ControlConfig {
    pub fn validate(&self, grid: &Grid) -> Result<()> {
        let w = [self.lambda_q, self.lambda_omega, self.lambda_sigma];
        if w.iter().any(|&x| !(x >= 0.0)) || w.iter().all(|&x| x == 0.0) {
            return Err(Error::invalid("cost weights must be nonnegative and not all zero"));
        }
        if self.chi_q.is_empty() {
            return Err(Error::invalid("space-time target needs at least one level"));
        }
        let mut targets: Vec<(&'static str, &Vec<f64>)> = self.chi_q.iter().map(|q| ("space-time target", q)).collect();
        targets.push(("terminal target", &self.chi_t));
        for (what, t) in targets {
            if t.len() != grid.n_nodes() {
                return Err(Error::DimensionMismatch { what, expected: grid.n_nodes(), got: t.len() });
            }
            if t.iter().any(|x| !x.is_finite()) {
                return Err(Error::invalid(format!("{what} must be finite")));
            }
        }
        if self.beta_schedule.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::invalid("beta schedule must be strictly decreasing"));
        }
        if !(self.proximal_weight > 0.0) {
            return Err(Error::invalid("proximal weight must be positive"));
        }
        self.optimizer.validate()
    }
}

/// Tracking cost of a damage trajectory and a control.
pub fn cost(problem: &Problem, traj: &Trajectory, b: &ControlVector, cfg: &ControlConfig) -> Result<f64> {
    let grid = problem.grid();
    let n = grid.n_nodes();
    if traj.chi.first().map(Vec::len) != Some(n) || cfg.chi_t.len() != n || cfg.chi_q.iter().any(|q| q.len() != n) {
        return Err(Error::DimensionMismatch {
            what: "trajectory, targets and grid",
            expected: n,
            got: cfg.chi_t.len(),
        });
    }
    let m = traj.completed_steps();
    if cfg.chi_q.len() != 1 && cfg.chi_q.len() != m + 1 {
        return Err(Error::DimensionMismatch {
            what: "space-time target levels",
            expected: m + 1,
            got: cfg.chi_q.len(),
        });
    }
    let target = |k: usize| if cfg.chi_q.len() == 1 { &cfg.chi_q[0] } else { &cfg.chi_q[k] };
    let mut space_time = 0.0f64;
    let terminal;
    match cfg.tracking {
        TrackingNorm::Sup => {
            for k in 1..=m {
                for (x, q) in traj.chi[k].iter().zip(target(k)) {
                    space_time = space_time.max((x - q).abs());
                }
            }
            terminal = traj.chi[m].iter().zip(&cfg.chi_t).fold(0.0f64, |a, (x, q)| a.max((x - q).abs()));
        }
        TrackingNorm::L2 => {
            for k in 1..=m {
                let d: Vec<f64> = traj.chi[k].iter().zip(target(k)).map(|(x, q)| x - q).collect();
                space_time += traj.tau * problem.disc.l2_norm(&d).powi(2);
            }
            let d: Vec<f64> = traj.chi[m].iter().zip(&cfg.chi_t).map(|(x, q)| x - q).collect();
            terminal = problem.disc.l2_norm(&d).powi(2);
        }
    }
    Ok(0.5 * cfg.lambda_q * space_time
        + 0.5 * cfg.lambda_omega * terminal
        + 0.5 * cfg.lambda_sigma * b.basis.l2_sigma_sq(&b.coeffs))
}

/// `J + (w / 2) |b - anchor|^2_{L2(Sigma)}`.
pub fn adapted_cost(problem: &Problem, traj: &Trajectory, b: &ControlVector, cfg: &ControlConfig) -> Result<f64> {
    let anchor = cfg.anchor.as_ref().ok_or_else(|| Error::invalid("adapted cost needs an anchor"))?;
    Ok(cost(problem, traj, b, cfg)? + proximal_term(b, anchor, cfg.proximal_weight))
}

fn proximal_term(b: &ControlVector, anchor: &[f64], weight: f64) -> f64 {
    let d: Vec<f64> = b.coeffs.iter().zip(anchor).map(|(x, a)| x - a).collect();
    0.5 * weight * b.basis.l2_sigma_sq(&d)
}

/// Base forcing plus the control traction.
pub struct ControlLoading<'a> {
    pub base: &'a dyn Loading,
    pub basis: &'a ControlBasis,
    pub coeffs: &'a [f64],
}

impl Loading for ControlLoading<'_> {
    fn traction(&self, grid: &Grid, k: usize, t: f64) -> BoundaryTraction {
        let mut b = self.base.traction(grid, k, t);
        b.axpy(1.0, &self.basis.traction(self.coeffs, t));
        b
    }

    fn body(&self, grid: &Grid, k: usize, t: f64) -> Option<Vec<f64>> {
        self.base.body(grid, k, t)
    }
}

/// Forward run with the control traction at a given `beta`.
pub fn solve_state(problem: &Problem, b: &ControlVector, beta: f64) -> Result<Trajectory> {
    let step = problem.step.with_penalty(Penalty::new(beta, problem.step.penalty.kind())?);
    let loading = ControlLoading { base: &problem.forcing, basis: &b.basis, coeffs: &b.coeffs };
    problem.run_with(&step, &loading).map_err(|e| Error::Control { coeffs: b.coeffs.clone(), source: Box::new(e) })
}

/// `j(b) = J(S_beta(b), b)` together with the state.
pub fn reduced_cost(problem: &Problem, b: &ControlVector, beta: f64, cfg: &ControlConfig) -> Result<(f64, Trajectory)> {
    let traj = solve_state(problem, b, beta)?;
    let j = cost(problem, &traj, b, cfg)?;
    Ok((j, traj))
}

#[derive(Debug, Clone, PartialEq)]
pub struct LandscapePoint {
    pub coeffs: Vec<f64>,
    pub value: f64,
}

#[derive(Debug, Clone)]
pub struct OptimizeResult {
    pub coeffs: Vec<f64>,
    pub value: f64,
    pub evals: usize,
    /// Stationary at the final poll step (false when the budget ran out).
    pub converged: bool,
    pub final_step: f64,
    /// Every distinct evaluation in order.
    pub landscape: Vec<LandscapePoint>,
}

type CostFn<'a> = Box<dyn Fn(&[f64]) -> Result<f64> + Sync + 'a>;

/// Memoized objective over admissible coefficients.
struct Objective<'a> {
    eval: CostFn<'a>,
    cache: Mutex<HashMap<Vec<u64>, f64>>,
    landscape: Mutex<Vec<LandscapePoint>>,
}

impl<'a> Objective<'a> {
    fn new(eval: impl Fn(&[f64]) -> Result<f64> + Sync + 'a) -> Self {
        Objective { eval: Box::new(eval), cache: Mutex::new(HashMap::new()), landscape: Mutex::new(Vec::new()) }
    }

    fn key(c: &[f64]) -> Vec<u64> {
        c.iter().map(|x| (x + 0.0).to_bits()).collect()
    }

    fn lookup(&self, c: &[f64]) -> Option<f64> {
        self.cache.lock().expect("cache lock").get(&Self::key(c)).copied()
    }

    fn evals(&self) -> usize {
        self.landscape.lock().expect("landscape lock").len()
    }

    /// Evaluate a batch in parallel; results are recorded in batch order so
    /// the landscape does not depend on the worker count.
    fn batch(&self, exec: Execution, points: &[Vec<f64>]) -> Result<Vec<f64>> {
        let mut fresh: Vec<Vec<f64>> = Vec::new();
        for p in points {
            if self.lookup(p).is_none() && !fresh.contains(p) {
                fresh.push(p.clone());
            }
        }
        let values = par::map(exec, &fresh, |p| (self.eval)(p));
        {
            let mut cache = self.cache.lock().expect("cache lock");
            let mut land = self.landscape.lock().expect("landscape lock");
            for (p, v) in fresh.iter().zip(values) {
                let v = v?;
                cache.insert(Self::key(p), v);
                land.push(LandscapePoint { coeffs: p.clone(), value: v });
            }
        }
        Ok(points.iter().map(|p| self.lookup(p).expect("evaluated")).collect())
    }
}

fn project_coeffs(template: &ControlVector, c: Vec<f64>) -> Vec<f64> {
    project_admissible(&template.with_coeffs(c)).coeffs
}

/// Pattern search: poll `x + step d` (projected) over the coordinate
/// directions `+-e_i` and the diagonals `+-e_i +- e_j`. If none improves,
/// poll the same set under a seeded random rotation before halving the
/// step; the rotated polls let the search leave oblique valleys through
/// kinks of the sup-norm cost. Moves go to the best strict improvement.
fn pattern_search(
    obj: &Objective,
    template: &ControlVector,
    start: Vec<f64>,
    settings: &OptimizerSettings,
    rng: &mut ChaCha8Rng,
    exec: Execution,
) -> Result<(Vec<f64>, f64, bool, f64)> {
    let mut x = project_coeffs(template, start);
    let mut fx = obj.batch(exec, std::slice::from_ref(&x))?[0];
    let mut step = settings.initial_step;
    let directions = poll_directions(x.len());
    while step >= settings.step_tolerance {
        let mut moved = false;
        for rotated in [false, true] {
            if obj.evals() >= settings.max_evals {
                return Ok((x, fx, false, step));
            }
            let dirs = if rotated { rotate(&directions, &random_rotation(x.len(), rng)) } else { directions.clone() };
            let mut polls: Vec<Vec<f64>> = Vec::new();
            for d in &dirs {
                let y: Vec<f64> = x.iter().zip(d).map(|(a, b)| a + step * b).collect();
                let y = project_coeffs(template, y);
                if y != x && !polls.contains(&y) {
                    polls.push(y);
                }
            }
            let values = obj.batch(exec, &polls)?;
            let best = values.iter().enumerate().fold(None, |acc: Option<(usize, f64)>, (i, &v)| match acc {
                Some((_, bv)) if bv <= v => acc,
                _ => Some((i, v)),
            });
            if let Some((i, v)) = best.filter(|&(_, v)| v < fx) {
                x = polls[i].clone();
                fx = v;
                moved = true;
                break;
            }
        }
        if !moved {
            step *= 0.5;
        }
    }
    Ok((x, fx, true, step))
}

/// Orthogonal matrix from Gram-Schmidt on uniform random columns.
fn random_rotation(n: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut q: Vec<Vec<f64>> = Vec::with_capacity(n);
    while q.len() < n {
        let mut v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        for b in &q {
            let d: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= d * y);
        }
        let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if nv > 1e-3 {
            q.push(v.into_iter().map(|x| x / nv).collect());
        }
    }
    q
}

fn rotate(dirs: &[Vec<f64>], q: &[Vec<f64>]) -> Vec<Vec<f64>> {
    dirs.iter().map(|d| (0..d.len()).map(|i| q.iter().zip(d).map(|(col, dj)| col[i] * dj).sum()).collect()).collect()
}

fn poll_directions(n: usize) -> Vec<Vec<f64>> {
    let mut dirs = Vec::new();
    for i in 0..n {
        for sign in [1.0, -1.0] {
            let mut d = vec![0.0; n];
            d[i] = sign;
            dirs.push(d);
        }
    }
    for i in 0..n {
        for j in i + 1..n {
            for (si, sj) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
                let mut d = vec![0.0; n];
                d[i] = si;
                d[j] = sj;
                dirs.push(d);
            }
        }
    }
    dirs
}

/// Projected gradient descent with central differences and backtracking.
fn projected_gradient(
    obj: &Objective,
    template: &ControlVector,
    start: Vec<f64>,
    settings: &OptimizerSettings,
    exec: Execution,
) -> Result<(Vec<f64>, f64, bool, f64)> {
    let mut x = project_coeffs(template, start);
    let mut fx = obj.batch(exec, std::slice::from_ref(&x))?[0];
    let mut step = settings.initial_step;
    let h = settings.fd_step;
    loop {
        if obj.evals() >= settings.max_evals {
            return Ok((x, fx, false, step));
        }
        let mut probes = Vec::with_capacity(2 * x.len());
        for i in 0..x.len() {
            for sign in [1.0, -1.0] {
                let mut y = x.clone();
                y[i] += sign * h;
                probes.push(y);
            }
        }
        let v = obj.batch(exec, &probes)?;
        let g: Vec<f64> = (0..x.len()).map(|i| (v[2 * i] - v[2 * i + 1]) / (2.0 * h)).collect();
        let gn = g.iter().map(|a| a * a).sum::<f64>().sqrt();
        if gn == 0.0 {
            return Ok((x, fx, true, step));
        }
        let mut moved = false;
        while step >= settings.step_tolerance {
            let y: Vec<f64> = x.iter().zip(&g).map(|(a, b)| a - step * b / gn).collect();
            let y = project_coeffs(template, y);
            if y == x {
                break;
            }
            let fy = obj.batch(exec, std::slice::from_ref(&y))?[0];
            if fy < fx {
                x = y;
                fx = fy;
                moved = true;
                break;
            }
            step *= 0.5;
        }
        if !moved {
            return Ok((x, fx, true, step));
        }
    }
}

fn optimize(
    obj: &Objective,
    template: &ControlVector,
    guess: &[f64],
    settings: &OptimizerSettings,
    restarts: usize,
    exec: Execution,
) -> Result<OptimizeResult> {
    let mut starts = vec![guess.to_vec()];
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    for _ in 0..restarts {
        starts.push(template.bounds.iter().map(|b| rng.random_range(b[0]..=b[1])).collect());
    }
    let mut best: Option<(Vec<f64>, f64, bool, f64)> = None;
    for s in starts {
        let r = match settings.method {
            OptimizerMethod::PatternSearch => pattern_search(obj, template, s, settings, &mut rng, exec)?,
            OptimizerMethod::ProjectedGradient => projected_gradient(obj, template, s, settings, exec)?,
        };
        if best.as_ref().is_none_or(|b| r.1 < b.1) {
            best = Some(r);
        }
        if obj.evals() >= settings.max_evals {
            break;
        }
    }
    let (coeffs, value, converged, final_step) = best.expect("at least one start");
    let landscape = obj.landscape.lock().expect("landscape lock").clone();
    Ok(OptimizeResult { coeffs, value, evals: landscape.len(), converged, final_step, landscape })
}

/// Minimize the reduced cost over admissible controls at one `beta`, from
/// `guess` plus the configured seeded restarts.
pub fn solve_p_beta(
    problem: &Problem,
    beta: f64,
    cfg: &ControlConfig,
    guess: &ControlVector,
    exec: Execution,
) -> Result<OptimizeResult> {
    solve_p_beta_with_restarts(problem, beta, cfg, guess, cfg.optimizer.restarts, exec)
}

fn solve_p_beta_with_restarts(
    problem: &Problem,
    beta: f64,
    cfg: &ControlConfig,
    guess: &ControlVector,
    restarts: usize,
    exec: Execution,
) -> Result<OptimizeResult> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::invalid("beta must lie in (0, 1)"));
    }
    cfg.validate(problem.grid())?;
    let obj = Objective::new(|c: &[f64]| reduced_cost(problem, &guess.with_coeffs(c.to_vec()), beta, cfg).map(|r| r.0));
    optimize(&obj, guess, &guess.coeffs, &cfg.optimizer, restarts, exec)
}

#[derive(Debug, Clone)]
pub struct AdaptedResult {
    pub result: OptimizeResult,
    pub anchor: Vec<f64>,
    /// Norm surrogate of `b - anchor`.
    pub distance_to_anchor: f64,
    /// Adapted cost at the anchor.
    pub anchor_value: f64,
}

/// Minimize the adapted cost starting from the anchor (no restarts: the
/// adapted problem is local around its anchor).
pub fn solve_adapted(
    problem: &Problem,
    beta: f64,
    cfg: &ControlConfig,
    template: &ControlVector,
    exec: Execution,
) -> Result<AdaptedResult> {
    let anchor = cfg.anchor.clone().ok_or_else(|| Error::invalid("adapted problem needs an anchor"))?;
    adapted_from(problem, beta, cfg, template, &anchor, exec)
}

fn checked_anchor(cfg: &ControlConfig, template: &ControlVector) -> Result<Vec<f64>> {
    let anchor = cfg.anchor.clone().ok_or_else(|| Error::invalid("adapted problem needs an anchor"))?;
    if anchor.len() != template.basis.len() || !template.with_coeffs(anchor.clone()).is_admissible() {
        return Err(Error::invalid("anchor must be an admissible control"));
    }
    Ok(anchor)
}

fn adapted_from(
    problem: &Problem,
    beta: f64,
    cfg: &ControlConfig,
    template: &ControlVector,
    start: &[f64],
    exec: Execution,
) -> Result<AdaptedResult> {
    let anchor = checked_anchor(cfg, template)?;
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::invalid("beta must lie in (0, 1)"));
    }
    cfg.validate(problem.grid())?;
    let obj = Objective::new(|c: &[f64]| {
        let b = template.with_coeffs(c.to_vec());
        let (j, _) = reduced_cost(problem, &b, beta, cfg)?;
        Ok(j + proximal_term(&b, &anchor, cfg.proximal_weight))
    });
    let result = optimize(&obj, template, start, &cfg.optimizer, 0, exec)?;
    let anchor_value = match obj.lookup(&anchor) {
        Some(v) => v,
        None => obj.batch(exec, std::slice::from_ref(&anchor))?[0],
    };
    drop(obj);
    let d: Vec<f64> = result.coeffs.iter().zip(&anchor).map(|(a, b)| a - b).collect();
    let distance_to_anchor = template.basis.control_norm(&d);
    Ok(AdaptedResult { result, anchor, distance_to_anchor, anchor_value })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContinuationLevel {
    pub beta: f64,
    pub value: f64,
    pub coeffs: Vec<f64>,
    pub norm: f64,
    /// Norm surrogate of the change from the previous level (0 at the first).
    pub step_from_previous: f64,
    pub evals: usize,
    pub converged: bool,
    /// Adapted runs: norm surrogate of the distance to the anchor.
    pub distance_to_anchor: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct ContinuationReport {
    pub levels: Vec<ContinuationLevel>,
    pub adapted: Option<AdaptedResult>,
    pub failure: Option<String>,
}

impl ContinuationReport {
    /// `|j*(beta_{i+1}) - j*(beta_i)|`.
    pub fn value_differences(&self) -> Vec<f64> {
        self.levels.windows(2).map(|w| (w[1].value - w[0].value).abs()).collect()
    }

    pub fn differences_decreasing(&self) -> bool {
        self.value_differences().windows(2).all(|w| w[1] < w[0])
    }

    /// No failure, decreasing value differences, and for adapted runs a
    /// final control within `step_tolerance` of the anchor that does not
    /// cost more than the anchor.
    pub fn passed(&self, step_tolerance: f64) -> bool {
        let adapted_ok = self
            .adapted
            .as_ref()
            .is_none_or(|a| a.distance_to_anchor <= step_tolerance && a.result.value <= a.anchor_value);
        let anchored_ok = self.levels.last().and_then(|l| l.distance_to_anchor).is_none_or(|d| d <= step_tolerance);
        self.failure.is_none() && self.differences_decreasing() && adapted_ok && anchored_ok
    }
}

/// Solve along the decreasing schedule, warm-starting each level from the
/// previous minimizer (restarts only at the first level); optionally finish
/// with the adapted problem anchored at the last minimizer.
pub fn beta_continuation(
    problem: &Problem,
    cfg: &ControlConfig,
    guess: &ControlVector,
    adapted: bool,
    exec: Execution,
) -> Result<ContinuationReport> {
    cfg.validate(problem.grid())?;
    if cfg.beta_schedule.is_empty() {
        return Err(Error::invalid("beta schedule is empty"));
    }
    let mut levels: Vec<ContinuationLevel> = Vec::new();
    let mut current = guess.clone();
    for (i, &beta) in cfg.beta_schedule.iter().enumerate() {
        let restarts = if i == 0 { cfg.optimizer.restarts } else { 0 };
        match solve_p_beta_with_restarts(problem, beta, cfg, &current, restarts, exec) {
            Ok(r) => {
                let d: Vec<f64> = r.coeffs.iter().zip(&current.coeffs).map(|(a, b)| a - b).collect();
                let step_from_previous = if i == 0 { 0.0 } else { current.basis.control_norm(&d) };
                current = current.with_coeffs(r.coeffs.clone());
                levels.push(ContinuationLevel {
                    beta,
                    value: r.value,
                    norm: current.norm(),
                    coeffs: r.coeffs,
                    step_from_previous,
                    evals: r.evals,
                    converged: r.converged,
                    distance_to_anchor: None,
                });
            }
            Err(e) => {
                return Ok(ContinuationReport { levels, adapted: None, failure: Some(format!("beta {beta}: {e}")) })
            }
        }
    }
    let adapted = if adapted {
        let beta = *cfg.beta_schedule.last().expect("nonempty");
        let acfg = ControlConfig { anchor: Some(current.coeffs.clone()), ..cfg.clone() };
        match solve_adapted(problem, beta, &acfg, &current, exec) {
            Ok(a) => Some(a),
            Err(e) => return Ok(ContinuationReport { levels, adapted: None, failure: Some(format!("adapted: {e}")) }),
        }
    } else {
        None
    };
    Ok(ContinuationReport { levels, adapted, failure: None })
}

/// Two-coefficient 1D benchmark on [`control_1d`](crate::problem::control_1d):
/// tensile tractions of amplitude 10 at both ends, constant in time, with
/// box `[0, 2]` per coefficient and control cost weight `lambda_sigma`. Both
/// targets are taken from the damage trajectory that the coefficients
/// [`CONTROL_1D_REFERENCE`] produce at `beta`, with unit weights on the
/// space-time and terminal terms.
pub const CONTROL_1D_REFERENCE: [f64; 2] = [0.8, 1.2];

pub fn control_1d_setup(cells: usize, beta: f64, lambda_sigma: f64) -> Result<(Problem, ControlVector, ControlConfig)> {
    let problem = crate::problem::control_1d(cells, beta)?;
    let modes = vec![
        ControlMode { side: Side::Left, direction: [-10.0, 0.0], shape: SpatialShape::Uniform },
        ControlMode { side: Side::Right, direction: [10.0, 0.0], shape: SpatialShape::Uniform },
    ];
    let basis = Arc::new(ControlBasis::new(problem.grid(), &problem.step, modes, vec![0.0])?);
    let guess = ControlVector::new(basis, vec![0.0; 2], vec![[0.0, 2.0]; 2], 100.0)?;
    let reference = solve_state(&problem, &guess.with_coeffs(CONTROL_1D_REFERENCE.to_vec()), beta)?;
    let cfg = ControlConfig {
        lambda_q: 1.0,
        lambda_omega: 1.0,
        lambda_sigma,
        chi_q: reference.chi.clone(),
        chi_t: reference.chi_final().to_vec(),
        tracking: TrackingNorm::Sup,
        beta_schedule: vec![1e-1, 1e-2, 1e-3, 1e-4],
        optimizer: OptimizerSettings::default(),
        anchor: None,
        proximal_weight: 1.0,
    };
    Ok((problem, guess, cfg))
}

/// Adapted problem along the schedule with the configured anchor, starting
/// at the anchor and warm-starting each level from the previous one.
pub fn adapted_continuation(
    problem: &Problem,
    cfg: &ControlConfig,
    template: &ControlVector,
    exec: Execution,
) -> Result<ContinuationReport> {
    cfg.validate(problem.grid())?;
    let anchor = checked_anchor(cfg, template)?;
    if cfg.beta_schedule.is_empty() {
        return Err(Error::invalid("beta schedule is empty"));
    }
    let mut levels: Vec<ContinuationLevel> = Vec::new();
    let mut current = anchor;
    for (i, &beta) in cfg.beta_schedule.iter().enumerate() {
        match adapted_from(problem, beta, cfg, template, &current, exec) {
            Ok(a) => {
                let d: Vec<f64> = a.result.coeffs.iter().zip(&current).map(|(x, y)| x - y).collect();
                levels.push(ContinuationLevel {
                    beta,
                    value: a.result.value,
                    norm: template.basis.control_norm(&a.result.coeffs),
                    coeffs: a.result.coeffs.clone(),
                    step_from_previous: if i == 0 { 0.0 } else { template.basis.control_norm(&d) },
                    evals: a.result.evals,
                    converged: a.result.converged,
                    distance_to_anchor: Some(a.distance_to_anchor),
                });
                current = a.result.coeffs;
            }
            Err(e) => {
                return Ok(ContinuationReport { levels, adapted: None, failure: Some(format!("beta {beta}: {e}")) })
            }
        }
    }
    Ok(ContinuationReport { levels, adapted: None, failure: None })
}
