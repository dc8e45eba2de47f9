//! TOML run configuration: schema, defaults, validation and the builders that
//! turn a parsed file into a [`Problem`] and the verification and control
//! settings. The schema is documented in `docs/CONFIG.md`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::control::{
    solve_state, ControlBasis, ControlConfig, ControlMode, ControlVector, OptimizerSettings, TrackingNorm,
};
use crate::error::{Error, Result};
use crate::forcing::Forcing;
use crate::grid::Grid;
use crate::linsolve::LinearSolverSettings;
use crate::material::{extend_coefficient, MaterialLaw, Penalty, PenaltyKind, StiffnessTensor};
use crate::par::Execution;
use crate::piecewise::{PiecewisePoly, Poly};
use crate::problem::{DamageProfile, Problem};
use crate::stepper::{Discretization, InitialData, StepConfig};
use crate::verify::PerturbationSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub geometry: GeometryConfig,
    pub material: MaterialConfig,
    pub time: TimeConfig,
    pub initial: InitialConfig,
    #[serde(default)]
    pub forcing: Forcing,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verify: Option<VerifyConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub control: Option<ControlSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    pub dim: usize,
    pub extents: Vec<f64>,
    pub cells: Vec<usize>,
}

/// `c~` on `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CoefficientLaw {
    /// `x^2`.
    Quadratic,
    /// `1`.
    Constant,
    /// `3 x^2 - 2 x^3`.
    Smoothstep,
    /// Polynomial pieces on `[breaks[i], breaks[i+1]]`, coefficients in powers
    /// of `x - breaks[i]`; `breaks` must run from 0 to 1.
    Custom { breaks: Vec<f64>, pieces: Vec<Vec<f64>> },
}

impl CoefficientLaw {
    pub fn c_tilde(&self) -> Result<PiecewisePoly> {
        let single = |c: Vec<f64>| PiecewisePoly::from_interval_pieces(vec![0.0, 1.0], vec![Poly::new(c)]);
        match self {
            CoefficientLaw::Quadratic => single(vec![0.0, 0.0, 1.0]),
            CoefficientLaw::Constant => single(vec![1.0]),
            CoefficientLaw::Smoothstep => single(vec![0.0, 0.0, 3.0, -2.0]),
            CoefficientLaw::Custom { breaks, pieces } => {
                if breaks.first() != Some(&0.0) || breaks.last() != Some(&1.0) {
                    return Err(Error::Config("custom coefficient breaks must run from 0 to 1".into()));
                }
                PiecewisePoly::from_interval_pieces(breaks.clone(), pieces.iter().cloned().map(Poly::new).collect())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialLaw {
    /// `stiffness / 2 (x - center)^2`.
    QuadraticWell {
        stiffness: f64,
        center: f64,
    },
    Zero,
}

impl PotentialLaw {
    pub fn poly(&self) -> PiecewisePoly {
        match *self {
            PotentialLaw::QuadraticWell { stiffness, center } => crate::material::quadratic_well(stiffness, center),
            PotentialLaw::Zero => PiecewisePoly::constant(0.0),
        }
    }
}

/// Viscosity profile `d(chi)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DampingLaw {
    Constant {
        value: f64,
    },
    /// Linear from `at_zero` to `at_one` on `[0, 1]`, constant outside.
    Ramp {
        at_zero: f64,
        at_one: f64,
    },
}

impl DampingLaw {
    pub fn poly(&self) -> Result<PiecewisePoly> {
        match *self {
            DampingLaw::Constant { value } => Ok(PiecewisePoly::constant(value)),
            DampingLaw::Ramp { at_zero, at_one } => PiecewisePoly::from_pieces(
                vec![0.0, 1.0],
                vec![Poly::new(vec![at_zero]), Poly::new(vec![at_zero, at_one - at_zero]), Poly::new(vec![at_one])],
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StiffnessConfig {
    Isotropic {
        lambda: f64,
        lame_mu: f64,
    },
    /// All `dim^4` entries `C_ijkl`, row-major.
    Explicit {
        entries: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialConfig {
    pub c_tilde: CoefficientLaw,
    /// Width of the ramp above 1 in the extension.
    pub delta: f64,
    pub potential: PotentialLaw,
    #[serde(default = "unit_damping")]
    pub damping: DampingLaw,
    pub stiffness: StiffnessConfig,
    /// Viscosity ratio `mu`.
    pub viscosity: f64,
}

fn unit_damping() -> DampingLaw {
    DampingLaw::Constant { value: 1.0 }
}

impl MaterialConfig {
    pub fn build(&self, dim: usize) -> Result<MaterialLaw> {
        let split = extend_coefficient(&self.c_tilde.c_tilde()?, self.delta)?;
        let stiffness = match &self.stiffness {
            StiffnessConfig::Isotropic { lambda, lame_mu } => StiffnessTensor::isotropic(dim, *lambda, *lame_mu)?,
            StiffnessConfig::Explicit { entries } => StiffnessTensor::explicit(dim, entries.clone())?,
        };
        MaterialLaw::from_split(&split, self.damping.poly()?, self.potential.poly(), stiffness, self.viscosity)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    pub t_end: f64,
    pub tau: f64,
    pub beta: f64,
    #[serde(default = "moreau_yosida")]
    pub penalty: PenaltyKind,
    #[serde(default = "newton_tol")]
    pub newton_tol: f64,
    #[serde(default = "newton_max_iter")]
    pub newton_max_iter: usize,
    #[serde(default)]
    pub linear: LinearSolverSettings,
}

fn moreau_yosida() -> PenaltyKind {
    PenaltyKind::MoreauYosida
}
fn newton_tol() -> f64 {
    1e-10
}
fn newton_max_iter() -> usize {
    50
}

/// Initial displacement, node-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DisplacementProfile {
    Zero,
    /// `u_x = slope / 2 (x - from)_+^2`, i.e. a strain `slope (x - from)`
    /// beyond `from`.
    Prestrain {
        slope: f64,
        from: f64,
    },
}

impl DisplacementProfile {
    pub fn sample(&self, grid: &Grid) -> Vec<f64> {
        match *self {
            DisplacementProfile::Zero => vec![0.0; grid.n_vector_dofs()],
            DisplacementProfile::Prestrain { slope, from } => grid.sample_vector(|p| {
                let s = (p[0] - from).max(0.0);
                [0.5 * slope * s * s, 0.0]
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialConfig {
    pub damage: DamageProfile,
    #[serde(default = "zero_displacement")]
    pub displacement: DisplacementProfile,
    #[serde(default = "zero_displacement")]
    pub velocity: DisplacementProfile,
}

fn zero_displacement() -> DisplacementProfile {
    DisplacementProfile::Zero
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    /// Keep displacement snapshots every `snapshot_every` steps.
    pub snapshot_every: usize,
    /// Write field snapshot files at the stored levels.
    pub write_snapshots: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { snapshot_every: 1, write_snapshots: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    pub betas: Vec<f64>,
    pub taus: Vec<f64>,
    pub tau_reference: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub perturbation: Option<PerturbationSpec>,
    /// Random homogeneous instances for the oracle comparison.
    pub oracle_samples: usize,
    pub seed: u64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            betas: vec![1e-1, 1e-2, 1e-3, 1e-4],
            taus: vec![0.1, 0.05, 0.025],
            tau_reference: 0.00125,
            perturbation: None,
            oracle_samples: 100,
            seed: 0,
        }
    }
}

/// Where a damage target comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TargetSpec {
    /// A fixed nodal profile (constant in time for the space-time target).
    Profile { profile: DamageProfile },
    /// The damage produced by the given control coefficients at the run's
    /// `beta` (every level for the space-time target, the last for the
    /// terminal one).
    Reference { coeffs: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlSection {
    pub modes: Vec<ControlMode>,
    pub knots: Vec<f64>,
    /// One `[min, max]` per coefficient, each containing 0.
    pub bounds: Vec<[f64; 2]>,
    pub norm_cap: f64,
    #[serde(default)]
    pub initial: Vec<f64>,
    pub lambda_q: f64,
    pub lambda_omega: f64,
    pub lambda_sigma: f64,
    pub target_q: TargetSpec,
    pub target_t: TargetSpec,
    #[serde(default)]
    pub tracking: TrackingNorm,
    pub beta_schedule: Vec<f64>,
    #[serde(default)]
    pub optimizer: OptimizerSettings,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anchor: Option<Vec<f64>>,
    #[serde(default = "unit")]
    pub proximal_weight: f64,
}

fn unit() -> f64 {
    1.0
}

/// Byte offset to 1-based `(line, column)`.
fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rfind('\n').map_or(before.len(), |p| before.len() - p - 1) + 1;
    (line, col)
}

/// Line of the `[name]` table header, if present.
fn section_line(text: &str, name: &str) -> Option<usize> {
    let header = format!("[{name}]");
    text.lines().position(|l| l.trim() == header).map(|i| i + 1)
}

impl RunConfig {
    /// Parse and validate; errors carry `line:column` of the offending entry.
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| {
            let at = e.span().map(|s| line_col(text, s.start));
            match at {
                Some((l, c)) => Error::Config(format!("line {l}, column {c}: {}", e.message())),
                None => Error::Config(e.message().to_string()),
            }
        })?;
        cfg.validate().map_err(|e| match e {
            Error::Config(msg) => {
                let section = msg.split(':').next().unwrap_or("");
                match section_line(text, section) {
                    Some(l) => Error::Config(format!("line {l}: {msg}")),
                    None => Error::Config(msg),
                }
            }
            other => other,
        })?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(format!("cannot serialize config: {e}")))
    }

    /// Semantic checks; messages start with the section name.
    pub fn validate(&self) -> Result<()> {
        let g = &self.geometry;
        let cfg_err = |section: &str, msg: String| Error::Config(format!("{section}: {msg}"));
        if !(g.dim == 1 || g.dim == 2) || g.extents.len() != g.dim || g.cells.len() != g.dim {
            return Err(cfg_err("geometry", "dim must be 1 or 2 with one extent and cell count per axis".into()));
        }
        if g.extents.iter().any(|&e| !(e > 0.0)) || g.cells.contains(&0) {
            return Err(cfg_err("geometry", "extents and cells must be positive".into()));
        }
        let m = &self.material;
        if !(m.delta > 0.0) || !(m.viscosity > 0.0) {
            return Err(cfg_err("material", "delta and viscosity must be positive".into()));
        }
        let t = &self.time;
        if !(t.tau > 0.0) || !(t.t_end > 0.0) || t.tau > t.t_end {
            return Err(cfg_err("time", format!("need 0 < tau <= t_end, got tau = {}, t_end = {}", t.tau, t.t_end)));
        }
        if !(t.beta > 0.0 && t.beta < 1.0) {
            return Err(cfg_err("time", format!("beta must lie in (0, 1), got {}", t.beta)));
        }
        if self.output.snapshot_every == 0 {
            return Err(cfg_err("output", "snapshot_every must be at least 1".into()));
        }
        self.forcing.validate(g.dim).map_err(|e| cfg_err("forcing", e.to_string()))?;
        if let Some(v) = &self.verify {
            if v.betas.windows(2).any(|w| w[1] >= w[0]) || v.betas.iter().any(|&b| !(b > 0.0 && b < 1.0)) {
                return Err(cfg_err("verify", "betas must be strictly decreasing in (0, 1)".into()));
            }
            if v.taus.windows(2).any(|w| w[1] >= w[0]) || !(v.tau_reference > 0.0) {
                return Err(cfg_err("verify", "taus must be strictly decreasing and tau_reference positive".into()));
            }
            if let Some(p) = &v.perturbation {
                p.validate().map_err(|e| cfg_err("verify", e.to_string()))?;
            }
        }
        if let Some(c) = &self.control {
            let n = c.modes.len() * c.knots.len();
            if c.bounds.len() != n || (!c.initial.is_empty() && c.initial.len() != n) {
                return Err(cfg_err("control", format!("bounds and initial need {n} entries (modes x knots)")));
            }
            if c.beta_schedule.is_empty() || c.beta_schedule.windows(2).any(|w| w[1] >= w[0]) {
                return Err(cfg_err("control", "beta_schedule must be nonempty and strictly decreasing".into()));
            }
            c.optimizer.validate().map_err(|e| cfg_err("control", e.to_string()))?;
        }
        Ok(())
    }

    pub fn step_config(&self) -> Result<StepConfig> {
        let t = &self.time;
        let mut step = StepConfig::new(t.tau, t.t_end, Penalty::new(t.beta, t.penalty)?)?;
        step.newton_tol = t.newton_tol;
        step.newton_max_iter = t.newton_max_iter;
        step.linear = t.linear;
        step.snapshot_every = self.output.snapshot_every;
        step.validate()?;
        Ok(step)
    }

    pub fn problem(&self) -> Result<Problem> {
        self.problem_with(Execution::default())
    }

    /// As [`problem`](Self::problem), with the assembly loops run under `exec`.
    pub fn problem_with(&self, exec: Execution) -> Result<Problem> {
        let g = &self.geometry;
        let grid = Grid::new(g.dim, &g.extents, &g.cells)?.with_execution(exec);
        let material = self.material.build(g.dim)?;
        let step = self.step_config()?;
        let disc = Discretization::new(grid, material.stiffness(), &step.linear)?;
        let init = &self.initial;
        let initial = InitialData::new(
            &disc.grid,
            init.displacement.sample(&disc.grid),
            init.velocity.sample(&disc.grid),
            init.damage.sample(&disc.grid),
        )?;
        Ok(Problem { disc: Arc::new(disc), material: Arc::new(material), step, initial, forcing: self.forcing.clone() })
    }

    /// Control setup: the initial admissible control and the cost settings,
    /// with reference targets evaluated at the run's `beta`.
    pub fn control_setup(&self, problem: &Problem) -> Result<(ControlVector, ControlConfig)> {
        let c = self.control.as_ref().ok_or_else(|| Error::Config("control: section missing".into()))?;
        let basis = Arc::new(ControlBasis::new(problem.grid(), &problem.step, c.modes.clone(), c.knots.clone())?);
        let n = basis.len();
        let initial = if c.initial.is_empty() { vec![0.0; n] } else { c.initial.clone() };
        let guess = ControlVector::new(basis, initial, c.bounds.clone(), c.norm_cap)?;
        let beta = self.time.beta;
        let grid = problem.grid();
        let chi_q = match &c.target_q {
            TargetSpec::Profile { profile } => vec![profile.sample(grid)],
            TargetSpec::Reference { coeffs } => solve_state(problem, &guess.with_coeffs(coeffs.clone()), beta)?.chi,
        };
        let chi_t = match &c.target_t {
            TargetSpec::Profile { profile } => profile.sample(grid),
            TargetSpec::Reference { coeffs } => {
                solve_state(problem, &guess.with_coeffs(coeffs.clone()), beta)?.chi_final().to_vec()
            }
        };
        let cfg = ControlConfig {
            lambda_q: c.lambda_q,
            lambda_omega: c.lambda_omega,
            lambda_sigma: c.lambda_sigma,
            chi_q,
            chi_t,
            tracking: c.tracking,
            beta_schedule: c.beta_schedule.clone(),
            optimizer: c.optimizer.clone(),
            anchor: c.anchor.clone(),
            proximal_weight: c.proximal_weight,
        };
        cfg.validate(grid)?;
        Ok((guess, cfg))
    }

    /// Override every seed in the file.
    pub fn set_seed(&mut self, seed: u64) {
        if let Some(v) = &mut self.verify {
            v.seed = seed;
        }
        if let Some(c) = &mut self.control {
            c.optimizer.seed = seed;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[geometry]
dim = 1
extents = [1.0]
cells = [8]

[material]
c_tilde = { kind = "quadratic" }
delta = 1.0
potential = { kind = "zero" }
stiffness = { kind = "isotropic", lambda = 1.0, lame_mu = 1.0 }
viscosity = 1.0

[time]
t_end = 0.1
tau = 0.01
beta = 0.001

[initial]
damage = { kind = "constant", value = 0.9 }
"#;

    #[test]
    fn minimal_parses_and_round_trips() {
        let cfg = RunConfig::parse(MINIMAL).unwrap();
        let again = RunConfig::parse(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(cfg, again);
        cfg.problem().unwrap();
    }

    #[test]
    fn unknown_key_is_line_anchored() {
        let bad = MINIMAL.replace("viscosity = 1.0", "viscosity = 1.0\nbogus = 3");
        let msg = RunConfig::parse(&bad).unwrap_err().to_string();
        assert!(msg.contains("line 13, column 1"), "{msg}");
    }

    #[test]
    fn tau_above_t_end_is_rejected() {
        let bad = MINIMAL.replace("tau = 0.01", "tau = 0.5");
        let msg = RunConfig::parse(&bad).unwrap_err().to_string();
        assert!(msg.contains("tau") && msg.contains("line 14"), "{msg}");
    }
}
