//! Complete simulation setups: grid operators, material, time stepping,
//! initial data and loads, plus the reference scenarios used by the checks.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forcing::{Forcing, Loading, SpatialShape, TimeProfile, TractionTerm};
use crate::grid::{Grid, Side};
use crate::material::{extend_coefficient, quadratic_c_tilde, quadratic_well, MaterialLaw, Penalty, StiffnessTensor};
use crate::piecewise::PiecewisePoly;
use crate::stepper::{run, Discretization, InitialData, StepConfig, Trajectory};

/// Named nodal profile for the initial damage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DamageProfile {
    Constant {
        value: f64,
    },
    /// `base + amplitude cos(m pi x / Lx) cos(n pi y / Ly)`; the cosines give a
    /// vanishing normal derivative on every side.
    Cosine {
        base: f64,
        amplitude: f64,
        modes: [u32; 2],
    },
}

impl DamageProfile {
    pub fn sample(&self, grid: &Grid) -> Vec<f64> {
        match *self {
            DamageProfile::Constant { value } => vec![value; grid.n_nodes()],
            DamageProfile::Cosine { base, amplitude, modes } => {
                let ext = grid.extents().to_vec();
                let pi = std::f64::consts::PI;
                grid.sample(|p| {
                    let cx = (modes[0] as f64 * pi * p[0] / ext[0]).cos();
                    let cy = if ext.len() == 2 { (modes[1] as f64 * pi * p[1] / ext[1]).cos() } else { 1.0 };
                    base + amplitude * cx * cy
                })
            }
        }
    }
}

/// Everything needed for one forward run.
#[derive(Debug, Clone)]
pub struct Problem {
    pub disc: Arc<Discretization>,
    pub material: Arc<MaterialLaw>,
    pub step: StepConfig,
    pub initial: InitialData,
    pub forcing: Forcing,
}

impl Problem {
    pub fn grid(&self) -> &Grid {
        &self.disc.grid
    }

    pub fn run(&self) -> Result<Trajectory> {
        run(&self.disc, &self.material, &self.step, &self.initial, &self.forcing)
    }

    pub fn run_with(&self, step: &StepConfig, loading: &dyn Loading) -> Result<Trajectory> {
        run(&self.disc, &self.material, step, &self.initial, loading)
    }

    pub fn with_beta(&self, beta: f64) -> Result<Self> {
        let penalty = Penalty::new(beta, self.step.penalty.kind())?;
        Ok(Problem { step: self.step.with_penalty(penalty), ..self.clone() })
    }

    pub fn with_tau(&self, tau: f64) -> Result<Self> {
        Ok(Problem { step: self.step.with_tau(tau)?, ..self.clone() })
    }
}

/// Example-2.1 extension of `c~(x) = x^2` with ramp width 1.
pub fn quadratic_material(dim: usize, f: PiecewisePoly, mu: f64) -> Result<MaterialLaw> {
    let split = extend_coefficient(&quadratic_c_tilde(), 1.0)?;
    MaterialLaw::from_split(&split, PiecewisePoly::constant(1.0), f, StiffnessTensor::isotropic(dim, 1.0, 1.0)?, mu)
}

/// Amplitude of the compressive traction in the standard scenario.
pub const STANDARD_TRACTION: f64 = 1.0;

/// Unit square, 16 x 16 cells, `c~ = x^2` extended with `delta = 1`,
/// `f = (chi - 1)^2 / 2`, Lamé constants 1, `mu = 1`, `T = 0.5`, `tau = 0.01`,
/// initial damage `0.9 + 0.05 cos(pi x) cos(pi y)` at rest, and a compressive
/// traction `-sin(pi t / T) e_x` on the right edge.
pub fn standard_2d(beta: f64) -> Result<Problem> {
    standard_2d_with(16, 0.01, beta, STANDARD_TRACTION)
}

pub fn standard_2d_with(cells: usize, tau: f64, beta: f64, amplitude: f64) -> Result<Problem> {
    let grid = Grid::new(2, &[1.0, 1.0], &[cells, cells])?;
    let material = quadratic_material(2, quadratic_well(1.0, 1.0), 1.0)?;
    let step = StepConfig::new(tau, 0.5, Penalty::moreau_yosida(beta)?)?;
    let disc = Discretization::new(grid, material.stiffness(), &step.linear)?;
    let chi0 = DamageProfile::Cosine { base: 0.9, amplitude: 0.05, modes: [1, 1] }.sample(&disc.grid);
    let nv = disc.grid.n_vector_dofs();
    let initial = InitialData::new(&disc.grid, vec![0.0; nv], vec![0.0; nv], chi0)?;
    let forcing = Forcing {
        traction: vec![TractionTerm {
            side: Side::Right,
            direction: [-1.0, 0.0],
            amplitude,
            shape: SpatialShape::Uniform,
            profile: TimeProfile::HalfSine { duration: 0.5 },
        }],
        body: vec![],
    };
    Ok(Problem { disc: Arc::new(disc), material: Arc::new(material), step, initial, forcing })
}

/// 1D bar `[0, 1]` with `cells` elements for the control experiments:
/// quadratic material, `T = 0.2`, `tau = 0.02`, damage at rest at 0.9.
pub fn control_1d(cells: usize, beta: f64) -> Result<Problem> {
    let grid = Grid::new(1, &[1.0], &[cells])?;
    let material = quadratic_material(1, quadratic_well(1.0, 1.0), 1.0)?;
    let step = StepConfig::new(0.02, 0.2, Penalty::moreau_yosida(beta)?)?;
    let disc = Discretization::new(grid, material.stiffness(), &step.linear)?;
    let initial = InitialData::at_rest(&disc.grid, 0.9);
    Ok(Problem { disc: Arc::new(disc), material: Arc::new(material), step, initial, forcing: Forcing::none() })
}

/// Reject a problem whose damage field leaves `[lo, hi]` initially.
pub fn check_initial_range(initial: &InitialData, lo: f64, hi: f64) -> Result<()> {
    if initial.chi0.iter().any(|&x| x < lo || x > hi) {
        return Err(Error::invalid(format!("initial damage must lie in [{lo}, {hi}]")));
    }
    Ok(())
}

/// Healing-drive scenario: a `4 x 1` strip with damage at rest at 0.9, so
/// the potential pulls it up, and an initial strain `eps_11 = s (x - 3)` on
/// `x > 3` (from `u_x = s (x - 3)^2 / 2`, no loads) that damages the right
/// end. The rate gradient term couples nodes over unit length, so the left
/// end heals while the right end damages. `T = 0.2`, `tau = 0.01`; `cells`
/// is the count along the short side.
pub fn healing_drive_2d(cells: usize, beta: f64, strain_slope: f64) -> Result<Problem> {
    let grid = Grid::new(2, &[4.0, 1.0], &[4 * cells, cells])?;
    let material = quadratic_material(2, quadratic_well(1.0, 1.0), 1.0)?;
    let step = StepConfig::new(0.01, 0.2, Penalty::moreau_yosida(beta)?)?;
    let disc = Discretization::new(grid, material.stiffness(), &step.linear)?;
    let u0 = disc.grid.sample_vector(|p| {
        let s = (p[0] - 3.0).max(0.0);
        [0.5 * strain_slope * s * s, 0.0]
    });
    let nv = disc.grid.n_vector_dofs();
    let chi0 = vec![0.9; disc.grid.n_nodes()];
    let initial = InitialData::new(&disc.grid, u0, vec![0.0; nv], chi0)?;
    Ok(Problem { disc: Arc::new(disc), material: Arc::new(material), step, initial, forcing: Forcing::none() })
}
