//! Time-dependent boundary tractions and body forces.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{BoundaryTraction, Grid, Side};

/// Scalar time modulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TimeProfile {
    Constant {
        value: f64,
    },
    /// `sin(pi t / duration)` on `[0, duration]`, zero afterwards.
    HalfSine {
        duration: f64,
    },
    /// `sin(2 pi frequency t)`.
    Sine {
        frequency: f64,
    },
    /// `min(t / rise, 1)`.
    Ramp {
        rise: f64,
    },
    PiecewiseLinear {
        times: Vec<f64>,
        values: Vec<f64>,
    },
}

impl TimeProfile {
    pub fn validate(&self) -> Result<()> {
        match self {
            TimeProfile::HalfSine { duration: d } | TimeProfile::Ramp { rise: d } if !(*d > 0.0) => {
                Err(Error::invalid("time profile duration must be positive"))
            }
            TimeProfile::PiecewiseLinear { times, values } => {
                if times.is_empty() || times.len() != values.len() {
                    return Err(Error::invalid("piecewise-linear profile needs matching, nonempty times/values"));
                }
                if times.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(Error::invalid("piecewise-linear profile times must increase"));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            TimeProfile::Constant { value } => *value,
            TimeProfile::HalfSine { duration } => {
                if (0.0..=*duration).contains(&t) {
                    (std::f64::consts::PI * t / duration).sin()
                } else {
                    0.0
                }
            }
            TimeProfile::Sine { frequency } => (2.0 * std::f64::consts::PI * frequency * t).sin(),
            TimeProfile::Ramp { rise } => (t / rise).clamp(0.0, 1.0),
            TimeProfile::PiecewiseLinear { times, values } => {
                let k = times.partition_point(|&s| s <= t);
                if k == 0 {
                    values[0]
                } else if k == times.len() {
                    values[k - 1]
                } else {
                    let s = (t - times[k - 1]) / (times[k] - times[k - 1]);
                    (1.0 - s) * values[k - 1] + s * values[k]
                }
            }
        }
    }
}

/// Profile along a side in the normalized tangential coordinate `s in [0, 1]`.
/// In 1D the sides are points and every shape evaluates to 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SpatialShape {
    Uniform,
    HalfSine,
    Linear { start: f64, end: f64 },
}

impl SpatialShape {
    pub fn eval(&self, s: f64) -> f64 {
        match self {
            SpatialShape::Uniform => 1.0,
            SpatialShape::HalfSine => (std::f64::consts::PI * s).sin(),
            SpatialShape::Linear { start, end } => start + (end - start) * s,
        }
    }
}

/// Normalized coordinate of `p` along `side`.
pub fn side_coordinate(grid: &Grid, side: Side, p: [f64; 2]) -> f64 {
    if grid.dim() == 1 {
        return 0.5;
    }
    match side {
        Side::Bottom | Side::Top => p[0] / grid.extents()[0],
        Side::Left | Side::Right => p[1] / grid.extents()[1],
    }
}

/// Traction `amplitude * profile(t) * shape(s) * direction` on one side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TractionTerm {
    pub side: Side,
    pub direction: [f64; 2],
    pub amplitude: f64,
    #[serde(default = "uniform")]
    pub shape: SpatialShape,
    pub profile: TimeProfile,
}

fn uniform() -> SpatialShape {
    SpatialShape::Uniform
}

/// Spatially uniform body force `profile(t) * value`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BodyTerm {
    pub value: [f64; 2],
    pub profile: TimeProfile,
}

/// Per-step data feeding the elasticity step.
pub trait Loading: Sync {
    fn traction(&self, grid: &Grid, k: usize, t: f64) -> BoundaryTraction;
    /// Nodal body force (node-major vector field), `None` for zero.
    fn body(&self, grid: &Grid, k: usize, t: f64) -> Option<Vec<f64>>;
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Forcing {
    pub traction: Vec<TractionTerm>,
    pub body: Vec<BodyTerm>,
}

impl Forcing {
    pub fn none() -> Self {
        Forcing::default()
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        for t in &self.traction {
            t.profile.validate()?;
            if dim == 1 && !matches!(t.side, Side::Left | Side::Right) {
                return Err(Error::invalid("1D tractions act on the left or right end only"));
            }
        }
        for b in &self.body {
            b.profile.validate()?;
        }
        Ok(())
    }

    pub fn traction_at(&self, grid: &Grid, t: f64) -> BoundaryTraction {
        let terms: Vec<(f64, &TractionTerm)> =
            self.traction.iter().map(|term| (term.amplitude * term.profile.eval(t), term)).collect();
        BoundaryTraction::from_fn(grid, |side, p| {
            let mut v = [0.0; 2];
            for (a, term) in &terms {
                if term.side == side && *a != 0.0 {
                    let s = term.shape.eval(side_coordinate(grid, side, p));
                    v[0] += a * s * term.direction[0];
                    v[1] += a * s * term.direction[1];
                }
            }
            v
        })
    }

    pub fn body_at(&self, grid: &Grid, t: f64) -> Option<Vec<f64>> {
        if self.body.is_empty() {
            return None;
        }
        let mut v = [0.0; 2];
        for b in &self.body {
            let p = b.profile.eval(t);
            v[0] += p * b.value[0];
            v[1] += p * b.value[1];
        }
        Some(grid.sample_vector(|_| v))
    }
}

impl Loading for Forcing {
    fn traction(&self, grid: &Grid, _k: usize, t: f64) -> BoundaryTraction {
        self.traction_at(grid, t)
    }

    fn body(&self, grid: &Grid, _k: usize, t: f64) -> Option<Vec<f64>> {
        self.body_at(grid, t)
    }
}

/// Loading defined by closures, mostly for tests and manufactured data.
pub struct FnLoading<B, L>
where
    B: Fn(&Grid, usize, f64) -> BoundaryTraction + Sync,
    L: Fn(&Grid, usize, f64) -> Option<Vec<f64>> + Sync,
{
    pub traction: B,
    pub body: L,
}

impl<B, L> Loading for FnLoading<B, L>
where
    B: Fn(&Grid, usize, f64) -> BoundaryTraction + Sync,
    L: Fn(&Grid, usize, f64) -> Option<Vec<f64>> + Sync,
{
    fn traction(&self, grid: &Grid, k: usize, t: f64) -> BoundaryTraction {
        (self.traction)(grid, k, t)
    }

    fn body(&self, grid: &Grid, k: usize, t: f64) -> Option<Vec<f64>> {
        (self.body)(grid, k, t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_grid;

    #[test]
    fn profiles() {
        let p = TimeProfile::PiecewiseLinear { times: vec![0.0, 1.0], values: vec![0.0, 2.0] };
        assert_eq!(p.eval(0.25), 0.5);
        assert_eq!(p.eval(5.0), 2.0);
        assert_eq!(TimeProfile::HalfSine { duration: 1.0 }.eval(1.5), 0.0);
        assert!((TimeProfile::HalfSine { duration: 1.0 }.eval(0.5) - 1.0).abs() < 1e-15);
        assert!(TimeProfile::Ramp { rise: 0.0 }.validate().is_err());
    }

    #[test]
    fn traction_on_right_edge() {
        let g = build_grid(2, &[1.0, 1.0], &[4, 4]).unwrap();
        let f = Forcing {
            traction: vec![TractionTerm {
                side: Side::Right,
                direction: [-1.0, 0.0],
                amplitude: 2.0,
                shape: SpatialShape::Uniform,
                profile: TimeProfile::Constant { value: 1.0 },
            }],
            body: vec![],
        };
        let b = f.traction_at(&g, 0.3);
        let r = b.resultant(&g);
        assert!((r[0] + 2.0).abs() < 1e-14 && r[1] == 0.0);
    }
}
