//! Stored time levels with piecewise constant and linear interpolants.

use super::{EnergyRecord, State};
use crate::error::{Error, Result};

/// Interpolants of a level sequence `h^0, ..., h^M` on the uniform time grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Interpolation {
    /// `h^k` on `((k-1) tau, k tau]`.
    ConstantUpper,
    /// `h^{k-1}` on `((k-1) tau, k tau]`.
    ConstantLower,
    /// Linear between `h^{k-1}` and `h^k` on `[(k-1) tau, k tau]`.
    Linear,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub tau: f64,
    pub n_steps: usize,
    /// `chi^k`, every level.
    pub chi: Vec<Vec<f64>>,
    /// `xi^k` (zero at level 0).
    pub xi: Vec<Vec<f64>>,
    /// `u^k` where stored (every `snapshot_every`-th level and the last).
    pub u: Vec<Option<Vec<f64>>>,
    /// `u^{-1} = u^0 - tau v^0`.
    pub u_minus1: Vec<f64>,
    pub records: Vec<EnergyRecord>,
    pub snapshot_every: usize,
    pub final_state: State,
    pub failure: Option<String>,
}

impl Trajectory {
    pub(crate) fn start(state: &State, record: EnergyRecord, snapshot_every: usize, steps: usize) -> Self {
        Trajectory {
            tau: state.tau,
            n_steps: steps,
            chi: vec![state.chi.clone()],
            xi: vec![state.xi.clone()],
            u: vec![Some(state.u.clone())],
            u_minus1: state.u_prev.clone(),
            records: vec![record],
            snapshot_every,
            final_state: state.clone(),
            failure: None,
        }
    }

    pub(crate) fn push(&mut self, state: &State, record: EnergyRecord, steps: usize) {
        self.chi.push(state.chi.clone());
        self.xi.push(state.xi.clone());
        let keep = state.k.is_multiple_of(self.snapshot_every) || state.k == steps;
        self.u.push(keep.then(|| state.u.clone()));
        // the previous level is needed for the final velocity
        if state.k >= 1 && self.u[state.k - 1].is_none() && state.k == steps {
            self.u[state.k - 1] = Some(state.u_prev.clone());
        }
        self.records.push(record);
        self.final_state = state.clone();
    }

    pub(crate) fn mark_failed(&mut self, msg: String) {
        self.failure = Some(msg);
    }

    pub(crate) fn finish(&mut self, state: State) {
        self.final_state = state;
    }

    /// Number of completed levels beyond the initial one.
    pub fn completed_steps(&self) -> usize {
        self.chi.len() - 1
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.tau
    }

    pub fn chi_final(&self) -> &[f64] {
        self.chi.last().expect("trajectory holds level 0")
    }

    pub fn u_final(&self) -> &[f64] {
        &self.final_state.u
    }

    pub fn u_level(&self, k: usize) -> Result<&[f64]> {
        self.u
            .get(k)
            .and_then(|u| u.as_deref())
            .ok_or_else(|| Error::invalid(format!("displacement level {k} was not stored")))
    }

    /// `v^k = (u^k - u^{k-1}) / tau`.
    pub fn v_level(&self, k: usize) -> Result<Vec<f64>> {
        let u = self.u_level(k)?;
        let up = if k == 0 { &self.u_minus1[..] } else { self.u_level(k - 1)? };
        Ok(u.iter().zip(up).map(|(a, b)| (a - b) / self.tau).collect())
    }

    /// `(chi^k - chi^{k-1}) / tau` for `k >= 1`.
    pub fn chi_rate(&self, k: usize) -> Vec<f64> {
        self.chi[k].iter().zip(&self.chi[k - 1]).map(|(a, b)| (a - b) / self.tau).collect()
    }

    /// Locate `t` in the grid: `(k, theta)` with `t = (k - 1 + theta) tau`,
    /// `k >= 1`, `theta in (0, 1]`; `t = 0` maps to `(0, 1)`.
    fn locate(&self, t: f64) -> Result<(usize, f64)> {
        let m = self.completed_steps();
        let t_end = m as f64 * self.tau;
        if !(t >= 0.0) || t > t_end * (1.0 + 1e-12) + 1e-15 {
            return Err(Error::invalid(format!("time {t} outside [0, {t_end}]")));
        }
        if t == 0.0 {
            return Ok((0, 1.0));
        }
        let s = t / self.tau;
        // snap to grid times within rounding
        let r = s.round();
        if (s - r).abs() <= 1e-12 * s.max(1.0) {
            return Ok(((r as usize).clamp(1, m), 1.0));
        }
        let k = (s.ceil() as usize).clamp(1, m);
        Ok((k, s - (k - 1) as f64))
    }

    fn interpolate(&self, levels: &dyn Fn(usize) -> Result<Vec<f64>>, t: f64, kind: Interpolation) -> Result<Vec<f64>> {
        let (k, theta) = self.locate(t)?;
        if k == 0 {
            return levels(0);
        }
        match kind {
            Interpolation::ConstantUpper => levels(k),
            Interpolation::ConstantLower => levels(k - 1),
            Interpolation::Linear => {
                if theta == 1.0 {
                    return levels(k);
                }
                let a = levels(k - 1)?;
                let b = levels(k)?;
                Ok(a.iter().zip(&b).map(|(x, y)| (1.0 - theta) * x + theta * y).collect())
            }
        }
    }

    pub fn chi_at(&self, t: f64, kind: Interpolation) -> Result<Vec<f64>> {
        self.interpolate(&|k| Ok(self.chi[k].clone()), t, kind)
    }

    pub fn u_at(&self, t: f64, kind: Interpolation) -> Result<Vec<f64>> {
        self.interpolate(&|k| self.u_level(k).map(<[f64]>::to_vec), t, kind)
    }
}
