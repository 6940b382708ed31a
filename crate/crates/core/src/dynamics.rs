//! Discrete-time integrator fleet model.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stl::{BoxTrace, Region, Trace};

/// Per-UAV point-mass model shared by the whole fleet.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct UavModel {
    /// 1: the input is a velocity; 2: the input is an acceleration.
    pub order: u8,
    pub dim: usize,
    pub dt: f64,
    /// Per-axis input bound.
    pub u_max: f64,
    /// Per-axis velocity bound (order 2 only).
    pub v_max: f64,
}

impl Default for UavModel {
    fn default() -> Self {
        Self {
            order: 1,
            dim: 3,
            dt: 0.5,
            u_max: 2.0,
            v_max: 4.0,
        }
    }
}

/// Position, and velocity for order-2 models, of every UAV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FleetState {
    pub pos: Vec<Vec<f64>>,
    pub vel: Vec<Vec<f64>>,
}

impl FleetState {
    /// Fleet at rest at the given positions.
    pub fn at_rest(pos: Vec<Vec<f64>>) -> Self {
        let vel = pos.iter().map(|p| vec![0.0; p.len()]).collect();
        Self { pos, vel }
    }

    pub fn uav_count(&self) -> usize {
        self.pos.len()
    }
}

/// Flattened input sequences; UAV `n` holds `len(n)` inputs of `dim` values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InputPlan {
    pub dim: usize,
    pub inputs: Vec<Vec<f64>>,
}

impl InputPlan {
    pub fn zeros(dim: usize, lengths: &[usize]) -> Self {
        Self {
            dim,
            inputs: lengths.iter().map(|&l| vec![0.0; l * dim]).collect(),
        }
    }

    pub fn len(&self, n: usize) -> usize {
        self.inputs[n].len() / self.dim
    }

    pub fn lengths(&self) -> Vec<usize> {
        (0..self.inputs.len()).map(|n| self.len(n)).collect()
    }

    /// Number of decision variables.
    pub fn size(&self) -> usize {
        self.inputs.iter().map(Vec::len).sum()
    }

    pub fn input(&self, n: usize, k: usize) -> &[f64] {
        &self.inputs[n][k * self.dim..(k + 1) * self.dim]
    }

    /// Drops the first `k` inputs of every UAV.
    pub fn shifted(&self, k: usize) -> InputPlan {
        InputPlan {
            dim: self.dim,
            inputs: self
                .inputs
                .iter()
                .map(|u| u[(k * self.dim).min(u.len())..].to_vec())
                .collect(),
        }
    }
}

impl UavModel {
    pub fn validate(&self) -> Result<()> {
        if self.order != 1 && self.order != 2 {
            return Err(Error::Model(format!("order must be 1 or 2, got {}", self.order)));
        }
        if self.dim == 0 {
            return Err(Error::Model("dimension must be positive".into()));
        }
        for (name, v) in [("dt", self.dt), ("u_max", self.u_max), ("v_max", self.v_max)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Model(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    fn check_input(&self, u: &[f64]) -> Result<()> {
        if u.len() != self.dim {
            return Err(Error::Dimension(format!(
                "input has {} components, expected {}",
                u.len(),
                self.dim
            )));
        }
        for (axis, &value) in u.iter().enumerate() {
            if !(value.abs() <= self.u_max) {
                return Err(Error::InputOutOfBounds {
                    axis,
                    value,
                    bound: self.u_max,
                });
            }
        }
        Ok(())
    }

    /// One step of one UAV, in place.
    pub fn step(&self, pos: &mut [f64], vel: &mut [f64], u: &[f64]) -> Result<()> {
        self.check_input(u)?;
        self.step_unchecked(pos, vel, u);
        Ok(())
    }

    fn step_unchecked(&self, pos: &mut [f64], vel: &mut [f64], u: &[f64]) {
        let dt = self.dt;
        if self.order == 1 {
            for i in 0..self.dim {
                pos[i] += dt * u[i];
            }
        } else {
            for i in 0..self.dim {
                pos[i] += dt * vel[i] + 0.5 * dt * dt * u[i];
                vel[i] = (vel[i] + dt * u[i]).clamp(-self.v_max, self.v_max);
            }
        }
    }

    /// Positions of every UAV from `x0` under `plan`; UAV `n` gets
    /// `plan.len(n) + 1` samples.
    pub fn rollout(&self, x0: &FleetState, plan: &InputPlan) -> Result<Trace> {
        self.check_shapes(x0, plan)?;
        for u in &plan.inputs {
            for c in u.chunks(self.dim) {
                self.check_input(c)?;
            }
        }
        let mut samples = Vec::with_capacity(plan.inputs.len());
        for n in 0..plan.inputs.len() {
            let mut s = Vec::new();
            self.rollout_into(&x0.pos[n], &x0.vel[n], &plan.inputs[n], &mut s);
            samples.push(s);
        }
        Trace::new(self.dt, self.dim, samples)
    }

    fn check_shapes(&self, x0: &FleetState, plan: &InputPlan) -> Result<()> {
        if x0.uav_count() != plan.inputs.len() || plan.dim != self.dim {
            return Err(Error::Dimension("plan does not match the fleet".into()));
        }
        if x0.pos.iter().chain(&x0.vel).any(|p| p.len() != self.dim) {
            return Err(Error::Dimension("state does not match the model".into()));
        }
        if plan.inputs.iter().any(|u| u.len() % self.dim != 0) {
            return Err(Error::Dimension("ragged input sequence".into()));
        }
        Ok(())
    }

    /// Appends the positions of one UAV (including the start) to `out`.
    pub(crate) fn rollout_into(&self, p0: &[f64], v0: &[f64], inputs: &[f64], out: &mut Vec<f64>) {
        let mut p = p0.to_vec();
        let mut v = v0.to_vec();
        out.extend_from_slice(&p);
        for u in inputs.chunks(self.dim) {
            self.step_unchecked(&mut p, &mut v, u);
            out.extend_from_slice(&p);
        }
    }

    /// Gradient with respect to one UAV's inputs given the gradient with
    /// respect to its positions `1..=len` (position 0 is fixed).
    pub(crate) fn pullback(&self, v0: &[f64], inputs: &[f64], dpos: &[f64], dinputs: &mut [f64]) {
        let d = self.dim;
        let steps = inputs.len() / d;
        let dt = self.dt;
        if self.order == 1 {
            for i in 0..d {
                let mut acc = 0.0;
                for k in (0..steps).rev() {
                    acc += dpos[(k + 1) * d + i];
                    dinputs[k * d + i] = dt * acc;
                }
            }
            return;
        }
        // forward pass to record where the velocity clamp is active
        let mut active = vec![false; steps * d];
        let mut v = v0.to_vec();
        for k in 0..steps {
            for i in 0..d {
                let raw = v[i] + dt * inputs[k * d + i];
                active[k * d + i] = raw.abs() > self.v_max;
                v[i] = raw.clamp(-self.v_max, self.v_max);
            }
        }
        for i in 0..d {
            // adjoints of p_{k+1} and v_{k+1}
            let mut lp = 0.0;
            let mut lv = 0.0;
            for k in (0..steps).rev() {
                lp += dpos[(k + 1) * d + i];
                let pass = if active[k * d + i] { 0.0 } else { 1.0 };
                dinputs[k * d + i] = 0.5 * dt * dt * lp + dt * pass * lv;
                // p_{k+1} = p_k + dt v_k + ..., v_{k+1} = clamp(v_k + dt u_k)
                lv = dt * lp + pass * lv;
            }
        }
    }

    /// Per-axis radius of the set of positions reachable after `k` steps,
    /// starting with per-axis speed `|v0|`.
    pub fn reach_radius(&self, v0: f64, k: usize) -> f64 {
        let (dt, u) = (self.dt, self.u_max);
        if self.order == 1 {
            return k as f64 * dt * u;
        }
        let mut r = 0.0;
        for j in 0..k {
            let speed = (v0.abs() + j as f64 * dt * u).min(self.v_max);
            r += speed * dt + 0.5 * dt * dt * u;
        }
        r
    }

    /// Boxes containing every position reachable by each UAV, for futures of
    /// `steps[n]` inputs, appended after fixed `history` samples (whose last
    /// sample is the current position).
    pub fn reach_boxes(&self, history: &[Vec<f64>], vel: &[Vec<f64>], steps: &[usize]) -> BoxTrace {
        let d = self.dim;
        let mut lo = Vec::with_capacity(history.len());
        let mut hi = Vec::with_capacity(history.len());
        for (n, h) in history.iter().enumerate() {
            let (mut l, mut u) = (h.clone(), h.clone());
            let cur = &h[h.len() - d..];
            for k in 1..=steps[n] {
                for i in 0..d {
                    let r = self.reach_radius(vel[n][i], k);
                    l.push(cur[i] - r);
                    u.push(cur[i] + r);
                }
            }
            lo.push(l);
            hi.push(u);
        }
        BoxTrace::new(d, lo, hi).expect("reach boxes are well formed")
    }
}

/// Uniform sample from the product of take-off boxes, at rest.
pub fn sample_initial<R: Rng>(takeoff: &[Region], rng: &mut R) -> Result<FleetState> {
    let mut pos = Vec::with_capacity(takeoff.len());
    for r in takeoff {
        if r.lo.iter().zip(&r.hi).any(|(l, h)| !(l <= h)) {
            return Err(Error::Scenario(format!("take-off box `{}` is empty", r.name)));
        }
        pos.push(
            r.lo.iter()
                .zip(&r.hi)
                .map(|(&l, &h)| if l < h { rng.gen_range(l..=h) } else { l })
                .collect(),
        );
    }
    Ok(FleetState::at_rest(pos))
}
