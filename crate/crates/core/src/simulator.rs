//! Closed-loop simulation of pure-feedback plants driven by the tube controller.

use std::f64::consts::FRAC_PI_2;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::controller::{full_control, ControlOutput, FunnelParams, GainSet};
use crate::error::{Error, Result};
use crate::neural::TubeNet;
use crate::tube::{dist, norm, TrasScenario, TubeSlice};

/// A plant of the form `x_i' = f_i(z_i) + g_i(z_i) x_{i+1} + w_i`, with `u`
/// in place of `x_{N+1}`. The state is the stacked vector `[x_1, .., x_N]`.
pub trait Plant: Sync {
    fn name(&self) -> &str;
    /// Number of blocks `N`.
    fn depth(&self) -> usize;
    /// Block dimension `n`.
    fn block_dim(&self) -> usize;
    fn initial_state(&self) -> Vec<f64>;
    /// State derivative for input `u` and stacked disturbance `w`.
    fn derivative(&self, z: &[f64], u: &[f64], w: &[f64], t: f64) -> Vec<f64>;
}

/// Planar omnidirectional robot with its heading held fixed (`omega = 0`):
/// `[x1', x2'] = R(theta) [v1, v2] + w`.
#[derive(Debug, Clone, PartialEq)]
pub struct Omnibot {
    pub position: [f64; 2],
    pub heading: f64,
}

/// Omnibot starting at pose `[x1, x2, heading]`.
pub fn omnibot_model(pose: [f64; 3]) -> Result<Omnibot> {
    let heading = pose[2];
    if !(heading.is_finite() && heading.abs() < FRAC_PI_2) {
        return Err(Error::invalid(
            "omnibot heading",
            format!("|heading| must be < pi/2 so that the input gain stays positive definite, got {heading}"),
        ));
    }
    Ok(Omnibot {
        position: [pose[0], pose[1]],
        heading,
    })
}

impl Plant for Omnibot {
    fn name(&self) -> &str {
        "omnibot"
    }

    fn depth(&self) -> usize {
        1
    }

    fn block_dim(&self) -> usize {
        2
    }

    fn initial_state(&self) -> Vec<f64> {
        self.position.to_vec()
    }

    fn derivative(&self, _z: &[f64], u: &[f64], w: &[f64], _t: f64) -> Vec<f64> {
        let (s, c) = self.heading.sin_cos();
        vec![c * u[0] - s * u[1] + w[0], s * u[0] + c * u[1] + w[1]]
    }
}

/// Quadrotor as a double integrator: `p' = v + w_1`, `v' = u + w_2`.
#[derive(Debug, Clone, PartialEq)]
pub struct Quadrotor {
    pub position: [f64; 3],
    pub velocity: [f64; 3],
}

pub fn quadrotor_model(position: [f64; 3], velocity: [f64; 3]) -> Quadrotor {
    Quadrotor { position, velocity }
}

impl Plant for Quadrotor {
    fn name(&self) -> &str {
        "quadrotor"
    }

    fn depth(&self) -> usize {
        2
    }

    fn block_dim(&self) -> usize {
        3
    }

    fn initial_state(&self) -> Vec<f64> {
        self.position
            .iter()
            .chain(&self.velocity)
            .copied()
            .collect()
    }

    fn derivative(&self, z: &[f64], u: &[f64], w: &[f64], _t: f64) -> Vec<f64> {
        (0..3)
            .map(|i| z[3 + i] + w[i])
            .chain((0..3).map(|i| u[i] + w[3 + i]))
            .collect()
    }
}

type BlockFn = Box<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// A pure-feedback plant assembled from per-block drift and gain maps.
/// `drift[i]` maps `z_i` to `f_i(z_i)`; `gain[i]` maps `z_i` to the row-major
/// `n x n` matrix `g_i(z_i)`.
pub struct PureFeedback {
    pub name: String,
    pub n: usize,
    pub drift: Vec<BlockFn>,
    pub gain: Vec<BlockFn>,
    pub initial: Vec<f64>,
}

impl Plant for PureFeedback {
    fn name(&self) -> &str {
        &self.name
    }

    fn depth(&self) -> usize {
        self.drift.len()
    }

    fn block_dim(&self) -> usize {
        self.n
    }

    fn initial_state(&self) -> Vec<f64> {
        self.initial.clone()
    }

    fn derivative(&self, z: &[f64], u: &[f64], w: &[f64], _t: f64) -> Vec<f64> {
        let n = self.n;
        let depth = self.depth();
        let mut out = Vec::with_capacity(z.len());
        for i in 0..depth {
            let zi = &z[..(i + 1) * n];
            let next = if i + 1 < depth {
                &z[(i + 1) * n..(i + 2) * n]
            } else {
                u
            };
            let f = (self.drift[i])(zi);
            let g = (self.gain[i])(zi);
            for r in 0..n {
                let gx: f64 = (0..n).map(|c| g[r * n + c] * next[c]).sum();
                out.push(f[r] + gx + w[i * n + r]);
            }
        }
        out
    }
}

/// One classical Runge-Kutta step of `x' = f(t, x)`.
pub fn rk4_step<F>(f: F, t: f64, x: &[f64], h: f64) -> Result<Vec<f64>>
where
    F: Fn(f64, &[f64]) -> Result<Vec<f64>>,
{
    let axpy = |a: &[f64], k: &[f64], s: f64| -> Vec<f64> {
        a.iter().zip(k).map(|(a, k)| a + s * k).collect()
    };
    let k1 = f(t, x)?;
    let k2 = f(t + h / 2.0, &axpy(x, &k1, h / 2.0))?;
    let k3 = f(t + h / 2.0, &axpy(x, &k2, h / 2.0))?;
    let k4 = f(t + h, &axpy(x, &k3, h))?;
    Ok((0..x.len())
        .map(|i| x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    /// Integration step (s).
    pub step: f64,
    /// Disturbance bound per block; each component is drawn from `[-w, w]`.
    pub w_max: Vec<f64>,
    pub seed: u64,
    pub t_end: f64,
}

impl SimConfig {
    pub fn validate(&self, depth: usize) -> Result<()> {
        if !(self.step.is_finite() && self.step > 0.0) {
            return Err(Error::invalid("simulation.step", "must be > 0"));
        }
        if !(self.t_end.is_finite() && self.t_end > 0.0) {
            return Err(Error::invalid("simulation.t_end", "must be > 0"));
        }
        if self.w_max.len() != depth {
            return Err(Error::dim("simulation.w_max", depth, self.w_max.len()));
        }
        if !self.w_max.iter().all(|w| w.is_finite() && *w >= 0.0) {
            return Err(Error::invalid("simulation.w_max", "must be >= 0"));
        }
        Ok(())
    }
}

/// Controller settings; funnels are sized from the initial state when absent.
#[derive(Debug, Clone, PartialEq)]
pub struct ControllerConfig {
    pub gains: GainSet,
    pub funnel: Option<FunnelParams>,
    pub funnel_q: f64,
    pub funnel_mu: f64,
}

impl ControllerConfig {
    pub fn defaults(depth: usize, t_c: f64) -> Self {
        ControllerConfig {
            gains: GainSet::uniform(depth, 1.0),
            funnel: None,
            funnel_q: 0.1,
            funnel_mu: 2.0 / t_c,
        }
    }
}

/// Sampled closed-loop run on a uniform grid, one row per step.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub depth: usize,
    pub n: usize,
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub controls: Vec<Vec<f64>>,
    /// Disturbance held over the step that starts at each row; zero on the last row.
    pub disturbances: Vec<Vec<f64>>,
    pub e1: Vec<f64>,
    pub ek: Vec<Vec<Vec<f64>>>,
    /// Whether any controller evaluation in this row's step hit the clamp.
    pub clamped: Vec<bool>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn output(&self, row: usize) -> &[f64] {
        &self.states[row][..self.n]
    }

    pub fn csv_header(&self) -> String {
        let mut cols = vec!["t".to_string()];
        for b in 1..=self.depth {
            cols.extend((1..=self.n).map(|i| format!("x_{b}_{i}")));
        }
        cols.extend((1..=self.n).map(|i| format!("u_{i}")));
        for b in 1..=self.depth {
            cols.extend((1..=self.n).map(|i| format!("w_{b}_{i}")));
        }
        cols.push("e1".into());
        cols.push("clamp".into());
        cols.join(",")
    }

    /// Values printed with 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = self.csv_header();
        out.push('\n');
        for k in 0..self.len() {
            let mut row = format!("{:.16e}", self.times[k]);
            for v in self.states[k]
                .iter()
                .chain(&self.controls[k])
                .chain(&self.disturbances[k])
            {
                row.push_str(&format!(",{v:.16e}"));
            }
            row.push_str(&format!(
                ",{:.16e},{}\n",
                self.e1[k],
                u8::from(self.clamped[k])
            ));
            out.push_str(&row);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub steps: usize,
    pub step: f64,
    pub max_e1: f64,
    /// Largest normalized funnel error over all stages and axes.
    pub max_funnel_error: f64,
    pub reach_error: f64,
    pub reach_success: bool,
    /// `+inf` (serialized as null) without obstacles.
    pub min_clearance: f64,
    pub control_effort: f64,
    pub clamp_count: usize,
    pub success: bool,
}

fn sample_disturbance(rng: &mut ChaCha8Rng, w_max: &[f64], n: usize) -> Vec<f64> {
    w_max
        .iter()
        .flat_map(|&w| (0..n).map(move |_| w))
        .map(|w| if w > 0.0 { rng.gen_range(-w..=w) } else { 0.0 })
        .collect()
}

/// Runs the controller in closed loop with RK4. The controller is evaluated
/// at every RK4 stage against the tube at that stage's time; the disturbance
/// is held over each step.
pub fn simulate(
    plant: &dyn Plant,
    net: &TubeNet,
    scen: &TrasScenario,
    ctrl: &ControllerConfig,
    sim: &SimConfig,
) -> Result<(Trajectory, MetricsReport)> {
    let depth = plant.depth();
    let n = plant.block_dim();
    if n != net.n() || n != scen.dim() {
        return Err(Error::dim("plant block vs tube", net.n(), n));
    }
    sim.validate(depth)?;
    ctrl.gains.validate(depth)?;

    let mut z = plant.initial_state();
    if z.len() != depth * n {
        return Err(Error::dim("plant initial state", depth * n, z.len()));
    }
    let slice0 = net.slice(0.0)?;
    let y0 = &z[..n];
    let e0 = dist(y0, &slice0.center) / slice0.radius;
    if !(slice0.radius > 0.0 && e0 < 1.0) {
        return Err(Error::Simulation(format!(
            "initial output {y0:?} is not inside the tube at t = 0 (normalized distance {e0})"
        )));
    }
    let funnel = match &ctrl.funnel {
        Some(f) => f.clone(),
        None => {
            FunnelParams::auto_init(&z, &slice0, &ctrl.gains, n, ctrl.funnel_q, ctrl.funnel_mu)?
        }
    };
    funnel.validate(depth, n)?;

    let steps = ((sim.t_end / sim.step).round() as usize).max(1);
    let h = sim.t_end / steps as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(sim.seed);
    let control_at = |t: f64, x: &[f64]| -> Result<ControlOutput> {
        // The control law needs only the center and radius, not their rates.
        let (c, r) = net.forward(t)?;
        full_control(x, &TubeSlice::at_rest(c, r), &funnel, &ctrl.gains, t)
    };

    let mut traj = Trajectory {
        depth,
        n,
        times: Vec::with_capacity(steps + 1),
        states: Vec::with_capacity(steps + 1),
        controls: Vec::with_capacity(steps + 1),
        disturbances: Vec::with_capacity(steps + 1),
        e1: Vec::with_capacity(steps + 1),
        ek: Vec::with_capacity(steps + 1),
        clamped: Vec::with_capacity(steps + 1),
    };
    for k in 0..=steps {
        let t = k as f64 * h;
        let out = control_at(t, &z)?;
        let last = k == steps;
        let w = if last {
            vec![0.0; depth * n]
        } else {
            sample_disturbance(&mut rng, &sim.w_max, n)
        };
        let mut clamped = out.clamped;
        let next = if last {
            None
        } else {
            let stage_clamp = std::cell::Cell::new(false);
            let next = rk4_step(
                |s, x| {
                    let o = control_at(s, x)?;
                    stage_clamp.set(stage_clamp.get() | o.clamped);
                    Ok(plant.derivative(x, &o.u, &w, s))
                },
                t,
                &z,
                h,
            )?;
            clamped |= stage_clamp.get();
            if !next.iter().all(|v| v.is_finite()) {
                return Err(Error::Simulation(format!(
                    "state became non-finite at t = {}",
                    t + h
                )));
            }
            Some(next)
        };
        traj.times.push(t);
        traj.states.push(z.clone());
        traj.controls.push(out.u);
        traj.disturbances.push(w);
        traj.e1.push(out.e1);
        traj.ek.push(out.ek);
        traj.clamped.push(clamped);
        if let Some(next) = next {
            z = next;
        }
    }

    let metrics = metrics(&traj, scen, h);
    Ok((traj, metrics))
}

fn metrics(traj: &Trajectory, scen: &TrasScenario, h: f64) -> MetricsReport {
    let last = traj.len() - 1;
    let max_e1 = traj.e1.iter().copied().fold(0.0, f64::max);
    let max_funnel_error = traj
        .ek
        .iter()
        .flatten()
        .flatten()
        .map(|e| e.abs())
        .fold(0.0, f64::max);
    let reach_error = dist(traj.output(last), &scen.target.center);
    let min_clearance = (0..traj.len())
        .map(|k| scen.unsafe_distance(traj.output(k), traj.times[k]))
        .fold(f64::INFINITY, f64::min);
    let effort: f64 = traj
        .controls
        .windows(2)
        .map(|w| 0.5 * h * (norm(&w[0]) + norm(&w[1])))
        .sum();
    let clamp_count = traj.clamped.iter().filter(|c| **c).count();
    let reach_success = reach_error <= scen.target.radius;
    MetricsReport {
        steps: last,
        step: h,
        max_e1,
        max_funnel_error,
        reach_error,
        reach_success,
        min_clearance,
        control_effort: effort,
        clamp_count,
        success: reach_success && clamp_count == 0 && max_e1 < 1.0,
    }
}
