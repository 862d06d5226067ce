//! Collocation grid, Adam, and the tube training loop.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::{Error, Result};
use crate::neural::{self, LossBreakdown, LossConfig, TubeNet, DEFAULT_HIDDEN};
use crate::tube::{dist, TrasScenario};

/// Time samples whose `epsilon`-balls cover `[0, t_c]`, plus the two
/// endpoints used by the boundary loss.
#[derive(Debug, Clone, PartialEq)]
pub struct CollocationGrid {
    pub points: Vec<f64>,
    pub epsilon: f64,
    pub boundary: [f64; 2],
}

impl CollocationGrid {
    /// Index of the sample nearest to `t`.
    pub fn nearest(&self, t: f64) -> usize {
        let r = ((t / self.epsilon + 1.0) / 2.0).round() as isize - 1;
        let r = r.clamp(0, self.points.len() as isize - 1) as usize;
        // The clipped terminal sample can be closer than the rounded guess.
        [r.saturating_sub(1), r, (r + 1).min(self.points.len() - 1)]
            .into_iter()
            .min_by(|a, b| {
                (self.points[*a] - t)
                    .abs()
                    .total_cmp(&(self.points[*b] - t).abs())
            })
            .unwrap()
    }
}

/// Uniform grid `t_r = min((2r - 1) eps, t_c)`, `r = 1..=ceil(t_c / (2 eps))`.
pub fn collocation_grid(t_c: f64, epsilon: f64) -> Result<CollocationGrid> {
    if !(t_c.is_finite() && t_c > 0.0) {
        return Err(Error::invalid("t_c", "must be > 0"));
    }
    if !(epsilon.is_finite() && epsilon > 0.0 && epsilon < t_c) {
        return Err(Error::invalid(
            "epsilon",
            format!("collocation radius must satisfy 0 < eps < t_c, got {epsilon}"),
        ));
    }
    let m = (t_c / (2.0 * epsilon)).ceil() as usize;
    let mut points: Vec<f64> = (1..=m)
        .map(|r| ((2 * r - 1) as f64 * epsilon).min(t_c))
        .collect();
    points.dedup();
    if let Some(&last) = points.last() {
        if last + epsilon < t_c {
            points.push(t_c);
        }
    }
    Ok(CollocationGrid {
        points,
        epsilon,
        boundary: [0.0, t_c],
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    /// Collocation radius in seconds.
    pub epsilon: f64,
    pub lipschitz_center: f64,
    pub lipschitz_radius: f64,
    pub physics_weights: [f64; 5],
    pub boundary_weights: [f64; 4],
    /// Collocation points per step; `0` means the full grid.
    pub batch_size: usize,
    pub learning_rate: f64,
    pub max_epochs: usize,
    /// Convergence threshold on the total loss.
    pub tolerance: f64,
    pub hidden: Vec<usize>,
    pub seed: u64,
}

impl TrainConfig {
    /// Defaults sized from the scenario: `eps = t_c / 200`, budgets four
    /// times the straight-line center rate and the space radius over `t_c`.
    pub fn defaults_for(scen: &TrasScenario, seed: u64) -> Self {
        let t_c = scen.t_c;
        TrainConfig {
            epsilon: t_c / 200.0,
            lipschitz_center: 4.0
                * dist(&scen.target.center, &scen.start.center).max(scen.target.radius)
                / t_c,
            lipschitz_radius: 4.0 * scen.space.radius / t_c,
            physics_weights: [1.0; 5],
            boundary_weights: [10.0; 4],
            batch_size: 0,
            learning_rate: 1e-3,
            max_epochs: 20_000,
            tolerance: 1e-4,
            hidden: DEFAULT_HIDDEN.to_vec(),
            seed,
        }
    }

    /// `L = L_c + L_r`.
    pub fn lipschitz_sum(&self) -> f64 {
        self.lipschitz_center + self.lipschitz_radius
    }

    /// `eta_hat = -(L_c + L_r) eps`
    pub fn eta_hat(&self) -> f64 {
        -self.lipschitz_sum() * self.epsilon
    }

    pub fn loss_config(&self) -> LossConfig {
        LossConfig {
            eta_hat: self.eta_hat(),
            lipschitz_center: self.lipschitz_center,
            lipschitz_radius: self.lipschitz_radius,
            physics_weights: self.physics_weights,
            boundary_weights: self.boundary_weights,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(Error::invalid("training.epsilon", "must be > 0"));
        }
        if !(self.lipschitz_center.is_finite() && self.lipschitz_center > 0.0) {
            return Err(Error::invalid("training.lipschitz_center", "must be > 0"));
        }
        if !(self.lipschitz_radius.is_finite() && self.lipschitz_radius > 0.0) {
            return Err(Error::invalid("training.lipschitz_radius", "must be > 0"));
        }
        if self
            .physics_weights
            .iter()
            .chain(&self.boundary_weights)
            .any(|w| !(w.is_finite() && *w >= 0.0))
        {
            return Err(Error::invalid(
                "training weights",
                "must be finite and >= 0",
            ));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::invalid("training.learning_rate", "must be > 0"));
        }
        if !(self.tolerance.is_finite() && self.tolerance > 0.0) {
            return Err(Error::invalid("training.tolerance", "must be > 0"));
        }
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return Err(Error::invalid("training.hidden", "widths must be >= 1"));
        }
        Ok(())
    }
}

/// Adam with bias correction.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    step: u64,
}

impl Adam {
    pub fn new(dim: usize) -> Self {
        Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; dim],
            v: vec![0.0; dim],
            step: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn step(&mut self, theta: &mut [f64], grad: &[f64], lr: f64) -> Result<()> {
        if theta.len() != self.m.len() {
            return Err(Error::dim("adam parameters", self.m.len(), theta.len()));
        }
        if grad.len() != self.m.len() {
            return Err(Error::dim("adam gradient", self.m.len(), grad.len()));
        }
        if let Some(i) = grad.iter().position(|g| !g.is_finite()) {
            return Err(Error::NonFinite(format!("gradient component {i}")));
        }
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step as i32);
        let bc2 = 1.0 - self.beta2.powi(self.step as i32);
        for i in 0..theta.len() {
            let g = grad[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            theta[i] -= lr * m_hat / (v_hat.sqrt() + self.eps);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: LossBreakdown,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct TrainLog {
    pub records: Vec<EpochRecord>,
    pub wall_clock_s: f64,
    pub final_epoch: usize,
    pub converged: bool,
    pub best_total: f64,
}

impl TrainLog {
    /// `epoch,<sub-losses>,total`, one row per epoch.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch");
        for name in LossBreakdown::PHYSICS_NAMES
            .iter()
            .chain(&LossBreakdown::BOUNDARY_NAMES)
        {
            out.push(',');
            out.push_str(name);
        }
        out.push_str(",total\n");
        for rec in &self.records {
            out.push_str(&rec.epoch.to_string());
            for v in rec.loss.physics.iter().chain(&rec.loss.boundary) {
                out.push_str(&format!(",{v:.17e}"));
            }
            out.push_str(&format!(",{:.17e}\n", rec.loss.total));
        }
        out
    }
}

/// Training stopped on a non-finite loss or parameter.
#[derive(Debug, Error)]
#[error("{error}")]
pub struct TrainFailure {
    pub error: Error,
    /// Log up to the last finite epoch.
    pub log: TrainLog,
}

/// Runs Adam on the collocation loss until the total loss drops to the
/// tolerance or the epoch budget is spent. Returns the lowest-loss
/// parameters seen; non-convergence is reported through `log.converged`.
pub fn train(
    scen: &TrasScenario,
    cfg: &TrainConfig,
) -> std::result::Result<(TubeNet, TrainLog), TrainFailure> {
    let start = Instant::now();
    let mut log = TrainLog {
        best_total: f64::INFINITY,
        ..Default::default()
    };
    let fail = |error: Error, mut log: TrainLog| {
        log.wall_clock_s = start.elapsed().as_secs_f64();
        TrainFailure { error, log }
    };
    let setup = || -> Result<(CollocationGrid, TubeNet)> {
        scen.validate()?;
        cfg.validate()?;
        let grid = collocation_grid(scen.t_c, cfg.epsilon)?;
        let net = TubeNet::init(scen.dim(), scen.t_c, &cfg.hidden, cfg.seed)?;
        Ok((grid, net))
    };
    let (grid, mut net) = match setup() {
        Ok(x) => x,
        Err(e) => return Err(fail(e, log)),
    };
    let loss_cfg = cfg.loss_config();
    assert!(loss_cfg.eta_hat + cfg.lipschitz_sum() * cfg.epsilon <= 0.0);

    let full_batch = cfg.batch_size == 0 || cfg.batch_size >= grid.points.len();
    let mut order: Vec<usize> = (0..grid.points.len()).collect();
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_5eed);
    let mut adam = Adam::new(net.param_count());
    let mut theta = net.params().to_vec();
    let mut best = theta.clone();

    for epoch in 0..cfg.max_epochs {
        let evaluated = if full_batch {
            neural::loss_gradient(&net, &grid.points, scen, &loss_cfg).map(|(l, g)| (l, Some(g)))
        } else {
            neural::loss(&net, &grid.points, scen, &loss_cfg).map(|l| (l, None))
        };
        let (loss, grad) = match evaluated {
            Ok(x) => x,
            Err(e) => {
                return Err(fail(
                    Error::Diverged {
                        epoch,
                        reason: e.to_string(),
                    },
                    log,
                ))
            }
        };
        log.records.push(EpochRecord { epoch, loss });
        log.final_epoch = epoch;
        if loss.total < log.best_total {
            log.best_total = loss.total;
            best.copy_from_slice(&theta);
        }
        if epoch % 1000 == 0 {
            log::info!(
                "epoch {epoch}: loss {:.3e} (best {:.3e})",
                loss.total,
                log.best_total
            );
        }
        if loss.total <= cfg.tolerance {
            log.converged = true;
            break;
        }

        let stepped = match grad {
            Some(g) => adam.step(&mut theta, &g, cfg.learning_rate),
            None => {
                order.shuffle(&mut shuffle_rng);
                let mut res = Ok(());
                for chunk in order.chunks(cfg.batch_size) {
                    let batch: Vec<f64> = chunk.iter().map(|&i| grid.points[i]).collect();
                    res = neural::loss_gradient(&net, &batch, scen, &loss_cfg)
                        .and_then(|(_, g)| adam.step(&mut theta, &g, cfg.learning_rate))
                        .and_then(|_| net.set_params(&theta));
                    if res.is_err() {
                        break;
                    }
                }
                res
            }
        }
        .and_then(|_| net.set_params(&theta));
        if let Err(e) = stepped {
            return Err(fail(
                Error::Diverged {
                    epoch,
                    reason: e.to_string(),
                },
                log,
            ));
        }
    }
    net.set_params(&best).expect("best parameters are finite");
    log.wall_clock_s = start.elapsed().as_secs_f64();
    log::info!(
        "training finished after {} epochs in {:.2} s: best loss {:.3e}, converged = {}",
        log.final_epoch + 1,
        log.wall_clock_s,
        log.best_total,
        log.converged
    );
    Ok((net, log))
}
