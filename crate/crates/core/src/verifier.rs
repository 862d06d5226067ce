//! Certification of a trained tube over the continuous horizon.
//!
//! Sampled residuals at the collocation points, a margin `eta + L eps`, and a
//! sound upper bound `L` on the tube's rates together imply the tube
//! conditions at every `t` in `[0, t_c]`. A dense scan runs alongside as an
//! empirical backstop.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::neural::{self, TubeNet};
use crate::trainer::{collocation_grid, TrainConfig};
use crate::tube::{boundary_residuals, norm, ras_residuals, BoundaryGaps, TrasScenario, TubeSlice};

/// Allowed mismatch between the tube ends and the start/target balls.
pub const BOUNDARY_TOLERANCE: f64 = 1e-2;

/// Power-iteration safety factor on spectral norms.
const NORM_SAFETY: f64 = 1.01;
const POWER_ITERATIONS: usize = 50;

/// `max |tanh''|`
const TANH_CURVATURE: f64 = 0.769_800_358_919_501_4; // 4 / (3 sqrt 3)

/// Estimate of the largest singular value of a row-major `(rows, cols)` matrix.
pub fn spectral_norm(weights: &[f64], rows: usize, cols: usize) -> f64 {
    if rows == 0 || cols == 0 {
        return 0.0;
    }
    if rows == 1 || cols == 1 {
        return norm(weights);
    }
    // Deterministic start vector with no special alignment.
    let mut v: Vec<f64> = (0..cols)
        .map(|i| 1.0 + 0.1 * ((i * 7919) % 13) as f64)
        .collect();
    let mut sigma = 0.0;
    for _ in 0..POWER_ITERATIONS {
        let nv = norm(&v);
        if nv == 0.0 {
            return 0.0;
        }
        v.iter_mut().for_each(|x| *x /= nv);
        let wv: Vec<f64> = (0..rows)
            .map(|r| (0..cols).map(|c| weights[r * cols + c] * v[c]).sum())
            .collect();
        sigma = norm(&wv);
        let mut wtwv = vec![0.0; cols];
        for r in 0..rows {
            for c in 0..cols {
                wtwv[c] += weights[r * cols + c] * wv[r];
            }
        }
        v = wtwv;
    }
    sigma
}

/// Upper bounds on the spectral norms of every layer; the output layer is
/// split into the center rows and the radius row.
struct LayerNorms {
    hidden: Vec<f64>,
    center_out: f64,
    radius_out: f64,
}

fn layer_norms(net: &TubeNet) -> LayerNorms {
    let last = net.num_layers() - 1;
    let hidden = (0..last)
        .map(|l| {
            let layer = net.layer(l);
            let exact = layer.rows == 1 || layer.cols == 1;
            let s = spectral_norm(layer.weights, layer.rows, layer.cols);
            if exact {
                s
            } else {
                s * NORM_SAFETY
            }
        })
        .collect();
    let out = net.layer(last);
    let n = net.n();
    let center_w = &out.weights[..n * out.cols];
    let center_out = if n == 1 {
        norm(center_w)
    } else {
        spectral_norm(center_w, n, out.cols) * NORM_SAFETY
    };
    let radius_out = norm(&out.weights[n * out.cols..]);
    LayerNorms {
        hidden,
        center_out,
        radius_out,
    }
}

/// Global Lipschitz constants of `c(t)` and `r(t)` in physical time:
/// `(2 / t_c) * prod ||W_l||` with tanh slopes bounded by one.
pub fn global_lipschitz_bound(net: &TubeNet) -> (f64, f64) {
    let norms = layer_norms(net);
    let inner: f64 = norms.hidden.iter().product();
    let k = net.time_scale();
    (k * inner * norms.center_out, k * inner * norms.radius_out)
}

/// Global bounds on `|c''(t)|` and `|r''(t)|` in physical time.
pub fn global_curvature_bound(net: &TubeNet) -> (f64, f64) {
    let norms = layer_norms(net);
    let (mut g1, mut g2) = (1.0f64, 0.0f64);
    for w in &norms.hidden {
        let slope = w * g1;
        g2 = TANH_CURVATURE * slope * slope + w * g2;
        g1 = slope;
    }
    let k2 = net.time_scale().powi(2);
    (k2 * norms.center_out * g2, k2 * norms.radius_out * g2)
}

/// Sound rate bounds from sampling: on a uniform grid of spacing `h`, every
/// `t` lies within `h / 2` of a sample, so `sup |c'| <= max_j |c'(t_j)| + M2 h / 2`
/// with `M2` the global curvature bound.
pub fn sampled_lipschitz_bound(net: &TubeNet, samples: usize) -> Result<(f64, f64)> {
    let samples = samples.max(2);
    let t_c = net.t_c();
    let h = t_c / (samples - 1) as f64;
    let (max_c, max_r) = (0..samples)
        .into_par_iter()
        .map(|j| {
            let (dc, dr) = net.time_derivative((j as f64 * h).min(t_c))?;
            Ok((norm(&dc), dr.abs()))
        })
        .try_reduce(|| (0.0, 0.0), |a, b| Ok((a.0.max(b.0), a.1.max(b.1))))?;
    let (m2_c, m2_r) = global_curvature_bound(net);
    Ok((max_c + m2_c * h / 2.0, max_r + m2_r * h / 2.0))
}

/// `eta + L eps`; non-positive means sampled satisfaction extends to the horizon.
pub fn margin(eta: f64, lipschitz: f64, epsilon: f64) -> f64 {
    eta + lipschitz * epsilon
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WorstResidual {
    pub value: f64,
    pub time: f64,
}

impl WorstResidual {
    fn none() -> Self {
        WorstResidual {
            value: f64::NEG_INFINITY,
            time: f64::NAN,
        }
    }

    fn update(&mut self, value: f64, time: f64) {
        if value > self.value {
            *self = WorstResidual { value, time };
        }
    }

    fn merge(self, other: Self) -> Self {
        if other.value > self.value || (other.value == self.value && other.time < self.time) {
            other
        } else {
            self
        }
    }
}

/// Worst residual of each tube condition over a set of times.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResidualSummary {
    pub space: WorstResidual,
    pub radius: WorstResidual,
    /// `-inf` when there are no obstacles.
    pub obstacle: WorstResidual,
}

impl ResidualSummary {
    fn empty() -> Self {
        ResidualSummary {
            space: WorstResidual::none(),
            radius: WorstResidual::none(),
            obstacle: WorstResidual::none(),
        }
    }

    fn merge(self, other: Self) -> Self {
        ResidualSummary {
            space: self.space.merge(other.space),
            radius: self.radius.merge(other.radius),
            obstacle: self.obstacle.merge(other.obstacle),
        }
    }

    pub fn worst(&self) -> f64 {
        self.space
            .value
            .max(self.radius.value)
            .max(self.obstacle.value)
    }
}

fn summarize(
    net: &TubeNet,
    scen: &TrasScenario,
    times: &[f64],
) -> Result<(ResidualSummary, Option<f64>)> {
    let per_time = times
        .par_iter()
        .map(|&t| {
            let (c, r) = net.forward(t)?;
            let res = ras_residuals(&TubeSlice::at_rest(c, r), scen, t);
            let mut s = ResidualSummary::empty();
            s.space.update(res.space, t);
            s.radius.update(res.radius, t);
            if !res.obstacles.is_empty() {
                s.obstacle.update(res.obstacle_worst(), t);
            }
            let violated = (res.worst() > 0.0).then_some(t);
            Ok((s, violated))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut summary = ResidualSummary::empty();
    let mut first = None;
    for (s, v) in per_time {
        summary = summary.merge(s);
        if first.is_none() {
            first = v;
        }
    }
    Ok((summary, first))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DenseAudit {
    pub resolution: f64,
    pub samples: usize,
    pub worst: ResidualSummary,
    /// Earliest scanned time with a strictly positive residual.
    pub first_violation: Option<f64>,
}

impl DenseAudit {
    pub fn clean(&self) -> bool {
        self.first_violation.is_none()
    }
}

/// Scans `[0, t_c]` at the given step (always including `t_c`).
pub fn dense_audit(net: &TubeNet, scen: &TrasScenario, resolution: f64) -> Result<DenseAudit> {
    if !(resolution.is_finite() && resolution > 0.0) {
        return Err(Error::invalid("audit resolution", "must be > 0"));
    }
    let t_c = scen.t_c;
    let k = (t_c / resolution).floor() as usize;
    let mut times: Vec<f64> = (0..=k).map(|i| i as f64 * resolution).collect();
    if *times.last().unwrap() < t_c {
        times.push(t_c);
    }
    let (worst, first_violation) = summarize(net, scen, &times)?;
    Ok(DenseAudit {
        resolution,
        samples: times.len(),
        worst,
        first_violation,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LipschitzReport {
    pub center: f64,
    pub radius: f64,
}

impl LipschitzReport {
    pub fn sum(&self) -> f64 {
        self.center + self.radius
    }

    pub fn max(&self) -> f64 {
        self.center.max(self.radius)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Certificate {
    pub pass: bool,
    pub time_normalization: String,
    pub epsilon: f64,
    pub collocation_points: usize,
    /// Training target for the sampled residuals.
    pub eta_hat: f64,
    pub collocation_worst: ResidualSummary,
    /// `max(eta_hat, worst sampled residual)`: the slack the samples actually have.
    pub eta_used: f64,
    pub boundary_gaps: BoundaryGaps,
    pub boundary_tolerance: f64,
    pub lipschitz_budget: LipschitzReport,
    pub lipschitz_norm_product: LipschitzReport,
    pub lipschitz_sampled: LipschitzReport,
    pub lipschitz_network: LipschitzReport,
    /// Sampled rate penalties vanish and the network bound is within budget.
    pub rate_budgets_confirmed: bool,
    pub lipschitz_effective: LipschitzReport,
    /// `eta_used + (L_c + L_r) eps`; gates the certificate.
    pub margin: f64,
    /// `eta_used + max(L_c, L_r) eps`, recorded for reference.
    pub margin_max_reading: f64,
    pub audit: DenseAudit,
    pub failures: Vec<String>,
}

impl Certificate {
    /// JSON report with stable key order; non-finite values become `null`.
    pub fn to_json(&self) -> String {
        let mut v = serde_json::to_string_pretty(self).expect("certificate serializes");
        v.push('\n');
        v
    }
}

// Samples at which the rate bound is evaluated: enough that the curvature
// slack stays below a hundredth of the budget, within a fixed cap.
fn rate_samples(net: &TubeNet, budget: f64) -> usize {
    let (m2_c, m2_r) = global_curvature_bound(net);
    let want = (m2_c.max(m2_r) * net.t_c() / (2.0 * 0.01 * budget)).ceil();
    if want.is_finite() {
        (want as usize).clamp(2_001, 400_001)
    } else {
        400_001
    }
}

/// Checks the sampled conditions, the Lipschitz margin and the boundary gaps,
/// and runs the dense audit at `eps / 10`.
pub fn certify(net: &TubeNet, scen: &TrasScenario, cfg: &TrainConfig) -> Result<Certificate> {
    if net.n() != scen.dim() {
        return Err(Error::dim("network vs scenario", scen.dim(), net.n()));
    }
    if net.t_c() != scen.t_c {
        return Err(Error::invalid(
            "collocation grid",
            format!(
                "network horizon {} differs from scenario t_c {}",
                net.t_c(),
                scen.t_c
            ),
        ));
    }
    let grid = collocation_grid(scen.t_c, cfg.epsilon)?;
    let (collocation_worst, _) = summarize(net, scen, &grid.points)?;
    let eta_hat = cfg.eta_hat();
    let eta_used = eta_hat.max(collocation_worst.worst());

    let (c0, r0) = net.forward(0.0)?;
    let (c1, r1) = net.forward(scen.t_c)?;
    let boundary_gaps = boundary_residuals((&c0, r0), (&c1, r1), scen);

    let budget = LipschitzReport {
        center: cfg.lipschitz_center,
        radius: cfg.lipschitz_radius,
    };
    let (pc, pr) = global_lipschitz_bound(net);
    let norm_product = LipschitzReport {
        center: pc,
        radius: pr,
    };
    let (sc, sr) = sampled_lipschitz_bound(net, rate_samples(net, budget.sum()))?;
    let sampled = LipschitzReport {
        center: sc,
        radius: sr,
    };
    let network = LipschitzReport {
        center: pc.min(sc),
        radius: pr.min(sr),
    };
    let rates = neural::loss(net, &grid.points, scen, &cfg.loss_config())?;
    let rate_budgets_confirmed = rates.physics[3] == 0.0
        && rates.physics[4] == 0.0
        && network.center <= budget.center
        && network.radius <= budget.radius;
    // The budget may stand in for the network bound only where the bound
    // already confirms it, so the effective constant never exceeds the bound.
    let effective = if rate_budgets_confirmed {
        LipschitzReport {
            center: budget.center.min(network.center),
            radius: budget.radius.min(network.radius),
        }
    } else {
        network
    };
    let margin_sum = margin(eta_used, effective.sum(), cfg.epsilon);
    let margin_max = margin(eta_used, effective.max(), cfg.epsilon);
    let audit = dense_audit(net, scen, cfg.epsilon / 10.0)?;

    let mut failures = Vec::new();
    if margin_sum > 0.0 {
        failures.push(format!("margin {margin_sum:.6e} > 0"));
    }
    if boundary_gaps.max() > BOUNDARY_TOLERANCE {
        failures.push(format!(
            "boundary gap {:.6e} exceeds {BOUNDARY_TOLERANCE}",
            boundary_gaps.max()
        ));
    }
    if let Some(t) = audit.first_violation {
        failures.push(format!("dense audit violation at t = {t}"));
    }
    Ok(Certificate {
        pass: failures.is_empty(),
        time_normalization: "s = 2 t / t_c - 1; rates in physical time".into(),
        epsilon: cfg.epsilon,
        collocation_points: grid.points.len(),
        eta_hat,
        collocation_worst,
        eta_used,
        boundary_gaps,
        boundary_tolerance: BOUNDARY_TOLERANCE,
        lipschitz_budget: budget,
        lipschitz_norm_product: norm_product,
        lipschitz_sampled: sampled,
        lipschitz_network: network,
        rate_budgets_confirmed,
        lipschitz_effective: effective,
        margin: margin_sum,
        margin_max_reading: margin_max,
        audit,
        failures,
    })
}
