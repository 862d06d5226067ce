//! Closed-form tube-following controller for pure-feedback systems.
//!
//! Stage 1 keeps the output inside the tube with a logarithmic barrier on
//! the normalized distance to the tube center. Stages `2..=N` make each
//! state block track the previous stage's reference inside an exponentially
//! shrinking per-axis funnel. No model of the plant is used.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tube::{dist, TubeSlice};

/// Normalized errors are clamped to `1 - CLAMP_DELTA` so the barrier stays finite.
pub const CLAMP_DELTA: f64 = 1e-6;

/// Funnel bounds of one stage, one entry per axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Funnel {
    /// Initial half-widths.
    pub p: Vec<f64>,
    /// Final half-widths.
    pub q: Vec<f64>,
    /// Decay rates (1/s).
    pub mu: Vec<f64>,
}

impl Funnel {
    pub fn validate(&self, n: usize) -> Result<()> {
        if self.p.len() != n || self.q.len() != n || self.mu.len() != n {
            return Err(Error::dim(
                "funnel axes",
                n,
                self.p.len().max(self.q.len()).max(self.mu.len()),
            ));
        }
        for i in 0..n {
            let (p, q, mu) = (self.p[i], self.q[i], self.mu[i]);
            if !(q.is_finite() && q > 0.0 && p.is_finite() && p > q) {
                return Err(Error::invalid(
                    "funnel",
                    format!("axis {i}: need p > q > 0, got p = {p}, q = {q}"),
                ));
            }
            if !(mu.is_finite() && mu >= 0.0) {
                return Err(Error::invalid(
                    "funnel",
                    format!("axis {i}: decay rate must be >= 0"),
                ));
            }
        }
        Ok(())
    }

    /// `gamma_i(t) = (p_i - q_i) exp(-mu_i t) + q_i`
    pub fn gamma(&self, i: usize, t: f64) -> f64 {
        (self.p[i] - self.q[i]) * (-self.mu[i] * t).exp() + self.q[i]
    }
}

/// Funnels for stages `2..=N`; `stages[0]` belongs to stage 2.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunnelParams {
    pub stages: Vec<Funnel>,
}

impl FunnelParams {
    pub fn stage(&self, k: usize) -> &Funnel {
        &self.stages[k - 2]
    }

    pub fn validate(&self, depth: usize, n: usize) -> Result<()> {
        if self.stages.len() + 1 != depth {
            return Err(Error::dim(
                "funnel stages",
                depth.saturating_sub(1),
                self.stages.len(),
            ));
        }
        self.stages.iter().try_for_each(|f| f.validate(n))
    }

    /// Sizes the funnels from the initial tracking errors:
    /// `p = 1.25 max(|e(0)|, 2 q)` per axis, with the given `q` and `mu`.
    pub fn auto_init(
        z0: &[f64],
        slice0: &TubeSlice,
        gains: &GainSet,
        n: usize,
        q: f64,
        mu: f64,
    ) -> Result<Self> {
        let depth = gains.kappa.len();
        if z0.len() != depth * n {
            return Err(Error::dim("stacked state", depth * n, z0.len()));
        }
        let mut params = FunnelParams::default();
        let mut reference = stage1_control(&z0[..n], slice0, gains.kappa[0])?.output;
        for k in 2..=depth {
            let x = &z0[(k - 1) * n..k * n];
            let p = x
                .iter()
                .zip(&reference)
                .map(|(a, b)| 1.25 * (a - b).abs().max(2.0 * q))
                .collect();
            params.stages.push(Funnel {
                p,
                q: vec![q; n],
                mu: vec![mu; n],
            });
            reference =
                stagek_control(x, &reference, params.stage(k), 0.0, gains.kappa[k - 1]).output;
        }
        Ok(params)
    }
}

/// `gamma_{k,i}(t)`
pub fn funnel_gamma(fp: &FunnelParams, k: usize, i: usize, t: f64) -> f64 {
    fp.stage(k).gamma(i, t)
}

/// Positive gains `kappa_1..kappa_N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GainSet {
    pub kappa: Vec<f64>,
}

impl GainSet {
    pub fn uniform(depth: usize, kappa: f64) -> Self {
        GainSet {
            kappa: vec![kappa; depth],
        }
    }

    pub fn validate(&self, depth: usize) -> Result<()> {
        if self.kappa.len() != depth {
            return Err(Error::dim("gains", depth, self.kappa.len()));
        }
        if !self.kappa.iter().all(|k| k.is_finite() && *k > 0.0) {
            return Err(Error::invalid("gains", "every kappa must be > 0"));
        }
        Ok(())
    }
}

/// `ln((1 + e) / (1 - e))`
fn barrier(e: f64) -> f64 {
    ((1.0 + e) / (1.0 - e)).ln()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stage1Output {
    pub output: Vec<f64>,
    /// Normalized distance to the tube center before clamping.
    pub e: f64,
    pub clamped: bool,
}

/// `r_2 = -kappa_1 ln((1 + e_1) / (1 - e_1)) (x_1 - c)` with `e_1 = |x_1 - c| / r`.
pub fn stage1_control(x1: &[f64], slice: &TubeSlice, kappa: f64) -> Result<Stage1Output> {
    if x1.len() != slice.center.len() {
        return Err(Error::dim("stage 1 output", slice.center.len(), x1.len()));
    }
    if slice.radius.is_nan() || slice.radius <= 0.0 {
        return Err(Error::invalid(
            "tube",
            format!("radius must be > 0 for control, got {}", slice.radius),
        ));
    }
    let e = dist(x1, &slice.center) / slice.radius;
    let clamped = e >= 1.0 - CLAMP_DELTA;
    let eps = barrier(e.min(1.0 - CLAMP_DELTA));
    let output = x1
        .iter()
        .zip(&slice.center)
        .map(|(x, c)| -kappa * eps * (x - c))
        .collect();
    Ok(Stage1Output { output, e, clamped })
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageKOutput {
    pub output: Vec<f64>,
    /// Per-axis normalized tracking errors before clamping.
    pub e: Vec<f64>,
    pub clamped: bool,
}

/// `-kappa_k xi_k eps_k` with `xi_k = 4 diag(gamma)^-1 (I - diag(e o e))^-1`.
pub fn stagek_control(
    x: &[f64],
    reference: &[f64],
    funnel: &Funnel,
    t: f64,
    kappa: f64,
) -> StageKOutput {
    let limit = 1.0 - CLAMP_DELTA;
    let mut clamped = false;
    let mut e_raw = Vec::with_capacity(x.len());
    let output = (0..x.len())
        .map(|i| {
            let gamma = funnel.gamma(i, t);
            let e = (x[i] - reference[i]) / gamma;
            e_raw.push(e);
            if e.abs() >= limit {
                clamped = true;
            }
            let e = e.clamp(-limit, limit);
            let xi = 4.0 / (gamma * (1.0 - e * e));
            -kappa * xi * barrier(e)
        })
        .collect();
    StageKOutput {
        output,
        e: e_raw,
        clamped,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControlOutput {
    pub u: Vec<f64>,
    pub e1: f64,
    /// Normalized funnel errors of stages `2..=N`.
    pub ek: Vec<Vec<f64>>,
    pub clamped: bool,
}

/// Full recursion from the stacked state `z = [x_1, .., x_N]` to the input `u`.
pub fn full_control(
    z: &[f64],
    slice: &TubeSlice,
    fp: &FunnelParams,
    gains: &GainSet,
    t: f64,
) -> Result<ControlOutput> {
    let n = slice.center.len();
    let depth = gains.kappa.len();
    if z.len() != depth * n {
        return Err(Error::dim("stacked state", depth * n, z.len()));
    }
    if fp.stages.len() + 1 != depth {
        return Err(Error::dim("funnel stages", depth - 1, fp.stages.len()));
    }
    let s1 = stage1_control(&z[..n], slice, gains.kappa[0])?;
    let mut clamped = s1.clamped;
    let mut reference = s1.output;
    let mut ek = Vec::with_capacity(depth - 1);
    for k in 2..=depth {
        let sk = stagek_control(
            &z[(k - 1) * n..k * n],
            &reference,
            fp.stage(k),
            t,
            gains.kappa[k - 1],
        );
        clamped |= sk.clamped;
        ek.push(sk.e);
        reference = sk.output;
    }
    Ok(ControlOutput {
        u: reference,
        e1: s1.e,
        ek,
        clamped,
    })
}
