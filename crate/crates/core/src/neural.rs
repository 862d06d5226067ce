//! The tube network: a fully connected tanh MLP mapping physical time to the
//! tube center and radius.
//!
//! Time enters the network as `s = 2 t / t_c - 1`. The forward pass runs on
//! [`Dual`] numbers seeded with `ds/ds = 1`, so every activation carries its
//! derivative with respect to `s`; physical-time rates are recovered by the
//! factor `2 / t_c`. The training loss depends on both values and rates, and
//! its parameter gradient is obtained by reverse accumulation through the
//! dual-valued forward pass (forward-over-reverse), which includes the
//! second-order paths through the Lipschitz penalties.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dual::Dual;
use crate::error::{Error, Result};
use crate::tube::{dist, norm, TrasScenario, TubeSlice};

pub const MODEL_MAGIC: &[u8; 4] = b"PNST";
pub const MODEL_VERSION: u8 = 1;

/// Default hidden architecture.
pub const DEFAULT_HIDDEN: [usize; 3] = [64, 64, 64];

/// Points per work unit in the batch reduction. Fixed so that the summation
/// order, and hence every bit of the result, does not depend on thread count.
const REDUCE_CHUNK: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct TubeNet {
    n: usize,
    t_c: f64,
    /// `[1, hidden.., n + 1]`
    widths: Vec<usize>,
    /// Layer-major; each layer stores its row-major `(out, in)` weights then biases.
    params: Vec<f64>,
    offsets: Vec<usize>,
}

/// Borrowed view of one affine layer.
#[derive(Debug, Clone, Copy)]
pub struct LayerView<'a> {
    pub rows: usize,
    pub cols: usize,
    pub weights: &'a [f64],
    pub bias: &'a [f64],
}

impl LayerView<'_> {
    pub fn weight(&self, row: usize, col: usize) -> f64 {
        self.weights[row * self.cols + col]
    }
}

fn layer_offsets(widths: &[usize]) -> (Vec<usize>, usize) {
    let mut offsets = Vec::with_capacity(widths.len() - 1);
    let mut total = 0;
    for w in widths.windows(2) {
        offsets.push(total);
        total += w[0] * w[1] + w[1];
    }
    (offsets, total)
}

impl TubeNet {
    /// Builds a network from explicit parameters in the flat layout.
    pub fn from_parts(n: usize, t_c: f64, hidden: &[usize], params: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("network", "output dimension must be >= 1"));
        }
        if !(t_c.is_finite() && t_c > 0.0) {
            return Err(Error::invalid("network", "t_c must be > 0"));
        }
        if hidden.is_empty() || hidden.contains(&0) {
            return Err(Error::invalid(
                "network",
                format!("hidden widths must be non-empty and >= 1, got {hidden:?}"),
            ));
        }
        let mut widths = Vec::with_capacity(hidden.len() + 2);
        widths.push(1);
        widths.extend_from_slice(hidden);
        widths.push(n + 1);
        let (offsets, total) = layer_offsets(&widths);
        if params.len() != total {
            return Err(Error::dim("network parameters", total, params.len()));
        }
        if !params.iter().all(|p| p.is_finite()) {
            return Err(Error::NonFinite("network parameters".into()));
        }
        Ok(TubeNet {
            n,
            t_c,
            widths,
            params,
            offsets,
        })
    }

    /// Seeded initialization: every weight and bias of a layer with fan-in `k`
    /// is drawn uniformly from `[-1/sqrt(k), 1/sqrt(k)]`.
    pub fn init(n: usize, t_c: f64, hidden: &[usize], seed: u64) -> Result<Self> {
        if hidden.is_empty() || hidden.contains(&0) {
            return Err(Error::invalid(
                "network",
                format!("hidden widths must be non-empty and >= 1, got {hidden:?}"),
            ));
        }
        let mut widths = vec![1];
        widths.extend_from_slice(hidden);
        widths.push(n + 1);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = Vec::new();
        for w in widths.windows(2) {
            let bound = 1.0 / (w[0] as f64).sqrt();
            params.extend((0..w[0] * w[1] + w[1]).map(|_| rng.gen_range(-bound..=bound)));
        }
        Self::from_parts(n, t_c, hidden, params)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn t_c(&self) -> f64 {
        self.t_c
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn hidden(&self) -> &[usize] {
        &self.widths[1..self.widths.len() - 1]
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.params.len() {
            return Err(Error::dim(
                "network parameters",
                self.params.len(),
                params.len(),
            ));
        }
        if !params.iter().all(|p| p.is_finite()) {
            return Err(Error::NonFinite("network parameters".into()));
        }
        self.params.copy_from_slice(params);
        Ok(())
    }

    pub fn num_layers(&self) -> usize {
        self.widths.len() - 1
    }

    pub fn layer(&self, l: usize) -> LayerView<'_> {
        let (cols, rows) = (self.widths[l], self.widths[l + 1]);
        let start = self.offsets[l];
        let split = start + rows * cols;
        LayerView {
            rows,
            cols,
            weights: &self.params[start..split],
            bias: &self.params[split..split + rows],
        }
    }

    /// Physical time to network input.
    pub fn normalize_time(&self, t: f64) -> f64 {
        2.0 * t / self.t_c - 1.0
    }

    /// `d s / d t`
    pub fn time_scale(&self) -> f64 {
        2.0 / self.t_c
    }

    fn forward_tape(&self, t: f64) -> Tape {
        let last = self.num_layers() - 1;
        let mut inputs = Vec::with_capacity(self.num_layers());
        let mut pre_tangents = Vec::with_capacity(last);
        let mut h = vec![Dual::variable(self.normalize_time(t))];
        for l in 0..=last {
            let layer = self.layer(l);
            let mut a: Vec<Dual> = Vec::with_capacity(layer.rows);
            for j in 0..layer.rows {
                let row = &layer.weights[j * layer.cols..(j + 1) * layer.cols];
                let mut acc = Dual::constant(layer.bias[j]);
                for (w, x) in row.iter().zip(&h) {
                    acc += *x * *w;
                }
                a.push(acc);
            }
            let next = if l < last {
                pre_tangents.push(a.iter().map(|d| d.tangent).collect());
                a.iter().map(|d| d.tanh()).collect()
            } else {
                a
            };
            inputs.push(std::mem::replace(&mut h, next));
        }
        Tape {
            inputs,
            pre_tangents,
            output: h,
        }
    }

    /// Dual-valued output: values are `(c, r)`, tangents are `d/ds`.
    pub fn forward_dual(&self, t: f64) -> Result<Vec<Dual>> {
        if !t.is_finite() {
            return Err(Error::NonFinite(format!("network input t = {t}")));
        }
        let out = self.forward_tape(t).output;
        if !out.iter().all(|d| d.is_finite()) {
            return Err(Error::NonFinite(format!("network output at t = {t}")));
        }
        Ok(out)
    }

    /// Tube center and radius at time `t`.
    pub fn forward(&self, t: f64) -> Result<(Vec<f64>, f64)> {
        let out = self.forward_dual(t)?;
        Ok((
            out[..self.n].iter().map(|d| d.value).collect(),
            out[self.n].value,
        ))
    }

    /// Exact physical-time derivatives `(dc/dt, dr/dt)`.
    pub fn time_derivative(&self, t: f64) -> Result<(Vec<f64>, f64)> {
        let out = self.forward_dual(t)?;
        let k = self.time_scale();
        Ok((
            out[..self.n].iter().map(|d| d.tangent * k).collect(),
            out[self.n].tangent * k,
        ))
    }

    pub fn slice(&self, t: f64) -> Result<TubeSlice> {
        let out = self.forward_dual(t)?;
        let k = self.time_scale();
        Ok(TubeSlice {
            center: out[..self.n].iter().map(|d| d.value).collect(),
            radius: out[self.n].value,
            center_rate: out[..self.n].iter().map(|d| d.tangent * k).collect(),
            radius_rate: out[self.n].tangent * k,
        })
    }

    /// Accumulates into `grad` the parameter gradient of a scalar whose
    /// adjoints with respect to the output values and output `s`-tangents are
    /// `value_adj` and `tangent_adj`.
    fn backprop(&self, tape: &Tape, value_adj: &[f64], tangent_adj: &[f64], grad: &mut [f64]) {
        let last = self.num_layers() - 1;
        let mut adj_v = value_adj.to_vec();
        let mut adj_t = tangent_adj.to_vec();
        for l in (0..=last).rev() {
            let layer = self.layer(l);
            // adj_v / adj_t arrive as adjoints of the layer *output*; convert
            // to pre-activation adjoints for hidden layers.
            if l < last {
                let out = &tape.inputs[l + 1];
                let pre_t = &tape.pre_tangents[l];
                for j in 0..layer.rows {
                    let s = out[j].value;
                    let ds = 1.0 - s * s;
                    let sigma_adj = adj_v[j] - 2.0 * s * pre_t[j] * adj_t[j];
                    adj_v[j] = sigma_adj * ds;
                    adj_t[j] *= ds;
                }
            }
            let input = &tape.inputs[l];
            let start = self.offsets[l];
            let split = start + layer.rows * layer.cols;
            for j in 0..layer.rows {
                let (av, at) = (adj_v[j], adj_t[j]);
                if av == 0.0 && at == 0.0 {
                    continue;
                }
                let row = &mut grad[start + j * layer.cols..start + (j + 1) * layer.cols];
                for (g, x) in row.iter_mut().zip(input) {
                    *g += av * x.value + at * x.tangent;
                }
                grad[split + j] += av;
            }
            if l > 0 {
                let mut next_v = vec![0.0; layer.cols];
                let mut next_t = vec![0.0; layer.cols];
                for j in 0..layer.rows {
                    let (av, at) = (adj_v[j], adj_t[j]);
                    if av == 0.0 && at == 0.0 {
                        continue;
                    }
                    let row = &layer.weights[j * layer.cols..(j + 1) * layer.cols];
                    for k in 0..layer.cols {
                        next_v[k] += row[k] * av;
                        next_t[k] += row[k] * at;
                    }
                }
                adj_v = next_v;
                adj_t = next_t;
            }
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(21 + 4 * self.widths.len() + 8 * self.params.len());
        out.extend_from_slice(MODEL_MAGIC);
        out.push(MODEL_VERSION);
        out.extend_from_slice(&(self.n as u32).to_le_bytes());
        out.extend_from_slice(&self.t_c.to_le_bytes());
        out.extend_from_slice(&(self.widths.len() as u32).to_le_bytes());
        for w in &self.widths {
            out.extend_from_slice(&(*w as u32).to_le_bytes());
        }
        for p in &self.params {
            out.extend_from_slice(&p.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MODEL_MAGIC {
            return Err(Error::Format("bad magic, not a tube model file".into()));
        }
        let version = r.take(1)?[0];
        if version != MODEL_VERSION {
            return Err(Error::Format(format!(
                "unsupported version {version}, expected {MODEL_VERSION}"
            )));
        }
        let n = r.u32()? as usize;
        let t_c = r.f64()?;
        let count = r.u32()? as usize;
        if count < 3 {
            return Err(Error::Format(format!("layer count {count} < 3")));
        }
        // Each width takes 4 bytes; reject absurd counts before allocating.
        if count > bytes.len() / 4 {
            return Err(Error::Format(format!(
                "length mismatch: {count} layers declared"
            )));
        }
        let widths = (0..count)
            .map(|_| r.u32().map(|w| w as usize))
            .collect::<Result<Vec<_>>>()?;
        if widths[0] != 1 || widths[count - 1] != n + 1 {
            return Err(Error::Format(format!(
                "widths {widths:?} inconsistent with n = {n}"
            )));
        }
        let (_, total) = layer_offsets(&widths);
        let remaining = bytes.len() - r.pos;
        if remaining != total * 8 {
            return Err(Error::Format(format!(
                "length mismatch: expected {} parameter bytes, found {remaining}",
                total * 8
            )));
        }
        let params = (0..total).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
        TubeNet::from_parts(n, t_c, &widths[1..count - 1], params)
            .map_err(|e| Error::Format(e.to_string()))
    }
}

struct Tape {
    /// Input to each layer; `inputs[l + 1]` is also the output of hidden layer `l`.
    inputs: Vec<Vec<Dual>>,
    /// Pre-activation tangents of the hidden layers.
    pre_tangents: Vec<Vec<f64>>,
    output: Vec<Dual>,
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, k: usize) -> Result<&'a [u8]> {
        if self.pos + k > self.bytes.len() {
            return Err(Error::Format(format!(
                "length mismatch: truncated at byte {} (need {k} more)",
                self.pos
            )));
        }
        let s = &self.bytes[self.pos..self.pos + k];
        self.pos += k;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

/// Margins, budgets and weights of the training loss.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    /// Required slack of the sampled residuals (negative).
    pub eta_hat: f64,
    pub lipschitz_center: f64,
    pub lipschitz_radius: f64,
    /// Space, radius, obstacle, center-rate, radius-rate.
    pub physics_weights: [f64; 5],
    /// Start center, start radius, target center, target radius.
    pub boundary_weights: [f64; 4],
}

/// Unweighted sub-losses and the weighted total.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub physics: [f64; 5],
    pub boundary: [f64; 4],
    pub total: f64,
}

impl LossBreakdown {
    fn add(&mut self, other: &LossBreakdown) {
        for i in 0..5 {
            self.physics[i] += other.physics[i];
        }
        for i in 0..4 {
            self.boundary[i] += other.boundary[i];
        }
    }

    fn weighted_total(&self, cfg: &LossConfig) -> f64 {
        let p: f64 = (0..5)
            .map(|i| cfg.physics_weights[i] * self.physics[i])
            .sum();
        let b: f64 = (0..4)
            .map(|i| cfg.boundary_weights[i] * self.boundary[i])
            .sum();
        p + b
    }

    pub const PHYSICS_NAMES: [&'static str; 5] = [
        "L_p1_space",
        "L_p2_radius",
        "L_p3_obstacle",
        "L_p4_center_rate",
        "L_p5_radius_rate",
    ];
    pub const BOUNDARY_NAMES: [&'static str; 4] = [
        "L_b1_start_center",
        "L_b2_start_radius",
        "L_b3_target_center",
        "L_b4_target_radius",
    ];
}

fn relu(x: f64) -> f64 {
    x.max(0.0)
}

/// Physics hinge terms at one collocation time. Returns the unweighted terms;
/// when `adj` is given, writes the weighted adjoints with respect to the
/// output values and `s`-tangents.
fn physics_point(
    net: &TubeNet,
    out: &[Dual],
    t: f64,
    scen: &TrasScenario,
    cfg: &LossConfig,
    adj: Option<(&mut [f64], &mut [f64])>,
) -> [f64; 5] {
    let n = net.n;
    let k = net.time_scale();
    let c: Vec<f64> = out[..n].iter().map(|d| d.value).collect();
    let r = out[n].value;
    let c_rate: Vec<f64> = out[..n].iter().map(|d| d.tangent * k).collect();
    let r_rate = out[n].tangent * k;
    let eta = cfg.eta_hat;
    let w = &cfg.physics_weights;

    let to_space: Vec<f64> = c
        .iter()
        .zip(&scen.space.center)
        .map(|(a, b)| a - b)
        .collect();
    let space_dist = norm(&to_space);
    let x1 = space_dist + r - scen.space.radius - eta;
    let x2 = -r + scen.r_d - eta;

    // Signed distance to the nearest obstacle. Outside every obstacle it is the
    // exact point-to-set distance; inside it keeps a gradient pointing out.
    let mut nearest: Option<(f64, Vec<f64>)> = None;
    for obs in &scen.obstacles {
        let (sd, g) = obs.at(t).signed_distance_grad(&c);
        if nearest.as_ref().is_none_or(|(best, _)| sd < *best) {
            nearest = Some((sd, g));
        }
    }
    let x3 = match &nearest {
        Some((sd, _)) => -sd + r - eta,
        None => f64::NEG_INFINITY,
    };
    let c_rate_norm = norm(&c_rate);
    let x4 = c_rate_norm - cfg.lipschitz_center;
    let x5 = r_rate.abs() - cfg.lipschitz_radius;

    if let Some((gv, gt)) = adj {
        if x1 > 0.0 {
            if space_dist > 0.0 {
                for i in 0..n {
                    gv[i] += w[0] * to_space[i] / space_dist;
                }
            }
            gv[n] += w[0];
        }
        if x2 > 0.0 {
            gv[n] -= w[1];
        }
        if x3 > 0.0 {
            let (_, g) = nearest.as_ref().unwrap();
            for i in 0..n {
                gv[i] -= w[2] * g[i];
            }
            gv[n] += w[2];
        }
        if x4 > 0.0 && c_rate_norm > 0.0 {
            for i in 0..n {
                gt[i] += w[3] * c_rate[i] / c_rate_norm * k;
            }
        }
        if x5 > 0.0 {
            gt[n] += w[4] * r_rate.signum() * k;
        }
    }
    [relu(x1), relu(x2), relu(x3), relu(x4), relu(x5)]
}

fn check_finite(terms: &[f64], names: &[&str], t: f64) -> Result<()> {
    for (v, name) in terms.iter().zip(names) {
        if !v.is_finite() {
            return Err(Error::NonFinite(format!("{name} at t = {t}")));
        }
    }
    Ok(())
}

struct Partial {
    loss: LossBreakdown,
    grad: Vec<f64>,
}

fn physics_chunk(
    net: &TubeNet,
    times: &[f64],
    scen: &TrasScenario,
    cfg: &LossConfig,
    with_grad: bool,
) -> Result<Partial> {
    let width = net.n + 1;
    let mut part = Partial {
        loss: LossBreakdown::default(),
        grad: if with_grad {
            vec![0.0; net.param_count()]
        } else {
            Vec::new()
        },
    };
    let mut gv = vec![0.0; width];
    let mut gt = vec![0.0; width];
    for &t in times {
        let tape = net.forward_tape(t);
        let terms = if with_grad {
            gv.iter_mut().for_each(|x| *x = 0.0);
            gt.iter_mut().for_each(|x| *x = 0.0);
            let terms = physics_point(net, &tape.output, t, scen, cfg, Some((&mut gv, &mut gt)));
            check_finite(&terms, &LossBreakdown::PHYSICS_NAMES, t)?;
            if gv.iter().chain(&gt).any(|x| *x != 0.0) {
                net.backprop(&tape, &gv, &gt, &mut part.grad);
            }
            terms
        } else {
            let terms = physics_point(net, &tape.output, t, scen, cfg, None);
            check_finite(&terms, &LossBreakdown::PHYSICS_NAMES, t)?;
            terms
        };
        for (acc, term) in part.loss.physics.iter_mut().zip(terms) {
            *acc += term;
        }
    }
    Ok(part)
}

/// Pairwise tree reduction in index order.
fn tree_reduce(mut parts: Vec<Partial>) -> Option<Partial> {
    while parts.len() > 1 {
        let mut next = Vec::with_capacity(parts.len().div_ceil(2));
        let mut it = parts.into_iter();
        while let Some(mut a) = it.next() {
            if let Some(b) = it.next() {
                a.loss.add(&b.loss);
                for (x, y) in a.grad.iter_mut().zip(&b.grad) {
                    *x += y;
                }
            }
            next.push(a);
        }
        parts = next;
    }
    parts.pop()
}

fn boundary_terms(
    net: &TubeNet,
    scen: &TrasScenario,
    cfg: &LossConfig,
    grad: Option<&mut [f64]>,
) -> Result<[f64; 4]> {
    let n = net.n;
    let ends = [(0.0, &scen.start, 0usize), (net.t_c, &scen.target, 2usize)];
    let mut terms = [0.0; 4];
    let mut grad = grad;
    for (t, ball, idx) in ends {
        let tape = net.forward_tape(t);
        let c: Vec<f64> = tape.output[..n].iter().map(|d| d.value).collect();
        let r = tape.output[n].value;
        let gap_c = dist(&c, &ball.center);
        terms[idx] = gap_c * gap_c;
        terms[idx + 1] = (r - ball.radius) * (r - ball.radius);
        check_finite(
            &terms[idx..idx + 2],
            &LossBreakdown::BOUNDARY_NAMES[idx..idx + 2],
            t,
        )?;
        if let Some(g) = grad.as_deref_mut() {
            let wc = cfg.boundary_weights[idx];
            let wr = cfg.boundary_weights[idx + 1];
            let mut gv: Vec<f64> = c
                .iter()
                .zip(&ball.center)
                .map(|(a, b)| 2.0 * wc * (a - b))
                .collect();
            gv.push(2.0 * wr * (r - ball.radius));
            net.backprop(&tape, &gv, &vec![0.0; n + 1], g);
        }
    }
    Ok(terms)
}

fn evaluate(
    net: &TubeNet,
    batch: &[f64],
    scen: &TrasScenario,
    cfg: &LossConfig,
    with_grad: bool,
) -> Result<(LossBreakdown, Vec<f64>)> {
    if batch.is_empty() {
        return Err(Error::invalid("batch", "collocation batch is empty"));
    }
    if scen.dim() != net.n {
        return Err(Error::dim("scenario vs network", net.n, scen.dim()));
    }
    let parts = batch
        .par_chunks(REDUCE_CHUNK)
        .map(|times| physics_chunk(net, times, scen, cfg, with_grad))
        .collect::<Result<Vec<_>>>()?;
    let Partial { mut loss, mut grad } = tree_reduce(parts).expect("non-empty batch");
    loss.boundary = boundary_terms(net, scen, cfg, with_grad.then_some(grad.as_mut_slice()))?;
    loss.total = loss.weighted_total(cfg);
    if !loss.total.is_finite() {
        return Err(Error::NonFinite("total loss".into()));
    }
    if let Some(i) = grad.iter().position(|g| !g.is_finite()) {
        return Err(Error::NonFinite(format!("loss gradient component {i}")));
    }
    Ok((loss, grad))
}

/// Training loss over `batch` (plus the boundary terms) and its exact
/// gradient with respect to the flat parameter vector.
pub fn loss_gradient(
    net: &TubeNet,
    batch: &[f64],
    scen: &TrasScenario,
    cfg: &LossConfig,
) -> Result<(LossBreakdown, Vec<f64>)> {
    evaluate(net, batch, scen, cfg, true)
}

/// As [`loss_gradient`] without the backward pass.
pub fn loss(
    net: &TubeNet,
    batch: &[f64],
    scen: &TrasScenario,
    cfg: &LossConfig,
) -> Result<LossBreakdown> {
    evaluate(net, batch, scen, cfg, false).map(|(l, _)| l)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tube::{Ball, Obstacle, Shape};

    fn net7() -> TubeNet {
        TubeNet::init(2, 10.0, &DEFAULT_HIDDEN, 7).unwrap()
    }

    #[test]
    fn init_is_deterministic_and_seed_sensitive() {
        assert_eq!(net7().params(), net7().params());
        let other = TubeNet::init(2, 10.0, &DEFAULT_HIDDEN, 8).unwrap();
        assert_ne!(net7().params(), other.params());
    }

    #[test]
    fn default_parameter_count() {
        assert_eq!(
            net7().param_count(),
            64 + 64 + 64 * 64 + 64 + 64 * 64 + 64 + 64 * 3 + 3
        );
        assert_eq!(net7().param_count(), 8643);
    }

    #[test]
    fn rejects_bad_widths() {
        assert!(TubeNet::init(2, 10.0, &[64, 0], 1).is_err());
        assert!(TubeNet::init(2, 10.0, &[], 1).is_err());
        assert!(TubeNet::from_parts(1, 1.0, &[1], vec![f64::NAN; 7]).is_err());
    }

    #[test]
    fn zero_weights_collapse_to_output_bias() {
        let mut net =
            TubeNet::from_parts(2, 4.0, &[3, 3], vec![0.0; 3 + 3 + 9 + 3 + 9 + 3]).unwrap();
        let mut p = net.params().to_vec();
        let k = p.len();
        p[k - 3..].copy_from_slice(&[1.0, -2.0, 0.5]);
        net.set_params(&p).unwrap();
        let (c, r) = net.forward(1.3).unwrap();
        assert_eq!((c, r), (vec![1.0, -2.0], 0.5));
        let (dc, dr) = net.time_derivative(1.3).unwrap();
        assert_eq!((dc, dr), (vec![0.0, 0.0], 0.0));
    }

    #[test]
    fn forward_is_repeatable() {
        let net = net7();
        assert_eq!(net.forward(5.0).unwrap(), net.forward(5.0 + 0.0).unwrap());
        assert!(net.forward(f64::NAN).is_err());
    }

    #[test]
    fn single_neuron_derivative_by_hand() {
        // hidden = [1], n = 1: out_j = v_j * tanh(w s + b) + b2_j
        let (w, b, v, t_c) = (1.7, -0.3, 0.8, 5.0);
        let net = TubeNet::from_parts(1, t_c, &[1], vec![w, b, v, 0.0, 0.1, 0.2]).unwrap();
        let t = 1.9;
        let s = 2.0 * t / t_c - 1.0;
        let th = (w * s + b).tanh();
        let expected = v * w * (1.0 - th * th) * (2.0 / t_c);
        let (dc, _) = net.time_derivative(t).unwrap();
        assert!((dc[0] - expected).abs() < 1e-15, "{} vs {expected}", dc[0]);
    }

    #[test]
    fn radius_hinge_by_hand() {
        // 1D, single point with c = 0, r = 0.1.
        let net = TubeNet::from_parts(1, 1.0, &[1], vec![0.0, 0.0, 0.0, 0.0, 0.0, 0.1]).unwrap();
        let scen = TrasScenario::new(
            Ball::new(vec![0.0], 10.0).unwrap(),
            Ball::new(vec![0.0], 0.5).unwrap(),
            Ball::new(vec![0.0], 0.5).unwrap(),
            1.0,
            0.3,
            vec![],
        )
        .unwrap();
        let cfg = LossConfig {
            eta_hat: -0.05,
            lipschitz_center: 1.0,
            lipschitz_radius: 1.0,
            physics_weights: [0.0, 1.0, 0.0, 0.0, 0.0],
            boundary_weights: [0.0; 4],
        };
        let l = loss(&net, &[0.5], &scen, &cfg).unwrap();
        assert!((l.physics[1] - 0.25).abs() < 1e-15);
        assert!((l.total - 0.25).abs() < 1e-15);
    }

    #[test]
    fn zero_weights_give_zero_loss_and_gradient() {
        let net = net7();
        let scen = TrasScenario::new(
            Ball::new(vec![0.0, 0.0], 10.0).unwrap(),
            Ball::new(vec![-3.0, 0.0], 0.5).unwrap(),
            Ball::new(vec![3.0, 0.0], 0.5).unwrap(),
            10.0,
            0.2,
            vec![Obstacle::fixed(Shape::Ball {
                center: vec![0.0, 3.0],
                radius: 1.0,
            })
            .unwrap()],
        )
        .unwrap();
        let cfg = LossConfig {
            eta_hat: -0.1,
            lipschitz_center: 1e-3,
            lipschitz_radius: 1e-3,
            physics_weights: [0.0; 5],
            boundary_weights: [0.0; 4],
        };
        let (l, g) = loss_gradient(&net, &[1.0, 2.0, 3.0], &scen, &cfg).unwrap();
        assert_eq!(l.total, 0.0);
        assert!(g.iter().all(|x| *x == 0.0));
    }

    #[test]
    fn serialization_round_trip_and_errors() {
        let net = net7();
        let bytes = net.to_bytes();
        assert_eq!(&bytes[..4], b"PNST");
        assert_eq!(bytes[4], 1);
        let back = TubeNet::from_bytes(&bytes).unwrap();
        assert_eq!(back, net);
        assert_eq!(back.to_bytes(), bytes);

        let err = TubeNet::from_bytes(&bytes[..bytes.len() - 3]).unwrap_err();
        assert!(err.to_string().contains("length"), "{err}");
        let mut bad = bytes.clone();
        bad[4] = 99;
        assert!(TubeNet::from_bytes(&bad)
            .unwrap_err()
            .to_string()
            .contains("version"));
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(TubeNet::from_bytes(&bad)
            .unwrap_err()
            .to_string()
            .contains("magic"));
        let mut long = bytes;
        long.push(0);
        assert!(TubeNet::from_bytes(&long).is_err());
    }
}
