//! Geometry of the reach-avoid-stay problem: balls, moving obstacles and the
//! residual functions whose non-positivity makes a time-varying ball a valid
//! spatiotemporal tube.
//!
//! Every residual follows the same sign convention: a value `<= eta` means the
//! condition holds with margin `-eta`. A tube is valid over a time interval
//! when all residuals are `<= 0` there.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub(crate) fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Closed Euclidean ball `{x : |x - center| <= radius}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Ball {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl Ball {
    pub fn new(center: Vec<f64>, radius: f64) -> Result<Self> {
        let ball = Ball { center, radius };
        ball.validate("ball")?;
        Ok(ball)
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub(crate) fn validate(&self, what: &str) -> Result<()> {
        if self.center.is_empty() {
            return Err(Error::invalid(what, "center must be non-empty"));
        }
        if !self.center.iter().all(|x| x.is_finite()) {
            return Err(Error::invalid(what, "center must be finite"));
        }
        if !(self.radius.is_finite() && self.radius > 0.0) {
            return Err(Error::invalid(
                what,
                format!("radius must be > 0, got {}", self.radius),
            ));
        }
        Ok(())
    }

    pub fn contains_point(&self, x: &[f64]) -> bool {
        dist(x, &self.center) <= self.radius
    }

    /// Ball-in-ball containment: `|c_self - c_outer| + r_self <= r_outer`.
    pub fn is_within(&self, outer: &Ball) -> bool {
        dist(&self.center, &outer.center) + self.radius <= outer.radius
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Shape {
    Ball { center: Vec<f64>, radius: f64 },
    Box { min: Vec<f64>, max: Vec<f64> },
}

impl Shape {
    pub fn dim(&self) -> usize {
        match self {
            Shape::Ball { center, .. } => center.len(),
            Shape::Box { min, .. } => min.len(),
        }
    }

    fn translated(&self, offset: &[f64]) -> Shape {
        let add = |v: &[f64]| v.iter().zip(offset).map(|(a, b)| a + b).collect();
        match self {
            Shape::Ball { center, radius } => Shape::Ball {
                center: add(center),
                radius: *radius,
            },
            Shape::Box { min, max } => Shape::Box {
                min: add(min),
                max: add(max),
            },
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            Shape::Ball { center, radius } => dist(x, center) <= *radius,
            Shape::Box { min, max } => x
                .iter()
                .zip(min.iter().zip(max))
                .all(|(xi, (lo, hi))| *lo <= *xi && *xi <= *hi),
        }
    }

    /// Euclidean distance from `x` to the set; zero inside.
    pub fn distance(&self, x: &[f64]) -> f64 {
        match self {
            Shape::Ball { center, radius } => (dist(x, center) - radius).max(0.0),
            Shape::Box { min, max } => x
                .iter()
                .zip(min.iter().zip(max))
                .map(|(xi, (lo, hi))| {
                    let gap = xi - xi.clamp(*lo, *hi);
                    gap * gap
                })
                .sum::<f64>()
                .sqrt(),
        }
    }

    /// Signed distance (negative inside) and its gradient with respect to `x`.
    ///
    /// Outside the set this coincides with [`Shape::distance`]. The gradient is
    /// a unit vector except at the degenerate points (ball center, box medial
    /// set ties) where an arbitrary valid subgradient is returned.
    pub fn signed_distance_grad(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let n = x.len();
        match self {
            Shape::Ball { center, radius } => {
                let diff: Vec<f64> = x.iter().zip(center).map(|(a, b)| a - b).collect();
                let d = norm(&diff);
                let grad = if d > 0.0 {
                    diff.iter().map(|v| v / d).collect()
                } else {
                    vec![0.0; n]
                };
                (d - radius, grad)
            }
            Shape::Box { min, max } => {
                let gap: Vec<f64> = x
                    .iter()
                    .zip(min.iter().zip(max))
                    .map(|(xi, (lo, hi))| xi - xi.clamp(*lo, *hi))
                    .collect();
                let d = norm(&gap);
                if d > 0.0 {
                    return (d, gap.iter().map(|v| v / d).collect());
                }
                // Inside: distance to the nearest face.
                let mut best = f64::INFINITY;
                let mut grad = vec![0.0; n];
                for i in 0..n {
                    let to_lo = x[i] - min[i];
                    let to_hi = max[i] - x[i];
                    if to_lo < best {
                        best = to_lo;
                        grad = vec![0.0; n];
                        grad[i] = -1.0;
                    }
                    if to_hi < best {
                        best = to_hi;
                        grad = vec![0.0; n];
                        grad[i] = 1.0;
                    }
                }
                (-best, grad)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Motion {
    Static,
    /// Translation by `amplitude * sin(omega * t + phase)` along one axis.
    Sinusoidal {
        axis: usize,
        amplitude: f64,
        omega: f64,
        phase: f64,
    },
}

/// A time-varying unsafe region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Obstacle {
    pub shape: Shape,
    pub motion: Motion,
}

impl Obstacle {
    pub fn new(shape: Shape, motion: Motion) -> Result<Self> {
        let obs = Obstacle { shape, motion };
        obs.validate()?;
        Ok(obs)
    }

    pub fn fixed(shape: Shape) -> Result<Self> {
        Self::new(shape, Motion::Static)
    }

    pub fn dim(&self) -> usize {
        self.shape.dim()
    }

    pub(crate) fn validate(&self) -> Result<()> {
        match &self.shape {
            Shape::Ball { center, radius } => {
                if center.is_empty() || !center.iter().all(|x| x.is_finite()) {
                    return Err(Error::invalid("obstacle", "ball center must be finite"));
                }
                if !(radius.is_finite() && *radius > 0.0) {
                    return Err(Error::invalid("obstacle", "ball radius must be > 0"));
                }
            }
            Shape::Box { min, max } => {
                if min.is_empty() || min.len() != max.len() {
                    return Err(Error::dim("obstacle box corners", min.len(), max.len()));
                }
                if !min
                    .iter()
                    .zip(max)
                    .all(|(lo, hi)| lo.is_finite() && hi.is_finite() && lo < hi)
                {
                    return Err(Error::invalid(
                        "obstacle",
                        "box min must be < max componentwise",
                    ));
                }
            }
        }
        if let Motion::Sinusoidal {
            axis,
            amplitude,
            omega,
            phase,
        } = &self.motion
        {
            if *axis >= self.dim() {
                return Err(Error::invalid(
                    "obstacle",
                    format!(
                        "motion axis {axis} out of range for dimension {}",
                        self.dim()
                    ),
                ));
            }
            if !(amplitude.is_finite() && *amplitude >= 0.0) {
                return Err(Error::invalid("obstacle", "amplitude must be >= 0"));
            }
            if !omega.is_finite() || !phase.is_finite() {
                return Err(Error::invalid("obstacle", "omega and phase must be finite"));
            }
        }
        Ok(())
    }

    /// Translation applied to the base shape at time `t`.
    pub fn offset_at(&self, t: f64) -> Vec<f64> {
        let mut offset = vec![0.0; self.dim()];
        if let Motion::Sinusoidal {
            axis,
            amplitude,
            omega,
            phase,
        } = &self.motion
        {
            offset[*axis] = amplitude * (omega * t + phase).sin();
        }
        offset
    }

    /// The obstacle's set at time `t`.
    pub fn at(&self, t: f64) -> Shape {
        match self.motion {
            Motion::Static => self.shape.clone(),
            Motion::Sinusoidal { .. } => self.shape.translated(&self.offset_at(t)),
        }
    }

    /// Reference position at time `t`: the ball center, or the concatenated
    /// `[min, max]` corners of a box.
    pub fn center_at(&self, t: f64) -> Vec<f64> {
        match self.at(t) {
            Shape::Ball { center, .. } => center,
            Shape::Box { mut min, max } => {
                min.extend(max);
                min
            }
        }
    }

    pub fn distance(&self, x: &[f64], t: f64) -> f64 {
        self.at(t).distance(x)
    }

    pub fn contains(&self, x: &[f64], t: f64) -> bool {
        self.at(t).contains(x)
    }
}

/// Exact distance from `x` to obstacle `obs` at time `t`.
pub fn point_to_set_distance(x: &[f64], obs: &Obstacle, t: f64) -> f64 {
    obs.distance(x, t)
}

/// A temporal reach-avoid-stay task with its sets represented by balls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrasScenario {
    pub space: Ball,
    pub start: Ball,
    pub target: Ball,
    /// Prescribed arrival time.
    pub t_c: f64,
    /// Lower bound on the tube radius.
    pub r_d: f64,
    #[serde(default)]
    pub obstacles: Vec<Obstacle>,
}

impl TrasScenario {
    pub fn new(
        space: Ball,
        start: Ball,
        target: Ball,
        t_c: f64,
        r_d: f64,
        obstacles: Vec<Obstacle>,
    ) -> Result<Self> {
        let scen = TrasScenario {
            space,
            start,
            target,
            t_c,
            r_d,
            obstacles,
        };
        scen.validate()?;
        Ok(scen)
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    pub fn validate(&self) -> Result<()> {
        self.space.validate("space")?;
        self.start.validate("start")?;
        self.target.validate("target")?;
        let n = self.dim();
        for (name, b) in [("start", &self.start), ("target", &self.target)] {
            if b.dim() != n {
                return Err(Error::dim(format!("{name} center"), n, b.dim()));
            }
        }
        if !(self.t_c.is_finite() && self.t_c > 0.0) {
            return Err(Error::invalid("t_c", "prescribed time must be > 0"));
        }
        if !(self.r_d.is_finite() && self.r_d > 0.0) {
            return Err(Error::invalid("r_d", "minimum radius must be > 0"));
        }
        if !self.start.is_within(&self.space) {
            return Err(Error::invalid(
                "start",
                "start ball is not contained in space",
            ));
        }
        if !self.target.is_within(&self.space) {
            return Err(Error::invalid(
                "target",
                "target ball is not contained in space",
            ));
        }
        if self.r_d > self.start.radius.min(self.target.radius) {
            return Err(Error::invalid(
                "r_d",
                format!(
                    "minimum radius {} exceeds min(start radius, target radius) = {}",
                    self.r_d,
                    self.start.radius.min(self.target.radius)
                ),
            ));
        }
        for (j, obs) in self.obstacles.iter().enumerate() {
            obs.validate().map_err(|e| match e {
                Error::Invalid { reason, .. } => Error::invalid(format!("obstacles[{j}]"), reason),
                other => other,
            })?;
            if obs.dim() != n {
                return Err(Error::dim(format!("obstacles[{j}]"), n, obs.dim()));
            }
            if obs.distance(&self.start.center, 0.0) <= self.start.radius {
                return Err(Error::invalid(
                    format!("obstacles[{j}]"),
                    "intersects the start ball at t = 0",
                ));
            }
            if obs.distance(&self.target.center, self.t_c) <= self.target.radius {
                return Err(Error::invalid(
                    format!("obstacles[{j}]"),
                    "intersects the target ball at t = t_c",
                ));
            }
        }
        Ok(())
    }

    /// Distance from `x` to the union of all obstacles at time `t`
    /// (`+inf` without obstacles).
    pub fn unsafe_distance(&self, x: &[f64], t: f64) -> f64 {
        self.obstacles
            .iter()
            .map(|o| o.distance(x, t))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Tube state at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct TubeSlice {
    pub center: Vec<f64>,
    pub radius: f64,
    pub center_rate: Vec<f64>,
    pub radius_rate: f64,
}

impl TubeSlice {
    /// A slice with zero rates, for residual evaluation where rates are unused.
    pub fn at_rest(center: Vec<f64>, radius: f64) -> Self {
        let n = center.len();
        TubeSlice {
            center,
            radius,
            center_rate: vec![0.0; n],
            radius_rate: 0.0,
        }
    }

    pub fn contains(&self, y: &[f64]) -> bool {
        dist(y, &self.center) <= self.radius
    }
}

/// Safety residuals of one tube slice; each must be `<= eta`.
#[derive(Debug, Clone, PartialEq)]
pub struct RasResiduals {
    /// `|c - c_Y| + r - r_Y`
    pub space: f64,
    /// `-r + r_d`
    pub radius: f64,
    /// `-d(c, U_j(t)) + r` per obstacle.
    pub obstacles: Vec<f64>,
}

impl RasResiduals {
    /// Obstacle residual against the union of obstacles (`-inf` when none).
    pub fn obstacle_worst(&self) -> f64 {
        self.obstacles
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn worst(&self) -> f64 {
        self.space.max(self.radius).max(self.obstacle_worst())
    }
}

pub fn ras_residuals(slice: &TubeSlice, scen: &TrasScenario, t: f64) -> RasResiduals {
    let c = &slice.center;
    let r = slice.radius;
    RasResiduals {
        space: dist(c, &scen.space.center) + r - scen.space.radius,
        radius: -r + scen.r_d,
        obstacles: scen
            .obstacles
            .iter()
            .map(|o| -o.distance(c, t) + r)
            .collect(),
    }
}

/// Mismatch between the tube ends and the start/target balls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryGaps {
    pub start_center: f64,
    pub start_radius: f64,
    pub target_center: f64,
    pub target_radius: f64,
}

impl BoundaryGaps {
    pub fn max(&self) -> f64 {
        self.start_center
            .max(self.start_radius)
            .max(self.target_center)
            .max(self.target_radius)
    }
}

/// Gaps between `(c(0), r(0))`, `(c(t_c), r(t_c))` and the start and target balls.
pub fn boundary_residuals(
    initial: (&[f64], f64),
    terminal: (&[f64], f64),
    scen: &TrasScenario,
) -> BoundaryGaps {
    BoundaryGaps {
        start_center: dist(initial.0, &scen.start.center),
        start_radius: (initial.1 - scen.start.radius).abs(),
        target_center: dist(terminal.0, &scen.target.center),
        target_radius: (terminal.1 - scen.target.radius).abs(),
    }
}
