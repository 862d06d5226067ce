//! Static SVG rendering of a run: the safe space, start and target, obstacles
//! at a few times, tube slices and the output path. 3-D scenarios are drawn
//! as three axis-pair projections.

use std::fmt::Write;

use pinstt_core::neural::TubeNet;
use pinstt_core::tube::{Shape, TrasScenario};

use crate::CliError;

const PANEL: f64 = 420.0;
const INSET: f64 = 30.0;
const OBSTACLE_SNAPSHOTS: usize = 5;
const TUBE_SNAPSHOTS: usize = 21;
const MAX_PATH_POINTS: usize = 2000;

/// Times and outputs `y = x_1` read back from a trajectory CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct PlotTrajectory {
    pub times: Vec<f64>,
    pub outputs: Vec<Vec<f64>>,
}

pub fn read_trajectory(text: &str, n: usize) -> Result<PlotTrajectory, String> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| e.to_string())?.clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| format!("missing column `{name}`"))
    };
    let t_col = column("t")?;
    let y_cols = (1..=n)
        .map(|i| column(&format!("x_1_{i}")))
        .collect::<Result<Vec<_>, _>>()?;
    let mut traj = PlotTrajectory {
        times: Vec::new(),
        outputs: Vec::new(),
    };
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| e.to_string())?;
        let field = |c: usize| -> Result<f64, String> {
            record
                .get(c)
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| format!("row {}: bad value in column {}", row + 1, &headers[c]))
        };
        traj.times.push(field(t_col)?);
        traj.outputs
            .push(y_cols.iter().map(|&c| field(c)).collect::<Result<_, _>>()?);
    }
    if traj.times.is_empty() {
        return Err("no rows".into());
    }
    Ok(traj)
}

/// Maps world coordinates of one axis pair into a square panel.
struct Panel {
    axes: (usize, usize),
    x0: f64,
    lo: (f64, f64),
    span: f64,
}

impl Panel {
    fn px(&self, x: f64) -> f64 {
        self.x0 + INSET + (x - self.lo.0) / self.span * (PANEL - 2.0 * INSET)
    }

    fn py(&self, y: f64) -> f64 {
        PANEL - INSET - (y - self.lo.1) / self.span * (PANEL - 2.0 * INSET)
    }

    fn len(&self, d: f64) -> f64 {
        d / self.span * (PANEL - 2.0 * INSET)
    }

    fn circle(&self, center: &[f64], radius: f64, style: &str) -> String {
        let (a, b) = self.axes;
        format!(
            "<circle cx=\"{:.3}\" cy=\"{:.3}\" r=\"{:.3}\" {style}/>\n",
            self.px(center[a]),
            self.py(center[b]),
            self.len(radius)
        )
    }

    /// Whether a projected shape covers the whole view.
    fn covers_view(&self, shape: &Shape) -> bool {
        let (a, b) = self.axes;
        match shape {
            Shape::Box { min, max } => {
                min[a] <= self.lo.0
                    && max[a] >= self.lo.0 + self.span
                    && min[b] <= self.lo.1
                    && max[b] >= self.lo.1 + self.span
            }
            Shape::Ball { .. } => false,
        }
    }

    fn shape(&self, shape: &Shape, style: &str) -> String {
        if self.covers_view(shape) {
            return String::new();
        }
        match shape {
            Shape::Ball { center, radius } => self.circle(center, *radius, style),
            Shape::Box { min, max } => {
                let (a, b) = self.axes;
                format!(
                    "<rect x=\"{:.3}\" y=\"{:.3}\" width=\"{:.3}\" height=\"{:.3}\" {style}/>\n",
                    self.px(min[a]),
                    self.py(max[b]),
                    self.len(max[a] - min[a]),
                    self.len(max[b] - min[b])
                )
            }
        }
    }
}

fn axis_pairs(n: usize) -> Option<Vec<(usize, usize)>> {
    match n {
        2 => Some(vec![(0, 1)]),
        3 => Some(vec![(0, 1), (0, 2), (1, 2)]),
        _ => None,
    }
}

pub fn render(
    scen: &TrasScenario,
    traj: &PlotTrajectory,
    net: Option<&TubeNet>,
) -> Result<String, CliError> {
    let n = scen.dim();
    let pairs = axis_pairs(n).ok_or_else(|| {
        CliError::Runtime(format!(
            "plotting supports 2-D and 3-D scenarios, got {n}-D"
        ))
    })?;
    let width = PANEL * pairs.len() as f64;
    let mut svg = String::new();
    let _ = writeln!(svg, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{PANEL}" viewBox="0 0 {width} {PANEL}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(
        svg,
        r#"<rect width="{width}" height="{PANEL}" fill="white"/>"#
    );

    let slices = match net {
        Some(net) => (0..TUBE_SNAPSHOTS)
            .map(|k| net.forward(scen.t_c * k as f64 / (TUBE_SNAPSHOTS - 1) as f64))
            .collect::<pinstt_core::Result<Vec<_>>>()?,
        None => Vec::new(),
    };
    let stride = traj.times.len().div_ceil(MAX_PATH_POINTS).max(1);

    for (p, &(a, b)) in pairs.iter().enumerate() {
        let span = 2.2 * scen.space.radius;
        let panel = Panel {
            axes: (a, b),
            x0: p as f64 * PANEL,
            lo: (
                scen.space.center[a] - span / 2.0,
                scen.space.center[b] - span / 2.0,
            ),
            span,
        };
        let clip = format!("panel{p}");
        let _ = writeln!(
            svg,
            r#"<clipPath id="{clip}"><rect x="{:.3}" y="{INSET}" width="{:.3}" height="{:.3}"/></clipPath>"#,
            panel.x0 + INSET,
            PANEL - 2.0 * INSET,
            PANEL - 2.0 * INSET
        );
        let _ = writeln!(svg, r#"<g clip-path="url(#{clip})">"#);
        svg.push_str(&panel.circle(
            &scen.space.center,
            scen.space.radius,
            r##"fill="#f7f7f7" stroke="#999""##,
        ));
        for obs in &scen.obstacles {
            let snapshots = if matches!(obs.motion, pinstt_core::tube::Motion::Static) {
                1
            } else {
                OBSTACLE_SNAPSHOTS
            };
            for k in 0..snapshots {
                let t = if snapshots == 1 {
                    0.0
                } else {
                    scen.t_c * k as f64 / (snapshots - 1) as f64
                };
                let opacity = if snapshots == 1 {
                    0.6
                } else {
                    0.15 + 0.45 * k as f64 / (snapshots - 1) as f64
                };
                svg.push_str(&panel.shape(
                    &obs.at(t),
                    &format!(r##"fill="#d9534f" fill-opacity="{opacity:.2}" stroke="none""##),
                ));
            }
        }
        svg.push_str(&panel.circle(
            &scen.start.center,
            scen.start.radius,
            r##"fill="#5cb85c" fill-opacity="0.4" stroke="#3d8b3d""##,
        ));
        svg.push_str(&panel.circle(
            &scen.target.center,
            scen.target.radius,
            r##"fill="#f0ad4e" fill-opacity="0.4" stroke="#c77c0e""##,
        ));
        for (c, r) in &slices {
            svg.push_str(&panel.circle(
                c,
                *r,
                r##"fill="none" stroke="#337ab7" stroke-opacity="0.6""##,
            ));
        }
        let mut points = String::new();
        for k in (0..traj.times.len())
            .step_by(stride)
            .chain(std::iter::once(traj.times.len() - 1))
        {
            let y = &traj.outputs[k];
            let _ = write!(points, "{:.3},{:.3} ", panel.px(y[a]), panel.py(y[b]));
        }
        let _ = writeln!(
            svg,
            r#"<polyline points="{}" fill="none" stroke="black" stroke-width="1.5"/>"#,
            points.trim_end()
        );
        let _ = writeln!(svg, "</g>");
        let _ = writeln!(
            svg,
            r##"<rect x="{:.3}" y="{INSET}" width="{:.3}" height="{:.3}" fill="none" stroke="#333"/>"##,
            panel.x0 + INSET,
            PANEL - 2.0 * INSET,
            PANEL - 2.0 * INSET
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.3}" y="20" text-anchor="middle">x{} vs x{}</text>"#,
            panel.x0 + PANEL / 2.0,
            b + 1,
            a + 1
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.3}" y="{:.3}" text-anchor="middle">x{}</text>"#,
            panel.x0 + PANEL / 2.0,
            PANEL - 10.0,
            a + 1
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.3}" y="{:.3}" text-anchor="middle" transform="rotate(-90 {:.3} {:.3})">x{}</text>"#,
            panel.x0 + 15.0,
            PANEL / 2.0,
            panel.x0 + 15.0,
            PANEL / 2.0,
            b + 1
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}
