//! Scenario files: one JSON document with the task, training, controller and
//! simulation settings.
//!
//! Optional settings resolve to their defaults on load and are written back
//! in full, so a saved bundle parses to itself.

use std::path::Path;

use pinstt_core::controller::{FunnelParams, GainSet};
use pinstt_core::neural::DEFAULT_HIDDEN;
use pinstt_core::simulator::{omnibot_model, quadrotor_model, ControllerConfig, Plant, SimConfig};
use pinstt_core::trainer::TrainConfig;
use pinstt_core::tube::TrasScenario;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Plant used by `simulate`, with its initial state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum PlantSpec {
    /// Initial pose `[x1, x2, heading]`; the heading stays fixed.
    Omnibot { pose: [f64; 3] },
    Quadrotor {
        position: [f64; 3],
        velocity: [f64; 3],
    },
}

impl PlantSpec {
    pub fn depth(&self) -> usize {
        match self {
            PlantSpec::Omnibot { .. } => 1,
            PlantSpec::Quadrotor { .. } => 2,
        }
    }

    pub fn block_dim(&self) -> usize {
        match self {
            PlantSpec::Omnibot { .. } => 2,
            PlantSpec::Quadrotor { .. } => 3,
        }
    }

    pub fn build(&self) -> pinstt_core::Result<Box<dyn Plant>> {
        Ok(match self {
            PlantSpec::Omnibot { pose } => Box::new(omnibot_model(*pose)?),
            PlantSpec::Quadrotor { position, velocity } => {
                Box::new(quadrotor_model(*position, *velocity))
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerSettings {
    /// One gain per stage.
    pub gains: Vec<f64>,
    pub funnel_q: f64,
    pub funnel_mu: f64,
    /// Explicit funnels; sized from the initial state when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub funnel: Option<FunnelParams>,
}

impl ControllerSettings {
    pub fn to_config(&self) -> ControllerConfig {
        ControllerConfig {
            gains: GainSet {
                kappa: self.gains.clone(),
            },
            funnel: self.funnel.clone(),
            funnel_q: self.funnel_q,
            funnel_mu: self.funnel_mu,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSettings {
    pub seed: u64,
    pub step: f64,
    /// Disturbance bound per block.
    pub w_max: Vec<f64>,
    pub plant: PlantSpec,
}

impl SimulationSettings {
    pub fn to_config(&self, t_c: f64) -> SimConfig {
        SimConfig {
            step: self.step,
            w_max: self.w_max.clone(),
            seed: self.seed,
            t_end: t_c,
        }
    }
}

/// Fully resolved scenario file.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Bundle {
    pub scenario: TrasScenario,
    pub training: TrainConfig,
    pub controller: ControllerSettings,
    pub simulation: SimulationSettings,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFile {
    scenario: TrasScenario,
    training: RawTraining,
    controller: RawController,
    simulation: RawSimulation,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTraining {
    seed: u64,
    epsilon: Option<f64>,
    lipschitz_center: Option<f64>,
    lipschitz_radius: Option<f64>,
    physics_weights: Option<[f64; 5]>,
    boundary_weights: Option<[f64; 4]>,
    batch_size: Option<usize>,
    learning_rate: Option<f64>,
    max_epochs: Option<usize>,
    tolerance: Option<f64>,
    hidden: Option<Vec<usize>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawController {
    gains: Option<Vec<f64>>,
    funnel_q: Option<f64>,
    funnel_mu: Option<f64>,
    funnel: Option<FunnelParams>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSimulation {
    seed: u64,
    step: Option<f64>,
    w_max: Option<Vec<f64>>,
    plant: PlantSpec,
}

/// Default simulation step as a fraction of `t_c`.
const DEFAULT_STEP_FRACTION: f64 = 1e-3;
const DEFAULT_W_MAX: f64 = 0.1;
const DEFAULT_FUNNEL_Q: f64 = 0.1;

fn resolve(raw: RawFile) -> Result<Bundle, String> {
    let scenario = raw.scenario;
    scenario.validate().map_err(|e| format!("scenario: {e}"))?;
    let t_c = scenario.t_c;

    let t = raw.training;
    let d = TrainConfig::defaults_for(&scenario, t.seed);
    let training = TrainConfig {
        epsilon: t.epsilon.unwrap_or(d.epsilon),
        lipschitz_center: t.lipschitz_center.unwrap_or(d.lipschitz_center),
        lipschitz_radius: t.lipschitz_radius.unwrap_or(d.lipschitz_radius),
        physics_weights: t.physics_weights.unwrap_or(d.physics_weights),
        boundary_weights: t.boundary_weights.unwrap_or(d.boundary_weights),
        batch_size: t.batch_size.unwrap_or(d.batch_size),
        learning_rate: t.learning_rate.unwrap_or(d.learning_rate),
        max_epochs: t.max_epochs.unwrap_or(d.max_epochs),
        tolerance: t.tolerance.unwrap_or(d.tolerance),
        hidden: t.hidden.unwrap_or_else(|| DEFAULT_HIDDEN.to_vec()),
        seed: t.seed,
    };
    training.validate().map_err(|e| format!("training: {e}"))?;
    if training.epsilon >= t_c {
        return Err(format!("training.epsilon: must be < t_c = {t_c}"));
    }

    let s = raw.simulation;
    let depth = s.plant.depth();
    if s.plant.block_dim() != scenario.dim() {
        return Err(format!(
            "simulation.plant: a {}-D plant cannot follow a {}-D scenario",
            s.plant.block_dim(),
            scenario.dim()
        ));
    }
    s.plant
        .build()
        .map_err(|e| format!("simulation.plant: {e}"))?;
    let simulation = SimulationSettings {
        seed: s.seed,
        step: s.step.unwrap_or(DEFAULT_STEP_FRACTION * t_c),
        w_max: s.w_max.unwrap_or_else(|| vec![DEFAULT_W_MAX; depth]),
        plant: s.plant,
    };
    simulation
        .to_config(t_c)
        .validate(depth)
        .map_err(|e| format!("simulation: {e}"))?;

    let c = raw.controller;
    let controller = ControllerSettings {
        gains: c.gains.unwrap_or_else(|| vec![1.0; depth]),
        funnel_q: c.funnel_q.unwrap_or(DEFAULT_FUNNEL_Q),
        funnel_mu: c.funnel_mu.unwrap_or(2.0 / t_c),
        funnel: c.funnel,
    };
    controller
        .to_config()
        .gains
        .validate(depth)
        .map_err(|e| format!("controller.gains: {e}"))?;
    if !(controller.funnel_q.is_finite() && controller.funnel_q > 0.0) {
        return Err("controller.funnel_q: must be > 0".into());
    }
    if !(controller.funnel_mu.is_finite() && controller.funnel_mu >= 0.0) {
        return Err("controller.funnel_mu: must be >= 0".into());
    }
    if let Some(f) = &controller.funnel {
        f.validate(depth, scenario.dim())
            .map_err(|e| format!("controller.funnel: {e}"))?;
    }

    Ok(Bundle {
        scenario,
        training,
        controller,
        simulation,
    })
}

/// Strict parse of a scenario document; errors name the offending field.
pub fn parse_scenario_str(text: &str) -> Result<Bundle, String> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let raw: RawFile = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        if path == "." {
            inner.to_string()
        } else {
            format!("{path}: {inner}")
        }
    })?;
    resolve(raw)
}

pub fn parse_scenario(path: &Path) -> Result<Bundle, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_scenario_str(&text).map_err(|msg| CliError::Scenario {
        path: path.display().to_string(),
        msg,
    })
}

impl Bundle {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("bundle serializes");
        s.push('\n');
        s
    }

    /// Replaces both seeds.
    pub fn override_seed(&mut self, seed: u64) {
        self.training.seed = seed;
        self.simulation.seed = seed;
    }
}
