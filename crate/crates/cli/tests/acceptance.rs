//! Acceptance suite: ten end-to-end criteria, one PASS/FAIL line each.
//!
//! Runs without the libtest harness so the report is always printed. Exits
//! non-zero if any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::{Duration, Instant};

use pinstt_cli::scenario::{parse_scenario, Bundle};
use pinstt_core::neural::{loss, loss_gradient, LossConfig, TubeNet};
use pinstt_core::simulator::{quadrotor_model, rk4_step, simulate, Plant};
use pinstt_core::trainer::collocation_grid;
use pinstt_core::tube::{point_to_set_distance, Motion, Obstacle, Shape};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

const TRAIN_BUDGET: Duration = Duration::from_secs(600);
const SIM_BUDGET: Duration = Duration::from_secs(10);

fn scenario_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("scenarios")
        .join(name)
}

fn pinstt(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_pinstt"));
    cmd.args(args).arg("--log-level").arg("warn");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("pinstt runs")
}

fn expect_exit(out: &Output, code: i32, what: &str) -> Result<(), String> {
    match out.status.code() {
        Some(c) if c == code => Ok(()),
        other => Err(format!(
            "{what}: exit {other:?}, expected {code}; stderr: {}",
            String::from_utf8_lossy(&out.stderr).trim()
        )),
    }
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).expect("report exists"))
        .expect("report is JSON")
}

fn check(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

struct Workspace {
    dir: tempfile::TempDir,
    omnibot_model: Option<PathBuf>,
    quadrotor_model: Option<PathBuf>,
}

impl Workspace {
    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }
}

/// Trajectory CSV columns re-read independently of the simulator's metrics.
struct CsvRun {
    rows: Vec<Vec<f64>>,
    header: Vec<String>,
}

impl CsvRun {
    fn load(path: &Path) -> Self {
        let text = std::fs::read_to_string(path).expect("trajectory exists");
        let mut lines = text.lines();
        let header = lines.next().unwrap().split(',').map(String::from).collect();
        let rows = lines
            .map(|l| {
                l.split(',')
                    .map(|v| v.parse().expect("numeric field"))
                    .collect()
            })
            .collect();
        CsvRun { rows, header }
    }

    fn col(&self, name: &str) -> usize {
        self.header
            .iter()
            .position(|h| h == name)
            .unwrap_or_else(|| panic!("column {name}"))
    }

    fn output(&self, row: usize, n: usize) -> Vec<f64> {
        (1..=n)
            .map(|i| self.rows[row][self.col(&format!("x_1_{i}"))])
            .collect()
    }
}

/// synth -> verify -> simulate through the binary, checking each artifact.
fn end_to_end(
    ws: &mut Workspace,
    file: &str,
    reach_radius: f64,
) -> Result<(PathBuf, String), String> {
    let scn = scenario_path(file);
    let scn_s = scn.to_str().unwrap();
    let bundle = parse_scenario(&scn).map_err(|e| e.to_string())?;
    let stem = file.trim_end_matches(".scn");
    let model = ws.path(&format!("{stem}.pnst"));
    let model_s = model.to_str().unwrap();

    let started = Instant::now();
    let out = pinstt(&["synth", scn_s, "-o", model_s], &[]);
    let train_time = started.elapsed();
    expect_exit(&out, 0, "synth")?;
    check(train_time <= TRAIN_BUDGET, || {
        format!("training took {train_time:?}")
    })?;
    // Re-evaluate the saved model's loss on the full collocation grid.
    let net = TubeNet::from_bytes(&std::fs::read(&model).unwrap()).map_err(|e| e.to_string())?;
    let grid = collocation_grid(bundle.scenario.t_c, bundle.training.epsilon)
        .map_err(|e| e.to_string())?;
    let total = loss(
        &net,
        &grid.points,
        &bundle.scenario,
        &bundle.training.loss_config(),
    )
    .map_err(|e| e.to_string())?
    .total;
    check(total <= 1e-4, || {
        format!("saved model loss {total:e} > 1e-4")
    })?;

    let cert_path = ws.path(&format!("{stem}.cert.json"));
    let out = pinstt(
        &["verify", model_s, scn_s, "-o", cert_path.to_str().unwrap()],
        &[],
    );
    expect_exit(&out, 0, "verify")?;
    let cert = read_json(&cert_path);
    let margin = cert["margin"].as_f64().unwrap();
    check(cert["pass"] == Value::Bool(true) && margin <= 0.0, || {
        format!("certificate: {cert}")
    })?;
    check(cert["audit"]["first_violation"].is_null(), || {
        "dense audit flagged a violation".into()
    })?;

    let sim_dir = ws.path(&format!("{stem}.sim"));
    let started = Instant::now();
    let out = pinstt(
        &["simulate", model_s, scn_s, "-o", sim_dir.to_str().unwrap()],
        &[],
    );
    let sim_time = started.elapsed();
    expect_exit(&out, 0, "simulate")?;
    check(sim_time <= SIM_BUDGET, || {
        format!("simulation took {sim_time:?}")
    })?;
    let metrics = read_json(&sim_dir.join("metrics.json"));

    let run = CsvRun::load(&sim_dir.join("trajectory.csv"));
    let n = bundle.scenario.dim();
    let (e1_col, clamp_col) = (run.col("e1"), run.col("clamp"));
    let max_e1 = run.rows.iter().map(|r| r[e1_col]).fold(0.0, f64::max);
    let clamps = run.rows.iter().filter(|r| r[clamp_col] != 0.0).count();
    let last = run.rows.len() - 1;
    let reach = dist(&run.output(last, n), &bundle.scenario.target.center);
    let t_col = run.col("t");
    let clearance = (0..run.rows.len())
        .map(|k| {
            bundle
                .scenario
                .unsafe_distance(&run.output(k, n), run.rows[k][t_col])
        })
        .fold(f64::INFINITY, f64::min);
    check(max_e1 < 1.0, || format!("max e1 {max_e1} >= 1"))?;
    check(clamps == 0, || format!("{clamps} clamped rows"))?;
    check(reach <= reach_radius, || {
        format!("reach error {reach} > {reach_radius}")
    })?;
    check(clearance > 0.0, || {
        format!("min clearance {clearance} <= 0")
    })?;
    check(metrics["success"] == Value::Bool(true), || {
        format!("metrics: {metrics}")
    })?;
    let w_bound = check_disturbances(&run, &bundle)?;

    let detail = format!(
        "train {:.1}s, loss {total:.2e}, margin {margin:.4}, sim {:.2}s, max e1 {max_e1:.4}, reach {reach:.4}, clearance {clearance:.4}, |w| <= {w_bound}",
        train_time.as_secs_f64(),
        sim_time.as_secs_f64()
    );
    Ok((model, detail))
}

fn check_disturbances(run: &CsvRun, bundle: &Bundle) -> Result<f64, String> {
    let n = bundle.scenario.dim();
    let mut bound = 0.0f64;
    for (b, w_max) in bundle.simulation.w_max.iter().enumerate() {
        for i in 1..=n {
            let c = run.col(&format!("w_{}_{i}", b + 1));
            for row in &run.rows {
                check(row[c].abs() <= *w_max, || {
                    format!("disturbance {} outside [-{w_max}, {w_max}]", row[c])
                })?;
            }
        }
        bound = bound.max(*w_max);
    }
    Ok(bound)
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt()
}

fn criterion_omnibot(ws: &mut Workspace) -> Result<String, String> {
    let (model, detail) = end_to_end(ws, "omnibot.scn", 0.25)?;
    ws.omnibot_model = Some(model);
    Ok(detail)
}

fn criterion_quadrotor(ws: &mut Workspace) -> Result<String, String> {
    let (model, detail) = end_to_end(ws, "quadrotor.scn", 0.8)?;
    ws.quadrotor_model = Some(model);
    Ok(detail)
}

fn criterion_gradient(_: &mut Workspace) -> Result<String, String> {
    let bundle = parse_scenario(&scenario_path("omnibot.scn")).map_err(|e| e.to_string())?;
    let grid = collocation_grid(bundle.scenario.t_c, bundle.training.epsilon).unwrap();
    // Rate budgets small enough that the rate penalties contribute.
    let cfg = LossConfig {
        lipschitz_center: 1e-3,
        lipschitz_radius: 1e-4,
        ..bundle.training.loss_config()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for seed in 0..5u64 {
        let net =
            TubeNet::init(2, bundle.scenario.t_c, &bundle.training.hidden, 1000 + seed).unwrap();
        let (base, grad) = loss_gradient(&net, &grid.points, &bundle.scenario, &cfg).unwrap();
        check(base.physics[3] > 0.0 && base.physics[4] > 0.0, || {
            "rate penalties inactive".into()
        })?;
        let theta = net.params().to_vec();
        let h = 1e-6 * theta.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        for _ in 0..20 {
            let i = rng.gen_range(0..theta.len());
            let eval = |delta: f64| {
                let mut p = theta.clone();
                p[i] += delta;
                let mut shifted = net.clone();
                shifted.set_params(&p).unwrap();
                loss(&shifted, &grid.points, &bundle.scenario, &cfg)
                    .unwrap()
                    .total
            };
            let fd = (eval(h) - eval(-h)) / (2.0 * h);
            let rel = (grad[i] - fd).abs() / grad[i].abs().max(fd.abs()).max(1e-6);
            check(rel <= 1e-4, || {
                format!("net {seed} coordinate {i}: analytic {} vs fd {fd}", grad[i])
            })?;
            worst = worst.max(rel);
        }
    }
    Ok(format!("100 coordinates, worst relative error {worst:.2e}"))
}

fn criterion_time_derivative(_: &mut Workspace) -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0.0f64;
    for k in 0..100u64 {
        let t_c = rng.gen_range(1.0..20.0);
        let n = rng.gen_range(1..=3);
        let net = TubeNet::init(n, t_c, &[64, 64, 64], 500 + k).unwrap();
        let t = rng.gen_range(0.0..t_c);
        let h = 1e-5 * t_c;
        let (dc, dr) = net.time_derivative(t).unwrap();
        let (cp, rp) = net.forward(t + h).unwrap();
        let (cm, rm) = net.forward(t - h).unwrap();
        let exact = dc.iter().copied().chain([dr]);
        let fd = cp
            .iter()
            .zip(&cm)
            .map(|(a, b)| (a - b) / (2.0 * h))
            .chain([(rp - rm) / (2.0 * h)]);
        for (a, b) in exact.zip(fd) {
            let rel = (a - b).abs() / a.abs().max(b.abs()).max(1e-3);
            check(rel <= 1e-6, || format!("pair {k}: dual {a} vs fd {b}"))?;
            worst = worst.max(rel);
        }
    }
    Ok(format!("100 pairs, worst relative error {worst:.2e}"))
}

fn random_obstacle(rng: &mut ChaCha8Rng, n: usize) -> Obstacle {
    let corner: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
    let shape = if rng.gen_bool(0.5) {
        Shape::Ball {
            center: corner,
            radius: rng.gen_range(0.05..2.0),
        }
    } else {
        let max = corner
            .iter()
            .map(|c| c + rng.gen_range(0.05..2.0))
            .collect();
        Shape::Box { min: corner, max }
    };
    let motion = if rng.gen_bool(0.5) {
        Motion::Static
    } else {
        Motion::Sinusoidal {
            axis: rng.gen_range(0..n),
            amplitude: rng.gen_range(0.0..1.5),
            omega: rng.gen_range(-3.0..3.0),
            phase: rng.gen_range(-3.0..3.0),
        }
    };
    Obstacle::new(shape, motion).unwrap()
}

fn criterion_distance_lipschitz(_: &mut Workspace) -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut tightest = f64::INFINITY;
    for k in 0..10_000 {
        let n = rng.gen_range(1..=3);
        let obs = random_obstacle(&mut rng, n);
        let y1: Vec<f64> = (0..n).map(|_| rng.gen_range(-6.0..6.0)).collect();
        let y2: Vec<f64> = (0..n).map(|_| rng.gen_range(-6.0..6.0)).collect();
        let t = rng.gen_range(0.0..20.0);
        let gap = (point_to_set_distance(&y1, &obs, t) - point_to_set_distance(&y2, &obs, t)).abs();
        let slack = dist(&y1, &y2) + 1e-9 - gap;
        check(slack >= 0.0, || {
            format!("tuple {k}: distance gap {gap} exceeds |y1 - y2|")
        })?;
        tightest = tightest.min(slack);
    }
    Ok(format!("10000 tuples, smallest slack {tightest:.2e}"))
}

fn criterion_adversarial(ws: &mut Workspace) -> Result<String, String> {
    // Radius 1 - 0.4 (tanh(400 (s + 0.03)) - tanh(400 (s - 0.03))) around
    // t = 0.5: at the nearest collocation points (t = 0.45, 0.55) the bump
    // has vanished, in between it drops to 0.2 < r_d.
    let (a, k, d) = (0.8, 400.0, 0.03);
    let params = vec![
        k,
        k,
        k * d,
        -k * d,
        0.0,
        0.0,
        0.0,
        0.0,
        -a / 2.0,
        a / 2.0,
        0.0,
        0.0,
        1.0,
    ];
    let net = TubeNet::from_parts(2, 1.0, &[2], params).unwrap();
    let model = ws.path("bump.pnst");
    std::fs::write(&model, net.to_bytes()).unwrap();
    let scn = ws.path("bump.scn");
    let doc = serde_json::json!({
        "scenario": {
            "space": {"center": [0.0, 0.0], "radius": 5.0},
            "start": {"center": [0.0, 0.0], "radius": 1.0},
            "target": {"center": [0.0, 0.0], "radius": 1.0},
            "t_c": 1.0, "r_d": 0.5, "obstacles": []
        },
        "training": {"seed": 0, "epsilon": 0.05, "lipschitz_center": 0.01, "lipschitz_radius": 4.0},
        "controller": {},
        "simulation": {"seed": 0, "plant": {"omnibot": {"pose": [0.0, 0.0, 0.0]}}}
    });
    std::fs::write(&scn, doc.to_string()).unwrap();

    let cert_path = ws.path("bump.cert.json");
    let out = pinstt(
        &[
            "verify",
            model.to_str().unwrap(),
            scn.to_str().unwrap(),
            "-o",
            cert_path.to_str().unwrap(),
        ],
        &[],
    );
    expect_exit(&out, 3, "verify on the bump tube")?;
    let cert = read_json(&cert_path);
    let worst = cert["collocation_worst"]["radius"]["value"]
        .as_f64()
        .unwrap();
    let eta_hat = cert["eta_hat"].as_f64().unwrap();
    check(worst <= eta_hat, || {
        format!("bump is visible at the collocation points ({worst} > {eta_hat})")
    })?;
    let margin = cert["margin"].as_f64().unwrap();
    let audit_hit = cert["audit"]["first_violation"].as_f64();
    check(margin > 0.0 || audit_hit.is_some(), || {
        format!("certificate: {cert}")
    })?;
    Ok(format!(
        "rejected: sampled residual {worst:.3} <= eta_hat {eta_hat:.3}, margin {margin:.3}, audit violation at t = {audit_hit:?}"
    ))
}

fn omnibot_model(ws: &mut Workspace) -> Result<PathBuf, String> {
    if let Some(m) = &ws.omnibot_model {
        return Ok(m.clone());
    }
    let scn = scenario_path("omnibot.scn");
    let model = ws.path("omnibot-fallback.pnst");
    let out = pinstt(
        &[
            "synth",
            scn.to_str().unwrap(),
            "-o",
            model.to_str().unwrap(),
        ],
        &[],
    );
    expect_exit(&out, 0, "synth")?;
    let out = pinstt(
        &["verify", model.to_str().unwrap(), scn.to_str().unwrap()],
        &[],
    );
    expect_exit(&out, 0, "verify")?;
    ws.omnibot_model = Some(model.clone());
    Ok(model)
}

fn criterion_barrier(ws: &mut Workspace) -> Result<String, String> {
    let model = omnibot_model(ws)?;
    let net = TubeNet::from_bytes(&std::fs::read(&model).unwrap()).unwrap();
    let mut bundle = parse_scenario(&scenario_path("omnibot.scn")).map_err(|e| e.to_string())?;
    bundle.simulation.step = 1e-3;
    bundle.simulation.w_max = vec![0.0];
    let slice0 = net.slice(0.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let starts: Vec<[f64; 3]> = (0..100)
        .map(|_| {
            let rho = rng.gen_range(0.0..=0.9) * slice0.radius;
            let angle = rng.gen_range(0.0..std::f64::consts::TAU);
            let heading = rng.gen_range(-1.2..1.2);
            [
                slice0.center[0] + rho * angle.cos(),
                slice0.center[1] + rho * angle.sin(),
                heading,
            ]
        })
        .collect();
    let ctrl = bundle.controller.to_config();
    let sim = bundle.simulation.to_config(bundle.scenario.t_c);
    let workers = std::thread::available_parallelism().map_or(4, |n| n.get());
    let results: Vec<Result<f64, String>> = std::thread::scope(|s| {
        let handles: Vec<_> = starts
            .chunks(starts.len().div_ceil(workers))
            .map(|chunk| {
                let (net, bundle, ctrl, sim) = (&net, &bundle, &ctrl, &sim);
                s.spawn(move || {
                    chunk
                        .iter()
                        .map(|pose| {
                            let plant = pinstt_core::simulator::omnibot_model(*pose)
                                .map_err(|e| e.to_string())?;
                            let (traj, m) = simulate(&plant, net, &bundle.scenario, ctrl, sim)
                                .map_err(|e| e.to_string())?;
                            check(traj.e1[0] <= 0.9 + 1e-12, || {
                                format!("start {pose:?}: e1(0) = {}", traj.e1[0])
                            })?;
                            check(m.max_e1 < 1.0 && m.clamp_count == 0, || {
                                format!("start {pose:?}: {m:?}")
                            })?;
                            Ok(m.max_e1)
                        })
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().unwrap())
            .collect()
    });
    let mut worst = 0.0f64;
    for r in results {
        worst = worst.max(r?);
    }
    Ok(format!(
        "100 starts with e1(0) <= 0.9 at h = 1e-3, largest e1 {worst:.4}"
    ))
}

fn criterion_rk4_order(_: &mut Workspace) -> Result<String, String> {
    // u(t) = [sin t, cos 2t, 1/2] has a closed-form double-integrator solution.
    let (p0, v0) = ([1.0, 1.0, 1.0], [0.5, 0.0, -0.5]);
    let quad = quadrotor_model(p0, v0);
    let u = |t: f64| [t.sin(), (2.0 * t).cos(), 0.5];
    let t_end: f64 = 10.0;
    let exact: Vec<f64> = {
        let t = t_end;
        let dv = [1.0 - t.cos(), (2.0 * t).sin() / 2.0, 0.5 * t];
        let dp = [t - t.sin(), (1.0 - (2.0 * t).cos()) / 4.0, 0.25 * t * t];
        (0..3)
            .map(|i| p0[i] + v0[i] * t + dp[i])
            .chain((0..3).map(|i| v0[i] + dv[i]))
            .collect()
    };
    let terminal_error = |steps: usize| {
        let h = t_end / steps as f64;
        let mut z = quad.initial_state();
        for k in 0..steps {
            z = rk4_step(
                |t, x| Ok(quad.derivative(x, &u(t), &[0.0; 6], t)),
                k as f64 * h,
                &z,
                h,
            )
            .unwrap();
        }
        dist(&z, &exact)
    };
    let errors: Vec<f64> = [50, 100, 200, 400]
        .iter()
        .map(|&s| terminal_error(s))
        .collect();
    let ratios: Vec<f64> = errors.windows(2).map(|w| w[0] / w[1]).collect();
    check(ratios.iter().all(|r| *r >= 8.0), || {
        format!("errors {errors:?}, ratios {ratios:?}")
    })?;
    Ok(format!(
        "h = 0.2 .. 0.025: errors {:.2e} .. {:.2e}, halving ratios {:.1?}",
        errors[0], errors[3], ratios
    ))
}

fn criterion_determinism(ws: &mut Workspace) -> Result<String, String> {
    let mut compared = Vec::new();
    for (file, first) in [
        ("omnibot.scn", ws.omnibot_model.clone()),
        ("quadrotor.scn", ws.quadrotor_model.clone()),
    ] {
        let scn = scenario_path(file);
        let scn_s = scn.to_str().unwrap();
        let stem = file.trim_end_matches(".scn");
        let first = match first {
            Some(m) => m,
            None => {
                let m = ws.path(&format!("{stem}-a.pnst"));
                expect_exit(
                    &pinstt(&["synth", scn_s, "-o", m.to_str().unwrap()], &[]),
                    0,
                    "synth",
                )?;
                m
            }
        };
        // The second run uses a single worker thread.
        let second = ws.path(&format!("{stem}-b.pnst"));
        let out = pinstt(
            &["synth", scn_s, "-o", second.to_str().unwrap()],
            &[("RAYON_NUM_THREADS", "1")],
        );
        expect_exit(&out, 0, "synth")?;
        check(
            std::fs::read(&first).unwrap() == std::fs::read(&second).unwrap(),
            || format!("{stem}: model files differ"),
        )?;
        let log_a = std::fs::read(first.with_extension("log.csv")).unwrap();
        let log_b = std::fs::read(second.with_extension("log.csv")).unwrap();
        check(log_a == log_b, || format!("{stem}: training logs differ"))?;

        let mut csvs = Vec::new();
        for run in ["x", "y"] {
            let dir = ws.path(&format!("{stem}-det-{run}"));
            let out = pinstt(
                &[
                    "simulate",
                    second.to_str().unwrap(),
                    scn_s,
                    "-o",
                    dir.to_str().unwrap(),
                ],
                &[],
            );
            expect_exit(&out, 0, "simulate")?;
            csvs.push(std::fs::read(dir.join("trajectory.csv")).unwrap());
        }
        check(csvs[0] == csvs[1], || {
            format!("{stem}: trajectories differ")
        })?;
        compared.push(stem);
    }
    Ok(format!(
        "{} model files and trajectories bit-identical (1 vs many threads)",
        compared.join(" and ")
    ))
}

fn criterion_covering(_: &mut Workspace) -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut tightest = f64::INFINITY;
    for k in 0..50 {
        let t_c = rng.gen_range(0.5..20.0);
        let eps = t_c * rng.gen_range(0.002..0.4);
        let grid = collocation_grid(t_c, eps).map_err(|e| e.to_string())?;
        let pts = &grid.points;
        let steps = (t_c / 1e-4).ceil() as usize;
        let mut worst = 0.0f64;
        for j in 0..=steps {
            let t = (j as f64 * 1e-4).min(t_c);
            let i = pts.partition_point(|p| *p < t);
            let right = pts.get(i).map_or(f64::INFINITY, |p| p - t);
            let left = if i > 0 { t - pts[i - 1] } else { f64::INFINITY };
            worst = worst.max(right.min(left));
        }
        check(worst <= eps, || {
            format!("pair {k} (t_c {t_c}, eps {eps}): gap {worst}")
        })?;
        tightest = tightest.min(eps - worst);
    }
    Ok(format!(
        "50 (t_c, eps) pairs covered, smallest slack {tightest:.2e}"
    ))
}

type Criterion = fn(&mut Workspace) -> Result<String, String>;

fn main() {
    let criteria: [(&str, Criterion); 10] = [
        ("omnibot end-to-end", criterion_omnibot),
        ("quadrotor end-to-end", criterion_quadrotor),
        ("loss gradient vs finite differences", criterion_gradient),
        (
            "time derivative vs finite differences",
            criterion_time_derivative,
        ),
        ("distance is 1-Lipschitz", criterion_distance_lipschitz),
        ("adversarial tube rejected", criterion_adversarial),
        ("controller barrier from 100 starts", criterion_barrier),
        ("RK4 fourth-order convergence", criterion_rk4_order),
        ("bitwise determinism", criterion_determinism),
        ("collocation covering", criterion_covering),
    ];
    let mut ws = Workspace {
        dir: tempfile::tempdir().expect("temp dir"),
        omnibot_model: None,
        quadrotor_model: None,
    };
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let started = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(|| run(&mut ws))).unwrap_or_else(|p| {
            Err(format!(
                "panicked: {:?}",
                p.downcast_ref::<String>()
                    .map(String::as_str)
                    .or(p.downcast_ref::<&str>().copied())
            ))
        });
        let secs = started.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("criterion {:>2} PASS  {name} [{secs:.1}s]: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name} [{secs:.1}s]: {why}", i + 1);
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
