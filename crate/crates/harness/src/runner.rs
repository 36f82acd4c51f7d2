//! Scenario execution: variant expansion, batched rollouts, artifact
//! emission and metric aggregation.

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use nalgebra::DVector;

use fabrics::kinematics::PlanarArm;
use fabrics::runtime::{
    detect_convergence, rollout, run_batch, IntegratorConfig, Method, Termination, Trajectory,
};

use crate::config::{
    echo_scenario, MethodName, ObstacleMetricName, ScenarioConfig, StyleName, TermConfig,
};
use crate::csvio::{write_trajectory, write_xy};
use crate::metrics::{
    path_difference, summarize, MetricSpace, MetricsReport, PathPair, RolloutMetrics,
};
use crate::render::{render_scene, SceneSketch};
use crate::system::build_system;

#[derive(Debug, Clone, PartialEq)]
pub struct VariantSpec {
    pub style: StyleName,
    pub speed: Option<f64>,
    pub obstacle_metric: Option<ObstacleMetricName>,
    pub label: String,
}

fn metric_label(m: ObstacleMetricName) -> &'static str {
    match m {
        ObstacleMetricName::PositionOnly => "posonly",
        ObstacleMetricName::VelocityGated => "gated",
    }
}

/// Expands the run matrix: styles × speeds × obstacle metrics.
pub fn expand_variants(cfg: &ScenarioConfig) -> Vec<VariantSpec> {
    let speeds: Vec<Option<f64>> = if cfg.variants.speeds.is_empty() {
        vec![None]
    } else {
        cfg.variants.speeds.iter().copied().map(Some).collect()
    };
    let metrics: Vec<Option<ObstacleMetricName>> = if cfg.variants.obstacle_metrics.is_empty() {
        vec![None]
    } else {
        cfg.variants
            .obstacle_metrics
            .iter()
            .copied()
            .map(Some)
            .collect()
    };
    let mut variants = Vec::new();
    for style in &cfg.variants.fabric_styles {
        for speed in &speeds {
            for metric in &metrics {
                let mut label = style.as_str().to_string();
                if let Some(v) = speed {
                    label.push_str(&format!("-v{v}"));
                }
                if let Some(m) = metric {
                    label.push('-');
                    label.push_str(metric_label(*m));
                }
                variants.push(VariantSpec {
                    style: *style,
                    speed: *speed,
                    obstacle_metric: *metric,
                    label,
                });
            }
        }
    }
    variants
}

#[derive(Debug, Clone)]
pub struct RolloutRecord {
    pub label: String,
    pub variant_label: String,
    pub variant_index: usize,
    pub style: StyleName,
    pub speed: Option<f64>,
    pub metric: Option<ObstacleMetricName>,
    pub state_index: usize,
    pub traj: Trajectory,
    pub ee_path: Option<Vec<[f64; 2]>>,
    pub wall_time_s: Option<f64>,
}

fn integrator_config(cfg: &ScenarioConfig) -> Result<IntegratorConfig> {
    let method = match cfg.integrator.method {
        MethodName::Euler => Method::Euler,
        MethodName::Rk4 => Method::Rk4,
    };
    Ok(IntegratorConfig::new(
        method,
        cfg.integrator.dt,
        cfg.integrator.duration,
    )?)
}

fn ee_path_of(arm: &PlanarArm, traj: &Trajectory) -> Vec<[f64; 2]> {
    let point = arm.end_effector();
    traj.positions
        .iter()
        .map(|q| {
            let p = arm.fk(q, &point).expect("recorded states are valid");
            [p.x, p.y]
        })
        .collect()
}

/// Runs one (variant, initial state) rollout.
pub fn run_job(
    cfg: &ScenarioConfig,
    variant: &VariantSpec,
    variant_index: usize,
    state_index: usize,
) -> Result<RolloutRecord> {
    let built = build_system(cfg, variant)?;
    let integ = integrator_config(cfg)?;
    let state = &cfg.initial_states[state_index];
    let q0 = DVector::from_row_slice(&state.q);
    let qdot0 = if state.qdot.is_empty() {
        DVector::zeros(q0.len())
    } else {
        DVector::from_row_slice(&state.qdot)
    };
    let started = Instant::now();
    let traj = rollout(&built.system, &q0, &qdot0, &integ);
    let wall = started.elapsed().as_secs_f64();
    let ee_path = built.arm.as_ref().map(|arm| ee_path_of(arm, &traj));
    Ok(RolloutRecord {
        label: format!("{}_s{}", variant.label, state_index),
        variant_label: variant.label.clone(),
        variant_index,
        style: variant.style,
        speed: variant.speed,
        metric: variant.obstacle_metric,
        state_index,
        traj,
        ee_path,
        wall_time_s: Some(wall),
    })
}

fn termination_string(t: &Termination) -> String {
    match t {
        Termination::DurationReached => "duration_reached".into(),
        Termination::Converged { step } => format!("converged@{step}"),
        Termination::BarrierViolation { step, .. } => format!("barrier_violation@{step}"),
        Termination::Divergence { step } => format!("divergence@{step}"),
    }
}

/// Builds the metrics report (rollout table, cross-speed pairs, style
/// summaries) from finished rollouts.
pub fn assemble_report(cfg: &ScenarioConfig, records: &[RolloutRecord]) -> MetricsReport {
    let rollouts: Vec<RolloutMetrics> = records
        .iter()
        .map(|r| {
            let conv = detect_convergence(
                &r.traj,
                cfg.convergence.pos_tol,
                cfg.convergence.vel_tol,
                cfg.convergence.window,
            );
            RolloutMetrics {
                label: r.label.clone(),
                variant: r.variant_label.clone(),
                style: r.style.as_str().into(),
                speed: r.speed,
                obstacle_metric: r.metric.map(|m| metric_label(m).into()),
                state_index: r.state_index,
                converged: conv.converged,
                termination: termination_string(&r.traj.termination),
                final_goal_distance: r.traj.final_goal_distance(),
                min_barrier_distance: r.traj.min_obstacle_distance_overall(),
                wall_time_s: r.wall_time_s,
                steps: r.traj.len(),
            }
        })
        .collect();

    // cross-speed pairs: same style, metric variant and initial state
    let mut pairs = Vec::new();
    for (i, a) in records.iter().enumerate() {
        for b in records.iter().skip(i + 1) {
            let comparable = a.style == b.style
                && a.metric == b.metric
                && a.state_index == b.state_index
                && a.speed.is_some()
                && b.speed.is_some()
                && a.speed != b.speed
                && !a.traj.is_empty()
                && !b.traj.is_empty();
            if comparable {
                let speeds_a: Vec<f64> = a.traj.velocities.iter().map(|v| v.norm()).collect();
                let speeds_b: Vec<f64> = b.traj.velocities.iter().map(|v| v.norm()).collect();
                pairs.push(PathPair {
                    a: a.label.clone(),
                    b: b.label.clone(),
                    space: MetricSpace::Config,
                    l_ab: path_difference(&a.traj.positions, &speeds_a, &b.traj.positions, a.traj.dt),
                    l_ba: path_difference(&b.traj.positions, &speeds_b, &a.traj.positions, b.traj.dt),
                });
            }
        }
    }
    summarize(&cfg.scenario.name, rollouts, pairs)
}

pub struct RunOutcome {
    pub report: MetricsReport,
    pub failures: usize,
    pub out_dir: PathBuf,
}

/// Executes every (variant × initial state) rollout, writes trajectories,
/// plot data, metrics and the resolved config echo into `out_dir`.
pub fn run_scenario(
    cfg: &ScenarioConfig,
    out_dir: &Path,
    only_variant: Option<&str>,
) -> Result<RunOutcome> {
    std::fs::create_dir_all(out_dir)
        .with_context(|| format!("creating output directory {}", out_dir.display()))?;
    std::fs::write(out_dir.join("config_echo.toml"), echo_scenario(cfg)?)?;

    let mut variants = expand_variants(cfg);
    if let Some(name) = only_variant {
        variants.retain(|v| v.label == name);
        if variants.is_empty() {
            bail!("no variant named {name:?} in this scenario");
        }
    }
    // surface build errors before fanning out
    for variant in &variants {
        build_system(cfg, variant).with_context(|| format!("variant {}", variant.label))?;
    }

    let jobs: Vec<(usize, usize)> = (0..variants.len())
        .flat_map(|v| (0..cfg.initial_states.len()).map(move |s| (v, s)))
        .collect();
    let results: Vec<Result<RolloutRecord>> = run_batch(&jobs, |(v, s)| {
        run_job(cfg, &variants[*v], *v, *s)
    });
    let mut records = Vec::with_capacity(results.len());
    for result in results {
        records.push(result?);
    }

    for record in &records {
        if cfg.outputs.write_csv {
            write_trajectory(
                &out_dir.join(format!("traj_{}.csv", record.label)),
                &record.traj,
                record.ee_path.as_deref(),
            )?;
        }
        if cfg.outputs.write_xy {
            let plot_path: Vec<[f64; 2]> = plot_path(record);
            if !plot_path.is_empty() {
                write_xy(
                    &out_dir.join(format!("path_{}.xy", record.label)),
                    plot_path.iter().map(|p| (p[0], p[1])),
                )?;
            }
            write_xy(
                &out_dir.join(format!("speed_{}.xy", record.label)),
                record
                    .traj
                    .times
                    .iter()
                    .zip(&record.traj.velocities)
                    .map(|(t, v)| (*t, v.norm())),
            )?;
        }
    }

    let report = assemble_report(cfg, &records);
    std::fs::write(
        out_dir.join("metrics.json"),
        serde_json::to_string_pretty(&report)? + "\n",
    )?;

    if cfg.outputs.render {
        let sketch = sketch_scene(cfg, &records);
        render_scene(&sketch, &out_dir.join("scene.png"))?;
    }

    let failures = report.failures();
    Ok(RunOutcome {
        report,
        failures,
        out_dir: out_dir.to_path_buf(),
    })
}

/// Plot-space path: end-effector for arms, position for planar particles.
fn plot_path(record: &RolloutRecord) -> Vec<[f64; 2]> {
    match &record.ee_path {
        Some(ee) => ee.clone(),
        None => record
            .traj
            .positions
            .iter()
            .filter(|q| q.len() == 2)
            .map(|q| [q[0], q[1]])
            .collect(),
    }
}

fn sketch_scene(cfg: &ScenarioConfig, records: &[RolloutRecord]) -> SceneSketch {
    let mut circles = Vec::new();
    let mut segments = Vec::new();
    for term in &cfg.terms {
        match term {
            TermConfig::Obstacle { origin, radius, .. } => {
                if origin.len() == 2 {
                    circles.push(([origin[0], origin[1]], *radius));
                }
            }
            TermConfig::Cubby {
                center,
                width,
                depth,
                normal,
                ..
            } => {
                if let Ok(scene) = fabrics::geometry::cubby::CubbyScene::new(
                    nalgebra::Vector2::new(center[0], center[1]),
                    *width,
                    *depth,
                    nalgebra::Vector2::new(normal[0], normal[1]),
                ) {
                    for (a, b) in scene.wall_segments() {
                        segments.push(([a[0], a[1]], [b[0], b[1]]));
                    }
                }
            }
            _ => {}
        }
    }
    let target = cfg
        .objective
        .as_ref()
        .filter(|o| o.target.len() == 2)
        .map(|o| [o.target[0], o.target[1]]);
    let paths = records
        .iter()
        .map(|r| (r.variant_index, plot_path(r)))
        .filter(|(_, p)| !p.is_empty())
        .collect();
    SceneSketch {
        circles,
        segments,
        target,
        paths,
    }
}

/// Rebuilds the metrics report from a run directory: the echoed config plus
/// the recorded trajectory CSVs.
pub fn recompute_metrics(run_dir: &Path) -> Result<MetricsReport> {
    let cfg = crate::config::load_scenario(&run_dir.join("config_echo.toml"))?;
    let arm = match &cfg.robot {
        crate::config::RobotConfig::PlanarArm {
            link_lengths,
            base_pose,
            ..
        } => Some(PlanarArm::new(
            link_lengths.clone(),
            fabrics::kinematics::BasePose {
                x: base_pose[0],
                y: base_pose[1],
                theta: base_pose[2],
            },
        )?),
        _ => None,
    };
    let target = cfg
        .objective
        .as_ref()
        .map(|o| DVector::from_row_slice(&o.target));

    let mut records = Vec::new();
    let mut entries: Vec<PathBuf> = std::fs::read_dir(run_dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .map(|n| n.starts_with("traj_") && n.ends_with(".csv"))
                .unwrap_or(false)
        })
        .collect();
    entries.sort();
    for path in entries {
        let name = path
            .file_stem()
            .and_then(|n| n.to_str())
            .context("csv name")?;
        let label = name.trim_start_matches("traj_").to_string();
        let (variant_label, state_index) = label
            .rsplit_once("_s")
            .and_then(|(v, s)| s.parse::<usize>().ok().map(|s| (v.to_string(), s)))
            .with_context(|| format!("cannot parse rollout label {label:?}"))?;
        let mut parts = variant_label.split('-');
        let style = match parts.next() {
            Some("geometric") => StyleName::Geometric,
            Some("lagrangian") => StyleName::Lagrangian,
            other => bail!("unknown style in label {other:?}"),
        };
        let mut speed = None;
        let mut metric = None;
        for part in parts {
            if let Some(v) = part.strip_prefix('v') {
                if let Ok(v) = v.parse::<f64>() {
                    speed = Some(v);
                    continue;
                }
            }
            metric = match part {
                "posonly" => Some(ObstacleMetricName::PositionOnly),
                "gated" => Some(ObstacleMetricName::VelocityGated),
                _ => metric,
            };
        }
        let (mut traj, ee_path) = crate::csvio::read_trajectory(&path)?;
        // goal distances are derived, not stored
        for i in 0..traj.len() {
            let d = match (&target, &arm, &ee_path) {
                (Some(t), Some(_), Some(ee)) => {
                    let offset = [ee[i][0] - t[0], ee[i][1] - t[1]];
                    (offset[0] * offset[0] + offset[1] * offset[1]).sqrt()
                }
                (Some(t), _, _) => (&traj.positions[i] - t).norm(),
                (None, _, _) => 0.0,
            };
            traj.goal_distance[i] = d;
        }
        records.push(RolloutRecord {
            label,
            variant_label,
            variant_index: 0,
            style,
            speed,
            metric,
            state_index,
            traj,
            ee_path,
            wall_time_s: None,
        });
    }
    if records.is_empty() {
        bail!("no trajectory CSVs found in {}", run_dir.display());
    }
    Ok(assemble_report(&cfg, &records))
}
