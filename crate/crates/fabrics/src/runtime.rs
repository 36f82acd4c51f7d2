//! Fixed-step integration of the assembled root system, trajectory
//! recording, convergence detection and batch rollouts.

use nalgebra::DVector;

use crate::error::{FabricError, Result};
use crate::geometry::TaskMap;
use crate::speed_control::{
    basic_damping, energization_alpha, regulate, regulated_accel, ChannelEnergies,
    FrozenRegulation, RegulatorTrace, SpeedControlParams,
};
use crate::tree::{resolve_root, RootResolution, RootState, TransformTree};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Euler,
    Rk4,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceSpec {
    pub pos_tol: f64,
    pub vel_tol: f64,
    /// Seconds both bounds must hold.
    pub window: f64,
}

impl Default for ConvergenceSpec {
    fn default() -> Self {
        Self {
            pos_tol: 1e-2,
            vel_tol: 1e-3,
            window: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig {
    pub method: Method,
    pub dt: f64,
    pub duration: f64,
    /// Terminate early once convergence is sustained (optional).
    pub stop_on_convergence: Option<ConvergenceSpec>,
}

impl IntegratorConfig {
    pub fn new(method: Method, dt: f64, duration: f64) -> Result<Self> {
        if dt <= 0.0 || !dt.is_finite() {
            return Err(FabricError::InvalidParameter("dt must be positive".into()));
        }
        if duration < dt {
            return Err(FabricError::InvalidParameter(
                "duration must cover at least one step".into(),
            ));
        }
        Ok(Self {
            method,
            dt,
            duration,
            stop_on_convergence: None,
        })
    }
}

/// One explicit Euler or classical RK4 step of the first-order lift
/// (q, q̇) ↦ (q̇, q̈).
pub fn step<F>(
    f: &mut F,
    q: &DVector<f64>,
    qdot: &DVector<f64>,
    dt: f64,
    method: Method,
) -> Result<(DVector<f64>, DVector<f64>)>
where
    F: FnMut(&DVector<f64>, &DVector<f64>) -> Result<DVector<f64>>,
{
    match method {
        Method::Euler => {
            let a = f(q, qdot)?;
            Ok((q + qdot * dt, qdot + a * dt))
        }
        Method::Rk4 => {
            let half = dt / 2.0;
            let k1q = qdot.clone();
            let k1v = f(q, qdot)?;
            let q2 = q + &k1q * half;
            let v2 = qdot + &k1v * half;
            let k2q = v2.clone();
            let k2v = f(&q2, &v2)?;
            let q3 = q + &k2q * half;
            let v3 = qdot + &k2v * half;
            let k3q = v3.clone();
            let k3v = f(&q3, &v3)?;
            let q4 = q + &k3q * dt;
            let v4 = qdot + &k3v * dt;
            let k4q = v4.clone();
            let k4v = f(&q4, &v4)?;
            let sixth = dt / 6.0;
            Ok((
                q + (k1q + k2q * 2.0 + k3q * 2.0 + k4q) * sixth,
                qdot + (k1v + k2v * 2.0 + k3v * 2.0 + k4v) * sixth,
            ))
        }
    }
}

/// How the root acceleration is assembled each step.
#[derive(Debug, Clone)]
pub enum SpeedController {
    /// Pure energized flow q̈ = π₀ + α_{L_e}ẋ; forcing terms are ignored.
    Energize,
    Regulated(SpeedControlParams),
    BasicDamping { beta: f64 },
}

/// A fully assembled system: tree, controller and the goal-offset map whose
/// norm drives the damping switch and convergence detection.
#[derive(Debug, Clone)]
pub struct FabricSystem {
    pub tree: TransformTree,
    pub controller: SpeedController,
    pub goal_map: Option<TaskMap>,
    pub ridge: f64,
}

#[derive(Debug, Clone)]
pub struct SystemEval {
    pub resolution: RootResolution,
    pub root: RootState,
    pub goal_offset: DVector<f64>,
    pub min_obstacle: f64,
}

impl FabricSystem {
    pub fn new(tree: TransformTree, controller: SpeedController) -> Self {
        Self {
            tree,
            controller,
            goal_map: None,
            ridge: crate::spec_algebra::DEFAULT_RIDGE,
        }
    }

    pub fn with_goal(mut self, goal_map: TaskMap) -> Self {
        self.goal_map = Some(goal_map);
        self
    }

    pub fn evaluate(&self, q: &DVector<f64>, qdot: &DVector<f64>) -> Result<SystemEval> {
        let fwd = self.tree.forward(q, qdot)?;
        let resolution = self.tree.backward(&fwd)?;
        let root = resolve_root(&resolution, self.ridge);
        let goal_offset = match &self.goal_map {
            Some(map) => map.evaluate(q, qdot)?.x().clone(),
            None => DVector::zeros(q.len()),
        };
        let min_obstacle = self.tree.min_barrier_value(&fwd, true);
        Ok(SystemEval {
            resolution,
            root,
            goal_offset,
            min_obstacle,
        })
    }

    /// Full per-step control at the step's start state.
    pub fn control(&self, eval: &SystemEval, qdot: &DVector<f64>) -> (DVector<f64>, RegulatorTrace) {
        match &self.controller {
            SpeedController::Energize => {
                let alpha = energization_alpha(
                    eval.resolution.energy.metric(),
                    eval.resolution.energy.force(),
                    &eval.root.pi0,
                    qdot,
                );
                let qddot = &eval.root.pi0 + qdot * alpha;
                let trace = RegulatorTrace {
                    alpha_le: alpha,
                    alpha_reg: alpha,
                    ..Default::default()
                };
                (qddot, trace)
            }
            SpeedController::Regulated(params) => {
                let channels = ChannelEnergies {
                    fabric_tensor: eval.resolution.energy.metric(),
                    fabric_force: eval.resolution.energy.force(),
                    exec_tensor: eval.resolution.exec_energy.metric(),
                    exec_force: eval.resolution.exec_energy.force(),
                };
                regulate(
                    &eval.root.pi0,
                    &eval.root.a_psi,
                    &channels,
                    &eval.goal_offset,
                    qdot,
                    params,
                )
            }
            SpeedController::BasicDamping { beta } => {
                let qddot = basic_damping(&eval.root.pi0, &eval.root.a_psi, *beta, qdot);
                let trace = RegulatorTrace {
                    beta_reg: *beta,
                    alpha_reg: -beta,
                    ..Default::default()
                };
                (qddot, trace)
            }
        }
    }

    /// Regulator scalars frozen at the step's start, reused across stages.
    fn freeze(&self, trace: &RegulatorTrace) -> Option<FrozenRegulation> {
        match &self.controller {
            SpeedController::Energize => None,
            SpeedController::Regulated(params) => Some(FrozenRegulation {
                alpha_lin: trace.alpha_ex_eta - trace.beta_reg,
                boost_coeff: params.boost_gain * trace.eta * (1.0 - trace.s_beta),
                epsilon: params.epsilon,
            }),
            SpeedController::BasicDamping { beta } => Some(FrozenRegulation::damping(*beta)),
        }
    }

    /// Stage acceleration: channels re-evaluated at the stage state, the
    /// regulator scalars frozen at their step-start values. The energized
    /// flow is smooth, so its coefficient is re-evaluated per stage instead.
    fn stage_accel(
        &self,
        q: &DVector<f64>,
        qdot: &DVector<f64>,
        frozen: Option<&FrozenRegulation>,
    ) -> Result<DVector<f64>> {
        let eval = self.evaluate(q, qdot)?;
        match frozen {
            Some(frozen) => Ok(regulated_accel(
                &(&eval.root.pi0 + &eval.root.a_psi),
                qdot,
                frozen,
            )),
            None => {
                let alpha = energization_alpha(
                    eval.resolution.energy.metric(),
                    eval.resolution.energy.force(),
                    &eval.root.pi0,
                    qdot,
                );
                Ok(&eval.root.pi0 + qdot * alpha)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Termination {
    DurationReached,
    Converged { step: usize },
    BarrierViolation { step: usize, detail: String },
    Divergence { step: usize },
}

/// Time-indexed record of one rollout.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub dt: f64,
    pub times: Vec<f64>,
    pub positions: Vec<DVector<f64>>,
    pub velocities: Vec<DVector<f64>>,
    pub accelerations: Vec<DVector<f64>>,
    /// L_e: summed fabric-term energies (geometric + forcing).
    pub fabric_energy: Vec<f64>,
    /// L_ex: summed execution-energy term values.
    pub exec_energy: Vec<f64>,
    /// H_e + ψ.
    pub total_energy: Vec<f64>,
    pub goal_distance: Vec<f64>,
    pub min_obstacle_distance: Vec<f64>,
    pub regulator: Vec<RegulatorTrace>,
    pub termination: Termination,
}

impl Trajectory {
    fn new(dt: f64) -> Self {
        Self {
            dt,
            times: Vec::new(),
            positions: Vec::new(),
            velocities: Vec::new(),
            accelerations: Vec::new(),
            fabric_energy: Vec::new(),
            exec_energy: Vec::new(),
            total_energy: Vec::new(),
            goal_distance: Vec::new(),
            min_obstacle_distance: Vec::new(),
            regulator: Vec::new(),
            termination: Termination::DurationReached,
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn completed(&self) -> bool {
        matches!(
            self.termination,
            Termination::DurationReached | Termination::Converged { .. }
        )
    }

    pub fn final_speed(&self) -> f64 {
        self.velocities.last().map(|v| v.norm()).unwrap_or(0.0)
    }

    pub fn final_goal_distance(&self) -> f64 {
        self.goal_distance.last().copied().unwrap_or(f64::NAN)
    }

    pub fn min_obstacle_distance_overall(&self) -> f64 {
        self.min_obstacle_distance
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }
}

const DIVERGENCE_NORM: f64 = 1e6;

/// Integrates the assembled system, recording one row per executed step at
/// the step's start state. Failures terminate the trajectory with a labeled
/// record instead of clamping.
pub fn rollout(
    system: &FabricSystem,
    q0: &DVector<f64>,
    qdot0: &DVector<f64>,
    cfg: &IntegratorConfig,
) -> Trajectory {
    let mut traj = Trajectory::new(cfg.dt);
    let n_steps = (cfg.duration / cfg.dt).round() as usize;
    let mut q = q0.clone();
    let mut qdot = qdot0.clone();
    let mut sustained: usize = 0;

    for i in 0..n_steps {
        let eval = match system.evaluate(&q, &qdot) {
            Ok(e) => e,
            Err(FabricError::BarrierViolation { what, value }) => {
                traj.termination = Termination::BarrierViolation {
                    step: i,
                    detail: format!("{what}: {value:.3e}"),
                };
                return traj;
            }
            Err(_) => {
                traj.termination = Termination::Divergence { step: i };
                return traj;
            }
        };
        let (qddot, trace) = system.control(&eval, &qdot);
        let finite =
            qddot.iter().all(|v| v.is_finite()) && q.norm() <= DIVERGENCE_NORM && qdot.norm() <= DIVERGENCE_NORM;
        if !finite {
            traj.termination = Termination::Divergence { step: i };
            return traj;
        }

        traj.times.push(i as f64 * cfg.dt);
        traj.positions.push(q.clone());
        traj.velocities.push(qdot.clone());
        traj.accelerations.push(qddot);
        traj.fabric_energy.push(eval.resolution.fabric_energy_value);
        traj.exec_energy.push(eval.resolution.exec_energy_value);
        traj.total_energy
            .push(eval.resolution.fabric_energy_value + eval.resolution.potential_value);
        traj.goal_distance.push(eval.goal_offset.norm());
        traj.min_obstacle_distance.push(eval.min_obstacle);
        traj.regulator.push(trace);

        if let Some(spec) = &cfg.stop_on_convergence {
            if eval.goal_offset.norm() <= spec.pos_tol && qdot.norm() <= spec.vel_tol {
                sustained += 1;
            } else {
                sustained = 0;
            }
            if sustained as f64 * cfg.dt >= spec.window {
                traj.termination = Termination::Converged { step: i };
                return traj;
            }
        }

        let frozen = system.freeze(&trace);
        match step(
            &mut |qs: &DVector<f64>, qds: &DVector<f64>| system.stage_accel(qs, qds, frozen.as_ref()),
            &q,
            &qdot,
            cfg.dt,
            cfg.method,
        ) {
            Ok((nq, nqd)) => {
                q = nq;
                qdot = nqd;
            }
            Err(FabricError::BarrierViolation { what, value }) => {
                traj.termination = Termination::BarrierViolation {
                    step: i,
                    detail: format!("{what}: {value:.3e}"),
                };
                return traj;
            }
            Err(_) => {
                traj.termination = Termination::Divergence { step: i };
                return traj;
            }
        }
    }
    traj
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceReport {
    pub converged: bool,
    /// First step of the maximal satisfying suffix, when it exists.
    pub since_step: Option<usize>,
    pub final_goal_distance: f64,
    pub final_speed: f64,
}

/// Converged iff the goal offset norm and speed stay inside their bounds
/// over the trailing window.
pub fn detect_convergence(
    traj: &Trajectory,
    pos_tol: f64,
    vel_tol: f64,
    window: f64,
) -> ConvergenceReport {
    let n = traj.len();
    if n == 0 {
        return ConvergenceReport {
            converged: false,
            since_step: None,
            final_goal_distance: f64::NAN,
            final_speed: f64::NAN,
        };
    }
    let ok = |i: usize| traj.goal_distance[i] <= pos_tol && traj.velocities[i].norm() <= vel_tol;
    let mut start = n;
    while start > 0 && ok(start - 1) {
        start -= 1;
    }
    let suffix = n - start;
    let window_steps = ((window / traj.dt).ceil() as usize).max(1);
    ConvergenceReport {
        converged: traj.completed() && suffix >= window_steps.min(n),
        since_step: (suffix > 0).then_some(start),
        final_goal_distance: traj.final_goal_distance(),
        final_speed: traj.final_speed(),
    }
}

/// Maps a batch of independent jobs, in parallel when the `parallel`
/// feature is enabled.
#[cfg(feature = "parallel")]
pub fn run_batch<J, R, F>(jobs: &[J], f: F) -> Vec<R>
where
    J: Sync,
    R: Send,
    F: Fn(&J) -> R + Sync,
{
    use rayon::prelude::*;
    jobs.par_iter().map(|j| f(j)).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn run_batch<J, R, F>(jobs: &[J], f: F) -> Vec<R>
where
    F: Fn(&J) -> R,
{
    jobs.iter().map(|j| f(j)).collect()
}

/// Always-sequential variant kept alongside the parallel path so the two can
/// be compared directly.
pub fn run_batch_sequential<J, R, F>(jobs: &[J], f: F) -> Vec<R>
where
    F: Fn(&J) -> R,
{
    jobs.iter().map(|j| f(j)).collect()
}
