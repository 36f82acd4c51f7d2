//! Declarative scenario files: TOML with nested sections, validated on load,
//! with every default materialized before the config is echoed into the run
//! directory.

use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: ScenarioMeta,
    pub robot: RobotConfig,
    pub integrator: IntegratorSection,
    #[serde(default)]
    pub convergence: ConvergenceSection,
    /// Optional: pure-energization studies run without a task objective.
    pub objective: Option<ObjectiveSection>,
    pub speed_control: SpeedControlSection,
    pub initial_states: Vec<InitialState>,
    #[serde(default)]
    pub terms: Vec<TermConfig>,
    #[serde(default)]
    pub variants: VariantSection,
    #[serde(default)]
    pub outputs: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioMeta {
    pub name: String,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum RobotConfig {
    Particle {
        dim: usize,
    },
    PlanarArm {
        link_lengths: Vec<f64>,
        joint_limits: Vec<[f64; 2]>,
        #[serde(default)]
        base_pose: [f64; 3],
    },
}

impl RobotConfig {
    pub fn dof(&self) -> usize {
        match self {
            RobotConfig::Particle { dim } => *dim,
            RobotConfig::PlanarArm { link_lengths, .. } => link_lengths.len(),
        }
    }

    pub fn is_arm(&self) -> bool {
        matches!(self, RobotConfig::PlanarArm { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodName {
    Euler,
    Rk4,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSection {
    pub method: MethodName,
    pub dt: f64,
    pub duration: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceSection {
    #[serde(default = "defaults::pos_tol")]
    pub pos_tol: f64,
    #[serde(default = "defaults::vel_tol")]
    pub vel_tol: f64,
    #[serde(default = "defaults::window")]
    pub window: f64,
}

impl Default for ConvergenceSection {
    fn default() -> Self {
        Self {
            pos_tol: defaults::pos_tol(),
            vel_tol: defaults::vel_tol(),
            window: defaults::window(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveMetricName {
    Rbf,
    TanhSwitch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectiveSection {
    /// Goal in the objective task space (configuration space for particles,
    /// end-effector space for arms).
    pub target: Vec<f64>,
    pub k: f64,
    pub alpha_psi: f64,
    pub m_upper: f64,
    pub m_lower: f64,
    pub alpha_m: f64,
    #[serde(default = "defaults::objective_metric")]
    pub metric: ObjectiveMetricName,
    #[serde(default = "defaults::tanh_radius")]
    pub tanh_radius: f64,
    #[serde(default)]
    pub tanh_positive_arg: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControlMode {
    Regulated,
    BasicDamping,
    Energize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExecEnergyForm {
    /// L_ex = ½‖q̇‖², setpoint ½v_d².
    HalfSpeedSquared,
    /// L_ex = (1/v_d)q̇ᵀq̇, setpoint v_d.
    SpeedScaled,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpeedControlSection {
    pub mode: ControlMode,
    #[serde(default = "defaults::v_d")]
    pub v_d: f64,
    #[serde(default = "defaults::exec_energy")]
    pub exec_energy: ExecEnergyForm,
    #[serde(default = "defaults::b_base")]
    pub b_base: f64,
    #[serde(default = "defaults::b_gain")]
    pub b_gain: f64,
    #[serde(default = "defaults::alpha_beta")]
    pub alpha_beta: f64,
    #[serde(default = "defaults::sbeta_radius")]
    pub radius: f64,
    #[serde(default = "defaults::alpha_eta")]
    pub alpha_eta: f64,
    #[serde(default)]
    pub alpha_shift: f64,
    #[serde(default = "defaults::boost_gain")]
    pub boost_gain: f64,
    #[serde(default = "defaults::epsilon")]
    pub epsilon: f64,
    /// Basic-damping coefficient (ignored by the other modes).
    #[serde(default = "defaults::beta")]
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialState {
    pub q: Vec<f64>,
    #[serde(default)]
    pub qdot: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObstacleMetricName {
    PositionOnly,
    VelocityGated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TermSpace {
    /// Configuration space for particles, all body points for arms.
    Auto,
    Config,
    Ee,
    BodyPoints,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TermConfig {
    /// Behavioral attraction (geometric under the geometric style); distinct
    /// from the task objective, which is always a forcing term.
    Attractor {
        target: Vec<f64>,
        k: f64,
        alpha_psi: f64,
        m_upper: f64,
        m_lower: f64,
        alpha_m: f64,
        #[serde(default = "defaults::objective_metric")]
        metric: ObjectiveMetricName,
        #[serde(default = "defaults::tanh_radius")]
        tanh_radius: f64,
        #[serde(default)]
        tanh_positive_arg: bool,
        #[serde(default = "defaults::attractor_space")]
        space: TermSpace,
    },
    Obstacle {
        origin: Vec<f64>,
        radius: f64,
        k_b: f64,
        alpha_b: f64,
        #[serde(default = "defaults::obstacle_metric")]
        metric_variant: ObstacleMetricName,
        #[serde(default = "defaults::term_space")]
        space: TermSpace,
    },
    JointLimits {
        #[serde(default = "defaults::limit_lambda")]
        lambda: f64,
        #[serde(default = "defaults::limit_alpha")]
        alpha: [f64; 4],
    },
    DefaultConfig {
        q0: Vec<f64>,
        lambda_dc: f64,
        k: f64,
        alpha_psi: f64,
    },
    Cubby {
        center: [f64; 2],
        width: f64,
        depth: f64,
        normal: [f64; 2],
        #[serde(default)]
        params: CubbySection,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CubbySection {
    #[serde(default = "defaults::m_upper")]
    pub m_upper: f64,
    #[serde(default = "defaults::m_lower")]
    pub m_lower: f64,
    #[serde(default = "defaults::cubby_alpha_m")]
    pub alpha_m: f64,
    #[serde(default = "defaults::r_switch")]
    pub r_switch: f64,
    #[serde(default = "defaults::d_front")]
    pub d_front: f64,
    #[serde(default = "defaults::waypoint_offset")]
    pub waypoint_offset: f64,
    #[serde(default = "defaults::attract_k")]
    pub attract_k: f64,
    #[serde(default = "defaults::attract_alpha_psi")]
    pub attract_alpha_psi: f64,
    #[serde(default = "defaults::extraction")]
    pub extraction: [f64; 4],
    #[serde(default = "defaults::extraction_margin")]
    pub extraction_margin: f64,
    #[serde(default = "defaults::collision_k_b")]
    pub collision_k_b: f64,
    #[serde(default = "defaults::collision_alpha_b")]
    pub collision_alpha_b: f64,
}

impl Default for CubbySection {
    fn default() -> Self {
        toml::from_str("").expect("defaults populate an empty cubby section")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariantSection {
    #[serde(default = "defaults::fabric_styles")]
    pub fabric_styles: Vec<StyleName>,
    /// Regulated-speed sweep; empty keeps the configured v_d.
    #[serde(default)]
    pub speeds: Vec<f64>,
    /// Obstacle-metric sweep; empty keeps each term's declared variant.
    #[serde(default)]
    pub obstacle_metrics: Vec<ObstacleMetricName>,
}

impl Default for VariantSection {
    fn default() -> Self {
        Self {
            fabric_styles: defaults::fabric_styles(),
            speeds: Vec::new(),
            obstacle_metrics: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StyleName {
    Geometric,
    Lagrangian,
}

impl StyleName {
    pub fn as_str(&self) -> &'static str {
        match self {
            StyleName::Geometric => "geometric",
            StyleName::Lagrangian => "lagrangian",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "defaults::yes")]
    pub write_csv: bool,
    #[serde(default = "defaults::yes")]
    pub write_xy: bool,
    #[serde(default = "defaults::yes")]
    pub render: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            write_csv: true,
            write_xy: true,
            render: true,
        }
    }
}

mod defaults {
    use super::*;

    pub fn pos_tol() -> f64 {
        1e-2
    }
    pub fn vel_tol() -> f64 {
        1e-3
    }
    pub fn window() -> f64 {
        1.0
    }
    pub fn objective_metric() -> ObjectiveMetricName {
        ObjectiveMetricName::Rbf
    }
    pub fn tanh_radius() -> f64 {
        0.5
    }
    pub fn v_d() -> f64 {
        2.0
    }
    pub fn exec_energy() -> ExecEnergyForm {
        ExecEnergyForm::HalfSpeedSquared
    }
    pub fn b_base() -> f64 {
        0.01
    }
    pub fn b_gain() -> f64 {
        8.0
    }
    pub fn alpha_beta() -> f64 {
        8.0
    }
    pub fn sbeta_radius() -> f64 {
        0.5
    }
    pub fn alpha_eta() -> f64 {
        2.0
    }
    pub fn boost_gain() -> f64 {
        20.0
    }
    pub fn epsilon() -> f64 {
        1e-6
    }
    pub fn beta() -> f64 {
        4.0
    }
    pub fn obstacle_metric() -> ObstacleMetricName {
        ObstacleMetricName::VelocityGated
    }
    pub fn term_space() -> TermSpace {
        TermSpace::Auto
    }
    pub fn attractor_space() -> TermSpace {
        TermSpace::Ee
    }
    pub fn limit_lambda() -> f64 {
        0.25
    }
    pub fn limit_alpha() -> [f64; 4] {
        [0.4, 0.2, 20.0, 5.0]
    }
    pub fn m_upper() -> f64 {
        2.0
    }
    pub fn m_lower() -> f64 {
        0.2
    }
    pub fn cubby_alpha_m() -> f64 {
        20.0
    }
    pub fn r_switch() -> f64 {
        0.15
    }
    pub fn d_front() -> f64 {
        0.1
    }
    pub fn waypoint_offset() -> f64 {
        0.15
    }
    pub fn attract_k() -> f64 {
        10.0
    }
    pub fn attract_alpha_psi() -> f64 {
        10.0
    }
    pub fn extraction() -> [f64; 4] {
        [0.4, 0.2, 20.0, 0.4]
    }
    pub fn extraction_margin() -> f64 {
        0.05
    }
    pub fn collision_k_b() -> f64 {
        20.0
    }
    pub fn collision_alpha_b() -> f64 {
        1.0
    }
    pub fn fabric_styles() -> Vec<StyleName> {
        vec![StyleName::Geometric]
    }
    pub fn yes() -> bool {
        true
    }
}

/// Parses and validates a scenario file; errors carry file and position
/// context.
pub fn load_scenario(path: &Path) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading scenario file {}", path.display()))?;
    let cfg: ScenarioConfig = toml::from_str(&text)
        .map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))?;
    validate(&cfg).with_context(|| format!("validating {}", path.display()))?;
    Ok(cfg)
}

/// Serializes the fully-resolved config (all defaults materialized).
pub fn echo_scenario(cfg: &ScenarioConfig) -> Result<String> {
    Ok(toml::to_string_pretty(cfg)?)
}

/// Structural checks beyond what the schema enforces.
pub fn validate(cfg: &ScenarioConfig) -> Result<()> {
    let n = cfg.robot.dof();
    if n == 0 {
        bail!("robot has zero degrees of freedom");
    }
    if let RobotConfig::PlanarArm {
        link_lengths,
        joint_limits,
        ..
    } = &cfg.robot
    {
        if joint_limits.len() != link_lengths.len() {
            bail!(
                "joint_limits has {} entries for {} joints",
                joint_limits.len(),
                link_lengths.len()
            );
        }
    }
    if cfg.integrator.dt <= 0.0 {
        bail!("integrator.dt must be positive");
    }
    if cfg.integrator.duration < cfg.integrator.dt {
        bail!("integrator.duration must cover at least one step");
    }
    let goal_dim = if cfg.robot.is_arm() { 2 } else { n };
    match &cfg.objective {
        Some(objective) => {
            if objective.target.len() != goal_dim {
                bail!(
                    "objective.target has dimension {}, expected {goal_dim}",
                    objective.target.len()
                );
            }
        }
        None => {
            if !matches!(cfg.speed_control.mode, ControlMode::Energize) {
                bail!("only energize mode can run without an [objective] section");
            }
        }
    }
    if cfg.initial_states.is_empty() {
        bail!("initial_states must list at least one state");
    }
    for (i, state) in cfg.initial_states.iter().enumerate() {
        if state.q.len() != n {
            bail!("initial_states[{i}].q has dimension {}, expected {n}", state.q.len());
        }
        if !state.qdot.is_empty() && state.qdot.len() != n {
            bail!(
                "initial_states[{i}].qdot has dimension {}, expected {n}",
                state.qdot.len()
            );
        }
    }
    for (i, term) in cfg.terms.iter().enumerate() {
        match term {
            TermConfig::Attractor { target, space, .. } => {
                let expected = match (space, cfg.robot.is_arm()) {
                    (TermSpace::Config, _) | (TermSpace::Auto, false) => n,
                    (_, false) => n,
                    _ => 2,
                };
                if target.len() != expected {
                    bail!(
                        "terms[{i}] (attractor) target has dimension {}, expected {expected}",
                        target.len()
                    );
                }
            }
            TermConfig::Obstacle { origin, space, .. } => {
                let expected = match (space, cfg.robot.is_arm()) {
                    (TermSpace::Config, _) => n,
                    (TermSpace::Auto, false) => n,
                    _ => 2,
                };
                if origin.len() != expected {
                    bail!(
                        "terms[{i}] (obstacle) origin has dimension {}, expected {expected}",
                        origin.len()
                    );
                }
                if matches!(space, TermSpace::Ee | TermSpace::BodyPoints) && !cfg.robot.is_arm() {
                    bail!("terms[{i}] (obstacle) requests arm spaces on a particle robot");
                }
            }
            TermConfig::JointLimits { .. } => {
                if !cfg.robot.is_arm() {
                    bail!("terms[{i}] (joint_limits) requires a planar_arm robot");
                }
            }
            TermConfig::DefaultConfig { q0, .. } => {
                if q0.len() != n {
                    bail!(
                        "terms[{i}] (default_config) q0 has dimension {}, expected {n}",
                        q0.len()
                    );
                }
            }
            TermConfig::Cubby { .. } => {}
        }
    }
    if matches!(cfg.speed_control.mode, ControlMode::Regulated) {
        let sc = &cfg.speed_control;
        if sc.v_d <= 0.0 {
            bail!("speed_control.v_d must be positive");
        }
        if sc.b_base <= 0.0 || sc.b_gain <= sc.b_base || sc.epsilon <= 0.0 || sc.boost_gain < 0.0 {
            bail!("speed_control gains violate b_gain > b_base > 0, epsilon > 0, boost_gain >= 0");
        }
        for v in &cfg.variants.speeds {
            if *v <= 0.0 {
                bail!("variants.speeds entries must be positive");
            }
        }
    }
    if matches!(cfg.speed_control.mode, ControlMode::BasicDamping) && cfg.speed_control.beta <= 0.0
    {
        bail!("speed_control.beta must be positive for basic damping");
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
        [scenario]
        name = "minimal"

        [robot]
        type = "particle"
        dim = 2

        [integrator]
        method = "rk4"
        dt = 0.01
        duration = 1.0

        [objective]
        target = [-2.5, 0.0]
        k = 10.0
        alpha_psi = 10.0
        m_upper = 2.0
        m_lower = 0.2
        alpha_m = 0.75

        [speed_control]
        mode = "basic_damping"
        beta = 4.0

        [[initial_states]]
        q = [2.5, 0.0]
    "#;

    #[test]
    fn minimal_scenario_round_trips() {
        let cfg: ScenarioConfig = toml::from_str(MINIMAL).unwrap();
        validate(&cfg).unwrap();
        let echoed = echo_scenario(&cfg).unwrap();
        let again: ScenarioConfig = toml::from_str(&echoed).unwrap();
        assert_eq!(cfg, again);
        let twice = echo_scenario(&again).unwrap();
        assert_eq!(echoed, twice);
    }

    #[test]
    fn missing_joint_limits_names_field() {
        let text = MINIMAL.replace(
            "type = \"particle\"\n        dim = 2",
            "type = \"planar_arm\"\n        link_lengths = [1.0, 1.0, 1.0]",
        );
        let err = toml::from_str::<ScenarioConfig>(&text).unwrap_err();
        assert!(err.to_string().contains("joint_limits"), "{err}");
    }

    #[test]
    fn unknown_term_kind_rejected() {
        let text = format!(
            "{MINIMAL}\n[[terms]]\nkind = \"warp_drive\"\nstrength = 9000.0\n"
        );
        let err = toml::from_str::<ScenarioConfig>(&text).unwrap_err();
        assert!(err.to_string().contains("warp_drive"), "{err}");
    }

    #[test]
    fn dimension_mismatches_rejected() {
        let mut cfg: ScenarioConfig = toml::from_str(MINIMAL).unwrap();
        cfg.objective.as_mut().unwrap().target = vec![1.0];
        assert!(validate(&cfg).is_err());

        let mut cfg: ScenarioConfig = toml::from_str(MINIMAL).unwrap();
        cfg.initial_states[0].q = vec![1.0, 2.0, 3.0];
        assert!(validate(&cfg).is_err());
    }

    #[test]
    fn defaults_materialize() {
        let cfg: ScenarioConfig = toml::from_str(MINIMAL).unwrap();
        assert_eq!(cfg.convergence.pos_tol, 1e-2);
        assert_eq!(cfg.speed_control.b_base, 0.01);
        assert_eq!(cfg.variants.fabric_styles, vec![StyleName::Geometric]);
        assert!(cfg.outputs.write_csv);
    }
}
