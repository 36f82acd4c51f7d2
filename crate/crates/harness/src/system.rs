//! Assembles a runnable fabric system from a scenario config and a variant.

use anyhow::{Context, Result};
use nalgebra::{DVector, Vector2};

use fabrics::geometry::cubby::{cubby_terms, CubbyParams, CubbyScene};
use fabrics::geometry::{
    attractor_term, default_config_term, joint_limit_terms, obstacle_term, AttractorMetric,
    AttractorParams, FabricStyle, FabricTerm, LimitParams, ObstacleMetric, TaskMap,
};
use fabrics::finsler::FinslerEnergy;
use fabrics::kinematics::{BasePose, PlanarArm};
use fabrics::runtime::{FabricSystem, SpeedController};
use fabrics::speed_control::{EtaMode, SpeedControlParams};
use fabrics::tree::{NodeId, TransformTree};
use nalgebra::DMatrix;

use crate::config::{
    ControlMode, ExecEnergyForm, ObjectiveMetricName, ObstacleMetricName, RobotConfig,
    ScenarioConfig, StyleName, TermConfig, TermSpace,
};
use crate::runner::VariantSpec;

pub struct BuiltSystem {
    pub system: FabricSystem,
    pub arm: Option<PlanarArm>,
    /// Execution-energy setpoint actually used (after speed overrides).
    pub exec_target: f64,
    pub v_d: f64,
}

pub fn style_of(name: StyleName) -> FabricStyle {
    match name {
        StyleName::Geometric => FabricStyle::Geometric,
        StyleName::Lagrangian => FabricStyle::Lagrangian,
    }
}

fn metric_of(name: ObstacleMetricName) -> ObstacleMetric {
    match name {
        ObstacleMetricName::PositionOnly => ObstacleMetric::PositionOnly,
        ObstacleMetricName::VelocityGated => ObstacleMetric::VelocityGated,
    }
}

fn build_arm(cfg: &ScenarioConfig) -> Result<Option<PlanarArm>> {
    match &cfg.robot {
        RobotConfig::Particle { .. } => Ok(None),
        RobotConfig::PlanarArm {
            link_lengths,
            base_pose,
            ..
        } => {
            let arm = PlanarArm::new(
                link_lengths.clone(),
                BasePose {
                    x: base_pose[0],
                    y: base_pose[1],
                    theta: base_pose[2],
                },
            )?;
            Ok(Some(arm))
        }
    }
}

pub fn build_system(cfg: &ScenarioConfig, variant: &VariantSpec) -> Result<BuiltSystem> {
    let n = cfg.robot.dof();
    let arm = build_arm(cfg)?;
    let style = style_of(variant.style);
    let mut tree = TransformTree::new(n);

    // end-effector and collision-point spaces for arms
    let ee_node = match &arm {
        Some(arm) => Some(tree.add_node(
            TransformTree::ROOT,
            TaskMap::EePosition {
                arm: arm.clone(),
                point: arm.end_effector(),
            },
        )?),
        None => None,
    };
    let body_nodes: Vec<NodeId> = match &arm {
        Some(arm) => arm
            .default_body_points()
            .iter()
            .map(|point| {
                tree.add_node(
                    TransformTree::ROOT,
                    TaskMap::EePosition {
                        arm: arm.clone(),
                        point: *point,
                    },
                )
            })
            .collect::<fabrics::Result<_>>()?,
        None => Vec::new(),
    };

    // objective: always a forcing attractor over the goal offset
    let goal_map = match &cfg.objective {
        Some(objective) => {
            let target = DVector::from_row_slice(&objective.target);
            let term = attractor_term(
                target.clone(),
                &AttractorParams {
                    k: objective.k,
                    alpha_psi: objective.alpha_psi,
                    m_upper: objective.m_upper,
                    m_lower: objective.m_lower,
                    alpha_m: objective.alpha_m,
                    metric: match objective.metric {
                        ObjectiveMetricName::Rbf => AttractorMetric::Rbf,
                        ObjectiveMetricName::TanhSwitch => AttractorMetric::TanhSwitch {
                            radius: objective.tanh_radius,
                            positive_arg: objective.tanh_positive_arg,
                        },
                    },
                },
                FabricStyle::Lagrangian,
            )
            .context("objective")?;
            Some(match (&arm, ee_node) {
                (Some(arm), Some(ee)) => {
                    tree.attach_term(ee, term)?;
                    TaskMap::composed(
                        TaskMap::EePosition {
                            arm: arm.clone(),
                            point: arm.end_effector(),
                        },
                        TaskMap::Offset { target },
                    )?
                }
                _ => {
                    tree.attach_term(TransformTree::ROOT, term)?;
                    TaskMap::Offset { target }
                }
            })
        }
        None => None,
    };

    for (i, term) in cfg.terms.iter().enumerate() {
        attach_term(cfg, variant, &mut tree, ee_node, &body_nodes, style, term)
            .with_context(|| format!("terms[{i}]"))?;
    }

    // speed controller + execution energy
    let v_d = variant.speed.unwrap_or(cfg.speed_control.v_d);
    let (exec_energy, exec_target) = match cfg.speed_control.exec_energy {
        ExecEnergyForm::HalfSpeedSquared => {
            (FinslerEnergy::Euclidean { dim: n }, 0.5 * v_d * v_d)
        }
        ExecEnergyForm::SpeedScaled => (
            FinslerEnergy::weighted(DMatrix::identity(n, n) * (2.0 / v_d))?,
            v_d,
        ),
    };
    let controller = match cfg.speed_control.mode {
        ControlMode::Regulated => {
            tree.attach_term(
                TransformTree::ROOT,
                FabricTerm::execution_energy("exec", TaskMap::Identity { dim: n }, exec_energy)?,
            )?;
            SpeedController::Regulated(SpeedControlParams {
                b_base: cfg.speed_control.b_base,
                b_gain: cfg.speed_control.b_gain,
                alpha_beta: cfg.speed_control.alpha_beta,
                radius: cfg.speed_control.radius,
                alpha_eta: cfg.speed_control.alpha_eta,
                alpha_shift: cfg.speed_control.alpha_shift,
                exec_energy_target: exec_target,
                boost_gain: cfg.speed_control.boost_gain,
                epsilon: cfg.speed_control.epsilon,
                eta_mode: EtaMode::Gated,
            })
        }
        ControlMode::BasicDamping => SpeedController::BasicDamping {
            beta: cfg.speed_control.beta,
        },
        ControlMode::Energize => SpeedController::Energize,
    };

    let mut system = FabricSystem::new(tree, controller);
    if let Some(goal_map) = goal_map {
        system = system.with_goal(goal_map);
    }
    Ok(BuiltSystem {
        system,
        arm,
        exec_target,
        v_d,
    })
}

fn attach_term(
    cfg: &ScenarioConfig,
    variant: &VariantSpec,
    tree: &mut TransformTree,
    ee_node: Option<NodeId>,
    body_nodes: &[NodeId],
    style: FabricStyle,
    term: &TermConfig,
) -> Result<()> {
    match term {
        TermConfig::Attractor {
            target,
            k,
            alpha_psi,
            m_upper,
            m_lower,
            alpha_m,
            metric,
            tanh_radius,
            tanh_positive_arg,
            space,
        } => {
            let built = attractor_term(
                DVector::from_row_slice(target),
                &AttractorParams {
                    k: *k,
                    alpha_psi: *alpha_psi,
                    m_upper: *m_upper,
                    m_lower: *m_lower,
                    alpha_m: *alpha_m,
                    metric: match metric {
                        ObjectiveMetricName::Rbf => AttractorMetric::Rbf,
                        ObjectiveMetricName::TanhSwitch => AttractorMetric::TanhSwitch {
                            radius: *tanh_radius,
                            positive_arg: *tanh_positive_arg,
                        },
                    },
                },
                style,
            )?;
            match (space, ee_node) {
                (TermSpace::Config, _) | (_, None) => {
                    tree.attach_term(TransformTree::ROOT, built)?;
                }
                (_, Some(ee)) => {
                    tree.attach_term(ee, built)?;
                }
            }
        }
        TermConfig::Obstacle {
            origin,
            radius,
            k_b,
            alpha_b,
            metric_variant,
            space,
        } => {
            let metric = metric_of(variant.obstacle_metric.unwrap_or(*metric_variant));
            let build =
                || obstacle_term(DVector::from_row_slice(origin), *radius, *k_b, *alpha_b, metric, style);
            match (space, ee_node) {
                (TermSpace::Config, _) | (TermSpace::Auto, None) => {
                    tree.attach_term(TransformTree::ROOT, build()?)?;
                }
                (TermSpace::Ee, Some(ee)) => {
                    tree.attach_term(ee, build()?)?;
                }
                (TermSpace::Auto | TermSpace::BodyPoints, Some(_)) => {
                    for node in body_nodes {
                        tree.attach_term(*node, build()?)?;
                    }
                }
                _ => anyhow::bail!("obstacle space requires a planar arm"),
            }
        }
        TermConfig::JointLimits { lambda, alpha } => {
            let RobotConfig::PlanarArm { joint_limits, .. } = &cfg.robot else {
                anyhow::bail!("joint_limits requires a planar_arm robot");
            };
            let limits: Vec<(f64, f64)> =
                joint_limits.iter().map(|l| (l[0], l[1])).collect();
            let params = LimitParams {
                lambda: *lambda,
                a1: alpha[0],
                a2: alpha[1],
                a3: alpha[2],
                a4: alpha[3],
            };
            for term in joint_limit_terms(&limits, &params, style)? {
                tree.attach_term(TransformTree::ROOT, term)?;
            }
        }
        TermConfig::DefaultConfig {
            q0,
            lambda_dc,
            k,
            alpha_psi,
        } => {
            let term = default_config_term(
                DVector::from_row_slice(q0),
                *lambda_dc,
                *k,
                *alpha_psi,
                style,
            )?;
            tree.attach_term(TransformTree::ROOT, term)?;
        }
        TermConfig::Cubby {
            center,
            width,
            depth,
            normal,
            params,
        } => {
            let scene = CubbyScene::new(
                Vector2::new(center[0], center[1]),
                *width,
                *depth,
                Vector2::new(normal[0], normal[1]),
            )?;
            let goal = cfg
                .objective
                .as_ref()
                .map(|o| o.target.clone())
                .unwrap_or_else(|| vec![center[0], center[1]]);
            let cubby_params = CubbyParams {
                m_upper: params.m_upper,
                m_lower: params.m_lower,
                alpha_m: params.alpha_m,
                r_switch: params.r_switch,
                d_front: params.d_front,
                waypoint_offset: params.waypoint_offset,
                attract_k: params.attract_k,
                attract_alpha_psi: params.attract_alpha_psi,
                extraction: (
                    params.extraction[0],
                    params.extraction[1],
                    params.extraction[2],
                    params.extraction[3],
                ),
                extraction_margin: params.extraction_margin,
                collision_k_b: params.collision_k_b,
                collision_alpha_b: params.collision_alpha_b,
            };
            let mut terms = cubby_terms(&scene, Vector2::new(goal[0], goal[1]), &cubby_params)?;
            let collision = terms.pop().expect("cubby term set ends with collision");
            let point_space = ee_node.unwrap_or(TransformTree::ROOT);
            for term in terms {
                tree.attach_term(point_space, term)?;
            }
            if body_nodes.is_empty() {
                tree.attach_term(point_space, collision)?;
            } else {
                for node in body_nodes {
                    tree.attach_term(*node, collision.clone())?;
                }
            }
        }
    }
    Ok(())
}
