//! Task maps, potentials and the fabric term catalog: attractors, barriers,
//! limit avoidance, default configuration and cubby-style heuristics.

pub mod cubby;
pub mod potential;
pub mod taskmap;

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{FabricError, Result};
use crate::finsler::{FinslerEnergy, InversePowerMetric, RadialRbfMetric, RadialTanhMetric};

pub use potential::{PotentialProfile, PotentialSpec, ScalarInput};
pub use taskmap::{Segment, TaskMap};

/// Whether a behavioral term is built as an HD2 geometry or, dropping the
/// velocity scaling, as a position-only forcing term.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FabricStyle {
    Geometric,
    Lagrangian,
}

/// Optional hard gate multiplying a geometric policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolicyGate {
    None,
    /// s(ẋ) = 1 iff ẋ < 0 on 1-D task spaces (approaching the barrier).
    VelocitySign,
}

impl PolicyGate {
    pub fn value(&self, xdot: &DVector<f64>) -> f64 {
        match self {
            PolicyGate::None => 1.0,
            PolicyGate::VelocitySign => {
                if xdot[0] < 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

#[derive(Debug, Clone)]
pub enum TermKind {
    /// π₂(x, ẋ) = s(ẋ)·‖ẋ‖²·(−∇ψ₁(x)); contributes to the policy and energy
    /// channels.
    Geometric {
        potential: PotentialSpec,
        gate: PolicyGate,
    },
    /// Natural forcing spec (M_e, M_pos∇ψ₁); contributes to the forcing
    /// channel and its energy spec to the energy channel.
    Forcing { potential: PotentialSpec },
    /// Energy only, pulled back on the execution channel.
    ExecutionEnergy,
}

/// A (Finsler energy, policy) pair attached over a task map.
#[derive(Debug, Clone)]
pub struct FabricTerm {
    pub name: String,
    pub task_map: TaskMap,
    pub energy: FinslerEnergy,
    pub kind: TermKind,
}

impl FabricTerm {
    pub fn new(
        name: impl Into<String>,
        task_map: TaskMap,
        energy: FinslerEnergy,
        kind: TermKind,
    ) -> Result<Self> {
        if task_map.child_dim() != energy.dim() {
            return Err(FabricError::DimensionMismatch {
                context: "FabricTerm energy dim vs task map",
                expected: task_map.child_dim(),
                got: energy.dim(),
            });
        }
        Ok(Self {
            name: name.into(),
            task_map,
            energy,
            kind,
        })
    }

    pub fn execution_energy(
        name: impl Into<String>,
        task_map: TaskMap,
        energy: FinslerEnergy,
    ) -> Result<Self> {
        Self::new(name, task_map, energy, TermKind::ExecutionEnergy)
    }

    /// The term's acceleration policy in its own task space (`None` for
    /// execution-energy terms).
    pub fn policy(&self, x: &DVector<f64>, xdot: &DVector<f64>) -> Result<Option<DVector<f64>>> {
        match &self.kind {
            TermKind::Geometric { potential, gate } => {
                let base = -potential.gradient(x)?;
                Ok(Some(lift_hd2(&base, xdot) * gate.value(xdot)))
            }
            TermKind::Forcing { potential } => Ok(Some(-potential.gradient(x)?)),
            TermKind::ExecutionEnergy => Ok(None),
        }
    }

    /// Natural forcing force M_pos(x)·∇ψ₁(x) for forcing terms.
    pub fn forcing_force(&self, x: &DVector<f64>) -> Result<Option<DVector<f64>>> {
        match &self.kind {
            TermKind::Forcing { potential } => {
                let grad = potential.gradient(x)?;
                let m_pos = self.energy.position_metric(x)?;
                Ok(Some(m_pos * grad))
            }
            _ => Ok(None),
        }
    }

    /// Value of the metric-weighted potential whose gradient is the forcing
    /// force; zero for non-forcing terms. Anchored so the attractor family
    /// vanishes at its minimum and barrier families vanish at infinity.
    pub fn effective_potential(&self, x: &DVector<f64>) -> Result<f64> {
        let TermKind::Forcing { potential } = &self.kind else {
            return Ok(0.0);
        };
        let u = potential.input_value(x);
        let weight = self.scalar_weight()?;
        match (&potential.profile, weight) {
            (_, ScalarWeight::Constant(c)) => Ok(c * potential.profile.value(u)?),
            (PotentialProfile::SoftNorm { k, alpha }, ScalarWeight::Radial(metric)) => {
                let prof = potential.profile.clone();
                let _ = (k, alpha);
                Ok(potential::simpson(
                    |s| metric.radial(s).unwrap_or(0.0) * prof.deriv(s).unwrap_or(0.0),
                    0.0,
                    u,
                    512,
                ))
            }
            (
                PotentialProfile::InversePower { gain, scale, power },
                ScalarWeight::InversePower { gain: a, power: m },
            ) => {
                if u <= 0.0 {
                    return Err(FabricError::BarrierViolation {
                        what: format!("effective potential of {}", self.name),
                        value: u,
                    });
                }
                let total = m + power;
                Ok(f64::from(*power) * gain * a / (scale * f64::from(total) * u.powi(total)))
            }
            (
                PotentialProfile::Limit { a1, a2, a3, a4 },
                ScalarWeight::InversePower { gain: a, power: m },
            ) => {
                if u <= 0.0 {
                    return Err(FabricError::BarrierViolation {
                        what: format!("effective potential of {}", self.name),
                        value: u,
                    });
                }
                let head = 2.0 * a * a1 / (f64::from(m + 2) * u.powi(m + 2));
                let cutoff = a4 + 60.0 / a3;
                let tail = if u < cutoff {
                    let (a2_, a3_, a4_) = (*a2, *a3, *a4);
                    potential::simpson(
                        |s| {
                            let sig = stable_sigmoid(-a3_ * (s - a4_));
                            a * a2_ * a3_ * sig / s.powi(m)
                        },
                        u,
                        cutoff,
                        1024,
                    )
                } else {
                    0.0
                };
                Ok(head + tail)
            }
            _ => Err(FabricError::NonIntegrablePotential {
                term: self.name.clone(),
            }),
        }
    }

    fn scalar_weight(&self) -> Result<ScalarWeight> {
        match &self.energy {
            FinslerEnergy::Euclidean { .. } => Ok(ScalarWeight::Constant(1.0)),
            FinslerEnergy::WeightedEuclidean { weight } => {
                let n = weight.nrows();
                let lambda = weight[(0, 0)];
                let isotropic = (0..n).all(|i| {
                    (0..n).all(|j| {
                        let expect = if i == j { lambda } else { 0.0 };
                        (weight[(i, j)] - expect).abs() <= 1e-12 * lambda.abs().max(1.0)
                    })
                });
                if isotropic {
                    Ok(ScalarWeight::Constant(lambda))
                } else {
                    Err(FabricError::NonIntegrablePotential {
                        term: self.name.clone(),
                    })
                }
            }
            FinslerEnergy::Riemannian { metric } => {
                if let Some((gain, power)) = metric.inverse_power() {
                    Ok(ScalarWeight::InversePower { gain, power })
                } else if metric.radial(1.0).is_some() {
                    Ok(ScalarWeight::Radial(metric.clone()))
                } else {
                    Err(FabricError::NonIntegrablePotential {
                        term: self.name.clone(),
                    })
                }
            }
            FinslerEnergy::GatedBarrier1d { gain, power } => Ok(ScalarWeight::InversePower {
                gain: *gain,
                power: *power,
            }),
        }
    }
}

enum ScalarWeight {
    Constant(f64),
    Radial(Arc<dyn crate::finsler::MetricField>),
    InversePower { gain: f64, power: i32 },
}

fn stable_sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Lifts a position-only acceleration to an HD2 geometry: π₂ = ‖ẋ‖²·π₀.
pub fn lift_hd2(pi0: &DVector<f64>, xdot: &DVector<f64>) -> DVector<f64> {
    pi0 * xdot.norm_squared()
}

/// Metric variant for the attractor term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AttractorMetric {
    /// Radial-basis masses (the particle experiments' design).
    Rbf,
    /// Tanh switch raising priority near the target; `positive_arg` selects
    /// the printed (uncorrected) sign.
    TanhSwitch { radius: f64, positive_arg: bool },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttractorParams {
    pub k: f64,
    pub alpha_psi: f64,
    pub m_upper: f64,
    pub m_lower: f64,
    pub alpha_m: f64,
    pub metric: AttractorMetric,
}

/// Soft-norm attraction toward `target` over the offset map x = q − q_d.
pub fn attractor_term(
    target: DVector<f64>,
    params: &AttractorParams,
    style: FabricStyle,
) -> Result<FabricTerm> {
    if params.m_upper <= params.m_lower || params.m_lower <= 0.0 {
        return Err(FabricError::InvalidParameter(
            "attractor masses need m_upper > m_lower > 0".into(),
        ));
    }
    if params.k <= 0.0 || params.alpha_psi <= 0.0 || params.alpha_m <= 0.0 {
        return Err(FabricError::InvalidParameter(
            "attractor gains must be positive".into(),
        ));
    }
    let dim = target.len();
    let energy = match params.metric {
        AttractorMetric::Rbf => FinslerEnergy::riemannian(Arc::new(RadialRbfMetric {
            m_upper: params.m_upper,
            m_lower: params.m_lower,
            alpha: params.alpha_m,
            dim,
        })),
        AttractorMetric::TanhSwitch {
            radius,
            positive_arg,
        } => FinslerEnergy::riemannian(Arc::new(RadialTanhMetric {
            m_upper: params.m_upper,
            m_lower: params.m_lower,
            alpha: params.alpha_m,
            radius,
            positive_arg,
            dim,
        })),
    };
    let potential = PotentialSpec::soft_norm(params.k, params.alpha_psi);
    let kind = match style {
        FabricStyle::Geometric => TermKind::Geometric {
            potential,
            gate: PolicyGate::None,
        },
        FabricStyle::Lagrangian => TermKind::Forcing { potential },
    };
    FabricTerm::new("attractor", TaskMap::Offset { target }, energy, kind)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObstacleMetric {
    PositionOnly,
    VelocityGated,
}

/// Repulsion from a circular obstacle over x = ‖q − q_o‖/r − 1.
pub fn obstacle_term(
    origin: DVector<f64>,
    radius: f64,
    k_b: f64,
    alpha_b: f64,
    metric: ObstacleMetric,
    style: FabricStyle,
) -> Result<FabricTerm> {
    if k_b <= 0.0 || alpha_b <= 0.0 {
        return Err(FabricError::InvalidParameter(
            "barrier gains must be positive".into(),
        ));
    }
    let map = TaskMap::circle(origin, radius)?;
    let energy = match metric {
        ObstacleMetric::PositionOnly => FinslerEnergy::riemannian(Arc::new(InversePowerMetric {
            gain: k_b,
            power: 2,
        })),
        ObstacleMetric::VelocityGated => FinslerEnergy::GatedBarrier1d {
            gain: k_b,
            power: 2,
        },
    };
    let potential = PotentialSpec::barrier(alpha_b, 2.0, 8);
    let kind = match style {
        FabricStyle::Geometric => TermKind::Geometric {
            potential,
            gate: PolicyGate::VelocitySign,
        },
        FabricStyle::Lagrangian => TermKind::Forcing { potential },
    };
    FabricTerm::new("obstacle", map, energy, kind)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LimitParams {
    /// Gated metric gain: G_l = s(ẋ)·λ/x.
    pub lambda: f64,
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    pub a4: f64,
}

impl Default for LimitParams {
    fn default() -> Self {
        Self {
            lambda: 0.25,
            a1: 0.4,
            a2: 0.2,
            a3: 20.0,
            a4: 5.0,
        }
    }
}

/// Two gated 1-D terms per joint over x = q̄_j − q_j and x = q_j − q̲_j.
pub fn joint_limit_terms(
    limits: &[(f64, f64)],
    params: &LimitParams,
    style: FabricStyle,
) -> Result<Vec<FabricTerm>> {
    if params.lambda <= 0.0 {
        return Err(FabricError::InvalidParameter(
            "limit metric gain must be positive".into(),
        ));
    }
    let dof = limits.len();
    let mut terms = Vec::with_capacity(2 * dof);
    for (joint, (lower, upper)) in limits.iter().enumerate() {
        if lower >= upper {
            return Err(FabricError::InvalidParameter(format!(
                "joint {joint} limits must satisfy lower < upper"
            )));
        }
        for (name, map) in [
            (
                format!("limit_upper_{joint}"),
                TaskMap::JointLimitUpper {
                    joint,
                    limit: *upper,
                    dof,
                },
            ),
            (
                format!("limit_lower_{joint}"),
                TaskMap::JointLimitLower {
                    joint,
                    limit: *lower,
                    dof,
                },
            ),
        ] {
            let energy = FinslerEnergy::GatedBarrier1d {
                gain: params.lambda,
                power: 1,
            };
            let potential = PotentialSpec::limit(params.a1, params.a2, params.a3, params.a4);
            let kind = match style {
                FabricStyle::Geometric => TermKind::Geometric {
                    potential,
                    gate: PolicyGate::VelocitySign,
                },
                FabricStyle::Lagrangian => TermKind::Forcing { potential },
            };
            terms.push(FabricTerm::new(name, map, energy, kind)?);
        }
    }
    Ok(terms)
}

/// Constant-metric pull toward a nominal configuration.
pub fn default_config_term(
    q0: DVector<f64>,
    lambda_dc: f64,
    k: f64,
    alpha_psi: f64,
    style: FabricStyle,
) -> Result<FabricTerm> {
    if lambda_dc <= 0.0 {
        return Err(FabricError::InvalidParameter(
            "default-configuration metric scale must be positive".into(),
        ));
    }
    let dim = q0.len();
    let energy = FinslerEnergy::weighted(DMatrix::identity(dim, dim) * lambda_dc)?;
    let potential = PotentialSpec::soft_norm(k, alpha_psi);
    let kind = match style {
        FabricStyle::Geometric => TermKind::Geometric {
            potential,
            gate: PolicyGate::None,
        },
        FabricStyle::Lagrangian => TermKind::Forcing { potential },
    };
    FabricTerm::new(
        "default_config",
        TaskMap::Offset { target: q0 },
        energy,
        kind,
    )
}
