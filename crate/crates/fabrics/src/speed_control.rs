//! Energization and speed regulation.
//!
//! Energizing a geometry adds an acceleration α·ẋ along the direction of
//! motion so a chosen energy is conserved; the regulator reuses the same
//! coefficients to hold a separate execution energy at a setpoint while
//! keeping the damping needed for convergence.

use nalgebra::{DMatrix, DVector};

use crate::error::{FabricError, Result};

/// Velocity quadratic forms below this are treated as rest.
pub const REST_TOLERANCE: f64 = 1e-12;

/// Energization coefficient: with ẍ = π + αẋ the energy of (M_e, f_e) is
/// conserved when α = −(ẋᵀM_eẋ)⁻¹·ẋᵀ(M_eπ + f_e). Returns 0 at rest.
pub fn energization_alpha(
    tensor: &DMatrix<f64>,
    curvature_force: &DVector<f64>,
    policy: &DVector<f64>,
    xdot: &DVector<f64>,
) -> f64 {
    let quad = xdot.dot(&(tensor * xdot));
    if quad <= REST_TOLERANCE {
        return 0.0;
    }
    -(xdot.dot(&(tensor * policy)) + xdot.dot(curvature_force)) / quad
}

/// Zero-work modification f_f = P_e[−M_eπ − f_e] with
/// P_e = I − M_eẋẋᵀ/(ẋᵀM_eẋ); satisfies ẋᵀf_f = 0. At rest the rank-one
/// correction is omitted, matching the α = 0 convention.
pub fn zero_work_force(
    tensor: &DMatrix<f64>,
    curvature_force: &DVector<f64>,
    policy: &DVector<f64>,
    xdot: &DVector<f64>,
) -> DVector<f64> {
    let base = -(tensor * policy) - curvature_force;
    let quad = xdot.dot(&(tensor * xdot));
    if quad <= REST_TOLERANCE {
        return base;
    }
    let projected = xdot.dot(&base) / quad;
    &base - (tensor * xdot) * projected
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EtaMode {
    /// η from the execution-energy error gate.
    Gated,
    /// Pinned interpolation value.
    Fixed(f64),
}

/// Gains and gates of the speed regulator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpeedControlParams {
    /// Baseline damping B̲ > 0.
    pub b_base: f64,
    /// Convergence damping gain B > B̲, switched in near the goal.
    pub b_gain: f64,
    /// Rate of the goal-distance switch.
    pub alpha_beta: f64,
    /// Radius where the goal-distance switch is half engaged.
    pub radius: f64,
    /// Rate of the energy-error gate.
    pub alpha_eta: f64,
    /// Offset of the energy-error gate.
    pub alpha_shift: f64,
    /// Execution-energy setpoint L_ex^d.
    pub exec_energy_target: f64,
    /// Boost gain k ≥ 0; sets the boost acceleration level directly.
    pub boost_gain: f64,
    /// Normalizer ε > 0 in the boost denominator.
    pub epsilon: f64,
    pub eta_mode: EtaMode,
}

impl SpeedControlParams {
    pub fn validate(&self) -> Result<()> {
        if self.b_base <= 0.0 {
            return Err(FabricError::InvalidParameter("b_base must be > 0".into()));
        }
        if self.b_gain <= self.b_base {
            return Err(FabricError::InvalidParameter(
                "b_gain must exceed b_base".into(),
            ));
        }
        if self.epsilon <= 0.0 {
            return Err(FabricError::InvalidParameter("epsilon must be > 0".into()));
        }
        if self.boost_gain < 0.0 {
            return Err(FabricError::InvalidParameter(
                "boost_gain must be >= 0".into(),
            ));
        }
        Ok(())
    }
}

impl Default for SpeedControlParams {
    fn default() -> Self {
        Self {
            b_base: 0.01,
            b_gain: 8.0,
            alpha_beta: 8.0,
            radius: 0.5,
            alpha_eta: 2.0,
            alpha_shift: 0.0,
            exec_energy_target: 2.0,
            boost_gain: 20.0,
            epsilon: 1e-6,
            eta_mode: EtaMode::Gated,
        }
    }
}

/// Per-step regulator internals, recorded for analysis.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RegulatorTrace {
    pub alpha_le: f64,
    pub alpha_ex0: f64,
    pub alpha_ex_psi: f64,
    pub alpha_ex_eta: f64,
    pub s_beta: f64,
    pub eta: f64,
    pub beta_reg: f64,
    pub alpha_boost: f64,
    pub alpha_reg: f64,
}

/// Fabric and execution energy channels at the root.
pub struct ChannelEnergies<'a> {
    pub fabric_tensor: &'a DMatrix<f64>,
    pub fabric_force: &'a DVector<f64>,
    pub exec_tensor: &'a DMatrix<f64>,
    pub exec_force: &'a DVector<f64>,
}

/// Goal-distance damping switch s_β = ½(tanh(−α_β(‖x‖ − r)) + 1).
pub fn damping_switch(goal_distance: f64, alpha_beta: f64, radius: f64) -> f64 {
    0.5 * ((-alpha_beta * (goal_distance - radius)).tanh() + 1.0)
}

/// Energy gate η = ½(tanh(−α_η(L_ex − L_ex^d) − α_shift) + 1).
pub fn energy_gate(exec_energy: f64, params: &SpeedControlParams) -> f64 {
    match params.eta_mode {
        EtaMode::Fixed(v) => v,
        EtaMode::Gated => {
            0.5 * ((-params.alpha_eta * (exec_energy - params.exec_energy_target)
                - params.alpha_shift)
                .tanh()
                + 1.0)
        }
    }
}

/// Assembles the regulated root acceleration
/// q̈ = a_ψ + π₀ + α_reg·ẋ with
/// α_reg = α_ex^η − β_reg + α_boost,
/// β_reg = s_β·B + B̲ + max{0, α_ex^η − α_{L_e}}.
pub fn regulate(
    pi0: &DVector<f64>,
    a_psi: &DVector<f64>,
    channels: &ChannelEnergies<'_>,
    goal_offset: &DVector<f64>,
    xdot: &DVector<f64>,
    params: &SpeedControlParams,
) -> (DVector<f64>, RegulatorTrace) {
    let alpha_le = energization_alpha(channels.fabric_tensor, channels.fabric_force, pi0, xdot);
    let alpha_ex0 = energization_alpha(channels.exec_tensor, channels.exec_force, pi0, xdot);
    let forced = pi0 + a_psi;
    let alpha_ex_psi =
        energization_alpha(channels.exec_tensor, channels.exec_force, &forced, xdot);

    let exec_energy = 0.5 * xdot.dot(&(channels.exec_tensor * xdot));
    let eta = energy_gate(exec_energy, params);
    let alpha_ex_eta = eta * alpha_ex0 + (1.0 - eta) * alpha_ex_psi;

    let s_beta = damping_switch(goal_offset.norm(), params.alpha_beta, params.radius);
    let beta_reg = s_beta * params.b_gain + params.b_base + (alpha_ex_eta - alpha_le).max(0.0);
    let boost_coeff = params.boost_gain * eta * (1.0 - s_beta);
    let alpha_boost = boost_coeff / (xdot.norm() + params.epsilon);
    let alpha_reg = alpha_ex_eta - beta_reg + alpha_boost;

    // the boost normalizer stays attached to ẋ: the term is a bounded
    // acceleration of magnitude ≤ boost_coeff along the direction of motion
    let qddot = regulated_accel(
        &forced,
        xdot,
        &FrozenRegulation {
            alpha_lin: alpha_ex_eta - beta_reg,
            boost_coeff,
            epsilon: params.epsilon,
        },
    );
    (
        qddot,
        RegulatorTrace {
            alpha_le,
            alpha_ex0,
            alpha_ex_psi,
            alpha_ex_eta,
            s_beta,
            eta,
            beta_reg,
            alpha_boost,
            alpha_reg,
        },
    )
}

/// Regulator scalars held fixed across integrator stages: the linear
/// along-velocity coefficient and the boost magnitude (whose 1/(‖ẋ‖+ε)
/// normalization tracks the stage velocity).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrozenRegulation {
    pub alpha_lin: f64,
    pub boost_coeff: f64,
    pub epsilon: f64,
}

impl FrozenRegulation {
    pub fn damping(beta: f64) -> Self {
        Self {
            alpha_lin: -beta,
            boost_coeff: 0.0,
            epsilon: 1.0,
        }
    }
}

/// q̈ = (π₀ + a_ψ) + α_lin·ẋ + boost·ẋ/(‖ẋ‖+ε); shared by the regulator and
/// the per-stage evaluation so recorded accelerations reproduce exactly.
pub fn regulated_accel(
    forced: &DVector<f64>,
    xdot: &DVector<f64>,
    frozen: &FrozenRegulation,
) -> DVector<f64> {
    forced
        + xdot * frozen.alpha_lin
        + xdot * (frozen.boost_coeff / (xdot.norm() + frozen.epsilon))
}

/// The plain forced-damped assembly q̈ = π₀ + a_ψ − β·ẋ used for the
/// basic-damping comparisons.
pub fn basic_damping(
    pi0: &DVector<f64>,
    a_psi: &DVector<f64>,
    beta: f64,
    xdot: &DVector<f64>,
) -> DVector<f64> {
    pi0 + a_psi - xdot * beta
}
