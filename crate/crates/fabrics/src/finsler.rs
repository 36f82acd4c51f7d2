//! Finsler energy families: energy value, energy tensor, curvature force and
//! Hamiltonian, plus sampled admissibility validation.
//!
//! An admissible energy is nonnegative (zero only at rest), positively
//! homogeneous of degree 2 in velocity, and carries an invertible velocity
//! Hessian. Gated families deliberately violate invertibility in their off
//! regime; the validator reports that rather than rejecting the family.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{FabricError, Result};

/// Position-dependent metric G(x) defining a Riemannian energy ½ẋᵀG(x)ẋ.
pub trait MetricField: fmt::Debug + Send + Sync {
    fn dim(&self) -> usize;

    fn metric(&self, x: &DVector<f64>) -> Result<DMatrix<f64>>;

    /// Partial derivatives ∂G/∂x_i, one matrix per coordinate.
    fn partials(&self, x: &DVector<f64>) -> Result<Vec<DMatrix<f64>>>;

    /// Validity check on the position domain (barriers restrict to x > 0).
    fn check_domain(&self, _x: &DVector<f64>) -> Result<()> {
        Ok(())
    }

    /// Box used when sampling positions for validation.
    fn sample_bounds(&self) -> (f64, f64) {
        (-2.0, 2.0)
    }

    /// Isotropic scalar profile g(r) for fields radial about the task-space
    /// origin; lets the potential weighting integrate along the radius.
    fn radial(&self, _r: f64) -> Option<f64> {
        None
    }

    /// (gain, power) when the field is g(x) = gain/xᵖ; enables closed-form
    /// weighted potentials.
    fn inverse_power(&self) -> Option<(f64, i32)> {
        None
    }
}

/// Isotropic radial-basis metric g(r) = (m̄ − m̲)e^{−(αr)²} + m̲ around the
/// task-space origin.
#[derive(Debug, Clone)]
pub struct RadialRbfMetric {
    pub m_upper: f64,
    pub m_lower: f64,
    pub alpha: f64,
    pub dim: usize,
}

impl RadialRbfMetric {
    fn scalar(&self, r: f64) -> f64 {
        (self.m_upper - self.m_lower) * (-(self.alpha * r).powi(2)).exp() + self.m_lower
    }

    fn scalar_deriv(&self, r: f64) -> f64 {
        -2.0 * self.alpha * self.alpha
            * r
            * (self.m_upper - self.m_lower)
            * (-(self.alpha * r).powi(2)).exp()
    }
}

impl MetricField for RadialRbfMetric {
    fn dim(&self) -> usize {
        self.dim
    }

    fn radial(&self, r: f64) -> Option<f64> {
        Some(self.scalar(r))
    }

    fn metric(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        Ok(DMatrix::identity(self.dim, self.dim) * self.scalar(x.norm()))
    }

    fn partials(&self, x: &DVector<f64>) -> Result<Vec<DMatrix<f64>>> {
        let r = x.norm();
        let gp = self.scalar_deriv(r);
        Ok((0..self.dim)
            .map(|i| {
                let dr = if r > 1e-12 { x[i] / r } else { 0.0 };
                DMatrix::identity(self.dim, self.dim) * (gp * dr)
            })
            .collect())
    }
}

/// Isotropic tanh-switched metric g(r) = (m̄ − m̲)s(r) + m̲ with
/// s(r) = ½(tanh(∓α(r − r₀)) + 1). The negative argument (default) raises
/// priority as r shrinks; the printed positive-argument form is selectable.
#[derive(Debug, Clone)]
pub struct RadialTanhMetric {
    pub m_upper: f64,
    pub m_lower: f64,
    pub alpha: f64,
    pub radius: f64,
    pub positive_arg: bool,
    pub dim: usize,
}

impl RadialTanhMetric {
    fn sign(&self) -> f64 {
        if self.positive_arg {
            1.0
        } else {
            -1.0
        }
    }

    fn switch(&self, r: f64) -> f64 {
        0.5 * ((self.sign() * self.alpha * (r - self.radius)).tanh() + 1.0)
    }

    fn switch_deriv(&self, r: f64) -> f64 {
        let t = (self.sign() * self.alpha * (r - self.radius)).tanh();
        0.5 * self.sign() * self.alpha * (1.0 - t * t)
    }
}

impl MetricField for RadialTanhMetric {
    fn dim(&self) -> usize {
        self.dim
    }

    fn radial(&self, r: f64) -> Option<f64> {
        let g = (self.m_upper - self.m_lower) * self.switch(r) + self.m_lower;
        Some(g)
    }

    fn metric(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        let g = (self.m_upper - self.m_lower) * self.switch(x.norm()) + self.m_lower;
        Ok(DMatrix::identity(self.dim, self.dim) * g)
    }

    fn partials(&self, x: &DVector<f64>) -> Result<Vec<DMatrix<f64>>> {
        let r = x.norm();
        let gp = (self.m_upper - self.m_lower) * self.switch_deriv(r);
        Ok((0..self.dim)
            .map(|i| {
                let dr = if r > 1e-12 { x[i] / r } else { 0.0 };
                DMatrix::identity(self.dim, self.dim) * (gp * dr)
            })
            .collect())
    }
}

/// One-dimensional barrier metric g(x) = gain / xᵖ on x > 0.
#[derive(Debug, Clone)]
pub struct InversePowerMetric {
    pub gain: f64,
    pub power: i32,
}

impl InversePowerMetric {
    pub fn scalar(&self, x: f64) -> f64 {
        self.gain / x.powi(self.power)
    }

    fn scalar_deriv(&self, x: f64) -> f64 {
        -f64::from(self.power) * self.gain / x.powi(self.power + 1)
    }
}

impl MetricField for InversePowerMetric {
    fn dim(&self) -> usize {
        1
    }

    fn inverse_power(&self) -> Option<(f64, i32)> {
        Some((self.gain, self.power))
    }

    fn metric(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.check_domain(x)?;
        Ok(DMatrix::from_element(1, 1, self.scalar(x[0])))
    }

    fn partials(&self, x: &DVector<f64>) -> Result<Vec<DMatrix<f64>>> {
        self.check_domain(x)?;
        Ok(vec![DMatrix::from_element(1, 1, self.scalar_deriv(x[0]))])
    }

    fn check_domain(&self, x: &DVector<f64>) -> Result<()> {
        if x[0] <= 0.0 {
            return Err(FabricError::BarrierViolation {
                what: "inverse-power metric".into(),
                value: x[0],
            });
        }
        Ok(())
    }

    fn sample_bounds(&self) -> (f64, f64) {
        (0.05, 2.5)
    }
}

/// A Finsler energy family with analytic derivatives.
#[derive(Debug, Clone)]
pub enum FinslerEnergy {
    /// ½‖ẋ‖²
    Euclidean { dim: usize },
    /// ½ẋᵀWẋ with constant symmetric PSD W
    WeightedEuclidean { weight: DMatrix<f64> },
    /// ½ẋᵀG(x)ẋ
    Riemannian { metric: Arc<dyn MetricField> },
    /// ½ s(ẋ)·(gain/xᵖ)·ẋ² with the hard gate s(ẋ) = 1 iff ẋ < 0
    GatedBarrier1d { gain: f64, power: i32 },
}

impl FinslerEnergy {
    pub fn weighted(weight: DMatrix<f64>) -> Result<Self> {
        let weight = crate::spec_algebra::validate_metric(weight, "WeightedEuclidean")?;
        Ok(FinslerEnergy::WeightedEuclidean { weight })
    }

    pub fn riemannian(metric: Arc<dyn MetricField>) -> Self {
        FinslerEnergy::Riemannian { metric }
    }

    pub fn dim(&self) -> usize {
        match self {
            FinslerEnergy::Euclidean { dim } => *dim,
            FinslerEnergy::WeightedEuclidean { weight } => weight.nrows(),
            FinslerEnergy::Riemannian { metric } => metric.dim(),
            FinslerEnergy::GatedBarrier1d { .. } => 1,
        }
    }

    /// Metric with any velocity gate stripped; weights forcing-term
    /// potential gradients.
    pub fn position_metric(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        match self {
            FinslerEnergy::Euclidean { dim } => Ok(DMatrix::identity(*dim, *dim)),
            FinslerEnergy::WeightedEuclidean { weight } => Ok(weight.clone()),
            FinslerEnergy::Riemannian { metric } => metric.metric(x),
            FinslerEnergy::GatedBarrier1d { gain, power } => {
                barrier_domain(x[0])?;
                Ok(DMatrix::from_element(1, 1, gain / x[0].powi(*power)))
            }
        }
    }

    pub fn evaluate(&self, x: &DVector<f64>, xdot: &DVector<f64>) -> Result<EnergyEval> {
        let n = self.dim();
        if x.len() != n || xdot.len() != n {
            return Err(FabricError::DimensionMismatch {
                context: "FinslerEnergy::evaluate",
                expected: n,
                got: x.len().max(xdot.len()),
            });
        }
        match self {
            FinslerEnergy::Euclidean { dim } => {
                let energy = 0.5 * xdot.norm_squared();
                Ok(EnergyEval {
                    energy,
                    tensor: DMatrix::identity(*dim, *dim),
                    curvature_force: DVector::zeros(*dim),
                    hamiltonian: energy,
                })
            }
            FinslerEnergy::WeightedEuclidean { weight } => {
                let energy = 0.5 * xdot.dot(&(weight * xdot));
                Ok(EnergyEval {
                    energy,
                    tensor: weight.clone(),
                    curvature_force: DVector::zeros(n),
                    hamiltonian: energy,
                })
            }
            FinslerEnergy::Riemannian { metric } => {
                metric.check_domain(x)?;
                let g = metric.metric(x)?;
                let partials = metric.partials(x)?;
                let energy = 0.5 * xdot.dot(&(&g * xdot));
                // f_e = ∂_{ẋx}L ẋ − ∂ₓL with L = ½ẋᵀG(x)ẋ:
                // f_i = Σ_j (∂G/∂x_j ẋ)_i ẋ_j − ½ ẋᵀ(∂G/∂x_i)ẋ
                let mut f = DVector::zeros(n);
                for (j, dg) in partials.iter().enumerate() {
                    f += (dg * xdot) * xdot[j];
                }
                for (i, dg) in partials.iter().enumerate() {
                    f[i] -= 0.5 * xdot.dot(&(dg * xdot));
                }
                Ok(EnergyEval {
                    energy,
                    tensor: g,
                    curvature_force: f,
                    hamiltonian: energy,
                })
            }
            FinslerEnergy::GatedBarrier1d { gain, power } => {
                barrier_domain(x[0])?;
                let gate = if xdot[0] < 0.0 { 1.0 } else { 0.0 };
                let g = gain / x[0].powi(*power);
                let gp = -f64::from(*power) * gain / x[0].powi(*power + 1);
                let energy = 0.5 * gate * g * xdot[0] * xdot[0];
                Ok(EnergyEval {
                    energy,
                    tensor: DMatrix::from_element(1, 1, gate * g),
                    curvature_force: DVector::from_element(1, 0.5 * gate * gp * xdot[0] * xdot[0]),
                    hamiltonian: energy,
                })
            }
        }
    }
}

fn barrier_domain(x: f64) -> Result<()> {
    if x <= 0.0 {
        return Err(FabricError::BarrierViolation {
            what: "barrier energy".into(),
            value: x,
        });
    }
    Ok(())
}

/// Everything the Euler-Lagrange equation of an energy provides at a state.
#[derive(Debug, Clone)]
pub struct EnergyEval {
    /// L_e(x, ẋ)
    pub energy: f64,
    /// M_e = ∂²_{ẋẋ}L_e
    pub tensor: DMatrix<f64>,
    /// f_e = ∂_{ẋx}L_e ẋ − ∂ₓL_e
    pub curvature_force: DVector<f64>,
    /// H_e = ẋᵀ∂_ẋL_e − L_e (equals L_e for HD2 energies)
    pub hamiltonian: f64,
}

/// Anything with Euler-Lagrange data that can be run through the validator;
/// lets deliberately inadmissible Lagrangians be checked in tests.
pub trait Lagrangian {
    fn dim(&self) -> usize;
    fn evaluate(&self, x: &DVector<f64>, xdot: &DVector<f64>) -> Result<EnergyEval>;
    fn sample_bounds(&self) -> (f64, f64) {
        (-2.0, 2.0)
    }
}

impl Lagrangian for FinslerEnergy {
    fn dim(&self) -> usize {
        FinslerEnergy::dim(self)
    }

    fn evaluate(&self, x: &DVector<f64>, xdot: &DVector<f64>) -> Result<EnergyEval> {
        FinslerEnergy::evaluate(self, x, xdot)
    }

    fn sample_bounds(&self) -> (f64, f64) {
        match self {
            FinslerEnergy::GatedBarrier1d { .. } => (0.05, 2.5),
            FinslerEnergy::Riemannian { metric } => metric.sample_bounds(),
            _ => (-2.0, 2.0),
        }
    }
}

pub const HD2_LAMBDAS: [f64; 4] = [0.0, 0.5, 2.0, 10.0];

#[derive(Debug, Clone)]
pub struct ConditionReport {
    pub name: &'static str,
    pub passed: bool,
    /// Worst observed margin for the condition (meaning varies per check).
    pub worst: f64,
    pub failures: usize,
}

#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub samples: usize,
    pub conditions: Vec<ConditionReport>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.conditions.iter().all(|c| c.passed)
    }

    pub fn condition(&self, name: &str) -> Option<&ConditionReport> {
        self.conditions.iter().find(|c| c.name == name)
    }
}

/// Samples random states and checks positivity, degree-2 homogeneity, tensor
/// invertibility and the HD0 tensor property, recording failures per
/// condition instead of erroring.
pub fn validate_finsler(
    energy: &dyn Lagrangian,
    sample_count: usize,
    seed: u64,
) -> Result<ValidationReport> {
    if sample_count == 0 {
        return Err(FabricError::InvalidParameter(
            "sample_count must be >= 1".into(),
        ));
    }
    let n = energy.dim();
    let (lo, hi) = energy.sample_bounds();
    let mut rng = crate::seeded_rng(seed);

    let mut positivity = ConditionReport {
        name: "positivity",
        passed: true,
        worst: f64::INFINITY,
        failures: 0,
    };
    let mut hd2 = ConditionReport {
        name: "hd2",
        passed: true,
        worst: 0.0,
        failures: 0,
    };
    let mut invertibility = ConditionReport {
        name: "tensor_invertibility",
        passed: true,
        worst: f64::INFINITY,
        failures: 0,
    };
    let mut hd0 = ConditionReport {
        name: "hd0_tensor",
        passed: true,
        worst: 0.0,
        failures: 0,
    };

    for _ in 0..sample_count {
        let x = DVector::from_fn(n, |_, _| rng.random_range(lo..hi));
        let mut xdot = DVector::from_fn(n, |_, _| rng.random_range(-2.0..2.0));
        if xdot.norm() < 1e-3 {
            xdot[0] += 1.0;
        }
        let eval = energy.evaluate(&x, &xdot)?;

        if eval.energy < -1e-12 || eval.energy <= 0.0 {
            positivity.failures += 1;
        }
        positivity.worst = positivity.worst.min(eval.energy);

        for lambda in HD2_LAMBDAS {
            let scaled = energy.evaluate(&x, &(&xdot * lambda))?;
            let err = (scaled.energy - lambda * lambda * eval.energy).abs();
            let tol = 1e-9 * (1.0 + lambda * lambda * eval.energy.abs());
            if err > tol {
                hd2.failures += 1;
            }
            hd2.worst = hd2.worst.max(err);

            if lambda > 0.0 {
                let tensor_err = (&scaled.tensor - &eval.tensor).norm();
                let tensor_tol = 1e-9 * (1.0 + eval.tensor.norm());
                if tensor_err > tensor_tol {
                    hd0.failures += 1;
                }
                hd0.worst = hd0.worst.max(tensor_err);
            }
        }

        let min_eig = crate::spec_algebra::min_symmetric_eigenvalue(&eval.tensor);
        if min_eig.abs() <= 1e-12 * (1.0 + eval.tensor.norm()) {
            invertibility.failures += 1;
        }
        invertibility.worst = invertibility.worst.min(min_eig);
    }

    positivity.passed = positivity.failures == 0;
    hd2.passed = hd2.failures == 0;
    invertibility.passed = invertibility.failures == 0;
    hd0.passed = hd0.failures == 0;

    Ok(ValidationReport {
        samples: sample_count,
        conditions: vec![positivity, hd2, invertibility, hd0],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn euclidean_eval() {
        let e = FinslerEnergy::Euclidean { dim: 2 };
        let x = DVector::from_row_slice(&[0.3, -0.9]);
        let xdot = DVector::from_row_slice(&[1.0, 2.0]);
        let eval = e.evaluate(&x, &xdot).unwrap();
        assert_relative_eq!(eval.energy, 2.5);
        assert_relative_eq!(eval.tensor, DMatrix::identity(2, 2));
        assert_eq!(eval.curvature_force, DVector::zeros(2));
        assert_relative_eq!(eval.hamiltonian, eval.energy);
    }

    #[test]
    fn constant_metric_has_no_curvature() {
        let w = DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.5]);
        let e = FinslerEnergy::WeightedEuclidean { weight: w };
        for (x, xd) in [([0.1, 0.2], [1.0, -1.0]), ([-2.0, 0.5], [0.2, 3.0])] {
            let eval = e
                .evaluate(&DVector::from_row_slice(&x), &DVector::from_row_slice(&xd))
                .unwrap();
            assert_eq!(eval.curvature_force, DVector::zeros(2));
        }
    }

    /// G(x) = diag(1 + x₁², 1), checked against FD Hessian/gradient oracles.
    #[derive(Debug)]
    struct DiagQuadratic;

    impl MetricField for DiagQuadratic {
        fn dim(&self) -> usize {
            2
        }
        fn metric(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
            Ok(DMatrix::from_row_slice(
                2,
                2,
                &[1.0 + x[0] * x[0], 0.0, 0.0, 1.0],
            ))
        }
        fn partials(&self, x: &DVector<f64>) -> Result<Vec<DMatrix<f64>>> {
            Ok(vec![
                DMatrix::from_row_slice(2, 2, &[2.0 * x[0], 0.0, 0.0, 0.0]),
                DMatrix::zeros(2, 2),
            ])
        }
    }

    #[test]
    fn riemannian_matches_finite_differences() {
        let e = FinslerEnergy::riemannian(Arc::new(DiagQuadratic));
        let lag = |x: &DVector<f64>, xd: &DVector<f64>| e.evaluate(x, xd).unwrap().energy;
        let mut rng = crate::seeded_rng(3);
        use rand::Rng;
        for _ in 0..25 {
            let x = DVector::from_fn(2, |_, _| rng.random_range(-1.5..1.5));
            let xd = DVector::from_fn(2, |_, _| rng.random_range(-1.5..1.5));
            let eval = e.evaluate(&x, &xd).unwrap();

            let tensor_fd = crate::fd::hessian(&|v: &DVector<f64>| lag(&x, v), &xd, 1e-4);
            assert_relative_eq!(eval.tensor, tensor_fd, epsilon = 1e-5);

            let cross = crate::fd::cross_hessian(&|v, p| lag(p, v), &xd, &x, 1e-4);
            let grad_x = crate::fd::gradient(&|p: &DVector<f64>| lag(p, &xd), &x, 1e-5);
            let f_fd = &cross * &xd - grad_x;
            assert_relative_eq!(eval.curvature_force, f_fd, epsilon = 1e-5);
        }
    }

    #[test]
    fn hd2_identity_on_samples() {
        // ẋᵀM_eẋ = 2L_e and H_e = L_e
        let e = FinslerEnergy::riemannian(Arc::new(RadialRbfMetric {
            m_upper: 2.0,
            m_lower: 0.2,
            alpha: 0.75,
            dim: 2,
        }));
        let mut rng = crate::seeded_rng(11);
        use rand::Rng;
        for _ in 0..50 {
            let x = DVector::from_fn(2, |_, _| rng.random_range(-2.0..2.0));
            let xd = DVector::from_fn(2, |_, _| rng.random_range(-2.0..2.0));
            let eval = e.evaluate(&x, &xd).unwrap();
            let quad = xd.dot(&(&eval.tensor * &xd));
            assert_relative_eq!(quad, 2.0 * eval.energy, max_relative = 1e-8);
            assert_relative_eq!(eval.hamiltonian, eval.energy, max_relative = 1e-12);
        }
    }

    #[test]
    fn euler_identity_against_fd_velocity_gradient() {
        let e = FinslerEnergy::riemannian(Arc::new(DiagQuadratic));
        let mut rng = crate::seeded_rng(5);
        use rand::Rng;
        for _ in 0..30 {
            let x = DVector::from_fn(2, |_, _| rng.random_range(-1.0..1.0));
            let xd = DVector::from_fn(2, |_, _| rng.random_range(-2.0..2.0));
            let l = |v: &DVector<f64>| e.evaluate(&x, v).unwrap().energy;
            let dl_dv = crate::fd::gradient(&l, &xd, 1e-6);
            assert_relative_eq!(xd.dot(&dl_dv), 2.0 * l(&xd), max_relative = 1e-7);
        }
    }

    #[test]
    fn gated_barrier_regimes() {
        let e = FinslerEnergy::GatedBarrier1d {
            gain: 20.0,
            power: 2,
        };
        let x = DVector::from_element(1, 1.0);
        let approaching = e.evaluate(&x, &DVector::from_element(1, -0.5)).unwrap();
        assert_relative_eq!(approaching.tensor[(0, 0)], 20.0);
        let receding = e.evaluate(&x, &DVector::from_element(1, 0.5)).unwrap();
        assert_eq!(receding.tensor[(0, 0)], 0.0);
        assert_eq!(receding.energy, 0.0);
        // boundary ẋ = 0 takes the gate-off value
        let rest = e.evaluate(&x, &DVector::zeros(1)).unwrap();
        assert_eq!(rest.tensor[(0, 0)], 0.0);
    }

    #[test]
    fn barrier_domain_violation() {
        let e = FinslerEnergy::GatedBarrier1d {
            gain: 1.0,
            power: 2,
        };
        let err = e.evaluate(&DVector::from_element(1, -0.1), &DVector::zeros(1));
        assert!(matches!(err, Err(FabricError::BarrierViolation { .. })));
    }

    #[test]
    fn validate_euclidean_passes_all() {
        let e = FinslerEnergy::Euclidean { dim: 3 };
        let report = validate_finsler(&e, 200, 42).unwrap();
        assert!(report.passed(), "{report:?}");
    }

    #[test]
    fn validate_gated_barrier_reports_invertibility_failure() {
        let e = FinslerEnergy::GatedBarrier1d {
            gain: 20.0,
            power: 2,
        };
        let report = validate_finsler(&e, 200, 42).unwrap();
        let inv = report.condition("tensor_invertibility").unwrap();
        assert!(!inv.passed);
        assert!(inv.failures > 0);
    }

    /// ½‖ẋ‖³: deliberately homogeneous of degree 3.
    struct CubicSpeed;

    impl Lagrangian for CubicSpeed {
        fn dim(&self) -> usize {
            2
        }
        fn evaluate(&self, _x: &DVector<f64>, xdot: &DVector<f64>) -> Result<EnergyEval> {
            let s = xdot.norm();
            let energy = 0.5 * s.powi(3);
            // Hessian of ½s³: (3/2)(s·I + ẋẋᵀ/s)
            let tensor = if s > 1e-12 {
                DMatrix::identity(2, 2) * (1.5 * s) + (xdot * xdot.transpose()) * (1.5 / s)
            } else {
                DMatrix::zeros(2, 2)
            };
            Ok(EnergyEval {
                energy,
                tensor,
                curvature_force: DVector::zeros(2),
                hamiltonian: energy * 0.5,
            })
        }
    }

    #[test]
    fn validate_flags_wrong_homogeneity_degree() {
        let report = validate_finsler(&CubicSpeed, 100, 7).unwrap();
        let hd2 = report.condition("hd2").unwrap();
        assert!(!hd2.passed);
        let hd0 = report.condition("hd0_tensor").unwrap();
        assert!(!hd0.passed);
    }
}
