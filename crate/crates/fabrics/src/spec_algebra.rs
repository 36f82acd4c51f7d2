//! Evaluated second-order equation fragments and their algebra.
//!
//! A spec is the pair (M, f) of a priority metric and a force such that
//! M ẍ + f = 0 on its space. Specs sum component-wise on a single space and
//! transform backward across a differentiable map x = φ(q) via
//! (M, f) ↦ (JᵀMJ, Jᵀ(f + M J̇q̇)).

use nalgebra::{DMatrix, DVector};

use crate::error::{FabricError, Result};

/// Ridge added to metric inversions so gated (exactly singular) metrics stay
/// solvable.
pub const DEFAULT_RIDGE: f64 = 1e-9;

/// Relative tolerance on metric symmetry at construction.
pub const SYMMETRY_RTOL: f64 = 1e-10;

/// Relative tolerance on the smallest metric eigenvalue (PSD check).
pub const PSD_RTOL: f64 = 1e-10;

/// An evaluated natural-form fragment (M, f) at a state.
#[derive(Debug, Clone, PartialEq)]
pub struct SpecValue {
    metric: DMatrix<f64>,
    force: DVector<f64>,
}

impl SpecValue {
    /// Validates symmetry, finiteness and positive semidefiniteness, then
    /// stores the symmetrized metric (M + Mᵀ)/2.
    pub fn new(metric: DMatrix<f64>, force: DVector<f64>) -> Result<Self> {
        if !metric.is_square() {
            return Err(FabricError::DimensionMismatch {
                context: "SpecValue metric (not square)",
                expected: metric.nrows(),
                got: metric.ncols(),
            });
        }
        if force.len() != metric.nrows() {
            return Err(FabricError::DimensionMismatch {
                context: "SpecValue force",
                expected: metric.nrows(),
                got: force.len(),
            });
        }
        if !metric.iter().all(|v| v.is_finite()) || !force.iter().all(|v| v.is_finite()) {
            return Err(FabricError::NonFinite {
                context: "SpecValue",
            });
        }
        let scale = metric.norm();
        let asymmetry = (&metric - metric.transpose()).norm();
        if asymmetry > SYMMETRY_RTOL * scale.max(1.0) {
            return Err(FabricError::AsymmetricMetric {
                context: "SpecValue",
                asymmetry: asymmetry / scale.max(1.0),
            });
        }
        let spec = Self::from_parts(metric, force);
        if !spec.metric_is_psd() {
            return Err(FabricError::IndefiniteMetric {
                context: "SpecValue",
            });
        }
        Ok(spec)
    }

    /// Constructor for outputs of operations that are closed over the
    /// invariants (sums and pullbacks of valid specs). Symmetrizes to control
    /// floating-point drift but skips the PSD factorization.
    pub(crate) fn from_parts(metric: DMatrix<f64>, force: DVector<f64>) -> Self {
        let sym = (&metric + metric.transpose()) * 0.5;
        Self { metric: sym, force }
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            metric: DMatrix::zeros(dim, dim),
            force: DVector::zeros(dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.force.len()
    }

    pub fn metric(&self) -> &DMatrix<f64> {
        &self.metric
    }

    pub fn force(&self) -> &DVector<f64> {
        &self.force
    }

    pub fn into_parts(self) -> (DMatrix<f64>, DVector<f64>) {
        (self.metric, self.force)
    }

    /// PSD within tolerance: the shifted Cholesky M + (rtol·‖M‖ + ε)I must
    /// factor. The shift keeps exactly-singular gated metrics inside the
    /// tolerance band.
    pub fn metric_is_psd(&self) -> bool {
        let n = self.dim();
        if n == 0 {
            return true;
        }
        let shift = PSD_RTOL * self.metric.norm() + 1e-30;
        let shifted = &self.metric + DMatrix::identity(n, n) * shift;
        shifted.cholesky().is_some()
    }

    /// Re-checks every construction invariant; used by property tests on
    /// operation outputs.
    pub fn check_invariants(&self) -> Result<()> {
        Self::new(self.metric.clone(), self.force.clone()).map(|_| ())
    }
}

/// An evaluated differentiable map linking a child space to its parent:
/// x = φ(q), J = ∂φ/∂q and the curvature term J̇q̇.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskMapEval {
    x: DVector<f64>,
    jacobian: DMatrix<f64>,
    curvature: DVector<f64>,
}

impl TaskMapEval {
    pub fn new(x: DVector<f64>, jacobian: DMatrix<f64>, curvature: DVector<f64>) -> Result<Self> {
        let m = x.len();
        if jacobian.nrows() != m || curvature.len() != m {
            return Err(FabricError::DimensionMismatch {
                context: "TaskMapEval",
                expected: m,
                got: jacobian.nrows().max(curvature.len()),
            });
        }
        let finite = x.iter().all(|v| v.is_finite())
            && jacobian.iter().all(|v| v.is_finite())
            && curvature.iter().all(|v| v.is_finite());
        if !finite {
            return Err(FabricError::NonFinite {
                context: "TaskMapEval",
            });
        }
        Ok(Self {
            x,
            jacobian,
            curvature,
        })
    }

    pub fn identity(x: &DVector<f64>) -> Self {
        let n = x.len();
        Self {
            x: x.clone(),
            jacobian: DMatrix::identity(n, n),
            curvature: DVector::zeros(n),
        }
    }

    pub fn parent_dim(&self) -> usize {
        self.jacobian.ncols()
    }

    pub fn child_dim(&self) -> usize {
        self.x.len()
    }

    pub fn x(&self) -> &DVector<f64> {
        &self.x
    }

    pub fn jacobian(&self) -> &DMatrix<f64> {
        &self.jacobian
    }

    pub fn curvature(&self) -> &DVector<f64> {
        &self.curvature
    }

    /// Child-space velocity ẋ = J q̇.
    pub fn map_velocity(&self, qdot: &DVector<f64>) -> DVector<f64> {
        &self.jacobian * qdot
    }

    /// Chains `self` (parent→mid) with `outer` evaluated on `self`'s output:
    /// J = J₂J₁, J̇q̇ = J₂(J̇₁q̇) + J̇₂ẋ₁.
    pub fn compose(&self, outer: &TaskMapEval) -> Result<TaskMapEval> {
        if outer.parent_dim() != self.child_dim() {
            return Err(FabricError::DimensionMismatch {
                context: "TaskMapEval::compose",
                expected: self.child_dim(),
                got: outer.parent_dim(),
            });
        }
        let jacobian = &outer.jacobian * &self.jacobian;
        let curvature = &outer.jacobian * &self.curvature + &outer.curvature;
        TaskMapEval::new(outer.x.clone(), jacobian, curvature)
    }
}

/// A solved acceleration policy [M, π] with its priority metric.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyValue {
    pub metric: DMatrix<f64>,
    pub acceleration: DVector<f64>,
}

impl PolicyValue {
    pub fn dim(&self) -> usize {
        self.acceleration.len()
    }
}

/// Component-wise sum of two specs on the same space.
pub fn sum_specs(a: &SpecValue, b: &SpecValue) -> Result<SpecValue> {
    if a.dim() != b.dim() {
        return Err(FabricError::DimensionMismatch {
            context: "sum_specs",
            expected: a.dim(),
            got: b.dim(),
        });
    }
    Ok(SpecValue::from_parts(
        &a.metric + &b.metric,
        &a.force + &b.force,
    ))
}

/// Transforms a child-space spec backward across an evaluated map:
/// (JᵀMJ, Jᵀ(f + M·J̇q̇)).
pub fn pullback_spec(spec: &SpecValue, map: &TaskMapEval) -> Result<SpecValue> {
    if spec.dim() != map.child_dim() {
        return Err(FabricError::DimensionMismatch {
            context: "pullback_spec",
            expected: map.child_dim(),
            got: spec.dim(),
        });
    }
    let j = map.jacobian();
    let jt = j.transpose();
    let metric = &jt * &spec.metric * j;
    let force = &jt * (&spec.force + &spec.metric * map.curvature());
    Ok(SpecValue::from_parts(metric, force))
}

/// Solves the ridge-regularized policy form: π = −(M + ridge·I)⁻¹ f.
///
/// The ridge guarantees solvability for gated metrics that vanish exactly;
/// a warning is logged when the metric's smallest eigenvalue falls below the
/// ridge (the solve is then ridge-dominated along that direction).
pub fn resolve_policy(spec: &SpecValue, ridge: f64) -> PolicyValue {
    let rhs = -&spec.force;
    let acceleration = solve_ridge(&spec.metric, &rhs, ridge);
    // a near-singular metric only matters when it has to carry a force
    if spec.force.norm() > 1e-12 && log::log_enabled!(log::Level::Warn) {
        let min_eig = min_symmetric_eigenvalue(&spec.metric);
        if min_eig < ridge {
            log::warn!(
                "resolve_policy: metric smallest eigenvalue {min_eig:.3e} below ridge {ridge:.3e}"
            );
        }
    }
    PolicyValue {
        metric: spec.metric.clone(),
        acceleration,
    }
}

/// Metric-weighted average of acceleration policies:
/// π̃ = (ΣMᵢ + ridge·I)⁻¹ ΣMᵢπᵢ with combined metric ΣMᵢ.
pub fn metric_weighted_average(terms: &[PolicyValue], ridge: f64) -> Result<PolicyValue> {
    let first = terms.first().ok_or(FabricError::EmptyTermList {
        context: "metric_weighted_average",
    })?;
    let n = first.dim();
    let mut metric_sum = DMatrix::zeros(n, n);
    let mut weighted = DVector::zeros(n);
    for term in terms {
        if term.dim() != n {
            return Err(FabricError::DimensionMismatch {
                context: "metric_weighted_average",
                expected: n,
                got: term.dim(),
            });
        }
        weighted += &term.metric * &term.acceleration;
        metric_sum += &term.metric;
    }
    metric_sum = (&metric_sum + metric_sum.transpose()) * 0.5;
    let acceleration = solve_ridge(&metric_sum, &weighted, ridge);
    Ok(PolicyValue {
        metric: metric_sum,
        acceleration,
    })
}

/// Validates that a matrix is square, finite, symmetric within tolerance and
/// PSD, returning the symmetrized copy.
pub fn validate_metric(metric: DMatrix<f64>, context: &'static str) -> Result<DMatrix<f64>> {
    if !metric.is_square() {
        return Err(FabricError::DimensionMismatch {
            context,
            expected: metric.nrows(),
            got: metric.ncols(),
        });
    }
    if !metric.iter().all(|v| v.is_finite()) {
        return Err(FabricError::NonFinite { context });
    }
    let scale = metric.norm();
    let asymmetry = (&metric - metric.transpose()).norm();
    if asymmetry > SYMMETRY_RTOL * scale.max(1.0) {
        return Err(FabricError::AsymmetricMetric {
            context,
            asymmetry: asymmetry / scale.max(1.0),
        });
    }
    let n = metric.nrows();
    let spec = SpecValue::from_parts(metric, DVector::zeros(n));
    if !spec.metric_is_psd() {
        return Err(FabricError::IndefiniteMetric { context });
    }
    Ok(spec.metric)
}

/// Relative eigenvalue cutoff below which a metric direction counts as its
/// null space.
const NULL_SPACE_RTOL: f64 = 1e-12;

/// Ridge-regularized solve of M x = b restricted to the metric's range:
/// x = Σ_{λᵢ > τ·λmax} vᵢ(vᵢᵀb)/(λᵢ + ridge).
///
/// Every channel force lies in range(M) up to rounding (each contribution is
/// M·something, and pullback preserves that), so components along numerically
/// null directions are rounding crumbs that the bare (M + ridge·I)⁻¹ would
/// amplify by 1/ridge. Restricting to the range keeps gated rank-deficient
/// metrics exactly solvable without that noise.
pub(crate) fn solve_ridge(metric: &DMatrix<f64>, b: &DVector<f64>, ridge: f64) -> DVector<f64> {
    let n = metric.nrows();
    if n == 0 {
        return DVector::zeros(0);
    }
    let eig = metric.clone().symmetric_eigen();
    let max = eig
        .eigenvalues
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()));
    if max <= 0.0 {
        return DVector::zeros(n);
    }
    let cutoff = NULL_SPACE_RTOL * max;
    let mut x = DVector::zeros(n);
    for i in 0..n {
        let lambda = eig.eigenvalues[i];
        if lambda > cutoff {
            let v = eig.eigenvectors.column(i);
            x += v * (v.dot(b) / (lambda + ridge));
        }
    }
    x
}

/// Smallest eigenvalue of a symmetric matrix (0 for empty matrices).
pub fn min_symmetric_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    m.clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn spec(metric: &[f64], force: &[f64]) -> SpecValue {
        let n = force.len();
        SpecValue::new(
            DMatrix::from_row_slice(n, n, metric),
            DVector::from_row_slice(force),
        )
        .unwrap()
    }

    #[test]
    fn sum_additive_identity() {
        let a = spec(&[1.0, 0.0, 0.0, 1.0], &[1.0, 0.0]);
        let zero = SpecValue::zeros(2);
        let s = sum_specs(&a, &zero).unwrap();
        assert_eq!(s, a);
    }

    #[test]
    fn sum_doubles() {
        let a = spec(&[1.0, 0.0, 0.0, 1.0], &[3.0, -2.0]);
        let s = sum_specs(&a, &a).unwrap();
        assert_relative_eq!(s.metric(), &(a.metric() * 2.0));
        assert_relative_eq!(s.force(), &(a.force() * 2.0));
    }

    #[test]
    fn sum_matches_elementwise_reference() {
        use rand::Rng;
        let mut rng = crate::seeded_rng(7);
        for _ in 0..20 {
            let n = rng.random_range(1..5usize);
            let m1 = random_psd(&mut rng, n);
            let m2 = random_psd(&mut rng, n);
            let f1 = DVector::from_fn(n, |_, _| rng.random_range(-3.0..3.0));
            let f2 = DVector::from_fn(n, |_, _| rng.random_range(-3.0..3.0));
            let a = SpecValue::new(m1.clone(), f1.clone()).unwrap();
            let b = SpecValue::new(m2.clone(), f2.clone()).unwrap();
            let s = sum_specs(&a, &b).unwrap();
            for i in 0..n {
                assert_relative_eq!(s.force()[i], f1[i] + f2[i], max_relative = 1e-14);
                for j in 0..n {
                    // metrics were symmetrized on construction
                    let expect = (m1[(i, j)] + m1[(j, i)]) / 2.0 + (m2[(i, j)] + m2[(j, i)]) / 2.0;
                    assert_relative_eq!(s.metric()[(i, j)], expect, max_relative = 1e-12);
                }
            }
        }
    }

    #[test]
    fn sum_rejects_dim_mismatch() {
        let a = spec(&[1.0], &[1.0]);
        let b = SpecValue::zeros(2);
        assert!(matches!(
            sum_specs(&a, &b),
            Err(FabricError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn pullback_identity_map_is_noop() {
        let a = spec(&[2.0, 0.5, 0.5, 1.0], &[1.0, -1.0]);
        let map = TaskMapEval::identity(&DVector::from_row_slice(&[0.3, 0.7]));
        let p = pullback_spec(&a, &map).unwrap();
        assert_relative_eq!(p.metric(), a.metric(), max_relative = 1e-15);
        assert_relative_eq!(p.force(), a.force(), max_relative = 1e-15);
    }

    #[test]
    fn pullback_scales_linear_map() {
        let a = spec(&[2.0, 0.5, 0.5, 1.0], &[1.0, -1.0]);
        let map = TaskMapEval::new(
            DVector::zeros(2),
            DMatrix::identity(2, 2) * 2.0,
            DVector::zeros(2),
        )
        .unwrap();
        let p = pullback_spec(&a, &map).unwrap();
        assert_relative_eq!(p.metric(), &(a.metric() * 4.0), max_relative = 1e-15);
        assert_relative_eq!(p.force(), &(a.force() * 2.0), max_relative = 1e-15);
    }

    #[test]
    fn pullback_matches_finite_difference_oracle() {
        // φ(q) = (q₁², q₁q₂), checked against a map evaluation rebuilt from
        // central differences.
        let phi = |q: &DVector<f64>| DVector::from_row_slice(&[q[0] * q[0], q[0] * q[1]]);
        let q = DVector::from_row_slice(&[0.8, -0.4]);
        let qdot = DVector::from_row_slice(&[0.3, 1.1]);

        let jac = DMatrix::from_row_slice(2, 2, &[2.0 * q[0], 0.0, q[1], q[0]]);
        let curvature =
            DVector::from_row_slice(&[2.0 * qdot[0] * qdot[0], 2.0 * qdot[0] * qdot[1]]);
        let analytic = TaskMapEval::new(phi(&q), jac, curvature).unwrap();

        let fd_jac = crate::fd::jacobian(&phi, &q, 1e-6);
        let fd_curv = crate::fd::curvature(&phi, &q, &qdot, 1e-5);
        let oracle = TaskMapEval::new(phi(&q), fd_jac, fd_curv).unwrap();

        let s = spec(&[1.5, 0.2, 0.2, 0.9], &[0.7, -0.3]);
        let a = pullback_spec(&s, &analytic).unwrap();
        let b = pullback_spec(&s, &oracle).unwrap();
        assert_relative_eq!(a.metric(), b.metric(), epsilon = 1e-5);
        assert_relative_eq!(a.force(), b.force(), epsilon = 1e-5);
    }

    #[test]
    fn resolve_policy_identity_metric() {
        let s = spec(&[1.0, 0.0, 0.0, 1.0], &[1.0, 2.0]);
        let p = resolve_policy(&s, DEFAULT_RIDGE);
        assert_relative_eq!(
            p.acceleration,
            DVector::from_row_slice(&[-1.0, -2.0]),
            max_relative = 1e-8
        );
    }

    #[test]
    fn resolve_policy_degenerate_rest() {
        let p = resolve_policy(&SpecValue::zeros(3), DEFAULT_RIDGE);
        assert_eq!(p.acceleration, DVector::zeros(3));
    }

    #[test]
    fn resolve_policy_diagonal_solve() {
        let s = spec(&[2.0, 0.0, 0.0, 4.0], &[2.0, 4.0]);
        let p = resolve_policy(&s, DEFAULT_RIDGE);
        assert_relative_eq!(
            p.acceleration,
            DVector::from_row_slice(&[-1.0, -1.0]),
            max_relative = 1e-8
        );
    }

    #[test]
    fn average_single_term_unchanged() {
        let t = PolicyValue {
            metric: DMatrix::identity(2, 2) * 3.0,
            acceleration: DVector::from_row_slice(&[1.0, -2.0]),
        };
        let avg = metric_weighted_average(&[t.clone()], DEFAULT_RIDGE).unwrap();
        assert_relative_eq!(avg.acceleration, t.acceleration, max_relative = 1e-8);
    }

    #[test]
    fn average_equal_metrics_is_mean() {
        let m = DMatrix::identity(2, 2) * 2.0;
        let a = PolicyValue {
            metric: m.clone(),
            acceleration: DVector::from_row_slice(&[1.0, 0.0]),
        };
        let b = PolicyValue {
            metric: m,
            acceleration: DVector::from_row_slice(&[0.0, 2.0]),
        };
        let avg = metric_weighted_average(&[a, b], DEFAULT_RIDGE).unwrap();
        assert_relative_eq!(
            avg.acceleration,
            DVector::from_row_slice(&[0.5, 1.0]),
            max_relative = 1e-7
        );
    }

    #[test]
    fn average_weighted_arithmetic() {
        // (2I, (1,0)) and (I, (0,3)) → (3I)⁻¹(2·(1,0) + (0,3)) = (2/3, 1)
        let a = PolicyValue {
            metric: DMatrix::identity(2, 2) * 2.0,
            acceleration: DVector::from_row_slice(&[1.0, 0.0]),
        };
        let b = PolicyValue {
            metric: DMatrix::identity(2, 2),
            acceleration: DVector::from_row_slice(&[0.0, 3.0]),
        };
        let avg = metric_weighted_average(&[a, b], DEFAULT_RIDGE).unwrap();
        assert_relative_eq!(
            avg.acceleration,
            DVector::from_row_slice(&[2.0 / 3.0, 1.0]),
            max_relative = 1e-7
        );
    }

    #[test]
    fn average_rejects_empty() {
        assert!(matches!(
            metric_weighted_average(&[], DEFAULT_RIDGE),
            Err(FabricError::EmptyTermList { .. })
        ));
    }

    #[test]
    fn asymmetric_metric_rejected() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(matches!(
            SpecValue::new(m, DVector::zeros(2)),
            Err(FabricError::AsymmetricMetric { .. })
        ));
    }

    #[test]
    fn indefinite_metric_rejected() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(matches!(
            SpecValue::new(m, DVector::zeros(2)),
            Err(FabricError::IndefiniteMetric { .. })
        ));
    }

    pub(crate) fn random_psd(rng: &mut impl rand::Rng, n: usize) -> DMatrix<f64> {
        let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        &a * a.transpose()
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn arb_spec(n: usize) -> impl Strategy<Value = SpecValue> {
            let entries = prop::collection::vec(-2.0f64..2.0, n * n);
            let force = prop::collection::vec(-5.0f64..5.0, n);
            (entries, force).prop_map(move |(e, f)| {
                let a = DMatrix::from_row_slice(n, n, &e);
                SpecValue::new(&a * a.transpose(), DVector::from_row_slice(&f)).unwrap()
            })
        }

        proptest! {
            #[test]
            fn summation_commutes_and_associates(
                a in arb_spec(3), b in arb_spec(3), c in arb_spec(3)
            ) {
                let ab = sum_specs(&a, &b).unwrap();
                let ba = sum_specs(&b, &a).unwrap();
                prop_assert!((ab.metric() - ba.metric()).norm() <= 1e-12);
                prop_assert!((ab.force() - ba.force()).norm() <= 1e-12);

                let left = sum_specs(&ab, &c).unwrap();
                let right = sum_specs(&a, &sum_specs(&b, &c).unwrap()).unwrap();
                prop_assert!((left.metric() - right.metric()).norm() <= 1e-12);
                prop_assert!((left.force() - right.force()).norm() <= 1e-12);
            }

            #[test]
            fn pullback_is_linear(a in arb_spec(2), b in arb_spec(2)) {
                let q = DVector::from_row_slice(&[0.9, -0.3]);
                let qdot = DVector::from_row_slice(&[0.2, 0.4]);
                let phi = |q: &DVector<f64>| {
                    DVector::from_row_slice(&[q[0] * q[0], q[0] * q[1]])
                };
                let map = TaskMapEval::new(
                    phi(&q),
                    crate::fd::jacobian(&phi, &q, 1e-6),
                    crate::fd::curvature(&phi, &q, &qdot, 1e-5),
                ).unwrap();
                let sum_then_pull = pullback_spec(&sum_specs(&a, &b).unwrap(), &map).unwrap();
                let pull_then_sum = sum_specs(
                    &pullback_spec(&a, &map).unwrap(),
                    &pullback_spec(&b, &map).unwrap(),
                ).unwrap();
                let scale = sum_then_pull.metric().norm().max(1.0);
                prop_assert!((sum_then_pull.metric() - pull_then_sum.metric()).norm() <= 1e-10 * scale);
                let fscale = sum_then_pull.force().norm().max(1.0);
                prop_assert!((sum_then_pull.force() - pull_then_sum.force()).norm() <= 1e-10 * fscale);
            }

            #[test]
            fn resolve_then_remultiply_recovers_force(a in arb_spec(3)) {
                let p = resolve_policy(&a, DEFAULT_RIDGE);
                let recovered = -(a.metric() * &p.acceleration);
                let bound = DEFAULT_RIDGE * p.acceleration.norm() + 1e-9;
                prop_assert!((recovered - a.force()).norm() <= bound * a.force().norm().max(1.0));
            }

            #[test]
            fn average_equals_resolved_natural_sum(a in arb_spec(3), b in arb_spec(3)) {
                // Convert each spec to policy form, then check the
                // metric-weighted average against resolving the summed
                // natural specs (Mᵢ, −Mᵢπᵢ).
                let pa = resolve_policy(&a, DEFAULT_RIDGE);
                let pb = resolve_policy(&b, DEFAULT_RIDGE);
                let natural = sum_specs(
                    &SpecValue::new(pa.metric.clone(), -(&pa.metric * &pa.acceleration)).unwrap(),
                    &SpecValue::new(pb.metric.clone(), -(&pb.metric * &pb.acceleration)).unwrap(),
                ).unwrap();
                let via_resolve = resolve_policy(&natural, DEFAULT_RIDGE);
                let via_average = metric_weighted_average(&[pa, pb], DEFAULT_RIDGE).unwrap();
                let scale = via_average.acceleration.norm().max(1.0);
                prop_assert!((via_average.acceleration - via_resolve.acceleration).norm() <= 1e-8 * scale);
            }

            #[test]
            fn operations_preserve_invariants(a in arb_spec(2), b in arb_spec(2)) {
                let s = sum_specs(&a, &b).unwrap();
                prop_assert!(s.check_invariants().is_ok());
                let map = TaskMapEval::new(
                    DVector::from_row_slice(&[0.1, 0.2]),
                    DMatrix::from_row_slice(2, 2, &[1.0, 2.0, -0.5, 0.3]),
                    DVector::from_row_slice(&[0.4, -0.1]),
                ).unwrap();
                prop_assert!(pullback_spec(&s, &map).unwrap().check_invariants().is_ok());
            }
        }
    }
}
