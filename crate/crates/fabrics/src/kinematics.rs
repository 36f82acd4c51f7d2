//! Point-particle and planar N-link arm models: forward kinematics, analytic
//! Jacobians and the J̇q̇ curvature term.

use nalgebra::{DMatrix, DVector, Vector2};

use crate::error::{FabricError, Result};
use crate::spec_algebra::TaskMapEval;

/// Planar base placement (x, y, heading).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BasePose {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Default for BasePose {
    fn default() -> Self {
        Self {
            x: 0.0,
            y: 0.0,
            theta: 0.0,
        }
    }
}

/// A point fixed on the arm: a link index plus a fractional offset along it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BodyPoint {
    pub link: usize,
    pub offset: f64,
}

/// Planar revolute chain; joint angles are counter-clockwise positive.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanarArm {
    link_lengths: Vec<f64>,
    base: BasePose,
}

impl PlanarArm {
    pub fn new(link_lengths: Vec<f64>, base: BasePose) -> Result<Self> {
        if link_lengths.is_empty() {
            return Err(FabricError::InvalidParameter(
                "arm needs at least one link".into(),
            ));
        }
        if link_lengths.iter().any(|l| *l <= 0.0 || !l.is_finite()) {
            return Err(FabricError::InvalidParameter(
                "link lengths must be positive".into(),
            ));
        }
        Ok(Self { link_lengths, base })
    }

    pub fn dof(&self) -> usize {
        self.link_lengths.len()
    }

    pub fn link_lengths(&self) -> &[f64] {
        &self.link_lengths
    }

    pub fn base(&self) -> BasePose {
        self.base
    }

    pub fn end_effector(&self) -> BodyPoint {
        BodyPoint {
            link: self.dof() - 1,
            offset: 1.0,
        }
    }

    /// Joint locations (excluding the fixed base), link midpoints and the
    /// end-effector; the default set of collision points.
    pub fn default_body_points(&self) -> Vec<BodyPoint> {
        let mut points = Vec::new();
        for link in 0..self.dof() {
            if link > 0 {
                points.push(BodyPoint { link, offset: 0.0 });
            }
            points.push(BodyPoint { link, offset: 0.5 });
        }
        points.push(self.end_effector());
        points
    }

    fn check_point(&self, point: &BodyPoint) -> Result<()> {
        if point.link >= self.dof() {
            return Err(FabricError::InvalidParameter(format!(
                "body point link {} out of range (dof {})",
                point.link,
                self.dof()
            )));
        }
        Ok(())
    }

    /// Effective length of link `k` seen from a body point on link `j`.
    fn effective_length(&self, k: usize, point: &BodyPoint) -> f64 {
        if k < point.link {
            self.link_lengths[k]
        } else if k == point.link {
            self.link_lengths[k] * point.offset
        } else {
            0.0
        }
    }

    /// Planar chain position: base plus the cumulative-angle sum of link
    /// vectors up to the point.
    pub fn fk(&self, q: &DVector<f64>, point: &BodyPoint) -> Result<Vector2<f64>> {
        self.check_dims(q)?;
        self.check_point(point)?;
        let mut pos = Vector2::new(self.base.x, self.base.y);
        let mut angle = self.base.theta;
        for k in 0..=point.link {
            angle += q[k];
            let len = self.effective_length(k, point);
            pos += Vector2::new(angle.cos(), angle.sin()) * len;
        }
        Ok(pos)
    }

    /// Analytic Jacobian and curvature term for a body point.
    ///
    /// With cumulative angles c_k, the point is Σ_k l_k·u(c_k), so
    /// ∂x/∂q_j = Σ_{k≥j} l_k·u'(c_k) and J̇q̇ = −Σ_k l_k·ċ_k²·u(c_k).
    pub fn jacobian(
        &self,
        q: &DVector<f64>,
        qdot: &DVector<f64>,
        point: &BodyPoint,
    ) -> Result<TaskMapEval> {
        self.check_dims(q)?;
        self.check_dims(qdot)?;
        self.check_point(point)?;
        let n = self.dof();
        let mut jac = DMatrix::zeros(2, n);
        let mut curv = Vector2::zeros();
        let mut angle = self.base.theta;
        let mut rate = 0.0;
        for k in 0..=point.link {
            angle += q[k];
            rate += qdot[k];
            let len = self.effective_length(k, point);
            let (sin, cos) = angle.sin_cos();
            for j in 0..=k {
                jac[(0, j)] += -len * sin;
                jac[(1, j)] += len * cos;
            }
            curv += Vector2::new(cos, sin) * (-len * rate * rate);
        }
        let x = self.fk(q, point)?;
        TaskMapEval::new(
            DVector::from_row_slice(&[x.x, x.y]),
            jac,
            DVector::from_row_slice(&[curv.x, curv.y]),
        )
    }

    fn check_dims(&self, v: &DVector<f64>) -> Result<()> {
        if v.len() != self.dof() {
            return Err(FabricError::DimensionMismatch {
                context: "PlanarArm",
                expected: self.dof(),
                got: v.len(),
            });
        }
        Ok(())
    }
}

/// Identity map for particles operating directly in Euclidean space.
pub fn particle_map(q: &DVector<f64>) -> TaskMapEval {
    TaskMapEval::identity(q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::Rng;
    use std::f64::consts::FRAC_PI_2;

    fn unit_arm() -> PlanarArm {
        PlanarArm::new(vec![1.0, 1.0, 1.0], BasePose::default()).unwrap()
    }

    #[test]
    fn straight_arm_reaches_three() {
        let arm = unit_arm();
        let ee = arm.fk(&DVector::zeros(3), &arm.end_effector()).unwrap();
        assert_relative_eq!(ee, Vector2::new(3.0, 0.0), epsilon = 1e-14);
    }

    #[test]
    fn ready_configuration_end_effector() {
        // cumulative angles π/2, 0, −π/2 walk (0,1), (1,0), (0,−1)
        let arm = unit_arm();
        let q = DVector::from_row_slice(&[FRAC_PI_2, -FRAC_PI_2, -FRAC_PI_2]);
        let ee = arm.fk(&q, &arm.end_effector()).unwrap();
        assert_relative_eq!(ee, Vector2::new(1.0, 0.0), epsilon = 1e-14);
    }

    #[test]
    fn base_translation_shifts_output() {
        let arm = unit_arm();
        let moved = PlanarArm::new(
            vec![1.0, 1.0, 1.0],
            BasePose {
                x: 1.0,
                y: 1.0,
                theta: 0.0,
            },
        )
        .unwrap();
        let q = DVector::from_row_slice(&[0.4, -0.2, 0.9]);
        let a = arm.fk(&q, &arm.end_effector()).unwrap();
        let b = moved.fk(&q, &arm.end_effector()).unwrap();
        assert_relative_eq!(b - a, Vector2::new(1.0, 1.0), epsilon = 1e-14);
    }

    #[test]
    fn base_rotation_rotates_output() {
        let arm = unit_arm();
        let theta = 0.7;
        let rotated = PlanarArm::new(
            vec![1.0, 1.0, 1.0],
            BasePose {
                x: 0.0,
                y: 0.0,
                theta,
            },
        )
        .unwrap();
        let q = DVector::from_row_slice(&[0.3, 0.5, -0.2]);
        let a = arm.fk(&q, &arm.end_effector()).unwrap();
        let b = rotated.fk(&q, &arm.end_effector()).unwrap();
        let rot = nalgebra::Rotation2::new(theta);
        assert_relative_eq!(b, rot * a, epsilon = 1e-14);
    }

    #[test]
    fn zero_velocity_zero_curvature() {
        let arm = unit_arm();
        let q = DVector::from_row_slice(&[0.3, -1.1, 0.4]);
        let eval = arm
            .jacobian(&q, &DVector::zeros(3), &arm.end_effector())
            .unwrap();
        assert_eq!(eval.curvature(), &DVector::zeros(2));
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let arm = unit_arm();
        let mut rng = crate::seeded_rng(17);
        for _ in 0..100 {
            let q = DVector::from_fn(3, |_, _| rng.random_range(-3.0..3.0));
            let qdot = DVector::from_fn(3, |_, _| rng.random_range(-2.0..2.0));
            for point in arm.default_body_points() {
                let eval = arm.jacobian(&q, &qdot, &point).unwrap();
                let f = |q: &DVector<f64>| {
                    let p = arm.fk(q, &point).unwrap();
                    DVector::from_row_slice(&[p.x, p.y])
                };
                let jac_fd = crate::fd::jacobian(&f, &q, 1e-7);
                assert_relative_eq!(eval.jacobian(), &jac_fd, epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn curvature_matches_temporal_finite_difference() {
        // J̇q̇ compared against d(Jq̇)/dt along a constant-velocity motion
        let arm = unit_arm();
        let mut rng = crate::seeded_rng(23);
        for _ in 0..50 {
            let q = DVector::from_fn(3, |_, _| rng.random_range(-2.0..2.0));
            let qdot = DVector::from_fn(3, |_, _| rng.random_range(-1.5..1.5));
            let point = arm.end_effector();
            let eval = arm.jacobian(&q, &qdot, &point).unwrap();
            let h = 1e-5;
            let vel = |q: &DVector<f64>| {
                arm.jacobian(q, &qdot, &point).unwrap().map_velocity(&qdot)
            };
            let fd = (vel(&(&q + &qdot * h)) - vel(&(&q - &qdot * h))) / (2.0 * h);
            assert_relative_eq!(eval.curvature(), &fd, epsilon = 1e-4);
        }
    }

    #[test]
    fn jacobian_norm_bounded_by_total_length() {
        let arm = unit_arm();
        let mut rng = crate::seeded_rng(31);
        let total: f64 = arm.link_lengths().iter().sum();
        for _ in 0..50 {
            let q = DVector::from_fn(3, |_, _| rng.random_range(-3.0..3.0));
            for point in arm.default_body_points() {
                let eval = arm.jacobian(&q, &DVector::zeros(3), &point).unwrap();
                for j in 0..3 {
                    assert!(eval.jacobian().column(j).norm() <= total + 1e-12);
                }
            }
        }
    }

    #[test]
    fn particle_map_is_identity() {
        let q = DVector::from_row_slice(&[0.5, -1.0]);
        let eval = particle_map(&q);
        assert_eq!(eval.x(), &q);
        assert_eq!(eval.jacobian(), &DMatrix::identity(2, 2));
        assert_eq!(eval.curvature(), &DVector::zeros(2));
    }
}
