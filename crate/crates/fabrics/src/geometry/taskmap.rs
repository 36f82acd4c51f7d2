//! Differentiable task maps: the tree edges carrying specs between spaces.

use nalgebra::{DMatrix, DVector};

use crate::error::{FabricError, Result};
use crate::kinematics::{BodyPoint, PlanarArm};
use crate::spec_algebra::TaskMapEval;

/// A line segment in the plane, endpoints as 2-vectors.
pub type Segment = (DVector<f64>, DVector<f64>);

#[derive(Debug, Clone)]
pub enum TaskMap {
    /// x = q
    Identity { dim: usize },
    /// x = q − target
    Offset { target: DVector<f64> },
    /// x = ‖q − origin‖ / radius − 1
    CircleDistance {
        origin: DVector<f64>,
        radius: f64,
    },
    /// x = limit − q_j
    JointLimitUpper {
        joint: usize,
        limit: f64,
        dof: usize,
    },
    /// x = q_j − limit
    JointLimitLower {
        joint: usize,
        limit: f64,
        dof: usize,
    },
    /// x = n̂·(q − point), positive on the side the normal points to
    PlaneSignedDistance {
        point: DVector<f64>,
        normal: DVector<f64>,
    },
    /// x = ‖(I − d̂d̂ᵀ)(q − point)‖
    LineDistance {
        point: DVector<f64>,
        direction: DVector<f64>,
    },
    /// x = min distance from q to a set of wall segments
    SegmentsDistance { segments: Vec<Segment> },
    /// x = planar position of a body point under forward kinematics
    EePosition { arm: PlanarArm, point: BodyPoint },
    /// x = second(first(q))
    Composed {
        first: Box<TaskMap>,
        second: Box<TaskMap>,
    },
}

impl TaskMap {
    pub fn circle(origin: DVector<f64>, radius: f64) -> Result<Self> {
        if radius <= 0.0 {
            return Err(FabricError::InvalidParameter(
                "circle radius must be positive".into(),
            ));
        }
        Ok(TaskMap::CircleDistance { origin, radius })
    }

    pub fn plane(point: DVector<f64>, normal: DVector<f64>) -> Result<Self> {
        let n = normal.norm();
        if n < 1e-12 {
            return Err(FabricError::InvalidParameter(
                "plane normal must be nonzero".into(),
            ));
        }
        Ok(TaskMap::PlaneSignedDistance {
            point,
            normal: normal / n,
        })
    }

    pub fn line(point: DVector<f64>, direction: DVector<f64>) -> Result<Self> {
        let n = direction.norm();
        if n < 1e-12 {
            return Err(FabricError::InvalidParameter(
                "line direction must be nonzero".into(),
            ));
        }
        Ok(TaskMap::LineDistance {
            point,
            direction: direction / n,
        })
    }

    pub fn composed(first: TaskMap, second: TaskMap) -> Result<Self> {
        if second.parent_dim() != first.child_dim() {
            return Err(FabricError::DimensionMismatch {
                context: "TaskMap::composed",
                expected: first.child_dim(),
                got: second.parent_dim(),
            });
        }
        Ok(TaskMap::Composed {
            first: Box::new(first),
            second: Box::new(second),
        })
    }

    pub fn parent_dim(&self) -> usize {
        match self {
            TaskMap::Identity { dim } => *dim,
            TaskMap::Offset { target } => target.len(),
            TaskMap::CircleDistance { origin, .. } => origin.len(),
            TaskMap::JointLimitUpper { dof, .. } | TaskMap::JointLimitLower { dof, .. } => *dof,
            TaskMap::PlaneSignedDistance { point, .. } => point.len(),
            TaskMap::LineDistance { point, .. } => point.len(),
            TaskMap::SegmentsDistance { .. } => 2,
            TaskMap::EePosition { arm, .. } => arm.dof(),
            TaskMap::Composed { first, .. } => first.parent_dim(),
        }
    }

    pub fn child_dim(&self) -> usize {
        match self {
            TaskMap::Identity { dim } => *dim,
            TaskMap::Offset { target } => target.len(),
            TaskMap::CircleDistance { .. }
            | TaskMap::JointLimitUpper { .. }
            | TaskMap::JointLimitLower { .. }
            | TaskMap::PlaneSignedDistance { .. }
            | TaskMap::LineDistance { .. }
            | TaskMap::SegmentsDistance { .. } => 1,
            TaskMap::EePosition { .. } => 2,
            TaskMap::Composed { second, .. } => second.child_dim(),
        }
    }

    /// Maps whose output must stay strictly positive (barrier domains).
    pub fn requires_positive(&self) -> bool {
        matches!(
            self,
            TaskMap::CircleDistance { .. }
                | TaskMap::JointLimitUpper { .. }
                | TaskMap::JointLimitLower { .. }
                | TaskMap::SegmentsDistance { .. }
        )
    }

    /// Obstacle-style distances, tracked as `min_obstacle_dist` in logs.
    pub fn is_obstacle_distance(&self) -> bool {
        matches!(
            self,
            TaskMap::CircleDistance { .. } | TaskMap::SegmentsDistance { .. }
        )
    }

    pub fn evaluate(&self, q: &DVector<f64>, qdot: &DVector<f64>) -> Result<TaskMapEval> {
        if q.len() != self.parent_dim() || qdot.len() != self.parent_dim() {
            return Err(FabricError::DimensionMismatch {
                context: "TaskMap::evaluate",
                expected: self.parent_dim(),
                got: q.len().max(qdot.len()),
            });
        }
        match self {
            TaskMap::Identity { .. } => Ok(TaskMapEval::identity(q)),
            TaskMap::Offset { target } => {
                let n = q.len();
                TaskMapEval::new(q - target, DMatrix::identity(n, n), DVector::zeros(n))
            }
            TaskMap::CircleDistance { origin, radius } => {
                let d = q - origin;
                let u = d.norm();
                if u < 1e-12 {
                    return Err(FabricError::DegenerateMap {
                        context: "circle_distance at the circle center",
                    });
                }
                let n = q.len();
                let unit = &d / u;
                let value = u / radius - 1.0;
                let mut jac = DMatrix::zeros(1, n);
                for i in 0..n {
                    jac[(0, i)] = unit[i] / radius;
                }
                let radial = unit.dot(qdot);
                let curv = (qdot.norm_squared() - radial * radial) / (radius * u);
                TaskMapEval::new(
                    DVector::from_element(1, value),
                    jac,
                    DVector::from_element(1, curv),
                )
            }
            TaskMap::JointLimitUpper { joint, limit, dof } => {
                let mut jac = DMatrix::zeros(1, *dof);
                jac[(0, *joint)] = -1.0;
                TaskMapEval::new(
                    DVector::from_element(1, limit - q[*joint]),
                    jac,
                    DVector::zeros(1),
                )
            }
            TaskMap::JointLimitLower { joint, limit, dof } => {
                let mut jac = DMatrix::zeros(1, *dof);
                jac[(0, *joint)] = 1.0;
                TaskMapEval::new(
                    DVector::from_element(1, q[*joint] - limit),
                    jac,
                    DVector::zeros(1),
                )
            }
            TaskMap::PlaneSignedDistance { point, normal } => {
                let value = normal.dot(&(q - point));
                let jac = DMatrix::from_row_slice(1, q.len(), normal.as_slice());
                TaskMapEval::new(DVector::from_element(1, value), jac, DVector::zeros(1))
            }
            TaskMap::LineDistance { point, direction } => {
                let rel = q - point;
                let residual = &rel - direction * direction.dot(&rel);
                let w = residual.norm();
                let n = q.len();
                if w < 1e-9 {
                    // on the line the gradient is undefined; use the zero
                    // subgradient
                    return TaskMapEval::new(
                        DVector::from_element(1, w),
                        DMatrix::zeros(1, n),
                        DVector::zeros(1),
                    );
                }
                let unit = &residual / w;
                let jac = DMatrix::from_row_slice(1, n, unit.as_slice());
                let qdot_perp = qdot - direction * direction.dot(qdot);
                let along = unit.dot(qdot);
                let curv = (qdot_perp.norm_squared() - along * along) / w;
                TaskMapEval::new(
                    DVector::from_element(1, w),
                    jac,
                    DVector::from_element(1, curv),
                )
            }
            TaskMap::SegmentsDistance { segments } => {
                let (dist, closest) = min_segment_distance(segments, q)?;
                if dist < 1e-12 {
                    return Err(FabricError::BarrierViolation {
                        what: "segments_distance (contact)".into(),
                        value: dist,
                    });
                }
                // the closest point is treated as locally fixed
                let unit = (q - &closest) / dist;
                let jac = DMatrix::from_row_slice(1, 2, unit.as_slice());
                let along = unit.dot(qdot);
                let curv = (qdot.norm_squared() - along * along) / dist;
                TaskMapEval::new(
                    DVector::from_element(1, dist),
                    jac,
                    DVector::from_element(1, curv),
                )
            }
            TaskMap::EePosition { arm, point } => arm.jacobian(q, qdot, point),
            TaskMap::Composed { first, second } => {
                let inner = first.evaluate(q, qdot)?;
                let mid_vel = inner.map_velocity(qdot);
                let outer = second.evaluate(inner.x(), &mid_vel)?;
                inner.compose(&outer)
            }
        }
    }
}

fn min_segment_distance(segments: &[Segment], q: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
    if segments.is_empty() {
        return Err(FabricError::InvalidParameter(
            "segments_distance needs at least one segment".into(),
        ));
    }
    let mut best = f64::INFINITY;
    let mut best_point = segments[0].0.clone();
    for (a, b) in segments {
        let ab = b - a;
        let len2 = ab.norm_squared();
        let t = if len2 < 1e-18 {
            0.0
        } else {
            ((q - a).dot(&ab) / len2).clamp(0.0, 1.0)
        };
        let candidate = a + &ab * t;
        let dist = (q - &candidate).norm();
        if dist < best {
            best = dist;
            best_point = candidate;
        }
    }
    Ok((best, best_point))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::Rng;

    #[test]
    fn circle_map_value() {
        let map = TaskMap::circle(DVector::from_row_slice(&[0.0, 0.0]), 1.0).unwrap();
        let eval = map
            .evaluate(
                &DVector::from_row_slice(&[2.0, 0.0]),
                &DVector::from_row_slice(&[0.0, 0.0]),
            )
            .unwrap();
        assert_relative_eq!(eval.x()[0], 1.0);
    }

    #[test]
    fn joint_limit_maps() {
        let upper = TaskMap::JointLimitUpper {
            joint: 1,
            limit: std::f64::consts::PI,
            dof: 3,
        };
        let q = DVector::zeros(3);
        let eval = upper.evaluate(&q, &DVector::zeros(3)).unwrap();
        assert_relative_eq!(eval.x()[0], std::f64::consts::PI);
        assert_eq!(eval.jacobian()[(0, 1)], -1.0);
    }

    #[test]
    fn curvature_vanishes_at_rest() {
        let maps = [
            TaskMap::circle(DVector::from_row_slice(&[0.3, -0.4]), 0.8).unwrap(),
            TaskMap::line(
                DVector::from_row_slice(&[0.0, 1.0]),
                DVector::from_row_slice(&[1.0, 1.0]),
            )
            .unwrap(),
            TaskMap::SegmentsDistance {
                segments: vec![(
                    DVector::from_row_slice(&[-1.0, -1.0]),
                    DVector::from_row_slice(&[1.0, -1.0]),
                )],
            },
        ];
        let q = DVector::from_row_slice(&[1.4, 0.9]);
        for map in maps {
            let eval = map.evaluate(&q, &DVector::zeros(2)).unwrap();
            assert_eq!(eval.curvature()[0], 0.0);
        }
    }

    #[test]
    fn distance_maps_match_finite_differences() {
        let maps = [
            TaskMap::circle(DVector::from_row_slice(&[0.2, -0.1]), 0.7).unwrap(),
            TaskMap::line(
                DVector::from_row_slice(&[0.5, 0.5]),
                DVector::from_row_slice(&[0.6, -0.8]),
            )
            .unwrap(),
            TaskMap::plane(
                DVector::from_row_slice(&[0.0, 1.0]),
                DVector::from_row_slice(&[0.3, 1.0]),
            )
            .unwrap(),
        ];
        let mut rng = crate::seeded_rng(5);
        for map in maps {
            for _ in 0..50 {
                let q = DVector::from_fn(2, |_, _| rng.random_range(1.5..3.0));
                let qdot = DVector::from_fn(2, |_, _| rng.random_range(-2.0..2.0));
                let eval = map.evaluate(&q, &qdot).unwrap();
                let f = |p: &DVector<f64>| {
                    DVector::from_element(1, map.evaluate(p, &DVector::zeros(2)).unwrap().x()[0])
                };
                let jac_fd = crate::fd::jacobian(&f, &q, 1e-6);
                assert_relative_eq!(eval.jacobian(), &jac_fd, epsilon = 1e-6);
                let curv_fd = crate::fd::curvature(&f, &q, &qdot, 1e-5);
                assert_relative_eq!(eval.curvature(), &curv_fd, epsilon = 1e-4);
            }
        }
    }

    #[test]
    fn segments_distance_inside_and_outside() {
        // a "U" open to +x: distance picks the nearest wall
        let segments = vec![
            (
                DVector::from_row_slice(&[-1.0, -1.0]),
                DVector::from_row_slice(&[-1.0, 1.0]),
            ),
            (
                DVector::from_row_slice(&[-1.0, 1.0]),
                DVector::from_row_slice(&[1.0, 1.0]),
            ),
            (
                DVector::from_row_slice(&[-1.0, -1.0]),
                DVector::from_row_slice(&[1.0, -1.0]),
            ),
        ];
        let map = TaskMap::SegmentsDistance { segments };
        let inside = map
            .evaluate(&DVector::from_row_slice(&[0.0, 0.5]), &DVector::zeros(2))
            .unwrap();
        assert_relative_eq!(inside.x()[0], 0.5);
        let outside = map
            .evaluate(&DVector::from_row_slice(&[3.0, 1.0]), &DVector::zeros(2))
            .unwrap();
        assert_relative_eq!(outside.x()[0], 2.0);
    }

    #[test]
    fn composed_chain_rule_against_oracle() {
        let arm = PlanarArm::new(vec![1.0, 1.0, 1.0], Default::default()).unwrap();
        let ee = TaskMap::EePosition {
            point: arm.end_effector(),
            arm,
        };
        let offset = TaskMap::Offset {
            target: DVector::from_row_slice(&[1.5, 0.5]),
        };
        let composed = TaskMap::composed(ee, offset).unwrap();
        let mut rng = crate::seeded_rng(9);
        for _ in 0..30 {
            let q = DVector::from_fn(3, |_, _| rng.random_range(-2.0..2.0));
            let qdot = DVector::from_fn(3, |_, _| rng.random_range(-1.0..1.0));
            let eval = composed.evaluate(&q, &qdot).unwrap();
            let f = |p: &DVector<f64>| {
                composed
                    .evaluate(p, &DVector::zeros(3))
                    .unwrap()
                    .x()
                    .clone()
            };
            assert_relative_eq!(
                eval.jacobian(),
                &crate::fd::jacobian(&f, &q, 1e-6),
                epsilon = 1e-6
            );
            assert_relative_eq!(
                eval.curvature(),
                &crate::fd::curvature(&f, &q, &qdot, 1e-5),
                epsilon = 1e-4
            );
        }
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let map = TaskMap::Identity { dim: 3 };
        assert!(map.evaluate(&DVector::zeros(2), &DVector::zeros(2)).is_err());
    }
}
