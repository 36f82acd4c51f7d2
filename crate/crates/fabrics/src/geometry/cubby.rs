//! Planar cubby heuristics: extraction, funnel attraction, waypoint guidance
//! and wall collision, expressed as reusable end-effector-space terms.
//!
//! A cubby is an open rectangular pocket. The extraction metric vanishes
//! once the point is clear of the front plane or already lined up with the
//! target column; the complementary gate hands over to the in-column
//! attractor, and a waypoint ahead of the opening funnels the approach.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector, Vector2};

use crate::error::{FabricError, Result};
use crate::finsler::{FinslerEnergy, InversePowerMetric, MetricField};

use super::potential::{PotentialProfile, PotentialSpec, ScalarInput};
use super::taskmap::{Segment, TaskMap};
use super::{FabricTerm, PolicyGate, TermKind};

/// An open rectangular pocket: `normal` points out of the opening,
/// `width` spans the opening, `depth` runs front plane to back wall.
#[derive(Debug, Clone, PartialEq)]
pub struct CubbyScene {
    pub center: Vector2<f64>,
    pub width: f64,
    pub depth: f64,
    pub normal: Vector2<f64>,
}

impl CubbyScene {
    pub fn new(center: Vector2<f64>, width: f64, depth: f64, normal: Vector2<f64>) -> Result<Self> {
        if width <= 0.0 || depth <= 0.0 {
            return Err(FabricError::InvalidParameter(
                "cubby width and depth must be positive".into(),
            ));
        }
        let n = normal.norm();
        if n < 1e-12 {
            return Err(FabricError::InvalidParameter(
                "cubby normal must be nonzero".into(),
            ));
        }
        Ok(Self {
            center,
            width,
            depth,
            normal: normal / n,
        })
    }

    fn tangent(&self) -> Vector2<f64> {
        Vector2::new(-self.normal.y, self.normal.x)
    }

    /// Center of the opening, on the front plane.
    pub fn front_point(&self) -> Vector2<f64> {
        self.center + self.normal * (self.depth / 2.0)
    }

    pub fn waypoint(&self, offset: f64) -> Vector2<f64> {
        self.front_point() + self.normal * offset
    }

    /// Back wall plus the two side walls; the front stays open.
    pub fn wall_segments(&self) -> Vec<Segment> {
        let t = self.tangent();
        let back = self.center - self.normal * (self.depth / 2.0);
        let front = self.front_point();
        let half_w = self.width / 2.0;
        let to_d = |v: Vector2<f64>| DVector::from_row_slice(&[v.x, v.y]);
        vec![
            (to_d(back - t * half_w), to_d(back + t * half_w)),
            (to_d(back - t * half_w), to_d(front - t * half_w)),
            (to_d(back + t * half_w), to_d(front + t * half_w)),
        ]
    }
}

fn line_distance(point: &DVector<f64>, dir: &DVector<f64>, q: &DVector<f64>) -> (f64, DVector<f64>) {
    let rel = q - point;
    let residual = &rel - dir * dir.dot(&rel);
    let w = residual.norm();
    let grad = if w < 1e-9 {
        DVector::zeros(q.len())
    } else {
        &residual / w
    };
    (w, grad)
}

fn tanh_switch(y: f64, alpha: f64, radius: f64) -> (f64, f64) {
    let t = (alpha * (y - radius)).tanh();
    (0.5 * (t + 1.0), 0.5 * alpha * (1.0 - t * t))
}

/// Eq-13-style extraction priority: a hard front-plane gate times a tanh
/// column gate, isotropic over the point space.
///
/// g(y) = [y₁ < d_front]·((m̄ − m̲)·s₂(y₂) + m̲) with
/// s₂(y₂) = ½(tanh(α_m(y₂ − r_switch)) + 1), so priority vanishes outside
/// the front plane and fades out inside the target column.
#[derive(Debug, Clone)]
pub struct ExtractionGateMetric {
    pub front_point: DVector<f64>,
    pub front_normal: DVector<f64>,
    pub line_point: DVector<f64>,
    pub line_dir: DVector<f64>,
    pub m_upper: f64,
    pub m_lower: f64,
    pub alpha_m: f64,
    pub r_switch: f64,
    pub d_front: f64,
}

impl ExtractionGateMetric {
    fn front_distance(&self, q: &DVector<f64>) -> f64 {
        self.front_normal.dot(&(q - &self.front_point))
    }
}

impl MetricField for ExtractionGateMetric {
    fn dim(&self) -> usize {
        self.front_point.len()
    }

    fn metric(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        let n = self.dim();
        if self.front_distance(x) >= self.d_front {
            return Ok(DMatrix::zeros(n, n));
        }
        let (y2, _) = line_distance(&self.line_point, &self.line_dir, x);
        let (s2, _) = tanh_switch(y2, self.alpha_m, self.r_switch);
        Ok(DMatrix::identity(n, n) * ((self.m_upper - self.m_lower) * s2 + self.m_lower))
    }

    fn partials(&self, x: &DVector<f64>) -> Result<Vec<DMatrix<f64>>> {
        let n = self.dim();
        if self.front_distance(x) >= self.d_front {
            return Ok(vec![DMatrix::zeros(n, n); n]);
        }
        let (y2, grad_y2) = line_distance(&self.line_point, &self.line_dir, x);
        let (_, ds2) = tanh_switch(y2, self.alpha_m, self.r_switch);
        let scale = (self.m_upper - self.m_lower) * ds2;
        Ok((0..n)
            .map(|i| DMatrix::identity(n, n) * (scale * grad_y2[i]))
            .collect())
    }
}

/// Complementary column gate for target attraction: g = m̄·(1 − s₂(y₂)),
/// zero away from the column and rising to m̄ on the center line.
#[derive(Debug, Clone)]
pub struct TargetColumnMetric {
    pub line_point: DVector<f64>,
    pub line_dir: DVector<f64>,
    pub m_upper: f64,
    pub alpha_m: f64,
    pub r_switch: f64,
}

impl MetricField for TargetColumnMetric {
    fn dim(&self) -> usize {
        self.line_point.len()
    }

    fn metric(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        let n = self.dim();
        let (y2, _) = line_distance(&self.line_point, &self.line_dir, x);
        let (s2, _) = tanh_switch(y2, self.alpha_m, self.r_switch);
        Ok(DMatrix::identity(n, n) * (self.m_upper * (1.0 - s2)))
    }

    fn partials(&self, x: &DVector<f64>) -> Result<Vec<DMatrix<f64>>> {
        let n = self.dim();
        let (y2, grad_y2) = line_distance(&self.line_point, &self.line_dir, x);
        let (_, ds2) = tanh_switch(y2, self.alpha_m, self.r_switch);
        Ok((0..n)
            .map(|i| DMatrix::identity(n, n) * (-self.m_upper * ds2 * grad_y2[i]))
            .collect())
    }
}

/// Waypoint priority: radial-basis masses around the waypoint, switched
/// hard off once inside the target column (exactly zero on the center line).
#[derive(Debug, Clone)]
pub struct WaypointGateMetric {
    pub line_point: DVector<f64>,
    pub line_dir: DVector<f64>,
    pub r_switch: f64,
    pub m_upper: f64,
    pub m_lower: f64,
    pub alpha_m: f64,
}

impl WaypointGateMetric {
    fn active(&self, x: &DVector<f64>) -> bool {
        line_distance(&self.line_point, &self.line_dir, x).0 > self.r_switch
    }
}

impl MetricField for WaypointGateMetric {
    fn dim(&self) -> usize {
        self.line_point.len()
    }

    fn metric(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        let n = self.dim();
        if !self.active(x) {
            return Ok(DMatrix::zeros(n, n));
        }
        let r = x.norm();
        let g = (self.m_upper - self.m_lower) * (-(self.alpha_m * r).powi(2)).exp() + self.m_lower;
        Ok(DMatrix::identity(n, n) * g)
    }

    fn partials(&self, x: &DVector<f64>) -> Result<Vec<DMatrix<f64>>> {
        let n = self.dim();
        if !self.active(x) {
            return Ok(vec![DMatrix::zeros(n, n); n]);
        }
        let r = x.norm();
        let gp = -2.0
            * self.alpha_m
            * self.alpha_m
            * r
            * (self.m_upper - self.m_lower)
            * (-(self.alpha_m * r).powi(2)).exp();
        Ok((0..n)
            .map(|i| {
                let dr = if r > 1e-12 { x[i] / r } else { 0.0 };
                DMatrix::identity(n, n) * (gp * dr)
            })
            .collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CubbyParams {
    pub m_upper: f64,
    pub m_lower: f64,
    pub alpha_m: f64,
    pub r_switch: f64,
    pub d_front: f64,
    pub waypoint_offset: f64,
    /// Soft-norm gains for the target and waypoint attractors.
    pub attract_k: f64,
    pub attract_alpha_psi: f64,
    /// Extraction potential (limit family over the shifted front distance).
    pub extraction: (f64, f64, f64, f64),
    /// Clearance added to the front distance so the potential domain covers
    /// the whole pocket.
    pub extraction_margin: f64,
    pub collision_k_b: f64,
    pub collision_alpha_b: f64,
}

impl Default for CubbyParams {
    fn default() -> Self {
        Self {
            m_upper: 2.0,
            m_lower: 0.2,
            alpha_m: 20.0,
            r_switch: 0.15,
            d_front: 0.1,
            waypoint_offset: 0.15,
            attract_k: 10.0,
            attract_alpha_psi: 10.0,
            extraction: (0.4, 0.2, 20.0, 0.4),
            extraction_margin: 0.05,
            collision_k_b: 20.0,
            collision_alpha_b: 1.0,
        }
    }
}

/// Builds the four cubby terms over a planar point space:
/// extraction, target-column attraction, waypoint attraction and wall
/// collision. The collision term applies per designated body point; the
/// others are meant for the end-effector.
pub fn cubby_terms(
    scene: &CubbyScene,
    target: Vector2<f64>,
    params: &CubbyParams,
) -> Result<Vec<FabricTerm>> {
    let to_d = |v: Vector2<f64>| DVector::from_row_slice(&[v.x, v.y]);
    let front = to_d(scene.front_point());
    let normal = to_d(scene.normal);
    let center = to_d(scene.center);
    let waypoint = scene.waypoint(params.waypoint_offset);

    let (a1, a2, a3, a4) = params.extraction;
    let extraction = FabricTerm::new(
        "cubby_extraction",
        TaskMap::Identity { dim: 2 },
        FinslerEnergy::riemannian(Arc::new(ExtractionGateMetric {
            front_point: front.clone(),
            front_normal: normal.clone(),
            line_point: center.clone(),
            line_dir: normal.clone(),
            m_upper: params.m_upper,
            m_lower: params.m_lower,
            alpha_m: params.alpha_m,
            r_switch: params.r_switch,
            d_front: params.d_front,
        })),
        TermKind::Geometric {
            potential: PotentialSpec {
                profile: PotentialProfile::Limit { a1, a2, a3, a4 },
                input: ScalarInput::PlaneOffset {
                    point: front.clone(),
                    normal: normal.clone(),
                    offset: scene.depth + params.extraction_margin,
                },
            },
            gate: PolicyGate::None,
        },
    )?;

    let target_attraction = FabricTerm::new(
        "cubby_target_attraction",
        TaskMap::Offset {
            target: to_d(target),
        },
        FinslerEnergy::riemannian(Arc::new(TargetColumnMetric {
            line_point: &center - to_d(target),
            line_dir: normal.clone(),
            m_upper: params.m_upper,
            alpha_m: params.alpha_m,
            r_switch: params.r_switch,
        })),
        TermKind::Geometric {
            potential: PotentialSpec::soft_norm(params.attract_k, params.attract_alpha_psi),
            gate: PolicyGate::None,
        },
    )?;

    let waypoint_attraction = FabricTerm::new(
        "cubby_waypoint_attraction",
        TaskMap::Offset {
            target: to_d(waypoint),
        },
        FinslerEnergy::riemannian(Arc::new(WaypointGateMetric {
            line_point: &center - to_d(waypoint),
            line_dir: normal,
            r_switch: params.r_switch,
            m_upper: params.m_upper,
            m_lower: params.m_lower,
            alpha_m: params.alpha_m,
        })),
        TermKind::Geometric {
            potential: PotentialSpec::soft_norm(params.attract_k, params.attract_alpha_psi),
            gate: PolicyGate::None,
        },
    )?;

    let collision = FabricTerm::new(
        "cubby_collision",
        TaskMap::SegmentsDistance {
            segments: scene.wall_segments(),
        },
        FinslerEnergy::riemannian(Arc::new(InversePowerMetric {
            gain: params.collision_k_b,
            power: 2,
        })),
        TermKind::Geometric {
            potential: PotentialSpec::barrier(params.collision_alpha_b, 1.0, 8),
            gate: PolicyGate::None,
        },
    )?;

    Ok(vec![
        extraction,
        target_attraction,
        waypoint_attraction,
        collision,
    ])
}
