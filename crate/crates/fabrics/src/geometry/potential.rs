//! Scalar potential families and their gradients.
//!
//! A potential is a 1-D profile ψ(u) composed with a scalar input u(x) of the
//! term's task space (a norm, a coordinate, or an offset plane distance).
//! Forcing terms weight the gradient by their position metric; the weighted
//! antiderivative backs the total-energy bookkeeping.

use nalgebra::DVector;

use crate::error::{FabricError, Result};

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PotentialProfile {
    /// ψ(u) = k(u + ln(1 + e^{−2αu})/α); the soft-norm attractor whose
    /// gradient magnitude saturates at k away from the minimum.
    SoftNorm { k: f64, alpha: f64 },
    /// ψ(u) = gain / (scale·uᵖ) on u > 0.
    InversePower { gain: f64, scale: f64, power: i32 },
    /// ψ(u) = a1/u² + a2·ln(e^{−a3(u − a4)} + 1) on u > 0.
    Limit { a1: f64, a2: f64, a3: f64, a4: f64 },
}

impl PotentialProfile {
    pub fn requires_positive(&self) -> bool {
        !matches!(self, PotentialProfile::SoftNorm { .. })
    }

    pub fn value(&self, u: f64) -> Result<f64> {
        match self {
            PotentialProfile::SoftNorm { k, alpha } => {
                Ok(k * (u + softplus(-2.0 * alpha * u) / alpha))
            }
            PotentialProfile::InversePower { gain, scale, power } => {
                self.check_domain(u)?;
                Ok(gain / (scale * u.powi(*power)))
            }
            PotentialProfile::Limit { a1, a2, a3, a4 } => {
                self.check_domain(u)?;
                Ok(a1 / (u * u) + a2 * softplus(-a3 * (u - a4)))
            }
        }
    }

    /// dψ/du
    pub fn deriv(&self, u: f64) -> Result<f64> {
        match self {
            PotentialProfile::SoftNorm { k, alpha } => Ok(k * (alpha * u).tanh()),
            PotentialProfile::InversePower { gain, scale, power } => {
                self.check_domain(u)?;
                Ok(-f64::from(*power) * gain / (scale * u.powi(power + 1)))
            }
            PotentialProfile::Limit { a1, a2, a3, a4 } => {
                self.check_domain(u)?;
                Ok(-2.0 * a1 / (u * u * u) - a2 * a3 * sigmoid(-a3 * (u - a4)))
            }
        }
    }

    fn check_domain(&self, u: f64) -> Result<()> {
        if self.requires_positive() && u <= 0.0 {
            return Err(FabricError::BarrierViolation {
                what: "potential profile".into(),
                value: u,
            });
        }
        Ok(())
    }
}

/// The scalar the profile reads from the task space.
#[derive(Debug, Clone, PartialEq)]
pub enum ScalarInput {
    /// u = ‖x‖
    Norm,
    /// u = x (1-D task spaces)
    Coordinate,
    /// u = n̂·(x − point) + offset
    PlaneOffset {
        point: DVector<f64>,
        normal: DVector<f64>,
        offset: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PotentialSpec {
    pub profile: PotentialProfile,
    pub input: ScalarInput,
}

impl PotentialSpec {
    pub fn soft_norm(k: f64, alpha: f64) -> Self {
        Self {
            profile: PotentialProfile::SoftNorm { k, alpha },
            input: ScalarInput::Norm,
        }
    }

    pub fn barrier(gain: f64, scale: f64, power: i32) -> Self {
        Self {
            profile: PotentialProfile::InversePower { gain, scale, power },
            input: ScalarInput::Coordinate,
        }
    }

    pub fn limit(a1: f64, a2: f64, a3: f64, a4: f64) -> Self {
        Self {
            profile: PotentialProfile::Limit { a1, a2, a3, a4 },
            input: ScalarInput::Coordinate,
        }
    }

    pub fn input_value(&self, x: &DVector<f64>) -> f64 {
        match &self.input {
            ScalarInput::Norm => x.norm(),
            ScalarInput::Coordinate => x[0],
            ScalarInput::PlaneOffset {
                point,
                normal,
                offset,
            } => normal.dot(&(x - point)) + offset,
        }
    }

    fn input_gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        match &self.input {
            ScalarInput::Norm => {
                let r = x.norm();
                if r < 1e-12 {
                    DVector::zeros(x.len())
                } else {
                    x / r
                }
            }
            ScalarInput::Coordinate => {
                let mut g = DVector::zeros(x.len());
                g[0] = 1.0;
                g
            }
            ScalarInput::PlaneOffset { normal, .. } => normal.clone(),
        }
    }

    /// ψ₁(x)
    pub fn value(&self, x: &DVector<f64>) -> Result<f64> {
        self.profile.value(self.input_value(x))
    }

    /// ∇ψ₁(x)
    pub fn gradient(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        let u = self.input_value(x);
        let d = self.profile.deriv(u)?;
        Ok(self.input_gradient(x) * d)
    }
}

/// Composite-Simpson quadrature over [a, b]; the integrands here are smooth.
pub(crate) fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, intervals: usize) -> f64 {
    if (b - a).abs() < 1e-300 {
        return 0.0;
    }
    let n = intervals.max(2) & !1usize; // even
    let h = (b - a) / n as f64;
    let mut sum = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * f(a + h * i as f64);
    }
    sum * h / 3.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::Rng;

    #[test]
    fn soft_norm_closed_forms() {
        // ψ(0) = k·ln2/α and ψ'(u) → k
        let p = PotentialSpec::soft_norm(10.0, 10.0);
        let zero = DVector::zeros(2);
        assert_relative_eq!(
            p.value(&zero).unwrap(),
            std::f64::consts::LN_2,
            max_relative = 1e-12
        );
        let far = DVector::from_row_slice(&[10.0, 0.0]);
        let g = p.gradient(&far).unwrap();
        assert!((g.norm() - 10.0).abs() / 10.0 < 0.01);
        // gradient vanishes smoothly at the minimum
        assert_eq!(p.gradient(&zero).unwrap(), DVector::zeros(2));
    }

    #[test]
    fn limit_value_at_unit_distance() {
        let p = PotentialSpec::limit(1.0, 1.0, 1.0, 1.0);
        let v = p.value(&DVector::from_element(1, 1.0)).unwrap();
        assert_relative_eq!(v, 1.0 + 2.0f64.ln(), max_relative = 1e-12);
    }

    #[test]
    fn barrier_half_at_unit_distance() {
        let p = PotentialSpec::barrier(1.0, 2.0, 8);
        let v = p.value(&DVector::from_element(1, 1.0)).unwrap();
        assert_relative_eq!(v, 0.5);
    }

    #[test]
    fn barrier_diverges_monotonically() {
        let p = PotentialSpec::barrier(1.0, 2.0, 8);
        let mut last = 0.0;
        for i in 0..60 {
            let u = 1.0 / (1.0 + i as f64 * 0.25);
            let v = p.value(&DVector::from_element(1, u)).unwrap();
            assert!(v > last);
            last = v;
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let specs = [
            PotentialSpec::soft_norm(10.0, 10.0),
            PotentialSpec {
                profile: PotentialProfile::SoftNorm { k: 3.0, alpha: 2.0 },
                input: ScalarInput::PlaneOffset {
                    point: DVector::from_row_slice(&[0.5, 0.0]),
                    normal: DVector::from_row_slice(&[1.0, 0.0]),
                    offset: 0.4,
                },
            },
        ];
        let mut rng = crate::seeded_rng(13);
        for p in &specs {
            for _ in 0..40 {
                let x = DVector::from_fn(2, |_, _| rng.random_range(-2.0..2.0));
                if p.input_value(&x).abs() < 1e-2 {
                    continue;
                }
                let g = p.gradient(&x).unwrap();
                let fd = crate::fd::gradient(&|v: &DVector<f64>| p.value(v).unwrap(), &x, 1e-6);
                assert_relative_eq!(g, fd, epsilon = 1e-5, max_relative = 1e-5);
            }
        }
        // 1-D barrier profiles on their positive domain
        let barriers = [
            PotentialSpec::barrier(1.0, 2.0, 8),
            PotentialSpec::limit(0.4, 0.2, 20.0, 0.5),
        ];
        for p in &barriers {
            for _ in 0..40 {
                let x = DVector::from_element(1, rng.random_range(0.2..2.5));
                let g = p.gradient(&x).unwrap();
                let fd = crate::fd::gradient(&|v: &DVector<f64>| p.value(v).unwrap(), &x, 1e-6);
                assert_relative_eq!(g, fd, max_relative = 1e-5);
            }
        }
    }

    #[test]
    fn domain_violations() {
        let p = PotentialSpec::barrier(1.0, 2.0, 8);
        assert!(p.value(&DVector::from_element(1, -0.5)).is_err());
        let l = PotentialSpec::limit(0.4, 0.2, 20.0, 5.0);
        assert!(l.gradient(&DVector::from_element(1, 0.0)).is_err());
    }

    #[test]
    fn limit_profile_stable_for_large_arguments() {
        // e^{a3·a4} overflows naively; the softplus form must not
        let p = PotentialSpec::limit(0.4, 0.2, 200.0, 5.0);
        let v = p.value(&DVector::from_element(1, 0.01)).unwrap();
        assert!(v.is_finite());
        let g = p.gradient(&DVector::from_element(1, 0.01)).unwrap();
        assert!(g[0].is_finite());
    }

    #[test]
    fn simpson_integrates_polynomials_exactly() {
        let v = simpson(|x| x * x * x, 0.0, 2.0, 8);
        assert_relative_eq!(v, 4.0, max_relative = 1e-12);
    }
}
