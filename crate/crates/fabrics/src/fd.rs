//! Central finite-difference helpers.
//!
//! These back the verification suites as derivative oracles independent of
//! the analytic paths; they are not used on any evaluation hot path.

use nalgebra::{DMatrix, DVector};

/// Gradient of a scalar field by central differences.
pub fn gradient<F>(f: &F, x: &DVector<f64>, h: f64) -> DVector<f64>
where
    F: Fn(&DVector<f64>) -> f64,
{
    let mut g = DVector::zeros(x.len());
    let mut probe = x.clone();
    for i in 0..x.len() {
        probe[i] = x[i] + h;
        let plus = f(&probe);
        probe[i] = x[i] - h;
        let minus = f(&probe);
        probe[i] = x[i];
        g[i] = (plus - minus) / (2.0 * h);
    }
    g
}

/// Jacobian of a vector field by central differences.
pub fn jacobian<F>(f: &F, x: &DVector<f64>, h: f64) -> DMatrix<f64>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    let m = f(x).len();
    let mut jac = DMatrix::zeros(m, x.len());
    let mut probe = x.clone();
    for j in 0..x.len() {
        probe[j] = x[j] + h;
        let plus = f(&probe);
        probe[j] = x[j] - h;
        let minus = f(&probe);
        probe[j] = x[j];
        for i in 0..m {
            jac[(i, j)] = (plus[i] - minus[i]) / (2.0 * h);
        }
    }
    jac
}

/// The curvature term J̇q̇ of a map, via a directional difference of the
/// Jacobian along q̇: J̇ = (J(q + h·q̇) − J(q − h·q̇)) / 2h.
pub fn curvature<F>(f: &F, q: &DVector<f64>, qdot: &DVector<f64>, h: f64) -> DVector<f64>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    let plus = jacobian(f, &(q + qdot * h), h);
    let minus = jacobian(f, &(q - qdot * h), h);
    ((plus - minus) / (2.0 * h)) * qdot
}

/// Hessian of a scalar field by second-order central differences.
pub fn hessian<F>(f: &F, x: &DVector<f64>, h: f64) -> DMatrix<f64>
where
    F: Fn(&DVector<f64>) -> f64,
{
    let n = x.len();
    let mut hess = DMatrix::zeros(n, n);
    let mut probe = x.clone();
    let base = f(x);
    for i in 0..n {
        // diagonal: (f(+h) - 2f + f(-h)) / h²
        probe[i] = x[i] + h;
        let plus = f(&probe);
        probe[i] = x[i] - h;
        let minus = f(&probe);
        probe[i] = x[i];
        hess[(i, i)] = (plus - 2.0 * base + minus) / (h * h);
        for j in (i + 1)..n {
            probe[i] = x[i] + h;
            probe[j] = x[j] + h;
            let pp = f(&probe);
            probe[j] = x[j] - h;
            let pm = f(&probe);
            probe[i] = x[i] - h;
            let mm = f(&probe);
            probe[j] = x[j] + h;
            let mp = f(&probe);
            probe[i] = x[i];
            probe[j] = x[j];
            let v = (pp - pm - mp + mm) / (4.0 * h * h);
            hess[(i, j)] = v;
            hess[(j, i)] = v;
        }
    }
    hess
}

/// Mixed second derivatives A with A[i][j] = ∂²f/∂a_i∂b_j of f(a, b).
pub fn cross_hessian<F>(
    f: &F,
    a: &DVector<f64>,
    b: &DVector<f64>,
    h: f64,
) -> DMatrix<f64>
where
    F: Fn(&DVector<f64>, &DVector<f64>) -> f64,
{
    let mut out = DMatrix::zeros(a.len(), b.len());
    let mut pa = a.clone();
    let mut pb = b.clone();
    for i in 0..a.len() {
        for j in 0..b.len() {
            pa[i] = a[i] + h;
            pb[j] = b[j] + h;
            let pp = f(&pa, &pb);
            pb[j] = b[j] - h;
            let pm = f(&pa, &pb);
            pa[i] = a[i] - h;
            let mm = f(&pa, &pb);
            pb[j] = b[j] + h;
            let mp = f(&pa, &pb);
            pa[i] = a[i];
            pb[j] = b[j];
            out[(i, j)] = (pp - pm - mp + mm) / (4.0 * h * h);
        }
    }
    out
}
