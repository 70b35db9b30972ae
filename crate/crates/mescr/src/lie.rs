//! Rotation and rigid-motion group math.
//!
//! Conventions used across the crate:
//!
//! - rotation vectors `v` are axis-angle: magnitude = angle \[rad\],
//!   direction = axis; rotations are stored as plain orthonormal 3×3
//!   matrices with determinant +1,
//! - twists stack as `(ω, ν)` with `exp_se3` mapping `(ω, ν)` to the pose
//!   `(exp([ω]×), Jl(ω)·ν)`,
//! - `jac_left_so3(v)` is the left Jacobian `Jl = I + α[v]× + β[v]×²` with
//!   `α = (1−cos θ)/θ²`, `β = (θ−sin θ)/θ³`; the right Jacobian is its
//!   transpose,
//! - trigonometric coefficient functions switch to Taylor branches near
//!   θ = 0 so every map is smooth through the identity.

use nalgebra::{Matrix3, Matrix6, Vector3, Vector6};
use thiserror::Error;

/// Small-angle threshold for the α/β coefficient Taylor branches.
pub const SMALL_ANGLE: f64 = 1e-4;
/// Wider threshold for the θ⁴-order coefficient functions (γ, δ below),
/// whose trigonometric forms cancel catastrophically already near 1e-2.
const SMALL_ANGLE_Q: f64 = 2e-2;

#[derive(Debug, Error)]
pub enum LieError {
    /// `log_se3` is restricted to the principal branch.
    #[error("rotation angle {angle} rad is too close to pi for a principal-branch log")]
    LogBranch { angle: f64 },
}

/// Skew-symmetric (cross-product) matrix of `v`: `hat(v) * w == v × w`.
pub fn hat(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Inverse of [`hat`] on skew matrices.
pub fn vee(m: &Matrix3<f64>) -> Vector3<f64> {
    Vector3::new(m[(2, 1)], m[(0, 2)], m[(1, 0)])
}

/// sin(θ)/θ, smooth through zero.
fn sinc(theta: f64) -> f64 {
    if theta.abs() < SMALL_ANGLE {
        let t2 = theta * theta;
        1.0 - t2 / 6.0 + t2 * t2 / 120.0
    } else {
        theta.sin() / theta
    }
}

/// α(θ) = (1 − cos θ)/θ².
fn alpha(theta: f64) -> f64 {
    if theta.abs() < SMALL_ANGLE {
        let t2 = theta * theta;
        0.5 - t2 / 24.0 + t2 * t2 / 720.0
    } else {
        (1.0 - theta.cos()) / (theta * theta)
    }
}

/// β(θ) = (θ − sin θ)/θ³.
fn beta(theta: f64) -> f64 {
    if theta.abs() < SMALL_ANGLE {
        let t2 = theta * theta;
        1.0 / 6.0 - t2 / 120.0 + t2 * t2 / 5040.0
    } else {
        (theta - theta.sin()) / (theta * theta * theta)
    }
}

/// γ(θ) = (1 − cos θ − θ²/2)/θ⁴. Negative, →  −1/24 at 0.
fn gamma(theta: f64) -> f64 {
    let t2 = theta * theta;
    if theta.abs() < SMALL_ANGLE_Q {
        -1.0 / 24.0 + t2 / 720.0 - t2 * t2 / 40320.0 + t2 * t2 * t2 / 3_628_800.0
    } else {
        (1.0 - theta.cos() - t2 / 2.0) / (t2 * t2)
    }
}

/// δ(θ) = (θ − sin θ − θ³/6)/θ⁵. Negative, → −1/120 at 0.
fn delta(theta: f64) -> f64 {
    let t2 = theta * theta;
    if theta.abs() < SMALL_ANGLE_Q {
        -1.0 / 120.0 + t2 / 5040.0 - t2 * t2 / 362_880.0 + t2 * t2 * t2 / 39_916_800.0
    } else {
        (theta - theta.sin() - t2 * theta / 6.0) / (t2 * t2 * theta)
    }
}

/// Rodrigues exponential map on SO(3).
pub fn exp_so3(v: &Vector3<f64>) -> Matrix3<f64> {
    let theta = v.norm();
    let k = hat(v);
    Matrix3::identity() + sinc(theta) * k + alpha(theta) * k * k
}

/// Principal-branch logarithm on SO(3). The caller guarantees `r` is a
/// rotation; angles up to (but excluding) π are handled.
pub fn log_so3(r: &Matrix3<f64>) -> Vector3<f64> {
    let w = vee(&(r - r.transpose())) * 0.5; // sin θ · axis
    let c = ((r.trace() - 1.0) * 0.5).clamp(-1.0, 1.0);
    let s = w.norm();
    let theta = s.atan2(c);
    if theta < 1e-6 {
        // θ/sin θ ≈ 1 + θ²/6
        return w * (1.0 + theta * theta / 6.0);
    }
    if c > -0.9999 {
        return w * (theta / theta.sin());
    }
    // near π: extract the axis from the symmetric part
    let b = (r + Matrix3::identity()) * 0.5; // = u uᵀ + cos-ish terms, diagonal dominates on the axis
    let mut axis = Vector3::zeros();
    let diag = Vector3::new(b[(0, 0)], b[(1, 1)], b[(2, 2)]);
    let imax = diag.imax();
    let col = b.column(imax);
    let scale = diag[imax].max(1e-300).sqrt();
    axis[0] = col[0] / scale;
    axis[1] = col[1] / scale;
    axis[2] = col[2] / scale;
    axis.normalize_mut();
    // fix the sign so that sin θ · axis matches the skew part
    if axis.dot(&w) < 0.0 {
        axis = -axis;
    }
    axis * theta
}

/// Left Jacobian of SO(3): `exp(v + δ) ≈ exp([Jl(v) δ]×) · exp(v)`.
pub fn jac_left_so3(v: &Vector3<f64>) -> Matrix3<f64> {
    let theta = v.norm();
    let k = hat(v);
    Matrix3::identity() + alpha(theta) * k + beta(theta) * k * k
}

/// Right Jacobian of SO(3): `exp(v + δ) ≈ exp(v) · exp([Jr(v) δ]×)`.
/// Equals the transpose of the left Jacobian.
pub fn jac_right_so3(v: &Vector3<f64>) -> Matrix3<f64> {
    jac_left_so3(v).transpose()
}

/// Inverse left Jacobian of SO(3) in closed form.
pub fn jac_left_so3_inv(v: &Vector3<f64>) -> Matrix3<f64> {
    let theta = v.norm();
    let k = hat(v);
    let coeff = if theta.abs() < SMALL_ANGLE {
        let t2 = theta * theta;
        1.0 / 12.0 + t2 / 720.0 + t2 * t2 / 30240.0
    } else {
        (1.0 / (theta * theta)) - (1.0 + theta.cos()) / (2.0 * theta * theta.sin())
    };
    Matrix3::identity() - 0.5 * k + coeff * k * k
}

/// Derivative matrix of the left-Jacobian product `v ↦ Jl(v) ρ`, up to its
/// skew-symmetric part: `sym(Q(v, ρ))` equals the symmetric part of
/// `∂(Jl(v) ρ)/∂v`. The magnetic Hessian consumes it under `sym`, so the
/// skew residual never enters. Linear in `ρ`, and ‖Q‖ → 0 as v → 0.
pub fn jac_left_derivative_q(v: &Vector3<f64>, rho: &Vector3<f64>) -> Matrix3<f64> {
    let theta = v.norm();
    let a = alpha(theta);
    let b = beta(theta);
    let g = gamma(theta);
    let d = delta(theta);
    let c1 = 2.0 * b - a;
    let c2 = b + 2.0 * g;
    let c3 = g - 3.0 * d;
    let t = hat(v);
    let p = hat(rho);
    let tp = t * p;
    c1 * tp - c2 * (t * tp) - c3 * (tp * (t * t))
}

/// A spatial twist `(ω, ν)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Twist {
    pub omega: Vector3<f64>,
    pub nu: Vector3<f64>,
}

impl Twist {
    pub fn new(omega: Vector3<f64>, nu: Vector3<f64>) -> Self {
        Self { omega, nu }
    }

    pub fn zero() -> Self {
        Self::new(Vector3::zeros(), Vector3::zeros())
    }

    pub fn from_vector(v: &Vector6<f64>) -> Self {
        Self::new(v.fixed_rows::<3>(0).into(), v.fixed_rows::<3>(3).into())
    }

    pub fn to_vector(&self) -> Vector6<f64> {
        let mut out = Vector6::zeros();
        out.fixed_rows_mut::<3>(0).copy_from(&self.omega);
        out.fixed_rows_mut::<3>(3).copy_from(&self.nu);
        out
    }
}

/// A rigid pose: rotation matrix plus translation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidPose {
    pub r: Matrix3<f64>,
    pub p: Vector3<f64>,
}

impl RigidPose {
    pub fn identity() -> Self {
        Self {
            r: Matrix3::identity(),
            p: Vector3::zeros(),
        }
    }

    pub fn new(r: Matrix3<f64>, p: Vector3<f64>) -> Self {
        Self { r, p }
    }

    pub fn compose(&self, other: &RigidPose) -> RigidPose {
        RigidPose::new(self.r * other.r, self.r * other.p + self.p)
    }

    pub fn inverse(&self) -> RigidPose {
        let rt = self.r.transpose();
        RigidPose::new(rt, -(rt * self.p))
    }

    pub fn transform_point(&self, x: &Vector3<f64>) -> Vector3<f64> {
        self.r * x + self.p
    }

    /// Frobenius departure from orthonormality, `‖RᵀR − I‖_F`.
    pub fn orthonormality_defect(&self) -> f64 {
        (self.r.transpose() * self.r - Matrix3::identity()).norm()
    }
}

/// Exponential map on SE(3).
pub fn exp_se3(xi: &Twist) -> RigidPose {
    RigidPose::new(exp_so3(&xi.omega), jac_left_so3(&xi.omega) * xi.nu)
}

/// Principal-branch logarithm on SE(3). Rejects rotation angles within
/// 1e-9 of π, where the branch is ambiguous.
pub fn log_se3(h: &RigidPose) -> Result<Twist, LieError> {
    let omega = log_so3(&h.r);
    let angle = omega.norm();
    if angle >= std::f64::consts::PI - 1e-9 {
        return Err(LieError::LogBranch { angle });
    }
    let nu = jac_left_so3_inv(&omega) * h.p;
    Ok(Twist::new(omega, nu))
}

/// Adjoint of a pose acting on `(ω, ν)` twists:
/// `Ad = [[R, 0], [[p]× R, R]]`.
pub fn adjoint(h: &RigidPose) -> Matrix6<f64> {
    let mut out = Matrix6::zeros();
    out.fixed_view_mut::<3, 3>(0, 0).copy_from(&h.r);
    out.fixed_view_mut::<3, 3>(3, 3).copy_from(&h.r);
    out.fixed_view_mut::<3, 3>(3, 0).copy_from(&(hat(&h.p) * h.r));
    out
}

/// Left Jacobian of SE(3) for the `(ω, ν)` twist ordering:
/// `[[Jl(ω), 0], [Q(ω, ν), Jl(ω)]]`.
pub fn jac_left_se3(xi: &Twist) -> Matrix6<f64> {
    let jl = jac_left_so3(&xi.omega);
    let q = se3_translation_block(&xi.omega, &xi.nu);
    let mut out = Matrix6::zeros();
    out.fixed_view_mut::<3, 3>(0, 0).copy_from(&jl);
    out.fixed_view_mut::<3, 3>(3, 3).copy_from(&jl);
    out.fixed_view_mut::<3, 3>(3, 0).copy_from(&q);
    out
}

/// Inverse of [`jac_left_se3`] in closed form.
pub fn jac_left_se3_inv(xi: &Twist) -> Matrix6<f64> {
    let jl_inv = jac_left_so3_inv(&xi.omega);
    let q = se3_translation_block(&xi.omega, &xi.nu);
    let mut out = Matrix6::zeros();
    out.fixed_view_mut::<3, 3>(0, 0).copy_from(&jl_inv);
    out.fixed_view_mut::<3, 3>(3, 3).copy_from(&jl_inv);
    out.fixed_view_mut::<3, 3>(3, 0)
        .copy_from(&(-jl_inv * q * jl_inv));
    out
}

/// Off-diagonal translation block of the SE(3) left Jacobian.
fn se3_translation_block(omega: &Vector3<f64>, nu: &Vector3<f64>) -> Matrix3<f64> {
    let theta = omega.norm();
    let b = beta(theta);
    let g = gamma(theta);
    let d = delta(theta);
    let w = hat(omega);
    let v = hat(nu);
    let wv = w * v;
    let vw = v * w;
    let ww = w * w;
    0.5 * v + b * (wv + vw + w * vw) - g * (ww * v + v * ww - 3.0 * w * vw)
        - 0.5 * (g - 3.0 * d) * (wv * ww + ww * vw)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn series_exp(v: &Vector3<f64>, terms: usize) -> Matrix3<f64> {
        let k = hat(v);
        let mut out = Matrix3::identity();
        let mut acc = Matrix3::identity();
        for n in 1..=terms {
            acc = acc * k / n as f64;
            out += acc;
        }
        out
    }

    fn sym(m: &Matrix3<f64>) -> Matrix3<f64> {
        (m + m.transpose()) * 0.5
    }

    #[test]
    fn exp_zero_is_identity() {
        assert_eq!(exp_so3(&Vector3::zeros()), Matrix3::identity());
    }

    #[test]
    fn exp_quarter_turn_about_z() {
        let r = exp_so3(&Vector3::new(0.0, 0.0, std::f64::consts::FRAC_PI_2));
        let expected = Matrix3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0);
        assert_relative_eq!(r, expected, epsilon = 1e-15);
    }

    #[test]
    fn exp_matches_truncated_series() {
        let v = Vector3::new(0.1, 0.2, -0.05);
        let r = exp_so3(&v);
        let s = series_exp(&v, 20);
        assert!((r - s).norm() < 1e-12);
    }

    #[test]
    fn exp_fixes_its_axis() {
        let v = Vector3::new(0.7, -0.3, 1.1);
        assert_relative_eq!(exp_so3(&v) * v, v, epsilon = 1e-12);
    }

    #[test]
    fn jacobians_at_zero_are_identity() {
        assert_eq!(jac_left_so3(&Vector3::zeros()), Matrix3::identity());
        assert_eq!(jac_right_so3(&Vector3::zeros()), Matrix3::identity());
    }

    #[test]
    fn left_jacobian_finite_difference() {
        // exp(v + tδ) ≈ exp([t Jl δ]×) exp(v)
        let mut rng = StdRng::seed_from_u64(7);
        for _ in 0..100 {
            let v = Vector3::from_fn(|_, _| rng.gen_range(-1.5..1.5));
            let d = Vector3::from_fn(|_, _| rng.gen_range(-1.0..1.0));
            let t = 1e-6;
            let jl = jac_left_so3(&v);
            let lhs = exp_so3(&(v + t * d));
            let rhs = exp_so3(&(t * (jl * d))) * exp_so3(&v);
            assert!((lhs - rhs).norm() / t < 1e-5, "rel {}", (lhs - rhs).norm() / t);
            let jr = jac_right_so3(&v);
            let rhs_r = exp_so3(&v) * exp_so3(&(t * (jr * d)));
            assert!((lhs - rhs_r).norm() / t < 1e-5);
        }
    }

    #[test]
    fn left_is_transpose_of_right() {
        let v = Vector3::new(0.4, -0.9, 0.2);
        assert_eq!(jac_left_so3(&v), jac_right_so3(&v).transpose());
    }

    #[test]
    fn left_jacobian_inverse_roundtrip() {
        for scale in [1e-6, 1e-3, 0.3, 2.0] {
            let v = Vector3::new(0.3, -0.5, 0.8).normalize() * scale;
            let prod = jac_left_so3(&v) * jac_left_so3_inv(&v);
            assert!((prod - Matrix3::identity()).norm() < 1e-10);
        }
    }

    #[test]
    fn q_matrix_vanishes_at_zero_and_is_linear_in_rho() {
        let rho = Vector3::new(1.0, -2.0, 0.5);
        assert!(jac_left_derivative_q(&Vector3::zeros(), &rho).norm() < 1e-15);
        let v = Vector3::new(0.2, 0.1, 0.3);
        assert!(jac_left_derivative_q(&v, &Vector3::zeros()).norm() == 0.0);
        let q1 = jac_left_derivative_q(&v, &rho);
        let q2 = jac_left_derivative_q(&v, &(2.0 * rho));
        assert_relative_eq!(2.0 * q1, q2, epsilon = 1e-14);
    }

    #[test]
    fn q_matrix_norm_shrinks_with_angle() {
        let rho = Vector3::new(0.3, 1.0, -0.2);
        let dir = Vector3::new(0.2, 0.1, 0.3).normalize();
        let mut last = f64::INFINITY;
        for scale in [0.4, 0.2, 0.1, 0.05, 0.01] {
            let n = jac_left_derivative_q(&(dir * scale), &rho).norm();
            assert!(n < last);
            last = n;
        }
        assert!(last < 5e-3);
    }

    #[test]
    fn q_matrix_matches_symmetrized_derivative_of_left_jacobian_product() {
        // sym(Q(v, ρ)) equals the symmetric part of ∂(Jl(v)ρ)/∂v; this is the
        // combination the magnetic Hessian consumes.
        let mut rng = StdRng::seed_from_u64(11);
        for _ in 0..100 {
            let v = Vector3::from_fn(|_, _| rng.gen_range(-1.2..1.2));
            let rho = Vector3::from_fn(|_, _| rng.gen_range(-2.0..2.0));
            let h = 1e-6;
            let mut fd = Matrix3::zeros();
            for j in 0..3 {
                let mut e = Vector3::zeros();
                e[j] = h;
                let col = (jac_left_so3(&(v + e)) * rho - jac_left_so3(&(v - e)) * rho) / (2.0 * h);
                fd.set_column(j, &col);
            }
            let q = jac_left_derivative_q(&v, &rho);
            let err = (sym(&q) - sym(&fd)).norm();
            let scale = sym(&fd).norm().max(1e-9);
            assert!(err / scale < 1e-5, "rel err {}", err / scale);
        }
    }

    #[test]
    fn se3_exp_log_of_pure_translation() {
        let xi = Twist::new(Vector3::zeros(), Vector3::new(0.1, -0.2, 0.3));
        let h = exp_se3(&xi);
        assert_eq!(h.r, Matrix3::identity());
        assert_eq!(h.p, xi.nu);
        let back = log_se3(&h).unwrap();
        assert_relative_eq!(back.nu, xi.nu, epsilon = 1e-14);
    }

    #[test]
    fn se3_log_rejects_angles_near_pi() {
        let v = Vector3::new(std::f64::consts::PI - 1e-12, 0.0, 0.0);
        let h = exp_se3(&Twist::new(v, Vector3::zeros()));
        assert!(log_se3(&h).is_err());
    }

    #[test]
    fn adjoint_is_multiplicative() {
        let h1 = exp_se3(&Twist::new(
            Vector3::new(0.3, -0.1, 0.7),
            Vector3::new(0.02, 0.0, -0.01),
        ));
        let h2 = exp_se3(&Twist::new(
            Vector3::new(-0.2, 0.5, 0.1),
            Vector3::new(0.0, 0.03, 0.01),
        ));
        let lhs = adjoint(&h1.compose(&h2));
        let rhs = adjoint(&h1) * adjoint(&h2);
        assert!((lhs - rhs).norm() < 1e-13);
    }

    #[test]
    fn se3_left_jacobian_finite_difference() {
        let mut rng = StdRng::seed_from_u64(3);
        for _ in 0..50 {
            let xi = Twist::new(
                Vector3::from_fn(|_, _| rng.gen_range(-1.0..1.0)),
                Vector3::from_fn(|_, _| rng.gen_range(-0.05..0.05)),
            );
            let d = Twist::new(
                Vector3::from_fn(|_, _| rng.gen_range(-1.0..1.0)),
                Vector3::from_fn(|_, _| rng.gen_range(-0.05..0.05)),
            );
            let t = 1e-6;
            let jl = jac_left_se3(&xi);
            let step = jl * d.to_vector() * t;
            let lhs = exp_se3(&Twist::new(
                xi.omega + t * d.omega,
                xi.nu + t * d.nu,
            ));
            let rhs = exp_se3(&Twist::from_vector(&step)).compose(&exp_se3(&xi));
            let err = ((lhs.r - rhs.r).norm() + (lhs.p - rhs.p).norm()) / t;
            assert!(err < 1e-4, "err {err}");
        }
    }

    #[test]
    fn se3_left_jacobian_inverse_roundtrip() {
        let xi = Twist::new(Vector3::new(0.4, -0.2, 0.9), Vector3::new(0.01, 0.02, -0.03));
        let prod = jac_left_se3(&xi) * jac_left_se3_inv(&xi);
        assert!((prod - Matrix6::identity()).norm() < 1e-12);
    }

    proptest! {
        #[test]
        fn exp_is_orthonormal_with_unit_det(
            x in -3.0f64..3.0, y in -3.0f64..3.0, z in -3.0f64..3.0,
        ) {
            let r = exp_so3(&Vector3::new(x, y, z));
            prop_assert!((r.transpose() * r - Matrix3::identity()).norm() < 1e-12);
            prop_assert!((r.determinant() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn se3_exp_log_roundtrip(
            x in -1.0f64..1.0, y in -1.0f64..1.0, z in -1.0f64..1.0,
            a in -0.1f64..0.1, b in -0.1f64..0.1, c in -0.1f64..0.1,
        ) {
            let xi = Twist::new(Vector3::new(x, y, z), Vector3::new(a, b, c));
            prop_assume!(xi.omega.norm() < std::f64::consts::PI - 1e-3);
            let back = log_se3(&exp_se3(&xi)).unwrap();
            prop_assert!((back.omega - xi.omega).norm() < 1e-10);
            prop_assert!((back.nu - xi.nu).norm() < 1e-10);
        }
    }
}
