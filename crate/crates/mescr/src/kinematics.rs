//! Product-of-exponentials forward kinematics and manipulator Jacobians.
//!
//! The configuration vector `θ ∈ ℝ^{3N}` stacks per-joint rotation vectors.
//! Joint `i` contributes the screw `ξ_i = (θ_i, −θ_i × p̄_i)` about its
//! reference position `p̄_i`, and the distal pose is the left-to-right
//! product of the screw exponentials applied to the straight reference pose.
//!
//! Two Jacobian flavours are exposed:
//!
//! - [`space_jacobian_twist`] maps `δθ` to the spatial twist
//!   `(δH · H^{-1})^∨` — the adjoint-transported block form; its column
//!   block `i` depends only on `θ_0..θ_i`,
//! - [`space_jacobian`] maps `δθ` to `δh` with `h = Log(H)` — the chart
//!   Jacobian, equal to the twist Jacobian premultiplied by the inverse
//!   SE(3) left Jacobian at `h`. Finite differences of `h` validate this
//!   form directly.

use nalgebra::{DMatrix, Matrix3, Vector3, Vector6};

use crate::lie::{
    adjoint, exp_se3, hat, jac_left_se3, jac_left_se3_inv, jac_right_so3, log_se3, LieError,
    RigidPose, Twist,
};
use crate::robot::{reference_tangent, DiscretizedRobot};

pub type ConfigVector = nalgebra::DVector<f64>;

/// Per-joint rotation vector view.
pub fn joint_rotation(theta: &ConfigVector, i: usize) -> Vector3<f64> {
    theta.fixed_rows::<3>(3 * i).into()
}

/// Screw axis of joint `i` at configuration `θ_i`.
pub fn screw_axis(theta_i: &Vector3<f64>, p_ref: &Vector3<f64>) -> Twist {
    Twist::new(*theta_i, -theta_i.cross(p_ref))
}

/// Prefix products `e^{ξ_0} ⋯ e^{ξ_{i−1}}` for `i = 0..=N`.
pub fn prefix_poses(robot: &DiscretizedRobot, theta: &ConfigVector) -> Vec<RigidPose> {
    let n = robot.n_joints();
    debug_assert_eq!(theta.len(), 3 * n);
    let mut out = Vec::with_capacity(n + 1);
    out.push(RigidPose::identity());
    for i in 0..n {
        let xi = screw_axis(&joint_rotation(theta, i), &robot.reference_positions[i]);
        let next = out[i].compose(&exp_se3(&xi));
        out.push(next);
    }
    out
}

/// Straight-state distal pose: identity orientation at `(0, 0, L)`.
pub fn reference_distal_pose(robot: &DiscretizedRobot) -> RigidPose {
    RigidPose::new(Matrix3::identity(), robot.total_length() * reference_tangent())
}

/// Distal pose of the chain.
pub fn forward_kinematics(robot: &DiscretizedRobot, theta: &ConfigVector) -> RigidPose {
    let prefixes = prefix_poses(robot, theta);
    prefixes[robot.n_joints()].compose(&reference_distal_pose(robot))
}

/// Distal pose in exponential coordinates, `h = Log(H(θ))`.
pub fn distal_pose_coords(
    robot: &DiscretizedRobot,
    theta: &ConfigVector,
) -> Result<Vector6<f64>, LieError> {
    Ok(log_se3(&forward_kinematics(robot, theta))?.to_vector())
}

/// Joint positions followed by the distal tip, `N + 1` points.
pub fn centerline(robot: &DiscretizedRobot, theta: &ConfigVector) -> Vec<Vector3<f64>> {
    let prefixes = prefix_poses(robot, theta);
    let n = robot.n_joints();
    let mut out = Vec::with_capacity(n + 1);
    for i in 0..n {
        out.push(prefixes[i].transform_point(&robot.reference_positions[i]));
    }
    out.push(prefixes[n].transform_point(&(robot.total_length() * reference_tangent())));
    out
}

/// Twist-form space Jacobian (6×3N): block `i` is
/// `Ad(e^{ξ_0}⋯e^{ξ_{i−1}}) · Jl_SE3(ξ_i) · [I; [p̄_i]×]`.
pub fn space_jacobian_twist(robot: &DiscretizedRobot, theta: &ConfigVector) -> DMatrix<f64> {
    let n = robot.n_joints();
    let prefixes = prefix_poses(robot, theta);
    let mut jac = DMatrix::zeros(6, 3 * n);
    for i in 0..n {
        let p_ref = &robot.reference_positions[i];
        let xi = screw_axis(&joint_rotation(theta, i), p_ref);
        let ad = adjoint(&prefixes[i]);
        let jl = jac_left_se3(&xi);
        // ∂ξ_i/∂θ_i = [I; [p̄_i]×]
        let mut dxi = nalgebra::SMatrix::<f64, 6, 3>::zeros();
        dxi.fixed_view_mut::<3, 3>(0, 0).copy_from(&Matrix3::identity());
        dxi.fixed_view_mut::<3, 3>(3, 0).copy_from(&hat(p_ref));
        let block = ad * jl * dxi;
        jac.view_mut((0, 3 * i), (6, 3)).copy_from(&block);
    }
    jac
}

/// Chart-form space Jacobian (6×3N): `δh = J δθ` with `h = Log(H)`.
pub fn space_jacobian(
    robot: &DiscretizedRobot,
    theta: &ConfigVector,
) -> Result<DMatrix<f64>, LieError> {
    let h = log_se3(&forward_kinematics(robot, theta))?;
    let prod = jac_left_se3_inv(&h) * space_jacobian_twist(robot, theta);
    Ok(DMatrix::from_iterator(6, prod.ncols(), prod.iter().cloned()))
}

/// Body-frame Jacobian: the twist Jacobian conjugated to the distal frame,
/// `J_body = Ad(e^{ξ_0}⋯e^{ξ_{N−1}})^{-1} · J_space`.
pub fn body_jacobian(robot: &DiscretizedRobot, theta: &ConfigVector) -> DMatrix<f64> {
    let prefixes = prefix_poses(robot, theta);
    let inv = adjoint(&prefixes[robot.n_joints()].inverse());
    let prod = inv * space_jacobian_twist(robot, theta);
    DMatrix::from_iterator(6, prod.ncols(), prod.iter().cloned())
}

/// Jacobian of the tip position (3×3N): block `j` is
/// `[p_tip − p_j]×ᵀ · R_0^j · Jr(θ_j)`.
pub fn tip_position_jacobian(robot: &DiscretizedRobot, theta: &ConfigVector) -> DMatrix<f64> {
    let pts = centerline(robot, theta);
    let prefixes = prefix_poses(robot, theta);
    let n = robot.n_joints();
    let tip = pts[n];
    let mut jac = DMatrix::zeros(3, 3 * n);
    let mut rot = Matrix3::identity();
    for j in 0..n {
        rot *= crate::lie::exp_so3(&joint_rotation(theta, j));
        debug_assert!((rot - prefixes[j + 1].r).norm() < 1e-9);
        let block = hat(&(tip - pts[j])).transpose() * rot * jac_right_so3(&joint_rotation(theta, j));
        jac.view_mut((0, 3 * j), (3, 3)).copy_from(&block);
    }
    jac
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::robot::{discretize, reference_spec};
    use approx::assert_relative_eq;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn random_theta(rng: &mut StdRng, n: usize, scale: f64) -> ConfigVector {
        ConfigVector::from_fn(3 * n, |_, _| rng.gen_range(-scale..scale))
    }

    #[test]
    fn straight_configuration_reaches_reference_pose() {
        let robot = discretize(&reference_spec(), 7).unwrap();
        let theta = ConfigVector::zeros(robot.dof());
        let pose = forward_kinematics(&robot, &theta);
        assert_relative_eq!(pose.r, Matrix3::identity(), epsilon = 1e-15);
        assert_relative_eq!(pose.p, Vector3::new(0.0, 0.0, 33e-3), epsilon = 1e-15);
    }

    #[test]
    fn uniform_bending_builds_a_planar_polygon_arc() {
        // all joints bend by π/(2N) about x̂: the distal tangent rotates 90°
        // and the tip lands on the analytic discrete arc.
        let robot = discretize(&reference_spec(), 7).unwrap();
        let n = robot.n_joints();
        let per = std::f64::consts::FRAC_PI_2 / n as f64;
        let mut theta = ConfigVector::zeros(robot.dof());
        for i in 0..n {
            theta[3 * i] = per;
        }
        let pose = forward_kinematics(&robot, &theta);
        let tangent = pose.r * reference_tangent();
        // rotation about +x̂ carries ẑ toward −ŷ
        assert_relative_eq!(tangent, -Vector3::y(), epsilon = 1e-12);
        // analytic polygon: rod i leaves at angle (i+1)·per from ẑ
        let mut expected = Vector3::zeros();
        for (i, &l) in robot.rod_lengths.iter().enumerate() {
            let a = (i as f64 + 1.0) * per;
            expected += l * Vector3::new(0.0, -a.sin(), a.cos());
        }
        assert_relative_eq!(pose.p, expected, epsilon = 1e-12);
    }

    #[test]
    fn single_joint_rotation_swings_the_whole_rod() {
        let spec = reference_spec();
        let robot = discretize(&spec, 2).unwrap();
        // joint 0 sits at the origin; rotate it by π/2 about ŷ
        let mut theta = ConfigVector::zeros(robot.dof());
        theta[1] = std::f64::consts::FRAC_PI_2;
        // keep joint 1 at zero: the tip is R(θ_0)·(0,0,L)
        let pose = forward_kinematics(&robot, &theta);
        let expected = crate::lie::exp_so3(&Vector3::new(0.0, std::f64::consts::FRAC_PI_2, 0.0))
            * Vector3::new(0.0, 0.0, robot.total_length());
        assert_relative_eq!(pose.p, expected, epsilon = 1e-12);
    }

    #[test]
    fn centerline_is_straight_at_zero_and_ends_at_the_tip() {
        let robot = discretize(&reference_spec(), 7).unwrap();
        let theta = ConfigVector::zeros(robot.dof());
        let pts = centerline(&robot, &theta);
        assert_eq!(pts.len(), 8);
        let mut s = 0.0;
        for (i, p) in pts.iter().enumerate().take(7) {
            assert_relative_eq!(*p, s * reference_tangent(), epsilon = 1e-15);
            s += robot.rod_lengths[i];
        }
        let mut rng = StdRng::seed_from_u64(5);
        let theta = random_theta(&mut rng, 7, 0.4);
        let pts = centerline(&robot, &theta);
        let pose = forward_kinematics(&robot, &theta);
        assert_relative_eq!(pts[7], pose.p, epsilon = 1e-12);
    }

    #[test]
    fn centerline_matches_rotated_rod_accumulation() {
        // frame-consistency: p_{i+1} = p_i + R_0^i l_i t̄
        let robot = discretize(&reference_spec(), 7).unwrap();
        let mut rng = StdRng::seed_from_u64(9);
        let theta = random_theta(&mut rng, 7, 0.5);
        let pts = centerline(&robot, &theta);
        let mut p = Vector3::zeros();
        let mut r = Matrix3::identity();
        for i in 0..7 {
            assert_relative_eq!(pts[i], p, epsilon = 1e-12);
            r *= crate::lie::exp_so3(&joint_rotation(&theta, i));
            p += r * (robot.rod_lengths[i] * reference_tangent());
        }
        assert_relative_eq!(pts[7], p, epsilon = 1e-12);
    }

    #[test]
    fn planar_configuration_stays_coplanar() {
        let robot = discretize(&reference_spec(), 7).unwrap();
        let mut theta = ConfigVector::zeros(robot.dof());
        let mut rng = StdRng::seed_from_u64(11);
        for i in 0..7 {
            theta[3 * i] = rng.gen_range(-0.3..0.3); // bending about x̂ only
        }
        let pts = centerline(&robot, &theta);
        for p in &pts {
            assert!(p.x.abs() < 1e-12, "out-of-plane {}", p.x);
        }
    }

    #[test]
    fn chart_jacobian_matches_finite_differences() {
        let robot = discretize(&reference_spec(), 7).unwrap();
        let mut rng = StdRng::seed_from_u64(21);
        for _ in 0..100 {
            let theta = random_theta(&mut rng, 7, 0.4);
            let jac = space_jacobian(&robot, &theta).unwrap();
            let d = random_theta(&mut rng, 7, 1.0);
            let t = 1e-6;
            let hp = distal_pose_coords(&robot, &(theta.clone() + t * d.clone())).unwrap();
            let hm = distal_pose_coords(&robot, &(theta.clone() - t * d.clone())).unwrap();
            let fd = (hp - hm) / (2.0 * t);
            let jd = &jac * &d;
            let rel = (jd.clone() - fd).norm() / jd.norm();
            assert!(rel < 1e-5, "rel {rel}");
        }
    }

    #[test]
    fn twist_jacobian_block_at_zero_is_identity_over_position_coupling() {
        // single joint at the origin: block = [I; 0]
        let robot = discretize(&reference_spec(), 2).unwrap();
        let theta = ConfigVector::zeros(robot.dof());
        let jac = space_jacobian_twist(&robot, &theta);
        let block = jac.view((0, 0), (6, 3));
        let mut expected = nalgebra::SMatrix::<f64, 6, 3>::zeros();
        expected.fixed_view_mut::<3, 3>(0, 0).copy_from(&Matrix3::identity());
        assert_relative_eq!(
            block.clone_owned(),
            DMatrix::from_iterator(6, 3, expected.iter().cloned()),
            epsilon = 1e-15
        );
    }

    #[test]
    fn twist_jacobian_blocks_ignore_later_joints() {
        let robot = discretize(&reference_spec(), 7).unwrap();
        let mut rng = StdRng::seed_from_u64(31);
        let theta = random_theta(&mut rng, 7, 0.4);
        let jac = space_jacobian_twist(&robot, &theta);
        let mut bumped = theta.clone();
        for c in 0..3 {
            bumped[3 * 5 + c] += 0.1; // change joint 5
        }
        let jac2 = space_jacobian_twist(&robot, &bumped);
        for i in 0..5 {
            let a = jac.view((0, 3 * i), (6, 3)).clone_owned();
            let b = jac2.view((0, 3 * i), (6, 3)).clone_owned();
            assert_relative_eq!(a, b, epsilon = 1e-13);
        }
    }

    #[test]
    fn body_and_space_jacobians_share_rank_and_row_norms() {
        let robot = discretize(&reference_spec(), 7).unwrap();
        let mut rng = StdRng::seed_from_u64(41);
        for _ in 0..50 {
            let theta = random_theta(&mut rng, 7, 0.4);
            let js = space_jacobian_twist(&robot, &theta);
            let jb = body_jacobian(&robot, &theta);
            let rank = |m: &DMatrix<f64>| {
                let sv = m.clone().svd(false, false).singular_values;
                sv.iter().filter(|s| **s > 1e-10 * sv[0]).count()
            };
            assert_eq!(rank(&js), rank(&jb));
            // the angular rows transform by a rotation, preserving norms
            let wa = js.rows(0, 3).norm();
            let wb = jb.rows(0, 3).norm();
            assert_relative_eq!(wa, wb, max_relative = 1e-10);
        }
    }

    #[test]
    fn space_jacobian_full_rank_at_generic_configurations() {
        let robot = discretize(&reference_spec(), 7).unwrap();
        let mut rng = StdRng::seed_from_u64(51);
        let theta = random_theta(&mut rng, 7, 0.3);
        let sv = space_jacobian_twist(&robot, &theta)
            .svd(false, false)
            .singular_values;
        let rank = sv.iter().filter(|s| **s > 1e-10 * sv[0]).count();
        assert_eq!(rank, 6);
    }

    #[test]
    fn tip_jacobian_matches_finite_differences() {
        let robot = discretize(&reference_spec(), 7).unwrap();
        let mut rng = StdRng::seed_from_u64(61);
        for _ in 0..50 {
            let theta = random_theta(&mut rng, 7, 0.4);
            let jac = tip_position_jacobian(&robot, &theta);
            let d = random_theta(&mut rng, 7, 1.0);
            let t = 1e-6;
            let pp = centerline(&robot, &(theta.clone() + t * d.clone()))[7];
            let pm = centerline(&robot, &(theta.clone() - t * d.clone()))[7];
            let fd = (pp - pm) / (2.0 * t);
            let jd = &jac * &d;
            let rel = (Vector3::new(jd[0], jd[1], jd[2]) - fd).norm() / fd.norm().max(1e-12);
            assert!(rel < 1e-5, "rel {rel}");
        }
    }
}
