//! Elastic and magnetic potential energies with analytic derivatives.
//!
//! The total potential is `E = E_e + E_m` with the elastic part the
//! quadratic form `½ θᵀ Λ θ` (naturally straight rest shape) and the
//! magnetic part `E_m = −Σ_k m_k(θ)ᵀ b_k`, `m_k = R_0^k m̄_k`.
//!
//! The generalized magnetic torque is organized into the torque matrix
//! `M(θ) ∈ ℝ^{3N×3N_m}`: block `(i, k)` equals `Jl(θ_i) R_0^{iᵀ} [m_k]×`
//! for magnets at or beyond joint `i` and vanishes otherwise, so
//! `∇E_m = −M(θ) b`. The Hessian `S_m` assembles from three index regimes;
//! its diagonal blocks take the left-Jacobian derivative matrix `Q` of
//! [`crate::lie::jac_left_derivative_q`].

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::kinematics::{joint_rotation, ConfigVector};
use crate::lie::{exp_so3, hat, jac_left_derivative_q, jac_left_so3};
use crate::robot::DiscretizedRobot;

/// Actuation magnetic field: spatially uniform, or one free vector per
/// magnet (each treated as locally constant at its magnet).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FieldSpec {
    Uniform(Vector3<f64>),
    PerMagnet(Vec<Vector3<f64>>),
}

impl FieldSpec {
    pub fn uniform(b: Vector3<f64>) -> Self {
        FieldSpec::Uniform(b)
    }

    pub fn zero() -> Self {
        FieldSpec::Uniform(Vector3::zeros())
    }

    /// Per-magnet field vectors; the uniform mode lifts as `1_{N_m} ⊗ b_u`.
    pub fn per_magnet(&self, n_magnets: usize) -> Vec<Vector3<f64>> {
        match self {
            FieldSpec::Uniform(b) => vec![*b; n_magnets],
            FieldSpec::PerMagnet(list) => {
                assert_eq!(list.len(), n_magnets, "field has wrong magnet count");
                list.clone()
            }
        }
    }

    /// Stacked field vector `b ∈ ℝ^{3N_m}`.
    pub fn stacked(&self, n_magnets: usize) -> DVector<f64> {
        let list = self.per_magnet(n_magnets);
        let mut out = DVector::zeros(3 * n_magnets);
        for (k, b) in list.iter().enumerate() {
            out.fixed_rows_mut::<3>(3 * k).copy_from(b);
        }
        out
    }

    /// Per-magnet field magnitudes `B_k`.
    pub fn magnitudes(&self, n_magnets: usize) -> Vec<f64> {
        self.per_magnet(n_magnets).iter().map(|b| b.norm()).collect()
    }

    pub fn max_magnitude(&self, n_magnets: usize) -> f64 {
        self.magnitudes(n_magnets).into_iter().fold(0.0, f64::max)
    }

    pub fn scaled(&self, factor: f64) -> FieldSpec {
        match self {
            FieldSpec::Uniform(b) => FieldSpec::Uniform(factor * b),
            FieldSpec::PerMagnet(l) => {
                FieldSpec::PerMagnet(l.iter().map(|b| factor * b).collect())
            }
        }
    }
}

/// Per-configuration cache of the rotation chain: cumulative rotations,
/// per-joint left/right Jacobians, and the rotated magnet moments.
pub struct ChainState {
    /// `R_0^i = R_0 R_1 ⋯ R_i`, inclusive.
    pub cumulative: Vec<Matrix3<f64>>,
    pub jac_left: Vec<Matrix3<f64>>,
    pub jac_right: Vec<Matrix3<f64>>,
    /// Rotated moments `m_k = R_0^k m̄_k`.
    pub moments: Vec<Vector3<f64>>,
}

impl ChainState {
    pub fn new(robot: &DiscretizedRobot, theta: &ConfigVector) -> Self {
        let n = robot.n_joints();
        debug_assert_eq!(theta.len(), 3 * n);
        let mut cumulative = Vec::with_capacity(n);
        let mut jac_left = Vec::with_capacity(n);
        let mut jac_right = Vec::with_capacity(n);
        let mut r = Matrix3::identity();
        for i in 0..n {
            let v = joint_rotation(theta, i);
            r *= exp_so3(&v);
            cumulative.push(r);
            let jl = jac_left_so3(&v);
            jac_right.push(jl.transpose());
            jac_left.push(jl);
        }
        let moments = robot
            .magnet_joints
            .iter()
            .zip(&robot.magnet_moments)
            .map(|(&k, mbar)| cumulative[k] * mbar)
            .collect();
        ChainState {
            cumulative,
            jac_left,
            jac_right,
            moments,
        }
    }
}

/// Elastic potential energy `½ θᵀ Λ θ`.
pub fn elastic_energy(robot: &DiscretizedRobot, theta: &ConfigVector) -> f64 {
    0.5 * theta.dot(&robot.stiffness_apply(theta))
}

/// Elastic torque `Λ θ`.
pub fn elastic_gradient(robot: &DiscretizedRobot, theta: &ConfigVector) -> DVector<f64> {
    robot.stiffness_apply(theta)
}

/// Magnetic potential energy `−Σ_k m_k(θ)ᵀ b_k`.
pub fn magnetic_energy(robot: &DiscretizedRobot, field: &FieldSpec, theta: &ConfigVector) -> f64 {
    let chain = ChainState::new(robot, theta);
    magnetic_energy_cached(robot, field, &chain)
}

pub(crate) fn magnetic_energy_cached(
    robot: &DiscretizedRobot,
    field: &FieldSpec,
    chain: &ChainState,
) -> f64 {
    let fields = field.per_magnet(robot.n_magnets());
    -chain
        .moments
        .iter()
        .zip(&fields)
        .map(|(m, b)| m.dot(b))
        .sum::<f64>()
}

/// Torque matrix `M(θ) ∈ ℝ^{3N×3N_m}`, direct blockwise assembly.
pub fn torque_matrix(robot: &DiscretizedRobot, theta: &ConfigVector) -> DMatrix<f64> {
    torque_matrix_cached(robot, &ChainState::new(robot, theta))
}

pub(crate) fn torque_matrix_cached(robot: &DiscretizedRobot, chain: &ChainState) -> DMatrix<f64> {
    let n = robot.n_joints();
    let nm = robot.n_magnets();
    let mut out = DMatrix::zeros(3 * n, 3 * nm);
    for i in 0..n {
        // left factor Jl(θ_i) R_0^{iᵀ} is shared across the block row
        let left = chain.jac_left[i] * chain.cumulative[i].transpose();
        for (j, (&k, m)) in robot.magnet_joints.iter().zip(&chain.moments).enumerate() {
            if k >= i {
                let block = left * hat(m);
                out.view_mut((3 * i, 3 * j), (3, 3)).copy_from(&block);
            }
        }
    }
    out
}

/// Torque matrix through the rank-revealing factorization
/// `M = Dᵀ (P ⊗ I₃) blkdiag([m_k]×)`: `D` stacks `R_0^i Jr(θ_i)` blocks up
/// to the last magnet joint and `P[i][j] = 1` for joints `i ≤ k_j`.
/// Used as an independent assembly route for cross-checks.
pub fn torque_matrix_factorized(robot: &DiscretizedRobot, theta: &ConfigVector) -> DMatrix<f64> {
    let chain = ChainState::new(robot, theta);
    let n = robot.n_joints();
    let nm = robot.n_magnets();
    let k_last = *robot.magnet_joints.last().unwrap();
    let mut d = DMatrix::zeros(3 * n, 3 * n);
    for i in 0..=k_last {
        let block = chain.cumulative[i] * chain.jac_right[i];
        d.view_mut((3 * i, 3 * i), (3, 3)).copy_from(&block);
    }
    let mut p = DMatrix::zeros(3 * n, 3 * nm);
    for (j, &k) in robot.magnet_joints.iter().enumerate() {
        for i in 0..=k {
            for c in 0..3 {
                p[(3 * i + c, 3 * j + c)] = 1.0;
            }
        }
    }
    let mut dm = DMatrix::zeros(3 * nm, 3 * nm);
    for (j, m) in chain.moments.iter().enumerate() {
        dm.view_mut((3 * j, 3 * j), (3, 3)).copy_from(&hat(m));
    }
    d.transpose() * p * dm
}

/// Gradient of the magnetic energy, `∇E_m = −M(θ) b` (uniform or
/// per-magnet fields; the field-gradient force term is out of scope and
/// exactly zero for uniform fields).
pub fn magnetic_gradient(
    robot: &DiscretizedRobot,
    field: &FieldSpec,
    theta: &ConfigVector,
) -> DVector<f64> {
    magnetic_gradient_cached(robot, field, &ChainState::new(robot, theta))
}

pub(crate) fn magnetic_gradient_cached(
    robot: &DiscretizedRobot,
    field: &FieldSpec,
    chain: &ChainState,
) -> DVector<f64> {
    let n = robot.n_joints();
    let fields = field.per_magnet(robot.n_magnets());
    let mut out = DVector::zeros(3 * n);
    for i in 0..n {
        let mut acc = Vector3::zeros();
        for ((&k, m), b) in robot.magnet_joints.iter().zip(&chain.moments).zip(&fields) {
            if k >= i {
                acc += m.cross(b);
            }
        }
        let gi = -(chain.jac_left[i] * (chain.cumulative[i].transpose() * acc));
        out.fixed_rows_mut::<3>(3 * i).copy_from(&gi);
    }
    out
}

/// Analytic Hessian of the magnetic energy, `S_m ∈ ℝ^{3N×3N}`, symmetric.
pub fn magnetic_hessian(
    robot: &DiscretizedRobot,
    field: &FieldSpec,
    theta: &ConfigVector,
) -> DMatrix<f64> {
    magnetic_hessian_cached(robot, field, theta, &ChainState::new(robot, theta))
}

pub(crate) fn magnetic_hessian_cached(
    robot: &DiscretizedRobot,
    field: &FieldSpec,
    theta: &ConfigVector,
    chain: &ChainState,
) -> DMatrix<f64> {
    let n = robot.n_joints();
    let fields = field.per_magnet(robot.n_magnets());
    let k_last = *robot.magnet_joints.last().unwrap();
    let mut out = DMatrix::zeros(3 * n, 3 * n);
    let sym = |m: Matrix3<f64>| (m + m.transpose()) * 0.5;

    // suffix sums over magnets of [b_k]×ᵀ[m_k]× and of b_k × m_k, entering
    // the blocks through "all magnets at or beyond max(i, j)"
    let mut cross_suffix: Vec<Matrix3<f64>> = vec![Matrix3::zeros(); n + 1];
    let mut rho_suffix: Vec<Vector3<f64>> = vec![Vector3::zeros(); n + 1];
    for i in (0..n).rev() {
        cross_suffix[i] = cross_suffix[i + 1];
        rho_suffix[i] = rho_suffix[i + 1];
        for ((&k, m), b) in robot.magnet_joints.iter().zip(&chain.moments).zip(&fields) {
            if k == i {
                cross_suffix[i] += hat(b).transpose() * hat(m);
                rho_suffix[i] += b.cross(m);
            }
        }
    }

    for i in 0..=k_last.min(n - 1) {
        let left = chain.jac_left[i] * chain.cumulative[i].transpose();
        // diagonal block: Σ_{k≥i} sym(Jl R0ᵀ [b]×ᵀ[m]× R0 Jr + Q(θ_i, ρ_ik))
        let core = left * cross_suffix[i] * chain.cumulative[i] * chain.jac_right[i];
        let rho = chain.cumulative[i].transpose() * rho_suffix[i];
        let q = jac_left_derivative_q(&joint_rotation(theta, i), &rho);
        let diag = sym(core + q);
        out.view_mut((3 * i, 3 * i), (3, 3)).copy_from(&diag);
        // off-diagonal blocks i < j: Σ_{k≥j} Jl R0iᵀ [b]×ᵀ[m]× R0j Jr
        for j in (i + 1)..=k_last {
            let block = left * cross_suffix[j] * chain.cumulative[j] * chain.jac_right[j];
            out.view_mut((3 * i, 3 * j), (3, 3)).copy_from(&block);
            out.view_mut((3 * j, 3 * i), (3, 3))
                .copy_from(&block.transpose());
        }
    }
    out
}

/// Total potential energy.
pub fn total_energy(robot: &DiscretizedRobot, field: &FieldSpec, theta: &ConfigVector) -> f64 {
    elastic_energy(robot, theta) + magnetic_energy(robot, field, theta)
}

/// Total gradient `Λθ − M(θ) b`.
pub fn total_gradient(
    robot: &DiscretizedRobot,
    field: &FieldSpec,
    theta: &ConfigVector,
) -> DVector<f64> {
    elastic_gradient(robot, theta) + magnetic_gradient(robot, field, theta)
}
