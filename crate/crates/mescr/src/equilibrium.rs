//! Magneto-elastic equilibrium solving and first-order actuation analysis.
//!
//! The equilibrium condition is `Λθ = M(θ) b` (naturally straight rest
//! shape, external torques out of scope). The primary solver is a damped
//! Newton method on `∇E` with the analytic stiffness Hessian `S = Λ + S_m`,
//! Levenberg regularization when `S` is indefinite, an Armijo line search
//! on the energy, and a damped fixed-point fallback step
//! `θ ← (1−α)θ + α Λ^{-1} M(θ) b` when the Newton step fails to decrease
//! the energy. Near the floor of double precision the predicted energy
//! decrease falls below the resolution of `E`; the solver then switches to
//! undamped Newton steps while the gradient norm keeps shrinking.
//!
//! Results carry a uniqueness certificate: fields below
//! [`crate::robot::uniqueness_field_bound`] admit exactly one equilibrium,
//! reached from any initial guess.

use nalgebra::{DMatrix, DVector, Vector3};
use serde::Serialize;
use thiserror::Error;

use crate::energetics::{
    magnetic_energy_cached, magnetic_gradient_cached, magnetic_hessian_cached,
    torque_matrix_cached, ChainState, FieldSpec,
};
use crate::kinematics::{joint_rotation, space_jacobian, ConfigVector};
use crate::lie::jac_left_so3;
use crate::robot::{
    lipschitz_constant, reference_tangent, uniqueness_field_bound, DiscretizedRobot, RobotError,
};

#[derive(Debug, Error)]
pub enum EquilibriumError {
    #[error("no convergence after {iterations} iterations (residual {residual_norm:.3e})")]
    NonConvergence {
        iterations: usize,
        residual_norm: f64,
        best: Box<EquilibriumResult>,
    },
    #[error("energy became non-finite during the solve")]
    NonFinite,
    #[error("stiffness Hessian is singular or indefinite (smallest eigenvalue {lambda_min:.3e})")]
    SingularStiffness { lambda_min: f64 },
    #[error("continuation failed at step {index}: {source}")]
    Continuation {
        index: usize,
        #[source]
        source: Box<EquilibriumError>,
    },
    #[error(transparent)]
    Robot(#[from] RobotError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    DampedNewton,
    FixedPoint,
}

/// A solved equilibrium with its certificates.
#[derive(Debug, Clone, Serialize)]
pub struct EquilibriumResult {
    #[serde(skip)]
    pub theta: ConfigVector,
    pub residual_norm: f64,
    pub iterations: usize,
    pub solver: SolverKind,
    /// Field strength below the provable-uniqueness bound.
    pub uniqueness_certified: bool,
    pub converged: bool,
    pub energy: f64,
}

#[derive(Debug, Clone)]
pub struct SolveOptions {
    /// Gradient-norm tolerance scale: converge when
    /// `‖∇E‖ ≤ tol_scale · λ_min(Λ) · max(1, ‖θ‖)`.
    pub tol_scale: f64,
    pub max_iterations: usize,
    /// Armijo sufficient-decrease constant.
    pub armijo: f64,
    pub init: Option<ConfigVector>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tol_scale: 1e-12,
            max_iterations: 300,
            armijo: 1e-4,
            init: None,
        }
    }
}

impl SolveOptions {
    pub fn with_init(init: ConfigVector) -> Self {
        SolveOptions {
            init: Some(init),
            ..Default::default()
        }
    }
}

struct Evaluation {
    chain_energy: f64,
    gradient: DVector<f64>,
}

fn evaluate(robot: &DiscretizedRobot, field: &FieldSpec, theta: &ConfigVector) -> (ChainState, Evaluation) {
    let chain = ChainState::new(robot, theta);
    let energy = 0.5 * theta.dot(&robot.stiffness_apply(theta))
        + magnetic_energy_cached(robot, field, &chain);
    let gradient = robot.stiffness_apply(theta) + magnetic_gradient_cached(robot, field, &chain);
    (
        chain,
        Evaluation {
            chain_energy: energy,
            gradient,
        },
    )
}

/// Solve the magneto-elastic equilibrium. Default initial guess is the
/// straight configuration, which lies in the basin of the invariant
/// equilibrium set for any admissible field.
pub fn solve_equilibrium(
    robot: &DiscretizedRobot,
    field: &FieldSpec,
    options: &SolveOptions,
) -> Result<EquilibriumResult, EquilibriumError> {
    let n = robot.dof();
    let mut theta = options
        .init
        .clone()
        .unwrap_or_else(|| ConfigVector::zeros(n));
    assert_eq!(theta.len(), n, "initial guess has wrong dimension");
    let lam_min = robot.lambda_min();
    let certified =
        field.max_magnitude(robot.n_magnets()) < uniqueness_field_bound(robot);
    let lip = lipschitz_constant(robot, field);
    let eps = f64::EPSILON;

    let (mut chain, mut eval) = evaluate(robot, field, &theta);
    if !eval.chain_energy.is_finite() {
        return Err(EquilibriumError::NonFinite);
    }
    let mut mu = 0.0_f64;
    let mut stalled = 0usize;
    let mut iterations = 0usize;
    let result = |theta: &ConfigVector, eval: &Evaluation, iterations, converged| EquilibriumResult {
        theta: theta.clone(),
        residual_norm: eval.gradient.norm(),
        iterations,
        solver: SolverKind::DampedNewton,
        uniqueness_certified: certified,
        converged,
        energy: eval.chain_energy,
    };

    for it in 0..options.max_iterations {
        iterations = it;
        let gnorm = eval.gradient.norm();
        let tol = options.tol_scale * lam_min * theta.norm().max(1.0);
        if gnorm <= tol {
            return Ok(result(&theta, &eval, it, true));
        }
        let hess = {
            let mut s = magnetic_hessian_cached(robot, field, &theta, &chain);
            for (i, blk) in robot.stiffness.iter().enumerate() {
                for c in 0..3 {
                    s[(3 * i + c, 3 * i + c)] += blk[c];
                }
            }
            s
        };
        let mut stepped = false;
        for _attempt in 0..60 {
            let mut reg = hess.clone();
            if mu > 0.0 {
                for d in 0..n {
                    reg[(d, d)] += mu;
                }
            }
            let chol = match reg.cholesky() {
                Some(c) => c,
                None => {
                    mu = (4.0 * mu).max(1e-4 * lam_min);
                    continue;
                }
            };
            let step = chol.solve(&(-&eval.gradient));
            let predicted = eval.gradient.dot(&step);
            if predicted.abs() <= 16.0 * eps * eval.chain_energy.abs().max(1e-300) {
                // below the energy resolution: pure Newton endgame on the
                // unregularized Hessian (regularized steps only converge
                // linearly and would burn the iteration budget)
                let pure = hess
                    .clone()
                    .cholesky()
                    .map(|c| c.solve(&(-&eval.gradient)))
                    .unwrap_or(step);
                let cand = &theta + &pure;
                let (cchain, ceval) = evaluate(robot, field, &cand);
                if ceval.gradient.norm() < gnorm && ceval.chain_energy.is_finite() {
                    theta = cand;
                    chain = cchain;
                    eval = ceval;
                    stepped = true;
                }
                break;
            }
            // Armijo backtracking on the energy
            let mut alpha = 1.0;
            let mut accepted = None;
            for _ in 0..40 {
                let cand = &theta + alpha * &step;
                let (cchain, ceval) = evaluate(robot, field, &cand);
                if !ceval.chain_energy.is_finite() {
                    return Err(EquilibriumError::NonFinite);
                }
                if ceval.chain_energy <= eval.chain_energy + options.armijo * alpha * predicted {
                    accepted = Some((cand, cchain, ceval));
                    break;
                }
                alpha *= 0.5;
            }
            if let Some((cand, cchain, ceval)) = accepted {
                theta = cand;
                chain = cchain;
                eval = ceval;
                mu = if mu > 1e-12 * lam_min { mu / 3.0 } else { 0.0 };
                stepped = true;
                break;
            }
            mu = (4.0 * mu).max(1e-4 * lam_min);
        }
        if !stepped {
            // damped fixed-point fallback: θ ← (1−α)θ + α Λ^{-1} M(θ) b
            let alpha = if lip > 0.0 {
                (0.9 * lam_min / lip).min(1.0)
            } else {
                1.0
            };
            let m = torque_matrix_cached(robot, &chain);
            let target = robot.stiffness_solve(&(&m * field.stacked(robot.n_magnets())));
            let cand = (1.0 - alpha) * &theta + alpha * target;
            let (cchain, ceval) = evaluate(robot, field, &cand);
            if ceval.chain_energy < eval.chain_energy {
                theta = cand;
                chain = cchain;
                eval = ceval;
                stalled = 0;
                continue;
            }
            stalled += 1;
            if stalled >= 2 {
                // no step of any kind makes progress: we are at the floor
                let converged = eval.gradient.norm()
                    <= (1e4 * options.tol_scale * lam_min).max(256.0 * eps * robot.lambda_max())
                        * theta.norm().max(1.0);
                let res = result(&theta, &eval, it, converged);
                return if converged {
                    Ok(res)
                } else {
                    Err(EquilibriumError::NonConvergence {
                        iterations: it,
                        residual_norm: res.residual_norm,
                        best: Box::new(res),
                    })
                };
            }
        } else {
            stalled = 0;
        }
    }
    // out of iterations: accept only at the floor tolerance
    let converged = eval.gradient.norm()
        <= (1e4 * options.tol_scale * lam_min).max(256.0 * eps * robot.lambda_max())
            * theta.norm().max(1.0);
    let res = result(&theta, &eval, iterations, converged);
    if converged {
        return Ok(res);
    }
    Err(EquilibriumError::NonConvergence {
        iterations: options.max_iterations,
        residual_norm: res.residual_norm,
        best: Box::new(res),
    })
}

/// Warm-started solves along an ordered field path; the first solve starts
/// from the straight configuration.
pub fn continuation_solve(
    robot: &DiscretizedRobot,
    field_path: &[FieldSpec],
    options: &SolveOptions,
) -> Result<Vec<EquilibriumResult>, EquilibriumError> {
    let mut out = Vec::with_capacity(field_path.len());
    let mut init = options
        .init
        .clone()
        .unwrap_or_else(|| ConfigVector::zeros(robot.dof()));
    for (index, field) in field_path.iter().enumerate() {
        let opts = SolveOptions {
            init: Some(init.clone()),
            ..options.clone()
        };
        match solve_equilibrium(robot, field, &opts) {
            Ok(res) => {
                init = res.theta.clone();
                out.push(res);
            }
            Err(e) => {
                return Err(EquilibriumError::Continuation {
                    index,
                    source: Box::new(e),
                })
            }
        }
    }
    Ok(out)
}

/// Stiffness Hessian `S = Λ + S_m` at a configuration.
pub fn stiffness_hessian(
    robot: &DiscretizedRobot,
    field: &FieldSpec,
    theta: &ConfigVector,
) -> DMatrix<f64> {
    let chain = ChainState::new(robot, theta);
    let mut s = magnetic_hessian_cached(robot, field, theta, &chain);
    for (i, blk) in robot.stiffness.iter().enumerate() {
        for c in 0..3 {
            s[(3 * i + c, 3 * i + c)] += blk[c];
        }
    }
    s
}

fn positive_definite_cholesky(
    s: &DMatrix<f64>,
) -> Result<nalgebra::Cholesky<f64, nalgebra::Dyn>, EquilibriumError> {
    s.clone().cholesky().ok_or_else(|| {
        let eig = s.clone().symmetric_eigen();
        let lambda_min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        EquilibriumError::SingularStiffness { lambda_min }
    })
}

/// First-order configuration response `δθ = S^{-1} M(θ*) δb` to a stacked
/// field perturbation. Refuses indefinite stiffness.
pub fn compliance(
    robot: &DiscretizedRobot,
    field: &FieldSpec,
    theta_star: &ConfigVector,
    delta_b: &DVector<f64>,
) -> Result<ConfigVector, EquilibriumError> {
    assert_eq!(delta_b.len(), 3 * robot.n_magnets());
    let s = stiffness_hessian(robot, field, theta_star);
    let chol = positive_definite_cholesky(&s)?;
    let m = torque_matrix_cached(robot, &ChainState::new(robot, theta_star));
    Ok(chol.solve(&(&m * delta_b)))
}

/// The actuation Jacobian `J_b = J_θ S^{-1} M(θ*)` and its uniform-field
/// restriction `J_b · (1 ⊗ I₃)`.
#[derive(Debug, Clone)]
pub struct ActuationJacobian {
    /// 6×3N_m map from per-magnet field perturbations to distal-pose
    /// variations in exponential coordinates.
    pub j_b: DMatrix<f64>,
    /// 6×3 restriction to spatially uniform perturbations.
    pub j_b_uniform: Matrix6x3,
    pub n_magnets: usize,
}

pub type Matrix6x3 = nalgebra::SMatrix<f64, 6, 3>;

pub fn actuation_jacobian(
    robot: &DiscretizedRobot,
    field: &FieldSpec,
    theta_star: &ConfigVector,
) -> Result<ActuationJacobian, EquilibriumError> {
    let s = stiffness_hessian(robot, field, theta_star);
    let chol = positive_definite_cholesky(&s)?;
    let m = torque_matrix_cached(robot, &ChainState::new(robot, theta_star));
    let response = chol.solve(&m); // 3N×3N_m
    let j = space_jacobian(robot, theta_star).map_err(|_| EquilibriumError::NonFinite)?;
    let j_b = &j * &response;
    let nm = robot.n_magnets();
    let mut j_b_uniform = Matrix6x3::zeros();
    for k in 0..nm {
        j_b_uniform += j_b.view((0, 3 * k), (6, 3)).clone_owned().fixed_view::<6, 3>(0, 0);
    }
    Ok(ActuationJacobian {
        j_b,
        j_b_uniform,
        n_magnets: nm,
    })
}

/// Actuation classification by controllable degrees of freedom.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DofClass {
    Underactuated,
    FullyActuated,
    Redundant,
}

/// Numerical row rank of the actuation Jacobian (singular-value ratio
/// tolerance 1e-8) together with its actuation class.
pub fn controllable_dof(jac: &ActuationJacobian) -> (usize, DofClass) {
    let sv = jac.j_b.clone().svd(false, false).singular_values;
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    let rank = if smax == 0.0 {
        0
    } else {
        sv.iter().filter(|s| **s > 1e-8 * smax).count()
    };
    let class = match (2 * jac.n_magnets).cmp(&6) {
        std::cmp::Ordering::Less => DofClass::Underactuated,
        std::cmp::Ordering::Equal => DofClass::FullyActuated,
        std::cmp::Ordering::Greater => DofClass::Redundant,
    };
    (rank, class)
}

/// Per-joint material twist `θ_i · t̄`.
pub fn material_twist(robot: &DiscretizedRobot, theta: &ConfigVector) -> DVector<f64> {
    let t = reference_tangent();
    DVector::from_fn(robot.n_joints(), |i, _| joint_rotation(theta, i).dot(&t))
}

/// Equilibrium solve through the backward-iteration form
/// `θ_i = Σ_{k≥i} m̄_k × (R_0^{kᵀ} b_k) / λ_bend(Λ_i)`, valid for axially
/// magnetized robots. Every iterate is exactly material-twist-free.
pub fn backward_iteration_solve(
    robot: &DiscretizedRobot,
    field: &FieldSpec,
    tol_scale: f64,
    max_iterations: usize,
) -> Result<EquilibriumResult, EquilibriumError> {
    if !robot.has_axial_moments() {
        return Err(RobotError::NonAxialMoments.into());
    }
    let n = robot.n_joints();
    let fields = field.per_magnet(robot.n_magnets());
    let lam_min = robot.lambda_min();
    let certified = field.max_magnitude(robot.n_magnets()) < uniqueness_field_bound(robot);
    let mut theta = ConfigVector::zeros(robot.dof());
    let mut alpha = 1.0_f64;
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    for it in 0..max_iterations {
        iterations = it;
        let chain = ChainState::new(robot, &theta);
        // v_k = m̄_k × (R_0^{kᵀ} b_k), suffix-summed over magnets
        let mut update = ConfigVector::zeros(robot.dof());
        let mut suffix = Vector3::zeros();
        let mut mags: Vec<(usize, Vector3<f64>)> = robot
            .magnet_joints
            .iter()
            .zip(&robot.magnet_moments)
            .zip(&fields)
            .map(|((&k, mbar), b)| (k, mbar.cross(&(chain.cumulative[k].transpose() * b))))
            .collect();
        mags.reverse();
        let mut mag_iter = mags.into_iter().peekable();
        for i in (0..n).rev() {
            while let Some((k, v)) = mag_iter.peek() {
                if *k == i {
                    suffix += v;
                    mag_iter.next();
                } else {
                    break;
                }
            }
            let scaled = suffix / robot.bending_stiffness(i);
            update.fixed_rows_mut::<3>(3 * i).copy_from(&scaled);
        }
        let grad = robot.stiffness_apply(&theta) + magnetic_gradient_cached(robot, field, &chain);
        residual = grad.norm();
        let tol = tol_scale * lam_min * theta.norm().max(1.0);
        if residual <= tol.max(64.0 * f64::EPSILON * robot.lambda_max() * theta.norm().max(1.0)) {
            return Ok(EquilibriumResult {
                theta,
                residual_norm: residual,
                iterations: it,
                solver: SolverKind::FixedPoint,
                uniqueness_certified: certified,
                converged: true,
                energy: magnetic_energy_cached(robot, field, &chain),
            });
        }
        let next = (1.0 - alpha) * &theta + alpha * &update;
        let next_grad_norm = {
            let c = ChainState::new(robot, &next);
            (robot.stiffness_apply(&next) + magnetic_gradient_cached(robot, field, &c)).norm()
        };
        if next_grad_norm < residual || alpha < 1e-6 {
            theta = next;
            alpha = (alpha * 1.5).min(1.0);
        } else {
            alpha *= 0.5;
        }
    }
    let chain = ChainState::new(robot, &theta);
    let best = EquilibriumResult {
        theta,
        residual_norm: residual,
        iterations,
        solver: SolverKind::FixedPoint,
        uniqueness_certified: certified,
        converged: false,
        energy: magnetic_energy_cached(robot, field, &chain),
    };
    Err(EquilibriumError::NonConvergence {
        iterations: max_iterations,
        residual_norm: best.residual_norm,
        best: Box::new(best),
    })
}

/// A plane `Π = span{t̄, v}` through the rod axis.
#[derive(Debug, Clone)]
pub struct PlaneSpec {
    /// In-plane direction linearly independent of `t̄`.
    pub v: Vector3<f64>,
}

impl PlaneSpec {
    pub fn new(v: Vector3<f64>) -> Self {
        PlaneSpec { v }
    }

    /// Unit normal `n = t̄ × v / ‖t̄ × v‖`.
    pub fn normal(&self) -> Vector3<f64> {
        reference_tangent().cross(&self.v).normalize()
    }

    /// Orthonormal in-plane basis `(t̄, v̂)` with `v̂ = n × t̄`.
    pub fn basis(&self) -> (Vector3<f64>, Vector3<f64>) {
        let t = reference_tangent();
        (t, self.normal().cross(&t))
    }

    pub fn contains(&self, b: &Vector3<f64>, tol: f64) -> bool {
        b.dot(&self.normal()).abs() <= tol * b.norm().max(1e-300)
    }
}

/// Closed-form small-angle equilibrium for axially magnetized robots under
/// in-plane fields: `θ_i = n̂ · (1/Λ_i) Σ_{k≥i} m̄_kᵀ [b_k]× n̂` with
/// `Λ_i = E_i I / ℓ_i`. The returned configuration is exactly planar.
pub fn planar_small_angle_solution(
    robot: &DiscretizedRobot,
    field: &FieldSpec,
    plane: &PlaneSpec,
) -> Result<ConfigVector, EquilibriumError> {
    if !robot.has_axial_moments() {
        return Err(RobotError::NonAxialMoments.into());
    }
    let fields = field.per_magnet(robot.n_magnets());
    let normal = plane.normal();
    for b in &fields {
        if !plane.contains(b, 1e-9) {
            return Err(RobotError::BadParameter(format!(
                "field {b:?} leaves the requested plane"
            ))
            .into());
        }
    }
    let n = robot.n_joints();
    let mut theta = ConfigVector::zeros(robot.dof());
    let mut suffix = 0.0;
    let mut mags: Vec<(usize, f64)> = robot
        .magnet_joints
        .iter()
        .zip(&robot.magnet_moments)
        .zip(&fields)
        .map(|((&k, mbar), b)| (k, mbar.dot(&b.cross(&normal))))
        .collect();
    mags.reverse();
    let mut mag_iter = mags.into_iter().peekable();
    for i in (0..n).rev() {
        while let Some((k, tau)) = mag_iter.peek() {
            if *k == i {
                suffix += tau;
                mag_iter.next();
            } else {
                break;
            }
        }
        let angle = suffix / robot.bending_stiffness(i);
        let v = angle * normal;
        theta.fixed_rows_mut::<3>(3 * i).copy_from(&v);
    }
    Ok(theta)
}

/// Residual of the equilibrium condition, `‖Λθ − M(θ)b‖`.
pub fn equilibrium_residual(
    robot: &DiscretizedRobot,
    field: &FieldSpec,
    theta: &ConfigVector,
) -> f64 {
    crate::energetics::total_gradient(robot, field, theta).norm()
}

/// Applies `Jl(θ_i)` blockwise; used by tests relating gradient forms.
#[allow(dead_code)]
pub(crate) fn blockwise_jac_left(theta: &ConfigVector, v: &DVector<f64>) -> DVector<f64> {
    let n = theta.len() / 3;
    let mut out = DVector::zeros(theta.len());
    for i in 0..n {
        let jl = jac_left_so3(&joint_rotation(theta, i));
        let piece = jl * Vector3::new(v[3 * i], v[3 * i + 1], v[3 * i + 2]);
        out.fixed_rows_mut::<3>(3 * i).copy_from(&piece);
    }
    out
}

/// Deterministic sample inside the equilibrium-containing ball, used by
/// uniqueness experiments.
pub fn sample_in_ball(
    rng: &mut impl rand::Rng,
    dim: usize,
    radius: f64,
) -> ConfigVector {
    use rand::distributions::Distribution;
    let normal = rand_distr_standard_normal();
    let mut v = ConfigVector::from_fn(dim, |_, _| normal.sample(rng));
    let r: f64 = rng.gen::<f64>().powf(1.0 / dim as f64) * radius;
    let norm = v.norm();
    if norm > 0.0 {
        v *= r / norm;
    }
    v
}

fn rand_distr_standard_normal() -> impl rand::distributions::Distribution<f64> {
    // Box-Muller via uniform pairs keeps the dependency surface small
    struct BoxMuller;
    impl rand::distributions::Distribution<f64> for BoxMuller {
        fn sample<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> f64 {
            let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
            let u2: f64 = rng.gen_range(0.0..1.0);
            (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
        }
    }
    BoxMuller
}
