//! Differential-geometric performance machinery.
//!
//! Under a uniform actuation field below the uniqueness bound, the
//! equilibrium map `b_u ↦ θ*(b_u)` is a smooth immersion of the actuation
//! ball into configuration space. Its Gram matrix
//! `G = (∂θ/∂b_u)ᵀ(∂θ/∂b_u)` with `∂θ/∂b_u = S^{-1} M U_u` induces the
//! volume density `𝒥 = √det G` that converts integrals of task-space
//! performance densities over configurations into integrals over the
//! actuation domain:
//!
//! `Z(design) = ∫_𝔹 z(b_u; design) · 𝒥(b_u) dΩ`.
//!
//! The weak-field limit replaces `S` by `Λ` and admits the fully
//! structural approximation through the compliance-accumulation matrix
//! `Λ_m` (entries `Λ^m_{min(i,j)} = Σ_{l≤k} (ℓ_l/E_lI)²`), which carries
//! the analytic part of the placement gradient.
//!
//! All determinant-like quantities are evaluated through singular values
//! of the rectangular factors, never through `det(BᵀB)`, which keeps them
//! meaningful when the smallest response direction is orders of magnitude
//! below the leading ones.

use nalgebra::{DMatrix, Matrix3, Vector3};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::energetics::{ChainState, FieldSpec};
use crate::equilibrium::{
    solve_equilibrium, stiffness_hessian, EquilibriumError, PlaneSpec, SolveOptions,
};
use crate::kinematics::{centerline, tip_position_jacobian, ConfigVector};
use crate::lie::exp_so3;
use crate::robot::{
    discretize_with_counts, equal_counts, lipschitz_constant, reference_tangent, torque_bounds,
    uniqueness_field_bound, DiscretizedRobot, RobotError, RobotSpec,
};

/// Positivity floor of the distortion density.
pub const DISTORTION_FLOOR: f64 = 1e-12;

/// Singular values below this ratio of the largest are treated as
/// uncontrollable when restricting task metrics.
pub const CONTROLLABLE_SV_RATIO: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum PerfError {
    #[error(transparent)]
    Robot(#[from] RobotError),
    #[error(transparent)]
    Equilibrium(#[from] EquilibriumError),
    #[error("infeasible design: {0}")]
    Infeasible(String),
    #[error("actuation radius {radius:.3e} T exceeds the certified bound {bound:.3e} T")]
    FieldBound { radius: f64, bound: f64 },
    #[error("quadrature node {index} failed: {source}")]
    Node {
        index: usize,
        #[source]
        source: Box<PerfError>,
    },
}

/// Magnet placement design: cumulative positions of the free magnets (the
/// distal magnet stays pinned at the total length) plus the axial moment
/// signs of all magnets.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DesignVariables {
    pub free_positions: Vec<f64>,
    pub signs: Vec<f64>,
    pub min_spacing: f64,
}

impl DesignVariables {
    pub fn n_magnets(&self) -> usize {
        self.signs.len()
    }

    /// All magnet positions including the pinned distal one.
    pub fn full_positions(&self, total_length: f64) -> Vec<f64> {
        let mut out = self.free_positions.clone();
        out.push(total_length);
        out
    }

    pub fn validate(&self, total_length: f64) -> Result<(), PerfError> {
        if self.free_positions.len() + 1 != self.signs.len() {
            return Err(PerfError::Infeasible(format!(
                "{} free positions need {} signs",
                self.free_positions.len(),
                self.free_positions.len() + 1
            )));
        }
        if self.signs.iter().any(|s| *s != 1.0 && *s != -1.0) {
            return Err(PerfError::Infeasible("signs must be ±1".into()));
        }
        let full = self.full_positions(total_length);
        let mut prev = 0.0;
        for (q, &x) in full.iter().enumerate() {
            if !(x > 0.0 && x <= total_length) {
                return Err(PerfError::Infeasible(format!(
                    "position {q} = {x} outside (0, {total_length}]"
                )));
            }
            let gap = x - prev;
            if q > 0 && gap < self.min_spacing - 1e-12 {
                return Err(PerfError::Infeasible(format!(
                    "gap {gap:.4e} before magnet {q} below the minimum spacing {:.4e}",
                    self.min_spacing
                )));
            }
            prev = x;
        }
        Ok(())
    }
}

/// Instantiate a template robot at a design: magnet positions and signs
/// replaced, equal flexible-joint counts per segment so the discretized
/// geometry varies smoothly with the positions.
pub fn robot_for_design(
    template: &RobotSpec,
    design: &DesignVariables,
    n_joints: usize,
) -> Result<(RobotSpec, DiscretizedRobot), PerfError> {
    let total = template.total_length();
    design.validate(total)?;
    if design.n_magnets() != template.n_magnets() {
        return Err(PerfError::Infeasible(format!(
            "design has {} magnets, template {}",
            design.n_magnets(),
            template.n_magnets()
        )));
    }
    let mut spec = template.clone();
    spec.magnet_positions = design.full_positions(total);
    spec.magnet_signs = design.signs.clone();
    let counts = equal_counts(spec.n_magnets(), n_joints);
    let robot = discretize_with_counts(&spec, &counts)?;
    Ok((spec, robot))
}

/// Gauss–Legendre nodes and weights on \[-1, 1\] by Newton iteration.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for k in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (k as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            // evaluate P_n and P_n' by recurrence
            let (mut p0, mut p1) = (1.0, x);
            for j in 2..=n {
                let p2 = ((2 * j - 1) as f64 * x * p1 - (j - 1) as f64 * p0) / j as f64;
                p0 = p1;
                p1 = p2;
            }
            let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (mut p0, mut p1) = (1.0, x);
        for j in 2..=n {
            let p2 = ((2 * j - 1) as f64 * x * p1 - (j - 1) as f64 * p0) / j as f64;
            p0 = p1;
            p1 = p2;
        }
        let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[k] = -x;
        nodes[n - 1 - k] = x;
        weights[k] = w;
        weights[n - 1 - k] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// The actuation domain integrated over: a solid ball of uniform fields,
/// or a disk inside a plane through the rod axis (planar studies).
#[derive(Debug, Clone)]
pub enum ActuationDomain {
    Ball { radius: f64 },
    Disk { radius: f64, plane: PlaneSpec },
}

/// One quadrature node: a uniform field vector with its weight.
#[derive(Debug, Clone, Copy)]
pub struct QuadratureNode {
    pub field: Vector3<f64>,
    pub weight: f64,
}

impl ActuationDomain {
    pub fn radius(&self) -> f64 {
        match self {
            ActuationDomain::Ball { radius } => *radius,
            ActuationDomain::Disk { radius, .. } => *radius,
        }
    }

    pub fn plane(&self) -> Option<&PlaneSpec> {
        match self {
            ActuationDomain::Ball { .. } => None,
            ActuationDomain::Disk { plane, .. } => Some(plane),
        }
    }

    /// Lebesgue measure of the domain (area of the disk, volume of the
    /// ball); Monte-Carlo estimates scale sample means by it.
    pub fn measure(&self) -> f64 {
        match self {
            ActuationDomain::Ball { radius } => 4.0 / 3.0 * std::f64::consts::PI * radius.powi(3),
            ActuationDomain::Disk { radius, .. } => std::f64::consts::PI * radius * radius,
        }
    }

    /// Deterministic quadrature: Gauss–Legendre in radius crossed with
    /// uniform angles on the disk, or with a Gauss–Legendre polar × uniform
    /// azimuth product rule on the sphere (`angular = polar × 8`).
    pub fn nodes(&self, radial: usize, angular: usize) -> Vec<QuadratureNode> {
        assert!(radial >= 1 && angular >= 1);
        let r_max = self.radius();
        let (gx, gw) = gauss_legendre(radial);
        let radii: Vec<(f64, f64)> = gx
            .iter()
            .zip(&gw)
            .map(|(x, w)| (0.5 * r_max * (x + 1.0), 0.5 * r_max * w))
            .collect();
        let mut out = Vec::new();
        match self {
            ActuationDomain::Disk { plane, .. } => {
                let (t, v) = plane.basis();
                for &(r, wr) in &radii {
                    for j in 0..angular {
                        let a = 2.0 * std::f64::consts::PI * j as f64 / angular as f64;
                        out.push(QuadratureNode {
                            field: r * (a.cos() * t + a.sin() * v),
                            weight: wr * r * (2.0 * std::f64::consts::PI / angular as f64),
                        });
                    }
                }
            }
            ActuationDomain::Ball { .. } => {
                let azim = 8usize.min(angular.max(1));
                let polar = (angular / azim).max(1);
                let (px, pw) = gauss_legendre(polar);
                let t = reference_tangent();
                let (e1, e2) = (Vector3::x(), Vector3::y());
                for &(r, wr) in &radii {
                    for (c, wc) in px.iter().zip(&pw) {
                        let s = (1.0 - c * c).max(0.0).sqrt();
                        for j in 0..azim {
                            let a = 2.0 * std::f64::consts::PI * j as f64 / azim as f64;
                            let dir = s * a.cos() * e1 + s * a.sin() * e2 + *c * t;
                            out.push(QuadratureNode {
                                field: r * dir,
                                weight: wr * r * r * wc * (2.0 * std::f64::consts::PI / azim as f64),
                            });
                        }
                    }
                }
            }
        }
        out
    }

    /// Uniform random field inside the domain.
    pub fn sample(&self, rng: &mut impl Rng) -> Vector3<f64> {
        match self {
            ActuationDomain::Ball { radius } => {
                *radius * crate::oracles::sample_unit_ball(rng)
            }
            ActuationDomain::Disk { radius, plane } => {
                let (t, v) = plane.basis();
                let (x, y) = crate::oracles::sample_unit_disk(rng);
                *radius * (x * t + y * v)
            }
        }
    }
}

/// Gram matrix of the equilibrium immersion with its volume density
/// `𝒥 = √det G`, computed from the singular values of the rectangular
/// immersion factor.
#[derive(Debug, Clone)]
pub struct GramMatrix {
    pub matrix: Matrix3<f64>,
    pub singular_values: Vector3<f64>,
    pub jacobian: f64,
}

impl GramMatrix {
    fn from_factor(factor: &DMatrix<f64>) -> GramMatrix {
        let g = Matrix3::from_iterator(
            (factor.transpose() * factor).iter().cloned(),
        );
        let sv = factor.clone().svd(false, false).singular_values;
        let s = Vector3::new(sv[0], sv[1], sv[2]);
        GramMatrix {
            matrix: g,
            singular_values: s,
            jacobian: s.x * s.y * s.z,
        }
    }

    /// Build from a symmetric 3×3 approximation. Eigenvalues below the
    /// eigensolver's absolute resolution (`32 ε · λ_max`) are numerically
    /// zero and clamp to zero, so structurally singular designs report a
    /// vanishing volume density instead of rounding noise.
    pub fn from_symmetric(g: Matrix3<f64>) -> GramMatrix {
        let eig = g.symmetric_eigen();
        let lam_max = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
        let floor = 32.0 * f64::EPSILON * lam_max;
        let mut vals: Vec<f64> = eig
            .eigenvalues
            .iter()
            .map(|l| if *l <= floor { 0.0 } else { *l })
            .collect();
        vals.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let s = Vector3::new(vals[0].sqrt(), vals[1].sqrt(), vals[2].sqrt());
        GramMatrix {
            matrix: g,
            singular_values: s,
            jacobian: s.x * s.y * s.z,
        }
    }
}

/// Immersion factor `∂θ/∂b_u = S^{-1} M U_u ∈ ℝ^{3N×3}`.
fn immersion_factor(
    robot: &DiscretizedRobot,
    field_u: &Vector3<f64>,
    theta: &ConfigVector,
) -> Result<DMatrix<f64>, PerfError> {
    let field = FieldSpec::uniform(*field_u);
    let s = stiffness_hessian(robot, &field, theta);
    let chol = s
        .clone()
        .cholesky()
        .ok_or(EquilibriumError::SingularStiffness {
            lambda_min: f64::NAN,
        })?;
    let m = crate::energetics::torque_matrix(robot, theta);
    let mut mu = DMatrix::zeros(robot.dof(), 3);
    for k in 0..robot.n_magnets() {
        mu += m.view((0, 3 * k), (robot.dof(), 3));
    }
    Ok(chol.solve(&mu))
}

/// Exact immersion Gram matrix at an equilibrium.
pub fn immersion_gram_exact(
    robot: &DiscretizedRobot,
    field_u: &Vector3<f64>,
    theta_star: &ConfigVector,
) -> Result<GramMatrix, PerfError> {
    Ok(GramMatrix::from_factor(&immersion_factor(
        robot, field_u, theta_star,
    )?))
}

/// Weak-field Gram matrix with the stiffness Hessian replaced by `Λ`:
/// `G̃ = U_uᵀ M(θ)ᵀ Λ^{-2} M(θ) U_u`. The gap `|𝒥² − 𝒥̃²|` obeys
/// [`weak_field_gap_bound`].
pub fn immersion_gram_elastic(
    robot: &DiscretizedRobot,
    theta: &ConfigVector,
) -> GramMatrix {
    let m = crate::energetics::torque_matrix(robot, theta);
    let mut mu = DMatrix::zeros(robot.dof(), 3);
    for k in 0..robot.n_magnets() {
        mu += m.view((0, 3 * k), (robot.dof(), 3));
    }
    GramMatrix::from_factor(&robot.stiffness_solve_matrix(&mu))
}

/// Upper bound on `|𝒥² − 𝒥̃²|` in the certified regime:
/// `3 (2𝓛̂ − 𝓛̂²)/(1 − 𝓛̂)² · N_m³ 𝓜₀⁶ / λ_min⁶` with the dimensionless
/// contraction factor `𝓛̂ = 𝓛/λ_min(Λ)`.
pub fn weak_field_gap_bound(robot: &DiscretizedRobot, field: &FieldSpec) -> f64 {
    let lam = robot.lambda_min();
    let lhat = lipschitz_constant(robot, field) / lam;
    assert!(lhat < 1.0, "gap bound requires the certified regime");
    let m0 = torque_bounds(robot, field).matrix;
    let nm = robot.n_magnets() as f64;
    3.0 * (2.0 * lhat - lhat * lhat) / ((1.0 - lhat) * (1.0 - lhat))
        * nm.powi(3)
        * m0.powi(6)
        / lam.powi(6)
}

/// Compliance-accumulation matrix `Λ_m`: entry `(i, j)` is
/// `Λ^m_{min(i,j)} = Σ_{l ≤ k_min} (ℓ_l / E_l I)²` over the joints up to the
/// earlier magnet.
#[derive(Debug, Clone)]
pub struct LambdaM {
    pub matrix: DMatrix<f64>,
}

impl LambdaM {
    /// Exact accumulation over a discretized robot (bending compliances).
    pub fn from_robot(robot: &DiscretizedRobot) -> LambdaM {
        let nm = robot.n_magnets();
        let mut cum = Vec::with_capacity(robot.n_joints());
        let mut acc = 0.0;
        for l in 0..robot.n_joints() {
            let c = 1.0 / robot.bending_stiffness(l);
            acc += c * c;
            cum.push(acc);
        }
        let mut m = DMatrix::zeros(nm, nm);
        for a in 0..nm {
            for c in 0..nm {
                m[(a, c)] = cum[robot.magnet_joints[a.min(c)]];
            }
        }
        LambdaM { matrix: m }
    }

    /// Structural approximation from design positions on a uniform rod:
    /// `Λ^m_{k_i} ≈ (1/(k₀ E² I²)) Σ_{j≤i} (L_j − L_{j−1})²` with `k₀`
    /// flexible joints per segment.
    pub fn from_design(
        positions: &[f64],
        joints_per_segment: usize,
        youngs: f64,
        inertia: f64,
    ) -> LambdaM {
        let nm = positions.len();
        let scale = 1.0 / (joints_per_segment as f64 * youngs * youngs * inertia * inertia);
        let mut cum = Vec::with_capacity(nm);
        let mut acc = 0.0;
        let mut prev = 0.0;
        for &x in positions {
            let gap = x - prev;
            acc += gap * gap * scale;
            cum.push(acc);
            prev = x;
        }
        let mut m = DMatrix::zeros(nm, nm);
        for a in 0..nm {
            for c in 0..nm {
                m[(a, c)] = cum[a.min(c)];
            }
        }
        LambdaM { matrix: m }
    }
}

/// Structural Gram approximation
/// `G̃ = Σ_{ij} Λ^m_{ij} ((m_iᵀ m_j) I₃ − m_j m_iᵀ)`, positive semidefinite
/// by construction.
pub fn immersion_gram_approx(lambda_m: &LambdaM, moments: &[Vector3<f64>]) -> GramMatrix {
    let nm = moments.len();
    assert_eq!(lambda_m.matrix.nrows(), nm);
    let mut g = Matrix3::zeros();
    for a in 0..nm {
        for c in 0..nm {
            let w = lambda_m.matrix[(a, c)];
            g += w * (moments[a].dot(&moments[c]) * Matrix3::identity()
                - moments[c] * moments[a].transpose());
        }
    }
    GramMatrix::from_symmetric(g)
}

/// First-order (small-angle) equilibrium for axially magnetized robots:
/// `θ_i = Σ_{k≥i} m̄_k × b_k / Λ_i^bend`. Valid for any field direction.
pub fn small_angle_solution(robot: &DiscretizedRobot, field: &FieldSpec) -> ConfigVector {
    let fields = field.per_magnet(robot.n_magnets());
    let n = robot.n_joints();
    let mut theta = ConfigVector::zeros(robot.dof());
    let mut suffix = Vector3::zeros();
    let mut mags: Vec<(usize, Vector3<f64>)> = robot
        .magnet_joints
        .iter()
        .zip(&robot.magnet_moments)
        .zip(&fields)
        .map(|((&k, m), b)| (k, m.cross(b)))
        .collect();
    mags.reverse();
    let mut it = mags.into_iter().peekable();
    for i in (0..n).rev() {
        while let Some((k, v)) = it.peek() {
            if *k == i {
                suffix += v;
                it.next();
            } else {
                break;
            }
        }
        let piece = suffix / robot.bending_stiffness(i);
        theta.fixed_rows_mut::<3>(3 * i).copy_from(&piece);
    }
    theta
}

/// Moments rotated by the small-angle closed form; the structural Gram
/// evaluated on them needs no equilibrium solve.
pub fn weak_field_moments(robot: &DiscretizedRobot, field_u: &Vector3<f64>) -> Vec<Vector3<f64>> {
    let theta = small_angle_solution(robot, &FieldSpec::uniform(*field_u));
    ChainState::new(robot, &theta).moments
}

/// Fully structural weak-field Gram: exact `Λ_m` of the robot and
/// closed-form rotated moments. Smooth in the design for fixed joint
/// counts; the placement gradient differentiates this object.
pub fn weak_field_gram(robot: &DiscretizedRobot, field_u: &Vector3<f64>) -> GramMatrix {
    immersion_gram_approx(
        &LambdaM::from_robot(robot),
        &weak_field_moments(robot, field_u),
    )
}

/// Local performance density over the task space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerformanceIndex {
    /// Volume of reachable tip-velocity directions: the product of the
    /// controllable singular values of the positional actuation response
    /// (restricted to the study plane for disk domains).
    Manipulability,
    /// Anisotropy of the restricted task metric,
    /// `ε₀ + ‖Ĝ − (tr Ĝ / r) I_r‖_F²`; strictly positive, minimized by
    /// isotropic metrics.
    Distortion,
    /// Constant density 1; the integrated objective is then the induced
    /// volume `𝒱 = ∫ 𝒥`.
    Unit,
}

/// Positional response of the tip to uniform field perturbations,
/// `A = J_p S^{-1} M U_u ∈ ℝ^{3×3}`.
pub fn task_response(
    robot: &DiscretizedRobot,
    field_u: &Vector3<f64>,
    theta_star: &ConfigVector,
) -> Result<Matrix3<f64>, PerfError> {
    let factor = immersion_factor(robot, field_u, theta_star)?;
    let jp = tip_position_jacobian(robot, theta_star);
    let a = jp * factor;
    Ok(Matrix3::from_iterator(a.iter().cloned()))
}

fn restricted_singular_values(a: &Matrix3<f64>, plane: Option<&PlaneSpec>) -> Vec<f64> {
    match plane {
        Some(p) => {
            let (t, v) = p.basis();
            let mut proj = nalgebra::SMatrix::<f64, 2, 3>::zeros();
            proj.row_mut(0).copy_from(&t.transpose());
            proj.row_mut(1).copy_from(&v.transpose());
            let ap = proj * a;
            ap.svd(false, false).singular_values.iter().cloned().collect()
        }
        None => a.svd(false, false).singular_values.iter().cloned().collect(),
    }
}

/// Manipulability density; see [`PerformanceIndex::Manipulability`].
pub fn manipulability_density(
    robot: &DiscretizedRobot,
    field_u: &Vector3<f64>,
    theta_star: &ConfigVector,
    plane: Option<&PlaneSpec>,
) -> Result<f64, PerfError> {
    let a = task_response(robot, field_u, theta_star)?;
    let sv = restricted_singular_values(&a, plane);
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    Ok(match plane {
        // planar studies keep both in-plane directions
        Some(_) => sv.iter().product(),
        // spatial studies keep the numerically controllable directions
        None => sv
            .iter()
            .filter(|s| **s > CONTROLLABLE_SV_RATIO * smax)
            .product(),
    })
}

/// Distortion density; see [`PerformanceIndex::Distortion`].
pub fn distortion_density(
    robot: &DiscretizedRobot,
    field_u: &Vector3<f64>,
    theta_star: &ConfigVector,
    plane: Option<&PlaneSpec>,
) -> Result<f64, PerfError> {
    let a = task_response(robot, field_u, theta_star)?;
    Ok(distortion_of_singular_values(&restricted_singular_values(
        &a, plane,
    )))
}

/// `ε₀ + ‖Ĝ − (tr Ĝ / r) I‖_F²` evaluated from the singular values of the
/// restricted response (`Ĝ = Â Âᵀ` has eigenvalues `σ_i²`).
pub fn distortion_of_singular_values(sv: &[f64]) -> f64 {
    let r = sv.len() as f64;
    let mean = sv.iter().map(|s| s * s).sum::<f64>() / r;
    DISTORTION_FLOOR
        + sv.iter()
            .map(|s| {
                let d = s * s - mean;
                d * d
            })
            .sum::<f64>()
}

fn density(
    robot: &DiscretizedRobot,
    field_u: &Vector3<f64>,
    theta_star: &ConfigVector,
    index: &PerformanceIndex,
    plane: Option<&PlaneSpec>,
) -> Result<f64, PerfError> {
    match index {
        PerformanceIndex::Manipulability => {
            manipulability_density(robot, field_u, theta_star, plane)
        }
        PerformanceIndex::Distortion => distortion_density(robot, field_u, theta_star, plane),
        PerformanceIndex::Unit => Ok(1.0),
    }
}

/// One solved node of the actuation integral.
pub struct NodeEval {
    pub theta: ConfigVector,
    pub density: f64,
    pub immersion: f64,
}

pub fn evaluate_node(
    robot: &DiscretizedRobot,
    field_u: &Vector3<f64>,
    index: &PerformanceIndex,
    domain: &ActuationDomain,
) -> Result<NodeEval, PerfError> {
    let field = FieldSpec::uniform(*field_u);
    let res = solve_equilibrium(robot, &field, &SolveOptions::default())?;
    let gram = immersion_gram_exact(robot, field_u, &res.theta)?;
    let z = density(robot, field_u, &res.theta, index, domain.plane())?;
    Ok(NodeEval {
        theta: res.theta,
        density: z,
        immersion: gram.jacobian,
    })
}

/// Integrand value `z · 𝒥` at one field (used by Monte-Carlo checks).
pub fn node_integrand(
    robot: &DiscretizedRobot,
    field_u: &Vector3<f64>,
    index: &PerformanceIndex,
    domain: &ActuationDomain,
) -> Result<f64, PerfError> {
    let node = evaluate_node(robot, field_u, index, domain)?;
    Ok(node.density * node.immersion)
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub radial: usize,
    pub angular: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            radial: 8,
            angular: 32,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ObjectiveOptions {
    pub quadrature: QuadratureSpec,
    /// Joint count of the design discretization.
    pub n_joints: usize,
    /// Skip the certified-bound precondition (used by sweeps that
    /// deliberately leave the certified regime and flag it).
    pub allow_uncertified: bool,
}

impl Default for ObjectiveOptions {
    fn default() -> Self {
        ObjectiveOptions {
            quadrature: QuadratureSpec::default(),
            n_joints: 60,
            allow_uncertified: false,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ObjectiveValue {
    /// `∫ z 𝒥 dΩ`.
    pub value: f64,
    /// Induced volume `𝒱 = ∫ 𝒥 dΩ`.
    pub volume: f64,
    /// `value / volume` (average density on the induced configuration set).
    pub normalized: f64,
    pub nodes: usize,
}

/// Global performance objective over the actuation domain. Nodes evaluate
/// in parallel and accumulate in node order, so results are reproducible
/// bit for bit.
pub fn global_objective(
    template: &RobotSpec,
    design: &DesignVariables,
    index: &PerformanceIndex,
    domain: &ActuationDomain,
    opts: &ObjectiveOptions,
) -> Result<ObjectiveValue, PerfError> {
    let (_, robot) = robot_for_design(template, design, opts.n_joints)?;
    let bound = uniqueness_field_bound(&robot);
    if !opts.allow_uncertified && domain.radius() > bound * (1.0 + 1e-9) {
        return Err(PerfError::FieldBound {
            radius: domain.radius(),
            bound,
        });
    }
    let nodes = domain.nodes(opts.quadrature.radial, opts.quadrature.angular);
    let evals: Vec<Result<(f64, f64), PerfError>> = nodes
        .par_iter()
        .enumerate()
        .map(|(i, node)| {
            evaluate_node(&robot, &node.field, index, domain)
                .map(|e| (e.density * e.immersion, e.immersion))
                .map_err(|e| PerfError::Node {
                    index: i,
                    source: Box::new(e),
                })
        })
        .collect();
    let mut value = 0.0;
    let mut volume = 0.0;
    for (node, eval) in nodes.iter().zip(evals) {
        let (zj, j) = eval?;
        value += node.weight * zj;
        volume += node.weight * j;
    }
    Ok(ObjectiveValue {
        value,
        volume,
        normalized: if volume > 0.0 { value / volume } else { 0.0 },
        nodes: nodes.len(),
    })
}

/// Design gradient of the global objective with respect to the free magnet
/// positions. Per node the integrand derivative splits as
/// `½ z 𝒥 tr(G̃^{-1} ∂G̃/∂L) + 𝒥 ∂z/∂L`: the first term is analytic
/// through the structural weak-field Gram (exact `Λ_m` and closed-form
/// moment rotations, both smooth in the design), the second a central
/// difference with re-solved equilibria. Nodes whose structural Gram is
/// singular or worse conditioned than 1e12 fall back to a full central
/// difference of `z·𝒥`.
pub fn objective_design_gradient(
    template: &RobotSpec,
    design: &DesignVariables,
    index: &PerformanceIndex,
    domain: &ActuationDomain,
    opts: &ObjectiveOptions,
) -> Result<Vec<f64>, PerfError> {
    let total = template.total_length();
    let n_free = design.free_positions.len();
    if n_free == 0 {
        return Ok(Vec::new());
    }
    let (_, robot) = robot_for_design(template, design, opts.n_joints)?;
    let bound = uniqueness_field_bound(&robot);
    if !opts.allow_uncertified && domain.radius() > bound * (1.0 + 1e-9) {
        return Err(PerfError::FieldBound {
            radius: domain.radius(),
            bound,
        });
    }
    let h_solve = 1e-4 * total; // step for re-solved density differences
    // step for the structural Gram: its Λ_m part is quadratic in the
    // design (central differences exact at any step), so a wide step
    // suppresses cancellation noise in the near-singular trace
    let h_gram = 1e-3 * total;
    let perturbed = |q: usize, h: f64, sign: f64| -> Result<DiscretizedRobot, PerfError> {
        let mut d = design.clone();
        d.free_positions[q] += sign * h;
        // relax spacing checks for interior finite differences
        d.min_spacing = 0.0;
        Ok(robot_for_design(template, &d, opts.n_joints)?.1)
    };
    let mut plus = Vec::with_capacity(n_free);
    let mut minus = Vec::with_capacity(n_free);
    let mut gram_plus = Vec::with_capacity(n_free);
    let mut gram_minus = Vec::with_capacity(n_free);
    for q in 0..n_free {
        plus.push(perturbed(q, h_solve, 1.0)?);
        minus.push(perturbed(q, h_solve, -1.0)?);
        gram_plus.push(perturbed(q, h_gram, 1.0)?);
        gram_minus.push(perturbed(q, h_gram, -1.0)?);
    }
    let nodes = domain.nodes(opts.quadrature.radial, opts.quadrature.angular);
    let per_node: Vec<Result<Vec<f64>, PerfError>> = nodes
        .par_iter()
        .enumerate()
        .map(|(i, node)| {
            let run = || -> Result<Vec<f64>, PerfError> {
                let center = evaluate_node(&robot, &node.field, index, domain)?;
                let gt = weak_field_gram(&robot, &node.field);
                let well_conditioned = {
                    let sv = &gt.singular_values;
                    sv.z > 0.0 && (sv.x / sv.z) * (sv.x / sv.z) < 1e12
                };
                let mut grad = Vec::with_capacity(n_free);
                for q in 0..n_free {
                    let ep = evaluate_node(&plus[q], &node.field, index, domain)?;
                    let em = evaluate_node(&minus[q], &node.field, index, domain)?;
                    if well_conditioned {
                        let gp = weak_field_gram(&gram_plus[q], &node.field);
                        let gm = weak_field_gram(&gram_minus[q], &node.field);
                        let dg = (gp.matrix - gm.matrix) / (2.0 * h_gram);
                        let ginv = gt
                            .matrix
                            .try_inverse()
                            .expect("conditioned Gram must invert");
                        let trace = (ginv * dg).trace();
                        let dz = (ep.density - em.density) / (2.0 * h_solve);
                        grad.push(
                            0.5 * center.density * center.immersion * trace
                                + center.immersion * dz,
                        );
                    } else {
                        grad.push(
                            (ep.density * ep.immersion - em.density * em.immersion)
                                / (2.0 * h_solve),
                        );
                    }
                }
                Ok(grad)
            };
            run().map_err(|e| PerfError::Node {
                index: i,
                source: Box::new(e),
            })
        })
        .collect();
    let mut out = vec![0.0; n_free];
    for (node, g) in nodes.iter().zip(per_node) {
        let g = g?;
        for (o, gi) in out.iter_mut().zip(g) {
            *o += node.weight * gi;
        }
    }
    Ok(out)
}

/// Fully structural weak-field induced volume `∫ 𝒥̃ dΩ` evaluated from
/// design positions alone: magnet rotation angles come from the continuum
/// closed form `w_q = (1/EI) Σ_j (m̄_j × b) min(L_j, L_q)` and `Λ_m` from
/// its structural formula. Defined for any positions in `[0, L]`,
/// including coincident boundary placements, where it vanishes identically.
pub fn structural_induced_volume(
    positions: &[f64],
    signs: &[f64],
    dipole_modulus: f64,
    youngs: f64,
    inertia: f64,
    joints_per_segment: usize,
    domain: &ActuationDomain,
    quadrature: &QuadratureSpec,
) -> f64 {
    let t = reference_tangent();
    let moments_bar: Vec<Vector3<f64>> =
        signs.iter().map(|s| *s * dipole_modulus * t).collect();
    let lambda_m = LambdaM::from_design(positions, joints_per_segment, youngs, inertia);
    let ei = youngs * inertia;
    let nodes = domain.nodes(quadrature.radial, quadrature.angular);
    let mut acc = 0.0;
    for node in &nodes {
        let moments: Vec<Vector3<f64>> = positions
            .iter()
            .zip(&moments_bar)
            .map(|(&lq, mbar)| {
                let mut w = Vector3::zeros();
                for (&lj, mj) in positions.iter().zip(&moments_bar) {
                    w += mj.cross(&node.field) * lj.min(lq) / ei;
                }
                exp_so3(&w) * mbar
            })
            .collect();
        acc += node.weight * immersion_gram_approx(&lambda_m, &moments).jacobian;
    }
    acc
}

/// Distal positions swept over a grid of in-plane fields, with the covered
/// area estimated by summing the shoelace areas of the deformed grid cells
/// and normalizing by `L²`.
#[derive(Debug, Clone, Serialize)]
pub struct WorkspaceSweep {
    /// Tip coordinates `(along v̂, along t̄)`, direction-major rows.
    pub points: Vec<(f64, f64)>,
    pub n_magnitudes: usize,
    pub n_directions: usize,
    pub normalized_area: f64,
    /// Grid indices `(magnitude, direction)` of failed solves.
    pub failures: Vec<(usize, usize)>,
}

/// Sweep fields `b = B(cos γ t̄ + sin γ v̂)` over magnitudes × angles
/// `γ ∈ [γ_min, γ_max]`.
pub fn workspace_sweep(
    robot: &DiscretizedRobot,
    plane: &PlaneSpec,
    magnitudes: &[f64],
    n_directions: usize,
    gamma_range: (f64, f64),
) -> WorkspaceSweep {
    assert!(n_directions >= 1);
    let (t, v) = plane.basis();
    let l = robot.total_length();
    let mut grid = vec![vec![None; n_directions]; magnitudes.len()];
    let mut failures = Vec::new();
    let results: Vec<(usize, usize, Option<(f64, f64)>)> = (0..magnitudes.len())
        .flat_map(|ib| (0..n_directions).map(move |ig| (ib, ig)))
        .collect::<Vec<_>>()
        .par_iter()
        .map(|&(ib, ig)| {
            let gamma = if n_directions == 1 {
                gamma_range.0
            } else {
                gamma_range.0
                    + (gamma_range.1 - gamma_range.0) * ig as f64 / (n_directions - 1) as f64
            };
            let field = FieldSpec::uniform(
                magnitudes[ib] * (gamma.cos() * t + gamma.sin() * v),
            );
            let point = solve_equilibrium(robot, &field, &SolveOptions::default())
                .ok()
                .map(|res| {
                    let tip = centerline(robot, &res.theta)[robot.n_joints()];
                    (tip.dot(&v), tip.dot(&t))
                });
            (ib, ig, point)
        })
        .collect();
    for (ib, ig, point) in results {
        match point {
            Some(p) => grid[ib][ig] = Some(p),
            None => failures.push((ib, ig)),
        }
    }
    // sum of deformed grid-cell areas (shoelace per quad)
    let mut area = 0.0;
    for ib in 1..magnitudes.len() {
        for ig in 1..n_directions {
            if let (Some(a), Some(b), Some(c), Some(d)) = (
                grid[ib - 1][ig - 1],
                grid[ib][ig - 1],
                grid[ib][ig],
                grid[ib - 1][ig],
            ) {
                let quad = [a, b, c, d];
                let mut s = 0.0;
                for i in 0..4 {
                    let (x0, y0) = quad[i];
                    let (x1, y1) = quad[(i + 1) % 4];
                    s += x0 * y1 - x1 * y0;
                }
                area += 0.5 * s.abs();
            }
        }
    }
    WorkspaceSweep {
        points: grid
            .iter()
            .flatten()
            .filter_map(|p| *p)
            .collect(),
        n_magnitudes: magnitudes.len(),
        n_directions,
        normalized_area: area / (l * l),
        failures,
    }
}

impl DiscretizedRobot {
    /// `Λ^{-1} M` for a dense right-hand side, columnwise.
    pub(crate) fn stiffness_solve_matrix(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = m.clone();
        for (i, s) in self.stiffness.iter().enumerate() {
            for c in 0..3 {
                let row = 3 * i + c;
                for col in 0..out.ncols() {
                    out[(row, col)] /= s[c];
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::robot::{discretize, reference_spec};
    use approx::assert_relative_eq;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    /// Two-magnet template used across the design studies: short magnets on
    /// a soft rod so the structural model is nearly ideal.
    pub(crate) fn two_magnet_template() -> RobotSpec {
        RobotSpec {
            flexible_length: 30e-3,
            magnet_length: 0.6e-3,
            area_inertia: 0.7854e-12,
            youngs_flexible: 5e6,
            youngs_magnet: 160e9,
            poisson_flexible: 0.49,
            poisson_magnet: 0.3,
            dipole_modulus: 1e-2,
            magnet_positions: vec![12e-3, 31.2e-3],
            magnet_signs: vec![1.0, 1.0],
        }
    }

    fn design(x: f64, signs: [f64; 2]) -> DesignVariables {
        DesignVariables {
            free_positions: vec![x],
            signs: signs.to_vec(),
            min_spacing: 1e-3,
        }
    }

    fn disk() -> PlaneSpec {
        PlaneSpec::new(Vector3::x())
    }

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        let (x, w) = gauss_legendre(8);
        // degree-15 monomials integrate exactly on [-1, 1]
        for p in [0usize, 2, 8, 14] {
            let num: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(p as i32)).sum();
            let exact = 2.0 / (p as f64 + 1.0);
            assert_relative_eq!(num, exact, max_relative = 1e-12);
        }
        let odd: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(7)).sum();
        assert!(odd.abs() < 1e-14);
    }

    #[test]
    fn disk_and_ball_quadratures_recover_their_measures() {
        let disk_dom = ActuationDomain::Disk {
            radius: 2.0,
            plane: disk(),
        };
        let total: f64 = disk_dom.nodes(8, 32).iter().map(|n| n.weight).sum();
        assert_relative_eq!(total, disk_dom.measure(), max_relative = 1e-12);
        let ball = ActuationDomain::Ball { radius: 1.5 };
        let total: f64 = ball.nodes(8, 32).iter().map(|n| n.weight).sum();
        assert_relative_eq!(total, ball.measure(), max_relative = 1e-12);
    }

    #[test]
    fn single_magnet_immersion_is_singular() {
        let robot = discretize(&reference_spec(), 7).unwrap();
        let b = Vector3::new(2e-3, 0.0, 0.0);
        let res = solve_equilibrium(&robot, &FieldSpec::uniform(b), &SolveOptions::default())
            .unwrap();
        let gram = immersion_gram_exact(&robot, &b, &res.theta).unwrap();
        // rank ≤ 2 for one magnet: the smallest singular value collapses
        assert!(gram.singular_values.z < 1e-10 * gram.singular_values.x);
        assert!(gram.jacobian < 1e-12 * gram.singular_values.x.powi(3));
    }

    #[test]
    fn exact_gram_is_symmetric_positive_semidefinite() {
        let template = two_magnet_template();
        let (_, robot) = robot_for_design(&template, &design(12e-3, [1.0, 1.0]), 24).unwrap();
        let bound = uniqueness_field_bound(&robot);
        let mut rng = StdRng::seed_from_u64(3);
        for _ in 0..10 {
            let b = 0.5
                * bound
                * Vector3::from_fn(|_, _| rng.gen_range(-1.0..1.0)).normalize();
            let res = solve_equilibrium(&robot, &FieldSpec::uniform(b), &SolveOptions::default())
                .unwrap();
            let gram = immersion_gram_exact(&robot, &b, &res.theta).unwrap();
            assert!((gram.matrix - gram.matrix.transpose()).norm() <= 1e-12 * gram.matrix.norm());
            let eig = gram.matrix.symmetric_eigen();
            assert!(eig.eigenvalues.iter().all(|l| *l > -1e-12 * gram.matrix.norm()));
        }
    }

    #[test]
    fn elastic_gram_approaches_exact_as_fields_weaken() {
        let template = two_magnet_template();
        let (_, robot) = robot_for_design(&template, &design(12e-3, [1.0, 1.0]), 24).unwrap();
        let bound = uniqueness_field_bound(&robot);
        let dir = (Vector3::z() + Vector3::x()).normalize();
        let mut last_gap = f64::INFINITY;
        for frac in [0.5, 0.25, 0.125] {
            let b = frac * bound * dir;
            let field = FieldSpec::uniform(b);
            let res = solve_equilibrium(&robot, &field, &SolveOptions::default()).unwrap();
            let exact = immersion_gram_exact(&robot, &b, &res.theta).unwrap();
            let elastic = immersion_gram_elastic(&robot, &res.theta);
            let gap = (exact.jacobian.powi(2) - elastic.jacobian.powi(2)).abs();
            assert!(gap <= weak_field_gap_bound(&robot, &field));
            assert!(gap < last_gap);
            last_gap = gap;
        }
    }

    #[test]
    fn structural_gram_matches_planar_closed_form_factors() {
        // at a slightly bent two-magnet state the structural volume density
        // reduces to M³ √(Λ₀ (Λ₁−Λ₀)(3Λ₀+Λ₁)) · |relative angle| (aligned)
        // and M³ √Λ₀ (Λ₁−Λ₀) · |relative angle| (opposing)
        let lambda_m = LambdaM::from_design(&[0.4, 1.0], 10, 2.0e6, 1e-12);
        let l0 = lambda_m.matrix[(0, 0)];
        let l1 = lambda_m.matrix[(1, 1)];
        let m = 1e-2;
        let t = reference_tangent();
        for (sign, expected) in [
            (1.0, (l0 * (l1 - l0) * (3.0 * l0 + l1)).sqrt()),
            (-1.0, l0.sqrt() * (l1 - l0)),
        ] {
            let psi = 1e-4;
            let m0 = m * t;
            let m1 = sign * m * (exp_so3(&(psi * Vector3::y())) * t);
            let gram = immersion_gram_approx(&lambda_m, &[m0, m1]);
            let predicted = m.powi(3) * expected * psi;
            assert_relative_eq!(gram.jacobian, predicted, max_relative = 1e-3);
        }
    }

    #[test]
    fn boundary_placements_collapse_the_structural_volume() {
        let l = 31.2e-3;
        let quad = QuadratureSpec {
            radial: 4,
            angular: 8,
        };
        let domain = ActuationDomain::Disk {
            radius: 1e-3,
            plane: disk(),
        };
        let boundary =
            structural_induced_volume(&[0.0, l], &[1.0, 1.0], 1e-2, 5e6, 0.7854e-12, 11, &domain, &quad);
        let equidistant =
            structural_induced_volume(&[l / 2.0, l], &[1.0, 1.0], 1e-2, 5e6, 0.7854e-12, 11, &domain, &quad);
        assert!(equidistant > 0.0);
        assert!(boundary <= 1e-8 * equidistant, "{boundary} vs {equidistant}");
        // coincident distal pair behaves the same way
        let merged =
            structural_induced_volume(&[l, l], &[1.0, -1.0], 1e-2, 5e6, 0.7854e-12, 11, &domain, &quad);
        assert!(merged <= 1e-8 * equidistant);
    }

    #[test]
    fn isotropic_and_rank_deficient_distortion_examples() {
        assert_relative_eq!(
            distortion_of_singular_values(&[2.0, 2.0]),
            DISTORTION_FLOOR,
            epsilon = 1e-15
        );
        // Ĝ = diag(1, 0): deviation ½
        assert_relative_eq!(
            distortion_of_singular_values(&[1.0, 0.0]),
            DISTORTION_FLOOR + 0.5,
            epsilon = 1e-12
        );
    }

    #[test]
    fn unit_density_objective_equals_induced_volume() {
        let template = two_magnet_template();
        let (_, robot) = robot_for_design(&template, &design(12e-3, [1.0, 1.0]), 24).unwrap();
        let bound = uniqueness_field_bound(&robot);
        let domain = ActuationDomain::Disk {
            radius: 0.3 * bound,
            plane: disk(),
        };
        let opts = ObjectiveOptions {
            quadrature: QuadratureSpec {
                radial: 3,
                angular: 8,
            },
            n_joints: 24,
            allow_uncertified: false,
        };
        let obj = global_objective(
            &template,
            &design(12e-3, [1.0, 1.0]),
            &PerformanceIndex::Unit,
            &domain,
            &opts,
        )
        .unwrap();
        assert_relative_eq!(obj.value, obj.volume, max_relative = 1e-14);
        assert!(obj.value > 0.0);
    }

    #[test]
    fn objective_rejects_uncertified_radii() {
        let template = two_magnet_template();
        let d = design(12e-3, [1.0, 1.0]);
        let (_, robot) = robot_for_design(&template, &d, 24).unwrap();
        let domain = ActuationDomain::Disk {
            radius: 2.0 * uniqueness_field_bound(&robot),
            plane: disk(),
        };
        let err = global_objective(
            &template,
            &d,
            &PerformanceIndex::Unit,
            &domain,
            &ObjectiveOptions {
                n_joints: 24,
                ..Default::default()
            },
        );
        assert!(matches!(err, Err(PerfError::FieldBound { .. })));
    }

    #[test]
    fn quadrature_self_convergence_below_half_percent() {
        let template = two_magnet_template();
        let d = design(12e-3, [1.0, 1.0]);
        let (_, robot) = robot_for_design(&template, &d, 24).unwrap();
        let domain = ActuationDomain::Disk {
            radius: 0.5 * uniqueness_field_bound(&robot),
            plane: disk(),
        };
        let run = |radial, angular| {
            global_objective(
                &template,
                &d,
                &PerformanceIndex::Manipulability,
                &domain,
                &ObjectiveOptions {
                    quadrature: QuadratureSpec { radial, angular },
                    n_joints: 24,
                    allow_uncertified: false,
                },
            )
            .unwrap()
            .value
        };
        let coarse = run(6, 12);
        let fine = run(12, 24);
        assert!(
            (fine - coarse).abs() / fine.abs() < 5e-3,
            "coarse {coarse} fine {fine}"
        );
    }

    #[test]
    fn design_gradient_matches_full_finite_differences() {
        let template = two_magnet_template();
        let total = template.total_length();
        let (_, robot) = robot_for_design(&template, &design(0.3 * total, [1.0, 1.0]), 24).unwrap();
        let bound = uniqueness_field_bound(&robot);
        // weak field: the structural trace model is exact only as B → 0
        let domain = ActuationDomain::Disk {
            radius: 0.001 * bound,
            plane: disk(),
        };
        let opts = ObjectiveOptions {
            quadrature: QuadratureSpec {
                radial: 4,
                angular: 8,
            },
            n_joints: 24,
            allow_uncertified: false,
        };
        let index = PerformanceIndex::Manipulability;
        for xf in [0.22, 0.45] {
            let d = design(xf * total, [1.0, 1.0]);
            let grad = objective_design_gradient(&template, &d, &index, &domain, &opts).unwrap();
            let h = 1e-4 * total;
            let mut dp = d.clone();
            dp.free_positions[0] += h;
            let mut dm = d.clone();
            dm.free_positions[0] -= h;
            let zp = global_objective(&template, &dp, &index, &domain, &opts).unwrap().value;
            let zm = global_objective(&template, &dm, &index, &domain, &opts).unwrap().value;
            let fd = (zp - zm) / (2.0 * h);
            let rel = (grad[0] - fd).abs() / fd.abs();
            assert!(rel < 1e-3, "x/L={xf}: analytic {} fd {fd} rel {rel}", grad[0]);
        }
    }

    #[test]
    fn workspace_sweep_degenerates_to_a_point_at_zero_field() {
        let robot = discretize(&reference_spec(), 7).unwrap();
        let sweep = workspace_sweep(&robot, &disk(), &[0.0], 5, (0.0, std::f64::consts::PI));
        assert_eq!(sweep.normalized_area, 0.0);
        for (v, t) in sweep.points {
            assert!(v.abs() < 1e-12);
            assert_relative_eq!(t, 33e-3, epsilon = 1e-12);
        }
    }

    #[test]
    fn workspace_is_mirror_symmetric_for_symmetric_grids() {
        let robot = discretize(&reference_spec(), 7).unwrap();
        let b = 3e-3;
        let sweep = workspace_sweep(
            &robot,
            &disk(),
            &[b],
            9,
            (-std::f64::consts::FRAC_PI_2, std::f64::consts::FRAC_PI_2),
        );
        assert!(sweep.failures.is_empty());
        let pts = &sweep.points;
        let n = pts.len();
        for i in 0..n {
            let (v1, t1) = pts[i];
            let (v2, t2) = pts[n - 1 - i];
            assert_relative_eq!(v1, -v2, epsilon = 1e-9);
            assert_relative_eq!(t1, t2, epsilon = 1e-9);
        }
    }
}
