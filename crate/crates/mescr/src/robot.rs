//! Physical robot description and its discretization into an elastic
//! spherical-joint chain.
//!
//! The rod runs along the reference tangent `t̄ = +z`. Magnet `k` occupies
//! the arc interval `[L_k − L_m, L_k]` where `L_k` is its cumulative design
//! position; the distal magnet is pinned at `L_k = L` (flush with the tip).
//! Each magnet is one rigid rod with a joint at its proximal face carrying
//! the magnet material stiffness; flexible segments between magnets are
//! subdivided uniformly. Joint `i` owns the Voronoi length
//! `ℓ_i = (l_{i−1} + l_i)/2` (with `l_{−1} = 0`), and its elastic stiffness
//! block is `diag(EI/ℓ, EI/ℓ, 2GI/ℓ)` over the (x, y, z) rotation
//! components — bending about x and y, torsion about z — with
//! `G = E / (2(1 + ρ))`.

use nalgebra::{DMatrix, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::energetics::FieldSpec;

/// Reference tangent direction of the straight robot.
pub fn reference_tangent() -> Vector3<f64> {
    Vector3::z()
}

#[derive(Debug, Error)]
pub enum RobotError {
    #[error("{0}")]
    BadParameter(String),
    #[error("magnet positions must be strictly increasing, got {0:?}")]
    NonIncreasingPositions(Vec<f64>),
    #[error("magnet {index} (ending at {end} m) overlaps its neighbour or extends past the rod")]
    MagnetOverlap { index: usize, end: f64 },
    #[error("need at least {needed} joints, got {got}")]
    TooFewJoints { needed: usize, got: usize },
    #[error("operation requires axially magnetized moments (m̄ ∥ t̄)")]
    NonAxialMoments,
}

/// Physical description of a multi-magnet soft continuum robot.
///
/// All quantities are SI. `magnet_positions` are cumulative arc lengths of
/// the magnets' distal faces, strictly increasing, the last equal to the
/// total length `flexible_length + n_magnets · magnet_length`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RobotSpec {
    pub flexible_length: f64,
    pub magnet_length: f64,
    pub area_inertia: f64,
    pub youngs_flexible: f64,
    pub youngs_magnet: f64,
    pub poisson_flexible: f64,
    pub poisson_magnet: f64,
    pub dipole_modulus: f64,
    pub magnet_positions: Vec<f64>,
    pub magnet_signs: Vec<f64>,
}

impl RobotSpec {
    /// Total arc length of the rod.
    pub fn total_length(&self) -> f64 {
        self.flexible_length + self.magnet_length * self.magnet_positions.len() as f64
    }

    pub fn n_magnets(&self) -> usize {
        self.magnet_positions.len()
    }

    pub fn validate(&self) -> Result<(), RobotError> {
        let bad = |msg: String| Err(RobotError::BadParameter(msg));
        if !(self.flexible_length > 0.0) {
            return bad(format!("flexible_length must be > 0, got {}", self.flexible_length));
        }
        if !(self.magnet_length > 0.0) {
            return bad(format!("magnet_length must be > 0, got {}", self.magnet_length));
        }
        if !(self.area_inertia > 0.0) {
            return bad(format!("area_inertia must be > 0, got {}", self.area_inertia));
        }
        if !(self.youngs_flexible > 0.0 && self.youngs_magnet > 0.0) {
            return bad("Young's moduli must be > 0".into());
        }
        for (name, rho) in [
            ("poisson_flexible", self.poisson_flexible),
            ("poisson_magnet", self.poisson_magnet),
        ] {
            if !(rho > 0.0 && rho <= 0.5) {
                return bad(format!("{name} must lie in (0, 0.5], got {rho}"));
            }
        }
        if !(self.dipole_modulus > 0.0) {
            return bad(format!("dipole_modulus must be > 0, got {}", self.dipole_modulus));
        }
        if self.magnet_positions.is_empty() {
            return bad("at least one magnet is required".into());
        }
        if self.magnet_signs.len() != self.magnet_positions.len() {
            return bad(format!(
                "{} magnet signs for {} magnets",
                self.magnet_signs.len(),
                self.magnet_positions.len()
            ));
        }
        if self.magnet_signs.iter().any(|s| *s != 1.0 && *s != -1.0) {
            return bad(format!("magnet signs must be ±1, got {:?}", self.magnet_signs));
        }
        if self
            .magnet_positions
            .windows(2)
            .any(|w| w[1] <= w[0])
        {
            return Err(RobotError::NonIncreasingPositions(self.magnet_positions.clone()));
        }
        let total = self.total_length();
        let last = *self.magnet_positions.last().unwrap();
        if (last - total).abs() > 1e-9 * total {
            return bad(format!(
                "last magnet must end at the total length {total}, got {last}"
            ));
        }
        // each magnet interval [L_k - L_m, L_k] must stay inside the rod and
        // clear of its predecessor
        let mut prev_end = 0.0;
        for (index, &end) in self.magnet_positions.iter().enumerate() {
            if end - self.magnet_length < prev_end - 1e-12 {
                return Err(RobotError::MagnetOverlap { index, end });
            }
            prev_end = end;
        }
        Ok(())
    }
}

/// The robot discretized into `N` rigid rods coupled by elastic joints.
#[derive(Debug, Clone)]
pub struct DiscretizedRobot {
    /// Rod lengths `l_i`, one per joint; they sum to the total length.
    pub rod_lengths: Vec<f64>,
    /// Voronoi lengths `ℓ_i = (l_{i−1} + l_i)/2`.
    pub voronoi_lengths: Vec<f64>,
    /// Per-joint stiffness block diagonals `(EI/ℓ, EI/ℓ, 2GI/ℓ)`.
    pub stiffness: Vec<Vector3<f64>>,
    /// Joint indices carrying magnets, strictly increasing.
    pub magnet_joints: Vec<usize>,
    /// Reference dipole moments `m̄_k` (magnitude = dipole modulus).
    pub magnet_moments: Vec<Vector3<f64>>,
    /// Straight-state joint positions `p̄_i`.
    pub reference_positions: Vec<Vector3<f64>>,
    /// Per-joint Young's modulus (used by reduced stiffness formulas).
    pub youngs: Vec<f64>,
    /// Cross-section area moment of inertia.
    pub area_inertia: f64,
}

impl DiscretizedRobot {
    pub fn n_joints(&self) -> usize {
        self.rod_lengths.len()
    }

    pub fn n_magnets(&self) -> usize {
        self.magnet_joints.len()
    }

    pub fn dof(&self) -> usize {
        3 * self.n_joints()
    }

    pub fn total_length(&self) -> f64 {
        self.rod_lengths.iter().sum()
    }

    /// Smallest stiffness eigenvalue, exact from the diagonal blocks.
    pub fn lambda_min(&self) -> f64 {
        self.stiffness
            .iter()
            .map(|s| s.min())
            .fold(f64::INFINITY, f64::min)
    }

    /// Largest stiffness eigenvalue.
    pub fn lambda_max(&self) -> f64 {
        self.stiffness.iter().map(|s| s.max()).fold(0.0, f64::max)
    }

    /// Bending stiffness of joint `i` — the largest eigenvalue of its
    /// block for any Poisson ratio in (0, 0.5].
    pub fn bending_stiffness(&self, joint: usize) -> f64 {
        self.stiffness[joint].x
    }

    /// Dense stiffness matrix Λ (block diagonal, 3N×3N).
    pub fn stiffness_matrix(&self) -> DMatrix<f64> {
        let n = self.dof();
        let mut out = DMatrix::zeros(n, n);
        for (i, s) in self.stiffness.iter().enumerate() {
            for c in 0..3 {
                out[(3 * i + c, 3 * i + c)] = s[c];
            }
        }
        out
    }

    /// Elastic restoring torques `Λ θ` without forming the dense matrix.
    pub fn stiffness_apply(&self, theta: &nalgebra::DVector<f64>) -> nalgebra::DVector<f64> {
        let mut out = theta.clone();
        for (i, s) in self.stiffness.iter().enumerate() {
            for c in 0..3 {
                out[3 * i + c] *= s[c];
            }
        }
        out
    }

    /// `Λ^{-1} v`.
    pub fn stiffness_solve(&self, v: &nalgebra::DVector<f64>) -> nalgebra::DVector<f64> {
        let mut out = v.clone();
        for (i, s) in self.stiffness.iter().enumerate() {
            for c in 0..3 {
                out[3 * i + c] /= s[c];
            }
        }
        out
    }

    /// True when every magnet moment is aligned with ±t̄.
    pub fn has_axial_moments(&self) -> bool {
        let t = reference_tangent();
        self.magnet_moments
            .iter()
            .all(|m| m.cross(&t).norm() <= 1e-12 * m.norm())
    }

    /// One-based joint counts `k̃ = index + 1` of the magnet joints; these
    /// count how many joints a magnet torques and enter every bound below.
    fn magnet_joint_counts(&self) -> impl Iterator<Item = f64> + '_ {
        self.magnet_joints.iter().map(|&k| (k + 1) as f64)
    }
}

/// Discretize a robot with `n_joints` joints, allocating flexible joints to
/// the segments between magnets proportionally to their lengths. Magnet
/// joints land exactly on the magnets' proximal faces, so no position
/// snapping is involved.
pub fn discretize(spec: &RobotSpec, n_joints: usize) -> Result<DiscretizedRobot, RobotError> {
    spec.validate()?;
    let n_m = spec.n_magnets();
    let segments = flexible_segments(spec);
    let positive = segments.iter().filter(|&&s| s > 1e-12).count();
    let needed = (n_m + positive).max(n_m + 1);
    if n_joints < needed {
        return Err(RobotError::TooFewJoints {
            needed,
            got: n_joints,
        });
    }
    let counts = proportional_counts(&segments, n_joints - n_m);
    build(spec, &counts)
}

/// Discretize with a fixed number of flexible joints per segment. Geometry
/// then varies smoothly with the magnet positions, which the design
/// optimization relies on.
pub fn discretize_with_counts(
    spec: &RobotSpec,
    counts: &[usize],
) -> Result<DiscretizedRobot, RobotError> {
    spec.validate()?;
    if counts.len() != spec.n_magnets() {
        return Err(RobotError::BadParameter(format!(
            "{} segment counts for {} magnets",
            counts.len(),
            spec.n_magnets()
        )));
    }
    let segments = flexible_segments(spec);
    for (q, (&c, &s)) in counts.iter().zip(&segments).enumerate() {
        if s > 1e-12 && c == 0 {
            return Err(RobotError::BadParameter(format!(
                "segment {q} has positive length {s} but zero joints"
            )));
        }
    }
    build(spec, counts)
}

/// Equal flexible-joint allocation used by the design studies.
pub fn equal_counts(n_magnets: usize, n_joints: usize) -> Vec<usize> {
    let nf = n_joints.saturating_sub(n_magnets);
    let per = nf / n_magnets;
    let extra = nf - per * n_magnets;
    (0..n_magnets)
        .map(|q| per + usize::from(q < extra))
        .collect()
}

/// Lengths of the flexible segments preceding each magnet.
fn flexible_segments(spec: &RobotSpec) -> Vec<f64> {
    let mut prev = 0.0;
    spec.magnet_positions
        .iter()
        .map(|&end| {
            let seg = (end - spec.magnet_length) - prev;
            prev = end;
            seg.max(0.0)
        })
        .collect()
}

/// Largest-remainder allocation of `total` joints proportional to segment
/// lengths; every positive segment receives at least one.
fn proportional_counts(segments: &[f64], total: usize) -> Vec<usize> {
    let sum: f64 = segments.iter().sum();
    let mut counts: Vec<usize> = segments
        .iter()
        .map(|&s| if s > 1e-12 { 1 } else { 0 })
        .collect();
    let base: usize = counts.iter().sum();
    let mut left = total.saturating_sub(base);
    if sum <= 0.0 || left == 0 {
        return counts;
    }
    let mut frac: Vec<(f64, usize)> = Vec::with_capacity(segments.len());
    for (q, &s) in segments.iter().enumerate() {
        if s <= 1e-12 {
            continue;
        }
        let want = s / sum * left as f64;
        let add = want.floor() as usize;
        counts[q] += add;
        left -= add;
        frac.push((want - want.floor(), q));
    }
    frac.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
    for &(_, q) in frac.iter().take(left) {
        counts[q] += 1;
    }
    counts
}

fn build(spec: &RobotSpec, counts: &[usize]) -> Result<DiscretizedRobot, RobotError> {
    let t = reference_tangent();
    let segments = flexible_segments(spec);
    let mut rods = Vec::new();
    let mut youngs = Vec::new();
    let mut poissons = Vec::new();
    let mut magnet_joints = Vec::new();
    let mut magnet_moments = Vec::new();
    for (q, (&seg, &c)) in segments.iter().zip(counts).enumerate() {
        if c > 0 && seg > 0.0 {
            for _ in 0..c {
                rods.push(seg / c as f64);
                youngs.push(spec.youngs_flexible);
                poissons.push(spec.poisson_flexible);
            }
        }
        magnet_joints.push(rods.len());
        magnet_moments.push(spec.magnet_signs[q] * spec.dipole_modulus * t);
        rods.push(spec.magnet_length);
        youngs.push(spec.youngs_magnet);
        poissons.push(spec.poisson_magnet);
    }
    let n = rods.len();
    let mut voronoi = Vec::with_capacity(n);
    for i in 0..n {
        let prev = if i == 0 { 0.0 } else { rods[i - 1] };
        voronoi.push((prev + rods[i]) / 2.0);
    }
    // Joint stiffness from the series compliance of the two half-rods in
    // the Voronoi cell. Homogeneous cells reduce exactly to EI/ℓ and
    // 2GI/ℓ; mixed flexible/magnet boundary cells keep the soft half's
    // true compliance instead of rigidifying it, which preserves the total
    // flexible compliance at every discretization.
    let mut stiffness = Vec::with_capacity(n);
    for i in 0..n {
        let mut c_bend = 0.0;
        let mut c_twist = 0.0;
        let mut add_half = |len: f64, e: f64, rho: f64| {
            let g = e / (2.0 * (1.0 + rho));
            c_bend += len / (e * spec.area_inertia);
            c_twist += len / (2.0 * g * spec.area_inertia);
        };
        if i > 0 {
            add_half(rods[i - 1] / 2.0, youngs[i - 1], poissons[i - 1]);
        }
        add_half(rods[i] / 2.0, youngs[i], poissons[i]);
        stiffness.push(Vector3::new(1.0 / c_bend, 1.0 / c_bend, 1.0 / c_twist));
    }
    let mut reference_positions = Vec::with_capacity(n);
    let mut s = 0.0;
    for &l in &rods {
        reference_positions.push(s * t);
        s += l;
    }
    Ok(DiscretizedRobot {
        rod_lengths: rods,
        voronoi_lengths: voronoi,
        stiffness,
        magnet_joints,
        magnet_moments,
        reference_positions,
        youngs,
        area_inertia: spec.area_inertia,
    })
}

/// Field strength below which the magneto-elastic equilibrium is provably
/// unique and globally attractive: `(π/4)·λ_min(Λ) / Σ_k k̃ M_k`.
pub fn uniqueness_field_bound(robot: &DiscretizedRobot) -> f64 {
    let denom: f64 = robot
        .magnet_joint_counts()
        .zip(&robot.magnet_moments)
        .map(|(k, m)| k * m.norm())
        .sum();
    std::f64::consts::FRAC_PI_4 * robot.lambda_min() / denom
}

/// Field strength below which axially magnetized robots stay free of
/// material twist: `√6·λ_min(Λ) / Σ_k M_k`.
pub fn twist_free_field_bound(robot: &DiscretizedRobot) -> f64 {
    let denom: f64 = robot.magnet_moments.iter().map(|m| m.norm()).sum();
    6.0f64.sqrt() * robot.lambda_min() / denom
}

/// Lipschitz constant of the generalized magnetic torque θ ↦ M(θ)b:
/// `𝓛 = Σ_k (4 k̃ / π) M_k B_k`.
pub fn lipschitz_constant(robot: &DiscretizedRobot, field: &FieldSpec) -> f64 {
    let mags = field.magnitudes(robot.n_magnets());
    robot
        .magnet_joint_counts()
        .zip(&robot.magnet_moments)
        .zip(&mags)
        .map(|((k, m), b)| 4.0 * k / std::f64::consts::PI * m.norm() * b)
        .sum()
}

/// Norm bounds on the torque matrix and the generalized magnetic torque.
#[derive(Debug, Clone)]
pub struct TorqueBounds {
    /// Per-joint torque bounds `𝓜_i = Σ_{k ≥ i} M_k B_k`.
    pub per_joint: Vec<f64>,
    /// `𝓜 = sqrt(Σ_i 𝓜_i²)`, bounding `‖M(θ) b‖` for every θ.
    pub torque: f64,
    /// `𝓜₀ = sqrt(N_m k̃_last) · max_k M_k`, bounding `‖M(θ)‖`.
    pub matrix: f64,
}

pub fn torque_bounds(robot: &DiscretizedRobot, field: &FieldSpec) -> TorqueBounds {
    let mags = field.magnitudes(robot.n_magnets());
    let n = robot.n_joints();
    let per_joint: Vec<f64> = (0..n)
        .map(|i| {
            robot
                .magnet_joints
                .iter()
                .zip(&robot.magnet_moments)
                .zip(&mags)
                .filter(|((&k, _), _)| k >= i)
                .map(|((_, m), b)| m.norm() * b)
                .sum()
        })
        .collect();
    let torque = per_joint.iter().map(|x| x * x).sum::<f64>().sqrt();
    let k_last = (*robot.magnet_joints.last().unwrap() + 1) as f64;
    let max_m = robot
        .magnet_moments
        .iter()
        .map(|m| m.norm())
        .fold(0.0, f64::max);
    let matrix = (robot.n_magnets() as f64 * k_last).sqrt() * max_m;
    TorqueBounds {
        per_joint,
        torque,
        matrix,
    }
}

/// Radius `𝓜 / λ_min(Λ)` of the ball that contains every equilibrium.
pub fn equilibrium_norm_bound(robot: &DiscretizedRobot, field: &FieldSpec) -> f64 {
    torque_bounds(robot, field).torque / robot.lambda_min()
}

/// The Table-style reference robot used across tests and examples: a 30 mm
/// flexible rod with one 3 mm magnet at the distal end.
pub fn reference_spec() -> RobotSpec {
    RobotSpec {
        flexible_length: 30e-3,
        magnet_length: 3e-3,
        area_inertia: 0.7854e-12,
        youngs_flexible: 5e6,
        youngs_magnet: 160e9,
        poisson_flexible: 0.49,
        poisson_magnet: 0.3,
        dipole_modulus: 1e-2,
        magnet_positions: vec![33e-3],
        magnet_signs: vec![1.0],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn reference_robot_seven_joints() {
        let spec = reference_spec();
        let robot = discretize(&spec, 7).unwrap();
        assert_eq!(robot.n_joints(), 7);
        assert_relative_eq!(robot.total_length(), 33e-3, epsilon = 1e-15);
        assert_eq!(robot.magnet_joints, vec![6]);
        // six 5 mm flexible rods then the 3 mm magnet
        for i in 0..6 {
            assert_relative_eq!(robot.rod_lengths[i], 5e-3, epsilon = 1e-15);
        }
        assert_relative_eq!(robot.rod_lengths[6], 3e-3, epsilon = 1e-15);
        // flexible joints carry E_f I / ℓ bending stiffness
        let bend = 5e6 * 0.7854e-12 / 5e-3;
        assert_relative_eq!(robot.stiffness[1].x, bend, epsilon = 1e-12);
        // the magnet joint's cell holds 2.5 mm of flexible rod in series
        // with the near-rigid magnet half
        let expected = 1.0 / (2.5e-3 / (5e6 * 0.7854e-12) + 1.5e-3 / (160e9 * 0.7854e-12));
        assert_relative_eq!(robot.stiffness[6].x, expected, max_relative = 1e-12);
    }

    #[test]
    fn voronoi_lengths_of_two_rod_chain() {
        let spec = RobotSpec {
            magnet_positions: vec![33e-3],
            ..reference_spec()
        };
        let robot = discretize(&spec, 2).unwrap();
        assert_eq!(robot.n_joints(), 2);
        let l0 = robot.rod_lengths[0];
        let l1 = robot.rod_lengths[1];
        assert_relative_eq!(robot.voronoi_lengths[0], l0 / 2.0, epsilon = 1e-15);
        assert_relative_eq!(robot.voronoi_lengths[1], (l0 + l1) / 2.0, epsilon = 1e-15);
    }

    #[test]
    fn fine_discretization_keeps_total_length() {
        let robot = discretize(&reference_spec(), 200).unwrap();
        assert_eq!(robot.n_joints(), 200);
        assert_relative_eq!(robot.total_length(), 33e-3, epsilon = 1e-12);
    }

    #[test]
    fn rejects_too_few_joints() {
        assert!(matches!(
            discretize(&reference_spec(), 1),
            Err(RobotError::TooFewJoints { .. })
        ));
    }

    #[test]
    fn rejects_non_increasing_positions() {
        let mut spec = reference_spec();
        spec.flexible_length = 27e-3;
        spec.magnet_positions = vec![20e-3, 20e-3, 33e-3];
        spec.magnet_signs = vec![1.0, 1.0, 1.0];
        assert!(matches!(
            discretize(&spec, 12),
            Err(RobotError::NonIncreasingPositions(_))
        ));
    }

    #[test]
    fn rejects_overlapping_magnets() {
        let mut spec = reference_spec();
        spec.flexible_length = 27e-3;
        spec.magnet_positions = vec![31e-3, 32e-3, 36e-3];
        spec.magnet_signs = vec![1.0, 1.0, 1.0];
        assert!(matches!(
            discretize(&spec, 12),
            Err(RobotError::MagnetOverlap { .. })
        ));
    }

    #[test]
    fn rejects_poisson_ratio_out_of_range() {
        let mut spec = reference_spec();
        spec.poisson_flexible = 0.7;
        assert!(spec.validate().is_err());
    }

    #[test]
    fn lambda_min_matches_dense_eigenvalues() {
        let robot = discretize(&reference_spec(), 7).unwrap();
        let lam = robot.stiffness_matrix();
        let eig = lam.symmetric_eigen();
        let dense_min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        let dense_max = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
        assert_relative_eq!(robot.lambda_min(), dense_min, max_relative = 1e-12);
        assert_relative_eq!(robot.lambda_max(), dense_max, max_relative = 1e-12);
    }

    #[test]
    fn uniqueness_bound_halves_when_moments_double() {
        let robot = discretize(&reference_spec(), 7).unwrap();
        let mut doubled = robot.clone();
        for m in &mut doubled.magnet_moments {
            *m *= 2.0;
        }
        assert_relative_eq!(
            uniqueness_field_bound(&doubled),
            uniqueness_field_bound(&robot) / 2.0,
            max_relative = 1e-12
        );
    }

    #[test]
    fn reference_bounds_regression_values() {
        // frozen by direct evaluation of the bound formulas on the
        // 7-joint reference robot
        let robot = discretize(&reference_spec(), 7).unwrap();
        assert_relative_eq!(robot.lambda_min(), 5.271140939597316e-4, max_relative = 1e-12);
        assert_relative_eq!(
            uniqueness_field_bound(&robot),
            5.914206304241187e-3,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            twist_free_field_bound(&robot),
            0.12911605664308107,
            max_relative = 1e-12
        );
    }

    #[test]
    fn twist_free_bound_grows_with_refinement() {
        // the bound tracks λ_min(Λ), which scales with the inverse Voronoi
        // length of the softest joints
        let spec = reference_spec();
        let r1 = discretize(&spec, 25).unwrap();
        let r2 = discretize(&spec, 50).unwrap();
        let ratio = twist_free_field_bound(&r2) / twist_free_field_bound(&r1);
        let lam_ratio = r2.lambda_min() / r1.lambda_min();
        assert_relative_eq!(ratio, lam_ratio, max_relative = 1e-12);
        assert!(ratio > 1.8 && ratio < 2.3, "ratio {ratio}");
    }

    #[test]
    fn lipschitz_constant_is_linear_in_field() {
        let robot = discretize(&reference_spec(), 7).unwrap();
        let zero = lipschitz_constant(&robot, &FieldSpec::uniform(Vector3::zeros()));
        assert_eq!(zero, 0.0);
        let b = FieldSpec::uniform(Vector3::new(5e-3, 0.0, 0.0));
        // single magnet at joint 6 → k̃ = 7
        let expected = 4.0 * 7.0 / std::f64::consts::PI * 1e-2 * 5e-3;
        assert_relative_eq!(lipschitz_constant(&robot, &b), expected, max_relative = 1e-12);
    }

    #[test]
    fn torque_bound_field_independent_matrix_part() {
        let robot = discretize(&reference_spec(), 7).unwrap();
        let b0 = torque_bounds(&robot, &FieldSpec::uniform(Vector3::zeros()));
        let b1 = torque_bounds(&robot, &FieldSpec::uniform(Vector3::new(0.01, 0.0, 0.0)));
        assert_eq!(b0.torque, 0.0);
        assert_relative_eq!(b0.matrix, b1.matrix, max_relative = 1e-15);
        assert_relative_eq!(b1.torque, 7f64.sqrt() * 1e-2 * 0.01, max_relative = 1e-12);
    }
}
