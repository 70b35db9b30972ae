//! Independent verification oracles.
//!
//! Everything here is deliberately implemented through different routes
//! than the analytic code it checks: central finite differences, a
//! closed-form small-deflection beam, truncated matrix-exponential series,
//! power-iteration spectral norms, Monte-Carlo integration, and a
//! joint-count self-convergence study.

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::energetics::FieldSpec;
use crate::equilibrium::{solve_equilibrium, EquilibriumError, SolveOptions};
use crate::kinematics::centerline;
use crate::lie::{hat, log_so3};
use crate::perfgeom::{node_integrand, robot_for_design, ActuationDomain, DesignVariables,
    PerfError, PerformanceIndex};
use crate::robot::{discretize, RobotSpec};

/// Central-difference gradient of a scalar field. Panics with the offending
/// coordinate if the function returns a non-finite value.
pub fn fd_gradient<F: Fn(&DVector<f64>) -> f64>(
    f: F,
    x: &DVector<f64>,
    h: f64,
) -> DVector<f64> {
    assert!(h > 0.0);
    DVector::from_fn(x.len(), |i, _| {
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[i] += h;
        xm[i] -= h;
        let (fp, fm) = (f(&xp), f(&xm));
        assert!(
            fp.is_finite() && fm.is_finite(),
            "non-finite value at coordinate {i} (x_i = {})",
            x[i]
        );
        (fp - fm) / (2.0 * h)
    })
}

/// Central-difference Jacobian of a vector field.
pub fn fd_jacobian<F: Fn(&DVector<f64>) -> DVector<f64>>(
    f: F,
    x: &DVector<f64>,
    h: f64,
) -> DMatrix<f64> {
    assert!(h > 0.0);
    let m = f(x).len();
    let mut out = DMatrix::zeros(m, x.len());
    for i in 0..x.len() {
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[i] += h;
        xm[i] -= h;
        let (fp, fm) = (f(&xp), f(&xm));
        assert!(
            fp.iter().all(|v| v.is_finite()) && fm.iter().all(|v| v.is_finite()),
            "non-finite value at coordinate {i} (x_i = {})",
            x[i]
        );
        out.set_column(i, &((fp - fm) / (2.0 * h)));
    }
    out
}

/// Richardson-extrapolated gradient: combines steps `h` and `h/2` to cancel
/// the leading O(h²) error.
pub fn fd_gradient_richardson<F: Fn(&DVector<f64>) -> f64>(
    f: F,
    x: &DVector<f64>,
    h: f64,
) -> DVector<f64> {
    let coarse = fd_gradient(&f, x, h);
    let fine = fd_gradient(&f, x, h / 2.0);
    (4.0 * fine - coarse) / 3.0
}

/// Truncated power series of the matrix exponential on so(3).
pub fn series_exp_so3(v: &Vector3<f64>, terms: usize) -> Matrix3<f64> {
    let k = hat(v);
    let mut out = Matrix3::identity();
    let mut acc = Matrix3::identity();
    for n in 1..=terms {
        acc = acc * k / n as f64;
        out += acc;
    }
    out
}

/// Spectral norm by power iteration on `AᵀA` with a deterministic start.
pub fn spectral_norm(m: &DMatrix<f64>, iterations: usize) -> f64 {
    if m.ncols() == 0 || m.nrows() == 0 {
        return 0.0;
    }
    let mut v = DVector::from_fn(m.ncols(), |i, _| 1.0 + (i as f64 * 0.7).sin());
    v /= v.norm();
    let mut sigma = 0.0;
    for _ in 0..iterations {
        let w = m.transpose() * (m * &v);
        let n = w.norm();
        if n == 0.0 {
            return 0.0;
        }
        sigma = n.sqrt();
        v = w / n;
    }
    sigma
}

/// Tip deflection of a cantilever of length `l` under a constant end
/// moment: `(transverse, out_of_plane) = (τ l² / 2EI, 0)`. Valid in the
/// small-deflection regime (tip angle ≲ 0.3 rad); the caller enforces it.
pub fn euler_bernoulli_tip_deflection(
    l: f64,
    youngs: f64,
    inertia: f64,
    tip_torque: f64,
) -> (f64, f64) {
    (tip_torque * l * l / (2.0 * youngs * inertia), 0.0)
}

/// Tip rotation of the same cantilever, `τ l / EI`.
pub fn euler_bernoulli_tip_rotation(l: f64, youngs: f64, inertia: f64, tip_torque: f64) -> f64 {
    tip_torque * l / (youngs * inertia)
}

/// Joint-count self-convergence study of the equilibrium centerline.
#[derive(Debug, Clone)]
pub struct ConvergenceStudy {
    pub joint_counts: Vec<usize>,
    /// Centerline RMSE against the reference discretization \[m\].
    pub rmse: Vec<f64>,
    /// RMSE normalized by the total length.
    pub rmse_normalized: Vec<f64>,
    /// Distal position error \[m\].
    pub distal_position_error: Vec<f64>,
    /// Distal rotation error \[rad\].
    pub distal_rotation_error: Vec<f64>,
    /// Unweighted combined norm of the two distal errors.
    pub distal_combined_error: Vec<f64>,
    /// Log-log slope of normalized RMSE against the joint count.
    pub fitted_slope: f64,
}

/// Undeformed arc-length stations of a discretized robot (joints + tip).
fn arc_stations(rods: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(rods.len() + 1);
    let mut s = 0.0;
    out.push(0.0);
    for &l in rods {
        s += l;
        out.push(s);
    }
    out
}

/// Piecewise-linear interpolation of deformed points by undeformed arc
/// length.
fn interp_centerline(stations: &[f64], points: &[Vector3<f64>], s: f64) -> Vector3<f64> {
    debug_assert_eq!(stations.len(), points.len());
    if s <= stations[0] {
        return points[0];
    }
    let last = stations.len() - 1;
    if s >= stations[last] {
        return points[last];
    }
    let idx = stations.partition_point(|&a| a < s).max(1);
    let (s0, s1) = (stations[idx - 1], stations[idx]);
    let w = (s - s0) / (s1 - s0);
    points[idx - 1] * (1.0 - w) + points[idx] * w
}

pub fn convergence_study(
    spec: &RobotSpec,
    field: &FieldSpec,
    joint_counts: &[usize],
    reference_n: usize,
) -> Result<ConvergenceStudy, EquilibriumError> {
    assert!(
        joint_counts.iter().all(|&n| n < reference_n),
        "reference discretization must be finer than every study point"
    );
    let total = spec.total_length();
    let opts = SolveOptions::default();

    let solve_one = |n: usize| -> Result<(Vec<f64>, Vec<Vector3<f64>>, Matrix3<f64>), EquilibriumError> {
        let robot = discretize(spec, n)?;
        let res = solve_equilibrium(&robot, field, &opts)?;
        let pts = centerline(&robot, &res.theta);
        let pose = crate::kinematics::forward_kinematics(&robot, &res.theta);
        Ok((arc_stations(&robot.rod_lengths), pts, pose.r))
    };

    let (ref_stations, ref_points, ref_rot) = solve_one(reference_n)?;
    let mut rmse = Vec::new();
    let mut rmse_norm = Vec::new();
    let mut dpos = Vec::new();
    let mut drot = Vec::new();
    let mut dcomb = Vec::new();
    for &n in joint_counts {
        let (stations, points, rot) = solve_one(n)?;
        // compare the coarse joints against the reference curve sampled at
        // the same arc lengths; the fine reference interpolates with
        // negligible chord error
        let mut acc = 0.0;
        for (s, p) in stations.iter().zip(&points) {
            let q = interp_centerline(&ref_stations, &ref_points, *s);
            acc += (p - q).norm_squared();
        }
        let e = (acc / stations.len() as f64).sqrt();
        rmse.push(e);
        rmse_norm.push(e / total);
        let ep = (points.last().unwrap() - ref_points.last().unwrap()).norm();
        let er = log_so3(&(rot * ref_rot.transpose())).norm();
        dpos.push(ep);
        drot.push(er);
        dcomb.push((ep * ep + er * er).sqrt());
    }
    // least-squares slope of ln(rmse) against ln(N)
    let xs: Vec<f64> = joint_counts.iter().map(|&n| (n as f64).ln()).collect();
    let ys: Vec<f64> = rmse_norm.iter().map(|e| e.max(1e-300).ln()).collect();
    let n = xs.len() as f64;
    let sx: f64 = xs.iter().sum();
    let sy: f64 = ys.iter().sum();
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| x * y).sum();
    let fitted_slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    Ok(ConvergenceStudy {
        joint_counts: joint_counts.to_vec(),
        rmse,
        rmse_normalized: rmse_norm,
        distal_position_error: dpos,
        distal_rotation_error: drot,
        distal_combined_error: dcomb,
        fitted_slope,
    })
}

/// Monte-Carlo estimate of a [`crate::perfgeom::global_objective`]-style
/// integral with its standard error. Deterministic per seed.
#[derive(Debug, Clone, Copy)]
pub struct McEstimate {
    pub value: f64,
    pub stderr: f64,
    pub samples: usize,
}

pub fn mc_objective(
    template: &RobotSpec,
    design: &DesignVariables,
    index: &PerformanceIndex,
    domain: &ActuationDomain,
    n_samples: usize,
    seed: u64,
    n_joints: usize,
) -> Result<McEstimate, PerfError> {
    assert!(n_samples >= 100, "need at least 100 samples");
    let (_, robot) = robot_for_design(template, design, n_joints)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let volume = domain.measure();
    let mut sum = 0.0;
    let mut sumsq = 0.0;
    for _ in 0..n_samples {
        let b = domain.sample(&mut rng);
        let v = node_integrand(&robot, &b, index, domain)?;
        sum += v;
        sumsq += v * v;
    }
    let mean = sum / n_samples as f64;
    let var = (sumsq / n_samples as f64 - mean * mean).max(0.0);
    Ok(McEstimate {
        value: volume * mean,
        stderr: volume * (var / n_samples as f64).sqrt(),
        samples: n_samples,
    })
}

/// Uniform sample helper reused by domain sampling.
pub(crate) fn sample_unit_disk(rng: &mut impl Rng) -> (f64, f64) {
    let r = rng.gen::<f64>().sqrt();
    let a = rng.gen::<f64>() * 2.0 * std::f64::consts::PI;
    (r * a.cos(), r * a.sin())
}

pub(crate) fn sample_unit_ball(rng: &mut impl Rng) -> Vector3<f64> {
    let r = rng.gen::<f64>().cbrt();
    let z: f64 = rng.gen_range(-1.0..1.0);
    let a = rng.gen::<f64>() * 2.0 * std::f64::consts::PI;
    let s = (1.0 - z * z).sqrt();
    r * Vector3::new(s * a.cos(), s * a.sin(), z)
}
