//! Study drivers behind the `mescr` binary: each takes a parsed
//! configuration and an output directory and writes plot-ready tables plus
//! a JSON summary. Everything is deterministic for a fixed configuration
//! and seed.

use std::path::Path;

use nalgebra::{DMatrix, DVector, Vector3};
use serde_json::{json, Value};

use crate::config::{ConfigError, RunConfig};
use crate::energetics::{
    magnetic_energy, magnetic_gradient, magnetic_hessian, torque_matrix,
    torque_matrix_factorized, FieldSpec,
};
use crate::equilibrium::{
    actuation_jacobian, controllable_dof, material_twist, solve_equilibrium, EquilibriumError,
    PlaneSpec, SolveOptions,
};
use crate::kinematics::{centerline, space_jacobian, space_jacobian_twist};
use crate::oracles::{convergence_study, fd_gradient, fd_jacobian, spectral_norm};
use crate::optimizer::{
    exhaustive_landscape, full_design_search, OptimizeOptions,
};
use crate::perfgeom::{ActuationDomain, PerfError, QuadratureSpec};
use crate::report::{write_json, Csv, ReportError};
use crate::robot::{
    discretize, lipschitz_constant, reference_tangent, torque_bounds, uniqueness_field_bound,
    DiscretizedRobot,
};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CommandError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Solver(#[from] EquilibriumError),
    #[error(transparent)]
    Perf(#[from] PerfError),
    #[error(transparent)]
    Report(#[from] ReportError),
    #[error("validation failed: {failures} of {checks} checks")]
    Validation { failures: usize, checks: usize },
    #[error("{0}")]
    Other(String),
}

impl CommandError {
    /// Process exit code: 1 validation failure, 2 solver failure,
    /// 3 configuration error.
    pub fn exit_code(&self) -> i32 {
        match self {
            CommandError::Config(_) => 3,
            CommandError::Validation { .. } => 1,
            _ => 2,
        }
    }
}

fn robot_from(cfg: &RunConfig) -> Result<DiscretizedRobot, CommandError> {
    discretize(&cfg.robot.to_spec(), cfg.robot.n_joints)
        .map_err(|e| CommandError::Config(ConfigError::Invalid {
            field: "robot".into(),
            message: e.to_string(),
        }))
}

fn solve_options(cfg: &RunConfig) -> SolveOptions {
    SolveOptions {
        tol_scale: cfg.solver.tol_scale,
        max_iterations: cfg.solver.max_iterations,
        ..Default::default()
    }
}

/// Split the tip displacement into the in-plane transverse component
/// (along the field's transverse direction) and the out-of-plane one.
fn deflection_basis(field: &Vector3<f64>) -> (Vector3<f64>, Vector3<f64>) {
    let t = reference_tangent();
    let transverse = field - field.dot(&t) * t;
    let u = if transverse.norm() > 1e-12 * field.norm().max(1e-300) {
        transverse.normalize()
    } else {
        Vector3::x()
    };
    (u, t.cross(&u))
}

struct Check {
    name: &'static str,
    measured: f64,
    tolerance: f64,
}

impl Check {
    fn passed(&self) -> bool {
        self.measured <= self.tolerance
    }
}

/// Run the model-invariant suite on the configured robot: derivative
/// cross-checks, rank and bound laws, and solver certificates.
pub fn cmd_validate(cfg: &RunConfig, out_dir: &Path) -> Result<Value, CommandError> {
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};
    let robot = robot_from(cfg)?;
    let nm = robot.n_magnets();
    let mut rng = StdRng::seed_from_u64(cfg.optimize.seed);
    let mut checks: Vec<Check> = Vec::new();
    let field_mag = cfg.field.magnitude.0;
    let rand_theta = |rng: &mut StdRng, scale: f64| {
        DVector::from_fn(robot.dof(), |_, _| rng.gen_range(-scale..scale))
    };
    let rand_field = |rng: &mut StdRng| {
        FieldSpec::uniform(field_mag * Vector3::from_fn(|_, _| rng.gen_range(-1.0..1.0)).normalize())
    };

    // analytic gradient vs central differences
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let theta = rand_theta(&mut rng, 0.5);
        let field = rand_field(&mut rng);
        let g = magnetic_gradient(&robot, &field, &theta);
        let fd = fd_gradient(|x| magnetic_energy(&robot, &field, x), &theta, 1e-6);
        worst = worst.max((&g - &fd).norm() / g.norm().max(1e-15));
    }
    checks.push(Check {
        name: "magnetic gradient vs finite differences (relative)",
        measured: worst,
        tolerance: 1e-6,
    });

    // analytic Hessian vs differentiated gradient, plus symmetry
    let mut worst = 0.0f64;
    let mut worst_sym = 0.0f64;
    for _ in 0..10 {
        let theta = rand_theta(&mut rng, 0.5);
        let field = rand_field(&mut rng);
        let h = magnetic_hessian(&robot, &field, &theta);
        let fd = fd_jacobian(|x| magnetic_gradient(&robot, &field, x), &theta, 1e-6);
        worst = worst.max((&h - &fd).norm() / h.norm().max(1e-15));
        worst_sym = worst_sym.max((h.clone() - h.transpose()).norm() / h.norm().max(1e-300));
    }
    checks.push(Check {
        name: "magnetic Hessian vs finite differences (relative)",
        measured: worst,
        tolerance: 1e-5,
    });
    checks.push(Check {
        name: "Hessian symmetry defect (relative)",
        measured: worst_sym,
        tolerance: 1e-12,
    });

    // torque-matrix rank law and factorization agreement
    let mut rank_violations = 0.0f64;
    let mut worst_fact = 0.0f64;
    for _ in 0..10 {
        let theta = rand_theta(&mut rng, 0.5);
        let m = torque_matrix(&robot, &theta);
        let sv = m.clone().svd(false, false).singular_values;
        let rank = sv.iter().filter(|s| **s > 1e-8 * sv[0]).count();
        if rank != 2 * nm {
            rank_violations += 1.0;
        }
        let f = torque_matrix_factorized(&robot, &theta);
        worst_fact = worst_fact.max((m - f).norm());
    }
    checks.push(Check {
        name: "torque-matrix rank = 2 x magnet count (violations)",
        measured: rank_violations,
        tolerance: 0.0,
    });
    checks.push(Check {
        name: "direct vs factorized torque matrix (absolute)",
        measured: worst_fact,
        tolerance: 1e-12,
    });

    // norm bounds
    let field = FieldSpec::uniform(field_mag * Vector3::x());
    let bounds = torque_bounds(&robot, &field);
    let lip = lipschitz_constant(&robot, &field);
    let b = field.stacked(nm);
    let mut excess = 0.0f64;
    for _ in 0..20 {
        let theta = rand_theta(&mut rng, 0.6);
        let m = torque_matrix(&robot, &theta);
        excess = excess.max(spectral_norm(&m, 200) / bounds.matrix - 1.0);
        excess = excess.max((&m * &b).norm() / bounds.torque - 1.0);
        let s = magnetic_hessian(&robot, &field, &theta);
        excess = excess.max(spectral_norm(&s, 200) / lip - 1.0);
    }
    checks.push(Check {
        name: "norm bounds on M, Mb, Hessian (relative excess)",
        measured: excess.max(0.0),
        tolerance: 1e-9,
    });

    // stiffness eigenvalue from blocks vs dense
    let lam = robot.stiffness_matrix();
    let eig = lam.symmetric_eigen();
    let dense_min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    checks.push(Check {
        name: "block vs dense smallest stiffness eigenvalue (relative)",
        measured: (robot.lambda_min() - dense_min).abs() / dense_min,
        tolerance: 1e-12,
    });

    // chart Jacobian against finite differences of the log-pose
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let theta = rand_theta(&mut rng, 0.4);
        let jac = space_jacobian(&robot, &theta).map_err(|e| CommandError::Other(e.to_string()))?;
        let d = rand_theta(&mut rng, 1.0);
        let t = 1e-6;
        let hp = crate::kinematics::distal_pose_coords(&robot, &(&theta + t * &d))
            .map_err(|e| CommandError::Other(e.to_string()))?;
        let hm = crate::kinematics::distal_pose_coords(&robot, &(&theta - t * &d))
            .map_err(|e| CommandError::Other(e.to_string()))?;
        let fd = (hp - hm) / (2.0 * t);
        let jd = &jac * &d;
        worst = worst.max((jd.clone() - fd).norm() / jd.norm());
    }
    checks.push(Check {
        name: "space Jacobian vs log-pose finite differences (relative)",
        measured: worst,
        tolerance: 1e-5,
    });

    // solver: uniqueness certificate and equilibrium norm bound
    let bound = uniqueness_field_bound(&robot);
    let field = FieldSpec::uniform(0.9 * bound * Vector3::new(1.0, 0.3, 0.2).normalize());
    let res = solve_equilibrium(&robot, &field, &solve_options(cfg))?;
    let ball = crate::robot::equilibrium_norm_bound(&robot, &field);
    checks.push(Check {
        name: "equilibrium norm within the certified ball (excess)",
        measured: (res.theta.norm() - ball).max(0.0),
        tolerance: 1e-10,
    });

    let failures = checks.iter().filter(|c| !c.passed()).count();
    let report = json!({
        "robot": {
            "n_joints": robot.n_joints(),
            "n_magnets": nm,
            "lambda_min": robot.lambda_min(),
            "uniqueness_field_bound": bound,
            "twist_free_field_bound": crate::robot::twist_free_field_bound(&robot),
        },
        "checks": checks.iter().map(|c| json!({
            "name": c.name,
            "measured": c.measured,
            "tolerance": c.tolerance,
            "passed": c.passed(),
        })).collect::<Vec<_>>(),
        "failures": failures,
    });
    write_json(&out_dir.join("validate.json"), &report)?;
    for c in &checks {
        println!(
            "{} {} (measured {:.3e}, tolerance {:.3e})",
            if c.passed() { "PASS" } else { "FAIL" },
            c.name,
            c.measured,
            c.tolerance
        );
    }
    if failures > 0 {
        return Err(CommandError::Validation {
            failures,
            checks: checks.len(),
        });
    }
    Ok(report)
}

/// Solve one equilibrium and write the centerline plus a summary.
pub fn cmd_simulate(cfg: &RunConfig, out_dir: &Path) -> Result<Value, CommandError> {
    let robot = robot_from(cfg)?;
    let field = FieldSpec::uniform(cfg.field.vector());
    let res = solve_equilibrium(&robot, &field, &solve_options(cfg))?;
    let pts = centerline(&robot, &res.theta);
    let mut csv = Csv::new(&["s_index", "x", "y", "z"]);
    for (i, p) in pts.iter().enumerate() {
        csv.push(vec![i as f64, p.x, p.y, p.z]);
    }
    csv.write(&out_dir.join("centerline.csv"))?;
    let twist = material_twist(&robot, &res.theta);
    let summary = json!({
        "theta": res.theta.iter().cloned().collect::<Vec<f64>>(),
        "residual_norm": res.residual_norm,
        "iterations": res.iterations,
        "converged": res.converged,
        "uniqueness_certified": res.uniqueness_certified,
        "energy": res.energy,
        "material_twist": twist.iter().cloned().collect::<Vec<f64>>(),
        "tip": [pts[robot.n_joints()].x, pts[robot.n_joints()].y, pts[robot.n_joints()].z],
    });
    write_json(&out_dir.join("simulate.json"), &summary)?;
    Ok(summary)
}

/// Field-magnitude sweep of the normalized tip deflection.
pub fn cmd_sweep(cfg: &RunConfig, out_dir: &Path) -> Result<Value, CommandError> {
    let robot = robot_from(cfg)?;
    let l = robot.total_length();
    let dir = cfg.field.vector().normalize();
    let (u, n_out) = deflection_basis(&dir);
    let steps = cfg.field.sweep_steps.max(2);
    let mut csv = Csv::new(&["B", "delta_z_over_L", "delta_y_over_L"]);
    let opts = solve_options(cfg);
    let mut fields = Vec::with_capacity(steps);
    for k in 0..steps {
        let b = cfg.field.sweep_max.0 * k as f64 / (steps - 1) as f64;
        fields.push(FieldSpec::uniform(b * dir));
    }
    let results = crate::equilibrium::continuation_solve(&robot, &fields, &opts)?;
    let mut certified_until = 0.0;
    for (k, res) in results.iter().enumerate() {
        let b = cfg.field.sweep_max.0 * k as f64 / (steps - 1) as f64;
        if res.uniqueness_certified {
            certified_until = b;
        }
        let tip = centerline(&robot, &res.theta)[robot.n_joints()];
        csv.push(vec![b, tip.dot(&u) / l, tip.dot(&n_out) / l]);
    }
    csv.write(&out_dir.join("sweep.csv"))?;
    let summary = json!({
        "steps": steps,
        "sweep_max": cfg.field.sweep_max.0,
        "certified_until": certified_until,
        "uniqueness_field_bound": uniqueness_field_bound(&robot),
    });
    write_json(&out_dir.join("sweep.json"), &summary)?;
    Ok(summary)
}

/// Manipulator and actuation Jacobians with rank / DoF classification.
pub fn cmd_jacobian(cfg: &RunConfig, out_dir: &Path) -> Result<Value, CommandError> {
    let robot = robot_from(cfg)?;
    let field = FieldSpec::uniform(cfg.field.vector());
    let res = solve_equilibrium(&robot, &field, &solve_options(cfg))?;
    let j_theta = space_jacobian(&robot, &res.theta)
        .map_err(|e| CommandError::Other(e.to_string()))?;
    let j_twist = space_jacobian_twist(&robot, &res.theta);
    let jac = actuation_jacobian(&robot, &field, &res.theta)?;
    let (dof, class) = controllable_dof(&jac);
    let rank = |m: &DMatrix<f64>| {
        let sv = m.clone().svd(false, false).singular_values;
        sv.iter().filter(|s| **s > 1e-8 * sv[0]).count()
    };
    let to_rows = |m: &DMatrix<f64>| -> Vec<Vec<f64>> {
        (0..m.nrows())
            .map(|r| (0..m.ncols()).map(|c| m[(r, c)]).collect())
            .collect()
    };
    let ju = DMatrix::from_iterator(6, 3, jac.j_b_uniform.iter().cloned());
    let summary = json!({
        "space_jacobian": to_rows(&j_theta),
        "actuation_jacobian": to_rows(&jac.j_b),
        "actuation_jacobian_uniform": to_rows(&ju),
        "rank_space": rank(&j_twist),
        "rank_actuation": rank(&jac.j_b),
        "rank_actuation_uniform": rank(&ju),
        "controllable_dof": dof,
        "classification": class,
        "redundant_dof": (2 * robot.n_magnets()).saturating_sub(6),
    });
    write_json(&out_dir.join("jacobian.json"), &summary)?;
    Ok(summary)
}

/// Planar workspace sweep with normalized covered area.
pub fn cmd_workspace(cfg: &RunConfig, out_dir: &Path) -> Result<Value, CommandError> {
    let robot = robot_from(cfg)?;
    let plane = PlaneSpec::new(Vector3::x());
    let steps = cfg.field.sweep_steps.max(2);
    let mags: Vec<f64> = (0..steps)
        .map(|k| cfg.field.sweep_max.0 * k as f64 / (steps - 1) as f64)
        .collect();
    let sweep = crate::perfgeom::workspace_sweep(&robot, &plane, &mags, 25, (0.0, std::f64::consts::PI));
    let mut csv = Csv::new(&["v", "t"]);
    for (v, t) in &sweep.points {
        csv.push(vec![*v, *t]);
    }
    csv.write(&out_dir.join("workspace.csv"))?;
    let summary = json!({
        "normalized_area": sweep.normalized_area,
        "n_points": sweep.points.len(),
        "failures": sweep.failures.len(),
    });
    write_json(&out_dir.join("workspace.json"), &summary)?;
    Ok(summary)
}

/// Joint-count self-convergence study.
pub fn cmd_convergence(cfg: &RunConfig, out_dir: &Path) -> Result<Value, CommandError> {
    let spec = cfg.robot.to_spec();
    let field = FieldSpec::uniform(cfg.field.vector());
    let counts = [5usize, 7, 10, 20, 40, 80];
    let study = convergence_study(&spec, &field, &counts, 200)?;
    let mut csv = Csv::new(&["N", "rmse", "rmse_normalized", "distal_position_error", "distal_rotation_error", "distal_combined_error"]);
    for (i, &n) in study.joint_counts.iter().enumerate() {
        csv.push(vec![
            n as f64,
            study.rmse[i],
            study.rmse_normalized[i],
            study.distal_position_error[i],
            study.distal_rotation_error[i],
            study.distal_combined_error[i],
        ]);
    }
    csv.write(&out_dir.join("convergence.csv"))?;
    let summary = json!({
        "fitted_slope": study.fitted_slope,
        "joint_counts": study.joint_counts,
        "rmse_normalized": study.rmse_normalized,
    });
    write_json(&out_dir.join("convergence.json"), &summary)?;
    Ok(summary)
}

/// Placement optimization: gradient search per sign pattern plus an
/// exhaustive landscape for up to two free positions.
pub fn cmd_optimize(cfg: &RunConfig, out_dir: &Path) -> Result<Value, CommandError> {
    let template = cfg.robot.to_spec();
    let index = cfg.objective.performance_index()?;
    let min_spacing = cfg.min_spacing();
    let n_joints = cfg.objective.n_joints;
    // the domain radius certifies against the least favourable feasible
    // design: the bound is placement independent for fixed magnet count
    let probe = discretize(&template, n_joints.max(template.n_magnets() + 1))
        .map_err(PerfError::from)?;
    let radius = cfg.objective.b_max_fraction * uniqueness_field_bound(&probe);
    let domain = ActuationDomain::Disk {
        radius,
        plane: PlaneSpec::new(Vector3::x()),
    };
    let mut opts = OptimizeOptions::new(domain);
    opts.objective.n_joints = n_joints;
    opts.objective.quadrature = QuadratureSpec {
        radial: cfg.objective.radial_nodes,
        angular: cfg.objective.angular_nodes,
    };
    let search = full_design_search(
        &template,
        &index,
        min_spacing,
        cfg.optimize.restarts,
        cfg.optimize.seed,
        &opts,
    )?;
    write_json(&out_dir.join("optimize.json"), &search)?;
    // landscape for the best pattern when the grid is tractable
    if template.n_magnets() <= 3 {
        let scan = exhaustive_landscape(
            &template,
            &search.best.signs,
            &index,
            min_spacing,
            cfg.optimize.grid_resolution,
            &opts,
        )?;
        let n_free = template.n_magnets() - 1;
        let mut header: Vec<String> =
            (0..n_free).map(|q| format!("position{q}")).collect();
        header.push("value".into());
        header.push("normalized".into());
        let header_refs: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
        let mut csv = Csv::new(&header_refs);
        for p in &scan.landscape {
            let mut row = p.positions.clone();
            row.push(p.value);
            row.push(p.normalized);
            csv.push(row);
        }
        if !csv.rows.is_empty() {
            csv.write(&out_dir.join("landscape.csv"))?;
        }
    }
    let summary = json!({
        "best_positions": search.best.best_positions,
        "best_signs": search.best.signs,
        "best_value": search.best.best_value,
        "patterns": search.per_pattern.len(),
    });
    Ok(summary)
}

/// Column contracts of every CSV output, printed by `--schema`.
pub fn schema_text() -> &'static str {
    "centerline.csv: s_index, x, y, z
    joint positions then the distal tip, meters, straight reference along +z.
sweep.csv: B, delta_z_over_L, delta_y_over_L
    field magnitude [T]; tip deflection along the transverse in-plane
    direction and along the out-of-plane normal, both over total length.
workspace.csv: v, t
    tip coordinates [m] along the in-plane transverse direction v and the
    axis t for the swept field grid.
convergence.csv: N, rmse, rmse_normalized, distal_position_error,
    distal_rotation_error, distal_combined_error
    centerline RMSE [m and -] against the 200-joint reference; distal pose
    errors [m], [rad] and their unweighted combined norm.
landscape.csv: position, value, normalized
    free magnet position [m], objective value, value rescaled to [0, 1].
All floating-point values carry 17 significant digits."
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::reference_config_toml;

    fn tmpdir(tag: &str) -> std::path::PathBuf {
        let dir = std::env::temp_dir().join(format!("mescr_cmd_{tag}"));
        std::fs::create_dir_all(&dir).unwrap();
        dir
    }

    #[test]
    fn validate_passes_on_the_reference_robot() {
        let cfg = RunConfig::from_str(reference_config_toml()).unwrap();
        let dir = tmpdir("validate");
        let report = cmd_validate(&cfg, &dir).unwrap();
        assert_eq!(report["failures"], 0);
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn simulate_writes_a_straight_centerline_without_field() {
        let toml = reference_config_toml().replace("magnitude = \"5 mT\"", "magnitude = \"0 mT\"");
        let cfg = RunConfig::from_str(&toml).unwrap();
        let dir = tmpdir("simulate");
        let summary = cmd_simulate(&cfg, &dir).unwrap();
        assert_eq!(summary["converged"], true);
        let csv = Csv::read(&dir.join("centerline.csv")).unwrap();
        for row in &csv.rows {
            assert!(row[1].abs() < 1e-15 && row[2].abs() < 1e-15);
        }
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn sweep_produces_monotone_deflection() {
        let toml = reference_config_toml().replace("sweep_steps = 51", "sweep_steps = 11");
        let cfg = RunConfig::from_str(&toml).unwrap();
        let dir = tmpdir("sweep");
        cmd_sweep(&cfg, &dir).unwrap();
        let csv = Csv::read(&dir.join("sweep.csv")).unwrap();
        let mut last = -1.0;
        for row in &csv.rows {
            assert!(row[1] > last, "deflection not monotone");
            last = row[1];
        }
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn jacobian_reports_single_magnet_dof() {
        let cfg = RunConfig::from_str(reference_config_toml()).unwrap();
        let dir = tmpdir("jacobian");
        let summary = cmd_jacobian(&cfg, &dir).unwrap();
        assert_eq!(summary["controllable_dof"], 2);
        assert_eq!(summary["classification"], "underactuated");
        std::fs::remove_dir_all(&dir).ok();
    }
}
