//! Structural optimization drivers for magnet placement.
//!
//! Covers the closed-form two-magnet optima, canonical sign-pattern
//! enumeration (one representative per overall-flip equivalence class),
//! projected-gradient placement optimization under ordered minimum-spacing
//! constraints, exhaustive landscape scans, and a multistart search over
//! all sign patterns. A small Nelder–Mead baseline serves as the
//! derivative-free comparison method.

use rayon::prelude::*;
use serde::Serialize;

use crate::perfgeom::{
    global_objective, objective_design_gradient, ActuationDomain, DesignVariables,
    ObjectiveOptions, PerfError, PerformanceIndex,
};
use crate::robot::RobotSpec;

/// Sense of the optimization: manipulability is maximized, distortion
/// minimized. Kept explicit so positivity checks on densities stay
/// meaningful.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Sense {
    Maximize,
    Minimize,
}

impl Sense {
    pub fn for_index(index: &PerformanceIndex) -> Sense {
        match index {
            PerformanceIndex::Distortion => Sense::Minimize,
            _ => Sense::Maximize,
        }
    }

    fn signed(&self, v: f64) -> f64 {
        match self {
            Sense::Maximize => v,
            Sense::Minimize => -v,
        }
    }
}

/// Closed-form reduction of the two-magnet placement problem: position of
/// the free magnet maximizing the weak-field manipulability objective,
/// `argmax x²(L−x)⁴ √(4x² + (L−x)²)` for aligned moments and exactly
/// `2L/7` for opposing ones.
pub fn analytic_two_magnet_optimum(aligned: bool, total_length: f64) -> f64 {
    if !aligned {
        return 2.0 * total_length / 7.0;
    }
    // stationarity of ln f, f = x²(L−x)⁴√(4x²+(L−x)²):
    // g(x) = 2/x − 4/(L−x) + (4x − (L−x))/(4x² + (L−x)²), bisected to
    // machine precision on its bracketing interval
    let g = |x: f64| {
        let y = total_length - x;
        2.0 / x - 4.0 / y + (4.0 * x - y) / (4.0 * x * x + y * y)
    };
    let (mut a, mut b) = (0.05 * total_length, 0.6 * total_length);
    debug_assert!(g(a) > 0.0 && g(b) < 0.0);
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if g(mid) > 0.0 {
            a = mid;
        } else {
            b = mid;
        }
        if b - a <= f64::EPSILON * total_length {
            break;
        }
    }
    0.5 * (a + b)
}

/// Canonical axial sign patterns: `2^{N_m−1}` representatives with the
/// first magnet pinned to `+1` (a global flip is compensated by reversing
/// the field).
pub fn enumerate_sign_patterns(n_magnets: usize) -> Vec<Vec<f64>> {
    assert!(n_magnets >= 1);
    let mut out = Vec::with_capacity(1 << (n_magnets - 1));
    for bits in 0..(1usize << (n_magnets - 1)) {
        let mut pattern = vec![1.0];
        for q in 0..(n_magnets - 1) {
            pattern.push(if bits >> q & 1 == 1 { -1.0 } else { 1.0 });
        }
        out.push(pattern);
    }
    out
}

/// Euclidean projection onto the feasible set
/// `{lo ≤ x_1, x_{q+1} − x_q ≥ gap, x_last ≤ hi}` — isotonic regression
/// (pool adjacent violators) in shifted coordinates followed by clamping.
pub fn project_feasible(x: &[f64], lo: f64, hi: f64, gap: f64) -> Vec<f64> {
    let n = x.len();
    if n == 0 {
        return Vec::new();
    }
    // y_q = x_q − q·gap must be nondecreasing within [lo, hi − (n−1)·gap]
    let shifted: Vec<f64> = x.iter().enumerate().map(|(q, v)| v - q as f64 * gap).collect();
    // PAVA
    let mut means: Vec<(f64, usize)> = Vec::with_capacity(n);
    for &v in &shifted {
        means.push((v, 1));
        while means.len() >= 2 {
            let (m2, c2) = means[means.len() - 1];
            let (m1, c1) = means[means.len() - 2];
            if m1 > m2 {
                means.pop();
                means.pop();
                means.push(((m1 * c1 as f64 + m2 * c2 as f64) / (c1 + c2) as f64, c1 + c2));
            } else {
                break;
            }
        }
    }
    let upper = hi - (n as f64 - 1.0) * gap;
    let mut out = Vec::with_capacity(n);
    for (m, c) in means {
        let clamped = m.clamp(lo, upper);
        for _ in 0..c {
            out.push(clamped + out.len() as f64 * gap);
        }
    }
    out
}

/// One step record of a placement optimization.
#[derive(Debug, Clone, Serialize)]
pub struct TrajectoryPoint {
    pub positions: Vec<f64>,
    pub value: f64,
    pub gradient_norm: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct LandscapePoint {
    pub positions: Vec<f64>,
    pub value: f64,
    /// Value rescaled to \[0, 1\] over the scanned grid.
    pub normalized: f64,
}

/// Result of a placement optimization or landscape scan.
#[derive(Debug, Clone, Serialize)]
pub struct OptimizationReport {
    pub signs: Vec<f64>,
    pub sense: Sense,
    pub best_positions: Vec<f64>,
    pub best_value: f64,
    pub converged: bool,
    pub trajectory: Vec<TrajectoryPoint>,
    pub landscape: Vec<LandscapePoint>,
}

#[derive(Debug, Clone)]
pub struct OptimizeOptions {
    pub domain: ActuationDomain,
    pub objective: ObjectiveOptions,
    pub max_iterations: usize,
    /// Stop when the projected step norm falls below `tol · L`.
    pub tol: f64,
    pub initial: Option<Vec<f64>>,
}

impl OptimizeOptions {
    pub fn new(domain: ActuationDomain) -> Self {
        OptimizeOptions {
            domain,
            objective: ObjectiveOptions::default(),
            max_iterations: 60,
            tol: 1e-4,
            initial: None,
        }
    }
}

fn feasible_range(template: &RobotSpec, min_spacing: f64) -> (f64, f64) {
    let l = template.total_length();
    (min_spacing, l - min_spacing)
}

fn make_design(template: &RobotSpec, positions: &[f64], signs: &[f64], min_spacing: f64) -> DesignVariables {
    let _ = template;
    DesignVariables {
        free_positions: positions.to_vec(),
        signs: signs.to_vec(),
        min_spacing,
    }
}

/// Projected gradient ascent/descent with backtracking line search on the
/// global objective.
pub fn optimize_placement(
    template: &RobotSpec,
    signs: &[f64],
    index: &PerformanceIndex,
    min_spacing: f64,
    opts: &OptimizeOptions,
) -> Result<OptimizationReport, PerfError> {
    let sense = Sense::for_index(index);
    let l = template.total_length();
    let (lo, hi) = feasible_range(template, min_spacing);
    let n_free = signs.len() - 1;
    let start = match &opts.initial {
        Some(x) => x.clone(),
        None => (1..=n_free)
            .map(|q| q as f64 * l / (n_free + 1) as f64)
            .collect(),
    };
    let mut x = project_feasible(&start, lo, hi, min_spacing);
    {
        let d = make_design(template, &x, signs, min_spacing);
        d.validate(l)?;
    }
    let eval = |pos: &[f64]| -> Result<f64, PerfError> {
        let d = make_design(template, pos, signs, min_spacing);
        Ok(global_objective(template, &d, index, &opts.domain, &opts.objective)?.value)
    };
    let grad = |pos: &[f64]| -> Result<Vec<f64>, PerfError> {
        let d = make_design(template, pos, signs, min_spacing);
        objective_design_gradient(template, &d, index, &opts.domain, &opts.objective)
    };
    let mut value = eval(&x)?;
    let mut trajectory = vec![TrajectoryPoint {
        positions: x.clone(),
        value,
        gradient_norm: f64::NAN,
    }];
    let mut converged = false;
    // initial step: a tenth of the free span
    let mut step = 0.1 * (hi - lo);
    for _ in 0..opts.max_iterations {
        let g = grad(&x)?;
        let gnorm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        trajectory.last_mut().unwrap().gradient_norm = gnorm;
        // ascend for maximization, descend otherwise
        let mut accepted = false;
        let mut trial_step = step;
        for _ in 0..30 {
            let cand: Vec<f64> = x
                .iter()
                .zip(&g)
                .map(|(xi, gi)| xi + sense.signed(1.0) * trial_step * gi / gnorm.max(1e-300))
                .collect();
            let cand = project_feasible(&cand, lo, hi, min_spacing);
            let move_norm: f64 = cand
                .iter()
                .zip(&x)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            if move_norm < opts.tol * l {
                converged = true;
                break;
            }
            let cval = eval(&cand)?;
            if sense.signed(cval) > sense.signed(value) {
                x = cand;
                value = cval;
                trajectory.push(TrajectoryPoint {
                    positions: x.clone(),
                    value,
                    gradient_norm: f64::NAN,
                });
                step = (trial_step * 1.5).min(0.2 * (hi - lo));
                accepted = true;
                break;
            }
            trial_step *= 0.4;
        }
        if converged || !accepted {
            converged = converged || !accepted && trajectory.len() > 1;
            break;
        }
    }
    Ok(OptimizationReport {
        signs: signs.to_vec(),
        sense,
        best_positions: x,
        best_value: value,
        converged,
        trajectory,
        landscape: Vec::new(),
    })
}

/// Dense scan over the feasible design grid, values normalized to \[0, 1\].
/// Guarded to at most four magnets (three grid dimensions).
pub fn exhaustive_landscape(
    template: &RobotSpec,
    signs: &[f64],
    index: &PerformanceIndex,
    min_spacing: f64,
    resolution: usize,
    opts: &OptimizeOptions,
) -> Result<OptimizationReport, PerfError> {
    let n_free = signs.len() - 1;
    if n_free > 3 {
        let cells = resolution.pow(n_free as u32);
        return Err(PerfError::Infeasible(format!(
            "landscape over {n_free} free positions needs ~{cells} cells; at most 4 magnets supported"
        )));
    }
    let sense = Sense::for_index(index);
    let l = template.total_length();
    let (lo, hi) = feasible_range(template, min_spacing);
    let axis: Vec<f64> = (0..resolution)
        .map(|i| lo + (hi - lo) * i as f64 / (resolution - 1).max(1) as f64)
        .collect();
    // all ordered tuples satisfying the spacing constraint
    let mut grid: Vec<Vec<f64>> = vec![vec![]];
    for _ in 0..n_free {
        let mut next = Vec::new();
        for partial in &grid {
            for &v in &axis {
                if partial.last().map_or(true, |&p| v - p >= min_spacing - 1e-12) {
                    let mut cand = partial.clone();
                    cand.push(v);
                    next.push(cand);
                }
            }
        }
        grid = next;
    }
    let values: Vec<Result<f64, PerfError>> = grid
        .par_iter()
        .map(|pos| {
            let d = make_design(template, pos, signs, min_spacing);
            d.validate(l)?;
            Ok(global_objective(template, &d, index, &opts.domain, &opts.objective)?.value)
        })
        .collect();
    let mut landscape = Vec::with_capacity(grid.len());
    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut vmin = f64::INFINITY;
    let mut vmax = f64::NEG_INFINITY;
    for (pos, val) in grid.into_iter().zip(values) {
        let val = val?;
        vmin = vmin.min(val);
        vmax = vmax.max(val);
        if best
            .as_ref()
            .map_or(true, |(_, b)| sense.signed(val) > sense.signed(*b))
        {
            best = Some((pos.clone(), val));
        }
        landscape.push(LandscapePoint {
            positions: pos,
            value: val,
            normalized: 0.0,
        });
    }
    let span = (vmax - vmin).max(1e-300);
    for p in &mut landscape {
        p.normalized = (p.value - vmin) / span;
    }
    let (best_positions, best_value) = best.expect("non-empty grid");
    Ok(OptimizationReport {
        signs: signs.to_vec(),
        sense,
        best_positions,
        best_value,
        converged: true,
        trajectory: Vec::new(),
        landscape,
    })
}

/// Full search: projected-gradient optimization from several deterministic
/// restarts, for every canonical sign pattern.
#[derive(Debug, Clone, Serialize)]
pub struct DesignSearchReport {
    pub per_pattern: Vec<OptimizationReport>,
    pub best: OptimizationReport,
}

pub fn full_design_search(
    template: &RobotSpec,
    index: &PerformanceIndex,
    min_spacing: f64,
    restarts: usize,
    seed: u64,
    opts: &OptimizeOptions,
) -> Result<DesignSearchReport, PerfError> {
    use rand::{Rng, SeedableRng};
    let sense = Sense::for_index(index);
    let n_m = template.n_magnets();
    let (lo, hi) = feasible_range(template, min_spacing);
    let mut per_pattern = Vec::new();
    for (p, signs) in enumerate_sign_patterns(n_m).into_iter().enumerate() {
        let mut best: Option<OptimizationReport> = None;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed.wrapping_add(p as u64));
        for r in 0..restarts.max(1) {
            let mut o = opts.clone();
            if r > 0 {
                let raw: Vec<f64> = (0..n_m - 1).map(|_| rng.gen_range(lo..hi)).collect();
                let mut sorted = raw;
                sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
                o.initial = Some(project_feasible(&sorted, lo, hi, min_spacing));
            }
            let report = optimize_placement(template, &signs, index, min_spacing, &o)?;
            if best
                .as_ref()
                .map_or(true, |b| sense.signed(report.best_value) > sense.signed(b.best_value))
            {
                best = Some(report);
            }
        }
        per_pattern.push(best.expect("at least one restart"));
    }
    let best = per_pattern
        .iter()
        .max_by(|a, b| {
            sense
                .signed(a.best_value)
                .partial_cmp(&sense.signed(b.best_value))
                .unwrap()
        })
        .expect("at least one pattern")
        .clone();
    Ok(DesignSearchReport { per_pattern, best })
}

/// Derivative-free Nelder–Mead baseline on the same objective (the
/// comparison heuristic). Infeasible simplex points are projected first.
pub fn nelder_mead_placement(
    template: &RobotSpec,
    signs: &[f64],
    index: &PerformanceIndex,
    min_spacing: f64,
    opts: &OptimizeOptions,
    max_evals: usize,
) -> Result<OptimizationReport, PerfError> {
    let sense = Sense::for_index(index);
    let l = template.total_length();
    let (lo, hi) = feasible_range(template, min_spacing);
    let n = signs.len() - 1;
    let start = match &opts.initial {
        Some(x) => x.clone(),
        None => (1..=n).map(|q| q as f64 * l / (n + 1) as f64).collect(),
    };
    let eval = |pos: &[f64]| -> Result<f64, PerfError> {
        let p = project_feasible(pos, lo, hi, min_spacing);
        let d = make_design(template, &p, signs, min_spacing);
        Ok(global_objective(template, &d, index, &opts.domain, &opts.objective)?.value)
    };
    // simplex of n+1 points
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    let base = project_feasible(&start, lo, hi, min_spacing);
    simplex.push((base.clone(), eval(&base)?));
    for q in 0..n {
        let mut p = base.clone();
        p[q] += 0.08 * (hi - lo);
        let p = project_feasible(&p, lo, hi, min_spacing);
        let v = eval(&p)?;
        simplex.push((p, v));
    }
    let mut evals = simplex.len();
    let better = |a: f64, b: f64| sense.signed(a) > sense.signed(b);
    while evals < max_evals {
        simplex.sort_by(|a, b| sense.signed(b.1).partial_cmp(&sense.signed(a.1)).unwrap());
        let worst = simplex[n].clone();
        let centroid: Vec<f64> = (0..n)
            .map(|q| simplex[..n].iter().map(|(p, _)| p[q]).sum::<f64>() / n as f64)
            .collect();
        let reflect: Vec<f64> = centroid
            .iter()
            .zip(&worst.0)
            .map(|(c, w)| c + (c - w))
            .collect();
        let fr = eval(&reflect)?;
        evals += 1;
        if better(fr, simplex[0].1) {
            let expand: Vec<f64> = centroid
                .iter()
                .zip(&worst.0)
                .map(|(c, w)| c + 2.0 * (c - w))
                .collect();
            let fe = eval(&expand)?;
            evals += 1;
            simplex[n] = if better(fe, fr) { (expand, fe) } else { (reflect, fr) };
        } else if better(fr, simplex[n - 1].1) {
            simplex[n] = (reflect, fr);
        } else {
            let contract: Vec<f64> = centroid
                .iter()
                .zip(&worst.0)
                .map(|(c, w)| c + 0.5 * (w - c))
                .collect();
            let fc = eval(&contract)?;
            evals += 1;
            if better(fc, worst.1) {
                simplex[n] = (contract, fc);
            } else {
                // shrink toward the best vertex
                let best = simplex[0].0.clone();
                for item in simplex.iter_mut().skip(1) {
                    let p: Vec<f64> = best
                        .iter()
                        .zip(&item.0)
                        .map(|(b, q)| b + 0.5 * (q - b))
                        .collect();
                    let v = eval(&p)?;
                    evals += 1;
                    *item = (p, v);
                }
            }
        }
        let spread = simplex
            .iter()
            .map(|(p, _)| {
                p.iter()
                    .zip(&simplex[0].0)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        if spread < 1e-4 * l {
            break;
        }
    }
    simplex.sort_by(|a, b| sense.signed(b.1).partial_cmp(&sense.signed(a.1)).unwrap());
    let best = simplex[0].clone();
    let positions = project_feasible(&best.0, lo, hi, min_spacing);
    Ok(OptimizationReport {
        signs: signs.to_vec(),
        sense,
        best_positions: positions,
        best_value: best.1,
        converged: true,
        trajectory: Vec::new(),
        landscape: Vec::new(),
    })
}
