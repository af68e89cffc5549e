//! Joint (α, u) allocation used as the comparison baseline.
//!
//! For every grid angle the box-constrained least-squares problem
//! min ‖C_α u − w‖² s.t. 0 ≤ u ≤ ω̄² is solved exactly with an active-set
//! method, the switching cost is added, and the global minimum is returned.

use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector, Matrix6, Vector6};
use serde::{Deserialize, Serialize};

use crate::allocation::build_matrices;
use crate::error::{Error, Result};
use crate::platform::{BodyWrench, PlatformParams};
use crate::polytope::alpha_grid;
use crate::selector::cost;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineConfig {
    /// rad
    pub alpha_grid_step: f64,
    pub c1: f64,
    pub c2: f64,
    pub max_iterations: usize,
    /// Relative KKT tolerance.
    pub tolerance: f64,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            alpha_grid_step: 1f64.to_radians(),
            c1: 0.5,
            c2: 0.5,
            max_iterations: 100,
            tolerance: 1e-12,
        }
    }
}

impl BaselineConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha_grid_step > 0.0) {
            return Err(Error::Config("baseline: grid step must be positive".into()));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::Config("baseline: tolerance must be positive".into()));
        }
        if !(self.c1 >= 0.0 && self.c2 >= 0.0) {
            return Err(Error::Config(
                "baseline: cost weights must be nonnegative".into(),
            ));
        }
        if self.max_iterations == 0 {
            return Err(Error::Config(
                "baseline: max_iterations must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Bound {
    Lower,
    Upper,
    Free,
}

/// Box-constrained linear least squares for six unknowns,
/// min ½‖C u − w‖² subject to 0 ≤ u ≤ `upper`.
///
/// Active-set iteration in the style of Lawson–Hanson extended to two-sided
/// bounds. Free-variable subproblems are solved by SVD so rank-deficient
/// matrices still yield the minimum-norm step.
pub fn bounded_least_squares(
    c: &Matrix6<f64>,
    w: &Vector6<f64>,
    upper: f64,
    max_iterations: usize,
    tolerance: f64,
) -> Result<Vector6<f64>> {
    if !c.iter().chain(w.iter()).all(|x| x.is_finite()) {
        return Err(Error::Contract(
            "bounded least squares: non-finite input".into(),
        ));
    }
    let n = 6;
    let grad_scale = 1.0 + (c.transpose() * w).amax() + c.norm_squared() * upper;
    let grad_tol = tolerance * grad_scale;
    let bound_tol = 1e-12 * upper.max(1.0);

    let mut u = Vector6::zeros();
    let mut status = [Bound::Lower; 6];
    let mut iterations = 0usize;

    loop {
        let neg_grad = c.transpose() * (w - c * u);
        let entering = (0..n)
            .filter_map(|i| {
                let g = neg_grad[i];
                match status[i] {
                    Bound::Lower if g > grad_tol => Some((i, g)),
                    Bound::Upper if g < -grad_tol => Some((i, -g)),
                    _ => None,
                }
            })
            .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)));
        let Some((enter, _)) = entering else {
            return Ok(u);
        };
        status[enter] = Bound::Free;

        loop {
            iterations += 1;
            if iterations > max_iterations {
                return Err(Error::SolverFailure {
                    iterations: max_iterations,
                });
            }
            let free: Vec<usize> = (0..n).filter(|&i| status[i] == Bound::Free).collect();
            let z = solve_free(c, w, &u, &free);

            let outside = free
                .iter()
                .zip(z.iter())
                .any(|(_, &zi)| zi < -bound_tol || zi > upper + bound_tol);
            if !outside {
                for (&i, &zi) in free.iter().zip(z.iter()) {
                    u[i] = zi.clamp(0.0, upper);
                }
                break;
            }

            // step towards z until the first free variable reaches a bound
            let mut t = 1.0f64;
            for (&i, &zi) in free.iter().zip(z.iter()) {
                let d = zi - u[i];
                if zi < -bound_tol && d < 0.0 {
                    t = t.min((0.0 - u[i]) / d);
                } else if zi > upper + bound_tol && d > 0.0 {
                    t = t.min((upper - u[i]) / d);
                }
            }
            let t = t.clamp(0.0, 1.0);
            for (&i, &zi) in free.iter().zip(z.iter()) {
                u[i] += t * (zi - u[i]);
                if u[i] <= bound_tol {
                    u[i] = 0.0;
                    status[i] = Bound::Lower;
                } else if u[i] >= upper - bound_tol {
                    u[i] = upper;
                    status[i] = Bound::Upper;
                }
            }
            if !status.contains(&Bound::Free) {
                break;
            }
        }
    }
}

fn solve_free(c: &Matrix6<f64>, w: &Vector6<f64>, u: &Vector6<f64>, free: &[usize]) -> Vec<f64> {
    let mut rhs = *w;
    for j in 0..6 {
        if !free.contains(&j) {
            rhs -= c.column(j) * u[j];
        }
    }
    let sub = DMatrix::from_fn(6, free.len(), |r, k| c[(r, free[k])]);
    let svd = sub.svd(true, true);
    let tol = 1e-12 * svd.singular_values.max().max(f64::MIN_POSITIVE);
    let x = svd
        .solve(&DVector::from_column_slice(rhs.as_slice()), tol)
        .expect("SVD computed with both factors");
    x.iter().copied().collect()
}

/// Largest KKT violation of a box-constrained least-squares solution.
pub fn kkt_residual(c: &Matrix6<f64>, w: &Vector6<f64>, u: &Vector6<f64>, upper: f64) -> f64 {
    let neg_grad = c.transpose() * (w - c * u);
    (0..6)
        .map(|i| {
            let g = neg_grad[i];
            if u[i] <= 0.0 {
                g.max(0.0)
            } else if u[i] >= upper {
                (-g).max(0.0)
            } else {
                g.abs()
            }
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaselineOutcome {
    pub alpha_star: f64,
    pub u: Vector6<f64>,
    /// ‖C u − w‖ at the returned pair.
    pub residual: f64,
    /// ‖C u − w‖² + J.
    pub objective: f64,
    pub solve_time: Duration,
}

/// Grid-search joint allocator with matrices precomputed per grid angle.
#[derive(Debug, Clone)]
pub struct BaselineAllocator {
    pub config: BaselineConfig,
    grid: Vec<(f64, Matrix6<f64>)>,
    upper: f64,
}

impl BaselineAllocator {
    pub fn new(config: BaselineConfig, params: &PlatformParams) -> Result<Self> {
        config.validate()?;
        let grid = alpha_grid(config.alpha_grid_step)
            .into_iter()
            .map(|a| (a, build_matrices(a, params).stacked))
            .collect();
        Ok(Self {
            config,
            grid,
            upper: params.u_max(),
        })
    }

    pub fn grid_angles(&self) -> impl Iterator<Item = f64> + '_ {
        self.grid.iter().map(|(a, _)| *a)
    }

    pub fn allocate(&self, wrench: &BodyWrench, alpha_cur: f64) -> Result<BaselineOutcome> {
        let start = Instant::now();
        if !wrench.is_finite() {
            return Err(Error::Contract("desired wrench is not finite".into()));
        }
        let w = wrench.to_vector();
        let cfg = &self.config;
        let mut best: Option<(f64, Vector6<f64>, f64, f64)> = None;
        for (alpha, c) in &self.grid {
            let Ok(u) = bounded_least_squares(c, &w, self.upper, cfg.max_iterations, cfg.tolerance)
            else {
                continue;
            };
            let residual = (c * u - w).norm();
            let objective = residual * residual + cost(*alpha, alpha_cur, cfg.c1, cfg.c2);
            let replace = match &best {
                None => true,
                Some((a_best, _, _, obj_best)) => {
                    ordering_key(objective, *alpha) < ordering_key(*obj_best, *a_best)
                }
            };
            if replace {
                best = Some((*alpha, u, residual, objective));
            }
        }
        let (alpha_star, u, residual, objective) = best.ok_or(Error::AllocationFailure)?;
        Ok(BaselineOutcome {
            alpha_star,
            u,
            residual,
            objective,
            solve_time: start.elapsed(),
        })
    }
}

/// (objective, |α|, negative α last) lexicographic key.
fn ordering_key(objective: f64, alpha: f64) -> (OrdF64, OrdF64, bool) {
    (OrdF64(objective), OrdF64(alpha.abs()), alpha < 0.0)
}

#[derive(PartialEq, PartialOrd)]
struct OrdF64(f64);

/// One-shot form: builds the grid and solves.
pub fn baseline_allocate(
    wrench: &BodyWrench,
    alpha_cur: f64,
    config: &BaselineConfig,
    params: &PlatformParams,
) -> Result<BaselineOutcome> {
    BaselineAllocator::new(*config, params)?.allocate(wrench, alpha_cur)
}
