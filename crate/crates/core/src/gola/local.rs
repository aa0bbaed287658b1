use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::density::UnnormalizedTarget;
use crate::error::{check_dim, Error, Result};
use crate::mathkit::sobol_points;

use super::{GolaConfig, LocalMethod};

const ARMIJO_C: f64 = 1e-4;
const MIN_STEP: f64 = 1e-20;
/// Accepted steps without strict decrease before a run is abandoned.
const MAX_STALLED: usize = 25;

/// Outcome of one local descent of `-log φ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalMinimum {
    pub location: Vec<f64>,
    /// `-log φ` at `location`.
    pub objective: f64,
    pub gradient_norm: f64,
    pub converged: bool,
    pub start_index: usize,
    pub iterations: usize,
}

fn objective(target: &UnnormalizedTarget, z: &DVector<f64>) -> f64 {
    let v = target.density().log_density(z.as_slice());
    if v.is_nan() {
        f64::INFINITY
    } else {
        -v
    }
}

/// Projected line-search descent of `-log φ` from `start`, clamped to the
/// target's search box.
pub fn local_minimize(
    target: &UnnormalizedTarget,
    start: &[f64],
    cfg: &GolaConfig,
) -> Result<LocalMinimum> {
    local_minimize_indexed(target, start, cfg, 0)
}

pub(crate) fn local_minimize_indexed(
    target: &UnnormalizedTarget,
    start: &[f64],
    cfg: &GolaConfig,
    start_index: usize,
) -> Result<LocalMinimum> {
    check_dim(target.dim(), start.len())?;
    let mut x = DVector::from_column_slice(start);
    target.search_box().clamp(&mut x);
    let mut f = objective(target, &x);
    if !f.is_finite() {
        return Err(Error::RejectedStart { point: start.to_vec() });
    }
    let d = x.len();
    let mut g = -target.eval_gradient(x.as_slice())?;
    let mut inv_h = DMatrix::<f64>::identity(d, d);
    let mut trial = 1.0 / g.amax().max(1.0);
    let mut iterations = 0;
    let mut stalled = 0;

    let finish = |x: DVector<f64>, f: f64, g: &DVector<f64>, iterations: usize| {
        let gradient_norm = g.norm();
        LocalMinimum {
            location: x.as_slice().to_vec(),
            objective: f,
            gradient_norm,
            converged: gradient_norm <= cfg.gradient_tol,
            start_index,
            iterations,
        }
    };

    while iterations < cfg.max_local_iters {
        if g.norm() <= cfg.gradient_tol {
            break;
        }
        let mut dir = match cfg.local_method {
            LocalMethod::GradientDescent => -&g,
            LocalMethod::Bfgs => -(&inv_h * &g),
        };
        if dir.dot(&g) >= 0.0 {
            inv_h.fill_with_identity();
            dir = -&g;
        }

        let mut alpha = trial;
        let accepted = loop {
            let mut xn = &x + &dir * alpha;
            target.search_box().clamp(&mut xn);
            let step = &xn - &x;
            if step.iter().all(|v| *v == 0.0) {
                break None;
            }
            let fnew = objective(target, &xn);
            let decrease = g.dot(&step);
            if fnew.is_finite() && (fnew <= f + ARMIJO_C * decrease || (fnew <= f && decrease.abs() <= 1e-15 * f.abs().max(1.0))) {
                break Some((xn, fnew, step));
            }
            alpha *= 0.5;
            if alpha < MIN_STEP {
                break None;
            }
        };
        let Some((xn, fnew, s)) = accepted else { break };
        // objective stuck at round-off: further steps cannot make progress
        stalled = if fnew < f { 0 } else { stalled + 1 };
        if stalled >= MAX_STALLED {
            break;
        }
        let gn = match target.eval_gradient(xn.as_slice()) {
            Ok(v) => -v,
            Err(_) => break,
        };
        iterations += 1;
        let y = &gn - &g;
        let sy = s.dot(&y);
        match cfg.local_method {
            LocalMethod::GradientDescent => {
                // Barzilai–Borwein trial, alternating the long and short forms
                trial = if sy > 0.0 {
                    let bb = if iterations % 2 == 0 { sy / y.dot(&y) } else { s.dot(&s) / sy };
                    bb.clamp(1e-12, 1e12)
                } else {
                    alpha * 2.0
                };
            }
            LocalMethod::Bfgs => {
                if sy > 1e-12 * s.norm() * y.norm() {
                    let rho = 1.0 / sy;
                    let hy = &inv_h * &y;
                    let yhy = y.dot(&hy);
                    inv_h += (&s * s.transpose()) * (rho * rho * yhy + rho)
                        - (&hy * s.transpose() + &s * hy.transpose()) * rho;
                }
                trial = 1.0;
            }
        }
        x = xn;
        f = fnew;
        g = gn;
    }
    Ok(finish(x, f, &g, iterations))
}

/// All runs from Sobol starts in the search box, in start order.
pub(crate) fn multistart_runs(
    target: &UnnormalizedTarget,
    cfg: &GolaConfig,
) -> Result<Vec<LocalMinimum>> {
    let d = target.dim();
    let n = cfg.resolved_starts(d);
    let unit = sobol_points(d, n, true)?;
    let starts: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let u: Vec<f64> = unit.row(i).iter().copied().collect();
            target.search_box().from_unit(&u).as_slice().to_vec()
        })
        .collect();
    let runs: Vec<Option<LocalMinimum>> = starts
        .par_iter()
        .enumerate()
        .map(|(i, s)| match local_minimize_indexed(target, s, cfg, i) {
            Ok(m) => Some(m),
            Err(e) => {
                log::debug!("start {i} discarded: {e}");
                None
            }
        })
        .collect();
    Ok(runs.into_iter().flatten().collect())
}

/// Order by objective, then lexicographically by location.
pub(crate) fn sort_minima(minima: &mut [LocalMinimum]) {
    minima.sort_by(|a, b| {
        a.objective.total_cmp(&b.objective).then_with(|| {
            a.location
                .iter()
                .zip(&b.location)
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        })
    });
}

/// Converged minima from `n_starts` Sobol starts, best first.
pub fn multistart_minimize(
    target: &UnnormalizedTarget,
    cfg: &GolaConfig,
) -> Result<Vec<LocalMinimum>> {
    cfg.validate()?;
    let runs = multistart_runs(target, cfg)?;
    let total = cfg.resolved_starts(target.dim());
    let mut converged: Vec<LocalMinimum> = runs.into_iter().filter(|m| m.converged).collect();
    if converged.is_empty() {
        return Err(Error::NoModesFound { runs: total });
    }
    sort_minima(&mut converged);
    Ok(converged)
}
