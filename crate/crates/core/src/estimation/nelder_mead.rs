//! Nelder-Mead simplex minimizer with coefficients (1, 2, 1/2, 1/2).

use crate::error::{Error, Result};

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NmOptions {
    pub max_evals: usize,
    /// Stop when the simplex diameter relative to `max(1, |best|)` falls
    /// below this.
    pub tol: f64,
    /// Initial edge length, relative to `max(1, |x0ᵢ|)`.
    pub initial_step: f64,
    /// Rebuilds of the simplex around the best point after convergence.
    pub max_restarts: usize,
}

impl Default for NmOptions {
    fn default() -> Self {
        Self { max_evals: 200_000, tol: 1e-9, initial_step: 0.1, max_restarts: 3 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NmResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub evals: usize,
    /// Diameter criterion met (as opposed to running out of evaluations).
    pub converged: bool,
    pub restarts: usize,
}

fn clean(v: f64) -> f64 {
    if v.is_nan() {
        f64::INFINITY
    } else {
        v
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// Minimizes `f` from `x0`.
///
/// Non-finite values (and NaN) are treated as `+inf`, so infeasible regions
/// simply repel the simplex.
pub fn nelder_mead<F: FnMut(&[f64]) -> f64>(mut f: F, x0: &[f64], opts: &NmOptions) -> Result<NmResult> {
    let f0 = clean(f(x0));
    if !f0.is_finite() {
        return Err(Error::NonFiniteObjective);
    }
    let mut evals = 1;
    let mut best = x0.to_vec();
    let mut best_val = f0;
    let mut restarts = 0;
    let mut converged;
    loop {
        let run = simplex_run(&mut f, &best, best_val, opts, &mut evals);
        let improved = run.1 < best_val;
        let gain = best_val - run.1;
        best = run.0;
        best_val = run.1;
        converged = run.2;
        if !converged || evals >= opts.max_evals || restarts >= opts.max_restarts {
            break;
        }
        // A restart that no longer moves the value confirms the minimum.
        if restarts > 0 && (!improved || gain <= 1e-15 * best_val.abs().max(1.0)) {
            break;
        }
        restarts += 1;
    }
    Ok(NmResult { x: best, value: best_val, evals, converged, restarts })
}

fn simplex_run<F: FnMut(&[f64]) -> f64>(
    f: &mut F,
    x0: &[f64],
    f0: f64,
    opts: &NmOptions,
    evals: &mut usize,
) -> (Vec<f64>, f64, bool) {
    let n = x0.len();
    let mut pts: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    let mut vals: Vec<f64> = Vec::with_capacity(n + 1);
    pts.push(x0.to_vec());
    vals.push(f0);
    for i in 0..n {
        let mut p = x0.to_vec();
        let h = opts.initial_step * x0[i].abs().max(1.0);
        p[i] += h;
        let mut v = clean(f(&p));
        *evals += 1;
        if !v.is_finite() {
            p[i] = x0[i] - h;
            v = clean(f(&p));
            *evals += 1;
        }
        pts.push(p);
        vals.push(v);
    }
    let mut order: Vec<usize> = (0..=n).collect();
    let mut centroid = vec![0.0; n];
    let mut trial = vec![0.0; n];
    let mut trial2 = vec![0.0; n];
    loop {
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        let (ib, iw, isw) = (order[0], order[n], order[n.saturating_sub(1)]);
        let scale = norm(&pts[ib]).max(1.0);
        let diam = pts
            .iter()
            .map(|p| p.iter().zip(&pts[ib]).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
            .fold(0.0, f64::max);
        if diam / scale < opts.tol {
            return (pts[ib].clone(), vals[ib], true);
        }
        if *evals >= opts.max_evals {
            return (pts[ib].clone(), vals[ib], false);
        }
        if n == 0 {
            return (pts[ib].clone(), vals[ib], true);
        }
        centroid.iter_mut().for_each(|c| *c = 0.0);
        for &i in &order[..n] {
            for (c, v) in centroid.iter_mut().zip(&pts[i]) {
                *c += v / n as f64;
            }
        }
        for j in 0..n {
            trial[j] = centroid[j] + REFLECT * (centroid[j] - pts[iw][j]);
        }
        let fr = clean(f(&trial));
        *evals += 1;
        if fr < vals[ib] {
            for j in 0..n {
                trial2[j] = centroid[j] + EXPAND * (trial[j] - centroid[j]);
            }
            let fe = clean(f(&trial2));
            *evals += 1;
            if fe < fr {
                pts[iw].copy_from_slice(&trial2);
                vals[iw] = fe;
            } else {
                pts[iw].copy_from_slice(&trial);
                vals[iw] = fr;
            }
            continue;
        }
        if fr < vals[isw] {
            pts[iw].copy_from_slice(&trial);
            vals[iw] = fr;
            continue;
        }
        let outside = fr < vals[iw];
        for j in 0..n {
            trial2[j] = if outside {
                centroid[j] + CONTRACT * (trial[j] - centroid[j])
            } else {
                centroid[j] + CONTRACT * (pts[iw][j] - centroid[j])
            };
        }
        let fc = clean(f(&trial2));
        *evals += 1;
        let accept = if outside { fc <= fr } else { fc < vals[iw] };
        if accept {
            pts[iw].copy_from_slice(&trial2);
            vals[iw] = fc;
            continue;
        }
        let anchor = pts[ib].clone();
        for &i in &order[1..] {
            for (p, a) in pts[i].iter_mut().zip(&anchor) {
                *p = a + SHRINK * (*p - a);
            }
            vals[i] = clean(f(&pts[i]));
            *evals += 1;
        }
    }
}
