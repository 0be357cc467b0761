//! Maximum-likelihood fitting, maximum verification and standard errors.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::nelder_mead::{nelder_mead, NmOptions};
use super::starts::starting_point;
use super::transform::{to_natural, to_theta};
use crate::distributions::log_of_positive;
use crate::error::{Error, Result};
use crate::mixture::ModelSpec;
use crate::model::Model;
use crate::sampling::RngStream;
use crate::truncation::TruncationWindow;

/// Optimizer and verification settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    pub max_evals: usize,
    /// Relative simplex diameter at which a polish run stops.
    pub simplex_tol: f64,
    pub n_starts: usize,
    pub seed: u64,
    /// Relative finite-difference step for the Hessian.
    pub se_step: f64,
    /// Total width, in standard errors, of the verification grid.
    pub verify_width_se: f64,
    pub verify_points: usize,
    pub max_verify_rounds: usize,
    /// Looser tolerance and budget used to screen the starts.
    pub screen_tol: f64,
    pub screen_max_evals: usize,
    /// Number of screened starts carried on to the full polish.
    pub polish_top: usize,
    pub max_restarts: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            max_evals: 200_000,
            simplex_tol: 1e-9,
            n_starts: 10,
            seed: 0,
            se_step: 1e-4,
            verify_width_se: 8.0,
            verify_points: 9,
            max_verify_rounds: 3,
            screen_tol: 1e-5,
            screen_max_evals: 20_000,
            polish_top: 2,
            max_restarts: 3,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.max_evals > 0
            && self.simplex_tol > 0.0
            && self.n_starts > 0
            && self.se_step > 0.0
            && self.verify_width_se > 0.0
            && self.verify_points > 0
            && self.screen_tol > 0.0
            && self.screen_max_evals > 0
            && self.polish_top > 0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParams(format!("fit configuration must be positive: {self:?}")))
        }
    }
}

/// Diagnostics attached to a fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitFlag {
    /// The observed information could not be inverted; SEs are NaN.
    SingularInformation,
    /// The best run stopped on its evaluation budget.
    MaxEvals,
    /// The verification grid found a higher likelihood and the fit was
    /// re-polished.
    VerificationImproved,
    /// The verification grid still finds a higher likelihood after the
    /// allowed rounds.
    VerificationFailed,
}

impl FitFlag {
    pub fn as_str(self) -> &'static str {
        match self {
            FitFlag::SingularInformation => "singular_information",
            FitFlag::MaxEvals => "max_evals",
            FitFlag::VerificationImproved => "verification_improved",
            FitFlag::VerificationFailed => "verification_failed",
        }
    }
}

/// Result of [`fit_mle`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedModel {
    pub spec: ModelSpec,
    pub param_names: Vec<String>,
    pub params: Vec<f64>,
    pub std_errors: Vec<f64>,
    /// `ln L*` in sales units (x-space).
    pub loglik: f64,
    pub n: usize,
    pub converged: bool,
    pub starts_agreeing: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<TruncationWindow>,
    pub flags: Vec<FitFlag>,
    pub evals: usize,
}

impl FittedModel {
    pub fn k(&self) -> usize {
        self.spec.k()
    }
    pub fn model(&self) -> Result<Model> {
        Model::new(self.spec, &self.params, self.window)
    }
}

/// Negative mean y-space log-likelihood on sorted log-data.
struct Objective<'a> {
    spec: ModelSpec,
    window: Option<TruncationWindow>,
    ys: &'a [f64],
}

impl Objective<'_> {
    fn eval(&self, theta: &[f64]) -> f64 {
        let nat = to_natural(self.spec.family, theta);
        match Model::new(self.spec, &nat, self.window) {
            Ok(m) if m.is_feasible() => {
                let v = -m.loglik_y(self.ys) / self.ys.len() as f64;
                if v.is_nan() {
                    f64::INFINITY
                } else {
                    v
                }
            }
            _ => f64::INFINITY,
        }
    }

    /// Total y-space log-likelihood.
    fn loglik(&self, theta: &[f64]) -> f64 {
        -self.eval(theta) * self.ys.len() as f64
    }
}

/// Converts a sample in sales units to sorted log-data, checking the window.
pub fn log_data(data: &[f64], window: Option<TruncationWindow>) -> Result<Vec<f64>> {
    let mut ys = data.iter().map(|&x| log_of_positive(x)).collect::<Result<Vec<_>>>()?;
    ys.sort_by(f64::total_cmp);
    if let Some(w) = window {
        if let Some(&y) = ys.iter().find(|&&y| y < w.y_min() || y > w.y_max()) {
            return Err(Error::OutOfWindow { y, lo: w.y_min(), hi: w.y_max() });
        }
    }
    Ok(ys)
}

/// Fits `spec` to a sample in sales units.
pub fn fit_mle(
    spec: ModelSpec,
    data: &[f64],
    window: Option<TruncationWindow>,
    cfg: &FitConfig,
) -> Result<FittedModel> {
    let ys = log_data(data, window)?;
    fit_mle_y(spec, &ys, window, cfg, &[])
}

/// Stream id for start `start` of `spec`, so every (seed, spec, start) has
/// its own generator.
fn stream_id(spec: ModelSpec, start: usize) -> u64 {
    let f = spec.family as u64;
    let t = spec.truncated as u64;
    (f << 33) | (t << 32) | start as u64
}

/// Fits `spec` to sorted log-data, adding `warm` (natural parameters) to the
/// generated starts. Warm starts are always polished.
pub fn fit_mle_y(
    spec: ModelSpec,
    ys: &[f64],
    window: Option<TruncationWindow>,
    cfg: &FitConfig,
    warm: &[Vec<f64>],
) -> Result<FittedModel> {
    cfg.validate()?;
    let k = spec.k();
    if ys.len() < 10 * k {
        return Err(Error::TooFewObservations { needed: 10 * k, got: ys.len() });
    }
    let not_estimable = |reason: String| Error::NotEstimable { model: spec.name(), reason };
    let obj = Objective { spec, window, ys };
    let family = spec.family;

    let screen = NmOptions {
        max_evals: cfg.screen_max_evals,
        tol: cfg.screen_tol,
        initial_step: 0.1,
        max_restarts: 0,
    };
    let polish = NmOptions {
        max_evals: cfg.max_evals,
        tol: cfg.simplex_tol,
        initial_step: 0.05,
        max_restarts: cfg.max_restarts,
    };

    let mut evals = 0usize;
    let mut screened: Vec<(Vec<f64>, f64)> = Vec::new();
    for s in 0..cfg.n_starts {
        let mut rng = RngStream::new(cfg.seed, stream_id(spec, s));
        let theta0 = to_theta(family, &starting_point(family, ys, s, &mut rng));
        if let Ok(r) = nelder_mead(|t| obj.eval(t), &theta0, &screen) {
            evals += r.evals;
            screened.push((r.x, r.value));
        }
    }
    screened.sort_by(|a, b| a.1.total_cmp(&b.1));

    let mut candidates: Vec<Vec<f64>> =
        screened.iter().take(cfg.polish_top).map(|c| c.0.clone()).collect();
    candidates.extend(warm.iter().map(|p| to_theta(family, p)));

    let mut finals: Vec<f64> = screened.iter().skip(cfg.polish_top).map(|c| c.1).collect();
    let mut best: Option<(Vec<f64>, f64, bool)> = None;
    for theta0 in candidates {
        let Ok(r) = nelder_mead(|t| obj.eval(t), &theta0, &polish) else {
            continue;
        };
        evals += r.evals;
        finals.push(r.value);
        if best.as_ref().is_none_or(|b| r.value < b.1) {
            best = Some((r.x, r.value, r.converged));
        }
    }
    let (mut theta, mut value, mut converged) =
        best.ok_or_else(|| not_estimable("no starting point gave a finite likelihood".into()))?;
    if !value.is_finite() {
        return Err(not_estimable("objective is not finite at the optimum".into()));
    }

    // Perturbation check around the optimum.
    let mut flags = Vec::new();
    let mut rounds = 0;
    loop {
        let se = theta_standard_errors(&obj, &theta, cfg.se_step);
        let Some(se) = se else { break };
        let found = scan_grid(&obj, &theta, value, &se, cfg);
        match found {
            None => break,
            Some(better) => {
                if rounds >= cfg.max_verify_rounds {
                    flags.push(FitFlag::VerificationFailed);
                    break;
                }
                rounds += 1;
                if !flags.contains(&FitFlag::VerificationImproved) {
                    flags.push(FitFlag::VerificationImproved);
                }
                let r = nelder_mead(|t| obj.eval(t), &better, &polish)?;
                evals += r.evals;
                if r.value < value {
                    theta = r.x;
                    value = r.value;
                    converged = r.converged;
                    finals.push(value);
                }
            }
        }
    }

    let model = Model::new(spec, &to_natural(family, &theta), window)?.canonicalize()?;
    let theta = to_theta(family, model.params());
    let (std_errors, singular) = natural_standard_errors(&obj, &theta, cfg.se_step);
    if singular {
        flags.push(FitFlag::SingularInformation);
    }
    if !converged {
        flags.push(FitFlag::MaxEvals);
    }
    flags.sort();

    let tol = 1e-5_f64.max(cfg.screen_tol);
    let starts_agreeing = finals.iter().filter(|&&v| v - value <= tol).count();
    let n = ys.len();
    let loglik = -value * n as f64 - ys.iter().sum::<f64>();
    Ok(FittedModel {
        spec,
        param_names: family.param_names(),
        params: model.params().to_vec(),
        std_errors,
        loglik,
        n,
        converged,
        starts_agreeing,
        window,
        flags,
        evals,
    })
}

/// Offsets of the verification grid, in standard errors.
pub fn grid_offsets(width_se: f64, points: usize) -> Vec<f64> {
    if points == 1 {
        return vec![0.0];
    }
    (0..points)
        .map(|i| -0.5 * width_se + width_se * i as f64 / (points - 1) as f64)
        .collect()
}

fn scan_grid(obj: &Objective, theta: &[f64], value: f64, se: &[f64], cfg: &FitConfig) -> Option<Vec<f64>> {
    let slack = 1e-8 * value.abs();
    let mut best: Option<(Vec<f64>, f64)> = None;
    for (j, &s) in se.iter().enumerate() {
        for off in grid_offsets(cfg.verify_width_se, cfg.verify_points) {
            if off == 0.0 {
                continue;
            }
            let mut t = theta.to_vec();
            t[j] += off * s;
            let v = obj.eval(&t);
            if v < value - slack && best.as_ref().is_none_or(|b| v < b.1) {
                best = Some((t, v));
            }
        }
    }
    best.map(|b| b.0)
}

/// Summary of the perturbation check at a fitted optimum.
#[derive(Debug, Clone, PartialEq)]
pub struct Verification {
    /// Largest log-likelihood gain seen on the grid (≤ 0 at a verified
    /// maximum).
    pub max_gain: f64,
    pub points: usize,
    pub theta_se: Vec<f64>,
}

/// Evaluates the verification grid around a fitted model. `None` when the
/// information matrix is singular.
pub fn verify_maximum(fitted: &FittedModel, data: &[f64], cfg: &FitConfig) -> Result<Option<Verification>> {
    let ys = log_data(data, fitted.window)?;
    let obj = Objective { spec: fitted.spec, window: fitted.window, ys: &ys };
    let theta = to_theta(fitted.spec.family, &fitted.params);
    let Some(se) = theta_standard_errors(&obj, &theta, cfg.se_step) else {
        return Ok(None);
    };
    let base = obj.loglik(&theta);
    let mut max_gain = f64::NEG_INFINITY;
    let mut points = 0;
    for (j, &s) in se.iter().enumerate() {
        for off in grid_offsets(cfg.verify_width_se, cfg.verify_points) {
            let mut t = theta.clone();
            t[j] += off * s;
            max_gain = max_gain.max(obj.loglik(&t) - base);
            points += 1;
        }
    }
    Ok(Some(Verification { max_gain, points, theta_se: se }))
}

/// Hessian of the total log-likelihood in `θ` by central differences.
fn hessian(obj: &Objective, theta: &[f64], step: f64) -> DMatrix<f64> {
    let k = theta.len();
    let h: Vec<f64> = theta.iter().map(|t| step * t.abs().max(1.0)).collect();
    let f0 = obj.loglik(theta);
    let at = |d: &[(usize, f64)]| {
        let mut t = theta.to_vec();
        for &(i, v) in d {
            t[i] += v;
        }
        obj.loglik(&t)
    };
    let mut m = DMatrix::zeros(k, k);
    for i in 0..k {
        let fp = at(&[(i, h[i])]);
        let fm = at(&[(i, -h[i])]);
        m[(i, i)] = (fp - 2.0 * f0 + fm) / (h[i] * h[i]);
        for j in 0..i {
            let v = (at(&[(i, h[i]), (j, h[j])]) - at(&[(i, h[i]), (j, -h[j])])
                - at(&[(i, -h[i]), (j, h[j])])
                + at(&[(i, -h[i]), (j, -h[j])]))
                / (4.0 * h[i] * h[j]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}

/// Inverse observed information in `θ`, or `None` when singular.
fn theta_covariance(obj: &Objective, theta: &[f64], step: f64) -> Option<DMatrix<f64>> {
    let info = -hessian(obj, theta, step);
    if info.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let chol = info.cholesky()?;
    let cov = chol.inverse();
    if cov.iter().all(|v| v.is_finite()) && (0..cov.nrows()).all(|i| cov[(i, i)] > 0.0) {
        Some(cov)
    } else {
        None
    }
}

fn theta_standard_errors(obj: &Objective, theta: &[f64], step: f64) -> Option<Vec<f64>> {
    theta_covariance(obj, theta, step).map(|c| (0..c.nrows()).map(|i| c[(i, i)].sqrt()).collect())
}

/// Natural-scale SEs by the delta method; NaN and `true` when singular.
fn natural_standard_errors(obj: &Objective, theta: &[f64], step: f64) -> (Vec<f64>, bool) {
    let family = obj.spec.family;
    let k = theta.len();
    let Some(cov) = theta_covariance(obj, theta, step) else {
        return (vec![f64::NAN; k], true);
    };
    let mut jac = DMatrix::zeros(k, k);
    for j in 0..k {
        let h = 1e-6 * theta[j].abs().max(1.0);
        let mut tp = theta.to_vec();
        let mut tm = theta.to_vec();
        tp[j] += h;
        tm[j] -= h;
        let (np, nm) = (to_natural(family, &tp), to_natural(family, &tm));
        for i in 0..k {
            jac[(i, j)] = (np[i] - nm[i]) / (2.0 * h);
        }
    }
    let nat_cov = &jac * cov * jac.transpose();
    ((0..k).map(|i| nat_cov[(i, i)].max(0.0).sqrt()).collect(), false)
}

/// Natural-scale standard errors of a fitted model on its data.
pub fn standard_errors(fitted: &FittedModel, data: &[f64], cfg: &FitConfig) -> Result<(Vec<f64>, bool)> {
    let ys = log_data(data, fitted.window)?;
    let obj = Objective { spec: fitted.spec, window: fitted.window, ys: &ys };
    let theta = to_theta(fitted.spec.family, &fitted.params);
    Ok(natural_standard_errors(&obj, &theta, cfg.se_step))
}
