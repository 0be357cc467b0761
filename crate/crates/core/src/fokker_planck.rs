//! Drift terms that make a time-dependent mixture solve the Fokker-Planck
//! equation with constant diffusion `a = s²`, plus residual checks and an
//! Euler-Maruyama simulator.
//!
//! With `F` the CDF of `f(y,t)`,
//!
//! ```text
//! b(y,t) = s²/(2f) ∂f/∂y - (1/f) ∂F/∂t.
//! ```

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::Density;
use crate::error::{Error, Result};
use crate::mixture::{Component, Family, ModelSpec};
use crate::model::Model;
use crate::sampling::{sample_mixture_y, sample_truncated_mixture_y, RngStream};
use crate::truncation::{window_mass, TruncationWindow};
use rand_distr::{Distribution, StandardNormal};

/// Density below which the drift is undefined.
pub const MIN_DENSITY: f64 = 1e-300;

/// Linear path between two parameter sets of the same model.
///
/// Locations, `ln σ`, additive log-ratio weight logits and the window ends
/// `y_min`, `y_max` move linearly in `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamPath {
    pub model: ModelSpec,
    pub t0: f64,
    pub t1: f64,
    pub params_t0: Vec<f64>,
    pub params_t1: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window_t0: Option<TruncationWindow>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window_t1: Option<TruncationWindow>,
}

/// One location-scale component at a fixed time, with its time derivatives.
#[derive(Debug, Clone, Copy)]
struct MovingComponent {
    c: Component,
    mu: f64,
    sigma: f64,
    mu_dot: f64,
    sigma_dot: f64,
    // truncation: F(a), F(b), f(a), f(b) and the mass
    fa: f64,
    fb: f64,
    pa: f64,
    pb: f64,
    mass: f64,
}

/// Frozen state of a [`ParamPath`] at one time.
#[derive(Debug, Clone)]
pub struct PathState {
    t: f64,
    comps: Vec<MovingComponent>,
    weights: Vec<f64>,
    weight_dots: Vec<f64>,
    // (y_min, y_max, ẏ_min, ẏ_max)
    window: Option<(f64, f64, f64, f64)>,
}

fn build_component(family: Family, i: usize, mu: f64, sigma: f64) -> Result<Component> {
    use crate::distributions::{LogLogistic, LogNormal, LogStudent};
    Ok(match family {
        Family::Ln | Family::Ln2 | Family::Ln3 | Family::Ln4 | Family::Ln5 => {
            Component::LogNormal(LogNormal::new(mu, sigma)?)
        }
        Family::Ll2 | Family::Ll3 | Family::Ll4 | Family::Ll5 => {
            Component::LogLogistic(LogLogistic::new(mu, sigma)?)
        }
        f if !f.fixed_nus().is_empty() => {
            Component::LogStudent(LogStudent::new(mu, sigma, f.fixed_nus()[i])?)
        }
        f => {
            return Err(Error::InvalidParams(format!(
                "{f} has no location-scale components; paths support LN, LL and LSt families"
            )))
        }
    })
}

/// `∂ ln f / ∂y` of a location-scale component.
fn score(c: &Component, y: f64) -> f64 {
    match c {
        Component::LogNormal(d) => -(y - d.mu()) / (d.sigma() * d.sigma()),
        Component::LogLogistic(d) => -(0.5 * (y - d.mu()) / d.sigma()).tanh() / d.sigma(),
        Component::LogStudent(d) => {
            let u = y - d.mu();
            -(d.nu() + 1.0) * u / (d.nu() * d.sigma() * d.sigma() + u * u)
        }
        _ => f64::NAN,
    }
}

impl ParamPath {
    pub fn validate(&self) -> Result<()> {
        let k = self.model.k();
        if self.params_t0.len() != k || self.params_t1.len() != k {
            return Err(Error::InvalidParams(format!("{} path needs {k} parameters per end", self.model)));
        }
        if !(self.t1 > self.t0) {
            return Err(Error::InvalidParams(format!("need t0 < t1, got {} and {}", self.t0, self.t1)));
        }
        if self.model.truncated != (self.window_t0.is_some() && self.window_t1.is_some()) {
            return Err(Error::InvalidParams(
                "truncated paths need both windows; untruncated paths take none".into(),
            ));
        }
        self.model.family.build(&self.params_t0)?;
        self.model.family.build(&self.params_t1)?;
        build_component(self.model.family, 0, 0.0, 1.0)?;
        Ok(())
    }

    fn all_weights(&self, free: &[f64]) -> Vec<f64> {
        let mut w = free.to_vec();
        w.push(1.0 - free.iter().sum::<f64>());
        w
    }

    /// Natural parameters and window of the density at time `t`.
    pub fn params_at(&self, t: f64) -> Result<(Vec<f64>, Option<TruncationWindow>)> {
        let st = self.state(t)?;
        let mut p = Vec::with_capacity(self.model.k());
        for c in &st.comps {
            p.push(c.mu);
            p.push(c.sigma);
        }
        if st.weights.len() > 1 {
            p.extend(&st.weights[..st.weights.len() - 1]);
        }
        let w = match st.window {
            Some((a, b, _, _)) => Some(TruncationWindow::new(a.exp(), b.exp())?),
            None => None,
        };
        Ok((p, w))
    }

    /// Evaluable model of the density at time `t`.
    pub fn model_at(&self, t: f64) -> Result<Model> {
        let (p, w) = self.params_at(t)?;
        Model::new(self.model, &p, w)
    }

    /// `n` draws of `y` from the density at time `t`.
    pub fn sample_at(&self, t: f64, n: usize, rng: &mut RngStream) -> Result<Vec<f64>> {
        let (p, w) = self.params_at(t)?;
        let m = self.model.family.build(&p)?;
        match w {
            Some(w) => sample_truncated_mixture_y(&m, w, n, rng),
            None => sample_mixture_y(&m, n, rng),
        }
    }

    /// Parameters, derivatives and truncation constants at time `t`.
    pub fn state(&self, t: f64) -> Result<PathState> {
        let family = self.model.family;
        let ell = family.ell();
        let span = self.t1 - self.t0;
        let r = (t - self.t0) / span;
        let (p0, p1) = (&self.params_t0, &self.params_t1);

        let window = match (self.window_t0, self.window_t1) {
            (Some(w0), Some(w1)) => {
                let (a0, a1) = (w0.y_min(), w1.y_min());
                let (b0, b1) = (w0.y_max(), w1.y_max());
                Some((a0 + r * (a1 - a0), b0 + r * (b1 - b0), (a1 - a0) / span, (b1 - b0) / span))
            }
            _ => None,
        };

        let mut comps = Vec::with_capacity(ell);
        for i in 0..ell {
            let (m0, m1) = (p0[2 * i], p1[2 * i]);
            let (ls0, ls1) = (p0[2 * i + 1].ln(), p1[2 * i + 1].ln());
            let mu = m0 + r * (m1 - m0);
            let sigma = (ls0 + r * (ls1 - ls0)).exp();
            let c = build_component(family, i, mu, sigma)?;
            let mut mc = MovingComponent {
                c,
                mu,
                sigma,
                mu_dot: (m1 - m0) / span,
                sigma_dot: sigma * (ls1 - ls0) / span,
                fa: 0.0,
                fb: 1.0,
                pa: 0.0,
                pb: 0.0,
                mass: 1.0,
            };
            if let Some((ya, yb, _, _)) = window {
                let (mass, _, _) = window_mass(&c, ya, yb);
                if !(mass > MIN_DENSITY) {
                    return Err(Error::MassTooSmall { mass });
                }
                mc.fa = c.cdf_y(ya);
                mc.fb = mc.fa + mass;
                mc.pa = c.pdf_y(ya);
                mc.pb = c.pdf_y(yb);
                mc.mass = mass;
            }
            comps.push(mc);
        }

        let (weights, weight_dots) = if ell == 1 {
            (vec![1.0], vec![0.0])
        } else {
            let (w0, w1) = (self.all_weights(&p0[2 * ell..]), self.all_weights(&p1[2 * ell..]));
            if w0 == w1 {
                (w0, vec![0.0; ell])
            } else {
                if w0.iter().chain(&w1).any(|&w| !(w > 0.0)) {
                    return Err(Error::InvalidParams(
                        "moving weights must be strictly positive at both ends".into(),
                    ));
                }
                let eta = |w: &[f64], j: usize| (w[j] / w[ell - 1]).ln();
                let e: Vec<f64> = (0..ell).map(|j| eta(&w0, j) + r * (eta(&w1, j) - eta(&w0, j))).collect();
                let e_dot: Vec<f64> = (0..ell).map(|j| (eta(&w1, j) - eta(&w0, j)) / span).collect();
                let hi = e.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let z: f64 = e.iter().map(|v| (v - hi).exp()).sum();
                let p: Vec<f64> = e.iter().map(|v| (v - hi).exp() / z).collect();
                let mean_dot: f64 = p.iter().zip(&e_dot).map(|(a, b)| a * b).sum();
                let pd = p.iter().zip(&e_dot).map(|(pi, ed)| pi * (ed - mean_dot)).collect();
                (p, pd)
            }
        };
        Ok(PathState { t, comps, weights, weight_dots, window })
    }
}

impl PathState {
    pub fn t(&self) -> f64 {
        self.t
    }
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
    pub fn weight_dots(&self) -> &[f64] {
        &self.weight_dots
    }
    /// `(y_min, y_max)` when truncated.
    pub fn window(&self) -> Option<(f64, f64)> {
        self.window.map(|w| (w.0, w.1))
    }

    fn inside(&self, y: f64) -> bool {
        self.window.is_none_or(|(a, b, _, _)| y >= a && y <= b)
    }

    fn check_inside(&self, y: f64) -> Result<()> {
        match self.window {
            Some((a, b, _, _)) if !(y >= a && y <= b) => Err(Error::OutOfWindow { y, lo: a, hi: b }),
            _ => Ok(()),
        }
    }

    /// Component density after truncation.
    fn comp_pdf(&self, c: &MovingComponent, y: f64) -> f64 {
        c.c.pdf_y(y) / c.mass
    }

    /// Component CDF after truncation.
    fn comp_cdf(&self, c: &MovingComponent, y: f64) -> f64 {
        match self.window {
            None => c.c.cdf_y(y),
            Some(_) => ((c.c.cdf_y(y) - c.fa) / c.mass).clamp(0.0, 1.0),
        }
    }

    pub fn pdf(&self, y: f64) -> f64 {
        if !self.inside(y) {
            return 0.0;
        }
        self.comps.iter().zip(&self.weights).map(|(c, w)| w * self.comp_pdf(c, y)).sum()
    }

    pub fn cdf(&self, y: f64) -> f64 {
        match self.window {
            Some((a, _, _, _)) if y < a => 0.0,
            Some((_, b, _, _)) if y > b => 1.0,
            _ => self.comps.iter().zip(&self.weights).map(|(c, w)| w * self.comp_cdf(c, y)).sum(),
        }
    }

    /// `∂f/∂y` from the component scores.
    pub fn dpdf_dy(&self, y: f64) -> f64 {
        if !self.inside(y) {
            return 0.0;
        }
        self.comps
            .iter()
            .zip(&self.weights)
            .map(|(c, w)| w * self.comp_pdf(c, y) * score(&c.c, y))
            .sum()
    }

    /// `∂F/∂t` at fixed `y`, as the total time derivative of each
    /// component's raw CDF at the points `y`, `y_min(t)` and `y_max(t)`.
    pub fn dcdf_dt(&self, y: f64) -> f64 {
        // d/dt F(z; μ(t), σ(t)) + f(z) ż for a point z moving at speed ż
        let moving = |c: &MovingComponent, z: f64, z_dot: f64| {
            let f = c.c.pdf_y(z);
            -f * (c.mu_dot + (z - c.mu) * c.sigma_dot / c.sigma) + f * z_dot
        };
        let mut total = 0.0;
        for ((c, w), wd) in self.comps.iter().zip(&self.weights).zip(&self.weight_dots) {
            let (g, g_dot) = match self.window {
                None => (c.c.cdf_y(y), moving(c, y, 0.0)),
                Some((a, b, a_dot, b_dot)) => {
                    let g = self.comp_cdf(c, y);
                    let fa_dot = moving(c, a, a_dot);
                    let fb_dot = moving(c, b, b_dot);
                    let fy_dot = moving(c, y, 0.0);
                    (g, (fy_dot - fa_dot - g * (fb_dot - fa_dot)) / c.mass)
                }
            };
            total += wd * g + w * g_dot;
        }
        total
    }
}

/// A time-dependent density with analytic `∂f/∂y` and `∂F/∂t`.
pub trait TimeDensity {
    fn pdf(&self, y: f64, t: f64) -> Result<f64>;
    fn cdf(&self, y: f64, t: f64) -> Result<f64>;
    fn dpdf_dy(&self, y: f64, t: f64) -> Result<f64>;
    fn dcdf_dt(&self, y: f64, t: f64) -> Result<f64>;
}

impl TimeDensity for ParamPath {
    fn pdf(&self, y: f64, t: f64) -> Result<f64> {
        Ok(self.state(t)?.pdf(y))
    }
    fn cdf(&self, y: f64, t: f64) -> Result<f64> {
        Ok(self.state(t)?.cdf(y))
    }
    fn dpdf_dy(&self, y: f64, t: f64) -> Result<f64> {
        Ok(self.state(t)?.dpdf_dy(y))
    }
    fn dcdf_dt(&self, y: f64, t: f64) -> Result<f64> {
        Ok(self.state(t)?.dcdf_dt(y))
    }
}

/// `b = s²/(2f) ∂f/∂y - (1/f) ∂F/∂t` for any time-dependent density.
pub fn generic_drift<D: TimeDensity + ?Sized>(d: &D, s: f64, y: f64, t: f64) -> Result<f64> {
    let f = d.pdf(y, t)?;
    if !(f >= MIN_DENSITY) {
        return Err(Error::ZeroDensity { y });
    }
    Ok(0.5 * s * s * d.dpdf_dy(y, t)? / f - d.dcdf_dt(y, t)? / f)
}

fn generic_from_state(state: &PathState, s: f64, y: f64) -> Result<f64> {
    state.check_inside(y)?;
    let f = state.pdf(y);
    if !(f >= MIN_DENSITY) {
        return Err(Error::ZeroDensity { y });
    }
    Ok(0.5 * s * s * state.dpdf_dy(y) / f - state.dcdf_dt(y) / f)
}

/// `k(y; μ, σ, ν, s) = μ̇ + (y-μ)σ̇/σ - s²(1+ν)(y-μ) / (2((y-μ)² + νσ²))`.
pub fn k_term(y: f64, mu: f64, sigma: f64, nu: f64, s: f64, mu_dot: f64, sigma_dot: f64) -> f64 {
    let u = y - mu;
    mu_dot + u * sigma_dot / sigma - s * s * (1.0 + nu) * u / (2.0 * (u * u + nu * sigma * sigma))
}

/// Posterior probabilities `τᵢ(y,t)` of the (possibly truncated)
/// components.
pub fn posteriors(state: &PathState, y: f64) -> Vec<f64> {
    let parts: Vec<f64> =
        state.comps.iter().zip(&state.weights).map(|(c, w)| w * state.comp_pdf(c, y)).collect();
    let total: f64 = parts.iter().sum();
    parts.iter().map(|p| p / total).collect()
}

fn student_nu(c: &Component) -> Result<f64> {
    match c {
        Component::LogStudent(d) => Ok(d.nu()),
        _ => Err(Error::InvalidParams("closed-form drift needs log-Student components".into())),
    }
}

/// `Σ kᵢ τᵢ - Σ_{j<ℓ} ṗⱼ πⱼ` for an untruncated log-Student mixture.
fn drift_student_mixture(state: &PathState, s: f64, y: f64) -> Result<f64> {
    let f = state.pdf(y);
    if !(f >= MIN_DENSITY) {
        return Err(Error::ZeroDensity { y });
    }
    let tau = posteriors(state, y);
    let mut b = 0.0;
    for (c, t) in state.comps.iter().zip(&tau) {
        b += k_term(y, c.mu, c.sigma, student_nu(&c.c)?, s, c.mu_dot, c.sigma_dot) * t;
    }
    let ell = state.comps.len();
    if state.weight_dots.iter().any(|&d| d != 0.0) {
        let last = state.comps[ell - 1].c.cdf_y(y);
        for j in 0..ell - 1 {
            let pi = (state.comps[j].c.cdf_y(y) - last) / f;
            b -= state.weight_dots[j] * pi;
        }
    }
    Ok(b)
}

/// Closed-form drift of the four-component log-Student mixture
/// (ν = 4, 12, 39, 100).
pub fn drift_4lst(state: &PathState, s: f64, y: f64) -> Result<f64> {
    if state.comps.len() != 4 || state.window.is_some() {
        return Err(Error::InvalidParams("drift_4lst needs an untruncated 4LSt path".into()));
    }
    drift_student_mixture(state, s, y)
}

/// Partial derivatives of a truncated component CDF
/// `G = (F(y) - F(y_min)) / (F(y_max) - F(y_min))` with respect to
/// `(μ, σ, y_min, y_max)`.
fn truncated_cdf_partials(c: &MovingComponent, g: f64, y: f64, a: f64, b: f64) -> [f64; 4] {
    let m = c.mass;
    let fy = c.c.pdf_y(y);
    let (fa, fb) = (c.pa, c.pb);
    let d_mu = (-fy + fa - g * (-fb + fa)) / m;
    let (zy, za, zb) = ((y - c.mu) / c.sigma, (a - c.mu) / c.sigma, (b - c.mu) / c.sigma);
    let d_sigma = (-fy * zy + fa * za - g * (-fb * zb + fa * za)) / m;
    let d_ymin = -(1.0 - g) * fa / m;
    let d_ymax = -g * fb / m;
    [d_mu, d_sigma, d_ymin, d_ymax]
}

/// Closed-form drift of the doubly truncated five-component log-Student
/// mixture (ν = 4, 12, 39, 100, 200), components truncated individually.
pub fn drift_5lsttt(state: &PathState, s: f64, y: f64) -> Result<f64> {
    let Some((a, b, a_dot, b_dot)) = state.window else {
        return Err(Error::InvalidParams("drift_5lsttt needs a truncated path".into()));
    };
    if state.comps.len() != 5 {
        return Err(Error::InvalidParams("drift_5lsttt needs five components".into()));
    }
    truncated_student_drift(state, s, y, a, b, a_dot, b_dot)
}

fn truncated_student_drift(
    state: &PathState,
    s: f64,
    y: f64,
    a: f64,
    b: f64,
    a_dot: f64,
    b_dot: f64,
) -> Result<f64> {
    state.check_inside(y)?;
    let j = state.pdf(y);
    if !(j >= MIN_DENSITY) {
        return Err(Error::ZeroDensity { y });
    }
    let ell = state.comps.len();
    let mut drift = 0.0;
    let mut g = Vec::with_capacity(ell);
    for (c, w) in state.comps.iter().zip(&state.weights) {
        student_nu(&c.c)?;
        let ft = state.comp_pdf(c, y);
        let gi = state.comp_cdf(c, y);
        g.push(gi);
        if *w == 0.0 || ft == 0.0 {
            continue;
        }
        let [d_mu, d_sigma, d_ymin, d_ymax] = truncated_cdf_partials(c, gi, y, a, b);
        let g_dot = c.sigma_dot * d_sigma + c.mu_dot * d_mu + b_dot * d_ymax + a_dot * d_ymin;
        let k = 0.5 * s * s * score(&c.c, y) - g_dot / ft;
        let tau = w * ft / j;
        drift += k * tau;
    }
    for jdx in 0..ell - 1 {
        let pi = (g[jdx] - g[ell - 1]) / j;
        drift -= state.weight_dots[jdx] * pi;
    }
    Ok(drift)
}

/// Which drift formula a [`DriftField`] uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriftKind {
    Lst4,
    Lst5tt,
    Generic,
}

/// Constant diffusion `s²` and a parameter path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftField {
    pub s: f64,
    pub path: ParamPath,
    pub kind: DriftKind,
}

impl DriftField {
    pub fn new(s: f64, path: ParamPath, kind: DriftKind) -> Result<Self> {
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::InvalidParams(format!("diffusion constant must be positive, got {s}")));
        }
        path.validate()?;
        let expected = match kind {
            DriftKind::Lst4 => Some(ModelSpec::new(Family::LSt4)),
            DriftKind::Lst5tt => Some(ModelSpec::truncated(Family::LSt5)),
            DriftKind::Generic => None,
        };
        if let Some(e) = expected {
            if path.model != e {
                return Err(Error::InvalidParams(format!("{kind:?} drift needs a {e} path, got {}", path.model)));
            }
        }
        Ok(Self { s, path, kind })
    }

    /// Closed form for the tagged models, generic formula otherwise.
    pub fn drift_at(&self, state: &PathState, y: f64) -> Result<f64> {
        match self.kind {
            DriftKind::Lst4 => drift_4lst(state, self.s, y),
            DriftKind::Lst5tt => drift_5lsttt(state, self.s, y),
            DriftKind::Generic => generic_from_state(state, self.s, y),
        }
    }

    pub fn drift(&self, y: f64, t: f64) -> Result<f64> {
        self.drift_at(&self.path.state(t)?, y)
    }

    pub fn pdf(&self, y: f64, t: f64) -> Result<f64> {
        Ok(self.path.state(t)?.pdf(y))
    }
}

/// Residual of `∂f/∂t + ∂(bf)/∂y - (s²/2) ∂²f/∂y²` by central differences.
pub fn fp_residual_at(field: &DriftField, y: f64, t: f64, h_y: f64, h_t: f64) -> Result<f64> {
    let st = field.path.state(t)?;
    let (sp, sm) = (field.path.state(t + h_t)?, field.path.state(t - h_t)?);
    let df_dt = (sp.pdf(y) - sm.pdf(y)) / (2.0 * h_t);
    let flux = |z: f64| -> Result<f64> { Ok(field.drift_at(&st, z)? * st.pdf(z)) };
    let d_flux = (flux(y + h_y)? - flux(y - h_y)?) / (2.0 * h_y);
    let d2f = (st.pdf(y + h_y) - 2.0 * st.pdf(y) + st.pdf(y - h_y)) / (h_y * h_y);
    Ok(df_dt + d_flux - 0.5 * field.s * field.s * d2f)
}

/// Maximum absolute residual over the grid `ys × ts`.
pub fn fp_residual(field: &DriftField, ys: &[f64], ts: &[f64], h_y: f64, h_t: f64) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for &t in ts {
        for &y in ys {
            worst = worst.max(fp_residual_at(field, y, t, h_y, h_t)?.abs());
        }
    }
    Ok(worst)
}

/// Residuals under simultaneous refinement `h_y = h_t = h`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceStudy {
    pub steps: Vec<f64>,
    pub residuals: Vec<f64>,
    /// Observed orders between successive steps.
    pub orders: Vec<f64>,
}

impl ConvergenceStudy {
    /// Smallest observed order.
    pub fn min_order(&self) -> f64 {
        self.orders.iter().cloned().fold(f64::INFINITY, f64::min)
    }
}

pub fn fp_convergence(field: &DriftField, ys: &[f64], ts: &[f64], steps: &[f64]) -> Result<ConvergenceStudy> {
    let residuals = steps
        .iter()
        .map(|&h| fp_residual(field, ys, ts, h, h))
        .collect::<Result<Vec<_>>>()?;
    let orders = steps
        .windows(2)
        .zip(residuals.windows(2))
        .map(|(h, r)| (r[0] / r[1]).ln() / (h[0] / h[1]).ln())
        .collect();
    Ok(ConvergenceStudy { steps: steps.to_vec(), residuals, orders })
}

/// Euler-Maruyama transport of `y0` from `t0` to `t1` under `field`.
///
/// Trajectory `i` draws its noise from `RngStream(seed, i)`. Truncated
/// paths reflect at the moving window edges.
pub fn simulate_sde(
    field: &DriftField,
    y0: &[f64],
    t0: f64,
    t1: f64,
    n_steps: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    if n_steps == 0 || !(t1 > t0) {
        return Err(Error::InvalidParams("need n_steps > 0 and t1 > t0".into()));
    }
    let dt = (t1 - t0) / n_steps as f64;
    let states = (0..=n_steps)
        .map(|k| field.path.state(t0 + k as f64 * dt))
        .collect::<Result<Vec<_>>>()?;
    let sd = field.s * dt.sqrt();
    y0.par_iter()
        .enumerate()
        .map(|(i, &start)| {
            let mut rng = RngStream::new(seed, i as u64);
            let mut y = start;
            for k in 0..n_steps {
                let b = field.drift_at(&states[k], y)?;
                let z: f64 = StandardNormal.sample(&mut rng);
                y += b * dt + sd * z;
                if let Some((lo, hi)) = states[k + 1].window() {
                    y = reflect(y, lo, hi);
                }
            }
            Ok(y)
        })
        .collect()
}

fn reflect(mut y: f64, lo: f64, hi: f64) -> f64 {
    let width = hi - lo;
    for _ in 0..64 {
        if y < lo {
            y = 2.0 * lo - y;
        } else if y > hi {
            y = 2.0 * hi - y;
        } else {
            return y;
        }
    }
    lo + (y - lo).rem_euclid(width)
}
