//! The six base families on `x > 0`: LN, DPLN, GB2, LNSNP, LL and LSt.
//!
//! Every family is evaluated in the log variable `y = ln x`; the x-space
//! density follows from the Jacobian, `f_X(x) = f_Y(ln x) / x`.

use std::f64::consts::PI;

use crate::error::{domain, Error, Result};
use crate::special::{
    inc_beta_pair, ln_beta, ln_gamma, ln_mills_ratio, ln_std_normal_pdf, log_add_exp, logistic,
    softplus, std_normal_cdf,
};

/// A univariate distribution of a positive size variable, evaluated through
/// its log variable.
pub trait Density {
    /// Density of `y = ln x`. Signed for LNSNP, non-negative otherwise.
    fn pdf_y(&self, y: f64) -> f64 {
        self.ln_pdf_y(y).exp()
    }

    /// `ln f_Y(y)`; `-inf` where the density is not positive.
    fn ln_pdf_y(&self, y: f64) -> f64;

    fn cdf_y(&self, y: f64) -> f64;

    /// Survival function `1 - cdf_y`, accurate in the upper tail.
    fn sf_y(&self, y: f64) -> f64 {
        1.0 - self.cdf_y(y)
    }

    fn pdf(&self, x: f64) -> Result<f64> {
        let y = log_of_positive(x)?;
        Ok(self.pdf_y(y) / x)
    }

    fn ln_pdf(&self, x: f64) -> Result<f64> {
        let y = log_of_positive(x)?;
        Ok(self.ln_pdf_y(y) - y)
    }

    fn cdf(&self, x: f64) -> Result<f64> {
        Ok(self.cdf_y(log_of_positive(x)?))
    }

    fn sf(&self, x: f64) -> Result<f64> {
        Ok(self.sf_y(log_of_positive(x)?))
    }
}

pub(crate) fn log_of_positive(x: f64) -> Result<f64> {
    if x > 0.0 && x.is_finite() {
        Ok(x.ln())
    } else {
        domain(format!("size variable must be positive and finite, got {x}"))
    }
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParams(format!("{name} must be positive, got {v}")))
    }
}

fn check_finite(name: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParams(format!("{name} must be finite, got {v}")))
    }
}

/// Lognormal distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogNormal {
    mu: f64,
    sigma: f64,
    ln_sigma: f64,
}

impl LogNormal {
    pub fn new(mu: f64, sigma: f64) -> Result<Self> {
        check_finite("mu", mu)?;
        check_positive("sigma", sigma)?;
        Ok(Self { mu, sigma, ln_sigma: sigma.ln() })
    }
    pub fn mu(&self) -> f64 {
        self.mu
    }
    pub fn sigma(&self) -> f64 {
        self.sigma
    }
}

impl Density for LogNormal {
    fn ln_pdf_y(&self, y: f64) -> f64 {
        ln_std_normal_pdf((y - self.mu) / self.sigma) - self.ln_sigma
    }
    fn cdf_y(&self, y: f64) -> f64 {
        std_normal_cdf((y - self.mu) / self.sigma)
    }
    fn sf_y(&self, y: f64) -> f64 {
        std_normal_cdf(-(y - self.mu) / self.sigma)
    }
}

/// Double Pareto lognormal distribution: upper tail exponent `alpha`, lower
/// tail exponent `beta`, lognormal body `(mu, sigma)`.
///
/// The two `exp(·)Φ(·)` products of the density are evaluated as
/// `φ(z) R(·)` with Mills' ratio `R` in log space, which cannot overflow.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DoubleParetoLogNormal {
    alpha: f64,
    beta: f64,
    mu: f64,
    sigma: f64,
}

impl DoubleParetoLogNormal {
    pub fn new(alpha: f64, beta: f64, mu: f64, sigma: f64) -> Result<Self> {
        check_positive("alpha", alpha)?;
        check_positive("beta", beta)?;
        check_finite("mu", mu)?;
        check_positive("sigma", sigma)?;
        Ok(Self { alpha, beta, mu, sigma })
    }
    pub fn alpha(&self) -> f64 {
        self.alpha
    }
    pub fn beta(&self) -> f64 {
        self.beta
    }
    pub fn mu(&self) -> f64 {
        self.mu
    }
    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    // ln of φ(z)[R(-z) - b/(a+b) R(aσ - z) + a/(a+b) R(bσ + z)], which is the
    // CDF at z for exponents (a, b) and the survival function at -z for (b, a).
    fn ln_tail(z: f64, a: f64, b: f64, sigma: f64) -> f64 {
        let ln_r0 = ln_mills_ratio(-z);
        let ln_ra = ln_mills_ratio(a * sigma - z);
        let ln_rb = ln_mills_ratio(b * sigma + z);
        let share_b = b / (a + b);
        let share_a = a / (a + b);
        // R(aσ - z) < R(-z), so the bracket below stays >= a/(a+b).
        let head = ln_r0 + (-share_b * (ln_ra - ln_r0).exp()).ln_1p();
        ln_std_normal_pdf(z) + log_add_exp(head, share_a.ln() + ln_rb)
    }
}

impl Density for DoubleParetoLogNormal {
    fn ln_pdf_y(&self, y: f64) -> f64 {
        let (a, b, s) = (self.alpha, self.beta, self.sigma);
        let z = (y - self.mu) / s;
        (a * b / (a + b)).ln()
            + ln_std_normal_pdf(z)
            + log_add_exp(ln_mills_ratio(a * s - z), ln_mills_ratio(b * s + z))
    }
    fn cdf_y(&self, y: f64) -> f64 {
        let z = (y - self.mu) / self.sigma;
        if z <= 0.0 {
            Self::ln_tail(z, self.alpha, self.beta, self.sigma).exp().min(1.0)
        } else {
            1.0 - self.sf_y(y)
        }
    }
    fn sf_y(&self, y: f64) -> f64 {
        let z = (y - self.mu) / self.sigma;
        if z >= 0.0 {
            Self::ln_tail(-z, self.beta, self.alpha, self.sigma).exp().min(1.0)
        } else {
            1.0 - self.cdf_y(y)
        }
    }
}

/// Generalized beta distribution of the second kind.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gb2 {
    a: f64,
    b: f64,
    p: f64,
    q: f64,
    ln_b: f64,
    ln_norm: f64,
}

impl Gb2 {
    pub fn new(a: f64, b: f64, p: f64, q: f64) -> Result<Self> {
        check_positive("a", a)?;
        check_positive("b", b)?;
        check_positive("p", p)?;
        check_positive("q", q)?;
        Ok(Self { a, b, p, q, ln_b: b.ln(), ln_norm: a.ln() - ln_beta(p, q) })
    }
    pub fn a(&self) -> f64 {
        self.a
    }
    pub fn b(&self) -> f64 {
        self.b
    }
    pub fn p(&self) -> f64 {
        self.p
    }
    pub fn q(&self) -> f64 {
        self.q
    }
    fn w(&self, y: f64) -> f64 {
        self.a * (y - self.ln_b)
    }
}

impl Density for Gb2 {
    fn ln_pdf_y(&self, y: f64) -> f64 {
        let w = self.w(y);
        self.ln_norm + self.p * w - (self.p + self.q) * softplus(w)
    }
    fn cdf_y(&self, y: f64) -> f64 {
        let w = self.w(y);
        inc_beta_pair(logistic(w), logistic(-w), self.p, self.q).0
    }
    fn sf_y(&self, y: f64) -> f64 {
        let w = self.w(y);
        inc_beta_pair(logistic(w), logistic(-w), self.p, self.q).1
    }
}

/// Probabilists' Hermite polynomials `h_1 … h_4` as used by the LNSNP model.
pub fn hermite_h(k: usize, z: f64) -> Result<f64> {
    match k {
        1 => Ok(z),
        2 => Ok(z * z - 1.0),
        3 => Ok(z * z * z - 3.0 * z),
        4 => Ok(z.powi(4) - 6.0 * z * z + 3.0),
        _ => domain(format!("Hermite degree must be 1..=4, got {k}")),
    }
}

/// Number of z-grid points on `[-10, 10]` used to decide LNSNP feasibility.
pub const LNSNP_GRID_POINTS: usize = 2001;

/// Log semi-nonparametric density: a lognormal multiplied by
/// `1 + d₁h₁(z) + … + d₄h₄(z)`.
///
/// For arbitrary coefficients the product can go negative; see
/// [`LogSnp::is_feasible`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogSnp {
    mu: f64,
    sigma: f64,
    d: [f64; 4],
}

impl LogSnp {
    pub fn new(mu: f64, sigma: f64, d: [f64; 4]) -> Result<Self> {
        check_finite("mu", mu)?;
        check_positive("sigma", sigma)?;
        for (i, v) in d.iter().enumerate() {
            check_finite(&format!("d{}", i + 1), *v)?;
        }
        Ok(Self { mu, sigma, d })
    }
    pub fn mu(&self) -> f64 {
        self.mu
    }
    pub fn sigma(&self) -> f64 {
        self.sigma
    }
    pub fn coefficients(&self) -> [f64; 4] {
        self.d
    }

    /// `1 + Σ d_k h_k(z)`.
    pub fn polynomial(&self, z: f64) -> f64 {
        let z2 = z * z;
        1.0 + self.d[0] * z
            + self.d[1] * (z2 - 1.0)
            + self.d[2] * (z2 * z - 3.0 * z)
            + self.d[3] * (z2 * z2 - 6.0 * z2 + 3.0)
    }

    // Σ d_k h_{k-1}(z); the CDF is Φ(z) - φ(z) times this.
    fn cdf_correction(&self, z: f64) -> f64 {
        let z2 = z * z;
        self.d[0] + self.d[1] * z + self.d[2] * (z2 - 1.0) + self.d[3] * (z2 * z - 3.0 * z)
    }

    /// True when the density is non-negative at every point of the
    /// 2001-point grid `z ∈ [-10, 10]`.
    pub fn is_feasible(&self) -> bool {
        (0..LNSNP_GRID_POINTS).all(|i| {
            let z = -10.0 + 20.0 * i as f64 / (LNSNP_GRID_POINTS - 1) as f64;
            self.polynomial(z) >= 0.0
        })
    }

    /// Largest value of the polynomial factor on the feasibility grid.
    pub fn polynomial_max(&self) -> f64 {
        (0..LNSNP_GRID_POINTS)
            .map(|i| self.polynomial(-10.0 + 20.0 * i as f64 / (LNSNP_GRID_POINTS - 1) as f64))
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

impl Density for LogSnp {
    fn pdf_y(&self, y: f64) -> f64 {
        let z = (y - self.mu) / self.sigma;
        ln_std_normal_pdf(z).exp() / self.sigma * self.polynomial(z)
    }
    fn ln_pdf_y(&self, y: f64) -> f64 {
        let z = (y - self.mu) / self.sigma;
        let poly = self.polynomial(z);
        if poly > 0.0 {
            ln_std_normal_pdf(z) - self.sigma.ln() + poly.ln()
        } else {
            f64::NEG_INFINITY
        }
    }
    fn cdf_y(&self, y: f64) -> f64 {
        let z = (y - self.mu) / self.sigma;
        std_normal_cdf(z) - ln_std_normal_pdf(z).exp() * self.cdf_correction(z)
    }
    fn sf_y(&self, y: f64) -> f64 {
        let z = (y - self.mu) / self.sigma;
        std_normal_cdf(-z) + ln_std_normal_pdf(z).exp() * self.cdf_correction(z)
    }
}

/// Loglogistic distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogLogistic {
    mu: f64,
    sigma: f64,
    ln_sigma: f64,
}

impl LogLogistic {
    pub fn new(mu: f64, sigma: f64) -> Result<Self> {
        check_finite("mu", mu)?;
        check_positive("sigma", sigma)?;
        Ok(Self { mu, sigma, ln_sigma: sigma.ln() })
    }
    pub fn mu(&self) -> f64 {
        self.mu
    }
    pub fn sigma(&self) -> f64 {
        self.sigma
    }
}

impl Density for LogLogistic {
    fn ln_pdf_y(&self, y: f64) -> f64 {
        let z = ((y - self.mu) / self.sigma).abs();
        -z - 2.0 * (-z).exp().ln_1p() - self.ln_sigma
    }
    fn cdf_y(&self, y: f64) -> f64 {
        logistic((y - self.mu) / self.sigma)
    }
    fn sf_y(&self, y: f64) -> f64 {
        logistic(-(y - self.mu) / self.sigma)
    }
}

/// Log version of the non-standardized Student's t distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogStudent {
    mu: f64,
    sigma: f64,
    nu: f64,
    ln_norm: f64,
    ln_sigma: f64,
}

impl LogStudent {
    pub fn new(mu: f64, sigma: f64, nu: f64) -> Result<Self> {
        check_finite("mu", mu)?;
        check_positive("sigma", sigma)?;
        check_positive("nu", nu)?;
        let ln_norm = ln_gamma(0.5 * (nu + 1.0)) - ln_gamma(0.5 * nu) - 0.5 * (PI * nu).ln();
        Ok(Self { mu, sigma, nu, ln_norm, ln_sigma: sigma.ln() })
    }
    pub fn mu(&self) -> f64 {
        self.mu
    }
    pub fn sigma(&self) -> f64 {
        self.sigma
    }
    pub fn nu(&self) -> f64 {
        self.nu
    }

    /// The closed-form CDF `1/2 + c (y-μ) ₂F₁(1/2, (1+ν)/2; 3/2; -(y-μ)²/(νσ²))`.
    pub fn cdf_y_hypergeometric(&self, y: f64) -> f64 {
        let d = y - self.mu;
        let u = -d * d / (self.nu * self.sigma * self.sigma);
        let f = crate::special::gauss_2f1_student(u, self.nu).unwrap_or(f64::NAN);
        0.5 + self.ln_norm.exp() / self.sigma * d * f
    }
}

impl Density for LogStudent {
    fn ln_pdf_y(&self, y: f64) -> f64 {
        let t = (y - self.mu) / self.sigma;
        self.ln_norm - self.ln_sigma - 0.5 * (self.nu + 1.0) * (t * t / self.nu).ln_1p()
    }
    fn cdf_y(&self, y: f64) -> f64 {
        student_tail(self, y, false)
    }
    fn sf_y(&self, y: f64) -> f64 {
        student_tail(self, y, true)
    }
}

fn student_tail(d: &LogStudent, y: f64, upper: bool) -> f64 {
    let t = (y - d.mu) / d.sigma;
    let t2 = t * t;
    // x = ν/(ν+t²); tail mass beyond |t| is I_x(ν/2, 1/2) / 2.
    let x = d.nu / (d.nu + t2);
    let xc = t2 / (d.nu + t2);
    let (tail, _) = inc_beta_pair(x, xc, 0.5 * d.nu, 0.5);
    let half_tail = 0.5 * tail;
    if (t < 0.0) != upper {
        half_tail
    } else {
        1.0 - half_tail
    }
}

/// Numerically measured log-log slopes `d ln f_X / d ln x` of a density at
/// the given lower and upper log-sizes.
pub fn log_log_slopes<D: Density>(d: &D, y_low: f64, y_high: f64) -> (f64, f64) {
    let h = 1e-3;
    let slope = |y: f64| (d.ln_pdf_y(y + h) - d.ln_pdf_y(y - h)) / (2.0 * h) - 1.0;
    (slope(y_low), slope(y_high))
}
