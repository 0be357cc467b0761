//! Doubly truncated ("tt") models.
//!
//! Mixtures are truncated component by component and then recombined with
//! the original weights.

use serde::{Deserialize, Serialize};

use crate::distributions::Density;
use crate::error::{Error, Result};
use crate::mixture::{Component, Mixture};

/// Smallest window mass accepted before [`Error::MassTooSmall`].
pub const MIN_MASS: f64 = 1e-300;

/// Support restriction `[a, b]` in sales units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawWindow")]
pub struct TruncationWindow {
    a: f64,
    b: f64,
}

#[derive(Deserialize)]
struct RawWindow {
    a: f64,
    b: f64,
}

impl TryFrom<RawWindow> for TruncationWindow {
    type Error = Error;
    fn try_from(w: RawWindow) -> Result<Self> {
        Self::new(w.a, w.b)
    }
}

impl TruncationWindow {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0 && a < b && b.is_finite()) {
            return Err(Error::InvalidParams(format!("window needs 0 < a < b < inf, got [{a}, {b}]")));
        }
        Ok(Self { a, b })
    }

    /// `[1e-300, 1e300]`, numerically the whole positive half-line.
    pub fn unbounded() -> Self {
        Self { a: 1e-300, b: 1e300 }
    }

    pub fn a(&self) -> f64 {
        self.a
    }
    pub fn b(&self) -> f64 {
        self.b
    }
    pub fn y_min(&self) -> f64 {
        self.a.ln()
    }
    pub fn y_max(&self) -> f64 {
        self.b.ln()
    }
    pub fn contains(&self, x: f64) -> bool {
        x >= self.a && x <= self.b
    }
}

/// Probability mass of `d` on `[ya, yb]`, taken from whichever tail keeps
/// precision.
pub(crate) fn window_mass<D: Density>(d: &D, ya: f64, yb: f64) -> (f64, f64, bool) {
    let lo = d.cdf_y(ya);
    if lo > 0.5 {
        let s_lo = d.sf_y(ya);
        (s_lo - d.sf_y(yb), s_lo, true)
    } else {
        (d.cdf_y(yb) - lo, lo, false)
    }
}

/// A single density restricted to a window and renormalized.
#[derive(Debug, Clone, PartialEq)]
pub struct Truncated<D> {
    base: D,
    window: TruncationWindow,
    ya: f64,
    yb: f64,
    mass: f64,
    ln_mass: f64,
    // F(ya), or S(ya) when `upper` is set.
    anchor: f64,
    upper: bool,
}

impl<D: Density> Truncated<D> {
    pub fn new(base: D, window: TruncationWindow) -> Result<Self> {
        let (ya, yb) = (window.y_min(), window.y_max());
        let (mass, anchor, upper) = window_mass(&base, ya, yb);
        if !(mass > MIN_MASS) {
            return Err(Error::MassTooSmall { mass });
        }
        Ok(Self { base, window, ya, yb, mass, ln_mass: mass.ln(), anchor, upper })
    }

    pub fn base(&self) -> &D {
        &self.base
    }
    pub fn window(&self) -> TruncationWindow {
        self.window
    }
    /// `F(b) - F(a)` of the base density.
    pub fn mass(&self) -> f64 {
        self.mass
    }
}

impl<D: Density> Density for Truncated<D> {
    fn pdf_y(&self, y: f64) -> f64 {
        if y < self.ya || y > self.yb {
            return 0.0;
        }
        self.base.pdf_y(y) / self.mass
    }

    fn ln_pdf_y(&self, y: f64) -> f64 {
        if y < self.ya || y > self.yb {
            return f64::NEG_INFINITY;
        }
        self.base.ln_pdf_y(y) - self.ln_mass
    }

    fn cdf_y(&self, y: f64) -> f64 {
        if y <= self.ya {
            return 0.0;
        }
        if y >= self.yb {
            return 1.0;
        }
        let num = if self.upper {
            self.anchor - self.base.sf_y(y)
        } else {
            self.base.cdf_y(y) - self.anchor
        };
        (num / self.mass).clamp(0.0, 1.0)
    }

    fn sf_y(&self, y: f64) -> f64 {
        if y <= self.ya {
            return 1.0;
        }
        if y >= self.yb {
            return 0.0;
        }
        let num = if self.upper {
            self.base.sf_y(y) - (self.anchor - self.mass)
        } else {
            (self.anchor + self.mass) - self.base.cdf_y(y)
        };
        (num / self.mass).clamp(0.0, 1.0)
    }
}

/// Truncated density of `base` at `x` (sales units).
pub fn truncate_pdf<D: Density>(base: &D, window: TruncationWindow, x: f64) -> Result<f64> {
    let t = Truncated::new(base, window)?;
    if !window.contains(x) {
        return Ok(0.0);
    }
    t.pdf(x)
}

impl<D: Density + ?Sized> Density for &D {
    fn pdf_y(&self, y: f64) -> f64 {
        (**self).pdf_y(y)
    }
    fn ln_pdf_y(&self, y: f64) -> f64 {
        (**self).ln_pdf_y(y)
    }
    fn cdf_y(&self, y: f64) -> f64 {
        (**self).cdf_y(y)
    }
    fn sf_y(&self, y: f64) -> f64 {
        (**self).sf_y(y)
    }
}

/// Mixture whose components are truncated individually before mixing.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedMixture {
    parts: Vec<Truncated<Component>>,
    weights: Vec<f64>,
    ln_weights: Vec<f64>,
    window: TruncationWindow,
}

impl TruncatedMixture {
    pub fn new(mixture: &Mixture, window: TruncationWindow) -> Result<Self> {
        let parts = mixture
            .components()
            .iter()
            .map(|c| Truncated::new(*c, window))
            .collect::<Result<Vec<_>>>()?;
        let weights = mixture.weights().to_vec();
        let ln_weights = weights.iter().map(|w| w.ln()).collect();
        Ok(Self { parts, weights, ln_weights, window })
    }

    pub fn parts(&self) -> &[Truncated<Component>] {
        &self.parts
    }
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
    pub fn window(&self) -> TruncationWindow {
        self.window
    }
}

impl Density for TruncatedMixture {
    fn pdf_y(&self, y: f64) -> f64 {
        self.parts.iter().zip(&self.weights).map(|(c, w)| w * c.pdf_y(y)).sum()
    }

    fn ln_pdf_y(&self, y: f64) -> f64 {
        if self.parts.len() == 1 {
            return self.parts[0].ln_pdf_y(y);
        }
        let mut hi = f64::NEG_INFINITY;
        let mut terms = Vec::with_capacity(self.parts.len());
        for (c, lw) in self.parts.iter().zip(&self.ln_weights) {
            let v = lw + c.ln_pdf_y(y);
            hi = hi.max(v);
            terms.push(v);
        }
        if hi == f64::NEG_INFINITY || hi.is_nan() {
            return hi;
        }
        hi + terms.iter().map(|t| (t - hi).exp()).sum::<f64>().ln()
    }

    fn cdf_y(&self, y: f64) -> f64 {
        self.parts.iter().zip(&self.weights).map(|(c, w)| w * c.cdf_y(y)).sum()
    }

    fn sf_y(&self, y: f64) -> f64 {
        self.parts.iter().zip(&self.weights).map(|(c, w)| w * c.sf_y(y)).sum()
    }
}

/// Rounding applied to `n * frac` when counting dropped observations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Rounding {
    #[default]
    Floor,
    Ceil,
    Round,
}

impl Rounding {
    pub fn apply(self, v: f64) -> usize {
        let r = match self {
            Rounding::Floor => v.floor(),
            Rounding::Ceil => v.ceil(),
            Rounding::Round => v.round(),
        };
        r.max(0.0) as usize
    }
}

/// Result of [`empirical_window`].
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalWindow {
    pub window: TruncationWindow,
    pub survivors: Vec<f64>,
    pub dropped_low: usize,
    pub dropped_high: usize,
}

/// Drops the `n·lower_frac` smallest and `n·upper_frac` largest observations
/// of an ascending sample; the window is spanned by the survivors.
pub fn empirical_window(
    sorted: &[f64],
    lower_frac: f64,
    upper_frac: f64,
    rounding: Rounding,
) -> Result<EmpiricalWindow> {
    if !(lower_frac >= 0.0 && upper_frac >= 0.0 && lower_frac + upper_frac < 1.0) {
        return Err(Error::InvalidParams(format!(
            "fractions must satisfy 0 <= lower + upper < 1, got {lower_frac} and {upper_frac}"
        )));
    }
    if sorted.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidParams("sample must be sorted ascending".into()));
    }
    let n = sorted.len();
    let low = rounding.apply(n as f64 * lower_frac);
    let high = rounding.apply(n as f64 * upper_frac);
    if low + high >= n {
        return Err(Error::EmptyAfterCleaning);
    }
    let survivors = sorted[low..n - high].to_vec();
    let window = TruncationWindow::new(survivors[0], survivors[survivors.len() - 1])?;
    Ok(EmpiricalWindow { window, survivors, dropped_low: low, dropped_high: high })
}
