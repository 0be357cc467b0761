//! A model specification bound to concrete parameter values.

use serde::{Deserialize, Serialize};

use crate::distributions::Density;
use crate::error::{Error, Result};
use crate::mixture::{Component, Mixture, ModelSpec};
use crate::truncation::{TruncatedMixture, TruncationWindow};

#[derive(Debug, Clone, PartialEq)]
enum Body {
    Plain(Mixture),
    Truncated(TruncatedMixture),
}

/// Evaluable model: a spec, its natural-scale parameters and, for "tt"
/// specs, the truncation window.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    spec: ModelSpec,
    params: Vec<f64>,
    window: Option<TruncationWindow>,
    mixture: Mixture,
    body: Body,
}

impl Model {
    pub fn new(spec: ModelSpec, params: &[f64], window: Option<TruncationWindow>) -> Result<Self> {
        let mixture = spec.family.build(params)?;
        Self::from_mixture(spec, mixture, window)
    }

    pub fn from_mixture(
        spec: ModelSpec,
        mixture: Mixture,
        window: Option<TruncationWindow>,
    ) -> Result<Self> {
        let body = match (spec.truncated, window) {
            (true, Some(w)) => Body::Truncated(TruncatedMixture::new(&mixture, w)?),
            (false, None) => Body::Plain(mixture.clone()),
            (true, None) => {
                return Err(Error::InvalidParams(format!("{spec} needs a truncation window")))
            }
            (false, Some(_)) => {
                return Err(Error::InvalidParams(format!("{spec} is not a truncated model")))
            }
        };
        let params = spec.family.natural_params(&mixture);
        Ok(Self { spec, params, window, mixture, body })
    }

    pub fn spec(&self) -> ModelSpec {
        self.spec
    }
    pub fn params(&self) -> &[f64] {
        &self.params
    }
    pub fn window(&self) -> Option<TruncationWindow> {
        self.window
    }
    /// The untruncated mixture.
    pub fn mixture(&self) -> &Mixture {
        &self.mixture
    }

    /// False when an LNSNP density goes negative on its check grid.
    pub fn is_feasible(&self) -> bool {
        self.mixture.components().iter().all(|c| match c {
            Component::LogSnp(d) => d.is_feasible(),
            _ => true,
        })
    }

    /// Same model with LN/LL components sorted by location.
    pub fn canonicalize(&self) -> Result<Self> {
        Self::from_mixture(self.spec, self.mixture.canonicalize(), self.window)
    }

    /// `Σ ln f_Y(yᵢ)` over log-data.
    pub fn loglik_y(&self, ys: &[f64]) -> f64 {
        ys.iter().map(|&y| self.ln_pdf_y(y)).sum()
    }

    /// `Σ ln f_X(xᵢ)` over data in sales units.
    pub fn loglik(&self, xs: &[f64]) -> Result<f64> {
        xs.iter().map(|&x| self.ln_pdf(x)).sum()
    }
}

impl Density for Model {
    fn pdf_y(&self, y: f64) -> f64 {
        match &self.body {
            Body::Plain(m) => m.pdf_y(y),
            Body::Truncated(t) => t.pdf_y(y),
        }
    }
    fn ln_pdf_y(&self, y: f64) -> f64 {
        match &self.body {
            Body::Plain(m) => m.ln_pdf_y(y),
            Body::Truncated(t) => t.ln_pdf_y(y),
        }
    }
    fn cdf_y(&self, y: f64) -> f64 {
        match &self.body {
            Body::Plain(m) => m.cdf_y(y),
            Body::Truncated(t) => t.cdf_y(y),
        }
    }
    fn sf_y(&self, y: f64) -> f64 {
        match &self.body {
            Body::Plain(m) => m.sf_y(y),
            Body::Truncated(t) => t.sf_y(y),
        }
    }
}

/// Serializable snapshot of a [`Model`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRecord {
    pub model: ModelSpec,
    pub params: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<TruncationWindow>,
}

impl From<&Model> for ModelRecord {
    fn from(m: &Model) -> Self {
        Self { model: m.spec, params: m.params.clone(), window: m.window }
    }
}

impl TryFrom<&ModelRecord> for Model {
    type Error = Error;
    fn try_from(r: &ModelRecord) -> Result<Self> {
        Model::new(r.model, &r.params, r.window)
    }
}
