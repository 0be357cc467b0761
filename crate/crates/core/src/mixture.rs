//! Finite mixtures over a shared base family and the catalogue of the 17
//! model specifications.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::distributions::{
    Density, DoubleParetoLogNormal, Gb2, LogLogistic, LogNormal, LogSnp, LogStudent,
};
use crate::error::{Error, Result};
use crate::special::log_add_exp;

/// One mixture component (or a whole single-family model).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Component {
    LogNormal(LogNormal),
    Dpln(DoubleParetoLogNormal),
    Gb2(Gb2),
    LogSnp(LogSnp),
    LogLogistic(LogLogistic),
    LogStudent(LogStudent),
}

impl Component {
    /// Location `μ` for the location-scale families.
    pub fn location(&self) -> Option<f64> {
        match self {
            Component::LogNormal(d) => Some(d.mu()),
            Component::LogLogistic(d) => Some(d.mu()),
            Component::LogStudent(d) => Some(d.mu()),
            Component::LogSnp(d) => Some(d.mu()),
            Component::Dpln(d) => Some(d.mu()),
            Component::Gb2(_) => None,
        }
    }
}

macro_rules! dispatch {
    ($self:ident, $d:ident => $e:expr) => {
        match $self {
            Component::LogNormal($d) => $e,
            Component::Dpln($d) => $e,
            Component::Gb2($d) => $e,
            Component::LogSnp($d) => $e,
            Component::LogLogistic($d) => $e,
            Component::LogStudent($d) => $e,
        }
    };
}

impl Density for Component {
    fn pdf_y(&self, y: f64) -> f64 {
        dispatch!(self, d => d.pdf_y(y))
    }
    fn ln_pdf_y(&self, y: f64) -> f64 {
        dispatch!(self, d => d.ln_pdf_y(y))
    }
    fn cdf_y(&self, y: f64) -> f64 {
        dispatch!(self, d => d.cdf_y(y))
    }
    fn sf_y(&self, y: f64) -> f64 {
        dispatch!(self, d => d.sf_y(y))
    }
}

/// A convex combination of components.
///
/// Weights are stored for all `ℓ` components; the free parameters
/// `p₁ … p_{ℓ-1}` are the first `ℓ-1` of them.
#[derive(Debug, Clone, PartialEq)]
pub struct Mixture {
    components: Vec<Component>,
    weights: Vec<f64>,
    ln_weights: Vec<f64>,
}

impl Mixture {
    /// Builds a mixture from all `ℓ` weights, which must be non-negative and
    /// sum to one.
    pub fn new(components: Vec<Component>, weights: Vec<f64>) -> Result<Self> {
        if components.is_empty() || components.len() != weights.len() {
            return Err(Error::InvalidParams(format!(
                "{} components with {} weights",
                components.len(),
                weights.len()
            )));
        }
        if weights.iter().any(|w| !(0.0..=1.0).contains(w)) {
            return Err(Error::InvalidParams(format!("weights outside [0,1]: {weights:?}")));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParams(format!("weights sum to {total}, not 1")));
        }
        let ln_weights = weights.iter().map(|w| w.ln()).collect();
        Ok(Self { components, weights, ln_weights })
    }

    /// Builds a mixture from the free weights `p₁ … p_{ℓ-1}`; the last weight
    /// is `1 - Σ pⱼ`.
    pub fn from_free_weights(components: Vec<Component>, free: &[f64]) -> Result<Self> {
        if free.len() + 1 != components.len() {
            return Err(Error::InvalidParams(format!(
                "{} components need {} free weights, got {}",
                components.len(),
                components.len() - 1,
                free.len()
            )));
        }
        let mut weights = free.to_vec();
        let rest = 1.0 - free.iter().sum::<f64>();
        // Tolerate rounding just below zero.
        weights.push(if (-1e-13..0.0).contains(&rest) { 0.0 } else { rest });
        Self::new(components, weights)
    }

    pub fn single(component: Component) -> Self {
        Self { components: vec![component], weights: vec![1.0], ln_weights: vec![0.0] }
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
    pub fn len(&self) -> usize {
        self.components.len()
    }
    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    /// Sorts LN and LL mixtures by ascending `μ`, carrying the weights along.
    /// Student mixtures keep their fixed-ν order; other families are
    /// single-component and unchanged.
    pub fn canonicalize(&self) -> Mixture {
        let sortable = self.components.len() > 1
            && self
                .components
                .iter()
                .all(|c| matches!(c, Component::LogNormal(_) | Component::LogLogistic(_)));
        if !sortable {
            return self.clone();
        }
        let mut order: Vec<usize> = (0..self.components.len()).collect();
        order.sort_by(|&i, &j| {
            let (a, b) = (self.components[i].location(), self.components[j].location());
            a.partial_cmp(&b).unwrap_or(std::cmp::Ordering::Equal)
        });
        Mixture {
            components: order.iter().map(|&i| self.components[i]).collect(),
            weights: order.iter().map(|&i| self.weights[i]).collect(),
            ln_weights: order.iter().map(|&i| self.ln_weights[i]).collect(),
        }
    }
}

impl Density for Mixture {
    fn pdf_y(&self, y: f64) -> f64 {
        self.components.iter().zip(&self.weights).map(|(c, w)| w * c.pdf_y(y)).sum()
    }

    fn ln_pdf_y(&self, y: f64) -> f64 {
        if self.components.len() == 1 {
            return self.components[0].ln_pdf_y(y);
        }
        // Max-shifted log-sum-exp.
        let mut terms = [f64::NEG_INFINITY; 8];
        let mut hi = f64::NEG_INFINITY;
        if self.components.len() <= terms.len() {
            for (i, (c, lw)) in self.components.iter().zip(&self.ln_weights).enumerate() {
                let v = lw + c.ln_pdf_y(y);
                terms[i] = v;
                hi = hi.max(v);
            }
            if hi == f64::NEG_INFINITY || hi.is_nan() {
                return hi;
            }
            let s: f64 = terms[..self.components.len()].iter().map(|t| (t - hi).exp()).sum();
            return hi + s.ln();
        }
        self.components
            .iter()
            .zip(&self.ln_weights)
            .fold(f64::NEG_INFINITY, |acc, (c, lw)| log_add_exp(acc, lw + c.ln_pdf_y(y)))
    }

    fn cdf_y(&self, y: f64) -> f64 {
        self.components.iter().zip(&self.weights).map(|(c, w)| w * c.cdf_y(y)).sum()
    }

    fn sf_y(&self, y: f64) -> f64 {
        self.components.iter().zip(&self.weights).map(|(c, w)| w * c.sf_y(y)).sum()
    }
}

/// Base family shared by the components of a model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaseKind {
    LogNormal,
    Dpln,
    Gb2,
    LogSnp,
    LogLogistic,
    LogStudent,
}

/// The 17 model families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Family {
    #[serde(rename = "LN")]
    Ln,
    #[serde(rename = "DPLN")]
    Dpln,
    #[serde(rename = "GB2")]
    Gb2,
    #[serde(rename = "LNSNP")]
    Lnsnp,
    #[serde(rename = "2LN")]
    Ln2,
    #[serde(rename = "3LN")]
    Ln3,
    #[serde(rename = "4LN")]
    Ln4,
    #[serde(rename = "5LN")]
    Ln5,
    #[serde(rename = "2LL")]
    Ll2,
    #[serde(rename = "3LL")]
    Ll3,
    #[serde(rename = "4LL")]
    Ll4,
    #[serde(rename = "5LL")]
    Ll5,
    #[serde(rename = "2LSt12")]
    LSt2Nu12,
    #[serde(rename = "2LSt39")]
    LSt2Nu39,
    #[serde(rename = "3LSt")]
    LSt3,
    #[serde(rename = "4LSt")]
    LSt4,
    #[serde(rename = "5LSt")]
    LSt5,
}

impl Family {
    /// All families in table order.
    pub const ALL: [Family; 17] = [
        Family::Ln,
        Family::Dpln,
        Family::Gb2,
        Family::Lnsnp,
        Family::Ln2,
        Family::Ln3,
        Family::Ln4,
        Family::Ln5,
        Family::Ll2,
        Family::Ll3,
        Family::Ll4,
        Family::Ll5,
        Family::LSt2Nu12,
        Family::LSt2Nu39,
        Family::LSt3,
        Family::LSt4,
        Family::LSt5,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::Ln => "LN",
            Family::Dpln => "DPLN",
            Family::Gb2 => "GB2",
            Family::Lnsnp => "LNSNP",
            Family::Ln2 => "2LN",
            Family::Ln3 => "3LN",
            Family::Ln4 => "4LN",
            Family::Ln5 => "5LN",
            Family::Ll2 => "2LL",
            Family::Ll3 => "3LL",
            Family::Ll4 => "4LL",
            Family::Ll5 => "5LL",
            Family::LSt2Nu12 => "2LSt12",
            Family::LSt2Nu39 => "2LSt39",
            Family::LSt3 => "3LSt",
            Family::LSt4 => "4LSt",
            Family::LSt5 => "5LSt",
        }
    }

    pub fn base(self) -> BaseKind {
        match self {
            Family::Ln | Family::Ln2 | Family::Ln3 | Family::Ln4 | Family::Ln5 => BaseKind::LogNormal,
            Family::Dpln => BaseKind::Dpln,
            Family::Gb2 => BaseKind::Gb2,
            Family::Lnsnp => BaseKind::LogSnp,
            Family::Ll2 | Family::Ll3 | Family::Ll4 | Family::Ll5 => BaseKind::LogLogistic,
            Family::LSt2Nu12 | Family::LSt2Nu39 | Family::LSt3 | Family::LSt4 | Family::LSt5 => {
                BaseKind::LogStudent
            }
        }
    }

    /// Number of components `ℓ`.
    pub fn ell(self) -> usize {
        match self {
            Family::Ln | Family::Dpln | Family::Gb2 | Family::Lnsnp => 1,
            Family::Ln2 | Family::Ll2 | Family::LSt2Nu12 | Family::LSt2Nu39 => 2,
            Family::Ln3 | Family::Ll3 | Family::LSt3 => 3,
            Family::Ln4 | Family::Ll4 | Family::LSt4 => 4,
            Family::Ln5 | Family::Ll5 | Family::LSt5 => 5,
        }
    }

    /// Degrees of freedom fixed a priori for the log-Student mixtures.
    pub fn fixed_nus(self) -> &'static [f64] {
        match self {
            Family::LSt2Nu12 => &[4.0, 12.0],
            Family::LSt2Nu39 => &[4.0, 39.0],
            Family::LSt3 => &[4.0, 12.0, 39.0],
            Family::LSt4 => &[4.0, 12.0, 39.0, 100.0],
            Family::LSt5 => &[4.0, 12.0, 39.0, 100.0, 200.0],
            _ => &[],
        }
    }

    /// Number of free parameters `k`.
    pub fn k(self) -> usize {
        match self {
            Family::Ln => 2,
            Family::Dpln | Family::Gb2 => 4,
            Family::Lnsnp => 6,
            other => 3 * other.ell() - 1,
        }
    }

    /// Natural-scale parameter names in storage order.
    pub fn param_names(self) -> Vec<String> {
        match self {
            Family::Ln => vec!["mu".into(), "sigma".into()],
            Family::Dpln => ["alpha", "beta", "mu", "sigma"].iter().map(|s| s.to_string()).collect(),
            Family::Gb2 => ["a", "b", "p", "q"].iter().map(|s| s.to_string()).collect(),
            Family::Lnsnp => ["mu", "sigma", "d1", "d2", "d3", "d4"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
            other => {
                let ell = other.ell();
                let mut names = Vec::with_capacity(3 * ell - 1);
                for i in 1..=ell {
                    names.push(format!("mu{i}"));
                    names.push(format!("sigma{i}"));
                }
                for j in 1..ell {
                    names.push(format!("p{j}"));
                }
                names
            }
        }
    }

    /// Builds the mixture for a natural-scale parameter vector laid out as in
    /// [`Family::param_names`].
    pub fn build(self, params: &[f64]) -> Result<Mixture> {
        if params.len() != self.k() {
            return Err(Error::InvalidParams(format!(
                "{} expects {} parameters, got {}",
                self.name(),
                self.k(),
                params.len()
            )));
        }
        let p = params;
        match self {
            Family::Ln => Ok(Mixture::single(Component::LogNormal(LogNormal::new(p[0], p[1])?))),
            Family::Dpln => Ok(Mixture::single(Component::Dpln(DoubleParetoLogNormal::new(
                p[0], p[1], p[2], p[3],
            )?))),
            Family::Gb2 => Ok(Mixture::single(Component::Gb2(Gb2::new(p[0], p[1], p[2], p[3])?))),
            Family::Lnsnp => Ok(Mixture::single(Component::LogSnp(LogSnp::new(
                p[0],
                p[1],
                [p[2], p[3], p[4], p[5]],
            )?))),
            other => {
                let ell = other.ell();
                let nus = other.fixed_nus();
                let mut comps = Vec::with_capacity(ell);
                for i in 0..ell {
                    let (mu, sigma) = (p[2 * i], p[2 * i + 1]);
                    comps.push(match other.base() {
                        BaseKind::LogNormal => Component::LogNormal(LogNormal::new(mu, sigma)?),
                        BaseKind::LogLogistic => Component::LogLogistic(LogLogistic::new(mu, sigma)?),
                        BaseKind::LogStudent => {
                            Component::LogStudent(LogStudent::new(mu, sigma, nus[i])?)
                        }
                        _ => unreachable!("single-component families handled above"),
                    });
                }
                Mixture::from_free_weights(comps, &p[2 * ell..])
            }
        }
    }

    /// Inverse of [`Family::build`].
    pub fn natural_params(self, m: &Mixture) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.k());
        for c in m.components() {
            match c {
                Component::LogNormal(d) => out.extend([d.mu(), d.sigma()]),
                Component::LogLogistic(d) => out.extend([d.mu(), d.sigma()]),
                Component::LogStudent(d) => out.extend([d.mu(), d.sigma()]),
                Component::Dpln(d) => out.extend([d.alpha(), d.beta(), d.mu(), d.sigma()]),
                Component::Gb2(d) => out.extend([d.a(), d.b(), d.p(), d.q()]),
                Component::LogSnp(d) => {
                    out.extend([d.mu(), d.sigma()]);
                    out.extend(d.coefficients());
                }
            }
        }
        if m.len() > 1 {
            out.extend(&m.weights()[..m.len() - 1]);
        }
        out
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .iter()
            .copied()
            .find(|f| f.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Parse(format!("unknown model family '{s}'")))
    }
}

/// A family, optionally doubly truncated ("tt").
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ModelSpec {
    pub family: Family,
    pub truncated: bool,
}

impl ModelSpec {
    pub fn new(family: Family) -> Self {
        Self { family, truncated: false }
    }
    pub fn truncated(family: Family) -> Self {
        Self { family, truncated: true }
    }
    pub fn name(&self) -> String {
        if self.truncated {
            format!("{}tt", self.family.name())
        } else {
            self.family.name().to_string()
        }
    }
    pub fn k(&self) -> usize {
        self.family.k()
    }
    pub fn ell(&self) -> usize {
        self.family.ell()
    }
    pub fn fixed_nus(&self) -> &'static [f64] {
        self.family.fixed_nus()
    }

    /// All 17 specifications, untruncated or truncated.
    pub fn all(truncated: bool) -> Vec<ModelSpec> {
        Family::ALL.iter().map(|&family| ModelSpec { family, truncated }).collect()
    }
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for ModelSpec {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        if let Ok(family) = s.parse::<Family>() {
            return Ok(ModelSpec::new(family));
        }
        match s.strip_suffix("tt") {
            Some(base) => Ok(ModelSpec::truncated(base.parse()?)),
            None => Err(Error::Parse(format!("unknown model '{s}'"))),
        }
    }
}

impl Serialize for ModelSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.name())
    }
}

impl<'de> Deserialize<'de> for ModelSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
