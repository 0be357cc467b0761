//! Maps between natural parameters and the unconstrained search space.
//!
//! Scales and shape parameters go through `ln`; mixture weights through
//! stick-breaking logits with a floor of [`WEIGHT_FLOOR`] per component.

use crate::mixture::{BaseKind, Family};
use crate::special::logistic;

pub const WEIGHT_FLOOR: f64 = 1e-6;

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Natural weights `p₁ … p_{ℓ-1}` from stick-breaking logits.
pub fn weights_from_logits(eta: &[f64]) -> Vec<f64> {
    let ell = eta.len() + 1;
    let span = 1.0 - ell as f64 * WEIGHT_FLOOR;
    let mut rest = 1.0;
    eta.iter()
        .map(|&e| {
            let piece = rest * logistic(e);
            rest -= piece;
            WEIGHT_FLOOR + span * piece
        })
        .collect()
}

/// Inverse of [`weights_from_logits`]; weights at or below the floor are
/// nudged just inside it.
pub fn logits_from_weights(free: &[f64]) -> Vec<f64> {
    let ell = free.len() + 1;
    let span = 1.0 - ell as f64 * WEIGHT_FLOOR;
    let mut rest = 1.0;
    free.iter()
        .map(|&w| {
            let piece = ((w - WEIGHT_FLOOR) / span).max(1e-12 * span);
            let v = (piece / rest).clamp(1e-12, 1.0 - 1e-12);
            rest = (rest - piece).max(1e-300);
            logit(v)
        })
        .collect()
}

/// Natural-scale vector to the unconstrained `θ`.
pub fn to_theta(family: Family, natural: &[f64]) -> Vec<f64> {
    let p = natural;
    match family {
        Family::Ln => vec![p[0], p[1].ln()],
        Family::Dpln => vec![p[0].ln(), p[1].ln(), p[2], p[3].ln()],
        Family::Gb2 => vec![p[0].ln(), p[1].ln(), p[2].ln(), p[3].ln()],
        Family::Lnsnp => vec![p[0], p[1].ln(), p[2], p[3], p[4], p[5]],
        f => {
            let ell = f.ell();
            let mut t = Vec::with_capacity(p.len());
            for i in 0..ell {
                t.push(p[2 * i]);
                t.push(p[2 * i + 1].ln());
            }
            t.extend(logits_from_weights(&p[2 * ell..]));
            t
        }
    }
}

/// Unconstrained `θ` back to natural scale.
pub fn to_natural(family: Family, theta: &[f64]) -> Vec<f64> {
    let t = theta;
    match family {
        Family::Ln => vec![t[0], t[1].exp()],
        Family::Dpln => vec![t[0].exp(), t[1].exp(), t[2], t[3].exp()],
        Family::Gb2 => vec![t[0].exp(), t[1].exp(), t[2].exp(), t[3].exp()],
        Family::Lnsnp => vec![t[0], t[1].exp(), t[2], t[3], t[4], t[5]],
        f => {
            debug_assert!(matches!(
                f.base(),
                BaseKind::LogNormal | BaseKind::LogLogistic | BaseKind::LogStudent
            ));
            let ell = f.ell();
            let mut p = Vec::with_capacity(t.len());
            for i in 0..ell {
                p.push(t[2 * i]);
                p.push(t[2 * i + 1].exp());
            }
            p.extend(weights_from_logits(&t[2 * ell..]));
            p
        }
    }
}
