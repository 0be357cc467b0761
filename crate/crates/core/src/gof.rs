//! Goodness-of-fit distances (KS, CM, AD) and two-sample tests.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::Density;
use crate::error::{Error, Result};
use crate::sampling::RngStream;

/// Clamp applied to model probabilities inside the AD logarithms.
pub const AD_CLAMP: f64 = 1e-15;

/// One-sample statistics of a sorted sample against a model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GofReport {
    pub ks: f64,
    pub cm: f64,
    pub ad: f64,
    pub n: usize,
    /// Some model probability hit 0 or 1 and was clamped for AD.
    pub ad_clamped: bool,
}

/// `maxᵢ max(i/n - uᵢ, uᵢ - (i-1)/n)` over sorted model probabilities.
pub fn ks_from_u(u: &[f64]) -> f64 {
    let n = u.len() as f64;
    u.iter()
        .enumerate()
        .map(|(i, &v)| ((i + 1) as f64 / n - v).max(v - i as f64 / n))
        .fold(0.0, f64::max)
}

/// `1/(12n) + Σ ((2i-1)/(2n) - uᵢ)²`.
pub fn cm_from_u(u: &[f64]) -> f64 {
    let n = u.len() as f64;
    let s: f64 = u
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let d = (2 * i + 1) as f64 / (2.0 * n) - v;
            d * d
        })
        .sum();
    1.0 / (12.0 * n) + s
}

/// `-n - Σ (2i-1)/n [ln uᵢ + ln s_{n+1-i}]` where `s` are survival
/// probabilities. Returns the statistic and whether clamping occurred.
pub fn ad_from_u_s(u: &[f64], s: &[f64]) -> (f64, bool) {
    let n = u.len();
    let nf = n as f64;
    let mut clamped = false;
    let mut clamp = |v: f64| {
        if !(AD_CLAMP..=1.0 - AD_CLAMP).contains(&v) {
            clamped = true;
        }
        v.clamp(AD_CLAMP, 1.0 - AD_CLAMP)
    };
    let mut sum = 0.0;
    for i in 0..n {
        let lu = clamp(u[i]).ln();
        let ls = clamp(s[n - 1 - i]).ln();
        sum += (2 * i + 1) as f64 / nf * (lu + ls);
    }
    (-nf - sum, clamped)
}

/// AD from CDF values only, with `s = 1 - u`.
pub fn ad_from_u(u: &[f64]) -> (f64, bool) {
    let s: Vec<f64> = u.iter().map(|v| 1.0 - v).collect();
    ad_from_u_s(u, &s)
}

fn check_sorted(xs: &[f64]) -> Result<()> {
    if xs.is_empty() {
        return Err(Error::InvalidParams("empty sample".into()));
    }
    if xs.windows(2).any(|w| !(w[0] <= w[1])) {
        return Err(Error::InvalidParams("sample must be sorted ascending".into()));
    }
    Ok(())
}

/// KS statistic of sorted data against `cdf`.
pub fn ks_stat<F: Fn(f64) -> f64>(sorted: &[f64], cdf: F) -> Result<f64> {
    check_sorted(sorted)?;
    Ok(ks_from_u(&sorted.iter().map(|&x| cdf(x)).collect::<Vec<_>>()))
}

/// CM statistic of sorted data against `cdf`.
pub fn cm_stat<F: Fn(f64) -> f64>(sorted: &[f64], cdf: F) -> Result<f64> {
    check_sorted(sorted)?;
    Ok(cm_from_u(&sorted.iter().map(|&x| cdf(x)).collect::<Vec<_>>()))
}

/// AD statistic of sorted data against `cdf`, with the clamp flag.
pub fn ad_stat<F: Fn(f64) -> f64>(sorted: &[f64], cdf: F) -> Result<(f64, bool)> {
    check_sorted(sorted)?;
    Ok(ad_from_u(&sorted.iter().map(|&x| cdf(x)).collect::<Vec<_>>()))
}

/// All three statistics of sorted log-data against a model, using its
/// survival function for the upper-tail terms of AD.
pub fn gof_report<D: Density + Sync>(model: &D, sorted_ys: &[f64]) -> Result<GofReport> {
    check_sorted(sorted_ys)?;
    let (u, s): (Vec<f64>, Vec<f64>) =
        sorted_ys.par_iter().map(|&y| (model.cdf_y(y), model.sf_y(y))).unzip();
    let (ad, ad_clamped) = ad_from_u_s(&u, &s);
    Ok(GofReport { ks: ks_from_u(&u), cm: cm_from_u(&u), ad, n: u.len(), ad_clamped })
}

/// Two-sample statistics with permutation p-values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoSampleResult {
    pub ks: f64,
    pub cm: f64,
    pub ad: f64,
    pub p_ks: f64,
    pub p_cm: f64,
    pub p_ad: f64,
    pub n_a: usize,
    pub n_b: usize,
    pub n_perm: usize,
}

/// Pooled sample sorted once; labels are what get permuted.
struct Pooled {
    // sizes of runs of equal values, in ascending order
    groups: Vec<usize>,
    n_a: usize,
    n_b: usize,
}

impl Pooled {
    fn new(a: &[f64], b: &[f64]) -> (Self, Vec<bool>) {
        let mut all: Vec<(f64, bool)> =
            a.iter().map(|&v| (v, true)).chain(b.iter().map(|&v| (v, false))).collect();
        all.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
        let mut groups = Vec::new();
        let mut i = 0;
        while i < all.len() {
            let mut j = i + 1;
            while j < all.len() && all[j].0 == all[i].0 {
                j += 1;
            }
            groups.push(j - i);
            i = j;
        }
        let labels = all.iter().map(|p| p.1).collect();
        (Self { groups, n_a: a.len(), n_b: b.len() }, labels)
    }

    /// (KS, CM, AD) for one labelling of the pooled order.
    fn stats(&self, labels: &[bool]) -> (f64, f64, f64) {
        let (n, m) = (self.n_a as f64, self.n_b as f64);
        let big_n = n + m;
        let (mut ca, mut cb) = (0usize, 0usize);
        let (mut ks, mut cm, mut ad) = (0.0f64, 0.0, 0.0);
        let mut pos = 0;
        for &t in &self.groups {
            for &l in &labels[pos..pos + t] {
                if l {
                    ca += 1;
                } else {
                    cb += 1;
                }
            }
            pos += t;
            let d = ca as f64 / n - cb as f64 / m;
            let tw = t as f64;
            ks = ks.max(d.abs());
            cm += tw * d * d;
            let h = (ca + cb) as f64 / big_n;
            if h < 1.0 {
                ad += tw / big_n * d * d / (h * (1.0 - h));
            }
        }
        (ks, n * m / (big_n * big_n) * cm, n * m / big_n * ad)
    }
}

/// Two-sample KS, CM and AD statistics (no p-values).
pub fn two_sample_stats(a: &[f64], b: &[f64]) -> Result<(f64, f64, f64)> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidParams("two-sample tests need nonempty samples".into()));
    }
    let (pooled, labels) = Pooled::new(a, b);
    Ok(pooled.stats(&labels))
}

/// Two-sample tests with `n_perm` label shuffles; shuffle `i` uses
/// `RngStream(seed, i)`.
pub fn two_sample_tests(a: &[f64], b: &[f64], n_perm: usize, seed: u64) -> Result<TwoSampleResult> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidParams("two-sample tests need nonempty samples".into()));
    }
    let (pooled, labels) = Pooled::new(a, b);
    let (ks, cm, ad) = pooled.stats(&labels);
    let ge = |perm: f64, obs: f64| perm >= obs - 1e-12 * obs.abs();
    let counts = (0..n_perm)
        .into_par_iter()
        .map(|i| {
            let mut l = labels.clone();
            l.shuffle(&mut RngStream::new(seed, i as u64));
            let (pk, pc, pa) = pooled.stats(&l);
            [ge(pk, ks) as usize, ge(pc, cm) as usize, ge(pa, ad) as usize]
        })
        .reduce(|| [0; 3], |x, y| [x[0] + y[0], x[1] + y[1], x[2] + y[2]]);
    let p = |c: usize| (1 + c) as f64 / (n_perm + 1) as f64;
    Ok(TwoSampleResult {
        ks,
        cm,
        ad,
        p_ks: p(counts[0]),
        p_cm: p(counts[1]),
        p_ad: p(counts[2]),
        n_a: a.len(),
        n_b: b.len(),
        n_perm,
    })
}

/// Asymptotic Kolmogorov survival `P(√n D > λ)`.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 1.0 {
        // Theta-function form converges faster for small λ.
        let c = -std::f64::consts::PI.powi(2) / (8.0 * lambda * lambda);
        let s: f64 = (1..=50).map(|k| ((2 * k - 1) as f64).powi(2) * c).map(f64::exp).sum();
        let cdf = (2.0 * std::f64::consts::PI).sqrt() / lambda * s;
        return (1.0 - cdf).clamp(0.0, 1.0);
    }
    let mut s = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        s += if k % 2 == 1 { term } else { -term };
        if term < 1e-17 {
            break;
        }
    }
    (2.0 * s).clamp(0.0, 1.0)
}

/// Asymptotic one-sample KS p-value for statistic `d` at sample size `n`.
pub fn ks_pvalue(d: f64, n: usize) -> f64 {
    kolmogorov_sf((n as f64).sqrt() * d)
}
