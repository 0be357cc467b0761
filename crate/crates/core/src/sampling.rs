//! Random generation from every model and its truncated variant.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Gamma, StandardNormal, StudentT};

use crate::distributions::Density;
use crate::error::{Error, Result};
use crate::mixture::{Component, Mixture, ModelSpec};
use crate::truncation::{window_mass, TruncationWindow, MIN_MASS};

/// Seeded, splittable random stream: `(seed, stream_id)` fixes the sequence.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        Self { seed, stream_id, rng }
    }
    pub fn seed(&self) -> u64 {
        self.seed
    }
    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Uniform draw on the open interval `(0, 1)`.
    pub fn open01(&mut self) -> f64 {
        ((self.rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }
    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }
    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

// Attempts before the LNSNP acceptance rate is judged.
const REJECTION_PROBE: usize = 10_000;
const MIN_ACCEPTANCE: f64 = 1e-3;
// Rejection from the parent is used for truncated draws above this mass.
const REJECTION_MASS: f64 = 0.25;

fn ln_gamma_variate(shape: f64, rng: &mut RngStream) -> f64 {
    // Boost small shapes so the log does not underflow:
    // G_p = G_{p+1} U^{1/p}.
    if shape < 1.0 {
        let g: f64 = Gamma::new(shape + 1.0, 1.0).expect("positive shape").sample(rng);
        g.ln() + rng.open01().ln() / shape
    } else {
        let g: f64 = Gamma::new(shape, 1.0).expect("positive shape").sample(rng);
        g.ln()
    }
}

/// One draw of `y = ln x` from a single component.
pub fn sample_component_y(c: &Component, rng: &mut RngStream) -> Result<f64> {
    Ok(match c {
        Component::LogNormal(d) => {
            let z: f64 = StandardNormal.sample(rng);
            d.mu() + d.sigma() * z
        }
        Component::Dpln(d) => {
            let z: f64 = StandardNormal.sample(rng);
            let e1: f64 = Exp1.sample(rng);
            let e2: f64 = Exp1.sample(rng);
            d.mu() + d.sigma() * z + e1 / d.alpha() - e2 / d.beta()
        }
        Component::Gb2(d) => {
            let gp = ln_gamma_variate(d.p(), rng);
            let gq = ln_gamma_variate(d.q(), rng);
            d.b().ln() + (gp - gq) / d.a()
        }
        Component::LogLogistic(d) => {
            let u = rng.open01();
            d.mu() + d.sigma() * (u / (1.0 - u)).ln()
        }
        Component::LogStudent(d) => {
            let t: f64 = StudentT::new(d.nu())
                .map_err(|e| Error::InvalidParams(e.to_string()))?
                .sample(rng);
            d.mu() + d.sigma() * t
        }
        Component::LogSnp(d) => {
            let mut out = [0.0];
            sample_lnsnp_into(d, &mut out, rng)?;
            out[0]
        }
    })
}

fn sample_lnsnp_into(
    d: &crate::distributions::LogSnp,
    out: &mut [f64],
    rng: &mut RngStream,
) -> Result<()> {
    if !d.is_feasible() {
        return Err(Error::InvalidParams("LNSNP coefficients give a negative density".into()));
    }
    let envelope = d.polynomial_max() * 1.01;
    let mut tried = 0usize;
    let mut accepted = 0usize;
    for slot in out.iter_mut() {
        loop {
            let z: f64 = StandardNormal.sample(rng);
            tried += 1;
            if rng.random::<f64>() * envelope <= d.polynomial(z) {
                accepted += 1;
                *slot = d.mu() + d.sigma() * z;
                break;
            }
            if tried >= REJECTION_PROBE && (accepted as f64) < MIN_ACCEPTANCE * tried as f64 {
                return Err(Error::RejectionBudget { rate: accepted as f64 / tried as f64 });
            }
        }
    }
    Ok(())
}

fn pick(cum: &[f64], rng: &mut RngStream) -> usize {
    let u: f64 = rng.random();
    cum.iter().position(|&c| u < c).unwrap_or(cum.len() - 1)
}

fn cumulative(weights: &[f64]) -> Vec<f64> {
    weights
        .iter()
        .scan(0.0, |acc, w| {
            *acc += w;
            Some(*acc)
        })
        .collect()
}

/// `n` draws of `y = ln x` from a mixture.
pub fn sample_mixture_y(m: &Mixture, n: usize, rng: &mut RngStream) -> Result<Vec<f64>> {
    let cum = cumulative(m.weights());
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let i = if m.len() == 1 { 0 } else { pick(&cum, rng) };
        out.push(sample_component_y(&m.components()[i], rng)?);
    }
    Ok(out)
}

/// `n` i.i.d. draws in sales units.
pub fn sample(spec: ModelSpec, params: &[f64], n: usize, rng: &mut RngStream) -> Result<Vec<f64>> {
    let m = spec.family.build(params)?;
    Ok(sample_mixture_y(&m, n, rng)?.into_iter().map(f64::exp).collect())
}

/// Inverse of `cdf_y` on `[lo, hi]` by bisection; `upper` selects the
/// survival function as the monotone target.
pub fn solve_quantile_y<D: Density>(d: &D, target: f64, upper: bool, lo: f64, hi: f64) -> f64 {
    let (mut lo, mut hi) = (lo, hi);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let below = if upper { d.sf_y(mid) > target } else { d.cdf_y(mid) < target };
        if below {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Quantile of `d` at probability `p`, searching outward for a bracket.
pub fn quantile_y<D: Density>(d: &D, p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain(format!("probability must lie in (0,1), got {p}")));
    }
    let (mut lo, mut hi) = (-1.0, 1.0);
    while d.cdf_y(lo) > p {
        lo *= 2.0;
        if lo < -1e6 {
            return Err(Error::Domain(format!("no lower bracket for p = {p}")));
        }
    }
    while d.cdf_y(hi) < p {
        hi *= 2.0;
        if hi > 1e6 {
            return Err(Error::Domain(format!("no upper bracket for p = {p}")));
        }
    }
    Ok(solve_quantile_y(d, p, false, lo, hi))
}

fn sample_component_truncated_y(
    c: &Component,
    ya: f64,
    yb: f64,
    n: usize,
    rng: &mut RngStream,
    out: &mut Vec<f64>,
) -> Result<()> {
    let (mass, anchor, upper) = window_mass(c, ya, yb);
    if !(mass > MIN_MASS) {
        return Err(Error::MassTooSmall { mass });
    }
    if mass >= REJECTION_MASS && !matches!(c, Component::LogSnp(_)) {
        for _ in 0..n {
            loop {
                let y = sample_component_y(c, rng)?;
                if y >= ya && y <= yb {
                    out.push(y);
                    break;
                }
            }
        }
    } else {
        for _ in 0..n {
            let u = rng.open01();
            let target = if upper { anchor - u * mass } else { anchor + u * mass };
            out.push(solve_quantile_y(c, target, upper, ya, yb));
        }
    }
    Ok(())
}

/// `n` draws of `y` from the component-wise truncated mixture.
pub fn sample_truncated_mixture_y(
    m: &Mixture,
    window: TruncationWindow,
    n: usize,
    rng: &mut RngStream,
) -> Result<Vec<f64>> {
    let (ya, yb) = (window.y_min(), window.y_max());
    let cum = cumulative(m.weights());
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let i = if m.len() == 1 { 0 } else { pick(&cum, rng) };
        sample_component_truncated_y(&m.components()[i], ya, yb, 1, rng, &mut out)?;
    }
    Ok(out)
}

/// `n` draws in `[a, b]` from the "tt" version of `spec`.
pub fn sample_truncated(
    spec: ModelSpec,
    params: &[f64],
    window: TruncationWindow,
    n: usize,
    rng: &mut RngStream,
) -> Result<Vec<f64>> {
    let m = spec.family.build(params)?;
    let ys = sample_truncated_mixture_y(&m, window, n, rng)?;
    // keep exp rounding inside the window
    Ok(ys.into_iter().map(|y| y.exp().clamp(window.a(), window.b())).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mixture::Family;
    use crate::truncation::TruncatedMixture;

    fn ks_y<D: Density>(d: &D, mut ys: Vec<f64>) -> f64 {
        ys.sort_by(f64::total_cmp);
        let n = ys.len() as f64;
        ys.iter()
            .enumerate()
            .map(|(i, &y)| {
                let u = d.cdf_y(y);
                ((i + 1) as f64 / n - u).max(u - i as f64 / n)
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: Vec<u64> = (0..5).map(|_| RngStream::new(7, 3).next_u64()).collect();
        assert!(a.windows(2).all(|w| w[0] == w[1]));
        let mut s = RngStream::new(7, 3);
        let mut t = RngStream::new(7, 4);
        assert_ne!(s.next_u64(), t.next_u64());
    }

    #[test]
    fn lognormal_mean_in_clt_band() {
        let mut rng = RngStream::new(1, 0);
        let xs = sample(ModelSpec::new(Family::Ln), &[0.0, 1.0], 1_000_000, &mut rng).unwrap();
        let mean = xs.iter().map(|x| x.ln()).sum::<f64>() / xs.len() as f64;
        assert!(mean.abs() < 4.0 / 1000.0);
    }

    #[test]
    fn dpln_matches_cdf() {
        let params = [2.0, 1.0, 0.0, 0.5];
        let m = Family::Dpln.build(&params).unwrap();
        let ys = sample_mixture_y(&m, 100_000, &mut RngStream::new(2, 0)).unwrap();
        let d = ks_y(&m, ys);
        assert!(d < 1.63 / (1e5f64).sqrt(), "KS {d}");
    }

    #[test]
    fn every_family_matches_its_cdf() {
        let cases: Vec<(Family, Vec<f64>)> = vec![
            (Family::Ln, vec![1.0, 0.8]),
            (Family::Dpln, vec![1.5, 3.0, 2.0, 0.7]),
            (Family::Gb2, vec![2.0, 20.0, 0.6, 1.4]),
            (Family::Lnsnp, vec![1.0, 0.9, 0.1, 0.05, -0.02, 0.01]),
            (Family::Ln3, vec![1.0, 0.5, 3.0, 0.8, 6.0, 1.0, 0.3, 0.3]),
            (Family::Ll2, vec![1.0, 0.4, 4.0, 0.6, 0.6]),
            (Family::LSt2Nu12, vec![1.0, 0.4, 4.0, 0.6, 0.6]),
            (Family::LSt5, vec![1.0, 0.4, 2.0, 0.6, 3.0, 0.5, 5.0, 1.0, 7.0, 0.3, 0.2, 0.2, 0.2, 0.2]),
        ];
        for (i, (f, p)) in cases.into_iter().enumerate() {
            let m = f.build(&p).unwrap();
            let ys = sample_mixture_y(&m, 100_000, &mut RngStream::new(11, i as u64)).unwrap();
            let d = ks_y(&m, ys);
            assert!(d < 1.63 / (1e5f64).sqrt(), "{f}: KS {d}");
        }
    }

    #[test]
    fn gb2_small_shape_does_not_underflow() {
        let m = Family::Gb2.build(&[3.0, 10.0, 0.02, 0.05]).unwrap();
        let ys = sample_mixture_y(&m, 20_000, &mut RngStream::new(3, 0)).unwrap();
        assert!(ys.iter().all(|y| y.is_finite()));
    }

    #[test]
    fn degenerate_weight_matches_component() {
        let m = Family::Ln2.build(&[1.0, 0.5, 5.0, 1.0, 1.0]).unwrap();
        let c = Family::Ln.build(&[1.0, 0.5]).unwrap();
        let ys = sample_mixture_y(&m, 50_000, &mut RngStream::new(4, 0)).unwrap();
        assert!(ks_y(&c, ys) < 1.63 / (5e4f64).sqrt());
    }

    #[test]
    fn truncated_draws_stay_in_window_and_match_cdf() {
        let p = [1.0, 0.5, 3.0, 0.8, 0.4];
        let w = TruncationWindow::new(2.0, 40.0).unwrap();
        let xs = sample_truncated(ModelSpec::truncated(Family::Ln2), &p, w, 100_000, &mut RngStream::new(5, 0))
            .unwrap();
        assert!(xs.iter().all(|&x| w.contains(x)));
        let t = TruncatedMixture::new(&Family::Ln2.build(&p).unwrap(), w).unwrap();
        let d = ks_y(&t, xs.iter().map(|x| x.ln()).collect());
        assert!(d < 1.63 / (1e5f64).sqrt(), "KS {d}");
    }

    #[test]
    fn narrow_tail_window_uses_inverse() {
        let p = [0.0, 1.0];
        let w = TruncationWindow::new(6.0f64.exp(), 7.0f64.exp()).unwrap();
        let m = Family::Ln.build(&p).unwrap();
        let ys = sample_truncated_mixture_y(&m, w, 20_000, &mut RngStream::new(6, 0)).unwrap();
        assert!(ys.iter().all(|&y| (6.0..=7.0).contains(&y)));
        let t = TruncatedMixture::new(&m, w).unwrap();
        assert!(ks_y(&t, ys) < 1.63 / (2e4f64).sqrt());
    }

    #[test]
    fn identity_window_matches_untruncated() {
        let p = [1.0, 0.5, 3.0, 0.8, 0.4];
        let m = Family::Ll2.build(&p).unwrap();
        let a = sample_mixture_y(&m, 1000, &mut RngStream::new(8, 0)).unwrap();
        let b = sample_truncated_mixture_y(&m, TruncationWindow::unbounded(), 1000, &mut RngStream::new(8, 0))
            .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn infeasible_lnsnp_rejected() {
        let r = sample(ModelSpec::new(Family::Lnsnp), &[0.0, 1.0, 0.9, -0.4, 0.3, -0.2], 10, &mut RngStream::new(0, 0));
        assert!(r.is_err());
    }

    #[test]
    fn quantile_inverts_cdf() {
        let m = Family::LSt3.build(&[1.0, 0.5, 2.0, 0.6, 4.0, 1.0, 0.2, 0.5]).unwrap();
        for p in [1e-6, 0.1, 0.5, 0.9, 0.999] {
            let y = quantile_y(&m, p).unwrap();
            assert!((m.cdf_y(y) - p).abs() < 1e-12);
        }
    }
}
