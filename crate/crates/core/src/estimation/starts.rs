//! Starting points for the multi-start search, in natural parameters.

use std::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::mixture::{BaseKind, Family};
use crate::sampling::RngStream;

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n;
    (m, var.sqrt())
}

/// Slopes of `ln F̂` against `y` over the bottom `frac` and of `ln Ŝ` over
/// the top `frac` of sorted log-data, by least squares.
pub fn tail_slopes(ys: &[f64], frac: f64) -> (f64, f64) {
    let n = ys.len();
    let m = ((n as f64 * frac) as usize).max(5).min(n / 2);
    let fit = |pts: &mut dyn Iterator<Item = (f64, f64)>| {
        let pts: Vec<(f64, f64)> = pts.collect();
        let k = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
        if sxx > 0.0 {
            sxy / sxx
        } else {
            f64::NAN
        }
    };
    let nf = n as f64 + 1.0;
    let low = fit(&mut (0..m).map(|i| (ys[i], ((i + 1) as f64 / nf).ln())));
    let high = fit(&mut (n - m..n).map(|i| (ys[i], ((n - i) as f64 / nf).ln())));
    (low, -high)
}

fn clamp_or(v: f64, lo: f64, hi: f64, fallback: f64) -> f64 {
    if v.is_finite() {
        v.clamp(lo, hi)
    } else {
        fallback
    }
}

/// Scale factor turning a block SD into the family's scale parameter.
fn scale_factor(base: BaseKind, nu: f64) -> f64 {
    match base {
        BaseKind::LogLogistic => 3f64.sqrt() / PI,
        BaseKind::LogStudent if nu > 2.0 => ((nu - 2.0) / nu).sqrt(),
        _ => 1.0,
    }
}

/// Start number `index` for `family` on sorted log-data `ys`.
///
/// Index 0 is the plain quantile-block / moment start; later indices jitter
/// block boundaries, scales and (for Student ladders) the block-to-slot
/// assignment.
pub fn starting_point(family: Family, ys: &[f64], index: usize, rng: &mut RngStream) -> Vec<f64> {
    let (m, sd) = mean_sd(ys);
    let sd = sd.max(1e-3);
    let jitter = index > 0;
    let noise = |scale: f64, rng: &mut RngStream| -> f64 {
        if jitter {
            let z: f64 = StandardNormal.sample(rng);
            scale * z
        } else {
            0.0
        }
    };
    match family {
        Family::Ln => vec![m + noise(0.1 * sd, rng), sd * noise(0.2, rng).exp()],
        Family::Lnsnp => {
            let mut p = vec![m + noise(0.1 * sd, rng), sd * noise(0.2, rng).exp()];
            for _ in 0..4 {
                p.push(noise(0.02, rng));
            }
            p
        }
        Family::Dpln => {
            let (low, high) = tail_slopes(ys, 0.05);
            let alpha = clamp_or(high, 0.3, 50.0, 5.0) * noise(0.3, rng).exp();
            let beta = clamp_or(low, 0.3, 50.0, 5.0) * noise(0.3, rng).exp();
            let var = sd * sd - 1.0 / (alpha * alpha) - 1.0 / (beta * beta);
            let sigma = var.max(0.1 * sd * sd).sqrt();
            // E[y] = μ + 1/α - 1/β
            let mu = m - 1.0 / alpha + 1.0 / beta + noise(0.1 * sd, rng);
            vec![alpha, beta, mu, sigma]
        }
        Family::Gb2 => {
            let (low, high) = tail_slopes(ys, 0.05);
            let a = PI / (3f64.sqrt() * sd) * noise(0.3, rng).exp();
            let p = clamp_or(low / a, 0.1, 20.0, 1.0);
            let q = clamp_or(high / a, 0.1, 20.0, 1.0);
            let median = ys[ys.len() / 2];
            vec![a, (median + noise(0.1 * sd, rng)).exp(), p, q]
        }
        f => {
            let ell = f.ell();
            let n = ys.len();
            let mut cuts: Vec<f64> = (1..ell).map(|j| j as f64 / ell as f64).collect();
            if jitter {
                let mut u: Vec<f64> = (1..ell).map(|_| rng.random::<f64>()).collect();
                u.sort_by(f64::total_cmp);
                for (c, v) in cuts.iter_mut().zip(u) {
                    *c = 0.5 * *c + 0.5 * v;
                }
            }
            let mut bounds = vec![0usize];
            for c in cuts {
                let b = ((c * n as f64) as usize).max(bounds[bounds.len() - 1] + 2).min(n);
                bounds.push(b);
            }
            bounds.push(n);
            let mut blocks: Vec<(f64, f64, f64)> = bounds
                .windows(2)
                .map(|w| {
                    let (lo, hi) = (w[0].min(n - 1), w[1].max(w[0] + 1).min(n));
                    let (bm, bs) = mean_sd(&ys[lo..hi.max(lo + 1)]);
                    (bm, bs.max(0.05 * sd), (hi - lo) as f64 / n as f64)
                })
                .collect();
            let nus = f.fixed_nus();
            if jitter && !nus.is_empty() {
                blocks.shuffle(rng);
            }
            let total_w: f64 = blocks.iter().map(|b| b.2.max(0.01)).sum();
            let mut p = Vec::with_capacity(f.k());
            for (i, (bm, bs, _)) in blocks.iter().enumerate() {
                let nu = nus.get(i).copied().unwrap_or(f64::INFINITY);
                p.push(bm + noise(0.1 * bs, rng));
                p.push(bs * scale_factor(f.base(), nu) * noise(0.2, rng).exp());
            }
            for b in &blocks[..ell - 1] {
                p.push(b.2.max(0.01) / total_w);
            }
            p
        }
    }
}

/// Seeds for `target` derived from an already fitted `source` model of the
/// same base family (or LN for the single-component alternatives).
pub fn warm_starts(target: Family, source: Family, params: &[f64]) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    match (source.base(), target.base()) {
        (BaseKind::LogNormal, BaseKind::LogNormal) | (BaseKind::LogLogistic, BaseKind::LogLogistic)
            if target.ell() == source.ell() + 1 =>
        {
            let ell = source.ell();
            let mut w: Vec<f64> = if ell == 1 {
                vec![1.0]
            } else {
                let mut w = params[2 * ell..].to_vec();
                w.push(1.0 - w.iter().sum::<f64>());
                w
            };
            let (big, _) = w
                .iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
            let (mu, sigma) = (params[2 * big], params[2 * big + 1]);
            let half = w[big] / 2.0;
            w[big] = half;
            w.push(half);
            for offset in [0.0, 0.25] {
                let mut p = Vec::with_capacity(target.k());
                for i in 0..ell {
                    let (m, s) = (params[2 * i], params[2 * i + 1]);
                    p.push(if i == big { m - offset * s } else { m });
                    p.push(s);
                }
                p.push(mu + offset * sigma);
                p.push(sigma);
                p.extend(&w[..ell]);
                out.push(p);
            }
        }
        (BaseKind::LogStudent, BaseKind::LogStudent) => {
            let (src, dst) = (source.fixed_nus(), target.fixed_nus());
            if !src.iter().all(|nu| dst.contains(nu)) || dst.len() <= src.len() {
                return out;
            }
            let ell = src.len();
            let mut w = params[2 * ell..].to_vec();
            w.push(1.0 - w.iter().sum::<f64>());
            let (mm, ms) = (0..ell).fold((0.0, 0.0), |acc, i| {
                (acc.0 + w[i] * params[2 * i], acc.1 + w[i] * params[2 * i + 1])
            });
            let extra = dst.len() - ell;
            let tiny = 2e-6;
            let (big, _) = w
                .iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
            let mut new_w = Vec::with_capacity(dst.len());
            let mut p = Vec::with_capacity(target.k());
            for nu in dst {
                match src.iter().position(|s| s == nu) {
                    Some(i) => {
                        p.push(params[2 * i]);
                        p.push(params[2 * i + 1]);
                        new_w.push(if i == big { w[i] - tiny * extra as f64 } else { w[i] });
                    }
                    None => {
                        p.push(mm);
                        p.push(ms);
                        new_w.push(tiny);
                    }
                }
            }
            p.extend(&new_w[..dst.len() - 1]);
            out.push(p);
        }
        (BaseKind::LogNormal, BaseKind::LogSnp) if source.ell() == 1 => {
            out.push(vec![params[0], params[1], 0.0, 0.0, 0.0, 0.0]);
        }
        (BaseKind::LogNormal, BaseKind::Dpln) if source.ell() == 1 => {
            let (alpha, beta) = (20.0, 20.0);
            let sigma = (params[1] * params[1] - 2.0 / 400.0).max(0.25 * params[1] * params[1]).sqrt();
            out.push(vec![alpha, beta, params[0], sigma]);
        }
        _ => {}
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::Density;
    use crate::sampling::{sample_mixture_y, RngStream};

    #[test]
    fn every_family_gets_a_valid_start() {
        let m = Family::Ln2.build(&[2.0, 0.6, 5.0, 0.9, 0.4]).unwrap();
        let mut ys = sample_mixture_y(&m, 5000, &mut RngStream::new(1, 0)).unwrap();
        ys.sort_by(f64::total_cmp);
        for f in Family::ALL {
            for i in 0..4 {
                let p = starting_point(f, &ys, i, &mut RngStream::new(2, i as u64));
                assert_eq!(p.len(), f.k(), "{f}");
                let built = f.build(&p).unwrap_or_else(|e| panic!("{f} start {i}: {e} {p:?}"));
                assert!(ys.iter().map(|&y| built.ln_pdf_y(y)).sum::<f64>().is_finite());
            }
        }
    }

    #[test]
    fn dpln_tail_slopes_recovered_roughly() {
        let m = Family::Dpln.build(&[2.5, 1.5, 0.0, 0.3]).unwrap();
        let mut ys = sample_mixture_y(&m, 200_000, &mut RngStream::new(3, 0)).unwrap();
        ys.sort_by(f64::total_cmp);
        let (low, high) = tail_slopes(&ys, 0.05);
        assert!((high - 2.5).abs() < 0.5, "upper {high}");
        assert!((low - 1.5).abs() < 0.5, "lower {low}");
    }

    #[test]
    fn split_start_reproduces_smaller_density() {
        let src = [1.0, 0.5, 4.0, 0.8, 0.3];
        let seeds = warm_starts(Family::Ln3, Family::Ln2, &src);
        let a = Family::Ln2.build(&src).unwrap();
        let b = Family::Ln3.build(&seeds[0]).unwrap();
        for y in [0.0, 1.0, 3.0, 5.0] {
            assert!((a.pdf_y(y) - b.pdf_y(y)).abs() < 1e-14);
        }
    }

    #[test]
    fn student_ladder_inserts_missing_slot() {
        let src = [1.0, 0.5, 4.0, 0.8, 0.3];
        let seeds = warm_starts(Family::LSt3, Family::LSt2Nu39, &src);
        assert_eq!(seeds.len(), 1);
        let p = &seeds[0];
        assert_eq!(p.len(), 8);
        // slot order 4, 12, 39: the 12 slot is new
        assert_eq!((p[0], p[1]), (1.0, 0.5));
        assert_eq!((p[4], p[5]), (4.0, 0.8));
        assert!((p[7] - 2e-6).abs() < 1e-18);
        assert!(Family::LSt3.build(p).is_ok());
        assert!(warm_starts(Family::LSt2Nu39, Family::LSt2Nu12, &src).is_empty());
    }
}
