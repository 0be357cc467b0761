//! Independent numerical oracles for the `sizedist` test suites.
//!
//! Nothing in here is used by the library itself. The routines are
//! deliberately plain: adaptive Gauss-Kronrod quadrature, brute-force
//! empirical-distribution suprema and finite differences.

// 15-point Kronrod nodes on [-1, 1] (non-negative half) and weights.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728_8,
];
// 7-point Gauss weights, attached to the odd Kronrod nodes.
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kron += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

/// Adaptive Gauss-Kronrod (G7/K15) quadrature of `f` over a finite interval.
///
/// Bisects the interval with the largest error estimate until the summed
/// error estimate drops below `max(abs_tol, rel_tol * |integral|)`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    let (v, e) = gk15(&f, lo, hi);
    let mut pieces = vec![(lo, hi, v, e)];
    for _ in 0..20_000 {
        let total: f64 = pieces.iter().map(|p| p.2).sum();
        let err: f64 = pieces.iter().map(|p| p.3).sum();
        if err <= abs_tol.max(rel_tol * total.abs()) {
            break;
        }
        let (idx, _) = pieces
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .unwrap();
        let (l, r, _, _) = pieces.swap_remove(idx);
        let m = 0.5 * (l + r);
        if m <= l || m >= r {
            break;
        }
        let (v1, e1) = gk15(&f, l, m);
        let (v2, e2) = gk15(&f, m, r);
        pieces.push((l, m, v1, e1));
        pieces.push((m, r, v2, e2));
    }
    // Sum in left-to-right order so results do not depend on heap layout.
    pieces.sort_by(|x, y| x.0.total_cmp(&y.0));
    sign * pieces.iter().map(|p| p.2).sum::<f64>()
}

/// Integral of `f` over `[a, +inf)` via `x = a + u / (1 - u)`.
pub fn integrate_to_inf<F: Fn(f64) -> f64>(f: F, a: f64, abs_tol: f64, rel_tol: f64) -> f64 {
    integrate(
        |u| {
            if u >= 1.0 {
                return 0.0;
            }
            let w = 1.0 - u;
            let v = f(a + u / w) / (w * w);
            if v.is_finite() {
                v
            } else {
                0.0
            }
        },
        0.0,
        1.0,
        abs_tol,
        rel_tol,
    )
}

/// Integral of `f` over `(-inf, b]`.
pub fn integrate_from_neg_inf<F: Fn(f64) -> f64>(f: F, b: f64, abs_tol: f64, rel_tol: f64) -> f64 {
    integrate_to_inf(|t| f(-t), -b, abs_tol, rel_tol)
}

/// Cumulative integrals of `f` from `-inf` to each point of the ascending
/// sequence `ys`, accumulated segment by segment.
pub fn cumulative_from_neg_inf<F: Fn(f64) -> f64>(f: F, ys: &[f64], tol: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(ys.len());
    if ys.is_empty() {
        return out;
    }
    let mut acc = integrate_from_neg_inf(&f, ys[0], tol, 1e-14);
    out.push(acc);
    for w in ys.windows(2) {
        acc += integrate(&f, w[0], w[1], tol, 1e-14);
        out.push(acc);
    }
    out
}

/// Supremum of `|F_n(x) - F(x)|` evaluated at both one-sided limits of every
/// jump of the empirical distribution function.
pub fn ks_brute_force<F: Fn(f64) -> f64>(sorted: &[f64], cdf: F) -> f64 {
    let n = sorted.len() as f64;
    let mut sup: f64 = 0.0;
    for &x in sorted {
        let below = sorted.iter().filter(|&&v| v < x).count() as f64 / n;
        let at = sorted.iter().filter(|&&v| v <= x).count() as f64 / n;
        let fx = cdf(x);
        sup = sup.max((below - fx).abs()).max((at - fx).abs());
    }
    sup
}

/// Cramer-von Mises distance `n * int (F_n - F)^2 dF` by quadrature in the
/// probability scale, given the sorted model probabilities `u` of the data.
pub fn cm_quadrature(u: &[f64]) -> f64 {
    weighted_ecdf_integral(u, |_| 1.0)
}

/// Anderson-Darling distance `n * int (F_n - F)^2 / (F (1 - F)) dF`.
pub fn ad_quadrature(u: &[f64]) -> f64 {
    weighted_ecdf_integral(u, |v| 1.0 / (v * (1.0 - v)))
}

fn weighted_ecdf_integral<W: Fn(f64) -> f64>(u: &[f64], weight: W) -> f64 {
    let n = u.len() as f64;
    let mut knots = vec![0.0];
    knots.extend_from_slice(u);
    knots.push(1.0);
    let mut total = 0.0;
    for i in 0..knots.len() - 1 {
        let level = i as f64 / n;
        let (l, r) = (knots[i], knots[i + 1]);
        total += integrate(
            |v| {
                let d = level - v;
                d * d * weight(v)
            },
            l,
            r,
            1e-15,
            1e-14,
        );
    }
    n * total
}

/// Central finite difference with step `h`.
pub fn central_diff<F: Fn(f64) -> f64>(f: F, x: f64, h: f64) -> f64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}

/// Fourth-order central finite difference with step `h`.
pub fn central_diff4<F: Fn(f64) -> f64>(f: F, x: f64, h: f64) -> f64 {
    (-f(x + 2.0 * h) + 8.0 * f(x + h) - 8.0 * f(x - h) + f(x - 2.0 * h)) / (12.0 * h)
}
