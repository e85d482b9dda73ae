//! Small numerical kernels shared by the solvers.

/// Default absolute tolerance on bisection bracket width.
pub const DEFAULT_TOL: f64 = 1e-12;

const MAX_BISECTIONS: usize = 400;

/// Bisection for a root of `f` on `[lo, hi]` where `f(lo) < 0 < f(hi)`
/// (or the reverse, when `increasing` is false). Endpoints are never
/// evaluated, so callers may pass brackets where `f` is singular.
pub fn bisect<F>(mut f: F, mut lo: f64, mut hi: f64, tol: f64, increasing: bool) -> f64
where
    F: FnMut(f64) -> f64,
{
    for _ in 0..MAX_BISECTIONS {
        if hi - lo <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let v = f(mid);
        if v == 0.0 {
            return mid;
        }
        if (v < 0.0) == increasing {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// `(1 - x)^n` for `x` in `[0, 1]` and real `n > 0`.
pub fn pow_one_minus(x: f64, n: f64) -> f64 {
    if x >= 1.0 {
        return if n == 0.0 { 1.0 } else { 0.0 };
    }
    (n * (-x).ln_1p()).exp()
}

/// `1 - (1 - x)^n` without cancellation for small `x`.
pub fn one_minus_pow_one_minus(x: f64, n: f64) -> f64 {
    if x >= 1.0 {
        return if n == 0.0 { 0.0 } else { 1.0 };
    }
    -(n * (-x).ln_1p()).exp_m1()
}

/// Ordinary least squares fit `y = slope * x + intercept`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn least_squares(xs: &[f64], ys: &[f64]) -> LinearFit {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (&x, &y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xs
        .iter()
        .zip(ys)
        .map(|(&x, &y)| {
            let r = y - (slope * x + intercept);
            r * r
        })
        .sum();
    let r_squared = if syy == 0.0 { 1.0 } else { 1.0 - ss_res / syy };
    LinearFit {
        slope,
        intercept,
        r_squared,
    }
}

/// Binomial pmf row `P(X = k)`, `k = 0..=n`, for `X ~ Bin(n, p)`.
///
/// Rows with `n > 60` are built from pmf ratios so that neither the
/// coefficients nor the powers overflow.
pub fn binomial_pmf(n: usize, p: f64) -> Vec<f64> {
    let mut row = vec![0.0; n + 1];
    if p <= 0.0 {
        row[0] = 1.0;
        return row;
    }
    if p >= 1.0 {
        row[n] = 1.0;
        return row;
    }
    if n <= 60 {
        let mut coeff = 1.0_f64;
        for (k, slot) in row.iter_mut().enumerate() {
            if k > 0 {
                coeff = coeff * (n - k + 1) as f64 / k as f64;
            }
            *slot = coeff * p.powi(k as i32) * (1.0 - p).powi((n - k) as i32);
        }
    } else {
        // Walk outward from the mode with pmf ratios, then normalize; the
        // unnormalized terms stay in (0, 1] so nothing overflows.
        let odds = p / (1.0 - p);
        let mode = (((n + 1) as f64 * p).floor() as usize).min(n);
        row[mode] = 1.0;
        for k in mode..n {
            row[k + 1] = row[k] * (n - k) as f64 / (k + 1) as f64 * odds;
        }
        for k in (0..mode).rev() {
            row[k] = row[k + 1] * (k + 1) as f64 / ((n - k) as f64 * odds);
        }
        let total: f64 = row.iter().sum();
        row.iter_mut().for_each(|x| *x /= total);
    }
    row
}

/// `ln k!` for `k = 0..=n`.
pub fn ln_factorials(n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    let mut acc = 0.0_f64;
    out.push(0.0);
    for k in 1..=n {
        acc += (k as f64).ln();
        out.push(acc);
    }
    out
}

/// Golden-section maximisation of a unimodal `f` on `[lo, hi]`.
pub fn golden_max<F: FnMut(f64) -> f64>(mut f: F, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > tol {
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        }
    }
    0.5 * (lo + hi)
}
