//! Reference implementations used by the integration and acceptance tests.
//! None of them call into the library code they are compared against.
#![allow(dead_code, clippy::needless_range_loop)]

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num::bigint::BigInt;
use num::rational::BigRational;
use num::{One, ToPrimitive, Zero};

pub fn matern32(r: f64, lengthscale: f64) -> f64 {
    let x = 3f64.sqrt() * r / lengthscale;
    (1.0 + x) * (-x).exp()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

pub fn metric(a: &[f64], b: &[f64], lengthscale: f64) -> f64 {
    (2.0 * (1.0 - matern32(dist(a, b), lengthscale))).max(0.0).sqrt()
}

pub struct DensePosterior {
    pub mean: Vec<Vec<f64>>,
    pub std: Vec<f64>,
}

/// Posterior through an LU solve of the explicitly assembled `K + eta I`.
pub fn dense_posterior(
    inputs: &[Vec<f64>],
    targets: &[Vec<f64>],
    queries: &[Vec<f64>],
    lengthscale: f64,
    eta: f64,
) -> DensePosterior {
    let t = inputs.len();
    let n_out = targets.first().map_or(1, Vec::len);
    if t == 0 {
        return DensePosterior {
            mean: vec![vec![0.0; queries.len()]; n_out],
            std: vec![1.0; queries.len()],
        };
    }
    let a = DMatrix::from_fn(t, t, |r, c| {
        matern32(dist(&inputs[r], &inputs[c]), lengthscale) + if r == c { eta } else { 0.0 }
    });
    let lu = a.lu();
    let mut mean = vec![vec![0.0; queries.len()]; n_out];
    let mut std = vec![0.0; queries.len()];
    for (q, x) in queries.iter().enumerate() {
        let k = DVector::from_fn(t, |s, _| matern32(dist(x, &inputs[s]), lengthscale));
        let alpha = lu.solve(&k).expect("regularized system is invertible");
        for (i, m) in mean.iter_mut().enumerate() {
            m[q] = (0..t).map(|s| alpha[s] * targets[s][i]).sum();
        }
        std[q] = (1.0 - k.dot(&alpha)).max(0.0).sqrt();
    }
    DensePosterior { mean, std }
}

/// Largest eigenvalue of the symmetrized `K (K + eta I)^{-1}`.
pub fn dense_xi_lambda_max(gram: &DMatrix<f64>, eta: f64) -> f64 {
    let n = gram.nrows();
    let reg = gram + DMatrix::identity(n, n) * eta;
    let inv = reg.try_inverse().expect("invertible");
    let xi = gram * inv;
    let sym = (&xi + xi.transpose()) * 0.5;
    SymmetricEigen::new(sym).eigenvalues.max()
}

/// Exact `P[Binomial(m, nu) <= k - 1]`.
pub fn exact_binomial_tail(m: u64, k: usize, nu: &BigRational) -> BigRational {
    let one = BigRational::one();
    let q = &one - nu;
    let mut total = BigRational::zero();
    let mut binom = BigInt::one();
    for s in 0..(k as u64).min(m + 1) {
        if s > 0 {
            binom = binom * BigInt::from(m - s + 1) / BigInt::from(s);
        }
        let term = BigRational::from_integer(binom.clone()) * pow(nu, s) * pow(&q, m - s);
        total += term;
    }
    total
}

fn pow(x: &BigRational, e: u64) -> BigRational {
    num::pow::pow(x.clone(), e as usize)
}

/// Smallest `m` with exact tail `<= kappa_t`. The tail decreases in `m`, so
/// an exact bisection suffices.
pub fn exact_min_scenarios(nu: &BigRational, kappa_t: f64, k: usize) -> u64 {
    let target = BigRational::from_float(kappa_t).expect("finite");
    let holds = |m: u64| exact_binomial_tail(m, k, nu) <= target;
    if holds(0) {
        return 0;
    }
    let (mut lo, mut hi) = (0u64, 1u64);
    while !holds(hi) {
        lo = hi;
        hi *= 2;
    }
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if holds(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

pub fn rational(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

pub fn to_f64(x: &BigRational) -> f64 {
    x.to_f64().unwrap()
}

/// Trigamma by recurrence up to 20 then the asymptotic series.
pub fn trigamma(mut x: f64) -> f64 {
    let mut acc = 0.0;
    while x < 20.0 {
        acc += 1.0 / (x * x);
        x += 1.0;
    }
    let x2 = x * x;
    acc + 1.0 / x + 1.0 / (2.0 * x2) + 1.0 / (6.0 * x2 * x) - 1.0 / (30.0 * x2 * x2 * x)
        + 1.0 / (42.0 * x2 * x2 * x2 * x)
        - 1.0 / (30.0 * x2 * x2 * x2 * x2 * x)
}

/// Interval fixture: `None` is unbounded.
#[derive(Clone, Debug)]
pub struct Bounds {
    pub lower: Vec<Vec<Option<f64>>>,
    pub upper: Vec<Vec<Option<f64>>>,
}

pub fn naive_safe_set(
    b: &Bounds,
    previous: &[usize],
    d: &[Vec<f64>],
    constraints: &[usize],
    norms: &[f64],
    tau: &[f64],
) -> Vec<usize> {
    let n = d.len();
    let mut out = Vec::new();
    for target in 0..n {
        let mut all = true;
        for &i in constraints {
            let mut any = false;
            for &src in previous {
                if let Some(l) = b.lower[i][src] {
                    if l - tau[i] - norms[i] * d[src][target] >= 0.0 {
                        any = true;
                    }
                }
            }
            all &= any;
        }
        if all || previous.contains(&target) {
            out.push(target);
        }
    }
    out
}

pub fn naive_maximizers(b: &Bounds, safe: &[usize]) -> Vec<usize> {
    let mut best = f64::NEG_INFINITY;
    for &a in safe {
        best = best.max(b.lower[0][a].unwrap_or(f64::NEG_INFINITY));
    }
    safe.iter()
        .copied()
        .filter(|&a| b.upper[0][a].is_none_or(|u| u >= best))
        .collect()
}

pub fn naive_expanders(
    b: &Bounds,
    safe: &[usize],
    d: &[Vec<f64>],
    constraints: &[usize],
    norms: &[f64],
    tau: &[f64],
) -> (Vec<usize>, Vec<usize>) {
    let n = d.len();
    let mut members = Vec::new();
    let mut counts = Vec::new();
    for &a in safe {
        let mut count = 0;
        for target in 0..n {
            if safe.contains(&target) {
                continue;
            }
            let mut hit = false;
            for &i in constraints {
                match b.upper[i][a] {
                    None => hit = true,
                    Some(u) => hit |= u - tau[i] - norms[i] * d[a][target] >= 0.0,
                }
            }
            if hit {
                count += 1;
            }
        }
        if count > 0 {
            members.push(a);
        }
        counts.push(count);
    }
    (members, counts)
}

/// Two-sample Kolmogorov-Smirnov statistic.
pub fn ks_statistic(mut a: Vec<f64>, mut b: Vec<f64>) -> f64 {
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    d
}
