//! Dense univariate polynomials in a local coordinate, stored lowest degree first.

pub(crate) fn eval(coeffs: &[f64], s: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * s + c)
}

pub(crate) fn add_into(acc: &mut Vec<f64>, other: &[f64]) {
    if acc.len() < other.len() {
        acc.resize(other.len(), 0.0);
    }
    for (a, &b) in acc.iter_mut().zip(other) {
        *a += b;
    }
}

pub(crate) fn scale(coeffs: &[f64], factor: f64) -> Vec<f64> {
    coeffs.iter().map(|c| c * factor).collect()
}

pub(crate) fn mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        if x == 0.0 {
            continue;
        }
        for (j, &y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// Re-expands `p(s)` around `d`, returning `q` with `q(u) = p(u + d)`.
pub(crate) fn taylor_shift(coeffs: &[f64], d: f64) -> Vec<f64> {
    let mut q = coeffs.to_vec();
    if d == 0.0 {
        return q;
    }
    // Horner-style synthetic division, repeated.
    let n = q.len();
    for i in 0..n {
        for j in (i..n.saturating_sub(1)).rev() {
            q[j] += d * q[j + 1];
        }
    }
    q
}

/// `p(s / factor)`.
pub(crate) fn rescale_argument(coeffs: &[f64], factor: f64) -> Vec<f64> {
    let mut pow = 1.0;
    coeffs
        .iter()
        .map(|&c| {
            let v = c * pow;
            pow /= factor;
            v
        })
        .collect()
}

/// `p(-s)`.
pub(crate) fn reflect(coeffs: &[f64]) -> Vec<f64> {
    coeffs
        .iter()
        .enumerate()
        .map(|(k, &c)| if k % 2 == 1 { -c } else { c })
        .collect()
}

pub(crate) fn derivative(coeffs: &[f64]) -> Vec<f64> {
    coeffs
        .iter()
        .enumerate()
        .skip(1)
        .map(|(k, &c)| c * k as f64)
        .collect()
}

/// Antiderivative vanishing at zero.
pub(crate) fn antiderivative(coeffs: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(coeffs.len() + 1);
    out.push(0.0);
    out.extend(coeffs.iter().enumerate().map(|(k, &c)| c / (k + 1) as f64));
    out
}

/// `∫_0^h p(s) ds`.
pub(crate) fn integral(coeffs: &[f64], h: f64) -> f64 {
    eval(&antiderivative(coeffs), h)
}

/// `(u + c)^m` expanded in `u`.
pub(crate) fn linear_power(c: f64, m: usize) -> Vec<f64> {
    let mut out = vec![1.0];
    for _ in 0..m {
        out = mul(&out, &[c, 1.0]);
    }
    out
}

pub(crate) fn trim(coeffs: &mut Vec<f64>) {
    while coeffs.last() == Some(&0.0) {
        coeffs.pop();
    }
}

/// Largest `|p(s)|` bound over `[0, h]` using `Σ|c_k| h^k`.
pub(crate) fn magnitude_bound(coeffs: &[f64], h: f64) -> f64 {
    let mut pow = 1.0;
    let mut acc = 0.0;
    for c in coeffs {
        acc += c.abs() * pow;
        pow *= h;
    }
    acc
}
