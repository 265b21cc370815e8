use serde::{Deserialize, Serialize};

use super::poly;
use crate::error::{Error, Result};

/// Relative tolerance used when comparing polynomial coefficients during canonicalization.
pub const COEFF_TOL: f64 = 1e-14;

/// A compactly supported piecewise polynomial.
///
/// Piece `i` lives on `[breaks[i], breaks[i + 1]]` and stores its coefficients in the local
/// coordinate `s = t - breaks[i]`, lowest degree first. Outside `[breaks[0], breaks[last]]`
/// the function is exactly zero. The empty representation is the zero function.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PiecewisePoly {
    breakpoints: Vec<f64>,
    pieces: Vec<Vec<f64>>,
}

impl PiecewisePoly {
    pub fn new(breakpoints: Vec<f64>, pieces: Vec<Vec<f64>>) -> Result<Self> {
        if breakpoints.is_empty() && pieces.is_empty() {
            return Ok(Self::zero());
        }
        if breakpoints.len() < 2 {
            return Err(Error::InvalidParameter(
                "a nonzero piecewise polynomial needs at least two breakpoints".into(),
            ));
        }
        if pieces.len() + 1 != breakpoints.len() {
            return Err(Error::InvalidParameter(format!(
                "{} breakpoints need {} pieces, got {}",
                breakpoints.len(),
                breakpoints.len() - 1,
                pieces.len()
            )));
        }
        if breakpoints.iter().any(|b| !b.is_finite())
            || pieces.iter().flatten().any(|c| !c.is_finite())
        {
            return Err(Error::InvalidParameter(
                "non-finite breakpoint or coefficient".into(),
            ));
        }
        if breakpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter(
                "breakpoints must be strictly increasing".into(),
            ));
        }
        Ok(Self {
            breakpoints,
            pieces,
        })
    }

    pub fn zero() -> Self {
        Self::default()
    }

    /// `value` on `[lo, hi]`, zero elsewhere.
    pub fn indicator(lo: f64, hi: f64, value: f64) -> Result<Self> {
        Self::new(vec![lo, hi], vec![vec![value]])
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn pieces(&self) -> &[Vec<f64>] {
        &self.pieces
    }

    pub fn is_zero(&self) -> bool {
        self.pieces.iter().flatten().all(|&c| c == 0.0)
    }

    /// `(first, last)` breakpoint, `None` for the zero function.
    pub fn support(&self) -> Option<(f64, f64)> {
        if self.pieces.is_empty() {
            None
        } else {
            Some((self.breakpoints[0], *self.breakpoints.last().unwrap()))
        }
    }

    pub fn degree(&self) -> usize {
        self.pieces
            .iter()
            .map(|p| p.len().saturating_sub(1))
            .max()
            .unwrap_or(0)
    }

    fn width(&self, i: usize) -> f64 {
        self.breakpoints[i + 1] - self.breakpoints[i]
    }

    /// Index of the piece containing `t`, right-continuous except at the last breakpoint.
    fn locate(&self, t: f64) -> Option<usize> {
        let (lo, hi) = self.support()?;
        if !(lo..=hi).contains(&t) {
            return None;
        }
        let idx = self.breakpoints.partition_point(|&b| b <= t);
        Some(idx.saturating_sub(1).min(self.pieces.len() - 1))
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self.locate(t) {
            Some(i) => poly::eval(&self.pieces[i], t - self.breakpoints[i]),
            None => 0.0,
        }
    }

    pub fn scale(&self, factor: f64) -> Self {
        Self {
            breakpoints: self.breakpoints.clone(),
            pieces: self.pieces.iter().map(|p| poly::scale(p, factor)).collect(),
        }
    }

    /// `t ↦ f(t + c)`.
    pub fn shift(&self, c: f64) -> Self {
        Self {
            breakpoints: self.breakpoints.iter().map(|b| b - c).collect(),
            pieces: self.pieces.clone(),
        }
    }

    /// `t ↦ f(-t)`.
    pub fn reflect(&self) -> Self {
        let n = self.pieces.len();
        let breakpoints = self.breakpoints.iter().rev().map(|b| -b).collect();
        let pieces = (0..n)
            .rev()
            .map(|i| poly::reflect(&poly::taylor_shift(&self.pieces[i], self.width(i))))
            .collect();
        Self {
            breakpoints,
            pieces,
        }
    }

    /// `t ↦ f(t / factor)` for `factor > 0`.
    pub fn dilate(&self, factor: f64) -> Self {
        Self {
            breakpoints: self.breakpoints.iter().map(|b| b * factor).collect(),
            pieces: self
                .pieces
                .iter()
                .map(|p| poly::rescale_argument(p, factor))
                .collect(),
        }
    }

    /// `f · 1_[lo, hi]`.
    pub fn restrict(&self, lo: f64, hi: f64) -> Self {
        let Some((a, b)) = self.support() else {
            return Self::zero();
        };
        let lo = lo.max(a);
        let hi = hi.min(b);
        if lo >= hi {
            return Self::zero();
        }
        let mut breakpoints = vec![lo];
        let mut pieces = Vec::new();
        for i in 0..self.pieces.len() {
            let (s, e) = (self.breakpoints[i], self.breakpoints[i + 1]);
            let (cs, ce) = (s.max(lo), e.min(hi));
            if cs >= ce {
                continue;
            }
            pieces.push(poly::taylor_shift(&self.pieces[i], cs - s));
            breakpoints.push(ce);
        }
        Self {
            breakpoints,
            pieces,
        }
    }

    /// Re-expresses `self` on a refined breakpoint grid. `grid` must contain every breakpoint
    /// of `self` that lies inside its range.
    fn on_grid(&self, grid: &[f64]) -> Vec<Vec<f64>> {
        grid.windows(2)
            .map(|w| {
                let mid = 0.5 * (w[0] + w[1]);
                match self.locate(mid) {
                    Some(i) => poly::taylor_shift(&self.pieces[i], w[0] - self.breakpoints[i]),
                    None => Vec::new(),
                }
            })
            .collect()
    }

    fn merged_grid(&self, other: &Self) -> Vec<f64> {
        let mut grid: Vec<f64> = self
            .breakpoints
            .iter()
            .chain(other.breakpoints.iter())
            .copied()
            .collect();
        sort_dedup(&mut grid);
        grid
    }

    /// Pointwise product.
    pub fn mul(&self, other: &Self) -> Self {
        let (Some((a0, a1)), Some((b0, b1))) = (self.support(), other.support()) else {
            return Self::zero();
        };
        let (lo, hi) = (a0.max(b0), a1.min(b1));
        if lo >= hi {
            return Self::zero();
        }
        let grid: Vec<f64> = self
            .merged_grid(other)
            .into_iter()
            .filter(|&g| g >= lo && g <= hi)
            .collect();
        let left = self.on_grid(&grid);
        let right = other.on_grid(&grid);
        let pieces = left
            .iter()
            .zip(&right)
            .map(|(p, q)| poly::mul(p, q))
            .collect();
        Self {
            breakpoints: grid,
            pieces,
        }
    }

    /// Pointwise sum.
    pub fn add(&self, other: &Self) -> Self {
        if self.pieces.is_empty() {
            return other.clone();
        }
        if other.pieces.is_empty() {
            return self.clone();
        }
        let grid = self.merged_grid(other);
        let left = self.on_grid(&grid);
        let right = other.on_grid(&grid);
        let pieces = left
            .into_iter()
            .zip(right)
            .map(|(mut p, q)| {
                poly::add_into(&mut p, &q);
                p
            })
            .collect();
        Self {
            breakpoints: grid,
            pieces,
        }
    }

    /// `∫ f(t) dt` over the whole line.
    pub fn integral(&self) -> f64 {
        (0..self.pieces.len())
            .map(|i| poly::integral(&self.pieces[i], self.width(i)))
            .sum()
    }

    /// `∫_lo^hi t^k f(t) dt`.
    pub fn moment(&self, k: usize, lo: f64, hi: f64) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.pieces.len() {
            let (s, e) = (self.breakpoints[i], self.breakpoints[i + 1]);
            let (cs, ce) = (s.max(lo), e.min(hi));
            if cs >= ce {
                continue;
            }
            // Work in the coordinate local to the clipped start to keep powers small.
            let local = poly::taylor_shift(&self.pieces[i], cs - s);
            let weight = poly::linear_power(cs, k);
            acc += poly::integral(&poly::mul(&local, &weight), ce - cs);
        }
        acc
    }

    /// `∫_x^∞ f(t) dt`.
    pub fn tail_integral(&self, x: f64) -> f64 {
        self.moment(0, x, f64::INFINITY)
    }

    /// `∫_lo^∞ t^k f(t + a) g(t + b) dt`, computed piece by piece without building the product.
    pub fn shifted_product_moment(&self, a: f64, other: &Self, b: f64, k: usize, lo: f64) -> f64 {
        let (n, m) = (self.pieces.len(), other.pieces.len());
        if n == 0 || m == 0 {
            return 0.0;
        }
        let (mut i, mut j) = (0, 0);
        let mut acc = 0.0;
        while i < n && j < m {
            let (fs, fe) = (self.breakpoints[i] - a, self.breakpoints[i + 1] - a);
            let (gs, ge) = (other.breakpoints[j] - b, other.breakpoints[j + 1] - b);
            let s = fs.max(gs).max(lo);
            let e = fe.min(ge);
            if s < e {
                let p = poly::taylor_shift(&self.pieces[i], s - fs);
                let q = poly::taylor_shift(&other.pieces[j], s - gs);
                let mut prod = poly::mul(&p, &q);
                if k > 0 {
                    prod = poly::mul(&prod, &poly::linear_power(s, k));
                }
                acc += poly::integral(&prod, e - s);
            }
            if fe <= ge {
                i += 1;
            } else {
                j += 1;
            }
        }
        acc
    }

    /// Exact convolution `(f * g)(x) = ∫ f(t) g(x - t) dt`.
    pub fn convolve(&self, other: &Self) -> Self {
        if self.pieces.is_empty() || other.pieces.is_empty() {
            return Self::zero();
        }
        let mut grid = Vec::new();
        for i in 0..self.pieces.len() {
            for j in 0..other.pieces.len() {
                let base = self.breakpoints[i] + other.breakpoints[j];
                let (h1, h2) = (self.width(i), other.width(j));
                grid.extend([base, base + h1, base + h2, base + h1 + h2]);
            }
        }
        sort_dedup(&mut grid);
        let mut pieces: Vec<Vec<f64>> = vec![Vec::new(); grid.len() - 1];
        for i in 0..self.pieces.len() {
            for j in 0..other.pieces.len() {
                let base = self.breakpoints[i] + other.breakpoints[j];
                for (y0, y1, local) in pair_convolution(
                    &self.pieces[i],
                    self.width(i),
                    &other.pieces[j],
                    other.width(j),
                ) {
                    let (g0, g1) = (base + y0, base + y1);
                    let start = grid.partition_point(|&g| g < g0 - snap_tol(g0));
                    for k in start..grid.len() - 1 {
                        if grid[k + 1] > g1 + snap_tol(g1) {
                            break;
                        }
                        let shifted = poly::taylor_shift(&local, grid[k] - g0);
                        poly::add_into(&mut pieces[k], &shifted);
                    }
                }
            }
        }
        let mut out = Self {
            breakpoints: grid,
            pieces,
        };
        out.canonicalize();
        out
    }

    /// Merges adjacent pieces carrying the same polynomial, flushes negligible coefficients and
    /// drops zero pieces at either end.
    pub fn canonicalize(&mut self) {
        if self.pieces.is_empty() {
            return;
        }
        let scale = (0..self.pieces.len())
            .map(|i| poly::magnitude_bound(&self.pieces[i], self.width(i)))
            .fold(0.0_f64, f64::max);
        if scale == 0.0 {
            *self = Self::zero();
            return;
        }
        for i in 0..self.pieces.len() {
            let h = self.width(i).max(1.0);
            let mut pow = 1.0;
            for c in self.pieces[i].iter_mut() {
                if c.abs() * pow <= COEFF_TOL * 0.1 * scale {
                    *c = 0.0;
                }
                pow *= h;
            }
            poly::trim(&mut self.pieces[i]);
        }
        let mut breakpoints = vec![self.breakpoints[0]];
        let mut pieces: Vec<Vec<f64>> = Vec::new();
        for i in 0..self.pieces.len() {
            let current = &self.pieces[i];
            if let Some(last) = pieces.last() {
                let last_start = breakpoints[breakpoints.len() - 2];
                let extended = poly::taylor_shift(last, self.breakpoints[i] - last_start);
                if same_poly(&extended, current, scale) {
                    *breakpoints.last_mut().unwrap() = self.breakpoints[i + 1];
                    continue;
                }
            }
            pieces.push(current.clone());
            breakpoints.push(self.breakpoints[i + 1]);
        }
        while pieces.first().is_some_and(|p| p.is_empty()) {
            pieces.remove(0);
            breakpoints.remove(0);
        }
        while pieces.last().is_some_and(|p| p.is_empty()) {
            pieces.pop();
            breakpoints.pop();
        }
        if pieces.is_empty() {
            *self = Self::zero();
        } else {
            self.breakpoints = breakpoints;
            self.pieces = pieces;
        }
    }

    pub fn canonicalized(mut self) -> Self {
        self.canonicalize();
        self
    }

    /// Largest `|t|` at which the function is not identically zero.
    pub fn support_radius(&self) -> f64 {
        match self.support() {
            Some((a, b)) => a.abs().max(b.abs()),
            None => 0.0,
        }
    }

    /// Checks `f(t) = f(-t)` by comparing against the reflected representation.
    pub fn is_even(&self, tol: f64) -> bool {
        let reflected = self.reflect();
        let grid = self.merged_grid(&reflected);
        let scale = self.max_abs().max(1e-300);
        // Interior sample points only: values at jumps depend on the one-sided convention.
        grid.windows(2).all(|w| {
            [0.1, 0.3, 0.5, 0.7, 0.9].iter().all(|&frac| {
                let t = w[0] + (w[1] - w[0]) * frac;
                (self.eval(t) - reflected.eval(t)).abs() <= tol * scale
            })
        })
    }

    /// `max |f|` bound from coefficient magnitudes.
    pub fn max_abs(&self) -> f64 {
        (0..self.pieces.len())
            .map(|i| poly::magnitude_bound(&self.pieces[i], self.width(i)))
            .fold(0.0, f64::max)
    }

    /// Number of derivatives that stay continuous across every breakpoint (the function is
    /// extended by zero outside its support), i.e. `k` such that `f ∈ C^(k-1)` but the `k`-th
    /// derivative jumps. Returns `None` for the zero function.
    pub fn continuity_order(&self) -> Option<usize> {
        if self.is_zero() {
            return None;
        }
        let scale = self.max_abs();
        let n = self.pieces.len();
        let max_deg = self.degree() + 1;
        for order in 0..=max_deg {
            for b in 0..=n {
                let left = if b == 0 {
                    Vec::new()
                } else {
                    poly::taylor_shift(&self.pieces[b - 1], self.width(b - 1))
                };
                let right: Vec<f64> = if b == n {
                    Vec::new()
                } else {
                    self.pieces[b].clone()
                };
                let lv = derivative_at_zero(&left, order);
                let rv = derivative_at_zero(&right, order);
                let width = if b < n {
                    self.width(b)
                } else {
                    self.width(b - 1)
                };
                if (lv - rv).abs() > 1e-9 * scale / width.powi(order as i32).max(1e-300) {
                    return Some(order);
                }
            }
        }
        Some(max_deg)
    }
}

fn derivative_at_zero(coeffs: &[f64], order: usize) -> f64 {
    let mut p = coeffs.to_vec();
    for _ in 0..order {
        p = poly::derivative(&p);
    }
    p.first().copied().unwrap_or(0.0)
}

fn same_poly(a: &[f64], b: &[f64], scale: f64) -> bool {
    let n = a.len().max(b.len());
    (0..n).all(|k| {
        let x = a.get(k).copied().unwrap_or(0.0);
        let y = b.get(k).copied().unwrap_or(0.0);
        (x - y).abs() <= COEFF_TOL * scale.max(x.abs()).max(y.abs())
    })
}

fn snap_tol(x: f64) -> f64 {
    1e-12 * x.abs().max(1.0)
}

fn sort_dedup(grid: &mut Vec<f64>) {
    grid.sort_by(f64::total_cmp);
    grid.dedup_by(|b, a| (*b - *a).abs() <= snap_tol(*a));
}

/// Convolution of `p` on `[0, h1]` with `q` on `[0, h2]`, as polynomial pieces in the
/// coordinate local to each sub-interval start. Returns `(y0, y1, poly)` triples.
fn pair_convolution(p: &[f64], h1: f64, q: &[f64], h2: f64) -> Vec<(f64, f64, Vec<f64>)> {
    let mut cuts = vec![0.0, h1, h2, h1 + h2];
    sort_dedup(&mut cuts);
    let max_e = p.len() + q.len();
    let binom = binomials(q.len());
    let mut out = Vec::new();
    for w in cuts.windows(2) {
        let (y0, y1) = (w[0], w[1]);
        let mid = 0.5 * (y0 + y1);
        // Bounds as polynomials in v = y - y0.
        let lower: Vec<f64> = if mid - h2 > 0.0 {
            vec![y0 - h2, 1.0]
        } else {
            vec![0.0]
        };
        let upper: Vec<f64> = if mid < h1 { vec![y0, 1.0] } else { vec![h1] };
        // diff[e] = U^e - L^e
        let mut up_pow = vec![1.0];
        let mut lo_pow = vec![1.0];
        let mut diff = Vec::with_capacity(max_e + 1);
        for _ in 0..=max_e {
            let mut d = up_pow.clone();
            poly::add_into(&mut d, &poly::scale(&lo_pow, -1.0));
            diff.push(d);
            up_pow = poly::mul(&up_pow, &upper);
            lo_pow = poly::mul(&lo_pow, &lower);
        }
        // y^j = (v + y0)^j
        let y_pows: Vec<Vec<f64>> = (0..q.len()).map(|j| poly::linear_power(y0, j)).collect();
        let mut acc: Vec<f64> = Vec::new();
        for (k, &pk) in p.iter().enumerate() {
            if pk == 0.0 {
                continue;
            }
            for (m, &qm) in q.iter().enumerate() {
                if qm == 0.0 {
                    continue;
                }
                for r in 0..=m {
                    let e = k + r + 1;
                    let sign = if r % 2 == 1 { -1.0 } else { 1.0 };
                    let coef = pk * qm * binom[m][r] * sign / e as f64;
                    let term = poly::mul(&y_pows[m - r], &diff[e]);
                    poly::add_into(&mut acc, &poly::scale(&term, coef));
                }
            }
        }
        out.push((y0, y1, acc));
    }
    out
}

fn binomials(n: usize) -> Vec<Vec<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(n);
    for m in 0..n {
        let mut row = vec![1.0; m + 1];
        for r in 1..m {
            row[r] = rows[m - 1][r - 1] + rows[m - 1][r];
        }
        rows.push(row);
    }
    rows
}
