//! Numerical integration with error control: adaptive Gauss–Kronrod on intervals, nested
//! adaptive integration over boxes, and truncated integrals along vertical lines in the
//! complex plane.

use std::cell::{Cell, RefCell};
use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::PI;
use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Largest box dimension accepted by [`integrate_box`].
pub const MAX_BOX_DIM: usize = 4;

/// Accuracy and effort controls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadSpec {
    pub abs_tol: f64,
    /// Bisections allowed beyond the initial panels.
    pub max_subdivisions: usize,
    /// Target bound on the neglected tails of a truncated vertical line.
    pub contour_truncation_margin: f64,
    /// Hard cap on the half-length of a truncated vertical line.
    pub max_truncation: f64,
    /// Initial panels per period of the fastest oscillation along a vertical line.
    pub panels_per_period: f64,
}

impl Default for QuadSpec {
    fn default() -> Self {
        Self {
            abs_tol: 1e-10,
            max_subdivisions: 100_000,
            contour_truncation_margin: 1e-12,
            max_truncation: 4000.0,
            panels_per_period: 4.0,
        }
    }
}

impl QuadSpec {
    /// Defaults for box integration, where the tolerance applies per dimension.
    pub fn for_box() -> Self {
        Self {
            abs_tol: 1e-8,
            ..Self::default()
        }
    }

    pub fn with_tol(self, abs_tol: f64) -> Self {
        Self { abs_tol, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "abs_tol must be positive, got {}",
                self.abs_tol
            )));
        }
        if self.max_subdivisions < 1 {
            return Err(Error::InvalidParameter(
                "max_subdivisions must be at least 1".into(),
            ));
        }
        if !(self.contour_truncation_margin > 0.0)
            || !(self.max_truncation > 0.0)
            || !(self.panels_per_period > 0.0)
        {
            return Err(Error::InvalidParameter(
                "contour controls must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// A value with an error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate<T> {
    pub value: T,
    pub error: f64,
}

/// Scalars the adaptive rule can integrate.
pub trait QuadValue:
    Copy + Default + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self>
{
    fn magnitude(self) -> f64;
}

impl QuadValue for f64 {
    fn magnitude(self) -> f64 {
        self.abs()
    }
}

impl QuadValue for Complex64 {
    fn magnitude(self) -> f64 {
        self.norm()
    }
}

// 21-point Kronrod extension of the 10-point Gauss rule; nodes in decreasing order, the
// Gauss nodes sit at odd positions.
const XGK: [f64; 11] = [
    0.995657163025808080735527280689003,
    0.973906528517171720077964012084452,
    0.930157491355708226001207180059508,
    0.865063366688984510732096688423493,
    0.780817726586416897063717578345042,
    0.679409568299024406234327365114874,
    0.562757134668604683339000099272694,
    0.433395394129247190799265943165784,
    0.294392862701460198131126603103866,
    0.148874338981631210884826001129720,
    0.0,
];
const WGK: [f64; 11] = [
    0.011694638867371874278064396062192,
    0.032558162307964727478818972459390,
    0.054755896574351996031381300244580,
    0.075039674810919952767043140916190,
    0.093125454583697605535065465083366,
    0.109387158802297641899210590325805,
    0.123491976262065851077600525478876,
    0.134709217311473325928054001771707,
    0.142775938577060080797094273138717,
    0.147739104901338491374841515972068,
    0.149445554002916905664936468389821,
];
const WG: [f64; 5] = [
    0.066671344308688137593568809893332,
    0.149451349150580593145776339657697,
    0.219086362515982043995534934228163,
    0.269266719309996355091226921569469,
    0.295524224714752870173892994651338,
];

struct Panel<T> {
    a: f64,
    b: f64,
    value: T,
    error: f64,
}

impl<T> PartialEq for Panel<T> {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl<T> Eq for Panel<T> {}
impl<T> PartialOrd for Panel<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<T> Ord for Panel<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error
            .total_cmp(&other.error)
            .then(other.a.total_cmp(&self.a))
    }
}

/// One Gauss–Kronrod panel: value, error estimate `|K21 - G10|` and a rounding floor.
fn kronrod<T: QuadValue>(g: &impl Fn(f64) -> T, a: f64, b: f64) -> (T, f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = g(c);
    let mut k = fc * WGK[10];
    let mut gauss = T::default();
    let mut abs = fc.magnitude() * WGK[10];
    for i in 0..10 {
        let dx = h * XGK[i];
        let f1 = g(c - dx);
        let f2 = g(c + dx);
        let s = f1 + f2;
        k = k + s * WGK[i];
        abs += (f1.magnitude() + f2.magnitude()) * WGK[i];
        if i % 2 == 1 {
            gauss = gauss + s * WG[i / 2];
        }
    }
    let value = k * h;
    let error = ((k - gauss) * h).magnitude();
    let floor = 50.0 * f64::EPSILON * abs * h.abs();
    (value, error, floor)
}

/// Globally adaptive bisection over the given initial panels (`edges` sorted).
fn adaptive<T: QuadValue>(
    g: &impl Fn(f64) -> T,
    edges: &[f64],
    spec: &QuadSpec,
) -> Result<Estimate<T>> {
    spec.validate()?;
    let mut heap = BinaryHeap::new();
    let mut settled = T::default();
    let mut settled_err = 0.0;
    let push = |heap: &mut BinaryHeap<Panel<T>>,
                settled: &mut T,
                settled_err: &mut f64,
                a: f64,
                b: f64| {
        let (value, error, floor) = kronrod(g, a, b);
        if !(error.is_finite() && value.magnitude().is_finite()) {
            return Err(Error::UnsupportedIntegrand(format!(
                "non-finite integrand on [{a}, {b}]"
            )));
        }
        if error <= floor || b - a <= 1e-13 * a.abs().max(b.abs()).max(1.0) {
            *settled = *settled + value;
            *settled_err += error.max(floor);
        } else {
            heap.push(Panel { a, b, value, error });
        }
        Ok(())
    };
    for w in edges.windows(2) {
        if w[1] > w[0] {
            push(&mut heap, &mut settled, &mut settled_err, w[0], w[1])?;
        }
    }
    let mut splits = 0;
    loop {
        let open_err: f64 = heap.iter().map(|p| p.error).sum();
        let total_err = open_err + settled_err;
        let done = total_err <= spec.abs_tol || heap.is_empty();
        if done || splits >= spec.max_subdivisions {
            let value = heap.iter().fold(settled, |acc, p| acc + p.value);
            if total_err <= spec.abs_tol {
                return Ok(Estimate {
                    value,
                    error: total_err,
                });
            }
            return Err(Error::Accuracy {
                value: value.magnitude(),
                error: total_err,
                tol: spec.abs_tol,
            });
        }
        let worst = heap.pop().expect("nonempty heap");
        let mid = 0.5 * (worst.a + worst.b);
        push(&mut heap, &mut settled, &mut settled_err, worst.a, mid)?;
        push(&mut heap, &mut settled, &mut settled_err, mid, worst.b)?;
        splits += 1;
    }
}

fn panel_edges(a: f64, b: f64, breaks: &[f64]) -> Vec<f64> {
    let mut edges = vec![a];
    edges.extend(breaks.iter().copied().filter(|&x| x > a && x < b));
    edges.push(b);
    edges.sort_by(f64::total_cmp);
    edges.dedup();
    edges
}

/// `∫_a^b g`.
pub fn integrate_interval<T: QuadValue>(
    g: impl Fn(f64) -> T,
    a: f64,
    b: f64,
    spec: &QuadSpec,
) -> Result<Estimate<T>> {
    integrate_interval_with_breaks(g, a, b, &[], spec)
}

/// `∫_a^b g` with known points of nonsmoothness used as initial subdivision points.
pub fn integrate_interval_with_breaks<T: QuadValue>(
    g: impl Fn(f64) -> T,
    a: f64,
    b: f64,
    breaks: &[f64],
    spec: &QuadSpec,
) -> Result<Estimate<T>> {
    if !(a <= b) || !a.is_finite() || !b.is_finite() {
        return Err(Error::InvalidParameter(format!("bad interval [{a}, {b}]")));
    }
    if a == b {
        spec.validate()?;
        return Ok(Estimate {
            value: T::default(),
            error: 0.0,
        });
    }
    adaptive(&g, &panel_edges(a, b, breaks), spec)
}

/// `∫_box g` by nested adaptive integration, outermost coordinate first.
pub fn integrate_box(
    g: impl Fn(&[f64]) -> f64,
    bounds: &[(f64, f64)],
    spec: &QuadSpec,
) -> Result<Estimate<f64>> {
    integrate_box_with_breaks(g, bounds, |_, _| Vec::new(), spec)
}

/// As [`integrate_box`], with `breaks(d, prefix)` naming the kinks of the integrand in
/// coordinate `d` once the coordinates `prefix = x_0..x_{d-1}` are fixed.
pub fn integrate_box_with_breaks(
    g: impl Fn(&[f64]) -> f64,
    bounds: &[(f64, f64)],
    breaks: impl Fn(usize, &[f64]) -> Vec<f64>,
    spec: &QuadSpec,
) -> Result<Estimate<f64>> {
    spec.validate()?;
    if bounds.len() > MAX_BOX_DIM {
        return Err(Error::SizeLimit {
            what: "box dimension",
            got: bounds.len(),
            cap: MAX_BOX_DIM,
        });
    }
    let nested = Nested {
        g: &g,
        bounds,
        breaks: &breaks,
        spec,
        failure: RefCell::new(None),
    };
    let out = nested.level(&mut Vec::with_capacity(bounds.len()));
    if let Some(e) = nested.failure.into_inner() {
        return Err(e);
    }
    out
}

struct Nested<'a, G, B> {
    g: &'a G,
    bounds: &'a [(f64, f64)],
    breaks: &'a B,
    spec: &'a QuadSpec,
    failure: RefCell<Option<Error>>,
}

impl<G, B> Nested<'_, G, B>
where
    G: Fn(&[f64]) -> f64,
    B: Fn(usize, &[f64]) -> Vec<f64>,
{
    fn level(&self, prefix: &mut Vec<f64>) -> Result<Estimate<f64>> {
        let d = prefix.len();
        if d == self.bounds.len() {
            return Ok(Estimate {
                value: (self.g)(prefix),
                error: 0.0,
            });
        }
        let (a, b) = self.bounds[d];
        let cuts = (self.breaks)(d, prefix);
        let inner_err = Cell::new(0.0_f64);
        let prefix_cell = RefCell::new(std::mem::take(prefix));
        let f = |x: f64| {
            if self.failure.borrow().is_some() {
                return 0.0;
            }
            let mut p = prefix_cell.borrow().clone();
            p.push(x);
            match self.level(&mut p) {
                Ok(e) => {
                    inner_err.set(inner_err.get().max(e.error));
                    e.value
                }
                Err(e) => {
                    self.failure.borrow_mut().get_or_insert(e);
                    0.0
                }
            }
        };
        let out = integrate_interval_with_breaks(f, a, b, &cuts, self.spec);
        *prefix = prefix_cell.into_inner();
        let out = out?;
        Ok(Estimate {
            value: out.value,
            error: out.error + (b - a) * inner_err.get(),
        })
    }
}

/// Result of a truncated vertical-line integral.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineEstimate {
    pub value: Complex64,
    /// Quadrature error plus the bound on the neglected tails.
    pub error: f64,
    pub truncation: f64,
    pub tail_bound: f64,
}

/// `(1/2πi) ∫_{Re w = δ} h(w) dw` truncated to `|Im w| ≤ T`.
///
/// `decay_order` is an `A ≥ 2` with `|h(δ + it)| ≤ C (1 + |t|)^{-A}`; `C` is estimated by
/// sampling `|h|` at `|t| ∈ {10, 20, 40}` and `T` solves `C T^{1-A} / (A - 1) ≤ margin`,
/// clamped to `[40, max_truncation]`. `frequency` is the fastest oscillation of `h` in
/// cycles per unit of `Im w`; it sets the initial panel width.
pub fn integrate_vertical_line(
    h: impl Fn(Complex64) -> Complex64,
    delta: f64,
    decay_order: u32,
    frequency: f64,
    spec: &QuadSpec,
) -> Result<LineEstimate> {
    spec.validate()?;
    if decay_order < 2 {
        return Err(Error::UnsupportedIntegrand(format!(
            "vertical-line integrand must decay at least like |t|^-2, got order {decay_order}"
        )));
    }
    if !delta.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "bad contour abscissa {delta}"
        )));
    }
    let a = decay_order as f64;
    let on_line = |t: f64| h(Complex64::new(delta, t)) * (1.0 / (2.0 * PI));
    let constant = [10.0, 20.0, 40.0]
        .iter()
        .flat_map(|&t| [t, -t])
        .map(|t: f64| on_line(t).norm() * (1.0 + t.abs()).powf(a))
        .fold(0.0, f64::max);
    let tail = |t: f64| 2.0 * constant * t.powf(1.0 - a) / (a - 1.0);
    let wanted =
        (2.0 * constant / ((a - 1.0) * spec.contour_truncation_margin)).powf(1.0 / (a - 1.0));
    let truncation = wanted.clamp(40.0, spec.max_truncation.max(40.0));
    let width = if frequency > 0.0 {
        (1.0 / (spec.panels_per_period * frequency)).min(1.0)
    } else {
        1.0
    };
    let panels = (2.0 * truncation / width).ceil() as usize;
    let edges: Vec<f64> = (0..=panels)
        .map(|i| -truncation + 2.0 * truncation * i as f64 / panels as f64)
        .collect();
    let quad = adaptive(&on_line, &edges, spec)?;
    let tail_bound = tail(truncation);
    Ok(LineEstimate {
        value: quad.value,
        error: quad.error + tail_bound,
        truncation,
        tail_bound,
    })
}

/// Fixed nodes and weights for `(1/2πi) ∫_{Re w = δ} h(w) dw ≈ Σ_j weight_j h(node_j)`,
/// composite Gauss–Legendre on `|Im w| ≤ T`. Used for tensor-product contour integrals in
/// several variables, where nested adaptivity is too costly.
#[derive(Debug, Clone, PartialEq)]
pub struct LineRule {
    pub nodes: Vec<Complex64>,
    pub weights: Vec<f64>,
}

impl LineRule {
    pub fn new(delta: f64, truncation: f64, panel_width: f64, order: usize) -> Result<Self> {
        if !(truncation > 0.0 && panel_width > 0.0 && order >= 1) {
            return Err(Error::InvalidParameter(
                "line rule needs positive truncation, width and order".into(),
            ));
        }
        let (x, w) = gauss_legendre(order);
        // An even panel count keeps the node set symmetric about the real axis.
        let panels = 2 * (truncation / panel_width).ceil() as usize;
        let step = 2.0 * truncation / panels as f64;
        let mut nodes = Vec::with_capacity(panels * order);
        let mut weights = Vec::with_capacity(panels * order);
        for p in 0..panels {
            let center = -truncation + (p as f64 + 0.5) * step;
            for (xi, wi) in x.iter().zip(&w) {
                nodes.push(Complex64::new(delta, center + 0.5 * step * xi));
                weights.push(wi * 0.5 * step / (2.0 * PI));
            }
        }
        Ok(Self { nodes, weights })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn apply(&self, h: impl Fn(Complex64) -> Complex64) -> Complex64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&w, &c)| h(w) * c)
            .sum()
    }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() <= 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        dp = if d.is_finite() { d } else { dp };
        nodes.push(x);
        weights.push(2.0 / ((1.0 - x * x) * dp * dp));
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    (p1, n as f64 * (x * p1 - p0) / (x * x - 1.0))
}
