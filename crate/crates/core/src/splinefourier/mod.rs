//! Test functions whose Fourier transforms are compactly supported, even, piecewise
//! polynomials.
//!
//! The transform convention is `Φ̂(t) = ∫ Φ(x) e^{-2πitx} dx`, so that
//! `Φ(z) = ∫ Φ̂(t) e^{2πitz} dt` is entire and pointwise products of test functions
//! correspond to convolutions of their transforms.

mod piecewise;
mod poly;

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub use piecewise::{PiecewisePoly, COEFF_TOL};

use crate::error::{Error, Result};

/// Tolerance for the evenness check on custom transforms.
const EVEN_TOL: f64 = 1e-12;

/// Built-in transform shapes. Every member has support `[-1, 1]` at `sigma = 1` and is
/// dilated to the requested support radius; box, Fejér and the B-splines all peak at 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Box,
    Fejer,
    QuadraticBspline,
    CubicBspline,
    Zero,
}

impl Family {
    pub fn unit_transform(self) -> PiecewisePoly {
        let third = 1.0 / 3.0;
        let (breaks, pieces): (Vec<f64>, Vec<Vec<f64>>) = match self {
            Family::Zero => return PiecewisePoly::zero(),
            Family::Box => (vec![-1.0, 1.0], vec![vec![1.0]]),
            Family::Fejer => (vec![-1.0, 0.0, 1.0], vec![vec![0.0, 1.0], vec![1.0, -1.0]]),
            Family::QuadraticBspline => (
                vec![-1.0, -third, third, 1.0],
                vec![
                    vec![0.0, 0.0, 1.5],
                    vec![2.0 * third, 2.0, -3.0],
                    vec![2.0 * third, -2.0, 1.5],
                ],
            ),
            Family::CubicBspline => (
                vec![-1.0, -0.5, 0.0, 0.5, 1.0],
                vec![
                    vec![0.0, 0.0, 0.0, 2.0],
                    vec![0.25, 1.5, 3.0, -6.0],
                    vec![1.0, 0.0, -6.0, 6.0],
                    vec![0.25, -1.5, 3.0, -2.0],
                ],
            ),
        };
        PiecewisePoly::new(breaks, pieces).expect("built-in shapes are well formed")
    }

    pub fn name(self) -> &'static str {
        match self {
            Family::Box => "box",
            Family::Fejer => "fejer",
            Family::QuadraticBspline => "quadratic_bspline",
            Family::CubicBspline => "cubic_bspline",
            Family::Zero => "zero",
        }
    }
}

/// JSON description of a test function: a built-in family at a given support radius, or a
/// custom even transform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TestFunctionSpec {
    Builtin {
        family: Family,
        #[serde(default = "default_sigma")]
        sigma: f64,
    },
    Custom {
        breakpoints: Vec<f64>,
        pieces: Vec<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        label: Option<String>,
    },
}

fn default_sigma() -> f64 {
    1.0
}

impl TestFunctionSpec {
    pub fn builtin(family: Family, sigma: f64) -> Self {
        Self::Builtin { family, sigma }
    }

    pub fn build(&self) -> Result<TestFunction> {
        match self {
            Self::Builtin { family, sigma } => TestFunction::builtin(*family, *sigma),
            Self::Custom {
                breakpoints,
                pieces,
                label,
            } => {
                let fhat = PiecewisePoly::new(breakpoints.clone(), pieces.clone())?;
                TestFunction::new(fhat, label.clone().unwrap_or_else(|| "custom".into()))
            }
        }
    }
}

/// One piece of `Φ̂` restricted to `t ≥ 0`: start, width, local coefficients.
#[derive(Debug, Clone, PartialEq)]
struct HalfPiece {
    start: f64,
    width: f64,
    coeffs: Vec<f64>,
}

/// A Paley–Wiener test function, stored through its transform.
#[derive(Debug, Clone, PartialEq)]
pub struct TestFunction {
    fhat: PiecewisePoly,
    sigma: f64,
    label: String,
    phi_at_zero: f64,
    fhat_at_zero: f64,
    half: Vec<HalfPiece>,
    decay: Option<usize>,
}

impl fmt::Display for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (sigma = {})", self.label, self.sigma)
    }
}

impl TestFunction {
    pub fn new(fhat: PiecewisePoly, label: impl Into<String>) -> Result<Self> {
        let fhat = fhat.canonicalized();
        if !fhat.is_even(EVEN_TOL) {
            return Err(Error::InvalidParameter(
                "test function transform must be even".into(),
            ));
        }
        let sigma = fhat.support_radius();
        let half_poly = fhat.restrict(0.0, f64::INFINITY);
        let half = half_poly
            .pieces()
            .iter()
            .zip(half_poly.breakpoints().windows(2))
            .map(|(c, w)| HalfPiece {
                start: w[0],
                width: w[1] - w[0],
                coeffs: c.clone(),
            })
            .collect();
        let mut f = Self {
            phi_at_zero: fhat.integral(),
            fhat_at_zero: fhat.eval(0.0),
            decay: fhat.continuity_order().map(|k| k + 1),
            fhat,
            sigma,
            label: label.into(),
            half,
        };
        if f.fhat.is_zero() {
            f.phi_at_zero = 0.0;
            f.fhat_at_zero = 0.0;
        }
        Ok(f)
    }

    pub fn builtin(family: Family, sigma: f64) -> Result<Self> {
        let unit = Self::new(family.unit_transform(), family.name())?;
        if family == Family::Zero {
            return Ok(unit);
        }
        let mut f = dilate(&unit, sigma)?;
        f.label = format!("{}({})", family.name(), sigma);
        Ok(f)
    }

    pub fn zero() -> Self {
        Self::new(PiecewisePoly::zero(), "zero").expect("zero is even")
    }

    pub fn fejer(sigma: f64) -> Self {
        Self::builtin(Family::Fejer, sigma).expect("valid sigma")
    }

    pub fn fhat(&self) -> &PiecewisePoly {
        &self.fhat
    }

    /// Smallest `σ` with `supp Φ̂ ⊆ [-σ, σ]`.
    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// `Φ(0) = ∫ Φ̂`.
    pub fn phi_at_zero(&self) -> f64 {
        self.phi_at_zero
    }

    /// `Φ̂(0)`.
    pub fn fhat_at_zero(&self) -> f64 {
        self.fhat_at_zero
    }

    pub fn is_zero(&self) -> bool {
        self.fhat.is_zero()
    }

    /// Algebraic decay order of `Φ` along horizontal lines: `|Φ(x + iy)| = O(|x|^{-decay})`.
    /// `None` for the zero function.
    pub fn decay_order(&self) -> Option<usize> {
        self.decay
    }

    pub fn eval_fhat(&self, t: f64) -> f64 {
        self.fhat.eval(t)
    }

    /// `Φ(z) = 2 ∫_0^σ Φ̂(t) cos(2πtz) dt`, summed piece by piece in closed form.
    pub fn eval_phi(&self, z: Complex64) -> Complex64 {
        let lambda = Complex64::new(-2.0 * PI * z.im, 2.0 * PI * z.re);
        self.half
            .iter()
            .map(|p| piece_exp(p, lambda) + piece_exp(p, -lambda))
            .sum()
    }

    /// `Φ(x)` for real `x`.
    pub fn eval_phi_real(&self, x: f64) -> f64 {
        let lambda = Complex64::new(0.0, 2.0 * PI * x);
        2.0 * self
            .half
            .iter()
            .map(|p| piece_exp(p, lambda).re)
            .sum::<f64>()
    }

    /// `Φ(iw) = ∫ Φ̂(t) e^{-2πtw} dt`.
    pub fn eval_phi_at_iw(&self, w: Complex64) -> Complex64 {
        self.eval_phi(Complex64::i() * w)
    }

    /// One-sided Laplace transform `∫_0^∞ Φ̂(t) e^{-2πtw} dt`.
    pub fn half_laplace(&self, w: Complex64) -> Complex64 {
        let lambda = -2.0 * PI * w;
        self.half.iter().map(|p| piece_exp(p, lambda)).sum()
    }
}

/// `∫ f(t) e^{λt} dt` for an arbitrary piecewise polynomial.
pub fn exp_transform(f: &PiecewisePoly, lambda: Complex64) -> Complex64 {
    f.pieces()
        .iter()
        .zip(f.breakpoints().windows(2))
        .map(|(c, w)| {
            piece_exp(
                &HalfPiece {
                    start: w[0],
                    width: w[1] - w[0],
                    coeffs: c.clone(),
                },
                lambda,
            )
        })
        .sum()
}

/// `∫_a^{a+h} p(t - a) e^{λt} dt`.
fn piece_exp(piece: &HalfPiece, lambda: Complex64) -> Complex64 {
    let h = piece.width;
    let scaled = lambda.norm() * h;
    let deg = piece.coeffs.len().saturating_sub(1);
    let local = if scaled <= 1.5 {
        exp_moment_series(&piece.coeffs, h, lambda)
    } else if deg <= 6 || scaled >= 2.0 * deg as f64 {
        exp_moment_by_parts(&piece.coeffs, h, lambda)
    } else {
        // High degree at moderate frequency: split so each part is in the series regime.
        let parts = (scaled / 1.5).ceil() as usize;
        let step = h / parts as f64;
        (0..parts)
            .map(|j| {
                let offset = j as f64 * step;
                let shifted = poly::taylor_shift(&piece.coeffs, offset);
                (lambda * offset).exp() * exp_moment_series(&shifted, step, lambda)
            })
            .sum()
    };
    (lambda * piece.start).exp() * local
}

/// `∫_0^h p(s) e^{λs} ds` by the power series of the exponential.
fn exp_moment_series(coeffs: &[f64], h: f64, lambda: Complex64) -> Complex64 {
    let lh = lambda * h;
    let mut acc = Complex64::new(0.0, 0.0);
    // h^{k+1} Σ_m (λh)^m / (m! (k+m+1))
    let mut hk = h;
    for (k, &c) in coeffs.iter().enumerate() {
        if c != 0.0 {
            let mut term = Complex64::new(1.0, 0.0);
            let mut sum = Complex64::new(0.0, 0.0);
            for m in 0..80 {
                let contrib = term / (k + m + 1) as f64;
                sum += contrib;
                if contrib.norm() < 1e-18 * sum.norm().max(1e-300) {
                    break;
                }
                term = term * lh / (m + 1) as f64;
            }
            acc += sum * c * hk;
        }
        hk *= h;
    }
    acc
}

/// `∫_0^h p(s) e^{λs} ds = [e^{λs} Σ_j (-1)^j p^{(j)}(s) / λ^{j+1}]_0^h`.
fn exp_moment_by_parts(coeffs: &[f64], h: f64, lambda: Complex64) -> Complex64 {
    let inv = lambda.inv();
    let mut deriv = coeffs.to_vec();
    let mut at_h = Complex64::new(0.0, 0.0);
    let mut at_0 = Complex64::new(0.0, 0.0);
    let mut factor = inv;
    while !deriv.is_empty() {
        at_h += factor * poly::eval(&deriv, h);
        at_0 += factor * deriv[0];
        deriv = poly::derivative(&deriv);
        factor = -factor * inv;
    }
    (lambda * h).exp() * at_h - at_0
}

/// `Φ̂_new(t) = Φ̂(t / σ)`, so `Φ_new(x) = σ Φ(σx)` and the support radius scales by `σ`.
pub fn dilate(f: &TestFunction, sigma: f64) -> Result<TestFunction> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "dilation factor must be positive, got {sigma}"
        )));
    }
    if sigma == 1.0 {
        return Ok(f.clone());
    }
    TestFunction::new(f.fhat.dilate(sigma), format!("{}@{}", f.label, sigma))
}

/// Transform-side convolution, i.e. the transform of the pointwise product.
pub fn convolve_hats(f: &PiecewisePoly, g: &PiecewisePoly) -> PiecewisePoly {
    f.convolve(g)
}

/// `Φ_k Π_{j∈G} Φ_j`, built by convolving transforms in increasing index order.
pub fn product_test_function(
    k: usize,
    group: &[usize],
    phis: &[TestFunction],
) -> Result<TestFunction> {
    let check = |i: usize| {
        if i < phis.len() {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "index {i} out of range for {} functions",
                phis.len()
            )))
        }
    };
    check(k)?;
    if group.is_empty() {
        return Ok(phis[k].clone());
    }
    let mut members = group.to_vec();
    members.sort_unstable();
    let mut fhat = phis[k].fhat.clone();
    let mut label = phis[k].label.clone();
    for &j in &members {
        check(j)?;
        fhat = fhat.convolve(&phis[j].fhat);
        label.push('·');
        label.push_str(&phis[j].label);
    }
    let sigma_sum: f64 = phis[k].sigma + members.iter().map(|&j| phis[j].sigma).sum::<f64>();
    let mut out = TestFunction::new(fhat, label)?;
    if !out.is_zero() {
        // Minkowski sum of supports; avoid drifting by rounding in the convolution grid.
        debug_assert!((out.sigma - sigma_sum).abs() < 1e-9 * sigma_sum.max(1.0));
        out.sigma = sigma_sum;
    }
    Ok(out)
}

/// `σ²_Φ = 2 ∫ |t| Φ̂(t)² dt`.
pub fn sigma_sq(f: &TestFunction) -> f64 {
    4.0 * f.fhat.mul(&f.fhat).moment(1, 0.0, f64::INFINITY)
}
