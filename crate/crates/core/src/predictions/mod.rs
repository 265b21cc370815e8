//! Closed-form and contour evaluations of the limiting centered moments.
//!
//! Indices into a [`MomentRequest`] are zero-based throughout.

mod contour;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fmt;

use crate::error::{Error, Result};
use crate::partitions::enumerate_pair_partitions;
use crate::quadrature::{integrate_box_with_breaks, Estimate, QuadSpec};
use crate::splinefourier::{product_test_function, sigma_sq, PiecewisePoly, TestFunction};

pub use contour::{v_contour, ContourOptions, GridRule, MAX_CONTOUR_DIM};

/// The moment formulas need `Σσ_i` strictly below this.
pub const SUPPORT_LIMIT: f64 = 4.0;

/// The functions `Φ_1, …, Φ_n` whose mixed moment is wanted.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentRequest {
    phis: Vec<TestFunction>,
    support_sum: f64,
}

impl MomentRequest {
    pub fn new(phis: Vec<TestFunction>) -> Result<Self> {
        if phis.is_empty() {
            return Err(Error::InvalidParameter(
                "a moment request needs at least one test function".into(),
            ));
        }
        let support_sum = phis.iter().map(TestFunction::sigma).sum();
        Ok(Self { phis, support_sum })
    }

    /// `n` copies of the same function.
    pub fn repeated(phi: &TestFunction, n: usize) -> Result<Self> {
        Self::new(vec![phi.clone(); n])
    }

    pub fn n(&self) -> usize {
        self.phis.len()
    }

    pub fn phis(&self) -> &[TestFunction] {
        &self.phis
    }

    pub fn support_sum(&self) -> f64 {
        self.support_sum
    }

    /// Fails unless `Σσ_i < 4`, the range where the moment formulas hold.
    pub fn check_support(&self) -> Result<()> {
        if self.support_sum < SUPPORT_LIMIT {
            Ok(())
        } else {
            Err(Error::SupportCondition(format!(
                "the sum of support radii is {}, but the moment formulas need it below {SUPPORT_LIMIT}",
                self.support_sum
            )))
        }
    }

    pub(crate) fn check_indices(&self, idx: &[usize]) -> Result<()> {
        match idx.iter().find(|&&i| i >= self.n()) {
            Some(i) => Err(Error::InvalidParameter(format!(
                "index {i} out of range for n = {}",
                self.n()
            ))),
            None => Ok(()),
        }
    }

    /// SHA-256 of the canonical JSON of the transforms, hex encoded.
    pub fn request_hash(&self) -> String {
        let phis: Vec<_> = self.phis.iter().map(TestFunction::fhat).collect();
        let doc = serde_json::json!({ "n": self.n(), "phis": phis });
        hex(&Sha256::digest(doc.to_string().as_bytes()))
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Which moment a report describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Quantity {
    C,
    C0,
    C2,
    #[serde(rename = "C_even")]
    CEven,
    #[serde(rename = "C_odd")]
    COdd,
    I2,
    V,
    #[serde(rename = "gaussian_limit")]
    GaussianLimit,
    #[serde(rename = "one_level")]
    OneLevel,
}

impl Quantity {
    pub fn name(self) -> &'static str {
        match self {
            Quantity::C => "C",
            Quantity::C0 => "C0",
            Quantity::C2 => "C2",
            Quantity::CEven => "C_even",
            Quantity::COdd => "C_odd",
            Quantity::I2 => "I2",
            Quantity::V => "V",
            Quantity::GaussianLimit => "gaussian_limit",
            Quantity::OneLevel => "one_level",
        }
    }

    /// Every quantity that [`predict`] evaluates from a request alone.
    pub fn moments() -> [Quantity; 5] {
        [
            Quantity::C,
            Quantity::C0,
            Quantity::C2,
            Quantity::CEven,
            Quantity::COdd,
        ]
    }
}

impl fmt::Display for Quantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Quantity {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| Error::InvalidParameter(format!("unknown quantity {s:?}")))
    }
}

/// How a value was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "closed-form")]
    ClosedForm,
    #[serde(rename = "contour")]
    Contour,
    #[serde(rename = "closed-form+quadrature")]
    ClosedFormQuadrature,
    #[serde(rename = "monte-carlo")]
    MonteCarlo,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Provenance {
    pub request_hash: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ensemble_n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub quantity: Quantity,
    pub value: f64,
    pub method: Method,
    /// Error bound for predictions, standard error for Monte Carlo.
    pub accuracy: f64,
    pub provenance: Provenance,
}

impl MomentReport {
    /// A prediction report; exact values get an accuracy at rounding level so it stays positive.
    pub fn prediction(
        quantity: Quantity,
        estimate: Estimate<f64>,
        method: Method,
        req: &MomentRequest,
    ) -> Self {
        Self {
            quantity,
            value: estimate.value,
            method,
            accuracy: estimate.error.max(rounding(estimate.value)),
            provenance: Provenance {
                request_hash: req.request_hash(),
                ..Provenance::default()
            },
        }
    }
}

fn rounding(v: f64) -> f64 {
    16.0 * f64::EPSILON * v.abs().max(1.0)
}

/// Accuracy controls for the quadrature-backed predictions.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionOptions {
    /// Per-dimension controls for the box integrals behind [`v_pair`].
    pub box_spec: QuadSpec,
    pub contour: ContourOptions,
}

impl Default for PredictionOptions {
    fn default() -> Self {
        Self {
            box_spec: QuadSpec::for_box().with_tol(1e-10),
            contour: ContourOptions::default(),
        }
    }
}

/// `2 ∫ |t| Φ̂_a(t) Φ̂_b(t) dt`.
pub fn i2(fa: &TestFunction, fb: &TestFunction) -> f64 {
    4.0 * fa.fhat().shifted_product_moment(0.0, fb.fhat(), 0.0, 1, 0.0)
}

/// `A_1 A_2 − 4B` with `A_i = ∫_0^∞ Φ̂_i(t + 1 + U_i) dt` and
/// `B = ∫_0^∞ t Φ̂_1(t + 1 + U_1) Φ̂_2(t + 1 + U_2) dt`.
pub fn iscr(f1: &TestFunction, f2: &TestFunction, u1: f64, u2: f64) -> f64 {
    iscr_hats(f1.fhat(), f2.fhat(), u1, u2)
}

fn iscr_hats(f1: &PiecewisePoly, f2: &PiecewisePoly, u1: f64, u2: f64) -> f64 {
    let (s1, s2) = (1.0 + u1, 1.0 + u2);
    let a1 = f1.tail_integral(s1);
    let a2 = f2.tail_integral(s2);
    a1 * a2 - 4.0 * f1.shifted_product_moment(s1, f2, s2, 1, 0.0)
}

/// `𝓥({k1, k2}, G)` as a sum of box integrals of [`iscr`], with `k1 < k2`.
///
/// Each `j ∈ G` either shifts the first argument (`G₁`), shifts the second (`G₂`), or is
/// multiplied into `Φ_{k1}` (`G₃`, only `j > k1`) or `Φ_{k2}` (`G₄`, only `j > k2`).
pub fn v_pair(
    k1: usize,
    k2: usize,
    group: &[usize],
    req: &MomentRequest,
    spec: &QuadSpec,
) -> Result<Estimate<f64>> {
    req.check_indices(&[k1, k2])?;
    req.check_indices(group)?;
    if k1 >= k2 {
        return Err(Error::InvalidParameter(format!(
            "v_pair expects k1 < k2, got {k1} and {k2}"
        )));
    }
    if group.contains(&k1) || group.contains(&k2) {
        return Err(Error::InvalidParameter(
            "G must not contain k1 or k2".into(),
        ));
    }
    let mut group = group.to_vec();
    group.sort_unstable();
    if group.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::InvalidParameter("repeated index in G".into()));
    }
    let phis = req.phis();
    let mut total = Estimate {
        value: 0.0,
        error: 0.0,
    };
    let reach = phis[k1].sigma() + phis[k2].sigma() + group.iter().map(|&j| phis[j].sigma()).sum::<f64>();
    if reach <= 2.0 {
        return Ok(total);
    }
    let m = group.len();
    let mut labels = vec![0u8; m];
    loop {
        let pick = |c: u8| -> Vec<usize> {
            group
                .iter()
                .zip(&labels)
                .filter(|(_, &l)| l == c)
                .map(|(&j, _)| j)
                .collect()
        };
        let (g1, g2, g3, g4) = (pick(0), pick(1), pick(2), pick(3));
        let allowed = g3.iter().all(|&j| j > k1) && g4.iter().all(|&j| j > k2);
        if allowed {
            let term = pair_term(k1, k2, &g1, &g2, &g3, &g4, phis, spec)?;
            let sign = (-2.0f64).powi((m + g1.len() + g2.len()) as i32);
            total.value += sign * term.value;
            total.error += sign.abs() * term.error;
        }
        // Next labelling in base 4.
        let mut pos = 0;
        while pos < m && labels[pos] == 3 {
            labels[pos] = 0;
            pos += 1;
        }
        if pos == m {
            break;
        }
        labels[pos] += 1;
    }
    Ok(total)
}

#[allow(clippy::too_many_arguments)]
fn pair_term(
    k1: usize,
    k2: usize,
    g1: &[usize],
    g2: &[usize],
    g3: &[usize],
    g4: &[usize],
    phis: &[TestFunction],
    spec: &QuadSpec,
) -> Result<Estimate<f64>> {
    let f1 = product_test_function(k1, g3, phis)?;
    let f2 = product_test_function(k2, g4, phis)?;
    let zero = Estimate {
        value: 0.0,
        error: 0.0,
    };
    // Both arguments must reach past 1 for either factor of 𝓘 to be nonzero.
    let (r1, r2) = (f1.sigma() - 1.0, f2.sigma() - 1.0);
    if f1.is_zero() || f2.is_zero() || r1 <= 0.0 || r2 <= 0.0 {
        return Ok(zero);
    }
    let shifts: Vec<&TestFunction> = g1.iter().chain(g2).map(|&j| &phis[j]).collect();
    if shifts.iter().any(|f| f.is_zero()) {
        return Ok(zero);
    }
    let split = g1.len();
    if shifts.is_empty() {
        return Ok(Estimate {
            value: iscr(&f1, &f2, 0.0, 0.0),
            error: 0.0,
        });
    }
    let bounds: Vec<(f64, f64)> = shifts
        .iter()
        .enumerate()
        .map(|(d, f)| (0.0, f.sigma().min(if d < split { r1 } else { r2 })))
        .collect();
    let (h1, h2) = (f1.fhat(), f2.fhat());
    let g = |u: &[f64]| {
        let u1: f64 = u[..split].iter().sum();
        let u2: f64 = u[split..].iter().sum();
        let weight: f64 = shifts.iter().zip(u).map(|(f, &x)| f.eval_fhat(x)).product();
        if weight == 0.0 {
            return 0.0;
        }
        weight * iscr_hats(h1, h2, u1, u2)
    };
    let breaks = |d: usize, prefix: &[f64]| -> Vec<f64> {
        let mut out: Vec<f64> = shifts[d].fhat().breakpoints().to_vec();
        let (own, other, partial, other_total) = if d < split {
            (h1, h2, prefix.iter().sum::<f64>(), None)
        } else {
            let u1: f64 = prefix[..split].iter().sum();
            (h2, h1, prefix[split..].iter().sum::<f64>(), Some(u1))
        };
        for &b in own.breakpoints() {
            out.push(b - 1.0 - partial);
            if d + 1 == shifts.len() || d + 1 == split {
                let offset = other_total.unwrap_or(0.0);
                for &c in other.breakpoints() {
                    out.push(b - c + offset - partial);
                }
            }
        }
        out
    };
    integrate_box_with_breaks(g, &bounds, breaks, spec)
}

/// `Σ` over pair partitions of `members` of `∏ 𝓘₂(block)`.
fn pair_sum(members: &[usize], table: &[Vec<f64>]) -> Result<f64> {
    let mut acc = 0.0;
    for p in enumerate_pair_partitions(members)? {
        acc += p.blocks().iter().map(|b| table[b[0]][b[1]]).product::<f64>();
    }
    Ok(acc)
}

fn i2_table(req: &MomentRequest) -> Vec<Vec<f64>> {
    let phis = req.phis();
    let n = phis.len();
    let mut t = vec![vec![0.0; n]; n];
    for a in 0..n {
        for b in a..n {
            let v = i2(&phis[a], &phis[b]);
            t[a][b] = v;
            t[b][a] = v;
        }
    }
    t
}

/// `Σ_{pair partitions of [n]} ∏ 𝓘₂`. Exact for any supports; only its reading as the
/// Gaussian part of the moment needs `Σσ < 4`.
pub fn c0(req: &MomentRequest) -> Result<f64> {
    let all: Vec<usize> = (0..req.n()).collect();
    pair_sum(&all, &i2_table(req))
}

/// One term of a sum over `[n] = K₀ ⊔ K′ ⊔ K″`.
#[derive(Debug, Clone)]
struct Split {
    k0: Vec<usize>,
    kp: Vec<usize>,
    kpp: Vec<usize>,
}

/// Every three-way split with `|K′|` in `sizes` and nonzero `C₀(K₀)` weight.
fn splits(n: usize, sizes: &[usize]) -> Vec<Split> {
    let mut out = Vec::new();
    let total = 3usize.pow(n as u32);
    for code in 0..total {
        let mut c = code;
        let mut s = Split {
            k0: Vec::new(),
            kp: Vec::new(),
            kpp: Vec::new(),
        };
        for i in 0..n {
            match c % 3 {
                0 => s.k0.push(i),
                1 => s.kp.push(i),
                _ => s.kpp.push(i),
            }
            c /= 3;
        }
        if sizes.contains(&s.kp.len()) && s.k0.len() % 2 == 0 {
            out.push(s);
        }
    }
    out
}

/// `Σ_{|K′| = 2} 𝓥(K′, K″) C₀(K₀)` with every `𝓥` from [`v_pair`].
pub fn c2(req: &MomentRequest, opts: &PredictionOptions) -> Result<Estimate<f64>> {
    req.check_support()?;
    let table = i2_table(req);
    let terms = splits(req.n(), &[2]);
    let parts: Vec<Result<Estimate<f64>>> = terms
        .par_iter()
        .map(|s| {
            let w = pair_sum(&s.k0, &table)?;
            if w == 0.0 {
                return Ok(Estimate {
                    value: 0.0,
                    error: 0.0,
                });
            }
            let v = v_pair(s.kp[0], s.kp[1], &s.kpp, req, &opts.box_spec)?;
            Ok(Estimate {
                value: w * v.value,
                error: w.abs() * v.error,
            })
        })
        .collect();
    sum_estimates(parts)
}

fn sum_estimates(parts: Vec<Result<Estimate<f64>>>) -> Result<Estimate<f64>> {
    let mut total = Estimate {
        value: 0.0,
        error: 0.0,
    };
    for p in parts {
        let p = p?;
        total.value += p.value;
        total.error += p.error;
    }
    Ok(total)
}

/// `C(n) = C₀(n) + C₂(n)`.
pub fn c_total(req: &MomentRequest, opts: &PredictionOptions) -> Result<MomentReport> {
    let base = c0(req)?;
    let rest = c2(req, opts)?;
    let method = if rest.value == 0.0 && rest.error == 0.0 {
        Method::ClosedForm
    } else {
        Method::ClosedFormQuadrature
    };
    Ok(MomentReport::prediction(
        Quantity::C,
        Estimate {
            value: base + rest.value,
            error: rest.error,
        },
        method,
        req,
    ))
}

/// The moments over the two cosets of the orthogonal group.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvenOdd {
    pub even: Estimate<f64>,
    pub odd: Estimate<f64>,
}

/// `C_even` and `C_odd` from the sum over `|K′| ≤ 3`, with `(−1)^{|K′|}` in the even case.
pub fn c_even_odd(req: &MomentRequest, opts: &PredictionOptions) -> Result<EvenOdd> {
    req.check_support()?;
    let table = i2_table(req);
    let terms = splits(req.n(), &[0, 1, 2, 3]);
    let parts: Vec<Result<(usize, Estimate<f64>)>> = terms
        .par_iter()
        .map(|s| {
            let w = pair_sum(&s.k0, &table)?;
            let v = if w == 0.0 {
                Estimate {
                    value: 0.0,
                    error: 0.0,
                }
            } else if s.kp.len() == 2 {
                v_pair(s.kp[0], s.kp[1], &s.kpp, req, &opts.box_spec)?
            } else {
                v_contour(&s.kp, &s.kpp, req, &opts.contour)?
            };
            Ok((
                s.kp.len(),
                Estimate {
                    value: w * v.value,
                    error: w.abs() * v.error,
                },
            ))
        })
        .collect();
    let zero = Estimate {
        value: 0.0,
        error: 0.0,
    };
    let mut out = EvenOdd {
        even: zero,
        odd: zero,
    };
    for p in parts {
        let (size, e) = p?;
        let sign = if size % 2 == 0 { 1.0 } else { -1.0 };
        out.even.value += sign * e.value;
        out.odd.value += e.value;
        out.even.error += e.error;
        out.odd.error += e.error;
    }
    Ok(out)
}

/// `(n−1)!! (σ²_Φ)^{n/2} δ_even(n) + C₂(n)` for `n` copies of one function.
pub fn gaussian_limit(req: &MomentRequest, opts: &PredictionOptions) -> Result<Estimate<f64>> {
    let first = &req.phis()[0];
    if req.phis().iter().any(|f| f.fhat() != first.fhat()) {
        return Err(Error::InvalidRequest(
            "the Gaussian formula needs every test function to be the same".into(),
        ));
    }
    req.check_support()?;
    let n = req.n();
    let mut gaussian = 0.0;
    if n % 2 == 0 {
        let double_factorial: f64 = (1..n).step_by(2).map(|k| k as f64).product();
        gaussian = double_factorial * sigma_sq(first).powi((n / 2) as i32);
    }
    let rest = c2(req, opts)?;
    Ok(Estimate {
        value: gaussian + rest.value,
        error: rest.error,
    })
}

/// Symmetry types with a closed-form one-level density for small support.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Symmetry {
    #[serde(rename = "O")]
    O,
    #[serde(rename = "SO_even")]
    SoEven,
    #[serde(rename = "USp")]
    USp,
}

/// `∫ Φ(x) W(x) dx` for the limiting one-level density `W` of the symmetry type.
pub fn one_level_integral(f: &TestFunction, symmetry: Symmetry) -> Result<f64> {
    let (hat, half) = (f.fhat_at_zero(), 0.5 * f.phi_at_zero());
    match symmetry {
        Symmetry::O => Ok(hat + half),
        _ if f.sigma() >= 1.0 => Err(Error::UnsupportedRange(format!(
            "{symmetry:?} needs support radius below 1, got {}",
            f.sigma()
        ))),
        Symmetry::SoEven => Ok(hat + half),
        Symmetry::USp => Ok(hat - half),
    }
}

/// Evaluate one of the moment quantities for a request.
pub fn predict(
    quantity: Quantity,
    req: &MomentRequest,
    opts: &PredictionOptions,
) -> Result<MomentReport> {
    match quantity {
        Quantity::C => c_total(req, opts),
        Quantity::C0 => {
            let v = c0(req)?;
            Ok(MomentReport::prediction(
                quantity,
                Estimate { value: v, error: 0.0 },
                Method::ClosedForm,
                req,
            ))
        }
        Quantity::C2 => {
            let v = c2(req, opts)?;
            Ok(MomentReport::prediction(
                quantity,
                v,
                Method::ClosedFormQuadrature,
                req,
            ))
        }
        Quantity::CEven | Quantity::COdd => {
            let eo = c_even_odd(req, opts)?;
            let v = if quantity == Quantity::CEven {
                eo.even
            } else {
                eo.odd
            };
            Ok(MomentReport::prediction(quantity, v, Method::Contour, req))
        }
        Quantity::GaussianLimit => {
            let v = gaussian_limit(req, opts)?;
            Ok(MomentReport::prediction(
                quantity,
                v,
                Method::ClosedFormQuadrature,
                req,
            ))
        }
        Quantity::I2 => {
            if req.n() != 2 {
                return Err(Error::InvalidRequest("I2 needs exactly two functions".into()));
            }
            let v = i2(&req.phis()[0], &req.phis()[1]);
            Ok(MomentReport::prediction(
                quantity,
                Estimate { value: v, error: 0.0 },
                Method::ClosedForm,
                req,
            ))
        }
        Quantity::OneLevel => {
            if req.n() != 1 {
                return Err(Error::InvalidRequest(
                    "the one-level integral needs exactly one function".into(),
                ));
            }
            let v = one_level_integral(&req.phis()[0], Symmetry::O)?;
            Ok(MomentReport::prediction(
                quantity,
                Estimate { value: v, error: 0.0 },
                Method::ClosedForm,
                req,
            ))
        }
        Quantity::V => Err(Error::InvalidRequest(
            "V needs explicit index sets; call v_pair or v_contour".into(),
        )),
    }
}

#[cfg(test)]
mod tests;
