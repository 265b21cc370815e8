//! Vertical-line integrals `𝓥(K′, K″)` in one, two and three variables.

use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::PI;

use super::MomentRequest;
use crate::error::{Error, Result};
use crate::quadrature::{integrate_vertical_line, Estimate, LineRule, QuadSpec};
use crate::splinefourier::TestFunction;

/// Composite Gauss–Legendre layout for one variable of a tensor-product contour rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridRule {
    pub truncation: f64,
    pub panel_width: f64,
    pub order: usize,
}

/// Abscissae and rules for the contour integrals.
#[derive(Debug, Clone, PartialEq)]
pub struct ContourOptions {
    pub line_delta: f64,
    pub line_spec: QuadSpec,
    pub pair_deltas: [f64; 2],
    pub pair_rule: GridRule,
    pub triple_deltas: [f64; 3],
    pub triple_rule: GridRule,
}

impl Default for ContourOptions {
    fn default() -> Self {
        Self {
            line_delta: 0.5,
            line_spec: QuadSpec::default(),
            pair_deltas: [0.4, 0.6],
            pair_rule: GridRule {
                truncation: 64.0,
                panel_width: 0.5,
                order: 16,
            },
            triple_deltas: [0.4, 0.5, 0.6],
            triple_rule: GridRule {
                truncation: 16.0,
                panel_width: 0.5,
                order: 16,
            },
        }
    }
}

/// Largest `|K′|` handled; beyond it the contributions vanish under `Σσ < 4`.
pub const MAX_CONTOUR_DIM: usize = 3;

/// `𝓥(K′, K″)` from its contour representation. Indices are zero-based.
pub fn v_contour(
    kp: &[usize],
    kpp: &[usize],
    req: &MomentRequest,
    opts: &ContourOptions,
) -> Result<Estimate<f64>> {
    req.check_indices(kp)?;
    req.check_indices(kpp)?;
    if kp.iter().any(|k| kpp.contains(k)) {
        return Err(Error::InvalidParameter(
            "K' and K'' must be disjoint".into(),
        ));
    }
    let mut kp = kp.to_vec();
    kp.sort_unstable();
    if kp.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::InvalidParameter("repeated index in K'".into()));
    }
    let exact = |value| Ok(Estimate { value, error: 0.0 });
    if kp.is_empty() {
        return exact(if kpp.is_empty() { 1.0 } else { 0.0 });
    }
    if kp.len() > MAX_CONTOUR_DIM {
        return Err(Error::OutOfTruncation(kp.len()));
    }
    let phis = req.phis();
    if kp.iter().chain(kpp).any(|&i| phis[i].is_zero()) {
        return exact(0.0);
    }
    // Moving every line to the right shows the integral vanishes unless the
    // supports together exceed the number of contour variables.
    let reach: f64 = kp.iter().chain(kpp).map(|&i| phis[i].sigma()).sum();
    if reach <= kp.len() as f64 {
        return exact(0.0);
    }
    let factors = Factors {
        phis,
        kpp: kpp.to_vec(),
    };
    match kp.len() {
        1 => line(kp[0], &factors, reach, opts),
        2 => {
            let rules = |t: f64| -> Result<Vec<LineRule>> {
                opts.pair_deltas
                    .iter()
                    .map(|&d| rule(d, t, &opts.pair_rule))
                    .collect()
            };
            tensor(&kp, &factors, &rules, opts.pair_rule.truncation, contract2)
        }
        _ => {
            let rules = |t: f64| -> Result<Vec<LineRule>> {
                opts.triple_deltas
                    .iter()
                    .map(|&d| rule(d, t, &opts.triple_rule))
                    .collect()
            };
            tensor(&kp, &factors, &rules, opts.triple_rule.truncation, contract3)
        }
    }
}

fn rule(delta: f64, truncation: f64, g: &GridRule) -> Result<LineRule> {
    if !(delta > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "contour abscissa must be positive, got {delta}"
        )));
    }
    LineRule::new(delta, truncation, g.panel_width, g.order)
}

struct Factors<'a> {
    phis: &'a [TestFunction],
    kpp: Vec<usize>,
}

impl Factors<'_> {
    /// `e^{-2πw} Φ_k(iw) / w`.
    fn base(&self, k: usize, w: Complex64) -> Complex64 {
        (-2.0 * PI * w).exp() * self.phis[k].eval_phi_at_iw(w) / w
    }

    /// Bracket term of `ℓ ∈ K″` attached to the variable of `k ∈ K′`.
    fn bracket(&self, l: usize, k: usize, w: Complex64) -> Complex64 {
        let phi = &self.phis[l];
        let mut b = 4.0 * phi.half_laplace(w);
        if k < l {
            b -= 2.0 * phi.eval_phi_at_iw(w);
        }
        b
    }

    /// For each subset `S ⊆ K″` (bitmask), the nodes' weighted factor with `S` attached.
    fn tables(&self, k: usize, nodes: &[Complex64], weights: &[f64]) -> Vec<Vec<Complex64>> {
        let m = self.kpp.len();
        let mut out = vec![Vec::with_capacity(nodes.len()); 1 << m];
        for (&w, &c) in nodes.iter().zip(weights) {
            let base = self.base(k, w) * c;
            let brackets: Vec<Complex64> =
                self.kpp.iter().map(|&l| self.bracket(l, k, w)).collect();
            for (mask, col) in out.iter_mut().enumerate() {
                let mut v = base;
                for (bit, b) in brackets.iter().enumerate() {
                    if mask >> bit & 1 == 1 {
                        v *= b;
                    }
                }
                col.push(v);
            }
        }
        out
    }
}

fn line(k: usize, f: &Factors, reach: f64, opts: &ContourOptions) -> Result<Estimate<f64>> {
    let decay = f.phis[k].decay_order().unwrap_or(1) + 1 + f.kpp.len();
    let h = |w: Complex64| {
        let mut v = f.base(k, w);
        for &l in &f.kpp {
            v *= f.bracket(l, k, w);
        }
        v
    };
    let est = integrate_vertical_line(h, opts.line_delta, decay as u32, 1.0 + reach, &opts.line_spec)?;
    Ok(Estimate {
        value: est.value.re,
        error: est.error,
    })
}

#[inline]
fn kernel(a: Complex64, b: Complex64) -> Complex64 {
    let r = (a - b) / (a + b);
    r * r
}

/// Factor tables of one variable.
struct Axis {
    nodes: Vec<Complex64>,
    tables: Vec<Vec<Complex64>>,
}

type Contraction = fn(&[Axis], usize) -> Complex64;

fn tensor(
    kp: &[usize],
    f: &Factors,
    rules: &dyn Fn(f64) -> Result<Vec<LineRule>>,
    truncation: f64,
    contract: Contraction,
) -> Result<Estimate<f64>> {
    let eval = |t: f64| -> Result<f64> {
        let rules = rules(t)?;
        let axes: Vec<Axis> = kp
            .iter()
            .zip(&rules)
            .enumerate()
            .map(|(p, (&k, r))| {
                // The integrand is real on conjugate pairs, so the first variable only
                // needs the upper half of its line.
                let (nodes, weights): (Vec<Complex64>, Vec<f64>) = r
                    .nodes
                    .iter()
                    .zip(&r.weights)
                    .filter(|(w, _)| p > 0 || w.im > 0.0)
                    .map(|(&w, &c)| (w, c))
                    .unzip();
                let tables = f.tables(k, &nodes, &weights);
                Axis { nodes, tables }
            })
            .collect();
        let total = contract(&axes, f.kpp.len());
        let value = 2.0 * total.re;
        if value.is_finite() {
            Ok(value)
        } else {
            Err(Error::UnsupportedIntegrand(
                "non-finite contour integrand".into(),
            ))
        }
    };
    let value = eval(truncation)?;
    let coarse = eval(0.5 * truncation)?;
    Ok(Estimate {
        value,
        error: (value - coarse).abs().max(f64::EPSILON * value.abs()),
    })
}

fn contract2(axes: &[Axis], m: usize) -> Complex64 {
    let full = (1usize << m) - 1;
    let (a, b) = (&axes[0], &axes[1]);
    let rows: Vec<Complex64> = (0..a.nodes.len())
        .into_par_iter()
        .map(|i| {
            let wi = a.nodes[i];
            let mut acc = Complex64::new(0.0, 0.0);
            for mask in 0..=full {
                let col = &b.tables[mask];
                let mut r = Complex64::new(0.0, 0.0);
                for (j, &wj) in b.nodes.iter().enumerate() {
                    r += kernel(wi, wj) * col[j];
                }
                acc += a.tables[full ^ mask][i] * r;
            }
            acc
        })
        .collect();
    rows.iter().sum()
}

fn contract3(axes: &[Axis], m: usize) -> Complex64 {
    let full = (1usize << m) - 1;
    let (a, b, c) = (&axes[0], &axes[1], &axes[2]);
    let nb = b.nodes.len();
    let nc = c.nodes.len();
    let k23: Vec<Complex64> = (0..nb)
        .into_par_iter()
        .flat_map_iter(|j| {
            let wj = b.nodes[j];
            c.nodes.iter().map(move |&wl| kernel(wj, wl))
        })
        .collect();
    let rows: Vec<Complex64> = (0..a.nodes.len())
        .into_par_iter()
        .map(|i| {
            let wi = a.nodes[i];
            let k12: Vec<Complex64> = b.nodes.iter().map(|&wj| kernel(wi, wj)).collect();
            let k13: Vec<Complex64> = c.nodes.iter().map(|&wl| kernel(wi, wl)).collect();
            let mut acc = Complex64::new(0.0, 0.0);
            let mut h = vec![Complex64::new(0.0, 0.0); nc];
            for s3 in 0..=full {
                for l in 0..nc {
                    h[l] = c.tables[s3][l] * k13[l];
                }
                let y: Vec<Complex64> = (0..nb)
                    .map(|j| {
                        let row = &k23[j * nc..(j + 1) * nc];
                        row.iter().zip(&h).map(|(k, v)| k * v).sum()
                    })
                    .collect();
                let rest = full ^ s3;
                // Every split of the remaining indices between the first two variables.
                let mut s2 = rest;
                loop {
                    let z: Complex64 = (0..nb).map(|j| k12[j] * b.tables[s2][j] * y[j]).sum();
                    acc += a.tables[rest ^ s2][i] * z;
                    if s2 == 0 {
                        break;
                    }
                    s2 = (s2 - 1) & rest;
                }
            }
            acc
        })
        .collect();
    rows.iter().sum()
}
