//! Haar-random orthogonal and symplectic matrices, their eigenphases, and Monte Carlo
//! estimates of centered products of linear statistics.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};
use std::f64::consts::PI;
use std::fmt;

use crate::error::{Error, Result};
use crate::predictions::MomentRequest;

/// Draws per chunk; each chunk owns one random stream, so results do not depend on threads.
pub const CHUNK_SIZE: usize = 256;

/// Largest tolerated fraction of failed draws.
pub const MAX_FAILURE_RATE: f64 = 1e-3;

/// Residual above which a draw is rejected.
pub const RESIDUAL_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Group {
    /// `SO(2N)`.
    SoEven,
    /// The coset `O⁻(2N+2)` of determinant `−1` matrices.
    OMinus,
    /// `USp(2N)`.
    #[serde(rename = "usp")]
    USp,
    /// Equal mixture of `SO(2N)` and `O⁻(2N+2)`.
    OFull,
}

impl Group {
    pub fn name(self) -> &'static str {
        match self {
            Group::SoEven => "so_even",
            Group::OMinus => "o_minus",
            Group::USp => "usp",
            Group::OFull => "o_full",
        }
    }
}

impl std::str::FromStr for Group {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "so_even" => Ok(Group::SoEven),
            "o_minus" => Ok(Group::OMinus),
            "usp" => Ok(Group::USp),
            "o_full" => Ok(Group::OFull),
            _ => Err(Error::InvalidParameter(format!("unknown ensemble {s:?}"))),
        }
    }
}

/// A group or coset with its rank `N` (the number of free eigenphases).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EnsembleKind {
    pub group: Group,
    #[serde(rename = "N")]
    pub n: usize,
}

impl EnsembleKind {
    pub fn new(group: Group, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("ensemble rank N must be at least 1".into()));
        }
        Ok(Self { group, n })
    }

    pub fn so_even(n: usize) -> Self {
        Self { group: Group::SoEven, n }
    }

    pub fn o_minus(n: usize) -> Self {
        Self { group: Group::OMinus, n }
    }

    pub fn usp(n: usize) -> Self {
        Self { group: Group::USp, n }
    }

    pub fn o_full(n: usize) -> Self {
        Self { group: Group::OFull, n }
    }

    /// Size of the sampled matrix.
    pub fn dimension(&self) -> usize {
        match self.group {
            Group::OMinus => 2 * self.n + 2,
            _ => 2 * self.n,
        }
    }
}

impl fmt::Display for EnsembleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(N={})", self.group.name(), self.n)
    }
}

/// How eigenphases are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampler {
    /// Haar matrices from orthogonalized Gaussian matrices.
    #[default]
    Matrix,
    /// Tridiagonal Jacobi model drawing the eigenphases from the Weyl density directly.
    Tridiagonal,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Residuals {
    /// `max |X*X − I|`.
    pub unitarity: f64,
    /// Distance of the determinant from its required value.
    pub determinant: f64,
    /// Largest mismatch between eigenvalues that should coincide in conjugate pairs.
    pub pairing: f64,
    /// `max |XᵀJX − J|` for symplectic draws.
    pub symplectic: f64,
}

impl Residuals {
    pub fn max(&self) -> f64 {
        self.unitarity
            .max(self.determinant)
            .max(self.pairing)
            .max(self.symplectic)
    }
}

/// Free eigenphases `0 ≤ θ_1 ≤ … ≤ θ_N ≤ π` of one draw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenphaseSample {
    pub thetas: Vec<f64>,
    /// The eigenvalue `1` forced by the coset.
    pub forced_zero: bool,
    /// The eigenvalue `−1` forced by the coset.
    pub forced_pi: bool,
    pub residuals: Residuals,
}

fn gaussian_matrix(m: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    DMatrix::from_fn(m, m, |_, _| rng.sample(StandardNormal))
}

/// Haar-distributed element of `SO(m)`.
pub fn haar_special_orthogonal(m: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    haar_so_with_det(m, rng).0
}

/// The sample and its determinant.
fn haar_so_with_det(m: usize, rng: &mut impl Rng) -> (DMatrix<f64>, f64) {
    let qr = gaussian_matrix(m, rng).qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..m {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    // Right multiplication by a fixed reflection maps Haar on O⁻(m) to Haar on SO(m).
    let det = q.determinant();
    if det < 0.0 {
        q.column_mut(0).neg_mut();
    }
    (q, det.abs())
}

/// Haar-distributed element of `O⁻(m)`: a basis swap times a Haar element of `SO(m)`.
pub fn haar_orthogonal_minus(m: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    let mut x = haar_special_orthogonal(m, rng);
    if m >= 2 {
        x.swap_rows(0, 1);
    }
    x
}

/// Haar-distributed element of `USp(2n)`, as a `2n × 2n` complex matrix preserving
/// `J = [[0, I], [−I, 0]]`, built by quaternionic Gram–Schmidt.
pub fn haar_unitary_symplectic(n: usize, rng: &mut impl Rng) -> DMatrix<Complex64> {
    let m = 2 * n;
    let partner = |v: &DVector<Complex64>| -> DVector<Complex64> {
        DVector::from_fn(m, |i, _| {
            if i < n {
                -v[i + n].conj()
            } else {
                v[i - n].conj()
            }
        })
    };
    let mut u = DMatrix::<Complex64>::zeros(m, m);
    for j in 0..n {
        let mut v = DVector::from_fn(m, |_, _| {
            Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
        });
        for _ in 0..2 {
            for k in 0..j {
                for c in [k, k + n] {
                    let q = u.column(c);
                    let proj = q.dotc(&v);
                    v.axpy(-proj, &q, Complex64::new(1.0, 0.0));
                }
            }
        }
        let norm = v.norm();
        v /= Complex64::new(norm, 0.0);
        let w = partner(&v);
        u.set_column(j, &v);
        u.set_column(j + n, &w);
    }
    u
}

fn pair_up(values: &[f64]) -> Option<(Vec<f64>, f64)> {
    if values.len() % 2 == 1 || values.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let mut thetas = Vec::with_capacity(values.len() / 2);
    let mut worst: f64 = 0.0;
    for p in values.chunks(2) {
        worst = worst.max((p[0] - p[1]).abs());
        let c = 0.5 * (p[0] + p[1]);
        if c.abs() > 1.0 + 1e-10 {
            return None;
        }
        thetas.push(c.clamp(-1.0, 1.0).acos());
    }
    thetas.sort_by(f64::total_cmp);
    Some((thetas, worst))
}

fn sorted_cosines_real(x: &DMatrix<f64>) -> Vec<f64> {
    let sym = (x + x.transpose()) * 0.5;
    let mut c: Vec<f64> = sym.symmetric_eigenvalues().iter().copied().collect();
    c.sort_by(f64::total_cmp);
    c
}

fn orthogonality_residual(x: &DMatrix<f64>) -> f64 {
    let m = x.nrows();
    (x.transpose() * x - DMatrix::<f64>::identity(m, m)).amax()
}

fn failure(what: &str) -> Error {
    Error::SamplerFailure(what.to_string())
}

/// Eigenphases of a special orthogonal matrix of even size.
pub fn eigenphases_special_orthogonal(x: &DMatrix<f64>) -> Result<EigenphaseSample> {
    so_phases(x, x.determinant())
}

fn so_phases(x: &DMatrix<f64>, det: f64) -> Result<EigenphaseSample> {
    let (thetas, pairing) =
        pair_up(&sorted_cosines_real(x)).ok_or_else(|| failure("eigenvalues did not pair"))?;
    Ok(EigenphaseSample {
        thetas,
        forced_zero: false,
        forced_pi: false,
        residuals: Residuals {
            unitarity: orthogonality_residual(x),
            determinant: (det - 1.0).abs(),
            pairing,
            symplectic: 0.0,
        },
    })
}

/// Eigenphases of an even-size determinant `−1` orthogonal matrix, with the forced `±1` removed.
pub fn eigenphases_orthogonal_minus(x: &DMatrix<f64>) -> Result<EigenphaseSample> {
    o_minus_phases(x, x.determinant())
}

fn o_minus_phases(x: &DMatrix<f64>, det: f64) -> Result<EigenphaseSample> {
    let c = sorted_cosines_real(x);
    if c.len() < 2 {
        return Err(failure("coset matrix too small"));
    }
    let (lo, hi) = (c[0], c[c.len() - 1]);
    let (thetas, pairing) =
        pair_up(&c[1..c.len() - 1]).ok_or_else(|| failure("eigenvalues did not pair"))?;
    Ok(EigenphaseSample {
        thetas,
        forced_zero: true,
        forced_pi: true,
        residuals: Residuals {
            unitarity: orthogonality_residual(x),
            determinant: (det + 1.0).abs(),
            pairing: pairing.max((lo + 1.0).abs()).max((hi - 1.0).abs()),
            symplectic: 0.0,
        },
    })
}

/// Eigenphases of a unitary symplectic matrix.
pub fn eigenphases_unitary_symplectic(u: &DMatrix<Complex64>) -> Result<EigenphaseSample> {
    let m = u.nrows();
    let n = m / 2;
    let herm = (u + u.adjoint()) * Complex64::new(0.5, 0.0);
    let mut c: Vec<f64> = herm.symmetric_eigenvalues().iter().copied().collect();
    c.sort_by(f64::total_cmp);
    let (thetas, pairing) = pair_up(&c).ok_or_else(|| failure("eigenvalues did not pair"))?;
    let eye = DMatrix::<Complex64>::identity(m, m);
    let unitarity = (u.adjoint() * u - eye).camax();
    // A unitary matrix of the block form [[A, B], [−B̄, Ā]] preserves J.
    let mut symplectic: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            symplectic = symplectic
                .max((u[(i + n, j + n)] - u[(i, j)].conj()).norm())
                .max((u[(i + n, j)] + u[(i, j + n)].conj()).norm());
        }
    }
    Ok(EigenphaseSample {
        thetas,
        forced_zero: false,
        forced_pi: false,
        residuals: Residuals {
            unitarity,
            determinant: (u.determinant() - Complex64::new(1.0, 0.0)).norm(),
            pairing,
            symplectic,
        },
    })
}

/// Eigenvalues `2cos θ` of the tridiagonal Jacobi model whose joint law is
/// `∏|λ_i − λ_j|² ∏(2 − λ)^a (2 + λ)^b` on `[−2, 2]`.
fn jacobi_model(n: usize, a: f64, b: f64, rng: &mut impl Rng) -> Result<Vec<f64>> {
    // Beta law on [−1, 1] with density ∝ (1 − x)^{s−1} (1 + x)^{t−1}.
    let mut draw = |s: f64, t: f64| -> Result<f64> {
        let beta = Beta::new(t, s).map_err(|e| failure(&e.to_string()))?;
        Ok(2.0 * beta.sample(rng) - 1.0)
    };
    let len = 2 * n - 1;
    let mut alpha = Vec::with_capacity(len);
    for k in 0..len {
        let j = (2 * n - k) as f64;
        let v = if k % 2 == 0 {
            draw(0.5 * (j - 2.0) + a + 1.0, 0.5 * (j - 2.0) + b + 1.0)?
        } else {
            draw(0.5 * (j - 3.0) + a + b + 2.0, 0.5 * (j - 1.0))?
        };
        alpha.push(v);
    }
    // α_{-1} = α_{2n-1} = −1.
    let at = |i: isize| -> f64 {
        if i < 0 || i as usize >= len {
            -1.0
        } else {
            alpha[i as usize]
        }
    };
    let mut m = DMatrix::<f64>::zeros(n, n);
    for k in 0..n as isize {
        let i = k as usize;
        let prev = at(2 * k - 1);
        let before = if k == 0 { 0.0 } else { at(2 * k - 2) };
        m[(i, i)] = (1.0 - prev) * at(2 * k) - (1.0 + prev) * before;
        if i + 1 < n {
            let off = ((1.0 - prev) * (1.0 - at(2 * k).powi(2)) * (1.0 + at(2 * k + 1))).max(0.0);
            m[(i, i + 1)] = off.sqrt();
            m[(i + 1, i)] = off.sqrt();
        }
    }
    let mut out: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
    out.sort_by(f64::total_cmp);
    Ok(out)
}

fn tridiagonal_sample(group: Group, n: usize, rng: &mut impl Rng) -> Result<EigenphaseSample> {
    let (a, forced) = match group {
        Group::SoEven => (-0.5, false),
        _ => (0.5, group == Group::OMinus),
    };
    let lambdas = jacobi_model(n, a, a, rng)?;
    if lambdas.iter().any(|l| !l.is_finite() || l.abs() > 2.0 + 1e-9) {
        return Err(failure("tridiagonal eigenvalue outside [-2, 2]"));
    }
    let mut thetas: Vec<f64> = lambdas.iter().map(|l| (0.5 * l).clamp(-1.0, 1.0).acos()).collect();
    thetas.sort_by(f64::total_cmp);
    Ok(EigenphaseSample {
        thetas,
        forced_zero: forced,
        forced_pi: forced,
        residuals: Residuals::default(),
    })
}

/// One draw of eigenphases, rejected when a residual exceeds [`RESIDUAL_TOL`]. A mixture
/// ensemble picks its branch with the same stream.
pub fn sample_eigenphases(
    kind: EnsembleKind,
    sampler: Sampler,
    rng: &mut impl Rng,
) -> Result<EigenphaseSample> {
    let sample = draw(kind, sampler, rng)?;
    if sample.residuals.max() > RESIDUAL_TOL {
        return Err(failure(&format!(
            "residual {:e} above {RESIDUAL_TOL:e}",
            sample.residuals.max()
        )));
    }
    Ok(sample)
}

fn draw(kind: EnsembleKind, sampler: Sampler, rng: &mut impl Rng) -> Result<EigenphaseSample> {
    let n = kind.n;
    let group = match kind.group {
        Group::OFull if rng.gen::<bool>() => Group::SoEven,
        Group::OFull => Group::OMinus,
        g => g,
    };
    let sample = match (sampler, group) {
        (Sampler::Tridiagonal, g) => tridiagonal_sample(g, n, rng)?,
        (_, Group::SoEven) => {
            let (x, det) = haar_so_with_det(2 * n, rng);
            so_phases(&x, det)?
        }
        (_, Group::OMinus) => {
            // The row swap flips the sign of the determinant.
            let (mut x, det) = haar_so_with_det(2 * n + 2, rng);
            x.swap_rows(0, 1);
            o_minus_phases(&x, -det)?
        }
        (_, _) => eigenphases_unitary_symplectic(&haar_unitary_symplectic(n, rng))?,
    };
    Ok(sample)
}

/// `∏_ℓ [Σ_j Φ_ℓ(Nθ_j/π) − Φ̂_ℓ(0) − Φ_ℓ(0)/2]`, the sum running over `±θ_j` and, on the
/// coset, once over the forced eigenvalue `1`.
pub fn centered_product(sample: &EigenphaseSample, req: &MomentRequest, kind: EnsembleKind) -> f64 {
    let scale = kind.n as f64 / PI;
    req.phis()
        .iter()
        .map(|phi| {
            let mut s: f64 = 2.0 * sample.thetas.iter().map(|t| phi.eval_phi_real(scale * t)).sum::<f64>();
            if sample.forced_zero {
                s += phi.phi_at_zero();
            }
            s - phi.fhat_at_zero() - 0.5 * phi.phi_at_zero()
        })
        .product()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub samples: usize,
    pub failures: usize,
    pub seed: u64,
    pub kind: EnsembleKind,
}

/// Running mean and sum of squared deviations.
#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    count: usize,
    mean: f64,
    m2: f64,
    failures: usize,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.count += 1;
        let d = x - self.mean;
        self.mean += d / self.count as f64;
        self.m2 += d * (x - self.mean);
    }

    fn merge(self, other: Moments) -> Moments {
        let count = self.count + other.count;
        let failures = self.failures + other.failures;
        if count == 0 {
            return Moments { failures, ..Moments::default() };
        }
        let d = other.mean - self.mean;
        let w = other.count as f64 / count as f64;
        Moments {
            count,
            mean: self.mean + d * w,
            m2: self.m2 + other.m2 + d * d * self.count as f64 * w,
            failures,
        }
    }
}

/// Random stream of chunk `chunk` under `seed`.
pub fn chunk_rng(seed: u64, chunk: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk as u64);
    rng
}

/// Monte Carlo mean of a per-draw statistic over `samples` draws.
pub fn mc_statistic(
    kind: EnsembleKind,
    sampler: Sampler,
    samples: usize,
    seed: u64,
    statistic: impl Fn(&EigenphaseSample) -> f64 + Sync,
) -> Result<McEstimate> {
    if samples < 2 {
        return Err(Error::InvalidParameter("need at least two samples".into()));
    }
    let chunks = samples.div_ceil(CHUNK_SIZE);
    let parts: Vec<Moments> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = chunk_rng(seed, c);
            let len = CHUNK_SIZE.min(samples - c * CHUNK_SIZE);
            let mut acc = Moments::default();
            for _ in 0..len {
                match sample_eigenphases(kind, sampler, &mut rng) {
                    Ok(s) => acc.push(statistic(&s)),
                    Err(_) => acc.failures += 1,
                }
            }
            acc
        })
        .collect();
    let total = parts.into_iter().fold(Moments::default(), Moments::merge);
    if total.failures as f64 > MAX_FAILURE_RATE * samples as f64 || total.count < 2 {
        return Err(Error::EstimateInvalid {
            failures: total.failures,
            attempts: samples,
        });
    }
    let var = total.m2 / (total.count - 1) as f64;
    Ok(McEstimate {
        mean: total.mean,
        stderr: (var / total.count as f64).sqrt(),
        samples: total.count,
        failures: total.failures,
        seed,
        kind,
    })
}

/// Monte Carlo estimate of the centered moment at finite `N`.
pub fn mc_moment(
    kind: EnsembleKind,
    req: &MomentRequest,
    samples: usize,
    seed: u64,
    sampler: Sampler,
) -> Result<McEstimate> {
    if samples < 100 {
        return Err(Error::InvalidParameter(format!(
            "Monte Carlo moments need at least 100 samples, got {samples}"
        )));
    }
    mc_statistic(kind, sampler, samples, seed, |s| centered_product(s, req, kind))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GofTest {
    KolmogorovSmirnov,
    ChiSquare,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GoodnessOfFit {
    pub test: GofTest,
    pub statistic: f64,
    /// Rejection threshold at the 1% level.
    pub critical: f64,
    pub passed: bool,
}

/// One-sample Kolmogorov–Smirnov test at the 1% level.
pub fn ks_test(data: &[f64], cdf: impl Fn(f64) -> f64) -> GoodnessOfFit {
    let mut x = data.to_vec();
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    let d = x
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let f = cdf(v);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max);
    let critical = KS_CRIT_1PCT / n.sqrt();
    GoodnessOfFit {
        test: GofTest::KolmogorovSmirnov,
        statistic: d,
        critical,
        passed: d < critical,
    }
}

/// Asymptotic 1% critical value of `√n · D`.
pub const KS_CRIT_1PCT: f64 = 1.6276;

/// Two-sample Kolmogorov–Smirnov statistic and its 1% threshold.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> GoodnessOfFit {
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    let (n, m) = (x.len(), y.len());
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < n && j < m {
        let v = x[i].min(y[j]);
        while i < n && x[i] <= v {
            i += 1;
        }
        while j < m && y[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let critical = KS_CRIT_1PCT * ((n + m) as f64 / (n * m) as f64).sqrt();
    GoodnessOfFit {
        test: GofTest::KolmogorovSmirnov,
        statistic: d,
        critical,
        passed: d < critical,
    }
}

/// Pearson chi-square test on equal-width bins of `[lo, hi]` at the 1% level.
pub fn chi_square_test(data: &[f64], lo: f64, hi: f64, bins: usize, cdf: impl Fn(f64) -> f64) -> GoodnessOfFit {
    let mut counts = vec![0usize; bins];
    let width = (hi - lo) / bins as f64;
    for &v in data {
        let b = (((v - lo) / width) as usize).min(bins - 1);
        counts[b] += 1;
    }
    let n = data.len() as f64;
    let stat: f64 = counts
        .iter()
        .enumerate()
        .map(|(b, &c)| {
            let p = cdf(lo + (b + 1) as f64 * width) - cdf(lo + b as f64 * width);
            let e = n * p;
            (c as f64 - e).powi(2) / e
        })
        .sum();
    let dist = ChiSquared::new((bins - 1) as f64).expect("positive degrees of freedom");
    let critical = dist.inverse_cdf(0.99);
    GoodnessOfFit {
        test: GofTest::ChiSquare,
        statistic: stat,
        critical,
        passed: stat < critical,
    }
}

/// CDF of the rank-one Weyl density `(2/π) sin²θ` on `[0, π]`.
pub fn sin_squared_cdf(theta: f64) -> f64 {
    (theta - theta.sin() * theta.cos()) / PI
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerDiagnostics {
    pub kind: EnsembleKind,
    pub samples: usize,
    pub failures: usize,
    pub max_unitarity: f64,
    pub max_determinant: f64,
    pub max_pairing: f64,
    pub max_symplectic: f64,
    /// Fit of the single free phase to its Weyl density, for `N = 1` groups.
    pub marginal: Option<GoodnessOfFit>,
}

/// Residual statistics over `samples` draws, plus a marginal fit when `N = 1`.
pub fn validate_sampler(kind: EnsembleKind, samples: usize, seed: u64, sampler: Sampler) -> SamplerDiagnostics {
    let chunks = samples.div_ceil(CHUNK_SIZE);
    let parts: Vec<(Vec<f64>, Residuals, usize)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = chunk_rng(seed, c);
            let len = CHUNK_SIZE.min(samples - c * CHUNK_SIZE);
            let mut phases = Vec::with_capacity(len);
            let mut worst = Residuals::default();
            let mut failures = 0;
            for _ in 0..len {
                match draw(kind, sampler, &mut rng) {
                    Ok(s) => {
                        let r = s.residuals;
                        if r.max() > RESIDUAL_TOL {
                            failures += 1;
                        }
                        worst.unitarity = worst.unitarity.max(r.unitarity);
                        worst.determinant = worst.determinant.max(r.determinant);
                        worst.pairing = worst.pairing.max(r.pairing);
                        worst.symplectic = worst.symplectic.max(r.symplectic);
                        phases.push(s.thetas[0]);
                    }
                    Err(_) => failures += 1,
                }
            }
            (phases, worst, failures)
        })
        .collect();
    let mut phases = Vec::with_capacity(samples);
    let mut worst = Residuals::default();
    let mut failures = 0;
    for (p, r, f) in parts {
        phases.extend(p);
        worst.unitarity = worst.unitarity.max(r.unitarity);
        worst.determinant = worst.determinant.max(r.determinant);
        worst.pairing = worst.pairing.max(r.pairing);
        worst.symplectic = worst.symplectic.max(r.symplectic);
        failures += f;
    }
    let marginal = match (kind.n, kind.group) {
        (1, Group::SoEven) if !phases.is_empty() => Some(ks_test(&phases, |t| t / PI)),
        (1, Group::OMinus | Group::USp) if !phases.is_empty() => {
            Some(chi_square_test(&phases, 0.0, PI, 50, sin_squared_cdf))
        }
        _ => None,
    };
    SamplerDiagnostics {
        kind,
        samples,
        failures,
        max_unitarity: worst.unitarity,
        max_determinant: worst.determinant,
        max_pairing: worst.pairing,
        max_symplectic: worst.symplectic,
        marginal,
    }
}

#[cfg(test)]
mod tests;
