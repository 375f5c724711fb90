//! Closed-form predictions for critical points of degree-ℓ random spherical
//! harmonics: value densities, interval integrals, expected counts and
//! variances, the one-point jet covariance with its Cholesky factor, the
//! two-point gradient covariance, conditional Hessian means, and a Monte
//! Carlo oracle for the second-chaos coefficients M₀, M₁, M₂.
//!
//! All densities refer to the unit-variance field whose covariance function
//! is `P_ℓ(cos d(x, y))`, with eigenvalue `λ = ℓ(ℓ+1)`.
//!
//! # Sign conventions
//!
//! Two derived expressions admit a sign ambiguity; both are fixed here by
//! direct quadrature of the defining formulas and pinned in tests:
//!
//! * The half-line integral `∫_u^∞ p₃` equals
//!   `−(1/√(2π)) u e^{−3u²/2} − (1/(2√(2π))) u (u²−1) e^{−u²/2}`, which
//!   simplifies to `−u·π^c(u)/√3` and vanishes only at `u = 0`. The variant
//!   with `+` on the second term factors as
//!   `(u e^{−u²/2}/√(8π))(u² − 1 − 2e^{−u²})` and would vanish additionally
//!   at `u = ±ū` (see [`ubar_root`]); it does not match quadrature.
//! * The combination `−(5/4)p₀ + (1/4)p₂` equals `−p₃` pointwise (not
//!   `+p₃`). Consequently [`m_coefficients_oracle`] arbitrates the sign of
//!   `M₀` independently of any convention, and the reduction-principle slope
//!   for half-lines `[u, ∞)` with `u > 0` is positive while
//!   [`reduction_coefficient`] (which carries `∫ p₃` verbatim) is negative;
//!   correlation checks therefore compare magnitudes.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::eigenvalue;
use crate::legendre::{derivative_at_one, legendre_jet};
use crate::quad::adaptive_simpson;

/// Errors from the closed-form layer.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AnalyticError {
    /// Lower bound exceeds upper bound (or a bound is NaN).
    #[error("invalid interval [{lo}, {hi}]: bounds must satisfy lo <= hi")]
    InvalidInterval { lo: f64, hi: f64 },
    /// String form not understood by the `lo:hi` parser.
    #[error("cannot parse interval from {0:?} (expected \"lo:hi\", with -inf/inf allowed)")]
    ParseInterval(String),
    /// The 5×5 jet covariance is singular below degree 2.
    #[error("jet covariance is singular at degree {0} (Hessian block loses rank)")]
    SingularJetCovariance(u32),
    /// Equator separation outside the open interval (0, π).
    #[error("equator separation {0} outside (0, pi)")]
    SeparationOutOfRange(f64),
    /// A conditioning denominator λ + 2α_j vanished.
    #[error("conditional mean degenerate at separation {delta_phi}: lambda + 2*alpha_{index} = 0")]
    DegenerateDenominator { delta_phi: f64, index: usize },
}

/// A closed real interval, possibly unbounded on either side.
///
/// Endpoints are inclusive; infinite endpoints use `f64` infinities. The
/// degenerate case `lo == hi` is allowed and carries zero measure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    lo: f64,
    hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self, AnalyticError> {
        if lo.is_nan() || hi.is_nan() || lo > hi {
            return Err(AnalyticError::InvalidInterval { lo, hi });
        }
        Ok(Interval { lo, hi })
    }

    /// The whole real line.
    pub const fn full() -> Self {
        Interval { lo: f64::NEG_INFINITY, hi: f64::INFINITY }
    }

    /// The half-line `[u, ∞)`.
    pub fn above(u: f64) -> Self {
        Interval::new(u, f64::INFINITY).expect("finite lower bound")
    }

    pub fn lower(&self) -> f64 {
        self.lo
    }

    pub fn upper(&self) -> f64 {
        self.hi
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.lo && t <= self.hi
    }

    pub fn is_degenerate(&self) -> bool {
        self.lo == self.hi
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.lo, self.hi)
    }
}

impl FromStr for Interval {
    type Err = AnalyticError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (lo, hi) = s
            .split_once(':')
            .ok_or_else(|| AnalyticError::ParseInterval(s.to_owned()))?;
        let parse = |b: &str| b.trim().parse::<f64>();
        match (parse(lo), parse(hi)) {
            (Ok(lo), Ok(hi)) => Interval::new(lo, hi),
            _ => Err(AnalyticError::ParseInterval(s.to_owned())),
        }
    }
}

impl serde::Serialize for Interval {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> serde::Deserialize<'de> for Interval {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Density of the value at a critical point:
/// `π^c(t) = (√3/√(8π)) (2e^{−t²} + t² − 1) e^{−t²/2}`.
///
/// Integrates to 1 over ℝ; the expected number of critical points with value
/// in `I` is `(2/√3) λ ∫_I π^c` to leading order.
pub fn density_pi_c(t: f64) -> f64 {
    let t2 = t * t;
    3.0_f64.sqrt() / (8.0 * PI).sqrt() * (2.0 * (-t2).exp() + t2 - 1.0) * (-0.5 * t2).exp()
}

/// Second-chaos weight density for the extremum count:
/// `p₀(t) = √(2/π) (2e^{−t²} + t² − 1) e^{−t²/2} = (4/√3) π^c(t)`.
pub fn density_p0(t: f64) -> f64 {
    let t2 = t * t;
    (2.0 / PI).sqrt() * (2.0 * (-t2).exp() + t2 - 1.0) * (-0.5 * t2).exp()
}

/// Second-chaos weight density for the saddle count:
/// `p₂(t) = √(2/π) (2e^{−t²}(4 + 3t²) + t⁴ + t² − 4) e^{−t²/2}`.
pub fn density_p2(t: f64) -> f64 {
    let t2 = t * t;
    (2.0 / PI).sqrt()
        * (2.0 * (-t2).exp() * (4.0 + 3.0 * t2) + t2 * t2 + t2 - 4.0)
        * (-0.5 * t2).exp()
}

/// Second-chaos weight density for the total critical count:
/// `p₃(t) = (1/√(8π)) [(2 − 6t²) e^{−3t²/2} − (1 − 4t² + t⁴) e^{−t²/2}]`.
///
/// Integrates to 0 over ℝ (the variance of the total count drops an order at
/// full support); `(∫_I p₃)²` is the leading variance weight for `N(I)`.
pub fn density_p3(t: f64) -> f64 {
    let t2 = t * t;
    1.0 / (8.0 * PI).sqrt()
        * ((2.0 - 6.0 * t2) * (-1.5 * t2).exp()
            - (1.0 - 4.0 * t2 + t2 * t2) * (-0.5 * t2).exp())
}

/// Residual weight density governing the surviving `ℓ² log ℓ` variance when
/// `∫_I p₃ = 0`:
/// `μ(t) = (1/(8π)) √(2/π) [(−2 − 36t² + 38t⁴) e^{−t²} + 1 + 17t² − 11t⁴ + t⁶] e^{−t²/2}`.
///
/// Its full-line integral is exactly `−1/(3√3 π)`, whose square `1/(27π²)`
/// is the coefficient of the `ℓ² log ℓ` variance law for the total count.
pub fn density_mu(t: f64) -> f64 {
    let t2 = t * t;
    1.0 / (8.0 * PI)
        * (2.0 / PI).sqrt()
        * ((-2.0 - 36.0 * t2 + 38.0 * t2 * t2) * (-t2).exp()
            + 1.0 + 17.0 * t2 - 11.0 * t2 * t2 + t2 * t2 * t2)
        * (-0.5 * t2).exp()
}

/// Integral of a density over an interval by adaptive Simpson quadrature.
///
/// Absolute tolerance 1e−12; infinite endpoints are truncated at |t| = 12,
/// where every density here is below 1e−31 thanks to the `e^{−t²/2}` factor.
pub fn interval_integral<F: Fn(f64) -> f64>(density: F, interval: Interval) -> f64 {
    const CUT: f64 = 12.0;
    let a = interval.lower().max(-CUT);
    let b = interval.upper().min(CUT);
    if a >= b {
        return 0.0;
    }
    adaptive_simpson(&density, a, b, 1e-13)
}

/// Closed form of the half-line integral `∫_u^∞ p₃(t) dt = −u·π^c(u)/√3`.
///
/// Obtained by antidifferentiation: `d/dt [2t e^{−3t²/2}] = (2−6t²) e^{−3t²/2}`
/// and `d/dt [(t−t³) e^{−t²/2}] = (1−4t²+t⁴) e^{−t²/2}`. See the module
/// documentation for the sign convention this fixes.
pub fn p3_half_interval(u: f64) -> f64 {
    -u * density_pi_c(u) / 3.0_f64.sqrt()
}

/// Positive root of `u² − 1 = 2 e^{−u²}`, approximately 1.2096.
///
/// This is the level at which the rejected sign variant of
/// [`p3_half_interval`] (second term flipped) would vanish; correlation
/// diagnostics treat levels near `±ū` and 0 as untrustworthy because
/// interval-functional predictions degenerate there.
pub fn ubar_root() -> f64 {
    let g = |u: f64| u * u - 1.0 - 2.0 * (-u * u).exp();
    let dg = |u: f64| 2.0 * u * (1.0 + 2.0 * (-u * u).exp());
    let (mut a, mut b) = (1.0_f64, 1.5_f64);
    let mut u = 1.2;
    for _ in 0..80 {
        let gu = g(u);
        if gu.abs() < 1e-15 || b - a < 1e-15 {
            break;
        }
        if gu > 0.0 {
            b = u;
        } else {
            a = u;
        }
        let next = u - gu / dg(u);
        // Bisection fallback keeps the iterate inside the bracket.
        u = if next > a && next < b { next } else { 0.5 * (a + b) };
    }
    u
}

/// Squared second-chaos weight `ν(I) = (∫_I p₃)²`.
pub fn nu_c(interval: Interval) -> f64 {
    interval_integral(density_p3, interval).powi(2)
}

/// Leading-order expected number of critical points with value in `I`:
/// `(2/√3) λ ∫_I π^c`.
pub fn expected_count(ell: u32, interval: Interval) -> f64 {
    assert!(ell >= 1);
    2.0 / 3.0_f64.sqrt() * eigenvalue(ell) * interval_integral(density_pi_c, interval)
}

/// Leading-order variance of the count in `I`: `ℓ³ (∫_I p₃)²`.
pub fn variance_leading(ell: u32, interval: Interval) -> f64 {
    assert!(ell >= 2);
    (ell as f64).powi(3) * nu_c(interval)
}

/// Variance in the degenerate regime `∫_I p₃ = 0`: `(∫_I μ)² ℓ² log ℓ`.
pub fn variance_log_leading(ell: u32, interval: Interval) -> f64 {
    assert!(ell >= 2);
    let m = interval_integral(density_mu, interval);
    let l = ell as f64;
    m * m * l * l * l.ln()
}

/// Coefficient multiplying the second-chaos statistic `Σ_m (|a_m|² − 1)` in
/// the reduction principle: `((ℓ+1)/2) (2ℓ/(2ℓ+1)) ∫_I p₃`.
///
/// Carries the sign of `∫_I p₃` verbatim; see the module documentation for
/// why magnitude comparisons are used downstream.
pub fn reduction_coefficient(ell: u32, interval: Interval) -> f64 {
    assert!(ell >= 1);
    let l = ell as f64;
    (l + 1.0) / 2.0 * (2.0 * l / (2.0 * l + 1.0)) * interval_integral(density_p3, interval)
}

/// One-point covariance of the five-dimensional jet
/// `(∂₁f, ∂₂f, h₁₁, h₁₂, h₂₂)` together with its closed-form Cholesky factor.
///
/// The gradient block is `P′(1)·I₂`, the gradient–Hessian cross block is
/// zero, and the Hessian block has `Var(h₁₁) = Var(h₂₂) = 3P″(1) + P′(1)`,
/// `Var(h₁₂) = P″(1)`, `Cov(h₁₁, h₂₂) = P″(1) + P′(1)`.
#[derive(Debug, Clone)]
pub struct JetCovariance {
    pub ell: u32,
    pub matrix: [[f64; 5]; 5],
    pub cholesky: [[f64; 5]; 5],
}

/// Assemble the jet covariance and its Cholesky factor for degree `ell ≥ 2`.
///
/// At degree 1 the Hessian block has rank 1 (the factor entry
/// `√(λ(λ−2))/(2√2)` vanishes at λ = 2), so the covariance is rejected as
/// singular.
pub fn jet_covariance(ell: u32) -> Result<JetCovariance, AnalyticError> {
    if ell < 2 {
        return Err(AnalyticError::SingularJetCovariance(ell));
    }
    let p1 = derivative_at_one(ell, 1);
    let p2 = derivative_at_one(ell, 2);
    let mut matrix = [[0.0; 5]; 5];
    matrix[0][0] = p1;
    matrix[1][1] = p1;
    matrix[2][2] = 3.0 * p2 + p1;
    matrix[3][3] = p2;
    matrix[4][4] = 3.0 * p2 + p1;
    matrix[2][4] = p2 + p1;
    matrix[4][2] = p2 + p1;

    let lam = eigenvalue(ell);
    let l1 = (lam / 2.0).sqrt();
    let l2 = lam.sqrt() * (lam + 2.0) / (2.0 * 2.0_f64.sqrt() * (3.0 * lam - 2.0).sqrt());
    let l3 = (lam * (3.0 * lam - 2.0) / 8.0).sqrt();
    let l4 = (lam * (lam - 2.0) / 8.0).sqrt();
    let l5 = lam * ((lam - 2.0) / (3.0 * lam - 2.0)).sqrt();
    let mut cholesky = [[0.0; 5]; 5];
    cholesky[0][0] = l1;
    cholesky[1][1] = l1;
    cholesky[2][2] = l3;
    cholesky[3][3] = l4;
    cholesky[4][2] = l2;
    cholesky[4][4] = l5;

    Ok(JetCovariance { ell, matrix, cholesky })
}

/// Just the lower-triangular factor of [`jet_covariance`].
pub fn jet_cholesky(ell: u32) -> Result<[[f64; 5]; 5], AnalyticError> {
    Ok(jet_covariance(ell)?.cholesky)
}

/// Covariance of the two gradients `(∂₁f(x), ∂₂f(x), ∂₁f(y), ∂₂f(y))` at
/// equator points separated by `Δφ`, with the factorized determinant.
#[derive(Debug, Clone)]
pub struct TwoPointGradientCovariance {
    pub ell: u32,
    pub delta_phi: f64,
    /// `P′(cos Δφ)`: cross-covariance of the two θ-derivatives.
    pub alpha1: f64,
    /// `−P″(cos Δφ) sin² Δφ + P′(cos Δφ) cos Δφ`: cross-covariance of the
    /// two normalized φ-derivatives.
    pub alpha2: f64,
    pub matrix: [[f64; 4]; 4],
    /// `[P′(1)² − α₁²]·[P′(1)² − α₂²]`, strictly positive on (0, π) for all
    /// degrees except the quadrupole at `Δφ = π/2`: the degree-2 equatorial
    /// φ-derivative is a pure second harmonic, so `α₂ = −P′(1)` there and the
    /// two azimuthal derivatives are exact negatives of each other.
    pub determinant: f64,
}

fn gradient_alphas(ell: u32, delta_phi: f64) -> (f64, f64) {
    let jet = legendre_jet(ell, delta_phi.cos()).expect("cosine lies in [-1, 1]");
    let s = delta_phi.sin();
    let alpha1 = jet.d1();
    let alpha2 = -jet.d2() * s * s + jet.d1() * delta_phi.cos();
    (alpha1, alpha2)
}

/// Two-point gradient covariance at equator separation `Δφ ∈ (0, π)`.
pub fn two_point_gradient_cov(
    ell: u32,
    delta_phi: f64,
) -> Result<TwoPointGradientCovariance, AnalyticError> {
    if !(delta_phi > 0.0 && delta_phi < PI) {
        return Err(AnalyticError::SeparationOutOfRange(delta_phi));
    }
    let (alpha1, alpha2) = gradient_alphas(ell, delta_phi);
    let v = derivative_at_one(ell, 1);
    let matrix = [
        [v, 0.0, alpha1, 0.0],
        [0.0, v, 0.0, alpha2],
        [alpha1, 0.0, v, 0.0],
        [0.0, alpha2, 0.0, v],
    ];
    let determinant = (v * v - alpha1 * alpha1) * (v * v - alpha2 * alpha2);
    Ok(TwoPointGradientCovariance { ell, delta_phi, alpha1, alpha2, matrix, determinant })
}

/// Conditional mean of the six Hessian components
/// `(h₁₁, h₁₂, h₂₂)` at `x` followed by the same at `y`, given gradient
/// values `(u₁, u₂)` at both equator points.
#[derive(Debug, Clone)]
pub struct ConditionalMean {
    pub ell: u32,
    pub delta_phi: f64,
    pub u1: f64,
    pub u2: f64,
    /// `sin Δφ · P″(cos Δφ)`.
    pub beta1: f64,
    /// `sin Δφ cos Δφ · P″ + sin Δφ · P′` (arguments `cos Δφ`).
    pub beta2: f64,
    /// `−sin³ Δφ · P‴ + 3 sin Δφ cos Δφ · P″ + sin Δφ · P′`.
    pub beta3: f64,
    /// `(μ_{h₁₁(x)}, μ_{h₁₂(x)}, μ_{h₂₂(x)}, μ_{h₁₁(y)}, μ_{h₁₂(y)}, μ_{h₂₂(y)})`.
    pub mu: [f64; 6],
}

/// Conditional Hessian mean given equal gradients `(u₁, u₂)` at both points.
///
/// The x-block is `(2β₂u₂/(λ+2α₂), 2β₁u₁/(λ+2α₁), 2β₃u₂/(λ+2α₂))` and the
/// y-block is its negative: swapping the two points reverses the sign of
/// every odd cross-covariance (reflection through the midpoint meridian maps
/// one configuration onto the other while flipping the θ-odd components).
/// Every component is `O(Δφ)` as the points merge.
///
/// The quadrupole at `Δφ = π/2` has `λ + 2α₂ = 0` (see
/// [`TwoPointGradientCovariance::determinant`]): conditioning on equal
/// azimuthal derivatives is degenerate there, and the components that divide
/// by it come back infinite.
pub fn conditional_mean(
    ell: u32,
    delta_phi: f64,
    u1: f64,
    u2: f64,
) -> Result<ConditionalMean, AnalyticError> {
    if !(delta_phi > 0.0 && delta_phi < PI) {
        return Err(AnalyticError::SeparationOutOfRange(delta_phi));
    }
    let jet = legendre_jet(ell, delta_phi.cos()).expect("cosine lies in [-1, 1]");
    let (s, c) = delta_phi.sin_cos();
    let beta1 = s * jet.d2();
    let beta2 = s * c * jet.d2() + s * jet.d1();
    let beta3 = -s * s * s * jet.d3() + 3.0 * s * c * jet.d2() + s * jet.d1();

    let lam = eigenvalue(ell);
    let (alpha1, alpha2) = gradient_alphas(ell, delta_phi);
    let denom = [lam + 2.0 * alpha1, lam + 2.0 * alpha2];
    for (index, d) in denom.iter().enumerate() {
        if d.abs() <= 1e-12 * lam {
            return Err(AnalyticError::DegenerateDenominator { delta_phi, index: index + 1 });
        }
    }
    let mx = [
        2.0 * beta2 * u2 / denom[1],
        2.0 * beta1 * u1 / denom[0],
        2.0 * beta3 * u2 / denom[1],
    ];
    let mu = [mx[0], mx[1], mx[2], -mx[0], -mx[1], -mx[2]];
    Ok(ConditionalMean { ell, delta_phi, u1, u2, beta1, beta2, beta3, mu })
}

/// Level-dependent factor in the second-chaos approximation of the k-th
/// Lipschitz-Killing curvature of the excursion set `{f ≥ u}` (the caller
/// supplies the `(λ/2)^{(2−k)/2}`-type degree scaling and the common factor
/// `∫ H₂(f)`):
///
/// * `k = 0` (Euler characteristic): `(1/2) H₂(u) H₁(u) φ(u) / (2π)`
/// * `k = 1` (half boundary length): `(1/2) √(π/8) H₁(u)² φ(u)`
/// * `k = 2` (area): `(1/2) H₀(u) H₁(u) φ(u)`
///
/// All three vanish at `u = 0` (`H₁(0) = 0`): the phase transition level.
pub fn lk_leading(k: u8, u: f64) -> f64 {
    let gauss = (-0.5 * u * u).exp() / (2.0 * PI).sqrt();
    match k {
        0 => 0.5 * (u * u - 1.0) * u * gauss / (2.0 * PI),
        1 => 0.5 * (PI / 8.0).sqrt() * u * u * gauss,
        2 => 0.5 * u * gauss,
        _ => panic!("Lipschitz-Killing index must be 0, 1, or 2, got {k}"),
    }
}

/// Monte Carlo estimates of the second-chaos coefficients with standard
/// errors.
#[derive(Debug, Clone, Copy)]
pub struct MCoefficients {
    pub m0: f64,
    pub m1: f64,
    pub m2: f64,
    pub se0: f64,
    pub se1: f64,
    pub se2: f64,
    /// Number of antithetic pairs actually averaged.
    pub pairs: usize,
}

/// Monte Carlo oracle for the chaos coefficients `M₀(I), M₁(I), M₂(I)`.
///
/// Draws `(Z₁, Z₂, Z₃)` Gaussian with covariance `[[3,0,1],[0,1,0],[1,0,3]]`
/// (the large-ℓ law of the scaled Hessian diagonal/off-diagonal/diagonal),
/// maps to the standardized variables `Y₃ = Z₁/√3`, `Y₄ = Z₂`,
/// `Y₅ = √(3/8) Z₃ − Z₁/√24`, and averages
/// `|Y₃Y₅/√8 + Y₃²/8 − Y₄²/8| · w_k(Y) · 1{(√2/√3)Y₃ + Y₅/√3 ∈ I}` with
///
/// * `w₀ = −5/4 + 2Y₃²/3 − (√2/3)Y₃Y₅ + Y₅²/12`
/// * `w₁ = −Y₃² + Y₄² + √2 Y₃Y₅`
/// * `w₂ = Y₃² − 3Y₄² − 2√2 Y₃Y₅ + 2Y₅²`
///
/// Antithetic pairs `(Y, −Y)` are exact variance reducers here because every
/// factor except the indicator is even in `Y`; the pair average replaces the
/// indicator by its symmetrization, which leaves all three expectations
/// unchanged. Expected values: `M₁ = M₂ = 0` and `M₀(I) = −(1/8) ∫_I p₃`.
pub fn m_coefficients_oracle(interval: Interval, n: usize, seed: u64) -> MCoefficients {
    assert!(n >= 10_000, "oracle needs at least 1e4 samples, got {n}");
    let pairs = n / 2;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sqrt3 = 3.0_f64.sqrt();
    let mut sum = [0.0_f64; 3];
    let mut sum_sq = [0.0_f64; 3];
    for _ in 0..pairs {
        let n1: f64 = rng.sample(StandardNormal);
        let n2: f64 = rng.sample(StandardNormal);
        let n3: f64 = rng.sample(StandardNormal);
        let z1 = sqrt3 * n1;
        let z2 = n2;
        let z3 = n1 / sqrt3 + (8.0_f64 / 3.0).sqrt() * n3;
        let y3 = z1 / sqrt3;
        let y4 = z2;
        let y5 = (3.0_f64 / 8.0).sqrt() * z3 - z1 / 24.0_f64.sqrt();
        let q = (y3 * y5 / 8.0_f64.sqrt() + y3 * y3 / 8.0 - y4 * y4 / 8.0).abs();
        let w = [
            -1.25 + 2.0 * y3 * y3 / 3.0 - 2.0_f64.sqrt() / 3.0 * y3 * y5 + y5 * y5 / 12.0,
            -y3 * y3 + y4 * y4 + 2.0_f64.sqrt() * y3 * y5,
            y3 * y3 - 3.0 * y4 * y4 - 2.0 * 2.0_f64.sqrt() * y3 * y5 + 2.0 * y5 * y5,
        ];
        let t = (2.0_f64 / 3.0).sqrt() * y3 + y5 / sqrt3;
        let indicator =
            0.5 * (f64::from(interval.contains(t)) + f64::from(interval.contains(-t)));
        for k in 0..3 {
            let sample = q * w[k] * indicator;
            sum[k] += sample;
            sum_sq[k] += sample * sample;
        }
    }
    let np = pairs as f64;
    let mean = [sum[0] / np, sum[1] / np, sum[2] / np];
    let se = |k: usize| ((sum_sq[k] / np - mean[k] * mean[k]) / (np - 1.0)).max(0.0).sqrt();
    MCoefficients {
        m0: mean[0],
        m1: mean[1],
        m2: mean[2],
        se0: se(0),
        se1: se(1),
        se2: se(2),
        pairs,
    }
}

/// Expected value of the `M₀` functional: `−(1/8) ∫_I p₃`.
pub fn expected_m0(interval: Interval) -> f64 {
    -0.125 * interval_integral(density_p3, interval)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn grid(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
        let step = (hi - lo) / (n - 1) as f64;
        (0..n).map(move |i| lo + step * i as f64)
    }

    #[test]
    fn densities_are_even() {
        for t in grid(0.0, 8.0, 161) {
            for d in [density_pi_c, density_p0, density_p2, density_p3, density_mu] {
                assert_abs_diff_eq!(d(t), d(-t), epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn pinned_density_values_at_zero() {
        assert_abs_diff_eq!(density_pi_c(0.0), 0.345494, epsilon = 1e-6);
        assert_abs_diff_eq!(density_p3(0.0), 0.199471, epsilon = 1e-6);
        assert_abs_diff_eq!(density_pi_c(0.0), 3.0_f64.sqrt() / (8.0 * PI).sqrt(), epsilon = 1e-16);
        assert_abs_diff_eq!(density_p3(0.0), 1.0 / (8.0 * PI).sqrt(), epsilon = 1e-16);
    }

    #[test]
    fn p0_is_rescaled_pi_c() {
        for t in grid(-6.0, 6.0, 241) {
            assert_abs_diff_eq!(density_p0(t), 4.0 / 3.0_f64.sqrt() * density_pi_c(t), epsilon = 1e-12);
        }
    }

    #[test]
    fn chaos_weight_identity() {
        // −(5/4) p₀ + (1/4) p₂ = −p₃ pointwise; the resolved sign is minus.
        for t in grid(-6.0, 6.0, 241) {
            let combo = -1.25 * density_p0(t) + 0.25 * density_p2(t);
            assert_abs_diff_eq!(combo, -density_p3(t), epsilon = 1e-12);
        }
    }

    #[test]
    fn full_line_integrals() {
        let full = Interval::full();
        assert_abs_diff_eq!(interval_integral(density_pi_c, full), 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(interval_integral(density_p3, full), 0.0, epsilon = 1e-10);
        assert_abs_diff_eq!(
            interval_integral(density_p0, full),
            4.0 / 3.0_f64.sqrt(),
            epsilon = 1e-10
        );
        // Via the identity p₂ = 5 p₀ + 4 p₃.
        assert_abs_diff_eq!(
            interval_integral(density_p2, full),
            20.0 / 3.0_f64.sqrt(),
            epsilon = 1e-9
        );
        assert_abs_diff_eq!(
            interval_integral(density_mu, full),
            -1.0 / (3.0 * 3.0_f64.sqrt() * PI),
            epsilon = 1e-10
        );
    }

    #[test]
    fn half_interval_closed_form_matches_quadrature() {
        for u in [0.5, 1.0, 2.0, ubar_root()] {
            let quad = interval_integral(density_p3, Interval::above(u));
            assert_abs_diff_eq!(p3_half_interval(u), quad, epsilon = 1e-10);
        }
    }

    #[test]
    fn rejected_sign_variant_does_not_match_quadrature() {
        // Flipping the second term gives (u e^{−u²/2}/√(8π))(u²−1−2e^{−u²}),
        // which vanishes at ū but disagrees with quadrature elsewhere.
        let variant = |u: f64| {
            u * (-0.5 * u * u).exp() / (8.0 * PI).sqrt() * (u * u - 1.0 - 2.0 * (-u * u).exp())
        };
        let u = 0.5;
        let quad = interval_integral(density_p3, Interval::above(u));
        assert!((variant(u) - quad).abs() > 1e-3);
        assert_abs_diff_eq!(variant(ubar_root()), 0.0, epsilon = 1e-12);
        // The resolved form vanishes only at u = 0.
        assert!(p3_half_interval(ubar_root()).abs() > 0.1);
        assert_abs_diff_eq!(p3_half_interval(0.0), 0.0, epsilon = 1e-16);
    }

    #[test]
    fn ubar_matches_quoted_value() {
        let u = ubar_root();
        assert!((u - 1.2096).abs() < 5e-5, "ubar = {u}");
        assert!((-2.0 * (-u * u).exp() + u * u - 1.0).abs() < 1e-10);
    }

    #[test]
    fn expected_count_examples() {
        assert_abs_diff_eq!(
            expected_count(10, Interval::full()),
            220.0 / 3.0_f64.sqrt(),
            epsilon = 1e-8
        );
        assert_abs_diff_eq!(
            expected_count(1, Interval::full()),
            4.0 / 3.0_f64.sqrt(),
            epsilon = 1e-10
        );
        let degenerate = Interval::new(0.7, 0.7).unwrap();
        assert_eq!(expected_count(17, degenerate), 0.0);
    }

    #[test]
    fn variance_examples() {
        assert!(variance_leading(40, Interval::full()) < 1e-15);
        let i = Interval::above(1.0);
        assert_abs_diff_eq!(
            variance_leading(20, i) * 8.0,
            variance_leading(40, i),
            epsilon = 1e-9
        );
        let ratio = variance_log_leading(50, Interval::full()) / (2500.0 * 50.0_f64.ln());
        assert_abs_diff_eq!(ratio, 1.0 / (27.0 * PI * PI), epsilon = 1e-6);
    }

    #[test]
    fn reduction_coefficient_examples() {
        let i = Interval::above(1.0);
        assert_abs_diff_eq!(
            reduction_coefficient(1, i),
            2.0 / 3.0 * interval_integral(density_p3, i),
            epsilon = 1e-14
        );
        assert!(reduction_coefficient(10, Interval::full()).abs() < 1e-9);
        // coefficient² · 2(2ℓ+1) / (ℓ³ ν) = 2(ℓ+1)²/(ℓ(2ℓ+1)) → 1 + O(1/ℓ).
        let normalized = |ell: u32| {
            let c = reduction_coefficient(ell, i);
            c * c * 2.0 * (2.0 * ell as f64 + 1.0) / variance_leading(ell, i)
        };
        assert!((normalized(100) - 1.0).abs() < 2.0 / 100.0);
        assert!((normalized(10) - 1.0).abs() < 2.0 / 10.0);
        assert!((normalized(100) - 1.0).abs() < (normalized(10) - 1.0).abs());
    }

    #[test]
    fn jet_covariance_degree_two() {
        let jc = jet_covariance(2).unwrap();
        assert_abs_diff_eq!(jc.matrix[2][2], 12.0, epsilon = 1e-12);
        assert_abs_diff_eq!(jc.matrix[3][3], 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(jc.matrix[2][4], 6.0, epsilon = 1e-12);
        let c = jc.cholesky;
        assert_abs_diff_eq!(c[0][0], 3.0_f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(c[2][2], 2.0 * 3.0_f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(c[3][3], 3.0_f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(c[4][2], 3.0_f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(c[4][4], 3.0, epsilon = 1e-12);
    }

    #[test]
    fn cholesky_reconstructs_covariance() {
        for ell in [2u32, 3, 10, 50] {
            let jc = jet_covariance(ell).unwrap();
            let scale = jc.matrix[2][2];
            for i in 0..5 {
                for j in 0..5 {
                    let mut dot = 0.0;
                    for k in 0..5 {
                        dot += jc.cholesky[i][k] * jc.cholesky[j][k];
                    }
                    assert!(
                        (dot - jc.matrix[i][j]).abs() <= 1e-12 * scale,
                        "ell={ell} entry ({i},{j}): {dot} vs {}",
                        jc.matrix[i][j]
                    );
                }
            }
        }
    }

    #[test]
    fn jet_covariance_rejects_degree_one() {
        assert_eq!(jet_covariance(1).unwrap_err(), AnalyticError::SingularJetCovariance(1));
    }

    fn det4(m: &[[f64; 4]; 4]) -> f64 {
        // Cofactor expansion along the first row; fine at this size.
        let minor = |r: usize, c: usize| {
            let mut sub = [[0.0; 3]; 3];
            let (mut si, mut sj);
            si = 0;
            for i in 0..4 {
                if i == r {
                    continue;
                }
                sj = 0;
                for j in 0..4 {
                    if j == c {
                        continue;
                    }
                    sub[si][sj] = m[i][j];
                    sj += 1;
                }
                si += 1;
            }
            sub[0][0] * (sub[1][1] * sub[2][2] - sub[1][2] * sub[2][1])
                - sub[0][1] * (sub[1][0] * sub[2][2] - sub[1][2] * sub[2][0])
                + sub[0][2] * (sub[1][0] * sub[2][1] - sub[1][1] * sub[2][0])
        };
        (0..4).fold(0.0, |acc, c| {
            acc + if c % 2 == 0 { 1.0 } else { -1.0 } * m[0][c] * minor(0, c)
        })
    }

    #[test]
    fn two_point_determinant_factorizes_and_is_positive() {
        for ell in [2u32, 5, 20] {
            for k in 0..1000 {
                let dphi = 1e-3 + (PI - 2e-3) * (k as f64 + 0.5) / 1000.0;
                let tp = two_point_gradient_cov(ell, dphi).unwrap();
                assert!(tp.determinant > 0.0, "ell={ell} dphi={dphi}");
                let direct = det4(&tp.matrix);
                // Both evaluations cancel as the points merge (Δφ → 0) or
                // become antipodal (Δφ → π), so the achievable agreement
                // degrades by the bracket conditioning v²/(v² − αᵢ²); in the
                // interior that factor is O(1) and the bound is the plain
                // 1e−10 relative.
                let v2 = tp.matrix[0][0] * tp.matrix[0][0];
                let conditioning = (v2 / (v2 - tp.alpha1 * tp.alpha1))
                    .abs()
                    .max((v2 / (v2 - tp.alpha2 * tp.alpha2)).abs())
                    .max(1.0);
                let tol = 1e-10 * conditioning;
                assert!(
                    (tp.determinant - direct).abs() <= tol * tp.determinant.abs().max(direct.abs()),
                    "ell={ell} dphi={dphi}: {} vs {direct}",
                    tp.determinant
                );
            }
        }
    }

    #[test]
    fn two_point_determinant_vanishes_quartically() {
        // det ~ C·Δφ⁴ as the points merge: least-squares log-log slope 4 ± 0.1.
        let ell = 5;
        let mut logs = Vec::new();
        for k in 0..7 {
            let dphi = 0.2 / (1 << k) as f64;
            let det = two_point_gradient_cov(ell, dphi).unwrap().determinant;
            logs.push((dphi.ln(), det.ln()));
        }
        let n = logs.len() as f64;
        let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
        let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
        let slope = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>()
            / logs.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum::<f64>();
        assert!((slope - 4.0).abs() < 0.1, "slope = {slope}");
    }

    #[test]
    fn two_point_rejects_boundary_separations() {
        assert!(matches!(
            two_point_gradient_cov(5, 0.0),
            Err(AnalyticError::SeparationOutOfRange(_))
        ));
        assert!(matches!(
            two_point_gradient_cov(5, PI),
            Err(AnalyticError::SeparationOutOfRange(_))
        ));
    }

    #[test]
    fn conditional_mean_zero_gradients() {
        let cm = conditional_mean(5, 0.6, 0.0, 0.0).unwrap();
        assert_eq!(cm.mu, [0.0; 6]);
    }

    #[test]
    fn conditional_mean_antisymmetric_blocks() {
        let cm = conditional_mean(8, 0.9, 0.3, -1.1).unwrap();
        for k in 0..3 {
            assert_abs_diff_eq!(cm.mu[k], -cm.mu[k + 3], epsilon = 1e-15);
        }
    }

    #[test]
    fn conditional_mean_linear_rate_near_merge() {
        // μ_k / Δφ settles to a finite limit along a logarithmic grid.
        let rates: Vec<[f64; 3]> = (1..=5)
            .map(|k| {
                let dphi = 10.0_f64.powi(-k);
                let cm = conditional_mean(5, dphi, 1.0, 1.0).unwrap();
                [cm.mu[0] / dphi, cm.mu[1] / dphi, cm.mu[2] / dphi]
            })
            .collect();
        for r in &rates {
            for v in r {
                assert!(v.is_finite() && v.abs() < 100.0);
            }
        }
        for k in 0..3 {
            let tail = (rates[3][k] - rates[4][k]).abs();
            let head = (rates[0][k] - rates[1][k]).abs();
            assert!(tail <= 1e-4 * rates[4][k].abs().max(1.0), "component {k}");
            assert!(tail < head.max(1e-12));
        }
    }

    #[test]
    fn lk_leading_examples() {
        for k in 0..3 {
            assert_eq!(lk_leading(k, 0.0), 0.0);
        }
        let gauss1 = (-0.5_f64).exp() / (2.0 * PI).sqrt();
        assert_abs_diff_eq!(lk_leading(2, 1.0), 0.5 * gauss1, epsilon = 1e-15);
        assert_abs_diff_eq!(lk_leading(2, 1.0), 0.120985, epsilon = 1e-6);
        assert!(lk_leading(0, 2.0) > 0.0);
    }

    #[test]
    #[should_panic(expected = "Lipschitz-Killing index")]
    fn lk_leading_rejects_bad_index() {
        lk_leading(3, 1.0);
    }

    #[test]
    fn m_oracle_standardized_substitution() {
        // The (Z → Y) substitution must produce iid standard Y's; check the
        // empirical second moments of the mapped variables.
        let mut rng = ChaCha8Rng::seed_from_u64(404);
        let n = 200_000;
        let mut m = [[0.0_f64; 3]; 3];
        let sqrt3 = 3.0_f64.sqrt();
        for _ in 0..n {
            let n1: f64 = rng.sample(StandardNormal);
            let n2: f64 = rng.sample(StandardNormal);
            let n3: f64 = rng.sample(StandardNormal);
            let z1 = sqrt3 * n1;
            let z3 = n1 / sqrt3 + (8.0_f64 / 3.0).sqrt() * n3;
            let y = [z1 / sqrt3, n2, (3.0_f64 / 8.0).sqrt() * z3 - z1 / 24.0_f64.sqrt()];
            for i in 0..3 {
                for j in 0..3 {
                    m[i][j] += y[i] * y[j];
                }
            }
        }
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((m[i][j] / n as f64 - want).abs() < 0.02, "({i},{j})");
            }
        }
    }

    #[test]
    fn m_oracle_smoke() {
        let i = Interval::above(1.0);
        let est = m_coefficients_oracle(i, 60_000, 11);
        assert!(est.se0 > 0.0 && est.se1 > 0.0 && est.se2 > 0.0);
        assert_eq!(est.pairs, 30_000);
        // Loose 5σ envelope at this small sample size; the acceptance suite
        // runs the tight 3σ version at n = 1e6.
        assert!((est.m0 - expected_m0(i)).abs() < 5.0 * est.se0, "m0 = {} ± {}", est.m0, est.se0);
        assert!(est.m1.abs() < 5.0 * est.se1);
        assert!(est.m2.abs() < 5.0 * est.se2);
    }

    #[test]
    fn interval_parsing() {
        let i: Interval = "-inf:inf".parse().unwrap();
        assert_eq!(i, Interval::full());
        let j: Interval = "1:inf".parse().unwrap();
        assert_eq!(j, Interval::above(1.0));
        let k: Interval = "-0.5:2.25".parse().unwrap();
        assert_eq!(k.lower(), -0.5);
        assert_eq!(k.upper(), 2.25);
        assert!("1;2".parse::<Interval>().is_err());
        assert!("2:1".parse::<Interval>().is_err());
        assert!("a:b".parse::<Interval>().is_err());
        assert!(Interval::new(f64::NAN, 1.0).is_err());
    }

    #[test]
    fn interval_serde_round_trip() {
        let i = Interval::above(0.5);
        let json = serde_json::to_string(&i).unwrap();
        assert_eq!(json, "\"0.5:inf\"");
        let back: Interval = serde_json::from_str(&json).unwrap();
        assert_eq!(back, i);
    }

    proptest! {
        #[test]
        fn interval_display_round_trips(lo in -50.0_f64..50.0, width in 0.0_f64..100.0) {
            let i = Interval::new(lo, lo + width).unwrap();
            let back: Interval = i.to_string().parse().unwrap();
            prop_assert_eq!(back, i);
        }

        #[test]
        fn nu_c_is_nonnegative(lo in -4.0_f64..4.0, width in 0.0_f64..8.0) {
            prop_assert!(nu_c(Interval::new(lo, lo + width).unwrap()) >= 0.0);
        }

        #[test]
        fn expected_count_monotone_in_interval(lo in -3.0_f64..3.0, w1 in 0.0_f64..4.0, w2 in 0.0_f64..4.0) {
            let narrow = Interval::new(lo, lo + w1).unwrap();
            let wide = Interval::new(lo, lo + w1 + w2).unwrap();
            prop_assert!(expected_count(12, narrow) <= expected_count(12, wide) + 1e-12);
        }
    }
}
