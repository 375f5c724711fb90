//! Gaussian random spherical eigenfunctions: coefficient sampling, field and
//! jet synthesis, rotations, and the spectral (chaos) statistics.
//!
//! A degree-ℓ field is `f(x) = √(4π/(2ℓ+1)) Σ_m a_m Y_m(x)` with complex
//! coefficients satisfying the reality constraint
//! `a_{−m} = (−1)^m conj(a_m)`; under the sampling law (`Re a_m`, `Im a_m`
//! independent N(0, 1/2) for m ≥ 1, `a_0` real standard normal) the field is
//! the unit-variance isotropic Gaussian with covariance `P_ℓ(cos d(x, y))`.
//!
//! Derivatives are reported in the moving orthonormal frame
//! `(∂/∂θ, (1/sin θ) ∂/∂φ)`; the Hessian entries are the covariant ones,
//! `h₁₁ = ∂₁₁f`, `h₁₂ = (∂₂₁ − cot θ ∂₂)f`, `h₂₂ = (∂₂₂ + cot θ ∂₁)f`, whose
//! one-point law does not depend on the evaluation point.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::legendre::{AssociatedLegendreRow, LegendreError};
use crate::quad::SphereGrid;
use crate::wigner::WignerD;

/// Errors from sampling, evaluation, and integration of fields.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FieldError {
    #[error("colatitude {theta} outside the open interval (0, pi)")]
    InvalidColatitude { theta: f64 },
    #[error("colatitude {theta} violates the degree-{ell} pole margin {margin:.3e} for jets")]
    PoleMargin { theta: f64, ell: u32, margin: f64 },
    #[error("degree {ell} needs {expected} coefficients per array, got re: {re}, im: {im}")]
    CoefficientLength { ell: u32, expected: usize, re: usize, im: usize },
    #[error("the m = 0 coefficient must be real (got imaginary part {0})")]
    ComplexZeroMode(f64),
    #[error("grid {n_theta} x {n_phi} cannot integrate degree-{degree} integrands exactly")]
    InsufficientQuadrature { n_theta: usize, n_phi: usize, degree: u32 },
    #[error(transparent)]
    Legendre(#[from] LegendreError),
}

/// Complex coefficients `a_m` for `m = 0..=ℓ` of one realization; negative
/// orders are implied by the reality constraint `a_{−m} = (−1)^m conj(a_m)`.
///
/// Serializes to `{ell, seed, re[], im[]}`; deserialization re-checks the
/// array lengths and the real zero mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CoefficientData")]
pub struct HarmonicCoefficients {
    pub ell: u32,
    /// Reproducibility token; `None` for derived (e.g. rotated) coefficients.
    pub seed: Option<u64>,
    re: Vec<f64>,
    im: Vec<f64>,
}

#[derive(Deserialize)]
struct CoefficientData {
    ell: u32,
    seed: Option<u64>,
    re: Vec<f64>,
    im: Vec<f64>,
}

impl TryFrom<CoefficientData> for HarmonicCoefficients {
    type Error = FieldError;

    fn try_from(data: CoefficientData) -> Result<Self, FieldError> {
        HarmonicCoefficients::from_parts(data.ell, data.seed, data.re, data.im)
    }
}

impl HarmonicCoefficients {
    /// Wrap explicit coefficient arrays for `m = 0..=ell`.
    pub fn from_parts(
        ell: u32,
        seed: Option<u64>,
        re: Vec<f64>,
        im: Vec<f64>,
    ) -> Result<Self, FieldError> {
        let expected = ell as usize + 1;
        if re.len() != expected || im.len() != expected {
            return Err(FieldError::CoefficientLength { ell, expected, re: re.len(), im: im.len() });
        }
        if im[0] != 0.0 {
            return Err(FieldError::ComplexZeroMode(im[0]));
        }
        Ok(HarmonicCoefficients { ell, seed, re, im })
    }

    pub fn re(&self) -> &[f64] {
        &self.re
    }

    pub fn im(&self) -> &[f64] {
        &self.im
    }

    /// `a_m` as `(re, im)` for any `m` in `−ℓ..=ℓ`, applying the reality
    /// constraint to negative orders.
    pub fn complex(&self, m: i32) -> (f64, f64) {
        let l = self.ell as i32;
        assert!(m.abs() <= l, "order {m} out of range for degree {l}");
        if m >= 0 {
            (self.re[m as usize], self.im[m as usize])
        } else {
            let k = (-m) as usize;
            let sign = if m.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
            (sign * self.re[k], -sign * self.im[k])
        }
    }

    /// Total spectral power `Σ_{m=−ℓ}^{ℓ} |a_m|²`.
    pub fn power(&self) -> f64 {
        let mut total = self.re[0] * self.re[0];
        for m in 1..self.re.len() {
            total += 2.0 * (self.re[m] * self.re[m] + self.im[m] * self.im[m]);
        }
        total
    }

    /// Pole margin inside which jets are refused: `0.5/ℓ` radians.
    pub fn pole_margin(&self) -> f64 {
        0.5 / self.ell as f64
    }
}

/// A point on the sphere in colatitude/longitude radians.
///
/// Construction keeps `θ` strictly inside `(0, π)` and reduces `φ` into
/// `[0, 2π)`; jets additionally require `θ` outside the degree-dependent pole
/// margin (polar caps are handled upstream by rotating coefficients).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphericalPoint {
    theta: f64,
    phi: f64,
}

impl SphericalPoint {
    pub fn new(theta: f64, phi: f64) -> Result<Self, FieldError> {
        if !(theta > 0.0 && theta < std::f64::consts::PI) {
            return Err(FieldError::InvalidColatitude { theta });
        }
        Ok(SphericalPoint { theta, phi: phi.rem_euclid(2.0 * std::f64::consts::PI) })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    /// Unit vector in ℝ³ (z toward θ = 0).
    pub fn to_unit(&self) -> [f64; 3] {
        let (st, ct) = self.theta.sin_cos();
        let (sp, cp) = self.phi.sin_cos();
        [st * cp, st * sp, ct]
    }

    /// Back from a unit vector; fails at the poles like [`SphericalPoint::new`].
    pub fn from_unit(v: [f64; 3]) -> Result<Self, FieldError> {
        let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        let theta = (v[2] / norm).clamp(-1.0, 1.0).acos();
        SphericalPoint::new(theta, v[1].atan2(v[0]))
    }

    /// Geodesic distance to another point.
    pub fn distance(&self, other: &SphericalPoint) -> f64 {
        let a = self.to_unit();
        let b = other.to_unit();
        (a[0] * b[0] + a[1] * b[1] + a[2] * b[2]).clamp(-1.0, 1.0).acos()
    }
}

/// Value, frame gradient, and covariant Hessian of a field at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldJet {
    pub value: f64,
    /// `(∂₁f, ∂₂f) = (∂_θ f, ∂_φ f / sin θ)`.
    pub grad: [f64; 2],
    /// `(h₁₁, h₁₂, h₂₂)`.
    pub hess: [f64; 3],
}

impl FieldJet {
    pub fn gradient_norm(&self) -> f64 {
        self.grad[0].hypot(self.grad[1])
    }

    pub fn hessian_det(&self) -> f64 {
        self.hess[0] * self.hess[2] - self.hess[1] * self.hess[1]
    }
}

/// Draw one coefficient set; a deterministic function of `(ell, seed)`.
pub fn sample_coefficients(ell: u32, seed: u64) -> HarmonicCoefficients {
    assert!(ell >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = ell as usize + 1;
    let mut re = Vec::with_capacity(n);
    let mut im = Vec::with_capacity(n);
    re.push(rng.sample::<f64, _>(StandardNormal));
    im.push(0.0);
    for _ in 1..n {
        re.push(rng.sample::<f64, _>(StandardNormal) * std::f64::consts::FRAC_1_SQRT_2);
        im.push(rng.sample::<f64, _>(StandardNormal) * std::f64::consts::FRAC_1_SQRT_2);
    }
    HarmonicCoefficients { ell, seed: Some(seed), re, im }
}

/// The five synthesis sums at one azimuth given a precomputed θ-row.
struct AzimuthSums {
    f: f64,
    f_t: f64,
    f_tt: f64,
    f_p: f64,
    f_pt: f64,
    f_pp: f64,
}

fn azimuth_sums(coeffs: &HarmonicCoefficients, row: &AssociatedLegendreRow, phi: f64) -> AzimuthSums {
    let (re, im) = (&coeffs.re, &coeffs.im);
    let mut s = AzimuthSums {
        f: re[0] * row.values[0],
        f_t: re[0] * row.d1[0],
        f_tt: re[0] * row.d2[0],
        f_p: 0.0,
        f_pt: 0.0,
        f_pp: 0.0,
    };
    // e^{imφ} by complex rotation; cm/sm are Re/Im of a_m e^{imφ}.
    let (sin_phi, cos_phi) = phi.sin_cos();
    let (mut c, mut sn) = (1.0_f64, 0.0_f64);
    for m in 1..re.len() {
        let (cn, snn) = (c * cos_phi - sn * sin_phi, c * sin_phi + sn * cos_phi);
        c = cn;
        sn = snn;
        let cm = re[m] * c - im[m] * sn;
        let sm = re[m] * sn + im[m] * c;
        let mf = m as f64;
        s.f += 2.0 * cm * row.values[m];
        s.f_t += 2.0 * cm * row.d1[m];
        s.f_tt += 2.0 * cm * row.d2[m];
        s.f_p -= 2.0 * mf * sm * row.values[m];
        s.f_pt -= 2.0 * mf * sm * row.d1[m];
        s.f_pp -= 2.0 * mf * mf * cm * row.values[m];
    }
    let norm = (4.0 * std::f64::consts::PI / (2.0 * coeffs.ell as f64 + 1.0)).sqrt();
    s.f *= norm;
    s.f_t *= norm;
    s.f_tt *= norm;
    s.f_p *= norm;
    s.f_pt *= norm;
    s.f_pp *= norm;
    s
}

/// Field value at one point.
pub fn evaluate(coeffs: &HarmonicCoefficients, x: SphericalPoint) -> Result<f64, FieldError> {
    let row = crate::legendre::associated_legendre_row(coeffs.ell, x.theta())?;
    Ok(evaluate_with_row(coeffs, &row, x.phi()))
}

/// Field value reusing a precomputed θ-row (hot path for grids and Newton).
pub fn evaluate_with_row(coeffs: &HarmonicCoefficients, row: &AssociatedLegendreRow, phi: f64) -> f64 {
    debug_assert_eq!(coeffs.ell, row.ell);
    let (re, im) = (&coeffs.re, &coeffs.im);
    let mut f = re[0] * row.values[0];
    let (sin_phi, cos_phi) = phi.sin_cos();
    let (mut c, mut sn) = (1.0_f64, 0.0_f64);
    for m in 1..re.len() {
        let (cn, snn) = (c * cos_phi - sn * sin_phi, c * sin_phi + sn * cos_phi);
        c = cn;
        sn = snn;
        f += 2.0 * (re[m] * c - im[m] * sn) * row.values[m];
    }
    f * (4.0 * std::f64::consts::PI / (2.0 * coeffs.ell as f64 + 1.0)).sqrt()
}

/// Value, gradient, and covariant Hessian at one point.
pub fn evaluate_jet(coeffs: &HarmonicCoefficients, x: SphericalPoint) -> Result<FieldJet, FieldError> {
    let margin = coeffs.pole_margin();
    if x.theta() < margin || x.theta() > std::f64::consts::PI - margin {
        return Err(FieldError::PoleMargin { theta: x.theta(), ell: coeffs.ell, margin });
    }
    let row = crate::legendre::associated_legendre_row(coeffs.ell, x.theta())?;
    Ok(evaluate_jet_with_row(coeffs, &row, x.phi()))
}

/// Jet evaluation reusing a precomputed θ-row.
pub fn evaluate_jet_with_row(
    coeffs: &HarmonicCoefficients,
    row: &AssociatedLegendreRow,
    phi: f64,
) -> FieldJet {
    debug_assert_eq!(coeffs.ell, row.ell);
    let s = azimuth_sums(coeffs, row, phi);
    let (sin_t, cos_t) = row.theta.sin_cos();
    let cot = cos_t / sin_t;
    let g1 = s.f_t;
    let g2 = s.f_p / sin_t;
    FieldJet {
        value: s.f,
        grad: [g1, g2],
        hess: [
            s.f_tt,
            s.f_pt / sin_t - cot * g2,
            s.f_pp / (sin_t * sin_t) + cot * g1,
        ],
    }
}

/// Values on the product grid of the given colatitudes with `n_phi` uniform
/// azimuths `2π j / n_phi`, row-major.
pub fn grid_evaluate(
    coeffs: &HarmonicCoefficients,
    thetas: &[f64],
    n_phi: usize,
) -> Result<Vec<f64>, FieldError> {
    let mut row = AssociatedLegendreRow::buffer(coeffs.ell);
    let mut out = Vec::with_capacity(thetas.len() * n_phi);
    let dphi = 2.0 * std::f64::consts::PI / n_phi as f64;
    for &theta in thetas {
        row.compute(theta)?;
        for j in 0..n_phi {
            out.push(evaluate_with_row(coeffs, &row, dphi * j as f64));
        }
    }
    Ok(out)
}

/// Frame gradients `(∂₁f, ∂₂f)` on the same product grid, row-major.
pub fn grid_gradients(
    coeffs: &HarmonicCoefficients,
    thetas: &[f64],
    n_phi: usize,
) -> Result<Vec<[f64; 2]>, FieldError> {
    let margin = coeffs.pole_margin();
    let mut row = AssociatedLegendreRow::buffer(coeffs.ell);
    let mut out = Vec::with_capacity(thetas.len() * n_phi);
    let dphi = 2.0 * std::f64::consts::PI / n_phi as f64;
    let (re, im) = (&coeffs.re, &coeffs.im);
    let norm = (4.0 * std::f64::consts::PI / (2.0 * coeffs.ell as f64 + 1.0)).sqrt();
    for &theta in thetas {
        if theta < margin || theta > std::f64::consts::PI - margin {
            return Err(FieldError::PoleMargin { theta, ell: coeffs.ell, margin });
        }
        row.compute(theta)?;
        let sin_t = theta.sin();
        for j in 0..n_phi {
            let phi = dphi * j as f64;
            // Per-node m-loop; the (cos mφ, sin mφ) pair rotates in m.
            let (sin_phi, cos_phi) = phi.sin_cos();
            let (mut c, mut sn) = (1.0_f64, 0.0_f64);
            let mut f_t = re[0] * row.d1[0];
            let mut f_p = 0.0;
            for m in 1..re.len() {
                let (cn, snn) = (c * cos_phi - sn * sin_phi, c * sin_phi + sn * cos_phi);
                c = cn;
                sn = snn;
                let cm = re[m] * c - im[m] * sn;
                let sm = re[m] * sn + im[m] * c;
                f_t += 2.0 * cm * row.d1[m];
                f_p -= 2.0 * m as f64 * sm * row.values[m];
            }
            out.push([norm * f_t, norm * f_p / sin_t]);
        }
    }
    Ok(out)
}

/// Coefficients of the rotated field `x ↦ f(g x)` for the active rotation
/// `g = R_z(α) R_y(β) R_z(γ)`.
///
/// The transformation is `a′_k = e^{ikγ} Σ_m d_{km}(−β) e^{imα} a_m`, which
/// preserves reality and total power; `evaluate(rotated, x)` equals
/// `evaluate(original, g·x)`.
pub fn rotate_coefficients(
    coeffs: &HarmonicCoefficients,
    alpha: f64,
    beta: f64,
    gamma: f64,
) -> HarmonicCoefficients {
    let l = coeffs.ell as i32;
    let d = WignerD::new(coeffs.ell, -beta);
    let size = (2 * l + 1) as usize;
    let mut are = vec![0.0; size];
    let mut aim = vec![0.0; size];
    for m in -l..=l {
        let (re, im) = coeffs.complex(m);
        let (sa, ca) = (m as f64 * alpha).sin_cos();
        are[(m + l) as usize] = re * ca - im * sa;
        aim[(m + l) as usize] = re * sa + im * ca;
    }
    let mut out_re = Vec::with_capacity(l as usize + 1);
    let mut out_im = Vec::with_capacity(l as usize + 1);
    for k in 0..=l {
        let mut sre = 0.0;
        let mut sim = 0.0;
        for m in -l..=l {
            let w = d.entry(k, m);
            sre += w * are[(m + l) as usize];
            sim += w * aim[(m + l) as usize];
        }
        let (sg, cg) = (k as f64 * gamma).sin_cos();
        out_re.push(sre * cg - sim * sg);
        out_im.push(sre * sg + sim * cg);
    }
    // Reality is preserved exactly in theory; kill the rounding residue so
    // the m = 0 invariant stays exact.
    debug_assert!(out_im[0].abs() < 1e-9 * (1.0 + coeffs.power()));
    out_im[0] = 0.0;
    HarmonicCoefficients { ell: coeffs.ell, seed: None, re: out_re, im: out_im }
}

/// The second-chaos statistic `S_ℓ = Σ_{m=−ℓ}^{ℓ} (|a_m|² − 1)`.
///
/// By Parseval, `∫_{S²} H₂(f) dx = 4π S_ℓ / (2ℓ+1)`.
pub fn second_chaos_statistic(coeffs: &HarmonicCoefficients) -> f64 {
    coeffs.power() - (2.0 * coeffs.ell as f64 + 1.0)
}

fn require_exactness(grid: &SphereGrid, degree: u32) -> Result<(), FieldError> {
    // Gauss is exact through 2 n_θ − 1 in cos θ, the trapezoid through
    // n_φ − 1 in azimuthal order.
    if 2 * grid.n_theta < degree as usize + 1 || grid.n_phi < degree as usize + 1 {
        return Err(FieldError::InsufficientQuadrature {
            n_theta: grid.n_theta,
            n_phi: grid.n_phi,
            degree,
        });
    }
    Ok(())
}

/// Quadrature of `H₂(f) = f² − 1` over the sphere.
pub fn h2_integral(coeffs: &HarmonicCoefficients, grid: &SphereGrid) -> Result<f64, FieldError> {
    require_exactness(grid, 2 * coeffs.ell)?;
    let values = grid_evaluate(coeffs, &grid.thetas, grid.n_phi)?;
    let integrand: Vec<f64> = values.iter().map(|f| f * f - 1.0).collect();
    Ok(grid.integrate(&integrand))
}

/// Quadrature of `H₄(f) = f⁴ − 6f² + 3` over the sphere.
pub fn fourth_chaos_statistic(
    coeffs: &HarmonicCoefficients,
    grid: &SphereGrid,
) -> Result<f64, FieldError> {
    require_exactness(grid, 4 * coeffs.ell)?;
    let values = grid_evaluate(coeffs, &grid.thetas, grid.n_phi)?;
    Ok(integrate_h4(&values, grid))
}

/// `∫ H₄ dx` from precomputed point values (exposed for synthetic inputs).
pub fn integrate_h4(values: &[f64], grid: &SphereGrid) -> f64 {
    let integrand: Vec<f64> = values.iter().map(|f| {
        let f2 = f * f;
        f2 * f2 - 6.0 * f2 + 3.0
    }).collect();
    grid.integrate(&integrand)
}
