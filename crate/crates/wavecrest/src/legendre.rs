//! Legendre jets and fully normalized associated Legendre rows.
//!
//! Two kernels live here:
//!
//! * [`legendre_jet`]: `P_ℓ(t)` together with its first four derivatives,
//!   carried jointly through the differentiated three-term recurrence. The
//!   recurrence is exact (integer arithmetic in f64) at `t = ±1`, which is
//!   where the covariance identities need it most.
//! * [`associated_legendre_row`]: for fixed `ℓ` and colatitude `θ`, the values
//!   `N_{ℓm} P_{ℓm}(cos θ)` for all `m = 0..ℓ` plus first and second
//!   θ-derivatives. Fully normalized spherical-harmonic convention with the
//!   Condon-Shortley phase folded in, so that
//!   `∫₀^π [N_{ℓm} P_{ℓm}(cos θ)]² sin θ dθ = 1/(2π)`.
//!
//! Everything is computed by upward recurrences that stay finite at the poles;
//! no division by `sin θ` occurs anywhere in this module.

use thiserror::Error;

/// Errors from Legendre kernels.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum LegendreError {
    /// Argument of `P_ℓ` outside the closed interval `[-1, 1]`.
    #[error("legendre argument {0} outside [-1, 1]")]
    ArgumentOutOfRange(f64),
    /// Colatitude outside `[0, π]`.
    #[error("colatitude {0} outside [0, pi]")]
    ColatitudeOutOfRange(f64),
}

/// Value and first four derivatives of `P_ℓ` at one point of `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LegendreJet {
    pub ell: u32,
    pub t: f64,
    /// `d[k]` is the k-th derivative of `P_ℓ` at `t` (so `d[0]` is the value).
    pub d: [f64; 5],
}

impl LegendreJet {
    pub fn value(&self) -> f64 {
        self.d[0]
    }
    pub fn d1(&self) -> f64 {
        self.d[1]
    }
    pub fn d2(&self) -> f64 {
        self.d[2]
    }
    pub fn d3(&self) -> f64 {
        self.d[3]
    }
    pub fn d4(&self) -> f64 {
        self.d[4]
    }
}

/// `P_ℓ` and derivatives through order four at `t ∈ [-1, 1]`.
///
/// Differentiating `ℓ P_ℓ = (2ℓ-1) t P_{ℓ-1} - (ℓ-1) P_{ℓ-2}` k times gives
/// `ℓ P_ℓ⁽ᵏ⁾ = (2ℓ-1) (t P_{ℓ-1}⁽ᵏ⁾ + k P_{ℓ-1}⁽ᵏ⁻¹⁾) - (ℓ-1) P_{ℓ-2}⁽ᵏ⁾`,
/// and the five orders are advanced together. At `t = ±1` every intermediate
/// is an integer (for the orders pinned by the tests, well below 2^53), so
/// the endpoint identities `P_ℓ(1) = 1`, `P_ℓ'(1) = λ_ℓ/2`,
/// `P_ℓ''(1) = λ_ℓ(λ_ℓ-2)/8` hold exactly.
///
/// ```
/// let jet = wavecrest::legendre::legendre_jet(10, 1.0).unwrap();
/// assert_eq!(jet.value(), 1.0);
/// assert_eq!(jet.d1(), 55.0); // λ/2 with λ = 110
/// ```
pub fn legendre_jet(ell: u32, t: f64) -> Result<LegendreJet, LegendreError> {
    if !(-1.0..=1.0).contains(&t) || t.is_nan() {
        return Err(LegendreError::ArgumentOutOfRange(t));
    }
    let mut prev = [1.0, 0.0, 0.0, 0.0, 0.0]; // P_0
    if ell == 0 {
        return Ok(LegendreJet { ell, t, d: prev });
    }
    let mut curr = [t, 1.0, 0.0, 0.0, 0.0]; // P_1
    for n in 2..=ell {
        let nf = n as f64;
        let a = 2.0 * nf - 1.0;
        let b = nf - 1.0;
        let mut next = [0.0; 5];
        for k in 0..5 {
            let chain = if k == 0 { 0.0 } else { k as f64 * curr[k - 1] };
            next[k] = (a * (t * curr[k] + chain) - b * prev[k]) / nf;
        }
        prev = curr;
        curr = next;
    }
    Ok(LegendreJet { ell, t, d: curr })
}

/// Closed form for the k-th derivative of `P_ℓ` at `t = 1`:
/// `P_ℓ⁽ᵏ⁾(1) = ∏_{j=0}^{k-1} (λ_ℓ - j(j+1)) / (2^k k!)`.
pub fn derivative_at_one(ell: u32, k: u32) -> f64 {
    let lambda = crate::eigenvalue(ell);
    let mut num = 1.0;
    for j in 0..k {
        num *= lambda - (j * (j + 1)) as f64;
    }
    let mut den = 1.0;
    for i in 1..=k {
        den *= 2.0 * i as f64;
    }
    num / den
}

/// Row of fully normalized associated Legendre values at one colatitude.
///
/// `values[m] = N_{ℓm} P_{ℓm}(cos θ)` for `m = 0..=ℓ`, where
/// `N_{ℓm} = sqrt((2ℓ+1)/(4π) · (ℓ-m)!/(ℓ+m)!)` and `P_{ℓm}` carries the
/// Condon-Shortley phase `(-1)^m`. `d1[m]`, `d2[m]` are derivatives in θ,
/// not in `cos θ`, so the row is finite all the way into the poles.
#[derive(Debug, Clone)]
pub struct AssociatedLegendreRow {
    pub ell: u32,
    pub theta: f64,
    pub values: Vec<f64>,
    pub d1: Vec<f64>,
    pub d2: Vec<f64>,
}

impl AssociatedLegendreRow {
    /// Allocate a zeroed row buffer for degree `ell` (fill with `compute`).
    pub fn buffer(ell: u32) -> Self {
        let n = ell as usize + 1;
        AssociatedLegendreRow {
            ell,
            theta: f64::NAN,
            values: vec![0.0; n],
            d1: vec![0.0; n],
            d2: vec![0.0; n],
        }
    }

    /// Recompute the row in place at a new colatitude, reusing the buffers.
    ///
    /// For each order m the degree recurrence
    /// `F_ℓ = a_{ℓm} cos θ · F_{ℓ-1} - b_{ℓm} F_{ℓ-2}` is advanced from the
    /// diagonal seed `F_{mm} = κ_m sin^m θ`, with first and second
    /// θ-derivatives carried along. O(ℓ²) per call.
    pub fn compute(&mut self, theta: f64) -> Result<(), LegendreError> {
        if !(0.0..=std::f64::consts::PI).contains(&theta) || theta.is_nan() {
            return Err(LegendreError::ColatitudeOutOfRange(theta));
        }
        let ell = self.ell;
        self.theta = theta;
        let (s, c) = (theta.sin(), theta.cos());
        let four_pi = 4.0 * std::f64::consts::PI;

        // kappa_m = (-1)^m sqrt((2m+1)/(4π)) sqrt((2m-1)!!/(2m)!!), built up
        // incrementally: ratio (2m-1)!!/(2m)!! gains a factor (2m-1)/(2m).
        let mut double_fact_ratio = 1.0;
        for m in 0..=ell {
            let mf = m as f64;
            if m > 0 {
                double_fact_ratio *= (2.0 * mf - 1.0) / (2.0 * mf);
            }
            let kappa = if m % 2 == 0 { 1.0 } else { -1.0 }
                * ((2.0 * mf + 1.0) / four_pi * double_fact_ratio).sqrt();

            // Diagonal seed F_mm = kappa s^m and its θ-derivatives. The
            // s^{m-2} factor is only evaluated for m ≥ 2: its coefficient
            // m(m-1) vanishes below that, and 0 · s^{-1} would be NaN at the
            // poles rather than the zero the mathematics intends.
            let sm = s.powi(m as i32);
            let mut f = [kappa * sm, 0.0, 0.0];
            if m >= 1 {
                f[1] = kappa * mf * s.powi(m as i32 - 1) * c;
                let smm2 = if m >= 2 { s.powi(m as i32 - 2) } else { 0.0 };
                f[2] = kappa * (mf * (mf - 1.0) * smm2 * c * c - mf * sm);
            }

            if m == ell {
                self.store(m, f);
                continue;
            }

            // F_{m+1,m} = sqrt(2m+3) cos θ F_mm.
            let r = (2.0 * mf + 3.0).sqrt();
            let mut g = [
                r * c * f[0],
                r * (-s * f[0] + c * f[1]),
                r * (-c * f[0] - 2.0 * s * f[1] + c * f[2]),
            ];

            for n in (m + 2)..=ell {
                let nf = n as f64;
                let n2 = nf * nf;
                let m2 = mf * mf;
                let a = ((4.0 * n2 - 1.0) / (n2 - m2)).sqrt();
                let b = ((2.0 * nf + 1.0) * ((nf - 1.0) * (nf - 1.0) - m2)
                    / ((2.0 * nf - 3.0) * (n2 - m2)))
                    .sqrt();
                let next = [
                    a * c * g[0] - b * f[0],
                    a * (-s * g[0] + c * g[1]) - b * f[1],
                    a * (-c * g[0] - 2.0 * s * g[1] + c * g[2]) - b * f[2],
                ];
                f = g;
                g = next;
            }
            self.store(m, g);
        }
        Ok(())
    }

    fn store(&mut self, m: u32, f: [f64; 3]) {
        let i = m as usize;
        self.values[i] = f[0];
        self.d1[i] = f[1];
        self.d2[i] = f[2];
    }
}

/// Normalized associated Legendre row at colatitude `theta` for degree `ell`.
///
/// ```
/// let row = wavecrest::legendre::associated_legendre_row(2, 1.0).unwrap();
/// // m = 0 entry is sqrt(5/(16π)) (3cos²θ - 1)
/// let expect = (5.0 / (16.0 * std::f64::consts::PI)).sqrt()
///     * (3.0 * 1.0f64.cos().powi(2) - 1.0);
/// assert!((row.values[0] - expect).abs() < 1e-14);
/// ```
pub fn associated_legendre_row(
    ell: u32,
    theta: f64,
) -> Result<AssociatedLegendreRow, LegendreError> {
    let mut row = AssociatedLegendreRow::buffer(ell);
    row.compute(theta)?;
    Ok(row)
}
