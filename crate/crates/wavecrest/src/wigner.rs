//! Wigner small-d matrices for a single degree: the real kernel of the
//! rotation action on spherical-harmonic coefficients.
//!
//! Conventions: rows are indexed by m′ and columns by m, both in −ℓ..ℓ;
//! `d_{00}(β) = P_ℓ(cos β)`; the full complex rotation matrix for Euler
//! angles (α, β, γ) in z-y-z order is
//! `D_{m′m}(α,β,γ) = e^{−i m′ α} · d_{m′m}(β) · e^{−i m γ}`.

/// Dense table of `d^ℓ_{m′m}(β)` for one degree.
#[derive(Debug, Clone)]
pub struct WignerD {
    ell: u32,
    dim: usize,
    data: Vec<f64>,
}

impl WignerD {
    /// Build the full (2ℓ+1)² table by the three-term recurrence in degree,
    /// with closed-form edge rows.
    ///
    /// Interior entries (|m′|, |m| < j) satisfy
    /// `d^j = X (cos β − m′m/(j(j−1))) d^{j−1} − Y d^{j−2}` with
    /// `X = j(2j−1)/√((j²−m′²)(j²−m²))` and
    /// `Y = (j/(j−1)) √(((j−1)²−m′²)((j−1)²−m²)) / √((j²−m′²)(j²−m²))`;
    /// the Y factor vanishes exactly where the j−2 table has no entry. Edge
    /// entries come from
    /// `d^j_{j,m} = √C(2j, j−m) cos^{j+m}(β/2) (−sin(β/2))^{j−m}` and the
    /// reflection symmetries `d_{m′m} = (−1)^{m′−m} d_{mm′} = d_{−m,−m′}`.
    pub fn new(ell: u32, beta: f64) -> WignerD {
        let cos_beta = beta.cos();
        let mut prev2 = table_for(0, beta); // j = 0: the single entry 1
        if ell == 0 {
            return WignerD { ell, dim: 1, data: prev2 };
        }
        let mut prev = table_for(1, beta);
        // The edge lines cover all of the 3x3 table except its center.
        prev[4] = cos_beta;
        if ell == 1 {
            return WignerD { ell, dim: 3, data: prev };
        }
        for j in 2..=ell {
            let mut cur = table_for(j, beta);
            let jf = j as f64;
            let ji = j as i64;
            let dim = 2 * j as usize + 1;
            let pdim = dim - 2;
            for mp in -(ji - 1)..=(ji - 1) {
                let mpf = mp as f64;
                for m in -(ji - 1)..=(ji - 1) {
                    let mf = m as f64;
                    let norm = ((jf * jf - mpf * mpf) * (jf * jf - mf * mf)).sqrt();
                    let x = jf * (2.0 * jf - 1.0) / norm;
                    let y = jf / (jf - 1.0)
                        * (((jf - 1.0) * (jf - 1.0) - mpf * mpf)
                            * ((jf - 1.0) * (jf - 1.0) - mf * mf))
                            .sqrt()
                        / norm;
                    let p1 = prev[((mp + ji - 1) as usize) * pdim + (m + ji - 1) as usize];
                    let p2 = if mp.unsigned_abs() as u32 <= j - 2 && m.unsigned_abs() as u32 <= j - 2
                    {
                        prev2[((mp + ji - 2) as usize) * (pdim - 2) + (m + ji - 2) as usize]
                    } else {
                        0.0
                    };
                    cur[((mp + ji) as usize) * dim + (m + ji) as usize] =
                        x * (cos_beta - mpf * mf / (jf * (jf - 1.0))) * p1 - y * p2;
                }
            }
            prev2 = prev;
            prev = cur;
        }
        WignerD { ell, dim: 2 * ell as usize + 1, data: prev }
    }

    pub fn ell(&self) -> u32 {
        self.ell
    }

    /// Entry `d_{m′m}`; panics outside −ℓ..ℓ.
    pub fn entry(&self, mp: i32, m: i32) -> f64 {
        let l = self.ell as i32;
        assert!(mp.abs() <= l && m.abs() <= l, "order out of range for degree {l}");
        self.data[((mp + l) as usize) * self.dim + (m + l) as usize]
    }
}

/// Allocate the degree-j table and fill the four edge lines from the
/// closed-form top row; interior entries start at zero.
fn table_for(j: u32, beta: f64) -> Vec<f64> {
    let dim = 2 * j as usize + 1;
    let mut data = vec![0.0; dim * dim];
    let ji = j as i64;
    let (c, s) = ((0.5 * beta).cos(), (0.5 * beta).sin());
    if j == 0 {
        data[0] = 1.0;
        return data;
    }
    let idx = |mp: i64, m: i64| ((mp + ji) as usize) * dim + (m + ji) as usize;
    let mut top = vec![0.0; dim];
    for m in -ji..=ji {
        top[(m + ji) as usize] = binomial_sqrt(2 * j, (ji - m) as u32)
            * c.powi((ji + m) as i32)
            * (-s).powi((ji - m) as i32);
    }
    let sign = |e: i64| if e.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
    for m in -ji..=ji {
        data[idx(ji, m)] = top[(m + ji) as usize];
        data[idx(-ji, m)] = sign(ji + m) * top[(ji - m) as usize];
        data[idx(m, ji)] = sign(ji + m) * top[(m + ji) as usize];
        data[idx(m, -ji)] = top[(ji - m) as usize];
    }
    data
}

/// √(C(n, k)) with the product kept in f64; safe through n ≈ 1000.
fn binomial_sqrt(n: u32, k: u32) -> f64 {
    let k = k.min(n - k);
    let mut c = 1.0_f64;
    for i in 0..k {
        c *= (n - k + 1 + i) as f64 / (i + 1) as f64;
    }
    c.sqrt()
}
