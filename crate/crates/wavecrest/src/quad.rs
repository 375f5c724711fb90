//! Quadrature: Gauss-Legendre nodes, the sphere product grid, and an adaptive
//! Simpson rule for line integrals of smooth densities.

use crate::legendre::legendre_jet;

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
///
/// Nodes are the roots of `P_n`, found by Newton iteration from the Chebyshev
/// initial guess; weights are `2 / ((1 - x²) P_n'(x)²)`. Exact for
/// polynomials of degree `2n - 1`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        // Tricomi-style initial guess, accurate to O(n^-2).
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let jet = legendre_jet(n as u32, x.clamp(-1.0, 1.0)).unwrap();
            let step = jet.value() / jet.d1();
            x -= step;
            if step.abs() < 1e-15 {
                break;
            }
        }
        let jet = legendre_jet(n as u32, x.clamp(-1.0, 1.0)).unwrap();
        nodes[n - 1 - i] = x;
        weights[n - 1 - i] = 2.0 / ((1.0 - x * x) * jet.d1() * jet.d1());
    }
    (nodes, weights)
}

/// Product quadrature grid on the sphere: Gauss-Legendre in `cos θ` times a
/// uniform (trapezoid) grid in `φ`.
///
/// With `n_theta` Gauss nodes and `n_phi` azimuthal nodes the rule integrates
/// spherical polynomials exactly up to degree `min(2 n_theta - 1, n_phi - 1)`;
/// [`SphereGrid::for_degree`] sizes it as `(2ℓ+2) × (4ℓ+4)`, exact through
/// degree `4ℓ` (enough for quartic functionals of a degree-ℓ field).
#[derive(Debug, Clone)]
pub struct SphereGrid {
    pub n_theta: usize,
    pub n_phi: usize,
    /// Colatitudes of the Gauss nodes, increasing.
    pub thetas: Vec<f64>,
    /// Combined weight per (θ-row, φ-node): `w_GL · 2π / n_phi`. Sums to 4π
    /// after multiplying by `n_phi`.
    pub row_weights: Vec<f64>,
    /// Azimuths `2π j / n_phi`.
    pub phis: Vec<f64>,
}

impl SphereGrid {
    pub fn new(n_theta: usize, n_phi: usize) -> Self {
        let (nodes, weights) = gauss_legendre(n_theta);
        let dphi = 2.0 * std::f64::consts::PI / n_phi as f64;
        // cos θ decreasing in θ: nodes are increasing in x, so reverse for θ.
        let thetas: Vec<f64> = nodes.iter().rev().map(|x| x.acos()).collect();
        let row_weights: Vec<f64> = weights.iter().rev().map(|w| w * dphi).collect();
        let phis: Vec<f64> = (0..n_phi).map(|j| dphi * j as f64).collect();
        SphereGrid { n_theta, n_phi, thetas, row_weights, phis }
    }

    /// Default grid for degree-`ell` fields: `(2ℓ+2) × (4ℓ+4)`.
    pub fn for_degree(ell: u32) -> Self {
        SphereGrid::new(2 * ell as usize + 2, 4 * ell as usize + 4)
    }

    /// Integrate a row-major table of point values over the sphere.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        assert_eq!(values.len(), self.n_theta * self.n_phi);
        let mut total = 0.0;
        for i in 0..self.n_theta {
            let mut row = 0.0;
            for j in 0..self.n_phi {
                row += values[i * self.n_phi + j];
            }
            total += self.row_weights[i] * row;
        }
        total
    }

    /// Total measure carried by the grid (should be 4π).
    pub fn total_weight(&self) -> f64 {
        self.row_weights.iter().sum::<f64>() * self.n_phi as f64
    }
}

/// Adaptive Simpson integration of a smooth function on `[a, b]`.
///
/// Classic recursive halving with the 15-point error estimate; `tol` is an
/// absolute tolerance on the result.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        ((b - a) / 6.0 * (fa + 4.0 * fm + fb), m, fm)
    }
    fn recurse<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        whole: f64,
        m: f64,
        fm: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let (left, lm, flm) = simpson(f, a, fa, m, fm);
        let (right, rm, frm) = simpson(f, m, fm, b, fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            recurse(f, a, fa, m, fm, left, lm, flm, 0.5 * tol, depth - 1)
                + recurse(f, m, fm, b, fb, right, rm, frm, 0.5 * tol, depth - 1)
        }
    }
    if a == b {
        return 0.0;
    }
    let (fa, fb) = (f(a), f(b));
    let (whole, m, fm) = simpson(f, a, fa, b, fb);
    recurse(f, a, fa, b, fb, whole, m, fm, tol, 48)
}
