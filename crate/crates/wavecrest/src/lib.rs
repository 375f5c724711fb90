//! Critical points of Gaussian random spherical harmonics.
//!
//! `wavecrest` is a small laboratory for the critical-point geometry of random
//! eigenfunctions of the sphere Laplacian. It samples Gaussian random fields
//! with covariance `P_ℓ(cos d(x, y))`, locates and classifies every critical
//! point of a sample numerically, and compares ensemble statistics of those
//! censuses (counts, variances, correlations with sup-level functionals)
//! against closed-form predictions.
//!
//! The crate is organized around one pipeline:
//!
//! 1. [`legendre`]: Legendre jets `P_ℓ, P_ℓ', …, P_ℓ''''` and fully normalized
//!    associated Legendre rows, the kernels everything else consumes.
//! 2. [`random_field`]: coefficient sampling, field/jet synthesis at points and on
//!    quadrature grids, rotations, and spectral statistics.
//! 3. [`analytic`]: the closed-form side. Densities of critical values,
//!    expected counts, variance coefficients, jet covariances, and the
//!    second-chaos reduction coefficient.
//! 4. [`critical`]: the Newton census. Seeded root-finding of the gradient
//!    field, Morse classification, excursion-set functionals.
//! 5. [`experiments`]: reproducible ensembles, records, and the verification
//!    reports (reduction, CLT, cross-correlations, covariance diagnostics).
//!
//! The `wavecrest` binary exposes the same pipeline as subcommands
//! (`sample`, `census`, `densities`, `predict`, `ensemble`, `verify`).
//!
//! A narrative guide lives in `book/` (mdbook source); its chapters are
//! compiled into [`guide`] so every code block in the book runs under
//! `cargo test --doc`.

pub mod analytic;
pub mod critical;
pub mod experiments;
pub mod guide;
pub mod legendre;
pub mod quad;
pub mod random_field;
pub mod stats;
pub mod wigner;

/// Laplace eigenvalue `λ_ℓ = ℓ(ℓ+1)` of the degree-`ℓ` eigenspace.
pub fn eigenvalue(ell: u32) -> f64 {
    (ell as f64) * (ell as f64 + 1.0)
}
