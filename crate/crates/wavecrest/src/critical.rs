//! Complete censuses of critical points for one field realization.
//!
//! The finder works in chart coordinates. A screening grid flags cells where
//! both frame gradient components straddle zero (plus isolated local minima
//! of `|∇f|²` as a safety net), then a damped Newton iteration on the
//! gradient polishes each candidate. Polar caps, where the chart degenerates,
//! are handled by rerunning the same search on the coefficients of the
//! quarter-turn rotated field, whose chart is regular there, and mapping the
//! resulting points back.
//!
//! A census is only reported `complete` when the Morse counts balance: on the
//! sphere, `n_max + n_min − n_saddle = 2` for any field whose critical points
//! are nondegenerate. When the check fails the search escalates through
//! doubled grids, up to eight times the configured density, before giving up.

use std::fmt;
use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::analytic::Interval;
use crate::eigenvalue;
use crate::legendre::{derivative_at_one, AssociatedLegendreRow};
use crate::quad::SphereGrid;
use crate::random_field::{
    evaluate_jet_with_row, grid_evaluate, grid_gradients, rotate_coefficients, FieldError,
    FieldJet, HarmonicCoefficients, SphericalPoint,
};

/// Errors specific to census construction and consumption.
#[derive(Debug, thiserror::Error)]
pub enum CriticalError {
    #[error("field is identically zero; every point is critical")]
    DegenerateField,
    #[error("census is incomplete; Morse counts cannot be trusted")]
    IncompleteCensus,
    #[error(transparent)]
    Field(#[from] FieldError),
}

/// Morse type of a nondegenerate critical point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CriticalKind {
    Maximum,
    Minimum,
    Saddle,
}

impl fmt::Display for CriticalKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CriticalKind::Maximum => "max",
            CriticalKind::Minimum => "min",
            CriticalKind::Saddle => "saddle",
        })
    }
}

/// One located critical point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriticalPoint {
    pub position: SphericalPoint,
    pub value: f64,
    pub kind: CriticalKind,
    /// Determinant of the covariant Hessian (frame invariant).
    pub hessian_det: f64,
    /// Frame gradient norm at the reported position (frame invariant).
    pub gradient_residual: f64,
}

/// Bookkeeping from one census run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CensusDiagnostics {
    /// Newton starts attempted.
    pub seeds: usize,
    /// Starts that failed to converge (wandered, stalled, or hit bounds).
    pub newton_failures: usize,
    /// Converged points merged into an earlier duplicate.
    pub dedupe_merges: usize,
    /// Points whose Hessian determinant fell below the degeneracy threshold.
    pub degenerate: usize,
    /// Full grid passes used: 1 normally, up to 4 when Morse imbalance
    /// escalates the screen, 0 when the degree-1 closed form applies.
    pub refined: usize,
}

/// All critical points of one realization, with Morse bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct CriticalCensus {
    pub ell: u32,
    /// Sorted by colatitude, then longitude.
    pub points: Vec<CriticalPoint>,
    pub n_max: usize,
    pub n_min: usize,
    pub n_saddle: usize,
    /// True when the Morse counts balance and no degenerate point was seen.
    pub complete: bool,
    pub diagnostics: CensusDiagnostics,
}

impl CriticalCensus {
    pub fn total(&self) -> usize {
        self.points.len()
    }

    /// `n_max + n_min − n_saddle`, which must equal 2 for a complete census.
    pub fn euler_characteristic(&self) -> i64 {
        self.n_max as i64 + self.n_min as i64 - self.n_saddle as i64
    }
}

/// Tuning knobs for the finder. The defaults are sized so that the screening
/// grid oversamples the angular wavelength `2π/ℓ` by an order of magnitude.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct FinderConfig {
    /// Screening rows per degree: the grid has `⌈κℓ⌉` colatitude rows.
    pub kappa: f64,
    /// Convergence when `|∇f| ≤ newton_tol_scale · √(ℓ(ℓ+1))`.
    pub newton_tol_scale: f64,
    /// Duplicate-merge radius as a fraction of the grid cell `π/(κℓ)`.
    pub dedupe_scale: f64,
    pub max_iterations: usize,
    pub max_halvings: usize,
}

impl Default for FinderConfig {
    fn default() -> Self {
        FinderConfig {
            kappa: 8.0,
            newton_tol_scale: 1e-10,
            dedupe_scale: 0.1,
            max_iterations: 30,
            max_halvings: 20,
        }
    }
}

/// A converged point before classification, in original-chart coordinates.
struct RawPoint {
    theta: f64,
    phi: f64,
    value: f64,
    gradient_residual: f64,
    hess: [f64; 3],
}

fn unit_from_angles(theta: f64, phi: f64) -> [f64; 3] {
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    [st * cp, st * sp, ct]
}

/// Chart point from a unit vector, nudged off the exact poles so that the
/// result is always representable (the nudge is far below any tolerance).
fn spherical_from_unit_clamped(v: [f64; 3]) -> SphericalPoint {
    let theta = v[2].clamp(-1.0, 1.0).acos().clamp(1e-12, std::f64::consts::PI - 1e-12);
    let phi = v[1].atan2(v[0]);
    SphericalPoint::new(theta, phi).expect("clamped colatitude is representable")
}

fn geodesic(a: (f64, f64), b: (f64, f64)) -> f64 {
    let u = unit_from_angles(a.0, a.1);
    let v = unit_from_angles(b.0, b.1);
    (u[0] * v[0] + u[1] * v[1] + u[2] * v[2]).clamp(-1.0, 1.0).acos()
}

/// Damped Newton iteration on the frame gradient in chart coordinates.
///
/// The iterate moves freely in longitude and anywhere inside the colatitude
/// `bounds`. Ownership of a root is decided by the caller from the converged
/// position, so a run that drifts far from its seed is still useful: it
/// either lands on a root someone owns or merges with a duplicate.
///
/// The Jacobian of `(∂₁f, ∂₂f)` with respect to `(θ, φ)` reconstructs from
/// the covariant jet: `∂_θ∂₁f = h₁₁`, `∂_φ∂₁f = sin θ h₁₂ + cos θ ∂₂f`,
/// `∂_θ∂₂f = h₁₂`, `∂_φ∂₂f = sin θ h₂₂ − cos θ ∂₁f`.
fn newton_refine(
    coeffs: &HarmonicCoefficients,
    row: &mut AssociatedLegendreRow,
    start: (f64, f64),
    bounds: (f64, f64),
    tol: f64,
    config: &FinderConfig,
) -> Option<(f64, f64, FieldJet)> {
    let (mut theta, mut phi) = start;
    row.compute(theta).ok()?;
    let mut jet = evaluate_jet_with_row(coeffs, row, phi);
    let mut gnorm = jet.gradient_norm();
    for _ in 0..config.max_iterations {
        if gnorm <= tol {
            return Some((theta, phi, jet));
        }
        let (st, ct) = theta.sin_cos();
        let j11 = jet.hess[0];
        let j12 = st * jet.hess[1] + ct * jet.grad[1];
        let j21 = jet.hess[1];
        let j22 = st * jet.hess[2] - ct * jet.grad[0];
        let det = j11 * j22 - j12 * j21;
        if det == 0.0 || !det.is_finite() {
            return None;
        }
        let mut dt = -(j22 * jet.grad[0] - j12 * jet.grad[1]) / det;
        let mut dp = -(j11 * jet.grad[1] - j21 * jet.grad[0]) / det;
        let mut improved = false;
        for _ in 0..=config.max_halvings {
            let nt = theta + dt;
            let np = phi + dp;
            let in_bounds = nt > bounds.0 && nt < bounds.1;
            if in_bounds && row.compute(nt).is_ok() {
                let njet = evaluate_jet_with_row(coeffs, row, np);
                let ng = njet.gradient_norm();
                if ng < gnorm {
                    theta = nt;
                    phi = np;
                    jet = njet;
                    gnorm = ng;
                    improved = true;
                    break;
                }
            }
            dt *= 0.5;
            dp *= 0.5;
        }
        if !improved {
            return None;
        }
    }
    if gnorm <= tol {
        Some((theta, phi, jet))
    } else {
        None
    }
}

/// Does the set of values straddle zero (exact zeros count as straddling)?
fn straddles(values: [f64; 4]) -> bool {
    let mut pos = false;
    let mut neg = false;
    for v in values {
        if v >= 0.0 {
            pos = true;
        }
        if v <= 0.0 {
            neg = true;
        }
    }
    pos && neg
}

/// One screening-plus-Newton pass over a contiguous band of colatitude rows.
fn band_pass(
    coeffs: &HarmonicCoefficients,
    rows: &[f64],
    n_phi: usize,
    bounds: (f64, f64),
    tol: f64,
    config: &FinderConfig,
    diagnostics: &mut CensusDiagnostics,
) -> Result<Vec<RawPoint>, FieldError> {
    let n_rows = rows.len();
    if n_rows < 2 {
        return Ok(Vec::new());
    }
    let grads = grid_gradients(coeffs, rows, n_phi)?;
    let dphi = 2.0 * std::f64::consts::PI / n_phi as f64;
    let mean_gsq = grads.iter().map(|g| g[0] * g[0] + g[1] * g[1]).sum::<f64>()
        / grads.len() as f64;

    let at = |i: usize, j: usize| grads[i * n_phi + j % n_phi];

    // Raw candidate mask over plaquettes: both gradient components change
    // sign among the four corners.
    let n_cells = (n_rows - 1) * n_phi;
    let mut raw = vec![false; n_cells];
    for i in 0..n_rows - 1 {
        for j in 0..n_phi {
            let corners = [at(i, j), at(i, j + 1), at(i + 1, j), at(i + 1, j + 1)];
            let c0 = straddles([corners[0][0], corners[1][0], corners[2][0], corners[3][0]]);
            let c1 = straddles([corners[0][1], corners[1][1], corners[2][1], corners[3][1]]);
            raw[i * n_phi + j] = c0 && c1;
        }
    }

    // Every candidate plaquette seeds its own Newton run. A cluster of
    // adjacent candidates produces redundant runs, but those land on the
    // same root and merge in dedupe; thinning a cluster risks keeping only
    // the one seed whose basin leads somewhere else.
    let mut starts: Vec<(f64, f64)> = Vec::new();
    for i in 0..n_rows - 1 {
        for j in 0..n_phi {
            if raw[i * n_phi + j] {
                starts.push(((rows[i] + rows[i + 1]) / 2.0, (j as f64 + 0.5) * dphi));
            }
        }
    }
    let cell = |i: isize, j: isize| -> bool {
        if i < 0 || i as usize >= n_rows - 1 {
            return false;
        }
        let jw = j.rem_euclid(n_phi as isize) as usize;
        raw[i as usize * n_phi + jw]
    };

    // Safety net: isolated deep local minima of |∇f|² whose surrounding
    // plaquettes showed no sign change (shallow or grazing crossings).
    for i in 1..n_rows.saturating_sub(1) {
        for j in 0..n_phi {
            let g = at(i, j);
            let gsq = g[0] * g[0] + g[1] * g[1];
            if gsq >= 0.5 * mean_gsq {
                continue;
            }
            let mut is_min = true;
            'neigh: for di in -1i64..=1 {
                for dj in -1i64..=1 {
                    if di == 0 && dj == 0 {
                        continue;
                    }
                    let ni = (i as i64 + di) as usize;
                    let nj = (j as i64 + dj).rem_euclid(n_phi as i64) as usize;
                    let h = at(ni, nj);
                    if h[0] * h[0] + h[1] * h[1] <= gsq {
                        is_min = false;
                        break 'neigh;
                    }
                }
            }
            if !is_min {
                continue;
            }
            let (ii, jj) = (i as isize, j as isize);
            if cell(ii, jj) || cell(ii - 1, jj) || cell(ii, jj - 1) || cell(ii - 1, jj - 1) {
                continue;
            }
            starts.push((rows[i], j as f64 * dphi));
        }
    }

    let mut row_buf = AssociatedLegendreRow::buffer(coeffs.ell);
    let mut found = Vec::new();
    diagnostics.seeds += starts.len();
    for start in starts {
        match newton_refine(coeffs, &mut row_buf, start, bounds, tol, config) {
            Some((theta, phi, jet)) => found.push(RawPoint {
                theta,
                phi: phi.rem_euclid(2.0 * std::f64::consts::PI),
                value: jet.value,
                gradient_residual: jet.gradient_norm(),
                hess: jet.hess,
            }),
            None => diagnostics.newton_failures += 1,
        }
    }
    Ok(found)
}

/// Merge points within `radius` of each other, keeping the better residual.
fn dedupe(mut points: Vec<RawPoint>, radius: f64, diagnostics: &mut CensusDiagnostics) -> Vec<RawPoint> {
    points.sort_by(|a, b| a.theta.total_cmp(&b.theta).then(a.phi.total_cmp(&b.phi)));
    let mut kept: Vec<RawPoint> = Vec::with_capacity(points.len());
    for p in points {
        let mut duplicate = None;
        for (idx, q) in kept.iter().enumerate().rev() {
            // Kept stays sorted by colatitude up to one merge radius, so a
            // doubled window is a safe early exit.
            if p.theta - q.theta > 2.0 * radius {
                break;
            }
            if geodesic((p.theta, p.phi), (q.theta, q.phi)) <= radius {
                duplicate = Some(idx);
                break;
            }
        }
        match duplicate {
            Some(idx) => {
                diagnostics.dedupe_merges += 1;
                if p.gradient_residual < kept[idx].gradient_residual {
                    kept[idx] = p;
                }
            }
            None => kept.push(p),
        }
    }
    kept
}

/// Exact census for degree 1, where the field is linear in the unit vector:
/// `f(x) = ⟨v, x⟩` with `v = (−√2 Re a₁, √2 Im a₁, a₀)`, so the only
/// critical points are the antipodal pair `±v/|v|`.
fn degree_one_census(coeffs: &HarmonicCoefficients) -> Result<CriticalCensus, CriticalError> {
    let v = [
        -std::f64::consts::SQRT_2 * coeffs.re()[1],
        std::f64::consts::SQRT_2 * coeffs.im()[1],
        coeffs.re()[0],
    ];
    let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    if norm == 0.0 {
        return Err(CriticalError::DegenerateField);
    }
    let up = spherical_from_unit_clamped([v[0] / norm, v[1] / norm, v[2] / norm]);
    let down = spherical_from_unit_clamped([-v[0] / norm, -v[1] / norm, -v[2] / norm]);
    // Near the extremum `f = |v| cos(d)`, so the covariant Hessian is
    // `∓|v| I` and its determinant `|v|²` at both points.
    let mut points = vec![
        CriticalPoint {
            position: up,
            value: norm,
            kind: CriticalKind::Maximum,
            hessian_det: norm * norm,
            gradient_residual: 0.0,
        },
        CriticalPoint {
            position: down,
            value: -norm,
            kind: CriticalKind::Minimum,
            hessian_det: norm * norm,
            gradient_residual: 0.0,
        },
    ];
    points.sort_by(|a, b| {
        a.position
            .theta()
            .total_cmp(&b.position.theta())
            .then(a.position.phi().total_cmp(&b.position.phi()))
    });
    Ok(CriticalCensus {
        ell: 1,
        points,
        n_max: 1,
        n_min: 1,
        n_saddle: 0,
        complete: true,
        diagnostics: CensusDiagnostics::default(),
    })
}

fn census_attempt(
    coeffs: &HarmonicCoefficients,
    config: &FinderConfig,
    kappa: f64,
) -> Result<CriticalCensus, CriticalError> {
    let ell = coeffs.ell;
    let lambda = eigenvalue(ell);
    let pi = std::f64::consts::PI;
    let margin = coeffs.pole_margin();
    let cap = (3.0 / ell as f64).min(pi / 8.0);
    let n_theta = (kappa * ell as f64).ceil() as usize;
    let n_phi = 2 * n_theta;
    let dtheta = pi / n_theta as f64;
    let tol = config.newton_tol_scale * lambda.sqrt();
    let radius = config.dedupe_scale * pi / (kappa * ell as f64);
    let overlap = 2.0 * radius;
    let mut diagnostics = CensusDiagnostics { refined: 1, ..CensusDiagnostics::default() };

    // Main pass over the band that excludes the polar caps. The computed
    // rows extend two cells past the ownership boundary so boundary points
    // are still seen by sign screening.
    let lo = (cap - 2.0 * dtheta).max(margin);
    let hi = (pi - cap + 2.0 * dtheta).min(pi - margin);
    let rows: Vec<f64> = (0..n_theta)
        .map(|i| (i as f64 + 0.5) * dtheta)
        .filter(|&t| t >= lo && t <= hi)
        .collect();
    let mut all = band_pass(coeffs, &rows, n_phi, (lo, hi), tol, config, &mut diagnostics)?;
    all.retain(|p| p.theta >= cap - overlap && p.theta <= pi - cap + overlap);

    // Cap pass: the same search against the quarter-turn rotated field,
    // in whose chart both caps sit on the equator. A point found at
    // `(θ′, φ′)` corresponds to the original location
    // `(cos θ′, sin θ′ sin φ′, −sin θ′ cos φ′)`.
    let rotated = rotate_coefficients(coeffs, 0.0, pi / 2.0, 0.0);
    let half_width = 1.5 * cap + 2.0 * dtheta;
    let band = (
        (pi / 2.0 - half_width).max(margin),
        (pi / 2.0 + half_width).min(pi - margin),
    );
    let mut k = 0usize;
    let mut cap_rows = Vec::new();
    while (k as f64 + 0.5) * dtheta <= half_width {
        cap_rows.push(pi / 2.0 - (k as f64 + 0.5) * dtheta);
        cap_rows.push(pi / 2.0 + (k as f64 + 0.5) * dtheta);
        k += 1;
    }
    cap_rows.sort_by(f64::total_cmp);
    cap_rows.retain(|&t| t > band.0 && t < band.1);
    let cap_points = band_pass(&rotated, &cap_rows, n_phi, band, tol, config, &mut diagnostics)?;
    for p in cap_points {
        let (st, ct) = p.theta.sin_cos();
        let (sp, cp) = p.phi.sin_cos();
        let back = spherical_from_unit_clamped([ct, st * sp, -st * cp]);
        let theta = back.theta();
        if theta < cap + overlap || theta > pi - cap - overlap {
            all.push(RawPoint { theta, phi: back.phi(), ..p });
        }
    }

    let kept = dedupe(all, radius, &mut diagnostics);

    // Classify. The degeneracy threshold is scaled by the one-point Hessian
    // variance 3P″(1) + P′(1) so it is degree independent in relative terms.
    let hess_scale = 3.0 * derivative_at_one(ell, 2) + derivative_at_one(ell, 1);
    let mut points = Vec::with_capacity(kept.len());
    let (mut n_max, mut n_min, mut n_saddle) = (0usize, 0usize, 0usize);
    for p in kept {
        let det = p.hess[0] * p.hess[2] - p.hess[1] * p.hess[1];
        if det.abs() < 1e-8 * hess_scale {
            diagnostics.degenerate += 1;
        }
        let kind = if det < 0.0 {
            n_saddle += 1;
            CriticalKind::Saddle
        } else if p.hess[0] < 0.0 {
            n_max += 1;
            CriticalKind::Maximum
        } else {
            n_min += 1;
            CriticalKind::Minimum
        };
        points.push(CriticalPoint {
            position: SphericalPoint::new(p.theta, p.phi).map_err(FieldError::from)?,
            value: p.value,
            kind,
            hessian_det: det,
            gradient_residual: p.gradient_residual,
        });
    }
    points.sort_by(|a, b| {
        a.position
            .theta()
            .total_cmp(&b.position.theta())
            .then(a.position.phi().total_cmp(&b.position.phi()))
    });

    let euler_ok = n_max + n_min == n_saddle + 2;
    Ok(CriticalCensus {
        ell,
        points,
        n_max,
        n_min,
        n_saddle,
        complete: euler_ok && diagnostics.degenerate == 0,
        diagnostics,
    })
}

/// Locate every critical point of the field.
///
/// Runs the screening grid at the configured density and, whenever the Morse
/// counts fail to balance, escalates through doubled grids at `2κ`, `4κ`,
/// and `8κ`. Escalation shrinks the duplicate-merge radius along with the
/// cell size, which is what resolves the rare tight pair: a maximum and a
/// saddle a few merge radii apart read as one point until the radius drops
/// below their separation. Fields that balance on the first pass never pay
/// for the ladder; the returned census carries `complete = false` if even
/// the finest pass is inconsistent.
pub fn find_critical_points(
    coeffs: &HarmonicCoefficients,
    config: &FinderConfig,
) -> Result<CriticalCensus, CriticalError> {
    assert!(coeffs.ell >= 1, "degree must be at least 1");
    if coeffs.ell == 1 {
        return degree_one_census(coeffs);
    }
    let mut census = census_attempt(coeffs, config, config.kappa)?;
    let mut seeds = census.diagnostics.seeds;
    let mut failures = census.diagnostics.newton_failures;
    for pass in 2..=4usize {
        if census.complete {
            break;
        }
        census = census_attempt(coeffs, config, config.kappa * (1 << (pass - 1)) as f64)?;
        seeds += census.diagnostics.seeds;
        failures += census.diagnostics.newton_failures;
        census.diagnostics.refined = pass;
    }
    census.diagnostics.seeds = seeds;
    census.diagnostics.newton_failures = failures;
    Ok(census)
}

/// Number of census points whose value lies in the interval.
pub fn filter_by_value(census: &CriticalCensus, interval: Interval) -> usize {
    census.points.iter().filter(|p| interval.contains(p.value)).count()
}

/// Area of the excursion set `{f ≥ u}` by indicator quadrature.
pub fn excursion_area(
    coeffs: &HarmonicCoefficients,
    u: f64,
    grid: &SphereGrid,
) -> Result<f64, FieldError> {
    let values = grid_evaluate(coeffs, &grid.thetas, grid.n_phi)?;
    Ok(excursion_area_from_values(&values, u, grid))
}

/// Excursion area from precomputed grid values (reusable across levels).
pub fn excursion_area_from_values(values: &[f64], u: f64, grid: &SphereGrid) -> f64 {
    let indicator: Vec<f64> = values.iter().map(|&f| if f >= u { 1.0 } else { 0.0 }).collect();
    grid.integrate(&indicator)
}

/// Euler characteristic of the excursion set `{f ≥ u}` by Morse counting:
/// maxima minus saddles plus minima among critical points at level ≥ `u`.
///
/// Requires a complete census; an incomplete one would silently miscount.
pub fn euler_characteristic_excursion(
    census: &CriticalCensus,
    u: f64,
) -> Result<i64, CriticalError> {
    if !census.complete {
        return Err(CriticalError::IncompleteCensus);
    }
    let mut chi = 0i64;
    for p in &census.points {
        if p.value >= u {
            chi += match p.kind {
                CriticalKind::Maximum | CriticalKind::Minimum => 1,
                CriticalKind::Saddle => -1,
            };
        }
    }
    Ok(chi)
}

/// Write a census as CSV with one row per point.
pub fn write_census_csv<W: Write>(census: &CriticalCensus, mut w: W) -> io::Result<()> {
    writeln!(w, "theta,phi,value,kind,hess_det,grad_residual")?;
    for p in &census.points {
        writeln!(
            w,
            "{:.16e},{:.16e},{:.16e},{},{:.16e},{:.16e}",
            p.position.theta(),
            p.position.phi(),
            p.value,
            p.kind,
            p.hessian_det,
            p.gradient_residual
        )?;
    }
    Ok(())
}
