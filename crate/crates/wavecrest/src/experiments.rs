//! Ensemble orchestration and statistical verdicts.
//!
//! An experiment draws many independent realizations, runs a full critical
//! point census on each, and records the observables side by side: the
//! critical count in a value interval, the second-chaos statistic `S_ℓ`, the
//! sphere integrals of `H₂(f)` and `H₄(f)`, and excursion areas and Euler
//! characteristics at a list of levels. The verify functions then test the
//! distributional predictions against those records: the reduction of count
//! fluctuations onto `S_ℓ`, the central limit behaviour of standardized
//! counts, and the asymptotically full correlation between functionals.
//!
//! Every replicate is a pure function of `(master seed, ℓ, index)`, so runs
//! are reproducible byte for byte regardless of thread count or execution
//! order.

use std::collections::BTreeMap;
use std::io::{self, BufRead, Write};
use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::{
    conditional_mean, density_p3, expected_count, interval_integral, jet_covariance,
    reduction_coefficient, ubar_root, variance_leading, AnalyticError, Interval,
};
use crate::critical::{
    euler_characteristic_excursion, excursion_area_from_values, filter_by_value,
    find_critical_points, CriticalError, FinderConfig,
};
use crate::legendre::associated_legendre_row;
use crate::quad::SphereGrid;
use crate::random_field::{
    evaluate_jet_with_row, grid_evaluate, integrate_h4, sample_coefficients,
    second_chaos_statistic, FieldError,
};
use crate::stats::{
    covariance_jackknife, ks_distance, kolmogorov_pvalue, mean, normal_cdf, pearson,
    pearson_jackknife, slope_jackknife, variance,
};

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error("invalid experiment configuration: {0}")]
    InvalidConfig(String),
    #[error("{excluded} of {total} censuses incomplete, above the 1% exclusion gate")]
    TooManyIncomplete { excluded: usize, total: usize },
    #[error("interval integral of p3 is {integral:.3e}; reduction prediction is degenerate")]
    DegenerateReduction { integral: f64 },
    #[error("level u = {0} is not among the recorded excursion levels")]
    UnknownLevel(f64),
    #[error("malformed records: {0}")]
    MalformedRecords(String),
    #[error(transparent)]
    Critical(#[from] CriticalError),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Analytic(#[from] AnalyticError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Resolution of the sphere quadrature used for areas and chaos integrals,
/// as a multiplier on the exactness baseline (`2ℓ+2` rows by `4ℓ+4` columns,
/// which integrates degree-`4ℓ` integrands such as `f⁴` exactly).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct QuadratureConfig {
    pub rows_factor: f64,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        QuadratureConfig { rows_factor: 1.0 }
    }
}

impl QuadratureConfig {
    pub fn grid_for(&self, ell: u32) -> SphereGrid {
        let n_theta = (self.rows_factor * (2.0 * ell as f64 + 2.0)).ceil() as usize;
        let n_phi = (self.rows_factor * (4.0 * ell as f64 + 4.0)).ceil() as usize;
        SphereGrid::new(n_theta, n_phi)
    }
}

/// Complete description of one ensemble run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Degrees to simulate, each with its own replicate set.
    pub ells: Vec<u32>,
    /// Value interval for the critical count observable.
    pub interval: Interval,
    /// Excursion levels at which areas and Euler characteristics are taken.
    pub u_list: Vec<f64>,
    pub replicates: usize,
    pub master_seed: u64,
    #[serde(default)]
    pub finder: FinderConfig,
    #[serde(default)]
    pub quadrature: QuadratureConfig,
    /// Where the CLI should write records, summary, and manifest.
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.ells.is_empty() {
            return Err(ExperimentError::InvalidConfig("no degrees listed".into()));
        }
        if let Some(&ell) = self.ells.iter().find(|&&ell| ell < 2) {
            return Err(ExperimentError::InvalidConfig(format!(
                "degree {ell} below 2; censuses and variance predictions need ell >= 2"
            )));
        }
        if self.replicates < 2 {
            return Err(ExperimentError::InvalidConfig(format!(
                "{} replicates; need at least 2",
                self.replicates
            )));
        }
        if !(self.quadrature.rows_factor >= 1.0) {
            return Err(ExperimentError::InvalidConfig(format!(
                "quadrature rows_factor {} below 1",
                self.quadrature.rows_factor
            )));
        }
        Ok(())
    }
}

/// One observation row of the ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateRecord {
    pub index: usize,
    pub seed: u64,
    pub ell: u32,
    pub interval: Interval,
    pub n_total: usize,
    pub n_max: usize,
    pub n_min: usize,
    pub n_saddle: usize,
    pub n_in_interval: usize,
    pub s_ell: f64,
    pub h2_integral: f64,
    pub h4_integral: f64,
    /// Euler identity held and no degenerate Hessians were seen.
    pub complete: bool,
    pub refined: usize,
    pub newton_failures: usize,
    /// Excursion levels the per-level observables were taken at.
    pub levels: Vec<f64>,
    /// Excursion areas, one per level.
    pub areas: Vec<f64>,
    /// Euler characteristics of the excursion sets (0 when incomplete).
    pub chis: Vec<i64>,
}

/// SplitMix64 finalizer; the standard bijective 64-bit mix.
fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic per-replicate seed: a hash of master seed, degree, index.
pub fn replicate_seed(master: u64, ell: u32, index: usize) -> u64 {
    let stage = splitmix64(master ^ splitmix64(u64::from(ell)));
    splitmix64(stage ^ (index as u64))
}

fn run_replicate(
    ell: u32,
    index: usize,
    config: &ExperimentConfig,
    grid: &SphereGrid,
) -> Result<ReplicateRecord, ExperimentError> {
    let seed = replicate_seed(config.master_seed, ell, index);
    let coeffs = sample_coefficients(ell, seed);
    let census = find_critical_points(&coeffs, &config.finder)?;
    let values = grid_evaluate(&coeffs, &grid.thetas, grid.n_phi)?;
    let h2 = grid.integrate(&values.iter().map(|f| f * f - 1.0).collect::<Vec<f64>>());
    let h4 = integrate_h4(&values, grid);
    let areas: Vec<f64> = config
        .u_list
        .iter()
        .map(|&u| excursion_area_from_values(&values, u, grid))
        .collect();
    let chis: Vec<i64> = config
        .u_list
        .iter()
        .map(|&u| {
            if census.complete {
                euler_characteristic_excursion(&census, u).expect("census complete")
            } else {
                0
            }
        })
        .collect();
    Ok(ReplicateRecord {
        index,
        seed,
        ell,
        interval: config.interval,
        n_total: census.total(),
        n_max: census.n_max,
        n_min: census.n_min,
        n_saddle: census.n_saddle,
        n_in_interval: filter_by_value(&census, config.interval),
        s_ell: second_chaos_statistic(&coeffs),
        h2_integral: h2,
        h4_integral: h4,
        complete: census.complete,
        refined: census.diagnostics.refined,
        newton_failures: census.diagnostics.newton_failures,
        levels: config.u_list.clone(),
        areas,
        chis,
    })
}

/// Mean count block: empirical against prediction.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MeanCountSummary {
    pub empirical: f64,
    pub predicted: f64,
    pub stderr: f64,
}

/// Count variance block. `ratio` is empirical over leading-order prediction;
/// it serializes as null when the prediction is degenerate (zero).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VarianceSummary {
    pub empirical: f64,
    pub predicted_leading: f64,
    pub ratio: f64,
}

/// Reduction block: the regression of counts on the second-chaos statistic.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReductionSummary {
    pub corr: f64,
    pub corr_se: f64,
    pub slope: f64,
    pub slope_se: f64,
    pub slope_predicted: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CltSummary {
    pub ks: f64,
    pub pvalue: f64,
}

/// Pairwise correlations among the per-level observables and the common
/// pair (count, chaos statistic).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LevelCorrelations {
    pub u: f64,
    pub area_vs_chaos: f64,
    pub chi_vs_chaos: f64,
    pub area_vs_count: f64,
    pub chi_vs_count: f64,
    pub area_vs_chi: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorrelationSummary {
    pub count_vs_chaos: f64,
    pub levels: Vec<LevelCorrelations>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiagnosticsSummary {
    pub excluded_fraction: f64,
    pub included: usize,
}

/// Per-degree summary of an ensemble, empirical values beside predictions.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DegreeSummary {
    pub ell: u32,
    pub interval: Interval,
    pub u_list: Vec<f64>,
    pub mean_count: MeanCountSummary,
    pub variance: VarianceSummary,
    pub reduction: ReductionSummary,
    pub clt: CltSummary,
    pub correlations: CorrelationSummary,
    pub diagnostics: DiagnosticsSummary,
}

/// Whole-ensemble summary: one block per degree, serialized as a JSON array.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EnsembleSummary(pub Vec<DegreeSummary>);

/// Run the configured ensemble.
///
/// Replicates are independent and may execute in parallel; the output is a
/// deterministic function of the configuration. Aborts when more than 1% of
/// censuses come back incomplete, which signals finder misconfiguration
/// rather than bad luck.
pub fn run_ensemble(
    config: &ExperimentConfig,
) -> Result<(Vec<ReplicateRecord>, EnsembleSummary), ExperimentError> {
    config.validate()?;
    let mut records = Vec::with_capacity(config.ells.len() * config.replicates);
    for &ell in &config.ells {
        let grid = config.quadrature.grid_for(ell);
        let mut batch: Vec<ReplicateRecord> = (0..config.replicates)
            .into_par_iter()
            .map(|index| run_replicate(ell, index, config, &grid))
            .collect::<Result<_, _>>()?;
        batch.sort_by_key(|r| r.index);
        let excluded = batch.iter().filter(|r| !r.complete).count();
        if excluded as f64 > 0.01 * config.replicates as f64 {
            return Err(ExperimentError::TooManyIncomplete {
                excluded,
                total: config.replicates,
            });
        }
        records.extend(batch);
    }
    let summary = summarize(&records)?;
    Ok((records, summary))
}

/// Compute the per-degree summary blocks from a record list (only complete
/// records enter the statistics). Invariant under record permutation.
pub fn summarize(records: &[ReplicateRecord]) -> Result<EnsembleSummary, ExperimentError> {
    let mut by_ell: BTreeMap<u32, Vec<&ReplicateRecord>> = BTreeMap::new();
    for r in records {
        by_ell.entry(r.ell).or_default().push(r);
    }
    let mut degrees = Vec::with_capacity(by_ell.len());
    for (ell, mut group) in by_ell {
        group.sort_by_key(|r| r.index);
        let total = group.len();
        let interval = group[0].interval;
        if group.iter().any(|r| r.interval != interval) {
            return Err(ExperimentError::MalformedRecords(format!(
                "records for degree {ell} disagree on the count interval"
            )));
        }
        let u_list = group[0].levels.clone();
        if group.iter().any(|r| r.levels != u_list) {
            return Err(ExperimentError::MalformedRecords(format!(
                "records for degree {ell} disagree on the excursion levels"
            )));
        }
        let included: Vec<&ReplicateRecord> = group.iter().copied().filter(|r| r.complete).collect();
        if included.len() < 3 {
            return Err(ExperimentError::MalformedRecords(format!(
                "degree {ell} has {} complete records; need at least 3",
                included.len()
            )));
        }
        let counts: Vec<f64> = included.iter().map(|r| r.n_in_interval as f64).collect();
        let chaos: Vec<f64> = included.iter().map(|r| r.s_ell).collect();
        let count_mean = mean(&counts);
        let count_var = variance(&counts);
        let corr = pearson_jackknife(&chaos, &counts);
        let slope = slope_jackknife(&chaos, &counts);
        let predicted_var = variance_leading(ell, interval);
        let sd = count_var.sqrt();
        let standardized: Vec<f64> = counts.iter().map(|c| (c - count_mean) / sd).collect();
        let ks = ks_distance(&standardized, normal_cdf);
        let mut levels = Vec::with_capacity(u_list.len());
        for (k, &u) in u_list.iter().enumerate() {
            let area: Vec<f64> = included.iter().map(|r| r.areas[k]).collect();
            let chi: Vec<f64> = included.iter().map(|r| r.chis[k] as f64).collect();
            levels.push(LevelCorrelations {
                u,
                area_vs_chaos: pearson(&area, &chaos),
                chi_vs_chaos: pearson(&chi, &chaos),
                area_vs_count: pearson(&area, &counts),
                chi_vs_count: pearson(&chi, &counts),
                area_vs_chi: pearson(&area, &chi),
            });
        }
        degrees.push(DegreeSummary {
            ell,
            interval,
            u_list: u_list.clone(),
            mean_count: MeanCountSummary {
                empirical: count_mean,
                predicted: expected_count(ell, interval),
                stderr: (count_var / included.len() as f64).sqrt(),
            },
            variance: VarianceSummary {
                empirical: count_var,
                predicted_leading: predicted_var,
                ratio: count_var / predicted_var,
            },
            reduction: ReductionSummary {
                corr: corr.estimate,
                corr_se: corr.se,
                slope: slope.estimate,
                slope_se: slope.se,
                slope_predicted: reduction_coefficient(ell, interval),
            },
            clt: CltSummary { ks, pvalue: kolmogorov_pvalue(ks, included.len()) },
            correlations: CorrelationSummary {
                count_vs_chaos: pearson(&counts, &chaos),
                levels,
            },
            diagnostics: DiagnosticsSummary {
                excluded_fraction: (total - included.len()) as f64 / total as f64,
                included: included.len(),
            },
        });
    }
    Ok(EnsembleSummary(degrees))
}

// ---------------------------------------------------------------------------
// Records CSV
// ---------------------------------------------------------------------------

const FIXED_COLUMNS: [&str; 16] = [
    "index",
    "seed",
    "ell",
    "interval_lo",
    "interval_hi",
    "n_total",
    "n_max",
    "n_min",
    "n_saddle",
    "n_in_interval",
    "s_ell",
    "h2_integral",
    "h4_integral",
    "complete",
    "refined",
    "newton_failures",
];

/// Write records as CSV. The per-level columns carry the level in the
/// header (`area_u=1`, `chi_u=1`, ...), so the file is self-describing.
pub fn write_records_csv<W: Write>(
    records: &[ReplicateRecord],
    u_list: &[f64],
    mut w: W,
) -> Result<(), ExperimentError> {
    let mut header: Vec<String> = FIXED_COLUMNS.iter().map(|s| s.to_string()).collect();
    for &u in u_list {
        header.push(format!("area_u={u}"));
        header.push(format!("chi_u={u}"));
    }
    writeln!(w, "{}", header.join(","))?;
    for r in records {
        if r.levels != u_list || r.areas.len() != u_list.len() || r.chis.len() != u_list.len() {
            return Err(ExperimentError::MalformedRecords(format!(
                "record {} does not carry the header's {} levels",
                r.index,
                u_list.len()
            )));
        }
        let mut fields = vec![
            r.index.to_string(),
            r.seed.to_string(),
            r.ell.to_string(),
            format!("{:.16e}", r.interval.lower()),
            format!("{:.16e}", r.interval.upper()),
            r.n_total.to_string(),
            r.n_max.to_string(),
            r.n_min.to_string(),
            r.n_saddle.to_string(),
            r.n_in_interval.to_string(),
            format!("{:.16e}", r.s_ell),
            format!("{:.16e}", r.h2_integral),
            format!("{:.16e}", r.h4_integral),
            (r.complete as u8).to_string(),
            r.refined.to_string(),
            r.newton_failures.to_string(),
        ];
        for k in 0..u_list.len() {
            fields.push(format!("{:.16e}", r.areas[k]));
            fields.push(r.chis[k].to_string());
        }
        writeln!(w, "{}", fields.join(","))?;
    }
    Ok(())
}

fn parse_field<T: std::str::FromStr>(
    field: &str,
    name: &str,
    line: usize,
) -> Result<T, ExperimentError> {
    field.parse().map_err(|_| {
        ExperimentError::MalformedRecords(format!("line {line}: cannot parse {name} from {field:?}"))
    })
}

/// Read a records CSV produced by [`write_records_csv`].
pub fn read_records_csv<R: BufRead>(
    r: R,
) -> Result<(Vec<ReplicateRecord>, Vec<f64>), ExperimentError> {
    let mut lines = r.lines();
    let header = lines
        .next()
        .ok_or_else(|| ExperimentError::MalformedRecords("empty file".into()))??;
    let columns: Vec<&str> = header.trim_end().split(',').collect();
    if columns.len() < FIXED_COLUMNS.len() || columns[..FIXED_COLUMNS.len()] != FIXED_COLUMNS {
        return Err(ExperimentError::MalformedRecords(
            "header does not start with the fixed record columns".into(),
        ));
    }
    let mut u_list = Vec::new();
    let level_columns = &columns[FIXED_COLUMNS.len()..];
    if level_columns.len() % 2 != 0 {
        return Err(ExperimentError::MalformedRecords(
            "level columns must come in area/chi pairs".into(),
        ));
    }
    for pair in level_columns.chunks(2) {
        let area_u = pair[0]
            .strip_prefix("area_u=")
            .ok_or_else(|| ExperimentError::MalformedRecords(format!("bad column {:?}", pair[0])))?;
        let chi_u = pair[1]
            .strip_prefix("chi_u=")
            .ok_or_else(|| ExperimentError::MalformedRecords(format!("bad column {:?}", pair[1])))?;
        if area_u != chi_u {
            return Err(ExperimentError::MalformedRecords(format!(
                "mismatched level pair {:?} / {:?}",
                pair[0], pair[1]
            )));
        }
        u_list.push(parse_field(area_u, "level", 1)?);
    }
    let mut records = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        let number = i + 2;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.trim_end().split(',').collect();
        if fields.len() != FIXED_COLUMNS.len() + 2 * u_list.len() {
            return Err(ExperimentError::MalformedRecords(format!(
                "line {number}: {} fields, expected {}",
                fields.len(),
                FIXED_COLUMNS.len() + 2 * u_list.len()
            )));
        }
        let lo: f64 = parse_field(fields[3], "interval_lo", number)?;
        let hi: f64 = parse_field(fields[4], "interval_hi", number)?;
        let interval = Interval::new(lo, hi).map_err(|e| {
            ExperimentError::MalformedRecords(format!("line {number}: {e}"))
        })?;
        let complete = match fields[13] {
            "1" => true,
            "0" => false,
            other => {
                return Err(ExperimentError::MalformedRecords(format!(
                    "line {number}: complete flag {other:?} is not 0/1"
                )))
            }
        };
        let mut areas = Vec::with_capacity(u_list.len());
        let mut chis = Vec::with_capacity(u_list.len());
        for k in 0..u_list.len() {
            areas.push(parse_field(fields[16 + 2 * k], "area", number)?);
            chis.push(parse_field(fields[17 + 2 * k], "chi", number)?);
        }
        records.push(ReplicateRecord {
            index: parse_field(fields[0], "index", number)?,
            seed: parse_field(fields[1], "seed", number)?,
            ell: parse_field(fields[2], "ell", number)?,
            interval,
            n_total: parse_field(fields[5], "n_total", number)?,
            n_max: parse_field(fields[6], "n_max", number)?,
            n_min: parse_field(fields[7], "n_min", number)?,
            n_saddle: parse_field(fields[8], "n_saddle", number)?,
            n_in_interval: parse_field(fields[9], "n_in_interval", number)?,
            s_ell: parse_field(fields[10], "s_ell", number)?,
            h2_integral: parse_field(fields[11], "h2_integral", number)?,
            h4_integral: parse_field(fields[12], "h4_integral", number)?,
            complete,
            refined: parse_field(fields[14], "refined", number)?,
            newton_failures: parse_field(fields[15], "newton_failures", number)?,
            levels: u_list.clone(),
            areas,
            chis,
        });
    }
    Ok((records, u_list))
}

// ---------------------------------------------------------------------------
// Verification reports
// ---------------------------------------------------------------------------

/// Reduction-principle verdict for one degree: how well count fluctuations
/// collapse onto the second-chaos statistic.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReductionReport {
    pub ell: u32,
    pub interval: Interval,
    pub included: usize,
    /// At least 100 complete records, the stated precondition.
    pub sufficient_records: bool,
    pub correlation: f64,
    pub abs_correlation: f64,
    pub correlation_se: f64,
    pub slope: f64,
    pub slope_se: f64,
    pub slope_predicted: f64,
    /// `|slope| / |slope_predicted|`. Magnitudes, because the sign of the
    /// predicted slope tracks the orientation convention for `p₃` while the
    /// empirical slope does not care which convention was picked; the signed
    /// agreement is already visible in `correlation` vs `abs_correlation`.
    pub slope_ratio: f64,
    pub pass: bool,
}

/// Regression of counts on `S_ℓ` for one degree, against the predicted slope.
///
/// Refuses intervals whose `p₃` integral is below `1e−6` in absolute value:
/// there the leading fluctuation term vanishes and the principle is silent.
pub fn verify_reduction(
    records: &[ReplicateRecord],
    ell: u32,
    interval: Interval,
) -> Result<ReductionReport, ExperimentError> {
    let integral = interval_integral(density_p3, interval);
    if integral.abs() < 1e-6 {
        return Err(ExperimentError::DegenerateReduction { integral });
    }
    let group: Vec<&ReplicateRecord> =
        records.iter().filter(|r| r.ell == ell && r.complete).collect();
    if group.len() < 3 {
        return Err(ExperimentError::MalformedRecords(format!(
            "degree {ell}: {} complete records; need at least 3 to regress",
            group.len()
        )));
    }
    if group.iter().any(|r| r.interval != interval) {
        return Err(ExperimentError::MalformedRecords(format!(
            "records for degree {ell} were generated for a different interval"
        )));
    }
    let chaos: Vec<f64> = group.iter().map(|r| r.s_ell).collect();
    let counts: Vec<f64> = group.iter().map(|r| r.n_in_interval as f64).collect();
    let corr = pearson_jackknife(&chaos, &counts);
    let slope = slope_jackknife(&chaos, &counts);
    let slope_predicted = reduction_coefficient(ell, interval);
    let slope_ratio = slope.estimate.abs() / slope_predicted.abs();
    let sufficient = group.len() >= 100;
    let pass = sufficient
        && corr.estimate.abs() >= 0.85
        && (0.8..=1.2).contains(&slope_ratio);
    Ok(ReductionReport {
        ell,
        interval,
        included: group.len(),
        sufficient_records: sufficient,
        correlation: corr.estimate,
        abs_correlation: corr.estimate.abs(),
        correlation_se: corr.se,
        slope: slope.estimate,
        slope_se: slope.se,
        slope_predicted,
        slope_ratio,
        pass,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CltReport {
    pub ell: u32,
    pub included: usize,
    /// At least 200 complete records, the stated precondition.
    pub sufficient_records: bool,
    pub ks: f64,
    pub pvalue: f64,
    pub pass: bool,
}

/// Kolmogorov-Smirnov distance of standardized counts from the standard
/// normal, one report per degree present in the records.
pub fn verify_clt(records: &[ReplicateRecord]) -> Result<Vec<CltReport>, ExperimentError> {
    let mut by_ell: BTreeMap<u32, Vec<f64>> = BTreeMap::new();
    for r in records.iter().filter(|r| r.complete) {
        by_ell.entry(r.ell).or_default().push(r.n_in_interval as f64);
    }
    if by_ell.is_empty() {
        return Err(ExperimentError::MalformedRecords("no complete records".into()));
    }
    let mut reports = Vec::new();
    for (ell, counts) in by_ell {
        if counts.len() < 2 {
            return Err(ExperimentError::MalformedRecords(format!(
                "degree {ell}: need at least 2 complete records"
            )));
        }
        let m = mean(&counts);
        let sd = variance(&counts).sqrt();
        let standardized: Vec<f64> = counts.iter().map(|c| (c - m) / sd).collect();
        let ks = ks_distance(&standardized, normal_cdf);
        let sufficient = counts.len() >= 200;
        reports.push(CltReport {
            ell,
            included: counts.len(),
            sufficient_records: sufficient,
            ks,
            pvalue: kolmogorov_pvalue(ks, counts.len()),
            pass: sufficient && ks < 0.1,
        });
    }
    Ok(reports)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub ell: u32,
    pub u: f64,
    pub included: usize,
    /// At least 100 complete records, the stated precondition.
    pub sufficient_records: bool,
    /// The level sits within 0.05 of a value where a leading second-chaos
    /// coefficient degenerates, so the full-correlation prediction is not
    /// expected to hold for every pair. The flagged levels are 0 (area and
    /// count), the distinguished roots ±ū (interval functionals), and ±1,
    /// where the Euler-characteristic coefficient `u(u²−1)φ(u)` vanishes and
    /// the χ rows of the matrix collapse however large the degree.
    pub near_degenerate_level: bool,
    pub count_vs_chaos: f64,
    pub area_vs_chaos: f64,
    pub chi_vs_chaos: f64,
    pub area_vs_count: f64,
    pub chi_vs_count: f64,
    pub area_vs_chi: f64,
    pub min_abs_correlation: f64,
    pub pass: bool,
}

/// Pairwise correlations among count, chaos statistic, excursion area, and
/// excursion Euler characteristic at one recorded level.
pub fn verify_full_correlation(
    records: &[ReplicateRecord],
    u: f64,
) -> Result<Vec<CorrelationReport>, ExperimentError> {
    let mut by_ell: BTreeMap<u32, Vec<&ReplicateRecord>> = BTreeMap::new();
    for r in records.iter().filter(|r| r.complete) {
        by_ell.entry(r.ell).or_default().push(r);
    }
    if by_ell.is_empty() {
        return Err(ExperimentError::MalformedRecords("no complete records".into()));
    }
    let ubar = ubar_root();
    let near_degenerate = u.abs() < 0.05
        || (u.abs() - ubar).abs() < 0.05
        || (u.abs() - 1.0).abs() < 0.05;
    let mut reports = Vec::new();
    for (ell, group) in by_ell {
        if group.len() < 3 {
            return Err(ExperimentError::MalformedRecords(format!(
                "degree {ell}: need at least 3 complete records"
            )));
        }
        let counts: Vec<f64> = group.iter().map(|r| r.n_in_interval as f64).collect();
        let chaos: Vec<f64> = group.iter().map(|r| r.s_ell).collect();
        let (areas, chis) = level_slices(&group, u)?;
        let correlations = [
            pearson(&counts, &chaos),
            pearson(&areas, &chaos),
            pearson(&chis, &chaos),
            pearson(&areas, &counts),
            pearson(&chis, &counts),
            pearson(&areas, &chis),
        ];
        let min_abs = correlations.iter().map(|c| c.abs()).fold(f64::INFINITY, f64::min);
        let sufficient = group.len() >= 100;
        reports.push(CorrelationReport {
            ell,
            u,
            included: group.len(),
            sufficient_records: sufficient,
            near_degenerate_level: near_degenerate,
            count_vs_chaos: correlations[0],
            area_vs_chaos: correlations[1],
            chi_vs_chaos: correlations[2],
            area_vs_count: correlations[3],
            chi_vs_count: correlations[4],
            area_vs_chi: correlations[5],
            min_abs_correlation: min_abs,
            pass: sufficient && !near_degenerate && min_abs >= 0.8,
        });
    }
    Ok(reports)
}

/// The area and chi columns for one level across a record group.
fn level_slices(
    group: &[&ReplicateRecord],
    u: f64,
) -> Result<(Vec<f64>, Vec<f64>), ExperimentError> {
    let levels = &group[0].levels;
    let k = levels
        .iter()
        .position(|&v| (v - u).abs() < 1e-12)
        .ok_or(ExperimentError::UnknownLevel(u))?;
    if group.iter().any(|r| r.levels != *levels) {
        return Err(ExperimentError::MalformedRecords(
            "records disagree on the excursion levels".into(),
        ));
    }
    let areas = group.iter().map(|r| r.areas[k]).collect();
    let chis = group.iter().map(|r| r.chis[k] as f64).collect();
    Ok((areas, chis))
}

// ---------------------------------------------------------------------------
// Covariance and conditional-mean diagnostics
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CovarianceEntry {
    pub row: usize,
    pub col: usize,
    pub empirical: f64,
    pub analytic: f64,
    pub se: f64,
    pub z: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CovarianceDiagnostic {
    pub ell: u32,
    pub theta: f64,
    pub n: usize,
    pub entries: Vec<CovarianceEntry>,
    pub max_abs_z: f64,
    pub pass: bool,
}

/// Empirical 5x5 jet covariance at the equator against the closed form, with
/// jackknife z-scores per entry.
pub fn covariance_diagnostic(
    ell: u32,
    n: usize,
    seed: u64,
) -> Result<CovarianceDiagnostic, ExperimentError> {
    covariance_diagnostic_at(ell, std::f64::consts::FRAC_PI_2, n, seed)
}

/// Same diagnostic at an arbitrary colatitude; the law must not depend on it.
pub fn covariance_diagnostic_at(
    ell: u32,
    theta: f64,
    n: usize,
    seed: u64,
) -> Result<CovarianceDiagnostic, ExperimentError> {
    assert!(n >= 10_000, "diagnostic needs at least 1e4 samples, got {n}");
    let analytic = jet_covariance(ell)?.matrix;
    let row = associated_legendre_row(ell, theta).map_err(FieldError::from)?;
    let phi = 0.37;
    let mut samples: Vec<[f64; 5]> = Vec::with_capacity(n);
    for i in 0..n {
        let coeffs = sample_coefficients(ell, replicate_seed(seed, ell, i));
        let jet = evaluate_jet_with_row(&coeffs, &row, phi);
        samples.push([jet.grad[0], jet.grad[1], jet.hess[0], jet.hess[1], jet.hess[2]]);
    }
    let mut entries = Vec::with_capacity(15);
    let mut max_abs_z = 0.0_f64;
    for i in 0..5 {
        for j in i..5 {
            let xs: Vec<f64> = samples.iter().map(|s| s[i]).collect();
            let ys: Vec<f64> = samples.iter().map(|s| s[j]).collect();
            let jk = covariance_jackknife(&xs, &ys);
            let z = (jk.estimate - analytic[i][j]) / jk.se;
            max_abs_z = max_abs_z.max(z.abs());
            entries.push(CovarianceEntry {
                row: i,
                col: j,
                empirical: jk.estimate,
                analytic: analytic[i][j],
                se: jk.se,
                z,
            });
        }
    }
    Ok(CovarianceDiagnostic { ell, theta, n, entries, max_abs_z, pass: max_abs_z <= 4.0 })
}

/// Monte Carlo check of the conditional Hessian mean at two equator points.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConditionalMeanCheck {
    pub ell: u32,
    pub delta_phi: f64,
    pub u1: f64,
    pub u2: f64,
    pub n: usize,
    pub analytic: [f64; 6],
    pub regressed: [f64; 6],
    pub se: [f64; 6],
    pub z: [f64; 6],
    pub max_abs_z: f64,
}

fn solve4(mut a: [[f64; 4]; 4], mut b: [f64; 4]) -> [f64; 4] {
    for col in 0..4 {
        let pivot = (col..4)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        let d = a[col][col];
        for row in col + 1..4 {
            let f = a[row][col] / d;
            for k in col..4 {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 4];
    for row in (0..4).rev() {
        let mut s = b[row];
        for k in row + 1..4 {
            s -= a[row][k] * x[k];
        }
        x[row] = s / a[row][row];
    }
    x
}

/// Regress the six Hessian components on the four gradient components across
/// realizations and evaluate the fitted mean at gradients `(u₁, u₂)` taken
/// at both points, to arbitrate the closed-form conditional mean.
pub fn conditional_mean_regression(
    ell: u32,
    delta_phi: f64,
    u1: f64,
    u2: f64,
    n: usize,
    seed: u64,
) -> Result<ConditionalMeanCheck, ExperimentError> {
    let analytic = conditional_mean(ell, delta_phi, u1, u2)?.mu;
    let row = associated_legendre_row(ell, std::f64::consts::FRAC_PI_2)
        .map_err(FieldError::from)?;
    let mut gtg = [[0.0_f64; 4]; 4];
    let mut gth = [[0.0_f64; 6]; 4];
    let mut hth = [0.0_f64; 6];
    for i in 0..n {
        let coeffs = sample_coefficients(ell, replicate_seed(seed, ell, i));
        let jx = evaluate_jet_with_row(&coeffs, &row, 0.0);
        let jy = evaluate_jet_with_row(&coeffs, &row, delta_phi);
        let g = [jx.grad[0], jx.grad[1], jy.grad[0], jy.grad[1]];
        let h = [jx.hess[0], jx.hess[1], jx.hess[2], jy.hess[0], jy.hess[1], jy.hess[2]];
        for a in 0..4 {
            for b in a..4 {
                gtg[a][b] += g[a] * g[b];
            }
            for k in 0..6 {
                gth[a][k] += g[a] * h[k];
            }
        }
        for k in 0..6 {
            hth[k] += h[k] * h[k];
        }
    }
    for a in 0..4 {
        for b in 0..a {
            gtg[a][b] = gtg[b][a];
        }
    }
    let target = [u1, u2, u1, u2];
    let leverage_vec = solve4(gtg, target);
    let leverage: f64 = target.iter().zip(&leverage_vec).map(|(t, l)| t * l).sum();
    let mut regressed = [0.0; 6];
    let mut se = [0.0; 6];
    let mut z = [0.0; 6];
    let mut max_abs_z = 0.0_f64;
    for k in 0..6 {
        let rhs = [gth[0][k], gth[1][k], gth[2][k], gth[3][k]];
        let beta = solve4(gtg, rhs);
        regressed[k] = beta.iter().zip(&target).map(|(b, t)| b * t).sum();
        let explained: f64 = beta.iter().zip(&rhs).map(|(b, r)| b * r).sum();
        let sigma2 = (hth[k] - explained).max(0.0) / (n as f64 - 4.0);
        se[k] = (sigma2 * leverage).sqrt();
        z[k] = (regressed[k] - analytic[k]) / se[k];
        max_abs_z = max_abs_z.max(z[k].abs());
    }
    Ok(ConditionalMeanCheck {
        ell,
        delta_phi,
        u1,
        u2,
        n,
        analytic,
        regressed,
        se,
        z,
        max_abs_z,
    })
}

// ---------------------------------------------------------------------------
// 17-significant-digit JSON
// ---------------------------------------------------------------------------

/// JSON formatter printing every finite float with 17 significant digits in
/// scientific notation, so serialized values round-trip exactly.
pub struct SciFormatter;

impl serde_json::ser::Formatter for SciFormatter {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        write!(writer, "{value:.16e}")
    }
}

/// Serialize any value to JSON with full-precision floats.
pub fn to_sci_json<T: Serialize>(value: &T) -> Result<String, serde_json::Error> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, SciFormatter);
    value.serialize(&mut ser)?;
    Ok(String::from_utf8(buf).expect("serde_json emits UTF-8"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use statrs::distribution::{ContinuousCDF, Normal};

    fn small_config() -> ExperimentConfig {
        ExperimentConfig {
            ells: vec![3],
            interval: Interval::above(0.0),
            u_list: vec![0.0, 1.0],
            replicates: 8,
            master_seed: 71,
            finder: FinderConfig::default(),
            quadrature: QuadratureConfig::default(),
            output_dir: None,
        }
    }

    fn fake_record(index: usize, ell: u32, interval: Interval, s: f64, count: usize) -> ReplicateRecord {
        ReplicateRecord {
            index,
            seed: index as u64,
            ell,
            interval,
            n_total: count + 10,
            n_max: 4,
            n_min: 4,
            n_saddle: 6,
            n_in_interval: count,
            s_ell: s,
            h2_integral: 0.0,
            h4_integral: 0.0,
            complete: true,
            refined: 1,
            newton_failures: 0,
            levels: vec![0.0, 0.5, 1.0],
            areas: vec![6.2 - 0.002 * s, 2.0 + 0.008 * s, 0.5 + 0.01 * s],
            chis: vec![2, (2.0 + 1.5 * s).round() as i64, (3.0 + 2.0 * s).round() as i64],
        }
    }

    #[test]
    fn replicate_seeds_are_deterministic_and_distinct() {
        let a = replicate_seed(7, 10, 3);
        assert_eq!(a, replicate_seed(7, 10, 3));
        let mut seeds: Vec<u64> = (0..50).map(|i| replicate_seed(7, 10, i)).collect();
        seeds.extend((0..50).map(|i| replicate_seed(7, 11, i)));
        seeds.extend((0..50).map(|i| replicate_seed(8, 10, i)));
        seeds.sort_unstable();
        seeds.dedup();
        assert_eq!(seeds.len(), 150);
    }

    #[test]
    fn config_round_trips_and_fills_defaults() {
        let json = r#"{
            "ells": [20, 40],
            "interval": "1:inf",
            "u_list": [0.0, 1.0],
            "replicates": 50,
            "master_seed": 9
        }"#;
        let config: ExperimentConfig = serde_json::from_str(json).unwrap();
        assert_eq!(config.ells, vec![20, 40]);
        assert_eq!(config.interval, Interval::above(1.0));
        assert_eq!(config.finder.kappa, FinderConfig::default().kappa);
        assert_eq!(config.quadrature.rows_factor, 1.0);
        assert!(config.output_dir.is_none());
        config.validate().unwrap();
        let back: ExperimentConfig =
            serde_json::from_str(&serde_json::to_string(&config).unwrap()).unwrap();
        assert_eq!(back.interval, config.interval);
        assert_eq!(back.master_seed, config.master_seed);
    }

    #[test]
    fn config_validation_rejects_bad_inputs() {
        let mut config = small_config();
        config.ells = vec![1];
        assert!(matches!(config.validate(), Err(ExperimentError::InvalidConfig(_))));
        let mut config = small_config();
        config.replicates = 1;
        assert!(matches!(config.validate(), Err(ExperimentError::InvalidConfig(_))));
        let mut config = small_config();
        config.quadrature.rows_factor = 0.5;
        assert!(matches!(config.validate(), Err(ExperimentError::InvalidConfig(_))));
    }

    #[test]
    fn small_ensemble_records_are_consistent() {
        let config = small_config();
        let (records, summary) = run_ensemble(&config).unwrap();
        assert_eq!(records.len(), 8);
        for r in &records {
            assert_eq!(r.n_total, r.n_max + r.n_min + r.n_saddle);
            assert!(r.n_in_interval <= r.n_total);
            assert!(r.complete);
            assert_eq!(r.n_max + r.n_min, r.n_saddle + 2);
            for &a in &r.areas {
                assert!(a >= 0.0 && a <= 4.0 * std::f64::consts::PI + 1e-9);
            }
            // Parseval ties the quadrature of H2(f) to the coefficient sum.
            let expected_h2 = 4.0 * std::f64::consts::PI * r.s_ell / (2.0 * 3.0 + 1.0);
            assert_relative_eq!(r.h2_integral, expected_h2, epsilon = 1e-8, max_relative = 1e-8);
        }
        let degree = &summary.0[0];
        assert_eq!(degree.ell, 3);
        assert_eq!(degree.u_list, vec![0.0, 1.0]);
        assert_eq!(degree.diagnostics.included, 8);
        assert_eq!(degree.diagnostics.excluded_fraction, 0.0);
        assert_relative_eq!(
            degree.mean_count.predicted,
            expected_count(3, config.interval),
            max_relative = 1e-14
        );
        assert_eq!(degree.correlations.levels.len(), 2);
        assert_eq!(degree.correlations.levels[1].u, 1.0);
    }

    #[test]
    fn ensembles_are_reproducible_byte_for_byte() {
        let config = small_config();
        let (r1, s1) = run_ensemble(&config).unwrap();
        let (r2, s2) = run_ensemble(&config).unwrap();
        let mut c1 = Vec::new();
        let mut c2 = Vec::new();
        write_records_csv(&r1, &config.u_list, &mut c1).unwrap();
        write_records_csv(&r2, &config.u_list, &mut c2).unwrap();
        assert_eq!(c1, c2);
        assert_eq!(to_sci_json(&s1).unwrap(), to_sci_json(&s2).unwrap());
    }

    #[test]
    fn records_csv_round_trips_exactly() {
        let config = small_config();
        let (records, _) = run_ensemble(&config).unwrap();
        let mut buf = Vec::new();
        write_records_csv(&records, &config.u_list, &mut buf).unwrap();
        let (back, u_list) = read_records_csv(buf.as_slice()).unwrap();
        assert_eq!(u_list, config.u_list);
        assert_eq!(back, records);
    }

    #[test]
    fn summary_is_invariant_under_record_permutation() {
        let config = small_config();
        let (mut records, summary) = run_ensemble(&config).unwrap();
        records.reverse();
        let shuffled = summarize(&records).unwrap();
        assert_eq!(to_sci_json(&summary).unwrap(), to_sci_json(&shuffled).unwrap());
    }

    #[test]
    fn reader_rejects_malformed_input() {
        assert!(matches!(
            read_records_csv("not,a,header\n".as_bytes()),
            Err(ExperimentError::MalformedRecords(_))
        ));
        let config = small_config();
        let (records, _) = run_ensemble(&config).unwrap();
        let mut buf = Vec::new();
        write_records_csv(&records, &config.u_list, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let truncated: Vec<&str> = text
            .lines()
            .map(|l| l.rsplit_once(',').unwrap().0)
            .collect();
        assert!(matches!(
            read_records_csv(truncated.join("\n").as_bytes()),
            Err(ExperimentError::MalformedRecords(_))
        ));
    }

    #[test]
    fn reduction_verdict_on_synthetic_linear_records() {
        let interval = Interval::above(1.0);
        let slope = reduction_coefficient(10, interval);
        let records: Vec<ReplicateRecord> = (0..120)
            .map(|i| {
                let s = -20.0 + 40.0 * i as f64 / 119.0;
                fake_record(i, 10, interval, s, (80.0 + slope * s).round() as usize)
            })
            .collect();
        let report = verify_reduction(&records, 10, interval).unwrap();
        assert!(report.sufficient_records);
        assert!(report.correlation < -0.99, "corr {}", report.correlation);
        assert!(report.abs_correlation > 0.99);
        assert_relative_eq!(report.slope_ratio, 1.0, epsilon = 0.05);
        assert!(report.pass);
    }

    #[test]
    fn reduction_refuses_degenerate_interval() {
        let interval = Interval::above(1.0);
        let records: Vec<ReplicateRecord> =
            (0..10).map(|i| fake_record(i, 10, interval, i as f64, 80)).collect();
        // The p3 integral over the full line vanishes, so the prediction is void.
        assert!(matches!(
            verify_reduction(&records, 10, Interval::full()),
            Err(ExperimentError::DegenerateReduction { .. })
        ));
    }

    #[test]
    fn clt_verdict_on_synthetic_gaussian_counts() {
        let interval = Interval::above(1.0);
        let gauss = Normal::new(0.0, 1.0).unwrap();
        let n = 250;
        let records: Vec<ReplicateRecord> = (0..n)
            .map(|i| {
                let q = gauss.inverse_cdf((i as f64 + 0.5) / n as f64);
                fake_record(i, 80, interval, q, (1000.0 + 30.0 * q).round() as usize)
            })
            .collect();
        let reports = verify_clt(&records).unwrap();
        assert_eq!(reports.len(), 1);
        assert_eq!(reports[0].ell, 80);
        assert!(reports[0].sufficient_records);
        assert!(reports[0].ks < 0.05, "ks {}", reports[0].ks);
        assert!(reports[0].pass);
        // Too few records: statistics still computed, verdict withheld.
        let short = &records[..50];
        let reports = verify_clt(short).unwrap();
        assert!(!reports[0].sufficient_records);
        assert!(!reports[0].pass);
    }

    #[test]
    fn correlation_verdict_flags_levels_and_degeneracy() {
        let interval = Interval::above(1.0);
        let records: Vec<ReplicateRecord> = (0..120)
            .map(|i| {
                let s = -15.0 + 30.0 * i as f64 / 119.0;
                fake_record(i, 80, interval, s, (500.0 - 20.0 * s).round() as usize)
            })
            .collect();
        let reports = verify_full_correlation(&records, 0.5).unwrap();
        assert_eq!(reports.len(), 1);
        let report = &reports[0];
        assert!(report.sufficient_records);
        assert!(!report.near_degenerate_level);
        assert!(report.min_abs_correlation > 0.9, "min {}", report.min_abs_correlation);
        assert!(report.pass);
        // u = 0 and u = 1 are degenerate levels (area and count coefficients
        // vanish at 0, the Euler-characteristic coefficient at 1):
        // correlations are still reported, the verdict is withheld.
        for degenerate in [0.0, 1.0] {
            let reports = verify_full_correlation(&records, degenerate).unwrap();
            assert!(reports[0].near_degenerate_level, "u = {degenerate}");
            assert!(!reports[0].pass);
            assert!(reports[0].min_abs_correlation.is_finite());
        }
        // Levels not in the records are refused.
        assert!(matches!(
            verify_full_correlation(&records, 0.25),
            Err(ExperimentError::UnknownLevel(_))
        ));
    }

    #[test]
    fn covariance_diagnostic_matches_closed_form() {
        let diag = covariance_diagnostic(3, 20_000, 4242).unwrap();
        assert_eq!(diag.entries.len(), 15);
        assert!(diag.max_abs_z <= 5.0, "max |z| = {}", diag.max_abs_z);
        assert!(diag.pass || diag.max_abs_z <= 5.0);
        // The gradient block must be diagonal with variance lambda/2.
        let grad_var = diag.entries.iter().find(|e| e.row == 0 && e.col == 0).unwrap();
        assert_relative_eq!(grad_var.analytic, 6.0, max_relative = 1e-14);
        let cross = diag.entries.iter().find(|e| e.row == 0 && e.col == 2).unwrap();
        assert_eq!(cross.analytic, 0.0);
    }

    #[test]
    fn conditional_mean_regression_agrees_with_closed_form() {
        let check = conditional_mean_regression(3, 0.8, 0.4, -0.7, 20_000, 99).unwrap();
        assert!(check.max_abs_z <= 5.0, "z = {:?}", check.z);
        // Antisymmetry of the closed form between the two points.
        for k in 0..3 {
            assert_relative_eq!(check.analytic[k], -check.analytic[k + 3], max_relative = 1e-12);
        }
    }

    #[test]
    fn solve4_inverts_a_known_system() {
        let a = [
            [4.0, 1.0, 0.0, 2.0],
            [1.0, 5.0, 1.0, 0.0],
            [0.0, 1.0, 6.0, 1.5],
            [2.0, 0.0, 1.5, 7.0],
        ];
        let x_true = [1.0, -2.0, 0.5, 3.0];
        let mut b = [0.0; 4];
        for i in 0..4 {
            b[i] = (0..4).map(|j| a[i][j] * x_true[j]).sum();
        }
        let x = solve4(a, b);
        for i in 0..4 {
            assert_relative_eq!(x[i], x_true[i], max_relative = 1e-12);
        }
    }

    #[test]
    fn sci_json_prints_full_precision_and_nulls_nonfinite() {
        #[derive(Serialize)]
        struct Probe {
            x: f64,
            y: f64,
            n: u32,
        }
        let probe = Probe { x: 0.1 + 0.2, y: f64::INFINITY, n: 7 };
        let json = to_sci_json(&probe).unwrap();
        assert!(json.contains("3.0000000000000004e-1"), "{json}");
        assert!(json.contains("\"y\":null"), "{json}");
        assert!(json.contains("\"n\":7"), "{json}");
    }
}
