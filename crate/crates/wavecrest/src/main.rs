//! Command-line front end: sampling, censuses, densities, predictions,
//! ensembles, and verification verdicts.
//!
//! Conventions shared by every subcommand:
//!
//! * intervals are written `lo:hi` with `-inf`/`inf` for unbounded ends;
//! * floating-point output carries 17 significant digits, so files
//!   round-trip exactly;
//! * file-producing runs write a `*.manifest.json` (command, arguments,
//!   package version) beside their outputs;
//! * the only environment variable honored is `WAVECREST_OUT`, which
//!   redirects relative output paths into a chosen directory;
//! * the exit code is 0 only when the run's self-checks pass.

use std::error::Error;
use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use wavecrest::analytic::{
    density_mu, density_p0, density_p2, density_p3, density_pi_c, expected_count,
    interval_integral, reduction_coefficient, variance_leading, variance_log_leading, Interval,
};
use wavecrest::critical::{find_critical_points, write_census_csv, FinderConfig};
use wavecrest::experiments::{
    covariance_diagnostic_at, read_records_csv, run_ensemble, to_sci_json, verify_clt,
    verify_full_correlation, verify_reduction, write_records_csv, ExperimentConfig,
    ReductionReport, ReplicateRecord,
};
use wavecrest::random_field::sample_coefficients;

#[derive(Parser)]
#[command(
    name = "wavecrest",
    version,
    about = "Critical points of random spherical harmonics: simulation and verification"
)]
struct Cli {
    /// Cap the worker thread count (default: one per core).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw one set of harmonic coefficients and write them as JSON.
    Sample {
        #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
        ell: u32,
        #[arg(long)]
        seed: u64,
        /// Output file (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Locate every critical point of one realization and write a CSV.
    ///
    /// The Euler characteristic and completeness flag go to stderr; the run
    /// fails unless the census is complete.
    Census {
        /// Coefficient JSON produced by `sample` (alternative to --ell/--seed).
        #[arg(long, conflicts_with_all = ["ell", "seed"])]
        coeffs: Option<PathBuf>,
        #[arg(long, value_parser = clap::value_parser!(u32).range(1..), required_unless_present = "coeffs")]
        ell: Option<u32>,
        #[arg(long, required_unless_present = "coeffs")]
        seed: Option<u64>,
        /// Screening rows per degree; higher is a finer search grid.
        #[arg(long, default_value_t = FinderConfig::default().kappa)]
        kappa: f64,
        /// Output file (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Tabulate the critical value densities on a uniform grid.
    Densities {
        /// Grid as lo:hi:points.
        #[arg(long, default_value = "-5:5:501", allow_hyphen_values = true)]
        grid: String,
        /// Output file (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Closed-form predictions for one degree and value interval.
    Predict {
        #[arg(long, value_parser = clap::value_parser!(u32).range(2..))]
        ell: u32,
        /// Value interval, e.g. "1:inf" or "-inf:inf".
        #[arg(long, value_parser = clap::value_parser!(Interval), allow_hyphen_values = true, default_value_t = Interval::full())]
        interval: Interval,
        /// Output file (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a replicated ensemble from a JSON configuration file.
    ///
    /// Writes records.csv, summary.json, and manifest.json into the output
    /// directory (config `output_dir`, overridden by WAVECREST_OUT).
    Ensemble {
        #[arg(long)]
        config: PathBuf,
    },
    /// Statistical verdicts on recorded ensembles.
    Verify {
        /// Records CSV from an `ensemble` run (not needed for covariance).
        #[arg(long)]
        records: Option<PathBuf>,
        #[arg(long, value_enum)]
        which: Check,
        /// Restrict reduction checks to one degree, or pick the degree for
        /// the covariance diagnostic.
        #[arg(long)]
        ell: Option<u32>,
        /// Excursion level for the correlation check.
        #[arg(long, allow_hyphen_values = true)]
        u: Option<f64>,
        /// Colatitude for the covariance diagnostic.
        #[arg(long, default_value_t = std::f64::consts::FRAC_PI_2)]
        theta: f64,
        /// Monte Carlo sample count for the covariance diagnostic.
        #[arg(long, default_value_t = 20_000)]
        samples: usize,
        /// Seed for the covariance diagnostic.
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Output file (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Check {
    Reduction,
    Clt,
    Correlation,
    Covariance,
}

fn main() -> std::process::ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            eprintln!("error: cannot configure {threads} threads: {e}");
            return std::process::ExitCode::from(1);
        }
    }
    match run(cli.command) {
        Ok(true) => std::process::ExitCode::SUCCESS,
        Ok(false) => std::process::ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            std::process::ExitCode::from(1)
        }
    }
}

/// Prefix relative output paths with `WAVECREST_OUT` when it is set.
fn resolve_out(path: PathBuf) -> PathBuf {
    match std::env::var_os("WAVECREST_OUT") {
        Some(dir) if path.is_relative() => PathBuf::from(dir).join(path),
        _ => path,
    }
}

/// Write `content` to the resolved output file, or to stdout when no file is
/// requested. Returns the resolved path when a file was written.
fn emit(out: Option<PathBuf>, content: &str) -> io::Result<Option<PathBuf>> {
    match out {
        Some(path) => {
            let path = resolve_out(path);
            if let Some(parent) = path.parent() {
                if !parent.as_os_str().is_empty() {
                    fs::create_dir_all(parent)?;
                }
            }
            fs::write(&path, content)?;
            Ok(Some(path))
        }
        None => {
            io::stdout().write_all(content.as_bytes())?;
            Ok(None)
        }
    }
}

/// Place a manifest beside a written output file.
fn write_manifest(output: &Option<PathBuf>, manifest: serde_json::Value) -> io::Result<()> {
    if let Some(path) = output {
        let mut manifest_path = path.clone();
        manifest_path.set_extension("manifest.json");
        fs::write(&manifest_path, to_sci_json(&manifest).expect("manifest serializes") + "\n")?;
    }
    Ok(())
}

fn manifest_base(command: &str) -> serde_json::Value {
    json!({
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
    })
}

fn run(command: Command) -> Result<bool, Box<dyn Error>> {
    match command {
        Command::Sample { ell, seed, out } => cmd_sample(ell, seed, out),
        Command::Census { coeffs, ell, seed, kappa, out } => {
            cmd_census(coeffs, ell, seed, kappa, out)
        }
        Command::Densities { grid, out } => cmd_densities(&grid, out),
        Command::Predict { ell, interval, out } => cmd_predict(ell, interval, out),
        Command::Ensemble { config } => cmd_ensemble(&config),
        Command::Verify { records, which, ell, u, theta, samples, seed, out } => {
            cmd_verify(records, which, ell, u, theta, samples, seed, out)
        }
    }
}

fn cmd_sample(ell: u32, seed: u64, out: Option<PathBuf>) -> Result<bool, Box<dyn Error>> {
    let coeffs = sample_coefficients(ell, seed);
    let written = emit(out, &(to_sci_json(&coeffs)? + "\n"))?;
    let mut manifest = manifest_base("sample");
    manifest["ell"] = json!(ell);
    manifest["seed"] = json!(seed);
    write_manifest(&written, manifest)?;
    Ok(true)
}

fn cmd_census(
    coeffs: Option<PathBuf>,
    ell: Option<u32>,
    seed: Option<u64>,
    kappa: f64,
    out: Option<PathBuf>,
) -> Result<bool, Box<dyn Error>> {
    let coeffs = match coeffs {
        Some(path) => serde_json::from_reader(BufReader::new(File::open(path)?))?,
        None => sample_coefficients(ell.expect("required by clap"), seed.expect("required by clap")),
    };
    let config = FinderConfig { kappa, ..FinderConfig::default() };
    let census = find_critical_points(&coeffs, &config)?;
    let mut csv = Vec::new();
    write_census_csv(&census, &mut csv)?;
    let written = emit(out, std::str::from_utf8(&csv).expect("census CSV is UTF-8"))?;
    eprintln!(
        "degree {}: {} maxima, {} minima, {} saddles; euler characteristic {}; complete: {}",
        census.ell,
        census.n_max,
        census.n_min,
        census.n_saddle,
        census.euler_characteristic(),
        census.complete,
    );
    let mut manifest = manifest_base("census");
    manifest["ell"] = json!(census.ell);
    manifest["seed"] = json!(coeffs.seed);
    manifest["kappa"] = json!(kappa);
    write_manifest(&written, manifest)?;
    Ok(census.complete)
}

fn parse_grid(spec: &str) -> Result<Vec<f64>, String> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        return Err(format!("grid {spec:?} is not lo:hi:points"));
    }
    let lo: f64 = parts[0].parse().map_err(|_| format!("bad grid bound {:?}", parts[0]))?;
    let hi: f64 = parts[1].parse().map_err(|_| format!("bad grid bound {:?}", parts[1]))?;
    let n: usize = parts[2].parse().map_err(|_| format!("bad grid count {:?}", parts[2]))?;
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(format!("grid bounds {lo}:{hi} must be finite and increasing"));
    }
    if n < 2 {
        return Err("grid needs at least 2 points".into());
    }
    let step = (hi - lo) / (n - 1) as f64;
    Ok((0..n).map(|i| lo + step * i as f64).collect())
}

fn cmd_densities(grid: &str, out: Option<PathBuf>) -> Result<bool, Box<dyn Error>> {
    let ts = parse_grid(grid)?;
    let mut csv = String::from("t,pi_c,p0_c,p2_c,p3_c,mu_c\n");
    for &t in &ts {
        csv.push_str(&format!(
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}\n",
            t,
            density_pi_c(t),
            density_p0(t),
            density_p2(t),
            density_p3(t),
            density_mu(t),
        ));
    }
    let written = emit(out, &csv)?;
    let total = interval_integral(density_pi_c, Interval::full());
    let pass = (total - 1.0).abs() <= 1e-10;
    eprintln!(
        "self-check: pi_c integrates to {:.16e} over the line ({})",
        total,
        if pass { "pass" } else { "FAIL" }
    );
    let mut manifest = manifest_base("densities");
    manifest["grid"] = json!(grid);
    write_manifest(&written, manifest)?;
    Ok(pass)
}

#[derive(Serialize)]
struct Prediction {
    ell: u32,
    interval: Interval,
    expected_count: f64,
    variance_leading: f64,
    variance_log_leading: f64,
    reduction_coefficient: f64,
}

fn cmd_predict(ell: u32, interval: Interval, out: Option<PathBuf>) -> Result<bool, Box<dyn Error>> {
    let prediction = Prediction {
        ell,
        interval,
        expected_count: expected_count(ell, interval),
        variance_leading: variance_leading(ell, interval),
        variance_log_leading: variance_log_leading(ell, interval),
        reduction_coefficient: reduction_coefficient(ell, interval),
    };
    let written = emit(out, &(to_sci_json(&prediction)? + "\n"))?;
    let mut manifest = manifest_base("predict");
    manifest["ell"] = json!(ell);
    manifest["interval"] = json!(interval.to_string());
    write_manifest(&written, manifest)?;
    Ok(prediction.expected_count.is_finite() && prediction.variance_leading >= 0.0)
}

fn cmd_ensemble(config_path: &PathBuf) -> Result<bool, Box<dyn Error>> {
    let config: ExperimentConfig =
        serde_json::from_reader(BufReader::new(File::open(config_path)?))?;
    let out_dir = match std::env::var_os("WAVECREST_OUT") {
        Some(dir) => PathBuf::from(dir),
        None => config.output_dir.clone().unwrap_or_else(|| PathBuf::from(".")),
    };
    fs::create_dir_all(&out_dir)?;
    let (records, summary) = run_ensemble(&config)?;
    let records_path = out_dir.join("records.csv");
    let mut writer = BufWriter::new(File::create(&records_path)?);
    write_records_csv(&records, &config.u_list, &mut writer)?;
    writer.flush()?;
    let summary_path = out_dir.join("summary.json");
    fs::write(&summary_path, to_sci_json(&summary)? + "\n")?;
    let mut manifest = manifest_base("ensemble");
    manifest["master_seed"] = json!(config.master_seed);
    manifest["config"] = serde_json::to_value(&config)?;
    manifest["records"] = json!(records_path.to_string_lossy());
    manifest["summary"] = json!(summary_path.to_string_lossy());
    fs::write(out_dir.join("manifest.json"), to_sci_json(&manifest)? + "\n")?;
    for degree in &summary.0 {
        eprintln!(
            "degree {}: mean count {:.3} (predicted {:.3}), corr(count, S) = {:.3}, {} of {} replicates included",
            degree.ell,
            degree.mean_count.empirical,
            degree.mean_count.predicted,
            degree.reduction.corr,
            degree.diagnostics.included,
            records.iter().filter(|r| r.ell == degree.ell).count(),
        );
    }
    Ok(true)
}

#[allow(clippy::too_many_arguments)]
fn cmd_verify(
    records_path: Option<PathBuf>,
    which: Check,
    ell: Option<u32>,
    u: Option<f64>,
    theta: f64,
    samples: usize,
    seed: u64,
    out: Option<PathBuf>,
) -> Result<bool, Box<dyn Error>> {
    let records: Vec<ReplicateRecord> = match (&records_path, which) {
        (None, Check::Covariance) => Vec::new(),
        (None, _) => return Err("--records is required for this check".into()),
        (Some(path), _) => read_records_csv(BufReader::new(File::open(path)?))?.0,
    };
    let (report_json, pass) = match which {
        Check::Reduction => {
            let ells: Vec<u32> = match ell {
                Some(e) => vec![e],
                None => {
                    let mut es: Vec<u32> = records.iter().map(|r| r.ell).collect();
                    es.sort_unstable();
                    es.dedup();
                    es
                }
            };
            let mut reports: Vec<ReductionReport> = Vec::new();
            for e in ells {
                let interval = records
                    .iter()
                    .find(|r| r.ell == e)
                    .map(|r| r.interval)
                    .ok_or_else(|| format!("no records for degree {e}"))?;
                reports.push(verify_reduction(&records, e, interval)?);
            }
            let pass = reports.iter().all(|r| r.pass);
            (to_sci_json(&reports)?, pass)
        }
        Check::Clt => {
            let reports = verify_clt(&records)?;
            let pass = reports.iter().all(|r| r.pass);
            (to_sci_json(&reports)?, pass)
        }
        Check::Correlation => {
            let u = u.ok_or("--u is required for the correlation check")?;
            let reports = verify_full_correlation(&records, u)?;
            let pass = reports.iter().all(|r| r.pass);
            (to_sci_json(&reports)?, pass)
        }
        Check::Covariance => {
            let ell = ell.ok_or("--ell is required for the covariance check")?;
            let diagnostic = covariance_diagnostic_at(ell, theta, samples, seed)?;
            let pass = diagnostic.pass;
            (to_sci_json(&diagnostic)?, pass)
        }
    };
    let written = emit(out, &(report_json + "\n"))?;
    let mut manifest = manifest_base("verify");
    manifest["records"] = json!(records_path.map(|p| p.to_string_lossy().into_owned()));
    manifest["pass"] = json!(pass);
    write_manifest(&written, manifest)?;
    eprintln!("verdict: {}", if pass { "pass" } else { "FAIL" });
    Ok(pass)
}
