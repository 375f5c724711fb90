//! One-off calibration pilots; not part of the suite. Run with
//! `cargo test --test pilot -- --nocapture` and read the printed numbers.

use wavecrest::analytic::{
    density_pi_c, expected_m0, interval_integral, m_coefficients_oracle, two_point_gradient_cov,
    Interval,
};
use wavecrest::critical::{find_critical_points, FinderConfig};
use wavecrest::experiments::{
    covariance_diagnostic_at, replicate_seed, run_ensemble, verify_full_correlation,
    verify_reduction, ExperimentConfig, QuadratureConfig,
};
use wavecrest::legendre::{derivative_at_one, legendre_jet};
use wavecrest::random_field::sample_coefficients;
use wavecrest::stats::{chi_square_critical, chi_square_statistic, equiprobable_edges};

#[test]
fn pilot_mean_total_ell10() {
    let config = FinderConfig::default();
    let mut totals = Vec::new();
    let mut complete = 0usize;
    for i in 0..300usize {
        let coeffs = sample_coefficients(10, replicate_seed(991, 10, i));
        let census = find_critical_points(&coeffs, &config).unwrap();
        if census.complete {
            complete += 1;
            totals.push(census.total() as f64);
        }
    }
    let n = totals.len() as f64;
    let mean = totals.iter().sum::<f64>() / n;
    let var = totals.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let predicted = 2.0 * 110.0 / 3.0_f64.sqrt();
    println!(
        "ell=10: mean {mean:.3} sd {:.3} se {:.3} predicted {predicted:.3} rel {:+.4} complete {complete}/300",
        var.sqrt(),
        (var / n).sqrt(),
        mean / predicted - 1.0
    );
}

#[test]
fn pilot_chi_square_ell50() {
    let config = FinderConfig::default();
    let mut values = Vec::new();
    let mut included = 0usize;
    for i in 0..200usize {
        let coeffs = sample_coefficients(50, replicate_seed(992, 50, i));
        let census = find_critical_points(&coeffs, &config).unwrap();
        if census.complete {
            included += 1;
            values.extend(census.points.iter().map(|p| p.value));
        }
    }
    let cdf = |x: f64| interval_integral(density_pi_c, Interval::new(-9.0, x).unwrap());
    let edges = equiprobable_edges(cdf, 20, -9.0, 9.0);
    let stat = chi_square_statistic(&values, &edges);
    let critical = chi_square_critical(19.0, 0.999);
    println!(
        "ell=50: included {included}/200, pooled {} values, chi2 {stat:.2}, critical(0.999) {critical:.2}",
        values.len()
    );
    // Per-bin detail to see where misfit concentrates.
    let bins = edges.len() + 1;
    let mut counts = vec![0usize; bins];
    for &x in &values {
        let idx = edges.partition_point(|&e| e < x);
        counts[idx] += 1;
    }
    let expected = values.len() as f64 / bins as f64;
    for (i, &c) in counts.iter().enumerate() {
        let z = (c as f64 - expected) / expected.sqrt();
        println!("  bin {i:2}: count {c} z {z:+.2}");
    }
}

#[test]
fn pilot_big_ell80() {
    let config = ExperimentConfig {
        ells: vec![80],
        interval: Interval::above(1.0),
        u_list: vec![0.0, 0.5, 1.0],
        replicates: 100,
        master_seed: 993,
        finder: FinderConfig::default(),
        quadrature: QuadratureConfig::default(),
        output_dir: None,
    };
    let (records, summary) = run_ensemble(&config).unwrap();
    let d = &summary.0[0];
    println!(
        "ell=80: mean {:.3} pred {:.3}; var ratio {:.3}; clt ks {:.4}",
        d.mean_count.empirical, d.mean_count.predicted, d.variance.ratio, d.clt.ks
    );
    let red = verify_reduction(&records, 80, Interval::above(1.0)).unwrap();
    println!(
        "reduction: corr {:.4} ratio {:.4} included {}",
        red.correlation, red.slope_ratio, red.included
    );
    for u in [0.5, 1.0] {
        let rep = &verify_full_correlation(&records, u).unwrap()[0];
        println!(
            "u={u}: count_s {:+.3} area_s {:+.3} chi_s {:+.3} area_count {:+.3} chi_count {:+.3} area_chi {:+.3}",
            rep.count_vs_chaos,
            rep.area_vs_chaos,
            rep.chi_vs_chaos,
            rep.area_vs_count,
            rep.chi_vs_count,
            rep.area_vs_chi
        );
    }
}

#[test]
fn pilot_misc() {
    // Jet recurrence at the endpoint, worst relative error through ell 200.
    let mut worst = 0.0_f64;
    for ell in 1..=200u32 {
        let jet = legendre_jet(ell, 1.0).unwrap();
        let r1 = (jet.d1() / derivative_at_one(ell, 1) - 1.0).abs();
        let r2 = if ell >= 2 { (jet.d2() / derivative_at_one(ell, 2) - 1.0).abs() } else { 0.0 };
        worst = worst.max(r1).max(r2);
    }
    println!("endpoint jet worst rel {worst:e}");

    // Determinant factorization: worst relative error over an interior grid.
    let mut worst = 0.0_f64;
    for ell in [2u32, 10, 50] {
        for k in 1..=25 {
            let dphi = 0.1 + (std::f64::consts::PI - 0.2) * k as f64 / 26.0;
            let tp = two_point_gradient_cov(ell, dphi).unwrap();
            let direct = det4(&tp.matrix);
            worst = worst.max((direct / tp.determinant - 1.0).abs());
        }
    }
    println!("det factorization worst rel {worst:e}");

    // Oracle margins at the three intervals.
    for (name, interval) in [
        ("[0.5,inf)", Interval::above(0.5)),
        ("[1,inf)", Interval::above(1.0)),
        ("R", Interval::full()),
    ] {
        let m = m_coefficients_oracle(interval, 1_000_000, 20260817);
        println!(
            "oracle {name}: m0 {:+.6e} (exp {:+.6e}, z {:+.2}) m1 z {:+.2} m2 z {:+.2}",
            m.m0,
            expected_m0(interval),
            (m.m0 - expected_m0(interval)) / m.se0,
            m.m1 / m.se1,
            m.m2 / m.se2
        );
    }

    // Covariance diagnostic at the two colatitudes.
    for theta in [std::f64::consts::FRAC_PI_4, std::f64::consts::FRAC_PI_2] {
        let d = covariance_diagnostic_at(5, theta, 100_000, 77).unwrap();
        println!("cov theta {theta:.4}: max |z| {:.3}", d.max_abs_z);
    }
}

fn det4(m: &[[f64; 4]; 4]) -> f64 {
    let mut a = *m;
    let mut det = 1.0;
    for col in 0..4 {
        let pivot = (col..4).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        if pivot != col {
            a.swap(col, pivot);
            det = -det;
        }
        let d = a[col][col];
        if d == 0.0 {
            return 0.0;
        }
        det *= d;
        for row in col + 1..4 {
            let f = a[row][col] / d;
            for k in col..4 {
                a[row][k] -= f * a[col][k];
            }
        }
    }
    det
}

#[test]
fn pilot_incomplete_diagnosis() {
    let config = FinderConfig::default();
    for (ell, master, reps) in [(50u32, 992u64, 200usize), (80, 993, 100)] {
        let hess_scale = 3.0 * derivative_at_one(ell, 2) + derivative_at_one(ell, 1);
        let mut euler_bad = 0usize;
        let mut degen_only = 0usize;
        for i in 0..reps {
            let coeffs = sample_coefficients(ell, replicate_seed(master, ell, i));
            let census = find_critical_points(&coeffs, &config).unwrap();
            if census.complete {
                continue;
            }
            let gap = census.n_max as i64 + census.n_min as i64 - census.n_saddle as i64 - 2;
            if gap != 0 {
                euler_bad += 1;
            } else {
                degen_only += 1;
            }
            let min_rel = census
                .points
                .iter()
                .map(|p| p.hessian_det.abs() / hess_scale)
                .fold(f64::INFINITY, f64::min);
            println!(
                "ell={ell} i={i}: gap {gap} degenerate {} refined {} newton_fail {} merges {} min|det|/scale {min_rel:.3e}",
                census.diagnostics.degenerate,
                census.diagnostics.refined,
                census.diagnostics.newton_failures,
                census.diagnostics.dedupe_merges
            );
        }
        println!("ell={ell}: euler_bad {euler_bad} degen_only {degen_only} of {reps}");
    }
}
