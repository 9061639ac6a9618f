//! Acceptance criteria 1 to 10. Every criterion prints one `PASS`/`FAIL`
//! line, written straight to stdout so it shows up even when the harness
//! captures test output.

use std::fs;
use std::io::Write;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use nalgebra::DMatrix;
use p3ls::bench::{self, run_study, study_cross_validation, DataMode, Method, StudyConfig, StudyResult};
use p3ls::covariance::{estimate_covariance, select_q_from_spectrum, CovarianceEstimate};
use p3ls::intensity::{fit_scores, poisson_log_likelihood, EigenBasis};
use p3ls::numerics::{inner_l2, kernel_weight, quadrature, solve_least_squares, Curve, Grid, GridMatrix, Window};
use p3ls::pls::{
    assemble_bhat, estimate_kb, fit_beta, fitted_from_gamma, gamma_cross_check, gram_schmidt, iterate_kb,
    WeightedInnerProduct,
};
use p3ls::pointprocess::{bin_counts, simulate_inhomogeneous_poisson, BinPartition, CountVector, GaussianProcess, PointPattern};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tempfile::TempDir;

fn report(criterion: u32, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let mut out = std::io::stdout().lock();
    writeln!(out, "criterion {criterion:>2}: {verdict} | {detail}").unwrap();
    out.flush().unwrap();
}

fn study(case: u8, replicates: usize) -> StudyConfig {
    let mut cfg = StudyConfig {
        replicates,
        ..StudyConfig::default()
    };
    cfg.sim.case = case;
    cfg
}

fn all_ok(result: &StudyResult) -> bool {
    result.records.iter().all(|r| r.is_ok())
}

#[test]
fn criterion_01_pls_with_one_component_matches_fpcr_with_four() {
    let mut pass = true;
    let mut detail = Vec::new();
    let start = Instant::now();
    for case in 1..=4 {
        let cfg = StudyConfig {
            p_max: 4,
            ..study(case, 20)
        };
        let result = run_study(&cfg).unwrap();
        let pls1 = result.median_rmspe(Method::P3ls, 1);
        let fpcr3 = result.median_rmspe(Method::Fpcr, 3);
        let fpcr4 = result.median_rmspe(Method::Fpcr, 4);
        let gap = (fpcr4 - pls1).abs() / pls1;
        let ok = all_ok(&result) && pls1 <= fpcr3 && gap <= 0.25;
        pass &= ok;
        detail.push(format!(
            "case {case}: pls(1) {pls1:.3}, fpcr(3) {fpcr3:.3}, fpcr(4) {fpcr4:.3}, gap {:.0}%{}",
            100.0 * gap,
            if ok { "" } else { " [x]" }
        ));
    }
    detail.push(format!("{:.0}s", start.elapsed().as_secs_f64()));
    report(1, pass, &detail.join("; "));
    assert!(pass, "{}", detail.join("\n"));
}

#[test]
fn criterion_02_prediction_error_falls_with_sample_size() {
    let mut medians = Vec::new();
    for n_train in [50, 100, 200] {
        let mut cfg = study(2, 20);
        cfg.n_train = n_train;
        cfg.n_test = 100;
        cfg.n_total = n_train + 100;
        cfg.p_min = 2;
        cfg.p_max = 2;
        cfg.methods = vec![Method::P3ls];
        let result = run_study(&cfg).unwrap();
        assert!(all_ok(&result));
        medians.push(result.median_rmspe(Method::P3ls, 2));
    }
    let pass = medians[0] > medians[1] && medians[1] > medians[2];
    report(
        2,
        pass,
        &format!(
            "median rMSPE at n = 50, 100, 200: {:.3}, {:.3}, {:.3}",
            medians[0], medians[1], medians[2]
        ),
    );
    assert!(pass, "{medians:?}");
}

/// Grid RMS error of the covariance estimate for a log-Gaussian Cox process
/// with exponential covariance `0.5 exp(-|s - t| / 4)`.
fn lgcp_covariance_error(n: usize, seed: u64) -> f64 {
    let grid = Grid::uniform(0.0, 24.0, 60).unwrap();
    let t = grid.points();
    let truth = DMatrix::from_fn(60, 60, |i, j| 0.5 * (-(t[i] - t[j]).abs() / 4.0).exp());
    let gp = GaussianProcess::new(
        Curve::constant(grid, 3.0),
        &GridMatrix::new(grid, truth.clone()).unwrap(),
    )
    .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let patterns: Vec<PointPattern> = (0..n)
        .map(|i| simulate_inhomogeneous_poisson(format!("g{i}"), &gp.sample(&mut rng), &mut rng).unwrap())
        .collect();
    let khat = estimate_covariance(&patterns, grid, 2.0).unwrap().khat;
    (khat.entries() - truth).map(|v| v * v).mean().sqrt()
}

#[test]
fn criterion_03_covariance_error_falls_with_sample_size() {
    let seeds = 20u64;
    let start = Instant::now();
    let small: Vec<f64> = (0..seeds).map(|s| lgcp_covariance_error(50, 1000 + s)).collect();
    let small_secs = start.elapsed().as_secs_f64();
    let start = Instant::now();
    let large: Vec<f64> = (0..seeds).map(|s| lgcp_covariance_error(200, 2000 + s)).collect();
    let large_secs = start.elapsed().as_secs_f64();
    let wins = small.iter().zip(&large).filter(|(s, l)| l < s).count();
    let pass = wins as f64 >= 0.8 * seeds as f64 && small_secs < 120.0 && large_secs < 120.0;
    report(
        3,
        pass,
        &format!(
            "n = 200 beats n = 50 in {wins}/{seeds} seeds; median RMS {:.3} vs {:.3}; {small_secs:.1}s + {large_secs:.1}s",
            bench::median(&large),
            bench::median(&small)
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_04_fitted_directions_are_orthonormal() {
    let mut worst: f64 = 0.0;
    let mut fits = 0;
    for case in 1..=4 {
        let cfg = StudyConfig {
            methods: vec![Method::P3ls],
            ..study(case, 5)
        };
        let result = run_study(&cfg).unwrap();
        assert!(all_ok(&result));
        for r in &result.records {
            worst = worst.max(r.gram_error.unwrap());
            fits += 1;
        }
    }
    let pass = worst <= 1e-6;
    report(4, pass, &format!("{fits} fits, worst max|G - I| = {worst:.2e}"));
    assert!(pass);
}

/// Random curves with their empirical covariance standing in for the
/// covariance estimate, and noisy linear responses.
fn empirical_instance(seed: u64) -> (Vec<Curve>, Vec<f64>, CovarianceEstimate) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let size = 25;
    let grid = Grid::uniform(0.0, 5.0, size).unwrap();
    let n = 30 + rng.random_range(0..20);
    let freqs: Vec<f64> = (0..4).map(|k| 0.4 + 0.5 * k as f64 + rng.random_range(0.0..0.2)).collect();
    let sds = [0.6, 0.4, 0.25, 0.15];
    let curves: Vec<Curve> = (0..n)
        .map(|_| {
            let coefs: Vec<f64> = sds.iter().map(|sd| sd * rng.random_range(-1.5..1.5)).collect();
            Curve::from_fn(grid, |t| {
                1.0 + coefs.iter().zip(&freqs).map(|(c, f)| c * (f * t).cos()).sum::<f64>()
            })
        })
        .collect();
    let b = Curve::from_fn(grid, |t| 1.0 - 0.3 * t);
    let y: Vec<f64> = curves
        .iter()
        .map(|c| inner_l2(c, &b).unwrap() + 0.2 * rng.random_range(-1.0..1.0))
        .collect();
    let mean: Vec<f64> = (0..size)
        .map(|k| curves.iter().map(|c| c.values()[k]).sum::<f64>() / n as f64)
        .collect();
    let s = DMatrix::from_fn(size, size, |i, j| {
        curves
            .iter()
            .map(|c| (c.values()[i] - mean[i]) * (c.values()[j] - mean[j]))
            .sum::<f64>()
            / n as f64
    });
    (curves, y, CovarianceEstimate::from_matrix(grid, s, 1.0).unwrap())
}

#[test]
fn criterion_05_two_routes_to_the_fitted_values_agree() {
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    let mut seed = 0;
    while checked < 10 {
        seed += 1;
        let (curves, y, cov) = empirical_instance(seed);
        let p = 1 + (seed as usize % 3);
        let kb = estimate_kb(&curves, &y).unwrap();
        let its = iterate_kb(&kb, &cov.khat, p + 1).unwrap();
        let check = gamma_cross_check(&its, p).unwrap();
        if check.ill_conditioned {
            continue;
        }
        checked += 1;
        let n = curves.len();
        let mean = curves
            .iter()
            .fold(Curve::zeros(*kb.grid()), |acc, c| acc.add(&c.scaled(1.0 / n as f64)).unwrap());
        let centered: Vec<Curve> = curves.iter().map(|c| c.sub(&mean).unwrap()).collect();
        let via_gamma = fitted_from_gamma(&centered, &its[..p], &check.gamma).unwrap();
        let ip = WeightedInnerProduct::from_covariance(&cov);
        let psis = gram_schmidt(&its[..p], &ip).unwrap().curves;
        let betas = fit_beta(&curves, &y, &psis).unwrap();
        let bhat = assemble_bhat(&betas, &psis, *kb.grid()).unwrap();
        for (x, g) in centered.iter().zip(&via_gamma) {
            worst = worst.max((inner_l2(x, &bhat).unwrap() - g).abs());
        }
    }
    let pass = worst <= 1e-6;
    report(5, pass, &format!("10 instances (p <= 3), worst fitted-value gap {worst:.2e}"));
    assert!(pass);
}

/// Maximum of the Poisson log-likelihood over two scores by a global grid
/// scan followed by repeated local zooming.
fn grid_search_maximum(counts: &[u64], widths: &[f64], basis: &DMatrix<f64>) -> f64 {
    let ll = |a: f64, b: f64| {
        let eta: Vec<f64> = (0..counts.len()).map(|l| a * basis[(l, 0)] + b * basis[(l, 1)]).collect();
        poisson_log_likelihood(counts, widths, &eta)
    };
    let (mut ca, mut cb, mut half) = (0.0, 0.0, 40.0);
    let mut best = ll(ca, cb);
    for _ in 0..80 {
        let steps = 20;
        let (mut na, mut nb) = (ca, cb);
        for i in 0..=steps {
            for j in 0..=steps {
                let a = ca - half + 2.0 * half * i as f64 / steps as f64;
                let b = cb - half + 2.0 * half * j as f64 / steps as f64;
                let v = ll(a, b);
                if v > best {
                    best = v;
                    na = a;
                    nb = b;
                }
            }
        }
        ca = na;
        cb = nb;
        half *= 0.6;
    }
    best
}

#[test]
fn criterion_06_newton_scores_reach_the_likelihood_maximum() {
    let mut worst: f64 = 0.0;
    let mut all_converged = true;
    for seed in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(7000 + seed);
        let grid = Grid::uniform(0.0, 5.0, 10).unwrap();
        let partition = BinPartition::uniform(grid.window(), 10).unwrap();
        // two random directions, orthonormalised in L²
        let raw: Vec<Curve> = (0..2)
            .map(|_| Curve::new(grid, (0..10).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap())
            .collect();
        let e1 = raw[0].scaled(1.0 / inner_l2(&raw[0], &raw[0]).unwrap().sqrt());
        let mut r2 = raw[1].clone();
        r2.axpy(-inner_l2(&r2, &e1).unwrap(), &e1).unwrap();
        let e2 = r2.scaled(1.0 / inner_l2(&r2, &r2).unwrap().sqrt());
        let basis = EigenBasis::new(vec![e1, e2], partition.clone()).unwrap();
        let counts: Vec<u64> = (0..10).map(|_| rng.random_range(1..25)).collect();
        let cv = CountVector::new("g", partition.clone(), counts.clone()).unwrap();
        let est = fit_scores(&cv, &basis).unwrap();
        all_converged &= est.converged;
        let oracle = grid_search_maximum(&counts, &partition.widths(), basis.at_midpoints());
        worst = worst.max((est.log_likelihood() - oracle).abs());
    }
    let pass = all_converged && worst <= 1e-6;
    report(6, pass, &format!("10 instances (q = 2, 10 bins), worst log-likelihood gap {worst:.2e}"));
    assert!(pass);
}

#[test]
fn criterion_07_histogram_data_predicts_like_event_data() {
    let mut medians = Vec::new();
    for mode in [DataMode::Events, DataMode::Histogram] {
        let cfg = StudyConfig {
            p_max: 1,
            methods: vec![Method::P3ls],
            data_mode: mode,
            ..study(1, 10)
        };
        let result = run_study(&cfg).unwrap();
        assert!(all_ok(&result));
        medians.push(result.median_rmspe(Method::P3ls, 1));
    }
    let gap = (medians[1] - medians[0]).abs() / medians[0];
    let pass = gap <= 0.10;
    report(
        7,
        pass,
        &format!(
            "median rMSPE events {:.4}, histogram {:.4}, gap {:.1}%",
            medians[0],
            medians[1],
            100.0 * gap
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_08_prediction_error_is_insensitive_to_bandwidth() {
    let table = study_cross_validation(&study(2, 1), 2, &[1.0, 2.0, 3.0, 4.0], 4).unwrap();
    let failed = table.cells.iter().filter(|c| c.status != "ok").count();
    let spread = table.spread();
    let pass = failed == 0 && spread < 1.5;
    let avgs: Vec<String> = table.summary.iter().map(|(h, a)| format!("h={h}: {a:.3}")).collect();
    report(8, pass, &format!("{}; max/min {spread:.3}", avgs.join(", ")));
    assert!(pass);
}

fn run_cli(dir: &Path, args: &[&str]) {
    let out = Command::new(env!("CARGO_BIN_EXE_p3ls"))
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn criterion_09_reruns_are_byte_identical() {
    let runs: Vec<TempDir> = (0..2).map(|_| TempDir::new().unwrap()).collect();
    for dir in &runs {
        run_cli(
            dir.path(),
            &["simulate", "--case", "3", "--n", "20", "--seed", "17", "--out-events", "ev.csv",
              "--out-responses", "y.csv", "--out-truth", "b.csv", "--out-counts", "c.csv"],
        );
        run_cli(
            dir.path(),
            &["bench", "--case", "2", "--replicates", "2", "--p-max", "3", "--seed", "17", "--n-train", "40",
              "--n-test", "20", "--out", "r.csv", "--out-quantiles", "q.csv"],
        );
    }
    let files = ["ev.csv", "y.csv", "b.csv", "c.csv", "r.csv", "q.csv"];
    let same = files
        .iter()
        .all(|f| fs::read(runs[0].path().join(f)).unwrap() == fs::read(runs[1].path().join(f)).unwrap());
    report(9, same, &format!("{} output files compared across two runs", files.len()));
    assert!(same);
}

/// A sweep of small worked examples across the library, one per module.
#[test]
fn criterion_10_worked_examples() {
    let mut failures = Vec::new();
    let mut check = |name: &str, ok: bool| {
        if !ok {
            failures.push(name.to_string());
        }
    };
    let unit = Grid::uniform(0.0, 1.0, 10).unwrap();
    check("quadrature of 1 on [0,1]", (quadrature(&Curve::constant(unit, 1.0)) - 1.0).abs() < 1e-12);
    check("kernel at zero", (kernel_weight(0.0, 2.0).unwrap() - 0.375).abs() < 1e-15);
    check("kernel outside support", kernel_weight(2.5, 2.0).unwrap() == 0.0);
    let design = DMatrix::from_column_slice(3, 1, &[1.0, 1.0, 1.0]);
    let mean = solve_least_squares(&design, &nalgebra::DVector::from_vec(vec![1.0, 2.0, 3.0])).unwrap();
    check("least squares on a constant column", (mean[0] - 2.0).abs() < 1e-12);
    check("q for spectrum 4,3,2,1", select_q_from_spectrum(&[4.0, 3.0, 2.0, 1.0], 0.9).unwrap() == 3);
    check("q for spectrum 1,0,0", select_q_from_spectrum(&[1.0, 0.0, 0.0], 0.5).unwrap() == 1);
    check("q ignores negatives", select_q_from_spectrum(&[5.0, 4.0, -2.0], 0.5).unwrap() == 1);

    let w = Window::new(0.0, 2.0).unwrap();
    let pattern = PointPattern::new("a", vec![0.5, 1.5, 1.7], w).unwrap();
    let counts = bin_counts(&pattern, &BinPartition::uniform(w, 2).unwrap()).unwrap();
    check("bin counts", counts.counts() == [1, 2]);

    let g24 = Grid::uniform(0.0, 24.0, 48).unwrap();
    let b = Curve::from_fn(g24, |t| (t / 5.0).sin());
    check("mse of identical curves", bench::mse_estimation(&b, &b).unwrap() == 0.0);
    let shifted = b.add(&Curve::constant(g24, 1.0)).unwrap();
    check("mse of a unit shift", (bench::mse_estimation(&b, &shifted).unwrap() - 24.0).abs() < 1e-10);
    check("mspe of unit errors", bench::mspe(&[0.0, 0.0], &[1.0, 1.0]).unwrap() == 1.0);

    let ip = WeightedInnerProduct::new(GridMatrix::new(unit, DMatrix::identity(10, 10)).unwrap());
    let c = Curve::from_fn(unit, |t| t + 0.1);
    check("identical candidates keep one", gram_schmidt(&[c.clone(), c.clone()], &ip).unwrap().curves.len() == 1);
    let xs: Vec<Curve> = (0..4).map(|i| Curve::from_fn(unit, move |t| t * i as f64)).collect();
    check("zero centred response gives zero beta", fit_beta(&xs, &[5.0; 4], std::slice::from_ref(&c)).unwrap()[0] == 0.0);
    let bhat = assemble_bhat(&[3.0], std::slice::from_ref(&c), unit).unwrap();
    check("bhat of one direction", bhat.values().iter().zip(c.values()).all(|(u, v)| *u == 3.0 * v));

    let pass = failures.is_empty();
    report(
        10,
        pass,
        &if pass {
            "worked examples hold; the full example suite runs in the unit and property tests".to_string()
        } else {
            format!("failed: {}", failures.join(", "))
        },
    );
    assert!(pass);
}
