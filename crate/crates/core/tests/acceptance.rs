//! Acceptance gate: ten quantitative criteria the simulation must meet,
//! each printed as one PASS/FAIL/SKIP line (run with `-- --nocapture` to
//! see them on success). Criteria 1 to 5 share a single run of the main
//! threshold grid. Tolerances are fixed here and are not to be loosened to
//! make a failing criterion pass.

use std::path::PathBuf;
use std::time::Instant;

use ipdsim::binaural::{decision_variable, extract_ipd, mean_abs_ipd, BinauralParams};
use ipdsim::coherence::{gamma_from_psd, measure_coherence};
use ipdsim::experiments::{
    group_delay_study, least_squares_slope, replicate_fig3, trahiotis_check, ConditionResult,
    ModelParams, GROUP_DELAY_GRID_S, MAIN_GRID_BANDWIDTHS_HZ, MAIN_GRID_DELAYS_S,
};
use ipdsim::observer::{
    run_adaptive_track, staircase_update, StaircaseConfig, StaircaseOutcome, TrackState,
};
use ipdsim::periphery::{GammatoneFilter, Periphery};
use ipdsim::seeds::{child_seed, rng_from_seed};
use ipdsim::signal::AnalyticChannel;
use ipdsim::stimgen::{gen_ungated_noise_pair, InterauralMode, NoiseSpec};
use num_complex::Complex64;
use rand::Rng;

const N_RUNS: usize = 100;
const GRID_SEED: u64 = 0xF163;

struct Gate {
    failures: Vec<String>,
}

impl Gate {
    fn new() -> Self {
        Gate {
            failures: Vec::new(),
        }
    }

    fn check(&mut self, name: &str, ok: bool, detail: &str) {
        println!(
            "[{}] {}: {}",
            if ok { "PASS" } else { "FAIL" },
            name,
            detail
        );
        if !ok {
            self.failures.push(format!("{}: {}", name, detail));
        }
    }

    fn skip(&mut self, name: &str, detail: &str) {
        println!("[SKIP] {}: {}", name, detail);
    }
}

fn mean_for(results: &[ConditionResult], bandwidth_hz: f64, mode: &InterauralMode) -> f64 {
    results
        .iter()
        .find(|r| {
            (r.condition.noise.bandwidth_hz - bandwidth_hz).abs() < 1e-9
                && match (&r.condition.noise.mode, mode) {
                    (
                        InterauralMode::Delayed { delay_s: a },
                        InterauralMode::Delayed { delay_s: b },
                    ) => (a - b).abs() < 1e-12,
                    (InterauralMode::Uncorrelated, InterauralMode::Uncorrelated) => true,
                    _ => false,
                }
        })
        .unwrap_or_else(|| panic!("missing grid condition bw {} {:?}", bandwidth_hz, mode))
        .mean_db
}

fn sinc(x: f64) -> f64 {
    let arg = std::f64::consts::PI * x;
    if arg == 0.0 {
        1.0
    } else {
        arg.sin() / arg
    }
}

#[test]
fn acceptance_criteria() {
    let mut gate = Gate::new();
    let params = ModelParams::default();
    let staircase = StaircaseConfig::default();

    // ---- main threshold grid, shared by criteria 1 to 5 ----
    let grid_start = Instant::now();
    let report = replicate_fig3(&params, &staircase, N_RUNS, GRID_SEED, None).unwrap();
    let grid_runtime = grid_start.elapsed();
    let results = &report.results;

    // criterion 1: precision of the grid (runtime reported, not asserted)
    let max_sem = results.iter().map(|r| r.sem_db).fold(f64::MIN, f64::max);
    gate.check(
        "criterion 1 (grid precision)",
        max_sem < 0.6,
        &format!(
            "max SEM {:.3} dB over 30 conditions x {} runs (limit 0.6); grid runtime {:.0?}",
            max_sem, N_RUNS, grid_runtime
        ),
    );

    // criterion 2: threshold rise from 0 to 8 ms delay, per wide bandwidth
    let mut rises = Vec::new();
    let mut rise_ok = true;
    for &bw in &[100.0, 150.0, 200.0, 1000.0] {
        let rise = mean_for(results, bw, &InterauralMode::Delayed { delay_s: 8.0e-3 })
            - mean_for(results, bw, &InterauralMode::Delayed { delay_s: 0.0 });
        rise_ok &= (10.8..=14.8).contains(&rise);
        rises.push(format!("bw{:.0} {:+.2}", bw, rise));
    }
    gate.check(
        "criterion 2 (12.8 dB rise)",
        rise_ok,
        &format!(
            "rise 0->8 ms in dB: {} (window 12.8 +- 2)",
            rises.join(", ")
        ),
    );

    // criterion 3: bandwidth invariance above the filter bandwidth
    let settings: Vec<InterauralMode> = MAIN_GRID_DELAYS_S
        .iter()
        .map(|&d| InterauralMode::Delayed { delay_s: d })
        .chain([InterauralMode::Uncorrelated])
        .collect();
    let mut worst_wide = 0.0_f64;
    let mut worst_100 = 0.0_f64;
    for setting in &settings {
        let wide = [150.0, 200.0, 1000.0].map(|bw| mean_for(results, bw, setting));
        for i in 0..wide.len() {
            for j in i + 1..wide.len() {
                worst_wide = worst_wide.max((wide[i] - wide[j]).abs());
            }
        }
        let m100 = mean_for(results, 100.0, setting);
        worst_100 = worst_100.max((m100 - wide[2]).abs());
    }
    gate.check(
        "criterion 3 (wide-band invariance)",
        worst_wide <= 1.5 && worst_100 <= 2.0,
        &format!(
            "max spread 150/200/1000: {:.2} dB (limit 1.5); max 100-vs-1000: {:.2} dB (limit 2)",
            worst_wide, worst_100
        ),
    );

    // criterion 4: narrow bands resist long delays
    let at8 = |bw: f64| mean_for(results, bw, &InterauralMode::Delayed { delay_s: 8.0e-3 });
    let (t25, t50, t100, t1000) = (at8(25.0), at8(50.0), at8(100.0), at8(1000.0));
    gate.check(
        "criterion 4 (narrow-band ordering at 8 ms)",
        t25 < t50 && t50 < t100 && t1000 - t25 >= 4.0,
        &format!(
            "thresholds at 8 ms: bw25 {:.2} < bw50 {:.2} < bw100 {:.2}; bw1000 - bw25 = {:.2} dB (>= 4)",
            t25, t50, t100, t1000 - t25
        ),
    );

    // criterion 5: optional comparison against a digitized reference table
    let mut reference_path: Option<PathBuf> = None;
    for candidate in [
        concat!(env!("CARGO_MANIFEST_DIR"), "/testdata/fig3_reference.csv"),
        concat!(
            env!("CARGO_MANIFEST_DIR"),
            "/../../testdata/fig3_reference.csv"
        ),
    ] {
        let path = PathBuf::from(candidate);
        if path.exists() {
            reference_path = Some(path);
            break;
        }
    }
    match reference_path {
        Some(path) => {
            let table =
                ipdsim::experiments::parse_reference_csv(&std::fs::read_to_string(&path).unwrap())
                    .unwrap();
            let rmse = ipdsim::experiments::rmse_vs_reference(results, &table).unwrap();
            gate.check(
                "criterion 5 (reference RMSE)",
                rmse <= 2.0,
                &format!(
                    "RMSE {:.2} dB against {} rows from {} (limit 2.0)",
                    rmse,
                    table.len(),
                    path.display()
                ),
            );
        }
        None => gate.skip(
            "criterion 5 (reference RMSE)",
            "no digitized threshold table at testdata/fig3_reference.csv; nothing to compare",
        ),
    }

    // ---- criterion 6: group-delay slopes at sigma_ipd = 0.45 ----
    let params_045 = ModelParams {
        binaural: BinauralParams {
            sigma_ipd: 0.45,
            ..Default::default()
        },
        ..Default::default()
    };
    let mut slope_details = Vec::new();
    let mut slopes_ok = true;
    for (bw, window) in [(1000.0, (2.5, 3.0)), (50.0, (1.5, 2.5))] {
        let study = group_delay_study(
            &params_045,
            &staircase,
            bw,
            &GROUP_DELAY_GRID_S,
            60,
            child_seed(0x6D, bw as u64),
        )
        .unwrap();
        let xs_ms: Vec<f64> = study.points.iter().map(|p| p.group_delay_s * 1e3).collect();
        let ys: Vec<f64> = study.points.iter().map(|p| p.relative_db).collect();
        let full = least_squares_slope(&xs_ms, &ys);
        let early: Vec<usize> = (0..xs_ms.len()).filter(|&i| xs_ms[i] <= 3.9).collect();
        let initial = least_squares_slope(
            &early.iter().map(|&i| xs_ms[i]).collect::<Vec<f64>>(),
            &early.iter().map(|&i| ys[i]).collect::<Vec<f64>>(),
        );
        let max_secant = (1..xs_ms.len())
            .map(|i| (ys[i] - ys[i - 1]) / (xs_ms[i] - xs_ms[i - 1]))
            .fold(f64::MIN, f64::max);
        slopes_ok &= (window.0..=window.1).contains(&full);
        slope_details.push(format!(
            "bw{:.0}: full-range LS {:.2} dB/ms (window {:.1}-{:.1}; diagnostics: LS<=3.9ms {:.2}, steepest segment {:.2})",
            bw, full, window.0, window.1, initial, max_secant
        ));
    }
    gate.check(
        "criterion 6 (group-delay slope)",
        slopes_ok,
        &slope_details.join("; "),
    );

    // ---- criterion 7: 1.5 ms group-delay shifts at default sigma ----
    let check = trahiotis_check(&params, &staircase, N_RUNS, 0x7A).unwrap();
    gate.check(
        "criterion 7 (1.5 ms group delay)",
        (1.0..=3.0).contains(&check.delta_bw50_db) && (2.5..=5.5).contains(&check.delta_bw400_db),
        &format!(
            "bw50 {:+.2} dB (window +2 +- 1), bw400 {:+.2} dB (window +4 +- 1.5)",
            check.delta_bw50_db, check.delta_bw400_db
        ),
    );

    // ---- criterion 8: stimulus coherence and filter bandwidth ----
    let mut worst_gamma_err = 0.0_f64;
    for (i, &bw) in MAIN_GRID_BANDWIDTHS_HZ.iter().enumerate() {
        for (j, &delay) in MAIN_GRID_DELAYS_S.iter().enumerate() {
            let mut spec = NoiseSpec::new(bw, InterauralMode::Delayed { delay_s: delay });
            spec.duration_s = 40.0;
            let mut rng = rng_from_seed(child_seed(0xC0, (i * 8 + j) as u64));
            let token = gen_ungated_noise_pair(&spec, &mut rng).unwrap();
            // Lag-0 coherence of a tau-delayed pair is the noise
            // autocorrelation at tau, |sinc(B tau)| for a rectangular band.
            let measured = measure_coherence(&token, &[0.0]).unwrap().values[0].norm();
            let expected = sinc(bw * delay).abs();
            worst_gamma_err = worst_gamma_err.max((measured - expected).abs());
        }
    }
    let freqs: Vec<f64> = (0..=400).map(|k| 450.0 + 0.25 * k as f64).collect();
    let psd = vec![1.0; freqs.len()];
    let gamma0 = gamma_from_psd(&freqs, &psd, &[0.0]).unwrap().values[0];
    let gamma0_exact = gamma0 == Complex64::new(1.0, 0.0);
    let filter = GammatoneFilter::design(4, 500.0, 79.0, 48_000.0).unwrap();
    let df = 0.25;
    let mut erb = 0.0;
    let mut f = 0.0;
    while f < 24_000.0 {
        erb += filter.response_at(f).norm_sqr() * df;
        f += df;
    }
    let erb_err = (erb - 79.0).abs() / 79.0;
    gate.check(
        "criterion 8 (coherence calibration)",
        worst_gamma_err <= 0.03 && gamma0_exact && erb_err <= 0.01,
        &format!(
            "max |gamma - sinc(B tau)| = {:.4} over 24 tokens (limit 0.03); gamma(0) exact: {}; gammatone ERB {:.2} Hz ({:+.2}% of 79)",
            worst_gamma_err,
            gamma0_exact,
            erb,
            100.0 * (erb - 79.0) / 79.0
        ),
    );

    // ---- criterion 9: IPD statistic limits ----
    let phasor = |offset: f64| -> AnalyticChannel {
        let samples: Vec<Complex64> = (0..4800)
            .map(|i| {
                let phase = 2.0 * std::f64::consts::PI * 500.0 * i as f64 / 48_000.0;
                Complex64::from_polar(1.0, phase - offset)
            })
            .collect();
        AnalyticChannel {
            samples,
            sample_rate: 48_000.0,
        }
    };
    let left = phasor(0.0);
    let m_diotic = mean_abs_ipd(&extract_ipd(&left, &phasor(0.0)).unwrap());
    let m_antiphasic = mean_abs_ipd(&extract_ipd(&left, &phasor(std::f64::consts::PI)).unwrap());

    let periphery = Periphery::new(&params.periphery, 48_000.0).unwrap();
    let mut pipeline_means = Vec::new();
    for k in 0..2u64 {
        let mut spec = NoiseSpec::new(1000.0, InterauralMode::Uncorrelated);
        spec.duration_s = 15.0;
        let mut rng = rng_from_seed(child_seed(0x99, k));
        let token = gen_ungated_noise_pair(&spec, &mut rng).unwrap();
        let (l, r) = periphery.process(&token).unwrap();
        pipeline_means.push(mean_abs_ipd(&extract_ipd(&l, &r).unwrap()));
    }
    let m_uncorr = (pipeline_means[0] + pipeline_means[1]) / 2.0;
    let uncorr_err = (m_uncorr - std::f64::consts::FRAC_PI_2).abs();

    let quiet = BinauralParams {
        sigma_ipd: 0.0,
        sigma_d: 0.0,
        ..Default::default()
    };
    let mut rng9 = rng_from_seed(9);
    let d_mid = decision_variable(std::f64::consts::FRAC_PI_2, &quiet, &mut rng9);

    let mut spec = NoiseSpec::new(100.0, InterauralMode::Uncorrelated);
    spec.duration_s = 1.0;
    let mut rng = rng_from_seed(child_seed(0x99, 9));
    let token = gen_ungated_noise_pair(&spec, &mut rng).unwrap();
    let mut scaled = token.clone();
    scaled.scale(3.7);
    let m_base = {
        let (l, r) = periphery.process(&token).unwrap();
        mean_abs_ipd(&extract_ipd(&l, &r).unwrap())
    };
    let m_scaled = {
        let (l, r) = periphery.process(&scaled).unwrap();
        mean_abs_ipd(&extract_ipd(&l, &r).unwrap())
    };
    let scale_err = (m_base - m_scaled).abs();

    gate.check(
        "criterion 9 (IPD statistic limits)",
        m_diotic == 0.0
            && (m_antiphasic - std::f64::consts::PI).abs() < 1e-12
            && uncorr_err <= 0.05
            && d_mid.abs() < 1e-12
            && scale_err < 1e-9,
        &format!(
            "diotic m = {:.1e}, antiphasic m - pi = {:.1e}, uncorrelated m = {:.4} (pi/2 +- 0.05), D(pi/2) = {:.1e}, scale-invariance error {:.1e}",
            m_diotic,
            m_antiphasic - std::f64::consts::PI,
            m_uncorr,
            d_mid,
            scale_err
        ),
    );

    // ---- criterion 10: staircase convergence ----
    use statrs::distribution::{ContinuousCDF, Normal};
    let mu = 50.0;
    let spread = 3.0;
    let psychometric = Normal::new(mu, spread).unwrap();
    let target = mu + spread * Normal::standard().inverse_cdf(0.5_f64.sqrt());
    let mut thresholds = Vec::new();
    for i in 0..100u64 {
        let mut rng = rng_from_seed(child_seed(0xB10, i));
        let estimate = run_adaptive_track(&staircase, &mut rng, |level, rng| {
            Ok(rng.random::<f64>() < psychometric.cdf(level))
        })
        .unwrap();
        thresholds.push(estimate.threshold_db);
    }
    let oracle_mean = thresholds.iter().sum::<f64>() / thresholds.len() as f64;

    let responses = [
        true, true, true, true, false, true, true, false, true, true, false, true, true, false,
        true, true, false, true, true,
    ];
    let mut state = TrackState::new(&staircase);
    let mut scripted_threshold = f64::NAN;
    for &correct in &responses {
        match staircase_update(state, correct, &staircase) {
            StaircaseOutcome::Continue(next) => state = next,
            StaircaseOutcome::Terminated(estimate) => {
                scripted_threshold = estimate.threshold_db;
                break;
            }
        }
    }
    gate.check(
        "criterion 10 (staircase convergence)",
        (oracle_mean - target).abs() <= 1.0 && (scripted_threshold - 60.5).abs() < 1e-12,
        &format!(
            "oracle mean {:.2} dB vs 70.7% point {:.2} dB (tolerance 1.0); scripted 19-trial track -> {:.1} dB (expected 60.5)",
            oracle_mean, target, scripted_threshold
        ),
    );

    assert!(
        gate.failures.is_empty(),
        "acceptance criteria failed:\n{}",
        gate.failures.join("\n")
    );
}
