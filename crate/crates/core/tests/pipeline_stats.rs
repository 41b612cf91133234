//! Statistical behavior of the stimulus generator and the full pipeline
//! that single-shot unit tests cannot pin down: token ensembles, broadband
//! correlations, monotone IPD growth with interaural delay, and the
//! observer's chance and ceiling performance.

use ipdsim::binaural::{extract_ipd, mean_abs_ipd};
use ipdsim::experiments::{Condition, ModelParams};
use ipdsim::fft::fft_real;
use ipdsim::observer::{
    run_condition, run_condition_serial, run_track, run_trial, StaircaseConfig,
};
use ipdsim::periphery::Periphery;
use ipdsim::seeds::{child_seed, rng_from_seed};
use ipdsim::signal::{rms, rms_to_db_spl};
use ipdsim::stimgen::{
    gen_bandpass_noise, gen_ungated_noise_pair, InterauralMode, NoiseSpec, TonePhase,
};

#[test]
fn token_ensemble_holds_the_calibrated_level() {
    let spec = NoiseSpec::new(100.0, InterauralMode::Uncorrelated);
    let mut rng = rng_from_seed(2024);
    let mut levels = Vec::new();
    for _ in 0..100 {
        let token = gen_bandpass_noise(&spec, &mut rng).unwrap();
        levels.push(rms_to_db_spl(rms(&token.left)));
        levels.push(rms_to_db_spl(rms(&token.right)));
    }
    let mean_db = levels.iter().sum::<f64>() / levels.len() as f64;
    // the raised-cosine gates shave a fixed 0.3 dB; anything beyond 0.5 dB
    // of the design level indicates a calibration bug
    assert!(
        (mean_db - spec.overall_level_db()).abs() <= 0.5,
        "mean token level {:.3} dB vs design {:.3} dB",
        mean_db,
        spec.overall_level_db()
    );
}

#[test]
fn mother_spectra_are_confined_to_the_passband() {
    let spec = NoiseSpec::new(100.0, InterauralMode::Uncorrelated);
    let mut rng = rng_from_seed(5);
    let pair = gen_ungated_noise_pair(&spec, &mut rng).unwrap();
    let n = pair.len();
    let df = spec.sample_rate / n as f64;
    let f_lo = spec.center_hz - spec.bandwidth_hz / 2.0;
    let f_hi = spec.center_hz + spec.bandwidth_hz / 2.0;
    let spectrum = fft_real(&pair.left, n);
    let mut in_band = 0.0;
    let mut out_band = 0.0;
    for (k, bin) in spectrum.iter().enumerate().take(n / 2 + 1) {
        let f = k as f64 * df;
        let energy = bin.norm_sqr();
        if f >= f_lo - 1e-9 && f <= f_hi + 1e-9 {
            in_band += energy;
        } else {
            out_band += energy;
        }
    }
    assert!(in_band > 0.0);
    let rejection_db = 10.0 * (in_band / out_band.max(1e-300)).log10();
    assert!(rejection_db >= 60.0, "rejection {:.1} dB", rejection_db);
}

#[test]
fn delayed_mothers_carry_the_exact_linear_phase() {
    let delay_s = 2.0e-3;
    let spec = NoiseSpec::new(100.0, InterauralMode::Delayed { delay_s });
    let mut rng = rng_from_seed(6);
    let pair = gen_ungated_noise_pair(&spec, &mut rng).unwrap();
    let n = pair.len();
    let df = spec.sample_rate / n as f64;
    let left = fft_real(&pair.left, n);
    let right = fft_real(&pair.right, n);
    let mut checked = 0;
    for k in 1..n / 2 {
        if left[k].norm() < 1e-9 {
            continue;
        }
        let cross = left[k] * right[k].conj();
        let expected = 2.0 * std::f64::consts::PI * (k as f64 * df) * delay_s;
        let wrapped = (cross.arg() - expected).rem_euclid(2.0 * std::f64::consts::PI);
        let dist = wrapped.min(2.0 * std::f64::consts::PI - wrapped);
        assert!(dist < 1e-9, "bin {}: phase error {}", k, dist);
        checked += 1;
    }
    assert!(checked > 50, "only {} bins in band", checked);
}

fn broadband_correlation(left: &[f64], right: &[f64]) -> f64 {
    let lr: f64 = left.iter().zip(right).map(|(l, r)| l * r).sum();
    let ll: f64 = left.iter().map(|l| l * l).sum();
    let rr: f64 = right.iter().map(|r| r * r).sum();
    lr / (ll * rr).sqrt()
}

#[test]
fn mixed_pair_realizes_the_requested_correlation() {
    let mut spec = NoiseSpec::new(
        1000.0,
        InterauralMode::Correlated {
            rho: 0.6,
            group_delay_s: 0.0,
        },
    );
    spec.duration_s = 5.0;
    let mut rng = rng_from_seed(31);
    let token = gen_bandpass_noise(&spec, &mut rng).unwrap();
    let rho_hat = broadband_correlation(&token.left, &token.right);
    assert!(
        (rho_hat - 0.6).abs() <= 0.02,
        "correlation estimate {:.4}",
        rho_hat
    );

    spec.mode = InterauralMode::Uncorrelated;
    let token = gen_bandpass_noise(&spec, &mut rng).unwrap();
    let rho_hat = broadband_correlation(&token.left, &token.right);
    assert!(rho_hat.abs() < 0.05, "correlation estimate {:.4}", rho_hat);
}

/// The mean |IPD| after the periphery must grow with interaural delay and
/// top out for uncorrelated ears, mirroring the falling coherence.
#[test]
fn mean_ipd_magnitude_grows_with_interaural_delay() {
    let params = ModelParams::default();
    let periphery = Periphery::new(&params.periphery, 48_000.0).unwrap();
    let modes = [
        InterauralMode::Delayed { delay_s: 0.0 },
        InterauralMode::Delayed { delay_s: 2.0e-3 },
        InterauralMode::Delayed { delay_s: 4.0e-3 },
        InterauralMode::Delayed { delay_s: 8.0e-3 },
        InterauralMode::Uncorrelated,
    ];
    let mut means = Vec::new();
    for (i, mode) in modes.iter().enumerate() {
        let mut spec = NoiseSpec::new(100.0, mode.clone());
        spec.duration_s = 2.0;
        let mut rng = rng_from_seed(child_seed(77, i as u64));
        let pair = gen_ungated_noise_pair(&spec, &mut rng).unwrap();
        let (left, right) = periphery.process(&pair).unwrap();
        let ipd = extract_ipd(&left, &right).unwrap();
        means.push(mean_abs_ipd(&ipd));
    }
    for pair in means.windows(2) {
        assert!(pair[0] < pair[1], "IPD means not monotone: {:?}", means);
    }
    assert!(means[0] < 0.2, "diotic mean |IPD| {:.3}", means[0]);
    assert!(means[4] > 1.3, "uncorrelated mean |IPD| {:.3}", means[4]);
}

#[test]
fn inaudible_tone_yields_chance_performance() {
    let condition = Condition::new(
        NoiseSpec::new(1000.0, InterauralMode::Delayed { delay_s: 0.0 }),
        TonePhase::Antiphasic,
    );
    let params = ModelParams::default();
    let mut rng = rng_from_seed(404);
    let n = 600;
    let mut correct = 0;
    for _ in 0..n {
        // 10^((-1e4 - 100) / 20) underflows to an exactly zero amplitude
        if run_trial(&condition, -1.0e4, &params, &mut rng).unwrap() {
            correct += 1;
        }
    }
    let p = correct as f64 / n as f64;
    // 1/3 plus or minus three binomial standard errors
    assert!((0.276..=0.391).contains(&p), "chance-level p = {:.3}", p);
}

#[test]
fn loud_tone_is_detected_nearly_always() {
    let condition = Condition::new(
        NoiseSpec::new(100.0, InterauralMode::Delayed { delay_s: 0.0 }),
        TonePhase::Antiphasic,
    );
    let params = ModelParams::default();
    let mut rng = rng_from_seed(405);
    let n = 100;
    let mut correct = 0;
    for _ in 0..n {
        if run_trial(&condition, 65.0, &params, &mut rng).unwrap() {
            correct += 1;
        }
    }
    assert!(correct >= 95, "only {}/{} correct at 65 dB", correct, n);
}

#[test]
fn tracks_are_deterministic_and_independent_of_scheduling() {
    let condition = Condition::new(
        NoiseSpec::new(1000.0, InterauralMode::Delayed { delay_s: 2.0e-3 }),
        TonePhase::Antiphasic,
    );
    let params = ModelParams::default();
    let config = StaircaseConfig::default();

    let a = run_track(&condition, &params, &config, 7).unwrap();
    let b = run_track(&condition, &params, &config, 7).unwrap();
    assert_eq!(a, b);

    let par = run_condition(&condition, &params, &config, 4, 7).unwrap();
    let ser = run_condition_serial(&condition, &params, &config, 4, 7).unwrap();
    assert_eq!(par.thresholds_db, ser.thresholds_db);

    let single = run_condition(&condition, &params, &config, 1, 7).unwrap();
    assert_eq!(
        single.thresholds_db,
        vec![
            run_track(&condition, &params, &config, child_seed(7, 0))
                .unwrap()
                .threshold_db
        ]
    );
    assert_eq!(single.mean_db, single.median_db);
}

#[test]
fn disjoint_seed_sets_agree_statistically() {
    let condition = Condition::new(
        NoiseSpec::new(1000.0, InterauralMode::Delayed { delay_s: 0.0 }),
        TonePhase::Antiphasic,
    );
    let params = ModelParams::default();
    let config = StaircaseConfig::default();
    let n = 12;
    let a = run_condition(&condition, &params, &config, n, 1000).unwrap();
    let b = run_condition(&condition, &params, &config, n, 2000).unwrap();
    assert!(a.thresholds_db != b.thresholds_db, "seeds must differ");
    assert!(
        (a.mean_db - b.mean_db).abs() < 2.0,
        "disjoint-seed means {:.2} vs {:.2}",
        a.mean_db,
        b.mean_db
    );
}
