//! Experiment execution and file output.
//!
//! Every run writes all artifacts into the configured output directory:
//! a `manifest.txt` echoing the resolved configuration (itself a valid
//! config file) plus the derived per-condition seeds, results and plot
//! CSVs, and experiment-specific files. All numbers are written with fixed
//! precision so a rerun with the same configuration reproduces every file
//! byte for byte.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

use ipdsim::coherence::{effective_gamma, gamma_from_psd, measure_coherence, CoherenceFunction};
use ipdsim::experiments::{
    correlation_discrimination, group_delay_study, least_squares_slope, main_grid, mode_label,
    parse_reference_csv, rmse_vs_reference, trahiotis_check, Condition, ConditionResult,
    ModelParams, GROUP_DELAY_GRID_S, MAIN_GRID_BANDWIDTHS_HZ,
};
use ipdsim::observer::{run_condition, run_track, ThresholdEstimate};
use ipdsim::seeds::{child_seed, rng_from_seed};
use ipdsim::stimgen::{
    assemble_interval, gen_ungated_noise_pair, InterauralMode, NoiseSpec, TonePhase,
};

use crate::config::{ExperimentKind, RunConfig};

fn model_params(config: &RunConfig) -> ModelParams {
    ModelParams {
        periphery: config.periphery,
        binaural: config.binaural,
    }
}

fn db(x: f64) -> String {
    format!("{:.6}", x)
}

fn write_file(dir: &Path, name: &str, content: &str) -> Result<PathBuf> {
    let path = dir.join(name);
    fs::write(&path, content).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

fn results_csv(results: &[ConditionResult]) -> String {
    let mut text = String::from(
        "label,bandwidth_hz,interaural_mode,tone_phase,n_runs,mean_db,median_db,sd_db,sem_db\n",
    );
    for r in results {
        let phase = match r.condition.tone_phase {
            TonePhase::Diotic => "diotic",
            TonePhase::Antiphasic => "antiphasic",
        };
        text.push_str(&format!(
            "{},{:.1},{},{},{},{},{},{},{}\n",
            r.condition.label,
            r.condition.noise.bandwidth_hz,
            mode_label(&r.condition.noise.mode),
            phase,
            r.n_runs(),
            db(r.mean_db),
            db(r.median_db),
            db(r.sd_db),
            db(r.sem_db),
        ));
    }
    text
}

fn plot_csv(rows: &[(f64, f64, String)]) -> String {
    let mut text = String::from("x,y,series\n");
    for (x, y, series) in rows {
        text.push_str(&format!("{},{},{}\n", db(*x), db(*y), series));
    }
    text
}

fn coherence_csv(gamma: &CoherenceFunction) -> String {
    let mut text = String::from("lag_s,re,im,abs\n");
    for (lag, value) in gamma.lags_s.iter().zip(&gamma.values) {
        text.push_str(&format!(
            "{:.6},{:.9},{:.9},{:.9}\n",
            lag,
            value.re,
            value.im,
            value.norm()
        ));
    }
    text
}

fn manifest(config: &RunConfig, seed_lines: &[String]) -> String {
    let mut text = String::from(
        "# Run manifest. The key = value lines below are the fully resolved\n\
         # configuration and can be replayed directly as a config file.\n",
    );
    text.push_str(&config.to_config_text());
    text.push_str(
        "# Derived seeds: each unit of work gets child_seed(master_seed, index),\n\
         # a splitmix-style hash of the master seed and the position below.\n",
    );
    for line in seed_lines {
        text.push_str(&format!("# {}\n", line));
    }
    text
}

struct Progress {
    quiet: bool,
}

impl Progress {
    fn say(&self, message: &str) {
        if !self.quiet {
            eprintln!("{}", message);
        }
    }
}

/// Runs the configured experiment, writing all outputs into
/// `config.output_dir`.
pub fn run(config: &RunConfig, quiet: bool) -> Result<()> {
    let dir = config.output_dir.clone();
    fs::create_dir_all(&dir)
        .with_context(|| format!("creating output directory {}", dir.display()))?;
    let progress = Progress { quiet };
    match config.experiment {
        ExperimentKind::Fig3 => run_fig3(config, &dir, &progress),
        ExperimentKind::Correlation => run_correlation(config, &dir, &progress),
        ExperimentKind::GroupDelay => run_group_delay(config, &dir, &progress),
        ExperimentKind::Trahiotis => run_trahiotis(config, &dir, &progress),
        ExperimentKind::Coherence => run_coherence(config, &dir, &progress),
        ExperimentKind::StaircaseDemo => run_staircase_demo(config, &dir, &progress),
        ExperimentKind::StimulusExport => run_stimulus_export(config, &dir, &progress),
    }
}

/// Main threshold grid: bandwidth x interaural delay, antiphasic tone.
/// Seed derivation matches `experiments::replicate_fig3`: condition `i` of
/// the grid uses `child_seed(master_seed, i)`.
fn run_fig3(config: &RunConfig, dir: &Path, progress: &Progress) -> Result<()> {
    let params = model_params(config);
    let staircase = config.staircase.clone();
    let grid = main_grid();
    let mut results = Vec::with_capacity(grid.len());
    let mut seed_lines = Vec::with_capacity(grid.len());
    for (i, condition) in grid.iter().enumerate() {
        let seed = child_seed(config.master_seed, i as u64);
        let result = run_condition(condition, &params, &staircase, config.n_runs, seed)?;
        progress.say(&format!(
            "[{}/{}] {}: mean {:.2} dB, sem {:.2} dB",
            i + 1,
            grid.len(),
            condition.label,
            result.mean_db,
            result.sem_db
        ));
        seed_lines.push(format!("condition {} -> seed {}", condition.label, seed));
        results.push(result);
    }

    write_file(dir, "results.csv", &results_csv(&results))?;

    // thresholds against delay, one series per bandwidth; the uncorrelated
    // reference is plotted at x = 10 ms
    let mut rows = Vec::new();
    for r in &results {
        let bw = r.condition.noise.bandwidth_hz;
        match r.condition.noise.mode {
            InterauralMode::Delayed { delay_s } => {
                rows.push((delay_s * 1e3, r.median_db, format!("bw{:.0}", bw)));
            }
            InterauralMode::Uncorrelated => {
                rows.push((10.0, r.median_db, format!("bw{:.0}_uncorrelated", bw)));
            }
            InterauralMode::Correlated { .. } => {}
        }
    }
    write_file(dir, "plot_thresholds.csv", &plot_csv(&rows))?;

    if let Some(path) = &config.reference_csv {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading reference table {}", path.display()))?;
        let reference = parse_reference_csv(&text)?;
        let rmse = rmse_vs_reference(&results, &reference)?;
        write_file(
            dir,
            "reference_rmse.txt",
            &format!(
                "rmse_db = {}\nreference_rows = {}\n",
                db(rmse),
                reference.len()
            ),
        )?;
        progress.say(&format!("reference RMSE {:.2} dB", rmse));
    }

    write_file(dir, "manifest.txt", &manifest(config, &seed_lines))?;
    Ok(())
}

/// Correlation-discrimination study on the configured rho grid: adjacent
/// pairs along the grid, plus the direct pair to 1 for the chain
/// comparison.
fn run_correlation(config: &RunConfig, dir: &Path, progress: &Progress) -> Result<()> {
    let params = model_params(config);
    let mut pairs: Vec<(f64, f64)> = config.rho_grid.windows(2).map(|w| (w[0], w[1])).collect();
    let first = config.rho_grid[0];
    if config.rho_grid.contains(&1.0) && first != 1.0 && !pairs.contains(&(first, 1.0)) {
        pairs.push((first, 1.0));
    }

    let study = correlation_discrimination(
        &params,
        &pairs,
        config.trials_per_point,
        config.bandwidth_hz,
        config.master_seed,
    )?;
    progress.say(&format!(
        "{} correlations, {} pairs, {} chains",
        study.moments.len(),
        study.pairs.len(),
        study.chains.len()
    ));

    let mut text = String::from("rho,mean,variance,n\n");
    for m in &study.moments {
        text.push_str(&format!(
            "{},{},{},{}\n",
            db(m.rho),
            db(m.mean),
            db(m.variance),
            m.n
        ));
    }
    write_file(dir, "moments.csv", &text)?;

    let mut text = String::from("rho_a,rho_b,dprime\n");
    for p in &study.pairs {
        text.push_str(&format!(
            "{},{},{}\n",
            db(p.rho_a),
            db(p.rho_b),
            db(p.dprime)
        ));
    }
    write_file(dir, "dprime_pairs.csv", &text)?;

    let mut text = String::from("rho,path,dprime_sum\n");
    let mut rows = Vec::new();
    for c in &study.chains {
        let path: Vec<String> = c.path.iter().map(|r| format!("{}", r)).collect();
        text.push_str(&format!(
            "{},{},{}\n",
            db(c.rho),
            path.join(">"),
            db(c.dprime_sum)
        ));
        rows.push((c.rho, c.dprime_sum, format!("chain_{}", path.join(">"))));
    }
    write_file(dir, "chains.csv", &text)?;
    write_file(dir, "plot_chained_dprime.csv", &plot_csv(&rows))?;

    let seed_lines: Vec<String> = study
        .moments
        .iter()
        .enumerate()
        .map(|(i, m)| {
            format!(
                "rho {} -> seed {}",
                m.rho,
                child_seed(config.master_seed, i as u64)
            )
        })
        .collect();
    write_file(dir, "manifest.txt", &manifest(config, &seed_lines))?;
    Ok(())
}

/// Threshold against interaural group delay at the configured bandwidth,
/// relative to the zero-delay reference.
fn run_group_delay(config: &RunConfig, dir: &Path, progress: &Progress) -> Result<()> {
    let params = model_params(config);
    let staircase = config.staircase.clone();
    let study = group_delay_study(
        &params,
        &staircase,
        config.bandwidth_hz,
        &GROUP_DELAY_GRID_S,
        config.n_runs,
        config.master_seed,
    )?;

    let results: Vec<ConditionResult> = study.points.iter().map(|p| p.result.clone()).collect();
    write_file(dir, "results.csv", &results_csv(&results))?;

    let series = format!("bw{:.0}", config.bandwidth_hz);
    let rows: Vec<(f64, f64, String)> = study
        .points
        .iter()
        .map(|p| (p.group_delay_s * 1e3, p.relative_db, series.clone()))
        .collect();
    write_file(dir, "plot_group_delay.csv", &plot_csv(&rows))?;

    let xs_ms: Vec<f64> = study.points.iter().map(|p| p.group_delay_s * 1e3).collect();
    let ys: Vec<f64> = study.points.iter().map(|p| p.relative_db).collect();
    let initial: Vec<usize> = (0..xs_ms.len()).filter(|&i| xs_ms[i] <= 3.9).collect();
    let initial_slope = least_squares_slope(
        &initial.iter().map(|&i| xs_ms[i]).collect::<Vec<f64>>(),
        &initial.iter().map(|&i| ys[i]).collect::<Vec<f64>>(),
    );
    let full_slope = least_squares_slope(&xs_ms, &ys);
    write_file(
        dir,
        "slopes.txt",
        &format!(
            "initial_slope_db_per_ms = {}\nfull_range_slope_db_per_ms = {}\n",
            db(initial_slope),
            db(full_slope)
        ),
    )?;
    progress.say(&format!(
        "slope 0-3.9 ms: {:.2} dB/ms, full range: {:.2} dB/ms",
        initial_slope, full_slope
    ));

    let seed_lines: Vec<String> = study
        .points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            format!(
                "group delay {} ms -> seed {}",
                p.group_delay_s * 1e3,
                child_seed(config.master_seed, i as u64)
            )
        })
        .collect();
    write_file(dir, "manifest.txt", &manifest(config, &seed_lines))?;
    Ok(())
}

/// Threshold shift from a 1.5 ms pure group delay at 50 and 400 Hz
/// bandwidth.
fn run_trahiotis(config: &RunConfig, dir: &Path, progress: &Progress) -> Result<()> {
    let params = model_params(config);
    let staircase = config.staircase.clone();
    let check = trahiotis_check(&params, &staircase, config.n_runs, config.master_seed)?;
    progress.say(&format!(
        "50 Hz: {:+.2} dB, 400 Hz: {:+.2} dB",
        check.delta_bw50_db, check.delta_bw400_db
    ));

    write_file(dir, "results.csv", &results_csv(&check.results))?;
    write_file(
        dir,
        "deltas.csv",
        &format!(
            "bandwidth_hz,delta_db\n50.0,{}\n400.0,{}\n",
            db(check.delta_bw50_db),
            db(check.delta_bw400_db)
        ),
    )?;
    let seed_lines: Vec<String> = check
        .results
        .iter()
        .enumerate()
        .map(|(i, r)| {
            format!(
                "condition {} -> seed {}",
                r.condition.label,
                child_seed(config.master_seed, i as u64)
            )
        })
        .collect();
    write_file(dir, "manifest.txt", &manifest(config, &seed_lines))?;
    Ok(())
}

/// Interaural coherence curves for every main-grid bandwidth: the raw flat
/// passband, the effective (filtered) prediction, and an empirical estimate
/// from one long delayed token.
fn run_coherence(config: &RunConfig, dir: &Path, progress: &Progress) -> Result<()> {
    let lags: Vec<f64> = (0..=100).map(|i| i as f64 * 1.0e-4).collect();
    let periphery = config.periphery;
    for (i, &bw) in MAIN_GRID_BANDWIDTHS_HZ.iter().enumerate() {
        let spec = NoiseSpec::new(bw, InterauralMode::Uncorrelated);
        let f_lo = spec.center_hz - bw / 2.0;
        let steps = (bw / 0.25).round() as usize;
        let freqs: Vec<f64> = (0..=steps).map(|k| f_lo + 0.25 * k as f64).collect();
        let psd = vec![1.0; freqs.len()];
        let raw = gamma_from_psd(&freqs, &psd, &lags)?;
        write_file(
            dir,
            &format!("coherence_bw{:.0}_raw.csv", bw),
            &coherence_csv(&raw),
        )?;

        let effective = effective_gamma(&spec, &periphery, &lags)?;
        write_file(
            dir,
            &format!("coherence_bw{:.0}_effective.csv", bw),
            &coherence_csv(&effective),
        )?;

        let mut delayed = NoiseSpec::new(bw, InterauralMode::Delayed { delay_s: 4.0e-3 });
        delayed.duration_s = 10.0;
        let mut rng = rng_from_seed(child_seed(config.master_seed, i as u64));
        let token = gen_ungated_noise_pair(&delayed, &mut rng)?;
        let measured = measure_coherence(&token, &lags)?;
        write_file(
            dir,
            &format!("coherence_bw{:.0}_measured_4ms.csv", bw),
            &coherence_csv(&measured),
        )?;
        progress.say(&format!(
            "bw {:.0} Hz: |gamma_eff(4 ms)| = {:.3}, measured peak {:.3}",
            bw,
            effective.nearest(4.0e-3).norm(),
            measured.nearest(4.0e-3).norm()
        ));
    }
    let seed_lines: Vec<String> = MAIN_GRID_BANDWIDTHS_HZ
        .iter()
        .enumerate()
        .map(|(i, bw)| {
            format!(
                "measured token bw {} -> seed {}",
                bw,
                child_seed(config.master_seed, i as u64)
            )
        })
        .collect();
    write_file(dir, "manifest.txt", &manifest(config, &seed_lines))?;
    Ok(())
}

/// A single adaptive track with its full trial log.
fn run_staircase_demo(config: &RunConfig, dir: &Path, progress: &Progress) -> Result<()> {
    let params = model_params(config);
    let staircase = config.staircase.clone();
    let condition = Condition::new(
        NoiseSpec::new(config.bandwidth_hz, config.interaural_mode()),
        TonePhase::Antiphasic,
    );
    let estimate: ThresholdEstimate =
        run_track(&condition, &params, &staircase, config.master_seed)?;
    progress.say(&format!(
        "{}: threshold {:.2} dB after {} trials",
        condition.label, estimate.threshold_db, estimate.n_trials
    ));

    let mut text = String::from("trial_index,level_db,correct,reversal_flag,step_db\n");
    for t in &estimate.trials {
        text.push_str(&format!(
            "{},{},{},{},{}\n",
            t.trial_index,
            db(t.level_db),
            t.correct as u8,
            t.reversal as u8,
            db(t.step_db)
        ));
    }
    write_file(dir, "track_log.csv", &text)?;

    let rows: Vec<(f64, f64, String)> = estimate
        .trials
        .iter()
        .map(|t| (t.trial_index as f64, t.level_db, "level".to_string()))
        .collect();
    write_file(dir, "plot_track.csv", &plot_csv(&rows))?;

    let reversals: Vec<String> = estimate.reversal_levels_db.iter().map(|l| db(*l)).collect();
    write_file(
        dir,
        "summary.txt",
        &format!(
            "condition = {}\nthreshold_db = {}\nn_trials = {}\nreversal_levels_db = {}\n",
            condition.label,
            db(estimate.threshold_db),
            estimate.n_trials,
            reversals.join(",")
        ),
    )?;
    let seed_lines = vec![format!("track -> seed {}", config.master_seed)];
    write_file(dir, "manifest.txt", &manifest(config, &seed_lines))?;
    Ok(())
}

fn write_wav(path: &Path, signal: &ipdsim::signal::StereoSignal) -> Result<()> {
    let spec = hound::WavSpec {
        channels: 2,
        sample_rate: signal.sample_rate as u32,
        bits_per_sample: 32,
        sample_format: hound::SampleFormat::Float,
    };
    let mut writer = hound::WavWriter::create(path, spec)
        .with_context(|| format!("creating {}", path.display()))?;
    for (l, r) in signal.left.iter().zip(&signal.right) {
        writer.write_sample(*l as f32)?;
        writer.write_sample(*r as f32)?;
    }
    writer.finalize()?;
    Ok(())
}

/// Two listening intervals of the configured condition as WAV files: the
/// masker alone, and the masker with the antiphasic tone at
/// `tone_level_db`.
fn run_stimulus_export(config: &RunConfig, dir: &Path, progress: &Progress) -> Result<()> {
    let spec = NoiseSpec::new(config.bandwidth_hz, config.interaural_mode());
    let condition = Condition::new(spec.clone(), TonePhase::Antiphasic);
    let tone = condition.tone_spec(config.tone_level_db);
    let mut rng = rng_from_seed(config.master_seed);
    let noise_interval = assemble_interval(&spec, None, &mut rng)?;
    let tone_interval = assemble_interval(&spec, Some(&tone), &mut rng)?;
    write_wav(&dir.join("interval_noise.wav"), &noise_interval)?;
    write_wav(&dir.join("interval_tone.wav"), &tone_interval)?;
    progress.say(&format!(
        "wrote two {}-frame intervals ({})",
        noise_interval.len(),
        condition.label
    ));
    let seed_lines = vec![format!("interval stream -> seed {}", config.master_seed)];
    write_file(dir, "manifest.txt", &manifest(config, &seed_lines))?;
    Ok(())
}
