//! Experiment definitions and batch studies.
//!
//! A [`Condition`] couples a masker specification with a tone phase; the
//! main grid crosses six masker bandwidths with four interaural delays plus
//! an uncorrelated reference, all with antiphasic tones. Batch runners
//! aggregate adaptive tracks into per-condition statistics, measure
//! correlation discriminability of noise-only decision variables, map
//! thresholds against interaural group delay, and compare a pure
//! group-delay masker against its zero-delay reference.

use rand_chacha::ChaCha12Rng;

use crate::binaural::{self, BinauralParams};
use crate::error::{Error, Result};
use crate::observer::{run_condition, StaircaseConfig};
use crate::periphery::{Periphery, PeripheryParams};
use crate::seeds::{child_seed, rng_from_seed};
use crate::stimgen::{assemble_interval, InterauralMode, NoiseSpec, TonePhase, ToneSpec};

/// Masker bandwidths of the main threshold grid, in Hz.
pub const MAIN_GRID_BANDWIDTHS_HZ: [f64; 6] = [25.0, 50.0, 100.0, 150.0, 200.0, 1000.0];

/// Interaural delays of the main threshold grid, in seconds.
pub const MAIN_GRID_DELAYS_S: [f64; 4] = [0.0, 2.0e-3, 4.0e-3, 8.0e-3];

/// Group-delay grid: 0 to 7.8 ms in 1.3 ms steps.
pub const GROUP_DELAY_GRID_S: [f64; 7] = [0.0, 1.3e-3, 2.6e-3, 3.9e-3, 5.2e-3, 6.5e-3, 7.8e-3];

/// Everything the model needs besides the stimulus.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ModelParams {
    pub periphery: PeripheryParams,
    pub binaural: BinauralParams,
}

/// One experimental condition: a masker and the tone configuration tested
/// against it.
#[derive(Debug, Clone, PartialEq)]
pub struct Condition {
    pub label: String,
    pub noise: NoiseSpec,
    pub tone_phase: TonePhase,
}

/// Formats a number trimming trailing zeros, for condition labels.
fn fmt_num(x: f64) -> String {
    let mut s = format!("{:.4}", x);
    while s.ends_with('0') {
        s.pop();
    }
    if s.ends_with('.') {
        s.pop();
    }
    s
}

impl Condition {
    pub fn new(noise: NoiseSpec, tone_phase: TonePhase) -> Self {
        let mode = mode_label(&noise.mode);
        let phase = match tone_phase {
            TonePhase::Diotic => "s0",
            TonePhase::Antiphasic => "spi",
        };
        let label = format!("bw{}_{}_{}", fmt_num(noise.bandwidth_hz), mode, phase);
        Self {
            label,
            noise,
            tone_phase,
        }
    }

    /// Tone specification at the given level, on the masker's sample grid.
    pub fn tone_spec(&self, level_db: f64) -> ToneSpec {
        let mut tone = ToneSpec::new(level_db, self.tone_phase);
        tone.sample_rate = self.noise.sample_rate;
        tone
    }
}

/// Short text form of an interaural mode, used in labels and CSV columns.
pub fn mode_label(mode: &InterauralMode) -> String {
    match *mode {
        InterauralMode::Delayed { delay_s } => {
            format!("delayed_{}ms", fmt_num(delay_s * 1e3))
        }
        InterauralMode::Uncorrelated => "uncorrelated".to_string(),
        InterauralMode::Correlated { rho, group_delay_s } => format!(
            "correlated_rho{}_g{}ms",
            fmt_num(rho),
            fmt_num(group_delay_s * 1e3)
        ),
    }
}

/// Aggregated thresholds of one condition.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionResult {
    pub condition: Condition,
    pub thresholds_db: Vec<f64>,
    pub mean_db: f64,
    pub median_db: f64,
    pub sd_db: f64,
    pub sem_db: f64,
}

impl ConditionResult {
    pub fn from_thresholds(condition: Condition, thresholds_db: Vec<f64>) -> Result<Self> {
        if thresholds_db.is_empty() {
            return Err(Error::InvalidParameter {
                name: "n_runs",
                value: 0.0,
                message: "at least one track is required",
            });
        }
        let mean_db = mean(&thresholds_db);
        let median_db = median(&thresholds_db);
        let sd_db = sample_sd(&thresholds_db);
        let sem_db = sd_db / (thresholds_db.len() as f64).sqrt();
        Ok(Self {
            condition,
            thresholds_db,
            mean_db,
            median_db,
            sd_db,
            sem_db,
        })
    }

    pub fn n_runs(&self) -> usize {
        self.thresholds_db.len()
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    assert!(!xs.is_empty());
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (n - 1 denominator); 0 for a single value.
pub fn sample_sd(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    let ss: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
    (ss / (xs.len() - 1) as f64).sqrt()
}

/// Linear-interpolation quantile (the common "type 7" definition):
/// h = (n - 1) p, interpolated between the bracketing order statistics.
pub fn quantile(xs: &[f64], p: f64) -> f64 {
    assert!(!xs.is_empty());
    assert!((0.0..=1.0).contains(&p));
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn median(xs: &[f64]) -> f64 {
    quantile(xs, 0.5)
}

pub fn iqr(xs: &[f64]) -> f64 {
    quantile(xs, 0.75) - quantile(xs, 0.25)
}

/// Root-mean-square difference between two aligned value lists.
pub fn rmse(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::LengthMismatch {
            context: "rmse",
            left: a.len(),
            right: b.len(),
        });
    }
    let ss: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    Ok((ss / a.len() as f64).sqrt())
}

/// One row of a results summary.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub label: String,
    pub n_runs: usize,
    pub mean_db: f64,
    pub median_db: f64,
    pub sd_db: f64,
    pub sem_db: f64,
    pub iqr_db: f64,
}

pub fn summarize(results: &[ConditionResult]) -> Vec<SummaryRow> {
    results
        .iter()
        .map(|r| SummaryRow {
            label: r.condition.label.clone(),
            n_runs: r.n_runs(),
            mean_db: r.mean_db,
            median_db: r.median_db,
            sd_db: r.sd_db,
            sem_db: r.sem_db,
            iqr_db: iqr(&r.thresholds_db),
        })
        .collect()
}

/// The 30 conditions of the main grid: each bandwidth under four interaural
/// delays and the uncorrelated reference, antiphasic tone throughout.
pub fn main_grid() -> Vec<Condition> {
    let mut grid = Vec::new();
    for &bw in &MAIN_GRID_BANDWIDTHS_HZ {
        for &delay in &MAIN_GRID_DELAYS_S {
            grid.push(Condition::new(
                NoiseSpec::new(bw, InterauralMode::Delayed { delay_s: delay }),
                TonePhase::Antiphasic,
            ));
        }
        grid.push(Condition::new(
            NoiseSpec::new(bw, InterauralMode::Uncorrelated),
            TonePhase::Antiphasic,
        ));
    }
    grid
}

/// An externally measured median threshold to compare against: bandwidth,
/// interaural configuration, and the threshold in dB SPL.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferencePoint {
    pub bandwidth_hz: f64,
    pub key: DelayKey,
    pub median_threshold_db: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DelayKey {
    DelayMs(f64),
    Uncorrelated,
}

/// Parses a reference table with header
/// `bandwidth_hz,delay_ms_or_uncorr,median_threshold_db`. Blank lines and
/// `#` comments are ignored.
pub fn parse_reference_csv(text: &str) -> Result<Vec<ReferencePoint>> {
    let mut points = Vec::new();
    let mut header_seen = false;
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if !header_seen {
            if fields != ["bandwidth_hz", "delay_ms_or_uncorr", "median_threshold_db"] {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!(
                        "expected header bandwidth_hz,delay_ms_or_uncorr,median_threshold_db, got {:?}",
                        line
                    ),
                });
            }
            header_seen = true;
            continue;
        }
        if fields.len() != 3 {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected 3 comma-separated fields, got {}", fields.len()),
            });
        }
        let bandwidth_hz: f64 = fields[0].parse().map_err(|_| Error::Parse {
            line: line_no,
            message: format!("invalid bandwidth {:?}", fields[0]),
        })?;
        let key = if fields[1].eq_ignore_ascii_case("uncorr")
            || fields[1].eq_ignore_ascii_case("uncorrelated")
        {
            DelayKey::Uncorrelated
        } else {
            DelayKey::DelayMs(fields[1].parse().map_err(|_| Error::Parse {
                line: line_no,
                message: format!("invalid delay {:?} (number of ms or 'uncorr')", fields[1]),
            })?)
        };
        let median_threshold_db: f64 = fields[2].parse().map_err(|_| Error::Parse {
            line: line_no,
            message: format!("invalid threshold {:?}", fields[2]),
        })?;
        points.push(ReferencePoint {
            bandwidth_hz,
            key,
            median_threshold_db,
        });
    }
    if !header_seen {
        return Err(Error::Parse {
            line: 1,
            message: "empty reference table".to_string(),
        });
    }
    Ok(points)
}

fn matches_key(condition: &Condition, point: &ReferencePoint) -> bool {
    if (condition.noise.bandwidth_hz - point.bandwidth_hz).abs() > 1e-9 {
        return false;
    }
    match (&condition.noise.mode, point.key) {
        (InterauralMode::Delayed { delay_s }, DelayKey::DelayMs(ms)) => {
            (delay_s - ms * 1e-3).abs() < 1e-12
        }
        (InterauralMode::Uncorrelated, DelayKey::Uncorrelated) => true,
        _ => false,
    }
}

/// RMSE between simulated medians and a reference table; every reference
/// row must match exactly one simulated condition.
pub fn rmse_vs_reference(results: &[ConditionResult], reference: &[ReferencePoint]) -> Result<f64> {
    if reference.is_empty() {
        return Err(Error::MisalignedTables {
            message: "reference table is empty".to_string(),
        });
    }
    let mut simulated = Vec::with_capacity(reference.len());
    let mut measured = Vec::with_capacity(reference.len());
    for point in reference {
        let hits: Vec<&ConditionResult> = results
            .iter()
            .filter(|r| matches_key(&r.condition, point))
            .collect();
        if hits.len() != 1 {
            return Err(Error::MisalignedTables {
                message: format!(
                    "reference row (bandwidth {} Hz, {:?}) matched {} simulated conditions",
                    point.bandwidth_hz,
                    point.key,
                    hits.len()
                ),
            });
        }
        simulated.push(hits[0].median_db);
        measured.push(point.median_threshold_db);
    }
    rmse(&simulated, &measured)
}

/// Main-grid threshold study with optional comparison against a measured
/// table.
#[derive(Debug, Clone)]
pub struct Fig3Report {
    pub results: Vec<ConditionResult>,
    pub rmse_db: Option<f64>,
}

/// Runs the full main grid. Per-condition seeds derive from `seed` by grid
/// position.
pub fn replicate_fig3(
    params: &ModelParams,
    config: &StaircaseConfig,
    n_runs: usize,
    seed: u64,
    reference: Option<&[ReferencePoint]>,
) -> Result<Fig3Report> {
    let mut results = Vec::new();
    for (i, condition) in main_grid().iter().enumerate() {
        results.push(run_condition(
            condition,
            params,
            config,
            n_runs,
            child_seed(seed, i as u64),
        )?);
    }
    let rmse_db = match reference {
        Some(table) => Some(rmse_vs_reference(&results, table)?),
        None => None,
    };
    Ok(Fig3Report { results, rmse_db })
}

/// Draws `n` decision-variable samples from noise-only intervals of one
/// masker. Each sample gets its own child seed, so the batch is independent
/// of execution order; with the `parallel` feature samples run on all
/// cores.
pub fn decision_sample_batch(
    spec: &NoiseSpec,
    params: &ModelParams,
    n: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    params.binaural.validate()?;
    let periphery = Periphery::new(&params.periphery, spec.sample_rate)?;
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n)
            .into_par_iter()
            .map(|i| {
                decision_sample(
                    spec,
                    &periphery,
                    &params.binaural,
                    child_seed(seed, i as u64),
                )
            })
            .collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n)
            .map(|i| {
                decision_sample(
                    spec,
                    &periphery,
                    &params.binaural,
                    child_seed(seed, i as u64),
                )
            })
            .collect()
    }
}

/// Sequential twin of [`decision_sample_batch`], always available and
/// bit-identical to the parallel path.
pub fn decision_sample_batch_serial(
    spec: &NoiseSpec,
    params: &ModelParams,
    n: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    params.binaural.validate()?;
    let periphery = Periphery::new(&params.periphery, spec.sample_rate)?;
    (0..n)
        .map(|i| {
            decision_sample(
                spec,
                &periphery,
                &params.binaural,
                child_seed(seed, i as u64),
            )
        })
        .collect()
}

fn decision_sample(
    spec: &NoiseSpec,
    periphery: &Periphery,
    binaural_params: &BinauralParams,
    seed: u64,
) -> Result<f64> {
    let mut rng: ChaCha12Rng = rng_from_seed(seed);
    let interval = assemble_interval(spec, None, &mut rng)?;
    binaural::process_interval(&interval, periphery, binaural_params, &mut rng)
}

/// Decision-variable moments of noise-only intervals at one correlation.
#[derive(Debug, Clone, PartialEq)]
pub struct RhoMoments {
    pub rho: f64,
    pub mean: f64,
    pub variance: f64,
    pub n: usize,
}

/// Discriminability of one correlation pair.
#[derive(Debug, Clone, PartialEq)]
pub struct PairDprime {
    pub rho_a: f64,
    pub rho_b: f64,
    pub dprime: f64,
}

/// Sum of adjacent-pair d' values along one simple path from `rho` to a
/// correlation of 1.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainedEstimate {
    pub rho: f64,
    pub path: Vec<f64>,
    pub dprime_sum: f64,
}

/// Correlation-discrimination study on noise-only decision variables.
#[derive(Debug, Clone)]
pub struct DprimeStudy {
    pub bandwidth_hz: f64,
    pub moments: Vec<RhoMoments>,
    pub pairs: Vec<PairDprime>,
    pub chains: Vec<ChainedEstimate>,
}

/// For each distinct correlation in `rho_pairs`, draws `trials_per_point`
/// noise-only decision variables (masker `Correlated { rho, 0 }` at
/// `bandwidth_hz`); d' of a pair is the mean separation over the pooled
/// standard deviation. Cumulative estimates against a correlation of 1 sum
/// adjacent-pair d' along every simple path in the pair graph.
pub fn correlation_discrimination(
    params: &ModelParams,
    rho_pairs: &[(f64, f64)],
    trials_per_point: usize,
    bandwidth_hz: f64,
    seed: u64,
) -> Result<DprimeStudy> {
    if rho_pairs.is_empty() {
        return Err(Error::InvalidParameter {
            name: "rho_pairs",
            value: 0.0,
            message: "at least one pair is required",
        });
    }
    if trials_per_point < 2 {
        return Err(Error::InvalidParameter {
            name: "trials_per_point",
            value: trials_per_point as f64,
            message: "need at least 2 samples per correlation",
        });
    }

    let mut rhos: Vec<f64> = rho_pairs.iter().flat_map(|&(a, b)| [a, b]).collect();
    rhos.sort_by(f64::total_cmp);
    rhos.dedup_by(|a, b| a == b);

    let mut moments = Vec::with_capacity(rhos.len());
    for (i, &rho) in rhos.iter().enumerate() {
        let spec = NoiseSpec::new(
            bandwidth_hz,
            InterauralMode::Correlated {
                rho,
                group_delay_s: 0.0,
            },
        );
        let samples =
            decision_sample_batch(&spec, params, trials_per_point, child_seed(seed, i as u64))?;
        let m = mean(&samples);
        let sd = sample_sd(&samples);
        moments.push(RhoMoments {
            rho,
            mean: m,
            variance: sd * sd,
            n: samples.len(),
        });
    }

    let index_of = |rho: f64| rhos.iter().position(|&r| r == rho).unwrap();
    let dprime_between = |a: usize, b: usize| -> Result<f64> {
        let pooled = 0.5 * (moments[a].variance + moments[b].variance);
        if pooled <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "decision_variance",
                value: pooled,
                message: "decision variables are degenerate, d' undefined",
            });
        }
        Ok((moments[a].mean - moments[b].mean).abs() / pooled.sqrt())
    };

    let mut pairs = Vec::with_capacity(rho_pairs.len());
    for &(rho_a, rho_b) in rho_pairs {
        pairs.push(PairDprime {
            rho_a,
            rho_b,
            dprime: dprime_between(index_of(rho_a), index_of(rho_b))?,
        });
    }

    // cumulative estimates: every simple path to rho = 1 in the pair graph
    let mut adjacency: Vec<Vec<(usize, f64)>> = vec![Vec::new(); rhos.len()];
    for pair in &pairs {
        let (a, b) = (index_of(pair.rho_a), index_of(pair.rho_b));
        if a != b {
            adjacency[a].push((b, pair.dprime));
            adjacency[b].push((a, pair.dprime));
        }
    }
    let mut chains = Vec::new();
    if let Some(target) = rhos.iter().position(|&r| r == 1.0) {
        for start in 0..rhos.len() {
            if start == target {
                continue;
            }
            let mut visited = vec![false; rhos.len()];
            let mut path = vec![start];
            visited[start] = true;
            collect_paths(
                &adjacency,
                start,
                target,
                0.0,
                &mut visited,
                &mut path,
                &mut |path, sum| {
                    chains.push(ChainedEstimate {
                        rho: rhos[start],
                        path: path.iter().map(|&i| rhos[i]).collect(),
                        dprime_sum: sum,
                    });
                },
            );
        }
    }

    Ok(DprimeStudy {
        bandwidth_hz,
        moments,
        pairs,
        chains,
    })
}

fn collect_paths(
    adjacency: &[Vec<(usize, f64)>],
    node: usize,
    target: usize,
    sum: f64,
    visited: &mut Vec<bool>,
    path: &mut Vec<usize>,
    emit: &mut impl FnMut(&[usize], f64),
) {
    if node == target {
        emit(path, sum);
        return;
    }
    for &(next, weight) in &adjacency[node] {
        if visited[next] {
            continue;
        }
        visited[next] = true;
        path.push(next);
        collect_paths(adjacency, next, target, sum + weight, visited, path, emit);
        path.pop();
        visited[next] = false;
    }
}

/// One point of the group-delay study.
#[derive(Debug, Clone)]
pub struct GroupDelayPoint {
    pub group_delay_s: f64,
    pub result: ConditionResult,
    /// Mean threshold relative to the zero-delay row, in dB.
    pub relative_db: f64,
}

#[derive(Debug, Clone)]
pub struct GroupDelayStudy {
    pub bandwidth_hz: f64,
    pub points: Vec<GroupDelayPoint>,
}

/// Antiphasic-tone thresholds against interaural group delay (envelope
/// shifted, carrier aligned; masker `Correlated { 1, delay }`), reported
/// relative to the zero-delay reference, which must be part of the grid.
pub fn group_delay_study(
    params: &ModelParams,
    config: &StaircaseConfig,
    bandwidth_hz: f64,
    delays_s: &[f64],
    n_runs: usize,
    seed: u64,
) -> Result<GroupDelayStudy> {
    if !delays_s.contains(&0.0) {
        return Err(Error::InvalidParameter {
            name: "delays_s",
            value: f64::NAN,
            message: "the grid must contain the zero-delay reference",
        });
    }
    let mut results = Vec::with_capacity(delays_s.len());
    for (i, &delay) in delays_s.iter().enumerate() {
        let condition = Condition::new(
            NoiseSpec::new(
                bandwidth_hz,
                InterauralMode::Correlated {
                    rho: 1.0,
                    group_delay_s: delay,
                },
            ),
            TonePhase::Antiphasic,
        );
        results.push(run_condition(
            &condition,
            params,
            config,
            n_runs,
            child_seed(seed, i as u64),
        )?);
    }
    let anchor = delays_s.iter().position(|&d| d == 0.0).unwrap();
    let anchor_mean = results[anchor].mean_db;
    let points = delays_s
        .iter()
        .zip(results)
        .map(|(&delay, result)| GroupDelayPoint {
            group_delay_s: delay,
            relative_db: result.mean_db - anchor_mean,
            result,
        })
        .collect();
    Ok(GroupDelayStudy {
        bandwidth_hz,
        points,
    })
}

/// Ordinary least-squares slope of y against x.
pub fn least_squares_slope(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    assert!(xs.len() >= 2);
    let mx = mean(xs);
    let my = mean(ys);
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Threshold shifts caused by a 1.5 ms pure interaural group delay at 50
/// and 400 Hz masker bandwidth, each relative to its zero-delay reference.
#[derive(Debug, Clone)]
pub struct TrahiotisCheck {
    pub delta_bw50_db: f64,
    pub delta_bw400_db: f64,
    pub results: Vec<ConditionResult>,
}

pub fn trahiotis_check(
    params: &ModelParams,
    config: &StaircaseConfig,
    n_runs: usize,
    seed: u64,
) -> Result<TrahiotisCheck> {
    const SHIFT_S: f64 = 1.5e-3;
    let mut deltas = Vec::with_capacity(2);
    let mut results = Vec::with_capacity(4);
    for (b, &bw) in [50.0, 400.0].iter().enumerate() {
        let mut means = Vec::with_capacity(2);
        for (g, &delay) in [0.0, SHIFT_S].iter().enumerate() {
            let condition = Condition::new(
                NoiseSpec::new(
                    bw,
                    InterauralMode::Correlated {
                        rho: 1.0,
                        group_delay_s: delay,
                    },
                ),
                TonePhase::Antiphasic,
            );
            let result = run_condition(
                &condition,
                params,
                config,
                n_runs,
                child_seed(seed, (2 * b + g) as u64),
            )?;
            means.push(result.mean_db);
            results.push(result);
        }
        deltas.push(means[1] - means[0]);
    }
    Ok(TrahiotisCheck {
        delta_bw50_db: deltas[0],
        delta_bw400_db: deltas[1],
        results,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn main_grid_crosses_bandwidths_with_modes() {
        let grid = main_grid();
        assert_eq!(grid.len(), 30);
        let mut labels: Vec<&str> = grid.iter().map(|c| c.label.as_str()).collect();
        labels.sort();
        labels.dedup();
        assert_eq!(labels.len(), 30, "labels must be unique");
        assert!(grid.iter().all(|c| c.tone_phase == TonePhase::Antiphasic));
        let uncorrelated = grid
            .iter()
            .filter(|c| c.noise.mode == InterauralMode::Uncorrelated)
            .count();
        assert_eq!(uncorrelated, 6);
        assert!(grid.iter().any(|c| c.label == "bw100_delayed_2ms_spi"));
        assert!(grid.iter().any(|c| c.label == "bw1000_uncorrelated_spi"));
    }

    #[test]
    fn quantiles_and_summaries_match_hand_values() {
        let xs = [3.0, 1.0, 4.0, 2.0, 5.0];
        assert_abs_diff_eq!(median(&xs), 3.0);
        assert_abs_diff_eq!(quantile(&xs, 0.25), 2.0);
        assert_abs_diff_eq!(quantile(&xs, 0.75), 4.0);
        assert_abs_diff_eq!(iqr(&xs), 2.0);
        let even = [1.0, 2.0, 3.0, 4.0];
        assert_abs_diff_eq!(median(&even), 2.5);
        assert_abs_diff_eq!(sample_sd(&[2.0, 4.0]), (2.0_f64).sqrt());
        assert_eq!(sample_sd(&[7.0]), 0.0);
    }

    #[test]
    fn rmse_matches_examples() {
        let a = [60.0, 62.0, 64.0];
        assert_abs_diff_eq!(rmse(&a, &a).unwrap(), 0.0);
        let b = [61.0, 63.0, 65.0];
        assert_abs_diff_eq!(rmse(&a, &b).unwrap(), 1.0);
        assert!(rmse(&a, &b[..2]).is_err());
    }

    #[test]
    fn single_track_aggregate_is_the_track_itself() {
        let condition = Condition::new(
            NoiseSpec::new(100.0, InterauralMode::Uncorrelated),
            TonePhase::Antiphasic,
        );
        let result = ConditionResult::from_thresholds(condition, vec![58.5]).unwrap();
        assert_eq!(result.mean_db, 58.5);
        assert_eq!(result.median_db, 58.5);
        assert_eq!(result.sd_db, 0.0);
        assert_eq!(result.sem_db, 0.0);
    }

    #[test]
    fn reference_csv_roundtrip_and_errors() {
        let text = "\
# measured medians
bandwidth_hz,delay_ms_or_uncorr,median_threshold_db
100, 2, 52.5
1000, uncorr, 60.0
";
        let points = parse_reference_csv(text).unwrap();
        assert_eq!(points.len(), 2);
        assert_eq!(points[0].key, DelayKey::DelayMs(2.0));
        assert_eq!(points[1].key, DelayKey::Uncorrelated);
        assert_abs_diff_eq!(points[1].median_threshold_db, 60.0);

        let bad = "bandwidth_hz,delay_ms_or_uncorr,median_threshold_db\n100, what, 52.5\n";
        match parse_reference_csv(bad) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {:?}", other),
        }
        assert!(parse_reference_csv("a,b,c\n").is_err());
        assert!(parse_reference_csv("").is_err());
    }

    #[test]
    fn reference_comparison_requires_alignment() {
        let make = |bw: f64, mode: InterauralMode, thresholds: Vec<f64>| {
            ConditionResult::from_thresholds(
                Condition::new(NoiseSpec::new(bw, mode), TonePhase::Antiphasic),
                thresholds,
            )
            .unwrap()
        };
        let results = vec![
            make(
                100.0,
                InterauralMode::Delayed { delay_s: 2.0e-3 },
                vec![52.0, 53.0],
            ),
            make(1000.0, InterauralMode::Uncorrelated, vec![60.0]),
        ];
        let reference = vec![
            ReferencePoint {
                bandwidth_hz: 100.0,
                key: DelayKey::DelayMs(2.0),
                median_threshold_db: 52.5,
            },
            ReferencePoint {
                bandwidth_hz: 1000.0,
                key: DelayKey::Uncorrelated,
                median_threshold_db: 60.0,
            },
        ];
        let err = rmse_vs_reference(&results, &reference).unwrap();
        assert_abs_diff_eq!(err, 0.0, epsilon = 1e-12);

        let missing = vec![ReferencePoint {
            bandwidth_hz: 25.0,
            key: DelayKey::DelayMs(0.0),
            median_threshold_db: 50.0,
        }];
        assert!(matches!(
            rmse_vs_reference(&results, &missing),
            Err(Error::MisalignedTables { .. })
        ));
        assert!(matches!(
            rmse_vs_reference(&results, &[]),
            Err(Error::MisalignedTables { .. })
        ));
    }

    #[test]
    fn least_squares_slope_recovers_an_exact_line() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys: Vec<f64> = xs.iter().map(|x| 2.5 * x - 1.0).collect();
        assert_abs_diff_eq!(least_squares_slope(&xs, &ys), 2.5, epsilon = 1e-12);
    }

    #[test]
    fn group_delay_grid_without_reference_is_rejected() {
        let params = ModelParams::default();
        let config = StaircaseConfig::default();
        let got = group_delay_study(&params, &config, 1000.0, &[1.3e-3], 1, 7);
        assert!(matches!(got, Err(Error::InvalidParameter { .. })));
    }

    /// Small end-to-end correlation study: identical correlations are
    /// indistinguishable, decision means grow with correlation, and the
    /// chain enumeration finds both routes from 0 to 1.
    #[test]
    fn correlation_study_orders_moments_and_enumerates_chains() {
        let params = ModelParams::default();
        let pairs = [(0.0, 0.8), (0.8, 1.0), (0.0, 1.0), (0.0, 0.0)];
        let study = correlation_discrimination(&params, &pairs, 40, 1000.0, 11).unwrap();

        assert_eq!(study.moments.len(), 3);
        assert!(study.moments[0].mean < study.moments[1].mean);
        assert!(study.moments[1].mean < study.moments[2].mean);

        let self_pair = study
            .pairs
            .iter()
            .find(|p| p.rho_a == 0.0 && p.rho_b == 0.0)
            .unwrap();
        assert_eq!(self_pair.dprime, 0.0);
        assert!(study
            .pairs
            .iter()
            .all(|p| p.dprime.is_finite() && p.dprime >= 0.0));

        let from_zero: Vec<&ChainedEstimate> =
            study.chains.iter().filter(|c| c.rho == 0.0).collect();
        assert_eq!(from_zero.len(), 2);
        assert!(from_zero.iter().any(|c| c.path == vec![0.0, 1.0]));
        assert!(from_zero.iter().any(|c| c.path == vec![0.0, 0.8, 1.0]));
        for chain in &from_zero {
            assert!(chain.dprime_sum > 0.5, "sum {}", chain.dprime_sum);
        }
    }

    // The atanh transform expands differences near cos m = 1, so a 0.1-wide
    // correlation step at the top of the scale must be easier to discriminate
    // than the same step at the bottom.
    #[test]
    fn sensitivity_concentrates_near_unit_correlation() {
        let params = ModelParams::default();
        let pairs = [(0.0, 0.1), (0.9, 1.0)];
        let study = correlation_discrimination(&params, &pairs, 150, 1000.0, 17).unwrap();

        let d = |a: f64, b: f64| {
            study
                .pairs
                .iter()
                .find(|p| p.rho_a == a && p.rho_b == b)
                .unwrap()
                .dprime
        };
        assert!(
            d(0.9, 1.0) > d(0.0, 0.1),
            "d'(0.9,1) = {}, d'(0,0.1) = {}",
            d(0.9, 1.0),
            d(0.0, 0.1)
        );
    }

    #[test]
    fn degenerate_decision_variables_reject_dprime() {
        let params = ModelParams {
            periphery: Default::default(),
            binaural: BinauralParams {
                sigma_ipd: 0.0,
                sigma_d: 0.0,
                ..Default::default()
            },
        };
        let got = correlation_discrimination(&params, &[(1.0, 1.0)], 3, 1000.0, 5);
        match got {
            Err(Error::InvalidParameter { name, .. }) => assert_eq!(name, "decision_variance"),
            other => panic!("expected degenerate-variance error, got {:?}", other),
        }
    }

    #[test]
    fn batch_parallel_and_serial_paths_agree() {
        let params = ModelParams::default();
        let spec = NoiseSpec::new(1000.0, InterauralMode::Delayed { delay_s: 2.0e-3 });
        let a = decision_sample_batch(&spec, &params, 8, 99).unwrap();
        let b = decision_sample_batch_serial(&spec, &params, 8, 99).unwrap();
        assert_eq!(a, b);
    }
}
