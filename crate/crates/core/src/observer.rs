//! Artificial observer.
//!
//! Each trial presents three intervals, two with the masker alone and one
//! with the target tone added; the observer picks the interval with the
//! smallest decision variable. Levels are driven by a transformed up-down
//! staircase (2-down/1-up by default, converging on the 70.7%-correct
//! point): the level drops by one step after two consecutive correct
//! responses and rises by one step after each incorrect one. A reversal is
//! logged whenever the direction of the applied level change flips; the
//! step size shrinks as reversals accumulate, and the track terminates at a
//! fixed reversal count with the threshold taken as the mean of the last
//! logged reversal levels.

use rand::Rng;
use rand_chacha::ChaCha12Rng;

use crate::binaural;
use crate::error::{Error, Result};
use crate::experiments::{Condition, ConditionResult, ModelParams};
use crate::periphery::Periphery;
use crate::seeds::{child_seed, rng_from_seed};
use crate::stimgen::assemble_interval;

/// Three-alternative forced choice.
pub const INTERVALS_PER_TRIAL: usize = 3;

/// Safety cap aborting tracks that fail to converge (for example with a
/// degenerate always-correct responder).
pub const TRIAL_CAP: usize = 400;

/// Parameters of the adaptive track.
#[derive(Debug, Clone, PartialEq)]
pub struct StaircaseConfig {
    /// Tone level of the first trial in dB SPL.
    pub start_level_db: f64,
    /// Step size before any scheduled reduction, in dB.
    pub initial_step_db: f64,
    /// Step reductions as (reversal_count, step_db): once that many
    /// reversals are logged, the step applies. Must be increasing in count
    /// and strictly decreasing in step.
    pub step_schedule: Vec<(usize, f64)>,
    /// Consecutive correct responses required for a level decrease.
    pub down_count: usize,
    /// Consecutive incorrect responses required for a level increase.
    pub up_count: usize,
    /// The track terminates when this many reversals are logged.
    pub total_reversals: usize,
    /// The threshold is the mean of this many final reversal levels.
    pub reversals_averaged: usize,
}

impl Default for StaircaseConfig {
    fn default() -> Self {
        Self {
            start_level_db: 65.0,
            initial_step_db: 4.0,
            step_schedule: vec![(2, 2.0), (4, 1.0)],
            down_count: 2,
            up_count: 1,
            total_reversals: 10,
            reversals_averaged: 6,
        }
    }
}

impl StaircaseConfig {
    pub fn validate(&self) -> Result<()> {
        let err = |name: &'static str, value: f64, message: &'static str| {
            Err(Error::InvalidParameter {
                name,
                value,
                message,
            })
        };
        if !self.start_level_db.is_finite() {
            return err("start_level_db", self.start_level_db, "must be finite");
        }
        if !(self.initial_step_db > 0.0) {
            return err("initial_step_db", self.initial_step_db, "must be positive");
        }
        let mut prev_count = 0usize;
        let mut prev_step = self.initial_step_db;
        for &(count, step) in &self.step_schedule {
            if count <= prev_count {
                return err(
                    "step_schedule",
                    count as f64,
                    "reversal counts must increase",
                );
            }
            if !(step > 0.0) || step >= prev_step {
                return err(
                    "step_schedule",
                    step,
                    "steps must be positive and strictly decreasing",
                );
            }
            prev_count = count;
            prev_step = step;
        }
        if self.down_count == 0 || self.up_count == 0 {
            return err(
                "down_count",
                self.down_count as f64,
                "rule counts must be >= 1",
            );
        }
        if self.reversals_averaged == 0 || self.reversals_averaged > self.total_reversals {
            return err(
                "reversals_averaged",
                self.reversals_averaged as f64,
                "must be in 1..=total_reversals",
            );
        }
        Ok(())
    }

    /// Step size in effect once `reversals` reversals are logged.
    pub fn step_db(&self, reversals: usize) -> f64 {
        let mut step = self.initial_step_db;
        for &(count, scheduled) in &self.step_schedule {
            if reversals >= count {
                step = scheduled;
            }
        }
        step
    }
}

/// Direction of the last applied level change.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LevelDirection {
    None,
    Up,
    Down,
}

/// One trial as logged by the staircase. `step_db` is the signed level
/// change applied after the trial (0 when the level stayed or the track
/// terminated).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialRecord {
    pub trial_index: usize,
    pub level_db: f64,
    pub correct: bool,
    pub reversal: bool,
    pub step_db: f64,
}

/// Live state of one adaptive track.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackState {
    pub current_level_db: f64,
    pub consecutive_correct: usize,
    pub consecutive_incorrect: usize,
    pub last_direction: LevelDirection,
    pub reversal_levels_db: Vec<f64>,
    pub trial_log: Vec<TrialRecord>,
}

impl TrackState {
    pub fn new(config: &StaircaseConfig) -> Self {
        Self {
            current_level_db: config.start_level_db,
            consecutive_correct: 0,
            consecutive_incorrect: 0,
            last_direction: LevelDirection::None,
            reversal_levels_db: Vec::new(),
            trial_log: Vec::new(),
        }
    }
}

/// Terminal result of one track.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdEstimate {
    /// Mean of the last `reversals_averaged` reversal levels.
    pub threshold_db: f64,
    pub reversal_levels_db: Vec<f64>,
    pub n_trials: usize,
    pub trials: Vec<TrialRecord>,
}

/// Result of advancing the staircase by one response. Updating after
/// termination is impossible by construction: termination consumes the
/// state.
#[derive(Debug, Clone, PartialEq)]
pub enum StaircaseOutcome {
    Continue(TrackState),
    Terminated(ThresholdEstimate),
}

/// Advances the staircase by one response.
///
/// A reversal is logged (at the pre-move level, the turning point) when the
/// applied movement direction flips; the first movement cannot be a
/// reversal. The step schedule switches as soon as a reversal is logged, so
/// the move away from a turning point already uses the reduced step.
pub fn staircase_update(
    mut state: TrackState,
    correct: bool,
    config: &StaircaseConfig,
) -> StaircaseOutcome {
    let level = state.current_level_db;
    let mut movement = LevelDirection::None;
    if correct {
        state.consecutive_correct += 1;
        state.consecutive_incorrect = 0;
        if state.consecutive_correct >= config.down_count {
            movement = LevelDirection::Down;
            state.consecutive_correct = 0;
        }
    } else {
        state.consecutive_incorrect += 1;
        state.consecutive_correct = 0;
        if state.consecutive_incorrect >= config.up_count {
            movement = LevelDirection::Up;
            state.consecutive_incorrect = 0;
        }
    }

    let mut reversal = false;
    if movement != LevelDirection::None {
        if state.last_direction != LevelDirection::None && movement != state.last_direction {
            reversal = true;
            state.reversal_levels_db.push(level);
        }
        state.last_direction = movement;
    }
    let terminated = reversal && state.reversal_levels_db.len() >= config.total_reversals;

    let step = config.step_db(state.reversal_levels_db.len());
    let signed_step = if terminated {
        0.0
    } else {
        match movement {
            LevelDirection::None => 0.0,
            LevelDirection::Up => step,
            LevelDirection::Down => -step,
        }
    };
    state.trial_log.push(TrialRecord {
        trial_index: state.trial_log.len(),
        level_db: level,
        correct,
        reversal,
        step_db: signed_step,
    });

    if terminated {
        let tail_start = state.reversal_levels_db.len() - config.reversals_averaged;
        let tail = &state.reversal_levels_db[tail_start..];
        let threshold_db = tail.iter().sum::<f64>() / tail.len() as f64;
        return StaircaseOutcome::Terminated(ThresholdEstimate {
            threshold_db,
            reversal_levels_db: state.reversal_levels_db,
            n_trials: state.trial_log.len(),
            trials: state.trial_log,
        });
    }
    state.current_level_db = level + signed_step;
    StaircaseOutcome::Continue(state)
}

/// Uniform draw of the target interval.
pub fn draw_target_position(rng: &mut impl Rng) -> usize {
    rng.random_range(0..INTERVALS_PER_TRIAL)
}

/// One forced-choice trial with pre-designed filters. The RNG stream is
/// consumed in presentation order: target draw, then per interval the noise
/// token draws, the phase-jitter draws, and the decision-noise draw.
fn evaluate_trial(
    condition: &Condition,
    tone_level_db: f64,
    periphery: &Periphery,
    params: &ModelParams,
    rng: &mut ChaCha12Rng,
) -> Result<bool> {
    let target = draw_target_position(rng);
    let tone = condition.tone_spec(tone_level_db);
    let mut best_index = 0;
    let mut best_value = f64::INFINITY;
    for interval in 0..INTERVALS_PER_TRIAL {
        let tone_here = (interval == target).then_some(&tone);
        let signal = assemble_interval(&condition.noise, tone_here, rng)?;
        let d = binaural::process_interval(&signal, periphery, &params.binaural, rng)?;
        if d < best_value {
            best_value = d;
            best_index = interval;
        }
    }
    Ok(best_index == target)
}

/// One forced-choice trial of the model observer: three fresh intervals,
/// the tone in a uniformly drawn one of them; returns whether the interval
/// with the smallest decision variable is the target.
pub fn run_trial(
    condition: &Condition,
    tone_level_db: f64,
    params: &ModelParams,
    rng: &mut ChaCha12Rng,
) -> Result<bool> {
    params.binaural.validate()?;
    let periphery = Periphery::new(&params.periphery, condition.noise.sample_rate)?;
    evaluate_trial(condition, tone_level_db, &periphery, params, rng)
}

/// Runs one adaptive track against an arbitrary responder (the model, or a
/// synthetic oracle in tests). The responder maps a tone level to a
/// correct/incorrect outcome.
pub fn run_adaptive_track<F>(
    config: &StaircaseConfig,
    rng: &mut ChaCha12Rng,
    mut respond: F,
) -> Result<ThresholdEstimate>
where
    F: FnMut(f64, &mut ChaCha12Rng) -> Result<bool>,
{
    config.validate()?;
    let mut state = TrackState::new(config);
    loop {
        if state.trial_log.len() >= TRIAL_CAP {
            return Err(Error::StaircaseDiverged {
                trials: state.trial_log.len(),
                reversals: state.reversal_levels_db.len(),
                needed: config.total_reversals,
                level_db: state.current_level_db,
            });
        }
        let correct = respond(state.current_level_db, rng)?;
        match staircase_update(state, correct, config) {
            StaircaseOutcome::Continue(next) => state = next,
            StaircaseOutcome::Terminated(estimate) => return Ok(estimate),
        }
    }
}

/// One full adaptive track of the model observer. `(condition, params,
/// config, seed)` determine every trial, noise token, and internal-noise
/// draw.
pub fn run_track(
    condition: &Condition,
    params: &ModelParams,
    config: &StaircaseConfig,
    seed: u64,
) -> Result<ThresholdEstimate> {
    params.binaural.validate()?;
    let periphery = Periphery::new(&params.periphery, condition.noise.sample_rate)?;
    let mut rng = rng_from_seed(seed);
    run_adaptive_track(config, &mut rng, |level, rng| {
        evaluate_trial(condition, level, &periphery, params, rng)
    })
}

fn track_seeds(seed: u64, n_runs: usize) -> Vec<u64> {
    (0..n_runs).map(|i| child_seed(seed, i as u64)).collect()
}

/// `n_runs` independent tracks of one condition, aggregated. Tracks are
/// seeded individually from `seed`, so the result does not depend on
/// execution order; with the `parallel` feature they run on all cores.
pub fn run_condition(
    condition: &Condition,
    params: &ModelParams,
    config: &StaircaseConfig,
    n_runs: usize,
    seed: u64,
) -> Result<ConditionResult> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        let thresholds = track_seeds(seed, n_runs)
            .par_iter()
            .map(|&s| run_track(condition, params, config, s).map(|e| e.threshold_db))
            .collect::<Result<Vec<f64>>>()?;
        ConditionResult::from_thresholds(condition.clone(), thresholds)
    }
    #[cfg(not(feature = "parallel"))]
    {
        run_condition_serial(condition, params, config, n_runs, seed)
    }
}

/// Sequential twin of [`run_condition`]; always available and bit-identical
/// to the parallel path.
pub fn run_condition_serial(
    condition: &Condition,
    params: &ModelParams,
    config: &StaircaseConfig,
    n_runs: usize,
    seed: u64,
) -> Result<ConditionResult> {
    let thresholds = track_seeds(seed, n_runs)
        .iter()
        .map(|&s| run_track(condition, params, config, s).map(|e| e.threshold_db))
        .collect::<Result<Vec<f64>>>()?;
    ConditionResult::from_thresholds(condition.clone(), thresholds)
}
