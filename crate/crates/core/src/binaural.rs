//! Binaural stage: interaural phase difference extraction and the scalar
//! decision variable.
//!
//! From the two complex periphery outputs the stage computes the
//! instantaneous IPD per sample, perturbs it with internal phase noise,
//! collapses the interval to the mean absolute IPD `m`, and maps that to the
//! decision variable
//!
//! ```text
//! D = atanh(clamp(cos m, +-(1 - epsilon))) + N(0, sigma_d)
//! ```
//!
//! The Fisher-z style expansion makes `D` approximately normal near the
//! diotic limit, where `cos m` saturates; the clamp keeps it finite.
//! Detection is driven by `D` alone: any tone or delay that makes the IPD
//! fluctuate pulls `m` away from 0 and `D` downward.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::periphery::Periphery;
use crate::signal::{AnalyticChannel, IpdTrace, StereoSignal};

/// Internal-noise and clamping parameters of the binaural stage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinauralParams {
    /// Standard deviation of the per-sample IPD jitter in radians.
    pub sigma_ipd: f64,
    /// Standard deviation of the additive decision noise.
    pub sigma_d: f64,
    /// Clamp margin keeping `atanh` finite: `|cos m| <= 1 - clamp_epsilon`.
    pub clamp_epsilon: f64,
}

impl Default for BinauralParams {
    fn default() -> Self {
        Self {
            sigma_ipd: 0.3,
            sigma_d: 0.4,
            clamp_epsilon: 1e-6,
        }
    }
}

impl BinauralParams {
    pub fn validate(&self) -> Result<()> {
        let err = |name: &'static str, value: f64, message: &'static str| {
            Err(Error::InvalidParameter {
                name,
                value,
                message,
            })
        };
        if !(self.sigma_ipd >= 0.0) || !self.sigma_ipd.is_finite() {
            return err("sigma_ipd", self.sigma_ipd, "must be nonnegative");
        }
        if !(self.sigma_d >= 0.0) || !self.sigma_d.is_finite() {
            return err("sigma_d", self.sigma_d, "must be nonnegative");
        }
        if !(self.clamp_epsilon > 0.0) || self.clamp_epsilon >= 1.0 {
            return err("clamp_epsilon", self.clamp_epsilon, "must lie in (0, 1)");
        }
        Ok(())
    }
}

/// Wraps an angle to (-pi, pi].
pub fn wrap_phase(x: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    std::f64::consts::PI - (std::f64::consts::PI - x).rem_euclid(two_pi)
}

/// Instantaneous IPD per sample: `arg(left * conj(right))`, which wraps to
/// (-pi, pi] by construction. Samples where both channels vanish yield 0.
pub fn extract_ipd(left: &AnalyticChannel, right: &AnalyticChannel) -> Result<IpdTrace> {
    if left.samples.len() != right.samples.len() {
        return Err(Error::LengthMismatch {
            context: "extract_ipd",
            left: left.samples.len(),
            right: right.samples.len(),
        });
    }
    if left.sample_rate != right.sample_rate {
        return Err(Error::InvalidParameter {
            name: "sample_rate",
            value: right.sample_rate,
            message: "channels must share one sample rate",
        });
    }
    let values = left
        .samples
        .iter()
        .zip(&right.samples)
        .map(|(l, r)| (l * r.conj()).arg())
        .collect();
    Ok(IpdTrace {
        values,
        sample_rate: left.sample_rate,
    })
}

/// Adds i.i.d. Gaussian phase jitter to every sample and re-wraps. A sigma
/// of zero draws nothing and leaves the trace untouched.
pub fn add_phase_jitter(trace: &mut IpdTrace, sigma: f64, rng: &mut impl Rng) {
    assert!(
        sigma >= 0.0 && sigma.is_finite(),
        "jitter sigma must be >= 0"
    );
    if sigma == 0.0 {
        return;
    }
    for v in trace.values.iter_mut() {
        let noise: f64 = rng.sample(StandardNormal);
        *v = wrap_phase(*v + sigma * noise);
    }
}

/// Mean absolute IPD of the interval, in [0, pi].
pub fn mean_abs_ipd(trace: &IpdTrace) -> f64 {
    assert!(!trace.values.is_empty(), "empty IPD trace");
    trace.values.iter().map(|v| v.abs()).sum::<f64>() / trace.values.len() as f64
}

/// Maps the mean absolute IPD to the noisy decision variable.
pub fn decision_variable(mean_abs: f64, params: &BinauralParams, rng: &mut impl Rng) -> f64 {
    let limit = 1.0 - params.clamp_epsilon;
    let compressed = mean_abs.cos().clamp(-limit, limit);
    let noise: f64 = if params.sigma_d > 0.0 {
        rng.sample(StandardNormal)
    } else {
        0.0
    };
    compressed.atanh() + params.sigma_d * noise
}

/// Full binaural evaluation of one rendered interval: periphery, IPD trace,
/// phase jitter, interval mean, decision variable. The RNG stream is
/// consumed in exactly that order (one draw per sample for the jitter when
/// `sigma_ipd > 0`, then one draw for the decision noise when `sigma_d > 0`).
pub fn process_interval(
    signal: &StereoSignal,
    periphery: &Periphery,
    params: &BinauralParams,
    rng: &mut impl Rng,
) -> Result<f64> {
    params.validate()?;
    let (left, right) = periphery.process(signal)?;
    let mut trace = extract_ipd(&left, &right)?;
    add_phase_jitter(&mut trace, params.sigma_ipd, rng);
    Ok(decision_variable(mean_abs_ipd(&trace), params, rng))
}
