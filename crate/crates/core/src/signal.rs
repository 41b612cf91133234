//! Basic signal containers and level conventions.
//!
//! Levels are referenced so that an RMS of 1.0 corresponds to 100 dB SPL;
//! `amplitude = 10^((level_db - 100) / 20)` maps a sound pressure level to a
//! linear RMS amplitude. All generators and filters run at a single sample
//! rate carried alongside the samples.

use num_complex::Complex64;

/// dB SPL value whose RMS amplitude is defined as 1.0.
pub const FULL_SCALE_DB_SPL: f64 = 100.0;

/// Converts a sound pressure level to the RMS amplitude used internally.
pub fn db_spl_to_rms(level_db: f64) -> f64 {
    10f64.powf((level_db - FULL_SCALE_DB_SPL) / 20.0)
}

/// Converts an internal RMS amplitude back to dB SPL.
pub fn rms_to_db_spl(rms: f64) -> f64 {
    20.0 * rms.log10() + FULL_SCALE_DB_SPL
}

/// Root mean square of a slice; 0.0 for an empty slice.
pub fn rms(samples: &[f64]) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    (samples.iter().map(|x| x * x).sum::<f64>() / samples.len() as f64).sqrt()
}

/// Two-channel audio buffer. Channels always have equal length.
#[derive(Debug, Clone, PartialEq)]
pub struct StereoSignal {
    pub left: Vec<f64>,
    pub right: Vec<f64>,
    pub sample_rate: f64,
}

impl StereoSignal {
    /// Builds a stereo buffer. Panics if the channels differ in length or the
    /// sample rate is not positive; both are programming errors, not runtime
    /// conditions.
    pub fn new(left: Vec<f64>, right: Vec<f64>, sample_rate: f64) -> Self {
        assert_eq!(
            left.len(),
            right.len(),
            "stereo channels must have equal length"
        );
        assert!(
            sample_rate > 0.0 && sample_rate.is_finite(),
            "sample rate must be positive"
        );
        Self {
            left,
            right,
            sample_rate,
        }
    }

    pub fn len(&self) -> usize {
        self.left.len()
    }

    pub fn is_empty(&self) -> bool {
        self.left.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.len() as f64 / self.sample_rate
    }

    /// Adds `other` into this buffer starting at `offset` samples.
    /// The added signal must fit entirely.
    pub fn add_at(&mut self, other: &StereoSignal, offset: usize) {
        assert_eq!(self.sample_rate, other.sample_rate, "sample rate mismatch");
        assert!(
            offset + other.len() <= self.len(),
            "added signal does not fit: offset {} + len {} > {}",
            offset,
            other.len(),
            self.len()
        );
        for (i, (&l, &r)) in other.left.iter().zip(&other.right).enumerate() {
            self.left[offset + i] += l;
            self.right[offset + i] += r;
        }
    }

    /// Multiplies both channels by a common gain.
    pub fn scale(&mut self, gain: f64) {
        for v in self.left.iter_mut().chain(self.right.iter_mut()) {
            *v *= gain;
        }
    }
}

/// Complex-valued single-channel signal, e.g. the temporal fine structure at
/// the output of the periphery.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalyticChannel {
    pub samples: Vec<Complex64>,
    pub sample_rate: f64,
}

/// Instantaneous interaural phase difference per sample, wrapped to (-pi, pi].
#[derive(Debug, Clone, PartialEq)]
pub struct IpdTrace {
    pub values: Vec<f64>,
    pub sample_rate: f64,
}

/// Raised-cosine (squared-sine) on/off ramps applied in place. `ramp_s` is
/// the duration of one ramp; the first sample of the rising ramp is zero and
/// the signal is at full scale between the ramps. Both channels are gated
/// identically so the gating never introduces an interaural difference.
pub fn apply_raised_cosine_ramps(signal: &mut StereoSignal, ramp_s: f64) {
    let nr = (ramp_s * signal.sample_rate).round() as usize;
    let n = signal.len();
    assert!(
        2 * nr <= n,
        "ramps ({} samples each) exceed signal length {}",
        nr,
        n
    );
    for i in 0..nr {
        let w = (std::f64::consts::FRAC_PI_2 * i as f64 / nr as f64).sin();
        let w = w * w;
        signal.left[i] *= w;
        signal.right[i] *= w;
        signal.left[n - 1 - i] *= w;
        signal.right[n - 1 - i] *= w;
    }
}
