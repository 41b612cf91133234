//! Stimulus generation.
//!
//! Maskers are band-limited Gaussian noise tokens synthesized in the
//! frequency domain: independent complex-normal draws on every FFT bin
//! inside the passband, exact zeros outside, Hermitian symmetry, inverse
//! FFT. Each underlying full-length buffer ("mother") is then normalized to
//! the exact steady-state RMS implied by the spectrum level, so the band
//! limits are brick-wall and the level calibration is per token.
//!
//! The interaural relation is realized on the mothers before gating:
//!
//! * [`InterauralMode::Delayed`] slices one mother twice, `delay` samples
//!   apart, so the two ears carry literally the same waveform at lag tau.
//! * [`InterauralMode::Uncorrelated`] draws two independent mothers.
//! * [`InterauralMode::Correlated`] mixes two independent mothers with
//!   weights `rho` and `sqrt(1 - rho^2)` and optionally applies a pure group
//!   delay (envelope shift with zero phase shift at the center frequency).
//!
//! Gating (identical raised-cosine ramps on both ears) happens last, so the
//! interaural parameters are never distorted by the gate.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::fft;
use crate::signal::{apply_raised_cosine_ramps, db_spl_to_rms, rms, StereoSignal};

/// Sample rate shared by all reference experiments.
pub const DEFAULT_SAMPLE_RATE: f64 = 48_000.0;

/// Interaural configuration of the masker.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InterauralMode {
    /// Right ear receives the left-ear waveform delayed by `delay_s` seconds
    /// (an integer number of samples; anything else is rejected).
    Delayed { delay_s: f64 },
    /// Statistically independent noise on the two ears.
    Uncorrelated,
    /// Right ear is `rho * left + sqrt(1 - rho^2) * independent`, followed by
    /// a pure group delay of `group_delay_s` seconds.
    Correlated { rho: f64, group_delay_s: f64 },
}

/// Band-limited Gaussian noise masker.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub center_hz: f64,
    pub bandwidth_hz: f64,
    /// Spectrum level in dB SPL per Hz; the overall level is
    /// `spectrum_level_db + 10 log10(bandwidth_hz)`.
    pub spectrum_level_db: f64,
    pub duration_s: f64,
    pub ramp_s: f64,
    pub mode: InterauralMode,
    pub sample_rate: f64,
}

impl NoiseSpec {
    /// Masker with the reference-experiment defaults: 500 Hz center,
    /// 45.5 dB spectrum level, 380 ms duration, 20 ms ramps, 48 kHz.
    pub fn new(bandwidth_hz: f64, mode: InterauralMode) -> Self {
        Self {
            center_hz: 500.0,
            bandwidth_hz,
            spectrum_level_db: 45.5,
            duration_s: 0.380,
            ramp_s: 0.020,
            mode,
            sample_rate: DEFAULT_SAMPLE_RATE,
        }
    }

    /// Overall level in dB SPL of one channel.
    pub fn overall_level_db(&self) -> f64 {
        self.spectrum_level_db + 10.0 * self.bandwidth_hz.log10()
    }

    fn validate(&self) -> Result<()> {
        let err = |name: &'static str, value: f64, message: &'static str| {
            Err(Error::InvalidParameter {
                name,
                value,
                message,
            })
        };
        if !(self.sample_rate > 0.0) || !self.sample_rate.is_finite() {
            return err("sample_rate", self.sample_rate, "must be positive");
        }
        if !(self.duration_s > 0.0) || !self.duration_s.is_finite() {
            return err("duration_s", self.duration_s, "must be positive");
        }
        if !(self.ramp_s >= 0.0) || 2.0 * self.ramp_s >= self.duration_s {
            return err(
                "ramp_s",
                self.ramp_s,
                "on and off ramps must be strictly shorter than the duration",
            );
        }
        if !(self.bandwidth_hz > 0.0) {
            return err("bandwidth_hz", self.bandwidth_hz, "must be positive");
        }
        if self.center_hz - self.bandwidth_hz / 2.0 < 0.0 {
            return err(
                "bandwidth_hz",
                self.bandwidth_hz,
                "lower band edge falls below 0 Hz",
            );
        }
        if self.center_hz + self.bandwidth_hz / 2.0 >= self.sample_rate / 2.0 {
            return err(
                "bandwidth_hz",
                self.bandwidth_hz,
                "upper band edge reaches the Nyquist frequency",
            );
        }
        if !self.spectrum_level_db.is_finite() {
            return err(
                "spectrum_level_db",
                self.spectrum_level_db,
                "must be finite",
            );
        }
        match self.mode {
            InterauralMode::Delayed { delay_s } => {
                if !(delay_s >= 0.0) || !delay_s.is_finite() {
                    return err("delay_s", delay_s, "must be nonnegative");
                }
            }
            InterauralMode::Uncorrelated => {}
            InterauralMode::Correlated { rho, group_delay_s } => {
                if !(-1.0..=1.0).contains(&rho) {
                    return err("rho", rho, "must lie in [-1, 1]");
                }
                if !group_delay_s.is_finite() {
                    return err("group_delay_s", group_delay_s, "must be finite");
                }
            }
        }
        Ok(())
    }

    /// Number of samples of the gated token.
    fn gated_len(&self) -> usize {
        (self.duration_s * self.sample_rate).round() as usize
    }

    /// Interaural delay in whole samples; rejects non-representable delays.
    fn delay_samples(&self) -> Result<usize> {
        match self.mode {
            InterauralMode::Delayed { delay_s } => {
                let exact = delay_s * self.sample_rate;
                let rounded = exact.round();
                if (exact - rounded).abs() > 1e-6 {
                    return Err(Error::NonIntegerDelay {
                        delay_s,
                        sample_rate: self.sample_rate,
                        samples: exact,
                    });
                }
                Ok(rounded as usize)
            }
            _ => Ok(0),
        }
    }
}

/// Interaural phase of the target tone.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TonePhase {
    /// S0: identical in both ears.
    Diotic,
    /// Spi: right ear sign-inverted.
    Antiphasic,
}

/// Gated pure-tone target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToneSpec {
    pub freq_hz: f64,
    pub level_db: f64,
    pub duration_s: f64,
    pub ramp_s: f64,
    pub phase: TonePhase,
    pub sample_rate: f64,
}

impl ToneSpec {
    /// Tone with the reference-experiment defaults: 500 Hz, 300 ms duration,
    /// 20 ms ramps, 48 kHz.
    pub fn new(level_db: f64, phase: TonePhase) -> Self {
        Self {
            freq_hz: 500.0,
            level_db,
            duration_s: 0.300,
            ramp_s: 0.020,
            phase,
            sample_rate: DEFAULT_SAMPLE_RATE,
        }
    }

    fn validate(&self) -> Result<()> {
        let err = |name: &'static str, value: f64, message: &'static str| {
            Err(Error::InvalidParameter {
                name,
                value,
                message,
            })
        };
        if !(self.sample_rate > 0.0) || !self.sample_rate.is_finite() {
            return err("sample_rate", self.sample_rate, "must be positive");
        }
        if !(self.freq_hz > 0.0) || self.freq_hz >= self.sample_rate / 2.0 {
            return err("freq_hz", self.freq_hz, "must lie in (0, Nyquist)");
        }
        if !self.level_db.is_finite() {
            return err("level_db", self.level_db, "must be finite");
        }
        if !(self.duration_s > 0.0) {
            return err("duration_s", self.duration_s, "must be positive");
        }
        if !(self.ramp_s >= 0.0) || 2.0 * self.ramp_s > self.duration_s {
            return err(
                "ramp_s",
                self.ramp_s,
                "must be nonnegative and fit twice into the duration",
            );
        }
        Ok(())
    }
}

/// Draws one mother spectrum: unit complex normals on bins `k_lo..=k_hi`,
/// Hermitian mirror, zeros elsewhere (including DC and Nyquist).
fn draw_mother_spectrum(
    n_fft: usize,
    k_lo: usize,
    k_hi: usize,
    rng: &mut impl Rng,
) -> Vec<Complex64> {
    let mut spec = vec![Complex64::ZERO; n_fft];
    for k in k_lo..=k_hi {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        spec[k] = Complex64::new(re, im);
        spec[n_fft - k] = spec[k].conj();
    }
    spec
}

/// Inverse FFT of a Hermitian spectrum, real part only.
fn spectrum_to_signal(mut spec: Vec<Complex64>) -> Vec<f64> {
    fft::ifft_inplace(&mut spec);
    spec.into_iter().map(|v| v.re).collect()
}

fn scale_to_rms(samples: &mut [f64], target_rms: f64, context: &'static str) -> Result<()> {
    let current = rms(samples);
    if current == 0.0 {
        return Err(Error::ZeroEnergy { context });
    }
    let gain = target_rms / current;
    for v in samples.iter_mut() {
        *v *= gain;
    }
    Ok(())
}

/// Multiplies the positive-frequency bins by `exp(-i 2 pi (f - fc) g)` and
/// mirrors the result, shifting the envelope by `g` while leaving the phase
/// at `fc` untouched. DC and Nyquist are left as they are.
fn twist_group_delay(spec: &mut [Complex64], sample_rate: f64, group_delay_s: f64, center_hz: f64) {
    let n = spec.len();
    let df = sample_rate / n as f64;
    for k in 1..n.div_ceil(2) {
        let f = k as f64 * df;
        let twist = Complex64::from_polar(
            1.0,
            -2.0 * std::f64::consts::PI * (f - center_hz) * group_delay_s,
        );
        spec[k] *= twist;
        spec[n - k] = spec[k].conj();
    }
}

/// Applies a pure group delay to a single channel: the envelope moves by
/// `group_delay_s` while the carrier phase at `center_hz` stays fixed. The
/// operation is circular in the length of the input.
pub fn apply_group_delay(
    samples: &[f64],
    sample_rate: f64,
    group_delay_s: f64,
    center_hz: f64,
) -> Vec<f64> {
    assert!(sample_rate > 0.0, "sample rate must be positive");
    assert!(
        center_hz >= 0.0 && center_hz < sample_rate / 2.0,
        "center frequency must lie in [0, Nyquist)"
    );
    if samples.is_empty() {
        return Vec::new();
    }
    let mut spec = fft::fft_real(samples, samples.len());
    twist_group_delay(&mut spec, sample_rate, group_delay_s, center_hz);
    spectrum_to_signal(spec)
}

/// Generates the full-length, ungated noise pair for `spec`: steady-state
/// circular buffers whose spectra are exactly zero outside the passband.
/// The gated token returned by [`gen_bandpass_noise`] consists of the first
/// `duration x sample_rate` samples of this pair, ramped. Exposed separately
/// so spectral and level properties can be verified without gating effects.
pub fn gen_ungated_noise_pair(spec: &NoiseSpec, rng: &mut impl Rng) -> Result<StereoSignal> {
    spec.validate()?;
    let n = spec.gated_len();
    let d = spec.delay_samples()?;
    // Headroom past the gated token: the interaural delay plus a fixed 8 ms
    // guard so windows never wrap around the circular buffer.
    let guard = (0.008 * spec.sample_rate).round() as usize;
    let n_fft = fft::next_pow2(n + d.max(guard));

    let df = spec.sample_rate / n_fft as f64;
    let f_lo = spec.center_hz - spec.bandwidth_hz / 2.0;
    let f_hi = spec.center_hz + spec.bandwidth_hz / 2.0;
    // Band-edge bins are part of the passband; the epsilon absorbs float
    // rounding when an edge lands exactly on a bin. DC is never drawn.
    let k_lo = ((f_lo / df - 1e-9).ceil() as usize).max(1);
    let k_hi = ((f_hi / df + 1e-9).floor() as usize).min(n_fft / 2 - 1);
    if k_lo > k_hi {
        return Err(Error::InvalidParameter {
            name: "bandwidth_hz",
            value: spec.bandwidth_hz,
            message: "passband contains no FFT bin at this duration",
        });
    }

    let target_rms = db_spl_to_rms(spec.overall_level_db());
    let (left, right) = match spec.mode {
        InterauralMode::Delayed { .. } => {
            let mut mother = spectrum_to_signal(draw_mother_spectrum(n_fft, k_lo, k_hi, rng));
            scale_to_rms(&mut mother, target_rms, "noise mother")?;
            // Left leads: left[i] = mother[i + d], right[i] = mother[i], so
            // the right ear is the left ear delayed by d samples.
            let left: Vec<f64> = (0..n_fft).map(|i| mother[(i + d) % n_fft]).collect();
            (left, mother)
        }
        InterauralMode::Uncorrelated => {
            let mut left = spectrum_to_signal(draw_mother_spectrum(n_fft, k_lo, k_hi, rng));
            let mut right = spectrum_to_signal(draw_mother_spectrum(n_fft, k_lo, k_hi, rng));
            scale_to_rms(&mut left, target_rms, "noise mother")?;
            scale_to_rms(&mut right, target_rms, "noise mother")?;
            (left, right)
        }
        InterauralMode::Correlated { rho, group_delay_s } => {
            let spec_a = draw_mother_spectrum(n_fft, k_lo, k_hi, rng);
            let spec_b = draw_mother_spectrum(n_fft, k_lo, k_hi, rng);
            let w = (1.0 - rho * rho).max(0.0).sqrt();
            let mut spec_r: Vec<Complex64> = spec_a
                .iter()
                .zip(&spec_b)
                .map(|(&a, &b)| rho * a + w * b)
                .collect();
            twist_group_delay(&mut spec_r, spec.sample_rate, group_delay_s, spec.center_hz);
            let mut left = spectrum_to_signal(spec_a);
            let mut right = spectrum_to_signal(spec_r);
            scale_to_rms(&mut left, target_rms, "noise mother")?;
            scale_to_rms(&mut right, target_rms, "noise mother")?;
            (left, right)
        }
    };
    Ok(StereoSignal::new(left, right, spec.sample_rate))
}

/// Generates one gated masker token.
pub fn gen_bandpass_noise(spec: &NoiseSpec, rng: &mut impl Rng) -> Result<StereoSignal> {
    let ungated = gen_ungated_noise_pair(spec, rng)?;
    let n = spec.gated_len();
    let mut token = StereoSignal::new(
        ungated.left[..n].to_vec(),
        ungated.right[..n].to_vec(),
        spec.sample_rate,
    );
    apply_raised_cosine_ramps(&mut token, spec.ramp_s);
    Ok(token)
}

/// Generates one gated tone token (sine starting at phase zero).
pub fn gen_tone(spec: &ToneSpec) -> Result<StereoSignal> {
    spec.validate()?;
    let n = (spec.duration_s * spec.sample_rate).round() as usize;
    let peak = db_spl_to_rms(spec.level_db) * std::f64::consts::SQRT_2;
    let step = 2.0 * std::f64::consts::PI * spec.freq_hz / spec.sample_rate;
    let left: Vec<f64> = (0..n).map(|i| peak * (step * i as f64).sin()).collect();
    let right = match spec.phase {
        TonePhase::Diotic => left.clone(),
        TonePhase::Antiphasic => left.iter().map(|&v| -v).collect(),
    };
    let mut tone = StereoSignal::new(left, right, spec.sample_rate);
    apply_raised_cosine_ramps(&mut tone, spec.ramp_s);
    Ok(tone)
}

/// Renders one observation interval: a fresh masker token, plus the tone
/// temporally centered in the masker when present.
pub fn assemble_interval(
    noise: &NoiseSpec,
    tone: Option<&ToneSpec>,
    rng: &mut impl Rng,
) -> Result<StereoSignal> {
    let mut interval = gen_bandpass_noise(noise, rng)?;
    if let Some(tone_spec) = tone {
        if tone_spec.sample_rate != noise.sample_rate {
            return Err(Error::InvalidParameter {
                name: "tone.sample_rate",
                value: tone_spec.sample_rate,
                message: "tone and masker must share one sample rate",
            });
        }
        if tone_spec.duration_s > noise.duration_s {
            return Err(Error::InvalidParameter {
                name: "tone.duration_s",
                value: tone_spec.duration_s,
                message: "tone must not outlast the masker",
            });
        }
        let tone_sig = gen_tone(tone_spec)?;
        let offset =
            ((noise.duration_s - tone_spec.duration_s) / 2.0 * noise.sample_rate).round() as usize;
        interval.add_at(&tone_sig, offset);
    }
    Ok(interval)
}
