//! Minimal monaural periphery applied independently to each ear.
//!
//! The chain per channel is
//!
//! ```text
//! input -> gammatone (order 4, ERB 79 Hz, complex) -> 2 Re{..}
//!       -> half-wave rectification -> power-law compression (^0.4)
//!       -> Butterworth lowpass (order 5, 770 Hz)
//!       -> temporal fine structure filter (gammatone order 2, ERB 167 Hz)
//!       -> complex output
//! ```
//!
//! The final complex signal carries the temporal fine structure whose
//! argument feeds the binaural stage. All filters are designed once per
//! parameter set and reused across intervals.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::signal::{AnalyticChannel, StereoSignal};

/// Front-end parameters. Defaults are the reference model configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeripheryParams {
    /// Center frequency of the analyzed channel in Hz.
    pub center_hz: f64,
    /// Order of the input gammatone filter.
    pub gt_order: usize,
    /// Equivalent rectangular bandwidth of the input gammatone in Hz.
    pub gt_erb_hz: f64,
    /// Exponent of the compressive haircell nonlinearity.
    pub compression: f64,
    /// Order of the haircell lowpass.
    pub lp_order: usize,
    /// Cutoff (-3 dB) of the haircell lowpass in Hz.
    pub lp_cutoff_hz: f64,
    /// Order of the temporal fine structure gammatone.
    pub tfs_order: usize,
    /// Equivalent rectangular bandwidth of the fine structure filter in Hz.
    pub tfs_bandwidth_hz: f64,
}

impl Default for PeripheryParams {
    fn default() -> Self {
        Self {
            center_hz: 500.0,
            gt_order: 4,
            gt_erb_hz: 79.0,
            compression: 0.4,
            lp_order: 5,
            lp_cutoff_hz: 770.0,
            tfs_order: 2,
            tfs_bandwidth_hz: 167.0,
        }
    }
}

/// Bandwidth scale of an order-`n` gammatone: `ERB = c_n * lambda` where
/// `lambda` is the one-sided pole bandwidth in Hz and
/// `c_n = sqrt(pi) * Gamma(n - 1/2) / Gamma(n)`.
fn erb_factor(order: usize) -> f64 {
    assert!(order >= 1, "gammatone order must be at least 1");
    // Gamma(n - 1/2) / Gamma(n) by downward recurrence from Gamma(1/2)/Gamma(1).
    let mut ratio = std::f64::consts::PI.sqrt();
    for k in 2..=order {
        ratio *= (k as f64 - 1.5) / (k as f64 - 1.0);
    }
    std::f64::consts::PI.sqrt() * ratio
}

/// Cascade of `order` identical complex one-pole sections,
/// `H(z) = ((1 - r) / (1 - p z^-1))^order` with `p = r e^{i theta_c}`.
/// Unit gain and zero phase at the center frequency by construction.
#[derive(Debug, Clone)]
pub struct GammatoneFilter {
    pole: Complex64,
    gain: f64,
    order: usize,
    sample_rate: f64,
}

impl GammatoneFilter {
    /// Designs the filter from its equivalent rectangular bandwidth. The
    /// analog relation `ERB = c_n * lambda` is used and holds for the
    /// discrete filter to well below one percent at audio rates (checked by
    /// the numeric-quadrature test below).
    pub fn design(order: usize, center_hz: f64, erb_hz: f64, sample_rate: f64) -> Result<Self> {
        let err = |name: &'static str, value: f64, message: &'static str| {
            Err(Error::InvalidParameter {
                name,
                value,
                message,
            })
        };
        if !(sample_rate > 0.0) || !sample_rate.is_finite() {
            return err("sample_rate", sample_rate, "must be positive");
        }
        if order == 0 {
            return err("order", order as f64, "must be at least 1");
        }
        if !(center_hz > 0.0) || center_hz >= sample_rate / 2.0 {
            return err("center_hz", center_hz, "must lie in (0, Nyquist)");
        }
        if !(erb_hz > 0.0) || !erb_hz.is_finite() {
            return err("erb_hz", erb_hz, "must be positive");
        }
        let lambda = erb_hz / erb_factor(order);
        let r = (-2.0 * std::f64::consts::PI * lambda / sample_rate).exp();
        let theta = 2.0 * std::f64::consts::PI * center_hz / sample_rate;
        Ok(Self {
            pole: Complex64::from_polar(r, theta),
            gain: (1.0 - r).powi(order as i32),
            order,
            sample_rate,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    /// Frequency response at `freq_hz`.
    pub fn response_at(&self, freq_hz: f64) -> Complex64 {
        let z_inv = Complex64::from_polar(
            1.0,
            -2.0 * std::f64::consts::PI * freq_hz / self.sample_rate,
        );
        let section = (Complex64::new(1.0, 0.0) - self.pole * z_inv).inv();
        self.gain * section.powi(self.order as i32)
    }

    /// Filters a real signal into the complex channel output.
    pub fn process_real(&self, input: &[f64]) -> Vec<Complex64> {
        let mut out: Vec<Complex64> = input.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        self.cascade_inplace(&mut out);
        out
    }

    /// Filters a complex signal (used when chaining complex stages).
    pub fn process_complex(&self, input: &[Complex64]) -> Vec<Complex64> {
        let mut out = input.to_vec();
        self.cascade_inplace(&mut out);
        out
    }

    fn cascade_inplace(&self, buf: &mut [Complex64]) {
        for _ in 0..self.order {
            let mut state = Complex64::ZERO;
            for v in buf.iter_mut() {
                state = *v + self.pole * state;
                *v = state;
            }
        }
        for v in buf.iter_mut() {
            *v *= self.gain;
        }
    }

    /// Equivalent rectangular bandwidth of the designed discrete filter,
    /// evaluated by quadrature of `|H(f)|^2` on `[0, Nyquist)`:
    /// `ERB = integral |H|^2 df / max |H|^2`.
    pub fn numeric_erb(&self, df: f64) -> f64 {
        assert!(df > 0.0);
        let nyquist = self.sample_rate / 2.0;
        let steps = (nyquist / df).floor() as usize;
        let mut power = 0.0;
        let mut peak = 0.0f64;
        for i in 0..steps {
            let f = (i as f64 + 0.5) * df;
            let h2 = self.response_at(f).norm_sqr();
            power += h2 * df;
            peak = peak.max(h2);
        }
        power / peak
    }
}

/// Direct form biquad section.
#[derive(Debug, Clone, Copy)]
struct Biquad {
    b0: f64,
    b1: f64,
    b2: f64,
    a1: f64,
    a2: f64,
}

impl Biquad {
    fn process_inplace(&self, buf: &mut [f64]) {
        let (mut x1, mut x2, mut y1, mut y2) = (0.0, 0.0, 0.0, 0.0);
        for v in buf.iter_mut() {
            let x0 = *v;
            let y0 = self.b0 * x0 + self.b1 * x1 + self.b2 * x2 - self.a1 * y1 - self.a2 * y2;
            x2 = x1;
            x1 = x0;
            y2 = y1;
            y1 = y0;
            *v = y0;
        }
    }

    fn response_at(&self, freq_hz: f64, sample_rate: f64) -> Complex64 {
        let z_inv = Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI * freq_hz / sample_rate);
        let num = Complex64::new(self.b0, 0.0) + self.b1 * z_inv + self.b2 * z_inv * z_inv;
        let den = Complex64::new(1.0, 0.0) + self.a1 * z_inv + self.a2 * z_inv * z_inv;
        num / den
    }
}

/// Butterworth lowpass of arbitrary order, bilinear transform with cutoff
/// prewarping, factored into biquads plus one first-order section for odd
/// orders. The -3 dB point lands exactly on the requested cutoff.
#[derive(Debug, Clone)]
pub struct ButterworthLowpass {
    sections: Vec<Biquad>,
    sample_rate: f64,
}

impl ButterworthLowpass {
    pub fn design(order: usize, cutoff_hz: f64, sample_rate: f64) -> Result<Self> {
        let err = |name: &'static str, value: f64, message: &'static str| {
            Err(Error::InvalidParameter {
                name,
                value,
                message,
            })
        };
        if !(sample_rate > 0.0) || !sample_rate.is_finite() {
            return err("sample_rate", sample_rate, "must be positive");
        }
        if order == 0 {
            return err("lp_order", order as f64, "must be at least 1");
        }
        if !(cutoff_hz > 0.0) || cutoff_hz >= sample_rate / 2.0 {
            return err("lp_cutoff_hz", cutoff_hz, "must lie in (0, Nyquist)");
        }
        let k = 2.0 * sample_rate;
        let wa = k * (std::f64::consts::PI * cutoff_hz / sample_rate).tan();
        let mut sections = Vec::new();
        // Conjugate analog pole pairs: s = wa * exp(i pi (2m + order + 1) / (2 order)),
        // taking one pole of each pair; an odd order adds the real pole s = -wa.
        for m in 0..order / 2 {
            let angle =
                std::f64::consts::PI * (2.0 * m as f64 + order as f64 + 1.0) / (2.0 * order as f64);
            let re = wa * angle.cos();
            // analog section wa^2 / (s^2 - 2 re s + wa^2), bilinear-transformed
            let a = -2.0 * re;
            let b = wa * wa;
            let a0 = k * k + a * k + b;
            sections.push(Biquad {
                b0: b / a0,
                b1: 2.0 * b / a0,
                b2: b / a0,
                a1: 2.0 * (b - k * k) / a0,
                a2: (k * k - a * k + b) / a0,
            });
        }
        if order % 2 == 1 {
            // analog wa / (s + wa) as a degenerate biquad
            let a0 = k + wa;
            sections.push(Biquad {
                b0: wa / a0,
                b1: wa / a0,
                b2: 0.0,
                a1: (wa - k) / a0,
                a2: 0.0,
            });
        }
        Ok(Self {
            sections,
            sample_rate,
        })
    }

    pub fn process_inplace(&self, buf: &mut [f64]) {
        for section in &self.sections {
            section.process_inplace(buf);
        }
    }

    pub fn response_at(&self, freq_hz: f64) -> Complex64 {
        self.sections
            .iter()
            .map(|s| s.response_at(freq_hz, self.sample_rate))
            .product()
    }
}

/// Designed front end for one ear (both ears share it).
#[derive(Debug, Clone)]
pub struct Periphery {
    input_filter: GammatoneFilter,
    lowpass: ButterworthLowpass,
    tfs_filter: GammatoneFilter,
    compression: f64,
    sample_rate: f64,
}

impl Periphery {
    pub fn new(params: &PeripheryParams, sample_rate: f64) -> Result<Self> {
        if !(params.compression > 0.0) || params.compression > 1.0 {
            return Err(Error::InvalidParameter {
                name: "compression",
                value: params.compression,
                message: "exponent must lie in (0, 1]",
            });
        }
        Ok(Self {
            input_filter: GammatoneFilter::design(
                params.gt_order,
                params.center_hz,
                params.gt_erb_hz,
                sample_rate,
            )?,
            lowpass: ButterworthLowpass::design(params.lp_order, params.lp_cutoff_hz, sample_rate)?,
            tfs_filter: GammatoneFilter::design(
                params.tfs_order,
                params.center_hz,
                params.tfs_bandwidth_hz,
                sample_rate,
            )?,
            compression: params.compression,
            sample_rate,
        })
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    /// Half-wave rectification followed by power-law compression.
    fn transduce(&self, x: f64) -> f64 {
        if x > 0.0 {
            x.powf(self.compression)
        } else {
            0.0
        }
    }

    /// Runs the full chain on one ear.
    pub fn process_channel(&self, input: &[f64]) -> AnalyticChannel {
        let filtered = self.input_filter.process_real(input);
        // 2 Re{..} restores the real band-passed waveform at full amplitude.
        let mut rectified: Vec<f64> = filtered
            .iter()
            .map(|v| self.transduce(2.0 * v.re))
            .collect();
        self.lowpass.process_inplace(&mut rectified);
        AnalyticChannel {
            samples: self.tfs_filter.process_real(&rectified),
            sample_rate: self.sample_rate,
        }
    }

    /// Runs both ears of a stereo signal. The signal must have been rendered
    /// at the sample rate the filters were designed for.
    pub fn process(&self, signal: &StereoSignal) -> Result<(AnalyticChannel, AnalyticChannel)> {
        if signal.sample_rate != self.sample_rate {
            return Err(Error::InvalidParameter {
                name: "sample_rate",
                value: signal.sample_rate,
                message: "signal sample rate differs from the designed filters",
            });
        }
        Ok((
            self.process_channel(&signal.left),
            self.process_channel(&signal.right),
        ))
    }
}
