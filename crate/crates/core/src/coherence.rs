//! Temporal coherence tooling.
//!
//! The interaural statistics of a delayed-noise masker are governed by the
//! complex coherence of the noise at the internal delay. This module
//! computes that coherence three ways:
//!
//! * [`gamma_from_psd`]: Wiener-Khinchin quadrature of an arbitrary
//!   one-sided power spectral density, normalized so `gamma(0) = 1`,
//! * [`effective_gamma`]: the same, for a flat passband seen through the
//!   model's input gammatone filter (the coherence that actually shapes the
//!   IPD statistics inside the model),
//! * [`measure_coherence`]: the empirical normalized cross-coherence of a
//!   rendered stereo token, for validating the first two against signals.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft;
use crate::periphery::{GammatoneFilter, PeripheryParams};
use crate::signal::StereoSignal;
use crate::stimgen::NoiseSpec;

/// Complex coherence evaluated on a set of lags.
#[derive(Debug, Clone, PartialEq)]
pub struct CoherenceFunction {
    pub lags_s: Vec<f64>,
    pub values: Vec<Complex64>,
}

impl CoherenceFunction {
    pub fn magnitudes(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm()).collect()
    }

    /// Value at the lag closest to `lag_s`.
    pub fn nearest(&self, lag_s: f64) -> Complex64 {
        let idx = self
            .lags_s
            .iter()
            .enumerate()
            .min_by(|a, b| {
                (a.1 - lag_s)
                    .abs()
                    .partial_cmp(&(b.1 - lag_s).abs())
                    .unwrap()
            })
            .expect("empty coherence function")
            .0;
        self.values[idx]
    }
}

/// Complex coherence of a stationary process with one-sided PSD samples
/// `(freqs, psd)` via Wiener-Khinchin:
/// `gamma(tau) = integral psd(f) e^{i 2 pi f tau} df / integral psd(f) df`,
/// trapezoid rule on the given grid. `gamma(0) = 1` holds exactly.
pub fn gamma_from_psd(freqs: &[f64], psd: &[f64], lags_s: &[f64]) -> Result<CoherenceFunction> {
    if freqs.len() != psd.len() {
        return Err(Error::LengthMismatch {
            context: "gamma_from_psd",
            left: freqs.len(),
            right: psd.len(),
        });
    }
    if freqs.len() < 2 {
        return Err(Error::InvalidParameter {
            name: "freqs",
            value: freqs.len() as f64,
            message: "need at least two grid points",
        });
    }
    for pair in freqs.windows(2) {
        if !(pair[1] > pair[0]) {
            return Err(Error::InvalidParameter {
                name: "freqs",
                value: pair[1],
                message: "grid must be strictly increasing",
            });
        }
    }
    if psd.iter().any(|&s| s < 0.0 || !s.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "psd",
            value: f64::NAN,
            message: "PSD values must be finite and nonnegative",
        });
    }

    let trapz = |values: &dyn Fn(usize) -> Complex64| -> Complex64 {
        let mut acc = Complex64::ZERO;
        for i in 0..freqs.len() - 1 {
            let df = freqs[i + 1] - freqs[i];
            acc += 0.5 * df * (values(i) + values(i + 1));
        }
        acc
    };
    let total = trapz(&|i| Complex64::new(psd[i], 0.0));
    if total.re <= 0.0 {
        return Err(Error::ZeroEnergy {
            context: "gamma_from_psd",
        });
    }

    let values = lags_s
        .iter()
        .map(|&tau| {
            let num = trapz(&|i| {
                psd[i] * Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * freqs[i] * tau)
            });
            num / total
        })
        .collect();
    Ok(CoherenceFunction {
        lags_s: lags_s.to_vec(),
        values,
    })
}

/// Coherence of the masker after the model's input gammatone: flat passband
/// PSD times `|H(f)|^2`, evaluated on a 0.25 Hz grid across the passband.
pub fn effective_gamma(
    noise: &NoiseSpec,
    periphery: &PeripheryParams,
    lags_s: &[f64],
) -> Result<CoherenceFunction> {
    let filter = GammatoneFilter::design(
        periphery.gt_order,
        periphery.center_hz,
        periphery.gt_erb_hz,
        noise.sample_rate,
    )?;
    let f_lo = noise.center_hz - noise.bandwidth_hz / 2.0;
    let f_hi = noise.center_hz + noise.bandwidth_hz / 2.0;
    if !(f_hi > f_lo) || f_lo < 0.0 || f_hi >= noise.sample_rate / 2.0 {
        return Err(Error::InvalidParameter {
            name: "bandwidth_hz",
            value: noise.bandwidth_hz,
            message: "passband must lie inside (0, Nyquist)",
        });
    }
    const DF: f64 = 0.25;
    let steps = ((f_hi - f_lo) / DF).ceil() as usize;
    let freqs: Vec<f64> = (0..=steps)
        .map(|i| f_lo + (f_hi - f_lo) * i as f64 / steps as f64)
        .collect();
    let psd: Vec<f64> = freqs
        .iter()
        .map(|&f| filter.response_at(f).norm_sqr())
        .collect();
    gamma_from_psd(&freqs, &psd, lags_s)
}

/// Empirical normalized cross-coherence of a stereo token:
/// `gamma(l) = sum_t aL(t) conj(aR(t + l)) / sqrt(sum |aL|^2 sum |aR|^2)`
/// on the analytic signals of the two channels. A positive lag compensates
/// a right-ear delay, so delayed-noise tokens peak at `+tau`. Lags are
/// rounded to whole samples. Intended for tokens much longer than the
/// largest lag; the normalization uses the full-token energies.
pub fn measure_coherence(signal: &StereoSignal, lags_s: &[f64]) -> Result<CoherenceFunction> {
    let n = signal.len();
    if n == 0 {
        return Err(Error::ZeroEnergy {
            context: "measure_coherence",
        });
    }
    let left = fft::analytic_signal(&signal.left);
    let right = fft::analytic_signal(&signal.right);
    let energy_l: f64 = left.iter().map(|v| v.norm_sqr()).sum();
    let energy_r: f64 = right.iter().map(|v| v.norm_sqr()).sum();
    if energy_l == 0.0 || energy_r == 0.0 {
        return Err(Error::ZeroEnergy {
            context: "measure_coherence",
        });
    }
    let norm = (energy_l * energy_r).sqrt();

    let mut values = Vec::with_capacity(lags_s.len());
    for &lag_s in lags_s {
        let lag = (lag_s * signal.sample_rate).round() as i64;
        if lag.unsigned_abs() as usize >= n {
            return Err(Error::InvalidParameter {
                name: "lag_s",
                value: lag_s,
                message: "lag exceeds the token length",
            });
        }
        let mut acc = Complex64::ZERO;
        if lag >= 0 {
            let l = lag as usize;
            for t in 0..n - l {
                acc += left[t] * right[t + l].conj();
            }
        } else {
            let l = (-lag) as usize;
            for t in l..n {
                acc += left[t] * right[t - l].conj();
            }
        }
        values.push(acc / norm);
    }
    Ok(CoherenceFunction {
        lags_s: lags_s.to_vec(),
        values,
    })
}
