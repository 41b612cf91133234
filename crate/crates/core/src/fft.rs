//! Thin FFT helpers over rustfft with a per-thread plan cache.

use std::cell::RefCell;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftDirection, FftPlanner};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(len: usize, direction: FftDirection) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| match direction {
        FftDirection::Forward => p.borrow_mut().plan_fft_forward(len),
        FftDirection::Inverse => p.borrow_mut().plan_fft_inverse(len),
    })
}

/// In-place forward DFT (unnormalized).
pub fn fft_inplace(buf: &mut [Complex64]) {
    plan(buf.len(), FftDirection::Forward).process(buf);
}

/// In-place inverse DFT, normalized by 1/N so that `ifft(fft(x)) == x`.
pub fn ifft_inplace(buf: &mut [Complex64]) {
    plan(buf.len(), FftDirection::Inverse).process(buf);
    let scale = 1.0 / buf.len() as f64;
    for v in buf.iter_mut() {
        *v *= scale;
    }
}

/// Forward DFT of a real signal, zero-padded to `len`.
pub fn fft_real(signal: &[f64], len: usize) -> Vec<Complex64> {
    assert!(len >= signal.len(), "fft length shorter than signal");
    let mut buf = vec![Complex64::ZERO; len];
    for (b, &x) in buf.iter_mut().zip(signal) {
        b.re = x;
    }
    fft_inplace(&mut buf);
    buf
}

/// Discrete analytic signal: positive frequencies doubled, negative zeroed,
/// DC and Nyquist kept. The real part of the result equals the input.
pub fn analytic_signal(signal: &[f64]) -> Vec<Complex64> {
    let n = signal.len();
    assert!(n > 1, "analytic signal needs at least two samples");
    let mut buf = fft_real(signal, n);
    let half = n / 2;
    for (k, v) in buf.iter_mut().enumerate() {
        if k == 0 || (n % 2 == 0 && k == half) {
            // keep
        } else if k < half || (n % 2 == 1 && k == half) {
            *v *= 2.0;
        } else {
            *v = Complex64::ZERO;
        }
    }
    ifft_inplace(&mut buf);
    buf
}

/// Smallest power of two >= n.
pub fn next_pow2(n: usize) -> usize {
    n.next_power_of_two()
}

/// Single-bin DTFT of a real signal at an arbitrary frequency (Goertzel-style
/// direct sum). Used where FFT bin centers do not hit the frequency exactly.
pub fn dtft_at(signal: &[f64], freq_hz: f64, sample_rate: f64) -> Complex64 {
    let w = -2.0 * std::f64::consts::PI * freq_hz / sample_rate;
    let step = Complex64::from_polar(1.0, w);
    let mut phasor = Complex64::new(1.0, 0.0);
    let mut acc = Complex64::ZERO;
    for &x in signal {
        acc += phasor * x;
        phasor *= step;
    }
    acc
}
