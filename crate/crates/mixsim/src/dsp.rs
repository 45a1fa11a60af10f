//! Gain staging and convolution primitives used by the mixture pipeline.
//!
//! `snr_db` throughout means target power over interferer power in dB, so a
//! positive value makes the interferer quieter than the target.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use thiserror::Error;

use crate::audio::AudioClip;
use crate::rir::Rir;

#[derive(Debug, Error)]
pub enum DspError {
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("sample rate mismatch: {a} Hz vs {b} Hz")]
    SampleRateMismatch { a: u32, b: u32 },
    #[error("length mismatch: {a} vs {b} samples")]
    LengthMismatch { a: usize, b: usize },
    #[error("empty clip list")]
    EmptyList,
    #[error("empty kernel")]
    EmptyKernel,
}

/// Kernel length at and above which `convolve` switches to the FFT path.
pub const FFT_KERNEL_THRESHOLD: usize = 64;

/// Gain that scales `interferer` so the pair sits at `snr_db`:
/// g = (rms(target) / rms(interferer)) * 10^(-snr_db / 20).
pub fn snr_gain(target: &AudioClip, interferer: &AudioClip, snr_db: f64) -> Result<f64, DspError> {
    if target.sample_rate != interferer.sample_rate {
        return Err(DspError::SampleRateMismatch {
            a: target.sample_rate,
            b: interferer.sample_rate,
        });
    }
    let rms_t = target.rms();
    let rms_i = interferer.rms();
    if rms_t == 0.0 {
        return Err(DspError::Degenerate(
            "silent target, SNR undefined".to_string(),
        ));
    }
    if rms_i == 0.0 {
        return Err(DspError::Degenerate(
            "silent interferer, SNR undefined".to_string(),
        ));
    }
    Ok(rms_t / rms_i * 10f64.powf(-snr_db / 20.0))
}

/// Scale `interferer` so that 20*log10(rms(target)/rms(out)) = snr_db.
pub fn rescale_to_snr(
    target: &AudioClip,
    interferer: &AudioClip,
    snr_db: f64,
) -> Result<AudioClip, DspError> {
    let g = snr_gain(target, interferer, snr_db)?;
    Ok(interferer.scaled(g))
}

/// Sample-wise sum with a shared anti-clipping gain.
///
/// If the raw sum's peak exceeds `peak_ceiling` the gain is
/// `peak_ceiling / peak`, else 1.0. The output is computed by summing the
/// *individually scaled* clips in list order, so a caller that applies the
/// returned gain to each component and adds them in the same order gets a
/// bit-identical reconstruction of the mixture.
pub fn sum_and_rescale(
    clips: &[AudioClip],
    peak_ceiling: f64,
) -> Result<(AudioClip, f64), DspError> {
    let first = clips.first().ok_or(DspError::EmptyList)?;
    for c in clips {
        if c.sample_rate != first.sample_rate {
            return Err(DspError::SampleRateMismatch {
                a: first.sample_rate,
                b: c.sample_rate,
            });
        }
        if c.len() != first.len() {
            return Err(DspError::LengthMismatch {
                a: first.len(),
                b: c.len(),
            });
        }
    }

    let n = first.len();
    let mut sum = vec![0.0f64; n];
    for c in clips {
        for (acc, &x) in sum.iter_mut().zip(&c.samples) {
            *acc += x;
        }
    }
    let peak = sum.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if peak <= peak_ceiling {
        return Ok((AudioClip::new(sum, first.sample_rate), 1.0));
    }

    let gain = peak_ceiling / peak;
    let mut out = vec![0.0f64; n];
    for c in clips {
        for (acc, &x) in out.iter_mut().zip(&c.samples) {
            *acc += x * gain;
        }
    }
    Ok((AudioClip::new(out, first.sample_rate), gain))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConvolveMode {
    /// Output length N + K - 1.
    Full,
    /// Output truncated to the signal length N; direct-path delay preserved.
    SameLength,
}

/// Linear convolution of a signal with an impulse response. Dispatches to
/// the direct form below `FFT_KERNEL_THRESHOLD` taps and overlap-add FFT at
/// or above it; the two paths agree within 1e-6 relative L2.
pub fn convolve(signal: &AudioClip, kernel: &Rir, mode: ConvolveMode) -> Result<AudioClip, DspError> {
    if signal.sample_rate != kernel.sample_rate {
        return Err(DspError::SampleRateMismatch {
            a: signal.sample_rate,
            b: kernel.sample_rate,
        });
    }
    if kernel.is_empty() {
        return Err(DspError::EmptyKernel);
    }
    let full = if kernel.len() < FFT_KERNEL_THRESHOLD {
        convolve_direct(&signal.samples, &kernel.taps)
    } else {
        convolve_fft(&signal.samples, &kernel.taps)
    };
    let samples = match mode {
        ConvolveMode::Full => full,
        ConvolveMode::SameLength => {
            let mut s = full;
            s.truncate(signal.len());
            s
        }
    };
    Ok(AudioClip::new(samples, signal.sample_rate))
}

/// Direct-form O(N*K) convolution; the reference the FFT path is checked
/// against.
pub fn convolve_direct(signal: &[f64], kernel: &[f64]) -> Vec<f64> {
    if signal.is_empty() || kernel.is_empty() {
        return Vec::new();
    }
    let mut out = vec![0.0f64; signal.len() + kernel.len() - 1];
    for (i, &s) in signal.iter().enumerate() {
        if s == 0.0 {
            continue;
        }
        for (j, &k) in kernel.iter().enumerate() {
            out[i + j] += s * k;
        }
    }
    out
}

/// Overlap-add FFT convolution with a block of at least 4x the kernel
/// length, rounded up to a power of two.
pub fn convolve_fft(signal: &[f64], kernel: &[f64]) -> Vec<f64> {
    if signal.is_empty() || kernel.is_empty() {
        return Vec::new();
    }
    let out_len = signal.len() + kernel.len() - 1;
    let fft_len = (4 * kernel.len()).next_power_of_two();
    let block = fft_len - kernel.len() + 1;

    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(fft_len);
    let inv = planner.plan_fft_inverse(fft_len);

    let mut kernel_spec: Vec<Complex<f64>> = kernel
        .iter()
        .map(|&x| Complex::new(x, 0.0))
        .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
        .take(fft_len)
        .collect();
    fwd.process(&mut kernel_spec);

    let norm = 1.0 / fft_len as f64;
    let mut out = vec![0.0f64; out_len];
    let mut buf = vec![Complex::new(0.0, 0.0); fft_len];
    for (chunk_idx, chunk) in signal.chunks(block).enumerate() {
        for s in buf.iter_mut() {
            *s = Complex::new(0.0, 0.0);
        }
        for (s, &x) in buf.iter_mut().zip(chunk) {
            *s = Complex::new(x, 0.0);
        }
        fwd.process(&mut buf);
        for (s, k) in buf.iter_mut().zip(&kernel_spec) {
            *s *= k;
        }
        inv.process(&mut buf);
        let offset = chunk_idx * block;
        for (i, s) in buf.iter().enumerate() {
            if let Some(o) = out.get_mut(offset + i) {
                *o += s.re * norm;
            }
        }
    }
    out
}
