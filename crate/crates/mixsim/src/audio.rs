//! Mono audio buffers and basic sample-level measurements.

/// A mono audio buffer. Samples are nominally in `[-1, 1]` but nothing
/// enforces that until export time; intermediate sums may exceed it.
///
/// All DSP in this crate operates on `f64` samples so that gain and SNR
/// bookkeeping survives long processing chains without drift.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

impl AudioClip {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Self {
        assert!(sample_rate > 0, "sample rate must be positive");
        Self {
            samples,
            sample_rate,
        }
    }

    /// All-zero clip of `len` samples.
    pub fn silence(len: usize, sample_rate: u32) -> Self {
        Self::new(vec![0.0; len], sample_rate)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    /// Root-mean-square amplitude, `sqrt(mean(x^2))`. Zero for an empty clip.
    pub fn rms(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        let sum_sq: f64 = self.samples.iter().map(|x| x * x).sum();
        (sum_sq / self.samples.len() as f64).sqrt()
    }

    /// Largest absolute sample value. Zero for an empty clip.
    pub fn peak(&self) -> f64 {
        self.samples.iter().fold(0.0f64, |m, x| m.max(x.abs()))
    }

    /// New clip with every sample multiplied by `gain`.
    pub fn scaled(&self, gain: f64) -> AudioClip {
        AudioClip {
            samples: self.samples.iter().map(|x| x * gain).collect(),
            sample_rate: self.sample_rate,
        }
    }

    /// First `len` samples (start-aligned). `len` must not exceed the clip.
    pub fn truncated(&self, len: usize) -> AudioClip {
        assert!(len <= self.samples.len());
        AudioClip {
            samples: self.samples[..len].to_vec(),
            sample_rate: self.sample_rate,
        }
    }

    /// Clip extended to `len` samples with trailing zeros.
    pub fn zero_padded(&self, len: usize) -> AudioClip {
        assert!(len >= self.samples.len());
        let mut samples = self.samples.clone();
        samples.resize(len, 0.0);
        AudioClip {
            samples,
            sample_rate: self.sample_rate,
        }
    }

    /// Cyclically repeat or truncate the clip to exactly `len` samples.
    pub fn tiled(&self, len: usize) -> AudioClip {
        assert!(!self.samples.is_empty());
        let samples = self
            .samples
            .iter()
            .cycle()
            .take(len)
            .copied()
            .collect();
        AudioClip {
            samples,
            sample_rate: self.sample_rate,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rms_unit_square_wave() {
        let clip = AudioClip::new(vec![1.0, -1.0, 1.0, -1.0], 16000);
        assert_eq!(clip.rms(), 1.0);
    }

    #[test]
    fn rms_silence() {
        let clip = AudioClip::new(vec![0.0, 0.0, 0.0], 16000);
        assert_eq!(clip.rms(), 0.0);
    }

    #[test]
    fn rms_hand_computed() {
        // mean square of [3, 4] is 12.5
        let clip = AudioClip::new(vec![3.0, 4.0], 16000);
        assert!((clip.rms() - 12.5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn peak_is_max_abs() {
        let clip = AudioClip::new(vec![0.25, -0.75, 0.5], 8000);
        assert_eq!(clip.peak(), 0.75);
    }

    #[test]
    fn tiled_repeats_cyclically() {
        let clip = AudioClip::new(vec![1.0, 2.0], 16000);
        assert_eq!(clip.tiled(5).samples, vec![1.0, 2.0, 1.0, 2.0, 1.0]);
        assert_eq!(clip.tiled(1).samples, vec![1.0]);
    }

    #[test]
    fn truncate_and_pad() {
        let clip = AudioClip::new(vec![1.0, 2.0, 3.0], 16000);
        assert_eq!(clip.truncated(2).samples, vec![1.0, 2.0]);
        assert_eq!(clip.zero_padded(4).samples, vec![1.0, 2.0, 3.0, 0.0]);
    }
}
