//! Room impulse response provisioning.
//!
//! Two paths: load a measured RIR corpus from a list of WAV files, or
//! synthesize stochastic RIRs with a controllable RT60. The synthesizer
//! shapes zero-mean noise with an exponential envelope that reaches -60 dB
//! at `rt60_s`, places a unit direct-path impulse, and sets the reverberant
//! energy a configurable number of dB below the direct energy.

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::wav;

#[derive(Debug, Error)]
pub enum RirError {
    #[error("RIR list {path}: {source}")]
    ListIo {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("RIR list {path}: no usable RIRs ({failed} of {total} entries failed to load)")]
    EmptySet {
        path: PathBuf,
        failed: usize,
        total: usize,
    },
    #[error("invalid RIR config: {0}")]
    InvalidConfig(String),
    #[error("RIR provider is empty")]
    EmptyProvider,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RirSource {
    Measured,
    Synthetic,
}

#[derive(Debug, Clone)]
pub struct RirMeta {
    pub source: RirSource,
    /// Configured decay time; only set for synthetic RIRs.
    pub rt60_s: Option<f64>,
    /// Sample offset of the direct path.
    pub direct_index: usize,
    /// Stable identifier for provenance records.
    pub id: String,
}

/// An impulse response plus synthesis/source metadata.
#[derive(Debug, Clone)]
pub struct Rir {
    pub taps: Vec<f64>,
    pub sample_rate: u32,
    pub meta: RirMeta,
}

impl Rir {
    pub fn len(&self) -> usize {
        self.taps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taps.is_empty()
    }

    /// A unit impulse (anechoic) response.
    pub fn unit_impulse(sample_rate: u32) -> Rir {
        Rir {
            taps: vec![1.0],
            sample_rate,
            meta: RirMeta {
                source: RirSource::Synthetic,
                rt60_s: None,
                direct_index: 0,
                id: "impulse".to_string(),
            },
        }
    }
}

/// Parameters for one synthetic RIR.
#[derive(Debug, Clone, Copy)]
pub struct SyntheticRirConfig {
    /// Decay time to -60 dB, in seconds. Valid range [0.05, 2.0].
    pub rt60_s: f64,
    /// Delay of the direct-path impulse, in seconds.
    pub direct_delay_s: f64,
    /// Reverberant energy relative to the direct tap, in dB below it.
    /// `f64::INFINITY` yields a pure impulse.
    pub direct_to_reverb_db: f64,
    /// Total response length in seconds (measured from the direct path);
    /// must be at least `rt60_s / 2`.
    pub length_s: f64,
    pub sample_rate: u32,
}

impl SyntheticRirConfig {
    pub fn validate(&self) -> Result<(), RirError> {
        let fail = |msg: String| Err(RirError::InvalidConfig(msg));
        if !(0.05..=2.0).contains(&self.rt60_s) {
            return fail(format!("rt60_s {} outside [0.05, 2.0]", self.rt60_s));
        }
        if self.length_s < self.rt60_s / 2.0 {
            return fail(format!(
                "length_s {} shorter than rt60_s/2 = {}",
                self.length_s,
                self.rt60_s / 2.0
            ));
        }
        if !(self.direct_delay_s >= 0.0) {
            return fail(format!("direct_delay_s {} negative", self.direct_delay_s));
        }
        if self.direct_to_reverb_db.is_nan() {
            return fail("direct_to_reverb_db is NaN".to_string());
        }
        if self.sample_rate == 0 {
            return fail("sample_rate is zero".to_string());
        }
        Ok(())
    }
}

/// Synthesize a stochastic RIR. Deterministic for a given `(cfg, seed)`.
pub fn synth_rir(cfg: &SyntheticRirConfig, seed: u64) -> Result<Rir, RirError> {
    cfg.validate()?;
    let sr = cfg.sample_rate as f64;
    let direct = (cfg.direct_delay_s * sr).round() as usize;
    let len = direct + (cfg.length_s * sr).round().max(1.0) as usize;

    let mut taps = vec![0.0f64; len];
    taps[direct] = 1.0;

    if cfg.direct_to_reverb_db.is_finite() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // The power envelope exp(-6 ln10 t / rt60) puts the energy decay at
        // -60 dB when t = rt60; the amplitude multiplier is its square
        // root, half the exponent.
        let decay = 3.0 * std::f64::consts::LN_10 / cfg.rt60_s;
        let mut energy = 0.0;
        for (i, tap) in taps.iter_mut().enumerate().skip(direct + 1) {
            let t = (i - direct) as f64 / sr;
            let v = gaussian(&mut rng) * (-decay * t).exp();
            energy += v * v;
            *tap = v;
        }
        if energy > 0.0 {
            // Direct tap energy is 1, so the reverberant part gets 10^(-dtr/10).
            let scale = (10f64.powf(-cfg.direct_to_reverb_db / 10.0) / energy).sqrt();
            for tap in taps.iter_mut().skip(direct + 1) {
                *tap *= scale;
            }
        }
    }

    Ok(Rir {
        taps,
        sample_rate: cfg.sample_rate,
        meta: RirMeta {
            source: RirSource::Synthetic,
            rt60_s: Some(cfg.rt60_s),
            direct_index: direct,
            id: format!(
                "synth:rt60={:.4};dtr={};delay={:.4};len={:.4};seed={}",
                cfg.rt60_s, cfg.direct_to_reverb_db, cfg.direct_delay_s, cfg.length_s, seed
            ),
        },
    })
}

/// Standard-normal draw via Box-Muller; keeps us off any particular
/// distribution crate's version treadmill.
fn gaussian(rng: &mut impl Rng) -> f64 {
    let u1: f64 = loop {
        let u: f64 = rng.gen();
        if u > 0.0 {
            break u;
        }
    };
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// A measured RIR set plus any per-file load failures.
#[derive(Debug)]
pub struct RirSet {
    pub rirs: Vec<Rir>,
    /// Human-readable messages for entries that failed to decode.
    pub failures: Vec<String>,
}

/// Load every WAV named in a list file (one path per line, `#` comments and
/// blank lines ignored). Each RIR is peak-normalized to 1.0 and its direct
/// index set to the maximum-magnitude tap. Decode failures are collected,
/// not fatal, but an empty result is an error.
pub fn load_rir_set(list_path: impl AsRef<Path>) -> Result<RirSet, RirError> {
    let list_path = list_path.as_ref();
    let text = fs::read_to_string(list_path).map_err(|source| RirError::ListIo {
        path: list_path.to_path_buf(),
        source,
    })?;
    let entries: Vec<&str> = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .collect();

    let mut rirs = Vec::new();
    let mut failures = Vec::new();
    for entry in &entries {
        match wav::read_wav(entry) {
            Ok(clip) => {
                if clip.is_empty() {
                    failures.push(format!("{entry}: empty RIR"));
                    continue;
                }
                let (direct_index, peak) = clip
                    .samples
                    .iter()
                    .enumerate()
                    .map(|(i, x)| (i, x.abs()))
                    .fold((0, 0.0f64), |best, cur| if cur.1 > best.1 { cur } else { best });
                if peak == 0.0 {
                    failures.push(format!("{entry}: all-zero RIR"));
                    continue;
                }
                rirs.push(Rir {
                    taps: clip.samples.iter().map(|x| x / peak).collect(),
                    sample_rate: clip.sample_rate,
                    meta: RirMeta {
                        source: RirSource::Measured,
                        rt60_s: None,
                        direct_index,
                        id: format!("measured:{entry}"),
                    },
                });
            }
            Err(e) => failures.push(e.to_string()),
        }
    }
    if rirs.is_empty() {
        return Err(RirError::EmptySet {
            path: list_path.to_path_buf(),
            failed: failures.len(),
            total: entries.len(),
        });
    }
    for f in &failures {
        log::warn!("load_rir_set: {f}");
    }
    Ok(RirSet { rirs, failures })
}

/// Uniform ranges for randomized synthetic RIRs.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticRirRanges {
    #[serde(default = "default_rt60_range")]
    pub rt60_s: [f64; 2],
    #[serde(default = "default_delay_range")]
    pub direct_delay_s: [f64; 2],
    #[serde(default = "default_dtr_range")]
    pub direct_to_reverb_db: [f64; 2],
    /// Response length as a multiple of the drawn rt60 (>= 0.5).
    #[serde(default = "default_length_over_rt60")]
    pub length_over_rt60: f64,
    /// 0 means "inherit the pipeline sample rate"; it must be resolved to
    /// a real rate before validation.
    #[serde(default)]
    pub sample_rate: u32,
}

impl Default for SyntheticRirRanges {
    fn default() -> SyntheticRirRanges {
        SyntheticRirRanges {
            rt60_s: default_rt60_range(),
            direct_delay_s: default_delay_range(),
            direct_to_reverb_db: default_dtr_range(),
            length_over_rt60: default_length_over_rt60(),
            sample_rate: 0,
        }
    }
}

fn default_rt60_range() -> [f64; 2] {
    [0.1, 0.7]
}
fn default_delay_range() -> [f64; 2] {
    [0.001, 0.015]
}
fn default_dtr_range() -> [f64; 2] {
    [0.0, 15.0]
}
fn default_length_over_rt60() -> f64 {
    1.0
}

impl SyntheticRirRanges {
    pub fn validate(&self) -> Result<(), RirError> {
        let check = |name: &str, r: [f64; 2]| {
            if r[0] > r[1] || !r[0].is_finite() || !r[1].is_finite() {
                Err(RirError::InvalidConfig(format!("bad {name} range {r:?}")))
            } else {
                Ok(())
            }
        };
        check("rt60_s", self.rt60_s)?;
        check("direct_delay_s", self.direct_delay_s)?;
        check("direct_to_reverb_db", self.direct_to_reverb_db)?;
        if !(0.05..=2.0).contains(&self.rt60_s[0]) || !(0.05..=2.0).contains(&self.rt60_s[1]) {
            return Err(RirError::InvalidConfig(format!(
                "rt60_s range {:?} outside [0.05, 2.0]",
                self.rt60_s
            )));
        }
        if self.length_over_rt60 < 0.5 {
            return Err(RirError::InvalidConfig(format!(
                "length_over_rt60 {} below 0.5",
                self.length_over_rt60
            )));
        }
        if self.sample_rate == 0 {
            return Err(RirError::InvalidConfig("sample_rate is zero".to_string()));
        }
        Ok(())
    }
}

/// Where `pick_rir` draws from: a measured set or synthesis ranges.
#[derive(Debug)]
pub enum RirProvider {
    Measured(Vec<Rir>),
    Synthetic(SyntheticRirRanges),
}

/// Draw one RIR. Measured sets are sampled uniformly; synthetic configs are
/// drawn uniformly from the ranges and then synthesized with a seed taken
/// from `rng`, so the whole draw is reproducible.
pub fn pick_rir(provider: &RirProvider, rng: &mut impl Rng) -> Result<Rir, RirError> {
    match provider {
        RirProvider::Measured(rirs) => {
            if rirs.is_empty() {
                return Err(RirError::EmptyProvider);
            }
            Ok(rirs[rng.gen_range(0..rirs.len())].clone())
        }
        RirProvider::Synthetic(ranges) => {
            ranges.validate()?;
            let rt60_s = rng.gen_range(ranges.rt60_s[0]..=ranges.rt60_s[1]);
            let direct_delay_s =
                rng.gen_range(ranges.direct_delay_s[0]..=ranges.direct_delay_s[1]);
            let direct_to_reverb_db =
                rng.gen_range(ranges.direct_to_reverb_db[0]..=ranges.direct_to_reverb_db[1]);
            let cfg = SyntheticRirConfig {
                rt60_s,
                direct_delay_s,
                direct_to_reverb_db,
                length_s: rt60_s * ranges.length_over_rt60,
                sample_rate: ranges.sample_rate,
            };
            synth_rir(&cfg, rng.gen())
        }
    }
}

/// Estimate T60 from the Schroeder backward integral of the tail after the
/// direct path, fitting the -5 dB to -25 dB stretch of the decay curve.
/// Returns `None` when the response has no measurable decay range.
pub fn schroeder_t60(rir: &Rir) -> Option<f64> {
    let tail = &rir.taps[(rir.meta.direct_index + 1).min(rir.taps.len())..];
    if tail.len() < 8 {
        return None;
    }
    // Backward-integrated energy decay curve.
    let mut edc = vec![0.0f64; tail.len()];
    let mut acc = 0.0;
    for (i, &x) in tail.iter().enumerate().rev() {
        acc += x * x;
        edc[i] = acc;
    }
    let total = edc[0];
    if total <= 0.0 {
        return None;
    }
    let db: Vec<f64> = edc
        .iter()
        .map(|&e| 10.0 * (e / total).max(1e-30).log10())
        .collect();

    let start = db.iter().position(|&d| d <= -5.0)?;
    let end = db.iter().position(|&d| d <= -25.0)?;
    if end <= start + 1 {
        return None;
    }

    // Least-squares slope of dB vs time over [start, end].
    let sr = rir.sample_rate as f64;
    let n = (end - start + 1) as f64;
    let (mut st, mut sd, mut stt, mut std_) = (0.0, 0.0, 0.0, 0.0);
    for i in start..=end {
        let t = i as f64 / sr;
        st += t;
        sd += db[i];
        stt += t * t;
        std_ += t * db[i];
    }
    let denom = n * stt - st * st;
    if denom == 0.0 {
        return None;
    }
    let slope = (n * std_ - st * sd) / denom; // dB per second, negative
    if slope >= 0.0 {
        return None;
    }
    Some(-60.0 / slope)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audio::AudioClip;
    use crate::wav::{write_wav, WavEncoding};
    use std::io::Write as _;

    fn test_cfg(rt60_s: f64) -> SyntheticRirConfig {
        SyntheticRirConfig {
            rt60_s,
            direct_delay_s: 0.005,
            direct_to_reverb_db: 3.0,
            length_s: rt60_s,
            sample_rate: 16000,
        }
    }

    #[test]
    fn synth_is_deterministic() {
        let cfg = test_cfg(0.3);
        let a = synth_rir(&cfg, 99).unwrap();
        let b = synth_rir(&cfg, 99).unwrap();
        assert_eq!(a.taps, b.taps);
        let c = synth_rir(&cfg, 100).unwrap();
        assert_ne!(a.taps, c.taps);
    }

    #[test]
    fn synth_infinite_dtr_is_pure_impulse() {
        let mut cfg = test_cfg(0.3);
        cfg.direct_to_reverb_db = f64::INFINITY;
        let rir = synth_rir(&cfg, 1).unwrap();
        let d = rir.meta.direct_index;
        assert_eq!(rir.taps[d], 1.0);
        assert!(rir.taps.iter().enumerate().all(|(i, &x)| i == d || x == 0.0));
    }

    #[test]
    fn synth_no_nan_and_expected_length() {
        let cfg = test_cfg(0.4);
        let rir = synth_rir(&cfg, 7).unwrap();
        let expect = (0.005f64 * 16000.0).round() as usize + (0.4f64 * 16000.0).round() as usize;
        assert_eq!(rir.len(), expect);
        assert!(rir.taps.iter().all(|x| x.is_finite()));
    }

    #[test]
    fn synth_reverb_energy_matches_dtr() {
        let cfg = test_cfg(0.5);
        let rir = synth_rir(&cfg, 3).unwrap();
        let d = rir.meta.direct_index;
        let reverb_energy: f64 = rir.taps[d + 1..].iter().map(|x| x * x).sum();
        let expect = 10f64.powf(-3.0 / 10.0);
        assert!((reverb_energy - expect).abs() < 1e-12);
    }

    #[test]
    fn synth_direct_tap_dominates() {
        let rir = synth_rir(&test_cfg(0.3), 11).unwrap();
        let d = rir.meta.direct_index;
        let max_reverb = rir.taps[d + 1..].iter().fold(0.0f64, |m, x| m.max(x.abs()));
        assert!(max_reverb < rir.taps[d]);
    }

    #[test]
    fn envelope_slope_matches_rt60() {
        // Window-RMS envelope slope between 0.1*rt60 and 0.9*rt60 should be
        // -60/rt60 dB/s. Fitted from the generated taps, not the formula.
        let rt60 = 0.5;
        let rir = synth_rir(&test_cfg(rt60), 42).unwrap();
        let sr = rir.sample_rate as f64;
        let d = rir.meta.direct_index;
        let win = (0.010 * sr) as usize;
        let tail = &rir.taps[d + 1..];
        let lo = (0.1 * rt60 * sr) as usize;
        let hi = (0.9 * rt60 * sr) as usize;
        let mut times = Vec::new();
        let mut dbs = Vec::new();
        let mut i = lo;
        while i + win <= hi.min(tail.len()) {
            let w = &tail[i..i + win];
            let rms = (w.iter().map(|x| x * x).sum::<f64>() / win as f64).sqrt();
            times.push((i + win / 2) as f64 / sr);
            dbs.push(20.0 * rms.log10());
            i += win;
        }
        assert!(times.len() > 10);
        let n = times.len() as f64;
        let st: f64 = times.iter().sum();
        let sd: f64 = dbs.iter().sum();
        let stt: f64 = times.iter().map(|t| t * t).sum();
        let std_: f64 = times.iter().zip(&dbs).map(|(t, d)| t * d).sum();
        let slope = (n * std_ - st * sd) / (n * stt - st * st);
        let expect = -60.0 / rt60;
        assert!(
            (slope - expect).abs() < 0.1 * expect.abs(),
            "slope {slope} vs expected {expect}"
        );
    }

    #[test]
    fn envelope_decays_monotonically_within_ripple() {
        let rir = synth_rir(&test_cfg(0.4), 5).unwrap();
        let sr = rir.sample_rate as f64;
        let d = rir.meta.direct_index;
        let win = (0.010 * sr) as usize;
        let tail = &rir.taps[d + 1..];
        let mut prev_db = f64::INFINITY;
        let mut i = 0;
        while i + win <= tail.len() {
            let w = &tail[i..i + win];
            let rms = (w.iter().map(|x| x * x).sum::<f64>() / win as f64).sqrt();
            let db = 20.0 * rms.log10();
            assert!(db <= prev_db + 1.0, "window at {i} rose by more than 1 dB");
            prev_db = db;
            i += win;
        }
    }

    #[test]
    fn schroeder_recovers_rt60() {
        for &rt60 in &[0.2, 0.4, 0.7] {
            let rir = synth_rir(&test_cfg(rt60), 17).unwrap();
            let t60 = schroeder_t60(&rir).unwrap();
            assert!(
                (t60 - rt60).abs() < 0.2 * rt60,
                "rt60 {rt60}: measured {t60}"
            );
        }
    }

    #[test]
    fn schroeder_none_for_impulse() {
        assert!(schroeder_t60(&Rir::unit_impulse(16000)).is_none());
    }

    #[test]
    fn load_set_normalizes_and_finds_direct() {
        let dir = tempfile::tempdir().unwrap();
        let p1 = dir.path().join("a.wav");
        write_wav(
            &AudioClip::new(vec![0.0, 0.0, 0.5, 0.125], 16000),
            &p1,
            WavEncoding::Float32,
        )
        .unwrap();
        let list = dir.path().join("rirs.txt");
        std::fs::write(&list, format!("{}\n", p1.display())).unwrap();

        let set = load_rir_set(&list).unwrap();
        assert_eq!(set.rirs.len(), 1);
        assert!(set.failures.is_empty());
        let rir = &set.rirs[0];
        assert_eq!(rir.meta.direct_index, 2);
        assert_eq!(rir.taps[2], 1.0);
        assert_eq!(rir.taps[3], 0.25);
    }

    #[test]
    fn load_set_collects_failures() {
        let dir = tempfile::tempdir().unwrap();
        let good = dir.path().join("good.wav");
        write_wav(
            &AudioClip::new(vec![0.0, 1.0], 16000),
            &good,
            WavEncoding::Float32,
        )
        .unwrap();
        let bad = dir.path().join("bad.wav");
        let mut f = std::fs::File::create(&bad).unwrap();
        f.write_all(b"garbage").unwrap();
        let list = dir.path().join("rirs.txt");
        std::fs::write(&list, format!("{}\n{}\n", good.display(), bad.display())).unwrap();

        let set = load_rir_set(&list).unwrap();
        assert_eq!(set.rirs.len(), 1);
        assert_eq!(set.failures.len(), 1);
    }

    #[test]
    fn load_set_empty_is_error() {
        let dir = tempfile::tempdir().unwrap();
        let list = dir.path().join("rirs.txt");
        std::fs::write(&list, "").unwrap();
        assert!(matches!(load_rir_set(&list), Err(RirError::EmptySet { .. })));
    }

    #[test]
    fn pick_measured_singleton() {
        use rand::SeedableRng;
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let provider = RirProvider::Measured(vec![Rir::unit_impulse(16000)]);
        for _ in 0..10 {
            let rir = pick_rir(&provider, &mut rng).unwrap();
            assert_eq!(rir.meta.id, "impulse");
        }
    }

    #[test]
    fn pick_measured_is_roughly_uniform() {
        use rand::SeedableRng;
        let mut rirs = Vec::new();
        for i in 0..4 {
            let mut r = Rir::unit_impulse(16000);
            r.meta.id = format!("rir{i}");
            rirs.push(r);
        }
        let provider = RirProvider::Measured(rirs);
        let mut rng = ChaCha8Rng::seed_from_u64(1234);
        let mut counts = [0usize; 4];
        for _ in 0..10_000 {
            let rir = pick_rir(&provider, &mut rng).unwrap();
            let i: usize = rir.meta.id[3..].parse().unwrap();
            counts[i] += 1;
        }
        for &c in &counts {
            assert!((c as i64 - 2500).abs() <= 200, "counts {counts:?}");
        }
    }

    #[test]
    fn pick_synthetic_degenerate_range() {
        use rand::SeedableRng;
        let ranges = SyntheticRirRanges {
            rt60_s: [0.3, 0.3],
            direct_delay_s: [0.005, 0.005],
            direct_to_reverb_db: [6.0, 6.0],
            length_over_rt60: 1.0,
            sample_rate: 16000,
        };
        let provider = RirProvider::Synthetic(ranges);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..5 {
            let rir = pick_rir(&provider, &mut rng).unwrap();
            assert_eq!(rir.meta.rt60_s, Some(0.3));
        }
    }

    #[test]
    fn pick_empty_measured_is_error() {
        use rand::SeedableRng;
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            pick_rir(&RirProvider::Measured(vec![]), &mut rng),
            Err(RirError::EmptyProvider)
        ));
    }

    #[test]
    fn pick_is_reproducible() {
        use rand::SeedableRng;
        let ranges = SyntheticRirRanges {
            rt60_s: [0.1, 0.7],
            direct_delay_s: [0.001, 0.015],
            direct_to_reverb_db: [0.0, 15.0],
            length_over_rt60: 1.0,
            sample_rate: 16000,
        };
        let provider = RirProvider::Synthetic(ranges);
        let a = pick_rir(&provider, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        let b = pick_rir(&provider, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        assert_eq!(a.taps, b.taps);
        assert_eq!(a.meta.id, b.meta.id);
    }
}
