//! Pipeline configuration, deserialized from a JSON document.
//!
//! Every knob has a default, so `{}` is a valid config: two speakers, SNR
//! uniform in [-5, 5] dB, no noise, no reverb, clean enrollment, 16 kHz.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::PathBuf;

use crate::rir::SyntheticRirRanges;

use super::SimError;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    /// Total speakers per mixture: one target plus n_speakers - 1
    /// interferers.
    pub n_speakers: usize,
    /// Per-interferer SNR range in dB, target power over interferer power.
    pub snr_range_db: [f64; 2],
    pub noise: NoiseConfig,
    pub reverb: ReverbConfig,
    pub enroll: EnrollConfig,
    /// Anti-clipping ceiling applied to the speech sum.
    pub peak_ceiling: f64,
    pub sample_rate: u32,
    pub length_policy: LengthPolicy,
    /// Stream seed; example i is a pure function of (seed, i).
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> SimConfig {
        SimConfig {
            n_speakers: 2,
            snr_range_db: [-5.0, 5.0],
            noise: NoiseConfig::default(),
            reverb: ReverbConfig::default(),
            enroll: EnrollConfig::default(),
            peak_ceiling: 0.9,
            sample_rate: 16000,
            length_policy: LengthPolicy::TruncateToShortest,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseConfig {
    pub enabled: bool,
    /// SNR of the pre-noise speech mixture over the added noise, in dB.
    pub snr_range_db: [f64; 2],
    /// TSV catalog (utt_id, spk_id, path) of noise clips.
    pub noise_catalog: Option<PathBuf>,
}

impl Default for NoiseConfig {
    fn default() -> NoiseConfig {
        NoiseConfig {
            enabled: false,
            snr_range_db: [5.0, 25.0],
            noise_catalog: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReverbConfig {
    pub enabled: bool,
    /// Per-source probability of convolving with a freshly drawn RIR.
    pub probability: f64,
    pub provider: RirProviderConfig,
}

impl Default for ReverbConfig {
    fn default() -> ReverbConfig {
        ReverbConfig {
            enabled: false,
            probability: 1.0,
            provider: RirProviderConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RirProviderConfig {
    /// WAV paths listed one per line.
    Measured { list: PathBuf },
    /// Randomized synthesis; a sample_rate of 0 inherits the pipeline
    /// rate.
    Synthetic {
        #[serde(flatten)]
        ranges: SyntheticRirRanges,
    },
}

impl Default for RirProviderConfig {
    fn default() -> RirProviderConfig {
        RirProviderConfig::Synthetic {
            ranges: SyntheticRirRanges::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnrollConfig {
    /// Probability of corrupting the enrollment clip with noise or reverb.
    pub corrupt_probability: f64,
}

impl Default for EnrollConfig {
    fn default() -> EnrollConfig {
        EnrollConfig {
            corrupt_probability: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LengthPolicy {
    /// Cut every source to the shortest, aligned at sample 0.
    TruncateToShortest,
    /// Zero-pad every source at the end to the longest.
    PadToLongest,
}

impl SimConfig {
    pub fn from_json(text: &str) -> Result<SimConfig, SimError> {
        let cfg: SimConfig = serde_json::from_str(text)
            .map_err(|e| SimError::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let fail = |msg: String| Err(SimError::InvalidConfig(msg));
        if self.n_speakers < 1 {
            return fail("n_speakers must be at least 1".to_string());
        }
        check_range("snr_range_db", self.snr_range_db)?;
        check_range("noise.snr_range_db", self.noise.snr_range_db)?;
        if !(0.0..=1.0).contains(&self.reverb.probability) {
            return fail(format!(
                "reverb.probability {} outside [0, 1]",
                self.reverb.probability
            ));
        }
        if !(0.0..=1.0).contains(&self.enroll.corrupt_probability) {
            return fail(format!(
                "enroll.corrupt_probability {} outside [0, 1]",
                self.enroll.corrupt_probability
            ));
        }
        if !(self.peak_ceiling > 0.0 && self.peak_ceiling.is_finite()) {
            return fail(format!("peak_ceiling {} must be positive", self.peak_ceiling));
        }
        if self.sample_rate == 0 {
            return fail("sample_rate must be positive".to_string());
        }
        if self.noise.enabled && self.noise.noise_catalog.is_none() {
            return fail("noise.enabled requires noise.noise_catalog".to_string());
        }
        if self.enroll.corrupt_probability > 0.0 && !self.noise.enabled && !self.reverb.enabled {
            return fail(
                "enroll.corrupt_probability > 0 needs noise or reverb enabled to corrupt with"
                    .to_string(),
            );
        }
        Ok(())
    }

    /// SHA-256 over the JSON serialization of the fully resolved config;
    /// stamped into metadata so exported examples are replayable.
    pub fn sha256(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}

fn check_range(name: &str, r: [f64; 2]) -> Result<(), SimError> {
    if !r[0].is_finite() || !r[1].is_finite() || r[0] > r[1] {
        return Err(SimError::InvalidConfig(format!("bad {name} range {r:?}")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_json_is_default_config() {
        let cfg = SimConfig::from_json("{}").unwrap();
        assert_eq!(cfg.n_speakers, 2);
        assert_eq!(cfg.snr_range_db, [-5.0, 5.0]);
        assert!(!cfg.noise.enabled);
        assert!(!cfg.reverb.enabled);
        assert_eq!(cfg.peak_ceiling, 0.9);
        assert_eq!(cfg.sample_rate, 16000);
        assert_eq!(cfg.length_policy, LengthPolicy::TruncateToShortest);
    }

    #[test]
    fn nested_overrides_parse() {
        let cfg = SimConfig::from_json(
            r#"{
                "n_speakers": 3,
                "snr_range_db": [0, 10],
                "noise": {"enabled": true, "noise_catalog": "noise.tsv"},
                "reverb": {"enabled": true, "probability": 0.5,
                           "provider": {"kind": "synthetic", "rt60_s": [0.2, 0.2]}},
                "length_policy": "pad_to_longest",
                "seed": 99
            }"#,
        )
        .unwrap();
        assert_eq!(cfg.n_speakers, 3);
        assert!(cfg.noise.enabled);
        match &cfg.reverb.provider {
            RirProviderConfig::Synthetic { ranges } => {
                assert_eq!(ranges.rt60_s, [0.2, 0.2]);
                assert_eq!(ranges.sample_rate, 0);
            }
            other => panic!("expected synthetic provider, got {other:?}"),
        }
        assert_eq!(cfg.length_policy, LengthPolicy::PadToLongest);
        assert_eq!(cfg.seed, 99);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        assert!(SimConfig::from_json(r#"{"n_speakers": 0}"#).is_err());
        assert!(SimConfig::from_json(r#"{"snr_range_db": [5, -5]}"#).is_err());
        assert!(SimConfig::from_json(r#"{"reverb": {"probability": 1.5}}"#).is_err());
        assert!(SimConfig::from_json(r#"{"noise": {"enabled": true}}"#).is_err());
        assert!(SimConfig::from_json(r#"{"enroll": {"corrupt_probability": 0.5}}"#).is_err());
        assert!(SimConfig::from_json(r#"{"unknown_field": 1}"#).is_err());
        assert!(SimConfig::from_json(r#"{"peak_ceiling": 0.0}"#).is_err());
    }

    #[test]
    fn hash_is_stable_and_field_sensitive() {
        let a = SimConfig::default();
        let b = SimConfig::default();
        assert_eq!(a.sha256(), b.sha256());
        let mut c = SimConfig::default();
        c.seed = 1;
        assert_ne!(a.sha256(), c.sha256());
        let mut d = SimConfig::default();
        d.snr_range_db = [-5.0, 6.0];
        assert_ne!(a.sha256(), d.sha256());
    }

    #[test]
    fn measured_provider_parses() {
        let cfg = SimConfig::from_json(
            r#"{"reverb": {"enabled": true,
                           "provider": {"kind": "measured", "list": "rirs.txt"}}}"#,
        )
        .unwrap();
        match &cfg.reverb.provider {
            RirProviderConfig::Measured { list } => {
                assert_eq!(list, &PathBuf::from("rirs.txt"));
            }
            other => panic!("expected measured provider, got {other:?}"),
        }
    }
}
