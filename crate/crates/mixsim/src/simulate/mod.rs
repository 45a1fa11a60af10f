//! The online mixture pipeline: dynamic speaker mixing, reverb and noise
//! application, enrollment sampling, and provenance bookkeeping.
//!
//! Determinism contract: [`Simulator::example`] derives a dedicated RNG
//! stream from `(cfg.seed, index)`, so example `i` is identical no matter
//! how many workers produce the stream or in what order. Draws happen in a
//! fixed sequence (selection, enrollment id, noise pick, per-source reverb,
//! enrollment corruption), and a feature whose probability is exactly 0
//! consumes no draws at all, which keeps e.g. `reverb.probability = 0`
//! bit-identical to `reverb.enabled = false`.
//!
//! The interferer gain for a requested SNR is applied after length
//! alignment and reverberation, not at selection time, so the SNR recorded
//! in the [`MixtureSpec`] is exactly the SNR measurable between the stored
//! components. The anti-clipping gain from the final sum is likewise
//! applied per component, and the mixture is computed by re-summing those
//! exact components in order; subtracting them from the mixture gives
//! literal zeros.

mod config;
mod export;

pub use config::{
    EnrollConfig, LengthPolicy, NoiseConfig, ReverbConfig, RirProviderConfig, SimConfig,
};
pub use export::{export_batch, ExampleMeta, ExportFormat, Provenance};

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audio::AudioClip;
use crate::dsp::{self, ConvolveMode, DspError};
use crate::rir::{load_rir_set, pick_rir, RirError, RirProvider};
use crate::shard::{Catalog, Locator, ShardError, ShardIndex, UtteranceRecord};
use crate::wav::{self, WavError};

/// Attempts at drawing an interferer from a different speaker before the
/// catalog is declared degenerate.
pub const INTERFERER_RETRY_CAP: usize = 1000;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("empty catalog")]
    EmptyCatalog,
    #[error("no interferer from a distinct speaker found in {0} draws")]
    DistinctSpeakerUnavailable(usize),
    #[error("speaker {0} not in catalog")]
    UnknownSpeaker(String),
    #[error("utterance {utt_id}: sample rate {got} Hz, pipeline expects {expected} Hz")]
    SampleRateMismatch {
        utt_id: String,
        got: u32,
        expected: u32,
    },
    #[error("utterance {0}: empty audio")]
    EmptyUtterance(String),
    #[error("length alignment produced empty clips")]
    EmptyAlignment,
    #[error("snr list length {snrs} does not match interferer count {interferers}")]
    SnrCountMismatch { snrs: usize, interferers: usize },
    #[error(transparent)]
    Dsp(#[from] DspError),
    #[error(transparent)]
    Rir(#[from] RirError),
    #[error(transparent)]
    Shard(#[from] ShardError),
    #[error(transparent)]
    Wav(#[from] WavError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("metadata: {0}")]
    Json(#[from] serde_json::Error),
}

/// Complete random provenance of one example; together with the catalog
/// and config it replays the audio bit for bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureSpec {
    /// Position in the stream; (seed, index) is the replay key.
    pub index: u64,
    /// The stream seed (cfg.seed), not a per-example value.
    pub seed: u64,
    pub target_utt: String,
    pub interferer_utts: Vec<String>,
    /// Target-over-interferer SNR per interferer, dB.
    pub snrs_db: Vec<f64>,
    pub noise_utt: Option<String>,
    pub noise_snr_db: Option<f64>,
    /// Source label ("target", "interferer_0", ..., "enrollment") to RIR id.
    pub rir_ids: Option<BTreeMap<String, String>>,
    /// Anti-clipping gain shared by every speech component.
    pub applied_gain: f64,
    pub enroll_utt: String,
    /// Present when the enrollment clip was corrupted, e.g.
    /// "noise:amb3@12.500dB" or "reverb:synth:...".
    pub enroll_corruption: Option<String>,
}

/// One training example: the mixture, the target as it appears inside the
/// mixture, an enrollment cue, and the exact components for bookkeeping.
#[derive(Debug, Clone)]
pub struct TrainingExample {
    pub mixture: AudioClip,
    pub target_ref: AudioClip,
    pub enrollment: AudioClip,
    /// Post-reverb, post-gain speech components; index 0 is the target.
    /// Summing these in order (noise last) reproduces `mixture` exactly.
    pub sources: Vec<AudioClip>,
    pub noise_component: Option<AudioClip>,
    pub spec: MixtureSpec,
}

/// Draw indices for a mixture: target uniform, then per interferer an SNR
/// followed by rejection sampling until the speaker differs from the
/// target's.
fn draw_indices(
    speakers: &[String],
    n_speakers: usize,
    snr_range_db: [f64; 2],
    rng: &mut impl Rng,
) -> Result<(usize, Vec<(usize, f64)>), SimError> {
    if speakers.is_empty() {
        return Err(SimError::EmptyCatalog);
    }
    let target = rng.gen_range(0..speakers.len());
    let mut interferers = Vec::with_capacity(n_speakers.saturating_sub(1));
    for _ in 1..n_speakers {
        let snr = rng.gen_range(snr_range_db[0]..=snr_range_db[1]);
        let mut attempts = 0;
        let idx = loop {
            let candidate = rng.gen_range(0..speakers.len());
            if speakers[candidate] != speakers[target] {
                break candidate;
            }
            attempts += 1;
            if attempts >= INTERFERER_RETRY_CAP {
                return Err(SimError::DistinctSpeakerUnavailable(INTERFERER_RETRY_CAP));
            }
        };
        interferers.push((idx, snr));
    }
    Ok((target, interferers))
}

/// The identifying fields produced by a dynamic-speaker-mixing draw.
#[derive(Debug, Clone, PartialEq)]
pub struct DsmDraw {
    pub target_utt: String,
    pub interferer_utts: Vec<String>,
    pub snrs_db: Vec<f64>,
}

/// Dynamic speaker mixing over an in-memory buffer: draw a target and
/// n_speakers - 1 interferers from distinct speakers, scale each
/// interferer to an SNR drawn uniformly from `snr_range_db`, and return
/// the scaled waveforms (target first) plus the draw record.
pub fn dsm_select(
    buffer: &[(UtteranceRecord, AudioClip)],
    n_speakers: usize,
    snr_range_db: [f64; 2],
    rng: &mut impl Rng,
) -> Result<(Vec<AudioClip>, DsmDraw), SimError> {
    if n_speakers < 1 {
        return Err(SimError::InvalidConfig(
            "n_speakers must be at least 1".to_string(),
        ));
    }
    let speakers: Vec<String> = buffer.iter().map(|(r, _)| r.spk_id.clone()).collect();
    let (target, interferers) = draw_indices(&speakers, n_speakers, snr_range_db, rng)?;

    let mut wavs = vec![buffer[target].1.clone()];
    let mut draw = DsmDraw {
        target_utt: buffer[target].0.utt_id.clone(),
        interferer_utts: Vec::new(),
        snrs_db: Vec::new(),
    };
    for (idx, snr) in interferers {
        wavs.push(dsp::rescale_to_snr(&buffer[target].1, &buffer[idx].1, snr)?);
        draw.interferer_utts.push(buffer[idx].0.utt_id.clone());
        draw.snrs_db.push(snr);
    }
    Ok((wavs, draw))
}

/// A pre-drawn noise pick for `assemble_mixture`.
#[derive(Debug, Clone)]
pub struct NoiseDraw {
    pub utt_id: String,
    pub clip: AudioClip,
    pub snr_db: f64,
}

/// Everything `assemble_mixture` produces besides the bookkeeping ids.
#[derive(Debug, Clone)]
pub struct AssembledMixture {
    pub mixture: AudioClip,
    pub target_ref: AudioClip,
    pub sources: Vec<AudioClip>,
    pub noise_component: Option<AudioClip>,
    pub applied_gain: f64,
    pub noise_utt: Option<String>,
    pub noise_snr_db: Option<f64>,
    pub rir_ids: Option<BTreeMap<String, String>>,
}

/// Assemble a mixture from unscaled dry sources: align lengths, apply
/// per-source reverb with probability `cfg.reverb.probability` (when a
/// provider is given), scale each interferer to its SNR against the
/// post-reverb target, sum under the peak ceiling, then add noise scaled
/// against the pre-noise mixture.
pub fn assemble_mixture(
    target: &AudioClip,
    interferers: &[AudioClip],
    snrs_db: &[f64],
    cfg: &SimConfig,
    rir_provider: Option<&RirProvider>,
    noise: Option<NoiseDraw>,
    rng: &mut impl Rng,
) -> Result<AssembledMixture, SimError> {
    if interferers.len() != snrs_db.len() {
        return Err(SimError::SnrCountMismatch {
            snrs: snrs_db.len(),
            interferers: interferers.len(),
        });
    }

    // Length alignment.
    let lens = std::iter::once(target.len()).chain(interferers.iter().map(|c| c.len()));
    let aligned_len = match cfg.length_policy {
        LengthPolicy::TruncateToShortest => lens.min().unwrap_or(0),
        LengthPolicy::PadToLongest => lens.max().unwrap_or(0),
    };
    if aligned_len == 0 {
        return Err(SimError::EmptyAlignment);
    }
    let align = |c: &AudioClip| -> AudioClip {
        if c.len() >= aligned_len {
            c.truncated(aligned_len)
        } else {
            c.zero_padded(aligned_len)
        }
    };
    let mut processed: Vec<AudioClip> = std::iter::once(target)
        .chain(interferers.iter())
        .map(align)
        .collect();

    // Per-source reverb. Probability 0 must not touch the RNG.
    let mut rir_ids: BTreeMap<String, String> = BTreeMap::new();
    if let Some(provider) = rir_provider {
        let p = cfg.reverb.probability;
        for (i, clip) in processed.iter_mut().enumerate() {
            let apply = p >= 1.0 || (p > 0.0 && rng.gen::<f64>() < p);
            if apply {
                let rir = pick_rir(provider, rng)?;
                let label = if i == 0 {
                    "target".to_string()
                } else {
                    format!("interferer_{}", i - 1)
                };
                rir_ids.insert(label, rir.meta.id.clone());
                *clip = dsp::convolve(clip, &rir, ConvolveMode::SameLength)?;
            }
        }
    }

    // Interferer gains realize the drawn SNRs against the target exactly
    // as both will appear in the mixture.
    let mut components = vec![processed[0].clone()];
    for (clip, &snr) in processed[1..].iter().zip(snrs_db) {
        components.push(dsp::rescale_to_snr(&processed[0], clip, snr)?);
    }

    let (pre_noise, applied_gain) = dsp::sum_and_rescale(&components, cfg.peak_ceiling)?;
    let sources: Vec<AudioClip> = if applied_gain == 1.0 {
        components
    } else {
        components.iter().map(|c| c.scaled(applied_gain)).collect()
    };

    let mut noise_utt = None;
    let mut noise_snr_db = None;
    let mut noise_component = None;
    let mixture = match noise {
        Some(draw) => {
            let tiled = if draw.clip.len() >= aligned_len {
                draw.clip.truncated(aligned_len)
            } else {
                draw.clip.tiled(aligned_len)
            };
            let scaled = dsp::rescale_to_snr(&pre_noise, &tiled, draw.snr_db)?;
            let samples = pre_noise
                .samples
                .iter()
                .zip(&scaled.samples)
                .map(|(&m, &n)| m + n)
                .collect();
            noise_utt = Some(draw.utt_id);
            noise_snr_db = Some(draw.snr_db);
            noise_component = Some(scaled);
            AudioClip::new(samples, pre_noise.sample_rate)
        }
        None => pre_noise,
    };

    Ok(AssembledMixture {
        target_ref: sources[0].clone(),
        mixture,
        sources,
        noise_component,
        applied_gain,
        noise_utt,
        noise_snr_db,
        rir_ids: if rir_ids.is_empty() { None } else { Some(rir_ids) },
    })
}

fn draw_enrollment_utt(utts: &[String], exclude: Option<&str>, rng: &mut impl Rng) -> String {
    let filtered: Vec<&String> = match exclude {
        Some(ex) if utts.len() >= 2 => utts.iter().filter(|u| u.as_str() != ex).collect(),
        _ => utts.iter().collect(),
    };
    filtered[rng.gen_range(0..filtered.len())].clone()
}

type NoiseLoader<'a> = &'a dyn Fn(&UtteranceRecord) -> Result<AudioClip, SimError>;

/// Corrupt `clip` with probability p; the coin is skipped entirely at
/// p <= 0 so the clean path stays bit-identical and draw-free. Returns the
/// clip and a descriptor of what was applied.
#[allow(clippy::too_many_arguments)]
fn maybe_corrupt(
    clip: AudioClip,
    p: f64,
    noise: Option<(&Catalog, NoiseLoader)>,
    noise_snr_range_db: [f64; 2],
    rir_provider: Option<&RirProvider>,
    peak_ceiling: f64,
    rng: &mut impl Rng,
) -> Result<(AudioClip, Option<String>), SimError> {
    let corrupt = p >= 1.0 || (p > 0.0 && rng.gen::<f64>() < p);
    if !corrupt {
        return Ok((clip, None));
    }
    let use_noise = match (noise.is_some(), rir_provider.is_some()) {
        (true, true) => rng.gen_range(0..2) == 0,
        (true, false) => true,
        (false, true) => false,
        (false, false) => {
            return Err(SimError::InvalidConfig(
                "enrollment corruption requested but no noise or reverb source available"
                    .to_string(),
            ))
        }
    };
    if use_noise {
        let (catalog, loader) = noise.expect("checked above");
        if catalog.is_empty() {
            return Err(SimError::InvalidConfig("noise catalog is empty".to_string()));
        }
        let record = &catalog.records()[rng.gen_range(0..catalog.len())];
        let snr = rng.gen_range(noise_snr_range_db[0]..=noise_snr_range_db[1]);
        let raw = loader(record)?;
        let tiled = if raw.len() >= clip.len() {
            raw.truncated(clip.len())
        } else {
            raw.tiled(clip.len())
        };
        let scaled = dsp::rescale_to_snr(&clip, &tiled, snr)?;
        let (corrupted, _) = dsp::sum_and_rescale(&[clip, scaled], peak_ceiling)?;
        Ok((
            corrupted,
            Some(format!("noise:{}@{:.3}dB", record.utt_id, snr)),
        ))
    } else {
        let provider = rir_provider.expect("checked above");
        let rir = pick_rir(provider, rng)?;
        let corrupted = dsp::convolve(&clip, &rir, ConvolveMode::SameLength)?;
        Ok((corrupted, Some(format!("reverb:{}", rir.meta.id))))
    }
}

/// Optional corruption sources for standalone enrollment sampling.
#[derive(Default)]
pub struct EnrollmentContext<'a> {
    pub noise: Option<&'a Catalog>,
    pub noise_snr_range_db: [f64; 2],
    pub rir_provider: Option<&'a RirProvider>,
    pub peak_ceiling: f64,
}

/// Draw an enrollment utterance for `target_spk`: uniform over the
/// speaker's utterances, excluding `exclude_utt` whenever the speaker has
/// at least two; with probability `corrupt_probability` the clip is
/// degraded by noise addition or reverberation (fair coin between the
/// available kinds). Returns the chosen utt_id and the audio.
pub fn sample_enrollment(
    catalog: &Catalog,
    target_spk: &str,
    exclude_utt: Option<&str>,
    corrupt_probability: f64,
    ctx: &EnrollmentContext,
    rng: &mut impl Rng,
) -> Result<(String, AudioClip), SimError> {
    let spk2utt = catalog.spk2utt();
    let utts = spk2utt
        .get(target_spk)
        .ok_or_else(|| SimError::UnknownSpeaker(target_spk.to_string()))?;
    let utt_id = draw_enrollment_utt(utts, exclude_utt, rng);
    let record = catalog.get(&utt_id).expect("utt from spk2utt is in catalog");
    let clip = record.load_audio()?;
    let loader = |r: &UtteranceRecord| r.load_audio().map_err(SimError::from);
    let (clip, _descriptor) = maybe_corrupt(
        clip,
        corrupt_probability,
        ctx.noise.map(|c| (c, &loader as NoiseLoader)),
        ctx.noise_snr_range_db,
        ctx.rir_provider,
        ctx.peak_ceiling,
        rng,
    )?;
    Ok((utt_id, clip))
}

/// The configured pipeline: catalog, optional noise catalog, optional RIR
/// provider, and a per-shard member index cache. Immutable after
/// construction and safe to share across worker threads.
pub struct Simulator {
    catalog: Catalog,
    cfg: SimConfig,
    speakers: Vec<String>,
    spk2utt: BTreeMap<String, Vec<String>>,
    noise: Option<Catalog>,
    rir_provider: Option<RirProvider>,
    shard_indexes: Mutex<HashMap<PathBuf, Arc<ShardIndex>>>,
}

impl Simulator {
    pub fn new(catalog: Catalog, cfg: SimConfig) -> Result<Simulator, SimError> {
        cfg.validate()?;
        if catalog.is_empty() {
            return Err(SimError::EmptyCatalog);
        }
        let noise = match (cfg.noise.enabled, &cfg.noise.noise_catalog) {
            (true, Some(path)) => {
                let nc = Catalog::from_list_file(path)?;
                if nc.is_empty() {
                    return Err(SimError::InvalidConfig(format!(
                        "noise catalog {} is empty",
                        path.display()
                    )));
                }
                Some(nc)
            }
            _ => None,
        };
        let rir_provider = if cfg.reverb.enabled {
            Some(build_rir_provider(&cfg.reverb.provider, cfg.sample_rate)?)
        } else {
            None
        };
        let speakers = catalog.records().iter().map(|r| r.spk_id.clone()).collect();
        let spk2utt = catalog.spk2utt();
        Ok(Simulator {
            catalog,
            cfg,
            speakers,
            spk2utt,
            noise,
            rir_provider,
            shard_indexes: Mutex::new(HashMap::new()),
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    pub fn catalog(&self) -> &Catalog {
        &self.catalog
    }

    /// The RNG for example `index`: one ChaCha stream per index on top of
    /// the config seed, so indices never share draws.
    fn rng_at(&self, index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.seed);
        rng.set_stream(index);
        rng
    }

    fn shard_index(&self, shard: &Path) -> Result<Arc<ShardIndex>, SimError> {
        let mut cache = self.shard_indexes.lock().expect("shard index cache lock");
        if let Some(idx) = cache.get(shard) {
            return Ok(Arc::clone(idx));
        }
        let idx = Arc::new(ShardIndex::build(shard)?);
        cache.insert(shard.to_path_buf(), Arc::clone(&idx));
        Ok(idx)
    }

    fn load_clip(&self, record: &UtteranceRecord) -> Result<AudioClip, SimError> {
        let clip = match &record.locator {
            Locator::RawFile(p) => wav::read_wav(p)?,
            Locator::ShardMember { shard, member } => {
                let index = self.shard_index(shard)?;
                let bytes = index.read(member)?;
                wav::decode_wav(&bytes, &format!("{}#{}", shard.display(), member))?
            }
        };
        if clip.is_empty() {
            return Err(SimError::EmptyUtterance(record.utt_id.clone()));
        }
        if clip.sample_rate != self.cfg.sample_rate {
            return Err(SimError::SampleRateMismatch {
                utt_id: record.utt_id.clone(),
                got: clip.sample_rate,
                expected: self.cfg.sample_rate,
            });
        }
        Ok(clip)
    }

    /// Produce example `index`. Pure in `(cfg.seed, index)` for a fixed
    /// catalog and config.
    pub fn example(&self, index: u64) -> Result<TrainingExample, SimError> {
        let mut rng = self.rng_at(index);
        let records = self.catalog.records();

        // 1. Mixture selection.
        let (target_idx, interferer_draws) = draw_indices(
            &self.speakers,
            self.cfg.n_speakers,
            self.cfg.snr_range_db,
            &mut rng,
        )?;
        let target_rec = &records[target_idx];
        let snrs_db: Vec<f64> = interferer_draws.iter().map(|&(_, s)| s).collect();
        let interferer_utts: Vec<String> = interferer_draws
            .iter()
            .map(|&(i, _)| records[i].utt_id.clone())
            .collect();

        // 2. Enrollment utterance id.
        let utts = &self.spk2utt[&target_rec.spk_id];
        let enroll_utt = draw_enrollment_utt(utts, Some(&target_rec.utt_id), &mut rng);

        // 3. Audio loading (no randomness).
        let target_clip = self.load_clip(target_rec)?;
        let interferer_clips: Vec<AudioClip> = interferer_draws
            .iter()
            .map(|&(i, _)| self.load_clip(&records[i]))
            .collect::<Result<_, _>>()?;
        let enroll_record = self.catalog.get(&enroll_utt).expect("drawn from catalog");
        let enroll_clean = self.load_clip(enroll_record)?;

        // 4. Noise pick.
        let noise_draw = match &self.noise {
            Some(noise_catalog) => {
                let rec = &noise_catalog.records()[rng.gen_range(0..noise_catalog.len())];
                let snr = rng.gen_range(self.cfg.noise.snr_range_db[0]..=self.cfg.noise.snr_range_db[1]);
                Some(NoiseDraw {
                    utt_id: rec.utt_id.clone(),
                    clip: self.load_clip(rec)?,
                    snr_db: snr,
                })
            }
            None => None,
        };

        // 5. Assembly (reverb coins and RIR draws happen inside).
        let assembled = assemble_mixture(
            &target_clip,
            &interferer_clips,
            &snrs_db,
            &self.cfg,
            self.rir_provider.as_ref(),
            noise_draw,
            &mut rng,
        )?;

        // 6. Enrollment corruption.
        let loader = |r: &UtteranceRecord| self.load_clip(r);
        let (enrollment, enroll_corruption) = maybe_corrupt(
            enroll_clean,
            self.cfg.enroll.corrupt_probability,
            self.noise.as_ref().map(|c| (c, &loader as NoiseLoader)),
            self.cfg.noise.snr_range_db,
            self.rir_provider.as_ref(),
            self.cfg.peak_ceiling,
            &mut rng,
        )?;

        let mut rir_ids = assembled.rir_ids;
        if let Some(desc) = &enroll_corruption {
            if let Some(id) = desc.strip_prefix("reverb:") {
                rir_ids
                    .get_or_insert_with(BTreeMap::new)
                    .insert("enrollment".to_string(), id.to_string());
            }
        }

        Ok(TrainingExample {
            mixture: assembled.mixture,
            target_ref: assembled.target_ref,
            enrollment,
            sources: assembled.sources,
            noise_component: assembled.noise_component,
            spec: MixtureSpec {
                index,
                seed: self.cfg.seed,
                target_utt: target_rec.utt_id.clone(),
                interferer_utts,
                snrs_db,
                noise_utt: assembled.noise_utt,
                noise_snr_db: assembled.noise_snr_db,
                rir_ids,
                applied_gain: assembled.applied_gain,
                enroll_utt,
                enroll_corruption,
            },
        })
    }

    /// Infinite stream starting at index 0; combine with `take(n)` for a
    /// bounded run.
    pub fn stream(&self) -> impl Iterator<Item = Result<TrainingExample, SimError>> + '_ {
        (0u64..).map(move |i| self.example(i))
    }
}

fn build_rir_provider(
    cfg: &RirProviderConfig,
    sample_rate: u32,
) -> Result<RirProvider, SimError> {
    match cfg {
        RirProviderConfig::Measured { list } => {
            let set = load_rir_set(list)?;
            for rir in &set.rirs {
                if rir.sample_rate != sample_rate {
                    return Err(SimError::InvalidConfig(format!(
                        "RIR {} is {} Hz, pipeline expects {} Hz",
                        rir.meta.id, rir.sample_rate, sample_rate
                    )));
                }
            }
            Ok(RirProvider::Measured(set.rirs))
        }
        RirProviderConfig::Synthetic { ranges } => {
            let mut resolved = ranges.clone();
            if resolved.sample_rate == 0 {
                resolved.sample_rate = sample_rate;
            }
            resolved.validate()?;
            Ok(RirProvider::Synthetic(resolved))
        }
    }
}

/// Owning iterator over the example stream.
pub struct ExampleStream {
    sim: Simulator,
    next: u64,
}

impl ExampleStream {
    pub fn simulator(&self) -> &Simulator {
        &self.sim
    }
}

impl Iterator for ExampleStream {
    type Item = Result<TrainingExample, SimError>;

    fn next(&mut self) -> Option<Self::Item> {
        let i = self.next;
        self.next += 1;
        Some(self.sim.example(i))
    }
}

/// Convenience constructor: validate the config, build the simulator, and
/// return the infinite stream.
pub fn simulate_stream(catalog: Catalog, cfg: SimConfig) -> Result<ExampleStream, SimError> {
    Ok(ExampleStream {
        sim: Simulator::new(catalog, cfg)?,
        next: 0,
    })
}
