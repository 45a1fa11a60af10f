//! The seven subcommands. Each runner returns Ok only after its data is
//! fully written; partial output plus an error exit is considered a bug.

use std::path::PathBuf;

use clap::{Args, ValueEnum};
use ndarray::{Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use mixsim::fusion::{
    fuse_add, fuse_concat, fuse_film, fuse_multiply, AffineProjection, FeatureSeq,
    SpeakerEmbedding,
};
use mixsim::metrics;
use mixsim::rir::{schroeder_t60, synth_rir, SyntheticRirConfig};
use mixsim::shard::{pack_shards, Catalog};
use mixsim::simulate::{
    assemble_mixture, export_batch, ExportFormat, LengthPolicy, SimConfig, Simulator,
};
use mixsim::textmat::{format_matrix, read_matrix, write_matrix};
use mixsim::wav::{read_wav, write_wav, WavEncoding};
use mixsim::AudioClip;

use crate::overrides::{parse_set, resolve_seed, set_dotted, SeedSource};
use crate::{data, CliError};

// ---------------------------------------------------------------- pack --

#[derive(Args)]
pub struct PackArgs {
    /// TSV corpus list: utt_id, spk_id, path (or shard#member).
    #[arg(long, value_name = "TSV")]
    list: PathBuf,
    /// Output directory for shard-NNNNNN.tar files and manifest.txt.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    /// Utterances per shard.
    #[arg(long, default_value_t = 1000)]
    shard_size: usize,
}

pub fn run_pack(args: PackArgs) -> Result<(), CliError> {
    let catalog = Catalog::from_list_file(&args.list).map_err(data)?;
    if catalog.is_empty() {
        return Err(CliError::Data(format!(
            "{}: corpus list contains no records",
            args.list.display()
        )));
    }
    std::fs::create_dir_all(&args.out)
        .map_err(|e| data(format!("{}: {e}", args.out.display())))?;
    let shards = pack_shards(catalog.records(), &args.out, args.shard_size).map_err(data)?;
    log::info!(
        "packed {} utterances into {} shards under {}",
        catalog.len(),
        shards.len(),
        args.out.display()
    );
    for s in &shards {
        println!("{}", s.display());
    }
    Ok(())
}

// ------------------------------------------------------------- catalog --

#[derive(Args)]
pub struct CatalogArgs {
    /// TSV corpus list to read.
    #[arg(long, value_name = "TSV")]
    list: Option<PathBuf>,
    /// Shard manifest to read instead of a raw list.
    #[arg(long, value_name = "FILE")]
    manifest: Option<PathBuf>,
    /// Where to write the serialized catalog; stdout when omitted.
    #[arg(long, value_name = "TSV")]
    out: Option<PathBuf>,
}

fn load_catalog(list: &Option<PathBuf>, manifest: &Option<PathBuf>) -> Result<Catalog, CliError> {
    match (list, manifest) {
        (Some(l), None) => Catalog::from_list_file(l).map_err(data),
        (None, Some(m)) => Catalog::from_manifest(m).map_err(data),
        _ => Err(CliError::Usage(
            "exactly one of --list or --manifest is required".to_string(),
        )),
    }
}

pub fn run_catalog(args: CatalogArgs) -> Result<(), CliError> {
    let catalog = load_catalog(&args.list, &args.manifest)?;
    log::info!(
        "{} utterances from {} speakers",
        catalog.len(),
        catalog.spk2utt().len()
    );
    match &args.out {
        Some(path) => catalog.write_list(path).map_err(data)?,
        None => {
            for r in catalog.records() {
                println!("{}\t{}\t{}", r.utt_id, r.spk_id, r.locator.to_string_form());
            }
        }
    }
    Ok(())
}

// ------------------------------------------------------------ simulate --

#[derive(Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
enum FormatArg {
    WavTriplets,
    PackedShard,
}

impl From<FormatArg> for ExportFormat {
    fn from(f: FormatArg) -> ExportFormat {
        match f {
            FormatArg::WavTriplets => ExportFormat::WavTriplets,
            FormatArg::PackedShard => ExportFormat::PackedShard,
        }
    }
}

#[derive(Args)]
pub struct SimulateArgs {
    /// TSV corpus list of single-speaker utterances.
    #[arg(long, value_name = "TSV")]
    list: Option<PathBuf>,
    /// Shard manifest from `pack` instead of a raw list.
    #[arg(long, value_name = "FILE")]
    manifest: Option<PathBuf>,
    /// JSON pipeline config; defaults apply when omitted.
    #[arg(long, value_name = "JSON")]
    config: Option<PathBuf>,
    /// Config override, dotted key = JSON value; repeatable, last wins.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    /// Number of examples to generate.
    #[arg(long)]
    n: u64,
    /// Stream seed; drawn and printed to stderr when absent.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; the output bytes are identical for any value.
    #[arg(long, default_value_t = 1)]
    workers: usize,
    #[arg(long, value_enum, default_value = "wav_triplets")]
    format: FormatArg,
}

pub fn run_simulate(args: SimulateArgs) -> Result<(), CliError> {
    let mut root = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| data(format!("{}: {e}", path.display())))?;
            serde_json::from_str(&text).map_err(|e| data(format!("{}: {e}", path.display())))?
        }
        None => json!({}),
    };
    if !root.is_object() {
        return Err(CliError::Data("config root must be a JSON object".to_string()));
    }
    for pair in &args.set {
        let (key, value) = parse_set(pair)?;
        log::info!("config override: {key} = {value}");
        set_dotted(&mut root, &key, value)?;
    }
    let (seed, source) = resolve_seed(&mut root, args.seed)?;
    if source == SeedSource::Drawn {
        eprintln!("seed: {seed}");
    }
    let cfg = SimConfig::from_json(&root.to_string()).map_err(data)?;
    let catalog = load_catalog(&args.list, &args.manifest)?;
    let sim = Simulator::new(catalog, cfg).map_err(data)?;
    let meta = export_batch(&sim, &args.out, args.n, args.format.into(), args.workers)
        .map_err(data)?;
    log::info!("wrote {} examples under {}", args.n, args.out.display());
    println!("{}", meta.display());
    Ok(())
}

// ----------------------------------------------------------------- mix --

#[derive(Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
enum PolicyArg {
    TruncateToShortest,
    PadToLongest,
}

#[derive(Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
enum EncodingArg {
    Float32,
    Pcm16,
}

impl From<EncodingArg> for WavEncoding {
    fn from(e: EncodingArg) -> WavEncoding {
        match e {
            EncodingArg::Float32 => WavEncoding::Float32,
            EncodingArg::Pcm16 => WavEncoding::Pcm16,
        }
    }
}

#[derive(Args)]
pub struct MixArgs {
    /// Target speech WAV.
    #[arg(long, value_name = "WAV")]
    target: PathBuf,
    /// Interferer WAV; repeat for more speakers.
    #[arg(long = "interferer", value_name = "WAV")]
    interferers: Vec<PathBuf>,
    /// Target-over-interferer SNR in dB; one per --interferer, in order.
    #[arg(long = "snr", value_name = "DB")]
    snrs: Vec<f64>,
    /// Output mixture WAV.
    #[arg(long, value_name = "WAV")]
    out: PathBuf,
    /// Peak ceiling for the summed mixture.
    #[arg(long, default_value_t = 0.9)]
    ceiling: f64,
    #[arg(long, value_enum, default_value = "truncate_to_shortest")]
    length_policy: PolicyArg,
    #[arg(long, value_enum, default_value = "float32")]
    encoding: EncodingArg,
}

pub fn run_mix(args: MixArgs) -> Result<(), CliError> {
    if args.interferers.len() != args.snrs.len() {
        return Err(CliError::Usage(format!(
            "got {} --interferer but {} --snr; they pair up one to one",
            args.interferers.len(),
            args.snrs.len()
        )));
    }
    let target = read_wav(&args.target).map_err(data)?;
    let interferers: Vec<AudioClip> = args
        .interferers
        .iter()
        .map(|p| read_wav(p).map_err(data))
        .collect::<Result<_, _>>()?;

    let mut cfg = SimConfig::default();
    cfg.peak_ceiling = args.ceiling;
    cfg.sample_rate = target.sample_rate;
    cfg.length_policy = match args.length_policy {
        PolicyArg::TruncateToShortest => LengthPolicy::TruncateToShortest,
        PolicyArg::PadToLongest => LengthPolicy::PadToLongest,
    };
    // Reverb and noise are off, so assembly consumes no randomness.
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let assembled =
        assemble_mixture(&target, &interferers, &args.snrs, &cfg, None, None, &mut rng)
            .map_err(data)?;

    if let Some(parent) = args.out.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)
                .map_err(|e| data(format!("{}: {e}", parent.display())))?;
        }
    }
    write_wav(&assembled.mixture, &args.out, args.encoding.into()).map_err(data)?;
    println!(
        "{}",
        json!({
            "out": args.out,
            "applied_gain": assembled.applied_gain,
            "peak": assembled.mixture.peak(),
            "samples": assembled.mixture.len(),
        })
    );
    Ok(())
}

// ------------------------------------------------------------- rir-gen --

#[derive(Args)]
pub struct RirGenArgs {
    /// Decay time to -60 dB, in seconds.
    #[arg(long, value_name = "SECONDS")]
    rt60: f64,
    /// Output WAV for the impulse response.
    #[arg(long, value_name = "WAV")]
    out: PathBuf,
    #[arg(long, default_value_t = 16000)]
    sample_rate: u32,
    /// Response length in seconds; defaults to rt60.
    #[arg(long, value_name = "SECONDS")]
    length_s: Option<f64>,
    /// Direct-path delay in seconds.
    #[arg(long, default_value_t = 0.004, value_name = "SECONDS")]
    direct_delay_s: f64,
    /// Direct-to-reverberant energy ratio in dB.
    #[arg(long, default_value_t = 6.0, value_name = "DB")]
    dtr_db: f64,
    /// Synthesis seed; drawn and printed to stderr when absent.
    #[arg(long)]
    seed: Option<u64>,
}

pub fn run_rir_gen(args: RirGenArgs) -> Result<(), CliError> {
    let (seed, drawn) = match args.seed {
        Some(s) => (s, false),
        None => (rand::random(), true),
    };
    if drawn {
        eprintln!("seed: {seed}");
    }
    let cfg = SyntheticRirConfig {
        rt60_s: args.rt60,
        direct_delay_s: args.direct_delay_s,
        direct_to_reverb_db: args.dtr_db,
        length_s: args.length_s.unwrap_or(args.rt60),
        sample_rate: args.sample_rate,
    };
    let rir = synth_rir(&cfg, seed).map_err(data)?;
    let clip = AudioClip::new(rir.taps.clone(), rir.sample_rate);
    if let Some(parent) = args.out.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)
                .map_err(|e| data(format!("{}: {e}", parent.display())))?;
        }
    }
    write_wav(&clip, &args.out, WavEncoding::Float32).map_err(data)?;
    println!(
        "{}",
        json!({
            "path": args.out,
            "id": rir.meta.id,
            "configured_rt60_s": args.rt60,
            "measured_t60_s": schroeder_t60(&rir),
        })
    );
    Ok(())
}

// -------------------------------------------------------------- metric --

#[derive(Args)]
pub struct MetricArgs {
    /// Estimate WAV (single-pair mode).
    #[arg(value_name = "ESTIMATE")]
    estimate: Option<PathBuf>,
    /// Reference WAV (single-pair mode).
    #[arg(value_name = "REFERENCE")]
    reference: Option<PathBuf>,
    /// TSV of estimate<TAB>reference rows for batch scoring.
    #[arg(long, value_name = "TSV", conflicts_with_all = ["estimate", "reference"])]
    pairs: Option<PathBuf>,
    /// Skip mean removal before projection.
    #[arg(long)]
    no_center: bool,
}

/// Render a float for JSON output; JSON has no inf, so non-finite values
/// become strings.
fn json_f64(v: f64) -> serde_json::Value {
    if v.is_finite() {
        json!(v)
    } else {
        json!(v.to_string())
    }
}

pub fn run_metric(args: MetricArgs) -> Result<(), CliError> {
    let zero_mean = !args.no_center;
    match (&args.estimate, &args.reference, &args.pairs) {
        (Some(est_path), Some(ref_path), None) => {
            let mut est = read_wav(est_path).map_err(data)?;
            let mut reference = read_wav(ref_path).map_err(data)?;
            if est.len() != reference.len() {
                let n = est.len().min(reference.len());
                log::warn!(
                    "length mismatch ({} vs {} samples), truncating both to {n}",
                    est.len(),
                    reference.len()
                );
                est = est.truncated(n);
                reference = reference.truncated(n);
            }
            let v = metrics::si_snr(&est, &reference, zero_mean).map_err(data)?;
            println!("{v}");
            Ok(())
        }
        (None, None, Some(pairs_path)) => {
            let text = std::fs::read_to_string(pairs_path)
                .map_err(|e| data(format!("{}: {e}", pairs_path.display())))?;
            let mut pairs = Vec::new();
            for (i, line) in text.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let (a, b) = line.split_once('\t').ok_or_else(|| {
                    CliError::Data(format!(
                        "{}:{}: expected ESTIMATE<TAB>REFERENCE",
                        pairs_path.display(),
                        i + 1
                    ))
                })?;
                pairs.push((PathBuf::from(a.trim()), PathBuf::from(b.trim())));
            }
            if pairs.is_empty() {
                return Err(CliError::Data(format!(
                    "{}: no pairs listed",
                    pairs_path.display()
                )));
            }
            let summary = metrics::eval_pairs(&pairs, zero_mean);
            println!("estimate\treference\tsi_snr_db\tsnr_db\tstatus");
            for outcome in &summary.pairs {
                match &outcome.result {
                    Ok(report) => println!(
                        "{}\t{}\t{}\t{}\tok",
                        outcome.estimate.display(),
                        outcome.reference.display(),
                        report.si_snr_db,
                        report.snr_db
                    ),
                    Err(msg) => println!(
                        "{}\t{}\t\t\t{msg}",
                        outcome.estimate.display(),
                        outcome.reference.display()
                    ),
                }
            }
            println!(
                "{}",
                json!({
                    "pairs": summary.pairs.len(),
                    "failed": summary.failed,
                    "mean_si_snr_db": summary.mean.map(|m| json_f64(m.si_snr_db)),
                    "mean_snr_db": summary.mean.map(|m| json_f64(m.snr_db)),
                })
            );
            Ok(())
        }
        _ => Err(CliError::Usage(
            "metric needs either ESTIMATE REFERENCE or --pairs list.tsv".to_string(),
        )),
    }
}

// ---------------------------------------------------------------- fuse --

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FuseMethod {
    Concat,
    Add,
    Multiply,
    Film,
}

#[derive(Args)]
pub struct FuseArgs {
    #[arg(long, value_enum)]
    method: FuseMethod,
    /// Feature matrix H, time steps x feature dim.
    #[arg(long, value_name = "TXT")]
    features: PathBuf,
    /// Speaker embedding, a one-row or one-column matrix.
    #[arg(long, value_name = "TXT")]
    embedding: PathBuf,
    /// Projection weight for add/multiply (feature dim x embedding dim).
    #[arg(long, value_name = "TXT")]
    weight: Option<PathBuf>,
    /// Projection bias for add/multiply; zeros when omitted.
    #[arg(long, value_name = "TXT")]
    bias: Option<PathBuf>,
    /// FiLM scale projection weight.
    #[arg(long, value_name = "TXT")]
    gamma_weight: Option<PathBuf>,
    /// FiLM scale projection bias.
    #[arg(long, value_name = "TXT")]
    gamma_bias: Option<PathBuf>,
    /// FiLM shift projection weight.
    #[arg(long, value_name = "TXT")]
    beta_weight: Option<PathBuf>,
    /// FiLM shift projection bias.
    #[arg(long, value_name = "TXT")]
    beta_bias: Option<PathBuf>,
    /// Output matrix path; stdout when omitted.
    #[arg(long, value_name = "TXT")]
    out: Option<PathBuf>,
}

/// Flatten a one-row or one-column matrix into a vector.
fn vector_from(m: Array2<f64>, label: &str) -> Result<Array1<f64>, CliError> {
    let (rows, cols) = m.dim();
    if rows == 1 || cols == 1 {
        Ok(Array1::from_iter(m.into_iter()))
    } else {
        Err(CliError::Data(format!(
            "{label}: expected a vector (one row or one column), got {rows}x{cols}"
        )))
    }
}

/// Build the e -> feature-space projection from optional weight/bias
/// files. With neither given the identity is used, which requires the
/// embedding dim to match the feature dim already.
fn build_projection(
    weight: &Option<PathBuf>,
    bias: &Option<PathBuf>,
    h_dim: usize,
    e_dim: usize,
    what: &str,
) -> Result<AffineProjection, CliError> {
    let weight = match weight {
        Some(p) => Some(read_matrix(p).map_err(data)?),
        None => None,
    };
    let bias = match bias {
        Some(p) => Some(vector_from(read_matrix(p).map_err(data)?, &p.display().to_string())?),
        None => None,
    };
    let proj = match (weight, bias) {
        (Some(w), Some(b)) => AffineProjection::new(w, b).map_err(data)?,
        (Some(w), None) => {
            let rows = w.nrows();
            AffineProjection::new(w, Array1::zeros(rows)).map_err(data)?
        }
        (None, Some(b)) => {
            if e_dim != h_dim {
                return Err(CliError::Data(format!(
                    "{what}: bias without weight needs embedding dim ({e_dim}) equal to \
                     feature dim ({h_dim})"
                )));
            }
            AffineProjection::new(Array2::eye(h_dim), b).map_err(data)?
        }
        (None, None) => {
            if e_dim != h_dim {
                return Err(CliError::Data(format!(
                    "{what}: embedding dim ({e_dim}) does not match feature dim ({h_dim}); \
                     provide a projection weight"
                )));
            }
            AffineProjection::identity(h_dim)
        }
    };
    Ok(proj)
}

pub fn run_fuse(args: FuseArgs) -> Result<(), CliError> {
    let plain_flags = args.weight.is_some() || args.bias.is_some();
    let film_flags = args.gamma_weight.is_some()
        || args.gamma_bias.is_some()
        || args.beta_weight.is_some()
        || args.beta_bias.is_some();
    match args.method {
        FuseMethod::Concat if plain_flags || film_flags => {
            return Err(CliError::Usage(
                "concat takes no projection flags".to_string(),
            ))
        }
        FuseMethod::Add | FuseMethod::Multiply if film_flags => {
            return Err(CliError::Usage(
                "--gamma-*/--beta-* apply only to --method film".to_string(),
            ))
        }
        FuseMethod::Film if plain_flags => {
            return Err(CliError::Usage(
                "film uses --gamma-weight/--gamma-bias/--beta-weight/--beta-bias, \
                 not --weight/--bias"
                    .to_string(),
            ))
        }
        _ => {}
    }

    let h = FeatureSeq::new(read_matrix(&args.features).map_err(data)?).map_err(data)?;
    let e_vec = vector_from(
        read_matrix(&args.embedding).map_err(data)?,
        &args.embedding.display().to_string(),
    )?;
    let e = SpeakerEmbedding::new(e_vec).map_err(data)?;

    let fused = match args.method {
        FuseMethod::Concat => fuse_concat(&h, &e),
        FuseMethod::Add => {
            let proj = build_projection(&args.weight, &args.bias, h.dim(), e.dim(), "add")?;
            fuse_add(&h, &e, &proj).map_err(data)?
        }
        FuseMethod::Multiply => {
            let proj = build_projection(&args.weight, &args.bias, h.dim(), e.dim(), "multiply")?;
            fuse_multiply(&h, &e, &proj).map_err(data)?
        }
        FuseMethod::Film => {
            let gamma =
                build_projection(&args.gamma_weight, &args.gamma_bias, h.dim(), e.dim(), "gamma")?;
            let beta =
                build_projection(&args.beta_weight, &args.beta_bias, h.dim(), e.dim(), "beta")?;
            fuse_film(&h, &e, &gamma, &beta).map_err(data)?
        }
    };

    match &args.out {
        Some(path) => write_matrix(&fused.values, path).map_err(data)?,
        None => print!("{}", format_matrix(&fused.values)),
    }
    Ok(())
}
