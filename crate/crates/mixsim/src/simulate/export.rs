//! Batch export: render examples to disk with a metadata line per
//! example. Generation is parallel per chunk but files and metadata are
//! written strictly in index order, so the output bytes do not depend on
//! the worker count.

use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{SimError, Simulator};
use crate::wav::{encode_wav, WavEncoding};

/// How examples land on disk.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    /// `NNNNNN_mix.wav` / `_ref.wav` / `_enroll.wav` per example.
    WavTriplets,
    /// One `examples.tar` with `NNNNNN/mix.wav` etc. members.
    PackedShard,
}

/// Enough to reproduce a batch: the tool version, a digest of the resolved
/// config, and the stream seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool_version: String,
    pub config_sha256: String,
    pub config_seed: u64,
}

/// One line of `metadata.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExampleMeta {
    pub id: String,
    pub spec: super::MixtureSpec,
    pub provenance: Provenance,
}

/// Examples generated per parallel round before the serial write.
const EXPORT_CHUNK: u64 = 32;

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> SimError + '_ {
    move |source| SimError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn deterministic_header(member: &str, size: usize) -> Result<tar::Header, std::io::Error> {
    let mut header = tar::Header::new_ustar();
    header.set_path(member)?;
    header.set_size(size as u64);
    header.set_mode(0o644);
    header.set_mtime(0);
    header.set_uid(0);
    header.set_gid(0);
    header.set_cksum();
    Ok(header)
}

/// Render `n` examples (indices 0..n) into `out_dir` and return the path
/// of the `metadata.jsonl` written beside the audio.
pub fn export_batch(
    sim: &Simulator,
    out_dir: impl AsRef<Path>,
    n: u64,
    format: ExportFormat,
    workers: usize,
) -> Result<PathBuf, SimError> {
    if workers == 0 {
        return Err(SimError::InvalidConfig(
            "workers must be at least 1".to_string(),
        ));
    }
    let out_dir = out_dir.as_ref();
    std::fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;

    let provenance = Provenance {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        config_sha256: sim.config().sha256(),
        config_seed: sim.config().seed,
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| SimError::InvalidConfig(format!("thread pool: {e}")))?;

    let meta_path = out_dir.join("metadata.jsonl");
    let meta_file = std::fs::File::create(&meta_path).map_err(io_err(&meta_path))?;
    let mut meta = std::io::BufWriter::new(meta_file);

    let mut tar_builder = match format {
        ExportFormat::WavTriplets => None,
        ExportFormat::PackedShard => {
            let tar_path = out_dir.join("examples.tar");
            let f = std::fs::File::create(&tar_path).map_err(io_err(&tar_path))?;
            Some((tar::Builder::new(f), tar_path))
        }
    };

    let mut start = 0u64;
    while start < n {
        let end = (start + EXPORT_CHUNK).min(n);
        let indices: Vec<u64> = (start..end).collect();
        let examples: Vec<_> = pool.install(|| {
            use rayon::prelude::*;
            indices
                .par_iter()
                .map(|&i| sim.example(i))
                .collect::<Result<Vec<_>, _>>()
        })?;

        for ex in &examples {
            let id = format!("{:06}", ex.spec.index);
            let parts = [
                ("mix", &ex.mixture),
                ("ref", &ex.target_ref),
                ("enroll", &ex.enrollment),
            ];
            match &mut tar_builder {
                None => {
                    for (suffix, clip) in parts {
                        let path = out_dir.join(format!("{id}_{suffix}.wav"));
                        let label = path.display().to_string();
                        let bytes = encode_wav(clip, WavEncoding::Float32, &label)?;
                        std::fs::write(&path, bytes).map_err(io_err(&path))?;
                    }
                }
                Some((builder, tar_path)) => {
                    for (suffix, clip) in parts {
                        let member = format!("{id}/{suffix}.wav");
                        let bytes = encode_wav(clip, WavEncoding::Float32, &member)?;
                        let header =
                            deterministic_header(&member, bytes.len()).map_err(io_err(tar_path))?;
                        builder
                            .append(&header, bytes.as_slice())
                            .map_err(io_err(tar_path))?;
                    }
                }
            }
            let line = serde_json::to_string(&ExampleMeta {
                id,
                spec: ex.spec.clone(),
                provenance: provenance.clone(),
            })?;
            meta.write_all(line.as_bytes()).map_err(io_err(&meta_path))?;
            meta.write_all(b"\n").map_err(io_err(&meta_path))?;
        }
        start = end;
    }

    if let Some((builder, tar_path)) = tar_builder {
        builder
            .into_inner()
            .and_then(|mut f| f.flush())
            .map_err(io_err(&tar_path))?;
    }
    meta.flush().map_err(io_err(&meta_path))?;
    Ok(meta_path)
}
