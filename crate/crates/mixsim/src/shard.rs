//! Corpus management: utterance catalogs, tar-shard packing, and a
//! sequential shard streamer with a bounded shuffle buffer.
//!
//! Shards are plain POSIX ustar archives whose members are named
//! `<spk_id>/<utt_id>.wav`, so a shard is self-describing and needs no
//! sidecar at stream time. Reading is done with a small sequential cursor
//! rather than a general tar library because a damaged member must be
//! skipped and counted, never abort the pass.

use std::collections::{BTreeMap, HashMap};
use std::fs::{self, File};
use std::io::{Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::audio::AudioClip;
use crate::wav;

#[derive(Debug, Error)]
pub enum ShardError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("utterance {utt_id}: {what}")]
    InvalidRecord { utt_id: String, what: String },
    #[error("duplicate utt_id {utt_id}")]
    DuplicateUtt { utt_id: String },
    #[error("utterance {utt_id}: cannot read {path}: {source}")]
    Unreadable {
        utt_id: String,
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path} line {line}: {what}")]
    MalformedLine {
        path: PathBuf,
        line: usize,
        what: String,
    },
    #[error("shard_size must be at least 1")]
    BadShardSize,
    #[error("shard {shard} has no member {member}")]
    MissingMember { shard: PathBuf, member: String },
    #[error(transparent)]
    Wav(#[from] wav::WavError),
}

/// Where an utterance's audio lives.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Locator {
    RawFile(PathBuf),
    ShardMember { shard: PathBuf, member: String },
}

impl Locator {
    /// Serialized form: a plain path, or "shard.tar#member" for shard
    /// members (split at the last '#').
    pub fn to_string_form(&self) -> String {
        match self {
            Locator::RawFile(p) => p.display().to_string(),
            Locator::ShardMember { shard, member } => format!("{}#{}", shard.display(), member),
        }
    }

    pub fn from_string_form(s: &str) -> Locator {
        match s.rsplit_once('#') {
            Some((shard, member)) if !member.is_empty() => Locator::ShardMember {
                shard: PathBuf::from(shard),
                member: member.to_string(),
            },
            _ => Locator::RawFile(PathBuf::from(s)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UtteranceRecord {
    pub utt_id: String,
    pub spk_id: String,
    pub locator: Locator,
}

impl UtteranceRecord {
    fn validate(&self) -> Result<(), ShardError> {
        if self.utt_id.is_empty() || self.utt_id.contains('/') {
            return Err(ShardError::InvalidRecord {
                utt_id: self.utt_id.clone(),
                what: "utt_id must be nonempty and must not contain '/'".to_string(),
            });
        }
        if self.spk_id.is_empty() {
            return Err(ShardError::InvalidRecord {
                utt_id: self.utt_id.clone(),
                what: "spk_id must be nonempty".to_string(),
            });
        }
        Ok(())
    }

    /// Decode this record's audio from its raw file or shard member.
    pub fn load_audio(&self) -> Result<AudioClip, ShardError> {
        match &self.locator {
            Locator::RawFile(p) => Ok(wav::read_wav(p)?),
            Locator::ShardMember { shard, member } => {
                let bytes = read_member(shard, member)?;
                Ok(wav::decode_wav(&bytes, &format!("{}#{}", shard.display(), member))?)
            }
        }
    }
}

/// Ordered utterance list with a unique-id index. The spk2utt grouping is
/// always derived from the records, never stored, so the two can't drift.
#[derive(Debug, Clone)]
pub struct Catalog {
    records: Vec<UtteranceRecord>,
    by_utt: HashMap<String, usize>,
}

impl Catalog {
    pub fn from_records(records: Vec<UtteranceRecord>) -> Result<Catalog, ShardError> {
        let mut by_utt = HashMap::with_capacity(records.len());
        for (i, r) in records.iter().enumerate() {
            r.validate()?;
            if by_utt.insert(r.utt_id.clone(), i).is_some() {
                return Err(ShardError::DuplicateUtt {
                    utt_id: r.utt_id.clone(),
                });
            }
        }
        Ok(Catalog { records, by_utt })
    }

    /// Parse a TSV list, one utterance per line:
    /// `utt_id<TAB>spk_id<TAB>locator`. Blank lines are ignored.
    pub fn from_list_file(path: impl AsRef<Path>) -> Result<Catalog, ShardError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| ShardError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut records = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 {
                return Err(ShardError::MalformedLine {
                    path: path.to_path_buf(),
                    line: i + 1,
                    what: format!("expected 3 tab-separated fields, got {}", fields.len()),
                });
            }
            records.push(UtteranceRecord {
                utt_id: fields[0].to_string(),
                spk_id: fields[1].to_string(),
                locator: Locator::from_string_form(fields[2]),
            });
        }
        Catalog::from_records(records)
    }

    /// Build a catalog by scanning every shard named in a manifest file
    /// (one shard path per line; relative paths resolve against the
    /// manifest's directory). Member order within each shard is preserved.
    pub fn from_manifest(path: impl AsRef<Path>) -> Result<Catalog, ShardError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| ShardError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let base = path.parent().unwrap_or_else(|| Path::new(""));
        let mut records = Vec::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let shard = resolve_path(base, line);
            let mut cursor = TarCursor::open(&shard)?;
            while let Some(entry) = cursor.next_member() {
                match parse_member_name(&entry.name) {
                    Some((spk_id, utt_id)) => records.push(UtteranceRecord {
                        utt_id,
                        spk_id,
                        locator: Locator::ShardMember {
                            shard: shard.clone(),
                            member: entry.name,
                        },
                    }),
                    None => log::warn!(
                        "{}: member {:?} does not look like spk/utt.wav, ignoring",
                        shard.display(),
                        entry.name
                    ),
                }
            }
        }
        Catalog::from_records(records)
    }

    pub fn records(&self) -> &[UtteranceRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, utt_id: &str) -> Option<&UtteranceRecord> {
        self.by_utt.get(utt_id).map(|&i| &self.records[i])
    }

    /// Group utterances by speaker, utterance lists in first-seen order.
    pub fn spk2utt(&self) -> BTreeMap<String, Vec<String>> {
        let mut map: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for r in &self.records {
            map.entry(r.spk_id.clone()).or_default().push(r.utt_id.clone());
        }
        map
    }

    /// Serialize as the same TSV accepted by `from_list_file`.
    pub fn write_list(&self, path: impl AsRef<Path>) -> Result<(), ShardError> {
        let path = path.as_ref();
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&r.utt_id);
            out.push('\t');
            out.push_str(&r.spk_id);
            out.push('\t');
            out.push_str(&r.locator.to_string_form());
            out.push('\n');
        }
        fs::write(path, out).map_err(|source| ShardError::Io {
            path: path.to_path_buf(),
            source,
        })
    }
}

fn resolve_path(base: &Path, line: &str) -> PathBuf {
    let p = PathBuf::from(line);
    if p.is_relative() {
        base.join(p)
    } else {
        p
    }
}

fn parse_member_name(name: &str) -> Option<(String, String)> {
    let (spk, file) = name.rsplit_once('/')?;
    let utt = file.strip_suffix(".wav")?;
    if spk.is_empty() || utt.is_empty() {
        return None;
    }
    Some((spk.to_string(), utt.to_string()))
}

/// Pack raw-file records into `shard-%06d.tar` archives of at most
/// `shard_size` members each, preserving input order, and write a
/// `manifest.txt` (one shard path per line) beside them. Returns the shard
/// paths in order.
pub fn pack_shards(
    records: &[UtteranceRecord],
    out_dir: impl AsRef<Path>,
    shard_size: usize,
) -> Result<Vec<PathBuf>, ShardError> {
    if shard_size == 0 {
        return Err(ShardError::BadShardSize);
    }
    let out_dir = out_dir.as_ref();
    fs::create_dir_all(out_dir).map_err(|source| ShardError::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;

    // Validate ids up front so we never leave a half-written shard set.
    let mut seen = HashMap::new();
    for r in records {
        r.validate()?;
        if seen.insert(r.utt_id.clone(), ()).is_some() {
            return Err(ShardError::DuplicateUtt {
                utt_id: r.utt_id.clone(),
            });
        }
    }

    let mut shard_paths = Vec::new();
    for (shard_idx, chunk) in records.chunks(shard_size).enumerate() {
        let shard_path = out_dir.join(format!("shard-{shard_idx:06}.tar"));
        let file = File::create(&shard_path).map_err(|source| ShardError::Io {
            path: shard_path.clone(),
            source,
        })?;
        let mut builder = tar::Builder::new(file);
        for r in chunk {
            let raw_path = match &r.locator {
                Locator::RawFile(p) => p,
                Locator::ShardMember { .. } => {
                    return Err(ShardError::InvalidRecord {
                        utt_id: r.utt_id.clone(),
                        what: "pack_shards requires raw file locators".to_string(),
                    })
                }
            };
            let data = fs::read(raw_path).map_err(|source| ShardError::Unreadable {
                utt_id: r.utt_id.clone(),
                path: raw_path.clone(),
                source,
            })?;
            let member = format!("{}/{}.wav", r.spk_id, r.utt_id);
            let mut header = tar::Header::new_ustar();
            header
                .set_path(&member)
                .map_err(|source| ShardError::Io {
                    path: shard_path.clone(),
                    source,
                })?;
            header.set_size(data.len() as u64);
            header.set_mode(0o644);
            header.set_mtime(0);
            header.set_uid(0);
            header.set_gid(0);
            header.set_cksum();
            builder
                .append(&header, data.as_slice())
                .map_err(|source| ShardError::Io {
                    path: shard_path.clone(),
                    source,
                })?;
        }
        builder
            .into_inner()
            .and_then(|mut f| f.flush().map(|_| ()))
            .map_err(|source| ShardError::Io {
                path: shard_path.clone(),
                source,
            })?;
        shard_paths.push(shard_path);
    }

    let manifest = out_dir.join("manifest.txt");
    let mut text = String::new();
    for p in &shard_paths {
        text.push_str(&p.display().to_string());
        text.push('\n');
    }
    fs::write(&manifest, text).map_err(|source| ShardError::Io {
        path: manifest.clone(),
        source,
    })?;
    Ok(shard_paths)
}

const BLOCK: usize = 512;

struct TarEntry {
    name: String,
    payload_offset: u64,
    size: u64,
}

/// Minimal sequential ustar reader. Damaged members are skipped and
/// counted; a header so damaged that resynchronization is impossible ends
/// the shard (also counted).
struct TarCursor {
    file: File,
    path: PathBuf,
    pos: u64,
    skipped: usize,
    done: bool,
}

impl TarCursor {
    fn open(path: &Path) -> Result<TarCursor, ShardError> {
        let file = File::open(path).map_err(|source| ShardError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Ok(TarCursor {
            file,
            path: path.to_path_buf(),
            pos: 0,
            skipped: 0,
            done: false,
        })
    }

    /// Next regular-file member with a valid header.
    fn next_member(&mut self) -> Option<TarEntry> {
        loop {
            if self.done {
                return None;
            }
            let mut header = [0u8; BLOCK];
            if self.file.seek(SeekFrom::Start(self.pos)).is_err() {
                self.done = true;
                return None;
            }
            match self.file.read_exact(&mut header) {
                Ok(()) => {}
                Err(_) => {
                    self.done = true;
                    return None;
                }
            }
            if header.iter().all(|&b| b == 0) {
                self.done = true;
                return None;
            }

            let size = match octal_field(&header[124..136]) {
                Some(s) => s,
                None => {
                    // Without a size we cannot find the next block.
                    log::warn!("{}: unreadable size field, abandoning shard", self.path.display());
                    self.skipped += 1;
                    self.done = true;
                    return None;
                }
            };
            let payload_offset = self.pos + BLOCK as u64;
            let padded = size.div_ceil(BLOCK as u64) * BLOCK as u64;
            self.pos = payload_offset + padded;

            if !checksum_ok(&header) {
                log::warn!("{}: header checksum mismatch, skipping member", self.path.display());
                self.skipped += 1;
                continue;
            }
            let typeflag = header[156];
            if typeflag != b'0' && typeflag != 0 {
                continue; // directory or special file, not ours
            }
            let name = match member_name(&header) {
                Some(n) => n,
                None => {
                    log::warn!("{}: non-UTF8 member name, skipping", self.path.display());
                    self.skipped += 1;
                    continue;
                }
            };
            return Some(TarEntry {
                name,
                payload_offset,
                size,
            });
        }
    }

    fn read_payload(&mut self, entry: &TarEntry) -> Option<Vec<u8>> {
        if self.file.seek(SeekFrom::Start(entry.payload_offset)).is_err() {
            return None;
        }
        let mut data = vec![0u8; entry.size as usize];
        match self.file.read_exact(&mut data) {
            Ok(()) => Some(data),
            Err(_) => None,
        }
    }
}

fn octal_field(field: &[u8]) -> Option<u64> {
    let s = field
        .iter()
        .take_while(|&&b| b != 0)
        .map(|&b| b as char)
        .collect::<String>();
    let s = s.trim();
    if s.is_empty() {
        return None;
    }
    u64::from_str_radix(s, 8).ok()
}

fn checksum_ok(header: &[u8; BLOCK]) -> bool {
    let stored = match octal_field(&header[148..156]) {
        Some(v) => v,
        None => return false,
    };
    let mut sum: u64 = 0;
    for (i, &b) in header.iter().enumerate() {
        sum += if (148..156).contains(&i) { b' ' as u64 } else { b as u64 };
    }
    sum == stored
}

fn member_name(header: &[u8; BLOCK]) -> Option<String> {
    let take = |field: &[u8]| -> Option<String> {
        let end = field.iter().position(|&b| b == 0).unwrap_or(field.len());
        std::str::from_utf8(&field[..end]).ok().map(str::to_string)
    };
    let name = take(&header[0..100])?;
    let prefix = take(&header[345..500])?;
    Some(if prefix.is_empty() {
        name
    } else {
        format!("{prefix}/{name}")
    })
}

/// Byte payload of one shard member.
pub fn read_member(shard: &Path, member: &str) -> Result<Vec<u8>, ShardError> {
    let mut cursor = TarCursor::open(shard)?;
    while let Some(entry) = cursor.next_member() {
        if entry.name == member {
            return cursor.read_payload(&entry).ok_or_else(|| ShardError::Io {
                path: shard.to_path_buf(),
                source: std::io::Error::new(
                    std::io::ErrorKind::UnexpectedEof,
                    "truncated member payload",
                ),
            });
        }
    }
    Err(ShardError::MissingMember {
        shard: shard.to_path_buf(),
        member: member.to_string(),
    })
}

/// Member-name -> (payload offset, size) index over one shard, built with
/// a single sequential header scan; gives random access afterwards.
#[derive(Debug)]
pub struct ShardIndex {
    path: PathBuf,
    members: HashMap<String, (u64, u64)>,
}

impl ShardIndex {
    pub fn build(shard: &Path) -> Result<ShardIndex, ShardError> {
        let mut cursor = TarCursor::open(shard)?;
        let mut members = HashMap::new();
        while let Some(entry) = cursor.next_member() {
            members.insert(entry.name.clone(), (entry.payload_offset, entry.size));
        }
        Ok(ShardIndex {
            path: shard.to_path_buf(),
            members,
        })
    }

    pub fn contains(&self, member: &str) -> bool {
        self.members.contains_key(member)
    }

    pub fn read(&self, member: &str) -> Result<Vec<u8>, ShardError> {
        let &(offset, size) = self.members.get(member).ok_or_else(|| ShardError::MissingMember {
            shard: self.path.clone(),
            member: member.to_string(),
        })?;
        let mut file = File::open(&self.path).map_err(|source| ShardError::Io {
            path: self.path.clone(),
            source,
        })?;
        file.seek(SeekFrom::Start(offset)).map_err(|source| ShardError::Io {
            path: self.path.clone(),
            source,
        })?;
        let mut data = vec![0u8; size as usize];
        file.read_exact(&mut data).map_err(|source| ShardError::Io {
            path: self.path.clone(),
            source,
        })?;
        Ok(data)
    }
}

/// Streaming iterator over shard members with a fixed-capacity shuffle
/// buffer. The buffer fills to capacity, then each emission removes a
/// uniformly random occupant and the next member takes its place;
/// `shuffle_buffer = 0` streams in pack order. Corrupt members are skipped
/// and counted, never fatal.
pub struct ShardStream {
    shards: Vec<PathBuf>,
    next_shard: usize,
    cursor: Option<TarCursor>,
    buffer: Vec<(UtteranceRecord, AudioClip)>,
    capacity: usize,
    rng: ChaCha8Rng,
    skipped: usize,
    peak_resident: usize,
}

impl ShardStream {
    pub fn new(shards: Vec<PathBuf>, shuffle_buffer: usize, seed: u64) -> ShardStream {
        ShardStream {
            shards,
            next_shard: 0,
            cursor: None,
            buffer: Vec::with_capacity(shuffle_buffer),
            capacity: shuffle_buffer,
            rng: ChaCha8Rng::seed_from_u64(seed),
            skipped: 0,
            peak_resident: 0,
        }
    }

    /// Stream every shard listed in a manifest file.
    pub fn from_manifest(
        manifest: impl AsRef<Path>,
        shuffle_buffer: usize,
        seed: u64,
    ) -> Result<ShardStream, ShardError> {
        let manifest = manifest.as_ref();
        let text = fs::read_to_string(manifest).map_err(|source| ShardError::Io {
            path: manifest.to_path_buf(),
            source,
        })?;
        let base = manifest.parent().unwrap_or_else(|| Path::new(""));
        let shards = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(|l| resolve_path(base, l))
            .collect();
        Ok(ShardStream::new(shards, shuffle_buffer, seed))
    }

    /// Members skipped so far because of damage or unrecognized names.
    pub fn skipped(&self) -> usize {
        self.skipped
    }

    /// High-water mark of decoded clips held at once; bounded by
    /// shuffle_buffer + 1.
    pub fn peak_resident(&self) -> usize {
        self.peak_resident
    }

    /// Next decodable member in pack order, crossing shard boundaries.
    fn next_sequential(&mut self) -> Option<(UtteranceRecord, AudioClip)> {
        loop {
            if self.cursor.is_none() {
                if self.next_shard >= self.shards.len() {
                    return None;
                }
                let path = &self.shards[self.next_shard];
                self.next_shard += 1;
                match TarCursor::open(path) {
                    Ok(c) => self.cursor = Some(c),
                    Err(e) => {
                        log::warn!("cannot open shard: {e}");
                        self.skipped += 1;
                        continue;
                    }
                }
            }
            let cursor = self.cursor.as_mut().expect("cursor set above");
            let entry = match cursor.next_member() {
                Some(e) => e,
                None => {
                    self.skipped += cursor.skipped;
                    cursor.skipped = 0;
                    self.cursor = None;
                    continue;
                }
            };
            let shard_path = cursor.path.clone();
            let label = format!("{}#{}", shard_path.display(), entry.name);
            let (spk_id, utt_id) = match parse_member_name(&entry.name) {
                Some(ids) => ids,
                None => {
                    log::warn!("{label}: unrecognized member name, skipping");
                    self.skipped += 1;
                    continue;
                }
            };
            let data = match cursor.read_payload(&entry) {
                Some(d) => d,
                None => {
                    log::warn!("{label}: truncated payload, skipping");
                    self.skipped += 1;
                    continue;
                }
            };
            match wav::decode_wav(&data, &label) {
                Ok(clip) => {
                    let record = UtteranceRecord {
                        utt_id,
                        spk_id,
                        locator: Locator::ShardMember {
                            shard: shard_path,
                            member: entry.name,
                        },
                    };
                    return Some((record, clip));
                }
                Err(e) => {
                    log::warn!("skipping undecodable member: {e}");
                    self.skipped += 1;
                }
            }
        }
    }
}

impl Iterator for ShardStream {
    type Item = (UtteranceRecord, AudioClip);

    fn next(&mut self) -> Option<Self::Item> {
        if self.capacity == 0 {
            let item = self.next_sequential();
            if item.is_some() {
                self.peak_resident = self.peak_resident.max(1);
            }
            return item;
        }
        while self.buffer.len() < self.capacity {
            match self.next_sequential() {
                Some(item) => self.buffer.push(item),
                None => break,
            }
        }
        if self.buffer.is_empty() {
            return None;
        }
        self.peak_resident = self.peak_resident.max(self.buffer.len());
        let idx = self.rng.gen_range(0..self.buffer.len());
        Some(self.buffer.swap_remove(idx))
    }
}
