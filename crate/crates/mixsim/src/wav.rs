//! Minimal RIFF/WAVE codec: PCM 16-bit and IEEE float-32, little-endian.
//!
//! Reading accepts mono or multichannel files (channel 0 is taken with a
//! warning) and tolerates unknown chunks. Writing always produces mono
//! files with a plain 16-byte `fmt ` chunk, which every mainstream reader
//! accepts for both PCM and float data.

use std::fs;
use std::io::Write;
use std::path::Path;

use thiserror::Error;

use crate::audio::AudioClip;

#[derive(Debug, Error)]
pub enum WavError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: not a RIFF/WAVE file")]
    NotWave { path: String },
    #[error("{path}: malformed WAV ({what})")]
    Malformed { path: String, what: &'static str },
    #[error("{path}: unsupported WAV encoding (format tag {format_tag}, {bits_per_sample}-bit)")]
    Unsupported {
        path: String,
        format_tag: u16,
        bits_per_sample: u16,
    },
    #[error("{path}: non-finite sample at index {index}")]
    NonFinite { path: String, index: usize },
}

/// Sample encoding for [`write_wav`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WavEncoding {
    /// 16-bit signed PCM; samples are rounded to nearest and saturated at +/-1.
    Pcm16,
    /// 32-bit IEEE float, stored as-is.
    Float32,
}

const FORMAT_PCM: u16 = 1;
const FORMAT_IEEE_FLOAT: u16 = 3;
const FORMAT_EXTENSIBLE: u16 = 0xFFFE;

/// Read a WAV file into a mono [`AudioClip`].
///
/// PCM16 samples are decoded to floats by division by 32768; float-32
/// samples pass through unchanged. Multichannel files keep channel 0 only.
pub fn read_wav(path: impl AsRef<Path>) -> Result<AudioClip, WavError> {
    let path = path.as_ref();
    let label = path.display().to_string();
    let bytes = fs::read(path).map_err(|source| WavError::Io {
        path: label.clone(),
        source,
    })?;
    decode_wav(&bytes, &label)
}

/// Decode a WAV byte buffer. `label` names the source in errors and warnings.
pub fn decode_wav(bytes: &[u8], label: &str) -> Result<AudioClip, WavError> {
    let err_malformed = |what| WavError::Malformed {
        path: label.to_string(),
        what,
    };

    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(WavError::NotWave {
            path: label.to_string(),
        });
    }

    let mut fmt: Option<FmtChunk> = None;
    let mut data: Option<&[u8]> = None;
    let mut pos = 12usize;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = u32::from_le_bytes(bytes[pos + 4..pos + 8].try_into().unwrap()) as usize;
        let body_start = pos + 8;
        // Tolerate a final chunk whose declared size overruns the file.
        let body_end = (body_start + size).min(bytes.len());
        let body = &bytes[body_start..body_end];
        match id {
            b"fmt " => fmt = Some(parse_fmt(body).ok_or_else(|| err_malformed("fmt chunk"))?),
            b"data" => {
                if body.len() < size && id == b"data" {
                    log::warn!("{label}: data chunk truncated ({} of {size} bytes)", body.len());
                }
                data = Some(body);
            }
            _ => {}
        }
        // Chunks are word-aligned: odd sizes are followed by a pad byte.
        pos = body_start + size + (size & 1);
    }

    let fmt = fmt.ok_or_else(|| err_malformed("missing fmt chunk"))?;
    let data = data.ok_or_else(|| err_malformed("missing data chunk"))?;
    if fmt.channels == 0 {
        return Err(err_malformed("zero channels"));
    }
    if fmt.sample_rate == 0 {
        return Err(err_malformed("zero sample rate"));
    }
    if fmt.channels > 1 {
        log::warn!("{label}: {} channels, taking channel 0", fmt.channels);
    }

    let ch = fmt.channels as usize;
    let samples = match (fmt.format_tag, fmt.bits_per_sample) {
        (FORMAT_PCM, 16) => {
            let frame = 2 * ch;
            let n = data.len() / frame;
            (0..n)
                .map(|i| {
                    let off = i * frame;
                    let v = i16::from_le_bytes([data[off], data[off + 1]]);
                    v as f64 / 32768.0
                })
                .collect()
        }
        (FORMAT_IEEE_FLOAT, 32) => {
            let frame = 4 * ch;
            let n = data.len() / frame;
            (0..n)
                .map(|i| {
                    let off = i * frame;
                    let v = f32::from_le_bytes(data[off..off + 4].try_into().unwrap());
                    v as f64
                })
                .collect()
        }
        (tag, bits) => {
            return Err(WavError::Unsupported {
                path: label.to_string(),
                format_tag: tag,
                bits_per_sample: bits,
            })
        }
    };

    Ok(AudioClip::new(samples, fmt.sample_rate))
}

struct FmtChunk {
    format_tag: u16,
    channels: u16,
    sample_rate: u32,
    bits_per_sample: u16,
}

fn parse_fmt(body: &[u8]) -> Option<FmtChunk> {
    if body.len() < 16 {
        return None;
    }
    let mut format_tag = u16::from_le_bytes([body[0], body[1]]);
    let channels = u16::from_le_bytes([body[2], body[3]]);
    let sample_rate = u32::from_le_bytes(body[4..8].try_into().unwrap());
    let bits_per_sample = u16::from_le_bytes([body[14], body[15]]);
    if format_tag == FORMAT_EXTENSIBLE {
        // WAVE_FORMAT_EXTENSIBLE: the real tag is the first two bytes of the
        // SubFormat GUID at offset 24 of the fmt body.
        if body.len() < 26 {
            return None;
        }
        format_tag = u16::from_le_bytes([body[24], body[25]]);
    }
    Some(FmtChunk {
        format_tag,
        channels,
        sample_rate,
        bits_per_sample,
    })
}

/// Write a mono WAV file.
pub fn write_wav(
    clip: &AudioClip,
    path: impl AsRef<Path>,
    encoding: WavEncoding,
) -> Result<(), WavError> {
    let path = path.as_ref();
    let label = path.display().to_string();
    let bytes = encode_wav(clip, encoding, &label)?;
    let mut file = fs::File::create(path).map_err(|source| WavError::Io {
        path: label.clone(),
        source,
    })?;
    file.write_all(&bytes).map_err(|source| WavError::Io {
        path: label,
        source,
    })
}

/// Encode a clip as WAV bytes. Fails on non-finite samples.
pub fn encode_wav(
    clip: &AudioClip,
    encoding: WavEncoding,
    label: &str,
) -> Result<Vec<u8>, WavError> {
    if let Some(index) = clip.samples.iter().position(|x| !x.is_finite()) {
        return Err(WavError::NonFinite {
            path: label.to_string(),
            index,
        });
    }

    let (format_tag, bytes_per_sample) = match encoding {
        WavEncoding::Pcm16 => (FORMAT_PCM, 2u32),
        WavEncoding::Float32 => (FORMAT_IEEE_FLOAT, 4u32),
    };
    let data_len = clip.samples.len() as u32 * bytes_per_sample;
    let mut out = Vec::with_capacity(44 + data_len as usize);

    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&format_tag.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes()); // mono
    out.extend_from_slice(&clip.sample_rate.to_le_bytes());
    let byte_rate = clip.sample_rate * bytes_per_sample;
    out.extend_from_slice(&byte_rate.to_le_bytes());
    out.extend_from_slice(&(bytes_per_sample as u16).to_le_bytes()); // block align
    out.extend_from_slice(&(8 * bytes_per_sample as u16).to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len.to_le_bytes());

    match encoding {
        WavEncoding::Pcm16 => {
            for &x in &clip.samples {
                out.extend_from_slice(&pcm16_from_f64(x).to_le_bytes());
            }
        }
        WavEncoding::Float32 => {
            for &x in &clip.samples {
                out.extend_from_slice(&(x as f32).to_le_bytes());
            }
        }
    }
    Ok(out)
}

/// Round to nearest with saturation at the i16 range (i.e. +/-1.0 full scale).
fn pcm16_from_f64(x: f64) -> i16 {
    let v = (x * 32768.0).round();
    v.clamp(i16::MIN as f64, i16::MAX as f64) as i16
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pcm16_bytes(values: &[i16], sample_rate: u32, channels: u16) -> Vec<u8> {
        let data_len = (values.len() * 2) as u32;
        let mut out = Vec::new();
        out.extend_from_slice(b"RIFF");
        out.extend_from_slice(&(36 + data_len).to_le_bytes());
        out.extend_from_slice(b"WAVE");
        out.extend_from_slice(b"fmt ");
        out.extend_from_slice(&16u32.to_le_bytes());
        out.extend_from_slice(&1u16.to_le_bytes());
        out.extend_from_slice(&channels.to_le_bytes());
        out.extend_from_slice(&sample_rate.to_le_bytes());
        out.extend_from_slice(&(sample_rate * 2 * channels as u32).to_le_bytes());
        out.extend_from_slice(&(2 * channels).to_le_bytes());
        out.extend_from_slice(&16u16.to_le_bytes());
        out.extend_from_slice(b"data");
        out.extend_from_slice(&data_len.to_le_bytes());
        for v in values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    #[test]
    fn pcm16_fixed_point_scaling() {
        let bytes = pcm16_bytes(&[0, 16384, -32768], 16000, 1);
        let clip = decode_wav(&bytes, "test").unwrap();
        assert_eq!(clip.samples, vec![0.0, 0.5, -1.0]);
        assert_eq!(clip.sample_rate, 16000);
    }

    #[test]
    fn float32_passthrough() {
        let clip = AudioClip::new(vec![0.25], 16000);
        let bytes = encode_wav(&clip, WavEncoding::Float32, "test").unwrap();
        let back = decode_wav(&bytes, "test").unwrap();
        assert_eq!(back.samples, vec![0.25]);
    }

    #[test]
    fn multichannel_takes_channel_zero() {
        // Interleaved stereo: L R L R
        let bytes = pcm16_bytes(&[100, -100, 200, -200], 8000, 2);
        let clip = decode_wav(&bytes, "test").unwrap();
        assert_eq!(clip.len(), 2);
        assert_eq!(clip.samples[0], 100.0 / 32768.0);
        assert_eq!(clip.samples[1], 200.0 / 32768.0);
    }

    #[test]
    fn pcm16_write_saturates() {
        let clip = AudioClip::new(vec![1.5], 16000);
        let bytes = encode_wav(&clip, WavEncoding::Pcm16, "test").unwrap();
        let data = &bytes[44..];
        assert_eq!(i16::from_le_bytes([data[0], data[1]]), 32767);
    }

    #[test]
    fn pcm16_write_zero() {
        let clip = AudioClip::new(vec![0.0], 16000);
        let bytes = encode_wav(&clip, WavEncoding::Pcm16, "test").unwrap();
        let data = &bytes[44..];
        assert_eq!(i16::from_le_bytes([data[0], data[1]]), 0);
    }

    #[test]
    fn rejects_garbage() {
        assert!(matches!(
            decode_wav(b"not a wav file at all....", "x"),
            Err(WavError::NotWave { .. })
        ));
    }

    #[test]
    fn rejects_unsupported_encoding() {
        // format tag 6 = A-law
        let mut bytes = pcm16_bytes(&[0], 8000, 1);
        bytes[20] = 6;
        assert!(matches!(
            decode_wav(&bytes, "x"),
            Err(WavError::Unsupported { format_tag: 6, .. })
        ));
    }

    #[test]
    fn rejects_non_finite_on_write() {
        let clip = AudioClip::new(vec![0.0, f64::NAN], 16000);
        assert!(matches!(
            encode_wav(&clip, WavEncoding::Float32, "x"),
            Err(WavError::NonFinite { index: 1, .. })
        ));
    }

    #[test]
    fn missing_flag_io_error_names_path() {
        let err = read_wav("/definitely/not/here.wav").unwrap_err();
        assert!(err.to_string().contains("/definitely/not/here.wav"));
    }

    #[test]
    fn skips_unknown_chunks() {
        // LIST chunk with odd size (forces pad-byte handling) before data.
        let mut out = Vec::new();
        let payload = 7i16.to_le_bytes();
        out.extend_from_slice(b"RIFF");
        out.extend_from_slice(&0u32.to_le_bytes()); // size ignored by reader
        out.extend_from_slice(b"WAVE");
        out.extend_from_slice(b"fmt ");
        out.extend_from_slice(&16u32.to_le_bytes());
        out.extend_from_slice(&1u16.to_le_bytes());
        out.extend_from_slice(&1u16.to_le_bytes());
        out.extend_from_slice(&16000u32.to_le_bytes());
        out.extend_from_slice(&32000u32.to_le_bytes());
        out.extend_from_slice(&2u16.to_le_bytes());
        out.extend_from_slice(&16u16.to_le_bytes());
        out.extend_from_slice(b"LIST");
        out.extend_from_slice(&3u32.to_le_bytes());
        out.extend_from_slice(b"abc\0"); // 3 bytes + pad
        out.extend_from_slice(b"data");
        out.extend_from_slice(&2u32.to_le_bytes());
        out.extend_from_slice(&payload);
        let clip = decode_wav(&out, "test").unwrap();
        assert_eq!(clip.samples, vec![7.0 / 32768.0]);
    }

    proptest! {
        #[test]
        fn float32_roundtrip_is_bit_exact(
            samples in proptest::collection::vec(-1.0f32..1.0f32, 1..256)
        ) {
            let clip = AudioClip::new(samples.iter().map(|&x| x as f64).collect(), 16000);
            let bytes = encode_wav(&clip, WavEncoding::Float32, "t").unwrap();
            let back = decode_wav(&bytes, "t").unwrap();
            prop_assert_eq!(&back.samples, &clip.samples);
            prop_assert_eq!(back.sample_rate, clip.sample_rate);
        }

        #[test]
        fn pcm16_roundtrip_error_bounded(
            samples in proptest::collection::vec(-1.0f64..1.0f64, 1..256)
        ) {
            let clip = AudioClip::new(samples, 16000);
            let bytes = encode_wav(&clip, WavEncoding::Pcm16, "t").unwrap();
            let back = decode_wav(&bytes, "t").unwrap();
            for (a, b) in clip.samples.iter().zip(back.samples.iter()) {
                prop_assert!((a - b).abs() <= 1.0 / 32768.0);
            }
        }
    }
}
