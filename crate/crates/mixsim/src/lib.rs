//! On-the-fly speech mixture simulation for target-speaker-extraction
//! training, plus the surrounding plumbing: WAV I/O, tar-shard corpus
//! streaming, room impulse response synthesis, evaluation metrics, and
//! reference speaker-cue fusion kernels.
//!
//! The centerpiece is [`simulate::Simulator`], which turns an utterance
//! catalog into an endless, seeded stream of (mixture, reference,
//! enrollment) training examples. Example `i` under seed `s` is a pure
//! function of `(s, i)`: any number of workers partitioning the index
//! space produce identical examples.

pub mod audio;
pub mod dsp;
pub mod fusion;
pub mod metrics;
pub mod rir;
pub mod shard;
pub mod simulate;
pub mod textmat;
pub mod wav;

pub use audio::AudioClip;
