//! Evaluation measures: scale-invariant SNR and plain SNR.
//!
//! `si_snr` is the positive metric; training code that wants a loss takes
//! its negation. No epsilon is folded into the logs: an exact-zero error
//! vector yields +inf and callers clamp for display if they need to.

use std::path::PathBuf;

use thiserror::Error;

use crate::audio::AudioClip;

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("length mismatch: {a} vs {b} samples")]
    LengthMismatch { a: usize, b: usize },
    #[error("sample rate mismatch: {a} Hz vs {b} Hz")]
    SampleRateMismatch { a: u32, b: u32 },
    #[error("empty clip")]
    Empty,
    #[error("all-zero reference, SI-SNR undefined")]
    ZeroReference,
    #[error("all-zero estimate, SI-SNR undefined")]
    ZeroEstimate,
}

/// SI-SNR in dB. With `zero_mean` (the usual convention, default in every
/// caller here) both signals are centered first. The reference is scaled to
/// the orthogonal projection of the estimate; what remains is error:
///   s_t = (<e, r> / <r, r>) r,  err = e - s_t,
///   si_snr = 10 log10(<s_t, s_t> / <err, err>).
/// Returns +inf iff the estimate is a nonzero scalar multiple of the
/// (centered) reference.
pub fn si_snr(estimate: &AudioClip, reference: &AudioClip, zero_mean: bool) -> Result<f64, MetricError> {
    check_pair(estimate, reference)?;
    let (e, r) = if zero_mean {
        (centered(&estimate.samples), centered(&reference.samples))
    } else {
        (estimate.samples.clone(), reference.samples.clone())
    };
    let rr = dot(&r, &r);
    if rr == 0.0 {
        return Err(MetricError::ZeroReference);
    }
    let alpha = dot(&e, &r) / rr;
    let target_energy = alpha * alpha * rr;
    let err_energy: f64 = e
        .iter()
        .zip(&r)
        .map(|(&ei, &ri)| {
            let d = ei - alpha * ri;
            d * d
        })
        .sum();
    if err_energy == 0.0 {
        if target_energy == 0.0 {
            return Err(MetricError::ZeroEstimate);
        }
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (target_energy / err_energy).log10())
}

/// The training-loss convention: negated SI-SNR, so minimizing the loss
/// maximizes the metric.
pub fn si_snr_loss(
    estimate: &AudioClip,
    reference: &AudioClip,
    zero_mean: bool,
) -> Result<f64, MetricError> {
    si_snr(estimate, reference, zero_mean).map(|v| -v)
}

/// Plain energy-ratio SNR: 10 log10(sum s^2 / sum n^2). Zero noise gives
/// the +inf sentinel rather than an error.
pub fn snr(signal: &AudioClip, noise: &AudioClip) -> Result<f64, MetricError> {
    check_pair(signal, noise)?;
    let s = dot(&signal.samples, &signal.samples);
    let n = dot(&noise.samples, &noise.samples);
    if n == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (s / n).log10())
}

fn check_pair(a: &AudioClip, b: &AudioClip) -> Result<(), MetricError> {
    if a.is_empty() || b.is_empty() {
        return Err(MetricError::Empty);
    }
    if a.len() != b.len() {
        return Err(MetricError::LengthMismatch { a: a.len(), b: b.len() });
    }
    if a.sample_rate != b.sample_rate {
        return Err(MetricError::SampleRateMismatch {
            a: a.sample_rate,
            b: b.sample_rate,
        });
    }
    Ok(())
}

fn centered(x: &[f64]) -> Vec<f64> {
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    x.iter().map(|v| v - mean).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

/// Metrics for one estimate/reference pair. `snr_db` here treats the
/// difference estimate-minus-reference as the noise.
#[derive(Debug, Clone, Copy)]
pub struct MetricReport {
    pub si_snr_db: f64,
    pub snr_db: f64,
    pub num_samples: usize,
}

/// Both metrics for an (estimate, reference) pair.
pub fn pair_metrics(
    estimate: &AudioClip,
    reference: &AudioClip,
    zero_mean: bool,
) -> Result<MetricReport, MetricError> {
    let si = si_snr(estimate, reference, zero_mean)?;
    let diff = AudioClip::new(
        estimate
            .samples
            .iter()
            .zip(&reference.samples)
            .map(|(&e, &r)| e - r)
            .collect(),
        estimate.sample_rate,
    );
    let plain = snr(reference, &diff)?;
    Ok(MetricReport {
        si_snr_db: si,
        snr_db: plain,
        num_samples: estimate.len(),
    })
}

/// One row of an `eval_pairs` run; failures carry the error text inline.
#[derive(Debug)]
pub struct PairOutcome {
    pub estimate: PathBuf,
    pub reference: PathBuf,
    pub result: Result<MetricReport, String>,
}

/// Aggregate over a pair list: per-pair rows in input order plus the
/// unweighted mean over pairs that evaluated cleanly.
#[derive(Debug)]
pub struct EvalSummary {
    pub pairs: Vec<PairOutcome>,
    /// None when no pair evaluated; infinities propagate into the mean.
    pub mean: Option<MetricReport>,
    pub failed: usize,
}

/// Evaluate (estimate, reference) WAV pairs. Length mismatches are handled
/// by truncating both to the shorter length with a warning; unreadable
/// files become per-pair failures and are excluded from the mean.
pub fn eval_pairs(pairs: &[(PathBuf, PathBuf)], zero_mean: bool) -> EvalSummary {
    let mut rows = Vec::with_capacity(pairs.len());
    for (est_path, ref_path) in pairs {
        let result = eval_one(est_path, ref_path, zero_mean);
        rows.push(PairOutcome {
            estimate: est_path.clone(),
            reference: ref_path.clone(),
            result,
        });
    }

    let ok: Vec<&MetricReport> = rows.iter().filter_map(|r| r.result.as_ref().ok()).collect();
    let failed = rows.len() - ok.len();
    let mean = if ok.is_empty() {
        None
    } else {
        let n = ok.len() as f64;
        Some(MetricReport {
            si_snr_db: ok.iter().map(|m| m.si_snr_db).sum::<f64>() / n,
            snr_db: ok.iter().map(|m| m.snr_db).sum::<f64>() / n,
            num_samples: ok.iter().map(|m| m.num_samples).sum(),
        })
    };
    EvalSummary { pairs: rows, mean, failed }
}

fn eval_one(est_path: &PathBuf, ref_path: &PathBuf, zero_mean: bool) -> Result<MetricReport, String> {
    let mut est = crate::wav::read_wav(est_path).map_err(|e| e.to_string())?;
    let mut reference = crate::wav::read_wav(ref_path).map_err(|e| e.to_string())?;
    if est.len() != reference.len() {
        let n = est.len().min(reference.len());
        log::warn!(
            "length mismatch {} vs {}, truncating both to {} samples ({} / {})",
            est.len(),
            reference.len(),
            n,
            est_path.display(),
            ref_path.display()
        );
        est = est.truncated(n);
        reference = reference.truncated(n);
    }
    pair_metrics(&est, &reference, zero_mean).map_err(|e| e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wav::{write_wav, WavEncoding};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn noise_clip(n: usize, seed: u64) -> AudioClip {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        AudioClip::new((0..n).map(|_| rng.gen_range(-1.0..1.0)).collect(), 16000)
    }

    #[test]
    fn si_snr_of_identical_is_inf() {
        let r = noise_clip(1000, 1);
        assert_eq!(si_snr(&r, &r, true).unwrap(), f64::INFINITY);
    }

    #[test]
    fn si_snr_of_scaled_reference_is_inf() {
        // Power-of-two scales are exact in floating point, so the error
        // vector is exactly zero and the metric is +inf. Non-dyadic scales
        // leave rounding residue and land merely enormous (covered by the
        // scale-invariance test).
        let r = noise_clip(1000, 2);
        for &a in &[0.5, 2.0, -4.0] {
            assert_eq!(si_snr(&r.scaled(a), &r, true).unwrap(), f64::INFINITY);
        }
    }

    #[test]
    fn si_snr_scale_invariant_in_estimate() {
        let r = noise_clip(1000, 3);
        let e = noise_clip(1000, 4);
        let base = si_snr(&e, &r, true).unwrap();
        for &a in &[1e-3, 1.0, 1e3, -2.0] {
            let v = si_snr(&e.scaled(a), &r, true).unwrap();
            assert!((v - base).abs() < 1e-9, "alpha {a}: {v} vs {base}");
        }
    }

    #[test]
    fn si_snr_scale_invariant_in_reference() {
        let r = noise_clip(1000, 5);
        let e = noise_clip(1000, 6);
        let base = si_snr(&e, &r, true).unwrap();
        for &b in &[1e-3, 7.0, -0.5] {
            let v = si_snr(&e, &r.scaled(b), true).unwrap();
            assert!((v - base).abs() < 1e-9, "beta {b}: {v} vs {base}");
        }
    }

    /// Orthogonal construction: e = r + n with n orthogonal to r and
    /// ||n|| = ||r||/10 must measure exactly 20 dB.
    #[test]
    fn si_snr_orthogonal_case_is_20_db() {
        let r = AudioClip::new(centered(&noise_clip(4000, 7).samples), 16000);
        let v = centered(&noise_clip(4000, 8).samples);
        // Orthogonalize v against r, then set the norm ratio to 1/10.
        let proj = dot(&v, &r.samples) / dot(&r.samples, &r.samples);
        let mut n: Vec<f64> = v
            .iter()
            .zip(&r.samples)
            .map(|(&vi, &ri)| vi - proj * ri)
            .collect();
        let scale = (dot(&r.samples, &r.samples) / dot(&n, &n)).sqrt() / 10.0;
        for x in n.iter_mut() {
            *x *= scale;
        }
        let e = AudioClip::new(
            r.samples.iter().zip(&n).map(|(&ri, &ni)| ri + ni).collect(),
            16000,
        );
        let v = si_snr(&e, &r, true).unwrap();
        assert!((v - 20.0).abs() < 1e-9, "got {v}");
    }

    #[test]
    fn zero_mean_flag_matters_for_dc() {
        // Dyadic samples mirrored to an exactly-zero mean, plus an exactly
        // representable DC offset: with centering the offset vanishes
        // without any rounding residue, so the metric is +inf; without
        // centering the offset counts as error.
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let half: Vec<f64> = (0..250)
            .map(|_| rng.gen_range(-512i32..512) as f64 / 1024.0)
            .collect();
        let mut samples = half.clone();
        samples.extend(half.iter().map(|x| -x));
        samples[0] += 2.0; // guarantees nonzero reference energy
        samples[250] -= 2.0; // mirror of samples[0], keeps the mean at zero
        let r = AudioClip::new(samples, 16000);
        let e = AudioClip::new(r.samples.iter().map(|x| x + 0.25).collect(), 16000);
        assert_eq!(si_snr(&e, &r, true).unwrap(), f64::INFINITY);
        assert!(si_snr(&e, &r, false).unwrap().is_finite());
    }

    #[test]
    fn si_snr_degenerate_inputs() {
        let z = AudioClip::new(vec![0.0; 10], 16000);
        let r = noise_clip(10, 10);
        assert!(matches!(si_snr(&r, &z, true), Err(MetricError::ZeroReference)));
        assert!(matches!(si_snr(&z, &r, true), Err(MetricError::ZeroEstimate)));
        // A constant reference is all-zero after centering (0.5 and the
        // partial sums are exactly representable, so the mean is exact).
        let c = AudioClip::new(vec![0.5; 10], 16000);
        assert!(matches!(si_snr(&r, &c, true), Err(MetricError::ZeroReference)));
        let short = noise_clip(5, 11);
        assert!(matches!(
            si_snr(&short, &r, true),
            Err(MetricError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn loss_convention_is_negation() {
        let r = noise_clip(100, 12);
        let e = noise_clip(100, 13);
        let v = si_snr(&e, &r, true).unwrap();
        assert_eq!(si_snr_loss(&e, &r, true).unwrap(), -v);
    }

    #[test]
    fn snr_basic_cases() {
        let s = AudioClip::new(vec![1.0, -1.0], 16000);
        let n = AudioClip::new(vec![-1.0, 1.0], 16000);
        assert_eq!(snr(&s, &n).unwrap(), 0.0);

        let n10 = AudioClip::new(vec![0.1, -0.1], 16000);
        assert!((snr(&s, &n10).unwrap() - 20.0).abs() < 1e-12);

        let z = AudioClip::new(vec![0.0, 0.0], 16000);
        assert_eq!(snr(&s, &z).unwrap(), f64::INFINITY);
    }

    #[test]
    fn snr_closes_rescale_loop() {
        let t = noise_clip(3000, 14);
        let i = noise_clip(3000, 15);
        for &req in &[-7.5, 0.0, 12.25] {
            let scaled = crate::dsp::rescale_to_snr(&t, &i, req).unwrap();
            let measured = snr(&t, &scaled).unwrap();
            assert!((measured - req).abs() < 1e-9, "req {req} got {measured}");
        }
    }

    #[test]
    fn eval_pairs_identity_pair_reports_inf() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.wav");
        write_wav(&noise_clip(200, 16), &p, WavEncoding::Float32).unwrap();
        let summary = eval_pairs(&[(p.clone(), p)], true);
        assert_eq!(summary.failed, 0);
        assert_eq!(summary.mean.unwrap().si_snr_db, f64::INFINITY);
    }

    #[test]
    fn eval_pairs_mean_and_permutation_invariance() {
        let dir = tempfile::tempdir().unwrap();
        let r = noise_clip(300, 17);
        let rp = dir.path().join("ref.wav");
        write_wav(&r, &rp, WavEncoding::Float32).unwrap();
        let mut paths = Vec::new();
        for (i, seed) in [(0usize, 20u64), (1, 21)] {
            let n = noise_clip(300, seed);
            let e = AudioClip::new(
                r.samples
                    .iter()
                    .zip(&n.samples)
                    .map(|(&a, &b)| a + 0.05 * b)
                    .collect(),
                16000,
            );
            let p = dir.path().join(format!("est{i}.wav"));
            write_wav(&e, &p, WavEncoding::Float32).unwrap();
            paths.push(p);
        }
        let list: Vec<(PathBuf, PathBuf)> =
            paths.iter().map(|p| (p.clone(), rp.clone())).collect();
        let fwd = eval_pairs(&list, true);
        let a = fwd.pairs[0].result.as_ref().unwrap().si_snr_db;
        let b = fwd.pairs[1].result.as_ref().unwrap().si_snr_db;
        let mean = fwd.mean.unwrap();
        assert!((mean.si_snr_db - (a + b) / 2.0).abs() < 1e-12);

        let mut rev = list.clone();
        rev.reverse();
        let bwd = eval_pairs(&rev, true);
        assert!((bwd.mean.unwrap().si_snr_db - mean.si_snr_db).abs() < 1e-12);
    }

    #[test]
    fn eval_pairs_reports_failures_inline() {
        let dir = tempfile::tempdir().unwrap();
        let good = dir.path().join("g.wav");
        write_wav(&noise_clip(100, 22), &good, WavEncoding::Float32).unwrap();
        let missing = dir.path().join("missing.wav");
        let summary = eval_pairs(
            &[(good.clone(), good.clone()), (missing, good)],
            true,
        );
        assert_eq!(summary.failed, 1);
        assert!(summary.pairs[1].result.is_err());
        assert!(summary.mean.is_some());
    }

    #[test]
    fn eval_pairs_truncates_mismatched_lengths() {
        let dir = tempfile::tempdir().unwrap();
        let long = noise_clip(400, 23);
        let short = long.truncated(300);
        let lp = dir.path().join("long.wav");
        let sp = dir.path().join("short.wav");
        write_wav(&long, &lp, WavEncoding::Float32).unwrap();
        write_wav(&short, &sp, WavEncoding::Float32).unwrap();
        let summary = eval_pairs(&[(lp, sp)], true);
        let m = summary.pairs[0].result.as_ref().unwrap();
        assert_eq!(m.num_samples, 300);
        assert_eq!(m.si_snr_db, f64::INFINITY);
    }
}
