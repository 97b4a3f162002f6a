//! Single-pixel measurement simulation: each intensity is the pattern-weighted
//! sum of the object, plus optional additive white Gaussian noise.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::patterns::stack::encode_pattern_stack;
use crate::patterns::{row_bytes, Pattern, PatternSequence};
use crate::raster::Image;

/// Additive Gaussian noise in raw intensity-sum units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    pub mean: f64,
    pub std_dev: f64,
    pub seed: u64,
}

impl NoiseModel {
    pub fn noiseless() -> Self {
        Self { mean: 0.0, std_dev: 0.0, seed: 0 }
    }

    pub fn gaussian(mean: f64, std_dev: f64, seed: u64) -> Result<Self> {
        let n = Self { mean, std_dev, seed };
        n.validate()?;
        Ok(n)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.mean.is_finite() || !self.std_dev.is_finite() || self.std_dev < 0.0 {
            return Err(Error::InvalidNoise(format!("mean {} / std {}", self.mean, self.std_dev)));
        }
        Ok(())
    }

    pub fn is_noiseless(&self) -> bool {
        self.std_dev == 0.0
    }

    /// Noise draws for measurement indices `start..start + n`; draw `i` depends
    /// only on `(seed, i)`.
    pub fn draws(&self, start: usize, n: usize) -> Vec<f64> {
        let base = ChaCha8Rng::seed_from_u64(self.seed);
        (start..start + n)
            .map(|i| {
                let mut rng = base.clone();
                rng.set_stream(i as u64);
                let z: f64 = StandardNormal.sample(&mut rng);
                self.mean + self.std_dev * z
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSet {
    pub intensities: Vec<f64>,
    /// Human-readable identifier of the generating sequence.
    pub sequence_id: String,
    /// SHA-256 (hex) of the sequence's GPAT1 encoding.
    pub sequence_hash: String,
    pub noise: NoiseModel,
}

impl MeasurementSet {
    pub fn count(&self) -> usize {
        self.intensities.len()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,intensity\n");
        for (i, v) in self.intensities.iter().enumerate() {
            let _ = writeln!(out, "{i},{v}");
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_csv())?;
        Ok(())
    }
}

/// Reads an `index,intensity` CSV back into an intensity vector ordered by index.
pub fn read_intensities_csv(path: impl AsRef<Path>) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path)?;
    let mut rows = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (lineno == 0 && line.starts_with("index")) {
            continue;
        }
        let (i, v) = line
            .split_once(',')
            .ok_or_else(|| Error::Config(format!("line {}: expected 'index,intensity'", lineno + 1)))?;
        let i: usize = i.trim().parse().map_err(|_| Error::Config(format!("line {}: bad index", lineno + 1)))?;
        let v: f64 = v.trim().parse().map_err(|_| Error::Config(format!("line {}: bad intensity", lineno + 1)))?;
        rows.push((i, v));
    }
    rows.sort_by_key(|r| r.0);
    if rows.iter().enumerate().any(|(k, r)| r.0 != k) {
        return Err(Error::Config("intensity indices are not 0..n".into()));
    }
    Ok(rows.into_iter().map(|r| r.1).collect())
}

pub fn sequence_hash(seq: &PatternSequence) -> String {
    let digest = Sha256::digest(encode_pattern_stack(seq));
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// `Σ_{x,y} S(x,y) O(x,y)` over the set bits of a packed mask.
pub fn pattern_dot(pattern: &Pattern, object: &[f64]) -> f64 {
    let w = pattern.width();
    let stride = row_bytes(w);
    let bits = pattern.packed();
    let mut total = 0.0;
    for y in 0..pattern.height() {
        let row = &object[y * w..(y + 1) * w];
        for (bx, &byte) in bits[y * stride..(y + 1) * stride].iter().enumerate() {
            let mut b = byte;
            while b != 0 {
                let lead = b.leading_zeros() as usize;
                total += row[bx * 8 + lead];
                b &= !(0x80 >> lead);
            }
        }
    }
    total
}

pub fn measure(object: &Image, seq: &PatternSequence, noise: &NoiseModel) -> Result<MeasurementSet> {
    if object.width() != seq.width() || object.height() != seq.height() {
        return Err(Error::DimensionMismatch {
            expected_w: seq.width(),
            expected_h: seq.height(),
            got_w: object.width(),
            got_h: object.height(),
        });
    }
    noise.validate()?;
    let data = object.data();
    let mut intensities: Vec<f64> = seq.patterns().par_iter().map(|p| pattern_dot(p, data)).collect();
    if !noise.is_noiseless() {
        for (v, e) in intensities.iter_mut().zip(noise.draws(0, seq.len())) {
            *v += e;
        }
    }
    Ok(MeasurementSet {
        intensities,
        sequence_id: format!("{}:M{}:T{}:seed{}", seq.family(), seq.actual_resolution(), seq.len(), seq.seed()),
        sequence_hash: sequence_hash(seq),
        noise: *noise,
    })
}

/// Sample mean and (n-1)-normalized standard deviation of `n` noise draws.
pub fn noise_sample_statistics(noise: &NoiseModel, n: usize) -> (f64, f64) {
    if noise.std_dev == 0.0 {
        return (noise.mean, 0.0);
    }
    let draws = noise.draws(0, n);
    let mean = draws.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = draws.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::patterns::{generate_sequence, Family, SequenceRequest};

    fn seq(m: usize, count: usize, seed: u64) -> PatternSequence {
        generate_sequence(&SequenceRequest {
            family: Family::Uniform,
            actual_resolution: m,
            count,
            schedule: None,
            retina: None,
            seed,
        })
        .unwrap()
    }

    fn object(m: usize) -> Image {
        Image::from_fn(m, m, |x, y| ((x * 31 + y * 17) % 23) as f64 / 22.0).unwrap()
    }

    #[test]
    fn matches_double_loop_oracle() {
        let s = seq(4, 5, 3);
        let o = object(4);
        let got = measure(&o, &s, &NoiseModel::noiseless()).unwrap();
        for (p, v) in s.patterns().iter().zip(&got.intensities) {
            let mut oracle = 0.0;
            for y in 0..4 {
                for x in 0..4 {
                    if p.get(x, y) {
                        oracle += o.get(x, y);
                    }
                }
            }
            assert!((oracle - v).abs() <= 1e-12 * oracle.abs().max(1.0));
        }
        assert_eq!(got.count(), 5);
    }

    #[test]
    fn noise_is_indexed_and_deterministic() {
        let n = NoiseModel::gaussian(0.0, 2.0, 11).unwrap();
        let all = n.draws(0, 10);
        assert_eq!(&n.draws(4, 3)[..], &all[4..7]);
        let s = seq(8, 10, 1);
        let o = object(8);
        let a = measure(&o, &s, &n).unwrap();
        assert_eq!(a, measure(&o, &s, &n).unwrap());
        let clean = measure(&o, &s, &NoiseModel::noiseless()).unwrap();
        for i in 0..10 {
            assert!((a.intensities[i] - clean.intensities[i] - all[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn dimension_mismatch() {
        assert!(measure(&object(4), &seq(8, 2, 0), &NoiseModel::noiseless()).is_err());
    }

    #[test]
    fn negative_std_rejected() {
        assert!(NoiseModel::gaussian(0.0, -1.0, 0).is_err());
    }

    #[test]
    fn degenerate_noise_statistics() {
        let n = NoiseModel { mean: 2.5, std_dev: 0.0, seed: 3 };
        assert_eq!(noise_sample_statistics(&n, 1000), (2.5, 0.0));
    }

    #[test]
    fn shifted_mean_statistics() {
        let n = NoiseModel::gaussian(5.0, 1.0, 77).unwrap();
        let (mean, std) = noise_sample_statistics(&n, 1_000_000);
        assert!((mean - 5.0).abs() < 0.005, "{mean}");
        assert!((std - 1.0).abs() < 0.01, "{std}");
    }

    #[test]
    fn csv_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        let n = NoiseModel::gaussian(0.0, 1.5, 2).unwrap();
        let m = measure(&object(8), &seq(8, 7, 9), &n).unwrap();
        m.write_csv(&path).unwrap();
        assert_eq!(read_intensities_csv(&path).unwrap(), m.intensities);
    }
}
