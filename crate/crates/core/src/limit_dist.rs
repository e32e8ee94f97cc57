//! Monte-Carlo approximation of the limit law `D` of `2 log ℓ_n`.
//!
//! Each draw simulates `X(t) = W(t) − t²` for a two-sided Brownian motion on a
//! grid over `[−c, c]`, takes the slope `S` of its least concave majorant and the
//! constrained slope `S⁰`, equal to the left-half majorant slope `∨ 0` on `t < 0`
//! and the right-half majorant slope `∧ 0` on `t ≥ 0`, and returns
//! `∫ (S² − S⁰²) dt`.

use std::fs;
use std::io::Write;
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::isotonic::{envelope_blocks, expand_blocks, Envelope};
use crate::rng::replicate_rng;

pub const CACHE_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitProcessConfig {
    /// Simulate on `[−c, c]`.
    pub horizon: f64,
    pub step: f64,
    pub replications: usize,
    pub seed: u64,
}

impl Default for LimitProcessConfig {
    fn default() -> Self {
        Self {
            horizon: 3.0,
            step: 0.005,
            replications: 10_000,
            seed: 1,
        }
    }
}

impl LimitProcessConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::Domain(format!("horizon {} must be > 0", self.horizon)));
        }
        if !(self.step > 0.0 && self.step <= self.horizon) {
            return Err(Error::Domain(format!("grid step {} must lie in (0, c]", self.step)));
        }
        if self.replications == 0 {
            return Err(Error::Validation("need at least one replication".into()));
        }
        Ok(())
    }

    /// Grid intervals on each side of zero.
    pub fn half_intervals(&self) -> usize {
        ((self.horizon / self.step).round() as usize).max(1)
    }
}

/// Slopes on the `2m` grid intervals `[t_j, t_{j+1}]`, `t_j = (j − m)δ`.
#[derive(Debug, Clone, PartialEq)]
pub struct SlopePair {
    pub step: f64,
    pub s: Vec<f64>,
    pub s0: Vec<f64>,
}

impl SlopePair {
    pub fn half(&self) -> usize {
        self.s.len() / 2
    }

    /// `∫ (S² − S⁰²) dt`, exact for the piecewise-constant slopes.
    pub fn d_contribution(&self) -> f64 {
        let sum: f64 = self.s.iter().zip(&self.s0).map(|(a, b)| a * a - b * b).sum();
        (sum * self.step).max(0.0)
    }
}

/// `X` at the grid points `−mδ, ..., mδ` (length `2m + 1`, `X(0)` at index `m`).
pub fn simulate_path<R: Rng + ?Sized>(half: usize, step: f64, rng: &mut R) -> Vec<f64> {
    let sd = step.sqrt();
    let mut w = vec![0.0; 2 * half + 1];
    for k in 1..=half {
        let z: f64 = rng.sample(StandardNormal);
        w[half + k] = w[half + k - 1] + sd * z;
    }
    for k in 1..=half {
        let z: f64 = rng.sample(StandardNormal);
        w[half - k] = w[half - k + 1] + sd * z;
    }
    for (j, x) in w.iter_mut().enumerate() {
        let t = (j as f64 - half as f64) * step;
        *x -= t * t;
    }
    w
}

fn majorant_slopes(xs: &[f64], step: f64) -> Vec<f64> {
    let dy: Vec<f64> = xs.windows(2).map(|p| p[1] - p[0]).collect();
    let dx = vec![step; dy.len()];
    expand_blocks(&envelope_blocks(&dx, &dy, Envelope::ConcaveMajorant), dy.len())
}

/// `S` and `S⁰` for a path sampled at `−mδ, ..., mδ`.
pub fn slope_pair_from_path(xs: &[f64], step: f64) -> Result<SlopePair> {
    if xs.len() < 3 || xs.len() % 2 == 0 {
        return Err(Error::Validation(format!(
            "path needs an odd number ≥ 3 of grid values, got {}",
            xs.len()
        )));
    }
    let m = xs.len() / 2;
    let s = majorant_slopes(xs, step);
    let mut s0 = majorant_slopes(&xs[..=m], step);
    for v in &mut s0 {
        *v = v.max(0.0);
    }
    s0.extend(majorant_slopes(&xs[m..], step).into_iter().map(|v| v.min(0.0)));
    Ok(SlopePair { step, s, s0 })
}

pub fn simulate_slope_pair<R: Rng + ?Sized>(config: &LimitProcessConfig, rng: &mut R) -> Result<SlopePair> {
    config.validate()?;
    let path = simulate_path(config.half_intervals(), config.step, rng);
    slope_pair_from_path(&path, config.step)
}

/// `R` draws of `D`, replicate `r` using stream `r` of the seed.
pub fn sample_d(config: &LimitProcessConfig) -> Result<Vec<f64>> {
    config.validate()?;
    (0..config.replications as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = replicate_rng(config.seed, r);
            Ok(simulate_slope_pair(config, &mut rng)?.d_contribution())
        })
        .collect()
}

/// Order-statistic quantile: the `⌈np⌉`-th smallest value.
pub fn quantile(samples: &[f64], p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain(format!("probability {p} not in (0, 1)")));
    }
    if samples.is_empty() {
        return Err(Error::Degenerate("no samples".into()));
    }
    let mut v = samples.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(sorted_quantile(&v, p))
}

fn sorted_quantile(sorted: &[f64], p: f64) -> f64 {
    let k = ((sorted.len() as f64 * p).ceil() as usize).clamp(1, sorted.len());
    sorted[k - 1]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileTable {
    pub levels: Vec<f64>,
    pub quantiles: Vec<f64>,
    pub config: LimitProcessConfig,
    /// Free-form note on how the table was produced; covered by the checksum.
    pub provenance: String,
}

#[derive(Serialize, Deserialize)]
struct CachePayload {
    version: u32,
    c: f64,
    delta: f64,
    #[serde(rename = "R")]
    r: usize,
    seed: u64,
    levels: Vec<f64>,
    quantiles: Vec<f64>,
    #[serde(default)]
    provenance: String,
}

#[derive(Serialize, Deserialize)]
struct CacheFile {
    #[serde(flatten)]
    payload: CachePayload,
    checksum: String,
}

fn checksum(payload: &CachePayload) -> Result<String> {
    let bytes = serde_json::to_vec(payload)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

impl QuantileTable {
    pub fn from_samples(samples: &[f64], levels: &[f64], config: LimitProcessConfig) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::Validation("no quantile levels requested".into()));
        }
        let mut levels = levels.to_vec();
        levels.sort_by(f64::total_cmp);
        levels.dedup();
        let mut sorted = samples.to_vec();
        sorted.sort_by(f64::total_cmp);
        let mut quantiles = Vec::with_capacity(levels.len());
        for &p in &levels {
            quantiles.push(quantile(&sorted, p)?);
        }
        Ok(Self {
            levels,
            quantiles,
            config,
            provenance: String::new(),
        })
    }

    pub fn simulate(config: LimitProcessConfig, levels: &[f64]) -> Result<Self> {
        let draws = sample_d(&config)?;
        Self::from_samples(&draws, levels, config)
    }

    /// Quantile stored for `level` (matched to 1e-12).
    pub fn lookup(&self, level: f64) -> Result<f64> {
        self.levels
            .iter()
            .position(|&l| (l - level).abs() <= 1e-12)
            .map(|i| self.quantiles[i])
            .ok_or_else(|| {
                Error::Validation(format!(
                    "quantile cache has no level {level} (available: {:?}); rerun `quantile --levels` with it",
                    self.levels
                ))
            })
    }

    fn payload(&self) -> CachePayload {
        CachePayload {
            version: CACHE_VERSION,
            c: self.config.horizon,
            delta: self.config.step,
            r: self.config.replications,
            seed: self.config.seed,
            levels: self.levels.clone(),
            quantiles: self.quantiles.clone(),
            provenance: self.provenance.clone(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let payload = self.payload();
        let checksum = checksum(&payload)?;
        Ok(serde_json::to_string_pretty(&CacheFile { payload, checksum })?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: CacheFile = serde_json::from_str(text)?;
        let found = checksum(&file.payload)?;
        if found != file.checksum {
            return Err(Error::Checksum {
                expected: file.checksum,
                found,
            });
        }
        let p = file.payload;
        if p.version != CACHE_VERSION {
            return Err(Error::Validation(format!("unsupported cache version {}", p.version)));
        }
        if p.levels.len() != p.quantiles.len() {
            return Err(Error::Validation("cache levels and quantiles differ in length".into()));
        }
        Ok(Self {
            levels: p.levels,
            quantiles: p.quantiles,
            config: LimitProcessConfig {
                horizon: p.c,
                step: p.delta,
                replications: p.r,
                seed: p.seed,
            },
            provenance: p.provenance,
        })
    }

    /// Writes the cache atomically (temporary file then rename).
    pub fn write_cache(&self, path: &Path) -> Result<()> {
        let text = self.to_json()?;
        let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
        let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
        tmp.write_all(text.as_bytes())?;
        tmp.write_all(b"\n")?;
        tmp.persist(path).map_err(|e| Error::Io(e.error))?;
        Ok(())
    }

    pub fn read_cache(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}

/// Kolmogorov distance between two empirical distributions.
pub fn ks_distance(a: &[f64], b: &[f64]) -> f64 {
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    let (n, m) = (x.len() as f64, y.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < x.len() && j < y.len() {
        let v = x[i].min(y[j]);
        while i < x.len() && x[i] <= v {
            i += 1;
        }
        while j < y.len() && y[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zero_noise_path_contributes_nothing() {
        let m = 300;
        let step = 0.01;
        let xs: Vec<f64> = (0..=2 * m)
            .map(|j| {
                let t = (j as f64 - m as f64) * step;
                -t * t
            })
            .collect();
        let pair = slope_pair_from_path(&xs, step).unwrap();
        for (j, (&s, &s0)) in pair.s.iter().zip(&pair.s0).enumerate() {
            let mid = (j as f64 - m as f64 + 0.5) * step;
            assert!((s + 2.0 * mid).abs() < 1e-9);
            assert_eq!(s, s0);
        }
        assert_eq!(pair.d_contribution(), 0.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn per_path_invariants(seed in any::<u64>()) {
            let cfg = LimitProcessConfig { horizon: 2.0, step: 0.01, replications: 1, seed };
            let pair = simulate_slope_pair(&cfg, &mut replicate_rng(seed, 0)).unwrap();
            let m = pair.half();
            for w in pair.s.windows(2) {
                prop_assert!(w[1] <= w[0] + 1e-9);
            }
            for j in 0..m {
                prop_assert!(pair.s0[j] >= 0.0);
                prop_assert!(pair.s0[m + j] <= 0.0);
            }
            prop_assert!(pair.d_contribution() >= 0.0);
            // Clamping only binds near the origin.
            let differ: Vec<usize> = (0..2 * m).filter(|&j| (pair.s[j] - pair.s0[j]).abs() > 1e-9).collect();
            if let (Some(&lo), Some(&hi)) = (differ.first(), differ.last()) {
                prop_assert!(lo > 0 && hi < 2 * m - 1);
            }
        }
    }

    #[test]
    fn quantile_examples() {
        assert_eq!(quantile(&[1.0, 2.0, 3.0], 0.5).unwrap(), 2.0);
        assert_eq!(quantile(&[3.0, 1.0, 2.0], 0.9).unwrap(), 3.0);
        assert!(quantile(&[1.0], 1.0).is_err());
        let v: Vec<f64> = (0..100).map(|i| ((i * 37) % 100) as f64).collect();
        let mut last = f64::NEG_INFINITY;
        for k in 1..100 {
            let q = quantile(&v, k as f64 / 100.0).unwrap();
            assert!(q >= last);
            last = q;
        }
    }

    #[test]
    fn cache_round_trip_and_corruption() {
        let cfg = LimitProcessConfig { replications: 200, ..Default::default() };
        let mut table = QuantileTable::simulate(cfg, &[0.99, 0.9, 0.95]).unwrap();
        table.provenance = "unit test".into();
        assert_eq!(table.levels, vec![0.9, 0.95, 0.99]);
        assert!(table.quantiles.windows(2).all(|w| w[0] <= w[1]));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("q.json");
        table.write_cache(&path).unwrap();
        let back = QuantileTable::read_cache(&path).unwrap();
        assert_eq!(back, table);
        assert_eq!(back.lookup(0.95).unwrap(), table.quantiles[1]);
        assert!(back.lookup(0.8).is_err());

        let text = fs::read_to_string(&path).unwrap();
        let q = table.quantiles[0].to_string();
        let tampered = text.replacen(&q, &(table.quantiles[0] + 0.5).to_string(), 1);
        assert_ne!(tampered, text);
        assert!(matches!(QuantileTable::from_json(&tampered), Err(Error::Checksum { .. })));
    }

    #[test]
    fn deterministic_under_seed() {
        let cfg = LimitProcessConfig { replications: 64, ..Default::default() };
        assert_eq!(sample_d(&cfg).unwrap(), sample_d(&cfg).unwrap());
    }

    #[test]
    fn ks_distance_basics() {
        assert_eq!(ks_distance(&[1.0, 2.0], &[1.0, 2.0]), 0.0);
        assert_eq!(ks_distance(&[0.0, 0.0], &[1.0, 1.0]), 1.0);
        assert!((ks_distance(&[1.0, 2.0, 3.0, 4.0], &[3.0, 4.0, 5.0, 6.0]) - 0.5).abs() < 1e-15);
    }
}
