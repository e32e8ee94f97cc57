//! Studentized bootstrap intervals around the smoothed MLE and percentile
//! intervals for the survival ratio `g(t)/g(0)`.
//!
//! Replicate `r` draws from its own ChaCha stream `(seed, r)`, so results do not
//! depend on thread scheduling.

use rand::Rng;
use rayon::prelude::*;

use crate::band::{empty, ConfidenceBand, Method};
use crate::current_status::{self, CurrentStatusSample, GroupedStatus};
use crate::error::{Error, Result};
use crate::grenander::{self, WeightedSample};
use crate::isotonic::StepFunction;
use crate::smle::{self, studentized_sd_grouped};

pub use crate::rng::replicate_rng;

/// Bandwidth rule: `Estimation` is `b·n^{−1/5}`, `Undersmoothed` is `b·n^{−1/4}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bandwidth {
    Fixed(f64),
    Estimation,
    Undersmoothed,
}

impl Bandwidth {
    pub fn resolve(self, b: f64, n: usize) -> f64 {
        let n = n as f64;
        match self {
            Bandwidth::Fixed(h) => h,
            Bandwidth::Estimation => b * n.powf(-0.2),
            Bandwidth::Undersmoothed => b * n.powf(-0.25),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BootstrapConfig {
    pub replications: usize,
    pub level: f64,
    /// Smaller `α'` used for the percentiles instead of `α = 1 − level`.
    pub tightened_alpha: Option<f64>,
    pub bandwidth: Bandwidth,
    /// Right end `b` of the estimation interval `[0, b]`.
    pub endpoint: f64,
    pub seed: u64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self {
            replications: 1000,
            level: 0.95,
            tightened_alpha: None,
            bandwidth: Bandwidth::Undersmoothed,
            endpoint: 2.0,
            seed: 0,
        }
    }
}

impl BootstrapConfig {
    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::Validation("need at least one bootstrap replication".into()));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::Domain(format!("level {} not in (0, 1)", self.level)));
        }
        if let Some(a) = self.tightened_alpha {
            if !(a > 0.0 && a <= 1.0 - self.level) {
                return Err(Error::Domain(format!(
                    "tightened alpha {a} must lie in (0, {}]",
                    1.0 - self.level
                )));
            }
        }
        if !(self.endpoint > 0.0 && self.endpoint.is_finite()) {
            return Err(Error::Domain(format!("endpoint {} must be > 0", self.endpoint)));
        }
        Ok(())
    }

    fn alpha(&self) -> f64 {
        self.tightened_alpha.unwrap_or(1.0 - self.level)
    }
}

/// `n` draws with replacement from the pairs, returned grouped by time.
pub fn resample<R: Rng + ?Sized>(sample: &CurrentStatusSample, rng: &mut R) -> GroupedStatus {
    let n = sample.len();
    let mut counts = vec![0u32; n];
    for _ in 0..n {
        counts[rng.random_range(0..n)] += 1;
    }
    let mut g = GroupedStatus {
        times: Vec::new(),
        counts: Vec::new(),
        positives: Vec::new(),
    };
    for (i, &c) in counts.iter().enumerate() {
        if c > 0 {
            g.times.push(sample.times()[i]);
            g.counts.push(c);
            g.positives.push(c * sample.deltas()[i] as u32);
        }
    }
    g
}

/// `n` draws with replacement from raw observations.
pub fn resample_raw<R: Rng + ?Sized>(raw: &[f64], rng: &mut R) -> Vec<f64> {
    let n = raw.len();
    (0..n).map(|_| raw[rng.random_range(0..n)]).collect()
}

/// `k`-th smallest of `sorted` with `k = round(len·p)`.
pub fn order_statistic(sorted: &[f64], p: f64) -> Result<f64> {
    let k = (sorted.len() as f64 * p).round() as usize;
    if k < 1 || k > sorted.len() {
        return Err(Error::Validation(format!(
            "{} replicates too few for percentile {p}",
            sorted.len()
        )));
    }
    Ok(sorted[k - 1])
}

fn grouped_mle(g: &GroupedStatus) -> Result<(StepFunction, Vec<f64>)> {
    let values = g.mle_values();
    Ok((g.mle()?, values))
}

/// `Z* = (F̃*(t) − F̃(t)) / S*(t)` at each grid point; `None` where `S* = 0`.
pub fn z_star(
    t_grid: &[f64],
    boot: &GroupedStatus,
    orig_smle: &[f64],
    h: f64,
    b: f64,
) -> Result<Vec<Option<f64>>> {
    let (mle, values) = grouped_mle(boot)?;
    let smooth = smle::smle_cdf(&mle, h, b)?;
    t_grid
        .iter()
        .zip(orig_smle)
        .map(|(&t, &orig)| {
            let s = studentized_sd_grouped(boot, &values, t, h, b);
            if s > 0.0 {
                Ok(Some((smooth.eval(t)? - orig) / s))
            } else {
                Ok(None)
            }
        })
        .collect()
}

/// Per-point pieces of the studentized intervals.
#[derive(Debug, Clone, PartialEq)]
pub struct StudentizedPieces {
    pub h: f64,
    pub estimate: Vec<f64>,
    pub sd: Vec<f64>,
    pub lower_pct: Vec<f64>,
    pub upper_pct: Vec<f64>,
    pub excluded: Vec<usize>,
}

/// Runs the bootstrap and extracts `U*_{α/2}`, `U*_{1−α/2}` per grid point.
pub fn studentized_pieces(
    sample: &CurrentStatusSample,
    t_grid: &[f64],
    config: &BootstrapConfig,
) -> Result<StudentizedPieces> {
    config.validate()?;
    let b = config.endpoint;
    let h = config.bandwidth.resolve(b, sample.len());
    let mle = current_status::mle(sample)?;
    let smooth = smle::smle_cdf(&mle, h, b)?;
    let estimate = smooth.eval_grid(t_grid)?;
    let g = GroupedStatus::from_sample(sample);
    let values = current_status::mle_values(sample);
    let sd: Vec<f64> = t_grid
        .iter()
        .map(|&t| studentized_sd_grouped(&g, &values, t, h, b))
        .collect();

    let reps: Vec<Vec<Option<f64>>> = (0..config.replications as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = replicate_rng(config.seed, r);
            let boot = resample(sample, &mut rng);
            z_star(t_grid, &boot, &estimate, h, b)
        })
        .collect::<Result<_>>()?;

    let alpha = config.alpha();
    let mut lower_pct = Vec::with_capacity(t_grid.len());
    let mut upper_pct = Vec::with_capacity(t_grid.len());
    let mut excluded = Vec::with_capacity(t_grid.len());
    for j in 0..t_grid.len() {
        let mut z: Vec<f64> = reps.iter().filter_map(|r| r[j]).collect();
        excluded.push(reps.len() - z.len());
        z.sort_by(f64::total_cmp);
        lower_pct.push(order_statistic(&z, alpha / 2.0)?);
        upper_pct.push(order_statistic(&z, 1.0 - alpha / 2.0)?);
    }
    Ok(StudentizedPieces {
        h,
        estimate,
        sd,
        lower_pct,
        upper_pct,
        excluded,
    })
}

impl StudentizedPieces {
    /// `[F̃ − β − U*_{1−α/2} S, F̃ − β − U*_{α/2} S]` clipped to `[0, 1]`.
    pub fn band<F: Fn(f64) -> f64>(&self, t_grid: &[f64], method: Method, bias: F) -> ConfidenceBand {
        let mut band = empty(method, t_grid);
        for (j, &t) in t_grid.iter().enumerate() {
            let centre = self.estimate[j] - bias(t);
            let lo = (centre - self.upper_pct[j] * self.sd[j]).clamp(0.0, 1.0);
            let hi = (centre - self.lower_pct[j] * self.sd[j]).clamp(0.0, 1.0);
            band.lower.push(lo.min(hi));
            band.upper.push(hi.max(lo));
            band.estimate.push(self.estimate[j]);
        }
        band.excluded = self.excluded.clone();
        band
    }
}

/// Studentized bootstrap band around the smoothed MLE.
pub fn ci_type1(sample: &CurrentStatusSample, t_grid: &[f64], config: &BootstrapConfig) -> Result<ConfidenceBand> {
    Ok(studentized_pieces(sample, t_grid, config)?.band(t_grid, Method::SmleBoot, |_| 0.0))
}

/// As [`ci_type1`] with both endpoints shifted by `−β(t)`.
pub fn ci_type2<F: Fn(f64) -> f64>(
    sample: &CurrentStatusSample,
    t_grid: &[f64],
    config: &BootstrapConfig,
    bias_fn: F,
) -> Result<ConfidenceBand> {
    Ok(studentized_pieces(sample, t_grid, config)?.band(t_grid, Method::SmleBootBiasCorr, bias_fn))
}

fn survival_curve(raw: &[f64], t_grid: &[f64], h: f64, b: f64) -> Result<Option<Vec<f64>>> {
    let ws = WeightedSample::from_raw(raw)?;
    let gren = grenander::grenander_mle(&ws)?;
    let smooth = smle::smle_density(&gren, h, b)?;
    let g0 = smooth.eval(0.0)?;
    if !(g0 > 0.0) {
        return Ok(None);
    }
    let mut out = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        out.push(smooth.eval(t)? / g0);
    }
    Ok(Some(out))
}

/// Percentile bootstrap band for `g(t)/g(0)` from the smoothed density estimate,
/// based on the differences `g̃*(t)/g̃*(0) − g̃(t)/g̃(0)`. Observations outside
/// `(0, b]` are ignored.
pub fn density_ratio_ci(raw_times: &[f64], t_grid: &[f64], config: &BootstrapConfig) -> Result<ConfidenceBand> {
    config.validate()?;
    let b = config.endpoint;
    let raw: Vec<f64> = raw_times.iter().copied().filter(|&x| x > 0.0 && x <= b).collect();
    if raw.is_empty() {
        return Err(Error::Degenerate(format!("no observations in (0, {b}]")));
    }
    let h = config.bandwidth.resolve(b, raw.len());
    let estimate = survival_curve(&raw, t_grid, h, b)?
        .ok_or_else(|| Error::Degenerate("smoothed density vanishes at 0".into()))?;

    let reps: Vec<Option<Vec<f64>>> = (0..config.replications as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = replicate_rng(config.seed, r);
            let boot = resample_raw(&raw, &mut rng);
            survival_curve(&boot, t_grid, h, b)
        })
        .collect::<Result<_>>()?;

    let alpha = config.alpha();
    let mut band = empty(Method::DensityRatio, t_grid);
    for j in 0..t_grid.len() {
        let mut d: Vec<f64> = reps
            .iter()
            .filter_map(|r| r.as_ref().map(|v| v[j] - estimate[j]))
            .collect();
        band.excluded[j] = reps.len() - d.len();
        d.sort_by(f64::total_cmp);
        let lo = (estimate[j] - order_statistic(&d, 1.0 - alpha / 2.0)?).clamp(0.0, 1.0);
        let hi = (estimate[j] - order_statistic(&d, alpha / 2.0)?).clamp(0.0, 1.0);
        band.lower.push(lo.min(hi));
        band.upper.push(hi.max(lo));
        band.estimate.push(estimate[j].clamp(0.0, 1.0));
    }
    Ok(band)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sample(n: usize, seed: u64) -> CurrentStatusSample {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut pairs: Vec<(f64, u8)> = (0..n)
            .map(|_| {
                let t: f64 = 2.0 * rng.random::<f64>();
                let x: f64 = 2.0 * rng.random::<f64>();
                (t, (x <= t) as u8)
            })
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        CurrentStatusSample::from_pairs(pairs).unwrap()
    }

    #[test]
    fn resample_single_pair() {
        let s = CurrentStatusSample::new(vec![0.7], vec![1]).unwrap();
        let g = resample(&s, &mut replicate_rng(3, 0));
        assert_eq!(g.times, vec![0.7]);
        assert_eq!(g.counts, vec![1]);
        assert_eq!(g.positives, vec![1]);
    }

    #[test]
    fn resample_is_reproducible_and_unbiased() {
        let s = sample(50, 1);
        let a = resample(&s, &mut replicate_rng(9, 4));
        let b = resample(&s, &mut replicate_rng(9, 4));
        assert_eq!(a, b);
        let reps = 4000;
        let mut total = vec![0u64; s.len()];
        for r in 0..reps {
            let g = resample(&s, &mut replicate_rng(11, r));
            for (t, c) in g.times.iter().zip(&g.counts) {
                let i = s.times().iter().position(|x| x == t).unwrap();
                total[i] += *c as u64;
            }
        }
        // Multiplicity ~ Binomial(n, 1/n): mean 1, variance (1 − 1/n).
        let sd = ((1.0 - 1.0 / 50.0) / reps as f64).sqrt();
        for &c in &total {
            let mean = c as f64 / reps as f64;
            assert!((mean - 1.0).abs() < 4.0 * sd, "mean {mean}");
        }
    }

    #[test]
    fn order_statistic_convention() {
        let v: Vec<f64> = (1..=1000).map(|i| i as f64).collect();
        assert_eq!(order_statistic(&v, 0.025).unwrap(), 25.0);
        assert_eq!(order_statistic(&v, 0.975).unwrap(), 975.0);
        assert_eq!(order_statistic(&v, 0.02).unwrap(), 20.0);
        assert_eq!(order_statistic(&v, 0.98).unwrap(), 980.0);
        assert!(order_statistic(&v[..10], 0.025).is_err());
    }

    #[test]
    fn identical_resample_gives_zero() {
        let s = sample(40, 2);
        let g = GroupedStatus::from_sample(&s);
        let grid = [0.5, 1.0, 1.5];
        let mle = current_status::mle(&s).unwrap();
        let orig = smle::smle_cdf(&mle, 0.6, 2.0).unwrap().eval_grid(&grid).unwrap();
        for z in z_star(&grid, &g, &orig, 0.6, 2.0).unwrap() {
            assert_eq!(z, Some(0.0));
        }
    }

    #[test]
    fn bands_deterministic_and_bias_shift() {
        let s = sample(120, 5);
        let grid = [0.3, 1.0, 1.7];
        let cfg = BootstrapConfig {
            replications: 100,
            seed: 77,
            ..BootstrapConfig::default()
        };
        let a = ci_type1(&s, &grid, &cfg).unwrap();
        let b = ci_type1(&s, &grid, &cfg).unwrap();
        assert_eq!(a, b);
        let zero = ci_type2(&s, &grid, &cfg, |_| 0.0).unwrap();
        assert_eq!(a.lower, zero.lower);
        assert_eq!(a.upper, zero.upper);
        let shifted = ci_type2(&s, &grid, &cfg, |_| 0.01).unwrap();
        for j in 0..grid.len() {
            if a.lower[j] > 0.02 && a.upper[j] < 0.98 {
                assert!((shifted.lower[j] - (a.lower[j] - 0.01)).abs() < 1e-15);
                assert!((shifted.upper[j] - (a.upper[j] - 0.01)).abs() < 1e-15);
            }
            assert!(a.lower[j] <= a.upper[j]);
        }
    }

    #[test]
    fn band_invariant_under_input_order() {
        let s = sample(60, 8);
        let mut pairs: Vec<(f64, u8)> = s.times().iter().copied().zip(s.deltas().iter().copied()).collect();
        pairs.reverse();
        let s2 = CurrentStatusSample::from_pairs(pairs).unwrap();
        let cfg = BootstrapConfig {
            replications: 50,
            seed: 1,
            ..BootstrapConfig::default()
        };
        assert_eq!(ci_type1(&s, &[1.0], &cfg).unwrap(), ci_type1(&s2, &[1.0], &cfg).unwrap());
    }

    #[test]
    fn density_ratio_at_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let raw: Vec<f64> = (0..300).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
        let cfg = BootstrapConfig {
            replications: 100,
            endpoint: 3.0,
            seed: 2,
            ..BootstrapConfig::default()
        };
        let band = density_ratio_ci(&raw, &[0.0, 0.5, 1.0], &cfg).unwrap();
        assert_eq!(band.lower[0], 1.0);
        assert_eq!(band.upper[0], 1.0);
        for j in 0..3 {
            assert!(band.lower[j] <= band.estimate[j] && band.estimate[j] <= band.upper[j]);
        }
    }
}
