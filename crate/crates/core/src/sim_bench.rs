//! Data generators for the simulation designs and the coverage, `μ̂`-scaling and
//! null-distribution experiments built on them.

use std::io::Write;
use std::time::Instant;

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use rayon::prelude::*;

use crate::band::{csv_err, Method};
use crate::bootstrap::{studentized_pieces, BootstrapConfig};
use crate::current_status::{self, CurrentStatusSample};
use crate::error::{Error, Result};
use crate::grenander::{self, WeightedSample};
use crate::rng::replicate_rng;
use crate::smle::asymptotic_bias_truncexp;

/// Distribution of the event times (current status) or observations (density).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Truth {
    /// Uniform on `[0, 2]`.
    Uniform02,
    /// `f_0(x) = e^{−x}/(1 − e^{−2})` on `[0, 2]`.
    TruncExp02,
    Exponential { mean: f64 },
    PointMass { at: f64 },
}

const TRUNC: f64 = 1.0 - 0.135_335_283_236_612_7; // 1 − e^{−2}

impl Truth {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Truth::Exponential { mean } if !(mean > 0.0 && mean.is_finite()) => {
                Err(Error::Domain(format!("exponential mean {mean} must be finite and > 0")))
            }
            Truth::PointMass { at } if !(at > 0.0 && at.is_finite()) => {
                Err(Error::Domain(format!("point mass location {at} must be finite and > 0")))
            }
            _ => Ok(()),
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        match *self {
            Truth::Uniform02 => (x / 2.0).min(1.0),
            Truth::TruncExp02 => ((1.0 - (-x.min(2.0)).exp()) / TRUNC).min(1.0),
            Truth::Exponential { mean } => 1.0 - (-x / mean).exp(),
            Truth::PointMass { at } => (x >= at) as u8 as f64,
        }
    }

    /// Density; `None` for the point mass.
    pub fn density(&self, x: f64) -> Option<f64> {
        if x < 0.0 {
            return Some(0.0);
        }
        match *self {
            Truth::Uniform02 => Some(if x <= 2.0 { 0.5 } else { 0.0 }),
            Truth::TruncExp02 => Some(if x <= 2.0 { (-x).exp() / TRUNC } else { 0.0 }),
            Truth::Exponential { mean } => Some((-x / mean).exp() / mean),
            Truth::PointMass { .. } => None,
        }
    }

    pub fn quantile(&self, u: f64) -> f64 {
        match *self {
            Truth::Uniform02 => 2.0 * u,
            Truth::TruncExp02 => -(1.0 - u * TRUNC).ln(),
            Truth::Exponential { mean } => -mean * (1.0 - u).ln(),
            Truth::PointMass { at } => at,
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Truth::Uniform02 => 1.0,
            Truth::TruncExp02 => (1.0 - 3.0 * (-2.0f64).exp()) / TRUNC,
            Truth::Exponential { mean } => mean,
            Truth::PointMass { at } => at,
        }
    }

    fn is_decreasing_density(&self) -> bool {
        !matches!(self, Truth::PointMass { .. })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.quantile(rng.random::<f64>())
    }

    /// Draw from the length-biased law `x dF(x) / m_F`.
    pub fn sample_length_biased<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Truth::Uniform02 => 2.0 * rng.random::<f64>().sqrt(),
            Truth::TruncExp02 => {
                let g = Gamma::new(2.0, 1.0).expect("valid gamma parameters");
                loop {
                    let z = g.sample(rng);
                    if z <= 2.0 {
                        return z;
                    }
                }
            }
            Truth::Exponential { mean } => Gamma::new(2.0, mean).expect("valid gamma parameters").sample(rng),
            Truth::PointMass { at } => at,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Model {
    CurrentStatus,
    MonotoneDensity,
    CurrentDuration,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DesignSpec {
    pub model: Model,
    pub truth: Truth,
    pub n: usize,
    /// Inspection times are uniform on `[0, inspection_end]` (current status only).
    pub inspection_end: f64,
}

impl DesignSpec {
    pub fn new(model: Model, truth: Truth, n: usize) -> Self {
        Self {
            model,
            truth,
            n,
            inspection_end: 2.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Validation("sample size must be ≥ 1".into()));
        }
        self.truth.validate()?;
        if self.model == Model::MonotoneDensity && !self.truth.is_decreasing_density() {
            return Err(Error::Validation(format!("{:?} has no decreasing density", self.truth)));
        }
        if !(self.inspection_end > 0.0 && self.inspection_end.is_finite()) {
            return Err(Error::Domain(format!("inspection end {} must be > 0", self.inspection_end)));
        }
        Ok(())
    }

    /// Quantity estimated at `t`: `F_0(t)` for current status, the density otherwise.
    pub fn target(&self, t: f64) -> Result<f64> {
        match self.model {
            Model::CurrentStatus => Ok(self.truth.cdf(t)),
            Model::MonotoneDensity => self
                .truth
                .density(t)
                .ok_or_else(|| Error::Validation("truth has no density".into())),
            Model::CurrentDuration => Ok((1.0 - self.truth.cdf(t)) / self.truth.mean()),
        }
    }
}

pub fn gen_current_status<R: Rng + ?Sized>(spec: &DesignSpec, rng: &mut R) -> Result<CurrentStatusSample> {
    if spec.model != Model::CurrentStatus {
        return Err(Error::Validation("design is not a current-status design".into()));
    }
    spec.validate()?;
    let pairs: Vec<(f64, u8)> = (0..spec.n)
        .map(|_| {
            let t = spec.inspection_end * rng.random::<f64>();
            let x = spec.truth.sample(rng);
            (t, (x <= t) as u8)
        })
        .collect();
    CurrentStatusSample::from_pairs(pairs)
}

pub fn gen_monotone_density<R: Rng + ?Sized>(spec: &DesignSpec, rng: &mut R) -> Result<WeightedSample> {
    if spec.model != Model::MonotoneDensity {
        return Err(Error::Validation("design is not a monotone-density design".into()));
    }
    spec.validate()?;
    let raw: Vec<f64> = (0..spec.n).map(|_| spec.truth.sample(rng)).collect();
    WeightedSample::from_raw(&raw)
}

/// `X_i = U_i Z_i` with `Z_i` length-biased from the truth and `U_i` uniform.
pub fn gen_current_duration<R: Rng + ?Sized>(spec: &DesignSpec, rng: &mut R) -> Result<Vec<f64>> {
    if spec.model != Model::CurrentDuration {
        return Err(Error::Validation("design is not a current-duration design".into()));
    }
    spec.validate()?;
    Ok((0..spec.n)
        .map(|_| {
            let z = spec.truth.sample_length_biased(rng);
            rng.random::<f64>() * z
        })
        .collect())
}

/// `b·k/100` for `k = 1, ..., 99`.
pub fn default_grid(b: f64) -> Vec<f64> {
    (1..100).map(|k| b * k as f64 / 100.0).collect()
}

/// Sample size, Monte-Carlo replications and bootstrap replications.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Profile {
    pub n: usize,
    pub replications: usize,
    pub bootstrap: usize,
}

impl Profile {
    pub const DESK: Profile = Profile {
        n: 200,
        replications: 300,
        bootstrap: 200,
    };
    pub const PAPER: Profile = Profile {
        n: 1000,
        replications: 1000,
        bootstrap: 1000,
    };
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CoverageMethod {
    /// LR inversion with critical value `q`.
    Lr { level: f64, q: f64 },
    SmleBoot(BootstrapConfig),
    /// Bootstrap band shifted by the truncated-exponential asymptotic bias.
    SmleBootBiasCorr(BootstrapConfig),
}

impl CoverageMethod {
    pub fn method(&self) -> Method {
        match self {
            CoverageMethod::Lr { .. } => Method::Lr,
            CoverageMethod::SmleBoot(_) => Method::SmleBoot,
            CoverageMethod::SmleBootBiasCorr(_) => Method::SmleBootBiasCorr,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoverageReport {
    pub t: Vec<f64>,
    pub methods: Vec<Method>,
    /// `noncoverage[k][j]`: method `k` at point `t[j]`.
    pub noncoverage: Vec<Vec<f64>>,
    pub replications: usize,
    pub runtime_secs: f64,
}

impl CoverageReport {
    pub fn get(&self, method: Method, t_index: usize) -> Option<f64> {
        let k = self.methods.iter().position(|&m| m == method)?;
        Some(self.noncoverage[k][t_index])
    }

    /// `t,method,noncoverage,reps` rows with a header line.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "method", "noncoverage", "reps"]).map_err(csv_err)?;
        for (k, m) in self.methods.iter().enumerate() {
            for (j, t) in self.t.iter().enumerate() {
                w.write_record([
                    t.to_string(),
                    m.as_str().to_string(),
                    self.noncoverage[k][j].to_string(),
                    self.replications.to_string(),
                ])
                .map_err(csv_err)?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

fn covers_cs(
    sample: &CurrentStatusSample,
    t_grid: &[f64],
    truth: &[f64],
    method: &CoverageMethod,
    boot_seed: u64,
) -> Result<Vec<bool>> {
    match *method {
        CoverageMethod::Lr { level, q } => t_grid
            .iter()
            .zip(truth)
            .map(|(&t, &v)| {
                let ci = current_status::lr_ci(sample, t, level, q)?;
                Ok(ci.lower <= v && v <= ci.upper)
            })
            .collect(),
        CoverageMethod::SmleBoot(cfg) | CoverageMethod::SmleBootBiasCorr(cfg) => {
            let cfg = BootstrapConfig { seed: boot_seed, ..cfg };
            let pieces = studentized_pieces(sample, t_grid, &cfg)?;
            let band = if matches!(method, CoverageMethod::SmleBoot(_)) {
                pieces.band(t_grid, Method::SmleBoot, |_| 0.0)
            } else {
                let h = pieces.h;
                let bias: Vec<f64> = t_grid
                    .iter()
                    .map(|&t| asymptotic_bias_truncexp(t, h))
                    .collect::<Result<_>>()?;
                pieces.band(t_grid, Method::SmleBootBiasCorr, |t| {
                    let j = t_grid.iter().position(|&s| s == t).unwrap_or(0);
                    bias[j]
                })
            };
            Ok((0..t_grid.len()).map(|j| band.covers(j, truth[j])).collect())
        }
    }
}

fn covers_density(ws: &WeightedSample, t_grid: &[f64], truth: &[f64], method: &CoverageMethod) -> Result<Vec<bool>> {
    match *method {
        CoverageMethod::Lr { level, q } => t_grid
            .iter()
            .zip(truth)
            .map(|(&t, &v)| {
                let ci = grenander::lr_ci_density(ws, t, level, q)?;
                Ok(ci.lower <= v && v <= ci.upper)
            })
            .collect(),
        _ => Err(Error::Validation("bootstrap coverage is implemented for current-status designs".into())),
    }
}

/// Non-coverage proportions of `F_0(t)` (or `f_0(t)`) over `replications` data sets.
pub fn coverage_experiment(
    design: &DesignSpec,
    t_grid: &[f64],
    methods: &[CoverageMethod],
    replications: usize,
    seed: u64,
) -> Result<CoverageReport> {
    design.validate()?;
    if replications == 0 {
        return Err(Error::Validation("need at least one replication".into()));
    }
    if design.model == Model::CurrentDuration {
        return Err(Error::Validation("coverage is defined for current-status and density designs".into()));
    }
    if methods.iter().any(|m| matches!(m, CoverageMethod::SmleBootBiasCorr(_))) && design.truth != Truth::TruncExp02 {
        return Err(Error::Validation("bias correction is available for the truncated exponential only".into()));
    }
    let truth: Vec<f64> = t_grid.iter().map(|&t| design.target(t)).collect::<Result<_>>()?;
    let start = Instant::now();
    let hits: Vec<Vec<Vec<bool>>> = (0..replications as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = replicate_rng(seed, r);
            match design.model {
                Model::CurrentStatus => {
                    let sample = gen_current_status(design, &mut rng)?;
                    let boot_seed: u64 = rng.random();
                    methods
                        .iter()
                        .map(|m| covers_cs(&sample, t_grid, &truth, m, boot_seed))
                        .collect()
                }
                _ => {
                    let ws = gen_monotone_density(design, &mut rng)?;
                    methods.iter().map(|m| covers_density(&ws, t_grid, &truth, m)).collect()
                }
            }
        })
        .collect::<Result<_>>()?;
    let noncoverage = (0..methods.len())
        .map(|k| {
            (0..t_grid.len())
                .map(|j| hits.iter().filter(|h| !h[k][j]).count() as f64 / replications as f64)
                .collect()
        })
        .collect();
    Ok(CoverageReport {
        t: t_grid.to_vec(),
        methods: methods.iter().map(|m| m.method()).collect(),
        noncoverage,
        replications,
        runtime_secs: start.elapsed().as_secs_f64(),
    })
}

fn null_mu(design: &DesignSpec, t0: f64, rng: &mut rand_chacha::ChaCha8Rng) -> Result<f64> {
    let a = design.target(t0)?;
    match design.model {
        Model::CurrentStatus => Ok(current_status::restricted_mle(&gen_current_status(design, rng)?, t0, a)?.mu),
        Model::MonotoneDensity => {
            Ok(grenander::restricted_mle_density(&gen_monotone_density(design, rng)?, t0, a)?.mu)
        }
        Model::CurrentDuration => Err(Error::Validation("use the density model for μ scaling".into())),
    }
}

/// Median `|μ̂_n|` under the null `F(t0) = F_0(t0)` (or `f(t0) = f_0(t0)`) for each `n`.
pub fn mu_scaling_experiment(
    design: &DesignSpec,
    t0: f64,
    n_list: &[usize],
    replications: usize,
    seed: u64,
) -> Result<Vec<(usize, f64)>> {
    if replications == 0 {
        return Err(Error::Validation("need at least one replication".into()));
    }
    n_list
        .iter()
        .enumerate()
        .map(|(k, &n)| {
            let d = DesignSpec { n, ..*design };
            d.validate()?;
            let stream_base = (k as u64) << 32;
            let mut mus: Vec<f64> = (0..replications as u64)
                .into_par_iter()
                .map(|r| null_mu(&d, t0, &mut replicate_rng(seed, stream_base + r)).map(f64::abs))
                .collect::<Result<_>>()?;
            mus.sort_by(f64::total_cmp);
            Ok((n, median(&mus)))
        })
        .collect()
}

fn median(sorted: &[f64]) -> f64 {
    let m = sorted.len();
    if m % 2 == 1 {
        sorted[m / 2]
    } else {
        0.5 * (sorted[m / 2 - 1] + sorted[m / 2])
    }
}

/// `2 log ℓ_n` under the null at `t0`, one draw per replication.
pub fn lr_null_distribution_experiment(design: &DesignSpec, t0: f64, replications: usize, seed: u64) -> Result<Vec<f64>> {
    design.validate()?;
    let a = design.target(t0)?;
    (0..replications as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = replicate_rng(seed, r);
            match design.model {
                Model::CurrentStatus => current_status::log_lr(&gen_current_status(design, &mut rng)?, t0, a),
                Model::MonotoneDensity => grenander::log_lr_density(&gen_monotone_density(design, &mut rng)?, t0, a),
                Model::CurrentDuration => Err(Error::Validation("use the density model for the LR null".into())),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rng(seed: u64) -> rand_chacha::ChaCha8Rng {
        replicate_rng(seed, 0)
    }

    #[test]
    fn truth_values() {
        // Reference value is truncated to six decimals.
        assert!((Truth::TruncExp02.cdf(1.0) - 0.731058).abs() < 1e-6);
        assert_eq!(Truth::Uniform02.cdf(1.0), 0.5);
        for truth in [Truth::Uniform02, Truth::TruncExp02, Truth::Exponential { mean: 1.5 }] {
            for k in 1..20 {
                let u = k as f64 / 20.0;
                assert!((truth.cdf(truth.quantile(u)) - u).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn truncexp_mean_by_quadrature() {
        let n = 20_000;
        let h = 2.0 / n as f64;
        let f = |x: f64| x * Truth::TruncExp02.density(x).unwrap();
        let mut s = f(0.0) + f(2.0);
        for i in 1..n {
            s += f(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        let quad = s * h / 3.0;
        assert!((quad - Truth::TruncExp02.mean()).abs() < 1e-12);
        assert!((quad - 0.687).abs() < 1e-3);
    }

    fn mean_sd(v: &[f64]) -> (f64, f64) {
        let n = v.len() as f64;
        let m = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
        (m, (var / n).sqrt())
    }

    #[test]
    fn current_status_indicator_mean() {
        let s = gen_current_status(&DesignSpec::new(Model::CurrentStatus, Truth::Uniform02, 100_000), &mut rng(1)).unwrap();
        assert!(s.times().windows(2).all(|w| w[0] < w[1]));
        let d: Vec<f64> = s.deltas().iter().map(|&d| d as f64).collect();
        let (m, se) = mean_sd(&d);
        assert!((m - 0.5).abs() < 3.0 * se, "{m}");
    }

    #[test]
    fn density_generator_moments() {
        let spec = DesignSpec::new(Model::MonotoneDensity, Truth::TruncExp02, 100_000);
        let ws = gen_monotone_density(&spec, &mut rng(2)).unwrap();
        let raw: Vec<f64> = ws
            .times()
            .iter()
            .zip(ws.weights())
            .flat_map(|(&t, &w)| std::iter::repeat_n(t, w as usize))
            .collect();
        let (m, se) = mean_sd(&raw);
        assert!((m - Truth::TruncExp02.mean()).abs() < 3.0 * se, "{m}");

        let one = gen_monotone_density(&DesignSpec::new(Model::MonotoneDensity, Truth::Uniform02, 1), &mut rng(3)).unwrap();
        assert_eq!(one.weights(), &[1]);
        assert!(gen_monotone_density(&DesignSpec::new(Model::MonotoneDensity, Truth::PointMass { at: 1.0 }, 5), &mut rng(3)).is_err());
    }

    #[test]
    fn current_duration_laws() {
        let spec = DesignSpec::new(Model::CurrentDuration, Truth::PointMass { at: 3.0 }, 100_000);
        let x = gen_current_duration(&spec, &mut rng(4)).unwrap();
        assert!(x.iter().all(|&v| (0.0..=3.0).contains(&v)));
        let (m, se) = mean_sd(&x);
        assert!((m - 1.5).abs() < 3.0 * se);

        // Exponential(1) truth gives g(x) = e^{−x}: mean 1, P(X > 1) = e^{−1}.
        let spec = DesignSpec::new(Model::CurrentDuration, Truth::Exponential { mean: 1.0 }, 100_000);
        let x = gen_current_duration(&spec, &mut rng(5)).unwrap();
        let (m, se) = mean_sd(&x);
        assert!((m - 1.0).abs() < 3.0 * se, "{m}");
        let p = x.iter().filter(|&&v| v > 1.0).count() as f64 / x.len() as f64;
        let e = (-1.0f64).exp();
        assert!((p - e).abs() < 3.0 * (e * (1.0 - e) / x.len() as f64).sqrt());
        assert!((spec.target(0.7).unwrap() - (-0.7f64).exp()).abs() < 1e-15);

        // Uniform(0, 2) truth: g(x) = (1 − x/2), mean 2/3.
        let spec = DesignSpec::new(Model::CurrentDuration, Truth::Uniform02, 100_000);
        let (m, se) = mean_sd(&gen_current_duration(&spec, &mut rng(6)).unwrap());
        assert!((m - 2.0 / 3.0).abs() < 3.0 * se, "{m}");
    }

    #[test]
    fn duration_grenander_total_variation() {
        let spec = DesignSpec::new(Model::CurrentDuration, Truth::Exponential { mean: 1.0 }, 50_000);
        let x = gen_current_duration(&spec, &mut rng(7)).unwrap();
        let ws = WeightedSample::from_raw(&x).unwrap();
        let fit = grenander::grenander_mle(&ws).unwrap();
        // Start slightly right of 0, where the estimator spikes.
        let last = ws.times()[ws.m() - 1];
        let tv = fit.eval(0.05).unwrap() - fit.eval(last).unwrap();
        let truth = (-0.05f64).exp() - (-last).exp();
        assert!((tv - truth).abs() < 0.15, "{tv} vs {truth}");
    }

    #[test]
    fn grid_and_profiles() {
        let g = default_grid(2.0);
        assert_eq!(g.len(), 99);
        assert!((g[0] - 0.02).abs() < 1e-15 && (g[98] - 1.98).abs() < 1e-15);
        let g36 = default_grid(36.0);
        assert!((g36[0] - 0.36).abs() < 1e-15 && (g36[98] - 35.64).abs() < 1e-12);
        assert_eq!(Profile::DESK.n, 200);
        assert_eq!(Profile::PAPER.bootstrap, 1000);
    }

    #[test]
    fn experiments_deterministic_and_sane() {
        let design = DesignSpec::new(Model::CurrentStatus, Truth::Uniform02, 100);
        let methods = [CoverageMethod::Lr { level: 0.95, q: 2.28 }];
        let a = coverage_experiment(&design, &[0.5, 1.0], &methods, 20, 9).unwrap();
        let b = coverage_experiment(&design, &[0.5, 1.0], &methods, 20, 9).unwrap();
        assert_eq!(a.noncoverage, b.noncoverage);
        assert!(a.noncoverage[0].iter().all(|p| (0.0..=1.0).contains(p)));

        let lr = lr_null_distribution_experiment(&design, 1.0, 30, 3).unwrap();
        assert!(lr.iter().all(|&v| v >= 0.0));
        let mus = mu_scaling_experiment(&design, 1.0, &[100, 400], 21, 4).unwrap();
        assert!(mus.iter().all(|&(_, m)| m.is_finite() && m > 0.0));
    }

    #[test]
    fn report_csv_layout() {
        let r = CoverageReport {
            t: vec![0.5, 1.0],
            methods: vec![Method::Lr, Method::SmleBoot],
            noncoverage: vec![vec![0.05, 0.04], vec![0.06, 0.07]],
            replications: 300,
            runtime_secs: 0.0,
        };
        let mut out = Vec::new();
        r.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t,method,noncoverage,reps");
        assert_eq!(lines[1], "0.5,lr,0.05,300");
        assert_eq!(lines.len(), 5);
    }
}
