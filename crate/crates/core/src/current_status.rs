//! Current-status data: nonparametric MLE of the distribution function, the
//! MLE under a pointwise constraint `F(t0) = a`, the likelihood-ratio statistic
//! and confidence intervals obtained by inverting it.

use crate::error::{Error, Result};
use crate::isotonic::{block_of, envelope_blocks, expand_blocks, Block, Envelope, StepFunction};

/// Inspection times `t_1 < ... < t_n` with status indicators `δ_i = 1{X_i ≤ t_i}`.
#[derive(Debug, Clone, PartialEq)]
pub struct CurrentStatusSample {
    times: Vec<f64>,
    deltas: Vec<u8>,
}

impl CurrentStatusSample {
    pub fn new(times: Vec<f64>, deltas: Vec<u8>) -> Result<Self> {
        if times.is_empty() {
            return Err(Error::Degenerate("empty current-status sample".into()));
        }
        if times.len() != deltas.len() {
            return Err(Error::Validation(format!(
                "{} times but {} indicators",
                times.len(),
                deltas.len()
            )));
        }
        if times.iter().any(|t| !t.is_finite()) {
            return Err(Error::Validation("inspection times must be finite".into()));
        }
        if let Some(i) = deltas.iter().position(|&d| d > 1) {
            return Err(Error::Validation(format!(
                "indicator {} at position {} is not 0 or 1",
                deltas[i],
                i + 1
            )));
        }
        if let Some(i) = times.windows(2).position(|w| w[1] <= w[0]) {
            let msg = if times[i + 1] == times[i] {
                format!("tied inspection time {} at positions {} and {}", times[i], i + 1, i + 2)
            } else {
                format!("inspection times not sorted at position {}", i + 2)
            };
            return Err(Error::Validation(msg));
        }
        Ok(Self { times, deltas })
    }

    /// Sorts the pairs by time; ties are still rejected.
    pub fn from_pairs(mut pairs: Vec<(f64, u8)>) -> Result<Self> {
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (times, deltas) = pairs.into_iter().unzip();
        Self::new(times, deltas)
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn deltas(&self) -> &[u8] {
        &self.deltas
    }

    fn delta_f64(&self) -> Vec<f64> {
        self.deltas.iter().map(|&d| d as f64).collect()
    }
}

/// Current-status data with tied inspection times pooled: `counts[i]` observations at
/// `times[i]`, of which `positives[i]` have `δ = 1`. Bootstrap resamples take this form.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupedStatus {
    pub times: Vec<f64>,
    pub counts: Vec<u32>,
    pub positives: Vec<u32>,
}

impl GroupedStatus {
    pub fn n(&self) -> usize {
        self.counts.iter().map(|&c| c as usize).sum()
    }

    pub fn from_sample(sample: &CurrentStatusSample) -> Self {
        Self {
            times: sample.times.clone(),
            counts: vec![1; sample.len()],
            positives: sample.deltas.iter().map(|&d| d as u32).collect(),
        }
    }

    /// MLE values at `times`: GCM slopes of the diagram with steps `(count, positives)`.
    pub fn mle_values(&self) -> Vec<f64> {
        let dx: Vec<f64> = self.counts.iter().map(|&c| c as f64).collect();
        let dy: Vec<f64> = self.positives.iter().map(|&c| c as f64).collect();
        expand_blocks(&envelope_blocks(&dx, &dy, Envelope::ConvexMinorant), dx.len())
    }

    pub fn mle(&self) -> Result<StepFunction> {
        if self.times.is_empty() {
            return Err(Error::Degenerate("empty current-status sample".into()));
        }
        StepFunction::distribution(self.times.clone(), self.mle_values(), full_line())
    }
}

fn full_line() -> (f64, f64) {
    (f64::NEG_INFINITY, f64::INFINITY)
}

fn unit_blocks(dy: &[f64]) -> Vec<Block> {
    envelope_blocks(&vec![1.0; dy.len()], dy, Envelope::ConvexMinorant)
}

/// MLE values `F̂(t_1), ..., F̂(t_n)`.
pub fn mle_values(sample: &CurrentStatusSample) -> Vec<f64> {
    let dy = sample.delta_f64();
    expand_blocks(&unit_blocks(&dy), dy.len())
}

/// Right-continuous MLE with knots at the inspection times.
pub fn mle(sample: &CurrentStatusSample) -> Result<StepFunction> {
    StepFunction::distribution(sample.times.clone(), mle_values(sample), full_line())
}

/// Number of inspection times `≤ t0`. A `t0` equal to an inspection time is placed
/// just to the right of it.
pub fn constraint_index(times: &[f64], t0: f64) -> usize {
    times.partition_point(|&t| t <= t0)
}

/// The MLE under `F(t0) = a`.
#[derive(Debug, Clone, PartialEq)]
pub struct RestrictedFit {
    pub fit: StepFunction,
    /// Restricted values at the inspection times.
    pub values: Vec<f64>,
    pub mu: f64,
    pub constraint_point: f64,
    pub constraint_value: f64,
    pub active: bool,
    /// 1-based index receiving the Lagrange jump.
    pub penalty_index: usize,
}

fn check_level(a: f64) -> Result<()> {
    if !(a > 0.0 && a < 1.0) {
        return Err(Error::Domain(format!("constraint value a = {a} not in (0, 1)")));
    }
    Ok(())
}

fn penalized_blocks(dy: &[f64], p: usize, jump: f64) -> Vec<Block> {
    let mut d = dy.to_vec();
    d[p - 1] += jump;
    unit_blocks(&d)
}

fn phi(dy: &[f64], p: usize, jump: f64) -> f64 {
    let blocks = penalized_blocks(dy, p, jump);
    blocks[block_of(&blocks, p - 1)].value
}

const MU_TOL: f64 = 1e-10;
const MAX_BISECTIONS: usize = 200;
const MAX_DOUBLINGS: usize = 1100;

/// Lagrange multiplier `μ̂` for `F_{i0} = a`: the root of
/// `φ(μ) = max_{k≤i0} min_{i≥i0} (Σ_{j=k}^{i} δ_j + nμa(1−a)) / (i−k+1) = a`.
///
/// `i0` is 1-based in `1..=n`. `φ` is continuous and increasing, so the root is
/// bracketed by doubling and located by bisection, then polished from the final
/// block structure.
pub fn solve_mu(sample: &CurrentStatusSample, i0: usize, a: f64) -> Result<f64> {
    check_level(a)?;
    let n = sample.len();
    if i0 == 0 || i0 > n {
        return Err(Error::Domain(format!("i0 = {i0} outside 1..={n}")));
    }
    solve_mu_raw(&sample.delta_f64(), i0, a)
}

fn solve_mu_raw(dy: &[f64], p: usize, a: f64) -> Result<f64> {
    let n = dy.len() as f64;
    let scale = n * a * (1.0 - a);
    let f = |mu: f64| phi(dy, p, mu * scale) - a;

    let f0 = f(0.0);
    if f0 == 0.0 {
        return Ok(0.0);
    }
    let (mut lo, mut hi) = if f0 < 0.0 { (0.0, 1.0) } else { (-1.0, 0.0) };
    let mut steps = 0;
    loop {
        let (probe, want_nonneg) = if f0 < 0.0 { (hi, true) } else { (lo, false) };
        let v = f(probe);
        if (want_nonneg && v >= 0.0) || (!want_nonneg && v <= 0.0) {
            break;
        }
        if want_nonneg {
            lo = hi;
            hi *= 2.0;
        } else {
            hi = lo;
            lo *= 2.0;
        }
        steps += 1;
        if steps > MAX_DOUBLINGS || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::Infeasible(format!(
                "could not bracket the multiplier for a = {a}"
            )));
        }
    }

    let mut mid = 0.5 * (lo + hi);
    let mut resid = f64::INFINITY;
    for _ in 0..MAX_BISECTIONS {
        mid = 0.5 * (lo + hi);
        let v = f(mid);
        resid = v.abs();
        if resid <= MU_TOL {
            break;
        }
        if v < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * mid.abs().max(1e-300) {
            break;
        }
    }

    // On the final block structure φ is linear in μ, so the root is explicit.
    let blocks = penalized_blocks(dy, p, mid * scale);
    let blk = blocks[block_of(&blocks, p - 1)];
    let len = (blk.end - blk.start) as f64;
    let base: f64 = dy[blk.start..blk.end].iter().sum();
    let exact = (a * len - base) / scale;
    let exact_resid = f(exact).abs();
    if exact_resid <= resid {
        return Ok(exact);
    }
    if resid <= MU_TOL {
        return Ok(mid);
    }
    Err(Error::NonConvergence {
        what: "current-status Lagrange multiplier".into(),
        residual: resid,
        iterations: MAX_BISECTIONS,
    })
}

/// Value bracket `[F̂_{i0}, F̂_{i0+1}]` around `t0`, with `F̂_0 = 0` and `F̂_{n+1} = 1`.
pub fn mle_bracket(values: &[f64], i0: usize) -> (f64, f64) {
    let lo = if i0 == 0 { 0.0 } else { values[i0 - 1] };
    let hi = if i0 >= values.len() { 1.0 } else { values[i0] };
    (lo, hi)
}

/// MLE under `F(t0) = a`.
///
/// If `a` already lies in the MLE's bracket at `t0` the constraint is inactive,
/// `μ̂ = 0` and the fit is the MLE with the value `a` attached at `t0`. Otherwise the
/// fit is the GCM of the diagram with the jump `nμ̂a(1−a)` added at `i0`.
pub fn restricted_mle(sample: &CurrentStatusSample, t0: f64, a: f64) -> Result<RestrictedFit> {
    check_level(a)?;
    if !t0.is_finite() {
        return Err(Error::Domain("t0 must be finite".into()));
    }
    let dy = sample.delta_f64();
    let n = dy.len();
    let i0 = constraint_index(&sample.times, t0);
    let p = i0.clamp(1, n);
    let unrestricted = expand_blocks(&unit_blocks(&dy), n);
    let (blo, bhi) = mle_bracket(&unrestricted, i0);

    let (mu, mut values, active) = if blo <= a && a <= bhi {
        (0.0, unrestricted, false)
    } else {
        let mu = solve_mu_raw(&dy, p, a)?;
        let scale = n as f64 * a * (1.0 - a);
        let blocks = penalized_blocks(&dy, p, mu * scale);
        let mut values = expand_blocks(&blocks, n);
        let blk = blocks[block_of(&blocks, p - 1)];
        values[blk.start..blk.end].fill(a);
        (mu, values, true)
    };
    // Guard against monotonicity drift of one ulp after snapping.
    for i in 1..n {
        if values[i] < values[i - 1] && values[i - 1] - values[i] < 1e-12 {
            values[i] = values[i - 1];
        }
    }

    let mut knots = sample.times.clone();
    let mut fit_values = values.clone();
    let needs_knot = if i0 == 0 {
        true
    } else {
        !active && sample.times[i0 - 1] != t0 && values[i0 - 1] != a
    };
    if needs_knot {
        knots.insert(i0, t0);
        fit_values.insert(i0, a);
    }
    let fit = StepFunction::distribution(knots, fit_values, full_line())?;
    Ok(RestrictedFit {
        fit,
        values,
        mu,
        constraint_point: t0,
        constraint_value: a,
        active,
        penalty_index: p,
    })
}

/// `2 log ℓ_n` for `H0: F(t0) = a`; terms where both fits agree are skipped.
pub fn log_lr(sample: &CurrentStatusSample, t0: f64, a: f64) -> Result<f64> {
    let restricted = restricted_mle(sample, t0, a)?;
    if !restricted.active {
        return Ok(0.0);
    }
    let unrestricted = mle_values(sample);
    Ok(lr_from_values(sample.deltas(), &unrestricted, &restricted.values))
}

pub(crate) fn lr_from_values(deltas: &[u8], f: &[f64], f0: &[f64]) -> f64 {
    let mut s = 0.0;
    for ((&d, &u), &r) in deltas.iter().zip(f).zip(f0) {
        if u == r {
            continue;
        }
        s += if d == 1 {
            (u / r).ln()
        } else {
            ((1.0 - u) / (1.0 - r)).ln()
        };
    }
    (2.0 * s).max(0.0)
}

/// Closed interval `[lower, upper]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
}

/// Grid size and boundary refinement tolerance used by the LR inversion.
pub const CI_GRID: usize = 512;
pub const CI_REFINE_TOL: f64 = 1e-4;

/// `{a : 2 log ℓ_n(a) ≤ q}` for a statistic that is convex in `a` and zero on
/// `[blo, bhi]`, scanned over `grid` and refined at both ends.
pub(crate) fn invert_convex<F>(
    grid: &[f64],
    bracket: (f64, f64),
    q: f64,
    refine_tol: f64,
    stat: F,
) -> Result<Interval>
where
    F: Fn(f64) -> Result<f64>,
{
    let accept = |a: f64| -> Result<bool> { Ok(stat(a)? <= q) };
    let (blo, bhi) = bracket;

    // Left side: grid points below the bracket; acceptance is a suffix.
    let left: Vec<f64> = grid.iter().copied().filter(|&a| a < blo).collect();
    let mut lower = blo;
    if !left.is_empty() {
        let mut acc = left.len();
        let (mut l, mut r) = (0usize, left.len());
        while l < r {
            let m = (l + r) / 2;
            if accept(left[m])? {
                acc = m;
                r = m;
            } else {
                l = m + 1;
            }
        }
        if acc < left.len() {
            lower = left[acc];
        }
        let outer = if acc == 0 { None } else { Some(left[acc - 1]) };
        if let Some(mut out) = outer {
            let mut inn = lower;
            while inn - out > refine_tol {
                let mid = 0.5 * (inn + out);
                if accept(mid)? {
                    inn = mid;
                } else {
                    out = mid;
                }
            }
            lower = inn;
        }
    }

    let right: Vec<f64> = grid.iter().copied().filter(|&a| a > bhi).collect();
    let mut upper = bhi;
    if !right.is_empty() {
        // Acceptance is a prefix.
        let (mut l, mut r) = (0usize, right.len());
        while l < r {
            let m = (l + r) / 2;
            if accept(right[m])? {
                l = m + 1;
            } else {
                r = m;
            }
        }
        let count = l;
        if count > 0 {
            upper = right[count - 1];
        }
        if count < right.len() {
            let mut out = right[count];
            let mut inn = upper;
            while out - inn > refine_tol {
                let mid = 0.5 * (inn + out);
                if accept(mid)? {
                    inn = mid;
                } else {
                    out = mid;
                }
            }
            upper = inn;
        }
    }
    Ok(Interval { lower, upper })
}

/// Likelihood-ratio confidence interval for `F(t0)`: all `a` with `2 log ℓ_n ≤ q`.
pub fn lr_ci(sample: &CurrentStatusSample, t0: f64, level: f64, q: f64) -> Result<Interval> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Domain(format!("level {level} not in (0, 1)")));
    }
    if !(q >= 0.0) || !q.is_finite() {
        return Err(Error::Domain(format!("critical value q = {q} must be finite and ≥ 0")));
    }
    let n = sample.len();
    let eps = 1.0 / (2.0 * n as f64);
    let grid: Vec<f64> = (0..CI_GRID)
        .map(|k| eps + (1.0 - 2.0 * eps) * k as f64 / (CI_GRID - 1) as f64)
        .collect();
    let values = mle_values(sample);
    let bracket = mle_bracket(&values, constraint_index(&sample.times, t0));
    invert_convex(&grid, bracket, q, CI_REFINE_TOL, |a| log_lr(sample, t0, a))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FenchelReport {
    pub passed: bool,
    pub max_violation: f64,
}

pub const FENCHEL_TOL: f64 = 1e-8;

/// Checks the Fenchel optimality conditions of a restricted fit.
pub fn verify_fenchel(sample: &CurrentStatusSample, fit: &RestrictedFit) -> FenchelReport {
    let a = fit.constraint_value;
    let n = sample.len();
    let jump = n as f64 * fit.mu * a * (1.0 - a);
    let p = fit.penalty_index;
    let mut worst: f64 = 0.0;
    let mut tail = 0.0;
    let mut total = 0.0;
    for j in (0..n).rev() {
        let f = fit.values[j];
        let d = sample.deltas[j] as f64;
        let lift = if j + 1 == p { jump } else { 0.0 };
        total += d - f + lift;
        if f > 0.0 && f < 1.0 {
            tail += (d - f + lift) / (f * (1.0 - f));
        }
        worst = worst.max(tail);
    }
    worst = worst.max(total.abs());
    FenchelReport {
        passed: worst <= FENCHEL_TOL,
        max_violation: worst,
    }
}

/// First and last indices at which the restricted and unrestricted
/// values differ; `None` when they agree everywhere.
pub fn discrepancy_interval(f: &[f64], f0: &[f64]) -> Option<(usize, usize)> {
    let first = f.iter().zip(f0).position(|(x, y)| x != y)?;
    let last = f.iter().zip(f0).rposition(|(x, y)| x != y)?;
    Some((first, last))
}
