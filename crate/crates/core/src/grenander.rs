//! Decreasing densities: the weighted Grenander estimator, MLEs under a
//! pointwise value constraint (optionally together with a constraint at zero),
//! the likelihood-ratio statistic, LR confidence intervals and the survival ratio
//! `g(x)/g(0)` used for current-duration data.

use crate::current_status::{invert_convex, Interval};
use crate::error::{Error, Result};
use crate::isotonic::{block_of, envelope_blocks, expand_blocks, Block, Envelope, StepFunction};

/// Distinct sorted positive times `t_1 < ... < t_m` with multiplicities `w_i ≥ 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedSample {
    times: Vec<f64>,
    weights: Vec<u32>,
    n: u64,
}

impl WeightedSample {
    pub fn new(times: Vec<f64>, weights: Vec<u32>) -> Result<Self> {
        if times.is_empty() {
            return Err(Error::Degenerate("empty density sample".into()));
        }
        if times.len() != weights.len() {
            return Err(Error::Validation(format!(
                "{} times but {} weights",
                times.len(),
                weights.len()
            )));
        }
        if times.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
            return Err(Error::Validation("observation times must be finite and > 0".into()));
        }
        if weights.iter().any(|&w| w == 0) {
            return Err(Error::Validation("weights must be ≥ 1".into()));
        }
        if let Some(i) = times.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::Validation(format!(
                "times not strictly increasing at position {}",
                i + 2
            )));
        }
        let n = weights.iter().map(|&w| w as u64).sum();
        Ok(Self { times, weights, n })
    }

    /// Sorts raw observations and aggregates exact ties into weights.
    pub fn from_raw(raw: &[f64]) -> Result<Self> {
        let mut sorted = raw.to_vec();
        if sorted.iter().any(|t| t.is_nan()) {
            return Err(Error::Validation("NaN observation".into()));
        }
        sorted.sort_by(f64::total_cmp);
        let mut times: Vec<f64> = Vec::new();
        let mut weights: Vec<u32> = Vec::new();
        for t in sorted {
            match times.last() {
                Some(&last) if last == t => *weights.last_mut().unwrap() += 1,
                _ => {
                    times.push(t);
                    weights.push(1);
                }
            }
        }
        Self::new(times, weights)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn weights(&self) -> &[u32] {
        &self.weights
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn m(&self) -> usize {
        self.times.len()
    }

    fn spacings(&self) -> Vec<f64> {
        let mut prev = 0.0;
        self.times
            .iter()
            .map(|&t| {
                let d = t - prev;
                prev = t;
                d
            })
            .collect()
    }

    fn mass(&self) -> Vec<f64> {
        let n = self.n as f64;
        self.weights.iter().map(|&w| w as f64 / n).collect()
    }

    fn last(&self) -> f64 {
        self.times[self.times.len() - 1]
    }
}

fn concave_blocks(dt: &[f64], dy: &[f64]) -> Vec<Block> {
    envelope_blocks(dt, dy, Envelope::ConcaveMajorant)
}

/// Grenander values `f̂_1 ≥ ... ≥ f̂_m` on `(t_{i−1}, t_i]`.
pub fn grenander_values(ws: &WeightedSample) -> Vec<f64> {
    expand_blocks(&concave_blocks(&ws.spacings(), &ws.mass()), ws.m())
}

/// Left-continuous nonincreasing MLE; integrates to 1.
pub fn grenander_mle(ws: &WeightedSample) -> Result<StepFunction> {
    StepFunction::density(ws.times.clone(), grenander_values(ws))
}

/// 1-based index of the first time `≥ t0`.
pub fn density_constraint_index(ws: &WeightedSample, t0: f64) -> Result<usize> {
    if !(t0 > 0.0 && t0 <= ws.last()) {
        return Err(Error::Domain(format!(
            "t0 = {t0} outside (0, {}]",
            ws.last()
        )));
    }
    Ok(ws.times.partition_point(|&t| t < t0) + 1)
}

/// MLE under pointwise constraints.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityRestrictedFit {
    pub fit: StepFunction,
    pub values: Vec<f64>,
    pub mu: f64,
    pub lambda: f64,
    pub alpha: f64,
    /// `(t0, a, i0)` for the constraint `f(t0) = a`, `i0` 1-based.
    pub constraint: Option<(f64, f64, usize)>,
    /// `b` for the constraint `f(0+) = b`.
    pub zero_value: Option<f64>,
    pub active: bool,
}

impl DensityRestrictedFit {
    pub fn constraint_value(&self) -> Option<f64> {
        self.constraint.map(|c| c.1)
    }
}

const MU_TOL: f64 = 1e-12;
const MAX_BISECTIONS: usize = 200;
const MAX_DOUBLINGS: usize = 1100;

struct Lifted<'a> {
    dt: &'a [f64],
    mass: &'a [f64],
    p: usize,
    a: f64,
}

impl Lifted<'_> {
    fn blocks(&self, mu: f64) -> Vec<Block> {
        let mut dy = self.mass.to_vec();
        dy[self.p - 1] += mu * self.a;
        concave_blocks(self.dt, &dy)
    }

    fn g(&self, mu: f64) -> f64 {
        let blocks = self.blocks(mu);
        blocks[block_of(&blocks, self.p - 1)].value / (1.0 + mu * self.a)
    }
}

/// Lagrange multiplier `μ̂` for `f_{i0} = a` (1-based `i0`): the root of
/// `min_{i≤i0} max_{j≥i0} (Σ_{k=i}^{j} w_k/n + μa) / (t_j − t_{i−1}) = a(1 + μa)`.
pub fn solve_mu_density(ws: &WeightedSample, i0: usize, a: f64) -> Result<f64> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(Error::Domain(format!("constraint value a = {a} must be > 0")));
    }
    if i0 == 0 || i0 > ws.m() {
        return Err(Error::Domain(format!("i0 = {i0} outside 1..={}", ws.m())));
    }
    let dt = ws.spacings();
    let mass = ws.mass();
    let lifted = Lifted {
        dt: &dt,
        mass: &mass,
        p: i0,
        a,
    };
    let f = |mu: f64| lifted.g(mu) - a;
    let f0 = f(0.0);
    if f0 == 0.0 {
        return Ok(0.0);
    }
    let (mut lo, mut hi);
    if f0 < 0.0 {
        if a * ws.times[i0 - 1] >= 1.0 {
            return Err(Error::Infeasible(format!(
                "a = {a} too large: a·t_i0 = {} ≥ 1",
                a * ws.times[i0 - 1]
            )));
        }
        lo = 0.0;
        hi = 1.0;
        let mut k = 0;
        while f(hi) < 0.0 {
            lo = hi;
            hi *= 2.0;
            k += 1;
            if k > MAX_DOUBLINGS || !hi.is_finite() {
                return Err(Error::Infeasible(format!(
                    "could not bracket the multiplier for a = {a}"
                )));
            }
        }
    } else {
        if i0 == 1 && a * ws.last() <= 1.0 {
            return Err(Error::Infeasible(format!(
                "a = {a} too small for the first segment: a·t_m = {} ≤ 1",
                a * ws.last()
            )));
        }
        hi = 0.0;
        lo = -0.5 / a;
        let mut k = 1;
        while f(lo) > 0.0 {
            hi = lo;
            k += 1;
            lo = -(1.0 - 0.5f64.powi(k)) / a;
            if k > 1070 || 1.0 + lo * a <= 0.0 {
                return Err(Error::Infeasible(format!(
                    "could not bracket the multiplier for a = {a}"
                )));
            }
        }
    }

    let mut mid = 0.5 * (lo + hi);
    let mut resid = f64::INFINITY;
    for _ in 0..MAX_BISECTIONS {
        mid = 0.5 * (lo + hi);
        let v = f(mid);
        resid = v.abs();
        if resid <= MU_TOL * a.max(1.0) {
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

    // Closed form on the final block structure: (W + μa) / (L(1 + μa)) = a.
    let blocks = lifted.blocks(mid);
    let blk = blocks[block_of(&blocks, i0 - 1)];
    let w: f64 = mass[blk.start..blk.end].iter().sum();
    let l: f64 = dt[blk.start..blk.end].iter().sum();
    let exact = (a * l - w) / (a * (1.0 - a * l));
    if exact.is_finite() && 1.0 + exact * a > 0.0 {
        let er = f(exact).abs();
        if er <= resid {
            return Ok(exact);
        }
    }
    if resid <= 1e-10 * a.max(1.0) {
        return Ok(mid);
    }
    Err(Error::NonConvergence {
        what: "density Lagrange multiplier".into(),
        residual: resid,
        iterations: MAX_BISECTIONS,
    })
}

/// MLE under `f(t0) = a`: slopes of the least concave majorant of
/// `((1 + μ̂a) t_j, Σ_{i≤j} {w_i/n + μ̂a 1{i = i0}})`.
pub fn restricted_mle_density(ws: &WeightedSample, t0: f64, a: f64) -> Result<DensityRestrictedFit> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(Error::Domain(format!("constraint value a = {a} must be > 0")));
    }
    let i0 = density_constraint_index(ws, t0)?;
    let unrestricted = grenander_values(ws);
    if unrestricted[i0 - 1] == a {
        return Ok(DensityRestrictedFit {
            fit: StepFunction::density(ws.times.clone(), unrestricted.clone())?,
            values: unrestricted,
            mu: 0.0,
            lambda: 1.0,
            alpha: 0.0,
            constraint: Some((t0, a, i0)),
            zero_value: None,
            active: false,
        });
    }
    let mu = solve_mu_density(ws, i0, a)?;
    let dt = ws.spacings();
    let mass = ws.mass();
    let lifted = Lifted {
        dt: &dt,
        mass: &mass,
        p: i0,
        a,
    };
    let blocks = lifted.blocks(mu);
    let lambda = 1.0 + mu * a;
    let mut values: Vec<f64> = expand_blocks(&blocks, ws.m())
        .into_iter()
        .map(|v| v / lambda)
        .collect();
    let blk = blocks[block_of(&blocks, i0 - 1)];
    values[blk.start..blk.end].fill(a);
    smooth_ulps(&mut values);
    Ok(DensityRestrictedFit {
        fit: StepFunction::density(ws.times.clone(), values.clone())?,
        values,
        mu,
        lambda,
        alpha: 0.0,
        constraint: Some((t0, a, i0)),
        zero_value: None,
        active: true,
    })
}

fn smooth_ulps(values: &mut [f64]) {
    for i in 1..values.len() {
        if values[i] > values[i - 1] && values[i] - values[i - 1] < 1e-12 * values[i].abs().max(1.0) {
            values[i] = values[i - 1];
        }
    }
}

/// Maximizer of `Σ w_i log f_i − λ Σ f_i Δt_i` over nonincreasing `f` with some
/// values pinned, followed by a search for the `λ` that makes the mass one.
struct PinnedProblem {
    dt: Vec<f64>,
    /// `(index, value)`, 0-based, increasing index, nonincreasing value.
    pins: Vec<(usize, f64)>,
    /// Per free index: unconstrained segment slope and box `[lo, hi]`.
    free: Vec<(usize, f64, f64, f64)>,
}

impl PinnedProblem {
    fn new(ws: &WeightedSample, pins: Vec<(usize, f64)>) -> Self {
        let dt = ws.spacings();
        let mass = ws.mass();
        let m = ws.m();
        let mut free = Vec::new();
        let mut seg_start = 0;
        let mut upper = f64::INFINITY;
        let mut k = 0;
        while seg_start < m {
            let (seg_end, lower, next_upper) = match pins.get(k) {
                Some(&(idx, v)) => (idx, v, v),
                None => (m, 0.0, 0.0),
            };
            if seg_end > seg_start {
                let blocks = concave_blocks(&dt[seg_start..seg_end], &mass[seg_start..seg_end]);
                let s = expand_blocks(&blocks, seg_end - seg_start);
                for (off, &slope) in s.iter().enumerate() {
                    free.push((seg_start + off, slope, lower, upper));
                }
            }
            upper = next_upper;
            seg_start = seg_end + 1;
            k += 1;
        }
        Self { dt, pins, free }
    }

    fn mass_at(&self, lambda: f64) -> f64 {
        let fixed: f64 = self.pins.iter().map(|&(i, v)| v * self.dt[i]).sum();
        fixed
            + self
                .free
                .iter()
                .map(|&(i, s, lo, hi)| (s / lambda).clamp(lo, hi) * self.dt[i])
                .sum::<f64>()
    }

    fn mass_limit_inf(&self) -> f64 {
        let fixed: f64 = self.pins.iter().map(|&(i, v)| v * self.dt[i]).sum();
        fixed + self.free.iter().map(|&(i, _, lo, _)| lo * self.dt[i]).sum::<f64>()
    }

    fn mass_limit_zero(&self) -> f64 {
        let fixed: f64 = self.pins.iter().map(|&(i, v)| v * self.dt[i]).sum();
        fixed + self.free.iter().map(|&(i, _, _, hi)| hi * self.dt[i]).sum::<f64>()
    }

    fn pinned_values(&self, upper: bool) -> Vec<f64> {
        let mut values = vec![0.0; self.dt.len()];
        for &(i, v) in &self.pins {
            values[i] = v;
        }
        for &(i, _, l, h) in &self.free {
            values[i] = if upper { h } else { l };
        }
        values
    }

    /// Returns the solution and, when it is identified, the mass multiplier.
    fn solve(&self) -> Result<(Vec<f64>, Option<f64>)> {
        let inf = self.mass_limit_inf();
        let zero = self.mass_limit_zero();
        if self.free.is_empty() {
            if (inf - 1.0).abs() > 1e-12 {
                return Err(Error::Infeasible(format!(
                    "pinned values carry total mass {inf}, not 1"
                )));
            }
            return Ok((self.pinned_values(true), None));
        }
        if !(inf < 1.0 && zero >= 1.0 - 1e-12) {
            return Err(Error::Infeasible(format!(
                "pinned values admit total mass only in ({inf}, {zero})"
            )));
        }
        if zero <= 1.0 + 1e-12 {
            return Ok((self.pinned_values(true), None));
        }
        let (mut lo, mut hi) = (1.0, 1.0);
        let mut k = 0;
        while self.mass_at(lo) < 1.0 {
            lo *= 0.5;
            k += 1;
            if k > MAX_DOUBLINGS {
                return Err(Error::Infeasible("mass multiplier not bracketed".into()));
            }
        }
        while self.mass_at(hi) > 1.0 {
            hi *= 2.0;
            k += 1;
            if k > MAX_DOUBLINGS {
                return Err(Error::Infeasible("mass multiplier not bracketed".into()));
            }
        }
        let mut lambda = 0.5 * (lo + hi);
        for _ in 0..MAX_BISECTIONS {
            lambda = 0.5 * (lo + hi);
            let v = self.mass_at(lambda) - 1.0;
            if v == 0.0 {
                break;
            }
            if v > 0.0 {
                lo = lambda;
            } else {
                hi = lambda;
            }
            if hi - lo <= f64::EPSILON * lambda {
                break;
            }
        }
        // On the final clamping pattern the mass is A + B/λ.
        let mut fixed: f64 = self.pins.iter().map(|&(i, v)| v * self.dt[i]).sum();
        let mut b = 0.0;
        for &(i, s, l, h) in &self.free {
            let v = s / lambda;
            if v <= l {
                fixed += l * self.dt[i];
            } else if v >= h {
                fixed += h * self.dt[i];
            } else {
                b += s * self.dt[i];
            }
        }
        if b > 0.0 && fixed < 1.0 {
            let exact = b / (1.0 - fixed);
            if (self.mass_at(exact) - 1.0).abs() <= (self.mass_at(lambda) - 1.0).abs() {
                lambda = exact;
            }
        }
        let resid = (self.mass_at(lambda) - 1.0).abs();
        if resid > 1e-10 {
            return Err(Error::NonConvergence {
                what: "mass multiplier".into(),
                residual: resid,
                iterations: MAX_BISECTIONS,
            });
        }
        let mut values = vec![0.0; self.dt.len()];
        for &(i, v) in &self.pins {
            values[i] = v;
        }
        for &(i, s, l, h) in &self.free {
            values[i] = (s / lambda).clamp(l, h);
        }
        Ok((values, Some(lambda)))
    }
}

/// Lagrange representation of a pinned solution: returns `(α, λ, penalty)` such that
/// the LCM of `(α + λ t_j, Σ_{i≤j} {w_i/n + penalty·1{i=i0}})` reproduces `values`.
///
/// With at least one unpinned block the multipliers are unique. Otherwise every `λ`
/// in an interval works; the one closest to `α = 0` is returned.
fn pinned_multipliers(
    ws: &WeightedSample,
    values: &[f64],
    b: f64,
    a_pin: Option<(usize, f64)>,
) -> Result<(f64, f64, f64)> {
    let dt = ws.spacings();
    let mass = ws.mass();
    let m = values.len();
    let e1 = values.iter().position(|&v| v != b).unwrap_or(m);
    let w1: f64 = mass[..e1].iter().sum();
    let l1: f64 = dt[..e1].iter().sum();

    // (pinned mass, pinned length) of the block carrying the penalty, if separate.
    let mut b0: Option<(usize, f64, f64, f64)> = None;
    let mut covered = e1;
    let mut overlap = false;
    if let Some((p, a)) = a_pin {
        let mut s0 = p;
        while s0 > 0 && values[s0 - 1] == a {
            s0 -= 1;
        }
        let mut e0 = p + 1;
        while e0 < m && values[e0] == a {
            e0 += 1;
        }
        if s0 < e1 {
            overlap = true;
            covered = e0.max(e1);
        } else {
            covered = e1 + (e0 - s0);
            b0 = Some((p, a, mass[s0..e0].iter().sum(), dt[s0..e0].iter().sum()));
        }
    }
    let free_exists = covered < m;

    // (α, penalty) as functions of λ.
    let split = |lambda: f64| -> (f64, f64) {
        if overlap {
            (0.0, lambda - 1.0)
        } else if a_pin.is_some() {
            let alpha = w1 / b - lambda * l1;
            (alpha, lambda - 1.0 + alpha * b)
        } else {
            (w1 / b - lambda * l1, 0.0)
        }
    };

    if free_exists {
        let lambda = if overlap {
            let e = covered;
            let w: f64 = mass[..e].iter().sum();
            let l: f64 = dt[..e].iter().sum();
            (1.0 - w) / (1.0 - b * l)
        } else if let Some((_, a, w0, l0)) = b0 {
            (1.0 - w1 - w0) / (1.0 - b * l1 - a * l0)
        } else {
            (1.0 - w1) / (1.0 - b * l1)
        };
        let (alpha, pen) = split(lambda);
        return Ok((alpha, lambda, pen));
    }

    // Every value is pinned: intersect the linear Fenchel inequalities in λ.
    let p = a_pin.map(|x| x.0).unwrap_or(usize::MAX);
    let c_at = |lambda: f64| -> Vec<f64> {
        let (alpha, pen) = split(lambda);
        let mut c = -alpha * b;
        let mut out = Vec::with_capacity(m + 1);
        out.push(-(alpha + lambda * dt[0]));
        for j in 0..m {
            c += mass[j] - lambda * dt[j] * values[j];
            if j == p {
                c += pen;
            }
            out.push(c);
        }
        out
    };
    let c0 = c_at(0.0);
    let c1 = c_at(1.0);
    let (mut lo, mut hi) = (0.0f64, f64::INFINITY);
    for (k0, k1) in c0.iter().zip(&c1) {
        let slope = k1 - k0;
        let tol = 1e-12 * k0.abs().max(slope.abs()).max(1.0);
        if slope.abs() <= tol {
            if *k0 > tol {
                return Err(Error::Infeasible("no Lagrange multipliers for the pinned fit".into()));
            }
        } else if slope > 0.0 {
            hi = hi.min(-k0 / slope);
        } else {
            lo = lo.max(-k0 / slope);
        }
    }
    if lo > hi * (1.0 + 1e-12) {
        return Err(Error::Infeasible("no Lagrange multipliers for the pinned fit".into()));
    }
    let target = if overlap || a_pin.is_none() && l1 == 0.0 {
        1.0
    } else {
        w1 / (b * l1)
    };
    let lambda = target.clamp(lo, hi.max(lo));
    let (alpha, pen) = split(lambda);
    Ok((alpha, lambda, pen))
}

fn lemma_diagram_slopes(ws: &WeightedSample, alpha: f64, lambda: f64, pen_at: Option<(usize, f64)>) -> Vec<f64> {
    let mut dx: Vec<f64> = ws.spacings().iter().map(|d| lambda * d).collect();
    dx[0] += alpha;
    let mut dy = ws.mass();
    if let Some((p, pen)) = pen_at {
        dy[p] += pen;
    }
    expand_blocks(&concave_blocks(&dx, &dy), dx.len())
}

fn check_representation(expected: &[f64], got: &[f64]) -> Result<()> {
    let worst = expected
        .iter()
        .zip(got)
        .map(|(e, g)| (e - g).abs() / e.abs().max(1.0))
        .fold(0.0, f64::max);
    if worst > 1e-8 {
        return Err(Error::NonConvergence {
            what: "Lagrange representation of the pinned fit".into(),
            residual: worst,
            iterations: 0,
        });
    }
    Ok(())
}

/// MLE under `f(0+) = b` and `f(t0) = a`.
///
/// The pinned problem is solved directly in the primal (segment-wise clamped
/// antitonic slopes with a scalar mass multiplier), then the multipliers `(α̂, λ̂)`
/// are read off the solution and checked against the concave majorant of
/// `(α̂ + λ̂t_j, Σ {w_i/n + (λ̂ − 1 + α̂b) 1{i=i0}})`.
pub fn double_restricted_mle(
    ws: &WeightedSample,
    t0: f64,
    a: f64,
    b: f64,
) -> Result<DensityRestrictedFit> {
    if !(a > 0.0 && a.is_finite() && b.is_finite()) {
        return Err(Error::Domain(format!("need finite a > 0, got a = {a}, b = {b}")));
    }
    if b < a {
        return Err(Error::Infeasible(format!("b = {b} below a = {a}")));
    }
    let i0 = density_constraint_index(ws, t0)?;
    let p = i0 - 1;
    if p == 0 && a != b {
        return Err(Error::Infeasible(format!(
            "t0 lies in the first segment, so f(t0) = a = {a} must equal b = {b}"
        )));
    }
    let pins = if p == 0 { vec![(0, b)] } else { vec![(0, b), (p, a)] };
    let problem = PinnedProblem::new(ws, pins);
    let (values, _) = problem.solve()?;
    let (alpha, lambda, pen) = pinned_multipliers(ws, &values, b, Some((p, a)))?;
    check_representation(&values, &lemma_diagram_slopes(ws, alpha, lambda, Some((p, pen))))?;
    let unrestricted = grenander_values(ws);
    let active = values != unrestricted;
    Ok(DensityRestrictedFit {
        fit: StepFunction::density(ws.times.clone(), values.clone())?,
        values,
        mu: pen / a,
        lambda,
        alpha,
        constraint: Some((t0, a, i0)),
        zero_value: Some(b),
        active,
    })
}

/// MLE under `f(0+) = b` alone; makes `g(x)/g(0)` estimable from the MLE.
pub fn zero_restricted_mle(ws: &WeightedSample, b: f64) -> Result<DensityRestrictedFit> {
    if !(b > 0.0 && b.is_finite()) {
        return Err(Error::Domain(format!("b = {b} must be > 0")));
    }
    let unrestricted = grenander_values(ws);
    if unrestricted[0] == b {
        return Ok(DensityRestrictedFit {
            fit: StepFunction::density(ws.times.clone(), unrestricted.clone())?,
            values: unrestricted,
            mu: 0.0,
            lambda: 1.0,
            alpha: 0.0,
            constraint: None,
            zero_value: Some(b),
            active: false,
        });
    }
    let problem = PinnedProblem::new(ws, vec![(0, b)]);
    let (values, _) = problem.solve()?;
    let (alpha, lambda, _) = pinned_multipliers(ws, &values, b, None)?;
    check_representation(&values, &lemma_diagram_slopes(ws, alpha, lambda, None))?;
    Ok(DensityRestrictedFit {
        fit: StepFunction::density(ws.times.clone(), values.clone())?,
        values,
        mu: 0.0,
        lambda,
        alpha,
        constraint: None,
        zero_value: Some(b),
        active: true,
    })
}

fn lr_between(ws: &WeightedSample, f: &[f64], f0: &[f64]) -> f64 {
    let mut s = 0.0;
    for ((&w, &u), &r) in ws.weights.iter().zip(f).zip(f0) {
        if u != r {
            s += w as f64 * (u / r).ln();
        }
    }
    (2.0 * s).max(0.0)
}

/// `2 log ℓ_n = 2 Σ w_i log(f̂_i / f̂⁰_i)` for `H0: f(t0) = a`.
pub fn log_lr_density(ws: &WeightedSample, t0: f64, a: f64) -> Result<f64> {
    if !(a > 0.0) {
        return Err(Error::Domain(format!("constraint value a = {a} must be > 0")));
    }
    let r = restricted_mle_density(ws, t0, a)?;
    if !r.active {
        return Ok(0.0);
    }
    Ok(lr_between(ws, &grenander_values(ws), &r.values))
}

pub const DENSITY_CI_GRID: usize = 512;
/// Boundary refinement tolerance, relative to the width of the candidate range.
pub const DENSITY_CI_REFINE: f64 = 1e-4;

/// Likelihood-ratio confidence interval for `f(t0)`.
pub fn lr_ci_density(ws: &WeightedSample, t0: f64, level: f64, q: f64) -> Result<Interval> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Domain(format!("level {level} not in (0, 1)")));
    }
    if !(q >= 0.0) || !q.is_finite() {
        return Err(Error::Domain(format!("critical value q = {q} must be finite and ≥ 0")));
    }
    let i0 = density_constraint_index(ws, t0)?;
    let upper = 1.0 / ws.times[i0 - 1];
    let grid: Vec<f64> = (1..=DENSITY_CI_GRID)
        .map(|k| upper * k as f64 / (DENSITY_CI_GRID + 1) as f64)
        .collect();
    let fhat = grenander_values(ws)[i0 - 1];
    invert_convex(&grid, (fhat, fhat), q, DENSITY_CI_REFINE * upper, |a| {
        match log_lr_density(ws, t0, a) {
            Err(Error::Infeasible(_)) => Ok(f64::INFINITY),
            other => other,
        }
    })
}

/// `fit(t) / fit(0+)` clamped to `[0, 1]`; the survival function of the
/// underlying durations when `fit` estimates the current-duration density.
pub fn survival_ratio(fit: &StepFunction, t: f64) -> Result<f64> {
    let g0 = fit.right_limit_at_lower();
    if !(g0 > 0.0) {
        return Err(Error::Degenerate("estimate vanishes at 0+".into()));
    }
    if t <= fit.domain().0 {
        return Ok(1.0);
    }
    Ok((fit.eval(t)? / g0).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityFenchelReport {
    pub passed: bool,
    pub max_violation: f64,
    pub integral_error: f64,
}

/// Checks `Σ_{i≤j}(w_i/n − λΔt_i f_i) + μa·1{j ≥ i0} − αb ≤ 0` for every `j`, with
/// equality at `j = m`, and that the fit integrates to one.
pub fn verify_fenchel_density(ws: &WeightedSample, fit: &DensityRestrictedFit, tol: f64) -> DensityFenchelReport {
    let dt = ws.spacings();
    let mass = ws.mass();
    let b = fit.zero_value.unwrap_or(0.0);
    let (pen, p) = match fit.constraint {
        Some((_, a, i0)) => (fit.mu * a, i0 - 1),
        None => (0.0, usize::MAX),
    };
    let mut c = -fit.alpha * b;
    let mut worst: f64 = 0.0;
    for j in 0..dt.len() {
        c += mass[j] - fit.lambda * dt[j] * fit.values[j];
        if j == p {
            c += pen;
        }
        worst = worst.max(c);
    }
    worst = worst.max(c.abs());
    let integral: f64 = fit.values.iter().zip(&dt).map(|(v, d)| v * d).sum();
    let integral_error = (integral - 1.0).abs();
    DensityFenchelReport {
        passed: worst <= tol && integral_error <= tol,
        max_violation: worst,
        integral_error,
    }
}
