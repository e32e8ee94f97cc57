//! Smoothed maximum likelihood estimators on `[0, b]` with reflection boundary
//! correction, the studentizing standard deviation used by the bootstrap, and the
//! analytic bias of the smoothed current-status MLE for the truncated exponential
//! design.

use crate::current_status::{CurrentStatusSample, GroupedStatus};
use crate::error::{Error, Result};
use crate::isotonic::{Continuity, StepFunction};

/// A symmetric kernel supported on `[−1, 1]`.
pub trait Kernel: Send + Sync {
    fn density(&self, u: f64) -> f64;

    /// `∫_0^u K`, an odd function equal to ±1/2 outside `[−1, 1]`.
    fn half_integral(&self, u: f64) -> f64;

    /// `∫_{−∞}^u K`.
    fn integrated(&self, u: f64) -> f64 {
        0.5 + self.half_integral(u)
    }

    /// `∫_u^∞ K`.
    fn survival(&self, u: f64) -> f64 {
        0.5 - self.half_integral(u)
    }

    /// `∫ u² K(u) du`.
    fn second_moment(&self) -> f64;

    /// `∫ K(u)² du`.
    fn roughness(&self) -> f64;

    /// `∫_v^1 (u − v)² K(u) du` for `v ∈ [0, 1]`.
    fn boundary_moment(&self, v: f64) -> f64;
}

/// `K(u) = (35/32)(1 − u²)³` on `[−1, 1]`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Triweight;

const TRIWEIGHT_C: f64 = 35.0 / 32.0;

impl Kernel for Triweight {
    fn density(&self, u: f64) -> f64 {
        if u.abs() >= 1.0 {
            return 0.0;
        }
        let s = 1.0 - u * u;
        TRIWEIGHT_C * s * s * s
    }

    fn half_integral(&self, u: f64) -> f64 {
        if u >= 1.0 {
            return 0.5;
        }
        if u <= -1.0 {
            return -0.5;
        }
        let u2 = u * u;
        TRIWEIGHT_C * u * (1.0 - u2 + u2 * u2 * (3.0 / 5.0) - u2 * u2 * u2 / 7.0)
    }

    fn second_moment(&self) -> f64 {
        1.0 / 9.0
    }

    fn roughness(&self) -> f64 {
        350.0 / 429.0
    }

    fn boundary_moment(&self, v: f64) -> f64 {
        let v = v.clamp(0.0, 1.0);
        let v2 = v * v;
        let m0 = 0.5 - self.half_integral(v);
        let q1 = v2 / 2.0 - 3.0 * v2 * v2 / 4.0 + v2 * v2 * v2 / 2.0 - v2 * v2 * v2 * v2 / 8.0;
        let m1 = TRIWEIGHT_C * (1.0 / 8.0 - q1);
        let v3 = v2 * v;
        let q2 = v3 / 3.0 - 3.0 * v3 * v2 / 5.0 + 3.0 * v3 * v2 * v2 / 7.0 - v3 * v3 * v3 / 9.0;
        let m2 = TRIWEIGHT_C * (16.0 / 315.0 - q2);
        (m2 - 2.0 * v * m1 + v2 * m0).max(0.0)
    }
}

/// `(K(u), ∫_{−∞}^u K)`.
pub fn kernel_values<K: Kernel + ?Sized>(kernel: &K, u: f64) -> (f64, f64) {
    (kernel.density(u), kernel.integrated(u))
}

pub fn second_moment<K: Kernel + ?Sized>(kernel: &K) -> f64 {
    kernel.second_moment()
}

fn check_bandwidth(h: f64, b: f64) -> Result<()> {
    if !(b > 0.0 && b.is_finite()) {
        return Err(Error::Domain(format!("domain endpoint b = {b} must be > 0")));
    }
    if !(h > 0.0 && h < b) {
        return Err(Error::Domain(format!("bandwidth h = {h} not in (0, b = {b})")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
enum Source {
    /// Atom locations and cumulative masses `F_1 ≤ ... ≤ F_K = 1`.
    Cdf { atoms: Vec<f64>, cumulative: Vec<f64> },
    /// Piecewise-constant density `values[i]` on `(edges[i], edges[i+1]]`.
    Density { edges: Vec<f64>, values: Vec<f64> },
}

/// A kernel-smoothed step function on `[0, b]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothEstimate<K: Kernel = Triweight> {
    source: Source,
    h: f64,
    b: f64,
    kernel: K,
}

impl<K: Kernel> SmoothEstimate<K> {
    pub fn bandwidth(&self) -> f64 {
        self.h
    }

    pub fn endpoint(&self) -> f64 {
        self.b
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0 && t <= self.b) {
            return Err(Error::Domain(format!("t = {t} outside [0, {}]", self.b)));
        }
        Ok(match &self.source {
            Source::Cdf { atoms, cumulative } => self.cdf_at(atoms, cumulative, t),
            Source::Density { edges, values } => self.density_at(edges, values, t),
        })
    }

    pub fn eval_grid(&self, ts: &[f64]) -> Result<Vec<f64>> {
        ts.iter().map(|&t| self.eval(t)).collect()
    }

    /// `φ(t, x)`, the corrected integrated kernel, with the three terms grouped so
    /// that `φ(0, x) = 0` and `φ(b, x) = 1` come out exactly.
    fn phi(&self, t: f64, x: f64) -> f64 {
        let h = self.h;
        let p1 = self.kernel.half_integral((t - x) / h);
        let p2 = self.kernel.half_integral((t + x) / h);
        let p3 = self.kernel.half_integral((2.0 * self.b - t - x) / h);
        if t <= 0.5 * self.b {
            0.5 + ((p1 + p2) - p3)
        } else {
            0.5 + ((p1 - p3) + p2)
        }
    }

    fn cdf_at(&self, atoms: &[f64], cumulative: &[f64], t: f64) -> f64 {
        let k = atoms.len();
        let mut next = self.phi(t, atoms[k - 1]);
        let mut total = next;
        for i in (0..k - 1).rev() {
            let cur = self.phi(t, atoms[i]);
            total += cumulative[i] * (cur - next);
            next = cur;
        }
        total.clamp(0.0, 1.0)
    }

    fn density_at(&self, edges: &[f64], values: &[f64], t: f64) -> f64 {
        let h = self.h;
        let k = &self.kernel;
        let mut total = 0.0;
        for (i, &g) in values.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            let (lo, hi) = (edges[i], edges[i + 1]);
            let direct = k.half_integral((t - lo) / h) - k.half_integral((t - hi) / h);
            let left = k.half_integral((t + hi) / h) - k.half_integral((t + lo) / h);
            let right = k.half_integral((2.0 * self.b - t - lo) / h)
                - k.half_integral((2.0 * self.b - t - hi) / h);
            total += g * (direct + left + right);
        }
        total.max(0.0)
    }
}

/// Boundary-corrected smoothed MLE of a distribution function:
/// `F̃(t) = ∫ {IK((t−x)/h) + IK((t+x)/h) − IK((2b−t−x)/h)} dF̂(x)`.
///
/// Mass missing from `F̂` (when its last value is below one) is placed at `b`.
pub fn smle_cdf(mle: &StepFunction, h: f64, b: f64) -> Result<SmoothEstimate> {
    smle_cdf_with(Triweight, mle, h, b)
}

pub fn smle_cdf_with<K: Kernel>(kernel: K, mle: &StepFunction, h: f64, b: f64) -> Result<SmoothEstimate<K>> {
    check_bandwidth(h, b)?;
    if mle.continuity() != Continuity::RightContinuous {
        return Err(Error::Validation("smle_cdf needs a right-continuous step function".into()));
    }
    let mut atoms = Vec::new();
    let mut cumulative = Vec::new();
    let mut prev = 0.0;
    for (&x, &v) in mle.knots().iter().zip(mle.values()) {
        if v != prev {
            if !(0.0..=b).contains(&x) {
                return Err(Error::Domain(format!("jump at {x} outside [0, {b}]")));
            }
            atoms.push(x);
            cumulative.push(v.clamp(0.0, 1.0));
            prev = v;
        }
    }
    if atoms.last() != Some(&b) && prev != 1.0 {
        atoms.push(b);
        cumulative.push(1.0);
    } else if let Some(last) = cumulative.last_mut() {
        *last = 1.0;
    }
    Ok(SmoothEstimate {
        source: Source::Cdf { atoms, cumulative },
        h,
        b,
        kernel,
    })
}

/// Boundary-corrected smoothed density: the derivative of the corrected smoothed
/// distribution function built from the Grenander CDF,
/// `g̃(t) = ∫ {K_h(t−x) + K_h(t+x) + K_h(2b−t−x)} ĝ(x) dx`.
pub fn smle_density(gren: &StepFunction, h: f64, b: f64) -> Result<SmoothEstimate> {
    smle_density_with(Triweight, gren, h, b)
}

pub fn smle_density_with<K: Kernel>(kernel: K, gren: &StepFunction, h: f64, b: f64) -> Result<SmoothEstimate<K>> {
    check_bandwidth(h, b)?;
    if gren.continuity() != Continuity::LeftContinuous {
        return Err(Error::Validation("smle_density needs a left-continuous density".into()));
    }
    let mut edges = vec![gren.domain().0.max(0.0)];
    edges.extend_from_slice(gren.knots());
    Ok(SmoothEstimate {
        source: Source::Density {
            edges,
            values: gren.values().to_vec(),
        },
        h,
        b,
        kernel,
    })
}

fn reflected_kernel<K: Kernel + ?Sized>(k: &K, t: f64, x: f64, h: f64, b: f64) -> f64 {
    (k.density((t - x) / h) - k.density((t + x) / h) - k.density((2.0 * b - t - x) / h)) / h
}

/// `S_{nh}(t)` with `S² = n⁻² Σ {K_h(t−T_i) − K_h(t+T_i) − K_h(2b−t−T_i)}² (Δ_i − F̂(T_i))²`.
pub fn studentized_sd(sample: &CurrentStatusSample, mle: &StepFunction, t: f64, h: f64, b: f64) -> Result<f64> {
    check_bandwidth(h, b)?;
    let n = sample.len() as f64;
    let mut s = 0.0;
    for (&ti, &d) in sample.times().iter().zip(sample.deltas()) {
        let k = reflected_kernel(&Triweight, t, ti, h, b);
        if k == 0.0 {
            continue;
        }
        let r = d as f64 - mle.eval(ti)?;
        s += (k * r) * (k * r);
    }
    Ok(s.sqrt() / n)
}

/// `S_{nh}(t)` for grouped data given the MLE values at the group times.
pub fn studentized_sd_grouped(g: &GroupedStatus, mle_values: &[f64], t: f64, h: f64, b: f64) -> f64 {
    let n = g.n() as f64;
    let mut s = 0.0;
    for i in 0..g.times.len() {
        let k = reflected_kernel(&Triweight, t, g.times[i], h, b);
        if k == 0.0 {
            continue;
        }
        let f = mle_values[i];
        let pos = g.positives[i] as f64;
        let neg = (g.counts[i] - g.positives[i]) as f64;
        s += k * k * (pos * (1.0 - f) * (1.0 - f) + neg * f * f);
    }
    s.sqrt() / n
}

/// Asymptotic bias of the smoothed current-status MLE when the event times follow
/// `f_0(x) = e^{−x}/(1 − e^{−2})` on `[0, 2]`.
pub fn asymptotic_bias_truncexp(t: f64, h: f64) -> Result<f64> {
    let b = 2.0;
    if !(0.0..=b).contains(&t) {
        return Err(Error::Domain(format!("t = {t} outside [0, 2]")));
    }
    if !(h > 0.0 && h < b) {
        return Err(Error::Domain(format!("bandwidth h = {h} not in (0, 2)")));
    }
    let k = Triweight;
    let mut m = k.second_moment();
    if t < h {
        m -= 2.0 * k.boundary_moment(t / h);
    } else if t > b - h {
        m -= 2.0 * k.boundary_moment((b - t) / h);
    }
    Ok(-h * h * (-t).exp() * m / (2.0 * (1.0 - (-2.0f64).exp())))
}
