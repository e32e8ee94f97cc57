//! Cusum diagrams, greatest convex minorants / least concave majorants and
//! monotone step functions.
//!
//! The minorant and majorant are computed by a single left-to-right pass that
//! keeps a stack of linear pieces and pools adjacent pieces whose slopes are out
//! of order. The O(m²) max-min / min-max formulas are kept as independent
//! verification routes.

use crate::error::{Error, Result};

/// Slopes closer than this (relative to their magnitude) are pooled into one piece.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// A finite diagram of points `(x_0, 0), (x_1, y_1), ..., (x_m, y_m)` with
/// strictly increasing abscissae.
#[derive(Debug, Clone, PartialEq)]
pub struct CusumDiagram {
    xs: Vec<f64>,
    ys: Vec<f64>,
}

impl CusumDiagram {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        if xs.len() != ys.len() {
            return Err(Error::Validation(format!(
                "diagram has {} abscissae but {} ordinates",
                xs.len(),
                ys.len()
            )));
        }
        if xs.len() < 2 {
            return Err(Error::Validation(
                "diagram needs the origin and at least one point".into(),
            ));
        }
        if xs.iter().chain(ys.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Validation("diagram coordinates must be finite".into()));
        }
        if ys[0] != 0.0 {
            return Err(Error::Validation("diagram must start at ordinate 0".into()));
        }
        if let Some(w) = xs.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::Validation(format!(
                "abscissae not strictly increasing at index {}",
                w + 1
            )));
        }
        Ok(Self { xs, ys })
    }

    /// Builds the diagram from positive abscissa increments and ordinate increments,
    /// starting at the origin `(0, 0)`.
    pub fn from_increments(dx: &[f64], dy: &[f64]) -> Result<Self> {
        if dx.len() != dy.len() {
            return Err(Error::Validation("increment arrays differ in length".into()));
        }
        let mut xs = Vec::with_capacity(dx.len() + 1);
        let mut ys = Vec::with_capacity(dy.len() + 1);
        xs.push(0.0);
        ys.push(0.0);
        let (mut x, mut y) = (0.0, 0.0);
        for (a, b) in dx.iter().zip(dy) {
            x += a;
            y += b;
            xs.push(x);
            ys.push(y);
        }
        Self::new(xs, ys)
    }

    /// Number of points after the origin.
    pub fn len(&self) -> usize {
        self.xs.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    pub fn ys(&self) -> &[f64] {
        &self.ys
    }

    pub fn increments(&self) -> (Vec<f64>, Vec<f64>) {
        let dx = self.xs.windows(2).map(|w| w[1] - w[0]).collect();
        let dy = self.ys.windows(2).map(|w| w[1] - w[0]).collect();
        (dx, dy)
    }

    /// Chord slope from point `k` to point `i` (`k < i`).
    fn chord(&self, k: usize, i: usize) -> f64 {
        (self.ys[i] - self.ys[k]) / (self.xs[i] - self.xs[k])
    }
}

/// Which envelope to take.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Envelope {
    /// Greatest convex minorant: nondecreasing slopes.
    ConvexMinorant,
    /// Least concave majorant: nonincreasing slopes.
    ConcaveMajorant,
}

/// A maximal run of indices `start..end` (0-based, over the increments) on which
/// the envelope is linear with slope `value`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Block {
    pub start: usize,
    pub end: usize,
    pub value: f64,
}

impl Block {
    pub fn contains(&self, i: usize) -> bool {
        self.start <= i && i < self.end
    }
}

fn out_of_order(envelope: Envelope, left: f64, right: f64) -> bool {
    let tol = TIE_TOLERANCE * left.abs().max(right.abs()).max(1.0);
    match envelope {
        Envelope::ConvexMinorant => left >= right - tol,
        Envelope::ConcaveMajorant => left <= right + tol,
    }
}

/// Linear pieces of the envelope of the diagram with the given increments.
///
/// `dx` must be strictly positive. Each block's slope is recomputed from its own
/// increments in index order, so blocks with identical increments produce
/// bit-identical slopes regardless of what happens elsewhere in the diagram.
pub fn envelope_blocks(dx: &[f64], dy: &[f64], envelope: Envelope) -> Vec<Block> {
    debug_assert_eq!(dx.len(), dy.len());
    // (start, end, sum_dx, sum_dy)
    let mut stack: Vec<(usize, usize, f64, f64)> = Vec::with_capacity(dx.len());
    for i in 0..dx.len() {
        stack.push((i, i + 1, dx[i], dy[i]));
        while stack.len() >= 2 {
            let top = stack[stack.len() - 1];
            let prev = stack[stack.len() - 2];
            if !out_of_order(envelope, prev.3 / prev.2, top.3 / top.2) {
                break;
            }
            stack.pop();
            let last = stack.last_mut().unwrap();
            last.1 = top.1;
            last.2 += top.2;
            last.3 += top.3;
        }
    }
    stack
        .into_iter()
        .map(|(start, end, _, _)| {
            let sx: f64 = dx[start..end].iter().sum();
            let sy: f64 = dy[start..end].iter().sum();
            Block {
                start,
                end,
                value: sy / sx,
            }
        })
        .collect()
}

/// Expands blocks to one slope per increment.
pub fn expand_blocks(blocks: &[Block], len: usize) -> Vec<f64> {
    let mut out = vec![0.0; len];
    for b in blocks {
        out[b.start..b.end].fill(b.value);
    }
    out
}

/// Index of the block containing increment `i`.
pub fn block_of(blocks: &[Block], i: usize) -> usize {
    blocks.partition_point(|b| b.end <= i)
}

fn envelope_slopes(diagram: &CusumDiagram, envelope: Envelope) -> Vec<f64> {
    let (dx, dy) = diagram.increments();
    let slopes = expand_blocks(&envelope_blocks(&dx, &dy, envelope), dx.len());
    debug_assert!(slopes.windows(2).all(|w| match envelope {
        Envelope::ConvexMinorant => w[0] <= w[1],
        Envelope::ConcaveMajorant => w[0] >= w[1],
    }));
    slopes
}

/// Left derivative of the greatest convex minorant at `x_1, ..., x_m`.
pub fn gcm_left_slopes(diagram: &CusumDiagram) -> Vec<f64> {
    envelope_slopes(diagram, Envelope::ConvexMinorant)
}

/// Left derivative of the least concave majorant at `x_1, ..., x_m`.
pub fn lcm_left_slopes(diagram: &CusumDiagram) -> Vec<f64> {
    envelope_slopes(diagram, Envelope::ConcaveMajorant)
}

fn check_index(diagram: &CusumDiagram, index: usize) -> Result<()> {
    if index == 0 || index > diagram.len() {
        return Err(Error::Domain(format!(
            "index {index} outside 1..={}",
            diagram.len()
        )));
    }
    Ok(())
}

/// `max_{k ≤ i} min_{j ≥ i} (y_j − y_{k−1}) / (x_j − x_{k−1})`, the GCM left slope at
/// the 1-based `index`, by direct enumeration.
pub fn maxmin_slope(diagram: &CusumDiagram, index: usize) -> Result<f64> {
    check_index(diagram, index)?;
    let m = diagram.len();
    let best = (1..=index)
        .map(|k| {
            (index..=m)
                .map(|j| diagram.chord(k - 1, j))
                .fold(f64::INFINITY, f64::min)
        })
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(best)
}

/// `min_{k ≤ i} max_{j ≥ i}` of the chord slopes: the LCM left slope at `index`.
pub fn minmax_slope(diagram: &CusumDiagram, index: usize) -> Result<f64> {
    check_index(diagram, index)?;
    let m = diagram.len();
    let best = (1..=index)
        .map(|k| {
            (index..=m)
                .map(|j| diagram.chord(k - 1, j))
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .fold(f64::INFINITY, f64::min);
    Ok(best)
}

/// Side on which a step function is continuous at its knots.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Continuity {
    /// Value `v_i` holds on `[t_i, t_{i+1})`; zero before the first knot.
    RightContinuous,
    /// Value `v_i` holds on `(t_{i-1}, t_i]` (with `t_0` the domain's lower end);
    /// zero after the last knot.
    LeftContinuous,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Monotonicity {
    Nondecreasing,
    Nonincreasing,
}

/// A piecewise-constant monotone function with jumps only at its knots.
#[derive(Debug, Clone, PartialEq)]
pub struct StepFunction {
    knots: Vec<f64>,
    values: Vec<f64>,
    continuity: Continuity,
    monotonicity: Monotonicity,
    domain: (f64, f64),
}

const MONOTONE_SLACK: f64 = 1e-9;

impl StepFunction {
    pub fn new(
        knots: Vec<f64>,
        values: Vec<f64>,
        continuity: Continuity,
        monotonicity: Monotonicity,
        domain: (f64, f64),
    ) -> Result<Self> {
        if knots.is_empty() || knots.len() != values.len() {
            return Err(Error::Validation(format!(
                "step function needs matching non-empty knots/values ({} vs {})",
                knots.len(),
                values.len()
            )));
        }
        if knots.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Validation("knots must be strictly increasing".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation("step values must be finite".into()));
        }
        if domain.0 > knots[0] || domain.1 < knots[knots.len() - 1] {
            return Err(Error::Validation(
                "domain must contain every knot".into(),
            ));
        }
        let ok = values.windows(2).all(|w| match monotonicity {
            Monotonicity::Nondecreasing => w[1] >= w[0] - MONOTONE_SLACK,
            Monotonicity::Nonincreasing => w[1] <= w[0] + MONOTONE_SLACK,
        });
        if !ok {
            return Err(Error::Validation(format!(
                "values are not {monotonicity:?}"
            )));
        }
        Ok(Self {
            knots,
            values,
            continuity,
            monotonicity,
            domain,
        })
    }

    /// Right-continuous nondecreasing function (a distribution function estimate).
    pub fn distribution(knots: Vec<f64>, values: Vec<f64>, domain: (f64, f64)) -> Result<Self> {
        Self::new(
            knots,
            values,
            Continuity::RightContinuous,
            Monotonicity::Nondecreasing,
            domain,
        )
    }

    /// Left-continuous nonincreasing function on `(0, t_m]` (a density estimate).
    pub fn density(knots: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        Self::new(
            knots,
            values,
            Continuity::LeftContinuous,
            Monotonicity::Nonincreasing,
            (0.0, f64::INFINITY),
        )
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn continuity(&self) -> Continuity {
        self.continuity
    }

    pub fn monotonicity(&self) -> Monotonicity {
        self.monotonicity
    }

    pub fn domain(&self) -> (f64, f64) {
        self.domain
    }

    fn check_domain(&self, t: f64) -> Result<()> {
        if !(t >= self.domain.0 && t <= self.domain.1) {
            return Err(Error::Domain(format!(
                "t = {t} outside [{}, {}]",
                self.domain.0, self.domain.1
            )));
        }
        Ok(())
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        self.check_domain(t)?;
        Ok(match self.continuity {
            Continuity::RightContinuous => {
                let i = self.knots.partition_point(|&k| k <= t);
                if i == 0 {
                    0.0
                } else {
                    self.values[i - 1]
                }
            }
            Continuity::LeftContinuous => {
                if t <= self.domain.0 {
                    return Ok(0.0);
                }
                let i = self.knots.partition_point(|&k| k < t);
                if i == self.knots.len() {
                    0.0
                } else {
                    self.values[i]
                }
            }
        })
    }

    /// Limit from the right at the lower end of the domain; for densities this is `f(0+)`.
    pub fn right_limit_at_lower(&self) -> f64 {
        match self.continuity {
            Continuity::LeftContinuous => self.values[0],
            Continuity::RightContinuous => {
                if self.knots[0] <= self.domain.0 {
                    self.values[0]
                } else {
                    0.0
                }
            }
        }
    }

    /// Constant pieces `(from, to, value)` covering the domain.
    fn pieces(&self) -> Vec<(f64, f64, f64)> {
        let (lo, hi) = self.domain;
        let n = self.knots.len();
        let mut out = Vec::with_capacity(n + 1);
        match self.continuity {
            Continuity::RightContinuous => {
                out.push((lo, self.knots[0], 0.0));
                for i in 0..n {
                    let end = if i + 1 < n { self.knots[i + 1] } else { hi };
                    out.push((self.knots[i], end, self.values[i]));
                }
            }
            Continuity::LeftContinuous => {
                let mut start = lo;
                for i in 0..n {
                    out.push((start, self.knots[i], self.values[i]));
                    start = self.knots[i];
                }
                out.push((self.knots[n - 1], hi, 0.0));
            }
        }
        out
    }

    /// Exact integral over `[a, b]`.
    pub fn integral(&self, a: f64, b: f64) -> Result<f64> {
        if a > b {
            return Err(Error::Domain(format!("integration bounds reversed: {a} > {b}")));
        }
        self.check_domain(a)?;
        self.check_domain(b)?;
        let mut total = 0.0;
        for (from, to, v) in self.pieces() {
            let left = from.max(a);
            let right = to.min(b);
            if right > left && v != 0.0 {
                total += v * (right - left);
            }
        }
        Ok(total)
    }

    /// Jump sizes at the knots, `v_i − v_{i−1}` with the value before the first knot
    /// taken as zero. For a distribution function these are the masses of `dF`.
    pub fn jumps(&self) -> Vec<(f64, f64)> {
        let mut prev = 0.0;
        self.knots
            .iter()
            .zip(&self.values)
            .map(|(&k, &v)| {
                let j = v - prev;
                prev = v;
                (k, j)
            })
            .collect()
    }
}

/// `step_eval` in functional form.
pub fn step_eval(f: &StepFunction, t: f64) -> Result<f64> {
    f.eval(t)
}

/// `step_integral` in functional form.
pub fn step_integral(f: &StepFunction, a: f64, b: f64) -> Result<f64> {
    f.integral(a, b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn diag(xs: &[f64], ys: &[f64]) -> CusumDiagram {
        CusumDiagram::new(xs.to_vec(), ys.to_vec()).unwrap()
    }

    #[test]
    fn gcm_hand_traces() {
        assert_eq!(gcm_left_slopes(&diag(&[0., 1., 2.], &[0., 1., 1.])), vec![0.5, 0.5]);
        assert_eq!(
            gcm_left_slopes(&diag(&[0., 1., 2., 3.], &[0., 1., 1., 2.])),
            vec![0.5, 0.5, 1.0]
        );
        assert_eq!(gcm_left_slopes(&diag(&[0., 1., 2.], &[0., 1., 3.])), vec![1.0, 2.0]);
    }

    #[test]
    fn lcm_hand_traces() {
        assert_eq!(lcm_left_slopes(&diag(&[0., 1., 2.], &[0., 0.5, 1.])), vec![0.5, 0.5]);
        let s = lcm_left_slopes(&diag(&[0., 1., 3.], &[0., 2. / 3., 1.]));
        assert!((s[0] - 2. / 3.).abs() < 1e-15);
        assert!((s[1] - 1. / 6.).abs() < 1e-15);
    }

    #[test]
    fn maxmin_small_cases() {
        let d = diag(&[0., 1., 2., 3.], &[0., 1., 1., 2.]);
        assert_eq!(maxmin_slope(&d, 2).unwrap(), 0.5);
        let convex = diag(&[0., 1., 2.], &[0., 1., 3.]);
        assert_eq!(maxmin_slope(&convex, 2).unwrap(), 2.0);
        assert!(maxmin_slope(&d, 0).is_err());
        assert!(maxmin_slope(&d, 4).is_err());
    }

    #[test]
    fn rejects_malformed_diagrams() {
        assert!(CusumDiagram::new(vec![0., 1., 1.], vec![0., 1., 2.]).is_err());
        assert!(CusumDiagram::new(vec![0., 1.], vec![0.]).is_err());
        assert!(CusumDiagram::new(vec![0., 1.], vec![1., 2.]).is_err());
        assert!(CusumDiagram::new(vec![0.], vec![0.]).is_err());
    }

    #[test]
    fn step_evaluation_sides() {
        let f = StepFunction::density(vec![1., 3.], vec![2. / 3., 1. / 6.]).unwrap();
        assert_eq!(f.eval(1.0).unwrap(), 2. / 3.);
        assert_eq!(f.eval(1.5).unwrap(), 1. / 6.);
        assert_eq!(f.eval(3.5).unwrap(), 0.0);
        assert_eq!(f.eval(0.0).unwrap(), 0.0);
        assert!((f.integral(0.0, 3.0).unwrap() - 1.0).abs() < 1e-15);

        let big_f = StepFunction::distribution(vec![1., 2.], vec![0.5, 0.5], (0.0, 2.0)).unwrap();
        assert_eq!(big_f.eval(1.0).unwrap(), 0.5);
        assert_eq!(big_f.eval(0.5).unwrap(), 0.0);
        assert!(big_f.eval(2.5).is_err());
    }

    #[test]
    fn constant_step_integral() {
        let c = 0.7;
        let f = StepFunction::density(vec![4.0], vec![c]).unwrap();
        assert!((f.integral(0.0, 4.0).unwrap() - c * 4.0).abs() < 1e-15);
        assert!(f.integral(2.0, 1.0).is_err());
    }

    #[test]
    fn step_rejects_wrong_direction() {
        assert!(StepFunction::density(vec![1., 2.], vec![0.1, 0.5]).is_err());
        assert!(StepFunction::distribution(vec![1., 2.], vec![0.5, 0.1], (0., 3.)).is_err());
    }

    fn pav_oracle(dx: &[f64], dy: &[f64]) -> Vec<f64> {
        // Weighted pool-adjacent-violators on the raw chord slopes dy/dx with weights dx.
        let mut vals: Vec<(f64, f64, usize)> = Vec::new(); // (weighted mean, weight, count)
        for (&w, &y) in dx.iter().zip(dy) {
            vals.push((y / w, w, 1));
            while vals.len() > 1 {
                let (m2, w2, c2) = vals[vals.len() - 1];
                let (m1, w1, c1) = vals[vals.len() - 2];
                if m1 <= m2 {
                    break;
                }
                vals.pop();
                let last = vals.last_mut().unwrap();
                *last = ((m1 * w1 + m2 * w2) / (w1 + w2), w1 + w2, c1 + c2);
            }
        }
        vals.into_iter()
            .flat_map(|(m, _, c)| std::iter::repeat(m).take(c))
            .collect()
    }

    fn arb_diagram() -> impl Strategy<Value = CusumDiagram> {
        (1usize..30).prop_flat_map(|m| {
            (
                proptest::collection::vec(0.05f64..3.0, m),
                proptest::collection::vec(-2.0f64..2.0, m),
            )
                .prop_map(|(dx, dy)| CusumDiagram::from_increments(&dx, &dy).unwrap())
        })
    }

    proptest! {
        #[test]
        fn stack_matches_maxmin(d in arb_diagram()) {
            let s = gcm_left_slopes(&d);
            for i in 1..=d.len() {
                prop_assert!((s[i - 1] - maxmin_slope(&d, i).unwrap()).abs() <= 1e-12);
            }
            let l = lcm_left_slopes(&d);
            for i in 1..=d.len() {
                prop_assert!((l[i - 1] - minmax_slope(&d, i).unwrap()).abs() <= 1e-12);
            }
        }

        #[test]
        fn minorant_below_points_and_touches_ends(d in arb_diagram()) {
            let s = gcm_left_slopes(&d);
            prop_assert!(s.windows(2).all(|w| w[0] <= w[1]));
            let mut y = 0.0;
            for i in 0..d.len() {
                y += s[i] * (d.xs()[i + 1] - d.xs()[i]);
                prop_assert!(y <= d.ys()[i + 1] + 1e-9);
            }
            prop_assert!((y - d.ys()[d.len()]).abs() < 1e-9);
        }

        #[test]
        fn reflection_identity(d in arb_diagram()) {
            let neg = CusumDiagram::new(d.xs().to_vec(), d.ys().iter().map(|y| -y).collect()).unwrap();
            let l = lcm_left_slopes(&d);
            let g = gcm_left_slopes(&neg);
            for (a, b) in l.iter().zip(&g) {
                prop_assert!((a + b).abs() <= 1e-12);
            }
        }

        #[test]
        fn pav_equivalence(d in arb_diagram()) {
            let (dx, dy) = d.increments();
            let s = gcm_left_slopes(&d);
            let p = pav_oracle(&dx, &dy);
            for (a, b) in s.iter().zip(&p) {
                prop_assert!((a - b).abs() <= 1e-10);
            }
        }
    }
}
