//! Greatest convex minorants, pool-adjacent-violators and step functions.
//!
//! Everything downstream (the causal estimator and all of its variants) is
//! expressed through these primitives: a cumulative-sum diagram is built,
//! its greatest convex minorant (GCM) is taken, and the left derivative of
//! the minorant gives the monotone fit.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};

/// A finite point set in the plane with strictly increasing abscissae.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanarPoints {
    x: Vec<f64>,
    y: Vec<f64>,
}

impl PlanarPoints {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::InvalidInput(format!(
                "x has {} entries but y has {}",
                x.len(),
                y.len()
            )));
        }
        ensure_finite(&x, "x")?;
        ensure_finite(&y, "y")?;
        if let Some(i) = x.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::NotIncreasing(i + 1));
        }
        Ok(Self { x, y })
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }
}

/// Greatest convex minorant of a point set, stored by its knots.
///
/// Between knots the minorant is the linear interpolation; collinear
/// knots are merged so consecutive slopes are strictly increasing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexMinorant {
    knots: Vec<f64>,
    values: Vec<f64>,
}

impl ConvexMinorant {
    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Slopes of the linear pieces, one per pair of consecutive knots.
    pub fn slopes(&self) -> Vec<f64> {
        self.knots
            .windows(2)
            .zip(self.values.windows(2))
            .map(|(k, v)| (v[1] - v[0]) / (k[1] - k[0]))
            .collect()
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.knots[0], self.knots[self.knots.len() - 1])
    }

    /// Value of the minorant at `t`, which must lie within the knot range.
    pub fn evaluate(&self, t: f64) -> Result<f64> {
        let (lo, hi) = self.domain();
        if !(lo..=hi).contains(&t) {
            return Err(Error::OutOfDomain { t, lo, hi });
        }
        let idx = self.knots.partition_point(|&k| k < t);
        if self.knots[idx] == t {
            return Ok(self.values[idx]);
        }
        let (x0, x1) = (self.knots[idx - 1], self.knots[idx]);
        let (y0, y1) = (self.values[idx - 1], self.values[idx]);
        Ok(y0 + (y1 - y0) * (t - x0) / (x1 - x0))
    }

    /// Left derivative at `t`; at a knot this is the incoming slope.
    pub fn left_derivative(&self, t: f64) -> Result<f64> {
        let (lo, hi) = self.domain();
        if !(t > lo && t <= hi) {
            return Err(Error::OutOfDomain { t, lo, hi });
        }
        let idx = self.knots.partition_point(|&k| k < t);
        Ok(self.segment_slope(idx - 1))
    }

    fn segment_slope(&self, seg: usize) -> f64 {
        (self.values[seg + 1] - self.values[seg]) / (self.knots[seg + 1] - self.knots[seg])
    }

    /// The left derivative as a left-continuous step function on the domain.
    pub fn left_derivative_step(&self) -> StepFunction {
        StepFunction {
            knots: self.knots[1..].to_vec(),
            values: self.slopes(),
            continuity: Continuity::Left,
            below: None,
        }
    }
}

/// Greatest convex minorant over `[x_1, x_K]` via a single lower-hull pass.
pub fn gcm(points: &PlanarPoints) -> Result<ConvexMinorant> {
    let k = points.len();
    if k < 2 {
        return Err(Error::TooFewPoints { needed: 2, got: k });
    }
    let (x, y) = (points.x(), points.y());
    let slope = |i: usize, j: usize| (y[j] - y[i]) / (x[j] - x[i]);
    let mut hull: Vec<usize> = Vec::with_capacity(k);
    for i in 0..k {
        while hull.len() >= 2 {
            let b = hull[hull.len() - 1];
            let a = hull[hull.len() - 2];
            if slope(a, b) >= slope(b, i) {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(i);
    }
    Ok(ConvexMinorant {
        knots: hull.iter().map(|&i| x[i]).collect(),
        values: hull.iter().map(|&i| y[i]).collect(),
    })
}

/// Which side a step function takes its value from at a knot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Continuity {
    /// `f(x) = v_k` on `(t_{k-1}, t_k]`.
    Left,
    /// `f(x) = v_k` on `[t_k, t_{k+1})`.
    Right,
}

/// Piecewise-constant function given by knots and levels.
///
/// Outside the knot range the nearest level is used, except that a
/// right-continuous function may carry an explicit value below its first
/// knot (a cumulative sum is zero there, for instance).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepFunction {
    knots: Vec<f64>,
    values: Vec<f64>,
    continuity: Continuity,
    below: Option<f64>,
}

impl StepFunction {
    pub fn new(knots: Vec<f64>, values: Vec<f64>, continuity: Continuity) -> Result<Self> {
        if knots.is_empty() {
            return Err(Error::TooFewPoints { needed: 1, got: 0 });
        }
        if knots.len() != values.len() {
            return Err(Error::InvalidInput(format!(
                "{} knots but {} values",
                knots.len(),
                values.len()
            )));
        }
        ensure_finite(&knots, "knots")?;
        ensure_finite(&values, "values")?;
        if let Some(i) = knots.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::NotIncreasing(i + 1));
        }
        Ok(Self {
            knots,
            values,
            continuity,
            below: None,
        })
    }

    /// Sets the value taken strictly below the first knot.
    pub fn with_value_below(mut self, v: f64) -> Self {
        self.below = Some(v);
        self
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

    pub fn len(&self) -> usize {
        self.knots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.knots.is_empty()
    }

    pub fn evaluate(&self, x: f64) -> f64 {
        let n = self.knots.len();
        match self.continuity {
            Continuity::Right => {
                let idx = self.knots.partition_point(|&k| k <= x);
                if idx == 0 {
                    self.below.unwrap_or(self.values[0])
                } else {
                    self.values[idx - 1]
                }
            }
            Continuity::Left => {
                let idx = self.knots.partition_point(|&k| k < x);
                if idx == 0 {
                    self.below.unwrap_or(self.values[0])
                } else if idx == n {
                    self.values[n - 1]
                } else {
                    self.values[idx]
                }
            }
        }
    }
}

#[derive(Clone, Copy)]
struct Block {
    wy: f64,
    w: f64,
    len: usize,
}

impl Block {
    fn mean(&self) -> f64 {
        self.wy / self.w
    }

    fn absorb(&mut self, other: Block) {
        self.wy += other.wy;
        self.w += other.w;
        self.len += other.len;
    }
}

fn validate_weighted(y: &[f64], w: &[f64]) -> Result<()> {
    if y.is_empty() {
        return Err(Error::TooFewPoints { needed: 1, got: 0 });
    }
    if y.len() != w.len() {
        return Err(Error::InvalidInput(format!(
            "{} ordinates but {} weights",
            y.len(),
            w.len()
        )));
    }
    ensure_finite(y, "y")?;
    ensure_finite(w, "w")?;
    if let Some(i) = w.iter().position(|&wi| wi <= 0.0) {
        return Err(Error::NonPositiveWeight(i));
    }
    Ok(())
}

fn pool(y: &[f64], w: &[f64], violates: impl Fn(f64, f64) -> bool) -> Vec<f64> {
    let mut blocks: Vec<Block> = Vec::with_capacity(y.len());
    for (&yi, &wi) in y.iter().zip(w) {
        let mut cur = Block {
            wy: wi * yi,
            w: wi,
            len: 1,
        };
        while let Some(prev) = blocks.last() {
            if violates(prev.mean(), cur.mean()) {
                let mut merged = blocks.pop().unwrap();
                merged.absorb(cur);
                cur = merged;
            } else {
                break;
            }
        }
        blocks.push(cur);
    }
    blocks
        .iter()
        .flat_map(|b| std::iter::repeat_n(b.mean(), b.len))
        .collect()
}

/// Weighted least-squares non-decreasing fit (pool adjacent violators).
pub fn pava_weighted(y: &[f64], w: &[f64]) -> Result<Vec<f64>> {
    validate_weighted(y, w)?;
    Ok(pool(y, w, |prev, cur| prev > cur))
}

/// Weighted least-squares non-increasing fit.
pub fn pava_weighted_decreasing(y: &[f64], w: &[f64]) -> Result<Vec<f64>> {
    validate_weighted(y, w)?;
    Ok(pool(y, w, |prev, cur| prev < cur))
}

/// Sorts by `x` and pools tied abscissae into one point carrying the summed
/// weight and the weighted mean ordinate.
pub fn pool_ties(x: &[f64], y: &[f64], w: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&i, &j| x[i].total_cmp(&x[j]));
    let mut xs: Vec<f64> = Vec::new();
    let mut wys: Vec<f64> = Vec::new();
    let mut ws: Vec<f64> = Vec::new();
    for &i in &order {
        match xs.last() {
            Some(&last) if last == x[i] => {
                *wys.last_mut().unwrap() += w[i] * y[i];
                *ws.last_mut().unwrap() += w[i];
            }
            _ => {
                xs.push(x[i]);
                wys.push(w[i] * y[i]);
                ws.push(w[i]);
            }
        }
    }
    let ys = wys.iter().zip(&ws).map(|(s, w)| s / w).collect();
    (xs, ys, ws)
}

/// Weighted isotonic regression of `y` on `x` as a right-continuous step
/// function over the distinct values of `x`.
pub fn isotonic_regression(y: &[f64], x: &[f64], w: &[f64]) -> Result<StepFunction> {
    validate_weighted(y, w)?;
    if x.len() != y.len() {
        return Err(Error::InvalidInput(format!(
            "{} abscissae but {} ordinates",
            x.len(),
            y.len()
        )));
    }
    ensure_finite(x, "x")?;
    let (xs, ys, ws) = pool_ties(x, y, w);
    let fit = pava_weighted(&ys, &ws)?;
    StepFunction::new(xs, fit, Continuity::Right)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Lower convex hull evaluated at each input abscissa by brute force:
    /// the minimum over all chords spanning the point.
    fn brute_force_minorant(x: &[f64], y: &[f64]) -> Vec<f64> {
        let n = x.len();
        (0..n)
            .map(|i| {
                let mut best = y[i];
                for j in 0..=i {
                    for k in i..n {
                        if j == k {
                            continue;
                        }
                        let v = y[j] + (y[k] - y[j]) * (x[i] - x[j]) / (x[k] - x[j]);
                        best = best.min(v);
                    }
                }
                best
            })
            .collect()
    }

    fn cusum_left_derivatives(y: &[f64], w: &[f64]) -> Vec<f64> {
        let mut cx = vec![0.0];
        let mut cy = vec![0.0];
        for (yi, wi) in y.iter().zip(w) {
            cx.push(cx.last().unwrap() + wi);
            cy.push(cy.last().unwrap() + wi * yi);
        }
        let m = gcm(&PlanarPoints::new(cx.clone(), cy).unwrap()).unwrap();
        cx[1..].iter().map(|&t| m.left_derivative(t).unwrap()).collect()
    }

    #[test]
    fn flat_points_give_flat_minorant() {
        let p = PlanarPoints::new(vec![0.0, 1.0, 2.0], vec![0.0, 0.0, 0.0]).unwrap();
        let m = gcm(&p).unwrap();
        assert_eq!(m.knots(), &[0.0, 2.0]);
        for t in [0.0, 0.5, 1.0, 2.0] {
            assert_eq!(m.evaluate(t).unwrap(), 0.0);
        }
        assert_eq!(m.slopes(), vec![0.0]);
    }

    #[test]
    fn hull_matches_brute_force_example() {
        let x = vec![0.0, 1.0, 2.0, 3.0];
        let y = vec![0.0, 2.0, 1.0, 3.0];
        let m = gcm(&PlanarPoints::new(x.clone(), y.clone()).unwrap()).unwrap();
        assert_eq!(m.knots(), &[0.0, 2.0, 3.0]);
        assert_eq!(m.values(), &[0.0, 1.0, 3.0]);
        assert_eq!(m.slopes(), vec![0.5, 2.0]);
        let oracle = brute_force_minorant(&x, &y);
        for (xi, o) in x.iter().zip(&oracle) {
            assert!((m.evaluate(*xi).unwrap() - o).abs() < 1e-15);
        }
    }

    #[test]
    fn convex_input_is_its_own_minorant() {
        let x: Vec<f64> = (0..8).map(|i| i as f64 * 0.5).collect();
        let y: Vec<f64> = x.iter().map(|v| v * v - v).collect();
        let m = gcm(&PlanarPoints::new(x.clone(), y.clone()).unwrap()).unwrap();
        assert_eq!(m.knots(), &x[..]);
        assert_eq!(m.values(), &y[..]);
    }

    #[test]
    fn left_derivative_examples() {
        let m = gcm(&PlanarPoints::new(vec![0.0, 1.0, 2.0, 3.0], vec![0.0, 2.0, 1.0, 3.0]).unwrap()).unwrap();
        assert_eq!(m.left_derivative(1.0).unwrap(), 0.5);
        assert_eq!(m.left_derivative(2.0).unwrap(), 0.5);
        assert_eq!(m.left_derivative(2.5).unwrap(), 2.0);
        assert_eq!(m.left_derivative(3.0).unwrap(), 2.0);
        assert!(matches!(m.left_derivative(0.0), Err(Error::OutOfDomain { .. })));
        assert!(matches!(m.left_derivative(3.1), Err(Error::OutOfDomain { .. })));

        let lin = gcm(&PlanarPoints::new(vec![0.0, 1.0, 4.0], vec![1.0, 3.5, 11.0]).unwrap()).unwrap();
        for t in [0.1, 1.0, 2.7, 4.0] {
            assert_eq!(lin.left_derivative(t).unwrap(), 2.5);
        }
    }

    #[test]
    fn gcm_rejects_bad_input() {
        assert!(matches!(
            PlanarPoints::new(vec![0.0], vec![1.0]).and_then(|p| gcm(&p)),
            Err(Error::TooFewPoints { .. })
        ));
        assert!(matches!(
            PlanarPoints::new(vec![0.0, 0.0], vec![1.0, 2.0]),
            Err(Error::NotIncreasing(1))
        ));
        assert!(matches!(
            PlanarPoints::new(vec![0.0, 1.0], vec![f64::NAN, 2.0]),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn pava_examples() {
        assert_eq!(pava_weighted(&[1.0, 2.0, 3.0], &[1.0; 3]).unwrap(), vec![1.0, 2.0, 3.0]);
        assert_eq!(pava_weighted(&[3.0, 1.0, 2.0], &[1.0; 3]).unwrap(), vec![2.0, 2.0, 2.0]);
        assert_eq!(pava_weighted(&[2.0, 1.0], &[1.0, 3.0]).unwrap(), vec![1.25, 1.25]);
    }

    #[test]
    fn pava_matches_exhaustive_grid_search() {
        let y = [3.0, 1.0, 2.0];
        let grid: Vec<f64> = (0..=80).map(|i| i as f64 * 0.05).collect();
        let mut best = (f64::INFINITY, [0.0; 3]);
        for &a in &grid {
            for &b in grid.iter().filter(|&&b| b >= a) {
                for &c in grid.iter().filter(|&&c| c >= b) {
                    let loss = (y[0] - a).powi(2) + (y[1] - b).powi(2) + (y[2] - c).powi(2);
                    if loss < best.0 {
                        best = (loss, [a, b, c]);
                    }
                }
            }
        }
        let fit = pava_weighted(&y, &[1.0; 3]).unwrap();
        for (f, g) in fit.iter().zip(best.1) {
            assert!((f - g).abs() < 1e-9);
        }
    }

    #[test]
    fn pava_rejects_bad_input() {
        assert!(matches!(pava_weighted(&[], &[]), Err(Error::TooFewPoints { .. })));
        assert!(matches!(
            pava_weighted(&[1.0, 2.0], &[1.0, 0.0]),
            Err(Error::NonPositiveWeight(1))
        ));
        assert!(pava_weighted(&[1.0, 2.0], &[1.0]).is_err());
    }

    #[test]
    fn isotonic_regression_examples() {
        let f = isotonic_regression(&[4.0; 5], &[1.0, 2.0, 3.0, 4.0, 5.0], &[1.0; 5]).unwrap();
        assert!(f.values().iter().all(|&v| v == 4.0));

        let f = isotonic_regression(&[3.0, 1.0, 2.0], &[1.0, 2.0, 3.0], &[1.0; 3]).unwrap();
        assert_eq!(f.values(), &[2.0, 2.0, 2.0]);

        // ties pooled before fitting
        let f = isotonic_regression(&[1.0, 3.0, 0.0], &[2.0, 1.0, 1.0], &[1.0, 1.0, 2.0]).unwrap();
        assert_eq!(f.knots(), &[1.0, 2.0]);
        assert_eq!(f.values(), &[1.0, 1.0]);
    }

    #[test]
    fn step_function_continuity() {
        let r = StepFunction::new(vec![1.0, 2.0], vec![10.0, 20.0], Continuity::Right)
            .unwrap()
            .with_value_below(0.0);
        assert_eq!(r.evaluate(0.5), 0.0);
        assert_eq!(r.evaluate(1.0), 10.0);
        assert_eq!(r.evaluate(1.5), 10.0);
        assert_eq!(r.evaluate(2.0), 20.0);
        assert_eq!(r.evaluate(9.0), 20.0);

        let l = StepFunction::new(vec![1.0, 2.0], vec![10.0, 20.0], Continuity::Left).unwrap();
        assert_eq!(l.evaluate(0.5), 10.0);
        assert_eq!(l.evaluate(1.0), 10.0);
        assert_eq!(l.evaluate(1.5), 20.0);
        assert_eq!(l.evaluate(2.0), 20.0);
        assert_eq!(l.evaluate(3.0), 20.0);
    }

    fn weighted_input(max: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (1..=max).prop_flat_map(|n| {
            (
                prop::collection::vec(-10.0f64..10.0, n),
                prop::collection::vec(0.05f64..5.0, n),
            )
        })
    }

    proptest! {
        #[test]
        fn gcm_is_convex_minorant_touching_at_knots(
            pts in prop::collection::vec((0.01f64..1.0, -5.0f64..5.0), 2..60)
        ) {
            let mut x = Vec::new();
            let mut acc = 0.0;
            for (dx, _) in &pts { acc += dx; x.push(acc); }
            let y: Vec<f64> = pts.iter().map(|p| p.1).collect();
            let m = gcm(&PlanarPoints::new(x.clone(), y.clone()).unwrap()).unwrap();
            let slopes = m.slopes();
            for s in slopes.windows(2) {
                prop_assert!(s[1] > s[0]);
            }
            for (xi, yi) in x.iter().zip(&y) {
                prop_assert!(m.evaluate(*xi).unwrap() <= yi + 1e-12);
            }
            for (k, v) in m.knots().iter().zip(m.values()) {
                let i = x.iter().position(|xi| xi == k).unwrap();
                prop_assert_eq!(y[i], *v);
            }
            prop_assert_eq!(m.knots()[0], x[0]);
            prop_assert_eq!(*m.knots().last().unwrap(), *x.last().unwrap());
            let oracle = brute_force_minorant(&x, &y);
            for (xi, o) in x.iter().zip(&oracle) {
                prop_assert!((m.evaluate(*xi).unwrap() - o).abs() < 1e-9);
            }
        }

        #[test]
        fn pava_equals_cusum_left_derivative((y, w) in weighted_input(1000)) {
            let fit = pava_weighted(&y, &w).unwrap();
            let via_gcm = cusum_left_derivatives(&y, &w);
            for (a, b) in fit.iter().zip(&via_gcm) {
                prop_assert!((a - b).abs() < 1e-12 * (1.0 + b.abs()), "{} vs {}", a, b);
            }
        }

        #[test]
        fn pava_is_idempotent_monotone_and_preserves_total((y, w) in weighted_input(200)) {
            let fit = pava_weighted(&y, &w).unwrap();
            for p in fit.windows(2) {
                prop_assert!(p[1] >= p[0]);
            }
            for (a, b) in pava_weighted(&fit, &w).unwrap().iter().zip(&fit) {
                prop_assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()));
            }
            let before: f64 = y.iter().zip(&w).map(|(a, b)| a * b).sum();
            let after: f64 = fit.iter().zip(&w).map(|(a, b)| a * b).sum();
            prop_assert!((before - after).abs() < 1e-9 * (1.0 + before.abs()));
        }

        #[test]
        fn antitonic_duality((y, w) in weighted_input(200)) {
            let neg_rev_y: Vec<f64> = y.iter().rev().map(|v| -v).collect();
            let rev_w: Vec<f64> = w.iter().rev().copied().collect();
            let lhs = pava_weighted(&neg_rev_y, &rev_w).unwrap();
            let rhs: Vec<f64> = pava_weighted(&y, &w).unwrap().iter().rev().map(|v| -v).collect();
            for (a, b) in lhs.iter().zip(&rhs) {
                prop_assert!((a - b).abs() < 1e-12 * (1.0 + b.abs()));
            }
            // a non-increasing fit is the negated non-decreasing fit of -y
            let neg_y: Vec<f64> = y.iter().map(|v| -v).collect();
            let dec = pava_weighted_decreasing(&y, &w).unwrap();
            let via_inc = pava_weighted(&neg_y, &w).unwrap();
            for (a, b) in dec.iter().zip(&via_inc) {
                prop_assert_eq!(*a, -*b);
            }
        }
    }
}
