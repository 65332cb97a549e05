//! Raw (non-orthonormal) B-spline basis on [0, 1].

use crate::error::{Error, Result};

/// Clamped B-spline basis of a given degree with the supplied interior
/// knots. The boundary knots 0 and 1 are repeated degree + 1 times, so the
/// basis spans the usual spline space on [0, 1] and sums to one everywhere.
#[derive(Clone, Debug)]
pub struct RawBSpline {
    degree: usize,
    knots: Vec<f64>,
}

impl RawBSpline {
    pub fn new(degree: usize, interior_knots: &[f64]) -> Result<Self> {
        for pair in interior_knots.windows(2) {
            if pair[1] < pair[0] {
                return Err(Error::InvalidKnots(format!(
                    "interior knots must be nondecreasing, got {} after {}",
                    pair[1], pair[0]
                )));
            }
        }
        if let Some(&k) = interior_knots.iter().find(|k| !(0.0 < **k && **k < 1.0)) {
            return Err(Error::InvalidKnots(format!(
                "interior knot {k} outside the open interval (0, 1)"
            )));
        }
        // Each distinct interior knot may repeat up to degree times (degree
        // zero still admits simple knots), keeping the spline continuous.
        let max_multiplicity = degree.max(1);
        let mut multiplicity = 1usize;
        for pair in interior_knots.windows(2) {
            if pair[0] == pair[1] {
                multiplicity += 1;
                if multiplicity > max_multiplicity {
                    return Err(Error::InvalidKnots(format!(
                        "interior knot {} repeated more than {} times",
                        pair[0], max_multiplicity
                    )));
                }
            } else {
                multiplicity = 1;
            }
        }

        let mut knots = Vec::with_capacity(2 * (degree + 1) + interior_knots.len());
        knots.extend(std::iter::repeat(0.0).take(degree + 1));
        knots.extend_from_slice(interior_knots);
        knots.extend(std::iter::repeat(1.0).take(degree + 1));
        Ok(RawBSpline { degree, knots })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Number of basis functions: degree + 1 + number of interior knots.
    pub fn dim(&self) -> usize {
        self.knots.len() - self.degree - 1
    }

    /// Index of the knot span containing x, clamped so that x = 1 falls in
    /// the last nonempty span.
    fn span(&self, x: f64) -> usize {
        let last = self.dim() - 1;
        if x >= 1.0 {
            // Walk left past any repeated trailing knots.
            let mut s = last;
            while s > self.degree && self.knots[s] >= 1.0 {
                s -= 1;
            }
            return s.max(self.degree);
        }
        let mut lo = self.degree;
        let mut hi = last;
        while lo < hi {
            let mid = (lo + hi + 1) / 2;
            if self.knots[mid] <= x {
                lo = mid;
            } else {
                hi = mid - 1;
            }
        }
        lo
    }

    /// Write all basis values at x into `out` (length dim). Only the
    /// degree + 1 functions active on the containing span are nonzero.
    pub fn eval_all(&self, x: f64, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.dim());
        debug_assert!((0.0..=1.0).contains(&x));
        out.fill(0.0);
        let span = self.span(x);
        let d = self.degree;

        // Cox-de Boor recurrence in the local form: `local[j]` holds the
        // value of basis function span - r + j at level r.
        let mut local = vec![0.0; d + 1];
        let mut left = vec![0.0; d + 1];
        let mut right = vec![0.0; d + 1];
        local[0] = 1.0;
        for r in 1..=d {
            left[r] = x - self.knots[span + 1 - r];
            right[r] = self.knots[span + r] - x;
            let mut saved = 0.0;
            for j in 0..r {
                let denom = right[j + 1] + left[r - j];
                let term = if denom == 0.0 { 0.0 } else { local[j] / denom };
                local[j] = saved + right[j + 1] * term;
                saved = left[r - j] * term;
            }
            local[r] = saved;
        }
        out[span - d..=span].copy_from_slice(&local);
    }
}
