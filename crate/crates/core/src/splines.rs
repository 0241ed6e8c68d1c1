//! Clamped B-spline bases for the nonparametric covariate model.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum KnotPlacement {
    Uniform,
    #[default]
    Quantile,
}

/// B-spline basis of a given order (`order = 4` is cubic) on `[lo, hi]`.
///
/// The knot vector is clamped: `lo` and `hi` each appear `order` times, with
/// the interior knots strictly between them. The basis dimension is
/// `interior.len() + order`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawBasis", into = "RawBasis")]
pub struct SplineBasis {
    order: usize,
    lo: f64,
    hi: f64,
    interior: Vec<f64>,
    knots: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawBasis {
    order: usize,
    lo: f64,
    hi: f64,
    interior_knots: Vec<f64>,
}

impl TryFrom<RawBasis> for SplineBasis {
    type Error = Error;

    fn try_from(raw: RawBasis) -> Result<Self> {
        Self::new(raw.order, raw.lo, raw.hi, raw.interior_knots)
    }
}

impl From<SplineBasis> for RawBasis {
    fn from(b: SplineBasis) -> Self {
        Self {
            order: b.order,
            lo: b.lo,
            hi: b.hi,
            interior_knots: b.interior,
        }
    }
}

impl SplineBasis {
    pub fn new(order: usize, lo: f64, hi: f64, interior: Vec<f64>) -> Result<Self> {
        if order == 0 {
            return Err(Error::InvalidInput(
                "spline order must be at least 1".into(),
            ));
        }
        if !(lo.is_finite() && hi.is_finite()) || lo >= hi {
            return Err(Error::DegenerateData);
        }
        let strictly_inside = interior.iter().all(|&k| k > lo && k < hi);
        let increasing = interior.windows(2).all(|w| w[0] < w[1]);
        if !strictly_inside || !increasing {
            return Err(Error::DuplicateKnots);
        }
        let mut basis = Self {
            order,
            lo,
            hi,
            interior,
            knots: Vec::new(),
        };
        basis.knots = basis.build_knots();
        Ok(basis)
    }

    fn build_knots(&self) -> Vec<f64> {
        let mut knots = vec![self.lo; self.order];
        knots.extend_from_slice(&self.interior);
        knots.extend(std::iter::repeat_n(self.hi, self.order));
        knots
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn dim(&self) -> usize {
        self.interior.len() + self.order
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn interior_knots(&self) -> &[f64] {
        &self.interior
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }

    pub fn check_domain(&self, x: f64) -> Result<()> {
        if self.contains(x) {
            Ok(())
        } else {
            Err(Error::OutOfDomain {
                x,
                lo: self.lo,
                hi: self.hi,
            })
        }
    }

    /// Greville abscissae; `Σ greville[j]·π_j(x) = x` for order ≥ 2.
    pub fn greville(&self) -> Vec<f64> {
        let k = self.order;
        if k == 1 {
            return (0..self.dim())
                .map(|j| 0.5 * (self.knots[j] + self.knots[j + 1]))
                .collect();
        }
        (0..self.dim())
            .map(|j| self.knots[j + 1..j + k].iter().sum::<f64>() / (k - 1) as f64)
            .collect()
    }

    /// Evaluates all `dim()` basis functions at `x`.
    pub fn eval(&self, x: f64) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dim()];
        self.eval_into(x, &mut out)?;
        Ok(out)
    }

    pub fn eval_into(&self, x: f64, out: &mut [f64]) -> Result<()> {
        self.check_domain(x)?;
        debug_assert_eq!(out.len(), self.dim());
        out.iter_mut().for_each(|v| *v = 0.0);

        let k = self.order;
        let t = &self.knots;
        // span index with t[span] <= x < t[span+1]; the right end closes the last span
        let last = self.dim() - 1;
        let span = if x >= self.hi {
            last
        } else {
            (k - 1) + self.interior.partition_point(|&knot| knot <= x)
        };

        // Triangular Cox-de Boor on the k nonzero functions.
        let mut vals = vec![0.0; k];
        let mut left = vec![0.0; k];
        let mut right = vec![0.0; k];
        vals[0] = 1.0;
        for j in 1..k {
            left[j] = x - t[span + 1 - j];
            right[j] = t[span + j] - x;
            let mut saved = 0.0;
            for r in 0..j {
                let denom = right[r + 1] + left[j - r];
                let temp = if denom == 0.0 { 0.0 } else { vals[r] / denom };
                vals[r] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            vals[j] = saved;
        }
        out[span + 1 - k..=span].copy_from_slice(&vals);
        Ok(())
    }
}

/// Builds a basis over the range of `data` with `n_interior` interior knots.
///
/// Quantile placement puts knots at the `j/(n_interior+1)` empirical quantiles;
/// colliding knots (ties in the data) are merged and the basis shrinks.
pub fn make_basis(
    order: usize,
    n_interior: usize,
    data: &[f64],
    placement: KnotPlacement,
) -> Result<SplineBasis> {
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(
            "covariate has non-finite values".into(),
        ));
    }
    let lo = data.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = data.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if data.is_empty() || lo == hi {
        return Err(Error::DegenerateData);
    }
    let levels = (1..=n_interior).map(|j| j as f64 / (n_interior + 1) as f64);
    let mut interior: Vec<f64> = match placement {
        KnotPlacement::Uniform => levels.map(|p| lo + p * (hi - lo)).collect(),
        KnotPlacement::Quantile => {
            let mut sorted = data.to_vec();
            sorted.sort_by(f64::total_cmp);
            levels.map(|p| quantile_sorted(&sorted, p)).collect()
        }
    };
    let requested = interior.len();
    interior.retain(|&k| k > lo && k < hi);
    interior.dedup();
    if interior.len() < requested {
        log::warn!(
            "merged {} colliding spline knots; basis dimension reduced to {}",
            requested - interior.len(),
            interior.len() + order
        );
    }
    SplineBasis::new(order, lo, hi, interior)
}

/// Linear-interpolation (type 7) empirical quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}
