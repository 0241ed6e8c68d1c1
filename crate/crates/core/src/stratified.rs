//! Two-step stratified conditional quantile models.
//!
//! A marginal model `Q_τ(Y1 | x)` and a conditional model `Q_τ(Y2 | x, y1)`
//! are fit on an evenly spaced τ-grid, either linear in `x` (setting one) or
//! with B-spline and varying-coefficient terms (setting two). Samples are
//! drawn by inverse transform through the fitted quantile functions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::qr::{self, QrProblem, QrSolution};
use crate::{Dataset, Error, Result, SplineBasis};

/// τ levels per warm-started chain when fitting a grid.
const GRID_CHAIN: usize = 25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Setting {
    One,
    Two,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct TauGrid {
    levels: Vec<f64>,
}

impl TauGrid {
    /// `τ_k = k/(size+1)` for `k = 1..=size`.
    pub fn even(size: usize) -> Result<Self> {
        if size == 0 {
            return Err(Error::InvalidInput(
                "tau grid needs at least one level".into(),
            ));
        }
        Self::new((1..=size).map(|k| k as f64 / (size + 1) as f64).collect())
    }

    pub fn new(levels: Vec<f64>) -> Result<Self> {
        if levels.is_empty()
            || levels.iter().any(|&t| !(t > 0.0 && t < 1.0))
            || levels.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(Error::InvalidInput(
                "tau grid must be strictly increasing inside (0, 1)".into(),
            ));
        }
        Ok(Self { levels })
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.levels[0]
    }

    pub fn max(&self) -> f64 {
        self.levels[self.levels.len() - 1]
    }

    /// Bracketing index and weight: `τ = (1−w)·τ_k + w·τ_{k+1}`.
    fn locate(&self, tau: f64) -> Result<(usize, f64)> {
        if !(tau >= self.min() && tau <= self.max()) {
            return Err(Error::ExtrapolationInTau {
                tau,
                lo: self.min(),
                hi: self.max(),
            });
        }
        let g = self.levels.len();
        if g == 1 {
            return Ok((0, 0.0));
        }
        let k = self.levels.partition_point(|&t| t <= tau).clamp(1, g - 1) - 1;
        let w = (tau - self.levels[k]) / (self.levels[k + 1] - self.levels[k]);
        Ok((k, w.clamp(0.0, 1.0)))
    }
}

impl TryFrom<Vec<f64>> for TauGrid {
    type Error = Error;

    fn try_from(levels: Vec<f64>) -> Result<Self> {
        Self::new(levels)
    }
}

impl From<TauGrid> for Vec<f64> {
    fn from(g: TauGrid) -> Self {
        g.levels
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Which {
    Marginal,
    Conditional { y1: f64 },
}

/// A point at which quantile crossing is repaired.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbePoint {
    pub x: f64,
    pub y1: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratifiedModel {
    pub setting: Setting,
    pub tau_grid: TauGrid,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub basis: Option<SplineBasis>,
    /// Per level: `[α1, α2]` (one) or spline coefficients `α` (two).
    pub marginal_fits: Vec<Vec<f64>>,
    /// Per level: `[β1, β2, β3]` (one) or `[β1 coefs.., β2 coefs..]` (two).
    pub conditional_fits: Vec<Vec<f64>>,
    pub rearranged: bool,
}

/// Quantile functions at one covariate value. The conditional quantile at
/// level k is `intercept[k] + slope[k]·y1`.
#[derive(Debug, Clone)]
pub struct Slice {
    grid: TauGrid,
    marginal: Vec<f64>,
    intercept: Vec<f64>,
    slope: Vec<f64>,
    sorted: bool,
}

impl Slice {
    /// Marginal predictions on the grid (sorted when the model is rearranged).
    pub fn marginal_levels(&self) -> &[f64] {
        &self.marginal
    }

    pub fn conditional_levels(&self, y1: f64) -> Vec<f64> {
        let mut v: Vec<f64> = self
            .intercept
            .iter()
            .zip(&self.slope)
            .map(|(a, b)| a + b * y1)
            .collect();
        if self.sorted {
            v.sort_by(f64::total_cmp);
        }
        v
    }

    pub fn marginal(&self, tau: f64) -> Result<f64> {
        let (k, w) = self.grid.locate(tau)?;
        Ok(lerp(&self.marginal, k, w))
    }

    pub fn conditional(&self, y1: f64, tau: f64) -> Result<f64> {
        let (k, w) = self.grid.locate(tau)?;
        Ok(self.conditional_at(y1, k, w, &mut Vec::new()))
    }

    /// Interpolated conditional quantile with a caller-provided scratch buffer.
    fn conditional_at(&self, y1: f64, k: usize, w: f64, scratch: &mut Vec<f64>) -> f64 {
        if !self.sorted {
            let lo = self.intercept[k] + self.slope[k] * y1;
            if w == 0.0 || k + 1 >= self.intercept.len() {
                return lo;
            }
            let hi = self.intercept[k + 1] + self.slope[k + 1] * y1;
            return lo + w * (hi - lo);
        }
        scratch.clear();
        scratch.extend(
            self.intercept
                .iter()
                .zip(&self.slope)
                .map(|(a, b)| a + b * y1),
        );
        let (_, lo, rest) = scratch.select_nth_unstable_by(k, f64::total_cmp);
        let lo = *lo;
        if w == 0.0 || rest.is_empty() {
            return lo;
        }
        let hi = rest.iter().copied().fold(f64::INFINITY, f64::min);
        lo + w * (hi - lo)
    }
}

fn lerp(v: &[f64], k: usize, w: f64) -> f64 {
    if w == 0.0 || k + 1 >= v.len() {
        v[k]
    } else {
        v[k] + w * (v[k + 1] - v[k])
    }
}

impl StratifiedModel {
    fn check_x(&self, x: f64) -> Result<()> {
        if !x.is_finite() {
            return Err(Error::InvalidInput(format!(
                "covariate value {x} is not finite"
            )));
        }
        match &self.basis {
            Some(b) => b.check_domain(x),
            None => Ok(()),
        }
    }

    /// Evaluates every level's quantile functions at `x`.
    pub fn slice(&self, x: f64) -> Result<Slice> {
        self.check_x(x)?;
        let g = self.tau_grid.len();
        let (mut marginal, mut intercept, mut slope) = (
            Vec::with_capacity(g),
            Vec::with_capacity(g),
            Vec::with_capacity(g),
        );
        match self.setting {
            Setting::One => {
                for (a, b) in self.marginal_fits.iter().zip(&self.conditional_fits) {
                    marginal.push(a[0] + a[1] * x);
                    intercept.push(b[0] + b[1] * x);
                    slope.push(b[2]);
                }
            }
            Setting::Two => {
                let pi = self
                    .basis
                    .as_ref()
                    .ok_or(Error::InvalidInput("setting two needs a basis".into()))?
                    .eval(x)?;
                let q = pi.len();
                let dot = |c: &[f64]| c.iter().zip(&pi).map(|(c, p)| c * p).sum::<f64>();
                for (a, b) in self.marginal_fits.iter().zip(&self.conditional_fits) {
                    marginal.push(dot(a));
                    intercept.push(dot(&b[..q]));
                    slope.push(dot(&b[q..]));
                }
            }
        }
        if self.rearranged {
            marginal.sort_by(f64::total_cmp);
        }
        Ok(Slice {
            grid: self.tau_grid.clone(),
            marginal,
            intercept,
            slope,
            sorted: self.rearranged,
        })
    }

    pub fn predict_quantile(&self, which: Which, x: f64, tau: f64) -> Result<f64> {
        let slice = self.slice(x)?;
        match which {
            Which::Marginal => slice.marginal(tau),
            Which::Conditional { y1 } => slice.conditional(y1, tau),
        }
    }

    /// Sort-based monotone rearrangement in τ.
    ///
    /// Sorting is applied pointwise whenever the model is evaluated, so the
    /// repair holds at the probe points and at every other query. Returns the
    /// rearranged model and the number of probes that had crossings.
    pub fn rearrange(&self, probe_points: &[ProbePoint]) -> Result<(StratifiedModel, usize)> {
        let raw = StratifiedModel {
            rearranged: false,
            ..self.clone()
        };
        let mut crossed = 0;
        for probe in probe_points {
            let slice = raw.slice(probe.x)?;
            let levels = match probe.y1 {
                None => slice.marginal.clone(),
                Some(y1) => slice.conditional_levels(y1),
            };
            if levels.windows(2).any(|w| w[0] > w[1]) {
                crossed += 1;
            }
        }
        if crossed > 0 {
            log::info!(
                "rearranged crossing quantiles at {crossed} of {} probes",
                probe_points.len()
            );
        }
        Ok((
            StratifiedModel {
                rearranged: true,
                ..raw
            },
            crossed,
        ))
    }

    /// Inverse-transform draws of `(y1, y2)` given `x`, with `τ1, τ2`
    /// independent uniform on `[grid.min, grid.max]`.
    pub fn simulate_conditional(&self, x: f64, n_draws: usize, seed: u64) -> Result<Vec<[f64; 2]>> {
        if !self.rearranged {
            return Err(Error::NotRearranged);
        }
        if n_draws == 0 {
            return Err(Error::InvalidInput("n_draws must be at least 1".into()));
        }
        let slice = self.slice(x)?;
        let (lo, hi) = (self.tau_grid.min(), self.tau_grid.max());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut scratch = Vec::with_capacity(self.tau_grid.len());
        let mut draws = Vec::with_capacity(n_draws);
        for _ in 0..n_draws {
            let t1 = lo + (hi - lo) * rng.random::<f64>();
            let t2 = lo + (hi - lo) * rng.random::<f64>();
            let (k1, w1) = self.tau_grid.locate(t1)?;
            let y1 = lerp(&slice.marginal, k1, w1);
            let (k2, w2) = self.tau_grid.locate(t2)?;
            let y2 = slice.conditional_at(y1, k2, w2, &mut scratch);
            draws.push([y1, y2]);
        }
        Ok(draws)
    }

    /// Model-based joint CDF at `query`, as the empirical CDF of simulated draws.
    pub fn joint_cdf(&self, x: f64, query: [f64; 2], n_draws: usize, seed: u64) -> Result<f64> {
        let draws = self.simulate_conditional(x, n_draws, seed)?;
        Ok(empirical_joint_cdf(&draws, query))
    }
}

/// Fraction of points with both coordinates `≤` the query's.
pub fn empirical_joint_cdf(points: &[[f64; 2]], query: [f64; 2]) -> f64 {
    if points.is_empty() {
        return 0.0;
    }
    let below = points
        .iter()
        .filter(|p| p[0] <= query[0] && p[1] <= query[1])
        .count();
    below as f64 / points.len() as f64
}

/// Fits one design at every grid level, warm-starting along fixed-size
/// chains of levels.
fn fit_grid(
    design: Vec<f64>,
    p: usize,
    response: Vec<f64>,
    grid: &TauGrid,
) -> Result<Vec<QrSolution>> {
    let base = QrProblem::new(design, p, response, grid.min())?;
    let chains: Vec<Result<Vec<QrSolution>>> = grid
        .levels()
        .par_chunks(GRID_CHAIN)
        .map(|taus| {
            let mut out: Vec<QrSolution> = Vec::with_capacity(taus.len());
            for &tau in taus {
                let prob = base.with_tau(tau)?;
                let hint = out.last().map(|s| s.basis.as_slice());
                let sol = qr::solve_from(&prob, hint).map_err(|e| Error::AtTau {
                    tau,
                    source: Box::new(e),
                })?;
                out.push(sol);
            }
            Ok(out)
        })
        .collect();
    let mut all = Vec::with_capacity(grid.len());
    for chain in chains {
        all.extend(chain?);
    }
    Ok(all)
}

fn check_data(data: &Dataset) -> Result<()> {
    if data.len() < 10 {
        return Err(Error::InvalidInput(format!(
            "stratified fits need at least 10 rows, got {}",
            data.len()
        )));
    }
    Ok(())
}

/// Linear marginal `y1 ~ (1, x)` and conditional `y2 ~ (1, x, y1)` at every level.
pub fn fit_setting1(data: &Dataset, grid: &TauGrid) -> Result<StratifiedModel> {
    check_data(data)?;
    let n = data.len();
    let mut marg = Vec::with_capacity(2 * n);
    let mut cond = Vec::with_capacity(3 * n);
    for i in 0..n {
        marg.extend([1.0, data.x[i]]);
        cond.extend([1.0, data.x[i], data.y1[i]]);
    }
    let m = fit_grid(marg, 2, data.y1.clone(), grid)?;
    let c = fit_grid(cond, 3, data.y2.clone(), grid)?;
    Ok(StratifiedModel {
        setting: Setting::One,
        tau_grid: grid.clone(),
        basis: None,
        marginal_fits: m.into_iter().map(|s| s.coefficients).collect(),
        conditional_fits: c.into_iter().map(|s| s.coefficients).collect(),
        rearranged: false,
    })
}

/// Spline marginal `y1 ~ π(x)` and varying-coefficient conditional
/// `y2 ~ [π(x), π(x)·y1]`; the partition of unity supplies the intercept.
pub fn fit_setting2(
    data: &Dataset,
    grid: &TauGrid,
    basis: &SplineBasis,
) -> Result<StratifiedModel> {
    check_data(data)?;
    let n = data.len();
    let q = basis.dim();
    let mut marg = Vec::with_capacity(q * n);
    let mut cond = Vec::with_capacity(2 * q * n);
    for i in 0..n {
        let pi = basis.eval(data.x[i])?;
        marg.extend_from_slice(&pi);
        cond.extend_from_slice(&pi);
        cond.extend(pi.iter().map(|p| p * data.y1[i]));
    }
    let m = fit_grid(marg, q, data.y1.clone(), grid)?;
    let c = fit_grid(cond, 2 * q, data.y2.clone(), grid)?;
    Ok(StratifiedModel {
        setting: Setting::Two,
        tau_grid: grid.clone(),
        basis: Some(basis.clone()),
        marginal_fits: m.into_iter().map(|s| s.coefficients).collect(),
        conditional_fits: c.into_iter().map(|s| s.coefficients).collect(),
        rearranged: false,
    })
}
