//! Model adequacy: directional coverage `Δ(u, x)`, its direction average
//! `Δ(x)`, and P–P comparisons of stratified models against windowed data.

use serde::{Deserialize, Serialize};

use crate::stratified::empirical_joint_cdf;
use crate::{Dataset, DirectionalFit, Error, Result, StratifiedModel};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum XMode {
    /// Evaluate the covariate term at each row's own `x`.
    UseRowX,
    /// Evaluate the covariate term at a fixed conditioning value.
    FixedX(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdequacyReport {
    pub tau: f64,
    pub x0: f64,
    pub halfwidth: f64,
    /// `(θ, Δ(u_θ, x0))` in direction-grid order.
    pub per_direction: Vec<(f64, f64)>,
    /// Mean of `Δ(u, x0) − τ` over directions.
    pub delta_signed: f64,
    /// Mean of `|Δ(u, x0) − τ|` over directions.
    pub delta_abs: f64,
    /// Rows in the window.
    pub m: usize,
}

impl AdequacyReport {
    pub fn new(
        tau: f64,
        x0: f64,
        halfwidth: f64,
        per_direction: Vec<(f64, f64)>,
        m: usize,
    ) -> Self {
        let k = per_direction.len().max(1) as f64;
        let delta_signed = per_direction.iter().map(|&(_, d)| d - tau).sum::<f64>() / k;
        let delta_abs = per_direction
            .iter()
            .map(|&(_, d)| (d - tau).abs())
            .sum::<f64>()
            / k;
        Self {
            tau,
            x0,
            halfwidth,
            per_direction,
            delta_signed,
            delta_abs,
            m,
        }
    }
}

/// Summary of a P–P comparison on one covariate window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PpReport {
    pub x0: f64,
    pub halfwidth: f64,
    pub m: usize,
    pub n_draws: usize,
    pub seed: u64,
    pub max_deviation: f64,
}

/// Sample-standard-deviation based window used when none is given.
pub fn default_halfwidth(data: &Dataset) -> f64 {
    0.5 * data.covariate_sd()
}

/// Rows with `|x − center| ≤ halfwidth`, order preserved.
pub fn window_subsample(data: &Dataset, center: f64, halfwidth: f64) -> Result<Dataset> {
    if halfwidth.is_nan() || halfwidth <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "window halfwidth must be positive, got {halfwidth}"
        )));
    }
    let sub = data.select(|i| (data.x[i] - center).abs() <= halfwidth);
    if sub.is_empty() {
        return Err(Error::EmptyWindow { center, halfwidth });
    }
    Ok(sub)
}

/// Fraction of rows on or below the fitted directional hyperplane.
pub fn delta_u(subset: &Dataset, fit: &DirectionalFit, x_mode: XMode) -> Result<f64> {
    if subset.is_empty() {
        return Err(Error::InvalidInput("empty subset".into()));
    }
    let mut below = 0usize;
    for i in 0..subset.len() {
        let x = match x_mode {
            XMode::UseRowX => subset.x[i],
            XMode::FixedX(v) => v,
        };
        if fit.residual(subset.point(i), x)? <= 0.0 {
            below += 1;
        }
    }
    Ok(below as f64 / subset.len() as f64)
}

/// Direction-averaged coverage deviation on the window around `x0`.
pub fn delta_x(
    data: &Dataset,
    x0: f64,
    halfwidth: f64,
    tau: f64,
    fits: &[DirectionalFit],
) -> Result<AdequacyReport> {
    if fits.is_empty() {
        return Err(Error::InvalidInput("no directional fits".into()));
    }
    if fits.iter().any(|f| f.tau != tau) {
        return Err(Error::InvalidInput(format!(
            "directional fits are not all at tau = {tau}"
        )));
    }
    let sub = window_subsample(data, x0, halfwidth)?;
    let per_direction = fits
        .iter()
        .map(|f| Ok((f.direction.theta(), delta_u(&sub, f, XMode::UseRowX)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(AdequacyReport::new(
        tau,
        x0,
        halfwidth,
        per_direction,
        sub.len(),
    ))
}

/// `(empirical, modeled)` joint CDF pairs at each windowed observation,
/// sorted by the empirical value.
pub fn pp_pairs(
    model: &StratifiedModel,
    data: &Dataset,
    x0: f64,
    halfwidth: f64,
    n_draws: usize,
    seed: u64,
) -> Result<Vec<(f64, f64)>> {
    let sub = window_subsample(data, x0, halfwidth)?;
    let points = sub.points();
    // one draw set serves every query; identical to per-point joint_cdf calls
    let draws = model.simulate_conditional(x0, n_draws, seed)?;
    let mut pairs: Vec<(f64, f64)> = points
        .iter()
        .map(|&p| {
            (
                empirical_joint_cdf(&points, p),
                empirical_joint_cdf(&draws, p),
            )
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    Ok(pairs)
}

/// Largest `|empirical − modeled|` over P–P pairs.
pub fn pp_max_deviation(pairs: &[(f64, f64)]) -> f64 {
    pairs.iter().map(|(e, m)| (e - m).abs()).fold(0.0, f64::max)
}
