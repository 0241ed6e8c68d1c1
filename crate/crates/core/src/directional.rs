//! Directional regression quantiles for bivariate responses.
//!
//! For a unit direction `u` with orthogonal complement `Γ_u`, the fit at
//! level τ minimises the check loss of
//!
//! ```text
//! u'y_i − b_y·Γ_u'y_i − a − b_x'π(x_i)
//! ```
//!
//! where `π` is the identity (linear model), a B-spline basis (spline
//! model) or absent (intercept-only model).

use std::f64::consts::TAU as TWO_PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::qr::{self, QrProblem, QrSolution};
use crate::{Dataset, Error, Result, SplineBasis};

/// Directions per warm-started chain in a sweep. Fixed so that results do
/// not depend on the thread count.
const SWEEP_CHAIN: usize = 45;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Direction {
    theta: f64,
    u: [f64; 2],
}

impl Direction {
    /// Direction at angle `theta`, reduced into `[0, 2π)`.
    pub fn new(theta: f64) -> Self {
        let theta = theta.rem_euclid(TWO_PI);
        Self {
            theta,
            u: [theta.cos(), theta.sin()],
        }
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn u(&self) -> [f64; 2] {
        self.u
    }

    /// `u` rotated by +90°.
    pub fn gamma(&self) -> [f64; 2] {
        gamma_of(self)
    }
}

pub fn gamma_of(u: &Direction) -> [f64; 2] {
    [-u.u[1], u.u[0]]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CovariateModel {
    /// No covariate term; only the intercept.
    Intercept,
    Linear,
    Spline(SplineBasis),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelTag {
    Intercept,
    Linear,
    Spline,
}

impl CovariateModel {
    pub fn tag(&self) -> ModelTag {
        match self {
            CovariateModel::Intercept => ModelTag::Intercept,
            CovariateModel::Linear => ModelTag::Linear,
            CovariateModel::Spline(_) => ModelTag::Spline,
        }
    }

    /// Length of `b_x`.
    pub fn dim(&self) -> usize {
        match self {
            CovariateModel::Intercept => 0,
            CovariateModel::Linear => 1,
            CovariateModel::Spline(b) => b.dim(),
        }
    }

    /// Covariate regressors `π(x)`.
    pub fn features(&self, x: f64) -> Result<Vec<f64>> {
        match self {
            CovariateModel::Intercept => Ok(Vec::new()),
            CovariateModel::Linear => Ok(vec![x]),
            CovariateModel::Spline(b) => b.eval(x),
        }
    }

    /// Design columns actually passed to the solver. The spline's first
    /// function is dropped because the partition of unity already spans the
    /// explicit intercept.
    fn design_features(&self, x: f64) -> Result<Vec<f64>> {
        let mut f = self.features(x)?;
        if matches!(self, CovariateModel::Spline(_)) {
            f.remove(0);
        }
        Ok(f)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionalFit {
    pub direction: Direction,
    pub tau: f64,
    pub a: f64,
    pub b_y: f64,
    pub b_x: Vec<f64>,
    pub model: CovariateModel,
    pub objective: f64,
    pub neg_count: usize,
    pub zero_count: usize,
    pub pos_count: usize,
    #[serde(default, skip_serializing)]
    pub(crate) basis: Vec<usize>,
}

impl DirectionalFit {
    pub fn model_tag(&self) -> ModelTag {
        self.model.tag()
    }

    /// `a + b_x'π(x)`.
    pub fn offset_at(&self, x: f64) -> Result<f64> {
        let f = self.model.features(x)?;
        Ok(self.a + f.iter().zip(&self.b_x).map(|(p, b)| p * b).sum::<f64>())
    }

    /// Normal of the fitted line in the response plane: `u − b_y·Γ_u`.
    pub fn normal(&self) -> [f64; 2] {
        let u = self.direction.u();
        let g = self.direction.gamma();
        [u[0] - self.b_y * g[0], u[1] - self.b_y * g[1]]
    }

    /// Directional residual `u'y − b_y·Γ_u'y − a − b_x'π(x)`.
    pub fn residual(&self, y: [f64; 2], x: f64) -> Result<f64> {
        let nrm = self.normal();
        Ok(nrm[0] * y[0] + nrm[1] * y[1] - self.offset_at(x)?)
    }

    pub fn passes_optimality(&self) -> bool {
        qr::verify_optimality(&self.as_counts(), self.tau)
    }

    fn as_counts(&self) -> QrSolution {
        QrSolution {
            coefficients: Vec::new(),
            objective: self.objective,
            residuals: Vec::new(),
            neg_count: self.neg_count,
            zero_count: self.zero_count,
            pos_count: self.pos_count,
            basis: Vec::new(),
            iterations: 0,
        }
    }
}

/// Covariate regressors of every row, computed once per sweep.
struct Features {
    cols: usize,
    values: Vec<f64>,
}

impl Features {
    fn build(data: &Dataset, model: &CovariateModel) -> Result<Self> {
        let cols = match model {
            CovariateModel::Spline(b) => b.dim() - 1,
            other => other.dim(),
        };
        let mut values = Vec::with_capacity(data.len() * cols);
        for &x in &data.x {
            values.extend(model.design_features(x)?);
        }
        Ok(Self { cols, values })
    }
}

fn build_problem(data: &Dataset, feats: &Features, dir: &Direction, tau: f64) -> Result<QrProblem> {
    let p = 2 + feats.cols;
    let n = data.len();
    if n <= p {
        return Err(Error::InvalidInput(format!(
            "directional fit needs more than {p} rows, got {n}"
        )));
    }
    let u = dir.u();
    let g = dir.gamma();
    let mut design = Vec::with_capacity(n * p);
    let mut response = Vec::with_capacity(n);
    for i in 0..n {
        let y = data.point(i);
        response.push(u[0] * y[0] + u[1] * y[1]);
        design.push(1.0);
        design.push(g[0] * y[0] + g[1] * y[1]);
        design.extend_from_slice(&feats.values[i * feats.cols..(i + 1) * feats.cols]);
    }
    QrProblem::new(design, p, response, tau)
}

fn into_fit(sol: QrSolution, dir: Direction, tau: f64, model: &CovariateModel) -> DirectionalFit {
    let c = &sol.coefficients;
    let mut b_x = c[2..].to_vec();
    if matches!(model, CovariateModel::Spline(_)) {
        b_x.insert(0, 0.0);
    }
    DirectionalFit {
        direction: dir,
        tau,
        a: c[0],
        b_y: c[1],
        b_x,
        model: model.clone(),
        objective: sol.objective,
        neg_count: sol.neg_count,
        zero_count: sol.zero_count,
        pos_count: sol.pos_count,
        basis: sol.basis,
    }
}

pub fn fit_directional(
    data: &Dataset,
    u: Direction,
    tau: f64,
    model: &CovariateModel,
) -> Result<DirectionalFit> {
    let feats = Features::build(data, model)?;
    let problem = build_problem(data, &feats, &u, tau)?;
    Ok(into_fit(qr::solve(&problem)?, u, tau, model))
}

/// Direction grid `θ_k = 2πk/n_dir`.
pub fn direction_grid(n_dir: usize) -> Vec<Direction> {
    (0..n_dir)
        .map(|k| Direction::new(TWO_PI * k as f64 / n_dir as f64))
        .collect()
}

/// Fits every direction of the uniform grid, ordered by angle.
pub fn sweep_directions(
    data: &Dataset,
    tau: f64,
    n_dir: usize,
    model: &CovariateModel,
) -> Result<Vec<DirectionalFit>> {
    if n_dir < 3 {
        return Err(Error::InvalidInput(format!(
            "need at least 3 directions, got {n_dir}"
        )));
    }
    let feats = Features::build(data, model)?;
    let grid = direction_grid(n_dir);

    let chains: Vec<Vec<(Direction, Result<DirectionalFit>)>> = grid
        .par_chunks(SWEEP_CHAIN)
        .map(|chunk| {
            let mut hint: Option<Vec<usize>> = None;
            chunk
                .iter()
                .map(|&dir| {
                    let res = build_problem(data, &feats, &dir, tau)
                        .and_then(|prob| qr::solve_from(&prob, hint.as_deref()))
                        .map(|sol| into_fit(sol, dir, tau, model));
                    if let Ok(fit) = &res {
                        hint = Some(fit.basis.clone());
                    }
                    (dir, res)
                })
                .collect()
        })
        .collect();

    let mut fits = Vec::with_capacity(n_dir);
    let mut failed = Vec::new();
    let mut first = None;
    for (dir, res) in chains.into_iter().flatten() {
        match res {
            Ok(fit) => fits.push(fit),
            Err(e) => {
                failed.push(dir.theta());
                first.get_or_insert(e);
            }
        }
    }
    match first {
        None => Ok(fits),
        Some(e) => Err(Error::PartialSweep {
            failed,
            first: Box::new(e),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qr::check_loss;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn random_data(seed: u64, n: usize) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut y1 = Vec::new();
        let mut y2 = Vec::new();
        let mut x = Vec::new();
        for _ in 0..n {
            let xi: f64 = rng.random();
            let a: f64 = rng.random_range(-1.0..1.0);
            let b: f64 = rng.random_range(-1.0..1.0);
            x.push(xi);
            y1.push(1.0 + 2.0 * xi + a);
            y2.push(-xi + 0.5 * a + b);
        }
        Dataset::new(y1, y2, x).unwrap()
    }

    #[test]
    fn gamma_rotates() {
        let g = gamma_of(&Direction::new(0.0));
        assert!(g[0].abs() < 1e-15 && (g[1] - 1.0).abs() < 1e-15);
        let g = gamma_of(&Direction::new(FRAC_PI_2));
        assert!((g[0] + 1.0).abs() < 1e-15 && g[1].abs() < 1e-15);
        for k in 0..50 {
            let d = Direction::new(0.37 * k as f64);
            let (u, g) = (d.u(), d.gamma());
            assert!((u[0] * g[0] + u[1] * g[1]).abs() < 1e-15);
            assert!(((g[0] * g[0] + g[1] * g[1]).sqrt() - 1.0).abs() < 1e-12);
            assert!(((u[0] * u[0] + u[1] * u[1]).sqrt() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_response_gives_zero_fit() {
        let x: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let data = Dataset::new(
            x.iter().map(|v| (v * 0.3).sin() + 1.0).collect(),
            vec![0.0; 10],
            x,
        )
        .unwrap();
        let fit = fit_directional(
            &data,
            Direction::new(FRAC_PI_2),
            0.5,
            &CovariateModel::Linear,
        )
        .unwrap();
        assert!(fit.objective.abs() < 1e-12);
        assert!(fit.a.abs() < 1e-12 && fit.b_y.abs() < 1e-12 && fit.b_x[0].abs() < 1e-12);
    }

    #[test]
    fn first_axis_matches_single_output_fit() {
        let data = random_data(1, 60);
        for tau in [0.2, 0.5, 0.8] {
            let fit =
                fit_directional(&data, Direction::new(0.0), tau, &CovariateModel::Linear).unwrap();
            let rows: Vec<Vec<f64>> = data.x.iter().map(|&x| vec![1.0, x]).collect();
            let single =
                qr::solve(&QrProblem::from_rows(&rows, data.y1.clone(), tau).unwrap()).unwrap();
            // b_y is free here, so the directional optimum can only be lower
            assert!(fit.objective <= single.objective + 1e-9);
            if fit.b_y.abs() < 1e-12 {
                assert!((fit.objective - single.objective).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn small_instance_matches_enumeration() {
        let data = random_data(2, 15);
        let dir = Direction::new(1.0);
        let fit = fit_directional(&data, dir, 0.3, &CovariateModel::Linear).unwrap();
        let (u, g) = (dir.u(), dir.gamma());
        let mut best = f64::INFINITY;
        for i in 0..15 {
            for j in i + 1..15 {
                for k in j + 1..15 {
                    let idx = [i, j, k];
                    let m = nalgebra::Matrix3::from_fn(|r, c| {
                        let y = data.point(idx[r]);
                        [1.0, g[0] * y[0] + g[1] * y[1], data.x[idx[r]]][c]
                    });
                    let rhs = nalgebra::Vector3::from_fn(|r, _| {
                        let y = data.point(idx[r]);
                        u[0] * y[0] + u[1] * y[1]
                    });
                    let Some(beta) = m.lu().solve(&rhs) else {
                        continue;
                    };
                    let obj: f64 = (0..15)
                        .map(|t| {
                            let y = data.point(t);
                            let r = u[0] * y[0] + u[1] * y[1]
                                - beta[0]
                                - beta[1] * (g[0] * y[0] + g[1] * y[1])
                                - beta[2] * data.x[t];
                            check_loss(r, 0.3)
                        })
                        .sum();
                    best = best.min(obj);
                }
            }
        }
        assert!((fit.objective - best).abs() < 1e-9);
    }

    #[test]
    fn grid_angles() {
        let thetas: Vec<f64> = direction_grid(4).iter().map(Direction::theta).collect();
        for (t, e) in thetas.iter().zip([0.0, FRAC_PI_2, PI, 1.5 * PI]) {
            assert!((t - e).abs() < 1e-15);
        }
        assert!(sweep_directions(&random_data(0, 20), 0.3, 2, &CovariateModel::Linear).is_err());
    }

    #[test]
    fn swap_maps_theta_to_complement() {
        let data = random_data(3, 80);
        let swapped = data.swapped();
        let n_dir = 24;
        let a = sweep_directions(&data, 0.25, n_dir, &CovariateModel::Linear).unwrap();
        let b = sweep_directions(&swapped, 0.25, n_dir, &CovariateModel::Linear).unwrap();
        for (k, fa) in a.iter().enumerate() {
            // θ' = π/2 − θ on the grid: k' = n/4 − k mod n
            let k2 = (n_dir / 4 + n_dir - k) % n_dir;
            assert!((fa.objective - b[k2].objective).abs() < 1e-9, "k = {k}");
        }
    }

    #[test]
    fn scaling_responses_scales_offsets() {
        let data = random_data(4, 70);
        let c = 3.5;
        let scaled = Dataset::new(
            data.y1.iter().map(|v| v * c).collect(),
            data.y2.iter().map(|v| v * c).collect(),
            data.x.clone(),
        )
        .unwrap();
        for theta in [0.3, 2.0, 4.4] {
            let d = Direction::new(theta);
            let f = fit_directional(&data, d, 0.35, &CovariateModel::Linear).unwrap();
            let g = fit_directional(&scaled, d, 0.35, &CovariateModel::Linear).unwrap();
            assert!((g.objective - c * f.objective).abs() < 1e-9 * (1.0 + g.objective));
            if f.basis == g.basis {
                assert!((g.a - c * f.a).abs() < 1e-9);
                assert!((g.b_y - f.b_y).abs() < 1e-9);
                assert!((g.b_x[0] - c * f.b_x[0]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn spline_model_has_full_length_coefficients() {
        let data = random_data(5, 200);
        let basis =
            crate::splines::make_basis(4, 3, &data.x, crate::KnotPlacement::Quantile).unwrap();
        let model = CovariateModel::Spline(basis);
        let fits = sweep_directions(&data, 0.3, 8, &model).unwrap();
        for f in &fits {
            assert_eq!(f.b_x.len(), 7);
            assert!(f.passes_optimality());
            assert_eq!(f.model_tag(), ModelTag::Spline);
        }
        assert!(matches!(
            fits[0].offset_at(5.0),
            Err(Error::OutOfDomain { .. })
        ));
    }

    #[test]
    fn sweep_fits_are_optimal() {
        let data = random_data(6, 300);
        for f in sweep_directions(&data, 0.1, 36, &CovariateModel::Linear).unwrap() {
            assert!(f.passes_optimality());
        }
    }
}
