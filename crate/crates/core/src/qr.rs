//! Exact check-function quantile regression.
//!
//! The LP
//!
//! ```text
//! minimize   τ·1'r⁺ + (1−τ)·1'r⁻
//! subject to Xβ + r⁺ − r⁻ = y,  r± ≥ 0
//! ```
//!
//! is solved by a bounded-variable primal simplex in the style of
//! Barrodale–Roberts. A vertex is described by `p` interpolated observations
//! (the basis); every other observation carries a side (above or below the
//! fitted hyperplane). An edge releases one basis observation to either side,
//! and the line search walks through as many sign-change breakpoints as keep
//! the directional derivative negative before pivoting.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Asymmetric absolute loss `ρ_τ(z) = z·(τ − 1{z<0})`.
#[inline]
pub fn check_loss(z: f64, tau: f64) -> f64 {
    if z < 0.0 {
        z * (tau - 1.0)
    } else {
        z * tau
    }
}

/// Residuals with `|r| ≤ zero_tolerance(y)` are classified as interpolated.
pub fn zero_tolerance(response: &[f64]) -> f64 {
    let max_abs = response.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    1e-8 * (1.0 + max_abs)
}

/// A quantile regression instance with a row-major design.
#[derive(Debug, Clone)]
pub struct QrProblem {
    n: usize,
    p: usize,
    design: Vec<f64>,
    response: Vec<f64>,
    tau: f64,
}

impl QrProblem {
    /// `design` is row-major with `n_cols` columns and `response.len()` rows.
    pub fn new(design: Vec<f64>, n_cols: usize, response: Vec<f64>, tau: f64) -> Result<Self> {
        let n = response.len();
        if n_cols == 0 {
            return Err(Error::InvalidInput(
                "design needs at least one column".into(),
            ));
        }
        if design.len() != n * n_cols {
            return Err(Error::InvalidInput(format!(
                "design has {} entries, expected {} x {}",
                design.len(),
                n,
                n_cols
            )));
        }
        if n < n_cols {
            return Err(Error::InvalidInput(format!(
                "need at least as many rows ({n}) as columns ({n_cols})"
            )));
        }
        if !(tau > 0.0 && tau < 1.0) {
            return Err(Error::InvalidInput(format!("tau = {tau} is not in (0, 1)")));
        }
        if design.iter().chain(&response).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(
                "design or response has non-finite entries".into(),
            ));
        }
        Ok(Self {
            n,
            p: n_cols,
            design,
            response,
            tau,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>], response: Vec<f64>, tau: f64) -> Result<Self> {
        let p = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != p) {
            return Err(Error::InvalidInput("ragged design rows".into()));
        }
        if rows.len() != response.len() {
            return Err(Error::InvalidInput(
                "design and response lengths differ".into(),
            ));
        }
        Self::new(rows.concat(), p, response, tau)
    }

    /// Same design and response at a different quantile level.
    pub fn with_tau(&self, tau: f64) -> Result<Self> {
        if !(tau > 0.0 && tau < 1.0) {
            return Err(Error::InvalidInput(format!("tau = {tau} is not in (0, 1)")));
        }
        Ok(Self {
            tau,
            ..self.clone()
        })
    }

    pub fn n_rows(&self) -> usize {
        self.n
    }

    pub fn n_cols(&self) -> usize {
        self.p
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn response(&self) -> &[f64] {
        &self.response
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.design[i * self.p..(i + 1) * self.p]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QrSolution {
    pub coefficients: Vec<f64>,
    pub objective: f64,
    pub residuals: Vec<f64>,
    pub neg_count: usize,
    pub zero_count: usize,
    pub pos_count: usize,
    /// Indices of the interpolated observations defining the vertex.
    pub basis: Vec<usize>,
    pub iterations: usize,
}

/// Subgradient condition on the intercept direction:
/// `neg_count ≤ n·τ ≤ neg_count + zero_count`.
pub fn verify_optimality(solution: &QrSolution, tau: f64) -> bool {
    let n = (solution.neg_count + solution.zero_count + solution.pos_count) as f64;
    let target = n * tau;
    let slack = 1e-9 * n.max(1.0);
    solution.neg_count as f64 <= target + slack
        && target <= (solution.neg_count + solution.zero_count) as f64 + slack
}

/// Solves from a heuristic starting vertex.
pub fn solve(problem: &QrProblem) -> Result<QrSolution> {
    solve_from(problem, None)
}

/// Solves starting from `hint` when it names a nonsingular basis (typically
/// the basis of a nearby problem), otherwise from a heuristic start.
pub fn solve_from(problem: &QrProblem, hint: Option<&[usize]>) -> Result<QrSolution> {
    let basis = match hint.filter(|h| valid_basis(problem, h)) {
        Some(h) => h.to_vec(),
        None => crash_basis(problem)?,
    };
    Simplex::new(problem, basis).run()
}

fn basis_matrix(problem: &QrProblem, basis: &[usize]) -> DMatrix<f64> {
    let p = problem.p;
    DMatrix::from_fn(p, p, |r, c| problem.row(basis[r])[c])
}

fn valid_basis(problem: &QrProblem, basis: &[usize]) -> bool {
    if basis.len() != problem.p || basis.iter().any(|&i| i >= problem.n) {
        return false;
    }
    let mut sorted = basis.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    sorted.len() == problem.p && basis_matrix(problem, basis).try_inverse().is_some()
}

/// Picks `p` linearly independent rows whose least-squares residuals sit
/// closest to their τ-quantile. Fails with `RankDeficient` when no such rows
/// exist.
fn crash_basis(problem: &QrProblem) -> Result<Vec<usize>> {
    let (n, p) = (problem.n, problem.p);
    let mut order: Vec<usize> = (0..n).collect();

    let x = DMatrix::from_row_slice(n, p, &problem.design);
    let xtx = x.transpose() * &x;
    let xty = x.transpose() * DVector::from_column_slice(&problem.response);
    if let Some(chol) = xtx.cholesky() {
        let beta = chol.solve(&xty);
        let resid: Vec<f64> = (0..n)
            .map(|i| problem.response[i] - dot(problem.row(i), beta.as_slice()))
            .collect();
        let mut sorted = resid.clone();
        let k = ((n as f64 * problem.tau) as usize).min(n - 1);
        let (_, shift, _) = sorted.select_nth_unstable_by(k, f64::total_cmp);
        let shift = *shift;
        order.sort_by(|&a, &b| {
            (resid[a] - shift)
                .abs()
                .total_cmp(&(resid[b] - shift).abs())
                .then(a.cmp(&b))
        });
    }

    // Greedy row selection with modified Gram-Schmidt.
    let mut kept: Vec<usize> = Vec::with_capacity(p);
    let mut ortho: Vec<Vec<f64>> = Vec::with_capacity(p);
    for &i in &order {
        let row = problem.row(i);
        let norm = dot(row, row).sqrt();
        if norm == 0.0 {
            continue;
        }
        let mut w = row.to_vec();
        for q in &ortho {
            let c = dot(q, &w);
            w.iter_mut().zip(q).for_each(|(wi, qi)| *wi -= c * qi);
        }
        let wn = dot(&w, &w).sqrt();
        if wn > 1e-9 * norm {
            w.iter_mut().for_each(|v| *v /= wn);
            ortho.push(w);
            kept.push(i);
            if kept.len() == p {
                return Ok(kept);
            }
        }
    }
    Err(Error::RankDeficient)
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Clone, Copy)]
struct Breakpoint {
    t: f64,
    index: usize,
    weight: f64,
}

impl PartialEq for Breakpoint {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Breakpoint {}

impl PartialOrd for Breakpoint {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Breakpoint {
    fn cmp(&self, other: &Self) -> Ordering {
        self.t
            .total_cmp(&other.t)
            .then(self.index.cmp(&other.index))
    }
}

struct Simplex<'a> {
    problem: &'a QrProblem,
    basis: Vec<usize>,
    /// +1 above the hyperplane, −1 below, 0 for basis observations.
    side: Vec<i8>,
    residuals: Vec<f64>,
    zero_tol: f64,
}

impl<'a> Simplex<'a> {
    fn new(problem: &'a QrProblem, basis: Vec<usize>) -> Self {
        let mut side = vec![1_i8; problem.n];
        for &i in &basis {
            side[i] = 0;
        }
        Self {
            problem,
            basis,
            side,
            residuals: vec![0.0; problem.n],
            zero_tol: zero_tolerance(&problem.response),
        }
    }

    /// Recomputes coefficients and residuals for the current basis and syncs
    /// observation sides; zero residuals keep their assigned side.
    fn refresh(&mut self, inverse: &DMatrix<f64>) -> Vec<f64> {
        let prob = self.problem;
        let y_basis = DVector::from_iterator(prob.p, self.basis.iter().map(|&i| prob.response[i]));
        let beta = inverse * y_basis;
        for i in 0..prob.n {
            if self.side[i] == 0 {
                self.residuals[i] = 0.0;
                continue;
            }
            let r = prob.response[i] - dot(prob.row(i), beta.as_slice());
            self.residuals[i] = r;
            if r > self.zero_tol {
                self.side[i] = 1;
            } else if r < -self.zero_tol {
                self.side[i] = -1;
            }
        }
        beta.as_slice().to_vec()
    }

    fn run(mut self) -> Result<QrSolution> {
        let prob = self.problem;
        let (n, p, tau) = (prob.n, prob.p, prob.tau);
        let cap = 50 * (n + p);
        let mut degenerate = false;
        let mut iterations = 0;

        loop {
            let inverse = basis_matrix(prob, &self.basis)
                .try_inverse()
                .ok_or(Error::RankDeficient)?;
            let beta = self.refresh(&inverse);

            // w = Σ c_i x_i over non-basis rows; g = B⁻ᵀ w.
            let mut w = vec![0.0; p];
            for i in 0..n {
                let c = match self.side[i] {
                    0 => continue,
                    1 => tau,
                    _ => tau - 1.0,
                };
                w.iter_mut()
                    .zip(prob.row(i))
                    .for_each(|(wk, xk)| *wk += c * xk);
            }
            let g = inverse.transpose() * DVector::from_vec(w);
            let eps = 1e-9 * (1.0 + g.amax());

            // Reduced cost of pushing basis row j below (σ=+1) or above (σ=−1).
            let mut entering: Option<(usize, f64, f64)> = None;
            for j in 0..p {
                for (sigma, rc) in [(1.0, (1.0 - tau) - g[j]), (-1.0, tau + g[j])] {
                    if rc >= -eps {
                        continue;
                    }
                    let better = match entering {
                        None => true,
                        Some((bj, _, brc)) => {
                            if degenerate {
                                self.basis[j] < self.basis[bj]
                            } else {
                                rc < brc
                            }
                        }
                    };
                    if better {
                        entering = Some((j, sigma, rc));
                    }
                }
            }

            let Some((j, sigma, rc)) = entering else {
                return Ok(self.finish(beta, iterations));
            };

            iterations += 1;
            if iterations > cap {
                return Err(Error::NumericalFailure { iterations: cap });
            }

            let direction: Vec<f64> = inverse.column(j).iter().copied().collect();
            let d_scale = direction.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            let mut heap = BinaryHeap::new();
            let mut along = vec![0.0; n];
            #[allow(clippy::needless_range_loop)]
            for i in 0..n {
                let s = self.side[i];
                if s == 0 {
                    continue;
                }
                let row = prob.row(i);
                let a = dot(row, &direction);
                along[i] = a;
                let row_scale: f64 = row.iter().map(|v| v.abs()).sum();
                if a.abs() <= 1e-13 * row_scale * d_scale {
                    continue;
                }
                // residual change is −σ·t·a; blocking when it heads towards zero
                if f64::from(s) * sigma * a > 0.0 {
                    let r = self.residuals[i];
                    let t = if r.abs() <= self.zero_tol {
                        0.0
                    } else {
                        r.abs() / a.abs()
                    };
                    heap.push(Reverse(Breakpoint {
                        t,
                        index: i,
                        weight: a.abs(),
                    }));
                }
            }

            let mut slope = rc;
            let mut leaving = None;
            let mut passed = Vec::new();
            while let Some(Reverse(bp)) = heap.pop() {
                slope += bp.weight;
                if slope >= 0.0 {
                    leaving = Some(bp);
                    break;
                }
                passed.push(bp.index);
            }
            let Some(bp) = leaving else {
                // Unbounded descent cannot happen for a full-rank design.
                return Err(Error::NumericalFailure { iterations });
            };

            for i in passed {
                self.side[i] = -self.side[i];
            }
            let old = self.basis[j];
            self.side[old] = if sigma > 0.0 { -1 } else { 1 };
            self.side[bp.index] = 0;
            self.basis[j] = bp.index;
            degenerate = bp.t <= 0.0;
        }
    }

    fn finish(self, coefficients: Vec<f64>, iterations: usize) -> QrSolution {
        let tau = self.problem.tau;
        let (mut neg, mut zero, mut pos) = (0, 0, 0);
        let mut objective = 0.0;
        for &r in &self.residuals {
            objective += check_loss(r, tau);
            if r.abs() <= self.zero_tol {
                zero += 1;
            } else if r < 0.0 {
                neg += 1;
            } else {
                pos += 1;
            }
        }
        QrSolution {
            coefficients,
            objective,
            residuals: self.residuals,
            neg_count: neg,
            zero_count: zero,
            pos_count: pos,
            basis: self.basis,
            iterations,
        }
    }
}
