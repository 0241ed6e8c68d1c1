use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Bivariate responses with a single covariate, stored column-wise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub y1: Vec<f64>,
    pub y2: Vec<f64>,
    pub x: Vec<f64>,
    /// Column names for `y1`, `y2` and `x`.
    pub names: [String; 3],
}

impl Dataset {
    pub fn new(y1: Vec<f64>, y2: Vec<f64>, x: Vec<f64>) -> Result<Self> {
        Self::with_names(y1, y2, x, ["y1".into(), "y2".into(), "x".into()])
    }

    pub fn with_names(y1: Vec<f64>, y2: Vec<f64>, x: Vec<f64>, names: [String; 3]) -> Result<Self> {
        if y1.len() != y2.len() || y1.len() != x.len() {
            return Err(Error::InvalidInput("column lengths differ".into()));
        }
        if y1.is_empty() {
            return Err(Error::InvalidInput("dataset has no rows".into()));
        }
        if y1.iter().chain(&y2).chain(&x).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("dataset has non-finite values".into()));
        }
        Ok(Self { y1, y2, x, names })
    }

    pub fn len(&self) -> usize {
        self.y1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y1.is_empty()
    }

    pub fn point(&self, i: usize) -> [f64; 2] {
        [self.y1[i], self.y2[i]]
    }

    pub fn points(&self) -> Vec<[f64; 2]> {
        (0..self.len()).map(|i| self.point(i)).collect()
    }

    /// Exchanges the roles of the two responses.
    pub fn swapped(&self) -> Self {
        let [a, b, x] = self.names.clone();
        Self {
            y1: self.y2.clone(),
            y2: self.y1.clone(),
            x: self.x.clone(),
            names: [b, a, x],
        }
    }

    /// Rows whose index satisfies `keep`, order preserved.
    pub fn select(&self, keep: impl Fn(usize) -> bool) -> Self {
        let idx: Vec<usize> = (0..self.len()).filter(|&i| keep(i)).collect();
        Self {
            y1: idx.iter().map(|&i| self.y1[i]).collect(),
            y2: idx.iter().map(|&i| self.y2[i]).collect(),
            x: idx.iter().map(|&i| self.x[i]).collect(),
            names: self.names.clone(),
        }
    }

    /// Type-7 empirical quantile of the covariate.
    pub fn covariate_quantile(&self, p: f64) -> f64 {
        let mut sorted = self.x.clone();
        sorted.sort_by(f64::total_cmp);
        crate::splines::quantile_sorted(&sorted, p)
    }

    /// Sample standard deviation of the covariate.
    pub fn covariate_sd(&self) -> f64 {
        let n = self.len() as f64;
        if self.len() < 2 {
            return 0.0;
        }
        let mean = self.x.iter().sum::<f64>() / n;
        (self.x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    }
}
