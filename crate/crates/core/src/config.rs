use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SettingKind {
    One,
    Two,
    DirLinear,
    DirSpline,
}

impl SettingKind {
    pub fn is_directional(self) -> bool {
        matches!(self, SettingKind::DirLinear | SettingKind::DirSpline)
    }
}

/// Pipeline parameters. Defaults follow the reference protocol: contour
/// levels 0.2/0.5/0.8/0.94/0.98 at the 0.1/0.3/0.5/0.7/0.9 covariate
/// quantiles, a 200-level τ-grid and 360 directions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub tau_levels: Vec<f64>,
    pub covariate_quantiles: Vec<f64>,
    pub n_directions: usize,
    pub grid_size: usize,
    pub spline_order: usize,
    pub n_interior_knots: usize,
    pub n_angles: usize,
    pub n_draws: usize,
    pub seed: u64,
    pub setting: SettingKind,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            tau_levels: vec![0.2, 0.5, 0.8, 0.94, 0.98],
            covariate_quantiles: vec![0.1, 0.3, 0.5, 0.7, 0.9],
            n_directions: 360,
            grid_size: 200,
            spline_order: 4,
            n_interior_knots: 3,
            n_angles: 36,
            n_draws: 50_000,
            seed: 1,
            setting: SettingKind::One,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let bad_prob = |v: &[f64]| v.is_empty() || v.iter().any(|&p| !(p > 0.0 && p < 1.0));
        if bad_prob(&self.tau_levels) {
            return Err(Error::InvalidInput("tau levels must lie in (0, 1)".into()));
        }
        if bad_prob(&self.covariate_quantiles) {
            return Err(Error::InvalidInput(
                "covariate quantiles must lie in (0, 1)".into(),
            ));
        }
        let counts = [
            ("n_directions", self.n_directions),
            ("grid_size", self.grid_size),
            ("spline_order", self.spline_order),
            ("n_angles", self.n_angles),
            ("n_draws", self.n_draws),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return Err(Error::InvalidInput(format!("{name} must be positive")));
        }
        Ok(())
    }

    /// Levels usable for halfspace contours. Levels above one half are
    /// mapped to `1 − τ`; the median level and duplicates are dropped.
    pub fn depth_levels(&self) -> Vec<f64> {
        let mut out: Vec<f64> = self
            .tau_levels
            .iter()
            .map(|&t| if t > 0.5 { 1.0 - t } else { t })
            .filter(|&t| t < 0.5 - 1e-12)
            .map(|t| (t * 1e12).round() / 1e12)
            .collect();
        out.sort_by(f64::total_cmp);
        out.dedup();
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let c = RunConfig::default();
        c.validate().unwrap();
        assert_eq!(c.grid_size, 200);
        assert_eq!(c.n_directions, 360);
        assert_eq!(c.depth_levels(), vec![0.02, 0.06, 0.2]);
    }

    #[test]
    fn rejects_bad_levels() {
        let c = RunConfig {
            tau_levels: vec![1.2],
            ..RunConfig::default()
        };
        assert!(c.validate().is_err());
        let c = RunConfig {
            n_draws: 0,
            ..RunConfig::default()
        };
        assert!(c.validate().is_err());
    }
}
