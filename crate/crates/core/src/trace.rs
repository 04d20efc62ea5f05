//! Sampled survival amplitudes and their provenance.

use num_complex::Complex64 as C;

use crate::error::{Error, Result};
use crate::model::ModelConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Pipeline {
    Laplace,
    Volterra,
    Oracle,
    Asymptotic,
}

impl Pipeline {
    pub fn label(self) -> &'static str {
        match self {
            Pipeline::Laplace => "laplace",
            Pipeline::Volterra => "volterra",
            Pipeline::Oracle => "oracle",
            Pipeline::Asymptotic => "asymptotic",
        }
    }
}

/// `theta(t)` on an ascending grid.
#[derive(Debug, Clone)]
pub struct SurvivalTrace {
    pub t_grid: Vec<f64>,
    pub theta: Vec<C>,
    pub pipeline: Pipeline,
    pub config: ModelConfig,
}

impl SurvivalTrace {
    pub fn new(t_grid: Vec<f64>, theta: Vec<C>, pipeline: Pipeline, config: ModelConfig) -> Result<Self> {
        if t_grid.len() != theta.len() {
            return Err(Error::domain("t grid and theta lengths differ"));
        }
        if t_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::domain("t grid must be strictly ascending"));
        }
        if theta.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::NonFinite("survival amplitude"));
        }
        Ok(SurvivalTrace { t_grid, theta, pipeline, config })
    }

    pub fn len(&self) -> usize {
        self.t_grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t_grid.is_empty()
    }

    /// `|theta|^2` samples.
    pub fn survival(&self) -> Vec<f64> {
        self.theta.iter().map(|z| z.norm_sqr()).collect()
    }

    /// Largest `|theta| - 1`; positive values break the Cauchy-Schwarz bound.
    pub fn bound_excess(&self) -> f64 {
        self.theta.iter().map(|z| z.norm() - 1.0).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Linear interpolation of `|theta|^2` at `t` inside the grid.
    pub fn survival_at(&self, t: f64) -> Option<f64> {
        let g = &self.t_grid;
        if g.is_empty() || t < g[0] || t > g[g.len() - 1] {
            return None;
        }
        let i = g.partition_point(|&x| x <= t).min(g.len() - 1).max(1);
        let (t0, t1) = (g[i - 1], g[i]);
        let (s0, s1) = (self.theta[i - 1].norm_sqr(), self.theta[i].norm_sqr());
        if t1 == t0 {
            return Some(s0);
        }
        Some(s0 + (s1 - s0) * (t - t0) / (t1 - t0))
    }
}

/// Largest relative deviation of `|theta|^2` between two traces on the same
/// grid, over samples where the reference exceeds `floor`: `(max, t at max)`.
pub fn max_relative_deviation(a: &SurvivalTrace, b: &SurvivalTrace, floor: f64) -> Result<(f64, f64)> {
    if a.t_grid.len() != b.t_grid.len() || a.t_grid.iter().zip(&b.t_grid).any(|(x, y)| (x - y).abs() > 1e-12 * x.abs().max(1.0)) {
        return Err(Error::domain("traces are not on the same grid"));
    }
    let mut worst = (0.0, a.t_grid.first().copied().unwrap_or(0.0));
    for i in 0..a.len() {
        let (x, y) = (a.theta[i].norm_sqr(), b.theta[i].norm_sqr());
        if x.max(y) > floor {
            let d = (x - y).abs() / x.max(y);
            if d > worst.0 {
                worst = (d, a.t_grid[i]);
            }
        }
    }
    Ok(worst)
}

/// As [`max_relative_deviation`], at the sample times of `a` that fall inside
/// `b`'s span, with `b` interpolated linearly.
pub fn max_relative_gap(a: &SurvivalTrace, b: &SurvivalTrace, floor: f64) -> (f64, f64) {
    let mut worst = (0.0, a.t_grid.first().copied().unwrap_or(0.0));
    for (t, th) in a.t_grid.iter().zip(&a.theta) {
        let Some(y) = b.survival_at(*t) else { continue };
        let x = th.norm_sqr();
        if x.max(y) > floor {
            let d = (x - y).abs() / x.max(y);
            if d > worst.0 {
                worst = (d, *t);
            }
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_ragged_or_unsorted() {
        let cfg = ModelConfig::u1(1.0, 0.1, 1.5).unwrap();
        let one = C::new(1.0, 0.0);
        assert!(SurvivalTrace::new(vec![0.0, 1.0], vec![one], Pipeline::Laplace, cfg).is_err());
        assert!(SurvivalTrace::new(vec![1.0, 0.0], vec![one, one], Pipeline::Laplace, cfg).is_err());
        assert!(SurvivalTrace::new(vec![0.0], vec![C::new(f64::NAN, 0.0)], Pipeline::Laplace, cfg).is_err());
    }

    #[test]
    fn interpolates_survival() {
        let cfg = ModelConfig::u1(1.0, 0.1, 1.5).unwrap();
        let tr = SurvivalTrace::new(vec![0.0, 2.0], vec![C::new(1.0, 0.0), C::new(0.0, 0.5)], Pipeline::Oracle, cfg).unwrap();
        assert_eq!(tr.survival_at(1.0), Some(0.625));
        assert_eq!(tr.survival_at(3.0), None);
        assert!(tr.bound_excess() <= 0.0);
    }
}
