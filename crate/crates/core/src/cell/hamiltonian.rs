use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{solve, CellOptions};
use crate::error::{Error, Result};
use crate::potential::PeriodicPotential;

/// Tabulated `|p| ↦ c̄(|p|)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectiveHamiltonian {
    pub p_grid: Vec<f64>,
    pub speeds: Vec<f64>,
    pub harm_mean: f64,
    /// Asymptote as `|p| → ∞`; not used for extrapolation.
    pub arith_mean: f64,
}

impl EffectiveHamiltonian {
    /// Piecewise-linear interpolation, clamped to the last node above the grid.
    pub fn eval(&self, p_mag: f64) -> f64 {
        let p = p_mag.abs();
        let n = self.p_grid.len();
        if n == 1 || p <= self.p_grid[0] {
            return self.speeds[0];
        }
        if p >= self.p_grid[n - 1] {
            return self.speeds[n - 1];
        }
        let i = self.p_grid.partition_point(|&q| q <= p) - 1;
        let (p0, p1) = (self.p_grid[i], self.p_grid[i + 1]);
        let t = (p - p0) / (p1 - p0);
        self.speeds[i] + t * (self.speeds[i + 1] - self.speeds[i])
    }

    /// Largest difference quotient of the table.
    pub fn max_slope(&self) -> f64 {
        self.p_grid
            .windows(2)
            .zip(self.speeds.windows(2))
            .map(|(p, c)| (c[1] - c[0]) / (p[1] - p[0]))
            .fold(0.0, f64::max)
    }

    pub fn max_speed(&self) -> f64 {
        self.speeds.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Solves the cell problem at every node of `p_grid` (in parallel).
pub fn tabulate_hamiltonian(
    g: &PeriodicPotential,
    p_grid: &[f64],
    opts: &CellOptions,
) -> Result<EffectiveHamiltonian> {
    if p_grid.first() != Some(&0.0) {
        return Err(Error::InvalidConfig("p_grid must start at 0".into()));
    }
    if p_grid.windows(2).any(|w| !(w[1] > w[0])) || p_grid.iter().any(|p| !p.is_finite()) {
        return Err(Error::InvalidConfig("p_grid must be strictly increasing and finite".into()));
    }
    let stats = g.stats(4)?;
    let speeds = p_grid
        .par_iter()
        .map(|&p| solve(g, p, opts).map(|c| c.speed))
        .collect::<Result<Vec<_>>>()?;
    let slack = 10.0 * opts.tol;
    for i in 1..speeds.len() {
        if speeds[i] < speeds[i - 1] - slack {
            return Err(Error::MonotonicityViolation {
                p_lo: p_grid[i - 1],
                p_hi: p_grid[i],
                c_lo: speeds[i - 1],
                c_hi: speeds[i],
            });
        }
    }
    Ok(EffectiveHamiltonian {
        p_grid: p_grid.to_vec(),
        speeds,
        harm_mean: stats.harm_mean,
        arith_mean: stats.arith_mean,
    })
}

/// Where `c̄` comes from when rescaling.
#[derive(Debug, Clone, Copy)]
pub enum SpeedSource<'a> {
    Solve(&'a PeriodicPotential, &'a CellOptions),
    Table(&'a EffectiveHamiltonian),
}

/// `c̄(|p| ε^{(α−1)/2})`, the speed seen by the ε-problem at slope `|p|`.
pub fn rescaled_speed(src: SpeedSource<'_>, p_mag: f64, alpha: f64, eps: f64) -> Result<f64> {
    if !(eps > 0.0) || !(alpha >= 0.0) {
        return Err(Error::InvalidConfig(format!(
            "rescaled_speed needs eps > 0 and alpha >= 0 (eps={eps}, alpha={alpha})"
        )));
    }
    let q = p_mag.abs() * eps.powf(0.5 * (alpha - 1.0));
    match src {
        SpeedSource::Solve(g, opts) => solve(g, q, opts).map(|c| c.speed),
        SpeedSource::Table(h) => Ok(h.eval(q)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table() -> EffectiveHamiltonian {
        EffectiveHamiltonian {
            p_grid: vec![0.0, 1.0, 3.0],
            speeds: vec![1.0, 1.5, 1.9],
            harm_mean: 1.0,
            arith_mean: 2.0,
        }
    }

    #[test]
    fn interpolation_and_clamp() {
        let h = table();
        assert_eq!(h.eval(0.0), 1.0);
        assert!((h.eval(0.5) - 1.25).abs() < 1e-15);
        assert!((h.eval(2.0) - 1.7).abs() < 1e-15);
        assert_eq!(h.eval(50.0), 1.9);
        assert_eq!(h.eval(-0.5), h.eval(0.5));
        assert!((h.max_slope() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn grid_must_start_at_zero() {
        let g = PeriodicPotential::constant(1.0).unwrap();
        assert!(tabulate_hamiltonian(&g, &[0.5, 1.0], &CellOptions::default()).is_err());
        assert!(tabulate_hamiltonian(&g, &[0.0, 1.0, 1.0], &CellOptions::default()).is_err());
    }

    #[test]
    fn constant_potential_table_is_flat() {
        let g = PeriodicPotential::constant(2.5).unwrap();
        let h = tabulate_hamiltonian(&g, &[0.0, 0.5, 2.0], &CellOptions::default()).unwrap();
        for s in &h.speeds {
            assert!((s - 2.5).abs() < 1e-12);
        }
    }

    #[test]
    fn alpha_one_ignores_eps() {
        let h = table();
        for eps in [1e-3, 0.1, 1.0] {
            assert_eq!(rescaled_speed(SpeedSource::Table(&h), 2.0, 1.0, eps).unwrap(), h.eval(2.0));
        }
        assert!(rescaled_speed(SpeedSource::Table(&h), 2.0, 1.0, 0.0).is_err());
    }
}
