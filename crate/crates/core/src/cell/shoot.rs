//! Shooting for the periodic cell problem.
//!
//! For `a, c > 0` the initial value problem
//!
//! ```text
//! h'' + c h' - f(h) = 0,   h(0) = 0,   h'(0) = a
//! ```
//!
//! is integrated until `h` first reaches `h_stop`. This orientation is the
//! dissipative one: `h'` relaxes towards `f(h)/c`, so the integration stays
//! well conditioned even when `c · z̄` is in the thousands (small slopes).

use crate::error::{Error, Result};
use crate::potential::PeriodicPotential;
use crate::roots::{find_root, RootOptions};

/// Hard cap on RK4 steps per shot.
pub const STEP_BUDGET: usize = 50_000_000;

#[derive(Debug, Clone, Copy)]
pub struct ShootOptions {
    /// Minimum number of steps across the expected shot length.
    pub n_ode: usize,
    /// Upper bound on `c · dz` (stiffness of the relaxation mode).
    pub stiffness: f64,
    /// Overrides the step selection when set.
    pub fixed_step: Option<f64>,
}

impl Default for ShootOptions {
    fn default() -> Self {
        Self {
            n_ode: 4096,
            stiffness: 0.5,
            fixed_step: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShotTrajectory {
    /// First coordinate where `h = h_stop`.
    pub z_hit: f64,
    /// `h'` at `z_hit`.
    pub slope_hit: f64,
    pub steps: usize,
}

/// Bounds of the forcing used to size steps and brackets.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Range {
    pub min: f64,
    pub max: f64,
}

#[inline]
pub(crate) fn rk4<F: Fn(f64) -> f64>(f: &F, c: f64, h: f64, v: f64, dz: f64) -> (f64, f64) {
    // h' = v, v' = f(h) - c v
    let k1h = v;
    let k1v = f(h) - c * v;
    let k2h = v + 0.5 * dz * k1v;
    let k2v = f(h + 0.5 * dz * k1h) - c * k2h;
    let k3h = v + 0.5 * dz * k2v;
    let k3v = f(h + 0.5 * dz * k2h) - c * k3h;
    let k4h = v + dz * k3v;
    let k4v = f(h + dz * k3h) - c * k4h;
    (
        h + dz / 6.0 * (k1h + 2.0 * k2h + 2.0 * k3h + k4h),
        v + dz / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v),
    )
}

/// Step size used for a shot with parameters `(a, c)`.
pub(crate) fn step_size(range: Range, a: f64, c: f64, h_stop: f64, opts: &ShootOptions) -> f64 {
    if let Some(dz) = opts.fixed_step {
        return dz;
    }
    // h' >= min(a, min f / c) along the whole trajectory.
    let z_upper = h_stop / a.min(range.min / c);
    (z_upper / opts.n_ode as f64).min(opts.stiffness / c)
}

pub(crate) fn shoot_with<F: Fn(f64) -> f64>(
    f: &F,
    range: Range,
    a: f64,
    c: f64,
    h_stop: f64,
    opts: &ShootOptions,
) -> Result<ShotTrajectory> {
    if !(a > 0.0 && c > 0.0 && h_stop > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "shoot needs a > 0, c > 0, h_stop > 0 (a={a}, c={c}, h_stop={h_stop})"
        )));
    }
    let dz = step_size(range, a, c, h_stop, opts);
    let (mut h, mut v, mut z) = (0.0, a, 0.0);
    let mut steps = 0usize;
    loop {
        let (h1, v1) = rk4(f, c, h, v, dz);
        if h1 >= h_stop {
            // Event localization: bisection on the length of the final partial step.
            let (mut lo, mut hi) = (0.0, dz);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if rk4(f, c, h, v, mid).0 < h_stop {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let (_, v_hit) = rk4(f, c, h, v, hi);
            return Ok(ShotTrajectory {
                z_hit: z + hi,
                slope_hit: v_hit,
                steps: steps + 1,
            });
        }
        if v1 <= 0.0 || !v1.is_finite() {
            return Err(Error::NoHit { target: h_stop, z });
        }
        h = h1;
        v = v1;
        z += dz;
        steps += 1;
        if steps >= STEP_BUDGET {
            return Err(Error::StepLimit {
                budget: STEP_BUDGET,
                z,
            });
        }
    }
}

/// Integrates `h'' + c h' - g(h) = 0`, `h(0) = 0`, `h'(0) = a` until `h = h_stop`.
pub fn shoot(
    g: &PeriodicPotential,
    a: f64,
    c: f64,
    h_stop: f64,
    opts: &ShootOptions,
) -> Result<ShotTrajectory> {
    let (min, max) = g.extremes();
    shoot_with(&|s| g.eval(s), Range { min, max }, a, c, h_stop, opts)
}

/// Inner solve: the drift `c(a)` for which the slope returns to `a` at `h = 1`.
pub(crate) fn find_c_with<F: Fn(f64) -> f64>(
    f: &F,
    range: Range,
    a: f64,
    tol: f64,
    opts: &ShootOptions,
) -> Result<(f64, ShotTrajectory)> {
    if !(a > 0.0) {
        return Err(Error::InvalidConfig(format!("slope a must be positive, got {a}")));
    }
    let c_lo = range.min / a;
    let c_hi = range.max / a;
    if c_hi - c_lo <= 1e-15 * c_hi {
        let shot = shoot_with(f, range, a, c_lo, 1.0, opts)?;
        return Ok((c_lo, shot));
    }
    // Slope defect h'(z̄) - a is >= 0 at c_lo and <= 0 at c_hi.
    let defect = |c: f64| shoot_with(f, range, a, c, 1.0, opts).map(|s| s.slope_hit - a);
    let root = find_root(
        "find_c_of_a",
        defect,
        c_lo,
        c_hi,
        RootOptions {
            // c̄ = |p| c and a ≈ |p|, so the defect must shrink like 1/a for large a.
            ftol: tol * a.min(1.0 / a),
            ..RootOptions::default()
        },
    )?;
    let shot = shoot_with(f, range, a, root.x, 1.0, opts)?;
    Ok((root.x, shot))
}

/// `c(a)` for the potential `g` itself, bracketed in `[min g / a, max g / a]`.
pub fn find_c_of_a(g: &PeriodicPotential, a: f64, tol: f64, opts: &ShootOptions) -> Result<f64> {
    let (min, max) = g.extremes();
    find_c_with(&|s| g.eval(s), Range { min, max }, a, tol, opts).map(|(c, _)| c)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_potential_gives_linear_solution() {
        let g = PeriodicPotential::constant(2.0).unwrap();
        let c = 4.0;
        let a = 2.0 / c;
        let shot = shoot(&g, a, c, 1.0, &ShootOptions::default()).unwrap();
        assert!((shot.z_hit - 1.0 / a).abs() < 1e-12);
        assert!((shot.slope_hit - a).abs() < 1e-14);
    }

    #[test]
    fn bracket_ends_have_opposite_defects() {
        let g = PeriodicPotential::cosine(2.0, 1.0).unwrap();
        let opts = ShootOptions::default();
        for &a in &[0.05, 0.5, 2.0, 20.0] {
            let lo = shoot(&g, a, 1.0 / a, 1.0, &opts).unwrap().slope_hit - a;
            let hi = shoot(&g, a, 3.0 / a, 1.0, &opts).unwrap().slope_hit - a;
            assert!(lo >= 0.0 && hi <= 0.0, "a={a}: {lo} {hi}");
        }
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        let g = PeriodicPotential::constant(1.0).unwrap();
        assert!(shoot(&g, -1.0, 1.0, 1.0, &ShootOptions::default()).is_err());
        assert!(shoot(&g, 1.0, 0.0, 1.0, &ShootOptions::default()).is_err());
    }

    #[test]
    fn c_of_a_constant_case() {
        let g = PeriodicPotential::constant(3.0).unwrap();
        let c = find_c_of_a(&g, 1.5, 1e-10, &ShootOptions::default()).unwrap();
        assert!((c - 2.0).abs() < 1e-14);
    }

    /// Independent integrator for the oracles below: plain RK4 written out
    /// with a fixed tiny step and linear event interpolation.
    fn oracle_defect(a: f64, c: f64, steps_per_unit: usize) -> f64 {
        let g = |s: f64| 2.0 + (2.0 * std::f64::consts::PI * s).cos();
        let acc = |h: f64, v: f64| g(h) - c * v;
        let dz = 1.0 / steps_per_unit as f64;
        let (mut h, mut v) = (0.0f64, a);
        loop {
            let (k1h, k1v) = (v, acc(h, v));
            let (k2h, k2v) = (v + 0.5 * dz * k1v, acc(h + 0.5 * dz * k1h, v + 0.5 * dz * k1v));
            let (k3h, k3v) = (v + 0.5 * dz * k2v, acc(h + 0.5 * dz * k2h, v + 0.5 * dz * k2v));
            let (k4h, k4v) = (v + dz * k3v, acc(h + dz * k3h, v + dz * k3v));
            let h1 = h + dz / 6.0 * (k1h + 2.0 * k2h + 2.0 * k3h + k4h);
            let v1 = v + dz / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
            if h1 >= 1.0 {
                let t = (1.0 - h) / (h1 - h);
                return v + t * (v1 - v) - a;
            }
            h = h1;
            v = v1;
        }
    }

    #[test]
    fn c_of_two_matches_dense_scan() {
        let g = PeriodicPotential::cosine(2.0, 1.0).unwrap();
        let c = find_c_of_a(&g, 2.0, 1e-12, &ShootOptions::default()).unwrap();
        assert!((0.5..=1.5).contains(&c));
        // Scan the bracket, then refine the sign change by bisection.
        let n = 200;
        let cs: Vec<f64> = (0..=n).map(|i| 0.5 + i as f64 / n as f64).collect();
        let d: Vec<f64> = cs.iter().map(|&c| oracle_defect(2.0, c, 200_000)).collect();
        let k = d.windows(2).position(|w| w[0] >= 0.0 && w[1] <= 0.0).unwrap();
        let (mut lo, mut hi) = (cs[k], cs[k + 1]);
        for _ in 0..40 {
            let mid = 0.5 * (lo + hi);
            if oracle_defect(2.0, mid, 200_000) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert!((c - 0.5 * (lo + hi)).abs() < 1e-7, "{c} vs {}", 0.5 * (lo + hi));
    }

    #[test]
    fn fixed_point_survives_finer_reintegration() {
        let g = PeriodicPotential::cosine(2.0, 1.0).unwrap();
        let opts = ShootOptions::default();
        let c = find_c_of_a(&g, 1.0, 1e-10, &opts).unwrap();
        let fine = ShootOptions {
            n_ode: 4 * opts.n_ode,
            ..opts
        };
        let shot = shoot(&g, 1.0, c, 1.0, &fine).unwrap();
        assert!((shot.slope_hit - 1.0).abs() < 1e-9);
    }
}
