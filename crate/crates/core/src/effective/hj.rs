//! Lax–Friedrichs scheme for `u_t = c̄(|∇u|)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cell::EffectiveHamiltonian;
use crate::error::{Error, Result};
use crate::microsim::{Boundary, Field, Trajectory};

/// Floor on the dissipation coefficient, so a flat table still gets a finite step.
const THETA_MIN: f64 = 1e-3;

fn default_cfl() -> f64 {
    0.9
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HjConfig {
    pub t_final: f64,
    #[serde(default = "default_cfl")]
    pub cfl_safety: f64,
    #[serde(default)]
    pub boundary: Boundary,
    #[serde(default)]
    pub dt_override: Option<f64>,
    #[serde(default)]
    pub output_times: Vec<f64>,
}

impl HjConfig {
    pub fn new(t_final: f64) -> Self {
        HjConfig {
            t_final,
            cfl_safety: default_cfl(),
            boundary: Boundary::LinearExtension,
            dt_override: None,
            output_times: Vec::new(),
        }
    }
}

/// Dissipation coefficient: the steepest slope of the table.
pub fn dissipation(h: &EffectiveHamiltonian) -> f64 {
    h.max_slope().max(THETA_MIN)
}

/// Monotone step bound `dx / (2·dim·θ)`.
pub fn stable_dt(h: &EffectiveHamiltonian, dim: usize, dx: f64) -> f64 {
    dx / (2.0 * dim as f64 * dissipation(h))
}

fn ghost(v: &[f64], stride: usize, i: isize, n: usize, boundary: Boundary) -> f64 {
    let at = |k: usize| v[k * stride];
    match boundary {
        Boundary::Periodic => at(i.rem_euclid(n as isize) as usize),
        Boundary::LinearExtension => {
            if i < 0 {
                2.0 * at(0) - at(1)
            } else if i as usize >= n {
                2.0 * at(n - 1) - at(n - 2)
            } else {
                at(i as usize)
            }
        }
    }
}

fn lf_step(u: &Field, h: &EffectiveHamiltonian, theta: f64, dt: f64, boundary: Boundary, out: &mut [f64]) {
    let [nx, ny] = u.shape;
    let dx = u.dx;
    let v = &u.values;
    let row = |j: usize, dst: &mut [f64]| {
        let r = &v[j * nx..(j + 1) * nx];
        for i in 0..nx {
            let c = r[i];
            let l = ghost(r, 1, i as isize - 1, nx, boundary);
            let rr = ghost(r, 1, i as isize + 1, nx, boundary);
            let px = (rr - l) / (2.0 * dx);
            let mut lap = rr - 2.0 * c + l;
            let mut p2 = px * px;
            if u.dim == 2 {
                let col = &v[i..];
                let d = ghost(col, nx, j as isize - 1, ny, boundary);
                let up = ghost(col, nx, j as isize + 1, ny, boundary);
                let py = (up - d) / (2.0 * dx);
                p2 += py * py;
                lap += up - 2.0 * c + d;
            }
            dst[i] = c + dt * (h.eval(p2.sqrt()) + theta * lap / (2.0 * dx));
        }
    };
    if v.len() >= 1 << 15 {
        out.par_chunks_mut(nx).enumerate().for_each(|(j, d)| row(j, d));
    } else {
        out.chunks_mut(nx).enumerate().for_each(|(j, d)| row(j, d));
    }
}

/// Advances `u0` to each output time with the monotone scheme
/// `u + dt·(c̄(|p̄|) + θ·Δ_h u·dx/2)`, `p̄` the central gradient.
pub fn solve_hj_alpha1(u0: &Field, h: &EffectiveHamiltonian, cfg: &HjConfig) -> Result<Trajectory> {
    if !(cfg.t_final >= 0.0 && cfg.t_final.is_finite()) {
        return Err(Error::InvalidConfig(format!("t_final must be >= 0, got {}", cfg.t_final)));
    }
    if !(cfg.cfl_safety > 0.0 && cfg.cfl_safety <= 1.0) {
        return Err(Error::InvalidConfig(format!("cfl_safety must lie in (0, 1], got {}", cfg.cfl_safety)));
    }
    if cfg.output_times.iter().any(|t| !(*t >= 0.0 && *t <= cfg.t_final)) {
        return Err(Error::InvalidConfig("output times must lie in [0, t_final]".into()));
    }
    let theta = dissipation(h);
    let bound = cfg.cfl_safety * stable_dt(h, u0.dim, u0.dx);
    let dt = match cfg.dt_override {
        Some(dt) if !(dt > 0.0) || dt > bound => return Err(Error::CflViolation { dt, bound }),
        Some(dt) => dt,
        None => bound,
    };
    let mut times = if cfg.output_times.is_empty() {
        vec![cfg.t_final]
    } else {
        cfg.output_times.clone()
    };
    times.sort_by(f64::total_cmp);
    times.dedup();
    let mut cur = u0.clone();
    let mut next = vec![0.0; cur.len()];
    let mut snapshots = Vec::with_capacity(times.len());
    let mut steps = 0;
    for &target in &times {
        while cur.time < target {
            let remaining = target - cur.time;
            let k = if remaining <= dt * (1.0 + 1e-12) { remaining } else { dt };
            lf_step(&cur, h, theta, k, cfg.boundary, &mut next);
            std::mem::swap(&mut cur.values, &mut next);
            cur.time = if k == remaining { target } else { cur.time + k };
            steps += 1;
        }
        snapshots.push(cur.clone());
    }
    Ok(Trajectory { snapshots, dt, steps })
}
