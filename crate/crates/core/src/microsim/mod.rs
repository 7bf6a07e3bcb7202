//! Direct simulation of `u_t = ε^α Δu + g(u/ε)` by explicit finite differences.
//!
//! Forward Euler with the standard `2·dim + 1`-point Laplacian. Under the
//! step restriction enforced here every update is a nondecreasing function
//! of each input value, so the scheme has a discrete comparison principle.

mod field;

pub use field::{Field, MAX_2D_AXIS};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potential::PeriodicPotential;

/// Values beyond this magnitude are reported as overflow.
pub const OVERFLOW: f64 = 1e12;

/// Below this many nodes a step runs on the calling thread.
const PARALLEL_MIN: usize = 1 << 15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    /// Ghost nodes by linear extrapolation of the last two nodes.
    #[default]
    LinearExtension,
    Periodic,
}

fn default_cfl() -> f64 {
    0.9
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub eps: f64,
    pub alpha: f64,
    pub t_final: f64,
    #[serde(default = "default_cfl")]
    pub cfl_safety: f64,
    #[serde(default)]
    pub boundary: Boundary,
    #[serde(default)]
    pub dt_override: Option<f64>,
    /// Snapshot times; `[t_final]` when empty.
    #[serde(default)]
    pub output_times: Vec<f64>,
}

impl SimConfig {
    pub fn new(eps: f64, alpha: f64, t_final: f64) -> Self {
        Self {
            eps,
            alpha,
            t_final,
            cfl_safety: default_cfl(),
            boundary: Boundary::LinearExtension,
            dt_override: None,
            output_times: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return bad(format!("eps must be positive, got {}", self.eps));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return bad(format!("alpha must be >= 0, got {}", self.alpha));
        }
        if !(self.t_final >= 0.0 && self.t_final.is_finite()) {
            return bad(format!("t_final must be >= 0, got {}", self.t_final));
        }
        if !(self.cfl_safety > 0.0 && self.cfl_safety <= 1.0) {
            return bad(format!("cfl_safety must lie in (0, 1], got {}", self.cfl_safety));
        }
        if self
            .output_times
            .iter()
            .any(|t| !(*t >= 0.0 && *t <= self.t_final))
        {
            return bad("output times must lie in [0, t_final]".into());
        }
        Ok(())
    }

    pub fn diffusion(&self) -> f64 {
        self.eps.powf(self.alpha)
    }

    /// Largest stable step: the update coefficient of the centre node,
    /// `1 − dt (2·dim·ε^α/dx² + Lip(g)/ε)`, must stay nonnegative.
    pub fn stable_dt(&self, dim: usize, dx: f64, g: &PeriodicPotential) -> f64 {
        let rate = 2.0 * dim as f64 * self.diffusion() / (dx * dx) + g.lipschitz_bound() / self.eps;
        1.0 / rate
    }

    /// The step actually used; `CflViolation` for an override above the bound.
    pub fn dt(&self, dim: usize, dx: f64, g: &PeriodicPotential) -> Result<f64> {
        let bound = self.cfl_safety * self.stable_dt(dim, dx, g);
        match self.dt_override {
            Some(dt) if !(dt > 0.0) || dt > bound => Err(Error::CflViolation { dt, bound }),
            Some(dt) => Ok(dt),
            None => Ok(bound),
        }
    }

    fn snapshot_times(&self) -> Vec<f64> {
        let mut t = if self.output_times.is_empty() {
            vec![self.t_final]
        } else {
            self.output_times.clone()
        };
        t.sort_by(f64::total_cmp);
        t.dedup();
        t
    }
}

struct Kernel<'a> {
    g: &'a PeriodicPotential,
    inv_eps: f64,
    /// `dt · ε^α / dx²`
    k: f64,
    dt: f64,
    boundary: Boundary,
}

impl Kernel<'_> {
    #[inline]
    fn update(&self, u: f64, lap: f64) -> f64 {
        u + self.k * lap + self.dt * self.g.eval(u * self.inv_eps)
    }

    /// Sum of the two axis neighbours minus twice the centre, along a line.
    #[inline]
    fn second_difference<F: Fn(usize) -> f64>(&self, line: F, n: usize, i: usize) -> f64 {
        let c = line(i);
        let (l, r) = match self.boundary {
            Boundary::Periodic => (line((i + n - 1) % n), line((i + 1) % n)),
            Boundary::LinearExtension => {
                let l = if i == 0 { 2.0 * c - line(1) } else { line(i - 1) };
                let r = if i + 1 == n { 2.0 * c - line(n - 2) } else { line(i + 1) };
                (l, r)
            }
        };
        l - 2.0 * c + r
    }

    fn apply(&self, u: &Field, out: &mut [f64]) {
        let [nx, ny] = u.shape;
        let vals = &u.values;
        let row = |j: usize, out_row: &mut [f64]| {
            for (i, o) in out_row.iter_mut().enumerate() {
                let mut lap = self.second_difference(|ii| vals[j * nx + ii], nx, i);
                if u.dim == 2 {
                    lap += self.second_difference(|jj| vals[jj * nx + i], ny, j);
                }
                *o = self.update(vals[j * nx + i], lap);
            }
        };
        if u.dim == 1 {
            if nx >= PARALLEL_MIN {
                const CHUNK: usize = 4096;
                out.par_chunks_mut(CHUNK).enumerate().for_each(|(c, chunk)| {
                    for (off, o) in chunk.iter_mut().enumerate() {
                        let i = c * CHUNK + off;
                        let lap = self.second_difference(|ii| vals[ii], nx, i);
                        *o = self.update(vals[i], lap);
                    }
                });
            } else {
                row(0, out);
            }
        } else if nx * ny >= PARALLEL_MIN {
            out.par_chunks_mut(nx).enumerate().for_each(|(j, r)| row(j, r));
        } else {
            out.chunks_mut(nx).enumerate().for_each(|(j, r)| row(j, r));
        }
    }
}

fn check_overflow(values: &[f64]) -> Result<()> {
    if let Some(v) = values.iter().find(|v| !(v.abs() <= OVERFLOW)) {
        return Err(Error::Overflow { value: v.abs() });
    }
    Ok(())
}

/// One forward-Euler step of length `dt` (at most the configured bound).
pub fn step(u: &Field, g: &PeriodicPotential, cfg: &SimConfig, dt: f64) -> Result<Field> {
    cfg.validate()?;
    let bound = cfg.cfl_safety * cfg.stable_dt(u.dim, u.dx, g);
    if !(dt > 0.0) || dt > bound {
        return Err(Error::CflViolation { dt, bound });
    }
    let kernel = Kernel {
        g,
        inv_eps: 1.0 / cfg.eps,
        k: dt * cfg.diffusion() / (u.dx * u.dx),
        dt,
        boundary: cfg.boundary,
    };
    let mut out = vec![0.0; u.len()];
    kernel.apply(u, &mut out);
    check_overflow(&out)?;
    Ok(Field {
        values: out,
        time: u.time + dt,
        ..u.clone()
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub snapshots: Vec<Field>,
    pub dt: f64,
    pub steps: usize,
}

/// Advances `u0` to every output time, shortening the last step before each
/// output so the snapshot lands on it exactly.
pub fn simulate(u0: &Field, g: &PeriodicPotential, cfg: &SimConfig) -> Result<Trajectory> {
    simulate_observed(u0, g, cfg, |_, _| {})
}

/// As [`simulate`], calling `observe(step_index, field)` after every step.
pub fn simulate_observed(
    u0: &Field,
    g: &PeriodicPotential,
    cfg: &SimConfig,
    mut observe: impl FnMut(usize, &Field),
) -> Result<Trajectory> {
    cfg.validate()?;
    let dt = cfg.dt(u0.dim, u0.dx, g)?;
    let mut cur = u0.clone();
    let mut next = vec![0.0; u0.len()];
    let mut snapshots = Vec::new();
    let mut steps = 0usize;
    let times = cfg.snapshot_times();
    for &target in &times {
        while cur.time < target {
            let remaining = target - cur.time;
            // Avoid a sliver step caused by rounding of the accumulated time.
            let h = if remaining <= dt * (1.0 + 1e-12) { remaining } else { dt };
            let kernel = Kernel {
                g,
                inv_eps: 1.0 / cfg.eps,
                k: h * cfg.diffusion() / (u0.dx * u0.dx),
                dt: h,
                boundary: cfg.boundary,
            };
            kernel.apply(&cur, &mut next);
            check_overflow(&next)?;
            std::mem::swap(&mut cur.values, &mut next);
            cur.time = if h == remaining { target } else { cur.time + h };
            steps += 1;
            observe(steps, &cur);
        }
        snapshots.push(cur.clone());
    }
    Ok(Trajectory { snapshots, dt, steps })
}

/// Reference constants for [`lipschitz_report`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LipschitzLimits {
    /// Lipschitz constant of the initial datum.
    pub space: f64,
    /// `‖g‖∞`
    pub g_sup: f64,
    /// Constant multiplying `ε^α` in the time bound.
    pub time_c: f64,
    pub eps: f64,
    pub alpha: f64,
    /// Lower bound `δ` on the slope along x, when the datum is monotone.
    pub monotone_delta: Option<f64>,
    /// Width of the band along the domain edge left out of the space and
    /// monotonicity checks (truncation effects live there).
    pub margin: f64,
}

/// Space and time regularity of a trajectory.
///
/// Lattice shifts only control `u(x + z) − u(x)` up to one vertical period,
/// so the space check is `|u(x + z) − u(x)| ≤ L|z| + ε` over shifts `z` of up
/// to a few ε, and the monotone check is `u(x + z) − u(x) ≥ δ|z| − ε`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LipschitzReport {
    pub times: Vec<f64>,
    /// Largest neighbour difference quotient per snapshot.
    pub space_quotient: Vec<f64>,
    /// Largest `|u(x + z) − u(x)| − L|z|` per snapshot.
    pub shift_excess: Vec<f64>,
    /// Largest `|u(t_{k+1}) − u(t_k)| / (t_{k+1} − t_k)` per consecutive pair.
    pub time_quotient: Vec<f64>,
    /// Smallest `u(x + z) − u(x) − δ|z|` per snapshot (0 without a δ).
    pub monotone_excess: Vec<f64>,
    pub space_ok: bool,
    pub time_ok: bool,
    pub monotone_ok: bool,
}

pub fn space_quotient(f: &Field) -> f64 {
    let [nx, ny] = f.shape;
    let mut q = 0.0f64;
    for j in 0..ny {
        for i in 0..nx {
            let v = f.at(i, j);
            if i + 1 < nx {
                q = q.max((f.at(i + 1, j) - v).abs());
            }
            if j + 1 < ny {
                q = q.max((f.at(i, j + 1) - v).abs());
            }
        }
    }
    q / f.dx
}

/// `(max_k max |Δ_k u| − L k dx, min_k min Δ_k u − δ k dx)` over axis shifts
/// of `k = 1..=kmax` nodes (the second entry along x only).
fn shift_extremes(f: &Field, lim: &LipschitzLimits, kmax: usize) -> (f64, f64) {
    let [nx, ny] = f.shape;
    let (lip, delta) = (lim.space, lim.monotone_delta);
    let band = (lim.margin / f.dx).ceil() as usize;
    let (i0, i1) = (band, nx.saturating_sub(band));
    let (j0, j1) = if f.dim == 2 { (band, ny.saturating_sub(band)) } else { (0, 1) };
    let mut excess = f64::NEG_INFINITY;
    let mut mono = f64::INFINITY;
    for k in 1..=kmax {
        let z = k as f64 * f.dx;
        for j in j0..j1 {
            for i in i0..i1 {
                let v = f.at(i, j);
                if i + k < i1 {
                    let d = f.at(i + k, j) - v;
                    excess = excess.max(d.abs() - lip * z);
                    if let Some(delta) = delta {
                        mono = mono.min(d - delta * z);
                    }
                }
                if j + k < j1 {
                    excess = excess.max((f.at(i, j + k) - v).abs() - lip * z);
                }
            }
        }
    }
    (excess, if delta.is_some() { mono } else { 0.0 })
}

pub fn lipschitz_report(traj: &Trajectory, lim: &LipschitzLimits) -> Result<LipschitzReport> {
    if traj.snapshots.is_empty() {
        return Err(Error::InvalidConfig("empty trajectory".into()));
    }
    if !(lim.margin >= 0.0) {
        return Err(Error::InvalidConfig("margin must be >= 0".into()));
    }
    let dx = traj.snapshots[0].dx;
    let kmax = ((4.0 * lim.eps / dx).ceil() as usize).clamp(1, traj.snapshots[0].shape[0] - 1);
    let times: Vec<f64> = traj.snapshots.iter().map(|f| f.time).collect();
    let space: Vec<f64> = traj.snapshots.iter().map(space_quotient).collect();
    let (shift, mono): (Vec<f64>, Vec<f64>) = traj
        .snapshots
        .iter()
        .map(|f| shift_extremes(f, lim, kmax))
        .unzip();
    let time_q: Vec<f64> = traj
        .snapshots
        .windows(2)
        .map(|w| {
            let dt = w[1].time - w[0].time;
            w[0].values
                .iter()
                .zip(&w[1].values)
                .map(|(a, b)| (b - a).abs())
                .fold(0.0, f64::max)
                / dt
        })
        .collect();
    let time_bound = lim.g_sup + lim.time_c * lim.eps.powf(lim.alpha);
    let tiny = 1e-12 * (1.0 + lim.eps);
    Ok(LipschitzReport {
        space_ok: shift.iter().all(|e| *e <= lim.eps + tiny),
        time_ok: time_q.iter().all(|q| *q <= time_bound * (1.0 + 1e-9)),
        monotone_ok: mono.iter().all(|m| *m >= -lim.eps - tiny),
        times,
        space_quotient: space,
        shift_excess: shift,
        time_quotient: time_q,
        monotone_excess: mono,
    })
}

#[cfg(test)]
mod tests;
