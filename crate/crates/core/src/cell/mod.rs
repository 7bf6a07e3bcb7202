//! The cell problem
//!
//! ```text
//! |p|² χ'' − c̄ χ' + g(χ) = 0  on (0, 1),   χ(1) = χ(0) + 1,   χ'(0) = χ'(1)
//! ```
//!
//! and the effective speed `c̄(|p|)` it selects.
//!
//! `p = 0` is solved through the implicit formula for `χ₀`. For `p ≠ 0`
//! the corrector is rebuilt from a shot `K` of
//! `K'' + c K' − g(−K) = 0` via `χ(z) = K(z̄) − K((1 − z) z̄)`, where the
//! outer bisection on the initial slope makes `z̄ = 1/|p|` and the inner
//! bisection on the drift makes `K'(z̄) = K'(0)`. The residual of the cell
//! equation on the assembled samples is the final check.

mod hamiltonian;
mod shoot;

pub use hamiltonian::{rescaled_speed, tabulate_hamiltonian, EffectiveHamiltonian, SpeedSource};
pub use shoot::{find_c_of_a, shoot, ShootOptions, ShotTrajectory};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potential::PeriodicPotential;
use crate::roots::{find_root, RootOptions};
use shoot::{find_c_with, Range};

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CellOptions {
    /// Tolerance of both root finders (slope defect and relative z̄ defect).
    pub tol: f64,
    /// Allowed pointwise residual of the cell equation.
    pub residual_tol: f64,
    /// Allowed defect of the periodicity conditions.
    pub bvp_tol: f64,
    /// Intervals of the uniform z-grid on [0, 1]; must be even.
    pub grid: usize,
    pub n_ode: usize,
    pub stiffness: f64,
}

impl Default for CellOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            residual_tol: 1e-6,
            bvp_tol: 1e-8,
            grid: 2048,
            n_ode: 4096,
            stiffness: 0.5,
        }
    }
}

impl CellOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            tol,
            ..Self::default()
        }
    }

    fn shoot_options(&self) -> ShootOptions {
        ShootOptions {
            n_ode: self.n_ode,
            stiffness: self.stiffness,
            fixed_step: None,
        }
    }

    fn check(&self) -> Result<()> {
        if self.grid < 8 || self.grid % 2 == 1 {
            return Err(Error::InvalidConfig(format!(
                "cell grid must be even and >= 8, got {}",
                self.grid
            )));
        }
        if !(self.tol > 0.0 && self.residual_tol > 0.0 && self.bvp_tol > 0.0) {
            return Err(Error::InvalidConfig("cell tolerances must be positive".into()));
        }
        Ok(())
    }
}

/// A sampled solution of the cell problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Corrector {
    pub p_mag: f64,
    pub speed: f64,
    pub z: Vec<f64>,
    pub chi: Vec<f64>,
    pub chi_prime: Vec<f64>,
    /// Shooting parameters `(a, c)` when `p ≠ 0`.
    pub shooting: Option<(f64, f64)>,
}

impl Corrector {
    fn dz(&self) -> f64 {
        1.0 / (self.z.len() - 1) as f64
    }

    /// Evaluates the corrector on ℝ through `χ(z + k) = χ(z) + k`.
    pub fn eval(&self, z: f64) -> f64 {
        let k = z.floor();
        let r = z - k;
        let n = self.z.len() - 1;
        let x = r * n as f64;
        let i = (x.floor() as usize).min(n - 1);
        let t = x - i as f64;
        // Cubic Hermite on the cell with the stored derivative.
        let h = self.dz();
        let (y0, y1) = (self.chi[i], self.chi[i + 1]);
        let (d0, d1) = (self.chi_prime[i] * h, self.chi_prime[i + 1] * h);
        let t2 = t * t;
        let t3 = t2 * t;
        let v = (2.0 * t3 - 3.0 * t2 + 1.0) * y0
            + (t3 - 2.0 * t2 + t) * d0
            + (-2.0 * t3 + 3.0 * t2) * y1
            + (t3 - t2) * d1;
        v + k
    }

    /// `χ''` from the cell equation itself (p ≠ 0) or by differencing χ' (p = 0).
    pub fn chi_second(&self, g: &PeriodicPotential) -> Vec<f64> {
        if self.p_mag > 0.0 {
            let p2 = self.p_mag * self.p_mag;
            self.chi
                .iter()
                .zip(&self.chi_prime)
                .map(|(x, d)| (self.speed * d - g.eval(*x)) / p2)
                .collect()
        } else {
            // Forward difference quotients: bounded by the Lipschitz constant
            // of χ₀' even when g has kinks.
            let h = self.dz();
            let mut q: Vec<f64> = self.chi_prime.windows(2).map(|w| (w[1] - w[0]) / h).collect();
            q.push(q[0]);
            q
        }
    }
}

/// Fourth-order differences at the interior nodes 1..n-1, central where the
/// stencil fits and one-sided next to the ends.
fn interior_derivative(f: &[f64], dz: f64) -> Vec<f64> {
    let n = f.len() - 1;
    (1..n)
        .map(|i| {
            if i >= 2 && i + 2 <= n {
                (f[i - 2] - 8.0 * f[i - 1] + 8.0 * f[i + 1] - f[i + 2]) / (12.0 * dz)
            } else if i == 1 {
                (-3.0 * f[0] - 10.0 * f[1] + 18.0 * f[2] - 6.0 * f[3] + f[4]) / (12.0 * dz)
            } else {
                (3.0 * f[n] + 10.0 * f[n - 1] - 18.0 * f[n - 2] + 6.0 * f[n - 3] - f[n - 4])
                    / (12.0 * dz)
            }
        })
        .collect()
}

/// Pointwise residual of the cell equation evaluated with finite differences
/// of the samples.
///
/// Stencils that straddle a kink of `g ∘ χ` are measured against
/// `residual_tol + kink_allowance` instead of `residual_tol`, because the
/// difference quotient there is only first-order accurate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    /// Maximum over stencils not touching a kink of g.
    pub max_smooth: f64,
    /// Maximum over stencils touching a kink of g (0 if none).
    pub max_kink: f64,
    pub kink_points: usize,
    pub kink_allowance: f64,
    /// Location of the worst violation relative to its tolerance.
    pub worst_z: f64,
}

impl ResidualReport {
    pub fn max(&self) -> f64 {
        self.max_smooth.max(self.max_kink)
    }

    fn excess(&self, tol: f64) -> Option<(f64, f64)> {
        if self.max_smooth > tol {
            Some((self.max_smooth, tol))
        } else if self.max_kink > tol + self.kink_allowance {
            Some((self.max_kink, tol + self.kink_allowance))
        } else {
            None
        }
    }
}

pub fn cell_residual(cor: &Corrector, g: &PeriodicPotential) -> ResidualReport {
    let n = cor.z.len() - 1;
    let dz = cor.dz();
    let p2 = cor.p_mag * cor.p_mag;
    let kinks = g.kinks();
    let max_slope = cor.chi_prime.iter().copied().fold(0.0, f64::max);
    let kink_allowance = 2.0 * dz * g.lipschitz_bound() * max_slope.max(1.0);

    // A node counts as a kink point when a kink of g lies within `reach`
    // grid cells of it (in χ). For small |p| the corrector has a boundary
    // layer of width |p|²/c̄ after each kink; when that layer is not resolved
    // by the grid, the reach grows until the layer's contribution to the
    // difference quotients has decayed below 1e-7.
    let reach = if kinks.is_empty() || cor.p_mag == 0.0 {
        4
    } else {
        let ldz = cor.speed / p2 * dz;
        let amp = 2.0 * g.lipschitz_bound() * max_slope.max(1.0);
        let excess = amp * (ldz.powi(4) / 30.0).min(1.0) / 1e-7;
        if excess > 1.0 {
            ((excess.ln() / ldz).ceil() as usize).clamp(4, n / 4)
        } else {
            4
        }
    };
    let touches_kink = |i: usize| -> bool {
        if kinks.is_empty() {
            return false;
        }
        let lo = cor.chi[i.saturating_sub(reach)];
        let hi = cor.chi[(i + reach).min(n)];
        kinks
            .iter()
            .any(|k| (-1..=1).any(|shift| (k + shift as f64) >= lo && (k + shift as f64) <= hi))
    };

    let residual: Vec<f64> = if cor.p_mag > 0.0 {
        let second = interior_derivative(&cor.chi_prime, dz);
        (1..n)
            .map(|i| (p2 * second[i - 1] - cor.speed * cor.chi_prime[i] + g.eval(cor.chi[i])).abs())
            .collect()
    } else {
        let first = interior_derivative(&cor.chi, dz);
        (1..n)
            .map(|i| (cor.speed * first[i - 1] - g.eval(cor.chi[i])).abs())
            .collect()
    };

    let mut report = ResidualReport {
        max_smooth: 0.0,
        max_kink: 0.0,
        kink_points: 0,
        kink_allowance,
        worst_z: 0.0,
    };
    let mut worst_ratio = 0.0;
    for (j, r) in residual.iter().enumerate() {
        let i = j + 1;
        let (slot, weight) = if touches_kink(i) {
            report.kink_points += 1;
            (&mut report.max_kink, 1.0 + kink_allowance)
        } else {
            (&mut report.max_smooth, 1.0)
        };
        *slot = slot.max(*r);
        if r / weight > worst_ratio {
            worst_ratio = r / weight;
            report.worst_z = cor.z[i];
        }
    }
    report
}

fn grid(n: usize) -> Vec<f64> {
    (0..=n).map(|i| i as f64 / n as f64).collect()
}

/// The `p = 0` corrector, from `∫₀^{χ₀(z)} ds/g = z ∫₀¹ ds/g`.
pub fn solve_chi0(g: &PeriodicPotential, opts: &CellOptions) -> Result<Corrector> {
    opts.check()?;
    let n = opts.grid;
    // Cumulative primitive of 1/g on a table 8x finer than the output grid.
    let fine = 8 * n;
    let h = 1.0 / fine as f64;
    let mut prim = Vec::with_capacity(fine + 1);
    prim.push(0.0);
    let mut acc = 0.0;
    for j in 0..fine {
        acc += g.integrate(|s| 1.0 / g.eval(s), j as f64 * h, (j + 1) as f64 * h, 8);
        prim.push(acc);
    }
    let total = acc;
    let speed = 1.0 / total;

    let z = grid(n);
    let mut chi = Vec::with_capacity(n + 1);
    for &zi in &z {
        if zi == 0.0 {
            chi.push(0.0);
            continue;
        }
        if zi == 1.0 {
            chi.push(1.0);
            continue;
        }
        let target = zi * total;
        let j = prim.partition_point(|&v| v <= target).clamp(1, fine) - 1;
        let (ylo, yhi) = (j as f64 * h, (j + 1) as f64 * h);
        let base = prim[j];
        let root = find_root(
            "solve_chi0",
            |y| Ok(base + g.integrate(|s| 1.0 / g.eval(s), ylo, y, 8) - target),
            ylo,
            yhi,
            RootOptions {
                ftol: 1e-15,
                ..RootOptions::default()
            },
        )
        .map_err(|_| Error::RootBracketFailure { z: zi })?;
        chi.push(root.x);
    }
    let chi_prime = chi.iter().map(|&x| g.eval(x) / speed).collect();
    let cor = Corrector {
        p_mag: 0.0,
        speed,
        z,
        chi,
        chi_prime,
        shooting: None,
    };
    check_residual(&cor, g, opts)?;
    Ok(cor)
}

/// The corrector at slope magnitude `p_mag > 0`.
pub fn solve_cell(g: &PeriodicPotential, p_mag: f64, opts: &CellOptions) -> Result<Corrector> {
    opts.check()?;
    if !(p_mag > 0.0 && p_mag.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "solve_cell needs a positive slope magnitude, got {p_mag}"
        )));
    }
    let (min, max) = g.extremes();
    let range = Range { min, max };
    let reflected = |s: f64| g.eval(-s);
    let n = opts.grid;
    // One step length for every shot, dividing 1/|p| into n·sub pieces, so
    // the final trajectory lands on the output grid with exactly the
    // discretization the root solves saw. The stiffness limit uses the
    // largest drift in the bracket, max g² / (|p| min g).
    let mut n_ode = opts.n_ode as f64;
    if !g.is_smooth() {
        // RK4 drops to second order across kinks of g.
        n_ode *= 4.0;
    }
    let z_target = 1.0 / p_mag;
    let c_max = max * max / (p_mag * min);
    let h_req = (z_target / n_ode).min(opts.stiffness / c_max);
    let sub = ((z_target / n as f64) / h_req).ceil().max(1.0) as usize;
    let ds = z_target / (n * sub) as f64;
    let sopts = ShootOptions {
        fixed_step: Some(ds),
        ..opts.shoot_options()
    };

    // z̄(a) · |p| − 1 is >= 0 at a_lo and <= 0 at a_hi.
    let a_lo = p_mag * min / max;
    let a_hi = p_mag * max / min;
    let (a, c) = if a_hi - a_lo <= 1e-15 * a_hi {
        (p_mag, min / p_mag)
    } else {
        let outer = |a: f64| -> Result<f64> {
            let (_, shot) = find_c_with(&reflected, range, a, opts.tol, &sopts)?;
            Ok(shot.z_hit * p_mag - 1.0)
        };
        let root = find_root(
            "solve_cell",
            outer,
            a_lo,
            a_hi,
            RootOptions {
                ftol: opts.tol,
                ..RootOptions::default()
            },
        )?;
        let (c, _) = find_c_with(&reflected, range, root.x, opts.tol, &sopts)?;
        (root.x, c)
    };

    // Integrate K on the uniform s-grid s_j = j / (n |p|).
    let mut k_vals = Vec::with_capacity(n + 1);
    let mut k_slopes = Vec::with_capacity(n + 1);
    let (mut kv, mut ks) = (0.0, a);
    k_vals.push(kv);
    k_slopes.push(ks);
    for _ in 0..n {
        for _ in 0..sub {
            let (h1, v1) = shoot::rk4(&reflected, c, kv, ks, ds);
            kv = h1;
            ks = v1;
        }
        k_vals.push(kv);
        k_slopes.push(ks);
    }

    let z = grid(n);
    // χ(z) = K(1/|p|) − K((1 − z)/|p|), which pins χ(0) = 0 exactly.
    let chi: Vec<f64> = (0..=n).map(|i| k_vals[n] - k_vals[n - i]).collect();
    let chi_prime: Vec<f64> = (0..=n).map(|i| k_slopes[n - i] * z_target).collect();
    let speed = c * p_mag;
    let cor = Corrector {
        p_mag,
        speed,
        z,
        chi,
        chi_prime,
        shooting: Some((a, c)),
    };
    check_bvp(&cor, opts)?;
    check_residual(&cor, g, opts)?;
    Ok(cor)
}

/// Dispatches `p = 0` to the implicit formula and everything else to shooting.
pub fn solve(g: &PeriodicPotential, p_mag: f64, opts: &CellOptions) -> Result<Corrector> {
    if p_mag == 0.0 {
        solve_chi0(g, opts)
    } else {
        solve_cell(g, p_mag, opts)
    }
}

fn check_bvp(cor: &Corrector, opts: &CellOptions) -> Result<()> {
    let n = cor.z.len() - 1;
    let jump = (cor.chi[n] - cor.chi[0] - 1.0).abs();
    let slope = (cor.chi_prime[n] - cor.chi_prime[0]).abs() / cor.chi_prime[0].abs().max(1.0);
    let worst = jump.max(slope);
    if worst > opts.bvp_tol {
        return Err(Error::ResidualTooLarge {
            residual: worst,
            tol: opts.bvp_tol,
            z: if jump >= slope { 1.0 } else { 0.0 },
        });
    }
    Ok(())
}

fn check_residual(cor: &Corrector, g: &PeriodicPotential, opts: &CellOptions) -> Result<()> {
    let rep = cell_residual(cor, g);
    if let Some((residual, tol)) = rep.excess(opts.residual_tol) {
        return Err(Error::ResidualTooLarge {
            residual,
            tol,
            z: rep.worst_z,
        });
    }
    Ok(())
}

/// Cross-checks of a corrector against the integral identities and a-priori bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub p_mag: f64,
    pub speed: f64,
    /// `|c̄ − ∫₀¹ g(χ) dz|`
    pub cp_integral_err: f64,
    /// `|c̄ ∫₀¹ (χ')² dz − ∫₀¹ g|`
    pub cp_energy_err: f64,
    pub residual: ResidualReport,
    /// `|χ(1) − χ(0) − 1|`
    pub bvp_jump: f64,
    /// `|χ'(1) − χ'(0)|`
    pub bvp_slope: f64,
    pub chi_prime_min: f64,
    pub chi_prime_max: f64,
    /// Distance of χ' to the violation of `[min g/∫g, max g/min g]` (negative = violated).
    pub slope_bound_margin: f64,
    pub chi_second_max: f64,
    /// Bound on `‖χ''‖∞`: `(max g − min g)/|p|²`, or `‖g‖‖g'‖/c̄(0)²` at p = 0.
    pub curvature_bound: f64,
    pub curvature_bound_margin: f64,
    /// `∫₀¹ g − c̄`, strictly positive for nonconstant g.
    pub speed_gap: f64,
}

fn simpson_samples(f: &[f64], dz: f64) -> f64 {
    let n = f.len() - 1;
    debug_assert!(n.is_multiple_of(2));
    let mut acc = f[0] + f[n];
    for (i, v) in f.iter().enumerate().take(n).skip(1) {
        acc += if i % 2 == 1 { 4.0 } else { 2.0 } * v;
    }
    acc * dz / 3.0
}

pub fn verify_corrector(cor: &Corrector, g: &PeriodicPotential) -> Result<VerificationReport> {
    let stats = g.stats(4)?;
    let n = cor.z.len() - 1;
    let dz = cor.dz();
    let g_chi: Vec<f64> = cor.chi.iter().map(|&x| g.eval(x)).collect();
    let energy: Vec<f64> = cor.chi_prime.iter().map(|d| d * d).collect();
    let int_g_chi = simpson_samples(&g_chi, dz);
    let int_energy = simpson_samples(&energy, dz);

    let chi_prime_min = cor.chi_prime.iter().copied().fold(f64::INFINITY, f64::min);
    let chi_prime_max = cor.chi_prime.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = stats.g_min / stats.arith_mean;
    let hi = stats.g_max / stats.g_min;
    let slope_bound_margin = (chi_prime_min - lo).min(hi - chi_prime_max);

    let second = cor.chi_second(g);
    let chi_second_max = second.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let curvature_bound = if cor.p_mag > 0.0 {
        (stats.g_max - stats.g_min) / (cor.p_mag * cor.p_mag)
    } else {
        stats.g_max * stats.lipschitz_bound / (cor.speed * cor.speed)
    };

    Ok(VerificationReport {
        p_mag: cor.p_mag,
        speed: cor.speed,
        cp_integral_err: (cor.speed - int_g_chi).abs(),
        cp_energy_err: (cor.speed * int_energy - stats.arith_mean).abs(),
        residual: cell_residual(cor, g),
        bvp_jump: (cor.chi[n] - cor.chi[0] - 1.0).abs(),
        bvp_slope: (cor.chi_prime[n] - cor.chi_prime[0]).abs(),
        chi_prime_min,
        chi_prime_max,
        slope_bound_margin,
        chi_second_max,
        curvature_bound,
        curvature_bound_margin: curvature_bound - chi_second_max,
        speed_gap: stats.arith_mean - cor.speed,
    })
}
