//! Browser bindings: the effective speed curve, one corrector, and the
//! one-dimensional ε → 0 profile for `0 < α < 1`.
//!
//! The `*_impl` functions hold the logic and are plain Rust so they can be
//! tested natively; the exported wrappers only convert errors.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use wasm_bindgen::prelude::*;

use homog_core::cell::{solve, tabulate_hamiltonian, CellOptions};
use homog_core::effective::{Evolution, PlProfile};
use homog_core::PeriodicPotential;

fn cosine(a: f64, b: f64) -> Result<PeriodicPotential, String> {
    PeriodicPotential::cosine(a, b).map_err(|e| e.to_string())
}

/// Demo-sized solver settings.
fn options() -> CellOptions {
    CellOptions {
        grid: 512,
        n_ode: 1024,
        ..CellOptions::with_tol(1e-9)
    }
}

/// `[p₀, c̄(p₀), p₁, c̄(p₁), …]` on `n` equispaced slopes in `[0, p_max]`,
/// followed by the harmonic and arithmetic means of `a + b cos 2πs`.
pub fn speed_curve_impl(a: f64, b: f64, p_max: f64, n: usize) -> Result<Vec<f64>, String> {
    if !(p_max > 0.0) || !(2..=400).contains(&n) {
        return Err("need p_max > 0 and 2 <= n <= 400".into());
    }
    let g = cosine(a, b)?;
    let grid: Vec<f64> = (0..n).map(|k| p_max * k as f64 / (n - 1) as f64).collect();
    let h = tabulate_hamiltonian(&g, &grid, &options()).map_err(|e| e.to_string())?;
    let mut out: Vec<f64> = grid.iter().zip(&h.speeds).flat_map(|(p, c)| [*p, *c]).collect();
    out.extend([h.harm_mean, h.arith_mean]);
    Ok(out)
}

#[wasm_bindgen]
pub struct CorrectorView {
    speed: f64,
    z: Vec<f64>,
    chi: Vec<f64>,
}

#[wasm_bindgen]
impl CorrectorView {
    #[wasm_bindgen(getter)]
    pub fn speed(&self) -> f64 {
        self.speed
    }

    #[wasm_bindgen(getter)]
    pub fn z(&self) -> Vec<f64> {
        self.z.clone()
    }

    /// `χ(z) − z`, the periodic part.
    #[wasm_bindgen(getter)]
    pub fn chi(&self) -> Vec<f64> {
        self.chi.clone()
    }
}

pub fn corrector_impl(a: f64, b: f64, p: f64, samples: usize) -> Result<CorrectorView, String> {
    let g = cosine(a, b)?;
    let cor = solve(&g, p, &options()).map_err(|e| e.to_string())?;
    let n = samples.clamp(2, 2000);
    let z: Vec<f64> = (0..n).map(|k| k as f64 / (n - 1) as f64).collect();
    let chi = z.iter().map(|&s| cor.eval(s) - s).collect();
    Ok(CorrectorView { speed: cor.speed, z, chi })
}

/// Values at `n` points of `[lo, hi]` of the limit at time `t` from the
/// piecewise-linear datum through `(xs, us)` with the given tail slopes.
#[allow(clippy::too_many_arguments)]
pub fn evolve_profile_impl(
    xs: Vec<f64>,
    us: Vec<f64>,
    left_slope: f64,
    right_slope: f64,
    a: f64,
    b: f64,
    t: f64,
    lo: f64,
    hi: f64,
    n: usize,
) -> Result<Vec<f64>, String> {
    if !(lo < hi) || !(2..=10_000).contains(&n) {
        return Err("need lo < hi and 2 <= n <= 10000".into());
    }
    let stats = cosine(a, b)?.stats(4).map_err(|e| e.to_string())?;
    let profile = PlProfile::new(xs, us, left_slope, right_slope).map_err(|e| e.to_string())?;
    let ev = Evolution::new(&profile, &stats).map_err(|e| e.to_string())?;
    Ok((0..n)
        .map(|k| ev.eval(lo + (hi - lo) * k as f64 / (n - 1) as f64, t))
        .collect())
}

#[wasm_bindgen]
pub fn speed_curve(a: f64, b: f64, p_max: f64, n: usize) -> Result<Vec<f64>, JsError> {
    speed_curve_impl(a, b, p_max, n).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn corrector(a: f64, b: f64, p: f64, samples: usize) -> Result<CorrectorView, JsError> {
    corrector_impl(a, b, p, samples).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn evolve_profile(
    xs: Vec<f64>,
    us: Vec<f64>,
    left_slope: f64,
    right_slope: f64,
    a: f64,
    b: f64,
    t: f64,
    lo: f64,
    hi: f64,
    n: usize,
) -> Result<Vec<f64>, JsError> {
    evolve_profile_impl(xs, us, left_slope, right_slope, a, b, t, lo, hi, n).map_err(|e| JsError::new(&e))
}
