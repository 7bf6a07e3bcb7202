//! Effective (ε → 0) dynamics.
//!
//! | regime | evaluator |
//! |---|---|
//! | α > 1 | [`limit_alpha_gt1`] |
//! | α = 1 | [`solve_hj_alpha1`] |
//! | 0 < α < 1, 1-D piecewise-monotone data | [`Evolution`], [`ldelta_sandwich`] |
//! | 0 < α < 1, cone | [`cone_limit`] |
//! | 0 < α < 1, general data | [`bounds_envelope`], [`special_limits_alpha01`] |
//! | α = 0 | [`alpha0_special`] |

mod class_l;
mod heat;
mod hj;

use serde::{Deserialize, Serialize};

pub use class_l::{
    classify_l, evolve_l, ldelta_profile, ldelta_sandwich, Epoch, Evolution, MaxPoint, PiecewiseMonotoneProfile,
    PlProfile, Sandwich, Site, MAX_EPOCHS,
};
pub use heat::{alpha0_special, auto_padding, KERNEL_TAIL};
pub use hj::{dissipation, solve_hj_alpha1, stable_dt, HjConfig};

use crate::error::{Error, Result};
use crate::initial::InitialData;
use crate::potential::PotentialStats;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    #[serde(rename = "alpha-gt1")]
    AlphaGt1,
    #[serde(rename = "alpha1")]
    Alpha1,
    #[serde(rename = "alpha01-1d")]
    Alpha01OneD,
    #[serde(rename = "alpha01-cone")]
    Alpha01Cone,
    #[serde(rename = "alpha01-bounds")]
    Alpha01Bounds,
    #[serde(rename = "alpha0-special")]
    Alpha0Special,
}

impl Regime {
    pub const ALL: [Regime; 6] = [
        Regime::AlphaGt1,
        Regime::Alpha1,
        Regime::Alpha01OneD,
        Regime::Alpha01Cone,
        Regime::Alpha01Bounds,
        Regime::Alpha0Special,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Regime::AlphaGt1 => "alpha-gt1",
            Regime::Alpha1 => "alpha1",
            Regime::Alpha01OneD => "alpha01-1d",
            Regime::Alpha01Cone => "alpha01-cone",
            Regime::Alpha01Bounds => "alpha01-bounds",
            Regime::Alpha0Special => "alpha0-special",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Regime::ALL
            .into_iter()
            .find(|r| r.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown regime {s:?}")))
    }
}

/// `u₀(x) + t·H`.
pub fn limit_alpha_gt1(u0: &InitialData, stats: &PotentialStats, x: &[f64], t: f64) -> f64 {
    u0.eval(x) + t * stats.harm_mean
}

/// `min(−C|x| + tA, tH)`.
pub fn cone_limit(c: f64, stats: &PotentialStats, x: &[f64], t: f64) -> f64 {
    let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    (-c * r + t * stats.arith_mean).min(t * stats.harm_mean)
}

/// `(u₀ + tH, min(u₀ + tA, sup u₀ + tH))`; the second branch only when
/// `u₀` is bounded above.
pub fn bounds_envelope(u0: &InitialData, stats: &PotentialStats, x: &[f64], t: f64) -> (f64, f64) {
    let v = u0.eval(x);
    let mut upper = v + t * stats.arith_mean;
    if let Some(s) = u0.sup() {
        upper = upper.min(s + t * stats.harm_mean);
    }
    (v + t * stats.harm_mean, upper)
}

/// Data classes with an explicit limit for `0 < α < 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpecialClass {
    /// `∇u₀·η ≥ δ` everywhere, `|η| = 1`, `u₀` unbounded above.
    MonotoneSlope { eta: Vec<f64>, delta: f64 },
    ConvexNonconstant,
    /// `u₀ = φ(|x − center|)` with `φ` nonincreasing; in 1-D any datum
    /// rising up to `center` and falling after it.
    RadialNonincreasing { center: Vec<f64> },
}

impl SpecialClass {
    pub fn name(&self) -> &'static str {
        match self {
            SpecialClass::MonotoneSlope { .. } => "monotone_slope",
            SpecialClass::ConvexNonconstant => "convex_nonconstant",
            SpecialClass::RadialNonincreasing { .. } => "radial_nonincreasing",
        }
    }
}

/// Checks `u0` against `class` on a grid of `n` points per axis over the box
/// `[lo, hi]`.
pub fn check_class(class: &SpecialClass, u0: &InitialData, lo: &[f64], hi: &[f64], n: usize) -> Result<()> {
    let dim = lo.len();
    if dim != hi.len() || !(1..=2).contains(&dim) || n < 3 {
        return Err(Error::InvalidConfig("check box must be 1-D or 2-D with at least 3 points".into()));
    }
    if let Some(d) = u0.dim() {
        if d != dim {
            return Err(Error::InvalidConfig(format!("data are {d}-D but the box is {dim}-D")));
        }
    }
    let h: Vec<f64> = (0..dim).map(|k| (hi[k] - lo[k]) / (n - 1) as f64).collect();
    let mut pts: Vec<Vec<f64>> = Vec::new();
    if dim == 1 {
        pts.extend((0..n).map(|i| vec![lo[0] + i as f64 * h[0]]));
    } else {
        for j in 0..n {
            for i in 0..n {
                pts.push(vec![lo[0] + i as f64 * h[0], lo[1] + j as f64 * h[1]]);
            }
        }
    }
    let step = h.iter().copied().fold(f64::INFINITY, f64::min);
    let mismatch = |reason: String| {
        Err(Error::KindMismatch {
            kind: class.name().into(),
            reason,
        })
    };
    let tol = 1e-9;
    match class {
        SpecialClass::MonotoneSlope { eta, delta } => {
            let norm = eta.iter().map(|e| e * e).sum::<f64>().sqrt();
            if eta.len() != dim || (norm - 1.0).abs() > 1e-9 || !(*delta > 0.0) {
                return Err(Error::InvalidConfig("monotone_slope needs a unit eta and delta > 0".into()));
            }
            if u0.sup().is_some() {
                return mismatch("data are bounded above".into());
            }
            for p in &pts {
                let q: Vec<f64> = p.iter().zip(eta).map(|(a, e)| a + step * e).collect();
                let d = (u0.eval(&q) - u0.eval(p)) / step;
                if d < delta - tol {
                    return mismatch(format!("slope {d} along eta at {p:?} is below {delta}"));
                }
            }
        }
        SpecialClass::ConvexNonconstant => {
            let dirs: &[[f64; 2]] = if dim == 1 {
                &[[1.0, 0.0]]
            } else {
                &[[1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [1.0, -1.0]]
            };
            for p in &pts {
                for d in dirs {
                    let at = |s: f64| {
                        let q: Vec<f64> = p.iter().zip(d).map(|(a, e)| a + s * step * e).collect();
                        u0.eval(&q)
                    };
                    let second = at(1.0) - 2.0 * at(0.0) + at(-1.0);
                    if second < -tol * (1.0 + at(0.0).abs()) {
                        return mismatch(format!("negative second difference {second} at {p:?}"));
                    }
                }
            }
            let first = u0.eval(&pts[0]);
            if pts.iter().all(|p| (u0.eval(p) - first).abs() <= tol) {
                return mismatch("data are constant on the check box".into());
            }
        }
        SpecialClass::RadialNonincreasing { center } => {
            if center.len() != dim {
                return Err(Error::InvalidConfig("center dimension does not match the box".into()));
            }
            let top = u0.eval(center);
            for p in &pts {
                let r = p.iter().zip(center).map(|(a, c)| (a - c) * (a - c)).sum::<f64>().sqrt();
                let v = u0.eval(p);
                if v > top + tol {
                    return mismatch(format!("value {v} at {p:?} exceeds the value at the center"));
                }
                // One step further out along the ray must not go up.
                if r > 0.0 {
                    let q: Vec<f64> = p.iter().zip(center).map(|(a, c)| a + (a - c) / r * step).collect();
                    if u0.eval(&q) > v + tol {
                        return mismatch(format!("data increase outward at {p:?}"));
                    }
                }
                if dim == 2 && r > 0.0 {
                    let axis = [center[0] + r, center[1]];
                    if (u0.eval(&axis) - v).abs() > tol * (1.0 + v.abs()) {
                        return mismatch(format!("data are not radial about {center:?} at {p:?}"));
                    }
                }
            }
        }
    }
    Ok(())
}

/// Limit of a special class at `(x, t)`; `u0` is checked on the box of
/// half-width 2 around `x` first.
pub fn special_limits_alpha01(
    class: &SpecialClass,
    u0: &InitialData,
    stats: &PotentialStats,
    x: &[f64],
    t: f64,
) -> Result<f64> {
    let lo: Vec<f64> = x.iter().map(|v| v - 2.0).collect();
    let hi: Vec<f64> = x.iter().map(|v| v + 2.0).collect();
    check_class(class, u0, &lo, &hi, if x.len() == 1 { 401 } else { 41 })?;
    Ok(special_value(class, u0, stats, x, t))
}

/// The closed form of [`special_limits_alpha01`] without the class check.
pub fn special_value(class: &SpecialClass, u0: &InitialData, stats: &PotentialStats, x: &[f64], t: f64) -> f64 {
    let free = u0.eval(x) + t * stats.arith_mean;
    match class {
        SpecialClass::RadialNonincreasing { center } => free.min(u0.eval(center) + t * stats.harm_mean),
        _ => free,
    }
}
