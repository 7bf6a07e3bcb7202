//! Bracketed scalar root finding.
//!
//! Plain bisection until the bracket is narrow, then Illinois-modified
//! regula falsi inside the same bracket. The bracket is never abandoned, so
//! convergence is guaranteed whenever the endpoint signs differ.

use crate::error::{Error, Result};

/// Relative bracket width below which the solver switches from bisection
/// to the secant phase.
pub const SECANT_SWITCH: f64 = 1e-3;

#[derive(Debug, Clone, Copy)]
pub struct RootOptions {
    /// Stop once `|f(x)| <= ftol`.
    pub ftol: f64,
    /// Stop once the bracket is narrower than `xtol_rel * max(|x|, 1e-300)`.
    pub xtol_rel: f64,
    pub max_iter: usize,
}

impl Default for RootOptions {
    fn default() -> Self {
        Self {
            ftol: 1e-12,
            xtol_rel: 4.0 * f64::EPSILON,
            max_iter: 400,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Root {
    pub x: f64,
    pub fx: f64,
    pub evaluations: usize,
}

/// Finds a root of `f` in `[lo, hi]`.
///
/// `f` may fail; its errors are propagated. Endpoints with the same strict
/// sign produce `BracketFailure` tagged with `context`.
pub fn find_root<F>(
    context: &'static str,
    mut f: F,
    lo: f64,
    hi: f64,
    opts: RootOptions,
) -> Result<Root>
where
    F: FnMut(f64) -> Result<f64>,
{
    let (mut a, mut b) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    let mut fa = f(a)?;
    let mut evaluations = 1;
    if fa.abs() <= opts.ftol {
        return Ok(Root { x: a, fx: fa, evaluations });
    }
    let mut fb = f(b)?;
    evaluations += 1;
    if fb.abs() <= opts.ftol {
        return Ok(Root { x: b, fx: fb, evaluations });
    }
    if fa.signum() == fb.signum() {
        return Err(Error::BracketFailure {
            context,
            lo: a,
            hi: b,
            f_lo: fa,
            f_hi: fb,
        });
    }

    // Which endpoint was retained last by the secant phase (Illinois rule).
    let mut side = 0i8;
    for _ in 0..opts.max_iter {
        let width = b - a;
        let scale = a.abs().max(b.abs()).max(1e-300);
        if width <= opts.xtol_rel * scale {
            break;
        }
        let x = if width > SECANT_SWITCH * scale {
            0.5 * (a + b)
        } else {
            let s = (a * fb - b * fa) / (fb - fa);
            if s.is_finite() && s > a && s < b {
                s
            } else {
                0.5 * (a + b)
            }
        };
        let fx = f(x)?;
        evaluations += 1;
        if fx.abs() <= opts.ftol {
            return Ok(Root { x, fx, evaluations });
        }
        if fx.signum() == fa.signum() {
            a = x;
            fa = fx;
            if side == -1 {
                fb *= 0.5;
            }
            side = -1;
        } else {
            b = x;
            fb = fx;
            if side == 1 {
                fa *= 0.5;
            }
            side = 1;
        }
    }
    // Bracket collapsed to machine resolution: report the better endpoint.
    let (x, fx) = if fa.abs() <= fb.abs() { (a, fa) } else { (b, fb) };
    Ok(Root { x, fx, evaluations })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_sqrt_two() {
        let r = find_root("t", |x| Ok(x * x - 2.0), 0.0, 2.0, RootOptions::default()).unwrap();
        assert!((r.x - 2f64.sqrt()).abs() < 1e-12);
        assert!(r.evaluations < 60);
    }

    #[test]
    fn reversed_bracket_is_accepted() {
        let r = find_root("t", |x| Ok(x.cos()), 3.0, 0.0, RootOptions::default()).unwrap();
        assert!((r.x - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
    }

    #[test]
    fn same_sign_is_bracket_failure() {
        let e = find_root("t", |x| Ok(x * x + 1.0), -1.0, 1.0, RootOptions::default()).unwrap_err();
        assert_eq!(e.kind(), "BracketFailure");
    }

    #[test]
    fn step_function_converges_to_jump() {
        let r = find_root(
            "t",
            |x| Ok(if x < 0.3 { -1.0 } else { 1.0 }),
            0.0,
            1.0,
            RootOptions::default(),
        )
        .unwrap();
        assert!((r.x - 0.3).abs() < 1e-14);
    }
}
