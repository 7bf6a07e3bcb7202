//! Initial data `u₀` as JSON-describable closed forms.
//!
//! Radial families (`cone`, `tent`, `quadratic`, `smoothed_tent`) work in any
//! dimension given by the length of `center`; `affine` takes its dimension
//! from `slope`; `piecewise_linear` is one-dimensional.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialData {
    Constant {
        value: f64,
    },
    /// `offset + slope · x`
    Affine {
        slope: Vec<f64>,
        #[serde(default)]
        offset: f64,
    },
    /// `height − c |x − center|`
    Cone {
        c: f64,
        #[serde(default = "origin1")]
        center: Vec<f64>,
        #[serde(default)]
        height: f64,
    },
    /// `max(base, height − slope |x − center|)`
    Tent {
        height: f64,
        slope: f64,
        #[serde(default = "origin1")]
        center: Vec<f64>,
        #[serde(default)]
        base: f64,
    },
    /// `offset + a |x − center|²`
    Quadratic {
        a: f64,
        #[serde(default = "origin1")]
        center: Vec<f64>,
        #[serde(default)]
        offset: f64,
    },
    /// `height − c (√(|x − center|² + r²) − r)`, a cone with its apex rounded
    /// off at radius `r`; C^{1,1} with curvature at most `c / r`.
    SmoothedTent {
        c: f64,
        r: f64,
        #[serde(default = "origin1")]
        center: Vec<f64>,
        #[serde(default)]
        height: f64,
    },
    /// Linear interpolation of `(x, u)` continued by rays of the given slopes.
    PiecewiseLinear {
        x: Vec<f64>,
        u: Vec<f64>,
        left_slope: f64,
        right_slope: f64,
    },
}

fn origin1() -> Vec<f64> {
    vec![0.0]
}

fn dist(x: &[f64], center: &[f64]) -> f64 {
    x.iter()
        .zip(center)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

impl InitialData {
    pub fn cone(c: f64) -> Self {
        InitialData::Cone {
            c,
            center: vec![0.0],
            height: 0.0,
        }
    }

    pub fn piecewise_linear(x: Vec<f64>, u: Vec<f64>, left_slope: f64, right_slope: f64) -> Result<Self> {
        let d = InitialData::PiecewiseLinear {
            x,
            u,
            left_slope,
            right_slope,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn kind(&self) -> &'static str {
        match self {
            InitialData::Constant { .. } => "constant",
            InitialData::Affine { .. } => "affine",
            InitialData::Cone { .. } => "cone",
            InitialData::Tent { .. } => "tent",
            InitialData::Quadratic { .. } => "quadratic",
            InitialData::SmoothedTent { .. } => "smoothed_tent",
            InitialData::PiecewiseLinear { .. } => "piecewise_linear",
        }
    }

    /// Dimension fixed by the descriptor, if any (`constant` fits all).
    pub fn dim(&self) -> Option<usize> {
        match self {
            InitialData::Constant { .. } => None,
            InitialData::Affine { slope, .. } => Some(slope.len()),
            InitialData::Cone { center, .. }
            | InitialData::Tent { center, .. }
            | InitialData::Quadratic { center, .. }
            | InitialData::SmoothedTent { center, .. } => Some(center.len()),
            InitialData::PiecewiseLinear { .. } => Some(1),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if let Some(d) = self.dim() {
            if d != 1 && d != 2 {
                return bad(format!("{} data must be 1-D or 2-D, got {d}", self.kind()));
            }
        }
        match self {
            InitialData::Cone { c, .. } if !(*c > 0.0) => bad(format!("cone needs c > 0, got {c}")),
            InitialData::Tent { slope, height, base, .. } if !(*slope > 0.0 && height > base) => {
                bad("tent needs slope > 0 and height > base".into())
            }
            InitialData::SmoothedTent { c, r, .. } if !(*c > 0.0 && *r > 0.0) => {
                bad("smoothed_tent needs c > 0 and r > 0".into())
            }
            InitialData::PiecewiseLinear { x, u, .. } => {
                if x.is_empty() || x.len() != u.len() {
                    return bad("piecewise_linear needs equally many x and u values (at least one)".into());
                }
                if x.windows(2).any(|w| !(w[1] > w[0])) {
                    return bad("piecewise_linear breakpoints must be strictly increasing".into());
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            InitialData::Constant { value } => *value,
            InitialData::Affine { slope, offset } => {
                offset + slope.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
            }
            InitialData::Cone { c, center, height } => height - c * dist(x, center),
            InitialData::Tent {
                height,
                slope,
                center,
                base,
            } => (height - slope * dist(x, center)).max(*base),
            InitialData::Quadratic { a, center, offset } => {
                let r = dist(x, center);
                offset + a * r * r
            }
            InitialData::SmoothedTent { c, r, center, height } => {
                let d = dist(x, center);
                height - c * ((d * d + r * r).sqrt() - r)
            }
            InitialData::PiecewiseLinear {
                x: xs,
                u,
                left_slope,
                right_slope,
            } => pl_eval(xs, u, *left_slope, *right_slope, x[0]),
        }
    }

    pub fn eval1(&self, x: f64) -> f64 {
        self.eval(&[x, 0.0])
    }

    /// Global Lipschitz constant (infinite for quadratics).
    pub fn lipschitz(&self) -> f64 {
        match self {
            InitialData::Constant { .. } => 0.0,
            InitialData::Affine { slope, .. } => slope.iter().map(|s| s * s).sum::<f64>().sqrt(),
            InitialData::Cone { c, .. } | InitialData::SmoothedTent { c, .. } => *c,
            InitialData::Tent { slope, .. } => *slope,
            InitialData::Quadratic { a, .. } => {
                if *a == 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            InitialData::PiecewiseLinear {
                x,
                u,
                left_slope,
                right_slope,
            } => {
                let inner = x
                    .windows(2)
                    .zip(u.windows(2))
                    .map(|(x, u)| ((u[1] - u[0]) / (x[1] - x[0])).abs())
                    .fold(0.0, f64::max);
                inner.max(left_slope.abs()).max(right_slope.abs())
            }
        }
    }

    /// Lipschitz constant on the ball of radius `radius` around the origin.
    pub fn local_lipschitz(&self, radius: f64) -> f64 {
        match self {
            InitialData::Quadratic { a, center, .. } => {
                2.0 * a.abs() * (radius + center.iter().map(|c| c * c).sum::<f64>().sqrt())
            }
            _ => self.lipschitz(),
        }
    }

    /// `sup u₀`, or `None` when unbounded above.
    pub fn sup(&self) -> Option<f64> {
        match self {
            InitialData::Constant { value } => Some(*value),
            InitialData::Affine { slope, offset } => slope.iter().all(|s| *s == 0.0).then_some(*offset),
            InitialData::Cone { height, .. } | InitialData::SmoothedTent { height, .. } => Some(*height),
            InitialData::Tent { height, .. } => Some(*height),
            InitialData::Quadratic { a, offset, .. } => (*a <= 0.0).then_some(*offset),
            InitialData::PiecewiseLinear {
                u,
                left_slope,
                right_slope,
                ..
            } => (*left_slope >= 0.0 && *right_slope <= 0.0)
                .then(|| u.iter().copied().fold(f64::NEG_INFINITY, f64::max)),
        }
    }

    /// Bound on `‖∇²u₀‖`, `None` when `u₀` is not C^{1,1}.
    pub fn hessian_bound(&self) -> Option<f64> {
        match self {
            InitialData::Constant { .. } | InitialData::Affine { .. } => Some(0.0),
            InitialData::Quadratic { a, .. } => Some(2.0 * a.abs()),
            InitialData::SmoothedTent { c, r, .. } => Some(c / r),
            _ => None,
        }
    }

    pub fn is_c11(&self) -> bool {
        self.hessian_bound().is_some()
    }

    /// Smallest `|u₀'|` on the unbounded tails of a 1-D profile.
    pub fn tail_min_slope(&self) -> f64 {
        match self {
            InitialData::Constant { .. } => 0.0,
            InitialData::Affine { slope, .. } => slope.iter().map(|s| s.abs()).fold(f64::INFINITY, f64::min),
            InitialData::Cone { c, .. } | InitialData::SmoothedTent { c, .. } => *c,
            InitialData::Tent { .. } => 0.0,
            InitialData::Quadratic { a, .. } => {
                if *a == 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            InitialData::PiecewiseLinear {
                left_slope,
                right_slope,
                ..
            } => left_slope.abs().min(right_slope.abs()),
        }
    }
}

pub(crate) fn pl_eval(xs: &[f64], u: &[f64], left_slope: f64, right_slope: f64, x: f64) -> f64 {
    let n = xs.len();
    if x <= xs[0] {
        return u[0] + left_slope * (x - xs[0]);
    }
    if x >= xs[n - 1] {
        return u[n - 1] + right_slope * (x - xs[n - 1]);
    }
    let i = xs.partition_point(|&v| v <= x) - 1;
    let t = (x - xs[i]) / (xs[i + 1] - xs[i]);
    u[i] + t * (u[i + 1] - u[i])
}
