//! The periodic positive forcing `g` and the scalar functionals derived from it.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of points of the dense validation grid.
pub const DENSE_GRID: usize = 8192;
/// Minimum number of Simpson panels used for the means.
pub const MIN_PANELS: usize = 4096;
/// Relative tolerance the quadrature must certify.
pub const QUAD_TOL: f64 = 1e-10;

/// JSON descriptor of a potential.
///
/// ```json
/// {"kind": "cosine", "a": 2.0, "b": 1.0}
/// {"kind": "fourier", "mean": 3.0, "cos": [1.0, 0.5], "sin": [0.0, 0.3]}
/// {"kind": "tent", "low": 1.0, "high": 3.0, "peak": 0.5}
/// {"kind": "table", "samples": [1.0, 2.0, 3.0, 2.0]}
/// ```
///
/// Every kind accepts an optional `"phase"` θ so that the evaluated
/// potential is `g(s + θ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum PotentialDescriptor {
    Cosine {
        a: f64,
        b: f64,
        #[serde(default)]
        phase: f64,
    },
    Fourier {
        mean: f64,
        #[serde(default)]
        cos: Vec<f64>,
        #[serde(default)]
        sin: Vec<f64>,
        #[serde(default)]
        phase: f64,
    },
    Tent {
        low: f64,
        high: f64,
        #[serde(default = "default_peak")]
        peak: f64,
        #[serde(default)]
        phase: f64,
    },
    Table {
        samples: Vec<f64>,
        /// The last sample is the value at s = 1 (it must then match the first).
        #[serde(default)]
        endpoint: bool,
        #[serde(default)]
        phase: f64,
    },
}

fn default_peak() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq)]
enum Shape {
    Fourier { mean: f64, cos: Vec<f64>, sin: Vec<f64> },
    Tent { low: f64, high: f64, peak: f64 },
    Table { samples: Vec<f64> },
}

impl Shape {
    /// Evaluates on the unit cell; `s` is expected in `[0, 1]`.
    fn eval_cell(&self, s: f64) -> f64 {
        match self {
            Shape::Fourier { mean, cos, sin } => {
                let mut v = *mean;
                for (k, c) in cos.iter().enumerate() {
                    v += c * (2.0 * PI * (k + 1) as f64 * s).cos();
                }
                for (k, c) in sin.iter().enumerate() {
                    v += c * (2.0 * PI * (k + 1) as f64 * s).sin();
                }
                v
            }
            Shape::Tent { low, high, peak } => {
                let mut d = (s - peak).abs();
                d = d.min(1.0 - d);
                high - (high - low) * 2.0 * d
            }
            Shape::Table { samples } => {
                let n = samples.len();
                let x = s * n as f64;
                let i = (x.floor() as usize).min(n - 1);
                let w = x - i as f64;
                samples[i] * (1.0 - w) + samples[(i + 1) % n] * w
            }
        }
    }

    fn kinks(&self) -> Vec<f64> {
        match self {
            Shape::Fourier { .. } => Vec::new(),
            Shape::Tent { peak, .. } => {
                let mut k = vec![peak.rem_euclid(1.0), (peak + 0.5).rem_euclid(1.0)];
                k.sort_by(f64::total_cmp);
                k
            }
            Shape::Table { samples } => (0..samples.len())
                .map(|i| i as f64 / samples.len() as f64)
                .collect(),
        }
    }

    fn lipschitz(&self) -> f64 {
        match self {
            Shape::Fourier { cos, sin, .. } => cos
                .iter()
                .chain(sin.iter())
                .enumerate()
                .map(|(i, c)| {
                    let k = if i < cos.len() { i + 1 } else { i - cos.len() + 1 };
                    2.0 * PI * k as f64 * c.abs()
                })
                .sum(),
            Shape::Tent { low, high, .. } => 2.0 * (high - low).abs(),
            Shape::Table { samples } => {
                let n = samples.len();
                (0..n)
                    .map(|i| (samples[(i + 1) % n] - samples[i]).abs() * n as f64)
                    .fold(0.0, f64::max)
            }
        }
    }
}

/// A Lipschitz, 1-periodic, strictly positive potential.
///
/// The evaluator always reduces its argument to the fractional part, so
/// `g(s + 1) == g(s)` holds bit for bit.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicPotential {
    shape: Shape,
    phase: f64,
    lipschitz_bound: f64,
    /// Value at s = 1 supplied by an `endpoint` table, checked against g(0).
    seam_value: Option<f64>,
    descriptor: PotentialDescriptor,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub min: f64,
    pub max: f64,
    pub argmin: f64,
    pub lipschitz_quotient: f64,
    pub lipschitz_bound: f64,
    pub periodicity_residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PotentialStats {
    pub g_min: f64,
    pub g_max: f64,
    pub arith_mean: f64,
    pub harm_mean: f64,
    pub lipschitz_bound: f64,
}

impl PotentialStats {
    /// `∫g − (∫1/g)^{-1}`, the denominator of absorption times.
    pub fn mean_gap(&self) -> f64 {
        self.arith_mean - self.harm_mean
    }
}

impl PeriodicPotential {
    /// `g(s) = a + b cos(2πs)`, requires `a > |b|`.
    pub fn cosine(a: f64, b: f64) -> Result<Self> {
        Self::from_descriptor(&PotentialDescriptor::Cosine { a, b, phase: 0.0 })
    }

    pub fn constant(value: f64) -> Result<Self> {
        Self::cosine(value, 0.0)
    }

    pub fn tent(low: f64, high: f64, peak: f64) -> Result<Self> {
        Self::from_descriptor(&PotentialDescriptor::Tent {
            low,
            high,
            peak,
            phase: 0.0,
        })
    }

    pub fn table(samples: Vec<f64>) -> Result<Self> {
        Self::from_descriptor(&PotentialDescriptor::Table {
            samples,
            endpoint: false,
            phase: 0.0,
        })
    }

    /// Builds and validates a potential from its descriptor.
    pub fn from_descriptor(desc: &PotentialDescriptor) -> Result<Self> {
        let finite = |v: f64, what: &str| {
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::InvalidPotential(format!("{what} is not finite")))
            }
        };
        let (shape, phase, seam_value) = match desc {
            PotentialDescriptor::Cosine { a, b, phase } => {
                finite(*a, "a")?;
                finite(*b, "b")?;
                (
                    Shape::Fourier {
                        mean: *a,
                        cos: vec![*b],
                        sin: vec![],
                    },
                    *phase,
                    None,
                )
            }
            PotentialDescriptor::Fourier {
                mean,
                cos,
                sin,
                phase,
            } => {
                finite(*mean, "mean")?;
                for c in cos.iter().chain(sin) {
                    finite(*c, "coefficient")?;
                }
                (
                    Shape::Fourier {
                        mean: *mean,
                        cos: cos.clone(),
                        sin: sin.clone(),
                    },
                    *phase,
                    None,
                )
            }
            PotentialDescriptor::Tent {
                low,
                high,
                peak,
                phase,
            } => {
                finite(*low, "low")?;
                finite(*high, "high")?;
                finite(*peak, "peak")?;
                (
                    Shape::Tent {
                        low: *low,
                        high: *high,
                        peak: peak.rem_euclid(1.0),
                    },
                    *phase,
                    None,
                )
            }
            PotentialDescriptor::Table {
                samples,
                endpoint,
                phase,
            } => {
                for s in samples {
                    finite(*s, "sample")?;
                }
                let mut samples = samples.clone();
                let seam = if *endpoint { samples.pop() } else { None };
                if samples.len() < 2 {
                    return Err(Error::InvalidPotential(
                        "table needs at least two samples on [0,1)".into(),
                    ));
                }
                (Shape::Table { samples }, *phase, seam)
            }
        };
        finite(phase, "phase")?;
        let lipschitz_bound = shape.lipschitz();
        let g = Self {
            shape,
            phase: phase.rem_euclid(1.0),
            lipschitz_bound,
            seam_value,
            descriptor: desc.clone(),
        };
        g.validate()?;
        Ok(g)
    }

    pub fn descriptor(&self) -> &PotentialDescriptor {
        &self.descriptor
    }

    /// The same potential translated in phase: `s ↦ g(s + theta)`.
    pub fn shifted(&self, theta: f64) -> Self {
        let mut g = self.clone();
        g.phase = (self.phase + theta).rem_euclid(1.0);
        g.descriptor = match &self.descriptor {
            PotentialDescriptor::Cosine { a, b, phase } => PotentialDescriptor::Cosine {
                a: *a,
                b: *b,
                phase: phase + theta,
            },
            PotentialDescriptor::Fourier {
                mean,
                cos,
                sin,
                phase,
            } => PotentialDescriptor::Fourier {
                mean: *mean,
                cos: cos.clone(),
                sin: sin.clone(),
                phase: phase + theta,
            },
            PotentialDescriptor::Tent {
                low,
                high,
                peak,
                phase,
            } => PotentialDescriptor::Tent {
                low: *low,
                high: *high,
                peak: *peak,
                phase: phase + theta,
            },
            PotentialDescriptor::Table {
                samples,
                endpoint,
                phase,
            } => PotentialDescriptor::Table {
                samples: samples.clone(),
                endpoint: *endpoint,
                phase: phase + theta,
            },
        };
        g
    }

    #[inline]
    pub fn eval(&self, s: f64) -> f64 {
        let x = s + self.phase;
        self.shape.eval_cell(x - x.floor())
    }

    pub fn lipschitz_bound(&self) -> f64 {
        self.lipschitz_bound
    }

    /// Phases in `[0, 1)` where `g` may fail to be differentiable.
    pub fn kinks(&self) -> Vec<f64> {
        let mut k: Vec<f64> = self
            .shape
            .kinks()
            .into_iter()
            .map(|x| (x - self.phase).rem_euclid(1.0))
            .collect();
        k.sort_by(f64::total_cmp);
        k.dedup();
        k
    }

    pub fn is_smooth(&self) -> bool {
        self.kinks().is_empty()
    }

    /// Checks positivity, the Lipschitz bound and the seam on a dense grid.
    pub fn validate(&self) -> Result<ValidationReport> {
        let n = DENSE_GRID;
        let h = 1.0 / n as f64;
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        let mut argmin = 0.0;
        let mut quotient: f64 = 0.0;
        let mut prev = self.eval(0.0);
        for i in 0..=n {
            let s = i as f64 * h;
            let v = self.eval(s);
            if v < min {
                min = v;
                argmin = s;
            }
            max = max.max(v);
            if i > 0 {
                quotient = quotient.max((v - prev).abs() / h);
            }
            prev = v;
        }
        if !(min > 0.0) {
            return Err(Error::NonPositivePotential { min, at: argmin });
        }
        let allowed = self.lipschitz_bound.max(1e-12) * h;
        let periodicity_residual = match self.seam_value {
            Some(v1) => (v1 - self.shape.eval_cell(0.0)).abs(),
            None => (self.shape.eval_cell(1.0) - self.shape.eval_cell(0.0)).abs(),
        };
        if periodicity_residual > allowed {
            return Err(Error::PeriodicityViolation {
                jump: periodicity_residual,
                allowed,
            });
        }
        Ok(ValidationReport {
            min,
            max,
            argmin,
            lipschitz_quotient: quotient,
            lipschitz_bound: self.lipschitz_bound,
            periodicity_residual,
        })
    }

    /// Exact extremes where they are known in closed form, dense samples otherwise.
    pub fn extremes(&self) -> (f64, f64) {
        match &self.shape {
            Shape::Fourier { mean, cos, sin } if cos.len() <= 1 && sin.is_empty() => {
                let b = cos.first().copied().unwrap_or(0.0).abs();
                (mean - b, mean + b)
            }
            Shape::Tent { low, high, .. } => (low.min(*high), low.max(*high)),
            Shape::Table { samples } => (
                samples.iter().copied().fold(f64::INFINITY, f64::min),
                samples.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            ),
            _ => {
                // Dense sampling plus golden-section polish around the extremes.
                let n = DENSE_GRID;
                let (mut imin, mut imax) = (0usize, 0usize);
                let vals: Vec<f64> = (0..n).map(|i| self.eval(i as f64 / n as f64)).collect();
                for (i, v) in vals.iter().enumerate() {
                    if *v < vals[imin] {
                        imin = i;
                    }
                    if *v > vals[imax] {
                        imax = i;
                    }
                }
                let h = 1.0 / n as f64;
                let lo = polish(|s| self.eval(s), imin as f64 * h, h);
                let hi = -polish(|s| -self.eval(s), imax as f64 * h, h);
                (lo, hi)
            }
        }
    }

    /// Integrates `f(g(s))`-type integrands over `[a, b] ⊂ [0, 1]` with
    /// composite Simpson, splitting the interval at the kinks of `g`.
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F, a: f64, b: f64, panels: usize) -> f64 {
        if b <= a {
            return 0.0;
        }
        let mut cuts = vec![a];
        cuts.extend(self.kinks().into_iter().filter(|&k| k > a && k < b));
        cuts.push(b);
        let total = b - a;
        cuts.windows(2)
            .map(|w| {
                let len = w[1] - w[0];
                let mut m = ((panels as f64 * len / total).ceil() as usize).max(2);
                if m % 2 == 1 {
                    m += 1;
                }
                simpson(&f, w[0], w[1], m)
            })
            .sum()
    }

    /// Means and extremes of `g`, certified by panel doubling.
    pub fn stats(&self, quad_order: usize) -> Result<PotentialStats> {
        if quad_order < 2 {
            return Err(Error::InvalidConfig("quad_order must be at least 2".into()));
        }
        let mut panels = MIN_PANELS.max(quad_order);
        let mean = |n: usize| {
            (
                self.integrate(|s| self.eval(s), 0.0, 1.0, n),
                self.integrate(|s| 1.0 / self.eval(s), 0.0, 1.0, n),
            )
        };
        let (mut a, mut r) = mean(panels);
        loop {
            let (a2, r2) = mean(2 * panels);
            let est = ((a2 - a) / a2).abs().max(((r2 - r) / r2).abs());
            a = a2;
            r = r2;
            panels *= 2;
            if est <= QUAD_TOL {
                break;
            }
            if panels > 1 << 22 {
                return Err(Error::QuadratureFailure { estimate: est });
            }
        }
        let (g_min, g_max) = self.extremes();
        let harm_mean = 1.0 / r;
        // Both means are exact for constants; pin them so that equality holds bitwise.
        let (arith_mean, harm_mean) = if g_max - g_min <= 1e-15 * g_max {
            (g_max, g_max)
        } else {
            (a, harm_mean)
        };
        Ok(PotentialStats {
            g_min,
            g_max,
            arith_mean,
            harm_mean,
            lipschitz_bound: self.lipschitz_bound,
        })
    }
}

fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, m: usize) -> f64 {
    let h = (b - a) / m as f64;
    let mut acc = f(a) + f(b);
    for i in 1..m {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + i as f64 * h);
    }
    acc * h / 3.0
}

/// Golden-section minimization of `f` on `[x - h, x + h]`.
fn polish<F: Fn(f64) -> f64>(f: F, x: f64, h: f64) -> f64 {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (x - h, x + h);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    for _ in 0..80 {
        if f(c) < f(d) {
            b = d;
        } else {
            a = c;
        }
        c = b - r * (b - a);
        d = a + r * (b - a);
    }
    f(0.5 * (a + b)).min(f(x))
}
