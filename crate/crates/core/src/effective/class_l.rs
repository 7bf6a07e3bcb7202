//! Exact evolution of 1-D piecewise-monotone profiles for `0 < α < 1`.
//!
//! A profile is split into monotone runs. Every local maximum `x̄` (and an
//! infinite end whose tail rises outward) owns the interval `I_x̄` between its
//! neighbouring minima. Until its absorption time `T_x̄` the solution on that
//! interval is `min(u₀ + tA, u₀(x̄) + tH)`. When a maximum expires the profile
//! is rebuilt and the process restarts from the new one.

use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::initial::{pl_eval, InitialData};
use crate::potential::PotentialStats;

pub const MAX_EPOCHS: usize = 1_000_000;

/// Values closer than this (relative) count as equal when rebuilding a
/// profile. Maxima whose absorption times differ by less than about
/// `VALUE_TIE / (A − H)` therefore expire in the same epoch.
const VALUE_TIE: f64 = 1e-11;

fn finite_or_null<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_some(v)
    } else {
        s.serialize_none()
    }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= VALUE_TIE * (1.0 + a.abs().max(b.abs()))
}

/// Linear interpolation of breakpoints, continued by two rays.
#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct PlProfile {
    pub x: Vec<f64>,
    pub u: Vec<f64>,
    pub left_slope: f64,
    pub right_slope: f64,
}

impl PlProfile {
    pub fn new(x: Vec<f64>, u: Vec<f64>, left_slope: f64, right_slope: f64) -> Result<Self> {
        let p = PlProfile {
            x,
            u,
            left_slope,
            right_slope,
        };
        if p.x.is_empty() || p.x.len() != p.u.len() {
            return Err(Error::InvalidConfig("a profile needs equally many x and u values".into()));
        }
        if p.x.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidConfig("profile breakpoints must be strictly increasing".into()));
        }
        if p.x.iter().chain(&p.u).chain([&left_slope, &right_slope]).any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("profile entries must be finite".into()));
        }
        Ok(p)
    }

    /// Dense samples; the end segments continue as the tails.
    pub fn from_samples(x: Vec<f64>, u: Vec<f64>) -> Result<Self> {
        let n = x.len();
        if n < 2 {
            return Err(Error::InvalidConfig("need at least two samples".into()));
        }
        let ls = (u[1] - u[0]) / (x[1] - x[0]);
        let rs = (u[n - 1] - u[n - 2]) / (x[n - 1] - x[n - 2]);
        PlProfile::new(x, u, ls, rs)
    }

    /// Exact piecewise-linear form of a 1-D descriptor.
    pub fn from_initial(u0: &InitialData) -> Result<Self> {
        let one_d = |c: &[f64]| -> Result<f64> {
            match c {
                [c] => Ok(*c),
                _ => Err(Error::InvalidConfig(format!("{} data must be 1-D here", u0.kind()))),
            }
        };
        match u0 {
            InitialData::Constant { value } => PlProfile::new(vec![0.0], vec![*value], 0.0, 0.0),
            InitialData::Affine { slope, offset } => {
                let s = one_d(slope)?;
                PlProfile::new(vec![0.0], vec![*offset], s, s)
            }
            InitialData::Cone { c, center, height } => PlProfile::new(vec![one_d(center)?], vec![*height], *c, -*c),
            InitialData::Tent {
                height,
                slope,
                center,
                base,
            } => {
                let c0 = one_d(center)?;
                let w = (height - base) / slope;
                PlProfile::new(vec![c0 - w, c0, c0 + w], vec![*base, *height, *base], 0.0, 0.0)
            }
            InitialData::PiecewiseLinear {
                x,
                u,
                left_slope,
                right_slope,
            } => PlProfile::new(x.clone(), u.clone(), *left_slope, *right_slope),
            _ => Err(Error::InvalidConfig(format!("{} data is not piecewise linear", u0.kind()))),
        }
    }

    pub fn to_initial(&self) -> InitialData {
        InitialData::PiecewiseLinear {
            x: self.x.clone(),
            u: self.u.clone(),
            left_slope: self.left_slope,
            right_slope: self.right_slope,
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        pl_eval(&self.x, &self.u, self.left_slope, self.right_slope, x)
    }

    pub fn shifted(&self, k: f64) -> Self {
        PlProfile {
            u: self.u.iter().map(|v| v + k).collect(),
            ..self.clone()
        }
    }

    /// Largest absolute slope, tails included.
    pub fn lipschitz(&self) -> f64 {
        self.x
            .windows(2)
            .zip(self.u.windows(2))
            .map(|(x, u)| ((u[1] - u[0]) / (x[1] - x[0])).abs())
            .fold(self.left_slope.abs().max(self.right_slope.abs()), f64::max)
    }

    pub fn sup(&self) -> Option<f64> {
        (self.left_slope >= 0.0 && self.right_slope <= 0.0)
            .then(|| self.u.iter().copied().fold(f64::NEG_INFINITY, f64::max))
    }

    /// Merges equal values, then drops breakpoints between collinear segments.
    fn tidy(mut self) -> Self {
        for i in 1..self.u.len() {
            if close(self.u[i], self.u[i - 1]) {
                self.u[i] = self.u[i - 1];
            }
        }
        let n = self.x.len();
        let same = |l: f64, r: f64| {
            if l == 0.0 || r == 0.0 {
                l == r
            } else {
                (l - r).abs() <= 1e-12 * l.abs().max(r.abs())
            }
        };
        let (mut x, mut u): (Vec<f64>, Vec<f64>) = (Vec::with_capacity(n), Vec::with_capacity(n));
        for i in 0..n {
            let left = match x.last() {
                None => self.left_slope,
                Some(&xl) => (self.u[i] - u[u.len() - 1]) / (self.x[i] - xl),
            };
            let right = if i + 1 == n {
                self.right_slope
            } else {
                (self.u[i + 1] - self.u[i]) / (self.x[i + 1] - self.x[i])
            };
            if !same(left, right) || (i + 1 == n && x.is_empty()) {
                x.push(self.x[i]);
                u.push(self.u[i]);
            }
        }
        self.x = x;
        self.u = u;
        self
    }
}

/// Where a maximum sits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Site {
    /// Breakpoints `lo..=hi` (a plateau when `lo < hi`).
    Finite { lo: usize, hi: usize },
    MinusInfinity,
    PlusInfinity,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MaxPoint {
    pub site: Site,
    /// Position (left end of a plateau), infinite for the tails.
    #[serde(serialize_with = "finite_or_null")]
    pub x: f64,
    #[serde(serialize_with = "finite_or_null")]
    pub value: f64,
    #[serde(serialize_with = "finite_or_null")]
    pub interval_lo: f64,
    #[serde(serialize_with = "finite_or_null")]
    pub interval_hi: f64,
    /// Absorption time, infinite when no finite neighbour limits it.
    #[serde(serialize_with = "finite_or_null")]
    pub time: f64,
    #[serde(skip)]
    left_min: Option<(usize, usize)>,
    #[serde(skip)]
    right_min: Option<(usize, usize)>,
}

/// A profile split into alternating monotone runs with its max set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PiecewiseMonotoneProfile {
    pub profile: PlProfile,
    /// Slopes of the `n + 1` segments, tails first and last.
    pub slopes: Vec<f64>,
    pub maxima: Vec<MaxPoint>,
    /// Breakpoint ranges of the local minima.
    pub minima: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Mode {
    Strict,
    Lenient,
}

/// Splits a profile into class-ℒ structure.
///
/// Flat runs inside a monotone stretch are accepted. A flat extremum, a flat
/// tail, or a profile with an infinite run of equal values is rejected.
pub fn classify_l(profile: &PlProfile, stats: &PotentialStats) -> Result<PiecewiseMonotoneProfile> {
    classify(profile.clone(), stats, Mode::Strict)
}

fn classify(p: PlProfile, stats: &PotentialStats, mode: Mode) -> Result<PiecewiseMonotoneProfile> {
    let n = p.x.len();
    let not_l = |reason: String| Err(Error::NotInClassL { reason });
    if p.left_slope == 0.0 || p.right_slope == 0.0 {
        return not_l("u0 is constant on a half-line, so its sup there is attained on a whole ray".into());
    }
    let mut slopes = Vec::with_capacity(n + 1);
    slopes.push(p.left_slope);
    for i in 1..n {
        slopes.push((p.u[i] - p.u[i - 1]) / (p.x[i] - p.x[i - 1]));
    }
    slopes.push(p.right_slope);
    let sign = |k: usize| -> i8 {
        if k == 0 || k == n {
            return if slopes[k] > 0.0 { 1 } else { -1 };
        }
        let (a, b) = (p.u[k - 1], p.u[k]);
        if a == b || (mode == Mode::Lenient && close(a, b)) {
            0
        } else if b > a {
            1
        } else {
            -1
        }
    };
    // Nonzero runs; a turn between runs k and k+1 covers breakpoints
    // from the end of run k to the start of run k+1.
    let mut turns: Vec<(i8, usize, usize)> = Vec::new(); // (sign before, lo, hi)
    let mut cur = sign(0);
    let mut last_nonzero_end = 0usize; // breakpoint index ending the current run
    for k in 1..=n {
        let s = sign(k);
        if s == 0 {
            continue;
        }
        if s != cur {
            // segment k spans breakpoints k-1..k; the flat gap runs from
            // last_nonzero_end to k-1.
            turns.push((cur, last_nonzero_end, k - 1));
            cur = s;
        }
        last_nonzero_end = k;
    }
    for &(s, lo, hi) in &turns {
        if lo < hi && mode == Mode::Strict {
            let kind = if s > 0 { "maximum" } else { "minimum" };
            return not_l(format!(
                "equal neighbouring values: flat local {kind} on [{}, {}]; route general data through the ldelta sandwich",
                p.x[lo], p.x[hi]
            ));
        }
    }
    let minima: Vec<(usize, usize)> = turns.iter().filter(|t| t.0 < 0).map(|t| (t.1, t.2)).collect();
    let gap = stats.mean_gap();
    let time_of = |drop: f64| {
        if drop.is_infinite() {
            f64::INFINITY
        } else if gap > 0.0 {
            drop / gap
        } else {
            f64::INFINITY
        }
    };
    let mut maxima = Vec::new();
    let first_min = minima.first().copied();
    let last_min = minima.last().copied();
    if p.left_slope < 0.0 {
        maxima.push(MaxPoint {
            site: Site::MinusInfinity,
            x: f64::NEG_INFINITY,
            value: f64::INFINITY,
            interval_lo: f64::NEG_INFINITY,
            interval_hi: first_min.map_or(f64::INFINITY, |m| p.x[m.1]),
            time: f64::INFINITY,
            left_min: None,
            right_min: first_min,
        });
    }
    for &(s, lo, hi) in &turns {
        if s < 0 {
            continue;
        }
        let left_min = minima.iter().rev().find(|m| m.1 <= lo).copied();
        let right_min = minima.iter().find(|m| m.0 >= hi).copied();
        let value = p.u[lo];
        let nb = left_min
            .map_or(f64::NEG_INFINITY, |m| p.u[m.0])
            .max(right_min.map_or(f64::NEG_INFINITY, |m| p.u[m.0]));
        let t = time_of(value - nb);
        if !(t > 0.0) {
            return not_l(format!("maximum at x = {} does not exceed its neighbours", p.x[lo]));
        }
        maxima.push(MaxPoint {
            site: Site::Finite { lo, hi },
            x: p.x[lo],
            value,
            interval_lo: left_min.map_or(f64::NEG_INFINITY, |m| p.x[m.0]),
            interval_hi: right_min.map_or(f64::INFINITY, |m| p.x[m.1]),
            time: t,
            left_min,
            right_min,
        });
    }
    if p.right_slope > 0.0 {
        maxima.push(MaxPoint {
            site: Site::PlusInfinity,
            x: f64::INFINITY,
            value: f64::INFINITY,
            interval_lo: last_min.map_or(f64::NEG_INFINITY, |m| p.x[m.0]),
            interval_hi: f64::INFINITY,
            time: f64::INFINITY,
            left_min: last_min,
            right_min: None,
        });
    }
    Ok(PiecewiseMonotoneProfile {
        profile: p,
        slopes,
        maxima,
        minima,
    })
}

impl PiecewiseMonotoneProfile {
    /// Earliest finite absorption time.
    pub fn next_time(&self) -> Option<f64> {
        self.maxima
            .iter()
            .map(|m| m.time)
            .filter(|t| t.is_finite())
            .min_by(f64::total_cmp)
    }

    pub fn times(&self) -> Vec<f64> {
        self.maxima.iter().map(|m| m.time).collect()
    }

    /// Smallest plateau level `u(x̄) + Δ·H` over the intervals containing `x`.
    fn level(&self, x: f64, dt: f64, harm: f64) -> f64 {
        let k = self.maxima.partition_point(|m| m.interval_lo <= x);
        let mut best = f64::INFINITY;
        for m in &self.maxima[k.saturating_sub(2)..k] {
            if x >= m.interval_lo && x <= m.interval_hi {
                best = best.min(m.value + dt * harm);
            }
        }
        best
    }

    /// The closed-form solution `dt` after the start of this profile's epoch.
    pub fn eval(&self, x: f64, dt: f64, stats: &PotentialStats) -> f64 {
        (self.profile.eval(x) + dt * stats.arith_mean).min(self.level(x, dt, stats.harm_mean))
    }

    /// The profile `dt` later, valid for `dt` up to the next absorption time.
    pub fn advance(&self, dt: f64, stats: &PotentialStats) -> PlProfile {
        let p = &self.profile;
        let n = p.x.len();
        let (a, h) = (stats.arith_mean, stats.harm_mean);
        let mut pts: Vec<(f64, Option<f64>)> = p.x.iter().map(|&x| (x, None)).collect();
        for m in &self.maxima {
            let Site::Finite { lo, hi } = m.site else { continue };
            let level = m.value + dt * h;
            let lam = m.value - dt * (a - h);
            // Left flank, walking down from the maximum.
            let stop = m.left_min.map_or(0, |mm| mm.1);
            let mut i = lo;
            let mut found = false;
            while i > stop {
                if p.u[i - 1] < lam && p.u[i] >= lam {
                    let x = p.x[i - 1] + (lam - p.u[i - 1]) / (p.u[i] - p.u[i - 1]) * (p.x[i] - p.x[i - 1]);
                    pts.push((x, Some(level)));
                    found = true;
                    break;
                }
                i -= 1;
            }
            if !found && m.left_min.is_none() && p.u[0] > lam {
                pts.push((p.x[0] + (lam - p.u[0]) / p.left_slope, Some(level)));
            }
            let stop = m.right_min.map_or(n - 1, |mm| mm.0);
            let mut i = hi;
            found = false;
            while i < stop {
                if p.u[i + 1] < lam && p.u[i] >= lam {
                    let x = p.x[i] + (p.u[i] - lam) / (p.u[i] - p.u[i + 1]) * (p.x[i + 1] - p.x[i]);
                    pts.push((x, Some(level)));
                    found = true;
                    break;
                }
                i += 1;
            }
            if !found && m.right_min.is_none() && p.u[n - 1] > lam {
                pts.push((p.x[n - 1] + (lam - p.u[n - 1]) / p.right_slope, Some(level)));
            }
        }
        pts.sort_by(|l, r| l.0.total_cmp(&r.0));
        let mut x = Vec::with_capacity(pts.len());
        let mut u: Vec<f64> = Vec::with_capacity(pts.len());
        for (xi, fixed) in pts {
            let v = fixed.unwrap_or_else(|| self.eval(xi, dt, stats));
            if let Some(&last) = x.last() {
                if xi - last <= 1e-12 * (1.0 + xi.abs()) {
                    // Crossing on top of an existing breakpoint.
                    let k = u.len() - 1;
                    u[k] = u[k].min(v);
                    continue;
                }
            }
            x.push(xi);
            u.push(v);
        }
        PlProfile {
            x,
            u,
            left_slope: p.left_slope,
            right_slope: p.right_slope,
        }
        .tidy()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Epoch {
    pub start: f64,
    pub profile: PiecewiseMonotoneProfile,
}

/// The full evolution of a class-ℒ datum as a list of epochs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Evolution {
    pub stats: PotentialStats,
    pub epochs: Vec<Epoch>,
}

impl Evolution {
    /// Classifies `u0` strictly, then steps from one absorption to the next
    /// until no maximum can expire.
    pub fn new(u0: &PlProfile, stats: &PotentialStats) -> Result<Self> {
        Self::from_classified(classify_l(u0, stats)?, stats)
    }

    pub fn from_classified(first: PiecewiseMonotoneProfile, stats: &PotentialStats) -> Result<Self> {
        let mut epochs = vec![Epoch {
            start: 0.0,
            profile: first,
        }];
        loop {
            let last = epochs.last().unwrap();
            let Some(dt) = last.profile.next_time() else { break };
            if epochs.len() >= MAX_EPOCHS {
                return Err(Error::EpochOverflow(epochs.len()));
            }
            let next = last.profile.advance(dt, stats);
            let start = last.start + dt;
            let profile = classify(next, stats, Mode::Lenient)?;
            epochs.push(Epoch { start, profile });
        }
        Ok(Evolution { stats: *stats, epochs })
    }

    pub fn epoch_times(&self) -> Vec<f64> {
        self.epochs.iter().map(|e| e.start).collect()
    }

    pub fn initial(&self) -> &PiecewiseMonotoneProfile {
        &self.epochs[0].profile
    }

    fn epoch_at(&self, t: f64) -> &Epoch {
        let k = self.epochs.partition_point(|e| e.start <= t);
        &self.epochs[k.max(1) - 1]
    }

    pub fn eval(&self, x: f64, t: f64) -> f64 {
        let e = self.epoch_at(t);
        e.profile.eval(x, t - e.start, &self.stats)
    }

    pub fn profile_at(&self, t: f64) -> PlProfile {
        let e = self.epoch_at(t);
        e.profile.advance(t - e.start, &self.stats)
    }
}

/// Evolves a class-ℒ profile to time `t`.
pub fn evolve_l(u0: &PlProfile, stats: &PotentialStats, t: f64) -> Result<PlProfile> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidConfig(format!("t must be >= 0, got {t}")));
    }
    Ok(Evolution::new(u0, stats)?.profile_at(t))
}

/// `u_δ ± 2δ` evolved exactly; they bracket the limit started from `u0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Sandwich {
    pub delta: f64,
    pub lipschitz: f64,
    /// The lattice approximation `u_δ`.
    pub approx: PlProfile,
    pub lower: Evolution,
    pub upper: Evolution,
}

impl Sandwich {
    pub fn bounds(&self, x: f64, t: f64) -> (f64, f64) {
        (self.lower.eval(x, t), self.upper.eval(x, t))
    }
}

/// Lattice approximation of a Lipschitz profile: slopes `±C` on nodes
/// `nδ/C`, each step taken toward `u0` at the next node.
///
/// Values are kept as `u0(x_first) + kδ` with integer `k`, so equal levels
/// stay bit-identical.
pub fn ldelta_profile(u0: &PlProfile, delta: f64) -> Result<PlProfile> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::InvalidConfig(format!("delta must be positive, got {delta}")));
    }
    let c = u0.lipschitz();
    if !(c > 0.0) {
        return Err(Error::InvalidConfig("constant data needs no lattice approximation".into()));
    }
    for s in [u0.left_slope, u0.right_slope] {
        if (s.abs() - c).abs() > 1e-12 * c {
            return Err(Error::InvalidConfig(format!(
                "tail slope {s} differs from the Lipschitz constant {c}; the 2δ bound would fail on the tail"
            )));
        }
    }
    let h = delta / c;
    let n_lo = ((u0.x[0] / h).floor() as i64) - 1;
    let n_hi = ((u0.x[u0.x.len() - 1] / h).ceil() as i64) + 1;
    let count = (n_hi - n_lo + 1) as usize;
    if count > 10_000_000 {
        return Err(Error::InvalidConfig(format!("lattice of {count} nodes is too fine")));
    }
    let base = u0.eval(n_lo as f64 * h);
    let mut k: i64 = 0;
    let mut x = Vec::with_capacity(count);
    let mut u = Vec::with_capacity(count);
    x.push(n_lo as f64 * h);
    u.push(base);
    for n in n_lo + 1..=n_hi {
        let xn = n as f64 * h;
        let cur = base + k as f64 * delta;
        k += if u0.eval(xn) >= cur { 1 } else { -1 };
        x.push(xn);
        u.push(base + k as f64 * delta);
    }
    Ok(PlProfile {
        x,
        u,
        left_slope: c * u0.left_slope.signum(),
        right_slope: c * u0.right_slope.signum(),
    }
    .tidy())
}

pub fn ldelta_sandwich(u0: &PlProfile, stats: &PotentialStats, delta: f64) -> Result<Sandwich> {
    let approx = ldelta_profile(u0, delta)?;
    let lower = Evolution::new(&approx.shifted(-2.0 * delta), stats)?;
    let upper = Evolution::new(&approx.shifted(2.0 * delta), stats)?;
    Ok(Sandwich {
        delta,
        lipschitz: u0.lipschitz(),
        approx,
        lower,
        upper,
    })
}
