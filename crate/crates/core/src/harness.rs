//! ε-sweeps of the direct simulation against an effective reference.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cell::{tabulate_hamiltonian, CellOptions};
use crate::effective::{
    alpha0_special, bounds_envelope, check_class, cone_limit, ldelta_sandwich, limit_alpha_gt1, solve_hj_alpha1,
    special_value, Evolution, HjConfig, PlProfile, Sandwich, SpecialClass,
};
use crate::error::{Error, Result};
use crate::initial::InitialData;
use crate::microsim::{simulate, Field, SimConfig};
use crate::potential::{PeriodicPotential, PotentialDescriptor, PotentialStats};

/// Effective evaluator compared against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Reference {
    /// `u₀ + tH`.
    AlphaGt1,
    /// Cone formula; `u0` must be a cone.
    ConeLimit,
    /// Exact epoch evolution of a 1-D piecewise-linear `u0`.
    ClassL,
    /// Distance to the `u_δ ± 2δ` envelopes.
    Sandwich { delta: f64 },
    /// Distance to the `u₀ + tH ≤ u ≤ min(u₀ + tA, sup u₀ + tH)` bounds.
    Bounds,
    Special { class: SpecialClass },
    /// Lax–Friedrichs solution of `u_t = c̄(|∇u|)` on a fixed grid.
    Hj {
        #[serde(default)]
        p_max: Option<f64>,
        #[serde(default = "default_nodes")]
        nodes: usize,
        #[serde(default = "default_ref_dx")]
        dx: f64,
    },
    /// Heat flow plus `tA` on a fixed grid.
    Heat {
        #[serde(default = "default_ref_dx")]
        dx: f64,
    },
}

fn default_nodes() -> usize {
    33
}

fn default_ref_dx() -> f64 {
    0.005
}

fn default_cells() -> f64 {
    8.0
}

fn default_cfl() -> f64 {
    0.9
}

/// Axis-aligned box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Window {
    pub fn contains(&self, p: &[f64]) -> bool {
        self.lo.iter().zip(&self.hi).zip(p).all(|((a, b), x)| *x >= *a && *x <= *b)
    }

    fn grown(&self, by: f64) -> Window {
        Window {
            lo: self.lo.iter().map(|v| v - by).collect(),
            hi: self.hi.iter().map(|v| v + by).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub potential: PotentialDescriptor,
    pub u0: InitialData,
    pub alpha: f64,
    /// Strictly decreasing.
    pub eps_list: Vec<f64>,
    pub window: Window,
    pub times: Vec<f64>,
    pub reference: Reference,
    /// Grid policy `dx = ε / cells_per_eps`.
    #[serde(default = "default_cells")]
    pub cells_per_eps: f64,
    /// Simulation box; the window grown by the influence margin when absent.
    #[serde(default)]
    pub domain: Option<Window>,
    /// Declared bound on the error at the smallest ε.
    pub envelope: f64,
    #[serde(default = "default_cfl")]
    pub cfl_safety: f64,
}

impl StudyConfig {
    pub fn dim(&self) -> usize {
        self.window.lo.len()
    }

    pub fn t_max(&self) -> f64 {
        self.times.iter().copied().fold(0.0, f64::max)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.into()));
        if self.eps_list.is_empty() {
            return bad("eps_list is empty");
        }
        if self.eps_list.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
            return bad("eps values must be positive");
        }
        if self.eps_list.windows(2).any(|w| !(w[1] < w[0])) {
            return bad("eps_list must be strictly decreasing");
        }
        if self.times.is_empty() || self.times.iter().any(|t| !(*t >= 0.0 && t.is_finite())) {
            return bad("times must be a nonempty list of nonnegative values");
        }
        let dim = self.dim();
        if !(1..=2).contains(&dim) || self.window.hi.len() != dim {
            return bad("window must be a 1-D or 2-D box");
        }
        if self.window.lo.iter().zip(&self.window.hi).any(|(a, b)| !(a < b)) {
            return bad("window must have lo < hi on every axis");
        }
        if let Some(d) = self.u0.dim() {
            if d != dim {
                return bad("u0 and window dimensions differ");
            }
        }
        self.u0.validate()?;
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return bad("alpha must be >= 0");
        }
        if self.alpha == 0.0 && !self.u0.is_c11() {
            return bad("alpha = 0 needs C^{1,1} initial data (affine, quadratic, smoothed_tent or constant)");
        }
        if !(self.cells_per_eps > 0.0) {
            return bad("cells_per_eps must be positive");
        }
        if !(self.envelope >= 0.0) {
            return bad("envelope must be >= 0");
        }
        Ok(())
    }
}

/// Width of the band next to the truncation that the boundary can disturb
/// by time `t`: `t·max g / (min tail slope) + 4√(ε^α t)`.
pub fn influence_margin(u0: &InitialData, g_max: f64, eps: f64, alpha: f64, t: f64) -> f64 {
    let s = u0.tail_min_slope();
    let transport = if s > 0.0 && s.is_finite() { t * g_max / s } else { 0.0 };
    transport + 4.0 * (eps.powf(alpha) * t).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorRow {
    pub eps: f64,
    pub time: f64,
    pub sup_error: f64,
    pub runtime_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsRun {
    pub eps: f64,
    pub dx: f64,
    pub nodes: usize,
    pub steps: usize,
    pub runtime_s: f64,
    /// Sup error at each configured time.
    pub errors: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub config: StudyConfig,
    pub domain: Window,
    pub margin: f64,
    pub runs: Vec<EpsRun>,
    pub rows: Vec<ErrorRow>,
    /// Errors nonincreasing in ε (10% slack) at every time.
    pub trend_ok: bool,
    /// Least-squares slope of log(error) against log(ε), largest time.
    pub loglog_slope: Option<f64>,
    /// Largest error at the smallest ε.
    pub final_error: f64,
    pub pass: bool,
}

enum Prepared {
    Gt1,
    Cone { c: f64, center: Vec<f64>, height: f64 },
    ClassL(Evolution),
    Sandwich(Sandwich),
    Bounds,
    Special(SpecialClass),
    /// One field per configured time.
    Grid(Vec<Field>),
}

struct RefEval<'a> {
    cfg: &'a StudyConfig,
    stats: PotentialStats,
    prepared: Prepared,
}

impl RefEval<'_> {
    /// `(lo, hi)` bracket of the reference; equal ends for exact references.
    fn bounds(&self, p: &[f64], k: usize) -> (f64, f64) {
        let t = self.cfg.times[k];
        let u0 = &self.cfg.u0;
        let s = &self.stats;
        let v = match &self.prepared {
            Prepared::Gt1 => limit_alpha_gt1(u0, s, p, t),
            Prepared::Cone { c, center, height } => {
                let q: Vec<f64> = p.iter().zip(center).map(|(a, b)| a - b).collect();
                height + cone_limit(*c, s, &q, t)
            }
            Prepared::ClassL(ev) => ev.eval(p[0], t),
            Prepared::Sandwich(sw) => return sw.bounds(p[0], t),
            Prepared::Bounds => return bounds_envelope(u0, s, p, t),
            Prepared::Special(class) => special_value(class, u0, s, p, t),
            Prepared::Grid(fields) => sample(&fields[k], p),
        };
        (v, v)
    }
}

/// Linear (1-D) or bilinear (2-D) interpolation, clamped to the grid.
pub fn sample(f: &Field, p: &[f64]) -> f64 {
    if f.dim == 1 {
        return f.interp1(p[0]);
    }
    let locate = |x: f64, o: f64, n: usize| {
        let s = ((x - o) / f.dx).clamp(0.0, (n - 1) as f64);
        let i = (s.floor() as usize).min(n - 2);
        (i, s - i as f64)
    };
    let (i, a) = locate(p[0], f.origin[0], f.shape[0]);
    let (j, b) = locate(p[1], f.origin[1], f.shape[1]);
    let v = |i, j| f.at(i, j);
    (1.0 - b) * ((1.0 - a) * v(i, j) + a * v(i + 1, j)) + b * ((1.0 - a) * v(i, j + 1) + a * v(i + 1, j + 1))
}

fn grid_on(u0: &InitialData, w: &Window, dx: f64) -> Result<Field> {
    if w.lo.len() == 1 {
        Field::sample_1d(u0, w.lo[0], w.hi[0], dx)
    } else {
        Field::sample_2d(u0, [w.lo[0], w.lo[1]], [w.hi[0], w.hi[1]], dx)
    }
}

fn prepare<'a>(cfg: &'a StudyConfig, g: &PeriodicPotential, stats: PotentialStats, domain: &Window) -> Result<RefEval<'a>> {
    let u0 = &cfg.u0;
    let times = &cfg.times;
    let prepared = match &cfg.reference {
        Reference::AlphaGt1 => Prepared::Gt1,
        Reference::ConeLimit => match u0 {
            InitialData::Cone { c, center, height } => Prepared::Cone {
                c: *c,
                center: center.clone(),
                height: *height,
            },
            _ => {
                return Err(Error::KindMismatch {
                    kind: "cone".into(),
                    reason: format!("the cone reference needs cone data, got {}", u0.kind()),
                })
            }
        },
        Reference::ClassL => Prepared::ClassL(Evolution::new(&PlProfile::from_initial(u0)?, &stats)?),
        Reference::Sandwich { delta } => Prepared::Sandwich(ldelta_sandwich(&PlProfile::from_initial(u0)?, &stats, *delta)?),
        Reference::Bounds => Prepared::Bounds,
        Reference::Special { class } => {
            check_class(class, u0, &cfg.window.lo, &cfg.window.hi, if cfg.dim() == 1 { 401 } else { 41 })?;
            Prepared::Special(class.clone())
        }
        Reference::Hj { p_max, nodes, dx } => {
            let radius = domain.lo.iter().chain(&domain.hi).fold(0.0f64, |m, v| m.max(v.abs())) * 2f64.sqrt();
            let top = p_max.unwrap_or_else(|| (2.0 * u0.local_lipschitz(radius)).max(1.0));
            if !(top.is_finite() && *nodes >= 2) {
                return Err(Error::InvalidConfig("hj reference needs a finite p_max and at least 2 nodes".into()));
            }
            let grid: Vec<f64> = (0..*nodes).map(|k| top * k as f64 / (*nodes - 1) as f64).collect();
            let table = tabulate_hamiltonian(g, &grid, &CellOptions::default())?;
            let start = grid_on(u0, domain, *dx)?;
            let mut hj = HjConfig::new(cfg.t_max());
            hj.cfl_safety = cfg.cfl_safety;
            hj.output_times = times.clone();
            let traj = solve_hj_alpha1(&start, &table, &hj)?;
            Prepared::Grid(by_time(&traj.snapshots, times))
        }
        Reference::Heat { dx } => {
            let start = grid_on(u0, domain, *dx)?;
            let fields = times
                .iter()
                .map(|&t| alpha0_special(&start, &stats, t, None))
                .collect::<Result<Vec<_>>>()?;
            Prepared::Grid(fields)
        }
    };
    Ok(RefEval { cfg, stats, prepared })
}

/// Snapshot for each configured time (snapshots come sorted and deduplicated).
fn by_time(snaps: &[Field], times: &[f64]) -> Vec<Field> {
    times
        .iter()
        .map(|t| snaps.iter().find(|s| s.time == *t).cloned().expect("snapshot at every output time"))
        .collect()
}

fn window_nodes(f: &Field, w: &Window) -> Vec<usize> {
    (0..f.len())
        .filter(|&k| {
            let c = f.coords(k);
            w.contains(&c[..f.dim])
        })
        .collect()
}

fn sup_error(f: &Field, nodes: &[usize], r: &RefEval<'_>, k: usize) -> f64 {
    nodes
        .iter()
        .map(|&n| {
            let c = f.coords(n);
            let (lo, hi) = r.bounds(&c[..f.dim], k);
            let v = f.values[n];
            (lo - v).max(v - hi).max(0.0)
        })
        .fold(0.0, f64::max)
}

/// The same sup, walking index ranges of the window instead of filtering.
fn sup_error_by_ranges(f: &Field, w: &Window, r: &RefEval<'_>, k: usize) -> f64 {
    let range = |axis: usize, n: usize| {
        let o = f.origin[axis];
        let a = ((w.lo[axis] - o) / f.dx - 1e-9).ceil().max(0.0) as usize;
        let b = (((w.hi[axis] - o) / f.dx + 1e-9).floor().max(-1.0) + 1.0) as usize;
        a..b.min(n)
    };
    let jr = if f.dim == 2 { range(1, f.shape[1]) } else { 0..1 };
    let mut worst = 0.0f64;
    for j in jr {
        for i in range(0, f.shape[0]) {
            let p = [f.x(i), f.y(j)];
            let (lo, hi) = r.bounds(&p[..f.dim], k);
            let v = f.at(i, j);
            worst = worst.max(lo - v).max(v - hi);
        }
    }
    worst
}

fn run_one(cfg: &StudyConfig, g: &PeriodicPotential, r: &RefEval<'_>, domain: &Window, eps: f64) -> Result<EpsRun> {
    let start = Instant::now();
    let dx = eps / cfg.cells_per_eps;
    let u0 = grid_on(&cfg.u0, domain, dx)?;
    let mut sim = SimConfig::new(eps, cfg.alpha, cfg.t_max());
    sim.cfl_safety = cfg.cfl_safety;
    sim.output_times = cfg.times.clone();
    let traj = simulate(&u0, g, &sim)?;
    let snaps = by_time(&traj.snapshots, &cfg.times);
    let nodes = window_nodes(&u0, &cfg.window);
    if nodes.is_empty() {
        return Err(Error::WindowViolation("no grid node falls inside the window".into()));
    }
    let mut errors = Vec::with_capacity(snaps.len());
    for (k, f) in snaps.iter().enumerate() {
        let e = sup_error(f, &nodes, r, k);
        let again = sup_error_by_ranges(f, &cfg.window, r, k);
        if e != again {
            return Err(Error::InvalidConfig(format!(
                "window error passes disagree at eps = {eps}, t = {}: {e} vs {again}",
                cfg.times[k]
            )));
        }
        errors.push(e);
    }
    Ok(EpsRun {
        eps,
        dx,
        nodes: u0.len(),
        steps: traj.steps,
        runtime_s: start.elapsed().as_secs_f64(),
        errors,
    })
}

/// Errors nonincreasing between consecutive ε up to 10% (plus 1e-12 for
/// errors at rounding level).
pub fn trend_ok(runs: &[EpsRun]) -> bool {
    runs.windows(2)
        .all(|w| w[1].errors.iter().zip(&w[0].errors).all(|(b, a)| *b <= 1.1 * a + 1e-12))
}

fn loglog_slope(runs: &[EpsRun]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = runs
        .iter()
        .filter_map(|r| {
            let e = *r.errors.last()?;
            (e > 0.0).then(|| (r.eps.ln(), e.ln()))
        })
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    Some(sxy / sxx)
}

/// Runs the sweep, one task per ε on at most `jobs` threads.
pub fn run_study(cfg: &StudyConfig, jobs: Option<usize>) -> Result<ConvergenceReport> {
    cfg.validate()?;
    let g = PeriodicPotential::from_descriptor(&cfg.potential)?;
    let stats = g.stats(4)?;
    let t_max = cfg.t_max();
    let margin = influence_margin(&cfg.u0, stats.g_max, cfg.eps_list[0], cfg.alpha, t_max);
    let domain = match &cfg.domain {
        Some(d) => {
            if d.lo.len() != cfg.dim() || d.hi.len() != cfg.dim() {
                return Err(Error::InvalidConfig("domain and window dimensions differ".into()));
            }
            let need = cfg.window.grown(margin);
            let inside = d.lo.iter().zip(&need.lo).all(|(a, b)| a <= b) && d.hi.iter().zip(&need.hi).all(|(a, b)| a >= b);
            if !inside {
                return Err(Error::WindowViolation(format!(
                    "window {:?}..{:?} needs {margin:.4} of margin inside domain {:?}..{:?}",
                    cfg.window.lo, cfg.window.hi, d.lo, d.hi
                )));
            }
            d.clone()
        }
        None => cfg.window.grown(margin + cfg.eps_list[0]),
    };
    let reference = prepare(cfg, &g, stats, &domain)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    let runs: Vec<EpsRun> = pool.install(|| {
        cfg.eps_list
            .par_iter()
            .map(|&eps| run_one(cfg, &g, &reference, &domain, eps))
            .collect::<Result<Vec<_>>>()
    })?;
    let rows = runs
        .iter()
        .flat_map(|r| {
            cfg.times.iter().zip(&r.errors).map(move |(&time, &sup_error)| ErrorRow {
                eps: r.eps,
                time,
                sup_error,
                runtime_s: r.runtime_s,
            })
        })
        .collect();
    let final_error = runs.last().unwrap().errors.iter().copied().fold(0.0, f64::max);
    let trend = trend_ok(&runs);
    Ok(ConvergenceReport {
        config: cfg.clone(),
        domain,
        margin,
        loglog_slope: loglog_slope(&runs),
        trend_ok: trend,
        pass: trend && final_error <= cfg.envelope,
        final_error,
        runs,
        rows,
    })
}

pub fn to_csv(report: &ConvergenceReport) -> String {
    let mut s = String::from("eps,time,sup_error,runtime_s\n");
    for r in &report.rows {
        s.push_str(&format!("{},{},{},{}\n", r.eps, r.time, r.sup_error, r.runtime_s));
    }
    s
}

fn write(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

/// Writes `study.csv` and `report.json` into `dir`.
pub fn emit(report: &ConvergenceReport, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.display().to_string(),
        message: e.to_string(),
    })?;
    let csv = dir.join("study.csv");
    let json = dir.join("report.json");
    write(&csv, &to_csv(report))?;
    let body = serde_json::to_string_pretty(report).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    write(&json, &body)?;
    Ok(vec![csv, json])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn affine_config() -> StudyConfig {
        StudyConfig {
            potential: PotentialDescriptor::Fourier {
                mean: 1.5,
                cos: vec![],
                sin: vec![],
                phase: 0.0,
            },
            u0: InitialData::Affine {
                slope: vec![0.7],
                offset: 0.1,
            },
            alpha: 0.5,
            eps_list: vec![0.2, 0.1],
            window: Window {
                lo: vec![-0.5],
                hi: vec![0.5],
            },
            times: vec![0.25, 0.5],
            reference: Reference::AlphaGt1,
            cells_per_eps: 8.0,
            domain: None,
            envelope: 1e-8,
            cfl_safety: 0.9,
        }
    }

    #[test]
    fn exact_on_both_sides() {
        for alpha in [0.0, 0.5, 1.0, 2.0] {
            let cfg = StudyConfig {
                alpha,
                ..affine_config()
            };
            let rep = run_study(&cfg, Some(2)).unwrap();
            assert!(rep.rows.iter().all(|r| r.sup_error <= 1e-8), "{:?}", rep.rows);
            assert!(rep.pass);
        }
    }

    #[test]
    fn rejects_bad_configs() {
        let mut cfg = affine_config();
        cfg.eps_list.clear();
        assert_eq!(run_study(&cfg, None).unwrap_err().kind(), "InvalidConfig");
        let mut cfg = affine_config();
        cfg.eps_list = vec![0.1, 0.2];
        assert!(run_study(&cfg, None).is_err());
        let mut cfg = affine_config();
        cfg.domain = Some(Window {
            lo: vec![-0.6],
            hi: vec![0.6],
        });
        assert_eq!(run_study(&cfg, None).unwrap_err().kind(), "WindowViolation");
        let mut cfg = affine_config();
        cfg.reference = Reference::ConeLimit;
        assert_eq!(run_study(&cfg, None).unwrap_err().kind(), "KindMismatch");
    }

    #[test]
    fn csv_rows_and_json_round_trip() {
        let rep = run_study(&affine_config(), None).unwrap();
        let csv = to_csv(&rep);
        assert_eq!(csv.lines().count(), 1 + 2 * 2);
        let dir = tempfile::tempdir().unwrap();
        let files = emit(&rep, dir.path()).unwrap();
        assert_eq!(files.len(), 2);
        let back: ConvergenceReport = serde_json::from_str(&std::fs::read_to_string(&files[1]).unwrap()).unwrap();
        assert_eq!(back, rep);
        assert_eq!(serde_json::to_string(&back).unwrap(), serde_json::to_string(&rep).unwrap());
    }

    #[test]
    fn identical_configs_give_identical_errors() {
        let cfg = StudyConfig {
            potential: PotentialDescriptor::Cosine { a: 2.0, b: 1.0, phase: 0.0 },
            u0: InitialData::cone(1.0),
            alpha: 0.5,
            eps_list: vec![0.2, 0.1],
            window: Window {
                lo: vec![-0.5],
                hi: vec![0.5],
            },
            times: vec![0.2],
            reference: Reference::ConeLimit,
            cells_per_eps: 4.0,
            domain: None,
            envelope: 1.0,
            cfl_safety: 0.9,
        };
        let a = run_study(&cfg, Some(1)).unwrap();
        let b = run_study(&cfg, Some(3)).unwrap();
        let errs = |r: &ConvergenceReport| r.rows.iter().map(|r| r.sup_error).collect::<Vec<_>>();
        assert_eq!(errs(&a), errs(&b));
    }

    #[test]
    fn emit_reports_io_failure() {
        let rep = run_study(&affine_config(), None).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        std::fs::write(&blocker, "x").unwrap();
        assert_eq!(emit(&rep, &blocker.join("sub")).unwrap_err().kind(), "IoFailure");
    }

    #[test]
    fn trend_allows_ten_percent() {
        let run = |e: f64| EpsRun {
            eps: 0.1,
            dx: 0.01,
            nodes: 1,
            steps: 1,
            runtime_s: 0.0,
            errors: vec![e],
        };
        assert!(trend_ok(&[run(1.0), run(1.09), run(0.5)]));
        assert!(!trend_ok(&[run(1.0), run(1.2)]));
    }
}
