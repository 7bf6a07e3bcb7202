use std::time::Instant;

use anyhow::Result;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use homog_core::cell::{solve, tabulate_hamiltonian, verify_corrector, CellOptions};
use homog_core::effective::{
    alpha0_special, auto_padding, bounds_envelope, classify_l, cone_limit, dissipation, ldelta_sandwich,
    limit_alpha_gt1, solve_hj_alpha1, Evolution, HjConfig, PlProfile, Regime,
};
use homog_core::harness::{emit, run_study, sample, StudyConfig, Window};
use homog_core::initial::InitialData;
use homog_core::microsim::{simulate as run_sim, space_quotient, Field, SimConfig};
use homog_core::{Error, PeriodicPotential, PotentialDescriptor};

use crate::out::{csv, OutDir};
use crate::{CellArgs, EffectiveArgs, Failure, SimulateArgs, StudyArgs};

/// Parses `arg` as inline JSON when it starts with `{`, else as a file path.
/// Returns the value and its JSON echo for the manifest.
fn load<T: DeserializeOwned>(arg: &str) -> Result<(T, Value)> {
    let (text, path) = if arg.trim_start().starts_with('{') {
        (arg.to_string(), None)
    } else {
        let text = std::fs::read_to_string(arg).map_err(|e| Failure::io(std::path::Path::new(arg), e))?;
        (text, Some(arg))
    };
    let echo: Value = serde_json::from_str(&text)
        .map_err(|e| Failure::config(path, format!("{}: {e}", path.unwrap_or("inline JSON"))))?;
    let value = T::deserialize(&echo).map_err(|e| Failure::config(path, format!("{}: {e}", path.unwrap_or("inline JSON"))))?;
    Ok((value, echo))
}

fn opts(tol: Option<f64>) -> Result<CellOptions> {
    match tol {
        Some(t) if !(t > 0.0 && t < 1.0) => Err(Failure::config(None, format!("--tol must lie in (0, 1), got {t}"))),
        Some(t) => Ok(CellOptions::with_tol(t)),
        None => Ok(CellOptions::default()),
    }
}

pub fn cell(a: &CellArgs) -> Result<()> {
    let start = Instant::now();
    let (desc, echo) = load::<PotentialDescriptor>(&a.potential)?;
    let g = PeriodicPotential::from_descriptor(&desc)?;
    let opts = opts(a.tol)?;
    let config = json!({ "potential": echo, "p": a.p, "p_grid": a.p_grid, "tol": opts.tol });
    let (name, text) = if let Some(p) = a.p {
        let cor = solve(&g, p, &opts)?;
        let rep = verify_corrector(&cor, &g)?;
        let v = json!({
            "p": p,
            "speed": cor.speed,
            "identities": { "cp_integral_err": rep.cp_integral_err, "cp_energy_err": rep.cp_energy_err },
            "residual": rep.residual.max(),
            "verification": rep,
        });
        ("cell.json", serde_json::to_string_pretty(&v)? + "\n")
    } else {
        let grid = a.p_grid.clone().unwrap_or_default();
        let mut rows = Vec::with_capacity(grid.len());
        for &p in &grid {
            let cor = solve(&g, p, &opts)?;
            let rep = verify_corrector(&cor, &g)?;
            log::info!("p = {p}: speed {}", cor.speed);
            rows.push(vec![p, cor.speed, rep.cp_integral_err.max(rep.cp_energy_err), rep.residual.max()]);
        }
        ("cell.csv", csv(&["p", "speed", "cp_identity_err", "residual"], rows))
    };
    print!("{text}");
    if let Some(dir) = &a.out {
        let mut out = OutDir::open(dir, start)?;
        out.write(name, text.as_bytes())?;
        out.finish("cell", config)?;
    }
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct SimulateConfig {
    potential: PotentialDescriptor,
    u0: InitialData,
    domain: Window,
    /// Grid step; `eps / 8` when absent.
    #[serde(default)]
    dx: Option<f64>,
    #[serde(flatten)]
    sim: SimConfig,
}

fn field_on(u0: &InitialData, w: &Window, dx: f64) -> Result<Field> {
    Ok(match w.lo.len() {
        1 => Field::sample_1d(u0, w.lo[0], w.hi[0], dx)?,
        2 => Field::sample_2d(u0, [w.lo[0], w.lo[1]], [w.hi[0], w.hi[1]], dx)?,
        d => return Err(Failure::config(None, format!("domain must be 1-D or 2-D, got {d}-D"))),
    })
}

fn field_csv(f: &Field) -> String {
    let rows = (0..f.len()).map(|k| {
        let c = f.coords(k);
        let mut r = c[..f.dim].to_vec();
        r.push(f.values[k]);
        r
    });
    if f.dim == 1 {
        csv(&["x", "u"], rows)
    } else {
        csv(&["x", "y", "u"], rows)
    }
}

pub fn simulate(a: &SimulateArgs) -> Result<()> {
    let begun = Instant::now();
    let (cfg, echo) = load::<SimulateConfig>(&a.config)?;
    let path = Some(a.config.as_str());
    cfg.sim.validate()?;
    cfg.u0.validate()?;
    let dim = cfg.domain.lo.len();
    if cfg.domain.hi.len() != dim || cfg.u0.dim().is_some_and(|d| d != dim) {
        return Err(Failure::config(path, "u0 and domain dimensions differ".into()));
    }
    if cfg.sim.alpha == 0.0 && !cfg.u0.is_c11() {
        return Err(Failure::config(
            path,
            format!("alpha = 0 needs C^{{1,1}} initial data, {} has a kink", cfg.u0.kind()),
        ));
    }
    let dx = cfg.dx.unwrap_or(cfg.sim.eps / 8.0);
    if !(dx > 0.0) {
        return Err(Failure::config(path, format!("dx must be positive, got {dx}")));
    }
    let g = PeriodicPotential::from_descriptor(&cfg.potential)?;
    let u0 = field_on(&cfg.u0, &cfg.domain, dx)?;
    log::info!("simulating {} nodes, eps {}, alpha {}", u0.len(), cfg.sim.eps, cfg.sim.alpha);
    let start = Instant::now();
    let traj = run_sim(&u0, &g, &cfg.sim)?;
    let runtime = start.elapsed().as_secs_f64();

    let mut out = OutDir::open(&a.out, begun)?;
    let mut snaps = Vec::new();
    for (k, f) in traj.snapshots.iter().enumerate() {
        let name = format!("snapshot_{k:03}.csv");
        out.write(&name, field_csv(f).as_bytes())?;
        let (lo, hi) = f.values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(*v), h.max(*v)));
        snaps.push(json!({ "file": name, "time": f.time, "min": lo, "max": hi, "space_quotient": space_quotient(f) }));
    }
    let meta = json!({
        "eps": cfg.sim.eps,
        "alpha": cfg.sim.alpha,
        "times": traj.snapshots.iter().map(|f| f.time).collect::<Vec<_>>(),
        "grid": { "dim": u0.dim, "dx": u0.dx, "origin": &u0.origin[..u0.dim], "shape": &u0.shape[..u0.dim] },
        "diagnostics": {
            "dt": traj.dt,
            "steps": traj.steps,
            "runtime_s": runtime,
            "snapshots": snaps,
        },
    });
    out.write_json("simulate.json", &meta)?;
    out.finish("simulate", echo)
}

/// Output nodes: `n` per axis over `[lo, hi]`, in `dim` dimensions.
fn nodes(lo: f64, hi: f64, n: usize, dim: usize) -> Vec<Vec<f64>> {
    let x = |i: usize| lo + (hi - lo) * i as f64 / (n - 1) as f64;
    if dim == 1 {
        (0..n).map(|i| vec![x(i)]).collect()
    } else {
        (0..n).flat_map(|j| (0..n).map(move |i| vec![x(i), x(j)])).collect()
    }
}

fn not_in_class(e: Error) -> anyhow::Error {
    match e {
        Error::NotInClassL { .. } => Failure {
            kind: e.kind().into(),
            message: e.to_string(),
            path: None,
            hint: Some("general data need the L_delta sandwich: rerun with --delta <step>, e.g. --delta 0.05".into()),
            code: 1,
        }
        .into(),
        e => e.into(),
    }
}

pub fn effective(a: &EffectiveArgs) -> Result<()> {
    let start = Instant::now();
    let regime = Regime::parse(&a.regime)?;
    let (desc, pot_echo) = load::<PotentialDescriptor>(&a.potential)?;
    let (u0, u0_echo) = load::<InitialData>(&a.u0)?;
    u0.validate()?;
    let (lo, hi, t) = (a.window[0], a.window[1], a.t);
    if !(lo < hi) || a.nodes < 2 {
        return Err(Failure::config(None, "--window needs LO < HI and --nodes at least 2".into()));
    }
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Failure::config(None, format!("--t must be >= 0, got {t}")));
    }
    if a.delta.is_some() && regime != Regime::Alpha01OneD {
        return Err(Failure::config(None, "--delta applies only to alpha01-1d".into()));
    }
    let dim = u0.dim().unwrap_or(1);
    let g = PeriodicPotential::from_descriptor(&desc)?;
    let stats = g.stats(4)?;
    let pts = nodes(lo, hi, a.nodes, dim);
    let step = (hi - lo) / (a.nodes - 1) as f64;
    let mut meta = json!({
        "regime": regime.name(),
        "t": t,
        "means": { "arith_mean": stats.arith_mean, "harm_mean": stats.harm_mean, "g_min": stats.g_min, "g_max": stats.g_max },
        "grid": { "dim": dim, "lo": lo, "hi": hi, "nodes": a.nodes },
    });
    let mut columns = vec!["u"];
    let values: Vec<Vec<f64>> = match regime {
        Regime::AlphaGt1 => pts.iter().map(|p| vec![limit_alpha_gt1(&u0, &stats, p, t)]).collect(),
        Regime::Alpha01Cone => {
            let InitialData::Cone { c, center, height } = &u0 else {
                return Err(Error::KindMismatch {
                    kind: "cone".into(),
                    reason: format!("alpha01-cone needs cone data, got {}", u0.kind()),
                }
                .into());
            };
            pts.iter()
                .map(|p| {
                    let q: Vec<f64> = p.iter().zip(center).map(|(x, c0)| x - c0).collect();
                    vec![height + cone_limit(*c, &stats, &q, t)]
                })
                .collect()
        }
        Regime::Alpha01Bounds => {
            columns = vec!["lower", "upper"];
            pts.iter()
                .map(|p| {
                    let (l, h) = bounds_envelope(&u0, &stats, p, t);
                    vec![l, h]
                })
                .collect()
        }
        Regime::Alpha01OneD => {
            let profile = PlProfile::from_initial(&u0)?;
            match a.delta {
                None => {
                    let classified = classify_l(&profile, &stats).map_err(not_in_class)?;
                    meta["maxima"] = json!(classified.maxima);
                    meta["t_x"] = json!(classified.times());
                    let ev = Evolution::from_classified(classified, &stats)?;
                    meta["epoch_times"] = json!(ev.epoch_times());
                    pts.iter().map(|p| vec![ev.eval(p[0], t)]).collect()
                }
                Some(delta) => {
                    let sw = ldelta_sandwich(&profile, &stats, delta)?;
                    columns = vec!["lower", "upper"];
                    meta["delta"] = json!(delta);
                    meta["maxima"] = json!(sw.upper.initial().maxima);
                    meta["t_x"] = json!(sw.upper.initial().times());
                    meta["epoch_times"] = json!({ "lower": sw.lower.epoch_times(), "upper": sw.upper.epoch_times() });
                    pts.iter()
                        .map(|p| {
                            let (l, h) = sw.bounds(p[0], t);
                            vec![l, h]
                        })
                        .collect()
                }
            }
        }
        Regime::Alpha1 => {
            let radius = lo.abs().max(hi.abs()) * (dim as f64).sqrt();
            let p_top = (2.0 * u0.local_lipschitz(radius + 1.0)).max(1.0);
            let grid: Vec<f64> = (0..33).map(|k| p_top * k as f64 / 32.0).collect();
            let table = tabulate_hamiltonian(&g, &grid, &CellOptions::default())?;
            // Room for the numerical domain of dependence of the scheme.
            let cfg = HjConfig::new(t);
            let reach = 2.0 * dim as f64 * dissipation(&table) / cfg.cfl_safety * t + step;
            let w = Window {
                lo: vec![lo - reach; dim],
                hi: vec![hi + reach; dim],
            };
            let start = field_on(&u0, &w, step)?;
            let traj = solve_hj_alpha1(&start, &table, &cfg)?;
            let last = traj.snapshots.last().unwrap_or(&start);
            meta["hamiltonian"] = json!({ "p_grid": table.p_grid, "speeds": table.speeds });
            pts.iter().map(|p| vec![sample(last, p)]).collect()
        }
        Regime::Alpha0Special => {
            let pad = auto_padding(t, step) as f64 * step;
            let w = Window {
                lo: vec![lo - pad; dim],
                hi: vec![hi + pad; dim],
            };
            let start = field_on(&u0, &w, step)?;
            let f = alpha0_special(&start, &stats, t, None)?;
            pts.iter().map(|p| vec![sample(&f, p)]).collect()
        }
    };
    let mut header: Vec<&str> = if dim == 1 { vec!["x"] } else { vec!["x", "y"] };
    header.extend(columns);
    let rows = pts.iter().zip(values).map(|(p, v)| p.iter().copied().chain(v).collect());
    let mut out = OutDir::open(&a.out, start)?;
    out.write("profile.csv", csv(&header, rows).as_bytes())?;
    out.write_json("effective.json", &meta)?;
    out.finish(
        "effective",
        json!({ "regime": regime.name(), "potential": pot_echo, "u0": u0_echo, "t": t, "delta": a.delta, "window": a.window, "nodes": a.nodes }),
    )
}

pub fn study(a: &StudyArgs) -> Result<()> {
    let start = Instant::now();
    let (cfg, echo) = load::<StudyConfig>(&a.config)?;
    if a.jobs == Some(0) {
        return Err(Failure::config(None, "--jobs must be at least 1".into()));
    }
    let report = run_study(&cfg, a.jobs)?;
    let mut out = OutDir::open(&a.out, start)?;
    for p in emit(&report, out.root())? {
        if let Some(name) = p.file_name() {
            out.adopt(&name.to_string_lossy());
        }
    }
    let summary = json!({
        "pass": report.pass,
        "trend_ok": report.trend_ok,
        "final_error": report.final_error,
        "envelope": cfg.envelope,
        "loglog_slope": report.loglog_slope,
    });
    println!("{summary}");
    if !report.pass {
        return Err(Failure {
            kind: "StudyFailed".into(),
            message: format!(
                "final error {} against envelope {} (trend ok: {})",
                report.final_error, cfg.envelope, report.trend_ok
            ),
            path: None,
            hint: None,
            code: 1,
        }
        .into());
    }
    out.finish("study", echo)
}
