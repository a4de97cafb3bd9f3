use anyhow::{bail, ensure, Context, Result};
use std::process::ExitCode;
use std::time::Instant;

use fracprony::caputo::{Polynomial, SampleSeries, UniformGrid};
use fracprony::fde::{convergence_study, Axis, FdeMethod, Norm};
use fracprony::mechanics::{timing_matrix, torque_and_normal, Engine, LiverModel};
use fracprony::optimizer::{optimize, optimize_chain, FitConfig, ParameterTable};
use fracprony::polystudy::{PolyMethod, PolyStudy, POLY_HORIZON};
use fracprony::prony::{prony_derivative, PronySeries};
use fracprony::stability::{randomized_sweep, SweepConfig};

use crate::output::{config_hash, emit_bytes, sci, sci_opt, Table};
use crate::*;

pub fn run(cmd: Cmd) -> Result<ExitCode> {
    match cmd {
        Cmd::Optimize(a) => optimize_cmd(a),
        Cmd::Table(a) => table_cmd(a),
        Cmd::Poly(a) => poly_cmd(a),
        Cmd::Fde(a) => fde_cmd(a),
        Cmd::Liver(a) => liver_cmd(a),
        Cmd::Stability(a) => stability_cmd(a),
        Cmd::Bench(a) => bench_cmd(a),
    }
    .map(|ok| if ok { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn say(c: &Common, msg: impl FnOnce() -> String) {
    if c.verbose > 0 {
        eprintln!("{}", msg());
    }
}

fn load_table(path: &std::path::Path) -> Result<ParameterTable> {
    ParameterTable::load(path).with_context(|| format!("loading parameter file {}", path.display()))
}

fn default_alpha_grid() -> Vec<f64> {
    (1..=19).map(|i| i as f64 * 0.05).collect()
}

fn fit(alpha: f64, terms: usize, scale: f64) -> Result<PronySeries> {
    Ok(optimize(&FitConfig { scale, ..FitConfig::new(alpha, terms) })?.series)
}

/// Normalized series for each requested N from one continuation chain.
fn fits(alpha: f64, terms: &[usize], scale: f64) -> Result<Vec<PronySeries>> {
    let top = terms.iter().copied().max().unwrap_or(3);
    let chain = optimize_chain(&FitConfig { scale, ..FitConfig::new(alpha, top) })?;
    terms
        .iter()
        .map(|&n| {
            chain.iter().find(|r| r.series.n_terms == n).map(|r| r.series.clone()).context(format!("N = {n} outside [3, 15]"))
        })
        .collect()
}

fn optimize_cmd(a: OptimizeArgs) -> Result<bool> {
    let mut cfg = FitConfig { scale: a.scale, max_iter: a.max_iter, seed: a.seed, ..FitConfig::new(a.alpha, a.terms) };
    if let Some(m) = a.modes {
        cfg.n_modes = m;
    }
    cfg.validate()?;
    let t = Instant::now();
    let r = optimize(&cfg)?;
    say(&a.common, || {
        format!(
            "alpha {} N {}: residual {} spectral {} iterations {} ({:.1} s)",
            a.alpha,
            a.terms,
            sci(r.residual_rms),
            sci(r.spectral_error),
            r.iterations,
            t.elapsed().as_secs_f64()
        )
    });
    let mut json = serde_json::to_string_pretty(&r.series)?;
    json.push('\n');
    emit_bytes(json.as_bytes(), a.common.out.as_deref())?;
    Ok(true)
}

fn table_cmd(a: TableArgs) -> Result<bool> {
    let alphas = if a.alphas.is_empty() { default_alpha_grid() } else { a.alphas.clone() };
    let t = Instant::now();
    let table = ParameterTable::build(&alphas, [a.n_min, a.n_max], a.scale)?;
    say(&a.common, || format!("{} series in {:.1} s", table.series.len(), t.elapsed().as_secs_f64()));
    let mut json = table.to_json()?;
    json.push('\n');
    emit_bytes(json.as_bytes(), a.common.out.as_deref())?;
    Ok(true)
}

fn poly_cmd(a: PolyArgs) -> Result<bool> {
    let history = a.history.iter().map(|h| PolyMethod::parse(h)).collect::<fracprony::Result<Vec<_>>>()?;
    let study = PolyStudy {
        alphas: a.alphas.clone(),
        dts: a.dts.clone(),
        history_min_dt: a.history_min_dt,
        history,
        terms: a.terms.clone(),
        horizon: POLY_HORIZON,
        fit_scale: a.scale,
    };
    study.validate()?;
    let p = Polynomial::refinement_study();
    let rows = match &a.params {
        Some(path) => {
            let table = load_table(path)?;
            let mut series = Vec::new();
            for &al in &a.alphas {
                for &n in &a.terms {
                    series.push(table.lookup(al, n)?.denormalize(POLY_HORIZON)?);
                }
            }
            study.run_with(&p, &series)?
        }
        None => study.run(&p)?,
    };
    let mut t = Table::new(&["alpha", "method", "terms", "dt", "l2_error"]);
    for r in rows {
        t.push(vec![sci(r.alpha), r.method, r.terms.to_string(), sci(r.dt), sci(r.l2_error)]);
    }
    t.emit(a.common.out.as_deref())?;
    Ok(true)
}

fn fde_cmd(a: FdeArgs) -> Result<bool> {
    let axis = match a.study {
        Study::Temporal => Axis::Time,
        Study::Spatial => Axis::Space,
    };
    let refinements = if a.refinements.is_empty() {
        match a.study {
            Study::Temporal => vec![10, 20, 40, 80, 160, 320],
            Study::Spatial => vec![10, 20, 40, 80, 160],
        }
    } else {
        a.refinements.clone()
    };
    let fixed = a.fixed.unwrap_or(20_000);
    let norm = match a.norm {
        Some(NormArg::Nodal) => Norm::Nodal,
        Some(NormArg::L2) => Norm::L2,
        None => Norm::for_axis(axis),
    };
    // Full-history Gao at 20000 steps is quadratic; the short spatial run uses 2000.
    let gao_fixed = if axis == Axis::Space && !a.long { fixed.min(2000) } else { fixed };
    let hash = config_hash(&format!("{:?}", FdeArgs { common: Common::default(), ..a.clone() }));
    let mut t = Table::new(&["alpha", "method", "terms", "nx", "nt", "error", "rate"]).with_comment(format!(
        "config={hash} study={:?} norm={norm:?} fixed={fixed} gao_fixed={gao_fixed}",
        a.study
    ));
    for &alpha in &a.alphas {
        let mut methods = Vec::new();
        if !a.no_gao {
            methods.push((FdeMethod::Gao, gao_fixed));
        }
        say(&a.common, || format!("fitting alpha {alpha:.4}"));
        for s in fits(alpha, &a.terms, a.scale)? {
            methods.push((FdeMethod::Prony(s), fixed));
        }
        for (m, fx) in methods {
            let clock = Instant::now();
            let table = convergence_study(axis, &m, alpha, &refinements, fx, norm)?;
            say(&a.common, || format!("{} N {} done in {:.1} s", m.name(), m.terms(), clock.elapsed().as_secs_f64()));
            for r in &table.rows {
                t.push(vec![
                    sci(alpha),
                    table.method.clone(),
                    table.terms.to_string(),
                    r.nx.to_string(),
                    r.nt.to_string(),
                    sci(r.error),
                    sci_opt(r.rate),
                ]);
            }
        }
    }
    t.emit(a.common.out.as_deref())?;
    Ok(true)
}

fn liver_cmd(a: LiverArgs) -> Result<bool> {
    let model = LiverModel { alpha: a.alpha, ..LiverModel::default() };
    model.validate()?;
    ensure!(a.dt > 0.0 && a.horizon > a.dt, "need 0 < dt < horizon");
    let engine = match a.engine {
        EngineArg::Prony => Engine::Prony(match &a.params {
            Some(p) => load_table(p)?.lookup(a.alpha, a.terms)?,
            None => fit(a.alpha, a.terms, a.scale)?,
        }),
        EngineArg::Gl => Engine::Gl,
        EngineArg::Mp => Engine::Mp,
        EngineArg::Elastic => Engine::Elastic,
    };
    let grid = UniformGrid::covering(a.horizon, a.dt)?;
    let clock = Instant::now();
    let loads = torque_and_normal(&model, &engine, grid, a.quad)?;
    say(&a.common, || format!("{} steps in {:.1} s", grid.steps, clock.elapsed().as_secs_f64()));
    let mut t = Table::new(&["t", "sigma13", "sigma23", "torque", "normal_force"]);
    for i in 0..loads.times.len() {
        t.push(vec![
            sci(loads.times[i]),
            sci(loads.sigma13[i]),
            sci(loads.sigma23[i]),
            sci(loads.torque[i]),
            sci(loads.normal[i]),
        ]);
    }
    t.emit(a.common.out.as_deref())?;
    Ok(true)
}

fn stability_cmd(a: StabilityArgs) -> Result<bool> {
    let table = match &a.params {
        Some(p) => load_table(p)?,
        None => {
            say(&a.common, || "building parameter table for N = 3..9".into());
            ParameterTable::build(&default_alpha_grid(), [3, 9], 10.0)?
        }
    };
    let cfg = SweepConfig { trials: a.trials, seed: a.seed, steps: a.steps, nx: a.nx, stiff_probes: a.stiff_probes };
    let out = randomized_sweep(&cfg, |al, n| table.lookup(al, n))?;
    let mut t = Table::new(&["trial", "step", "lhs", "rhs", "margin", "violated"]);
    let mut violations = 0;
    for o in &out {
        for (n, holds) in o.report.holds.iter().enumerate() {
            let (l, r) = (o.ledger.lhs(n), o.ledger.rhs[n]);
            t.push(vec![o.trial.to_string(), n.to_string(), sci(l), sci(r), sci(r - l), (!holds).to_string()]);
        }
        violations += o.report.violations;
    }
    t.emit(a.common.out.as_deref())?;
    let worst = out.iter().map(|o| o.report.worst_margin).fold(f64::INFINITY, f64::min);
    eprintln!("{} trials, {violations} violations, worst relative margin {}", out.len(), sci(worst));
    Ok(violations == 0)
}

fn bench_cmd(a: BenchArgs) -> Result<bool> {
    if a.dts.iter().any(|d| !(*d > 0.0 && *d < POLY_HORIZON)) {
        bail!("time steps must lie in (0, 0.9)");
    }
    let mut t = Table::new(&["mode", "method", "terms", "dt", "seconds", "ops"]);
    let mode = match a.mode {
        BenchMode::PolyTiming => "poly-timing",
        BenchMode::Ops => "ops",
        BenchMode::Liver => "liver",
    };
    let mut row = |method: &str, terms: usize, dt: f64, seconds: f64, ops: u64| {
        t.push(vec![mode.into(), method.into(), terms.to_string(), sci(dt), sci(seconds), ops.to_string()]);
    };
    match a.mode {
        BenchMode::PolyTiming | BenchMode::Ops => {
            let dts = match (a.dts.is_empty(), a.mode) {
                (false, _) => a.dts.clone(),
                (true, BenchMode::PolyTiming) => vec![1e-4, 5e-5, 1e-5],
                _ => vec![POLY_HORIZON / 1000.0, POLY_HORIZON / 2000.0, POLY_HORIZON / 4000.0],
            };
            let p = Polynomial::refinement_study();
            let series = fits(a.alpha, &a.terms, 10.0)?
                .iter()
                .map(|s| s.denormalize(POLY_HORIZON))
                .collect::<fracprony::Result<Vec<_>>>()?;
            let order = fracprony::caputo::FractionalOrder::new(a.alpha)?;
            for &dt in &dts {
                let f = SampleSeries::sample(UniformGrid::covering(POLY_HORIZON, dt)?, |t| p.eval(t))?;
                let mut methods = vec![PolyMethod::Mp];
                if a.mode == BenchMode::Ops {
                    methods.push(PolyMethod::Gl);
                }
                for m in methods {
                    say(&a.common, || format!("{} at dt {dt:e}", m.name()));
                    let o = m.apply(&f, order)?;
                    row(m.name(), 0, dt, o.cost, o.ops);
                }
                for s in &series {
                    let o = prony_derivative(&f, s)?;
                    row("prony", s.n_terms, dt, o.cost, o.ops);
                }
            }
        }
        BenchMode::Liver => {
            let dts = if a.dts.is_empty() { vec![1e-2, 1e-3, 1e-4] } else { a.dts.clone() };
            let model = LiverModel::default();
            let mut engines = vec![Engine::Gl];
            engines.extend(fits(model.alpha, &a.terms, 10.0)?.into_iter().map(Engine::Prony));
            for r in timing_matrix(&model, &engines, &dts, 2.0)? {
                row(&r.engine, r.terms, r.dt, r.seconds, r.ops);
            }
        }
    }
    t.emit(a.common.out.as_deref())?;
    Ok(true)
}
