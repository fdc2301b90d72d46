use std::path::{Path, PathBuf};

use helitrack_core::control::Architecture;
use helitrack_core::errsys::build_error_system;
use helitrack_core::invariant::{solve_rpi_with, BarrierSolver, Ellipsoid, EllipsoidJson, RpiOptions, SdpResult};
use helitrack_core::io::{write_atomic, write_json};
use helitrack_core::plot::{fig_errors, fig_path, fig_projections, fig_timeseries, figure_csv, render_svg, Panel};
use helitrack_core::sim::TraceTable;
use helitrack_core::verify::{levels, verify_table, AssumptionBounds, Verdict};
use helitrack_core::{Error, Result};
use serde_json::{json, Value};

use crate::Context;

fn rpi_path(ctx: &Context, a: Architecture) -> PathBuf {
    ctx.out.join(format!("rpi_{}.json", a.tag()))
}

fn run_name(ctx: &Context, a: Architecture) -> String {
    format!("{}_{}", a.tag(), ctx.config.sim.fidelity.tag())
}

fn trace_path(ctx: &Context, a: Architecture) -> PathBuf {
    ctx.out.join(format!("trace_{}.csv", run_name(ctx, a)))
}

pub fn load_ellipsoid(path: &Path) -> Result<Ellipsoid> {
    let text = std::fs::read_to_string(path).map_err(|e| missing(path, e))?;
    let j: EllipsoidJson = serde_json::from_str(&text)?;
    Ellipsoid::from_json(&j)
}

fn load_trace(path: &Path) -> Result<TraceTable> {
    TraceTable::read_csv(&std::fs::read_to_string(path).map_err(|e| missing(path, e))?)
}

fn missing(path: &Path, e: std::io::Error) -> Error {
    Error::InvalidParameter(format!("cannot read artifact {}: {e}", path.display()))
}

/// Runs `f` for every selected architecture on its own thread, keeping order.
fn per_arch<T: Send>(ctx: &Context, f: impl Fn(Architecture) -> T + Sync) -> Vec<(Architecture, T)> {
    std::thread::scope(|s| {
        let handles: Vec<_> = ctx
            .archs
            .iter()
            .map(|&a| {
                let f = &f;
                (a, s.spawn(move || f(a)))
            })
            .collect();
        handles
            .into_iter()
            .map(|(a, h)| (a, h.join().expect("worker panicked")))
            .collect()
    })
}

fn synth_one(ctx: &Context, a: Architecture) -> Result<(SdpResult, Value)> {
    let c = ctx
        .config
        .controller(a)
        .cloned()
        .unwrap_or_else(|| helitrack_core::config::ControllerConfig::preset(a));
    let spec = ctx.config.error_spec(&c);
    let sys = build_error_system(&spec)?;
    let res = solve_rpi_with(&sys, &RpiOptions::default(), &BarrierSolver::default())?;
    let set = &res.ellipsoid;
    let axes = spec.axes();
    let tag = a.tag();
    write_json(&rpi_path(ctx, a), &res.to_json())?;
    write_json(&ctx.out.join(format!("errsys_{tag}.json")), &sys.to_json())?;
    let pos: Vec<usize> = (0..axes).collect();
    write_json(
        &ctx.out.join(format!("rpi_{tag}_pos.json")),
        &set.project(&pos)?.to_json(),
    )?;
    write_json(
        &ctx.out.join(format!("rpi_{tag}_posvel.json")),
        &set.project(&[0, axes])?.to_json(),
    )?;
    let mut buffers = serde_json::Map::new();
    for i in 0..axes {
        buffers.insert(set.labels()[i].clone(), json!(set.axis_bound(i)?));
    }
    let row = json!({
        "architecture": tag,
        "planar": spec.planar,
        "dbar_mps2": spec.dbar(),
        "gamma": spec.gamma(),
        "vertices": sys.vertices().len(),
        "buffers_m": buffers,
        "tau1": res.tau1,
        "tau2": res.tau2,
        "objective": res.objective,
        "residual": res.residual,
    });
    Ok((res, row))
}

pub fn synth(ctx: &Context) -> Result<u8> {
    let results = per_arch(ctx, |a| synth_one(ctx, a));
    let mut rows = Vec::new();
    let mut code = 0;
    println!(
        "{:<6} {:>24} {:>10} {:>10} {:>12} {:>10}",
        "arch", "position buffers (m)", "tau1", "tau2", "objective", "residual"
    );
    for (a, r) in results {
        match r {
            Ok((res, row)) => {
                let buf: Vec<String> = row["buffers_m"]
                    .as_object()
                    .unwrap()
                    .values()
                    .map(|v| format!("{:.3}", v.as_f64().unwrap()))
                    .collect();
                println!(
                    "{:<6} {:>24} {:>10.4} {:>10.4} {:>12.4} {:>10.2e}",
                    a.name(),
                    buf.join(" "),
                    res.tau1,
                    res.tau2,
                    res.objective,
                    res.residual
                );
                rows.push(row);
            }
            Err(e) => {
                eprintln!("{}: synthesis failed: {e}", a.name());
                if let Error::NoRpiFound { residuals, .. } = &e {
                    for (t, r) in residuals {
                        eprintln!("  tau2 {t:.6e}  max vertex eigenvalue {r:.3e}");
                    }
                }
                code = code.max(crate::error_code(&e));
                rows.push(json!({ "architecture": a.tag(), "error": e.to_string() }));
            }
        }
    }
    write_json(&ctx.out.join("synth_summary.json"), &rows)?;
    Ok(code)
}

pub fn simulate(ctx: &Context) -> Result<u8> {
    let sets: Vec<(Architecture, Ellipsoid)> = Architecture::ALL
        .iter()
        .filter_map(|&a| load_ellipsoid(&rpi_path(ctx, a)).ok().map(|s| (a, s)))
        .collect();
    let traj = ctx.config.trajectory()?;
    let results = per_arch(ctx, |a| -> Result<()> {
        let c = ctx
            .config
            .controller(a)
            .cloned()
            .unwrap_or_else(|| helitrack_core::config::ControllerConfig::preset(a));
        let trace = ctx.config.closed_loop(&traj, &c)?.run()?;
        let mut table = trace.to_table();
        let mut max_levels = serde_json::Map::new();
        for (sa, set) in &sets {
            if let Ok(lv) = levels(&table, set) {
                table.columns.push(format!("level_{}", sa.tag()));
                for (row, l) in table.rows.iter_mut().zip(&lv) {
                    row.push(*l);
                }
                max_levels.insert(sa.tag().into(), json!(lv.iter().copied().fold(0.0, f64::max)));
            }
        }
        helitrack_core::io::write_with(&trace_path(ctx, a), |w| table.write_csv(w))?;
        let summary = trace.summary();
        println!(
            "{:<6} fidelity {}: max |e_p| {:.4} m, tilt {:.3} deg, thrust {:.3}, |d| {:.3}, gust clip rate {:.4}",
            a.name(),
            ctx.config.sim.fidelity.tag(),
            summary.max_position_error_m,
            summary.max_tilt_deg,
            summary.max_thrust_mps2,
            summary.max_d_mps2,
            summary.wind_clip_rate
        );
        let doc = json!({
            "summary": summary,
            "seed": ctx.config.wind.seed,
            "dt_s": ctx.config.sim.dt_s,
            "max_levels": max_levels,
        });
        write_json(&ctx.out.join(format!("sim_{}.json", run_name(ctx, a))), &doc)
    });
    for (_, r) in results {
        r?;
    }
    Ok(0)
}

pub fn verify(ctx: &Context, trace: Option<&Path>, ellipsoid: Option<&Path>) -> Result<u8> {
    if (trace.is_some() || ellipsoid.is_some()) && ctx.archs.len() != 1 {
        return Err(Error::InvalidParameter(
            "--trace and --ellipsoid need a single --arch".into(),
        ));
    }
    let mut worst = Verdict::Pass;
    for &a in &ctx.archs {
        let tp = trace.map_or_else(|| trace_path(ctx, a), Path::to_path_buf);
        let sp = ellipsoid.map_or_else(|| rpi_path(ctx, a), Path::to_path_buf);
        let table = load_trace(&tp)?;
        let set = load_ellipsoid(&sp)?;
        let c = ctx
            .config
            .controller(a)
            .cloned()
            .unwrap_or_else(|| helitrack_core::config::ControllerConfig::preset(a));
        let bounds = AssumptionBounds::from(&ctx.config.error_spec(&c));
        let report = verify_table(&table, &set, &bounds)?;
        println!("{} ({}):\n{}", a.name(), tp.display(), report.summary());
        let doc = json!({
            "architecture": a.tag(),
            "trace": tp.display().to_string(),
            "set": sp.display().to_string(),
            "bounds": bounds,
            "report": report,
        });
        write_json(&ctx.out.join(format!("report_{}.json", run_name(ctx, a))), &doc)?;
        worst = worst.worst(report.verdict);
    }
    Ok(worst.exit_code() as u8)
}

fn emit(ctx: &Context, name: &str, panels: &[Panel], cols: usize) -> Result<()> {
    let f = &ctx.config.outputs;
    if f.wants("svg") {
        write_atomic(
            &ctx.out.join(format!("{name}.svg")),
            render_svg(panels, cols).as_bytes(),
        )?;
    }
    if f.wants("csv") {
        write_atomic(&ctx.out.join(format!("{name}.csv")), figure_csv(panels).as_bytes())?;
    }
    Ok(())
}

pub fn plot(ctx: &Context) -> Result<u8> {
    let mut sets = Vec::new();
    for &a in &ctx.archs {
        sets.push((a, load_ellipsoid(&rpi_path(ctx, a))?));
    }
    let named: Vec<(String, Ellipsoid)> = sets.iter().map(|(a, s)| (a.name().to_string(), s.clone())).collect();
    emit(ctx, "fig_projections", &fig_projections(&named)?, 2)?;
    for (a, set) in &sets {
        let tp = trace_path(ctx, *a);
        if !tp.exists() {
            eprintln!("{}: no trace at {}, skipping trace figures", a.name(), tp.display());
            continue;
        }
        let table = load_trace(&tp)?;
        let run = run_name(ctx, *a);
        emit(ctx, &format!("fig_path_{run}"), &[fig_path(&table, set, 8)?], 1)?;
        emit(
            ctx,
            &format!("fig_errors_{run}"),
            &[fig_errors(&table, set, a.name())?],
            1,
        )?;
        emit(ctx, &format!("fig_timeseries_{run}"), &fig_timeseries(&table)?, 2)?;
    }
    Ok(0)
}
