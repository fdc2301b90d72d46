//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! nonzero when any fails.

use std::f64::consts::PI;
use std::time::Instant;

use helitrack_core::config::{ControllerConfig, ExperimentConfig};
use helitrack_core::control::{observer_step, Architecture, GainSet};
use helitrack_core::errsys::{
    attitude_disturbance_bound, build_error_system, drag_split, hull_distance, system_matrix, ErrorSystemSpec,
    Scheduling,
};
use helitrack_core::flatness::DragModel;
use helitrack_core::invariant::{
    default_tau2_grid, solve_rpi, solve_rpi_with, worst_case_vdot, BarrierSolver, PolytopicErrorSystem, RpiOptions,
    SdpResult,
};
use helitrack_core::linalg::norm2;
use helitrack_core::plant::Fidelity;
use helitrack_core::sim::SimTrace;
use helitrack_core::verify::{verify_table, AssumptionBounds, Verdict};
use nalgebra::{DMatrix, DVector, Matrix3, UnitQuaternion, Vector3, Vector4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Uniform direction from normalized Box-Muller normals.
fn unit(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    let z = DVector::from_fn(n, |_, _| {
        let (u1, u2): (f64, f64) = (1.0 - rng.gen::<f64>(), rng.gen());
        (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
    });
    &z / z.norm()
}

fn disturbance_bound() -> Outcome {
    let d = attitude_disturbance_bound(7f64.to_radians(), 16.0, 0.5);
    check((d - 2.4536).abs() <= 1e-3, format!("dbar = {d:.6}"))
}

fn drag_residual() -> Outcome {
    let drag = DragModel::default();
    let (dmax, gamma) = drag_split(&drag);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let q = UnitQuaternion::from_quaternion(Vector4::from_fn(|_, _| rng.gen_range(-1.0..1.0)).into());
        let r: Matrix3<f64> = q.to_rotation_matrix().into_inner();
        let m = drag.rotated(&r) - Matrix3::identity() * dmax;
        worst = worst.max(norm2(&DMatrix::from_fn(3, 3, |i, j| m[(i, j)])));
    }
    check(
        (gamma - 0.40).abs() <= 1e-12 && worst <= gamma + 1e-12,
        format!("gamma = {gamma}, max ||R D R' - d_max I|| = {worst:.12}"),
    )
}

fn scalar_oracle() -> Outcome {
    let mut detail = Vec::new();
    let mut ok = true;
    for dbar in [0.5, 1.0, 2.0] {
        let m = |v: f64| DMatrix::from_element(1, 1, v);
        let sys = PolytopicErrorSystem::new(vec![m(-1.0)], m(1.0), m(0.0), 0.0, dbar, vec!["x".into()])
            .map_err(|e| e.to_string())?;
        let r = solve_rpi(&sys, &default_tau2_grid(dbar), 1e-7).map_err(|e| e.to_string())?;
        let p = r.ellipsoid.p()[(0, 0)];
        let rel = (p * dbar * dbar - 1.0).abs();
        let mut vdot = f64::NEG_INFINITY;
        for s in [1.0, -1.0] {
            let x = DVector::from_element(1, s / p.sqrt());
            vdot = vdot.max(worst_case_vdot(&sys, &r.ellipsoid, &x, 0).map_err(|e| e.to_string())?);
        }
        ok &= rel <= 0.02 && vdot <= 1e-6;
        detail.push(format!("dbar {dbar}: P err {:.3}%, vdot {vdot:.1e}", 100.0 * rel));
    }
    check(ok, detail.join("; "))
}

fn synthesize(arch: Architecture) -> Result<(PolytopicErrorSystem, SdpResult), String> {
    let sys = build_error_system(&ErrorSystemSpec::new(arch)).map_err(|e| e.to_string())?;
    let r = solve_rpi_with(&sys, &RpiOptions::default(), &BarrierSolver::default())
        .map_err(|e| format!("{}: {e}", arch.name()))?;
    Ok((sys, r))
}

fn soundness(sets: &[(Architecture, PolytopicErrorSystem, SdpResult)]) -> Outcome {
    let mut detail = Vec::new();
    let mut ok = true;
    for (arch, sys, r) in sets {
        let set = &r.ellipsoid;
        let tol = 1e-6 * (1.0 + norm2(set.p()));
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut worst = f64::NEG_INFINITY;
        for _ in 0..10_000 {
            let x = set.boundary_point(&unit(&mut rng, set.dim()));
            for v in 0..sys.vertices().len() {
                worst = worst.max(worst_case_vdot(sys, set, &x, v).map_err(|e| e.to_string())?);
            }
        }
        ok &= worst <= tol;
        detail.push(format!("{} max vdot {worst:.2e} (tol {tol:.1e})", arch.name()));
    }
    check(ok, detail.join("; "))
}

fn hull_coverage() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut detail = Vec::new();
    let mut ok = true;
    for arch in [Architecture::Cgh, Architecture::Ch] {
        let spec = ErrorSystemSpec::new(arch);
        let sys = build_error_system(&spec).map_err(|e| e.to_string())?;
        let mut worst: f64 = 0.0;
        for _ in 0..10_000 {
            let sched = match arch {
                Architecture::Cgh => Scheduling::Heading(rng.gen_range(-PI..PI)),
                _ => Scheduling::YawRates {
                    psid: rng.gen_range(-spec.psid_max_rad_s..=spec.psid_max_rad_s),
                    psidd: rng.gen_range(-spec.psidd_max_rad_s2..=spec.psidd_max_rad_s2),
                },
            };
            let a = system_matrix(&spec, sched).map_err(|e| e.to_string())?;
            worst = worst.max(hull_distance(&a, sys.vertices()).map_err(|e| e.to_string())?);
        }
        ok &= worst <= 1e-8;
        detail.push(format!("{} max hull distance {worst:.1e}", arch.name()));
    }
    check(ok, detail.join("; "))
}

fn ordering(sets: &[(Architecture, PolytopicErrorSystem, SdpResult)]) -> Outcome {
    let b = |a: Architecture, i: usize| {
        sets.iter()
            .find(|s| s.0 == a)
            .unwrap()
            .2
            .ellipsoid
            .axis_bound(i)
            .unwrap()
    };
    let (cg, cgh, chx, chy) = (
        b(Architecture::Cg, 0),
        b(Architecture::Cgh, 0),
        b(Architecture::Ch, 0),
        b(Architecture::Ch, 1),
    );
    let (cg_y, cgh_y) = (b(Architecture::Cg, 1), b(Architecture::Cgh, 1));
    let ok = cg.max(cg_y) * 1.01 <= cgh.min(cgh_y) && chx >= 1.01 * cg.max(cgh) && chy * 1.01 <= cgh_y;
    check(
        ok,
        format!("C-G {cg:.3}/{cg_y:.3}, C-GH {cgh:.3}/{cgh_y:.3}, C-H {chx:.3}/{chy:.3} (x/y, m)"),
    )
}

fn run(c: &ExperimentConfig, arch: Architecture) -> Result<SimTrace, String> {
    let traj = c.trajectory().map_err(|e| e.to_string())?;
    c.closed_loop(&traj, &ControllerConfig::preset(arch))
        .and_then(|cl| cl.run())
        .map_err(|e| format!("{}: {e}", arch.name()))
}

fn exactness() -> Outcome {
    let mut detail = Vec::new();
    let mut ok = true;
    for mean in [[7.0, 0.0, 0.0], [0.0; 3]] {
        let mut c = ExperimentConfig::default();
        c.wind.mean_mps = mean;
        c.wind.gust_max_mps2 = 0.0;
        c.sim.injection_amplitude_rad = Some(0.0);
        let results: Vec<_> = std::thread::scope(|s| {
            let hs: Vec<_> = Architecture::ALL
                .iter()
                .map(|&a| {
                    s.spawn({
                        let c = &c;
                        move || run(c, a)
                    })
                })
                .collect();
            hs.into_iter().map(|h| h.join().unwrap()).collect()
        });
        for (arch, r) in Architecture::ALL.iter().zip(results) {
            let e = r?.summary().max_position_error_m;
            ok &= e <= 1e-3;
            detail.push(format!("{} wind {}: {e:.1e} m", arch.name(), mean[0]));
        }
    }
    check(ok, detail.join("; "))
}

fn fit_sinusoid(samples: &[(f64, f64)], w: f64) -> (f64, f64) {
    let (mut a, mut b) = (0.0, 0.0);
    for (t, y) in samples {
        a += y * (w * t).sin();
        b += y * (w * t).cos();
    }
    let n = samples.len() as f64;
    let (a, b) = (2.0 * a / n, 2.0 * b / n);
    (a.hypot(b), b.atan2(a))
}

fn observer() -> Outcome {
    let g = GainSet::preset(Architecture::Cg);
    let l = g.l()[(0, 0)];
    let dt = 0.002;
    let simulate = |d_int: &dyn Fn(f64) -> f64, t_end: f64| {
        let nominal = |t: f64| Vector3::new(0.5 * (0.7 * t).sin(), -0.2, 0.1);
        let nominal_int = |t: f64| Vector3::new(0.5 * (1.0 - (0.7 * t).cos()) / 0.7, -0.2 * t, 0.1 * t);
        let v = |t: f64| Vector3::new(2.0 + d_int(t), -1.0, 0.5) + nominal_int(t);
        let mut z = -g.l() * v(0.0);
        let n = (t_end / dt).round() as usize;
        let mut out = Vec::with_capacity(n);
        for k in 0..n {
            let t = k as f64 * dt;
            z = observer_step(&g, &z, t, dt, |s| (v(s), nominal(s)));
            out.push((t + dt, (z + g.l() * v(t + dt)).x));
        }
        out
    };
    let d0 = 1.3;
    let step = simulate(&|t| d0 * t, 5.0);
    let step_err = step
        .iter()
        .map(|(t, y)| (y - d0 * (1.0 - (-l * t).exp())).abs() / d0)
        .fold(0.0, f64::max);
    let mut ok = step_err <= 0.01;
    let mut detail = vec![format!("constant: max rel err {step_err:.1e}")];
    for w in [0.5 * l, l, 3.0 * l] {
        let period = 2.0 * PI / w;
        let t_end = 20.0 / l + 10.0 * period;
        let out = simulate(&|t| (1.0 - (w * t).cos()) / w, t_end);
        let tail: Vec<(f64, f64)> = out.into_iter().filter(|(t, _)| *t > t_end - 5.0 * period).collect();
        let (amp, phase) = fit_sinusoid(&tail, w);
        let (amp_want, phase_want) = (l / (l * l + w * w).sqrt(), -(w / l).atan());
        let (ea, ep) = ((amp / amp_want - 1.0).abs(), (phase - phase_want).abs().to_degrees());
        ok &= ea <= 0.01 && ep <= 1.0;
        detail.push(format!(
            "w = {:.1}L: amp err {:.2}%, phase err {ep:.3} deg",
            w / l,
            100.0 * ea
        ));
    }
    check(ok, detail.join("; "))
}

fn headline(sets: &[(Architecture, PolytopicErrorSystem, SdpResult)]) -> Outcome {
    let jobs: Vec<(Architecture, Fidelity)> = [Fidelity::A, Fidelity::B]
        .iter()
        .flat_map(|&f| Architecture::ALL.iter().map(move |&a| (a, f)))
        .collect();
    let results: Vec<_> = std::thread::scope(|s| {
        let hs: Vec<_> = jobs
            .iter()
            .map(|&(a, f)| {
                s.spawn(move || {
                    let mut c = ExperimentConfig::default();
                    c.sim.fidelity = f;
                    run(&c, a).map(|t| (t.to_table(), c))
                })
            })
            .collect();
        hs.into_iter().map(|h| h.join().unwrap()).collect()
    });
    let mut detail = Vec::new();
    let mut ok = true;
    for ((arch, fid), r) in jobs.iter().zip(results) {
        let (table, c) = r?;
        let set = &sets.iter().find(|s| s.0 == *arch).unwrap().2.ellipsoid;
        let bounds = AssumptionBounds::from(&c.error_spec(&ControllerConfig::preset(*arch)));
        let rep = verify_table(&table, set, &bounds).map_err(|e| e.to_string())?;
        ok &= rep.verdict == Verdict::Pass && rep.t_entry_s == Some(0.0);
        detail.push(format!(
            "{}/{}: {:?} max level {:.3}",
            arch.name(),
            fid.tag(),
            rep.verdict,
            rep.max_level
        ));
    }
    check(ok, detail.join("; "))
}

fn restatement() -> Outcome {
    let mut c = ExperimentConfig::default();
    c.sim.duration_s = 30.0;
    c.sim.shadow = true;
    c.sim.initial_offset_m = [0.5, -0.5, 0.2];
    let results: Vec<_> = std::thread::scope(|s| {
        let hs: Vec<_> = Architecture::ALL
            .iter()
            .map(|&a| {
                s.spawn({
                    let c = &c;
                    move || run(c, a)
                })
            })
            .collect();
        hs.into_iter().map(|h| h.join().unwrap()).collect()
    });
    let mut detail = Vec::new();
    let mut ok = true;
    for (arch, r) in Architecture::ALL.iter().zip(results) {
        let t = r?;
        let dev = t
            .samples
            .iter()
            .map(|s| (&s.error - s.shadow.as_ref().unwrap()).amax())
            .fold(0.0, f64::max);
        ok &= dev <= 1e-6;
        detail.push(format!("{} max deviation {dev:.1e}", arch.name()));
    }
    check(ok, detail.join("; "))
}

fn report(n: usize, name: &str, limit_s: f64, f: impl FnOnce() -> Outcome) -> bool {
    let t0 = Instant::now();
    let out = f();
    let dt = t0.elapsed().as_secs_f64();
    let (status, detail) = match &out {
        Ok(d) => ("PASS", d),
        Err(d) => ("FAIL", d),
    };
    let slow = if dt > limit_s {
        format!(" [over {limit_s} s budget]")
    } else {
        String::new()
    };
    println!("criterion {n:>2} {status} {name} ({dt:.1} s){slow}: {detail}");
    out.is_ok()
}

fn main() {
    let mut ok = true;
    ok &= report(1, "disturbance bound", 1.0, disturbance_bound);
    ok &= report(2, "drag residual", 1.0, drag_residual);
    ok &= report(3, "analytic RPI oracle", 10.0, scalar_oracle);

    let t0 = Instant::now();
    let synth: Vec<_> = std::thread::scope(|s| {
        let hs: Vec<_> = Architecture::ALL
            .iter()
            .map(|&a| (a, s.spawn(move || synthesize(a))))
            .collect();
        hs.into_iter().map(|(a, h)| (a, h.join().unwrap())).collect()
    });
    let synth_s = t0.elapsed().as_secs_f64();
    let mut sets = Vec::new();
    let mut failed = Vec::new();
    for (a, r) in synth {
        match r {
            Ok((sys, res)) => sets.push((a, sys, res)),
            Err(e) => failed.push(e),
        }
    }
    let synth_err = |failed: &[String]| -> Outcome { Err(format!("synthesis failed: {}", failed.join("; "))) };
    let have_sets = failed.is_empty();
    ok &= report(4, "certificate soundness", 120.0 - synth_s, || {
        if have_sets {
            soundness(&sets)
        } else {
            synth_err(&failed)
        }
    });
    ok &= report(5, "hull coverage", 60.0, hull_coverage);
    ok &= report(6, "set ordering", 1.0, || {
        if have_sets {
            ordering(&sets)
        } else {
            synth_err(&failed)
        }
    });
    ok &= report(7, "flatness exactness", 30.0, exactness);
    ok &= report(8, "observer law", 5.0, observer);
    ok &= report(9, "bounds respected on the loiter", 300.0, || {
        if have_sets {
            headline(&sets)
        } else {
            synth_err(&failed)
        }
    });
    ok &= report(10, "exact restatement", 60.0, restatement);
    println!("synthesis of the three 3-D sets: {synth_s:.1} s");
    if !ok {
        std::process::exit(1);
    }
}
