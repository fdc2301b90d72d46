use criterion::{black_box, criterion_group, criterion_main, Criterion};
use helitrack_core::config::{ControllerConfig, ExperimentConfig};
use helitrack_core::control::Architecture;
use helitrack_core::errsys::{build_error_system, ErrorSystemSpec};
use helitrack_core::flatness::{flatness, DragModel};
use helitrack_core::invariant::{solve_rpi_with, BarrierSolver, RpiOptions};
use helitrack_core::plant::{WindModel, WindSpec};
use helitrack_core::reference::{Loiter, LoiterSpec, Trajectory};

fn rpi(c: &mut Criterion) {
    let mut g = c.benchmark_group("rpi");
    g.sample_size(10);
    for arch in [Architecture::Cg, Architecture::Cgh] {
        let mut spec = ErrorSystemSpec::new(arch);
        spec.planar = true;
        let sys = build_error_system(&spec).unwrap();
        g.bench_function(format!("planar_{}", arch.tag()), |b| {
            b.iter(|| solve_rpi_with(black_box(&sys), &RpiOptions::default(), &BarrierSolver::default()).unwrap())
        });
    }
    g.finish();
}

fn feedforward(c: &mut Criterion) {
    let traj = Loiter::new(LoiterSpec::default()).unwrap();
    let wind = WindModel::new(&WindSpec::default()).unwrap().mean();
    let drag = DragModel::default();
    c.bench_function("flatness_sample", |b| {
        let mut t = 0.0;
        b.iter(|| {
            t = (t + 0.013) % 60.0;
            flatness(&traj.sample(black_box(t)).unwrap(), &wind, &drag).unwrap()
        })
    });
}

fn closed_loop(c: &mut Criterion) {
    let mut cfg = ExperimentConfig::default();
    cfg.sim.duration_s = 5.0;
    let traj = cfg.trajectory().unwrap();
    let mut g = c.benchmark_group("simulate_5s");
    g.sample_size(10);
    for arch in Architecture::ALL {
        let cl = cfg.closed_loop(&traj, &ControllerConfig::preset(arch)).unwrap();
        g.bench_function(arch.tag(), |b| b.iter(|| cl.run().unwrap()));
    }
    g.finish();
}

criterion_group!(benches, rpi, feedforward, closed_loop);
criterion_main!(benches);
