use helitrack_core::reference::*;
use nalgebra::Vector3;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn loiter() -> Loiter {
    Loiter::new(LoiterSpec::default()).unwrap()
}

fn close(a: &Vector3<f64>, b: &Vector3<f64>, rel: f64) -> bool {
    (a - b).norm() <= rel * b.norm().max(1.0)
}

#[test]
fn steady_loiter_kinematics() {
    let l = loiter();
    for t in [10.0, 23.7, 59.9] {
        let s = l.sample(t).unwrap();
        assert!((s.a.norm() - 7.5).abs() < 1e-12, "{}", s.a.norm());
        assert!((s.psid - 0.5).abs() < 1e-15);
        assert!(s.psidd.abs() < 1e-15);
        assert!((s.v.norm() - 15.0).abs() < 1e-12);
        let r = (s.p - l.center()).norm();
        assert!((r - 30.0).abs() <= 1e-9 * 30.0);
    }
}

#[test]
fn entry_starts_along_track_at_rest_acceleration() {
    let spec = LoiterSpec {
        entry_heading_rad: 0.3,
        ..LoiterSpec::default()
    };
    let s = Loiter::new(spec).unwrap().sample(0.0).unwrap();
    let along = Vector3::new(0.3f64.cos(), 0.3f64.sin(), 0.0) * spec.entry_speed_mps;
    assert!((s.v - along).norm() < 1e-14);
    assert_eq!(s.a, Vector3::zeros());
    assert_eq!(s.j, Vector3::zeros());
    assert_eq!(s.s, Vector3::zeros());
}

#[test]
fn derivatives_match_central_differences() {
    let l = loiter();
    let h = 1e-4;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..100 {
        let t = rng.gen_range(h..60.0 - h);
        let (m, c, p) = (l.sample(t - h).unwrap(), l.sample(t).unwrap(), l.sample(t + h).unwrap());
        let fd = |a: Vector3<f64>, b: Vector3<f64>| (b - a) / (2.0 * h);
        assert!(close(&fd(m.p, p.p), &c.v, 1e-5), "v at {t}");
        assert!(close(&fd(m.v, p.v), &c.a, 1e-5), "a at {t}");
        assert!(close(&fd(m.a, p.a), &c.j, 1e-5), "j at {t}");
        assert!(close(&fd(m.j, p.j), &c.s, 1e-5), "s at {t}");
        assert!(((p.psi - m.psi) / (2.0 * h) - c.psid).abs() < 1e-5);
        assert!(((p.psid - m.psid) / (2.0 * h) - c.psidd).abs() < 1e-5);
    }
}

#[test]
fn junction_is_smooth() {
    let l = loiter();
    let te = l.spec().entry_duration_s;
    let h = 1e-3;
    let (a, b) = (l.sample(te - 1e-9).unwrap(), l.sample(te).unwrap());
    for (x, y) in [(a.p, b.p), (a.v, b.v), (a.a, b.a), (a.j, b.j), (a.s, b.s)] {
        assert!((x - y).norm() < 1e-6);
    }
    assert!((a.psi - b.psi).abs() < 1e-6 && (a.psid - b.psid).abs() < 1e-6 && (a.psidd - b.psidd).abs() < 1e-6);
    // one-sided second differences of snap agree across the joint
    let left = (l.sample(te).unwrap().s - l.sample(te - h).unwrap().s) / h;
    let right = (l.sample(te + h).unwrap().s - l.sample(te).unwrap().s) / h;
    assert!((left - right).norm() < 1e-2);
}

#[test]
fn heading_rates_stay_within_loiter_bounds() {
    let l = loiter();
    let samples = sample_uniform(&l, 0.01).unwrap();
    let max_rate = samples.iter().map(|s| s.psid.abs()).fold(0.0, f64::max);
    let max_acc = samples.iter().map(|s| s.psidd.abs()).fold(0.0, f64::max);
    assert!(max_rate <= 0.5);
    assert!(max_acc <= 0.5, "{max_acc}");
}

#[test]
fn yaw_examples() {
    let (psi, psid, psidd) = yaw_from_velocity(
        &Vector3::new(1.0, 0.0, 0.0),
        &Vector3::new(0.0, 1.0, 0.0),
        &Vector3::zeros(),
    )
    .unwrap();
    assert_eq!((psi, psid), (0.0, 1.0));
    assert_eq!(psidd, 0.0);
    assert!(matches!(
        yaw_from_velocity(&Vector3::new(0.05, 0.05, 3.0), &Vector3::zeros(), &Vector3::zeros()),
        Err(helitrack_core::Error::SpeedTooLow { .. })
    ));
}

#[test]
fn yaw_from_velocity_agrees_with_track_heading() {
    let l = loiter();
    let mut unwrap = YawUnwrapper::starting_at(l.sample(0.0).unwrap().psi);
    for k in 0..6000 {
        let s = l.sample(k as f64 * 0.01).unwrap();
        let (psi, psid, psidd) = yaw_from_velocity(&s.v, &s.a, &s.j).unwrap();
        assert!((unwrap.unwrap(psi) - s.psi).abs() < 1e-9);
        assert!((psid - s.psid).abs() < 1e-12);
        assert!((psidd - s.psidd).abs() < 1e-12);
    }
}

#[test]
fn yaw_derivatives_match_finite_differences_of_wrapped_angle() {
    let l = loiter();
    let h = 1e-4;
    let yaw = |t: f64| {
        let s = l.sample(t).unwrap();
        yaw_from_velocity(&s.v, &s.a, &s.j).unwrap()
    };
    for t in [1.0, 4.0, 7.9, 12.0, 40.0] {
        let (m, c, p) = (yaw(t - h), yaw(t), yaw(t + h));
        let dpsi = helitrack_core::linalg::wrap_angle(p.0 - m.0) / (2.0 * h);
        assert!((dpsi - c.1).abs() < 1e-5);
        assert!(((p.1 - m.1) / (2.0 * h) - c.2).abs() < 1e-5);
    }
}

#[test]
fn csv_has_documented_columns() {
    let l = loiter();
    let mut buf = Vec::new();
    write_trajectory_csv(&mut buf, &[l.sample(0.0).unwrap(), l.sample(1.0).unwrap()]).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<_> = text.lines().collect();
    assert_eq!(lines.len(), 3);
    assert_eq!(lines[0].split(',').count(), 19);
    assert!(lines[1..].iter().all(|l| l.split(',').count() == 19));
}

#[test]
fn invalid_specs_are_rejected() {
    for bad in [
        LoiterSpec {
            radius_m: 0.0,
            ..LoiterSpec::default()
        },
        LoiterSpec {
            speed_mps: -1.0,
            ..LoiterSpec::default()
        },
        LoiterSpec {
            entry_duration_s: 0.0,
            ..LoiterSpec::default()
        },
        LoiterSpec {
            entry_speed_mps: 0.0,
            ..LoiterSpec::default()
        },
    ] {
        assert!(Loiter::new(bad).is_err());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn steady_phase_stays_on_circle(radius in 5.0..80.0f64, speed in 2.0..20.0f64, frac in 0.0..1.0f64) {
        let spec = LoiterSpec { radius_m: radius, speed_mps: speed, ..LoiterSpec::default() };
        let l = Loiter::new(spec).unwrap();
        let t = spec.entry_duration_s + frac * (spec.total_duration_s - spec.entry_duration_s);
        let s = l.sample(t).unwrap();
        prop_assert!(((s.p - l.center()).norm() - radius).abs() <= 1e-9 * radius);
        prop_assert!((s.v.norm() - speed).abs() <= 1e-12 * speed.max(1.0));
        prop_assert!((s.psid - speed / radius).abs() <= 1e-12);
    }

    #[test]
    fn turn_rate_is_monotone_during_entry(t in 0.0..8.0f64, dt in 0.0..0.5f64) {
        let l = loiter();
        let a = l.sample(t).unwrap();
        let b = l.sample((t + dt).min(60.0)).unwrap();
        prop_assert!(b.psid >= a.psid - 1e-15);
        prop_assert!(a.psid >= 0.0 && a.psid <= 0.5);
    }
}
