use helitrack_core::control::Architecture;
use helitrack_core::errsys::*;
use helitrack_core::flatness::DragModel;
use helitrack_core::invariant::assemble_lmi_block;
use helitrack_core::linalg::{euler_to_rot, norm2, skew_z};
use nalgebra::{DMatrix, DVector, Matrix3};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn disturbance_bound_examples() {
    let d = attitude_disturbance_bound(7f64.to_radians(), 16.0, 0.5);
    assert!((d - 2.4536).abs() < 1e-3);
    assert!((d - 2.5).abs() < 0.05);
    assert_eq!(attitude_disturbance_bound(0.0, 3.0, 0.7), 0.7);
    assert!((attitude_disturbance_bound(std::f64::consts::PI, 1.0, 0.0) - 2.0).abs() < 1e-15);
    assert!(attitude_disturbance_bound(8f64.to_radians(), 16.0, 0.5) > d);
    assert!(attitude_disturbance_bound(7f64.to_radians(), 17.0, 0.5) > d);
}

#[test]
fn drag_split_examples() {
    let (dmax, gamma) = drag_split(&DragModel::default());
    assert_eq!(dmax, -0.05);
    assert!((gamma - 0.40).abs() < 1e-12);
    let (dmax, gamma) = drag_split(&DragModel::new([-0.2; 3]).unwrap());
    assert_eq!((dmax, gamma), (-0.2, 0.0));
}

proptest! {
    #[test]
    fn drag_residual_is_bounded_by_gamma(phi in -3.2..3.2f64, theta in -1.5..1.5f64, psi in -3.2..3.2f64) {
        let drag = DragModel::default();
        let (dmax, gamma) = drag_split(&drag);
        let r = euler_to_rot(phi, theta, psi);
        let res = DMatrix::from_column_slice(3, 3, (drag.rotated(&r) - Matrix3::identity() * dmax).as_slice());
        prop_assert!(norm2(&res) <= gamma + 1e-12);
    }
}

#[test]
fn cg_system_shape() {
    let spec = ErrorSystemSpec::new(Architecture::Cg);
    let sys = build_error_system(&spec).unwrap();
    assert_eq!(sys.vertices().len(), 1);
    assert_eq!(sys.dim(), 15);
    assert!(sys.vertices()[0].complex_eigenvalues().iter().all(|l| l.re < 0.0));
    let p = DMatrix::identity(15, 15);
    let blk = assemble_lmi_block(
        &sys.vertices()[0],
        &p,
        1.0,
        1.0,
        sys.e(),
        sys.c(),
        sys.gamma(),
        sys.dbar(),
    )
    .unwrap();
    assert_eq!(blk.shape(), (21, 21));
    assert!((sys.dbar() - 2.4536).abs() < 1e-3);
    assert!((sys.gamma() - 0.4).abs() < 1e-12);
    assert_eq!(sys.labels()[3], "e_v_x");
    // x/y swap and three sign flips
    assert_eq!(sys.symmetries().len(), 4);
}

#[test]
fn planar_and_override() {
    let mut spec = ErrorSystemSpec::new(Architecture::Cgh);
    spec.planar = true;
    spec.dbar_override_mps2 = Some(2.5);
    let sys = build_error_system(&spec).unwrap();
    assert_eq!(sys.dim(), 10);
    assert_eq!(sys.vertices().len(), 4);
    assert_eq!(sys.dbar(), 2.5);
    spec.two_vertex_cgh = true;
    assert_eq!(build_error_system(&spec).unwrap().vertices().len(), 2);
}

#[test]
fn invalid_specs() {
    let mut spec = ErrorSystemSpec::new(Architecture::Cg);
    spec.delta_max_rad = 0.0;
    assert!(build_error_system(&spec).is_err());
    let mut spec = ErrorSystemSpec::new(Architecture::Ch);
    spec.w_max_mps2 = -1.0;
    assert!(build_error_system(&spec).is_err());
}

#[test]
fn unstable_gains_are_rejected() {
    let mut spec = ErrorSystemSpec::new(Architecture::Cg);
    // a tiny velocity gain with a large position gain destabilizes the loop
    spec.gains.kv_per_s = [1e-3; 3];
    spec.gains.kp_per_s2 = [50.0; 3];
    let err = build_error_system(&spec).unwrap_err();
    assert!(
        matches!(err, helitrack_core::Error::NotHurwitz { vertex: 0, .. }),
        "{err}"
    );
}

#[test]
fn cgh_hull_covers_every_heading() {
    let spec = ErrorSystemSpec::new(Architecture::Cgh);
    let sys = build_error_system(&spec).unwrap();
    let a0 = system_matrix(&spec, Scheduling::Heading(0.0)).unwrap();
    assert!(hull_distance(&a0, sys.vertices()).unwrap() <= 1e-8);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..100 {
        let a = system_matrix(&spec, Scheduling::Heading(rng.gen_range(-4.0..4.0))).unwrap();
        assert!(hull_distance(&a, sys.vertices()).unwrap() <= 1e-8);
    }
}

#[test]
fn two_vertex_hull_misses_rotated_gains() {
    let mut spec = ErrorSystemSpec::new(Architecture::Cgh);
    spec.two_vertex_cgh = true;
    let sys = build_error_system(&spec).unwrap();
    let a = system_matrix(&spec, Scheduling::Heading(std::f64::consts::FRAC_PI_4)).unwrap();
    assert!(hull_distance(&a, sys.vertices()).unwrap() > 1e-3);
}

#[test]
fn ch_hull_covers_yaw_rates() {
    let spec = ErrorSystemSpec::new(Architecture::Ch);
    let sys = build_error_system(&spec).unwrap();
    assert_eq!(sys.vertices().len(), 8);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..100 {
        let s = Scheduling::YawRates {
            psid: rng.gen_range(-0.5..0.5),
            psidd: rng.gen_range(-0.5..0.5),
        };
        assert!(hull_distance(&system_matrix(&spec, s).unwrap(), sys.vertices()).unwrap() <= 1e-8);
    }
    let outside = Scheduling::YawRates { psid: 0.0, psidd: 0.9 };
    assert!(hull_distance(&system_matrix(&spec, outside).unwrap(), sys.vertices()).unwrap() > 1e-3);
}

#[test]
fn ch_collapses_without_yaw_motion() {
    let mut spec = ErrorSystemSpec::new(Architecture::Ch);
    spec.psid_max_rad_s = 0.0;
    spec.psidd_max_rad_s2 = 0.0;
    let sys = build_error_system(&spec).unwrap();
    assert_eq!(sys.vertices().len(), 1);
    assert_eq!(sys.c().nrows(), 3);
    let a = system_matrix(&spec, Scheduling::YawRates { psid: 0.0, psidd: 0.0 }).unwrap();
    assert_eq!(a, sys.vertices()[0]);
}

#[test]
fn ch_output_bounds_true_velocity_error() {
    let spec = ErrorSystemSpec::new(Architecture::Ch);
    let sys = build_error_system(&spec).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..1000 {
        let x = DVector::from_fn(15, |_, _| rng.gen_range(-1.0..1.0));
        let s = skew_z(rng.gen_range(-0.5..0.5));
        let ev = x.rows(3, 3) + s * x.rows(0, 3);
        assert!(ev.norm() <= (sys.c() * &x).norm() + 1e-12);
    }
}

fn rand_delta(rng: &mut ChaCha8Rng, gamma: f64, k: usize) -> DMatrix<f64> {
    let m = DMatrix::from_fn(k, k, |_, _| rng.gen_range(-1.0..1.0));
    let n = norm2(&m);
    m * (gamma * rng.gen_range(0.0..1.0) / n)
}

#[test]
fn vector_field_examples() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let spec = ErrorSystemSpec::new(Architecture::Cg);
    let sys = build_error_system(&spec).unwrap();
    let z = DVector::zeros(15);
    let f0 = closed_loop_vector_field(&spec, &z, &DVector::zeros(3), &DMatrix::zeros(3, 3), Scheduling::None).unwrap();
    assert_eq!(f0, z);
    for _ in 0..20 {
        let x = DVector::from_fn(15, |_, _| rng.gen_range(-1.0..1.0));
        let d = DVector::from_fn(3, |_, _| rng.gen_range(-1.0..1.0));
        let delta = rand_delta(&mut rng, sys.gamma(), 3);
        let f = closed_loop_vector_field(&spec, &x, &d, &delta, Scheduling::None).unwrap();
        let want = &sys.vertices()[0] * &x + sys.e() * (&delta * (sys.c() * &x) + &d);
        assert!((f - want).norm() < 1e-13);
    }
}

#[test]
fn cgh_vector_field_interpolates_vertices() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let spec = ErrorSystemSpec::new(Architecture::Cgh);
    let sys = build_error_system(&spec).unwrap();
    for _ in 0..50 {
        let psi: f64 = rng.gen_range(-4.0..4.0);
        let (s, c) = psi.sin_cos();
        let (u, w) = (c * c, c * s);
        // vertices are ordered (u, w) = (0, -1/2), (0, 1/2), (1, -1/2), (1, 1/2)
        let lam = [
            (1.0 - u) * (0.5 - w),
            (1.0 - u) * (0.5 + w),
            u * (0.5 - w),
            u * (0.5 + w),
        ];
        let x = DVector::from_fn(15, |_, _| rng.gen_range(-1.0..1.0));
        let d = DVector::from_fn(3, |_, _| rng.gen_range(-1.0..1.0));
        let delta = rand_delta(&mut rng, sys.gamma(), 3);
        let f = closed_loop_vector_field(&spec, &x, &d, &delta, Scheduling::Heading(psi)).unwrap();
        let mut want = sys.e() * (&delta * (sys.c() * &x) + &d);
        for (l, a) in lam.iter().zip(sys.vertices()) {
            want += a * &x * *l;
        }
        assert!((f - want).norm() < 1e-9);
    }
}

#[test]
fn vector_field_rejects_out_of_range_inputs() {
    let spec = ErrorSystemSpec::new(Architecture::Ch);
    let x = DVector::zeros(15);
    let ok = Scheduling::YawRates { psid: 0.1, psidd: 0.1 };
    let big_d = DVector::from_element(3, 2.0);
    assert!(closed_loop_vector_field(&spec, &x, &big_d, &DMatrix::zeros(3, 3), ok).is_err());
    let big_delta = DMatrix::identity(3, 3) * 0.5;
    assert!(closed_loop_vector_field(&spec, &x, &DVector::zeros(3), &big_delta, ok).is_err());
    let fast = Scheduling::YawRates { psid: 0.7, psidd: 0.0 };
    assert!(closed_loop_vector_field(&spec, &x, &DVector::zeros(3), &DMatrix::zeros(3, 3), fast).is_err());
    assert!(closed_loop_vector_field(&spec, &x, &DVector::zeros(3), &DMatrix::zeros(3, 3), Scheduling::None).is_err());
}

#[test]
fn error_system_json_export() {
    let mut spec = ErrorSystemSpec::new(Architecture::Ch);
    spec.planar = true;
    let sys = build_error_system(&spec).unwrap();
    let j = serde_json::to_value(sys.to_json()).unwrap();
    assert_eq!(j["vertices"].as_array().unwrap().len(), 8);
    assert_eq!(j["E"].as_array().unwrap().len(), 10);
    assert_eq!(j["C"].as_array().unwrap().len(), 4);
    assert_eq!(j["labels"][0], "e_pH_x");
    let spec_back: ErrorSystemSpec = serde_json::from_str(&serde_json::to_string(&spec).unwrap()).unwrap();
    assert_eq!(spec_back, spec);
}
