//! Nonlinear plant. Translation is driven by thrust along the body z axis,
//! gravity, linear body-frame drag on the air-relative velocity and an
//! unmodeled acceleration. The attitude reference dynamics act as the inner
//! loop. In fidelity A the true attitude is the reference attitude tilted by
//! a prescribed error. In fidelity B a rigid body under a geometric tracking
//! torque law follows it.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::attitude::{AttitudeRefModel, AttitudeRefState};
use crate::error::{Error, Result};
use crate::flatness::DragModel;
use crate::linalg::{axis_angle, diag3, e_z, orthonormalize, skew, vee, GRAVITY};
use crate::taylor::Tay;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Fidelity {
    /// Attitude follows the reference model, with injected tilt error.
    A,
    /// Rigid-body rotation under a tracking torque law.
    B,
}

impl Fidelity {
    pub fn tag(self) -> &'static str {
        match self {
            Fidelity::A => "a",
            Fidelity::B => "b",
        }
    }
}

impl std::str::FromStr for Fidelity {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "a" => Ok(Fidelity::A),
            "b" => Ok(Fidelity::B),
            _ => Err(Error::InvalidParameter(format!("unknown fidelity '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindSpec {
    pub mean_mps: [f64; 3],
    /// Bound on the gust acceleration `||w||`.
    pub gust_max_mps2: f64,
    #[serde(default = "default_gust_components")]
    pub gust_components: usize,
    #[serde(default = "default_gust_band")]
    pub gust_band_hz: [f64; 2],
    #[serde(default)]
    pub seed: u64,
}

fn default_gust_components() -> usize {
    6
}

fn default_gust_band() -> [f64; 2] {
    [0.05, 1.0]
}

impl Default for WindSpec {
    fn default() -> Self {
        Self {
            mean_mps: [7.0, 0.0, 0.0],
            gust_max_mps2: 0.5,
            gust_components: default_gust_components(),
            gust_band_hz: default_gust_band(),
            seed: 0,
        }
    }
}

impl WindSpec {
    pub fn calm() -> Self {
        Self {
            mean_mps: [0.0; 3],
            gust_max_mps2: 0.0,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Gust {
    amp: Vector3<f64>,
    omega: f64,
    phase: Vector3<f64>,
}

/// Mean wind plus a seeded sum of sinusoids, clipped to `gust_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct WindModel {
    mean: Vector3<f64>,
    w_max: f64,
    gusts: Vec<Gust>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindSample {
    pub v_w: Vector3<f64>,
    pub w: Vector3<f64>,
    /// The unclipped sum exceeded the bound at this instant.
    pub clipped: bool,
}

/// Per-axis sum of component amplitudes as a fraction of the bound. The
/// worst-case unclipped norm is then `0.8 sqrt(3) w_max`, so clipping is
/// exercised but rare.
const GUST_AXIS_FRACTION: f64 = 0.8;

impl WindModel {
    pub fn new(spec: &WindSpec) -> Result<Self> {
        let [f_lo, f_hi] = spec.gust_band_hz;
        if !(spec.gust_max_mps2 >= 0.0) || !spec.mean_mps.iter().all(|x| x.is_finite()) {
            return Err(Error::InvalidParameter(
                "wind mean must be finite and gust bound >= 0".into(),
            ));
        }
        if !(f_lo > 0.0 && f_hi >= f_lo) {
            return Err(Error::InvalidParameter(format!(
                "bad gust band {:?}",
                spec.gust_band_hz
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let n = if spec.gust_max_mps2 > 0.0 {
            spec.gust_components
        } else {
            0
        };
        let mut gusts: Vec<Gust> = (0..n)
            .map(|_| {
                let f = (f_lo.ln() + (f_hi.ln() - f_lo.ln()) * rng.gen::<f64>()).exp();
                Gust {
                    amp: Vector3::from_fn(|_, _| rng.gen_range(0.2..1.0)),
                    omega: 2.0 * PI * f,
                    phase: Vector3::from_fn(|_, _| rng.gen_range(0.0..2.0 * PI)),
                }
            })
            .collect();
        for axis in 0..3 {
            let total: f64 = gusts.iter().map(|g| g.amp[axis]).sum();
            for g in &mut gusts {
                g.amp[axis] *= GUST_AXIS_FRACTION * spec.gust_max_mps2 / total;
            }
        }
        Ok(Self {
            mean: Vector3::from(spec.mean_mps),
            w_max: spec.gust_max_mps2,
            gusts,
        })
    }

    pub fn calm() -> Self {
        Self {
            mean: Vector3::zeros(),
            w_max: 0.0,
            gusts: Vec::new(),
        }
    }

    pub fn mean(&self) -> Vector3<f64> {
        self.mean
    }

    pub fn w_max(&self) -> f64 {
        self.w_max
    }
}

/// Mean wind and gust acceleration at time `t`.
pub fn sample_wind(model: &WindModel, t: f64) -> WindSample {
    let mut w = Vector3::zeros();
    for g in &model.gusts {
        w += Vector3::from_fn(|i, _| g.amp[i] * (g.omega * t + g.phase[i]).sin());
    }
    let n = w.norm();
    let clipped = n > model.w_max;
    if clipped {
        w *= model.w_max / n;
    }
    WindSample {
        v_w: model.mean,
        w,
        clipped,
    }
}

/// Tilt error applied to the reference attitude in fidelity A: a rotation
/// by `amplitude` about the body axis `(cos 2 pi f t, sin 2 pi f t, 0)`.
/// The thrust axis then sweeps a cone of half-angle `amplitude`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Injection {
    pub amplitude_rad: f64,
    pub frequency_hz: f64,
}

impl Injection {
    pub fn none() -> Self {
        Self {
            amplitude_rad: 0.0,
            frequency_hz: 0.3,
        }
    }

    pub fn cone(amplitude_rad: f64) -> Self {
        Self {
            amplitude_rad,
            frequency_hz: 0.3,
        }
    }

    pub fn rotation(&self, t: f64) -> Matrix3<f64> {
        if self.amplitude_rad == 0.0 {
            return Matrix3::identity();
        }
        let (s, c) = (2.0 * PI * self.frequency_hz * t).sin_cos();
        axis_angle(&Vector3::new(c, s, 0.0), self.amplitude_rad)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RigidBodySpec {
    pub inertia_kgm2: [f64; 3],
    /// Relative error of the inertia assumed by the torque law.
    pub inertia_error: f64,
    /// Natural frequency and damping of the attitude tracking error.
    pub bandwidth_rad_s: f64,
    pub damping: f64,
}

impl Default for RigidBodySpec {
    fn default() -> Self {
        Self {
            inertia_kgm2: [0.4, 1.2, 1.0],
            inertia_error: 0.15,
            bandwidth_rad_s: 30.0,
            damping: 1.0,
        }
    }
}

impl RigidBodySpec {
    pub fn validate(&self) -> Result<()> {
        let pos = self
            .inertia_kgm2
            .iter()
            .chain([&self.bandwidth_rad_s, &self.damping])
            .all(|x| x.is_finite() && *x > 0.0);
        if !pos || !(self.inertia_error > -1.0) {
            return Err(Error::InvalidParameter(
                "inertia, bandwidth and damping must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn inertia(&self) -> Matrix3<f64> {
        diag3(self.inertia_kgm2)
    }

    /// Inertia used by the torque law.
    pub fn model_inertia(&self) -> Matrix3<f64> {
        self.inertia() * (1.0 + self.inertia_error)
    }
}

#[derive(Debug, Clone)]
pub struct PlantParams {
    pub fidelity: Fidelity,
    pub attitude_model: AttitudeRefModel,
    pub drag: DragModel,
    pub wind: WindModel,
    pub injection: Injection,
    pub rigid_body: RigidBodySpec,
}

impl PlantParams {
    pub fn new(fidelity: Fidelity, drag: DragModel, wind: WindModel) -> Self {
        Self {
            fidelity,
            attitude_model: AttitudeRefModel::default(),
            drag,
            wind,
            injection: Injection::none(),
            rigid_body: RigidBodySpec::default(),
        }
    }
}

/// `r` is body to geodetic. In fidelity A it is derived from `att` and the
/// injection at every step, and `omega` stays zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantState {
    pub p: Vector3<f64>,
    pub v: Vector3<f64>,
    pub r: Matrix3<f64>,
    pub omega: Vector3<f64>,
    pub att: AttitudeRefState,
}

impl PlantState {
    pub fn axpy(&self, h: f64, d: &PlantState) -> PlantState {
        PlantState {
            p: self.p + d.p * h,
            v: self.v + d.v * h,
            r: self.r + d.r * h,
            omega: self.omega + d.omega * h,
            att: self.att.axpy(h, &d.att),
        }
    }
}

/// Commands to the attitude reference model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantInput {
    pub rho_c: Vector3<f64>,
    pub r_c: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantRates {
    /// Time derivative of the state.
    pub d: PlantState,
    /// Attitude actually acting on the vehicle.
    pub r_true: Matrix3<f64>,
    pub wind: WindSample,
}

/// Attitude acting on the vehicle at time `t`.
pub fn true_rotation(params: &PlantParams, state: &PlantState, t: f64) -> Matrix3<f64> {
    match params.fidelity {
        Fidelity::A => state.att.rotation() * params.injection.rotation(t),
        Fidelity::B => state.r,
    }
}

/// Body rates and body angular accelerations of the reference attitude.
pub fn reference_body_rates(
    model: &AttitudeRefModel,
    att: &AttitudeRefState,
    input: &PlantInput,
) -> (Vector3<f64>, Vector3<f64>) {
    let rhodd = model.rho_accel(&att.rho, &att.rhod, &input.rho_c);
    let rdot = -model.yaw_rate_bandwidth_rad_s * (att.r_r - input.r_c);
    let phi = Tay::<2>::from_derivs(&[att.rho.x, att.rhod.x]);
    let theta = Tay::<2>::from_derivs(&[att.rho.y, att.rhod.y]);
    let phid = Tay::<2>::from_derivs(&[att.rhod.x, rhodd.x]);
    let thetad = Tay::<2>::from_derivs(&[att.rhod.y, rhodd.y]);
    let r = Tay::<2>::from_derivs(&[att.r_r, rdot]);
    let (sf, cf) = phi.sin_cos();
    let (st, ct) = theta.sin_cos();
    let psid = (r + sf * thetad) / (cf * ct);
    let p = phid - psid * st;
    let q = thetad * cf + psid * ct * sf;
    (
        Vector3::new(p.d(0), q.d(0), r.d(0)),
        Vector3::new(p.d(1), q.d(1), r.d(1)),
    )
}

/// Geometric tracking law on SO(3) with the torque-law inertia `j_hat`.
pub fn tracking_torque(
    rb: &RigidBodySpec,
    r: &Matrix3<f64>,
    omega: &Vector3<f64>,
    r_d: &Matrix3<f64>,
    omega_d: &Vector3<f64>,
    omegad_d: &Vector3<f64>,
) -> Vector3<f64> {
    let j = rb.model_inertia();
    let wn = rb.bandwidth_rad_s;
    let rel = r.transpose() * r_d;
    let e_r = vee(&(rel.transpose() - rel)) * 0.5;
    let w_d = rel * omega_d;
    let e_w = omega - w_d;
    let k_r = j * (wn * wn);
    let k_w = j * (2.0 * rb.damping * wn);
    -k_r * e_r - k_w * e_w + omega.cross(&(j * omega)) - j * (skew(omega) * w_d - rel * omegad_d)
}

/// Right-hand side of the plant with commands `input` at time `t`.
pub fn plant_rates(params: &PlantParams, state: &PlantState, input: &PlantInput, t: f64) -> PlantRates {
    let model = &params.attitude_model;
    let wind = sample_wind(&params.wind, t);
    let r_true = true_rotation(params, state, t);
    let f = state.att.thrust();
    let v_a = state.v - wind.v_w;
    let accel = -r_true * e_z() * f + e_z() * GRAVITY + params.drag.rotated(&r_true) * v_a + wind.w;
    let att = state.att.derivative(model, &input.rho_c, input.r_c);
    let (r_dot, omega_dot) = match params.fidelity {
        Fidelity::A => (Matrix3::zeros(), Vector3::zeros()),
        Fidelity::B => {
            let rb = &params.rigid_body;
            let (w_d, wd_d) = reference_body_rates(model, &state.att, input);
            let tau = tracking_torque(rb, &state.r, &state.omega, &state.att.rotation(), &w_d, &wd_d);
            let j = rb.inertia();
            let jinv = j.try_inverse().expect("inertia is positive definite");
            (
                state.r * skew(&state.omega),
                jinv * (tau - state.omega.cross(&(j * state.omega))),
            )
        }
    };
    PlantRates {
        d: PlantState {
            p: state.v,
            v: accel,
            r: r_dot,
            omega: omega_dot,
            att,
        },
        r_true,
        wind,
    }
}

/// Post-step projection: re-orthonormalizes `r` (fidelity B) or rebuilds
/// it from the reference attitude and the injection (fidelity A).
pub fn finish_step(params: &PlantParams, state: &PlantState, t: f64) -> PlantState {
    let mut out = *state;
    out.r = match params.fidelity {
        Fidelity::A => state.att.rotation() * params.injection.rotation(t),
        Fidelity::B => orthonormalize(&state.r),
    };
    out
}

/// One RK4 step with commands held over the step.
pub fn step_plant(params: &PlantParams, state: &PlantState, input: &PlantInput, t: f64, dt: f64) -> PlantState {
    let f = |s: &PlantState, t: f64| plant_rates(params, s, input, t).d;
    let k1 = f(state, t);
    let k2 = f(&state.axpy(dt / 2.0, &k1), t + dt / 2.0);
    let k3 = f(&state.axpy(dt / 2.0, &k2), t + dt / 2.0);
    let k4 = f(&state.axpy(dt, &k3), t + dt);
    let mut out = *state;
    for (k, w) in [(k1, 1.0), (k2, 2.0), (k3, 2.0), (k4, 1.0)] {
        out = out.axpy(dt * w / 6.0, &k);
    }
    finish_step(params, &out, t + dt)
}

/// Fidelity-A step; `params.fidelity` is ignored.
pub fn step_plant_a(params: &PlantParams, state: &PlantState, input: &PlantInput, t: f64, dt: f64) -> PlantState {
    let p = PlantParams {
        fidelity: Fidelity::A,
        ..params.clone()
    };
    step_plant(&p, state, input, t, dt)
}

/// Fidelity-B step; `params.fidelity` is ignored.
pub fn step_plant_b(params: &PlantParams, state: &PlantState, input: &PlantInput, t: f64, dt: f64) -> PlantState {
    let p = PlantParams {
        fidelity: Fidelity::B,
        ..params.clone()
    };
    step_plant(&p, state, input, t, dt)
}

/// Plant at rest in the attitude `att` with the rotation made consistent.
pub fn plant_at(params: &PlantParams, p: Vector3<f64>, v: Vector3<f64>, att: AttitudeRefState, t: f64) -> PlantState {
    let s = PlantState {
        p,
        v,
        r: att.rotation(),
        omega: Vector3::zeros(),
        att,
    };
    finish_step(params, &s, t)
}
