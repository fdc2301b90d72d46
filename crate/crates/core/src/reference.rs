//! Reference trajectories: hover-to-loiter maneuvers and the yaw reference
//! slaved to the velocity direction.

use std::f64::consts::PI;
use std::io::Write;
use std::num::NonZeroUsize;

use gauss_quad::GaussLegendre;
use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::taylor::Tay;

/// Minimum horizontal speed for slaving yaw to the velocity direction (m/s).
pub const V_MIN: f64 = 0.1;

/// Flat output and its derivatives at one instant (NED, z down).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceSample {
    pub t: f64,
    pub p: Vector3<f64>,
    pub v: Vector3<f64>,
    pub a: Vector3<f64>,
    pub j: Vector3<f64>,
    pub s: Vector3<f64>,
    pub psi: f64,
    pub psid: f64,
    pub psidd: f64,
}

impl ReferenceSample {
    /// Vehicle at rest at `p` with constant heading.
    pub fn hover(t: f64, p: Vector3<f64>, psi: f64) -> Self {
        Self {
            t,
            p,
            v: Vector3::zeros(),
            a: Vector3::zeros(),
            j: Vector3::zeros(),
            s: Vector3::zeros(),
            psi,
            psid: 0.0,
            psidd: 0.0,
        }
    }
}

pub trait Trajectory: Send + Sync {
    fn sample(&self, t: f64) -> Result<ReferenceSample>;
    fn duration(&self) -> f64;
}

/// Constant-velocity (or hover) reference with fixed heading.
#[derive(Debug, Clone)]
pub struct StraightLine {
    pub p0: Vector3<f64>,
    pub v: Vector3<f64>,
    pub psi: f64,
    pub duration: f64,
}

impl Trajectory for StraightLine {
    fn sample(&self, t: f64) -> Result<ReferenceSample> {
        check_time(t, self.duration)?;
        let mut s = ReferenceSample::hover(t, self.p0 + self.v * t, self.psi);
        s.v = self.v;
        Ok(s)
    }

    fn duration(&self) -> f64 {
        self.duration
    }
}

fn check_time(t: f64, end: f64) -> Result<()> {
    if !(0.0..=end).contains(&t) {
        return Err(Error::TimeOutOfRange { t, end });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoiterSpec {
    pub radius_m: f64,
    pub speed_mps: f64,
    /// Loiter circle center; the vertical component is the datum for `altitude_m`.
    pub center_m: [f64; 3],
    pub entry_duration_s: f64,
    pub total_duration_s: f64,
    pub altitude_m: f64,
    /// Speed at the start of the entry.
    #[serde(default = "default_entry_speed")]
    pub entry_speed_mps: f64,
    /// Track direction at the start of the entry.
    #[serde(default)]
    pub entry_heading_rad: f64,
}

fn default_entry_speed() -> f64 {
    3.0
}

impl Default for LoiterSpec {
    fn default() -> Self {
        Self {
            radius_m: 30.0,
            speed_mps: 15.0,
            center_m: [0.0, 0.0, 0.0],
            entry_duration_s: 8.0,
            total_duration_s: 60.0,
            altitude_m: 20.0,
            entry_speed_mps: 3.0,
            entry_heading_rad: 0.0,
        }
    }
}

impl LoiterSpec {
    pub fn validate(&self) -> Result<()> {
        let pos = |x: f64| x.is_finite() && x > 0.0;
        if !pos(self.radius_m) || !pos(self.speed_mps) || !pos(self.entry_duration_s) {
            return Err(Error::InvalidParameter(
                "radius, speed and entry duration must be positive".into(),
            ));
        }
        if !(self.total_duration_s >= self.entry_duration_s) {
            return Err(Error::InvalidParameter("total duration shorter than entry".into()));
        }
        if !(self.entry_speed_mps >= V_MIN) {
            return Err(Error::SpeedTooLow {
                speed: self.entry_speed_mps,
                min: V_MIN,
            });
        }
        Ok(())
    }

    /// Steady turn rate `v / R`.
    pub fn turn_rate(&self) -> f64 {
        self.speed_mps / self.radius_m
    }
}

/// Degree-9 blend with five vanishing derivatives at both ends, as a
/// function of normalized time.
pub fn blend(tau: f64) -> f64 {
    let t = tau.clamp(0.0, 1.0);
    let t5 = t.powi(5);
    t5 * (126.0 + t * (-420.0 + t * (540.0 + t * (-315.0 + t * 70.0))))
}

fn blend_tay<const K: usize>(tau: Tay<K>) -> Tay<K> {
    let t2 = tau * tau;
    let t5 = t2 * t2 * tau;
    let poly = ((((tau * 70.0) + -315.0) * tau + 540.0) * tau + -420.0) * tau + 126.0;
    t5 * poly
}

/// Integral of [`blend`] from 0 to `tau`; `blend_integral(1) = 1/2`.
fn blend_integral_tay<const K: usize>(tau: Tay<K>) -> Tay<K> {
    let t2 = tau * tau;
    let t6 = t2 * t2 * t2;
    let poly = (((tau * 7.0) + -35.0) * tau + 67.5) * tau + -60.0;
    t6 * (poly * tau + 21.0)
}

/// Hover-to-loiter maneuver.
///
/// During the entry the speed rises from `entry_speed` to `speed` and the
/// turn rate from 0 to `speed / radius`, both driven by the same blend
/// `b(t / T_e)`. Heading follows the track, so the yaw rate equals the turn
/// rate and never exceeds its steady value. After the entry the path is the
/// circle of the given radius around `center`.
#[derive(Debug, Clone)]
pub struct Loiter {
    spec: LoiterSpec,
    quad: GaussLegendre,
    p0: Vector3<f64>,
    center: Vector3<f64>,
}

const QUAD_NODES: usize = 48;

impl Loiter {
    pub fn new(spec: LoiterSpec) -> Result<Self> {
        spec.validate()?;
        let quad = GaussLegendre::new(NonZeroUsize::new(QUAD_NODES).unwrap());
        let mut out = Self {
            spec,
            quad,
            p0: Vector3::zeros(),
            center: Vector3::zeros(),
        };
        let c = Vector3::new(spec.center_m[0], spec.center_m[1], spec.center_m[2] - spec.altitude_m);
        let te = spec.entry_duration_s;
        let chi_e = out.heading_tay::<1>(te).value();
        let radial = Vector3::new((chi_e - PI / 2.0).cos(), (chi_e - PI / 2.0).sin(), 0.0);
        out.p0 = c + radial * spec.radius_m - out.entry_displacement(te);
        out.center = c;
        Ok(out)
    }

    pub fn spec(&self) -> &LoiterSpec {
        &self.spec
    }

    /// Center of the loiter circle at flight altitude.
    pub fn center(&self) -> Vector3<f64> {
        self.center
    }

    pub fn start(&self) -> Vector3<f64> {
        self.p0
    }

    fn speed_tay<const K: usize>(&self, t: f64) -> Tay<K> {
        let sp = &self.spec;
        let tau = Tay::<K>::from_derivs(&[t / sp.entry_duration_s, 1.0 / sp.entry_duration_s]);
        if t >= sp.entry_duration_s {
            return Tay::constant(sp.speed_mps);
        }
        blend_tay(tau) * (sp.speed_mps - sp.entry_speed_mps) + sp.entry_speed_mps
    }

    fn heading_tay<const K: usize>(&self, t: f64) -> Tay<K> {
        let sp = &self.spec;
        let te = sp.entry_duration_s;
        let w = sp.turn_rate();
        if t >= te {
            return Tay::from_derivs(&[sp.entry_heading_rad + w * te * 0.5 + w * (t - te), w]);
        }
        let tau = Tay::<K>::from_derivs(&[t / te, 1.0 / te]);
        blend_integral_tay(tau) * (w * te) + sp.entry_heading_rad
    }

    fn entry_displacement(&self, t: f64) -> Vector3<f64> {
        if t <= 0.0 {
            return Vector3::zeros();
        }
        let vel = |s: f64| {
            let sp = self.speed_tay::<1>(s).value();
            let chi = self.heading_tay::<1>(s).value();
            (sp * chi.cos(), sp * chi.sin())
        };
        let x = self.quad.integrate(0.0, t, |s| vel(s).0);
        let y = self.quad.integrate(0.0, t, |s| vel(s).1);
        Vector3::new(x, y, 0.0)
    }

    fn position(&self, t: f64) -> Vector3<f64> {
        let sp = &self.spec;
        if t < sp.entry_duration_s {
            return self.p0 + self.entry_displacement(t);
        }
        let th = self.heading_tay::<1>(t).value() - PI / 2.0;
        self.center + Vector3::new(th.cos(), th.sin(), 0.0) * sp.radius_m
    }
}

impl Trajectory for Loiter {
    fn sample(&self, t: f64) -> Result<ReferenceSample> {
        eval_loiter(self, t)
    }

    fn duration(&self) -> f64 {
        self.spec.total_duration_s
    }
}

/// Flat output of the loiter maneuver at time `t`.
pub fn eval_loiter(traj: &Loiter, t: f64) -> Result<ReferenceSample> {
    check_time(t, traj.spec.total_duration_s)?;
    let speed = traj.speed_tay::<4>(t);
    let chi = traj.heading_tay::<4>(t);
    let (s, c) = chi.sin_cos();
    let vx = speed * c;
    let vy = speed * s;
    let d = |k: usize| Vector3::new(vx.d(k), vy.d(k), 0.0);
    Ok(ReferenceSample {
        t,
        p: traj.position(t),
        v: d(0),
        a: d(1),
        j: d(2),
        s: d(3),
        psi: chi.d(0),
        psid: chi.d(1),
        psidd: chi.d(2),
    })
}

/// Heading of the horizontal velocity and its first two derivatives.
/// The angle is in (-pi, pi]; use [`YawUnwrapper`] for a continuous signal.
pub fn yaw_from_velocity(v: &Vector3<f64>, a: &Vector3<f64>, j: &Vector3<f64>) -> Result<(f64, f64, f64)> {
    let speed = v.x.hypot(v.y);
    if !(speed >= V_MIN) {
        return Err(Error::SpeedTooLow { speed, min: V_MIN });
    }
    let n = v.x * v.x + v.y * v.y;
    let num = v.x * a.y - v.y * a.x;
    let psid = num / n;
    let numd = v.x * j.y - v.y * j.x;
    let nd = 2.0 * (v.x * a.x + v.y * a.y);
    let psidd = (numd * n - num * nd) / (n * n);
    Ok((v.y.atan2(v.x), psid, psidd))
}

/// Keeps a running yaw continuous across the +-pi cut.
#[derive(Debug, Clone, Default)]
pub struct YawUnwrapper {
    last: Option<f64>,
}

impl YawUnwrapper {
    pub fn new() -> Self {
        Self::default()
    }

    /// Starts the accumulator at a known continuous angle.
    pub fn starting_at(psi: f64) -> Self {
        Self { last: Some(psi) }
    }

    pub fn unwrap(&mut self, psi: f64) -> f64 {
        let out = match self.last {
            None => psi,
            Some(prev) => prev + crate::linalg::wrap_angle(psi - prev),
        };
        self.last = Some(out);
        out
    }
}

pub const TRAJECTORY_CSV_HEADER: &str = "t,px,py,pz,vx,vy,vz,ax,ay,az,jx,jy,jz,sx,sy,sz,psi,psid,psidd";

pub fn write_trajectory_csv<W: Write>(out: &mut W, samples: &[ReferenceSample]) -> std::io::Result<()> {
    writeln!(out, "{TRAJECTORY_CSV_HEADER}")?;
    for s in samples {
        write!(out, "{}", s.t)?;
        for v in [&s.p, &s.v, &s.a, &s.j, &s.s] {
            write!(out, ",{},{},{}", v.x, v.y, v.z)?;
        }
        writeln!(out, ",{},{},{}", s.psi, s.psid, s.psidd)?;
    }
    Ok(())
}

/// Samples `traj` every `dt` seconds, including the end point.
pub fn sample_uniform(traj: &dyn Trajectory, dt: f64) -> Result<Vec<ReferenceSample>> {
    if !(dt > 0.0) {
        return Err(Error::InvalidParameter("sample step must be positive".into()));
    }
    let n = (traj.duration() / dt).round() as usize;
    (0..=n)
        .map(|k| traj.sample((k as f64 * dt).min(traj.duration())))
        .collect()
}
