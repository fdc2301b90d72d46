//! Fixed-step closed-loop simulation of the full stack: reference
//! trajectory, flatness feedforward, outer-loop controller, reference-model
//! inversion and plant, integrated together by one RK4 scheme.
//!
//! Alongside the plant the simulation can carry a shadow state driven by
//! the polytopic error-system vector field with the realized disturbance,
//! drag residual and scheduling values. On the simplified plant the shadow
//! and the measured error coincide up to integration error.

use std::io::Write;

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::attitude::{
    heading_frame_derivatives, invert_reference_model, matched_state, phi_derivatives, yaw_channel_inversion,
};
use crate::control::{
    accel_model_rate, control_cg, control_cgh, control_ch, feedforward_nu, observer_nominal, observer_rate,
    observer_rate_heading, yaw_control, Architecture, ControllerState, GainSet,
};
use crate::error::{Error, Result};
use crate::errsys::{lpv_rate, state_labels, to_heading_frame, ErrorSystemSpec, Scheduling};
use crate::flatness::{flatness, DragModel};
use crate::linalg::{norm2, rot_to_euler, rot_z, skew_z, tilt_between, wrap_angle};
use crate::plant::{finish_step, plant_at, plant_rates, true_rotation, Fidelity, PlantInput, PlantParams, PlantState};
use crate::reference::Trajectory;

/// One closed-loop run.
pub struct ClosedLoop<'a> {
    pub trajectory: &'a dyn Trajectory,
    pub architecture: Architecture,
    pub gains: GainSet,
    /// Drag model known to the flatness feedforward and the observer.
    pub model_drag: DragModel,
    pub plant: PlantParams,
    /// Source of `d_max` and of the shadow error system.
    pub spec: ErrorSystemSpec,
    pub dt: f64,
    pub duration: f64,
    /// Initial position offset from the reference (m).
    pub initial_offset: Vector3<f64>,
    /// Integrate the shadow error-system state.
    pub shadow: bool,
    /// Keep every n-th step in the trace.
    pub record_every: usize,
}

/// Recorded signals at one instant. `error` is the stacked error state in
/// the frame of the architecture's error system.
#[derive(Debug, Clone, PartialEq)]
pub struct SimSample {
    pub t: f64,
    pub p: Vector3<f64>,
    pub v: Vector3<f64>,
    /// Euler angles `(phi, theta, psi)` of the true attitude.
    pub euler: Vector3<f64>,
    pub p_r: Vector3<f64>,
    pub v_r: Vector3<f64>,
    pub psi_r: f64,
    pub psid_r: f64,
    pub psidd_r: f64,
    /// Desired acceleration, geodetic.
    pub a_d: Vector3<f64>,
    pub w: Vector3<f64>,
    pub tilt_deg: f64,
    pub thrust: f64,
    pub d_norm: f64,
    pub delta_norm: f64,
    pub e_psi: f64,
    pub error: DVector<f64>,
    pub shadow: Option<DVector<f64>>,
}

#[derive(Debug, Clone)]
pub struct SimTrace {
    pub architecture: Architecture,
    pub fidelity: Fidelity,
    pub labels: Vec<String>,
    pub samples: Vec<SimSample>,
    /// Gust evaluations that hit the clipping bound, out of `wind_evals`.
    pub wind_clipped: usize,
    pub wind_evals: usize,
}

#[derive(Debug, Clone)]
struct Full {
    plant: PlantState,
    ctrl: ControllerState,
    shadow: DVector<f64>,
}

impl Full {
    fn axpy(&self, h: f64, d: &Full) -> Full {
        Full {
            plant: self.plant.axpy(h, &d.plant),
            ctrl: self.ctrl.axpy(h, &d.ctrl),
            shadow: &self.shadow + &d.shadow * h,
        }
    }
}

struct Stage {
    d: Full,
    sample: SimSample,
    clipped: bool,
}

fn dvec(v: &Vector3<f64>, k: usize) -> DVector<f64> {
    DVector::from_column_slice(&v.as_slice()[..k])
}

fn dmat(m: &Matrix3<f64>, k: usize) -> DMatrix<f64> {
    DMatrix::from_fn(k, k, |i, j| m[(i, j)])
}

fn stack(blocks: [&Vector3<f64>; 5]) -> DVector<f64> {
    DVector::from_iterator(15, blocks.iter().flat_map(|b| b.iter().copied()))
}

impl ClosedLoop<'_> {
    fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !(self.duration > 0.0) {
            return Err(Error::InvalidParameter("dt and duration must be positive".into()));
        }
        if self.duration > self.trajectory.duration() + 1e-9 {
            return Err(Error::InvalidParameter(format!(
                "simulation duration {} exceeds trajectory duration {}",
                self.duration,
                self.trajectory.duration()
            )));
        }
        if self.spec.architecture != self.architecture || self.spec.gains != self.gains {
            return Err(Error::InvalidParameter(
                "error-system spec does not match the controller".into(),
            ));
        }
        self.gains.validate(self.architecture)?;
        self.plant.attitude_model.validate()?;
        self.plant.rigid_body.validate()
    }

    fn shadow_spec(&self) -> ErrorSystemSpec {
        ErrorSystemSpec {
            planar: false,
            ..self.spec.clone()
        }
    }

    fn initial(&self) -> Result<Full> {
        let sig = self.trajectory.sample(0.0)?;
        let v_w = self.plant.wind.mean();
        let fl = flatness(&sig, &v_w, &self.model_drag)?;
        let psi = [sig.psi, sig.psid, sig.psidd];
        let phi = phi_derivatives(&fl.a_t, &fl.j_t, &fl.s_t, psi)?;
        let att = matched_state(&phi, sig.psi, sig.psid);
        let p = sig.p + self.initial_offset;
        let mut plant = plant_at(&self.plant, p, sig.v, att, 0.0);
        if self.plant.fidelity == Fidelity::B {
            let rho_c = invert_reference_model(
                &self.plant.attitude_model,
                &fl.a_t,
                &fl.j_t,
                &fl.s_t,
                psi[0],
                psi[1],
                psi[2],
            )?
            .rho_c;
            let r_c = yaw_channel_inversion(&self.plant.attitude_model, &att, &rho_c, sig.psid, sig.psidd)?;
            let (w, _) =
                crate::plant::reference_body_rates(&self.plant.attitude_model, &att, &PlantInput { rho_c, r_c });
            plant.omega = w;
        }
        let l = self.gains.l();
        let (a_d, ad_dot, z) = if self.architecture.heading_frame() {
            let (ah, jh, _) = heading_frame_derivatives(&fl.a_t, &fl.j_t, &fl.s_t, sig.psi, sig.psid, sig.psidd);
            (ah, jh, -l * (rot_z(sig.psi).transpose() * sig.v))
        } else {
            (fl.a_t, fl.j_t, -l * sig.v)
        };
        let ctrl = ControllerState {
            a_d,
            ad_dot,
            z,
            psi_d: sig.psi,
            psid_d: sig.psid,
        };
        let n = if self.shadow { 15 } else { 0 };
        let mut full = Full {
            plant,
            ctrl,
            shadow: DVector::zeros(n),
        };
        if self.shadow {
            full.shadow = self.eval(&full, 0.0)?.sample.error;
        }
        Ok(full)
    }

    fn eval(&self, s: &Full, t: f64) -> Result<Stage> {
        let at = |e: Error| Error::Domain(format!("t = {t:.4} s: {e}"));
        let sig = self.trajectory.sample(t)?;
        let v_w = self.plant.wind.mean();
        let fl = flatness(&sig, &v_w, &self.model_drag).map_err(at)?;
        let g = &self.gains;
        let c = &s.ctrl;
        let (psi_r, psid_r, psidd_r) = (sig.psi, sig.psid, sig.psidd);
        let r_true = true_rotation(&self.plant, &s.plant, t);
        let e_p = s.plant.p - sig.p;
        let e_v = s.plant.v - sig.v;

        let (error, add_dot, a_d, j_d, s_d) = if self.architecture.heading_frame() {
            let r = rot_z(psi_r);
            let rt = r.transpose();
            let sk = skew_z(psid_r);
            let skd = skew_z(psidd_r);
            let e_ph = rt * e_p;
            let e_ph_dot = rt * e_v - sk * e_ph;
            let (a_th, j_th, s_th) = heading_frame_derivatives(&fl.a_t, &fl.j_t, &fl.s_t, psi_r, psid_r, psidd_r);
            let e_ah = c.a_d - a_th;
            let e_ah_dot = c.ad_dot - j_th;
            let d_hat = c.d_hat(g, &(rt * s.plant.v));
            let nu = feedforward_nu(&a_th, &j_th, &s_th, g)
                + control_ch(&e_ph, &e_ph_dot, &e_ah, &d_hat, psid_r, psidd_r, g);
            let add = accel_model_rate(&c.a_d, &c.ad_dot, &nu, g);
            let a_d = r * c.a_d;
            let j_d = r * (c.ad_dot + sk * c.a_d);
            let s_d = r * (add + 2.0 * sk * c.ad_dot + (sk * sk + skd) * c.a_d);
            (stack([&e_ph, &e_ph_dot, &e_ah, &e_ah_dot, &d_hat]), add, a_d, j_d, s_d)
        } else {
            let e_a = c.a_d - fl.a_t;
            let e_a_dot = c.ad_dot - fl.j_t;
            let d_hat = c.d_hat(g, &s.plant.v);
            let fb = match self.architecture {
                Architecture::Cgh => control_cgh(&e_p, &e_v, &e_a, &d_hat, psi_r, g),
                _ => control_cg(&e_p, &e_v, &e_a, &d_hat, g),
            };
            let nu = feedforward_nu(&fl.a_t, &fl.j_t, &fl.s_t, g) + fb;
            let add = accel_model_rate(&c.a_d, &c.ad_dot, &nu, g);
            (stack([&e_p, &e_v, &e_a, &e_a_dot, &d_hat]), add, c.a_d, c.ad_dot, add)
        };

        let e_psi = wrap_angle(rot_to_euler(&r_true).2 - psi_r);
        let (_, _, psidd_d) = yaw_control(e_psi, psid_r, psidd_r, g, c);
        let model = &self.plant.attitude_model;
        let inv = invert_reference_model(model, &a_d, &j_d, &s_d, c.psi_d, c.psid_d, psidd_d).map_err(at)?;
        let r_c = yaw_channel_inversion(model, &s.plant.att, &inv.rho_c, c.psid_d, psidd_d).map_err(at)?;
        let rates = plant_rates(&self.plant, &s.plant, &PlantInput { rho_c: inv.rho_c, r_c }, t);

        let nominal = observer_nominal(&a_d, &self.model_drag.rotated(&fl.r), &(sig.v - v_w));
        let z_dot = if self.architecture.heading_frame() {
            observer_rate_heading(g, &c.z, &s.plant.v, &nominal, psi_r, psid_r)
        } else {
            observer_rate(g, &c.z, &s.plant.v, &nominal)
        };
        let ctrl = ControllerState {
            a_d: c.ad_dot,
            ad_dot: add_dot,
            z: z_dot,
            psi_d: c.psid_d,
            psid_d: psidd_d,
        };

        let dmax = self.spec.d_max();
        let delta = self.plant.drag.rotated(&r_true) - Matrix3::identity() * dmax;
        let d = rates.d.v - nominal - e_v * dmax - delta * e_v;
        let shadow = if self.shadow {
            let (d_s, delta_s, sched) = match self.architecture {
                Architecture::Cg => (d, delta, Scheduling::None),
                Architecture::Cgh => (d, delta, Scheduling::Heading(psi_r)),
                Architecture::Ch => {
                    let (dh, delh) = to_heading_frame(psi_r, &d, &delta);
                    (
                        dh,
                        delh,
                        Scheduling::YawRates {
                            psid: psid_r,
                            psidd: psidd_r,
                        },
                    )
                }
            };
            lpv_rate(
                &self.shadow_spec(),
                &s.shadow,
                &dvec(&d_s, 3),
                &dmat(&delta_s, 3),
                sched,
            )?
        } else {
            DVector::zeros(0)
        };

        let sample = SimSample {
            t,
            p: s.plant.p,
            v: s.plant.v,
            euler: {
                let (a, b, c) = rot_to_euler(&r_true);
                Vector3::new(a, b, c)
            },
            p_r: sig.p,
            v_r: sig.v,
            psi_r,
            psid_r,
            psidd_r,
            a_d,
            w: rates.wind.w,
            tilt_deg: tilt_between(&r_true, &s.plant.att.rotation()).to_degrees(),
            thrust: s.plant.att.thrust(),
            d_norm: d.norm(),
            delta_norm: norm2(&dmat(&delta, 3)),
            e_psi,
            error,
            shadow: self.shadow.then(|| s.shadow.clone()),
        };
        Ok(Stage {
            d: Full {
                plant: rates.d,
                ctrl,
                shadow,
            },
            sample,
            clipped: rates.wind.clipped,
        })
    }

    pub fn run(&self) -> Result<SimTrace> {
        self.validate()?;
        let steps = (self.duration / self.dt).round() as usize;
        let every = self.record_every.max(1);
        let t_end = self.trajectory.duration();
        let time = |k: usize, frac: f64| ((k as f64 + frac) * self.dt).min(t_end);
        let mut s = self.initial()?;
        let mut trace = SimTrace {
            architecture: self.architecture,
            fidelity: self.plant.fidelity,
            labels: state_labels(self.architecture, false),
            samples: Vec::with_capacity(steps / every + 2),
            wind_clipped: 0,
            wind_evals: 0,
        };
        for k in 0..steps {
            let t = time(k, 0.0);
            let k1 = self.eval(&s, t)?;
            let k2 = self.eval(&s.axpy(self.dt / 2.0, &k1.d), time(k, 0.5))?;
            let k3 = self.eval(&s.axpy(self.dt / 2.0, &k2.d), time(k, 0.5))?;
            let k4 = self.eval(&s.axpy(self.dt, &k3.d), time(k, 1.0))?;
            trace.wind_evals += 4;
            trace.wind_clipped += [&k1, &k2, &k3, &k4].iter().filter(|k| k.clipped).count();
            if k % every == 0 {
                trace.samples.push(k1.sample);
            }
            let mut next = s.clone();
            for (kd, w) in [(&k1.d, 1.0), (&k2.d, 2.0), (&k3.d, 2.0), (&k4.d, 1.0)] {
                next = next.axpy(self.dt * w / 6.0, kd);
            }
            next.plant = finish_step(&self.plant, &next.plant, time(k + 1, 0.0));
            s = next;
        }
        if steps.is_multiple_of(every) {
            trace.samples.push(self.eval(&s, time(steps, 0.0))?.sample);
        }
        Ok(trace)
    }
}

/// Named-column numeric table, the interchange form of a trace.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl TraceTable {
    pub fn index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.index(name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    pub fn write_csv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "{}", self.columns.join(","))?;
        for r in &self.rows {
            let cells: Vec<String> = r.iter().map(|x| format!("{x:e}")).collect();
            writeln!(out, "{}", cells.join(","))?;
        }
        Ok(())
    }

    pub fn read_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::InvalidParameter("empty trace file".into()))?;
        let columns: Vec<String> = header.split(',').map(|s| s.trim().to_string()).collect();
        let mut rows = Vec::new();
        for (n, line) in lines.enumerate() {
            let row = line
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::InvalidParameter(format!("trace row {}: {e}", n + 1)))?;
            if row.len() != columns.len() {
                return Err(Error::Dimension(format!(
                    "trace row {} has {} cells, header has {}",
                    n + 1,
                    row.len(),
                    columns.len()
                )));
            }
            rows.push(row);
        }
        Ok(Self { columns, rows })
    }
}

fn xyz(prefix: &str) -> [String; 3] {
    ["x", "y", "z"].map(|a| format!("{prefix}_{a}"))
}

impl SimTrace {
    pub fn to_table(&self) -> TraceTable {
        let mut columns = vec!["t".to_string()];
        for p in ["p", "v"] {
            columns.extend(xyz(p));
        }
        columns.extend(["phi", "theta", "psi"].map(String::from));
        for p in ["p_r", "v_r"] {
            columns.extend(xyz(p));
        }
        columns.extend(["psi_r", "psid_r", "psidd_r"].map(String::from));
        for p in ["a_d", "w"] {
            columns.extend(xyz(p));
        }
        columns.extend(["tilt_deg", "thrust_mps2", "w_norm", "d_norm", "delta_norm", "e_psi"].map(String::from));
        columns.extend(self.labels.iter().cloned());
        let shadow = self.samples.first().is_some_and(|s| s.shadow.is_some());
        if shadow {
            columns.extend(self.labels.iter().map(|l| format!("lpv_{l}")));
        }
        let rows = self
            .samples
            .iter()
            .map(|s| {
                let mut r = vec![s.t];
                r.extend(
                    s.p.iter()
                        .chain(s.v.iter())
                        .chain(s.euler.iter())
                        .chain(s.p_r.iter())
                        .chain(s.v_r.iter()),
                );
                r.extend([s.psi_r, s.psid_r, s.psidd_r]);
                r.extend(s.a_d.iter().chain(s.w.iter()));
                r.extend([s.tilt_deg, s.thrust, s.w.norm(), s.d_norm, s.delta_norm, s.e_psi]);
                r.extend(s.error.iter());
                if let Some(sh) = &s.shadow {
                    r.extend(sh.iter());
                }
                r
            })
            .collect();
        TraceTable { columns, rows }
    }

    pub fn summary(&self) -> SimSummary {
        let max = |f: &dyn Fn(&SimSample) -> f64| self.samples.iter().map(f).fold(0.0, f64::max);
        SimSummary {
            architecture: self.architecture,
            fidelity: self.fidelity,
            samples: self.samples.len(),
            duration_s: self.samples.last().map_or(0.0, |s| s.t),
            max_position_error_m: max(&|s| (s.p - s.p_r).norm()),
            max_tilt_deg: max(&|s| s.tilt_deg),
            max_thrust_mps2: max(&|s| s.thrust),
            max_psid_rad_s: max(&|s| s.psid_r.abs()),
            max_psidd_rad_s2: max(&|s| s.psidd_r.abs()),
            max_w_mps2: max(&|s| s.w.norm()),
            max_d_mps2: max(&|s| s.d_norm),
            max_yaw_error_rad: max(&|s| s.e_psi.abs()),
            wind_clip_rate: if self.wind_evals == 0 {
                0.0
            } else {
                self.wind_clipped as f64 / self.wind_evals as f64
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimSummary {
    pub architecture: Architecture,
    pub fidelity: Fidelity,
    pub samples: usize,
    pub duration_s: f64,
    pub max_position_error_m: f64,
    pub max_tilt_deg: f64,
    pub max_thrust_mps2: f64,
    pub max_psid_rad_s: f64,
    pub max_psidd_rad_s2: f64,
    pub max_w_mps2: f64,
    pub max_d_mps2: f64,
    pub max_yaw_error_rad: f64,
    pub wind_clip_rate: f64,
}
