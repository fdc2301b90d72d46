//! Outer-loop acceleration control: disturbance observer, the three
//! feedback architectures with their feedforward, and yaw control.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{diag3, rot_z, skew_z, wrap_angle};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Architecture {
    /// Geodetic gains and reference model.
    Cg,
    /// Heading-rotated gains, geodetic reference model.
    Cgh,
    /// Heading-frame gains and reference model.
    Ch,
}

impl Architecture {
    pub const ALL: [Architecture; 3] = [Architecture::Cg, Architecture::Cgh, Architecture::Ch];

    pub fn tag(self) -> &'static str {
        match self {
            Architecture::Cg => "cg",
            Architecture::Cgh => "cgh",
            Architecture::Ch => "ch",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Architecture::Cg => "C-G",
            Architecture::Cgh => "C-GH",
            Architecture::Ch => "C-H",
        }
    }

    pub fn heading_frame(self) -> bool {
        self == Architecture::Ch
    }
}

impl std::str::FromStr for Architecture {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "").as_str() {
            "cg" => Ok(Architecture::Cg),
            "cgh" => Ok(Architecture::Cgh),
            "ch" => Ok(Architecture::Ch),
            _ => Err(Error::InvalidParameter(format!("unknown architecture '{s}'"))),
        }
    }
}

/// Diagonal gains and reference-model parameters of one architecture.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainSet {
    pub kp_per_s2: [f64; 3],
    pub kv_per_s: [f64; 3],
    pub ka: [f64; 3],
    pub omega_a_rad_s: [f64; 3],
    pub xi_a: [f64; 3],
    pub l_per_s: [f64; 3],
    pub k_psi_per_s: f64,
    pub omega_psi_rad_s: f64,
}

impl GainSet {
    fn table(kp: [f64; 3], kv: [f64; 3], omega: [f64; 3]) -> Self {
        let omega_psi = 6.0;
        Self {
            kp_per_s2: kp,
            kv_per_s: kv,
            ka: [0.5, 0.5, 1.0],
            omega_a_rad_s: omega,
            xi_a: [1.0; 3],
            l_per_s: [3.0; 3],
            k_psi_per_s: omega_psi / 4.0,
            omega_psi_rad_s: omega_psi,
        }
    }

    pub fn preset(arch: Architecture) -> Self {
        match arch {
            Architecture::Cg => Self::table([1.0, 1.0, 2.0], [1.4, 1.4, 3.0], [7.5, 7.5, 12.0]),
            Architecture::Cgh => Self::table([1.0, 1.5, 2.0], [1.4, 2.0, 3.0], [7.5, 7.5, 12.0]),
            Architecture::Ch => Self::table([1.0, 1.5, 2.0], [1.4, 2.0, 3.0], [7.5, 10.0, 12.0]),
        }
    }

    pub fn validate(&self, arch: Architecture) -> Result<()> {
        let all = [
            self.kp_per_s2,
            self.kv_per_s,
            self.ka,
            self.omega_a_rad_s,
            self.xi_a,
            self.l_per_s,
        ];
        let ok = all
            .iter()
            .flatten()
            .chain([&self.k_psi_per_s, &self.omega_psi_rad_s])
            .all(|x| x.is_finite() && *x > 0.0);
        if !ok {
            return Err(Error::InvalidParameter("all gains must be positive".into()));
        }
        if arch != Architecture::Ch && (self.omega_a_rad_s[0] != self.omega_a_rad_s[1] || self.xi_a[0] != self.xi_a[1])
        {
            return Err(Error::InvalidParameter(format!(
                "{} needs equal horizontal reference-model bandwidth and damping",
                arch.name()
            )));
        }
        Ok(())
    }

    pub fn kp(&self) -> Matrix3<f64> {
        diag3(self.kp_per_s2)
    }

    pub fn kv(&self) -> Matrix3<f64> {
        diag3(self.kv_per_s)
    }

    pub fn ka(&self) -> Matrix3<f64> {
        diag3(self.ka)
    }

    pub fn omega(&self) -> Matrix3<f64> {
        diag3(self.omega_a_rad_s)
    }

    pub fn xi(&self) -> Matrix3<f64> {
        diag3(self.xi_a)
    }

    pub fn l(&self) -> Matrix3<f64> {
        diag3(self.l_per_s)
    }
}

/// Internal states of the outer loop. For C-H the acceleration model and
/// the observer live in the heading frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControllerState {
    pub a_d: Vector3<f64>,
    pub ad_dot: Vector3<f64>,
    pub z: Vector3<f64>,
    pub psi_d: f64,
    pub psid_d: f64,
}

impl ControllerState {
    /// `d_hat = z + L v` (`v` in the observer's frame).
    pub fn d_hat(&self, gains: &GainSet, v: &Vector3<f64>) -> Vector3<f64> {
        self.z + gains.l() * v
    }

    pub fn axpy(&self, h: f64, d: &ControllerState) -> ControllerState {
        ControllerState {
            a_d: self.a_d + d.a_d * h,
            ad_dot: self.ad_dot + d.ad_dot * h,
            z: self.z + d.z * h,
            psi_d: self.psi_d + d.psi_d * h,
            psid_d: self.psid_d + d.psid_d * h,
        }
    }
}

/// Nominal model of `v'` seen by the observer: `a_d + R_r D R_r' v_ar`.
pub fn observer_nominal(a_d: &Vector3<f64>, dbar_ff: &Matrix3<f64>, v_ar: &Vector3<f64>) -> Vector3<f64> {
    a_d + dbar_ff * v_ar
}

/// `z' = -L z - L (n + L v)`.
pub fn observer_rate(gains: &GainSet, z: &Vector3<f64>, v: &Vector3<f64>, nominal: &Vector3<f64>) -> Vector3<f64> {
    let l = gains.l();
    -l * z - l * (nominal + l * v)
}

/// Heading-frame observer, `d_hat_H = z_H + L R_psi' v`.
pub fn observer_rate_heading(
    gains: &GainSet,
    z_h: &Vector3<f64>,
    v: &Vector3<f64>,
    nominal: &Vector3<f64>,
    psi: f64,
    psid: f64,
) -> Vector3<f64> {
    let l = gains.l();
    let rt = rot_z(psi).transpose();
    let v_h = rt * v;
    -l * z_h - l * (rt * nominal + l * v_h - skew_z(psid) * v_h)
}

/// One RK4 step of the observer. `signals(t)` returns `(v, nominal)`.
pub fn observer_step(
    gains: &GainSet,
    z: &Vector3<f64>,
    t: f64,
    dt: f64,
    signals: impl Fn(f64) -> (Vector3<f64>, Vector3<f64>),
) -> Vector3<f64> {
    let f = |t: f64, z: &Vector3<f64>| {
        let (v, n) = signals(t);
        observer_rate(gains, z, &v, &n)
    };
    let k1 = f(t, z);
    let k2 = f(t + dt / 2.0, &(z + k1 * (dt / 2.0)));
    let k3 = f(t + dt / 2.0, &(z + k2 * (dt / 2.0)));
    let k4 = f(t + dt, &(z + k3 * dt));
    z + (k1 + 2.0 * k2 + 2.0 * k3 + k4) * (dt / 6.0)
}

fn linear_law(
    kp: &Matrix3<f64>,
    kv: &Matrix3<f64>,
    ka: &Matrix3<f64>,
    e_p: &Vector3<f64>,
    e_v: &Vector3<f64>,
    e_a: &Vector3<f64>,
    d_hat: &Vector3<f64>,
) -> Vector3<f64> {
    -kp * e_p - kv * e_v - ka * e_a - (Matrix3::identity() + ka) * d_hat
}

/// `nu_fb = -Kp e_p - Kv e_v - Ka e_a - (1 + Ka) d_hat`.
pub fn control_cg(
    e_p: &Vector3<f64>,
    e_v: &Vector3<f64>,
    e_a: &Vector3<f64>,
    d_hat: &Vector3<f64>,
    gains: &GainSet,
) -> Vector3<f64> {
    linear_law(&gains.kp(), &gains.kv(), &gains.ka(), e_p, e_v, e_a, d_hat)
}

/// `R_psi K R_psi'`.
pub fn rotate_gain(k: &Matrix3<f64>, psi: f64) -> Matrix3<f64> {
    let r = rot_z(psi);
    r * k * r.transpose()
}

/// The geodetic law with every gain rotated to the heading `psi`.
pub fn control_cgh(
    e_p: &Vector3<f64>,
    e_v: &Vector3<f64>,
    e_a: &Vector3<f64>,
    d_hat: &Vector3<f64>,
    psi: f64,
    gains: &GainSet,
) -> Vector3<f64> {
    let kp = rotate_gain(&gains.kp(), psi);
    let kv = rotate_gain(&gains.kv(), psi);
    let ka = rotate_gain(&gains.ka(), psi);
    linear_law(&kp, &kv, &ka, e_p, e_v, e_a, d_hat)
}

/// Heading-frame law with compensation of the yaw-induced coupling.
pub fn control_ch(
    e_ph: &Vector3<f64>,
    e_ph_dot: &Vector3<f64>,
    e_ah: &Vector3<f64>,
    d_hat_h: &Vector3<f64>,
    psid: f64,
    psidd: f64,
    gains: &GainSet,
) -> Vector3<f64> {
    let s = skew_z(psid);
    control_cg(e_ph, e_ph_dot, e_ah, d_hat_h, gains) + 2.0 * s * e_ph_dot + (s * s + skew_z(psidd)) * e_ph
}

/// `nu_ff = a_t + 2 Xi Omega^-1 a_t' + Omega^-2 a_t''`, in whatever frame
/// the triple is expressed.
pub fn feedforward_nu(a_t: &Vector3<f64>, j_t: &Vector3<f64>, s_t: &Vector3<f64>, gains: &GainSet) -> Vector3<f64> {
    Vector3::from_fn(|i, _| {
        let w = gains.omega_a_rad_s[i];
        a_t[i] + 2.0 * gains.xi_a[i] / w * j_t[i] + s_t[i] / (w * w)
    })
}

/// `a_d'' = -Omega^2 (a_d - nu) - 2 Omega Xi a_d'`.
pub fn accel_model_rate(a_d: &Vector3<f64>, ad_dot: &Vector3<f64>, nu: &Vector3<f64>, gains: &GainSet) -> Vector3<f64> {
    Vector3::from_fn(|i, _| {
        let w = gains.omega_a_rad_s[i];
        -w * w * (a_d[i] - nu[i]) - 2.0 * w * gains.xi_a[i] * ad_dot[i]
    })
}

/// `nu_psi = psi_r' + psi_r'' / omega_psi - k_psi e_psi`, with `e_psi`
/// wrapped to `(-pi, pi]`.
pub fn yaw_virtual_input(e_psi: f64, psid_r: f64, psidd_r: f64, gains: &GainSet) -> f64 {
    psid_r + psidd_r / gains.omega_psi_rad_s - gains.k_psi_per_s * wrap_angle(e_psi)
}

/// Yaw reference system `psi_d'' = -omega_psi (psi_d' - nu_psi)`.
pub fn yaw_reference_accel(psid_d: f64, nu_psi: f64, gains: &GainSet) -> f64 {
    -gains.omega_psi_rad_s * (psid_d - nu_psi)
}

/// Yaw control: returns `nu_psi` and the yaw reference-state derivative
/// `(psi_d', psi_d'')`.
pub fn yaw_control(e_psi: f64, psid_r: f64, psidd_r: f64, gains: &GainSet, state: &ControllerState) -> (f64, f64, f64) {
    let nu = yaw_virtual_input(e_psi, psid_r, psidd_r, gains);
    (nu, state.psid_d, yaw_reference_accel(state.psid_d, nu, gains))
}
