//! Attitude-subsystem interface: second-order reference dynamics for roll,
//! pitch and thrust, a first-order body yaw-rate channel, the map between
//! heading-frame acceleration and attitude, and the reference-model
//! inversions that make the inner loop reproduce a desired acceleration.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{e_z, euler_to_rot, GRAVITY};
use crate::taylor::Tay;

/// Smallest admissible thrust in the inverse map (m/s^2).
pub const F_MIN: f64 = 1.0;
/// Smallest admissible `cos(phi) cos(theta)` in the yaw inversion.
pub const G2_MIN: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttitudeRefModel {
    /// `(omega_phi, omega_theta, omega_f)`.
    pub bandwidth_rad_s: [f64; 3],
    pub damping: [f64; 3],
    pub yaw_rate_bandwidth_rad_s: f64,
}

impl Default for AttitudeRefModel {
    fn default() -> Self {
        Self {
            bandwidth_rad_s: [8.0, 8.0, 12.0],
            damping: [1.0; 3],
            yaw_rate_bandwidth_rad_s: 6.0,
        }
    }
}

impl AttitudeRefModel {
    pub fn validate(&self) -> Result<()> {
        let ok = self
            .bandwidth_rad_s
            .iter()
            .chain(&self.damping)
            .all(|x| x.is_finite() && *x > 0.0)
            && self.yaw_rate_bandwidth_rad_s > 0.0;
        if !ok {
            return Err(Error::InvalidParameter(
                "attitude reference bandwidths and dampings must be positive".into(),
            ));
        }
        Ok(())
    }

    fn omega(&self) -> Vector3<f64> {
        Vector3::from(self.bandwidth_rad_s)
    }

    fn xi(&self) -> Vector3<f64> {
        Vector3::from(self.damping)
    }

    /// `rho'' = -Omega^2 (rho - rho_c) - 2 Omega Xi rho'`.
    pub fn rho_accel(&self, rho: &Vector3<f64>, rhod: &Vector3<f64>, rho_c: &Vector3<f64>) -> Vector3<f64> {
        let w = self.omega();
        let xi = self.xi();
        Vector3::from_fn(|i, _| -w[i] * w[i] * (rho[i] - rho_c[i]) - 2.0 * w[i] * xi[i] * rhod[i])
    }
}

/// State of the attitude reference dynamics. `psi` is the Euler yaw
/// implied by integrating the body yaw rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttitudeRefState {
    /// `(phi_r, theta_r, f)`.
    pub rho: Vector3<f64>,
    pub rhod: Vector3<f64>,
    pub r_r: f64,
    pub psi: f64,
}

impl AttitudeRefState {
    pub fn phi(&self) -> f64 {
        self.rho.x
    }

    pub fn theta(&self) -> f64 {
        self.rho.y
    }

    pub fn thrust(&self) -> f64 {
        self.rho.z
    }

    pub fn rotation(&self) -> Matrix3<f64> {
        euler_to_rot(self.rho.x, self.rho.y, self.psi)
    }

    /// Geodetic acceleration generated by thrust and gravity.
    pub fn accel(&self) -> Vector3<f64> {
        attitude_to_accel(&self.rho, self.psi)
    }

    /// Euler yaw rate from the body yaw rate.
    pub fn psi_rate(&self) -> f64 {
        let (sf, cf) = self.rho.x.sin_cos();
        (self.r_r + sf * self.rhod.y) / (cf * self.rho.y.cos())
    }

    /// Time derivative of the state under commands `(rho_c, r_c)`.
    pub fn derivative(&self, model: &AttitudeRefModel, rho_c: &Vector3<f64>, r_c: f64) -> AttitudeRefState {
        AttitudeRefState {
            rho: self.rhod,
            rhod: model.rho_accel(&self.rho, &self.rhod, rho_c),
            r_r: -model.yaw_rate_bandwidth_rad_s * (self.r_r - r_c),
            psi: self.psi_rate(),
        }
    }

    pub fn axpy(&self, h: f64, d: &AttitudeRefState) -> AttitudeRefState {
        AttitudeRefState {
            rho: self.rho + d.rho * h,
            rhod: self.rhod + d.rhod * h,
            r_r: self.r_r + d.r_r * h,
            psi: self.psi + d.psi * h,
        }
    }
}

/// One RK4 step with commands held constant over the step.
pub fn step_attitude_reference(
    model: &AttitudeRefModel,
    state: &AttitudeRefState,
    rho_c: &Vector3<f64>,
    r_c: f64,
    dt: f64,
) -> AttitudeRefState {
    let k1 = state.derivative(model, rho_c, r_c);
    let k2 = state.axpy(dt / 2.0, &k1).derivative(model, rho_c, r_c);
    let k3 = state.axpy(dt / 2.0, &k2).derivative(model, rho_c, r_c);
    let k4 = state.axpy(dt, &k3).derivative(model, rho_c, r_c);
    let mut out = *state;
    for (k, w) in [(k1, 1.0), (k2, 2.0), (k3, 2.0), (k4, 1.0)] {
        out = out.axpy(dt * w / 6.0, &k);
    }
    out
}

/// `a_c = -R e_z f + g e_z` for `rho = (phi, theta, f)` at heading `psi`.
pub fn attitude_to_accel(rho: &Vector3<f64>, psi: f64) -> Vector3<f64> {
    -euler_to_rot(rho.x, rho.y, psi) * e_z() * rho.z + e_z() * GRAVITY
}

fn phi_map<const K: usize>(a: [Tay<K>; 3]) -> Result<[Tay<K>; 3]> {
    let [ax, ay, az] = a;
    let down = az + (-GRAVITY);
    if !(down.value() < 0.0) {
        return Err(Error::Domain(format!(
            "a_z - g = {:.4} is not negative (inverted thrust)",
            down.value()
        )));
    }
    let f = (ax * ax + ay * ay + down * down).sqrt();
    if !(f.value() > F_MIN) {
        return Err(Error::Domain(format!("thrust {:.4} below minimum {F_MIN}", f.value())));
    }
    let ratio = ay / f;
    if ratio.value().abs() >= 1.0 {
        return Err(Error::Domain("|a_y| >= f".into()));
    }
    Ok([ratio.asin(), (ax / down).atan(), f])
}

/// Inverse input transformation: thrust, pitch and roll that generate the
/// heading-frame acceleration `a_ch`. Returned as `(f, theta_r, phi_r)`.
pub fn accel_to_attitude(a_ch: &Vector3<f64>) -> Result<(f64, f64, f64)> {
    let [phi, theta, f] = phi_map([Tay::<1>::constant(a_ch.x), Tay::constant(a_ch.y), Tay::constant(a_ch.z)])?;
    Ok((f.value(), theta.value(), phi.value()))
}

/// `Phi` and its first two time derivatives along a geodetic acceleration
/// trajectory `(a, j, s)` seen from a frame with yaw `(psi, psi', psi'')`.
/// Each entry is `(phi, theta, f)`.
pub fn phi_derivatives(
    a: &Vector3<f64>,
    j: &Vector3<f64>,
    s: &Vector3<f64>,
    psi: [f64; 3],
) -> Result<[Vector3<f64>; 3]> {
    let ps = Tay::<3>::from_derivs(&psi);
    let (sp, cp) = ps.sin_cos();
    let comp = |i: usize| Tay::<3>::from_derivs(&[a[i], j[i], s[i]]);
    let (ax, ay, az) = (comp(0), comp(1), comp(2));
    let ah = [cp * ax + sp * ay, cp * ay - sp * ax, az];
    let rho = phi_map(ah)?;
    let d = |k: usize| Vector3::new(rho[0].d(k), rho[1].d(k), rho[2].d(k));
    Ok([d(0), d(1), d(2)])
}

/// Heading-frame jerk and snap of a geodetic acceleration signal.
pub fn heading_frame_derivatives(
    a: &Vector3<f64>,
    j: &Vector3<f64>,
    s: &Vector3<f64>,
    psi: f64,
    psid: f64,
    psidd: f64,
) -> (Vector3<f64>, Vector3<f64>, Vector3<f64>) {
    let rt = crate::linalg::rot_z(psi).transpose();
    let sk = crate::linalg::skew_z(psid);
    let skd = crate::linalg::skew_z(psidd);
    let ah = rt * a;
    let jh = rt * j - sk * ah;
    let sh = rt * s - 2.0 * sk * rt * j + (sk * sk - skd) * ah;
    (ah, jh, sh)
}

/// Result of inverting the attitude reference model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Inversion {
    pub rho_c: Vector3<f64>,
    /// `Phi`, `Phi'`, `Phi''` at the current instant.
    pub phi: [Vector3<f64>; 3],
}

/// Command `rho_c = Phi + 2 Xi Omega^-1 Phi' + Omega^-2 Phi''` so that the
/// reference dynamics reproduce `Phi(a_dH)` from matched initial conditions.
pub fn invert_reference_model(
    model: &AttitudeRefModel,
    a_d: &Vector3<f64>,
    j_d: &Vector3<f64>,
    s_d: &Vector3<f64>,
    psi: f64,
    psid: f64,
    psidd: f64,
) -> Result<Inversion> {
    let phi = phi_derivatives(a_d, j_d, s_d, [psi, psid, psidd])?;
    let w = model.omega();
    let xi = model.xi();
    let rho_c = Vector3::from_fn(|i, _| phi[0][i] + 2.0 * xi[i] / w[i] * phi[1][i] + phi[2][i] / (w[i] * w[i]));
    Ok(Inversion { rho_c, phi })
}

/// Yaw-rate command `r_c = r_r + (g1 psi_d' + g2 psi_d'' + g3) / omega_r`
/// making the Euler yaw rate of the reference attitude follow `psid_d`.
pub fn yaw_channel_inversion(
    model: &AttitudeRefModel,
    state: &AttitudeRefState,
    rho_c: &Vector3<f64>,
    psid_d: f64,
    psidd_d: f64,
) -> Result<f64> {
    let (sf, cf) = state.rho.x.sin_cos();
    let (st, ct) = state.rho.y.sin_cos();
    let g2 = cf * ct;
    if !(g2 > G2_MIN) {
        return Err(Error::Domain(format!(
            "cos(phi)cos(theta) = {g2:.4} below margin {G2_MIN}"
        )));
    }
    let phid = state.rhod.x;
    let thetad = state.rhod.y;
    let thetadd = model.rho_accel(&state.rho, &state.rhod, rho_c).y;
    let g1 = -sf * ct * phid - cf * st * thetad;
    let g3 = -cf * phid * thetad - sf * thetadd;
    Ok(state.r_r + (g1 * psid_d + g2 * psidd_d + g3) / model.yaw_rate_bandwidth_rad_s)
}

/// Reference state reproducing `Phi` exactly at this instant, with body
/// yaw rate consistent with `psid`.
pub fn matched_state(phi: &[Vector3<f64>; 3], psi: f64, psid: f64) -> AttitudeRefState {
    let rho = phi[0];
    let rhod = phi[1];
    let r_r = -rho.x.sin() * rhod.y + rho.x.cos() * rho.y.cos() * psid;
    AttitudeRefState { rho, rhod, r_r, psi }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hover_maps_to_level_attitude() {
        let (f, th, ph) = accel_to_attitude(&Vector3::zeros()).unwrap();
        assert_eq!((f, th, ph), (GRAVITY, 0.0, 0.0));
    }

    #[test]
    fn lateral_case() {
        let (f, th, ph) = accel_to_attitude(&Vector3::new(0.0, GRAVITY, 0.0)).unwrap();
        assert!((f - GRAVITY * 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(th, 0.0);
        assert!((ph - std::f64::consts::FRAC_PI_4).abs() < 1e-15);
    }

    #[test]
    fn domain_errors() {
        assert!(matches!(
            accel_to_attitude(&Vector3::new(0.0, 0.0, GRAVITY)),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            accel_to_attitude(&Vector3::new(0.0, 0.0, GRAVITY - 0.5)),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn equilibrium_is_stationary() {
        let m = AttitudeRefModel::default();
        let s = AttitudeRefState {
            rho: Vector3::new(0.1, -0.2, 9.0),
            rhod: Vector3::zeros(),
            r_r: 0.3,
            psi: 0.0,
        };
        let next = step_attitude_reference(&m, &s, &s.rho, 0.3, 0.002);
        assert_eq!(next.rho, s.rho);
        assert_eq!(next.rhod, s.rhod);
        assert_eq!(next.r_r, s.r_r);
    }
}
