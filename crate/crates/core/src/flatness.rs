//! Flatness-based reference attitude, body rates and drag-compensating
//! feedforward.
//!
//! Time derivatives are propagated through the body-axis construction with
//! truncated Taylor series, which is exact differentiation of the force
//! balance rather than a numerical approximation.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{e_z, skew, GRAVITY};
use crate::reference::ReferenceSample;
use crate::taylor::{body_rates, TMat3, TVec3, Tay};

const DEGENERACY_EPS: f64 = 1e-6;

/// Linear body-frame drag `diag(d_x, d_y, d_z)`, all entries <= 0 (1/s).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DragJson", into = "DragJson")]
pub struct DragModel {
    d: [f64; 3],
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DragJson {
    coefficients_per_s: [f64; 3],
}

impl TryFrom<DragJson> for DragModel {
    type Error = Error;
    fn try_from(j: DragJson) -> Result<Self> {
        DragModel::new(j.coefficients_per_s)
    }
}

impl From<DragModel> for DragJson {
    fn from(d: DragModel) -> Self {
        DragJson {
            coefficients_per_s: d.d,
        }
    }
}

impl Default for DragModel {
    fn default() -> Self {
        Self {
            d: [-0.05, -0.45, -0.10],
        }
    }
}

impl DragModel {
    pub fn new(d: [f64; 3]) -> Result<Self> {
        if d.iter().any(|x| !x.is_finite() || *x > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "drag coefficients must be <= 0, got {d:?}"
            )));
        }
        Ok(Self { d })
    }

    pub fn zero() -> Self {
        Self { d: [0.0; 3] }
    }

    pub fn coefficients(&self) -> [f64; 3] {
        self.d
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        crate::linalg::diag3(self.d)
    }

    /// Geodetic drag matrix `R D R'`.
    pub fn rotated(&self, r: &Matrix3<f64>) -> Matrix3<f64> {
        r * self.matrix() * r.transpose()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlatnessOutput {
    pub r: Matrix3<f64>,
    pub omega: Vector3<f64>,
    pub omegad: Vector3<f64>,
    pub a_t: Vector3<f64>,
    pub j_t: Vector3<f64>,
    pub s_t: Vector3<f64>,
    pub f: f64,
}

struct Jets {
    r: TMat3<3>,
    f: Tay<3>,
    alpha: TVec3<3>,
    beta: TVec3<3>,
}

fn jets(sample: &ReferenceSample, v_w: &Vector3<f64>, drag: &DragModel) -> Result<Jets> {
    let [dx, dy, dz] = drag.d;
    let vel = TVec3::<3>::from_derivs(&[sample.v - v_w, sample.a, sample.j]);
    let acc = TVec3::<3>::from_derivs(&[sample.a, sample.j, sample.s]);
    let psi = Tay::<3>::from_derivs(&[sample.psi, sample.psid, sample.psidd]);
    let g = TVec3::constant(&(e_z() * GRAVITY));
    let thrust_dir = g.sub(&acc);
    let alpha = thrust_dir.add(&vel.scale_f(dx));
    let beta = thrust_dir.add(&vel.scale_f(dy));
    let (sp, cp) = psi.sin_cos();
    let y_c = TVec3([-sp, cp, Tay::zero()]);

    let xc = y_c.cross(&alpha);
    if xc.value().norm() <= DEGENERACY_EPS {
        return Err(Error::Singular(format!(
            "|y_C x alpha| = {:.3e} at t = {}",
            xc.value().norm(),
            sample.t
        )));
    }
    let x_b = xc.normalize();
    let yc = beta.cross(&x_b);
    if yc.value().norm() <= DEGENERACY_EPS {
        return Err(Error::Singular(format!(
            "|beta x x_B| = {:.3e} at t = {}",
            yc.value().norm(),
            sample.t
        )));
    }
    let y_b = yc.normalize();
    let z_b = x_b.cross(&y_b);
    let f = z_b.dot(&thrust_dir) + z_b.dot(&vel) * dz;
    Ok(Jets {
        r: TMat3::from_columns(x_b, y_b, z_b),
        f,
        alpha,
        beta,
    })
}

/// Reference attitude `R_r` (body to geodetic) and mass-normalized thrust.
pub fn reference_attitude(
    sample: &ReferenceSample,
    v_w: &Vector3<f64>,
    drag: &DragModel,
) -> Result<(Matrix3<f64>, f64)> {
    let j = jets(sample, v_w, drag)?;
    Ok((j.r.d(0), j.f.value()))
}

/// Body rates and body angular accelerations of the reference attitude.
pub fn reference_rates(
    sample: &ReferenceSample,
    v_w: &Vector3<f64>,
    drag: &DragModel,
) -> Result<(Vector3<f64>, Vector3<f64>)> {
    Ok(body_rates(&jets(sample, v_w, drag)?.r))
}

/// Time derivatives of `D_bar = R D R'` from the body rates.
pub fn drag_derivatives(
    drag: &DragModel,
    r: &Matrix3<f64>,
    omega: &Vector3<f64>,
    omegad: &Vector3<f64>,
) -> (Matrix3<f64>, Matrix3<f64>, Matrix3<f64>) {
    let d = drag.matrix();
    let s = skew(omega);
    let sd = skew(omegad);
    let rt = r.transpose();
    let d0 = r * d * rt;
    let d1 = r * (s * d + d * s.transpose()) * rt;
    let d2 = r * (s * s * d + d * s * s + 2.0 * s * d * s.transpose() + sd * d + d * sd.transpose()) * rt;
    (d0, d1, d2)
}

/// Feedforward acceleration, jerk and snap cancelling the nominal drag.
pub fn feedforward_signals(
    sample: &ReferenceSample,
    v_w: &Vector3<f64>,
    drag: &DragModel,
    r: &Matrix3<f64>,
    omega: &Vector3<f64>,
    omegad: &Vector3<f64>,
) -> (Vector3<f64>, Vector3<f64>, Vector3<f64>) {
    let (d0, d1, d2) = drag_derivatives(drag, r, omega, omegad);
    let v_ar = sample.v - v_w;
    let a_t = sample.a - d0 * v_ar;
    let j_t = sample.j - (d0 * sample.a + d1 * v_ar);
    let s_t = sample.s - (d0 * sample.j + 2.0 * d1 * sample.a + d2 * v_ar);
    (a_t, j_t, s_t)
}

/// Everything the controllers need from the flat output in one pass.
pub fn flatness(sample: &ReferenceSample, v_w: &Vector3<f64>, drag: &DragModel) -> Result<FlatnessOutput> {
    let j = jets(sample, v_w, drag)?;
    let r = j.r.d(0);
    let (omega, omegad) = body_rates(&j.r);
    let (a_t, j_t, s_t) = feedforward_signals(sample, v_w, drag, &r, &omega, &omegad);
    Ok(FlatnessOutput {
        r,
        omega,
        omegad,
        a_t,
        j_t,
        s_t,
        f: j.f.value(),
    })
}

/// `(x_B' alpha, y_B' beta)`; both vanish for a consistent construction.
pub fn orthogonality_residuals(sample: &ReferenceSample, v_w: &Vector3<f64>, drag: &DragModel) -> Result<(f64, f64)> {
    let j = jets(sample, v_w, drag)?;
    let r = j.r.d(0);
    Ok((r.column(0).dot(&j.alpha.value()), r.column(1).dot(&j.beta.value())))
}
