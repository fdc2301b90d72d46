//! Small geometry and matrix helpers shared across the stack.

use std::f64::consts::PI;

use nalgebra::{DMatrix, Matrix3, Rotation3, Vector3};

pub const GRAVITY: f64 = 9.81;

pub fn e_z() -> Vector3<f64> {
    Vector3::new(0.0, 0.0, 1.0)
}

pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Inverse of [`skew`]; reads the skew-symmetric part.
pub fn vee(s: &Matrix3<f64>) -> Vector3<f64> {
    Vector3::new(
        0.5 * (s[(2, 1)] - s[(1, 2)]),
        0.5 * (s[(0, 2)] - s[(2, 0)]),
        0.5 * (s[(1, 0)] - s[(0, 1)]),
    )
}

/// Skew matrix of a rotation about the vertical axis with rate `w`.
pub fn skew_z(w: f64) -> Matrix3<f64> {
    skew(&Vector3::new(0.0, 0.0, w))
}

pub fn rot_z(psi: f64) -> Matrix3<f64> {
    let (s, c) = psi.sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

/// Z-Y-X Euler rotation (body to geodetic).
pub fn euler_to_rot(phi: f64, theta: f64, psi: f64) -> Matrix3<f64> {
    *Rotation3::from_euler_angles(phi, theta, psi).matrix()
}

/// Z-Y-X Euler angles `(phi, theta, psi)` of a rotation matrix.
pub fn rot_to_euler(r: &Matrix3<f64>) -> (f64, f64, f64) {
    let theta = (-r[(2, 0)]).clamp(-1.0, 1.0).asin();
    let phi = r[(2, 1)].atan2(r[(2, 2)]);
    let psi = r[(1, 0)].atan2(r[(0, 0)]);
    (phi, theta, psi)
}

/// Angle between the body z-axes of two attitudes (rad).
pub fn tilt_between(a: &Matrix3<f64>, b: &Matrix3<f64>) -> f64 {
    let za = a.column(2);
    let zb = b.column(2);
    za.cross(&zb).norm().atan2(za.dot(&zb))
}

/// Wraps an angle into (-pi, pi].
pub fn wrap_angle(a: f64) -> f64 {
    let mut x = (a + PI).rem_euclid(2.0 * PI) - PI;
    if x <= -PI {
        x += 2.0 * PI;
    }
    x
}

/// Projects a nearly orthonormal matrix back onto SO(3).
pub fn orthonormalize(r: &Matrix3<f64>) -> Matrix3<f64> {
    let svd = r.svd(true, true);
    let u = svd.u.unwrap();
    let vt = svd.v_t.unwrap();
    let mut out = u * vt;
    if out.determinant() < 0.0 {
        let mut u2 = u;
        u2.column_mut(2).neg_mut();
        out = u2 * vt;
    }
    out
}

/// Rodrigues rotation about a unit axis.
pub fn axis_angle(axis: &Vector3<f64>, angle: f64) -> Matrix3<f64> {
    let k = skew(axis);
    Matrix3::identity() + k * angle.sin() + k * k * (1.0 - angle.cos())
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Largest eigenvalue of a symmetric matrix.
pub fn max_eig(m: &DMatrix<f64>) -> f64 {
    symmetrize(m)
        .symmetric_eigenvalues()
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max)
}

pub fn min_eig(m: &DMatrix<f64>) -> f64 {
    symmetrize(m)
        .symmetric_eigenvalues()
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}

/// Spectral norm.
pub fn norm2(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().max()
}

pub fn diag3(d: [f64; 3]) -> Matrix3<f64> {
    Matrix3::from_diagonal(&Vector3::from(d))
}

/// Copies a 3x3 matrix into the block at `(r, c)`.
pub fn set_block3(m: &mut DMatrix<f64>, r: usize, c: usize, b: &Matrix3<f64>) {
    m.view_mut((r, c), (3, 3)).copy_from(b);
}
