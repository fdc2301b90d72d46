//! Truncated Taylor-series arithmetic.
//!
//! A [`Tay<K>`] carries the first `K` normalized Taylor coefficients of a
//! scalar signal around an expansion point, `c[k] = x^(k)(t0) / k!`. All
//! arithmetic is exact up to the truncation order, so composing smooth
//! functions of a trajectory yields their time derivatives without any
//! numerical differentiation.

use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub};

use nalgebra::{Matrix3, Vector3};

const FACTORIAL: [f64; 9] = [1.0, 1.0, 2.0, 6.0, 24.0, 120.0, 720.0, 5040.0, 40320.0];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tay<const K: usize> {
    pub c: [f64; K],
}

impl<const K: usize> Tay<K> {
    pub fn constant(v: f64) -> Self {
        let mut c = [0.0; K];
        c[0] = v;
        Self { c }
    }

    pub fn zero() -> Self {
        Self { c: [0.0; K] }
    }

    /// Builds a series from the signal value and its successive derivatives.
    /// Missing trailing derivatives are zero.
    pub fn from_derivs(d: &[f64]) -> Self {
        let mut c = [0.0; K];
        for (k, v) in d.iter().take(K).enumerate() {
            c[k] = v / FACTORIAL[k];
        }
        Self { c }
    }

    /// `k`-th time derivative at the expansion point.
    pub fn d(&self, k: usize) -> f64 {
        self.c[k] * FACTORIAL[k]
    }

    pub fn value(&self) -> f64 {
        self.c[0]
    }

    pub fn derivs(&self) -> [f64; K] {
        let mut out = [0.0; K];
        for (k, o) in out.iter_mut().enumerate() {
            *o = self.d(k);
        }
        out
    }

    /// Series of the time derivative (the last coefficient is lost).
    pub fn derivative(&self) -> Self {
        let mut c = [0.0; K];
        for k in 0..K.saturating_sub(1) {
            c[k] = (k + 1) as f64 * self.c[k + 1];
        }
        Self { c }
    }

    /// Antiderivative series with the given constant term.
    fn integrate(&self, c0: f64) -> Self {
        let mut c = [0.0; K];
        c[0] = c0;
        for k in 1..K {
            c[k] = self.c[k - 1] / k as f64;
        }
        Self { c }
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut c = self.c;
        for v in &mut c {
            *v *= s;
        }
        Self { c }
    }

    pub fn recip(&self) -> Self {
        Self::constant(1.0) / *self
    }

    pub fn sqrt(&self) -> Self {
        let mut s = [0.0; K];
        s[0] = self.c[0].sqrt();
        for k in 1..K {
            let mut acc = self.c[k];
            for j in 1..k {
                acc -= s[j] * s[k - j];
            }
            s[k] = acc / (2.0 * s[0]);
        }
        Self { c: s }
    }

    pub fn sin_cos(&self) -> (Self, Self) {
        let mut s = [0.0; K];
        let mut c = [0.0; K];
        s[0] = self.c[0].sin();
        c[0] = self.c[0].cos();
        for k in 1..K {
            let mut ds = 0.0;
            let mut dc = 0.0;
            for j in 1..=k {
                let ju = j as f64 * self.c[j];
                ds += ju * c[k - j];
                dc -= ju * s[k - j];
            }
            s[k] = ds / k as f64;
            c[k] = dc / k as f64;
        }
        (Self { c: s }, Self { c })
    }

    pub fn sin(&self) -> Self {
        self.sin_cos().0
    }

    pub fn cos(&self) -> Self {
        self.sin_cos().1
    }

    pub fn atan(&self) -> Self {
        let rate = self.derivative() / (Self::constant(1.0) + *self * *self);
        rate.integrate(self.c[0].atan())
    }

    pub fn asin(&self) -> Self {
        let rate = self.derivative() / (Self::constant(1.0) - *self * *self).sqrt();
        rate.integrate(self.c[0].asin())
    }

    /// Four-quadrant angle of `(x, y)`; the constant term lies in (-pi, pi].
    pub fn atan2(y: Self, x: Self) -> Self {
        let rate = (x * y.derivative() - y * x.derivative()) / (x * x + y * y);
        rate.integrate(y.c[0].atan2(x.c[0]))
    }
}

impl<const K: usize> Add for Tay<K> {
    type Output = Self;
    fn add(mut self, rhs: Self) -> Self {
        for k in 0..K {
            self.c[k] += rhs.c[k];
        }
        self
    }
}

impl<const K: usize> AddAssign for Tay<K> {
    fn add_assign(&mut self, rhs: Self) {
        for k in 0..K {
            self.c[k] += rhs.c[k];
        }
    }
}

impl<const K: usize> Sub for Tay<K> {
    type Output = Self;
    fn sub(mut self, rhs: Self) -> Self {
        for k in 0..K {
            self.c[k] -= rhs.c[k];
        }
        self
    }
}

impl<const K: usize> Neg for Tay<K> {
    type Output = Self;
    fn neg(self) -> Self {
        self.scale(-1.0)
    }
}

impl<const K: usize> Mul for Tay<K> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        let mut c = [0.0; K];
        for k in 0..K {
            let mut acc = 0.0;
            for j in 0..=k {
                acc += self.c[j] * rhs.c[k - j];
            }
            c[k] = acc;
        }
        Self { c }
    }
}

impl<const K: usize> Mul<f64> for Tay<K> {
    type Output = Self;
    fn mul(self, rhs: f64) -> Self {
        self.scale(rhs)
    }
}

impl<const K: usize> Add<f64> for Tay<K> {
    type Output = Self;
    fn add(mut self, rhs: f64) -> Self {
        self.c[0] += rhs;
        self
    }
}

impl<const K: usize> Div for Tay<K> {
    type Output = Self;
    fn div(self, rhs: Self) -> Self {
        let mut q = [0.0; K];
        for k in 0..K {
            let mut acc = self.c[k];
            for j in 1..=k {
                acc -= rhs.c[j] * q[k - j];
            }
            q[k] = acc / rhs.c[0];
        }
        Self { c: q }
    }
}

/// 3-vector of Taylor series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TVec3<const K: usize>(pub [Tay<K>; 3]);

impl<const K: usize> TVec3<K> {
    pub fn zero() -> Self {
        Self([Tay::zero(); 3])
    }

    pub fn constant(v: &Vector3<f64>) -> Self {
        Self([Tay::constant(v.x), Tay::constant(v.y), Tay::constant(v.z)])
    }

    /// Builds a vector series from the value and successive derivative vectors.
    pub fn from_derivs(d: &[Vector3<f64>]) -> Self {
        let comp = |i: usize| {
            let v: Vec<f64> = d.iter().map(|x| x[i]).collect();
            Tay::from_derivs(&v)
        };
        Self([comp(0), comp(1), comp(2)])
    }

    pub fn d(&self, k: usize) -> Vector3<f64> {
        Vector3::new(self.0[0].d(k), self.0[1].d(k), self.0[2].d(k))
    }

    pub fn value(&self) -> Vector3<f64> {
        self.d(0)
    }

    pub fn dot(&self, o: &Self) -> Tay<K> {
        self.0[0] * o.0[0] + self.0[1] * o.0[1] + self.0[2] * o.0[2]
    }

    pub fn cross(&self, o: &Self) -> Self {
        let [a1, a2, a3] = self.0;
        let [b1, b2, b3] = o.0;
        Self([a2 * b3 - a3 * b2, a3 * b1 - a1 * b3, a1 * b2 - a2 * b1])
    }

    pub fn norm(&self) -> Tay<K> {
        self.dot(self).sqrt()
    }

    pub fn scale(&self, s: Tay<K>) -> Self {
        Self([self.0[0] * s, self.0[1] * s, self.0[2] * s])
    }

    pub fn scale_f(&self, s: f64) -> Self {
        Self([self.0[0] * s, self.0[1] * s, self.0[2] * s])
    }

    pub fn normalize(&self) -> Self {
        self.scale(self.norm().recip())
    }

    pub fn add(&self, o: &Self) -> Self {
        Self([self.0[0] + o.0[0], self.0[1] + o.0[1], self.0[2] + o.0[2]])
    }

    pub fn sub(&self, o: &Self) -> Self {
        Self([self.0[0] - o.0[0], self.0[1] - o.0[1], self.0[2] - o.0[2]])
    }
}

/// Columns of a rotation-matrix series.
#[derive(Debug, Clone, Copy)]
pub struct TMat3<const K: usize> {
    pub cols: [TVec3<K>; 3],
}

impl<const K: usize> TMat3<K> {
    pub fn from_columns(x: TVec3<K>, y: TVec3<K>, z: TVec3<K>) -> Self {
        Self { cols: [x, y, z] }
    }

    pub fn d(&self, k: usize) -> Matrix3<f64> {
        Matrix3::from_columns(&[self.cols[0].d(k), self.cols[1].d(k), self.cols[2].d(k)])
    }

    /// Z-Y-X Euler rotation `Rz(psi) Ry(theta) Rx(phi)` as a series.
    pub fn from_euler(phi: Tay<K>, theta: Tay<K>, psi: Tay<K>) -> Self {
        let (sf, cf) = phi.sin_cos();
        let (st, ct) = theta.sin_cos();
        let (sp, cp) = psi.sin_cos();
        let x = TVec3([cp * ct, sp * ct, -st]);
        let y = TVec3([cp * st * sf - sp * cf, sp * st * sf + cp * cf, ct * sf]);
        let z = TVec3([cp * st * cf + sp * sf, sp * st * cf - cp * sf, ct * cf]);
        Self::from_columns(x, y, z)
    }
}

/// Body rates and body angular accelerations of a rotation series
/// `R(t)` with `dR/dt = R S(omega)`.
pub fn body_rates<const K: usize>(r: &TMat3<K>) -> (Vector3<f64>, Vector3<f64>) {
    assert!(K >= 3, "body accelerations need a second-order series");
    let r0 = r.d(0);
    let r1 = r.d(1);
    let r2 = r.d(2);
    let s = r0.transpose() * r1;
    // R^T R'' = S' + S^2
    let sdot = r0.transpose() * r2 - s * s;
    (crate::linalg::vee(&s), crate::linalg::vee(&sdot))
}

#[cfg(test)]
mod tests {
    use super::*;

    type T5 = Tay<5>;

    fn t_var(t0: f64) -> T5 {
        T5::from_derivs(&[t0, 1.0])
    }

    #[test]
    fn polynomial_product_matches_expansion() {
        // (1 + 2t)(3 - t + t^2) = 3 + 5t - t^2 + 2t^3
        let a = T5 {
            c: [1.0, 2.0, 0.0, 0.0, 0.0],
        };
        let b = T5 {
            c: [3.0, -1.0, 1.0, 0.0, 0.0],
        };
        assert_eq!((a * b).c, [3.0, 5.0, -1.0, 2.0, 0.0]);
    }

    #[test]
    fn sin_cos_derivatives_at_point() {
        let t0 = 0.7_f64;
        let (s, c) = t_var(t0).sin_cos();
        let expect_s = [t0.sin(), t0.cos(), -t0.sin(), -t0.cos(), t0.sin()];
        for k in 0..5 {
            assert!((s.d(k) - expect_s[k]).abs() < 1e-14);
        }
        assert!((c.d(3) - t0.sin()).abs() < 1e-14);
    }

    #[test]
    fn division_and_sqrt_invert_multiplication() {
        let a = T5 {
            c: [2.0, 0.3, -0.1, 0.05, 0.2],
        };
        let b = T5 {
            c: [1.5, -0.2, 0.4, 0.0, 0.1],
        };
        let q = (a * b) / b;
        let r = (a * a).sqrt();
        for k in 0..5 {
            assert!((q.c[k] - a.c[k]).abs() < 1e-13);
            assert!((r.c[k] - a.c[k]).abs() < 1e-13);
        }
    }

    #[test]
    fn atan2_follows_unit_circle() {
        // angle of (cos 2t, sin 2t) is 2t
        let t0 = 1.2;
        let two_t = t_var(t0).scale(2.0);
        let (s, c) = two_t.sin_cos();
        let th = T5::atan2(s, c);
        assert!((th.d(0) - 2.4).abs() < 1e-14);
        assert!((th.d(1) - 2.0).abs() < 1e-13);
        for k in 2..5 {
            assert!(th.d(k).abs() < 1e-11, "order {k}: {}", th.d(k));
        }
    }

    #[test]
    fn asin_and_atan_derivatives() {
        let x0 = 0.3_f64;
        let a = t_var(x0).asin();
        assert!((a.d(1) - 1.0 / (1.0 - x0 * x0).sqrt()).abs() < 1e-14);
        assert!((a.d(2) - x0 / (1.0 - x0 * x0).powf(1.5)).abs() < 1e-13);
        let b = t_var(x0).atan();
        assert!((b.d(1) - 1.0 / (1.0 + x0 * x0)).abs() < 1e-14);
        assert!((b.d(2) + 2.0 * x0 / (1.0 + x0 * x0).powi(2)).abs() < 1e-13);
    }

    #[test]
    fn euler_series_rates_match_kinematics() {
        let phi = Tay::<3>::from_derivs(&[0.2, 0.1, 0.0]);
        let theta = Tay::<3>::from_derivs(&[-0.1, 0.0, 0.0]);
        let psi = Tay::<3>::from_derivs(&[0.4, 0.5, 0.0]);
        let r = TMat3::from_euler(phi, theta, psi);
        let (w, _) = body_rates(&r);
        let (sf, cf) = 0.2_f64.sin_cos();
        let (st, ct) = (-0.1_f64).sin_cos();
        let p = 0.1 - st * 0.5;
        let q = cf * 0.0 + sf * ct * 0.5;
        let rr = -sf * 0.0 + cf * ct * 0.5;
        assert!((w - Vector3::new(p, q, rr)).norm() < 1e-14);
    }
}
