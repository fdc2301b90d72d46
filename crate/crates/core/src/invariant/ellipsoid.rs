use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ellipsoid `{x : (x - c)' P (x - c) <= 1}` given by its inverse shape
/// matrix `P`.
#[derive(Debug, Clone, PartialEq)]
pub struct Ellipsoid {
    p: DMatrix<f64>,
    c: DVector<f64>,
    labels: Vec<String>,
}

impl Ellipsoid {
    pub fn new(p: DMatrix<f64>, c: DVector<f64>, labels: Vec<String>) -> Result<Self> {
        let n = p.nrows();
        if p.ncols() != n || c.len() != n {
            return Err(Error::Dimension(format!(
                "P is {}x{}, center has length {}",
                p.nrows(),
                p.ncols(),
                c.len()
            )));
        }
        if !labels.is_empty() && labels.len() != n {
            return Err(Error::Dimension(format!("{} labels for {n} states", labels.len())));
        }
        let scale = p.amax().max(f64::MIN_POSITIVE);
        let asym = (&p - p.transpose()).amax();
        if asym > 1e-10 * scale {
            return Err(Error::NotPositiveDefinite(format!("asymmetry {asym:.3e}")));
        }
        let p = crate::linalg::symmetrize(&p);
        if p.clone().cholesky().is_none() {
            return Err(Error::NotPositiveDefinite("Cholesky factorization failed".into()));
        }
        let labels = if labels.is_empty() {
            (0..n).map(|i| format!("x{i}")).collect()
        } else {
            labels
        };
        Ok(Self { p, c, labels })
    }

    pub fn centered(p: DMatrix<f64>, labels: Vec<String>) -> Result<Self> {
        let n = p.nrows();
        Self::new(p, DVector::zeros(n), labels)
    }

    pub fn dim(&self) -> usize {
        self.p.nrows()
    }

    pub fn p(&self) -> &DMatrix<f64> {
        &self.p
    }

    pub fn center(&self) -> &DVector<f64> {
        &self.c
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// `(x - c)' P (x - c)`.
    pub fn level(&self, x: &DVector<f64>) -> f64 {
        let d = x - &self.c;
        d.dot(&(&self.p * &d))
    }

    pub fn contains(&self, x: &DVector<f64>) -> bool {
        self.level(x) <= 1.0
    }

    /// Shape matrix `P^-1`.
    pub fn shape(&self) -> DMatrix<f64> {
        self.p.clone().cholesky().expect("P is positive definite").inverse()
    }

    /// Orthogonal projection onto the coordinates in `coords` (in order).
    pub fn project(&self, coords: &[usize]) -> Result<Ellipsoid> {
        if coords.is_empty() {
            return Err(Error::InvalidParameter("empty coordinate set".into()));
        }
        if let Some(&bad) = coords.iter().find(|&&i| i >= self.dim()) {
            return Err(Error::Dimension(format!("coordinate {bad} out of range")));
        }
        let shape = self.shape();
        let k = coords.len();
        let sub = DMatrix::from_fn(k, k, |i, j| shape[(coords[i], coords[j])]);
        let p = sub
            .cholesky()
            .ok_or_else(|| Error::NotPositiveDefinite("projected shape block is singular".into()))?
            .inverse();
        let c = DVector::from_iterator(k, coords.iter().map(|&i| self.c[i]));
        let labels = coords.iter().map(|&i| self.labels[i].clone()).collect();
        Ellipsoid::new(crate::linalg::symmetrize(&p), c, labels)
    }

    /// Largest deviation `|x_i - c_i|` over the ellipsoid.
    pub fn axis_bound(&self, i: usize) -> Result<f64> {
        if i >= self.dim() {
            return Err(Error::Dimension(format!("axis {i} out of range")));
        }
        Ok(self.shape()[(i, i)].sqrt())
    }

    /// Support function `max_{x in E} u'x`.
    pub fn support(&self, u: &DVector<f64>) -> f64 {
        self.c.dot(u) + u.dot(&(self.shape() * u)).sqrt()
    }

    /// Maps unit vectors `z` onto the boundary: `x = c + L^-T z` with `P = L L'`.
    pub fn boundary_point(&self, z: &DVector<f64>) -> DVector<f64> {
        let l = self.p.clone().cholesky().expect("P is positive definite").l();
        let zn = z / z.norm();
        let y = l.transpose().solve_upper_triangular(&zn).expect("triangular solve");
        &self.c + y
    }

    /// Boundary of a 2-D ellipsoid sampled at `n` equally spaced angles.
    pub fn outline_2d(&self, n: usize) -> Vec<[f64; 2]> {
        assert_eq!(self.dim(), 2, "outline needs a planar ellipsoid");
        (0..n)
            .map(|k| {
                let a = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
                let x = self.boundary_point(&DVector::from_vec(vec![a.cos(), a.sin()]));
                [x[0], x[1]]
            })
            .collect()
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn to_json(&self) -> EllipsoidJson {
        EllipsoidJson {
            p: rows(&self.p),
            c: self.c.iter().cloned().collect(),
            labels: self.labels.clone(),
        }
    }

    pub fn from_json(j: &EllipsoidJson) -> Result<Self> {
        let n = j.p.len();
        if j.p.iter().any(|r| r.len() != n) {
            return Err(Error::Dimension("P must be square".into()));
        }
        let p = DMatrix::from_fn(n, n, |i, k| j.p[i][k]);
        Self::new(p, DVector::from_vec(j.c.clone()), j.labels.clone())
    }
}

pub(crate) fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().cloned().collect()).collect()
}

/// On-disk form: `P` as an array of rows.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct EllipsoidJson {
    #[serde(rename = "P")]
    pub p: Vec<Vec<f64>>,
    pub c: Vec<f64>,
    pub labels: Vec<String>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag(d: &[f64]) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_row_slice(d))
    }

    #[test]
    fn identity_projects_to_unit_disk() {
        let e = Ellipsoid::centered(DMatrix::identity(3, 3), vec![]).unwrap();
        let pr = e.project(&[0, 1]).unwrap();
        assert!((pr.p() - DMatrix::<f64>::identity(2, 2)).amax() < 1e-14);
        for i in 0..3 {
            assert!((e.axis_bound(i).unwrap() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn diagonal_axis_bounds() {
        let e = Ellipsoid::centered(diag(&[4.0, 9.0]), vec![]).unwrap();
        assert!((e.axis_bound(0).unwrap() - 0.5).abs() < 1e-15);
        assert!((e.axis_bound(1).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        let pr = e.project(&[0]).unwrap();
        assert!((pr.p()[(0, 0)] - 4.0).abs() < 1e-14);
    }

    #[test]
    fn rejects_indefinite_and_asymmetric() {
        assert!(Ellipsoid::centered(diag(&[1.0, -1.0]), vec![]).is_err());
        let mut p = DMatrix::identity(2, 2);
        p[(0, 1)] = 1e-3;
        assert!(Ellipsoid::centered(p, vec![]).is_err());
        assert!(Ellipsoid::centered(DMatrix::identity(2, 2), vec!["a".into()]).is_err());
    }

    #[test]
    fn boundary_points_have_unit_level() {
        let p = DMatrix::from_row_slice(2, 2, &[3.0, 0.7, 0.7, 1.2]);
        let e = Ellipsoid::new(p, DVector::from_vec(vec![1.0, -2.0]), vec![]).unwrap();
        for pt in e.outline_2d(64) {
            let x = DVector::from_vec(pt.to_vec());
            assert!((e.level(&x) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn json_round_trip_is_exact() {
        let p = DMatrix::from_row_slice(2, 2, &[0.1 + 0.2, 1.0 / 3.0, 1.0 / 3.0, 7.0]);
        let e = Ellipsoid::centered(p, vec!["a".into(), "b".into()]).unwrap();
        let s = serde_json::to_string(&e.to_json()).unwrap();
        let back: EllipsoidJson = serde_json::from_str(&s).unwrap();
        assert_eq!(Ellipsoid::from_json(&back).unwrap(), e);
    }
}
