use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::ellipsoid::rows;
use crate::error::{Error, Result};

/// Signed permutation of the state: `(T x)_i = sign_i * x_{perm_i}`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSymmetry {
    pub perm: Vec<usize>,
    pub sign: Vec<f64>,
}

impl StateSymmetry {
    pub fn matrix(&self) -> DMatrix<f64> {
        let n = self.perm.len();
        let mut t = DMatrix::zeros(n, n);
        for i in 0..n {
            t[(i, self.perm[i])] = self.sign[i];
        }
        t
    }
}

/// Linear system `x' = A x + E (Delta C x + d)` with `A` in the convex hull
/// of `vertices`, `||Delta|| <= gamma`, `||d|| <= dbar`.
#[derive(Debug, Clone)]
pub struct PolytopicErrorSystem {
    vertices: Vec<DMatrix<f64>>,
    e: DMatrix<f64>,
    c: DMatrix<f64>,
    gamma: f64,
    dbar: f64,
    labels: Vec<String>,
    symmetries: Vec<StateSymmetry>,
}

impl PolytopicErrorSystem {
    /// Validates dimensions and bounds, and rejects any non-Hurwitz vertex.
    pub fn new(
        vertices: Vec<DMatrix<f64>>,
        e: DMatrix<f64>,
        c: DMatrix<f64>,
        gamma: f64,
        dbar: f64,
        labels: Vec<String>,
    ) -> Result<Self> {
        let sys = Self::new_unchecked(vertices, e, c, gamma, dbar, labels)?;
        for (i, a) in sys.vertices.iter().enumerate() {
            let eig = a.complex_eigenvalues();
            if let Some(bad) = eig.iter().max_by(|x, y| x.re.total_cmp(&y.re)) {
                if bad.re >= 0.0 {
                    return Err(Error::NotHurwitz {
                        vertex: i,
                        re: bad.re,
                        im: bad.im,
                    });
                }
            }
        }
        Ok(sys)
    }

    /// Dimension and bound checks only; used for cross-checks on systems
    /// that are not meant to be certified.
    pub fn new_unchecked(
        vertices: Vec<DMatrix<f64>>,
        e: DMatrix<f64>,
        c: DMatrix<f64>,
        gamma: f64,
        dbar: f64,
        labels: Vec<String>,
    ) -> Result<Self> {
        let Some(first) = vertices.first() else {
            return Err(Error::InvalidParameter("at least one vertex is required".into()));
        };
        let n = first.nrows();
        if let Some(i) = vertices.iter().position(|a| a.shape() != (n, n)) {
            return Err(Error::Dimension(format!("vertex {i} is not {n}x{n}")));
        }
        if e.nrows() != n {
            return Err(Error::Dimension(format!("E has {} rows, expected {n}", e.nrows())));
        }
        if c.ncols() != n {
            return Err(Error::Dimension(format!("C has {} columns, expected {n}", c.ncols())));
        }
        if !(gamma >= 0.0 && dbar >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "bounds must be nonnegative (gamma={gamma}, dbar={dbar})"
            )));
        }
        let labels = if labels.is_empty() {
            (0..n).map(|i| format!("x{i}")).collect()
        } else {
            labels
        };
        if labels.len() != n {
            return Err(Error::Dimension(format!("{} labels for {n} states", labels.len())));
        }
        Ok(Self {
            vertices,
            e,
            c,
            gamma,
            dbar,
            labels,
            symmetries: Vec::new(),
        })
    }

    /// Declares a state symmetry after checking it maps the vertex set onto
    /// itself and preserves both disturbance channels up to an orthogonal
    /// change of the disturbance coordinates.
    pub fn with_symmetry(mut self, sym: StateSymmetry) -> Result<Self> {
        let n = self.dim();
        if sym.perm.len() != n || sym.sign.len() != n {
            return Err(Error::Dimension("symmetry size does not match state".into()));
        }
        let t = sym.matrix();
        let tol = 1e-10;
        for (i, a) in self.vertices.iter().enumerate() {
            let ta = &t * a * t.transpose();
            let scale = 1.0 + a.amax();
            if !self.vertices.iter().any(|b| (&ta - b).amax() <= tol * scale) {
                return Err(Error::InvalidParameter(format!(
                    "symmetry does not map vertex {i} into the vertex set"
                )));
            }
        }
        let te = &t * &self.e;
        let e_pinv = self
            .e
            .clone()
            .pseudo_inverse(1e-12)
            .map_err(|m| Error::Solver(m.to_string()))?;
        let q = &e_pinv * &te;
        let qq = q.transpose() * &q;
        let p = self.e.ncols();
        if (&self.e * &q - &te).amax() > tol || (qq - DMatrix::<f64>::identity(p, p)).amax() > tol {
            return Err(Error::InvalidParameter(
                "symmetry does not preserve the disturbance map".into(),
            ));
        }
        let ctc = self.c.transpose() * &self.c;
        if (&t * &ctc * t.transpose() - &ctc).amax() > tol {
            return Err(Error::InvalidParameter(
                "symmetry does not preserve the uncertainty output".into(),
            ));
        }
        self.symmetries.push(sym);
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.vertices[0].nrows()
    }

    pub fn vertices(&self) -> &[DMatrix<f64>] {
        &self.vertices
    }

    pub fn e(&self) -> &DMatrix<f64> {
        &self.e
    }

    pub fn c(&self) -> &DMatrix<f64> {
        &self.c
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn dbar(&self) -> f64 {
        self.dbar
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn symmetries(&self) -> &[StateSymmetry] {
        &self.symmetries
    }

    pub fn with_dbar(&self, dbar: f64) -> Self {
        Self { dbar, ..self.clone() }
    }

    pub fn to_json(&self) -> ErrorSystemJson {
        ErrorSystemJson {
            vertices: self.vertices.iter().map(rows).collect(),
            e: rows(&self.e),
            c: rows(&self.c),
            gamma: self.gamma,
            dbar: self.dbar,
            labels: self.labels.clone(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ErrorSystemJson {
    pub vertices: Vec<Vec<Vec<f64>>>,
    #[serde(rename = "E")]
    pub e: Vec<Vec<f64>>,
    #[serde(rename = "C")]
    pub c: Vec<Vec<f64>>,
    pub gamma: f64,
    pub dbar: f64,
    pub labels: Vec<String>,
}

/// All elements of the group generated by `gens`, as matrices.
pub(crate) fn group_closure(n: usize, gens: &[DMatrix<f64>]) -> Vec<DMatrix<f64>> {
    let mut group = vec![DMatrix::identity(n, n)];
    let mut frontier = group.clone();
    while let Some(g) = frontier.pop() {
        for h in gens {
            let prod = h * &g;
            if !group.iter().any(|x| (x - &prod).amax() < 1e-12) {
                group.push(prod.clone());
                frontier.push(prod);
            }
            assert!(group.len() <= 4096, "symmetry group too large");
        }
    }
    group
}

/// Basis of symmetric matrices `P` with `T' P T = P` for every group element.
/// Without symmetries this is the standard basis of symmetric matrices.
pub(crate) fn invariant_basis(n: usize, syms: &[StateSymmetry]) -> Vec<DMatrix<f64>> {
    let gens: Vec<_> = syms.iter().map(|s| s.matrix()).collect();
    let group = group_closure(n, &gens);
    let mut basis: Vec<DMatrix<f64>> = Vec::new();
    for i in 0..n {
        for j in i..n {
            let mut b = DMatrix::zeros(n, n);
            b[(i, j)] = 1.0;
            b[(j, i)] = 1.0;
            let mut avg = DMatrix::zeros(n, n);
            for t in &group {
                avg += t.transpose() * &b * t;
            }
            if avg.amax() < 1e-12 {
                continue;
            }
            // orbit sums have disjoint supports; normalize sign and scale
            let (r, c) = avg.iamax_full();
            avg /= avg[(r, c)];
            if !basis.iter().any(|x| (x - &avg).amax() < 1e-12) {
                basis.push(avg);
            }
        }
    }
    basis
}
