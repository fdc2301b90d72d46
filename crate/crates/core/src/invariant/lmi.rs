use nalgebra::{DMatrix, DVector};

use super::sdp::{AffineLmi, LogDetProblem};
use super::system::{invariant_basis, PolytopicErrorSystem};
use crate::error::{Error, Result};

/// Vertex block
///
/// ```text
/// [ M     PE     PE   ]
/// [ E'P  -t1 I   0    ]      M = A'P + PA + t1 g^2 C'C + t2 dbar^2 P
/// [ E'P   0     -t2 I ]
/// ```
#[allow(clippy::too_many_arguments)]
pub fn assemble_lmi_block(
    a: &DMatrix<f64>,
    p: &DMatrix<f64>,
    tau1: f64,
    tau2: f64,
    e: &DMatrix<f64>,
    c: &DMatrix<f64>,
    gamma: f64,
    dbar: f64,
) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if a.ncols() != n || p.shape() != (n, n) || e.nrows() != n || c.ncols() != n {
        return Err(Error::Dimension(format!(
            "A {:?}, P {:?}, E {:?}, C {:?}",
            a.shape(),
            p.shape(),
            e.shape(),
            c.shape()
        )));
    }
    if tau1 < 0.0 || tau2 < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "negative multiplier (tau1={tau1}, tau2={tau2})"
        )));
    }
    let q = e.ncols();
    let m = a.transpose() * p + p * a + c.transpose() * c * (tau1 * gamma * gamma) + p * (tau2 * dbar * dbar);
    let pe = p * e;
    let mut out = DMatrix::zeros(n + 2 * q, n + 2 * q);
    out.view_mut((0, 0), (n, n)).copy_from(&m);
    out.view_mut((0, n), (n, q)).copy_from(&pe);
    out.view_mut((0, n + q), (n, q)).copy_from(&pe);
    out.view_mut((n, 0), (q, n)).copy_from(&pe.transpose());
    out.view_mut((n + q, 0), (q, n)).copy_from(&pe.transpose());
    for i in 0..q {
        out[(n + i, n + i)] = -tau1;
        out[(n + q + i, n + q + i)] = -tau2;
    }
    Ok(out)
}

/// Drops the `-tau1 I` rows and columns, leaving the `(n+p)` block used
/// when there is no state-dependent uncertainty.
pub(crate) fn reduce_block(full: &DMatrix<f64>, n: usize, q: usize) -> DMatrix<f64> {
    full.clone().remove_rows(n, q).remove_columns(n, q)
}

/// Block actually enforced for a vertex: the full block when `gamma > 0`,
/// the reduced one otherwise.
pub(crate) fn enforced_block(
    sys: &PolytopicErrorSystem,
    i: usize,
    p: &DMatrix<f64>,
    tau1: f64,
    tau2: f64,
) -> DMatrix<f64> {
    let full = assemble_lmi_block(
        &sys.vertices()[i],
        p,
        tau1,
        tau2,
        sys.e(),
        sys.c(),
        sys.gamma(),
        sys.dbar(),
    )
    .expect("system dimensions are validated at construction");
    if sys.gamma() > 0.0 {
        full
    } else {
        reduce_block(&full, sys.dim(), sys.e().ncols())
    }
}

/// Log-det problem for a fixed `tau2`. Variables are the coordinates of `P`
/// in `basis`, followed by `tau1` when `gamma > 0`.
pub(crate) struct FixedTau2Problem {
    pub problem: LogDetProblem,
    pub basis: Vec<DMatrix<f64>>,
    pub has_tau1: bool,
    pub y0: DVector<f64>,
}

impl FixedTau2Problem {
    pub fn new(sys: &PolytopicErrorSystem, tau2: f64) -> Self {
        let n = sys.dim();
        let basis = invariant_basis(n, sys.symmetries());
        Self::with_basis(sys, tau2, basis)
    }

    pub fn with_basis(sys: &PolytopicErrorSystem, tau2: f64, basis: Vec<DMatrix<f64>>) -> Self {
        let n = sys.dim();
        let q = sys.e().ncols();
        let has_tau1 = sys.gamma() > 0.0;
        let nb = basis.len();
        let nvars = nb + usize::from(has_tau1);
        let zero_p = DMatrix::zeros(n, n);

        let mut blocks = Vec::with_capacity(sys.vertices().len() + 2);
        for a in sys.vertices() {
            // -F(P, tau1) > 0; F is linear in (P, tau1) apart from the -tau2 I block
            let base = assemble_lmi_block(a, &zero_p, 0.0, tau2, sys.e(), sys.c(), sys.gamma(), sys.dbar())
                .expect("validated dimensions");
            let mut coeffs: Vec<DMatrix<f64>> = basis
                .iter()
                .map(|b| {
                    let full = assemble_lmi_block(a, b, 0.0, tau2, sys.e(), sys.c(), sys.gamma(), sys.dbar())
                        .expect("validated dimensions");
                    -(full - &base)
                })
                .collect();
            let mut constant = -base;
            if has_tau1 {
                let with_t1 = assemble_lmi_block(a, &zero_p, 1.0, tau2, sys.e(), sys.c(), sys.gamma(), sys.dbar())
                    .expect("validated dimensions");
                coeffs.push(-(with_t1 + &constant));
            } else {
                constant = reduce_block(&constant, n, q);
                for g in coeffs.iter_mut() {
                    *g = reduce_block(g, n, q);
                }
            }
            blocks.push(AffineLmi::new(constant, &coeffs));
        }

        let mut p_coeffs = basis.clone();
        if has_tau1 {
            p_coeffs.push(DMatrix::zeros(n, n));
        }
        let p_block = blocks.len();
        blocks.push(AffineLmi::new(DMatrix::zeros(n, n), &p_coeffs));

        if has_tau1 {
            let mut t = vec![DMatrix::zeros(1, 1); nb];
            t.push(DMatrix::from_element(1, 1, 1.0));
            blocks.push(AffineLmi::new(DMatrix::zeros(1, 1), &t));
        }

        // keeps the feasibility search bounded: tr P < 1
        let mut tr: Vec<DMatrix<f64>> = basis.iter().map(|b| DMatrix::from_element(1, 1, -b.trace())).collect();
        if has_tau1 {
            tr.push(DMatrix::zeros(1, 1));
        }
        let bound = AffineLmi::new(DMatrix::from_element(1, 1, 1.0), &tr);

        let mut y0 = DVector::zeros(nvars);
        y0.rows_mut(0, nb)
            .copy_from(&coords_of(&basis, &(DMatrix::identity(n, n) / (2.0 * n as f64))));
        if has_tau1 {
            y0[nb] = 1.0;
        }

        let problem = LogDetProblem {
            nvars,
            blocks,
            logdet_objective: vec![p_block],
            linear_objective: DVector::zeros(nvars),
            phase1_bounds: vec![bound],
        };
        Self {
            problem,
            basis,
            has_tau1,
            y0,
        }
    }

    pub fn p_of(&self, y: &DVector<f64>) -> DMatrix<f64> {
        let mut p = DMatrix::zeros(self.basis[0].nrows(), self.basis[0].ncols());
        for (k, b) in self.basis.iter().enumerate() {
            p += b * y[k];
        }
        crate::linalg::symmetrize(&p)
    }

    pub fn tau1_of(&self, y: &DVector<f64>) -> f64 {
        if self.has_tau1 {
            y[self.basis.len()]
        } else {
            0.0
        }
    }
}

/// Least-squares coordinates of `m` in the span of `basis`.
fn coords_of(basis: &[DMatrix<f64>], m: &DMatrix<f64>) -> DVector<f64> {
    let k = basis.len();
    let gram = DMatrix::from_fn(k, k, |i, j| basis[i].dot(&basis[j]));
    let rhs = DVector::from_fn(k, |i, _| basis[i].dot(m));
    gram.cholesky()
        .map(|c| c.solve(&rhs))
        .unwrap_or_else(|| DVector::zeros(k))
}
