use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::ellipsoid::{Ellipsoid, EllipsoidJson};
use super::lmi::{enforced_block, FixedTau2Problem};
use super::sdp::{BarrierSolver, LogDetSolver, SdpOutcome};
use super::system::{group_closure, PolytopicErrorSystem};
use crate::error::{Error, Result};
use crate::linalg::{max_eig, norm2, symmetrize};

#[derive(Debug, Clone)]
pub struct RpiOptions {
    /// Line-search points for `tau2`; `None` uses [`default_tau2_grid`].
    pub tau2_grid: Option<Vec<f64>>,
    /// Relative feasibility tolerance on the verified vertex blocks.
    pub feas_tol: f64,
    /// Golden-section steps around the best grid point (0 disables).
    pub refine_steps: usize,
}

impl Default for RpiOptions {
    fn default() -> Self {
        Self {
            tau2_grid: None,
            feas_tol: 1e-7,
            refine_steps: 12,
        }
    }
}

/// 20 log-spaced points on `[1e-3, 1e1] / dbar^2`.
pub fn default_tau2_grid(dbar: f64) -> Vec<f64> {
    log_grid(1e-3 / (dbar * dbar), 1e1 / (dbar * dbar), 20)
}

pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![(lo * hi).sqrt()];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub tau2: f64,
    /// `-log det P`, absent when the point is infeasible.
    pub objective: Option<f64>,
    /// Most positive eigenvalue over the vertex blocks (or the phase-I
    /// shift when infeasible).
    pub residual: f64,
}

#[derive(Debug, Clone)]
pub struct SdpResult {
    pub ellipsoid: Ellipsoid,
    pub tau1: f64,
    pub tau2: f64,
    pub objective: f64,
    pub feasible: bool,
    pub residual: f64,
    pub grid: Vec<GridPoint>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SdpResultJson {
    #[serde(flatten)]
    pub ellipsoid: EllipsoidJson,
    pub tau1: f64,
    pub tau2: f64,
    pub objective: f64,
    pub residual: f64,
}

impl SdpResult {
    pub fn to_json(&self) -> SdpResultJson {
        SdpResultJson {
            ellipsoid: self.ellipsoid.to_json(),
            tau1: self.tau1,
            tau2: self.tau2,
            objective: self.objective,
            residual: self.residual,
        }
    }
}

struct Candidate {
    p: DMatrix<f64>,
    tau1: f64,
    tau2: f64,
    objective: f64,
    residual: f64,
}

/// Smallest-volume ellipsoidal RPI set with the default barrier solver.
pub fn solve_rpi(system: &PolytopicErrorSystem, tau2_grid: &[f64], feas_tol: f64) -> Result<SdpResult> {
    let opts = RpiOptions {
        tau2_grid: Some(tau2_grid.to_vec()),
        feas_tol,
        ..RpiOptions::default()
    };
    solve_rpi_with(system, &opts, &BarrierSolver::default())
}

pub fn solve_rpi_with(
    system: &PolytopicErrorSystem,
    opts: &RpiOptions,
    solver: &dyn LogDetSolver,
) -> Result<SdpResult> {
    if system.dbar() == 0.0 {
        return Err(Error::Degenerate(
            "zero additive disturbance bound: arbitrarily small invariant sets exist, no finite optimum".into(),
        ));
    }
    let grid = match &opts.tau2_grid {
        Some(g) => g.clone(),
        None => default_tau2_grid(system.dbar()),
    };
    if grid.is_empty() || grid.iter().any(|&t| !(t > 0.0 && t.is_finite())) {
        return Err(Error::InvalidParameter(
            "tau2 grid must be nonempty with positive finite entries".into(),
        ));
    }
    let mut points = Vec::with_capacity(grid.len());
    let mut best: Option<(usize, Candidate)> = None;
    for (i, &tau2) in grid.iter().enumerate() {
        match solve_fixed(system, tau2, opts.feas_tol, solver) {
            Ok(c) => {
                points.push(GridPoint {
                    tau2,
                    objective: Some(c.objective),
                    residual: c.residual,
                });
                // ties go to the smaller tau2, which comes first
                if best.as_ref().is_none_or(|(_, b)| c.objective < b.objective) {
                    best = Some((i, c));
                }
            }
            Err(r) => points.push(GridPoint {
                tau2,
                objective: None,
                residual: r,
            }),
        }
    }
    let Some((ib, mut cand)) = best else {
        let residuals: Vec<(f64, f64)> = points.iter().map(|g| (g.tau2, g.residual)).collect();
        let best_residual = residuals.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
        return Err(Error::NoRpiFound {
            residuals,
            best_residual,
        });
    };

    if opts.refine_steps > 0 && grid.len() > 1 {
        let lo = grid[ib.saturating_sub(1)].min(grid[ib]);
        let hi = grid[(ib + 1).min(grid.len() - 1)].max(grid[ib]);
        let eval = |t: f64| -> Option<Candidate> { solve_fixed(system, t, opts.feas_tol, solver).ok() };
        let phi = 0.5 * (5f64.sqrt() - 1.0);
        let (mut a, mut b) = (lo.ln(), hi.ln());
        let mut x1 = b - phi * (b - a);
        let mut x2 = a + phi * (b - a);
        let obj = |c: &Option<Candidate>| c.as_ref().map_or(f64::INFINITY, |c| c.objective);
        let mut c1 = eval(x1.exp());
        let mut c2 = eval(x2.exp());
        for _ in 0..opts.refine_steps {
            if obj(&c1) <= obj(&c2) {
                b = x2;
                x2 = x1;
                c2 = c1;
                x1 = b - phi * (b - a);
                c1 = eval(x1.exp());
            } else {
                a = x1;
                x1 = x2;
                c1 = c2;
                x2 = a + phi * (b - a);
                c2 = eval(x2.exp());
            }
        }
        for c in [c1, c2].into_iter().flatten() {
            if c.objective < cand.objective {
                cand = c;
            }
        }
    }

    let ellipsoid = Ellipsoid::centered(cand.p, system.labels().to_vec())?;
    Ok(SdpResult {
        ellipsoid,
        tau1: cand.tau1,
        tau2: cand.tau2,
        objective: cand.objective,
        feasible: true,
        residual: cand.residual,
        grid: points,
    })
}

fn solve_fixed(
    sys: &PolytopicErrorSystem,
    tau2: f64,
    feas_tol: f64,
    solver: &dyn LogDetSolver,
) -> std::result::Result<Candidate, f64> {
    let fp = FixedTau2Problem::new(sys, tau2);
    let y = match solver.solve(&fp.problem, &fp.y0) {
        SdpOutcome::Solved { y, .. } => y,
        SdpOutcome::Infeasible { residual } => return Err(residual),
    };
    let p = symmetrize_over_group(sys, &fp.p_of(&y));
    let tau1 = fp.tau1_of(&y).max(0.0);
    let residual = certificate_residual(sys, &p, tau1, tau2);
    if p.clone().cholesky().is_none() || residual > feas_tol * (1.0 + norm2(&p)) {
        return Err(residual.max(0.0));
    }
    let objective = -2.0
        * p.clone()
            .cholesky()
            .expect("checked")
            .l()
            .diagonal()
            .map(|x| x.ln())
            .sum();
    Ok(Candidate {
        p,
        tau1,
        tau2,
        objective,
        residual,
    })
}

/// Most positive eigenvalue over all enforced vertex blocks.
pub fn certificate_residual(sys: &PolytopicErrorSystem, p: &DMatrix<f64>, tau1: f64, tau2: f64) -> f64 {
    (0..sys.vertices().len())
        .map(|i| max_eig(&enforced_block(sys, i, p, tau1, tau2)))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Group average of `T' P T` over the declared symmetries.
pub fn symmetrize_over_group(sys: &PolytopicErrorSystem, p: &DMatrix<f64>) -> DMatrix<f64> {
    if sys.symmetries().is_empty() {
        return symmetrize(p);
    }
    let gens: Vec<_> = sys.symmetries().iter().map(|s| s.matrix()).collect();
    let group = group_closure(sys.dim(), &gens);
    let mut acc = DMatrix::zeros(p.nrows(), p.ncols());
    for t in &group {
        acc += t.transpose() * p * t;
    }
    symmetrize(&(acc / group.len() as f64))
}

/// `max over ||d|| <= dbar, ||Delta|| <= gamma` of `d/dt (x'Px)` at a boundary point.
pub fn worst_case_vdot(sys: &PolytopicErrorSystem, e: &Ellipsoid, x: &DVector<f64>, vertex: usize) -> Result<f64> {
    if e.dim() != sys.dim() || x.len() != sys.dim() {
        return Err(Error::Dimension("state, set, and system sizes differ".into()));
    }
    let a = sys
        .vertices()
        .get(vertex)
        .ok_or_else(|| Error::InvalidParameter(format!("vertex {vertex} out of range")))?;
    let level = e.level(x);
    if (level - 1.0).abs() > 1e-6 {
        return Err(Error::NotOnBoundary(level));
    }
    let xc = x - e.center();
    Ok(vdot_bound(sys, e.p(), a, &xc))
}

pub(crate) fn vdot_bound(sys: &PolytopicErrorSystem, p: &DMatrix<f64>, a: &DMatrix<f64>, x: &DVector<f64>) -> f64 {
    let px = p * x;
    let etpx = sys.e().transpose() * &px;
    let cx = sys.c() * x;
    2.0 * px.dot(&(a * x)) + 2.0 * sys.gamma() * etpx.norm() * cx.norm() + 2.0 * sys.dbar() * etpx.norm()
}
