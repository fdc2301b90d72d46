//! Dense log-det barrier interior-point method for small LMI problems.
//!
//! Problems have the form
//!
//! ```text
//!   minimize   c'y - sum_{j in obj} log det G_j(y)
//!   subject to G_j(y) = G_j0 + sum_k y_k G_jk  > 0   for every block j
//! ```
//!
//! A feasibility phase (minimize `s` subject to `G_j(y) + s I > 0`) finds a
//! strictly interior point; the main phase then follows the central path
//! with damped Newton steps. Blocks are small (tens of rows) and dense, so
//! the Hessian `H_kl = sum_j tr(W_j G_jk W_j G_jl)` is formed explicitly.

use nalgebra::{DMatrix, DVector};

/// Affine symmetric matrix function `G(y) = G0 + sum_k y_k G_k`.
///
/// The coefficients are stored side by side in one `d x (d*m)` matrix so a
/// single product yields every `W G_k`.
#[derive(Debug, Clone)]
pub struct AffineLmi {
    pub constant: DMatrix<f64>,
    coeffs: DMatrix<f64>,
    nvars: usize,
}

impl AffineLmi {
    pub fn new(constant: DMatrix<f64>, coeffs: &[DMatrix<f64>]) -> Self {
        let d = constant.nrows();
        let m = coeffs.len();
        let mut cat = DMatrix::zeros(d, d * m);
        for (k, g) in coeffs.iter().enumerate() {
            assert_eq!(g.shape(), (d, d), "coefficient {k} has wrong shape");
            cat.view_mut((0, k * d), (d, d)).copy_from(g);
        }
        Self {
            constant,
            coeffs: cat,
            nvars: m,
        }
    }

    pub fn dim(&self) -> usize {
        self.constant.nrows()
    }

    pub fn coeff(&self, k: usize) -> DMatrix<f64> {
        let d = self.dim();
        self.coeffs.view((0, k * d), (d, d)).into_owned()
    }

    pub fn eval(&self, y: &DVector<f64>) -> DMatrix<f64> {
        let d = self.dim();
        let mut g = self.constant.clone();
        for k in 0..self.nvars {
            if y[k] != 0.0 {
                g += self.coeffs.view((0, k * d), (d, d)) * y[k];
            }
        }
        g
    }

    /// Same function with one extra variable `s` entering as `+ s I`.
    fn with_shift(&self) -> Self {
        let d = self.dim();
        let m = self.nvars;
        let mut cat = DMatrix::zeros(d, d * (m + 1));
        cat.view_mut((0, 0), (d, d * m)).copy_from(&self.coeffs);
        cat.view_mut((0, d * m), (d, d)).fill_with_identity();
        Self {
            constant: self.constant.clone(),
            coeffs: cat,
            nvars: m + 1,
        }
    }

    /// Same function with one extra variable that does not enter.
    fn padded(&self) -> Self {
        let d = self.dim();
        let m = self.nvars;
        let mut cat = DMatrix::zeros(d, d * (m + 1));
        cat.view_mut((0, 0), (d, d * m)).copy_from(&self.coeffs);
        Self {
            constant: self.constant.clone(),
            coeffs: cat,
            nvars: m + 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LogDetProblem {
    pub nvars: usize,
    pub blocks: Vec<AffineLmi>,
    /// Blocks whose `-log det` is part of the objective.
    pub logdet_objective: Vec<usize>,
    pub linear_objective: DVector<f64>,
    /// Extra constraints used only while searching for a strictly feasible
    /// point; they keep the feasibility problem bounded.
    pub phase1_bounds: Vec<AffineLmi>,
}

#[derive(Debug, Clone)]
pub struct SdpOptions {
    /// Target bound on the duality gap of the main phase.
    pub gap_tol: f64,
    /// Barrier parameter growth factor.
    pub mu: f64,
    pub max_newton: usize,
    pub max_outer: usize,
    /// Newton decrement threshold for centering.
    pub center_tol: f64,
}

impl Default for SdpOptions {
    fn default() -> Self {
        Self {
            gap_tol: 1e-7,
            mu: 50.0,
            max_newton: 80,
            max_outer: 40,
            center_tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone)]
pub enum SdpOutcome {
    Solved {
        y: DVector<f64>,
        objective: f64,
        newton_steps: usize,
    },
    /// No strictly feasible point; `residual` is the smallest achievable
    /// shift `s` (positive means infeasible by that margin).
    Infeasible { residual: f64 },
}

/// Pluggable backend for the convex inner problem.
pub trait LogDetSolver {
    fn solve(&self, problem: &LogDetProblem, y0: &DVector<f64>) -> SdpOutcome;
}

#[derive(Debug, Clone, Default)]
pub struct BarrierSolver {
    pub options: SdpOptions,
}

impl LogDetSolver for BarrierSolver {
    fn solve(&self, problem: &LogDetProblem, y0: &DVector<f64>) -> SdpOutcome {
        let opts = &self.options;
        let mut steps = 0usize;
        let y = if all_positive_definite(&problem.blocks, y0) {
            y0.clone()
        } else {
            match find_interior(problem, y0, opts, &mut steps) {
                Ok(y) => y,
                Err(residual) => return SdpOutcome::Infeasible { residual },
            }
        };
        let y = central_path(problem, y, opts, &mut steps);
        let objective = objective_value(problem, &y);
        SdpOutcome::Solved {
            y,
            objective,
            newton_steps: steps,
        }
    }
}

fn all_positive_definite(blocks: &[AffineLmi], y: &DVector<f64>) -> bool {
    blocks.iter().all(|b| b.eval(y).cholesky().is_some())
}

/// `c'y - sum_obj log det G_j(y)`; infinite outside the domain.
pub fn objective_value(problem: &LogDetProblem, y: &DVector<f64>) -> f64 {
    let mut v = problem.linear_objective.dot(y);
    for &j in &problem.logdet_objective {
        match problem.blocks[j].eval(y).cholesky() {
            Some(ch) => v -= 2.0 * ch.l().diagonal().map(|x| x.ln()).sum(),
            None => return f64::INFINITY,
        }
    }
    v
}

/// Barrier functional `t c'y + sum_j w_j (-log det G_j)` with
/// `w_j = t * [j in obj] + 1`.
struct Barrier<'a> {
    blocks: &'a [AffineLmi],
    weights: Vec<f64>,
    lin: DVector<f64>,
}

impl Barrier<'_> {
    fn value(&self, y: &DVector<f64>) -> Option<f64> {
        let mut v = self.lin.dot(y);
        for (b, w) in self.blocks.iter().zip(&self.weights) {
            let ch = b.eval(y).cholesky()?;
            v -= w * 2.0 * ch.l().diagonal().map(|x| x.ln()).sum();
        }
        Some(v)
    }

    fn grad_hess(&self, y: &DVector<f64>) -> Option<(DVector<f64>, DMatrix<f64>)> {
        let m = y.len();
        let mut g = self.lin.clone();
        let mut h = DMatrix::zeros(m, m);
        for (b, &w) in self.blocks.iter().zip(&self.weights) {
            let d = b.dim();
            let winv = b.eval(y).cholesky()?.inverse();
            let wg = &winv * &b.coeffs;
            let mut x = DMatrix::zeros(m, d * d);
            let mut xt = DMatrix::zeros(m, d * d);
            for k in 0..m {
                let blk = wg.view((0, k * d), (d, d));
                let mut tr = 0.0;
                for a in 0..d {
                    tr += blk[(a, a)];
                    for c in 0..d {
                        x[(k, c * d + a)] = blk[(a, c)];
                        xt[(k, c * d + a)] = blk[(c, a)];
                    }
                }
                g[k] -= w * tr;
            }
            h += (&x * xt.transpose()) * w;
        }
        let h = (&h + h.transpose()) * 0.5;
        Some((g, h))
    }
}

fn newton_direction(g: &DVector<f64>, h: &DMatrix<f64>) -> Option<DVector<f64>> {
    if let Some(ch) = h.clone().cholesky() {
        return Some(-ch.solve(g));
    }
    let scale = h.diagonal().amax().max(1e-300);
    let mut reg = 1e-12 * scale;
    for _ in 0..12 {
        let mut hr = h.clone();
        for i in 0..hr.nrows() {
            hr[(i, i)] += reg;
        }
        if let Some(ch) = hr.cholesky() {
            return Some(-ch.solve(g));
        }
        reg *= 100.0;
    }
    None
}

/// Damped Newton minimization of a barrier functional from a strictly
/// feasible start. Returns the new point.
fn center(barrier: &Barrier, mut y: DVector<f64>, opts: &SdpOptions, steps: &mut usize) -> DVector<f64> {
    let mut f = match barrier.value(&y) {
        Some(f) => f,
        None => return y,
    };
    for _ in 0..opts.max_newton {
        let Some((g, h)) = barrier.grad_hess(&y) else { break };
        let Some(dy) = newton_direction(&g, &h) else { break };
        let dec = -g.dot(&dy);
        *steps += 1;
        if dec * 0.5 <= opts.center_tol {
            break;
        }
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let cand = &y + &dy * alpha;
            if let Some(fc) = barrier.value(&cand) {
                if fc <= f - 0.01 * alpha * dec {
                    y = cand;
                    f = fc;
                    accepted = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    y
}

fn central_path(problem: &LogDetProblem, mut y: DVector<f64>, opts: &SdpOptions, steps: &mut usize) -> DVector<f64> {
    let degree: usize = problem.blocks.iter().map(|b| b.dim()).sum();
    let mut t = 1.0;
    for _ in 0..opts.max_outer {
        let weights = (0..problem.blocks.len())
            .map(|j| {
                if problem.logdet_objective.contains(&j) {
                    t + 1.0
                } else {
                    1.0
                }
            })
            .collect();
        let barrier = Barrier {
            blocks: &problem.blocks,
            weights,
            lin: &problem.linear_objective * t,
        };
        y = center(&barrier, y, opts, steps);
        if degree as f64 / t < opts.gap_tol {
            break;
        }
        t *= opts.mu;
    }
    y
}

/// Minimizes the uniform shift `s` needed to make every block positive
/// definite. Returns a strictly feasible point, or the best residual shift
/// when none exists.
fn find_interior(
    problem: &LogDetProblem,
    y0: &DVector<f64>,
    opts: &SdpOptions,
    steps: &mut usize,
) -> Result<DVector<f64>, f64> {
    let m = problem.nvars;
    let mut blocks: Vec<AffineLmi> = problem.blocks.iter().map(|b| b.with_shift()).collect();
    blocks.extend(problem.phase1_bounds.iter().map(|b| b.padded()));

    let min_eig = problem
        .blocks
        .iter()
        .map(|b| crate::linalg::min_eig(&b.eval(y0)))
        .fold(f64::INFINITY, f64::min);
    let mut y = DVector::zeros(m + 1);
    y.rows_mut(0, m).copy_from(y0);
    y[m] = (-min_eig).max(0.0) + 1.0;
    if !all_positive_definite(&problem.phase1_bounds, y0) {
        return Err(f64::INFINITY);
    }

    let mut lin = DVector::zeros(m + 1);
    lin[m] = 1.0;
    let degree: usize = blocks.iter().map(|b| b.dim()).sum();
    let scale = 1.0 + y[m].abs();
    let mut t = 1.0 / scale;
    for _ in 0..opts.max_outer {
        let barrier = Barrier {
            blocks: &blocks,
            weights: vec![1.0; blocks.len()],
            lin: &lin * t,
        };
        y = center(&barrier, y, opts, steps);
        let s = y[m];
        if s < 0.0 {
            let out = y.rows(0, m).into_owned();
            if all_positive_definite(&problem.blocks, &out) {
                return Ok(out);
            }
        }
        // the optimal shift is within degree/t of the current one
        let gap = degree as f64 / t;
        if (s - gap > 0.0 && gap < 1e-3 * s) || gap < 1e-10 * scale {
            return Err(s);
        }
        t *= opts.mu;
    }
    Err(y[m])
}
