//! Closed-loop translational error systems of the three architectures in
//! polytopic LPV form, with the disturbance bounds they are certified for.

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::control::{Architecture, GainSet};
use crate::error::{Error, Result};
use crate::flatness::DragModel;
use crate::invariant::{PolytopicErrorSystem, StateSymmetry};
use crate::linalg::{diag3, norm2, rot_z, skew_z};

/// `dbar = sqrt(2 (1 - cos delta_max)) f_max + w_max`.
pub fn attitude_disturbance_bound(delta_max: f64, f_max: f64, w_max: f64) -> f64 {
    (2.0 * (1.0 - delta_max.cos())).sqrt() * f_max + w_max
}

/// `(d_max, gamma)` with `d_max = max_i d_i` and `gamma = d_max - d_min`.
pub fn drag_split(drag: &DragModel) -> (f64, f64) {
    let d = drag.coefficients();
    let hi = d.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = d.iter().cloned().fold(f64::INFINITY, f64::min);
    (hi, hi - lo)
}

/// Bounds and architecture of one certified error system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ErrorSystemSpec {
    pub architecture: Architecture,
    pub gains: GainSet,
    pub drag: DragModel,
    pub delta_max_rad: f64,
    pub f_max_mps2: f64,
    pub w_max_mps2: f64,
    pub psid_max_rad_s: f64,
    pub psidd_max_rad_s2: f64,
    #[serde(default)]
    pub planar: bool,
    /// Replaces the computed `dbar` (e.g. the rounded 2.5).
    #[serde(default)]
    pub dbar_override_mps2: Option<f64>,
    /// C-GH only: the two diagonal gain vertices instead of the box.
    #[serde(default)]
    pub two_vertex_cgh: bool,
}

impl ErrorSystemSpec {
    pub fn new(architecture: Architecture) -> Self {
        Self {
            architecture,
            gains: GainSet::preset(architecture),
            drag: DragModel::default(),
            delta_max_rad: 7f64.to_radians(),
            f_max_mps2: 16.0,
            w_max_mps2: 0.5,
            psid_max_rad_s: 0.5,
            psidd_max_rad_s2: 0.5,
            planar: false,
            dbar_override_mps2: None,
            two_vertex_cgh: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.gains.validate(self.architecture)?;
        if !(self.delta_max_rad > 0.0 && self.delta_max_rad < std::f64::consts::PI) {
            return Err(Error::InvalidParameter(format!(
                "delta_max must be in (0, pi), got {}",
                self.delta_max_rad
            )));
        }
        if !(self.f_max_mps2 > 0.0) {
            return Err(Error::InvalidParameter("f_max must be positive".into()));
        }
        let nonneg = [self.w_max_mps2, self.psid_max_rad_s, self.psidd_max_rad_s2];
        if nonneg
            .iter()
            .chain(self.dbar_override_mps2.iter())
            .any(|x| !(*x >= 0.0))
        {
            return Err(Error::InvalidParameter("bounds must be nonnegative".into()));
        }
        Ok(())
    }

    pub fn dbar(&self) -> f64 {
        self.dbar_override_mps2
            .unwrap_or_else(|| attitude_disturbance_bound(self.delta_max_rad, self.f_max_mps2, self.w_max_mps2))
    }

    pub fn gamma(&self) -> f64 {
        drag_split(&self.drag).1
    }

    pub fn d_max(&self) -> f64 {
        drag_split(&self.drag).0
    }

    /// Number of translational axes in the state (2 when planar).
    pub fn axes(&self) -> usize {
        if self.planar {
            2
        } else {
            3
        }
    }

    pub fn dim(&self) -> usize {
        5 * self.axes()
    }

    pub fn labels(&self) -> Vec<String> {
        state_labels(self.architecture, self.planar)
    }
}

/// Per-state names: position error, its rate, acceleration error, its
/// rate, disturbance estimate.
pub fn state_labels(arch: Architecture, planar: bool) -> Vec<String> {
    let blocks: [&str; 5] = if arch.heading_frame() {
        ["e_pH", "epH_dot", "e_aH", "eaH_dot", "dhatH"]
    } else {
        ["e_p", "e_v", "e_a", "ea_dot", "dhat"]
    };
    let axes: &[&str] = if planar { &["x", "y"] } else { &["x", "y", "z"] };
    blocks
        .iter()
        .flat_map(|b| axes.iter().map(move |a| format!("{b}_{a}")))
        .collect()
}

/// Values of the scheduling parameters at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Scheduling {
    None,
    /// Heading of the rotated gains.
    Heading(f64),
    /// Yaw rate and yaw acceleration of the heading frame.
    YawRates {
        psid: f64,
        psidd: f64,
    },
}

struct Blocks {
    kp: Matrix3<f64>,
    kv: Matrix3<f64>,
    ka: Matrix3<f64>,
    /// `S(psi')`, `S(psi')^2` (possibly overbounded) and `S(psi'')`.
    s: Matrix3<f64>,
    s2: Matrix3<f64>,
    sd: Matrix3<f64>,
}

fn rotated_block(k: &Matrix3<f64>, u: f64, w: f64) -> Matrix3<f64> {
    let (kx, ky) = (k[(0, 0)], k[(1, 1)]);
    let mut out = *k;
    out[(0, 0)] = ky + (kx - ky) * u;
    out[(0, 1)] = (kx - ky) * w;
    out[(1, 0)] = (kx - ky) * w;
    out[(1, 1)] = ky + (kx - ky) * (1.0 - u);
    out
}

fn system_from_blocks(spec: &ErrorSystemSpec, b: &Blocks) -> DMatrix<f64> {
    let k = spec.axes();
    let g = &spec.gains;
    let dmax = spec.d_max();
    let i3 = Matrix3::identity();
    let om2 = g.omega() * g.omega();
    let l = g.l();
    let mut a = DMatrix::zeros(5 * k, 5 * k);
    let mut put = |r: usize, c: usize, m: Matrix3<f64>| {
        a.view_mut((r * k, c * k), (k, k)).copy_from(&m.view((0, 0), (k, k)));
    };
    put(0, 1, i3);
    put(1, 0, -(b.s2 + b.sd) + b.s * dmax);
    put(1, 1, i3 * dmax - 2.0 * b.s);
    put(1, 2, i3);
    put(2, 3, i3);
    put(3, 0, -om2 * (b.kp - b.s2 - b.sd));
    put(3, 1, -om2 * (b.kv - 2.0 * b.s));
    put(3, 2, -om2 * (i3 + b.ka));
    put(3, 3, -2.0 * g.xi() * g.omega());
    put(3, 4, -om2 * (i3 + b.ka));
    put(4, 0, l * b.s * dmax);
    put(4, 1, l * dmax);
    put(4, 4, -l);
    a
}

fn plain_blocks(g: &GainSet) -> Blocks {
    let z = Matrix3::zeros();
    Blocks {
        kp: g.kp(),
        kv: g.kv(),
        ka: g.ka(),
        s: z,
        s2: z,
        sd: z,
    }
}

/// `A` evaluated at the true scheduling value (no overbounding).
pub fn system_matrix(spec: &ErrorSystemSpec, sched: Scheduling) -> Result<DMatrix<f64>> {
    let g = &spec.gains;
    let b = match (spec.architecture, sched) {
        (Architecture::Cg, Scheduling::None) => plain_blocks(g),
        (Architecture::Cgh, Scheduling::Heading(psi)) => {
            let r = rot_z(psi);
            let rot = |m: Matrix3<f64>| r * m * r.transpose();
            Blocks {
                kp: rot(g.kp()),
                kv: rot(g.kv()),
                ka: rot(g.ka()),
                ..plain_blocks(g)
            }
        }
        (Architecture::Ch, Scheduling::YawRates { psid, psidd }) => {
            let s = skew_z(psid);
            Blocks {
                s,
                s2: s * s,
                sd: skew_z(psidd),
                ..plain_blocks(g)
            }
        }
        (a, s) => {
            return Err(Error::InvalidParameter(format!(
                "scheduling {s:?} does not apply to {}",
                a.name()
            )))
        }
    };
    Ok(system_from_blocks(spec, &b))
}

fn vertex_matrices(spec: &ErrorSystemSpec) -> Vec<DMatrix<f64>> {
    let g = &spec.gains;
    let mut out: Vec<DMatrix<f64>> = Vec::new();
    let mut push = |a: DMatrix<f64>| {
        if !out.iter().any(|b| (b - &a).amax() == 0.0) {
            out.push(a);
        }
    };
    match spec.architecture {
        Architecture::Cg => push(system_from_blocks(spec, &plain_blocks(g))),
        Architecture::Cgh if spec.two_vertex_cgh => {
            for (u, w) in [(1.0, 0.0), (0.0, 0.0)] {
                let b = Blocks {
                    kp: rotated_block(&g.kp(), u, w),
                    kv: rotated_block(&g.kv(), u, w),
                    ka: rotated_block(&g.ka(), u, w),
                    ..plain_blocks(g)
                };
                push(system_from_blocks(spec, &b));
            }
        }
        Architecture::Cgh => {
            for u in [0.0, 1.0] {
                for w in [-0.5, 0.5] {
                    let b = Blocks {
                        kp: rotated_block(&g.kp(), u, w),
                        kv: rotated_block(&g.kv(), u, w),
                        ka: rotated_block(&g.ka(), u, w),
                        ..plain_blocks(g)
                    };
                    push(system_from_blocks(spec, &b));
                }
            }
        }
        Architecture::Ch => {
            let (r, rd) = (spec.psid_max_rad_s, spec.psidd_max_rad_s2);
            for w in [-r, r] {
                for w2 in [0.0, r * r] {
                    for wd in [-rd, rd] {
                        let b = Blocks {
                            s: skew_z(w),
                            s2: diag3([-w2, -w2, 0.0]),
                            sd: skew_z(wd),
                            ..plain_blocks(g)
                        };
                        push(system_from_blocks(spec, &b));
                    }
                }
            }
        }
    }
    out
}

fn disturbance_map(spec: &ErrorSystemSpec) -> DMatrix<f64> {
    let k = spec.axes();
    let mut e = DMatrix::zeros(5 * k, k);
    let l = spec.gains.l();
    for i in 0..k {
        e[(k + i, i)] = 1.0;
        e[(4 * k + i, i)] = l[(i, i)];
    }
    e
}

/// Output bounding the velocity error that the drag residual acts on.
/// For C-H that velocity is `e_pH' + S(psi') e_pH`, and the extra rows keep
/// `||e_pH' + S e_pH|| <= ||C x||` for every admissible yaw rate.
fn output_map(spec: &ErrorSystemSpec) -> DMatrix<f64> {
    let k = spec.axes();
    let r = spec.psid_max_rad_s;
    if spec.architecture != Architecture::Ch || r == 0.0 {
        let mut c = DMatrix::zeros(k, 5 * k);
        for i in 0..k {
            c[(i, k + i)] = 1.0;
        }
        return c;
    }
    let s2 = 2f64.sqrt();
    let mut c = DMatrix::zeros(k + 2, 5 * k);
    for i in 0..k {
        c[(i, k + i)] = if i < 2 { s2 } else { 1.0 };
    }
    c[(k, 0)] = s2 * r;
    c[(k + 1, 1)] = s2 * r;
    c
}

fn symmetries(spec: &ErrorSystemSpec) -> Vec<StateSymmetry> {
    let k = spec.axes();
    let n = 5 * k;
    let mut out = Vec::new();
    for axis in 0..k {
        let sign = (0..n).map(|i| if i % k == axis { -1.0 } else { 1.0 }).collect();
        out.push(StateSymmetry {
            perm: (0..n).collect(),
            sign,
        });
    }
    let perm = (0..n)
        .map(|i| match i % k {
            0 => i + 1,
            1 => i - 1,
            _ => i,
        })
        .collect();
    out.push(StateSymmetry {
        perm,
        sign: vec![1.0; n],
    });
    out
}

/// Assembles the certified polytopic system. Symmetries that the vertex
/// set admits are attached to shrink the SDP.
pub fn build_error_system(spec: &ErrorSystemSpec) -> Result<PolytopicErrorSystem> {
    spec.validate()?;
    let mut sys = PolytopicErrorSystem::new(
        vertex_matrices(spec),
        disturbance_map(spec),
        output_map(spec),
        spec.gamma(),
        spec.dbar(),
        spec.labels(),
    )?;
    for sym in symmetries(spec) {
        if let Ok(s) = sys.clone().with_symmetry(sym) {
            sys = s;
        }
    }
    Ok(sys)
}

/// Right-hand side `A(sched) x + E (Delta C_v x + d)` by direct substitution,
/// where `C_v x` is the true velocity error in the system's frame. Inputs
/// outside the certified ranges are rejected.
pub fn closed_loop_vector_field(
    spec: &ErrorSystemSpec,
    x: &DVector<f64>,
    d: &DVector<f64>,
    delta: &DMatrix<f64>,
    sched: Scheduling,
) -> Result<DVector<f64>> {
    let tol = 1e-9;
    if norm2(delta) > spec.gamma() * (1.0 + tol) + tol {
        return Err(Error::Domain(format!(
            "||Delta|| = {:.6} exceeds gamma = {:.6}",
            norm2(delta),
            spec.gamma()
        )));
    }
    if d.norm() > spec.dbar() * (1.0 + tol) + tol {
        return Err(Error::Domain(format!(
            "||d|| = {:.6} exceeds dbar = {:.6}",
            d.norm(),
            spec.dbar()
        )));
    }
    match sched {
        Scheduling::YawRates { psid, psidd }
            if psid.abs() > spec.psid_max_rad_s * (1.0 + tol) || psidd.abs() > spec.psidd_max_rad_s2 * (1.0 + tol) =>
        {
            return Err(Error::Domain(format!(
                "yaw rates ({psid:.4}, {psidd:.4}) outside the scheduling box"
            )));
        }
        _ => {}
    }
    lpv_rate(spec, x, d, delta, sched)
}

/// [`closed_loop_vector_field`] without the range checks.
pub fn lpv_rate(
    spec: &ErrorSystemSpec,
    x: &DVector<f64>,
    d: &DVector<f64>,
    delta: &DMatrix<f64>,
    sched: Scheduling,
) -> Result<DVector<f64>> {
    let k = spec.axes();
    if x.len() != 5 * k || d.len() != k || delta.shape() != (k, k) {
        return Err(Error::Dimension(
            "state, disturbance or Delta has the wrong size".into(),
        ));
    }
    let a = system_matrix(spec, sched)?;
    let mut vel = x.rows(k, k).into_owned();
    if let Scheduling::YawRates { psid, .. } = sched {
        let s = skew_z(psid);
        let e = x.rows(0, k);
        vel += s.view((0, 0), (k, k)) * e;
    }
    let w = delta * vel + d;
    Ok(a * x + disturbance_map(spec) * w)
}

/// Smallest L1 distance from `a` to the convex hull of `vertices` (by LP).
/// Entries that are equal across all vertices are compared directly.
pub fn hull_distance(a: &DMatrix<f64>, vertices: &[DMatrix<f64>]) -> Result<f64> {
    let Some(first) = vertices.first() else {
        return Err(Error::InvalidParameter("empty vertex set".into()));
    };
    if vertices.iter().any(|v| v.shape() != a.shape()) {
        return Err(Error::Dimension("vertex shape does not match".into()));
    }
    let mut fixed = 0.0;
    let mut varying = Vec::new();
    for idx in 0..a.len() {
        if vertices.iter().all(|v| v[idx] == first[idx]) {
            fixed += (a[idx] - first[idx]).abs();
        } else {
            varying.push(idx);
        }
    }
    if varying.is_empty() {
        return Ok(fixed);
    }
    use minilp::{ComparisonOp, OptimizationDirection, Problem};
    let mut lp = Problem::new(OptimizationDirection::Minimize);
    let lam: Vec<_> = vertices.iter().map(|_| lp.add_var(0.0, (0.0, f64::INFINITY))).collect();
    lp.add_constraint(lam.iter().map(|&v| (v, 1.0)), ComparisonOp::Eq, 1.0);
    for idx in varying {
        let sp = lp.add_var(1.0, (0.0, f64::INFINITY));
        let sm = lp.add_var(1.0, (0.0, f64::INFINITY));
        let mut row: Vec<_> = lam.iter().zip(vertices).map(|(&l, v)| (l, v[idx])).collect();
        row.push((sp, 1.0));
        row.push((sm, -1.0));
        lp.add_constraint(row, ComparisonOp::Eq, a[idx]);
    }
    let sol = lp.solve().map_err(|e| Error::Solver(format!("hull LP: {e}")))?;
    Ok(fixed + sol.objective())
}

/// Heading-frame view of a geodetic drag residual and disturbance.
pub fn to_heading_frame(psi: f64, d: &Vector3<f64>, delta: &Matrix3<f64>) -> (Vector3<f64>, Matrix3<f64>) {
    let r = rot_z(psi);
    (r.transpose() * d, r.transpose() * delta * r)
}
