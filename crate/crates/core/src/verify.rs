//! Checks recorded traces against certified sets and monitored assumptions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::errsys::ErrorSystemSpec;
use crate::invariant::Ellipsoid;
use crate::sim::TraceTable;
use nalgebra::DVector;

/// Slack on `x'Px <= 1` and on the assumption bounds.
pub const LEVEL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssumptionBounds {
    pub delta_max_rad: f64,
    pub f_max_mps2: f64,
    pub w_max_mps2: f64,
    pub psid_max_rad_s: f64,
    pub psidd_max_rad_s2: f64,
    pub dbar_mps2: f64,
}

impl From<&ErrorSystemSpec> for AssumptionBounds {
    fn from(s: &ErrorSystemSpec) -> Self {
        Self {
            delta_max_rad: s.delta_max_rad,
            f_max_mps2: s.f_max_mps2,
            w_max_mps2: s.w_max_mps2,
            psid_max_rad_s: s.psid_max_rad_s,
            psidd_max_rad_s2: s.psidd_max_rad_s2,
            dbar_mps2: s.dbar(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Monitor {
    pub signal: String,
    pub max: f64,
    pub bound: f64,
    pub ok: bool,
    pub first_violation_s: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    /// Left the set after entering it while every assumption held.
    CertificateFalsified,
    AssumptionsViolated,
    /// The error never entered the set, so nothing was certified.
    NotEntered,
}

impl Verdict {
    pub fn exit_code(self) -> i32 {
        match self {
            Verdict::Pass => 0,
            Verdict::CertificateFalsified | Verdict::NotEntered => 2,
            Verdict::AssumptionsViolated => 3,
        }
    }

    /// The more severe of two verdicts, by exit code.
    pub fn worst(self, other: Verdict) -> Verdict {
        if other.exit_code() > self.exit_code() {
            other
        } else {
            self
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisBuffer {
    pub label: String,
    pub half_width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    /// `geodetic` or `heading`; C-H sets live in the heading frame.
    pub frame: String,
    pub labels: Vec<String>,
    pub samples: usize,
    pub t_entry_s: Option<f64>,
    /// Largest `x'Px` from entry on.
    pub max_level: f64,
    pub first_violation_s: Option<f64>,
    pub monitors: Vec<Monitor>,
    /// Reported but not part of the verdict.
    pub informational: Vec<Monitor>,
    pub buffers: Vec<AxisBuffer>,
    pub membership_ok: bool,
    pub assumptions_ok: bool,
    pub verdict: Verdict,
}

fn frame_of(labels: &[String]) -> &'static str {
    if labels.iter().any(|l| l.contains("H_") || l.starts_with("dhatH")) {
        "heading"
    } else {
        "geodetic"
    }
}

/// `x(t)' P x(t)` for every row, reading the columns named by the set's labels.
pub fn levels(table: &TraceTable, set: &Ellipsoid) -> Result<Vec<f64>> {
    let missing: Vec<&String> = set.labels().iter().filter(|l| table.index(l).is_none()).collect();
    if !missing.is_empty() {
        let trace_frame = frame_of(&table.columns);
        return Err(Error::LabelMismatch(format!(
            "set ({} frame) needs columns {:?} missing from the trace ({} frame)",
            frame_of(set.labels()),
            missing,
            trace_frame
        )));
    }
    let idx: Vec<usize> = set.labels().iter().map(|l| table.index(l).unwrap()).collect();
    Ok(table
        .rows
        .iter()
        .map(|r| set.level(&DVector::from_iterator(idx.len(), idx.iter().map(|&i| r[i]))))
        .collect())
}

fn monitor(table: &TraceTable, t: &[f64], col: &str, bound: f64, abs: bool) -> Result<Monitor> {
    let vals = table
        .column(col)
        .ok_or_else(|| Error::LabelMismatch(format!("trace has no column '{col}'")))?;
    let vals: Vec<f64> = if abs {
        vals.iter().map(|x| x.abs()).collect()
    } else {
        vals
    };
    let limit = bound * (1.0 + LEVEL_TOL) + 1e-12;
    let first = vals.iter().position(|&v| !(v <= limit)).map(|i| t[i]);
    Ok(Monitor {
        signal: col.to_string(),
        max: vals.iter().copied().fold(0.0, f64::max),
        bound,
        ok: first.is_none(),
        first_violation_s: first,
    })
}

pub fn verify_table(table: &TraceTable, set: &Ellipsoid, bounds: &AssumptionBounds) -> Result<VerificationReport> {
    let lv = levels(table, set)?;
    let t = table
        .column("t")
        .ok_or_else(|| Error::LabelMismatch("trace has no time column".into()))?;
    let limit = 1.0 + LEVEL_TOL;
    let entry = lv.iter().position(|&l| l <= limit);
    let (max_level, first_violation) = match entry {
        Some(k) => {
            let after = &lv[k..];
            (
                after.iter().copied().fold(0.0, f64::max),
                after.iter().position(|&l| !(l <= limit)).map(|i| t[k + i]),
            )
        }
        None => (lv.iter().copied().fold(0.0, f64::max), None),
    };
    let monitors = vec![
        monitor(table, &t, "tilt_deg", bounds.delta_max_rad.to_degrees(), false)?,
        monitor(table, &t, "thrust_mps2", bounds.f_max_mps2, false)?,
        monitor(table, &t, "psid_r", bounds.psid_max_rad_s, true)?,
        monitor(table, &t, "psidd_r", bounds.psidd_max_rad_s2, true)?,
        monitor(table, &t, "w_norm", bounds.w_max_mps2, false)?,
    ];
    let informational = vec![monitor(table, &t, "d_norm", bounds.dbar_mps2, false)?];
    let first_assumption = monitors
        .iter()
        .filter_map(|m| m.first_violation_s)
        .fold(None, |a: Option<f64>, x| Some(a.map_or(x, |a| a.min(x))));
    let assumptions_ok = first_assumption.is_none();
    let membership_ok = entry.is_some() && first_violation.is_none();
    let verdict = match (first_violation, first_assumption) {
        (Some(tv), Some(ta)) if ta <= tv => Verdict::AssumptionsViolated,
        (Some(_), _) => Verdict::CertificateFalsified,
        (None, Some(_)) => Verdict::AssumptionsViolated,
        (None, None) if entry.is_none() => Verdict::NotEntered,
        (None, None) => Verdict::Pass,
    };
    let buffers = set
        .labels()
        .iter()
        .enumerate()
        .filter(|(_, l)| l.starts_with("e_p"))
        .map(|(i, l)| {
            Ok(AxisBuffer {
                label: l.clone(),
                half_width: set.axis_bound(i)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(VerificationReport {
        frame: frame_of(set.labels()).to_string(),
        labels: set.labels().to_vec(),
        samples: lv.len(),
        t_entry_s: entry.map(|k| t[k]),
        max_level,
        first_violation_s: first_violation,
        monitors,
        informational,
        buffers,
        membership_ok,
        assumptions_ok,
        verdict,
    })
}

impl VerificationReport {
    /// Short human-readable summary.
    pub fn summary(&self) -> String {
        let mut s = format!(
            "verdict {:?} ({} frame): max x'Px = {:.6} from t_entry = {}",
            self.verdict,
            self.frame,
            self.max_level,
            self.t_entry_s.map_or("never".into(), |t| format!("{t:.3} s"))
        );
        for m in self.monitors.iter().chain(&self.informational) {
            s += &format!(
                "\n  {:<12} max {:>10.5} bound {:>10.5} {}",
                m.signal,
                m.max,
                m.bound,
                if m.ok { "ok" } else { "VIOLATED" }
            );
        }
        for b in &self.buffers {
            s += &format!("\n  buffer {:<10} {:.4}", b.label, b.half_width);
        }
        s
    }
}
