//! Plot data and minimal SVG rendering of set projections, paths with set
//! snapshots, error trajectories and time series.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::invariant::Ellipsoid;
use crate::linalg::rot_z;
use crate::sim::TraceTable;
use nalgebra::Vector3;

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<[f64; 2]>,
    pub closed: bool,
}

impl Series {
    pub fn line(label: impl Into<String>, points: Vec<[f64; 2]>) -> Self {
        Self {
            label: label.into(),
            points,
            closed: false,
        }
    }

    pub fn outline(label: impl Into<String>, points: Vec<[f64; 2]>) -> Self {
        Self {
            label: label.into(),
            points,
            closed: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
    pub equal_aspect: bool,
}

impl Panel {
    pub fn new(title: &str, x_label: &str, y_label: &str, equal_aspect: bool) -> Self {
        Self {
            title: title.into(),
            x_label: x_label.into(),
            y_label: y_label.into(),
            series: Vec::new(),
            equal_aspect,
        }
    }

    /// Long-form CSV: `series,x,y`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("series,x,y\n");
        for ser in &self.series {
            for p in &ser.points {
                let _ = writeln!(s, "{},{:e},{:e}", ser.label, p[0], p[1]);
            }
        }
        s
    }
}

/// Long-form CSV of several panels: `panel,series,x,y`.
pub fn figure_csv(panels: &[Panel]) -> String {
    let mut s = String::from("panel,series,x,y\n");
    for (i, panel) in panels.iter().enumerate() {
        for ser in &panel.series {
            for p in &ser.points {
                let _ = writeln!(s, "{i},{},{:e},{:e}", ser.label, p[0], p[1]);
            }
        }
    }
    s
}

const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];
const PANEL_W: f64 = 420.0;
const PANEL_H: f64 = 320.0;
const MARGIN: f64 = 50.0;

fn bounds(panel: &Panel) -> ([f64; 2], [f64; 2]) {
    let pts = panel
        .series
        .iter()
        .flat_map(|s| s.points.iter())
        .filter(|p| p[0].is_finite() && p[1].is_finite());
    let (mut x, mut y) = ([f64::INFINITY, f64::NEG_INFINITY], [f64::INFINITY, f64::NEG_INFINITY]);
    for p in pts {
        x = [x[0].min(p[0]), x[1].max(p[0])];
        y = [y[0].min(p[1]), y[1].max(p[1])];
    }
    let fix = |r: [f64; 2]| {
        if !r[0].is_finite() {
            [0.0, 1.0]
        } else if r[1] - r[0] < 1e-12 {
            [r[0] - 0.5, r[1] + 0.5]
        } else {
            let pad = 0.05 * (r[1] - r[0]);
            [r[0] - pad, r[1] + pad]
        }
    };
    let (mut x, mut y) = (fix(x), fix(y));
    if panel.equal_aspect {
        let (w, h) = (PANEL_W - 2.0 * MARGIN, PANEL_H - 2.0 * MARGIN);
        let scale = ((x[1] - x[0]) / w).max((y[1] - y[0]) / h);
        let (cx, cy) = ((x[0] + x[1]) / 2.0, (y[0] + y[1]) / 2.0);
        x = [cx - scale * w / 2.0, cx + scale * w / 2.0];
        y = [cy - scale * h / 2.0, cy + scale * h / 2.0];
    }
    (x, y)
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn render_panel(out: &mut String, panel: &Panel, ox: f64, oy: f64) {
    let (xr, yr) = bounds(panel);
    let (w, h) = (PANEL_W - 2.0 * MARGIN, PANEL_H - 2.0 * MARGIN);
    let sx = |x: f64| ox + MARGIN + (x - xr[0]) / (xr[1] - xr[0]) * w;
    let sy = |y: f64| oy + MARGIN + (yr[1] - y) / (yr[1] - yr[0]) * h;
    let _ = writeln!(
        out,
        r##"<g><rect x="{:.1}" y="{:.1}" width="{w:.1}" height="{h:.1}" fill="none" stroke="#444"/>"##,
        ox + MARGIN,
        oy + MARGIN
    );
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="13">{}</text>"#,
        ox + PANEL_W / 2.0,
        oy + 30.0,
        esc(&panel.title)
    );
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="11">{}</text>"#,
        ox + PANEL_W / 2.0,
        oy + PANEL_H - 12.0,
        esc(&panel.x_label)
    );
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="11" transform="rotate(-90 {:.1} {:.1})">{}</text>"#,
        ox + 14.0,
        oy + PANEL_H / 2.0,
        ox + 14.0,
        oy + PANEL_H / 2.0,
        esc(&panel.y_label)
    );
    for (v, anchor, x, y) in [
        (xr[0], "start", sx(xr[0]), oy + MARGIN + h + 14.0),
        (xr[1], "end", sx(xr[1]), oy + MARGIN + h + 14.0),
    ] {
        let _ = writeln!(
            out,
            r#"<text x="{x:.1}" y="{y:.1}" text-anchor="{anchor}" font-size="9">{v:.3}</text>"#
        );
    }
    for (v, y) in [(yr[0], sy(yr[0])), (yr[1], sy(yr[1]) + 8.0)] {
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{y:.1}" text-anchor="end" font-size="9">{v:.3}</text>"#,
            ox + MARGIN - 3.0
        );
    }
    // one color per distinct label
    let mut legend: Vec<(String, &str)> = Vec::new();
    for ser in &panel.series {
        if ser.points.is_empty() {
            continue;
        }
        let color = match legend.iter().find(|(l, _)| l == &ser.label) {
            Some((_, c)) => *c,
            None => {
                let c = COLORS[legend.len() % COLORS.len()];
                legend.push((ser.label.clone(), c));
                c
            }
        };
        let pts: Vec<String> = ser
            .points
            .iter()
            .map(|p| format!("{:.2},{:.2}", sx(p[0]), sy(p[1])))
            .collect();
        let tag = if ser.closed { "polygon" } else { "polyline" };
        let _ = writeln!(
            out,
            r#"<{tag} points="{}" fill="none" stroke="{color}" stroke-width="1.2"/>"#,
            pts.join(" ")
        );
    }
    for (k, (label, color)) in legend.iter().enumerate() {
        let y = oy + MARGIN + 12.0 + 12.0 * k as f64;
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{y:.1}" font-size="9" fill="{color}">{}</text>"#,
            ox + MARGIN + 4.0,
            esc(label)
        );
    }
    out.push_str("</g>\n");
}

/// SVG document with the panels laid out in rows of `cols`.
pub fn render_svg(panels: &[Panel], cols: usize) -> String {
    let cols = cols.max(1);
    let rows = panels.len().div_ceil(cols).max(1);
    let (width, height) = (PANEL_W * cols as f64, PANEL_H * rows as f64);
    let mut out = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" viewBox=\"0 0 {width} {height}\" font-family=\"sans-serif\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    );
    for (k, p) in panels.iter().enumerate() {
        render_panel(&mut out, p, PANEL_W * (k % cols) as f64, PANEL_H * (k / cols) as f64);
    }
    out.push_str("</svg>\n");
    out
}

/// Index of a label in the set, as an error when absent.
fn coord(set: &Ellipsoid, label: &str) -> Result<usize> {
    set.index_of(label)
        .ok_or_else(|| Error::LabelMismatch(format!("set has no coordinate '{label}'")))
}

fn prefixes(set: &Ellipsoid) -> (&'static str, &'static str) {
    if set.index_of("e_pH_x").is_some() {
        ("e_pH", "epH_dot")
    } else {
        ("e_p", "e_v")
    }
}

/// Outline of the projection onto two named coordinates.
pub fn projection_outline(set: &Ellipsoid, a: &str, b: &str, n: usize) -> Result<Vec<[f64; 2]>> {
    let proj = set.project(&[coord(set, a)?, coord(set, b)?])?;
    Ok(proj.outline_2d(n))
}

/// Position and position-velocity projections of each set.
pub fn fig_projections(sets: &[(String, Ellipsoid)]) -> Result<Vec<Panel>> {
    let mut pos = Panel::new("position error projection", "x (m)", "y (m)", true);
    let mut pv = Panel::new("position-velocity projection (x axis)", "e_x (m)", "e_vx (m/s)", false);
    for (name, set) in sets {
        let (p, v) = prefixes(set);
        pos.series.push(Series::outline(
            name.clone(),
            projection_outline(set, &format!("{p}_x"), &format!("{p}_y"), 180)?,
        ));
        pv.series.push(Series::outline(
            name.clone(),
            projection_outline(set, &format!("{p}_x"), &format!("{v}_x"), 180)?,
        ));
    }
    Ok(vec![pos, pv])
}

/// Horizontal position projection placed at `center`, rotated to the
/// heading `psi` when the set is expressed in the heading frame.
pub fn snapshot_outline(set: &Ellipsoid, center: [f64; 2], psi: f64, n: usize) -> Result<Vec<[f64; 2]>> {
    let (p, _) = prefixes(set);
    let heading = p == "e_pH";
    let r = if heading { rot_z(psi) } else { rot_z(0.0) };
    Ok(projection_outline(set, &format!("{p}_x"), &format!("{p}_y"), n)?
        .into_iter()
        .map(|q| {
            let g = r * Vector3::new(q[0], q[1], 0.0);
            [center[0] + g.x, center[1] + g.y]
        })
        .collect())
}

fn col(table: &TraceTable, name: &str) -> Result<Vec<f64>> {
    table
        .column(name)
        .ok_or_else(|| Error::LabelMismatch(format!("trace has no column '{name}'")))
}

fn zip2(a: &[f64], b: &[f64]) -> Vec<[f64; 2]> {
    a.iter().zip(b).map(|(x, y)| [*x, *y]).collect()
}

/// Path in the horizontal plane (y east up, x north right) with the
/// reference, heading ticks and set snapshots centered on the reference.
pub fn fig_path(table: &TraceTable, set: &Ellipsoid, snapshots: usize) -> Result<Panel> {
    let mut panel = Panel::new("horizontal path with set snapshots", "x north (m)", "y east (m)", true);
    if table.rows.is_empty() {
        return Ok(panel);
    }
    let (px, py, rx, ry, psi) = (
        col(table, "p_x")?,
        col(table, "p_y")?,
        col(table, "p_r_x")?,
        col(table, "p_r_y")?,
        col(table, "psi_r")?,
    );
    panel.series.push(Series::line("reference", zip2(&rx, &ry)));
    panel.series.push(Series::line("vehicle", zip2(&px, &py)));
    let n = table.rows.len();
    for k in 0..snapshots {
        let i = (k * (n - 1)) / snapshots.max(1);
        panel.series.push(Series::outline(
            "set snapshot",
            snapshot_outline(set, [rx[i], ry[i]], psi[i], 72)?,
        ));
        let tip = [rx[i] + 4.0 * psi[i].cos(), ry[i] + 4.0 * psi[i].sin()];
        panel.series.push(Series::line("heading", vec![[rx[i], ry[i]], tip]));
    }
    Ok(panel)
}

/// Error trajectory in the set's own frame inside its position projection.
pub fn fig_errors(table: &TraceTable, set: &Ellipsoid, name: &str) -> Result<Panel> {
    let (p, _) = prefixes(set);
    let (a, b) = (format!("{p}_x"), format!("{p}_y"));
    let mut panel = Panel::new(&format!("{name} position error in its set"), &a, &b, true);
    panel
        .series
        .push(Series::outline("set", projection_outline(set, &a, &b, 180)?));
    if !table.rows.is_empty() {
        panel
            .series
            .push(Series::line("error", zip2(&col(table, &a)?, &col(table, &b)?)));
    }
    Ok(panel)
}

/// Velocities, disturbance estimate, tilt error and yaw error over time.
pub fn fig_timeseries(table: &TraceTable) -> Result<Vec<Panel>> {
    let t = table.column("t").unwrap_or_default();
    let mut out = Vec::new();
    let dhat = if table.index("dhatH_x").is_some() {
        "dhatH"
    } else {
        "dhat"
    };
    let groups: [(&str, &str, Vec<String>); 4] = [
        ("velocity", "m/s", ["v_x", "v_y", "v_z"].map(String::from).to_vec()),
        (
            "disturbance estimate",
            "m/s^2",
            ["x", "y", "z"].map(|a| format!("{dhat}_{a}")).to_vec(),
        ),
        ("tilt error", "deg", vec!["tilt_deg".into()]),
        ("yaw error", "rad", vec!["e_psi".into()]),
    ];
    for (title, unit, cols) in groups {
        let mut panel = Panel::new(title, "t (s)", unit, false);
        for c in cols {
            if let Some(v) = table.column(&c) {
                panel.series.push(Series::line(c, zip2(&t, &v)));
            }
        }
        out.push(panel);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_panel_renders() {
        let svg = render_svg(&[Panel::new("t", "x", "y", true)], 1);
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert!(!svg.contains("polyline"));
    }
}
