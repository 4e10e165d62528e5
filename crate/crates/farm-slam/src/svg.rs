//! Minimal native SVG emission: polylines, circles and axis ticks. No
//! plotting dependency; the files are small and diffable.

use crate::frontend::{FarmModel, MethodKind};
use crate::geometry::{Point2, Pose2};
use std::fmt::Write;

/// Axis-aligned data window with uniform padding.
#[derive(Debug, Clone, Copy)]
struct Window {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Window {
    fn of_points<'a>(points: impl Iterator<Item = &'a (f64, f64)>) -> Window {
        let mut w = Window {
            x0: f64::INFINITY,
            x1: f64::NEG_INFINITY,
            y0: f64::INFINITY,
            y1: f64::NEG_INFINITY,
        };
        for (x, y) in points {
            w.x0 = w.x0.min(*x);
            w.x1 = w.x1.max(*x);
            w.y0 = w.y0.min(*y);
            w.y1 = w.y1.max(*y);
        }
        if !w.x0.is_finite() {
            w = Window { x0: 0.0, x1: 1.0, y0: 0.0, y1: 1.0 };
        }
        let padx = (w.x1 - w.x0).max(1e-9) * 0.06;
        let pady = (w.y1 - w.y0).max(1e-9) * 0.06;
        Window {
            x0: w.x0 - padx,
            x1: w.x1 + padx,
            y0: w.y0 - pady,
            y1: w.y1 + pady,
        }
    }
}

const W: f64 = 900.0;
const H: f64 = 620.0;
const MARGIN: f64 = 55.0;

struct Canvas {
    out: String,
    win: Window,
}

impl Canvas {
    fn new(win: Window, title: &str) -> Canvas {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">"
        );
        let _ = writeln!(out, "<rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>");
        let _ = writeln!(
            out,
            "<text x=\"{}\" y=\"24\" font-family=\"sans-serif\" font-size=\"16\" text-anchor=\"middle\">{title}</text>",
            W / 2.0
        );
        Canvas { out, win }
    }

    fn sx(&self, x: f64) -> f64 {
        MARGIN + (x - self.win.x0) / (self.win.x1 - self.win.x0) * (W - 2.0 * MARGIN)
    }

    fn sy(&self, y: f64) -> f64 {
        // y grows upward in data space
        H - MARGIN - (y - self.win.y0) / (self.win.y1 - self.win.y0) * (H - 2.0 * MARGIN)
    }

    fn axes(&mut self, x_label: &str, y_label: &str) {
        let (x0, x1) = (MARGIN, W - MARGIN);
        let (y0, y1) = (H - MARGIN, MARGIN);
        let _ = writeln!(
            self.out,
            "<line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x1}\" y2=\"{y0}\" stroke=\"black\"/>\
             <line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x0}\" y2=\"{y1}\" stroke=\"black\"/>"
        );
        for k in 0..=5 {
            let fx = self.win.x0 + (self.win.x1 - self.win.x0) * k as f64 / 5.0;
            let fy = self.win.y0 + (self.win.y1 - self.win.y0) * k as f64 / 5.0;
            let px = self.sx(fx);
            let py = self.sy(fy);
            let _ = writeln!(
                self.out,
                "<line x1=\"{px}\" y1=\"{y0}\" x2=\"{px}\" y2=\"{}\" stroke=\"black\"/>\
                 <text x=\"{px}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">{fx:.1}</text>",
                y0 + 5.0,
                y0 + 18.0
            );
            let _ = writeln!(
                self.out,
                "<line x1=\"{}\" y1=\"{py}\" x2=\"{x0}\" y2=\"{py}\" stroke=\"black\"/>\
                 <text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">{fy:.1}</text>",
                x0 - 5.0,
                x0 - 8.0,
                py + 4.0
            );
        }
        let _ = writeln!(
            self.out,
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\">{x_label}</text>",
            W / 2.0,
            H - 12.0
        );
        let _ = writeln!(
            self.out,
            "<text x=\"16\" y=\"{}\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\" transform=\"rotate(-90 16 {})\">{y_label}</text>",
            H / 2.0,
            H / 2.0
        );
    }

    fn polyline(&mut self, pts: &[(f64, f64)], color: &str, width: f64, dash: Option<&str>) {
        if pts.len() < 2 {
            return;
        }
        let coords: Vec<String> = pts
            .iter()
            .map(|(x, y)| format!("{:.2},{:.2}", self.sx(*x), self.sy(*y)))
            .collect();
        let dash_attr = dash.map_or(String::new(), |d| format!(" stroke-dasharray=\"{d}\""));
        let _ = writeln!(
            self.out,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"{width}\"{dash_attr}/>",
            coords.join(" ")
        );
    }

    fn circle(&mut self, x: f64, y: f64, r: f64, fill: &str, stroke: &str) {
        let _ = writeln!(
            self.out,
            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"{r}\" fill=\"{fill}\" stroke=\"{stroke}\"/>",
            self.sx(x),
            self.sy(y)
        );
    }

    fn legend(&mut self, entries: &[(&str, &str)]) {
        let mut y = MARGIN + 8.0;
        for (color, label) in entries {
            let _ = writeln!(
                self.out,
                "<line x1=\"{}\" y1=\"{y}\" x2=\"{}\" y2=\"{y}\" stroke=\"{color}\" stroke-width=\"3\"/>\
                 <text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\">{label}</text>",
                W - MARGIN - 150.0,
                W - MARGIN - 120.0,
                W - MARGIN - 112.0,
                y + 4.0
            );
            y += 18.0;
        }
    }

    fn finish(mut self) -> String {
        let _ = writeln!(self.out, "</svg>");
        self.out
    }
}

fn pose_xy(traj: &[Pose2]) -> Vec<(f64, f64)> {
    traj.iter().map(|p| (p.x, p.y)).collect()
}

/// Trajectory overlay: dead reckoning in red, the optimized estimate in
/// green, ground truth (when available) in gray, the farm ropes and buoys,
/// and mapped rope detections as small dots.
pub fn trajectory_overlay(
    title: &str,
    farm: &FarmModel,
    dr: &[Pose2],
    optimized: &[Pose2],
    truth: Option<&[Pose2]>,
    buoy_estimates: &[Point2],
    rope_points: &[Point2],
) -> String {
    let dr_xy = pose_xy(dr);
    let opt_xy = pose_xy(optimized);
    let truth_xy = truth.map(pose_xy);
    let farm_xy: Vec<(f64, f64)> = farm
        .buoys
        .iter()
        .map(|b| (b.prior.mean.x, b.prior.mean.y))
        .collect();
    let all: Vec<(f64, f64)> = dr_xy
        .iter()
        .chain(opt_xy.iter())
        .chain(truth_xy.iter().flatten())
        .chain(farm_xy.iter())
        .copied()
        .collect();
    let mut c = Canvas::new(Window::of_points(all.iter()), title);
    c.axes("east (m)", "north (m)");

    for rope in &farm.ropes {
        if let Some((a, b)) = farm.rope_endpoints(rope.id) {
            c.polyline(&[(a.x, a.y), (b.x, b.y)], "#b08830", 2.0, Some("6,4"));
        }
    }
    for p in rope_points {
        c.circle(p.x, p.y, 1.6, "#999999", "none");
    }
    let mut legend: Vec<(&str, &str)> = vec![("#cc2222", "dead reckoning"), ("#22aa22", "optimized")];
    if let Some(t) = &truth_xy {
        c.polyline(t, "#888888", 1.2, Some("2,3"));
        legend.push(("#888888", "ground truth"));
    }
    c.polyline(&dr_xy, "#cc2222", 1.5, None);
    c.polyline(&opt_xy, "#22aa22", 1.8, None);
    for b in &farm.buoys {
        c.circle(b.prior.mean.x, b.prior.mean.y, 5.0, "none", "#b08830");
    }
    legend.push(("#b08830", "farm prior"));
    if !buoy_estimates.is_empty() {
        for b in buoy_estimates {
            c.circle(b.x, b.y, 3.0, "#2255cc", "none");
        }
        legend.push(("#2255cc", "buoy estimates"));
    }
    c.legend(&legend);
    c.finish()
}

const METHOD_COLORS: [(&str, &str); 3] = [
    ("baseline_buoy_only", "#cc7722"),
    ("baseline_shared_rope", "#2255cc"),
    ("proposed", "#22aa22"),
];

fn method_color(m: MethodKind) -> &'static str {
    METHOD_COLORS
        .iter()
        .find(|(name, _)| *name == m.label())
        .map(|(_, c)| *c)
        .unwrap_or("#000000")
}

/// Online relative pose error time series, one polyline per method.
pub fn orpe_chart(title: &str, series: &[(MethodKind, Vec<(f64, f64)>)]) -> String {
    let all: Vec<(f64, f64)> = series.iter().flat_map(|(_, s)| s.iter().copied()).collect();
    let mut c = Canvas::new(Window::of_points(all.iter()), title);
    c.axes("time (s)", "oRPE (m)");
    let mut legend: Vec<(&str, &str)> = Vec::new();
    for (method, s) in series {
        let color = method_color(*method);
        c.polyline(s, color, 1.6, None);
        legend.push((color, method.label()));
    }
    c.legend(&legend);
    c.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::default_farm;

    #[test]
    fn overlay_is_valid_svg_with_layers() {
        let farm = default_farm();
        let dr = vec![Pose2::new(0.0, 0.0, 0.0), Pose2::new(10.0, 1.0, 0.1)];
        let opt = vec![Pose2::new(0.0, 0.0, 0.0), Pose2::new(10.0, 0.0, 0.0)];
        let truth = vec![Pose2::new(0.0, 0.0, 0.0), Pose2::new(10.0, -0.5, 0.0)];
        let svg = trajectory_overlay(
            "overlay",
            &farm,
            &dr,
            &opt,
            Some(&truth),
            &[Point2::new(0.1, 0.2)],
            &[Point2::new(5.0, 0.0)],
        );
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert!(svg.contains("#cc2222"), "dead-reckoning layer in red");
        assert!(svg.contains("#22aa22"), "optimized layer in green");
        assert!(svg.matches("<polyline").count() >= 5);
    }

    #[test]
    fn truthless_overlay_omits_truth_layer() {
        let farm = default_farm();
        let dr = vec![Pose2::new(0.0, 0.0, 0.0), Pose2::new(10.0, 1.0, 0.1)];
        let svg = trajectory_overlay("overlay", &farm, &dr, &dr, None, &[], &[]);
        assert!(!svg.contains("stroke=\"#888888\""));
    }

    #[test]
    fn orpe_chart_has_one_line_per_method() {
        let mk = |k| (k, vec![(0.0, 0.1), (1.0, 0.2), (2.0, 0.15)]);
        let svg = orpe_chart(
            "orpe",
            &[
                mk(MethodKind::Proposed),
                mk(MethodKind::BaselineBuoyOnly),
                mk(MethodKind::BaselineSharedRope),
            ],
        );
        for (_, color) in METHOD_COLORS {
            assert!(svg.contains(color));
        }
    }
}
