//! Deterministic SVG rendering of trajectory projections.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;

use crate::error::{Error, Result};
use crate::personality::{Trait, TRAITS};
use crate::segment::AXIS_PAIRS;

pub const MAX_TRAJECTORIES: usize = 10_000;

/// Line colours in canonical trait order.
pub const PALETTE: [&str; 5] = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd"];

const PANEL: f64 = 320.0;
const MARGIN: f64 = 36.0;
const LEGEND_HEIGHT: f64 = 40.0;

pub fn colour(t: Trait) -> &'static str {
    PALETTE[t.index()]
}

/// Three side-by-side panels (state axes 0-1, 0-2, 1-2), one polyline per
/// trajectory and panel, coloured by `labels`, with a legend underneath.
pub fn render_svg(projections: &[[Vec<[f64; 2]>; 3]], labels: &[Trait]) -> Result<String> {
    if projections.len() != labels.len() {
        return Err(Error::Input(format!(
            "{} trajectories but {} labels",
            projections.len(),
            labels.len()
        )));
    }
    if projections.len() > MAX_TRAJECTORIES {
        return Err(Error::Input(format!(
            "at most {MAX_TRAJECTORIES} trajectories can be drawn, got {}",
            projections.len()
        )));
    }
    let width = 3.0 * PANEL;
    let height = PANEL + LEGEND_HEIGHT;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
    );
    let _ = writeln!(svg, r#"<rect width="{width}" height="{height}" fill="white"/>"#);
    for (panel, (a, b)) in AXIS_PAIRS.iter().enumerate() {
        let (lo, hi) = bounds(projections.iter().flat_map(|p| p[panel].iter()));
        let x0 = panel as f64 * PANEL;
        let plot = PANEL - 2.0 * MARGIN;
        let _ = writeln!(svg, r#"<g id="panel-{a}{b}">"#);
        let _ = writeln!(
            svg,
            r##"<rect x="{:.3}" y="{MARGIN:.3}" width="{plot:.3}" height="{plot:.3}" fill="none" stroke="#999999"/>"##,
            x0 + MARGIN
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.3}" y="{:.3}" font-family="sans-serif" font-size="12" text-anchor="middle">h{a} vs h{b}</text>"#,
            x0 + PANEL / 2.0,
            MARGIN - 12.0
        );
        for (proj, label) in projections.iter().zip(labels) {
            let mut points = String::new();
            for (k, p) in proj[panel].iter().enumerate() {
                let px = x0 + MARGIN + (p[0] - lo[0]) / (hi[0] - lo[0]) * plot;
                let py = MARGIN + plot - (p[1] - lo[1]) / (hi[1] - lo[1]) * plot;
                if k > 0 {
                    points.push(' ');
                }
                let _ = write!(points, "{px:.3},{py:.3}");
            }
            let _ = writeln!(
                svg,
                r#"<polyline points="{points}" fill="none" stroke="{}" stroke-width="1" stroke-opacity="0.6"/>"#,
                colour(*label)
            );
        }
        svg.push_str("</g>\n");
    }
    svg.push_str("<g id=\"legend\">\n");
    for (k, t) in TRAITS.iter().enumerate() {
        let x = MARGIN + k as f64 * 160.0;
        let y = PANEL + 12.0;
        let _ = writeln!(
            svg,
            r#"<rect x="{x:.3}" y="{y:.3}" width="12" height="12" fill="{}"/>"#,
            colour(*t)
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.3}" y="{:.3}" font-family="sans-serif" font-size="12">{}</text>"#,
            x + 18.0,
            y + 11.0,
            t.name()
        );
    }
    svg.push_str("</g>\n</svg>\n");
    Ok(svg)
}

/// Bounding box with 5% padding; flat or empty ranges get unit width.
fn bounds<'a>(points: impl Iterator<Item = &'a [f64; 2]>) -> ([f64; 2], [f64; 2]) {
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for p in points {
        for k in 0..2 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    for k in 0..2 {
        if !(lo[k].is_finite() && hi[k].is_finite()) {
            lo[k] = -0.5;
            hi[k] = 0.5;
        } else if hi[k] - lo[k] < 1e-12 {
            lo[k] -= 0.5;
            hi[k] += 0.5;
        } else {
            let pad = 0.05 * (hi[k] - lo[k]);
            lo[k] -= pad;
            hi[k] += pad;
        }
    }
    (lo, hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn one_trajectory_three_polylines() {
        let proj = [vec![[0.0, 1.0], [1.0, 2.0]], vec![[0.0, 0.5], [1.0, 0.0]], vec![[1.0, 0.5], [2.0, 0.0]]];
        let svg = render_svg(&[proj.clone()], &[Trait::Openness]).unwrap();
        assert_eq!(svg.matches("<polyline").count(), 3);
        assert_eq!(svg, render_svg(&[proj], &[Trait::Openness]).unwrap());
        assert!(svg.contains(PALETTE[0]));
        assert!(svg.contains("neuroticism"));
    }

    #[test]
    fn constant_points_stay_finite() {
        let proj = [vec![[1.0, 1.0]; 3], vec![[1.0, 1.0]; 3], vec![[1.0, 1.0]; 3]];
        let svg = render_svg(&[proj], &[Trait::Neuroticism]).unwrap();
        assert!(!svg.contains("NaN") && !svg.contains("inf"));
    }

    #[test]
    fn rejects_mismatched_labels() {
        assert!(render_svg(&[], &[Trait::Openness]).is_err());
    }
}
