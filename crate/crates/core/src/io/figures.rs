//! SVG bird's-eye figures: boxes drawn over the range-azimuth map.

use std::fmt::Write as _;

use ndarray::Array2;

use crate::detect::{Box3D, Detection};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
/// Detections below this score are not drawn.
pub const DRAW_SCORE_MIN: f64 = 0.5;

/// Maps a BEV point to figure coordinates: azimuth sine across, range up.
fn to_figure(p: [f64; 2], r_max: f64) -> (f64, f64) {
    let r = (p[0] * p[0] + p[1] * p[1]).sqrt();
    let s = if r > 0.0 { p[1] / r } else { 0.0 };
    (0.5 * (s + 1.0) * WIDTH, HEIGHT * (1.0 - r / r_max))
}

fn polygon(out: &mut String, b: &Box3D, r_max: f64, stroke: &str) {
    let pts: Vec<String> = b
        .bev_corners()
        .iter()
        .map(|c| {
            let (x, y) = to_figure(*c, r_max);
            format!("{x:.2},{y:.2}")
        })
        .collect();
    let _ = writeln!(
        out,
        r#"<polygon points="{}" fill="none" stroke="{stroke}" stroke-width="2"/>"#,
        pts.join(" ")
    );
}

/// `ra` is `(range rows, azimuth columns)` in `[0, 1]` with rows spanning
/// `[0, r_max]` and fft-shifted azimuth columns over sine `[-1, 1)`.
pub fn bev_figure_svg(ra: &Array2<f64>, r_max: f64, gts: &[Box3D], dets: &[Detection]) -> String {
    let (rows, cols) = ra.dim();
    let (cw, rh) = (WIDTH / cols as f64, HEIGHT / rows as f64);
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(out, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="black"/>"#);
    for ((r, a), v) in ra.indexed_iter() {
        let g = (v.clamp(0.0, 1.0) * 255.0).round() as u8;
        if g == 0 {
            continue;
        }
        let _ = writeln!(
            out,
            r#"<rect x="{:.2}" y="{:.2}" width="{cw:.2}" height="{rh:.2}" fill="rgb({g},{g},{g})"/>"#,
            a as f64 * cw,
            HEIGHT - (r + 1) as f64 * rh,
        );
    }
    for b in gts {
        polygon(&mut out, b, r_max, "lime");
    }
    for d in dets.iter().filter(|d| d.score >= DRAW_SCORE_MIN) {
        polygon(&mut out, &d.bbox, r_max, "red");
    }
    out.push_str("</svg>\n");
    out
}
