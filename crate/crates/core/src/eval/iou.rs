//! Rotated-box overlap via Sutherland–Hodgman clipping of the two footprints.

use std::cmp::Ordering;

use crate::detect::Box3D;
use crate::error::Result;

type Pt = [f64; 2];

fn cross(o: Pt, a: Pt, b: Pt) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Shoelace area of a simple polygon (positive for counter-clockwise).
pub fn polygon_area(poly: &[Pt]) -> f64 {
    if poly.len() < 3 {
        return 0.0;
    }
    let mut s = 0.0;
    for i in 0..poly.len() {
        let (p, q) = (poly[i], poly[(i + 1) % poly.len()]);
        s += p[0] * q[1] - q[0] * p[1];
    }
    0.5 * s
}

fn segment_line_intersection(p: Pt, q: Pt, a: Pt, b: Pt) -> Pt {
    let (cp, cq) = (cross(a, b, p), cross(a, b, q));
    let t = cp / (cp - cq);
    [p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]
}

/// Clips `subject` against the convex counter-clockwise polygon `clip`.
pub fn clip_convex(subject: &[Pt], clip: &[Pt]) -> Vec<Pt> {
    let mut out: Vec<Pt> = subject.to_vec();
    for i in 0..clip.len() {
        if out.is_empty() {
            break;
        }
        let (a, b) = (clip[i], clip[(i + 1) % clip.len()]);
        let input = std::mem::take(&mut out);
        for j in 0..input.len() {
            let (p, q) = (input[j], input[(j + 1) % input.len()]);
            let (p_in, q_in) = (cross(a, b, p) >= 0.0, cross(a, b, q) >= 0.0);
            match (p_in, q_in) {
                (true, true) => out.push(q),
                (true, false) => out.push(segment_line_intersection(p, q, a, b)),
                (false, true) => {
                    out.push(segment_line_intersection(p, q, a, b));
                    out.push(q);
                }
                (false, false) => {}
            }
        }
    }
    out
}

fn box_order(a: &Box3D, b: &Box3D) -> Ordering {
    let ka = [a.x, a.y, a.z, a.l, a.w, a.h, a.yaw];
    let kb = [b.x, b.y, b.z, b.l, b.w, b.h, b.yaw];
    ka.iter()
        .zip(&kb)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| *o != Ordering::Equal)
        .unwrap_or(Ordering::Equal)
}

/// Footprint intersection area. Inputs are put in a canonical order and
/// expressed relative to the first center, which makes the result exactly
/// symmetric and insensitive to a common translation up to rounding.
pub fn bev_intersection_area(a: &Box3D, b: &Box3D) -> f64 {
    let (a, b) = match box_order(a, b) {
        Ordering::Greater => (b, a),
        _ => (a, b),
    };
    let dx = b.x - a.x;
    let dy = b.y - a.y;
    let reach = 0.5 * ((a.l * a.l + a.w * a.w).sqrt() + (b.l * b.l + b.w * b.w).sqrt());
    if dx * dx + dy * dy >= reach * reach {
        return 0.0;
    }
    let la = Box3D { x: 0.0, y: 0.0, ..*a };
    let lb = Box3D { x: dx, y: dy, ..*b };
    polygon_area(&clip_convex(&la.bev_corners(), &lb.bev_corners())).max(0.0)
}

/// Bird's-eye-view IoU of two yawed boxes, in `[0, 1]`.
pub fn rotated_iou_bev(a: &Box3D, b: &Box3D) -> Result<f64> {
    a.validate()?;
    b.validate()?;
    if a == b {
        return Ok(1.0);
    }
    let inter = bev_intersection_area(a, b);
    let union = a.bev_area() + b.bev_area() - inter;
    Ok((inter / union).clamp(0.0, 1.0))
}

/// Overlap of the two vertical extents.
pub fn vertical_overlap(a: &Box3D, b: &Box3D) -> f64 {
    (a.z_max().min(b.z_max()) - a.z_min().max(b.z_min())).max(0.0)
}

/// 3D IoU for boxes yawed about the vertical axis only.
pub fn iou_3d(a: &Box3D, b: &Box3D) -> Result<f64> {
    a.validate()?;
    b.validate()?;
    if a == b {
        return Ok(1.0);
    }
    let inter = bev_intersection_area(a, b) * vertical_overlap(a, b);
    let union = a.volume() + b.volume() - inter;
    Ok((inter / union).clamp(0.0, 1.0))
}
