//! SVG previews of layer plans, simulated deposition and colored faces.

use std::fmt::Write as _;

use crate::arrangement::ColoredFace;
use crate::geom::Point2;
use crate::palette::Palette;
use crate::profile::MachineProfile;
use crate::simulator::RealizedSegment;
use crate::strategy::{LayerPlan, PlanItem};

/// Display colors of the base materials, in material order.
const MATERIAL_RGB: [[f64; 3]; 4] = [[30.0, 80.0, 200.0], [240.0, 200.0, 20.0], [200.0, 40.0, 40.0], [40.0, 160.0, 60.0]];

/// Color of a composition as a fraction-weighted mix of material colors.
pub fn composition_rgb(c: &[f64]) -> String {
    let mut rgb = [0.0; 3];
    let sum: f64 = c.iter().sum();
    for (k, f) in c.iter().enumerate() {
        let base = MATERIAL_RGB[k % MATERIAL_RGB.len()];
        for i in 0..3 {
            rgb[i] += base[i] * if sum > 0.0 { f / sum } else { 0.0 };
        }
    }
    format!("#{:02x}{:02x}{:02x}", rgb[0].round() as u8, rgb[1].round() as u8, rgb[2].round() as u8)
}

pub enum SvgMode<'a> {
    /// Stroke by the commanded color.
    Commanded,
    /// Stroke by realized composition of these segments (bed coordinates).
    Simulated(&'a [RealizedSegment]),
}

fn header(profile: &MachineProfile) -> String {
    let (w, h) = profile.bed_size;
    let mut s = String::new();
    let _ = writeln!(s, "<?xml version=\"1.0\" encoding=\"UTF-8\"?>");
    let _ = writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{w}mm\" height=\"{h}mm\" viewBox=\"0 0 {w} {h}\">"
    );
    let _ = writeln!(s, "<rect class=\"bed\" x=\"0\" y=\"0\" width=\"{w}\" height=\"{h}\" fill=\"none\" stroke=\"#888888\" stroke-width=\"0.5\"/>");
    let _ = writeln!(s, "<g transform=\"translate(0,{h}) scale(1,-1)\">");
    s
}

fn footer(s: &mut String) {
    s.push_str("</g>\n</svg>\n");
}

fn points_attr(pts: impl IntoIterator<Item = Point2>) -> String {
    pts.into_iter().map(|p| format!("{:.3},{:.3}", p.x, p.y)).collect::<Vec<_>>().join(" ")
}

/// One layer on the bed; travels are dashed.
pub fn emit_layer_svg(plan: &LayerPlan, profile: &MachineProfile, bead_width: f64, offset: Point2, mode: SvgMode) -> String {
    let mut s = header(profile);
    match mode {
        SvgMode::Commanded => {
            let mut stroke = composition_rgb(&[1.0]);
            let mut last: Option<Point2> = None;
            for it in &plan.items {
                match it {
                    PlanItem::State { state, .. } => stroke = composition_rgb(&state.components(profile)),
                    PlanItem::Path { path, .. } => {
                        let pts: Vec<Point2> = path.polyline().into_iter().map(|p| p + offset).collect();
                        if pts.len() < 2 {
                            continue;
                        }
                        if let Some(l) = last {
                            if l.dist(pts[0]) > 1e-9 {
                                let _ = writeln!(
                                    s,
                                    "<line class=\"travel\" x1=\"{:.3}\" y1=\"{:.3}\" x2=\"{:.3}\" y2=\"{:.3}\" stroke=\"#999999\" stroke-width=\"0.1\" stroke-dasharray=\"1,1\"/>",
                                    l.x, l.y, pts[0].x, pts[0].y
                                );
                            }
                        }
                        last = pts.last().copied();
                        let class = format!("{:?}", path.role).to_lowercase();
                        let _ = writeln!(
                            s,
                            "<polyline class=\"{class}\" points=\"{}\" fill=\"none\" stroke=\"{stroke}\" stroke-width=\"{bead_width}\" stroke-linejoin=\"round\"/>",
                            points_attr(pts)
                        );
                    }
                }
            }
        }
        SvgMode::Simulated(segments) => {
            for seg in segments {
                let _ = writeln!(
                    s,
                    "<line class=\"realized\" x1=\"{:.3}\" y1=\"{:.3}\" x2=\"{:.3}\" y2=\"{:.3}\" stroke=\"{}\" stroke-width=\"{bead_width}\"/>",
                    seg.a.x,
                    seg.a.y,
                    seg.b.x,
                    seg.b.y,
                    composition_rgb(&seg.realized)
                );
            }
        }
    }
    footer(&mut s);
    s
}

/// Filled faces colored by their palette composition.
pub fn faces_svg(faces: &[ColoredFace], palette: &Palette, profile: &MachineProfile, offset: Point2) -> String {
    let mut s = header(profile);
    for f in faces {
        let mut d = String::new();
        for ring in f.polygon.rings() {
            for (k, p) in ring.iter().enumerate() {
                let q = *p + offset;
                let _ = write!(d, "{}{:.3},{:.3} ", if k == 0 { "M" } else { "L" }, q.x, q.y);
            }
            d.push_str("Z ");
        }
        let _ = writeln!(
            s,
            "<path class=\"face\" d=\"{}\" fill=\"{}\" fill-rule=\"evenodd\" stroke=\"#000000\" stroke-width=\"0.05\"/>",
            d.trim_end(),
            composition_rgb(&palette.composition(f.color))
        );
    }
    footer(&mut s);
    s
}
