//! Marlin G-code emission and reading, bead cross-section and flow models.

use std::fmt::Write as _;

use thiserror::Error;

use crate::geom::{BBox2, Point2};
use crate::palette::CommandState;
use crate::profile::{FlowMaterial, MachineProfile};
use crate::strategy::{LayerPlan, PlanItem};
use crate::toolpath::PrintSettings;

#[derive(Debug, Error, PartialEq)]
pub enum EmitError {
    #[error("bead width {w} must be at least the layer height {h} (both positive)")]
    InvalidBead { h: f64, w: f64 },
    #[error("temperature {t} °C is outside the flow model range 180..=240")]
    OutOfRange { t: f64 },
    #[error("move to ({x:.3}, {y:.3}) leaves the bed")]
    BedBounds { x: f64, y: f64 },
    #[error("layer {layer} extrudes before any color is set")]
    StateMissing { layer: usize },
    #[error("{0}")]
    Command(String),
}

/// Cross-section of a deposited bead: a rectangle with semicircular ends.
pub fn capsule_area(h: f64, w: f64) -> Result<f64, EmitError> {
    if !(h > 0.0 && w >= h) {
        return Err(EmitError::InvalidBead { h, w });
    }
    Ok(h * (w - h) + std::f64::consts::PI * h * h / 4.0)
}

/// Path length that displaces `melt_volume`.
pub fn lookahead_distance(melt_volume: f64, h: f64, w: f64) -> Result<f64, EmitError> {
    Ok(melt_volume / capsule_area(h, w)?)
}

/// Flow percentage compensating foaming expansion at nozzle temperature `t`.
pub fn flow_percent(t: f64, material: FlowMaterial) -> Result<f64, EmitError> {
    if material == FlowMaterial::None {
        return Ok(100.0);
    }
    if !(180.0..=240.0).contains(&t) {
        return Err(EmitError::OutOfRange { t });
    }
    Ok(match material {
        FlowMaterial::Pla => 100.0 * (8.35479e-6 * t.powi(3) - 5.37075e-3 * t * t + 1.13374 * t - 77.814),
        FlowMaterial::Tpu => 100.0 * (3.09637e-4 * t * t - 1.38401e-1 * t + 15.9560),
        FlowMaterial::None => unreachable!(),
    })
}

/// Translation that centres `part` on the bed.
pub fn bed_offset(part: BBox2, profile: &MachineProfile) -> Point2 {
    let centre = Point2::new(profile.bed_size.0 / 2.0, profile.bed_size.1 / 2.0);
    if part.is_empty() {
        return centre;
    }
    centre - (part.min + part.max) * 0.5
}

/// Filament advanced per mm of path.
pub fn extrusion_per_mm(profile: &MachineProfile, settings: &PrintSettings) -> Result<f64, EmitError> {
    Ok(capsule_area(settings.layer_height, settings.bead_width)? / profile.filament_area() * profile.extrusion_multiplier)
}

const MIX_AXES: [char; 6] = ['A', 'B', 'C', 'D', 'H', 'I'];

/// Decimal text without trailing zeros.
fn trim(v: f64, decimals: usize) -> String {
    let s = format!("{v:.decimals$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

/// Commands that establish `state`.
pub fn state_commands(state: &CommandState, profile: &MachineProfile) -> Result<Vec<String>, EmitError> {
    match state {
        CommandState::Mix(v) => {
            if v.len() > MIX_AXES.len() {
                return Err(EmitError::Command(format!("{} mixing inputs exceed the {} M165 axes", v.len(), MIX_AXES.len())));
            }
            let sum: f64 = v.iter().sum();
            let parts: Vec<String> = v
                .iter()
                .zip(MIX_AXES)
                .map(|(f, a)| format!("{a}{:.3}", if sum > 0.0 { f / sum } else { 0.0 }))
                .collect();
            Ok(vec![format!("M165 {}", parts.join(" "))])
        }
        CommandState::Tool(t) => Ok(vec![format!("T{t}")]),
        CommandState::Temperature(t) => {
            let f = flow_percent(*t, profile.flow_compensation)?;
            Ok(vec![format!("M104 S{}", trim(*t, 1)), format!("M221 T0 S{f:.1}")])
        }
    }
}

fn substitute(template: &str, first_temperature: f64, profile: &MachineProfile) -> String {
    template
        .replace("{first_temperature}", &trim(first_temperature, 1))
        .replace("{bed_temperature}", &trim(profile.bed_temperature, 1))
}

/// Renders plans (design coordinates, moved by `offset` onto the bed).
pub fn emit_gcode(plans: &[LayerPlan], profile: &MachineProfile, settings: &PrintSettings, offset: Point2) -> Result<String, EmitError> {
    let e_per_mm = extrusion_per_mm(profile, settings)?;
    let first_temperature = plans
        .iter()
        .flat_map(|p| p.states())
        .find_map(|(_, s)| match s {
            CommandState::Temperature(t) => Some(*t),
            _ => None,
        })
        .unwrap_or(profile.temperature_range.0);
    let (bw, bh) = profile.bed_size;
    let check = |p: Point2| -> Result<Point2, EmitError> {
        let q = p + offset;
        if q.x < -1e-9 || q.y < -1e-9 || q.x > bw + 1e-9 || q.y > bh + 1e-9 {
            return Err(EmitError::BedBounds { x: q.x, y: q.y });
        }
        Ok(q)
    };
    let mut out = substitute(&profile.start_gcode, first_temperature, profile);
    if !out.is_empty() && !out.ends_with('\n') {
        out.push('\n');
    }
    let mut state_set = false;
    let mut at: Option<(String, String)> = None;
    for plan in plans {
        let _ = writeln!(out, ";LAYER:{}", plan.index);
        out.push_str("G92 E0\n");
        let mut e = 0.0;
        let _ = writeln!(out, "G0 Z{:.3} F{}", plan.z + settings.layer_height / 2.0, trim(profile.travel_speed, 3));
        for item in &plan.items {
            match item {
                PlanItem::State { state, .. } => {
                    for c in state_commands(state, profile)? {
                        out.push_str(&c);
                        out.push('\n');
                    }
                    state_set = true;
                }
                PlanItem::Path { path, .. } => {
                    if !state_set {
                        return Err(EmitError::StateMissing { layer: plan.index });
                    }
                    let pts = path.polyline();
                    let Some(&first) = pts.first() else { continue };
                    let start = check(first)?;
                    let key = (format!("{:.3}", start.x), format!("{:.3}", start.y));
                    if at.as_ref() != Some(&key) {
                        let _ = writeln!(out, "G0 X{} Y{} F{}", key.0, key.1, trim(profile.travel_speed, 3));
                    }
                    let mut prev = first;
                    let mut feed = true;
                    for &p in &pts[1..] {
                        let d = prev.dist(p);
                        if d < 1e-9 {
                            continue;
                        }
                        let q = check(p)?;
                        e += d * e_per_mm;
                        let _ = write!(out, "G1 X{:.3} Y{:.3} E{:.5}", q.x, q.y, e);
                        if feed {
                            let _ = write!(out, " F{}", trim(profile.print_speed, 3));
                            feed = false;
                        }
                        out.push('\n');
                        prev = p;
                    }
                    let end = prev + offset;
                    at = Some((format!("{:.3}", end.x), format!("{:.3}", end.y)));
                }
            }
        }
    }
    out.push_str(&substitute(&profile.end_gcode, first_temperature, profile));
    if !out.ends_with('\n') {
        out.push('\n');
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Reader
// ---------------------------------------------------------------------------

#[derive(Debug, Error, PartialEq)]
#[error("line {line}: {msg}")]
pub struct GcodeParseError {
    pub line: usize,
    pub msg: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum GcodeOp {
    Layer(usize),
    State(CommandState),
    Travel { to: Point2, z: f64 },
    /// `e` is filament advanced in mm; `feed` in mm/min.
    Extrude { from: Point2, to: Point2, z: f64, e: f64, feed: f64 },
}

/// Parses the subset of Marlin G-code this crate emits.
pub fn read_gcode(text: &str) -> Result<Vec<GcodeOp>, GcodeParseError> {
    let mut ops = Vec::new();
    let (mut x, mut y, mut z, mut e, mut feed) = (0.0, 0.0, 0.0, 0.0, 1800.0);
    let mut relative_e = false;
    for (ln, raw) in text.lines().enumerate() {
        let line = ln + 1;
        let err = |msg: String| GcodeParseError { line, msg };
        let (code, comment) = match raw.find(';') {
            Some(i) => (&raw[..i], Some(&raw[i + 1..])),
            None => (raw, None),
        };
        if let Some(c) = comment.and_then(|c| c.trim().strip_prefix("LAYER:")) {
            let n = c.trim().parse().map_err(|_| err(format!("bad layer marker {c:?}")))?;
            ops.push(GcodeOp::Layer(n));
        }
        let mut words = code.split_whitespace();
        let Some(cmd) = words.next() else { continue };
        let mut params: Vec<(char, f64)> = Vec::new();
        for w in words {
            let mut ch = w.chars();
            let letter = ch.next().expect("non-empty word").to_ascii_uppercase();
            let v: f64 = ch.as_str().parse().map_err(|_| err(format!("bad parameter {w:?}")))?;
            params.push((letter, v));
        }
        let get = |c: char| params.iter().find(|(l, _)| *l == c).map(|(_, v)| *v);
        match cmd.to_ascii_uppercase().as_str() {
            "G0" | "G1" => {
                let (nx, ny) = (get('X').unwrap_or(x), get('Y').unwrap_or(y));
                z = get('Z').unwrap_or(z);
                feed = get('F').unwrap_or(feed);
                let de = match get('E') {
                    Some(v) if relative_e => v,
                    Some(v) => v - e,
                    None => 0.0,
                };
                if !relative_e {
                    e = get('E').unwrap_or(e);
                }
                let (from, to) = (Point2::new(x, y), Point2::new(nx, ny));
                if from.dist(to) > 0.0 {
                    if de > 0.0 {
                        ops.push(GcodeOp::Extrude { from, to, z, e: de, feed });
                    } else {
                        ops.push(GcodeOp::Travel { to, z });
                    }
                }
                x = nx;
                y = ny;
            }
            "G92" => e = get('E').unwrap_or(e),
            "M82" => relative_e = false,
            "M83" => relative_e = true,
            "M165" => {
                let v: Vec<f64> = MIX_AXES.iter().map_while(|&a| get(a)).collect();
                if v.is_empty() {
                    return Err(err("M165 without mix factors".into()));
                }
                ops.push(GcodeOp::State(CommandState::Mix(v)));
            }
            "M104" => {
                let t = get('S').ok_or_else(|| err("M104 without S".into()))?;
                ops.push(GcodeOp::State(CommandState::Temperature(t)));
            }
            c if c.starts_with('T') => {
                let n = c[1..].parse().map_err(|_| err(format!("bad tool {c:?}")))?;
                ops.push(GcodeOp::State(CommandState::Tool(n)));
            }
            _ => {}
        }
    }
    Ok(ops)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::toolpath::{PathRole, ToolPath};
    use approx::assert_relative_eq;

    #[test]
    fn capsule_values() {
        assert_relative_eq!(capsule_area(0.2, 0.4).unwrap(), 0.0714159265358979, epsilon = 1e-15);
        assert_relative_eq!(capsule_area(0.2, 0.2).unwrap(), std::f64::consts::PI * 0.01, epsilon = 1e-15);
        assert_relative_eq!(capsule_area(0.2, 0.6).unwrap(), 0.1114159265358979, epsilon = 1e-15);
        assert_eq!(capsule_area(0.4, 0.2), Err(EmitError::InvalidBead { h: 0.4, w: 0.2 }));
    }

    #[test]
    fn lookahead_values() {
        assert_relative_eq!(lookahead_distance(68.56, 0.2, 0.4).unwrap(), 960.0099, epsilon = 1e-4);
        assert_relative_eq!(lookahead_distance(32.14, 0.2, 0.4).unwrap(), 450.0397, epsilon = 1e-4);
        assert_eq!(lookahead_distance(0.0, 0.2, 0.4).unwrap(), 0.0);
    }

    #[test]
    fn flow_values() {
        assert_relative_eq!(flow_percent(190.0, FlowMaterial::Pla).unwrap(), 101.8029610, epsilon = 1e-6);
        assert_relative_eq!(flow_percent(225.0, FlowMaterial::Pla).unwrap(), 54.9561094, epsilon = 1e-6);
        assert_relative_eq!(flow_percent(225.0, FlowMaterial::Tpu).unwrap(), 49.1148125, epsilon = 1e-6);
        assert_eq!(flow_percent(250.0, FlowMaterial::Pla), Err(EmitError::OutOfRange { t: 250.0 }));
        let mut prev = f64::INFINITY;
        for t in 190..=225 {
            let f = flow_percent(t as f64, FlowMaterial::Pla).unwrap();
            assert!(f < prev);
            prev = f;
        }
    }

    #[test]
    fn state_lines() {
        let p = MachineProfile::mixing();
        assert_eq!(state_commands(&CommandState::Mix(vec![0.25, 0.75]), &p).unwrap(), vec!["M165 A0.250 B0.750"]);
        assert_eq!(state_commands(&CommandState::Tool(4), &p).unwrap(), vec!["T4"]);
        let t = MachineProfile::temperature();
        assert_eq!(state_commands(&CommandState::Temperature(225.0), &t).unwrap(), vec!["M104 S225", "M221 T0 S55.0"]);
        assert_eq!(state_commands(&CommandState::Temperature(207.5), &t).unwrap()[0], "M104 S207.5");
    }

    fn plan(items: Vec<PlanItem>) -> Vec<LayerPlan> {
        vec![LayerPlan { index: 0, z: 0.1, items }]
    }

    #[test]
    fn ten_mm_move() {
        let profile = MachineProfile::mixing();
        let path = ToolPath::new(vec![Point2::new(0.0, 0.0), Point2::new(10.0, 0.0)], PathRole::Infill, false);
        let g = emit_gcode(
            &plan(vec![PlanItem::State { color: 0, state: CommandState::Mix(vec![1.0, 0.0]) }, PlanItem::Path { path, color: 0 }]),
            &profile,
            &PrintSettings::default(),
            Point2::new(100.0, 100.0),
        )
        .unwrap();
        assert!(g.contains("G0 X100.000 Y100.000 F6000\n"), "{g}");
        assert!(g.contains("G1 X110.000 Y100.000 E0.29691 F1800\n"), "{g}");
        let ops = read_gcode(&g).unwrap();
        let e: f64 = ops.iter().map(|o| if let GcodeOp::Extrude { e, .. } = o { *e } else { 0.0 }).sum();
        assert_relative_eq!(e, 0.29691, epsilon = 1e-9);
        assert_relative_eq!(10.0 * extrusion_per_mm(&profile, &PrintSettings::default()).unwrap(), 0.2969129, epsilon = 1e-7);
    }

    #[test]
    fn emission_errors() {
        let profile = MachineProfile::mixing();
        let path = ToolPath::new(vec![Point2::new(0.0, 0.0), Point2::new(10.0, 0.0)], PathRole::Infill, false);
        let s = PrintSettings::default();
        let missing = emit_gcode(&plan(vec![PlanItem::Path { path: path.clone(), color: 0 }]), &profile, &s, Point2::new(10.0, 10.0));
        assert_eq!(missing, Err(EmitError::StateMissing { layer: 0 }));
        let items = vec![PlanItem::State { color: 0, state: CommandState::Tool(0) }, PlanItem::Path { path, color: 0 }];
        assert!(matches!(emit_gcode(&plan(items), &profile, &s, Point2::new(295.0, 10.0)), Err(EmitError::BedBounds { .. })));
    }

    #[test]
    fn reader_handles_relative_and_tools() {
        let ops = read_gcode("M83\nT2\nG1 X1 Y0 E0.5\nG0 X2\nM165 A0.5 B0.5\nM104 S200 ; hot\n").unwrap();
        assert_eq!(ops[0], GcodeOp::State(CommandState::Tool(2)));
        assert!(matches!(ops[1], GcodeOp::Extrude { e, .. } if e == 0.5));
        assert!(matches!(ops[2], GcodeOp::Travel { .. }));
        assert_eq!(ops[3], GcodeOp::State(CommandState::Mix(vec![0.5, 0.5])));
        assert_eq!(ops[4], GcodeOp::State(CommandState::Temperature(200.0)));
        assert!(read_gcode("G1 Xabc").is_err());
        assert!(read_gcode("").unwrap().is_empty());
    }
}
