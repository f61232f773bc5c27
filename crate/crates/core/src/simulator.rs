//! Melt-chamber dead volume simulation and look-ahead calibration.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::design::{parse_design, Design};
use crate::gcode::{capsule_area, EmitError, GcodeOp};
use crate::geom::{Point2, Point3};
use crate::palette::{build_palette, ZipperSpec};
use crate::profile::MachineProfile;
use crate::strategy::{apply_lookahead, layer_faces, layer_heights, layer_outline, slice_layer_strategy2, FillPattern, LayerPlan, PlanItem, StrategyError};
use crate::toolpath::PrintSettings;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("realized composition never reaches half of the second material")]
    NoTransition,
    #[error("designed composition does not cross one half along the passes")]
    NoBoundary,
    #[error("look-ahead did not converge after {iterations} iterations (last error {error:.3} mm, L = {lookahead} mm)")]
    NonConvergence { iterations: usize, error: f64, lookahead: f64 },
    #[error(transparent)]
    Strategy(#[from] StrategyError),
    #[error(transparent)]
    Emit(#[from] EmitError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ChamberModel {
    /// First-in first-out displacement of `volume` mm³.
    PlugFlow { volume: f64 },
    /// Continuously stirred tank of `volume` mm³.
    PerfectMix { volume: f64 },
    /// First-order lag in time with constant `tau` seconds.
    ThermalLag { tau: f64 },
}

impl ChamberModel {
    /// Model suited to the profile's machine class.
    pub fn for_profile(profile: &MachineProfile) -> Self {
        match profile.syntax {
            crate::profile::Syntax::Temperature => ChamberModel::ThermalLag { tau: profile.thermal_time_constant },
            _ => ChamberModel::PlugFlow { volume: profile.melt_volume },
        }
    }
}

/// Input to the simulator: composition changes and extrusion moves.
#[derive(Debug, Clone, PartialEq)]
pub enum StreamItem {
    State(Vec<f64>),
    /// `feed` in mm/min; `z` is the nozzle height.
    Segment { a: Point2, b: Point2, z: f64, volume: f64, feed: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealizedSegment {
    pub a: Point2,
    pub b: Point2,
    pub z: f64,
    pub volume: f64,
    pub commanded: Vec<f64>,
    pub realized: Vec<f64>,
}

impl RealizedSegment {
    pub fn length(&self) -> f64 {
        self.a.dist(self.b)
    }
}

/// Move stream of planned layers in bed coordinates.
pub fn stream_from_plans(
    plans: &[LayerPlan],
    profile: &MachineProfile,
    settings: &PrintSettings,
    offset: Point2,
) -> Result<Vec<StreamItem>, EmitError> {
    let area = capsule_area(settings.layer_height, settings.bead_width)? * profile.extrusion_multiplier;
    let mut out = Vec::new();
    for plan in plans {
        let z = plan.z + settings.layer_height / 2.0;
        for it in &plan.items {
            match it {
                PlanItem::State { state, .. } => out.push(StreamItem::State(state.components(profile))),
                PlanItem::Path { path, .. } => {
                    for w in path.polyline().windows(2) {
                        let d = w[0].dist(w[1]);
                        if d > 0.0 {
                            out.push(StreamItem::Segment { a: w[0] + offset, b: w[1] + offset, z, volume: d * area, feed: profile.print_speed });
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Move stream of parsed G-code.
pub fn stream_from_gcode(ops: &[GcodeOp], profile: &MachineProfile) -> Vec<StreamItem> {
    let fa = profile.filament_area();
    ops.iter()
        .filter_map(|op| match op {
            GcodeOp::State(s) => Some(StreamItem::State(s.components(profile))),
            GcodeOp::Extrude { from, to, z, e, feed } => Some(StreamItem::Segment { a: *from, b: *to, z: *z, volume: e * fa, feed: *feed }),
            _ => None,
        })
        .collect()
}

fn padded(v: &[f64], n: usize) -> Vec<f64> {
    let mut v = v.to_vec();
    v.resize(n, 0.0);
    v
}

fn relax(c: &mut [f64], target: &[f64], k: f64) {
    for (ci, ti) in c.iter_mut().zip(target) {
        *ci += k * (ti - *ci);
    }
}

/// Realized composition of every extruded segment. The chamber starts full
/// of the first commanded composition.
pub fn simulate(stream: &[StreamItem], model: ChamberModel) -> Vec<RealizedSegment> {
    let width = stream
        .iter()
        .filter_map(|s| if let StreamItem::State(c) = s { Some(c.len()) } else { None })
        .max()
        .unwrap_or(1);
    let first = stream
        .iter()
        .find_map(|s| if let StreamItem::State(c) = s { Some(padded(c, width)) } else { None })
        .unwrap_or_else(|| padded(&[1.0], width));
    let mut commanded = first.clone();
    let mut mixed = first.clone();
    let mut fifo: VecDeque<(f64, Vec<f64>)> = VecDeque::new();
    if let ChamberModel::PlugFlow { volume } = model {
        if volume > 0.0 {
            fifo.push_back((volume, first.clone()));
        }
    }
    let mut out = Vec::new();
    for item in stream {
        let (a, b, z, volume, feed) = match item {
            StreamItem::State(c) => {
                commanded = padded(c, width);
                continue;
            }
            StreamItem::Segment { a, b, z, volume, feed } => (*a, *b, *z, *volume, *feed),
        };
        match model {
            ChamberModel::PlugFlow { volume: v } if v > 0.0 => {
                fifo.push_back((volume, commanded.clone()));
                // Pop `volume` from the front, splitting the segment where the
                // outgoing composition changes.
                let mut need = volume;
                let mut done = 0.0;
                while need > 1e-15 {
                    let (front_v, front_c) = fifo.front_mut().expect("chamber holds the pushed volume");
                    let take = need.min(*front_v);
                    let (t0, t1) = (done / volume, (done + take) / volume);
                    let comp = front_c.clone();
                    *front_v -= take;
                    if *front_v <= 1e-15 {
                        fifo.pop_front();
                    }
                    match out.last_mut() {
                        Some(RealizedSegment { b: pb, realized, commanded: pc, volume: pv, z: pz, .. })
                            if t0 > 0.0 && *realized == comp && *pb == a.lerp(b, t0) && *pc == commanded && *pz == z =>
                        {
                            *pb = a.lerp(b, t1);
                            *pv += take;
                        }
                        _ => out.push(RealizedSegment { a: a.lerp(b, t0), b: a.lerp(b, t1), z, volume: take, commanded: commanded.clone(), realized: comp }),
                    }
                    need -= take;
                    done += take;
                }
                if let Some(last) = out.last_mut() {
                    last.b = b;
                }
            }
            ChamberModel::PlugFlow { .. } => {
                out.push(RealizedSegment { a, b, z, volume, commanded: commanded.clone(), realized: commanded.clone() });
            }
            ChamberModel::PerfectMix { volume: v } => {
                let k = if v > 0.0 { 1.0 - (-volume / v).exp() } else { 1.0 };
                relax(&mut mixed, &commanded, k);
                out.push(RealizedSegment { a, b, z, volume, commanded: commanded.clone(), realized: mixed.clone() });
            }
            ChamberModel::ThermalLag { tau } => {
                let dt = a.dist(b) / (feed / 60.0);
                let k = if tau > 0.0 { 1.0 - (-dt / tau).exp() } else { 1.0 };
                relax(&mut mixed, &commanded, k);
                out.push(RealizedSegment { a, b, z, volume, commanded: commanded.clone(), realized: mixed.clone() });
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Boundary error
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq)]
struct Pass {
    x: f64,
    length: f64,
    fraction: f64,
}

/// Serpentine passes along y with their length-weighted realized fraction of
/// component `index`.
fn passes(segments: &[RealizedSegment], index: usize) -> Vec<Pass> {
    let mut out: Vec<(Pass, f64)> = Vec::new();
    for s in segments {
        let d = s.b - s.a;
        if d.y.abs() <= d.x.abs() {
            continue;
        }
        let len = s.length();
        let f = s.realized.get(index).copied().unwrap_or(0.0);
        match out.last_mut() {
            Some((p, acc)) if (p.x - s.a.x).abs() < 1e-6 => {
                p.length += len;
                *acc += f * len;
            }
            _ => out.push((Pass { x: s.a.x, length: len, fraction: 0.0 }, f * len)),
        }
    }
    out.into_iter().map(|(mut p, acc)| {
        p.fraction = if p.length > 0.0 { acc / p.length } else { 0.0 };
        p
    }).collect()
}

/// Where the realized transition begins: the near edge of the first pass
/// whose realized fraction of component `index` reaches one half.
pub fn realized_transition_x(segments: &[RealizedSegment], index: usize, w: f64) -> Result<f64, SimError> {
    let ps = passes(segments, index);
    let k = ps.iter().position(|p| p.fraction >= 0.5).ok_or(SimError::NoTransition)?;
    let dir = match (k.checked_sub(1).map(|j| ps[j]), ps.get(k + 1)) {
        (Some(prev), _) if prev.x != ps[k].x => (ps[k].x - prev.x).signum(),
        (_, Some(next)) if next.x != ps[k].x => (next.x - ps[k].x).signum(),
        _ => 1.0,
    };
    Ok(ps[k].x - 0.5 * w * dir)
}

/// Midpoint of the x extent covered by passes.
pub fn pass_midpoint(segments: &[RealizedSegment]) -> Option<f64> {
    let ps = passes(segments, 0);
    let lo = ps.iter().map(|p| p.x).fold(f64::INFINITY, f64::min);
    let hi = ps.iter().map(|p| p.x).fold(f64::NEG_INFINITY, f64::max);
    (lo <= hi).then_some(0.5 * (lo + hi))
}

/// x where the designed fraction of `material` crosses one half along `y`.
pub fn designed_boundary(design: &Design, material: &str, y: f64, z: f64, x0: f64, x1: f64) -> Result<f64, SimError> {
    let f = |x: f64| design.fraction_of(material, Point3::new(x, y, z)).map(|v| v - 0.5).map_err(StrategyError::from);
    let (mut lo, mut hi) = (x0, x1);
    let (flo, fhi) = (f(lo)?, f(hi)?);
    if flo.signum() == fhi.signum() {
        return Err(SimError::NoBoundary);
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if f(mid)?.signum() == flo.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Signed distance from the designed boundary `x_b` to where the realized
/// transition begins (bed coordinates).
pub fn realized_boundary_error(segments: &[RealizedSegment], index: usize, x_b: f64, w: f64) -> Result<f64, SimError> {
    Ok(realized_transition_x(segments, index, w)? - x_b)
}

// ---------------------------------------------------------------------------
// Calibration
// ---------------------------------------------------------------------------

/// Half-and-half block printed as one serpentine layer along y.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationObject {
    pub length_y: f64,
    pub width: f64,
}

impl Default for CalibrationObject {
    fn default() -> Self {
        Self { length_y: 60.0, width: 40.0 }
    }
}

impl CalibrationObject {
    pub fn design(&self, height: f64) -> Design {
        let text = format!(
            "fgrade([\"0.5 - x*1000\", \"0.5 + x*1000\"], [\"first\", \"second\"]) {{ rectprism({}, {}, {}); }}",
            self.width, self.length_y, height
        );
        parse_design(&text).expect("calibration design is well formed")
    }

    /// Single-layer plan: two colors, each face filled by passes along y.
    pub fn plans(&self, settings: &PrintSettings, profile: &MachineProfile) -> Result<Vec<LayerPlan>, SimError> {
        let h = settings.layer_height;
        let design = self.design(h);
        let palette = build_palette(2, &design.materials()).map_err(StrategyError::from)?;
        let s = PrintSettings { infill_angle: -90.0, ..settings.clone() };
        let source = design.geometry_source().map_err(StrategyError::from)?;
        let mut plans = Vec::new();
        for (i, z) in layer_heights(0.0, h, h).into_iter().enumerate() {
            let outline = layer_outline(&design, &source, z, s.resolution())?;
            let faces = layer_faces(&design, &outline, z, &palette, &ZipperSpec::disabled(), &s)?;
            plans.push(slice_layer_strategy2(&faces, i, z, &s, &palette, profile, FillPattern::Rectilinear)?);
        }
        Ok(plans)
    }

    /// Boundary error of the plans printed with look-ahead `lookahead`.
    pub fn boundary_error(
        &self,
        settings: &PrintSettings,
        profile: &MachineProfile,
        model: ChamberModel,
        lookahead: f64,
    ) -> Result<f64, SimError> {
        let mut plans = self.plans(settings, profile)?;
        apply_lookahead(&mut plans, lookahead);
        let stream = stream_from_plans(&plans, profile, settings, Point2::new(0.0, 0.0))?;
        let segments = simulate(&stream, model);
        realized_boundary_error(&segments, 1, 0.0, settings.bead_width)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Calibration {
    pub lookahead: f64,
    pub iterations: usize,
    /// Boundary error measured at each iteration.
    pub errors: Vec<f64>,
}

/// Iterates print, measure and correct: the look-ahead grows by whole
/// passes until the realized boundary lies within one bead width.
pub fn calibrate_lookahead(
    object: &CalibrationObject,
    settings: &PrintSettings,
    profile: &MachineProfile,
    model: ChamberModel,
    max_iters: usize,
) -> Result<Calibration, SimError> {
    let w = settings.bead_width;
    let mut lookahead = 0.0;
    let mut errors = Vec::new();
    for it in 0..max_iters {
        let e = object.boundary_error(settings, profile, model, lookahead)?;
        errors.push(e);
        if e.abs() < w {
            return Ok(Calibration { lookahead, iterations: it + 1, errors });
        }
        let passes = (e.abs() / w - 1e-9).ceil();
        lookahead = (lookahead + e.signum() * passes * object.length_y).max(0.0);
    }
    Err(SimError::NonConvergence { iterations: max_iters, error: errors.last().copied().unwrap_or(f64::NAN), lookahead })
}
