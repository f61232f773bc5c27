//! Layer planning: sectioned toolpaths with purge towers, zippering, dense
//! gradient-aligned fills and the look-ahead transformation.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arrangement::{build_arrangement, classify_faces, merge_slivers, ArrangementError, ColoredFace, SNAP_TOL};
use crate::contour::{contour_field, marching_squares_exact, sample_grid, slice_mesh, stitch_segments, Contour, ContourError, STITCH_TOL};
use crate::design::{Design, DesignError, GeometrySource};
use crate::gcode::{lookahead_distance, EmitError};
use crate::geom::{polygons_contain, simplify_polyline, simplify_ring, BBox2, Point2, Point3, Polygon};
use crate::palette::{CommandState, Palette, PaletteError, PaletteKind, ZipperSpec};
use crate::profile::MachineProfile;
use crate::toolpath::{
    clip_paths_to_faces, concentric_loops, fill_gaps, generate_perimeters, hatch, infill_region, ClipError, LabeledPath,
    PathRole, PrintSettings, SettingsError, ToolPath,
};

/// Contour simplification tolerance, mm.
pub const SIMPLIFY_TOL: f64 = 0.005;
/// Gap kept between purge towers and around the part, mm.
pub const TOWER_GAP: f64 = 5.0;

#[derive(Debug, Error)]
pub enum StrategyError {
    #[error(transparent)]
    Design(#[from] DesignError),
    #[error(transparent)]
    Contour(#[from] ContourError),
    #[error(transparent)]
    Arrangement(#[from] ArrangementError),
    #[error(transparent)]
    Clip(#[from] ClipError),
    #[error(transparent)]
    Palette(#[from] PaletteError),
    #[error(transparent)]
    Settings(#[from] SettingsError),
    #[error(transparent)]
    Bead(#[from] EmitError),
    #[error("{needed} purge towers of side {side} mm do not fit on the bed ({placed} placed)")]
    BedOverflow { needed: usize, placed: usize, side: f64 },
    #[error("material field is not finite at ({x}, {y}, {z})")]
    Field { x: f64, y: f64, z: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PlanItem {
    /// Establish a color on the machine.
    State { color: usize, state: CommandState },
    /// Extrude along a path; `color` is the label it was planned with.
    Path { path: ToolPath, color: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerPlan {
    pub index: usize,
    pub z: f64,
    pub items: Vec<PlanItem>,
}

impl LayerPlan {
    pub fn new(index: usize, z: f64) -> Self {
        Self { index, z, items: Vec::new() }
    }

    pub fn extrusion_length(&self) -> f64 {
        self.paths().map(|(p, _)| p.length()).sum()
    }

    pub fn paths(&self) -> impl Iterator<Item = (&ToolPath, usize)> {
        self.items.iter().filter_map(|it| match it {
            PlanItem::Path { path, color } => Some((path, *color)),
            _ => None,
        })
    }

    pub fn states(&self) -> impl Iterator<Item = (usize, &CommandState)> {
        self.items.iter().filter_map(|it| match it {
            PlanItem::State { color, state } => Some((*color, state)),
            _ => None,
        })
    }

    /// Colors of the state events in order.
    pub fn color_sequence(&self) -> Vec<usize> {
        self.states().map(|(c, _)| c).collect()
    }

    pub fn purge_path_count(&self) -> usize {
        self.paths().filter(|(p, _)| p.role == PathRole::Purge).count()
    }

    /// Path color labels grouped after the state that precedes them.
    fn blocks(&self) -> Vec<(usize, CommandState, Vec<PlanItem>)> {
        let mut out: Vec<(usize, CommandState, Vec<PlanItem>)> = Vec::new();
        for it in &self.items {
            match it {
                PlanItem::State { color, state } => out.push((*color, state.clone(), Vec::new())),
                PlanItem::Path { .. } => {
                    if let Some(b) = out.last_mut() {
                        b.2.push(it.clone());
                    }
                }
            }
        }
        out
    }
}

// ---------------------------------------------------------------------------
// Layer geometry
// ---------------------------------------------------------------------------

/// Heights of layer mid-planes for a part spanning `z0..z1`.
pub fn layer_heights(z0: f64, z1: f64, h: f64) -> Vec<f64> {
    let n = ((z1 - z0) / h + 1e-9).floor().max(0.0) as usize;
    (0..n).map(|k| z0 + (k as f64 + 0.5) * h).collect()
}

fn simplify_contour(c: Contour) -> Contour {
    Contour {
        polygons: c.polygons.iter().map(|r| simplify_ring(r, SIMPLIFY_TOL)).filter(|r| r.len() >= 3).collect(),
        polylines: c.polylines.iter().map(|l| simplify_polyline(l, SIMPLIFY_TOL)).filter(|l| l.len() >= 2).collect(),
    }
}

/// Cross-section of the geometry at height `z`.
pub fn layer_outline(design: &Design, source: &GeometrySource, z: f64, resolution: f64) -> Result<Vec<Polygon>, StrategyError> {
    let contour = match source {
        GeometrySource::Mesh(mesh) => slice_mesh(mesh, z, STITCH_TOL),
        GeometrySource::Implicit => {
            let bbox = design.xy_bounds()?;
            let err = std::sync::Mutex::new(None);
            let c = contour_field(
                |x, y| match design.eval_sdf(Point3::new(x, y, z)) {
                    Ok(v) => v,
                    Err(e) => {
                        err.lock().expect("poisoned").get_or_insert(e);
                        f64::NAN
                    }
                },
                bbox,
                resolution,
                0.0,
            );
            if let Some(e) = err.into_inner().expect("poisoned") {
                return Err(e.into());
            }
            c?
        }
    };
    let polys = simplify_contour(contour).to_polygons();
    Ok(polys.into_iter().map(Polygon::normalized).collect())
}

/// Material iso-contours bounding palette cells and zipper bands.
fn material_contours(
    design: &Design,
    outline: &[Polygon],
    z: f64,
    palette: &Palette,
    zipper: &ZipperSpec,
    resolution: f64,
) -> Result<Contour, StrategyError> {
    let mut bbox = BBox2::empty();
    for p in outline {
        bbox = bbox.union(&p.bbox());
    }
    let mut out = Contour::default();
    if bbox.is_empty() {
        return Ok(out);
    }
    let mut lines = palette.iso_lines();
    if zipper.is_active() && palette.kind == PaletteKind::Line {
        if let Some(l) = lines.iter_mut().find(|(m, _)| *m == 1) {
            l.1.extend(zipper.iso_values());
        }
    }
    for (m, values) in lines {
        if values.is_empty() {
            continue;
        }
        let name = &palette.materials[m];
        let field = |x: f64, y: f64| design.fraction_of(name, Point3::new(x, y, z)).unwrap_or(f64::NAN);
        let grid = sample_grid(field, bbox.inflate(2.0 * resolution), resolution).map_err(|e| match e {
            ContourError::NonFinite { x, y } => match design.eval_fractions(Point3::new(x, y, z)) {
                Err(d) => StrategyError::Design(d),
                Ok(_) => StrategyError::Field { x, y, z },
            },
            e => e.into(),
        })?;
        for iso in values {
            let segs = marching_squares_exact(&grid, iso, &field);
            out.extend(simplify_contour(stitch_segments(&segs, STITCH_TOL)));
        }
    }
    Ok(out)
}

/// Colored faces of one layer: the arrangement of the outline with the
/// material iso-contours, slivers merged, each face classified.
pub fn layer_faces(
    design: &Design,
    outline: &[Polygon],
    z: f64,
    palette: &Palette,
    zipper: &ZipperSpec,
    settings: &PrintSettings,
) -> Result<Vec<ColoredFace>, StrategyError> {
    let uniform = palette.color_count() == 1 && !zipper.is_active();
    if uniform {
        return Ok(outline
            .iter()
            .map(|p| ColoredFace { polygon: p.clone(), color: 0, rep: crate::arrangement::representative_point(p), band: None })
            .collect());
    }
    let geometry = Contour { polygons: outline.iter().flat_map(|p| p.rings().cloned().collect::<Vec<_>>()).collect(), polylines: Vec::new() };
    let material = material_contours(design, outline, z, palette, zipper, settings.resolution())?;
    let arr = build_arrangement(&geometry, &material, SNAP_TOL)?;
    let w = settings.bead_width;
    let inside = |p: Point2| polygons_contain(outline, p);
    let (_, faces) = merge_slivers(arr, inside, w * w / 4.0)?;
    Ok(classify_faces(&faces, design, palette, zipper, z)?)
}

// ---------------------------------------------------------------------------
// Strategy 1
// ---------------------------------------------------------------------------

/// Conventional perimeters and infill for an outline.
pub fn conventional_paths(outline: &[Polygon], settings: &PrintSettings, layer_index: usize) -> Vec<ToolPath> {
    let w = settings.bead_width;
    let mut paths = generate_perimeters(outline, settings.perimeter_count, w);
    let region = infill_region(outline, settings.perimeter_count, w);
    let angle = settings.infill_angle + if layer_index % 2 == 1 { 90.0 } else { 0.0 };
    paths.extend(hatch(&region, settings.infill_spacing(), angle, 0.0, PathRole::Infill));
    paths
}

/// Reassigns paths inside zipper bands alternately to the two adjacent
/// colors, lower color first, in generation order.
pub fn apply_zippering(labeled: Vec<LabeledPath>, zipper: &ZipperSpec, palette: &Palette) -> Vec<LabeledPath> {
    if !zipper.is_active() || palette.kind != PaletteKind::Line {
        return labeled;
    }
    let mut counters: HashMap<usize, usize> = HashMap::new();
    labeled
        .into_iter()
        .map(|mut lp| {
            if let Some(k) = lp.band {
                let i = counters.entry(k).or_default();
                lp.color = (k + *i % 2).min(palette.color_count() - 1);
                *i += 1;
            }
            lp
        })
        .collect()
}

/// Groups labeled paths by color in traversal order, one state event per color.
fn order_by_color(
    labeled: Vec<LabeledPath>,
    palette: &Palette,
    profile: &MachineProfile,
    index: usize,
    z: f64,
) -> Result<LayerPlan, StrategyError> {
    let mut by_color: HashMap<usize, Vec<ToolPath>> = HashMap::new();
    for lp in labeled {
        by_color.entry(lp.color).or_default().push(lp.path);
    }
    let mut plan = LayerPlan::new(index, z);
    for c in palette.traversal_order(index) {
        if let Some(paths) = by_color.remove(&c) {
            plan.items.push(PlanItem::State { color: c, state: palette.map_color(c, profile)? });
            plan.items.extend(paths.into_iter().map(|path| PlanItem::Path { path, color: c }));
        }
    }
    Ok(plan)
}

/// Sectioned conventional toolpaths for one layer (purge towers are added
/// across the whole print by [`insert_purge_towers`]).
pub fn slice_layer_strategy1(
    outline: &[Polygon],
    faces: &[ColoredFace],
    index: usize,
    z: f64,
    settings: &PrintSettings,
    palette: &Palette,
    zipper: &ZipperSpec,
    profile: &MachineProfile,
) -> Result<LayerPlan, StrategyError> {
    let paths = conventional_paths(outline, settings, index);
    let labeled = clip_paths_to_faces(&paths, faces, settings.min_segment_length)?;
    let labeled = apply_zippering(labeled, zipper, palette);
    order_by_color(labeled, palette, profile, index, z)
}

// ---------------------------------------------------------------------------
// Strategy 2
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum FillPattern {
    #[default]
    Concentric,
    Rectilinear,
}

/// Dense fill of one face kept half a bead inside its boundary.
pub fn fill_face(face: &Polygon, settings: &PrintSettings, pattern: FillPattern, layer_index: usize) -> Vec<ToolPath> {
    let w = settings.bead_width;
    match pattern {
        FillPattern::Concentric => {
            let (mut loops, last) = concentric_loops(std::slice::from_ref(face), w);
            if let Some(d) = last {
                loops.extend(fill_gaps(std::slice::from_ref(face), d, w));
            }
            loops
        }
        FillPattern::Rectilinear => {
            let angle = settings.infill_angle + if layer_index % 2 == 1 { 90.0 } else { 0.0 };
            hatch(std::slice::from_ref(face), w, angle, 0.5 * w, PathRole::Infill)
        }
    }
}

/// Faces filled densely and printed color by color without purging.
pub fn slice_layer_strategy2(
    faces: &[ColoredFace],
    index: usize,
    z: f64,
    settings: &PrintSettings,
    palette: &Palette,
    profile: &MachineProfile,
    pattern: FillPattern,
) -> Result<LayerPlan, StrategyError> {
    let mut labeled = Vec::new();
    let mut thin = 0usize;
    for (fi, f) in faces.iter().enumerate() {
        let paths = fill_face(&f.polygon, settings, pattern, index);
        if paths.is_empty() {
            thin += 1;
            continue;
        }
        labeled.extend(paths.into_iter().map(|path| LabeledPath { path, color: f.color, band: None, face: fi, source: fi }));
    }
    if thin > 0 {
        log::warn!("{thin} face(s) at z={z:.3} are too thin to fill and were skipped");
    }
    order_by_color(labeled, palette, profile, index, z)
}

// ---------------------------------------------------------------------------
// Purge towers
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PurgeTowerSpec {
    /// Tower centres in bed coordinates with their colors.
    pub towers: Vec<(usize, Point2)>,
    pub side: f64,
    pub spacing: f64,
    /// Minimum extrusion per tower layer, mm.
    pub purge_length: f64,
}

fn ceil_tenth(v: f64) -> f64 {
    (v * 10.0 - 1e-9).ceil() / 10.0
}

/// Side of a square tower whose dense layer holds `purge_length` of path.
pub fn tower_side(purge_length: f64, spacing: f64) -> f64 {
    ceil_tenth((purge_length * spacing).sqrt())
}

/// Places one tower per color on the bed clear of `part` (bed coordinates).
/// Returns `None` when the profile has no dead volume.
pub fn plan_purge_towers(
    colors: &[usize],
    part: BBox2,
    profile: &MachineProfile,
    settings: &PrintSettings,
) -> Result<Option<PurgeTowerSpec>, StrategyError> {
    let purge_length = lookahead_distance(profile.melt_volume, settings.layer_height, settings.bead_width)?;
    if purge_length <= 0.0 || colors.is_empty() {
        return Ok(None);
    }
    let spacing = settings.bead_width;
    let side = tower_side(purge_length, spacing);
    let (bw, bh) = profile.bed_size;
    let fits = |c: Point2| {
        let b = BBox2::new(c - Point2::new(side / 2.0, side / 2.0), c + Point2::new(side / 2.0, side / 2.0));
        b.min.x >= 0.0 && b.min.y >= 0.0 && b.max.x <= bw && b.max.y <= bh && !b.inflate(TOWER_GAP).overlaps(&part)
    };
    let mut centres = Vec::new();
    if !profile.purge_locations.is_empty() {
        for &(x, y) in profile.purge_locations.iter().take(colors.len()) {
            let c = Point2::new(x, y);
            let clash = centres.iter().any(|o: &Point2| (o.x - c.x).abs() < side && (o.y - c.y).abs() < side);
            if fits(c) && !clash {
                centres.push(c);
            }
        }
    } else {
        let pitch = side + TOWER_GAP;
        let mut y = TOWER_GAP + side / 2.0;
        'rows: while y + side / 2.0 <= bh {
            let mut x = TOWER_GAP + side / 2.0;
            while x + side / 2.0 <= bw {
                let c = Point2::new(x, y);
                if fits(c) {
                    centres.push(c);
                    if centres.len() == colors.len() {
                        break 'rows;
                    }
                }
                x += pitch;
            }
            y += pitch;
        }
    }
    if centres.len() < colors.len() {
        return Err(StrategyError::BedOverflow { needed: colors.len(), placed: centres.len(), side });
    }
    Ok(Some(PurgeTowerSpec { towers: colors.iter().copied().zip(centres).collect(), side, spacing, purge_length }))
}

/// One layer of a tower: a perimeter loop and a dense hatch.
pub fn tower_layer(centre: Point2, side: f64, spacing: f64, layer_index: usize) -> Vec<ToolPath> {
    let h = side / 2.0;
    let square = Polygon::rect(centre - Point2::new(h, h), centre + Point2::new(h, h));
    let mut paths = generate_perimeters(std::slice::from_ref(&square), 1, spacing);
    let region = infill_region(std::slice::from_ref(&square), 1, spacing);
    let angle = if layer_index % 2 == 0 { 45.0 } else { -45.0 };
    paths.extend(hatch(&region, spacing, angle, 0.0, PathRole::Infill));
    for p in &mut paths {
        p.role = PathRole::Purge;
    }
    paths
}

/// Inserts tower paths after state events. With more than one tower every
/// tower is printed on every layer so they grow with the part; a single
/// color is primed once on the first layer. `threshold` skips purging when
/// the midpoint change from the previous color does not exceed it.
pub fn insert_purge_towers(
    plans: &mut [LayerPlan],
    spec: &PurgeTowerSpec,
    offset: Point2,
    palette: &Palette,
    profile: &MachineProfile,
    threshold: f64,
) -> Result<(), StrategyError> {
    let towers: HashMap<usize, Point2> = spec.towers.iter().map(|(c, p)| (*c, *p - offset)).collect();
    let lockstep = towers.len() > 1;
    let mut previous: Option<usize> = None;
    let mut skipped = 0usize;
    for plan in plans.iter_mut() {
        if !lockstep && plan.index > 0 {
            continue;
        }
        let mut blocks = plan.blocks();
        if lockstep {
            let present: BTreeSet<usize> = blocks.iter().map(|b| b.0).collect();
            for &c in towers.keys() {
                if !present.contains(&c) {
                    blocks.push((c, palette.map_color(c, profile)?, Vec::new()));
                }
            }
            let order: HashMap<usize, usize> = palette.traversal_order(plan.index).into_iter().enumerate().map(|(i, c)| (c, i)).collect();
            blocks.sort_by_key(|b| order.get(&b.0).copied().unwrap_or(usize::MAX));
        }
        let mut items = Vec::with_capacity(plan.items.len());
        for (k, (color, state, paths)) in blocks.into_iter().enumerate() {
            items.push(PlanItem::State { color, state });
            // Towers keep growing every layer; only a positive threshold skips them.
            let changed = match previous {
                Some(p) if threshold > 0.0 => (palette.midpoint(color) - palette.midpoint(p)).abs() > threshold,
                _ => true,
            };
            let wanted = if lockstep { true } else { k == 0 };
            if let Some(&c) = towers.get(&color) {
                if wanted && changed {
                    items.extend(tower_layer(c, spec.side, spec.spacing, plan.index).into_iter().map(|path| PlanItem::Path { path, color }));
                } else if wanted {
                    skipped += 1;
                }
            }
            previous = Some(color);
            items.extend(paths);
        }
        plan.items = items;
    }
    if skipped > 0 {
        log::warn!("{skipped} tower layer(s) skipped below the purge threshold; those towers will not be continuous");
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Look-ahead
// ---------------------------------------------------------------------------

fn split_at(path: &ToolPath, s: f64) -> (ToolPath, ToolPath) {
    let pts = path.polyline();
    let mut acc = 0.0;
    for (k, w) in pts.windows(2).enumerate() {
        let d = w[0].dist(w[1]);
        if acc + d >= s && d > 0.0 {
            let p = w[0].lerp(w[1], ((s - acc) / d).clamp(0.0, 1.0));
            let mut a: Vec<Point2> = pts[..=k].to_vec();
            if a.last().is_none_or(|l| l.dist(p) > 1e-12) {
                a.push(p);
            }
            let mut b = vec![p];
            let tail = if w[1].dist(p) <= 1e-12 { &pts[k + 2..] } else { &pts[k + 1..] };
            b.extend_from_slice(tail);
            return (ToolPath::new(a, path.role, false), ToolPath::new(b, path.role, false));
        }
        acc += d;
    }
    (path.clone(), ToolPath::new(Vec::new(), path.role, false))
}

/// Issues every state event `distance` mm of extrusion earlier, splitting the
/// path it lands in. Events pushed before the start of the print are merged
/// into one, keeping the last state. Returns the number of merged events.
pub fn apply_lookahead(plans: &mut [LayerPlan], distance: f64) -> usize {
    if distance <= 0.0 {
        return 0;
    }
    // Events with their original cumulative positions.
    let mut events: Vec<(f64, PlanItem)> = Vec::new();
    let mut pos = 0.0;
    for plan in plans.iter() {
        for it in &plan.items {
            match it {
                PlanItem::State { .. } => events.push((pos, it.clone())),
                PlanItem::Path { path, .. } => pos += path.length(),
            }
        }
    }
    let mut shifted: Vec<(f64, PlanItem)> = events.into_iter().map(|(p, e)| ((p - distance).max(0.0), e)).collect();
    let clamped = shifted.iter().filter(|(p, _)| *p == 0.0).count();
    let merged = clamped.saturating_sub(1);
    if merged > 0 {
        log::warn!("{merged} state event(s) would move before the print start; keeping the last");
        let keep = shifted.iter().rposition(|(p, _)| *p == 0.0).expect("clamped event");
        shifted = shifted.into_iter().enumerate().filter(|(i, (p, _))| *p > 0.0 || *i == keep).map(|(_, e)| e).collect();
    }
    let mut next = 0usize;
    let mut pos = 0.0;
    for plan in plans.iter_mut() {
        let old = std::mem::take(&mut plan.items);
        for it in old {
            let PlanItem::Path { path, color } = it else { continue };
            let len = path.length();
            let mut rest = path;
            let mut start = pos;
            while next < shifted.len() && shifted[next].0 < pos + len {
                let at = shifted[next].0 - start;
                if at > 1e-12 {
                    let (a, b) = split_at(&rest, at);
                    let alen = a.length();
                    plan.items.push(PlanItem::Path { path: a, color });
                    start += alen;
                    rest = b;
                }
                plan.items.push(shifted[next].1.clone());
                next += 1;
            }
            if rest.points.len() >= 2 {
                plan.items.push(PlanItem::Path { path: rest, color });
            }
            pos += len;
        }
    }
    if let Some(last) = plans.last_mut() {
        while next < shifted.len() {
            last.items.push(shifted[next].1.clone());
            next += 1;
        }
    }
    merged
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::parse_design;
    use crate::palette::build_palette;
    use crate::toolpath::PathRole;
    use proptest::prelude::*;

    fn p(x: f64, y: f64) -> Point2 {
        Point2::new(x, y)
    }

    fn line_path(len: f64) -> ToolPath {
        ToolPath::new(vec![p(0.0, 0.0), p(len, 0.0)], PathRole::Infill, false)
    }

    fn state(c: usize) -> PlanItem {
        PlanItem::State { color: c, state: CommandState::Tool(c) }
    }

    fn path_item(len: f64, c: usize) -> PlanItem {
        PlanItem::Path { path: line_path(len), color: c }
    }

    #[test]
    fn tower_sides() {
        assert!((tower_side(960.0, 0.4) - 19.6).abs() < 1e-9);
        assert!((tower_side(450.0, 0.4) - 13.5).abs() < 1e-9);
        let layer = tower_layer(p(0.0, 0.0), 19.6, 0.4, 0);
        let len: f64 = layer.iter().map(|t| t.length()).sum();
        assert!(len >= 960.0, "{len}");
        assert!(layer.iter().all(|t| t.role == PathRole::Purge));
    }

    #[test]
    fn no_towers_without_dead_volume() {
        let profile = MachineProfile { melt_volume: 0.0, ..MachineProfile::mixing() };
        let spec = plan_purge_towers(&[0, 1], BBox2::new(p(100.0, 100.0), p(200.0, 200.0)), &profile, &PrintSettings::default()).unwrap();
        assert!(spec.is_none());
    }

    #[test]
    fn towers_avoid_part_and_each_other() {
        let profile = MachineProfile { melt_volume: 68.56, ..MachineProfile::mixing() };
        let part = BBox2::new(p(82.5, 62.5), p(217.5, 237.5));
        let colors: Vec<usize> = (0..16).collect();
        let spec = plan_purge_towers(&colors, part, &profile, &PrintSettings::default()).unwrap().unwrap();
        assert_eq!(spec.towers.len(), 16);
        for (i, (_, a)) in spec.towers.iter().enumerate() {
            let h = spec.side / 2.0;
            let b = BBox2::new(*a - p(h, h), *a + p(h, h));
            assert!(!b.overlaps(&part));
            assert!(b.min.x >= 0.0 && b.max.x <= 300.0 && b.min.y >= 0.0 && b.max.y <= 300.0);
            for (_, o) in &spec.towers[i + 1..] {
                assert!((o.x - a.x).abs() >= spec.side || (o.y - a.y).abs() >= spec.side);
            }
        }
        let big = BBox2::new(p(1.0, 1.0), p(299.0, 299.0));
        assert!(matches!(plan_purge_towers(&colors, big, &profile, &PrintSettings::default()), Err(StrategyError::BedOverflow { .. })));
    }

    #[test]
    fn lookahead_zero_is_identity() {
        let mut plans = vec![LayerPlan { index: 0, z: 0.1, items: vec![state(0), path_item(10.0, 0), state(1), path_item(10.0, 1)] }];
        let before = plans.clone();
        apply_lookahead(&mut plans, 0.0);
        assert_eq!(plans, before);
    }

    #[test]
    fn lookahead_splits_at_quarter() {
        let mut plans = vec![LayerPlan { index: 0, z: 0.1, items: vec![state(0), path_item(8.0, 0), state(1), path_item(8.0, 1)] }];
        apply_lookahead(&mut plans, 6.0);
        let items = &plans[0].items;
        assert_eq!(items.len(), 5);
        let PlanItem::Path { path, .. } = &items[1] else { panic!() };
        assert!((path.length() - 2.0).abs() < 1e-12);
        assert_eq!(items[2], state(1));
        assert!((plans[0].extrusion_length() - 16.0).abs() < 1e-12);
    }

    #[test]
    fn lookahead_crosses_layers_and_clamps() {
        let mut plans = vec![
            LayerPlan { index: 0, z: 0.1, items: vec![state(0), path_item(5.0, 0), state(1), path_item(5.0, 1)] },
            LayerPlan { index: 1, z: 0.3, items: vec![state(1), path_item(5.0, 1), state(0), path_item(5.0, 0)] },
        ];
        let merged = apply_lookahead(&mut plans, 7.0);
        assert_eq!(merged, 1);
        let colors: Vec<usize> = plans.iter().flat_map(|p| p.color_sequence()).collect();
        assert_eq!(colors, vec![1, 1, 0]);
        assert!(plans[1].color_sequence().is_empty());
        let total: f64 = plans.iter().map(|p| p.extrusion_length()).sum();
        assert!((total - 20.0).abs() < 1e-12);
    }

    #[test]
    fn zippering_alternates_within_band() {
        let palette = build_palette(4, &["a".to_string(), "b".to_string()]).unwrap();
        let zipper = palette.zipper_bands(0.1).unwrap();
        let labeled: Vec<LabeledPath> = (0..6)
            .map(|i| LabeledPath { path: line_path(1.0), color: 1, band: Some(1), face: 0, source: i })
            .collect();
        let out = apply_zippering(labeled.clone(), &zipper, &palette);
        let colors: Vec<usize> = out.iter().map(|l| l.color).collect();
        assert_eq!(colors, vec![1, 2, 1, 2, 1, 2]);
        assert_eq!(apply_zippering(labeled.clone(), &ZipperSpec::disabled(), &palette), labeled);
    }

    #[test]
    fn dog_bone_strategy1_regions() {
        let design = parse_design("fgrade([\"0.5 - x/60\", \"0.5 + x/60\"], [\"a\", \"b\"]) { rectprism(60, 10, 0.4); }").unwrap();
        let palette = build_palette(4, &design.materials()).unwrap();
        let settings = PrintSettings::default();
        let profile = MachineProfile::mixing();
        let source = design.geometry_source().unwrap();
        let mut orders = Vec::new();
        for (i, z) in layer_heights(0.0, 0.4, 0.2).into_iter().enumerate() {
            let outline = layer_outline(&design, &source, z, settings.resolution()).unwrap();
            let faces = layer_faces(&design, &outline, z, &palette, &ZipperSpec::disabled(), &settings).unwrap();
            assert_eq!(faces.len(), 4);
            let plan = slice_layer_strategy1(&outline, &faces, i, z, &settings, &palette, &ZipperSpec::disabled(), &profile).unwrap();
            orders.push(plan.color_sequence());
        }
        assert_eq!(orders, vec![vec![0, 1, 2, 3], vec![3, 2, 1, 0]]);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn lookahead_preserves_length_and_states(
            lens in prop::collection::vec(0.5f64..30.0, 1..8),
            colors in prop::collection::vec(0usize..4, 8),
            l in 0.0f64..60.0,
        ) {
            let mut items = Vec::new();
            for (i, len) in lens.iter().enumerate() {
                items.push(state(colors[i]));
                items.push(path_item(*len, colors[i]));
            }
            let mut plans = vec![LayerPlan { index: 0, z: 0.1, items }];
            let before: f64 = plans[0].extrusion_length();
            let states_before = plans[0].color_sequence();
            let merged = apply_lookahead(&mut plans, l);
            prop_assert!((plans[0].extrusion_length() - before).abs() < 1e-9 * before.max(1.0));
            let after = plans[0].color_sequence();
            prop_assert_eq!(after.len() + merged, states_before.len());
            prop_assert_eq!(&after[..], &states_before[merged..]);
        }
    }
}
