//! Conventional toolpath primitives (perimeters, rectilinear and concentric
//! fills) and clipping of paths against colored faces.

use std::collections::HashMap;

use i_overlay::mesh::float::outline::offset::OutlineOffset;
use i_overlay::mesh::float::style::{LineJoin, OutlineStyle};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arrangement::ColoredFace;
use crate::geom::{point_segment_distance, polyline_length, signed_area, BBox2, Point2, Polygon};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PathRole {
    Perimeter,
    Infill,
    Skin,
    Purge,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolPath {
    pub points: Vec<Point2>,
    pub role: PathRole,
    pub closed: bool,
}

impl ToolPath {
    pub fn new(points: Vec<Point2>, role: PathRole, closed: bool) -> Self {
        Self { points, role, closed }
    }

    /// Vertex sequence including the closing vertex for closed paths.
    pub fn polyline(&self) -> Vec<Point2> {
        let mut pts = self.points.clone();
        if self.closed && pts.len() > 1 {
            pts.push(pts[0]);
        }
        pts
    }

    pub fn length(&self) -> f64 {
        polyline_length(&self.polyline())
    }

    pub fn reversed(&self) -> Self {
        let mut p = self.clone();
        p.points.reverse();
        p
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrintSettings {
    pub layer_height: f64,
    pub bead_width: f64,
    pub perimeter_count: usize,
    pub infill_density: f64,
    /// Degrees.
    pub infill_angle: f64,
    pub min_segment_length: f64,
    /// XY sampling resolution for fields; `bead_width / 4` when `None`.
    pub resolution: Option<f64>,
}

impl Default for PrintSettings {
    fn default() -> Self {
        Self {
            layer_height: 0.2,
            bead_width: 0.4,
            perimeter_count: 2,
            infill_density: 1.0,
            infill_angle: 45.0,
            min_segment_length: 5.0,
            resolution: None,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum SettingsError {
    #[error("layer height and bead width must satisfy 0 < h < w (h = {h}, w = {w})")]
    Bead { h: f64, w: f64 },
    #[error("infill density must be in (0, 1], got {0}")]
    Density(f64),
    #[error("resolution must be positive, got {0}")]
    Resolution(f64),
}

impl PrintSettings {
    pub fn validate(&self) -> Result<(), SettingsError> {
        let (h, w) = (self.layer_height, self.bead_width);
        if !(h > 0.0 && w > h) {
            return Err(SettingsError::Bead { h, w });
        }
        if !(self.infill_density > 0.0 && self.infill_density <= 1.0) {
            return Err(SettingsError::Density(self.infill_density));
        }
        if let Some(r) = self.resolution {
            if !(r > 0.0) {
                return Err(SettingsError::Resolution(r));
            }
        }
        Ok(())
    }

    pub fn resolution(&self) -> f64 {
        self.resolution.unwrap_or(self.bead_width / 4.0)
    }

    pub fn infill_spacing(&self) -> f64 {
        self.bead_width / self.infill_density
    }
}

// ---------------------------------------------------------------------------
// Offsetting
// ---------------------------------------------------------------------------

fn clean_ring(ring: &[[f64; 2]]) -> Vec<Point2> {
    let mut out: Vec<Point2> = Vec::with_capacity(ring.len());
    for p in ring {
        let q = Point2::new(p[0], p[1]);
        if out.last().is_none_or(|l| l.dist(q) > 1e-9) {
            out.push(q);
        }
    }
    while out.len() > 1 && out[0].dist(out[out.len() - 1]) <= 1e-9 {
        out.pop();
    }
    out
}

/// Offsets polygons by `delta` (negative shrinks) with mitred corners
/// (miter limit 2); overlapping results are unioned.
pub fn offset_polygons(polys: &[Polygon], delta: f64) -> Vec<Polygon> {
    let shapes: Vec<Vec<Vec<[f64; 2]>>> = polys
        .iter()
        .filter(|p| p.outer.len() >= 3 && p.area() > 0.0)
        .map(|p| {
            let p = p.clone().normalized();
            p.rings().map(|r| r.iter().map(|q| [q.x, q.y]).collect()).collect()
        })
        .collect();
    if shapes.is_empty() {
        return Vec::new();
    }
    if delta == 0.0 {
        return polys.iter().filter(|p| p.area() > 0.0).cloned().collect();
    }
    let style = OutlineStyle::new(delta).line_join(LineJoin::Miter(std::f64::consts::PI / 3.0));
    let out = shapes.outline(&style);
    out.iter()
        .filter_map(|shape| {
            let mut rings = shape.iter().map(|r| clean_ring(r));
            let outer = rings.next()?;
            if outer.len() < 3 || signed_area(&outer).abs() < 1e-12 {
                return None;
            }
            let holes: Vec<Vec<Point2>> = rings.filter(|r| r.len() >= 3 && signed_area(r).abs() >= 1e-12).collect();
            Some(Polygon::new(outer, holes))
        })
        .collect()
}

fn rings_as_paths(polys: &[Polygon], role: PathRole) -> Vec<ToolPath> {
    polys
        .iter()
        .flat_map(|p| p.rings().map(|r| ToolPath::new(r.clone(), role, true)).collect::<Vec<_>>())
        .collect()
}

/// Perimeter `k` follows the outline inset by `(k + 0.5) * w`.
pub fn generate_perimeters(outline: &[Polygon], count: usize, w: f64) -> Vec<ToolPath> {
    let mut out = Vec::new();
    for k in 0..count {
        let inset = offset_polygons(outline, -(k as f64 + 0.5) * w);
        if inset.is_empty() {
            break;
        }
        out.extend(rings_as_paths(&inset, PathRole::Perimeter));
    }
    out
}

/// Region left for infill inside `count` perimeters.
pub fn infill_region(outline: &[Polygon], count: usize, w: f64) -> Vec<Polygon> {
    if count == 0 {
        return outline.to_vec();
    }
    offset_polygons(outline, -(count as f64) * w)
}

/// Successive inward offsets, the first at `0.5 * w` and then every `w`.
pub fn concentric_fill(region: &[Polygon], w: f64) -> Vec<ToolPath> {
    concentric_loops(region, w).0
}

/// Concentric loops plus the inset distance of the last non-empty loop.
pub fn concentric_loops(region: &[Polygon], w: f64) -> (Vec<ToolPath>, Option<f64>) {
    let mut out = Vec::new();
    let mut d = 0.5 * w;
    let mut last = None;
    loop {
        let inset = offset_polygons(region, -d);
        if inset.is_empty() {
            break;
        }
        out.extend(rings_as_paths(&inset, PathRole::Infill));
        last = Some(d);
        d += w;
    }
    if last.is_none() {
        log::warn!("region is thinner than one bead width; no concentric loops");
    }
    (out, last)
}

/// Closed paths tracing the area left uncovered inside the last concentric loop.
pub fn fill_gaps(region: &[Polygon], last_inset: f64, w: f64) -> Vec<ToolPath> {
    let rest = offset_polygons(region, -(last_inset + 0.5 * w));
    rest.iter()
        .filter(|p| p.area() > 1e-4 * w * w)
        .map(|p| ToolPath::new(p.outer.clone(), PathRole::Infill, true))
        .collect()
}

// ---------------------------------------------------------------------------
// Rectilinear infill
// ---------------------------------------------------------------------------

/// Chords of the horizontal line `y` inside the rings (even-odd).
fn scan_chords(rings: &[Vec<Point2>], y: f64) -> Vec<(f64, f64)> {
    let mut xs = Vec::new();
    for ring in rings {
        let n = ring.len();
        for k in 0..n {
            let (a, b) = (ring[k], ring[(k + 1) % n]);
            if (a.y > y) != (b.y > y) {
                xs.push(a.x + (y - a.y) / (b.y - a.y) * (b.x - a.x));
            }
        }
    }
    xs.sort_by(|a, b| a.total_cmp(b));
    xs.chunks_exact(2).map(|c| (c[0], c[1])).filter(|c| c.1 - c.0 > 1e-9).collect()
}

fn inside_rings(rings: &[Vec<Point2>], p: Point2) -> bool {
    rings.iter().filter(|r| crate::geom::point_in_ring(p, r)).count() % 2 == 1
        || rings.iter().any(|r| crate::geom::ring_distance(p, r) < 1e-6)
}

/// Parallel hatch lines `spacing` apart at `angle_deg`, the first half a
/// spacing in from the region's extent. Consecutive chords are joined into
/// serpentines when the connector stays inside the region. `trim` shortens
/// each chord at both ends.
pub fn hatch(region: &[Polygon], spacing: f64, angle_deg: f64, trim: f64, role: PathRole) -> Vec<ToolPath> {
    if region.is_empty() || !(spacing > 0.0) {
        return Vec::new();
    }
    let theta = angle_deg.to_radians();
    let rings: Vec<Vec<Point2>> = region.iter().flat_map(|p| p.rings().map(|r| r.iter().map(|q| q.rotate(-theta)).collect::<Vec<_>>()).collect::<Vec<_>>()).collect();
    let bb = BBox2::of_points(rings.iter().flatten());
    let mut chains: Vec<Vec<Point2>> = Vec::new();
    // Chains that ended on the previous scanline: (chain index, end point).
    let mut open: Vec<usize> = Vec::new();
    let mut k = 0usize;
    loop {
        let y = bb.min.y + spacing * (k as f64 + 0.5);
        if y >= bb.max.y {
            break;
        }
        let mut chords: Vec<(Point2, Point2)> = scan_chords(&rings, y)
            .into_iter()
            .filter(|c| c.1 - c.0 > 2.0 * trim + 1e-9)
            .map(|(x0, x1)| (Point2::new(x0 + trim, y), Point2::new(x1 - trim, y)))
            .collect();
        if k % 2 == 1 {
            chords.reverse();
            for c in &mut chords {
                *c = (c.1, c.0);
            }
        }
        let mut next_open = Vec::new();
        let mut used = vec![false; open.len()];
        for (a, b) in chords {
            let mut joined = None;
            for (slot, &ci) in open.iter().enumerate() {
                if used[slot] {
                    continue;
                }
                let end = *chains[ci].last().expect("non-empty chain");
                let ok = end.dist(a) <= 3.0 * spacing
                    && [0.25, 0.5, 0.75].iter().all(|&t| inside_rings(&rings, end.lerp(a, t)));
                if ok {
                    joined = Some((slot, ci));
                    break;
                }
            }
            let ci = match joined {
                Some((slot, ci)) => {
                    used[slot] = true;
                    chains[ci].push(a);
                    ci
                }
                None => {
                    chains.push(vec![a]);
                    chains.len() - 1
                }
            };
            chains[ci].push(b);
            next_open.push(ci);
        }
        open = next_open;
        k += 1;
    }
    chains
        .into_iter()
        .filter(|c| c.len() >= 2)
        .map(|c| ToolPath::new(c.into_iter().map(|p| p.rotate(theta)).collect(), role, false))
        .collect()
}

pub fn rectilinear_infill(region: &[Polygon], spacing: f64, angle_deg: f64) -> Vec<ToolPath> {
    hatch(region, spacing, angle_deg, 0.0, PathRole::Infill)
}

// ---------------------------------------------------------------------------
// Clipping against faces
// ---------------------------------------------------------------------------

#[derive(Debug, Error, PartialEq)]
pub enum ClipError {
    #[error("path segment midpoint ({x}, {y}) lies in no face")]
    UncoveredSegment { x: f64, y: f64 },
}

/// A piece of a toolpath carrying the color of the face it lies in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledPath {
    pub path: ToolPath,
    pub color: usize,
    pub band: Option<usize>,
    pub face: usize,
    /// Index of the originating path.
    pub source: usize,
}

struct EdgeRef {
    a: Point2,
    b: Point2,
    face: usize,
}

/// Point location over a set of interior-disjoint faces using horizontal bands.
pub struct FaceLocator {
    edges: Vec<EdgeRef>,
    bands: Vec<Vec<u32>>,
    y0: f64,
    band_h: f64,
    face_count: usize,
}

impl FaceLocator {
    pub fn new(faces: &[&Polygon]) -> Self {
        let mut edges = Vec::new();
        for (f, poly) in faces.iter().enumerate() {
            for ring in poly.rings() {
                for k in 0..ring.len() {
                    edges.push(EdgeRef { a: ring[k], b: ring[(k + 1) % ring.len()], face: f });
                }
            }
        }
        let bb = BBox2::of_points(edges.iter().flat_map(|e| [&e.a, &e.b]));
        let nb = ((edges.len() as f64).sqrt().ceil() as usize).clamp(1, 4096);
        let band_h = if bb.is_empty() { 1.0 } else { (bb.height() / nb as f64).max(1e-9) };
        let y0 = if bb.is_empty() { 0.0 } else { bb.min.y };
        let mut bands = vec![Vec::new(); nb];
        let idx = |y: f64| (((y - y0) / band_h).floor().max(0.0) as usize).min(nb - 1);
        for (i, e) in edges.iter().enumerate() {
            let (lo, hi) = (e.a.y.min(e.b.y), e.a.y.max(e.b.y));
            for b in idx(lo)..=idx(hi) {
                bands[b].push(i as u32);
            }
        }
        Self { edges, bands, y0, band_h, face_count: faces.len() }
    }

    /// Index of the face containing `p`, if any.
    pub fn locate(&self, p: Point2) -> Option<usize> {
        if self.edges.is_empty() {
            return None;
        }
        let nb = self.bands.len();
        let b = ((p.y - self.y0) / self.band_h).floor();
        if b < 0.0 || b >= nb as f64 + 1.0 {
            return None;
        }
        let b = (b as usize).min(nb - 1);
        let mut parity: HashMap<usize, bool> = HashMap::new();
        for &i in &self.bands[b] {
            let e = &self.edges[i as usize];
            if (e.a.y > p.y) != (e.b.y > p.y) {
                let x = e.a.x + (p.y - e.a.y) / (e.b.y - e.a.y) * (e.b.x - e.a.x);
                if p.x < x {
                    *parity.entry(e.face).or_default() ^= true;
                }
            }
        }
        parity.into_iter().filter(|(_, odd)| *odd).map(|(f, _)| f).min()
    }

    /// Face whose boundary is within `tol` of `p`.
    pub fn nearest_within(&self, p: Point2, tol: f64) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for e in &self.edges {
            let d = point_segment_distance(p, e.a, e.b);
            if d <= tol && best.is_none_or(|(_, bd)| d < bd) {
                best = Some((e.face, d));
            }
        }
        best.map(|(f, _)| f)
    }

    pub fn face_count(&self) -> usize {
        self.face_count
    }
}

/// Uniform grid over face edges for crossing queries.
struct EdgeGrid {
    cell: f64,
    cells: HashMap<(i64, i64), Vec<u32>>,
    edges: Vec<(Point2, Point2)>,
}

impl EdgeGrid {
    fn new(faces: &[&Polygon]) -> Self {
        let mut edges = Vec::new();
        for poly in faces {
            for ring in poly.rings() {
                for k in 0..ring.len() {
                    edges.push((ring[k], ring[(k + 1) % ring.len()]));
                }
            }
        }
        let total: f64 = edges.iter().map(|(a, b)| a.dist(*b)).sum();
        let cell = if edges.is_empty() { 1.0 } else { (2.0 * total / edges.len() as f64).max(0.05) };
        let mut cells: HashMap<(i64, i64), Vec<u32>> = HashMap::new();
        for (i, (a, b)) in edges.iter().enumerate() {
            let bb = BBox2::of_points(&[*a, *b]);
            for gx in (bb.min.x / cell).floor() as i64..=(bb.max.x / cell).floor() as i64 {
                for gy in (bb.min.y / cell).floor() as i64..=(bb.max.y / cell).floor() as i64 {
                    cells.entry((gx, gy)).or_default().push(i as u32);
                }
            }
        }
        Self { cell, cells, edges }
    }

    /// Parameters in `(0, 1)` where segment `p0-p1` crosses a face edge.
    fn crossings(&self, p0: Point2, p1: Point2, seen: &mut [usize], stamp: usize) -> Vec<f64> {
        let bb = BBox2::of_points(&[p0, p1]);
        let mut ts = Vec::new();
        for gx in (bb.min.x / self.cell).floor() as i64..=(bb.max.x / self.cell).floor() as i64 {
            for gy in (bb.min.y / self.cell).floor() as i64..=(bb.max.y / self.cell).floor() as i64 {
                let Some(ids) = self.cells.get(&(gx, gy)) else { continue };
                for &i in ids {
                    let i = i as usize;
                    if seen[i] == stamp {
                        continue;
                    }
                    seen[i] = stamp;
                    let (a, b) = self.edges[i];
                    if let Some((t, _)) = crate::geom::segment_intersection(p0, p1, a, b) {
                        if t > 1e-12 && t < 1.0 - 1e-12 {
                            ts.push(t);
                        }
                    }
                }
            }
        }
        ts.sort_by(|a, b| a.total_cmp(b));
        ts.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        ts
    }
}

/// Splits paths where they cross face boundaries and labels every piece with
/// the face containing its midpoint. Pieces keep the original path order.
pub fn clip_paths_to_faces(paths: &[ToolPath], faces: &[ColoredFace], min_segment_length: f64) -> Result<Vec<LabeledPath>, ClipError> {
    let polys: Vec<&Polygon> = faces.iter().map(|f| &f.polygon).collect();
    let locator = FaceLocator::new(&polys);
    let grid = EdgeGrid::new(&polys);
    let mut seen = vec![usize::MAX; grid.edges.len()];
    let mut stamp = 0usize;
    let mut out = Vec::new();
    let mut short = 0usize;
    let locate = |p: Point2| -> Result<usize, ClipError> {
        locator
            .locate(p)
            .or_else(|| locator.nearest_within(p, 1e-6))
            .ok_or(ClipError::UncoveredSegment { x: p.x, y: p.y })
    };
    for (src, path) in paths.iter().enumerate() {
        let pts = path.polyline();
        // Pieces as (face, points).
        let mut pieces: Vec<(usize, Vec<Point2>)> = Vec::new();
        for w in pts.windows(2) {
            let (a, b) = (w[0], w[1]);
            if a.dist(b) < 1e-12 {
                continue;
            }
            stamp += 1;
            let mut ts = vec![0.0];
            ts.extend(grid.crossings(a, b, &mut seen, stamp));
            ts.push(1.0);
            for t in ts.windows(2) {
                let (p, q) = (a.lerp(b, t[0]), a.lerp(b, t[1]));
                if p.dist(q) < 1e-9 {
                    continue;
                }
                let face = locate(p.lerp(q, 0.5))?;
                match pieces.last_mut() {
                    Some((f, v)) if *f == face && v.last().is_some_and(|l| l.dist(p) < 1e-9) => v.push(q),
                    _ => pieces.push((face, vec![p, q])),
                }
            }
        }
        if pieces.is_empty() {
            continue;
        }
        let whole_closed = path.closed && pieces.len() == 1;
        if path.closed && pieces.len() > 1 && pieces[0].0 == pieces[pieces.len() - 1].0 {
            let (_, first) = pieces.remove(0);
            let last = pieces.last_mut().expect("at least one piece");
            last.1.extend(first.into_iter().skip(1));
            // Rotate so the merged piece keeps its place at the start of the loop.
            let merged = pieces.pop().expect("merged piece");
            pieces.insert(0, merged);
        }
        for (face, mut v) in pieces {
            if whole_closed {
                v.pop();
            }
            let tp = ToolPath::new(v, path.role, whole_closed);
            if tp.length() < min_segment_length {
                short += 1;
            }
            out.push(LabeledPath { color: faces[face].color, band: faces[face].band, face, source: src, path: tp });
        }
    }
    if short > 0 {
        log::debug!("{short} clipped segment(s) shorter than {min_segment_length} mm");
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::total_area;
    use proptest::prelude::*;

    fn p(x: f64, y: f64) -> Point2 {
        Point2::new(x, y)
    }

    fn sq(x0: f64, y0: f64, x1: f64, y1: f64) -> Polygon {
        Polygon::rect(p(x0, y0), p(x1, y1))
    }

    fn face(poly: Polygon, color: usize) -> ColoredFace {
        let rep = crate::arrangement::representative_point(&poly);
        ColoredFace { polygon: poly, color, rep, band: None }
    }

    #[test]
    fn single_perimeter_of_square() {
        let per = generate_perimeters(&[sq(0.0, 0.0, 10.0, 10.0)], 1, 0.4);
        assert_eq!(per.len(), 1);
        let bb = BBox2::of_points(&per[0].points);
        assert!((bb.min.x - 0.2).abs() < 1e-6 && (bb.max.x - 9.8).abs() < 1e-6);
        assert!((bb.min.y - 0.2).abs() < 1e-6 && (bb.max.y - 9.8).abs() < 1e-6);
        assert!(per[0].closed);
    }

    #[test]
    fn perimeters_vanish() {
        let per = generate_perimeters(&[sq(0.0, 0.0, 10.0, 10.0)], 20, 0.4);
        assert_eq!(per.len(), 12);
        assert!(generate_perimeters(&[Polygon::default()], 3, 0.4).is_empty());
    }

    #[test]
    fn hatch_count_and_direction() {
        let lines = rectilinear_infill(&[sq(0.0, 0.0, 10.0, 10.0)], 0.4, 0.0);
        // All 25 chords join into one serpentine.
        assert_eq!(lines.len(), 1);
        assert_eq!(lines[0].points.len(), 50);
        let v = rectilinear_infill(&[sq(0.0, 0.0, 4.0, 10.0)], 0.4, 90.0);
        let pts = &v[0].points;
        assert!((pts[0].x - pts[1].x).abs() < 1e-9, "{pts:?}");
        assert!(rectilinear_infill(&[sq(0.0, 0.0, 10.0, 0.3)], 0.4, 0.0).len() <= 1);
    }

    #[test]
    fn hatch_skips_connectors_across_holes() {
        let mut hole = sq(3.0, 3.0, 7.0, 7.0).outer;
        hole.reverse();
        let ring = Polygon::new(sq(0.0, 0.0, 10.0, 10.0).outer, vec![hole]);
        let paths = rectilinear_infill(std::slice::from_ref(&ring), 0.4, 0.0);
        for path in &paths {
            for w in path.points.windows(2) {
                let m = w[0].lerp(w[1], 0.5);
                assert!(ring.contains(m) || ring.boundary_distance(m) < 1e-6);
            }
        }
        let chords: usize = paths.iter().map(|t| t.points.len() / 2).sum();
        assert_eq!(chords, 25 + 10);
    }

    #[test]
    fn concentric_disk() {
        let disk = Polygon::circle(p(0.0, 0.0), 2.0, 256);
        let loops = concentric_fill(&[disk], 0.4);
        assert_eq!(loops.len(), 5);
        let radii: Vec<f64> = loops.iter().map(|l| l.points.iter().map(|q| q.norm()).fold(0.0, f64::max)).collect();
        for (r, e) in radii.iter().zip([1.8, 1.4, 1.0, 0.6, 0.2]) {
            assert!((r - e).abs() < 0.01, "{radii:?}");
        }
        assert!(concentric_fill(&[sq(0.0, 0.0, 5.0, 0.3)], 0.4).is_empty());
    }

    #[test]
    fn concentric_annulus_meets_mid_wall() {
        let mut inner = Polygon::circle(p(0.0, 0.0), 2.0, 256).outer;
        inner.reverse();
        let ann = Polygon::new(Polygon::circle(p(0.0, 0.0), 4.0, 256).outer, vec![inner]);
        let loops = concentric_fill(&[ann], 0.4);
        // Wall of 2 mm: offsets 0.2, 0.6 from each side meet; 0.2..1.0 gives 3 pairs.
        let rs: Vec<f64> = loops.iter().map(|l| l.points[0].norm()).collect();
        assert!(rs.iter().all(|&r| r > 2.0 && r < 4.0));
        assert!(rs.iter().any(|&r| (r - 3.0).abs() < 0.25), "{rs:?}");
    }

    #[test]
    fn clip_straight_path() {
        let faces = vec![face(sq(0.0, 0.0, 5.0, 2.0), 0), face(sq(5.0, 0.0, 10.0, 2.0), 1)];
        let path = ToolPath::new(vec![p(0.0, 1.0), p(10.0, 1.0)], PathRole::Infill, false);
        let out = clip_paths_to_faces(&[path], &faces, 5.0).unwrap();
        assert_eq!(out.len(), 2);
        assert!((out[0].path.length() - 5.0).abs() < 1e-12 && out[0].color == 0);
        assert!((out[1].path.length() - 5.0).abs() < 1e-12 && out[1].color == 1);
        let inner = ToolPath::new(vec![p(1.0, 1.0), p(4.0, 1.0)], PathRole::Infill, false);
        let out = clip_paths_to_faces(std::slice::from_ref(&inner), &faces, 5.0).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].path, inner);
        let outside = ToolPath::new(vec![p(20.0, 1.0), p(24.0, 1.0)], PathRole::Infill, false);
        assert!(matches!(clip_paths_to_faces(&[outside], &faces, 5.0), Err(ClipError::UncoveredSegment { .. })));
    }

    #[test]
    fn clip_loop_on_quadrants() {
        let r = 5.0;
        let faces: Vec<ColoredFace> = (0..4)
            .map(|q| {
                let (sx, sy) = ([1.0, -1.0, -1.0, 1.0][q], [1.0, 1.0, -1.0, -1.0][q]);
                face(sq(0.0f64.min(sx * 6.0), 0.0f64.min(sy * 6.0), 0.0f64.max(sx * 6.0), 0.0f64.max(sy * 6.0)), q)
            })
            .collect();
        let circle = Polygon::circle(p(0.3, 0.2), r, 100);
        let path = ToolPath::new(circle.outer.clone(), PathRole::Perimeter, true);
        let out = clip_paths_to_faces(&[path.clone()], &faces, 5.0).unwrap();
        assert_eq!(out.len(), 4);
        let mut colors: Vec<usize> = out.iter().map(|o| o.color).collect();
        colors.sort_unstable();
        assert_eq!(colors, vec![0, 1, 2, 3]);
        let total: f64 = out.iter().map(|o| o.path.length()).sum();
        assert!((total - path.length()).abs() < 1e-9 * path.length());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn clipping_conserves_length_and_labels_faces(
            cuts in prop::collection::vec(0.5f64..9.5, 0..5),
            angle in 0.0f64..180.0,
        ) {
            let mut xs = cuts.clone();
            xs.push(0.0);
            xs.push(10.0);
            xs.sort_by(|a, b| a.total_cmp(b));
            xs.dedup_by(|a, b| (*a - *b).abs() < 0.05);
            let faces: Vec<ColoredFace> = xs.windows(2).enumerate().map(|(i, w)| face(sq(w[0], 0.0, w[1], 10.0), i)).collect();
            let region = [sq(0.0, 0.0, 10.0, 10.0)];
            let mut paths = rectilinear_infill(&region, 0.4, angle);
            paths.extend(generate_perimeters(&region, 2, 0.4));
            let input: f64 = paths.iter().map(|t| t.length()).sum();
            let out = clip_paths_to_faces(&paths, &faces, 5.0).unwrap();
            let clipped: f64 = out.iter().map(|o| o.path.length()).sum();
            prop_assert!((input - clipped).abs() <= 1e-6 * input);
            for o in &out {
                for w in o.path.polyline().windows(2) {
                    let m = w[0].lerp(w[1], 0.5);
                    let f = &faces[o.face].polygon;
                    prop_assert!(f.contains(m) || f.boundary_distance(m) < 1e-6);
                }
            }
        }

        #[test]
        fn dense_hatch_approximates_area(w in 3.0f64..20.0, h in 3.0f64..20.0, angle in 0.0f64..90.0) {
            let region = [sq(0.0, 0.0, w, h)];
            let paths = rectilinear_infill(&region, 0.4, angle);
            let mut chord_len = 0.0;
            for t in &paths {
                for (k, s) in t.points.windows(2).enumerate() {
                    if k % 2 == 0 {
                        chord_len += s[0].dist(s[1]);
                    }
                }
            }
            let area = total_area(&region);
            prop_assert!((chord_len * 0.4 - area).abs() / area < 0.02 + 0.8 / w.min(h), "{} vs {}", chord_len * 0.4, area);
        }
    }
}
