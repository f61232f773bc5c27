//! Planar arrangement of geometry outlines and material iso-lines.
//!
//! Segments are split at every mutual intersection, endpoints are snapped,
//! dangling chains are pruned and the remaining graph is turned into a
//! half-edge structure whose bounded faces become printable regions.

use std::collections::HashMap;

use thiserror::Error;

use crate::contour::Contour;
use crate::design::{Design, DesignError};
use crate::geom::{signed_area, BBox2, Point2, Polygon};
use crate::palette::{Palette, ZipperSpec};

pub const SNAP_TOL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum ArrangementError {
    #[error("numerical degeneracy near ({x}, {y}): {msg}")]
    NumericalDegeneracy { x: f64, y: f64, msg: String },
    #[error(transparent)]
    Design(#[from] DesignError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HalfEdge {
    pub origin: usize,
    pub twin: usize,
    pub next: usize,
    pub face: usize,
}

/// A face of the subdivision. Face 0 is the unbounded face and has no outer cycle.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DcelFace {
    pub outer: Option<usize>,
    pub holes: Vec<usize>,
}

#[derive(Debug, Clone, Default)]
pub struct Arrangement {
    pub vertices: Vec<Point2>,
    pub half_edges: Vec<HalfEdge>,
    pub faces: Vec<DcelFace>,
}

/// A bounded face extracted from an arrangement.
#[derive(Debug, Clone, PartialEq)]
pub struct Face {
    pub polygon: Polygon,
    pub rep: Point2,
    pub area: f64,
    /// Index into [`Arrangement::faces`].
    pub dcel_face: usize,
}

/// A face labelled with a palette color.
#[derive(Debug, Clone, PartialEq)]
pub struct ColoredFace {
    pub polygon: Polygon,
    pub color: usize,
    pub rep: Point2,
    /// Zipper band `k` (between colors `k` and `k + 1`) when the face lies in an overlap band.
    pub band: Option<usize>,
}

// ---------------------------------------------------------------------------
// Vertex snapping
// ---------------------------------------------------------------------------

struct Snapper {
    tol: f64,
    buckets: HashMap<(i64, i64), Vec<usize>>,
    points: Vec<Point2>,
}

impl Snapper {
    fn new(tol: f64) -> Self {
        Self { tol, buckets: HashMap::new(), points: Vec::new() }
    }

    fn id(&mut self, p: Point2) -> usize {
        let key = ((p.x / self.tol).floor() as i64, (p.y / self.tol).floor() as i64);
        let mut best: Option<(usize, f64)> = None;
        for dx in -1..=1 {
            for dy in -1..=1 {
                if let Some(ids) = self.buckets.get(&(key.0 + dx, key.1 + dy)) {
                    for &id in ids {
                        let d = self.points[id].dist(p);
                        if d <= self.tol && best.is_none_or(|(_, bd)| d < bd) {
                            best = Some((id, d));
                        }
                    }
                }
            }
        }
        if let Some((id, _)) = best {
            return id;
        }
        let id = self.points.len();
        self.points.push(p);
        self.buckets.entry(key).or_default().push(id);
        id
    }
}

// ---------------------------------------------------------------------------
// Segment intersection
// ---------------------------------------------------------------------------

/// Splits every segment at its intersections with all others, returning the
/// point sequence along each segment (endpoints included).
fn split_segments(segs: &[(Point2, Point2)], tol: f64) -> Vec<Vec<(f64, Point2)>> {
    let n = segs.len();
    let mut splits: Vec<Vec<(f64, Point2)>> = segs.iter().map(|&(a, b)| vec![(0.0, a), (1.0, b)]).collect();
    if n == 0 {
        return splits;
    }
    let total: f64 = segs.iter().map(|(a, b)| a.dist(*b)).sum();
    let cell = (2.0 * total / n as f64).max(1e-3);
    let key = |v: f64| (v / cell).floor() as i64;
    let mut grid: HashMap<(i64, i64), Vec<u32>> = HashMap::new();
    let boxes: Vec<BBox2> = segs.iter().map(|&(a, b)| BBox2::of_points(&[a, b]).inflate(tol)).collect();
    for (i, b) in boxes.iter().enumerate() {
        for gx in key(b.min.x)..=key(b.max.x) {
            for gy in key(b.min.y)..=key(b.max.y) {
                grid.entry((gx, gy)).or_default().push(i as u32);
            }
        }
    }
    let mut seen = vec![usize::MAX; n];
    for i in 0..n {
        let b = boxes[i];
        let (p0, p1) = segs[i];
        for gx in key(b.min.x)..=key(b.max.x) {
            for gy in key(b.min.y)..=key(b.max.y) {
                let Some(cands) = grid.get(&(gx, gy)) else { continue };
                for &j in cands {
                    let j = j as usize;
                    if j <= i || seen[j] == i || !b.overlaps(&boxes[j]) {
                        continue;
                    }
                    seen[j] = i;
                    let (q0, q1) = segs[j];
                    for (t, u, p) in intersect(p0, p1, q0, q1, tol) {
                        splits[i].push((t, p));
                        splits[j].push((u, p));
                    }
                }
            }
        }
    }
    for s in &mut splits {
        s.sort_by(|a, b| a.0.total_cmp(&b.0));
    }
    splits
}

/// Intersection parameters of two segments, including touching endpoints and
/// collinear overlaps.
fn intersect(p0: Point2, p1: Point2, q0: Point2, q1: Point2, tol: f64) -> Vec<(f64, f64, Point2)> {
    let r = p1 - p0;
    let s = q1 - q0;
    let (lr, ls) = (r.norm(), s.norm());
    if lr == 0.0 || ls == 0.0 {
        return Vec::new();
    }
    let denom = r.cross(s);
    let qp = q0 - p0;
    let param = |pt: Point2, a: Point2, d: Point2, l: f64| ((pt - a).dot(d) / (l * l)).clamp(0.0, 1.0);
    if denom.abs() > 1e-12 * lr * ls {
        let t = qp.cross(s) / denom;
        let u = qp.cross(r) / denom;
        let (et, eu) = (tol / lr, tol / ls);
        if t < -et || t > 1.0 + et || u < -eu || u > 1.0 + eu {
            return Vec::new();
        }
        let (t, u) = (t.clamp(0.0, 1.0), u.clamp(0.0, 1.0));
        // Prefer an existing endpoint when the crossing sits on one.
        let p = if t == 0.0 {
            p0
        } else if t == 1.0 {
            p1
        } else if u == 0.0 {
            q0
        } else if u == 1.0 {
            q1
        } else {
            p0 + r * t
        };
        return vec![(param(p, p0, r, lr), param(p, q0, s, ls), p)];
    }
    // Parallel: only collinear overlaps matter.
    if qp.cross(r).abs() / lr > tol {
        return Vec::new();
    }
    let mut out = Vec::new();
    for &p in &[q0, q1] {
        let t = (p - p0).dot(r) / (lr * lr);
        if t > -tol / lr && t < 1.0 + tol / lr {
            out.push((t.clamp(0.0, 1.0), param(p, q0, s, ls), p));
        }
    }
    for &p in &[p0, p1] {
        let u = (p - q0).dot(s) / (ls * ls);
        if u > -tol / ls && u < 1.0 + tol / ls {
            out.push((param(p, p0, r, lr), u.clamp(0.0, 1.0), p));
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Construction
// ---------------------------------------------------------------------------

/// Builds the arrangement of all closed rings and open polylines from both inputs.
pub fn build_arrangement(polygons: &Contour, polylines: &Contour, snap_tol: f64) -> Result<Arrangement, ArrangementError> {
    let tol = if snap_tol > 0.0 { snap_tol } else { SNAP_TOL };
    let mut segs: Vec<(Point2, Point2)> = Vec::new();
    for c in [polygons, polylines] {
        for ring in &c.polygons {
            for k in 0..ring.len() {
                segs.push((ring[k], ring[(k + 1) % ring.len()]));
            }
        }
        for line in &c.polylines {
            segs.extend(line.windows(2).map(|w| (w[0], w[1])));
        }
    }
    if let Some(&(a, _)) = segs.iter().find(|(a, b)| !(a.x.is_finite() && a.y.is_finite() && b.x.is_finite() && b.y.is_finite())) {
        return Err(ArrangementError::NumericalDegeneracy { x: a.x, y: a.y, msg: "non-finite input coordinate".into() });
    }
    segs.retain(|(a, b)| a.dist(*b) >= tol);
    let splits = split_segments(&segs, tol);
    let mut snap = Snapper::new(tol);
    let mut edges: Vec<(usize, usize)> = Vec::new();
    for pts in &splits {
        let mut prev: Option<usize> = None;
        for &(_, p) in pts {
            let id = snap.id(p);
            if let Some(pr) = prev {
                if pr != id {
                    edges.push((pr.min(id), pr.max(id)));
                }
            }
            prev = Some(id);
        }
    }
    edges.sort_unstable();
    edges.dedup();
    Arrangement::from_edges(snap.points, edges)
}

impl Arrangement {
    /// Builds the half-edge structure from non-crossing undirected edges.
    /// Dangling chains are pruned first.
    pub fn from_edges(points: Vec<Point2>, mut edges: Vec<(usize, usize)>) -> Result<Self, ArrangementError> {
        // Prune vertices of degree one until none remain.
        let mut degree = vec![0usize; points.len()];
        for &(a, b) in &edges {
            degree[a] += 1;
            degree[b] += 1;
        }
        let mut alive = vec![true; edges.len()];
        let mut incident: Vec<Vec<usize>> = vec![Vec::new(); points.len()];
        for (k, &(a, b)) in edges.iter().enumerate() {
            incident[a].push(k);
            incident[b].push(k);
        }
        let mut stack: Vec<usize> = (0..points.len()).filter(|&v| degree[v] == 1).collect();
        while let Some(v) = stack.pop() {
            if degree[v] != 1 {
                continue;
            }
            let Some(&k) = incident[v].iter().find(|&&k| alive[k]) else { continue };
            alive[k] = false;
            let (a, b) = edges[k];
            degree[a] -= 1;
            degree[b] -= 1;
            let other = if a == v { b } else { a };
            if degree[other] == 1 {
                stack.push(other);
            }
        }
        edges = edges.into_iter().zip(alive).filter(|(_, a)| *a).map(|(e, _)| e).collect();

        // Compact vertex numbering.
        let mut remap = vec![usize::MAX; points.len()];
        let mut vertices = Vec::new();
        for &(a, b) in &edges {
            for v in [a, b] {
                if remap[v] == usize::MAX {
                    remap[v] = vertices.len();
                    vertices.push(points[v]);
                }
            }
        }
        let edges: Vec<(usize, usize)> = edges.iter().map(|&(a, b)| (remap[a], remap[b])).collect();

        let mut half_edges: Vec<HalfEdge> = Vec::with_capacity(2 * edges.len());
        for &(a, b) in &edges {
            let h = half_edges.len();
            half_edges.push(HalfEdge { origin: a, twin: h + 1, next: usize::MAX, face: usize::MAX });
            half_edges.push(HalfEdge { origin: b, twin: h, next: usize::MAX, face: usize::MAX });
        }
        // Outgoing half-edges around each vertex, counter-clockwise.
        let mut out: Vec<Vec<usize>> = vec![Vec::new(); vertices.len()];
        for (h, he) in half_edges.iter().enumerate() {
            out[he.origin].push(h);
        }
        let mut pos = vec![0usize; half_edges.len()];
        for (v, list) in out.iter_mut().enumerate() {
            let o = vertices[v];
            let angle = |h: usize| {
                let d = vertices[half_edges[half_edges[h].twin].origin] - o;
                d.y.atan2(d.x)
            };
            list.sort_by(|&a, &b| angle(a).total_cmp(&angle(b)));
            for (i, &h) in list.iter().enumerate() {
                pos[h] = i;
            }
        }
        for h in 0..half_edges.len() {
            let t = half_edges[h].twin;
            let v = half_edges[t].origin;
            let list = &out[v];
            half_edges[h].next = list[(pos[t] + list.len() - 1) % list.len()];
        }

        // Trace cycles.
        let mut cycle_of = vec![usize::MAX; half_edges.len()];
        let mut cycles: Vec<(usize, f64)> = Vec::new();
        for start in 0..half_edges.len() {
            if cycle_of[start] != usize::MAX {
                continue;
            }
            let id = cycles.len();
            let mut ring = Vec::new();
            let mut h = start;
            loop {
                if cycle_of[h] != usize::MAX || ring.len() > half_edges.len() {
                    let p = vertices[half_edges[h].origin];
                    return Err(ArrangementError::NumericalDegeneracy { x: p.x, y: p.y, msg: "face cycle does not close".into() });
                }
                cycle_of[h] = id;
                ring.push(vertices[half_edges[h].origin]);
                h = half_edges[h].next;
                if h == start {
                    break;
                }
            }
            cycles.push((start, signed_area(&ring)));
        }

        // Connected components.
        let mut parent: Vec<usize> = (0..vertices.len()).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for &(a, b) in &edges {
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            if ra != rb {
                parent[ra.max(rb)] = ra.min(rb);
            }
        }
        let comp_of_cycle: Vec<usize> = cycles.iter().map(|&(h, _)| find(&mut parent, half_edges[h].origin)).collect();

        let mut faces = vec![DcelFace::default()];
        let mut face_of_cycle = vec![0usize; cycles.len()];
        let mut bounded: Vec<(usize, Vec<Point2>, BBox2, f64)> = Vec::new();
        for (c, &(h, area)) in cycles.iter().enumerate() {
            if area > 0.0 {
                face_of_cycle[c] = faces.len();
                faces.push(DcelFace { outer: Some(h), holes: Vec::new() });
                let ring = cycle_points(&vertices, &half_edges, h);
                let bb = BBox2::of_points(&ring);
                bounded.push((c, ring, bb, area));
            }
        }
        for (c, &(h, area)) in cycles.iter().enumerate() {
            if area > 0.0 {
                continue;
            }
            let probe = vertices[half_edges[h].origin];
            let container = bounded
                .iter()
                .filter(|(bc, ring, bb, _)| {
                    comp_of_cycle[*bc] != comp_of_cycle[c] && bb.contains(probe) && crate::geom::point_in_ring(probe, ring)
                })
                .min_by(|a, b| a.3.total_cmp(&b.3))
                .map(|(bc, ..)| face_of_cycle[*bc]);
            let f = container.unwrap_or(0);
            face_of_cycle[c] = f;
            faces[f].holes.push(h);
        }
        for h in 0..half_edges.len() {
            half_edges[h].face = face_of_cycle[cycle_of[h]];
        }
        Ok(Self { vertices, half_edges, faces })
    }

    pub fn edge_count(&self) -> usize {
        self.half_edges.len() / 2
    }

    pub fn bounded_face_count(&self) -> usize {
        self.faces.len() - 1
    }

    pub fn cycle(&self, start: usize) -> Vec<Point2> {
        cycle_points(&self.vertices, &self.half_edges, start)
    }

    /// `V - E + F` for every connected component, counting the component's
    /// own bounded faces plus the face surrounding it.
    pub fn euler_characteristics(&self) -> Vec<i64> {
        let mut parent: Vec<usize> = (0..self.vertices.len()).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for he in &self.half_edges {
            let (a, b) = (find(&mut parent, he.origin), find(&mut parent, self.half_edges[he.twin].origin));
            if a != b {
                parent[a.max(b)] = a.min(b);
            }
        }
        let mut stats: HashMap<usize, (i64, i64, i64)> = HashMap::new();
        for v in 0..self.vertices.len() {
            stats.entry(find(&mut parent, v)).or_default().0 += 1;
        }
        for he in self.half_edges.iter().step_by(2) {
            stats.entry(find(&mut parent, he.origin)).or_default().1 += 1;
        }
        for f in &self.faces[1..] {
            let h = f.outer.expect("bounded face has an outer cycle");
            stats.entry(find(&mut parent, self.half_edges[h].origin)).or_default().2 += 1;
        }
        let mut keys: Vec<usize> = stats.keys().copied().collect();
        keys.sort_unstable();
        keys.iter().map(|k| {
            let (v, e, f) = stats[k];
            v - e + f + 1
        }).collect()
    }
}

fn cycle_points(vertices: &[Point2], half_edges: &[HalfEdge], start: usize) -> Vec<Point2> {
    let mut ring = Vec::new();
    let mut h = start;
    loop {
        ring.push(vertices[half_edges[h].origin]);
        h = half_edges[h].next;
        if h == start {
            break;
        }
    }
    ring
}

// ---------------------------------------------------------------------------
// Faces
// ---------------------------------------------------------------------------

/// Deterministic interior point: centroid of the largest triangle of an
/// ear-clipping triangulation (holes bridged).
pub fn representative_point(poly: &Polygon) -> Point2 {
    let mut data: Vec<f64> = Vec::with_capacity(2 * poly.vertex_count());
    let mut hole_idx = Vec::new();
    let mut pts: Vec<Point2> = Vec::new();
    for (k, ring) in poly.rings().enumerate() {
        if k > 0 {
            hole_idx.push(pts.len());
        }
        for p in ring {
            data.push(p.x);
            data.push(p.y);
            pts.push(*p);
        }
    }
    if let Ok(tris) = earcutr::earcut(&data, &hole_idx, 2) {
        let best = tris
            .chunks_exact(3)
            .map(|t| (t, (pts[t[1]] - pts[t[0]]).cross(pts[t[2]] - pts[t[0]]).abs()))
            .max_by(|a, b| a.1.total_cmp(&b.1));
        if let Some((t, area)) = best {
            if area > 0.0 {
                return (pts[t[0]] + pts[t[1]] + pts[t[2]]) * (1.0 / 3.0);
            }
        }
    }
    scanline_point(poly)
}

/// Midpoint of the widest interior interval on the horizontal line through the bbox centre.
fn scanline_point(poly: &Polygon) -> Point2 {
    let bb = poly.bbox();
    let y = (bb.min.y + bb.max.y) / 2.0;
    let mut xs = Vec::new();
    for ring in poly.rings() {
        for k in 0..ring.len() {
            let (a, b) = (ring[k], ring[(k + 1) % ring.len()]);
            if (a.y > y) != (b.y > y) {
                xs.push(a.x + (y - a.y) / (b.y - a.y) * (b.x - a.x));
            }
        }
    }
    xs.sort_by(|a, b| a.total_cmp(b));
    xs.chunks_exact(2)
        .max_by(|a, b| (a[1] - a[0]).total_cmp(&(b[1] - b[0])))
        .map_or(bb.min.lerp(bb.max, 0.5), |c| Point2::new((c[0] + c[1]) / 2.0, y))
}

/// Bounded faces whose representative point satisfies `inside`.
pub fn extract_bounded_faces(arr: &Arrangement, inside: impl Fn(Point2) -> bool) -> Vec<Face> {
    (1..arr.faces.len())
        .filter_map(|f| {
            let face = &arr.faces[f];
            let outer = arr.cycle(face.outer.expect("bounded face"));
            let holes = face.holes.iter().map(|&h| arr.cycle(h)).collect();
            let polygon = Polygon { outer, holes };
            let rep = representative_point(&polygon);
            if !inside(rep) {
                return None;
            }
            let area = polygon.area();
            Some(Face { polygon, rep, area, dcel_face: f })
        })
        .collect()
}

/// Merges kept faces smaller than `min_area` into the kept neighbour sharing
/// the longest boundary, rebuilding the arrangement after each round.
/// Slivers without a kept neighbour are dropped.
pub fn merge_slivers(
    mut arr: Arrangement,
    inside: impl Fn(Point2) -> bool,
    min_area: f64,
) -> Result<(Arrangement, Vec<Face>), ArrangementError> {
    for _ in 0..16 {
        let faces = extract_bounded_faces(&arr, &inside);
        let kept: HashMap<usize, usize> = faces.iter().enumerate().map(|(i, f)| (f.dcel_face, i)).collect();
        let mut slivers: Vec<&Face> = faces.iter().filter(|f| f.area < min_area).collect();
        if slivers.is_empty() {
            return Ok((arr, faces));
        }
        slivers.sort_by(|a, b| a.area.total_cmp(&b.area).then(a.dcel_face.cmp(&b.dcel_face)));
        let mut group: Vec<usize> = (0..arr.faces.len()).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        let mut merged_any = false;
        for s in &slivers {
            let mut shared: HashMap<usize, f64> = HashMap::new();
            for (h, he) in arr.half_edges.iter().enumerate() {
                if he.face != s.dcel_face {
                    continue;
                }
                let other = arr.half_edges[he.twin].face;
                if other != s.dcel_face && kept.contains_key(&other) {
                    let len = arr.vertices[he.origin].dist(arr.vertices[arr.half_edges[arr.half_edges[h].next].origin]);
                    *shared.entry(other).or_default() += len;
                }
            }
            let best = shared.into_iter().max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)));
            if let Some((n, _)) = best {
                let (ra, rb) = (find(&mut group, s.dcel_face), find(&mut group, n));
                if ra != rb {
                    group[ra.max(rb)] = ra.min(rb);
                    merged_any = true;
                }
            }
        }
        if !merged_any {
            let faces = faces.into_iter().filter(|f| f.area >= min_area).collect();
            return Ok((arr, faces));
        }
        let mut edges = Vec::new();
        for he in arr.half_edges.iter().step_by(2) {
            let t = &arr.half_edges[he.twin];
            let (fa, fb) = (find(&mut group, he.face), find(&mut group, t.face));
            if fa != fb || (he.face == t.face && !kept.contains_key(&he.face)) {
                edges.push((he.origin.min(t.origin), he.origin.max(t.origin)));
            }
        }
        arr = Arrangement::from_edges(arr.vertices.clone(), edges)?;
    }
    let faces = extract_bounded_faces(&arr, &inside).into_iter().filter(|f| f.area >= min_area).collect();
    Ok((arr, faces))
}

/// Labels each face with the palette color (and zipper band) of the material
/// at its representative point.
pub fn classify_faces(
    faces: &[Face],
    design: &Design,
    palette: &Palette,
    zipper: &ZipperSpec,
    z: f64,
) -> Result<Vec<ColoredFace>, DesignError> {
    let mut spread = 0usize;
    let mut out = Vec::with_capacity(faces.len());
    for f in faces {
        let fr = design.eval_fractions(crate::geom::Point3::new(f.rep.x, f.rep.y, z))?;
        let color = palette.classify(&fr);
        let band = zipper.band_of(palette.gradient_coordinate(&fr));
        if palette.kind == crate::palette::PaletteKind::Line && palette.n > 1 {
            // Vertices sit on iso-lines, so allow half an interval either side.
            let a = palette.alpha();
            let (lo, hi) = (color as f64 * a - 0.5 * a, (color + 1) as f64 * a + 0.5 * a);
            for p in f.polygon.rings().flatten() {
                let g = palette.gradient_coordinate(&design.eval_fractions(crate::geom::Point3::new(p.x, p.y, z))?);
                if g < lo || g > hi {
                    spread += 1;
                    break;
                }
            }
        }
        out.push(ColoredFace { polygon: f.polygon.clone(), color, rep: f.rep, band });
    }
    if spread > 0 {
        log::warn!("{spread} face(s) at z={z:.3} span more than one palette interval; consider a finer resolution");
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::parse_design;
    use crate::geom::{point_in_ring, total_area};
    use crate::palette::build_palette;
    use proptest::prelude::*;

    fn p(x: f64, y: f64) -> Point2 {
        Point2::new(x, y)
    }

    fn square(c: Point2, h: f64) -> Vec<Point2> {
        vec![p(c.x - h, c.y - h), p(c.x + h, c.y - h), p(c.x + h, c.y + h), p(c.x - h, c.y + h)]
    }

    fn rings(r: Vec<Vec<Point2>>) -> Contour {
        Contour { polygons: r, polylines: Vec::new() }
    }

    fn lines(l: Vec<Vec<Point2>>) -> Contour {
        Contour { polygons: Vec::new(), polylines: l }
    }

    fn circle(r: f64, n: usize) -> Vec<Point2> {
        (0..n).map(|k| {
            let a = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
            p(r * a.cos(), r * a.sin())
        }).collect()
    }

    #[test]
    fn lone_square() {
        let arr = build_arrangement(&rings(vec![square(p(0.0, 0.0), 1.0)]), &Contour::default(), SNAP_TOL).unwrap();
        assert_eq!(arr.faces.len(), 2);
        assert_eq!(arr.euler_characteristics(), vec![2]);
    }

    #[test]
    fn square_cut_by_line() {
        let arr = build_arrangement(
            &rings(vec![square(p(0.0, 0.0), 1.0)]),
            &lines(vec![vec![p(0.0, -2.0), p(0.0, 2.0)]]),
            SNAP_TOL,
        )
        .unwrap();
        assert_eq!(arr.bounded_face_count(), 2);
        assert_eq!(arr.euler_characteristics(), vec![2]);
    }

    /// Polygon with one hole crossed by two polylines: four bounded faces.
    fn holed_fixture() -> (Contour, Contour) {
        let outer = square(p(0.0, 0.0), 10.0);
        let mut hole = square(p(0.0, 0.0), 3.0);
        hole.reverse();
        let geometry = rings(vec![outer, hole]);
        let material = lines(vec![vec![p(-12.0, 5.0), p(12.0, 6.0)], vec![p(-12.0, -5.0), p(12.0, -6.0)]]);
        (geometry, material)
    }

    #[test]
    fn holed_polygon_with_two_crossings() {
        let (g, m) = holed_fixture();
        let polys = g.to_polygons();
        let arr = build_arrangement(&g, &m, SNAP_TOL).unwrap();
        let faces = extract_bounded_faces(&arr, |q| polys.iter().any(|pl| pl.contains(q)));
        assert_eq!(faces.len(), 3);
        // Both lines crossing the hole as well splits the middle band in two.
        let m2 = lines(vec![vec![p(-12.0, 1.0), p(12.0, 1.0)], vec![p(-12.0, -1.0), p(12.0, -1.0)]]);
        let arr = build_arrangement(&g, &m2, SNAP_TOL).unwrap();
        let faces = extract_bounded_faces(&arr, |q| polys.iter().any(|pl| pl.contains(q)));
        assert_eq!(faces.len(), 4);
        let area: f64 = faces.iter().map(|f| f.area).sum();
        assert!((area - (400.0 - 36.0)).abs() < 1e-9);
        assert!(arr.euler_characteristics().iter().all(|&c| c == 2));
    }

    #[test]
    fn annulus_keeps_ring_only() {
        let mut inner = circle(2.0, 64);
        inner.reverse();
        let g = rings(vec![circle(5.0, 64), inner]);
        let polys = g.to_polygons();
        let arr = build_arrangement(&g, &Contour::default(), SNAP_TOL).unwrap();
        assert_eq!(arr.bounded_face_count(), 2);
        let faces = extract_bounded_faces(&arr, |q| polys.iter().any(|pl| pl.contains(q)));
        assert_eq!(faces.len(), 1);
        assert_eq!(faces[0].polygon.holes.len(), 1);
    }

    #[test]
    fn disk_with_two_diameters() {
        let g = rings(vec![circle(5.0, 90)]);
        let m = lines(vec![vec![p(-6.0, 0.0), p(6.0, 0.0)], vec![p(0.0, -6.0), p(0.0, 6.0)]]);
        let arr = build_arrangement(&g, &m, SNAP_TOL).unwrap();
        let polys = g.to_polygons();
        let faces = extract_bounded_faces(&arr, |q| polys.iter().any(|pl| pl.contains(q)));
        assert_eq!(faces.len(), 4);
        for f in &faces {
            assert!(point_in_ring(f.rep, &f.polygon.outer));
        }
    }

    #[test]
    fn nested_component_becomes_hole() {
        let g = rings(vec![square(p(0.0, 0.0), 10.0), square(p(0.0, 0.0), 2.0)]);
        let arr = build_arrangement(&g, &Contour::default(), SNAP_TOL).unwrap();
        assert_eq!(arr.bounded_face_count(), 2);
        let outer_face = arr.faces.iter().find(|f| !f.holes.is_empty() && f.outer.is_some()).unwrap();
        assert_eq!(outer_face.holes.len(), 1);
        assert_eq!(arr.euler_characteristics(), vec![2, 2]);
    }

    #[test]
    fn collinear_overlap_is_merged() {
        let g = rings(vec![square(p(0.0, 0.0), 1.0), vec![p(1.0, -0.5), p(3.0, -0.5), p(3.0, 0.5), p(1.0, 0.5)]]);
        let arr = build_arrangement(&g, &Contour::default(), SNAP_TOL).unwrap();
        assert_eq!(arr.bounded_face_count(), 2);
        assert_eq!(arr.euler_characteristics(), vec![2]);
    }

    #[test]
    fn sliver_merges_into_longest_neighbour() {
        let g = rings(vec![vec![p(0.0, 0.0), p(10.0, 0.0), p(10.0, 10.0), p(0.0, 10.0)]]);
        let m = lines(vec![vec![p(-1.0, 9.95), p(11.0, 9.95)], vec![p(5.0, -1.0), p(5.0, 11.0)]]);
        let arr = build_arrangement(&g, &m, SNAP_TOL).unwrap();
        let polys = g.to_polygons();
        let inside = |q: Point2| polys.iter().any(|pl| pl.contains(q));
        assert_eq!(extract_bounded_faces(&arr, inside).len(), 4);
        let (_, faces) = merge_slivers(arr, inside, 0.3).unwrap();
        assert_eq!(faces.len(), 2);
        assert!((faces.iter().map(|f| f.area).sum::<f64>() - 100.0).abs() < 1e-9);
    }

    #[test]
    fn linear_grade_classification() {
        let d = parse_design(r#"fgrade(["1-x","x"],["a","b"]){ translate([0.5,0.5,0]) { rectprism(1,1,1); } }"#).unwrap();
        let pal = build_palette(4, &d.materials()).unwrap();
        let g = rings(vec![square(p(0.5, 0.5), 0.5)]);
        let m = lines([0.25, 0.5, 0.75].iter().map(|&x| vec![p(x, -0.1), p(x, 1.1)]).collect());
        let arr = build_arrangement(&g, &m, SNAP_TOL).unwrap();
        let polys = g.to_polygons();
        let mut faces = extract_bounded_faces(&arr, |q| polys.iter().any(|pl| pl.contains(q)));
        faces.sort_by(|a, b| a.rep.x.total_cmp(&b.rep.x));
        let colored = classify_faces(&faces, &d, &pal, &ZipperSpec::disabled(), 0.5).unwrap();
        assert_eq!(colored.iter().map(|c| c.color).collect::<Vec<_>>(), vec![0, 1, 2, 3]);
        let again = classify_faces(&faces, &d, &pal, &ZipperSpec::disabled(), 0.5).unwrap();
        assert_eq!(colored, again);

        let uniform = parse_design(r#"fgrade(["1","0"],["a","b"]){ rectprism(2,2,1); }"#).unwrap();
        let c = classify_faces(&faces, &uniform, &pal, &ZipperSpec::disabled(), 0.5).unwrap();
        assert!(c.iter().all(|f| f.color == 0));
    }

    #[test]
    fn representative_point_in_concave_face() {
        let u = Polygon::new(vec![p(0.0, 0.0), p(3.0, 0.0), p(3.0, 3.0), p(2.0, 3.0), p(2.0, 1.0), p(1.0, 1.0), p(1.0, 3.0), p(0.0, 3.0)], vec![]);
        let r = representative_point(&u);
        assert!(u.contains(r));
        let mut hole = square(p(0.0, 0.0), 4.0);
        hole.reverse();
        let ring = Polygon::new(square(p(0.0, 0.0), 5.0), vec![hole]);
        assert!(ring.contains(representative_point(&ring)));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn random_lines_keep_area_and_euler(
            cuts in prop::collection::vec((-4.0f64..4.0, -4.0f64..4.0, 0.0f64..std::f64::consts::PI), 0..6),
            r in 2.0f64..5.0,
        ) {
            let g = rings(vec![circle(r, 48)]);
            let m = lines(cuts.iter().map(|&(cx, cy, a)| {
                let d = p(a.cos(), a.sin()) * 20.0;
                vec![p(cx, cy) - d, p(cx, cy) + d]
            }).collect());
            let arr = build_arrangement(&g, &m, SNAP_TOL).unwrap();
            prop_assert!(arr.euler_characteristics().iter().all(|&c| c == 2));
            for (h, he) in arr.half_edges.iter().enumerate() {
                prop_assert_eq!(arr.half_edges[he.twin].twin, h);
            }
            let polys = g.to_polygons();
            let faces = extract_bounded_faces(&arr, |q| polys.iter().any(|pl| pl.contains(q)));
            let area: f64 = faces.iter().map(|f| f.area).sum();
            prop_assert!((area - total_area(&polys)).abs() < 1e-6 * total_area(&polys));
            for f in &faces {
                prop_assert!(f.polygon.contains(f.rep));
            }
            // Interior-disjoint: no representative point lies in another face.
            for (i, a) in faces.iter().enumerate() {
                for (j, b) in faces.iter().enumerate() {
                    if i != j {
                        prop_assert!(!b.polygon.contains(a.rep));
                    }
                }
            }
        }
    }
}
