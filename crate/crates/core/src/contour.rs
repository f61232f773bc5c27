//! Scalar field sampling, marching squares, segment stitching and direct
//! plane slicing of triangle meshes.

use std::collections::HashMap;

use rayon::prelude::*;
use thiserror::Error;

use crate::geom::{rings_to_polygons, signed_area, BBox2, Point2, Polygon};
use crate::mesh::TriangleMesh;

pub const STITCH_TOL: f64 = 1e-6;

#[derive(Debug, Error, PartialEq)]
pub enum ContourError {
    #[error("invalid sampling resolution {resolution} for a {width} x {height} mm box")]
    Resolution { resolution: f64, width: f64, height: f64 },
    #[error("field is not finite at ({x}, {y})")]
    NonFinite { x: f64, y: f64 },
}

/// Regular grid of samples; `values[j * nx + i]` sits at `origin + (i, j) * cell`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarGrid {
    pub origin: Point2,
    pub cell: f64,
    pub nx: usize,
    pub ny: usize,
    pub values: Vec<f64>,
}

impl ScalarGrid {
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.nx + i]
    }

    pub fn point(&self, i: usize, j: usize) -> Point2 {
        Point2::new(self.origin.x + i as f64 * self.cell, self.origin.y + j as f64 * self.cell)
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Closed rings and open polylines produced by stitching.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Contour {
    pub polygons: Vec<Vec<Point2>>,
    pub polylines: Vec<Vec<Point2>>,
}

impl Contour {
    pub fn is_empty(&self) -> bool {
        self.polygons.is_empty() && self.polylines.is_empty()
    }

    /// Nests the closed rings into polygons with holes.
    pub fn to_polygons(&self) -> Vec<Polygon> {
        rings_to_polygons(self.polygons.clone())
    }

    pub fn extend(&mut self, other: Contour) {
        self.polygons.extend(other.polygons);
        self.polylines.extend(other.polylines);
    }
}

/// Samples `field(x, y)` on a grid covering `bbox` inclusively.
pub fn sample_grid<F>(field: F, bbox: BBox2, resolution: f64) -> Result<ScalarGrid, ContourError>
where
    F: Fn(f64, f64) -> f64 + Sync,
{
    let (width, height) = (bbox.width(), bbox.height());
    if !(resolution > 0.0) || resolution > width.max(height) || bbox.is_empty() {
        return Err(ContourError::Resolution { resolution, width, height });
    }
    let nx = (width / resolution - 1e-9).ceil() as usize + 1;
    let ny = (height / resolution - 1e-9).ceil() as usize + 1;
    let origin = bbox.min;
    let rows: Vec<Vec<f64>> = (0..ny)
        .into_par_iter()
        .map(|j| {
            let y = origin.y + j as f64 * resolution;
            (0..nx).map(|i| field(origin.x + i as f64 * resolution, y)).collect()
        })
        .collect();
    let values: Vec<f64> = rows.into_iter().flatten().collect();
    if let Some(k) = values.iter().position(|v| !v.is_finite()) {
        let (i, j) = (k % nx, k / nx);
        return Err(ContourError::NonFinite { x: origin.x + i as f64 * resolution, y: origin.y + j as f64 * resolution });
    }
    Ok(ScalarGrid { origin, cell: resolution, nx, ny, values })
}

/// Marching squares using the mean of the corners to resolve saddles.
pub fn marching_squares(grid: &ScalarGrid, iso: f64) -> Vec<[Point2; 2]> {
    march(grid, iso, &|_, _| None)
}

/// Marching squares that resolves saddle cells by sampling `field` at the cell centre.
pub fn marching_squares_exact<F>(grid: &ScalarGrid, iso: f64, field: &F) -> Vec<[Point2; 2]>
where
    F: Fn(f64, f64) -> f64 + Sync,
{
    march(grid, iso, &|x, y| Some(field(x, y)))
}

fn march(grid: &ScalarGrid, iso: f64, center: &(dyn Fn(f64, f64) -> Option<f64> + Sync)) -> Vec<[Point2; 2]> {
    if grid.nx < 2 || grid.ny < 2 {
        return Vec::new();
    }
    // Interpolate with the lexicographically smaller grid node first so that
    // neighbouring cells produce bit-identical crossing points.
    let cross = |a: (usize, usize), b: (usize, usize)| -> Point2 {
        let (a, b) = if (a.1, a.0) <= (b.1, b.0) { (a, b) } else { (b, a) };
        let (va, vb) = (grid.at(a.0, a.1), grid.at(b.0, b.1));
        let t = ((iso - va) / (vb - va)).clamp(0.0, 1.0);
        grid.point(a.0, a.1).lerp(grid.point(b.0, b.1), t)
    };
    (0..grid.ny - 1)
        .into_par_iter()
        .flat_map_iter(|j| {
            let mut out = Vec::new();
            for i in 0..grid.nx - 1 {
                // Corners counter-clockwise from bottom-left.
                let c = [(i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1)];
                let above: Vec<bool> = c.iter().map(|&(a, b)| grid.at(a, b) >= iso).collect();
                let case = above.iter().enumerate().fold(0u8, |acc, (k, &up)| acc | ((up as u8) << k));
                if case == 0 || case == 15 {
                    continue;
                }
                // Edge k joins corner k and corner k+1.
                let edge = |k: usize| cross(c[k], c[(k + 1) % 4]);
                let mut push = |e0: usize, e1: usize| out.push([edge(e0), edge(e1)]);
                match case {
                    5 | 10 => {
                        let mid = grid.point(i, j).lerp(grid.point(i + 1, j + 1), 0.5);
                        let cv = center(mid.x, mid.y)
                            .unwrap_or_else(|| c.iter().map(|&(a, b)| grid.at(a, b)).sum::<f64>() / 4.0);
                        let center_above = cv >= iso;
                        // Separate the corners that disagree with the centre.
                        if (case == 5) == center_above {
                            push(0, 1);
                            push(2, 3);
                        } else {
                            push(3, 0);
                            push(1, 2);
                        }
                    }
                    _ => {
                        let crossing: Vec<usize> = (0..4).filter(|&k| above[k] != above[(k + 1) % 4]).collect();
                        push(crossing[0], crossing[1]);
                    }
                }
            }
            out
        })
        .collect()
}

struct VertexIndex {
    tol: f64,
    buckets: HashMap<(i64, i64), Vec<usize>>,
    points: Vec<Point2>,
}

impl VertexIndex {
    fn new(tol: f64) -> Self {
        Self { tol, buckets: HashMap::new(), points: Vec::new() }
    }

    fn key(&self, p: Point2) -> (i64, i64) {
        ((p.x / self.tol).floor() as i64, (p.y / self.tol).floor() as i64)
    }

    fn insert(&mut self, p: Point2) -> usize {
        let (kx, ky) = self.key(p);
        for dx in -1..=1 {
            for dy in -1..=1 {
                if let Some(ids) = self.buckets.get(&(kx + dx, ky + dy)) {
                    for &id in ids {
                        if self.points[id].dist(p) <= self.tol {
                            return id;
                        }
                    }
                }
            }
        }
        let id = self.points.len();
        self.points.push(p);
        self.buckets.entry((kx, ky)).or_default().push(id);
        id
    }
}

/// Joins unordered segments into rings and polylines. Endpoints closer than
/// `tol` are merged.
pub fn stitch_segments(segments: &[[Point2; 2]], tol: f64) -> Contour {
    let tol = if tol > 0.0 { tol } else { STITCH_TOL };
    let mut index = VertexIndex::new(tol);
    let mut edges: Vec<(usize, usize)> = Vec::with_capacity(segments.len());
    let mut dropped = 0usize;
    for s in segments {
        if s[0].dist(s[1]) < tol {
            dropped += 1;
            continue;
        }
        let a = index.insert(s[0]);
        let b = index.insert(s[1]);
        if a != b {
            edges.push((a, b));
        } else {
            dropped += 1;
        }
    }
    if dropped > 0 {
        log::debug!("dropped {dropped} degenerate segment(s) shorter than {tol}");
    }
    let nv = index.points.len();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); nv];
    for (e, &(a, b)) in edges.iter().enumerate() {
        adj[a].push(e);
        adj[b].push(e);
    }
    let mut used = vec![false; edges.len()];
    let mut cursor = vec![0usize; nv];
    let mut walk = |start: usize, used: &mut Vec<bool>| -> Vec<usize> {
        let mut path = vec![start];
        let mut v = start;
        loop {
            let mut next = None;
            while cursor[v] < adj[v].len() {
                let e = adj[v][cursor[v]];
                cursor[v] += 1;
                if !used[e] {
                    next = Some(e);
                    break;
                }
            }
            let Some(e) = next else { break };
            used[e] = true;
            let (a, b) = edges[e];
            v = if a == v { b } else { a };
            path.push(v);
        }
        path
    };
    let mut out = Contour::default();
    // Open chains start at odd-degree vertices so that they are not split.
    let odd: Vec<usize> = (0..nv).filter(|&v| adj[v].len() % 2 == 1).collect();
    let emit = |path: Vec<usize>, out: &mut Contour| {
        if path.len() < 2 {
            return;
        }
        let closed = path.len() > 2 && path[0] == path[path.len() - 1];
        let mut pts: Vec<Point2> = path.iter().map(|&v| index.points[v]).collect();
        if closed {
            pts.pop();
            if pts.len() >= 3 && signed_area(&pts) != 0.0 {
                out.polygons.push(pts);
            }
        } else {
            out.polylines.push(pts);
        }
    };
    for &v in &odd {
        if adj[v].iter().any(|&e| !used[e]) {
            let p = walk(v, &mut used);
            emit(p, &mut out);
        }
    }
    for v in 0..nv {
        while adj[v].iter().any(|&e| !used[e]) {
            let p = walk(v, &mut used);
            emit(p, &mut out);
        }
    }
    out
}

/// Contours the zero level set of `field` (negative inside) over `bbox`,
/// which is first inflated by two cells.
pub fn contour_field<F>(field: F, bbox: BBox2, resolution: f64, iso: f64) -> Result<Contour, ContourError>
where
    F: Fn(f64, f64) -> f64 + Sync,
{
    let grid = sample_grid(&field, bbox.inflate(2.0 * resolution), resolution)?;
    let segs = marching_squares_exact(&grid, iso, &field);
    Ok(stitch_segments(&segs, STITCH_TOL))
}

/// Intersects every triangle with the plane `z` and stitches the pieces.
pub fn slice_mesh(mesh: &TriangleMesh, z: f64, tol: f64) -> Contour {
    let segs: Vec<[Point2; 2]> = mesh
        .triangles
        .par_iter()
        .filter_map(|t| {
            let above: Vec<bool> = t.iter().map(|p| p.z >= z).collect();
            let n_above = above.iter().filter(|&&a| a).count();
            if n_above == 0 || n_above == 3 {
                return None;
            }
            let mut pts = Vec::with_capacity(2);
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                if above[k] != above[(k + 1) % 3] {
                    // Canonical ordering keeps shared edges bit-identical.
                    let (a, b) = if (a.x, a.y, a.z) <= (b.x, b.y, b.z) { (a, b) } else { (b, a) };
                    let s = (z - a.z) / (b.z - a.z);
                    pts.push(Point2::new(a.x + s * (b.x - a.x), a.y + s * (b.y - a.y)));
                }
            }
            Some([pts[0], pts[1]])
        })
        .collect();
    let c = stitch_segments(&segs, tol);
    if !c.polylines.is_empty() {
        log::warn!("mesh slice at z={z:.3} left {} open polyline(s); the mesh is not watertight", c.polylines.len());
    }
    c
}
