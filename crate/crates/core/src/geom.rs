//! Planar geometry primitives shared by every stage of the slicer.
//!
//! Coordinates are millimetres in `f64`. Rings are stored open (the closing
//! edge from the last vertex back to the first is implicit).

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dot(self, o: Point2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// Z component of the 3D cross product.
    pub fn cross(self, o: Point2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dist(self, o: Point2) -> f64 {
        (self - o).norm()
    }

    pub fn lerp(self, o: Point2, t: f64) -> Point2 {
        Point2::new(self.x + (o.x - self.x) * t, self.y + (o.y - self.y) * t)
    }

    pub fn rotate(self, angle_rad: f64) -> Point2 {
        let (s, c) = angle_rad.sin_cos();
        Point2::new(self.x * c - self.y * s, self.x * s + self.y * c)
    }
}

impl Add for Point2 {
    type Output = Point2;
    fn add(self, o: Point2) -> Point2 {
        Point2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Point2 {
    type Output = Point2;
    fn sub(self, o: Point2) -> Point2 {
        Point2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Point2 {
    type Output = Point2;
    fn mul(self, s: f64) -> Point2 {
        Point2::new(self.x * s, self.y * s)
    }
}

impl Neg for Point2 {
    type Output = Point2;
    fn neg(self) -> Point2 {
        Point2::new(-self.x, -self.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn xy(self) -> Point2 {
        Point2::new(self.x, self.y)
    }
}

/// Axis-aligned rectangle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox2 {
    pub min: Point2,
    pub max: Point2,
}

impl BBox2 {
    pub fn new(min: Point2, max: Point2) -> Self {
        Self { min, max }
    }

    pub fn empty() -> Self {
        Self {
            min: Point2::new(f64::INFINITY, f64::INFINITY),
            max: Point2::new(f64::NEG_INFINITY, f64::NEG_INFINITY),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.min.x > self.max.x || self.min.y > self.max.y
    }

    pub fn of_points<'a>(pts: impl IntoIterator<Item = &'a Point2>) -> Self {
        let mut b = Self::empty();
        for p in pts {
            b.include(*p);
        }
        b
    }

    pub fn include(&mut self, p: Point2) {
        self.min.x = self.min.x.min(p.x);
        self.min.y = self.min.y.min(p.y);
        self.max.x = self.max.x.max(p.x);
        self.max.y = self.max.y.max(p.y);
    }

    pub fn union(&self, o: &BBox2) -> BBox2 {
        let mut b = *self;
        if !o.is_empty() {
            b.include(o.min);
            b.include(o.max);
        }
        b
    }

    pub fn inflate(&self, d: f64) -> BBox2 {
        BBox2::new(
            Point2::new(self.min.x - d, self.min.y - d),
            Point2::new(self.max.x + d, self.max.y + d),
        )
    }

    pub fn width(&self) -> f64 {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> f64 {
        self.max.y - self.min.y
    }

    pub fn contains(&self, p: Point2) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    pub fn overlaps(&self, o: &BBox2) -> bool {
        self.min.x <= o.max.x && o.min.x <= self.max.x && self.min.y <= o.max.y && o.min.y <= self.max.y
    }
}

/// Shoelace area; positive for counter-clockwise rings.
pub fn signed_area(ring: &[Point2]) -> f64 {
    let n = ring.len();
    if n < 3 {
        return 0.0;
    }
    let mut acc = 0.0;
    for i in 0..n {
        let a = ring[i];
        let b = ring[(i + 1) % n];
        acc += a.cross(b);
    }
    acc * 0.5
}

pub fn polyline_length(pts: &[Point2]) -> f64 {
    pts.windows(2).map(|w| w[0].dist(w[1])).sum()
}

pub fn ring_perimeter(ring: &[Point2]) -> f64 {
    if ring.len() < 2 {
        return 0.0;
    }
    polyline_length(ring) + ring[ring.len() - 1].dist(ring[0])
}

/// Crossing-number point-in-ring test. Points exactly on an edge may go either way.
pub fn point_in_ring(p: Point2, ring: &[Point2]) -> bool {
    let n = ring.len();
    let mut inside = false;
    let mut j = n.wrapping_sub(1);
    for i in 0..n {
        let a = ring[i];
        let b = ring[j];
        if (a.y > p.y) != (b.y > p.y) {
            let x = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
            if p.x < x {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

/// Distance from `p` to segment `ab`.
pub fn point_segment_distance(p: Point2, a: Point2, b: Point2) -> f64 {
    let ab = b - a;
    let len2 = ab.dot(ab);
    if len2 == 0.0 {
        return p.dist(a);
    }
    let t = ((p - a).dot(ab) / len2).clamp(0.0, 1.0);
    p.dist(a + ab * t)
}

pub fn ring_distance(p: Point2, ring: &[Point2]) -> f64 {
    let n = ring.len();
    (0..n)
        .map(|i| point_segment_distance(p, ring[i], ring[(i + 1) % n]))
        .fold(f64::INFINITY, f64::min)
}

/// A simple polygon with optional holes. Outer ring is counter-clockwise,
/// holes are clockwise (see [`Polygon::normalized`]).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Polygon {
    pub outer: Vec<Point2>,
    pub holes: Vec<Vec<Point2>>,
}

impl Polygon {
    pub fn new(outer: Vec<Point2>, holes: Vec<Vec<Point2>>) -> Self {
        Self { outer, holes }.normalized()
    }

    pub fn from_outer(outer: Vec<Point2>) -> Self {
        Self::new(outer, Vec::new())
    }

    pub fn rect(min: Point2, max: Point2) -> Self {
        Self::from_outer(vec![min, Point2::new(max.x, min.y), max, Point2::new(min.x, max.y)])
    }

    /// Regular n-gon approximating a circle.
    pub fn circle(center: Point2, r: f64, segments: usize) -> Self {
        let pts = (0..segments)
            .map(|i| {
                let t = i as f64 / segments as f64 * std::f64::consts::TAU;
                Point2::new(center.x + r * t.cos(), center.y + r * t.sin())
            })
            .collect();
        Self::from_outer(pts)
    }

    /// Fixes ring orientation: outer CCW, holes CW.
    pub fn normalized(mut self) -> Self {
        if signed_area(&self.outer) < 0.0 {
            self.outer.reverse();
        }
        for h in &mut self.holes {
            if signed_area(h) > 0.0 {
                h.reverse();
            }
        }
        self
    }

    pub fn area(&self) -> f64 {
        signed_area(&self.outer).abs() - self.holes.iter().map(|h| signed_area(h).abs()).sum::<f64>()
    }

    pub fn contains(&self, p: Point2) -> bool {
        point_in_ring(p, &self.outer) && !self.holes.iter().any(|h| point_in_ring(p, h))
    }

    pub fn bbox(&self) -> BBox2 {
        BBox2::of_points(&self.outer)
    }

    pub fn rings(&self) -> impl Iterator<Item = &Vec<Point2>> {
        std::iter::once(&self.outer).chain(self.holes.iter())
    }

    pub fn vertex_count(&self) -> usize {
        self.rings().map(Vec::len).sum()
    }

    /// Distance from `p` to the nearest boundary edge.
    pub fn boundary_distance(&self, p: Point2) -> f64 {
        self.rings().map(|r| ring_distance(p, r)).fold(f64::INFINITY, f64::min)
    }

    pub fn translated(&self, d: Point2) -> Polygon {
        Polygon {
            outer: self.outer.iter().map(|&p| p + d).collect(),
            holes: self.holes.iter().map(|h| h.iter().map(|&p| p + d).collect()).collect(),
        }
    }
}

pub fn total_area(polys: &[Polygon]) -> f64 {
    polys.iter().map(Polygon::area).sum()
}

pub fn polygons_contain(polys: &[Polygon], p: Point2) -> bool {
    polys.iter().any(|poly| poly.contains(p))
}

/// Groups closed rings into polygons with holes using even-odd nesting depth.
pub fn rings_to_polygons(rings: Vec<Vec<Point2>>) -> Vec<Polygon> {
    let rings: Vec<Vec<Point2>> = rings.into_iter().filter(|r| r.len() >= 3 && signed_area(r) != 0.0).collect();
    let areas: Vec<f64> = rings.iter().map(|r| signed_area(r).abs()).collect();
    let bboxes: Vec<BBox2> = rings.iter().map(BBox2::of_points).collect();
    // A ring is "inside" another if a vertex of it lies inside the other; use
    // the vertex farthest from degenerate touching: the first one suffices for
    // contours that never cross.
    let n = rings.len();
    let mut parents: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        let probe = rings[i][0];
        for j in 0..n {
            if i != j && areas[j] > areas[i] && bboxes[j].contains(probe) && point_in_ring(probe, &rings[j]) {
                parents[i].push(j);
            }
        }
    }
    let depth: Vec<usize> = parents.iter().map(Vec::len).collect();
    let mut polys: Vec<Polygon> = Vec::new();
    let mut index_of = vec![usize::MAX; n];
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&i| depth[i]);
    for &i in &order {
        if depth[i] % 2 == 0 {
            index_of[i] = polys.len();
            polys.push(Polygon::from_outer(rings[i].clone()));
        } else {
            // Immediate parent is the containing ring with the greatest depth.
            let parent = parents[i].iter().copied().max_by_key(|&j| depth[j]).expect("odd depth has a parent");
            let pi = index_of[parent];
            if pi != usize::MAX {
                let mut hole = rings[i].clone();
                if signed_area(&hole) > 0.0 {
                    hole.reverse();
                }
                polys[pi].holes.push(hole);
            }
        }
    }
    polys
}

/// Douglas-Peucker simplification of an open polyline. Endpoints are kept.
pub fn simplify_polyline(pts: &[Point2], tol: f64) -> Vec<Point2> {
    if pts.len() <= 2 || tol <= 0.0 {
        return pts.to_vec();
    }
    let mut keep = vec![false; pts.len()];
    keep[0] = true;
    keep[pts.len() - 1] = true;
    let mut stack = vec![(0usize, pts.len() - 1)];
    while let Some((a, b)) = stack.pop() {
        if b <= a + 1 {
            continue;
        }
        let (mut best, mut best_d) = (a, -1.0);
        for i in a + 1..b {
            let d = point_segment_distance(pts[i], pts[a], pts[b]);
            if d > best_d {
                best_d = d;
                best = i;
            }
        }
        if best_d > tol {
            keep[best] = true;
            stack.push((a, best));
            stack.push((best, b));
        }
    }
    pts.iter().zip(keep).filter(|(_, k)| *k).map(|(p, _)| *p).collect()
}

/// Douglas-Peucker for a closed ring, anchored at the vertex farthest from the first.
pub fn simplify_ring(ring: &[Point2], tol: f64) -> Vec<Point2> {
    if ring.len() <= 4 || tol <= 0.0 {
        return ring.to_vec();
    }
    let far = (1..ring.len())
        .max_by(|&i, &j| ring[0].dist(ring[i]).total_cmp(&ring[0].dist(ring[j])))
        .unwrap_or(1);
    let mut first: Vec<Point2> = ring[..=far].to_vec();
    let mut second: Vec<Point2> = ring[far..].to_vec();
    second.push(ring[0]);
    first = simplify_polyline(&first, tol);
    second = simplify_polyline(&second, tol);
    first.pop();
    second.pop();
    first.extend(second);
    if first.len() < 3 || signed_area(&first).abs() < tol * tol {
        return ring.to_vec();
    }
    first
}

/// Intersection of segments `p0-p1` and `q0-q1`, returning the parameters
/// along each when they cross at a single point.
pub fn segment_intersection(p0: Point2, p1: Point2, q0: Point2, q1: Point2) -> Option<(f64, f64)> {
    let r = p1 - p0;
    let s = q1 - q0;
    let denom = r.cross(s);
    if denom == 0.0 {
        return None;
    }
    let qp = q0 - p0;
    let t = qp.cross(s) / denom;
    let u = qp.cross(r) / denom;
    if (0.0..=1.0).contains(&t) && (0.0..=1.0).contains(&u) {
        Some((t, u))
    } else {
        None
    }
}
