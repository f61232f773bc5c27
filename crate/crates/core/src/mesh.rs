//! Triangle meshes and STL input/output (binary and ASCII via `stl_io`).

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use crate::geom::Point3;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TriangleMesh {
    pub triangles: Vec<[Point3; 3]>,
}

impl TriangleMesh {
    pub fn new(triangles: Vec<[Point3; 3]>) -> Self {
        Self { triangles }
    }

    pub fn read_stl(path: &Path) -> std::io::Result<Self> {
        let mut reader = BufReader::new(File::open(path)?);
        let indexed = stl_io::read_stl(&mut reader)?;
        let v = |i: usize| {
            let p = indexed.vertices[i].0;
            Point3::new(p[0] as f64, p[1] as f64, p[2] as f64)
        };
        let triangles = indexed
            .faces
            .iter()
            .map(|f| [v(f.vertices[0]), v(f.vertices[1]), v(f.vertices[2])])
            .collect();
        Ok(Self { triangles })
    }

    /// Writes a binary STL.
    pub fn write_stl(&self, path: &Path) -> std::io::Result<()> {
        let mut out = BufWriter::new(File::create(path)?);
        let tris = self.triangles.iter().map(|t| {
            let p = |q: Point3| stl_io::Vertex::new([q.x as f32, q.y as f32, q.z as f32]);
            let (a, b, c) = (t[0], t[1], t[2]);
            let u = [b.x - a.x, b.y - a.y, b.z - a.z];
            let w = [c.x - a.x, c.y - a.y, c.z - a.z];
            let n = [u[1] * w[2] - u[2] * w[1], u[2] * w[0] - u[0] * w[2], u[0] * w[1] - u[1] * w[0]];
            let len = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt().max(f64::MIN_POSITIVE);
            stl_io::Triangle {
                normal: stl_io::Normal::new([(n[0] / len) as f32, (n[1] / len) as f32, (n[2] / len) as f32]),
                vertices: [p(a), p(b), p(c)],
            }
        });
        stl_io::write_stl(&mut out, tris)?;
        out.flush()
    }

    pub fn bounds(&self) -> Option<(Point3, Point3)> {
        let mut it = self.triangles.iter().flat_map(|t| t.iter());
        let first = *it.next()?;
        let (mut lo, mut hi) = (first, first);
        for p in it {
            lo = Point3::new(lo.x.min(p.x), lo.y.min(p.y), lo.z.min(p.z));
            hi = Point3::new(hi.x.max(p.x), hi.y.max(p.y), hi.z.max(p.z));
        }
        Some((lo, hi))
    }

    /// Closed prism with the given CCW footprint, spanning `z0..z1`.
    pub fn extrude(footprint: &[crate::geom::Point2], z0: f64, z1: f64) -> Self {
        let n = footprint.len();
        let c = footprint.iter().fold(crate::geom::Point2::default(), |a, &p| a + p) * (1.0 / n as f64);
        let lo = |p: crate::geom::Point2| Point3::new(p.x, p.y, z0);
        let hi = |p: crate::geom::Point2| Point3::new(p.x, p.y, z1);
        let mut tris = Vec::with_capacity(4 * n);
        for i in 0..n {
            let a = footprint[i];
            let b = footprint[(i + 1) % n];
            tris.push([lo(a), lo(b), hi(b)]);
            tris.push([lo(a), hi(b), hi(a)]);
            tris.push([lo(c), lo(b), lo(a)]);
            tris.push([hi(c), hi(a), hi(b)]);
        }
        Self { triangles: tris }
    }

    /// Geodesic sphere from a subdivided icosahedron.
    pub fn icosphere(radius: f64, subdivisions: usize) -> Self {
        let t = (1.0 + 5f64.sqrt()) / 2.0;
        let mut verts: Vec<[f64; 3]> = vec![
            [-1.0, t, 0.0],
            [1.0, t, 0.0],
            [-1.0, -t, 0.0],
            [1.0, -t, 0.0],
            [0.0, -1.0, t],
            [0.0, 1.0, t],
            [0.0, -1.0, -t],
            [0.0, 1.0, -t],
            [t, 0.0, -1.0],
            [t, 0.0, 1.0],
            [-t, 0.0, -1.0],
            [-t, 0.0, 1.0],
        ];
        let mut faces: Vec<[usize; 3]> = vec![
            [0, 11, 5],
            [0, 5, 1],
            [0, 1, 7],
            [0, 7, 10],
            [0, 10, 11],
            [1, 5, 9],
            [5, 11, 4],
            [11, 10, 2],
            [10, 7, 6],
            [7, 1, 8],
            [3, 9, 4],
            [3, 4, 2],
            [3, 2, 6],
            [3, 6, 8],
            [3, 8, 9],
            [4, 9, 5],
            [2, 4, 11],
            [6, 2, 10],
            [8, 6, 7],
            [9, 8, 1],
        ];
        let normalize = |v: [f64; 3]| {
            let l = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
            [v[0] / l, v[1] / l, v[2] / l]
        };
        for v in &mut verts {
            *v = normalize(*v);
        }
        for _ in 0..subdivisions {
            let mut cache = std::collections::HashMap::new();
            let mut mid = |a: usize, b: usize, verts: &mut Vec<[f64; 3]>| {
                let key = (a.min(b), a.max(b));
                *cache.entry(key).or_insert_with(|| {
                    let (p, q) = (verts[a], verts[b]);
                    verts.push(normalize([(p[0] + q[0]) / 2.0, (p[1] + q[1]) / 2.0, (p[2] + q[2]) / 2.0]));
                    verts.len() - 1
                })
            };
            let mut next = Vec::with_capacity(faces.len() * 4);
            for [a, b, c] in faces {
                let ab = mid(a, b, &mut verts);
                let bc = mid(b, c, &mut verts);
                let ca = mid(c, a, &mut verts);
                next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
            }
            faces = next;
        }
        let p = |i: usize| Point3::new(verts[i][0] * radius, verts[i][1] * radius, verts[i][2] * radius);
        Self {
            triangles: faces.iter().map(|f| [p(f[0]), p(f[1]), p(f[2])]).collect(),
        }
    }
}
