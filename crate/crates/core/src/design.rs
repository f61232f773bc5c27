//! Design language: a small OpenVCAD-style tree of primitives, CSG operators
//! and functionally graded material assignments.
//!
//! ```text
//! fgrade(["z/70", "1-z/70"], ["blue", "yellow"]) {
//!     cylinder(15, 70);
//! }
//! ```
//!
//! Every primitive is centred in XY and occupies `z ∈ [0, height]`
//! (`sphere(r)` sits on the bed, `z ∈ [0, 2r]`). Geometry is exposed as a
//! signed distance (negative inside); materials as a vector of volume
//! fractions that is defined everywhere in space.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use thiserror::Error;

use crate::expr::{parse_expression, Expr, ExprError};
use crate::geom::{BBox2, Point2, Point3};
use crate::mesh::TriangleMesh;

pub const DEFAULT_MATERIAL: &str = "default";

#[derive(Debug, Error)]
pub enum DesignError {
    #[error("syntax error at {line}:{col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("arity error at {line}:{col}: {msg}")]
    Arity { line: usize, col: usize, msg: String },
    #[error("mesh `{0}` has no signed distance; mesh geometry is sliced directly")]
    MeshNotLoaded(String),
    #[error("failed to load mesh `{path}`: {source}")]
    MeshIo { path: String, source: std::io::Error },
    #[error("material expression `{expr}` is not finite at ({x}, {y}, {z})")]
    Eval { expr: String, x: f64, y: f64, z: f64 },
    #[error("unsupported design: {0}")]
    Unsupported(String),
}

/// Design tree node.
#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Cylinder { radius: f64, height: f64 },
    RectPrism { width: f64, depth: f64, height: f64 },
    Sphere { radius: f64 },
    Mesh { path: String },
    Union(Vec<Node>),
    Difference(Vec<Node>),
    Intersection(Vec<Node>),
    Translate { offset: [f64; 3], child: Box<Node> },
    Fgrade { fractions: Vec<Expr>, materials: Vec<String>, child: Box<Node> },
}

/// Ordered `(material, fraction)` pairs summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct FractionVector {
    pub entries: Vec<(String, f64)>,
}

impl FractionVector {
    pub fn get(&self, material: &str) -> f64 {
        self.entries.iter().find(|(m, _)| m == material).map_or(0.0, |(_, f)| *f)
    }

    pub fn sum(&self) -> f64 {
        self.entries.iter().map(|(_, f)| f).sum()
    }
}

/// A parsed design plus any meshes it references.
#[derive(Debug)]
pub struct Design {
    pub root: Node,
    meshes: HashMap<String, Arc<TriangleMesh>>,
    drift_warned: AtomicBool,
}

impl Clone for Design {
    fn clone(&self) -> Self {
        Self {
            root: self.root.clone(),
            meshes: self.meshes.clone(),
            drift_warned: AtomicBool::new(self.drift_warned.load(Ordering::Relaxed)),
        }
    }
}

/// How the outline of a layer is obtained.
pub enum GeometrySource {
    /// Contour the signed distance field.
    Implicit,
    /// Slice this (already translated) mesh by plane.
    Mesh(Arc<TriangleMesh>),
}

impl Design {
    pub fn new(root: Node) -> Self {
        Self { root, meshes: HashMap::new(), drift_warned: AtomicBool::new(false) }
    }

    pub fn parse(text: &str) -> Result<Self, DesignError> {
        parse_design(text)
    }

    /// Loads every `mesh("...")` relative to `base_dir`.
    pub fn load_meshes(&mut self, base_dir: &Path) -> Result<(), DesignError> {
        let mut paths = Vec::new();
        collect_mesh_paths(&self.root, &mut paths);
        for p in paths {
            if self.meshes.contains_key(&p) {
                continue;
            }
            let full = base_dir.join(&p);
            let mesh = TriangleMesh::read_stl(&full).map_err(|source| DesignError::MeshIo { path: p.clone(), source })?;
            self.meshes.insert(p, Arc::new(mesh));
        }
        Ok(())
    }

    pub fn insert_mesh(&mut self, path: &str, mesh: TriangleMesh) {
        self.meshes.insert(path.to_string(), Arc::new(mesh));
    }

    /// Material names in order of first appearance; `["default"]` when ungraded.
    pub fn materials(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        collect_materials(&self.root, &mut out);
        if out.is_empty() {
            out.push(DEFAULT_MATERIAL.to_string());
        }
        out
    }

    pub fn eval_sdf(&self, p: Point3) -> Result<f64, DesignError> {
        sdf(&self.root, p)
    }

    pub fn eval_fractions(&self, p: Point3) -> Result<FractionVector, DesignError> {
        let Some((fg, local)) = innermost_fgrade(&self.root, p, None) else {
            return Ok(FractionVector { entries: vec![(DEFAULT_MATERIAL.to_string(), 1.0)] });
        };
        let Node::Fgrade { fractions, materials, .. } = fg else { unreachable!() };
        let mut raw = Vec::with_capacity(fractions.len());
        for e in fractions {
            let v = e.eval(local.x, local.y, local.z);
            if !v.is_finite() {
                return Err(DesignError::Eval { expr: e.to_string(), x: p.x, y: p.y, z: p.z });
            }
            raw.push(v);
        }
        let pre_sum: f64 = raw.iter().sum();
        if (pre_sum - 1.0).abs() > 1e-3 && !self.drift_warned.swap(true, Ordering::Relaxed) {
            log::warn!(
                "material fractions sum to {pre_sum:.6} at ({:.3}, {:.3}, {:.3}); clamping and renormalising",
                p.x,
                p.y,
                p.z
            );
        }
        let clamped: Vec<f64> = raw.iter().map(|v| v.clamp(0.0, 1.0)).collect();
        let sum: f64 = clamped.iter().sum();
        if sum <= 0.0 {
            return Err(DesignError::Eval { expr: "all fractions clamp to zero".into(), x: p.x, y: p.y, z: p.z });
        }
        Ok(FractionVector {
            entries: materials.iter().cloned().zip(clamped.into_iter().map(|v| v / sum)).collect(),
        })
    }

    /// Fraction of one material at `p` (zero when the material is absent).
    pub fn fraction_of(&self, material: &str, p: Point3) -> Result<f64, DesignError> {
        Ok(self.eval_fractions(p)?.get(material))
    }

    /// Axis-aligned bounds as `(min, max)`.
    pub fn bounds(&self) -> Result<(Point3, Point3), DesignError> {
        bounds(&self.root, &self.meshes)
    }

    pub fn xy_bounds(&self) -> Result<BBox2, DesignError> {
        let (lo, hi) = self.bounds()?;
        Ok(BBox2::new(Point2::new(lo.x, lo.y), Point2::new(hi.x, hi.y)))
    }

    pub fn geometry_source(&self) -> Result<GeometrySource, DesignError> {
        if !contains_mesh(&self.root) {
            return Ok(GeometrySource::Implicit);
        }
        let mut offset = [0.0; 3];
        let mut node = &self.root;
        loop {
            match node {
                Node::Translate { offset: o, child } => {
                    for k in 0..3 {
                        offset[k] += o[k];
                    }
                    node = child;
                }
                Node::Fgrade { child, .. } => node = child,
                Node::Union(c) | Node::Intersection(c) | Node::Difference(c) if c.len() == 1 => node = &c[0],
                Node::Mesh { path } => {
                    let mesh = self.meshes.get(path).ok_or_else(|| DesignError::MeshNotLoaded(path.clone()))?;
                    if offset == [0.0; 3] {
                        return Ok(GeometrySource::Mesh(mesh.clone()));
                    }
                    let shift = |q: Point3| Point3::new(q.x + offset[0], q.y + offset[1], q.z + offset[2]);
                    let moved = mesh.triangles.iter().map(|t| [shift(t[0]), shift(t[1]), shift(t[2])]).collect();
                    return Ok(GeometrySource::Mesh(Arc::new(TriangleMesh::new(moved))));
                }
                _ => {
                    return Err(DesignError::Unsupported(
                        "meshes cannot be combined with implicit primitives through CSG".into(),
                    ))
                }
            }
        }
    }
}

fn collect_mesh_paths(node: &Node, out: &mut Vec<String>) {
    match node {
        Node::Mesh { path } => out.push(path.clone()),
        Node::Union(c) | Node::Difference(c) | Node::Intersection(c) => c.iter().for_each(|n| collect_mesh_paths(n, out)),
        Node::Translate { child, .. } | Node::Fgrade { child, .. } => collect_mesh_paths(child, out),
        _ => {}
    }
}

fn contains_mesh(node: &Node) -> bool {
    let mut v = Vec::new();
    collect_mesh_paths(node, &mut v);
    !v.is_empty()
}

fn collect_materials(node: &Node, out: &mut Vec<String>) {
    match node {
        Node::Fgrade { materials, child, .. } => {
            for m in materials {
                if !out.contains(m) {
                    out.push(m.clone());
                }
            }
            collect_materials(child, out);
        }
        Node::Union(c) | Node::Difference(c) | Node::Intersection(c) => c.iter().for_each(|n| collect_materials(n, out)),
        Node::Translate { child, .. } => collect_materials(child, out),
        _ => {}
    }
}

fn sdf(node: &Node, p: Point3) -> Result<f64, DesignError> {
    Ok(match node {
        Node::Cylinder { radius, height } => {
            let half = height / 2.0;
            let dr = p.x.hypot(p.y) - radius;
            let dz = (p.z - half).abs() - half;
            dr.max(dz).min(0.0) + dr.max(0.0).hypot(dz.max(0.0))
        }
        Node::RectPrism { width, depth, height } => {
            let q = [p.x.abs() - width / 2.0, p.y.abs() - depth / 2.0, (p.z - height / 2.0).abs() - height / 2.0];
            let outside = (q[0].max(0.0).powi(2) + q[1].max(0.0).powi(2) + q[2].max(0.0).powi(2)).sqrt();
            outside + q[0].max(q[1]).max(q[2]).min(0.0)
        }
        Node::Sphere { radius } => (p.x * p.x + p.y * p.y + (p.z - radius).powi(2)).sqrt() - radius,
        Node::Mesh { path } => return Err(DesignError::MeshNotLoaded(path.clone())),
        Node::Union(c) => {
            let mut d = f64::INFINITY;
            for n in c {
                d = d.min(sdf(n, p)?);
            }
            d
        }
        Node::Intersection(c) => {
            let mut d = f64::NEG_INFINITY;
            for n in c {
                d = d.max(sdf(n, p)?);
            }
            d
        }
        Node::Difference(c) => {
            let mut d = sdf(&c[0], p)?;
            for n in &c[1..] {
                d = d.max(-sdf(n, p)?);
            }
            d
        }
        Node::Translate { offset, child } => sdf(child, Point3::new(p.x - offset[0], p.y - offset[1], p.z - offset[2]))?,
        Node::Fgrade { child, .. } => sdf(child, p)?,
    })
}

/// Finds the fgrade node that governs `p`, returning it with `p` expressed in
/// that node's local frame. Union children compete by signed distance.
fn innermost_fgrade<'a>(node: &'a Node, p: Point3, current: Option<(&'a Node, Point3)>) -> Option<(&'a Node, Point3)> {
    match node {
        Node::Fgrade { child, .. } => innermost_fgrade(child, p, Some((node, p))),
        Node::Translate { offset, child } => {
            innermost_fgrade(child, Point3::new(p.x - offset[0], p.y - offset[1], p.z - offset[2]), current)
        }
        Node::Difference(c) | Node::Intersection(c) => innermost_fgrade(&c[0], p, current),
        Node::Union(c) => {
            let owner = c
                .iter()
                .map(|n| sdf(n, p).ok())
                .enumerate()
                .filter_map(|(i, d)| d.map(|d| (i, d)))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .map_or(0, |(i, _)| i);
            innermost_fgrade(&c[owner], p, current)
        }
        _ => current,
    }
}

fn bounds(node: &Node, meshes: &HashMap<String, Arc<TriangleMesh>>) -> Result<(Point3, Point3), DesignError> {
    Ok(match node {
        Node::Cylinder { radius: r, height: h } => (Point3::new(-r, -r, 0.0), Point3::new(*r, *r, *h)),
        Node::RectPrism { width, depth, height } => (
            Point3::new(-width / 2.0, -depth / 2.0, 0.0),
            Point3::new(width / 2.0, depth / 2.0, *height),
        ),
        Node::Sphere { radius: r } => (Point3::new(-r, -r, 0.0), Point3::new(*r, *r, 2.0 * r)),
        Node::Mesh { path } => meshes
            .get(path)
            .and_then(|m| m.bounds())
            .ok_or_else(|| DesignError::MeshNotLoaded(path.clone()))?,
        Node::Union(c) => {
            let mut acc = bounds(&c[0], meshes)?;
            for n in &c[1..] {
                let b = bounds(n, meshes)?;
                acc = (
                    Point3::new(acc.0.x.min(b.0.x), acc.0.y.min(b.0.y), acc.0.z.min(b.0.z)),
                    Point3::new(acc.1.x.max(b.1.x), acc.1.y.max(b.1.y), acc.1.z.max(b.1.z)),
                );
            }
            acc
        }
        Node::Intersection(c) => {
            let mut acc = bounds(&c[0], meshes)?;
            for n in &c[1..] {
                let b = bounds(n, meshes)?;
                acc = (
                    Point3::new(acc.0.x.max(b.0.x), acc.0.y.max(b.0.y), acc.0.z.max(b.0.z)),
                    Point3::new(acc.1.x.min(b.1.x), acc.1.y.min(b.1.y), acc.1.z.min(b.1.z)),
                );
            }
            acc
        }
        Node::Difference(c) => bounds(&c[0], meshes)?,
        Node::Translate { offset, child } => {
            let (lo, hi) = bounds(child, meshes)?;
            (
                Point3::new(lo.x + offset[0], lo.y + offset[1], lo.z + offset[2]),
                Point3::new(hi.x + offset[0], hi.y + offset[1], hi.z + offset[2]),
            )
        }
        Node::Fgrade { child, .. } => bounds(child, meshes)?,
    })
}

// ---------------------------------------------------------------------------
// Pretty printing
// ---------------------------------------------------------------------------

fn write_node(f: &mut fmt::Formatter<'_>, node: &Node, indent: usize) -> fmt::Result {
    let pad = "    ".repeat(indent);
    let children = |f: &mut fmt::Formatter<'_>, kids: &[&Node]| -> fmt::Result {
        f.write_str(" {\n")?;
        for k in kids {
            write_node(f, k, indent + 1)?;
        }
        writeln!(f, "{pad}}}")
    };
    match node {
        Node::Cylinder { radius, height } => writeln!(f, "{pad}cylinder({radius}, {height});"),
        Node::RectPrism { width, depth, height } => writeln!(f, "{pad}rectprism({width}, {depth}, {height});"),
        Node::Sphere { radius } => writeln!(f, "{pad}sphere({radius});"),
        Node::Mesh { path } => writeln!(f, "{pad}mesh({});", quote(path)),
        Node::Union(c) | Node::Difference(c) | Node::Intersection(c) => {
            let name = match node {
                Node::Union(_) => "union",
                Node::Difference(_) => "difference",
                _ => "intersection",
            };
            write!(f, "{pad}{name}()")?;
            children(f, &c.iter().collect::<Vec<_>>())
        }
        Node::Translate { offset, child } => {
            write!(f, "{pad}translate([{}, {}, {}])", offset[0], offset[1], offset[2])?;
            children(f, &[child])
        }
        Node::Fgrade { fractions, materials, child } => {
            let exprs: Vec<String> = fractions.iter().map(|e| quote(&e.to_string())).collect();
            let mats: Vec<String> = materials.iter().map(|m| quote(m)).collect();
            write!(f, "{pad}fgrade([{}], [{}])", exprs.join(", "), mats.join(", "))?;
            children(f, &[child])
        }
    }
}

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

impl fmt::Display for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_node(f, self, 0)
    }
}

impl fmt::Display for Design {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.root.fmt(f)
    }
}

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Num(f64),
    Str(String),
    Punct(char),
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    col: usize,
}

fn lex(text: &str) -> Result<Vec<Spanned>, DesignError> {
    let chars: Vec<char> = text.chars().collect();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    let mut out = Vec::new();
    let syntax = |line, col, msg: String| DesignError::Syntax { line, col, msg };
    macro_rules! advance {
        () => {{
            if chars[i] == '\n' {
                line += 1;
                col = 1;
            } else {
                col += 1;
            }
            i += 1;
        }};
    }
    while i < chars.len() {
        let c = chars[i];
        let (l0, c0) = (line, col);
        if c.is_whitespace() {
            advance!();
        } else if c == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                advance!();
            }
        } else if c == '/' && chars.get(i + 1) == Some(&'*') {
            advance!();
            advance!();
            loop {
                if i >= chars.len() {
                    return Err(syntax(l0, c0, "unterminated block comment".into()));
                }
                if chars[i] == '*' && chars.get(i + 1) == Some(&'/') {
                    advance!();
                    advance!();
                    break;
                }
                advance!();
            }
        } else if c == '"' {
            advance!();
            let mut s = String::new();
            loop {
                match chars.get(i) {
                    None | Some('\n') => return Err(syntax(l0, c0, "unterminated string".into())),
                    Some('"') => {
                        advance!();
                        break;
                    }
                    Some('\\') => {
                        advance!();
                        match chars.get(i) {
                            Some(&e @ ('"' | '\\')) => s.push(e),
                            Some('n') => s.push('\n'),
                            _ => return Err(syntax(line, col, "invalid escape".into())),
                        }
                        advance!();
                    }
                    Some(&ch) => {
                        s.push(ch);
                        advance!();
                    }
                }
            }
            out.push(Spanned { tok: Tok::Str(s), line: l0, col: c0 });
        } else if c.is_ascii_digit() || c == '.' || (c == '-' || c == '+') && chars.get(i + 1).is_some_and(|n| n.is_ascii_digit() || *n == '.') {
            let start = i;
            advance!();
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                advance!();
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                advance!();
                if i < chars.len() && (chars[i] == '-' || chars[i] == '+') {
                    advance!();
                }
                while i < chars.len() && chars[i].is_ascii_digit() {
                    advance!();
                }
            }
            let s: String = chars[start..i].iter().collect();
            let v: f64 = s.parse().map_err(|_| syntax(l0, c0, format!("malformed number `{s}`")))?;
            out.push(Spanned { tok: Tok::Num(v), line: l0, col: c0 });
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                advance!();
            }
            out.push(Spanned { tok: Tok::Ident(chars[start..i].iter().collect()), line: l0, col: c0 });
        } else if "(){}[],;".contains(c) {
            advance!();
            out.push(Spanned { tok: Tok::Punct(c), line: l0, col: c0 });
        } else {
            return Err(syntax(l0, c0, format!("unexpected character `{c}`")));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone)]
enum Arg {
    Num(f64),
    Str(String, usize, usize),
    List(Vec<Arg>),
}

struct DesignParser {
    toks: Vec<Spanned>,
    pos: usize,
    eof: (usize, usize),
}

impl DesignParser {
    fn here(&self) -> (usize, usize) {
        self.toks.get(self.pos).map_or(self.eof, |t| (t.line, t.col))
    }

    fn syntax<T>(&self, msg: impl Into<String>) -> Result<T, DesignError> {
        let (line, col) = self.here();
        Err(DesignError::Syntax { line, col, msg: msg.into() })
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.tok)
    }

    fn expect(&mut self, c: char) -> Result<(), DesignError> {
        if self.peek() == Some(&Tok::Punct(c)) {
            self.pos += 1;
            Ok(())
        } else {
            self.syntax(format!("expected `{c}`"))
        }
    }

    fn arg(&mut self) -> Result<Arg, DesignError> {
        let (line, col) = self.here();
        match self.peek().cloned() {
            Some(Tok::Num(v)) => {
                self.pos += 1;
                Ok(Arg::Num(v))
            }
            Some(Tok::Str(s)) => {
                self.pos += 1;
                Ok(Arg::Str(s, line, col))
            }
            Some(Tok::Punct('[')) => {
                self.pos += 1;
                let mut items = Vec::new();
                if self.peek() != Some(&Tok::Punct(']')) {
                    items.push(self.arg()?);
                    while self.peek() == Some(&Tok::Punct(',')) {
                        self.pos += 1;
                        items.push(self.arg()?);
                    }
                }
                self.expect(']')?;
                Ok(Arg::List(items))
            }
            _ => self.syntax("expected a number, string or list"),
        }
    }

    fn node(&mut self) -> Result<Node, DesignError> {
        let (line, col) = self.here();
        let name = match self.peek().cloned() {
            Some(Tok::Ident(n)) => n,
            Some(Tok::Punct('}')) => return self.syntax("unbalanced `}`"),
            _ => return self.syntax("expected a node name"),
        };
        self.pos += 1;
        self.expect('(')?;
        let mut args = Vec::new();
        if self.peek() != Some(&Tok::Punct(')')) {
            args.push(self.arg()?);
            while self.peek() == Some(&Tok::Punct(',')) {
                self.pos += 1;
                args.push(self.arg()?);
            }
        }
        self.expect(')')?;
        let mut children = Vec::new();
        let has_block = self.peek() == Some(&Tok::Punct('{'));
        if has_block {
            self.pos += 1;
            loop {
                match self.peek() {
                    Some(Tok::Punct('}')) => {
                        self.pos += 1;
                        break;
                    }
                    None => return Err(DesignError::Syntax { line, col, msg: format!("unbalanced `{{` opened by `{name}`") }),
                    _ => children.push(self.node()?),
                }
            }
            if self.peek() == Some(&Tok::Punct(';')) {
                self.pos += 1;
            }
        } else {
            self.expect(';')?;
        }
        build_node(&name, args, children, line, col, has_block)
    }
}

fn build_node(name: &str, args: Vec<Arg>, mut children: Vec<Node>, line: usize, col: usize, has_block: bool) -> Result<Node, DesignError> {
    let arity = |msg: String| DesignError::Arity { line, col, msg };
    let syntax = |msg: String| DesignError::Syntax { line, col, msg };
    let nums = |n: usize| -> Result<Vec<f64>, DesignError> {
        if args.len() != n {
            return Err(arity(format!("`{name}` takes {n} numeric argument(s), got {}", args.len())));
        }
        args.iter()
            .map(|a| match a {
                Arg::Num(v) => Ok(*v),
                _ => Err(syntax(format!("`{name}` arguments must be numbers"))),
            })
            .collect()
    };
    let leaf = |node: Node| -> Result<Node, DesignError> {
        if has_block {
            Err(syntax(format!("`{name}` takes no children")))
        } else {
            Ok(node)
        }
    };
    let single_child = |children: &mut Vec<Node>| -> Result<Box<Node>, DesignError> {
        if children.len() != 1 {
            return Err(arity(format!("`{name}` takes exactly one child, got {}", children.len())));
        }
        Ok(Box::new(children.pop().expect("one child")))
    };
    let positive = |v: &[f64]| -> Result<(), DesignError> {
        if v.iter().all(|x| *x > 0.0 && x.is_finite()) {
            Ok(())
        } else {
            Err(syntax(format!("`{name}` dimensions must be positive")))
        }
    };
    match name {
        "cylinder" => {
            let v = nums(2)?;
            positive(&v)?;
            leaf(Node::Cylinder { radius: v[0], height: v[1] })
        }
        "rectprism" => {
            let v = nums(3)?;
            positive(&v)?;
            leaf(Node::RectPrism { width: v[0], depth: v[1], height: v[2] })
        }
        "sphere" => {
            let v = nums(1)?;
            positive(&v)?;
            leaf(Node::Sphere { radius: v[0] })
        }
        "mesh" => match args.as_slice() {
            [Arg::Str(p, ..)] => leaf(Node::Mesh { path: p.clone() }),
            _ => Err(arity("`mesh` takes one string path".into())),
        },
        "union" | "difference" | "intersection" => {
            if !args.is_empty() {
                return Err(arity(format!("`{name}` takes no arguments")));
            }
            if children.is_empty() {
                return Err(arity(format!("`{name}` needs at least one child")));
            }
            Ok(match name {
                "union" => Node::Union(children),
                "difference" => Node::Difference(children),
                _ => Node::Intersection(children),
            })
        }
        "translate" => {
            let offset = match args.as_slice() {
                [Arg::List(items)] if items.len() == 3 => {
                    let mut o = [0.0; 3];
                    for (k, it) in items.iter().enumerate() {
                        match it {
                            Arg::Num(v) => o[k] = *v,
                            _ => return Err(syntax("`translate` offset must be numeric".into())),
                        }
                    }
                    o
                }
                _ => return Err(arity("`translate` takes one [x, y, z] list".into())),
            };
            Ok(Node::Translate { offset, child: single_child(&mut children)? })
        }
        "fgrade" => {
            let (exprs, mats) = match args.as_slice() {
                [Arg::List(e), Arg::List(m)] => (e, m),
                _ => return Err(arity("`fgrade` takes an expression list and a material list".into())),
            };
            if exprs.len() != mats.len() {
                return Err(arity(format!(
                    "`fgrade` has {} expression(s) but {} material(s)",
                    exprs.len(),
                    mats.len()
                )));
            }
            if exprs.is_empty() {
                return Err(arity("`fgrade` needs at least one material".into()));
            }
            let mut fractions = Vec::new();
            for e in exprs {
                let Arg::Str(text, l, c) = e else {
                    return Err(syntax("`fgrade` expressions must be strings".into()));
                };
                fractions.push(parse_expression(text).map_err(|err| expr_error(err, *l, *c))?);
            }
            let mut materials = Vec::new();
            for m in mats {
                let Arg::Str(name, ..) = m else {
                    return Err(syntax("`fgrade` material names must be strings".into()));
                };
                materials.push(name.clone());
            }
            Ok(Node::Fgrade { fractions, materials, child: single_child(&mut children)? })
        }
        _ => Err(syntax(format!("unknown node `{name}`"))),
    }
}

fn expr_error(err: ExprError, line: usize, col: usize) -> DesignError {
    // +1 skips the opening quote of the string literal.
    DesignError::Syntax { line, col: col + err.column(), msg: err.to_string() }
}

/// Parses design source text. Several top-level nodes form an implicit union.
pub fn parse_design(text: &str) -> Result<Design, DesignError> {
    let toks = lex(text)?;
    let eof = toks.last().map_or((1, 1), |t| (t.line, t.col + 1));
    let mut p = DesignParser { toks, pos: 0, eof };
    let mut nodes = Vec::new();
    while p.peek().is_some() {
        nodes.push(p.node()?);
    }
    let root = match nodes.len() {
        0 => return p.syntax("empty design"),
        1 => nodes.pop().expect("one node"),
        _ => Node::Union(nodes),
    };
    Ok(Design::new(root))
}
