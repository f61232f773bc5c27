//! End-to-end slicing, simulation and benchmarking.

use std::collections::{BTreeMap, BTreeSet};
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::arrangement::ColoredFace;
use crate::design::{Design, DesignError, DEFAULT_MATERIAL};
use crate::gcode::{bed_offset, capsule_area, emit_gcode, lookahead_distance, read_gcode, EmitError, GcodeParseError};
use crate::geom::{BBox2, Point2};
use crate::palette::{build_palette, Palette, PaletteKind, ZipperSpec};
use crate::profile::{MachineProfile, ProfileError};
use crate::simulator::{pass_midpoint, realized_boundary_error, simulate, stream_from_gcode, ChamberModel, RealizedSegment, SimError};
use crate::strategy::{
    apply_lookahead, insert_purge_towers, layer_faces, layer_heights, layer_outline, plan_purge_towers, slice_layer_strategy1,
    slice_layer_strategy2, FillPattern, LayerPlan, StrategyError,
};
use crate::toolpath::{PathRole, PrintSettings};

#[derive(Debug, Error)]
pub enum JobError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Profile(#[from] ProfileError),
    #[error(transparent)]
    Design(#[from] DesignError),
    #[error(transparent)]
    Strategy(#[from] StrategyError),
    #[error(transparent)]
    Emit(#[from] EmitError),
    #[error(transparent)]
    Parse(#[from] GcodeParseError),
    #[error("cannot read {path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("cannot write {path}: {source}")]
    Write { path: String, source: std::io::Error },
}

fn design_exit_code(e: &DesignError) -> i32 {
    match e {
        DesignError::Syntax { .. } | DesignError::Arity { .. } | DesignError::MeshNotLoaded(_) | DesignError::MeshIo { .. } => 2,
        DesignError::Eval { .. } | DesignError::Unsupported(_) => 3,
    }
}

impl JobError {
    /// 2 configuration, 3 geometry, 4 emission.
    pub fn exit_code(&self) -> i32 {
        match self {
            JobError::Config(_) | JobError::Profile(_) | JobError::Read { .. } | JobError::Parse(_) => 2,
            JobError::Design(d) => design_exit_code(d),
            JobError::Strategy(s) => match s {
                StrategyError::Palette(_) | StrategyError::Settings(_) | StrategyError::Bead(_) => 2,
                StrategyError::Design(d) => design_exit_code(d),
                _ => 3,
            },
            JobError::Emit(_) | JobError::Write { .. } => 4,
        }
    }
}

impl From<SimError> for JobError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Strategy(s) => JobError::Strategy(s),
            SimError::Emit(e) => JobError::Emit(e),
            other => JobError::Config(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum StrategyKind {
    /// Conventional toolpaths cut by color, with purge towers.
    Sectioned,
    /// Dense fills of each color face, no purging.
    Gradient,
}

impl StrategyKind {
    pub fn number(self) -> u8 {
        match self {
            StrategyKind::Sectioned => 1,
            StrategyKind::Gradient => 2,
        }
    }

    pub fn from_number(n: u8) -> Option<Self> {
        match n {
            1 => Some(StrategyKind::Sectioned),
            2 => Some(StrategyKind::Gradient),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Lookahead {
    Off,
    /// Profile value, else derived from the melt volume.
    Auto,
    Distance(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SliceConfig {
    pub settings: PrintSettings,
    pub strategy: StrategyKind,
    pub colors: usize,
    /// Zipper overlap as a fraction of the gradient range.
    pub zipper_beta: f64,
    pub fill: FillPattern,
    /// Minimum midpoint change that triggers a purge; 0 purges on every change.
    pub purge_threshold: f64,
    pub lookahead: Lookahead,
}

impl Default for SliceConfig {
    fn default() -> Self {
        Self {
            settings: PrintSettings::default(),
            strategy: StrategyKind::Sectioned,
            colors: 4,
            zipper_beta: 0.0,
            fill: FillPattern::Concentric,
            purge_threshold: 0.0,
            lookahead: Lookahead::Auto,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SliceReport {
    pub layers: usize,
    pub strategy: u8,
    pub colors: usize,
    pub zipper_beta: f64,
    pub regions_per_layer: Vec<usize>,
    pub colors_used: Vec<usize>,
    pub purge_towers: usize,
    pub tower_side_mm: f64,
    /// Tower layers actually printed.
    pub purge_tower_layers: usize,
    pub purge_path_mm: f64,
    /// Tower layers times the dead-volume purge length and bead area.
    pub purge_volume_mm3: f64,
    pub purge_mass_g: f64,
    pub lookahead_mm: f64,
    pub extrusion_mm: f64,
    pub path_length_per_color: BTreeMap<usize, f64>,
    pub stage_seconds: BTreeMap<String, f64>,
}

pub struct SliceOutput {
    pub gcode: String,
    pub plans: Vec<LayerPlan>,
    pub faces: Vec<Vec<ColoredFace>>,
    pub palette: Palette,
    pub offset: Point2,
    pub report: SliceReport,
}

/// Palette for a job: a single uniform color when `colors == 1`, so the
/// output matches an ungraded slice.
pub fn job_palette(design: &Design, colors: usize) -> Result<Palette, StrategyError> {
    if colors == 1 {
        return Ok(build_palette(1, &[DEFAULT_MATERIAL.to_string()])?);
    }
    let materials = design.materials();
    if materials.len() < 2 {
        log::warn!("design has a single material; all {colors} colors collapse to one");
    }
    Ok(build_palette(colors, &materials)?)
}

fn secs(d: Duration) -> f64 {
    d.as_secs_f64()
}

/// Slices `design` for `profile`.
pub fn slice(design: &Design, profile: &MachineProfile, config: &SliceConfig) -> Result<SliceOutput, JobError> {
    profile.validate()?;
    let settings = &config.settings;
    settings.validate().map_err(StrategyError::from)?;
    if config.colors == 0 {
        return Err(JobError::Config("at least one color is required".into()));
    }
    let palette = job_palette(design, config.colors)?;
    let zipper = if config.zipper_beta > 0.0 {
        if config.strategy == StrategyKind::Gradient {
            log::warn!("zippering applies to strategy 1 only; ignored");
            ZipperSpec::disabled()
        } else if palette.kind != PaletteKind::Line || palette.color_count() < 2 {
            log::warn!("zippering needs a two-material palette with several colors; ignored");
            ZipperSpec::disabled()
        } else {
            palette.zipper_bands(config.zipper_beta).map_err(StrategyError::from)?
        }
    } else {
        ZipperSpec::disabled()
    };
    let mut stages: BTreeMap<String, f64> = BTreeMap::new();
    let t0 = Instant::now();
    let (lo, hi) = design.bounds()?;
    let part = BBox2::new(Point2::new(lo.x, lo.y), Point2::new(hi.x, hi.y));
    let offset = bed_offset(part, profile);
    let source = design.geometry_source()?;
    let zs = layer_heights(lo.z, hi.z, settings.layer_height);
    let layers: Vec<(LayerPlan, Vec<ColoredFace>, Duration, Duration)> = zs
        .par_iter()
        .enumerate()
        .map(|(i, &z)| -> Result<_, StrategyError> {
            let t = Instant::now();
            let outline = layer_outline(design, &source, z, settings.resolution())?;
            let faces = layer_faces(design, &outline, z, &palette, &zipper, settings)?;
            let tg = t.elapsed();
            let t = Instant::now();
            let plan = match config.strategy {
                StrategyKind::Sectioned => slice_layer_strategy1(&outline, &faces, i, z, settings, &palette, &zipper, profile)?,
                StrategyKind::Gradient => slice_layer_strategy2(&faces, i, z, settings, &palette, profile, config.fill)?,
            };
            Ok((plan, faces, tg, t.elapsed()))
        })
        .collect::<Result<_, _>>()?;
    stages.insert("layers_wall".into(), secs(t0.elapsed()));
    stages.insert("geometry_cpu".into(), layers.iter().map(|l| secs(l.2)).sum());
    stages.insert("toolpaths_cpu".into(), layers.iter().map(|l| secs(l.3)).sum());
    let mut plans = Vec::with_capacity(layers.len());
    let mut faces = Vec::with_capacity(layers.len());
    for (p, f, _, _) in layers {
        plans.push(p);
        faces.push(f);
    }
    let mut report = SliceReport {
        layers: plans.len(),
        strategy: config.strategy.number(),
        colors: palette.color_count(),
        zipper_beta: zipper.beta,
        regions_per_layer: faces.iter().map(Vec::len).collect(),
        ..SliceReport::default()
    };
    let used: BTreeSet<usize> = plans.iter().flat_map(|p| p.color_sequence()).collect();
    report.colors_used = used.iter().copied().collect();
    let area = capsule_area(settings.layer_height, settings.bead_width)?;

    let t = Instant::now();
    match config.strategy {
        StrategyKind::Sectioned => {
            if matches!(config.lookahead, Lookahead::Distance(_)) {
                log::warn!("look-ahead is not applied with purge towers (strategy 1)");
            }
            let bed_part = BBox2::new(part.min + offset, part.max + offset);
            if let Some(spec) = plan_purge_towers(&report.colors_used, bed_part, profile, settings)? {
                insert_purge_towers(&mut plans, &spec, offset, &palette, profile, config.purge_threshold)?;
                report.purge_towers = spec.towers.len();
                report.tower_side_mm = spec.side;
                let per_layer: Vec<usize> = plans
                    .iter()
                    .map(|p| {
                        let mut n = 0;
                        let mut in_tower = false;
                        for it in &p.items {
                            let purge = matches!(it, crate::strategy::PlanItem::Path { path, .. } if path.role == PathRole::Purge);
                            if purge && !in_tower {
                                n += 1;
                            }
                            in_tower = purge;
                        }
                        n
                    })
                    .collect();
                report.purge_tower_layers = per_layer.iter().sum();
                report.purge_volume_mm3 = report.purge_tower_layers as f64 * spec.purge_length * area;
                report.purge_mass_g = report.purge_volume_mm3 * profile.filament_density;
            }
            stages.insert("purge".into(), secs(t.elapsed()));
        }
        StrategyKind::Gradient => {
            let l = match config.lookahead {
                Lookahead::Off => 0.0,
                Lookahead::Distance(d) => d,
                Lookahead::Auto => match profile.lookahead {
                    Some(l) => l,
                    None => lookahead_distance(profile.melt_volume, settings.layer_height, settings.bead_width)?,
                },
            };
            if l < 0.0 {
                return Err(JobError::Config(format!("look-ahead must be >= 0, got {l}")));
            }
            apply_lookahead(&mut plans, l);
            report.lookahead_mm = l;
            stages.insert("lookahead".into(), secs(t.elapsed()));
        }
    }
    for p in &plans {
        for (path, color) in p.paths() {
            let len = path.length();
            report.extrusion_mm += len;
            if path.role == PathRole::Purge {
                report.purge_path_mm += len;
            } else {
                *report.path_length_per_color.entry(color).or_default() += len;
            }
        }
    }
    let t = Instant::now();
    let gcode = emit_gcode(&plans, profile, settings, offset)?;
    stages.insert("emit".into(), secs(t.elapsed()));
    stages.insert("total".into(), secs(t0.elapsed()));
    report.stage_seconds = stages;
    Ok(SliceOutput { gcode, plans, faces, palette, offset, report })
}

// ---------------------------------------------------------------------------
// Simulation
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SimulationReport {
    pub segments: usize,
    pub layers: usize,
    pub extruded_volume_mm3: f64,
    pub state_changes: usize,
    pub model: String,
    /// Realized transition minus the object's x midpoint on the first layer, mm.
    pub boundary_error_mm: Option<f64>,
    pub note: Option<String>,
}

/// Replays G-code through the chamber model of `profile`.
pub fn simulate_gcode(text: &str, profile: &MachineProfile, bead_width: f64) -> Result<(SimulationReport, Vec<RealizedSegment>), JobError> {
    let ops = read_gcode(text)?;
    let stream = stream_from_gcode(&ops, profile);
    let model = ChamberModel::for_profile(profile);
    let segments = simulate(&stream, model);
    let mut report = SimulationReport {
        segments: segments.len(),
        extruded_volume_mm3: segments.iter().map(|s| s.volume).sum::<f64>() + 0.0,
        state_changes: stream.iter().filter(|s| matches!(s, crate::simulator::StreamItem::State(_))).count(),
        model: format!("{model:?}"),
        ..SimulationReport::default()
    };
    let zs: BTreeSet<i64> = segments.iter().map(|s| (s.z * 1000.0).round() as i64).collect();
    report.layers = zs.len();
    if let Some(&z0) = zs.iter().next() {
        let first: Vec<RealizedSegment> = segments.iter().filter(|s| (s.z * 1000.0).round() as i64 == z0).cloned().collect();
        match pass_midpoint(&first) {
            Some(mid) => match realized_boundary_error(&first, 1, mid, bead_width) {
                Ok(e) => report.boundary_error_mm = Some(e),
                Err(e) => report.note = Some(e.to_string()),
            },
            None => report.note = Some("no passes along y on the first layer".into()),
        }
    }
    Ok((report, segments))
}

/// Per-segment table of commanded and realized compositions as CSV.
pub fn realized_table(segments: &[RealizedSegment]) -> String {
    let width = segments.iter().map(|s| s.realized.len()).max().unwrap_or(0);
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = ["x0", "y0", "x1", "y1", "z", "volume"].iter().map(|s| s.to_string()).collect();
    header.extend((0..width).map(|k| format!("commanded_{k}")));
    header.extend((0..width).map(|k| format!("realized_{k}")));
    w.write_record(&header).expect("in-memory write");
    for s in segments {
        let mut rec = vec![
            format!("{:.3}", s.a.x),
            format!("{:.3}", s.a.y),
            format!("{:.3}", s.b.x),
            format!("{:.3}", s.b.y),
            format!("{:.3}", s.z),
            format!("{:.6}", s.volume),
        ];
        for v in [&s.commanded, &s.realized] {
            rec.extend((0..width).map(|k| format!("{:.6}", v.get(k).copied().unwrap_or(0.0))));
        }
        w.write_record(&rec).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 csv")
}

// ---------------------------------------------------------------------------
// Benchmarks
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct BenchCase {
    pub object: String,
    pub strategy: StrategyKind,
    pub colors: usize,
    pub zipper: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub object: String,
    pub object_size_mm: String,
    pub layers: usize,
    pub strategy: u8,
    pub colors: usize,
    pub zippering: String,
    pub time_s: f64,
}

/// Palette object with the strategy and color sweeps.
pub fn default_suite() -> Vec<BenchCase> {
    let mut cases = Vec::new();
    for n in [4, 8, 12, 16] {
        cases.push(BenchCase { object: "palette".into(), strategy: StrategyKind::Sectioned, colors: n, zipper: false });
    }
    cases.push(BenchCase { object: "palette".into(), strategy: StrategyKind::Sectioned, colors: 16, zipper: true });
    for n in [12, 24, 36, 48] {
        cases.push(BenchCase { object: "palette".into(), strategy: StrategyKind::Gradient, colors: n, zipper: false });
    }
    cases
}

pub fn run_bench(cases: &[BenchCase], profile: &MachineProfile, settings: &PrintSettings) -> Result<Vec<BenchRow>, JobError> {
    let mut rows = Vec::new();
    for case in cases {
        let design = crate::fixtures::by_name(&case.object).ok_or_else(|| JobError::Config(format!("unknown fixture {:?}", case.object)))?;
        let (lo, hi) = design.bounds()?;
        let colors = case.colors.max(1);
        let beta = if case.zipper { 0.5 / colors as f64 } else { 0.0 };
        let config = SliceConfig { settings: settings.clone(), strategy: case.strategy, colors, zipper_beta: beta, ..SliceConfig::default() };
        let t = Instant::now();
        let out = slice(&design, profile, &config)?;
        let time_s = t.elapsed().as_secs_f64();
        let zippering = match (case.strategy, case.zipper) {
            (StrategyKind::Gradient, _) => "NA",
            (_, true) => "yes",
            (_, false) => "no",
        };
        let size = |v: f64| format!("{}", (v * 1000.0).round() / 1000.0);
        rows.push(BenchRow {
            object: case.object.clone(),
            object_size_mm: format!("{} x {} x {}", size(hi.x - lo.x), size(hi.y - lo.y), size(hi.z - lo.z)),
            layers: out.report.layers,
            strategy: case.strategy.number(),
            colors,
            zippering: zippering.into(),
            time_s,
        });
    }
    Ok(rows)
}

pub fn bench_csv(rows: &[BenchRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        let mut r = r.clone();
        r.time_s = (r.time_s * 1000.0).round() / 1000.0;
        w.serialize(r).expect("in-memory write");
    }
    if rows.is_empty() {
        w.write_record(["object", "object_size_mm", "layers", "strategy", "colors", "zippering", "time_s"]).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 csv")
}
