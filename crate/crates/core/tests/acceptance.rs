use std::process::ExitCode;
use std::time::Instant;

use gradslice::arrangement::{build_arrangement, extract_bounded_faces, SNAP_TOL};
use gradslice::contour::Contour;
use gradslice::design::Design;
use gradslice::fixtures;
use gradslice::gcode::{capsule_area, flow_percent, lookahead_distance, read_gcode, GcodeOp};
use gradslice::geom::{Point2, Point3};
use gradslice::job::{job_palette, slice, SliceConfig, StrategyKind};
use gradslice::palette::{build_palette, ZipperSpec};
use gradslice::profile::{FlowMaterial, MachineProfile};
use gradslice::simulator::{calibrate_lookahead, CalibrationObject, ChamberModel};
use gradslice::strategy::{apply_zippering, conventional_paths, layer_faces, layer_heights, layer_outline, slice_layer_strategy1, PlanItem};
use gradslice::toolpath::{clip_paths_to_faces, PathRole, PrintSettings};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn p(x: f64, y: f64) -> Point2 {
    Point2::new(x, y)
}

fn square(c: f64) -> Vec<Point2> {
    vec![p(-c, -c), p(c, -c), p(c, c), p(-c, c)]
}

fn arrangement_fidelity() -> Outcome {
    let t = Instant::now();
    let mut hole = square(3.0);
    hole.reverse();
    let geometry = Contour { polygons: vec![square(10.0), hole], polylines: Vec::new() };
    let material = Contour { polygons: Vec::new(), polylines: vec![vec![p(-12.0, 1.0), p(12.0, 1.0)], vec![p(-12.0, -1.0), p(12.0, -1.0)]] };
    let polys = geometry.to_polygons();
    let arr = build_arrangement(&geometry, &material, SNAP_TOL).map_err(err)?;
    let faces = extract_bounded_faces(&arr, |q| polys.iter().any(|pl| pl.contains(q)));
    let secs = t.elapsed().as_secs_f64();
    ensure(faces.len() == 4 && secs < 1.0, format!("{} bounded faces in {secs:.4} s", faces.len()))
}

fn palette_math() -> Outcome {
    let pal = build_palette(4, &["a".to_string(), "b".to_string()]).map_err(err)?;
    let b = pal.boundaries();
    let m = pal.midpoints();
    ensure(b == [0.25, 0.5, 0.75] && m == [0.125, 0.375, 0.625, 0.875], format!("boundaries {b:?}, midpoints {m:?}"))
}

fn capsule_math() -> Outcome {
    let a = capsule_area(0.2, 0.4).map_err(err)?;
    let oracle = 0.04 + std::f64::consts::PI * 0.01;
    let mut exact = true;
    for v in [1.0, 68.56, 120.0, 1e-3] {
        exact &= lookahead_distance(v, 0.2, 0.4).map_err(err)? == v / a;
    }
    ensure((a - oracle).abs() <= 1e-12 && exact, format!("area {a:.15} vs {oracle:.15}, L = V/A exact: {exact}"))
}

fn flow_polynomials() -> Outcome {
    let oracle = |t: f64| 100.0 * (((8.35479e-6 * t - 5.37075e-3) * t + 1.13374) * t - 77.814);
    let mut worst = 0.0f64;
    for t in [190.0, 225.0] {
        let f = flow_percent(t, FlowMaterial::Pla).map_err(err)?;
        worst = worst.max(((f - oracle(t)) / oracle(t)).abs());
    }
    let mut monotone = true;
    let mut prev = f64::INFINITY;
    for k in 0..=350 {
        let f = flow_percent(190.0 + k as f64 * 0.1, FlowMaterial::Pla).map_err(err)?;
        monotone &= f < prev;
        prev = f;
    }
    let (lo, hi) = (flow_percent(190.0, FlowMaterial::Pla).map_err(err)?, flow_percent(225.0, FlowMaterial::Pla).map_err(err)?);
    ensure(worst <= 1e-9 && monotone, format!("PLA 190 -> {lo:.4} %, 225 -> {hi:.4} %, rel err {worst:.1e}, decreasing: {monotone}"))
}

fn calibration_profile() -> MachineProfile {
    MachineProfile { melt_volume: 68.56, ..MachineProfile::mixing() }
}

fn dead_volume() -> Outcome {
    let t = Instant::now();
    let settings = PrintSettings::default();
    let profile = calibration_profile();
    let model = ChamberModel::PlugFlow { volume: profile.melt_volume };
    let object = CalibrationObject::default();
    let l = lookahead_distance(profile.melt_volume, settings.layer_height, settings.bead_width).map_err(err)?;
    let e0 = object.boundary_error(&settings, &profile, model, 0.0).map_err(err)?;
    let recovered = e0 / settings.bead_width * object.length_y;
    let e1 = object.boundary_error(&settings, &profile, model, l).map_err(err)?;
    let secs = t.elapsed().as_secs_f64();
    ensure(
        e0 > 0.0 && (recovered - l).abs() <= object.length_y && e1.abs() < settings.bead_width && secs < 10.0,
        format!("L = {l:.2} mm, uncompensated {e0:.3} mm -> L {recovered:.1} mm, compensated {e1:.3} mm, {secs:.2} s"),
    )
}

fn calibration_loop() -> Outcome {
    let t = Instant::now();
    let settings = PrintSettings::default();
    let profile = calibration_profile();
    let object = CalibrationObject::default();
    let l = lookahead_distance(profile.melt_volume, settings.layer_height, settings.bead_width).map_err(err)?;
    let cal = calibrate_lookahead(&object, &settings, &profile, ChamberModel::PlugFlow { volume: profile.melt_volume }, 5).map_err(err)?;
    let secs = t.elapsed().as_secs_f64();
    ensure(
        cal.iterations <= 5 && (cal.lookahead - l).abs() <= object.length_y && secs < 30.0,
        format!("L {:.1} mm after {} iterations (analytic {l:.2}), errors {:?}, {secs:.2} s", cal.lookahead, cal.iterations, cal.errors),
    )
}

fn zippering() -> Outcome {
    let design = fixtures::dog_bone_design();
    let profile = MachineProfile::mixing();
    let base = SliceConfig { colors: 4, ..SliceConfig::default() };
    let plain = slice(&design, &profile, &base).map_err(err)?;
    let zero = slice(&design, &profile, &SliceConfig { zipper_beta: 0.0, ..base.clone() }).map_err(err)?;
    let identical = plain.gcode == zero.gcode;

    let settings = PrintSettings::default();
    let palette = job_palette(&design, 4).map_err(err)?;
    let zipper = palette.zipper_bands(0.1).map_err(err)?;
    let empty_bands = palette.zipper_bands(0.0).map_err(err)?;
    let source = design.geometry_source().map_err(err)?;
    let (mut band_paths, mut alternating) = (0usize, 0usize);
    let mut noop = true;
    for (i, z) in layer_heights(0.0, 1.6, settings.layer_height).into_iter().enumerate() {
        let outline = layer_outline(&design, &source, z, settings.resolution()).map_err(err)?;
        let off = ZipperSpec::disabled();
        let faces_off = layer_faces(&design, &outline, z, &palette, &off, &settings).map_err(err)?;
        let faces_zero = layer_faces(&design, &outline, z, &palette, &empty_bands, &settings).map_err(err)?;
        let plan_off = slice_layer_strategy1(&outline, &faces_off, i, z, &settings, &palette, &off, &profile).map_err(err)?;
        let plan_zero = slice_layer_strategy1(&outline, &faces_zero, i, z, &settings, &palette, &empty_bands, &profile).map_err(err)?;
        noop &= plan_off == plan_zero;
        let faces = layer_faces(&design, &outline, z, &palette, &zipper, &settings).map_err(err)?;
        let labeled = clip_paths_to_faces(&conventional_paths(&outline, &settings, i), &faces, settings.min_segment_length).map_err(err)?;
        noop &= apply_zippering(labeled.clone(), &ZipperSpec::disabled(), &palette) == labeled;
        let out = apply_zippering(labeled, &zipper, &palette);
        for k in 0..palette.color_count() {
            for (j, lp) in out.iter().filter(|lp| lp.band == Some(k)).enumerate() {
                band_paths += 1;
                if lp.color == k + j % 2 {
                    alternating += 1;
                }
            }
        }
    }
    ensure(
        identical && noop && band_paths > 0 && alternating == band_paths,
        format!("beta 0 identical: {}, alternation {alternating}/{band_paths} band paths", identical && noop),
    )
}

fn strategy_invariants() -> Outcome {
    let profile = MachineProfile::mixing();
    let design = fixtures::dog_bone_design();
    let s1 = slice(&design, &profile, &SliceConfig { colors: 4, ..SliceConfig::default() }).map_err(err)?;
    let mut ordered = true;
    for plan in &s1.plans {
        let mut seq: Vec<usize> = Vec::new();
        for it in &plan.items {
            if let PlanItem::Path { path, color } = it {
                if path.role != PathRole::Purge && seq.last() != Some(color) {
                    seq.push(*color);
                }
            }
        }
        let mut want = seq.clone();
        want.sort_unstable();
        want.dedup();
        if plan.index % 2 == 1 {
            want.reverse();
        }
        ordered &= seq == want && !seq.is_empty();
    }

    let plate = fixtures::xy_plate_design(60.0, 0.4);
    let s2 = slice(&plate, &profile, &SliceConfig { strategy: StrategyKind::Gradient, colors: 12, ..SliceConfig::default() }).map_err(err)?;
    let purge_paths: usize = s2.plans.iter().map(|p| p.purge_path_count()).sum();
    let outline_area = 60.0 * 60.0;
    let mut worst = 0.0f64;
    for faces in &s2.faces {
        let covered: f64 = faces.iter().map(|f| f.polygon.area()).sum();
        worst = worst.max((covered - outline_area).abs() / outline_area);
    }
    ensure(
        ordered && s2.report.purge_towers == 0 && purge_paths == 0 && worst <= 0.005,
        format!(
            "strategy 1 order monotone/reversed on {} layers: {ordered}; strategy 2 towers {}, face coverage error {:.4} %",
            s1.plans.len(),
            s2.report.purge_towers,
            worst * 100.0
        ),
    )
}

fn conservation() -> Outcome {
    let profile = MachineProfile::mixing();
    let out = slice(&fixtures::dog_bone_design(), &profile, &SliceConfig { colors: 4, ..SliceConfig::default() }).map_err(err)?;
    let ops = read_gcode(&out.gcode).map_err(err)?;
    let emitted: f64 = ops.iter().map(|op| if let GcodeOp::Extrude { e, .. } = op { *e } else { 0.0 }).sum();
    let length: f64 = out.plans.iter().map(|p| p.extrusion_length()).sum();
    let expected = length * capsule_area(0.2, 0.4).map_err(err)? / profile.filament_area();
    let rel = (emitted - expected).abs() / expected;
    ensure(rel <= 1e-6, format!("E {emitted:.5} mm vs {expected:.5} mm, rel {rel:.2e}"))
}

fn max_gradient(design: &Design, side: f64, z: f64) -> Result<f64, String> {
    let pal = build_palette(2, &design.materials()).map_err(err)?;
    let g = |x: f64, y: f64| -> Result<f64, String> { Ok(pal.gradient_coordinate(&design.eval_fractions(Point3::new(x, y, z)).map_err(err)?)) };
    let (h, steps) = (1e-4, 200);
    let mut worst = 0.0f64;
    for i in 0..=steps {
        for j in 0..=steps {
            let x = -side / 2.0 + side * i as f64 / steps as f64;
            let y = -side / 2.0 + side * j as f64 / steps as f64;
            let gx = (g(x + h, y)? - g(x - h, y)?) / (2.0 * h);
            let gy = (g(x, y + h)? - g(x, y - h)?) / (2.0 * h);
            worst = worst.max(gx.hypot(gy));
        }
    }
    Ok(worst)
}

fn quantization() -> Outcome {
    let side = 100.0;
    let design = fixtures::xy_plate_design(side, 0.2);
    let profile = MachineProfile::mixing();
    let settings = PrintSettings::default();
    let sampling = 2.0 * settings.resolution() * max_gradient(&design, side, 0.1)?;
    let mut lines = Vec::new();
    let mut ok = true;
    let mut prev = f64::INFINITY;
    for n in [4usize, 8, 16, 48] {
        let config = SliceConfig { settings: settings.clone(), strategy: StrategyKind::Gradient, colors: n, ..SliceConfig::default() };
        let out = slice(&design, &profile, &config).map_err(err)?;
        let mut worst = 0.0f64;
        for plan in &out.plans {
            for (path, color) in plan.paths() {
                let commanded = out.palette.midpoint(color);
                let pts = path.polyline();
                for w in pts.windows(2) {
                    let m = w[0].lerp(w[1], 0.5);
                    let f = design.eval_fractions(Point3::new(m.x, m.y, plan.z)).map_err(err)?;
                    worst = worst.max((commanded - out.palette.gradient_coordinate(&f)).abs());
                }
            }
        }
        let bound = out.palette.alpha() / 2.0 + sampling;
        ok &= worst <= bound && worst < prev;
        prev = worst;
        lines.push(format!("N={n}: {worst:.4} <= {bound:.4}"));
    }
    ensure(ok, lines.join(", "))
}

fn performance() -> Outcome {
    let design = fixtures::palette_design();
    let profile = MachineProfile::mixing();
    let t = Instant::now();
    let s1 = slice(&design, &profile, &SliceConfig { colors: 16, ..SliceConfig::default() }).map_err(err)?;
    let t1 = t.elapsed().as_secs_f64();
    let t = Instant::now();
    let s2 = slice(&design, &profile, &SliceConfig { strategy: StrategyKind::Gradient, colors: 48, ..SliceConfig::default() }).map_err(err)?;
    let t2 = t.elapsed().as_secs_f64();
    ensure(
        t1 <= 99.0 && t2 <= 424.0 && s1.report.layers == 10 && s1.report.purge_towers == 16 && s1.report.purge_tower_layers == 160 && s2.report.purge_towers == 0,
        format!(
            "strategy 1 N=16 {t1:.1} s ({} towers on {} layers), strategy 2 N=48 {t2:.1} s ({} towers)",
            s1.report.purge_towers, s1.report.layers, s2.report.purge_towers
        ),
    )
}

fn determinism() -> Outcome {
    let design = fixtures::benchy_design(25.0);
    let profile = MachineProfile::mixing();
    let config = SliceConfig { colors: 4, ..SliceConfig::default() };
    let a = slice(&design, &profile, &config).map_err(err)?.gcode;
    let b = slice(&fixtures::benchy_design(25.0), &profile, &config).map_err(err)?.gcode;
    ensure(a == b && !a.is_empty(), format!("{} bytes, identical: {}", a.len(), a == b))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 12] = [
        ("arrangement fidelity", arrangement_fidelity),
        ("palette math", palette_math),
        ("capsule and look-ahead math", capsule_math),
        ("flow polynomials", flow_polynomials),
        ("dead-volume compensation", dead_volume),
        ("calibration loop", calibration_loop),
        ("zippering", zippering),
        ("strategy invariants", strategy_invariants),
        ("conservation", conservation),
        ("quantization", quantization),
        ("performance", performance),
        ("determinism", determinism),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let id = (k + 1).to_string();
        if !filter.is_empty() && !filter.iter().any(|f| *f == id || name.contains(f.as_str())) {
            continue;
        }
        match check() {
            Ok(detail) => println!("PASS {id:>2} {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {id:>2} {name}: {detail}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
