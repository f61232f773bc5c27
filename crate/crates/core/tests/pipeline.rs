use gradslice::design::parse_design;
use gradslice::fixtures;
use gradslice::gcode::{capsule_area, read_gcode, GcodeOp};
use gradslice::geom::{Point2, Point3};
use gradslice::job::{simulate_gcode, slice, Lookahead, SliceConfig, StrategyKind};
use gradslice::mesh::TriangleMesh;
use gradslice::palette::{build_palette, CommandState};
use gradslice::profile::{MachineProfile, Syntax};
use gradslice::strategy::FillPattern;
use gradslice::toolpath::{PathRole, PrintSettings};
use proptest::prelude::*;

fn small_plate() -> gradslice::design::Design {
    parse_design("fgrade([\"0.5 + x/40\", \"0.5 - x/40\"], [\"blue\", \"yellow\"]) { rectprism(20, 10, 0.4); }").unwrap()
}

#[test]
fn gcode_round_trips_through_reader() {
    let profile = MachineProfile::mixing();
    let out = slice(&small_plate(), &profile, &SliceConfig::default()).unwrap();
    let ops = read_gcode(&out.gcode).unwrap();
    let layers = ops.iter().filter(|o| matches!(o, GcodeOp::Layer(_))).count();
    assert_eq!(layers, 2);
    let states = ops.iter().filter(|o| matches!(o, GcodeOp::State(CommandState::Mix(_)))).count();
    let planned: usize = out.plans.iter().map(|p| p.color_sequence().len()).sum();
    assert_eq!(states, planned);
    let bed = (profile.bed_size.0 / 2.0, profile.bed_size.1 / 2.0);
    for op in &ops {
        if let GcodeOp::Extrude { to, z, .. } = op {
            assert!(to.x > 0.0 && to.x < profile.bed_size.0 && to.y > 0.0 && to.y < profile.bed_size.1);
            assert!(*z > 0.0 && *z <= 0.4 + 1e-9);
        }
    }
    assert_eq!(out.offset, Point2::new(bed.0, bed.1));
}

#[test]
fn mesh_designs_load_next_to_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let square = [Point2::new(-5.0, -5.0), Point2::new(5.0, -5.0), Point2::new(5.0, 5.0), Point2::new(-5.0, 5.0)];
    TriangleMesh::extrude(&square, 0.0, 0.6).write_stl(&dir.path().join("block.stl")).unwrap();
    let mut design = parse_design("fgrade([\"0.5 + x/10\", \"0.5 - x/10\"], [\"a\", \"b\"]) { mesh(\"block.stl\"); }").unwrap();
    assert!(slice(&design, &MachineProfile::mixing(), &SliceConfig::default()).is_err());
    design.load_meshes(dir.path()).unwrap();
    let out = slice(&design, &MachineProfile::mixing(), &SliceConfig::default()).unwrap();
    assert_eq!(out.report.layers, 3);
    assert_eq!(out.report.colors_used, vec![0, 1, 2, 3]);
}

#[test]
fn profile_variants_emit_their_syntax() {
    let design = small_plate();
    let config = SliceConfig { colors: 3, ..SliceConfig::default() };
    let tools = slice(&design, &MachineProfile::multitool(), &config).unwrap();
    assert!(tools.gcode.lines().any(|l| l == "T2"));
    assert!(!tools.gcode.contains("M165"));
    let temp = slice(&design, &MachineProfile::temperature(), &config).unwrap();
    assert!(temp.gcode.lines().any(|l| l.starts_with("M104 S") && l != "M104 S0"));
    let text = "syntax = \"multitool\"\ntool_count = 3\nmelt_volume = 0.0\n";
    let profile = MachineProfile::from_toml(text).unwrap();
    assert_eq!(profile.syntax, Syntax::Multitool);
    assert!(MachineProfile::from_toml("no_such_key = 1\n").is_err());
}

#[test]
fn gradient_strategy_lookahead_moves_states_earlier() {
    let design = small_plate();
    let profile = MachineProfile::mixing();
    let base = SliceConfig { strategy: StrategyKind::Gradient, fill: FillPattern::Rectilinear, lookahead: Lookahead::Off, ..SliceConfig::default() };
    let off = slice(&design, &profile, &base).unwrap();
    let on = slice(&design, &profile, &SliceConfig { lookahead: Lookahead::Distance(25.0), ..base }).unwrap();
    assert_eq!(off.report.purge_towers, 0);
    assert!((off.report.extrusion_mm - on.report.extrusion_mm).abs() < 1e-6);
    let first_switch = |s: &str| s.lines().position(|l| l.starts_with("M165")).unwrap();
    let second = |s: &str| s.lines().enumerate().filter(|(_, l)| l.starts_with("M165")).nth(1).map(|(i, _)| i).unwrap();
    assert_eq!(first_switch(&off.gcode), first_switch(&on.gcode));
    assert!(second(&on.gcode) < second(&off.gcode));
}

#[test]
fn simulated_calibration_print_shows_the_lag() {
    let profile = MachineProfile::mixing();
    let design = fixtures::by_name("calibration").unwrap();
    let settings = PrintSettings { infill_angle: -90.0, ..PrintSettings::default() };
    let config = SliceConfig {
        settings,
        strategy: StrategyKind::Gradient,
        colors: 2,
        fill: FillPattern::Rectilinear,
        lookahead: Lookahead::Off,
        ..SliceConfig::default()
    };
    let raw = slice(&design, &profile, &config).unwrap();
    let (report, segments) = simulate_gcode(&raw.gcode, &profile, 0.4).unwrap();
    assert_eq!(report.layers, 1);
    assert!((report.boundary_error_mm.unwrap() - 6.4).abs() < 1e-6);
    assert!(segments.iter().all(|s| (s.realized.iter().sum::<f64>() - 1.0).abs() < 1e-9));

    let comp = slice(&design, &profile, &SliceConfig { lookahead: Lookahead::Auto, ..config }).unwrap();
    let (report, _) = simulate_gcode(&comp.gcode, &profile, 0.4).unwrap();
    assert!(report.boundary_error_mm.unwrap().abs() < 0.4);
}

#[test]
fn purge_mass_follows_tower_count() {
    let profile = MachineProfile::mixing();
    let out = slice(&fixtures::dog_bone_design(), &profile, &SliceConfig::default()).unwrap();
    let r = &out.report;
    let area = capsule_area(0.2, 0.4).unwrap();
    let purge_length = profile.melt_volume / area;
    assert_eq!(r.purge_tower_layers, 32);
    assert!((r.purge_volume_mm3 - r.purge_tower_layers as f64 * purge_length * area).abs() < 1e-6 * r.purge_volume_mm3);
    assert!((r.purge_mass_g - r.purge_volume_mm3 * profile.filament_density).abs() < 1e-12);
    let purge_paths: f64 = out.plans.iter().flat_map(|p| p.paths()).filter(|(p, _)| p.role == PathRole::Purge).map(|(p, _)| p.length()).sum();
    assert!((purge_paths - r.purge_path_mm).abs() < 1e-6);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn classified_color_contains_the_fraction(n in 1usize..64, g in 0.0f64..=1.0) {
        let palette = build_palette(n, &["a".to_string(), "b".to_string()]).unwrap();
        let k = palette.interval_of(g);
        prop_assert!(k < n);
        prop_assert!((palette.midpoint(k) - g).abs() <= palette.alpha() / 2.0 + 1e-12);
    }

    #[test]
    fn fractions_are_a_partition(x in -30.0f64..30.0, y in -15.0f64..15.0, z in 0.0f64..48.0, alpha in 5.0f64..50.0) {
        let design = fixtures::benchy_design(alpha);
        let f = design.eval_fractions(Point3::new(x, y, z)).unwrap();
        prop_assert!((f.sum() - 1.0).abs() < 1e-12);
        prop_assert!(f.get("yellow") >= 0.0 && f.get("blue") >= 0.0);
    }
}
