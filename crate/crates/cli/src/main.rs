use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use gradslice::design::Design;
use gradslice::fixtures;
use gradslice::geom::Point2;
use gradslice::job::{
    bench_csv, default_suite, realized_table, run_bench, simulate_gcode, slice, JobError, Lookahead, SliceConfig, StrategyKind,
};
use gradslice::profile::MachineProfile;
use gradslice::strategy::{FillPattern, LayerPlan};
use gradslice::svg::{emit_layer_svg, faces_svg, SvgMode};
use gradslice::toolpath::PrintSettings;

#[derive(Parser)]
#[command(name = "gradslice", version, about = "Slicer for functionally graded multi-material prints")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Slice a design to G-code.
    Slice(SliceArgs),
    /// Replay G-code through the melt chamber model.
    Simulate(SimulateArgs),
    /// Time the benchmark suite.
    Bench(BenchArgs),
    /// Write face and toolpath SVGs without G-code.
    Preview(PreviewArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Fill {
    Concentric,
    Rectilinear,
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct LookaheadArg(Lookahead);

impl FromStr for LookaheadArg {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "auto" => Ok(Self(Lookahead::Auto)),
            "off" => Ok(Self(Lookahead::Off)),
            _ => match s.parse::<f64>() {
                Ok(v) if v.is_finite() && v >= 0.0 => Ok(Self(Lookahead::Distance(v))),
                _ => Err(format!("expected a distance in mm, `auto` or `off`, got {s:?}")),
            },
        }
    }
}

#[derive(Args)]
struct JobArgs {
    /// Design file, or `fixture:NAME`.
    design: String,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(1..=2))]
    strategy: u8,
    #[arg(long, default_value_t = 4)]
    colors: usize,
    /// Zipper overlap in percent of the gradient range.
    #[arg(long, default_value_t = 0.0)]
    zipper_beta: f64,
    #[arg(long)]
    layer_height: Option<f64>,
    #[arg(long)]
    bead_width: Option<f64>,
    #[arg(long)]
    resolution: Option<f64>,
    #[arg(long)]
    profile: Option<PathBuf>,
    /// Look-ahead in mm, `auto` or `off`.
    #[arg(long, default_value = "auto")]
    lookahead: LookaheadArg,
    #[arg(long, value_enum, default_value_t = Fill::Concentric)]
    fill: Fill,
    #[arg(long)]
    perimeters: Option<usize>,
    #[arg(long)]
    infill_density: Option<f64>,
    #[arg(long)]
    infill_angle: Option<f64>,
    /// Midpoint change below which tower purges are skipped.
    #[arg(long, default_value_t = 0.0)]
    purge_threshold: f64,
    #[arg(long)]
    svg: Option<PathBuf>,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct SliceArgs {
    #[command(flatten)]
    job: JobArgs,
    /// Defaults to the design name with a `.gcode` extension.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct PreviewArgs {
    #[command(flatten)]
    job: JobArgs,
}

#[derive(Args)]
struct SimulateArgs {
    gcode: PathBuf,
    #[arg(long)]
    profile: Option<PathBuf>,
    #[arg(long, default_value_t = 0.4)]
    bead_width: f64,
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long)]
    svg: Option<PathBuf>,
    /// Per-segment CSV of commanded and realized compositions.
    #[arg(long)]
    table: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    profile: Option<PathBuf>,
    /// CSV output; printed to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn read(path: &Path) -> Result<String, JobError> {
    fs::read_to_string(path).map_err(|source| JobError::Read { path: path.display().to_string(), source })
}

fn write(path: &Path, data: &str) -> Result<(), JobError> {
    fs::write(path, data).map_err(|source| JobError::Write { path: path.display().to_string(), source })
}

fn create_dir(path: &Path) -> Result<(), JobError> {
    fs::create_dir_all(path).map_err(|source| JobError::Write { path: path.display().to_string(), source })
}

fn load_profile(path: Option<&Path>) -> Result<MachineProfile, JobError> {
    match path {
        Some(p) => Ok(MachineProfile::from_toml(&read(p)?)?),
        None => Ok(MachineProfile::default()),
    }
}

fn load_design(arg: &str) -> Result<Design, JobError> {
    if let Some(name) = arg.strip_prefix("fixture:") {
        return fixtures::by_name(name)
            .ok_or_else(|| JobError::Config(format!("unknown fixture {name:?}; known: {}", fixtures::NAMES.join(", "))));
    }
    let path = Path::new(arg);
    let mut design = Design::parse(&read(path)?)?;
    design.load_meshes(path.parent().unwrap_or(Path::new(".")))?;
    Ok(design)
}

fn job_config(args: &JobArgs) -> Result<SliceConfig, JobError> {
    let mut settings = PrintSettings::default();
    if let Some(h) = args.layer_height {
        settings.layer_height = h;
    }
    if let Some(w) = args.bead_width {
        settings.bead_width = w;
    }
    if let Some(n) = args.perimeters {
        settings.perimeter_count = n;
    }
    if let Some(d) = args.infill_density {
        settings.infill_density = d;
    }
    if let Some(a) = args.infill_angle {
        settings.infill_angle = a;
    }
    settings.resolution = args.resolution;
    if !(0.0..=100.0).contains(&args.zipper_beta) {
        return Err(JobError::Config(format!("--zipper-beta must be in [0, 100], got {}", args.zipper_beta)));
    }
    Ok(SliceConfig {
        settings,
        strategy: StrategyKind::from_number(args.strategy).ok_or_else(|| JobError::Config("strategy must be 1 or 2".into()))?,
        colors: args.colors,
        zipper_beta: args.zipper_beta / 100.0,
        fill: match args.fill {
            Fill::Concentric => FillPattern::Concentric,
            Fill::Rectilinear => FillPattern::Rectilinear,
        },
        purge_threshold: args.purge_threshold,
        lookahead: args.lookahead.0,
    })
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), JobError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| JobError::Config(e.to_string()))?;
    write(path, &(text + "\n"))
}

fn write_layer_svgs(dir: &Path, plans: &[LayerPlan], profile: &MachineProfile, w: f64, offset: Point2) -> Result<(), JobError> {
    create_dir(dir)?;
    for p in plans {
        let svg = emit_layer_svg(p, profile, w, offset, SvgMode::Commanded);
        write(&dir.join(format!("layer_{:04}.svg", p.index)), &svg)?;
    }
    Ok(())
}

fn cmd_slice(args: SliceArgs) -> Result<(), JobError> {
    let profile = load_profile(args.job.profile.as_deref())?;
    let config = job_config(&args.job)?;
    let design = load_design(&args.job.design)?;
    let out = slice(&design, &profile, &config)?;
    let output = args.output.unwrap_or_else(|| {
        let stem = args.job.design.strip_prefix("fixture:").unwrap_or(&args.job.design);
        Path::new(stem).with_extension("gcode")
    });
    write(&output, &out.gcode)?;
    if let Some(dir) = &args.job.svg {
        write_layer_svgs(dir, &out.plans, &profile, config.settings.bead_width, out.offset)?;
    }
    if let Some(r) = &args.job.report {
        write_json(r, &out.report)?;
    }
    log::info!(
        "{} layers, {} towers, {:.1} s -> {}",
        out.report.layers,
        out.report.purge_towers,
        out.report.stage_seconds.get("total").copied().unwrap_or(0.0),
        output.display()
    );
    Ok(())
}

fn cmd_preview(args: PreviewArgs) -> Result<(), JobError> {
    let profile = load_profile(args.job.profile.as_deref())?;
    let config = job_config(&args.job)?;
    let design = load_design(&args.job.design)?;
    let out = slice(&design, &profile, &config)?;
    let dir = args.job.svg.clone().unwrap_or_else(|| PathBuf::from("preview"));
    write_layer_svgs(&dir, &out.plans, &profile, config.settings.bead_width, out.offset)?;
    for (k, faces) in out.faces.iter().enumerate() {
        write(&dir.join(format!("faces_{k:04}.svg")), &faces_svg(faces, &out.palette, &profile, out.offset))?;
    }
    if let Some(r) = &args.job.report {
        write_json(r, &out.report)?;
    }
    Ok(())
}

fn cmd_simulate(args: SimulateArgs) -> Result<(), JobError> {
    let profile = load_profile(args.profile.as_deref())?;
    let text = read(&args.gcode)?;
    let (report, segments) = simulate_gcode(&text, &profile, args.bead_width)?;
    match &args.report {
        Some(r) => write_json(r, &report)?,
        None => println!("{}", serde_json::to_string_pretty(&report).map_err(|e| JobError::Config(e.to_string()))?),
    }
    if let Some(t) = &args.table {
        write(t, &realized_table(&segments))?;
    }
    if let Some(dir) = &args.svg {
        create_dir(dir)?;
        let mut by_layer: BTreeMap<i64, Vec<_>> = BTreeMap::new();
        for s in segments {
            by_layer.entry((s.z * 1000.0).round() as i64).or_default().push(s);
        }
        let empty = LayerPlan::new(0, 0.0);
        for (k, segs) in by_layer.values().enumerate() {
            let svg = emit_layer_svg(&empty, &profile, args.bead_width, Point2::new(0.0, 0.0), SvgMode::Simulated(segs));
            write(&dir.join(format!("realized_{k:04}.svg")), &svg)?;
        }
    }
    Ok(())
}

fn cmd_bench(args: BenchArgs) -> Result<(), JobError> {
    let profile = load_profile(args.profile.as_deref())?;
    let rows = run_bench(&default_suite(), &profile, &PrintSettings::default())?;
    let csv = bench_csv(&rows);
    match &args.out {
        Some(p) => write(p, &csv),
        None => {
            print!("{csv}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Slice(a) => cmd_slice(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Preview(a) => cmd_preview(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
