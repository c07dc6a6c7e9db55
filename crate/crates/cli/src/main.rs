//! Command-line front end for the on-vehicle UWB localization experiments
//! and the virtual pedestrian traffic light simulator.
//!
//! Every experiment writes plain CSV (or a line-oriented event log) so runs
//! can be diffed; every subcommand that takes a `--seed` is bit-reproducible.

use clap::{Args, Parser, Subcommand};
use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use vptl_core::geometry::{coverage, triangulate, AnchorLayout, CoverageStatus, Point, RangePair};
use vptl_core::ranging::{error_profile, ErrorProfile, NoiseModel};
use vptl_core::stats::linear_fit;
use vptl_core::tracking::run_side_test;
use vptl_core::vptl::{run_scenario, IntersectionScenario};

#[derive(Parser)]
#[command(
    name = "vptl",
    version,
    about = "Vehicle-mounted two-anchor UWB localization experiments and VPTL simulation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Triangulate one range pair and print the tag position.
    Triangulate(TriangulateArgs),
    /// Run the localization error profile over a distance grid and write it
    /// as CSV.
    ErrorProfile(ErrorProfileArgs),
    /// Rasterize the anchor coverage status over a grid and write it as CSV.
    CoverageMap(CoverageMapArgs),
    /// Measure and classify point clouds on both sides of the vehicle.
    SideTest(SideTestArgs),
    /// Run a scripted intersection scenario and write the event log and
    /// phase timeline.
    VptlSim(VptlSimArgs),
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct TriangulateArgs {
    /// Distance to the left anchor (meters).
    #[arg(long)]
    r1: f64,
    /// Distance to the right anchor (meters).
    #[arg(long)]
    r2: f64,
    /// Anchor-to-anchor distance (meters).
    #[arg(long, default_value_t = 1.85)]
    baseline: f64,
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct ErrorProfileArgs {
    /// Per-component ranging noise (meters).
    #[arg(long = "sigma-e", default_value_t = 0.0185)]
    sigma_e: f64,
    /// Constant ranging bias (meters).
    #[arg(long, default_value_t = 0.0)]
    bias: f64,
    /// Measurements per distance.
    #[arg(long, default_value_t = 200)]
    n: usize,
    #[arg(long, default_value_t = 67)]
    seed: u64,
    /// Distance grid (meters).
    #[arg(
        long,
        alias = "distance",
        value_delimiter = ',',
        default_values_t = ErrorProfile::DEFAULT_DISTANCES
    )]
    distances: Vec<f64>,
    /// Anchor-to-anchor distance (meters).
    #[arg(long, default_value_t = 1.85)]
    baseline: f64,
    #[arg(long, default_value = "error_profile.csv")]
    output: PathBuf,
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct CoverageMapArgs {
    #[arg(long = "x-min", default_value_t = -60.0)]
    x_min: f64,
    #[arg(long = "x-max", default_value_t = 60.0)]
    x_max: f64,
    #[arg(long = "y-min", default_value_t = -60.0)]
    y_min: f64,
    #[arg(long = "y-max", default_value_t = 60.0)]
    y_max: f64,
    /// Grid spacing (meters).
    #[arg(long, default_value_t = 1.0)]
    step: f64,
    /// Anchor-to-anchor distance (meters).
    #[arg(long, default_value_t = 1.85)]
    baseline: f64,
    /// Front sector range (meters).
    #[arg(long = "front-range", default_value_t = 50.0)]
    front_range: f64,
    /// Front sector half-angle (degrees off forward).
    #[arg(long = "front-halfangle", default_value_t = 60.0)]
    front_halfangle: f64,
    /// Start of the single-anchor occlusion band (degrees).
    #[arg(long = "occlusion-start", default_value_t = 60.0)]
    occlusion_start: f64,
    /// End of the single-anchor occlusion band (degrees).
    #[arg(long = "occlusion-end", default_value_t = 90.0)]
    occlusion_end: f64,
    /// All-around close range (meters).
    #[arg(long = "side-range", default_value_t = 5.0)]
    side_range: f64,
    #[arg(long, default_value = "coverage_map.csv")]
    output: PathBuf,
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct SideTestArgs {
    /// Lateral offset of the tag on each side (meters).
    #[arg(long, default_value_t = 5.0)]
    lateral: f64,
    /// Forward distances to test (meters).
    #[arg(
        long,
        alias = "distance",
        value_delimiter = ',',
        default_values_t = vec![10.0, 20.0, 30.0]
    )]
    distances: Vec<f64>,
    /// Per-component ranging noise (meters).
    #[arg(long = "sigma-e", default_value_t = 0.0185)]
    sigma_e: f64,
    /// Measurements per side and distance.
    #[arg(long, default_value_t = 200)]
    n: usize,
    #[arg(long, default_value_t = 67)]
    seed: u64,
    /// Confidence required to call a side.
    #[arg(long = "min-confidence", default_value_t = 0.999)]
    min_confidence: f64,
    /// Anchor-to-anchor distance (meters).
    #[arg(long, default_value_t = 1.85)]
    baseline: f64,
    #[arg(long, default_value = "side_test.csv")]
    output: PathBuf,
}

#[derive(Args)]
struct VptlSimArgs {
    /// Scenario description (TOML).
    scenario: PathBuf,
    /// Event log path.
    #[arg(long, default_value = "vptl_events.log")]
    output: PathBuf,
    /// Phase timeline CSV path.
    #[arg(long, default_value = "vptl_phases.csv")]
    timeline: PathBuf,
}

enum CliError {
    /// Invalid inputs or infeasible computation: exit status 2.
    Domain(String),
    /// Filesystem trouble: exit status 1.
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Domain(_) => ExitCode::from(2),
            CliError::Io(_) => ExitCode::from(1),
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Domain(m) | CliError::Io(m) => m,
        }
    }
}

fn write_file(path: &PathBuf, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents)
        .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}

fn layout_from_baseline(baseline: f64) -> Result<AnchorLayout, CliError> {
    let layout = AnchorLayout::with_baseline(baseline);
    layout
        .validate()
        .map_err(|e| CliError::Domain(e.to_string()))?;
    Ok(layout)
}

fn cmd_triangulate(args: &TriangulateArgs) -> Result<(), CliError> {
    let layout = layout_from_baseline(args.baseline)?;
    let pos = triangulate(&layout, &RangePair::new(args.r1, args.r2))
        .map_err(|e| CliError::Domain(e.to_string()))?;
    println!("x_k={:.6} y_k={:.6}", pos.x, pos.y);
    Ok(())
}

fn cmd_error_profile(args: &ErrorProfileArgs) -> Result<(), CliError> {
    let layout = layout_from_baseline(args.baseline)?;
    if args.n == 0 {
        return Err(CliError::Domain("n must be at least 1".into()));
    }
    if args.sigma_e < 0.0 {
        return Err(CliError::Domain("sigma-e must not be negative".into()));
    }
    let noise = NoiseModel::new(args.sigma_e, args.bias);
    let profile = error_profile(&layout, &args.distances, args.n, &noise, args.seed)
        .map_err(|e| CliError::Domain(e.to_string()))?;
    for row in profile.rows_with_excess_drops(0.01) {
        eprintln!(
            "warning: {} of {} samples at {} m were infeasible and dropped",
            row.dropped,
            row.n + row.dropped,
            row.distance
        );
    }
    write_file(&args.output, &profile.to_csv())?;
    let ds: Vec<f64> = profile.rows.iter().map(|r| r.distance).collect();
    let stds: Vec<f64> = profile.rows.iter().map(|r| r.std_x).collect();
    if ds.len() >= 2 {
        let fit = linear_fit(&ds, &stds);
        println!(
            "wrote {} ({} rows); std_x fit: slope={:.6} m/m intercept={:.6} m r2={:.6}",
            args.output.display(),
            profile.rows.len(),
            fit.slope,
            fit.intercept,
            fit.r_squared
        );
    } else {
        println!("wrote {} ({} rows)", args.output.display(), profile.rows.len());
    }
    Ok(())
}

fn cmd_coverage_map(args: &CoverageMapArgs) -> Result<(), CliError> {
    let layout = AnchorLayout {
        half_baseline: args.baseline / 2.0,
        front_range: args.front_range,
        front_halfangle: args.front_halfangle,
        occlusion_start: args.occlusion_start,
        occlusion_end: args.occlusion_end,
        side_range: args.side_range,
        ..AnchorLayout::default()
    };
    layout
        .validate()
        .map_err(|e| CliError::Domain(e.to_string()))?;
    if !(args.step > 0.0) {
        return Err(CliError::Domain("step must be positive".into()));
    }
    if args.x_max < args.x_min || args.y_max < args.y_min {
        return Err(CliError::Domain("grid bounds are inverted".into()));
    }
    let mut out = String::from("x,y,status\n");
    let nx = ((args.x_max - args.x_min) / args.step).round() as usize;
    let ny = ((args.y_max - args.y_min) / args.step).round() as usize;
    for iy in 0..=ny {
        let y = args.y_min + iy as f64 * args.step;
        for ix in 0..=nx {
            let x = args.x_min + ix as f64 * args.step;
            let status = match coverage(&layout, Point::new(x, y)) {
                CoverageStatus::BothAnchors => "both",
                CoverageStatus::OneAnchor => "one",
                CoverageStatus::None => "none",
            };
            writeln!(out, "{x:.3},{y:.3},{status}").expect("writing to a String cannot fail");
        }
    }
    write_file(&args.output, &out)?;
    println!(
        "wrote {} ({} cells)",
        args.output.display(),
        (nx + 1) * (ny + 1)
    );
    Ok(())
}

fn cmd_side_test(args: &SideTestArgs) -> Result<(), CliError> {
    let layout = layout_from_baseline(args.baseline)?;
    if args.n < 2 {
        return Err(CliError::Domain("n must be at least 2".into()));
    }
    if args.sigma_e < 0.0 {
        return Err(CliError::Domain("sigma-e must not be negative".into()));
    }
    let noise = NoiseModel::new(args.sigma_e, 0.0);
    let rows = run_side_test(
        &layout,
        args.lateral,
        &args.distances,
        args.n,
        &noise,
        args.seed,
        args.min_confidence,
    )
    .map_err(|e| CliError::Domain(e.to_string()))?;

    let mut scatter = String::from("distance_m,side,x_m,y_m\n");
    for row in &rows {
        for p in &row.left.points {
            writeln!(scatter, "{:.3},left,{:.9},{:.9}", row.distance, p.x, p.y)
                .expect("writing to a String cannot fail");
        }
        for p in &row.right.points {
            writeln!(scatter, "{:.3},right,{:.9},{:.9}", row.distance, p.x, p.y)
                .expect("writing to a String cannot fail");
        }
    }
    write_file(&args.output, &scatter)?;
    for row in &rows {
        println!(
            "distance={:.3} separated={} left={} right={}",
            row.distance, row.separated, row.left_label, row.right_label
        );
    }
    Ok(())
}

fn cmd_vptl_sim(args: &VptlSimArgs) -> Result<(), CliError> {
    let text = fs::read_to_string(&args.scenario)
        .map_err(|e| CliError::Io(format!("cannot read {}: {e}", args.scenario.display())))?;
    let scenario =
        IntersectionScenario::from_toml_str(&text).map_err(|e| CliError::Domain(e.to_string()))?;
    let output = run_scenario(&scenario).map_err(|e| CliError::Domain(e.to_string()))?;
    write_file(&args.output, &output.render_log())?;
    write_file(&args.timeline, &output.render_timeline_csv())?;
    println!(
        "wrote {} ({} events) and {} ({} rows)",
        args.output.display(),
        output.events.len(),
        args.timeline.display(),
        output.timeline.len()
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Triangulate(args) => cmd_triangulate(args),
        Command::ErrorProfile(args) => cmd_error_profile(args),
        Command::CoverageMap(args) => cmd_coverage_map(args),
        Command::SideTest(args) => cmd_side_test(args),
        Command::VptlSim(args) => cmd_vptl_sim(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.exit_code()
        }
    }
}
