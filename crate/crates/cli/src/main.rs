//! `cfn` command line: track generation, training, evaluation, plotting.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use cfn_core::config::RunConfig;
use cfn_core::evaluator::{
    evaluate_suite, rescan_log, write_log_csv, EvalSettings, NetPolicy, PidPolicy, Policy,
    ResultsFile,
};
use cfn_core::neural::{load_model, save_model};
use cfn_core::report::{render_table, render_trajectory};
use cfn_core::track::{Track, TrackFile};
use cfn_core::trackgen::{generate_track_file, track_file_from_points};
use cfn_core::trainer::train;

/// Output directory override; flags take precedence over this variable.
const OUT_DIR_ENV: &str = "CFN_OUT_DIR";

#[derive(Parser)]
#[command(name = "cfn", version, about = "Drone-racing simulator and controller-fusion trainer")]
struct Cli {
    /// Path to the run configuration (TOML). Defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Track file operations.
    #[command(subcommand)]
    Track(TrackCommand),
    /// Train a controller fusion policy on a directory of tracks.
    Train(TrainArgs),
    /// Evaluate a policy over a directory of tracks.
    Eval(EvalArgs),
    /// Render a trajectory log over its track as an SVG.
    Plot(PlotArgs),
}

#[derive(Subcommand)]
enum TrackCommand {
    /// Generate a track file (seeded random loop or explicit points).
    Gen(TrackGenArgs),
}

#[derive(Args)]
struct TrackGenArgs {
    /// Seed for the random loop generator.
    #[arg(long, conflicts_with = "points")]
    seed: Option<u64>,
    /// JSON file with explicit control points ([[x,y,z],...]).
    #[arg(long)]
    points: Option<PathBuf>,
    /// Track name recorded in the file (defaults to the output stem).
    #[arg(long)]
    name: Option<String>,
    /// Corridor width in meters.
    #[arg(long)]
    width: Option<f64>,
    /// Number of gates.
    #[arg(long)]
    gates: Option<usize>,
    /// Corner radius bounds in meters (difficulty knob).
    #[arg(long)]
    corner_radius_min: Option<f64>,
    #[arg(long)]
    corner_radius_max: Option<f64>,
    /// Output file path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    /// Directory of track JSON files to train on.
    #[arg(long)]
    track_dir: PathBuf,
    /// Where to write the trained model.
    #[arg(long)]
    out_model: PathBuf,
    /// Directory for the training report and resolved config.
    #[arg(long)]
    report_dir: Option<PathBuf>,
    /// Disable the temporary buffers (k1 = k2 = 0 ablation).
    #[arg(long)]
    no_buffer: bool,
    /// Override the config seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct EvalArgs {
    /// Policy to fly: "pid1", "pid2", "hover", or a model file path.
    #[arg(long)]
    policy: String,
    /// Directory of track JSON files to evaluate on.
    #[arg(long)]
    track_dir: PathBuf,
    /// Laps per track.
    #[arg(long)]
    laps: Option<usize>,
    /// Gaussian perception noise sigma in meters.
    #[arg(long)]
    perception_noise: Option<f64>,
    /// Parallel evaluation jobs.
    #[arg(long)]
    jobs: Option<usize>,
    /// Output directory for results, logs, table, and figures.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PlotArgs {
    /// Trajectory CSV produced by `eval`.
    #[arg(long)]
    log: PathBuf,
    /// Track file the log was flown on.
    #[arg(long)]
    track: PathBuf,
    /// Output SVG path.
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run() -> Result<()> {
    let cli = Cli::parse();
    let cfg = load_config(cli.config.as_deref())?;
    match cli.command {
        Command::Track(TrackCommand::Gen(args)) => cmd_track_gen(&cfg, args),
        Command::Train(args) => cmd_train(&cfg, args),
        Command::Eval(args) => cmd_eval(&cfg, args),
        Command::Plot(args) => cmd_plot(&cfg, args),
    }
}

fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    match path {
        Some(p) => {
            let text = fs::read_to_string(p)
                .with_context(|| format!("reading config {}", p.display()))?;
            RunConfig::from_toml(&text).with_context(|| format!("parsing {}", p.display()))
        }
        None => Ok(RunConfig::default()),
    }
}

/// Apply the output-directory override from the environment.
fn resolve_out_dir(requested: &Path) -> PathBuf {
    match std::env::var_os(OUT_DIR_ENV) {
        Some(base) => PathBuf::from(base).join(requested),
        None => requested.to_path_buf(),
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)
                .with_context(|| format!("creating {}", parent.display()))?;
        }
    }
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn cmd_track_gen(cfg: &RunConfig, args: TrackGenArgs) -> Result<()> {
    let out = resolve_out_dir(&args.out);
    let name = args
        .name
        .or_else(|| out.file_stem().map(|s| s.to_string_lossy().into_owned()))
        .unwrap_or_else(|| "track".to_string());

    let mut track_cfg = cfg.track.clone();
    if let Some(w) = args.width {
        track_cfg.width_m = w;
    }
    if let Some(g) = args.gates {
        track_cfg.gate_count = g;
    }
    if let Some(r) = args.corner_radius_min {
        track_cfg.corner_radius_min_m = r;
    }
    if let Some(r) = args.corner_radius_max {
        track_cfg.corner_radius_max_m = r;
    }

    let file = match (&args.points, args.seed) {
        (Some(points_path), _) => {
            let text = fs::read_to_string(points_path)
                .with_context(|| format!("reading points {}", points_path.display()))?;
            let points: Vec<[f64; 3]> =
                serde_json::from_str(&text).context("points file must be [[x,y,z],...]")?;
            track_file_from_points(&name, &points, &track_cfg)
        }
        (None, Some(seed)) => generate_track_file(&name, seed, &track_cfg),
        (None, None) => bail!("track gen needs --seed or --points"),
    };

    // Validate before writing: a track file we cannot load back is a bug.
    let track =
        Track::from_file_with_gates(&file, track_cfg.gate_half_width, track_cfg.gate_half_height)?;
    if track.self_overlap_warning() {
        eprintln!(
            "warning: corridor approaches itself within {:.1} m (width {:.1} m)",
            track.min_self_clearance, track.width
        );
    }
    write_file(&out, &file.to_json())?;
    println!(
        "wrote {} ({:.0} m loop, {} gates)",
        out.display(),
        track.total_length,
        track.gates.len()
    );
    Ok(())
}

fn load_track_dir(cfg: &RunConfig, dir: &Path) -> Result<Vec<Track>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading track dir {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        bail!("no .json track files in {}", dir.display());
    }
    let mut tracks = Vec::with_capacity(paths.len());
    for p in paths {
        let text = fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))?;
        let file =
            TrackFile::from_json(&text).with_context(|| format!("parsing {}", p.display()))?;
        tracks.push(Track::from_file_with_gates(
            &file,
            cfg.track.gate_half_width,
            cfg.track.gate_half_height,
        )?);
    }
    Ok(tracks)
}

fn cmd_train(cfg: &RunConfig, args: TrainArgs) -> Result<()> {
    let mut cfg = cfg.clone();
    if args.no_buffer {
        cfg.trainer.buffer_k1 = 0;
        cfg.trainer.buffer_k2 = 0;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    let tracks = load_track_dir(&cfg, &args.track_dir)?;
    let (net, report) = train(&tracks, &cfg)?;

    let out_model = resolve_out_dir(&args.out_model);
    write_file(&out_model, &save_model(&net))?;
    println!(
        "trained on {} tracks: {} sim steps, {} updates, |D| = {}",
        tracks.len(),
        report.total_sim_steps,
        report.sgd_updates,
        report.final_db_size
    );
    println!("model written to {}", out_model.display());

    if let Some(report_dir) = args.report_dir {
        let dir = resolve_out_dir(&report_dir);
        let mut report_json =
            serde_json::to_string_pretty(&report).context("serializing training report")?;
        report_json.push('\n');
        write_file(&dir.join("training_report.json"), &report_json)?;
        write_file(&dir.join("config.toml"), &cfg.to_toml())?;
        println!("report written to {}", dir.display());
    }
    Ok(())
}

fn build_policy(cfg: &RunConfig, spec: &str) -> Result<Box<dyn Policy>> {
    Ok(match spec {
        "pid1" => Box::new(PidPolicy::new("pid1", cfg.pid.conservative, cfg.dynamics.dt)),
        "pid2" => Box::new(PidPolicy::new("pid2", cfg.pid.aggressive, cfg.dynamics.dt)),
        "hover" => Box::new(cfn_core::evaluator::HoverPolicy),
        path => {
            let text =
                fs::read_to_string(path).with_context(|| format!("reading model {path}"))?;
            let net = load_model(&text).with_context(|| format!("loading model {path}"))?;
            let name = Path::new(path)
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "cfn".to_string());
            Box::new(NetPolicy::new(&name, net))
        }
    })
}

fn cmd_eval(cfg: &RunConfig, args: EvalArgs) -> Result<()> {
    let mut cfg = cfg.clone();
    if let Some(laps) = args.laps {
        cfg.evaluator.laps = laps;
    }
    if let Some(sigma) = args.perception_noise {
        cfg.evaluator.perception_noise = sigma;
    }
    if let Some(jobs) = args.jobs {
        cfg.evaluator.jobs = jobs;
    }
    let tracks = load_track_dir(&cfg, &args.track_dir)?;
    let policy = build_policy(&cfg, &args.policy)?;
    let settings = EvalSettings::from_config(&cfg);

    let suite = evaluate_suite(
        &tracks,
        std::slice::from_ref(&policy),
        &settings,
        cfg.evaluator.jobs,
    );
    let out = resolve_out_dir(&args.out);
    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;

    let mut failures = 0usize;
    for (t, result) in suite.cells[0].iter().enumerate() {
        if result.aborted {
            failures += 1;
            eprintln!("cell {}: aborted (non-finite policy output)", result.track);
        }
        let log_csv = write_log_csv(&result.log);
        write_file(&out.join(format!("{}.csv", result.track)), &log_csv)?;
        let svg = render_trajectory(&tracks[t], &result.log, &cfg.report);
        write_file(&out.join(format!("{}.svg", result.track)), &svg)?;

        // Consistency check: the log must replay to the live counters.
        let (passed, resets) = rescan_log(&tracks[t], &result.log);
        if passed != result.gates_passed || resets != result.resets {
            failures += 1;
            eprintln!(
                "cell {}: log replay mismatch (live {}/{} vs replay {}/{})",
                result.track, result.gates_passed, result.resets, passed, resets
            );
        }
    }

    let results = ResultsFile::from_suite(&suite, 0);
    write_file(&out.join("results.json"), &results.to_json())?;
    let table = render_table(&suite);
    write_file(&out.join("results.md"), &table)?;
    write_file(&out.join("config.toml"), &cfg.to_toml())?;
    print!("{table}");
    println!("artifacts written to {}", out.display());

    if failures > 0 {
        bail!("{failures} evaluation cell(s) failed");
    }
    Ok(())
}

fn cmd_plot(cfg: &RunConfig, args: PlotArgs) -> Result<()> {
    let log_text = fs::read_to_string(&args.log)
        .with_context(|| format!("reading log {}", args.log.display()))?;
    let rows = cfn_core::evaluator::parse_log_csv(&log_text)?;
    let track_text = fs::read_to_string(&args.track)
        .with_context(|| format!("reading track {}", args.track.display()))?;
    let file = TrackFile::from_json(&track_text)?;
    let track =
        Track::from_file_with_gates(&file, cfg.track.gate_half_width, cfg.track.gate_half_height)?;
    let svg = render_trajectory(&track, &rows, &cfg.report);
    let out = resolve_out_dir(&args.out);
    write_file(&out, &svg)?;
    println!("wrote {}", out.display());
    Ok(())
}
