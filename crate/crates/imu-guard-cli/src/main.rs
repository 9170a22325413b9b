//! `imu-guard` command line: simulate, detect, mitigate, integrate,
//! evaluate — stage by stage or as one pipeline run.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use nalgebra::Vector3;

use imu_guard::detect::{
    calibrate_dtw_threshold, detect_dtw, detect_threshold, extract_templates, slice_stream,
    DetectorConfig, DetectorMode, LabeledStream, SeriesDims,
};
use imu_guard::dtw::{best_match, Series};
use imu_guard::eval::{evaluate, AlignmentMode};
use imu_guard::ins::{integrate, AnchorConfig, IntegratorConfig, Method};
use imu_guard::io;
use imu_guard::mitigate::{mitigate_dtw, mitigate_threshold, MitigationConfig, MitigationMode};
use imu_guard::pipeline::{run_pipeline, PipelineConfig};
use imu_guard::sim::{generate_truth, inject_glitches, synthesize_imu, GlitchSpec};
use imu_guard::types::{ImuBias, NavState, NoiseSpec, WorldModel};
use imu_guard::{Error, Result};

/// Environment variable capping every `--parallelism` request.
const THREADS_ENV: &str = "IMU_GUARD_THREADS";

#[derive(Parser)]
#[command(
    name = "imu-guard",
    version,
    about = "Detect and mitigate glitch faults in low-cost IMU streams"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate ground truth plus clean and glitch-corrupted IMU streams.
    Simulate(SimulateArgs),
    /// Build a template library from clean labeled recordings.
    ExtractTemplates(ExtractTemplatesArgs),
    /// Flag abnormal measurements in a stream.
    Detect(DetectArgs),
    /// Repair a stream using a detection report.
    Mitigate(MitigateArgs),
    /// Strapdown-integrate a stream into a trajectory.
    Integrate(IntegrateArgs),
    /// Score an estimated trajectory against a reference.
    Evaluate(EvaluateArgs),
    /// Run the raw/threshold/dtw comparison end to end.
    Pipeline(PipelineArgs),
    /// Benchmark template matching across parallelism levels.
    BenchDtw(BenchDtwArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Directory for truth.tum, clean.csv, corrupted.csv, mask.json,
    /// initial_state.json.
    #[arg(long)]
    out_dir: PathBuf,
    /// Glitch regime: n0_1, n1_10, n50_10, or none.
    #[arg(long, default_value = "n50_10")]
    preset: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 2000)]
    poses: usize,
    /// ellipse3d, line, or figure_eight.
    #[arg(long, default_value = "ellipse3d")]
    shape: String,
    #[arg(long, default_value_t = 10.0)]
    duration: f64,
    /// IMU rate, Hz (defaults to the pose rate; must divide it).
    #[arg(long)]
    imu_rate: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    base_acc_sigma: f64,
    #[arg(long, default_value_t = 0.002)]
    base_gyro_sigma: f64,
    /// Override the preset's corrupted-sample fraction.
    #[arg(long)]
    affected_fraction: Option<f64>,
    /// Override the preset's burst length.
    #[arg(long)]
    burst_len: Option<usize>,
}

#[derive(Args)]
struct ExtractTemplatesArgs {
    /// Clean recording CSV (repeat for multiple recordings).
    #[arg(long, required = true)]
    input: Vec<PathBuf>,
    /// Label per recording (defaults to "default" for all; if given, must
    /// match the number of inputs).
    #[arg(long)]
    label: Vec<String>,
    /// Template length N.
    #[arg(short = 'n', long, default_value_t = 10)]
    template_len: usize,
    /// Number of templates k.
    #[arg(short = 'k', long, default_value_t = 10)]
    count: usize,
    #[arg(long, default_value_t = 6)]
    dims: usize,
    #[arg(long, default_value_t = 1.0)]
    gyro_weight: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DetectArgs {
    #[arg(long)]
    input: PathBuf,
    /// threshold or dtw.
    #[arg(long)]
    mode: String,
    /// Template library (dtw mode).
    #[arg(long)]
    templates: Option<PathBuf>,
    #[arg(long, default_value_t = 12.0)]
    acc_threshold: f64,
    /// Decision threshold for dtw mode; omit to calibrate from
    /// --calibration-input.
    #[arg(long)]
    dtw_threshold: Option<f64>,
    /// Clean stream used to calibrate the dtw threshold.
    #[arg(long)]
    calibration_input: Option<PathBuf>,
    #[arg(long, default_value_t = 0.99)]
    target_pass: f64,
    #[arg(long, default_value_t = 40)]
    slice_len: usize,
    #[arg(long, default_value_t = 1)]
    parallelism: usize,
    #[arg(long, default_value_t = 6)]
    dims: usize,
    #[arg(long, default_value_t = false)]
    zscore: bool,
    /// Report output (JSON lines).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct MitigateArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    report: PathBuf,
    /// Template library (template_substitution mode).
    #[arg(long)]
    templates: Option<PathBuf>,
    /// clamp, moving_average, or template_substitution.
    #[arg(long)]
    mode: String,
    #[arg(long, default_value_t = 5)]
    window_n: usize,
    /// Cleaned stream output CSV.
    #[arg(long)]
    out: PathBuf,
    /// Mitigation log output JSON.
    #[arg(long)]
    log: Option<PathBuf>,
}

#[derive(Args)]
struct IntegrateArgs {
    #[arg(long)]
    input: PathBuf,
    /// euler or midpoint.
    #[arg(long, default_value = "midpoint")]
    method: String,
    #[arg(long)]
    out: PathBuf,
    /// Anchor trajectory (TUM) for periodic pose corrections.
    #[arg(long)]
    anchor: Option<PathBuf>,
    #[arg(long, default_value_t = 1.0)]
    anchor_period: f64,
    /// Accelerometer/gyro bias: "ax,ay,az" or "ax,ay,az,gx,gy,gz".
    #[arg(long)]
    bias: Option<String>,
    /// Exact initial state JSON (from simulate or a previous run).
    #[arg(long)]
    init_state: Option<PathBuf>,
    /// Derive the initial state from a TUM file's first pose (velocity by
    /// finite difference of the first two poses).
    #[arg(long)]
    init_from: Option<PathBuf>,
    #[arg(long)]
    max_gap: Option<f64>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    est: PathBuf,
    #[arg(long = "ref")]
    reference: PathBuf,
    /// se3, sim3, posyaw, or none.
    #[arg(long, default_value = "se3")]
    align: String,
    /// Comma-separated sub-trajectory lengths in meters.
    #[arg(long, default_value = "7,14,21,28,35")]
    lengths: String,
    /// Association tolerance, s (default: half the reference sample period).
    #[arg(long)]
    max_dt: Option<f64>,
    /// Metric report output JSON.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-length relative errors as CSV (for plotting).
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct PipelineArgs {
    /// Run configuration (TOML or JSON).
    #[arg(long)]
    config: PathBuf,
    /// Override the configured output directory.
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

#[derive(Args)]
struct BenchDtwArgs {
    /// Number of templates k.
    #[arg(short = 'k', long, default_value_t = 10)]
    count: usize,
    /// Template length N.
    #[arg(short = 'n', long, default_value_t = 40)]
    template_len: usize,
    /// Query length M.
    #[arg(short = 'm', long, default_value_t = 40)]
    slice_len: usize,
    #[arg(short = 'd', long, default_value_t = 3)]
    dims: usize,
    #[arg(long, default_value_t = 200)]
    repeats: usize,
    /// Comma-separated worker counts to sweep.
    #[arg(long, default_value = "1,2,4,8")]
    parallelism: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn main() -> ExitCode {
    // Die quietly when the output pipe closes (e.g. piping into `head`).
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::from(exit_code(&e))
        }
    }
}

/// 2 = validation error, 3 = data error, 4 = internal error.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => 2,
        Error::Stage { source, .. } => exit_code(source),
        Error::Io(_) => 4,
        _ => 3,
    }
}

/// Cap a requested parallelism with IMU_GUARD_THREADS.
fn cap_parallelism(requested: usize) -> usize {
    match std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
    {
        Some(cap) if cap >= 1 => requested.min(cap),
        _ => requested,
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(args) => simulate(args),
        Command::ExtractTemplates(args) => extract(args),
        Command::Detect(args) => detect(args),
        Command::Mitigate(args) => mitigate(args),
        Command::Integrate(args) => integrate_cmd(args),
        Command::Evaluate(args) => evaluate_cmd(args),
        Command::Pipeline(args) => pipeline_cmd(args),
        Command::BenchDtw(args) => bench_dtw(args),
    }
}

fn simulate(args: SimulateArgs) -> Result<()> {
    let section = imu_guard::pipeline::SimSection {
        preset: args.preset.clone(),
        shape: args.shape,
        poses: args.poses,
        duration: args.duration,
        imu_rate: args.imu_rate,
        base_acc_sigma: args.base_acc_sigma,
        base_gyro_sigma: args.base_gyro_sigma,
        affected_fraction: args.affected_fraction,
        burst_len: args.burst_len,
    };
    let spec = section.trajectory_spec()?;
    spec.validate()?;
    std::fs::create_dir_all(&args.out_dir)?;

    let truth = generate_truth(&spec)?;
    io::write_tum(&args.out_dir.join("truth.tum"), &truth.trajectory)?;
    io::write_nav_state(
        &args.out_dir.join("initial_state.json"),
        &truth.trajectory.states()[0],
    )?;

    let noise = NoiseSpec::new(args.base_acc_sigma, args.base_gyro_sigma, args.seed);
    let rate = args.imu_rate.unwrap_or_else(|| truth.pose_rate());
    let clean = synthesize_imu(&truth, &ImuBias::default(), &noise, &WorldModel::default(), rate)?;
    io::write_imu_csv(&args.out_dir.join("clean.csv"), &clean)?;

    let (corrupted, mask) = if args.preset == "none" {
        (clean.clone(), imu_guard::sim::FaultMask::empty(clean.len()))
    } else {
        let mut glitch = GlitchSpec::preset(&args.preset, args.seed ^ 0x9E37_79B9)
            .ok_or_else(|| Error::Config(format!("unknown preset '{}'", args.preset)))?;
        if let Some(f) = args.affected_fraction {
            glitch.affected_fraction = f;
        }
        if let Some(b) = args.burst_len {
            glitch.burst_len = b;
        }
        inject_glitches(&clean, &glitch)?
    };
    io::write_imu_csv(&args.out_dir.join("corrupted.csv"), &corrupted)?;
    io::write_mask_json(&args.out_dir.join("mask.json"), &mask)?;

    println!(
        "wrote {} samples ({} corrupted) to {}",
        corrupted.len(),
        mask.count(),
        args.out_dir.display()
    );
    Ok(())
}

fn extract(args: ExtractTemplatesArgs) -> Result<()> {
    if !args.label.is_empty() && args.label.len() != args.input.len() {
        return Err(Error::Config(format!(
            "{} labels given for {} inputs",
            args.label.len(),
            args.input.len()
        )));
    }
    let dims = SeriesDims::from_channels(args.dims)?;
    let mut recordings = Vec::with_capacity(args.input.len());
    for (i, path) in args.input.iter().enumerate() {
        recordings.push(LabeledStream {
            label: args
                .label
                .get(i)
                .cloned()
                .unwrap_or_else(|| "default".into()),
            samples: io::read_imu_csv(path)?,
        });
    }
    let library = extract_templates(
        &recordings,
        args.template_len,
        args.count,
        dims,
        args.gyro_weight,
    )?;
    io::write_template_library(&args.out, &library)?;
    println!(
        "extracted {} templates of length {} to {}",
        library.templates.len(),
        library.template_len,
        args.out.display()
    );
    Ok(())
}

fn detect(args: DetectArgs) -> Result<()> {
    let stream = io::read_imu_csv(&args.input)?;
    let dims = SeriesDims::from_channels(args.dims)?;
    let parallelism = cap_parallelism(args.parallelism);
    match args.mode.as_str() {
        "threshold" => {
            let cfg = DetectorConfig {
                mode: DetectorMode::Threshold,
                acc_threshold: args.acc_threshold,
                slice_len: args.slice_len,
                dims,
                parallelism,
                zscore: args.zscore,
                ..DetectorConfig::default()
            };
            let report = detect_threshold(&stream, &WorldModel::default(), &cfg)?;
            io::write_report_jsonl(&args.out, &report)?;
            println!(
                "flagged {} samples in {} ({} runs)",
                report.flagged_samples().len(),
                args.input.display(),
                report.records.len()
            );
        }
        "dtw" => {
            let templates_path = args.templates.ok_or_else(|| {
                Error::Config("--templates is required in dtw mode".into())
            })?;
            let library = io::read_template_library(&templates_path)?;
            let mut cfg = DetectorConfig {
                mode: DetectorMode::Dtw,
                slice_len: args.slice_len,
                dims,
                parallelism,
                zscore: args.zscore,
                ..DetectorConfig::default()
            };
            cfg.dtw_threshold = match (args.dtw_threshold, &args.calibration_input) {
                (Some(t), _) => t,
                (None, Some(path)) => {
                    let clean = io::read_imu_csv(path)?;
                    let sliced = slice_stream(&clean, args.slice_len)?;
                    let t =
                        calibrate_dtw_threshold(&library, &sliced.slices, args.target_pass, &cfg)?;
                    println!("calibrated dtw threshold: {t}");
                    t
                }
                (None, None) => {
                    return Err(Error::Config(
                        "dtw mode needs --dtw-threshold or --calibration-input".into(),
                    ))
                }
            };
            let sliced = slice_stream(&stream, args.slice_len)?;
            let report = detect_dtw(&sliced, &library, &cfg)?;
            io::write_report_jsonl(&args.out, &report)?;
            println!(
                "flagged {} of {} slices in {}",
                report.abnormal_slices().len(),
                sliced.slices.len(),
                args.input.display()
            );
        }
        other => return Err(Error::Config(format!("unknown detector mode '{other}'"))),
    }
    Ok(())
}

fn mitigate(args: MitigateArgs) -> Result<()> {
    let stream = io::read_imu_csv(&args.input)?;
    let report = io::read_report_jsonl(&args.report)?;
    let (cleaned, log) = match args.mode.as_str() {
        "clamp" | "moving_average" => {
            let mut cfg = MitigationConfig::new(if args.mode == "clamp" {
                MitigationMode::Clamp
            } else {
                MitigationMode::MovingAverage
            });
            cfg.window_n = args.window_n;
            mitigate_threshold(&stream, &report, &cfg)?
        }
        "template_substitution" => {
            let templates_path = args.templates.ok_or_else(|| {
                Error::Config("--templates is required for template_substitution".into())
            })?;
            let library = io::read_template_library(&templates_path)?;
            let cfg = MitigationConfig::new(MitigationMode::TemplateSubstitution);
            mitigate_dtw(&stream, &report, &library, &cfg)?
        }
        other => return Err(Error::Config(format!("unknown mitigation mode '{other}'"))),
    };
    io::write_imu_csv(&args.out, &cleaned)?;
    if let Some(log_path) = &args.log {
        io::write_mitigation_log(log_path, &log)?;
    }
    println!(
        "repaired {} entries, wrote {}",
        log.entries.len(),
        args.out.display()
    );
    Ok(())
}

fn parse_bias(text: &str) -> Result<ImuBias> {
    let parts: Vec<f64> = text
        .split(',')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|e| Error::Config(format!("bad bias component '{p}': {e}")))
        })
        .collect::<Result<_>>()?;
    match parts.len() {
        3 => Ok(ImuBias::new(
            Vector3::new(parts[0], parts[1], parts[2]),
            Vector3::zeros(),
        )),
        6 => Ok(ImuBias::new(
            Vector3::new(parts[0], parts[1], parts[2]),
            Vector3::new(parts[3], parts[4], parts[5]),
        )),
        n => Err(Error::Config(format!(
            "--bias needs 3 or 6 components, got {n}"
        ))),
    }
}

fn integrate_cmd(args: IntegrateArgs) -> Result<()> {
    let stream = io::read_imu_csv(&args.input)?;
    let method = match args.method.as_str() {
        "euler" => Method::Euler,
        "midpoint" => Method::Midpoint,
        other => return Err(Error::Config(format!("unknown method '{other}'"))),
    };
    let initial = match (&args.init_state, &args.init_from) {
        (Some(path), _) => io::read_nav_state(path)?,
        (None, Some(path)) => {
            let truth = io::read_tum(path)?;
            let states = truth.states();
            if states.len() < 2 {
                return Err(Error::InsufficientData(
                    "--init-from needs >= 2 poses to derive a velocity".into(),
                ));
            }
            let dt = states[1].t - states[0].t;
            NavState::new(
                states[0].t,
                states[0].p,
                (states[1].p - states[0].p) / dt,
                states[0].q,
            )
        }
        (None, None) => NavState::origin(stream.first().map(|s| s.t).unwrap_or(0.0)),
    };
    let cfg = IntegratorConfig {
        method,
        world: WorldModel::default(),
        bias: args.bias.as_deref().map(parse_bias).transpose()?.unwrap_or_default(),
        max_gap: args.max_gap,
        anchor: args
            .anchor
            .as_deref()
            .map(|path| -> Result<AnchorConfig> {
                Ok(AnchorConfig {
                    period: args.anchor_period,
                    source: io::read_tum(path)?,
                })
            })
            .transpose()?,
    };
    let trajectory = integrate(&initial, &stream, &cfg)?;
    io::write_tum(&args.out, &trajectory)?;
    println!(
        "integrated {} samples to {}",
        stream.len(),
        args.out.display()
    );
    Ok(())
}

fn evaluate_cmd(args: EvaluateArgs) -> Result<()> {
    let est = io::read_tum(&args.est)?;
    let reference = io::read_tum(&args.reference)?;
    let mode: AlignmentMode = args.align.parse()?;
    let lengths: Vec<f64> = args
        .lengths
        .split(',')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|e| Error::Config(format!("bad length '{p}': {e}")))
        })
        .collect::<Result<_>>()?;
    let max_dt = args.max_dt.unwrap_or_else(|| {
        let states = reference.states();
        if states.len() >= 2 {
            0.5 * (states[states.len() - 1].t - states[0].t) / (states.len() - 1) as f64
        } else {
            0.01
        }
    });
    let report = evaluate(&est, &reference, mode, &lengths, max_dt)?;

    println!(
        "ate_rmse: {:.6} m over {} pairs (alignment {}, scale {:.6})",
        report.ate_rmse, report.pairs, args.align, report.scale
    );
    for stat in &report.relative.per_length {
        println!(
            "  {:>6.2} m: trans mean {:.6} m (median {:.6}), yaw mean {:.6} deg (median {:.6}), {} starts",
            stat.length,
            stat.trans_mean,
            stat.trans_median,
            stat.yaw_mean_deg,
            stat.yaw_median_deg,
            stat.count
        );
    }
    for skipped in &report.relative.skipped_lengths {
        eprintln!("warning: reference path shorter than {skipped} m, length skipped");
    }
    if let Some(out) = &args.out {
        io::write_json_pretty(out, &report)?;
    }
    if let Some(csv_path) = &args.csv {
        let mut text =
            String::from("length_m,trans_mean,trans_median,yaw_mean_deg,yaw_median_deg,count\n");
        for s in &report.relative.per_length {
            text.push_str(&format!(
                "{},{},{},{},{},{}\n",
                s.length, s.trans_mean, s.trans_median, s.yaw_mean_deg, s.yaw_median_deg, s.count
            ));
        }
        std::fs::write(csv_path, text)?;
    }
    Ok(())
}

fn pipeline_cmd(args: PipelineArgs) -> Result<()> {
    let mut cfg = PipelineConfig::from_file(&args.config)?;
    if let Some(dir) = args.output_dir {
        cfg.output_dir = dir;
    }
    cfg.detection.parallelism = cap_parallelism(cfg.detection.parallelism);
    let outcome = run_pipeline(&cfg)?;
    println!("run directory: {}", outcome.run_dir.display());
    if let Some(t) = outcome.summary.dtw_threshold {
        println!("dtw threshold: {t:.3}");
    }
    println!("{:<12} {:>12} {:>10}", "variant", "ate_rmse[m]", "flagged");
    for v in &outcome.summary.variants {
        println!("{:<12} {:>12.6} {:>10}", v.name, v.metrics.ate_rmse, v.flagged);
    }
    Ok(())
}

fn bench_dtw(args: BenchDtwArgs) -> Result<()> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(args.seed);
    let mut random_series = |rows: usize| -> Series {
        let data: Vec<f64> = (0..rows * args.dims)
            .map(|_| rng.gen_range(-10.0..10.0))
            .collect();
        Series::from_flat(data, args.dims).expect("generated series")
    };
    let templates: Vec<Series> = (0..args.count).map(|_| random_series(args.template_len)).collect();
    let query = random_series(args.slice_len);

    let levels: Vec<usize> = args
        .parallelism
        .split(',')
        .map(|p| {
            p.trim()
                .parse::<usize>()
                .map_err(|e| Error::Config(format!("bad parallelism '{p}': {e}")))
        })
        .collect::<Result<_>>()?;

    println!(
        "best_match: k={} N={} M={} d={}, {} repeats",
        args.count, args.template_len, args.slice_len, args.dims, args.repeats
    );
    println!("{:>11} {:>14} {:>9}", "parallelism", "median[us]", "speedup");
    let mut baseline = None;
    for &level in &levels {
        let level = cap_parallelism(level).max(1);
        let reference = best_match(&query, &templates, 1)?;
        let mut times = Vec::with_capacity(args.repeats);
        for _ in 0..args.repeats.max(1) {
            let start = Instant::now();
            let result = best_match(&query, &templates, level)?;
            times.push(start.elapsed().as_secs_f64() * 1e6);
            assert_eq!(result, reference, "parallel determinism violated");
        }
        times.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = times[times.len() / 2];
        let speedup = match baseline {
            None => {
                baseline = Some(median);
                1.0
            }
            Some(base) => base / median,
        };
        println!("{level:>11} {median:>14.2} {speedup:>9.2}");
    }
    Ok(())
}
