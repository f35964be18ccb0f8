//! `seqstab` — batch CLI for sequence stabilization, temporal-coherence
//! metrics, synthetic data, and latent aggregation.
//!
//! Every subcommand prints a JSON run report to stdout (sorted keys, SHA-256
//! digests of all files touched) and exits 0 on success, 2 on input or parse
//! errors, and 3 on configuration errors. Pass `--report <path>` to also
//! write the report to a file.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use seqstab::aggregator::{aggregate, attention_weights, mean_query, AttentionConfig};
use seqstab::error::{Error, Result};
use seqstab::io::{
    atomic_write, read_control_sequence_csv, read_flo, read_frames_json,
    write_control_sequence_csv, write_flo, write_latent_json,
};
use seqstab::metrics::{flv, rmse, roughness, FlowField};
use seqstab::report::RunReport;
use seqstab::stabilizer::{stabilize, StabilizerConfig};
use seqstab::synth::{generate, standard_benchmark, BaseMotion, FlowKind, TrajectorySpec};

/// Sequence stabilization and temporal-coherence toolkit.
#[derive(Parser)]
#[command(name = "seqstab", version, about, max_term_width = 100)]
struct Cli {
    /// Seed for all randomness; no hidden entropy.
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,

    /// Output file (or directory, for `synth`).
    #[arg(long, global = true, value_name = "PATH")]
    output: Option<PathBuf>,

    /// Also write the JSON run report to this file.
    #[arg(long, global = true, value_name = "PATH")]
    report: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Smooth a control-sequence CSV with the ensemble-spline stabilizer.
    Stabilize(StabilizeArgs),
    /// Temporal-coherence and error metrics.
    #[command(subcommand)]
    Metrics(MetricsCommand),
    /// Generate synthetic trajectories or flow fields.
    Synth(SynthArgs),
    /// Fuse per-frame latent codes with multi-head cross-attention.
    Aggregate(AggregateArgs),
}

#[derive(Args)]
struct StabilizeArgs {
    /// Input control-sequence CSV (`t,c0,…` header).
    #[arg(long, value_name = "CSV")]
    input: PathBuf,

    /// Ensemble size: number of phase-shifted subsequences.
    #[arg(short, long, default_value_t = 3)]
    m: usize,

    /// Fraction of ensemble members kept per timestamp.
    #[arg(long, default_value_t = 2.0 / 3.0, value_name = "F")]
    inlier_fraction: f64,
}

#[derive(Subcommand)]
enum MetricsCommand {
    /// Mean per-pixel displacement over a window of flow fields.
    Flv(FlvArgs),
    /// Root-mean-square error between two control-sequence CSVs.
    Rmse(RmseArgs),
    /// Mean squared second difference of one control-sequence CSV.
    Roughness(RoughnessArgs),
}

#[derive(Args)]
struct FlvArgs {
    /// `.flo` files and/or directories of `.flo` files (sorted by name).
    #[arg(required = true, value_name = "FLOWS")]
    flows: Vec<PathBuf>,

    /// Window length in frames; uses the first `frames − 1` flows.
    #[arg(long, default_value_t = 40)]
    frames: usize,
}

#[derive(Args)]
struct RmseArgs {
    /// Sequence under test.
    #[arg(value_name = "INPUT")]
    input: PathBuf,

    /// Ground-truth sequence of the same shape.
    #[arg(value_name = "REFERENCE")]
    reference: PathBuf,
}

#[derive(Args)]
struct RoughnessArgs {
    /// Sequence to measure.
    #[arg(value_name = "INPUT")]
    input: PathBuf,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum SynthKind {
    /// Sinusoidal control sequence plus noise and spikes.
    Trajectory,
    /// All-zero flow fields.
    Zero,
    /// Uniform (u, v) flow fields.
    Constant,
    /// Flow pointing away from the image center.
    Radial,
}

#[derive(Args)]
struct SynthArgs {
    /// What to generate.
    #[arg(long, value_enum, default_value_t = SynthKind::Trajectory)]
    kind: SynthKind,

    /// Use the standard benchmark preset (120×106, seed 42), overriding
    /// the trajectory flags below.
    #[arg(long, conflicts_with_all = ["frames", "dims", "components", "noise_sigma", "outlier_rate", "outlier_magnitude", "seed"])]
    preset_standard: bool,

    /// Trajectory length in frames.
    #[arg(long, default_value_t = 120)]
    frames: usize,

    /// Trajectory dimensions.
    #[arg(long, default_value_t = 106)]
    dims: usize,

    /// Sinusoids per dimension.
    #[arg(long, default_value_t = 2)]
    components: usize,

    /// Gaussian noise standard deviation.
    #[arg(long, default_value_t = 0.1)]
    noise_sigma: f64,

    /// Per-entry spike probability.
    #[arg(long, default_value_t = 0.02)]
    outlier_rate: f64,

    /// Absolute spike size.
    #[arg(long, default_value_t = 1.0)]
    outlier_magnitude: f64,

    /// Flow-field width in pixels (flow kinds only).
    #[arg(long, default_value_t = 8)]
    width: usize,

    /// Flow-field height in pixels (flow kinds only).
    #[arg(long, default_value_t = 8)]
    height: usize,

    /// Number of flow fields (flow kinds only).
    #[arg(long, default_value_t = 1)]
    count: usize,

    /// Horizontal component for `--kind constant`.
    #[arg(long, default_value_t = 3.0)]
    flow_u: f64,

    /// Vertical component for `--kind constant`.
    #[arg(long, default_value_t = 4.0)]
    flow_v: f64,

    /// Magnitude multiplier for `--kind radial`.
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
}

#[derive(Args)]
struct AggregateArgs {
    /// Frame-features JSON (`{"d_k": …, "L": …, "C": …, "frames": […]}`).
    #[arg(long, value_name = "JSON")]
    input: PathBuf,

    /// Attention head count; must divide both d_k and C.
    #[arg(long, default_value_t = 1)]
    heads: usize,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(report) => {
            println!("{report}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

/// Dispatches to the subcommand, then renders and optionally writes the
/// report.
fn run(cli: &Cli) -> Result<String> {
    let report = match &cli.command {
        Command::Stabilize(args) => cmd_stabilize(cli, args)?,
        Command::Metrics(MetricsCommand::Flv(args)) => cmd_metrics_flv(cli, args)?,
        Command::Metrics(MetricsCommand::Rmse(args)) => cmd_metrics_rmse(cli, args)?,
        Command::Metrics(MetricsCommand::Roughness(args)) => cmd_metrics_roughness(cli, args)?,
        Command::Synth(args) => cmd_synth(cli, args)?,
        Command::Aggregate(args) => cmd_aggregate(cli, args)?,
    };
    let rendered = report.finish();
    if let Some(path) = &cli.report {
        atomic_write(path, rendered.as_bytes())?;
    }
    Ok(rendered)
}

/// The `--output` flag is optional at the parser level so its absence can be
/// reported as a configuration error (exit 3) rather than a usage error.
fn require_output(cli: &Cli) -> Result<&Path> {
    cli.output
        .as_deref()
        .ok_or_else(|| Error::config("--output is required for this command"))
}

fn cmd_stabilize(cli: &Cli, args: &StabilizeArgs) -> Result<RunReport> {
    let mut report = RunReport::new("stabilize");
    report.set_config("m", args.m as u64);
    report.set_config("inlier_fraction", args.inlier_fraction);
    report.set_config("seed", cli.seed);

    // Parse before validating the config: bad input is exit 2 even when the
    // config is also bad, and config validity depends on the frame count.
    let input = read_control_sequence_csv(&args.input)?;
    report.add_input(&args.input)?;

    let config = StabilizerConfig {
        m: args.m,
        inlier_fraction: args.inlier_fraction,
    };
    config.validate_for(input.frames())?;
    let output_path = require_output(cli)?;

    let stabilized = stabilize(&input, &config)?;
    write_control_sequence_csv(output_path, &stabilized)?;
    report.add_output(output_path)?;

    report.add_metric("rmse_vs_input", rmse(&input, &stabilized)?);
    report.add_metric("roughness_input", roughness(&input)?);
    report.add_metric("roughness_output", roughness(&stabilized)?);
    Ok(report)
}

/// Expands directories into their `.flo` files (sorted by name); plain files
/// pass through in argument order.
fn collect_flo_paths(args: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut paths = Vec::new();
    for arg in args {
        if arg.is_dir() {
            let mut entries: Vec<PathBuf> = std::fs::read_dir(arg)
                .map_err(|e| Error::io(arg, e))?
                .filter_map(|entry| entry.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|ext| ext == "flo"))
                .collect();
            entries.sort();
            paths.extend(entries);
        } else {
            paths.push(arg.clone());
        }
    }
    if paths.is_empty() {
        return Err(Error::input("no .flo files found in the given paths"));
    }
    Ok(paths)
}

fn cmd_metrics_flv(cli: &Cli, args: &FlvArgs) -> Result<RunReport> {
    let mut report = RunReport::new("metrics flv");
    if args.frames < 2 {
        return Err(Error::config(format!(
            "--frames must be at least 2 to span one flow, got {}",
            args.frames
        )));
    }
    report.set_config("frames", args.frames as u64);
    report.set_config("seed", cli.seed);

    let all = collect_flo_paths(&args.flows)?;
    let used = &all[..all.len().min(args.frames - 1)];
    let mut flows: Vec<FlowField> = Vec::with_capacity(used.len());
    for path in used {
        flows.push(read_flo(path)?);
        report.add_input(path)?;
    }
    report.add_metric("flv", flv(&flows)?);
    report.add_metric("flows_used", flows.len() as f64);
    Ok(report)
}

fn cmd_metrics_rmse(cli: &Cli, args: &RmseArgs) -> Result<RunReport> {
    let mut report = RunReport::new("metrics rmse");
    report.set_config("seed", cli.seed);
    let input = read_control_sequence_csv(&args.input)?;
    report.add_input(&args.input)?;
    let reference = read_control_sequence_csv(&args.reference)?;
    report.add_input(&args.reference)?;
    report.add_metric("rmse", rmse(&input, &reference)?);
    Ok(report)
}

fn cmd_metrics_roughness(cli: &Cli, args: &RoughnessArgs) -> Result<RunReport> {
    let mut report = RunReport::new("metrics roughness");
    report.set_config("seed", cli.seed);
    let input = read_control_sequence_csv(&args.input)?;
    report.add_input(&args.input)?;
    report.add_metric("roughness", roughness(&input)?);
    Ok(report)
}

fn cmd_synth(cli: &Cli, args: &SynthArgs) -> Result<RunReport> {
    let mut report = RunReport::new("synth");
    let out_dir = require_output(cli)?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;

    match args.kind {
        SynthKind::Trajectory => {
            let spec = if args.preset_standard {
                standard_benchmark()
            } else {
                TrajectorySpec {
                    frames: args.frames,
                    dims: args.dims,
                    seed: cli.seed,
                    base: BaseMotion::Seeded {
                        components_per_dim: args.components,
                        amplitude_range: (0.2, 1.0),
                        omega_range: (std::f64::consts::PI / 60.0, std::f64::consts::PI / 12.0),
                    },
                    noise_sigma: args.noise_sigma,
                    outlier_rate: args.outlier_rate,
                    outlier_magnitude: args.outlier_magnitude,
                }
            };
            report.set_config("kind", "trajectory");
            report.set_config("frames", spec.frames as u64);
            report.set_config("dims", spec.dims as u64);
            report.set_config("seed", spec.seed);
            report.set_config("noise_sigma", spec.noise_sigma);
            report.set_config("outlier_rate", spec.outlier_rate);
            report.set_config("outlier_magnitude", spec.outlier_magnitude);

            let trajectory = generate(&spec)?;
            let clean_path = out_dir.join("clean.csv");
            let noisy_path = out_dir.join("noisy.csv");
            let manifest_path = out_dir.join("manifest.json");
            write_control_sequence_csv(&clean_path, &trajectory.clean)?;
            write_control_sequence_csv(&noisy_path, &trajectory.noisy)?;
            let manifest = serde_json::json!({
                "seed": spec.seed,
                "frames": spec.frames,
                "dims": spec.dims,
                "noise_sigma": spec.noise_sigma,
                "outlier_rate": spec.outlier_rate,
                "outlier_magnitude": spec.outlier_magnitude,
                "spikes": trajectory.spikes,
            });
            let text = serde_json::to_string_pretty(&manifest)
                .expect("manifest values are all serializable");
            atomic_write(&manifest_path, text.as_bytes())?;
            report.add_output(&clean_path)?;
            report.add_output(&noisy_path)?;
            report.add_output(&manifest_path)?;
            report.add_metric("spike_count", trajectory.spikes.len() as f64);
        }
        kind @ (SynthKind::Zero | SynthKind::Constant | SynthKind::Radial) => {
            let (name, flow_kind) = match kind {
                SynthKind::Zero => ("zero", FlowKind::Zero),
                SynthKind::Constant => (
                    "constant",
                    FlowKind::Constant {
                        u: args.flow_u,
                        v: args.flow_v,
                    },
                ),
                SynthKind::Radial => ("radial", FlowKind::Radial { scale: args.scale }),
                SynthKind::Trajectory => unreachable!("handled above"),
            };
            report.set_config("kind", name);
            report.set_config("width", args.width as u64);
            report.set_config("height", args.height as u64);
            report.set_config("count", args.count as u64);
            report.set_config("seed", cli.seed);

            let flows = seqstab::synth::synth_flow(flow_kind, args.width, args.height, args.count)?;
            for (i, flow) in flows.iter().enumerate() {
                let path = out_dir.join(format!("flow_{i:04}.flo"));
                write_flo(&path, flow)?;
                report.add_output(&path)?;
            }
        }
    }
    Ok(report)
}

fn cmd_aggregate(cli: &Cli, args: &AggregateArgs) -> Result<RunReport> {
    let mut report = RunReport::new("aggregate");
    report.set_config("heads", args.heads as u64);
    report.set_config("seed", cli.seed);

    let (header, frames) = read_frames_json(&args.input)?;
    report.add_input(&args.input)?;
    let config = AttentionConfig {
        heads: args.heads,
        key_dim: header.key_dim,
        layers: header.layers,
        channels: header.channels,
    };
    let output_path = require_output(cli)?;

    let latent = aggregate(&frames, &config)?;
    write_latent_json(output_path, &latent)?;
    report.add_output(output_path)?;

    // The report carries each head's attention row over the frames.
    let qbar = mean_query(&frames)?;
    let weights = attention_weights(&qbar, &frames, &config)?;
    for h in 0..config.heads {
        for (i, w) in weights.row(h).iter().enumerate() {
            report.add_metric(&format!("weight_h{h}_f{i}"), *w);
        }
    }
    Ok(report)
}
