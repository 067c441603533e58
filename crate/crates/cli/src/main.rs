//! Batch CLI for the crowd-congestion toolkit.
//!
//! Subcommands: `detect` (JSONL detections in, alerts + plots out),
//! `simulate` (synthetic blob scene in, alerts + plot out), `gradcheck`
//! (gradient verification suite), `demo-activations` (loss curves and
//! decision grids for the two feed-forward variants).
//!
//! Exit codes: 0 on success, 1 on any error, 2 on gradcheck failure.

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use stampede_core::congestion::detect;
use stampede_core::geometry::{field_of_view, CameraIntrinsics, FovKind, GroundPoint};
use stampede_core::kernels::toy::{
    first_epoch_at_or_below, loss_csv, render_decision_grid, train_toy_classifier, two_moons,
    ToyVariant,
};
use stampede_core::kernels::{gradient_suite, TrainConfig};
use stampede_core::pipeline::{
    generate_synthetic_scene, ingest_detections, parse_config, run_pipeline, write_scatter,
    BlobSpec, PipelineConfig, SceneSpec,
};
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(
    name = "stampede",
    about = "Crowd-congestion analytics: detection ingestion, clustering-based congestion alerts, scatter plots, and kernel verification demos",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Ingest a detections JSONL file and emit alerts plus per-frame plots.
    Detect {
        /// Detections file, one JSON object per line.
        #[arg(long)]
        input: PathBuf,
        /// `key = value` run configuration.
        #[arg(long)]
        config: PathBuf,
        /// Output directory (created if missing).
        #[arg(long)]
        out: PathBuf,
        /// Worker threads for frame processing; output is identical for
        /// any value.
        #[arg(long, default_value_t = 1)]
        workers: usize,
    },
    /// Generate a synthetic blob scene and run the detector on it.
    Simulate {
        /// Blob list `cx,cy,sigma,count` separated by `;`, e.g.
        /// `0,0,0.2,50;5,0,0.2,50;2.5,4.33,0.2,50`.
        #[arg(long)]
        blobs: String,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the analytic-vs-finite-difference gradient suite.
    Gradcheck {
        /// Number of random configurations.
        #[arg(long, default_value_t = 20)]
        cases: usize,
        #[arg(long, default_value_t = 2024)]
        seed: u64,
    },
    /// Train the toy classifier with both feed-forward variants and emit
    /// the loss CSV and decision-grid SVGs.
    DemoActivations {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Print the field-of-view angles implied by camera intrinsics, as a
    /// calibration plausibility check.
    Fov {
        /// Focal length in pixels.
        #[arg(long)]
        focal: f64,
        /// Sensor width in pixels.
        #[arg(long)]
        width: f64,
        /// Sensor height in pixels.
        #[arg(long)]
        height: f64,
    },
}

fn main() -> std::process::ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            std::process::ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<std::process::ExitCode> {
    match cli.command {
        Command::Detect {
            input,
            config,
            out,
            workers,
        } => {
            let frames = ingest_detections(&input)
                .with_context(|| format!("reading {}", input.display()))?;
            let cfg = parse_config(&config)
                .with_context(|| format!("reading {}", config.display()))?;
            run_and_emit(&frames, &cfg, workers, &out)?;
            Ok(std::process::ExitCode::SUCCESS)
        }
        Command::Simulate { blobs, config, out } => {
            let cfg = parse_config(&config)
                .with_context(|| format!("reading {}", config.display()))?;
            let spec = SceneSpec {
                blobs: parse_blobs(&blobs)?,
                seed: cfg.congestion.seed,
            };
            let points = generate_synthetic_scene(&spec)?;
            std::fs::create_dir_all(&out)
                .with_context(|| format!("creating {}", out.display()))?;
            let report = detect(&points, &cfg.congestion)?;
            let flagged = report.congested_clusters.clone();
            write_scatter(&report, &points, out.join("scene.svg"))?;
            let mut alerts = String::new();
            for cluster in 0..cfg.congestion.k {
                let record = stampede_core::pipeline::AlertRecord {
                    frame_id: 0,
                    cluster_index: cluster,
                    centroid: report.centroids[cluster],
                    member_count: report.member_count(cluster),
                    flagged: flagged.contains(&cluster),
                };
                alerts.push_str(&record.to_json_line());
                alerts.push('\n');
            }
            std::fs::write(out.join("alerts.jsonl"), alerts)?;
            println!(
                "simulated {} points; flagged clusters: {:?}",
                points.len(),
                flagged
            );
            Ok(std::process::ExitCode::SUCCESS)
        }
        Command::Gradcheck { cases, seed } => {
            let report = gradient_suite(cases, seed, 1e-4)?;
            println!(
                "checked {} configurations, {} coordinates; max relative error {:.3e}",
                report.cases.len(),
                report
                    .cases
                    .iter()
                    .map(|c| c.coordinates_checked)
                    .sum::<usize>(),
                report.max_rel_error
            );
            if report.passed() {
                println!("gradcheck PASS (tolerance {:.1e})", report.tolerance);
                Ok(std::process::ExitCode::SUCCESS)
            } else {
                println!("gradcheck FAIL (tolerance {:.1e})", report.tolerance);
                Ok(std::process::ExitCode::from(2))
            }
        }
        Command::DemoActivations { out, seed } => {
            demo_activations(&out, seed)?;
            Ok(std::process::ExitCode::SUCCESS)
        }
        Command::Fov {
            focal,
            width,
            height,
        } => {
            let cam = CameraIntrinsics::new(focal, width, height)?;
            for (kind, name) in [
                (FovKind::Diagonal, "diagonal"),
                (FovKind::Horizontal, "horizontal"),
                (FovKind::Vertical, "vertical"),
            ] {
                let radians = field_of_view(kind, &cam);
                println!("{name}: {:.2} deg ({radians:.4} rad)", radians.to_degrees());
            }
            Ok(std::process::ExitCode::SUCCESS)
        }
    }
}

fn run_and_emit(
    frames: &[stampede_core::pipeline::FrameDetections],
    cfg: &PipelineConfig,
    workers: usize,
    out: &Path,
) -> Result<()> {
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let run = run_pipeline(frames, cfg, workers)?;
    for warning in &run.warnings {
        eprintln!("warning: frame {}: {}", warning.frame_id, warning.message);
    }
    std::fs::write(out.join("alerts.jsonl"), run.alerts_jsonl())?;
    for frame in &run.frames {
        write_scatter(
            &frame.report,
            &frame.points,
            out.join(format!("frame_{}.svg", frame.frame_id)),
        )?;
    }
    println!(
        "processed {} frames ({} skipped), wrote {} alerts",
        run.frames.len() + run.warnings.len(),
        run.warnings.len(),
        run.alerts.len()
    );
    Ok(())
}

fn parse_blobs(text: &str) -> Result<Vec<BlobSpec>> {
    let mut blobs = Vec::new();
    for (i, chunk) in text.split(';').enumerate() {
        let fields: Vec<&str> = chunk.split(',').map(str::trim).collect();
        if fields.len() != 4 {
            bail!("blob {i}: expected `cx,cy,sigma,count`, got `{chunk}`");
        }
        let parse = |s: &str, what: &str| -> Result<f64> {
            s.parse::<f64>()
                .with_context(|| format!("blob {i}: invalid {what} `{s}`"))
        };
        blobs.push(BlobSpec {
            center: GroundPoint {
                x: parse(fields[0], "cx")?,
                y: parse(fields[1], "cy")?,
            },
            sigma: parse(fields[2], "sigma")?,
            count: fields[3]
                .parse::<usize>()
                .with_context(|| format!("blob {i}: invalid count `{}`", fields[3]))?,
        });
    }
    Ok(blobs)
}

fn demo_activations(out: &Path, seed: u64) -> Result<()> {
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let dataset = two_moons(100, 2.5, 0.375, seed);
    let cfg = TrainConfig {
        seed,
        ..TrainConfig::default()
    };
    let relu = train_toy_classifier(ToyVariant::Relu, &dataset, &cfg)?;
    let swiglu = train_toy_classifier(ToyVariant::Swiglu, &dataset, &cfg)?;
    for trace in [&relu, &swiglu] {
        if trace.diverged {
            eprintln!("warning: {:?} training diverged", trace.variant);
        }
    }

    std::fs::write(out.join("loss.csv"), loss_csv(&relu.losses, &swiglu.losses))?;
    std::fs::write(
        out.join("decision_relu.svg"),
        render_decision_grid(&relu, &dataset),
    )?;
    std::fs::write(
        out.join("decision_swiglu.svg"),
        render_decision_grid(&swiglu, &dataset),
    )?;

    let relu_final = relu.losses.last().copied().unwrap_or(f64::NAN);
    let swiglu_final = swiglu.losses.last().copied().unwrap_or(f64::NAN);
    println!(
        "relu:   final loss {relu_final:.6}, accuracy {:.1}%",
        100.0 * relu.final_accuracy
    );
    println!(
        "swiglu: final loss {swiglu_final:.6}, accuracy {:.1}%",
        100.0 * swiglu.final_accuracy
    );
    match first_epoch_at_or_below(&swiglu.losses, relu_final) {
        Some(epoch) => {
            let total = relu.losses.len();
            println!(
                "swiglu reached the relu final loss at epoch {epoch} of {total} \
                 ({:.0}% of the relu schedule)",
                100.0 * epoch as f64 / total as f64
            );
        }
        None => println!("swiglu did not reach the relu final loss in this run"),
    }
    Ok(())
}
