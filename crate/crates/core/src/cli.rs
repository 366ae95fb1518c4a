//! Command-line surface. The `dvo` binary only parses arguments and maps
//! errors to exit codes; everything else lives here so it can be tested.
//!
//! Exit codes: 0 success, 1 runtime or load failure, 2 invalid
//! configuration or usage.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::config::RunConfig;
use crate::dataset::{load_sequence, read_trajectory, render_synthetic, write_trajectory, SceneFile};
use crate::error::{Error, Result};
use crate::eval::{absolute_trajectory_error, compute_rmse, drift_error, plot_data, DEFAULT_MAX_DT};
use crate::pipeline::run_pipeline;

#[derive(Debug, Parser)]
#[command(name = "dvo", version, about = "Decoupled RGB-D visual odometry")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run odometry over a sequence and write a TUM trajectory.
    Run {
        /// Sequence manifest (TOML).
        manifest: PathBuf,
        /// Output trajectory.
        out: PathBuf,
        /// Run configuration (TOML); defaults apply to missing keys.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides the configured seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        single_thread: bool,
        /// Per-frame diagnostics CSV.
        #[arg(long)]
        diagnostics: Option<PathBuf>,
        #[arg(long)]
        max_frames: Option<usize>,
    },
    /// Render a synthetic plane scene into a loadable sequence.
    Synth {
        /// Scene description (TOML).
        spec: PathBuf,
        out_dir: PathBuf,
        /// Overrides the scene's noise seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Render only the first N poses.
        #[arg(long)]
        max_frames: Option<usize>,
    },
    /// Absolute trajectory error of an estimate against ground truth.
    Eval {
        est: PathBuf,
        gt: PathBuf,
        /// Write the five-column CSV report here.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Compare raw positions, without rigid alignment.
        #[arg(long)]
        no_align: bool,
    },
    /// Drift between the estimated first-to-last motion and two tag poses.
    Drift {
        est: PathBuf,
        /// Trajectory file whose first and last poses are the camera in the
        /// tag frame at the first and last frame.
        tags: PathBuf,
    },
    /// Polyline CSV of one or more trajectories, aligned to the first.
    PlotData {
        #[arg(required = true)]
        trajectories: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config { .. } => 2,
        _ => 1,
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Executes one subcommand; human-readable output goes to stdout.
pub fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run {
            manifest,
            out,
            config,
            seed,
            single_thread,
            diagnostics,
            max_frames,
        } => {
            let mut cfg = match &config {
                Some(p) => RunConfig::load(p)?,
                None => RunConfig::default(),
            };
            if let Some(s) = seed {
                cfg.seed = s;
            }
            cfg.pipeline.single_thread |= single_thread;
            cfg.validate()?;
            let seq = load_sequence(&manifest)?;
            let limit = max_frames.unwrap_or(usize::MAX);
            log::info!("running {} frame(s) from {}", seq.len().min(limit), manifest.display());
            let output = run_pipeline(seq.frames().take(limit), &seq.intrinsics, &cfg)?;
            write_trajectory(&output.trajectory, &out)?;
            if let Some(d) = diagnostics {
                write_text(&d, &output.diagnostics_csv(&cfg, true))?;
            }
            let skipped = output.diagnostics.iter().filter(|d| d.skipped.is_some()).count();
            println!(
                "{} pose(s) written to {} ({} frame(s) skipped)",
                output.trajectory.len(),
                out.display(),
                skipped
            );
            if let Some(gt) = seq.load_groundtruth()? {
                match absolute_trajectory_error(&output.trajectory, &gt, DEFAULT_MAX_DT) {
                    Ok(r) => println!("ATE RMSE {:.4} m over {} poses", r.rmse, r.errors.len()),
                    Err(e) => log::warn!("ground truth present but not comparable: {e}"),
                }
            }
            Ok(())
        }
        Command::Synth {
            spec,
            out_dir,
            seed,
            max_frames,
        } => {
            let mut scene = SceneFile::load(&spec)?;
            if let Some(s) = seed {
                scene.seed = s;
            }
            let base = spec.parent().unwrap_or(Path::new("."));
            let mut spec = scene.into_spec(base)?;
            if let Some(n) = max_frames {
                spec.trajectory.truncate(n);
            }
            let manifest = render_synthetic(&spec, &out_dir)?;
            println!("{} frame(s); manifest {}", spec.trajectory.len(), manifest.display());
            Ok(())
        }
        Command::Eval {
            est,
            gt,
            report,
            no_align,
        } => {
            let est = read_trajectory(&est)?;
            let gt = read_trajectory(&gt)?;
            let r = if no_align {
                compute_rmse(&est, &gt, DEFAULT_MAX_DT)?
            } else {
                absolute_trajectory_error(&est, &gt, DEFAULT_MAX_DT)?
            };
            print!("{}", r.to_text());
            if let Some(path) = report {
                write_text(&path, &r.to_csv())?;
            }
            Ok(())
        }
        Command::Drift { est, tags } => {
            let est = read_trajectory(&est)?;
            let tags = read_trajectory(&tags)?;
            let ends = |t: &[crate::dataset::TimedPose], what: &str| match (t.first(), t.last()) {
                (Some(a), Some(b)) if t.len() >= 2 => Ok((a.pose, b.pose)),
                _ => Err(Error::Insufficient(format!("{what} needs at least two poses"))),
            };
            let (e0, e1) = ends(&est, "estimate")?;
            let (t0, t1) = ends(&tags, "tag trajectory")?;
            let d = drift_error(&e0, &e1, &t0, &t1)?;
            println!("drift {:.6} m  rotation {:.4} deg", d.translation, d.rotation_deg);
            Ok(())
        }
        Command::PlotData { trajectories, out } => {
            let series = trajectories
                .iter()
                .map(|p| {
                    let label = p
                        .file_stem()
                        .map(|s| s.to_string_lossy().replace(',', "_"))
                        .unwrap_or_else(|| "trajectory".into());
                    read_trajectory(p).map(|t| (label, t))
                })
                .collect::<Result<Vec<_>>>()?;
            write_text(&out, &plot_data(&series, DEFAULT_MAX_DT))?;
            println!("{} series written to {}", series.len(), out.display());
            Ok(())
        }
    }
}

/// Parses `args` (including the program name) and runs; returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
