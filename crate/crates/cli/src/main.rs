use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use cellforge_core::config::{load_stats, DatasetConfig};
use cellforge_core::io::layout::{frame_file_name, FRAME_PREFIX};
use cellforge_core::io::{
    list_frames, read_label_image, read_raw_frame, read_track_file, write_gray_image,
    write_rgb_image,
};
use cellforge_core::pipeline::{
    attach_and_correct, generate_dataset, read_json, render_params, write_conditioning,
    write_ground_truth, write_json,
};
use cellforge_core::plan::{plan_mixing, plan_training};
use cellforge_core::render::pairs::Provenance;
use cellforge_core::render::{
    augment_pair, build_training_pairs, AnnotatedVideo, AugmentMode, PairKind, RenderParams,
};
use cellforge_core::stats::{centroids_from_labels, estimate_statistics};
use cellforge_core::tra::{evaluate_dirs, AogmWeights};
use cellforge_core::{
    derive_child_seed, motion, Error, ErrorKind, Execution, ImageSize, RandomSource, Result,
    SimulationConfig, TimeLapseTrajectory,
};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Parser)]
#[command(
    name = "cellforge",
    version,
    about = "Synthetic cell time-lapse toolkit"
)]
struct Cli {
    /// Run every batch loop on the calling thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate motion-model statistics from an annotated video.
    EstimateStats {
        /// Track file (`L B E P` per line).
        #[arg(long)]
        tracks: PathBuf,
        /// Directory of 16-bit tracking-marker frames `t0000.png, ...`.
        #[arg(long)]
        markers: PathBuf,
        /// Directory of 16-bit segmentation frames; defaults to the markers.
        #[arg(long)]
        seg: Option<PathBuf>,
        /// Write the report as JSON to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Simulate one video and write its track file and trajectory.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        stats: Option<PathBuf>,
        /// Video index; the seed is derived from the master seed and this index.
        #[arg(long, default_value_t = 0)]
        video: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render detection labels and conditioning maps of a simulated trajectory.
    RenderConditioning {
        #[arg(long)]
        trajectory: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        stats: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build conditioning/target training pairs from a real annotated video.
    BuildTrainingPairs {
        /// Directory of raw frames (8- or 16-bit grayscale).
        #[arg(long)]
        raw: PathBuf,
        #[arg(long)]
        tracks: PathBuf,
        /// Directory of 16-bit tracking-marker frames.
        #[arg(long)]
        markers: PathBuf,
        /// Mean cell area in pixels².
        #[arg(long)]
        mean_area: f64,
        #[arg(long, default_value_t = 6)]
        mitosis_cycle_length: u32,
        #[arg(long, value_enum, default_value_t = Augment::None)]
        augment: Augment,
        /// Augmented copies per pair.
        #[arg(long, default_value_t = 1)]
        copies: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Correct external segmentation masks against a generated video's detections.
    CorrectSeg {
        /// Generated video directory (with manifest.json and trajectory.json).
        #[arg(long)]
        video: PathBuf,
        /// Directory of 16-bit mask frames, one per video frame.
        #[arg(long)]
        masks: PathBuf,
        /// Write the report as JSON to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score a tracking result against ground truth.
    EvaluateTra {
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        pred: PathBuf,
        /// `ns,fn,fp,ed,ea,ec`
        #[arg(long, default_value = "5,10,1,1,1.5,1")]
        weights: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Training step budget for a given cell density.
    PlanTraining {
        /// Mean number of cells per frame.
        #[arg(long)]
        cells: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Synthetic frames needed for a target synthetic fraction.
    PlanMixing {
        #[arg(long)]
        real_frames: u64,
        #[arg(long)]
        alpha: f64,
        #[arg(long, default_value_t = 12)]
        frames_per_video: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Simulate and export a whole dataset.
    GenerateDataset {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        stats: Option<PathBuf>,
        /// Overrides `n_videos` from the config.
        #[arg(long)]
        videos: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Augment {
    None,
    Patch,
    Full,
}

fn emit<T: Serialize>(value: &T, out: Option<&Path>) -> Result<()> {
    let text =
        serde_json::to_string_pretty(value).map_err(|e| Error::invalid("json", e.to_string()))?;
    println!("{text}");
    if let Some(path) = out {
        write_json(path, value)?;
    }
    Ok(())
}

fn read_label_dir(dir: &Path, exec: Execution) -> Result<Vec<cellforge_core::LabelImage>> {
    let paths = list_frames(dir)?;
    Ok(exec.try_map_range(paths.len(), |i| read_label_image(&paths[i]))?)
}

fn simulation_config(
    config: &Path,
    stats: Option<&Path>,
) -> Result<(DatasetConfig, SimulationConfig)> {
    let cfg = DatasetConfig::load(config)?;
    let base = stats.map(load_stats).transpose()?;
    let sim = cfg.simulation_config(base.as_ref())?;
    Ok((cfg, sim))
}

#[derive(Serialize)]
struct SimulationReport {
    video: usize,
    seed: u64,
    frames: usize,
    cell_counts: Vec<usize>,
    track_count: usize,
    division_count: usize,
}

#[derive(Serialize)]
struct PairEntry {
    kind: PairKind,
    conditioning: String,
    target: String,
    provenance: Provenance,
}

#[derive(Serialize)]
struct PairsReport {
    position_pairs: usize,
    movement_pairs: usize,
    written: usize,
}

fn run(cli: Cli) -> Result<()> {
    let exec = if cli.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    };
    match cli.command {
        Command::EstimateStats {
            tracks,
            markers,
            seg,
            out,
        } => {
            let tracks = read_track_file(&tracks)?;
            let marker_frames = read_label_dir(&markers, exec)?;
            let seg_frames = match seg {
                Some(dir) => read_label_dir(&dir, exec)?,
                None => marker_frames.clone(),
            };
            let report = estimate_statistics(&tracks, &marker_frames, &seg_frames, exec)?;
            emit(&report, out.as_deref())
        }
        Command::Simulate {
            config,
            stats,
            video,
            out,
        } => {
            let (_, sim) = simulation_config(&config, stats.as_deref())?;
            let seed = derive_child_seed(sim.master_seed, video as u64);
            let trajectory = motion::simulate(&sim, &mut RandomSource::from_seed(seed))?;
            if let Some(dir) = &out {
                write_ground_truth(dir, &trajectory)?;
            }
            emit(
                &SimulationReport {
                    video,
                    seed,
                    frames: trajectory.frames.len(),
                    cell_counts: trajectory.frames.iter().map(|f| f.len()).collect(),
                    track_count: trajectory.lineage.len(),
                    division_count: trajectory.division_count(),
                },
                None,
            )
        }
        Command::RenderConditioning {
            trajectory,
            config,
            stats,
            out,
        } => {
            let (_, sim) = simulation_config(&config, stats.as_deref())?;
            let trajectory: TimeLapseTrajectory = read_json(&trajectory)?;
            trajectory.validate()?;
            write_conditioning(&out, &trajectory, &render_params(&sim))?;
            emit(
                &serde_json::json!({
                    "frames": trajectory.frames.len(),
                    "position_maps": 1,
                    "movement_maps": trajectory.frames.len() - 1,
                    "out": out.display().to_string(),
                }),
                None,
            )
        }
        Command::BuildTrainingPairs {
            raw,
            tracks,
            markers,
            mean_area,
            mitosis_cycle_length,
            augment,
            copies,
            seed,
            out,
        } => {
            let raw_paths = list_frames(&raw)?;
            let raw_frames =
                exec.try_map_range(raw_paths.len(), |i| read_raw_frame(&raw_paths[i]))?;
            let Some(first) = raw_frames.first() else {
                return Err(Error::invalid(
                    "raw frames",
                    format!("{} holds no frames", raw.display()),
                ));
            };
            let marker_frames = read_label_dir(&markers, exec)?;
            if marker_frames.len() != raw_frames.len() {
                return Err(Error::invalid(
                    "markers",
                    format!(
                        "{} marker frames for {} raw frames",
                        marker_frames.len(),
                        raw_frames.len()
                    ),
                ));
            }
            if !(mean_area.is_finite() && mean_area > 0.0) {
                return Err(Error::invalid("mean_area", "must be > 0"));
            }
            let params = RenderParams {
                image_size: ImageSize::new(first.height(), first.width()),
                mean_area,
                mitosis_cycle_length,
            };
            let video = AnnotatedVideo {
                tracks: read_track_file(&tracks)?,
                centroids: centroids_from_labels(&marker_frames, exec),
                raw: raw_frames,
            };
            let pairs = build_training_pairs(&video, &params, exec)?;
            let mut rng = RandomSource::from_seed(seed);
            let mut written = Vec::new();
            for pair in &pairs {
                if augment == Augment::None {
                    written.push(pair.clone());
                    continue;
                }
                let mode = if augment == Augment::Patch {
                    AugmentMode::Patch
                } else {
                    AugmentMode::Full
                };
                for _ in 0..copies {
                    written.push(augment_pair(pair, &mut rng, mode)?);
                }
            }
            let (cond_dir, target_dir) = (out.join("conditioning"), out.join("target"));
            for d in [&cond_dir, &target_dir] {
                fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
            }
            let mut entries = Vec::with_capacity(written.len());
            for (i, pair) in written.iter().enumerate() {
                let name = frame_file_name(FRAME_PREFIX, i);
                write_rgb_image(&pair.conditioning, cond_dir.join(&name))?;
                write_gray_image(&pair.target, target_dir.join(&name))?;
                entries.push(PairEntry {
                    kind: pair.kind,
                    conditioning: format!("conditioning/{name}"),
                    target: format!("target/{name}"),
                    provenance: pair.provenance,
                });
            }
            write_json(&out.join("pairs.json"), &entries)?;
            emit(
                &PairsReport {
                    position_pairs: pairs
                        .iter()
                        .filter(|p| p.kind == PairKind::Position)
                        .count(),
                    movement_pairs: pairs
                        .iter()
                        .filter(|p| p.kind == PairKind::Movement)
                        .count(),
                    written: written.len(),
                },
                None,
            )
        }
        Command::CorrectSeg { video, masks, out } => {
            let report = attach_and_correct(&video, &masks, exec)?;
            emit(&report, out.as_deref())?;
            if !report.bijection_holds() {
                return Err(Error::invalid(
                    "corrected masks",
                    "labels are not in bijection with detections",
                ));
            }
            Ok(())
        }
        Command::EvaluateTra {
            gt,
            pred,
            weights,
            out,
        } => {
            let weights: AogmWeights = weights.parse()?;
            let report = evaluate_dirs(&gt, &pred, &weights, exec)?;
            emit(&report, out.as_deref())
        }
        Command::PlanTraining { cells, out } => emit(&plan_training(cells)?, out.as_deref()),
        Command::PlanMixing {
            real_frames,
            alpha,
            frames_per_video,
            out,
        } => emit(
            &plan_mixing(real_frames, alpha, frames_per_video)?,
            out.as_deref(),
        ),
        Command::GenerateDataset {
            config,
            stats,
            videos,
            out,
        } => {
            let (cfg, sim) = simulation_config(&config, stats.as_deref())?;
            let summary = generate_dataset(&sim, videos.unwrap_or(cfg.n_videos), &out, exec)?;
            emit(&summary, None)
        }
    }
}

fn exit_code(kind: ErrorKind) -> u8 {
    match kind {
        ErrorKind::Validation => 1,
        ErrorKind::Io => 2,
        ErrorKind::Convergence => 3,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(e.kind()))
        }
    }
}
