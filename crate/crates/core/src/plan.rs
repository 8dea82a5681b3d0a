//! Training budgets and real/synthetic mixing.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Cells per frame at which the larger training budget starts.
pub const LARGE_TIER_THRESHOLD: u64 = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingPlan {
    pub cn_pos_base_steps: u32,
    pub cn_mov_base_steps: u32,
    pub cn_pos_finetune_steps: u32,
    pub cn_mov_finetune_steps: u32,
}

pub fn plan_training(mean_cells_per_frame: u64) -> Result<TrainingPlan> {
    if mean_cells_per_frame < 1 {
        return Err(Error::invalid("mean_cells_per_frame", "must be >= 1"));
    }
    let (pos, mov, pos_ft, mov_ft) = if mean_cells_per_frame < LARGE_TIER_THRESHOLD {
        (30_000, 10_000, 3_000, 3_000)
    } else {
        (60_000, 20_000, 7_000, 7_000)
    };
    Ok(TrainingPlan {
        cn_pos_base_steps: pos,
        cn_mov_base_steps: mov,
        cn_pos_finetune_steps: pos_ft,
        cn_mov_finetune_steps: mov_ft,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixingPlan {
    pub real_frames: u64,
    pub target_alpha: f64,
    /// `round(α/(1−α) · real)` before rounding up to whole videos.
    pub exact_synthetic_frames: u64,
    pub synthetic_frames: u64,
    pub videos_needed: u64,
    /// `syn / (syn + real)` for the emitted counts.
    pub achieved_alpha: f64,
}

/// Synthetic frames needed for a synthetic fraction `α`, rounded up to a
/// whole number of videos.
pub fn plan_mixing(
    real_frames: u64,
    target_alpha: f64,
    frames_per_video: u64,
) -> Result<MixingPlan> {
    if !(0.0..1.0).contains(&target_alpha) {
        return Err(Error::invalid(
            "alpha",
            format!("must be in [0, 1), got {target_alpha}"),
        ));
    }
    if real_frames < 1 {
        return Err(Error::invalid("real_frames", "must be >= 1"));
    }
    if frames_per_video < 1 {
        return Err(Error::invalid("frames_per_video", "must be >= 1"));
    }
    let exact = (target_alpha / (1.0 - target_alpha) * real_frames as f64).round() as u64;
    let videos = exact.div_ceil(frames_per_video);
    let synthetic = videos * frames_per_video;
    Ok(MixingPlan {
        real_frames,
        target_alpha,
        exact_synthetic_frames: exact,
        synthetic_frames: synthetic,
        videos_needed: videos,
        achieved_alpha: synthetic as f64 / (synthetic + real_frames) as f64,
    })
}
