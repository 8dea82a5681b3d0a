//! Dataset generation config (flat TOML) and statistics files (JSON).
//!
//! ```toml
//! n_videos = 10
//! frames_per_video = 12
//! mitosis_cycle_length = 6
//! image_height = 512
//! image_width = 512
//! master_seed = 7
//!
//! # Optional when a statistics file is given; these keys win over it.
//! mean_area = 400.0
//! std_area = 60.0
//! gamma_shape = 2.0
//! gamma_scale = 0.01
//! split_probability = 0.02
//! initial_cell_count = 30
//!
//! cell_count_multiplier = 1.0
//! displacement_multiplier = 1.0
//! split_multiplier = 1.0
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DatasetStatistics, Difficulty, ImageSize, SimulationConfig};
use crate::stats::EstimationReport;

fn default_n_videos() -> usize {
    1
}
fn default_frames() -> usize {
    SimulationConfig::DEFAULT_FRAMES_PER_VIDEO
}
fn default_cycle() -> u32 {
    6
}
fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    #[serde(default = "default_n_videos")]
    pub n_videos: usize,
    #[serde(default = "default_frames")]
    pub frames_per_video: usize,
    #[serde(default = "default_cycle")]
    pub mitosis_cycle_length: u32,
    pub image_height: usize,
    pub image_width: usize,
    #[serde(default)]
    pub master_seed: u64,

    pub mean_area: Option<f64>,
    pub std_area: Option<f64>,
    pub gamma_shape: Option<f64>,
    pub gamma_scale: Option<f64>,
    pub split_probability: Option<f64>,
    pub initial_cell_count: Option<usize>,

    #[serde(default = "one")]
    pub cell_count_multiplier: f64,
    #[serde(default = "one")]
    pub displacement_multiplier: f64,
    #[serde(default = "one")]
    pub split_multiplier: f64,
}

impl DatasetConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::invalid("config", e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Merges the config with an optional statistics file and validates the
    /// result.
    pub fn simulation_config(&self, base: Option<&DatasetStatistics>) -> Result<SimulationConfig> {
        let pick = |key: &'static str, own: Option<f64>, from_base: Option<f64>| {
            own.or(from_base).ok_or_else(|| {
                Error::invalid(
                    "config",
                    format!("{key} is not set and no statistics file was given"),
                )
            })
        };
        let stats = DatasetStatistics {
            mean_area: pick("mean_area", self.mean_area, base.map(|b| b.mean_area))?,
            std_area: pick("std_area", self.std_area, base.map(|b| b.std_area))?,
            gamma_shape: pick("gamma_shape", self.gamma_shape, base.map(|b| b.gamma_shape))?,
            gamma_scale: pick("gamma_scale", self.gamma_scale, base.map(|b| b.gamma_scale))?,
            split_probability: pick(
                "split_probability",
                self.split_probability,
                base.map(|b| b.split_probability),
            )?,
            initial_cell_count: self
                .initial_cell_count
                .or(base.map(|b| b.initial_cell_count))
                .ok_or_else(|| {
                    Error::invalid(
                        "config",
                        "initial_cell_count is not set and no statistics file was given",
                    )
                })?,
        };
        let mut config =
            SimulationConfig::new(stats, ImageSize::new(self.image_height, self.image_width));
        config.frames_per_video = self.frames_per_video;
        config.mitosis_cycle_length = self.mitosis_cycle_length;
        config.master_seed = self.master_seed;
        config.difficulty = Difficulty {
            cell_count: self.cell_count_multiplier,
            displacement: self.displacement_multiplier,
            split: self.split_multiplier,
        };
        config.validate()?;
        Ok(config)
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum StatsFile {
    Bare(DatasetStatistics),
    Report(EstimationReport),
}

/// Reads statistics written by `estimate-stats`, either the bare six fields
/// or the full estimation report.
pub fn parse_stats(text: &str) -> Result<DatasetStatistics> {
    let stats = match serde_json::from_str::<StatsFile>(text) {
        Ok(StatsFile::Bare(s)) => s,
        Ok(StatsFile::Report(r)) => r.stats,
        Err(e) => return Err(Error::invalid("statistics file", e.to_string())),
    };
    stats.validate()?;
    Ok(stats)
}

pub fn load_stats(path: &Path) -> Result<DatasetStatistics> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_stats(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    const FULL: &str = r#"
n_videos = 3
frames_per_video = 12
mitosis_cycle_length = 6
image_height = 128
image_width = 96
master_seed = 42
mean_area = 200.0
std_area = 20.0
gamma_shape = 2.0
gamma_scale = 0.01
split_probability = 0.05
initial_cell_count = 8
"#;

    #[test]
    fn full_config() {
        let c = DatasetConfig::parse(FULL).unwrap();
        assert_eq!(c.n_videos, 3);
        let sim = c.simulation_config(None).unwrap();
        assert_eq!(sim.image_size, ImageSize::new(128, 96));
        assert_eq!(sim.master_seed, 42);
        assert_eq!(sim.stats.initial_cell_count, 8);
        assert_eq!(sim.difficulty, Difficulty::default());
    }

    #[test]
    fn stats_file_fills_missing_keys() {
        let c =
            DatasetConfig::parse("image_height = 64\nimage_width = 64\nmean_area = 50.0").unwrap();
        assert!(c.simulation_config(None).is_err());
        let base = DatasetStatistics {
            mean_area: 400.0,
            std_area: 10.0,
            gamma_shape: 1.5,
            gamma_scale: 0.02,
            split_probability: 0.1,
            initial_cell_count: 4,
        };
        let sim = c.simulation_config(Some(&base)).unwrap();
        assert_eq!(sim.stats.mean_area, 50.0);
        assert_eq!(sim.stats.gamma_shape, 1.5);
        assert_eq!(sim.frames_per_video, 12);

        let json = serde_json::to_string(&base).unwrap();
        assert_eq!(parse_stats(&json).unwrap(), base);
    }

    #[test]
    fn rejects_unknown_and_invalid() {
        assert!(DatasetConfig::parse("image_height = 64\nimage_width = 64\nbogus = 1").is_err());
        let small = FULL.replace("image_width = 96", "image_width = 16");
        assert!(DatasetConfig::parse(&small)
            .unwrap()
            .simulation_config(None)
            .is_err());
        assert!(parse_stats("{\"mean_area\": 1}").is_err());
    }
}
