use std::fmt;
use std::path::Path;
use std::str::FromStr;

use anyhow::{bail, ensure, Context, Result};
use serde::{Deserialize, Serialize};
use tmri_core::phantom::{AnatomyParams, MotionParams};
use tmri_core::register::RegConfig;
use tmri_core::spamm::{SpammParams, TagDirection};

/// Registration input built from a movie.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputRepr {
    /// Horizontal and vertical tagged magnitude frames.
    Raw,
    /// Sine of the harmonic phase of each tag direction.
    Sharp,
}

impl InputRepr {
    pub const ALL: [InputRepr; 2] = [InputRepr::Raw, InputRepr::Sharp];

    pub fn name(self) -> &'static str {
        match self {
            InputRepr::Raw => "raw",
            InputRepr::Sharp => "sharp",
        }
    }
}

impl fmt::Display for InputRepr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for InputRepr {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "raw" => Ok(InputRepr::Raw),
            "sharp" => Ok(InputRepr::Sharp),
            _ => bail!("unknown input representation {s:?} (expected raw or sharp)"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub num_movies: usize,
    pub image_size: usize,
    pub num_frames: usize,
    pub t1_range_ms: [f64; 2],
    pub tr_range_ms: [f64; 2],
    pub alpha_deg: f64,
    pub tag_period_px: f64,
    pub noise_sigma: f64,
    pub motion_amplitude: f64,
    pub motion_smoothness: f64,
    pub split_ratio: [u32; 3],
    pub input_repr: InputRepr,
    pub reg: RegConfig,
    /// Generate motionless single-disk phantoms instead of random movies.
    pub static_phantom: bool,
    /// Trials per loss for `search`.
    pub search_budget: usize,
    /// Validation pairs scored per movie in each search trial, spread evenly
    /// over the frame gaps. Zero scores every pair.
    pub search_pairs_per_movie: usize,
    /// Write measured wall-clock times into reports. Off by default so that
    /// reruns produce byte-identical output.
    pub record_runtime: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let motion = MotionParams::default();
        Self {
            seed: 0,
            num_movies: 50,
            image_size: 96,
            num_frames: 40,
            t1_range_ms: [800.0, 1000.0],
            tr_range_ms: [15.0, 25.0],
            alpha_deg: 15.0,
            tag_period_px: 9.6,
            noise_sigma: 0.02,
            motion_amplitude: motion.amplitude,
            motion_smoothness: motion.smoothness_sigma,
            split_ratio: [6, 2, 2],
            input_repr: InputRepr::Raw,
            reg: RegConfig::default(),
            static_phantom: false,
            search_budget: 30,
            search_pairs_per_movie: 0,
            record_runtime: false,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let cfg: Self = serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(self.num_movies >= 1, "num_movies must be >= 1");
        ensure!(self.num_frames >= 2, "num_frames must be >= 2");
        ensure!(self.split_ratio.iter().all(|&r| r > 0), "split ratios must be positive");
        for (name, [lo, hi]) in [("t1_range_ms", self.t1_range_ms), ("tr_range_ms", self.tr_range_ms)] {
            ensure!(lo.is_finite() && hi.is_finite() && lo <= hi, "{name} must be an ordered range");
        }
        ensure!(self.noise_sigma >= 0.0, "noise_sigma must be >= 0");
        // physical parameters at both corners of the ranges
        for t1 in self.t1_range_ms {
            for tr in self.tr_range_ms {
                self.spamm(t1, tr, TagDirection::Horizontal)?;
            }
        }
        self.anatomy().validate()?;
        self.motion().validate()?;
        self.reg.validate()?;
        ensure!(self.search_budget >= 1, "search_budget must be >= 1");
        Ok(())
    }

    pub fn spamm(&self, t1: f64, tr: f64, direction: TagDirection) -> Result<SpammParams> {
        Ok(SpammParams::new(t1, tr, self.alpha_deg, self.tag_period_px, direction)?)
    }

    pub fn anatomy(&self) -> AnatomyParams {
        AnatomyParams::for_size(self.image_size)
    }

    pub fn motion(&self) -> MotionParams {
        MotionParams {
            amplitude: self.motion_amplitude,
            smoothness_sigma: self.motion_smoothness,
            num_frames: self.num_frames,
        }
    }
}

/// Seed for movie `index`, mixed from the master seed with splitmix64 so
/// neighbouring indices give unrelated streams.
pub fn child_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        ExperimentConfig::default().validate().unwrap();
    }

    #[test]
    fn rejects_bad_configs() {
        let bad = [
            ExperimentConfig { split_ratio: [6, 0, 2], ..Default::default() },
            ExperimentConfig { t1_range_ms: [1000.0, 800.0], ..Default::default() },
            ExperimentConfig { alpha_deg: 95.0, ..Default::default() },
            ExperimentConfig { tag_period_px: 2.0, ..Default::default() },
            ExperimentConfig { num_frames: 1, ..Default::default() },
        ];
        for cfg in bad {
            assert!(cfg.validate().is_err(), "{cfg:?}");
        }
    }

    #[test]
    fn json_uses_field_names() {
        let text = serde_json::to_string(&ExperimentConfig::default()).unwrap();
        for key in ["seed", "num_movies", "image_size", "num_frames", "t1_range_ms", "tr_range_ms", "alpha_deg",
            "tag_period_px", "noise_sigma", "split_ratio", "input_repr", "reg", "lambda", "iters_per_level"] {
            assert!(text.contains(&format!("\"{key}\"")), "{key}");
        }
        let partial: ExperimentConfig = serde_json::from_str(r#"{"seed": 9, "input_repr": "sharp"}"#).unwrap();
        assert_eq!(partial.seed, 9);
        assert_eq!(partial.input_repr, InputRepr::Sharp);
        assert_eq!(partial.num_frames, 40);
    }

    #[test]
    fn child_seeds_differ() {
        let seeds: std::collections::HashSet<u64> = (0..1000).map(|i| child_seed(42, i)).collect();
        assert_eq!(seeds.len(), 1000);
        assert_eq!(child_seed(42, 3), child_seed(42, 3));
        assert_ne!(child_seed(42, 3), child_seed(43, 3));
    }
}
