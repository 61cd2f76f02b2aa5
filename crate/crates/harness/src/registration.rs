//! Batch registration of movies and its on-disk output.

use std::fs;
use std::path::Path;
use std::time::Instant;

use anyhow::{ensure, Context, Result};
use serde::{Deserialize, Serialize};
use tmri_core::imgcore::VectorField2D;
use tmri_core::losses::LossKind;
use tmri_core::par;
use tmri_core::register::{register_pair, RegConfig, RegResult};

use crate::config::{ExperimentConfig, InputRepr};
use crate::dataset::{load_movie, movie_dir_name, Manifest, Split};
use crate::inputs::PreparedMovie;
use crate::tmri;

pub const REGISTRATION_MANIFEST: &str = "registration.json";

/// Estimate for one (fixed frame 0, moving frame) pair.
#[derive(Debug, Clone)]
pub struct PairEstimate {
    pub frame: usize,
    pub result: RegResult,
    pub runtime_ms: f64,
}

/// Registers frame 0 of `movie` against each of `frames`.
pub fn register_frames(movie: &PreparedMovie, frames: &[usize], reg: &RegConfig, record_runtime: bool) -> Result<Vec<PairEstimate>> {
    ensure!(frames.iter().all(|&n| n >= 1 && n < movie.num_frames()), "frame index out of range");
    par::map(frames, |&n| {
        let start = Instant::now();
        let result = register_pair(&movie.channels[0], &movie.channels[n], reg)?;
        let runtime_ms = if record_runtime { start.elapsed().as_secs_f64() * 1e3 } else { 0.0 };
        Ok(PairEstimate { frame: n, result, runtime_ms })
    })
    .into_iter()
    .collect()
}

/// Registers frame 0 against every later frame.
pub fn register_all_frames(movie: &PreparedMovie, reg: &RegConfig, record_runtime: bool) -> Result<Vec<PairEstimate>> {
    let frames: Vec<usize> = (1..movie.num_frames()).collect();
    register_frames(movie, &frames, reg, record_runtime)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairTrace {
    pub frame: usize,
    pub objective: Vec<f64>,
    pub similarity: Vec<f64>,
    pub smoothness: Vec<f64>,
    pub level_starts: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegisteredMovie {
    pub index: usize,
    pub frames: Vec<usize>,
    pub fields: Vec<String>,
    pub runtime_ms: Vec<f64>,
    pub traces: String,
}

/// Index of a fields directory written by [`cmd_register`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegistrationManifest {
    pub input_repr: InputRepr,
    pub loss: LossKind,
    pub reg: RegConfig,
    pub movies: Vec<RegisteredMovie>,
}

impl RegistrationManifest {
    pub fn load(fields_dir: &Path) -> Result<Self> {
        let path = fields_dir.join(REGISTRATION_MANIFEST);
        let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn method_key(&self) -> String {
        method_key(self.input_repr, self.loss)
    }

    pub fn load_field(&self, fields_dir: &Path, movie: usize, frame: usize) -> Result<VectorField2D> {
        let m = self
            .movies
            .iter()
            .find(|m| m.index == movie)
            .with_context(|| format!("movie {movie} was not registered in {}", fields_dir.display()))?;
        let k = m
            .frames
            .iter()
            .position(|&f| f == frame)
            .with_context(|| format!("frame {frame} of movie {movie} was not registered"))?;
        tmri::read_field(&fields_dir.join(&m.fields[k]))
    }
}

pub fn method_key(repr: InputRepr, loss: LossKind) -> String {
    format!("{repr}/{loss}")
}

/// Writes estimated fields for the movies of `split` (all movies when
/// `None`) using `cfg.input_repr` and `cfg.reg`.
pub fn cmd_register(dataset_dir: &Path, cfg: &ExperimentConfig, split: Option<Split>, out_dir: &Path) -> Result<RegistrationManifest> {
    cfg.reg.validate()?;
    let manifest = Manifest::load(dataset_dir)?;
    let tag_period = manifest.config.tag_period_px;
    fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let mut movies = Vec::new();
    for record in manifest.movies.iter().filter(|m| split.is_none_or(|s| m.split == s)) {
        let movie = load_movie(dataset_dir, record)?;
        let prepared = PreparedMovie::new(record.index, movie, cfg.input_repr, tag_period)?;
        let estimates = register_all_frames(&prepared, &cfg.reg, cfg.record_runtime)?;
        let dir = movie_dir_name(record.index);
        fs::create_dir_all(out_dir.join(&dir))?;
        let mut fields = Vec::with_capacity(estimates.len());
        let mut traces = Vec::with_capacity(estimates.len());
        for e in &estimates {
            let name = format!("{dir}/field_{:03}.tmri", e.frame);
            tmri::write_field(&out_dir.join(&name), &e.result.field)?;
            fields.push(name);
            traces.push(PairTrace {
                frame: e.frame,
                objective: e.result.objective_trace.clone(),
                similarity: e.result.similarity_trace.clone(),
                smoothness: e.result.smoothness_trace.clone(),
                level_starts: e.result.level_starts.clone(),
            });
        }
        let trace_name = format!("{dir}/traces.json");
        fs::write(out_dir.join(&trace_name), serde_json::to_string(&traces)?)?;
        movies.push(RegisteredMovie {
            index: record.index,
            frames: estimates.iter().map(|e| e.frame).collect(),
            fields,
            runtime_ms: estimates.iter().map(|e| e.runtime_ms).collect(),
            traces: trace_name,
        });
    }
    ensure!(!movies.is_empty(), "no movies selected for registration");
    let out = RegistrationManifest { input_repr: cfg.input_repr, loss: cfg.reg.loss.kind, reg: cfg.reg.clone(), movies };
    fs::write(out_dir.join(REGISTRATION_MANIFEST), serde_json::to_string_pretty(&out)?)?;
    Ok(out)
}

/// Writes ground-truth fields in the registration layout, as if an
/// estimator had recovered them exactly.
pub fn write_ground_truth_fields(dataset_dir: &Path, out_dir: &Path, repr: InputRepr, loss: LossKind) -> Result<RegistrationManifest> {
    let manifest = Manifest::load(dataset_dir)?;
    fs::create_dir_all(out_dir)?;
    let mut movies = Vec::new();
    for record in &manifest.movies {
        let dir = movie_dir_name(record.index);
        fs::create_dir_all(out_dir.join(&dir))?;
        let frames: Vec<usize> = (1..record.num_frames).collect();
        let mut fields = Vec::new();
        for &n in &frames {
            let name = format!("{dir}/field_{n:03}.tmri");
            fs::copy(dataset_dir.join(&record.files.gt_fields[n]), out_dir.join(&name))?;
            fields.push(name);
        }
        let trace_name = format!("{dir}/traces.json");
        fs::write(out_dir.join(&trace_name), "[]")?;
        movies.push(RegisteredMovie { index: record.index, runtime_ms: vec![0.0; frames.len()], frames, fields, traces: trace_name });
    }
    let mut reg = manifest.config.reg.clone();
    reg.loss = tmri_core::losses::LossConfig::of(loss);
    let out = RegistrationManifest { input_repr: repr, loss, reg, movies };
    fs::write(out_dir.join(REGISTRATION_MANIFEST), serde_json::to_string_pretty(&out)?)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::cmd_simulate;

    fn quick() -> ExperimentConfig {
        let mut cfg = ExperimentConfig {
            num_movies: 5,
            image_size: 24,
            num_frames: 4,
            tag_period_px: 6.0,
            ..Default::default()
        };
        cfg.reg.iters_per_level = 5;
        cfg.reg.levels = 2;
        cfg
    }

    #[test]
    fn one_field_per_moving_frame_and_reruns_match() {
        let data = tempfile::tempdir().unwrap();
        let cfg = quick();
        cmd_simulate(&cfg, data.path()).unwrap();
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let ma = cmd_register(data.path(), &cfg, Some(Split::Test), a.path()).unwrap();
        let mb = cmd_register(data.path(), &cfg, Some(Split::Test), b.path()).unwrap();
        assert_eq!(ma, mb);
        assert_eq!(ma.movies.len(), 1);
        assert_eq!(ma.movies[0].fields.len(), cfg.num_frames - 1);
        for f in &ma.movies[0].fields {
            assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap());
        }
        let traces: Vec<PairTrace> =
            serde_json::from_str(&fs::read_to_string(a.path().join(&ma.movies[0].traces)).unwrap()).unwrap();
        assert_eq!(traces.len(), cfg.num_frames - 1);
        assert!(traces.iter().all(|t| !t.objective.is_empty()));
        assert_eq!(ma, RegistrationManifest::load(a.path()).unwrap());
    }

    #[test]
    fn missing_dataset_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(cmd_register(&dir.path().join("nope"), &quick(), None, dir.path()).is_err());
    }
}
