//! Seeded random hyperparameter search scored by validation Dice.

use std::fs;
use std::path::Path;

use anyhow::{ensure, Context, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use tmri_core::imgcore::VectorField2D;
use tmri_core::losses::{LossConfig, LossKind};
use tmri_core::par;
use tmri_core::register::{register_pair, RegConfig};

use crate::config::{ExperimentConfig, InputRepr};
use crate::dataset::{load_movie, Manifest, Split};
use crate::evaluate::pair_metrics;
use crate::inputs::PreparedMovie;

pub const LAMBDA_RANGE: (f64, f64) = (1e-3, 10.0);
pub const NCC_WINDOWS: [usize; 4] = [5, 7, 9, 11];
pub const MI_BINS: [usize; 3] = [16, 32, 64];
pub const MI_PARZEN_SIGMAS: [f64; 3] = [0.5, 1.0, 2.0];
pub const SSIM_EXPONENTS: [f64; 2] = [0.5, 1.0];
pub const NGF_EPSILONS: [f64; 3] = [0.005, 0.01, 0.05];
pub const MIND_RADII: [usize; 2] = [1, 2];

fn pick<T: Copy, R: Rng>(rng: &mut R, options: &[T]) -> T {
    options[rng.random_range(0..options.len())]
}

/// One random draw from the search space of `kind`. Settings outside the
/// space (pyramid, iterations, optimiser) are taken from `base`.
pub fn sample_config<R: Rng>(base: &RegConfig, kind: LossKind, rng: &mut R) -> RegConfig {
    let (lo, hi) = LAMBDA_RANGE;
    let lambda = (lo.ln() + rng.random::<f64>() * (hi.ln() - lo.ln())).exp();
    let mut loss = LossConfig::of(kind);
    match kind {
        LossKind::Mse => {}
        LossKind::Ncc => loss.ncc_window = pick(rng, &NCC_WINDOWS),
        LossKind::Mi => {
            loss.mi_bins = pick(rng, &MI_BINS);
            loss.mi_parzen_sigma = pick(rng, &MI_PARZEN_SIGMAS);
        }
        LossKind::Ssim => {
            loss.ssim_alpha = pick(rng, &SSIM_EXPONENTS);
            loss.ssim_beta = pick(rng, &SSIM_EXPONENTS);
            loss.ssim_gamma = pick(rng, &SSIM_EXPONENTS);
        }
        LossKind::Ngf => loss.ngf_epsilon = pick(rng, &NGF_EPSILONS),
        LossKind::Mind => loss.mind_patch_radius = pick(rng, &MIND_RADII),
    }
    RegConfig { loss, lambda, ..base.clone() }
}

/// The `budget` trial configurations for `kind`, fully determined by `seed`.
pub fn sample_trials(base: &RegConfig, kind: LossKind, budget: usize, seed: u64) -> Result<Vec<RegConfig>> {
    ensure!(budget >= 1, "search budget must be >= 1");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..budget).map(|_| sample_config(base, kind, &mut rng)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialScore {
    /// Mean validation Dice.
    pub dice: f64,
    /// Mean validation EPE.
    pub epe: f64,
}

/// Index of the best score: highest Dice, then lowest EPE, then lowest index.
pub fn select_best(scores: &[TrialScore]) -> Result<usize> {
    ensure!(!scores.is_empty(), "no trials to select from");
    let mut best = 0;
    for (i, s) in scores.iter().enumerate().skip(1) {
        let b = scores[best];
        if s.dice > b.dice || (s.dice == b.dice && s.epe < b.epe) {
            best = i;
        }
    }
    Ok(best)
}

/// Frames scored per validation movie: `per_movie` moving frames spread
/// evenly from the last frame back towards frame 1, or every frame when zero.
pub fn validation_frames(num_frames: usize, per_movie: usize) -> Vec<usize> {
    let last = num_frames.saturating_sub(1);
    if per_movie == 0 || per_movie >= last {
        return (1..num_frames).collect();
    }
    let mut frames: Vec<usize> = (0..per_movie).map(|j| last - j * last / per_movie).collect();
    frames.sort_unstable();
    frames.dedup();
    frames
}

/// Produces the field for moving `frame` of a movie under a trial config.
/// The first argument is the trial index.
pub type Estimator<'a> = dyn Fn(usize, &PreparedMovie, usize, &RegConfig) -> Result<VectorField2D> + Sync + 'a;

/// The estimator used by real searches: dense registration.
pub fn registration_estimator(_trial: usize, movie: &PreparedMovie, frame: usize, reg: &RegConfig) -> Result<VectorField2D> {
    Ok(register_pair(&movie.channels[0], &movie.channels[frame], reg)?.field)
}

/// Mean Dice and EPE of trial `trial` over the given (movie, frame) pairs.
pub fn score_trial(movies: &[PreparedMovie], pairs: &[(usize, usize)], trial: usize, reg: &RegConfig, estimator: &Estimator) -> Result<TrialScore> {
    ensure!(!pairs.is_empty(), "no validation pairs");
    let metrics = par::map(pairs, |&(m, n)| {
        let est = estimator(trial, &movies[m], n, reg)?;
        pair_metrics(&movies[m].movie, n, &est)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let k = metrics.len() as f64;
    Ok(TrialScore {
        dice: metrics.iter().map(|p| p.dice).sum::<f64>() / k,
        epe: metrics.iter().map(|p| p.epe).sum::<f64>() / k,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub index: usize,
    pub reg: RegConfig,
    pub score: TrialScore,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchOutcome {
    pub input_repr: InputRepr,
    pub loss: LossKind,
    pub trials: Vec<TrialRecord>,
    pub best: usize,
}

impl SearchOutcome {
    pub fn best_config(&self) -> &RegConfig {
        &self.trials[self.best].reg
    }
}

/// Scores every trial against the validation movies and picks the winner.
pub fn run_search(
    movies: &[PreparedMovie],
    per_movie: usize,
    repr: InputRepr,
    trials: Vec<RegConfig>,
    estimator: &Estimator,
) -> Result<SearchOutcome> {
    ensure!(!trials.is_empty(), "search budget must be >= 1");
    ensure!(!movies.is_empty(), "validation split is empty");
    let loss = trials[0].loss.kind;
    let pairs: Vec<(usize, usize)> = movies
        .iter()
        .enumerate()
        .flat_map(|(m, pm)| validation_frames(pm.num_frames(), per_movie).into_iter().map(move |n| (m, n)))
        .collect();
    let mut records = Vec::with_capacity(trials.len());
    for (index, reg) in trials.into_iter().enumerate() {
        let score = score_trial(movies, &pairs, index, &reg, estimator)?;
        records.push(TrialRecord { index, reg, score });
    }
    let scores: Vec<TrialScore> = records.iter().map(|r| r.score).collect();
    let best = select_best(&scores)?;
    Ok(SearchOutcome { input_repr: repr, loss, trials: records, best })
}

/// Loads the validation split and prepares its registration channels.
pub fn load_validation(dataset_dir: &Path, repr: InputRepr) -> Result<Vec<PreparedMovie>> {
    let manifest = Manifest::load(dataset_dir)?;
    let tag_period = manifest.config.tag_period_px;
    manifest
        .in_split(Split::Val)
        .map(|rec| PreparedMovie::new(rec.index, load_movie(dataset_dir, rec)?, repr, tag_period))
        .collect()
}

/// Searches the space of `kind` on the validation split and writes the
/// outcome plus a ready-to-use experiment config with the winning settings.
pub fn cmd_search(dataset_dir: &Path, cfg: &ExperimentConfig, kind: LossKind, budget: usize, seed: u64, out_dir: &Path) -> Result<SearchOutcome> {
    let movies = load_validation(dataset_dir, cfg.input_repr)?;
    let trials = sample_trials(&cfg.reg, kind, budget, seed)?;
    let outcome = run_search(&movies, cfg.search_pairs_per_movie, cfg.input_repr, trials, &registration_estimator)?;
    fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let stem = format!("search_{}_{}", cfg.input_repr, kind);
    fs::write(out_dir.join(format!("{stem}.json")), serde_json::to_string_pretty(&outcome)?)?;
    let best = ExperimentConfig { reg: outcome.best_config().clone(), ..cfg.clone() };
    fs::write(out_dir.join(format!("{stem}_config.json")), serde_json::to_string_pretty(&best)?)?;
    Ok(outcome)
}
