//! Simulated datasets: generation, splits and on-disk layout.
//!
//! A dataset directory holds `manifest.json` plus one subdirectory per movie
//! with the anatomy, the frame-0 mask and, per frame, the two magnitude
//! images, the two complex reconstructions, the ground-truth field and the
//! synthesis warp.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{ensure, Context, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use tmri_core::par;
use tmri_core::phantom::{simulate_movie, simulate_static_phantom, Movie};
use tmri_core::spamm::{SpammParams, TagDirection};

use crate::config::{child_seed, ExperimentConfig};
use crate::tmri;

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl std::str::FromStr for Split {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            _ => anyhow::bail!("unknown split {s:?} (expected train, val or test)"),
        }
    }
}

/// Split of every movie index. Train and validation counts are the floor of
/// their shares; the test split takes the remainder.
pub fn assign_splits(num_movies: usize, ratio: [u32; 3]) -> Vec<Split> {
    let total: u64 = ratio.iter().map(|&r| r as u64).sum();
    let n = num_movies as u64;
    let train = (n * ratio[0] as u64 / total) as usize;
    let val = (n * ratio[1] as u64 / total) as usize;
    (0..num_movies)
        .map(|i| {
            if i < train {
                Split::Train
            } else if i < train + val {
                Split::Val
            } else {
                Split::Test
            }
        })
        .collect()
}

/// File names of one movie, relative to the dataset root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MovieFiles {
    pub anatomy: String,
    pub mask: String,
    pub frames_h: Vec<String>,
    pub frames_v: Vec<String>,
    pub complex_h: Vec<String>,
    pub complex_v: Vec<String>,
    pub gt_fields: Vec<String>,
    pub synth_fields: Vec<String>,
}

impl MovieFiles {
    fn for_movie(index: usize, num_frames: usize) -> Self {
        let dir = movie_dir_name(index);
        let per_frame = |stem: &str| -> Vec<String> {
            (0..num_frames).map(|n| format!("{dir}/{stem}_{n:03}.tmri")).collect()
        };
        Self {
            anatomy: format!("{dir}/anatomy.tmri"),
            mask: format!("{dir}/mask.tmri"),
            frames_h: per_frame("frame_h"),
            frames_v: per_frame("frame_v"),
            complex_h: per_frame("complex_h"),
            complex_v: per_frame("complex_v"),
            gt_fields: per_frame("gt"),
            synth_fields: per_frame("synth"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MovieRecord {
    pub index: usize,
    pub seed: u64,
    pub split: Split,
    pub num_frames: usize,
    pub params_h: SpammParams,
    pub params_v: SpammParams,
    pub noise_sigma: f64,
    pub files: MovieFiles,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config: ExperimentConfig,
    pub movies: Vec<MovieRecord>,
}

impl Manifest {
    pub fn load(dataset_dir: &Path) -> Result<Self> {
        let path = dataset_dir.join(MANIFEST);
        let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn in_split(&self, split: Split) -> impl Iterator<Item = &MovieRecord> {
        self.movies.iter().filter(move |m| m.split == split)
    }

    pub fn movie(&self, index: usize) -> Result<&MovieRecord> {
        self.movies
            .iter()
            .find(|m| m.index == index)
            .with_context(|| format!("movie {index} is not in the manifest"))
    }
}

pub fn movie_dir_name(index: usize) -> String {
    format!("movie_{index:04}")
}

/// Per-movie draw of the relaxation parameters, shared by both tag directions.
pub fn draw_params<R: Rng + ?Sized>(cfg: &ExperimentConfig, rng: &mut R) -> Result<(SpammParams, SpammParams)> {
    let draw = |rng: &mut R, [lo, hi]: [f64; 2]| if lo < hi { rng.random_range(lo..hi) } else { lo };
    let t1 = draw(rng, cfg.t1_range_ms);
    let tr = draw(rng, cfg.tr_range_ms);
    Ok((cfg.spamm(t1, tr, TagDirection::Horizontal)?, cfg.spamm(t1, tr, TagDirection::Vertical)?))
}

/// Simulates movie `index` of the experiment in memory. The result depends
/// only on the config and the index.
pub fn simulate_index(cfg: &ExperimentConfig, index: usize) -> Result<Movie> {
    let mut rng = ChaCha8Rng::seed_from_u64(child_seed(cfg.seed, index as u64));
    let (ph, pv) = draw_params(cfg, &mut rng)?;
    let movie = if cfg.static_phantom {
        simulate_static_phantom(cfg.image_size, &ph, &pv, cfg.num_frames, cfg.noise_sigma, &mut rng)?
    } else {
        simulate_movie(&cfg.anatomy(), &cfg.motion(), &ph, &pv, cfg.noise_sigma, &mut rng)?
    };
    Ok(movie)
}

/// Simulates every movie of the experiment in memory, in index order.
pub fn simulate_all(cfg: &ExperimentConfig) -> Result<Vec<Movie>> {
    cfg.validate()?;
    par::map_range(cfg.num_movies, |i| simulate_index(cfg, i)).into_iter().collect()
}

fn write_movie(root: &Path, files: &MovieFiles, movie: &Movie) -> Result<()> {
    tmri::write_image(&root.join(&files.anatomy), &movie.anatomy)?;
    tmri::write_mask(&root.join(&files.mask), &movie.mask)?;
    for n in 0..movie.num_frames() {
        tmri::write_image(&root.join(&files.frames_h[n]), &movie.frames_h[n])?;
        tmri::write_image(&root.join(&files.frames_v[n]), &movie.frames_v[n])?;
        tmri::write_complex(&root.join(&files.complex_h[n]), &movie.complex_h[n])?;
        tmri::write_complex(&root.join(&files.complex_v[n]), &movie.complex_v[n])?;
        tmri::write_field(&root.join(&files.gt_fields[n]), &movie.gt_fields[n])?;
        tmri::write_field(&root.join(&files.synth_fields[n]), &movie.synth_fields[n])?;
    }
    Ok(())
}

/// Generates the dataset described by `cfg` under `out_dir`.
pub fn cmd_simulate(cfg: &ExperimentConfig, out_dir: &Path) -> Result<Manifest> {
    cfg.validate()?;
    fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let splits = assign_splits(cfg.num_movies, cfg.split_ratio);
    let records: Vec<Result<MovieRecord>> = par::map_range(cfg.num_movies, |i| {
        let movie = simulate_index(cfg, i)?;
        let files = MovieFiles::for_movie(i, cfg.num_frames);
        let dir = out_dir.join(movie_dir_name(i));
        fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        write_movie(out_dir, &files, &movie)?;
        Ok(MovieRecord {
            index: i,
            seed: child_seed(cfg.seed, i as u64),
            split: splits[i],
            num_frames: movie.num_frames(),
            params_h: movie.params_h,
            params_v: movie.params_v,
            noise_sigma: movie.noise_sigma,
            files,
        })
    });
    let manifest = Manifest {
        config: cfg.clone(),
        movies: records.into_iter().collect::<Result<_>>()?,
    };
    let path = out_dir.join(MANIFEST);
    fs::write(&path, serde_json::to_string_pretty(&manifest)?).with_context(|| format!("writing {}", path.display()))?;
    Ok(manifest)
}

/// Reads one movie back from disk.
pub fn load_movie(dataset_dir: &Path, record: &MovieRecord) -> Result<Movie> {
    let f = &record.files;
    let p = |name: &String| -> PathBuf { dataset_dir.join(name) };
    let each_image = |names: &[String]| names.iter().map(|n| tmri::read_image(&p(n))).collect::<Result<Vec<_>>>();
    let each_complex = |names: &[String]| names.iter().map(|n| tmri::read_complex(&p(n))).collect::<Result<Vec<_>>>();
    let each_field = |names: &[String]| names.iter().map(|n| tmri::read_field(&p(n))).collect::<Result<Vec<_>>>();
    let movie = Movie {
        frames_h: each_image(&f.frames_h)?,
        frames_v: each_image(&f.frames_v)?,
        complex_h: each_complex(&f.complex_h)?,
        complex_v: each_complex(&f.complex_v)?,
        gt_fields: each_field(&f.gt_fields)?,
        synth_fields: each_field(&f.synth_fields)?,
        anatomy: tmri::read_image(&p(&f.anatomy))?,
        mask: tmri::read_mask(&p(&f.mask))?,
        params_h: record.params_h,
        params_v: record.params_v,
        noise_sigma: record.noise_sigma,
    };
    ensure!(movie.num_frames() == record.num_frames, "movie {} has {} frames on disk, manifest says {}",
        record.index, movie.num_frames(), record.num_frames);
    Ok(movie)
}
