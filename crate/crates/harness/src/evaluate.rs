//! Per-pair metrics, CSV rows and per-method summaries.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{ensure, Context, Result};
use serde::{Deserialize, Serialize};
use tmri_core::imgcore::{compose, warp_mask, VectorField2D};
use tmri_core::phantom::Movie;
use tmri_core::strain::{dice, epe, mps95};

use crate::dataset::{load_movie, Manifest};
use crate::registration::RegistrationManifest;

pub const ROWS_FILE: &str = "rows.csv";
pub const SUMMARY_FILE: &str = "summary.json";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairMetrics {
    pub epe: f64,
    pub mps95: f64,
    pub dice: f64,
}

/// Metrics of an estimate for fixed frame 0 against moving frame `frame`.
///
/// Dice compares the frame-0 mask with the moving-frame mask pulled back by
/// the estimate. The moving mask is the frame-0 mask carried by the
/// synthesis warp, so both warps are composed and the mask is sampled once.
pub fn pair_metrics(movie: &Movie, frame: usize, est: &VectorField2D) -> Result<PairMetrics> {
    ensure!(frame < movie.num_frames(), "frame {frame} out of range");
    let gt = &movie.gt_fields[frame];
    let pulled = warp_mask(&movie.mask, &compose(&movie.synth_fields[frame], est)?)?;
    Ok(PairMetrics {
        epe: epe(est, gt, &movie.mask)?,
        mps95: mps95(est, gt, &movie.mask)?,
        dice: dice(&movie.mask, &pulled)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub movie: usize,
    pub frame: usize,
    pub input_repr: String,
    pub loss: String,
    pub epe: f64,
    pub mps95: f64,
    pub dice: f64,
    pub runtime_ms: f64,
}

impl Row {
    pub fn method_key(&self) -> String {
        format!("{}/{}", self.input_repr, self.loss)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    /// Sample standard deviation; zero for a single value.
    pub sd: f64,
}

impl Stat {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        if values.is_empty() {
            return Self { mean: f64::NAN, sd: f64::NAN };
        }
        let mean = values.iter().sum::<f64>() / n;
        let sd = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Self { mean, sd }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub count: usize,
    pub epe: Stat,
    pub mps95: Stat,
    pub dice: Stat,
    pub runtime_ms: Stat,
}

/// Pools all rows of each method, keyed by `input_repr/loss`.
pub fn summarize(rows: &[Row]) -> BTreeMap<String, MethodSummary> {
    let mut groups: BTreeMap<String, Vec<&Row>> = BTreeMap::new();
    for r in rows {
        groups.entry(r.method_key()).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|(k, rs)| {
            let col = |f: fn(&Row) -> f64| Stat::of(&rs.iter().map(|r| f(r)).collect::<Vec<_>>());
            let s = MethodSummary {
                count: rs.len(),
                epe: col(|r| r.epe),
                mps95: col(|r| r.mps95),
                dice: col(|r| r.dice),
                runtime_ms: col(|r| r.runtime_ms),
            };
            (k, s)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationReport {
    pub rows: Vec<Row>,
    pub summary: BTreeMap<String, MethodSummary>,
}

impl EvaluationReport {
    pub fn from_rows(rows: Vec<Row>) -> Self {
        let summary = summarize(&rows);
        Self { rows, summary }
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let path = dir.join(ROWS_FILE);
        let mut w = csv::Writer::from_path(&path).with_context(|| format!("writing {}", path.display()))?;
        for r in &self.rows {
            w.serialize(r)?;
        }
        if self.rows.is_empty() {
            w.write_record(["movie", "frame", "input_repr", "loss", "epe", "mps95", "dice", "runtime_ms"])?;
        }
        w.flush()?;
        fs::write(dir.join(SUMMARY_FILE), serde_json::to_string_pretty(&self.summary)?)?;
        Ok(())
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let rows = read_rows(&dir.join(ROWS_FILE))?;
        let path = dir.join(SUMMARY_FILE);
        let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        let summary = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        Ok(Self { rows, summary })
    }
}

pub fn read_rows(path: &Path) -> Result<Vec<Row>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    r.deserialize().map(|row| row.map_err(Into::into)).collect()
}

/// Scores every registered pair of every fields directory.
pub fn cmd_evaluate(dataset_dir: &Path, fields_dirs: &[PathBuf], out_dir: &Path) -> Result<EvaluationReport> {
    ensure!(!fields_dirs.is_empty(), "no fields directories given");
    let manifest = Manifest::load(dataset_dir)?;
    let regs = fields_dirs
        .iter()
        .map(|d| RegistrationManifest::load(d))
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    for (reg, dir) in regs.iter().zip(fields_dirs) {
        for m in &reg.movies {
            let movie = load_movie(dataset_dir, manifest.movie(m.index)?)?;
            ensure!(m.frames.len() == movie.num_frames() - 1, "movie {} in {} lacks fields for some frames",
                m.index, dir.display());
            for (k, &frame) in m.frames.iter().enumerate() {
                let est = reg.load_field(dir, m.index, frame)?;
                let pm = pair_metrics(&movie, frame, &est)?;
                rows.push(Row {
                    movie: m.index,
                    frame,
                    input_repr: reg.input_repr.to_string(),
                    loss: reg.loss.to_string(),
                    epe: pm.epe,
                    mps95: pm.mps95,
                    dice: pm.dice,
                    runtime_ms: m.runtime_ms[k],
                });
            }
        }
    }
    let report = EvaluationReport::from_rows(rows);
    report.write(out_dir)?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(method: (&str, &str), epe: f64) -> Row {
        Row {
            movie: 0,
            frame: 1,
            input_repr: method.0.into(),
            loss: method.1.into(),
            epe,
            mps95: 2.0 * epe,
            dice: 1.0 - epe,
            runtime_ms: 0.0,
        }
    }

    #[test]
    fn stat_matches_hand_values() {
        let s = Stat::of(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(s.mean, 2.5);
        assert!((s.sd - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(Stat::of(&[7.0]).sd, 0.0);
    }

    #[test]
    fn summary_is_keyed_by_method() {
        let rows = vec![row(("raw", "mse"), 0.5), row(("sharp", "ncc"), 0.1), row(("raw", "mse"), 0.3)];
        let s = summarize(&rows);
        assert_eq!(s.keys().collect::<Vec<_>>(), ["raw/mse", "sharp/ncc"]);
        assert_eq!(s["raw/mse"].count, 2);
        assert!((s["raw/mse"].epe.mean - 0.4).abs() < 1e-15);
    }

    #[test]
    fn csv_round_trip_reproduces_summary() {
        let dir = tempfile::tempdir().unwrap();
        let rows: Vec<Row> = (0..7).map(|i| row(("raw", "ncc"), 0.1 + 1.0 / (3.0 + i as f64))).collect();
        let report = EvaluationReport::from_rows(rows);
        report.write(dir.path()).unwrap();
        let header = fs::read_to_string(dir.path().join(ROWS_FILE)).unwrap();
        assert!(header.starts_with("movie,frame,input_repr,loss,epe,mps95,dice,runtime_ms\n"));
        let back = EvaluationReport::read(dir.path()).unwrap();
        assert_eq!(back, report);
        assert_eq!(summarize(&back.rows), back.summary);
    }

    #[test]
    fn ground_truth_estimate_is_perfect() {
        let cfg = crate::config::ExperimentConfig { image_size: 32, num_frames: 5, tag_period_px: 6.0, ..Default::default() };
        let m = crate::dataset::simulate_index(&cfg, 0).unwrap();
        for n in 1..5 {
            let pm = pair_metrics(&m, n, &m.gt_fields[n]).unwrap();
            assert_eq!((pm.epe, pm.mps95, pm.dice), (0.0, 0.0, 1.0));
        }
    }
}
