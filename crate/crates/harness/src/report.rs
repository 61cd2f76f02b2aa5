//! Ranked comparison tables and grayscale strain-map exports.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{ensure, Context, Result};
use serde::{Deserialize, Serialize};
use tmri_core::imgcore::Image2D;
use tmri_core::strain::mps_map;

use crate::dataset::{load_movie, Manifest};
use crate::evaluate::{EvaluationReport, MethodSummary};
use crate::registration::RegistrationManifest;

#[derive(Debug, Clone, PartialEq)]
pub struct RankedRow {
    pub key: String,
    pub summary: MethodSummary,
    pub epe_rank: usize,
    pub mps95_rank: usize,
}

fn ranks(summary: &BTreeMap<String, MethodSummary>, metric: fn(&MethodSummary) -> f64) -> BTreeMap<String, usize> {
    let mut keys: Vec<&String> = summary.keys().collect();
    keys.sort_by(|a, b| metric(&summary[*a]).total_cmp(&metric(&summary[*b])).then_with(|| a.cmp(b)));
    keys.into_iter().enumerate().map(|(i, k)| (k.clone(), i + 1)).collect()
}

/// Methods ordered by mean EPE, each with its EPE and MPS95 rank.
pub fn rank_methods(summary: &BTreeMap<String, MethodSummary>) -> Vec<RankedRow> {
    let by_epe = ranks(summary, |s| s.epe.mean);
    let by_mps = ranks(summary, |s| s.mps95.mean);
    let mut rows: Vec<RankedRow> = summary
        .iter()
        .map(|(k, s)| RankedRow { key: k.clone(), summary: *s, epe_rank: by_epe[k], mps95_rank: by_mps[k] })
        .collect();
    rows.sort_by_key(|r| r.epe_rank);
    rows
}

/// Plain-text table. A row gets `best-epe` and/or `best-mps95` when it ranks
/// first, and `worst` when it ranks last on both metrics.
pub fn format_table(summary: &BTreeMap<String, MethodSummary>) -> String {
    let rows = rank_methods(summary);
    let n = rows.len();
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<4} {:<12} {:>6} {:>22} {:>22} {:>22}  flags",
        "rank", "method", "pairs", "EPE (px)", "MPS95", "Dice"
    );
    for r in &rows {
        let s = &r.summary;
        let mut flags = Vec::new();
        if r.epe_rank == 1 {
            flags.push("best-epe");
        }
        if r.mps95_rank == 1 {
            flags.push("best-mps95");
        }
        if n > 1 && r.epe_rank == n && r.mps95_rank == n {
            flags.push("worst");
        }
        let pm = |st: &crate::evaluate::Stat| format!("{:.4} ± {:.4}", st.mean, st.sd);
        let _ = writeln!(
            out,
            "{:<4} {:<12} {:>6} {:>22} {:>22} {:>22}  {}",
            r.epe_rank,
            r.key,
            s.count,
            pm(&s.epe),
            pm(&s.mps95),
            pm(&s.dice),
            flags.join(" ")
        );
    }
    out
}

/// Sidecar describing how a PGM maps back to values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PgmSidecar {
    pub width: usize,
    pub height: usize,
    /// Value shown as 255; 0 maps to 0 and negatives clip to 0.
    pub max: f64,
    pub source: String,
}

/// Binary 8-bit P5 encoding with linear scaling from [0, max].
pub fn encode_pgm(img: &Image2D) -> (Vec<u8>, f64) {
    let max = img.data().iter().cloned().fold(0.0f64, f64::max);
    let (w, h) = img.dims();
    let mut out = format!("P5\n{w} {h}\n255\n").into_bytes();
    out.extend(img.data().iter().map(|&v| {
        if max > 0.0 {
            (v.max(0.0) / max * 255.0).round().clamp(0.0, 255.0) as u8
        } else {
            0
        }
    }));
    (out, max)
}

/// Writes `<stem>.pgm` and `<stem>.json` into `dir`.
pub fn write_pgm(dir: &Path, stem: &str, img: &Image2D, source: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let (bytes, max) = encode_pgm(img);
    let path = dir.join(format!("{stem}.pgm"));
    fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
    let side = PgmSidecar { width: img.width(), height: img.height(), max, source: source.to_string() };
    fs::write(dir.join(format!("{stem}.json")), serde_json::to_string_pretty(&side)?)?;
    Ok(path)
}

/// Writes MPS maps of the estimate and of the ground truth for one pair.
pub fn export_mps_maps(dataset_dir: &Path, fields_dir: &Path, movie: usize, frame: usize, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let manifest = Manifest::load(dataset_dir)?;
    let reg = RegistrationManifest::load(fields_dir)?;
    let record = manifest.movie(movie)?;
    ensure!(frame >= 1 && frame < record.num_frames, "frame {frame} out of range");
    let est = reg.load_field(fields_dir, movie, frame)?;
    let gt = load_movie(dataset_dir, record)?.gt_fields[frame].clone();
    let method = format!("{}_{}", reg.input_repr, reg.loss);
    let tag = format!("m{movie:04}_f{frame:03}");
    Ok(vec![
        write_pgm(out_dir, &format!("mps_{method}_{tag}"), &mps_map(&est)?, &format!("{} {}", reg.method_key(), tag))?,
        write_pgm(out_dir, &format!("mps_truth_{tag}"), &mps_map(&gt)?, &format!("ground truth {tag}"))?,
    ])
}

/// Formats the table for a saved evaluation and writes it next to it.
pub fn cmd_report(report_dir: &Path) -> Result<String> {
    let report = EvaluationReport::read(report_dir)?;
    let table = format_table(&report.summary);
    fs::write(report_dir.join("table.txt"), &table)?;
    Ok(table)
}
