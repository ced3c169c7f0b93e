use anyhow::{Context, Result};
use std::io::Write;
use std::path::{Path, PathBuf};

use hucrl::agent::RunManifest;
use hucrl::hallucination::StrategyTag;

pub const SUMMARY_HEADER: [&str; 6] = ["strategy", "rho", "median_final_return", "iqr_lo", "iqr_hi", "solve_rate"];

#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub strategy: StrategyTag,
    pub rho: f64,
    pub seeds: usize,
    pub median_final_return: f64,
    /// 25th and 75th percentiles over seeds.
    pub iqr_lo: f64,
    pub iqr_hi: f64,
    /// Fraction of seeds whose last episode meets the solve criterion.
    pub solve_rate: f64,
}

/// Linear-interpolation percentile of sorted data, `q` in `[0, 1]`.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// One row per (strategy, rho), in order of first appearance.
pub fn summarize(manifests: &[RunManifest]) -> Vec<SummaryRow> {
    let mut keys: Vec<(StrategyTag, f64)> = Vec::new();
    for m in manifests {
        let k = (m.config.strategy.kind, m.config.env.rho);
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    keys.into_iter()
        .map(|(strategy, rho)| {
            let cell: Vec<&RunManifest> = manifests
                .iter()
                .filter(|m| m.config.strategy.kind == strategy && m.config.env.rho == rho)
                .collect();
            let mut finals: Vec<f64> = cell.iter().filter_map(|m| m.final_return()).collect();
            finals.sort_by(f64::total_cmp);
            let solved = cell.iter().filter(|m| m.final_solved()).count();
            SummaryRow {
                strategy,
                rho,
                seeds: cell.len(),
                median_final_return: percentile(&finals, 0.5),
                iqr_lo: percentile(&finals, 0.25),
                iqr_hi: percentile(&finals, 0.75),
                solve_rate: solved as f64 / cell.len() as f64,
            }
        })
        .collect()
}

pub fn write_summary_csv<W: Write>(rows: &[SummaryRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SUMMARY_HEADER)?;
    for r in rows {
        w.write_record([
            r.strategy.to_string(),
            r.rho.to_string(),
            r.median_final_return.to_string(),
            r.iqr_lo.to_string(),
            r.iqr_hi.to_string(),
            r.solve_rate.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Loads every `manifest.json` below `dir`, sorted by path.
pub fn collect_manifests(dir: &Path) -> Result<Vec<RunManifest>> {
    let mut paths = Vec::new();
    find(dir, &mut paths)?;
    paths.sort();
    paths
        .iter()
        .map(|p| RunManifest::load(p).with_context(|| format!("loading {}", p.display())))
        .collect()
}

fn find(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    for entry in std::fs::read_dir(dir).with_context(|| format!("reading {}", dir.display()))? {
        let path = entry?.path();
        if path.is_dir() {
            find(&path, out)?;
        } else if path.file_name().is_some_and(|n| n == "manifest.json") {
            out.push(path);
        }
    }
    Ok(())
}
