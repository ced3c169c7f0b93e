use anyhow::{anyhow, Result};
use rayon::prelude::*;
use std::path::Path;

use hucrl::agent::{RunConfig, RunManifest};

use crate::config::ExperimentMatrix;
use crate::summary::{summarize, write_summary_csv, SummaryRow};

pub fn cell_dir_name(config: &RunConfig) -> String {
    format!("{}_rho{}_seed{}", config.strategy.kind, config.env.rho, config.seed)
}

/// Runs every cell on a pool of `workers` threads (each cell writes only to
/// its own directory), then writes `summary.csv`. Fails if any cell failed,
/// after all cells have finished.
pub fn run_matrix(matrix: &ExperimentMatrix, out: &Path, workers: usize) -> Result<Vec<SummaryRow>> {
    let out = matrix.output_dir.as_deref().unwrap_or(out);
    std::fs::create_dir_all(out)?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(workers.max(1)).build()?;
    let cells = matrix.cells();
    let results: Vec<(String, Result<RunManifest>)> = pool.install(|| {
        cells
            .par_iter()
            .map(|c| {
                let name = cell_dir_name(c);
                let r = crate::run_into(c, &out.join(&name), false);
                (name, r)
            })
            .collect()
    });
    let mut manifests = Vec::new();
    let mut failures = Vec::new();
    for (name, r) in results {
        match r {
            Ok(m) => manifests.push(m),
            Err(e) => failures.push(format!("{name}: {e:#}")),
        }
    }
    let rows = summarize(&manifests);
    write_summary_csv(&rows, std::fs::File::create(out.join("summary.csv"))?)?;
    if !failures.is_empty() {
        return Err(anyhow!("{} cell(s) failed:\n{}", failures.len(), failures.join("\n")));
    }
    Ok(rows)
}
