//! SNR sweep orchestration: trials run in parallel, aggregation and CSV
//! output follow a fixed (SNR, scheme) order so results are byte-identical
//! for any thread count.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::trial::{run_trial, TrialResult};

/// One output record; `value` carries the metric named by `metric`.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvRow {
    pub snr_db: f64,
    pub scheme: String,
    pub metric: String,
    pub value: f64,
    pub n_trials: usize,
    pub master_seed: u64,
}

/// Aggregated sweep: one row per (SNR, scheme, metric) plus one BCRB row per
/// SNR point.
#[derive(Debug, Clone)]
pub struct SweepTable {
    pub rows: Vec<CsvRow>,
    pub failed_trials: usize,
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

fn median(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("metrics are finite"));
    let mid = sorted.len() / 2;
    if sorted.len() % 2 == 1 {
        sorted[mid]
    } else {
        0.5 * (sorted[mid - 1] + sorted[mid])
    }
}

/// Run the whole campaign. `threads` pins the worker count (None uses the
/// process-wide default pool).
pub fn run_sweep(cfg: &ExperimentConfig, threads: Option<usize>) -> Result<SweepTable> {
    cfg.validate()?;
    let jobs: Vec<(usize, usize)> = (0..cfg.snr_db.len())
        .flat_map(|s| (0..cfg.trials).map(move |t| (s, t)))
        .collect();

    let run_all = || -> Vec<(usize, usize, Result<TrialResult>)> {
        jobs.par_iter()
            .map(|&(s, t)| (s, t, run_trial(cfg, s, t)))
            .collect()
    };
    let results = match threads {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::numerical(format!("cannot build thread pool: {e}")))?;
            pool.install(run_all)
        }
        None => run_all(),
    };

    // Deterministic accumulation order: (snr, trial) ascending.
    let mut by_snr: Vec<Vec<&TrialResult>> = vec![Vec::new(); cfg.snr_db.len()];
    let mut failed = 0usize;
    let mut first_error: Option<String> = None;
    for (s, _t, result) in &results {
        match result {
            Ok(r) => by_snr[*s].push(r),
            Err(e) => {
                failed += 1;
                if first_error.is_none() {
                    first_error = Some(e.to_string());
                }
            }
        }
    }
    if by_snr.iter().any(|v| v.is_empty()) {
        return Err(Error::numerical(format!(
            "all trials failed at some SNR point; first error: {}",
            first_error.unwrap_or_else(|| "unknown".to_string())
        )));
    }

    let mut rows = Vec::new();
    for (s, trials) in by_snr.iter().enumerate() {
        let snr_db = cfg.snr_db[s];
        let n = trials.len();
        for (pos, &scheme) in cfg.schemes.iter().enumerate() {
            let nmses: Vec<f64> = trials.iter().map(|r| r.schemes[pos].1.nmse).collect();
            let sers: Vec<f64> = trials.iter().map(|r| r.schemes[pos].1.ser).collect();
            let mut push = |metric: &str, value: f64| {
                rows.push(CsvRow {
                    snr_db,
                    scheme: scheme.name().to_string(),
                    metric: metric.to_string(),
                    value,
                    n_trials: n,
                    master_seed: cfg.seed,
                });
            };
            push("nmse_mean", mean(&nmses));
            push("nmse_median", median(&nmses));
            push("ser_mean", mean(&sers));
            if scheme.uses_em() {
                let iters: Vec<f64> = trials
                    .iter()
                    .map(|r| r.schemes[pos].1.em_iterations.unwrap_or(0) as f64)
                    .collect();
                push("em_iters_mean", mean(&iters));
            }
        }
        let bcrbs: Vec<f64> = trials.iter().map(|r| r.bcrb).collect();
        rows.push(CsvRow {
            snr_db,
            scheme: "bcrb".to_string(),
            metric: "bcrb".to_string(),
            value: mean(&bcrbs),
            n_trials: n,
            master_seed: cfg.seed,
        });
    }

    Ok(SweepTable {
        rows,
        failed_trials: failed,
    })
}

/// Nine significant digits, scientific notation.
fn format_value(v: f64) -> String {
    format!("{v:.8e}")
}

pub fn render_csv(table: &SweepTable) -> String {
    let mut out = String::from("snr_db,scheme,metric,value,n_trials,master_seed\n");
    for row in &table.rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            row.snr_db,
            row.scheme,
            row.metric,
            format_value(row.value),
            row.n_trials,
            row.master_seed
        ));
    }
    out
}

pub fn write_csv(table: &SweepTable, path: &Path) -> Result<()> {
    let mut file = std::fs::File::create(path)?;
    file.write_all(render_csv(table).as_bytes())?;
    Ok(())
}
