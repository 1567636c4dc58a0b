use crate::config::{Mode, RunConfig};
use crate::report::{self, RunReport};
use crate::runner;
use anyhow::{bail, Result};
use listfb_core::weldon::{self, Scheme};
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub cell: String,
    pub n: usize,
    pub rho: f64,
    pub adversary: String,
    pub trials: u64,
    pub failures: u64,
    pub failure_rate: f64,
    pub wilson_lo: f64,
    pub wilson_hi: f64,
    pub mean_list_size: f64,
    pub max_list_size: usize,
    pub max_feedback_symbols: u64,
    /// Predicted feedback symbols (partial feedback), else 0.
    pub feedback_formula: u64,
    /// Feedback symbols per forward symbol.
    pub feedback_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub cells: Vec<RunReport>,
    pub summary: Vec<SummaryRow>,
}

pub fn cli_sweep(config: &RunConfig) -> Result<SweepReport> {
    if config.mode != Mode::Sweep {
        bail!("mode {:?} is not sweep", config.mode);
    }
    config.validate()?;
    let scheme = config.sweep.as_ref().and_then(|s| s.scheme).unwrap_or(Scheme::Full);
    let run_mode = if scheme == Scheme::Full { Mode::RunFullFb } else { Mode::RunPartialFb };
    let mut cells = Vec::new();
    let mut summary = Vec::new();
    for cell in config.cells()? {
        let r = runner::run_cell(cell.params.clone(), scheme, run_mode, &cell.adversary, config.trials, config.seed)?;
        let a = &r.aggregates;
        let formula = if scheme == Scheme::Partial { weldon::feedback_formula(&cell.params) } else { 0 };
        summary.push(SummaryRow {
            cell: cell.label.clone(),
            n: cell.params.n,
            rho: cell.params.rho,
            adversary: cell.adversary.label(),
            trials: a.trials,
            failures: a.failures,
            failure_rate: a.failure_rate,
            wilson_lo: a.wilson_lo,
            wilson_hi: a.wilson_hi,
            mean_list_size: a.mean_list_size,
            max_list_size: a.max_list_size,
            max_feedback_symbols: a.max_feedback_symbols,
            feedback_formula: formula,
            feedback_rate: a.max_feedback_symbols as f64 / cell.params.n as f64,
        });
        cells.push(r);
    }
    Ok(SweepReport { cells, summary })
}

impl SweepReport {
    pub fn summary_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.summary {
            w.serialize(r)?;
        }
        Ok(String::from_utf8(w.into_inner()?)?)
    }

    /// Stacked per-trial rows, one cell label per line.
    pub fn rows_csv(&self) -> Result<String> {
        let mut out = String::new();
        for (i, (c, s)) in self.cells.iter().zip(&self.summary).enumerate() {
            let block = report::rows_csv(&c.rows, Some(&s.cell))?;
            // keep only the first header
            out.push_str(if i == 0 { &block } else { block.split_once('\n').map_or("", |x| x.1) });
        }
        Ok(out)
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("sweep.json"), serde_json::to_string_pretty(self)?)?;
        std::fs::write(dir.join("summary.csv"), self.summary_csv()?)?;
        std::fs::write(dir.join("trials.csv"), self.rows_csv()?)?;
        Ok(())
    }
}
