use anyhow::Result;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub trial: u64,
    pub success: bool,
    pub list_size: usize,
    pub distinct_messages: usize,
    pub guesses: usize,
    pub stages: usize,
    pub termination: String,
    pub budget_spent: u64,
    pub feedback_symbols: u64,
    /// Error or panic message when the trial did not complete.
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    pub trials: u64,
    pub failures: u64,
    pub failure_rate: f64,
    pub wilson_lo: f64,
    pub wilson_hi: f64,
    pub mean_list_size: f64,
    pub max_list_size: usize,
    pub max_feedback_symbols: u64,
}

/// Wilson score interval for `k` successes in `n` trials.
pub fn wilson(k: u64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n = n as f64;
    let p = k as f64 / n;
    let z2 = z * z;
    let centre = (p + z2 / (2.0 * n)) / (1.0 + z2 / n);
    let half = z / (1.0 + z2 / n) * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

impl Aggregates {
    pub fn fold(rows: &[TrialRow]) -> Self {
        let trials = rows.len() as u64;
        let failures = rows.iter().filter(|r| !r.success).count() as u64;
        let (wilson_lo, wilson_hi) = wilson(failures, trials, Z95);
        Self {
            trials,
            failures,
            failure_rate: if trials == 0 { 0.0 } else { failures as f64 / trials as f64 },
            wilson_lo,
            wilson_hi,
            mean_list_size: if trials == 0 { 0.0 } else { rows.iter().map(|r| r.list_size as f64).sum::<f64>() / trials as f64 },
            max_list_size: rows.iter().map(|r| r.list_size).max().unwrap_or(0),
            max_feedback_symbols: rows.iter().map(|r| r.feedback_symbols).max().unwrap_or(0),
        }
    }
}

/// Configuration echo written at the top of every report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportHeader {
    pub mode: String,
    pub scheme: String,
    pub adversary: String,
    pub master_seed: u64,
    pub prg: String,
    pub params: serde_json::Value,
    pub message_len: usize,
    pub budget: u64,
    pub lambda_tilde: u32,
    /// `(1/δ)^{λ̃}·L`.
    pub list_bound: f64,
    /// Partial feedback only: symbols predicted by the feedback formula.
    pub feedback_formula: Option<u64>,
    /// Partial feedback only: `P·n·⌈log₂ n⌉` for storing the permutation bank.
    pub perm_storage_symbols: Option<u128>,
    pub perm_bank_size: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub header: ReportHeader,
    pub rows: Vec<TrialRow>,
    pub aggregates: Aggregates,
    /// Wall-clock time; kept out of the serialized report so reruns compare byte for byte.
    #[serde(skip)]
    pub runtime_ms: u128,
}

impl RunReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn rows_csv(&self) -> Result<String> {
        rows_csv(&self.rows, None)
    }

    /// Writes `report.json`, `trials.csv` and `timing.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("report.json"), self.to_json()?)?;
        std::fs::write(dir.join("trials.csv"), self.rows_csv()?)?;
        std::fs::write(dir.join("timing.json"), serde_json::to_string_pretty(&serde_json::json!({ "runtime_ms": self.runtime_ms }))?)?;
        Ok(())
    }
}

/// Per-trial CSV, optionally tagged with a sweep cell label.
pub fn rows_csv(rows: &[TrialRow], cell: Option<&str>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<&str> = cell.map(|_| "cell").into_iter().collect();
    header.extend(TRIAL_COLUMNS);
    w.write_record(&header)?;
    for r in rows {
        let mut rec: Vec<String> = cell.map(str::to_string).into_iter().collect();
        rec.extend(row_fields(r));
        w.write_record(&rec)?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

pub const TRIAL_COLUMNS: [&str; 10] = [
    "trial",
    "success",
    "list_size",
    "distinct_messages",
    "guesses",
    "stages",
    "termination",
    "budget_spent",
    "feedback_symbols",
    "error",
];

pub fn row_fields(r: &TrialRow) -> Vec<String> {
    vec![
        r.trial.to_string(),
        r.success.to_string(),
        r.list_size.to_string(),
        r.distinct_messages.to_string(),
        r.guesses.to_string(),
        r.stages.to_string(),
        r.termination.clone(),
        r.budget_spent.to_string(),
        r.feedback_symbols.to_string(),
        r.error.clone(),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(trial: u64, success: bool, list_size: usize) -> TrialRow {
        TrialRow {
            trial,
            success,
            list_size,
            distinct_messages: list_size,
            guesses: 1,
            stages: 2,
            termination: "zyablov".into(),
            budget_spent: 0,
            feedback_symbols: 7,
            error: String::new(),
        }
    }

    #[test]
    fn wilson_known_values() {
        // oracle: closed form evaluated by hand for 0/10 and 5/10
        let (lo, hi) = wilson(0, 10, Z95);
        assert_eq!(lo, 0.0);
        assert!((hi - 0.277_532).abs() < 1e-5, "{hi}");
        let (lo, hi) = wilson(5, 10, Z95);
        assert!((lo - 0.236_593).abs() < 1e-5 && (hi - 0.763_407).abs() < 1e-5);
        assert_eq!(wilson(0, 0, Z95), (0.0, 1.0));
    }

    #[test]
    fn aggregates_fold_rows() {
        let rows = vec![row(0, true, 1), row(1, false, 0), row(2, true, 3)];
        let a = Aggregates::fold(&rows);
        assert_eq!((a.trials, a.failures, a.max_list_size), (3, 1, 3));
        assert!((a.mean_list_size - 4.0 / 3.0).abs() < 1e-12);
        let empty = Aggregates::fold(&[]);
        assert_eq!((empty.trials, empty.failure_rate), (0, 0.0));
    }

    #[test]
    fn csv_has_one_line_per_row() {
        let rows = vec![row(0, true, 1), row(1, false, 0)];
        assert_eq!(rows_csv(&rows, None).unwrap().lines().count(), 3);
        let tagged = rows_csv(&rows, Some("n=1")).unwrap();
        assert!(tagged.starts_with("cell,trial,"));
        assert_eq!(tagged.lines().count(), 3);
        assert_eq!(rows_csv(&[], None).unwrap().lines().count(), 1);
    }
}
