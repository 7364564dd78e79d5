use serde::{Deserialize, Serialize};

/// One training run, as written to `report_*.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub task: String,
    pub variant: String,
    pub seed: u64,
    pub accuracy: Option<f64>,
    pub auroc: Option<f64>,
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub wall_clock_s: f64,
    pub loss_curve: Vec<f64>,
    pub epoch_seconds: Vec<f64>,
    pub config: serde_json::Value,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
}

impl MetricSummary {
    fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Some(Self { mean, std: var.sqrt() })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub task: String,
    pub variant: String,
    pub runs: usize,
    pub seeds: Vec<u64>,
    pub accuracy: Option<MetricSummary>,
    pub auroc: Option<MetricSummary>,
}

/// Mean and spread over runs; metrics missing from any run are skipped.
pub fn aggregate_reports(reports: &[MetricReport]) -> Option<AggregateReport> {
    let first = reports.first()?;
    let acc: Vec<f64> = reports.iter().filter_map(|r| r.accuracy).collect();
    let auc: Vec<f64> = reports.iter().filter_map(|r| r.auroc).collect();
    Some(AggregateReport {
        task: first.task.clone(),
        variant: first.variant.clone(),
        runs: reports.len(),
        seeds: reports.iter().map(|r| r.seed).collect(),
        accuracy: MetricSummary::of(&acc),
        auroc: MetricSummary::of(&auc),
    })
}
