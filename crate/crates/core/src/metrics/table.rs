use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::Scores;

pub const HEADERS: [&str; 4] = ["Accuracy", "Precision", "Recall", "F1-Score"];

/// Half away from zero, to 3 decimals.
pub fn round3(x: f64) -> f64 {
    (x * 1000.0).round() / 1000.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub dataset: String,
    pub method: String,
    pub scores: Scores,
    /// Reference row (e.g. a published baseline) rather than a run of ours.
    pub baseline: bool,
    /// Per column: equals the dataset's best rounded value.
    pub best: [bool; 4],
}

impl TableRow {
    pub fn new(dataset: &str, method: &str, scores: Scores) -> Self {
        TableRow {
            dataset: dataset.to_string(),
            method: method.to_string(),
            scores,
            baseline: false,
            best: [false; 4],
        }
    }

    pub fn baseline(dataset: &str, method: &str, scores: Scores) -> Self {
        TableRow {
            baseline: true,
            ..Self::new(dataset, method, scores)
        }
    }

    pub fn rounded(&self) -> [f64; 4] {
        self.scores.values().map(round3)
    }

    /// The four values at 3 decimals, space separated.
    pub fn values_text(&self) -> String {
        self.rounded().map(|v| format!("{v:.3}")).join(" ")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultsTable {
    pub rows: Vec<TableRow>,
}

/// Builds a table, flagging per dataset and column every row that attains the
/// best rounded value (ties all flagged). A baseline row takes part in the
/// comparison.
pub fn results_table(rows: Vec<TableRow>, baseline: Option<TableRow>) -> ResultsTable {
    let mut rows = rows;
    if let Some(mut b) = baseline {
        b.baseline = true;
        let at = rows
            .iter()
            .rposition(|r| r.dataset == b.dataset)
            .map_or(rows.len(), |i| i + 1);
        rows.insert(at, b);
    }
    let flags: Vec<[bool; 4]> = rows
        .iter()
        .map(|row| {
            let mine = row.rounded();
            let mut best = [true; 4];
            for other in rows.iter().filter(|o| o.dataset == row.dataset) {
                for (b, (m, o)) in best.iter_mut().zip(mine.iter().zip(other.rounded())) {
                    *b &= *m >= o;
                }
            }
            best
        })
        .collect();
    for (row, f) in rows.iter_mut().zip(flags) {
        row.best = f;
    }
    ResultsTable { rows }
}

impl ResultsTable {
    /// Aligned plain text; best values carry a trailing `*`.
    pub fn to_text(&self) -> String {
        let dw = self.rows.iter().map(|r| r.dataset.len()).chain([7]).max().unwrap_or(7);
        let mw = self.rows.iter().map(|r| r.method.len()).chain([6]).max().unwrap_or(6);
        let mut out = String::new();
        let _ = write!(out, "{:<dw$}  {:<mw$}", "Dataset", "Method");
        for h in HEADERS {
            let _ = write!(out, "  {h:>9}");
        }
        out.push('\n');
        let mut last: Option<&str> = None;
        for r in &self.rows {
            if last.is_some_and(|d| d != r.dataset) {
                out.push('\n');
            }
            last = Some(&r.dataset);
            let _ = write!(out, "{:<dw$}  {:<mw$}", r.dataset, r.method);
            for (v, b) in r.rounded().iter().zip(r.best) {
                let cell = format!("{v:.3}{}", if b { "*" } else { "" });
                let _ = write!(out, "  {cell:>9}");
            }
            out.push('\n');
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "dataset,method,accuracy,precision,recall,f1_score,baseline,best_accuracy,best_precision,best_recall,best_f1_score\n",
        );
        for r in &self.rows {
            let v = r.rounded();
            let _ = writeln!(
                out,
                "{},{},{:.3},{:.3},{:.3},{:.3},{},{},{},{},{}",
                r.dataset, r.method, v[0], v[1], v[2], v[3], r.baseline, r.best[0], r.best[1], r.best[2], r.best[3]
            );
        }
        out
    }
}
