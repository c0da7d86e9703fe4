//! Confusion matrices, precision/recall/F1 and results tables.

mod confusion;
mod report;
mod table;

pub use confusion::{confusion, ConfusionMatrix};
pub use report::{compute_metrics, Aggregate, Averaging, MetricsReport, PerClass, Scores};
pub use table::{results_table, round3, ResultsTable, TableRow, HEADERS};

#[cfg(test)]
mod tests;
