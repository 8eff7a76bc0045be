//! Per-pair metrics and the report table, fed with confusion counts that
//! reproduce a few rows of a published result table (12 test samples per
//! class).
//!
//! Run with `cargo run --example metrics_report`.

use closematch::eval::{self, ConfusionCounts, ReportRow};

/// Counts are given positives first: (tp, fn), then negatives: (tn, fp).
fn row(correct: &str, error: &str, tp: u64, fn_: u64, tn: u64, fp: u64) -> ReportRow {
    ReportRow {
        correct: correct.into(),
        error: error.into(),
        counts: ConfusionCounts { tp, fp, tn, fn_ },
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let rows = vec![
        row("ka", "kha", 12, 0, 7, 5),
        row("(", ")", 9, 3, 12, 0),
        row("ga", "gha", 12, 0, 5, 7),
        row("ta", "tta", 5, 7, 12, 0),
    ];
    let mut table_rows = Vec::new();
    for r in &rows {
        let m = r.metrics()?;
        table_rows.push((r.correct.clone(), r.error.clone(), m));
    }
    print!("{}", eval::report_table(&table_rows));
    println!();
    print!("{}", eval::report_csv(&rows)?);
    Ok(())
}
