//! MAE report assembly: per-fold rows, per-cell averages, the CSV
//! interchange format, and a rendered table shaped like the paper's results
//! table (Fold 1..3 plus Average per input x method cell, one table per
//! task).

use std::fmt::Write as _;
use std::path::Path;

use crate::dataset::{DatasetKind, Task};
use crate::error::{Error, Result};
use crate::nn::HeadKind;

#[derive(Debug, Clone, PartialEq)]
pub struct MaeRow {
    pub input: DatasetKind,
    pub method: HeadKind,
    pub task: Task,
    /// 1-based fold number, matching the reported layout.
    pub fold: u8,
    /// MAE over per-video aggregated predictions (primary).
    pub video_mae: f64,
    /// MAE over raw chunk predictions (secondary, text table only).
    pub chunk_mae: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricsReport {
    pub rows: Vec<MaeRow>,
}

type CellKey = (DatasetKind, HeadKind, Task);

impl MetricsReport {
    pub fn merge<I: IntoIterator<Item = MetricsReport>>(reports: I) -> Self {
        let mut rows = Vec::new();
        for r in reports {
            rows.extend(r.rows);
        }
        rows.sort_by_key(|r| (r.input.code(), format!("{}", r.method), r.task.code(), r.fold));
        MetricsReport { rows }
    }

    fn cells(&self) -> Vec<CellKey> {
        let mut keys: Vec<CellKey> = Vec::new();
        for r in &self.rows {
            let key = (r.input, r.method, r.task);
            if !keys.contains(&key) {
                keys.push(key);
            }
        }
        keys.sort_by_key(|(i, m, t)| (i.code(), format!("{m}"), t.code()));
        keys
    }

    fn cell_rows(&self, key: CellKey) -> Vec<&MaeRow> {
        let mut rows: Vec<&MaeRow> = self
            .rows
            .iter()
            .filter(|r| (r.input, r.method, r.task) == key)
            .collect();
        rows.sort_by_key(|r| r.fold);
        rows
    }

    /// Arithmetic mean of the fold MAEs for one (input, method, task) cell:
    /// (video-level, chunk-level).
    pub fn cell_average(&self, input: DatasetKind, method: HeadKind, task: Task) -> Option<(f64, f64)> {
        let rows = self.cell_rows((input, method, task));
        if rows.is_empty() {
            return None;
        }
        let n = rows.len() as f64;
        Some((
            rows.iter().map(|r| r.video_mae).sum::<f64>() / n,
            rows.iter().map(|r| r.chunk_mae).sum::<f64>() / n,
        ))
    }

    /// CSV with columns `input,method,task,fold,mae`; per cell the three fold
    /// rows are followed by an `avg` row.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("input,method,task,fold,mae\n");
        for key in self.cells() {
            let (input, method, task) = key;
            for row in self.cell_rows(key) {
                let _ = writeln!(
                    out,
                    "{input},{method},{task},{},{:.9}",
                    row.fold, row.video_mae
                );
            }
            if let Some((avg, _)) = self.cell_average(input, method, task) {
                let _ = writeln!(out, "{input},{method},{task},avg,{avg:.9}");
            }
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv_string()).map_err(|e| Error::io(path, e))
    }

    /// Parses a CSV produced by [`to_csv_string`]. Fold rows are kept;
    /// `avg` rows are validated against the mean of their folds.
    pub fn read_csv(path: &Path) -> Result<MetricsReport> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let bad = |reason: String| Error::BadDataset {
            path: path.to_path_buf(),
            reason,
        };
        let mut lines = text.lines();
        match lines.next() {
            Some("input,method,task,fold,mae") => {}
            other => return Err(bad(format!("unexpected header {other:?}"))),
        }
        let mut rows = Vec::new();
        let mut averages: Vec<(CellKey, f64)> = Vec::new();
        for (i, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 5 {
                return Err(bad(format!("line {}: {} fields", i + 2, fields.len())));
            }
            let input: DatasetKind = fields[0].parse()?;
            let method: HeadKind = fields[1].parse()?;
            let task: Task = fields[2].parse()?;
            let mae: f64 = fields[4]
                .parse()
                .map_err(|_| bad(format!("line {}: bad mae {:?}", i + 2, fields[4])))?;
            if fields[3] == "avg" {
                averages.push(((input, method, task), mae));
            } else {
                let fold: u8 = fields[3]
                    .parse()
                    .map_err(|_| bad(format!("line {}: bad fold {:?}", i + 2, fields[3])))?;
                if !(1..=3).contains(&fold) {
                    return Err(bad(format!("line {}: fold {fold} outside 1..=3", i + 2)));
                }
                rows.push(MaeRow {
                    input,
                    method,
                    task,
                    fold,
                    video_mae: mae,
                    chunk_mae: f64::NAN,
                });
            }
        }
        let report = MetricsReport { rows };
        for ((input, method, task), stated) in averages {
            let (computed, _) = report
                .cell_average(input, method, task)
                .ok_or_else(|| bad(format!("avg row without folds: {input}-{method}")))?;
            if (computed - stated).abs() > 1e-6 {
                return Err(bad(format!(
                    "avg mismatch for {input}-{method} {task}: stated {stated}, folds give {computed}"
                )));
            }
        }
        Ok(report)
    }

    /// Plain-text tables, one per task present, in the results-table layout:
    /// rows Fold 1..3 plus Average per (input, method) cell. The chunk-level
    /// MAE rides along as a secondary column when available.
    pub fn render_tables(&self) -> String {
        let mut out = String::new();
        for task in [Task::Motility, Task::Morphology] {
            let keys: Vec<CellKey> = self
                .cells()
                .into_iter()
                .filter(|&(_, _, t)| t == task)
                .collect();
            if keys.is_empty() {
                continue;
            }
            let _ = writeln!(out, "MAE -- {task}");
            let _ = writeln!(
                out,
                "{:<6} {:<7} {:<8} {:>12} {:>12}",
                "Input", "Method", "Fold", "MAE", "MAE(chunk)"
            );
            for key in keys {
                let (input, method, _) = key;
                for row in self.cell_rows(key) {
                    let chunk = if row.chunk_mae.is_nan() {
                        String::from("-")
                    } else {
                        format!("{:.3}", row.chunk_mae)
                    };
                    let _ = writeln!(
                        out,
                        "{:<6} {:<7} Fold {:<3} {:>12.3} {:>12}",
                        input.to_string(),
                        method.to_string(),
                        row.fold,
                        row.video_mae,
                        chunk
                    );
                }
                if let Some((avg, chunk_avg)) = self.cell_average(input, method, task) {
                    let chunk = if chunk_avg.is_nan() {
                        String::from("-")
                    } else {
                        format!("{chunk_avg:.3}")
                    };
                    let _ = writeln!(
                        out,
                        "{:<6} {:<7} {:<8} {:>12.3} {:>12}",
                        input.to_string(),
                        method.to_string(),
                        "Average",
                        avg,
                        chunk
                    );
                }
            }
            out.push('\n');
        }
        out
    }
}
