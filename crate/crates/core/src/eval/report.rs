use std::io::Write;

use super::ConfusionMatrix;
use crate::error::Result;
use crate::train::csv_err;

#[derive(Clone, Debug, PartialEq)]
pub struct FoldScore {
    pub fold: u8,
    pub clips: usize,
    /// Final-epoch clip accuracy.
    pub accuracy: f64,
    /// Best-validation-epoch clip accuracy, when a best checkpoint exists.
    pub best_accuracy: Option<f64>,
}

/// Per-fold accuracies and the confusion matrix summed over folds.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub folds: Vec<FoldScore>,
    pub confusion: ConfusionMatrix,
    pub class_names: Vec<String>,
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

impl EvalReport {
    /// Arithmetic mean of the per-fold final accuracies.
    pub fn mean_accuracy(&self) -> f64 {
        mean(self.folds.iter().map(|f| f.accuracy))
    }

    pub fn mean_best_accuracy(&self) -> Option<f64> {
        let best: Option<Vec<f64>> = self.folds.iter().map(|f| f.best_accuracy).collect();
        best.map(|b| mean(b.into_iter()))
    }

    /// `fold,clips,accuracy,best_accuracy` per fold, then a `mean` row.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["fold", "clips", "accuracy", "best_accuracy"]).map_err(csv_err)?;
        for f in &self.folds {
            w.write_record([
                f.fold.to_string(),
                f.clips.to_string(),
                f.accuracy.to_string(),
                fmt_opt(f.best_accuracy),
            ])
            .map_err(csv_err)?;
        }
        let clips: usize = self.folds.iter().map(|f| f.clips).sum();
        w.write_record([
            "mean".to_string(),
            clips.to_string(),
            self.mean_accuracy().to_string(),
            fmt_opt(self.mean_best_accuracy()),
        ])
        .map_err(csv_err)?;
        w.flush()?;
        Ok(())
    }

    /// Header `true\predicted` followed by the class names; one row per
    /// true class.
    pub fn write_confusion_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["true\\predicted".to_string()];
        header.extend(self.class_names.iter().cloned());
        w.write_record(&header).map_err(csv_err)?;
        for (name, row) in self.class_names.iter().zip(self.confusion.rows()) {
            let mut rec = vec![name.clone()];
            rec.extend(row.iter().map(u64::to_string));
            w.write_record(&rec).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// One configuration of an ablation table.
#[derive(Clone, Debug, PartialEq)]
pub struct AblationRow {
    pub label: String,
    /// Mean cross-validated (final-epoch) accuracy.
    pub accuracy: f64,
    pub fold_accuracies: Vec<(u8, f64)>,
}

impl AblationRow {
    pub fn from_report(label: &str, report: &EvalReport) -> Self {
        AblationRow {
            label: label.to_string(),
            accuracy: report.mean_accuracy(),
            fold_accuracies: report.folds.iter().map(|f| (f.fold, f.accuracy)).collect(),
        }
    }
}

/// `setting,accuracy,fold_<f>...` with one row per ablation entry.
pub fn write_ablation_csv<W: Write>(rows: &[AblationRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["setting".to_string(), "accuracy".to_string()];
    if let Some(first) = rows.first() {
        header.extend(first.fold_accuracies.iter().map(|(f, _)| format!("fold_{f}")));
    }
    w.write_record(&header).map_err(csv_err)?;
    for r in rows {
        let mut rec = vec![r.label.clone(), r.accuracy.to_string()];
        rec.extend(r.fold_accuracies.iter().map(|(_, a)| a.to_string()));
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}
