use std::io::Write;

use crate::error::{Error, Result};

/// One row of [`TrainHistory`].
#[derive(Clone, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    /// Mean cross-entropy over the epoch's training segments (the L2 term
    /// is applied by the optimizer and not included).
    pub train_loss: f64,
    pub train_acc: f64,
    /// Clip-level accuracy on the held-out fold, when there is one.
    pub val_acc: Option<f64>,
    pub seconds: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    /// Cross-entropy of every optimizer step, in order.
    pub step_losses: Vec<f64>,
}

impl TrainHistory {
    pub const CSV_HEADER: [&'static str; 6] = ["epoch", "lr", "train_loss", "train_acc", "val_acc", "seconds"];

    /// Writes `epoch,lr,train_loss,train_acc,val_acc,seconds`; `val_acc` is
    /// empty when no fold was held out.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(Self::CSV_HEADER).map_err(csv_err)?;
        for r in &self.epochs {
            w.write_record([
                r.epoch.to_string(),
                r.lr.to_string(),
                r.train_loss.to_string(),
                r.train_acc.to_string(),
                r.val_acc.map(|v| v.to_string()).unwrap_or_default(),
                format!("{:.3}", r.seconds),
            ])
            .map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        String::from_utf8(buf).map_err(|e| Error::contract(e.to_string()))
    }
}

pub(crate) fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::contract(format!("csv: {other:?}")),
    }
}
