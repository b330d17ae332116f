use crate::error::{Error, Result};

/// `K×K` clip counts; rows are true classes, columns predicted classes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfusionMatrix {
    k: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn zeros(k: usize) -> Self {
        ConfusionMatrix { k, counts: vec![0; k * k] }
    }

    pub fn num_classes(&self) -> usize {
        self.k
    }

    pub fn get(&self, truth: usize, predicted: usize) -> u64 {
        self.counts[truth * self.k + predicted]
    }

    pub fn record(&mut self, truth: usize, predicted: usize) -> Result<()> {
        if truth >= self.k || predicted >= self.k {
            return Err(Error::contract(format!(
                "class pair ({truth}, {predicted}) outside 0..{}",
                self.k
            )));
        }
        self.counts[truth * self.k + predicted] += 1;
        Ok(())
    }

    /// Adds `other` cell by cell.
    pub fn merge(&mut self, other: &ConfusionMatrix) -> Result<()> {
        if other.k != self.k {
            return Err(Error::dim(format!("merging {}-class and {}-class matrices", self.k, other.k)));
        }
        self.counts.iter_mut().zip(&other.counts).for_each(|(a, b)| *a += b);
        Ok(())
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.k).map(|i| self.get(i, i)).sum()
    }

    /// `trace / total`, or 0 for an empty matrix.
    pub fn accuracy(&self) -> f64 {
        match self.total() {
            0 => 0.0,
            n => self.trace() as f64 / n as f64,
        }
    }

    /// Clips per true class.
    pub fn row_sums(&self) -> Vec<u64> {
        self.counts.chunks_exact(self.k.max(1)).map(|r| r.iter().sum()).collect()
    }

    pub fn rows(&self) -> impl Iterator<Item = &[u64]> {
        self.counts.chunks_exact(self.k.max(1))
    }
}

/// Tallies `(truths[i], predictions[i])` pairs.
pub fn confusion_matrix(predictions: &[usize], truths: &[usize], k: usize) -> Result<ConfusionMatrix> {
    if predictions.len() != truths.len() {
        return Err(Error::contract(format!(
            "{} predictions for {} truths",
            predictions.len(),
            truths.len()
        )));
    }
    let mut m = ConfusionMatrix::zeros(k);
    for (&p, &t) in predictions.iter().zip(truths) {
        m.record(t, p)?;
    }
    Ok(m)
}
