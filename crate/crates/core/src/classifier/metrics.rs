use rayon::prelude::*;
use serde::Serialize;

use super::ModelCheckpoint;
use crate::error::{Error, Result};
use crate::gesture::GestureClass;
use crate::signal::SignalWindow;

/// Rows are true classes, columns predicted classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConfusionMatrix {
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(classes: usize) -> Self {
        ConfusionMatrix {
            counts: vec![vec![0; classes]; classes],
        }
    }

    pub fn from_pairs(classes: usize, pairs: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut m = Self::new(classes);
        for (t, p) in pairs {
            m.record(t, p);
        }
        m
    }

    pub fn record(&mut self, truth: usize, predicted: usize) {
        self.counts[truth][predicted] += 1;
    }

    pub fn classes(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn row_total(&self, class: usize) -> u64 {
        self.counts[class].iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.classes()).map(|i| self.counts[i][i]).sum()
    }

    pub fn accuracy(&self) -> f64 {
        let total = self.total();
        if total == 0 {
            return 0.0;
        }
        self.trace() as f64 / total as f64
    }

    /// Per-class F1. A class that never occurs and is never predicted scores 1.
    pub fn f1(&self) -> Vec<f64> {
        (0..self.classes())
            .map(|k| {
                let tp = self.counts[k][k] as f64;
                let fp = (0..self.classes()).map(|t| self.counts[t][k]).sum::<u64>() as f64 - tp;
                let fn_ = self.row_total(k) as f64 - tp;
                if tp + fp + fn_ == 0.0 {
                    return 1.0;
                }
                let precision = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
                let recall = if tp + fn_ > 0.0 { tp / (tp + fn_) } else { 0.0 };
                if precision + recall == 0.0 {
                    0.0
                } else {
                    2.0 * precision * recall / (precision + recall)
                }
            })
            .collect()
    }

    /// Share of misclassifications whose predicted class has the same gesture
    /// as the true class. `None` when there are no errors.
    pub fn intra_category_error_fraction(&self, labels: &[GestureClass]) -> Option<f64> {
        let mut errors = 0u64;
        let mut intra = 0u64;
        for (t, row) in self.counts.iter().enumerate() {
            for (p, &n) in row.iter().enumerate() {
                if t != p {
                    errors += n;
                    if labels[t].gesture == labels[p].gesture {
                        intra += n;
                    }
                }
            }
        }
        (errors > 0).then(|| intra as f64 / errors as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Evaluation {
    pub confusion: ConfusionMatrix,
    pub accuracy: f64,
    pub f1: Vec<f64>,
}

/// Classifies each labeled raw window and tallies the results.
pub fn evaluate(ckpt: &ModelCheckpoint, test: &[SignalWindow]) -> Result<Evaluation> {
    if test.is_empty() {
        return Err(Error::RejectedInput("cannot evaluate on an empty set".into()));
    }
    let pairs = test
        .par_iter()
        .map(|w| {
            let label = w
                .label
                .ok_or_else(|| Error::RejectedInput("evaluation window has no label".into()))?;
            let truth = ckpt
                .labels
                .iter()
                .position(|l| *l == label)
                .ok_or_else(|| Error::RejectedInput(format!("label {label} is not a model class")))?;
            Ok((truth, ckpt.predict(w)?.index))
        })
        .collect::<Result<Vec<_>>>()?;
    let confusion = ConfusionMatrix::from_pairs(ckpt.config.classes, pairs);
    Ok(Evaluation {
        accuracy: confusion.accuracy(),
        f1: confusion.f1(),
        confusion,
    })
}
