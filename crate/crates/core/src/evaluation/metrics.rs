use serde::{Deserialize, Serialize};

/// Positive-class confusion counts.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
}

impl Confusion {
    /// Counts over aligned nodes; unlabeled gold entries are skipped.
    pub fn from_labels(pred: &[bool], gold: &[Option<bool>]) -> Self {
        assert_eq!(pred.len(), gold.len(), "prediction and gold lengths differ");
        let mut c = Self::default();
        for (&p, g) in pred.iter().zip(gold) {
            match (p, *g) {
                (true, Some(true)) => c.tp += 1,
                (true, Some(false)) => c.fp += 1,
                (false, Some(true)) => c.fn_ += 1,
                (false, Some(false)) => c.tn += 1,
                (_, None) => {}
            }
        }
        c
    }

    pub fn merge(&mut self, other: &Confusion) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.fn_ += other.fn_;
        self.tn += other.tn;
    }

    pub fn prf(&self) -> Prf {
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let precision = ratio(self.tp, self.tp + self.fp);
        let recall = ratio(self.tp, self.tp + self.fn_);
        Prf {
            precision,
            recall,
            f1: f1(precision, recall),
            undefined: self.tp + self.fp == 0 || self.tp + self.fn_ == 0,
        }
    }
}

/// Precision, recall and F1 of the positive class. `undefined` flags a zero
/// denominator, in which case the affected value is reported as 0.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub undefined: bool,
}

pub fn f1(precision: f64, recall: f64) -> f64 {
    if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    }
}

/// Pooled precision, recall and F1 over all labeled nodes.
pub fn prf1(pred: &[bool], gold: &[Option<bool>]) -> Prf {
    Confusion::from_labels(pred, gold).prf()
}

/// Arithmetic mean of per-replicate scores.
pub fn macro_average(scores: &[Prf]) -> Prf {
    if scores.is_empty() {
        return Prf::default();
    }
    let n = scores.len() as f64;
    Prf {
        precision: scores.iter().map(|s| s.precision).sum::<f64>() / n,
        recall: scores.iter().map(|s| s.recall).sum::<f64>() / n,
        f1: scores.iter().map(|s| s.f1).sum::<f64>() / n,
        undefined: scores.iter().any(|s| s.undefined),
    }
}
