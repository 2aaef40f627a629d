use serde::{Deserialize, Serialize};

use crate::matrix::Matrix;
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Snapshot<T> {
    pub val_f1: f64,
    pub step: usize,
    pub epoch: usize,
    pub params: Vec<Matrix<T>>,
}

/// The best checkpoints seen so far by validation F1; ties keep the earlier
/// step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct SnapshotSet<T> {
    capacity: usize,
    entries: Vec<Snapshot<T>>,
}

impl<T: Scalar> SnapshotSet<T> {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity >= 1, "snapshot capacity must be positive");
        Self {
            capacity,
            entries: Vec::new(),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Sorted by F1 descending, then step ascending.
    pub fn entries(&self) -> &[Snapshot<T>] {
        &self.entries
    }

    fn ranks_before(a: (f64, usize), b: (f64, usize)) -> bool {
        a.0 > b.0 || (a.0 == b.0 && a.1 < b.1)
    }

    /// Whether a snapshot with this score would be retained.
    pub fn would_keep(&self, val_f1: f64, step: usize) -> bool {
        self.entries.len() < self.capacity
            || self
                .entries
                .last()
                .is_some_and(|w| Self::ranks_before((val_f1, step), (w.val_f1, w.step)))
    }

    /// Inserts in rank order, evicting the worst entry when over capacity.
    /// Returns whether the snapshot was kept.
    pub fn offer(&mut self, snap: Snapshot<T>) -> bool {
        if !self.would_keep(snap.val_f1, snap.step) {
            return false;
        }
        let pos = self
            .entries
            .iter()
            .position(|e| Self::ranks_before((snap.val_f1, snap.step), (e.val_f1, e.step)))
            .unwrap_or(self.entries.len());
        self.entries.insert(pos, snap);
        self.entries.truncate(self.capacity);
        true
    }
}
