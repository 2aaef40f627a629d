use std::fmt::Write as _;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::dom::DomTree;

use super::depth::{depth_report, tree_depth, DepthReport};
use super::metrics::{macro_average, Confusion, Prf};
use super::EvalError;

pub const REPORT_VERSION: u64 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeScore {
    /// Index of the tree in the dataset file.
    pub tree_id: usize,
    pub interest: String,
    pub depth: f64,
    pub prf: Prf,
}

/// Pooled scores of one replicate's test partition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitScore {
    pub replicate: usize,
    pub confusion: Confusion,
    pub prf: Prf,
    pub trees: Vec<TreeScore>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub version: u64,
    pub model: String,
    pub splits: Vec<SplitScore>,
    /// Mean of the per-split scores.
    #[serde(rename = "macro")]
    pub macro_avg: Prf,
    pub depth: Option<DepthReport>,
}

/// Scores predictions for `(tree_id, tree, predicted labels)` triples.
pub fn score_split<'a>(
    replicate: usize,
    items: impl IntoIterator<Item = (usize, &'a DomTree, &'a [bool])>,
) -> SplitScore {
    let mut confusion = Confusion::default();
    let mut trees = Vec::new();
    for (tree_id, tree, pred) in items {
        let gold: Vec<Option<bool>> = tree.nodes.iter().map(|n| n.label.as_bool()).collect();
        let c = Confusion::from_labels(pred, &gold);
        confusion.merge(&c);
        trees.push(TreeScore {
            tree_id,
            interest: tree.interest.clone(),
            depth: tree_depth(tree),
            prf: c.prf(),
        });
    }
    SplitScore {
        replicate,
        confusion,
        prf: confusion.prf(),
        trees,
    }
}

impl EvalReport {
    pub fn new(model: &str, splits: Vec<SplitScore>) -> Self {
        let macro_avg = macro_average(&splits.iter().map(|s| s.prf).collect::<Vec<_>>());
        let per_tree: Vec<(f64, f64)> = splits
            .iter()
            .flat_map(|s| s.trees.iter().map(|t| (t.depth, t.prf.f1)))
            .collect();
        Self {
            version: REPORT_VERSION,
            model: model.to_string(),
            splits,
            macro_avg,
            depth: (!per_tree.is_empty()).then(|| depth_report(&per_tree)),
        }
    }

    /// Plain-text table: one row per model with per-split F1, the macro F1
    /// and macro precision / recall, all in percent, then the depth table.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = write!(s, "{:<12}", "Model");
        for sp in &self.splits {
            let _ = write!(s, " {:>8}", format!("F1-{}", sp.replicate));
        }
        let _ = writeln!(s, " {:>8} {:>8} {:>8}", "MacroF1", "P", "R");
        let _ = write!(s, "{:<12}", self.model);
        for sp in &self.splits {
            let _ = write!(s, " {:>8.2}", 100.0 * sp.prf.f1);
        }
        let m = &self.macro_avg;
        let _ = writeln!(
            s,
            " {:>8.2} {:>8.2} {:>8.2}",
            100.0 * m.f1,
            100.0 * m.precision,
            100.0 * m.recall
        );
        if let Some(d) = &self.depth {
            let _ = writeln!(
                s,
                "\n{:<22} {:>6} {:>8}",
                "Depth interval", "Trees", "MeanF1"
            );
            for l in &d.levels {
                let f1 = l
                    .mean_f1
                    .map_or("-".to_string(), |f| format!("{:.2}", 100.0 * f));
                let _ = writeln!(
                    s,
                    "{:<22} {:>6} {:>8}",
                    format!("[{:.3}, {:.3}]", l.lo, l.hi),
                    l.trees,
                    f1
                );
            }
        }
        s
    }
}

/// One line of a prediction file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub tree_id: usize,
    pub node_id: usize,
    pub prob: f64,
    pub label: u8,
}

pub fn write_predictions<W: Write>(
    records: &[PredictionRecord],
    mut w: W,
) -> Result<(), EvalError> {
    for r in records {
        serde_json::to_writer(&mut w, r).map_err(|e| EvalError::Format(e.to_string()))?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_predictions<R: BufRead>(r: R) -> Result<Vec<PredictionRecord>, EvalError> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line)
                .map_err(|e| EvalError::Format(format!("line {}: {e}", i + 1)))?,
        );
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dom::{Element, Label};

    fn tree() -> DomTree {
        Element::new("ul", "")
            .labeled(Label::Negative)
            .with_children(vec![
                Element::new("li", "a").labeled(Label::Positive),
                Element::new("li", "b").labeled(Label::Negative),
            ])
            .into_tree("x", None)
    }

    #[test]
    fn gold_predictions_score_one() {
        let t = tree();
        let pred = [false, true, false];
        let s = score_split(1, [(0, &t, &pred[..])]);
        let r = EvalReport::new("gold", vec![s]);
        assert_eq!(r.macro_avg.f1, 1.0);
        let back: EvalReport = serde_json::from_str(&serde_json::to_string(&r).unwrap()).unwrap();
        assert_eq!(back, r);
        assert!(r.to_text().contains("100.00"));
    }

    #[test]
    fn predictions_round_trip() {
        let recs = vec![PredictionRecord {
            tree_id: 3,
            node_id: 1,
            prob: 0.25,
            label: 0,
        }];
        let mut buf = Vec::new();
        write_predictions(&recs, &mut buf).unwrap();
        assert_eq!(read_predictions(&buf[..]).unwrap(), recs);
    }
}
