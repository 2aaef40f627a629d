//! Newline-delimited JSON dataset: one tree per line.
//!
//! ```text
//! {"version":1,"interest":"camping","source_url":null,
//!  "nodes":[{"id":0,"parent":null,"tag":"ul","text":"","label":null}, ...]}
//! ```

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{DomError, DomNode, DomTree, Label};

pub const DATASET_VERSION: u64 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TreeRecord {
    version: u64,
    interest: String,
    source_url: Option<String>,
    nodes: Vec<NodeRecord>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeRecord {
    id: usize,
    parent: Option<usize>,
    tag: String,
    text: String,
    label: Label,
}

pub fn save_dataset(trees: &[DomTree], path: impl AsRef<Path>) -> Result<(), DomError> {
    let mut w = BufWriter::new(File::create(path)?);
    write_dataset(trees, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn write_dataset<W: Write>(trees: &[DomTree], mut w: W) -> Result<(), DomError> {
    for tree in trees {
        tree.validate()?;
        let rec = TreeRecord {
            version: DATASET_VERSION,
            interest: tree.interest.clone(),
            source_url: tree.source_url.clone(),
            nodes: tree
                .nodes
                .iter()
                .map(|n| NodeRecord {
                    id: n.id,
                    parent: n.parent,
                    tag: n.tag.clone(),
                    text: n.text.clone(),
                    label: n.label,
                })
                .collect(),
        };
        serde_json::to_writer(&mut w, &rec).map_err(|e| DomError::Io(e.into()))?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Vec<DomTree>, DomError> {
    read_dataset(BufReader::new(File::open(path)?))
}

pub fn read_dataset<R: Read>(r: R) -> Result<Vec<DomTree>, DomError> {
    let mut out = Vec::new();
    for (idx, line) in BufReader::new(r).lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value =
            serde_json::from_str(&line).map_err(|e| DomError::Format {
                line: line_no,
                field: "<json>".into(),
                message: e.to_string(),
            })?;
        match value.get("version").and_then(serde_json::Value::as_u64) {
            Some(DATASET_VERSION) => {}
            Some(version) => {
                return Err(DomError::Version {
                    line: line_no,
                    version,
                })
            }
            None => {
                return Err(DomError::Format {
                    line: line_no,
                    field: "version".into(),
                    message: "missing or not an unsigned integer".into(),
                })
            }
        }
        let rec: TreeRecord = serde_json::from_value(value).map_err(|e| DomError::Format {
            line: line_no,
            field: "<record>".into(),
            message: e.to_string(),
        })?;
        out.push(record_to_tree(rec, line_no)?);
    }
    Ok(out)
}

fn record_to_tree(rec: TreeRecord, line: usize) -> Result<DomTree, DomError> {
    let fail = |i: usize, field: &str, message: String| DomError::Format {
        line,
        field: format!("nodes[{i}].{field}"),
        message,
    };
    if rec.nodes.is_empty() {
        return Err(DomError::Format {
            line,
            field: "nodes".into(),
            message: "tree has no nodes".into(),
        });
    }
    let mut nodes = Vec::with_capacity(rec.nodes.len());
    for (i, n) in rec.nodes.into_iter().enumerate() {
        if n.id != i {
            return Err(fail(i, "id", format!("expected {i}, found {}", n.id)));
        }
        match n.parent {
            None if i != 0 => return Err(fail(i, "parent", "only node 0 may be the root".into())),
            Some(_) if i == 0 => return Err(fail(i, "parent", "node 0 must be the root".into())),
            Some(p) if p >= i => {
                return Err(fail(i, "parent", format!("parent {p} must precede id {i}")))
            }
            _ => {}
        }
        nodes.push(DomNode {
            id: n.id,
            parent: n.parent,
            tag: n.tag,
            text: n.text,
            label: n.label,
        });
    }
    let tree = DomTree {
        interest: rec.interest,
        source_url: rec.source_url,
        nodes,
    };
    tree.validate().map_err(|e| DomError::Format {
        line,
        field: "nodes".into(),
        message: e.to_string(),
    })?;
    Ok(tree)
}
