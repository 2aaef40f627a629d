//! DOM trees: parsing, simplification, splitting and the JSONL dataset format.

mod dataset;
mod parse;
mod simplify;
mod split;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

pub use dataset::{load_dataset, read_dataset, save_dataset, write_dataset, DATASET_VERSION};
pub use parse::parse_html;
pub use simplify::{simplify_tree, REMOVED_TAGS};
pub use split::{
    split_tree, split_tree_with_origin, SplitPart, DEFAULT_MAX_NODES, DEFAULT_MIN_NODES,
};

#[derive(Debug, Error)]
pub enum DomError {
    #[error("document has no element content")]
    EmptyDocument,
    #[error("cannot split tree: {0}")]
    SplitImpossible(String),
    #[error("line {line}: {field}: {message}")]
    Format {
        line: usize,
        field: String,
        message: String,
    },
    #[error("line {line}: unsupported dataset version {version}")]
    Version { line: usize, version: u64 },
    #[error("invalid tree: {0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Gold label of a node. Serialized as `0`, `1` or `null`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum Label {
    Negative,
    Positive,
    #[default]
    Unlabeled,
}

impl Label {
    pub fn from_bool(positive: bool) -> Self {
        if positive {
            Label::Positive
        } else {
            Label::Negative
        }
    }

    /// `None` for unlabeled nodes.
    pub fn as_bool(self) -> Option<bool> {
        match self {
            Label::Negative => Some(false),
            Label::Positive => Some(true),
            Label::Unlabeled => None,
        }
    }

    pub fn is_labeled(self) -> bool {
        self != Label::Unlabeled
    }
}

impl Serialize for Label {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Label::Negative => s.serialize_u8(0),
            Label::Positive => s.serialize_u8(1),
            Label::Unlabeled => s.serialize_none(),
        }
    }
}

impl<'de> Deserialize<'de> for Label {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        match Option::<u8>::deserialize(d)? {
            None => Ok(Label::Unlabeled),
            Some(0) => Ok(Label::Negative),
            Some(1) => Ok(Label::Positive),
            Some(other) => Err(serde::de::Error::custom(format!(
                "label must be 0, 1 or null, got {other}"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DomNode {
    /// Position in depth-first order.
    pub id: usize,
    pub parent: Option<usize>,
    pub tag: String,
    pub text: String,
    pub label: Label,
}

/// A page's DOM tree with the shopping interest it was collected for.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DomTree {
    pub interest: String,
    pub source_url: Option<String>,
    pub nodes: Vec<DomNode>,
}

impl DomTree {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Child lists in DFS order.
    pub fn children(&self) -> Vec<Vec<usize>> {
        let mut kids = vec![Vec::new(); self.nodes.len()];
        for n in &self.nodes {
            if let Some(p) = n.parent {
                kids[p].push(n.id);
            }
        }
        kids
    }

    /// Number of nodes in each node's subtree (itself included).
    pub fn subtree_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![1usize; self.nodes.len()];
        for n in self.nodes.iter().rev() {
            if let Some(p) = n.parent {
                sizes[p] += sizes[n.id];
            }
        }
        sizes
    }

    /// Distance from the root, root = 0.
    pub fn levels(&self) -> Vec<usize> {
        let mut lv = vec![0usize; self.nodes.len()];
        for n in &self.nodes {
            if let Some(p) = n.parent {
                lv[n.id] = lv[p] + 1;
            }
        }
        lv
    }

    pub fn labels(&self) -> Vec<Label> {
        self.nodes.iter().map(|n| n.label).collect()
    }

    pub fn positive_count(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| n.label == Label::Positive)
            .count()
    }

    /// Checks id contiguity, parent ordering, a single root and that the
    /// ids form a depth-first enumeration.
    pub fn validate(&self) -> Result<(), DomError> {
        if self.nodes.is_empty() {
            return Err(DomError::Invalid("tree has no nodes".into()));
        }
        let mut roots = 0;
        for (i, n) in self.nodes.iter().enumerate() {
            if n.id != i {
                return Err(DomError::Invalid(format!(
                    "node at position {i} has id {}",
                    n.id
                )));
            }
            match n.parent {
                None => roots += 1,
                Some(p) if p >= i => {
                    return Err(DomError::Invalid(format!("node {i} has parent {p} >= id")))
                }
                Some(_) => {}
            }
        }
        if roots != 1 || self.nodes[0].parent.is_some() {
            return Err(DomError::Invalid(format!(
                "expected exactly one root at id 0, found {roots}"
            )));
        }
        // In a preorder every parent is the current node or one of its
        // ancestors on the open DFS stack.
        let mut stack: Vec<usize> = vec![0];
        for n in &self.nodes[1..] {
            let p = n.parent.expect("checked above");
            while stack.last().is_some_and(|&top| top != p) {
                stack.pop();
            }
            if stack.is_empty() {
                return Err(DomError::Invalid(format!(
                    "node {} breaks depth-first order",
                    n.id
                )));
            }
            stack.push(n.id);
        }
        Ok(())
    }

    pub fn to_element(&self) -> Element {
        let kids = self.children();
        fn build(tree: &DomTree, kids: &[Vec<usize>], v: usize) -> Element {
            let n = &tree.nodes[v];
            Element {
                tag: n.tag.clone(),
                text: n.text.clone(),
                label: n.label,
                children: kids[v].iter().map(|&c| build(tree, kids, c)).collect(),
            }
        }
        build(self, &kids, 0)
    }
}

/// Owned nested form of a tree, convenient for construction and rewriting.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Element {
    pub tag: String,
    pub text: String,
    pub label: Label,
    pub children: Vec<Element>,
}

impl Element {
    pub fn new(tag: &str, text: &str) -> Self {
        Self {
            tag: tag.to_string(),
            text: text.to_string(),
            label: Label::Unlabeled,
            children: Vec::new(),
        }
    }

    pub fn labeled(mut self, label: Label) -> Self {
        self.label = label;
        self
    }

    pub fn with_children(mut self, children: Vec<Element>) -> Self {
        self.children = children;
        self
    }

    pub fn push(&mut self, child: Element) {
        self.children.push(child);
    }

    pub fn size(&self) -> usize {
        1 + self.children.iter().map(Element::size).sum::<usize>()
    }

    /// Flattens into a tree with DFS ids.
    pub fn into_tree(self, interest: &str, source_url: Option<String>) -> DomTree {
        let mut nodes = Vec::with_capacity(self.size());
        fn walk(e: Element, parent: Option<usize>, out: &mut Vec<DomNode>) {
            let id = out.len();
            out.push(DomNode {
                id,
                parent,
                tag: e.tag,
                text: e.text,
                label: e.label,
            });
            for c in e.children {
                walk(c, Some(id), out);
            }
        }
        walk(self, None, &mut nodes);
        DomTree {
            interest: interest.to_string(),
            source_url,
            nodes,
        }
    }
}

/// Collapses whitespace runs to single spaces and trims.
pub fn normalize_whitespace(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}
