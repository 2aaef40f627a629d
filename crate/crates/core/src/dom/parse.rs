use std::borrow::Cow;

use html5ever::tendril::{StrTendril, TendrilSink};
use html5ever::tree_builder::{ElementFlags, NodeOrText, QuirksMode, TreeSink};
use html5ever::{parse_document, Attribute, ExpandedName, QualName};

use super::{normalize_whitespace, DomError, DomTree, Element};

/// Elements dropped together with their content while parsing.
const SKIPPED_ELEMENTS: &[&str] = &["head", "script", "style", "template"];

/// Parses an HTML document into an unlabeled, unsimplified tree rooted at
/// `<html>`.
///
/// Parsing is tolerant (html5ever recovers unclosed tags the way browsers
/// do). Each element keeps the whitespace-normalized concatenation of its
/// direct text children; comments and the content of `script`, `style`,
/// `template` and `head` never produce nodes.
pub fn parse_html(html: &str, interest: &str) -> Result<DomTree, DomError> {
    let arena = parse_document(Arena::default(), Default::default()).one(html);
    let html_el = arena.nodes[Arena::DOCUMENT]
        .children
        .iter()
        .copied()
        .find(|&c| matches!(arena.nodes[c].kind, Kind::Element(_)))
        .ok_or(DomError::EmptyDocument)?;
    let root = convert(&arena, html_el).ok_or(DomError::EmptyDocument)?;

    let only_skeleton = |e: &Element| {
        e.text.is_empty()
            && e.children
                .iter()
                .all(|c| c.tag == "body" && c.text.is_empty() && c.children.is_empty())
    };
    if only_skeleton(&root) {
        return Err(DomError::EmptyDocument);
    }
    Ok(root.into_tree(interest, None))
}

fn convert(arena: &Arena, id: usize) -> Option<Element> {
    let Kind::Element(name) = &arena.nodes[id].kind else {
        return None;
    };
    let tag = name.local.to_ascii_lowercase().to_string();
    if SKIPPED_ELEMENTS.contains(&tag.as_str()) {
        return None;
    }
    let mut raw_text = String::new();
    let mut children = Vec::new();
    for &child in &arena.nodes[id].children {
        match &arena.nodes[child].kind {
            Kind::Text(t) => raw_text.push_str(t),
            Kind::Element(_) => children.extend(convert(arena, child)),
            _ => {}
        }
    }
    Some(Element::new(&tag, &normalize_whitespace(&raw_text)).with_children(children))
}

enum Kind {
    Document,
    Element(QualName),
    Text(String),
    Other,
}

struct ArenaNode {
    kind: Kind,
    parent: Option<usize>,
    children: Vec<usize>,
}

/// Flat node store receiving html5ever tree-builder callbacks.
struct Arena {
    nodes: Vec<ArenaNode>,
    template_contents: Vec<(usize, usize)>,
}

impl Default for Arena {
    fn default() -> Self {
        Self {
            nodes: vec![ArenaNode {
                kind: Kind::Document,
                parent: None,
                children: Vec::new(),
            }],
            template_contents: Vec::new(),
        }
    }
}

impl Arena {
    const DOCUMENT: usize = 0;

    fn new_node(&mut self, kind: Kind) -> usize {
        self.nodes.push(ArenaNode {
            kind,
            parent: None,
            children: Vec::new(),
        });
        self.nodes.len() - 1
    }

    fn detach(&mut self, id: usize) {
        if let Some(p) = self.nodes[id].parent.take() {
            self.nodes[p].children.retain(|&c| c != id);
        }
    }

    /// Inserts `child` into `parent` at `pos`, merging adjacent text.
    fn insert(&mut self, parent: usize, pos: usize, child: NodeOrText<usize>) {
        match child {
            NodeOrText::AppendText(text) => {
                if pos > 0 {
                    let prev = self.nodes[parent].children[pos - 1];
                    if let Kind::Text(t) = &mut self.nodes[prev].kind {
                        t.push_str(&text);
                        return;
                    }
                }
                let id = self.new_node(Kind::Text(text.to_string()));
                self.nodes[id].parent = Some(parent);
                self.nodes[parent].children.insert(pos, id);
            }
            NodeOrText::AppendNode(id) => {
                self.detach(id);
                self.nodes[id].parent = Some(parent);
                self.nodes[parent].children.insert(pos, id);
            }
        }
    }
}

impl TreeSink for Arena {
    type Handle = usize;
    type Output = Self;

    fn finish(self) -> Self {
        self
    }

    fn parse_error(&mut self, _msg: Cow<'static, str>) {}

    fn get_document(&mut self) -> usize {
        Self::DOCUMENT
    }

    fn elem_name<'a>(&'a self, target: &'a usize) -> ExpandedName<'a> {
        match &self.nodes[*target].kind {
            Kind::Element(name) => name.expanded(),
            _ => panic!("elem_name called on a non-element"),
        }
    }

    fn create_element(
        &mut self,
        name: QualName,
        _attrs: Vec<Attribute>,
        flags: ElementFlags,
    ) -> usize {
        let id = self.new_node(Kind::Element(name));
        if flags.template {
            let contents = self.new_node(Kind::Document);
            self.template_contents.push((id, contents));
        }
        id
    }

    fn create_comment(&mut self, _text: StrTendril) -> usize {
        self.new_node(Kind::Other)
    }

    fn create_pi(&mut self, _target: StrTendril, _data: StrTendril) -> usize {
        self.new_node(Kind::Other)
    }

    fn append(&mut self, parent: &usize, child: NodeOrText<usize>) {
        let pos = self.nodes[*parent].children.len();
        self.insert(*parent, pos, child);
    }

    fn append_based_on_parent_node(
        &mut self,
        element: &usize,
        prev_element: &usize,
        child: NodeOrText<usize>,
    ) {
        if self.nodes[*element].parent.is_some() {
            self.append_before_sibling(element, child);
        } else {
            self.append(prev_element, child);
        }
    }

    fn append_doctype_to_document(
        &mut self,
        _name: StrTendril,
        _public_id: StrTendril,
        _system_id: StrTendril,
    ) {
    }

    fn get_template_contents(&mut self, target: &usize) -> usize {
        self.template_contents
            .iter()
            .find(|(t, _)| t == target)
            .map(|&(_, c)| c)
            .expect("template element has contents")
    }

    fn same_node(&self, x: &usize, y: &usize) -> bool {
        x == y
    }

    fn set_quirks_mode(&mut self, _mode: QuirksMode) {}

    fn append_before_sibling(&mut self, sibling: &usize, new_node: NodeOrText<usize>) {
        if let NodeOrText::AppendNode(id) = &new_node {
            self.detach(*id);
        }
        let parent = self.nodes[*sibling].parent.expect("sibling has a parent");
        let pos = self.nodes[parent]
            .children
            .iter()
            .position(|c| c == sibling)
            .expect("sibling is a child of its parent");
        self.insert(parent, pos, new_node);
    }

    fn add_attrs_if_missing(&mut self, _target: &usize, _attrs: Vec<Attribute>) {}

    fn remove_from_parent(&mut self, target: &usize) {
        self.detach(*target);
    }

    fn reparent_children(&mut self, node: &usize, new_parent: &usize) {
        let moved = std::mem::take(&mut self.nodes[*node].children);
        for &c in &moved {
            self.nodes[c].parent = Some(*new_parent);
        }
        self.nodes[*new_parent].children.extend(moved);
    }
}
