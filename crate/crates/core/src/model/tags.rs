use std::collections::HashMap;

/// Tag names with a dedicated embedding row; everything else maps to
/// [`TagVocab::UNK`].
pub const STANDARD_TAGS: &[&str] = &[
    "a",
    "abbr",
    "address",
    "article",
    "aside",
    "b",
    "bdi",
    "big",
    "blockquote",
    "body",
    "br",
    "caption",
    "center",
    "cite",
    "code",
    "dd",
    "del",
    "details",
    "dfn",
    "div",
    "dl",
    "dt",
    "em",
    "figcaption",
    "figure",
    "font",
    "h1",
    "h2",
    "h3",
    "h4",
    "h5",
    "h6",
    "hr",
    "html",
    "i",
    "img",
    "ins",
    "kbd",
    "label",
    "legend",
    "li",
    "main",
    "mark",
    "ol",
    "p",
    "picture",
    "pre",
    "q",
    "s",
    "section",
    "small",
    "span",
    "strike",
    "strong",
    "sub",
    "summary",
    "sup",
    "table",
    "tbody",
    "td",
    "tfoot",
    "th",
    "thead",
    "time",
    "tr",
    "tt",
    "u",
    "ul",
];

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TagVocab {
    names: Vec<String>,
    index: HashMap<String, usize>,
}

impl Default for TagVocab {
    fn default() -> Self {
        Self::from_names(STANDARD_TAGS.iter().map(|s| s.to_string()).collect())
    }
}

impl TagVocab {
    pub const UNK: usize = 0;

    /// Vocabulary with the given known tags after the UNK slot.
    pub fn from_names(names: Vec<String>) -> Self {
        let index = names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), i + 1))
            .collect();
        Self { names, index }
    }

    /// Number of embedding rows, UNK included.
    pub fn len(&self) -> usize {
        self.names.len() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn id(&self, tag: &str) -> usize {
        self.index
            .get(&tag.to_ascii_lowercase())
            .copied()
            .unwrap_or(Self::UNK)
    }
}
