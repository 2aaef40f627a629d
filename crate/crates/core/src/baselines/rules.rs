use crate::dom::DomTree;

/// Tags whose nodes often hold a single product phrase.
pub const PHRASE_TAGS: &[&str] = &["li", "h2", "h3", "h4", "b", "strong", "td", "dt"];
pub const MAX_TOKENS: usize = 6;

/// Rule-based classifier; reads tags, texts and structure only, never labels.
///
/// A node is positive iff (a) its tag is in [`PHRASE_TAGS`] or it is a leaf
/// child of `ul`/`ol`, (b) its text has 1 to [`MAX_TOKENS`] tokens, (c) its
/// text contains a letter, and (d) at least two members of its sibling set,
/// itself included, satisfy (a) to (c).
pub fn heuristic_classify(tree: &DomTree, _interest: &str) -> Vec<bool> {
    let kids = tree.children();
    let candidate: Vec<bool> = tree
        .nodes
        .iter()
        .map(|n| {
            let in_list = n
                .parent
                .is_some_and(|p| matches!(tree.nodes[p].tag.as_str(), "ul" | "ol"));
            let a = PHRASE_TAGS.contains(&n.tag.as_str()) || (in_list && kids[n.id].is_empty());
            let tokens = n.text.split_whitespace().count();
            let b = (1..=MAX_TOKENS).contains(&tokens);
            let c = n.text.chars().any(char::is_alphabetic);
            a && b && c
        })
        .collect();
    tree.nodes
        .iter()
        .map(|n| {
            let support = match n.parent {
                Some(p) => kids[p].iter().filter(|&&s| candidate[s]).count(),
                None => usize::from(candidate[n.id]),
            };
            candidate[n.id] && support >= 2
        })
        .collect()
}
