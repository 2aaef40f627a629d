use super::{DomError, DomTree, Element};

/// Subtrees rooted at these tags are removed before anything else.
pub const REMOVED_TAGS: &[&str] = &[
    "header", "footer", "nav", "script", "style", "noscript", "iframe", "form", "button",
];

/// Prunes boilerplate and flattens the tree:
///
/// 1. drops subtrees rooted at [`REMOVED_TAGS`];
/// 2. drops leaves with empty text, repeatedly;
/// 3. deletes every node with exactly one child, attaching the child to the
///    deleted node's parent (a single-child root is replaced by its child).
///
/// A single post-order pass reaches the fixpoint of all three rules, so the
/// result is idempotent. Ids are reassigned in DFS order.
pub fn simplify_tree(tree: &DomTree) -> Result<DomTree, DomError> {
    let root = reduce(tree.to_element()).ok_or(DomError::EmptyDocument)?;
    Ok(root.into_tree(&tree.interest, tree.source_url.clone()))
}

fn reduce(el: Element) -> Option<Element> {
    if REMOVED_TAGS.contains(&el.tag.as_str()) {
        return None;
    }
    let Element {
        tag,
        text,
        label,
        children,
    } = el;
    let mut kept: Vec<Element> = children.into_iter().filter_map(reduce).collect();
    match kept.len() {
        0 if text.is_empty() => None,
        1 => kept.pop(),
        _ => Some(Element {
            tag,
            text,
            label,
            children: kept,
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(tag: &str, text: &str, kids: Vec<Element>) -> Element {
        Element::new(tag, text).with_children(kids)
    }

    #[test]
    fn single_child_chain_collapses_to_leaf() {
        let t = e(
            "html",
            "",
            vec![e(
                "body",
                "",
                vec![e("div", "", vec![e("p", "Tent", vec![])])],
            )],
        )
        .into_tree("camping", None);
        let s = simplify_tree(&t).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s.nodes[0].tag, "p");
        assert_eq!(s.nodes[0].text, "Tent");
        assert_eq!(s.nodes[0].parent, None);
    }

    #[test]
    fn empty_leaf_is_removed() {
        let t = e(
            "div",
            "",
            vec![
                e("p", "", vec![]),
                e("p", "Tent", vec![]),
                e("p", "Stove", vec![]),
            ],
        )
        .into_tree("camping", None);
        let s = simplify_tree(&t).unwrap();
        let texts: Vec<_> = s.nodes.iter().map(|n| n.text.as_str()).collect();
        assert_eq!(texts, vec!["", "Tent", "Stove"]);

        // with only one surviving child the div itself collapses
        let t = e("div", "", vec![e("p", "", vec![]), e("p", "Tent", vec![])]).into_tree("c", None);
        let s = simplify_tree(&t).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s.nodes[0].text, "Tent");
    }

    #[test]
    fn header_removed_structure_kept() {
        let t = e(
            "body",
            "",
            vec![
                e(
                    "header",
                    "",
                    vec![e("a", "Home", vec![]), e("a", "About", vec![])],
                ),
                e("ul", "", vec![e("li", "a", vec![]), e("li", "b", vec![])]),
            ],
        )
        .into_tree("x", None);
        let s = simplify_tree(&t).unwrap();
        let shape: Vec<_> = s
            .nodes
            .iter()
            .map(|n| (n.tag.as_str(), n.text.as_str(), n.parent))
            .collect();
        // body now has a single child (ul) and collapses onto it
        assert_eq!(
            shape,
            vec![("ul", "", None), ("li", "a", Some(0)), ("li", "b", Some(0))]
        );
    }

    #[test]
    fn header_removed_with_sibling_content() {
        let t = e(
            "body",
            "",
            vec![
                e("header", "", vec![e("a", "Home", vec![])]),
                e("ul", "", vec![e("li", "a", vec![]), e("li", "b", vec![])]),
                e("p", "intro", vec![]),
            ],
        )
        .into_tree("x", None);
        let s = simplify_tree(&t).unwrap();
        let shape: Vec<_> = s.nodes.iter().map(|n| (n.tag.as_str(), n.parent)).collect();
        assert_eq!(
            shape,
            vec![
                ("body", None),
                ("ul", Some(0)),
                ("li", Some(1)),
                ("li", Some(1)),
                ("p", Some(0))
            ]
        );
    }

    #[test]
    fn everything_removed_is_an_error() {
        let t = e(
            "div",
            "",
            vec![e("footer", "x", vec![]), e("span", "", vec![])],
        )
        .into_tree("x", None);
        assert!(matches!(simplify_tree(&t), Err(DomError::EmptyDocument)));
    }

    #[test]
    fn labels_survive_simplification() {
        let t = e(
            "div",
            "",
            vec![
                e(
                    "span",
                    "",
                    vec![Element::new("b", "tent").labeled(crate::dom::Label::Positive)],
                ),
                Element::new("p", "note").labeled(crate::dom::Label::Negative),
            ],
        )
        .into_tree("x", None);
        let s = simplify_tree(&t).unwrap();
        assert_eq!(s.nodes[1].tag, "b");
        assert_eq!(s.nodes[1].label, crate::dom::Label::Positive);
    }
}
