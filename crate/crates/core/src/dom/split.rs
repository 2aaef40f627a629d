use super::{DomError, DomNode, DomTree, Label};

pub const DEFAULT_MAX_NODES: usize = 512;
pub const DEFAULT_MIN_NODES: usize = 64;

/// One output of [`split_tree_with_origin`].
#[derive(Clone, Debug, PartialEq)]
pub struct SplitPart {
    pub tree: DomTree,
    /// Original id of every node in `tree`.
    pub origin: Vec<usize>,
    /// `true` for ancestors copied in only to keep the part connected.
    pub replicated: Vec<bool>,
}

/// Splits an oversized tree into parts of at most `max_nodes` nodes.
pub fn split_tree(
    tree: &DomTree,
    max_nodes: usize,
    min_nodes: usize,
) -> Result<Vec<DomTree>, DomError> {
    Ok(split_tree_with_origin(tree, max_nodes, min_nodes)?
        .into_iter()
        .map(|p| p.tree)
        .collect())
}

/// Splits a tree, keeping track of where every output node came from.
///
/// The tree is cut into units in DFS order: a whole subtree when it fits
/// together with its ancestor path, otherwise its root alone followed by the
/// units of its children. Consecutive units are grouped so that each group
/// plus the ancestor path of its first node holds between `min_nodes` and
/// `max_nodes` nodes, taking the largest feasible group first. If no such
/// grouping exists the lower bound is dropped and a final undersized group
/// is merged into its predecessor when that still fits.
///
/// Copied ancestors are labeled [`Label::Unlabeled`] so each original node
/// is scored in exactly one part.
pub fn split_tree_with_origin(
    tree: &DomTree,
    max_nodes: usize,
    min_nodes: usize,
) -> Result<Vec<SplitPart>, DomError> {
    if min_nodes == 0 || max_nodes < min_nodes {
        return Err(DomError::SplitImpossible(format!(
            "need max_nodes >= min_nodes >= 1, got max {max_nodes}, min {min_nodes}"
        )));
    }
    let n = tree.len();
    if n <= max_nodes {
        return Ok(vec![SplitPart {
            tree: tree.clone(),
            origin: (0..n).collect(),
            replicated: vec![false; n],
        }]);
    }

    let sizes = tree.subtree_sizes();
    let levels = tree.levels();
    let kids = tree.children();

    // (first id, length) of each unit; units tile 0..n in order.
    let mut units: Vec<(usize, usize)> = Vec::new();
    let mut stack = vec![0usize];
    while let Some(v) = stack.pop() {
        if levels[v] + sizes[v] <= max_nodes {
            units.push((v, sizes[v]));
        } else if levels[v] + 1 > max_nodes {
            return Err(DomError::SplitImpossible(format!(
                "node {v} sits at depth {} which exceeds max_nodes {max_nodes}",
                levels[v]
            )));
        } else {
            units.push((v, 1));
            stack.extend(kids[v].iter().rev());
        }
    }

    let cost = |i: usize, j: usize| -> usize {
        levels[units[i].0] + units[i..=j].iter().map(|u| u.1).sum::<usize>()
    };
    let groups = group_with_bounds(units.len(), &cost, min_nodes, max_nodes)
        .unwrap_or_else(|| group_greedy(units.len(), &cost, min_nodes, max_nodes));

    Ok(groups
        .into_iter()
        .map(|(i, j)| {
            let start = units[i].0;
            let end = units[j].0 + units[j].1;
            build_part(tree, start, end)
        })
        .collect())
}

/// Groups with every cost inside `[min, max]`, largest first group first.
fn group_with_bounds(
    k: usize,
    cost: &dyn Fn(usize, usize) -> usize,
    min: usize,
    max: usize,
) -> Option<Vec<(usize, usize)>> {
    // choice[i] = end of the group starting at unit i in a feasible grouping of i..k
    let mut choice: Vec<Option<usize>> = vec![None; k + 1];
    let mut feasible = vec![false; k + 1];
    feasible[k] = true;
    for i in (0..k).rev() {
        let mut j = i;
        let mut best = None;
        while j < k {
            let c = cost(i, j);
            if c > max {
                break;
            }
            if c >= min && feasible[j + 1] {
                best = Some(j);
            }
            j += 1;
        }
        if let Some(j) = best {
            feasible[i] = true;
            choice[i] = Some(j);
        }
    }
    if !feasible[0] {
        return None;
    }
    let mut out = Vec::new();
    let mut i = 0;
    while i < k {
        let j = choice[i]?;
        out.push((i, j));
        i = j + 1;
    }
    Some(out)
}

fn group_greedy(
    k: usize,
    cost: &dyn Fn(usize, usize) -> usize,
    min: usize,
    max: usize,
) -> Vec<(usize, usize)> {
    let mut out: Vec<(usize, usize)> = Vec::new();
    let mut i = 0;
    while i < k {
        let mut j = i;
        while j + 1 < k && cost(i, j + 1) <= max {
            j += 1;
        }
        out.push((i, j));
        i = j + 1;
    }
    if out.len() >= 2 {
        let (li, lj) = out[out.len() - 1];
        let (pi, _) = out[out.len() - 2];
        if cost(li, lj) < min && cost(pi, lj) <= max {
            out.pop();
            out.last_mut().expect("len >= 2").1 = lj;
        }
    }
    out
}

/// Nodes `start..end` (a contiguous DFS range) plus the ancestors of `start`.
fn build_part(tree: &DomTree, start: usize, end: usize) -> SplitPart {
    let mut ancestors = Vec::new();
    let mut cur = tree.nodes[start].parent;
    while let Some(p) = cur {
        ancestors.push(p);
        cur = tree.nodes[p].parent;
    }
    ancestors.reverse();

    let mut origin = ancestors.clone();
    origin.extend(start..end);
    let mut replicated = vec![true; ancestors.len()];
    replicated.extend(std::iter::repeat_n(false, end - start));

    let mut new_id = std::collections::HashMap::with_capacity(origin.len());
    for (i, &o) in origin.iter().enumerate() {
        new_id.insert(o, i);
    }
    let nodes = origin
        .iter()
        .enumerate()
        .map(|(i, &o)| {
            let src = &tree.nodes[o];
            DomNode {
                id: i,
                parent: src.parent.map(|p| new_id[&p]),
                tag: src.tag.clone(),
                text: src.text.clone(),
                label: if replicated[i] {
                    Label::Unlabeled
                } else {
                    src.label
                },
            }
        })
        .collect();
    SplitPart {
        tree: DomTree {
            interest: tree.interest.clone(),
            source_url: tree.source_url.clone(),
            nodes,
        },
        origin,
        replicated,
    }
}
