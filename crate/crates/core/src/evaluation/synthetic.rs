use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dom::{DomTree, Element, Label};

pub const MIN_SIZE: usize = 30;
pub const MAX_SIZE: usize = 120;
/// Bounds on the number of levels in a generated tree.
pub const MIN_LEVELS: usize = 3;
pub const MAX_LEVELS: usize = 8;
/// Probability that a structure-task list group is positive.
pub const POSITIVE_GROUP_RATE: f64 = 0.25;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SyntheticTask {
    /// Positive list items carry words from their interest's lexicon.
    TextTask,
    /// All texts come from one shared pool; a list item is positive iff its
    /// list has at least three items, which happens for a coin-flipped
    /// subset of lists.
    StructureTask,
}

impl SyntheticTask {
    pub fn name(self) -> &'static str {
        match self {
            SyntheticTask::TextTask => "text_task",
            SyntheticTask::StructureTask => "structure_task",
        }
    }
}

impl std::str::FromStr for SyntheticTask {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "text_task" | "text" => Ok(Self::TextTask),
            "structure_task" | "structure" => Ok(Self::StructureTask),
            other => Err(format!("unknown synthetic task {other:?}")),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticCorpus {
    pub trees: Vec<DomTree>,
    /// Product-type words of each interest (used by the text task only).
    pub lexicon: BTreeMap<String, Vec<String>>,
}

const SYLLABLES: [&str; 24] = [
    "ka", "lo", "mi", "ne", "ru", "ta", "vo", "si", "pe", "da", "go", "bi", "zu", "fa", "he", "jo",
    "wi", "xe", "yo", "ce", "mu", "ra", "ti", "no",
];
const POOL_SIZE: usize = 64;
const LEXICON_SIZE: usize = 8;

fn word(rng: &mut ChaCha8Rng, syllables: usize) -> String {
    (0..syllables)
        .map(|_| *SYLLABLES.choose(rng).unwrap())
        .collect()
}

/// Distinct pseudo-words, deterministic in `seed`.
fn words(
    seed: u64,
    n: usize,
    syllables: usize,
    taken: &mut std::collections::BTreeSet<String>,
) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let w = word(&mut rng, syllables);
        if taken.insert(w.clone()) {
            out.push(w);
        }
    }
    out
}

struct Gen<'a> {
    rng: ChaCha8Rng,
    task: SyntheticTask,
    pool: &'a [String],
    lexicon: &'a [String],
}

impl Gen<'_> {
    fn phrase(&mut self, lo: usize, hi: usize) -> String {
        let k = self.rng.gen_range(lo..=hi);
        (0..k)
            .map(|_| self.pool.choose(&mut self.rng).unwrap().as_str())
            .collect::<Vec<_>>()
            .join(" ")
    }

    fn leaf(&mut self, tag: &str, lo: usize, hi: usize) -> Element {
        let text = self.phrase(lo, hi);
        Element::new(tag, &text).labeled(Label::Negative)
    }

    fn list(&mut self) -> Element {
        let tag = if self.rng.gen_bool(0.7) { "ul" } else { "ol" };
        let items: Vec<Element> = match self.task {
            SyntheticTask::StructureTask => {
                let positive = self.rng.gen_bool(POSITIVE_GROUP_RATE);
                let k = if positive {
                    self.rng.gen_range(3..=5)
                } else {
                    2
                };
                (0..k)
                    .map(|_| {
                        let text = self.phrase(1, 3);
                        Element::new("li", &text).labeled(Label::from_bool(positive))
                    })
                    .collect()
            }
            SyntheticTask::TextTask => {
                let k = self.rng.gen_range(2..=5);
                (0..k)
                    .map(|_| {
                        if self.rng.gen_bool(0.5) {
                            let n = self.rng.gen_range(1..=2);
                            let text = (0..n)
                                .map(|_| self.lexicon.choose(&mut self.rng).unwrap().as_str())
                                .collect::<Vec<_>>()
                                .join(" ");
                            Element::new("li", &text).labeled(Label::Positive)
                        } else {
                            self.leaf("li", 1, 3)
                        }
                    })
                    .collect()
            }
        };
        Element::new(tag, "")
            .labeled(Label::Negative)
            .with_children(items)
    }

    /// Same-tag leaves outside any list, always negative.
    fn distractor(&mut self) -> Element {
        let k = self.rng.gen_range(3..=5);
        let kids = (0..k).map(|_| self.leaf("span", 1, 3)).collect();
        Element::new("div", "")
            .labeled(Label::Negative)
            .with_children(kids)
    }

    fn block(&mut self, depth_left: usize) -> Element {
        let heading = if self.rng.gen_bool(0.5) { "h2" } else { "h3" };
        let mut rest = Vec::new();
        for _ in 0..self.rng.gen_range(0..=2) {
            rest.push(self.leaf("p", 3, 8));
        }
        for _ in 0..self.rng.gen_range(1..=2) {
            rest.push(self.list());
        }
        if self.rng.gen_bool(0.4) {
            rest.push(self.distractor());
        }
        if depth_left > 0 && self.rng.gen_bool(0.7) {
            for _ in 0..self.rng.gen_range(1..=2) {
                rest.push(self.block(depth_left - 1));
            }
        }
        rest.shuffle(&mut self.rng);
        let mut kids = vec![self.leaf(heading, 1, 3)];
        kids.extend(rest);
        Element::new("div", "")
            .labeled(Label::Negative)
            .with_children(kids)
    }
}

fn levels(e: &Element) -> usize {
    1 + e.children.iter().map(levels).max().unwrap_or(0)
}

/// Number of interests used for a corpus of `n_trees` trees.
pub fn interest_count(n_trees: usize) -> usize {
    n_trees.div_ceil(5).max(3).min(n_trees.max(1))
}

/// Labeled, already simplified trees spread round-robin over
/// [`interest_count`] interests.
pub fn generate_synthetic_corpus(
    n_trees: usize,
    seed: u64,
    task: SyntheticTask,
) -> SyntheticCorpus {
    let mut taken = Default::default();
    let n_si = interest_count(n_trees);
    let interests = words(seed ^ 0x5151, n_si, 4, &mut taken);
    let pool = words(seed ^ 0x9001, POOL_SIZE, 3, &mut taken);
    let lexicon: BTreeMap<String, Vec<String>> = interests
        .iter()
        .enumerate()
        .map(|(i, si)| {
            (
                si.clone(),
                words(seed ^ (0xabc0 + i as u64), LEXICON_SIZE, 3, &mut taken),
            )
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let trees = (0..n_trees)
        .map(|i| {
            let si = &interests[i % n_si];
            let mut g = Gen {
                rng: ChaCha8Rng::seed_from_u64(rng.gen()),
                task,
                pool: &pool,
                lexicon: &lexicon[si],
            };
            let root = loop {
                let depth = g.rng.gen_range(1..=4);
                let e = g.block(depth);
                if (MIN_SIZE..=MAX_SIZE).contains(&e.size())
                    && (MIN_LEVELS..=MAX_LEVELS).contains(&levels(&e))
                {
                    break e;
                }
            };
            root.into_tree(si, Some(format!("synthetic://{}/{seed}/{i}", task.name())))
        })
        .collect();
    SyntheticCorpus { trees, lexicon }
}
