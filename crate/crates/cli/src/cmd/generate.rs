use std::path::Path;

use treenc::dom::save_dataset;
use treenc::evaluation::{generate_synthetic_corpus, SyntheticTask};

use crate::error::CliError;
use crate::manifest::{beside, RunManifest};
use crate::TaskArg;

pub fn run(task: TaskArg, n_trees: usize, seed: u64, out: &Path) -> Result<(), CliError> {
    if n_trees == 0 {
        return Err(CliError::usage("--trees must be at least 1"));
    }
    let task = match task {
        TaskArg::TextTask => SyntheticTask::TextTask,
        TaskArg::StructureTask => SyntheticTask::StructureTask,
    };
    let corpus = generate_synthetic_corpus(n_trees, seed, task);
    save_dataset(&corpus.trees, out)?;
    let nodes: usize = corpus.trees.iter().map(|t| t.len()).sum();
    let positive: usize = corpus.trees.iter().map(|t| t.positive_count()).sum();
    println!(
        "{} trees, {nodes} nodes, {positive} positive",
        corpus.trees.len()
    );
    let mut m = RunManifest::new(
        "generate",
        Some(seed),
        serde_json::json!({ "task": task.name(), "trees": n_trees }),
    );
    m.output(out);
    m.write(&beside(out))?;
    Ok(())
}
