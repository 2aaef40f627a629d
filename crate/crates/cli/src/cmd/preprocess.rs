use std::collections::BTreeMap;
use std::path::Path;

use anyhow::Context;
use treenc::dom::{parse_html, save_dataset, simplify_tree, split_tree, DomTree};

use crate::error::CliError;
use crate::manifest::{beside, RunManifest};

fn process(
    path: &Path,
    interest: &str,
    max_nodes: usize,
    min_nodes: usize,
) -> anyhow::Result<Vec<DomTree>> {
    let bytes = std::fs::read(path)?;
    let html = String::from_utf8_lossy(&bytes);
    let mut tree = parse_html(&html, interest)?;
    tree.source_url = path.file_name().map(|n| n.to_string_lossy().into_owned());
    let simple = simplify_tree(&tree)?;
    Ok(split_tree(&simple, max_nodes, min_nodes)?)
}

pub fn run(
    input: &Path,
    interest_map: &Path,
    out: &Path,
    max_nodes: usize,
    min_nodes: usize,
) -> Result<(), CliError> {
    if max_nodes < min_nodes || min_nodes == 0 {
        return Err(CliError::usage("need max-nodes >= min-nodes >= 1"));
    }
    let map: BTreeMap<String, String> = serde_json::from_str(
        &std::fs::read_to_string(interest_map)
            .with_context(|| format!("reading {}", interest_map.display()))?,
    )
    .with_context(|| {
        format!(
            "{} must map file names to interests",
            interest_map.display()
        )
    })?;
    let mut files: Vec<_> = std::fs::read_dir(input)
        .with_context(|| format!("listing {}", input.display()))?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<_, _>>()?;
    files.retain(|p| p.is_file());
    files.sort();

    let mut trees = Vec::new();
    for path in &files {
        let name = path
            .file_name()
            .unwrap_or_default()
            .to_string_lossy()
            .into_owned();
        let Some(interest) = map.get(&name) else {
            log::warn!("skipping {name}: not in the interest map");
            continue;
        };
        match process(path, interest, max_nodes, min_nodes) {
            Ok(parts) => {
                for t in &parts {
                    println!("{name}\t{}\t{}", t.interest, t.len());
                }
                trees.extend(parts);
            }
            Err(e) => log::warn!("skipping {name}: {e:#}"),
        }
    }
    if trees.is_empty() {
        return Err(CliError::usage("no page produced a tree"));
    }
    save_dataset(&trees, out).with_context(|| format!("writing {}", out.display()))?;
    log::info!("wrote {} trees to {}", trees.len(), out.display());

    let mut m = RunManifest::new(
        "preprocess",
        None,
        serde_json::json!({ "max_nodes": max_nodes, "min_nodes": min_nodes }),
    );
    m.input(interest_map)?;
    m.input(input)?;
    m.output(out);
    m.write(&beside(out))?;
    Ok(())
}
