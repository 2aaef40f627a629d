use std::path::Path;

use treenc::evaluation::{split_by_interest, DEFAULT_RATIOS};

use crate::common::read_dataset;
use crate::error::CliError;
use crate::manifest::{beside, RunManifest};

pub fn run(input: &Path, seed: u64, replicates: usize, out: &Path) -> Result<(), CliError> {
    if replicates == 0 {
        return Err(CliError::usage("--replicates must be at least 1"));
    }
    let trees = read_dataset(input)?;
    let spec =
        split_by_interest(&trees, seed, DEFAULT_RATIOS, replicates).map_err(CliError::usage)?;
    std::fs::write(out, serde_json::to_string_pretty(&spec)? + "\n")?;
    for (i, r) in spec.replicates.iter().enumerate() {
        println!(
            "replicate {}: {} / {} / {} interests",
            i + 1,
            r.train.len(),
            r.val.len(),
            r.test.len()
        );
    }
    let mut m = RunManifest::new(
        "split",
        Some(seed),
        serde_json::json!({ "ratios": DEFAULT_RATIOS, "replicates": replicates }),
    );
    m.input(input)?;
    m.output(out);
    m.write(&beside(out))?;
    Ok(())
}
