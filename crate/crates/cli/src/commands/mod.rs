pub mod ablate;
pub mod bench;
pub mod eval;
pub mod flow;
pub mod gen;
pub mod predict;
pub mod train;

use std::path::Path;

use anyhow::{bail, Context};
use gcmp_core::dataset::Split;
use gcmp_core::pipeline::{load_frame_model, load_sequence_model, EventItem, PipelineModels};

/// Which events a command operates on.
pub fn filter_split<'a>(events: &'a [EventItem], split: &str) -> anyhow::Result<Vec<&'a EventItem>> {
    Ok(match split {
        "all" => events.iter().collect(),
        "train" => events.iter().filter(|e| e.split == Split::Train).collect(),
        "test" => events.iter().filter(|e| e.split == Split::Test).collect(),
        other => bail!("unknown split {other:?} (want test, train or all)"),
    })
}

/// Loads and sanity-checks the three stage checkpoints.
pub fn load_models(occ: &Path, pre: &Path, post: &Path) -> anyhow::Result<PipelineModels> {
    let occ5 = load_sequence_model(occ).with_context(|| format!("loading {}", occ.display()))?;
    if occ5.class_count() != 5 {
        bail!("{} is a {}-class model; the occ stage wants 5", occ.display(), occ5.class_count());
    }
    let pre2 = load_sequence_model(pre).with_context(|| format!("loading {}", pre.display()))?;
    if pre2.class_count() != 2 {
        bail!("{} is a {}-class model; the pre stage wants 2", pre.display(), pre2.class_count());
    }
    let postsf = load_frame_model(post).with_context(|| format!("loading {}", post.display()))?;
    Ok(PipelineModels { occ5, pre2, postsf })
}
