use std::path::Path;

use anyhow::Context;
use gcmp_core::dataset::io::manifest_path;
use gcmp_core::eval::TimingReport;
use gcmp_core::pipeline::{load_events, predict_all};

use crate::config::FileConfig;
use crate::run_manifest::RunManifest;

#[allow(clippy::too_many_arguments)]
pub fn run(
    data: &Path,
    ckpt_occ: &Path,
    ckpt_pre: &Path,
    ckpt_post: &Path,
    out: &Path,
    include_flow: bool,
    split: &str,
    config: Option<&Path>,
) -> anyhow::Result<()> {
    let fc = FileConfig::load(config)?;
    let flow_cfg = fc.pipeline()?.flow;
    let models = super::load_models(ckpt_occ, ckpt_pre, ckpt_post)?;
    let events = load_events(data).with_context(|| format!("loading dataset {}", data.display()))?;
    let selected = super::filter_split(&events, split)?;
    if selected.is_empty() {
        anyhow::bail!("no events in split {split:?}");
    }

    let (records, times) = predict_all(&selected, &models, &flow_cfg)?;
    let report = TimingReport::from_times(&times, !include_flow)?;

    std::fs::create_dir_all(out)?;
    let text_path = out.join("timing.txt");
    std::fs::write(&text_path, report.render_text())?;
    let csv_path = out.join("timing.csv");
    std::fs::write(&csv_path, report.to_csv())?;

    RunManifest::new(format!(
        "bench --data {} --split {split} --include-flow {include_flow}",
        data.display()
    ))
    .input_file("manifest", &manifest_path(data))?
    .input_file("ckpt-occ", ckpt_occ)?
    .input_file("ckpt-pre", ckpt_pre)?
    .input_file("ckpt-post", ckpt_post)?
    .arg("records", records.len())
    .output(&text_path)
    .output(&csv_path)
    .write(out)?;
    Ok(())
}
