use std::io::Write;
use std::path::Path;

use anyhow::Context;
use gcmp_core::dataset::io::manifest_path;
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

    let (records, _times) = predict_all(&selected, &models, &flow_cfg)?;

    if let Some(dir) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let f = std::fs::File::create(out)?;
    let mut w = std::io::BufWriter::new(f);
    writeln!(w, "# clip-id vf-index label stage1-G stage2-G(or -) votes(succ/fail or -)")?;
    for r in &records {
        writeln!(w, "{}", r.to_line())?;
    }
    w.flush()?;

    let dir = out.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    RunManifest::new(format!("predict --data {} --split {split}", data.display()))
        .config(fc.snapshot(0)?)
        .input_file("manifest", &manifest_path(data))?
        .input_file("ckpt-occ", ckpt_occ)?
        .input_file("ckpt-pre", ckpt_pre)?
        .input_file("ckpt-post", ckpt_post)?
        .arg("records", records.len())
        .output(out)
        .write(dir)?;
    Ok(())
}
