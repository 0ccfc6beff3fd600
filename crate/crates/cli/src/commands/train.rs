use std::path::Path;

use anyhow::Context;
use gcmp_core::dataset::io::manifest_path;
use gcmp_core::dataset::Split;
use gcmp_core::pipeline::{
    load_events, save_frame_model, save_sequence_model, split_of, train_stage, StageKind,
    TrainedModel,
};

use crate::config::FileConfig;
use crate::run_manifest::RunManifest;

#[allow(clippy::too_many_arguments)]
pub fn run(
    stage: &str,
    data: &Path,
    hyper_path: Option<&Path>,
    seed: u64,
    out: &Path,
    epochs: Option<usize>,
    batch: Option<usize>,
    lr: Option<f64>,
) -> anyhow::Result<()> {
    let stage = StageKind::parse(stage)?;
    let fc = FileConfig::load(hyper_path)?;
    let cfg = fc.pipeline()?;
    let mut hyper = fc.hyper(seed)?;
    if let Some(e) = epochs {
        hyper.epochs = e;
    }
    if let Some(b) = batch {
        hyper.batch = b;
    }
    if let Some(lr) = lr {
        hyper.schedule.base_lr = lr;
    }

    let events = load_events(data).with_context(|| format!("loading dataset {}", data.display()))?;
    let train = split_of(&events, Split::Train);
    let (model, curve) = train_stage(&train, None, stage, &cfg, &hyper)?;

    if let Some(dir) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    match &model {
        TrainedModel::Seq(m) => save_sequence_model(out, m)?,
        TrainedModel::Frame(m) => save_frame_model(out, m)?,
    }

    // loss curve beside the checkpoint
    let curve_path = out.with_extension("loss.csv");
    let mut csv = String::from("epoch,mean_loss\n");
    for (i, l) in curve.iter().enumerate() {
        csv.push_str(&format!("{},{:.8}\n", i + 1, l));
    }
    std::fs::write(&curve_path, csv)?;

    // sidecar metadata
    let meta_path = out.with_extension("meta.txt");
    let manifest_file = manifest_path(data);
    let fingerprint = {
        use sha2::{Digest, Sha256};
        let mut h = Sha256::new();
        h.update(std::fs::read(&manifest_file)?);
        format!("sha256:{:x}", h.finalize())
    };
    let mut meta = String::new();
    meta.push_str(&format!("stage {}\n", stage.name()));
    meta.push_str(&format!("label-space {}\n", stage.label_space_names().join(",")));
    meta.push_str(&format!("seed {seed}\n"));
    meta.push_str(&format!("batch {}\n", hyper.batch));
    meta.push_str(&format!("lr {}\n", hyper.schedule.base_lr));
    meta.push_str(&format!("decay-factor {}\n", hyper.schedule.decay_factor));
    meta.push_str(&format!("decay-every {}\n", hyper.schedule.decay_every));
    meta.push_str(&format!("epochs {}\n", hyper.epochs));
    meta.push_str(&format!(
        "clip-norm {}\n",
        hyper.clip_norm.map_or("none".to_string(), |c| c.to_string())
    ));
    meta.push_str(&format!("dataset {}\n", fingerprint));
    meta.push_str(&format!("final-loss {:.8}\n", curve.last().copied().unwrap_or(f64::NAN)));
    std::fs::write(&meta_path, meta)?;

    let dir = out.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    RunManifest::new(format!("train --stage {} --data {}", stage.name(), data.display()))
        .seed(seed)
        .config(fc.snapshot(seed)?)
        .input_file("manifest", &manifest_file)?
        .output(out)
        .output(&curve_path)
        .output(&meta_path)
        .write(dir)?;
    Ok(())
}
