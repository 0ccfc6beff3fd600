use std::path::Path;

use gcmp_core::dataset::io::{manifest_path, save_dataset};
use gcmp_core::dataset::synth::{gen_synthetic, SynthConfig};

use crate::run_manifest::RunManifest;

#[allow(clippy::too_many_arguments)]
pub fn run(
    classes: usize,
    per_class: usize,
    test_per_class: usize,
    size: usize,
    frames: usize,
    seed: u64,
    out: &Path,
) -> anyhow::Result<()> {
    let cfg = SynthConfig {
        classes,
        clips_per_class: per_class,
        test_per_class,
        width: size,
        height: size,
        frames,
        fps: 30.0,
        seed,
    };
    let (clips, manifest) = gen_synthetic(&cfg)?;
    save_dataset(out, &clips, &manifest)?;

    RunManifest::new(format!(
        "gen --classes {classes} --per-class {per_class} --test-per-class {test_per_class} --size {size} --frames {frames}"
    ))
    .seed(seed)
    .arg("clips", clips.len())
    .output(&manifest_path(out))
    .write(out)?;
    Ok(())
}
