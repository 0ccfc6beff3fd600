use std::fs;
use std::path::Path;

use anyhow::Context;
use gcmp_core::dataset::io::{load_clip, save_gcmp_image};
use gcmp_core::dataset::VideoClip;
use gcmp_core::flow::{flow_fields_for_clip, write_flo};

use crate::config::FileConfig;
use crate::run_manifest::RunManifest;

pub fn run(input: &Path, out: &Path, dump_flo: bool, config: Option<&Path>) -> anyhow::Result<()> {
    let fc = FileConfig::load(config)?;
    let flow_cfg = fc.pipeline()?.flow;

    // a single clip directory, or a dataset root holding clips/
    let clips: Vec<VideoClip> = if input.join("clip.txt").exists() {
        vec![load_clip(input)?]
    } else if input.join("clips").is_dir() {
        let mut dirs: Vec<_> = fs::read_dir(input.join("clips"))?
            .map(|e| e.map(|e| e.path()))
            .collect::<std::io::Result<_>>()?;
        dirs.sort();
        dirs.iter()
            .filter(|p| p.is_dir())
            .map(|p| load_clip(p))
            .collect::<gcmp_core::Result<_>>()?
    } else {
        anyhow::bail!(
            "{} is neither a clip directory nor a dataset root",
            input.display()
        );
    };

    let mut manifest = RunManifest::new(format!(
        "flow --in {} --dump-flo {dump_flo}",
        input.display()
    ))
    .arg("clips", clips.len())
    .arg("flow.alpha", flow_cfg.alpha)
    .arg("flow.iters", flow_cfg.iters_per_level);

    for clip in &clips {
        let dir = out.join(&clip.id);
        fs::create_dir_all(&dir)?;
        let (fields, images) = flow_fields_for_clip(clip, &flow_cfg)
            .with_context(|| format!("flow for clip {}", clip.id))?;
        for (i, img) in images.iter().enumerate() {
            let p = save_gcmp_image(&dir, i, img)?;
            if i == 0 {
                manifest = manifest.output(&p);
            }
        }
        if dump_flo {
            for (i, field) in fields.iter().enumerate() {
                let path = dir.join(format!("flow_{i:04}.flo"));
                let f = fs::File::create(&path)?;
                write_flo(std::io::BufWriter::new(f), field)?;
            }
        }
    }
    manifest.write(out)?;
    Ok(())
}
