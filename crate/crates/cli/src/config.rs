//! Flat key-value config files. Unknown keys are rejected so typos surface
//! immediately; command-line flags override file values.
//!
//! Keys and defaults (desk-scale):
//!   flow.alpha          0.2     Horn-Schunck smoothness weight
//!   flow.iters          60      Gauss-Seidel sweeps per pyramid level
//!   flow.max_levels     5       pyramid depth cap
//!   backbone.input_size 32      square model input edge (multiple of 8)
//!   backbone.channels   6,12,24 conv block widths
//!   backbone.feature_dim 64     CNN feature size
//!   model.hidden_dim    64      LSTM hidden size
//!   train.batch         8
//!   train.lr            0.05
//!   train.decay_factor  0.95
//!   train.decay_every   250     iterations between decays (0 = none)
//!   train.epochs        12
//!   train.clip_norm     5.0     global gradient-norm cap (0 = off)

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Context};
use gcmp_core::flow::FlowConfig;
use gcmp_core::models::train::TrainHyper;
use gcmp_core::models::BackboneConfig;
use gcmp_core::pipeline::PipelineConfig;
use gcmp_core::tensor::sgd::LrSchedule;

const KNOWN_KEYS: &[&str] = &[
    "flow.alpha",
    "flow.iters",
    "flow.max_levels",
    "backbone.input_size",
    "backbone.channels",
    "backbone.feature_dim",
    "model.hidden_dim",
    "train.batch",
    "train.lr",
    "train.decay_factor",
    "train.decay_every",
    "train.epochs",
    "train.clip_norm",
];

#[derive(Debug, Clone, Default)]
pub struct FileConfig {
    map: BTreeMap<String, String>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        let Some(path) = path else {
            return Ok(FileConfig::default());
        };
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let mut map = BTreeMap::new();
        for (ln, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once(char::is_whitespace) else {
                bail!("{}:{}: expected `key value`", path.display(), ln + 1);
            };
            if !KNOWN_KEYS.contains(&key) {
                bail!("{}:{}: unknown config key {key:?}", path.display(), ln + 1);
            }
            map.insert(key.to_string(), value.trim().to_string());
        }
        Ok(FileConfig { map })
    }

    fn get<T: std::str::FromStr>(&self, key: &str, default: T) -> anyhow::Result<T> {
        match self.map.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| anyhow::anyhow!("config key {key}: cannot parse {v:?}")),
        }
    }

    pub fn pipeline(&self) -> anyhow::Result<PipelineConfig> {
        let desk = PipelineConfig::desk_scale();
        let channels = match self.map.get("backbone.channels") {
            None => desk.backbone.channels,
            Some(v) => {
                let parts: Vec<usize> = v
                    .split(',')
                    .map(|p| p.trim().parse())
                    .collect::<Result<_, _>>()
                    .map_err(|_| anyhow::anyhow!("backbone.channels: cannot parse {v:?}"))?;
                if parts.len() != 3 {
                    bail!("backbone.channels wants 3 widths, got {}", parts.len());
                }
                [parts[0], parts[1], parts[2]]
            }
        };
        Ok(PipelineConfig {
            backbone: BackboneConfig {
                input_size: self.get("backbone.input_size", desk.backbone.input_size)?,
                channels,
                feature_dim: self.get("backbone.feature_dim", desk.backbone.feature_dim)?,
            },
            hidden_dim: self.get("model.hidden_dim", desk.hidden_dim)?,
            flow: FlowConfig {
                alpha: self.get("flow.alpha", desk.flow.alpha)?,
                iters_per_level: self.get("flow.iters", desk.flow.iters_per_level)?,
                max_levels: self.get("flow.max_levels", desk.flow.max_levels)?,
                ..desk.flow
            },
        })
    }

    pub fn hyper(&self, seed: u64) -> anyhow::Result<TrainHyper> {
        let desk = TrainHyper::desk_scale(seed, 12);
        let clip: f64 = self.get("train.clip_norm", desk.clip_norm.unwrap_or(0.0))?;
        Ok(TrainHyper {
            batch: self.get("train.batch", desk.batch)?,
            schedule: LrSchedule {
                base_lr: self.get("train.lr", desk.schedule.base_lr)?,
                decay_factor: self.get("train.decay_factor", desk.schedule.decay_factor)?,
                decay_every: self.get("train.decay_every", desk.schedule.decay_every)?,
            },
            epochs: self.get("train.epochs", desk.epochs)?,
            seed,
            clip_norm: if clip > 0.0 { Some(clip) } else { None },
        })
    }

    /// Effective key-value view for the run manifest.
    pub fn snapshot(&self, seed: u64) -> anyhow::Result<Vec<(String, String)>> {
        let p = self.pipeline()?;
        let h = self.hyper(seed)?;
        Ok(vec![
            ("flow.alpha".into(), p.flow.alpha.to_string()),
            ("flow.iters".into(), p.flow.iters_per_level.to_string()),
            ("flow.max_levels".into(), p.flow.max_levels.to_string()),
            ("backbone.input_size".into(), p.backbone.input_size.to_string()),
            (
                "backbone.channels".into(),
                format!("{},{},{}", p.backbone.channels[0], p.backbone.channels[1], p.backbone.channels[2]),
            ),
            ("backbone.feature_dim".into(), p.backbone.feature_dim.to_string()),
            ("model.hidden_dim".into(), p.hidden_dim.to_string()),
            ("train.batch".into(), h.batch.to_string()),
            ("train.lr".into(), h.schedule.base_lr.to_string()),
            ("train.decay_factor".into(), h.schedule.decay_factor.to_string()),
            ("train.decay_every".into(), h.schedule.decay_every.to_string()),
            ("train.epochs".into(), h.epochs.to_string()),
            ("train.clip_norm".into(), h.clip_norm.unwrap_or(0.0).to_string()),
        ])
    }
}
