//! End-to-end plumbing: turning manifested clips into stage training
//! samples, running the full two-stream prediction with timing, and
//! loading/saving model checkpoints.
//!
//! Flow images for an event are always computed over the whole extended
//! clip (so the per-clip normalization is shared), then sliced per stage.
//! A stage's flow images are the ones between its own frames; the two
//! boundary-straddling images are dropped.

use std::cell::Cell;
use std::path::Path;
use std::sync::Arc;
use std::time::{Duration, Instant};

use crate::dataset::{
    extend_event, materialize, window_starts, BaseEvent, ClipManifest, EventLabel,
    Outcome, Split, VideoClip, POST_LEN, PRE_LEN,
};
use crate::error::{Error, Result};
use crate::eval::PhaseTimes;
use crate::flow::{FlowConfig, GcmpImage};
use crate::models::train::{FrameSample, SeqSample, TrainHyper};
use crate::models::{
    frame_to_input, gcmp_to_input, BackboneConfig, CnnBackbone, FrameClassifier,
    SequenceClassifier, SequencePrediction,
};
use crate::ontology::{self, occ5_index, pre2_index, PredictionRecord};
use crate::rng::{substream, Stream};
use crate::tensor::checkpoint::{load_checkpoint, save_checkpoint};
use crate::tensor::lstm::LstmParams;
use crate::tensor::ops::LinearHead;
use crate::tensor::Tensor;

/// One labeled event with its extended (pre+occ+post) clip.
#[derive(Debug, Clone)]
pub struct EventItem {
    pub id: String,
    pub label: EventLabel,
    pub split: Split,
    pub clip: VideoClip,
}

/// Resolves manifest records against their source clips: extend, clamp, and
/// materialize each event.
pub fn build_events(sources: &[VideoClip], manifest: &ClipManifest) -> Result<Vec<EventItem>> {
    let by_id: std::collections::HashMap<&str, &VideoClip> =
        sources.iter().map(|c| (c.id.as_str(), c)).collect();
    manifest
        .records
        .iter()
        .map(|rec| {
            let source = by_id
                .get(rec.id.as_str())
                .ok_or_else(|| Error::Input(format!("manifest references unknown clip {}", rec.id)))?;
            let ext = extend_event(rec, source.len())?;
            Ok(EventItem {
                id: rec.id.clone(),
                label: rec.label,
                split: rec.split,
                clip: materialize(&ext, source)?,
            })
        })
        .collect()
}

/// Loads a dataset directory (clips/ + manifest.txt) into extended events.
pub fn load_events(root: &Path) -> Result<Vec<EventItem>> {
    let manifest = crate::dataset::io::load_manifest(&crate::dataset::io::manifest_path(root))?;
    let sources: Vec<VideoClip> = manifest
        .records
        .iter()
        .map(|r| crate::dataset::io::load_clip(&crate::dataset::io::clip_dir(root, &r.id)))
        .collect::<Result<_>>()?;
    build_events(&sources, &manifest)
}

pub fn split_of<'a>(events: &'a [EventItem], split: Split) -> Vec<&'a EventItem> {
    events.iter().filter(|e| e.split == split).collect()
}

/// Temporal stages of an extended clip.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Segment {
    Pre,
    Occ,
    Post,
}

impl Segment {
    /// Frame range of this segment within an n-frame extended clip.
    pub fn frame_range(self, n: usize) -> std::ops::Range<usize> {
        match self {
            Segment::Pre => 0..PRE_LEN,
            Segment::Occ => PRE_LEN..n - POST_LEN,
            Segment::Post => n - POST_LEN..n,
        }
    }

    /// Flow-image range: images strictly between this segment's frames.
    pub fn flow_range(self, n: usize) -> std::ops::Range<usize> {
        let r = self.frame_range(n);
        r.start..r.end - 1
    }
}

/// What a sequence model consumes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputKind {
    /// Colorized optical flow of the segment.
    Gcmp,
    /// The segment's raw frames.
    Raw,
}

/// Label spaces of the sequence classifiers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelSpace {
    /// Stage 1: five classes, layup and other-two-point merged.
    Occ5,
    /// Stage 2: layup vs other-two-point.
    Pre2,
    /// Flat six base classes (ablation baseline).
    Base6,
}

impl LabelSpace {
    pub fn class_count(self) -> usize {
        match self {
            LabelSpace::Occ5 => 5,
            LabelSpace::Pre2 => 2,
            LabelSpace::Base6 => 6,
        }
    }

    pub fn names(self) -> Vec<String> {
        match self {
            LabelSpace::Occ5 => ontology::OCC5_NAMES.iter().map(|s| s.to_string()).collect(),
            LabelSpace::Pre2 => vec!["layup".into(), "other-two-point".into()],
            LabelSpace::Base6 => BaseEvent::ALL.iter().map(|b| b.name().to_string()).collect(),
        }
    }

    /// Class index of an event label, or None when the event does not
    /// participate in this space.
    pub fn label_of(self, label: EventLabel) -> Option<usize> {
        match self {
            LabelSpace::Occ5 => Some(occ5_index(label.base())),
            LabelSpace::Pre2 => pre2_index(label.base()),
            LabelSpace::Base6 => Some(label.base().index()),
        }
    }
}

/// A sequence training task: which segment, what input, which labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeqTask {
    pub segment: Segment,
    pub input: InputKind,
    pub labels: LabelSpace,
}

impl SeqTask {
    pub const OCC5: SeqTask = SeqTask {
        segment: Segment::Occ,
        input: InputKind::Gcmp,
        labels: LabelSpace::Occ5,
    };
    pub const PRE2: SeqTask = SeqTask {
        segment: Segment::Pre,
        input: InputKind::Gcmp,
        labels: LabelSpace::Pre2,
    };
}

/// Colorized flow of every event, aligned by index. Extract once and share
/// across the stage builders; flow dominates preprocessing cost.
pub fn extract_gcmp(events: &[&EventItem], flow: &FlowConfig) -> Result<Vec<Arc<Vec<GcmpImage>>>> {
    use rayon::prelude::*;
    events
        .par_iter()
        .map(|e| Ok(Arc::new(crate::flow::flow_sequence(&e.clip, flow)?)))
        .collect()
}

/// Preprocessed inputs of one event for a sequence task: every frame (or
/// flow image) of the segment, resized and normalized.
fn seq_inputs(
    event: &EventItem,
    gcmp: Option<&Arc<Vec<GcmpImage>>>,
    task: SeqTask,
    input_size: usize,
    flow: &FlowConfig,
) -> Result<Vec<Tensor<f32>>> {
    let n = event.clip.len();
    match task.input {
        InputKind::Gcmp => {
            let computed;
            let images: &[GcmpImage] = match gcmp {
                Some(cache) => cache,
                None => {
                    computed = crate::flow::flow_sequence(&event.clip, flow)?;
                    &computed
                }
            };
            images[task.segment.flow_range(n)]
                .iter()
                .map(|img| gcmp_to_input(img, input_size))
                .collect()
        }
        InputKind::Raw => {
            let range = task.segment.frame_range(n);
            event.clip.frames()[range]
                .iter()
                .map(|f| frame_to_input(f, input_size))
                .collect()
        }
    }
}

/// Windowed training samples for a sequence task over a set of events.
/// `gcmp`, when given, must align with `events` index-for-index.
pub fn build_seq_samples(
    events: &[&EventItem],
    gcmp: Option<&[Arc<Vec<GcmpImage>>]>,
    task: SeqTask,
    input_size: usize,
    flow: &FlowConfig,
) -> Result<Vec<SeqSample>> {
    use rayon::prelude::*;
    if let Some(cache) = gcmp {
        if cache.len() != events.len() {
            return Err(Error::Shape(format!(
                "gcmp cache covers {} events, set has {}",
                cache.len(),
                events.len()
            )));
        }
    }
    let selected: Vec<(usize, &EventItem, usize)> = events
        .iter()
        .enumerate()
        .filter_map(|(i, e)| task.labels.label_of(e.label).map(|l| (i, *e, l)))
        .collect();
    let per_event: Vec<Vec<SeqSample>> = selected
        .par_iter()
        .map(|(i, event, label)| {
            let cache = gcmp.map(|c| &c[*i]);
            let inputs = Arc::new(seq_inputs(event, cache, task, input_size, flow)?);
            window_starts(inputs.len())?
                .into_iter()
                .map(|start| {
                    Ok(SeqSample {
                        frames: Arc::clone(&inputs),
                        start,
                        len: crate::dataset::WINDOW,
                        label: *label,
                    })
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok(per_event.into_iter().flatten().collect())
}

/// Per-frame success/failure samples over post segments of non-steal events.
pub fn build_sf_samples(events: &[&EventItem], input_size: usize) -> Result<Vec<FrameSample>> {
    let mut out = Vec::new();
    for event in events {
        let label = match event.label.outcome() {
            Outcome::Success => 0,
            Outcome::Failure => 1,
            Outcome::NotApplicable => continue,
        };
        let n = event.clip.len();
        for frame in &event.clip.frames()[Segment::Post.frame_range(n)] {
            out.push(FrameSample {
                input: Arc::new(frame_to_input(frame, input_size)?),
                label,
            });
        }
    }
    Ok(out)
}

/// Model geometry for a pipeline run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineConfig {
    pub backbone: BackboneConfig,
    pub hidden_dim: usize,
    pub flow: FlowConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            backbone: BackboneConfig::default(),
            hidden_dim: 256,
            flow: FlowConfig::default(),
        }
    }
}

impl PipelineConfig {
    /// Smaller widths that train from scratch in minutes on a CPU while
    /// keeping the architecture intact.
    pub fn desk_scale() -> Self {
        PipelineConfig {
            backbone: BackboneConfig {
                input_size: 32,
                channels: [6, 12, 24],
                feature_dim: 64,
            },
            hidden_dim: 64,
            flow: FlowConfig::default(),
        }
    }
}

/// The three trained models of the full pipeline.
pub struct PipelineModels {
    pub occ5: SequenceClassifier<f32>,
    pub pre2: SequenceClassifier<f32>,
    pub postsf: FrameClassifier<f32>,
}

/// Trains one stage over the training split of `events`. `gcmp`, when
/// given, is the shared per-event flow cache.
pub fn train_stage(
    events: &[&EventItem],
    gcmp: Option<&[Arc<Vec<GcmpImage>>]>,
    stage: StageKind,
    cfg: &PipelineConfig,
    hyper: &TrainHyper,
) -> Result<(TrainedModel, Vec<f64>)> {
    let mut init_rng = substream(hyper.seed, Stream::Init);
    match stage {
        StageKind::Occ5 | StageKind::Pre2 | StageKind::Flat6 | StageKind::Occ5Raw | StageKind::Flat6Raw => {
            let task = stage.seq_task().expect("sequence stage");
            let mut model = SequenceClassifier::<f32>::new(
                cfg.backbone,
                cfg.hidden_dim,
                task.labels.class_count(),
                &mut init_rng,
            )?;
            let samples = build_seq_samples(events, gcmp, task, cfg.backbone.input_size, &cfg.flow)?;
            let curve = crate::models::train::train_sequence(&mut model, &samples, hyper)?;
            Ok((TrainedModel::Seq(model), curve))
        }
        StageKind::PostSf => {
            let mut model = FrameClassifier::<f32>::new(cfg.backbone, &mut init_rng)?;
            let samples = build_sf_samples(events, cfg.backbone.input_size)?;
            let curve = crate::models::train::train_frames(&mut model, &samples, hyper)?;
            Ok((TrainedModel::Frame(model), curve))
        }
    }
}

/// Trainable stages: the three pipeline stages plus the ablation baselines.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StageKind {
    Occ5,
    Pre2,
    PostSf,
    /// Flat 6-class over occ GCMP (ontology ablation baseline).
    Flat6,
    /// 5-class over raw occ frames (GCMP ablation baseline).
    Occ5Raw,
    /// Flat 6-class over raw occ frames.
    Flat6Raw,
}

impl StageKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "occ5" => Ok(StageKind::Occ5),
            "pre2" => Ok(StageKind::Pre2),
            "postsf" => Ok(StageKind::PostSf),
            "flat6" => Ok(StageKind::Flat6),
            "occ5raw" => Ok(StageKind::Occ5Raw),
            "flat6raw" => Ok(StageKind::Flat6Raw),
            other => Err(Error::Config(format!("unknown stage {other:?}"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            StageKind::Occ5 => "occ5",
            StageKind::Pre2 => "pre2",
            StageKind::PostSf => "postsf",
            StageKind::Flat6 => "flat6",
            StageKind::Occ5Raw => "occ5raw",
            StageKind::Flat6Raw => "flat6raw",
        }
    }

    pub fn seq_task(self) -> Option<SeqTask> {
        match self {
            StageKind::Occ5 => Some(SeqTask::OCC5),
            StageKind::Pre2 => Some(SeqTask::PRE2),
            StageKind::Flat6 => Some(SeqTask {
                segment: Segment::Occ,
                input: InputKind::Gcmp,
                labels: LabelSpace::Base6,
            }),
            StageKind::Occ5Raw => Some(SeqTask {
                segment: Segment::Occ,
                input: InputKind::Raw,
                labels: LabelSpace::Occ5,
            }),
            StageKind::Flat6Raw => Some(SeqTask {
                segment: Segment::Occ,
                input: InputKind::Raw,
                labels: LabelSpace::Base6,
            }),
            StageKind::PostSf => None,
        }
    }

    pub fn label_space_names(self) -> Vec<String> {
        match self.seq_task() {
            Some(t) => t.labels.names(),
            None => vec!["success".into(), "failure".into()],
        }
    }
}

pub enum TrainedModel {
    Seq(SequenceClassifier<f32>),
    Frame(FrameClassifier<f32>),
}

/// Prediction vector of a sequence model over a full segment: the stated
/// windowing rule is applied and per-frame probabilities of all windows are
/// averaged (windows share one length, so this equals the mean of window
/// means).
pub fn predict_windowed(model: &SequenceClassifier<f32>, inputs: &[Tensor<f32>]) -> Result<SequencePrediction> {
    let starts = window_starts(inputs.len())?;
    let mut rows = Vec::new();
    for s in starts {
        let pred = model.forward(&inputs[s..s + crate::dataset::WINDOW])?;
        rows.extend(pred.per_frame);
    }
    SequencePrediction::from_frames(rows)
}

/// Runs the full two-stream prediction for one event.
pub fn predict_one(
    event: &EventItem,
    models: &PipelineModels,
    flow: &FlowConfig,
) -> Result<(PredictionRecord, PhaseTimes)> {
    let n = event.clip.len();
    let started = Instant::now();
    let flow_t0 = Instant::now();
    let images = crate::flow::flow_sequence(&event.clip, flow)?;
    let flow_time = flow_t0.elapsed();

    let size = models.occ5.input_size();
    let occ_time = Cell::new(Duration::ZERO);
    let pre_time = Cell::new(Duration::ZERO);
    let post_time = Cell::new(Duration::ZERO);

    let (vf, conf) = ontology::predict_event(
        || {
            let t0 = Instant::now();
            let inputs: Vec<Tensor<f32>> = images[Segment::Occ.flow_range(n)]
                .iter()
                .map(|img| gcmp_to_input(img, size))
                .collect::<Result<_>>()?;
            let out = predict_windowed(&models.occ5, &inputs);
            occ_time.set(t0.elapsed());
            out
        },
        || {
            let t0 = Instant::now();
            let inputs: Vec<Tensor<f32>> = images[Segment::Pre.flow_range(n)]
                .iter()
                .map(|img| gcmp_to_input(img, models.pre2.input_size()))
                .collect::<Result<_>>()?;
            let out = predict_windowed(&models.pre2, &inputs);
            pre_time.set(t0.elapsed());
            out
        },
        || {
            let t0 = Instant::now();
            let out = event.clip.frames()[Segment::Post.frame_range(n)]
                .iter()
                .map(|f| {
                    let input = frame_to_input::<f32>(f, models.postsf.input_size())?;
                    models.postsf.forward(&input)
                })
                .collect();
            post_time.set(t0.elapsed());
            out
        },
    )?;

    let record = PredictionRecord::new(event.id.clone(), &vf, &conf)?;
    let times = PhaseTimes {
        occ: occ_time.get(),
        pre: pre_time.get(),
        post: post_time.get(),
        total: started.elapsed(),
        flow: flow_time,
        clips: 1,
    };
    Ok((record, times))
}

/// Predicts every event, preserving order; accumulates phase timings.
pub fn predict_all(
    events: &[&EventItem],
    models: &PipelineModels,
    flow: &FlowConfig,
) -> Result<(Vec<PredictionRecord>, PhaseTimes)> {
    let mut records = Vec::with_capacity(events.len());
    let mut times = PhaseTimes::default();
    for event in events {
        let (rec, t) = predict_one(event, models, flow)?;
        records.push(rec);
        times.add(&t);
    }
    Ok((records, times))
}

// ---- deep-feature extraction for the correlation study ----

/// The four feature kinds: raw frames or GCMP, per-frame or per-sequence
/// (sequence features are the temporal mean of the per-frame features).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureKind {
    RgbDfVf,
    RgbDfSvf,
    GcmpDfVf,
    GcmpDfSvf,
}

impl FeatureKind {
    fn uses_gcmp(self) -> bool {
        matches!(self, FeatureKind::GcmpDfVf | FeatureKind::GcmpDfSvf)
    }

    fn per_sequence(self) -> bool {
        matches!(self, FeatureKind::RgbDfSvf | FeatureKind::GcmpDfSvf)
    }
}

/// Backbone features of each event's segment, labeled by `class_of`.
/// Per-frame kinds yield one vector per frame, sequence kinds one per event.
/// `gcmp`, when given, must align with `events` index-for-index.
pub fn extract_features(
    events: &[&EventItem],
    gcmp: Option<&[Arc<Vec<GcmpImage>>]>,
    segment: Segment,
    kind: FeatureKind,
    backbone: &CnnBackbone<f32>,
    flow: &FlowConfig,
    class_of: impl Fn(EventLabel) -> Option<usize>,
) -> Result<Vec<(Vec<f64>, usize)>> {
    let size = backbone.cfg.input_size;
    let mut out = Vec::new();
    for (ei, event) in events.iter().enumerate() {
        let Some(class) = class_of(event.label) else {
            continue;
        };
        let n = event.clip.len();
        let inputs: Vec<Tensor<f32>> = if kind.uses_gcmp() {
            let computed;
            let images: &[GcmpImage] = match gcmp {
                Some(cache) => &cache[ei],
                None => {
                    computed = crate::flow::flow_sequence(&event.clip, flow)?;
                    &computed
                }
            };
            images[segment.flow_range(n)]
                .iter()
                .map(|img| gcmp_to_input(img, size))
                .collect::<Result<_>>()?
        } else {
            event.clip.frames()[segment.frame_range(n)]
                .iter()
                .map(|f| frame_to_input(f, size))
                .collect::<Result<_>>()?
        };
        let feats: Vec<Vec<f64>> = inputs
            .iter()
            .map(|x| Ok(backbone.forward(x)?.data().iter().map(|&v| v as f64).collect()))
            .collect::<Result<_>>()?;
        if kind.per_sequence() {
            let dim = feats[0].len();
            let mut mean = vec![0.0f64; dim];
            for f in &feats {
                for (m, v) in mean.iter_mut().zip(f) {
                    *m += v;
                }
            }
            for m in &mut mean {
                *m /= feats.len() as f64;
            }
            out.push((mean, class));
        } else {
            out.extend(feats.into_iter().map(|f| (f, class)));
        }
    }
    Ok(out)
}

// ---- checkpoints ----

/// Saves a sequence model; parameter shapes make the file self-describing.
pub fn save_sequence_model(path: &Path, model: &SequenceClassifier<f32>) -> Result<()> {
    let named: Vec<(String, &Tensor<f32>)> = model.named();
    save_checkpoint(path, &named)
}

pub fn save_frame_model(path: &Path, model: &FrameClassifier<f32>) -> Result<()> {
    let named: Vec<(String, &Tensor<f32>)> = model.named();
    save_checkpoint(path, &named)
}

fn take_param(
    params: &mut std::collections::HashMap<String, Tensor<f32>>,
    name: &str,
) -> Result<Tensor<f32>> {
    params.remove(name).ok_or_else(|| Error::Format {
        kind: "checkpoint",
        detail: format!("missing parameter {name}"),
    })
}

fn backbone_from_params(
    params: &mut std::collections::HashMap<String, Tensor<f32>>,
) -> Result<CnnBackbone<f32>> {
    let conv1_w = take_param(params, "backbone.conv1.w")?;
    let conv2_w = take_param(params, "backbone.conv2.w")?;
    let conv3_w = take_param(params, "backbone.conv3.w")?;
    let fc_w = take_param(params, "backbone.fc.w")?;
    let channels = [conv1_w.shape()[0], conv2_w.shape()[0], conv3_w.shape()[0]];
    let flat = fc_w.shape()[0];
    let feature_dim = fc_w.shape()[1];
    if flat % channels[2] != 0 {
        return Err(Error::Format {
            kind: "checkpoint",
            detail: "fc rows not divisible by conv3 channels".into(),
        });
    }
    let cells = flat / channels[2];
    let side = (cells as f64).sqrt().round() as usize;
    if side * side != cells {
        return Err(Error::Format {
            kind: "checkpoint",
            detail: "fc rows do not form a square spatial map".into(),
        });
    }
    let cfg = BackboneConfig {
        input_size: side * 8,
        channels,
        feature_dim,
    };
    cfg.validate()?;
    Ok(CnnBackbone {
        cfg,
        conv1_b: take_param(params, "backbone.conv1.b")?,
        conv2_b: take_param(params, "backbone.conv2.b")?,
        conv3_b: take_param(params, "backbone.conv3.b")?,
        fc_b: take_param(params, "backbone.fc.b")?,
        conv1_w,
        conv2_w,
        conv3_w,
        fc_w,
    })
}

pub fn load_sequence_model(path: &Path) -> Result<SequenceClassifier<f32>> {
    let mut params: std::collections::HashMap<String, Tensor<f32>> =
        load_checkpoint(path)?.into_iter().collect();
    let backbone = backbone_from_params(&mut params)?;
    let w_i = take_param(&mut params, "lstm.w_i")?;
    let hidden_dim = w_i.shape()[0];
    let input_dim = w_i.shape()[1];
    if input_dim != backbone.cfg.feature_dim {
        return Err(Error::Format {
            kind: "checkpoint",
            detail: "lstm input does not match backbone feature size".into(),
        });
    }
    let lstm = LstmParams {
        input_dim,
        hidden_dim,
        w_i,
        u_i: take_param(&mut params, "lstm.u_i")?,
        b_i: take_param(&mut params, "lstm.b_i")?,
        w_f: take_param(&mut params, "lstm.w_f")?,
        u_f: take_param(&mut params, "lstm.u_f")?,
        b_f: take_param(&mut params, "lstm.b_f")?,
        w_o: take_param(&mut params, "lstm.w_o")?,
        u_o: take_param(&mut params, "lstm.u_o")?,
        b_o: take_param(&mut params, "lstm.b_o")?,
        w_g: take_param(&mut params, "lstm.w_g")?,
        u_g: take_param(&mut params, "lstm.u_g")?,
        b_g: take_param(&mut params, "lstm.b_g")?,
    };
    let head = LinearHead {
        w: take_param(&mut params, "head.w")?,
        b: take_param(&mut params, "head.b")?,
    };
    if !params.is_empty() {
        return Err(Error::Format {
            kind: "checkpoint",
            detail: format!("unexpected parameters: {:?}", params.keys().collect::<Vec<_>>()),
        });
    }
    Ok(SequenceClassifier { backbone, lstm, head })
}

pub fn load_frame_model(path: &Path) -> Result<FrameClassifier<f32>> {
    let mut params: std::collections::HashMap<String, Tensor<f32>> =
        load_checkpoint(path)?.into_iter().collect();
    let backbone = backbone_from_params(&mut params)?;
    let head = LinearHead {
        w: take_param(&mut params, "head.w")?,
        b: take_param(&mut params, "head.b")?,
    };
    if !params.is_empty() {
        return Err(Error::Format {
            kind: "checkpoint",
            detail: format!("unexpected parameters: {:?}", params.keys().collect::<Vec<_>>()),
        });
    }
    Ok(FrameClassifier { backbone, head })
}

/// 11-class confidence vector for ranking, assembled from a prediction
/// record: base confidences from the stage-1 vector (the merged entry split
/// by stage 2 when present, evenly otherwise), outcome confidences from the
/// vote fractions (0.5/0.5 when voting never ran).
pub fn confidence_vector(rec: &PredictionRecord) -> Result<Vec<f64>> {
    if rec.g5.len() != 5 {
        return Err(Error::Shape("stage-1 vector must have 5 entries".into()));
    }
    let g5: Vec<f64> = rec.g5.iter().map(|&v| v as f64).collect();
    let (w_layup, w_other) = match &rec.g2 {
        Some(g2) => (g2[0] as f64, g2[1] as f64),
        None => (0.5, 0.5),
    };
    let base_conf = |b: BaseEvent| -> f64 {
        match b {
            BaseEvent::Layup => g5[ontology::OCC5_MERGED] * w_layup,
            BaseEvent::OtherTwoPoint => g5[ontology::OCC5_MERGED] * w_other,
            other => g5[occ5_index(other)],
        }
    };
    let (p_succ, p_fail) = match rec.votes {
        Some((s, f)) if s + f > 0 => {
            let n = (s + f) as f64;
            (s as f64 / n, f as f64 / n)
        }
        _ => (0.5, 0.5),
    };
    let mut conf = vec![0.0f64; 11];
    for label in EventLabel::all() {
        let idx = label.class_index();
        conf[idx] = match label.outcome() {
            Outcome::Success => base_conf(label.base()) * p_succ,
            Outcome::Failure => base_conf(label.base()) * p_fail,
            Outcome::NotApplicable => g5[4],
        };
    }
    Ok(conf)
}
