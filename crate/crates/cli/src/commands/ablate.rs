//! Controlled comparisons.
//!
//! `gcmp` mode trains two identically configured occ-stage five-class
//! models, one on GCMP images and one on raw frames, and reports per-class
//! test accuracy side by side, averaged over training seeds.
//!
//! `ontology` mode compares the flat six-class occ-only classifier against
//! the two-stage cascade on six-class base-event accuracy.

use std::path::Path;
use std::sync::Arc;

use anyhow::Context;
use gcmp_core::dataset::io::manifest_path;
use gcmp_core::dataset::{BaseEvent, Split};
use gcmp_core::flow::GcmpImage;
use gcmp_core::models::SequenceClassifier;
use gcmp_core::ontology::cascade;
use gcmp_core::pipeline::{
    extract_gcmp, load_events, predict_windowed, train_stage, EventItem,
    InputKind, LabelSpace, PipelineConfig, Segment, StageKind, TrainedModel,
};
use gcmp_core::tensor::Tensor;

use crate::config::FileConfig;
use crate::run_manifest::RunManifest;

fn seq_model(m: TrainedModel) -> SequenceClassifier<f32> {
    match m {
        TrainedModel::Seq(m) => m,
        TrainedModel::Frame(_) => unreachable!("sequence stage"),
    }
}

/// Segment inputs of every event, preprocessed once.
fn segment_inputs(
    events: &[&EventItem],
    gcmp: &[Arc<Vec<GcmpImage>>],
    segment: Segment,
    input: InputKind,
    size: usize,
) -> anyhow::Result<Vec<Vec<Tensor<f32>>>> {
    use gcmp_core::models::{frame_to_input, gcmp_to_input};
    events
        .iter()
        .zip(gcmp)
        .map(|(e, images)| {
            let n = e.clip.len();
            let v: gcmp_core::Result<Vec<Tensor<f32>>> = match input {
                InputKind::Gcmp => images[segment.flow_range(n)]
                    .iter()
                    .map(|img| gcmp_to_input(img, size))
                    .collect(),
                InputKind::Raw => e.clip.frames()[segment.frame_range(n)]
                    .iter()
                    .map(|f| frame_to_input(f, size))
                    .collect(),
            };
            Ok(v?)
        })
        .collect()
}

/// Per-class (correct, total) of a clip-level sequence classifier.
fn per_class_hits(
    model: &SequenceClassifier<f32>,
    events: &[&EventItem],
    inputs: &[Vec<Tensor<f32>>],
    labels: LabelSpace,
) -> anyhow::Result<Vec<(usize, usize)>> {
    let mut hits = vec![(0usize, 0usize); labels.class_count()];
    for (event, input) in events.iter().zip(inputs) {
        let Some(truth) = labels.label_of(event.label) else {
            continue;
        };
        let pred = predict_windowed(model, input)?;
        hits[truth].1 += 1;
        if pred.argmax() == truth {
            hits[truth].0 += 1;
        }
    }
    Ok(hits)
}

fn accumulate(into: &mut [f64], hits: &[(usize, usize)]) {
    for (acc, (c, t)) in into.iter_mut().zip(hits) {
        if *t > 0 {
            *acc += *c as f64 / *t as f64;
        }
    }
}

fn render_table(
    title: &str,
    rows: &[String],
    col_a: (&str, &[f64]),
    col_b: (&str, &[f64]),
    seeds: u64,
) -> (String, String) {
    let w = rows.iter().map(String::len).max().unwrap_or(10).max(12);
    let mut text = format!("# {title}\n");
    text.push_str(&format!("{:<w$} {:>16} {:>16}\n", "accuracy(%)", col_a.0, col_b.0));
    let mut csv = format!("class,{},{}\n", col_a.0.replace(' ', "-"), col_b.0.replace(' ', "-"));
    for (i, row) in rows.iter().enumerate() {
        text.push_str(&format!(
            "{row:<w$} {:>16.2} {:>16.2}\n",
            col_a.1[i] * 100.0,
            col_b.1[i] * 100.0
        ));
        csv.push_str(&format!("{row},{:.4},{:.4}\n", col_a.1[i], col_b.1[i]));
    }
    text.push_str(&format!("# averaged over {seeds} training seed(s)\n"));
    (text, csv)
}

#[allow(clippy::too_many_arguments)]
pub fn run(
    mode: &str,
    data: &Path,
    seeds: u64,
    seed: u64,
    out: &Path,
    hyper_path: Option<&Path>,
    epochs: Option<usize>,
) -> anyhow::Result<()> {
    if seeds == 0 {
        anyhow::bail!("need at least one seed");
    }
    let fc = FileConfig::load(hyper_path)?;
    let cfg: PipelineConfig = fc.pipeline()?;
    let events = load_events(data).with_context(|| format!("loading dataset {}", data.display()))?;
    let train: Vec<&EventItem> = events.iter().filter(|e| e.split == Split::Train).collect();
    let test: Vec<&EventItem> = events.iter().filter(|e| e.split == Split::Test).collect();
    if train.is_empty() || test.is_empty() {
        anyhow::bail!("ablation needs both train and test splits");
    }

    let train_gcmp = extract_gcmp(&train, &cfg.flow)?;
    let test_gcmp = extract_gcmp(&test, &cfg.flow)?;
    std::fs::create_dir_all(out)?;

    let hyper_of = |s: u64| -> anyhow::Result<_> {
        let mut h = fc.hyper(seed + s)?;
        if let Some(e) = epochs {
            h.epochs = e;
        }
        Ok(h)
    };

    let (file_stem, text, csv) = match mode {
        "gcmp" => {
            let size = cfg.backbone.input_size;
            let gcmp_inputs = segment_inputs(&test, &test_gcmp, Segment::Occ, InputKind::Gcmp, size)?;
            let raw_inputs = segment_inputs(&test, &test_gcmp, Segment::Occ, InputKind::Raw, size)?;
            let k = LabelSpace::Occ5.class_count();
            let mut with = vec![0.0; k + 1];
            let mut without = vec![0.0; k + 1];
            for s in 0..seeds {
                let hyper = hyper_of(s)?;
                let (m, _) = train_stage(&train, Some(&train_gcmp), StageKind::Occ5, &cfg, &hyper)?;
                let hits = per_class_hits(&seq_model(m), &test, &gcmp_inputs, LabelSpace::Occ5)?;
                accumulate(&mut with[..k], &hits);

                let (m, _) = train_stage(&train, None, StageKind::Occ5Raw, &cfg, &hyper)?;
                let hits = per_class_hits(&seq_model(m), &test, &raw_inputs, LabelSpace::Occ5)?;
                accumulate(&mut without[..k], &hits);
            }
            for v in with.iter_mut().chain(without.iter_mut()) {
                *v /= seeds as f64;
            }
            with[k] = with[..k].iter().sum::<f64>() / k as f64;
            without[k] = without[..k].iter().sum::<f64>() / k as f64;

            let mut rows: Vec<String> = LabelSpace::Occ5.names();
            rows.push("average".into());
            let (text, csv) = render_table(
                "five-class event accuracy on occ segments, with vs without GCMP input",
                &rows,
                ("without GCMP", &without),
                ("with GCMP", &with),
                seeds,
            );
            ("ablate_gcmp", text, csv)
        }
        "ontology" => {
            let size = cfg.backbone.input_size;
            let occ_inputs = segment_inputs(&test, &test_gcmp, Segment::Occ, InputKind::Gcmp, size)?;
            let pre_inputs = segment_inputs(&test, &test_gcmp, Segment::Pre, InputKind::Gcmp, size)?;
            let k = LabelSpace::Base6.class_count();
            // rows: 6 classes, layup+other-two-point mean, average
            let mut flat = vec![0.0; k + 2];
            let mut casc = vec![0.0; k + 2];
            for s in 0..seeds {
                let hyper = hyper_of(s)?;
                let (m, _) = train_stage(&train, Some(&train_gcmp), StageKind::Flat6, &cfg, &hyper)?;
                let hits = per_class_hits(&seq_model(m), &test, &occ_inputs, LabelSpace::Base6)?;
                accumulate(&mut flat[..k], &hits);

                let (occ5, _) = train_stage(&train, Some(&train_gcmp), StageKind::Occ5, &cfg, &hyper)?;
                let (pre2, _) = train_stage(&train, Some(&train_gcmp), StageKind::Pre2, &cfg, &hyper)?;
                let occ5 = seq_model(occ5);
                let pre2 = seq_model(pre2);
                let mut hits = vec![(0usize, 0usize); k];
                for ((event, occ_in), pre_in) in test.iter().zip(&occ_inputs).zip(&pre_inputs) {
                    let g5 = predict_windowed(&occ5, occ_in)?;
                    let (v6, _) = cascade(&g5, || predict_windowed(&pre2, pre_in))?;
                    let truth = event.label.base().index();
                    hits[truth].1 += 1;
                    if v6.hot_index() == Some(truth) {
                        hits[truth].0 += 1;
                    }
                }
                accumulate(&mut casc[..k], &hits);
            }
            for v in flat.iter_mut().chain(casc.iter_mut()) {
                *v /= seeds as f64;
            }
            let lo = BaseEvent::Layup.index();
            let ot = BaseEvent::OtherTwoPoint.index();
            flat[k] = (flat[lo] + flat[ot]) / 2.0;
            casc[k] = (casc[lo] + casc[ot]) / 2.0;
            flat[k + 1] = flat[..k].iter().sum::<f64>() / k as f64;
            casc[k + 1] = casc[..k].iter().sum::<f64>() / k as f64;

            let mut rows: Vec<String> = LabelSpace::Base6.names();
            rows.push("layup+other-2pt avg".into());
            rows.push("average".into());
            let (text, csv) = render_table(
                "six-class base-event accuracy: flat occ-only classifier vs two-stage cascade",
                &rows,
                ("flat 6-class", &flat),
                ("two-stage", &casc),
                seeds,
            );
            ("ablate_ontology", text, csv)
        }
        other => anyhow::bail!("unknown ablation mode {other:?} (want gcmp or ontology)"),
    };

    let text_path = out.join(format!("{file_stem}.txt"));
    let csv_path = out.join(format!("{file_stem}.csv"));
    std::fs::write(&text_path, text)?;
    std::fs::write(&csv_path, csv)?;

    RunManifest::new(format!("ablate --mode {mode} --data {} --seeds {seeds}", data.display()))
        .seed(seed)
        .config(fc.snapshot(seed)?)
        .input_file("manifest", &manifest_path(data))?
        .output(&text_path)
        .output(&csv_path)
        .write(out)?;
    Ok(())
}
