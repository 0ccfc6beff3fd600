use std::collections::HashMap;
use std::path::Path;

use anyhow::{bail, Context};
use gcmp_core::dataset::io::load_manifest;
use gcmp_core::dataset::EventLabel;
use gcmp_core::eval::{accuracy_report, mean_average_precision, ScoredClip};
use gcmp_core::ontology::PredictionRecord;
use gcmp_core::pipeline::confidence_vector;

use crate::run_manifest::RunManifest;

pub fn run(pred: &Path, truth: &Path, out: &Path, pgm: bool) -> anyhow::Result<()> {
    let text = std::fs::read_to_string(pred).with_context(|| format!("reading {}", pred.display()))?;
    let records: Vec<PredictionRecord> = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(PredictionRecord::from_line)
        .collect::<gcmp_core::Result<_>>()?;
    if records.is_empty() {
        bail!("{} holds no prediction records", pred.display());
    }

    let manifest = load_manifest(truth)?;
    let truth_by_id: HashMap<&str, EventLabel> = manifest
        .records
        .iter()
        .map(|r| (r.id.as_str(), r.label))
        .collect();

    let mut pairs = Vec::with_capacity(records.len());
    let mut scored = Vec::with_capacity(records.len());
    for r in &records {
        let Some(label) = truth_by_id.get(r.clip_id.as_str()) else {
            bail!("prediction for {} has no truth record", r.clip_id);
        };
        pairs.push((r.vf_index, label.class_index()));
        scored.push(ScoredClip {
            id: r.clip_id.clone(),
            confidences: confidence_vector(r)?,
            truth: label.class_index(),
        });
    }

    let labels: Vec<String> = EventLabel::all().iter().map(|l| l.name()).collect();
    let matrix = accuracy_report(&pairs, labels.clone())?;
    let ap = mean_average_precision(&scored, 11)?;

    std::fs::create_dir_all(out)?;
    let mut report = String::new();
    report.push_str("# 11-class evaluation\n");
    report.push_str("# average precision ranks every evaluated clip per class by its\n");
    report.push_str("# confidence for that class (ties broken by clip id)\n\n");
    report.push_str(&matrix.render_text());
    report.push('\n');
    report.push_str(&format!("{:<26} {:>8} {:>8}\n", "class", "acc(%)", "AP(%)"));
    for (i, name) in labels.iter().enumerate() {
        let acc = matrix.per_class_accuracy()[i].map_or("--".to_string(), |a| format!("{:.2}", a * 100.0));
        let apc = ap.per_class[i].map_or("--".to_string(), |a| format!("{:.2}", a * 100.0));
        report.push_str(&format!("{name:<26} {acc:>8} {apc:>8}\n"));
    }
    report.push_str(&format!(
        "{:<26} {:>8.2} {:>8.2}\n",
        "average",
        matrix.average_accuracy() * 100.0,
        ap.map * 100.0
    ));
    if !ap.excluded.is_empty() {
        let names: Vec<&str> = ap.excluded.iter().map(|&c| labels[c].as_str()).collect();
        report.push_str(&format!("# AP undefined (no positives): {}\n", names.join(", ")));
    }
    let report_path = out.join("report.txt");
    std::fs::write(&report_path, &report)?;

    let confusion_path = out.join("confusion.csv");
    std::fs::write(&confusion_path, matrix.to_csv())?;

    let mut summary = String::from("class,accuracy,average_precision\n");
    for (i, name) in labels.iter().enumerate() {
        let acc = matrix.per_class_accuracy()[i].map_or(String::new(), |a| format!("{a:.6}"));
        let apc = ap.per_class[i].map_or(String::new(), |a| format!("{a:.6}"));
        summary.push_str(&format!("{name},{acc},{apc}\n"));
    }
    summary.push_str(&format!(
        "average,{:.6},{:.6}\n",
        matrix.average_accuracy(),
        ap.map
    ));
    let summary_path = out.join("summary.csv");
    std::fs::write(&summary_path, summary)?;

    let mut rm = RunManifest::new(format!("eval --pred {} --truth {}", pred.display(), truth.display()))
        .input_file("predictions", pred)?
        .input_file("truth", truth)?
        .output(&report_path)
        .output(&confusion_path)
        .output(&summary_path);
    if pgm {
        let pgm_path = out.join("confusion.pgm");
        std::fs::write(&pgm_path, matrix.to_pgm())?;
        rm = rm.output(&pgm_path);
    }
    rm.write(out)?;
    Ok(())
}
