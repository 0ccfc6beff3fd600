// scratch benchmark for sizing the training runs; not part of the deliverable
use std::time::Instant;

use gcmp_core::dataset::synth::{gen_synthetic, SynthConfig};
use gcmp_core::dataset::Split;
use gcmp_core::eval::{accuracy_report, mean_average_precision, ScoredClip};
use gcmp_core::models::train::TrainHyper;
use gcmp_core::pipeline::*;
use gcmp_core::tensor::sgd::LrSchedule;

fn hyper(seed: u64, epochs: usize) -> TrainHyper {
    TrainHyper {
        batch: 8,
        epochs,
        schedule: LrSchedule { base_lr: 0.05, decay_factor: 0.95, decay_every: 250 },
        seed,
        clip_norm: Some(5.0),
    }
}

fn main() {
    let t_all = Instant::now();
    let cfg = SynthConfig {
        clips_per_class: 14,
        test_per_class: 4,
        seed: 7,
        ..SynthConfig::default()
    };
    let (clips, manifest) = gen_synthetic(&cfg).unwrap();
    let events = build_events(&clips, &manifest).unwrap();
    let train = split_of(&events, Split::Train);
    let test = split_of(&events, Split::Test);
    let pcfg = PipelineConfig::desk_scale();

    let t0 = Instant::now();
    let (occ5, curve) = train_stage(&train, None, StageKind::Occ5, &pcfg, &hyper(1, 16)).unwrap();
    println!("occ5: {:?} last-loss {:.4}", t0.elapsed(), curve.last().unwrap());
    let t0 = Instant::now();
    let (pre2, curve) = train_stage(&train, None, StageKind::Pre2, &pcfg, &hyper(2, 16)).unwrap();
    println!("pre2: {:?} last-loss {:.4}", t0.elapsed(), curve.last().unwrap());
    let t0 = Instant::now();
    let (postsf, curve) = train_stage(&train, None, StageKind::PostSf, &pcfg, &hyper(3, 8)).unwrap();
    println!("postsf: {:?} last-loss {:.4}", t0.elapsed(), curve.last().unwrap());

    let models = PipelineModels {
        occ5: match occ5 { TrainedModel::Seq(m) => m, _ => unreachable!() },
        pre2: match pre2 { TrainedModel::Seq(m) => m, _ => unreachable!() },
        postsf: match postsf { TrainedModel::Frame(m) => m, _ => unreachable!() },
    };

    let t0 = Instant::now();
    let (records, times) = predict_all(&test, &models, &pcfg.flow).unwrap();
    println!("predict {} clips: {:?}", records.len(), t0.elapsed());

    let labels: Vec<String> = gcmp_core::dataset::EventLabel::all().iter().map(|l| l.name()).collect();
    let pairs: Vec<(usize, usize)> = records
        .iter()
        .zip(&test)
        .map(|(r, e)| (r.vf_index, e.label.class_index()))
        .collect();
    let m = accuracy_report(&pairs, labels).unwrap();
    println!("11-class accuracy: {:.1}%", m.average_accuracy() * 100.0);
    for (r, e) in records.iter().zip(&test) {
        if r.vf_index != e.label.class_index() {
            println!("  miss: {} -> {} (true {})", e.id, r.label.name(), e.label.name());
        }
    }

    let scored: Vec<ScoredClip> = records
        .iter()
        .zip(&test)
        .map(|(r, e)| ScoredClip {
            id: r.clip_id.clone(),
            confidences: confidence_vector(r).unwrap(),
            truth: e.label.class_index(),
        })
        .collect();
    let ap = mean_average_precision(&scored, 11).unwrap();
    println!("mAP: {:.4} (excluded: {:?})", ap.map, ap.excluded);
    println!("phase times: occ {:?} pre {:?} post {:?} flow {:?}", times.occ, times.pre, times.post, times.flow);
    println!("total: {:?}", t_all.elapsed());
}
