//! Metrics and analyses: per-class accuracy with confusion matrices, mean
//! average precision over confidence-ranked clip lists, feature-similarity
//! matrices, and the per-phase timing report.

use std::time::Duration;

use crate::error::{Error, Result};

/// K x K counts; rows are ground truth, columns predictions.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfusionMatrix {
    k: usize,
    labels: Vec<String>,
    counts: Vec<usize>,
}

impl ConfusionMatrix {
    pub fn new(labels: Vec<String>) -> Self {
        let k = labels.len();
        ConfusionMatrix {
            k,
            labels,
            counts: vec![0; k * k],
        }
    }

    pub fn record(&mut self, truth: usize, pred: usize) -> Result<()> {
        if truth >= self.k || pred >= self.k {
            return Err(Error::Input(format!(
                "label ({truth}, {pred}) outside the {}-class space",
                self.k
            )));
        }
        self.counts[truth * self.k + pred] += 1;
        Ok(())
    }

    pub fn count(&self, truth: usize, pred: usize) -> usize {
        self.counts[truth * self.k + pred]
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn row_sum(&self, truth: usize) -> usize {
        self.counts[truth * self.k..(truth + 1) * self.k].iter().sum()
    }

    pub fn class_count(&self) -> usize {
        self.k
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Diagonal over row sum; None for classes that never occur as truth.
    pub fn per_class_accuracy(&self) -> Vec<Option<f64>> {
        (0..self.k)
            .map(|c| {
                let n = self.row_sum(c);
                (n > 0).then(|| self.count(c, c) as f64 / n as f64)
            })
            .collect()
    }

    /// Unweighted mean of the defined per-class accuracies.
    pub fn average_accuracy(&self) -> f64 {
        let accs: Vec<f64> = self.per_class_accuracy().into_iter().flatten().collect();
        if accs.is_empty() {
            return 0.0;
        }
        accs.iter().sum::<f64>() / accs.len() as f64
    }

    /// Aligned text table in the usual confusion-matrix layout with a
    /// per-class accuracy column and an average row.
    pub fn render_text(&self) -> String {
        let w = self
            .labels
            .iter()
            .map(String::len)
            .max()
            .unwrap_or(4)
            .max(6);
        let mut out = String::new();
        out.push_str(&format!("{:<w$} ", "truth\\pred"));
        for l in &self.labels {
            out.push_str(&format!("{l:>w$} "));
        }
        out.push_str(&format!("{:>9}\n", "acc(%)"));
        for (t, acc) in self.per_class_accuracy().iter().enumerate() {
            out.push_str(&format!("{:<w$} ", self.labels[t]));
            for p in 0..self.k {
                out.push_str(&format!("{:>w$} ", self.count(t, p)));
            }
            match acc {
                Some(a) => out.push_str(&format!("{:>9.2}\n", a * 100.0)),
                None => out.push_str(&format!("{:>9}\n", "--")),
            }
        }
        out.push_str(&format!(
            "{:<w$} {:>w$} average {:>6.2}\n",
            "average",
            "",
            self.average_accuracy() * 100.0
        ));
        out
    }

    /// Comma-separated counts with a header row/column.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("truth\\pred");
        for l in &self.labels {
            out.push(',');
            out.push_str(l);
        }
        out.push_str(",accuracy\n");
        for (t, acc) in self.per_class_accuracy().iter().enumerate() {
            out.push_str(&self.labels[t]);
            for p in 0..self.k {
                out.push_str(&format!(",{}", self.count(t, p)));
            }
            match acc {
                Some(a) => out.push_str(&format!(",{:.4}\n", a)),
                None => out.push_str(",\n"),
            }
        }
        out
    }

    /// Binary PGM (P5) heat image: counts normalized to the matrix maximum.
    pub fn to_pgm(&self) -> Vec<u8> {
        let max = self.counts.iter().copied().max().unwrap_or(0).max(1);
        let mut out = format!("P5\n{} {}\n255\n", self.k, self.k).into_bytes();
        out.extend(self.counts.iter().map(|&c| (c * 255 / max) as u8));
        out
    }
}

/// Tallies (prediction, truth) pairs into a confusion matrix.
pub fn accuracy_report(pairs: &[(usize, usize)], labels: Vec<String>) -> Result<ConfusionMatrix> {
    if pairs.is_empty() {
        return Err(Error::Input("no predictions to evaluate".into()));
    }
    let mut m = ConfusionMatrix::new(labels);
    for &(pred, truth) in pairs {
        m.record(truth, pred)?;
    }
    Ok(m)
}

/// One clip entering ranking: id (the deterministic tie-break), per-class
/// confidences, and the true class index.
#[derive(Debug, Clone)]
pub struct ScoredClip {
    pub id: String,
    pub confidences: Vec<f64>,
    pub truth: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApReport {
    /// Per-class average precision; None where the class has no positives.
    pub per_class: Vec<Option<f64>>,
    /// Unweighted mean over the defined classes.
    pub map: f64,
    /// Classes excluded for lack of positives.
    pub excluded: Vec<usize>,
}

/// Average precision per class and their mean. Clips are ranked per class by
/// descending confidence (ties by ascending clip id); AP is the mean of
/// precision-at-rank over the positive clips' ranks.
pub fn mean_average_precision(scored: &[ScoredClip], class_count: usize) -> Result<ApReport> {
    if scored.is_empty() {
        return Err(Error::Input("no scored clips".into()));
    }
    for s in scored {
        if s.confidences.len() != class_count {
            return Err(Error::Shape(format!(
                "clip {} has {} confidences, want {class_count}",
                s.id,
                s.confidences.len()
            )));
        }
        if s.confidences.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite(format!("confidences of clip {}", s.id)));
        }
        if s.truth >= class_count {
            return Err(Error::Input(format!("truth {} outside {class_count} classes", s.truth)));
        }
    }

    let mut per_class = Vec::with_capacity(class_count);
    let mut excluded = Vec::new();
    for c in 0..class_count {
        let positives = scored.iter().filter(|s| s.truth == c).count();
        if positives == 0 {
            per_class.push(None);
            excluded.push(c);
            continue;
        }
        let mut order: Vec<usize> = (0..scored.len()).collect();
        order.sort_by(|&a, &b| {
            scored[b].confidences[c]
                .partial_cmp(&scored[a].confidences[c])
                .unwrap()
                .then_with(|| scored[a].id.cmp(&scored[b].id))
        });
        let mut hits = 0usize;
        let mut ap = 0.0f64;
        for (rank0, &i) in order.iter().enumerate() {
            if scored[i].truth == c {
                hits += 1;
                ap += hits as f64 / (rank0 + 1) as f64;
            }
        }
        per_class.push(Some(ap / positives as f64));
    }

    let defined: Vec<f64> = per_class.iter().copied().flatten().collect();
    if defined.is_empty() {
        return Err(Error::Input("every class lacks positives".into()));
    }
    Ok(ApReport {
        map: defined.iter().sum::<f64>() / defined.len() as f64,
        per_class,
        excluded,
    })
}

/// Pairwise mean cosine similarity between classes, reported x100.
/// Symmetric; the diagonal is intra-class similarity over distinct pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    pub k: usize,
    pub labels: Vec<String>,
    /// k x k values in percent.
    pub values: Vec<f64>,
}

impl CorrelationMatrix {
    pub fn at(&self, a: usize, b: usize) -> f64 {
        self.values[a * self.k + b]
    }

    pub fn render_text(&self) -> String {
        let w = self.labels.iter().map(String::len).max().unwrap_or(4).max(8);
        let mut out = format!("{:<w$} ", "sim(%)");
        for l in &self.labels {
            out.push_str(&format!("{l:>w$} "));
        }
        out.push('\n');
        for a in 0..self.k {
            out.push_str(&format!("{:<w$} ", self.labels[a]));
            for b in 0..self.k {
                out.push_str(&format!("{:>w$.2} ", self.at(a, b)));
            }
            out.push('\n');
        }
        out
    }

    /// Mean of the off-diagonal entries in row `c`.
    pub fn mean_inter(&self, c: usize) -> f64 {
        let sum: f64 = (0..self.k).filter(|&b| b != c).map(|b| self.at(c, b)).sum();
        sum / (self.k - 1) as f64
    }
}

/// Feature-similarity analysis over labeled feature vectors.
pub fn correlate_features(
    features: &[(Vec<f64>, usize)],
    labels: Vec<String>,
) -> Result<CorrelationMatrix> {
    let k = labels.len();
    let mut by_class: Vec<Vec<&Vec<f64>>> = vec![Vec::new(); k];
    for (f, c) in features {
        if *c >= k {
            return Err(Error::Input(format!("class {c} outside {k} classes")));
        }
        by_class[*c].push(f);
    }
    for (c, class) in by_class.iter().enumerate() {
        if class.len() < 2 {
            return Err(Error::Input(format!(
                "class {c} needs at least 2 feature vectors, has {}",
                class.len()
            )));
        }
    }

    // normalize once; reject zero-norm vectors
    let mut unit: Vec<Vec<Vec<f64>>> = Vec::with_capacity(k);
    for class in &by_class {
        let mut us = Vec::with_capacity(class.len());
        for f in class {
            let norm = f.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm == 0.0 || !norm.is_finite() {
                return Err(Error::NonFinite("zero-norm feature vector".into()));
            }
            us.push(f.iter().map(|v| v / norm).collect::<Vec<f64>>());
        }
        unit.push(us);
    }

    let mut values = vec![0.0f64; k * k];
    for a in 0..k {
        for b in a..k {
            let mut sum = 0.0;
            let mut n = 0usize;
            if a == b {
                let class = &unit[a];
                for i in 0..class.len() {
                    for j in i + 1..class.len() {
                        sum += dot(&class[i], &class[j]);
                        n += 1;
                    }
                }
            } else {
                for fa in &unit[a] {
                    for fb in &unit[b] {
                        sum += dot(fa, fb);
                        n += 1;
                    }
                }
            }
            let v = 100.0 * sum / n as f64;
            values[a * k + b] = v;
            values[b * k + a] = v;
        }
    }
    Ok(CorrelationMatrix { k, labels, values })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Wall-clock accumulator for the prediction phases.
#[derive(Debug, Clone, Copy, Default)]
pub struct PhaseTimes {
    pub occ: Duration,
    pub pre: Duration,
    pub post: Duration,
    pub total: Duration,
    pub flow: Duration,
    pub clips: usize,
}

impl PhaseTimes {
    pub fn add(&mut self, other: &PhaseTimes) {
        self.occ += other.occ;
        self.pre += other.pre;
        self.post += other.post;
        self.total += other.total;
        self.flow += other.flow;
        self.clips += other.clips;
    }
}

/// Per-phase mean seconds over `clips` evaluated clips. Flow time is listed
/// separately and excluded from the phase columns when so configured.
#[derive(Debug, Clone)]
pub struct TimingReport {
    pub clips: usize,
    pub occ_s: f64,
    pub pre_s: f64,
    pub post_s: f64,
    pub total_s: f64,
    pub flow_excluded: bool,
}

impl TimingReport {
    pub fn from_times(t: &PhaseTimes, exclude_flow: bool) -> Result<Self> {
        if t.clips == 0 {
            return Err(Error::Input("timing report over zero clips".into()));
        }
        let n = t.clips as f64;
        let total = if exclude_flow {
            t.total.saturating_sub(t.flow)
        } else {
            t.total
        };
        Ok(TimingReport {
            clips: t.clips,
            occ_s: t.occ.as_secs_f64() / n,
            pre_s: t.pre.as_secs_f64() / n,
            post_s: t.post.as_secs_f64() / n,
            total_s: total.as_secs_f64() / n,
            flow_excluded: exclude_flow,
        })
    }

    /// Phase-by-phase table: event-occ, pre-event, post-event, total.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:<14} {:>10} {:>10} {:>10} {:>10}\n",
            "", "event-occ", "pre-event", "post-event", "total"
        ));
        out.push_str(&format!(
            "{:<14} {:>10.4} {:>10.4} {:>10.4} {:>10.4}\n",
            "time cost (s)", self.occ_s, self.pre_s, self.post_s, self.total_s
        ));
        out.push_str(&format!(
            "# mean over {} clips; optical-flow time {}\n",
            self.clips,
            if self.flow_excluded { "excluded" } else { "included" }
        ));
        out
    }

    pub fn to_csv(&self) -> String {
        format!(
            "phase,event-occ,pre-event,post-event,total\nseconds,{:.6},{:.6},{:.6},{:.6}\n",
            self.occ_s, self.pre_s, self.post_s, self.total_s
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{substream, Stream};
    use rand::Rng;

    #[test]
    fn all_correct_is_identity() {
        let pairs: Vec<(usize, usize)> = (0..11).flat_map(|c| vec![(c, c); 3]).collect();
        let labels = (0..11).map(|i| format!("c{i}")).collect();
        let m = accuracy_report(&pairs, labels).unwrap();
        assert_eq!(m.total(), 33);
        for c in 0..11 {
            assert_eq!(m.count(c, c), 3);
            assert_eq!(m.per_class_accuracy()[c], Some(1.0));
        }
        assert!((m.average_accuracy() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_mistake_lands_in_one_cell() {
        let labels = vec!["a".into(), "b".into(), "c".into()];
        let m = accuracy_report(&[(1, 0)], labels).unwrap();
        assert_eq!(m.count(0, 1), 1);
        assert_eq!(m.total(), 1);
    }

    #[test]
    fn out_of_range_label_is_an_error() {
        let labels = vec!["a".into(), "b".into()];
        assert!(accuracy_report(&[(2, 0)], labels).is_err());
    }

    // Tally oracle: recount every cell with a filter pass.
    #[test]
    fn random_case_matches_tally_oracle() {
        let mut rng = substream(1, Stream::Data);
        let pairs: Vec<(usize, usize)> = (0..50)
            .map(|_| (rng.gen_range(0..6), rng.gen_range(0..6)))
            .collect();
        let labels = (0..6).map(|i| format!("c{i}")).collect();
        let m = accuracy_report(&pairs, labels).unwrap();
        for t in 0..6 {
            for p in 0..6 {
                let want = pairs.iter().filter(|&&(pp, tt)| tt == t && pp == p).count();
                assert_eq!(m.count(t, p), want);
            }
            let row: usize = (0..6).map(|p| m.count(t, p)).sum();
            assert_eq!(row, pairs.iter().filter(|&&(_, tt)| tt == t).count());
        }
        assert_eq!(m.total(), 50);
    }

    fn clip(id: &str, conf: Vec<f64>, truth: usize) -> ScoredClip {
        ScoredClip {
            id: id.into(),
            confidences: conf,
            truth,
        }
    }

    #[test]
    fn perfect_separation_gives_ap_one() {
        let scored = vec![
            clip("a", vec![0.9, 0.1], 0),
            clip("b", vec![0.8, 0.2], 0),
            clip("c", vec![0.2, 0.8], 1),
            clip("d", vec![0.1, 0.9], 1),
        ];
        let r = mean_average_precision(&scored, 2).unwrap();
        assert_eq!(r.per_class, vec![Some(1.0), Some(1.0)]);
        assert!((r.map - 1.0).abs() < 1e-12);
    }

    #[test]
    fn one_positive_ranked_second_gives_half() {
        // hand enumeration for class 0: ranks (neg 0.9), (pos 0.8), (neg 0.1),
        // so precision at the positive's rank 2 = 1/2
        let scored = vec![
            clip("a", vec![0.9, 0.5], 1),
            clip("b", vec![0.8, 0.5], 0),
            clip("c", vec![0.1, 0.5], 1),
        ];
        let r = mean_average_precision(&scored, 2).unwrap();
        assert_eq!(r.per_class[0], Some(0.5));
    }

    // Brute-force all-ranks oracle: the rank of each clip is computed by
    // pairwise counting (greater confidence, or equal with smaller id), no
    // sorting anywhere.
    fn ap_oracle(scored: &[ScoredClip], c: usize) -> Option<f64> {
        let positives: Vec<&ScoredClip> = scored.iter().filter(|s| s.truth == c).collect();
        if positives.is_empty() {
            return None;
        }
        let rank_of = |x: &ScoredClip| -> usize {
            1 + scored
                .iter()
                .filter(|o| {
                    o.confidences[c] > x.confidences[c]
                        || (o.confidences[c] == x.confidences[c] && o.id < x.id)
                })
                .count()
        };
        let mut ap = 0.0;
        for p in &positives {
            let rp = rank_of(p);
            let hits = positives.iter().filter(|q| rank_of(q) <= rp).count();
            ap += hits as f64 / rp as f64;
        }
        Some(ap / positives.len() as f64)
    }

    #[test]
    fn random_instances_match_brute_force_oracle() {
        let mut rng = substream(2, Stream::Data);
        for case in 0..100 {
            let n = rng.gen_range(5..20);
            let k = rng.gen_range(2..5);
            let scored: Vec<ScoredClip> = (0..n)
                .map(|i| {
                    let conf: Vec<f64> = (0..k)
                        .map(|_| (rng.gen_range(0..8) as f64) / 8.0) // coarse grid forces ties
                        .collect();
                    clip(&format!("clip{i:03}"), conf, rng.gen_range(0..k))
                })
                .collect();
            let Ok(r) = mean_average_precision(&scored, k) else {
                continue; // a class had no positives anywhere
            };
            for c in 0..k {
                let want = ap_oracle(&scored, c);
                match (r.per_class[c], want) {
                    (Some(a), Some(b)) => {
                        assert!((a - b).abs() < 1e-12, "case {case} class {c}: {a} vs {b}")
                    }
                    (None, None) => {}
                    other => panic!("case {case} class {c}: {other:?}"),
                }
            }
        }
    }

    #[test]
    fn map_invariant_under_monotone_transform() {
        let mut rng = substream(3, Stream::Data);
        let scored: Vec<ScoredClip> = (0..15)
            .map(|i| {
                clip(
                    &format!("c{i:02}"),
                    (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect(),
                    rng.gen_range(0..3),
                )
            })
            .collect();
        let base = mean_average_precision(&scored, 3).unwrap();
        let transformed: Vec<ScoredClip> = scored
            .iter()
            .map(|s| ScoredClip {
                id: s.id.clone(),
                confidences: s.confidences.iter().map(|c| (3.0 * c + 1.0).atan()).collect(),
                truth: s.truth,
            })
            .collect();
        let t = mean_average_precision(&transformed, 3).unwrap();
        assert!((base.map - t.map).abs() < 1e-12);
    }

    #[test]
    fn zero_positive_class_is_excluded_and_reported() {
        let scored = vec![clip("a", vec![0.9, 0.1], 0), clip("b", vec![0.2, 0.3], 0)];
        let r = mean_average_precision(&scored, 2).unwrap();
        assert_eq!(r.per_class[1], None);
        assert_eq!(r.excluded, vec![1]);
        assert!((r.map - r.per_class[0].unwrap()).abs() < 1e-12);
    }

    #[test]
    fn identical_intra_class_vectors_score_100() {
        let features = vec![
            (vec![1.0, 2.0, 3.0], 0),
            (vec![1.0, 2.0, 3.0], 0),
            (vec![0.0, 0.0, 1.0], 1),
            (vec![0.0, 0.0, 2.0], 1),
        ];
        let m = correlate_features(&features, vec!["a".into(), "b".into()]).unwrap();
        assert!((m.at(0, 0) - 100.0).abs() < 1e-9);
        assert!((m.at(1, 1) - 100.0).abs() < 1e-9);
    }

    #[test]
    fn orthogonal_classes_score_zero() {
        let features = vec![
            (vec![1.0, 0.0], 0),
            (vec![2.0, 0.0], 0),
            (vec![0.0, 1.0], 1),
            (vec![0.0, 3.0], 1),
        ];
        let m = correlate_features(&features, vec!["a".into(), "b".into()]).unwrap();
        assert!(m.at(0, 1).abs() < 1e-9);
        assert_eq!(m.at(0, 1), m.at(1, 0));
    }

    // Pairwise-loop oracle computing each cosine from raw vectors.
    #[test]
    fn random_features_match_pairwise_oracle() {
        let mut rng = substream(4, Stream::Data);
        let features: Vec<(Vec<f64>, usize)> = (0..12)
            .map(|i| ((0..6).map(|_| rng.gen_range(-1.0..1.0)).collect(), i % 3))
            .collect();
        let labels = vec!["a".into(), "b".into(), "c".into()];
        let m = correlate_features(&features, labels).unwrap();

        let cos = |a: &[f64], b: &[f64]| {
            let na = a.iter().map(|v| v * v).sum::<f64>().sqrt();
            let nb = b.iter().map(|v| v * v).sum::<f64>().sqrt();
            a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / (na * nb)
        };
        for ca in 0..3 {
            for cb in 0..3 {
                let mut sum = 0.0;
                let mut n = 0;
                for (i, (fa, la)) in features.iter().enumerate() {
                    for (j, (fb, lb)) in features.iter().enumerate() {
                        let valid = if ca == cb { i < j } else { true };
                        if *la == ca && *lb == cb && valid {
                            sum += cos(fa, fb);
                            n += 1;
                        }
                    }
                }
                let want = 100.0 * sum / n as f64;
                assert!((m.at(ca, cb) - want).abs() < 1e-9, "({ca},{cb})");
            }
        }
        // symmetry within 1e-12
        for a in 0..3 {
            for b in 0..3 {
                assert!((m.at(a, b) - m.at(b, a)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_norm_feature_is_an_error() {
        let features = vec![
            (vec![0.0, 0.0], 0),
            (vec![1.0, 0.0], 0),
            (vec![0.0, 1.0], 1),
            (vec![0.0, 2.0], 1),
        ];
        assert!(correlate_features(&features, vec!["a".into(), "b".into()]).is_err());
    }

    #[test]
    fn timing_report_shape() {
        let t = PhaseTimes {
            occ: Duration::from_millis(500),
            pre: Duration::from_millis(300),
            post: Duration::from_millis(200),
            total: Duration::from_millis(1200),
            flow: Duration::from_millis(100),
            clips: 10,
        };
        let r = TimingReport::from_times(&t, true).unwrap();
        assert!(r.occ_s + r.pre_s + r.post_s <= r.total_s + 1e-9);
        let text = r.render_text();
        assert!(text.contains("event-occ"));
        assert!(text.contains("pre-event"));
        assert!(text.contains("post-event"));
        assert!(text.contains("total"));
        assert!(TimingReport::from_times(&PhaseTimes::default(), true).is_err());
    }
}
