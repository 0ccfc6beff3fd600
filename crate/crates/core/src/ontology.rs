//! The decision layer: two-stage cascade over the stage classifiers,
//! Kronecker fusion of the base-event and success/failure vectors, and
//! assembly of the final 11-element event vector.
//!
//! Canonical orders, fixed for every report and file format:
//! * V6:  three-point, free-throw, layup, other-two-point, slam-dunk, steal
//! * VSF: success, failure
//! * VF:  each non-steal base expands to its (success, failure) pair in V6
//!   order, then steal last — 11 entries total.

use crate::dataset::{BaseEvent, EventLabel, Outcome};
use crate::error::{Error, Result};
use crate::models::SequencePrediction;
use crate::tensor::argmax;

/// The binary vector kinds of the fusion algebra.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VectorKind {
    /// 5 entries: stage-1 classes (layup and other-two-point merged).
    V5,
    /// 2 entries: stage-2 classes (layup, other-two-point).
    V2,
    /// 2 entries: success, failure.
    VSF,
    /// 6 entries: the base events.
    V6,
    /// 5 entries: the non-steal base events; all-zero for steals.
    V5Elem,
    /// 10 entries: V5Elem (x) VSF.
    VEnsem,
    /// 11 entries: VEnsem ++ steal flag.
    VF,
}

impl VectorKind {
    pub fn len(self) -> usize {
        match self {
            VectorKind::V5 | VectorKind::V5Elem => 5,
            VectorKind::V2 | VectorKind::VSF => 2,
            VectorKind::V6 => 6,
            VectorKind::VEnsem => 10,
            VectorKind::VF => 11,
        }
    }

    /// V5Elem and VEnsem are all-zero for steals; every other kind is a
    /// strict one-hot.
    fn allows_zero(self) -> bool {
        matches!(self, VectorKind::V5Elem | VectorKind::VEnsem)
    }
}

/// A validated binary label vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelVector {
    kind: VectorKind,
    entries: Vec<u8>,
}

impl LabelVector {
    pub fn new(kind: VectorKind, entries: Vec<u8>) -> Result<Self> {
        if entries.len() != kind.len() {
            return Err(Error::Shape(format!(
                "{kind:?} wants {} entries, got {}",
                kind.len(),
                entries.len()
            )));
        }
        if entries.iter().any(|&e| e > 1) {
            return Err(Error::Input(format!("{kind:?} entries must be 0 or 1")));
        }
        let ones = entries.iter().filter(|&&e| e == 1).count();
        if ones > 1 || (ones == 0 && !kind.allows_zero()) {
            return Err(Error::Input(format!("{kind:?} must be one-hot, found {ones} ones")));
        }
        Ok(LabelVector { kind, entries })
    }

    pub fn one_hot(kind: VectorKind, index: usize) -> Result<Self> {
        if index >= kind.len() {
            return Err(Error::Input(format!("index {index} outside {kind:?}")));
        }
        let mut entries = vec![0u8; kind.len()];
        entries[index] = 1;
        Ok(LabelVector { kind, entries })
    }

    pub fn zeros(kind: VectorKind) -> Result<Self> {
        if !kind.allows_zero() {
            return Err(Error::Input(format!("{kind:?} cannot be all-zero")));
        }
        Ok(LabelVector {
            kind,
            entries: vec![0u8; kind.len()],
        })
    }

    pub fn kind(&self) -> VectorKind {
        self.kind
    }

    pub fn entries(&self) -> &[u8] {
        &self.entries
    }

    pub fn hot_index(&self) -> Option<usize> {
        self.entries.iter().position(|&e| e == 1)
    }
}

/// Stage-1 class index of a base event (layup and other-two-point merge
/// into index 2).
pub fn occ5_index(base: BaseEvent) -> usize {
    match base {
        BaseEvent::ThreePoint => 0,
        BaseEvent::FreeThrow => 1,
        BaseEvent::Layup | BaseEvent::OtherTwoPoint => 2,
        BaseEvent::SlamDunk => 3,
        BaseEvent::Steal => 4,
    }
}

pub const OCC5_MERGED: usize = 2;

pub const OCC5_NAMES: [&str; 5] = [
    "three-point",
    "free-throw",
    "layup+other-two-point",
    "slam-dunk",
    "steal",
];

/// Stage-2 class index (pre-event classifier).
pub fn pre2_index(base: BaseEvent) -> Option<usize> {
    match base {
        BaseEvent::Layup => Some(0),
        BaseEvent::OtherTwoPoint => Some(1),
        _ => None,
    }
}

fn base_from_occ5(idx: usize) -> Result<BaseEvent> {
    match idx {
        0 => Ok(BaseEvent::ThreePoint),
        1 => Ok(BaseEvent::FreeThrow),
        3 => Ok(BaseEvent::SlamDunk),
        4 => Ok(BaseEvent::Steal),
        other => Err(Error::Input(format!("occ5 index {other} is not a direct class"))),
    }
}

/// Two-stage cascade. If the stage-1 argmax is a direct class it becomes the
/// label; only the merged class consults the stage-2 callable, whose argmax
/// picks layup (0) or other-two-point (1). Returns the V6 vector and the
/// stage-2 prediction when it ran.
pub fn cascade<F>(g5: &SequencePrediction, two_class: F) -> Result<(LabelVector, Option<SequencePrediction>)>
where
    F: FnOnce() -> Result<SequencePrediction>,
{
    if g5.mean.len() != 5 {
        return Err(Error::Shape(format!("stage-1 prediction has {} classes, want 5", g5.mean.len())));
    }
    let top = argmax(&g5.mean);
    if top != OCC5_MERGED {
        let base = base_from_occ5(top)?;
        return Ok((LabelVector::one_hot(VectorKind::V6, base.index())?, None));
    }
    let g2 = two_class()?;
    if g2.mean.len() != 2 {
        return Err(Error::Shape(format!("stage-2 prediction has {} classes, want 2", g2.mean.len())));
    }
    let base = if argmax(&g2.mean) == 0 {
        BaseEvent::Layup
    } else {
        BaseEvent::OtherTwoPoint
    };
    Ok((LabelVector::one_hot(VectorKind::V6, base.index())?, Some(g2)))
}

/// Kronecker product of the 5-element base vector and the success/failure
/// vector: entry 2*i + j = v5elem[i] * vsf[j].
pub fn kron_fuse(v5elem: &LabelVector, vsf: &LabelVector) -> Result<LabelVector> {
    if v5elem.kind() != VectorKind::V5Elem {
        return Err(Error::Input(format!("kron_fuse wants V5Elem, got {:?}", v5elem.kind())));
    }
    if vsf.kind() != VectorKind::VSF {
        return Err(Error::Input(format!("kron_fuse wants VSF, got {:?}", vsf.kind())));
    }
    let mut entries = vec![0u8; 10];
    for (i, &a) in v5elem.entries().iter().enumerate() {
        for (j, &b) in vsf.entries().iter().enumerate() {
            entries[2 * i + j] = a * b;
        }
    }
    LabelVector::new(VectorKind::VEnsem, entries)
}

/// VF = VEnsem ++ the sixth element of V6 (the steal flag). The inputs must
/// be consistent: a steal V6 forces an all-zero ensemble, any other V6 must
/// match the ensemble's base event.
pub fn final_vector(vensem: &LabelVector, v6: &LabelVector) -> Result<LabelVector> {
    if vensem.kind() != VectorKind::VEnsem {
        return Err(Error::Input(format!("final_vector wants VEnsem, got {:?}", vensem.kind())));
    }
    if v6.kind() != VectorKind::V6 {
        return Err(Error::Input(format!("final_vector wants V6, got {:?}", v6.kind())));
    }
    let v6_hot = v6.hot_index().expect("V6 is always one-hot");
    let steal = v6_hot == BaseEvent::Steal.index();
    match vensem.hot_index() {
        Some(e) if !steal => {
            if e / 2 != v6_hot {
                return Err(Error::Input(format!(
                    "ensemble base {} disagrees with V6 base {v6_hot}",
                    e / 2
                )));
            }
        }
        Some(_) => {
            return Err(Error::Input("steal V6 requires an all-zero ensemble".into()));
        }
        None if !steal => {
            return Err(Error::Input("all-zero ensemble only valid for steals".into()));
        }
        None => {}
    }
    let mut entries = vensem.entries().to_vec();
    entries.push(v6.entries()[BaseEvent::Steal.index()]);
    LabelVector::new(VectorKind::VF, entries)
}

/// Stage confidences gathered while predicting one event.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceRecord {
    /// Stage-1 prediction vector (5 classes).
    pub g5: Vec<f32>,
    /// Stage-2 prediction vector, present only when the cascade consulted it.
    pub g2: Option<Vec<f32>>,
    /// (success, failure) frame vote counts; absent for steals.
    pub votes: Option<(usize, usize)>,
}

/// Full decision for one event from its three stage predictors. The
/// callables run lazily: `pre` only when stage 1 lands on the merged class,
/// `sf` never for steals.
pub fn predict_event<FOcc, FPre, FSf>(occ: FOcc, pre: FPre, sf: FSf) -> Result<(LabelVector, ConfidenceRecord)>
where
    FOcc: FnOnce() -> Result<SequencePrediction>,
    FPre: FnOnce() -> Result<SequencePrediction>,
    FSf: FnOnce() -> Result<Vec<[f32; 2]>>,
{
    let g5 = occ()?;
    let (v6, g2) = cascade(&g5, pre)?;
    let steal = v6.hot_index() == Some(BaseEvent::Steal.index());

    let (vensem, votes) = if steal {
        (LabelVector::zeros(VectorKind::VEnsem)?, None)
    } else {
        let per_frame = sf()?;
        let outcome = crate::models::vote_sf(&per_frame)?;
        let succ = per_frame.iter().filter(|p| p[0] >= p[1]).count();
        let votes = (succ, per_frame.len() - succ);
        let v5elem = LabelVector::one_hot(VectorKind::V5Elem, v6.hot_index().unwrap())?;
        let vsf = LabelVector::one_hot(
            VectorKind::VSF,
            if outcome == Outcome::Success { 0 } else { 1 },
        )?;
        (kron_fuse(&v5elem, &vsf)?, Some(votes))
    };
    let vf = final_vector(&vensem, &v6)?;
    let record = ConfidenceRecord {
        g5: g5.mean.clone(),
        g2: g2.map(|p| p.mean),
        votes,
    };
    Ok((vf, record))
}

/// The event label named by a VF one-hot.
pub fn vf_to_label(vf: &LabelVector) -> Result<EventLabel> {
    if vf.kind() != VectorKind::VF {
        return Err(Error::Input(format!("expected VF, got {:?}", vf.kind())));
    }
    let idx = vf
        .hot_index()
        .ok_or_else(|| Error::Input("VF vector has no hot entry".into()))?;
    EventLabel::from_class_index(idx)
}

// ---- prediction records (one text line per clip) ----

/// One output row: clip id, VF index, label name, stage confidences, votes.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionRecord {
    pub clip_id: String,
    pub vf_index: usize,
    pub label: EventLabel,
    pub g5: Vec<f32>,
    pub g2: Option<Vec<f32>>,
    pub votes: Option<(usize, usize)>,
}

impl PredictionRecord {
    pub fn new(clip_id: String, vf: &LabelVector, conf: &ConfidenceRecord) -> Result<Self> {
        let label = vf_to_label(vf)?;
        Ok(PredictionRecord {
            clip_id,
            vf_index: label.class_index(),
            label,
            g5: conf.g5.clone(),
            g2: conf.g2.clone(),
            votes: conf.votes,
        })
    }

    pub fn to_line(&self) -> String {
        let csv = |v: &[f32]| v.iter().map(|x| format!("{x:.6}")).collect::<Vec<_>>().join(",");
        let g2 = self.g2.as_deref().map_or_else(|| "-".to_string(), csv);
        let votes = self
            .votes
            .map_or_else(|| "-".to_string(), |(s, f)| format!("{s}/{f}"));
        format!(
            "{} {} {} {} {} {}",
            self.clip_id,
            self.vf_index,
            self.label.name(),
            csv(&self.g5),
            g2,
            votes
        )
    }

    pub fn from_line(line: &str) -> Result<Self> {
        let bad = |d: String| Error::Format { kind: "prediction", detail: d };
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 6 {
            return Err(bad(format!("expected 6 fields, got {}", fields.len())));
        }
        let vf_index: usize = fields[1].parse().map_err(|_| bad("bad VF index".into()))?;
        let label = EventLabel::from_class_index(vf_index)?;
        if label.name() != fields[2] {
            return Err(bad(format!("label {} does not match index {vf_index}", fields[2])));
        }
        let parse_csv = |s: &str| -> Result<Vec<f32>> {
            s.split(',')
                .map(|x| x.parse::<f32>().map_err(|_| bad(format!("bad confidence {x:?}"))))
                .collect()
        };
        let g5 = parse_csv(fields[3])?;
        if g5.len() != 5 {
            return Err(bad(format!("stage-1 vector has {} entries", g5.len())));
        }
        let g2 = if fields[4] == "-" {
            None
        } else {
            let v = parse_csv(fields[4])?;
            if v.len() != 2 {
                return Err(bad(format!("stage-2 vector has {} entries", v.len())));
            }
            Some(v)
        };
        let votes = if fields[5] == "-" {
            None
        } else {
            let (s, f) = fields[5]
                .split_once('/')
                .ok_or_else(|| bad("bad vote tally".into()))?;
            Some((
                s.parse().map_err(|_| bad("bad vote count".into()))?,
                f.parse().map_err(|_| bad("bad vote count".into()))?,
            ))
        };
        Ok(PredictionRecord {
            clip_id: fields[0].to_string(),
            vf_index,
            label,
            g5,
            g2,
            votes,
        })
    }
}
