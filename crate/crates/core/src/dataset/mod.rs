//! Clips, labels, the three-stage segment model, and windowing.
//!
//! An event occupies an inclusive frame interval [start, end] of a source
//! video. Extending it by 18 frames before and 10 after yields the full
//! pre / occ / post structure; frames past either end of the source are
//! filled by repeating the boundary frame.

pub mod io;
pub mod synth;

use crate::error::{Error, Result};

/// Number of pre-event frames prepended when extending an event.
pub const PRE_LEN: usize = 18;
/// Number of post-event frames appended when extending an event.
pub const POST_LEN: usize = 10;
/// Training window length in frames.
pub const WINDOW: usize = 16;

/// The six base event types, in canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BaseEvent {
    ThreePoint,
    FreeThrow,
    Layup,
    OtherTwoPoint,
    SlamDunk,
    Steal,
}

impl BaseEvent {
    pub const ALL: [BaseEvent; 6] = [
        BaseEvent::ThreePoint,
        BaseEvent::FreeThrow,
        BaseEvent::Layup,
        BaseEvent::OtherTwoPoint,
        BaseEvent::SlamDunk,
        BaseEvent::Steal,
    ];

    pub fn index(self) -> usize {
        Self::ALL.iter().position(|&b| b == self).unwrap()
    }

    pub fn name(self) -> &'static str {
        match self {
            BaseEvent::ThreePoint => "three-point",
            BaseEvent::FreeThrow => "free-throw",
            BaseEvent::Layup => "layup",
            BaseEvent::OtherTwoPoint => "other-two-point",
            BaseEvent::SlamDunk => "slam-dunk",
            BaseEvent::Steal => "steal",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|b| b.name() == s)
            .ok_or_else(|| Error::Input(format!("unknown base event {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Outcome {
    Success,
    Failure,
    NotApplicable,
}

impl Outcome {
    pub fn name(self) -> &'static str {
        match self {
            Outcome::Success => "success",
            Outcome::Failure => "failure",
            Outcome::NotApplicable => "n/a",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "success" => Ok(Outcome::Success),
            "failure" => Ok(Outcome::Failure),
            "n/a" => Ok(Outcome::NotApplicable),
            other => Err(Error::Input(format!("unknown outcome {other:?}"))),
        }
    }
}

/// One of the 11 valid event labels: steal has no outcome, every other base
/// event is either a success or a failure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EventLabel {
    base: BaseEvent,
    outcome: Outcome,
}

impl EventLabel {
    pub fn new(base: BaseEvent, outcome: Outcome) -> Result<Self> {
        let steal = base == BaseEvent::Steal;
        let na = outcome == Outcome::NotApplicable;
        if steal != na {
            return Err(Error::Input(format!(
                "invalid label: {} with outcome {}",
                base.name(),
                outcome.name()
            )));
        }
        Ok(EventLabel { base, outcome })
    }

    pub fn base(self) -> BaseEvent {
        self.base
    }

    pub fn outcome(self) -> Outcome {
        self.outcome
    }

    /// All 11 valid labels in the canonical 11-class order:
    /// (base, success), (base, failure) for the five shot types, then steal.
    pub fn all() -> Vec<EventLabel> {
        let mut out = Vec::with_capacity(11);
        for base in BaseEvent::ALL {
            if base == BaseEvent::Steal {
                out.push(EventLabel::new(base, Outcome::NotApplicable).unwrap());
            } else {
                out.push(EventLabel::new(base, Outcome::Success).unwrap());
                out.push(EventLabel::new(base, Outcome::Failure).unwrap());
            }
        }
        // steal was pushed in base order position; reorder so it is last
        out.sort_by_key(|l| l.class_index());
        out
    }

    /// Index in the 11-class order (pairs of success/failure, steal last).
    pub fn class_index(self) -> usize {
        match (self.base, self.outcome) {
            (BaseEvent::Steal, _) => 10,
            (b, Outcome::Success) => 2 * b.index(),
            (b, Outcome::Failure) => 2 * b.index() + 1,
            (_, Outcome::NotApplicable) => unreachable!("validated at construction"),
        }
    }

    pub fn from_class_index(i: usize) -> Result<Self> {
        match i {
            10 => EventLabel::new(BaseEvent::Steal, Outcome::NotApplicable),
            i if i < 10 => {
                let base = BaseEvent::ALL[i / 2];
                let outcome = if i % 2 == 0 { Outcome::Success } else { Outcome::Failure };
                EventLabel::new(base, outcome)
            }
            _ => Err(Error::Input(format!("class index {i} out of range"))),
        }
    }

    pub fn name(self) -> String {
        if self.base == BaseEvent::Steal {
            "steal".to_string()
        } else {
            format!("{}-{}", self.base.name(), self.outcome.name())
        }
    }
}

/// One RGB frame, 8 bits per channel, row-major RGB interleaved.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    width: usize,
    height: usize,
    rgb: Vec<u8>,
}

impl Frame {
    pub fn new(width: usize, height: usize, rgb: Vec<u8>) -> Result<Self> {
        if rgb.len() != width * height * 3 {
            return Err(Error::Shape(format!(
                "frame {}x{} wants {} bytes, got {}",
                width,
                height,
                width * height * 3,
                rgb.len()
            )));
        }
        Ok(Frame { width, height, rgb })
    }

    pub fn filled(width: usize, height: usize, rgb: [u8; 3]) -> Self {
        let mut data = Vec::with_capacity(width * height * 3);
        for _ in 0..width * height {
            data.extend_from_slice(&rgb);
        }
        Frame { width, height, rgb: data }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn rgb(&self) -> &[u8] {
        &self.rgb
    }

    pub fn rgb_mut(&mut self) -> &mut [u8] {
        &mut self.rgb
    }

    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * self.width + x) * 3;
        [self.rgb[i], self.rgb[i + 1], self.rgb[i + 2]]
    }

    pub fn set_pixel(&mut self, x: usize, y: usize, rgb: [u8; 3]) {
        let i = (y * self.width + x) * 3;
        self.rgb[i..i + 3].copy_from_slice(&rgb);
    }
}

/// An ordered, uniformly sized frame sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct VideoClip {
    pub id: String,
    pub fps: f64,
    frames: Vec<Frame>,
}

impl VideoClip {
    pub fn new(id: impl Into<String>, fps: f64, frames: Vec<Frame>) -> Result<Self> {
        if frames.is_empty() {
            return Err(Error::Input("clip needs at least one frame".into()));
        }
        let (w, h) = (frames[0].width, frames[0].height);
        if frames.iter().any(|f| f.width != w || f.height != h) {
            return Err(Error::Shape("clip frames must share dimensions".into()));
        }
        Ok(VideoClip {
            id: id.into(),
            fps,
            frames,
        })
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn width(&self) -> usize {
        self.frames[0].width
    }

    pub fn height(&self) -> usize {
        self.frames[0].height
    }

    fn slice(&self, range: std::ops::Range<usize>, suffix: &str) -> VideoClip {
        VideoClip {
            id: format!("{}{}", self.id, suffix),
            fps: self.fps,
            frames: self.frames[range].to_vec(),
        }
    }
}

/// A clip partitioned into its pre-event, event-occ and post-event stages.
#[derive(Debug, Clone)]
pub struct SegmentedEvent {
    pub pre: VideoClip,
    pub occ: VideoClip,
    pub post: VideoClip,
    pub label: EventLabel,
}

impl SegmentedEvent {
    pub fn total_len(&self) -> usize {
        self.pre.len() + self.occ.len() + self.post.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            other => Err(Error::Input(format!("unknown split {other:?}"))),
        }
    }
}

/// One manifest entry: an event occupies the inclusive interval
/// [start, end] of source clip `id`.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifestRecord {
    pub id: String,
    pub start: usize,
    pub end: usize,
    pub label: EventLabel,
    pub split: Split,
}

impl ManifestRecord {
    pub fn validate(&self, source_len: Option<usize>) -> Result<()> {
        if self.start >= self.end {
            return Err(Error::Input(format!(
                "record {}: start {} must precede end {}",
                self.id, self.start, self.end
            )));
        }
        if let Some(n) = source_len {
            if self.end >= n {
                return Err(Error::Input(format!(
                    "record {}: end {} outside source of {} frames",
                    self.id, self.end, n
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ClipManifest {
    pub records: Vec<ManifestRecord>,
}

/// Frame indices of an event after the fixed forward/backward extension.
/// Indices outside the source are clamped, which repeats boundary frames.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtendedRecord {
    pub id: String,
    pub label: EventLabel,
    pub split: Split,
    pub frame_indices: Vec<usize>,
}

/// Extends [start, end] to [start-18, end+10], clamping into the source.
pub fn extend_event(record: &ManifestRecord, source_len: usize) -> Result<ExtendedRecord> {
    record.validate(Some(source_len))?;
    let lo = record.start as isize - PRE_LEN as isize;
    let hi = record.end as isize + POST_LEN as isize;
    let frame_indices = (lo..=hi)
        .map(|i| i.clamp(0, source_len as isize - 1) as usize)
        .collect();
    Ok(ExtendedRecord {
        id: record.id.clone(),
        label: record.label,
        split: record.split,
        frame_indices,
    })
}

/// Materializes an extended record against its source clip.
pub fn materialize(ext: &ExtendedRecord, source: &VideoClip) -> Result<VideoClip> {
    if let Some(&bad) = ext.frame_indices.iter().find(|&&i| i >= source.len()) {
        return Err(Error::Input(format!(
            "extended record {} references frame {bad} of a {}-frame source",
            ext.id,
            source.len()
        )));
    }
    let frames = ext
        .frame_indices
        .iter()
        .map(|&i| source.frames()[i].clone())
        .collect();
    VideoClip::new(ext.id.clone(), source.fps, frames)
}

/// Partitions a clip into [0, pre_len), [pre_len, len-post_len),
/// [len-post_len, len).
pub fn split_segments(
    clip: &VideoClip,
    label: EventLabel,
    pre_len: usize,
    post_len: usize,
) -> Result<SegmentedEvent> {
    let n = clip.len();
    if n <= pre_len + post_len {
        return Err(Error::Input(format!(
            "clip {} has {} frames, need more than {} to split {}+occ+{}",
            clip.id,
            n,
            pre_len + post_len,
            pre_len,
            post_len
        )));
    }
    Ok(SegmentedEvent {
        pre: clip.slice(0..pre_len, ".pre"),
        occ: clip.slice(pre_len..n - post_len, ".occ"),
        post: clip.slice(n - post_len..n, ".post"),
        label,
    })
}

/// Start offsets of 16-long windows: non-overlapping stride-16 windows, and
/// if a remainder is left the final window is the last 16 positions (it may
/// overlap its predecessor).
pub fn window_starts(len: usize) -> Result<Vec<usize>> {
    if len < WINDOW {
        return Err(Error::Input(format!("need at least {WINDOW} frames, got {len}")));
    }
    let mut starts: Vec<usize> = (0..=len - WINDOW).step_by(WINDOW).collect();
    if len % WINDOW != 0 {
        starts.push(len - WINDOW);
    }
    Ok(starts)
}

/// 16-frame training windows of a clip, per the stride/tail rule above.
pub fn windows16(clip: &VideoClip) -> Result<Vec<VideoClip>> {
    Ok(window_starts(clip.len())?
        .into_iter()
        .map(|s| clip.slice(s..s + WINDOW, &format!(".w{s}")))
        .collect())
}
