//! Seeded synthetic event generator.
//!
//! Each clip shows moving-dot "players" over a randomized court-colored
//! texture. The camera pan (background translation) and the collective dot
//! trajectories carry the class signal; colors are nuisance, randomized per
//! clip, so raw-pixel models face the variation that motion-based models
//! ignore. Structural guarantees:
//!
//! * layup and other-two-point clips share their occ-stage motion
//!   distribution and differ only in the pre stage;
//! * success vs failure is encoded purely in the post-stage spatial
//!   configuration of the dots (plus the short drift into it);
//! * the whole dataset is a pure function of the seed: clip `i` renders
//!   from an rng derived as seed XOR i, so parallel generation cannot
//!   change the output.

use rand::Rng;
use rayon::prelude::*;

use super::{BaseEvent, ClipManifest, EventLabel, Frame, ManifestRecord, Outcome, Split, VideoClip, POST_LEN, PRE_LEN};
use crate::error::{Error, Result};
use crate::rng::clip_rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthConfig {
    /// Base event classes; the taxonomy is fixed, so this must be 6.
    pub classes: usize,
    /// Clips generated per base class (train + test).
    pub clips_per_class: usize,
    /// Of those, how many go to the test split (taken from the end).
    pub test_per_class: usize,
    pub width: usize,
    pub height: usize,
    /// Frames per clip: 18 pre + occ + 10 post.
    pub frames: usize,
    pub fps: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            classes: 6,
            clips_per_class: 20,
            test_per_class: 0,
            width: 64,
            height: 64,
            frames: 60,
            fps: 30.0,
            seed: 17,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.classes != BaseEvent::ALL.len() {
            return Err(Error::Config(format!(
                "generator models exactly {} base classes, got {}",
                BaseEvent::ALL.len(),
                self.classes
            )));
        }
        if self.clips_per_class == 0 {
            return Err(Error::Config("clips_per_class must be positive".into()));
        }
        if self.test_per_class > self.clips_per_class {
            return Err(Error::Config("test_per_class exceeds clips_per_class".into()));
        }
        if self.width < 16 || self.height < 16 {
            return Err(Error::Config("frames must be at least 16x16".into()));
        }
        if self.frames <= PRE_LEN + POST_LEN {
            return Err(Error::Config(format!(
                "clip length {} cannot hold {}+occ+{}",
                self.frames, PRE_LEN, POST_LEN
            )));
        }
        Ok(())
    }

    pub fn occ_len(&self) -> usize {
        self.frames - PRE_LEN - POST_LEN
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Stage {
    Pre,
    Occ,
    Post,
}

fn stage_of(t: usize, frames: usize) -> (Stage, usize) {
    if t < PRE_LEN {
        (Stage::Pre, t)
    } else if t < frames - POST_LEN {
        (Stage::Occ, t - PRE_LEN)
    } else {
        (Stage::Post, t - (frames - POST_LEN))
    }
}

/// Camera pan velocity (pixels/frame of scene translation) for a class at a
/// stage. These direction signatures are what the flow classifiers learn:
/// every class owns a distinct hue pattern in the stage that identifies it,
/// and layup == other-two-point in the occ stage by construction.
fn pan_profile(base: BaseEvent, stage: Stage, t: usize, occ_len: usize) -> (f64, f64) {
    use BaseEvent::*;
    match (base, stage) {
        (_, Stage::Post) => (0.0, 0.0),
        (ThreePoint, Stage::Pre) => (1.0, 0.0),
        (ThreePoint, Stage::Occ) => (2.2, -0.4),
        (FreeThrow, _) => (0.0, 0.0),
        (Layup, Stage::Pre) => (1.5, 1.5),
        (OtherTwoPoint, Stage::Pre) => {
            // lateral weave: direction flips every 6 frames
            let sign = if (t / 6) % 2 == 0 { 1.0 } else { -1.0 };
            (1.5 * sign, 0.0)
        }
        (Layup | OtherTwoPoint, Stage::Occ) => (0.0, -1.9),
        (SlamDunk, Stage::Pre) => (-1.3, 0.0),
        (SlamDunk, Stage::Occ) => (-1.7, -1.7),
        (Steal, Stage::Pre) => (1.1, 0.0),
        (Steal, Stage::Occ) => {
            // turnover: play direction reverses mid-stage
            if t < occ_len / 2 {
                (1.8, 1.8)
            } else {
                (-1.8, 1.8)
            }
        }
    }
}

const DOTS: usize = 8;
const BG_GRID: usize = 12;
const DOT_RADIUS: f64 = 2.2;

fn luma(rgb: [u8; 3]) -> f64 {
    0.299 * rgb[0] as f64 + 0.587 * rgb[1] as f64 + 0.114 * rgb[2] as f64
}

fn rand_color(rng: &mut impl Rng) -> [u8; 3] {
    [rng.gen_range(20..=235), rng.gen_range(20..=235), rng.gen_range(20..=235)]
}

struct BgTexture {
    cells: Vec<[f64; 3]>, // BG_GRID x BG_GRID
    cell_px: f64,
}

impl BgTexture {
    fn sample(&self, x: f64, y: f64) -> [f64; 3] {
        let tx = x / self.cell_px;
        let ty = y / self.cell_px;
        let x0 = tx.floor();
        let y0 = ty.floor();
        let fx = tx - x0;
        let fy = ty - y0;
        let n = BG_GRID as i64;
        let gx0 = (x0 as i64).rem_euclid(n) as usize;
        let gy0 = (y0 as i64).rem_euclid(n) as usize;
        let gx1 = (x0 as i64 + 1).rem_euclid(n) as usize;
        let gy1 = (y0 as i64 + 1).rem_euclid(n) as usize;
        let mut out = [0.0; 3];
        for c in 0..3 {
            let v00 = self.cells[gy0 * BG_GRID + gx0][c];
            let v10 = self.cells[gy0 * BG_GRID + gx1][c];
            let v01 = self.cells[gy1 * BG_GRID + gx0][c];
            let v11 = self.cells[gy1 * BG_GRID + gx1][c];
            out[c] = v00 * (1.0 - fx) * (1.0 - fy)
                + v10 * fx * (1.0 - fy)
                + v01 * (1.0 - fx) * fy
                + v11 * fx * fy;
        }
        out
    }
}

struct Dot {
    x: f64,
    y: f64,
    color: [u8; 3],
}

fn draw_disk(frame: &mut Frame, cx: f64, cy: f64, radius: f64, color: [u8; 3]) {
    let (w, h) = (frame.width() as isize, frame.height() as isize);
    let x0 = ((cx - radius - 1.0).floor() as isize).max(0);
    let x1 = ((cx + radius + 1.0).ceil() as isize).min(w - 1);
    let y0 = ((cy - radius - 1.0).floor() as isize).max(0);
    let y1 = ((cy + radius + 1.0).ceil() as isize).min(h - 1);
    for y in y0..=y1 {
        for x in x0..=x1 {
            let d = ((x as f64 - cx).powi(2) + (y as f64 - cy).powi(2)).sqrt();
            let alpha = (radius + 0.5 - d).clamp(0.0, 1.0);
            if alpha > 0.0 {
                let old = frame.pixel(x as usize, y as usize);
                let mut px = [0u8; 3];
                for c in 0..3 {
                    px[c] = (alpha * color[c] as f64 + (1.0 - alpha) * old[c] as f64).round() as u8;
                }
                frame.set_pixel(x as usize, y as usize, px);
            }
        }
    }
}

fn render_clip(cfg: &SynthConfig, base: BaseEvent, outcome: Outcome, clip_index: u64, id: &str) -> Result<VideoClip> {
    let mut rng = clip_rng(cfg.seed, clip_index);
    let (w, h) = (cfg.width, cfg.height);
    let occ_len = cfg.occ_len();

    let bg = BgTexture {
        cells: (0..BG_GRID * BG_GRID)
            .map(|_| {
                [
                    rng.gen_range(30.0..=225.0),
                    rng.gen_range(30.0..=225.0),
                    rng.gen_range(30.0..=225.0),
                ]
            })
            .collect(),
        cell_px: w as f64 / BG_GRID as f64,
    };
    let bg_mean_luma = bg.cells.iter().map(|c| 0.299 * c[0] + 0.587 * c[1] + 0.114 * c[2]).sum::<f64>()
        / (BG_GRID * BG_GRID) as f64;

    // team uniforms: random colors, but keep them visible over the court
    let team_color = |rng: &mut rand_chacha::ChaCha12Rng| {
        for _ in 0..16 {
            let c = rand_color(rng);
            if (luma(c) - bg_mean_luma).abs() >= 60.0 {
                return c;
            }
        }
        if bg_mean_luma > 127.0 {
            [15, 15, 25]
        } else {
            [240, 240, 230]
        }
    };
    let colors = [team_color(&mut rng), team_color(&mut rng)];

    let mut dots: Vec<Dot> = (0..DOTS)
        .map(|i| Dot {
            x: rng.gen_range(6.0..w as f64 - 6.0),
            y: rng.gen_range(10.0..h as f64 - 6.0),
            color: colors[i % 2],
        })
        .collect();

    // success: line up near the basket; failure: scramble low for the rebound
    let post_targets: Vec<(f64, f64)> = (0..DOTS)
        .map(|i| {
            let fx = (i as f64 + 0.5) / DOTS as f64;
            match outcome {
                Outcome::Failure => {
                    let ang = fx * std::f64::consts::TAU;
                    (w as f64 / 2.0 + 7.0 * ang.cos(), h as f64 - 11.0 + 4.0 * ang.sin())
                }
                _ => (6.0 + fx * (w as f64 - 12.0), 11.0),
            }
        })
        .collect();

    let amp_pre = rng.gen_range(0.85..=1.15);
    let amp_occ = rng.gen_range(0.85..=1.15);
    let basket = (w / 2, 3);

    let mut pan = (0.0f64, 0.0f64);
    let mut frames = Vec::with_capacity(cfg.frames);
    for t in 0..cfg.frames {
        let (stage, ts) = stage_of(t, cfg.frames);

        let mut frame = Frame::filled(w, h, [0, 0, 0]);
        for y in 0..h {
            for x in 0..w {
                let s = bg.sample(x as f64 - pan.0, y as f64 - pan.1);
                frame.set_pixel(x, y, [s[0].round() as u8, s[1].round() as u8, s[2].round() as u8]);
            }
        }
        // stationary on-screen basket marker
        for dy in 0..2 {
            for dx in 0..5 {
                let (bx, by) = (basket.0 - 2 + dx, basket.1 + dy);
                frame.set_pixel(bx, by, [245, 245, 245]);
            }
        }
        for dot in &dots {
            draw_disk(&mut frame, dot.x, dot.y, DOT_RADIUS, dot.color);
        }
        frames.push(frame);

        // advance the camera
        let (vx, vy) = pan_profile(base, stage, ts, occ_len);
        let amp = match stage {
            Stage::Pre => amp_pre,
            Stage::Occ => amp_occ,
            Stage::Post => 1.0,
        };
        pan.0 += vx * amp + rng.gen_range(-0.08..=0.08);
        pan.1 += vy * amp + rng.gen_range(-0.08..=0.08);

        // advance the players
        for (i, dot) in dots.iter_mut().enumerate() {
            let (jx, jy) = (rng.gen_range(-0.15..=0.15), rng.gen_range(-0.15..=0.15));
            match stage {
                Stage::Post => {
                    // settle into the outcome formation
                    let (tx, ty) = post_targets[i];
                    dot.x += 0.55 * (tx - dot.x) + jx * 0.3;
                    dot.y += 0.55 * (ty - dot.y) + jy * 0.3;
                }
                Stage::Occ => {
                    // collective surge toward the basket, except steals scatter
                    let rate = match base {
                        BaseEvent::Steal => -0.02,
                        BaseEvent::FreeThrow => 0.0,
                        _ => 0.035,
                    };
                    dot.x += rate * (basket.0 as f64 - dot.x) + jx;
                    dot.y += rate * (basket.1 as f64 + 8.0 - dot.y) + jy;
                }
                Stage::Pre => {
                    dot.x += jx;
                    dot.y += jy;
                }
            }
            dot.x = dot.x.clamp(3.0, w as f64 - 4.0);
            dot.y = dot.y.clamp(3.0, h as f64 - 4.0);
        }
    }
    VideoClip::new(id, cfg.fps, frames)
}

/// Generates the full dataset: clips plus a manifest whose records mark the
/// occ interval [18, frames-11] so the standard extension reproduces each
/// clip exactly.
pub fn gen_synthetic(cfg: &SynthConfig) -> Result<(Vec<VideoClip>, ClipManifest)> {
    cfg.validate()?;

    struct Plan {
        base: BaseEvent,
        outcome: Outcome,
        split: Split,
        id: String,
        index: u64,
    }
    let mut plans = Vec::new();
    for (bi, base) in BaseEvent::ALL.iter().enumerate() {
        for k in 0..cfg.clips_per_class {
            let outcome = if *base == BaseEvent::Steal {
                Outcome::NotApplicable
            } else if k % 2 == 0 {
                Outcome::Success
            } else {
                Outcome::Failure
            };
            let split = if k < cfg.clips_per_class - cfg.test_per_class {
                Split::Train
            } else {
                Split::Test
            };
            plans.push(Plan {
                base: *base,
                outcome,
                split,
                id: format!("{}-{k:03}", base.name()),
                index: (bi * cfg.clips_per_class + k) as u64,
            });
        }
    }

    let clips: Vec<VideoClip> = plans
        .par_iter()
        .map(|p| render_clip(cfg, p.base, p.outcome, p.index, &p.id))
        .collect::<Result<_>>()?;

    let records = plans
        .iter()
        .map(|p| {
            Ok(ManifestRecord {
                id: p.id.clone(),
                start: PRE_LEN,
                end: cfg.frames - POST_LEN - 1,
                label: EventLabel::new(p.base, p.outcome)?,
                split: p.split,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((clips, ClipManifest { records }))
}
