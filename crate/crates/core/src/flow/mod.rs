//! Dense optical flow between consecutive frames.
//!
//! Coarse-to-fine Horn-Schunck: a pyramid with factor 0.5; at each level the
//! second frame is warped by the current flow, the brightness-constancy term
//! is linearized there, and the quadratic energy
//!
//!   E(u,v) = sum (Ix*u + Iy*v + Jt)^2
//!          + alpha^2 * sum over 4-neighbor edges ((u_p-u_q)^2 + (v_p-v_q)^2)
//!
//! is minimized by Gauss-Seidel sweeps. Each pixel update solves its 2x2
//! system exactly, so the energy is non-increasing after every sweep; the
//! solver asserts this. All solver math runs in f64 and is deterministic.

pub mod colorize;

use crate::dataset::VideoClip;
use crate::error::{Error, Result};

pub use colorize::{colorize_flow, GcmpImage};

/// Single-channel image with values in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f32>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::Shape(format!(
                "gray image {width}x{height} wants {} values, got {}",
                width * height,
                data.len()
            )));
        }
        Ok(GrayImage { width, height, data })
    }

    /// ITU-R 601 luma from interleaved 8-bit RGB, scaled to [0, 1].
    pub fn from_rgb8(width: usize, height: usize, rgb: &[u8]) -> Result<Self> {
        if rgb.len() != width * height * 3 {
            return Err(Error::Shape("rgb byte count".into()));
        }
        let data = rgb
            .chunks_exact(3)
            .map(|p| {
                (0.299 * p[0] as f32 + 0.587 * p[1] as f32 + 0.114 * p[2] as f32) / 255.0
            })
            .collect();
        Ok(GrayImage { width, height, data })
    }
}

/// Per-pixel displacement in pixels per frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    pub width: usize,
    pub height: usize,
    pub u: Vec<f32>,
    pub v: Vec<f32>,
}

impl FlowField {
    pub fn zeros(width: usize, height: usize) -> Self {
        FlowField {
            width,
            height,
            u: vec![0.0; width * height],
            v: vec![0.0; width * height],
        }
    }

    pub fn magnitude_at(&self, i: usize) -> f32 {
        (self.u[i] * self.u[i] + self.v[i] * self.v[i]).sqrt()
    }

    pub fn max_magnitude(&self) -> f32 {
        (0..self.u.len())
            .map(|i| self.magnitude_at(i))
            .fold(0.0, f32::max)
    }

    pub fn check_finite(&self) -> Result<()> {
        if self.u.iter().chain(self.v.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("flow field".into()));
        }
        Ok(())
    }
}

/// Solver configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowConfig {
    /// Smoothness weight (images are in [0,1]).
    pub alpha: f64,
    /// Gauss-Seidel sweeps per pyramid level.
    pub iters_per_level: usize,
    /// Cap on pyramid depth; the actual depth also keeps the coarsest level
    /// at `min_level_dim` or larger.
    pub max_levels: usize,
    /// Smallest admissible level extent.
    pub min_level_dim: usize,
}

impl Default for FlowConfig {
    fn default() -> Self {
        FlowConfig {
            alpha: 0.2,
            iters_per_level: 60,
            max_levels: 5,
            min_level_dim: 16,
        }
    }
}

impl FlowConfig {
    /// Pyramid depth for an image: halve until the smaller side would drop
    /// below `min_level_dim`, capped at `max_levels`.
    pub fn levels_for(&self, width: usize, height: usize) -> usize {
        let mut levels = 1;
        let mut dim = width.min(height);
        while levels < self.max_levels && dim / 2 >= self.min_level_dim {
            dim /= 2;
            levels += 1;
        }
        levels
    }
}

// f64 working image for the solver.
#[derive(Clone)]
struct Plane {
    w: usize,
    h: usize,
    data: Vec<f64>,
}

impl Plane {
    fn from_gray(g: &GrayImage) -> Self {
        Plane {
            w: g.width,
            h: g.height,
            data: g.data.iter().map(|&v| v as f64).collect(),
        }
    }

    fn at(&self, x: isize, y: isize) -> f64 {
        // replicate edges
        let xi = x.clamp(0, self.w as isize - 1) as usize;
        let yi = y.clamp(0, self.h as isize - 1) as usize;
        self.data[yi * self.w + xi]
    }

    fn bilinear(&self, x: f64, y: f64) -> f64 {
        let x = x.clamp(0.0, (self.w - 1) as f64);
        let y = y.clamp(0.0, (self.h - 1) as f64);
        let x0 = x.floor();
        let y0 = y.floor();
        let fx = x - x0;
        let fy = y - y0;
        let (x0, y0) = (x0 as isize, y0 as isize);
        let v00 = self.at(x0, y0);
        let v10 = self.at(x0 + 1, y0);
        let v01 = self.at(x0, y0 + 1);
        let v11 = self.at(x0 + 1, y0 + 1);
        v00 * (1.0 - fx) * (1.0 - fy) + v10 * fx * (1.0 - fy) + v01 * (1.0 - fx) * fy + v11 * fx * fy
    }

    /// Half-resolution image: 2x2 block means, replicate on odd extents.
    fn downsample(&self) -> Plane {
        let w = (self.w + 1) / 2;
        let h = (self.h + 1) / 2;
        let mut data = vec![0.0; w * h];
        for y in 0..h {
            for x in 0..w {
                let (x2, y2) = (2 * x as isize, 2 * y as isize);
                data[y * w + x] = 0.25
                    * (self.at(x2, y2) + self.at(x2 + 1, y2) + self.at(x2, y2 + 1) + self.at(x2 + 1, y2 + 1));
            }
        }
        Plane { w, h, data }
    }
}

// One pyramid level of the solver state.
struct Level {
    a: Plane,
    b: Plane,
}

fn upsample_field(src: &[f64], sw: usize, sh: usize, dw: usize, dh: usize, scale: f64) -> Vec<f64> {
    let plane = Plane {
        w: sw,
        h: sh,
        data: src.to_vec(),
    };
    let mut out = vec![0.0; dw * dh];
    let rx = sw as f64 / dw as f64;
    let ry = sh as f64 / dh as f64;
    for y in 0..dh {
        for x in 0..dw {
            let sx = (x as f64 + 0.5) * rx - 0.5;
            let sy = (y as f64 + 0.5) * ry - 0.5;
            out[y * dw + x] = plane.bilinear(sx, sy) * scale;
        }
    }
    out
}

/// Spatial/temporal derivatives of the linearized data term, averaged over
/// the reference frame and the warped moving frame; replicate edges.
fn derivatives(a: &Plane, bw: &Plane) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let (w, h) = (a.w, a.h);
    let mut ix = vec![0.0; w * h];
    let mut iy = vec![0.0; w * h];
    let mut it = vec![0.0; w * h];
    for y in 0..h as isize {
        for x in 0..w as isize {
            let i = y as usize * w + x as usize;
            ix[i] = 0.25 * (a.at(x + 1, y) - a.at(x - 1, y) + bw.at(x + 1, y) - bw.at(x - 1, y));
            iy[i] = 0.25 * (a.at(x, y + 1) - a.at(x, y - 1) + bw.at(x, y + 1) - bw.at(x, y - 1));
            it[i] = bw.at(x, y) - a.at(x, y);
        }
    }
    (ix, iy, it)
}

fn hs_energy(u: &[f64], v: &[f64], ix: &[f64], iy: &[f64], jt: &[f64], w: usize, h: usize, alpha2: f64) -> f64 {
    let mut e = 0.0;
    for i in 0..w * h {
        let r = ix[i] * u[i] + iy[i] * v[i] + jt[i];
        e += r * r;
    }
    let mut s = 0.0;
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            if x + 1 < w {
                let j = i + 1;
                s += (u[i] - u[j]).powi(2) + (v[i] - v[j]).powi(2);
            }
            if y + 1 < h {
                let j = i + w;
                s += (u[i] - u[j]).powi(2) + (v[i] - v[j]).powi(2);
            }
        }
    }
    e + alpha2 * s
}

/// One in-place Gauss-Seidel sweep in scanline order. Each pixel update is
/// the exact minimizer of the energy over (u_p, v_p) with neighbors fixed.
fn gauss_seidel_sweep(
    u: &mut [f64],
    v: &mut [f64],
    ix: &[f64],
    iy: &[f64],
    jt: &[f64],
    w: usize,
    h: usize,
    alpha2: f64,
) {
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let mut su = 0.0;
            let mut sv = 0.0;
            let mut n = 0.0;
            if x > 0 {
                su += u[i - 1];
                sv += v[i - 1];
                n += 1.0;
            }
            if x + 1 < w {
                su += u[i + 1];
                sv += v[i + 1];
                n += 1.0;
            }
            if y > 0 {
                su += u[i - w];
                sv += v[i - w];
                n += 1.0;
            }
            if y + 1 < h {
                su += u[i + w];
                sv += v[i + w];
                n += 1.0;
            }
            let ubar = su / n;
            let vbar = sv / n;
            let denom = alpha2 * n + ix[i] * ix[i] + iy[i] * iy[i];
            let r = (ix[i] * ubar + iy[i] * vbar + jt[i]) / denom;
            u[i] = ubar - ix[i] * r;
            v[i] = vbar - iy[i] * r;
        }
    }
}

/// Energy trace of one pyramid level: value before iterating, then after
/// every sweep.
pub type EnergyTrace = Vec<f64>;

/// Coarse-to-fine Horn-Schunck flow from `frame_a` to `frame_b`, plus the
/// per-level energy traces (outermost = coarsest level).
pub fn compute_flow_traced(
    frame_a: &GrayImage,
    frame_b: &GrayImage,
    cfg: &FlowConfig,
) -> Result<(FlowField, Vec<EnergyTrace>)> {
    if frame_a.width != frame_b.width || frame_a.height != frame_b.height {
        return Err(Error::Shape(format!(
            "flow frames {}x{} vs {}x{}",
            frame_a.width, frame_a.height, frame_b.width, frame_b.height
        )));
    }
    if frame_a.width < 16 || frame_a.height < 16 {
        return Err(Error::Input("flow frames must be at least 16x16".into()));
    }
    if cfg.alpha <= 0.0 || cfg.iters_per_level == 0 {
        return Err(Error::Config("flow solver needs alpha > 0 and iterations > 0".into()));
    }

    let levels = cfg.levels_for(frame_a.width, frame_a.height);
    let mut pyramid = vec![Level {
        a: Plane::from_gray(frame_a),
        b: Plane::from_gray(frame_b),
    }];
    for _ in 1..levels {
        let prev = pyramid.last().unwrap();
        pyramid.push(Level {
            a: prev.a.downsample(),
            b: prev.b.downsample(),
        });
    }

    let alpha2 = cfg.alpha * cfg.alpha;
    let coarsest = pyramid.last().unwrap();
    let mut u = vec![0.0f64; coarsest.a.w * coarsest.a.h];
    let mut v = vec![0.0f64; coarsest.a.w * coarsest.a.h];
    let mut traces = Vec::with_capacity(levels);

    for (li, level) in pyramid.iter().enumerate().rev() {
        let (w, h) = (level.a.w, level.a.h);
        if li + 1 < levels {
            // arriving from the coarser level: upsample and rescale
            let prev = &pyramid[li + 1];
            u = upsample_field(&u, prev.a.w, prev.a.h, w, h, w as f64 / prev.a.w as f64);
            v = upsample_field(&v, prev.a.w, prev.a.h, w, h, h as f64 / prev.a.h as f64);
        }

        // warp B by the current flow and linearize the data term there
        let mut bw = level.b.clone();
        let mut warped = vec![0.0; w * h];
        for y in 0..h {
            for x in 0..w {
                let i = y * w + x;
                warped[i] = level.b.bilinear(x as f64 + u[i], y as f64 + v[i]);
            }
        }
        bw.data = warped;
        let (ix, iy, it) = derivatives(&level.a, &bw);
        // Jt folds the linearization point into the constant term so the
        // unknowns are the total flow, not the increment
        let jt: Vec<f64> = (0..w * h).map(|i| it[i] - ix[i] * u[i] - iy[i] * v[i]).collect();

        let mut trace = Vec::with_capacity(cfg.iters_per_level + 1);
        trace.push(hs_energy(&u, &v, &ix, &iy, &jt, w, h, alpha2));
        for _ in 0..cfg.iters_per_level {
            gauss_seidel_sweep(&mut u, &mut v, &ix, &iy, &jt, w, h, alpha2);
            let e = hs_energy(&u, &v, &ix, &iy, &jt, w, h, alpha2);
            let prev = *trace.last().unwrap();
            debug_assert!(
                e <= prev + 1e-9 * prev.abs().max(1.0),
                "solver energy increased: {prev} -> {e}"
            );
            trace.push(e);
        }
        traces.push(trace);
    }

    let field = FlowField {
        width: frame_a.width,
        height: frame_a.height,
        u: u.into_iter().map(|x| x as f32).collect(),
        v: v.into_iter().map(|x| x as f32).collect(),
    };
    field.check_finite()?;
    Ok((field, traces))
}

/// Dense flow from `frame_a` to `frame_b`.
pub fn compute_flow(frame_a: &GrayImage, frame_b: &GrayImage, cfg: &FlowConfig) -> Result<FlowField> {
    Ok(compute_flow_traced(frame_a, frame_b, cfg)?.0)
}

/// GCMP images for a whole clip: one per consecutive frame pair, colorized
/// with a shared normalization (the max flow magnitude over the clip).
pub fn flow_sequence(clip: &VideoClip, cfg: &FlowConfig) -> Result<Vec<GcmpImage>> {
    Ok(flow_fields_for_clip(clip, cfg)?.1)
}

/// Raw fields and colorized images for a clip; both have len = frames - 1.
pub fn flow_fields_for_clip(
    clip: &VideoClip,
    cfg: &FlowConfig,
) -> Result<(Vec<FlowField>, Vec<GcmpImage>)> {
    if clip.len() < 2 {
        return Err(Error::Input(format!(
            "clip {} has {} frame(s); flow needs at least 2",
            clip.id,
            clip.len()
        )));
    }
    let grays: Vec<GrayImage> = clip
        .frames()
        .iter()
        .map(|f| GrayImage::from_rgb8(f.width(), f.height(), f.rgb()))
        .collect::<Result<_>>()?;

    use rayon::prelude::*;
    let fields: Vec<FlowField> = (0..grays.len() - 1)
        .into_par_iter()
        .map(|i| compute_flow(&grays[i], &grays[i + 1], cfg))
        .collect::<Result<_>>()?;

    let norm = fields
        .iter()
        .map(FlowField::max_magnitude)
        .fold(0.0f32, f32::max)
        .max(f32::EPSILON);
    let images = fields
        .iter()
        .map(|f| colorize_flow(f, norm))
        .collect::<Result<_>>()?;
    Ok((fields, images))
}

/// Writes a field as "FLO1" magic, width u32, height u32, then interleaved
/// little-endian f32 (u, v) per pixel in row-major order.
pub fn write_flo<W: std::io::Write>(mut w: W, field: &FlowField) -> Result<()> {
    w.write_all(b"FLO1")?;
    w.write_all(&(field.width as u32).to_le_bytes())?;
    w.write_all(&(field.height as u32).to_le_bytes())?;
    for i in 0..field.u.len() {
        w.write_all(&field.u[i].to_le_bytes())?;
        w.write_all(&field.v[i].to_le_bytes())?;
    }
    Ok(())
}

pub fn read_flo<R: std::io::Read>(mut r: R) -> Result<FlowField> {
    let bad = |d: String| Error::Format { kind: "flo", detail: d };
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != b"FLO1" {
        return Err(bad(format!("bad magic {magic:?}")));
    }
    let mut b4 = [0u8; 4];
    r.read_exact(&mut b4)?;
    let width = u32::from_le_bytes(b4) as usize;
    r.read_exact(&mut b4)?;
    let height = u32::from_le_bytes(b4) as usize;
    let mut u = vec![0.0f32; width * height];
    let mut v = vec![0.0f32; width * height];
    for i in 0..width * height {
        r.read_exact(&mut b4)?;
        u[i] = f32::from_le_bytes(b4);
        r.read_exact(&mut b4)?;
        v[i] = f32::from_le_bytes(b4);
    }
    let f = FlowField { width, height, u, v };
    f.check_finite()?;
    Ok(f)
}
