//! Flow-field colorization on the standard optical-flow color wheel.
//!
//! Direction maps to hue, magnitude (normalized by a per-clip constant and
//! clamped to 1) to saturation. Zero motion renders as pure white, so still
//! regions are visually neutral.

use super::FlowField;
use crate::error::{Error, Result};

/// Three-channel 8-bit image of colorized motion.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GcmpImage {
    pub width: usize,
    pub height: usize,
    /// Interleaved RGB, row-major.
    pub rgb: Vec<u8>,
}

impl GcmpImage {
    pub fn rgb(&self) -> &[u8] {
        &self.rgb
    }

    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * self.width + x) * 3;
        [self.rgb[i], self.rgb[i + 1], self.rgb[i + 2]]
    }
}

// Segment lengths of the color wheel: red-yellow, yellow-green, green-cyan,
// cyan-blue, blue-magenta, magenta-red.
const RY: usize = 15;
const YG: usize = 6;
const GC: usize = 4;
const CB: usize = 11;
const BM: usize = 13;
const MR: usize = 6;
pub const WHEEL_SIZE: usize = RY + YG + GC + CB + BM + MR;

/// The 55-entry color wheel, channels in [0, 1].
pub fn color_wheel() -> [[f32; 3]; WHEEL_SIZE] {
    let mut wheel = [[0.0f32; 3]; WHEEL_SIZE];
    let mut k = 0;
    for i in 0..RY {
        wheel[k] = [1.0, i as f32 / RY as f32, 0.0];
        k += 1;
    }
    for i in 0..YG {
        wheel[k] = [1.0 - i as f32 / YG as f32, 1.0, 0.0];
        k += 1;
    }
    for i in 0..GC {
        wheel[k] = [0.0, 1.0, i as f32 / GC as f32];
        k += 1;
    }
    for i in 0..CB {
        wheel[k] = [0.0, 1.0 - i as f32 / CB as f32, 1.0];
        k += 1;
    }
    for i in 0..BM {
        wheel[k] = [i as f32 / BM as f32, 0.0, 1.0];
        k += 1;
    }
    for i in 0..MR {
        wheel[k] = [1.0, 0.0, 1.0 - i as f32 / MR as f32];
        k += 1;
    }
    wheel
}

/// Color of one displacement with magnitude pre-normalized to [0, 1].
fn compute_color(u: f32, v: f32, rad: f32, wheel: &[[f32; 3]; WHEEL_SIZE]) -> [u8; 3] {
    let angle = (-v as f64).atan2(-u as f64) / std::f64::consts::PI; // [-1, 1]
    let fk = (angle + 1.0) / 2.0 * (WHEEL_SIZE - 1) as f64;
    let k0 = (fk.floor() as usize).min(WHEEL_SIZE - 1);
    let k1 = (k0 + 1) % WHEEL_SIZE;
    let f = (fk - k0 as f64) as f32;
    let mut out = [0u8; 3];
    for c in 0..3 {
        let col = (1.0 - f) * wheel[k0][c] + f * wheel[k1][c];
        // blend toward white as magnitude drops
        let col = 1.0 - rad * (1.0 - col);
        out[c] = (255.0 * col).round().clamp(0.0, 255.0) as u8;
    }
    out
}

/// Colorizes a field; `norm` is the shared normalization constant (the
/// per-clip maximum magnitude). Magnitudes above `norm` clamp to full
/// saturation, zero magnitude is exactly white.
pub fn colorize_flow(flow: &FlowField, norm: f32) -> Result<GcmpImage> {
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(Error::Config(format!("colorize norm must be positive, got {norm}")));
    }
    flow.check_finite()?;
    let wheel = color_wheel();
    let mut rgb = Vec::with_capacity(flow.u.len() * 3);
    for i in 0..flow.u.len() {
        let mag = flow.magnitude_at(i);
        if mag == 0.0 {
            rgb.extend_from_slice(&[255, 255, 255]);
        } else {
            let rad = (mag / norm).min(1.0);
            rgb.extend_from_slice(&compute_color(flow.u[i], flow.v[i], rad, &wheel));
        }
    }
    Ok(GcmpImage {
        width: flow.width,
        height: flow.height,
        rgb,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform_field(u: f32, v: f32) -> FlowField {
        let mut f = FlowField::zeros(4, 3);
        f.u.iter_mut().for_each(|x| *x = u);
        f.v.iter_mut().for_each(|x| *x = v);
        f
    }

    #[test]
    fn zero_flow_is_all_white() {
        let f = FlowField::zeros(5, 5);
        let img = colorize_flow(&f, 1.0).unwrap();
        assert!(img.rgb.iter().all(|&c| c == 255));
    }

    #[test]
    fn full_magnitude_is_fully_saturated_uniform() {
        let f = uniform_field(0.6, -0.8); // magnitude 1
        let img = colorize_flow(&f, 1.0).unwrap();
        let first = img.pixel(0, 0);
        for y in 0..3 {
            for x in 0..4 {
                assert_eq!(img.pixel(x, y), first);
            }
        }
        // fully saturated means at least one channel far from white
        assert!(first.iter().any(|&c| c < 128));
    }

    #[test]
    fn clamps_over_norm_magnitudes() {
        let a = colorize_flow(&uniform_field(2.0, 0.0), 1.0).unwrap();
        let b = colorize_flow(&uniform_field(1.0, 0.0), 1.0).unwrap();
        assert_eq!(a.pixel(0, 0), b.pixel(0, 0));
    }

    #[test]
    fn non_positive_norm_rejected() {
        let f = uniform_field(1.0, 0.0);
        assert!(colorize_flow(&f, 0.0).is_err());
        assert!(colorize_flow(&f, -1.0).is_err());
    }

    // Tabulated wheel oracle: expected colors for the four cardinal
    // directions at full saturation, worked out by hand from the published
    // segment table (RY 15, YG 6, GC 4, CB 11, BM 13, MR 6; 55 entries).
    // atan2(-v, -u) with signed zeros places the four directions at:
    //   (+1, 0): atan2(-0,-1) = -pi -> index 0, pure red       (1, 0, 0)
    //   (-1, 0): atan2(-0,+1) = -0  -> index 27, cyan-blue i=2 (0, 9/11, 1)
    //   (0, +1): atan2(-1,-0) = -pi/2 -> 13.5, red-yellow blend (1, 13.5/15, 0)
    //   (0, -1): atan2(+1,-0) = +pi/2 -> 40.5, blue-magenta blend (4.5/13, 0, 1)
    #[test]
    fn cardinal_directions_match_wheel_table() {
        let cases: [((f32, f32), [f64; 3]); 4] = [
            ((1.0, 0.0), [255.0, 0.0, 0.0]),
            ((-1.0, 0.0), [0.0, 255.0 * 9.0 / 11.0, 255.0]),
            ((0.0, 1.0), [255.0, 255.0 * 13.5 / 15.0, 0.0]),
            ((0.0, -1.0), [255.0 * 4.5 / 13.0, 0.0, 255.0]),
        ];
        for ((u, v), want) in cases {
            let img = colorize_flow(&uniform_field(u, v), 1.0).unwrap();
            let got = img.pixel(0, 0);
            for c in 0..3 {
                assert!(
                    (got[c] as f64 - want[c]).abs() <= 1.0,
                    "({u},{v}) channel {c}: got {} want {:.1}",
                    got[c],
                    want[c]
                );
            }
        }
        // opposite directions land on clearly different wheel sectors
        let right = colorize_flow(&uniform_field(1.0, 0.0), 1.0).unwrap().pixel(0, 0);
        let left = colorize_flow(&uniform_field(-1.0, 0.0), 1.0).unwrap().pixel(0, 0);
        assert!(right[0] > 200 && left[0] < 50);
        assert!(left[2] > 200 && right[2] < 100);
    }

    #[test]
    fn channels_always_in_range_by_type() {
        // u8 output guarantees [0,255]; spot-check saturation blending math
        let f = uniform_field(0.3, 0.4); // magnitude 0.5 of norm 1
        let img = colorize_flow(&f, 1.0).unwrap();
        let p = img.pixel(0, 0);
        assert!(p.iter().all(|&c| c >= 127));
    }
}
