//! 2x bilinear down/upsampling used as a coding-choice preprocessing step.
//!
//! Downsampling averages 2x2 blocks. Upsampling places each source sample at
//! the centre of the 2x2 block it came from and interpolates bilinearly with
//! weights (3/4, 1/4), replicating borders. Both round half to even.

use super::{chroma_dim, Frame, Plane, Sequence};
use crate::error::{Error, Result};

/// `sum / 2^shift` rounded half to even, for non-negative `sum`.
#[inline]
fn div_round_even(sum: u32, shift: u32) -> u8 {
    let q = sum >> shift;
    let r = sum & ((1 << shift) - 1);
    let half = 1 << (shift - 1);
    let q = if r > half || (r == half && q & 1 == 1) { q + 1 } else { q };
    q.min(255) as u8
}

fn downsample_plane(src: &Plane, dw: usize, dh: usize) -> Plane {
    let mut out = Plane::new(dw, dh, 0);
    let mx = src.width - 1;
    let my = src.height - 1;
    for y in 0..dh {
        let (y0, y1) = ((2 * y).min(my), (2 * y + 1).min(my));
        for x in 0..dw {
            let (x0, x1) = ((2 * x).min(mx), (2 * x + 1).min(mx));
            let sum = src.at(x0, y0) as u32 + src.at(x1, y0) as u32 + src.at(x0, y1) as u32 + src.at(x1, y1) as u32;
            out.set(x, y, div_round_even(sum, 2));
        }
    }
    out
}

/// Taps for output index `i`: (near source index, far source index), weights 3 and 1.
#[inline]
fn taps(i: usize, src_len: usize) -> (usize, usize) {
    let near = (i / 2).min(src_len - 1);
    let far = if i.is_multiple_of(2) { near.saturating_sub(1) } else { (i / 2 + 1).min(src_len - 1) };
    (near, far)
}

fn upsample_plane(src: &Plane, dw: usize, dh: usize) -> Plane {
    let mut out = Plane::new(dw, dh, 0);
    let xtaps: Vec<_> = (0..dw).map(|x| taps(x, src.width)).collect();
    for y in 0..dh {
        let (yn, yf) = taps(y, src.height);
        for (x, &(xn, xf)) in xtaps.iter().enumerate() {
            let near = 3 * src.at(xn, yn) as u32 + src.at(xf, yn) as u32;
            let far = 3 * src.at(xn, yf) as u32 + src.at(xf, yf) as u32;
            out.set(x, y, div_round_even(3 * near + far, 4));
        }
    }
    out
}

/// Halves both dimensions (floor) by 2x2 averaging.
pub fn downsample2x(frame: &Frame) -> Result<Frame> {
    if frame.width < 2 || frame.height < 2 {
        return Err(Error::Dimension(format!(
            "cannot downsample a {}x{} frame",
            frame.width, frame.height
        )));
    }
    let (w, h) = (frame.width / 2, frame.height / 2);
    let (cw, ch) = (chroma_dim(w), chroma_dim(h));
    let planes = [
        downsample_plane(&frame.planes[0], w, h),
        downsample_plane(&frame.planes[1], cw, ch),
        downsample_plane(&frame.planes[2], cw, ch),
    ];
    Ok(Frame { width: w, height: h, planes, display_index: frame.display_index })
}

/// Bilinear 2x upsampling to exactly `target_w` x `target_h`, which must be
/// twice the source dimensions, optionally plus one.
pub fn upsample2x(frame: &Frame, target_w: usize, target_h: usize) -> Result<Frame> {
    let ok = |t: usize, s: usize| t == 2 * s || t == 2 * s + 1;
    if !ok(target_w, frame.width) || !ok(target_h, frame.height) {
        return Err(Error::Dimension(format!(
            "cannot upsample {}x{} to {target_w}x{target_h}",
            frame.width, frame.height
        )));
    }
    let (cw, ch) = (chroma_dim(target_w), chroma_dim(target_h));
    let planes = [
        upsample_plane(&frame.planes[0], target_w, target_h),
        upsample_plane(&frame.planes[1], cw, ch),
        upsample_plane(&frame.planes[2], cw, ch),
    ];
    Ok(Frame { width: target_w, height: target_h, planes, display_index: frame.display_index })
}

pub fn downsample_sequence(seq: &Sequence) -> Result<Sequence> {
    let frames = seq.frames.iter().map(downsample2x).collect::<Result<Vec<_>>>()?;
    Ok(Sequence { frames, fps: seq.fps, name: seq.name.clone() })
}

pub fn upsample_sequence(seq: &Sequence, target_w: usize, target_h: usize) -> Result<Sequence> {
    let frames = seq
        .frames
        .iter()
        .map(|f| upsample2x(f, target_w, target_h))
        .collect::<Result<Vec<_>>>()?;
    Ok(Sequence { frames, fps: seq.fps, name: seq.name.clone() })
}
