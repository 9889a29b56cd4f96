//! Five-scale MS-SSIM on 8-bit luma.
//!
//! Follows the widely used TensorFlow formulation: an 11-tap Gaussian window
//! (sigma 1.5) applied without padding, contrast-structure terms at the four
//! finer scales and the full SSIM at the coarsest, each clamped at zero
//! before exponentiation. Scales are produced by 2x2 averaging with floored
//! dimensions. When a scale is smaller than the window, the window shrinks
//! to the largest odd size that fits and is renormalised; inputs of at
//! least 176x176 never hit this path.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::media::{Frame, Plane, Sequence};

pub const WEIGHTS: [f64; 5] = [0.0448, 0.2856, 0.3001, 0.2363, 0.1333];
/// Smallest luma dimension accepted (one sample at the coarsest scale).
pub const MIN_DIM: usize = 16;

const WINDOW: usize = 11;
const SIGMA: f64 = 1.5;
const C1: f64 = (0.01 * 255.0) * (0.01 * 255.0);
const C2: f64 = (0.03 * 255.0) * (0.03 * 255.0);

#[derive(Clone)]
struct Image {
    w: usize,
    h: usize,
    px: Vec<f64>,
}

impl Image {
    fn from_plane(p: &Plane) -> Self {
        Image { w: p.width, h: p.height, px: p.data.iter().map(|&v| v as f64).collect() }
    }

    fn halve(&self) -> Self {
        let (w, h) = (self.w / 2, self.h / 2);
        let mut px = Vec::with_capacity(w * h);
        for y in 0..h {
            let (r0, r1) = (&self.px[2 * y * self.w..], &self.px[(2 * y + 1) * self.w..]);
            for x in 0..w {
                px.push((r0[2 * x] + r0[2 * x + 1] + r1[2 * x] + r1[2 * x + 1]) / 4.0);
            }
        }
        Image { w, h, px }
    }
}

fn gaussian(size: usize) -> Vec<f64> {
    let c = (size as f64 - 1.0) / 2.0;
    let g: Vec<f64> = (0..size).map(|i| (-(i as f64 - c).powi(2) / (2.0 * SIGMA * SIGMA)).exp()).collect();
    let s: f64 = g.iter().sum();
    g.into_iter().map(|v| v / s).collect()
}

/// Separable 'valid' filtering.
fn filter(src: &[f64], w: usize, h: usize, k: &[f64]) -> Vec<f64> {
    let n = k.len();
    let (ow, oh) = (w - n + 1, h - n + 1);
    let mut tmp = vec![0.0; ow * h];
    for y in 0..h {
        let row = &src[y * w..(y + 1) * w];
        for x in 0..ow {
            tmp[y * ow + x] = k.iter().zip(&row[x..x + n]).map(|(a, b)| a * b).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = k.iter().enumerate().map(|(j, a)| a * tmp[(y + j) * ow + x]).sum();
        }
    }
    out
}

/// Mean SSIM and mean contrast-structure of one scale.
fn ssim_scale(a: &Image, b: &Image) -> (f64, f64) {
    let size = WINDOW.min(a.w).min(a.h);
    let size = if size.is_multiple_of(2) { size - 1 } else { size };
    let k = gaussian(size);
    let f = |v: Vec<f64>| filter(&v, a.w, a.h, &k);
    let mu_a = f(a.px.clone());
    let mu_b = f(b.px.clone());
    let aa = f(a.px.iter().map(|v| v * v).collect());
    let bb = f(b.px.iter().map(|v| v * v).collect());
    let ab = f(a.px.iter().zip(&b.px).map(|(x, y)| x * y).collect());
    let (mut ssim, mut cs) = (0.0, 0.0);
    for i in 0..mu_a.len() {
        let (ma, mb) = (mu_a[i], mu_b[i]);
        let l = (2.0 * ma * mb + C1) / (ma * ma + mb * mb + C1);
        let c = (2.0 * (ab[i] - ma * mb) + C2) / ((aa[i] - ma * ma) + (bb[i] - mb * mb) + C2);
        ssim += l * c;
        cs += c;
    }
    let n = mu_a.len() as f64;
    (ssim / n, cs / n)
}

/// MS-SSIM of two planes of identical geometry, each at least 16x16.
pub fn ms_ssim(a: &Plane, b: &Plane) -> Result<f64> {
    if a.width != b.width || a.height != b.height {
        return Err(Error::Dimension(format!("{}x{} vs {}x{}", a.width, a.height, b.width, b.height)));
    }
    if a.width < MIN_DIM || a.height < MIN_DIM {
        return Err(Error::Dimension(format!(
            "{}x{} is too small for five scales (minimum {MIN_DIM}x{MIN_DIM})",
            a.width, a.height
        )));
    }
    if a.data == b.data {
        return Ok(1.0);
    }
    let (mut x, mut y) = (Image::from_plane(a), Image::from_plane(b));
    let mut score = 1.0;
    for (s, &w) in WEIGHTS.iter().enumerate() {
        let (ssim, cs) = ssim_scale(&x, &y);
        let term = if s + 1 == WEIGHTS.len() { ssim } else { cs };
        score *= term.max(0.0).powf(w);
        if s + 1 < WEIGHTS.len() {
            x = x.halve();
            y = y.halve();
        }
    }
    Ok(score)
}

pub fn ms_ssim_frames(a: &Frame, b: &Frame) -> Result<f64> {
    ms_ssim(&a.planes[0], &b.planes[0])
}

/// Mean per-frame MS-SSIM, summed in frame order.
pub fn ms_ssim_sequence(a: &Sequence, b: &Sequence) -> Result<f64> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::Dimension(format!("sequences of {} and {} frames", a.len(), b.len())));
    }
    let scores = a.frames.par_iter().zip(&b.frames).map(|(x, y)| ms_ssim_frames(x, y)).collect::<Result<Vec<_>>>()?;
    Ok(scores.iter().sum::<f64>() / scores.len() as f64)
}
