#![allow(dead_code)]

use std::path::PathBuf;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rdvk_core::media::{Fps, Frame, Plane, Sequence};

pub const REFERENCE_PAIRS: [&str; 3] = ["camera", "coins", "astronaut"];

pub fn data_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests").join("data").join(name)
}

/// Reads a binary 8-bit PGM.
pub fn load_pgm(name: &str) -> Plane {
    let bytes = std::fs::read(data_path(name)).unwrap();
    let mut fields = Vec::new();
    let mut pos = 0;
    while fields.len() < 4 {
        while bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        fields.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    assert_eq!(fields[0], "P5");
    assert_eq!(fields[3], "255");
    let (w, h): (usize, usize) = (fields[1].parse().unwrap(), fields[2].parse().unwrap());
    Plane::from_data(w, h, bytes[pos + 1..pos + 1 + w * h].to_vec()).unwrap()
}

/// Textbook MS-SSIM: explicit 2-D Gaussian window, direct summation.
pub fn reference_ms_ssim(a: &Plane, b: &Plane) -> f64 {
    let weights = [0.0448, 0.2856, 0.3001, 0.2363, 0.1333];
    let (c1, c2) = ((0.01f64 * 255.0).powi(2), (0.03f64 * 255.0).powi(2));
    let mut x: Vec<Vec<f64>> = (0..a.height).map(|y| a.row(y).iter().map(|&v| v as f64).collect()).collect();
    let mut y: Vec<Vec<f64>> = (0..b.height).map(|r| b.row(r).iter().map(|&v| v as f64).collect()).collect();
    let mut result = 1.0;
    for (scale, w) in weights.iter().enumerate() {
        let (hh, ww) = (x.len(), x[0].len());
        let mut n = 11.min(hh).min(ww);
        if n % 2 == 0 {
            n -= 1;
        }
        let c = (n as f64 - 1.0) / 2.0;
        let mut win = vec![vec![0.0; n]; n];
        let mut total = 0.0;
        for i in 0..n {
            for j in 0..n {
                let d2 = (i as f64 - c).powi(2) + (j as f64 - c).powi(2);
                win[i][j] = (-d2 / 4.5).exp();
                total += win[i][j];
            }
        }
        let (mut ssim_sum, mut cs_sum, mut count) = (0.0, 0.0, 0.0);
        for oy in 0..=hh - n {
            for ox in 0..=ww - n {
                let (mut mx, mut my, mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
                for i in 0..n {
                    for j in 0..n {
                        let g = win[i][j] / total;
                        let (p, q) = (x[oy + i][ox + j], y[oy + i][ox + j]);
                        mx += g * p;
                        my += g * q;
                        sxx += g * p * p;
                        syy += g * q * q;
                        sxy += g * p * q;
                    }
                }
                let l = (2.0 * mx * my + c1) / (mx * mx + my * my + c1);
                let cs = (2.0 * (sxy - mx * my) + c2) / (sxx - mx * mx + syy - my * my + c2);
                ssim_sum += l * cs;
                cs_sum += cs;
                count += 1.0;
            }
        }
        let term: f64 = if scale == 4 { ssim_sum / count } else { cs_sum / count };
        result *= term.max(0.0).powf(*w);
        let half = |m: &Vec<Vec<f64>>| -> Vec<Vec<f64>> {
            (0..m.len() / 2)
                .map(|r| (0..m[0].len() / 2).map(|q| (m[2 * r][2 * q] + m[2 * r][2 * q + 1] + m[2 * r + 1][2 * q] + m[2 * r + 1][2 * q + 1]) / 4.0).collect())
                .collect()
        };
        x = half(&x);
        y = half(&y);
    }
    result
}

fn fill(f: &mut Frame, mut g: impl FnMut(usize, usize, usize) -> u8) {
    for (k, p) in f.planes.iter_mut().enumerate() {
        for yy in 0..p.height {
            for xx in 0..p.width {
                let v = g(k, xx, yy);
                p.set(xx, yy, v);
            }
        }
    }
}

/// Window at (`ox`, `oy`) over an unbounded smooth procedural texture.
pub fn texture_window(w: usize, h: usize, seed: u64, ox: isize, oy: isize) -> Frame {
    let mut rng = StdRng::seed_from_u64(seed);
    let (a, b, c): (f64, f64, f64) = (rng.gen_range(0.05..0.3), rng.gen_range(0.05..0.3), rng.gen_range(0.0..6.0));
    let mut f = Frame::filled(w, h, 0);
    fill(&mut f, |k, x, y| {
        let s = if k > 0 { 2.0 } else { 1.0 };
        let (x, y) = (x as f64 * s + ox as f64, y as f64 * s + oy as f64);
        let v = 128.0 + 60.0 * (a * x + c).sin() * (b * y).cos() + 30.0 * ((a + b) * (x - y) * 0.5).sin();
        let v = v + if k == 0 { 0.0 } else { -40.0 * k as f64 + 60.0 };
        v.clamp(0.0, 255.0) as u8
    });
    f
}

pub fn texture(w: usize, h: usize, seed: u64) -> Frame {
    texture_window(w, h, seed, 0, 0)
}

pub fn shifted(src: &Frame, dx: isize, dy: isize) -> Frame {
    let mut f = src.clone();
    fill(&mut f, |k, x, y| {
        let (sx, sy) = if k == 0 { (dx, dy) } else { (dx / 2, dy / 2) };
        src.planes[k].at_clamped(x as isize - sx, y as isize - sy)
    });
    f
}

pub fn noise_frame(w: usize, h: usize, rng: &mut StdRng) -> Frame {
    let mut f = Frame::filled(w, h, 0);
    for p in &mut f.planes {
        p.data.iter_mut().for_each(|s| *s = rng.gen());
    }
    f
}

pub fn sequence(name: &str, frames: Vec<Frame>) -> Sequence {
    Sequence::new(name, Fps::new(25, 1).unwrap(), frames).unwrap()
}

/// Synthetic test sequences: static, global pan, noise and mixed content.
pub fn synthetic_suite(count: usize) -> Vec<Sequence> {
    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        let seed = 1000 + i as u64;
        let mut rng = StdRng::seed_from_u64(seed);
        let w = [96, 64, 80, 48, 96][i % 5] - (i % 3) * 3;
        let h = [64, 96, 48, 80, 96][(i + 2) % 5] - (i % 2) * 5;
        let n = [65, 33, 17, 40, 9][i % 5];
        let frames: Vec<Frame> = match i % 4 {
            0 => vec![texture(w, h, seed); n],
            1 => {
                let (vx, vy) = (rng.gen_range(-3..=3), rng.gen_range(-2..=2));
                (0..n).map(|t| texture_window(w, h, seed, vx * t as isize, vy * t as isize)).collect()
            }
            2 => (0..n).map(|_| noise_frame(w, h, &mut rng)).collect(),
            _ => (0..n)
                .map(|t| {
                    let mut f = texture_window(w, h, seed, t as isize, 0);
                    let bw = w / 3;
                    for yy in 0..h / 2 {
                        for xx in 0..bw {
                            f.planes[0].set(xx, yy, rng.gen());
                        }
                    }
                    f
                })
                .collect(),
        };
        out.push(sequence(&format!("synthetic-{i:02}"), frames));
    }
    out
}
