//! Bjøntegaard-delta rate with a least-squares cubic fit of log10(rate)
//! against quality.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RdPoint {
    /// Bits per second.
    pub rate: f64,
    /// MS-SSIM in dB (or any quality in dB).
    pub quality: f64,
}

struct Curve {
    /// Coefficients of log10(rate) in powers of the normalised quality.
    coef: [f64; 4],
    lo: f64,
    hi: f64,
}

fn check(points: &[RdPoint], which: &str) -> Result<Vec<RdPoint>> {
    if points.len() < 4 {
        return Err(Error::Config(format!("{which} curve has {} points, at least 4 are required", points.len())));
    }
    for p in points {
        if !(p.rate > 0.0 && p.rate.is_finite() && p.quality.is_finite()) {
            return Err(Error::Range(format!("{which} point {p:?} needs a positive rate and finite quality")));
        }
    }
    let mut sorted = points.to_vec();
    sorted.sort_by(|a, b| a.quality.total_cmp(&b.quality));
    if sorted.windows(2).any(|w| w[0].quality == w[1].quality) {
        return Err(Error::Config(format!("{which} curve repeats a quality value")));
    }
    Ok(sorted)
}

/// Solves the 4x4 normal equations with partial pivoting.
fn solve(mut a: [[f64; 4]; 4], mut b: [f64; 4]) -> Result<[f64; 4]> {
    for col in 0..4 {
        let piv = (col..4).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        if a[piv][col].abs() < 1e-12 {
            return Err(Error::Config("rate-distortion points are degenerate".into()));
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..4 {
            let f = a[row][col] / a[col][col];
            for k in col..4 {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 4];
    for row in (0..4).rev() {
        let s: f64 = (row + 1..4).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Ok(x)
}

fn fit(points: &[RdPoint], shift: f64, scale: f64) -> Result<Curve> {
    let mut ata = [[0.0; 4]; 4];
    let mut atb = [0.0; 4];
    for p in points {
        let t = (p.quality - shift) / scale;
        let pw = [1.0, t, t * t, t * t * t];
        for i in 0..4 {
            for j in 0..4 {
                ata[i][j] += pw[i] * pw[j];
            }
            atb[i] += pw[i] * p.rate.log10();
        }
    }
    Ok(Curve {
        coef: solve(ata, atb)?,
        lo: points[0].quality,
        hi: points[points.len() - 1].quality,
    })
}

fn integral(c: &[f64; 4], t0: f64, t1: f64) -> f64 {
    let prim = |t: f64| c[0] * t + c[1] * t * t / 2.0 + c[2] * t.powi(3) / 3.0 + c[3] * t.powi(4) / 4.0;
    prim(t1) - prim(t0)
}

/// Average rate difference of `test` relative to `anchor` at equal quality,
/// in percent. Negative means `test` needs fewer bits.
pub fn bd_rate(anchor: &[RdPoint], test: &[RdPoint]) -> Result<f64> {
    let a = check(anchor, "anchor")?;
    let t = check(test, "test")?;
    let all = a.iter().chain(&t).map(|p| p.quality);
    let (qmin, qmax) = all.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), q| (lo.min(q), hi.max(q)));
    let (shift, scale) = ((qmin + qmax) / 2.0, ((qmax - qmin) / 2.0).max(1e-9));
    let (ca, ct) = (fit(&a, shift, scale)?, fit(&t, shift, scale)?);
    let (lo, hi) = (ca.lo.max(ct.lo), ca.hi.min(ct.hi));
    if hi <= lo {
        return Err(Error::Overlap(format!("anchor spans [{}, {}], test spans [{}, {}]", ca.lo, ca.hi, ct.lo, ct.hi)));
    }
    let (t0, t1) = ((lo - shift) / scale, (hi - shift) / scale);
    let diff = (integral(&ct.coef, t0, t1) - integral(&ca.coef, t0, t1)) / (t1 - t0);
    Ok((10f64.powf(diff) - 1.0) * 100.0)
}
