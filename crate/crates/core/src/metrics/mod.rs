//! Quality metrics on the luma plane and Bjøntegaard-delta rate.

mod bdrate;
mod msssim;

pub use bdrate::{bd_rate, RdPoint};
pub use msssim::{ms_ssim, ms_ssim_frames, ms_ssim_sequence, MIN_DIM, WEIGHTS};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::media::{Frame, Plane, Sequence};

/// Reported in place of infinity for perfect reconstructions.
pub const DB_CLAMP: f64 = 100.0;

pub fn ms_ssim_db(s: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::Range(format!("MS-SSIM {s} outside [0, 1]")));
    }
    if s == 1.0 {
        return Ok(DB_CLAMP);
    }
    Ok((-10.0 * (1.0 - s).log10()).min(DB_CLAMP))
}

fn check_same(a: &Plane, b: &Plane) -> Result<()> {
    if a.width != b.width || a.height != b.height {
        return Err(Error::Dimension(format!(
            "{}x{} vs {}x{}",
            a.width, a.height, b.width, b.height
        )));
    }
    Ok(())
}

pub fn luma_mse(a: &Frame, b: &Frame) -> Result<f64> {
    check_same(&a.planes[0], &b.planes[0])?;
    let sse: u64 = a.planes[0]
        .data
        .iter()
        .zip(&b.planes[0].data)
        .map(|(&x, &y)| (x as i64 - y as i64).pow(2) as u64)
        .sum();
    Ok(sse as f64 / a.planes[0].data.len() as f64)
}

pub fn psnr_from_mse(mse: f64) -> f64 {
    if mse == 0.0 {
        return DB_CLAMP;
    }
    (10.0 * (255.0f64 * 255.0 / mse).log10()).min(DB_CLAMP)
}

pub fn psnr(a: &Frame, b: &Frame) -> Result<f64> {
    Ok(psnr_from_mse(luma_mse(a, b)?))
}

/// Sequence PSNR from the mean per-frame MSE.
pub fn psnr_sequence(a: &Sequence, b: &Sequence) -> Result<f64> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::Dimension(format!("sequences of {} and {} frames", a.len(), b.len())));
    }
    let mses = a.frames.par_iter().zip(&b.frames).map(|(x, y)| luma_mse(x, y)).collect::<Result<Vec<_>>>()?;
    Ok(psnr_from_mse(mses.iter().sum::<f64>() / mses.len() as f64))
}
