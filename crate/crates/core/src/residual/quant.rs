//! Uniform scalar quantization and the eight-step quality ladder.

use std::f64::consts::FRAC_1_SQRT_2;

use serde::{Deserialize, Serialize};

use super::transform::Coefficients;
use crate::error::{Error, Result};

pub const MAX_LEVEL: i32 = 1 << 15;

/// Quality index 1 (coarsest) to 8 (finest).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct QualityLevel(u8);

impl TryFrom<u8> for QualityLevel {
    type Error = Error;

    fn try_from(index: u8) -> Result<Self> {
        QualityLevel::new(index)
    }
}

impl From<QualityLevel> for u8 {
    fn from(q: QualityLevel) -> u8 {
        q.0
    }
}

impl QualityLevel {
    pub const MIN: u8 = 1;
    pub const MAX: u8 = 8;

    pub fn new(index: u8) -> Result<Self> {
        if !(Self::MIN..=Self::MAX).contains(&index) {
            return Err(Error::Config(format!("quality level {index} outside 1..=8")));
        }
        Ok(QualityLevel(index))
    }

    pub fn all() -> impl Iterator<Item = QualityLevel> {
        (Self::MIN..=Self::MAX).map(QualityLevel)
    }

    pub fn index(self) -> u8 {
        self.0
    }

    /// Quantizer step: 128 at Q1, shrinking by sqrt(2) per level.
    pub fn delta(self) -> f64 {
        let k = (self.0 - 1) as i32;
        let step = 128.0 * 0.5f64.powi(k / 2);
        if k % 2 == 1 {
            step * FRAC_1_SQRT_2
        } else {
            step
        }
    }

    /// Lagrange multiplier for in-loop mode decisions, in squared error per bit.
    pub fn lambda_mode(self) -> f64 {
        0.1 * self.delta() * self.delta()
    }

    /// Multiplier for rate-constrained motion search, in SAD per bit.
    pub fn lambda_motion(self) -> u32 {
        self.lambda_mode().sqrt().round() as u32
    }
}

pub type Levels = [i32; 64];

/// Rounds `coeff / delta` half away from zero.
pub fn quantize(coeffs: &Coefficients, q: QualityLevel) -> Result<Levels> {
    let delta = q.delta();
    let mut out = [0i32; 64];
    for (l, &c) in out.iter_mut().zip(coeffs) {
        let v = (c / delta).round();
        if v.abs() > MAX_LEVEL as f64 {
            return Err(Error::Range(format!("quantized level {v} exceeds 2^15")));
        }
        *l = v as i32;
    }
    Ok(out)
}

pub fn dequantize(levels: &Levels, q: QualityLevel) -> Coefficients {
    let delta = q.delta();
    let mut out = [0.0f64; 64];
    for (c, &l) in out.iter_mut().zip(levels) {
        *c = l as f64 * delta;
    }
    out
}
