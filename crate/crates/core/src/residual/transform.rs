//! Orthonormal 8x8 DCT-II / DCT-III in 64-bit floating point.
//!
//! The basis is stored as literals and evaluated with a fixed summation
//! order, so results do not depend on the platform's `cos`.

pub type Coefficients = [f64; 64];
pub type Samples = [i32; 64];

#[rustfmt::skip]
const BASIS: [[f64; 8]; 8] = [
    [0.3535533905932738, 0.3535533905932738, 0.3535533905932738, 0.3535533905932738, 0.3535533905932738, 0.3535533905932738, 0.3535533905932738, 0.3535533905932738],
    [0.4903926402016152, 0.4157348061512726, 0.27778511650980114, 0.09754516100806417, -0.09754516100806417, -0.27778511650980114, -0.4157348061512726, -0.4903926402016152],
    [0.46193976625564337, 0.19134171618254492, -0.19134171618254492, -0.46193976625564337, -0.46193976625564337, -0.19134171618254492, 0.19134171618254492, 0.46193976625564337],
    [0.4157348061512726, -0.09754516100806417, -0.4903926402016152, -0.27778511650980114, 0.27778511650980114, 0.4903926402016152, 0.09754516100806417, -0.4157348061512726],
    [0.3535533905932738, -0.3535533905932738, -0.3535533905932738, 0.3535533905932738, 0.3535533905932738, -0.3535533905932738, -0.3535533905932738, 0.3535533905932738],
    [0.27778511650980114, -0.4903926402016152, 0.09754516100806417, 0.4157348061512726, -0.4157348061512726, -0.09754516100806417, 0.4903926402016152, -0.27778511650980114],
    [0.19134171618254492, -0.46193976625564337, 0.46193976625564337, -0.19134171618254492, -0.19134171618254492, 0.46193976625564337, -0.46193976625564337, 0.19134171618254492],
    [0.09754516100806417, -0.27778511650980114, 0.4157348061512726, -0.4903926402016152, 0.4903926402016152, -0.4157348061512726, 0.27778511650980114, -0.09754516100806417],
];

/// Forward 2-D DCT of a row-major 8x8 block.
pub fn forward_dct(block: &Samples) -> Coefficients {
    let mut tmp = [0.0f64; 64];
    for y in 0..8 {
        for k in 0..8 {
            let mut acc = 0.0;
            for x in 0..8 {
                acc += BASIS[k][x] * block[y * 8 + x] as f64;
            }
            tmp[y * 8 + k] = acc;
        }
    }
    let mut out = [0.0f64; 64];
    for k in 0..8 {
        for u in 0..8 {
            let mut acc = 0.0;
            for y in 0..8 {
                acc += BASIS[k][y] * tmp[y * 8 + u];
            }
            out[k * 8 + u] = acc;
        }
    }
    out
}

/// Inverse 2-D DCT, rounded half to even.
pub fn inverse_dct(coeffs: &Coefficients) -> Samples {
    let mut tmp = [0.0f64; 64];
    for k in 0..8 {
        for x in 0..8 {
            let mut acc = 0.0;
            for u in 0..8 {
                acc += BASIS[u][x] * coeffs[k * 8 + u];
            }
            tmp[k * 8 + x] = acc;
        }
    }
    let mut out = [0i32; 64];
    for y in 0..8 {
        for x in 0..8 {
            let mut acc = 0.0;
            for k in 0..8 {
                acc += BASIS[k][y] * tmp[k * 8 + x];
            }
            out[y * 8 + x] = acc.round_ties_even() as i32;
        }
    }
    out
}
