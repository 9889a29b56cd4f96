//! Residual coding and per-block Skip/coded arbitration.
//!
//! Every 16x16 macroblock of a P or B frame is either skipped (the
//! motion-compensated prediction is copied with no residual) or coded as six
//! 8x8 DCT blocks (four luma, one per chroma plane). The choice minimises
//! `SSE + lambda_mode * bits`, where the bits of the coded alternative come
//! from a trial encode on a snapshot of the adaptive contexts. I frames use a
//! flat 128 prediction and code every macroblock.

mod quant;
mod transform;

pub use quant::{dequantize, quantize, Levels, QualityLevel, MAX_LEVEL};
pub use transform::{forward_dct, inverse_dct, Coefficients, Samples};

use serde::Serialize;

use crate::entropy::{
    bit_cost_q16, read_exp_golomb, write_exp_golomb, BinWriter, BinaryContext, RangeDecoder, RangeEncoder, RateMeter,
};
use crate::error::{Error, Result};
use crate::media::{Frame, Plane};
use crate::motion::{self, MotionContexts, MotionField};
use crate::schedule::{FrameType, ScheduleEntry};

pub const MB_SIZE: usize = 16;
const TB: usize = 8;
const BUCKETS: usize = 10;

#[rustfmt::skip]
const ZIGZAG: [u8; 64] = [
     0,  1,  8, 16,  9,  2,  3, 10,
    17, 24, 32, 25, 18, 11,  4,  5,
    12, 19, 26, 33, 40, 48, 41, 34,
    27, 20, 13,  6,  7, 14, 21, 28,
    35, 42, 49, 56, 57, 50, 43, 36,
    29, 22, 15, 23, 30, 37, 44, 51,
    58, 59, 52, 45, 38, 31, 39, 46,
    53, 60, 61, 54, 47, 55, 62, 63,
];

/// Context bucket for each zigzag position.
#[rustfmt::skip]
const BUCKET: [u8; 64] = [
    0, 1, 2, 3, 4, 4, 5, 5, 5, 5, 6, 6, 6, 6, 6, 7,
    7, 7, 7, 7, 7, 8, 8, 8, 8, 8, 8, 8, 8, 8, 8, 8,
    8, 8, 8, 8, 9, 9, 9, 9, 9, 9, 9, 9, 9, 9, 9, 9,
    9, 9, 9, 9, 9, 9, 9, 9, 9, 9, 9, 9, 9, 9, 9, 9,
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BlockMode {
    Skip,
    Coded,
}

/// Per-macroblock coding modes in raster order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ModeMap {
    pub cols: usize,
    pub rows: usize,
    pub modes: Vec<BlockMode>,
}

impl ModeMap {
    pub fn count(&self, mode: BlockMode) -> usize {
        self.modes.iter().filter(|&&m| m == mode).count()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FrameStats {
    pub frame_type: FrameType,
    /// Motion bits (ideal code length of the motion payload).
    pub r_motion: u64,
    /// Remaining payload bits: mode flags and residual.
    pub r_residual: u64,
    /// Luma mean squared error of the reconstruction.
    pub mse: f64,
    pub payload_bytes: usize,
}

impl FrameStats {
    pub fn bits(&self) -> u64 {
        self.r_motion + self.r_residual
    }
}

/// Everything the encoder learns about one frame.
#[derive(Debug, Clone)]
pub struct EncodedFrame {
    pub reconstruction: Frame,
    pub payload: Vec<u8>,
    pub stats: FrameStats,
    pub modes: ModeMap,
    pub motion: Option<MotionField>,
}

#[derive(Debug, Clone)]
struct PlaneContexts {
    cbf: BinaryContext,
    sig: [BinaryContext; BUCKETS],
    last: [BinaryContext; BUCKETS],
    gt1: [BinaryContext; 2],
    rem: [BinaryContext; 4],
}

impl Default for PlaneContexts {
    fn default() -> Self {
        PlaneContexts {
            cbf: BinaryContext::default(),
            sig: [BinaryContext::new(1024); BUCKETS],
            last: [BinaryContext::new(1024); BUCKETS],
            gt1: [BinaryContext::default(); 2],
            rem: [BinaryContext::default(); 4],
        }
    }
}

/// Residual contexts, separately for luma and chroma.
#[derive(Debug, Clone, Default)]
struct ResidualContexts {
    planes: [PlaneContexts; 2],
}

/// All adaptive state of one frame's coder session; reset for every frame.
#[derive(Debug, Clone)]
struct FrameContexts {
    motion: MotionContexts,
    /// Coded-flag contexts, indexed by the number of coded neighbours (left, top).
    mode: [BinaryContext; 3],
    residual: ResidualContexts,
}

impl Default for FrameContexts {
    fn default() -> Self {
        FrameContexts {
            motion: MotionContexts::default(),
            mode: [BinaryContext::new(1024), BinaryContext::default(), BinaryContext::new(3072)],
            residual: ResidualContexts::default(),
        }
    }
}

fn write_levels<W: BinWriter>(w: &mut W, ctx: &mut PlaneContexts, levels: &Levels) {
    let zz: [i32; 64] = std::array::from_fn(|i| levels[ZIGZAG[i] as usize]);
    let last = zz.iter().rposition(|&l| l != 0);
    w.encode_bit(&mut ctx.cbf, last.is_some());
    let Some(last) = last else { return };
    for i in 0..63 {
        let b = BUCKET[i] as usize;
        let sig = zz[i] != 0;
        w.encode_bit(&mut ctx.sig[b], sig);
        if sig {
            w.encode_bit(&mut ctx.last[b], i == last);
            if i == last {
                break;
            }
        }
    }
    for (i, &l) in zz[..=last].iter().enumerate() {
        if l == 0 {
            continue;
        }
        let mag = l.unsigned_abs();
        w.encode_bit(&mut ctx.gt1[(i == 0) as usize], mag > 1);
        if mag > 1 {
            write_exp_golomb(w, &mut ctx.rem, mag - 2);
        }
        w.encode_bypass((l < 0) as u32, 1);
    }
}

fn read_levels(r: &mut RangeDecoder<'_>, ctx: &mut PlaneContexts) -> Result<Levels> {
    let mut zz = [0i32; 64];
    if !r.decode_bit(&mut ctx.cbf)? {
        return Ok(zz);
    }
    let mut last = 63;
    for i in 0..63 {
        let b = BUCKET[i] as usize;
        if r.decode_bit(&mut ctx.sig[b])? {
            zz[i] = 1;
            if r.decode_bit(&mut ctx.last[b])? {
                last = i;
                break;
            }
        }
    }
    zz[last] = 1;
    for i in 0..=last {
        if zz[i] == 0 {
            continue;
        }
        let mut mag = 1;
        if r.decode_bit(&mut ctx.gt1[(i == 0) as usize])? {
            let rem = read_exp_golomb(r, &mut ctx.rem)?;
            if rem > MAX_LEVEL as u32 {
                return Err(Error::Bitstream(format!("coefficient level {rem} out of range")));
            }
            mag = rem as i32 + 2;
        }
        zz[i] = if r.decode_bypass(1)? == 1 { -mag } else { mag };
    }
    let mut levels = [0i32; 64];
    for (i, &z) in ZIGZAG.iter().enumerate() {
        levels[z as usize] = zz[i];
    }
    Ok(levels)
}

/// One 8x8 transform block, clipped to its plane.
#[derive(Debug, Clone, Copy)]
struct TransformBlock {
    plane: usize,
    x: usize,
    y: usize,
    w: usize,
    h: usize,
}

impl TransformBlock {
    fn plane_ctx(&self) -> usize {
        (self.plane > 0) as usize
    }
}

fn macroblock_tbs(frame: &Frame, bx: usize, by: usize) -> Vec<TransformBlock> {
    let mut out = Vec::with_capacity(6);
    let mut push = |plane: usize, p: &Plane, x: usize, y: usize| {
        if x < p.width && y < p.height {
            out.push(TransformBlock { plane, x, y, w: TB.min(p.width - x), h: TB.min(p.height - y) });
        }
    };
    for k in 0..4 {
        push(0, &frame.planes[0], bx * MB_SIZE + TB * (k % 2), by * MB_SIZE + TB * (k / 2));
    }
    for plane in 1..3 {
        push(plane, &frame.planes[plane], bx * TB, by * TB);
    }
    out
}

fn residual(target: &Plane, pred: &Plane, tb: &TransformBlock) -> Samples {
    let mut out = [0i32; 64];
    for y in 0..tb.h {
        for x in 0..tb.w {
            out[y * TB + x] = target.at(tb.x + x, tb.y + y) as i32 - pred.at(tb.x + x, tb.y + y) as i32;
        }
    }
    out
}

/// Writes `clamp(pred + res)` into `out`.
fn reconstruct(out: &mut Plane, pred: &Plane, tb: &TransformBlock, res: &Samples) {
    for y in 0..tb.h {
        for x in 0..tb.w {
            let v = pred.at(tb.x + x, tb.y + y) as i32 + res[y * TB + x];
            out.set(tb.x + x, tb.y + y, v.clamp(0, 255) as u8);
        }
    }
}

fn block_sse(a: &Plane, b: &Plane, tb: &TransformBlock) -> u64 {
    let mut sse = 0u64;
    for y in tb.y..tb.y + tb.h {
        let (ra, rb) = (&a.row(y)[tb.x..tb.x + tb.w], &b.row(y)[tb.x..tb.x + tb.w]);
        sse += ra.iter().zip(rb).map(|(&p, &q)| ((p as i32 - q as i32).pow(2)) as u64).sum::<u64>();
    }
    sse
}

fn sse_with_residual(target: &Plane, pred: &Plane, tb: &TransformBlock, res: &Samples) -> u64 {
    let mut sse = 0u64;
    for y in 0..tb.h {
        for x in 0..tb.w {
            let v = (pred.at(tb.x + x, tb.y + y) as i32 + res[y * TB + x]).clamp(0, 255);
            let d = target.at(tb.x + x, tb.y + y) as i32 - v;
            sse += (d * d) as u64;
        }
    }
    sse
}

struct CodedBlock {
    tb: TransformBlock,
    levels: Levels,
    recon: Samples,
}

fn code_block(target: &Frame, pred: &Frame, tb: TransformBlock, q: QualityLevel) -> Result<CodedBlock> {
    let res = residual(&target.planes[tb.plane], &pred.planes[tb.plane], &tb);
    let levels = quantize(&forward_dct(&res), q)?;
    let recon = inverse_dct(&dequantize(&levels, q));
    Ok(CodedBlock { tb, levels, recon })
}

fn mode_context(modes: &[BlockMode], cols: usize, bx: usize, by: usize) -> usize {
    let coded = |i: usize| (modes[i] == BlockMode::Coded) as usize;
    let left = if bx > 0 { coded(by * cols + bx - 1) } else { 0 };
    let top = if by > 0 { coded((by - 1) * cols + bx) } else { 0 };
    left + top
}

fn check_references(entry: &ScheduleEntry, past: Option<&Frame>, future: Option<&Frame>) -> Result<()> {
    let matches = |want: Option<usize>, got: Option<&Frame>| match (want, got) {
        (None, None) => true,
        (Some(d), Some(f)) => f.display_index == d,
        _ => false,
    };
    let shape_ok = match entry.frame_type {
        FrameType::I => entry.ref_past.is_none() && entry.ref_future.is_none(),
        FrameType::P => entry.ref_past.is_some() && entry.ref_future.is_none(),
        FrameType::B => entry.ref_past.is_some() && entry.ref_future.is_some(),
    };
    if !shape_ok || !matches(entry.ref_past, past) || !matches(entry.ref_future, future) {
        return Err(Error::ScheduleInvariant {
            index: entry.display_index,
            reason: format!(
                "{} frame expects references {:?}/{:?}, got {:?}/{:?}",
                entry.frame_type,
                entry.ref_past,
                entry.ref_future,
                past.map(|f| f.display_index),
                future.map(|f| f.display_index)
            ),
        });
    }
    Ok(())
}

fn frame_sse(a: &Frame, b: &Frame) -> u64 {
    a.planes
        .iter()
        .zip(&b.planes)
        .flat_map(|(p, q)| p.data.iter().zip(&q.data))
        .map(|(&x, &y)| ((x as i32 - y as i32).pow(2)) as u64)
        .sum()
}

fn luma_mse(a: &Frame, b: &Frame) -> f64 {
    let sse: u64 = a.planes[0]
        .data
        .iter()
        .zip(&b.planes[0].data)
        .map(|(&x, &y)| ((x as i32 - y as i32).pow(2)) as u64)
        .sum();
    sse as f64 / a.planes[0].data.len() as f64
}

/// Encodes one frame closed-loop against already reconstructed references.
pub fn encode_frame(
    target: &Frame,
    entry: &ScheduleEntry,
    past: Option<&Frame>,
    future: Option<&Frame>,
    q: QualityLevel,
) -> Result<EncodedFrame> {
    check_references(entry, past, future)?;
    let mut enc = RangeEncoder::new();
    let mut ctx = FrameContexts::default();

    let (pred, field) = match past {
        None => (Frame::filled(target.width, target.height, 128), None),
        Some(past) => {
            let field = motion::estimate_motion_rd(target, past, future, q.lambda_motion())?;
            motion::encode_motion(&field, &mut enc, &mut ctx.motion);
            (motion::compensate(&field, past, future)?, Some(field))
        }
    };
    let motion_q16 = enc.cost_q16();

    let cols = target.width.div_ceil(MB_SIZE);
    let rows = target.height.div_ceil(MB_SIZE);
    let mut modes = vec![BlockMode::Coded; cols * rows];
    let mut recon = pred.clone();
    let lambda = q.lambda_mode();
    let intra = entry.frame_type == FrameType::I;

    for by in 0..rows {
        for bx in 0..cols {
            let tbs = macroblock_tbs(target, bx, by);
            let coded = tbs.iter().map(|&tb| code_block(target, &pred, tb, q)).collect::<Result<Vec<_>>>()?;

            let mode = if intra {
                BlockMode::Coded
            } else {
                let mctx = &ctx.mode[mode_context(&modes, cols, bx, by)];
                let d_skip: u64 = tbs.iter().map(|tb| block_sse(&target.planes[tb.plane], &pred.planes[tb.plane], tb)).sum();
                let d_coded: u64 = coded
                    .iter()
                    .map(|c| sse_with_residual(&target.planes[c.tb.plane], &pred.planes[c.tb.plane], &c.tb, &c.recon))
                    .sum();
                let mut meter = RateMeter::default();
                let mut snapshot = ctx.residual.clone();
                for c in &coded {
                    write_levels(&mut meter, &mut snapshot.planes[c.tb.plane_ctx()], &c.levels);
                }
                let bits = |q16: u64| q16 as f64 / 65536.0;
                let j_skip = d_skip as f64 + lambda * bits(bit_cost_q16(mctx, false) as u64);
                let j_coded = d_coded as f64 + lambda * bits(bit_cost_q16(mctx, true) as u64 + meter.cost_q16);
                let mode = if j_coded < j_skip { BlockMode::Coded } else { BlockMode::Skip };
                debug_assert!(match mode {
                    BlockMode::Coded => j_coded <= j_skip,
                    BlockMode::Skip => j_skip <= j_coded,
                });
                mode
            };

            let i = by * cols + bx;
            modes[i] = mode;
            if !intra {
                let c = mode_context(&modes, cols, bx, by);
                enc.encode_bit(&mut ctx.mode[c], mode == BlockMode::Coded);
            }
            if mode == BlockMode::Coded {
                for c in &coded {
                    write_levels(&mut enc, &mut ctx.residual.planes[c.tb.plane_ctx()], &c.levels);
                    reconstruct(&mut recon.planes[c.tb.plane], &pred.planes[c.tb.plane], &c.tb, &c.recon);
                }
            }
        }
    }

    let mut payload = enc.finish();
    let mut field = field;
    if let Some(past) = past {
        // A frame that is not worth more than a plain copy of the past
        // reference is sent as an empty payload.
        let copy_cost = frame_sse(target, past) as f64;
        let coded_cost = frame_sse(target, &recon) as f64 + lambda * (payload.len() * 8) as f64;
        if copy_cost <= coded_cost {
            payload.clear();
            recon = past.clone();
            modes.iter_mut().for_each(|m| *m = BlockMode::Skip);
            field = Some(MotionField::for_frame(target.width, target.height, future.is_some()));
        }
    }
    let payload_bits = payload.len() as u64 * 8;
    let r_motion = if payload.is_empty() { 0 } else { ((motion_q16 + 0x8000) >> 16).min(payload_bits) };
    recon.display_index = entry.display_index;
    let stats = FrameStats {
        frame_type: entry.frame_type,
        r_motion,
        r_residual: payload_bits - r_motion,
        mse: luma_mse(target, &recon),
        payload_bytes: payload.len(),
    };
    Ok(EncodedFrame { reconstruction: recon, payload, stats, modes: ModeMap { cols, rows, modes }, motion: field })
}

/// Rebuilds the frame coded in `payload`; the result equals the encoder's
/// reconstruction sample for sample.
pub fn decode_frame(
    entry: &ScheduleEntry,
    width: usize,
    height: usize,
    past: Option<&Frame>,
    future: Option<&Frame>,
    q: QualityLevel,
    payload: &[u8],
) -> Result<Frame> {
    check_references(entry, past, future)?;
    if past.is_some_and(|p| p.width != width || p.height != height) {
        return Err(Error::Dimension("reference geometry differs from the stream".into()));
    }
    if payload.is_empty() {
        return match past {
            Some(past) => Ok(past.clone().with_index(entry.display_index)),
            None => Err(Error::Bitstream("empty intra payload".into())),
        };
    }
    let mut dec = RangeDecoder::new(payload);
    let mut ctx = FrameContexts::default();
    let cols = width.div_ceil(MB_SIZE);
    let rows = height.div_ceil(MB_SIZE);

    let pred = match past {
        None => Frame::filled(width, height, 128),
        Some(past) => {
            let field = motion::decode_motion(&mut dec, &mut ctx.motion, cols, rows, future.is_some())?;
            motion::compensate(&field, past, future)?
        }
    };
    let intra = entry.frame_type == FrameType::I;
    let mut modes = vec![BlockMode::Coded; cols * rows];
    let mut recon = pred.clone();
    for by in 0..rows {
        for bx in 0..cols {
            let i = by * cols + bx;
            if !intra {
                let c = mode_context(&modes, cols, bx, by);
                if !dec.decode_bit(&mut ctx.mode[c])? {
                    modes[i] = BlockMode::Skip;
                    continue;
                }
            }
            for tb in macroblock_tbs(&pred, bx, by) {
                let levels = read_levels(&mut dec, &mut ctx.residual.planes[tb.plane_ctx()])?;
                let res = inverse_dct(&dequantize(&levels, q));
                reconstruct(&mut recon.planes[tb.plane], &pred.planes[tb.plane], &tb, &res);
            }
        }
    }
    dec.finish()?;
    recon.display_index = entry.display_index;
    Ok(recon)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schedule::build_schedule;
    use proptest::prelude::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn noise(w: usize, h: usize, seed: u64) -> Frame {
        let mut rng = StdRng::seed_from_u64(seed);
        let mut f = Frame::filled(w, h, 0);
        for p in &mut f.planes {
            p.data.iter_mut().for_each(|s| *s = rng.gen());
        }
        f
    }

    fn i_entry() -> ScheduleEntry {
        ScheduleEntry { display_index: 0, frame_type: FrameType::I, ref_past: None, ref_future: None, coding_order: 0 }
    }

    fn p_entry() -> ScheduleEntry {
        ScheduleEntry { display_index: 1, frame_type: FrameType::P, ref_past: Some(0), ref_future: None, coding_order: 1 }
    }

    fn q(i: u8) -> QualityLevel {
        QualityLevel::new(i).unwrap()
    }

    #[test]
    fn levels_roundtrip_edge_patterns() {
        let mut cases: Vec<Levels> = vec![[0; 64], [1; 64], [-3; 64]];
        let mut only_last = [0; 64];
        only_last[63] = 5;
        cases.push(only_last);
        let mut dc = [0; 64];
        dc[0] = -180;
        cases.push(dc);
        let mut big = [0; 64];
        big[17] = MAX_LEVEL;
        cases.push(big);
        let mut enc = RangeEncoder::new();
        let mut ctx = PlaneContexts::default();
        for c in &cases {
            write_levels(&mut enc, &mut ctx, c);
        }
        let bytes = enc.finish();
        let mut dec = RangeDecoder::new(&bytes);
        let mut ctx = PlaneContexts::default();
        for c in &cases {
            assert_eq!(&read_levels(&mut dec, &mut ctx).unwrap(), c);
        }
        dec.finish().unwrap();
    }

    #[test]
    fn static_p_frame_is_all_skip() {
        let f0 = noise(64, 48, 1);
        let i = encode_frame(&f0, &i_entry(), None, None, q(5)).unwrap();
        let f1 = f0.clone().with_index(1);
        let reference = i.reconstruction.clone();
        let target = reference.clone().with_index(1);
        let p = encode_frame(&target, &p_entry(), Some(&reference), None, q(5)).unwrap();
        assert_eq!(p.modes.count(BlockMode::Coded), 0);
        assert_eq!(p.reconstruction.planes, reference.planes);
        assert!(p.payload.is_empty());
        assert_eq!(p.stats.bits(), 0);
        let d = decode_frame(&p_entry(), 64, 48, Some(&reference), None, q(5), &p.payload).unwrap();
        assert_eq!(d, p.reconstruction);
        // the source itself (not the reconstruction) still decodes consistently
        let p2 = encode_frame(&f1, &p_entry(), Some(&reference), None, q(5)).unwrap();
        let d = decode_frame(&p_entry(), 64, 48, Some(&reference), None, q(5), &p2.payload).unwrap();
        assert_eq!(d, p2.reconstruction);
    }

    #[test]
    fn empty_payload_only_for_inter_frames() {
        assert!(matches!(decode_frame(&i_entry(), 16, 16, None, None, q(4), &[]), Err(Error::Bitstream(_))));
        let reference = noise(32, 32, 8);
        let changed = noise(32, 32, 9).with_index(1);
        let p = encode_frame(&changed, &p_entry(), Some(&reference), None, q(8)).unwrap();
        assert!(!p.payload.is_empty());
        assert!(p.modes.count(BlockMode::Coded) > 0);
    }

    #[test]
    fn flat_gray_intra_codes_nothing() {
        let f = Frame::filled(32, 32, 128);
        let e = encode_frame(&f, &i_entry(), None, None, q(4)).unwrap();
        assert_eq!(e.reconstruction.planes, f.planes);
        // 4 macroblocks x 6 coded-block flags, nothing else
        assert!(e.stats.bits() <= 24, "{:?}", e.stats);
    }

    #[test]
    fn finer_quality_costs_more_and_distorts_less() {
        let f = noise(48, 48, 2);
        let lo = encode_frame(&f, &i_entry(), None, None, q(1)).unwrap();
        let hi = encode_frame(&f, &i_entry(), None, None, q(8)).unwrap();
        assert!(hi.stats.bits() > lo.stats.bits());
        assert!(hi.stats.mse < lo.stats.mse);
    }

    #[test]
    fn wrong_quality_does_not_reproduce() {
        let f = noise(32, 32, 3);
        let e = encode_frame(&f, &i_entry(), None, None, q(6)).unwrap();
        match decode_frame(&i_entry(), 32, 32, None, None, q(3), &e.payload) {
            Ok(d) => assert_ne!(d, e.reconstruction),
            Err(err) => assert!(matches!(err, Error::Bitstream(_))),
        }
    }

    #[test]
    fn truncated_payload_fails() {
        let f = noise(32, 32, 4);
        let e = encode_frame(&f, &i_entry(), None, None, q(6)).unwrap();
        let cut = &e.payload[..e.payload.len() / 2];
        assert!(matches!(decode_frame(&i_entry(), 32, 32, None, None, q(6), cut), Err(Error::Bitstream(_))));
    }

    #[test]
    fn reference_mismatch_rejected() {
        let f = noise(16, 16, 5);
        assert!(matches!(
            encode_frame(&f, &p_entry(), None, None, q(4)),
            Err(Error::ScheduleInvariant { .. })
        ));
        let wrong_ref = f.clone().with_index(7);
        assert!(matches!(
            encode_frame(&f, &p_entry(), Some(&wrong_ref), None, q(4)),
            Err(Error::ScheduleInvariant { .. })
        ));
    }

    #[test]
    fn decode_matches_encoder_on_b_frames() {
        let s = build_schedule(3, 32, 2).unwrap();
        let frames: Vec<Frame> = (0..3).map(|i| noise(40, 24, 10 + i as u64).with_index(i)).collect();
        let mut enc_recon: Vec<Option<Frame>> = vec![None; 3];
        let mut dec_recon: Vec<Option<Frame>> = vec![None; 3];
        for e in &s.entries {
            let get = |v: &Vec<Option<Frame>>, r: Option<usize>| r.map(|r| v[r].clone().unwrap());
            let (p, f) = (get(&enc_recon, e.ref_past), get(&enc_recon, e.ref_future));
            let out = encode_frame(&frames[e.display_index], e, p.as_ref(), f.as_ref(), q(7)).unwrap();
            let (dp, df) = (get(&dec_recon, e.ref_past), get(&dec_recon, e.ref_future));
            let d = decode_frame(e, 40, 24, dp.as_ref(), df.as_ref(), q(7), &out.payload).unwrap();
            assert_eq!(d, out.reconstruction);
            enc_recon[e.display_index] = Some(out.reconstruction);
            dec_recon[e.display_index] = Some(d);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn intra_decode_is_exact(w in 1usize..40, h in 1usize..40, seed in any::<u64>(), qi in 1u8..=8) {
            let f = noise(w, h, seed);
            let e = encode_frame(&f, &i_entry(), None, None, q(qi)).unwrap();
            let d = decode_frame(&i_entry(), w, h, None, None, q(qi), &e.payload).unwrap();
            prop_assert_eq!(d, e.reconstruction);
        }
    }
}
