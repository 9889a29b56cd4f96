//! Block motion estimation, bi-directional compensation and motion coding.
//!
//! Motion is carried per 16x16 luma block as integer vectors toward the past
//! reference and, for B frames, the future reference, plus a three-level
//! weight selecting past-only, average or future-only prediction.

use std::sync::OnceLock;

use serde::Serialize;

use crate::entropy::{read_exp_golomb, write_exp_golomb, BinWriter, BinaryContext, RangeDecoder};
use crate::error::{Error, Result};
use crate::media::{Frame, Plane};

pub const BLOCK: usize = 16;
pub const SEARCH_RANGE: i32 = 16;
const PAD: usize = 32;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize)]
pub struct MotionVector {
    pub dx: i32,
    pub dy: i32,
}

impl MotionVector {
    pub const ZERO: MotionVector = MotionVector { dx: 0, dy: 0 };

    pub fn new(dx: i32, dy: i32) -> Self {
        MotionVector { dx, dy }
    }

    pub fn in_range(self) -> bool {
        self.dx.abs() <= SEARCH_RANGE && self.dy.abs() <= SEARCH_RANGE
    }

    /// Vector for the half-resolution chroma planes.
    pub fn chroma(self) -> MotionVector {
        MotionVector { dx: half_round_even(self.dx), dy: half_round_even(self.dy) }
    }
}

fn half_round_even(v: i32) -> i32 {
    let q = v.div_euclid(2);
    if v.rem_euclid(2) == 1 && q & 1 == 1 {
        q + 1
    } else {
        q
    }
}

/// Weight on the past prediction: 1, 1/2 or 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Beta {
    Past,
    Average,
    Future,
}

impl Beta {
    const ALL: [Beta; 3] = [Beta::Past, Beta::Average, Beta::Future];

    #[inline]
    fn blend(self, past: u8, future: u8) -> u8 {
        match self {
            Beta::Past => past,
            Beta::Future => future,
            Beta::Average => {
                let s = past as u16 + future as u16;
                let q = s >> 1;
                (if s & 1 == 1 && q & 1 == 1 { q + 1 } else { q }) as u8
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MotionField {
    pub block_size: usize,
    pub cols: usize,
    pub rows: usize,
    pub mv_past: Vec<MotionVector>,
    pub mv_future: Option<Vec<MotionVector>>,
    /// Present exactly when `mv_future` is; P frames implicitly use [`Beta::Past`].
    pub beta: Option<Vec<Beta>>,
}

impl MotionField {
    pub fn zero(cols: usize, rows: usize, bidirectional: bool) -> Self {
        let n = cols * rows;
        MotionField {
            block_size: BLOCK,
            cols,
            rows,
            mv_past: vec![MotionVector::ZERO; n],
            mv_future: bidirectional.then(|| vec![MotionVector::ZERO; n]),
            beta: bidirectional.then(|| vec![Beta::Past; n]),
        }
    }

    pub fn for_frame(width: usize, height: usize, bidirectional: bool) -> Self {
        Self::zero(width.div_ceil(BLOCK), height.div_ceil(BLOCK), bidirectional)
    }

    pub fn is_bidirectional(&self) -> bool {
        self.mv_future.is_some()
    }

    pub fn beta_at(&self, i: usize) -> Beta {
        self.beta.as_ref().map_or(Beta::Past, |b| b[i])
    }

    fn check(&self) -> Result<()> {
        let n = self.cols * self.rows;
        let ok = self.mv_past.len() == n
            && self.mv_future.as_ref().is_none_or(|f| f.len() == n)
            && self.beta.as_ref().is_none_or(|b| b.len() == n)
            && self.mv_future.is_some() == self.beta.is_some();
        if ok {
            Ok(())
        } else {
            Err(Error::Dimension("motion field arrays do not match its block grid".into()))
        }
    }
}

/// Output of motion compensation together with the motion rate.
#[derive(Debug, Clone)]
pub struct PredictionResult {
    pub prediction: Frame,
    pub motion_bits: f64,
}

/// Luma plane with replicated borders so searches never branch on edges.
struct PaddedPlane {
    stride: usize,
    data: Vec<u8>,
}

impl PaddedPlane {
    fn new(p: &Plane) -> Self {
        let stride = p.width + 2 * PAD;
        let rows = p.height + 2 * PAD;
        let mut data = Vec::with_capacity(stride * rows);
        for y in 0..rows {
            let sy = (y as isize - PAD as isize).clamp(0, p.height as isize - 1) as usize;
            let row = p.row(sy);
            data.extend(std::iter::repeat_n(row[0], PAD));
            data.extend_from_slice(row);
            data.extend(std::iter::repeat_n(row[p.width - 1], PAD));
        }
        PaddedPlane { stride, data }
    }

    #[inline]
    fn row(&self, x: isize, y: isize, len: usize) -> &[u8] {
        let start = (y + PAD as isize) as usize * self.stride + (x + PAD as isize) as usize;
        &self.data[start..start + len]
    }
}

/// Search order: zero vector, then by L1 norm, then raster order.
fn candidates() -> &'static [MotionVector] {
    static LIST: OnceLock<Vec<MotionVector>> = OnceLock::new();
    LIST.get_or_init(|| {
        let mut v: Vec<MotionVector> = (-SEARCH_RANGE..=SEARCH_RANGE)
            .flat_map(|dy| (-SEARCH_RANGE..=SEARCH_RANGE).map(move |dx| MotionVector::new(dx, dy)))
            .collect();
        v.sort_by_key(|m| (m.dx.abs() + m.dy.abs(), m.dy, m.dx));
        v
    })
}

#[inline]
fn row_sad(a: &[u8], b: &[u8]) -> u32 {
    a.iter().zip(b).map(|(&x, &y)| (x as i32 - y as i32).unsigned_abs()).sum()
}

#[derive(Clone, Copy)]
struct BlockRect {
    x: usize,
    y: usize,
    w: usize,
    h: usize,
}

fn block_rect(bx: usize, by: usize, width: usize, height: usize, size: usize) -> BlockRect {
    let x = bx * size;
    let y = by * size;
    BlockRect { x, y, w: size.min(width - x), h: size.min(height - y) }
}

/// SAD of the block at `mv`, abandoning once it reaches `limit`.
fn block_sad(target: &Plane, reference: &PaddedPlane, r: BlockRect, mv: MotionVector, limit: u32) -> u32 {
    let mut sad = 0;
    for row in 0..r.h {
        let y = r.y + row;
        let t = &target.row(y)[r.x..r.x + r.w];
        let p = reference.row(r.x as isize + mv.dx as isize, y as isize + mv.dy as isize, r.w);
        sad += row_sad(t, p);
        if sad >= limit {
            break;
        }
    }
    sad
}

/// Approximate code length of one vector-difference component.
#[inline]
fn component_bits(d: i32) -> u32 {
    if d == 0 {
        1
    } else {
        3 + 2 * d.unsigned_abs().ilog2()
    }
}

#[inline]
fn vector_bits(mv: MotionVector, pred: MotionVector) -> u32 {
    component_bits(mv.dx - pred.dx) + component_bits(mv.dy - pred.dy)
}

/// Minimises `SAD + lambda * bits(mv - pred)` over the search window.
fn full_search(target: &Plane, reference: &PaddedPlane, r: BlockRect, pred: MotionVector, lambda: u32) -> MotionVector {
    let mut best = MotionVector::ZERO;
    let mut best_cost = u32::MAX;
    for &mv in candidates() {
        let penalty = lambda * vector_bits(mv, pred);
        if penalty >= best_cost {
            continue;
        }
        let cost = block_sad(target, reference, r, mv, best_cost - penalty) + penalty;
        if cost < best_cost {
            best_cost = cost;
            best = mv;
            if cost == 0 {
                break;
            }
        }
    }
    best
}

fn choose_beta(
    target: &Plane,
    past: &PaddedPlane,
    future: &PaddedPlane,
    r: BlockRect,
    mp: MotionVector,
    mf: MotionVector,
    lambda: u32,
) -> Beta {
    let mut costs = [0u32, lambda, 2 * lambda];
    for row in 0..r.h {
        let y = r.y + row;
        let t = &target.row(y)[r.x..r.x + r.w];
        let a = past.row(r.x as isize + mp.dx as isize, y as isize + mp.dy as isize, r.w);
        let b = future.row(r.x as isize + mf.dx as isize, y as isize + mf.dy as isize, r.w);
        for (cost, beta) in costs.iter_mut().zip(Beta::ALL) {
            *cost += t
                .iter()
                .zip(a.iter().zip(b))
                .map(|(&t, (&a, &b))| (t as i32 - beta.blend(a, b) as i32).unsigned_abs())
                .sum::<u32>();
        }
    }
    let mut best = 0;
    for i in 1..3 {
        if costs[i] < costs[best] {
            best = i;
        }
    }
    Beta::ALL[best]
}

/// Full-search integer block matching on luma toward one or two references,
/// by SAD alone.
pub fn estimate_motion(target: &Frame, ref_past: &Frame, ref_future: Option<&Frame>) -> Result<MotionField> {
    estimate_motion_rd(target, ref_past, ref_future, 0)
}

/// Rate-constrained variant: each vector minimises `SAD + lambda * bits`,
/// where bits approximates the cost of coding it against its median
/// predictor, and the weight pays `lambda` per extra tree bin. Blocks are
/// visited in raster order so predictors use already chosen vectors.
pub fn estimate_motion_rd(target: &Frame, ref_past: &Frame, ref_future: Option<&Frame>, lambda: u32) -> Result<MotionField> {
    if !target.same_geometry(ref_past) || ref_future.is_some_and(|f| !target.same_geometry(f)) {
        return Err(Error::Dimension("motion estimation needs references of the target's geometry".into()));
    }
    let past = PaddedPlane::new(ref_past.luma());
    let future = ref_future.map(|f| PaddedPlane::new(f.luma()));
    let mut field = MotionField::for_frame(target.width, target.height, future.is_some());
    let cols = field.cols;
    for by in 0..field.rows {
        for bx in 0..cols {
            let i = by * cols + bx;
            let r = block_rect(bx, by, target.width, target.height, BLOCK);
            let pred = predictor(&field.mv_past, cols, bx, by);
            field.mv_past[i] = full_search(target.luma(), &past, r, pred, lambda);
            if let (Some(future), Some(mvf), Some(beta)) = (&future, &mut field.mv_future, &mut field.beta) {
                let pred = predictor(mvf, cols, bx, by);
                mvf[i] = full_search(target.luma(), future, r, pred, lambda);
                beta[i] = choose_beta(target.luma(), &past, future, r, field.mv_past[i], mvf[i], lambda);
            }
        }
    }
    Ok(field)
}

fn compensate_plane(out: &mut Plane, past: &Plane, future: Option<&Plane>, field: &MotionField, block: usize, chroma: bool) {
    for by in 0..field.rows {
        for bx in 0..field.cols {
            let i = by * field.cols + bx;
            if bx * block >= out.width || by * block >= out.height {
                continue;
            }
            let r = block_rect(bx, by, out.width, out.height, block);
            let scale = |mv: MotionVector| if chroma { mv.chroma() } else { mv };
            let mp = scale(field.mv_past[i]);
            let beta = field.beta_at(i);
            let mf = field.mv_future.as_ref().map_or(MotionVector::ZERO, |f| scale(f[i]));
            for y in r.y..r.y + r.h {
                for x in r.x..r.x + r.w {
                    let a = past.at_clamped(x as isize + mp.dx as isize, y as isize + mp.dy as isize);
                    let v = match (beta, future) {
                        (Beta::Past, _) | (_, None) => a,
                        (_, Some(fut)) => {
                            let b = fut.at_clamped(x as isize + mf.dx as isize, y as isize + mf.dy as isize);
                            beta.blend(a, b)
                        }
                    };
                    out.set(x, y, v);
                }
            }
        }
    }
}

/// Builds the temporal prediction described by `field`.
pub fn compensate(field: &MotionField, ref_past: &Frame, ref_future: Option<&Frame>) -> Result<Frame> {
    field.check()?;
    if field.is_bidirectional() != ref_future.is_some() {
        return Err(Error::Config("motion field and reference count disagree".into()));
    }
    let mut out = Frame::filled(ref_past.width, ref_past.height, 0);
    out.display_index = ref_past.display_index;
    for p in 0..3 {
        let (block, chroma) = if p == 0 { (BLOCK, false) } else { (BLOCK / 2, true) };
        compensate_plane(&mut out.planes[p], &ref_past.planes[p], ref_future.map(|f| &f.planes[p]), field, block, chroma);
    }
    Ok(out)
}

#[derive(Debug, Clone)]
struct ComponentContexts {
    nonzero: BinaryContext,
    prefix: [BinaryContext; 4],
}

impl Default for ComponentContexts {
    fn default() -> Self {
        ComponentContexts { nonzero: BinaryContext::new(512), prefix: [BinaryContext::default(); 4] }
    }
}

/// Adaptive contexts for one frame's motion payload.
#[derive(Debug, Clone)]
pub struct MotionContexts {
    /// Indexed by [direction][component].
    mvd: [[ComponentContexts; 2]; 2],
    beta: [BinaryContext; 2],
}

impl Default for MotionContexts {
    fn default() -> Self {
        MotionContexts { mvd: Default::default(), beta: [BinaryContext::new(1024), BinaryContext::default()] }
    }
}

fn median3(a: i32, b: i32, c: i32) -> i32 {
    a.max(b).min(a.min(b).max(c))
}

fn predictor(vectors: &[MotionVector], cols: usize, bx: usize, by: usize) -> MotionVector {
    let get = |x: isize, y: isize| {
        if x < 0 || y < 0 || x >= cols as isize {
            MotionVector::ZERO
        } else {
            vectors[y as usize * cols + x as usize]
        }
    };
    let (x, y) = (bx as isize, by as isize);
    let (a, b, c) = (get(x - 1, y), get(x, y - 1), get(x + 1, y - 1));
    MotionVector::new(median3(a.dx, b.dx, c.dx), median3(a.dy, b.dy, c.dy))
}

fn write_component<W: BinWriter>(w: &mut W, ctx: &mut ComponentContexts, v: i32) {
    w.encode_bit(&mut ctx.nonzero, v != 0);
    if v != 0 {
        write_exp_golomb(w, &mut ctx.prefix, v.unsigned_abs() - 1);
        w.encode_bypass((v < 0) as u32, 1);
    }
}

fn read_component(r: &mut RangeDecoder<'_>, ctx: &mut ComponentContexts) -> Result<i32> {
    if !r.decode_bit(&mut ctx.nonzero)? {
        return Ok(0);
    }
    let mag = read_exp_golomb(r, &mut ctx.prefix)?;
    if mag >= 2 * SEARCH_RANGE as u32 {
        return Err(Error::Bitstream(format!("motion vector residual {} out of range", mag + 1)));
    }
    let v = mag as i32 + 1;
    Ok(if r.decode_bypass(1)? == 1 { -v } else { v })
}

fn write_beta<W: BinWriter>(w: &mut W, ctx: &mut [BinaryContext; 2], beta: Beta) {
    w.encode_bit(&mut ctx[0], beta != Beta::Past);
    if beta != Beta::Past {
        w.encode_bit(&mut ctx[1], beta == Beta::Future);
    }
}

fn read_beta(r: &mut RangeDecoder<'_>, ctx: &mut [BinaryContext; 2]) -> Result<Beta> {
    if !r.decode_bit(&mut ctx[0])? {
        return Ok(Beta::Past);
    }
    Ok(if r.decode_bit(&mut ctx[1])? { Beta::Future } else { Beta::Average })
}

/// Writes `field` block by block in raster order: median-predicted vector
/// residuals, then the weight for bi-directional fields. Returns the bits spent.
pub fn encode_motion<W: BinWriter>(field: &MotionField, w: &mut W, ctx: &mut MotionContexts) -> f64 {
    let start = w.cost_q16();
    for by in 0..field.rows {
        for bx in 0..field.cols {
            let i = by * field.cols + bx;
            let lists = std::iter::once(&field.mv_past).chain(field.mv_future.as_ref());
            for (dir, vectors) in lists.enumerate() {
                let pred = predictor(vectors, field.cols, bx, by);
                let mv = vectors[i];
                write_component(w, &mut ctx.mvd[dir][0], mv.dx - pred.dx);
                write_component(w, &mut ctx.mvd[dir][1], mv.dy - pred.dy);
            }
            if let Some(beta) = &field.beta {
                write_beta(w, &mut ctx.beta, beta[i]);
            }
        }
    }
    (w.cost_q16() - start) as f64 / 65536.0
}

pub fn decode_motion(r: &mut RangeDecoder<'_>, ctx: &mut MotionContexts, cols: usize, rows: usize, bidirectional: bool) -> Result<MotionField> {
    let mut field = MotionField::zero(cols, rows, bidirectional);
    for by in 0..rows {
        for bx in 0..cols {
            let i = by * cols + bx;
            for dir in 0..1 + bidirectional as usize {
                let vectors = if dir == 0 { &mut field.mv_past } else { field.mv_future.as_mut().unwrap() };
                let pred = predictor(vectors, cols, bx, by);
                let dx = pred.dx + read_component(r, &mut ctx.mvd[dir][0])?;
                let dy = pred.dy + read_component(r, &mut ctx.mvd[dir][1])?;
                let mv = MotionVector::new(dx, dy);
                if !mv.in_range() {
                    return Err(Error::Bitstream(format!("motion vector ({dx},{dy}) outside search range")));
                }
                vectors[i] = mv;
            }
            if let Some(beta) = &mut field.beta {
                beta[i] = read_beta(r, &mut ctx.beta)?;
            }
        }
    }
    Ok(field)
}
