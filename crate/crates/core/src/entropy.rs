//! Binary range coder with integer adaptive probability models.
//!
//! Everything here is integer arithmetic, so the byte stream is a pure
//! function of the symbol trace on every platform. The coder keeps 32-bit
//! `low`/`range` registers and resolves carries with a delayed byte plus a
//! run counter of pending 0xFF bytes, so no byte stuffing is needed.
//!
//! Streams omit the always-zero leading byte and end with a single flush
//! byte; the decoder reads up to three implicit zero bytes past the end and
//! reports any read beyond that as an underrun.

use crate::error::{Error, Result};

pub const PROB_BITS: u32 = 12;
pub const PROB_ONE: u32 = 1 << PROB_BITS;

const STATE_BITS: u32 = 20;
const STATE_SHIFT: u32 = STATE_BITS - PROB_BITS;
const STATE_MIN: i32 = 1 << STATE_SHIFT;
const STATE_MAX: i32 = ((PROB_ONE as i32 - 1) << STATE_SHIFT) | ((1 << STATE_SHIFT) - 1);
const MAX_RATE_SHIFT: u32 = 10;
const COUNT_LIMIT: u16 = 1 << MAX_RATE_SHIFT;
const TOP: u32 = 1 << 24;
const TAIL_PADDING: usize = 3;

/// Adaptive estimate of P(bit = 1).
///
/// The coder sees a 12-bit probability in `[1, 4095]`. Internally the state
/// keeps 8 extra fraction bits and adapts at rate `2^-shift`, where the shift
/// grows with the number of observed symbols up to 10. Early symbols move the
/// estimate quickly; a warmed-up context averages over about a thousand.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BinaryContext {
    state: i32,
    count: u16,
}

impl Default for BinaryContext {
    fn default() -> Self {
        Self::new(PROB_ONE / 2)
    }
}

impl BinaryContext {
    /// A fresh context with `p1` (out of 4096) as the initial guess.
    pub fn new(p1: u32) -> Self {
        Self::primed(p1, 0)
    }

    /// Like [`BinaryContext::new`], but treats the initial guess as if it had
    /// already been confirmed by `count` symbols.
    pub fn primed(p1: u32, count: u16) -> Self {
        let p1 = p1.clamp(1, PROB_ONE - 1) as i32;
        BinaryContext { state: (p1 << STATE_SHIFT) | (1 << (STATE_SHIFT - 1)), count: count.min(COUNT_LIMIT) }
    }

    /// Probability of a 1, in `[1, 4095]`.
    #[inline]
    pub fn p(&self) -> u32 {
        ((self.state >> STATE_SHIFT) as u32).clamp(1, PROB_ONE - 1)
    }

    #[inline]
    fn rate_shift(&self) -> u32 {
        (u32::from(self.count) + 2).ilog2().clamp(1, MAX_RATE_SHIFT)
    }

    #[inline]
    pub fn update(&mut self, bit: bool) {
        let target = if bit { 1 << STATE_BITS } else { 0 };
        self.state += (target - self.state) >> self.rate_shift();
        self.state = self.state.clamp(STATE_MIN, STATE_MAX);
        if self.count < COUNT_LIMIT {
            self.count += 1;
        }
    }
}

const fn log2_q16(x: u32) -> u32 {
    let int = 31 - x.leading_zeros();
    let mut m: u64 = (x as u64) << (32 - int);
    let mut frac = 0u32;
    let mut i = 0;
    while i < 16 {
        m = ((m as u128 * m as u128) >> 32) as u64;
        if m >= 2 << 32 {
            frac |= 1 << (15 - i);
            m >>= 1;
        }
        i += 1;
    }
    (int << 16) | frac
}

const fn build_cost_table() -> [u32; PROB_ONE as usize] {
    let mut t = [0u32; PROB_ONE as usize];
    let mut p = 1;
    while p < PROB_ONE {
        t[p as usize] = (PROB_BITS << 16) - log2_q16(p);
        p += 1;
    }
    t[0] = t[1];
    t
}

/// `-log2(p / 4096)` in 1/65536 bit units.
static COST_Q16: [u32; PROB_ONE as usize] = build_cost_table();

/// Ideal code length in 1/65536 bits of coding `bit` with `ctx` as it is now.
#[inline]
pub fn bit_cost_q16(ctx: &BinaryContext, bit: bool) -> u32 {
    let p1 = ctx.p();
    COST_Q16[if bit { p1 } else { PROB_ONE - p1 } as usize]
}

/// Sink for binarized symbols; implemented by the real coder and by a rate
/// meter used for trial encodes.
pub trait BinWriter {
    fn encode_bit(&mut self, ctx: &mut BinaryContext, bit: bool);
    /// Writes the low `width` bits of `value`, most significant first, at p = 1/2.
    fn encode_bypass(&mut self, value: u32, width: u32);
    /// Ideal code length of everything written so far, in 1/65536 bits.
    fn cost_q16(&self) -> u64;
}

/// Counts ideal code length without producing bytes.
#[derive(Debug, Clone, Copy, Default)]
pub struct RateMeter {
    pub cost_q16: u64,
}

impl RateMeter {
    pub fn bits(&self) -> f64 {
        self.cost_q16 as f64 / 65536.0
    }
}

impl BinWriter for RateMeter {
    #[inline]
    fn encode_bit(&mut self, ctx: &mut BinaryContext, bit: bool) {
        self.cost_q16 += bit_cost_q16(ctx, bit) as u64;
        ctx.update(bit);
    }

    #[inline]
    fn encode_bypass(&mut self, _value: u32, width: u32) {
        self.cost_q16 += (width as u64) << 16;
    }

    fn cost_q16(&self) -> u64 {
        self.cost_q16
    }
}

#[derive(Debug, Clone)]
pub struct RangeEncoder {
    low: u64,
    range: u32,
    cache: u8,
    has_cache: bool,
    pending: u64,
    out: Vec<u8>,
    symbols: u64,
    cost_q16: u64,
}

impl Default for RangeEncoder {
    fn default() -> Self {
        Self::new()
    }
}

impl RangeEncoder {
    pub fn new() -> Self {
        RangeEncoder {
            low: 0,
            range: u32::MAX,
            cache: 0,
            has_cache: false,
            pending: 0,
            out: Vec::new(),
            symbols: 0,
            cost_q16: 0,
        }
    }

    fn shift_low(&mut self) {
        if (self.low as u32) < 0xFF00_0000 || self.low >> 32 != 0 {
            let carry = (self.low >> 32) as u8;
            if self.has_cache {
                self.out.push(self.cache.wrapping_add(carry));
            }
            for _ in 0..self.pending {
                self.out.push(0xFFu8.wrapping_add(carry));
            }
            self.pending = 0;
            self.cache = (self.low >> 24) as u8;
            self.has_cache = true;
        } else {
            self.pending += 1;
        }
        self.low = (self.low & 0x00FF_FFFF) << 8;
    }

    #[inline]
    fn normalize(&mut self) {
        while self.range < TOP {
            self.range <<= 8;
            self.shift_low();
        }
    }

    /// Terminates the stream. An encoder that saw no symbols yields no bytes.
    pub fn finish(mut self) -> Vec<u8> {
        if self.symbols == 0 {
            return Vec::new();
        }
        // Pick the value in [low, low + range) whose low 24 bits are zero;
        // the decoder's implicit zero padding supplies them.
        self.low = (self.low + 0x00FF_FFFF) & !0x00FF_FFFF;
        self.shift_low();
        self.shift_low();
        self.out
    }
}

impl BinWriter for RangeEncoder {
    #[inline]
    fn encode_bit(&mut self, ctx: &mut BinaryContext, bit: bool) {
        let p1 = ctx.p();
        self.cost_q16 += bit_cost_q16(ctx, bit) as u64;
        let bound = (self.range >> PROB_BITS) * p1;
        if bit {
            self.range = bound;
        } else {
            self.low += bound as u64;
            self.range -= bound;
        }
        self.normalize();
        ctx.update(bit);
        self.symbols += 1;
    }

    fn encode_bypass(&mut self, value: u32, width: u32) {
        debug_assert!(width <= 32);
        for i in (0..width).rev() {
            self.range >>= 1;
            if (value >> i) & 1 == 1 {
                self.low += self.range as u64;
            }
            self.normalize();
        }
        self.cost_q16 += (width as u64) << 16;
        self.symbols += width as u64;
    }

    fn cost_q16(&self) -> u64 {
        self.cost_q16
    }
}

pub struct RangeDecoder<'a> {
    data: &'a [u8],
    pos: usize,
    code: u32,
    range: u32,
    started: bool,
}

impl<'a> RangeDecoder<'a> {
    pub fn new(data: &'a [u8]) -> Self {
        RangeDecoder { data, pos: 0, code: 0, range: u32::MAX, started: false }
    }

    #[inline]
    fn next_byte(&mut self) -> Result<u8> {
        let b = match self.data.get(self.pos) {
            Some(&b) => b,
            None if self.pos < self.data.len() + TAIL_PADDING => 0,
            None => {
                return Err(Error::Bitstream(format!(
                    "range decoder underrun after {} bytes",
                    self.data.len()
                )))
            }
        };
        self.pos += 1;
        Ok(b)
    }

    #[inline]
    fn start(&mut self) -> Result<()> {
        if !self.started {
            for _ in 0..4 {
                self.code = (self.code << 8) | self.next_byte()? as u32;
            }
            self.started = true;
        }
        Ok(())
    }

    #[inline]
    fn normalize(&mut self) -> Result<()> {
        while self.range < TOP {
            self.range <<= 8;
            self.code = (self.code << 8) | self.next_byte()? as u32;
        }
        Ok(())
    }

    pub fn decode_bit(&mut self, ctx: &mut BinaryContext) -> Result<bool> {
        self.start()?;
        let bound = (self.range >> PROB_BITS) * ctx.p();
        let bit = if self.code < bound {
            self.range = bound;
            true
        } else {
            self.code -= bound;
            self.range -= bound;
            false
        };
        self.normalize()?;
        ctx.update(bit);
        Ok(bit)
    }

    pub fn decode_bypass(&mut self, width: u32) -> Result<u32> {
        debug_assert!(width <= 32);
        if width == 0 {
            return Ok(0);
        }
        self.start()?;
        let mut value = 0u32;
        for _ in 0..width {
            self.range >>= 1;
            let bit = if self.code >= self.range {
                self.code -= self.range;
                1
            } else {
                0
            };
            value = (value << 1) | bit;
            self.normalize()?;
        }
        Ok(value)
    }

    /// Checks that decoding consumed the stream exactly as the encoder
    /// produced it; any truncation or trailing data shows up here.
    pub fn finish(&self) -> Result<()> {
        let expected = if self.data.is_empty() && !self.started { 0 } else { self.data.len() + TAIL_PADDING };
        if self.pos != expected {
            return Err(Error::Bitstream(format!(
                "payload of {} bytes left {} unread",
                self.data.len(),
                expected as isize - self.pos as isize
            )));
        }
        Ok(())
    }
}

/// Writes `v >= 0` as order-0 exp-Golomb: a unary prefix through contexts
/// (the last context repeats) followed by a bypass-coded suffix.
pub fn write_exp_golomb<W: BinWriter>(w: &mut W, prefix_ctx: &mut [BinaryContext], v: u32) {
    let len = (v + 1).ilog2();
    let last = prefix_ctx.len() - 1;
    for i in 0..len {
        w.encode_bit(&mut prefix_ctx[(i as usize).min(last)], true);
    }
    if len < 31 {
        w.encode_bit(&mut prefix_ctx[(len as usize).min(last)], false);
    }
    w.encode_bypass(v + 1 - (1 << len), len);
}

pub fn read_exp_golomb(r: &mut RangeDecoder<'_>, prefix_ctx: &mut [BinaryContext]) -> Result<u32> {
    let last = prefix_ctx.len() - 1;
    let mut len = 0u32;
    while len < 31 && r.decode_bit(&mut prefix_ctx[(len as usize).min(last)])? {
        len += 1;
    }
    let suffix = r.decode_bypass(len)?;
    Ok((1u32 << len) - 1 + suffix)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand::rngs::StdRng;

    #[test]
    fn cost_table_matches_log2() {
        for p in [1u32, 2, 3, 100, 2048, 3000, 4095] {
            let exact = -(p as f64 / 4096.0).log2();
            let got = COST_Q16[p as usize] as f64 / 65536.0;
            assert!((exact - got).abs() < 1e-4, "p={p} exact={exact} got={got}");
        }
    }

    #[test]
    fn empty_stream() {
        let enc = RangeEncoder::new();
        assert!(enc.finish().is_empty());
        let mut dec = RangeDecoder::new(&[]);
        assert!(matches!(dec.decode_bit(&mut BinaryContext::default()), Err(Error::Bitstream(_))));
    }

    #[test]
    fn bypass_values() {
        let mut enc = RangeEncoder::new();
        enc.encode_bypass(5, 3);
        enc.encode_bypass(123, 0);
        enc.encode_bypass(u32::MAX, 32);
        enc.encode_bypass(0, 32);
        let bytes = enc.finish();
        let mut dec = RangeDecoder::new(&bytes);
        assert_eq!(dec.decode_bypass(3).unwrap(), 5);
        assert_eq!(dec.decode_bypass(0).unwrap(), 0);
        assert_eq!(dec.decode_bypass(32).unwrap(), u32::MAX);
        assert_eq!(dec.decode_bypass(32).unwrap(), 0);
        dec.finish().unwrap();
    }

    #[test]
    fn bypass_rate_is_one_bit() {
        let mut rng = StdRng::seed_from_u64(7);
        let mut enc = RangeEncoder::new();
        for _ in 0..100_000 {
            enc.encode_bypass(rng.gen::<bool>() as u32, 1);
        }
        let n = enc.finish().len() as f64;
        assert!((n - 12_500.0).abs() <= 0.02 * 12_500.0, "{n} bytes");
    }

    #[test]
    fn flush_is_short() {
        let mut enc = RangeEncoder::new();
        enc.encode_bit(&mut BinaryContext::default(), true);
        assert!(enc.finish().len() <= 5);
    }

    #[test]
    fn truncation_detected() {
        let mut rng = StdRng::seed_from_u64(3);
        let bits: Vec<bool> = (0..5000).map(|_| rng.gen()).collect();
        let mut enc = RangeEncoder::new();
        let mut ctx = BinaryContext::default();
        for &b in &bits {
            enc.encode_bit(&mut ctx, b);
        }
        let bytes = enc.finish();
        let cut = &bytes[..bytes.len() - 1];
        let mut dec = RangeDecoder::new(cut);
        let mut ctx = BinaryContext::default();
        let res: Result<Vec<bool>> = bits.iter().map(|_| dec.decode_bit(&mut ctx)).collect();
        assert!(res.is_err() || dec.finish().is_err());
    }

    #[test]
    fn exp_golomb_roundtrip() {
        let values = [0u32, 1, 2, 3, 7, 8, 1000, 65535, 1 << 30];
        let mut enc = RangeEncoder::new();
        let mut ctx = [BinaryContext::default(); 4];
        for &v in &values {
            write_exp_golomb(&mut enc, &mut ctx, v);
        }
        let bytes = enc.finish();
        let mut dec = RangeDecoder::new(&bytes);
        let mut ctx = [BinaryContext::default(); 4];
        for &v in &values {
            assert_eq!(read_exp_golomb(&mut dec, &mut ctx).unwrap(), v);
        }
        dec.finish().unwrap();
    }

    #[test]
    fn meter_agrees_with_encoder_cost() {
        let mut rng = StdRng::seed_from_u64(11);
        let mut enc = RangeEncoder::new();
        let mut meter = RateMeter::default();
        let (mut a, mut b) = ([BinaryContext::default(); 4], [BinaryContext::default(); 4]);
        for _ in 0..10_000 {
            let i = rng.gen_range(0..4);
            let bit = rng.gen_bool(0.2);
            enc.encode_bit(&mut a[i], bit);
            meter.encode_bit(&mut b[i], bit);
        }
        assert_eq!(enc.cost_q16(), meter.cost_q16);
        let actual = enc.finish().len() as f64 * 8.0;
        assert!((actual - meter.bits()).abs() < 0.01 * meter.bits() + 32.0);
    }

    proptest! {
        #[test]
        fn context_stays_in_range(init in 0u32..5000, bits in prop::collection::vec(any::<bool>(), 0..3000)) {
            let mut ctx = BinaryContext::new(init);
            prop_assert!((1..=4095).contains(&ctx.p()));
            for b in bits {
                ctx.update(b);
                prop_assert!((1..=4095).contains(&ctx.p()));
            }
        }

        #[test]
        fn trace_roundtrip(trace in prop::collection::vec((0usize..8, any::<bool>(), 0u32..3), 0..2000)) {
            let mut enc = RangeEncoder::new();
            let mut ctx = [BinaryContext::default(); 8];
            for &(i, b, kind) in &trace {
                if kind == 0 { enc.encode_bypass(b as u32, 1) } else { enc.encode_bit(&mut ctx[i], b) }
            }
            let bytes = enc.finish();
            let mut dec = RangeDecoder::new(&bytes);
            let mut ctx = [BinaryContext::default(); 8];
            for &(i, b, kind) in &trace {
                let got = if kind == 0 { dec.decode_bypass(1).unwrap() == 1 } else { dec.decode_bit(&mut ctx[i]).unwrap() };
                prop_assert_eq!(got, b);
            }
            prop_assert!(dec.finish().is_ok());
        }
    }
}
