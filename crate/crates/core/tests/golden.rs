//! Frozen byte outputs. Regenerate with `RDVK_BLESS=1 cargo test --test golden`
//! only when the format is changed on purpose.

use std::fs;
use std::path::PathBuf;

use rdvk_core::codec::{decode_stream, encode_sequence, CodingChoice};
use rdvk_core::entropy::{BinWriter, BinaryContext, RangeDecoder, RangeEncoder};
use rdvk_core::media::{Fps, Frame, Sequence};
use serde::{Deserialize, Serialize};

fn golden(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)
}

fn bless() -> bool {
    std::env::var_os("RDVK_BLESS").is_some()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
enum Op {
    Bit { ctx: usize, bit: bool },
    Bypass { value: u32, width: u32 },
}

#[derive(Debug, PartialEq, Serialize, Deserialize)]
struct Trace {
    name: String,
    /// Initial P(bit = 1) of each context, out of 4096.
    contexts: Vec<u32>,
    ops: Vec<Op>,
    bytes: String,
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn lcg(state: &mut u64) -> u32 {
    *state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    (*state >> 33) as u32
}

fn make_traces() -> Vec<(String, Vec<u32>, Vec<Op>)> {
    let mut out = vec![
        ("empty".to_string(), vec![2048], vec![]),
        ("single_one".to_string(), vec![2048], vec![Op::Bit { ctx: 0, bit: true }]),
        ("all_zero_skewed".to_string(), vec![4000], (0..64).map(|_| Op::Bit { ctx: 0, bit: false }).collect()),
        (
            "bypass_only".to_string(),
            vec![2048],
            [(0u32, 1u32), (1, 1), (5, 3), (255, 8), (0xABCDE, 20), (0x7FFF_FFFF, 31)]
                .iter()
                .map(|&(value, width)| Op::Bypass { value, width })
                .collect(),
        ),
    ];
    let mut s = 0x5EED_u64;
    let mut mixed = Vec::new();
    for _ in 0..400 {
        let r = lcg(&mut s);
        mixed.push(match r % 7 {
            0 => Op::Bypass { value: lcg(&mut s) & 0xFF, width: 8 },
            k => {
                let ctx = (k % 3) as usize;
                let threshold = [200u32, 2048, 3900][ctx];
                Op::Bit { ctx, bit: lcg(&mut s) % 4096 < threshold }
            }
        });
    }
    out.push(("mixed_three_contexts".to_string(), vec![1024, 2048, 3072], mixed));
    out
}

fn encode_trace(contexts: &[u32], ops: &[Op]) -> Vec<u8> {
    let mut ctx: Vec<BinaryContext> = contexts.iter().map(|&p| BinaryContext::new(p)).collect();
    let mut enc = RangeEncoder::new();
    for op in ops {
        match *op {
            Op::Bit { ctx: c, bit } => enc.encode_bit(&mut ctx[c], bit),
            Op::Bypass { value, width } => enc.encode_bypass(value, width),
        }
    }
    enc.finish()
}

#[test]
fn entropy_traces_match_golden_bytes() {
    let path = golden("entropy_traces.json");
    if bless() {
        let traces: Vec<Trace> = make_traces()
            .into_iter()
            .map(|(name, contexts, ops)| {
                let bytes = hex(&encode_trace(&contexts, &ops));
                Trace { name, contexts, ops, bytes }
            })
            .collect();
        fs::write(&path, serde_json::to_string_pretty(&traces).unwrap()).unwrap();
    }
    let traces: Vec<Trace> = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(traces.len(), make_traces().len());
    for t in &traces {
        let bytes = encode_trace(&t.contexts, &t.ops);
        assert_eq!(hex(&bytes), t.bytes, "trace {}", t.name);

        let mut ctx: Vec<BinaryContext> = t.contexts.iter().map(|&p| BinaryContext::new(p)).collect();
        let mut dec = RangeDecoder::new(&bytes);
        for op in &t.ops {
            match *op {
                Op::Bit { ctx: c, bit } => assert_eq!(dec.decode_bit(&mut ctx[c]).unwrap(), bit, "trace {}", t.name),
                Op::Bypass { value, width } => assert_eq!(dec.decode_bypass(width).unwrap(), value, "trace {}", t.name),
            }
        }
        dec.finish().unwrap();
    }
}

fn sample_sequence() -> Sequence {
    let (w, h) = (40, 24);
    let frames = (0..6)
        .map(|t| {
            let mut f = Frame::filled(w, h, 128);
            for (pi, plane) in f.planes.iter_mut().enumerate() {
                let (pw, ph) = (plane.width, plane.height);
                for y in 0..ph {
                    for x in 0..pw {
                        let v = ((x + t * 2) * 7 + y * 3 + pi * 40) % 256;
                        plane.set(x, y, if (x / 6 + y / 6) % 2 == 0 { v as u8 } else { 255 - v as u8 });
                    }
                }
            }
            f.with_index(t)
        })
        .collect();
    Sequence::new("golden", Fps::new(25, 1).unwrap(), frames).unwrap()
}

#[test]
fn sample_stream_matches_golden() {
    let path = golden("sample_ip32_gop4_q5.rdv");
    let enc = encode_sequence(&sample_sequence(), &CodingChoice::new(32, 4, 5, false).unwrap()).unwrap();
    let bytes = enc.to_bytes();
    if bless() {
        fs::write(&path, &bytes).unwrap();
    }
    let frozen = fs::read(&path).unwrap();
    assert_eq!(bytes, frozen);
    let decoded = decode_stream(&frozen, "golden").unwrap();
    assert_eq!(decoded.sequence.frames, enc.output("golden").unwrap().frames);
}
