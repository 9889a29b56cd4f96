//! The `.rdv` container: a fixed 22-byte little-endian header followed by
//! one length-prefixed range-coder payload per frame, in coding order.
//! The byte layout is documented in `docs/format.md`.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::residual::QualityLevel;
use crate::schedule::check_structure;

pub const MAGIC: [u8; 4] = *b"RDV1";
pub const VERSION: u8 = 1;
pub const HEADER_LEN: usize = 22;
const RECORD_PREFIX: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamHeader {
    /// Original (pre-downsampling) luma width.
    pub width: u16,
    pub height: u16,
    pub frame_count: u32,
    pub fps_num: u16,
    pub fps_den: u16,
    pub intra_period: u16,
    pub gop_size: u8,
    pub quality: u8,
    pub downsample: bool,
}

impl StreamHeader {
    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::Parse(format!("invalid geometry {}x{}", self.width, self.height)));
        }
        if self.downsample && (self.width < 2 || self.height < 2) {
            return Err(Error::Parse("downsampled stream narrower than 2 pixels".into()));
        }
        if self.fps_num == 0 || self.fps_den == 0 {
            return Err(Error::Parse(format!("invalid frame rate {}/{}", self.fps_num, self.fps_den)));
        }
        QualityLevel::new(self.quality).map_err(|e| Error::Parse(e.to_string()))?;
        check_structure(self.intra_period as usize, self.gop_size as usize).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn quality_level(&self) -> QualityLevel {
        QualityLevel::new(self.quality).expect("validated header")
    }

    pub fn to_bytes(&self) -> [u8; HEADER_LEN] {
        let mut b = [0u8; HEADER_LEN];
        b[0..4].copy_from_slice(&MAGIC);
        b[4] = VERSION;
        b[5..7].copy_from_slice(&self.width.to_le_bytes());
        b[7..9].copy_from_slice(&self.height.to_le_bytes());
        b[9..13].copy_from_slice(&self.frame_count.to_le_bytes());
        b[13..15].copy_from_slice(&self.fps_num.to_le_bytes());
        b[15..17].copy_from_slice(&self.fps_den.to_le_bytes());
        b[17..19].copy_from_slice(&self.intra_period.to_le_bytes());
        b[19] = self.gop_size;
        b[20] = self.quality;
        b[21] = self.downsample as u8;
        b
    }

    pub fn from_bytes(b: &[u8]) -> Result<Self> {
        if b.len() < 4 || b[0..4] != MAGIC {
            return Err(Error::Parse("missing RDV1 magic".into()));
        }
        if b.len() < HEADER_LEN {
            return Err(Error::Truncation(format!("header has {} of {HEADER_LEN} bytes", b.len())));
        }
        if b[4] != VERSION {
            return Err(Error::Version(b[4]));
        }
        let u16_at = |i: usize| u16::from_le_bytes([b[i], b[i + 1]]);
        let downsample = match b[21] {
            0 => false,
            1 => true,
            v => return Err(Error::Parse(format!("downsample flag {v}"))),
        };
        let h = StreamHeader {
            width: u16_at(5),
            height: u16_at(7),
            frame_count: u32::from_le_bytes([b[9], b[10], b[11], b[12]]),
            fps_num: u16_at(13),
            fps_den: u16_at(15),
            intra_period: u16_at(17),
            gop_size: b[19],
            quality: b[20],
            downsample,
        };
        h.validate()?;
        Ok(h)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FramePayload {
    pub coding_order: u32,
    pub bytes: Vec<u8>,
}

/// Size in bytes of the serialized stream.
pub fn stream_len(payloads: &[FramePayload]) -> usize {
    HEADER_LEN + payloads.iter().map(|p| RECORD_PREFIX + p.bytes.len()).sum::<usize>()
}

pub fn serialize(header: &StreamHeader, payloads: &[FramePayload]) -> Result<Vec<u8>> {
    header.validate().map_err(|e| Error::Config(e.to_string()))?;
    if payloads.len() != header.frame_count as usize {
        return Err(Error::Config(format!(
            "header declares {} frames but {} payloads were given",
            header.frame_count,
            payloads.len()
        )));
    }
    let mut out = Vec::with_capacity(stream_len(payloads));
    out.extend_from_slice(&header.to_bytes());
    for (i, p) in payloads.iter().enumerate() {
        if p.coding_order as usize != i {
            return Err(Error::Config(format!("payload {i} carries coding order {}", p.coding_order)));
        }
        let len = u32::try_from(p.bytes.len()).map_err(|_| Error::Config("payload exceeds 4 GiB".into()))?;
        out.extend_from_slice(&p.coding_order.to_le_bytes());
        out.extend_from_slice(&len.to_le_bytes());
        out.extend_from_slice(&p.bytes);
    }
    Ok(out)
}

pub fn parse(bytes: &[u8]) -> Result<(StreamHeader, Vec<FramePayload>)> {
    let header = StreamHeader::from_bytes(bytes)?;
    let mut pos = HEADER_LEN;
    let mut payloads = Vec::with_capacity((header.frame_count as usize).min(1 << 16));
    for i in 0..header.frame_count {
        if bytes.len() - pos < RECORD_PREFIX {
            return Err(Error::Truncation(format!("frame record {i} header cut short")));
        }
        let word = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap());
        let (order, len) = (word(pos), word(pos + 4) as usize);
        pos += RECORD_PREFIX;
        if order != i {
            return Err(Error::Parse(format!("frame record {i} carries coding order {order}")));
        }
        if bytes.len() - pos < len {
            return Err(Error::Truncation(format!("frame {i} payload has {} of {len} bytes", bytes.len() - pos)));
        }
        payloads.push(FramePayload { coding_order: order, bytes: bytes[pos..pos + len].to_vec() });
        pos += len;
    }
    if pos != bytes.len() {
        return Err(Error::Parse(format!("{} bytes of trailing data", bytes.len() - pos)));
    }
    Ok((header, payloads))
}

pub fn write_stream(header: &StreamHeader, payloads: &[FramePayload], path: &Path) -> Result<()> {
    let bytes = serialize(header, payloads)?;
    fs::write(path, bytes)?;
    Ok(())
}

pub fn parse_stream(path: &Path) -> Result<(StreamHeader, Vec<FramePayload>)> {
    parse(&fs::read(path)?)
}
