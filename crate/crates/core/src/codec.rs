//! Whole-sequence encoding and decoding on top of the frame codec.

use std::borrow::Cow;

use serde::{Deserialize, Serialize};

use crate::bitstream::{self, FramePayload, StreamHeader};
use crate::error::{Error, Result};
use crate::media::{downsample_sequence, upsample2x, Fps, Frame, Sequence};
use crate::motion::MotionField;
use crate::residual::{decode_frame, encode_frame, FrameStats, QualityLevel};
use crate::schedule::{build_schedule, check_structure, FrameSchedule};

/// One point of the configuration space a sequence competes over.
///
/// The derived ordering (intra period, GOP, quality, downsampling) is the
/// final tie-break of candidate selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CodingChoice {
    pub intra_period: usize,
    pub gop_size: usize,
    pub quality: QualityLevel,
    pub downsample: bool,
}

impl CodingChoice {
    pub fn new(intra_period: usize, gop_size: usize, quality: u8, downsample: bool) -> Result<Self> {
        let c = CodingChoice { intra_period, gop_size, quality: QualityLevel::new(quality)?, downsample };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        check_structure(self.intra_period, self.gop_size)?;
        if self.intra_period > u16::MAX as usize || self.gop_size > u8::MAX as usize {
            return Err(Error::Config(format!(
                "intra period {} / GOP {} exceed the container fields",
                self.intra_period, self.gop_size
            )));
        }
        Ok(())
    }

    /// Compact label, e.g. `ip32-g8-q5-ds`.
    pub fn label(&self) -> String {
        format!(
            "ip{}-g{}-q{}{}",
            self.intra_period,
            self.gop_size,
            self.quality.index(),
            if self.downsample { "-ds" } else { "" }
        )
    }
}

/// Encoder output for one sequence.
#[derive(Debug, Clone)]
pub struct EncodedSequence {
    pub header: StreamHeader,
    pub payloads: Vec<FramePayload>,
    pub schedule: FrameSchedule,
    /// Per-frame statistics in coding order.
    pub frame_stats: Vec<FrameStats>,
    /// Motion fields in coding order (`None` for I frames).
    pub motion: Vec<Option<MotionField>>,
    /// Encoder-side reconstruction at the coded resolution, display order.
    pub reconstruction: Vec<Frame>,
}

impl EncodedSequence {
    pub fn to_bytes(&self) -> Vec<u8> {
        bitstream::serialize(&self.header, &self.payloads).expect("encoder produced a consistent stream")
    }

    /// Container size in bits, header included.
    pub fn total_bits(&self) -> u64 {
        bitstream::stream_len(&self.payloads) as u64 * 8
    }

    /// Reconstruction at the original resolution.
    pub fn output(&self, name: &str) -> Result<Sequence> {
        restore(&self.header, self.reconstruction.clone(), name)
    }
}

fn narrow<T: TryFrom<usize>>(v: usize, what: &str) -> Result<T> {
    T::try_from(v).map_err(|_| Error::Config(format!("{what} {v} does not fit the container")))
}

fn header_for(seq: &Sequence, choice: &CodingChoice) -> Result<StreamHeader> {
    Ok(StreamHeader {
        width: narrow(seq.width(), "width")?,
        height: narrow(seq.height(), "height")?,
        frame_count: narrow(seq.len(), "frame count")?,
        fps_num: narrow(seq.fps.num as usize, "frame-rate numerator")?,
        fps_den: narrow(seq.fps.den as usize, "frame-rate denominator")?,
        intra_period: narrow(choice.intra_period, "intra period")?,
        gop_size: narrow(choice.gop_size, "GOP size")?,
        quality: choice.quality.index(),
        downsample: choice.downsample,
    })
}

/// Geometry of the frames actually coded.
fn coded_dims(h: &StreamHeader) -> (usize, usize) {
    let (w, ht) = (h.width as usize, h.height as usize);
    if h.downsample {
        (w / 2, ht / 2)
    } else {
        (w, ht)
    }
}

fn restore(header: &StreamHeader, frames: Vec<Frame>, name: &str) -> Result<Sequence> {
    let frames = if header.downsample {
        frames
            .iter()
            .map(|f| upsample2x(f, header.width as usize, header.height as usize))
            .collect::<Result<Vec<_>>>()?
    } else {
        frames
    };
    Sequence::new(name, Fps::new(header.fps_num as u32, header.fps_den as u32)?, frames)
}

pub fn encode_sequence(seq: &Sequence, choice: &CodingChoice) -> Result<EncodedSequence> {
    choice.validate()?;
    if seq.is_empty() {
        return Err(Error::Config("cannot encode an empty sequence".into()));
    }
    let header = header_for(seq, choice)?;
    let coded: Cow<'_, Sequence> = if choice.downsample { Cow::Owned(downsample_sequence(seq)?) } else { Cow::Borrowed(seq) };
    let schedule = build_schedule(seq.len(), choice.intra_period, choice.gop_size)?;

    let mut recon: Vec<Option<Frame>> = vec![None; seq.len()];
    let mut payloads = Vec::with_capacity(seq.len());
    let mut frame_stats = Vec::with_capacity(seq.len());
    let mut motion = Vec::with_capacity(seq.len());
    for e in &schedule.entries {
        let past = e.ref_past.map(|r| recon[r].as_ref().expect("schedule codes references first"));
        let future = e.ref_future.map(|r| recon[r].as_ref().expect("schedule codes references first"));
        let out = encode_frame(&coded.frames[e.display_index], e, past, future, choice.quality)?;
        payloads.push(FramePayload { coding_order: e.coding_order as u32, bytes: out.payload });
        frame_stats.push(out.stats);
        motion.push(out.motion);
        recon[e.display_index] = Some(out.reconstruction);
    }
    let reconstruction = recon.into_iter().map(|f| f.expect("schedule covers every frame")).collect();
    Ok(EncodedSequence { header, payloads, schedule, frame_stats, motion, reconstruction })
}

/// A decoded stream: its header and the video at the original resolution.
#[derive(Debug, Clone)]
pub struct DecodedSequence {
    pub header: StreamHeader,
    pub sequence: Sequence,
}

/// Decodes a complete `.rdv` byte stream with no side information.
pub fn decode_stream(bytes: &[u8], name: &str) -> Result<DecodedSequence> {
    let (header, payloads) = bitstream::parse(bytes)?;
    if header.frame_count == 0 {
        return Ok(DecodedSequence { sequence: restore(&header, vec![], name)?, header });
    }
    let schedule = build_schedule(header.frame_count as usize, header.intra_period as usize, header.gop_size as usize)
        .map_err(|e| Error::Parse(e.to_string()))?;
    let (w, h) = coded_dims(&header);
    let q = header.quality_level();
    let mut recon: Vec<Option<Frame>> = vec![None; payloads.len()];
    for (e, p) in schedule.entries.iter().zip(&payloads) {
        let past = e.ref_past.and_then(|r| recon[r].as_ref());
        let future = e.ref_future.and_then(|r| recon[r].as_ref());
        recon[e.display_index] = Some(decode_frame(e, w, h, past, future, q, &p.bytes)?);
    }
    let frames = recon.into_iter().map(|f| f.expect("schedule covers every frame")).collect();
    Ok(DecodedSequence { sequence: restore(&header, frames, name)?, header })
}
