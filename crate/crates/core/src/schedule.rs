//! Coding-order construction for I/P/hierarchical-B frame structures.
//!
//! A sequence is cut into independent segments of `intra_period` frames, each
//! opened by an I frame. Inside a segment, every `gop_size`-th frame is a P
//! anchor predicted from the previous anchor, and the frames between two
//! anchors are B frames coded midpoint-first.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FrameType {
    I,
    P,
    B,
}

impl FrameType {
    pub fn reference_count(self) -> usize {
        match self {
            FrameType::I => 0,
            FrameType::P => 1,
            FrameType::B => 2,
        }
    }
}

impl fmt::Display for FrameType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            FrameType::I => "I",
            FrameType::P => "P",
            FrameType::B => "B",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduleEntry {
    pub display_index: usize,
    pub frame_type: FrameType,
    pub ref_past: Option<usize>,
    pub ref_future: Option<usize>,
    pub coding_order: usize,
}

impl ScheduleEntry {
    pub fn references(&self) -> impl Iterator<Item = usize> {
        self.ref_past.into_iter().chain(self.ref_future)
    }
}

/// Entries listed in coding order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameSchedule {
    pub entries: Vec<ScheduleEntry>,
    pub intra_period: usize,
    pub gop_size: usize,
}

pub fn check_structure(intra_period: usize, gop_size: usize) -> Result<()> {
    if intra_period == 0 {
        return Err(Error::Config("intra period must be at least 1".into()));
    }
    if gop_size == 0 || !gop_size.is_power_of_two() {
        return Err(Error::Config(format!("GOP size {gop_size} is not a power of two")));
    }
    if gop_size > intra_period {
        return Err(Error::Config(format!(
            "GOP size {gop_size} exceeds intra period {intra_period}"
        )));
    }
    Ok(())
}

struct Builder {
    entries: Vec<ScheduleEntry>,
}

impl Builder {
    fn push(&mut self, display_index: usize, frame_type: FrameType, ref_past: Option<usize>, ref_future: Option<usize>) {
        let coding_order = self.entries.len();
        self.entries.push(ScheduleEntry { display_index, frame_type, ref_past, ref_future, coding_order });
    }

    /// Frames strictly between two coded anchors, midpoint first.
    fn fill_b(&mut self, lo: usize, hi: usize) {
        if hi - lo < 2 {
            return;
        }
        let mid = (lo + hi) / 2;
        self.push(mid, FrameType::B, Some(lo), Some(hi));
        self.fill_b(lo, mid);
        self.fill_b(mid, hi);
    }
}

pub fn build_schedule(n_frames: usize, intra_period: usize, gop_size: usize) -> Result<FrameSchedule> {
    if n_frames == 0 {
        return Err(Error::Config("cannot schedule an empty sequence".into()));
    }
    check_structure(intra_period, gop_size)?;

    let mut b = Builder { entries: Vec::with_capacity(n_frames) };
    for start in (0..n_frames).step_by(intra_period) {
        let end = (start + intra_period).min(n_frames);
        b.push(start, FrameType::I, None, None);
        let mut anchor = start;
        while anchor + 1 < end {
            let next = (anchor + gop_size).min(end - 1);
            b.push(next, FrameType::P, Some(anchor), None);
            b.fill_b(anchor, next);
            anchor = next;
        }
    }
    Ok(FrameSchedule { entries: b.entries, intra_period, gop_size })
}

fn violation(index: usize, reason: impl Into<String>) -> Error {
    Error::ScheduleInvariant { index, reason: reason.into() }
}

/// Checks coverage, reference structure, decodability and segment isolation.
pub fn validate_schedule(s: &FrameSchedule) -> Result<()> {
    let n = s.entries.len();
    if n == 0 {
        return Err(violation(0, "schedule is empty"));
    }
    if s.intra_period == 0 || s.gop_size == 0 {
        return Err(violation(0, "intra period and GOP size must be positive"));
    }
    let first = &s.entries[0];
    if first.frame_type != FrameType::I || first.display_index != 0 {
        return Err(violation(first.display_index, "first coded frame must be I at display index 0"));
    }

    let mut coded = vec![false; n];
    for (rank, e) in s.entries.iter().enumerate() {
        let d = e.display_index;
        if d >= n {
            return Err(violation(d, format!("display index outside 0..{n}")));
        }
        if coded[d] {
            return Err(violation(d, "display index scheduled twice"));
        }
        if e.coding_order != rank {
            return Err(violation(d, format!("coding order {} listed at rank {rank}", e.coding_order)));
        }
        let segment = d / s.intra_period;
        let is_segment_start = d % s.intra_period == 0;
        if (e.frame_type == FrameType::I) != is_segment_start {
            return Err(violation(d, "I frames must sit exactly on intra-period boundaries"));
        }
        match (e.frame_type, e.ref_past, e.ref_future) {
            (FrameType::I, None, None) => {}
            (FrameType::P, Some(p), None) if p < d => {}
            (FrameType::B, Some(p), Some(f)) if p < d && d < f => {}
            _ => return Err(violation(d, format!("{} frame has illegal references {:?}/{:?}", e.frame_type, e.ref_past, e.ref_future))),
        }
        for r in e.references() {
            if r >= n || !coded[r] {
                return Err(violation(d, format!("reference {r} is not coded earlier")));
            }
            if r / s.intra_period != segment {
                return Err(violation(d, format!("reference {r} lies in another segment")));
            }
        }
        coded[d] = true;
    }
    if let Some(missing) = coded.iter().position(|&c| !c) {
        return Err(violation(missing, "display index never scheduled"));
    }
    Ok(())
}

impl FrameSchedule {
    /// One JSON object per line, in coding order.
    pub fn to_json_lines(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            let refs: Vec<usize> = e.references().collect();
            let line = serde_json::json!({
                "display_index": e.display_index,
                "type": e.frame_type.to_string(),
                "refs": refs,
                "coding_order": e.coding_order,
            });
            out.push_str(&line.to_string());
            out.push('\n');
        }
        out
    }
}
