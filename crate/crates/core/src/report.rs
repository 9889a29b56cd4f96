//! Challenge-style run reports: a per-sequence table with dataset totals and
//! a histogram of the selected coding options.

use std::collections::BTreeMap;
use std::fmt::Write;

use serde::Serialize;

use crate::codec::CodingChoice;
use crate::competition::CompetitionResult;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub sequence: String,
    pub choice: CodingChoice,
    pub bits: u64,
    pub ms_ssim_db: f64,
    pub psnr: f64,
    pub decode_seconds: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Totals {
    pub bits: u64,
    pub data_size_mbytes: f64,
    pub mean_psnr: f64,
    pub mean_ms_ssim_db: f64,
    pub decode_seconds: Option<f64>,
}

/// Counts of each selected option value.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct OptionHistogram {
    pub intra_period: BTreeMap<usize, usize>,
    pub gop_size: BTreeMap<usize, usize>,
    pub quality: BTreeMap<u8, usize>,
    pub downsample: BTreeMap<bool, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub rows: Vec<ReportRow>,
    pub totals: Totals,
    pub histogram: OptionHistogram,
    pub lambda: f64,
    pub budget_bits: Option<u64>,
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

impl RunReport {
    /// `decode_seconds`, when given, holds one wall time per selection.
    pub fn new(result: &CompetitionResult, decode_seconds: Option<&[f64]>) -> Self {
        let rows: Vec<ReportRow> = result
            .selections
            .iter()
            .enumerate()
            .map(|(i, s)| ReportRow {
                sequence: s.sequence.clone(),
                choice: s.choice,
                bits: s.bits,
                ms_ssim_db: s.ms_ssim_db,
                psnr: s.psnr,
                decode_seconds: decode_seconds.and_then(|d| d.get(i).copied()),
            })
            .collect();
        let mut histogram = OptionHistogram::default();
        for r in &rows {
            *histogram.intra_period.entry(r.choice.intra_period).or_default() += 1;
            *histogram.gop_size.entry(r.choice.gop_size).or_default() += 1;
            *histogram.quality.entry(r.choice.quality.index()).or_default() += 1;
            *histogram.downsample.entry(r.choice.downsample).or_default() += 1;
        }
        let bits: u64 = rows.iter().map(|r| r.bits).sum();
        let decode_seconds = rows.iter().map(|r| r.decode_seconds).sum::<Option<f64>>();
        let totals = Totals {
            bits,
            data_size_mbytes: bits as f64 / 8.0 / 1e6,
            mean_psnr: mean(rows.iter().map(|r| r.psnr)),
            mean_ms_ssim_db: mean(rows.iter().map(|r| r.ms_ssim_db)),
            decode_seconds,
        };
        RunReport { rows, totals, histogram, lambda: result.lambda, budget_bits: result.budget_bits }
    }

    /// Markdown rendering. `binary_bytes` is the decoder executable size,
    /// shown for orientation only.
    pub fn to_markdown(&self, binary_bytes: Option<u64>) -> String {
        let mut md = String::new();
        let secs = |s: Option<f64>| s.map_or_else(|| "n/a".to_string(), |v| format!("{v:.3}"));
        writeln!(md, "# Competition report\n").unwrap();
        match self.budget_bits {
            Some(b) => writeln!(md, "Budget: {b} bits ({:.6} MBytes), lambda = {:.6e}\n", b as f64 / 8e6, self.lambda),
            None => writeln!(md, "No budget, lambda = {:.6e}\n", self.lambda),
        }
        .unwrap();
        writeln!(md, "## Totals\n").unwrap();
        writeln!(md, "| Decoder size [MBytes] | Data size [MBytes] | PSNR [dB] | MS-SSIM [dB] | Decoding time [s] |").unwrap();
        writeln!(md, "|---|---|---|---|---|").unwrap();
        let decoder = binary_bytes.map_or_else(|| "n/a".to_string(), |b| format!("{:.3} (binary, not comparable)", b as f64 / 1e6));
        writeln!(
            md,
            "| {decoder} | {:.6} | {:.3} | {:.3} | {} |\n",
            self.totals.data_size_mbytes,
            self.totals.mean_psnr,
            self.totals.mean_ms_ssim_db,
            secs(self.totals.decode_seconds)
        )
        .unwrap();
        writeln!(md, "## Sequences\n").unwrap();
        writeln!(md, "| Sequence | Intra period | GOP | Quality | Downsampling | Bits | MS-SSIM [dB] | PSNR [dB] | Decoding time [s] |").unwrap();
        writeln!(md, "|---|---|---|---|---|---|---|---|---|").unwrap();
        for r in &self.rows {
            writeln!(
                md,
                "| {} | {} | {} | {} | {} | {} | {:.3} | {:.3} | {} |",
                r.sequence,
                r.choice.intra_period,
                r.choice.gop_size,
                r.choice.quality.index(),
                if r.choice.downsample { "yes" } else { "no" },
                r.bits,
                r.ms_ssim_db,
                r.psnr,
                secs(r.decode_seconds)
            )
            .unwrap();
        }
        writeln!(md, "\n## Coding options selected\n").unwrap();
        writeln!(md, "| Option | Value | Sequences |").unwrap();
        writeln!(md, "|---|---|---|").unwrap();
        let h = &self.histogram;
        for (v, n) in &h.intra_period {
            writeln!(md, "| Intra period | {v} | {n} |").unwrap();
        }
        for (v, n) in &h.gop_size {
            writeln!(md, "| GOP size | {v} | {n} |").unwrap();
        }
        for (v, n) in &h.quality {
            writeln!(md, "| Quality level | {v} | {n} |").unwrap();
        }
        for (v, n) in &h.downsample {
            writeln!(md, "| Downsampling | {} | {n} |", if *v { "yes" } else { "no" }).unwrap();
        }
        md
    }
}
