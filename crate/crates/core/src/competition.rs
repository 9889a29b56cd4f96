//! Per-sequence rate-distortion competition and dataset-level budget fitting.
//!
//! Every (sequence, coding choice) pair is encoded, decoded and scored once.
//! Selection then works on the finished table only: for a global multiplier
//! lambda each sequence takes the candidate minimising
//! `J = (1 - MS-SSIM) + lambda * rate`, and [`fit_budget`] searches lambda so
//! the dataset fits a total bit budget.

use std::cmp::Ordering;
use std::io;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use crate::codec::CodingChoice;
use crate::codec::{decode_stream, encode_sequence};
use crate::error::{Error, Result};
use crate::media::Sequence;
use crate::metrics::{ms_ssim_db, ms_ssim_sequence, psnr_sequence};
use crate::residual::QualityLevel;

pub const INTRA_PERIODS: [usize; 4] = [32, 64, 128, 320];
pub const GOP_SIZES: [usize; 5] = [1, 2, 4, 8, 16];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RdCost {
    /// Bits per second.
    pub rate: f64,
    /// `1 - MS-SSIM`.
    pub distortion: f64,
    pub j: f64,
}

pub fn rd_cost(rate: f64, distortion: f64, lambda: f64) -> Result<RdCost> {
    for (name, v) in [("rate", rate), ("distortion", distortion), ("lambda", lambda)] {
        if !(v >= 0.0 && v.is_finite()) {
            return Err(Error::Range(format!("{name} {v} must be finite and non-negative")));
        }
    }
    Ok(RdCost { rate, distortion, j: distortion + lambda * rate })
}

fn better(a: (&CodingChoice, &RdCost), b: (&CodingChoice, &RdCost)) -> bool {
    a.1.j
        .total_cmp(&b.1.j)
        .then(a.1.rate.total_cmp(&b.1.rate))
        .then(a.0.cmp(b.0))
        == Ordering::Less
}

fn argmin(candidates: &[(CodingChoice, RdCost)]) -> Result<usize> {
    if candidates.is_empty() {
        return Err(Error::Config("no candidates to select from".into()));
    }
    let mut best = 0;
    for i in 1..candidates.len() {
        let (c, r) = &candidates[i];
        let (bc, br) = &candidates[best];
        if better((c, r), (bc, br)) {
            best = i;
        }
    }
    Ok(best)
}

/// Lowest `j`; ties go to the lower rate, then the smaller choice.
pub fn select_best(candidates: &[(CodingChoice, RdCost)]) -> Result<CodingChoice> {
    Ok(candidates[argmin(candidates)?].0)
}

/// Full grid, pruned to `gop_size <= intra_period`.
pub fn full_grid() -> Vec<CodingChoice> {
    grid(&INTRA_PERIODS, &GOP_SIZES, &QualityLevel::all().map(|q| q.index()).collect::<Vec<_>>(), &[false, true])
        .expect("built-in grid is valid")
}

/// Cross product of the given option values, in [`CodingChoice`] order.
pub fn grid(intra_periods: &[usize], gops: &[usize], qualities: &[u8], downsample: &[bool]) -> Result<Vec<CodingChoice>> {
    let mut out = Vec::new();
    for &ip in intra_periods {
        for &g in gops {
            if g > ip {
                continue;
            }
            for &q in qualities {
                for &ds in downsample {
                    out.push(CodingChoice::new(ip, g, q, ds)?);
                }
            }
        }
    }
    out.sort();
    out.dedup();
    if out.is_empty() {
        return Err(Error::Config("the candidate grid is empty".into()));
    }
    Ok(out)
}

/// Parses `ip=32,64:gop=4,8:q=2,4,6,8:ds=0,1`; omitted keys keep the full set.
pub fn parse_grid(text: &str) -> Result<Vec<CodingChoice>> {
    let mut ips = INTRA_PERIODS.to_vec();
    let mut gops = GOP_SIZES.to_vec();
    let mut qs: Vec<u8> = QualityLevel::all().map(|q| q.index()).collect();
    let mut ds = vec![false, true];
    for part in text.split(':').map(str::trim).filter(|p| !p.is_empty()) {
        let (key, values) = part
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("grid term '{part}' is not key=values")))?;
        let nums = values
            .split(',')
            .map(|v| v.trim().parse::<usize>().map_err(|_| Error::Config(format!("bad grid value '{v}' for {key}"))))
            .collect::<Result<Vec<_>>>()?;
        match key.trim() {
            "ip" => ips = nums,
            "gop" => gops = nums,
            "q" => {
                qs = nums
                    .iter()
                    .map(|&n| u8::try_from(n).map_err(|_| Error::Config(format!("quality {n} out of range"))))
                    .collect::<Result<_>>()?
            }
            "ds" => {
                ds = nums
                    .iter()
                    .map(|&n| match n {
                        0 => Ok(false),
                        1 => Ok(true),
                        _ => Err(Error::Config(format!("ds accepts 0 or 1, got {n}"))),
                    })
                    .collect::<Result<_>>()?
            }
            other => return Err(Error::Config(format!("unknown grid key '{other}'"))),
        }
    }
    grid(&ips, &gops, &qs, &ds)
}

/// Scores of one (sequence, choice) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub choice: CodingChoice,
    /// Container size in bits, header included.
    pub bits: u64,
    pub ms_ssim: f64,
    pub psnr: f64,
}

impl Candidate {
    pub fn distortion(&self) -> f64 {
        (1.0 - self.ms_ssim).max(0.0)
    }

    pub fn ms_ssim_db(&self) -> f64 {
        ms_ssim_db(self.ms_ssim.clamp(0.0, 1.0)).expect("clamped")
    }
}

/// Result of [`evaluate_choice`], with the stream that produced it.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub candidate: Candidate,
    pub rate: f64,
    pub distortion: f64,
    pub stream: Vec<u8>,
}

/// Encodes, decodes and scores `seq` under `choice` against the original input.
pub fn evaluate_choice(seq: &Sequence, choice: &CodingChoice) -> Result<Evaluation> {
    let enc = encode_sequence(seq, choice)?;
    let stream = enc.to_bytes();
    let decoded = decode_stream(&stream, &seq.name)?.sequence;
    let ms_ssim = ms_ssim_sequence(seq, &decoded)?;
    let psnr = psnr_sequence(seq, &decoded)?;
    let bits = stream.len() as u64 * 8;
    let candidate = Candidate { choice: *choice, bits, ms_ssim, psnr };
    Ok(Evaluation { rate: bits as f64 / seq.duration(), distortion: candidate.distortion(), candidate, stream })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceCandidates {
    pub name: String,
    /// Seconds.
    pub duration: f64,
    pub candidates: Vec<Candidate>,
}

impl SequenceCandidates {
    pub fn rate(&self, c: &Candidate) -> f64 {
        c.bits as f64 / self.duration
    }

    pub fn costs(&self, lambda: f64) -> Result<Vec<(CodingChoice, RdCost)>> {
        self.candidates
            .iter()
            .map(|c| Ok((c.choice, rd_cost(self.rate(c), c.distortion(), lambda)?)))
            .collect()
    }

    fn best_at(&self, lambda: f64) -> Result<usize> {
        argmin(&self.costs(lambda)?)
    }

    /// Cheapest candidate; ties by distortion then choice.
    fn min_rate(&self) -> usize {
        (0..self.candidates.len())
            .min_by(|&a, &b| {
                let (x, y) = (&self.candidates[a], &self.candidates[b]);
                x.bits.cmp(&y.bits).then(x.distortion().total_cmp(&y.distortion())).then(x.choice.cmp(&y.choice))
            })
            .expect("non-empty")
    }
}

/// All candidates of all sequences, in dataset then grid order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateTable {
    pub sequences: Vec<SequenceCandidates>,
}

#[derive(Debug, Serialize, Deserialize)]
struct CsvRow {
    sequence: String,
    intra_period: usize,
    gop_size: usize,
    quality: u8,
    downsample: u8,
    bits: u64,
    ms_ssim: f64,
    ms_ssim_db: f64,
    psnr: f64,
    duration_s: f64,
}

impl CandidateTable {
    pub fn write_csv<W: io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for s in &self.sequences {
            for c in &s.candidates {
                w.serialize(CsvRow {
                    sequence: s.name.clone(),
                    intra_period: c.choice.intra_period,
                    gop_size: c.choice.gop_size,
                    quality: c.choice.quality.index(),
                    downsample: c.choice.downsample as u8,
                    bits: c.bits,
                    ms_ssim: c.ms_ssim,
                    ms_ssim_db: c.ms_ssim_db(),
                    psnr: c.psnr,
                    duration_s: s.duration,
                })
                .map_err(csv_error)?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a table written by [`CandidateTable::write_csv`]; rows of one
    /// sequence must be contiguous.
    pub fn read_csv<R: io::Read>(input: R) -> Result<Self> {
        let mut sequences: Vec<SequenceCandidates> = Vec::new();
        for row in csv::Reader::from_reader(input).deserialize::<CsvRow>() {
            let row = row.map_err(csv_error)?;
            let ds = match row.downsample {
                0 => false,
                1 => true,
                v => return Err(Error::Parse(format!("downsample value {v}"))),
            };
            let choice = CodingChoice::new(row.intra_period, row.gop_size, row.quality, ds)?;
            let c = Candidate { choice, bits: row.bits, ms_ssim: row.ms_ssim, psnr: row.psnr };
            match sequences.last_mut() {
                Some(s) if s.name == row.sequence => s.candidates.push(c),
                _ => {
                    if sequences.iter().any(|s| s.name == row.sequence) {
                        return Err(Error::Parse(format!("rows of '{}' are not contiguous", row.sequence)));
                    }
                    sequences.push(SequenceCandidates { name: row.sequence, duration: row.duration_s, candidates: vec![c] })
                }
            }
        }
        let table = CandidateTable { sequences };
        table.check()?;
        Ok(table)
    }

    fn check(&self) -> Result<()> {
        if self.sequences.is_empty() {
            return Err(Error::Config("candidate table is empty".into()));
        }
        for s in &self.sequences {
            if s.candidates.is_empty() || s.duration.is_nan() || s.duration <= 0.0 {
                return Err(Error::Config(format!("sequence '{}' has no candidates or no duration", s.name)));
            }
        }
        Ok(())
    }

    /// Per-sequence argmin indices for `lambda`.
    pub fn select(&self, lambda: f64) -> Result<Vec<usize>> {
        self.sequences.iter().map(|s| s.best_at(lambda)).collect()
    }

    pub fn total_bits(&self, picks: &[usize]) -> u64 {
        self.sequences.iter().zip(picks).map(|(s, &i)| s.candidates[i].bits).sum()
    }

    pub fn min_total_bits(&self) -> u64 {
        self.sequences.iter().map(|s| s.candidates[s.min_rate()].bits).sum()
    }

    pub fn max_total_bits(&self) -> u64 {
        self.sequences.iter().map(|s| s.candidates.iter().map(|c| c.bits).max().unwrap_or(0)).sum()
    }

    /// A lambda at which every sequence selects its cheapest candidate.
    pub fn lambda_max(&self) -> f64 {
        let mut lam: f64 = 0.0;
        for s in &self.sequences {
            let m = &s.candidates[s.min_rate()];
            for c in &s.candidates {
                let dr = s.rate(c) - s.rate(m);
                if dr > 0.0 {
                    lam = lam.max((m.distortion() - c.distortion()) / dr);
                }
            }
        }
        lam * 2.0 + 1e-12
    }
}

fn csv_error(e: csv::Error) -> Error {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::Io(io),
            _ => unreachable!(),
        }
    } else {
        Error::Parse(e.to_string())
    }
}

/// Evaluates every (sequence, choice) pair on a pool of `jobs` workers.
/// The table is identical for any worker count.
pub fn evaluate_grid(dataset: &[Sequence], grid: &[CodingChoice], jobs: usize) -> Result<CandidateTable> {
    if dataset.is_empty() {
        return Err(Error::Config("the dataset is empty".into()));
    }
    if grid.is_empty() {
        return Err(Error::Config("the candidate grid is empty".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;
    let tasks: Vec<(usize, &CodingChoice)> = (0..dataset.len()).flat_map(|s| grid.iter().map(move |c| (s, c))).collect();
    let results = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(s, c)| evaluate_choice(&dataset[s], c).map(|e| e.candidate))
            .collect::<Result<Vec<_>>>()
    })?;
    let mut it = results.into_iter();
    let sequences = dataset
        .iter()
        .map(|seq| SequenceCandidates {
            name: seq.name.clone(),
            duration: seq.duration(),
            candidates: it.by_ref().take(grid.len()).collect(),
        })
        .collect();
    Ok(CandidateTable { sequences })
}

/// The choice made for one sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub sequence: String,
    pub choice: CodingChoice,
    pub cost: RdCost,
    pub bits: u64,
    pub ms_ssim: f64,
    pub ms_ssim_db: f64,
    pub psnr: f64,
    /// Set when the budget refill upgraded this sequence past its argmin.
    pub refined: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompetitionResult {
    pub lambda: f64,
    pub budget_bits: Option<u64>,
    pub total_bits: u64,
    pub selections: Vec<Selection>,
    pub table: CandidateTable,
}

impl CompetitionResult {
    fn build(table: &CandidateTable, lambda: f64, picks: &[usize], refined: &[bool], budget: Option<u64>) -> Result<Self> {
        let selections = table
            .sequences
            .iter()
            .zip(picks)
            .zip(refined)
            .map(|((s, &i), &refined)| {
                let c = &s.candidates[i];
                Ok(Selection {
                    sequence: s.name.clone(),
                    choice: c.choice,
                    cost: rd_cost(s.rate(c), c.distortion(), lambda)?,
                    bits: c.bits,
                    ms_ssim: c.ms_ssim,
                    ms_ssim_db: c.ms_ssim_db(),
                    psnr: c.psnr,
                    refined,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(CompetitionResult {
            lambda,
            budget_bits: budget,
            total_bits: table.total_bits(picks),
            selections,
            table: table.clone(),
        })
    }

    /// Sequences whose selection is not the argmin at `self.lambda`; refined
    /// selections are exempt.
    pub fn argmin_violations(&self) -> Result<Vec<String>> {
        let mut bad = Vec::new();
        for (sel, s) in self.selections.iter().zip(&self.table.sequences) {
            if sel.refined {
                continue;
            }
            if s.costs(self.lambda)?.iter().any(|(_, c)| c.j < sel.cost.j) {
                bad.push(sel.sequence.clone());
            }
        }
        Ok(bad)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("result serializes")
    }
}

/// Pure argmin selection at a fixed lambda, no budget.
pub fn compete_at(table: &CandidateTable, lambda: f64) -> Result<CompetitionResult> {
    table.check()?;
    let picks = table.select(lambda)?;
    CompetitionResult::build(table, lambda, &picks, &vec![false; picks.len()], None)
}

const BISECTION_STEPS: usize = 200;

/// Fits the dataset into `budget_bits`.
///
/// Bisection finds the smallest lambda whose argmin selection fits; the
/// remaining headroom is then spent greedily on the upgrade with the best
/// distortion reduction per extra bit per second, until none fits. Finally
/// the lowest-distortion combination is taken among those using at least
/// [`UTILIZATION_FLOOR`] of the budget, or among all fitting ones when no
/// combination reaches the floor. Sequences whose selection differs from the
/// lambda argmin are flagged `refined`.
pub fn fit_budget(table: &CandidateTable, budget_bits: u64) -> Result<CompetitionResult> {
    table.check()?;
    let min_bits = table.min_total_bits();
    if budget_bits < min_bits {
        return Err(Error::Budget { budget_bits, min_bits });
    }
    let fits = |lambda: f64| -> Result<bool> { Ok(table.total_bits(&table.select(lambda)?) <= budget_bits) };
    let lambda = if fits(0.0)? {
        0.0
    } else {
        let (mut lo, mut hi) = (0.0, table.lambda_max());
        debug_assert!(fits(hi)?);
        for _ in 0..BISECTION_STEPS {
            let mid = lo + (hi - lo) / 2.0;
            if mid <= lo || mid >= hi {
                break;
            }
            if fits(mid)? {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    };

    let mut picks = table.select(lambda)?;
    let mut headroom = budget_bits - table.total_bits(&picks);
    loop {
        let mut best: Option<(f64, usize, usize)> = None;
        for (si, s) in table.sequences.iter().enumerate() {
            let cur = &s.candidates[picks[si]];
            for (ci, c) in s.candidates.iter().enumerate() {
                if c.bits <= cur.bits || c.bits - cur.bits > headroom || c.distortion() >= cur.distortion() {
                    continue;
                }
                let gain = (cur.distortion() - c.distortion()) / (s.rate(c) - s.rate(cur));
                if best.is_none_or(|(g, _, _)| gain > g) {
                    best = Some((gain, si, ci));
                }
            }
        }
        let Some((_, si, ci)) = best else { break };
        let s = &table.sequences[si];
        headroom -= s.candidates[ci].bits - s.candidates[picks[si]].bits;
        picks[si] = ci;
    }

    let argmin_picks = table.select(lambda)?;
    let distortion = |p: &[usize]| -> f64 {
        table.sequences.iter().zip(p).map(|(s, &i)| s.candidates[i].distortion()).sum()
    };
    let floor = (budget_bits as f64 * UTILIZATION_FLOOR).ceil() as u64;
    let in_window = |p: &[usize]| table.total_bits(p) >= floor;
    let mut options = vec![picks];
    options.extend(repack(table, budget_bits));
    options.extend(fill_window(table, floor, budget_bits));
    picks = options
        .into_iter()
        .min_by(|a, b| in_window(b).cmp(&in_window(a)).then(distortion(a).total_cmp(&distortion(b))))
        .expect("greedy picks always present");
    let refined: Vec<bool> = picks.iter().zip(&argmin_picks).map(|(p, a)| p != a).collect();
    CompetitionResult::build(table, lambda, &picks, &refined, Some(budget_bits))
}

/// Share of the budget a fitted selection should use when some combination can.
pub const UTILIZATION_FLOOR: f64 = 0.9;

/// Upper bound on the partial Pareto front kept by [`repack`].
const FRONT_CAP: usize = 1 << 16;

/// Minimises total distortion subject to the budget over all candidate
/// combinations, using a (bits, distortion) Pareto front built one sequence
/// at a time. Fronts larger than [`FRONT_CAP`] are thinned to the best point
/// per bit bucket, which keeps the result feasible but possibly suboptimal.
fn repack(table: &CandidateTable, budget: u64) -> Option<Vec<usize>> {
    struct Node {
        bits: u64,
        d: f64,
        prev: usize,
        pick: usize,
    }
    let mut stages: Vec<Vec<Node>> = Vec::with_capacity(table.sequences.len());
    let mut front = vec![Node { bits: 0, d: 0.0, prev: 0, pick: 0 }];
    for s in &table.sequences {
        let mut next: Vec<Node> = Vec::with_capacity(front.len() * s.candidates.len());
        for (pi, n) in front.iter().enumerate() {
            for (ci, c) in s.candidates.iter().enumerate() {
                let bits = n.bits + c.bits;
                if bits <= budget {
                    next.push(Node { bits, d: n.d + c.distortion(), prev: pi, pick: ci });
                }
            }
        }
        next.sort_by(|a, b| a.bits.cmp(&b.bits).then(a.d.total_cmp(&b.d)).then(a.prev.cmp(&b.prev)).then(a.pick.cmp(&b.pick)));
        let mut pruned: Vec<Node> = Vec::new();
        for n in next {
            if pruned.last().is_none_or(|l| n.d < l.d) {
                pruned.push(n);
            }
        }
        if pruned.len() > FRONT_CAP {
            let width = budget / FRONT_CAP as u64 + 1;
            let mut thinned: Vec<Node> = Vec::with_capacity(FRONT_CAP + 1);
            for n in pruned {
                match thinned.last_mut() {
                    Some(l) if l.bits / width == n.bits / width => *l = n,
                    _ => thinned.push(n),
                }
            }
            pruned = thinned;
        }
        if pruned.is_empty() {
            return None;
        }
        stages.push(std::mem::replace(&mut front, pruned));
    }
    stages.push(front);
    let mut idx = stages.last()?.len() - 1;
    let mut picks = vec![0; table.sequences.len()];
    for k in (1..stages.len()).rev() {
        let n = &stages[k][idx];
        picks[k - 1] = n.pick;
        idx = n.prev;
    }
    Some(picks)
}

/// Lowest-distortion combination with total bits in `[floor, budget]`.
/// Keeps the best partial sum per bit bucket; exact when the budget has at
/// most [`FRONT_CAP`] distinct bit values.
fn fill_window(table: &CandidateTable, floor: u64, budget: u64) -> Option<Vec<usize>> {
    #[derive(Clone, Copy)]
    struct Node {
        bits: u64,
        d: f64,
        prev: usize,
        pick: usize,
    }
    let width = budget / FRONT_CAP as u64 + 1;
    let max_rest: Vec<u64> = {
        let mut acc = vec![0u64; table.sequences.len() + 1];
        for (i, s) in table.sequences.iter().enumerate().rev() {
            acc[i] = acc[i + 1] + s.candidates.iter().map(|c| c.bits).max().unwrap_or(0);
        }
        acc
    };
    let mut stages: Vec<Vec<Node>> = Vec::with_capacity(table.sequences.len() + 1);
    stages.push(vec![Node { bits: 0, d: 0.0, prev: 0, pick: 0 }]);
    for (si, s) in table.sequences.iter().enumerate() {
        let mut slots: Vec<Option<Node>> = vec![None; (budget / width + 1) as usize];
        for (pi, n) in stages[si].iter().enumerate() {
            for (ci, c) in s.candidates.iter().enumerate() {
                let bits = n.bits + c.bits;
                if bits > budget || bits + max_rest[si + 1] < floor {
                    continue;
                }
                let node = Node { bits, d: n.d + c.distortion(), prev: pi, pick: ci };
                let slot = &mut slots[(bits / width) as usize];
                if slot.is_none_or(|o| node.d < o.d || (node.d == o.d && node.bits > o.bits)) {
                    *slot = Some(node);
                }
            }
        }
        let next: Vec<Node> = slots.into_iter().flatten().collect();
        if next.is_empty() {
            return None;
        }
        stages.push(next);
    }
    let last = stages.last()?;
    let mut idx = (0..last.len()).filter(|&i| last[i].bits >= floor).min_by(|&a, &b| last[a].d.total_cmp(&last[b].d))?;
    let mut picks = vec![0; table.sequences.len()];
    for k in (1..stages.len()).rev() {
        let n = &stages[k][idx];
        picks[k - 1] = n.pick;
        idx = n.prev;
    }
    Some(picks)
}
