use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rdvk_core::codec::{decode_stream, encode_sequence, CodingChoice};
use rdvk_core::competition::{compete_at, evaluate_grid, fit_budget, full_grid, parse_grid, CompetitionResult};
use rdvk_core::media::{load_sequence, store_sequence, Fps, InputFormat, Sequence};
use rdvk_core::metrics::{bd_rate, ms_ssim_db, ms_ssim_sequence, psnr_sequence, RdPoint};
use rdvk_core::report::RunReport;
use rdvk_core::{Error, Result};
use serde_json::json;

use crate::RawGeometry;

pub struct EncodeArgs {
    pub input: PathBuf,
    pub output: PathBuf,
    pub intra_period: usize,
    pub gop: usize,
    pub quality: u8,
    pub downsample: bool,
    pub raw: RawGeometry,
    pub dump_schedule: Option<PathBuf>,
    pub dump_motion: Option<PathBuf>,
}

pub enum Target {
    MBytes(f64),
    Bps(f64),
    Lambda(f64),
}

pub struct CompeteArgs {
    pub input: PathBuf,
    pub output: PathBuf,
    pub target: Target,
    pub grid: Option<String>,
    pub jobs: Option<usize>,
    pub raw: RawGeometry,
}

fn parse_fps(s: &str) -> Result<Fps> {
    let bad = || Error::Config(format!("cannot parse frame rate {s:?}"));
    let (num, den) = match s.split_once('/') {
        Some((n, d)) => (n.trim().parse().map_err(|_| bad())?, d.trim().parse().map_err(|_| bad())?),
        None => (s.trim().parse().map_err(|_| bad())?, 1),
    };
    Fps::new(num, den)
}

fn geometry(raw: &RawGeometry) -> Result<Option<(usize, usize, Fps)>> {
    match (raw.width, raw.height) {
        (Some(w), Some(h)) => {
            let fps = raw.fps.as_deref().map(parse_fps).transpose()?.unwrap_or_default();
            Ok(Some((w, h, fps)))
        }
        (None, None) => Ok(None),
        _ => Err(Error::Config("--width and --height must be given together".into())),
    }
}

fn load(path: &Path, raw: &RawGeometry) -> Result<Sequence> {
    load_sequence(path, InputFormat::guess(path, geometry(raw)?)?)
}

fn stem(path: &Path) -> String {
    path.file_stem().map_or_else(|| "sequence".to_string(), |s| s.to_string_lossy().into_owned())
}

fn write_json(path: &Path, value: &str) -> Result<()> {
    fs::write(path, value)?;
    Ok(())
}

pub fn encode(a: &EncodeArgs) -> Result<()> {
    let choice = CodingChoice::new(a.intra_period, a.gop, a.quality, a.downsample)?;
    let seq = load(&a.input, &a.raw)?;
    let enc = encode_sequence(&seq, &choice)?;
    let bytes = enc.to_bytes();
    fs::write(&a.output, &bytes)?;
    if let Some(p) = &a.dump_schedule {
        fs::write(p, enc.schedule.to_json_lines())?;
    }
    if let Some(p) = &a.dump_motion {
        let frames: Vec<_> = enc
            .schedule
            .entries
            .iter()
            .zip(&enc.motion)
            .filter_map(|(e, m)| {
                m.as_ref().map(|m| json!({"display_index": e.display_index, "coding_order": e.coding_order, "field": m}))
            })
            .collect();
        write_json(p, &serde_json::Value::Array(frames).to_string())?;
    }
    let out = enc.output(&seq.name)?;
    let ms_ssim = ms_ssim_sequence(&seq, &out)?;
    let bits = bytes.len() as u64 * 8;
    let stats = json!({
        "bits": bits,
        "bps": bits as f64 / seq.duration(),
        "ms_ssim": ms_ssim,
        "ms_ssim_db": ms_ssim_db(ms_ssim)?,
        "psnr": psnr_sequence(&seq, &out)?,
    });
    println!("{stats}");
    Ok(())
}

fn timed_decode(path: &Path) -> Result<(Sequence, f64)> {
    let bytes = fs::read(path)?;
    let start = Instant::now();
    let decoded = decode_stream(&bytes, &stem(path))?;
    Ok((decoded.sequence, start.elapsed().as_secs_f64()))
}

pub fn decode(input: &Path, output: &Path) -> Result<()> {
    let (seq, secs) = timed_decode(input)?;
    store_sequence(&seq, output)?;
    let line = json!({"frames": seq.len(), "width": seq.width(), "height": seq.height(), "decode_seconds": secs});
    println!("{line}");
    Ok(())
}

fn worker_count(jobs: Option<usize>) -> Result<usize> {
    if let Ok(v) = std::env::var("RDVK_THREADS") {
        return match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(Error::Config(format!("RDVK_THREADS={v:?} is not a positive integer"))),
        };
    }
    match jobs {
        Some(0) => Err(Error::Config("--jobs must be positive".into())),
        Some(n) => Ok(n),
        None => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

fn dataset(dir: &Path, raw: &RawGeometry) -> Result<Vec<Sequence>> {
    let with_raw = geometry(raw)?.is_some();
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    paths.retain(|p| {
        p.is_file()
            && match p.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
                Some("y4m") => true,
                Some("yuv") => with_raw,
                _ => false,
            }
    });
    paths.sort();
    if paths.is_empty() {
        return Err(Error::Config(format!("no input videos in {}", dir.display())));
    }
    let seqs = paths.iter().map(|p| load(p, raw)).collect::<Result<Vec<_>>>()?;
    for (i, s) in seqs.iter().enumerate() {
        if seqs[..i].iter().any(|o| o.name == s.name) {
            return Err(Error::Config(format!("two inputs share the name {:?}", s.name)));
        }
    }
    Ok(seqs)
}

fn budget_bits(target: &Target, seqs: &[Sequence]) -> Result<Option<u64>> {
    let check = |v: f64, what: &str| {
        if v.is_finite() && v >= 0.0 {
            Ok(v)
        } else {
            Err(Error::Config(format!("{what} must be a non-negative number, got {v}")))
        }
    };
    Ok(match *target {
        Target::MBytes(mb) => Some((check(mb, "--budget-mbytes")? * 8e6).floor() as u64),
        Target::Bps(bps) => {
            let bps = check(bps, "--budget-bps")?;
            Some(seqs.iter().map(|s| (bps * s.duration()).floor() as u64).sum())
        }
        Target::Lambda(_) => None,
    })
}

fn binary_size() -> Option<u64> {
    std::env::current_exe().ok().and_then(|p| fs::metadata(p).ok()).map(|m| m.len())
}

fn write_report(result: &CompetitionResult, dir: &Path, out: &Path) -> Result<()> {
    let mut times = Vec::with_capacity(result.selections.len());
    for s in &result.selections {
        let stream = dir.join(format!("{}.rdv", s.sequence));
        if !stream.is_file() {
            times.clear();
            break;
        }
        times.push(timed_decode(&stream)?.1);
    }
    let secs = (times.len() == result.selections.len()).then_some(&times[..]);
    fs::write(out, RunReport::new(result, secs).to_markdown(binary_size()))?;
    Ok(())
}

pub fn compete(a: &CompeteArgs) -> Result<()> {
    let seqs = dataset(&a.input, &a.raw)?;
    let grid = match &a.grid {
        Some(g) => parse_grid(g)?,
        None => full_grid(),
    };
    let budget = budget_bits(&a.target, &seqs)?;
    let jobs = worker_count(a.jobs)?;
    fs::create_dir_all(&a.output)?;

    let table = evaluate_grid(&seqs, &grid, jobs)?;
    let mut csv = Vec::new();
    table.write_csv(&mut csv)?;
    fs::write(a.output.join("candidates.csv"), csv)?;

    let result = match (budget, &a.target) {
        (Some(b), _) => fit_budget(&table, b)?,
        (None, Target::Lambda(l)) => compete_at(&table, *l)?,
        (None, _) => unreachable!("budget targets always yield a bit count"),
    };
    for (seq, sel) in seqs.iter().zip(&result.selections) {
        let bytes = encode_sequence(seq, &sel.choice)?.to_bytes();
        if bytes.len() as u64 * 8 != sel.bits {
            return Err(Error::Bitstream(format!("re-encoding {} gave {} bits, expected {}", seq.name, bytes.len() * 8, sel.bits)));
        }
        fs::write(a.output.join(format!("{}.rdv", seq.name)), bytes)?;
    }
    fs::write(a.output.join("result.json"), result.to_json())?;
    write_report(&result, &a.output, &a.output.join("report.md"))?;

    let summary = json!({
        "sequences": result.selections.len(),
        "total_bits": result.total_bits,
        "budget_bits": result.budget_bits,
        "lambda": result.lambda,
    });
    println!("{summary}");
    Ok(())
}

pub fn metrics(reference: &Path, distorted: &Path, raw: &RawGeometry) -> Result<()> {
    let a = load(reference, raw)?;
    let b = load(distorted, raw)?;
    let ms = ms_ssim_sequence(&a, &b)?;
    let line = json!({"ms_ssim": ms, "ms_ssim_db": ms_ssim_db(ms)?, "psnr": psnr_sequence(&a, &b)?});
    println!("{line}");
    Ok(())
}

fn read_curve(path: &Path) -> Result<Vec<RdPoint>> {
    let bad = |e: csv::Error| Error::Config(format!("{}: {e}", path.display()));
    let mut reader = csv::Reader::from_path(path).map_err(bad)?;
    reader.deserialize().collect::<std::result::Result<Vec<RdPoint>, _>>().map_err(bad)
}

pub fn bdrate(anchor: &Path, test: &Path) -> Result<()> {
    let pct = bd_rate(&read_curve(anchor)?, &read_curve(test)?)?;
    println!("{}", json!({ "bd_rate_percent": pct }));
    Ok(())
}

pub fn report(dir: &Path, out: Option<&Path>) -> Result<()> {
    let path = dir.join("result.json");
    let text = fs::read_to_string(&path)?;
    let result: CompetitionResult =
        serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    let default = dir.join("report.md");
    write_report(&result, dir, out.unwrap_or(&default))
}
