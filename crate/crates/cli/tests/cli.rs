use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rdvk_core::media::{store_sequence, Fps, Frame, Sequence};
use serde_json::Value;
use tempfile::TempDir;

fn rdvk(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rdvk")).args(args).env_remove("RDVK_THREADS").output().expect("spawn rdvk")
}

fn ok_json(out: &Output) -> Value {
    assert!(out.status.success(), "exit {:?}: {}", out.status.code(), String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Deterministic 8-bit pseudo-noise.
fn hash(x: usize, y: usize, t: usize, seed: usize) -> u8 {
    let mut h = (x as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (y as u64).wrapping_mul(0xC2B2_AE3D_27D4_EB4F);
    h ^= (t as u64 + 1).wrapping_mul(0x1656_67B1_9E37_79F9) ^ seed as u64;
    h ^= h >> 29;
    h = h.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    (h >> 56) as u8
}

fn video(name: &str, w: usize, h: usize, n: usize, sample: impl Fn(usize, usize, usize) -> u8) -> Sequence {
    let frames = (0..n)
        .map(|t| {
            let mut f = Frame::filled(w, h, 128);
            for y in 0..h {
                for x in 0..w {
                    f.planes[0].set(x, y, sample(x, y, t));
                }
            }
            f.with_index(t)
        })
        .collect();
    Sequence::new(name, Fps::default(), frames).unwrap()
}

fn moving(name: &str) -> Sequence {
    video(name, 48, 48, 9, |x, y, t| (((x + 2 * t) * 5) ^ (y * 3)) as u8)
}

fn write_video(dir: &Path, seq: &Sequence) -> PathBuf {
    let path = dir.join(format!("{}.y4m", seq.name));
    store_sequence(seq, &path).unwrap();
    path
}

const SMALL_GRID: &str = "ip=32:gop=4,8:q=2,5,8:ds=0,1";

#[test]
fn encode_then_decode_in_fresh_process() {
    let dir = TempDir::new().unwrap();
    let input = write_video(dir.path(), &moving("clip"));
    let rdv = dir.path().join("clip.rdv");
    let sched = dir.path().join("schedule.jsonl");
    let mv = dir.path().join("motion.json");
    let stats = ok_json(&rdvk(&[
        "encode", "--in", p(&input), "--out", p(&rdv), "--intra-period", "32", "--gop", "8", "--quality", "5",
        "--dump-schedule", p(&sched), "--dump-motion", p(&mv),
    ]));
    assert_eq!(stats["bits"].as_u64().unwrap(), fs::metadata(&rdv).unwrap().len() * 8);
    assert_eq!(fs::read_to_string(&sched).unwrap().lines().count(), 9);
    let motion: Value = serde_json::from_str(&fs::read_to_string(&mv).unwrap()).unwrap();
    assert_eq!(motion.as_array().unwrap().len(), 8);

    let (a, b) = (dir.path().join("a.y4m"), dir.path().join("b.y4m"));
    ok_json(&rdvk(&["decode", "--in", p(&rdv), "--out", p(&a)]));
    ok_json(&rdvk(&["decode", "--in", p(&rdv), "--out", p(&b)]));
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());

    let m = ok_json(&rdvk(&["metrics", "--ref", p(&input), "--dist", p(&a)]));
    assert_eq!(m["ms_ssim_db"], stats["ms_ssim_db"]);
    assert_eq!(m["psnr"], stats["psnr"]);
}

#[test]
fn downsampled_stream_decodes_at_original_size() {
    let dir = TempDir::new().unwrap();
    let input = write_video(dir.path(), &moving("clip"));
    let rdv = dir.path().join("clip.rdv");
    let stats = ok_json(&rdvk(&["encode", "--in", p(&input), "--out", p(&rdv), "--quality", "3", "--downsample"]));
    let out = dir.path().join("out.y4m");
    let d = ok_json(&rdvk(&["decode", "--in", p(&rdv), "--out", p(&out)]));
    assert_eq!((d["width"].as_u64(), d["height"].as_u64()), (Some(48), Some(48)));
    let m = ok_json(&rdvk(&["metrics", "--ref", p(&input), "--dist", p(&out)]));
    assert_eq!(m["ms_ssim_db"], stats["ms_ssim_db"]);
}

#[test]
fn raw_input_needs_geometry() {
    let dir = TempDir::new().unwrap();
    let raw = dir.path().join("clip.yuv");
    fs::write(&raw, vec![90u8; 32 * 32 * 3 / 2 * 2]).unwrap();
    let rdv = dir.path().join("clip.rdv");
    assert_eq!(rdvk(&["encode", "--in", p(&raw), "--out", p(&rdv)]).status.code(), Some(2));
    let stats = ok_json(&rdvk(&[
        "encode", "--in", p(&raw), "--out", p(&rdv), "--width", "32", "--height", "32", "--fps", "30000/1001",
    ]));
    assert!(stats["bits"].as_u64().unwrap() > 0);
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    let input = write_video(dir.path(), &moving("clip"));
    let rdv = dir.path().join("clip.rdv");

    let gop = rdvk(&["encode", "--in", p(&input), "--out", p(&rdv), "--gop", "64", "--intra-period", "32"]);
    assert_eq!(gop.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&gop.stderr).contains("configuration error"));
    assert_eq!(rdvk(&["encode", "--in", p(&input), "--out", p(&rdv), "--quality", "9"]).status.code(), Some(2));
    assert!(!rdv.exists());

    ok_json(&rdvk(&["encode", "--in", p(&input), "--out", p(&rdv)]));
    let mut bytes = fs::read(&rdv).unwrap();
    let out = dir.path().join("out.y4m");
    for corrupt in [bytes[..bytes.len() - 3].to_vec(), b"not a stream".to_vec()] {
        let bad = dir.path().join("bad.rdv");
        fs::write(&bad, corrupt).unwrap();
        assert_eq!(rdvk(&["decode", "--in", p(&bad), "--out", p(&out)]).status.code(), Some(3));
    }
    bytes[0] ^= 0xFF;
    let bad = dir.path().join("magic.rdv");
    fs::write(&bad, bytes).unwrap();
    assert_eq!(rdvk(&["decode", "--in", p(&bad), "--out", p(&out)]).status.code(), Some(3));

    let empty = dir.path().join("empty");
    fs::create_dir(&empty).unwrap();
    let res = dir.path().join("res");
    assert_eq!(rdvk(&["compete", "--in", p(&empty), "--out", p(&res), "--budget-mbytes", "1"]).status.code(), Some(2));
}

fn toy_dir(root: &Path) -> PathBuf {
    let dir = root.join("videos");
    fs::create_dir(&dir).unwrap();
    write_video(&dir, &video("a_static", 48, 48, 9, |x, y, _| (x * 4 + y * 2) as u8));
    write_video(&dir, &video("b_noisy", 48, 48, 9, |x, y, t| hash(x, y, t, 7)));
    dir
}

#[test]
fn infeasible_budget_exits_4_and_keeps_candidates() {
    let root = TempDir::new().unwrap();
    let dir = toy_dir(root.path());
    let res = root.path().join("res");
    let out = rdvk(&["compete", "--in", p(&dir), "--out", p(&res), "--budget-mbytes", "0.00001", "--grid", SMALL_GRID]);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("minimum achievable"));
    assert!(res.join("candidates.csv").is_file());
}

#[test]
fn competition_outputs_are_independent_of_workers() {
    let root = TempDir::new().unwrap();
    let dir = toy_dir(root.path());
    let run = |jobs: &str, out: &Path| {
        ok_json(&rdvk(&["compete", "--in", p(&dir), "--out", p(out), "--budget-bps", "500000", "--grid", SMALL_GRID, "--jobs", jobs]))
    };
    let (one, eight) = (root.path().join("j1"), root.path().join("j8"));
    run("1", &one);
    run("8", &eight);
    for f in ["result.json", "candidates.csv", "a_static.rdv", "b_noisy.rdv"] {
        assert_eq!(fs::read(one.join(f)).unwrap(), fs::read(eight.join(f)).unwrap(), "{f} differs");
    }
    let env = root.path().join("env");
    let out = Command::new(env!("CARGO_BIN_EXE_rdvk"))
        .args(["compete", "--in", p(&dir), "--out", p(&env), "--budget-bps", "500000", "--grid", SMALL_GRID, "--jobs", "1"])
        .env("RDVK_THREADS", "3")
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(fs::read(one.join("result.json")).unwrap(), fs::read(env.join("result.json")).unwrap());
}

#[test]
fn generous_budget_invests_in_the_hard_sequence() {
    let root = TempDir::new().unwrap();
    let dir = toy_dir(root.path());
    let res = root.path().join("res");
    let summary = ok_json(&rdvk(&["compete", "--in", p(&dir), "--out", p(&res), "--budget-mbytes", "10", "--grid", SMALL_GRID]));
    assert!(summary["total_bits"].as_u64().unwrap() <= summary["budget_bits"].as_u64().unwrap());

    let result: Value = serde_json::from_str(&fs::read_to_string(res.join("result.json")).unwrap()).unwrap();
    let sel = result["selections"].as_array().unwrap();
    let (easy, hard) = (&sel[0], &sel[1]);
    assert_eq!(easy["sequence"], "a_static");
    assert!(easy["choice"]["quality"].as_u64() <= hard["choice"]["quality"].as_u64());
    assert!(easy["bits"].as_u64() <= hard["bits"].as_u64());

    for s in sel {
        let name = s["sequence"].as_str().unwrap();
        let rdv = res.join(format!("{name}.rdv"));
        assert_eq!(fs::metadata(&rdv).unwrap().len() * 8, s["bits"].as_u64().unwrap());
        let out = res.join(format!("{name}.dec.y4m"));
        ok_json(&rdvk(&["decode", "--in", p(&rdv), "--out", p(&out)]));
        let m = ok_json(&rdvk(&["metrics", "--ref", p(&dir.join(format!("{name}.y4m"))), "--dist", p(&out)]));
        assert_eq!(m["ms_ssim_db"], s["ms_ssim_db"]);
    }

    let report = fs::read_to_string(res.join("report.md")).unwrap();
    assert!(report.contains("a_static") && report.contains("b_noisy"));
    assert!(report.contains("not comparable"));
    fs::remove_file(res.join("report.md")).unwrap();
    assert!(rdvk(&["report", "--in", p(&res)]).status.success());
    assert!(fs::read_to_string(res.join("report.md")).unwrap().contains("a_static"));
}

#[test]
fn bdrate_of_curve_against_itself_and_scaled() {
    let dir = TempDir::new().unwrap();
    let anchor = dir.path().join("anchor.csv");
    let test = dir.path().join("test.csv");
    let rows = |scale: f64| {
        let mut s = String::from("rate,quality\n");
        for (r, q) in [(1e5, 10.0), (2e5, 12.5), (4e5, 15.0), (8e5, 17.0)] {
            s.push_str(&format!("{},{q}\n", r * scale));
        }
        s
    };
    fs::write(&anchor, rows(1.0)).unwrap();
    fs::write(&test, rows(0.5)).unwrap();
    let same = ok_json(&rdvk(&["bdrate", "--anchor", p(&anchor), "--test", p(&anchor)]));
    assert!(same["bd_rate_percent"].as_f64().unwrap().abs() < 1e-9);
    let half = ok_json(&rdvk(&["bdrate", "--anchor", p(&anchor), "--test", p(&test)]));
    assert!((half["bd_rate_percent"].as_f64().unwrap() + 50.0).abs() < 1e-6);
    fs::write(&test, "rate,quality\n1,2\n").unwrap();
    assert_eq!(rdvk(&["bdrate", "--anchor", p(&anchor), "--test", p(&test)]).status.code(), Some(2));
}
