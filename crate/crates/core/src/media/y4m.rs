//! YUV4MPEG2 (4:2:0, 8-bit) and headerless planar I420 I/O.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::{chroma_dim, Fps, Frame, Plane, Sequence};
use crate::error::{Error, Result};

const MAGIC: &[u8] = b"YUV4MPEG2";
const FRAME_TAG: &[u8] = b"FRAME";

/// How to interpret an input file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputFormat {
    Y4m,
    /// Headerless I420. `frames` of `None` derives the count from the file size.
    Raw { width: usize, height: usize, frames: Option<usize>, fps: Fps },
}

impl InputFormat {
    /// Picks Y4M for `.y4m` files and raw otherwise, given optional geometry.
    pub fn guess(path: &Path, geometry: Option<(usize, usize, Fps)>) -> Result<Self> {
        let is_y4m = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("y4m"));
        match (is_y4m, geometry) {
            (true, _) => Ok(InputFormat::Y4m),
            (false, Some((width, height, fps))) => Ok(InputFormat::Raw { width, height, frames: None, fps }),
            (false, None) => Err(Error::Config(format!(
                "{} is not .y4m; raw input needs --width, --height and --fps",
                path.display()
            ))),
        }
    }
}

pub fn load_sequence(path: &Path, format: InputFormat) -> Result<Sequence> {
    let bytes = fs::read(path)?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "sequence".to_string());
    match format {
        InputFormat::Y4m => read_y4m(&bytes, name),
        InputFormat::Raw { width, height, frames, fps } => read_raw(&bytes, name, width, height, frames, fps),
    }
}

/// Writes `seq` as Y4M. Fails on an empty sequence.
pub fn store_sequence(seq: &Sequence, path: &Path) -> Result<()> {
    let file = fs::File::create(path)?;
    let mut out = BufWriter::new(file);
    write_y4m(seq, &mut out)?;
    out.flush()?;
    Ok(())
}

pub fn write_y4m<W: Write>(seq: &Sequence, out: &mut W) -> Result<()> {
    if seq.is_empty() {
        return Err(Error::Config("cannot store an empty sequence".into()));
    }
    writeln!(out, "YUV4MPEG2 W{} H{} F{}:{} C420", seq.width(), seq.height(), seq.fps.num, seq.fps.den)?;
    for frame in &seq.frames {
        out.write_all(FRAME_TAG)?;
        out.write_all(b"\n")?;
        for plane in &frame.planes {
            out.write_all(&plane.data)?;
        }
    }
    Ok(())
}

fn frame_bytes(width: usize, height: usize) -> usize {
    width * height + 2 * chroma_dim(width) * chroma_dim(height)
}

fn split_frame(data: &[u8], width: usize, height: usize, index: usize) -> Result<Frame> {
    let (cw, ch) = (chroma_dim(width), chroma_dim(height));
    let y_len = width * height;
    let c_len = cw * ch;
    let planes = [
        Plane::from_data(width, height, data[..y_len].to_vec())?,
        Plane::from_data(cw, ch, data[y_len..y_len + c_len].to_vec())?,
        Plane::from_data(cw, ch, data[y_len + c_len..y_len + 2 * c_len].to_vec())?,
    ];
    Frame::from_planes(width, height, planes, index)
}

fn read_raw(
    bytes: &[u8],
    name: String,
    width: usize,
    height: usize,
    frames: Option<usize>,
    fps: Fps,
) -> Result<Sequence> {
    if width == 0 || height == 0 {
        return Err(Error::Dimension(format!("raw geometry {width}x{height} has zero area")));
    }
    let size = frame_bytes(width, height);
    let count = match frames {
        Some(n) => {
            if bytes.len() < n * size {
                return Err(Error::Truncation(format!(
                    "raw file holds {} bytes, {n} frames of {width}x{height} need {}",
                    bytes.len(),
                    n * size
                )));
            }
            if bytes.len() > n * size {
                return Err(Error::Parse(format!("raw file has {} bytes beyond {n} frames", bytes.len() - n * size)));
            }
            n
        }
        None => {
            if !bytes.len().is_multiple_of(size) {
                return Err(Error::Truncation(format!(
                    "raw file size {} is not a multiple of the {size}-byte frame size",
                    bytes.len()
                )));
            }
            bytes.len() / size
        }
    };
    let frames = bytes
        .chunks_exact(size)
        .take(count)
        .enumerate()
        .map(|(i, chunk)| split_frame(chunk, width, height, i))
        .collect::<Result<Vec<_>>>()?;
    Sequence::new(name, fps, frames)
}

fn parse_num<T: std::str::FromStr>(tok: &str, what: &str) -> Result<T> {
    tok.parse().map_err(|_| Error::Parse(format!("invalid {what} value {tok:?} in Y4M header")))
}

/// Parses a complete Y4M file held in memory.
pub fn read_y4m(bytes: &[u8], name: String) -> Result<Sequence> {
    let header_end = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::Parse("Y4M header has no line terminator".into()))?;
    let header = std::str::from_utf8(&bytes[..header_end])
        .map_err(|_| Error::Parse("Y4M header is not ASCII".into()))?;
    let mut tokens = header.split(' ').filter(|t| !t.is_empty());
    if tokens.next().map(str::as_bytes) != Some(MAGIC) {
        return Err(Error::Parse("missing YUV4MPEG2 magic".into()));
    }

    let (mut width, mut height) = (None, None);
    let mut fps = Fps::default();
    for tok in tokens {
        let (tag, value) = tok.split_at(1);
        match tag {
            "W" => width = Some(parse_num::<usize>(value, "width")?),
            "H" => height = Some(parse_num::<usize>(value, "height")?),
            "F" => {
                let (n, d) = value
                    .split_once(':')
                    .ok_or_else(|| Error::Parse(format!("malformed frame rate {value:?}")))?;
                fps = Fps::new(parse_num(n, "frame rate")?, parse_num(d, "frame rate")?)
                    .map_err(|_| Error::Parse(format!("zero frame rate term in {value:?}")))?;
            }
            "C" => match value {
                "420" | "420jpeg" | "420paldv" | "420mpeg2" => {}
                other => return Err(Error::UnsupportedFormat(format!("chroma format C{other}"))),
            },
            // Interlacing, aspect ratio and extensions do not affect sample layout.
            "I" | "A" | "X" => {}
            other => return Err(Error::Parse(format!("unknown Y4M header tag {other:?}"))),
        }
    }
    let width = width.ok_or_else(|| Error::Parse("Y4M header lacks W".into()))?;
    let height = height.ok_or_else(|| Error::Parse("Y4M header lacks H".into()))?;
    if width == 0 || height == 0 {
        return Err(Error::Parse(format!("Y4M geometry {width}x{height} has zero area")));
    }

    let size = frame_bytes(width, height);
    let mut pos = header_end + 1;
    let mut frames = Vec::new();
    while pos < bytes.len() {
        let line_end = bytes[pos..]
            .iter()
            .position(|&b| b == b'\n')
            .map(|p| pos + p)
            .ok_or_else(|| Error::Truncation(format!("frame {} header is unterminated", frames.len())))?;
        if !bytes[pos..line_end].starts_with(FRAME_TAG) {
            return Err(Error::Parse(format!("expected FRAME marker for frame {}", frames.len())));
        }
        let start = line_end + 1;
        let end = start + size;
        if end > bytes.len() {
            return Err(Error::Truncation(format!(
                "frame {} has {} of {size} bytes",
                frames.len(),
                bytes.len() - start
            )));
        }
        frames.push(split_frame(&bytes[start..end], width, height, frames.len())?);
        pos = end;
    }
    Sequence::new(name, fps, frames)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gray_2x2() -> Sequence {
        Sequence::new("g", Fps::new(25, 1).unwrap(), vec![Frame::filled(2, 2, 128)]).unwrap()
    }

    #[test]
    fn minimal_y4m_parses() {
        let mut bytes = b"YUV4MPEG2 W2 H2 F25:1 C420\nFRAME\n".to_vec();
        bytes.extend_from_slice(&[1, 2, 3, 4, 5, 6]);
        let seq = read_y4m(&bytes, "m".into()).unwrap();
        assert_eq!(seq.len(), 1);
        assert_eq!((seq.width(), seq.height()), (2, 2));
        assert_eq!(seq.frames[0].planes[0].data, vec![1, 2, 3, 4]);
        assert_eq!(seq.frames[0].planes[1].data, vec![5]);
        assert_eq!(seq.frames[0].planes[2].data, vec![6]);
        assert_eq!(seq.fps, Fps { num: 25, den: 1 });
    }

    #[test]
    fn c444_is_unsupported() {
        let bytes = b"YUV4MPEG2 W2 H2 F25:1 C444\n".to_vec();
        assert!(matches!(read_y4m(&bytes, "x".into()), Err(Error::UnsupportedFormat(_))));
    }

    #[test]
    fn bad_magic_is_parse_error() {
        let bytes = b"YUV4MPEG W2 H2\n".to_vec();
        assert!(matches!(read_y4m(&bytes, "x".into()), Err(Error::Parse(_))));
    }

    #[test]
    fn truncated_payload() {
        let mut bytes = b"YUV4MPEG2 W2 H2 F25:1\nFRAME\n".to_vec();
        bytes.extend_from_slice(&[0; 5]);
        assert!(matches!(read_y4m(&bytes, "x".into()), Err(Error::Truncation(_))));
    }

    #[test]
    fn empty_raw_with_declared_frame_truncates() {
        let r = read_raw(&[], "r".into(), 2, 2, Some(1), Fps::default());
        assert!(matches!(r, Err(Error::Truncation(_))));
    }

    #[test]
    fn gray_byte_layout() {
        let mut out = Vec::new();
        write_y4m(&gray_2x2(), &mut out).unwrap();
        let header = b"YUV4MPEG2 W2 H2 F25:1 C420\nFRAME\n";
        assert_eq!(&out[..header.len()], header);
        assert_eq!(&out[header.len()..], &[0x80; 6]);
    }

    #[test]
    fn empty_sequence_not_stored() {
        let seq = Sequence::new("e", Fps::default(), vec![]).unwrap();
        assert!(write_y4m(&seq, &mut Vec::new()).is_err());
    }

    #[test]
    fn file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.y4m");
        let mut seq = gray_2x2();
        seq.frames[0].planes[0].data = vec![0, 50, 200, 255];
        seq.name = "g".into();
        store_sequence(&seq, &path).unwrap();
        let back = load_sequence(&path, InputFormat::Y4m).unwrap();
        assert_eq!(back, seq);
    }
}
