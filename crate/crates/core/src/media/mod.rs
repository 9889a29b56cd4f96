//! Raw picture containers, Y4M / planar I420 I/O and 2x resampling.

mod resample;
mod y4m;

pub use resample::{downsample2x, downsample_sequence, upsample2x, upsample_sequence};
pub use y4m::{load_sequence, read_y4m, store_sequence, write_y4m, InputFormat};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One 8-bit sample plane, stored row-major without padding.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Plane {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

impl Plane {
    pub fn new(width: usize, height: usize, fill: u8) -> Self {
        Plane { width, height, data: vec![fill; width * height] }
    }

    pub fn from_data(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::Dimension(format!(
                "plane of {width}x{height} needs {} samples, got {}",
                width * height,
                data.len()
            )));
        }
        Ok(Plane { width, height, data })
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width + x]
    }

    /// Sample fetch with coordinates clamped to the plane border.
    #[inline]
    pub fn at_clamped(&self, x: isize, y: isize) -> u8 {
        let x = x.clamp(0, self.width as isize - 1) as usize;
        let y = y.clamp(0, self.height as isize - 1) as usize;
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: u8) {
        self.data[y * self.width + x] = v;
    }

    pub fn row(&self, y: usize) -> &[u8] {
        &self.data[y * self.width..(y + 1) * self.width]
    }
}

/// Chroma plane dimension for a 4:2:0 luma dimension.
#[inline]
pub fn chroma_dim(luma: usize) -> usize {
    luma.div_ceil(2)
}

/// A 4:2:0 picture: full-resolution Y followed by half-resolution Cb and Cr.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub width: usize,
    pub height: usize,
    pub planes: [Plane; 3],
    pub display_index: usize,
}

impl Frame {
    /// A frame with every sample of every plane set to `value`.
    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        let (cw, ch) = (chroma_dim(width), chroma_dim(height));
        Frame {
            width,
            height,
            planes: [
                Plane::new(width, height, value),
                Plane::new(cw, ch, value),
                Plane::new(cw, ch, value),
            ],
            display_index: 0,
        }
    }

    pub fn from_planes(width: usize, height: usize, planes: [Plane; 3], display_index: usize) -> Result<Self> {
        let frame = Frame { width, height, planes, display_index };
        frame.check_geometry()?;
        Ok(frame)
    }

    pub fn with_index(mut self, display_index: usize) -> Self {
        self.display_index = display_index;
        self
    }

    pub fn luma(&self) -> &Plane {
        &self.planes[0]
    }

    /// Total number of samples across all three planes.
    pub fn sample_count(&self) -> usize {
        self.planes.iter().map(|p| p.data.len()).sum()
    }

    pub fn same_geometry(&self, other: &Frame) -> bool {
        self.width == other.width && self.height == other.height
    }

    fn check_geometry(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::Dimension("frame has zero area".into()));
        }
        let (cw, ch) = (chroma_dim(self.width), chroma_dim(self.height));
        let expected = [(self.width, self.height), (cw, ch), (cw, ch)];
        for (i, (plane, (w, h))) in self.planes.iter().zip(expected).enumerate() {
            if plane.width != w || plane.height != h || plane.data.len() != w * h {
                return Err(Error::Dimension(format!(
                    "plane {i} is {}x{} ({} samples), expected {w}x{h}",
                    plane.width,
                    plane.height,
                    plane.data.len()
                )));
            }
        }
        Ok(())
    }
}

/// Frame rate as a rational number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fps {
    pub num: u32,
    pub den: u32,
}

impl Fps {
    pub fn new(num: u32, den: u32) -> Result<Self> {
        if num == 0 || den == 0 {
            return Err(Error::Config(format!("invalid frame rate {num}:{den}")));
        }
        Ok(Fps { num, den })
    }

    pub fn as_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }

    /// Duration in seconds of `frames` frames.
    pub fn duration(self, frames: usize) -> f64 {
        frames as f64 * self.den as f64 / self.num as f64
    }
}

impl Default for Fps {
    fn default() -> Self {
        Fps { num: 25, den: 1 }
    }
}

/// An ordered list of frames sharing one geometry.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sequence {
    pub frames: Vec<Frame>,
    pub fps: Fps,
    pub name: String,
}

impl Sequence {
    /// Builds a sequence, renumbering display indices to `0..n` and checking
    /// that every frame has the same geometry.
    pub fn new(name: impl Into<String>, fps: Fps, frames: Vec<Frame>) -> Result<Self> {
        let mut frames = frames;
        if let Some(first) = frames.first() {
            let (w, h) = (first.width, first.height);
            for (i, f) in frames.iter_mut().enumerate() {
                f.check_geometry()?;
                if f.width != w || f.height != h {
                    return Err(Error::Dimension(format!(
                        "frame {i} is {}x{}, sequence is {w}x{h}",
                        f.width, f.height
                    )));
                }
                f.display_index = i;
            }
        }
        Ok(Sequence { frames, fps, name: name.into() })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn width(&self) -> usize {
        self.frames.first().map_or(0, |f| f.width)
    }

    pub fn height(&self) -> usize {
        self.frames.first().map_or(0, |f| f.height)
    }

    pub fn duration(&self) -> f64 {
        self.fps.duration(self.frames.len())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chroma_dims_round_up() {
        let f = Frame::filled(5, 3, 7);
        assert_eq!((f.planes[1].width, f.planes[1].height), (3, 2));
        assert_eq!(f.sample_count(), 15 + 2 * 6);
    }

    #[test]
    fn mismatched_geometry_rejected() {
        let frames = vec![Frame::filled(4, 4, 0), Frame::filled(6, 4, 0)];
        assert!(matches!(Sequence::new("x", Fps::default(), frames), Err(Error::Dimension(_))));
    }

    #[test]
    fn display_indices_renumbered() {
        let frames = vec![Frame::filled(2, 2, 0).with_index(7), Frame::filled(2, 2, 0).with_index(3)];
        let seq = Sequence::new("x", Fps::default(), frames).unwrap();
        let idx: Vec<_> = seq.frames.iter().map(|f| f.display_index).collect();
        assert_eq!(idx, vec![0, 1]);
    }

    #[test]
    fn bad_plane_size_rejected() {
        let planes = [Plane::new(4, 4, 0), Plane::new(2, 2, 0), Plane::new(2, 1, 0)];
        assert!(Frame::from_planes(4, 4, planes, 0).is_err());
    }
}
