//! Block-based video codec toolkit.
//!
//! The pipeline mirrors a learned bidirectional codec with classical parts:
//! block-matching motion toward up to two references, a per-block
//! bi-prediction weight, a per-block Skip/coded arbitration, DCT residual
//! coding and a deterministic integer range coder. On top of the codec sits a
//! per-sequence competition over frame structures, quality levels and
//! downsampling, a dataset-level bit budget fit and the usual quality metrics
//! (MS-SSIM, PSNR, BD-rate).

pub mod bitstream;
pub mod codec;
pub mod competition;
pub mod entropy;
pub mod error;
pub mod media;
pub mod metrics;
pub mod motion;
pub mod report;
pub mod residual;
pub mod schedule;

pub use error::{Error, Result};
