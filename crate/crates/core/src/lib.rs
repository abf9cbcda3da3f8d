//! Hybrid block codec combining baseline JPEG with edge-enhancing diffusion
//! (EED) inpainting.
//!
//! An image is first compressed as a baseline JPEG. Blocks that EED
//! inpainting can reconstruct well are then dropped; only the kept blocks
//! (repacked into small JPEG images) and an arithmetic-coded block mask are
//! stored. The decoder places the kept blocks and inpaints the rest.

pub mod bitstream;
pub mod codec;
pub mod corner;
pub mod eed;
mod error;
pub mod image;
pub mod jpeg;
pub mod maskopt;

pub use error::{Error, JpegErrorKind, Result};
