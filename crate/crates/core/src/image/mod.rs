//! Image representation, colour conversion, block bookkeeping and metrics.

mod color;
mod grid;
mod metrics;
mod plane;
pub mod pnm;

pub use color::{rgb_to_ycbcr, rgb_to_ycbcr_px, ycbcr_to_rgb, ycbcr_to_rgb_px, RgbImage, YCbCrImage};
pub use grid::{block_extract, block_place, BlockGrid, BlockMask, BlockRect, BLOCK};
pub use metrics::{mse, plane_mse, psnr, Psnr};
pub use plane::PixelPlane;
