//! Error metrics. PSNR is reported in the RGB domain over all channels.

use super::plane::PixelPlane;
use crate::error::{Error, Result};
use std::fmt;

/// Peak signal-to-noise ratio. Identical inputs have no finite PSNR.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Psnr {
    Identical,
    Db(f64),
}

impl Psnr {
    pub fn from_mse(mse: f64) -> Self {
        if mse == 0.0 {
            Psnr::Identical
        } else {
            Psnr::Db(10.0 * (255.0 * 255.0 / mse).log10())
        }
    }

    /// Decibels, with `Identical` mapped to `+inf`.
    pub fn db(&self) -> f64 {
        match *self {
            Psnr::Identical => f64::INFINITY,
            Psnr::Db(v) => v,
        }
    }
}

impl fmt::Display for Psnr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Psnr::Identical => write!(f, "inf"),
            Psnr::Db(v) => write!(f, "{v:.4}"),
        }
    }
}

/// Mean squared error averaged over every sample of every plane.
pub fn mse(a: &[&PixelPlane], b: &[&PixelPlane]) -> Result<f64> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::DimensionMismatch(format!(
            "{} vs {} channels",
            a.len(),
            b.len()
        )));
    }
    let mut sum = 0.0;
    let mut count = 0usize;
    for (pa, pb) in a.iter().zip(b) {
        if !pa.same_dims(pb) {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} vs {}x{}",
                pa.width(),
                pa.height(),
                pb.width(),
                pb.height()
            )));
        }
        sum += plane_sse(pa, pb);
        count += pa.len();
    }
    Ok(sum / count as f64)
}

pub fn psnr(a: &[&PixelPlane], b: &[&PixelPlane]) -> Result<Psnr> {
    mse(a, b).map(Psnr::from_mse)
}

pub(crate) fn plane_sse(a: &PixelPlane, b: &PixelPlane) -> f64 {
    a.data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y) * (x - y))
        .sum()
}

pub fn plane_mse(a: &PixelPlane, b: &PixelPlane) -> f64 {
    plane_sse(a, b) / a.len() as f64
}
