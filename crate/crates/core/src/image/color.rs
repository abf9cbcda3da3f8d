//! Full-range BT.601 colour conversion, as used by JPEG interchange files.

use super::plane::PixelPlane;
use crate::error::{Error, Result};

const KR: f64 = 0.299;
const KG: f64 = 0.587;
const KB: f64 = 0.114;
const CB_SCALE: f64 = 0.564;
const CR_SCALE: f64 = 0.713;

#[derive(Debug, Clone, PartialEq)]
pub struct RgbImage {
    pub r: PixelPlane,
    pub g: PixelPlane,
    pub b: PixelPlane,
}

impl RgbImage {
    pub fn new(r: PixelPlane, g: PixelPlane, b: PixelPlane) -> Result<Self> {
        if !r.same_dims(&g) || !r.same_dims(&b) {
            return Err(Error::DimensionMismatch(
                "rgb planes differ in size".to_string(),
            ));
        }
        Ok(Self { r, g, b })
    }

    /// Grey image with all three channels equal to `plane`.
    pub fn from_gray(plane: PixelPlane) -> Self {
        Self {
            r: plane.clone(),
            g: plane.clone(),
            b: plane,
        }
    }

    pub fn width(&self) -> usize {
        self.r.width()
    }

    pub fn height(&self) -> usize {
        self.r.height()
    }

    pub fn planes(&self) -> [&PixelPlane; 3] {
        [&self.r, &self.g, &self.b]
    }

    /// Rounds and clamps every channel to 8 bits.
    pub fn quantized(&self) -> RgbImage {
        let q = |p: &PixelPlane| {
            PixelPlane::from_u8(p.width(), p.height(), &p.quantized_u8()).expect("same dims")
        };
        RgbImage {
            r: q(&self.r),
            g: q(&self.g),
            b: q(&self.b),
        }
    }

    /// Interleaved 8-bit RGB.
    pub fn to_interleaved_u8(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.r.len() * 3);
        for i in 0..self.r.len() {
            out.push(super::plane::to_u8(self.r.data()[i]));
            out.push(super::plane::to_u8(self.g.data()[i]));
            out.push(super::plane::to_u8(self.b.data()[i]));
        }
        out
    }

    pub fn from_interleaved_u8(width: usize, height: usize, bytes: &[u8]) -> Result<Self> {
        if bytes.len() != width * height * 3 {
            return Err(Error::DimensionMismatch(format!(
                "{} bytes for {width}x{height} rgb",
                bytes.len()
            )));
        }
        let chan = |c: usize| {
            PixelPlane::new(
                width,
                height,
                bytes.iter().skip(c).step_by(3).map(|&v| v as f64).collect(),
            )
        };
        Ok(Self {
            r: chan(0)?,
            g: chan(1)?,
            b: chan(2)?,
        })
    }

    pub fn crop(&self, x0: usize, y0: usize, w: usize, h: usize) -> Result<Self> {
        Ok(Self {
            r: self.r.crop(x0, y0, w, h)?,
            g: self.g.crop(x0, y0, w, h)?,
            b: self.b.crop(x0, y0, w, h)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct YCbCrImage {
    pub y: PixelPlane,
    pub cb: PixelPlane,
    pub cr: PixelPlane,
}

impl YCbCrImage {
    pub fn new(y: PixelPlane, cb: PixelPlane, cr: PixelPlane) -> Result<Self> {
        if !y.same_dims(&cb) || !y.same_dims(&cr) {
            return Err(Error::DimensionMismatch(
                "ycbcr planes differ in size".to_string(),
            ));
        }
        Ok(Self { y, cb, cr })
    }

    pub fn width(&self) -> usize {
        self.y.width()
    }

    pub fn height(&self) -> usize {
        self.y.height()
    }
}

#[inline]
pub fn rgb_to_ycbcr_px(r: f64, g: f64, b: f64) -> (f64, f64, f64) {
    let y = KR * r + KG * g + KB * b;
    (y, 128.0 + (b - y) * CB_SCALE, 128.0 + (r - y) * CR_SCALE)
}

/// Exact algebraic inverse of [`rgb_to_ycbcr_px`], without clamping.
#[inline]
pub fn ycbcr_to_rgb_px(y: f64, cb: f64, cr: f64) -> (f64, f64, f64) {
    let r = y + (cr - 128.0) / CR_SCALE;
    let b = y + (cb - 128.0) / CB_SCALE;
    let g = (y - KR * r - KB * b) / KG;
    (r, g, b)
}

/// Converts to YCbCr. Values stay real and unclamped; clamping to the 8-bit
/// sample range happens in the JPEG layer.
pub fn rgb_to_ycbcr(rgb: &RgbImage) -> Result<YCbCrImage> {
    if !rgb.r.same_dims(&rgb.g) || !rgb.r.same_dims(&rgb.b) {
        return Err(Error::DimensionMismatch(
            "rgb planes differ in size".to_string(),
        ));
    }
    let n = rgb.r.len();
    let (w, h) = (rgb.width(), rgb.height());
    let mut y = Vec::with_capacity(n);
    let mut cb = Vec::with_capacity(n);
    let mut cr = Vec::with_capacity(n);
    for i in 0..n {
        let (yy, bb, rr) = rgb_to_ycbcr_px(rgb.r.data()[i], rgb.g.data()[i], rgb.b.data()[i]);
        y.push(yy);
        cb.push(bb);
        cr.push(rr);
    }
    YCbCrImage::new(
        PixelPlane::new(w, h, y)?,
        PixelPlane::new(w, h, cb)?,
        PixelPlane::new(w, h, cr)?,
    )
}

/// Converts back to RGB, clamping to `[0, 255]` (no rounding).
pub fn ycbcr_to_rgb(img: &YCbCrImage) -> Result<RgbImage> {
    if !img.y.same_dims(&img.cb) || !img.y.same_dims(&img.cr) {
        return Err(Error::DimensionMismatch(
            "ycbcr planes differ in size".to_string(),
        ));
    }
    let n = img.y.len();
    let (w, h) = (img.width(), img.height());
    let mut r = Vec::with_capacity(n);
    let mut g = Vec::with_capacity(n);
    let mut b = Vec::with_capacity(n);
    for i in 0..n {
        let (rr, gg, bb) = ycbcr_to_rgb_px(img.y.data()[i], img.cb.data()[i], img.cr.data()[i]);
        r.push(rr.clamp(0.0, 255.0));
        g.push(gg.clamp(0.0, 255.0));
        b.push(bb.clamp(0.0, 255.0));
    }
    RgbImage::new(
        PixelPlane::new(w, h, r)?,
        PixelPlane::new(w, h, g)?,
        PixelPlane::new(w, h, b)?,
    )
}
