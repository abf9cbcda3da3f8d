//! Binary 8-bit PGM (P5) and PPM (P6).

use super::color::RgbImage;
use super::plane::PixelPlane;
use crate::error::{Error, Result};
use std::path::Path;

#[derive(Debug, Clone, PartialEq)]
pub enum PnmImage {
    Gray(PixelPlane),
    Rgb(RgbImage),
}

impl PnmImage {
    pub fn channels(&self) -> usize {
        match self {
            PnmImage::Gray(_) => 1,
            PnmImage::Rgb(_) => 3,
        }
    }

    pub fn into_rgb(self) -> RgbImage {
        match self {
            PnmImage::Gray(p) => RgbImage::from_gray(p),
            PnmImage::Rgb(rgb) => rgb,
        }
    }
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn skip_space_and_comments(&mut self) {
        while self.pos < self.buf.len() {
            match self.buf[self.pos] {
                b'#' => {
                    while self.pos < self.buf.len() && self.buf[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                c if c.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn number(&mut self) -> Result<usize> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.buf.len() && self.buf[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::Pnm(format!("expected a number at byte {start}")));
        }
        std::str::from_utf8(&self.buf[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Pnm(format!("number too large at byte {start}")))
    }
}

pub fn decode_pnm(bytes: &[u8]) -> Result<PnmImage> {
    if bytes.len() < 2 || bytes[0] != b'P' || !matches!(bytes[1], b'5' | b'6') {
        return Err(Error::Pnm("not a binary PGM/PPM (P5/P6)".into()));
    }
    let channels = if bytes[1] == b'5' { 1 } else { 3 };
    let mut c = Cursor { buf: bytes, pos: 2 };
    let width = c.number()?;
    let height = c.number()?;
    let maxval = c.number()?;
    if maxval != 255 {
        return Err(Error::Pnm(format!("only maxval 255 is supported, got {maxval}")));
    }
    if width == 0 || height == 0 {
        return Err(Error::Pnm("zero image dimension".into()));
    }
    // exactly one whitespace byte separates the header from the raster
    if c.pos >= bytes.len() || !bytes[c.pos].is_ascii_whitespace() {
        return Err(Error::Pnm("missing raster separator".into()));
    }
    c.pos += 1;
    let need = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(channels))
        .ok_or_else(|| Error::Pnm("dimensions overflow".into()))?;
    let raster = &bytes[c.pos..];
    if raster.len() < need {
        return Err(Error::Pnm(format!(
            "raster truncated: {} of {need} bytes",
            raster.len()
        )));
    }
    let raster = &raster[..need];
    Ok(if channels == 1 {
        PnmImage::Gray(PixelPlane::from_u8(width, height, raster)?)
    } else {
        PnmImage::Rgb(RgbImage::from_interleaved_u8(width, height, raster)?)
    })
}

pub fn encode_ppm(img: &RgbImage) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend(img.to_interleaved_u8());
    out
}

pub fn encode_pgm(plane: &PixelPlane) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", plane.width(), plane.height()).into_bytes();
    out.extend(plane.quantized_u8());
    out
}

pub fn read_pnm(path: impl AsRef<Path>) -> Result<PnmImage> {
    decode_pnm(&std::fs::read(path)?)
}

pub fn write_ppm(path: impl AsRef<Path>, img: &RgbImage) -> Result<()> {
    std::fs::write(path, encode_ppm(img))?;
    Ok(())
}

pub fn write_pgm(path: impl AsRef<Path>, plane: &PixelPlane) -> Result<()> {
    std::fs::write(path, encode_pgm(plane))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ppm_roundtrip() {
        let rgb = RgbImage::new(
            PixelPlane::from_fn(3, 2, |x, y| (x * 40 + y) as f64),
            PixelPlane::from_fn(3, 2, |x, _| x as f64),
            PixelPlane::filled(3, 2, 255.0),
        )
        .unwrap();
        let back = decode_pnm(&encode_ppm(&rgb)).unwrap();
        assert_eq!(back, PnmImage::Rgb(rgb));
    }

    #[test]
    fn pgm_with_comment() {
        let mut bytes = b"P5\n# made by hand\n2 2\n255\n".to_vec();
        bytes.extend([0, 1, 2, 3]);
        match decode_pnm(&bytes).unwrap() {
            PnmImage::Gray(p) => assert_eq!(p.data(), &[0.0, 1.0, 2.0, 3.0]),
            _ => panic!("expected gray"),
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(decode_pnm(b"P3\n1 1\n255\n0 0 0").is_err());
        assert!(decode_pnm(b"P5\n2 2\n65535\n").is_err());
        assert!(decode_pnm(b"P6\n2 2\n255\n\x00\x01").is_err());
        assert!(decode_pnm(b"P6\n").is_err());
    }
}
