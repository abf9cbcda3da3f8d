//! Self-contained baseline sequential JPEG (JFIF) encoder and decoder.
//!
//! The encoder always uses the standard Huffman tables and libjpeg-style
//! quality scaling of the example quantization tables. Samples are rounded
//! and clamped to 8 bits on entry, which is the only place where the codec
//! quantizes pixel values before final output.

mod dct;
mod decoder;
mod encoder;
mod huffman;
mod tables;

pub use dct::{fdct8x8, idct8x8};
pub use decoder::{decode_baseline, DecodedJpeg};
pub use encoder::{encode_gray, encode_ycbcr, Sampling, TableClass};
pub use tables::{quality_to_tables, QuantTable, BASE_CHROMA_Q, BASE_LUMA_Q, ZIGZAG};

use crate::error::{Error, Result};
use crate::image::{rgb_to_ycbcr, ycbcr_to_rgb, RgbImage, YCbCrImage};

/// Plain JPEG compression of an RGB image, as a reference codec.
pub fn encode_rgb(rgb: &RgbImage, quality: u8, sampling: Sampling) -> Result<Vec<u8>> {
    encode_ycbcr(&rgb_to_ycbcr(rgb)?, quality, sampling)
}

/// Decodes a three-component stream to 8-bit RGB.
pub fn decode_to_rgb(data: &[u8]) -> Result<RgbImage> {
    let dec = decode_baseline(data)?;
    let mut planes = dec.planes.into_iter();
    match (planes.next(), planes.next(), planes.next()) {
        (Some(y), Some(cb), Some(cr)) => Ok(ycbcr_to_rgb(&YCbCrImage::new(y, cb, cr)?)?.quantized()),
        (Some(y), None, None) => Ok(RgbImage::from_gray(y)),
        _ => Err(Error::InvalidInput("unexpected component count".into())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::JpegErrorKind;
    use crate::image::{psnr, PixelPlane};

    fn natural_plane(w: usize, h: usize) -> PixelPlane {
        PixelPlane::from_fn(w, h, |x, y| {
            let (fx, fy) = (x as f64, y as f64);
            128.0 + 60.0 * (fx / 7.0).sin() * (fy / 11.0).cos() + 30.0 * ((fx + fy) / 23.0).sin()
                + if (x / 9 + y / 13) % 2 == 0 { 20.0 } else { -20.0 }
        })
    }

    #[test]
    fn constant_gray_roundtrip() {
        let p = PixelPlane::filled(8, 8, 77.0);
        let s = encode_gray(&p, 90, TableClass::Luma).unwrap();
        assert_eq!(&s[..2], &[0xFF, 0xD8]);
        assert_eq!(&s[s.len() - 2..], &[0xFF, 0xD9]);
        let d = decode_baseline(&s).unwrap();
        assert_eq!(d.planes.len(), 1);
        assert!(d.planes[0].data().iter().all(|&v| (v - 77.0).abs() <= 1.0));
    }

    #[test]
    fn odd_sizes_roundtrip() {
        for (w, h) in [(1, 1), (9, 3), (17, 31), (40, 8)] {
            let p = natural_plane(w, h);
            let d = decode_baseline(&encode_gray(&p, 95, TableClass::Chroma).unwrap()).unwrap();
            assert_eq!((d.width, d.height), (w, h));
            assert!(psnr(&[&p], &[&d.planes[0]]).unwrap().db() > 35.0);
        }
    }

    #[test]
    fn lower_quality_is_smaller_and_worse() {
        let p = natural_plane(64, 48);
        let lo = encode_gray(&p, 10, TableClass::Luma).unwrap();
        let hi = encode_gray(&p, 90, TableClass::Luma).unwrap();
        assert!(lo.len() < hi.len());
        let plo = psnr(&[&p], &[&decode_baseline(&lo).unwrap().planes[0]]).unwrap().db();
        let phi = psnr(&[&p], &[&decode_baseline(&hi).unwrap().planes[0]]).unwrap().db();
        assert!(plo < phi);
    }

    #[test]
    fn color_444_and_420() {
        let base = natural_plane(37, 21);
        let g = PixelPlane::from_fn(37, 21, |x, y| 255.0 - base.get(x, y).clamp(0.0, 255.0));
        let b = PixelPlane::from_fn(37, 21, |x, y| (x * 5 + y * 3) as f64);
        let rgb = RgbImage::new(natural_plane(37, 21), g, b).unwrap();
        for s in [Sampling::S444, Sampling::S420] {
            let bytes = encode_rgb(&rgb, 90, s).unwrap();
            let back = decode_to_rgb(&bytes).unwrap();
            let db = psnr(&rgb.planes(), &back.planes()).unwrap().db();
            assert!(db > 25.0, "{s:?}: {db}");
        }
    }

    #[test]
    fn deterministic() {
        let p = natural_plane(33, 17);
        let a = encode_gray(&p, 50, TableClass::Luma).unwrap();
        let b = encode_gray(&p, 50, TableClass::Luma).unwrap();
        assert_eq!(a, b);
        assert_eq!(decode_baseline(&a).unwrap(), decode_baseline(&b).unwrap());
    }

    #[test]
    fn soi_only_is_truncated() {
        match decode_baseline(&[0xFF, 0xD8]) {
            Err(Error::Jpeg { kind: JpegErrorKind::Truncated, .. }) => {}
            other => panic!("expected truncated, got {other:?}"),
        }
    }

    #[test]
    fn corrupted_huffman_length_is_structured() {
        let p = natural_plane(16, 16);
        let mut s = encode_gray(&p, 75, TableClass::Luma).unwrap();
        let dht = s.windows(2).position(|w| w == [0xFF, 0xC4]).unwrap();
        // first count byte of the first table: claim 200 one-bit codes
        s[dht + 5] = 200;
        match decode_baseline(&s) {
            Err(Error::Jpeg { .. }) => {}
            other => panic!("expected structured error, got {other:?}"),
        }
    }

    #[test]
    fn missing_soi() {
        assert!(matches!(
            decode_baseline(&[0x00, 0x01, 0x02]),
            Err(Error::Jpeg { offset: 0, kind: JpegErrorKind::MissingSoi })
        ));
    }
}
