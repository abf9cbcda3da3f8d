//! Building containers from masks and reconstructing images from them.
//!
//! Kept blocks are stored by packing the original image's blocks and JPEG
//! coding the packed planes at the base quality. Without chroma subsampling
//! every 8x8 block is coded independently, so the stored blocks decode to
//! exactly the values of the full baseline JPEG decode used during mask
//! optimisation.

use crate::bitstream::{pack_blocks, quantize_params, read_container, unpack_blocks, write_container, Container, PACK_FILL};
use crate::eed::{diffusion_tensor, fill_unknown, inpaint, inpaint_guided, EedParams, SolverConfig};
use crate::error::{Error, Result};
use crate::image::{rgb_to_ycbcr, ycbcr_to_rgb, BlockMask, PixelPlane, RgbImage, YCbCrImage};
use crate::jpeg::{decode_baseline, encode_gray, encode_rgb, encode_ycbcr, Sampling, TableClass};

/// Bytes of the uncompressed 8-bit RGB image.
pub fn uncompressed_bytes(width: usize, height: usize) -> usize {
    width * height * 3
}

/// Decoded 4:4:4 baseline JPEG at `quality`: the values kept blocks take.
pub fn baseline_init(orig: &YCbCrImage, quality: u8) -> Result<YCbCrImage> {
    let bytes = encode_ycbcr(orig, quality, Sampling::S444)?;
    let mut planes = decode_baseline(&bytes)?.planes.into_iter();
    match (planes.next(), planes.next(), planes.next()) {
        (Some(y), Some(cb), Some(cr)) => YCbCrImage::new(y, cb, cr),
        _ => Err(Error::InvalidInput("baseline decode lost components".into())),
    }
}

/// Masks, parameters and base quality of one encoding.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodeSetup {
    pub quality: u8,
    pub luma_mask: BlockMask,
    pub chroma_mask: BlockMask,
    pub luma_params: EedParams,
    pub chroma_params: EedParams,
}

/// Packs and JPEG-codes the kept blocks of `orig`.
pub fn build_container(orig: &YCbCrImage, setup: &EncodeSetup) -> Result<Container> {
    let code = |plane: &PixelPlane, mask: &BlockMask, class| -> Result<Vec<u8>> {
        encode_gray(&pack_blocks(plane, mask)?, setup.quality, class)
    };
    Ok(Container {
        width: orig.width(),
        height: orig.height(),
        luma_params: quantize_params(setup.luma_params)?,
        chroma_params: quantize_params(setup.chroma_params)?,
        payload_y: code(&orig.y, &setup.luma_mask, TableClass::Luma)?,
        payload_cb: code(&orig.cb, &setup.chroma_mask, TableClass::Chroma)?,
        payload_cr: code(&orig.cr, &setup.chroma_mask, TableClass::Chroma)?,
        luma_mask: setup.luma_mask.clone(),
        chroma_mask: setup.chroma_mask.clone(),
    })
}

/// Serialised size of the container for `setup`.
pub fn container_size(orig: &YCbCrImage, setup: &EncodeSetup) -> Result<usize> {
    Ok(write_container(&build_container(orig, setup)?)?.len())
}

/// Result of reconstructing all three channels.
#[derive(Debug, Clone, PartialEq)]
pub struct Reconstruction {
    pub image: YCbCrImage,
    /// Whether every diffusion solve met its tolerance.
    pub converged: bool,
}

fn start_plane(known: &PixelPlane, mask: &[bool], warm: Option<&PixelPlane>) -> Result<PixelPlane> {
    match warm {
        None => fill_unknown(known, mask),
        Some(w) => Ok(PixelPlane::from_fn(known.width(), known.height(), |x, y| {
            let i = y * known.width() + x;
            if mask[i] { known.data()[i] } else { w.data()[i] }
        })),
    }
}

/// EED inpainting of luma from the values of `known` on the kept blocks.
pub fn reconstruct_luma(
    known: &PixelPlane,
    mask: &BlockMask,
    params: EedParams,
    cfg: &SolverConfig,
    warm: Option<&PixelPlane>,
) -> Result<(PixelPlane, bool)> {
    let pm = mask.pixel_mask();
    let out = inpaint(&start_plane(known, &pm, warm)?, &pm, params, cfg)?;
    Ok((out.plane, out.converged))
}

/// Chroma inpainting guided by the diffusion tensor of `luma`.
pub fn reconstruct_chroma(
    known_cb: &PixelPlane,
    known_cr: &PixelPlane,
    mask: &BlockMask,
    luma: &PixelPlane,
    params: EedParams,
    cfg: &SolverConfig,
    warm: Option<(&PixelPlane, &PixelPlane)>,
) -> Result<(PixelPlane, PixelPlane, bool)> {
    let pm = mask.pixel_mask();
    let guide = diffusion_tensor(luma, params)?;
    let cb = inpaint_guided(&start_plane(known_cb, &pm, warm.map(|w| w.0))?, &pm, &guide, cfg)?;
    let cr = inpaint_guided(&start_plane(known_cr, &pm, warm.map(|w| w.1))?, &pm, &guide, cfg)?;
    Ok((cb.plane, cr.plane, cb.converged && cr.converged))
}

/// Full reconstruction from the kept-block values in `known`.
pub fn reconstruct(known: &YCbCrImage, setup: &EncodeSetup, cfg: &SolverConfig) -> Result<Reconstruction> {
    let (y, cy) = reconstruct_luma(&known.y, &setup.luma_mask, setup.luma_params, cfg, None)?;
    let (cb, cr, cc) = reconstruct_chroma(
        &known.cb,
        &known.cr,
        &setup.chroma_mask,
        &y,
        setup.chroma_params,
        cfg,
        None,
    )?;
    Ok(Reconstruction {
        image: YCbCrImage::new(y, cb, cr)?,
        converged: cy && cc,
    })
}

fn payload_plane(
    bytes: &[u8],
    mask: &BlockMask,
    field: &'static str,
    width: usize,
    height: usize,
) -> Result<PixelPlane> {
    let dec = decode_baseline(bytes).map_err(|e| Error::Container {
        field,
        reason: e.to_string(),
    })?;
    if dec.planes.len() != 1 {
        return Err(Error::Container {
            field,
            reason: format!("expected one component, found {}", dec.planes.len()),
        });
    }
    let mut plane = PixelPlane::filled(width, height, PACK_FILL);
    unpack_blocks(&dec.planes[0], mask, &mut plane).map_err(|e| Error::Container {
        field,
        reason: e.to_string(),
    })?;
    Ok(plane)
}

/// Places the stored blocks of a container on the image grid.
pub fn known_planes(c: &Container) -> Result<YCbCrImage> {
    YCbCrImage::new(
        payload_plane(&c.payload_y, &c.luma_mask, "payload_y", c.width, c.height)?,
        payload_plane(&c.payload_cb, &c.chroma_mask, "payload_cb", c.width, c.height)?,
        payload_plane(&c.payload_cr, &c.chroma_mask, "payload_cr", c.width, c.height)?,
    )
}

/// Decodes a parsed container to YCbCr with the default solver settings.
pub fn decode_container_ycbcr(c: &Container) -> Result<Reconstruction> {
    let known = known_planes(c)?;
    let setup = EncodeSetup {
        quality: 0,
        luma_mask: c.luma_mask.clone(),
        chroma_mask: c.chroma_mask.clone(),
        luma_params: c.luma_params,
        chroma_params: c.chroma_params,
    };
    reconstruct(&known, &setup, &SolverConfig::default())
}

/// Decodes container bytes to an 8-bit RGB image.
pub fn decode(bytes: &[u8]) -> Result<RgbImage> {
    let c = read_container(bytes)?;
    let rec = decode_container_ycbcr(&c)?;
    if !rec.converged {
        log::warn!("diffusion did not reach tolerance; output may be slightly off");
    }
    Ok(ycbcr_to_rgb(&rec.image)?.quantized())
}

/// Pure-JPEG comparison point: the highest 4:2:0 quality whose file meets
/// `ratio`. Returns the quality and the JPEG bytes.
pub fn jpeg_for_ratio(orig: &RgbImage, ratio: f64) -> Result<(u8, Vec<u8>)> {
    let uncompressed = uncompressed_bytes(orig.width(), orig.height()) as f64;
    let budget = (uncompressed / ratio).floor() as usize;
    let size = |q: u8| encode_rgb(orig, q, Sampling::S420);
    let smallest = size(1)?;
    if smallest.len() > budget {
        return Err(Error::Unattainable {
            target: ratio,
            closest: uncompressed / smallest.len() as f64,
        });
    }
    // file size grows with quality; find the last quality that fits
    let (mut lo, mut hi) = (1u8, 101u8);
    let mut best = smallest;
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        let bytes = size(mid)?;
        if bytes.len() <= budget {
            lo = mid;
            best = bytes;
        } else {
            hi = mid;
        }
    }
    Ok((lo, best))
}

/// Encodes `orig` with a fixed setup; returns the container bytes.
pub fn encode_with_setup(orig: &RgbImage, setup: &EncodeSetup) -> Result<Vec<u8>> {
    write_container(&build_container(&rgb_to_ycbcr(orig)?, setup)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::{psnr, BlockGrid};
    use crate::jpeg::{decode_to_rgb, encode_rgb};

    fn test_image(w: usize, h: usize) -> RgbImage {
        let f = |k: f64| {
            PixelPlane::from_fn(w, h, |x, y| {
                let (fx, fy) = (x as f64, y as f64);
                (128.0 + 70.0 * (fx / (9.0 + k)).sin() * (fy / 13.0).cos() + if x + 2 * y > w { 30.0 } else { -30.0 })
                    .clamp(0.0, 255.0)
                    .round()
            })
        };
        RgbImage::new(f(0.0), f(3.0), f(7.0)).unwrap()
    }

    fn full_setup(w: usize, h: usize, q: u8) -> EncodeSetup {
        let g = BlockGrid::new(w, h);
        EncodeSetup {
            quality: q,
            luma_mask: BlockMask::full(g),
            chroma_mask: BlockMask::full(g),
            luma_params: EedParams::STANDARD,
            chroma_params: EedParams::STANDARD,
        }
    }

    #[test]
    fn packed_blocks_match_baseline_values() {
        let img = test_image(45, 29);
        let ycc = rgb_to_ycbcr(&img).unwrap();
        let g = BlockGrid::new(45, 29);
        let bits: Vec<bool> = (0..g.len()).map(|i| i % 3 != 1).collect();
        let mask = BlockMask::from_bits(g, bits).unwrap();
        let setup = EncodeSetup {
            luma_mask: mask.clone(),
            chroma_mask: mask.clone(),
            ..full_setup(45, 29, 40)
        };
        let c = build_container(&ycc, &setup).unwrap();
        let known = known_planes(&c).unwrap();
        let base = baseline_init(&ycc, 40).unwrap();
        let pm = mask.pixel_mask();
        for (a, b) in [(&known.y, &base.y), (&known.cb, &base.cb), (&known.cr, &base.cr)] {
            for i in 0..pm.len() {
                if pm[i] {
                    assert_eq!(a.data()[i], b.data()[i]);
                }
            }
        }
    }

    #[test]
    fn density_one_reproduces_baseline_decode() {
        let img = test_image(40, 24);
        let bytes = encode_with_setup(&img, &full_setup(40, 24, 50)).unwrap();
        let out = decode(&bytes).unwrap();
        let reference = decode_to_rgb(&encode_rgb(&img, 50, Sampling::S444).unwrap()).unwrap();
        assert_eq!(out, reference);
    }

    #[test]
    fn jpeg_comparator_meets_ratio() {
        let img = test_image(64, 48);
        let (q, bytes) = jpeg_for_ratio(&img, 10.0).unwrap();
        assert!(bytes.len() as f64 <= 64.0 * 48.0 * 3.0 / 10.0);
        if q < 100 {
            let next = encode_rgb(&img, q + 1, Sampling::S420).unwrap();
            assert!(next.len() as f64 > 64.0 * 48.0 * 3.0 / 10.0);
        }
        assert!(matches!(jpeg_for_ratio(&img, 1e6), Err(Error::Unattainable { .. })));
    }

    #[test]
    fn sparse_container_decodes_reasonably() {
        let img = test_image(48, 40);
        let g = BlockGrid::new(48, 40);
        let bits: Vec<bool> = (0..g.len()).map(|i| i % 2 == 0).collect();
        let mask = BlockMask::from_bits(g, bits).unwrap();
        let setup = EncodeSetup {
            luma_mask: mask.clone(),
            chroma_mask: mask,
            ..full_setup(48, 40, 90)
        };
        let bytes = encode_with_setup(&img, &setup).unwrap();
        let a = decode(&bytes).unwrap();
        assert_eq!(a, decode(&bytes).unwrap());
        assert!(psnr(&img.planes(), &a.planes()).unwrap().db() > 20.0);
    }
}
