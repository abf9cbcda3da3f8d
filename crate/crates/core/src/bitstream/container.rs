use super::arith::{arith_decode, arith_encode};
use crate::eed::EedParams;
use crate::error::{Error, Result};
use crate::image::{BlockGrid, BlockMask};

pub const MAGIC: &[u8; 4] = b"BEED";
pub const VERSION: u8 = 1;
pub const HEADER_LEN: usize = 37;

/// Largest image the container accepts.
pub const MAX_PIXELS: usize = 1 << 24;

/// Parameter value to 8.8 fixed point; the value must be representable.
pub fn to_fixed(v: f64) -> Result<u16> {
    let raw = (v * 256.0).round();
    if !(1.0..=65535.0).contains(&raw) {
        return Err(Error::InvalidInput(format!(
            "parameter {v} not representable in 8.8 fixed point"
        )));
    }
    Ok(raw as u16)
}

pub fn from_fixed(raw: u16) -> f64 {
    raw as f64 / 256.0
}

/// Rounds parameters to the precision stored in the container.
pub fn quantize_params(p: EedParams) -> Result<EedParams> {
    EedParams::new(from_fixed(to_fixed(p.sigma)?), from_fixed(to_fixed(p.lambda)?))
}

/// Everything stored in a container file.
#[derive(Debug, Clone, PartialEq)]
pub struct Container {
    pub width: usize,
    pub height: usize,
    pub luma_params: EedParams,
    pub chroma_params: EedParams,
    pub luma_mask: BlockMask,
    /// Shared by Cb and Cr.
    pub chroma_mask: BlockMask,
    pub payload_y: Vec<u8>,
    pub payload_cb: Vec<u8>,
    pub payload_cr: Vec<u8>,
}

fn container_err(field: &'static str, reason: impl Into<String>) -> Error {
    Error::Container {
        field,
        reason: reason.into(),
    }
}

fn check_dims(width: usize, height: usize) -> Result<()> {
    if width == 0 || width > u16::MAX as usize {
        return Err(container_err("width", format!("{width} out of range")));
    }
    if height == 0 || height > u16::MAX as usize {
        return Err(container_err("height", format!("{height} out of range")));
    }
    if width * height > MAX_PIXELS {
        return Err(container_err(
            "height",
            format!("{width}x{height} exceeds {MAX_PIXELS} pixels"),
        ));
    }
    Ok(())
}

fn len_u32(field: &'static str, n: usize) -> Result<u32> {
    u32::try_from(n).map_err(|_| container_err(field, format!("length {n} exceeds 32 bits")))
}

/// Serialises a container. Parameters are rounded to 8.8 fixed point.
pub fn write_container(c: &Container) -> Result<Vec<u8>> {
    check_dims(c.width, c.height)?;
    let grid = BlockGrid::new(c.width, c.height);
    for (field, m) in [("mask_len_y", &c.luma_mask), ("mask_len_c", &c.chroma_mask)] {
        if *m.grid() != grid {
            return Err(container_err(field, "mask grid does not match image size"));
        }
        if m.kept_count() == 0 {
            return Err(container_err(field, "mask keeps no block"));
        }
    }
    let mask_y = arith_encode(c.luma_mask.bits());
    let mask_c = arith_encode(c.chroma_mask.bits());

    let mut out = Vec::with_capacity(
        HEADER_LEN + mask_y.len() + mask_c.len() + c.payload_y.len() + c.payload_cb.len() + c.payload_cr.len(),
    );
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    out.extend_from_slice(&(c.width as u16).to_be_bytes());
    out.extend_from_slice(&(c.height as u16).to_be_bytes());
    for v in [c.luma_params.sigma, c.luma_params.lambda, c.chroma_params.sigma, c.chroma_params.lambda] {
        out.extend_from_slice(&to_fixed(v)?.to_be_bytes());
    }
    for (field, n) in [
        ("mask_len_y", mask_y.len()),
        ("mask_len_c", mask_c.len()),
        ("payload_len_y", c.payload_y.len()),
        ("payload_len_cb", c.payload_cb.len()),
        ("payload_len_cr", c.payload_cr.len()),
    ] {
        out.extend_from_slice(&len_u32(field, n)?.to_be_bytes());
    }
    debug_assert_eq!(out.len(), HEADER_LEN);
    for part in [&mask_y, &mask_c, &c.payload_y, &c.payload_cb, &c.payload_cr] {
        out.extend_from_slice(part);
    }
    Ok(out)
}

struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, field: &'static str) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.data.len())
            .ok_or_else(|| {
                container_err(
                    field,
                    format!("needs {n} bytes at offset {}, file has {}", self.pos, self.data.len()),
                )
            })?;
        let s = &self.data[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u16(&mut self, field: &'static str) -> Result<u16> {
        let b = self.take(2, field)?;
        Ok(u16::from_be_bytes([b[0], b[1]]))
    }

    fn u32(&mut self, field: &'static str) -> Result<usize> {
        let b = self.take(4, field)?;
        Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]) as usize)
    }
}

/// Parses a container, validating every header field.
pub fn read_container(data: &[u8]) -> Result<Container> {
    let mut r = Reader { data, pos: 0 };
    if r.take(4, "magic")? != MAGIC {
        return Err(container_err("magic", "bad magic"));
    }
    let version = r.take(1, "version")?[0];
    if version != VERSION {
        return Err(container_err("version", format!("unsupported version {version}")));
    }
    let width = r.u16("width")? as usize;
    let height = r.u16("height")? as usize;
    check_dims(width, height)?;

    let mut params = [0.0; 4];
    for (i, field) in ["sigma_y", "lambda_y", "sigma_c", "lambda_c"].into_iter().enumerate() {
        let raw = r.u16(field)?;
        if raw == 0 {
            return Err(container_err(field, "must be positive"));
        }
        params[i] = from_fixed(raw);
    }
    let fields = [
        "mask_len_y",
        "mask_len_c",
        "payload_len_y",
        "payload_len_cb",
        "payload_len_cr",
    ];
    let mut lens = [0usize; 5];
    for (i, field) in fields.into_iter().enumerate() {
        lens[i] = r.u32(field)?;
    }
    let total: usize = lens.iter().sum();
    if HEADER_LEN + total != data.len() {
        let field = if HEADER_LEN + total > data.len() {
            // the first length that runs past the end
            let mut acc = HEADER_LEN;
            let mut f = fields[4];
            for (i, &l) in lens.iter().enumerate() {
                acc += l;
                if acc > data.len() {
                    f = fields[i];
                    break;
                }
            }
            f
        } else {
            "payload_len_cr"
        };
        return Err(container_err(
            field,
            format!("lengths sum to {} bytes, file has {}", HEADER_LEN + total, data.len()),
        ));
    }

    let grid = BlockGrid::new(width, height);
    let mut masks = Vec::with_capacity(2);
    for (i, field) in ["mask_len_y", "mask_len_c"].into_iter().enumerate() {
        let bytes = r.take(lens[i], field)?;
        let bits = arith_decode(bytes, grid.len()).map_err(|e| container_err(field, e.to_string()))?;
        let mask = BlockMask::from_bits(grid, bits)?;
        if mask.kept_count() == 0 {
            return Err(container_err(field, "mask keeps no block"));
        }
        masks.push(mask);
    }
    let payload_y = r.take(lens[2], "payload_len_y")?.to_vec();
    let payload_cb = r.take(lens[3], "payload_len_cb")?.to_vec();
    let payload_cr = r.take(lens[4], "payload_len_cr")?.to_vec();
    let chroma_mask = masks.pop().unwrap();
    let luma_mask = masks.pop().unwrap();
    Ok(Container {
        width,
        height,
        luma_params: EedParams::new(params[0], params[1])?,
        chroma_params: EedParams::new(params[2], params[3])?,
        luma_mask,
        chroma_mask,
        payload_y,
        payload_cb,
        payload_cr,
    })
}
