//! Baseline sequential JPEG decoder. Every failure is reported as a
//! structured error carrying the byte offset where it was detected.

use super::dct::idct8x8;
use super::huffman::DecodeTable;
use super::tables::{HuffmanSpec, ZIGZAG};
use crate::error::{Error, JpegErrorKind, Result};
use crate::image::PixelPlane;

const MAX_PIXELS: usize = 1 << 26;

/// Decoded planes at full image resolution (1 = grey, 3 = YCbCr).
#[derive(Debug, Clone, PartialEq)]
pub struct DecodedJpeg {
    pub width: usize,
    pub height: usize,
    pub planes: Vec<PixelPlane>,
}

fn err(offset: usize, kind: JpegErrorKind) -> Error {
    Error::Jpeg { offset, kind }
}

#[derive(Debug, Clone)]
struct FrameComponent {
    id: u8,
    h: usize,
    v: usize,
    tq: usize,
    // samples at component resolution, padded to whole MCUs
    samples: Vec<u8>,
    stride: usize,
    decoded: bool,
}

struct Frame {
    width: usize,
    height: usize,
    hmax: usize,
    vmax: usize,
    comps: Vec<FrameComponent>,
}

impl Frame {
    fn mcux(&self) -> usize {
        self.width.div_ceil(8 * self.hmax)
    }

    fn mcuy(&self) -> usize {
        self.height.div_ceil(8 * self.vmax)
    }

    fn comp_dims(&self, c: &FrameComponent) -> (usize, usize) {
        (
            (self.width * c.h).div_ceil(self.hmax),
            (self.height * c.v).div_ceil(self.vmax),
        )
    }
}

struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn u8(&mut self) -> Result<u8> {
        let b = *self
            .data
            .get(self.pos)
            .ok_or_else(|| err(self.pos, JpegErrorKind::Truncated))?;
        self.pos += 1;
        Ok(b)
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(((self.u8()? as u16) << 8) | self.u8()? as u16)
    }

    fn bytes(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.data.len() {
            return Err(err(self.data.len(), JpegErrorKind::Truncated));
        }
        let s = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    /// Reads a segment length and returns the body.
    fn segment(&mut self) -> Result<(usize, &'a [u8])> {
        let at = self.pos;
        let len = self.u16()? as usize;
        if len < 2 {
            return Err(err(at, JpegErrorKind::BadFrame(format!("segment length {len}"))));
        }
        Ok((at + 2, self.bytes(len - 2)?))
    }
}

struct BitReader<'a> {
    data: &'a [u8],
    pos: usize,
    acc: u32,
    nbits: u32,
}

impl BitReader<'_> {
    fn fill(&mut self) -> Result<()> {
        let b = *self
            .data
            .get(self.pos)
            .ok_or_else(|| err(self.pos, JpegErrorKind::Truncated))?;
        if b == 0xFF {
            match self.data.get(self.pos + 1) {
                Some(0x00) => self.pos += 2,
                Some(_) => return Err(err(self.pos, JpegErrorKind::Truncated)),
                None => return Err(err(self.pos + 1, JpegErrorKind::Truncated)),
            }
        } else {
            self.pos += 1;
        }
        self.acc = (self.acc << 8) | b as u32;
        self.nbits += 8;
        Ok(())
    }

    #[inline]
    fn bit(&mut self) -> Result<u32> {
        if self.nbits == 0 {
            self.fill()?;
        }
        self.nbits -= 1;
        Ok((self.acc >> self.nbits) & 1)
    }

    fn bits(&mut self, n: u8) -> Result<u32> {
        let mut v = 0;
        for _ in 0..n {
            v = (v << 1) | self.bit()?;
        }
        Ok(v)
    }
}

#[inline]
fn extend(v: u32, s: u8) -> i32 {
    if s == 0 {
        0
    } else if v < (1 << (s - 1)) {
        v as i32 - (1 << s) + 1
    } else {
        v as i32
    }
}

#[derive(Default)]
struct Tables {
    quant: [Option<[u16; 64]>; 4],
    dc: [Option<DecodeTable>; 4],
    ac: [Option<DecodeTable>; 4],
}

fn parse_dqt(at: usize, body: &[u8], t: &mut Tables) -> Result<()> {
    let mut i = 0;
    while i < body.len() {
        let pq = body[i] >> 4;
        let tq = (body[i] & 15) as usize;
        if pq != 0 {
            return Err(err(at + i, JpegErrorKind::Unsupported("16-bit quantizer".into())));
        }
        if tq > 3 {
            return Err(err(at + i, JpegErrorKind::BadTable(format!("quant id {tq}"))));
        }
        let vals = body
            .get(i + 1..i + 65)
            .ok_or_else(|| err(at + body.len(), JpegErrorKind::Truncated))?;
        let mut q = [0u16; 64];
        for (k, &v) in vals.iter().enumerate() {
            q[k] = v as u16;
        }
        t.quant[tq] = Some(q);
        i += 65;
    }
    Ok(())
}

fn parse_dht(at: usize, body: &[u8], t: &mut Tables) -> Result<()> {
    let mut i = 0;
    while i < body.len() {
        let class = body[i] >> 4;
        let id = (body[i] & 15) as usize;
        if class > 1 || id > 3 {
            return Err(err(at + i, JpegErrorKind::BadTable(format!("huffman class {class} id {id}"))));
        }
        let counts_slice = body
            .get(i + 1..i + 17)
            .ok_or_else(|| err(at + body.len(), JpegErrorKind::Truncated))?;
        let mut counts = [0u8; 16];
        counts.copy_from_slice(counts_slice);
        let n: usize = counts.iter().map(|&c| c as usize).sum();
        let symbols = body
            .get(i + 17..i + 17 + n)
            .ok_or_else(|| err(at + body.len(), JpegErrorKind::BadTable("huffman length overrun".into())))?
            .to_vec();
        let table = DecodeTable::new(&HuffmanSpec { counts, symbols })
            .ok_or_else(|| err(at + i, JpegErrorKind::BadTable("invalid code lengths".into())))?;
        if class == 0 {
            t.dc[id] = Some(table);
        } else {
            t.ac[id] = Some(table);
        }
        i += 17 + n;
    }
    Ok(())
}

fn parse_sof(at: usize, body: &[u8]) -> Result<Frame> {
    if body.len() < 6 {
        return Err(err(at, JpegErrorKind::Truncated));
    }
    if body[0] != 8 {
        return Err(err(at, JpegErrorKind::Unsupported(format!("{}-bit samples", body[0]))));
    }
    let height = u16::from_be_bytes([body[1], body[2]]) as usize;
    let width = u16::from_be_bytes([body[3], body[4]]) as usize;
    let n = body[5] as usize;
    if width == 0 || height == 0 {
        return Err(err(at + 1, JpegErrorKind::BadFrame("zero dimension".into())));
    }
    if width * height > MAX_PIXELS {
        return Err(err(at + 1, JpegErrorKind::Unsupported("image too large".into())));
    }
    if n != 1 && n != 3 {
        return Err(err(at + 5, JpegErrorKind::Unsupported(format!("{n} components"))));
    }
    if body.len() < 6 + 3 * n {
        return Err(err(at + body.len(), JpegErrorKind::Truncated));
    }
    let mut comps = Vec::with_capacity(n);
    for c in 0..n {
        let b = &body[6 + 3 * c..9 + 3 * c];
        let (h, v) = ((b[1] >> 4) as usize, (b[1] & 15) as usize);
        if !(1..=2).contains(&h) || !(1..=2).contains(&v) || b[2] > 3 {
            return Err(err(at + 6 + 3 * c, JpegErrorKind::BadFrame("component parameters".into())));
        }
        comps.push(FrameComponent {
            id: b[0],
            h,
            v,
            tq: b[2] as usize,
            samples: Vec::new(),
            stride: 0,
            decoded: false,
        });
    }
    let hmax = comps.iter().map(|c| c.h).max().unwrap();
    let vmax = comps.iter().map(|c| c.v).max().unwrap();
    let mut frame = Frame {
        width,
        height,
        hmax,
        vmax,
        comps,
    };
    let (mcux, mcuy) = (frame.mcux(), frame.mcuy());
    for c in &mut frame.comps {
        c.stride = mcux * c.h * 8;
        c.samples = vec![0u8; c.stride * mcuy * c.v * 8];
    }
    Ok(frame)
}

fn decode_block(
    bits: &mut BitReader,
    dc: &DecodeTable,
    ac: &DecodeTable,
    quant: &[u16; 64],
    pred: &mut i32,
) -> Result<[f64; 64]> {
    let mut coef = [0.0f64; 64];
    let t = dc
        .decode(|| bits.bit())?
        .ok_or_else(|| err(bits.pos, JpegErrorKind::HuffmanOverrun))?;
    if t > 11 {
        return Err(err(bits.pos, JpegErrorKind::BadFrame(format!("dc category {t}"))));
    }
    let diff = extend(bits.bits(t)?, t);
    *pred = pred.wrapping_add(diff);
    coef[0] = *pred as f64 * quant[0] as f64;
    let mut k = 1;
    while k < 64 {
        let rs = ac
            .decode(|| bits.bit())?
            .ok_or_else(|| err(bits.pos, JpegErrorKind::HuffmanOverrun))?;
        let (r, s) = ((rs >> 4) as usize, rs & 15);
        if s == 0 {
            if r == 15 {
                k += 16;
                continue;
            }
            break;
        }
        k += r;
        if k > 63 {
            return Err(err(bits.pos, JpegErrorKind::HuffmanOverrun));
        }
        let v = extend(bits.bits(s)?, s);
        coef[ZIGZAG[k]] = v as f64 * quant[k] as f64;
        k += 1;
    }
    if k > 64 {
        return Err(err(bits.pos, JpegErrorKind::HuffmanOverrun));
    }
    Ok(idct8x8(&coef))
}

fn store_block(c: &mut FrameComponent, bx: usize, by: usize, px: &[f64; 64]) {
    for y in 0..8 {
        let row = (by * 8 + y) * c.stride + bx * 8;
        for x in 0..8 {
            c.samples[row + x] = (px[y * 8 + x] + 128.0).round().clamp(0.0, 255.0) as u8;
        }
    }
}

fn decode_scan(r: &mut Reader, at: usize, body: &[u8], frame: &mut Frame, t: &Tables) -> Result<()> {
    let ns = *body.first().ok_or_else(|| err(at, JpegErrorKind::Truncated))? as usize;
    if ns == 0 || ns > frame.comps.len() || body.len() < 1 + 2 * ns + 3 {
        return Err(err(at, JpegErrorKind::BadFrame("scan header".into())));
    }
    let (ss, se, ahal) = (body[1 + 2 * ns], body[2 + 2 * ns], body[3 + 2 * ns]);
    if ss != 0 || se != 63 || ahal != 0 {
        return Err(err(at, JpegErrorKind::Unsupported("non-sequential scan".into())));
    }
    let mut scan = Vec::with_capacity(ns);
    for i in 0..ns {
        let id = body[1 + 2 * i];
        let td = (body[2 + 2 * i] >> 4) as usize;
        let ta = (body[2 + 2 * i] & 15) as usize;
        let ci = frame
            .comps
            .iter()
            .position(|c| c.id == id)
            .ok_or_else(|| err(at + 1 + 2 * i, JpegErrorKind::BadFrame(format!("unknown component {id}"))))?;
        let dc = t.dc.get(td).and_then(|x| x.as_ref())
            .ok_or_else(|| err(at + 2 + 2 * i, JpegErrorKind::BadTable("missing DC table".into())))?;
        let ac = t.ac.get(ta).and_then(|x| x.as_ref())
            .ok_or_else(|| err(at + 2 + 2 * i, JpegErrorKind::BadTable("missing AC table".into())))?;
        let quant = t.quant[frame.comps[ci].tq]
            .as_ref()
            .ok_or_else(|| err(at, JpegErrorKind::BadTable("missing quant table".into())))?;
        scan.push((ci, dc, ac, quant));
    }

    let mut bits = BitReader {
        data: r.data,
        pos: r.pos,
        acc: 0,
        nbits: 0,
    };
    let mut preds = vec![0i32; ns];
    if ns == 1 {
        let (ci, dc, ac, quant) = scan[0];
        let (cw, ch) = frame.comp_dims(&frame.comps[ci]);
        for by in 0..ch.div_ceil(8) {
            for bx in 0..cw.div_ceil(8) {
                let px = decode_block(&mut bits, dc, ac, quant, &mut preds[0])?;
                store_block(&mut frame.comps[ci], bx, by, &px);
            }
        }
    } else {
        let (mcux, mcuy) = (frame.mcux(), frame.mcuy());
        for my in 0..mcuy {
            for mx in 0..mcux {
                for (si, &(ci, dc, ac, quant)) in scan.iter().enumerate() {
                    let (h, v) = (frame.comps[ci].h, frame.comps[ci].v);
                    for by in 0..v {
                        for bx in 0..h {
                            let px = decode_block(&mut bits, dc, ac, quant, &mut preds[si])?;
                            store_block(&mut frame.comps[ci], mx * h + bx, my * v + by, &px);
                        }
                    }
                }
            }
        }
    }
    for &(ci, ..) in &scan {
        frame.comps[ci].decoded = true;
    }
    r.pos = bits.pos;
    Ok(())
}

/// Upsamples an integer component plane by (fx, fy) to `w`x`h`. The 2x
/// cases use libjpeg's triangle ("fancy") filter; others replicate.
fn upsample(src: &[u8], stride: usize, sw: usize, sh: usize, fx: usize, fy: usize, w: usize, h: usize) -> PixelPlane {
    let at = |x: isize, y: isize| -> i32 {
        let x = x.clamp(0, sw as isize - 1) as usize;
        let y = y.clamp(0, sh as isize - 1) as usize;
        src[y * stride + x] as i32
    };
    match (fx, fy) {
        (1, 1) => PixelPlane::from_fn(w, h, |x, y| at(x as isize, y as isize) as f64),
        (2, 2) => PixelPlane::from_fn(w, h, |x, y| {
            let (sx, sy) = ((x / 2) as isize, (y / 2) as isize);
            let ny = if y % 2 == 0 { sy - 1 } else { sy + 1 };
            let col = |cx: isize| 3 * at(cx, sy) + at(cx, ny);
            let v = if x % 2 == 0 {
                (3 * col(sx) + col(sx - 1) + 8) >> 4
            } else {
                (3 * col(sx) + col(sx + 1) + 7) >> 4
            };
            v as f64
        }),
        (2, 1) => PixelPlane::from_fn(w, h, |x, y| {
            let (sx, sy) = ((x / 2) as isize, y as isize);
            let v = if x % 2 == 0 {
                (3 * at(sx, sy) + at(sx - 1, sy) + 1) >> 2
            } else {
                (3 * at(sx, sy) + at(sx + 1, sy) + 2) >> 2
            };
            v as f64
        }),
        _ => PixelPlane::from_fn(w, h, |x, y| at((x / fx) as isize, (y / fy) as isize) as f64),
    }
}

/// Decodes a baseline sequential JPEG stream.
pub fn decode_baseline(data: &[u8]) -> Result<DecodedJpeg> {
    if data.len() < 2 {
        return Err(err(data.len(), JpegErrorKind::Truncated));
    }
    if data[0] != 0xFF || data[1] != 0xD8 {
        return Err(err(0, JpegErrorKind::MissingSoi));
    }
    let mut r = Reader { data, pos: 2 };
    let mut tables = Tables::default();
    let mut frame: Option<Frame> = None;
    loop {
        let at = r.pos;
        let b = r.u8()?;
        if b != 0xFF {
            return Err(err(at, JpegErrorKind::BadMarker(b)));
        }
        let mut m = r.u8()?;
        while m == 0xFF {
            m = r.u8()?;
        }
        match m {
            0xD9 => break,
            0xC0 | 0xC1 => {
                if frame.is_some() {
                    return Err(err(at, JpegErrorKind::BadFrame("second SOF".into())));
                }
                let (body_at, body) = r.segment()?;
                frame = Some(parse_sof(body_at, body)?);
            }
            0xC2 | 0xC3 | 0xC5..=0xC7 | 0xC9..=0xCB | 0xCD..=0xCF => {
                return Err(err(at, JpegErrorKind::Unsupported(format!("SOF marker 0x{m:02X}"))));
            }
            0xC4 => {
                let (body_at, body) = r.segment()?;
                parse_dht(body_at, body, &mut tables)?;
            }
            0xDB => {
                let (body_at, body) = r.segment()?;
                parse_dqt(body_at, body, &mut tables)?;
            }
            0xDD => {
                let (body_at, body) = r.segment()?;
                if body.len() != 2 {
                    return Err(err(body_at, JpegErrorKind::BadFrame("DRI length".into())));
                }
                if body != [0, 0] {
                    return Err(err(body_at, JpegErrorKind::Unsupported("restart intervals".into())));
                }
            }
            0xDA => {
                let (body_at, body) = r.segment()?;
                let f = frame
                    .as_mut()
                    .ok_or_else(|| err(at, JpegErrorKind::BadFrame("scan before frame".into())))?;
                decode_scan(&mut r, body_at, body, f, &tables)?;
            }
            0xE0..=0xEF | 0xFE | 0xDC | 0xDE | 0xDF => {
                r.segment()?;
            }
            0x01 => {}
            other => return Err(err(at + 1, JpegErrorKind::BadMarker(other))),
        }
    }
    let frame = frame.ok_or_else(|| err(r.pos, JpegErrorKind::BadFrame("no frame".into())))?;
    if frame.comps.iter().any(|c| !c.decoded) {
        return Err(err(r.pos, JpegErrorKind::BadFrame("component without scan data".into())));
    }
    let planes = frame
        .comps
        .iter()
        .map(|c| {
            let (cw, ch) = frame.comp_dims(c);
            upsample(
                &c.samples,
                c.stride,
                cw,
                ch,
                frame.hmax / c.h,
                frame.vmax / c.v,
                frame.width,
                frame.height,
            )
        })
        .collect();
    Ok(DecodedJpeg {
        width: frame.width,
        height: frame.height,
        planes,
    })
}
