use super::dct::fdct8x8;
use super::huffman::{category, EncodeTable};
use super::tables::{
    quality_to_tables, std_ac_chroma, std_ac_luma, std_dc_chroma, std_dc_luma, HuffmanSpec,
    QuantTable, ZIGZAG,
};
use crate::error::{Error, Result};
use crate::image::{PixelPlane, YCbCrImage};

/// Chroma sampling of a three-component stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sampling {
    S444,
    S420,
}

/// Which table set a single-component stream uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableClass {
    Luma,
    Chroma,
}

struct BitWriter {
    out: Vec<u8>,
    acc: u32,
    nbits: u32,
}

impl BitWriter {
    fn new(out: Vec<u8>) -> Self {
        Self {
            out,
            acc: 0,
            nbits: 0,
        }
    }

    #[inline]
    fn put(&mut self, code: u32, len: u8) {
        debug_assert!(len <= 16);
        self.acc = (self.acc << len) | (code & ((1u32 << len) - 1));
        self.nbits += len as u32;
        while self.nbits >= 8 {
            let byte = (self.acc >> (self.nbits - 8)) as u8;
            self.out.push(byte);
            if byte == 0xFF {
                self.out.push(0x00);
            }
            self.nbits -= 8;
        }
        self.acc &= (1u32 << self.nbits) - 1;
    }

    /// Pads the final partial byte with one-bits.
    fn finish(mut self) -> Vec<u8> {
        if self.nbits > 0 {
            let pad = 8 - self.nbits;
            self.put((1 << pad) - 1, pad as u8);
        }
        self.out
    }
}

struct Component<'a> {
    id: u8,
    h: usize,
    v: usize,
    quant: &'a QuantTable,
    quant_id: u8,
    dc: &'a EncodeTable,
    ac: &'a EncodeTable,
    table_id: u8,
    plane: PixelPlane,
}

fn segment(out: &mut Vec<u8>, marker: u8, body: &[u8]) {
    out.extend([0xFF, marker]);
    out.extend(((body.len() + 2) as u16).to_be_bytes());
    out.extend(body);
}

fn huffman_body(body: &mut Vec<u8>, class: u8, id: u8, spec: &HuffmanSpec) {
    body.push((class << 4) | id);
    body.extend(spec.counts);
    body.extend(&spec.symbols);
}

/// Averages 2x2 neighbourhoods with edge replication.
fn downsample_2x2(p: &PixelPlane) -> PixelPlane {
    let (w, h) = (p.width(), p.height());
    let (cw, ch) = (w.div_ceil(2), h.div_ceil(2));
    PixelPlane::from_fn(cw, ch, |x, y| {
        let x0 = 2 * x;
        let y0 = 2 * y;
        let x1 = (x0 + 1).min(w - 1);
        let y1 = (y0 + 1).min(h - 1);
        (p.get(x0, y0) + p.get(x1, y0) + p.get(x0, y1) + p.get(x1, y1)) / 4.0
    })
}

fn encode_block(
    w: &mut BitWriter,
    tile: &[f64; 64],
    comp: &Component,
    pred: &mut i32,
) {
    let mut shifted = [0.0; 64];
    for (s, &v) in shifted.iter_mut().zip(tile) {
        *s = v.clamp(0.0, 255.0).round() - 128.0;
    }
    let coef = fdct8x8(&shifted);
    let q = comp.quant.zigzag();
    let mut zz = [0i32; 64];
    for k in 0..64 {
        let limit = if k == 0 { 2047.0 } else { 1023.0 };
        zz[k] = (coef[ZIGZAG[k]] / q[k] as f64).round().clamp(-limit, limit) as i32;
    }

    let diff = zz[0] - *pred;
    *pred = zz[0];
    let cat = category(diff);
    let (code, len) = comp.dc.get(cat);
    w.put(code as u32, len);
    if cat > 0 {
        w.put(magnitude_bits(diff, cat), cat);
    }

    let mut run = 0;
    for &v in &zz[1..] {
        if v == 0 {
            run += 1;
            continue;
        }
        while run >= 16 {
            let (code, len) = comp.ac.get(0xF0);
            w.put(code as u32, len);
            run -= 16;
        }
        let cat = category(v);
        let (code, len) = comp.ac.get(((run as u8) << 4) | cat);
        w.put(code as u32, len);
        w.put(magnitude_bits(v, cat), cat);
        run = 0;
    }
    if run > 0 {
        let (code, len) = comp.ac.get(0x00);
        w.put(code as u32, len);
    }
}

#[inline]
fn magnitude_bits(v: i32, cat: u8) -> u32 {
    if v >= 0 {
        v as u32
    } else {
        (v - 1) as u32 & ((1u32 << cat) - 1)
    }
}

fn tile_at(p: &PixelPlane, bx: usize, by: usize) -> [f64; 64] {
    let mut t = [0.0; 64];
    for ty in 0..8 {
        let y = (by * 8 + ty).min(p.height() - 1);
        for tx in 0..8 {
            let x = (bx * 8 + tx).min(p.width() - 1);
            t[ty * 8 + tx] = p.get(x, y);
        }
    }
    t
}

fn encode_frame(width: usize, height: usize, comps: &[Component], quants: &[(&QuantTable, u8)], huffs: &[(&HuffmanSpec, &HuffmanSpec, u8)]) -> Result<Vec<u8>> {
    if width > u16::MAX as usize || height > u16::MAX as usize {
        return Err(Error::InvalidInput(format!(
            "{width}x{height} exceeds the JPEG size limit"
        )));
    }
    let mut out = vec![0xFF, 0xD8];
    segment(
        &mut out,
        0xE0,
        &[b'J', b'F', b'I', b'F', 0, 1, 1, 0, 0, 1, 0, 1, 0, 0],
    );
    let mut dqt = Vec::new();
    for (table, id) in quants {
        dqt.push(*id);
        dqt.extend(table.zigzag().iter().map(|&q| q as u8));
    }
    segment(&mut out, 0xDB, &dqt);

    let mut sof = vec![8];
    sof.extend((height as u16).to_be_bytes());
    sof.extend((width as u16).to_be_bytes());
    sof.push(comps.len() as u8);
    for c in comps {
        sof.extend([c.id, ((c.h as u8) << 4) | c.v as u8, c.quant_id]);
    }
    segment(&mut out, 0xC0, &sof);

    let mut dht = Vec::new();
    for (dc, ac, id) in huffs {
        huffman_body(&mut dht, 0, *id, dc);
        huffman_body(&mut dht, 1, *id, ac);
    }
    segment(&mut out, 0xC4, &dht);

    let mut sos = vec![comps.len() as u8];
    for c in comps {
        sos.extend([c.id, (c.table_id << 4) | c.table_id]);
    }
    sos.extend([0, 63, 0]);
    segment(&mut out, 0xDA, &sos);

    let hmax = comps.iter().map(|c| c.h).max().unwrap_or(1);
    let vmax = comps.iter().map(|c| c.v).max().unwrap_or(1);
    let mut w = BitWriter::new(out);
    let mut preds = vec![0i32; comps.len()];
    if comps.len() == 1 {
        let c = &comps[0];
        for by in 0..c.plane.height().div_ceil(8) {
            for bx in 0..c.plane.width().div_ceil(8) {
                encode_block(&mut w, &tile_at(&c.plane, bx, by), c, &mut preds[0]);
            }
        }
    } else {
        let mcux = width.div_ceil(8 * hmax);
        let mcuy = height.div_ceil(8 * vmax);
        for my in 0..mcuy {
            for mx in 0..mcux {
                for (ci, c) in comps.iter().enumerate() {
                    for v in 0..c.v {
                        for h in 0..c.h {
                            let t = tile_at(&c.plane, mx * c.h + h, my * c.v + v);
                            encode_block(&mut w, &t, c, &mut preds[ci]);
                        }
                    }
                }
            }
        }
    }
    let mut out = w.finish();
    out.extend([0xFF, 0xD9]);
    Ok(out)
}

/// Encodes a single plane as a greyscale baseline JPEG.
pub fn encode_gray(plane: &PixelPlane, quality: u8, class: TableClass) -> Result<Vec<u8>> {
    let (luma_q, chroma_q) = quality_to_tables(quality)?;
    let (quant, dc, ac) = match class {
        TableClass::Luma => (luma_q, std_dc_luma(), std_ac_luma()),
        TableClass::Chroma => (chroma_q, std_dc_chroma(), std_ac_chroma()),
    };
    let (dct, act) = (EncodeTable::new(&dc), EncodeTable::new(&ac));
    let comp = Component {
        id: 1,
        h: 1,
        v: 1,
        quant: &quant,
        quant_id: 0,
        dc: &dct,
        ac: &act,
        table_id: 0,
        plane: plane.clone(),
    };
    encode_frame(
        plane.width(),
        plane.height(),
        &[comp],
        &[(&quant, 0)],
        &[(&dc, &ac, 0)],
    )
}

/// Encodes a colour image as a three-component interleaved baseline JPEG.
pub fn encode_ycbcr(img: &YCbCrImage, quality: u8, sampling: Sampling) -> Result<Vec<u8>> {
    let (luma_q, chroma_q) = quality_to_tables(quality)?;
    let (dcl, acl, dcc, acc) = (std_dc_luma(), std_ac_luma(), std_dc_chroma(), std_ac_chroma());
    let (dclt, aclt, dcct, acct) = (
        EncodeTable::new(&dcl),
        EncodeTable::new(&acl),
        EncodeTable::new(&dcc),
        EncodeTable::new(&acc),
    );
    let (ys, cplane): (usize, fn(&PixelPlane) -> PixelPlane) = match sampling {
        Sampling::S444 => (1, |p| p.clone()),
        Sampling::S420 => (2, downsample_2x2),
    };
    let comps = vec![
        Component {
            id: 1,
            h: ys,
            v: ys,
            quant: &luma_q,
            quant_id: 0,
            dc: &dclt,
            ac: &aclt,
            table_id: 0,
            plane: img.y.clone(),
        },
        Component {
            id: 2,
            h: 1,
            v: 1,
            quant: &chroma_q,
            quant_id: 1,
            dc: &dcct,
            ac: &acct,
            table_id: 1,
            plane: cplane(&img.cb),
        },
        Component {
            id: 3,
            h: 1,
            v: 1,
            quant: &chroma_q,
            quant_id: 1,
            dc: &dcct,
            ac: &acct,
            table_id: 1,
            plane: cplane(&img.cr),
        },
    ];
    encode_frame(
        img.width(),
        img.height(),
        &comps,
        &[(&luma_q, 0), (&chroma_q, 1)],
        &[(&dcl, &acl, 0), (&dcc, &acc, 1)],
    )
}
