use crate::error::{Error, Result};

const TOP: u64 = 0xFFFF_FFFF;
const HALF: u64 = 1 << 31;
const QUARTER: u64 = 1 << 30;
const RESCALE_AT: u32 = 1 << 16;

/// Bits the decoder may read past the end of a well-formed stream.
const MAX_OVERRUN: usize = 32;

/// Single-context adaptive bit model with Laplace-style counts.
#[derive(Debug, Clone)]
struct Model {
    counts: [u32; 2],
}

impl Model {
    fn new() -> Self {
        Self { counts: [1, 1] }
    }

    fn total(&self) -> u64 {
        (self.counts[0] + self.counts[1]) as u64
    }

    fn update(&mut self, bit: bool) {
        self.counts[bit as usize] += 1;
        if self.counts[0] + self.counts[1] >= RESCALE_AT {
            for c in &mut self.counts {
                *c = (*c / 2).max(1);
            }
        }
    }
}

struct BitSink {
    bytes: Vec<u8>,
    acc: u8,
    filled: u8,
}

impl BitSink {
    fn put(&mut self, bit: bool) {
        self.acc = (self.acc << 1) | bit as u8;
        self.filled += 1;
        if self.filled == 8 {
            self.bytes.push(self.acc);
            self.acc = 0;
            self.filled = 0;
        }
    }

    fn put_with_pending(&mut self, bit: bool, pending: &mut u64) {
        self.put(bit);
        for _ in 0..*pending {
            self.put(!bit);
        }
        *pending = 0;
    }

    fn finish(mut self) -> Vec<u8> {
        if self.filled > 0 {
            self.bytes.push(self.acc << (8 - self.filled));
        }
        self.bytes
    }
}

/// Compresses a bit sequence with a 32-bit binary arithmetic coder.
pub fn arith_encode(bits: &[bool]) -> Vec<u8> {
    let mut model = Model::new();
    let (mut low, mut high) = (0u64, TOP);
    let mut pending = 0u64;
    let mut out = BitSink {
        bytes: Vec::with_capacity(bits.len() / 8 + 8),
        acc: 0,
        filled: 0,
    };
    for &bit in bits {
        let range = high - low + 1;
        let split = low + range * model.counts[0] as u64 / model.total() - 1;
        if bit {
            low = split + 1;
        } else {
            high = split;
        }
        model.update(bit);
        loop {
            if high < HALF {
                out.put_with_pending(false, &mut pending);
            } else if low >= HALF {
                out.put_with_pending(true, &mut pending);
                low -= HALF;
                high -= HALF;
            } else if low >= QUARTER && high < 3 * QUARTER {
                pending += 1;
                low -= QUARTER;
                high -= QUARTER;
            } else {
                break;
            }
            low <<= 1;
            high = (high << 1) | 1;
        }
    }
    pending += 1;
    out.put_with_pending(low >= QUARTER, &mut pending);
    out.finish()
}

struct BitSource<'a> {
    data: &'a [u8],
    pos: usize,
}

impl BitSource<'_> {
    /// Next bit, zero past the end.
    fn get(&mut self) -> u64 {
        let byte = self.pos / 8;
        let bit = match self.data.get(byte) {
            Some(b) => (b >> (7 - self.pos % 8)) & 1,
            None => 0,
        };
        self.pos += 1;
        bit as u64
    }

    fn overrun(&self) -> usize {
        self.pos.saturating_sub(self.data.len() * 8)
    }
}

/// Inverse of [`arith_encode`]; `count` is the number of coded bits.
pub fn arith_decode(data: &[u8], count: usize) -> Result<Vec<bool>> {
    let mut model = Model::new();
    let mut src = BitSource { data, pos: 0 };
    let (mut low, mut high) = (0u64, TOP);
    let mut value = 0u64;
    for _ in 0..32 {
        value = (value << 1) | src.get();
    }
    let mut bits = Vec::with_capacity(count);
    for _ in 0..count {
        let range = high - low + 1;
        let split = low + range * model.counts[0] as u64 / model.total() - 1;
        let bit = value > split;
        if bit {
            low = split + 1;
        } else {
            high = split;
        }
        model.update(bit);
        bits.push(bit);
        loop {
            if high < HALF {
            } else if low >= HALF {
                low -= HALF;
                high -= HALF;
                value -= HALF;
            } else if low >= QUARTER && high < 3 * QUARTER {
                low -= QUARTER;
                high -= QUARTER;
                value -= QUARTER;
            } else {
                break;
            }
            low <<= 1;
            high = (high << 1) | 1;
            value = (value << 1) | src.get();
        }
        if src.overrun() > MAX_OVERRUN {
            return Err(Error::ArithTruncated {
                consumed: data.len(),
            });
        }
    }
    Ok(bits)
}
