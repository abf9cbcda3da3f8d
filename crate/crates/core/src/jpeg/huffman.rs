use super::tables::HuffmanSpec;

/// Per-symbol (code, length) table for encoding.
#[derive(Debug, Clone)]
pub struct EncodeTable {
    codes: [(u16, u8); 256],
}

impl EncodeTable {
    pub fn new(spec: &HuffmanSpec) -> Self {
        let mut codes = [(0u16, 0u8); 256];
        let mut code: u32 = 0;
        let mut k = 0;
        for (len_minus_1, &count) in spec.counts.iter().enumerate() {
            for _ in 0..count {
                codes[spec.symbols[k] as usize] = (code as u16, len_minus_1 as u8 + 1);
                code += 1;
                k += 1;
            }
            code <<= 1;
        }
        Self { codes }
    }

    #[inline]
    pub fn get(&self, symbol: u8) -> (u16, u8) {
        self.codes[symbol as usize]
    }
}

/// Canonical-code decoding table (JPEG annex F "maxcode/valptr" form).
#[derive(Debug, Clone)]
pub struct DecodeTable {
    maxcode: [i32; 17],
    valptr: [i32; 17],
    mincode: [i32; 17],
    symbols: Vec<u8>,
}

impl DecodeTable {
    /// Returns `None` if the counts describe more codes than fit in 16 bits.
    pub fn new(spec: &HuffmanSpec) -> Option<Self> {
        let total: usize = spec.counts.iter().map(|&c| c as usize).sum();
        if total != spec.symbols.len() || total > 256 {
            return None;
        }
        let mut maxcode = [-1i32; 17];
        let mut valptr = [0i32; 17];
        let mut mincode = [0i32; 17];
        let mut code: i32 = 0;
        let mut k: i32 = 0;
        for len in 1..=16 {
            let count = spec.counts[len - 1] as i32;
            if count > 0 {
                valptr[len] = k;
                mincode[len] = code;
                code += count;
                k += count;
                maxcode[len] = code - 1;
            }
            if code > (1 << len) {
                return None;
            }
            code <<= 1;
        }
        Some(Self {
            maxcode,
            valptr,
            mincode,
            symbols: spec.symbols.clone(),
        })
    }

    /// Decodes one symbol, pulling bits from `next_bit`. `Ok(None)` means no
    /// code matched within 16 bits.
    pub fn decode<E>(
        &self,
        mut next_bit: impl FnMut() -> Result<u32, E>,
    ) -> Result<Option<u8>, E> {
        let mut code: i32 = 0;
        for len in 1..=16 {
            code = (code << 1) | next_bit()? as i32;
            if self.maxcode[len] >= 0 && code <= self.maxcode[len] {
                let idx = self.valptr[len] + code - self.mincode[len];
                return Ok(self.symbols.get(idx as usize).copied());
            }
        }
        Ok(None)
    }
}

/// Magnitude category (number of bits) of a coefficient value.
#[inline]
pub fn category(v: i32) -> u8 {
    (32 - v.unsigned_abs().leading_zeros()) as u8
}
