//! Huffman table storage (DHT layout) and a lookup-table decoder.

use super::bits::BitReader;
use super::error::{DecodeError, Result};

const LOOKUP_BITS: u32 = 9;

/// A Huffman table as carried in a DHT segment: code counts per length and
/// the symbols in code order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HuffmanSpec {
    pub counts: [u8; 16],
    pub symbols: Vec<u8>,
}

impl HuffmanSpec {
    /// Canonical codes (code, length) for each symbol, in symbol order.
    pub fn codes(&self) -> std::result::Result<Vec<(u16, u8)>, String> {
        let total: usize = self.counts.iter().map(|&c| c as usize).sum();
        if total != self.symbols.len() {
            return Err(format!("{} symbols for {} codes", self.symbols.len(), total));
        }
        let mut out = Vec::with_capacity(total);
        let mut code: u32 = 0;
        for (i, &count) in self.counts.iter().enumerate() {
            let len = i as u32 + 1;
            for _ in 0..count {
                if code >= (1 << len) {
                    return Err("code lengths overflow the code space".into());
                }
                out.push((code as u16, len as u8));
                code += 1;
            }
            code <<= 1;
        }
        Ok(out)
    }

    // Annex K.3 tables.
    pub fn std_dc_luma() -> Self {
        Self {
            counts: [0, 1, 5, 1, 1, 1, 1, 1, 1, 0, 0, 0, 0, 0, 0, 0],
            symbols: (0..12).collect(),
        }
    }

    pub fn std_dc_chroma() -> Self {
        Self {
            counts: [0, 3, 1, 1, 1, 1, 1, 1, 1, 1, 1, 0, 0, 0, 0, 0],
            symbols: (0..12).collect(),
        }
    }

    pub fn std_ac_luma() -> Self {
        Self {
            counts: [0, 2, 1, 3, 3, 2, 4, 3, 5, 5, 4, 4, 0, 0, 1, 0x7d],
            symbols: vec![
                0x01, 0x02, 0x03, 0x00, 0x04, 0x11, 0x05, 0x12, 0x21, 0x31, 0x41, 0x06, 0x13, 0x51, 0x61, 0x07, 0x22,
                0x71, 0x14, 0x32, 0x81, 0x91, 0xa1, 0x08, 0x23, 0x42, 0xb1, 0xc1, 0x15, 0x52, 0xd1, 0xf0, 0x24, 0x33,
                0x62, 0x72, 0x82, 0x09, 0x0a, 0x16, 0x17, 0x18, 0x19, 0x1a, 0x25, 0x26, 0x27, 0x28, 0x29, 0x2a, 0x34,
                0x35, 0x36, 0x37, 0x38, 0x39, 0x3a, 0x43, 0x44, 0x45, 0x46, 0x47, 0x48, 0x49, 0x4a, 0x53, 0x54, 0x55,
                0x56, 0x57, 0x58, 0x59, 0x5a, 0x63, 0x64, 0x65, 0x66, 0x67, 0x68, 0x69, 0x6a, 0x73, 0x74, 0x75, 0x76,
                0x77, 0x78, 0x79, 0x7a, 0x83, 0x84, 0x85, 0x86, 0x87, 0x88, 0x89, 0x8a, 0x92, 0x93, 0x94, 0x95, 0x96,
                0x97, 0x98, 0x99, 0x9a, 0xa2, 0xa3, 0xa4, 0xa5, 0xa6, 0xa7, 0xa8, 0xa9, 0xaa, 0xb2, 0xb3, 0xb4, 0xb5,
                0xb6, 0xb7, 0xb8, 0xb9, 0xba, 0xc2, 0xc3, 0xc4, 0xc5, 0xc6, 0xc7, 0xc8, 0xc9, 0xca, 0xd2, 0xd3, 0xd4,
                0xd5, 0xd6, 0xd7, 0xd8, 0xd9, 0xda, 0xe1, 0xe2, 0xe3, 0xe4, 0xe5, 0xe6, 0xe7, 0xe8, 0xe9, 0xea, 0xf1,
                0xf2, 0xf3, 0xf4, 0xf5, 0xf6, 0xf7, 0xf8, 0xf9, 0xfa,
            ],
        }
    }

    pub fn std_ac_chroma() -> Self {
        Self {
            counts: [0, 2, 1, 2, 4, 4, 3, 4, 7, 5, 4, 4, 0, 1, 2, 0x77],
            symbols: vec![
                0x00, 0x01, 0x02, 0x03, 0x11, 0x04, 0x05, 0x21, 0x31, 0x06, 0x12, 0x41, 0x51, 0x07, 0x61, 0x71, 0x13,
                0x22, 0x32, 0x81, 0x08, 0x14, 0x42, 0x91, 0xa1, 0xb1, 0xc1, 0x09, 0x23, 0x33, 0x52, 0xf0, 0x15, 0x62,
                0x72, 0xd1, 0x0a, 0x16, 0x24, 0x34, 0xe1, 0x25, 0xf1, 0x17, 0x18, 0x19, 0x1a, 0x26, 0x27, 0x28, 0x29,
                0x2a, 0x35, 0x36, 0x37, 0x38, 0x39, 0x3a, 0x43, 0x44, 0x45, 0x46, 0x47, 0x48, 0x49, 0x4a, 0x53, 0x54,
                0x55, 0x56, 0x57, 0x58, 0x59, 0x5a, 0x63, 0x64, 0x65, 0x66, 0x67, 0x68, 0x69, 0x6a, 0x73, 0x74, 0x75,
                0x76, 0x77, 0x78, 0x79, 0x7a, 0x82, 0x83, 0x84, 0x85, 0x86, 0x87, 0x88, 0x89, 0x8a, 0x92, 0x93, 0x94,
                0x95, 0x96, 0x97, 0x98, 0x99, 0x9a, 0xa2, 0xa3, 0xa4, 0xa5, 0xa6, 0xa7, 0xa8, 0xa9, 0xaa, 0xb2, 0xb3,
                0xb4, 0xb5, 0xb6, 0xb7, 0xb8, 0xb9, 0xba, 0xc2, 0xc3, 0xc4, 0xc5, 0xc6, 0xc7, 0xc8, 0xc9, 0xca, 0xd2,
                0xd3, 0xd4, 0xd5, 0xd6, 0xd7, 0xd8, 0xd9, 0xda, 0xe2, 0xe3, 0xe4, 0xe5, 0xe6, 0xe7, 0xe8, 0xe9, 0xea,
                0xf2, 0xf3, 0xf4, 0xf5, 0xf6, 0xf7, 0xf8, 0xf9, 0xfa,
            ],
        }
    }
}

pub(crate) struct HuffmanDecoder {
    // (symbol, length); length 0 means "not resolvable in LOOKUP_BITS"
    lookup: Vec<(u8, u8)>,
    maxcode: [i32; 17],
    valoffset: [i32; 17],
    symbols: Vec<u8>,
}

impl HuffmanDecoder {
    pub fn new(spec: &HuffmanSpec) -> std::result::Result<Self, String> {
        let codes = spec.codes()?;
        let mut lookup = vec![(0u8, 0u8); 1 << LOOKUP_BITS];
        let mut maxcode = [-1i32; 17];
        let mut valoffset = [0i32; 17];
        let mut first = 0usize;
        for len in 1..=16usize {
            let count = spec.counts[len - 1] as usize;
            if count > 0 {
                let first_code = codes[first].0 as i32;
                valoffset[len] = first as i32 - first_code;
                maxcode[len] = codes[first + count - 1].0 as i32;
            }
            first += count;
        }
        for (&(code, len), &sym) in codes.iter().zip(&spec.symbols) {
            let len = len as u32;
            if len <= LOOKUP_BITS {
                let shift = LOOKUP_BITS - len;
                let base = (code as usize) << shift;
                for slot in &mut lookup[base..base + (1 << shift)] {
                    *slot = (sym, len as u8);
                }
            }
        }
        Ok(Self {
            lookup,
            maxcode,
            valoffset,
            symbols: spec.symbols.clone(),
        })
    }

    pub fn decode(&self, reader: &mut BitReader<'_>) -> Result<u8> {
        let peek = reader.peek16()?;
        let (sym, len) = self.lookup[(peek >> (16 - LOOKUP_BITS)) as usize];
        if len > 0 {
            reader.consume(len as u32);
            return Ok(sym);
        }
        for len in (LOOKUP_BITS as usize + 1)..=16 {
            let code = (peek >> (16 - len)) as i32;
            if code <= self.maxcode[len] {
                reader.consume(len as u32);
                let idx = (code + self.valoffset[len]) as usize;
                return self
                    .symbols
                    .get(idx)
                    .copied()
                    .ok_or_else(|| DecodeError::CorruptEntropyStream("invalid Huffman code".into()));
            }
        }
        Err(DecodeError::CorruptEntropyStream("invalid Huffman code".into()))
    }
}
