//! Baseline JPEG partial decoding.
//!
//! [`parse_headers`] walks the marker segments up to the first scan,
//! [`decode_coefficients`] undoes Huffman coding, run-length coding and DC
//! prediction, and [`dequantize`] multiplies by the quantization steps. None
//! of these run an inverse DCT: blocks stay in the frequency domain, in
//! zigzag order. [`reconstruct_rgb`] is the full-decode path kept for timing
//! baselines and as a correctness oracle.

mod bits;
mod decode;
pub mod encoder;
mod error;
mod huffman;
pub mod idct;
mod parse;
mod pixels;
pub mod zigzag;

pub use decode::decode_coefficients;
pub use error::{DecodeError, Result, TableKind, Unsupported};
pub use huffman::HuffmanSpec;
pub use pixels::{
    reconstruct_planes, reconstruct_planes_with, reconstruct_rgb, reconstruct_rgb_with, IdctMethod, RgbImage,
};

use serde::{Deserialize, Serialize};

/// Color component of a block grid, by position in the frame.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Component {
    Y,
    Cb,
    Cr,
}

impl Component {
    pub fn from_index(i: usize) -> Component {
        match i {
            0 => Component::Y,
            1 => Component::Cb,
            _ => Component::Cr,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FrameComponent {
    pub id: u8,
    pub h: u8,
    pub v: u8,
    pub quant_table: u8,
}

/// 64 quantization steps in zigzag order.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct QuantTable {
    pub values: [u16; 64],
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TableSet {
    pub quant: [Option<QuantTable>; 4],
    pub dc: [Option<HuffmanSpec>; 4],
    pub ac: [Option<HuffmanSpec>; 4],
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ScanComponent {
    /// Index into [`ParsedJpeg::components`].
    pub component: usize,
    pub dc_table: u8,
    pub ac_table: u8,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ScanHeader {
    pub components: Vec<ScanComponent>,
}

/// Structural state of a baseline JPEG, captured up to its first scan.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParsedJpeg {
    pub width: u16,
    pub height: u16,
    pub components: Vec<FrameComponent>,
    pub tables: TableSet,
    /// MCUs per restart interval, 0 when restarts are off.
    pub restart_interval: u16,
    pub first_scan: ScanHeader,
    /// Offset of the first entropy-coded byte of the first scan.
    pub entropy_offset: usize,
}

impl ParsedJpeg {
    pub fn max_sampling(&self) -> (u8, u8) {
        let h = self.components.iter().map(|c| c.h).max().unwrap_or(1);
        let v = self.components.iter().map(|c| c.v).max().unwrap_or(1);
        (h, v)
    }

    /// Sample dimensions (width, height) of component `index`.
    pub fn component_size(&self, index: usize) -> (usize, usize) {
        let (hmax, vmax) = self.max_sampling();
        let c = &self.components[index];
        let w = (self.width as usize * c.h as usize).div_ceil(hmax as usize);
        let h = (self.height as usize * c.v as usize).div_ceil(vmax as usize);
        (w, h)
    }

    /// Block grid dimensions (rows, cols) of component `index`.
    pub fn component_blocks(&self, index: usize) -> (usize, usize) {
        let (w, h) = self.component_size(index);
        (h.div_ceil(8), w.div_ceil(8))
    }

    pub fn is_420(&self) -> bool {
        self.components.len() == 3 && self.max_sampling() == (2, 2)
    }

    pub fn quant_table_for(&self, index: usize) -> Result<&QuantTable> {
        let id = self.components[index].quant_table;
        self.tables.quant[id as usize]
            .as_ref()
            .ok_or(DecodeError::MissingTable {
                kind: TableKind::Quantization,
                id,
            })
    }
}

/// Parses marker segments from SOI through the first SOS.
pub fn parse_headers(bytes: &[u8]) -> Result<ParsedJpeg> {
    if bytes.len() < 2 || bytes[0] != 0xFF || bytes[1] != parse::SOI {
        return Err(DecodeError::MalformedSegment {
            offset: 0,
            reason: "missing SOI marker".into(),
        });
    }
    let mut state = parse::HeaderState::default();
    let (scan, offset) =
        parse::parse_until_scan(bytes, 2, &mut state)?.ok_or_else(|| DecodeError::MalformedSegment {
            offset: bytes.len(),
            reason: "EOI before any scan".into(),
        })?;
    let frame = state.frame.expect("scan parsing requires a frame");
    for (i, c) in frame.components.iter().enumerate() {
        if state.tables.quant[c.quant_table as usize].is_none() && scan.components.iter().any(|s| s.component == i) {
            return Err(DecodeError::MissingTable {
                kind: TableKind::Quantization,
                id: c.quant_table,
            });
        }
    }
    Ok(ParsedJpeg {
        width: frame.width,
        height: frame.height,
        components: frame.components,
        tables: state.tables,
        restart_interval: state.restart_interval,
        first_scan: scan,
        entropy_offset: offset,
    })
}

/// Coefficient storage of a [`CoeffBlockGrid`].
#[derive(Clone, Debug, PartialEq)]
pub enum Coefficients {
    Quantized(Vec<i16>),
    Dequantized(Vec<f32>),
}

impl Coefficients {
    pub fn len(&self) -> usize {
        match self {
            Coefficients::Quantized(v) => v.len(),
            Coefficients::Dequantized(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get_f32(&self, i: usize) -> f32 {
        match self {
            Coefficients::Quantized(v) => v[i] as f32,
            Coefficients::Dequantized(v) => v[i],
        }
    }
}

/// Per-component grid of 8x8 frequency blocks. Block `(r, c)` occupies
/// `64` consecutive entries starting at `(r * block_cols + c) * 64`, in
/// zigzag order (entry 0 is DC).
#[derive(Clone, Debug, PartialEq)]
pub struct CoeffBlockGrid {
    pub component: Component,
    pub block_rows: usize,
    pub block_cols: usize,
    /// True sample extent of the component (width, height).
    pub sample_size: (usize, usize),
    pub coefficients: Coefficients,
}

impl CoeffBlockGrid {
    pub fn is_dequantized(&self) -> bool {
        matches!(self.coefficients, Coefficients::Dequantized(_))
    }

    pub fn block_count(&self) -> usize {
        self.block_rows * self.block_cols
    }

    pub fn quantized_block(&self, row: usize, col: usize) -> Option<&[i16]> {
        match &self.coefficients {
            Coefficients::Quantized(v) => {
                let start = (row * self.block_cols + col) * 64;
                Some(&v[start..start + 64])
            }
            Coefficients::Dequantized(_) => None,
        }
    }

    pub fn dequantized_block(&self, row: usize, col: usize) -> Option<&[f32]> {
        match &self.coefficients {
            Coefficients::Dequantized(v) => {
                let start = (row * self.block_cols + col) * 64;
                Some(&v[start..start + 64])
            }
            Coefficients::Quantized(_) => None,
        }
    }
}

/// Multiplies every coefficient by its zigzag-aligned quantization step.
pub fn dequantize(grid: &CoeffBlockGrid, table: &QuantTable) -> Result<CoeffBlockGrid> {
    let Coefficients::Quantized(q) = &grid.coefficients else {
        return Err(DecodeError::AlreadyDequantized);
    };
    let mut out = Vec::with_capacity(q.len());
    for block in q.chunks_exact(64) {
        out.extend(block.iter().zip(&table.values).map(|(&c, &s)| c as f32 * s as f32));
    }
    Ok(CoeffBlockGrid {
        coefficients: Coefficients::Dequantized(out),
        ..grid.clone()
    })
}

/// Dequantizes every grid with the table its component references.
pub fn dequantize_all(jpeg: &ParsedJpeg, grids: &[CoeffBlockGrid]) -> Result<Vec<CoeffBlockGrid>> {
    grids
        .iter()
        .map(|g| dequantize(g, jpeg.quant_table_for(g.component.index())?))
        .collect()
}

/// Parses and entropy-decodes a whole stream.
pub fn decode(bytes: &[u8]) -> Result<(ParsedJpeg, Vec<CoeffBlockGrid>)> {
    let jpeg = parse_headers(bytes)?;
    let grids = decode_coefficients(&jpeg, &bytes[jpeg.entropy_offset..])?;
    Ok((jpeg, grids))
}
