//! Minimal baseline JPEG encoder used to build test and benchmark corpora.
//!
//! Standard Annex K Huffman tables, IJG quality scaling, 4:4:4 or 4:2:0
//! sampling, optional restart intervals. No optimization passes.

use super::huffman::HuffmanSpec;
use super::idct::fdct_8x8;
use super::zigzag::{to_zigzag, ZIGZAG_TO_NATURAL};
use super::QuantTable;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sampling {
    S444,
    S420,
}

#[derive(Clone, Copy, Debug)]
pub struct EncodeOptions {
    pub quality: u8,
    pub sampling: Sampling,
    pub restart_interval: u16,
}

impl Default for EncodeOptions {
    fn default() -> Self {
        Self {
            quality: 75,
            sampling: Sampling::S420,
            restart_interval: 0,
        }
    }
}

const STD_LUMA_QT: [u16; 64] = [
    16, 11, 10, 16, 24, 40, 51, 61, 12, 12, 14, 19, 26, 58, 60, 55, 14, 13, 16, 24, 40, 57, 69, 56, 14, 17, 22, 29, 51,
    87, 80, 62, 18, 22, 37, 56, 68, 109, 103, 77, 24, 35, 55, 64, 81, 104, 113, 92, 49, 64, 78, 87, 103, 121, 120, 101,
    72, 92, 95, 98, 112, 100, 103, 99,
];

const STD_CHROMA_QT: [u16; 64] = [
    17, 18, 24, 47, 99, 99, 99, 99, 18, 21, 26, 66, 99, 99, 99, 99, 24, 26, 56, 99, 99, 99, 99, 99, 47, 66, 99, 99, 99,
    99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99,
    99, 99, 99, 99, 99, 99,
];

/// Luma and chroma tables (zigzag order) scaled for `quality` in 1..=100.
pub fn quant_tables(quality: u8) -> (QuantTable, QuantTable) {
    let q = quality.clamp(1, 100) as u32;
    let scale = if q < 50 { 5000 / q } else { 200 - 2 * q };
    let scaled = |base: &[u16; 64]| {
        let natural: [u16; 64] = std::array::from_fn(|i| ((base[i] as u32 * scale + 50) / 100).clamp(1, 255) as u16);
        QuantTable {
            values: to_zigzag(&natural),
        }
    };
    (scaled(&STD_LUMA_QT), scaled(&STD_CHROMA_QT))
}

/// Quantized coefficients ready for entropy coding.
#[derive(Clone, Debug)]
pub struct CoefficientImage {
    pub width: u16,
    pub height: u16,
    pub sampling: Sampling,
    /// One entry per component: (block rows, block cols, zigzag blocks).
    pub components: Vec<(usize, usize, Vec<i16>)>,
    /// Tables referenced by component 0 and by the chroma components.
    pub luma_table: QuantTable,
    pub chroma_table: QuantTable,
}

struct BitWriter {
    out: Vec<u8>,
    acc: u32,
    nbits: u32,
}

impl BitWriter {
    fn put(&mut self, code: u32, len: u32) {
        for i in (0..len).rev() {
            self.acc = (self.acc << 1) | ((code >> i) & 1);
            self.nbits += 1;
            if self.nbits == 8 {
                let b = self.acc as u8;
                self.out.push(b);
                if b == 0xFF {
                    self.out.push(0);
                }
                self.acc = 0;
                self.nbits = 0;
            }
        }
    }

    fn flush(&mut self) {
        if self.nbits > 0 {
            let pad = 8 - self.nbits;
            self.put((1 << pad) - 1, pad);
        }
    }
}

struct CodeTable([(u16, u8); 256]);

impl CodeTable {
    fn new(spec: &HuffmanSpec) -> Self {
        let mut t = [(0u16, 0u8); 256];
        for (&(code, len), &sym) in spec.codes().expect("standard table").iter().zip(&spec.symbols) {
            t[sym as usize] = (code, len);
        }
        CodeTable(t)
    }

    fn emit(&self, w: &mut BitWriter, sym: u8) {
        let (code, len) = self.0[sym as usize];
        debug_assert!(len > 0, "symbol {sym:#x} missing from table");
        w.put(code as u32, len as u32);
    }
}

fn category(v: i32) -> (u8, u32) {
    let mag = v.unsigned_abs();
    let size = 32 - mag.leading_zeros();
    let bits = if v < 0 {
        (v - 1) as u32 & ((1 << size) - 1)
    } else {
        v as u32
    };
    (size as u8, bits)
}

fn encode_block(w: &mut BitWriter, block: &[i16], pred: &mut i32, dc: &CodeTable, ac: &CodeTable) {
    let diff = block[0] as i32 - *pred;
    *pred = block[0] as i32;
    let (size, bits) = category(diff);
    dc.emit(w, size);
    w.put(bits, size as u32);
    let mut run = 0u8;
    for &c in &block[1..64] {
        if c == 0 {
            run += 1;
            continue;
        }
        while run >= 16 {
            ac.emit(w, 0xF0);
            run -= 16;
        }
        let (size, bits) = category(c as i32);
        ac.emit(w, (run << 4) | size);
        w.put(bits, size as u32);
        run = 0;
    }
    if run > 0 {
        ac.emit(w, 0x00);
    }
}

fn segment(out: &mut Vec<u8>, marker: u8, body: &[u8]) {
    out.extend_from_slice(&[0xFF, marker]);
    out.extend_from_slice(&((body.len() + 2) as u16).to_be_bytes());
    out.extend_from_slice(body);
}

fn dht_body(class_id: u8, spec: &HuffmanSpec) -> Vec<u8> {
    let mut b = vec![class_id];
    b.extend_from_slice(&spec.counts);
    b.extend_from_slice(&spec.symbols);
    b
}

/// Entropy-codes quantized blocks into a complete JFIF stream. Blocks
/// outside a component's grid (MCU padding) repeat the nearest edge block.
pub fn encode_coefficients(img: &CoefficientImage, restart_interval: u16) -> Vec<u8> {
    let ncomp = img.components.len();
    let factors: Vec<(usize, usize)> = match (ncomp, img.sampling) {
        (1, _) => vec![(1, 1)],
        (_, Sampling::S444) => vec![(1, 1); ncomp],
        (_, Sampling::S420) => vec![(2, 2), (1, 1), (1, 1)],
    };
    let mut out = vec![0xFF, 0xD8];
    segment(&mut out, 0xE0, &[b'J', b'F', b'I', b'F', 0, 1, 1, 0, 0, 1, 0, 1, 0, 0]);
    let mut dqt = vec![0u8];
    dqt.extend(img.luma_table.values.iter().map(|&v| v as u8));
    if ncomp > 1 {
        dqt.push(1);
        dqt.extend(img.chroma_table.values.iter().map(|&v| v as u8));
    }
    segment(&mut out, 0xDB, &dqt);

    let mut sof = vec![8];
    sof.extend_from_slice(&img.height.to_be_bytes());
    sof.extend_from_slice(&img.width.to_be_bytes());
    sof.push(ncomp as u8);
    for (i, &(h, v)) in factors.iter().enumerate() {
        sof.extend_from_slice(&[i as u8 + 1, ((h as u8) << 4) | v as u8, (i > 0) as u8]);
    }
    segment(&mut out, 0xC0, &sof);

    let tables = [
        HuffmanSpec::std_dc_luma(),
        HuffmanSpec::std_ac_luma(),
        HuffmanSpec::std_dc_chroma(),
        HuffmanSpec::std_ac_chroma(),
    ];
    let mut dht = dht_body(0x00, &tables[0]);
    dht.extend(dht_body(0x10, &tables[1]));
    if ncomp > 1 {
        dht.extend(dht_body(0x01, &tables[2]));
        dht.extend(dht_body(0x11, &tables[3]));
    }
    segment(&mut out, 0xC4, &dht);
    if restart_interval > 0 {
        segment(&mut out, 0xDD, &restart_interval.to_be_bytes());
    }
    let mut sos = vec![ncomp as u8];
    for i in 0..ncomp {
        sos.extend_from_slice(&[i as u8 + 1, if i == 0 { 0x00 } else { 0x11 }]);
    }
    sos.extend_from_slice(&[0, 63, 0]);
    segment(&mut out, 0xDA, &sos);

    let codes: Vec<CodeTable> = tables.iter().map(CodeTable::new).collect();
    let (hmax, vmax) = (factors[0].0, factors[0].1);
    let (mcus_x, mcus_y) = if ncomp == 1 {
        (img.components[0].1, img.components[0].0)
    } else {
        (
            (img.width as usize).div_ceil(8 * hmax),
            (img.height as usize).div_ceil(8 * vmax),
        )
    };
    let mut w = BitWriter { out, acc: 0, nbits: 0 };
    let mut preds = vec![0i32; ncomp];
    let mut rst = 0u8;
    let total = mcus_x * mcus_y;
    for mcu in 0..total {
        if restart_interval > 0 && mcu > 0 && mcu % restart_interval as usize == 0 {
            w.flush();
            w.out.extend_from_slice(&[0xFF, 0xD0 + rst]);
            rst = (rst + 1) & 7;
            preds.iter_mut().for_each(|p| *p = 0);
        }
        let (mx, my) = (mcu % mcus_x, mcu / mcus_x);
        for (ci, &(h, v)) in factors.iter().enumerate() {
            let (rows, cols, blocks) = &img.components[ci];
            let (dc, ac) = if ci == 0 {
                (&codes[0], &codes[1])
            } else {
                (&codes[2], &codes[3])
            };
            for by in 0..v {
                for bx in 0..h {
                    let r = (my * v + by).min(rows - 1);
                    let c = (mx * h + bx).min(cols - 1);
                    let start = (r * cols + c) * 64;
                    encode_block(&mut w, &blocks[start..start + 64], &mut preds[ci], dc, ac);
                }
            }
        }
    }
    w.flush();
    let mut out = w.out;
    out.extend_from_slice(&[0xFF, 0xD9]);
    out
}

// Samples of one component, edge-replicated out to `cols*8 x rows*8`, then
// transformed and quantized block by block.
fn quantize_plane(
    plane: &[f64],
    width: usize,
    height: usize,
    rows: usize,
    cols: usize,
    table: &QuantTable,
) -> Vec<i16> {
    let mut out = Vec::with_capacity(rows * cols * 64);
    let mut block = [0.0f64; 64];
    for br in 0..rows {
        for bc in 0..cols {
            for y in 0..8 {
                let sy = (br * 8 + y).min(height - 1);
                for x in 0..8 {
                    let sx = (bc * 8 + x).min(width - 1);
                    block[y * 8 + x] = plane[sy * width + sx] - 128.0;
                }
            }
            let f = fdct_8x8(&block);
            for (k, &n) in ZIGZAG_TO_NATURAL.iter().enumerate() {
                let q = (f[n] / table.values[k] as f64).round();
                out.push(q.clamp(-2047.0, 2047.0) as i16);
            }
        }
    }
    out
}

fn encode_planes(width: usize, height: usize, planes: Vec<(Vec<f64>, usize, usize)>, opts: &EncodeOptions) -> Vec<u8> {
    let (luma, chroma) = quant_tables(opts.quality);
    let ncomp = planes.len();
    let sampling = if ncomp == 1 { Sampling::S444 } else { opts.sampling };
    let (hmax, vmax) = if sampling == Sampling::S420 { (2, 2) } else { (1, 1) };
    let mcus_x = width.div_ceil(8 * hmax);
    let mcus_y = height.div_ceil(8 * vmax);
    let components = planes
        .iter()
        .enumerate()
        .map(|(i, (p, w, h))| {
            let (fh, fv) = if i == 0 { (hmax, vmax) } else { (1, 1) };
            let (rows, cols) = if ncomp == 1 {
                (h.div_ceil(8), w.div_ceil(8))
            } else {
                (mcus_y * fv, mcus_x * fh)
            };
            let table = if i == 0 { &luma } else { &chroma };
            (rows, cols, quantize_plane(p, *w, *h, rows, cols, table))
        })
        .collect();
    encode_coefficients(
        &CoefficientImage {
            width: width as u16,
            height: height as u16,
            sampling,
            components,
            luma_table: luma,
            chroma_table: chroma,
        },
        opts.restart_interval,
    )
}

/// Encodes interleaved 8-bit RGB.
pub fn encode_rgb(width: usize, height: usize, rgb: &[u8], opts: &EncodeOptions) -> Vec<u8> {
    assert_eq!(rgb.len(), width * height * 3, "rgb buffer size");
    assert!(width > 0 && height > 0 && width <= 65535 && height <= 65535);
    let n = width * height;
    let (mut y, mut cb, mut cr) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    for (i, px) in rgb.chunks_exact(3).enumerate() {
        let (r, g, b) = (px[0] as f64, px[1] as f64, px[2] as f64);
        y[i] = 0.299 * r + 0.587 * g + 0.114 * b;
        cb[i] = -0.168736 * r - 0.331264 * g + 0.5 * b + 128.0;
        cr[i] = 0.5 * r - 0.418688 * g - 0.081312 * b + 128.0;
    }
    let chroma = |plane: Vec<f64>| -> (Vec<f64>, usize, usize) {
        if opts.sampling == Sampling::S444 {
            return (plane, width, height);
        }
        let (cw, ch) = (width.div_ceil(2), height.div_ceil(2));
        let mut out = vec![0.0; cw * ch];
        for cy in 0..ch {
            for cx in 0..cw {
                let mut s = 0.0;
                for (dy, dx) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                    let sy = (2 * cy + dy).min(height - 1);
                    let sx = (2 * cx + dx).min(width - 1);
                    s += plane[sy * width + sx];
                }
                out[cy * cw + cx] = s / 4.0;
            }
        }
        (out, cw, ch)
    };
    let planes = vec![(y, width, height), chroma(cb), chroma(cr)];
    encode_planes(width, height, planes, opts)
}

/// Encodes a single-component 8-bit image.
pub fn encode_gray(width: usize, height: usize, gray: &[u8], opts: &EncodeOptions) -> Vec<u8> {
    assert_eq!(gray.len(), width * height, "gray buffer size");
    let plane = gray.iter().map(|&v| v as f64).collect();
    encode_planes(width, height, vec![(plane, width, height)], opts)
}
