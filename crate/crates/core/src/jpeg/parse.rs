//! Marker segment parsing up to the start of an entropy-coded segment.

use super::error::{DecodeError, Result, TableKind, Unsupported};
use super::huffman::HuffmanSpec;
use super::zigzag::ZIGZAG_TO_NATURAL;
use super::{FrameComponent, QuantTable, ScanComponent, ScanHeader, TableSet};

pub(crate) const SOI: u8 = 0xD8;
pub(crate) const EOI: u8 = 0xD9;
pub(crate) const SOS: u8 = 0xDA;
pub(crate) const DQT: u8 = 0xDB;
pub(crate) const DNL: u8 = 0xDC;
pub(crate) const DRI: u8 = 0xDD;
pub(crate) const DHT: u8 = 0xC4;

/// Frame-level state gathered while walking marker segments.
#[derive(Default)]
pub(crate) struct HeaderState {
    pub frame: Option<Frame>,
    pub tables: TableSet,
    pub restart_interval: u16,
}

pub(crate) struct Frame {
    pub width: u16,
    pub height: u16,
    pub components: Vec<FrameComponent>,
}

fn malformed(offset: usize, reason: impl Into<String>) -> DecodeError {
    DecodeError::MalformedSegment {
        offset,
        reason: reason.into(),
    }
}

/// Reads the next marker code starting at `pos`, skipping fill bytes.
/// Returns (marker, offset of its 0xFF, offset after the marker code).
pub(crate) fn next_marker(data: &[u8], mut pos: usize) -> Result<(u8, usize, usize)> {
    match data.get(pos) {
        Some(0xFF) => {}
        Some(_) => return Err(malformed(pos, "expected a marker")),
        None => return Err(DecodeError::TruncatedStream),
    }
    while data.get(pos + 1) == Some(&0xFF) {
        pos += 1;
    }
    match data.get(pos + 1) {
        Some(&m) => Ok((m, pos, pos + 2)),
        None => Err(DecodeError::TruncatedStream),
    }
}

fn segment(data: &[u8], marker_at: usize, body_at: usize) -> Result<&[u8]> {
    let len_bytes = data.get(body_at..body_at + 2).ok_or(DecodeError::TruncatedStream)?;
    let len = u16::from_be_bytes([len_bytes[0], len_bytes[1]]) as usize;
    if len < 2 {
        return Err(malformed(marker_at, "segment length below 2"));
    }
    data.get(body_at + 2..body_at + len).ok_or(DecodeError::TruncatedStream)
}

fn reject_sof(marker: u8) -> Option<Unsupported> {
    Some(match marker {
        0xC1 => Unsupported::ExtendedSequential,
        0xC2 => Unsupported::Progressive,
        0xC3 => Unsupported::Lossless,
        0xC5..=0xC7 => Unsupported::Hierarchical,
        0xC9..=0xCB | 0xCD..=0xCF => Unsupported::ArithmeticCoding,
        0xCC => Unsupported::ArithmeticCoding,
        0xDE | 0xDF => Unsupported::Hierarchical,
        DNL => Unsupported::DefineNumberOfLines,
        _ => return None,
    })
}

/// Parses marker segments from `pos` until an SOS. Returns the scan header
/// and the offset of the first entropy-coded byte, or `None` at EOI.
pub(crate) fn parse_until_scan(
    data: &[u8],
    mut pos: usize,
    state: &mut HeaderState,
) -> Result<Option<(ScanHeader, usize)>> {
    loop {
        let (marker, at, body) = next_marker(data, pos)?;
        if let Some(u) = reject_sof(marker) {
            return Err(u.into());
        }
        match marker {
            EOI => return Ok(None),
            SOI => return Err(malformed(at, "unexpected SOI")),
            0xD0..=0xD7 => return Err(malformed(at, "restart marker outside a scan")),
            0x01 => pos = body,
            _ => {
                let seg = segment(data, at, body)?;
                pos = body + 2 + seg.len();
                match marker {
                    0xC0 => {
                        if state.frame.is_some() {
                            return Err(malformed(at, "second frame header"));
                        }
                        state.frame = Some(parse_sof(seg, at)?);
                    }
                    DHT => parse_dht(seg, at, &mut state.tables)?,
                    DQT => parse_dqt(seg, at, &mut state.tables)?,
                    DRI => {
                        if seg.len() != 2 {
                            return Err(malformed(at, "DRI length must be 4"));
                        }
                        state.restart_interval = u16::from_be_bytes([seg[0], seg[1]]);
                    }
                    SOS => {
                        let frame = state.frame.as_ref().ok_or_else(|| malformed(at, "SOS before SOF"))?;
                        let scan = parse_sos(seg, at, frame, &state.tables)?;
                        return Ok(Some((scan, pos)));
                    }
                    // APPn, COM, and other skippable segments (EXIF lives in APP1)
                    0xE0..=0xEF | 0xFE => {}
                    0xC8 | 0xF0..=0xFD => {}
                    m => return Err(Unsupported::Marker(m).into()),
                }
            }
        }
    }
}

fn parse_sof(seg: &[u8], at: usize) -> Result<Frame> {
    if seg.len() < 6 {
        return Err(malformed(at, "SOF too short"));
    }
    let precision = seg[0];
    let height = u16::from_be_bytes([seg[1], seg[2]]);
    let width = u16::from_be_bytes([seg[3], seg[4]]);
    let count = seg[5];
    if seg.len() != 6 + 3 * count as usize {
        return Err(malformed(at, "SOF length does not match component count"));
    }
    if precision != 8 {
        return Err(Unsupported::Precision(precision).into());
    }
    if count == 0 || count == 2 || count > 3 {
        return Err(Unsupported::ComponentCount(count).into());
    }
    if height == 0 {
        return Err(Unsupported::DefineNumberOfLines.into());
    }
    if width == 0 {
        return Err(malformed(at, "zero width"));
    }
    let mut components = Vec::with_capacity(count as usize);
    for c in seg[6..].chunks_exact(3) {
        let (h, v) = (c[1] >> 4, c[1] & 0x0F);
        if !(1..=4).contains(&h) || !(1..=4).contains(&v) {
            return Err(malformed(at, "sampling factor outside 1..4"));
        }
        if c[2] > 3 {
            return Err(malformed(at, "quantization table id above 3"));
        }
        if components.iter().any(|x: &FrameComponent| x.id == c[0]) {
            return Err(malformed(at, "duplicate component id"));
        }
        components.push(FrameComponent {
            id: c[0],
            h,
            v,
            quant_table: c[2],
        });
    }
    let factors: Vec<(u8, u8)> = components.iter().map(|c| (c.h, c.v)).collect();
    let ok = match factors.as_slice() {
        [(h, v)] => *h <= 2 && *v <= 2,
        [(1, 1), (1, 1), (1, 1)] | [(2, 2), (1, 1), (1, 1)] => true,
        _ => false,
    };
    if !ok {
        return Err(Unsupported::Sampling(factors).into());
    }
    if count == 1 {
        // a lone component is coded non-interleaved; its factors carry no meaning
        components[0].h = 1;
        components[0].v = 1;
    }
    Ok(Frame {
        width,
        height,
        components,
    })
}

fn parse_dht(mut seg: &[u8], at: usize, tables: &mut TableSet) -> Result<()> {
    while !seg.is_empty() {
        if seg.len() < 17 {
            return Err(malformed(at, "DHT too short"));
        }
        let class = seg[0] >> 4;
        let id = seg[0] & 0x0F;
        if class > 1 || id > 3 {
            return Err(malformed(at, "bad DHT class or id"));
        }
        let mut counts = [0u8; 16];
        counts.copy_from_slice(&seg[1..17]);
        let total: usize = counts.iter().map(|&c| c as usize).sum();
        if total > 256 || seg.len() < 17 + total {
            return Err(malformed(at, "DHT symbol count overflow"));
        }
        let spec = HuffmanSpec {
            counts,
            symbols: seg[17..17 + total].to_vec(),
        };
        spec.codes().map_err(|e| malformed(at, e))?;
        if class == 0 {
            tables.dc[id as usize] = Some(spec);
        } else {
            tables.ac[id as usize] = Some(spec);
        }
        seg = &seg[17 + total..];
    }
    Ok(())
}

fn parse_dqt(mut seg: &[u8], at: usize, tables: &mut TableSet) -> Result<()> {
    while !seg.is_empty() {
        let precision = seg[0] >> 4;
        let id = seg[0] & 0x0F;
        if precision > 1 || id > 3 {
            return Err(malformed(at, "bad DQT precision or id"));
        }
        let size = if precision == 0 { 64 } else { 128 };
        let body = seg.get(1..1 + size).ok_or_else(|| malformed(at, "DQT too short"))?;
        let mut values = [0u16; 64];
        for (k, v) in values.iter_mut().enumerate() {
            *v = if precision == 0 {
                body[k] as u16
            } else {
                u16::from_be_bytes([body[2 * k], body[2 * k + 1]])
            };
        }
        if values.contains(&0) {
            return Err(malformed(at, "zero quantization step"));
        }
        tables.quant[id as usize] = Some(QuantTable { values });
        seg = &seg[1 + size..];
    }
    Ok(())
}

fn parse_sos(seg: &[u8], at: usize, frame: &Frame, tables: &TableSet) -> Result<ScanHeader> {
    let count = *seg.first().ok_or_else(|| malformed(at, "empty SOS"))? as usize;
    if count == 0 || count > frame.components.len() || seg.len() != 1 + 2 * count + 3 {
        return Err(malformed(at, "SOS length does not match component count"));
    }
    let mut components = Vec::with_capacity(count);
    for c in seg[1..1 + 2 * count].chunks_exact(2) {
        let index = frame
            .components
            .iter()
            .position(|fc| fc.id == c[0])
            .ok_or_else(|| malformed(at, format!("scan references unknown component {}", c[0])))?;
        if components.iter().any(|s: &ScanComponent| s.component == index) {
            return Err(malformed(at, "component repeated in scan"));
        }
        let (dc, ac) = (c[1] >> 4, c[1] & 0x0F);
        if dc > 3 || tables.dc[dc as usize].is_none() {
            return Err(DecodeError::MissingTable {
                kind: TableKind::HuffmanDc,
                id: dc,
            });
        }
        if ac > 3 || tables.ac[ac as usize].is_none() {
            return Err(DecodeError::MissingTable {
                kind: TableKind::HuffmanAc,
                id: ac,
            });
        }
        let qt = frame.components[index].quant_table;
        if tables.quant[qt as usize].is_none() {
            return Err(DecodeError::MissingTable {
                kind: TableKind::Quantization,
                id: qt,
            });
        }
        components.push(ScanComponent {
            component: index,
            dc_table: dc,
            ac_table: ac,
        });
    }
    let tail = &seg[1 + 2 * count..];
    if tail != [0, 63, 0] {
        return Err(malformed(at, "spectral selection must be 0..63 for baseline"));
    }
    Ok(ScanHeader { components })
}

// Quantization tables are stored in zigzag order, which is also the
// coefficient order of the grids; ZIGZAG_TO_NATURAL is only needed when
// presenting a table as an 8x8 matrix.
impl QuantTable {
    pub fn natural(&self) -> [u16; 64] {
        let mut out = [0u16; 64];
        for (k, &n) in ZIGZAG_TO_NATURAL.iter().enumerate() {
            out[n] = self.values[k];
        }
        out
    }
}
