//! Entropy decoding of baseline scans into quantized coefficient grids.

use super::bits::BitReader;
use super::error::{DecodeError, Result};
use super::huffman::HuffmanDecoder;
use super::parse::{self, HeaderState};
use super::{CoeffBlockGrid, Coefficients, Component, ParsedJpeg, ScanHeader};

const COEF_MIN: i32 = -2048;
const COEF_MAX: i32 = 2047;

struct GridBuf {
    rows: usize,
    cols: usize,
    data: Vec<i16>,
    coded: bool,
}

/// Decodes every scan of the stream into one quantized grid per component.
///
/// `entropy` starts at the first entropy-coded byte of the first scan (see
/// [`ParsedJpeg::entropy_offset`]) and may run to the end of the file; later
/// scans and table redefinitions between them are handled here.
pub fn decode_coefficients(jpeg: &ParsedJpeg, entropy: &[u8]) -> Result<Vec<CoeffBlockGrid>> {
    let mut grids: Vec<GridBuf> = (0..jpeg.components.len())
        .map(|i| {
            let (rows, cols) = jpeg.component_blocks(i);
            GridBuf {
                rows,
                cols,
                data: vec![0; rows * cols * 64],
                coded: false,
            }
        })
        .collect();

    let mut state = HeaderState {
        frame: None,
        tables: jpeg.tables.clone(),
        restart_interval: jpeg.restart_interval,
    };
    let mut scan = jpeg.first_scan.clone();
    let mut pos = 0usize;
    loop {
        let end = decode_scan(jpeg, &state, &scan, &entropy[pos..], &mut grids)?;
        pos += end;
        if grids.iter().all(|g| g.coded) {
            break;
        }
        // more scans follow; the frame header is already known
        state.frame = Some(parse::Frame {
            width: jpeg.width,
            height: jpeg.height,
            components: jpeg.components.clone(),
        });
        match parse::parse_until_scan(entropy, pos, &mut state)? {
            Some((next, offset)) => {
                scan = next;
                pos = offset;
            }
            None => return Err(DecodeError::TruncatedStream),
        }
    }

    Ok(grids
        .into_iter()
        .enumerate()
        .map(|(i, g)| CoeffBlockGrid {
            component: Component::from_index(i),
            block_rows: g.rows,
            block_cols: g.cols,
            sample_size: jpeg.component_size(i),
            coefficients: Coefficients::Quantized(g.data),
        })
        .collect())
}

/// Decodes one scan; returns the offset just past its entropy data.
fn decode_scan(
    jpeg: &ParsedJpeg,
    state: &HeaderState,
    scan: &ScanHeader,
    data: &[u8],
    grids: &mut [GridBuf],
) -> Result<usize> {
    for sc in &scan.components {
        if grids[sc.component].coded {
            return Err(DecodeError::CorruptEntropyStream(
                "component coded in more than one scan".into(),
            ));
        }
    }
    let decoders = scan
        .components
        .iter()
        .map(|sc| {
            let dc = state.tables.dc[sc.dc_table as usize].as_ref();
            let ac = state.tables.ac[sc.ac_table as usize].as_ref();
            match (dc, ac) {
                (Some(dc), Some(ac)) => Ok((
                    HuffmanDecoder::new(dc).map_err(DecodeError::CorruptEntropyStream)?,
                    HuffmanDecoder::new(ac).map_err(DecodeError::CorruptEntropyStream)?,
                )),
                _ => Err(DecodeError::MissingTable {
                    kind: if dc.is_none() {
                        super::TableKind::HuffmanDc
                    } else {
                        super::TableKind::HuffmanAc
                    },
                    id: if dc.is_none() { sc.dc_table } else { sc.ac_table },
                }),
            }
        })
        .collect::<Result<Vec<_>>>()?;

    // (component, h, v) per scan member; a single-component scan is not interleaved
    let interleaved = scan.components.len() > 1;
    let (hmax, vmax) = jpeg.max_sampling();
    let (mcus_x, mcus_y) = if interleaved {
        (
            (jpeg.width as usize).div_ceil(8 * hmax as usize),
            (jpeg.height as usize).div_ceil(8 * vmax as usize),
        )
    } else {
        let g = &grids[scan.components[0].component];
        (g.cols, g.rows)
    };
    let layout: Vec<(usize, usize, usize)> = scan
        .components
        .iter()
        .map(|sc| {
            let c = &jpeg.components[sc.component];
            if interleaved {
                (sc.component, c.h as usize, c.v as usize)
            } else {
                (sc.component, 1, 1)
            }
        })
        .collect();

    let mut reader = BitReader::new(data);
    let mut preds = vec![0i32; layout.len()];
    let mut block = [0i16; 64];
    let restart = state.restart_interval as usize;
    let total = mcus_x * mcus_y;
    let mut next_rst = 0u8;

    for mcu in 0..total {
        if restart > 0 && mcu > 0 && mcu % restart == 0 {
            match reader.take_marker()? {
                Some(m @ 0xD0..=0xD7) if m - 0xD0 == next_rst => {}
                Some(m @ 0xD0..=0xD7) => {
                    return Err(DecodeError::RestartMarkerMismatch {
                        expected: next_rst,
                        found: Some(m - 0xD0),
                    })
                }
                _ => {
                    return Err(DecodeError::RestartMarkerMismatch {
                        expected: next_rst,
                        found: None,
                    })
                }
            }
            next_rst = (next_rst + 1) & 7;
            reader.reset_after_restart();
            preds.iter_mut().for_each(|p| *p = 0);
        }
        let (mx, my) = (mcu % mcus_x, mcu / mcus_x);
        for (member, &(comp, h, v)) in layout.iter().enumerate() {
            let (dc, ac) = &decoders[member];
            for by in 0..v {
                for bx in 0..h {
                    decode_block(&mut reader, dc, ac, &mut preds[member], &mut block)?;
                    let (row, col) = (my * v + by, mx * h + bx);
                    let g = &mut grids[comp];
                    // blocks beyond the component extent are MCU padding
                    if row < g.rows && col < g.cols {
                        let start = (row * g.cols + col) * 64;
                        g.data[start..start + 64].copy_from_slice(&block);
                    }
                }
            }
        }
        reader.check_overrun()?;
    }

    for &(comp, _, _) in &layout {
        grids[comp].coded = true;
    }
    // position the caller at the marker ending this scan
    let _ = reader.take_marker();
    let end = reader.position();
    Ok(marker_start(data, end))
}

// `take_marker` leaves the position after the marker code; back up so the
// header parser sees the marker itself.
fn marker_start(data: &[u8], after: usize) -> usize {
    if after >= 2 && after <= data.len() && data[after - 2] == 0xFF {
        after - 2
    } else {
        after.min(data.len())
    }
}

fn decode_block(
    reader: &mut BitReader<'_>,
    dc: &HuffmanDecoder,
    ac: &HuffmanDecoder,
    pred: &mut i32,
    block: &mut [i16; 64],
) -> Result<()> {
    block.fill(0);
    let t = dc.decode(reader)?;
    if t > 11 {
        return Err(DecodeError::CorruptEntropyStream(format!("DC magnitude category {t}")));
    }
    let value = *pred + reader.receive_extend(t)?;
    if !(COEF_MIN..=COEF_MAX).contains(&value) {
        return Err(DecodeError::CorruptEntropyStream(format!(
            "DC value {value} out of range"
        )));
    }
    *pred = value;
    block[0] = value as i16;

    let mut k = 1usize;
    while k < 64 {
        let rs = ac.decode(reader)?;
        let (run, size) = ((rs >> 4) as usize, rs & 0x0F);
        if size == 0 {
            if run == 15 {
                k += 16;
                if k > 64 {
                    return Err(DecodeError::CorruptEntropyStream("coefficient index overflow".into()));
                }
                continue;
            }
            break;
        }
        k += run;
        if k > 63 {
            return Err(DecodeError::CorruptEntropyStream("coefficient index overflow".into()));
        }
        let v = reader.receive_extend(size)?;
        if !(COEF_MIN..=COEF_MAX).contains(&v) {
            return Err(DecodeError::CorruptEntropyStream(format!("AC value {v} out of range")));
        }
        block[k] = v as i16;
        k += 1;
    }
    Ok(())
}
