//! Single-pass JPEG to tensor conversion.

use crate::jpeg::{self, CoeffBlockGrid, Coefficients, Component, ParsedJpeg};

use super::{assemble, rearrange, select, upsample_chroma, ChannelMeta, DctTensor, FbsSpec, Result, TensorData};

#[derive(Clone, Debug, Default)]
pub struct TensorOptions {
    /// Keep quantized integers instead of multiplying by the step sizes.
    pub keep_quantized: bool,
    /// Drop chroma even when the image has it.
    pub luma_only: bool,
    pub fbs: Option<FbsSpec>,
}

fn wanted_components(jpeg: &ParsedJpeg, opts: &TensorOptions) -> usize {
    if opts.luma_only {
        1
    } else {
        jpeg.components.len()
    }
}

/// Decodes `bytes` straight into the network-facing tensor. Only the
/// selected frequencies are dequantized and copied. Equivalent to
/// [`tensor_from_grids`] on the decoded grids.
pub fn tensor_from_jpeg(bytes: &[u8], opts: &TensorOptions) -> Result<DctTensor> {
    let (jpeg, grids) = jpeg::decode(bytes)?;
    let ncomp = wanted_components(&jpeg, opts);
    let mask = opts.fbs.as_ref().map_or([true; 64], FbsSpec::mask);
    let freqs: Vec<usize> = (0..64).filter(|&k| mask[k]).collect();
    let (rows, cols) = (grids[0].block_rows, grids[0].block_cols);
    let plane = rows * cols;
    let nchan = ncomp * freqs.len();

    let mut meta = Vec::with_capacity(nchan);
    for ci in 0..ncomp {
        let comp = Component::from_index(ci);
        meta.extend(freqs.iter().map(|&k| ChannelMeta::coefficient(comp, k as u8)));
    }
    let crop = (jpeg.width as u32, jpeg.height as u32);

    let mut f32_out = Vec::new();
    let mut i16_out = Vec::new();
    if opts.keep_quantized {
        i16_out = vec![0i16; nchan * plane];
    } else {
        f32_out = vec![0.0f32; nchan * plane];
    }
    for (ci, grid) in grids.iter().take(ncomp).enumerate() {
        let Coefficients::Quantized(q) = &grid.coefficients else {
            unreachable!("entropy decoding yields quantized grids")
        };
        let steps = jpeg.quant_table_for(ci)?.values;
        let scale = (jpeg.max_sampling().0 / jpeg.components[ci].h) as usize;
        let base = ci * freqs.len();
        for br in 0..grid.block_rows {
            for bc in 0..grid.block_cols {
                let block = &q[(br * grid.block_cols + bc) * 64..][..64];
                for dy in 0..scale {
                    let r = br * scale + dy;
                    if r >= rows {
                        break;
                    }
                    for dx in 0..scale {
                        let c = bc * scale + dx;
                        if c >= cols {
                            break;
                        }
                        let pos = r * cols + c;
                        if opts.keep_quantized {
                            for (j, &k) in freqs.iter().enumerate() {
                                i16_out[(base + j) * plane + pos] = block[k];
                            }
                        } else {
                            for (j, &k) in freqs.iter().enumerate() {
                                f32_out[(base + j) * plane + pos] = block[k] as f32 * steps[k] as f32;
                            }
                        }
                    }
                }
            }
        }
    }
    let data = if opts.keep_quantized {
        TensorData::I16(i16_out)
    } else {
        TensorData::F32(f32_out)
    };
    DctTensor::new(rows, cols, data, meta, crop)
}

/// Composes the individual stages: dequantize, rearrange, upsample chroma,
/// assemble, select.
pub fn tensor_from_grids(jpeg: &ParsedJpeg, grids: &[CoeffBlockGrid], opts: &TensorOptions) -> Result<DctTensor> {
    let ncomp = wanted_components(jpeg, opts);
    let (rows, cols) = (grids[0].block_rows, grids[0].block_cols);
    let mut parts = Vec::with_capacity(ncomp);
    for (ci, grid) in grids.iter().take(ncomp).enumerate() {
        let grid = if opts.keep_quantized || grid.is_dequantized() {
            grid.clone()
        } else {
            jpeg::dequantize(grid, jpeg.quant_table_for(ci)?)?
        };
        let t = rearrange(&grid);
        parts.push(if (t.rows, t.cols) == (rows, cols) {
            t
        } else {
            upsample_chroma(&t, rows, cols)?
        });
    }
    let refs: Vec<&DctTensor> = parts.iter().collect();
    let mut t = assemble(&refs)?;
    t.crop = (jpeg.width as u32, jpeg.height as u32);
    match &opts.fbs {
        Some(spec) => select(&t, spec),
        None => Ok(t),
    }
}
