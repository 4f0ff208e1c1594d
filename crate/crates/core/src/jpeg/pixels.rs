//! Full decode: inverse DCT, level shift, chroma upsampling and YCbCr to RGB.

use super::error::{DecodeError, Result};
use super::idct::{idct_8x8, idct_8x8_int};
use super::zigzag::ZIGZAG_TO_NATURAL;
use super::{CoeffBlockGrid, Coefficients, ParsedJpeg};

/// Interleaved 8-bit RGB image.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RgbImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

impl RgbImage {
    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }
}

struct Plane {
    width: usize,
    height: usize,
    stride: usize,
    data: Vec<u8>,
}

impl Plane {
    fn at(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.stride + x]
    }
}

/// Inverse transform used by the full-decode path.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum IdctMethod {
    /// 13-bit fixed point, the usual integer decoder arithmetic.
    #[default]
    Integer,
    /// Double precision, rounded once at the end.
    Float,
}

fn component_plane(grid: &CoeffBlockGrid, method: IdctMethod) -> Result<Plane> {
    let Coefficients::Dequantized(coefs) = &grid.coefficients else {
        return Err(DecodeError::NotDequantized);
    };
    let stride = grid.block_cols * 8;
    let mut data = vec![0u8; stride * grid.block_rows * 8];
    let mut natural = [0.0f64; 64];
    let mut natural_int = [0i32; 64];
    for br in 0..grid.block_rows {
        for bc in 0..grid.block_cols {
            let start = (br * grid.block_cols + bc) * 64;
            let samples: [u8; 64] = match method {
                IdctMethod::Integer => {
                    for (k, &n) in ZIGZAG_TO_NATURAL.iter().enumerate() {
                        natural_int[n] = coefs[start + k] as i32;
                    }
                    idct_8x8_int(&natural_int)
                }
                IdctMethod::Float => {
                    for (k, &n) in ZIGZAG_TO_NATURAL.iter().enumerate() {
                        natural[n] = coefs[start + k] as f64;
                    }
                    idct_8x8(&natural).map(|s| (s + 128.0).round().clamp(0.0, 255.0) as u8)
                }
            };
            for y in 0..8 {
                let row = (br * 8 + y) * stride + bc * 8;
                data[row..row + 8].copy_from_slice(&samples[y * 8..y * 8 + 8]);
            }
        }
    }
    Ok(Plane {
        width: grid.sample_size.0,
        height: grid.sample_size.1,
        stride,
        data,
    })
}

// Triangle-filter 2x upsampling in both axes (3/4 nearer sample, 1/4 farther),
// edges replicated. Output is 2*width x 2*height.
fn upsample_h2v2(p: &Plane) -> Plane {
    let (w, h) = (p.width, p.height);
    let out_w = w * 2;
    let mut data = vec![0u8; out_w * h * 2];
    let mut colsum = vec![0u32; w];
    for out_y in 0..h * 2 {
        let near = out_y / 2;
        let far = if out_y % 2 == 0 {
            near.saturating_sub(1)
        } else {
            (near + 1).min(h - 1)
        };
        for (x, sum) in colsum.iter_mut().enumerate() {
            *sum = 3 * p.at(x, near) as u32 + p.at(x, far) as u32;
        }
        let row = &mut data[out_y * out_w..(out_y + 1) * out_w];
        if w == 1 {
            let v = ((colsum[0] + 2) >> 2) as u8;
            row[0] = v;
            row[1] = v;
            continue;
        }
        row[0] = ((colsum[0] + 2) >> 2) as u8;
        for x in 1..w {
            let (t0, t1) = (colsum[x - 1], colsum[x]);
            row[2 * x - 1] = ((3 * t0 + t1 + 8) >> 4) as u8;
            row[2 * x] = ((3 * t1 + t0 + 8) >> 4) as u8;
        }
        row[out_w - 1] = ((colsum[w - 1] + 2) >> 2) as u8;
    }
    Plane {
        width: out_w,
        height: h * 2,
        stride: out_w,
        data,
    }
}

fn ycbcr_to_rgb(y: u8, cb: u8, cr: u8) -> [u8; 3] {
    let (y, cb, cr) = (y as f64, cb as f64 - 128.0, cr as f64 - 128.0);
    let clamp = |v: f64| v.round().clamp(0.0, 255.0) as u8;
    [
        clamp(y + 1.402 * cr),
        clamp(y - 0.344136 * cb - 0.714136 * cr),
        clamp(y + 1.772 * cb),
    ]
}

fn check_grids(jpeg: &ParsedJpeg, grids: &[CoeffBlockGrid]) -> Result<()> {
    if grids.len() != jpeg.components.len() {
        return Err(DecodeError::GridMismatch(format!(
            "{} grids for {} components",
            grids.len(),
            jpeg.components.len()
        )));
    }
    for (i, g) in grids.iter().enumerate() {
        if (g.block_rows, g.block_cols) != jpeg.component_blocks(i) {
            return Err(DecodeError::GridMismatch(format!(
                "component {i} grid is {}x{} blocks",
                g.block_rows, g.block_cols
            )));
        }
    }
    Ok(())
}

/// Component sample planes (Y, then Cb and Cr when present) at full image
/// resolution, each `width * height` bytes in row-major order. 4:2:0 chroma
/// is upsampled with the triangle filter. No color conversion.
pub fn reconstruct_planes(jpeg: &ParsedJpeg, grids: &[CoeffBlockGrid]) -> Result<Vec<Vec<u8>>> {
    reconstruct_planes_with(jpeg, grids, IdctMethod::Integer)
}

pub fn reconstruct_planes_with(
    jpeg: &ParsedJpeg,
    grids: &[CoeffBlockGrid],
    method: IdctMethod,
) -> Result<Vec<Vec<u8>>> {
    check_grids(jpeg, grids)?;
    let (width, height) = (jpeg.width as usize, jpeg.height as usize);
    let mut planes = grids
        .iter()
        .map(|g| component_plane(g, method))
        .collect::<Result<Vec<_>>>()?;
    if jpeg.is_420() {
        planes[1] = upsample_h2v2(&planes[1]);
        planes[2] = upsample_h2v2(&planes[2]);
    }
    Ok(planes
        .iter()
        .map(|p| {
            let mut out = Vec::with_capacity(width * height);
            for row in 0..height {
                out.extend_from_slice(&p.data[row * p.stride..row * p.stride + width]);
            }
            out
        })
        .collect())
}

/// Reconstructs pixels from dequantized grids with the integer transform.
pub fn reconstruct_rgb(jpeg: &ParsedJpeg, grids: &[CoeffBlockGrid]) -> Result<RgbImage> {
    reconstruct_rgb_with(jpeg, grids, IdctMethod::Integer)
}

pub fn reconstruct_rgb_with(jpeg: &ParsedJpeg, grids: &[CoeffBlockGrid], method: IdctMethod) -> Result<RgbImage> {
    let planes = reconstruct_planes_with(jpeg, grids, method)?;
    let (width, height) = (jpeg.width as usize, jpeg.height as usize);
    let mut data = Vec::with_capacity(width * height * 3);
    if planes.len() == 1 {
        data.extend(planes[0].iter().flat_map(|&v| [v, v, v]));
    } else {
        for ((&y, &cb), &cr) in planes[0].iter().zip(&planes[1]).zip(&planes[2]) {
            data.extend_from_slice(&ycbcr_to_rgb(y, cb, cr));
        }
    }
    Ok(RgbImage { width, height, data })
}
