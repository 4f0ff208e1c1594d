//! Channel-major coefficient tensors: frequency rearrangement, chroma
//! upsampling, concatenation and band selection.

mod fbs;
mod format;
mod fused;
mod stats;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::jpeg::{CoeffBlockGrid, Coefficients, Component, DecodeError};

pub use fbs::{select, FbsSpec, FbsStrategy};
pub use format::{read_tensor, read_tensor_file, write_tensor, write_tensor_file, HEADER_FIXED_LEN};
pub use fused::{tensor_from_grids, tensor_from_jpeg, TensorOptions};
pub use stats::ChannelStats;

/// What a tensor channel carries.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ChannelSource {
    Coefficient(Component),
    /// Output of a learned channel map; not tied to a frequency.
    Feature,
}

impl ChannelSource {
    pub fn code(self) -> u8 {
        match self {
            ChannelSource::Coefficient(c) => c.index() as u8,
            ChannelSource::Feature => 0xFF,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0..=2 => Some(ChannelSource::Coefficient(Component::from_index(code as usize))),
            0xFF => Some(ChannelSource::Feature),
            _ => None,
        }
    }
}

/// Provenance of one channel. For coefficient channels `frequency` is the
/// zigzag index; for feature channels it is the channel index modulo 256.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ChannelMeta {
    pub source: ChannelSource,
    pub frequency: u8,
}

impl ChannelMeta {
    pub fn coefficient(component: Component, frequency: u8) -> Self {
        Self {
            source: ChannelSource::Coefficient(component),
            frequency,
        }
    }

    pub fn feature(index: usize) -> Self {
        Self {
            source: ChannelSource::Feature,
            frequency: (index % 256) as u8,
        }
    }

    pub fn component(&self) -> Option<Component> {
        match self.source {
            ChannelSource::Coefficient(c) => Some(c),
            ChannelSource::Feature => None,
        }
    }
}

/// Row-major `channels x rows x cols` payload.
#[derive(Clone, Debug, PartialEq)]
pub enum TensorData {
    F32(Vec<f32>),
    I16(Vec<i16>),
}

impl TensorData {
    pub fn len(&self) -> usize {
        match self {
            TensorData::F32(v) => v.len(),
            TensorData::I16(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dtype_name(&self) -> &'static str {
        match self {
            TensorData::F32(_) => "f32",
            TensorData::I16(_) => "i16",
        }
    }

    /// Values widened to f32.
    pub fn to_f32(&self) -> Vec<f32> {
        match self {
            TensorData::F32(v) => v.clone(),
            TensorData::I16(v) => v.iter().map(|&x| x as f32).collect(),
        }
    }

    fn empty_like(&self, capacity: usize) -> TensorData {
        match self {
            TensorData::F32(_) => TensorData::F32(Vec::with_capacity(capacity)),
            TensorData::I16(_) => TensorData::I16(Vec::with_capacity(capacity)),
        }
    }

    fn extend_from(&mut self, other: &TensorData, range: std::ops::Range<usize>) {
        match (self, other) {
            (TensorData::F32(a), TensorData::F32(b)) => a.extend_from_slice(&b[range]),
            (TensorData::I16(a), TensorData::I16(b)) => a.extend_from_slice(&b[range]),
            _ => unreachable!("dtype checked by caller"),
        }
    }

    fn same_dtype(&self, other: &TensorData) -> bool {
        std::mem::discriminant(self) == std::mem::discriminant(other)
    }
}

#[derive(Debug)]
pub enum TensorError {
    DimensionMismatch(String),
    DtypeMismatch,
    IndexOutOfRange { index: usize },
    InvalidSpec(String),
    FormatVersionMismatch(String),
    ChecksumMismatch { stored: u32, computed: u32 },
    TruncatedFile,
    Decode(DecodeError),
    Io(std::io::Error),
}

impl fmt::Display for TensorError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TensorError::DimensionMismatch(why) => write!(f, "dimension mismatch: {why}"),
            TensorError::DtypeMismatch => f.write_str("tensors have different element types"),
            TensorError::IndexOutOfRange { index } => {
                write!(f, "frequency index {index} not present in tensor")
            }
            TensorError::InvalidSpec(why) => write!(f, "invalid band selection: {why}"),
            TensorError::FormatVersionMismatch(why) => write!(f, "not a DCTT v1 tensor: {why}"),
            TensorError::ChecksumMismatch { stored, computed } => write!(
                f,
                "payload checksum mismatch (stored {stored:08x}, computed {computed:08x})"
            ),
            TensorError::TruncatedFile => f.write_str("tensor file is truncated"),
            TensorError::Decode(e) => e.fmt(f),
            TensorError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl std::error::Error for TensorError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            TensorError::Decode(e) => e.source(),
            _ => None,
        }
    }
}

impl From<DecodeError> for TensorError {
    fn from(e: DecodeError) -> Self {
        TensorError::Decode(e)
    }
}

impl From<std::io::Error> for TensorError {
    fn from(e: std::io::Error) -> Self {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            TensorError::TruncatedFile
        } else {
            TensorError::Io(e)
        }
    }
}

pub type Result<T> = std::result::Result<T, TensorError>;

/// `channels x rows x cols` tensor with per-channel provenance and the true
/// pixel extent of the image it came from.
#[derive(Clone, Debug, PartialEq)]
pub struct DctTensor {
    pub channels: usize,
    pub rows: usize,
    pub cols: usize,
    pub data: TensorData,
    pub meta: Vec<ChannelMeta>,
    /// True pixel (width, height).
    pub crop: (u32, u32),
}

impl DctTensor {
    pub fn new(rows: usize, cols: usize, data: TensorData, meta: Vec<ChannelMeta>, crop: (u32, u32)) -> Result<Self> {
        let channels = meta.len();
        if data.len() != channels * rows * cols {
            return Err(TensorError::DimensionMismatch(format!(
                "payload has {} values, expected {channels}x{rows}x{cols}",
                data.len()
            )));
        }
        Ok(Self {
            channels,
            rows,
            cols,
            data,
            meta,
            crop,
        })
    }

    pub fn plane_len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_luma_only(&self) -> bool {
        self.meta
            .iter()
            .all(|m| m.source == ChannelSource::Coefficient(Component::Y))
    }

    /// Components in first-appearance order.
    pub fn components(&self) -> Vec<Component> {
        let mut out: Vec<Component> = Vec::new();
        for c in self.meta.iter().filter_map(ChannelMeta::component) {
            if !out.contains(&c) {
                out.push(c);
            }
        }
        out
    }

    pub fn to_f32(&self) -> Vec<f32> {
        self.data.to_f32()
    }

    /// Value at channel `c`, row `r`, col `k` widened to f32.
    pub fn get(&self, c: usize, r: usize, k: usize) -> f32 {
        let i = (c * self.rows + r) * self.cols + k;
        match &self.data {
            TensorData::F32(v) => v[i],
            TensorData::I16(v) => v[i] as f32,
        }
    }

    /// Copies the listed channels, in the given order.
    pub fn take_channels(&self, channels: &[usize]) -> DctTensor {
        let plane = self.plane_len();
        let mut data = self.data.empty_like(channels.len() * plane);
        for &c in channels {
            data.extend_from(&self.data, c * plane..(c + 1) * plane);
        }
        DctTensor {
            channels: channels.len(),
            rows: self.rows,
            cols: self.cols,
            data,
            meta: channels.iter().map(|&c| self.meta[c]).collect(),
            crop: self.crop,
        }
    }
}

/// Moves each block's 64 coefficients onto the channel axis: channel `k` at
/// `(r, c)` is zigzag coefficient `k` of block `(r, c)`.
pub fn rearrange(grid: &CoeffBlockGrid) -> DctTensor {
    let (rows, cols) = (grid.block_rows, grid.block_cols);
    let plane = rows * cols;
    fn scatter<T: Copy + Default>(src: &[T], plane: usize) -> Vec<T> {
        let mut out = vec![T::default(); plane * 64];
        for (b, block) in src.chunks_exact(64).enumerate() {
            for (k, &v) in block.iter().enumerate() {
                out[k * plane + b] = v;
            }
        }
        out
    }
    let data = match &grid.coefficients {
        Coefficients::Quantized(v) => TensorData::I16(scatter(v, plane)),
        Coefficients::Dequantized(v) => TensorData::F32(scatter(v, plane)),
    };
    DctTensor {
        channels: 64,
        rows,
        cols,
        data,
        meta: (0..64).map(|k| ChannelMeta::coefficient(grid.component, k)).collect(),
        crop: (grid.sample_size.0 as u32, grid.sample_size.1 as u32),
    }
}

/// Inverse of [`rearrange`]. Requires the 64 channels of one component in
/// zigzag order.
pub fn inverse_rearrange(t: &DctTensor) -> Result<CoeffBlockGrid> {
    let component = match t.meta.first().and_then(ChannelMeta::component) {
        Some(c) if t.channels == 64 => c,
        _ => {
            return Err(TensorError::DimensionMismatch(
                "expected 64 coefficient channels".into(),
            ))
        }
    };
    if t.meta
        .iter()
        .enumerate()
        .any(|(k, m)| *m != ChannelMeta::coefficient(component, k as u8))
    {
        return Err(TensorError::DimensionMismatch(
            "channels are not one component in zigzag order".into(),
        ));
    }
    let plane = t.plane_len();
    fn gather<T: Copy + Default>(src: &[T], plane: usize) -> Vec<T> {
        let mut out = vec![T::default(); plane * 64];
        for b in 0..plane {
            for k in 0..64 {
                out[b * 64 + k] = src[k * plane + b];
            }
        }
        out
    }
    let coefficients = match &t.data {
        TensorData::I16(v) => Coefficients::Quantized(gather(v, plane)),
        TensorData::F32(v) => Coefficients::Dequantized(gather(v, plane)),
    };
    Ok(CoeffBlockGrid {
        component,
        block_rows: t.rows,
        block_cols: t.cols,
        sample_size: (t.crop.0 as usize, t.crop.1 as usize),
        coefficients,
    })
}

/// Nearest-neighbour 2x replication in both spatial axes, cropped to the
/// luma grid `(rows, cols)`.
pub fn upsample_chroma(t: &DctTensor, luma_rows: usize, luma_cols: usize) -> Result<DctTensor> {
    if t.rows != luma_rows.div_ceil(2) || t.cols != luma_cols.div_ceil(2) {
        return Err(TensorError::DimensionMismatch(format!(
            "{}x{} chroma grid cannot be upsampled to {luma_rows}x{luma_cols}",
            t.rows, t.cols
        )));
    }
    fn replicate<T: Copy>(src: &[T], ch: usize, rows: usize, cols: usize, out_r: usize, out_c: usize) -> Vec<T> {
        let mut out = Vec::with_capacity(ch * out_r * out_c);
        for c in 0..ch {
            let plane = &src[c * rows * cols..(c + 1) * rows * cols];
            for r in 0..out_r {
                let row = &plane[(r / 2) * cols..(r / 2 + 1) * cols];
                out.extend((0..out_c).map(|k| row[k / 2]));
            }
        }
        out
    }
    let data = match &t.data {
        TensorData::F32(v) => TensorData::F32(replicate(v, t.channels, t.rows, t.cols, luma_rows, luma_cols)),
        TensorData::I16(v) => TensorData::I16(replicate(v, t.channels, t.rows, t.cols, luma_rows, luma_cols)),
    };
    Ok(DctTensor {
        channels: t.channels,
        rows: luma_rows,
        cols: luma_cols,
        data,
        meta: t.meta.clone(),
        crop: t.crop,
    })
}

/// Concatenates tensors along the channel axis. A single luma tensor is
/// returned unchanged. The crop extent is taken from the first part.
pub fn assemble(parts: &[&DctTensor]) -> Result<DctTensor> {
    let first = parts
        .first()
        .ok_or_else(|| TensorError::DimensionMismatch("nothing to assemble".into()))?;
    let mut data = first.data.empty_like(parts.iter().map(|p| p.data.len()).sum());
    let mut meta = Vec::new();
    for p in parts {
        if (p.rows, p.cols) != (first.rows, first.cols) {
            return Err(TensorError::DimensionMismatch(format!(
                "{}x{} vs {}x{}",
                p.rows, p.cols, first.rows, first.cols
            )));
        }
        if !p.data.same_dtype(&first.data) {
            return Err(TensorError::DtypeMismatch);
        }
        data.extend_from(&p.data, 0..p.data.len());
        meta.extend_from_slice(&p.meta);
    }
    let mut seen = std::collections::HashSet::new();
    if meta
        .iter()
        .any(|m| m.source != ChannelSource::Feature && !seen.insert(*m))
    {
        return Err(TensorError::DimensionMismatch(
            "duplicate (component, frequency) channels".into(),
        ));
    }
    DctTensor::new(first.rows, first.cols, data, meta, first.crop)
}
