//! Weight files: a leading record naming the operator, then the weight
//! matrix as a DCTT tensor and, for CCPP, the bias as a second one.
//!
//! ```text
//! "DCTW" | version u8 = 1 | kind u8 (1 lp, 2 la, 3 ccpp) | in u32 | out u32
//! DCTT tensor 1 x rows x cols (weights)
//! DCTT tensor 1 x 1 x out (bias, CCPP only)
//! ```

use std::io::{Read, Write};
use std::path::Path;

use crate::tensor::{read_tensor, write_tensor, ChannelMeta, DctTensor, TensorData, TensorError};

use super::{ReduceError, ReductionKind, ReductionOperator, Result};

const MAGIC: &[u8; 4] = b"DCTW";

fn kind_code(kind: ReductionKind) -> u8 {
    match kind {
        ReductionKind::Lp => 1,
        ReductionKind::La => 2,
        ReductionKind::Ccpp => 3,
    }
}

fn matrix(rows: usize, cols: usize, values: &[f32]) -> Result<DctTensor> {
    Ok(DctTensor::new(
        rows,
        cols,
        TensorData::F32(values.to_vec()),
        vec![ChannelMeta::feature(0)],
        (0, 0),
    )?)
}

pub fn write_weights<W: Write>(op: &ReductionOperator<f32>, mut sink: W) -> Result<()> {
    let mut head = Vec::with_capacity(14);
    head.extend_from_slice(MAGIC);
    head.extend_from_slice(&[1, kind_code(op.kind())]);
    head.extend_from_slice(&(op.in_channels() as u32).to_le_bytes());
    head.extend_from_slice(&(op.out_channels() as u32).to_le_bytes());
    sink.write_all(&head).map_err(TensorError::from)?;
    let (rows, cols) = op.weight_shape();
    let mut buf = Vec::new();
    write_tensor(&matrix(rows, cols, op.weights())?, &mut buf)?;
    if op.kind() == ReductionKind::Ccpp {
        write_tensor(&matrix(1, op.out_channels(), op.bias())?, &mut buf)?;
    }
    sink.write_all(&buf).map_err(TensorError::from)?;
    Ok(())
}

pub fn read_weights<R: Read>(mut source: R) -> Result<ReductionOperator<f32>> {
    let mut bytes = Vec::new();
    source.read_to_end(&mut bytes).map_err(TensorError::from)?;
    if bytes.len() < 14 {
        return Err(TensorError::TruncatedFile.into());
    }
    if &bytes[..4] != MAGIC || bytes[4] != 1 {
        return Err(ReduceError::InvalidWeights("not a weight file".into()));
    }
    let kind = match bytes[5] {
        1 => ReductionKind::Lp,
        2 => ReductionKind::La,
        3 => ReductionKind::Ccpp,
        c => return Err(ReduceError::InvalidWeights(format!("operator code {c}"))),
    };
    let n = u32::from_le_bytes(bytes[6..10].try_into().unwrap()) as usize;
    let m = u32::from_le_bytes(bytes[10..14].try_into().unwrap()) as usize;
    let rest = &bytes[14..];
    let weights = read_tensor(rest)?;
    let used = tensor_len(&weights);
    let f32s = |t: &DctTensor| -> Result<Vec<f32>> {
        match &t.data {
            TensorData::F32(v) => Ok(v.clone()),
            TensorData::I16(_) => Err(ReduceError::InvalidWeights("weights must be float32".into())),
        }
    };
    let bias = if kind == ReductionKind::Ccpp {
        f32s(&read_tensor(&rest[used..])?)?
    } else {
        Vec::new()
    };
    let op = ReductionOperator::new(kind, n, m, f32s(&weights)?, bias)?;
    if op.weight_shape() != (weights.rows, weights.cols) {
        return Err(ReduceError::ShapeMismatch("weight matrix shape".into()));
    }
    Ok(op)
}

// read_tensor consumes the whole reader, so the second tensor offset is
// recomputed from the first tensor's shape.
fn tensor_len(t: &DctTensor) -> usize {
    crate::tensor::HEADER_FIXED_LEN + 2 * t.channels + 8 + t.data.len() * 4 + 4
}

pub fn write_weights_file(op: &ReductionOperator<f32>, path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path).map_err(TensorError::from)?;
    write_weights(op, std::io::BufWriter::new(file))
}

pub fn read_weights_file(path: impl AsRef<Path>) -> Result<ReductionOperator<f32>> {
    read_weights(std::fs::File::open(path).map_err(TensorError::from)?)
}
