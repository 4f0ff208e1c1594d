//! DCTT container: little-endian header, channel provenance, crop extent,
//! payload and a trailing CRC32 of the payload.
//!
//! ```text
//! "DCTT" | version u8 = 1 | dtype u8 (1 f32, 2 i16) | reserved u16 = 0 | ndim u8 = 3
//! dims 3 x u32 (channels, rows, cols)
//! channels x (component code u8, frequency u8)
//! crop 2 x u32 (width, height)
//! payload, row-major
//! crc32(payload) u32
//! ```

use std::io::{Read, Write};
use std::path::Path;

use super::{ChannelMeta, ChannelSource, DctTensor, Result, TensorData, TensorError};

const MAGIC: &[u8; 4] = b"DCTT";
const VERSION: u8 = 1;
const DTYPE_F32: u8 = 1;
const DTYPE_I16: u8 = 2;

/// Bytes before the channel table.
pub const HEADER_FIXED_LEN: usize = 4 + 1 + 1 + 2 + 1 + 12;

fn payload_bytes(data: &TensorData) -> Vec<u8> {
    match data {
        TensorData::F32(v) => v.iter().flat_map(|x| x.to_le_bytes()).collect(),
        TensorData::I16(v) => v.iter().flat_map(|x| x.to_le_bytes()).collect(),
    }
}

pub fn write_tensor<W: Write>(t: &DctTensor, mut sink: W) -> Result<()> {
    let dtype = match t.data {
        TensorData::F32(_) => DTYPE_F32,
        TensorData::I16(_) => DTYPE_I16,
    };
    let mut header = Vec::with_capacity(HEADER_FIXED_LEN + 2 * t.channels + 8);
    header.extend_from_slice(MAGIC);
    header.extend_from_slice(&[VERSION, dtype, 0, 0, 3]);
    for d in [t.channels, t.rows, t.cols] {
        header.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for m in &t.meta {
        header.extend_from_slice(&[m.source.code(), m.frequency]);
    }
    header.extend_from_slice(&t.crop.0.to_le_bytes());
    header.extend_from_slice(&t.crop.1.to_le_bytes());
    let payload = payload_bytes(&t.data);
    sink.write_all(&header)?;
    sink.write_all(&payload)?;
    sink.write_all(&crc32fast::hash(&payload).to_le_bytes())?;
    sink.flush()?;
    Ok(())
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).ok_or(TensorError::TruncatedFile)?;
        let s = self.bytes.get(self.pos..end).ok_or(TensorError::TruncatedFile)?;
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

pub fn read_tensor<R: Read>(mut source: R) -> Result<DctTensor> {
    let mut bytes = Vec::new();
    source.read_to_end(&mut bytes)?;
    let mut cur = Cursor { bytes: &bytes, pos: 0 };
    let head = cur.take(9)?;
    if &head[..4] != MAGIC {
        return Err(TensorError::FormatVersionMismatch("bad magic".into()));
    }
    if head[4] != VERSION {
        return Err(TensorError::FormatVersionMismatch(format!("version {}", head[4])));
    }
    let dtype = head[5];
    if dtype != DTYPE_F32 && dtype != DTYPE_I16 {
        return Err(TensorError::FormatVersionMismatch(format!("dtype code {dtype}")));
    }
    if head[6] != 0 || head[7] != 0 {
        return Err(TensorError::FormatVersionMismatch("reserved bytes set".into()));
    }
    if head[8] != 3 {
        return Err(TensorError::FormatVersionMismatch(format!("ndim {}", head[8])));
    }
    let (channels, rows, cols) = (cur.u32()? as usize, cur.u32()? as usize, cur.u32()? as usize);
    let mut meta = Vec::with_capacity(channels.min(1 << 16));
    for _ in 0..channels {
        let m = cur.take(2)?;
        let source = ChannelSource::from_code(m[0])
            .ok_or_else(|| TensorError::FormatVersionMismatch(format!("component code {}", m[0])))?;
        meta.push(ChannelMeta {
            source,
            frequency: m[1],
        });
    }
    let crop = (cur.u32()?, cur.u32()?);
    let count = channels
        .checked_mul(rows)
        .and_then(|v| v.checked_mul(cols))
        .ok_or(TensorError::TruncatedFile)?;
    let width = if dtype == DTYPE_F32 { 4 } else { 2 };
    let payload = cur.take(count.checked_mul(width).ok_or(TensorError::TruncatedFile)?)?;
    let stored = cur.u32()?;
    let computed = crc32fast::hash(payload);
    if stored != computed {
        return Err(TensorError::ChecksumMismatch { stored, computed });
    }
    let data = if dtype == DTYPE_F32 {
        TensorData::F32(
            payload
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
                .collect(),
        )
    } else {
        TensorData::I16(
            payload
                .chunks_exact(2)
                .map(|b| i16::from_le_bytes(b.try_into().unwrap()))
                .collect(),
        )
    };
    DctTensor::new(rows, cols, data, meta, crop)
}

pub fn write_tensor_file(t: &DctTensor, path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_tensor(t, std::io::BufWriter::new(file))
}

pub fn read_tensor_file(path: impl AsRef<Path>) -> Result<DctTensor> {
    read_tensor(std::fs::File::open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jpeg::Component;

    fn sample(channels: usize, rows: usize, cols: usize) -> DctTensor {
        let meta = (0..channels)
            .map(|c| ChannelMeta::coefficient(Component::from_index(c / 64), (c % 64) as u8))
            .collect();
        let data = TensorData::F32((0..channels * rows * cols).map(|i| i as f32 * 0.25 - 7.0).collect());
        DctTensor::new(rows, cols, data, meta, (224, 224)).unwrap()
    }

    #[test]
    fn file_size_is_header_payload_checksum() {
        let t = sample(192, 28, 28);
        let mut buf = Vec::new();
        write_tensor(&t, &mut buf).unwrap();
        let header = HEADER_FIXED_LEN + 192 * 2 + 8;
        assert_eq!(buf.len(), header + 192 * 28 * 28 * 4 + 4);
        assert_eq!(&buf[..4], b"DCTT");
    }

    #[test]
    fn negative_cases() {
        let t = sample(2, 3, 3);
        let mut buf = Vec::new();
        write_tensor(&t, &mut buf).unwrap();

        let mut magic = buf.clone();
        magic[0] = b'X';
        assert!(matches!(
            read_tensor(&magic[..]),
            Err(TensorError::FormatVersionMismatch(_))
        ));
        let mut version = buf.clone();
        version[4] = 2;
        assert!(matches!(
            read_tensor(&version[..]),
            Err(TensorError::FormatVersionMismatch(_))
        ));
        let mut flipped = buf.clone();
        let n = flipped.len();
        flipped[n - 10] ^= 1;
        assert!(matches!(
            read_tensor(&flipped[..]),
            Err(TensorError::ChecksumMismatch { .. })
        ));
        for cut in [3, 20, buf.len() - 1] {
            assert!(
                matches!(read_tensor(&buf[..cut]), Err(TensorError::TruncatedFile)),
                "cut {cut}"
            );
        }
    }
}
