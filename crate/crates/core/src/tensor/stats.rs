use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ChannelMeta, DctTensor, Result, TensorData, TensorError};

/// Per-channel mean and standard deviation gathered over a corpus pass.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelStats {
    pub meta: Vec<ChannelMeta>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    /// Spatial positions accumulated per channel.
    pub count: u64,
}

impl ChannelStats {
    /// Statistics over every position of every tensor. All tensors must
    /// share one channel layout.
    pub fn from_tensors<'a>(tensors: impl IntoIterator<Item = &'a DctTensor>) -> Result<Self> {
        let mut meta: Option<Vec<ChannelMeta>> = None;
        let (mut sum, mut sq) = (Vec::new(), Vec::new());
        let mut count = 0u64;
        for t in tensors {
            match &meta {
                None => {
                    meta = Some(t.meta.clone());
                    sum = vec![0.0f64; t.channels];
                    sq = vec![0.0f64; t.channels];
                }
                Some(m) if *m != t.meta => {
                    return Err(TensorError::DimensionMismatch(
                        "channel layouts differ across corpus".into(),
                    ))
                }
                _ => {}
            }
            let values = t.to_f32();
            for (c, plane) in values.chunks_exact(t.plane_len().max(1)).enumerate() {
                for &v in plane {
                    sum[c] += v as f64;
                    sq[c] += v as f64 * v as f64;
                }
            }
            count += t.plane_len() as u64;
        }
        let meta = meta.ok_or_else(|| TensorError::DimensionMismatch("empty corpus".into()))?;
        let n = count.max(1) as f64;
        let mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
        let std = sq
            .iter()
            .zip(&mean)
            .map(|(q, m)| (q / n - m * m).max(0.0).sqrt())
            .collect();
        Ok(Self { meta, mean, std, count })
    }

    /// `(x - mean) / std` per channel; channels with zero spread are only
    /// centered. Output is always f32.
    pub fn standardize(&self, t: &DctTensor) -> Result<DctTensor> {
        if t.meta != self.meta {
            return Err(TensorError::DimensionMismatch(
                "statistics were gathered for a different channel layout".into(),
            ));
        }
        let plane = t.plane_len();
        let mut out = t.to_f32();
        for (c, chunk) in out.chunks_exact_mut(plane.max(1)).enumerate() {
            let (m, s) = (self.mean[c], self.std[c]);
            let scale = if s > 0.0 { 1.0 / s } else { 1.0 };
            for v in chunk {
                *v = ((*v as f64 - m) * scale) as f32;
            }
        }
        DctTensor::new(t.rows, t.cols, TensorData::F32(out), t.meta.clone(), t.crop)
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| TensorError::Io(e.into()))?;
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn read_json(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| TensorError::Io(e.into()))
    }
}
