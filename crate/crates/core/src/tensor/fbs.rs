//! Static frequency band selection.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{ChannelSource, DctTensor, Result, TensorError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FbsStrategy {
    LowestN,
    MedianBand,
    HighestBand,
    Extremes,
    ExplicitList,
}

impl FromStr for FbsStrategy {
    type Err = TensorError;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "lowest" => FbsStrategy::LowestN,
            "median" => FbsStrategy::MedianBand,
            "highest" => FbsStrategy::HighestBand,
            "extremes" => FbsStrategy::Extremes,
            "list" => FbsStrategy::ExplicitList,
            other => return Err(TensorError::InvalidSpec(format!("unknown strategy {other:?}"))),
        })
    }
}

/// Zigzag indices retained per color component.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FbsSpec {
    pub strategy: FbsStrategy,
    indices: Vec<u8>,
}

impl FbsSpec {
    /// The `n` lowest frequencies, zigzag `0..n`.
    pub fn lowest(n: usize) -> Result<Self> {
        if !(1..=64).contains(&n) {
            return Err(TensorError::InvalidSpec(format!("n = {n} outside 1..=64")));
        }
        Ok(Self {
            strategy: FbsStrategy::LowestN,
            indices: (0..n as u8).collect(),
        })
    }

    /// Zigzag `16..48`.
    pub fn median() -> Self {
        Self {
            strategy: FbsStrategy::MedianBand,
            indices: (16..48).collect(),
        }
    }

    /// Zigzag `32..64`.
    pub fn highest() -> Self {
        Self {
            strategy: FbsStrategy::HighestBand,
            indices: (32..64).collect(),
        }
    }

    /// Zigzag `0..16` and `48..64`.
    pub fn extremes() -> Self {
        Self {
            strategy: FbsStrategy::Extremes,
            indices: (0..16).chain(48..64).collect(),
        }
    }

    /// Arbitrary duplicate-free indices below 64, kept in the given order.
    pub fn list(indices: &[usize]) -> Result<Self> {
        if indices.is_empty() {
            return Err(TensorError::InvalidSpec("empty index list".into()));
        }
        let mut seen = [false; 64];
        for &i in indices {
            if i >= 64 {
                return Err(TensorError::IndexOutOfRange { index: i });
            }
            if std::mem::replace(&mut seen[i], true) {
                return Err(TensorError::InvalidSpec(format!("index {i} listed twice")));
            }
        }
        Ok(Self {
            strategy: FbsStrategy::ExplicitList,
            indices: indices.iter().map(|&i| i as u8).collect(),
        })
    }

    /// Builds a spec from a strategy; `n` only applies to `LowestN` and
    /// must be 32 (or absent) for the fixed bands.
    pub fn from_strategy(strategy: FbsStrategy, n: Option<usize>, list: &[usize]) -> Result<Self> {
        let fixed = |spec: FbsSpec| match n {
            None | Some(32) => Ok(spec),
            Some(n) => Err(TensorError::InvalidSpec(format!(
                "{strategy:?} always keeps 32 coefficients, got n = {n}"
            ))),
        };
        match strategy {
            FbsStrategy::LowestN => Self::lowest(n.unwrap_or(64)),
            FbsStrategy::MedianBand => fixed(Self::median()),
            FbsStrategy::HighestBand => fixed(Self::highest()),
            FbsStrategy::Extremes => fixed(Self::extremes()),
            FbsStrategy::ExplicitList => Self::list(list),
        }
    }

    pub fn indices(&self) -> &[u8] {
        &self.indices
    }

    pub fn n(&self) -> usize {
        self.indices.len()
    }

    pub fn contains(&self, frequency: u8) -> bool {
        self.indices.contains(&frequency)
    }

    /// Membership mask over the 64 zigzag positions.
    pub fn mask(&self) -> [bool; 64] {
        let mut m = [false; 64];
        for &i in &self.indices {
            m[i as usize] = true;
        }
        m
    }
}

impl fmt::Display for FbsSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // Contiguous runs print as ranges: "0..16,48..64".
        let mut parts = Vec::new();
        let mut i = 0;
        while i < self.indices.len() {
            let start = self.indices[i];
            let mut j = i;
            while j + 1 < self.indices.len() && self.indices[j + 1] == self.indices[j] + 1 {
                j += 1;
            }
            if j > i {
                parts.push(format!("{start}..{}", self.indices[j] as u16 + 1));
            } else {
                parts.push(start.to_string());
            }
            i = j + 1;
        }
        f.write_str(&parts.join(","))
    }
}

/// Keeps, for every component present, the channels whose zigzag index is
/// in `spec`. Relative channel order is preserved.
pub fn select(t: &DctTensor, spec: &FbsSpec) -> Result<DctTensor> {
    let mask = spec.mask();
    for component in t.components() {
        for &i in spec.indices() {
            let present = t
                .meta
                .iter()
                .any(|m| m.source == ChannelSource::Coefficient(component) && m.frequency == i);
            if !present {
                return Err(TensorError::IndexOutOfRange { index: i as usize });
            }
        }
    }
    if t.meta.iter().any(|m| m.source == ChannelSource::Feature) {
        return Err(TensorError::InvalidSpec(
            "band selection needs coefficient channels".into(),
        ));
    }
    let keep: Vec<usize> = (0..t.channels)
        .filter(|&c| mask[t.meta[c].frequency as usize])
        .collect();
    Ok(t.take_channels(&keep))
}
