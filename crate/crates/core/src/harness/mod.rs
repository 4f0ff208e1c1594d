//! Preprocessing timing: full pixel decode against partial coefficient
//! decode, on a preloaded corpus, with a fixed downstream stand-in.

mod corpus;
mod report;
mod run;

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::jpeg::DecodeError;
use crate::reduce::{ReduceError, ReductionKind};
use crate::tensor::{FbsSpec, FbsStrategy, TensorError};

pub use corpus::{
    center_crop_offset, estimate_quality, load_corpus, prepare_corpus, read_manifest, synth_corpus, synth_image,
    CorpusEntry, Manifest, ManifestLine, PrepareOptions, MANIFEST_NAME, SYNTH_QUALITIES,
};
pub use report::{emit_report, write_report, ReportFormat};
pub use run::{clock_resolution, run_bench, BenchReport, Environment, ModeRow, Protocol, Stat, PIPELINE_CHANNELS};

#[derive(Debug)]
pub enum HarnessError {
    /// No manifest in the corpus directory.
    CorpusNotPrepared(PathBuf),
    /// The prepared corpus lists no images to sample from.
    CorpusTooSmall {
        images: usize,
        needed: usize,
    },
    ClockResolutionTooCoarse {
        resolution_ns: u64,
        mean_ns: u64,
    },
    EmptyCorpus(PathBuf),
    UnwritableOutput {
        path: PathBuf,
        source: std::io::Error,
    },
    InvalidConfig(String),
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    Tensor(TensorError),
    Reduce(ReduceError),
}

impl fmt::Display for HarnessError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HarnessError::CorpusNotPrepared(p) => {
                write!(f, "corpus not prepared: no {MANIFEST_NAME} in {}", p.display())
            }
            HarnessError::CorpusTooSmall { images, needed } => {
                write!(f, "corpus too small: {images} images, need at least {needed}")
            }
            HarnessError::ClockResolutionTooCoarse { resolution_ns, mean_ns } => write!(
                f,
                "clock resolution too coarse: {resolution_ns} ns against a mean of {mean_ns} ns"
            ),
            HarnessError::EmptyCorpus(p) => write!(f, "no usable JPEG files in {}", p.display()),
            HarnessError::UnwritableOutput { path, source } => {
                write!(f, "cannot write {}: {source}", path.display())
            }
            HarnessError::InvalidConfig(why) => write!(f, "invalid bench config: {why}"),
            HarnessError::Io { path, source } => write!(f, "{}: {source}", path.display()),
            HarnessError::Tensor(e) => e.fmt(f),
            HarnessError::Reduce(e) => e.fmt(f),
        }
    }
}

impl std::error::Error for HarnessError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            HarnessError::Tensor(e) => e.source(),
            HarnessError::Reduce(e) => e.source(),
            _ => None,
        }
    }
}

impl From<TensorError> for HarnessError {
    fn from(e: TensorError) -> Self {
        HarnessError::Tensor(e)
    }
}

impl From<DecodeError> for HarnessError {
    fn from(e: DecodeError) -> Self {
        HarnessError::Tensor(e.into())
    }
}

impl From<ReduceError> for HarnessError {
    fn from(e: ReduceError) -> Self {
        HarnessError::Reduce(e)
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;

/// What a timed batch produces.
///
/// Text form: `rgb`, `dct`, `dct+fbs=<selection>` and `dct+<lp|la|ccpp>`.
/// A selection is `lowest:N`, `median`, `highest`, `extremes` or a comma
/// list of indices and half-open ranges such as `0..16,48..64`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum BenchMode {
    FullDecodeRgb,
    PartialDecodeDct,
    PartialDecodeDctFbs(FbsSpec),
    PartialDecodeDctReduction(ReductionKind),
}

impl fmt::Display for BenchMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BenchMode::FullDecodeRgb => f.write_str("rgb"),
            BenchMode::PartialDecodeDct => f.write_str("dct"),
            BenchMode::PartialDecodeDctFbs(spec) => match spec.strategy {
                FbsStrategy::LowestN => write!(f, "dct+fbs=lowest:{}", spec.n()),
                FbsStrategy::MedianBand => f.write_str("dct+fbs=median"),
                FbsStrategy::HighestBand => f.write_str("dct+fbs=highest"),
                FbsStrategy::Extremes => f.write_str("dct+fbs=extremes"),
                FbsStrategy::ExplicitList => write!(f, "dct+fbs={spec}"),
            },
            BenchMode::PartialDecodeDctReduction(kind) => write!(f, "dct+{kind}"),
        }
    }
}

fn parse_selection(s: &str) -> Result<FbsSpec> {
    let bad = |why: String| HarnessError::InvalidConfig(why);
    if let Some(n) = s.strip_prefix("lowest:") {
        let n = n.parse().map_err(|_| bad(format!("bad coefficient count {n:?}")))?;
        return Ok(FbsSpec::lowest(n)?);
    }
    match s {
        "median" => return Ok(FbsSpec::median()),
        "highest" => return Ok(FbsSpec::highest()),
        "extremes" => return Ok(FbsSpec::extremes()),
        _ => {}
    }
    let mut indices = Vec::new();
    for item in s.split(',') {
        let item = item.trim();
        let num = |t: &str| {
            t.parse::<usize>()
                .map_err(|_| bad(format!("bad selection item {item:?}")))
        };
        match item.split_once("..") {
            Some((a, b)) => indices.extend(num(a)?..num(b)?),
            None => indices.push(num(item)?),
        }
    }
    Ok(FbsSpec::list(&indices)?)
}

impl FromStr for BenchMode {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "rgb" => return Ok(BenchMode::FullDecodeRgb),
            "dct" => return Ok(BenchMode::PartialDecodeDct),
            _ => {}
        }
        let rest = s
            .strip_prefix("dct+")
            .ok_or_else(|| HarnessError::InvalidConfig(format!("unknown mode {s:?}")))?;
        if let Some(sel) = rest.strip_prefix("fbs=") {
            return Ok(BenchMode::PartialDecodeDctFbs(parse_selection(sel)?));
        }
        rest.parse()
            .map(BenchMode::PartialDecodeDctReduction)
            .map_err(|_| HarnessError::InvalidConfig(format!("unknown mode {s:?}")))
    }
}

impl Serialize for BenchMode {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for BenchMode {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Timing protocol. Defaults: 10 runs of 25 batches of 8 images after 3
/// warmup batches, comparing full and partial decoding.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub corpus_dir: PathBuf,
    pub runs: usize,
    pub batches_per_run: usize,
    pub batch_size: usize,
    pub warmup_batches: usize,
    pub seed: u64,
    /// Decode the members of a batch on separate threads.
    pub parallel: bool,
    pub modes: Vec<BenchMode>,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            corpus_dir: PathBuf::from("corpus"),
            runs: 10,
            batches_per_run: 25,
            batch_size: 8,
            warmup_batches: 3,
            seed: 0,
            parallel: false,
            modes: vec![BenchMode::FullDecodeRgb, BenchMode::PartialDecodeDct],
        }
    }
}

impl BenchConfig {
    /// Parses `key=value` pairs separated by whitespace or newlines; `#`
    /// starts a comment. `mode=` may repeat, and the first one replaces the
    /// default mode list.
    pub fn from_kv(text: &str) -> Result<BenchConfig> {
        let mut config = BenchConfig::default();
        let mut modes = Vec::new();
        for line in text.lines() {
            let line = line.split('#').next().unwrap_or("");
            for token in line.split_whitespace() {
                let (key, value) = token
                    .split_once('=')
                    .ok_or_else(|| HarnessError::InvalidConfig(format!("expected key=value, got {token:?}")))?;
                config.set(key, value, &mut modes)?;
            }
        }
        if !modes.is_empty() {
            config.modes = modes;
        }
        config.validate()?;
        Ok(config)
    }

    fn set(&mut self, key: &str, value: &str, modes: &mut Vec<BenchMode>) -> Result<()> {
        fn num<T: FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .parse()
                .map_err(|_| HarnessError::InvalidConfig(format!("{key}: not a number: {value:?}")))
        }
        match key {
            "corpus" | "corpus_dir" => self.corpus_dir = PathBuf::from(value),
            "runs" => self.runs = num(key, value)?,
            "batches" | "batches_per_run" => self.batches_per_run = num(key, value)?,
            "batch" | "batch_size" => self.batch_size = num(key, value)?,
            "warmup" | "warmup_batches" => self.warmup_batches = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "parallel" => {
                self.parallel = match value {
                    "true" | "1" | "yes" => true,
                    "false" | "0" | "no" => false,
                    _ => return Err(HarnessError::InvalidConfig(format!("parallel: {value:?}"))),
                }
            }
            "mode" => modes.push(value.parse()?),
            _ => return Err(HarnessError::InvalidConfig(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.runs == 0 || self.batches_per_run == 0 || self.batch_size == 0 {
            return Err(HarnessError::InvalidConfig(
                "runs, batches and batch must all be at least 1".into(),
            ));
        }
        if self.modes.is_empty() {
            return Err(HarnessError::InvalidConfig("no modes".into()));
        }
        Ok(())
    }

    /// Inverse of [`BenchConfig::from_kv`].
    pub fn to_kv(&self) -> String {
        let mut s = format!(
            "corpus={}\nruns={}\nbatches={}\nbatch={}\nwarmup={}\nseed={}\nparallel={}\n",
            self.corpus_dir.display(),
            self.runs,
            self.batches_per_run,
            self.batch_size,
            self.warmup_batches,
            self.seed,
            self.parallel
        );
        for m in &self.modes {
            s.push_str(&format!("mode={m}\n"));
        }
        s
    }

    pub fn images_per_run(&self) -> usize {
        self.batches_per_run * self.batch_size
    }
}
