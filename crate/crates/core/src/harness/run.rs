//! The timed loop.

use std::hint::black_box;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{load_corpus, BenchConfig, BenchMode, HarnessError, Result};
use crate::jpeg;
use crate::reduce::ReductionOperator;
use crate::tensor::{tensor_from_jpeg, TensorData, TensorOptions};

/// Channels of the stand-in feature map (a 28x28 grid, like a 224x224 crop).
pub const PIPELINE_CHANNELS: usize = 64;
const PIPELINE_PLANE: usize = 28 * 28;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean_ms: f64,
    /// Sample standard deviation; 0 for a single sample.
    pub std_ms: f64,
}

impl Stat {
    pub fn from_samples(samples: &[f64]) -> Stat {
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let std = if samples.len() < 2 {
            0.0
        } else {
            (samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        Stat {
            mean_ms: mean,
            std_ms: std,
        }
    }
}

/// One mode's timings. Times are per run (the sum over its batches).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeRow {
    pub mode: BenchMode,
    pub preprocessing: Stat,
    pub pipeline: Stat,
    pub total: Stat,
    /// Images per run divided by the mean total time.
    pub fps: f64,
    /// Summed per-image preprocessing time, reported in parallel mode
    /// where it differs from wall-clock time.
    pub per_image: Option<Stat>,
    pub run_preprocessing_ms: Vec<f64>,
    pub run_pipeline_ms: Vec<f64>,
    pub run_total_ms: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Protocol {
    pub runs: usize,
    pub batches_per_run: usize,
    pub batch_size: usize,
    pub warmup_batches: usize,
    pub seed: u64,
    pub parallel: bool,
    pub images_per_run: usize,
    pub corpus_images: usize,
    pub sampled_with_replacement: bool,
    /// Corpus indices of every batch; the same in each run.
    pub batches: Vec<Vec<usize>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Environment {
    pub host: String,
    pub cores: usize,
    pub os: String,
    pub arch: String,
    pub build: String,
    pub timer: String,
    pub clock_resolution_ns: u64,
    pub pipeline: String,
}

impl Environment {
    fn capture(clock_resolution_ns: u64) -> Environment {
        let host = std::env::var("HOSTNAME")
            .ok()
            .or_else(|| std::fs::read_to_string("/etc/hostname").ok())
            .map(|h| h.trim().to_string())
            .filter(|h| !h.is_empty())
            .unwrap_or_else(|| "unknown".into());
        Environment {
            host,
            cores: std::thread::available_parallelism().map_or(1, |n| n.get()),
            os: std::env::consts::OS.into(),
            arch: std::env::consts::ARCH.into(),
            build: if cfg!(debug_assertions) { "debug" } else { "release" }.into(),
            timer: "monotonic (std::time::Instant)".into(),
            clock_resolution_ns,
            pipeline: format!(
                "1x1 convolution {PIPELINE_CHANNELS}->{PIPELINE_CHANNELS} over a fixed 28x28 map per image, CPU"
            ),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub protocol: Protocol,
    pub rows: Vec<ModeRow>,
    pub environment: Environment,
}

impl BenchReport {
    pub fn row(&self, mode: &BenchMode) -> Option<&ModeRow> {
        self.rows.iter().find(|r| &r.mode == mode)
    }
}

/// Smallest observable step of the monotonic clock.
pub fn clock_resolution() -> Duration {
    let mut best = Duration::MAX;
    for _ in 0..200 {
        let t0 = Instant::now();
        let mut t1 = Instant::now();
        while t1 == t0 {
            t1 = Instant::now();
        }
        best = best.min(t1 - t0);
    }
    best
}

/// Stand-in for the network: identical work whatever the mode produced.
struct Pipeline {
    weights: Vec<f32>,
    input: Vec<f32>,
    output: Vec<f32>,
}

impl Pipeline {
    fn new(seed: u64) -> Pipeline {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let c = PIPELINE_CHANNELS;
        Pipeline {
            weights: (0..c * c).map(|_| rng.gen_range(-0.125..0.125)).collect(),
            input: (0..c * PIPELINE_PLANE).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            output: vec![0.0; c * PIPELINE_PLANE],
        }
    }

    fn run(&mut self, images: usize) {
        let c = PIPELINE_CHANNELS;
        for _ in 0..images {
            self.output.iter_mut().for_each(|v| *v = 0.0);
            for o in 0..c {
                let out = &mut self.output[o * PIPELINE_PLANE..(o + 1) * PIPELINE_PLANE];
                for i in 0..c {
                    let w = self.weights[o * c + i];
                    let src = &self.input[i * PIPELINE_PLANE..(i + 1) * PIPELINE_PLANE];
                    for (d, s) in out.iter_mut().zip(src) {
                        *d += w * s;
                    }
                }
            }
            black_box(&self.output);
        }
    }
}

struct Preprocessor {
    mode: BenchMode,
    options: TensorOptions,
    operator: Option<ReductionOperator>,
}

impl Preprocessor {
    fn new(mode: &BenchMode, seed: u64) -> Result<Preprocessor> {
        let mut options = TensorOptions::default();
        let mut operator = None;
        match mode {
            BenchMode::PartialDecodeDctFbs(spec) => options.fbs = Some(spec.clone()),
            BenchMode::PartialDecodeDctReduction(kind) => {
                operator = Some(ReductionOperator::random(*kind, 192, 64, seed)?);
            }
            _ => {}
        }
        Ok(Preprocessor {
            mode: mode.clone(),
            options,
            operator,
        })
    }

    /// Decodes one image into the mode's network-facing representation.
    fn image(&self, bytes: &[u8]) -> Result<Vec<f32>> {
        if self.mode == BenchMode::FullDecodeRgb {
            let (parsed, grids) = jpeg::decode(bytes)?;
            let grids = jpeg::dequantize_all(&parsed, &grids)?;
            let rgb = jpeg::reconstruct_rgb(&parsed, &grids)?;
            let plane = rgb.width * rgb.height;
            let mut chw = vec![0.0f32; 3 * plane];
            for (i, px) in rgb.data.chunks_exact(3).enumerate() {
                for c in 0..3 {
                    chw[c * plane + i] = px[c] as f32 / 255.0;
                }
            }
            return Ok(chw);
        }
        let mut t = tensor_from_jpeg(bytes, &self.options)?;
        if let Some(op) = &self.operator {
            t = op.apply(&t)?;
        }
        Ok(match t.data {
            TensorData::F32(v) => v,
            TensorData::I16(_) => t.to_f32(),
        })
    }

    /// Returns the wall-clock and the summed per-image time of one batch.
    fn batch(&self, images: &[&[u8]], parallel: bool) -> Result<(Duration, Duration)> {
        let start = Instant::now();
        let mut per_image = Duration::ZERO;
        let mut stacked: Vec<f32> = Vec::new();
        if parallel {
            let results: Vec<Result<(Vec<f32>, Duration)>> = std::thread::scope(|s| {
                let handles: Vec<_> = images
                    .iter()
                    .map(|&bytes| {
                        s.spawn(move || {
                            let t = Instant::now();
                            self.image(bytes).map(|v| (v, t.elapsed()))
                        })
                    })
                    .collect();
                handles.into_iter().map(|h| h.join().expect("decode thread")).collect()
            });
            for r in results {
                let (v, d) = r?;
                per_image += d;
                stacked.extend_from_slice(&v);
            }
        } else {
            for &bytes in images {
                let t = Instant::now();
                let v = self.image(bytes)?;
                per_image += t.elapsed();
                stacked.extend_from_slice(&v);
            }
        }
        black_box(&stacked);
        Ok((start.elapsed(), per_image))
    }
}

/// Batch composition: a seeded permutation when the corpus is large enough,
/// seeded sampling with replacement otherwise.
fn compose(corpus: usize, config: &BenchConfig) -> (Vec<Vec<usize>>, bool) {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let needed = config.images_per_run();
    let with_replacement = corpus < needed;
    let order: Vec<usize> = if with_replacement {
        (0..needed).map(|_| rng.gen_range(0..corpus)).collect()
    } else {
        let mut all: Vec<usize> = (0..corpus).collect();
        all.shuffle(&mut rng);
        all.truncate(needed);
        all
    };
    (
        order.chunks(config.batch_size).map(<[usize]>::to_vec).collect(),
        with_replacement,
    )
}

fn ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

/// Times every mode on the same batches. Within a batch the modes run back
/// to back in an order that rotates from batch to batch, so drift in machine
/// state spreads evenly over the modes.
pub fn run_bench(config: &BenchConfig) -> Result<BenchReport> {
    config.validate()?;
    let corpus = load_corpus(&config.corpus_dir)?;
    if corpus.is_empty() {
        return Err(HarnessError::CorpusTooSmall { images: 0, needed: 1 });
    }
    let (batches, with_replacement) = compose(corpus.len(), config);
    let batch_bytes: Vec<Vec<&[u8]>> = batches
        .iter()
        .map(|b| b.iter().map(|&i| corpus[i].1.as_slice()).collect())
        .collect();
    let preprocessors = config
        .modes
        .iter()
        .map(|m| Preprocessor::new(m, config.seed))
        .collect::<Result<Vec<_>>>()?;
    let mut pipeline = Pipeline::new(config.seed);

    for w in 0..config.warmup_batches {
        for p in &preprocessors {
            p.batch(&batch_bytes[w % batch_bytes.len()], config.parallel)?;
        }
        pipeline.run(config.batch_size);
    }

    let m = preprocessors.len();
    let mut pre = vec![vec![0.0; config.runs]; m];
    let mut net = vec![vec![0.0; config.runs]; m];
    let mut per_image = vec![vec![0.0; config.runs]; m];
    let mut batch_count = 0usize;
    for run in 0..config.runs {
        for (b, images) in batch_bytes.iter().enumerate() {
            for k in 0..m {
                let i = (k + b + run) % m;
                let (wall, summed) = preprocessors[i].batch(images, config.parallel)?;
                let t = Instant::now();
                pipeline.run(images.len());
                let stand_in = t.elapsed();
                pre[i][run] += ms(wall);
                per_image[i][run] += ms(summed);
                net[i][run] += ms(stand_in);
            }
            batch_count += 1;
        }
    }

    let resolution = clock_resolution();
    let min_batch_mean_ms = pre
        .iter()
        .map(|runs| runs.iter().sum::<f64>() / batch_count as f64)
        .fold(f64::INFINITY, f64::min);
    let mean_ns = (min_batch_mean_ms * 1e6) as u64;
    if resolution.as_nanos() as f64 > 0.01 * mean_ns as f64 {
        return Err(HarnessError::ClockResolutionTooCoarse {
            resolution_ns: resolution.as_nanos() as u64,
            mean_ns,
        });
    }

    let rows = (0..m)
        .map(|i| {
            let total: Vec<f64> = pre[i].iter().zip(&net[i]).map(|(a, b)| a + b).collect();
            let total_stat = Stat::from_samples(&total);
            ModeRow {
                mode: config.modes[i].clone(),
                preprocessing: Stat::from_samples(&pre[i]),
                pipeline: Stat::from_samples(&net[i]),
                total: total_stat,
                fps: config.images_per_run() as f64 / (total_stat.mean_ms / 1e3),
                per_image: config.parallel.then(|| Stat::from_samples(&per_image[i])),
                run_preprocessing_ms: pre[i].clone(),
                run_pipeline_ms: net[i].clone(),
                run_total_ms: total,
            }
        })
        .collect();
    Ok(BenchReport {
        protocol: Protocol {
            runs: config.runs,
            batches_per_run: config.batches_per_run,
            batch_size: config.batch_size,
            warmup_batches: config.warmup_batches,
            seed: config.seed,
            parallel: config.parallel,
            images_per_run: config.images_per_run(),
            corpus_images: corpus.len(),
            sampled_with_replacement: with_replacement,
            batches,
        },
        rows,
        environment: Environment::capture(resolution.as_nanos() as u64),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_sample_has_zero_std() {
        let s = Stat::from_samples(&[4.5]);
        assert_eq!((s.mean_ms, s.std_ms), (4.5, 0.0));
        let s = Stat::from_samples(&[1.0, 3.0]);
        assert_eq!(s.mean_ms, 2.0);
        assert!((s.std_ms - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn composition_is_seeded() {
        let c = BenchConfig {
            seed: 9,
            ..BenchConfig::default()
        };
        let (a, rep) = compose(300, &c);
        assert!(!rep);
        assert_eq!(a, compose(300, &c).0);
        assert_eq!(a.len(), 25);
        assert!(a.iter().all(|b| b.len() == 8));
        let mut flat: Vec<usize> = a.concat();
        flat.sort();
        flat.dedup();
        assert_eq!(flat.len(), 200);
        let (small, rep) = compose(10, &c);
        assert!(rep);
        assert!(small.concat().iter().all(|&i| i < 10));
        assert_ne!(compose(300, &BenchConfig { seed: 10, ..c.clone() }).0, a);
    }
}
