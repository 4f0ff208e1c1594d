//! Versioned width and stride configuration for the coefficient-input
//! networks, and the search that produces it.

use serde::{Deserialize, Serialize};

use super::variants::STANDARD_STAGES;
use super::{build_variant_with, count, CostError, Result, Variant};

/// The committed configuration, embedded at build time.
pub const BUILTIN_CONFIG: &str = include_str!("../../config/variants.toml");

const CONFIG_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stage3Width {
    /// Coefficients kept per component.
    pub n: usize,
    pub width: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoefficientStages {
    /// Stage 2 bottleneck width is this multiple of `n`.
    pub stage2_width_per_coefficient: usize,
    pub stage2_out: usize,
    pub stage3_out: usize,
    /// Global block indices (from 0 at the first block of stage 2) that
    /// use stride 2.
    pub downsample_blocks: Vec<usize>,
    pub stage3_width: Vec<Stage3Width>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkipPlacement {
    /// Number of leading stages replaced by the entry (stem included).
    pub skipped: usize,
    /// Block indices within the retained stages that use stride 2.
    pub downsample_blocks: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostConfig {
    pub version: u32,
    pub coefficient_stages: CoefficientStages,
    pub skip: Vec<SkipPlacement>,
}

impl CostConfig {
    pub fn builtin() -> CostConfig {
        CostConfig::from_toml(BUILTIN_CONFIG).expect("embedded config parses")
    }

    pub fn from_toml(text: &str) -> Result<CostConfig> {
        let config: CostConfig = toml::from_str(text).map_err(|e| CostError::Config(e.to_string()))?;
        if config.version != CONFIG_VERSION {
            return Err(CostError::Config(format!(
                "version {} (expected {CONFIG_VERSION})",
                config.version
            )));
        }
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn stage3_width(&self, n: usize) -> Result<usize> {
        self.coefficient_stages
            .stage3_width
            .iter()
            .find(|w| w.n == n)
            .map(|w| w.width)
            .ok_or_else(|| CostError::Config(format!("no stage 3 width for n={n}")))
    }

    pub fn skip_placement(&self, skipped: usize) -> Result<&[usize]> {
        self.skip
            .iter()
            .find(|s| s.skipped == skipped)
            .map(|s| s.downsample_blocks.as_slice())
            .ok_or_else(|| CostError::Config(format!("no stride placement for {skipped} skipped stages")))
    }
}

/// A published total the search aims for.
#[derive(Clone, Copy, Debug)]
pub struct CostTarget {
    pub variant: Variant,
    pub gflops: f64,
    pub mparams: f64,
    /// FLOP ratio against the baseline, with its own tolerance, when the
    /// published text states one more precisely than the rounded totals.
    pub flop_ratio: Option<(f64, f64)>,
}

pub const BASELINE_GFLOPS: f64 = 3.86;
pub const FLOP_TOLERANCE: f64 = 0.03;
pub const PARAM_TOLERANCE: f64 = 0.01;

pub const FBS_TARGETS: [CostTarget; 3] = [
    CostTarget {
        variant: Variant::Fbs(16),
        gflops: 3.18,
        mparams: 25.6,
        flop_ratio: Some((1.0 - 0.1762, 0.011)),
    },
    CostTarget {
        variant: Variant::Fbs(32),
        gflops: 3.68,
        mparams: 26.2,
        flop_ratio: Some((1.0 - 0.0466, 0.011)),
    },
    CostTarget {
        variant: Variant::Fbs(64),
        gflops: 5.40,
        mparams: 28.4,
        flop_ratio: Some((1.399, 0.03)),
    },
];

pub const SKIP_TARGETS: [CostTarget; 4] = [
    CostTarget {
        variant: Variant::SkipStages(1),
        gflops: 3.20,
        mparams: 25.6,
        flop_ratio: None,
    },
    CostTarget {
        variant: Variant::SkipStages(2),
        gflops: 2.86,
        mparams: 25.1,
        flop_ratio: Some((1.0 - 0.2591, 0.01)),
    },
    CostTarget {
        variant: Variant::SkipStages(3),
        gflops: 8.26,
        mparams: 23.9,
        flop_ratio: None,
    },
    CostTarget {
        variant: Variant::SkipStages(4),
        gflops: 10.76,
        mparams: 15.8,
        flop_ratio: None,
    },
];

/// Worst normalized miss against `target`; at most 1.0 means every
/// criterion is inside its tolerance.
pub fn target_error(target: &CostTarget, flops: u64, params: u64, baseline_flops: u64) -> f64 {
    let f = flops as f64 / 1e9;
    let p = params as f64 / 1e6;
    let mut err =
        ((f / target.gflops - 1.0).abs() / FLOP_TOLERANCE).max((p / target.mparams - 1.0).abs() / PARAM_TOLERANCE);
    if let Some((ratio, tol)) = target.flop_ratio {
        err = err.max((flops as f64 / baseline_flops as f64 - ratio).abs() / tol);
    }
    err
}

const WIDTH_STEP: usize = 8;
const MAX_WIDTH: usize = 512;

/// Re-derives the stage 3 widths and the skip stride placements that best
/// match the published totals, keeping the fixed structure of `base`.
///
/// Widths are searched in steps of 8, smallest first; placements use at
/// most two stride-2 blocks, fewest strides first and then lexicographic
/// order. Ties keep the earlier candidate.
pub fn calibrate(base: &CostConfig) -> Result<CostConfig> {
    let mut config = base.clone();
    let baseline = count(&build_variant_with(Variant::ResNet50, &config)?)?.total_flops;

    let mut widths = Vec::new();
    for target in &FBS_TARGETS {
        let Variant::Fbs(n) = target.variant else {
            unreachable!()
        };
        let mut best: Option<(f64, usize)> = None;
        for width in (WIDTH_STEP..=MAX_WIDTH).step_by(WIDTH_STEP) {
            set_width(&mut config, n, width);
            let r = count(&build_variant_with(target.variant, &config)?)?;
            let err = target_error(target, r.total_flops, r.total_params, baseline);
            if best.is_none_or(|(e, _)| err < e) {
                best = Some((err, width));
            }
        }
        let width = best.expect("non-empty search").1;
        set_width(&mut config, n, width);
        widths.push(Stage3Width { n, width });
    }
    config.coefficient_stages.stage3_width = widths;

    let mut placements = Vec::new();
    for target in &SKIP_TARGETS {
        let Variant::SkipStages(k) = target.variant else {
            unreachable!()
        };
        let blocks: usize = STANDARD_STAGES[k - 1..].iter().map(|s| s.1).sum();
        let mut best: Option<(f64, Vec<usize>)> = None;
        for candidate in stride_sets(blocks) {
            set_placement(&mut config, k, candidate.clone());
            let r = count(&build_variant_with(target.variant, &config)?)?;
            let err = target_error(target, r.total_flops, r.total_params, baseline);
            if best.as_ref().is_none_or(|(e, _)| err < *e) {
                best = Some((err, candidate));
            }
        }
        let chosen = best.expect("non-empty search").1;
        set_placement(&mut config, k, chosen.clone());
        placements.push(SkipPlacement {
            skipped: k,
            downsample_blocks: chosen,
        });
    }
    config.skip = placements;
    Ok(config)
}

fn set_width(config: &mut CostConfig, n: usize, width: usize) {
    let widths = &mut config.coefficient_stages.stage3_width;
    match widths.iter_mut().find(|w| w.n == n) {
        Some(w) => w.width = width,
        None => widths.push(Stage3Width { n, width }),
    }
}

fn set_placement(config: &mut CostConfig, skipped: usize, blocks: Vec<usize>) {
    match config.skip.iter_mut().find(|s| s.skipped == skipped) {
        Some(s) => s.downsample_blocks = blocks,
        None => config.skip.push(SkipPlacement {
            skipped,
            downsample_blocks: blocks,
        }),
    }
}

fn stride_sets(blocks: usize) -> Vec<Vec<usize>> {
    let mut sets = vec![vec![]];
    sets.extend((0..blocks).map(|i| vec![i]));
    for i in 0..blocks {
        for j in i + 1..blocks {
            sets.push(vec![i, j]);
        }
    }
    sets
}
