//! Symbolic network graphs and their parameter / FLOP ledger.
//!
//! Headline FLOPs count one multiply-accumulate as one FLOP and include
//! only convolutions, fully connected layers and the LP/CCPP entry maps
//! (which are 1x1 convolutions). Everything else is tallied as auxiliary
//! operations on the same row.

mod config;
mod variants;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use config::{
    calibrate, target_error, CoefficientStages, CostConfig, CostTarget, SkipPlacement, Stage3Width, BASELINE_GFLOPS,
    BUILTIN_CONFIG, FBS_TARGETS, FLOP_TOLERANCE, PARAM_TOLERANCE, SKIP_TARGETS,
};
pub use variants::{build_variant, build_variant_with, Variant, ALL_VARIANTS};

/// FLOPs of one 8x8 forward or inverse DCT done as a matrix product.
pub const DCT_BLOCK_FLOPS: u64 = crate::jpeg::idct::DCT_BLOCK_FLOPS;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LayerKind {
    Conv,
    BatchNorm,
    ReLU,
    MaxPool,
    GlobalAvgPool,
    FullyConnected,
    Add,
    LPOp,
    LAOp,
    CCPPOp,
    Concat,
    Upsample,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub name: String,
    pub kind: LayerKind,
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: (usize, usize),
    pub stride: (usize, usize),
    pub padding: usize,
    pub bias: bool,
    /// Filled in by elaboration.
    pub input_res: Option<(usize, usize)>,
}

impl LayerSpec {
    pub fn new(name: impl Into<String>, kind: LayerKind, in_channels: usize, out_channels: usize) -> Self {
        Self {
            name: name.into(),
            kind,
            in_channels,
            out_channels,
            kernel: (1, 1),
            stride: (1, 1),
            padding: 0,
            bias: false,
            input_res: None,
        }
    }

    pub fn conv(name: impl Into<String>, cin: usize, cout: usize, k: usize, stride: usize, padding: usize) -> Self {
        Self {
            kernel: (k, k),
            stride: (stride, stride),
            padding,
            ..Self::new(name, LayerKind::Conv, cin, cout)
        }
    }

    pub fn with_bias(mut self) -> Self {
        self.bias = true;
        self
    }

    pub fn output_res(&self, input: (usize, usize)) -> (usize, usize) {
        match self.kind {
            LayerKind::Conv | LayerKind::MaxPool => {
                let out = |n: usize, k: usize, s: usize| (n + 2 * self.padding - k) / s + 1;
                (
                    out(input.0, self.kernel.0, self.stride.0),
                    out(input.1, self.kernel.1, self.stride.1),
                )
            }
            LayerKind::GlobalAvgPool | LayerKind::FullyConnected => (1, 1),
            LayerKind::Upsample => (input.0 * self.stride.0, input.1 * self.stride.1),
            _ => input,
        }
    }

    /// (params, headline MACs, auxiliary ops) at the elaborated resolution.
    fn cost(&self) -> (u64, u64, u64) {
        let (h, w) = self.input_res.unwrap_or((1, 1));
        let (oh, ow) = self.output_res((h, w));
        let (cin, cout) = (self.in_channels as u64, self.out_channels as u64);
        let out_elems = cout * (oh * ow) as u64;
        let in_elems = cin * (h * w) as u64;
        let k = (self.kernel.0 * self.kernel.1) as u64;
        let bias = if self.bias { cout } else { 0 };
        match self.kind {
            LayerKind::Conv => (cin * cout * k + bias, cin * k * out_elems, 0),
            LayerKind::FullyConnected => (cin * cout + bias, cin * cout, 0),
            LayerKind::BatchNorm => (2 * cout, 0, 2 * out_elems),
            LayerKind::ReLU | LayerKind::Add => (0, 0, out_elems),
            LayerKind::MaxPool => (0, 0, k * out_elems),
            LayerKind::GlobalAvgPool => (0, 0, in_elems),
            LayerKind::LPOp => (cin * cout, cin * out_elems, 0),
            LayerKind::CCPPOp => (cin * cout + cout, cin * out_elems, 2 * out_elems),
            // Scores (n products), softmax (exp, sum, divide: 3n) and the
            // weighted sum (n products) per position.
            LayerKind::LAOp => (cin, 0, 5 * in_elems),
            LayerKind::Concat | LayerKind::Upsample => (0, 0, 0),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum InputDomain {
    Rgb,
    Dct,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputDescriptor {
    pub domain: InputDomain,
    pub channels: usize,
    pub height: usize,
    pub width: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Shortcut {
    Identity,
    /// Parameter-free stride-2 subsampling of the block input.
    SubsampledIdentity,
    /// 1x1 convolution (with batch norm) matching channels and stride.
    Projection,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockSpec {
    pub in_channels: usize,
    pub width: usize,
    pub out_channels: usize,
    pub stride: usize,
    pub shortcut: Shortcut,
}

impl BlockSpec {
    /// Projection only when channel counts differ.
    pub fn bottleneck(in_channels: usize, width: usize, out_channels: usize, stride: usize) -> Self {
        let shortcut = if in_channels != out_channels {
            Shortcut::Projection
        } else if stride != 1 {
            Shortcut::SubsampledIdentity
        } else {
            Shortcut::Identity
        };
        Self {
            in_channels,
            width,
            out_channels,
            stride,
            shortcut,
        }
    }

    fn layers(&self, prefix: &str) -> Vec<LayerSpec> {
        let (cin, w, cout, s) = (self.in_channels, self.width, self.out_channels, self.stride);
        let mut v = vec![
            LayerSpec::conv(format!("{prefix}.conv1"), cin, w, 1, s, 0),
            LayerSpec::new(format!("{prefix}.bn1"), LayerKind::BatchNorm, w, w),
            LayerSpec::new(format!("{prefix}.relu1"), LayerKind::ReLU, w, w),
            LayerSpec::conv(format!("{prefix}.conv2"), w, w, 3, 1, 1),
            LayerSpec::new(format!("{prefix}.bn2"), LayerKind::BatchNorm, w, w),
            LayerSpec::new(format!("{prefix}.relu2"), LayerKind::ReLU, w, w),
            LayerSpec::conv(format!("{prefix}.conv3"), w, cout, 1, 1, 0),
            LayerSpec::new(format!("{prefix}.bn3"), LayerKind::BatchNorm, cout, cout),
        ];
        match self.shortcut {
            Shortcut::Identity => {}
            Shortcut::SubsampledIdentity => v.push(LayerSpec {
                stride: (s, s),
                ..LayerSpec::new(format!("{prefix}.subsample"), LayerKind::MaxPool, cin, cin)
            }),
            Shortcut::Projection => {
                v.push(LayerSpec::conv(format!("{prefix}.proj"), cin, cout, 1, s, 0));
                v.push(LayerSpec::new(
                    format!("{prefix}.proj_bn"),
                    LayerKind::BatchNorm,
                    cout,
                    cout,
                ));
            }
        }
        v.push(LayerSpec::new(format!("{prefix}.add"), LayerKind::Add, cout, cout));
        v.push(LayerSpec::new(format!("{prefix}.relu3"), LayerKind::ReLU, cout, cout));
        v
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageSpec {
    pub name: String,
    pub blocks: Vec<BlockSpec>,
}

/// A network: entry layers, residual stages, head. `layers` is empty until
/// [`ArchSpec::elaborate`] runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArchSpec {
    pub name: String,
    pub input: InputDescriptor,
    pub entry: Vec<LayerSpec>,
    /// Spatial size at which the entry layers start, when it differs from
    /// the input (chroma enters at half resolution).
    pub entry_res: Option<(usize, usize)>,
    pub stages: Vec<StageSpec>,
    pub num_classes: usize,
    pub layers: Vec<LayerSpec>,
    pub elaborated: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CostError {
    UnknownVariant(String),
    UnelaboratedSpec(String),
    MissingBaseline(String),
    InconsistentGraph(String),
    Config(String),
}

impl fmt::Display for CostError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CostError::UnknownVariant(v) => write!(f, "unknown variant {v:?}"),
            CostError::UnelaboratedSpec(v) => write!(f, "{v} has not been elaborated"),
            CostError::MissingBaseline(v) => write!(f, "baseline {v:?} is not among the reports"),
            CostError::InconsistentGraph(why) => write!(f, "inconsistent graph: {why}"),
            CostError::Config(why) => write!(f, "bad cost config: {why}"),
        }
    }
}

impl std::error::Error for CostError {}

pub type Result<T> = std::result::Result<T, CostError>;

impl ArchSpec {
    /// Flattens entry, stages and head into layers and propagates spatial
    /// resolution through them.
    pub fn elaborate(&mut self) -> Result<()> {
        let mut layers = self.entry.clone();
        let mut channels = layers.last().map_or(self.input.channels, |l| l.out_channels);
        for stage in &self.stages {
            for (b, block) in stage.blocks.iter().enumerate() {
                if block.in_channels != channels {
                    return Err(CostError::InconsistentGraph(format!(
                        "{}.{} expects {} channels, receives {channels}",
                        stage.name, b, block.in_channels
                    )));
                }
                layers.extend(block.layers(&format!("{}.{}", stage.name, b + 1)));
                channels = block.out_channels;
            }
        }
        layers.push(LayerSpec::new(
            "head.pool",
            LayerKind::GlobalAvgPool,
            channels,
            channels,
        ));
        layers.push(LayerSpec::new("head.fc", LayerKind::FullyConnected, channels, self.num_classes).with_bias());

        let mut res = self.entry_res.unwrap_or((self.input.height, self.input.width));
        let mut block_in = res;
        for l in layers.iter_mut() {
            let input = match l.kind {
                // Shortcut layers read the block input, not the main path.
                LayerKind::MaxPool if l.name.ends_with(".subsample") => block_in,
                LayerKind::Conv if l.name.ends_with(".proj") => block_in,
                LayerKind::BatchNorm if l.name.ends_with(".proj_bn") => res,
                _ => {
                    if l.name.ends_with(".conv1") {
                        block_in = res;
                    }
                    res
                }
            };
            l.input_res = Some(input);
            let out = l.output_res(input);
            match l.kind {
                LayerKind::MaxPool if l.name.ends_with(".subsample") => {
                    if out != res {
                        return Err(CostError::InconsistentGraph(format!("{} shape mismatch", l.name)));
                    }
                }
                LayerKind::Conv if l.name.ends_with(".proj") => {
                    if out != res {
                        return Err(CostError::InconsistentGraph(format!("{} shape mismatch", l.name)));
                    }
                }
                _ => res = out,
            }
        }
        self.layers = layers;
        self.elaborated = true;
        Ok(())
    }

    /// Spatial size after the last stage.
    pub fn final_resolution(&self) -> Option<(usize, usize)> {
        self.layers
            .iter()
            .rev()
            .find(|l| l.kind == LayerKind::GlobalAvgPool)
            .and_then(|l| l.input_res)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostRow {
    pub name: String,
    pub kind: LayerKind,
    pub params: u64,
    pub flops: u64,
    pub aux_ops: u64,
    /// (channels, height, width)
    pub output_shape: (usize, usize, usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub name: String,
    pub rows: Vec<CostRow>,
    pub total_params: u64,
    pub total_flops: u64,
    pub total_aux_ops: u64,
    /// Entry layers (stem or DCT entry), already included in the totals.
    pub entry_params: u64,
    pub entry_flops: u64,
    pub entry_aux_ops: u64,
    pub conventions: Vec<String>,
}

impl CostReport {
    pub fn gflops(&self) -> f64 {
        self.total_flops as f64 / 1e9
    }

    pub fn mparams(&self) -> f64 {
        self.total_params as f64 / 1e6
    }
}

pub fn conventions() -> Vec<String> {
    vec![
        "1 multiply-accumulate = 1 FLOP".into(),
        "headline FLOPs: Conv, FullyConnected, LPOp and CCPPOp multiply-accumulates".into(),
        "auxiliary ops: BatchNorm 2/elem, ReLU 1/elem, Add 1/elem, MaxPool k*k/output, GlobalAvgPool 1/input, LAOp 5/input (scores, softmax, weighted sum), CCPPOp 2/output (bias, rectification)".into(),
        "params: weights + biases + batch-norm scale/shift pairs".into(),
        "downsampling bottlenecks stride their first 1x1 convolution".into(),
    ]
}

pub fn count(spec: &ArchSpec) -> Result<CostReport> {
    if !spec.elaborated {
        return Err(CostError::UnelaboratedSpec(spec.name.clone()));
    }
    let entry_len = spec.entry.len();
    let mut rows = Vec::with_capacity(spec.layers.len());
    for l in &spec.layers {
        let (params, flops, aux_ops) = l.cost();
        let (oh, ow) = l.output_res(l.input_res.unwrap_or((1, 1)));
        rows.push(CostRow {
            name: l.name.clone(),
            kind: l.kind,
            params,
            flops,
            aux_ops,
            output_shape: (l.out_channels, oh, ow),
        });
    }
    let sum = |rows: &[CostRow], f: fn(&CostRow) -> u64| rows.iter().map(f).sum::<u64>();
    let entry = &rows[..entry_len];
    Ok(CostReport {
        name: spec.name.clone(),
        total_params: sum(&rows, |r| r.params),
        total_flops: sum(&rows, |r| r.flops),
        total_aux_ops: sum(&rows, |r| r.aux_ops),
        entry_params: sum(entry, |r| r.params),
        entry_flops: sum(entry, |r| r.flops),
        entry_aux_ops: sum(entry, |r| r.aux_ops),
        rows,
        conventions: conventions(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub name: String,
    pub gflops: f64,
    pub mparams: f64,
    pub flops_ratio: f64,
    pub params_ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub baseline: String,
    pub rows: Vec<ComparisonRow>,
}

/// FLOP and parameter ratios of every report against `baseline`.
pub fn compare(reports: &[CostReport], baseline: &str) -> Result<Comparison> {
    let base = reports
        .iter()
        .find(|r| r.name == baseline)
        .ok_or_else(|| CostError::MissingBaseline(baseline.to_string()))?;
    let rows = reports
        .iter()
        .map(|r| ComparisonRow {
            name: r.name.clone(),
            gflops: r.gflops(),
            mparams: r.mparams(),
            flops_ratio: r.total_flops as f64 / base.total_flops as f64,
            params_ratio: r.total_params as f64 / base.total_params as f64,
        })
        .collect();
    Ok(Comparison {
        baseline: baseline.to_string(),
        rows,
    })
}

impl Comparison {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("variant,gflops,mparams,flops_ratio,params_ratio\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{},{:.4},{:.4},{:.4},{:.4}\n",
                r.name, r.gflops, r.mparams, r.flops_ratio, r.params_ratio
            ));
        }
        s
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data")
    }
}

/// Header plus one line per report, integer counts and rounded G/M figures.
pub fn reports_to_csv(reports: &[CostReport]) -> String {
    let mut s = String::from("variant,params,flops,gflops,mparams,entry_params,entry_flops,aux_ops\n");
    for r in reports {
        s.push_str(&format!(
            "{},{},{},{:.4},{:.4},{},{},{}\n",
            r.name,
            r.total_params,
            r.total_flops,
            r.gflops(),
            r.mparams(),
            r.entry_params,
            r.entry_flops,
            r.total_aux_ops
        ));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pointwise_conv_closed_form() {
        let mut l = LayerSpec::conv("c", 192, 64, 1, 1, 0).with_bias();
        l.input_res = Some((28, 28));
        let (p, f, _) = l.cost();
        assert_eq!(p, 192 * 64 + 64);
        assert_eq!(p, 12_352);
        assert_eq!(f, 12_288 * 784);
    }

    #[test]
    fn conv_output_resolution() {
        let stem = LayerSpec::conv("stem", 3, 64, 7, 2, 3);
        assert_eq!(stem.output_res((224, 224)), (112, 112));
        let pool = LayerSpec {
            kernel: (3, 3),
            stride: (2, 2),
            padding: 1,
            ..LayerSpec::new("pool", LayerKind::MaxPool, 64, 64)
        };
        assert_eq!(pool.output_res((112, 112)), (56, 56));
    }

    #[test]
    fn count_requires_elaboration() {
        let spec = build_variant_with(Variant::ResNet50, &CostConfig::builtin()).unwrap();
        let mut raw = spec.clone();
        raw.elaborated = false;
        assert!(matches!(count(&raw), Err(CostError::UnelaboratedSpec(_))));
        let r = count(&spec).unwrap();
        assert_eq!(r.total_params, r.rows.iter().map(|x| x.params).sum::<u64>());
        assert_eq!(r.total_flops, r.rows.iter().map(|x| x.flops).sum::<u64>());
    }

    #[test]
    fn compare_needs_baseline() {
        let r = count(&build_variant(Variant::ResNet50).unwrap()).unwrap();
        let c = compare(std::slice::from_ref(&r), "resnet50").unwrap();
        assert_eq!(c.rows.len(), 1);
        assert_eq!(c.rows[0].flops_ratio, 1.0);
        assert!(matches!(compare(&[r], "vgg"), Err(CostError::MissingBaseline(_))));
    }
}
