use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{
    ArchSpec, BlockSpec, CostConfig, CostError, InputDescriptor, InputDomain, LayerKind, LayerSpec, Result, StageSpec,
};

/// Bottleneck widths and block counts of the four residual stages.
pub(crate) const STANDARD_STAGES: [(usize, usize); 4] = [(64, 3), (128, 4), (256, 6), (512, 3)];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    ResNet50,
    UpsamplingRfa,
    /// Retained coefficients per component (16, 32 or 64).
    Fbs(usize),
    Lp64,
    La64,
    Ccpp64,
    /// Stem plus the first `k - 1` residual stages replaced by a CCPP entry.
    SkipStages(usize),
}

/// Every distinct graph, in report order.
pub const ALL_VARIANTS: [Variant; 10] = [
    Variant::ResNet50,
    Variant::UpsamplingRfa,
    Variant::Fbs(32),
    Variant::Fbs(16),
    Variant::Lp64,
    Variant::La64,
    Variant::Ccpp64,
    Variant::SkipStages(2),
    Variant::SkipStages(3),
    Variant::SkipStages(4),
];

impl Variant {
    /// Collapses aliases: FBS with all 64 coefficients is the upsampling
    /// network, skipping one stage with CCPP is the CCPP entry network.
    pub fn canonical(self) -> Variant {
        match self {
            Variant::Fbs(64) => Variant::UpsamplingRfa,
            Variant::SkipStages(1) => Variant::Ccpp64,
            v => v,
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Variant::ResNet50 => f.write_str("resnet50"),
            Variant::UpsamplingRfa => f.write_str("upsampling-rfa"),
            Variant::Fbs(n) => write!(f, "fbs{n}"),
            Variant::Lp64 => f.write_str("lp64"),
            Variant::La64 => f.write_str("la64"),
            Variant::Ccpp64 => f.write_str("ccpp64"),
            Variant::SkipStages(k) => write!(f, "skip{k}-ccpp"),
        }
    }
}

impl FromStr for Variant {
    type Err = CostError;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase().replace('_', "-");
        let v = match lower.as_str() {
            "resnet50" | "resnet-50" => Variant::ResNet50,
            "upsampling-rfa" | "rfa" => Variant::UpsamplingRfa,
            "lp64" => Variant::Lp64,
            "la64" => Variant::La64,
            "ccpp64" => Variant::Ccpp64,
            other => {
                if let Some(n) = other.strip_prefix("fbs").and_then(|n| n.parse().ok()) {
                    Variant::Fbs(n)
                } else if let Some(k) = other
                    .strip_prefix("skip")
                    .and_then(|r| r.strip_suffix("-ccpp"))
                    .and_then(|k| k.parse().ok())
                {
                    Variant::SkipStages(k)
                } else {
                    return Err(CostError::UnknownVariant(s.to_string()));
                }
            }
        };
        match v {
            Variant::Fbs(n) if ![16, 32, 64].contains(&n) => Err(CostError::UnknownVariant(s.to_string())),
            Variant::SkipStages(k) if !(1..=4).contains(&k) => Err(CostError::UnknownVariant(s.to_string())),
            v => Ok(v),
        }
    }
}

pub fn build_variant(variant: Variant) -> Result<ArchSpec> {
    build_variant_with(variant, &CostConfig::builtin())
}

/// Builds and elaborates the graph of `variant` using the widths and
/// stride placements in `config`.
pub fn build_variant_with(variant: Variant, config: &CostConfig) -> Result<ArchSpec> {
    let mut spec = match variant.canonical() {
        Variant::ResNet50 => resnet50(),
        Variant::UpsamplingRfa => coefficient_network(variant.canonical(), 64, config)?,
        Variant::Fbs(n) => coefficient_network(variant.canonical(), n, config)?,
        Variant::Lp64 => skip_network(variant.canonical(), 1, LayerKind::LPOp, config)?,
        Variant::La64 => skip_network(variant.canonical(), 1, LayerKind::LAOp, config)?,
        Variant::Ccpp64 => skip_network(variant.canonical(), 1, LayerKind::CCPPOp, config)?,
        Variant::SkipStages(k) => skip_network(variant.canonical(), k, LayerKind::CCPPOp, config)?,
    };
    spec.elaborate()?;
    Ok(spec)
}

fn stage(
    name: String,
    cin: usize,
    width: usize,
    out: usize,
    blocks: usize,
    first_global: usize,
    strided: &[usize],
) -> StageSpec {
    let blocks = (0..blocks)
        .map(|b| {
            let stride = if strided.contains(&(first_global + b)) { 2 } else { 1 };
            BlockSpec::bottleneck(if b == 0 { cin } else { out }, width, out, stride)
        })
        .collect();
    StageSpec { name, blocks }
}

fn resnet50() -> ArchSpec {
    let entry = vec![
        LayerSpec::conv("stem.conv", 3, 64, 7, 2, 3),
        LayerSpec::new("stem.bn", LayerKind::BatchNorm, 64, 64),
        LayerSpec::new("stem.relu", LayerKind::ReLU, 64, 64),
        LayerSpec {
            kernel: (3, 3),
            stride: (2, 2),
            padding: 1,
            ..LayerSpec::new("stem.pool", LayerKind::MaxPool, 64, 64)
        },
    ];
    let mut stages = Vec::new();
    let (mut cin, mut global) = (64, 0);
    for (i, &(w, n)) in STANDARD_STAGES.iter().enumerate() {
        let strided = if i == 0 { vec![] } else { vec![global] };
        stages.push(stage(format!("conv{}", i + 2), cin, w, 4 * w, n, global, &strided));
        cin = 4 * w;
        global += n;
    }
    ArchSpec {
        name: Variant::ResNet50.to_string(),
        input: InputDescriptor {
            domain: InputDomain::Rgb,
            channels: 3,
            height: 224,
            width: 224,
        },
        entry,
        entry_res: None,
        stages,
        num_classes: 1000,
        layers: Vec::new(),
        elaborated: false,
    }
}

/// Chroma upsampling and concatenation of `n` coefficients per component
/// on the 28x28 grid of a 224x224 crop, then batch norm.
fn dct_entry(n: usize) -> Vec<LayerSpec> {
    vec![
        LayerSpec {
            stride: (2, 2),
            ..LayerSpec::new("entry.upsample_chroma", LayerKind::Upsample, 2 * n, 2 * n)
        },
        LayerSpec::new("entry.concat", LayerKind::Concat, 3 * n, 3 * n),
        LayerSpec::new("entry.bn", LayerKind::BatchNorm, 3 * n, 3 * n),
    ]
}

fn dct_input(channels: usize) -> InputDescriptor {
    InputDescriptor {
        domain: InputDomain::Dct,
        channels,
        height: 28,
        width: 28,
    }
}

fn coefficient_network(variant: Variant, n: usize, config: &CostConfig) -> Result<ArchSpec> {
    let c = &config.coefficient_stages;
    let w3 = config.stage3_width(n)?;
    let down = &c.downsample_blocks;
    let mut stages = vec![
        stage(
            "conv2".into(),
            3 * n,
            c.stage2_width_per_coefficient * n,
            c.stage2_out,
            3,
            0,
            down,
        ),
        stage("conv3".into(), c.stage2_out, w3, c.stage3_out, 4, 3, down),
    ];
    let mut cin = c.stage3_out;
    let mut global = 7;
    for (i, &(w, blocks)) in STANDARD_STAGES[2..].iter().enumerate() {
        stages.push(stage(format!("conv{}", i + 4), cin, w, 4 * w, blocks, global, down));
        cin = 4 * w;
        global += blocks;
    }
    Ok(ArchSpec {
        name: variant.to_string(),
        input: dct_input(3 * n),
        entry: dct_entry(n),
        entry_res: Some((14, 14)),
        stages,
        num_classes: 1000,
        layers: Vec::new(),
        elaborated: false,
    })
}

fn skip_network(variant: Variant, skipped: usize, op: LayerKind, config: &CostConfig) -> Result<ArchSpec> {
    let down = config.skip_placement(skipped)?;
    let retained = &STANDARD_STAGES[skipped - 1..];
    let entry_out = match op {
        LayerKind::LAOp => 192 / 3,
        _ => retained[0].0,
    };
    let mut entry = dct_entry(64);
    let name = match op {
        LayerKind::LPOp => "entry.lp",
        LayerKind::LAOp => "entry.la",
        _ => "entry.ccpp",
    };
    entry.push(LayerSpec::new(name, op, 192, entry_out));
    let mut stages = Vec::new();
    let (mut cin, mut global) = (entry_out, 0);
    for (i, &(w, blocks)) in retained.iter().enumerate() {
        stages.push(stage(
            format!("conv{}", i + skipped + 1),
            cin,
            w,
            4 * w,
            blocks,
            global,
            down,
        ));
        cin = 4 * w;
        global += blocks;
    }
    Ok(ArchSpec {
        name: variant.to_string(),
        input: dct_input(192),
        entry,
        entry_res: Some((14, 14)),
        stages,
        num_classes: 1000,
        layers: Vec::new(),
        elaborated: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_roundtrip() {
        for v in ALL_VARIANTS {
            assert_eq!(v.to_string().parse::<Variant>().unwrap(), v);
        }
        assert_eq!("fbs64".parse::<Variant>().unwrap().canonical(), Variant::UpsamplingRfa);
        assert_eq!("skip1-ccpp".parse::<Variant>().unwrap().canonical(), Variant::Ccpp64);
        assert!(matches!("fbs8".parse::<Variant>(), Err(CostError::UnknownVariant(_))));
        assert!(matches!("vgg16".parse::<Variant>(), Err(CostError::UnknownVariant(_))));
    }

    #[test]
    fn resnet50_structure() {
        let spec = build_variant(Variant::ResNet50).unwrap();
        let counts: Vec<usize> = spec.stages.iter().map(|s| s.blocks.len()).collect();
        assert_eq!(counts, vec![3, 4, 6, 3]);
        assert_eq!(spec.final_resolution(), Some((7, 7)));
        let fc = spec.layers.last().unwrap();
        assert_eq!((fc.in_channels, fc.out_channels), (2048, 1000));
    }

    #[test]
    fn skip2_entry_feeds_stage3() {
        let spec = build_variant(Variant::SkipStages(2)).unwrap();
        let op = spec.entry.last().unwrap();
        assert_eq!(
            (op.kind, op.in_channels, op.out_channels),
            (LayerKind::CCPPOp, 192, 128)
        );
        assert_eq!(spec.stages[0].name, "conv3");
        assert_eq!(spec.stages[0].blocks[0].in_channels, 128);
    }

    #[test]
    fn fbs64_is_upsampling_rfa() {
        let a = super::super::count(&build_variant(Variant::Fbs(64)).unwrap()).unwrap();
        let b = super::super::count(&build_variant(Variant::UpsamplingRfa).unwrap()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn fbs_cost_grows_with_n() {
        let costs: Vec<_> = [16, 32, 64]
            .iter()
            .map(|&n| super::super::count(&build_variant(Variant::Fbs(n)).unwrap()).unwrap())
            .collect();
        for w in costs.windows(2) {
            assert!(w[0].total_flops < w[1].total_flops);
            assert!(w[0].total_params <= w[1].total_params);
        }
    }
}
