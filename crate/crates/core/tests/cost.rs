use dctnet::cost::{build_variant, compare, count, reports_to_csv, CostConfig, Variant, ALL_VARIANTS};

// Counts pinned when the widths were calibrated; any change to the layer
// accounting shows up here first.
const FROZEN: [(&str, u64, u64); 10] = [
    ("resnet50", 3_857_973_248, 25_557_032),
    ("upsampling-rfa", 5_454_974_976, 28_377_576),
    ("fbs32", 3_659_878_400, 26_085_416),
    ("fbs16", 3_154_907_136, 25_440_200),
    ("lp64", 3_248_635_904, 25_560_168),
    ("la64", 3_239_002_112, 25_548_072),
    ("ccpp64", 3_248_635_904, 25_560_232),
    ("skip2-ccpp", 2_863_284_224, 25_274_856),
    ("skip3-ccpp", 8_261_419_008, 23_834_216),
    ("skip4-ccpp", 10_766_204_928, 15_802_216),
];

#[test]
fn frozen_counts() {
    for (name, flops, params) in FROZEN {
        let r = count(&build_variant(name.parse().unwrap()).unwrap()).unwrap();
        assert_eq!((r.total_flops, r.total_params), (flops, params), "{name}");
    }
}

// Torchvision's ResNet-50 has 25,557,032 parameters; counted by hand from
// the layer list rather than from the builder.
#[test]
fn resnet50_params_by_hand() {
    let conv = |cin: u64, cout: u64, k: u64| cin * cout * k * k;
    let bn = |c: u64| 2 * c;
    let mut p = conv(3, 64, 7) + bn(64);
    let mut cin = 64;
    for (width, blocks) in [(64u64, 3), (128, 4), (256, 6), (512, 3)] {
        let out = width * 4;
        for b in 0..blocks {
            p += conv(cin, width, 1) + bn(width) + conv(width, width, 3) + bn(width) + conv(width, out, 1) + bn(out);
            if b == 0 {
                p += conv(cin, out, 1) + bn(out);
            }
            cin = out;
        }
    }
    p += 2048 * 1000 + 1000;
    assert_eq!(p, 25_557_032);
    assert_eq!(
        count(&build_variant(Variant::ResNet50).unwrap()).unwrap().total_params,
        p
    );
}

// Every variant ends on the 7x7 grid except skip3 and skip4: dropping the
// third stage feeds the 28x28 input past the last stride-2 blocks, so those
// two end at 14x14 and 28x28. That is what makes their FLOPs jump.
#[test]
fn final_resolutions() {
    for v in ALL_VARIANTS {
        let expected = match v {
            Variant::SkipStages(3) => (14, 14),
            Variant::SkipStages(4) => (28, 28),
            _ => (7, 7),
        };
        assert_eq!(build_variant(v).unwrap().final_resolution(), Some(expected), "{v}");
    }
}

#[test]
fn csv_has_one_row_per_report() {
    let reports: Vec<_> = ALL_VARIANTS
        .iter()
        .map(|&v| count(&build_variant(v).unwrap()).unwrap())
        .collect();
    let csv = reports_to_csv(&reports);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 11);
    let header: Vec<&str> = lines[0].split(',').collect();
    for (line, (name, flops, params)) in lines[1..].iter().zip(FROZEN) {
        let cols: Vec<&str> = line.split(',').collect();
        assert_eq!(cols.len(), header.len());
        assert_eq!(
            (cols[0], cols[1], cols[2]),
            (name, params.to_string().as_str(), flops.to_string().as_str())
        );
    }
}

#[test]
fn comparison_json_roundtrips() {
    let reports: Vec<_> = [Variant::ResNet50, Variant::Fbs(16)]
        .iter()
        .map(|&v| count(&build_variant(v).unwrap()).unwrap())
        .collect();
    let c = compare(&reports, "resnet50").unwrap();
    assert_eq!(c.rows[0].flops_ratio, 1.0);
    let back: dctnet::cost::Comparison = serde_json::from_str(&c.to_json()).unwrap();
    assert_eq!(back, c);
    assert!(compare(&reports, "vgg16").is_err());
}

#[test]
fn builtin_config_file_is_the_default() {
    let text = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/config/variants.toml")).unwrap();
    assert_eq!(CostConfig::from_toml(&text).unwrap(), CostConfig::builtin());
}
