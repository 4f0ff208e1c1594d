use std::fs;
use std::path::Path;

use dctnet::harness::{
    emit_report, load_corpus, prepare_corpus, read_manifest, run_bench, synth_corpus, BenchConfig, BenchMode,
    BenchReport, HarnessError, ManifestLine, PrepareOptions, ReportFormat,
};
use dctnet::jpeg::encoder::{encode_rgb, EncodeOptions};
use dctnet::jpeg::parse_headers;

fn prepared(dir: &Path, count: usize) -> std::path::PathBuf {
    let raw = dir.join("raw");
    synth_corpus(&raw, count, 11).unwrap();
    let out = dir.join("prepared");
    prepare_corpus(&raw, &out, &PrepareOptions::default()).unwrap();
    out
}

fn small_config(corpus: &Path) -> BenchConfig {
    BenchConfig {
        corpus_dir: corpus.to_path_buf(),
        runs: 2,
        batches_per_run: 3,
        batch_size: 2,
        warmup_batches: 1,
        seed: 3,
        parallel: false,
        modes: vec![BenchMode::FullDecodeRgb, BenchMode::PartialDecodeDct],
    }
}

#[test]
fn prepare_crops_and_records() {
    let dir = tempfile::tempdir().unwrap();
    let raw = dir.path().join("raw");
    synth_corpus(&raw, 6, 1).unwrap();
    let small = encode_rgb(200, 200, &vec![90; 200 * 200 * 3], &EncodeOptions::default());
    fs::write(raw.join("tiny.jpg"), small).unwrap();
    fs::write(raw.join("broken.jpg"), b"not a jpeg").unwrap();
    fs::write(raw.join("notes.txt"), b"ignored").unwrap();
    let out = dir.path().join("out");
    let manifest = prepare_corpus(&raw, &out, &PrepareOptions::default()).unwrap();

    assert_eq!(manifest.lines.len(), 8);
    assert_eq!(manifest.images().count(), 6);
    assert_eq!(manifest.skipped(), 2);
    assert!(manifest.lines.iter().any(|l| matches!(l,
        ManifestLine::Skipped { source, reason } if source == "tiny.jpg" && reason.contains("smaller"))));
    for e in manifest.images() {
        assert_eq!((e.width, e.height), (224, 224));
        assert_eq!(e.offset.0 % 16, 0);
        assert_eq!(e.offset.1 % 16, 0);
        let parsed = parse_headers(&fs::read(out.join(&e.file)).unwrap()).unwrap();
        assert_eq!((parsed.width, parsed.height), (224, 224));
        let q: u8 = e
            .source
            .split("_q")
            .nth(1)
            .unwrap()
            .trim_end_matches(".jpg")
            .parse()
            .unwrap();
        assert_eq!(e.quality, q, "source quality carried over");
    }
    assert_eq!(read_manifest(&out).unwrap(), manifest);
    assert_eq!(load_corpus(&out).unwrap().len(), 6);
}

#[test]
fn prepare_rejects_empty_input() {
    let dir = tempfile::tempdir().unwrap();
    let err = prepare_corpus(dir.path(), &dir.path().join("o"), &PrepareOptions::default()).unwrap_err();
    assert!(matches!(err, HarnessError::EmptyCorpus(_)));
}

#[test]
fn prepare_reports_unwritable_output() {
    let dir = tempfile::tempdir().unwrap();
    let raw = dir.path().join("raw");
    synth_corpus(&raw, 1, 1).unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, b"x").unwrap();
    let err = prepare_corpus(&raw, &blocker.join("sub"), &PrepareOptions::default()).unwrap_err();
    assert!(matches!(err, HarnessError::UnwritableOutput { .. }));
}

#[test]
fn missing_manifest_is_not_prepared() {
    let dir = tempfile::tempdir().unwrap();
    let err = run_bench(&small_config(dir.path())).unwrap_err();
    assert!(matches!(err, HarnessError::CorpusNotPrepared(_)));
    assert!(err.to_string().contains("corpus not prepared"));
}

#[test]
fn empty_prepared_corpus_is_too_small() {
    let dir = tempfile::tempdir().unwrap();
    let raw = dir.path().join("raw");
    fs::create_dir_all(&raw).unwrap();
    fs::write(
        raw.join("tiny.jpg"),
        encode_rgb(64, 64, &vec![0; 64 * 64 * 3], &EncodeOptions::default()),
    )
    .unwrap();
    let out = dir.path().join("out");
    prepare_corpus(&raw, &out, &PrepareOptions::default()).unwrap();
    let err = run_bench(&small_config(&out)).unwrap_err();
    assert!(matches!(err, HarnessError::CorpusTooSmall { images: 0, .. }));
}

#[test]
fn report_shape_and_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = prepared(dir.path(), 4);
    let mut config = small_config(&corpus);
    config.modes.push("dct+fbs=lowest:16".parse().unwrap());
    config.modes.push("dct+ccpp".parse().unwrap());
    let report = run_bench(&config).unwrap();

    assert_eq!(report.rows.len(), 4);
    assert!(report.protocol.sampled_with_replacement);
    assert_eq!(report.protocol.images_per_run, 6);
    for r in &report.rows {
        for run in 0..config.runs {
            let sum = r.run_preprocessing_ms[run] + r.run_pipeline_ms[run];
            assert!((r.run_total_ms[run] - sum).abs() < 1e-9);
        }
        assert!(r.total.mean_ms >= r.preprocessing.mean_ms);
        assert!(r.preprocessing.std_ms >= 0.0 && r.fps > 0.0);
        let fps = 6.0 / (r.total.mean_ms / 1e3);
        assert!((r.fps - fps).abs() < 1e-9 * fps);
    }

    let json = emit_report(&report, ReportFormat::Json);
    let back: BenchReport = serde_json::from_str(&json).unwrap();
    assert_eq!(back, report);

    let text = emit_report(&report, ReportFormat::Text);
    let header = text.lines().next().unwrap();
    let cols = ["Mode", "Preprocessing", "Pipeline", "Total", "FPS"];
    let pos: Vec<usize> = cols.iter().map(|c| header.find(c).unwrap()).collect();
    assert!(pos.windows(2).all(|w| w[0] < w[1]));
    assert!(text.contains("±"));
    assert!(text.contains("host:"));

    let csv = emit_report(&report, ReportFormat::Csv);
    assert_eq!(csv.lines().filter(|l| !l.starts_with('#')).count(), 5);
}

#[test]
fn single_sample_std_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = prepared(dir.path(), 2);
    let config = BenchConfig {
        runs: 1,
        batches_per_run: 1,
        ..small_config(&corpus)
    };
    let report = run_bench(&config).unwrap();
    for r in &report.rows {
        assert_eq!(r.preprocessing.std_ms, 0.0);
        assert_eq!(r.total.std_ms, 0.0);
    }
}

#[test]
fn composition_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = prepared(dir.path(), 8);
    let config = small_config(&corpus);
    let a = run_bench(&config).unwrap();
    let b = run_bench(&config).unwrap();
    assert_eq!(a.protocol.batches, b.protocol.batches);
    assert!(!a.protocol.sampled_with_replacement);
    let c = run_bench(&BenchConfig { seed: 4, ..config }).unwrap();
    assert_ne!(a.protocol.batches, c.protocol.batches);
}

#[test]
fn parallel_mode_reports_per_image_time() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = prepared(dir.path(), 4);
    let config = BenchConfig {
        parallel: true,
        ..small_config(&corpus)
    };
    let report = run_bench(&config).unwrap();
    assert!(report.rows.iter().all(|r| r.per_image.is_some()));
    let serial = run_bench(&small_config(&corpus)).unwrap();
    assert!(serial.rows.iter().all(|r| r.per_image.is_none()));
    assert_eq!(report.protocol.batches, serial.protocol.batches);
}
