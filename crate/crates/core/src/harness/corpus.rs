//! Corpus preparation: center crops re-encoded as baseline JPEG, listed in a
//! line-delimited JSON manifest, plus a synthetic corpus generator.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{HarnessError, Result};
use crate::jpeg::encoder::{encode_gray, encode_rgb, quant_tables, EncodeOptions, Sampling};
use crate::jpeg::{self, ParsedJpeg};

pub const MANIFEST_NAME: &str = "manifest.jsonl";

/// Qualities the synthetic generator cycles through.
pub const SYNTH_QUALITIES: [u8; 4] = [25, 50, 75, 100];

/// Re-encode quality when the source tables are not IJG-scaled.
const FALLBACK_QUALITY: u8 = 90;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusEntry {
    /// File name inside the prepared directory.
    pub file: String,
    pub source: String,
    pub width: usize,
    pub height: usize,
    pub original_width: usize,
    pub original_height: usize,
    /// Top-left corner of the crop in the source, (x, y).
    pub offset: (usize, usize),
    pub quality: u8,
    pub components: usize,
    pub bytes: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ManifestLine {
    Image(CorpusEntry),
    Skipped { source: String, reason: String },
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Manifest {
    pub lines: Vec<ManifestLine>,
}

impl Manifest {
    pub fn images(&self) -> impl Iterator<Item = &CorpusEntry> {
        self.lines.iter().filter_map(|l| match l {
            ManifestLine::Image(e) => Some(e),
            ManifestLine::Skipped { .. } => None,
        })
    }

    pub fn skipped(&self) -> usize {
        self.lines.len() - self.images().count()
    }

    pub fn to_jsonl(&self) -> String {
        let mut s = String::new();
        for line in &self.lines {
            s.push_str(&serde_json::to_string(line).expect("manifest line serializes"));
            s.push('\n');
        }
        s
    }
}

#[derive(Clone, Copy, Debug)]
pub struct PrepareOptions {
    pub crop: usize,
    /// Fixed re-encode quality. `None` keeps the source quality when its
    /// tables are recognizably IJG-scaled.
    pub quality: Option<u8>,
    pub sampling: Sampling,
}

impl Default for PrepareOptions {
    fn default() -> Self {
        Self {
            crop: 224,
            quality: None,
            sampling: Sampling::S420,
        }
    }
}

/// Crop origin centered in `(width, height)`, rounded down to multiples of
/// 16 so pixel crops start on block (and 4:2:0 MCU) boundaries. `None` when
/// the image is smaller than the crop.
pub fn center_crop_offset(width: usize, height: usize, crop: usize) -> Option<(usize, usize)> {
    if width < crop || height < crop {
        return None;
    }
    let align = |extra: usize| extra / 2 / 16 * 16;
    Some((align(width - crop), align(height - crop)))
}

/// Quality whose IJG-scaled luma table equals the stream's, if any.
pub fn estimate_quality(jpeg: &ParsedJpeg) -> Option<u8> {
    let table = jpeg.quant_table_for(0).ok()?;
    (1..=100u8).rev().find(|&q| quant_tables(q).0.values == table.values)
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn unwritable(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::UnwritableOutput {
        path: path.to_path_buf(),
        source,
    }
}

fn jpeg_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(io_err(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_file()
                && p.extension()
                    .and_then(|e| e.to_str())
                    .is_some_and(|e| e.eq_ignore_ascii_case("jpg") || e.eq_ignore_ascii_case("jpeg"))
        })
        .collect();
    files.sort();
    Ok(files)
}

fn crop_one(bytes: &[u8], opts: &PrepareOptions) -> std::result::Result<(Vec<u8>, CorpusEntry), String> {
    let (parsed, grids) = jpeg::decode(bytes).map_err(|e| e.to_string())?;
    let (w, h) = (parsed.width as usize, parsed.height as usize);
    let (ox, oy) = center_crop_offset(w, h, opts.crop)
        .ok_or_else(|| format!("{w}x{h} is smaller than the {0}x{0} crop", opts.crop))?;
    let grids = jpeg::dequantize_all(&parsed, &grids).map_err(|e| e.to_string())?;
    let rgb = jpeg::reconstruct_rgb(&parsed, &grids).map_err(|e| e.to_string())?;
    let quality = opts
        .quality
        .or_else(|| estimate_quality(&parsed))
        .unwrap_or(FALLBACK_QUALITY);
    let c = opts.crop;
    let mut cropped = Vec::with_capacity(c * c * 3);
    for y in oy..oy + c {
        let start = (y * w + ox) * 3;
        cropped.extend_from_slice(&rgb.data[start..start + c * 3]);
    }
    let enc = EncodeOptions {
        quality,
        sampling: opts.sampling,
        restart_interval: 0,
    };
    let components = parsed.components.len();
    let out = if components == 1 {
        let gray: Vec<u8> = cropped.chunks_exact(3).map(|p| p[0]).collect();
        encode_gray(c, c, &gray, &enc)
    } else {
        encode_rgb(c, c, &cropped, &enc)
    };
    let entry = CorpusEntry {
        file: String::new(),
        source: String::new(),
        width: c,
        height: c,
        original_width: w,
        original_height: h,
        offset: (ox, oy),
        quality,
        components,
        bytes: out.len(),
    };
    Ok((out, entry))
}

/// Center-crops every JPEG in `input` into `output` and writes the manifest
/// there. Inputs that fail to decode or are smaller than the crop are kept
/// in the manifest as skipped lines.
pub fn prepare_corpus(input: &Path, output: &Path, opts: &PrepareOptions) -> Result<Manifest> {
    let files = jpeg_files(input)?;
    if files.is_empty() {
        return Err(HarnessError::EmptyCorpus(input.to_path_buf()));
    }
    fs::create_dir_all(output).map_err(unwritable(output))?;
    let mut manifest = Manifest::default();
    for path in files {
        let source = path.file_name().unwrap_or_default().to_string_lossy().into_owned();
        let bytes = fs::read(&path).map_err(io_err(&path))?;
        match crop_one(&bytes, opts) {
            Ok((encoded, mut entry)) => {
                let stem = path.file_stem().unwrap_or_default().to_string_lossy();
                entry.file = format!("{stem}.jpg");
                entry.source = source;
                let dest = output.join(&entry.file);
                fs::write(&dest, &encoded).map_err(unwritable(&dest))?;
                manifest.lines.push(ManifestLine::Image(entry));
            }
            Err(reason) => manifest.lines.push(ManifestLine::Skipped { source, reason }),
        }
    }
    let path = output.join(MANIFEST_NAME);
    let mut f = fs::File::create(&path).map_err(unwritable(&path))?;
    f.write_all(manifest.to_jsonl().as_bytes()).map_err(unwritable(&path))?;
    Ok(manifest)
}

pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    let path = dir.join(MANIFEST_NAME);
    if !path.is_file() {
        return Err(HarnessError::CorpusNotPrepared(dir.to_path_buf()));
    }
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    let mut manifest = Manifest::default();
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let parsed = serde_json::from_str(line)
            .map_err(|e| HarnessError::InvalidConfig(format!("{}:{}: {e}", path.display(), i + 1)))?;
        manifest.lines.push(parsed);
    }
    Ok(manifest)
}

/// Reads every listed image into memory, in manifest order.
pub fn load_corpus(dir: &Path) -> Result<Vec<(String, Vec<u8>)>> {
    let manifest = read_manifest(dir)?;
    manifest
        .images()
        .map(|e| {
            let path = dir.join(&e.file);
            fs::read(&path).map(|b| (e.file.clone(), b)).map_err(io_err(&path))
        })
        .collect()
}

/// Smooth gradients, a few hard-edged shapes and per-pixel noise.
pub fn synth_image(width: usize, height: usize, seed: u64) -> Vec<u8> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base: [f64; 3] = [
        rng.gen_range(40.0..200.0),
        rng.gen_range(40.0..200.0),
        rng.gen_range(40.0..200.0),
    ];
    let slope: [(f64, f64); 3] = std::array::from_fn(|_| (rng.gen_range(-0.4..0.4), rng.gen_range(-0.4..0.4)));
    let shapes: Vec<(f64, f64, f64, [f64; 3], bool)> = (0..rng.gen_range(3..8))
        .map(|_| {
            (
                rng.gen_range(0.0..width as f64),
                rng.gen_range(0.0..height as f64),
                rng.gen_range(4.0..(width.min(height) as f64 / 3.0).max(5.0)),
                [
                    rng.gen_range(-90.0..90.0),
                    rng.gen_range(-90.0..90.0),
                    rng.gen_range(-90.0..90.0),
                ],
                rng.gen_bool(0.5),
            )
        })
        .collect();
    let noise = rng.gen_range(2.0..20.0);
    let (cx, cy) = (width as f64 / 2.0, height as f64 / 2.0);
    let mut out = Vec::with_capacity(width * height * 3);
    for y in 0..height {
        for x in 0..width {
            let (fx, fy) = (x as f64, y as f64);
            for c in 0..3 {
                let mut v = base[c] + slope[c].0 * (fx - cx) + slope[c].1 * (fy - cy);
                for &(sx, sy, r, delta, round) in &shapes {
                    let inside = if round {
                        (fx - sx).powi(2) + (fy - sy).powi(2) < r * r
                    } else {
                        (fx - sx).abs() < r && (fy - sy).abs() < r / 2.0
                    };
                    if inside {
                        v += delta[c];
                    }
                }
                v += rng.gen_range(-noise..=noise);
                out.push(v.round().clamp(0.0, 255.0) as u8);
            }
        }
    }
    out
}

/// Writes `count` synthetic JPEGs into `dir`, cycling qualities through
/// [`SYNTH_QUALITIES`] and alternating 4:2:0 and 4:4:4 sampling. Sizes vary
/// from 224 to 320 pixels per side.
pub fn synth_corpus(dir: &Path, count: usize, seed: u64) -> Result<Vec<PathBuf>> {
    const SIDES: [usize; 5] = [224, 256, 240, 320, 288];
    fs::create_dir_all(dir).map_err(unwritable(dir))?;
    let mut paths = Vec::with_capacity(count);
    for i in 0..count {
        let w = SIDES[i % SIDES.len()];
        let h = SIDES[(i / 2 + 1) % SIDES.len()];
        let quality = SYNTH_QUALITIES[i % SYNTH_QUALITIES.len()];
        let sampling = if (i / SYNTH_QUALITIES.len()).is_multiple_of(2) {
            Sampling::S420
        } else {
            Sampling::S444
        };
        let rgb = synth_image(w, h, seed.wrapping_add(i as u64));
        let bytes = encode_rgb(
            w,
            h,
            &rgb,
            &EncodeOptions {
                quality,
                sampling,
                restart_interval: 0,
            },
        );
        let path = dir.join(format!("synth_{i:03}_q{quality}.jpg"));
        fs::write(&path, bytes).map_err(unwritable(&path))?;
        paths.push(path);
    }
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn crop_offsets_are_block_aligned() {
        assert_eq!(center_crop_offset(256, 256, 224), Some((16, 16)));
        assert_eq!(center_crop_offset(224, 224, 224), Some((0, 0)));
        assert_eq!(center_crop_offset(320, 240, 224), Some((48, 0)));
        assert_eq!(center_crop_offset(200, 200, 224), None);
        for w in 224..400 {
            let (x, _) = center_crop_offset(w, 224, 224).unwrap();
            assert_eq!(x % 16, 0);
            assert!(x + 224 <= w);
        }
    }

    #[test]
    fn quality_is_recovered_from_tables() {
        for q in [25, 50, 75, 90, 100] {
            let bytes = encode_gray(
                16,
                16,
                &[100; 256],
                &EncodeOptions {
                    quality: q,
                    ..Default::default()
                },
            );
            assert_eq!(estimate_quality(&jpeg::parse_headers(&bytes).unwrap()), Some(q));
        }
    }

    #[test]
    fn synth_is_deterministic() {
        assert_eq!(synth_image(32, 24, 5), synth_image(32, 24, 5));
        assert_ne!(synth_image(32, 24, 5), synth_image(32, 24, 6));
    }
}
