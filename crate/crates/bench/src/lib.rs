//! Fixtures shared by the criterion benches.

use dctnet::harness::synth_image;
use dctnet::jpeg::encoder::{encode_rgb, EncodeOptions, Sampling};
use dctnet::jpeg::{self, RgbImage};
use dctnet::tensor::{tensor_from_jpeg, DctTensor, TensorOptions};

/// Side of the square fixture images, matching the corpus crop.
pub const SIDE: usize = 224;

/// `count` synthetic 4:2:0 JPEGs at quality 90.
pub fn fixture_jpegs(count: usize, seed: u64) -> Vec<Vec<u8>> {
    let opts = EncodeOptions {
        quality: 90,
        sampling: Sampling::S420,
        restart_interval: 0,
    };
    (0..count as u64)
        .map(|i| encode_rgb(SIDE, SIDE, &synth_image(SIDE, SIDE, seed + i), &opts))
        .collect()
}

/// Entropy decoding, dequantization, IDCT, upsampling and color conversion.
pub fn full_decode(bytes: &[u8]) -> RgbImage {
    let (parsed, grids) = jpeg::decode(bytes).expect("fixture decodes");
    let grids = jpeg::dequantize_all(&parsed, &grids).expect("tables present");
    jpeg::reconstruct_rgb(&parsed, &grids).expect("grids match frame")
}

/// Entropy decoding into a coefficient tensor; no IDCT.
pub fn partial_decode(bytes: &[u8], opts: &TensorOptions) -> DctTensor {
    tensor_from_jpeg(bytes, opts).expect("fixture decodes")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_decode_both_ways() {
        let jpegs = fixture_jpegs(2, 1);
        let rgb = full_decode(&jpegs[0]);
        assert_eq!((rgb.width, rgb.height), (SIDE, SIDE));
        let t = partial_decode(&jpegs[1], &TensorOptions::default());
        assert_eq!((t.channels, t.rows, t.cols), (192, 28, 28));
    }
}
