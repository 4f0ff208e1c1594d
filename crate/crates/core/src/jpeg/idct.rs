//! 8x8 DCT: a double-precision separable pair, and the 13-bit fixed-point
//! inverse with two extra bits of intermediate precision that integer
//! decoders conventionally use.
//!
//! Only the full-decode path and the corpus encoder use these. A per-thread
//! counter records inverse transforms so callers can assert that a partial
//! decode ran none.

use std::cell::Cell;
use std::sync::OnceLock;

thread_local! {
    static IDCT_BLOCKS: Cell<u64> = const { Cell::new(0) };
}

/// Inverse transforms run on the current thread since it started.
pub fn idct_block_count() -> u64 {
    IDCT_BLOCKS.with(Cell::get)
}

/// Floating-point operations of one 8x8 forward DCT, the per-block cost a
/// DCT-domain network input avoids recomputing.
pub const DCT_BLOCK_FLOPS: u64 = 1920;

// basis[x][u] = C(u)/2 * cos((2x+1) u pi / 16)
fn basis() -> &'static [[f64; 8]; 8] {
    static BASIS: OnceLock<[[f64; 8]; 8]> = OnceLock::new();
    BASIS.get_or_init(|| {
        let mut m = [[0.0; 8]; 8];
        for (x, row) in m.iter_mut().enumerate() {
            for (u, v) in row.iter_mut().enumerate() {
                let c = if u == 0 { std::f64::consts::FRAC_1_SQRT_2 } else { 1.0 };
                *v = c / 2.0 * ((2 * x + 1) as f64 * u as f64 * std::f64::consts::PI / 16.0).cos();
            }
        }
        m
    })
}

/// Inverse DCT of a raster-order coefficient block into raster-order samples
/// (without the +128 level shift).
pub fn idct_8x8(coefs: &[f64; 64]) -> [f64; 64] {
    IDCT_BLOCKS.with(|c| c.set(c.get() + 1));
    let m = basis();
    let mut tmp = [0.0f64; 64];
    // columns: tmp[y][u] = sum_v m[y][v] * F[v][u]
    for y in 0..8 {
        for u in 0..8 {
            let mut s = 0.0;
            for v in 0..8 {
                s += m[y][v] * coefs[v * 8 + u];
            }
            tmp[y * 8 + u] = s;
        }
    }
    let mut out = [0.0f64; 64];
    for y in 0..8 {
        for x in 0..8 {
            let mut s = 0.0;
            for u in 0..8 {
                s += m[x][u] * tmp[y * 8 + u];
            }
            out[y * 8 + x] = s;
        }
    }
    out
}

const CONST_BITS: u32 = 13;
const PASS1_BITS: u32 = 2;

const FIX_0_298631336: i64 = 2446;
const FIX_0_390180644: i64 = 3196;
const FIX_0_541196100: i64 = 4433;
const FIX_0_765366865: i64 = 6270;
const FIX_0_899976223: i64 = 7373;
const FIX_1_175875602: i64 = 9633;
const FIX_1_501321110: i64 = 12299;
const FIX_1_847759065: i64 = 15137;
const FIX_1_961570560: i64 = 16069;
const FIX_2_053119869: i64 = 16819;
const FIX_2_562915447: i64 = 20995;
const FIX_3_072711026: i64 = 25172;

fn descale(x: i64, n: u32) -> i64 {
    (x + (1 << (n - 1))) >> n
}

/// One 8-point inverse pass, results scaled by
/// `2^CONST_BITS` and left undescaled.
fn islow_1d(v: [i64; 8]) -> [i64; 8] {
    let z1 = (v[2] + v[6]) * FIX_0_541196100;
    let tmp2 = z1 - v[6] * FIX_1_847759065;
    let tmp3 = z1 + v[2] * FIX_0_765366865;
    let tmp0 = (v[0] + v[4]) << CONST_BITS;
    let tmp1 = (v[0] - v[4]) << CONST_BITS;
    let (tmp10, tmp13) = (tmp0 + tmp3, tmp0 - tmp3);
    let (tmp11, tmp12) = (tmp1 + tmp2, tmp1 - tmp2);

    let (o0, o1, o2, o3) = (v[7], v[5], v[3], v[1]);
    let z1 = o0 + o3;
    let z2 = o1 + o2;
    let z3 = o0 + o2;
    let z4 = o1 + o3;
    let z5 = (z3 + z4) * FIX_1_175875602;
    let z1 = -z1 * FIX_0_899976223;
    let z2 = -z2 * FIX_2_562915447;
    let z3 = -z3 * FIX_1_961570560 + z5;
    let z4 = -z4 * FIX_0_390180644 + z5;
    let o0 = o0 * FIX_0_298631336 + z1 + z3;
    let o1 = o1 * FIX_2_053119869 + z2 + z4;
    let o2 = o2 * FIX_3_072711026 + z2 + z3;
    let o3 = o3 * FIX_1_501321110 + z1 + z4;

    [
        tmp10 + o3,
        tmp11 + o2,
        tmp12 + o1,
        tmp13 + o0,
        tmp13 - o0,
        tmp12 - o1,
        tmp11 - o2,
        tmp10 - o3,
    ]
}

/// Fixed-point inverse DCT of a raster-order block of dequantized
/// coefficients, level shifted and clamped to 8-bit samples.
pub fn idct_8x8_int(coefs: &[i32; 64]) -> [u8; 64] {
    IDCT_BLOCKS.with(|c| c.set(c.get() + 1));
    let mut ws = [0i64; 64];
    for u in 0..8 {
        let col: [i64; 8] = std::array::from_fn(|v| coefs[v * 8 + u] as i64);
        if col[1..].iter().all(|&c| c == 0) {
            for v in 0..8 {
                ws[v * 8 + u] = col[0] << PASS1_BITS;
            }
            continue;
        }
        for (v, r) in islow_1d(col).into_iter().enumerate() {
            ws[v * 8 + u] = descale(r, CONST_BITS - PASS1_BITS);
        }
    }
    let mut out = [0u8; 64];
    let shift = CONST_BITS + PASS1_BITS + 3;
    for y in 0..8 {
        let row: [i64; 8] = std::array::from_fn(|x| ws[y * 8 + x]);
        let samples: [i64; 8] = if row[1..].iter().all(|&c| c == 0) {
            [descale(row[0], PASS1_BITS + 3); 8]
        } else {
            islow_1d(row).map(|r| descale(r, shift))
        };
        for (x, s) in samples.into_iter().enumerate() {
            out[y * 8 + x] = (s + 128).clamp(0, 255) as u8;
        }
    }
    out
}

/// Forward DCT of raster-order samples (already level shifted).
pub fn fdct_8x8(samples: &[f64; 64]) -> [f64; 64] {
    let m = basis();
    let mut tmp = [0.0f64; 64];
    for v in 0..8 {
        for x in 0..8 {
            let mut s = 0.0;
            for y in 0..8 {
                s += m[y][v] * samples[y * 8 + x];
            }
            tmp[v * 8 + x] = s;
        }
    }
    let mut out = [0.0f64; 64];
    for v in 0..8 {
        for u in 0..8 {
            let mut s = 0.0;
            for x in 0..8 {
                s += m[x][u] * tmp[v * 8 + x];
            }
            out[v * 8 + u] = s;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    // Direct quadruple sum, no separability.
    fn idct_direct(coefs: &[f64; 64]) -> [f64; 64] {
        let c = |k: usize| if k == 0 { std::f64::consts::FRAC_1_SQRT_2 } else { 1.0 };
        let mut out = [0.0; 64];
        for y in 0..8 {
            for x in 0..8 {
                let mut s = 0.0;
                for v in 0..8 {
                    for u in 0..8 {
                        s += c(u)
                            * c(v)
                            * coefs[v * 8 + u]
                            * ((2 * x + 1) as f64 * u as f64 * std::f64::consts::PI / 16.0).cos()
                            * ((2 * y + 1) as f64 * v as f64 * std::f64::consts::PI / 16.0).cos();
                    }
                }
                out[y * 8 + x] = s / 4.0;
            }
        }
        out
    }

    #[test]
    fn dc_only_block_is_flat() {
        let mut f = [0.0; 64];
        f[0] = 8.0 * 37.0;
        let out = idct_8x8(&f);
        assert!(out.iter().all(|&s| (s - 37.0).abs() < 1e-9));
    }

    #[test]
    fn separable_matches_direct_sum() {
        let f: [f64; 64] = std::array::from_fn(|i| ((i * 37 + 11) % 23) as f64 - 11.0);
        let a = idct_8x8(&f);
        let b = idct_direct(&f);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn forward_inverse_roundtrip() {
        let s: [f64; 64] = std::array::from_fn(|i| ((i * 13) % 255) as f64 - 128.0);
        let back = idct_8x8(&fdct_8x8(&s));
        for (x, y) in s.iter().zip(&back) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn counter_counts_inverse_only() {
        let before = idct_block_count();
        fdct_8x8(&[0.0; 64]);
        assert_eq!(idct_block_count(), before);
        idct_8x8(&[0.0; 64]);
        assert_eq!(idct_block_count(), before + 1);
    }

    #[test]
    fn fixed_point_tracks_float_within_one() {
        let mut state = 0x1234_5678u64;
        let mut next = || {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            (state >> 33) as i64
        };
        for trial in 0..2000 {
            let mut ints = [0i32; 64];
            let spread = [2048, 400, 60][trial % 3];
            for (k, c) in ints.iter_mut().enumerate() {
                let keep = k < 10 || next() % 4 == 0;
                *c = if keep {
                    (next() % (2 * spread + 1) - spread) as i32
                } else {
                    0
                };
            }
            let floats: [f64; 64] = std::array::from_fn(|k| ints[k] as f64);
            let exact = idct_8x8(&floats);
            let fixed = idct_8x8_int(&ints);
            for k in 0..64 {
                let e = (exact[k] + 128.0).round().clamp(0.0, 255.0);
                assert!((fixed[k] as f64 - e).abs() <= 1.0, "trial {trial} sample {k}");
            }
        }
    }
}
