//! Zigzag scan order of an 8x8 block.

/// `ZIGZAG_TO_NATURAL[k]` is the raster index (row * 8 + col) of the k-th
/// coefficient in zigzag order.
pub const ZIGZAG_TO_NATURAL: [usize; 64] = [
    0, 1, 8, 16, 9, 2, 3, 10, 17, 24, 32, 25, 18, 11, 4, 5, 12, 19, 26, 33, 40, 48, 41, 34, 27, 20, 13, 6, 7, 14, 21,
    28, 35, 42, 49, 56, 57, 50, 43, 36, 29, 22, 15, 23, 30, 37, 44, 51, 58, 59, 52, 45, 38, 31, 39, 46, 53, 60, 61, 54,
    47, 55, 62, 63,
];

/// Inverse of [`ZIGZAG_TO_NATURAL`].
pub const NATURAL_TO_ZIGZAG: [usize; 64] = invert(&ZIGZAG_TO_NATURAL);

const fn invert(map: &[usize; 64]) -> [usize; 64] {
    let mut out = [0usize; 64];
    let mut k = 0;
    while k < 64 {
        out[map[k]] = k;
        k += 1;
    }
    out
}

/// Reorders a raster-order block into zigzag order.
pub fn to_zigzag<T: Copy>(natural: &[T; 64]) -> [T; 64] {
    let mut out = *natural;
    for (k, &n) in ZIGZAG_TO_NATURAL.iter().enumerate() {
        out[k] = natural[n];
    }
    out
}

/// Reorders a zigzag-order block into raster order.
pub fn from_zigzag<T: Copy>(zigzag: &[T; 64]) -> [T; 64] {
    let mut out = *zigzag;
    for (k, &n) in ZIGZAG_TO_NATURAL.iter().enumerate() {
        out[n] = zigzag[k];
    }
    out
}
