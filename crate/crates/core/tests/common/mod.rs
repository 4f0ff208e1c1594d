//! Brute-force references shared by the integration tests.
#![allow(dead_code)]

/// y[i] at every position by explicit scalar loops, f64 throughout.
pub fn naive_lp(w: &[f32], n: usize, m: usize, x: &[f32], plane: usize) -> Vec<f64> {
    let mut y = vec![0.0; m * plane];
    for p in 0..plane {
        for i in 0..m {
            let mut s = 0.0f64;
            for j in 0..n {
                s += w[i * n + j] as f64 * x[j * plane + p] as f64;
            }
            y[i * plane + p] = s;
        }
    }
    y
}

pub fn naive_ccpp(w: &[f32], b: &[f32], n: usize, m: usize, x: &[f32], plane: usize) -> Vec<f64> {
    let lin = naive_lp(w, n, m, x, plane);
    lin.iter()
        .enumerate()
        .map(|(k, &v)| {
            let z = v + b[k / plane] as f64;
            if z > 0.0 {
                z
            } else {
                0.0
            }
        })
        .collect()
}

/// Returns outputs and the attention weights `[group][j][position]`.
pub fn naive_la(w: &[f32], n: usize, m: usize, x: &[f32], plane: usize) -> (Vec<f64>, Vec<Vec<Vec<f64>>>) {
    let g = n / m;
    let mut y = vec![0.0; m * plane];
    let mut att = vec![vec![vec![0.0; plane]; g]; m];
    for i in 0..m {
        for p in 0..plane {
            let scores: Vec<f64> = (0..g)
                .map(|j| w[i * g + j] as f64 * x[(i * g + j) * plane + p] as f64)
                .collect();
            let exps: Vec<f64> = scores.iter().map(|s| s.exp()).collect();
            let total: f64 = exps.iter().sum();
            let mut acc = 0.0;
            for j in 0..g {
                let a = exps[j] / total;
                att[i][j][p] = a;
                acc += a * x[(i * g + j) * plane + p] as f64;
            }
            y[i * plane + p] = acc;
        }
    }
    (y, att)
}

pub fn max_abs_diff(a: &[f32], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| (x as f64 - y).abs()).fold(0.0, f64::max)
}
