use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ReductionKind, ReductionOperator, Result};

/// Both gradients below this magnitude count as agreeing.
const ZERO_FLOOR: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradCheckConfig {
    pub in_channels: usize,
    pub out_channels: usize,
    pub rows: usize,
    pub cols: usize,
    pub step: f64,
    pub tolerance: f64,
    /// CCPP outputs with |pre-activation| below this are left out of the
    /// loss so no finite-difference probe straddles the ReLU kink.
    pub kink_margin: f64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self {
            in_channels: 12,
            out_channels: 4,
            rows: 2,
            cols: 2,
            step: 1e-5,
            tolerance: 1e-4,
            kink_margin: 1e-3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub kind: ReductionKind,
    pub trials: usize,
    pub step: f64,
    pub max_relative_error: f64,
    /// Output elements left out because they sit at a ReLU kink.
    pub excluded: usize,
    pub passed: bool,
}

pub fn grad_check(kind: ReductionKind, trials: usize, seed: u64) -> Result<GradCheckReport> {
    grad_check_with(kind, trials, seed, &GradCheckConfig::default())
}

/// Random operators, inputs and upstream gradients; analytic gradients are
/// compared against central differences of `<upstream, forward(x)>` in f64.
pub fn grad_check_with(
    kind: ReductionKind,
    trials: usize,
    seed: u64,
    cfg: &GradCheckConfig,
) -> Result<GradCheckReport> {
    let plane = cfg.rows * cfg.cols;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    let mut excluded = 0;
    for trial in 0..trials.max(1) {
        let op = ReductionOperator::<f64>::random(
            kind,
            cfg.in_channels,
            cfg.out_channels,
            seed.wrapping_mul(1_000_003).wrapping_add(trial as u64),
        )?;
        let x: Vec<f64> = (0..cfg.in_channels * plane).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let upstream: Vec<f64> = (0..cfg.out_channels * plane)
            .map(|_| rng.gen_range(-1.0..1.0))
            .collect();
        let (err, skipped) = check_operator(&op, &x, &upstream, plane, cfg.step, cfg.kink_margin)?;
        worst = worst.max(err);
        excluded += skipped;
    }
    Ok(GradCheckReport {
        kind,
        trials: trials.max(1),
        step: cfg.step,
        max_relative_error: worst,
        excluded,
        passed: worst < cfg.tolerance,
    })
}

fn relative_error(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale < ZERO_FLOOR {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// Max relative error over every input, weight and bias entry, and the
/// number of output elements masked out at ReLU kinks.
pub(crate) fn check_operator(
    op: &ReductionOperator<f64>,
    x: &[f64],
    upstream: &[f64],
    plane: usize,
    step: f64,
    kink_margin: f64,
) -> Result<(f64, usize)> {
    let mut upstream = upstream.to_vec();
    let mut excluded = 0;
    if op.kind() == ReductionKind::Ccpp {
        let linear = ReductionOperator::new(
            ReductionKind::Lp,
            op.in_channels(),
            op.out_channels(),
            op.weights().to_vec(),
            vec![],
        )?
        .forward(x, plane)?;
        for (i, g) in upstream.iter_mut().enumerate() {
            let z = linear[i] + op.bias()[i / plane];
            if z.abs() < kink_margin {
                *g = 0.0;
                excluded += 1;
            }
        }
    }
    let analytic = op.backward(x, &upstream, plane)?;
    let loss = |op: &ReductionOperator<f64>, x: &[f64]| -> Result<f64> {
        Ok(op.forward(x, plane)?.iter().zip(&upstream).map(|(y, g)| y * g).sum())
    };
    let mut worst = 0.0f64;

    let mut xp = x.to_vec();
    for k in 0..x.len() {
        xp[k] = x[k] + step;
        let up = loss(op, &xp)?;
        xp[k] = x[k] - step;
        let down = loss(op, &xp)?;
        xp[k] = x[k];
        worst = worst.max(relative_error(analytic.input[k], (up - down) / (2.0 * step)));
    }
    let probe = |weights: &[f64], bias: &[f64]| -> Result<f64> {
        let moved = ReductionOperator::new(
            op.kind(),
            op.in_channels(),
            op.out_channels(),
            weights.to_vec(),
            bias.to_vec(),
        )?;
        loss(&moved, x)
    };
    let mut w = op.weights().to_vec();
    for k in 0..w.len() {
        let orig = w[k];
        w[k] = orig + step;
        let up = probe(&w, op.bias())?;
        w[k] = orig - step;
        let down = probe(&w, op.bias())?;
        w[k] = orig;
        worst = worst.max(relative_error(analytic.weights[k], (up - down) / (2.0 * step)));
    }
    let mut b = op.bias().to_vec();
    for k in 0..b.len() {
        let orig = b[k];
        b[k] = orig + step;
        let up = probe(op.weights(), &b)?;
        b[k] = orig - step;
        let down = probe(op.weights(), &b)?;
        b[k] = orig;
        worst = worst.max(relative_error(analytic.bias[k], (up - down) / (2.0 * step)));
    }
    Ok((worst, excluded))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_kinds_pass() {
        for kind in ReductionKind::ALL {
            let r = grad_check(kind, 10, 42).unwrap();
            assert!(r.passed, "{kind}: {}", r.max_relative_error);
        }
    }

    #[test]
    fn exact_kink_is_excluded() {
        // Output 0 at position 0 has pre-activation exactly 0.
        let op = ReductionOperator::<f64>::new(ReductionKind::Ccpp, 2, 1, vec![1.0, 1.0], vec![0.0]).unwrap();
        let x = [1.0, 0.5, -1.0, 0.25];
        let (err, excluded) = check_operator(&op, &x, &[1.0, 1.0], 2, 1e-5, 1e-3).unwrap();
        assert_eq!(excluded, 1);
        assert!(err < 1e-4, "{err}");
    }
}
