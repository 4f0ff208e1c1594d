//! Pointwise channel-reduction operators: linear projection (LP), grouped
//! local attention (LA) and cross-channel parametric pooling (CCPP).
//!
//! Inputs are channel-major `n x plane` buffers; every operator maps the
//! `n` values at one spatial position to `m` values at the same position.
//! Accumulation is always in f64.

mod gradcheck;
mod io;

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::tensor::{ChannelMeta, DctTensor, TensorData, TensorError};

pub use gradcheck::{grad_check, grad_check_with, GradCheckConfig, GradCheckReport};
pub use io::{read_weights, read_weights_file, write_weights, write_weights_file};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ReductionKind {
    #[serde(rename = "lp")]
    Lp,
    #[serde(rename = "la")]
    La,
    #[serde(rename = "ccpp")]
    Ccpp,
}

impl ReductionKind {
    pub const ALL: [ReductionKind; 3] = [ReductionKind::Lp, ReductionKind::La, ReductionKind::Ccpp];

    pub fn name(self) -> &'static str {
        match self {
            ReductionKind::Lp => "lp",
            ReductionKind::La => "la",
            ReductionKind::Ccpp => "ccpp",
        }
    }
}

impl fmt::Display for ReductionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ReductionKind {
    type Err = ReduceError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lp" => Ok(ReductionKind::Lp),
            "la" => Ok(ReductionKind::La),
            "ccpp" => Ok(ReductionKind::Ccpp),
            other => Err(ReduceError::InvalidWeights(format!("unknown operator {other:?}"))),
        }
    }
}

#[derive(Debug)]
pub enum ReduceError {
    ShapeMismatch(String),
    /// LA needs the output width to divide the input width.
    GroupSizeError {
        in_channels: usize,
        out_channels: usize,
    },
    InvalidWeights(String),
    Tensor(TensorError),
}

impl fmt::Display for ReduceError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ReduceError::ShapeMismatch(why) => write!(f, "shape mismatch: {why}"),
            ReduceError::GroupSizeError {
                in_channels,
                out_channels,
            } => write!(
                f,
                "group size error: {out_channels} output channels do not divide {in_channels} input channels"
            ),
            ReduceError::InvalidWeights(why) => write!(f, "invalid weights: {why}"),
            ReduceError::Tensor(e) => e.fmt(f),
        }
    }
}

impl std::error::Error for ReduceError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            ReduceError::Tensor(e) => e.source(),
            _ => None,
        }
    }
}

impl From<TensorError> for ReduceError {
    fn from(e: TensorError) -> Self {
        ReduceError::Tensor(e)
    }
}

pub type Result<T> = std::result::Result<T, ReduceError>;

/// Element type an operator can be evaluated in.
pub trait Scalar: Copy + Default + PartialEq + fmt::Debug + Send + Sync + 'static {
    fn to_f64(self) -> f64;
    fn from_f64(v: f64) -> Self;
}

impl Scalar for f32 {
    fn to_f64(self) -> f64 {
        self as f64
    }
    fn from_f64(v: f64) -> Self {
        v as f32
    }
}

impl Scalar for f64 {
    fn to_f64(self) -> f64 {
        self
    }
    fn from_f64(v: f64) -> Self {
        v
    }
}

/// Weights are row-major: LP and CCPP `m x n`, LA `m x (n / m)`. Only CCPP
/// has a bias.
#[derive(Clone, Debug, PartialEq)]
pub struct ReductionOperator<T: Scalar = f32> {
    kind: ReductionKind,
    in_channels: usize,
    out_channels: usize,
    weights: Vec<T>,
    bias: Vec<T>,
}

/// Gradients of `<upstream, forward(x)>`.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients<T> {
    pub input: Vec<T>,
    pub weights: Vec<T>,
    /// Empty unless the operator has a bias.
    pub bias: Vec<T>,
}

impl<T: Scalar> ReductionOperator<T> {
    pub fn new(
        kind: ReductionKind,
        in_channels: usize,
        out_channels: usize,
        weights: Vec<T>,
        bias: Vec<T>,
    ) -> Result<Self> {
        let (rows, cols) = weight_shape(kind, in_channels, out_channels)?;
        if weights.len() != rows * cols {
            return Err(ReduceError::ShapeMismatch(format!(
                "{kind} weights need {rows}x{cols} values, got {}",
                weights.len()
            )));
        }
        let want_bias = if kind == ReductionKind::Ccpp { out_channels } else { 0 };
        if bias.len() != want_bias {
            return Err(ReduceError::ShapeMismatch(format!(
                "{kind} bias needs {want_bias} values, got {}",
                bias.len()
            )));
        }
        if weights.iter().chain(&bias).any(|v| !v.to_f64().is_finite()) {
            return Err(ReduceError::InvalidWeights("non-finite value".into()));
        }
        Ok(Self {
            kind,
            in_channels,
            out_channels,
            weights,
            bias,
        })
    }

    /// Seeded uniform weights (and bias) in `[-1/sqrt(n), 1/sqrt(n)]`.
    pub fn random(kind: ReductionKind, in_channels: usize, out_channels: usize, seed: u64) -> Result<Self> {
        let (rows, cols) = weight_shape(kind, in_channels, out_channels)?;
        let bound = 1.0 / (in_channels as f64).sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = |n: usize| -> Vec<T> { (0..n).map(|_| T::from_f64(rng.gen_range(-bound..=bound))).collect() };
        let weights = draw(rows * cols);
        let bias = if kind == ReductionKind::Ccpp {
            draw(out_channels)
        } else {
            Vec::new()
        };
        Self::new(kind, in_channels, out_channels, weights, bias)
    }

    pub fn kind(&self) -> ReductionKind {
        self.kind
    }

    pub fn in_channels(&self) -> usize {
        self.in_channels
    }

    pub fn out_channels(&self) -> usize {
        self.out_channels
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn bias(&self) -> &[T] {
        &self.bias
    }

    pub fn weight_shape(&self) -> (usize, usize) {
        weight_shape(self.kind, self.in_channels, self.out_channels).expect("validated")
    }

    pub fn group_size(&self) -> usize {
        self.in_channels / self.out_channels
    }

    /// Same operator evaluated in another precision.
    pub fn cast<U: Scalar>(&self) -> ReductionOperator<U> {
        let conv = |v: &[T]| v.iter().map(|x| U::from_f64(x.to_f64())).collect();
        ReductionOperator {
            kind: self.kind,
            in_channels: self.in_channels,
            out_channels: self.out_channels,
            weights: conv(&self.weights),
            bias: conv(&self.bias),
        }
    }

    fn check_input(&self, x: &[T], plane: usize) -> Result<()> {
        if x.len() != self.in_channels * plane {
            return Err(ReduceError::ShapeMismatch(format!(
                "input has {} values, expected {} channels x {plane}",
                x.len(),
                self.in_channels
            )));
        }
        Ok(())
    }

    /// Applies the operator at each of the `plane` positions of the
    /// channel-major input.
    pub fn forward(&self, x: &[T], plane: usize) -> Result<Vec<T>> {
        self.check_input(x, plane)?;
        let (n, m) = (self.in_channels, self.out_channels);
        let w: Vec<f64> = self.weights.iter().map(|v| v.to_f64()).collect();
        let mut out = vec![T::default(); m * plane];
        match self.kind {
            ReductionKind::Lp | ReductionKind::Ccpp => {
                let mut acc = vec![0.0f64; plane];
                for i in 0..m {
                    let b = self.bias.get(i).map_or(0.0, |b| b.to_f64());
                    acc.iter_mut().for_each(|a| *a = b);
                    for j in 0..n {
                        let wij = w[i * n + j];
                        let xj = &x[j * plane..(j + 1) * plane];
                        for (a, &v) in acc.iter_mut().zip(xj) {
                            *a += wij * v.to_f64();
                        }
                    }
                    let relu = self.kind == ReductionKind::Ccpp;
                    for (o, &a) in out[i * plane..(i + 1) * plane].iter_mut().zip(&acc) {
                        *o = T::from_f64(if relu { a.max(0.0) } else { a });
                    }
                }
            }
            ReductionKind::La => {
                let g = n / m;
                let mut r = vec![0.0f64; g];
                let mut a = vec![0.0f64; g];
                for i in 0..m {
                    for p in 0..plane {
                        for j in 0..g {
                            r[j] = x[(i * g + j) * plane + p].to_f64();
                        }
                        softmax_scores(&w[i * g..(i + 1) * g], &r, &mut a);
                        let y: f64 = a.iter().zip(&r).map(|(a, r)| a * r).sum();
                        out[i * plane + p] = T::from_f64(y);
                    }
                }
            }
        }
        Ok(out)
    }

    /// Attention weights of group `i` at every position, `(n/m) x plane`.
    pub fn attention(&self, x: &[T], plane: usize, group: usize) -> Result<Vec<f64>> {
        self.check_input(x, plane)?;
        if self.kind != ReductionKind::La || group >= self.out_channels {
            return Err(ReduceError::ShapeMismatch("attention is defined per LA group".into()));
        }
        let g = self.group_size();
        let w: Vec<f64> = self.weights[group * g..(group + 1) * g]
            .iter()
            .map(|v| v.to_f64())
            .collect();
        let mut out = vec![0.0; g * plane];
        let (mut r, mut a) = (vec![0.0; g], vec![0.0; g]);
        for p in 0..plane {
            for j in 0..g {
                r[j] = x[(group * g + j) * plane + p].to_f64();
            }
            softmax_scores(&w, &r, &mut a);
            for j in 0..g {
                out[j * plane + p] = a[j];
            }
        }
        Ok(out)
    }

    /// Analytic gradients of `L = <upstream, forward(x)>`. A ReLU at a
    /// pre-activation of exactly zero passes no gradient.
    pub fn backward(&self, x: &[T], upstream: &[T], plane: usize) -> Result<Gradients<T>> {
        self.check_input(x, plane)?;
        let (n, m) = (self.in_channels, self.out_channels);
        if upstream.len() != m * plane {
            return Err(ReduceError::ShapeMismatch(format!(
                "upstream gradient has {} values, expected {m} x {plane}",
                upstream.len()
            )));
        }
        let w: Vec<f64> = self.weights.iter().map(|v| v.to_f64()).collect();
        let xf: Vec<f64> = x.iter().map(|v| v.to_f64()).collect();
        let gf: Vec<f64> = upstream.iter().map(|v| v.to_f64()).collect();
        let mut gx = vec![0.0f64; n * plane];
        let mut gw = vec![0.0f64; w.len()];
        let mut gb = vec![0.0f64; self.bias.len()];
        match self.kind {
            ReductionKind::Lp | ReductionKind::Ccpp => {
                for i in 0..m {
                    let gi: Vec<f64> = if self.kind == ReductionKind::Ccpp {
                        let b = self.bias[i].to_f64();
                        (0..plane)
                            .map(|p| {
                                let z: f64 = b + (0..n).map(|j| w[i * n + j] * xf[j * plane + p]).sum::<f64>();
                                if z > 0.0 {
                                    gf[i * plane + p]
                                } else {
                                    0.0
                                }
                            })
                            .collect()
                    } else {
                        gf[i * plane..(i + 1) * plane].to_vec()
                    };
                    if let Some(b) = gb.get_mut(i) {
                        *b = gi.iter().sum();
                    }
                    for j in 0..n {
                        let wij = w[i * n + j];
                        let xj = &xf[j * plane..(j + 1) * plane];
                        let gxj = &mut gx[j * plane..(j + 1) * plane];
                        let mut acc = 0.0;
                        for p in 0..plane {
                            gxj[p] += wij * gi[p];
                            acc += gi[p] * xj[p];
                        }
                        gw[i * n + j] = acc;
                    }
                }
            }
            ReductionKind::La => {
                let g = n / m;
                let (mut r, mut a) = (vec![0.0; g], vec![0.0; g]);
                for i in 0..m {
                    let wi = &w[i * g..(i + 1) * g];
                    for p in 0..plane {
                        for j in 0..g {
                            r[j] = xf[(i * g + j) * plane + p];
                        }
                        softmax_scores(wi, &r, &mut a);
                        let y: f64 = a.iter().zip(&r).map(|(a, r)| a * r).sum();
                        let up = gf[i * plane + p];
                        for j in 0..g {
                            let shared = up * a[j] * (r[j] - y);
                            gx[(i * g + j) * plane + p] = up * a[j] + shared * wi[j];
                            gw[i * g + j] += shared * r[j];
                        }
                    }
                }
            }
        }
        let back = |v: Vec<f64>| v.into_iter().map(T::from_f64).collect();
        Ok(Gradients {
            input: back(gx),
            weights: back(gw),
            bias: back(gb),
        })
    }
}

impl ReductionOperator<f32> {
    /// Reduces a tensor; output channels are tagged as features.
    pub fn apply(&self, t: &DctTensor) -> Result<DctTensor> {
        if t.channels != self.in_channels {
            return Err(ReduceError::ShapeMismatch(format!(
                "tensor has {} channels, operator expects {}",
                t.channels, self.in_channels
            )));
        }
        let x = match &t.data {
            TensorData::F32(v) => std::borrow::Cow::Borrowed(v.as_slice()),
            TensorData::I16(_) => std::borrow::Cow::Owned(t.to_f32()),
        };
        let y = self.forward(&x, t.plane_len())?;
        let meta = (0..self.out_channels).map(ChannelMeta::feature).collect();
        Ok(DctTensor::new(t.rows, t.cols, TensorData::F32(y), meta, t.crop)?)
    }
}

/// `a = softmax(w * r)` elementwise, shifted by the max score.
fn softmax_scores(w: &[f64], r: &[f64], a: &mut [f64]) {
    let mut max = f64::NEG_INFINITY;
    for j in 0..r.len() {
        a[j] = w[j] * r[j];
        max = max.max(a[j]);
    }
    let mut sum = 0.0;
    for v in a.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in a.iter_mut() {
        *v /= sum;
    }
}

fn weight_shape(kind: ReductionKind, n: usize, m: usize) -> Result<(usize, usize)> {
    if n == 0 || m == 0 {
        return Err(ReduceError::ShapeMismatch("channel counts must be positive".into()));
    }
    match kind {
        ReductionKind::Lp | ReductionKind::Ccpp => Ok((m, n)),
        ReductionKind::La if n.is_multiple_of(m) => Ok((m, n / m)),
        ReductionKind::La => Err(ReduceError::GroupSizeError {
            in_channels: n,
            out_channels: m,
        }),
    }
}
