//! Layer primitives, all channels-last.
//!
//! Strided convolutions use SAME padding: the output length is
//! `ceil(len / stride)` and the padding needed to cover the input is split
//! evenly, with the odd element on the right. Transposed convolutions are the
//! exact adjoints of those convolutions, so their output length is
//! `len · stride`.

use std::sync::Arc;

use rand::Rng;

use crate::error::{Result, TensorError};
use crate::ops::NO_INDEX;
use crate::tensor::Tensor;

/// Padding layout of one SAME-padded strided axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SameGeometry {
    /// Length of the dense (un-strided) side.
    pub long_len: usize,
    /// Length of the strided side.
    pub short_len: usize,
    pub kernel: usize,
    pub stride: usize,
    pub pad_left: usize,
}

impl SameGeometry {
    pub fn new(long_len: usize, kernel: usize, stride: usize) -> Result<Self> {
        if long_len == 0 || kernel == 0 || stride == 0 {
            return Err(TensorError::invalid(
                "same_geometry",
                format!("length {long_len}, kernel {kernel} and stride {stride} must be positive"),
            ));
        }
        let short_len = long_len.div_ceil(stride);
        let pad_total = ((short_len - 1) * stride + kernel).saturating_sub(long_len);
        Ok(SameGeometry {
            long_len,
            short_len,
            kernel,
            stride,
            pad_left: pad_total / 2,
        })
    }

    /// Input position read by output `t` at tap `j`, if inside the signal.
    #[inline]
    pub fn source(&self, t: usize, j: usize) -> Option<usize> {
        (t * self.stride + j)
            .checked_sub(self.pad_left)
            .filter(|&p| p < self.long_len)
    }
}

fn index_arc(v: Vec<u32>) -> Arc<[u32]> {
    v.into()
}

fn expect_rank<'a>(x: &'a Tensor, rank: usize, op: &'static str) -> Result<&'a [usize]> {
    if x.rank() != rank {
        return Err(TensorError::invalid(
            op,
            format!("expected rank {rank}, got shape {:?}", x.shape()),
        ));
    }
    Ok(x.shape())
}

/// Strided 1-D cross-correlation: `x: [n, L, c_in]`, `w: [k, c_in, c_out]`
/// to `[n, ceil(L/stride), c_out]`.
pub fn conv1d(x: &Tensor, w: &Tensor, stride: usize) -> Result<Tensor> {
    let &[n, len, c_in] = expect_rank(x, 3, "conv1d")? else {
        unreachable!()
    };
    let &[k, wc_in, c_out] = expect_rank(w, 3, "conv1d")? else {
        unreachable!()
    };
    if wc_in != c_in {
        return Err(TensorError::shape("conv1d", x.shape(), w.shape()));
    }
    let geo = SameGeometry::new(len, k, stride)?;
    let out_len = geo.short_len;
    let mut index = Vec::with_capacity(n * out_len * k * c_in);
    for b in 0..n {
        for t in 0..out_len {
            for j in 0..k {
                match geo.source(t, j) {
                    Some(p) => {
                        let base = (b * len + p) * c_in;
                        index.extend((0..c_in).map(|c| (base + c) as u32));
                    }
                    None => index.extend(std::iter::repeat_n(NO_INDEX, c_in)),
                }
            }
        }
    }
    let cols = x.gather(index_arc(index), &[n * out_len, k * c_in])?;
    let out = cols.matmul(&w.reshape(&[k * c_in, c_out])?)?;
    out.reshape(&[n, out_len, c_out])
}

/// Strided 1-D transposed convolution: `y: [n, T, c_in]`,
/// `w: [k, c_in, c_out]` to `[n, T·stride, c_out]`.
///
/// With `w'[j, o, c] = w[j, c, o]`, this is the adjoint of
/// `conv1d(·, w', stride)` on inputs of length `T·stride`.
pub fn conv_transpose1d(y: &Tensor, w: &Tensor, stride: usize) -> Result<Tensor> {
    let &[n, short, c_in] = expect_rank(y, 3, "conv_transpose1d")? else {
        unreachable!()
    };
    let &[k, wc_in, c_out] = expect_rank(w, 3, "conv_transpose1d")? else {
        unreachable!()
    };
    if wc_in != c_in {
        return Err(TensorError::shape("conv_transpose1d", y.shape(), w.shape()));
    }
    let long = short * stride;
    let geo = SameGeometry::new(long, k, stride)?;
    debug_assert_eq!(geo.short_len, short);

    // w[j, c, o] -> [c, (j, o)]
    let mut perm = Vec::with_capacity(k * c_in * c_out);
    for c in 0..c_in {
        for j in 0..k {
            for o in 0..c_out {
                perm.push(((j * c_in + c) * c_out + o) as u32);
            }
        }
    }
    let wm = w.gather(index_arc(perm), &[c_in, k * c_out])?;
    let prod = y.reshape(&[n * short, c_in])?.matmul(&wm)?;

    let mut index = Vec::with_capacity(n * short * k * c_out);
    for b in 0..n {
        for t in 0..short {
            for j in 0..k {
                match geo.source(t, j) {
                    Some(p) => {
                        let base = (b * long + p) * c_out;
                        index.extend((0..c_out).map(|o| (base + o) as u32));
                    }
                    None => index.extend(std::iter::repeat_n(NO_INDEX, c_out)),
                }
            }
        }
    }
    prod.reshape(&[n * short * k * c_out])?
        .scatter_add(index_arc(index), &[n, long, c_out])
}

/// Strided 2-D cross-correlation: `x: [n, H, W, c_in]`,
/// `w: [kh, kw, c_in, c_out]`.
pub fn conv2d(x: &Tensor, w: &Tensor, stride: usize) -> Result<Tensor> {
    let &[n, h, wd, c_in] = expect_rank(x, 4, "conv2d")? else {
        unreachable!()
    };
    let &[kh, kw, wc_in, c_out] = expect_rank(w, 4, "conv2d")? else {
        unreachable!()
    };
    if wc_in != c_in {
        return Err(TensorError::shape("conv2d", x.shape(), w.shape()));
    }
    let gy = SameGeometry::new(h, kh, stride)?;
    let gx = SameGeometry::new(wd, kw, stride)?;
    let (ho, wo) = (gy.short_len, gx.short_len);
    let patch = kh * kw * c_in;
    let mut index = Vec::with_capacity(n * ho * wo * patch);
    for b in 0..n {
        for oy in 0..ho {
            for ox in 0..wo {
                for dy in 0..kh {
                    for dx in 0..kw {
                        match (gy.source(oy, dy), gx.source(ox, dx)) {
                            (Some(iy), Some(ix)) => {
                                let base = ((b * h + iy) * wd + ix) * c_in;
                                index.extend((0..c_in).map(|c| (base + c) as u32));
                            }
                            _ => index.extend(std::iter::repeat_n(NO_INDEX, c_in)),
                        }
                    }
                }
            }
        }
    }
    let cols = x.gather(index_arc(index), &[n * ho * wo, patch])?;
    let out = cols.matmul(&w.reshape(&[patch, c_out])?)?;
    out.reshape(&[n, ho, wo, c_out])
}

/// SAME-padded max pooling over square windows of `x: [n, H, W, c]`.
pub fn max_pool2d(x: &Tensor, pool: usize, stride: usize) -> Result<Tensor> {
    let &[n, h, wd, c] = expect_rank(x, 4, "max_pool2d")? else {
        unreachable!()
    };
    let gy = SameGeometry::new(h, pool, stride)?;
    let gx = SameGeometry::new(wd, pool, stride)?;
    let (ho, wo) = (gy.short_len, gx.short_len);
    let src = x.data();
    let mut index = Vec::with_capacity(n * ho * wo * c);
    for b in 0..n {
        for oy in 0..ho {
            for ox in 0..wo {
                for ch in 0..c {
                    let mut best: Option<(usize, f64)> = None;
                    for dy in 0..pool {
                        let Some(iy) = gy.source(oy, dy) else {
                            continue;
                        };
                        for dx in 0..pool {
                            let Some(ix) = gx.source(ox, dx) else {
                                continue;
                            };
                            let at = ((b * h + iy) * wd + ix) * c + ch;
                            if best.is_none_or(|(_, v)| src[at] > v) {
                                best = Some((at, src[at]));
                            }
                        }
                    }
                    index.push(best.map_or(NO_INDEX, |(at, _)| at as u32));
                }
            }
        }
    }
    x.gather(index_arc(index), &[n, ho, wo, c])
}

/// `x: [n, in] · w: [in, out] + b`.
pub fn dense(x: &Tensor, w: &Tensor, b: &Tensor) -> Result<Tensor> {
    x.matmul(w)?.add_channel(b)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormMode {
    Train,
    Infer,
}

/// Running statistics of a batch-norm layer, one entry per channel.
#[derive(Debug, Clone, PartialEq)]
pub struct RunningStats {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

impl RunningStats {
    pub fn new(channels: usize) -> Self {
        RunningStats {
            mean: vec![0.0; channels],
            var: vec![1.0; channels],
        }
    }
}

pub const BATCH_NORM_EPS: f64 = 1e-5;
pub const BATCH_NORM_MOMENTUM: f64 = 0.9;

/// Per-channel batch normalization over every axis except the last.
///
/// In train mode the batch statistics are used and folded into `stats`
/// with momentum [`BATCH_NORM_MOMENTUM`]; in infer mode `stats` is used
/// as-is.
pub fn batch_norm(
    x: &Tensor,
    gamma: &Tensor,
    beta: &Tensor,
    stats: &mut RunningStats,
    mode: NormMode,
) -> Result<Tensor> {
    let Some(&c) = x.shape().last() else {
        return Err(TensorError::invalid("batch_norm", "scalar input"));
    };
    if gamma.shape() != [c] || beta.shape() != [c] || stats.mean.len() != c {
        return Err(TensorError::shape("batch_norm", x.shape(), gamma.shape()));
    }
    let count = x.numel() / c.max(1);
    match mode {
        NormMode::Train => {
            let batch = x.shape()[0];
            if batch < 2 {
                return Err(TensorError::BatchTooSmall(batch));
            }
            let inv = 1.0 / count as f64;
            let mean = x.sum_to(&[c])?.scale(inv);
            let centered = x.sub(&mean.broadcast_to(x.shape())?)?;
            let var = centered.square().sum_to(&[c])?.scale(inv);
            let inv_std = var.add_scalar(BATCH_NORM_EPS).powf(-0.5);
            let normalized = centered.mul_channel(&inv_std)?;
            for ch in 0..c {
                stats.mean[ch] = BATCH_NORM_MOMENTUM * stats.mean[ch]
                    + (1.0 - BATCH_NORM_MOMENTUM) * mean.data()[ch];
                stats.var[ch] = BATCH_NORM_MOMENTUM * stats.var[ch]
                    + (1.0 - BATCH_NORM_MOMENTUM) * var.data()[ch];
            }
            normalized.mul_channel(gamma)?.add_channel(beta)
        }
        NormMode::Infer => {
            let shift = Tensor::from_raw(vec![c], stats.mean.iter().map(|m| -m).collect());
            let inv_std = Tensor::from_raw(
                vec![c],
                stats
                    .var
                    .iter()
                    .map(|v| 1.0 / (v + BATCH_NORM_EPS).sqrt())
                    .collect(),
            );
            x.add_channel(&shift)?
                .mul_channel(&inv_std)?
                .mul_channel(gamma)?
                .add_channel(beta)
        }
    }
}

/// Folds any integer position onto `0..len` by mirroring with the edge
/// sample repeated (`… x1 x0 | x0 x1 … xL-1 | xL-1 xL-2 …`).
pub fn mirror_index(pos: i64, len: usize) -> usize {
    let period = 2 * len as i64;
    let m = pos.rem_euclid(period);
    if m < len as i64 {
        m as usize
    } else {
        (period - 1 - m) as usize
    }
}

/// Shifts every `(sample, channel)` series of `x: [n, L, c]` so that
/// `out[t] = x[t + shift]`, mirroring past the edges. `shifts` is laid out
/// `[n, c]`.
pub fn phase_shuffle_with(x: &Tensor, shifts: &[i64]) -> Result<Tensor> {
    let &[n, len, c] = expect_rank(x, 3, "phase_shuffle")? else {
        unreachable!()
    };
    if shifts.len() != n * c {
        return Err(TensorError::invalid(
            "phase_shuffle",
            format!("{} shifts for {n}×{c} series", shifts.len()),
        ));
    }
    if shifts.iter().all(|&s| s == 0) {
        return Ok(x.clone());
    }
    let mut index = Vec::with_capacity(x.numel());
    for b in 0..n {
        for t in 0..len {
            for ch in 0..c {
                let src = mirror_index(t as i64 + shifts[b * c + ch], len);
                index.push(((b * len + src) * c + ch) as u32);
            }
        }
    }
    x.gather(index_arc(index), x.shape())
}

/// Phase shuffle with shifts drawn uniformly from `[-radius, radius]`.
pub fn phase_shuffle<R: Rng + ?Sized>(x: &Tensor, radius: usize, rng: &mut R) -> Result<Tensor> {
    if radius == 0 {
        return Ok(x.clone());
    }
    let &[n, _, c] = expect_rank(x, 3, "phase_shuffle")? else {
        unreachable!()
    };
    let r = radius as i64;
    let shifts: Vec<i64> = (0..n * c).map(|_| rng.random_range(-r..=r)).collect();
    phase_shuffle_with(x, &shifts)
}

/// Symmetric crop of `x: [n, L, c]` to `target` samples: `floor((L-target)/2)`
/// removed from the front, the rest from the back.
pub fn crop(x: &Tensor, target: usize) -> Result<Tensor> {
    let &[n, len, c] = expect_rank(x, 3, "crop")? else {
        unreachable!()
    };
    if len < target {
        return Err(TensorError::invalid(
            "crop",
            format!("cannot crop length {len} to {target}"),
        ));
    }
    if len == target {
        return Ok(x.clone());
    }
    let front = (len - target) / 2;
    let mut index = Vec::with_capacity(n * target * c);
    for b in 0..n {
        let base = (b * len + front) * c;
        index.extend((base..base + target * c).map(|i| i as u32));
    }
    x.gather(index_arc(index), &[n, target, c])
}

pub fn mse_loss(prediction: &Tensor, target: &Tensor) -> Result<Tensor> {
    Ok(prediction.sub(target)?.square().mean())
}

/// Mean binary cross-entropy of probabilities against 0/1 targets.
pub fn binary_cross_entropy(probs: &Tensor, targets: &Tensor) -> Result<Tensor> {
    const CLIP: f64 = 1e-12;
    let p = probs.clamp(CLIP, 1.0 - CLIP);
    let pos = targets.detach().mul(&p.ln())?;
    let neg_t = targets.detach().scale(-1.0).add_scalar(1.0);
    let neg = neg_t.mul(&p.scale(-1.0).add_scalar(1.0).ln())?;
    Ok(pos.add(&neg)?.mean().neg())
}
