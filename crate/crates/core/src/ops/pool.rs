//! Max and average pooling.

use crate::error::{Error, Result};
use crate::layer::{pool_extent, PoolSpec};
use crate::tensor::{Scalar, Tensor};

fn out_dims(h: usize, w: usize, spec: &PoolSpec) -> Result<(usize, usize)> {
    match (
        pool_extent(h, spec.kernel.0, spec.stride.0, spec.padding.0, spec.ceil_mode.0),
        pool_extent(w, spec.kernel.1, spec.stride.1, spec.padding.1, spec.ceil_mode.1),
    ) {
        (Some(oh), Some(ow)) => Ok((oh, ow)),
        _ => Err(Error::shape(
            "pool",
            format!("input {h}x{w} too small for {}x{} window", spec.kernel.0, spec.kernel.1),
        )),
    }
}

/// Clamp the window starting at `start` (padded coordinates shifted by `pad`)
/// to the real input range.
fn window_range(o: usize, k: usize, s: usize, pad: usize, n: usize) -> (usize, usize) {
    let start = (o * s) as isize - pad as isize;
    let end = start + k as isize;
    (start.max(0) as usize, end.min(n as isize).max(0) as usize)
}

/// Max pooling. Returns the pooled map and, per output element, the flat
/// input index that won (used by the backward pass). Padding and ceil-mode
/// overhang behave as `-inf`.
pub fn maxpool_forward<T: Scalar>(input: &Tensor<T>, spec: &PoolSpec) -> Result<(Tensor<T>, Vec<usize>)> {
    let (c, h, w) = input.dims3()?;
    let (oh, ow) = out_dims(h, w, spec)?;
    let src = input.data();
    let mut out = Vec::with_capacity(c * oh * ow);
    let mut argmax = Vec::with_capacity(c * oh * ow);
    for ch in 0..c {
        let base = ch * h * w;
        for oy in 0..oh {
            let (y0, y1) = window_range(oy, spec.kernel.0, spec.stride.0, spec.padding.0, h);
            for ox in 0..ow {
                let (x0, x1) = window_range(ox, spec.kernel.1, spec.stride.1, spec.padding.1, w);
                let mut best = T::neg_infinity();
                let mut best_idx = usize::MAX;
                for y in y0..y1 {
                    for x in x0..x1 {
                        let idx = base + y * w + x;
                        if best_idx == usize::MAX || src[idx] > best {
                            best = src[idx];
                            best_idx = idx;
                        }
                    }
                }
                out.push(best);
                argmax.push(best_idx);
            }
        }
    }
    Ok((Tensor::new([c, oh, ow], out)?, argmax))
}

pub fn maxpool_backward<T: Scalar>(grad_out: &Tensor<T>, argmax: &[usize], input_shape: &[usize]) -> Result<Tensor<T>> {
    if grad_out.len() != argmax.len() {
        return Err(Error::shape("maxpool backward", "argmax/gradient length mismatch"));
    }
    let mut grad = Tensor::zeros(input_shape.to_vec());
    let g = grad.data_mut();
    for (&idx, &d) in argmax.iter().zip(grad_out.data()) {
        if idx != usize::MAX {
            g[idx] += d;
        }
    }
    Ok(grad)
}

/// Average pooling; zero padding counts toward the divisor `kh * kw`.
pub fn avgpool_forward<T: Scalar>(input: &Tensor<T>, spec: &PoolSpec) -> Result<Tensor<T>> {
    let (c, h, w) = input.dims3()?;
    let (oh, ow) = out_dims(h, w, spec)?;
    let scale = T::one() / T::from_f64((spec.kernel.0 * spec.kernel.1) as f64);
    let src = input.data();
    let mut out = Vec::with_capacity(c * oh * ow);
    for ch in 0..c {
        let base = ch * h * w;
        for oy in 0..oh {
            let (y0, y1) = window_range(oy, spec.kernel.0, spec.stride.0, spec.padding.0, h);
            for ox in 0..ow {
                let (x0, x1) = window_range(ox, spec.kernel.1, spec.stride.1, spec.padding.1, w);
                let mut acc = T::zero();
                for y in y0..y1 {
                    let row = base + y * w;
                    for &v in &src[row + x0..row + x1] {
                        acc += v;
                    }
                }
                out.push(acc * scale);
            }
        }
    }
    Tensor::new([c, oh, ow], out)
}

pub fn avgpool_backward<T: Scalar>(grad_out: &Tensor<T>, input_shape: &[usize], spec: &PoolSpec) -> Result<Tensor<T>> {
    let [c, h, w] = *input_shape else {
        return Err(Error::shape("avgpool backward", "input must be [C, H, W]"));
    };
    let (oh, ow) = out_dims(h, w, spec)?;
    if grad_out.shape() != [c, oh, ow] {
        return Err(Error::shape("avgpool backward", "gradient shape mismatch"));
    }
    let scale = T::one() / T::from_f64((spec.kernel.0 * spec.kernel.1) as f64);
    let mut grad = Tensor::zeros([c, h, w]);
    let g = grad.data_mut();
    let up = grad_out.data();
    for ch in 0..c {
        let base = ch * h * w;
        for oy in 0..oh {
            let (y0, y1) = window_range(oy, spec.kernel.0, spec.stride.0, spec.padding.0, h);
            for ox in 0..ow {
                let (x0, x1) = window_range(ox, spec.kernel.1, spec.stride.1, spec.padding.1, w);
                let d = up[(ch * oh + oy) * ow + ox] * scale;
                for y in y0..y1 {
                    for x in x0..x1 {
                        g[base + y * w + x] += d;
                    }
                }
            }
        }
    }
    Ok(grad)
}
