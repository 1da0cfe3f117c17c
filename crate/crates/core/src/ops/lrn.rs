//! Across-channel local response normalization.

use crate::error::{Error, Result};
use crate::layer::LrnParams;
use crate::tensor::{Scalar, Tensor};

/// Returns the normalized map and the per-element denominators
/// `s = k + alpha * sum a^2` the backward pass needs.
pub fn lrn_forward<T: Scalar>(input: &Tensor<T>, p: &LrnParams) -> Result<(Tensor<T>, Tensor<T>)> {
    let (c, h, w) = input.dims3()?;
    let plane = h * w;
    let half = p.size / 2;
    let alpha = T::from_f64(p.alpha);
    let k = T::from_f64(p.k);
    let beta = T::from_f64(p.beta);
    let x = input.data();
    let mut scale = vec![k; x.len()];
    for ch in 0..c {
        let lo = ch.saturating_sub(half);
        let hi = (ch + half).min(c - 1);
        let dst = &mut scale[ch * plane..(ch + 1) * plane];
        for src_ch in lo..=hi {
            let src = &x[src_ch * plane..(src_ch + 1) * plane];
            for (s, &v) in dst.iter_mut().zip(src) {
                *s += alpha * v * v;
            }
        }
    }
    let out = x.iter().zip(&scale).map(|(&v, &s)| v * s.powf(-beta)).collect();
    Ok((Tensor::new([c, h, w], out)?, Tensor::new([c, h, w], scale)?))
}

pub fn lrn_backward<T: Scalar>(
    input: &Tensor<T>,
    scale: &Tensor<T>,
    grad_out: &Tensor<T>,
    p: &LrnParams,
) -> Result<Tensor<T>> {
    let (c, h, w) = input.dims3()?;
    if scale.shape() != input.shape() || grad_out.shape() != input.shape() {
        return Err(Error::shape("lrn backward", "cached state does not match input"));
    }
    let plane = h * w;
    let half = p.size / 2;
    let alpha = T::from_f64(p.alpha);
    let beta = T::from_f64(p.beta);
    let two = T::from_f64(2.0);
    let x = input.data();
    let s = scale.data();
    let g = grad_out.data();
    // r_c = g_c * a_c * s_c^(-beta - 1)
    let ratio: Vec<T> = (0..x.len())
        .map(|i| g[i] * x[i] * s[i].powf(-beta - T::one()))
        .collect();
    let mut grad: Vec<T> = (0..x.len()).map(|i| g[i] * s[i].powf(-beta)).collect();
    for ch in 0..c {
        let lo = ch.saturating_sub(half);
        let hi = (ch + half).min(c - 1);
        for i in 0..plane {
            let mut acc = T::zero();
            for other in lo..=hi {
                acc += ratio[other * plane + i];
            }
            let idx = ch * plane + i;
            grad[idx] -= two * alpha * beta * x[idx] * acc;
        }
    }
    Tensor::new([c, h, w], grad)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_channel_matches_formula() {
        let p = LrnParams::default();
        let x = Tensor::<f64>::new([1, 1, 2], vec![3.0, -1.0]).unwrap();
        let (y, _) = lrn_forward(&x, &p).unwrap();
        let want = |a: f64| a / (2.0 + 1e-4 * a * a).powf(0.75);
        assert!((y.data()[0] - want(3.0)).abs() < 1e-12);
        assert!((y.data()[1] - want(-1.0)).abs() < 1e-12);
    }

    #[test]
    fn window_spans_neighbouring_channels() {
        let p = LrnParams {
            size: 3,
            alpha: 0.5,
            beta: 1.0,
            k: 1.0,
        };
        let x = Tensor::<f64>::new([3, 1, 1], vec![1.0, 2.0, 3.0]).unwrap();
        let (_, s) = lrn_forward(&x, &p).unwrap();
        assert_eq!(s.data(), &[1.0 + 0.5 * 5.0, 1.0 + 0.5 * 14.0, 1.0 + 0.5 * 13.0]);
    }
}
