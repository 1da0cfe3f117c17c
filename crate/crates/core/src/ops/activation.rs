//! Pointwise and per-location layers: ReLU, inverted dropout, channel softmax
//! and softmax cross-entropy.

use rand::Rng;

use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

pub fn relu<T: Scalar>(input: &Tensor<T>) -> Tensor<T> {
    input.map(|x| x.max(T::zero()))
}

/// Gradient through ReLU given the layer output (positive where active).
pub fn relu_backward<T: Scalar>(output: &Tensor<T>, grad_out: &Tensor<T>) -> Tensor<T> {
    let data = output
        .data()
        .iter()
        .zip(grad_out.data())
        .map(|(&y, &g)| if y > T::zero() { g } else { T::zero() })
        .collect();
    Tensor::new(output.shape().to_vec(), data).expect("same shape")
}

/// Inverted dropout: kept units are scaled by `1 / (1 - rate)` so the
/// expected output equals the input. Returns the output and the mask
/// (already including the scale).
pub fn dropout_forward<T: Scalar, R: Rng + ?Sized>(
    input: &Tensor<T>,
    rate: f64,
    rng: &mut R,
) -> (Tensor<T>, Tensor<T>) {
    let keep = 1.0 - rate;
    let scale = T::from_f64(1.0 / keep);
    let mask = Tensor::from_fn(input.shape().to_vec(), |_| {
        if rng.random::<f64>() < keep {
            scale
        } else {
            T::zero()
        }
    });
    let out = input.data().iter().zip(mask.data()).map(|(&x, &m)| x * m).collect();
    (Tensor::new(input.shape().to_vec(), out).expect("same shape"), mask)
}

pub fn dropout_backward<T: Scalar>(mask: &Tensor<T>, grad_out: &Tensor<T>) -> Tensor<T> {
    let data = mask.data().iter().zip(grad_out.data()).map(|(&m, &g)| m * g).collect();
    Tensor::new(mask.shape().to_vec(), data).expect("same shape")
}

/// Softmax over the channel axis at every spatial location of `[C, H, W]`.
pub fn softmax<T: Scalar>(logits: &Tensor<T>) -> Result<Tensor<T>> {
    let (c, h, w) = logits.dims3()?;
    let plane = h * w;
    let x = logits.data();
    let mut out = vec![T::zero(); x.len()];
    for i in 0..plane {
        let mut max = T::neg_infinity();
        for ch in 0..c {
            max = max.max(x[ch * plane + i]);
        }
        let mut total = T::zero();
        for ch in 0..c {
            let e = (x[ch * plane + i] - max).exp();
            out[ch * plane + i] = e;
            total += e;
        }
        for ch in 0..c {
            out[ch * plane + i] /= total;
        }
    }
    Tensor::new([c, h, w], out)
}

/// Vector-Jacobian product of [`softmax`]: `p * (g - sum_c p_c g_c)`.
pub fn softmax_backward<T: Scalar>(probs: &Tensor<T>, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
    let (c, h, w) = probs.dims3()?;
    if grad_out.shape() != probs.shape() {
        return Err(Error::shape("softmax backward", "gradient shape mismatch"));
    }
    let plane = h * w;
    let p = probs.data();
    let g = grad_out.data();
    let mut out = vec![T::zero(); p.len()];
    for i in 0..plane {
        let dot: T = (0..c).map(|ch| p[ch * plane + i] * g[ch * plane + i]).sum();
        for ch in 0..c {
            let idx = ch * plane + i;
            out[idx] = p[idx] * (g[idx] - dot);
        }
    }
    Tensor::new([c, h, w], out)
}

/// Cross-entropy of `softmax(logits)` against a single label shared by every
/// location, averaged over locations. Returns the loss and `dL/dlogits`.
pub fn softmax_cross_entropy<T: Scalar>(logits: &Tensor<T>, label: usize) -> Result<(f64, Tensor<T>)> {
    let (c, h, w) = logits.dims3()?;
    if label >= c {
        return Err(Error::Range(format!("label {label} with {c} classes")));
    }
    let plane = h * w;
    let mut grad = softmax(logits)?;
    let inv = T::from_f64(1.0 / plane as f64);
    let mut loss = 0.0;
    let g = grad.data_mut();
    for i in 0..plane {
        let idx = label * plane + i;
        loss -= g[idx].as_f64().max(1e-300).ln();
        g[idx] -= T::one();
    }
    for v in g.iter_mut() {
        *v *= inv;
    }
    Ok((loss / plane as f64, grad))
}
